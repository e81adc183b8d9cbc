//! Deliberately naive reference clusterer.
//!
//! Clusters are plain member lists; every centroid is recomputed from the
//! raw input rows on every step. Nothing here calls into the library's
//! similarity or engine code.

pub struct Reference {
    pub strictness: f64,
    pub n_features: usize,
    pub members: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub cluster: usize,
    pub path: &'static str,
    pub matched: Vec<usize>,
    pub averages: Vec<Option<f64>>,
}

impl Reference {
    pub fn new(strictness: f64, n_features: usize) -> Self {
        Self {
            strictness,
            n_features,
            members: Vec::new(),
        }
    }

    pub fn should_match(&self) -> usize {
        let need = (self.n_features as f64 * self.strictness / 100.0).ceil() as usize;
        need.max(1)
    }

    fn centroid(&self, rows: &[Vec<f64>], cluster: usize) -> Vec<f64> {
        let members = &self.members[cluster];
        let mut c = vec![0.0; self.n_features];
        for &m in members {
            for j in 0..self.n_features {
                c[j] += rows[m][j];
            }
        }
        for v in &mut c {
            *v /= members.len() as f64;
        }
        c
    }

    /// Feeds `rows[index]`; clusters are 1-based in the returned step.
    pub fn feed(&mut self, rows: &[Vec<f64>], index: usize) -> Step {
        let d = &rows[index];
        let lo = self.strictness;
        let hi = 100.0 + (100.0 - self.strictness);
        let need = self.should_match();

        let mut matched = Vec::new();
        let mut averages = Vec::new();
        let mut qualified = Vec::new();
        for i in 0..self.members.len() {
            let c = self.centroid(rows, i);
            let mut count = 0;
            let mut sum = 0.0;
            for j in 0..self.n_features {
                let s = if c[j] == 0.0 {
                    if d[j] == 0.0 {
                        Some(100.0)
                    } else {
                        None
                    }
                } else {
                    Some(100.0 * d[j] / c[j])
                };
                if let Some(s) = s {
                    if s >= lo && s <= hi {
                        count += 1;
                        sum += if s > 100.0 { 100.0 - (s - 100.0) } else { s };
                    }
                }
            }
            matched.push(count);
            averages.push(if count > 0 {
                Some(sum / count as f64)
            } else {
                None
            });
            if count >= need {
                qualified.push(i);
            }
        }

        let (winner, path) = if qualified.is_empty() {
            self.members.push(Vec::new());
            (self.members.len() - 1, "EMPTY_LIST_NEW_CLUSTER")
        } else if qualified.len() == 1 {
            (qualified[0], "SINGLE_QUALIFIED")
        } else {
            let top = qualified.iter().map(|&i| matched[i]).max().unwrap();
            let tied: Vec<usize> = qualified
                .iter()
                .copied()
                .filter(|&i| matched[i] == top)
                .collect();
            if tied.len() == 1 {
                (tied[0], "MAX_MATCHED")
            } else {
                let mut best = tied[0];
                for &i in &tied[1..] {
                    if averages[i].unwrap() > averages[best].unwrap() {
                        best = i;
                    }
                }
                (best, "AVG_TIEBREAK")
            }
        };
        self.members[winner].push(index);
        Step {
            cluster: winner + 1,
            path,
            matched,
            averages,
        }
    }

    pub fn run(strictness: f64, n_features: usize, rows: &[Vec<f64>]) -> (Self, Vec<Step>) {
        let mut r = Self::new(strictness, n_features);
        let steps = (0..rows.len()).map(|i| r.feed(rows, i)).collect();
        (r, steps)
    }
}

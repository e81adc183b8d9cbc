//! Domain types shared by the similarity functions, the engine, ingestion and
//! persistence.
//!
//! A [`Cluster`] stores per-feature running sums and a member count; its
//! centroid is always derived on demand so that repeated joins never
//! accumulate averaging drift.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rejections produced while building a [`Config`] or a [`DataPoint`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("strictness must lie in (0, 100], got {0}")]
    StrictnessOutOfRange(f64),
    #[error("n_features must be at least 1, got {0}")]
    BadDimensionality(usize),
    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("feature {index} is negative ({value})")]
    NegativeFeature { index: usize, value: f64 },
    #[error("feature {index} is not finite")]
    NonFiniteFeature { index: usize },
}

/// Run-wide parameters: the strictness percentage and the feature count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    strictness: f64,
    n_features: usize,
}

impl Config {
    /// Accepts `0 < strictness <= 100` and `n_features >= 1`.
    pub fn new(strictness: f64, n_features: usize) -> Result<Self, ValidationError> {
        // NaN fails both comparisons and lands here too.
        if !(strictness > 0.0 && strictness <= 100.0) {
            return Err(ValidationError::StrictnessOutOfRange(strictness));
        }
        if n_features < 1 {
            return Err(ValidationError::BadDimensionality(n_features));
        }
        Ok(Self {
            strictness,
            n_features,
        })
    }

    pub fn strictness(&self) -> f64 {
        self.strictness
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

/// Checks a raw feature vector against an expected dimensionality.
pub fn validate_features(features: &[f64], n_features: usize) -> Result<(), ValidationError> {
    if features.len() != n_features {
        return Err(ValidationError::DimensionMismatch {
            expected: n_features,
            actual: features.len(),
        });
    }
    for (index, &value) in features.iter().enumerate() {
        if !value.is_finite() {
            return Err(ValidationError::NonFiniteFeature { index });
        }
        if value < 0.0 {
            return Err(ValidationError::NegativeFeature { index, value });
        }
    }
    Ok(())
}

/// One validated observation from the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    seq: u64,
    features: Vec<f64>,
    label: Option<String>,
}

impl DataPoint {
    /// Validates `features` against `config` and tags the point with its
    /// 0-based arrival index.
    pub fn new(seq: u64, features: Vec<f64>, config: &Config) -> Result<Self, ValidationError> {
        Self::with_dims(seq, features, config.n_features())
    }

    pub(crate) fn with_dims(
        seq: u64,
        features: Vec<f64>,
        n_features: usize,
    ) -> Result<Self, ValidationError> {
        validate_features(&features, n_features)?;
        Ok(Self {
            seq,
            features,
            label: None,
        })
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Optional caller-supplied identifier (the JSONL `id` key).
    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }
}

/// A cluster represented by its running feature sums.
///
/// Each sum is kept as a compensated pair: `feature_sums[j]` holds the
/// rounded running total and `sum_residuals[j]` the accumulated rounding
/// error, so `feature_sums[j] + sum_residuals[j]` tracks the exact total. The
/// centroid is derived from both and cached; it is recomputed whenever the
/// cluster changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub(crate) id: u32,
    pub(crate) member_count: u64,
    pub(crate) feature_sums: Vec<f64>,
    pub(crate) sum_residuals: Vec<f64>,
    pub(crate) member_seqs: Vec<u64>,
    centroid: Vec<f64>,
}

/// Error-free transformation: `a + b == s + err` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `(hi + lo) / n`, with one remainder correction so that the mean of `n`
/// copies of `x` comes out as exactly `x`.
#[inline]
fn compensated_mean(hi: f64, lo: f64, n: f64) -> f64 {
    let q = hi / n;
    let r = (-q).mul_add(n, hi) + lo;
    q + r / n
}

impl Cluster {
    pub(crate) fn found(id: u32, point: &DataPoint) -> Self {
        let n = point.features().len();
        Self {
            id,
            member_count: 1,
            feature_sums: point.features().to_vec(),
            sum_residuals: vec![0.0; n],
            member_seqs: vec![point.seq()],
            centroid: point.features().to_vec(),
        }
    }

    /// Rebuilds a cluster from persisted parts. Shape and consistency are
    /// checked later by [`ClusterState::audit`].
    pub fn from_parts(
        id: u32,
        member_count: u64,
        feature_sums: Vec<f64>,
        sum_residuals: Vec<f64>,
        member_seqs: Vec<u64>,
    ) -> Self {
        let mut c = Self {
            id,
            member_count,
            feature_sums,
            sum_residuals,
            member_seqs,
            centroid: Vec::new(),
        };
        c.refresh_centroid();
        c
    }

    fn refresh_centroid(&mut self) {
        let n = self.member_count as f64;
        self.centroid = self
            .feature_sums
            .iter()
            .zip(&self.sum_residuals)
            .map(|(&hi, &lo)| compensated_mean(hi, lo, n))
            .collect();
    }

    /// Adds a member. Returns `false`, leaving the cluster untouched, if a
    /// sum would stop being finite.
    pub(crate) fn absorb(&mut self, point: &DataPoint) -> bool {
        let next: Vec<(f64, f64)> = self
            .feature_sums
            .iter()
            .zip(&self.sum_residuals)
            .zip(point.features())
            .map(|((&hi, &lo), &v)| {
                let (s, err) = two_sum(hi, v);
                (s, lo + err)
            })
            .collect();
        if next.iter().any(|(s, e)| !s.is_finite() || !e.is_finite()) {
            return false;
        }
        for (j, (s, e)) in next.into_iter().enumerate() {
            self.feature_sums[j] = s;
            self.sum_residuals[j] = e;
        }
        self.member_count += 1;
        self.member_seqs.push(point.seq());
        self.refresh_centroid();
        true
    }

    /// 1-based creation index (`C1`, `C2`, ...).
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn member_count(&self) -> u64 {
        self.member_count
    }

    /// Rounded running totals, one per feature.
    pub fn feature_sums(&self) -> &[f64] {
        &self.feature_sums
    }

    /// Rounding error not captured in [`Cluster::feature_sums`].
    pub fn sum_residuals(&self) -> &[f64] {
        &self.sum_residuals
    }

    pub fn member_seqs(&self) -> &[u64] {
        &self.member_seqs
    }

    /// Mean of feature `j` over all members.
    #[inline]
    pub fn centroid_at(&self, j: usize) -> f64 {
        self.centroid[j]
    }

    pub fn centroid_slice(&self) -> &[f64] {
        &self.centroid
    }

    /// Elementwise mean of all member points.
    pub fn centroid(&self) -> Vec<f64> {
        self.centroid.clone()
    }
}

/// Per-(point, cluster) evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchProfile {
    pub cluster_id: u32,
    /// Number of features whose similarity fell inside the qualifying band.
    pub matched_count: usize,
    /// Mean of the folded qualifying similarities; `None` when nothing matched.
    pub qualifying_avg: Option<f64>,
}

/// Which branch of the assignment dispatch produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionPath {
    EmptyListNewCluster,
    SingleQualified,
    MaxMatched,
    AvgTiebreak,
}

impl DecisionPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecisionPath::EmptyListNewCluster => "EMPTY_LIST_NEW_CLUSTER",
            DecisionPath::SingleQualified => "SINGLE_QUALIFIED",
            DecisionPath::MaxMatched => "MAX_MATCHED",
            DecisionPath::AvgTiebreak => "AVG_TIEBREAK",
        }
    }
}

/// Everything the engine decided for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentOutcome {
    pub point_seq: u64,
    pub assigned_cluster_id: u32,
    pub created_new: bool,
    /// One profile per pre-existing cluster, in cluster-id order.
    pub profiles: Vec<MatchProfile>,
    pub decision_path: DecisionPath,
}

impl AssignmentOutcome {
    /// Profile of the receiving cluster, absent when the point founded it.
    pub fn winner_profile(&self) -> Option<&MatchProfile> {
        if self.created_new {
            None
        } else {
            self.profiles
                .iter()
                .find(|p| p.cluster_id == self.assigned_cluster_id)
        }
    }
}

/// Violations reported by [`ClusterState::audit`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantViolation {
    #[error("cluster at position {position} has id {id}, expected {}", position + 1)]
    IdGap { position: usize, id: u32 },
    #[error("cluster {id}: member_count {count} but {seqs} member seqs")]
    CountMismatch { id: u32, count: u64, seqs: usize },
    #[error("cluster {id} has no members")]
    EmptyCluster { id: u32 },
    #[error("cluster {id} has {actual} feature sums, expected {expected}")]
    SumsDimension {
        id: u32,
        expected: usize,
        actual: usize,
    },
    #[error("cluster {id} feature {index} sum is negative or not finite")]
    BadSum { id: u32, index: usize },
    #[error("member counts add up to {total}, but {points_seen} points were seen")]
    CountConservation { total: u64, points_seen: u64 },
    #[error("point seq {seq} is out of range or assigned more than once")]
    Partition { seq: u64 },
}

/// The whole clustering state: config, clusters in creation order and the
/// number of points consumed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub(crate) config: Config,
    pub(crate) clusters: Vec<Cluster>,
    pub(crate) points_seen: u64,
}

impl ClusterState {
    pub fn new(config: Config) -> Self {
        Self {
            config,
            clusters: Vec::new(),
            points_seen: 0,
        }
    }

    /// Rebuilds a state from raw parts and audits it.
    pub fn from_parts(
        config: Config,
        clusters: Vec<Cluster>,
        points_seen: u64,
    ) -> Result<Self, InvariantViolation> {
        let state = Self {
            config,
            clusters,
            points_seen,
        };
        state.audit()?;
        Ok(state)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: u32) -> Option<&Cluster> {
        (id as usize)
            .checked_sub(1)
            .and_then(|i| self.clusters.get(i))
    }

    pub fn points_seen(&self) -> u64 {
        self.points_seen
    }

    /// Checks id contiguity, count conservation, the seq partition and the
    /// shape and sign of every sum vector.
    pub fn audit(&self) -> Result<(), InvariantViolation> {
        let n = self.config.n_features();
        let mut total = 0u64;
        for (position, cluster) in self.clusters.iter().enumerate() {
            if cluster.id as usize != position + 1 {
                return Err(InvariantViolation::IdGap {
                    position,
                    id: cluster.id,
                });
            }
            if cluster.member_count == 0 {
                return Err(InvariantViolation::EmptyCluster { id: cluster.id });
            }
            if cluster.member_count != cluster.member_seqs.len() as u64 {
                return Err(InvariantViolation::CountMismatch {
                    id: cluster.id,
                    count: cluster.member_count,
                    seqs: cluster.member_seqs.len(),
                });
            }
            if cluster.feature_sums.len() != n || cluster.sum_residuals.len() != n {
                return Err(InvariantViolation::SumsDimension {
                    id: cluster.id,
                    expected: n,
                    actual: cluster.feature_sums.len(),
                });
            }
            if let Some(index) = (0..n).position(|j| {
                let (hi, lo) = (cluster.feature_sums[j], cluster.sum_residuals[j]);
                !hi.is_finite() || !lo.is_finite() || hi < 0.0 || !cluster.centroid[j].is_finite()
            }) {
                return Err(InvariantViolation::BadSum {
                    id: cluster.id,
                    index,
                });
            }
            total += cluster.member_count;
        }
        if total != self.points_seen {
            return Err(InvariantViolation::CountConservation {
                total,
                points_seen: self.points_seen,
            });
        }
        let mut seen = vec![false; self.points_seen as usize];
        for seq in self.clusters.iter().flat_map(|c| c.member_seqs.iter()) {
            match seen.get_mut(*seq as usize) {
                Some(slot) if !*slot => *slot = true,
                _ => return Err(InvariantViolation::Partition { seq: *seq }),
            }
        }
        Ok(())
    }

    /// Cluster id holding point `seq`, if any.
    pub fn cluster_of(&self, seq: u64) -> Option<u32> {
        self.clusters
            .iter()
            .find(|c| c.member_seqs.contains(&seq))
            .map(|c| c.id)
    }
}

//! The single-pass assignment loop.
//!
//! Each incoming point is profiled against every existing cluster (in id
//! order, against the state before the point joins). Clusters whose matched
//! feature count reaches [`should_match_features`] form the qualified list:
//!
//! * empty list: the point founds a new cluster;
//! * one entry: the point joins it;
//! * several: the highest matched count wins; ties on that count go to the
//!   highest qualifying average, and remaining ties to the lowest id.

use thiserror::Error;

use crate::model::{
    AssignmentOutcome, Cluster, ClusterState, Config, DataPoint, DecisionPath, MatchProfile,
    ValidationError,
};
use crate::similarity::match_profile;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("point seq {got} arrived out of order, expected {expected}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("cluster {cluster_id} feature sums would overflow")]
    Overflow { cluster_id: u32 },
    #[error("cluster id space exhausted")]
    TooManyClusters,
}

/// Failure while folding a stream, tagged with the offending point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("point {seq}: {source}")]
pub struct StreamError {
    pub seq: u64,
    #[source]
    pub source: EngineError,
}

/// Minimum qualifying features for a cluster to enter the qualified list:
/// `ceil(n_features * strictness / 100)`.
pub fn should_match_features(config: &Config) -> usize {
    let raw = (config.n_features() as f64 * config.strictness() / 100.0).ceil() as usize;
    raw.clamp(1, config.n_features())
}

/// Picks the receiving cluster among `profiles`, or `None` when nothing
/// qualifies.
pub(crate) fn select(profiles: &[MatchProfile], threshold: usize) -> Option<(u32, DecisionPath)> {
    let mut qualified = profiles.iter().filter(|p| p.matched_count >= threshold);
    let first = qualified.next()?;

    let mut best = first;
    let mut tied_on_count = false;
    let mut n_qualified = 1usize;
    for p in qualified {
        n_qualified += 1;
        if p.matched_count > best.matched_count {
            best = p;
            tied_on_count = false;
        } else if p.matched_count == best.matched_count {
            tied_on_count = true;
            // strict > keeps the earliest id on an exact average tie
            if p.qualifying_avg > best.qualifying_avg {
                best = p;
            }
        }
    }

    let path = if n_qualified == 1 {
        DecisionPath::SingleQualified
    } else if tied_on_count {
        DecisionPath::AvgTiebreak
    } else {
        DecisionPath::MaxMatched
    };
    Some((best.cluster_id, path))
}

impl ClusterState {
    /// Should-match threshold for this state's config.
    pub fn threshold(&self) -> usize {
        should_match_features(&self.config)
    }

    /// Profiles `point` against every cluster without mutating anything.
    pub fn profiles(&self, point: &DataPoint) -> Vec<MatchProfile> {
        self.clusters
            .iter()
            .map(|c| match_profile(point, c, &self.config))
            .collect()
    }

    /// Assigns one point and returns what was decided.
    ///
    /// The point's seq must equal [`ClusterState::points_seen`]. On error the
    /// state is left unchanged.
    pub fn assign(&mut self, point: &DataPoint) -> Result<AssignmentOutcome, EngineError> {
        crate::model::validate_features(point.features(), self.config.n_features())?;
        if point.seq() != self.points_seen {
            return Err(EngineError::OutOfOrder {
                expected: self.points_seen,
                got: point.seq(),
            });
        }

        let profiles = self.profiles(point);
        let (assigned_cluster_id, decision_path) = match select(&profiles, self.threshold()) {
            Some((id, path)) => {
                self.join(id, point)?;
                (id, path)
            }
            None => {
                let id = u32::try_from(self.clusters.len() + 1)
                    .map_err(|_| EngineError::TooManyClusters)?;
                self.clusters.push(Cluster::found(id, point));
                (id, DecisionPath::EmptyListNewCluster)
            }
        };
        self.points_seen += 1;

        Ok(AssignmentOutcome {
            point_seq: point.seq(),
            assigned_cluster_id,
            created_new: decision_path == DecisionPath::EmptyListNewCluster,
            profiles,
            decision_path,
        })
    }

    fn join(&mut self, id: u32, point: &DataPoint) -> Result<(), EngineError> {
        if self.clusters[id as usize - 1].absorb(point) {
            Ok(())
        } else {
            Err(EngineError::Overflow { cluster_id: id })
        }
    }
}

/// Folds [`ClusterState::assign`] over `points` starting from an empty state.
pub fn run_stream<I>(
    config: Config,
    points: I,
) -> Result<(ClusterState, Vec<AssignmentOutcome>), StreamError>
where
    I: IntoIterator<Item = DataPoint>,
{
    let mut state = ClusterState::new(config);
    let outcomes = resume_stream(&mut state, points)?;
    Ok((state, outcomes))
}

/// Continues an existing state with more points.
pub fn resume_stream<I>(
    state: &mut ClusterState,
    points: I,
) -> Result<Vec<AssignmentOutcome>, StreamError>
where
    I: IntoIterator<Item = DataPoint>,
{
    points
        .into_iter()
        .map(|p| {
            state.assign(&p).map_err(|source| StreamError {
                seq: p.seq(),
                source,
            })
        })
        .collect()
}

//! Ratio similarity between a point feature and a centroid feature, the
//! qualifying band and the per-cluster [`MatchProfile`].
//!
//! A similarity of 100 means the two values are equal. A feature qualifies
//! when its similarity lies in `[strictness, 200 - strictness]`, both ends
//! inclusive and compared exactly.

use crate::model::{Cluster, Config, DataPoint, MatchProfile};

/// `100 * point / centroid`, or `None` when the centroid value is zero and
/// the point value is not.
///
/// Equal values, including a zero centroid against a zero point, yield
/// exactly 100; the quotient alone can round away from it.
#[inline]
pub fn feature_similarity(point_value: f64, centroid_value: f64) -> Option<f64> {
    if point_value == centroid_value {
        Some(100.0)
    } else if centroid_value > 0.0 {
        Some(100.0 * point_value / centroid_value)
    } else {
        None
    }
}

/// Inclusive qualifying band `(strictness, 200 - strictness)`.
#[inline]
pub fn qualifying_range(strictness: f64) -> (f64, f64) {
    (strictness, 100.0 + (100.0 - strictness))
}

#[inline]
pub fn qualifies(similarity: Option<f64>, strictness: f64) -> bool {
    let (lo, hi) = qualifying_range(strictness);
    matches!(similarity, Some(s) if s >= lo && s <= hi)
}

/// Folds values above 100 back below it (`200 - s`), so that 60 and 140
/// score the same.
#[inline]
pub fn scale_above_100(similarity: f64) -> f64 {
    if similarity > 100.0 {
        100.0 - (similarity - 100.0)
    } else {
        similarity
    }
}

/// Evaluates `point` against the current centroid of `cluster`.
///
/// `matched_count` counts qualifying features; `qualifying_avg` is the mean of
/// their folded similarities, in feature order.
pub fn match_profile(point: &DataPoint, cluster: &Cluster, config: &Config) -> MatchProfile {
    debug_assert_eq!(point.features().len(), cluster.centroid_slice().len());
    let strictness = config.strictness();
    let (lo, hi) = qualifying_range(strictness);

    let mut matched = 0usize;
    let mut folded_sum = 0.0;
    for (&value, &centroid) in point.features().iter().zip(cluster.centroid_slice()) {
        // same values as feature_similarity/qualifies, kept branch-free
        let s = if value == centroid {
            100.0
        } else if centroid > 0.0 {
            100.0 * value / centroid
        } else {
            f64::NAN
        };
        let hit = s >= lo && s <= hi;
        matched += hit as usize;
        folded_sum += if hit { scale_above_100(s) } else { 0.0 };
    }

    MatchProfile {
        cluster_id: cluster.id(),
        matched_count: matched,
        qualifying_avg: (matched > 0).then(|| folded_sum / matched as f64),
    }
}

/// All similarities of `point` against `cluster`'s centroid, for tracing.
pub fn similarity_row(point: &DataPoint, cluster: &Cluster) -> Vec<Option<f64>> {
    point
        .features()
        .iter()
        .enumerate()
        .map(|(j, &v)| feature_similarity(v, cluster.centroid_at(j)))
        .collect()
}

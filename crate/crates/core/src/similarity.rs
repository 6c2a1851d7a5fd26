//! Per-layer similarity predicates used by the A-tree and the selection
//! oracle. All threshold comparisons are inclusive.

use thiserror::Error;

use crate::model::{
    ConstraintKind, ConstraintLayerSpec, GeoPoint, KeypointDescriptorSet, Submission, Timestamp,
};

/// IUGG mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default nearest/second-nearest ratio for keypoint matching.
pub const DEFAULT_MATCH_RATIO: f64 = 0.75;

/// Default minimum matched-keypoint count for two photos to be similar.
pub const DEFAULT_MIN_MATCHES: u32 = 10;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("descriptor dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

pub fn similar_time(t1: Timestamp, t2: Timestamp, tau_seconds: f64) -> bool {
    time_distance(t1, t2) <= tau_seconds
}

pub fn time_distance(t1: Timestamp, t2: Timestamp) -> f64 {
    t1.abs_diff(t2) as f64
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat().to_radians(), b.lat().to_radians());
    let d_phi = phi2 - phi1;
    let d_lambda = (b.lon() - a.lon()).to_radians();
    let h = (d_phi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (d_lambda / 2.0).sin().powi(2);
    // rounding can push h a hair above 1 for antipodes
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

pub fn similar_position(a: GeoPoint, b: GeoPoint, delta_km: f64) -> bool {
    haversine_km(a, b) <= delta_km
}

/// Counts descriptors of `a` that pass the nearest/second-nearest ratio test
/// against `b`. A descriptor matches iff `d1 <= ratio * d2`. With fewer than
/// two descriptors in `b` the second neighbour is undefined and nothing
/// matches. Not symmetric in general.
pub fn match_keypoints(
    a: &KeypointDescriptorSet,
    b: &KeypointDescriptorSet,
    ratio: f64,
) -> Result<usize, DimensionMismatch> {
    if let (Some(left), Some(right)) = (a.dim(), b.dim()) {
        if left != right {
            return Err(DimensionMismatch { left, right });
        }
    }
    if a.is_empty() || b.len() < 2 {
        return Ok(0);
    }
    let count = a
        .descriptors()
        .iter()
        .filter(|query| {
            let (d1, d2) = two_nearest(query, b.descriptors());
            d1 <= ratio * d2
        })
        .count();
    Ok(count)
}

fn two_nearest(query: &[f64], candidates: &[Vec<f64>]) -> (f64, f64) {
    let mut best = f64::INFINITY;
    let mut second = f64::INFINITY;
    for c in candidates {
        let d = squared_distance(query, c);
        if d < best {
            second = best;
            best = d;
        } else if d < second {
            second = d;
        }
    }
    (best.sqrt(), second.sqrt())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn similar_visual(
    a: &KeypointDescriptorSet,
    b: &KeypointDescriptorSet,
    min_matches: u32,
    ratio: f64,
) -> Result<bool, DimensionMismatch> {
    Ok(match_keypoints(a, b, ratio)? >= min_matches as usize)
}

/// Symmetrised visual match count: the larger of the two directed counts.
/// Mismatched dimensions count as no match.
pub fn mutual_match_count(
    a: &KeypointDescriptorSet,
    b: &KeypointDescriptorSet,
    ratio: f64,
) -> usize {
    let ab = match_keypoints(a, b, ratio).unwrap_or(0);
    let ba = match_keypoints(b, a, ratio).unwrap_or(0);
    ab.max(ba)
}

/// Evaluates one constraint layer between two submissions.
///
/// Returns `Some(distance)` when the pair is similar under the layer, where
/// smaller is closer (seconds, kilometres, or the negated match count), and
/// `None` otherwise. The visual layer is symmetrised: the pair is similar when
/// either direction reaches the threshold.
pub fn layer_distance(
    layer: &ConstraintLayerSpec,
    a: &Submission,
    b: &Submission,
    ratio: f64,
) -> Option<f64> {
    match layer.kind {
        ConstraintKind::Time => {
            let d = time_distance(a.captured_at, b.captured_at);
            (d <= layer.threshold).then_some(d)
        }
        ConstraintKind::Position => {
            let d = haversine_km(a.location, b.location);
            (d <= layer.threshold).then_some(d)
        }
        ConstraintKind::Visual => {
            let n = mutual_match_count(&a.keypoints, &b.keypoints, ratio);
            (n as f64 >= layer.threshold).then_some(-(n as f64))
        }
    }
}

pub fn layer_similar(
    layer: &ConstraintLayerSpec,
    a: &Submission,
    b: &Submission,
    ratio: f64,
) -> bool {
    layer_distance(layer, a, b, ratio).is_some()
}

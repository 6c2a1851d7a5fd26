#![allow(dead_code)]

use std::sync::Arc;

use crowdreport::model::{ClassRegistry, GeoPoint, KeypointDescriptorSet, Submission, Timestamp};
use crowdreport::ptp::{ClassifierModel, RetryPolicy};
use crowdreport::service::{Platform, Settings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FEATURE_DIM: usize = 8;
pub const DESCRIPTOR_DIM: usize = 16;

pub fn gp(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

pub fn random_block(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

pub fn keyset(blocks: &[&[Vec<f64>]]) -> KeypointDescriptorSet {
    KeypointDescriptorSet::new(blocks.iter().flat_map(|b| b.iter().cloned()).collect()).unwrap()
}

/// Block-structured feature for `class` under the default four-class model.
pub fn feature(class: u32) -> Vec<f64> {
    let mut f = vec![0.0; FEATURE_DIM];
    let block = FEATURE_DIM / 4;
    for x in &mut f[class as usize * block..(class as usize + 1) * block] {
        *x = 1.0;
    }
    f
}

pub fn submission(
    id: &str,
    task: &str,
    t: Timestamp,
    at: GeoPoint,
    keypoints: KeypointDescriptorSet,
) -> Submission {
    Submission {
        submission_id: id.into(),
        task_id: task.into(),
        worker_id: format!("w-{id}"),
        captured_at: t,
        location: at,
        keypoints,
        global_feature: feature(0),
        thumbnail_ref: None,
    }
}

/// The A∼B, B∼C, A≁C fixture on one visual layer with k_min = 10.
pub fn abc(task: &str) -> [Submission; 3] {
    let blocks: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|i| random_block(100 + i, 10, DESCRIPTOR_DIM))
        .collect();
    let at = gp(36.8065, 10.1815);
    [
        submission("A", task, 1_000, at, keyset(&[&blocks[0], &blocks[1]])),
        submission("B", task, 1_000, at, keyset(&[&blocks[1], &blocks[2]])),
        submission("C", task, 1_000, at, keyset(&[&blocks[2], &blocks[3]])),
    ]
}

pub fn settings() -> Settings {
    Settings {
        feature_dim: FEATURE_DIM,
        descriptor_dim: DESCRIPTOR_DIM,
        retry: RetryPolicy {
            max_attempts: 3,
            backoff: std::time::Duration::from_millis(5),
        },
        ..Settings::default()
    }
}

pub fn reference_model() -> ClassifierModel {
    ClassifierModel::block_centroids(&ClassRegistry::default(), FEATURE_DIM, 1.0).unwrap()
}

pub fn fixed_clock(now: Timestamp) -> crowdreport::service::Clock {
    Arc::new(move || now)
}

pub fn memory_platform(now: Timestamp) -> Platform {
    Platform::in_memory(settings(), Arc::new(reference_model()), fixed_clock(now))
}

// Arrival order decides which photos end up grouped.
//
// A looks like B and B looks like C, but A does not look like C. Every node
// compares newcomers against its anchor only, so the tree keeps two groups
// when A arrives first and one when B does.

use crowdreport::atree::ATree;
use crowdreport::model::{
    ConstraintLayerSpec, GeoPoint, KeypointDescriptorSet, RepresentativePolicy, Submission,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|_| (0..16).map(|_| rng.random::<f64>()).collect())
        .collect()
}

fn photo(id: &str, left: &[Vec<f64>], right: &[Vec<f64>]) -> Submission {
    Submission {
        submission_id: id.into(),
        task_id: "bridge".into(),
        worker_id: format!("worker-{id}"),
        captured_at: 1_700_000_000,
        location: GeoPoint::new(36.8065, 10.1815).unwrap(),
        keypoints: KeypointDescriptorSet::new([left, right].concat()).unwrap(),
        global_feature: vec![1.0],
        thumbnail_ref: None,
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let blocks: Vec<_> = (0..4).map(block).collect();
    let a = photo("A", &blocks[0], &blocks[1]);
    let b = photo("B", &blocks[1], &blocks[2]);
    let c = photo("C", &blocks[2], &blocks[3]);

    for order in [[&a, &b, &c], [&b, &a, &c]] {
        let mut tree = ATree::new("bridge", vec![ConstraintLayerSpec::visual(10)]);
        for s in order {
            tree.insert(s.clone())?;
        }
        let names: Vec<&str> = order.iter().map(|s| s.submission_id.as_str()).collect();
        let first = tree.handover(RepresentativePolicy::First);
        let last = tree.handover(RepresentativePolicy::Last);
        println!(
            "{}: groups {:?}, FIRST keeps {:?}, LAST keeps {:?}, redundancy {:.3}",
            names.join("-"),
            tree.groups()
                .iter()
                .map(|g| g.members())
                .collect::<Vec<_>>(),
            first.representatives,
            last.representatives,
            first.redundancy_ratio
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

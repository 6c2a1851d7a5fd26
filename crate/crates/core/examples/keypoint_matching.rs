// Ratio-test keypoint matching and the minimum-match threshold.

use crowdreport::model::KeypointDescriptorSet;
use crowdreport::similarity::{
    match_keypoints, mutual_match_count, similar_visual, DEFAULT_MATCH_RATIO, DEFAULT_MIN_MATCHES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..128).map(|_| rng.random::<f64>()).collect())
        .collect()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scene = random(&mut rng, 20);
    for shared in [0, 5, 9, 10, 15, 20] {
        // a second photo of the scene: `shared` keypoints re-detected with noise
        let mut other: Vec<Vec<f64>> = scene[..shared]
            .iter()
            .map(|d| {
                d.iter()
                    .map(|x| x + rng.random_range(-0.005..0.005))
                    .collect()
            })
            .collect();
        other.extend(random(&mut rng, 20 - shared));
        let (a, b) = (
            KeypointDescriptorSet::new(scene.clone())?,
            KeypointDescriptorSet::new(other)?,
        );
        println!(
            "{shared:>2} shared: a->b {:>2}, b->a {:>2}, symmetric {:>2}, similar at k_min={DEFAULT_MIN_MATCHES}: {}",
            match_keypoints(&a, &b, DEFAULT_MATCH_RATIO)?,
            match_keypoints(&b, &a, DEFAULT_MATCH_RATIO)?,
            mutual_match_count(&a, &b, DEFAULT_MATCH_RATIO),
            similar_visual(&a, &b, DEFAULT_MIN_MATCHES, DEFAULT_MATCH_RATIO)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// Grouping reports by where they were taken.

use crowdreport::atree::ATree;
use crowdreport::model::{ConstraintLayerSpec, GeoPoint, KeypointDescriptorSet, Submission};
use crowdreport::similarity::haversine_km;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let places = [
        ("tunis-medina", 36.7992, 10.1706),
        ("tunis-kasbah", 36.7996, 10.1660),
        ("carthage", 36.8528, 10.3233),
        ("la-marsa", 36.8782, 10.3247),
        ("new-york", 40.7128, -74.0060),
    ];
    let origin = GeoPoint::new(places[0].1, places[0].2)?;
    for (name, lat, lon) in &places[1..] {
        println!(
            "{:>13} -> {name:<13} {:>9.3} km",
            places[0].0,
            haversine_km(origin, GeoPoint::new(*lat, *lon)?)
        );
    }

    let mut tree = ATree::new("city", vec![ConstraintLayerSpec::position(5.0)]);
    for (name, lat, lon) in places {
        tree.insert(Submission {
            submission_id: name.into(),
            task_id: "city".into(),
            worker_id: "w".into(),
            captured_at: 0,
            location: GeoPoint::new(lat, lon)?,
            keypoints: KeypointDescriptorSet::empty(),
            global_feature: vec![0.0],
            thumbnail_ref: None,
        })?;
    }
    for g in tree.groups() {
        println!("within 5 km: {:?}", g.members());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

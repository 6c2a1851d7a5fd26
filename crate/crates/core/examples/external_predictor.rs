// Classification delegated to another process over line-delimited JSON.
//
// A thread here plays the remote predictor by hosting the reference model;
// a real deployment runs its own model behind the same protocol and starts
// the service with `--predictor external:HOST:PORT`.

use std::net::TcpListener;
use std::sync::Arc;

use crowdreport::model::{
    ConstraintKind, GeoPoint, KeypointDescriptorSet, LayerInput, Submission, TaskMode, TaskSpec,
};
use crowdreport::ptp::{serve_connection, ClassifierModel, ExternalPredictor};
use crowdreport::service::{Platform, Settings};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let settings = Settings {
        feature_dim: 8,
        descriptor_dim: 16,
        ..Settings::default()
    };
    let model = ClassifierModel::block_centroids(&settings.classes, 8, 1.0)?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let _ = serve_connection(stream, &model);
        }
    });

    let predictor = ExternalPredictor::new(addr.clone(), settings.classes.clone());
    let platform = Platform::in_memory(settings, Arc::new(predictor), Arc::new(|| 0));
    platform.create_task(TaskSpec {
        task_id: Some("quay".into()),
        name: "flooded quay".into(),
        mode: TaskMode::Online,
        expected_class: Some(1),
        layers: vec![LayerInput {
            kind: ConstraintKind::Position,
            threshold: Some(0.2),
        }],
        opened_at: None,
        deadline: 3_600,
        representative_policy: None,
    })?;
    for (id, class) in [("q1", 1usize), ("q2", 0), ("q3", 1)] {
        let mut feature = vec![0.0; 8];
        feature[class * 2] = 1.0;
        feature[class * 2 + 1] = 1.0;
        let r = platform.submit(
            "quay",
            Submission {
                submission_id: id.into(),
                task_id: "quay".into(),
                worker_id: "w".into(),
                captured_at: 60,
                location: GeoPoint::new(53.5461, 9.9661)?,
                keypoints: KeypointDescriptorSet::empty(),
                global_feature: feature,
                thumbnail_ref: None,
            },
        )?;
        println!(
            "{id} via {addr}: class {} -> {:?}",
            r.predicted_class, r.decision
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// An online task rejects photos whose predicted class is not the task's.

use std::sync::Arc;

use crowdreport::model::{
    ConstraintKind, GeoPoint, KeypointDescriptorSet, LayerInput, Submission, TaskMode, TaskSpec,
};
use crowdreport::ptp::ClassifierModel;
use crowdreport::service::{Platform, Settings};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let settings = Settings {
        feature_dim: 8,
        descriptor_dim: 16,
        ..Settings::default()
    };
    // classes fire, flood, damaged_infrastructure, normal; two feature dims each
    let model = ClassifierModel::block_centroids(&settings.classes, 8, 1.0)?;
    let classes = settings.classes.clone();
    let platform = Platform::in_memory(settings, Arc::new(model), Arc::new(|| 1_000));
    let fire = classes.by_name("fire").unwrap().id;
    let task = platform.create_task(TaskSpec {
        task_id: None,
        name: "warehouse fire".into(),
        mode: TaskMode::Online,
        expected_class: Some(fire),
        layers: vec![
            LayerInput {
                kind: ConstraintKind::Time,
                threshold: Some(600.0),
            },
            LayerInput {
                kind: ConstraintKind::Position,
                threshold: Some(0.5),
            },
        ],
        opened_at: None,
        deadline: 10_000,
        representative_policy: None,
    })?;

    let uploads = [
        ("p1", 0, 1_100),
        ("p2", 0, 1_200),
        ("p3", 3, 1_250),
        ("p4", 1, 1_300),
        ("p5", 0, 3_000),
    ];
    for (id, class, t) in uploads {
        let mut feature = vec![0.05; 8];
        feature[class * 2] = 0.9;
        feature[class * 2 + 1] = 1.1;
        let receipt = platform.submit(
            &task.task_id,
            Submission {
                submission_id: id.into(),
                task_id: task.task_id.clone(),
                worker_id: format!("worker-{id}"),
                captured_at: t,
                location: GeoPoint::new(48.8566, 2.3522)?,
                keypoints: KeypointDescriptorSet::empty(),
                global_feature: feature,
                thumbnail_ref: None,
            },
        )?;
        println!(
            "{id}: predicted {:<24} confidence {:.3} -> {:?}",
            classes.get(receipt.predicted_class).unwrap().name,
            receipt.confidence,
            receipt.decision
        );
    }
    let report = platform.close_task(&task.task_id)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

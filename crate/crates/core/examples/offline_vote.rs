// An offline task learns its event class by plurality vote at close.

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
    let model = ClassifierModel::block_centroids(&settings.classes, 8, 1.0)?;
    let classes = settings.classes.clone();
    let platform = Platform::in_memory(settings, Arc::new(model), Arc::new(|| 0));
    let task = platform.create_task(TaskSpec {
        task_id: Some("river-watch".into()),
        name: "something happened by the river".into(),
        mode: TaskMode::Offline,
        expected_class: None,
        layers: vec![LayerInput {
            kind: ConstraintKind::Time,
            threshold: Some(900.0),
        }],
        opened_at: None,
        deadline: 7_200,
        representative_policy: None,
    })?;

    // flood, flood, fire, flood, normal, flood
    for (i, class) in [1usize, 1, 0, 1, 3, 1].into_iter().enumerate() {
        let mut feature = vec![0.0; 8];
        feature[class * 2] = 1.0;
        feature[class * 2 + 1] = 1.0;
        let r = platform.submit(
            &task.task_id,
            Submission {
                submission_id: format!("r{i}"),
                task_id: task.task_id.clone(),
                worker_id: format!("worker-{i}"),
                captured_at: 600 * i as i64,
                location: GeoPoint::new(-33.8688, 151.2093)?,
                keypoints: KeypointDescriptorSet::empty(),
                global_feature: feature,
                thumbnail_ref: None,
            },
        )?;
        println!("r{i}: {:?}", r.decision);
    }
    println!(
        "tree before close: {} groups",
        platform.status(&task.task_id)?.tree.group_count
    );

    let report = platform.close_task(&task.task_id)?;
    println!(
        "determined class {}, accepted {}, rejected {}, representatives {:?}",
        classes.get(report.determined_class).unwrap().name,
        report.total_accepted,
        report.rejected_false,
        report.representatives
    );
    for v in platform.status(&task.task_id)?.verdicts {
        println!("  {} -> {:?}", v.submission_id, v.decision);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

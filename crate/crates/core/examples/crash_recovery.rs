// State comes back from the event log after a crash, torn last line and all.

use std::io::Write;
use std::sync::Arc;

use crowdreport::model::{
    ConstraintKind, GeoPoint, KeypointDescriptorSet, LayerInput, Submission, TaskMode, TaskSpec,
};
use crowdreport::ptp::ClassifierModel;
use crowdreport::service::store::LOG_FILE;
use crowdreport::service::{Platform, Settings};

fn open(dir: &std::path::Path) -> Result<Platform, Box<dyn std::error::Error>> {
    let settings = Settings {
        feature_dim: 8,
        descriptor_dim: 16,
        ..Settings::default()
    };
    let model = ClassifierModel::block_centroids(&settings.classes, 8, 1.0)?;
    let (platform, recovery) = Platform::open(dir, settings, Arc::new(model), Arc::new(|| 0))?;
    println!(
        "opened store: {} records replayed, {} tasks, damage: {:?}",
        recovery.records_applied, recovery.tasks, recovery.truncation
    );
    Ok(platform)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("crowdreport-recovery-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);

    let platform = open(&dir)?;
    platform.create_task(TaskSpec {
        task_id: Some("storm".into()),
        name: "storm damage".into(),
        mode: TaskMode::Online,
        expected_class: Some(2),
        layers: vec![LayerInput {
            kind: ConstraintKind::Time,
            threshold: Some(300.0),
        }],
        opened_at: None,
        deadline: 86_400,
        representative_policy: None,
    })?;
    for i in 0..4 {
        let mut feature = vec![0.0; 8];
        feature[4] = 1.0;
        feature[5] = 1.0;
        platform.submit(
            "storm",
            Submission {
                submission_id: format!("s{i}"),
                task_id: "storm".into(),
                worker_id: "w".into(),
                captured_at: 1_000 * i,
                location: GeoPoint::new(51.5074, -0.1278)?,
                keypoints: KeypointDescriptorSet::empty(),
                global_feature: feature,
                thumbnail_ref: None,
            },
        )?;
    }
    let before = serde_json::to_string(&platform.state_snapshot())?;
    drop(platform);

    // a crash in the middle of the next append
    let mut log = std::fs::OpenOptions::new()
        .append(true)
        .open(dir.join(LOG_FILE))?;
    log.write_all(br#"{"seq":5,"type":"submission_judged","task_id":"sto"#)?;
    drop(log);

    let platform = open(&dir)?;
    let after = serde_json::to_string(&platform.state_snapshot())?;
    println!("state identical after recovery: {}", before == after);
    println!("counters: {:?}", platform.status("storm")?.counters);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

// A campus-sized labelled stream run end to end.

use crowdreport::model::ClassRegistry;
use crowdreport::simulator::{campus_spec, generate, render_table};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let classes = ClassRegistry::default();
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let scenario = generate(&campus_spec(seed), &classes)?;
        let evaluation = scenario.evaluate()?;
        assert_eq!(evaluation.partition, scenario.ground_truth_partition());
        rows.push(evaluation.metrics);
    }
    println!("{}", render_table(&rows));

    // the same spec as a file, as the `simulate` subcommand reads it
    let dir = std::env::temp_dir().join("crowdreport-campus");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("campus.toml");
    std::fs::write(&path, toml::to_string(&campus_spec(1))?)?;
    let metrics = crowdreport::simulator::run_scenario_file(&path, &dir.join("out"), &classes)?;
    println!(
        "from {}: redundancy {:.4}",
        path.display(),
        metrics.redundancy_ratio
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

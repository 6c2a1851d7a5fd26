macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(stream_order, "stream_order.rs");
example!(haversine_pairing, "haversine_pairing.rs");
example!(keypoint_matching, "keypoint_matching.rs");
example!(online_filtering, "online_filtering.rs");
example!(offline_vote, "offline_vote.rs");
example!(oracle_coverage, "oracle_coverage.rs");
example!(simulate_campus, "simulate_campus.rs");
example!(crash_recovery, "crash_recovery.rs");
example!(external_predictor, "external_predictor.rs");
example!(http_service, "http_service.rs");

#[test]
fn examples_run() {
    stream_order::run_example().expect("stream_order");
    haversine_pairing::run_example().expect("haversine_pairing");
    keypoint_matching::run_example().expect("keypoint_matching");
    online_filtering::run_example().expect("online_filtering");
    offline_vote::run_example().expect("offline_vote");
    oracle_coverage::run_example().expect("oracle_coverage");
    simulate_campus::run_example().expect("simulate_campus");
    crash_recovery::run_example().expect("crash_recovery");
    external_predictor::run_example().expect("external_predictor");
    http_service::run_example().expect("http_service");
}

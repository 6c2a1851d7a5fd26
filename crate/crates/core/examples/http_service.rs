// The HTTP API, driven with plain HTTP/1.1 requests.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use crowdreport::ptp::ClassifierModel;
use crowdreport::service::{http, Platform, Settings};
use serde_json::{json, Value};

fn request(
    addr: &str,
    method: &str,
    path: &str,
    body: Option<Value>,
) -> std::io::Result<(u16, Value)> {
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw)?;
    let status = raw[9..12].parse().unwrap_or(0);
    let payload = raw.split_once("\r\n\r\n").map_or("", |(_, b)| b);
    Ok((status, serde_json::from_str(payload).unwrap_or(Value::Null)))
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let settings = Settings {
        feature_dim: 8,
        descriptor_dim: 16,
        ..Settings::default()
    };
    let model = ClassifierModel::block_centroids(&settings.classes, 8, 1.0)?;
    let platform = Arc::new(Platform::in_memory(
        settings,
        Arc::new(model),
        Arc::new(|| 1_000),
    ));

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?.to_string();
    runtime.spawn(async move { axum::serve(listener, http::router(platform)).await });

    let (status, created) = request(
        &addr,
        "POST",
        "/tasks",
        Some(json!({
            "name": "fire on campus",
            "mode": "ONLINE",
            "expected_class": 0,
            "layers": [{"kind": "TIME", "threshold": 300}, {"kind": "POSITION", "threshold": 0.5}],
            "deadline": 5000
        })),
    )?;
    println!("POST /tasks -> {status} {}", created["task_id"]);
    let id = created["task_id"].as_str().unwrap_or_default().to_string();

    for (sid, t, lat) in [
        ("a", 1_100, 40.7448),
        ("b", 1_200, 40.7449),
        ("c", 1_250, 40.7600),
    ] {
        let body = json!({
            "submission_id": sid,
            "worker_id": "w1",
            "captured_at": t,
            "location": {"lat": lat, "lon": -74.0256},
            "global_feature": [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        });
        let (status, receipt) = request(
            &addr,
            "POST",
            &format!("/tasks/{id}/submissions"),
            Some(body),
        )?;
        println!("POST submission {sid} -> {status} {}", receipt["decision"]);
    }
    let (_, view) = request(&addr, "GET", &format!("/tasks/{id}"), None)?;
    println!("GET /tasks/{id} -> counters {}", view["counters"]);
    let (_, report) = request(&addr, "POST", &format!("/tasks/{id}/close"), None)?;
    println!("POST close -> {report}");
    let (status, _) = request(&addr, "GET", "/tasks/missing", None)?;
    println!("GET /tasks/missing -> {status}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

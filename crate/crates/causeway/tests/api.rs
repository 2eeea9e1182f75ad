use std::path::Path;
use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use causeway::analysis::sample_parallel;
use causeway::assets;
use causeway::server::{router, AppState};
use causeway::table::{self, LoadOptions};
use causeway::workspace::Workspace;
use causeway_core::synth::scenarios;
use causeway_core::Schema;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    dir: tempfile::TempDir,
    app: Router,
}

/// A workspace on the final reference graph with `n` simulated rows, also
/// written to `data.csv` in the fixture directory for the CLI.
fn fixture(n: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let m = scenarios::reference_study();
    let csv = table::table_to_string(&sample_parallel(&m, n, seed).unwrap());
    std::fs::write(dir.path().join("data.csv"), &csv).unwrap();
    let g = assets::final_graph();
    let t = table::load_table(csv.as_bytes(), &Schema::from_dag(&g), &LoadOptions::default())
        .unwrap()
        .table;
    let ws = Workspace::open(&dir.path().join("ws"), Some(g), Some(t)).unwrap();
    Fixture {
        app: router(AppState::new(ws)),
        dir,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_causeway"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[tokio::test]
async fn graph_versions_advance_with_edits() {
    let f = fixture(2000, 1);
    let (status, g) = call(&f.app, "GET", "/api/v1/graph", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g["graph_version"], 1);
    assert_eq!(g["edges"].as_array().unwrap().len(), 24);
    assert!(g["tool_version"].is_string());
    let id1 = g["graph_id"].clone();

    let edit = json!({"base_version": 1, "edits": [{"op": "remove-edge", "src": "Traffic", "dst": "RouteChoice"}]});
    let (status, g2) = call(&f.app, "POST", "/api/v1/graph/edits", Some(edit.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g2["graph_version"], 2);
    assert_eq!(g2["edges"].as_array().unwrap().len(), 23);
    assert_eq!(g2["history"].as_array().unwrap().len(), 2);
    assert_ne!(g2["graph_id"], id1);

    // the same edit based on the old version is stale
    let (status, err) = call(&f.app, "POST", "/api/v1/graph/edits", Some(edit)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "stale-version");

    let cycle = json!({"edits": [{"op": "add-edge", "src": "RouteChoice", "dst": "Urgency"}]});
    let (status, err) = call(&f.app, "POST", "/api/v1/graph/edits", Some(cycle)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"]["message"].as_str().unwrap().contains("cycle"), "{err}");

    let (_, old) = call(&f.app, "GET", "/api/v1/graph?version=1", None).await;
    assert_eq!(old["graph_id"], id1);
    let (status, _) = call(&f.app, "GET", "/api/v1/graph?version=9", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // the removed edge is now an implied independence that the data reject
    let (status, imp) = call(&f.app, "GET", "/api/v1/implications", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(imp["graph_version"], 2);
    assert_eq!(imp["report"]["verdict"], "Inconsistent");
    assert!(imp["report"]["provenance"]["config_hash"].is_string());

    let (status, _) = call(&f.app, "GET", "/api/v1/implications?alpha=2", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&f.app, "GET", "/api/v1/implications?bogus=1", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn graph_replacement_must_match_the_data() {
    let f = fixture(500, 2);
    let unknown = json!({"variables": [{"name": "Weather", "levels": ["Dry", "Wet"]}], "edges": []});
    let (status, err) = call(&f.app, "POST", "/api/v1/graph", Some(unknown)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
    let relevelled = json!({"variables": [{"name": "Traffic", "levels": ["Light", "Heavy"]}], "edges": []});
    let (status, _) = call(&f.app, "POST", "/api/v1/graph", Some(relevelled)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let text = assets::asset("reference-pilot").unwrap().text;
    let (status, g) = call(&f.app, "POST", "/api/v1/graph", Some(json!({"dagfile": text}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g["graph_version"], 2);
    assert_eq!(g["edges"].as_array().unwrap().len(), 26);

    // a graph over a subset of the columns is allowed
    let sub = json!({
        "variables": [
            {"name": "Urgency", "levels": ["NonUrgent", "Urgent"]},
            {"name": "Traffic", "levels": ["Normal", "Medium", "Heavy"]},
        ],
        "edges": [["Urgency", "Traffic"]],
    });
    let (status, g) = call(&f.app, "POST", "/api/v1/graph", Some(sub)).await;
    assert_eq!(status, StatusCode::OK, "{g}");
    let (status, imp) = call(&f.app, "GET", "/api/v1/implications", None).await;
    assert_eq!(status, StatusCode::OK, "{imp}");
    assert_eq!(imp["graph_version"], 3);

    let (status, _) = call(
        &f.app,
        "POST",
        "/api/v1/graph",
        Some(json!({"dagfile": "dagfile v2\n"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn adjustment_sets_and_reports_round_trip() {
    let f = fixture(500, 3);
    let (status, a) = call(
        &f.app,
        "GET",
        "/api/v1/adjustment-sets?treatment=Education&outcome=RouteChoice",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(a["report"]["minimal_sets"], json!([["Age", "Gender", "Race"]]));
    let id = a["report_id"].as_str().unwrap().to_string();

    let (status, r) = call(&f.app, "GET", &format!("/api/v1/reports/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["report"], a["report"]);
    assert!(f.dir.path().join(format!("ws/reports/{id}.json")).exists());

    let (status, c) = call(
        &f.app,
        "GET",
        "/api/v1/adjustment-sets?treatment=Traffic&outcome=RouteChoice&check=Urgency",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(c["report"]["checked"]["valid"], false);

    let (status, _) = call(
        &f.app,
        "GET",
        "/api/v1/adjustment-sets?treatment=Nope&outcome=RouteChoice",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&f.app, "GET", "/api/v1/reports/0123456789abcdef", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&f.app, "GET", "/api/v1/reports/..%2Fx", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn estimate_matches_the_cli_report() {
    let f = fixture(3000, 4);
    let body = json!({
        "treatment": "Traffic",
        "outcome": "RouteChoice",
        "outcome_level": "ExitA",
        "replicates": 200,
        "seed": 11,
        "compare_unadjusted": true,
    });
    let (status, api) = call(&f.app, "POST", "/api/v1/estimate", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{api}");
    let (_, again) = call(&f.app, "POST", "/api/v1/estimate", Some(body)).await;
    assert_eq!(api, again);

    let o = cli(
        f.dir.path(),
        &[
            "estimate",
            "@reference-final",
            "data.csv",
            "--treatment",
            "Traffic",
            "--outcome",
            "RouteChoice",
            "--outcome-level",
            "ExitA",
            "--replicates",
            "200",
            "--seed",
            "11",
            "--compare-unadjusted",
            "--out",
            "cli.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::read_to_string(f.dir.path().join("cli.json")).unwrap();
    let from_cli: Value = serde_json::from_str(&file).unwrap();
    assert_eq!(api["report"], from_cli);

    // the stored copy is byte-identical to the CLI output
    let id = api["report_id"].as_str().unwrap();
    let stored = std::fs::read_to_string(f.dir.path().join(format!("ws/reports/{id}.json"))).unwrap();
    assert_eq!(stored, file);

    let (status, err) = call(
        &f.app,
        "POST",
        "/api/v1/estimate",
        Some(json!({"treatment": "EmploymentStatus", "outcome": "RouteChoice", "outcome_level": "ExitA", "adjustment": ["Urgency"]})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"]["message"].as_str().unwrap().contains("descendant"));
    let (status, _) = call(
        &f.app,
        "POST",
        "/api/v1/estimate",
        Some(json!({"treatment": "Traffic", "typo": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn implications_match_the_cli_report() {
    let f = fixture(3000, 5);
    let (status, api) = call(&f.app, "GET", "/api/v1/implications?alpha=0.05", None).await;
    assert_eq!(status, StatusCode::OK);
    let o = cli(
        f.dir.path(),
        &[
            "implications",
            "@reference-final",
            "data.csv",
            "--alpha",
            "0.05",
            "--out",
            "imp.json",
        ],
    );
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let from_cli: Value = serde_json::from_slice(&std::fs::read(f.dir.path().join("imp.json")).unwrap()).unwrap();
    assert_eq!(api["report"], from_cli);
}

#[tokio::test]
async fn simulate_matches_the_cli_sampler() {
    let f = fixture(10, 6);
    let (status, s) = call(
        &f.app,
        "POST",
        "/api/v1/simulate",
        Some(json!({"scenario": "confounded-triangle", "n": 300, "seed": 8})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["graph_version"], Value::Null);
    let o = cli(
        f.dir.path(),
        &["simulate", "@confounded-triangle", "--n", "300", "--seed", "8"],
    );
    assert_eq!(s["report"]["csv"].as_str().unwrap().as_bytes(), o.stdout.as_slice());

    let (status, _) = call(
        &f.app,
        "POST",
        "/api/v1/simulate",
        Some(json!({"scenario": "nope", "n": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&f.app, "POST", "/api/v1/simulate", Some(json!({"n": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &f.app,
        "POST",
        "/api/v1/simulate",
        Some(json!({"scenario": "collider-trap", "n": 2_000_000})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn workspace_without_data_refuses_data_analyses() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(dir.path(), Some(assets::final_graph()), None).unwrap();
    let app = router(AppState::new(ws));
    let (status, err) = call(&app, "GET", "/api/v1/implications", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "missing-input");
    let (status, _) = call(
        &app,
        "GET",
        "/api/v1/adjustment-sets?treatment=Traffic&outcome=RouteChoice",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn occupied_port_is_reported() {
    let taken = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = taken.local_addr().unwrap();
    let err = causeway::server::bind(addr).await.unwrap_err();
    assert!(matches!(err, causeway::server::ServeError::PortInUse(p) if p == addr.port()));
}

#[tokio::test]
async fn server_answers_over_tcp_and_shuts_down() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(dir.path(), Some(assets::final_graph()), None).unwrap();
    let listener = causeway::server::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(causeway::server::serve(listener, AppState::new(ws), async {
        let _ = rx.await;
    }));
    let resp = tokio::task::spawn_blocking(move || {
        use std::io::{Read, Write};
        let mut stream = std::net::TcpStream::connect(addr).unwrap();
        stream
            .write_all(b"GET /api/v1/graph HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n")
            .unwrap();
        let mut resp = String::new();
        stream.read_to_string(&mut resp).unwrap();
        resp
    })
    .await
    .unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"graph_version\":1"));
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}

#[tokio::test]
async fn every_response_carries_provenance() {
    let f = fixture(1500, 7);
    let edit = json!({"edits": [{"op": "remove-edge", "src": "Traffic", "dst": "RouteChoice"}]});
    let estimate =
        json!({"treatment": "Traffic", "outcome": "RouteChoice", "outcome_level": "ExitA", "replicates": 100});
    let simulate = json!({"scenario": "collider-trap", "n": 10});
    let mut responses = vec![
        call(&f.app, "GET", "/api/v1/graph", None).await,
        call(&f.app, "POST", "/api/v1/estimate", Some(estimate)).await,
        call(&f.app, "POST", "/api/v1/graph/edits", Some(edit)).await,
        call(&f.app, "GET", "/api/v1/implications", None).await,
        call(
            &f.app,
            "GET",
            "/api/v1/adjustment-sets?treatment=Age&outcome=RouteChoice",
            None,
        )
        .await,
        call(&f.app, "POST", "/api/v1/simulate", Some(simulate)).await,
    ];
    let id = responses[1].1["report_id"].as_str().unwrap().to_string();
    let stored = call(&f.app, "GET", &format!("/api/v1/reports/{id}"), None).await;
    // computed on version 1, which is no longer active
    assert_eq!(stored.1["graph_version"], 1);
    responses.push(stored);
    for (status, body) in &responses {
        assert_eq!(*status, StatusCode::OK, "{body}");
        let obj = body.as_object().unwrap();
        for key in ["graph_version", "config_hash", "tool_version"] {
            assert!(obj.contains_key(key), "{key} missing from {body}");
        }
        assert_eq!(body["tool_version"], env!("CARGO_PKG_VERSION"));
    }
}

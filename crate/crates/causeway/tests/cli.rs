use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn causeway(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causeway"))
        .args(args)
        .current_dir(dir)
        .env_remove("CAUSEWAY_WORKSPACE")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn simulate(dir: &Path, model: &str, n: usize, seed: u64, file: &str) {
    let o = causeway(
        &[
            "simulate",
            model,
            "--n",
            &n.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            file,
        ],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
}

#[test]
fn validate_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let ok = causeway(&["validate", "@reference-final"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(text(&ok.stdout), "valid DAG: 12 variables, 24 edges\n");
    let scm = causeway(&["validate", "@reference-study"], dir.path());
    assert!(text(&scm.stdout).starts_with("valid structural model"));

    std::fs::write(
        dir.path().join("cyclic.dag"),
        "dagfile v1\nvar A levels=a,b ref=a\nvar B levels=a,b ref=a\nedge A -> B\nedge B -> A\n",
    )
    .unwrap();
    let bad = causeway(&["validate", "cyclic.dag"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    let err = text(&bad.stderr);
    assert!(err.contains("line 5"), "{err}");

    std::fs::write(dir.path().join("typo.dag"), "dagfile v1\nvar A levels=a,b ref=c\n").unwrap();
    let bad = causeway(&["validate", "typo.dag"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(text(&bad.stderr).contains("line 2"));

    let missing = causeway(&["validate", "@nothing"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn implications_exit_code_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "@reference-study", 10_000, 0, "ref.csv");

    let fin = causeway(&["implications", "@reference-final", "ref.csv"], dir.path());
    assert_eq!(fin.status.code(), Some(0), "{}", text(&fin.stdout));
    assert!(text(&fin.stdout).contains("Verdict: Consistent"));

    let pilot = causeway(&["implications", "@reference-pilot", "ref.csv", "--json"], dir.path());
    assert_eq!(pilot.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&pilot.stdout).unwrap();
    assert_eq!(doc["kind"], "implications");
    let removals: Vec<(String, String)> = doc["proposals"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["op"] == "remove-edge")
        .map(|p| (p["src"].as_str().unwrap().into(), p["dst"].as_str().unwrap().into()))
        .collect();
    for edge in [
        ("Traffic", "1stConcernWhileStuckInTraffic"),
        ("1stConcernWhileStuckInTraffic", "RouteChoice"),
    ] {
        assert!(
            removals.iter().any(|(s, d)| (s.as_str(), d.as_str()) == edge),
            "{edge:?} in {removals:?}"
        );
    }

    let bad_alpha = causeway(
        &["implications", "@reference-final", "ref.csv", "--alpha", "1.5"],
        dir.path(),
    );
    assert_eq!(bad_alpha.status.code(), Some(2));
}

#[test]
fn adjust_lists_minimal_sets() {
    let dir = tempfile::tempdir().unwrap();
    let o = causeway(
        &[
            "adjust",
            "@reference-final",
            "--treatment",
            "Education",
            "--outcome",
            "RouteChoice",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o.stdout);
    assert!(out.contains("Education  {Age, Gender, Race}"), "{out}");

    let o = causeway(
        &[
            "adjust",
            "@reference-final",
            "--treatment",
            "SocialImpact",
            "--outcome",
            "RouteChoice",
        ],
        dir.path(),
    );
    assert!(text(&o.stdout).contains("∅ (no adjustment needed)"));

    let o = causeway(
        &[
            "adjust",
            "@reference-final",
            "--treatment",
            "Traffic",
            "--outcome",
            "RouteChoice",
            "--check",
            "Urgency",
        ],
        dir.path(),
    );
    assert!(text(&o.stdout).contains("back-door trail Traffic ← SocialImpact → RouteChoice is open"));

    let o = causeway(
        &[
            "adjust",
            "@reference-final",
            "--treatment",
            "Nope",
            "--outcome",
            "RouteChoice",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("unknown variable `Nope`"));

    let o = causeway(&["adjust", "@reference-final", "--treatment", "Traffic"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_refuses_invalid_adjustment() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "@collider-trap", 3000, 1, "c.csv");
    let o = causeway(
        &[
            "estimate",
            "@collider-trap",
            "c.csv",
            "--treatment",
            "X",
            "--outcome",
            "Y",
            "--adjust",
            "C",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(err.contains("collider C") && err.contains("X ← A → C ← B → Y"), "{err}");

    let forced = causeway(
        &[
            "estimate",
            "@collider-trap",
            "c.csv",
            "--treatment",
            "X",
            "--outcome",
            "Y",
            "--adjust",
            "C",
            "--allow-invalid-adjustment",
        ],
        dir.path(),
    );
    assert_eq!(forced.status.code(), Some(0), "{}", text(&forced.stderr));
    let out = text(&forced.stdout);
    assert!(
        out.contains("[overridden]") && out.contains("Warning: back-door trail"),
        "{out}"
    );

    let few = causeway(
        &[
            "estimate",
            "@collider-trap",
            "c.csv",
            "--treatment",
            "X",
            "--outcome",
            "Y",
            "--replicates",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(few.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "@reference-study", 4000, 9, "a.csv");
    simulate(dir.path(), "@reference-study", 4000, 9, "b.csv");
    let (a, b) = (
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap(),
    );
    assert_eq!(a, b);

    let run = |seed: &str, out: &str| {
        causeway(
            &[
                "estimate",
                "@reference-final",
                "a.csv",
                "--study",
                "@reference-study-descriptor",
                "--treatment",
                "Traffic",
                "--outcome",
                "RouteChoice",
                "--compare-unadjusted",
                "--replicates",
                "200",
                "--seed",
                seed,
                "--out",
                out,
            ],
            dir.path(),
        )
    };
    let (r1, r2, _) = (run("4", "r1.json"), run("4", "r2.json"), run("5", "r3.json"));
    assert_eq!(r1.status.code(), Some(0), "{}", text(&r1.stderr));
    assert_eq!(r1.stdout, r2.stdout);
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("r1.json"), read("r2.json"));
    assert_ne!(read("r1.json"), read("r3.json"));

    let doc: serde_json::Value = serde_json::from_slice(&read("r1.json")).unwrap();
    assert_eq!(doc["format"], "causeway-report");
    assert_eq!(doc["config"]["outcome_level"], "ExitA");
    assert_eq!(
        doc["config"]["adjustment"],
        serde_json::json!(["SocialImpact", "Urgency"])
    );
    for key in ["tool_version", "graph_id", "data_id", "config_hash"] {
        assert!(doc["provenance"][key].is_string(), "{key}");
    }
}

#[test]
fn simulate_writes_study_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = causeway(
        &[
            "simulate",
            "@reference-study",
            "--study",
            "@reference-study-descriptor",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = text(&o.stdout);
    assert_eq!(csv.lines().count(), 411);
    let again = causeway(
        &[
            "simulate",
            "@reference-study",
            "--study",
            "@reference-study-descriptor",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(o.stdout, again.stdout);

    let o = causeway(&["simulate", "@reference-study"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn serve_reports_an_occupied_port() {
    let dir = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = causeway(&["serve", "--graph", "@reference-final", "--port", &port], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stderr).contains(&format!("port {port} is already in use")));
}

#[test]
fn serve_uses_the_workspace_variable_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let mut child = Command::new(env!("CARGO_BIN_EXE_causeway"))
        .args(["serve", "--graph", "@reference-final", "--port", "0"])
        .current_dir(dir.path())
        .env("CAUSEWAY_WORKSPACE", &ws)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    assert!(line.starts_with("serving"), "{line}");
    assert!(ws.join("graphs/v0001.dag").exists());
    assert!(ws.join(".lock").exists());
    let killed = Command::new("kill")
        .args(["-TERM", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(!ws.join(".lock").exists());
}

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;

use gapcast::dataset::{fetch_http_report, load_csv, synthesize, write_canonical, ColumnSchema, FetchConfig, SynthConfig, DEFAULT_FILL};
use gapcast::Error;

struct Outcome {
    code: i32,
    stderr: String,
}

fn gapcast(args: &[&str], envs: &[(&str, &str)]) -> Outcome {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gapcast"));
    cmd.args(args).env_remove("GAPCAST_NETWORK");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Outcome { code: out.status.code().unwrap(), stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

fn set(key: &str, path: &Path) -> String {
    format!("{key}=\"{}\"", path.display())
}

fn error_kind(stderr: &str) -> String {
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    v["error"].as_str().unwrap().to_string()
}

fn synth_table(dir: &Path, hours: usize) -> PathBuf {
    let out = dir.join("data");
    let r = gapcast(&["synth", "--set", &set("output_dir", &out), "--set", &format!("synth.hours={hours}")], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    out.join("table.csv")
}

#[test]
fn synth_train_predict_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let table = synth_table(dir.path(), 400);
    let model_dir = dir.path().join("lasso");
    let r = gapcast(&["train", "--set", &set("output_dir", &model_dir), "--set", &set("data.table", &table), "--set", "learner.kind=\"lasso\""], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for f in ["model.json", "training_log.json", "run_config.toml"] {
        assert!(model_dir.join(f).exists(), "{f}");
    }
    let model = model_dir.join("model.json");
    let pred = dir.path().join("pred");
    let r = gapcast(&["predict", "--set", &set("output_dir", &pred), "--set", &set("data.table", &table), "--set", &set("predict.model", &model)], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = std::fs::read_to_string(pred.join("forecast.csv")).unwrap();
    assert!(csv.lines().count() > 1);

    let eval = dir.path().join("eval");
    let models = format!("evaluate.models=[\"{}\"]", model.display());
    let r = gapcast(&["evaluate", "--set", &set("output_dir", &eval), "--set", &set("data.table", &table), "--set", &models, "--set", "evaluate.window_hours=24"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["lasso"]["nrmse_percent"].as_f64().unwrap() > 0.0);
    assert!(metrics["baseline_train_mean"]["rmse"].as_f64().is_some());
    assert!(eval.join("forecast_24h.csv").exists());
}

#[test]
fn unknown_learner_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = gapcast(&["train", "--set", &set("output_dir", dir.path()), "--set", "learner.kind=\"knn\""], &[]);
    assert_eq!(r.code, 2);
    assert_eq!(error_kind(&r.stderr), "BadConfig");
}

#[test]
fn malformed_override_and_unknown_subcommand() {
    assert_eq!(gapcast(&["synth", "--set", "no_equals_sign"], &[]).code, 2);
    assert_eq!(gapcast(&["transmogrify"], &[]).code, 2);
    assert_eq!(gapcast(&["synth", "--set", "synth.bogus=1"], &[]).code, 2);
}

#[test]
fn missing_table_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = gapcast(&["train", "--set", &set("output_dir", dir.path()), "--set", &set("data.table", &dir.path().join("absent.csv"))], &[]);
    assert_eq!(r.code, 3);
    assert_eq!(error_kind(&r.stderr), "MissingFile");
    let r = gapcast(&["train", "--config", dir.path().join("absent.toml").to_str().unwrap()], &[]);
    assert_eq!(r.code, 3);
}

#[test]
fn flat_prices_are_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = synthesize(&SynthConfig { hours: 200, ..SynthConfig::default() }).unwrap();
    for c in t.columns.iter_mut().filter(|c| c.name.contains("lmp")) {
        c.values.iter_mut().for_each(|v| *v = 30.0);
    }
    let table = dir.path().join("flat.csv");
    write_canonical(&t, &table, DEFAULT_FILL).unwrap();
    let model_dir = dir.path().join("m");
    let r = gapcast(&["train", "--set", &set("output_dir", &model_dir), "--set", &set("data.table", &table), "--set", "learner.kind=\"lasso\""], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let models = format!("evaluate.models=[\"{}\"]", model_dir.join("model.json").display());
    let r = gapcast(&["evaluate", "--set", &set("output_dir", &dir.path().join("e")), "--set", &set("data.table", &table), "--set", &models], &[]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert_eq!(error_kind(&r.stderr), "DegenerateRange");
}

#[test]
fn ingest_merges_and_cleanses() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    let weather = dir.path().join("weather.csv");
    std::fs::write(&prices, "datetime,dam_lmp\n2019-05-01T00:00,30\n2019-05-01T01:00,31\n2019-05-01T01:00,99\n2019-05-01T03:00,\n").unwrap();
    std::fs::write(&weather, "datetime,condition\n2019-05-01T00:00,Clear\n2019-05-01T02:00,Fog\n").unwrap();
    let cfg = dir.path().join("ingest.toml");
    std::fs::write(
        &cfg,
        format!(
            r#"output_dir = "{}"
[data]
fill = -1.0

[[data.inputs]]
path = "{}"
columns = [{{ name = "datetime", kind = "datetime" }}, {{ name = "dam_lmp", kind = "numeric" }}]

[[data.inputs]]
path = "{}"
columns = [{{ name = "datetime", kind = "datetime" }}, {{ name = "condition", kind = "categorical" }}]
"#,
            dir.path().join("out").display(),
            prices.display(),
            weather.display()
        ),
    )
    .unwrap();
    let r = gapcast(&["ingest", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (t, fill) = gapcast::dataset::read_canonical(&dir.path().join("out/table.csv")).unwrap();
    assert_eq!(fill, -1.0);
    assert_eq!(t.len(), 4);
    assert_eq!(t.values("dam_lmp").unwrap(), &[30.0, 31.0, -1.0, -1.0]);
    assert_eq!(t.values("condition").unwrap(), &[0.0, -1.0, 1.0, -1.0]);
}

// ---------------------------------------------------------------------------
// fetch against a local fixture server

fn serve_once(status: &'static str, body: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = [0u8; 4096];
        let _ = stream.read(&mut buf);
        let response = format!("HTTP/1.1 {status}\r\nContent-Type: text/csv\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len());
        stream.write_all(response.as_bytes()).unwrap();
    });
    format!("http://{addr}/oasis/report")
}

const FIXTURE: &str = "datetime,dam_lmp\n2018-01-01T00:00,41.5\n2018-01-01T01:00,39.25\n";

fn fetch_config(endpoint: String) -> FetchConfig {
    FetchConfig {
        endpoint,
        query: [("queryname".to_string(), "PRC_LMP".to_string())].into_iter().collect(),
        timeout_secs: 5,
        network_enabled: true,
    }
}

#[test]
fn fetch_writes_body_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    fetch_http_report(&fetch_config(serve_once("200 OK", FIXTURE)), &out).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), FIXTURE.as_bytes());
}

#[test]
fn fetch_surfaces_http_status() {
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_http_report(&fetch_config(serve_once("404 Not Found", "missing")), &dir.path().join("r.csv")).unwrap_err();
    assert!(matches!(err, Error::HttpStatus(404)));
}

#[test]
fn malformed_body_fails_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    fetch_http_report(&fetch_config(serve_once("200 OK", "datetime,dam_lmp\nyesterday,41\n")), &out).unwrap();
    let schema = [ColumnSchema::datetime("datetime"), ColumnSchema::numeric("dam_lmp")];
    assert!(matches!(load_csv(&out, &schema), Err(Error::BadDatetime { row: 0, .. })));
}

#[test]
fn fetch_command_needs_the_network_flag() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = serve_once("200 OK", FIXTURE);
    let cfg = dir.path().join("fetch.toml");
    std::fs::write(
        &cfg,
        format!(
            "output_dir = \"{}\"\n[fetch]\nendpoint = \"{endpoint}\"\nfile = \"lmp.csv\"\ncolumns = [{{ name = \"datetime\", kind = \"datetime\" }}, {{ name = \"dam_lmp\", kind = \"numeric\" }}]\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let r = gapcast(&["fetch", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(r.code, 3);
    assert_eq!(error_kind(&r.stderr), "NetworkDisabled");
    let r = gapcast(&["fetch", "--config", cfg.to_str().unwrap()], &[("GAPCAST_NETWORK", "1")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(std::fs::read_to_string(dir.path().join("lmp.csv")).unwrap(), FIXTURE);
}

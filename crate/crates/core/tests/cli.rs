use std::path::Path;
use std::process::{Command, Output};

use coin_placer::topology::Topology;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coin-placer"))
        .args(args)
        .env_remove("COIN_PLACER_JOBS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn default_topology_goes_to_stdout() {
    let o = cli(&["gen-topology", "--default"]);
    assert_eq!(code(&o), 0);
    let t = Topology::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(t.executor_nodes().len(), 13);
    assert_eq!(t, Topology::build_default());
}

#[test]
fn invalid_topology_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Topology::build_default();
    t.set_capacity(0, -1.0);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, t.to_json()).unwrap();
    let o = cli(&["gen-topology", "--from", p(&path)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!o.stderr.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    assert_eq!(code(&cli(&["gen-dataset", "--runs", "0", "--out", p(&out)])), 1);
    assert_eq!(code(&cli(&["no-such-command"])), 1);
    assert!(!out.exists());
}

#[test]
fn solver_budget_exit_removes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = cli(&["gen-dataset", "--runs", "2", "--tasks", "40", "--time-limit", "0", "--out", p(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn missing_models_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    let o = cli(&["export-plots", "--models", p(&models), "--out-dir", p(&dir.path().join("plots"))]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("models"));
    let o = cli(&["evaluate", "--dataset", p(&dir.path().join("none.csv")), "--models", p(&models)]);
    assert_eq!(code(&o), 4);
}

fn figure_rows(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("data.csv");
    let models = dir.path().join("models");
    let o = cli(&["gen-dataset", "--runs", "6", "--tasks", "30", "--seed", "4", "--out", p(&ds)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let again = dir.path().join("again.csv");
    assert_eq!(code(&cli(&["gen-dataset", "--runs", "6", "--tasks", "30", "--seed", "4", "--out", p(&again)])), 0);
    assert_eq!(std::fs::read(&ds).unwrap(), std::fs::read(&again).unwrap());

    let train = [
        "train", "--dataset", p(&ds), "--k", "2", "--epochs", "3", "--delta", "4", "--mlp-hidden", "4,4",
        "--out-dir", p(&models),
    ];
    let o = cli(&train);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["folds.json", "gcn/fold_00.ckpt", "gcn/fold_01.ckpt", "mlp/fold_01.json", "dt/manifest.json"] {
        assert!(models.join(f).exists(), "{f}");
    }

    let o = cli(&["evaluate", "--dataset", p(&ds), "--models", p(&models), "--model", "gcn"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let acc = v["models"]["gcn"]["pooled"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let export = |out: &Path| {
        cli(&[
            "export-plots", "--models", p(&models), "--rates", "6,10", "--runs-per-rate", "2", "--tasks", "30",
            "--timing-tasks", "20", "--timing-runs", "2", "--out-dir", p(out),
        ])
    };
    let (a, b) = (dir.path().join("plots_a"), dir.path().join("plots_b"));
    assert_eq!(code(&export(&a)), 0);
    assert_eq!(code(&export(&b)), 0);
    for name in ["fig5_pg.csv", "fig6_mec_split.csv", "fig7_mec_nosplit.csv", "fig8_network_cost.csv"] {
        let text = figure_rows(&a, name);
        assert!(text.starts_with("# {"), "{name}");
        assert_eq!(text, figure_rows(&b, name), "{name}");
    }
    let header = figure_rows(&a, "fig5_pg.csv").lines().nth(1).unwrap().to_string();
    assert_eq!(header, "rate,pg_gnn,pg_mlp,pg_dt,pg_meconly");
    assert!(a.join("fig4_timing.csv").exists() && a.join("summary.json").exists());
}

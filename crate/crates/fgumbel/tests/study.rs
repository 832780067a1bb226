use std::path::Path;
use std::process::Command;

use fgumbel::study::{Method, Scenario, StudyConfig};

fn run_cli(config: &Path, out: &Path, threads: &str) {
    let o = Command::new(env!("CARGO_BIN_EXE_fgumbel"))
        .args(["study", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("FG_THREADS", threads)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn small_study_writes_outputs_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        r#"
scenario = "E2"
n = 100
n_reps = 10
seed = 7
n_oracle = 5000
methods = ["fg_ecm", "fg_bayes", "nm_em"]

[bayes]
n_iter = 600
burn_in = 200
n_chains = 2
"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_cli(&cfg, &a, "1");
    run_cli(&cfg, &b, "2");
    for f in ["replicates.csv", "summary.json", "kl_boxplot.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(!x.is_empty(), "{f} empty");
        assert_eq!(x, y, "{f} differs between runs");
    }
    let reps = std::fs::read_to_string(a.join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 3 * 10);
    let kl = std::fs::read_to_string(a.join("kl_boxplot.csv")).unwrap();
    assert!(kl.starts_with("method,stat,value"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_reps"], 10);
}

#[test]
fn scenarios_parse_and_resolve() {
    for tag in ["E1a", "E1b", "E2", "E3", "E4"] {
        let s: Scenario = tag.parse().unwrap();
        assert_eq!(s.to_string(), tag);
        let r = StudyConfig::new(s).resolve().unwrap();
        assert_eq!(r.n_reps, 200);
    }
    assert!("E5".parse::<Scenario>().is_err());
    let paper = StudyConfig { paper: true, ..StudyConfig::new(Scenario::E1b) }.resolve().unwrap();
    assert_eq!(paper.n_reps, 1000);
    let cfg = StudyConfig::from_toml("scenario = \"E3\"\nmethods = [\"nm_em\"]\n").unwrap();
    assert_eq!(cfg.methods, Some(vec![Method::NmEm]));
    assert!(StudyConfig::from_toml("scenario = \"E3\"\nmethods = [\"bogus\"]\n").is_err());
}

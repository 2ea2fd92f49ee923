use std::path::Path;
use std::process::{Command, Output};

fn mvos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvos")).args(args).env_remove("MVOS_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"copula":{"kind":"gumbel","d":2,"p":2.0},"intermediate":{"rules":[{},{}]},"n":1000,"replications":200,"seed":3}"#;

#[test]
fn dnorm_eval_and_validate() {
    let o = mvos(&["dnorm", "eval", "--spec", r#"{"kind":"logistic","p":2.0}"#, "--x", "1,1"]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let o = mvos(&["dnorm", "validate", "--spec", r#"{"kind":"sup"}"#, "--trials", "50"]);
    assert!(o.status.success(), "{o:?}");
    let o = mvos(&["dnorm", "eval", "--spec", r#"{"kind":"logistic","p":0.5}"#, "--x", "1,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let o = mvos(&["sample", "--copula", "gumbel", "--p", "2", "-d", "3", "-n", "100", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u1,u2,u3"));
    assert_eq!(lines.clone().count(), 100);
    assert!(lines.all(|l| l.split(',').all(|v| (0.0..=1.0).contains(&v.parse::<f64>().unwrap()))));
    let again = mvos(&["sample", "--copula", "gumbel", "--p", "2", "-d", "3", "-n", "100", "--seed", "9"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn closed_form_checks() {
    let o = mvos(&["check", "smirnov", "--margin", "exponential", "--n-grid", "1e4,1e6"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.lines().count() >= 11, "{out}");
    let o = mvos(&["check", "von-mises", "--margin", "pareto", "--alpha", "2"]);
    assert!(o.status.success(), "{o:?}");
    let o = mvos(&["check", "smirnov", "--margin", "pareto", "--alpha", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cov_reports_sigma() {
    let o = mvos(&["cov", "--dnorm", r#"{"kind":"logistic","p":2.0}"#, "--equal-k", "-d", "2"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("0.5857864376269"), "{}", stdout(&o));
}

#[test]
fn chi2rep_refuses_non_psd_lambda() {
    let a = 3f64.powf(-0.25);
    let lambda = format!("[[1,0,{a}],[0,1,{a}],[{a},{a},1]]");
    let o = mvos(&["chi2rep", "--lambda", &lambda, "-n", "100", "-k", "10", "-R", "5"]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    let a = 3f64.powf(-0.5);
    let lambda = format!("[[1,0,{a}],[0,1,{a}],[{a},{a},1]]");
    let o = mvos(&["chi2rep", "--lambda", &lambda, "-n", "100", "-k", "10", "-R", "5"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let (report, csv, matrices) = (dir.path().join("r.json"), dir.path().join("z.csv"), dir.path().join("m.csv"));
    let o = mvos(&[
        "experiment", "--config", &cfg, "--out", report.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
        "--matrices", matrices.to_str().unwrap(), "--threads", "2",
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["seed_overridden"], false);
    assert_eq!(v["all_passed"].as_bool().unwrap(), o.status.code() == Some(0));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 201);
    assert!(std::fs::read_to_string(&matrices).unwrap().starts_with("matrix,row,col,value"));

    let again = dir.path().join("r1.json");
    mvos(&["experiment", "--config", &cfg, "--out", again.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(std::fs::read(&report).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let report = dir.path().join("r.json");
    let o = Command::new(env!("CARGO_BIN_EXE_mvos"))
        .args(["experiment", "--config", &cfg, "--out", report.to_str().unwrap()])
        .env("MVOS_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.code().unwrap() <= 1, "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((v["seed"].as_u64(), v["seed_overridden"].as_bool()), (Some(77), Some(true)));
}

#[test]
fn rejected_configs_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    for (name, text) in [
        ("dim.json", SMALL.replace(r#""rules":[{},{}]"#, r#""rules":[{}]"#)),
        ("n.json", SMALL.replace(r#""n":1000"#, r#""n":1"#)),
        ("syntax.json", "{".to_string()),
    ] {
        let cfg = write(dir.path(), name, &text);
        let o = mvos(&["experiment", "--config", &cfg, "--out", report.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {o:?}");
        assert!(!report.exists(), "{name}");
    }
    let a = 3f64.powf(-0.25);
    let rep = format!(
        r#"{{"kind":"representation","copula":{{"kind":"independence","d":3}},"intermediate":{{"rules":[{{}},{{}},{{}}]}},"n":400,"replications":10,"seed":1,"lambda":[[1,0,{a}],[0,1,{a}],[{a},{a},1]]}}"#
    );
    let cfg = write(dir.path(), "rep.json", &rep);
    let o = mvos(&["experiment", "--config", &cfg, "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert!(!report.exists());
}

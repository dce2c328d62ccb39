use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn btmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btmle")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = btmle(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(path: PathBuf, text: &str) -> PathBuf {
    std::fs::write(&path, text).unwrap();
    path
}

const QUICK_CONFIG: &str = r#"{"bayes":{"sampler":{"n_warmup":150,"n_draws":100}}}"#;

fn simulate(dir: &Path, spec: &str) -> PathBuf {
    let out = dir.join("sim");
    let spec = write(dir.join("spec.json"), spec);
    ok(&["simulate", "--spec", p(&spec), "--out", p(&out)]);
    out
}

#[test]
fn simulate_and_fit_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), r#"{"case":"NMS","n":300,"effect_size":0.15,"seed":11}"#);
    for f in ["data.csv", "schema.json", "spec.json", "generation.json"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let again = dir.path().join("sim2");
    ok(&["simulate", "--spec", p(&dir.path().join("spec.json")), "--out", p(&again)]);
    assert_eq!(std::fs::read(sim.join("data.csv")).unwrap(), std::fs::read(again.join("data.csv")).unwrap());

    let cfg = write(dir.path().join("cfg.json"), QUICK_CONFIG);
    let (data, schema) = (sim.join("data.csv"), sim.join("schema.json"));
    for method in ["Classical", "BTmleM", "BTmleSS", "BnTmle1p", "BnTmle2p"] {
        let run = |tag: &str| {
            let out = dir.path().join(format!("{method}-{tag}.json"));
            let samples = dir.path().join(format!("{method}-{tag}.csv"));
            ok(&[
                "fit", "--data", p(&data), "--schema", p(&schema), "--method", method, "--config", p(&cfg), "--out",
                p(&out), "--seed", "5", "--samples", p(&samples),
            ]);
            (std::fs::read(out).unwrap(), std::fs::read(samples).unwrap())
        };
        let (a, b) = (run("a"), run("b"));
        assert_eq!(a, b, "{method}");
        let v: serde_json::Value = serde_json::from_slice(&a.0).unwrap();
        let (lo, hi) = (v["ci95"][0].as_f64().unwrap(), v["ci95"][1].as_f64().unwrap());
        assert!(lo < hi, "{method}");
        if method != "Classical" {
            assert_eq!(String::from_utf8(a.1).unwrap().lines().count(), 201, "{method}");
        }
    }
}

#[test]
fn exit_codes_distinguish_configuration_from_estimation() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), r#"{"case":"NMS","n":100,"effect_size":0.15,"seed":2}"#);
    let (data, schema) = (sim.join("data.csv"), sim.join("schema.json"));
    let out = dir.path().join("o.json");
    let code = |args: &[&str]| btmle(args).status.code();

    assert_eq!(code(&["fit", "--data", p(&data), "--schema", p(&schema), "--method", "Nope", "--out", p(&out)]), Some(2));
    let bad_cfg = write(dir.path().join("bad.json"), r#"{"prior_scale":-1}"#);
    assert_eq!(
        code(&["fit", "--data", p(&data), "--schema", p(&schema), "--method", "Classical", "--config", p(&bad_cfg), "--out", p(&out)]),
        Some(2)
    );
    assert_eq!(code(&["fit", "--data", "/nonexistent.csv", "--schema", p(&schema), "--method", "Classical", "--out", p(&out)]), Some(2));
    assert_eq!(code(&["report", "--in", p(dir.path()), "--format", "xml"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));

    // Only treated units: the effect is not identifiable.
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    let mut treated = format!("{}\n", lines.next().unwrap());
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        treated.push_str(&format!("{},{},{},1,{}\n", f[0], f[1], f[2], f[4]));
    }
    let treated = write(dir.path().join("treated.csv"), &treated);
    assert_eq!(code(&["fit", "--data", p(&treated), "--schema", p(&schema), "--method", "BnTmle1p", "--out", p(&out)]), Some(1));
}

fn sweep_spec(dir: &Path) -> PathBuf {
    write(
        dir.join("sweep.json"),
        r#"{
            "data_sizes": [40, 80],
            "replications": 3,
            "misspecification_cases": ["NMS", "OPMS"],
            "effect_sizes": [0.15],
            "methods": ["Classical", "BnTmle1p"],
            "base_seed": 7,
            "fit": {"bayes": {"sampler": {"n_warmup": 100, "n_draws": 60}}}
        }"#,
    )
}

#[test]
fn sweep_resume_audit_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(dir.path());
    let (one, many) = (dir.path().join("w1"), dir.path().join("w4"));
    ok(&["sweep", "--spec", p(&spec), "--out", p(&one)]);
    ok(&["sweep", "--spec", p(&spec), "--out", p(&many), "--workers", "4"]);
    for f in ["replications.csv", "coverage.csv", "coverage.json"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(many.join(f)).unwrap(), "{f}");
    }
    let journal = std::fs::read_to_string(one.join("replications.csv")).unwrap();
    assert_eq!(journal.lines().count(), 1 + 2 * 2 * 3 * 2);

    // Rerunning into a finished directory needs --resume.
    assert_eq!(btmle(&["sweep", "--spec", p(&spec), "--out", p(&one)]).status.code(), Some(2));

    // Interrupt: keep the header and the first four cells, plus half a row.
    let lines: Vec<&str> = journal.lines().collect();
    let cut = format!("{}\n{}", lines[..9].join("\n"), &lines[9][..20]);
    std::fs::write(many.join("replications.csv"), cut).unwrap();
    ok(&["sweep", "--spec", p(&spec), "--out", p(&many), "--resume", "--workers", "2"]);
    for f in ["replications.csv", "coverage.csv", "coverage.json"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(many.join(f)).unwrap(), "{f}");
    }

    let audit = ok(&["audit", "--in", p(&one)]);
    assert!(String::from_utf8_lossy(&audit.stdout).contains("8 coverage rows match"));

    let listed = ok(&["report", "--in", p(&one), "--format", "json", "--plot-data"]);
    let listed = String::from_utf8(listed.stdout).unwrap();
    assert_eq!(listed.lines().count(), 2);
    let series: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(one.join("report/coverage_series.json")).unwrap()).unwrap();
    let rows = series.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| (0.0..=100.0).contains(&r["coverage_pct"].as_f64().unwrap())));
    ok(&["report", "--in", p(&one), "--format", "csv"]);
    let first = std::fs::read(one.join("report/coverage.csv")).unwrap();
    ok(&["report", "--in", p(&one), "--format", "csv"]);
    assert_eq!(first, std::fs::read(one.join("report/coverage.csv")).unwrap());

    // Tampering with the coverage table is detected.
    let text = std::fs::read_to_string(one.join("coverage.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
    fields[12] = "12.5".into();
    lines[1] = fields.join(",");
    std::fs::write(one.join("coverage.csv"), lines.join("\n") + "\n").unwrap();
    assert_eq!(btmle(&["audit", "--in", p(&one)]).status.code(), Some(2));
}

#[test]
fn case_study_command_writes_tables_and_kde() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path().join("cfg.json"), QUICK_CONFIG);
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["case-study", "--kind", "continuous", "--seed", "4", "--n", "300", "--config", p(&cfg), "--out", p(&out)]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["case_study.json", "case_study.csv", "kde.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let table = std::fs::read_to_string(a.join("case_study.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    ok(&["report", "--in", p(&a), "--format", "csv", "--plot-data"]);
    for m in ["BTmleM", "BTmleSS", "BnTmle1p"] {
        assert!(a.join(format!("report/kde_{m}.csv")).exists(), "{m}");
    }
    assert!(!a.join("report/kde_Classical.csv").exists());
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tailex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailex"))
        .args(args)
        .env_remove("TAILEX_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = tailex(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir` keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn synth(dir: &Path) {
    ok(&[
        "synth",
        "--stocks",
        "24",
        "--returns-per-stock",
        "3000",
        "--seed",
        "8",
        "--out",
        p(dir),
    ]);
}

#[test]
fn staged_commands_match_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (mkt, st, full) = (
        tmp.path().join("mkt"),
        tmp.path().join("st"),
        tmp.path().join("full"),
    );
    synth(&mkt);
    let ticks = mkt.join("ticks");
    let cal = mkt.join("calendar.toml");
    let shares = mkt.join("shares.csv");
    let returns = st.join("returns");
    let profiles = st.join("profiles.csv");
    let partition = st.join("turnover.json");

    ok(&[
        "ingest",
        "--ticks",
        p(&ticks),
        "--calendar",
        p(&cal),
        "--out",
        p(&returns),
    ]);
    ok(&[
        "profile",
        "--ticks",
        p(&ticks),
        "--calendar",
        p(&cal),
        "--shares",
        p(&shares),
        "--out",
        p(&profiles),
    ]);
    ok(&[
        "group",
        "--profiles",
        p(&profiles),
        "--attribute",
        "turnover",
        "--groups",
        "4",
        "--out",
        p(&partition),
    ]);
    ok(&[
        "fit",
        "--returns",
        p(&returns),
        "--partition",
        p(&partition),
        "--min-tail",
        "30",
        "--out",
        p(&st),
    ]);
    ok(&[
        "fit",
        "--returns",
        p(&returns),
        "--min-tail",
        "30",
        "--out",
        p(&st),
    ]);
    let reg = ok(&[
        "regress",
        "--profiles",
        p(&profiles),
        "--tails",
        p(&st.join("stock_tails.csv")),
        "--cohorts",
        p(&st),
        "--out",
        p(&st),
    ]);
    assert!(String::from_utf8_lossy(&reg.stdout).contains("bivariate"));

    ok(&[
        "pipeline",
        "--ticks",
        p(&ticks),
        "--calendar",
        p(&cal),
        "--shares",
        p(&shares),
        "--groups",
        "4",
        "--attributes",
        "turnover",
        "--min-tail",
        "30",
        "--out",
        p(&full),
    ]);
    for f in [
        "profiles.csv",
        "stock_tails.csv",
        "group_fits/turnover.json",
        "comparison_positive.csv",
        "regressions/turnover-grouped-qgaussian.json",
    ] {
        assert!(
            fs::read(st.join(f)).unwrap() == fs::read(full.join(f)).unwrap(),
            "{f} differs between staged and pipeline runs"
        );
    }
}

#[test]
fn pipeline_is_reproducible_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let mkt = tmp.path().join("mkt");
    synth(&mkt);
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "ticks = [{:?}]\nshares = {:?}\ncalendar = {:?}\ngroups = 3\n\n[tail]\nmin_tail = 30\n",
            p(&mkt.join("ticks")),
            p(&mkt.join("shares.csv")),
            p(&mkt.join("calendar.toml"))
        ),
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["pipeline", "--config", p(&config), "--out", p(&a)]);
    let first = snapshot(&a);
    assert!(first.len() > 20);
    ok(&["pipeline", "--config", p(&config), "--out", p(&a)]);
    assert!(
        first == snapshot(&a),
        "rerun into the same directory changed the bundle"
    );
    ok(&["pipeline", "--config", p(&config), "--out", p(&b)]);
    for f in [
        "stock_tails.csv",
        "comparison_negative.txt",
        "plots/scatter_cap.csv",
        "group_fits/cap.json",
    ] {
        assert!(
            fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    // the reports differ only in the output directory they record
    let without_out = |dir: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
        v["config"]["out_dir"] = serde_json::Value::Null;
        v
    };
    assert!(
        without_out(&a) == without_out(&b),
        "report.json differs between runs"
    );

    let plots = tmp.path().join("plots");
    ok(&[
        "plotdata",
        "--report",
        p(&a.join("report.json")),
        "--out",
        p(&plots),
    ]);
    assert!(plots.join("pdf_turnover_g00.csv").exists());
    assert!(plots.join("stock_scatter.csv").exists());

    let mut report: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    report["cohorts"] = serde_json::json!([]);
    report["stock_tails"] = serde_json::json!([]);
    let empty = tmp.path().join("empty.json");
    fs::write(&empty, serde_json::to_vec(&report).unwrap()).unwrap();
    let none = tmp.path().join("none");
    let out = tailex(&["plotdata", "--report", p(&empty), "--out", p(&none)]);
    assert!(!out.status.success());
    assert!(!none.join("stock_scatter.csv").exists());
}

#[test]
fn invalid_settings_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mkt = tmp.path().join("mkt");
    synth(&mkt);
    let (ticks, shares, cal, out) = (
        mkt.join("ticks"),
        mkt.join("shares.csv"),
        mkt.join("calendar.toml"),
        tmp.path().join("o"),
    );
    let base = [
        "pipeline",
        "--ticks",
        p(&ticks),
        "--shares",
        p(&shares),
        "--calendar",
        p(&cal),
        "--out",
        p(&out),
    ];
    let with = |extra: &[&str]| tailex(&[&base[..], extra].concat());
    let out = with(&["--groups", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!with(&["--attributes", "volume"]).status.success());
    assert!(!with(&["--min-tail", "1"]).status.success());

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "grups = 4\n").unwrap();
    assert!(!with(&["--config", p(&bad)]).status.success());

    let missing = tailex(&[
        "pipeline",
        "--ticks",
        "/nonexistent",
        "--shares",
        "/nonexistent.csv",
        "--out",
        p(tmp.path()),
    ]);
    assert!(!missing.status.success());
}

#[test]
fn unsorted_ticks_are_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let mkt = tmp.path().join("mkt");
    synth(&mkt);
    let file = mkt.join("ticks/S00.csv");
    let text = fs::read_to_string(&file).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(5, 50);
    fs::write(&file, lines.join("\n") + "\n").unwrap();
    let out = tailex(&[
        "ingest",
        "--ticks",
        p(&mkt.join("ticks")),
        "--calendar",
        p(&mkt.join("calendar.toml")),
        "--out",
        p(&tmp.path().join("r")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of order"));
}

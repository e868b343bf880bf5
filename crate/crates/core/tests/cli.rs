use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic").join(name)
}

fn radiant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radiant"))
        .args(args)
        .env_remove("RADIANT_THREADS")
        .output()
        .expect("binary runs")
}

fn data_args() -> Vec<String> {
    ["persons", "footsteps", "cities"]
        .iter()
        .flat_map(|t| [format!("--{t}"), fixture(&format!("{t}.csv")).display().to_string()])
        .collect()
}

fn run_with_data(cmd: &str, extra: &[&str]) -> Output {
    let data = data_args();
    let mut args: Vec<&str> = vec![cmd];
    args.extend(data.iter().map(String::as_str));
    args.extend(extra);
    radiant(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_flag() {
    let top = radiant(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    let text = String::from_utf8_lossy(&top.stdout);
    for cmd in ["pipeline", "ingest", "network", "pagerank", "heaps", "trips", "--threads"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
    let sub = radiant(&["pipeline", "--help"]);
    let text = String::from_utf8_lossy(&sub.stdout);
    for flag in [
        "--config",
        "--persons",
        "--footsteps",
        "--cities",
        "--window",
        "--min-age",
        "--models",
        "--walkers",
        "--replicates",
        "--trip-p",
        "--seed",
        "--out",
        "--trajectories",
        "--threads",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn unknown_flag_is_fatal() {
    let o = radiant(&["pipeline", "--walkrs", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--walkrs"));
    assert_eq!(radiant(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn empty_footsteps_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("footsteps.csv");
    std::fs::write(&empty, "person_id,date,place,lat,lon,predicate,resource,place_frame,resource_frame\n").unwrap();
    let o = radiant(&[
        "pipeline",
        "--persons",
        fixture("persons.csv").to_str().unwrap(),
        "--footsteps",
        empty.to_str().unwrap(),
        "--cities",
        fixture("cities.csv").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("EmptyInput"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(radiant(&["pipeline", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
    assert_eq!(radiant(&["pipeline", "--persons", "/nonexistent.csv"]).status.code(), Some(2));
    let o = run_with_data("pipeline", &["--models", "gravity-multi"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_with_data("pipeline", &["--window", "1950:1900"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_with_data("network", &["--discipline", "Astrology"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ConfigError"));
}

#[test]
fn numerical_errors_exit_four() {
    let o = run_with_data("pagerank", &["--damping", "1.5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("netbuild/InvalidParameter"), "{}", stderr(&o));
}

#[test]
fn network_filters_by_discipline() {
    let all = run_with_data("network", &[]);
    assert!(all.status.success(), "{}", stderr(&all));
    let arts = run_with_data("network", &["--discipline", "arts"]);
    assert!(arts.status.success());
    let parse = |o: &Output| -> Vec<Vec<String>> {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    };
    let (all, arts) = (parse(&all), parse(&arts));
    assert!(!arts.is_empty() && arts.len() < all.len());
    assert!(arts.iter().all(|r| r[3] == "Arts" && r[4] == "1900:1950"));
    let weight = |rows: &[Vec<String>]| rows.iter().map(|r| r[2].parse::<u64>().unwrap()).sum::<u64>();
    assert!(weight(&arts) < weight(&all));
}

#[test]
fn pagerank_windows_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for window in ["1900:1925", "1926:1950"] {
        let out = dir.path().join(format!("pr-{}.csv", window.replace(':', "-")));
        let o = run_with_data("pagerank", &["--window", window, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("city,score,rank,window"));
        let total: f64 = lines.clone().map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(lines.all(|l| l.ends_with(window)));
    }
}

#[test]
fn heaps_and_trips_emit_json() {
    for kind in ["birth", "inlife", "death"] {
        let o = run_with_data("heaps", &["--kind", kind]);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let alpha = v["alpha"].as_f64().unwrap();
        assert!(alpha > 0.0 && alpha <= 1.0);
    }
    let o = run_with_data("trips", &[]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = v["p"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn ingest_writes_filtered_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with_data("ingest", &["--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["ingest_summary.json", "persons.csv", "footsteps.csv", "cities.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("ingest_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["persons"]["rejected"], 4);
    assert_eq!(summary["cities"]["accepted"], 24);
    let kept = std::fs::read_to_string(dir.path().join("footsteps.csv")).unwrap();
    assert_eq!(kept.lines().count() - 1, summary["in_window_movements"].as_u64().unwrap() as usize);
}

#[test]
fn threads_env_fallback() {
    let o = Command::new(env!("CARGO_BIN_EXE_radiant"))
        .args(["trips"])
        .args(data_args())
        .env("RADIANT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = radiant(&[
            "pipeline",
            "--config",
            fixture("run.toml").to_str().unwrap(),
            "--walkers",
            "50",
            "--replicates",
            "5",
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "4"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 3);
    assert!(text.starts_with("model,statistic,adj_r2,adj_r2_se,pearson,p_value,kl,kl_se,wasserstein,wasserstein_se\n"));
}

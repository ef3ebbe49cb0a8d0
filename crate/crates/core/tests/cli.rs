use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgsa::export::read_surface_csv;

fn qgsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgsa"))
        .args(args)
        .env_remove("QGSA_THREADS")
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let path = dir.join("sales.csv");
    let mut args = vec!["simulate", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = qgsa(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn fit(input: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--alpha",
        "0.9",
        "--span",
        "0.5",
        "--seed",
        "3",
    ];
    args.extend_from_slice(extra);
    qgsa(&args)
}

#[test]
fn simulate_writes_the_requested_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), &[]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1 + 17 * 7 * 20);
    assert!(text.starts_with("date,hour,qty\n2012-11-05,6,"));
    let again = qgsa(&["simulate", "--out", dir.path().join("b.csv").to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(fs::read(dir.path().join("b.csv")).unwrap(), text.as_bytes());
}

#[test]
fn simulate_poisson_gives_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), &["--dist", "poisson", "--mean", "5", "--spec-seed", "9"]);
    let text = fs::read_to_string(path).unwrap();
    for line in text.lines().skip(1) {
        let q: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(q >= 0.0 && q.fract() == 0.0, "{line}");
    }
}

#[test]
fn simulate_rejects_unknown_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let out = qgsa(&["simulate", "--dist", "cauchy", "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cauchy"));
}

#[test]
fn fit_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), &[]);
    let (o1, o2) = (dir.path().join("run1"), dir.path().join("run2"));
    let r1 = fit(&input, &o1, &["--plot"]);
    assert_eq!(r1.status.code(), Some(0), "{}", String::from_utf8_lossy(&r1.stderr));
    let r2 = fit(&input, &o2, &[]);
    assert_eq!(r2.status.code(), Some(0));

    let s1 = fs::read(o1.join("surface.csv")).unwrap();
    assert_eq!(s1, fs::read(o2.join("surface.csv")).unwrap());
    let text = String::from_utf8(s1.clone()).unwrap();
    assert!(text.starts_with("# meta: alpha=0.9 open_hour=6 hours=17 days=7"));
    assert_eq!(text.lines().count(), 2 + 17 * 7);
    assert!(o1.join("fit_log.csv").exists());
    let svgs = fs::read_dir(&o1)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 7);
    assert!(!o2.join("day_1_Mon.svg").exists());

    // every observed cell round-trips through predict
    let surface = read_surface_csv(&s1[..]).unwrap().surface;
    let days: Vec<String> = (1..=7).map(|j| j.to_string()).collect();
    for t in 1..=17 {
        let hour = (5 + t).to_string();
        let out = qgsa(&[
            "predict",
            "--surface",
            o1.join("surface.csv").to_str().unwrap(),
            "--day",
            &days.join(","),
            "--hour",
            &hour,
        ]);
        assert!(out.status.success());
        let stdout = String::from_utf8(out.stdout).unwrap();
        for (j, line) in (1..=7).zip(stdout.lines().skip(1)) {
            let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(v, surface.value(t, j).unwrap(), "cell ({t}, {j})");
        }
    }
}

#[test]
fn predict_interpolates_and_names_missing_days() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), &["--days", "5", "--replicates", "8"]);
    let out_dir = dir.path().join("fit");
    assert!(fit(&input, &out_dir, &["--max-iter", "200"]).status.success());
    let surface_path = out_dir.join("surface.csv");
    let surface = read_surface_csv(fs::File::open(&surface_path).unwrap()).unwrap().surface;

    let out = qgsa(&["predict", "--surface", surface_path.to_str().unwrap(), "--day", "Tue", "--hour", "9.5"]);
    assert!(out.status.success());
    let v: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let expect = 0.5 * (surface.value(4, 2).unwrap() + surface.value(5, 2).unwrap());
    assert!((v - expect).abs() < 1e-12);

    let out = qgsa(&["predict", "--surface", surface_path.to_str().unwrap(), "--day", "sat", "--hour", "9"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("day 6"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), &["--replicates", "5"]);
    let cfg = dir.path().join("fit.conf");
    fs::write(&cfg, "# test settings\nalpha = 0.8\nmax-iter = 50\nspan = 0.6\n").unwrap();
    let out_cfg = dir.path().join("cfg");
    let r = qgsa(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_cfg.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(out_cfg.join("surface.csv")).unwrap();
    assert!(text.starts_with("# meta: alpha=0.8 "));
    assert!(text.contains(" span=0.6 ") && text.contains(" max_iter=50 "));

    let out_flag = dir.path().join("flag");
    let r = qgsa(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_flag.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.7",
    ]);
    assert!(r.status.success());
    let text = fs::read_to_string(out_flag.join("surface.csv")).unwrap();
    assert!(text.starts_with("# meta: alpha=0.7 "));
    assert!(text.contains(" span=0.6 "));
}

#[test]
fn best_effort_fit_prints_a_banner_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), &["--replicates", "5"]);
    let r = fit(&input, &dir.path().join("o"), &["--max-iter", "3"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stderr).contains("best iterate"));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let missing = qgsa(&["fit", "--input", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "day,hour,qty\n2020-01-01,7,3\n").unwrap();
    let r = qgsa(&["fit", "--input", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("date"));

    fs::write(&bad, "date,hour,qty\n2020-01-01,7,3\n2020-01-02,x,1\n").unwrap();
    let r = qgsa(&["fit", "--input", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));

    assert_eq!(qgsa(&["fit", "--alpha", "abc"]).status.code(), Some(2));
    assert_eq!(qgsa(&["frobnicate"]).status.code(), Some(2));
    let input = simulate(dir.path(), &["--replicates", "2"]);
    let r = qgsa(&["fit", "--input", input.to_str().unwrap(), "--alpha", "1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(qgsa(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_reports_every_task_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let r = qgsa(&["bench", "--out", dir.path().to_str().unwrap(), "--skip-qam"]);
    assert!(r.status.success());
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    let valley_qp = rows.iter().find(|r| r.starts_with("abs-valley,qp,")).unwrap();
    let f: f64 = valley_qp.split(',').nth(2).unwrap().parse().unwrap();
    assert!(f < 1e-2);
    assert!(dir.path().join("bench.md").exists());
}

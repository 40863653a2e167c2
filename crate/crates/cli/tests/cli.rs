use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evmix::harness::table::format_number;
use evmix::harness::{parse_table, CSV_HEADER};
use tempfile::TempDir;

fn evmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = evmix(args);
    assert!(
        out.status.success(),
        "evmix {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CONFIG: &str = "\
# three cells, every method
cell = pareto:l=1; n=64; m=4
cell = revburr:c=-1,l=-2; n=64; m=8
cell = t:l=3; n=80; m=4
reps = 5
master_seed = 11
h_grid.points = 17
";

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}.csv"));
        ok(&[
            "simulate",
            "--config",
            path_str(&cfg),
            "--out",
            path_str(&out),
            "--threads",
            threads,
        ]);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(parse_table(&text).unwrap().len(), 12);
}

/// One replication's (mise, mix) from the verbose log.
type Logged = (Option<f64>, Option<f64>);

#[test]
fn verbose_log_reproduces_the_aggregates() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = dir.path().join("out.csv");
    let run = ok(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
        "--verbose",
    ]);
    let log = String::from_utf8(run.stderr).unwrap();

    // (cell, method) -> per-rep (mise, mix), in replication order.
    let mut reps: BTreeMap<(usize, String), Vec<Logged>> = BTreeMap::new();
    for line in log.lines().filter(|l| l.starts_with("cell=")) {
        let fields: BTreeMap<&str, &str> = line
            .split(' ')
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let num = |k: &str| fields[k].parse::<f64>().ok();
        reps.entry((
            fields["cell"].parse().unwrap(),
            fields["method"].to_string(),
        ))
        .or_default()
        .push((num("mise"), num("mix")));
    }
    assert_eq!(reps.len(), 12);

    let mean_sd = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, sd)
    };
    let records = parse_table(&fs::read_to_string(&out).unwrap()).unwrap();
    for (i, rec) in records.iter().enumerate() {
        let logged = &reps[&(i / 4, rec.method.name().to_string())];
        assert_eq!(logged.len(), rec.reps);
        let ok_reps: Vec<_> = logged.iter().filter(|r| r.0.is_some()).collect();
        assert_eq!(rec.failures, rec.reps - ok_reps.len());
        let mises: Vec<f64> = ok_reps.iter().map(|r| r.0.unwrap()).collect();
        let (mean, sd) = mean_sd(&mises);
        assert_eq!(
            format_number(rec.mise_mean_x100.unwrap()),
            format_number(100.0 * mean)
        );
        assert_eq!(
            format_number(rec.mise_sd_x100.unwrap()),
            format_number(100.0 * sd)
        );
        if rec.method.is_mixture() {
            let mixes: Vec<f64> = ok_reps.iter().map(|r| r.1.unwrap()).collect();
            let (mean, sd) = mean_sd(&mixes);
            assert_eq!(format_number(rec.mix_mean.unwrap()), format_number(mean));
            assert_eq!(format_number(rec.mix_sd.unwrap()), format_number(sd));
        } else {
            assert!(rec.mix_mean.is_none());
        }
    }
}

fn pareto_data(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("pareto.txt");
    let out = ok(&[
        "sample",
        "--spec",
        "pareto:l=1",
        "--n",
        "256",
        "--seed",
        "5",
    ]);
    fs::write(&data, &out.stdout).unwrap();
    data
}

#[test]
fn cv_fit_reports_weight_and_gev() {
    let dir = TempDir::new().unwrap();
    let data = pareto_data(dir.path());
    let out = ok(&[
        "fit",
        "--data",
        path_str(&data),
        "--m",
        "16",
        "--method",
        "cv",
    ]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["n"], 256);
    assert_eq!(json["m"], 16);
    let fit = &json["model"];
    assert_eq!(fit["method"], "cv_mix");
    let q = fit["q"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&q), "{q}");
    let h = fit["h"].as_f64().unwrap();
    assert_eq!(q, h / (1.0 + h));
    let gev = &fit["gev"];
    assert!(gev["a"].as_f64().unwrap() > 0.0);
    assert!(gev["gamma"].as_f64().unwrap().is_finite());
    assert!(gev["b"].as_f64().unwrap().is_finite());
}

#[test]
fn fit_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let data = pareto_data(dir.path());
    for method in ["ml", "cv", "par", "np"] {
        let a = ok(&[
            "fit",
            "--data",
            path_str(&data),
            "--m",
            "8",
            "--method",
            method,
        ])
        .stdout;
        let b = ok(&[
            "fit",
            "--data",
            path_str(&data),
            "--m",
            "8",
            "--method",
            method,
        ])
        .stdout;
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn bad_data_line_is_reported() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.txt");
    fs::write(&data, "1.5\n2.25\nabc\n4\n5\n6\n7\n8\n9\n").unwrap();
    let out = evmix(&[
        "fit",
        "--data",
        path_str(&data),
        "--m",
        "4",
        "--method",
        "ml",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let out = evmix(&[
        "fit",
        "--data",
        path_str(&pareto_data(dir.path())),
        "--m",
        "0",
        "--method",
        "ml",
    ]);
    assert!(!out.status.success());
}

#[test]
fn forecast_roundtrips_and_rejects_bad_probabilities() {
    let dir = TempDir::new().unwrap();
    let data = pareto_data(dir.path());
    let fit = dir.path().join("fit.json");
    ok(&[
        "fit",
        "--data",
        path_str(&data),
        "--m",
        "16",
        "--method",
        "ml",
        "--out",
        path_str(&fit),
    ]);
    let out = ok(&[
        "forecast",
        "--fit",
        path_str(&fit),
        "--probs",
        "0.5,0.9",
        "--thresholds",
        "1e12",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let quantiles = report["quantiles"].as_array().unwrap();
    assert_eq!(quantiles.len(), 2);
    let q50 = quantiles[0]["quantile"].as_f64().unwrap();
    let q90 = quantiles[1]["quantile"].as_f64().unwrap();
    assert!(q50 < q90);
    assert!(report["exceedances"][0]["exceedance"].as_f64().unwrap() <= 1e-6);

    // The median fed back as a threshold is exceeded with probability 1/2.
    let out = ok(&[
        "forecast",
        "--fit",
        path_str(&fit),
        "--thresholds",
        &format!("{q50:?}"),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = report["exceedances"][0]["exceedance"].as_f64().unwrap();
    assert!((e - 0.5).abs() <= 1e-6, "{e}");

    for bad in ["0", "1", "1.5", "-0.2"] {
        let out = evmix(&["forecast", "--fit", path_str(&fit), "--probs", bad]);
        assert!(!out.status.success(), "prob {bad} accepted");
    }
}

#[test]
fn table_renders_markdown_and_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(
        &cfg,
        "cell = weibull:k=3; n=64; m=4\nreps = 2\nh_grid.points = 9\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    ok(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&csv),
    ]);
    let md = String::from_utf8(ok(&["table", "--in", path_str(&csv)]).stdout).unwrap();
    assert_eq!(
        md.lines().next().unwrap(),
        format!("| {} |", CSV_HEADER.join(" | "))
    );
    assert_eq!(md.lines().count(), 2 + 4);
    let back = String::from_utf8(ok(&["table", "--in", path_str(&csv), "--format", "csv"]).stdout)
        .unwrap();
    assert_eq!(back, fs::read_to_string(&csv).unwrap());

    fs::write(&cfg, "cell = weibull:k=3; n=64; m=4\nrepz = 100\n").unwrap();
    let out = evmix(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&csv),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("repz"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const RHO_C_32: f64 = 7.472_009_468_5;

fn cnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn status(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn masses(count: usize, lo: f64, hi: f64) -> String {
    (0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[test]
fn cached_curve_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve");
    let list = masses(20, 0.3 * RHO_C_32, 1.3 * RHO_C_32);
    let args = [
        "curve",
        "--p",
        "3",
        "--q",
        "2",
        "--masses",
        &list,
        "--out",
        out.to_str().unwrap(),
    ];
    let first = cnls(&args);
    assert_eq!(
        status(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let table = rows(&out.join("curve.csv"));
    assert_eq!(table.len(), 20);
    let header = csv::Reader::from_path(out.join("curve.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        [
            "rho",
            "i_value",
            "omega",
            "kinetic",
            "nq",
            "np",
            "pohozaev_residual",
            "stationarity_residual",
            "achieved"
        ]
    );
    let manifest = json(&out.join("manifest.json"));
    let listed: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["path"].as_str().unwrap())
        .collect();
    assert_eq!(listed, ["curve.csv", "curve.json"]);
    let snapshot = |dir: &Path| {
        ["curve.csv", "curve.json", "manifest.json"].map(|f| fs::read(dir.join(f)).unwrap())
    };
    let before = snapshot(&out);

    let again = cnls(&args);
    assert_eq!(status(&again), 0);
    assert!(String::from_utf8_lossy(&again.stdout).starts_with("reused"));
    assert_eq!(snapshot(&out), before);

    // a fresh, uncached run reproduces the same bytes
    let fresh = tmp.path().join("fresh");
    let mut uncached = args.to_vec();
    uncached[8] = fresh.to_str().unwrap();
    uncached.push("--no-cache");
    assert_eq!(status(&cnls(&uncached)), 0);
    assert_eq!(fs::read(fresh.join("curve.csv")).unwrap(), before[0]);
    assert!(!fresh.join("cache").exists());

    // any parameter change recomputes
    let mut changed = args.to_vec();
    let shorter = masses(19, 0.3 * RHO_C_32, 1.3 * RHO_C_32);
    changed[6] = &shorter;
    let third = cnls(&changed);
    assert!(String::from_utf8_lossy(&third.stdout).starts_with("wrote"));
    assert_eq!(rows(&out.join("curve.csv")).len(), 19);
    assert_ne!(
        json(&out.join("manifest.json"))["config_hash"],
        manifest["config_hash"]
    );
}

#[test]
fn static_supercritical_flags_divergent_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cnls(&[
        "static",
        "--p",
        "4",
        "--q",
        "3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 0);
    let rec = json(&tmp.path().join("static.json"));
    assert_eq!(rec["divergent_mass"], Value::Bool(true));
    assert!(rec["rho_c"].is_null());
    assert!(rec["report"]["mass"].is_null());
    assert!(tmp.path().join("mountain_pass.json").exists());
    let profile = rows(&tmp.path().join("static_profile.csv"));
    assert_eq!(profile.len(), 8193);

    let sub = tmp.path().join("sub");
    assert_eq!(
        status(&cnls(&[
            "static",
            "--p",
            "3",
            "--q",
            "2",
            "--out",
            sub.to_str().unwrap()
        ])),
        0
    );
    let rec = json(&sub.join("static.json"));
    assert_eq!(rec["divergent_mass"], Value::Bool(false));
    assert!((rec["rho_c"].as_f64().unwrap() / RHO_C_32 - 1.0).abs() < 1e-6);
}

#[test]
fn malformed_config_exits_one_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cnls(&[
        "static",
        "--p",
        "3",
        "--q",
        "3.5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 1);
    let rec = json(&tmp.path().join("error.json"));
    assert_eq!(rec["status"], 1);
    assert_eq!(rec["kind"], "config");
    assert_eq!(rec["key"], "q");
    assert!(rec["message"].as_str().unwrap().contains("q < p"));

    // unknown flags and unused keys are config errors too
    assert_eq!(status(&cnls(&["static", "--bogus", "1"])), 1);
    let o = cnls(&[
        "static",
        "--p",
        "3",
        "--q",
        "2",
        "--masses",
        "1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 1);
    assert_eq!(json(&tmp.path().join("error.json"))["key"], "masses");
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let ini = tmp.path().join("run.ini");
    let out = tmp.path().join("gs");
    fs::write(
        &ini,
        format!(
            "p = 4\nq = 3\nout = {}\n[groundstate]\nmasses = 1, 2\n[curve]\nmasses = 5\n",
            out.display()
        ),
    )
    .unwrap();
    let o = cnls(&[
        "groundstate",
        "--config",
        ini.to_str().unwrap(),
        "--masses",
        "3",
    ]);
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("groundstate_001.json").exists());
    let rec = json(&out.join("groundstate_000.json"));
    assert_eq!(rec["achieved"], Value::Bool(true));
    assert!((rec["rho"].as_f64().unwrap() / 3.0 - 1.0).abs() < 1e-6);
    assert_eq!(rows(&out.join("groundstate_000_profile.csv")).len(), 8193);

    fs::write(&ini, "p = 4\nq = 3\n[groundstate]\nmassses = 1\n").unwrap();
    let o = cnls(&[
        "groundstate",
        "--config",
        ini.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 1);
    assert_eq!(json(&out.join("error.json"))["key"], "massses");
}

#[test]
fn figure_panels() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig");
    let o = cnls(&["figure", "--out", out.to_str().unwrap()]);
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let left = rows(&out.join("figure_left.csv"));
    let col = |r: &csv::StringRecord, k: usize| r[k].parse::<f64>().unwrap();
    let e_of_u = col(&left[0], 10);
    let rho_c = col(&left[0], 9);
    let beyond: Vec<_> = left
        .iter()
        .filter(|r| col(r, 0) > rho_c * (1.0 + 1e-9))
        .collect();
    assert!(beyond.len() >= 3);
    for r in &beyond {
        assert_eq!(&r[8], "false");
        assert!((col(r, 1) / e_of_u - 1.0).abs() < 1e-2);
    }
    let below: Vec<_> = left.iter().filter(|r| col(r, 0) < rho_c).collect();
    assert!(below.iter().all(|r| &r[8] == "true"));
    assert!(below.windows(2).all(|w| col(w[0], 1) > col(w[1], 1)));

    let right = rows(&out.join("figure_right.csv"));
    let gaps: Vec<f64> = right.iter().map(|r| col(r, 10)).collect();
    assert!(right.windows(2).all(|w| col(&w[0], 1) > col(&w[1], 1)));
    assert!(gaps.windows(2).all(|w| w[0] > w[1]));
    assert!(*gaps.last().unwrap() > 0.0);

    let empty = tmp.path().join("empty");
    let o = cnls(&[
        "figure",
        "--left-masses",
        "",
        "--right-masses",
        "",
        "--out",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 0);
    let text = fs::read_to_string(empty.join("figure_left.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("rho,i_value,"));
    assert_eq!(
        fs::read_to_string(empty.join("figure_right.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn evolution_exit_status_follows_the_stop_reason() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let o = cnls(&[
        "evolve",
        "--p",
        "3",
        "--q",
        "2",
        "--t-end",
        "0.05",
        "--out",
        ok.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 0);
    let trace = rows(&ok.join("trace.csv"));
    assert_eq!(trace.len(), 11);
    assert_eq!(json(&ok.join("evolve.json"))["stop"]["kind"], "completed");

    let narrow = tmp.path().join("narrow");
    let o = cnls(&[
        "evolve",
        "--p",
        "3",
        "--q",
        "2",
        "--width",
        "0.02",
        "--t-end",
        "0.01",
        "--out",
        narrow.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 2);
    assert_eq!(
        json(&narrow.join("evolve.json"))["stop"]["kind"],
        "under_resolved"
    );

    let o = cnls(&[
        "evolve",
        "--p",
        "3",
        "--q",
        "2",
        "--n",
        "3000",
        "--out",
        narrow.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 1);
}

#[test]
fn dichotomy_record_lists_evidence() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("blow");
    let o = cnls(&[
        "dichotomy",
        "--p",
        "3",
        "--q",
        "2",
        "--rho-fraction",
        "0.8",
        "--mu-scale",
        "1.2",
        "--t-end",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 0);
    let v = json(&out.join("dichotomy.json"));
    assert_eq!(v["outcome"], "blow_up_detected");
    let kinds: Vec<&str> = v["evidence"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"pohozaev_trap") && kinds.contains(&"variance_concavity"));
    assert!(v["delta0"].as_f64().unwrap() > 0.0);

    // a mass beyond the critical one has no ground state to rescale
    let o = cnls(&[
        "dichotomy",
        "--p",
        "3",
        "--q",
        "2",
        "--rho-fraction",
        "1.2",
        "--mu-scale",
        "1.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 4);
    assert_eq!(json(&out.join("error.json"))["kind"], "precondition");
}

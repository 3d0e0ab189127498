use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn npiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = npiv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

/// Every file of `a` exists in `b` with identical bytes, and vice versa.
fn assert_same_dir(a: &Path, b: &Path) {
    let names = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names(a), names(b));
    for name in names(a) {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

/// Runs `sub` from `config`, then again from the written manifest, and compares both trees.
fn check_round_trip(sub: &str, config: &Path, extra: &[&str]) -> TempDir {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let replay = tmp.path().join("replay");
    let mut args = vec![sub, "--config", path_str(config), "--out", path_str(&first)];
    args.extend_from_slice(extra);
    run_ok(&args);
    let mut args = vec![sub, "--config", path_str(config), "--out", path_str(&second), "--threads", "2"];
    args.extend_from_slice(extra);
    run_ok(&args);
    assert_same_dir(&first, &second);
    let manifest = first.join("manifest.toml");
    run_ok(&[sub, "--config", path_str(&manifest), "--out", path_str(&replay)]);
    assert_same_dir(&first, &replay);
    tmp
}

#[test]
fn constant_basis_fit_returns_mean_of_y1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("fit");
    run_ok(&["fit", "--config", path_str(&fixture("fit_constant.toml")), "--out", path_str(&out)]);
    let report = json(&out.join("fit.json"));
    let coef = report["raw_coef"][0].as_f64().unwrap();
    let (_, rows) = read_rows(&fixture("example.csv"));
    let mean = rows.iter().map(|r| r[0]).sum::<f64>() / rows.len() as f64;
    assert!((coef - mean).abs() <= 1e-14, "{coef} vs {mean}");
}

#[test]
fn npiv_with_y2_equal_x_matches_least_squares() {
    let tmp = TempDir::new().unwrap();
    let (_, rows) = read_rows(&fixture("example.csv"));
    let data = tmp.path().join("regression.csv");
    let mut text = String::from("y1,y2_1,x_1\n");
    for r in &rows {
        text.push_str(&format!("{},{},{}\n", r[0], r[2], r[2]));
    }
    fs::write(&data, text).unwrap();
    let spec = "bspline:order=4,knots=3";
    let npiv_out = tmp.path().join("npiv");
    let ls_out = tmp.path().join("ls");
    run_ok(&[
        "fit", "--input", path_str(&data), "--mode", "npiv", "--psi", spec, "--b", spec,
        "--grid-points", "201", "--out", path_str(&npiv_out),
    ]);
    run_ok(&[
        "fit", "--input", path_str(&data), "--mode", "ls", "--b", spec, "--grid-points", "201",
        "--out", path_str(&ls_out),
    ]);
    let (h1, a) = read_rows(&npiv_out.join("predictions.csv"));
    let (h2, b) = read_rows(&ls_out.join("predictions.csv"));
    assert_eq!(h1, vec!["y2_1", "h_hat"]);
    assert_eq!(h1, h2);
    assert_eq!(a.len(), 201);
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra[0], rb[0]);
        assert!((ra[1] - rb[1]).abs() <= 1e-10, "{} vs {}", ra[1], rb[1]);
    }
    let ca = json(&npiv_out.join("fit.json"))["raw_coef"].clone();
    let cb = json(&ls_out.join("fit.json"))["raw_coef"].clone();
    for (x, y) in ca.as_array().unwrap().iter().zip(cb.as_array().unwrap()) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn missing_y1_column_exits_2_and_names_it() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("bad.csv");
    fs::write(&data, "y2_1,x_1\n0.1,0.2\n0.3,0.4\n").unwrap();
    let out = npiv(&[
        "fit", "--input", path_str(&data), "--mode", "ls", "--b", "cosine:terms=2",
        "--out", path_str(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing columns [y1]"), "{err}");
}

/// Instruments confined to the left half leave the right-half indicator unidentified.
fn confined_sample(dir: &Path) -> PathBuf {
    let path = dir.join("confined.csv");
    let mut text = String::from("y1,y2_1,x_1\n");
    for i in 0..200 {
        let y2 = (i as f64 + 0.5) / 200.0;
        let x = 0.4 * (i as f64 + 0.5) / 200.0;
        text.push_str(&format!("{},{y2},{x}\n", y2 * y2));
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn ill_posed_fit_exits_3_with_sigma() {
    let tmp = TempDir::new().unwrap();
    let data = confined_sample(tmp.path());
    let spec = "bspline:order=1,knots=1";
    let out = npiv(&[
        "fit", "--input", path_str(&data), "--mode", "npiv", "--psi", spec, "--b", spec,
        "--orthonormalization", "uniform", "--out", path_str(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma_hat_jk"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn rank_deficient_design_exits_4() {
    let tmp = TempDir::new().unwrap();
    let data = confined_sample(tmp.path());
    let out = npiv(&[
        "fit", "--input", path_str(&data), "--mode", "ls", "--b", "bspline:order=1,knots=1",
        "--out", path_str(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_configs_exit_2_with_field_path() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("[simulate]\nn = \"many\"\nbase_seed = 1\n", "simulate", "simulate.n"),
        ("[rates]\npreset = \"ls_gaussian\"\nrepz = 3\n", "rates", "rates"),
        ("[rates]\npreset = \"npiv_extreme\"\n", "rates", "rates.preset"),
        (
            "[concentration]\nbasis = \"bspline:order=4,knots=2\"\nbase_seed = 0\n[[concentration.tail]]\nn = 10\nk = 6\nreps = 5\ngrid_points = 5\nq = 6\n",
            "concentration",
            "concentration.tail[0].q",
        ),
        ("[identifiability]\nbasis = \"cosine:terms=4\"\nbase_seed = 0\nrayleigh_vectors = 5\n", "identifiability", "identifiability.n"),
        ("[fit]\nmode = \"ls\"\nb = \"cosine:terms=3\"\n", "fit", "fit.input"),
    ];
    for (i, (text, sub, field)) in cases.iter().enumerate() {
        let cfg = tmp.path().join(format!("bad{i}.toml"));
        fs::write(&cfg, text).unwrap();
        let out = npiv(&[sub, "--config", path_str(&cfg), "--out", path_str(&tmp.path().join("o"))]);
        assert_eq!(out.status.code(), Some(2), "case {i}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "case {i}: {err}");
    }
    let out = npiv(&["simulate", "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = npiv(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = check_round_trip("simulate", &fixture("simulate.toml"), &[]);
    let first = tmp.path().join("first");
    assert_eq!(
        fs::read(first.join("sample.csv")).unwrap(),
        fs::read(fixture("example.csv")).unwrap()
    );
    let reseeded = tmp.path().join("reseeded");
    run_ok(&[
        "simulate", "--config", path_str(&fixture("simulate.toml")), "--seed", "8", "--out",
        path_str(&reseeded),
    ]);
    assert_ne!(
        fs::read(first.join("sample.csv")).unwrap(),
        fs::read(reseeded.join("sample.csv")).unwrap()
    );
    let manifest = fs::read_to_string(reseeded.join("manifest.toml")).unwrap();
    assert!(manifest.contains("base_seed = 8"), "{manifest}");
}

#[test]
fn fit_is_byte_reproducible() {
    let tmp = check_round_trip("fit", &fixture("fit.toml"), &[]);
    let (header, rows) = read_rows(&tmp.path().join("first/predictions.csv"));
    assert_eq!(header, vec!["y2_1", "h_hat"]);
    assert_eq!(rows.len(), 101);
    let report = json(&tmp.path().join("first/fit.json"));
    assert_eq!(report["diagnostics"]["j"], 4);
    assert_eq!(report["diagnostics"]["k"], 6);
}

#[test]
fn rates_smoke_emits_slopes_with_config_targets() {
    let tmp = check_round_trip("rates", &fixture("rates_smoke.toml"), &[]);
    let table = json(&tmp.path().join("first/rates.json"));
    let sup = table["slopes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["metric"] == "sup")
        .unwrap();
    assert_eq!(sup["target"], -0.4);
    assert_eq!(sup["tolerance"], 0.08);
    assert!(sup["slope"].as_f64().unwrap() < 0.0);

    let tmp = check_round_trip("rates", &fixture("rates_study.toml"), &[]);
    let table = json(&tmp.path().join("first/rates.json"));
    let slopes = table["slopes"].as_array().unwrap();
    assert_eq!(slopes.len(), 1);
    assert_eq!(slopes[0]["tolerance"], 0.2);
    assert!(tmp.path().join("first/variance_bias.json").exists());
}

#[test]
fn concentration_iid_fixture_has_no_violations() {
    let tmp = check_round_trip("concentration", &fixture("concentration_iid.toml"), &[]);
    let summary = json(&tmp.path().join("first/concentration.json"));
    assert_eq!(summary["total_violations"], 0);
    let check = &summary["tail_checks"][0];
    assert_eq!(check["reps"], 10000);
    assert_eq!(check["points"].as_array().unwrap().len(), 50);
    assert!(check["points"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["violated"] == false));
}

#[test]
fn concentration_mixing_fixture() {
    let tmp = check_round_trip("concentration", &fixture("concentration_mixing.toml"), &[]);
    let summary = json(&tmp.path().join("first/concentration.json"));
    assert_eq!(summary["total_violations"], 0);
    assert_eq!(summary["dependent_dominates_iid"], true);
    assert_eq!(summary["tail_checks"][0]["params"]["q"], 25);
    assert!(tmp.path().join("first/scaling_1.csv").exists());
}

#[test]
fn identifiability_matches_rayleigh_brute_force() {
    let tmp = check_round_trip("identifiability", &fixture("identifiability.toml"), &[]);
    let report = json(&tmp.path().join("first/identifiability.json"));
    let stat = report["ident_stat"].as_f64().unwrap();
    let eig = report["rayleigh_eigvec_max"].as_f64().unwrap();
    let random = report["rayleigh_random_max"].as_f64().unwrap();
    assert!((stat - eig).abs() <= 1e-6);
    assert!(random <= stat + 1e-12);
    assert!(report["rayleigh_gap"].as_f64().unwrap() <= 1e-6);

    let cfg = tmp.path().join("from_file.toml");
    fs::write(
        &cfg,
        format!(
            "[identifiability]\nbasis = \"cosine:terms=5\"\nbase_seed = 1\nrayleigh_vectors = 100\ninput = \"{}\"\ncolumn = \"y2\"\n",
            path_str(&fixture("example.csv"))
        ),
    )
    .unwrap();
    let out = tmp.path().join("file");
    run_ok(&["identifiability", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(json(&out.join("identifiability.json"))["n"], 500);
}

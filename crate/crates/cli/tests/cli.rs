use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latzeta"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn latzeta")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_lattice(dir: &Path, name: &str, ambient: usize, rank: usize, rows: &[Vec<f64>]) -> String {
    let body = serde_json::json!({
        "ambient_dim": ambient,
        "rank": rank,
        "basis": rows,
    });
    let path = dir.join(name);
    std::fs::write(&path, body.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn z2(dir: &Path) -> String {
    write_lattice(dir, "z2.json", 2, 2, &[vec![1.0, 0.0], vec![0.0, 1.0]])
}

#[test]
fn bessel_table_grid_and_gap_sign() {
    let out = run(&["bessel-table", "--alpha", "2", "--x-grid", "0.5:2.5:0.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,K_alpha,Kbar_alpha,recurrence_gap"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        assert!(w[1][1] < w[0][1], "K must decrease in x");
    }
    for r in &rows {
        assert!(r[3] >= -1e-12, "recurrence gap must be nonnegative");
    }
}

#[test]
fn eval_emits_exactly_three_fields_and_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let lat = z2(dir.path());
    let direct = stdout_json(&run(&[
        "eval", "--lattice", &lat, "--fn", "zetaq", "--s", "2", "--q", "1",
    ]));
    let obj = direct.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["tail_bound", "terms_used", "value"]);

    let dual = stdout_json(&run(&[
        "eval", "--lattice", &lat, "--fn", "zetaq-psf", "--s", "2", "--q", "1",
    ]));
    let a = direct["value"].as_f64().unwrap();
    let b = dual["value"].as_f64().unwrap();
    assert!(a > 1.0);
    assert!((a - b).abs() <= 1e-8 * a.abs());

    let th = stdout_json(&run(&[
        "eval", "--lattice", &lat, "--fn", "theta", "--tau", "3",
    ]));
    let t = th["value"].as_f64().unwrap();
    assert!(t > 1.0 && t < 1.1);
}

#[test]
fn eval_rejects_theta_without_tau() {
    let dir = tempfile::tempdir().unwrap();
    let lat = z2(dir.path());
    let out = run(&["eval", "--lattice", &lat, "--fn", "theta"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_stable_distinguishes_the_three_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let stable = z2(dir.path());
    let v = stdout_json(&run(&["check-stable", "--lattice", &stable]));
    assert_eq!(v["verdict"], "stable");
    assert!(v["witness"].is_null());

    let scaled = write_lattice(
        dir.path(),
        "d14.json",
        2,
        2,
        &[vec![1.0, 0.0], vec![0.0, 4.0]],
    );
    let v = stdout_json(&run(&["check-stable", "--lattice", &scaled]));
    assert_eq!(v["verdict"], "not_unit_det");

    let squeezed = write_lattice(
        dir.path(),
        "sq.json",
        2,
        2,
        &[vec![0.5, 0.0], vec![0.0, 2.0]],
    );
    let v = stdout_json(&run(&["check-stable", "--lattice", &squeezed]));
    assert_eq!(v["verdict"], "unstable");
    assert!(v["witness"].is_object());
    let dets = v["min_dets"].as_array().unwrap();
    assert!((dets[0]["det"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn stabilize_writes_lattice_and_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let lat = write_lattice(
        dir.path(),
        "d14.json",
        2,
        2,
        &[vec![1.0, 0.0], vec![0.0, 4.0]],
    );
    let out_path = dir.path().join("stable.json");
    let tr_path = dir.path().join("transform.json");
    let summary = stdout_json(&run(&[
        "stabilize",
        "--lattice",
        &lat,
        "--out",
        out_path.to_str().unwrap(),
        "--transform",
        tr_path.to_str().unwrap(),
    ]));
    assert!((summary["det_after"].as_f64().unwrap() - 1.0).abs() <= 1e-9);

    let stable: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let basis = stable["basis"].as_array().unwrap();
    for (i, row) in basis.iter().enumerate() {
        for (j, cell) in row.as_array().unwrap().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((cell.as_f64().unwrap() - expect).abs() <= 1e-9);
        }
    }

    let tr: Vec<Vec<f64>> =
        serde_json::from_str(&std::fs::read_to_string(&tr_path).unwrap()).unwrap();
    assert!((tr[0][0] - 1.0).abs() <= 1e-12);
    assert!((tr[1][1] - 0.25).abs() <= 1e-12);
}

#[test]
fn decompose_reports_summands_and_cubic_flag() {
    let dir = tempfile::tempdir().unwrap();
    let lat = z2(dir.path());
    let v = stdout_json(&run(&["decompose", "--lattice", &lat]));
    assert_eq!(v["is_Zn"], true);
    assert_eq!(v["ranks"].as_array().unwrap().len(), 2);
    assert_eq!(v["summands"].as_array().unwrap().len(), 2);

    let a = (2.0 / 3.0f64.sqrt()).sqrt();
    let hex = write_lattice(
        dir.path(),
        "hex.json",
        2,
        2,
        &[vec![a, a / 2.0], vec![0.0, a * 3.0f64.sqrt() / 2.0]],
    );
    let v = stdout_json(&run(&["decompose", "--lattice", &hex]));
    assert_eq!(v["is_Zn"], false);
    assert_eq!(v["ranks"].as_array().unwrap().len(), 1);
    let dets = v["dets"].as_array().unwrap();
    assert!((dets[0].as_f64().unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn laplacian_fd_check_closes_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let l1 = write_lattice(dir.path(), "trivial.json", 0, 0, &[]);
    let l2 = z2(dir.path());
    let v = stdout_json(&run(&[
        "laplacian", "--l1", &l1, "--l2", &l2, "--s", "3", "--q", "0.1", "--fd-check",
    ]));
    assert!(v["closed_form"].as_f64().unwrap() > 0.0);
    assert!(v["relative_gap"].as_f64().unwrap() <= 1e-4);

    let bare = stdout_json(&run(&["laplacian", "--l1", &l1, "--l2", &l2, "--s", "3"]));
    assert!(bare.get("fd_value").is_none());
}

#[test]
fn verify_is_reproducible_and_signals_by_exit_code() {
    let first = run(&[
        "verify", "--n", "2", "--s", "3", "--q", "0.25", "--count", "2", "--seed", "42",
    ]);
    assert_eq!(first.status.code(), Some(0));
    let second = run(&[
        "verify", "--n", "2", "--s", "3", "--q", "0.25", "--count", "2", "--seed", "42",
    ]);
    assert_eq!(first.stdout, second.stdout, "same seed must give identical bytes");

    let report: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(report["violations"], 0);
    assert_eq!(report["per_lattice"].as_array().unwrap().len(), 6);

    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.csv");
    let csv_run = run(&[
        "verify", "--n", "2", "--s", "3", "--q", "0.25", "--count", "2", "--seed", "42",
        "--csv", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(csv_run.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("id,n,s,q,zeta_prime,margin,is_zn,tail_bound"));
    assert_eq!(csv.lines().count(), 7);

    let bad = run(&["verify", "--n", "0", "--s", "3", "--q", "0"]);
    assert_eq!(bad.status.code(), Some(1));

    let unknown = run(&["verify", "--n", "2", "--s", "3", "--definitely-not-a-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn explore_flag_gates_out_of_range_shifts() {
    let gated = run(&[
        "verify", "--n", "2", "--s", "2", "--q", "0.9", "--count", "1", "--seed", "5",
    ]);
    assert_eq!(gated.status.code(), Some(1));

    let allowed = run(&[
        "verify", "--n", "2", "--s", "2", "--q", "0.9", "--count", "1", "--seed", "5",
        "--explore-q",
    ]);
    assert_eq!(allowed.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&allowed.stdout).unwrap();
    assert_eq!(report["exploratory"], true);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn triboson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triboson"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("valid JSON")
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn twobody_band_rows() {
    let out = triboson(&[
        "twobody-band",
        "--dim",
        "1",
        "--mu",
        "-1",
        "--k-points",
        "33",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let (header, rows) = csv(&text);
    assert_eq!(header, ["k0", "e_mu", "band_lo", "band_hi", "gap"]);
    assert_eq!(rows.len(), 33);
    for row in &rows {
        assert!(num(&row[4]) > 0.0);
    }
    let at = |k: f64| rows.iter().find(|r| (num(&r[0]) - k).abs() < 1e-9).unwrap();
    assert!((num(&at(0.0)[1]) - (2.0 - 5f64.sqrt())).abs() < 1e-9);
    assert!((num(&at(std::f64::consts::PI)[1]) - 1.0).abs() < 1e-9);
}

#[test]
fn twobody_band_two_dimensional_json() {
    let out = triboson(&[
        "twobody-band",
        "--dim",
        "2",
        "--mu",
        "-3",
        "--k-points",
        "5",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0);
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r["gap"].as_f64().unwrap() > 0.0));
}

#[test]
fn ess_spectrum_record() {
    let out = triboson(&["ess-spectrum", "--dim", "1", "--mu", "-1", "--K", "0"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let tau = v["tau_ess"].as_f64().unwrap();
    assert!((tau - (2.0 - 5f64.sqrt())).abs() < 1e-8);
    let parts = v["union"].as_array().unwrap().len();
    assert!(parts == 1 || parts == 2);
    assert!(tau < v["band"][0].as_f64().unwrap());
    assert!(tau <= v["witness"]["value"].as_f64().unwrap() + 1e-12);

    let out = triboson(&[
        "ess-spectrum",
        "--dim",
        "2",
        "--mu",
        "-2",
        "--K",
        "pi/2,-pi/4",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(v["tau_ess"].as_f64().unwrap() < v["band"][0].as_f64().unwrap());
}

#[test]
fn bound_states_match_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let wf = dir.path().join("wf.csv");
    let out = triboson(&[
        "bound-states",
        "--dim",
        "1",
        "--mu",
        "-1",
        "--K",
        "0",
        "--grid-n",
        "32",
        "--with-oracle",
        "--wavefunctions",
        wf.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let count = v["count"].as_u64().unwrap();
    assert!(count >= 1);
    assert_eq!(v["exploratory"], Value::Bool(false));
    let check = &v["crosscheck"];
    assert_eq!(check["counts_equal"], Value::Bool(true));
    assert_eq!(check["energies_match"], Value::Bool(true));
    assert_eq!(
        check["oracle_energies"].as_array().unwrap().len() as u64,
        count
    );
    let ceiling = v["thresholds"]["ceiling"].as_f64().unwrap();
    assert!(v["energies"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e.as_f64().unwrap() < ceiling));

    let (header, rows) = csv(&read(&wf));
    assert_eq!(header.len(), 2 + count as usize);
    assert_eq!(rows.len(), 32 * 32);
}

#[test]
fn bound_states_two_dimensional_with_oracle() {
    let out = triboson(&[
        "bound-states",
        "--dim",
        "2",
        "--mu",
        "-2",
        "--K",
        "pi/2,0",
        "--grid-n",
        "8",
        "--with-oracle",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["crosscheck"]["counts_equal"], Value::Bool(true));
    assert_eq!(v["exploratory"], Value::Bool(false));

    let out = triboson(&["bound-states", "--mu", "-2", "--K", "pi", "--grid-n", "16"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["exploratory"], Value::Bool(true));
}

#[test]
fn bound_states_exit_codes() {
    assert_eq!(code(&triboson(&["bound-states", "--mu", "1"])), 2);
    assert_eq!(code(&triboson(&["bound-states", "--grid-n", "9"])), 2);
    assert_eq!(code(&triboson(&["bound-states", "--tol", "0.5"])), 2);
    assert_eq!(
        code(&triboson(&["bound-states", "--dim", "2", "--K", "0"])),
        2
    );
    assert_eq!(
        code(&triboson(&["bound-states", "--K", "pi/3", "--with-oracle"])),
        2
    );
    assert_eq!(code(&triboson(&["bound-states", "--format", "csv"])), 2);

    let out = triboson(&["bound-states", "--mu", "-0.01"]);
    match code(&out) {
        0 => assert!(json(&out)["count"].as_u64().unwrap() <= 2),
        3 => assert_eq!(json(&out)["converged"], Value::Bool(false)),
        other => panic!("unexpected exit code {other}"),
    }
}

#[test]
fn bands_sweep_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bands.csv");
    let out = triboson(&[
        "bands",
        "--dim",
        "1",
        "--mu",
        "-2",
        "--k-points",
        "17",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv(&read(&path));
    assert_eq!(&header[..3], ["K0", "tau_ess", "e_min"]);
    assert_eq!(rows.len(), 17);
    for row in &rows {
        let tau = num(&row[1]);
        for cell in row[3..].iter().filter(|c| !c.is_empty()) {
            assert!(num(cell) < tau);
        }
    }
    for j in 0..17 {
        let (a, b) = (&rows[j], &rows[16 - j]);
        assert!((num(&a[0]) + num(&b[0])).abs() < 1e-9);
        assert!((num(&a[3]) - num(&b[3])).abs() < 1e-8);
    }
    let side: Value =
        serde_json::from_str(&read(&dir.path().join("bands.csv.smoothness.json"))).unwrap();
    assert_eq!(side["jumps"].as_u64(), Some(0));
    assert!(side["nonconverged"].as_array().unwrap().is_empty());
}

#[test]
fn output_is_deterministic_across_runs_and_pools() {
    let args = [
        "bands",
        "--mu",
        "-1.5",
        "--k-points",
        "9",
        "--format",
        "json",
    ];
    let one = triboson(&[&args[..], &["--jobs", "1"]].concat());
    let four = triboson(&[&args[..], &["--jobs", "4"]].concat());
    let again = triboson(&[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(four.stdout, again.stdout);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "dim = 1\nmu = -1.0\nK = \"0\"\ngrid_n = 16\nformat = \"json\"\n",
    )
    .unwrap();
    let base = triboson(&["ess-spectrum", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&base), 0);
    assert_eq!(json(&base)["grid_n"].as_u64(), Some(16));
    let over = triboson(&[
        "ess-spectrum",
        "--config",
        config.to_str().unwrap(),
        "--mu",
        "-2",
    ]);
    assert_eq!(json(&over)["mu"].as_f64(), Some(-2.0));

    fs::write(&config, "mu = \"strong\"\n").unwrap();
    assert_eq!(
        code(&triboson(&[
            "ess-spectrum",
            "--config",
            config.to_str().unwrap()
        ])),
        2
    );
    let missing = dir.path().join("absent.toml");
    assert_eq!(
        code(&triboson(&[
            "ess-spectrum",
            "--config",
            missing.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn validate_quick_and_sign_flip() {
    let out = triboson(&["validate", "--quick"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(
        stdout(&out)
            .lines()
            .filter(|l| l.contains(" PASS "))
            .count(),
        10
    );

    let out = triboson(&["validate", "--quick", "--inject-sign-flip"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("criterion  4 FAIL"));
    assert!(String::from_utf8_lossy(&out.stderr)
        .contains("4 (Birman-Schwinger count equals oracle count)"));
}

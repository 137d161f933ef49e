use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use uhdtest::DataMatrix;
use uhdtest_cli::io::{encode_binary, write_csv};
use uhdtest_cli::report::{parse_calibration, RunReport};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uhdtest"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("UHDTEST_THREADS").output().expect("spawn uhdtest")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn gaussian(n: usize, p: usize, scale: f64, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..n * p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    DataMatrix::new(n, p, v).unwrap()
}

fn save_csv(dir: &Path, name: &str, m: &DataMatrix) -> PathBuf {
    let path = dir.join(name);
    write_csv(m, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = save_csv(dir.path(), "x.csv", &gaussian(20, 30, 1.0, 1));
    let o = run(&["test", s(&x), s(&x), "--alpha", "1.5"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["test", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["test", s(&x), s(&x), "--theta", "-2"])), 1);
}

#[test]
fn mismatched_columns_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = save_csv(dir.path(), "x.csv", &gaussian(20, 30, 1.0, 1));
    let y = save_csv(dir.path(), "y.csv", &gaussian(20, 31, 1.0, 2));
    assert_eq!(code(&run(&["test", s(&x), s(&y)])), 2);
}

#[test]
fn missing_or_malformed_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&run(&["spectra", s(&missing)])), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    assert_eq!(code(&run(&["spectra", s(&bad)])), 2);
}

#[test]
fn constant_rows_have_a_zero_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let m = DataMatrix::new(6, 4, [1.5, -2.0, 0.0, 7.0].repeat(6)).unwrap();
    let x = save_csv(dir.path(), "const.csv", &m);
    let o = run(&["spectra", s(&x)]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eig = doc["eigenvalues"].as_array().unwrap();
    assert_eq!(eig.len(), 5);
    assert!(eig.iter().all(|e| e.as_f64() == Some(0.0)));
}

#[test]
fn identity_overlay_centers_on_the_empirical_median() {
    let dir = tempfile::tempdir().unwrap();
    let (n, p) = (100, 2000);
    let x = dir.path().join("x.bin");
    std::fs::write(&x, encode_binary(&gaussian(n, p, 1.0, 3))).unwrap();
    let pop = dir.path().join("pop.txt");
    std::fs::write(&pop, "1\n".repeat(p)).unwrap();
    let o = run(&["spectra", s(&x), "--population", s(&pop)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let median = doc["summary"]["median"].as_f64().unwrap();
    let center = doc["overlay"]["center"].as_f64().unwrap();
    // The semicircle drops an O(phi^{-1/2}) shift of about 1/sqrt(20).
    assert!((median - center).abs() < 0.3, "median {median} vs center {center}");
    assert!((center - (p as f64 / n as f64).sqrt()).abs() < 1e-12);
}

#[test]
fn null_data_is_accepted_for_most_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut accepted = 0;
    for seed in 0..10u64 {
        let x = save_csv(dir.path(), "x.csv", &gaussian(80, 500, 1.0, 100 + 2 * seed));
        let y = save_csv(dir.path(), "y.csv", &gaussian(80, 500, 1.0, 101 + 2 * seed));
        let o = run(&["test", s(&x), s(&y), "--seed", &seed.to_string()]);
        let c = code(&o);
        assert!(c == 0 || c == 3, "{}", String::from_utf8_lossy(&o.stderr));
        let report = RunReport::parse(&String::from_utf8(o.stdout).unwrap()).unwrap();
        assert_eq!(report.reject, c == 3);
        assert_eq!(report.k_splits, 1000);
        assert_eq!(report.n, 35);
        accepted += usize::from(c == 0);
    }
    assert!(accepted >= 9, "accepted {accepted} of 10");
}

#[test]
fn separated_samples_exit_with_reject() {
    let dir = tempfile::tempdir().unwrap();
    let x = save_csv(dir.path(), "x.csv", &gaussian(40, 100, 1.0, 5));
    let y = save_csv(dir.path(), "y.csv", &gaussian(40, 100, 10.0, 6));
    let out = dir.path().join("report.txt");
    let o = run(&["test", s(&x), s(&y), "--k-splits", "50", "--theta", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let report = RunReport::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.reject);
    assert_eq!(report.dr, 1.0);
    assert_eq!(report.theta_source, "explicit");
}

#[test]
fn calibration_files_are_reproducible_and_reusable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.cal");
    let b = dir.path().join("b.cal");
    let args = |out: &Path| {
        ["calibrate", "--n1", "40", "--n2", "40", "--p", "120", "--k-splits", "30", "--b", "25", "--seed", "4", "--out"]
            .iter()
            .map(|s| s.to_string())
            .chain([s(out).to_string()])
            .collect::<Vec<_>>()
    };
    let run_owned = |v: Vec<String>| bin().args(v).output().unwrap();
    assert_eq!(code(&run_owned(args(&a))), 0);
    assert_eq!(code(&run_owned(args(&b))), 0);
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let cal = parse_calibration(&String::from_utf8(text).unwrap()).unwrap();
    assert_eq!(cal.b, 25);
    assert!((0.0..1.0).contains(&cal.delta));
    assert_eq!(cal.params.n, 15);

    let x = save_csv(dir.path(), "x.csv", &gaussian(40, 120, 1.0, 7));
    let y = save_csv(dir.path(), "y.csv", &gaussian(40, 120, 1.0, 8));
    let o = run(&["test", s(&x), s(&y), "--k-splits", "30", "--calibration", s(&a)]);
    let report = RunReport::parse(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(report.delta.to_bits(), cal.delta.to_bits());
    assert_eq!(report.delta_source, "calibration_file");
    assert_eq!(report.theta, cal.params.theta);

    // A file made for another K does not apply.
    assert_eq!(code(&run(&["test", s(&x), s(&y), "--k-splits", "31", "--calibration", s(&a)])), 1);
    assert_eq!(code(&run(&["calibrate", "--n1", "40", "--n2", "40", "--p", "120", "--b", "0"])), 1);
    assert_eq!(code(&run(&["calibrate", "--n1", "40", "--n2", "40", "--p", "120", "--n", "30"])), 1);
}

#[test]
fn tune_reports_a_grid_choice() {
    let dir = tempfile::tempdir().unwrap();
    let x = save_csv(dir.path(), "x.csv", &gaussian(50, 150, 1.0, 9));
    let y = save_csv(dir.path(), "y.csv", &gaussian(50, 150, 1.1, 10));
    let o = run(&["tune", s(&x), s(&y), "--k-splits", "40"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = uhdtest_cli::report::KvDoc::parse(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let grid: Vec<f64> = doc.list("grid").unwrap();
    let theta: f64 = doc.get("theta").unwrap();
    assert_eq!(grid.len(), 12);
    assert!(grid.contains(&theta));
    assert_eq!(doc.list::<f64>("dr").unwrap().len(), 12);
}

#[test]
fn malformed_scenarios_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.scenario");
    std::fs::write(&f, "case = IV\np = 50\nn1 = 20\nn2 = 20\nhypothesis = null\n").unwrap();
    assert_eq!(code(&run(&["simulate", s(&f)])), 2);
    std::fs::write(&f, "case = II\np = 50\nn1 = 20\nn2 = 20\nhypothesis = alternative\n").unwrap();
    assert_eq!(code(&run(&["simulate", s(&f)])), 2);
}

fn desk_scenario(dir: &Path, body: &str) -> PathBuf {
    let f = dir.join("desk.scenario");
    std::fs::write(&f, format!("p = 500\nn1 = 80\nn2 = 80\nseed = 7\n{body}")).unwrap();
    f
}

const DESK_FLAGS: [&str; 10] = ["--reps", "200", "--k-splits", "100", "--theta", "1.25", "--delta", "auto", "--b", "200"];

fn rate_of(csv: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "rejection_rate").unwrap();
    lines.next().unwrap().split(',').nth(col).unwrap().parse().unwrap()
}

#[test]
fn simulate_case_ii_alternative_has_power() {
    let dir = tempfile::tempdir().unwrap();
    let f = desk_scenario(dir.path(), "case = II\nhypothesis = alternative\ntheta = 0.5\n");
    let o = run(&[&["simulate", s(&f)][..], &DESK_FLAGS[..], &["--seed", "2024"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rate = rate_of(&String::from_utf8(o.stdout).unwrap());
    assert!(rate >= 0.95, "power {rate}");
}

#[test]
fn simulate_null_is_within_the_binomial_band() {
    let dir = tempfile::tempdir().unwrap();
    let f = desk_scenario(dir.path(), "case = I\nhypothesis = null\n");
    let o = run(&[&["simulate", s(&f)][..], &DESK_FLAGS[..], &["--seed", "2024"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rate = rate_of(&String::from_utf8(o.stdout).unwrap());
    assert!((0.022..=0.085).contains(&rate), "size {rate}");
}

#[test]
fn simulate_appends_rows_under_one_header() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("small.scenario");
    std::fs::write(&f, "case = III\np = 60\nn1 = 30\nn2 = 30\nhypothesis = alternative\nepsilon = 1\nseed = 2\n").unwrap();
    let out = dir.path().join("rows.csv");
    let args = ["simulate", s(&f), "--reps", "3", "--k-splits", "10", "--theta", "1", "--delta", "binomial", "--out", s(&out)];
    assert_eq!(code(&run(&args)), 0);
    let curve = ["simulate", s(&f), "--reps", "3", "--k-splits", "10", "--theta", "1", "--power-curve", "0,0.5,1", "--out", s(&out)];
    assert_eq!(code(&run(&curve)), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 3);
    assert!(lines[0].starts_with("case,"));
    assert!(lines[1..].iter().all(|l| !l.starts_with("case,")));
    assert!(lines[2].contains(",null,"));
}

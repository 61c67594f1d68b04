use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dicke-fcs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SOURCE_SWEEP: &[&str] = &[
    "sweep", "--var", "nS", "--log", "1e-3", "1e6", "--points", "91", "--N", "1,2,4,8", "--nD",
    "0", "--gammaS", "1", "--gammaD", "1", "--out",
];

fn source_sweep(path: &Path) -> Output {
    let mut args = SOURCE_SWEEP.to_vec();
    args.push(path.to_str().unwrap());
    run(&args)
}

#[test]
fn current_of_two_atoms() {
    let o = run(&["current", "--N", "2", "--nS", "2", "--nD", "0", "--gammaS", "1", "--gammaD", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("current = 0.857142857"), "{}", stdout(&o));
}

#[test]
fn source_occupation_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let o = source_sweep(&path);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["sweep_var", "N", "nS", "nD", "gammaS", "gammaD", "C1", "C2", "C3", "C4", "sigmaN", "regime"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 91);

    let mut last: Option<(usize, f64)> = None;
    for r in &rows {
        let n: usize = r[1].parse().unwrap();
        let x: f64 = r[0].parse().unwrap();
        if let Some(prev) = last {
            assert!((n, x) > prev, "rows out of order");
        }
        last = Some((n, x));
        // full precision: 17 significant digits
        assert_eq!(r[6].split('e').next().unwrap().trim_start_matches('-').len(), 18);
        for k in 6..11 {
            assert!(r[k].parse::<f64>().unwrap().is_finite());
        }
        assert!(["linear", "crossover", "collective"].contains(&&r[11]));
    }

    // higher cumulants separate with N where the current barely does
    let at_one = |n: &str| {
        rows.iter()
            .find(|r| &r[1] == n && (r[0].parse::<f64>().unwrap() - 1.0).abs() < 1e-9)
            .unwrap()
            .clone()
    };
    let (one, eight) = (at_one("1"), at_one("8"));
    let ratio = |k: usize| eight[k].parse::<f64>().unwrap() / one[k].parse::<f64>().unwrap();
    assert!(ratio(9) > ratio(6));
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(source_sweep(&a).status.success());
    assert!(source_sweep(&b).status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn empty_order_request_keeps_columns() {
    let o = run(&["sweep", "--var", "nD", "--lin", "0", "1", "--points", "3", "--orders", "none"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 12);
        assert!(fields[6..10].iter().all(|f| f.is_empty()));
        assert!(!fields[10].is_empty());
    }
}

#[test]
fn sweep_over_atom_number() {
    let o = run(&["sweep", "--var", "N", "--lin", "4", "1", "--points", "4", "--nS", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let sizes: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(sizes, ["1", "2", "3", "4"]);
}

#[test]
fn invalid_inputs_are_usage_errors() {
    for args in [
        &["current", "--nS", "-1"][..],
        &["current", "--N", "0"],
        &["current", "--nS", "1", "--TS", "2"],
        &["sweep", "--var", "nS", "--log", "0", "1", "--points", "5"],
        &["sweep", "--var", "nS", "--lin", "0", "1", "--points", "1"],
        &["oracle", "--N", "4"],
        &["nonsense"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.cfg");
    std::fs::write(&cfg, "# two emitters\nN = 2\nnS = 5\nnD = 0\n").unwrap();
    let o = run(&["current", "--config", cfg.to_str().unwrap(), "--nS", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("current = 0.857142857"));

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = run(&["current", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_names_the_path() {
    let o = run(&["sweep", "--var", "nS", "--lin", "1", "2", "--points", "2", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/dir/x.csv"));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn both_methods_agree() {
    let o = run(&["cumulants", "--N", "4", "--nS", "3", "--nD", "0.5", "--method", "both"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn verify_ft_for_thermal_baths() {
    let o = run(&["verify-ft", "--N", "3", "--TS", "2", "--TD", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    // zero occupation on one side: the affinity diverges
    let o = run(&["verify-ft", "--N", "3", "--nS", "2", "--nD", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn transient_outputs() {
    let o = run(&["transient", "flash", "--N", "8", "--nB", "0", "--t-max", "2", "--points", "21"]);
    assert!(o.status.success());
    let rates: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates[0], 8.0);
    assert!(rates.iter().cloned().fold(0.0, f64::max) > 8.0);

    let o = run(&["transient", "pn", "--N", "2", "--nS", "1", "--t", "1"]);
    assert!(o.status.success());
    let total: f64 = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);

    let o = run(&["transient", "window", "--N", "3", "--nB", "0.5", "--t", "0.3", "--resolution", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn oracle_and_equilibrium() {
    let o = run(&["oracle", "--N", "3", "--nS", "2", "--nD", "0.5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = run(&["equilibrium", "--N", "4", "--T", "100"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("thermal conductance"));
}

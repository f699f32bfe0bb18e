use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantcurve"))
}

fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fit_recovers_the_exact_linear_quantile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.csv");
    let input = tests_dir().join("fixtures/linear.csv");
    let o = run(&[
        "fit",
        "--set", &format!("input={}", input.display()),
        "--set", &format!("output={}", out.display()),
        "--set", "alpha=0.25,0.5,0.9",
        "--set", "h=0.2",
        "--set", "x_range=0.2,0.8",
        "--set", "x_count=7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("fit: 21 cells, 21 ok"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# basis ordering: (0);(1)\n"));
    let header = text.lines().nth(1).unwrap();
    assert_eq!(header, "alpha,h,x1,b_0,b_1,status,active_points,boundary,note");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 21);
    for r in rows {
        let x: f64 = r[2].parse().unwrap();
        let b0: f64 = r[3].parse().unwrap();
        let b1: f64 = r[4].parse().unwrap();
        assert!((b0 - (2.0 + 3.0 * x)).abs() < 1e-8, "{r:?}");
        assert!((b1 - 3.0).abs() < 1e-8, "{r:?}");
        assert_eq!(r[5], "optimal");
        assert_eq!(r[7], "false");
    }
}

#[test]
fn invalid_level_is_a_validation_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let input = tests_dir().join("fixtures/linear.csv");
    std::fs::write(
        &cfg,
        format!("input = {}\noutput = out.csv\nalpha = 1.2\nh = 0.2\nx = 0.5\n", input.display()),
    )
    .unwrap();
    let o = run(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha") && err.contains("1.2"), "{err}");
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn bad_rows_are_reported_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    let mut text = String::from("x1,y\n");
    for i in 1..=9 {
        text.push_str(&if i == 7 { "0.7,NaN\n".to_string() } else { format!("0.{i},{i}\n") });
    }
    std::fs::write(&input, text).unwrap();
    let o = run(&[
        "echo",
        "--set", &format!("input={}", input.display()),
        "--set", &format!("output={}", dir.path().join("e.csv").display()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 7"), "{err}");
}

#[test]
fn unknown_keys_and_commands_are_rejected() {
    let o = run(&["fit", "--set", "alpah=0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpah"));
    let o = run(&["estimate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn echo_round_trips_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "x1,x2,y\n0.1,-2.5,3\n1e-7,0.3333333333333333,-4.25\n").unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for (src, dst) in [(&input, &first), (&first, &second)] {
        let o = run(&[
            "echo",
            "--set", &format!("input={}", src.display()),
            "--set", &format!("output={}", dst.display()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(&first).unwrap();
    assert_eq!(a, std::fs::read_to_string(&second).unwrap());
    let original = quantcurve::cli::ingest_csv(&input).unwrap();
    assert_eq!(quantcurve::cli::parse_sample_csv(&a).unwrap(), original);
}

#[test]
fn qdensity_and_auction_commands() {
    let dir = tempfile::tempdir().unwrap();
    let input = tests_dir().join("fixtures/linear.csv");
    let out = dir.path().join("qd.csv");
    let o = run(&[
        "qdensity",
        "--set", &format!("input={}", input.display()),
        "--set", &format!("output={}", out.display()),
        "--set", "alpha=0.05,0.5",
        "--set", "h=0.25",
        "--set", "x=0.5",
        "--set", "h_q=0.1",
        "--set", "avar=true",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("alpha,h,h_q,x1,q_hat,scheme,switched,fx_hat,avar_prop,status,note\n"));
    let rows = data_rows(&text);
    // Noise-free data: every level has the same fitted quantile, so q_hat = 0.
    assert_eq!(rows[0][5], "forward");
    assert_eq!(rows[0][6], "true");
    assert_eq!(rows[1][5], "central");
    for r in &rows {
        assert!(r[4].parse::<f64>().unwrap().abs() < 1e-8);
    }

    let out = dir.path().join("auction.csv");
    let o = run(&[
        "auction",
        "--set", &format!("input={}", input.display()),
        "--set", &format!("output={}", out.display()),
        "--set", "alpha=0.5",
        "--set", "h=0.25",
        "--set", "x=0.5",
        "--set", "bidders=3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&text[text.find('\n').unwrap() + 1..]);
    let private: f64 = rows[0][6].parse().unwrap();
    assert!((private - 3.5).abs() < 1e-8);
}

#[test]
fn pinned_experiment_matches_golden_output() {
    let golden = tests_dir().join("golden");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("run{k}.csv"));
        let o = run(&[
            "experiment",
            "--set", &format!("experiment={}", golden.join("tiny_experiment.cfg").display()),
            "--set", &format!("output={}", csv.display()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(&csv).unwrap(),
            std::fs::read(csv.with_extension("json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let expected_csv = std::fs::read(golden.join("tiny_experiment.csv")).expect("golden csv present");
    let expected_json = std::fs::read(golden.join("tiny_experiment.json")).expect("golden json present");
    assert_eq!(outputs[0].0, expected_csv);
    assert_eq!(outputs[0].1, expected_json);
}

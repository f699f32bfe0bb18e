//! Runs a convergence-rate experiment from a key=value configuration and
//! prints the per-cell CSV and the fitted slope.
//!
//! Pass a config path as the first argument, or run the built-in one.

use quantcurve::config::KeyValues;
use quantcurve::mc_lab::{run_experiment, RateExperiment};

const DEFAULT: &str = "\
dgp = location-sin
target = global-sup-rate
n = 250, 500, 1000, 2000
x = -0.3
x = 0
x = 0.3
s = 2
replications = 20
seed = 1
";

fn main() -> quantcurve::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).map_err(|e| quantcurve::Error::Io {
            path,
            message: e.to_string(),
        })?,
        None => DEFAULT.to_string(),
    };
    let exp = RateExperiment::from_key_values(&KeyValues::parse(&text)?)?;
    let result = run_experiment(&exp)?;
    print!("{}", result.to_csv());
    println!(
        "{}: slope {:.4} (se {:.4}), expected {:.4} +/- {} -> {}",
        result.target,
        result.slope.unwrap_or(f64::NAN),
        result.slope_std_error.unwrap_or(f64::NAN),
        result.expected_slope,
        result.tolerance,
        if result.pass { "pass" } else { "fail" }
    );
    Ok(())
}

//! Command-line front end: `quantcurve <command> [--config PATH] [--set key=value]...`.
//!
//! Commands are `fit`, `qdensity`, `auction`, `experiment` and `echo`. The
//! configuration is a flat `key = value` file; `--set` overrides are applied
//! after it in order. Exit status is 0 on success, 1 on validation errors and
//! 2 on runtime failures.

mod io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::basis::{BasisSpec, MultiIndex};
use crate::bahadur::plugin_leading_term;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::estimator::{EvalPoint, LocalFit, LocalQuantileEstimator, Sample};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::mc_lab::{format_number, run_experiment, RateExperiment};
use crate::qdensity::{
    asymptotic_variance_proportional, auction_private_value, estimate_qd, kernel_density,
    make_scheme, scheme_for_level, QdScheme, SchemeKind,
};

pub use io::{emit_sample_csv, ingest_csv, parse_sample_csv, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Qdensity,
    Auction,
    Experiment,
    Echo,
}

impl Command {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "fit" => Ok(Command::Fit),
            "qdensity" => Ok(Command::Qdensity),
            "auction" => Ok(Command::Auction),
            "experiment" => Ok(Command::Experiment),
            "echo" => Ok(Command::Echo),
            other => Err(Error::invalid(
                "command",
                format!("unknown command '{other}', expected fit, qdensity, auction, experiment or echo"),
            )),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Qdensity => "qdensity",
            Command::Auction => "auction",
            Command::Experiment => "experiment",
            Command::Echo => "echo",
        }
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            Command::Fit => &[
                "input", "output", "p", "kernel", "alpha", "h", "x", "x_range", "x_count", "margin",
                "plugin_beta", "h_q", "hq_ratio", "qd_scheme", "qd_order", "qd_nodes",
            ],
            Command::Qdensity => &[
                "input", "output", "p", "kernel", "alpha", "h", "x", "x_range", "x_count", "margin",
                "h_q", "hq_ratio", "qd_scheme", "qd_order", "qd_nodes", "avar",
            ],
            Command::Auction => &[
                "input", "output", "p", "kernel", "alpha", "h", "x", "x_range", "x_count", "margin",
                "h_q", "hq_ratio", "qd_scheme", "qd_order", "qd_nodes", "bidders",
            ],
            // Experiment keys are validated by the experiment parser.
            Command::Experiment => &[],
            Command::Echo => &["input", "output"],
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub order: usize,
    pub kernel: KernelFamily,
    pub alphas: Vec<f64>,
    pub hs: Vec<f64>,
    /// Explicit points, or a tensor grid from `x_range`/`x_count` once the
    /// input dimension is known.
    pub xs: XGrid,
    pub margin: Option<f64>,
    pub h_q: Option<f64>,
    pub hq_ratio: f64,
    pub qd_scheme: SchemeKind,
    pub qd_order: usize,
    pub avar: bool,
    pub plugin_beta: bool,
    pub bidders: u32,
    /// Experiment settings, read from `experiment = PATH` or inline keys.
    pub experiment: Option<RateExperiment>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum XGrid {
    Points(Vec<String>),
    Range { lo: f64, hi: f64, count: usize },
}

impl XGrid {
    fn resolve(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            XGrid::Points(raw) => {
                let mut kv = KeyValues::default();
                kv.set("x", &raw.join(";"));
                kv.points("x", d)
            }
            XGrid::Range { lo, hi, count } => {
                let axis: Vec<f64> = (0..*count)
                    .map(|k| {
                        if *count == 1 {
                            0.5 * (lo + hi)
                        } else {
                            lo + (hi - lo) * k as f64 / (*count - 1) as f64
                        }
                    })
                    .collect();
                let mut grid = vec![Vec::new()];
                for _ in 0..d {
                    grid = grid
                        .into_iter()
                        .flat_map(|p: Vec<f64>| {
                            axis.iter().map(move |&a| {
                                let mut q = p.clone();
                                q.push(a);
                                q
                            })
                        })
                        .collect();
                }
                Ok(grid)
            }
        }
    }
}

fn parse_bool(kv: &KeyValues, key: &str) -> Result<bool> {
    match kv.one(key)? {
        None | Some("false") | Some("0") | Some("no") => Ok(false),
        Some("true") | Some("1") | Some("yes") => Ok(true),
        Some(other) => Err(Error::invalid(key, format!("expected true or false, got '{other}'"))),
    }
}

impl RunConfig {
    /// `base_dir` resolves relative paths named in the configuration.
    pub fn from_key_values(command: Command, kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        if command == Command::Experiment {
            return Self::experiment_config(kv, &resolve);
        }
        let allowed = command.allowed_keys();
        if let Some(k) = kv.keys().find(|k| !allowed.contains(k)) {
            return Err(Error::invalid(k, format!("unknown key for the {} command", command.name())));
        }
        let input = resolve(kv.required("input")?);
        if !input.is_file() {
            return Err(Error::invalid("input", format!("file {} does not exist", input.display())));
        }
        let output = resolve(kv.required("output")?);
        let mut cfg = RunConfig::blank(command, output);
        cfg.input = Some(input);
        if command == Command::Echo {
            return Ok(cfg);
        }
        cfg.order = kv.parsed_or("p", 1)?;
        if let Some(k) = kv.one("kernel")? {
            cfg.kernel = k.parse()?;
        }
        cfg.alphas = kv.list("alpha")?;
        if cfg.alphas.is_empty() {
            return Err(Error::invalid("alpha", "at least one quantile level is required"));
        }
        if let Some(a) = cfg.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::invalid("alpha", format!("quantile level {a} is outside (0,1)")));
        }
        cfg.hs = kv.list("h")?;
        if cfg.hs.is_empty() {
            return Err(Error::invalid("h", "at least one bandwidth is required"));
        }
        if let Some(h) = cfg.hs.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::invalid("h", format!("bandwidth {h} must be positive")));
        }
        cfg.xs = match (kv.contains("x"), kv.one("x_range")?) {
            (true, None) => XGrid::Points(kv.all("x").to_vec()),
            (false, Some(_)) => {
                let r: Vec<f64> = kv.list("x_range")?;
                if r.len() != 2 || !(r[0] <= r[1]) {
                    return Err(Error::invalid("x_range", "expected lo,hi with lo <= hi"));
                }
                let count = kv.parsed_or("x_count", 11usize)?;
                if count == 0 {
                    return Err(Error::invalid("x_count", "must be positive"));
                }
                XGrid::Range { lo: r[0], hi: r[1], count }
            }
            (true, Some(_)) => return Err(Error::invalid("x", "give either x or x_range, not both")),
            (false, None) => return Err(Error::invalid("x", "an evaluation grid (x or x_range) is required")),
        };
        cfg.margin = kv.parsed("margin")?;
        cfg.h_q = kv.parsed("h_q")?;
        if let Some(hq) = cfg.h_q {
            if !(hq > 0.0) {
                return Err(Error::invalid("h_q", "level bandwidth must be positive"));
            }
        }
        cfg.hq_ratio = kv.parsed_or("hq_ratio", 1.0)?;
        if !(cfg.hq_ratio > 0.0) {
            return Err(Error::invalid("hq_ratio", "must be positive"));
        }
        if let Some(kind) = kv.one("qd_scheme")? {
            cfg.qd_scheme = if kind == "custom-nodes" {
                SchemeKind::Custom(kv.list("qd_nodes")?)
            } else {
                kind.parse()?
            };
        }
        cfg.qd_order = kv.parsed_or("qd_order", 2)?;
        make_scheme(cfg.qd_scheme.clone(), cfg.qd_order)?;
        cfg.avar = parse_bool(kv, "avar")?;
        cfg.plugin_beta = parse_bool(kv, "plugin_beta")?;
        if command == Command::Auction {
            cfg.bidders = kv
                .parsed("bidders")?
                .ok_or_else(|| Error::invalid("bidders", "missing required key"))?;
            if cfg.bidders < 2 {
                return Err(Error::invalid("bidders", "need at least 2 bidders"));
            }
        }
        Ok(cfg)
    }

    fn experiment_config(
        kv: &KeyValues,
        resolve: &dyn Fn(&str) -> PathBuf,
    ) -> Result<Self> {
        let output = resolve(kv.required("output")?);
        let summary = match kv.one("summary")? {
            Some(p) => resolve(p),
            None => output.with_extension("json"),
        };
        let mut spec = match kv.one("experiment")? {
            Some(path) => {
                let path = resolve(path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::invalid("experiment", format!("cannot read {}: {e}", path.display()))
                })?;
                KeyValues::parse(&text)?
            }
            None => KeyValues::default(),
        };
        for key in kv.keys() {
            if !matches!(key, "output" | "summary" | "experiment") {
                spec.set_all(key, kv.all(key));
            }
        }
        let exp = RateExperiment::from_key_values(&spec)?;
        let mut cfg = RunConfig::blank(Command::Experiment, output);
        cfg.experiment = Some(exp);
        cfg.summary = Some(summary);
        Ok(cfg)
    }

    fn blank(command: Command, output: PathBuf) -> Self {
        RunConfig {
            command,
            input: None,
            output,
            order: 1,
            kernel: KernelFamily::EpanechnikovProduct,
            alphas: Vec::new(),
            hs: Vec::new(),
            xs: XGrid::Points(Vec::new()),
            margin: None,
            h_q: None,
            hq_ratio: 1.0,
            qd_scheme: SchemeKind::Central,
            qd_order: 2,
            avar: false,
            plugin_beta: false,
            bidders: 2,
            experiment: None,
            summary: None,
        }
    }
}

/// Exit status for a failed run: 1 for invalid configuration or input, 2
/// for failures during computation or output.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Invalid { .. } => 1,
        _ => 2,
    }
}

const USAGE: &str = "usage: quantcurve <fit|qdensity|auction|experiment|echo> [--config PATH] [--set key=value]...";

/// Parses command-line arguments (without the program name).
pub fn parse_args(args: &[String]) -> Result<RunConfig> {
    let (command, rest) = args
        .split_first()
        .ok_or_else(|| Error::invalid("command", USAGE))?;
    if command == "--help" || command == "-h" {
        return Err(Error::invalid("command", USAGE));
    }
    let command = Command::parse(command)?;
    let mut kv = KeyValues::default();
    let mut overrides = Vec::new();
    let mut it = rest.iter();
    while let Some(flag) = it.next() {
        let value = it
            .next()
            .ok_or_else(|| Error::invalid("arguments", format!("{flag} needs a value; {USAGE}")))?;
        match flag.as_str() {
            "--config" => {
                let path = PathBuf::from(value);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::invalid("config", format!("cannot read {}: {e}", path.display()))
                })?;
                kv = KeyValues::parse(&text)?;
                // Paths inside a config file are relative to that file.
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    for key in PATH_KEYS {
                        if let Some(v) = kv.one(key)? {
                            let resolved = parent.join(v);
                            kv.set(key, &resolved.to_string_lossy());
                        }
                    }
                }
            }
            "--set" => overrides.push(value.clone()),
            other => return Err(Error::invalid("arguments", format!("unknown flag '{other}'; {USAGE}"))),
        }
    }
    for o in &overrides {
        kv.apply_override(o)?;
    }
    RunConfig::from_key_values(command, &kv, Path::new(""))
}

const PATH_KEYS: [&str; 4] = ["input", "output", "summary", "experiment"];

/// Runs the command and returns the one-line summary for standard output.
pub fn run(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::Echo => {
            let sample = ingest_csv(input_path(cfg)?)?;
            write_atomic(&cfg.output, &emit_sample_csv(&sample))?;
            Ok(format!("echo: {} rows, d={} -> {}", sample.n(), sample.dim(), cfg.output.display()))
        }
        Command::Fit => run_fit(cfg),
        Command::Qdensity => run_qdensity(cfg),
        Command::Auction => run_auction(cfg),
        Command::Experiment => {
            let exp = cfg
                .experiment
                .as_ref()
                .ok_or_else(|| Error::invalid("experiment", "no experiment configured"))?;
            let result = run_experiment(exp)?;
            write_atomic(&cfg.output, &result.to_csv())?;
            let summary = cfg.summary.clone().unwrap_or_else(|| cfg.output.with_extension("json"));
            write_atomic(&summary, &result.to_json())?;
            let slope = result
                .slope
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|| "n/a".into());
            Ok(format!(
                "experiment {}: slope {} (expected {:.4} +/- {}), {} -> {}",
                result.target,
                slope,
                result.expected_slope,
                result.tolerance,
                if result.pass { "pass" } else { "FAIL" },
                cfg.output.display()
            ))
        }
    }
}

/// Entry point shared by the binary: parse, run, report. Returns the exit status.
pub fn main_with_args(args: &[String]) -> i32 {
    let outcome = parse_args(args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn input_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.input
        .as_deref()
        .ok_or_else(|| Error::invalid("input", "missing required key"))
}

struct Prepared {
    sample: Sample,
    estimator: LocalQuantileEstimator,
    xs: Vec<Vec<f64>>,
    scheme: QdScheme,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let sample = ingest_csv(input_path(cfg)?)?;
    let d = sample.dim();
    let basis = BasisSpec::new(d, cfg.order).map_err(|e| Error::invalid("p", e.to_string()))?;
    let kernel = KernelSpec::new(cfg.kernel, d)?;
    let mut estimator = LocalQuantileEstimator::new(basis, kernel)?;
    let max_h = cfg.hs.iter().cloned().fold(0.0, f64::max);
    estimator.margin = Some(cfg.margin.unwrap_or(max_h));
    Ok(Prepared {
        xs: cfg.xs.resolve(d)?,
        scheme: make_scheme(cfg.qd_scheme.clone(), cfg.qd_order)?,
        sample,
        estimator,
    })
}

/// Evaluation cells in output order: `alpha`, then `h`, then `x`.
fn cells(cfg: &RunConfig, xs: &[Vec<f64>]) -> Vec<(f64, f64, Vec<f64>)> {
    let mut out = Vec::new();
    for &a in &cfg.alphas {
        for &h in &cfg.hs {
            for x in xs {
                out.push((a, h, x.clone()));
            }
        }
    }
    out
}

fn clean_note(e: &Error) -> String {
    e.to_string().replace([',', '\n', '"'], ";")
}

fn x_header(d: usize) -> String {
    (1..=d).map(|k| format!(",x{k}")).collect()
}

fn x_fields(x: &[f64]) -> String {
    x.iter().map(|v| format!(",{}", format_number(*v))).collect()
}

struct QdCell {
    h_q: f64,
    q_hat: Result<f64>,
    scheme: String,
    switched: bool,
}

fn qd_at(p: &Prepared, cfg: &RunConfig, alpha: f64, h: f64, x: &[f64]) -> QdCell {
    let h_q = cfg.h_q.unwrap_or(cfg.hq_ratio * h);
    match scheme_for_level(&p.scheme, alpha, h_q) {
        Ok((scheme, switched)) => QdCell {
            h_q,
            q_hat: estimate_qd(&p.estimator, &p.sample, alpha, x, h, h_q, &scheme).map(|e| e.q_hat),
            scheme: scheme.kind().to_string(),
            switched,
        },
        Err(e) => QdCell {
            h_q,
            q_hat: Err(e),
            scheme: p.scheme.kind().to_string(),
            switched: false,
        },
    }
}

fn run_fit(cfg: &RunConfig) -> Result<String> {
    use rayon::prelude::*;
    let p = prepare(cfg)?;
    let basis = &p.estimator.basis;
    let d = basis.dim();
    let grid = p.estimator.fit_grid(&p.sample, &cfg.alphas, &cfg.hs, &p.xs)?;
    let plugin: Vec<Option<Result<Vec<f64>>>> = grid
        .par_iter()
        .map(|cell| {
            if !cfg.plugin_beta {
                return None;
            }
            let fit = match &cell.fit {
                Ok(f) => f,
                Err(e) => return Some(Err(e.clone())),
            };
            let t = &cell.theta;
            let beta = qd_at(&p, cfg, t.alpha, t.h, &t.x).q_hat.and_then(|q| {
                plugin_leading_term(&p.sample, fit, basis, &p.estimator.kernel, 1.0 / q)
            });
            Some(beta)
        })
        .collect();

    let mut out = String::new();
    writeln!(out, "# basis ordering: {}", basis.ordering_header()).unwrap();
    if cfg.plugin_beta {
        writeln!(
            out,
            "# beta_plugin columns: plug-in, no oracle (f(Q|x) replaced by 1/q_hat)"
        )
        .unwrap();
    }
    let names: Vec<String> = basis.indices().iter().map(MultiIndex::column_name).collect();
    let mut header = format!("alpha,h{}", x_header(d));
    for n in &names {
        header.push_str(&format!(",{n}"));
    }
    header.push_str(",status,active_points,boundary");
    if cfg.plugin_beta {
        for n in &names {
            header.push_str(&format!(",beta_plugin_{n}"));
        }
    }
    header.push_str(",note");
    writeln!(out, "{header}").unwrap();

    let mut failed = 0;
    for (cell, beta) in grid.iter().zip(&plugin) {
        let t = &cell.theta;
        let mut line = format!("{},{}{}", format_number(t.alpha), format_number(t.h), x_fields(&t.x));
        let mut note = String::new();
        match &cell.fit {
            Ok(fit) => {
                let fit: &LocalFit = fit;
                for b in &fit.coeffs_natural {
                    line.push_str(&format!(",{}", format_number(*b)));
                }
                line.push_str(&format!(
                    ",{},{},{}",
                    fit.status().name(),
                    fit.solver.active_points,
                    fit.boundary
                ));
            }
            Err(e) => {
                failed += 1;
                line.push_str(&",".repeat(names.len()));
                line.push_str(",failed,0,");
                note = clean_note(e);
            }
        }
        if let Some(beta) = beta {
            match beta {
                Ok(b) => b.iter().for_each(|v| line.push_str(&format!(",{}", format_number(*v)))),
                Err(e) => {
                    line.push_str(&",".repeat(names.len()));
                    if note.is_empty() {
                        note = format!("plug-in beta unavailable: {}", clean_note(e));
                    }
                }
            }
        }
        line.push_str(&format!(",{note}"));
        writeln!(out, "{line}").unwrap();
    }
    write_atomic(&cfg.output, &out)?;
    Ok(format!(
        "fit: {} cells, {} ok, {} failed -> {}",
        grid.len(),
        grid.len() - failed,
        failed,
        cfg.output.display()
    ))
}

fn run_qdensity(cfg: &RunConfig) -> Result<String> {
    use rayon::prelude::*;
    let p = prepare(cfg)?;
    let d = p.sample.dim();
    let cells = cells(cfg, &p.xs);
    let rows: Vec<String> = cells
        .par_iter()
        .map(|(alpha, h, x)| {
            let qd = qd_at(&p, cfg, *alpha, *h, x);
            let mut line = format!(
                "{},{},{}{}",
                format_number(*alpha),
                format_number(*h),
                format_number(qd.h_q),
                x_fields(x)
            );
            let (q_field, status, mut note) = match &qd.q_hat {
                Ok(q) => (format_number(*q), "ok", String::new()),
                Err(e) => (String::new(), "failed", clean_note(e)),
            };
            line.push_str(&format!(",{q_field},{},{}", qd.scheme, qd.switched));
            if cfg.avar {
                let fx = kernel_density(&p.sample, &p.estimator.kernel, x, *h);
                match (&qd.q_hat, fx) {
                    (Ok(q), Ok(fx)) if fx > 0.0 => {
                        let v = asymptotic_variance_proportional(*alpha, p.sample.n(), *h, d, *q, fx);
                        line.push_str(&format!(",{},{}", format_number(fx), format_number(v)));
                    }
                    (_, Ok(fx)) => line.push_str(&format!(",{},", format_number(fx))),
                    (_, Err(e)) => {
                        line.push_str(",,");
                        if note.is_empty() {
                            note = clean_note(&e);
                        }
                    }
                }
            }
            line.push_str(&format!(",{status},{note}"));
            line
        })
        .collect();
    let failed = rows.iter().filter(|r| r.contains(",failed,")).count();
    let mut out = format!("alpha,h,h_q{},q_hat,scheme,switched", x_header(d));
    if cfg.avar {
        out.push_str(",fx_hat,avar_prop");
    }
    out.push_str(",status,note\n");
    for r in &rows {
        out.push_str(r);
        out.push('\n');
    }
    write_atomic(&cfg.output, &out)?;
    Ok(format!(
        "qdensity: {} cells, {} ok, {} failed -> {}",
        rows.len(),
        rows.len() - failed,
        failed,
        cfg.output.display()
    ))
}

fn run_auction(cfg: &RunConfig) -> Result<String> {
    use rayon::prelude::*;
    let p = prepare(cfg)?;
    let d = p.sample.dim();
    let cells = cells(cfg, &p.xs);
    let rows: Vec<(String, bool, bool)> = cells
        .par_iter()
        .map(|(alpha, h, x)| {
            let qd = qd_at(&p, cfg, *alpha, *h, x);
            let big_q = EvalPoint::new(*alpha, *h, x.clone())
                .and_then(|t| p.estimator.fit_at(&p.sample, &t))
                .map(|f| f.quantile());
            let mut line = format!(
                "{},{},{}{}",
                format_number(*alpha),
                format_number(*h),
                format_number(qd.h_q),
                x_fields(x)
            );
            let outcome = big_q.and_then(|bq| {
                let q = qd.q_hat.clone()?;
                let v = auction_private_value(*alpha, q, bq, cfg.bidders)?;
                Ok((bq, q, v))
            });
            match outcome {
                Ok((bq, q, v)) => {
                    let negative = q < 0.0;
                    line.push_str(&format!(
                        ",{},{},{},{},{},{},ok,",
                        format_number(bq),
                        format_number(q),
                        format_number(v),
                        qd.scheme,
                        qd.switched,
                        negative
                    ));
                    (line, true, negative)
                }
                Err(e) => {
                    line.push_str(&format!(",,,,{},{},false,failed,{}", qd.scheme, qd.switched, clean_note(&e)));
                    (line, false, false)
                }
            }
        })
        .collect();
    let mut out = format!(
        "# bidders: {}\nalpha,h,h_q{},bid_quantile,bid_qdensity,private_value,scheme,switched,negative_qdensity,status,note\n",
        cfg.bidders,
        x_header(d)
    );
    for (r, _, _) in &rows {
        out.push_str(r);
        out.push('\n');
    }
    write_atomic(&cfg.output, &out)?;
    let ok = rows.iter().filter(|r| r.1).count();
    let negative = rows.iter().filter(|r| r.2).count();
    Ok(format!(
        "auction: {} cells, {} ok, {} with negative q_hat -> {}",
        rows.len(),
        ok,
        negative,
        cfg.output.display()
    ))
}

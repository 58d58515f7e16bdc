//! `wwkde` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, configuration or contract error,
//! 2 when an experiment lands outside its acceptance window or a
//! calibration is falsified.

mod manifest;
mod svg;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use wwkde::simulate::{
    run_calibration, run_rate_experiment, run_tail_experiment, ExperimentConfig, RateReport, RunOptions, TailReport,
};
use wwkde::{
    clip_and_renormalize, pr_batch, validate_kernel, ww_batch, BandwidthSchedule, EvaluationGrid, KernelConfig,
    KernelFamily, QuadratureSettings, TailModel,
};

use manifest::Recorder;
use svg::{Plot, Series, Style};
use table::Table;

#[derive(Parser)]
#[command(name = "wwkde", version, about = "Recursive kernel density estimation and tail bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check normalization, moments and symmetry of a kernel.
    ValidateKernel(ValidateArgs),
    /// Evaluate the recursive estimator on samples read from CSV.
    Estimate(EstimateArgs),
    /// Exponential confidence radius for a given sample size.
    Ci(CiArgs),
    /// Monte Carlo convergence-rate experiment.
    RateExperiment(ExperimentArgs),
    /// Monte Carlo tail-probability experiment.
    TailExperiment(ExperimentArgs),
    /// Tail experiment plus calibration of the bound constant.
    Calibrate(ExperimentArgs),
    /// Render a CSV produced by this tool as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// gaussian, epanechnikov or orthogonal
    #[arg(long = "kernel", default_value = "gaussian")]
    family: String,
    #[arg(long)]
    order: Option<usize>,
    /// Truncation radius for unbounded kernels.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    /// Integration radius for unbounded kernels.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also report moments up to this degree.
    #[arg(long)]
    requested_order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Override the bandwidth decay exponent.
    #[arg(long)]
    exponent: Option<f64>,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Single evaluation point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["lo", "hi"])]
    x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "hi")]
    lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "lo")]
    hi: Option<Vec<f64>>,
    #[arg(long, default_value_t = 101)]
    points_per_axis: usize,
    /// Add a Parzen-Rosenblatt column using the last bandwidth h_n.
    #[arg(long)]
    pr: bool,
    /// Clip negative values and renormalize.
    #[arg(long)]
    clip: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CiArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    c4: f64,
    #[arg(long, default_value_t = 0.0)]
    c3: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to WWKDE_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overlay a reference line of this log-log slope.
    #[arg(long, allow_hyphen_values = true)]
    slope: Option<f64>,
    /// Write the parsed table back out as CSV.
    #[arg(long)]
    data_out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Falsified(String),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

impl From<wwkde::Error> for Failure {
    fn from(e: wwkde::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::ValidateKernel(a) => validate(a),
        Command::Estimate(a) => estimate(a),
        Command::Ci(a) => ci(a),
        Command::RateExperiment(a) => rate(a),
        Command::TailExperiment(a) => tail(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Falsified(msg)) => {
            eprintln!("falsified: {msg}");
            ExitCode::from(2)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes to `out` with a manifest next to it, or prints to stdout.
fn emit_single(command: &str, canonical: &str, out: Option<&Path>, body: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            let mut rec = Recorder::new(command, canonical, None);
            rec.write(path, body)?;
            rec.finish(&sibling_manifest(path))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn validate(a: ValidateArgs) -> Outcome {
    let family: KernelFamily = a.family.parse()?;
    let kernel = KernelConfig {
        family,
        dim: a.dim,
        order: a.order,
        truncation_radius: None,
    }
    .build()?;
    let settings = QuadratureSettings {
        nodes_per_axis: a.nodes,
        truncation_radius: a.radius.or(QuadratureSettings::default().truncation_radius),
        tolerance: a.tol,
        requested_order: a.requested_order,
        ..Default::default()
    };
    let report = validate_kernel(&kernel, &settings)?;
    let canonical = serde_json::json!({
        "family": a.family, "dim": a.dim, "order": a.order, "nodes": a.nodes, "radius": a.radius,
        "tol": a.tol, "requested_order": a.requested_order,
    })
    .to_string();
    emit_single("validate-kernel", &canonical, a.out.as_deref(), &to_json(&report))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("kernel failed validation: {:?}", report.checks)))
    }
}

fn estimate(a: EstimateArgs) -> Outcome {
    let input = Table::read(&a.samples)?;
    let d = input.header.len();
    let samples = input.rows.clone();
    let family: KernelFamily = a.kernel.family.parse()?;
    let kernel = KernelConfig {
        family,
        dim: d,
        order: a.kernel.order,
        truncation_radius: a.kernel.radius,
    }
    .build()?;
    let mut schedule = BandwidthSchedule::optimal(a.beta, d);
    if let Some(c2) = a.c2 {
        schedule = schedule.with_c2(c2);
    }
    if let Some(g) = a.gamma {
        schedule = schedule.with_log_gamma(g);
    }
    if let Some(e) = a.exponent {
        schedule = schedule.with_exponent(e);
    }
    schedule.validate()?;
    let grid = match (&a.x0, &a.lo, &a.hi) {
        (Some(x0), _, _) => EvaluationGrid::dirac(x0)?,
        (None, Some(lo), Some(hi)) => EvaluationGrid::uniform_box(lo, hi, a.points_per_axis, Default::default())?,
        _ => return Err(Failure::Usage("give either --x0 or --lo and --hi".into())),
    };
    let mut ww = ww_batch(&samples, &grid, &kernel, &schedule)?;
    let mut pr = if a.pr {
        let h = schedule.at(samples.len().max(1) as u64)?;
        Some(pr_batch(&samples, &grid, &kernel, h)?)
    } else {
        None
    };
    if a.clip {
        ww = clip_and_renormalize(&ww, grid.weights());
        pr = pr.map(|v| clip_and_renormalize(&v, grid.weights()));
    }
    let mut header: Vec<String> = (1..=d).map(|j| format!("x_{j}")).collect();
    header.push("f_ww".into());
    if pr.is_some() {
        header.push("f_pr".into());
    }
    let rows = grid
        .points()
        .enumerate()
        .map(|(i, x)| {
            let mut r = x.to_vec();
            r.push(ww[i]);
            if let Some(p) = &pr {
                r.push(p[i]);
            }
            r
        })
        .collect();
    let out = Table { header, rows }.to_csv();
    let canonical = serde_json::json!({
        "samples": input.to_csv(), "beta": a.beta, "schedule": schedule, "kernel": a.kernel.family,
        "order": a.kernel.order, "radius": a.kernel.radius, "x0": a.x0, "lo": a.lo, "hi": a.hi,
        "points_per_axis": a.points_per_axis, "pr": a.pr, "clip": a.clip,
    })
    .to_string();
    emit_single("estimate", &canonical, a.out.as_deref(), &out)?;
    Ok(())
}

#[derive(Serialize)]
struct CiOutput {
    n: u64,
    beta: f64,
    d: usize,
    alpha: f64,
    c4: f64,
    c3: f64,
    normalizer: f64,
    u_star: f64,
    radius: f64,
    half_width: f64,
    extrapolated: bool,
}

fn ci(a: CiArgs) -> Outcome {
    if !(a.c4 > 0.0 && a.c4.is_finite()) {
        return Err(Failure::Usage("--c4 must be positive".into()));
    }
    let tm = TailModel::new(a.beta, a.d)?.with_c_upper(a.c4);
    let r = tm.confidence_radius(a.n, a.alpha, a.c3)?;
    let out = CiOutput {
        n: a.n,
        beta: a.beta,
        d: a.d,
        alpha: a.alpha,
        c4: a.c4,
        c3: a.c3,
        normalizer: r.normalizer,
        u_star: r.u_star,
        radius: r.radius,
        half_width: r.half_width,
        extrapolated: r.extrapolated,
    };
    let canonical = serde_json::json!({
        "n": a.n, "beta": a.beta, "d": a.d, "alpha": a.alpha, "c4": a.c4, "c3": a.c3,
    })
    .to_string();
    emit_single("ci", &canonical, a.out.as_deref(), &to_json(&out))?;
    Ok(())
}

struct Experiment {
    cfg: ExperimentConfig,
    opts: RunOptions,
    rec: Recorder,
    dir: PathBuf,
    svg: bool,
}

fn start(a: &ExperimentArgs, command: &str) -> Result<Experiment, Failure> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| format!("cannot read {}: {e}", a.config.display()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let opts = match a.workers {
        Some(0) => return Err(Failure::Usage("--workers must be positive".into())),
        Some(w) => RunOptions::with_workers(w),
        None => RunOptions::from_env(),
    };
    std::fs::create_dir_all(&a.out).map_err(|e| format!("cannot create {}: {e}", a.out.display()))?;
    let rec = Recorder::new(command, &cfg.to_canonical_json(), Some(cfg.base_seed));
    Ok(Experiment {
        cfg,
        opts,
        rec,
        dir: a.out.clone(),
        svg: !a.no_svg,
    })
}

impl Experiment {
    fn write(&mut self, name: &str, body: &str) -> Result<(), String> {
        let path = self.dir.join(name);
        self.rec.write(&path, body)
    }

    fn finish(self) -> Result<(), String> {
        let path = self.dir.join("manifest.json");
        self.rec.finish(&path)
    }
}

fn rate(a: ExperimentArgs) -> Outcome {
    let mut ex = start(&a, "rate-experiment")?;
    let report = run_rate_experiment(&ex.cfg, &ex.opts)?;
    ex.write("report.json", &to_json(&report))?;
    ex.write("rate.csv", &report.to_csv())?;
    if ex.svg {
        ex.write("rate.svg", &rate_plot(&report).render())?;
    }
    ex.finish()?;
    if report.within_window {
        Ok(())
    } else {
        Err(Failure::Falsified(format!(
            "fitted slope {:.4} outside {:.4} +/- {}",
            report.fit.slope, report.theoretical_slope, report.slope_tolerance
        )))
    }
}

fn write_tail(ex: &mut Experiment, report: &TailReport) -> Result<(), String> {
    for c in &report.curves {
        let n = c.n.unwrap_or(0);
        ex.write(&format!("tail_n{n}.csv"), &c.to_csv())?;
    }
    if ex.svg {
        ex.write("tail.svg", &tail_plot(report).render())?;
    }
    Ok(())
}

/// The far-tail check uses the largest `n`.
fn tail_verdict(cfg: &ExperimentConfig, report: &TailReport) -> Outcome {
    let n = *cfg.n_values.last().expect("validated nonempty");
    let curve = report
        .curve(n)
        .ok_or_else(|| Failure::Falsified(format!("no tail curve for n = {n}")))?;
    match (&curve.fit, curve.within_window) {
        (Some(_), true) => Ok(()),
        (Some(f), false) => Err(Failure::Falsified(format!(
            "n = {n}: tail exponent {:.3} outside {:.3} +/- {}",
            f.exponent, report.theoretical_exponent, report.exponent_tolerance
        ))),
        (None, _) => Err(Failure::Falsified(format!("n = {n}: too few exceedances to fit a tail exponent"))),
    }
}

fn tail(a: ExperimentArgs) -> Outcome {
    let mut ex = start(&a, "tail-experiment")?;
    let report = run_tail_experiment(&ex.cfg, &ex.opts)?;
    ex.write("report.json", &to_json(&report))?;
    write_tail(&mut ex, &report)?;
    let cfg = ex.cfg.clone();
    ex.finish()?;
    tail_verdict(&cfg, &report)
}

fn calibrate(a: ExperimentArgs) -> Outcome {
    let mut ex = start(&a, "calibrate")?;
    let report = run_calibration(&ex.cfg, &ex.opts)?;
    ex.write("report.json", &to_json(&report))?;
    write_tail(&mut ex, &report.tail)?;
    ex.finish()?;
    if report.falsified || !report.c4.is_finite() {
        Err(Failure::Falsified(format!("no constant C4 dominates the empirical tail (c4 = {})", report.c4)))
    } else {
        Ok(())
    }
}

fn rate_plot(report: &RateReport) -> Plot {
    let empirical: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.n as f64, r.rmse)).collect();
    let mut series = vec![Series {
        label: "rmse".into(),
        style: Style::Points,
        color: "black",
        points: empirical.clone(),
    }];
    if let Some(&(n0, e0)) = empirical.first() {
        let n1 = empirical.last().map(|p| p.0).unwrap_or(n0);
        series.push(reference_line(n0, e0, n1, report.theoretical_slope));
    }
    Plot {
        title: format!("error rate, beta = {}, d = {}", report.beta, report.dim),
        x_label: "n".into(),
        y_label: "rmse".into(),
        log_x: true,
        log_y: true,
        series,
    }
}

fn reference_line(x0: f64, y0: f64, x1: f64, slope: f64) -> Series {
    Series {
        label: format!("slope {slope:.4}"),
        style: Style::Line,
        color: "crimson",
        points: vec![(x0, y0), (x1, y0 * (x1 / x0).powf(slope))],
    }
}

const PALETTE: [&str; 5] = ["black", "steelblue", "darkorange", "seagreen", "purple"];

fn tail_plot(report: &TailReport) -> Plot {
    let series = report
        .curves
        .iter()
        .enumerate()
        .map(|(i, c)| Series {
            label: format!("n = {}", c.n.unwrap_or(0)),
            style: Style::Points,
            color: PALETTE[i % PALETTE.len()],
            points: c.u.iter().copied().zip(c.p_hat.iter().copied()).collect(),
        })
        .collect();
    Plot {
        title: format!("tail probabilities, beta = {}, d = {}", report.beta, report.dim),
        x_label: "u".into(),
        y_label: "P(B_n |f_n - f| > u)".into(),
        log_x: true,
        log_y: true,
        series,
    }
}

fn plot(a: PlotArgs) -> Outcome {
    let t = Table::read(&a.input)?;
    let col = |name: &str| t.column(name);
    let pairs = |x: Vec<f64>, y: Vec<f64>| x.into_iter().zip(y).collect::<Vec<_>>();
    let mut plot = if let (Some(n), Some(e)) = (col("n"), col("rmse").or_else(|| col("mean_error"))) {
        Plot {
            title: "error rate".into(),
            x_label: "n".into(),
            y_label: "error".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "empirical".into(),
                style: Style::Points,
                color: "black",
                points: pairs(n, e),
            }],
        }
    } else if let (Some(u), Some(p)) = (col("u"), col("p_hat")) {
        Plot {
            title: "tail probabilities".into(),
            x_label: "u".into(),
            y_label: "p_hat".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: "empirical".into(),
                style: Style::Points,
                color: "black",
                points: pairs(u, p),
            }],
        }
    } else if let (Some(x), Some(f)) = (col("x_1"), col("f_ww")) {
        let mut series = vec![Series {
            label: "f_ww".into(),
            style: Style::Line,
            color: "black",
            points: pairs(x.clone(), f),
        }];
        if let Some(p) = col("f_pr") {
            series.push(Series {
                label: "f_pr".into(),
                style: Style::Line,
                color: "steelblue",
                points: pairs(x, p),
            });
        }
        Plot {
            title: "density estimate".into(),
            x_label: "x_1".into(),
            y_label: "f".into(),
            log_x: false,
            log_y: false,
            series,
        }
    } else {
        return Err(Failure::Usage(format!(
            "{}: expected columns n,rmse or u,p_hat or x_1,f_ww; found {}",
            a.input.display(),
            t.header.join(",")
        )));
    };
    if let Some(slope) = a.slope {
        let pts = &plot.series[0].points;
        if let (Some(&(x0, y0)), Some(&(x1, _))) = (pts.first(), pts.last()) {
            plot.series.push(reference_line(x0, y0, x1, slope));
        }
    }
    let canonical = t.to_csv();
    let mut rec = Recorder::new("plot", &canonical, None);
    rec.write(&a.out, &plot.render())?;
    if let Some(p) = &a.data_out {
        rec.write(p, &canonical)?;
    }
    rec.finish(&sibling_manifest(&a.out))?;
    Ok(())
}

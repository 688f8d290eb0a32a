//! Command-line driver for `hullconc`: loads scenario files, runs checks and
//! writes JSON or CSV reports.
//!
//! Exit codes: 0 when every selected check passes, 1 when an inequality check
//! fails beyond tolerance, 2 on usage or configuration errors.

pub mod report;
pub mod scenario;

#[cfg(test)]
mod end_to_end;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hullconc::g_transform::GammaSpec;
use hullconc::hull::{distance_d_solution, dual_weight_certificate, f_psi_solution, DEFAULT_TOL};
use hullconc::product_space::Point;
use hullconc::psi::{psi_c, psi_c_closed, psi_c_series, CParam, PsiSpec};
use hullconc::verify::{
    check_fpsic_bound, check_tail_bound, random_scenario, verify, CheckKind, GeneratorConfig, Scenario,
};

use report::{format_f64, LabeledReport, Num};
use scenario::{load_scenario, LoadedScenario};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hullconc", version, about = "Convex-hull concentration checks on finite product spaces")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the selected checks on one or more scenarios.
    Verify(VerifyArgs),
    /// Print D(x, A), F_ψ(x, A) and the dual certificate for one point.
    Distance(DistanceArgs),
    /// Tabulate ψ_c: closed form, series, lower bound and second derivative.
    PsiTable(PsiTableArgs),
    /// Tail bound over a t grid, or the F_{ψ_c} bound over a c grid, as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistanceFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Scenario file; repeatable. With --suite, the first file is a template
    /// for ψ, γ, grids, checks and Monte Carlo settings.
    #[arg(long, num_args = 1)]
    scenario: Vec<PathBuf>,
    /// Number of seeded random scenarios to generate.
    #[arg(long)]
    suite: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed, and the base seed for --suite.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Enumeration cap override.
    #[arg(long)]
    cap: Option<u64>,
    /// Comma-separated check names.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated symbols, e.g. "0,1,2".
    #[arg(long)]
    x: String,
    #[arg(long, value_enum, default_value = "json")]
    format: DistanceFormat,
}

#[derive(Debug, Args)]
struct PsiTableArgs {
    /// Comma-separated values of c.
    #[arg(long, value_delimiter = ',', required = true)]
    c: Vec<f64>,
    /// Rows per c: θ = i/steps for i = 0, …, steps − 1.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// `t=start:stop:step`, `c=start:stop:step`, or a comma list such as `t=0,1,2`.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// What a command produced: its pass flag and the text bound for stdout.
struct Finished {
    pass: bool,
    stdout: String,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_PASS
            };
        }
    };
    let outcome = match cli.command {
        Command::Verify(a) => with_jobs(a.jobs, || cmd_verify(&a)),
        Command::Distance(a) => cmd_distance(&a),
        Command::PsiTable(a) => cmd_psi_table(&a),
        Command::Sweep(a) => with_jobs(a.jobs, || cmd_sweep(&a)),
    };
    match outcome {
        Ok(done) => {
            if out.write_all(done.stdout.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_USAGE;
            }
            if done.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn with_jobs<F>(jobs: Option<usize>, f: F) -> anyhow::Result<Finished>
where
    F: FnOnce() -> anyhow::Result<Finished> + Send,
{
    match jobs {
        None => f(),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build()?.install(f),
    }
}

/// Writes `text` to `out` when given; otherwise hands it back for stdout.
fn emit(out: Option<&Path>, text: String) -> anyhow::Result<String> {
    match out {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn parse_checks(names: &[String]) -> anyhow::Result<Vec<CheckKind>> {
    names.iter().map(|n| Ok(n.trim().parse::<CheckKind>()?)).collect()
}

/// Check selection: command line, then the file, then every exact check plus
/// Monte Carlo when the file configures it.
fn select_checks(cli: Option<&[String]>, loaded: &LoadedScenario) -> anyhow::Result<Vec<CheckKind>> {
    let selected = match (cli, &loaded.checks) {
        (Some(names), _) => parse_checks(names)?,
        (None, Some(checks)) => checks.clone(),
        (None, None) => {
            let mut all = CheckKind::EXACT.to_vec();
            if loaded.mc_samples.is_some() {
                all.push(CheckKind::MonteCarlo);
            }
            all
        }
    };
    if selected.is_empty() {
        bail!("no checks selected");
    }
    if selected.contains(&CheckKind::MonteCarlo) {
        if loaded.mc_samples.is_none() {
            bail!("monte_carlo selected but the scenario has no \"mc\" block");
        }
        if loaded.scenario.mc.is_none() {
            bail!("monte_carlo selected but no seed given (set mc.seed or --seed)");
        }
    }
    Ok(selected)
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<Finished> {
    if args.scenario.is_empty() && args.suite.is_none() {
        bail!("verify needs --scenario or --suite");
    }
    let mut inputs: Vec<(String, LoadedScenario)> = vec![];
    let mut files = vec![];
    for path in &args.scenario {
        let mut loaded = load_scenario(path)?;
        loaded.resolve_mc(args.seed);
        files.push((path.display().to_string(), loaded));
    }
    if let Some(count) = args.suite {
        let base = args.seed.unwrap_or(0);
        let template = files.first().map(|(_, l)| l.clone());
        let (psi, gamma) =
            template.as_ref().map_or((PsiSpec::Quadratic, GammaSpec::LogInv), |t| (t.scenario.psi, t.scenario.gamma));
        for i in 0..count as u64 {
            let seed = base.wrapping_add(i);
            let mut scenario = random_scenario(seed, &GeneratorConfig::default(), psi, gamma)?;
            let (checks, mc_samples, mc_seed) = match &template {
                Some(t) => {
                    scenario.t_grid = t.scenario.t_grid.clone();
                    scenario.c_values = t.scenario.c_values.clone();
                    scenario.tolerances = t.scenario.tolerances;
                    scenario.mc = t.scenario.mc;
                    (t.checks.clone(), t.mc_samples, t.mc_seed)
                }
                None => (None, None, None),
            };
            inputs.push((format!("suite:{seed}"), LoadedScenario { scenario, checks, mc_samples, mc_seed }));
        }
    } else {
        inputs = files;
    }

    let mut reports = vec![];
    for (label, mut loaded) in inputs {
        if let Some(cap) = args.cap {
            loaded.scenario.enumeration_cap = cap;
        }
        let checks = select_checks(args.checks.as_deref(), &loaded).with_context(|| label.clone())?;
        let report = verify(&loaded.scenario, &checks).with_context(|| label.clone())?;
        reports.push(LabeledReport { label, report });
    }
    let text = match args.format {
        Format::Json => report::to_json(&reports)?,
        Format::Csv => report::to_csv(&reports)?,
    };
    let stdout = emit(args.out.as_deref(), text)?;
    Ok(Finished { pass: reports.iter().all(|r| r.report.pass), stdout })
}

fn parse_point(text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',').map(|s| s.trim().parse::<usize>().with_context(|| format!("bad symbol '{s}' in --x"))).collect()
}

fn cmd_distance(args: &DistanceArgs) -> anyhow::Result<Finished> {
    let loaded = load_scenario(&args.scenario)?;
    let s = &loaded.scenario;
    let x = s.alphabet().point(parse_point(&args.x)?)?;
    let tol = DEFAULT_TOL;
    let d_sol = distance_d_solution(&x, &s.set, tol)?;
    let certificate = match dual_weight_certificate(&x, &s.set, &d_sol) {
        Ok((w, d_w)) => Some((w, d_w)),
        Err(hullconc::Error::CertificateUndefined) => None,
        Err(e) => return Err(e.into()),
    };
    let mut psis = vec![s.psi];
    for &c in &s.c_values {
        let p = psi_c(c)?;
        if !psis.contains(&p) {
            psis.push(p);
        }
    }
    let d = d_sol.objective.sqrt();
    let mut f_rows = vec![];
    for psi in &psis {
        let sol = f_psi_solution(&x, &s.set, psi, tol)?;
        f_rows.push((psi.label(), sol.objective, sol.lower_bound(), sol.gap));
    }

    let text = match args.format {
        DistanceFormat::Json => distance_json(&x, d, &d_sol, certificate.as_ref(), &f_rows)?,
        DistanceFormat::Text => {
            let mut t = format!("x = {x}\nD = {}\nsolver_gap = {}\n", format_f64(d), format_f64(d_sol.gap));
            match &certificate {
                Some((w, d_w)) => {
                    let ws: Vec<String> = w.as_slice().iter().map(|v| format_f64(*v)).collect();
                    t += &format!("certificate_weights = [{}]\n", ws.join(", "));
                    t += &format!("d_w = {}\nduality_gap = {}\n", format_f64(*d_w), format_f64(d - d_w));
                }
                None => t += "certificate = undefined (D = 0)\n",
            }
            for (label, value, _, gap) in &f_rows {
                t += &format!("F[{label}] = {} (gap {})\n", format_f64(*value), format_f64(*gap));
            }
            t
        }
    };
    Ok(Finished { pass: true, stdout: text })
}

fn distance_json(
    x: &Point,
    d: f64,
    d_sol: &hullconc::hull::HullSolution,
    certificate: Option<&(hullconc::product_space::WeightVector, f64)>,
    f_rows: &[(String, f64, f64, f64)],
) -> anyhow::Result<String> {
    #[derive(serde::Serialize)]
    struct Cert {
        weights: Vec<Num>,
        d_w: Num,
        duality_gap: Num,
    }
    #[derive(serde::Serialize)]
    struct FRow<'a> {
        psi: &'a str,
        value: Num,
        lower: Num,
        gap: Num,
    }
    #[derive(serde::Serialize)]
    struct Out<'a> {
        x: &'a [usize],
        d: Num,
        d_lower: Num,
        solver_gap: Num,
        xi: Vec<Num>,
        certificate: Option<Cert>,
        f_psi: Vec<FRow<'a>>,
    }
    let out = Out {
        x: x.symbols(),
        d: Num(d),
        d_lower: Num(d_sol.lower_bound().sqrt()),
        solver_gap: Num(d_sol.gap),
        xi: d_sol.xi.iter().map(|v| Num(*v)).collect(),
        certificate: certificate.map(|(w, d_w)| Cert {
            weights: w.as_slice().iter().map(|v| Num(*v)).collect(),
            d_w: Num(*d_w),
            duality_gap: Num(d - d_w),
        }),
        f_psi: f_rows
            .iter()
            .map(|(label, value, lower, gap)| FRow {
                psi: label,
                value: Num(*value),
                lower: Num(*lower),
                gap: Num(*gap),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    Ok(text)
}

/// Step for the central second difference of `ψ_c`.
const FD_STEP: f64 = 1e-4;

fn cmd_psi_table(args: &PsiTableArgs) -> anyhow::Result<Finished> {
    if args.steps == 0 {
        bail!("--steps must be positive");
    }
    let cs: Vec<CParam> = args.c.iter().map(|&c| CParam::new(c)).collect::<Result<_, _>>()?;
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "theta",
        "c",
        "psi_closed",
        "psi_series",
        "lower_bound",
        "second_deriv_formula",
        "second_deriv_fd",
    ])?;
    for c in cs {
        for i in 0..args.steps {
            let theta = i as f64 / args.steps as f64;
            let closed = psi_c_closed(theta, c);
            let series = psi_c_series(theta, c, 1e-17)?;
            let bound = theta * theta / (2.0 + 2.0 * c.value());
            // ψ_c''(1−θ) = 1/(θ² + cθ), against a central difference at u = 1−θ.
            let formula = 1.0 / (theta * theta + c.value() * theta);
            let u = 1.0 - theta;
            let fd = if u - FD_STEP >= 0.0 && u + FD_STEP <= 1.0 {
                (psi_c_closed(u + FD_STEP, c) - 2.0 * psi_c_closed(u, c) + psi_c_closed(u - FD_STEP, c))
                    / (FD_STEP * FD_STEP)
            } else {
                f64::NAN
            };
            w.write_record([
                format_f64(theta),
                format_f64(c.value()),
                format_f64(closed),
                format_f64(series),
                format_f64(bound),
                format_f64(formula),
                format_f64(fd),
            ])?;
        }
    }
    let text = String::from_utf8(w.into_inner()?)?;
    let stdout = emit(args.out.as_deref(), text)?;
    Ok(Finished { pass: true, stdout })
}

/// Parses `name=start:stop:step` (inclusive) or `name=v1,v2,...`.
pub fn parse_grid(spec: &str) -> anyhow::Result<(String, Vec<f64>)> {
    let (name, body) = spec.split_once('=').context("grid must look like t=0:3:0.25")?;
    let name = name.trim().to_string();
    let values: Vec<f64> = if body.contains(':') {
        let parts: Vec<f64> =
            body.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().context("bad grid number")?;
        let [start, stop, step] = parts[..] else {
            bail!("range grid needs start:stop:step");
        };
        if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
            bail!("range grid needs finite start ≤ stop and step > 0");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + i as f64 * step).collect()
    } else {
        body.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().context("bad grid number")?
    };
    if values.is_empty() {
        bail!("empty grid");
    }
    Ok((name, values))
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<Finished> {
    let loaded = load_scenario(&args.scenario)?;
    let (name, values) = parse_grid(&args.grid)?;
    let rows = match name.as_str() {
        "t" => {
            let s = Scenario { t_grid: values, ..loaded.scenario };
            check_tail_bound(&s)?
        }
        "c" => values.iter().map(|&c| check_fpsic_bound(&loaded.scenario, c)).collect::<Result<Vec<_>, _>>()?,
        other => bail!("unknown sweep parameter '{other}' (expected t or c)"),
    };
    let stdout = emit(args.out.as_deref(), report::sweep_csv(&rows)?)?;
    Ok(Finished { pass: rows.iter().all(|r| r.pass), stdout })
}

//! Command-line interface: configured evolutions, convergence sweeps,
//! closed-form reference tables, and curve admissibility checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use elastica::error::{Error, Result};
use elastica::exact::ExactCircle;
use elastica::harness::{self, RunConfig};
use elastica::mesh::{check_assumptions, frame, mesh_ratio, QuadratureRule};
use elastica::metric::{ConformalMetric, MetricSpec};
use elastica::scheme::{RunStatus, Scheme};

#[derive(Parser)]
#[command(
    name = "elastica",
    version,
    about = "Finite-element elastic flow of closed curves in conformally flat surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_scheme(text: &str) -> std::result::Result<Scheme, String> {
    match text {
        "P" => Ok(Scheme::P),
        "Qh" => Ok(Scheme::Qh),
        "Qstar" => Ok(Scheme::Qstar),
        other => Err(format!("unknown scheme \"{other}\"; expected P, Qh, or Qstar")),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExactCase {
    /// Origin-centred circles in the alpha family (sphere / flat plane /
    /// hyperbolic disk).
    Alpha,
    /// Circles in the hyperbolic upper half-plane.
    Hyperbolic,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured evolution and write its output files.
    Evolve {
        /// JSON run configuration.
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the configured scheme (P, Qh, or Qstar).
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        /// Override the configured vertex count.
        #[arg(long = "J")]
        j: Option<usize>,
        /// Override the configured final time.
        #[arg(long = "T")]
        t_end: Option<f64>,
        /// Override the time step with a fixed value.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the configured length penalty.
        #[arg(long)]
        lambda: Option<f64>,
        /// Override how often snapshots are kept (0 = initial and final).
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Also write embedded 3D snapshots where the family supports it.
        #[arg(long)]
        embed: bool,
    },
    /// Repeat a configuration over several resolutions and tabulate
    /// errors against the closed-form reference circle.
    Converge {
        /// JSON run configuration used as the sweep template.
        config: PathBuf,
        /// Comma-separated vertex counts, e.g. 32,64,128.
        #[arg(long = "J", value_delimiter = ',', required = true)]
        j: Vec<usize>,
        /// Override the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the configured scheme (P, Qh, or Qstar).
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        /// Override the configured final time.
        #[arg(long = "T")]
        t_end: Option<f64>,
    },
    /// Print a closed-form reference circle trajectory as CSV (t,a,r).
    Exact {
        /// Which reference family to evaluate.
        #[arg(long, value_enum)]
        case: ExactCase,
        /// Curvature parameter of the alpha family.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        alpha: f64,
        /// Initial circle radius.
        #[arg(long, default_value_t = 1.0)]
        r0: f64,
        /// Initial centre height (hyperbolic case only).
        #[arg(long, default_value_t = 2.0)]
        a0: f64,
        /// Final time of the table.
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        /// Number of table rows, uniformly spaced over [0, T].
        #[arg(long, default_value_t = 11)]
        samples: usize,
    },
    /// Check a curve file against a metric's structural assumptions.
    Check {
        /// CSV curve file with header "x,y".
        curve: PathBuf,
        /// Metric selection as JSON, e.g. '{"family":"mu","mu":1.0}'.
        #[arg(long)]
        metric: String,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Evolve {
            config,
            output,
            scheme,
            j,
            t_end,
            dt,
            lambda,
            snapshot_every,
            embed,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut config: RunConfig = serde_json::from_str(&text)?;
            if let Some(dir) = output {
                config.output = Some(dir);
            }
            if let Some(s) = scheme {
                config.scheme = s;
            }
            if j.is_some() {
                config.j = j;
            }
            if let Some(t) = t_end {
                config.t_end = t;
            }
            if let Some(dt) = dt {
                config.dt = Some(dt);
                config.dt_rule = None;
            }
            if let Some(l) = lambda {
                config.lambda = l;
            }
            if let Some(k) = snapshot_every {
                config.snapshot_every = k;
            }
            if embed {
                config.embed = true;
            }
            config.validate()?;
            let record = harness::run(&config)?;
            let written = config
                .output
                .as_ref()
                .map(|dir| format!("; outputs in {}", dir.display()))
                .unwrap_or_default();
            match &record.status {
                RunStatus::Completed => {
                    let last = record.rows.last().expect("a run always records its state");
                    println!(
                        "completed {} steps to t={}; energy {:.6}, ratio {:.3}{written}",
                        last.step, last.t, last.energy, last.ratio
                    );
                    Ok(ExitCode::SUCCESS)
                }
                RunStatus::Aborted { step, reason } => {
                    eprintln!("aborted at step {step}: {reason}{written}");
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Converge { config, j, output, scheme, t_end } => {
            let text = std::fs::read_to_string(&config)?;
            let mut config: RunConfig = serde_json::from_str(&text)?;
            if let Some(dir) = output {
                config.output = Some(dir);
            }
            if let Some(s) = scheme {
                config.scheme = s;
            }
            if let Some(t) = t_end {
                config.t_end = t;
            }
            let rows = harness::converge(&config, &j)?;
            print!("{}", harness::convergence_csv(&rows));
            if rows.iter().any(|row| row.error.is_err()) {
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Exact { case, alpha, r0, a0, t_end, samples } => {
            if !(r0 > 0.0) {
                return Err(Error::Config(format!("r0 must be positive, got {r0}")));
            }
            if samples < 2 {
                return Err(Error::Config(format!("need at least 2 samples, got {samples}")));
            }
            if !(t_end > 0.0) {
                return Err(Error::Config(format!("T must be positive, got {t_end}")));
            }
            let mut reference = match case {
                ExactCase::Alpha => {
                    if alpha > 0.0 && alpha * r0 * r0 >= 1.0 {
                        return Err(Error::Config(format!(
                            "the initial circle must lie inside the chart disk: alpha*r0^2 = {} >= 1",
                            alpha * r0 * r0
                        )));
                    }
                    ExactCircle::alpha(alpha, r0)
                }
                ExactCase::Hyperbolic => {
                    if !(a0 > r0) {
                        return Err(Error::Config(format!(
                            "the initial circle must lie inside the half-plane: need a0 > r0, got a0 = {a0}, r0 = {r0}"
                        )));
                    }
                    ExactCircle::hyperbolic(a0, r0)
                }
            };
            println!("t,a,r");
            for i in 0..samples {
                let t = t_end * i as f64 / (samples - 1) as f64;
                let (a, r) = reference.eval(t);
                println!("{t},{a},{r}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { curve, metric } => {
            let spec: MetricSpec = serde_json::from_str(&metric)?;
            let metric = ConformalMetric::new(spec)?;
            let x = harness::read_curve(&curve)?;
            println!("vertices: {}", x.len());
            let mut pass = true;
            let mut domain_ok = true;
            for p in &x {
                if let Err(err) = metric.check_domain(*p) {
                    println!("domain: FAIL ({err})");
                    domain_ok = false;
                    pass = false;
                    break;
                }
            }
            if domain_ok {
                println!("domain: ok");
            }
            match frame(&x) {
                Ok(fr) => {
                    let min = fr.edge_len.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = fr.edge_len.iter().cloned().fold(0.0_f64, f64::max);
                    println!("edges: min {min}, max {max}, ratio {}", mesh_ratio(&fr));
                }
                Err(err) => {
                    println!("edges: FAIL ({err})");
                    pass = false;
                }
            }
            if domain_ok {
                for (rule, label) in [
                    (QuadratureRule::vertex(), "vertex rule"),
                    (QuadratureRule::gauss3(), "3-point rule"),
                ] {
                    match check_assumptions(&x, &metric, &rule) {
                        Ok(report) => {
                            let show = |flag: bool| if flag { "ok" } else { "FAIL" };
                            println!(
                                "{label}: vertex separation {}, normal span {}, weighted normal span {}",
                                show(report.vertex_separation),
                                show(report.normal_span),
                                show(report.weighted_normal_span)
                            );
                            pass &= report.all_hold();
                        }
                        Err(err) => {
                            println!("{label}: FAIL ({err})");
                            pass = false;
                        }
                    }
                }
            }
            if pass {
                println!("result: pass");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("result: fail");
                Ok(ExitCode::from(2))
            }
        }
    }
}

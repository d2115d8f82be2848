//! Run configuration, output files, and the convergence-sweep driver.
//!
//! This module is the programmatic core of the command-line interface: a
//! [`RunConfig`] describes one simulation (metric, scheme, initial curve,
//! time control, outputs) as a single JSON document, [`run`] executes it
//! and writes the CSV artifacts, and [`converge`] repeats a configuration
//! over a list of resolutions to produce an error/EOC table against the
//! closed-form circle references.
//!
//! # Output files
//!
//! A run with an `output` directory writes
//!
//! * `diagnostics.csv` — header `step,t,energy,ratio,min_edge,max_edge`,
//!   one row per recorded state (initial state included);
//! * `snapshot_<step>.csv` — header `x,y`, one row per vertex, implicitly
//!   closed; written for the initial state, the final state, and every
//!   `snapshot_every`-th step in between;
//! * `embedded_<step>.csv` — header `x,y,z`; only with `"embed": true`
//!   and only for metric families that chart a classical surface.
//!
//! A convergence sweep writes `convergence.csv` with header
//! `J,h,error,eoc`.
//!
//! Plain numeric columns use the shortest decimal representation that
//! round-trips; the `h` and `error` columns of the convergence table use
//! five-significant-digit scientific notation (see [`sci5`]) so the rows
//! can be compared directly against published tables. The pipeline is
//! deterministic: re-running a completed configuration reproduces every
//! output file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{circle, max_edge_length, perturbed_circle, ExactCircle};
use crate::metric::{ConformalMetric, MetricSpec};
use crate::scheme::{evolve, evolve_with, RunRecord, RunStatus, Scheme, SchemeState};
use crate::Vec2;

/// Time-step selection rule for configs that do not fix `dt` directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DtRule {
    /// `Δt = 0.1 h²` with `h` the longest edge of the actual initial
    /// polygon; the protocol used by all convergence experiments.
    #[serde(rename = "0.1h2")]
    TenthHSquared,
}

/// Initial curve selection: a built-in generator or a curve file.
///
/// The JSON form is tagged by `kind`, e.g.
/// `{"kind": "perturbed_circle", "r0": 1.0, "a0": 2.0}` or
/// `{"kind": "file", "path": "curve.csv"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCurve {
    /// Circle of radius `r0` centred at `(0, a0)` sampled at graded
    /// parameters, so the polygon has genuinely non-uniform edges; the
    /// standard initial datum of the convergence experiments.
    PerturbedCircle {
        /// Radius of the circle carrying the vertices.
        r0: f64,
        /// Height of the circle centre on the second coordinate axis.
        a0: f64,
    },
    /// Uniformly sampled circle of radius `r0` about an arbitrary centre.
    Circle {
        /// Circle radius.
        r0: f64,
        /// Circle centre `(x, y)`.
        center: [f64; 2],
    },
    /// Uniformly sampled axis-aligned ellipse with semi-axes `rx`, `ry`.
    Ellipse {
        /// Semi-axis along the first coordinate.
        rx: f64,
        /// Semi-axis along the second coordinate.
        ry: f64,
        /// Ellipse centre `(x, y)`.
        center: [f64; 2],
    },
    /// Closed polygon read from a CSV file with header `x,y`.
    File {
        /// Path to the curve file.
        path: PathBuf,
    },
}

/// Complete description of one simulation run.
///
/// Deserialized from a single JSON document; unknown fields are rejected
/// so typos surface as configuration errors instead of silently falling
/// back to defaults. Example:
///
/// ```json
/// {
///   "metric": {"family": "mu", "mu": 1.0},
///   "scheme": "P",
///   "lambda": 0.0,
///   "initial": {"kind": "perturbed_circle", "r0": 1.0, "a0": 2.0},
///   "J": 64,
///   "T": 1.0,
///   "dt_rule": "0.1h2",
///   "snapshot_every": 100,
///   "output": "out/hyperbolic_p",
///   "embed": false
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Conformal metric family and parameter.
    pub metric: MetricSpec,
    /// Discrete evolution scheme.
    pub scheme: Scheme,
    /// Length penalty λ in the energy `½∮(κ_g² + 2λ)`.
    #[serde(default)]
    pub lambda: f64,
    /// Initial curve (generator or file).
    pub initial: InitialCurve,
    /// Vertex count for generated initial curves; ignored for curve files.
    #[serde(default, rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// Final time of the evolution.
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Fixed time-step size; mutually exclusive with `dt_rule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Resolution-dependent time-step rule; mutually exclusive with `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_rule: Option<DtRule>,
    /// Keep every k-th step as a snapshot (0 = initial and final only).
    #[serde(default)]
    pub snapshot_every: usize,
    /// Output directory; no files are written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Also write `embedded_<step>.csv` with the curve mapped onto the
    /// embedded surface, for families that have one.
    #[serde(default)]
    pub embed: bool,
}

impl RunConfig {
    /// Parses a configuration from JSON text and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a configuration file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Checks the declared invariants: `J ≥ 3` (and present for generated
    /// curves), `T > 0`, exactly one of `dt`/`dt_rule` with `dt > 0` when
    /// fixed, and positive radii for the generated initial curves.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(j) = self.j {
            if j < 3 {
                return bad(format!("J must be at least 3, got {j}"));
            }
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("T must be positive and finite, got {}", self.t_end));
        }
        match (self.dt, self.dt_rule) {
            (Some(dt), None) => {
                if !(dt > 0.0) || !dt.is_finite() {
                    return bad(format!("dt must be positive and finite, got {dt}"));
                }
            }
            (None, Some(_)) => {}
            (None, None) => return bad("one of dt or dt_rule is required".into()),
            (Some(_), Some(_)) => return bad("dt and dt_rule are mutually exclusive".into()),
        }
        if !self.lambda.is_finite() {
            return bad(format!("lambda must be finite, got {}", self.lambda));
        }
        match &self.initial {
            InitialCurve::PerturbedCircle { r0, .. } | InitialCurve::Circle { r0, .. } => {
                if !(*r0 > 0.0) {
                    return bad(format!("initial radius must be positive, got {r0}"));
                }
                if self.j.is_none() {
                    return bad("J is required for generated initial curves".into());
                }
            }
            InitialCurve::Ellipse { rx, ry, .. } => {
                if !(*rx > 0.0) || !(*ry > 0.0) {
                    return bad(format!("ellipse semi-axes must be positive, got {rx}, {ry}"));
                }
                if self.j.is_none() {
                    return bad("J is required for generated initial curves".into());
                }
            }
            InitialCurve::File { .. } => {}
        }
        Ok(())
    }

    /// Builds the initial polygon described by the configuration.
    pub fn build_initial(&self) -> Result<Vec<Vec2>> {
        // validate() has checked that J is present for generated curves.
        let j = self.j.unwrap_or(0);
        match &self.initial {
            InitialCurve::PerturbedCircle { r0, a0 } => Ok(perturbed_circle(j, *r0, *a0)),
            InitialCurve::Circle { r0, center } => {
                Ok(circle(j, *r0, Vec2::new(center[0], center[1])))
            }
            InitialCurve::Ellipse { rx, ry, center } => {
                Ok(ellipse(j, *rx, *ry, Vec2::new(center[0], center[1])))
            }
            InitialCurve::File { path } => read_curve(path),
        }
    }

    /// Resolves the time-step size, applying `dt_rule` to the actual
    /// initial polygon when no fixed `dt` is given.
    pub fn resolve_dt(&self, initial: &[Vec2]) -> f64 {
        match (self.dt, self.dt_rule) {
            (Some(dt), _) => dt,
            (None, _) => {
                let h = max_edge_length(initial);
                0.1 * h * h
            }
        }
    }
}

/// Uniformly sampled axis-aligned ellipse, counterclockwise.
pub fn ellipse(j_count: usize, rx: f64, ry: f64, center: Vec2) -> Vec<Vec2> {
    use std::f64::consts::TAU;
    (0..j_count)
        .map(|j| {
            let t = TAU * j as f64 / j_count as f64;
            center + Vec2::new(rx * t.cos(), ry * t.sin())
        })
        .collect()
}

/// Reads a closed polygon from a CSV file with header `x,y`.
pub fn read_curve(path: &Path) -> Result<Vec<Vec2>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?;
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::Config(format!(
            "curve file {} must have header \"x,y\", found \"{}\"",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut x = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |field: &str| {
            field.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "curve file {} row {}: cannot parse \"{field}\" as a number",
                    path.display(),
                    row + 2
                ))
            })
        };
        x.push(Vec2::new(parse(&record[0])?, parse(&record[1])?));
    }
    Ok(x)
}

/// Writes a closed polygon to a CSV file with header `x,y`.
pub fn write_curve(path: &Path, x: &[Vec2]) -> Result<()> {
    let mut text = String::from("x,y\n");
    for p in x {
        writeln!(text, "{},{}", p.x, p.y).expect("string write cannot fail");
    }
    fs::write(path, text)?;
    Ok(())
}

/// Executes a configured run and writes its output files.
///
/// The returned [`RunRecord`] carries the per-step diagnostics, the kept
/// snapshots, and the termination status; an aborted run still returns
/// normally (with [`RunStatus::Aborted`]) and still writes the partial
/// outputs, so the trajectory up to the failure can be inspected.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let metric = ConformalMetric::new(config.metric)?;
    let x0 = config.build_initial()?;
    let dt = config.resolve_dt(&x0);
    let mut state = SchemeState::init(config.scheme, metric, config.lambda, &x0)?;
    let record = evolve(&mut state, dt, config.t_end, config.snapshot_every);
    if let Some(dir) = &config.output {
        write_outputs(dir, &metric, config.embed, &record)?;
    }
    Ok(record)
}

/// Writes `diagnostics.csv`, `snapshot_<step>.csv`, and (when requested
/// and supported) `embedded_<step>.csv` into `dir`.
fn write_outputs(dir: &Path, metric: &ConformalMetric, embed: bool, record: &RunRecord) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut diag = String::from("step,t,energy,ratio,min_edge,max_edge\n");
    for row in &record.rows {
        writeln!(
            diag,
            "{},{},{},{},{},{}",
            row.step, row.t, row.energy, row.ratio, row.min_edge, row.max_edge
        )
        .expect("string write cannot fail");
    }
    fs::write(dir.join("diagnostics.csv"), diag)?;
    for (step, _t, x) in &record.snapshots {
        write_curve(&dir.join(format!("snapshot_{step}.csv")), x)?;
        if embed && metric.embed(x[0])?.is_some() {
            let mut text = String::from("x,y,z\n");
            for p in x {
                let q = metric
                    .embed(*p)?
                    .expect("embedding support cannot vary across the domain");
                writeln!(text, "{},{},{}", q.x, q.y, q.z).expect("string write cannot fail");
            }
            fs::write(dir.join(format!("embedded_{step}.csv")), text)?;
        }
    }
    Ok(())
}

/// One resolution of a convergence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRow {
    /// Vertex count of this resolution.
    pub j: usize,
    /// Longest edge of the initial polygon at this resolution.
    pub h: f64,
    /// Maximal distance of any vertex from the reference circle over all
    /// time steps, or the failure message if the run did not complete.
    pub error: std::result::Result<f64, String>,
    /// Estimated order of convergence against the previous row; `None`
    /// for the first row and next to failed rows.
    pub eoc: Option<f64>,
}

/// Closed-form reference selected for a convergence sweep.
#[derive(Debug, Clone, Copy)]
enum ReferenceKind {
    Alpha { alpha: f64, r0: f64 },
    Hyperbolic { a0: f64, r0: f64 },
}

impl ReferenceKind {
    fn build(self) -> ExactCircle {
        match self {
            ReferenceKind::Alpha { alpha, r0 } => ExactCircle::alpha(alpha, r0),
            ReferenceKind::Hyperbolic { a0, r0 } => ExactCircle::hyperbolic(a0, r0),
        }
    }
}

/// Picks the closed-form reference for the template's metric/initial
/// pair, or explains why none exists.
fn reference_for(config: &RunConfig) -> Result<ReferenceKind> {
    let InitialCurve::PerturbedCircle { r0, a0 } = config.initial else {
        return Err(Error::Config(
            "convergence sweeps need a perturbed_circle initial curve".into(),
        ));
    };
    match config.metric {
        MetricSpec::Alpha { alpha } if a0 == 0.0 => Ok(ReferenceKind::Alpha { alpha, r0 }),
        MetricSpec::Alpha { .. } => Err(Error::Config(
            "the alpha-family reference circles are centred at the origin; set a0 = 0".into(),
        )),
        MetricSpec::Mu { mu } if mu == 1.0 && a0 > r0 => {
            Ok(ReferenceKind::Hyperbolic { a0, r0 })
        }
        MetricSpec::Mu { mu } if mu == 1.0 => Err(Error::Config(
            "the half-plane reference circles need a0 > r0 > 0".into(),
        )),
        _ => Err(Error::Config(format!(
            "no closed-form reference circle for the {} family",
            serde_json::to_string(&config.metric).unwrap_or_default()
        ))),
    }
}

/// Runs the template configuration at each resolution in `js` and
/// tabulates the trajectory error against the closed-form circle.
///
/// Every row rebuilds the perturbed-circle initial polygon at its own
/// resolution and applies the sweep time-step rule `Δt = 0.1 h²` to the
/// actual polygon, regardless of the template's `dt` settings. Rows run
/// in parallel; the returned table is ordered by `J`. A row whose run
/// aborts carries the failure message instead of an error value, and the
/// EOC entries touching it stay empty.
pub fn converge(config: &RunConfig, js: &[usize]) -> Result<Vec<ConvergeRow>> {
    // The sweep list replaces the template's vertex count and the sweep
    // rule replaces its time-step settings, so validate a copy with those
    // fields filled in rather than demanding them in the template.
    let mut template = config.clone();
    template.j = Some(template.j.unwrap_or(3));
    if template.dt.is_none() && template.dt_rule.is_none() {
        template.dt_rule = Some(DtRule::TenthHSquared);
    }
    template.validate()?;
    let reference = reference_for(config)?;
    let metric = ConformalMetric::new(config.metric)?;
    let InitialCurve::PerturbedCircle { r0, a0 } = config.initial else {
        unreachable!("reference_for accepts perturbed circles only");
    };
    for &j in js {
        if j < 3 {
            return Err(Error::Config(format!("J must be at least 3, got {j}")));
        }
    }
    let mut rows: Vec<ConvergeRow> = js
        .par_iter()
        .map(|&j| {
            let x0 = perturbed_circle(j, r0, a0);
            let h = max_edge_length(&x0);
            let dt = 0.1 * h * h;
            let error = sweep_error(config, metric, reference, &x0, dt);
            ConvergeRow { j, h, error, eoc: None }
        })
        .collect();
    rows.sort_by_key(|row| row.j);
    for k in 1..rows.len() {
        if let (Ok(prev), Ok(cur)) = (&rows[k - 1].error, &rows[k].error) {
            rows[k].eoc = Some((prev / cur).ln() / (rows[k - 1].h / rows[k].h).ln());
        }
    }
    if let Some(dir) = &config.output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("convergence.csv"), convergence_csv(&rows))?;
    }
    Ok(rows)
}

/// Evolves one sweep resolution, streaming the vertex-to-reference-circle
/// distance over every step instead of storing the trajectory.
fn sweep_error(
    config: &RunConfig,
    metric: ConformalMetric,
    reference: ReferenceKind,
    x0: &[Vec2],
    dt: f64,
) -> std::result::Result<f64, String> {
    let mut reference = reference.build();
    let mut state = SchemeState::init(config.scheme, metric, config.lambda, x0)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let status = evolve_with(&mut state, dt, config.t_end, |st| {
        if st.t > 0.0 {
            let (a, r) = reference.eval(st.t);
            let center = Vec2::new(0.0, a);
            for p in &st.x {
                worst = worst.max(((p - center).norm() - r).abs());
            }
        }
    });
    match status {
        RunStatus::Completed => Ok(worst),
        RunStatus::Aborted { step, reason } => Err(format!("aborted at step {step}: {reason}")),
    }
}

/// Renders a convergence table as CSV with header `J,h,error,eoc`.
///
/// `h` and `error` use five-significant-digit scientific notation; `eoc`
/// uses two decimals and stays empty where undefined; failure messages
/// are quoted as CSV requires.
pub fn convergence_csv(rows: &[ConvergeRow]) -> String {
    let mut text = String::from("J,h,error,eoc\n");
    for row in rows {
        let error = match &row.error {
            Ok(e) => sci5(*e),
            Err(msg) => csv_quote(msg),
        };
        let eoc = row.eoc.map(|e| format!("{e:.2}")).unwrap_or_default();
        writeln!(text, "{},{},{},{}", row.j, sci5(row.h), error, eoc)
            .expect("string write cannot fail");
    }
    text
}

/// Formats a number in scientific notation with five significant digits
/// and a sign-and-two-digit exponent, the layout of published error
/// tables: `sci5(0.126904) == "1.2690e-01"`.
pub fn sci5(x: f64) -> String {
    let raw = format!("{x:.4e}");
    let (mantissa, exponent) = raw.split_once('e').expect("{:e} always contains an e");
    let (sign, digits) = match exponent.strip_prefix('-') {
        Some(rest) => ('-', rest),
        None => ('+', exponent),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

/// Quotes a string for use as a CSV field if it contains separators.
fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::DiagRow;

    fn base_config() -> RunConfig {
        RunConfig {
            metric: MetricSpec::Euclidean,
            scheme: Scheme::P,
            lambda: 1.0,
            initial: InitialCurve::Circle { r0: 1.0, center: [0.0, 0.0] },
            j: Some(8),
            t_end: 3e-3,
            dt: Some(1e-3),
            dt_rule: None,
            snapshot_every: 0,
            output: None,
            embed: false,
        }
    }

    #[test]
    fn config_json_round_trips_and_rejects_unknown_fields() {
        let text = r#"{
            "metric": {"family": "mu", "mu": 1.0},
            "scheme": "Qstar",
            "lambda": 0.5,
            "initial": {"kind": "perturbed_circle", "r0": 1.0, "a0": 2.0},
            "J": 64,
            "T": 1.0,
            "dt_rule": "0.1h2",
            "snapshot_every": 10,
            "output": "out/run",
            "embed": true
        }"#;
        let config = RunConfig::from_json(text).unwrap();
        assert_eq!(config.scheme, Scheme::Qstar);
        assert_eq!(config.j, Some(64));
        assert_eq!(config.dt_rule, Some(DtRule::TenthHSquared));
        let again = RunConfig::from_json(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(config, again);

        let with_typo = text.replace("\"snapshot_every\"", "\"snapshotEvery\"");
        assert!(RunConfig::from_json(&with_typo).is_err());
    }

    #[test]
    fn config_validation_catches_inconsistent_options() {
        let mut c = base_config();
        c.j = Some(2);
        assert!(c.validate().is_err(), "J below 3 must be rejected");

        let mut c = base_config();
        c.t_end = 0.0;
        assert!(c.validate().is_err(), "non-positive T must be rejected");

        let mut c = base_config();
        c.dt = None;
        assert!(c.validate().is_err(), "missing time control must be rejected");

        let mut c = base_config();
        c.dt_rule = Some(DtRule::TenthHSquared);
        assert!(c.validate().is_err(), "dt and dt_rule together must be rejected");

        let mut c = base_config();
        c.j = None;
        assert!(
            c.validate().is_err(),
            "generated curves without J must be rejected"
        );

        let mut c = base_config();
        c.initial = InitialCurve::Ellipse { rx: 1.0, ry: -2.0, center: [0.0, 0.0] };
        assert!(c.validate().is_err(), "negative semi-axis must be rejected");
    }

    #[test]
    fn curve_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let x = perturbed_circle(12, 1.5, 0.25);
        write_curve(&path, &x).unwrap();
        let back = read_curve(&path).unwrap();
        assert_eq!(x, back, "shortest round-trip formatting must be lossless");

        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_curve(&path).is_err(), "wrong header must be rejected");
        fs::write(&path, "x,y\n1,two\n").unwrap();
        assert!(read_curve(&path).is_err(), "non-numeric field must be rejected");
    }

    #[test]
    fn run_writes_expected_files_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config();
        config.snapshot_every = 2;
        config.output = Some(dir.path().join("a"));
        let record = run(&config).unwrap();
        assert!(record.status.is_completed());
        assert_eq!(record.rows.len(), 4, "three steps plus the initial row");

        let diag = fs::read_to_string(dir.path().join("a/diagnostics.csv")).unwrap();
        assert!(diag.starts_with("step,t,energy,ratio,min_edge,max_edge\n"));
        assert_eq!(diag.lines().count(), 1 + record.rows.len());
        for step in [0, 2, 3] {
            let snap = fs::read_to_string(dir.path().join(format!("a/snapshot_{step}.csv"))).unwrap();
            assert!(snap.starts_with("x,y\n"));
            assert_eq!(snap.lines().count(), 1 + config.j.unwrap());
        }

        config.output = Some(dir.path().join("b"));
        run(&config).unwrap();
        for name in ["diagnostics.csv", "snapshot_0.csv", "snapshot_2.csv", "snapshot_3.csv"] {
            let a = fs::read(dir.path().join("a").join(name)).unwrap();
            let b = fs::read(dir.path().join("b").join(name)).unwrap();
            assert_eq!(a, b, "re-running a config must reproduce {name} byte for byte");
        }
    }

    #[test]
    fn embedded_snapshots_follow_the_surface() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config();
        config.metric = MetricSpec::Alpha { alpha: -1.0 };
        config.initial = InitialCurve::Circle { r0: 1.0, center: [0.0, 0.0] };
        config.embed = true;
        config.output = Some(dir.path().to_path_buf());
        run(&config).unwrap();
        let text = fs::read_to_string(dir.path().join("embedded_0.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,z"));
        for line in lines {
            let p: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-12, "sphere points must have unit norm");
        }

        // Families without an embedding skip the file even when asked.
        let dir2 = tempfile::tempdir().unwrap();
        config.metric = MetricSpec::Euclidean;
        config.output = Some(dir2.path().to_path_buf());
        run(&config).unwrap();
        assert!(!dir2.path().join("embedded_0.csv").exists());
    }

    #[test]
    fn diagnostics_row_times_strictly_increase() {
        let mut config = base_config();
        config.t_end = 5e-3;
        let record = run(&config).unwrap();
        let times: Vec<f64> = record.rows.iter().map(|r: &DiagRow| r.t).collect();
        for pair in times.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn converge_orders_rows_and_reports_quadratic_decay() {
        let mut config = base_config();
        config.metric = MetricSpec::Alpha { alpha: -1.0 };
        config.scheme = Scheme::Qh;
        config.lambda = 0.0;
        config.initial = InitialCurve::PerturbedCircle { r0: 1.5, a0: 0.0 };
        config.j = None;
        config.t_end = 0.05;
        config.dt = None;
        config.dt_rule = Some(DtRule::TenthHSquared);
        let rows = converge(&config, &[24, 48, 12]).unwrap();
        let js: Vec<usize> = rows.iter().map(|r| r.j).collect();
        assert_eq!(js, vec![12, 24, 48], "rows must be ordered by J");
        assert!(rows.windows(2).all(|w| w[0].h > w[1].h));
        assert!(rows[0].eoc.is_none());
        let eoc = rows[2].eoc.unwrap();
        assert!(
            (1.5..2.5).contains(&eoc),
            "short sweep should already show roughly quadratic decay, got {eoc}"
        );
        let again = converge(&config, &[24, 48, 12]).unwrap();
        assert_eq!(rows, again, "parallel sweeps must be deterministic");
    }

    #[test]
    fn converge_rejects_configs_without_a_reference() {
        let mut config = base_config();
        config.initial = InitialCurve::PerturbedCircle { r0: 1.0, a0: 0.0 };
        config.j = None;
        assert!(converge(&config, &[12]).is_err(), "euclidean family has no reference");

        config.metric = MetricSpec::Alpha { alpha: -1.0 };
        config.initial = InitialCurve::PerturbedCircle { r0: 1.0, a0: 0.5 };
        assert!(converge(&config, &[12]).is_err(), "off-centre alpha circle");

        config.metric = MetricSpec::Mu { mu: 2.0 };
        config.initial = InitialCurve::PerturbedCircle { r0: 1.0, a0: 2.0 };
        assert!(converge(&config, &[12]).is_err(), "only mu = 1 has a reference");
    }

    #[test]
    fn table_formatting_matches_published_layout() {
        assert_eq!(sci5(0.126904), "1.2690e-01");
        assert_eq!(sci5(4.9966e-4), "4.9966e-04");
        assert_eq!(sci5(2.1544347e-1), "2.1544e-01");
        assert_eq!(sci5(110.47), "1.1047e+02");
        let rows = vec![
            ConvergeRow { j: 32, h: 0.21544347, error: Ok(0.126904), eoc: None },
            ConvergeRow {
                j: 64,
                h: 0.10792,
                error: Err("aborted at step 3: point (1, 2) left".into()),
                eoc: None,
            },
        ];
        let text = convergence_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("J,h,error,eoc"));
        assert_eq!(lines.next(), Some("32,2.1544e-01,1.2690e-01,"));
        assert_eq!(
            lines.next(),
            Some("64,1.0792e-01,\"aborted at step 3: point (1, 2) left\","),
        );
    }
}

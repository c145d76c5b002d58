//! Experiment configuration, power-law fitting, sweep records, and the
//! reproducible file-emitting pipelines behind the CLI subcommands.
//!
//! Configuration is a TOML file with named sections mirroring the domain
//! types; every validation failure names the offending field. All outputs
//! are written atomically (temp file in the target directory, then rename),
//! and contain no timestamps, so identical configs reproduce identical
//! bytes.

use crate::error::{Error, Result};
use crate::exponents::{self, LifespanForm, ProblemParams};
use crate::functionals;
use crate::geometry::RadialMetric;
use crate::kato_ode::{self, KatoParams};
use crate::special_functions;
use crate::wave_solver::{self, BumpProfile, InitialData, SolverConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Least-squares power-law fit y = C·x^slope on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    /// ln C.
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest |log-residual| over the points.
    pub max_log_residual: f64,
    pub n_points: usize,
}

/// Fits log y against log x by least squares. Needs ≥ 3 points with
/// distinct positive x and positive y.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::fit(format!(
            "fit_power_law: need ≥ 3 points, got {}",
            points.len()
        )));
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::fit(format!(
                "fit_power_law: need positive coordinates, got ({x}, {y})"
            )));
        }
        logs.push((x.ln(), y.ln()));
    }
    let n = logs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &logs {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 * (1.0 + sxx.abs()) {
        return Err(Error::fit(
            "fit_power_law: degenerate x values (no spread)".to_string(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut max_resid = 0.0f64;
    for &(x, y) in &logs {
        let r = y - (intercept + slope * x);
        ss_res += r * r;
        ss_tot += (y - mean_y) * (y - mean_y);
        max_resid = max_resid.max(r.abs());
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        max_log_residual: max_resid,
        n_points: points.len(),
    })
}

/// One ε-sweep measurement, immutable once recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub t_num: Option<f64>,
    pub threshold: f64,
    pub dr: f64,
    /// Human-readable identifier of the adaptive-step policy.
    pub dt_policy: String,
    /// T(M) vs T(100M) audit outcome, when available.
    pub robust: Option<bool>,
    pub flags: Vec<String>,
    pub predicted_regime: String,
    pub predicted_exponent: f64,
    pub predicted_form: LifespanForm,
}

// ---------------------------------------------------------------------------
// Configuration sections.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub n: u32,
    pub mu1: f64,
    pub mu2: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            n: 3,
            mu1: 0.0,
            mu2: 0.0,
            p: None,
            q: Some(2.0),
            c1: 0.0,
            c2: 1.0,
        }
    }
}

impl ProblemSection {
    pub fn to_params(&self) -> Result<ProblemParams> {
        let params = ProblemParams {
            n: self.n,
            mu1: self.mu1,
            mu2: self.mu2,
            p: self.p,
            q: self.q,
            c1: self.c1,
            c2: self.c2,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// "flat" or "long-range".
    pub profile: String,
    pub kappa: f64,
    pub decay_rho: f64,
    /// Optional ellipticity-margin override.
    pub delta0: Option<f64>,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection {
            profile: "flat".to_string(),
            kappa: 0.1,
            decay_rho: 1.0,
            delta0: None,
        }
    }
}

impl MetricSection {
    pub fn to_metric(&self, n: u32) -> Result<RadialMetric> {
        let metric = match self.profile.as_str() {
            "flat" => RadialMetric::flat(n),
            "long-range" => RadialMetric::long_range(n, self.kappa, self.decay_rho)?,
            other => {
                return Err(Error::config(format!(
                    "metric.profile: expected \"flat\" or \"long-range\", got \"{other}\""
                )))
            }
        };
        match self.delta0 {
            Some(d) => metric.with_delta0(d),
            None => Ok(metric),
        }
    }
}

fn profile_from_name(name: &str, power: u32, field: &str) -> Result<BumpProfile> {
    match name {
        "exponential" => Ok(BumpProfile::Exponential),
        "polynomial" => Ok(BumpProfile::Polynomial { power }),
        other => Err(Error::config(format!(
            "{field}: expected \"exponential\" or \"polynomial\", got \"{other}\""
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub epsilon: f64,
    pub r0: f64,
    pub u0_profile: String,
    pub u0_power: u32,
    pub u0_amplitude: f64,
    pub u1_profile: String,
    pub u1_power: u32,
    pub u1_amplitude: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            epsilon: 2.0,
            r0: 1.0,
            u0_profile: "exponential".to_string(),
            u0_power: 4,
            u0_amplitude: 1.0,
            u1_profile: "exponential".to_string(),
            u1_power: 4,
            u1_amplitude: 1.0,
        }
    }
}

impl DataSection {
    pub fn to_data(&self, metric: &RadialMetric) -> Result<InitialData> {
        if !(self.r0 > 0.0) {
            return Err(Error::config(format!("data.r0: need R0 > 0, got {}", self.r0)));
        }
        let mut data = InitialData::new(metric, self.epsilon, self.r0);
        data.u0_profile = profile_from_name(&self.u0_profile, self.u0_power, "data.u0_profile")?;
        data.u1_profile = profile_from_name(&self.u1_profile, self.u1_power, "data.u1_profile")?;
        data.u0_amplitude = self.u0_amplitude;
        data.u1_amplitude = self.u1_amplitude;
        Ok(data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dr: f64,
    pub cfl: f64,
    pub blowup_threshold: f64,
    pub t_cap: f64,
    pub shrink_exponent: Option<f64>,
    pub shrink_reference: f64,
    pub sample_dt: f64,
    /// Simulation snapshot times for plot output.
    pub snapshot_times: Vec<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dr: 0.01,
            cfl: 0.35,
            blowup_threshold: 1e6,
            t_cap: 140.0,
            shrink_exponent: None,
            shrink_reference: 10.0,
            sample_dt: 0.5,
            snapshot_times: vec![0.0, 10.0, 25.0],
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> Result<SolverConfig> {
        let config = SolverConfig {
            dr: self.dr,
            cfl: self.cfl,
            blowup_threshold: self.blowup_threshold,
            t_cap: self.t_cap,
            shrink_exponent: self.shrink_exponent,
            shrink_reference: self.shrink_reference,
        };
        config.validate()?;
        if !(self.sample_dt > 0.0) {
            return Err(Error::config(format!(
                "solver.sample_dt: need sample_dt > 0, got {}",
                self.sample_dt
            )));
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit list; wins over the log-range below when nonempty.
    pub epsilons: Vec<f64>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub count: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        // Default window calibrated so every run blows up within minutes at
        // dr = 1/100: the Strauss reference case has T ≈ 118·ε^{−2}.
        SweepSection {
            epsilons: vec![4.0, 2.8, 2.0, 1.4, 1.0],
            eps_min: 1.0,
            eps_max: 4.0,
            count: 5,
        }
    }
}

impl SweepSection {
    pub fn epsilon_list(&self) -> Result<Vec<f64>> {
        if !self.epsilons.is_empty() {
            return Ok(self.epsilons.clone());
        }
        if !(self.eps_min > 0.0 && self.eps_max > self.eps_min) {
            return Err(Error::config(format!(
                "sweep.eps_min/eps_max: need 0 < eps_min < eps_max, got ({}, {})",
                self.eps_min, self.eps_max
            )));
        }
        if self.count < 4 {
            return Err(Error::config(format!(
                "sweep.count: need ≥ 4 values, got {}",
                self.count
            )));
        }
        let m = self.count - 1;
        Ok((0..self.count)
            .map(|i| self.eps_max * (self.eps_min / self.eps_max).powf(i as f64 / m as f64))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenfunctionSection {
    pub lambdas: Vec<f64>,
    pub r_max: f64,
    pub dr: f64,
}

impl Default for EigenfunctionSection {
    fn default() -> Self {
        EigenfunctionSection {
            lambdas: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            r_max: 25.0,
            dr: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiSection {
    /// Temporal frequency λ₁ of the test function (typically below the
    /// largest certified eigenfunction λ₀).
    pub lambda1: f64,
    /// Integrand powers m for the cone integrals ∫ψ^m dv.
    pub m_values: Vec<f64>,
    /// Fit window [T_*, t_factor·T_*].
    pub t_factor: f64,
    pub samples: usize,
    /// Acceptance band around the predicted decay exponent.
    pub tolerance: f64,
    /// Spatial resolution of the eigenfunction under ψ.
    pub dr: f64,
}

impl Default for PsiSection {
    fn default() -> Self {
        PsiSection {
            lambda1: 0.45,
            m_values: vec![2.0],
            t_factor: 4.0,
            samples: 25,
            tolerance: 0.1,
            dr: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KatoSection {
    pub beta: f64,
    pub a: f64,
    pub kato_alpha: f64,
    pub k: f64,
    /// Explicit δ list; wins over the log-range when nonempty.
    pub deltas: Vec<f64>,
    pub delta_min: f64,
    pub delta_max: f64,
    pub count: usize,
    /// Relative slope-agreement band for the check verdict.
    pub tolerance: f64,
}

impl Default for KatoSection {
    fn default() -> Self {
        KatoSection {
            beta: 2.0,
            a: 1.0,
            kato_alpha: 1.0,
            k: 1.0,
            deltas: Vec::new(),
            delta_min: 1e-3,
            delta_max: 1e-1,
            count: 7,
            tolerance: 0.1,
        }
    }
}

impl KatoSection {
    pub fn to_params(&self) -> KatoParams {
        let delta = if self.deltas.is_empty() {
            self.delta_min
        } else {
            self.deltas.iter().copied().fold(f64::INFINITY, f64::min)
        };
        KatoParams {
            beta: self.beta,
            a: self.a,
            kato_alpha: self.kato_alpha,
            k: self.k,
            delta_small: delta,
            f0: delta,
            f0p: delta * self.a,
        }
    }

    pub fn delta_list(&self) -> Result<Vec<f64>> {
        if !self.deltas.is_empty() {
            return Ok(self.deltas.clone());
        }
        if !(self.delta_min > 0.0 && self.delta_max > self.delta_min) {
            return Err(Error::config(format!(
                "kato.delta_min/delta_max: need 0 < min < max, got ({}, {})",
                self.delta_min, self.delta_max
            )));
        }
        if self.count < 3 {
            return Err(Error::config(format!(
                "kato.count: need ≥ 3 δ values, got {}",
                self.count
            )));
        }
        let m = self.count - 1;
        Ok((0..self.count)
            .map(|i| self.delta_max * (self.delta_min / self.delta_max).powf(i as f64 / m as f64))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    /// Any of "csv", "jsonl", "dat".
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".to_string(),
            formats: vec!["csv".to_string(), "jsonl".to_string(), "dat".to_string()],
        }
    }
}

/// Full experiment configuration; sections mirror the domain types and every
/// subcommand reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub metric: MetricSection,
    pub data: DataSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub eigenfunction: EigenfunctionSection,
    pub psi: PsiSection,
    pub kato: KatoSection,
    pub outputs: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("config file {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn wants(&self, format: &str) -> bool {
        self.outputs.formats.iter().any(|f| f == format)
    }
}

// ---------------------------------------------------------------------------
// Atomic emitters.
// ---------------------------------------------------------------------------

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)
            .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
            .map_err(|e| Error::config(format!("csv encode: {e}")))?;
        w.flush()?;
    }
    atomic_write(path, &buf)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)
            .map_err(|e| Error::config(format!("json encode: {e}")))?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// Two-column (or multi-column) whitespace-separated plot data with a
/// comment header.
fn write_dat(path: &Path, comment: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# {comment}\n# {}\n", columns.join(" ")));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

// ---------------------------------------------------------------------------
// Pipelines.
// ---------------------------------------------------------------------------

/// Which experiment pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Exponents,
    GeometryCheck,
    Eigenfunction,
    PsiDecay,
    Kato,
    Simulate,
    LifespanSweep,
    Functionals,
}

/// What an experiment produced: emitted files, human-readable report lines,
/// and any failed checks (exit code 2 when nonempty).
#[derive(Debug, Clone, Default)]
pub struct Bundle {
    pub files: Vec<PathBuf>,
    pub report: Vec<String>,
    pub check_failures: Vec<String>,
}

impl Bundle {
    fn emit(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    fn line(&mut self, s: impl Into<String>) {
        self.report.push(s.into());
    }

    fn fail(&mut self, s: impl Into<String>) {
        self.check_failures.push(s.into());
    }
}

/// Executes one pipeline and writes its artifact bundle under
/// `outputs.directory`.
pub fn run_experiment(config: &ExperimentConfig, pipeline: Pipeline) -> Result<Bundle> {
    match pipeline {
        Pipeline::Exponents => run_exponents(config),
        Pipeline::GeometryCheck => run_geometry_check(config),
        Pipeline::Eigenfunction => run_eigenfunction(config),
        Pipeline::PsiDecay => run_psi_decay(config),
        Pipeline::Kato => run_kato(config),
        Pipeline::Simulate => run_simulate(config),
        Pipeline::LifespanSweep => run_lifespan_sweep(config),
        Pipeline::Functionals => run_functionals(config),
    }
}

fn out_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    Path::new(&config.outputs.directory).join(name)
}

fn run_exponents(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let derived = exponents::derive(&params)?;
    let predictions = exponents::classify(&params)?;
    let mut bundle = Bundle::default();
    bundle.line(format!(
        "derived: delta = {:.6}, alpha = {:.6}, n+mu1 = {:.6}, n+alpha = {:.6}",
        derived.delta, derived.alpha, derived.d_glassey_strauss, derived.d_fujita
    ));
    for p in &predictions {
        bundle.line(format!(
            "{}: form = {:?}, exponent = {:.6}, source dim = {:.3}, dominant = {}, asserted = {}",
            p.regime, p.form, p.exponent, p.source_dimension, p.dominant, p.asserted
        ));
    }
    if config.wants("csv") {
        let rows: Vec<Vec<String>> = predictions
            .iter()
            .map(|p| {
                vec![
                    p.regime.to_string(),
                    format!("{:?}", p.form),
                    format!("{:.12e}", p.exponent),
                    format!("{:.12e}", p.source_dimension),
                    p.dominant.to_string(),
                    p.asserted.to_string(),
                ]
            })
            .collect();
        let path = out_path(config, "exponents.csv");
        write_csv(
            &path,
            &["regime", "form", "exponent", "source_dimension", "dominant", "asserted"],
            &rows,
        )?;
        bundle.emit(path);
    }
    if config.wants("jsonl") {
        let path = out_path(config, "exponents.jsonl");
        write_jsonl(&path, &predictions)?;
        bundle.emit(path);
    }
    Ok(bundle)
}

fn run_geometry_check(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let metric = config.metric.to_metric(params.n)?;
    let mut bundle = Bundle::default();
    let r_max = config.eigenfunction.r_max.max(10.0);
    match metric.check_ellipticity(r_max, 2000) {
        Ok(()) => bundle.line(format!(
            "ellipticity: delta0 = {} <= K(r) <= 1/delta0 on [0, {r_max}]",
            metric.delta0
        )),
        Err(e) => {
            bundle.fail(format!("ellipticity: {e}"));
        }
    }
    let consts = metric.fit_decay_constants(r_max, 400)?;
    bundle.line(format!(
        "long-range decay constants: C0 = {:.6e}, C1 = {:.6e}, C2 = {:.6e}",
        consts[0], consts[1], consts[2]
    ));
    if config.wants("dat") {
        let samples = 400;
        let rows: Vec<Vec<f64>> = (0..=samples)
            .map(|i| {
                let r = r_max * i as f64 / samples as f64;
                vec![r, metric.k(r), metric.geodesic_radius(r)]
            })
            .collect();
        let path = out_path(config, "metric_profile.dat");
        write_dat(&path, "radial metric profile", &["r", "K", "geodesic_r"], &rows)?;
        bundle.emit(path);
    }
    Ok(bundle)
}

fn run_eigenfunction(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let metric = config.metric.to_metric(params.n)?;
    let sec = &config.eigenfunction;
    if sec.lambdas.is_empty() {
        return Err(Error::config("eigenfunction.lambdas: need ≥ 1 value".to_string()));
    }
    let cert = special_functions::certify_family(&metric, &sec.lambdas, sec.r_max, sec.dr)?;
    let mut bundle = Bundle::default();
    bundle.line(format!(
        "family certificate: c0 = {:.8}, lambda0 = {}, holds = {}",
        cert.c0, cert.lambda0, cert.holds
    ));
    if !cert.holds {
        bundle.fail("eigenfunction envelope certificate does not hold".to_string());
    }
    if config.wants("csv") {
        let rows: Vec<Vec<String>> = cert
            .per_lambda
            .iter()
            .map(|e| {
                vec![
                    format!("{:.12e}", e.lambda),
                    format!("{:.12e}", e.fitted_c0),
                    format!("{:.3e}", e.strictness_margin),
                    e.bound_holds.to_string(),
                ]
            })
            .collect();
        let path = out_path(config, "eigenfunction.csv");
        write_csv(&path, &["lambda", "fitted_c0", "strictness_margin", "bound_holds"], &rows)?;
        bundle.emit(path);
    }
    if config.wants("dat") {
        for e in &cert.per_lambda {
            let rows: Vec<Vec<f64>> = (0..e.phi.len())
                .step_by(10.max(e.phi.len() / 2000))
                .map(|j| vec![e.phi.r(j), e.phi.values[j], e.envelope(&metric, j)])
                .collect();
            let path = out_path(config, &format!("eigenfunction_lambda_{:.3}.dat", e.lambda));
            write_dat(&path, "radial eigenfunction and envelope", &["r", "phi", "envelope"], &rows)?;
            bundle.emit(path);
        }
    }
    Ok(bundle)
}

fn run_psi_decay(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let metric = config.metric.to_metric(params.n)?;
    let sec = &config.psi;
    if !(sec.lambda1 > 0.0) {
        return Err(Error::config(format!(
            "psi.lambda1: need λ₁ > 0, got {}",
            sec.lambda1
        )));
    }
    if sec.samples < 3 || !(sec.t_factor > 1.0) {
        return Err(Error::config(
            "psi.samples/t_factor: need ≥ 3 samples over a window with t_factor > 1".to_string(),
        ));
    }
    let r1 = metric.geodesic_radius(config.data.r0);
    let delta = (params.mu1 - 1.0) * (params.mu1 - 1.0) - 4.0 * params.mu2;
    if delta < 0.0 {
        return Err(Error::config(format!(
            "problem.mu2: discriminant δ = {delta} < 0 admits no real test function"
        )));
    }
    let t_star = special_functions::t_star(sec.lambda1, 0.5 * delta.sqrt())?;
    let t_hi = sec.t_factor * t_star;
    let r_needed = metric.cone_radius(t_hi, r1) + 20.0 * sec.dr;
    let tf = special_functions::TestFunction::new(
        &metric,
        sec.lambda1,
        params.mu1,
        params.mu2,
        r_needed,
        sec.dr,
    )?;
    let mut bundle = Bundle::default();
    bundle.line(format!("T_* = {t_star:.4} (decay regime onset), fit window [{t_star:.4}, {t_hi:.4}]"));

    let n_real = params.n as f64;
    let mut csv_rows = Vec::new();
    for &m in &sec.m_values {
        let target = n_real - 1.0 - (n_real - 1.0 - params.mu1) * m / 2.0;
        let mut pts = Vec::with_capacity(sec.samples);
        let mut dat_rows = Vec::with_capacity(sec.samples);
        for i in 0..sec.samples {
            let t = t_star * (t_hi / t_star).powf(i as f64 / (sec.samples - 1) as f64);
            let val = special_functions::psi_lm_integral(&tf, &metric, m, t, r1)?;
            pts.push((1.0 + t, val));
            dat_rows.push(vec![1.0 + t, val]);
        }
        let fit = fit_power_law(&pts)?;
        let ok = (fit.slope - target).abs() <= sec.tolerance;
        bundle.line(format!(
            "m = {m}: fitted decay exponent {:.4}, predicted {:.4} (n-1-(n-1-mu1)m/2), band ±{}, {}",
            fit.slope,
            target,
            sec.tolerance,
            if ok { "ok" } else { "FAIL" }
        ));
        if !ok {
            bundle.fail(format!(
                "psi decay m = {m}: fitted {:.4} outside ±{} of {:.4}",
                fit.slope, sec.tolerance, target
            ));
        }
        csv_rows.push(vec![
            format!("{m}"),
            format!("{:.12e}", fit.slope),
            format!("{:.12e}", target),
            format!("{:.3e}", (fit.slope - target).abs()),
            format!("{:.6}", fit.r_squared),
        ]);
        if config.wants("dat") {
            let path = out_path(config, &format!("psi_integral_m_{m}.dat"));
            write_dat(&path, "cone integral of psi^m against 1+t", &["one_plus_t", "integral"], &dat_rows)?;
            bundle.emit(path);
        }
    }
    if config.wants("csv") {
        let path = out_path(config, "psi_decay.csv");
        write_csv(
            &path,
            &["m", "fitted_exponent", "predicted_exponent", "abs_error", "r_squared"],
            &csv_rows,
        )?;
        bundle.emit(path);
    }
    Ok(bundle)
}

fn run_kato(config: &ExperimentConfig) -> Result<Bundle> {
    let sec = &config.kato;
    let params = sec.to_params();
    let deltas = sec.delta_list()?;
    let fit = kato_ode::scaling_sweep(&params, &deltas)?;
    let mut bundle = Bundle::default();
    bundle.line(format!(
        "kato sweep: fitted exponent {:.5}, predicted {:.5}, |rel err| = {:.3}",
        fit.fitted_exponent,
        fit.predicted_exponent,
        (fit.fitted_exponent - fit.predicted_exponent).abs() / fit.predicted_exponent
    ));
    let within = (fit.fitted_exponent - fit.predicted_exponent).abs()
        <= sec.tolerance * fit.predicted_exponent;
    if !within {
        bundle.fail(format!(
            "kato scaling: fitted {:.5} deviates more than {:.0}% from predicted {:.5}",
            fit.fitted_exponent,
            100.0 * sec.tolerance,
            fit.predicted_exponent
        ));
    }
    if config.wants("csv") {
        let rows: Vec<Vec<String>> = fit
            .points
            .iter()
            .map(|p| {
                vec![
                    format!("{:.12e}", p.delta),
                    p.t_num.map(|t| format!("{t:.12e}")).unwrap_or_default(),
                    p.blew_up.to_string(),
                    p.precision_limited.to_string(),
                    p.excluded.to_string(),
                ]
            })
            .collect();
        let path = out_path(config, "kato_sweep.csv");
        write_csv(&path, &["delta", "t_num", "blew_up", "precision_limited", "excluded"], &rows)?;
        bundle.emit(path);
    }
    if config.wants("jsonl") {
        let path = out_path(config, "kato_sweep.jsonl");
        write_jsonl(&path, &fit.points)?;
        bundle.emit(path);
    }
    if config.wants("dat") {
        let rows: Vec<Vec<f64>> = fit
            .points
            .iter()
            .filter_map(|p| p.t_num.map(|t| vec![1.0 / p.delta, t]))
            .collect();
        let path = out_path(config, "kato_scaling.dat");
        write_dat(&path, "blow-up time against 1/delta", &["inv_delta", "t_num"], &rows)?;
        bundle.emit(path);
    }
    Ok(bundle)
}

fn run_simulate(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let metric = config.metric.to_metric(params.n)?;
    let data = config.data.to_data(&metric)?;
    data.validate(&metric, &params)?;
    let solver = config.solver.to_config()?;
    let history = wave_solver::simulate(&data, &metric, &params, &solver, config.solver.sample_dt)?;
    let mut bundle = Bundle::default();
    bundle.line(format!(
        "run: stop = {}, t_end = {:.4}, crossing = {:?}, samples = {}",
        history.stop,
        history.t_end,
        history.t_cross,
        history.times.len()
    ));
    if config.wants("dat") {
        let rows: Vec<Vec<f64>> = history
            .times
            .iter()
            .zip(&history.sup_norms)
            .map(|(&t, &s)| vec![t, s])
            .collect();
        let path = out_path(config, "sup_norm.dat");
        write_dat(&path, "sup norm history", &["t", "sup"], &rows)?;
        bundle.emit(path);

        // Snapshot columns at the requested times (nearest samples).
        let mut idxs = Vec::new();
        for &want in &config.solver.snapshot_times {
            let mut best = 0usize;
            let mut err = f64::INFINITY;
            for (i, &t) in history.times.iter().enumerate() {
                if (t - want).abs() < err {
                    err = (t - want).abs();
                    best = i;
                }
            }
            if !idxs.contains(&best) {
                idxs.push(best);
            }
        }
        let mut cols = vec!["r".to_string()];
        for &i in &idxs {
            cols.push(format!("u_t{:.3}", history.times[i]));
        }
        let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
        let grid_len = history.u_snapshots[0].len();
        let stride = 1.max(grid_len / 4000);
        let mut rows = Vec::new();
        for j in (0..grid_len).step_by(stride) {
            let mut row = vec![j as f64 * history.dr];
            for &i in &idxs {
                row.push(history.u_snapshots[i][j]);
            }
            rows.push(row);
        }
        let path = out_path(config, "snapshots.dat");
        write_dat(&path, "u profiles at snapshot times", &col_refs, &rows)?;
        bundle.emit(path);
    }
    if config.wants("csv") {
        let rows: Vec<Vec<String>> = history
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                vec![
                    format!("{t:.12e}"),
                    format!("{:.12e}", history.sup_norms[i]),
                    format!("{:.12e}", history.support_edges[i]),
                ]
            })
            .collect();
        let path = out_path(config, "run_history.csv");
        write_csv(&path, &["t", "sup_norm", "support_edge"], &rows)?;
        bundle.emit(path);
    }
    Ok(bundle)
}

fn run_lifespan_sweep(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let metric = config.metric.to_metric(params.n)?;
    let data = config.data.to_data(&metric)?;
    let solver = config.solver.to_config()?;
    let eps = config.sweep.epsilon_list()?;
    let (records, fit) = wave_solver::epsilon_sweep(&data, &metric, &params, &solver, &eps)?;
    let mut bundle = Bundle::default();
    let predicted = records
        .first()
        .map(|r| (r.predicted_regime.clone(), r.predicted_exponent))
        .unwrap_or(("NoPrediction".to_string(), 0.0));
    bundle.line(format!(
        "lifespan sweep: fitted T ~ (1/eps)^{:.4} (r² = {:.5}); dominant regime {} predicts exponent {:.4}",
        fit.slope, fit.r_squared, predicted.0, -predicted.1
    ));
    for r in &records {
        bundle.line(format!(
            "  eps = {:.4}: T = {}, robust = {:?}{}",
            r.epsilon,
            r.t_num.map(|t| format!("{t:.5}")).unwrap_or("none".to_string()),
            r.robust,
            if r.flags.is_empty() {
                String::new()
            } else {
                format!(" [{}]", r.flags.join("; "))
            }
        ));
    }
    if config.wants("csv") {
        let rows: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                vec![
                    format!("{:.12e}", r.epsilon),
                    r.t_num.map(|t| format!("{t:.12e}")).unwrap_or_default(),
                    format!("{:.3e}", r.threshold),
                    format!("{:.6e}", r.dr),
                    r.flags.join("; "),
                ]
            })
            .collect();
        let path = out_path(config, "lifespan_sweep.csv");
        write_csv(&path, &["epsilon", "t_num", "threshold", "dr", "flags"], &rows)?;
        bundle.emit(path);
    }
    if config.wants("jsonl") {
        #[derive(Serialize)]
        struct Summary<'a> {
            fitted_slope: f64,
            r_squared: f64,
            predicted_regime: &'a str,
            predicted_exponent: f64,
            records: &'a [SweepRecord],
        }
        let path = out_path(config, "lifespan_sweep.jsonl");
        write_jsonl(
            &path,
            &[Summary {
                fitted_slope: fit.slope,
                r_squared: fit.r_squared,
                predicted_regime: &predicted.0,
                predicted_exponent: predicted.1,
                records: &records,
            }],
        )?;
        bundle.emit(path);
    }
    if config.wants("dat") {
        let rows: Vec<Vec<f64>> = records
            .iter()
            .filter_map(|r| r.t_num.map(|t| vec![1.0 / r.epsilon, t]))
            .collect();
        let path = out_path(config, "lifespan_scaling.dat");
        write_dat(&path, "lifespan against 1/epsilon", &["inv_epsilon", "t_num"], &rows)?;
        bundle.emit(path);
    }
    Ok(bundle)
}

fn run_functionals(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.problem.to_params()?;
    let metric = config.metric.to_metric(params.n)?;
    let data = config.data.to_data(&metric)?;
    let solver = config.solver.to_config()?;
    let history = wave_solver::simulate(&data, &metric, &params, &solver, config.solver.sample_dt)?;
    let trace = functionals::compute_trace(&history, &metric, &params, data.epsilon)?;
    let mut bundle = Bundle::default();

    let ode = functionals::check_ode_identity(&trace, &params)?;
    let n_scale = trace.n.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    bundle.line(format!(
        "ODE identity: max residual {:.3e} (N scale {:.3e})",
        ode.max_abs, n_scale
    ));

    let mono = functionals::check_monotonicity(&trace, &params)?;
    if mono.trivial_data {
        bundle.line("monotonicity: trivial data (all functionals zero)".to_string());
    }
    let mut check_rows = Vec::new();
    for c in &mono.checks {
        bundle.line(format!(
            "{}: {} (margin {:.3e}, tolerance {:.3e})",
            c.name,
            if c.passed { "ok" } else { "FAIL" },
            c.margin,
            c.tolerance
        ));
        if !c.passed {
            bundle.fail(format!("monotonicity: {} violated", c.name));
        }
        check_rows.push(vec![
            c.name.clone(),
            c.passed.to_string(),
            format!("{:.12e}", c.margin),
            format!("{:.12e}", c.tolerance),
        ]);
    }

    if params.c2 > 0.0 {
        let r_big = data.r1 / metric.delta0;
        let holder = functionals::check_holder_chain(&trace, &params, r_big)?;
        bundle.line(format!(
            "Hölder chain: kappa = {:.6e} over {} samples{}",
            holder.kappa,
            holder.samples_used,
            if holder.degenerate { " (degenerate)" } else { "" }
        ));
        if !holder.degenerate && !(holder.kappa > 0.0) {
            bundle.fail("Hölder chain: kappa not positive".to_string());
        }
        check_rows.push(vec![
            "N(t+R)^(n(q-1)) >= kappa |F|^q".to_string(),
            (holder.degenerate || holder.kappa > 0.0).to_string(),
            format!("{:.12e}", holder.kappa),
            "0".to_string(),
        ]);
    }

    if config.wants("csv") {
        let rows: Vec<Vec<String>> = (0..trace.len())
            .map(|i| {
                vec![
                    format!("{:.12e}", trace.times[i]),
                    format!("{:.12e}", trace.f[i]),
                    format!("{:.12e}", trace.g1[i]),
                    format!("{:.12e}", trace.g2[i]),
                    format!("{:.12e}", trace.h[i]),
                    format!("{:.12e}", trace.l[i]),
                    format!("{:.12e}", trace.n[i]),
                ]
            })
            .collect();
        let path = out_path(config, "functionals.csv");
        write_csv(&path, &["t", "F", "G1", "G2", "H", "L", "N"], &rows)?;
        bundle.emit(path);

        let path = out_path(config, "functional_checks.csv");
        write_csv(&path, &["check", "passed", "margin", "tolerance"], &check_rows)?;
        bundle.emit(path);
    }
    if config.wants("dat") {
        let rows: Vec<Vec<f64>> = (0..trace.len())
            .map(|i| vec![trace.times[i], trace.f[i], trace.g2[i], trace.n[i]])
            .collect();
        let path = out_path(config, "functionals.dat");
        write_dat(&path, "averaged functionals", &["t", "F", "G2", "N"], &rows)?;
        bundle.emit(path);
    }
    Ok(bundle)
}

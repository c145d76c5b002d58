//! Radial finite-difference solver for
//!
//! ∂²ₜu − Δ_g u + μ₁/(1+t)·∂ₜu + μ₂/(1+t)²·u = c₁|∂ₜu|^p + c₂|u|^q
//!
//! with small compactly supported data, blow-up detection against a sup-norm
//! threshold, and lifespan measurement over ε-sweeps.
//!
//! Time stepping is a symmetric kick-drift-kick splitting: the damping term
//! is applied exactly through the integrating factor ((1+t₀)/(1+t₁))^μ₁ over
//! each half step, the remaining acceleration Δ_g u − μ₂/(1+t)²·u + c₁|v|^p
//! + c₂|u|^q is applied in half-step kicks around the drift of u. The
//! |v|^p self-dependence of the second kick is closed with one fixed-point
//! correction, preserving second order.

use crate::error::{Error, Result};
use crate::exponents::{derive, ProblemParams};
use crate::geometry::{GridFunction, LaplaceStencil, RadialMetric};
use crate::harness::SweepRecord;
use crate::quad;
use rayon::prelude::*;

/// Relative sup-norm floor below which a value counts as numerically zero
/// when locating the support edge.
const SUPPORT_FLOOR_REL: f64 = 1e-9;

/// Smooth compactly supported radial bump shape on r ≤ R0, peak value 1 at
/// the center.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum BumpProfile {
    /// exp(1 − 1/(1 − (r/R0)²)).
    Exponential,
    /// (1 − (r/R0)²)^power; C^(power−1) at the support edge.
    Polynomial { power: u32 },
}

impl BumpProfile {
    /// Shape value at s = r/R0 ∈ [0, ∞); zero for s ≥ 1.
    pub fn evaluate(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            BumpProfile::Exponential => (1.0 - 1.0 / (1.0 - s * s)).exp(),
            BumpProfile::Polynomial { power } => (1.0 - s * s).powi(*power as i32),
        }
    }
}

/// Initial data (u, ∂ₜu)(0) = ε·(amp₀·bump₀(r/R0), amp₁·bump₁(r/R0)),
/// supported in {r ≤ R0}.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InitialData {
    pub epsilon: f64,
    pub u0_profile: BumpProfile,
    pub u1_profile: BumpProfile,
    /// Nonnegative amplitude factors (1 by default; 0 switches a component
    /// off entirely).
    pub u0_amplitude: f64,
    pub u1_amplitude: f64,
    /// Coordinate support radius.
    pub r0: f64,
    /// Geodesic support radius r̃(R0) (cone offset).
    pub r1: f64,
}

impl InitialData {
    /// Standard data: both components the exponential bump with amplitude 1.
    pub fn new(metric: &RadialMetric, epsilon: f64, r0: f64) -> Self {
        InitialData {
            epsilon,
            u0_profile: BumpProfile::Exponential,
            u1_profile: BumpProfile::Exponential,
            u0_amplitude: 1.0,
            u1_amplitude: 1.0,
            r0,
            r1: metric.geodesic_radius(r0),
        }
    }

    pub fn with_amplitudes(mut self, u0: f64, u1: f64) -> Self {
        self.u0_amplitude = u0;
        self.u1_amplitude = u1;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Checks positivity, nontriviality, and the sign condition
    /// α·∫u₀ dv_g + ∫u₁ dv_g ≥ 0 with α from the damping shift.
    pub fn validate(&self, metric: &RadialMetric, params: &ProblemParams) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config(format!(
                "data.epsilon: need ε ≥ 0 finite, got {}",
                self.epsilon
            )));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::config(format!("data.r0: need R0 > 0, got {}", self.r0)));
        }
        if self.u0_amplitude < 0.0 || self.u1_amplitude < 0.0 {
            return Err(Error::config(format!(
                "data.amplitudes: need nonnegative profiles, got ({}, {})",
                self.u0_amplitude, self.u1_amplitude
            )));
        }
        if self.u0_amplitude == 0.0 && self.u1_amplitude == 0.0 {
            return Err(Error::config(
                "data.amplitudes: u0 and u1 must not both vanish identically".to_string(),
            ));
        }
        let alpha = derive(params)?.alpha;
        let int0 = self.component_integral(metric, self.u0_profile, self.u0_amplitude);
        let int1 = self.component_integral(metric, self.u1_profile, self.u1_amplitude);
        if alpha * int0 + int1 < -1e-12 * (int0 + int1) {
            return Err(Error::config(format!(
                "data.sign_condition: α∫u₀ + ∫u₁ = {} < 0 violates the blow-up hypothesis",
                alpha * int0 + int1
            )));
        }
        Ok(())
    }

    fn component_integral(&self, metric: &RadialMetric, profile: BumpProfile, amp: f64) -> f64 {
        amp * quad::adaptive_simpson(
            &|r| profile.evaluate(r / self.r0) * metric.volume_weight(r),
            0.0,
            self.r0,
            1e-12,
        )
    }

    /// Samples ε·amp·bump(r/R0) for both components on a grid of `len` nodes.
    pub fn sample(&self, dr: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; len];
        let mut v = vec![0.0; len];
        for j in 0..len {
            let s = j as f64 * dr / self.r0;
            u[j] = self.epsilon * self.u0_amplitude * self.u0_profile.evaluate(s);
            v[j] = self.epsilon * self.u1_amplitude * self.u1_profile.evaluate(s);
        }
        (u, v)
    }
}

/// Solver state at one time level.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub t: f64,
    pub u: GridFunction,
    /// v = ∂ₜu.
    pub v: GridFunction,
    /// max(‖u‖_∞, ‖v‖_∞); v is included because derivative-nonlinearity
    /// blow-up (Glassey) concentrates in ∂ₜu while u grows only slowly.
    pub sup_norm: f64,
    /// Largest grid r with |u| or |v| above the relative support floor.
    pub support_edge: f64,
}

impl WaveState {
    pub fn from_grid(t: f64, dr: f64, u: Vec<f64>, v: Vec<f64>) -> Self {
        let (sup_norm, support_edge) = sup_and_edge(dr, &u, &v);
        WaveState {
            t,
            u: GridFunction::new(dr, u),
            v: GridFunction::new(dr, v),
            sup_norm,
            support_edge,
        }
    }
}

fn sup_and_edge(dr: f64, u: &[f64], v: &[f64]) -> (f64, f64) {
    let mut sup = 0.0f64;
    for j in 0..u.len() {
        sup = sup.max(u[j].abs()).max(v[j].abs());
    }
    let floor = SUPPORT_FLOOR_REL * sup;
    let mut edge = 0.0;
    for j in (0..u.len()).rev() {
        if u[j].abs() > floor || v[j].abs() > floor {
            edge = j as f64 * dr;
            break;
        }
    }
    (sup, edge)
}

/// Time-stepping configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub dr: f64,
    /// Courant factor against the slowest metric speed: dt ≤ cfl·dr·δ₀.
    pub cfl: f64,
    /// Sup-norm blow-up threshold M.
    pub blowup_threshold: f64,
    pub t_cap: f64,
    /// Exponent κ of the step-shrink law dt = dt_lin·min(1, (u_ref/sup)^κ);
    /// `None` selects (max(p, q) − 1)/2, which keeps the per-step nonlinear
    /// increment bounded as sup grows.
    pub shrink_exponent: Option<f64>,
    /// Reference amplitude u_ref of the shrink law.
    pub shrink_reference: f64,
}

impl SolverConfig {
    pub fn new(dr: f64, t_cap: f64) -> Self {
        SolverConfig {
            dr,
            cfl: 0.35,
            blowup_threshold: 1e6,
            t_cap,
            shrink_exponent: None,
            shrink_reference: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dr > 0.0) || !self.dr.is_finite() {
            return Err(Error::config(format!("solver.dr: need dr > 0, got {}", self.dr)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::config(format!(
                "solver.cfl: need 0 < cfl < 1, got {}",
                self.cfl
            )));
        }
        if !(self.blowup_threshold > 1.0) {
            return Err(Error::config(format!(
                "solver.blowup_threshold: need M > 1, got {}",
                self.blowup_threshold
            )));
        }
        if !(self.t_cap > 0.0) {
            return Err(Error::config(format!(
                "solver.t_cap: need t_cap > 0, got {}",
                self.t_cap
            )));
        }
        if let Some(k) = self.shrink_exponent {
            if !(k >= 0.0) {
                return Err(Error::config(format!(
                    "solver.shrink_exponent: need κ ≥ 0, got {k}"
                )));
            }
        }
        if !(self.shrink_reference > 0.0) {
            return Err(Error::config(format!(
                "solver.shrink_reference: need u_ref > 0, got {}",
                self.shrink_reference
            )));
        }
        Ok(())
    }

    fn kappa(&self, params: &ProblemParams) -> f64 {
        self.shrink_exponent.unwrap_or_else(|| {
            let top = params.p.unwrap_or(1.0).max(params.q.unwrap_or(1.0));
            0.5 * (top - 1.0).max(0.0)
        })
    }
}

/// Precomputed stepping machinery for one (metric, params, grid) triple.
pub struct Propagator<'a> {
    metric: &'a RadialMetric,
    params: &'a ProblemParams,
    stencil: LaplaceStencil,
    /// Geodesic radii of the grid nodes (cone bookkeeping).
    geodesic: Vec<f64>,
    dr: f64,
    len: usize,
    lap: Vec<f64>,
    acc: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(metric: &'a RadialMetric, params: &'a ProblemParams, dr: f64, len: usize) -> Self {
        let stencil = LaplaceStencil::new(metric, dr, len);
        let mut geodesic = Vec::with_capacity(len);
        let mut acc = 0.0;
        geodesic.push(0.0);
        for j in 1..len {
            acc += quad::gauss2(&|x| metric.k(x), (j - 1) as f64 * dr, j as f64 * dr);
            geodesic.push(acc);
        }
        Propagator {
            metric,
            params,
            stencil,
            geodesic,
            dr,
            len,
            lap: vec![0.0; len],
            acc: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn geodesic_radii(&self) -> &[f64] {
        &self.geodesic
    }

    pub fn stencil(&self) -> &LaplaceStencil {
        &self.stencil
    }

    /// Largest stable-time-step factor: wave speed in r is 1/K ≤ 1/δ₀, and
    /// the origin cell tightens the bound by 1/√n.
    pub fn dt_linear(&self, cfl: f64) -> f64 {
        let delta0 = self.metric.delta0;
        (cfl * self.dr * delta0).min(0.9 * self.dr * delta0 / (self.metric.n as f64).sqrt())
    }

    /// Acceleration a(t, u, v) = Δ_g u − μ₂/(1+t)²·u + c₁|v|^p + c₂|u|^q on
    /// nodes 0..active, written into `self.acc`.
    fn acceleration(&mut self, t: f64, u: &[f64], v: &[f64], active: usize) {
        let p = self.params;
        self.stencil.apply_range(u, &mut self.lap, active);
        let pot = p.mu2 / ((1.0 + t) * (1.0 + t));
        for j in 0..active.min(self.len) {
            let mut a = self.lap[j] - pot * u[j];
            if p.c1 != 0.0 {
                a += p.c1 * v[j].abs().powf(p.p.unwrap_or(2.0));
            }
            if p.c2 != 0.0 {
                a += p.c2 * u[j].abs().powf(p.q.unwrap_or(2.0));
            }
            self.acc[j] = a;
        }
    }

    /// One symmetric step of size dt from time t, updating u, v in place on
    /// nodes 0..active. Beyond `active` the state is untouched (and stays
    /// exactly zero when it started zero).
    pub fn step_in_place(&mut self, t: f64, u: &mut [f64], v: &mut [f64], dt: f64, active: usize) {
        let mu1 = self.params.mu1;
        let active = active.min(self.len);
        let half = 0.5 * dt;

        // Exact damping over [t, t+dt/2].
        if mu1 != 0.0 {
            let f = ((1.0 + t) / (1.0 + t + half)).powf(mu1);
            for x in v[..active].iter_mut() {
                *x *= f;
            }
        }
        // First kick at time t.
        self.acceleration(t, u, v, active);
        for j in 0..active {
            v[j] += half * self.acc[j];
        }
        // Drift.
        for j in 0..active {
            u[j] += dt * v[j];
        }
        // Second kick at time t+dt: predictor for the |v|^p self-dependence,
        // then one correction.
        let t1 = t + dt;
        self.acceleration(t1, u, v, active);
        if self.params.c1 != 0.0 {
            let prev: Vec<f64> = v[..active].to_vec();
            for j in 0..active {
                v[j] = prev[j] + half * self.acc[j];
            }
            self.acceleration(t1, u, v, active);
            for j in 0..active {
                v[j] = prev[j] + half * self.acc[j];
            }
        } else {
            for j in 0..active {
                v[j] += half * self.acc[j];
            }
        }
        // Exact damping over [t+dt/2, t+dt].
        if mu1 != 0.0 {
            let f = ((1.0 + t + half) / (1.0 + t1)).powf(mu1);
            for x in v[..active].iter_mut() {
                *x *= f;
            }
        }
    }
}

/// Advances a state by one step (convenience wrapper over [`Propagator`];
/// sweep drivers keep a propagator alive instead).
pub fn step(
    state: &WaveState,
    metric: &RadialMetric,
    params: &ProblemParams,
    dt: f64,
) -> Result<WaveState> {
    params.validate()?;
    let dr = state.u.dr;
    if !(dt > 0.0) || dt > dr * metric.delta0 {
        return Err(Error::config(format!(
            "step: dt = {dt} violates the stability bound dt ≤ cfl·dr·δ₀ = {}",
            dr * metric.delta0
        )));
    }
    let mut prop = Propagator::new(metric, params, dr, state.u.len());
    let mut u = state.u.values.clone();
    let mut v = state.v.values.clone();
    let len = u.len();
    prop.step_in_place(state.t, &mut u, &mut v, dt, len);
    Ok(WaveState::from_grid(state.t + dt, dr, u, v))
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopReason {
    /// sup-norm crossed the blow-up threshold M.
    ThresholdCrossed,
    /// t_cap reached with bounded sup-norm.
    CapReached,
    /// A non-finite value appeared; the last finite state's time is
    /// reported.
    NumericalOverflow,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::ThresholdCrossed => write!(f, "blow-up threshold crossed"),
            StopReason::CapReached => write!(f, "no blow-up before cap"),
            StopReason::NumericalOverflow => write!(f, "numerical overflow"),
        }
    }
}

/// Full time history of one run at uniform sample times (the input to the
/// functionals module), plus stop diagnostics.
#[derive(Debug, Clone)]
pub struct RunHistory {
    pub dr: f64,
    pub sample_dt: f64,
    pub times: Vec<f64>,
    /// Full-grid snapshots of u and v at `times`.
    pub u_snapshots: Vec<Vec<f64>>,
    pub v_snapshots: Vec<Vec<f64>>,
    pub sup_norms: Vec<f64>,
    pub support_edges: Vec<f64>,
    pub stop: StopReason,
    pub t_end: f64,
    /// Threshold-crossing time (log-interpolated), when the threshold was
    /// crossed.
    pub t_cross: Option<f64>,
}

impl RunHistory {
    pub fn state_at(&self, idx: usize) -> WaveState {
        WaveState::from_grid(
            self.times[idx],
            self.dr,
            self.u_snapshots[idx].clone(),
            self.v_snapshots[idx].clone(),
        )
    }
}

/// Lifespan measurement outcome.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LifespanReport {
    /// Threshold-crossing time T(M); `None` when no blow-up before cap.
    pub t_num: Option<f64>,
    pub reason: StopReason,
    /// Crossing time at the audit threshold 100·M, when reached before cap.
    pub t_num_audit: Option<f64>,
    /// T(M) and T(100M) agree within 2%.
    pub robust: Option<bool>,
    pub threshold: f64,
    pub flags: Vec<String>,
}

struct Drive {
    threshold: f64,
    audit_threshold: Option<f64>,
    sample_dt: Option<f64>,
}

struct RawRun {
    stop: StopReason,
    t_end: f64,
    t_cross: Option<f64>,
    t_cross_audit: Option<f64>,
    times: Vec<f64>,
    u_snapshots: Vec<Vec<f64>>,
    v_snapshots: Vec<Vec<f64>>,
    sup_norms: Vec<f64>,
    support_edges: Vec<f64>,
}

/// Domain size rule: the cone at t_cap, plus the dispersive front smearing
/// of the second-order stencil (the numerical front widens like (dr²·t)^(1/3)
/// past the cone), plus a 10-cell margin. Keeping the smeared front off the
/// outer boundary preserves the discrete divergence identity ∑ Δ_g u·dv = 0
/// for the whole run.
pub fn domain_nodes(metric: &RadialMetric, data: &InitialData, config: &SolverConfig) -> usize {
    let smear = 8.0 * (config.dr * config.dr * (config.t_cap + 1.0)).powf(1.0 / 3.0);
    let r_domain = metric.cone_radius(config.t_cap, data.r1) + smear + 10.0 * config.dr;
    (r_domain / config.dr).ceil() as usize + 1
}

fn advance(
    data: &InitialData,
    metric: &RadialMetric,
    params: &ProblemParams,
    config: &SolverConfig,
    drive: &Drive,
) -> Result<RawRun> {
    params.validate()?;
    config.validate()?;
    let dr = config.dr;
    let len = domain_nodes(metric, data, config);
    let (mut u, mut v) = data.sample(dr, len);
    let mut prop = Propagator::new(metric, params, dr, len);
    let dt_lin = prop.dt_linear(config.cfl);
    let kappa = config.kappa(params);
    let u_ref = config.shrink_reference;

    // The numerical domain of dependence grows at most one cell per step;
    // everything beyond `active` stays exactly zero.
    let mut active = ((data.r0 / dr).ceil() as usize + 2).min(len);

    let mut t = 0.0f64;
    let (mut sup, mut edge) = sup_and_edge(dr, &u, &v);
    let mut times = Vec::new();
    let mut u_snapshots = Vec::new();
    let mut v_snapshots = Vec::new();
    let mut sup_norms = Vec::new();
    let mut support_edges = Vec::new();
    let mut next_sample = 0.0f64;
    let mut sample_idx = 0usize;
    let mut t_cross = None;
    let mut t_cross_audit = None;

    loop {
        if let Some(sdt) = drive.sample_dt {
            if t >= next_sample - 1e-12 * sdt {
                times.push(t);
                u_snapshots.push(u.clone());
                v_snapshots.push(v.clone());
                sup_norms.push(sup);
                support_edges.push(edge);
                sample_idx += 1;
                next_sample = sample_idx as f64 * sdt;
            }
        }
        let done_threshold = match drive.audit_threshold {
            Some(hi) => sup >= hi,
            None => sup >= drive.threshold,
        };
        if done_threshold {
            return Ok(RawRun {
                stop: StopReason::ThresholdCrossed,
                t_end: t,
                t_cross,
                t_cross_audit,
                times,
                u_snapshots,
                v_snapshots,
                sup_norms,
                support_edges,
            });
        }
        if t >= config.t_cap - 1e-12 * config.t_cap {
            return Ok(RawRun {
                stop: if t_cross.is_some() {
                    StopReason::ThresholdCrossed
                } else {
                    StopReason::CapReached
                },
                t_end: t,
                t_cross,
                t_cross_audit,
                times,
                u_snapshots,
                v_snapshots,
                sup_norms,
                support_edges,
            });
        }

        let mut dt = dt_lin;
        if sup > u_ref && kappa > 0.0 {
            dt *= (u_ref / sup).powf(kappa);
        }
        dt = dt.min(config.t_cap - t);
        if let Some(sdt) = drive.sample_dt {
            let gap = next_sample - t;
            if gap > 1e-12 * sdt {
                dt = dt.min(gap);
            }
        }
        if dt < 1e-15 * (1.0 + t) {
            return Ok(RawRun {
                stop: StopReason::NumericalOverflow,
                t_end: t,
                t_cross,
                t_cross_audit,
                times,
                u_snapshots,
                v_snapshots,
                sup_norms,
                support_edges,
            });
        }

        let (t_prev, sup_prev) = (t, sup);
        prop.step_in_place(t, &mut u, &mut v, dt, active);
        t += dt;
        active = (active + 1).min(len);
        let (s, e) = sup_and_edge(dr, &u, &v);
        sup = s;
        edge = e;

        if !sup.is_finite() {
            return Ok(RawRun {
                stop: StopReason::NumericalOverflow,
                t_end: t_prev,
                t_cross,
                t_cross_audit,
                times,
                u_snapshots,
                v_snapshots,
                sup_norms,
                support_edges,
            });
        }
        if t_cross.is_none() && sup >= drive.threshold && sup_prev > 0.0 {
            t_cross = Some(log_interpolate(t_prev, sup_prev, t, sup, drive.threshold));
        }
        if let Some(hi) = drive.audit_threshold {
            if t_cross_audit.is_none() && sup >= hi && sup_prev > 0.0 {
                t_cross_audit = Some(log_interpolate(t_prev, sup_prev, t, sup, hi));
            }
        }
    }
}

fn log_interpolate(t0: f64, s0: f64, t1: f64, s1: f64, target: f64) -> f64 {
    if s1 <= s0 || s0 <= 0.0 {
        return t1;
    }
    let w = (target.ln() - s0.ln()) / (s1.ln() - s0.ln());
    t0 + w.clamp(0.0, 1.0) * (t1 - t0)
}

/// Runs a full simulation, recording full-grid snapshots every `sample_dt`
/// (the step size is clipped so samples land exactly on step times).
pub fn simulate(
    data: &InitialData,
    metric: &RadialMetric,
    params: &ProblemParams,
    config: &SolverConfig,
    sample_dt: f64,
) -> Result<RunHistory> {
    if !(sample_dt > 0.0) {
        return Err(Error::config(format!(
            "solver.sample_dt: need sample_dt > 0, got {sample_dt}"
        )));
    }
    let raw = advance(
        data,
        metric,
        params,
        config,
        &Drive {
            threshold: config.blowup_threshold,
            audit_threshold: None,
            sample_dt: Some(sample_dt),
        },
    )?;
    Ok(RunHistory {
        dr: config.dr,
        sample_dt,
        times: raw.times,
        u_snapshots: raw.u_snapshots,
        v_snapshots: raw.v_snapshots,
        sup_norms: raw.sup_norms,
        support_edges: raw.support_edges,
        stop: raw.stop,
        t_end: raw.t_end,
        t_cross: raw.t_cross,
    })
}

/// Measures the lifespan: runs until the sup-norm crosses M (then continues
/// to the 100·M audit threshold) or t_cap is reached. The reported T_num is
/// the log-interpolated M-crossing; the audit crossing must agree within 2%
/// or the run is flagged.
pub fn measure_lifespan(
    data: &InitialData,
    metric: &RadialMetric,
    params: &ProblemParams,
    config: &SolverConfig,
) -> Result<LifespanReport> {
    let m = config.blowup_threshold;
    let raw = advance(
        data,
        metric,
        params,
        config,
        &Drive {
            threshold: m,
            audit_threshold: Some(100.0 * m),
            sample_dt: None,
        },
    )?;
    let mut flags = Vec::new();
    match raw.stop {
        StopReason::CapReached => Ok(LifespanReport {
            t_num: None,
            reason: StopReason::CapReached,
            t_num_audit: None,
            robust: None,
            threshold: m,
            flags,
        }),
        StopReason::NumericalOverflow => {
            // Overflow after the M crossing is still a measured lifespan;
            // the audit is then unavailable.
            if let Some(t) = raw.t_cross {
                flags.push("overflow before audit threshold".to_string());
                Ok(LifespanReport {
                    t_num: Some(t),
                    reason: StopReason::ThresholdCrossed,
                    t_num_audit: raw.t_cross_audit,
                    robust: None,
                    threshold: m,
                    flags,
                })
            } else {
                flags.push(format!("non-finite state at t = {}", raw.t_end));
                Ok(LifespanReport {
                    t_num: Some(raw.t_end),
                    reason: StopReason::NumericalOverflow,
                    t_num_audit: None,
                    robust: None,
                    threshold: m,
                    flags,
                })
            }
        }
        StopReason::ThresholdCrossed => {
            let t_lo = raw.t_cross.unwrap_or(raw.t_end);
            let robust = match raw.t_cross_audit {
                Some(t_hi) => {
                    let ok = (t_hi - t_lo).abs() / t_lo.max(1e-300) < 0.02;
                    if !ok {
                        flags.push("slow blow-up / under-resolved".to_string());
                    }
                    Some(ok)
                }
                None => {
                    flags.push("audit threshold not reached before cap".to_string());
                    None
                }
            };
            Ok(LifespanReport {
                t_num: Some(t_lo),
                reason: StopReason::ThresholdCrossed,
                t_num_audit: raw.t_cross_audit,
                robust,
                threshold: m,
                flags,
            })
        }
    }
}

/// Runs [`measure_lifespan`] for each ε concurrently and fits
/// log T against log(1/ε). Non-blow-up runs are excluded and flagged;
/// fewer than 3 surviving points is a fit error.
pub fn epsilon_sweep(
    data_template: &InitialData,
    metric: &RadialMetric,
    params: &ProblemParams,
    config: &SolverConfig,
    eps_list: &[f64],
) -> Result<(Vec<SweepRecord>, crate::harness::FitResult)> {
    if eps_list.len() < 4 {
        return Err(Error::config(format!(
            "sweep.epsilons: need ≥ 4 values, got {}",
            eps_list.len()
        )));
    }
    for (i, &e) in eps_list.iter().enumerate() {
        if !(e > 0.0) {
            return Err(Error::config(format!("sweep.epsilons[{i}]: need ε > 0, got {e}")));
        }
        if eps_list[..i].iter().any(|&prev| prev == e) {
            return Err(Error::config(format!(
                "sweep.epsilons: duplicate value {e} degenerates the fit"
            )));
        }
    }
    let prediction = crate::exponents::classify(params)?;
    let dominant = prediction
        .iter()
        .find(|p| p.dominant)
        .cloned()
        .ok_or_else(|| Error::config("sweep: classifier produced no prediction".to_string()))?;

    let reports: Vec<Result<LifespanReport>> = eps_list
        .par_iter()
        .map(|&eps| {
            let data = data_template.clone().with_epsilon(eps);
            data.validate(metric, params)?;
            measure_lifespan(&data, metric, params, config)
        })
        .collect();

    let mut records = Vec::with_capacity(eps_list.len());
    for (&eps, report) in eps_list.iter().zip(reports) {
        let report = report?;
        let mut flags = report.flags.clone();
        if report.t_num.is_none() {
            flags.push("excluded from fit: no blow-up before cap".to_string());
        }
        records.push(SweepRecord {
            epsilon: eps,
            t_num: report.t_num,
            threshold: report.threshold,
            dr: config.dr,
            dt_policy: format!(
                "dt_lin·min(1,(u_ref/sup)^κ), κ = {:.6}, u_ref = {}",
                config.kappa(params),
                config.shrink_reference
            ),
            robust: report.robust,
            flags,
            predicted_regime: dominant.regime.to_string(),
            predicted_exponent: dominant.exponent,
            predicted_form: dominant.form,
        });
    }
    records.sort_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).unwrap());

    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.t_num.map(|t| (1.0 / r.epsilon, t)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::fit(format!(
            "sweep: only {} of {} runs blew up before cap; need ≥ 3 for the fit",
            pts.len(),
            records.len()
        )));
    }
    let fit = crate::harness::fit_power_law(&pts)?;
    Ok((records, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ProblemParams;

    fn free_params(n: u32) -> ProblemParams {
        ProblemParams {
            n,
            mu1: 0.0,
            mu2: 0.0,
            p: None,
            q: None,
            c1: 0.0,
            c2: 0.0,
        }
    }

    fn strauss_params(n: u32, q: f64) -> ProblemParams {
        ProblemParams {
            n,
            mu1: 0.0,
            mu2: 0.0,
            p: None,
            q: Some(q),
            c1: 0.0,
            c2: 1.0,
        }
    }

    #[test]
    fn zero_data_stays_exactly_zero() {
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let data = InitialData::new(&metric, 0.0, 1.0);
        let config = SolverConfig::new(0.05, 2.0);
        let history = simulate(&data, &metric, &params, &config, 0.5).unwrap();
        assert_eq!(history.stop, StopReason::CapReached);
        for snap in &history.u_snapshots {
            assert!(snap.iter().all(|&x| x == 0.0), "zero data produced nonzero u");
        }
        for snap in &history.v_snapshots {
            assert!(snap.iter().all(|&x| x == 0.0), "zero data produced nonzero v");
        }
    }

    #[test]
    fn free_wave_matches_dalembert_at_second_order() {
        // Flat n = 3, u1 = 0: u(t, r) = ((r+t)φ(r+t) + (r−t)φ(r−t))/(2r)
        // with φ the even extension of the bump.
        let metric = RadialMetric::flat(3);
        let params = free_params(3);
        let profile = BumpProfile::Exponential;
        let phi = |s: f64| profile.evaluate(s.abs());
        let exact = |t: f64, r: f64| {
            if r < 1e-9 {
                // r → 0 limit: φ(t) + t·φ'(t) by central difference.
                let h = 1e-6;
                phi(t) + t * (phi(t + h) - phi(t - h)) / (2.0 * h)
            } else {
                ((r + t) * phi(r + t) + (r - t) * phi(r - t)) / (2.0 * r)
            }
        };

        let err_at = |dr: f64| {
            let config = SolverConfig::new(dr, 1.0);
            let data = InitialData::new(&metric, 1.0, 1.0).with_amplitudes(1.0, 0.0);
            let history = simulate(&data, &metric, &params, &config, 1.0).unwrap();
            let last = history.times.len() - 1;
            assert!((history.times[last] - 1.0).abs() < 1e-9, "sample did not land on t = 1");
            let u = &history.u_snapshots[last];
            let mut worst = 0.0f64;
            for j in 0..u.len() {
                worst = worst.max((u[j] - exact(1.0, j as f64 * dr)).abs());
            }
            worst
        };
        let e1 = err_at(1.0 / 100.0);
        let e2 = err_at(1.0 / 200.0);
        // The error peaks where the ingoing pulse focuses at the origin
        // (1/r amplification); measured 1.4e−2 at this spacing.
        assert!(e1 < 2e-2, "coarse d'Alembert error {e1}");
        let ratio = e1 / e2;
        assert!(
            (3.2..4.9).contains(&ratio),
            "d'Alembert refinement ratio {ratio} (e1 = {e1}, e2 = {e2})"
        );
    }

    #[test]
    fn free_wave_energy_conserved_at_second_order() {
        let metric = RadialMetric::flat(3);
        let params = free_params(3);
        let drift_at = |dr: f64| {
            let config = SolverConfig::new(dr, 1.0);
            let data = InitialData::new(&metric, 1.0, 1.0);
            let len = domain_nodes(&metric, &data, &config);
            let (mut u, mut v) = data.sample(dr, len);
            let mut prop = Propagator::new(&metric, &params, dr, len);
            let energy = |prop: &mut Propagator, u: &[f64], v: &[f64]| {
                let mut lap = vec![0.0; u.len()];
                prop.stencil().apply(u, &mut lap);
                let lap_term = -prop.stencil().cell_inner_product(u, &lap);
                prop.stencil().cell_inner_product(v, v) + lap_term
            };
            let e0 = energy(&mut prop, &u, &v);
            let dt = prop.dt_linear(config.cfl);
            let steps = (1.0 / dt).ceil() as usize;
            for k in 0..steps {
                prop.step_in_place(k as f64 * dt, &mut u, &mut v, dt, len);
            }
            let e1 = energy(&mut prop, &u, &v);
            ((e1 - e0) / e0).abs()
        };
        let d1 = drift_at(1.0 / 50.0);
        let d2 = drift_at(1.0 / 100.0);
        assert!(d1 < 5e-3, "energy drift {d1} over unit time");
        assert!(d2 < d1 / 2.5, "energy drift did not shrink at O(dt²): {d1} → {d2}");
    }

    #[test]
    fn finite_speed_support_edge_in_cone() {
        for metric in [RadialMetric::flat(3), RadialMetric::long_range(3, 0.1, 1.0).unwrap()] {
            let params = strauss_params(3, 2.0);
            let dr = 1.0 / 100.0;
            let config = SolverConfig::new(dr, 4.0);
            let data = InitialData::new(&metric, 0.01, 1.0);
            let history = simulate(&data, &metric, &params, &config, 0.25).unwrap();
            for (idx, &t) in history.times.iter().enumerate() {
                let cone = metric.cone_radius(t, data.r1);
                let margin = 2.0 * dr + front_smear(dr, t);
                assert!(
                    history.support_edges[idx] <= cone + margin,
                    "support edge {} beyond cone {cone} + {margin} at t = {t} ({:?})",
                    history.support_edges[idx],
                    metric.profile
                );
            }
        }
    }

    /// Dispersive front smearing of the second-order stencil: the numerical
    /// front widens like (dr²·t)^(1/3) (Airy scaling), which bounds how far
    /// past the cone the support floor can be exceeded.
    fn front_smear(dr: f64, t: f64) -> f64 {
        8.0 * (dr * dr * (t + 1.0)).powf(1.0 / 3.0)
    }

    #[test]
    fn blowup_run_crosses_threshold_and_is_robust() {
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let data = InitialData::new(&metric, 2.0, 1.0);
        let config = SolverConfig::new(1.0 / 100.0, 40.0);
        let report = measure_lifespan(&data, &metric, &params, &config).unwrap();
        assert_eq!(report.reason, StopReason::ThresholdCrossed);
        let t = report.t_num.unwrap();
        assert!(t > 25.0 && t < 36.0, "T_num = {t}");
        assert_eq!(report.robust, Some(true), "flags: {:?}", report.flags);
    }

    #[test]
    fn blowup_time_self_converges_under_refinement() {
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let data = InitialData::new(&metric, 2.0, 1.0);
        let t_at = |dr: f64| {
            let config = SolverConfig::new(dr, 40.0);
            measure_lifespan(&data, &metric, &params, &config)
                .unwrap()
                .t_num
                .unwrap()
        };
        let t1 = t_at(1.0 / 50.0);
        let t2 = t_at(1.0 / 100.0);
        assert!(
            ((t1 - t2) / t2).abs() < 0.01,
            "lifespan not stable under dr halving: {t1} vs {t2}"
        );
    }

    #[test]
    fn linear_run_never_blows_up() {
        let metric = RadialMetric::flat(3);
        let params = free_params(3);
        let data = InitialData::new(&metric, 1.0, 1.0);
        let config = SolverConfig::new(1.0 / 50.0, 5.0);
        let report = measure_lifespan(&data, &metric, &params, &config).unwrap();
        assert_eq!(report.reason, StopReason::CapReached);
        assert!(report.t_num.is_none());
    }

    #[test]
    fn lifespan_monotone_in_epsilon() {
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let config = SolverConfig::new(1.0 / 50.0, 140.0);
        let mut prev = f64::INFINITY;
        for eps in [1.0, 2.0, 4.0] {
            let data = InitialData::new(&metric, eps, 1.0);
            let t = measure_lifespan(&data, &metric, &params, &config)
                .unwrap()
                .t_num
                .unwrap();
            assert!(
                t <= prev * 1.02,
                "lifespan grew with ε: T({eps}) = {t} vs previous {prev}"
            );
            prev = t;
        }
    }

    #[test]
    fn sweep_validates_input() {
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let config = SolverConfig::new(0.05, 5.0);
        let data = InitialData::new(&metric, 1.0, 1.0);
        let err = epsilon_sweep(&data, &metric, &params, &config, &[0.4, 0.2, 0.1]).unwrap_err();
        assert!(err.to_string().contains("≥ 4"), "{err}");
        let err =
            epsilon_sweep(&data, &metric, &params, &config, &[0.4, 0.2, 0.2, 0.1]).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn sign_condition_follows_the_discriminant_root() {
        // μ₁ = 0 gives α = −1: the hypothesis α∫u₀ + ∫u₁ ≥ 0 needs
        // ∫u₁ ≥ ∫u₀, so equal profiles sit exactly on the boundary while
        // u0-only data is rejected. μ₁ = 2 gives α = 0 and u0-only passes.
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let equal = InitialData::new(&metric, 1.0, 1.0);
        assert!(equal.validate(&metric, &params).is_ok());
        let u0_only = InitialData::new(&metric, 1.0, 1.0).with_amplitudes(1.0, 0.0);
        let err = u0_only.validate(&metric, &params).unwrap_err();
        assert!(err.to_string().contains("sign_condition"), "{err}");
        let mut damped = params;
        damped.mu1 = 2.0;
        assert!(u0_only.validate(&metric, &damped).is_ok());
        let bad = InitialData::new(&metric, 1.0, 1.0).with_amplitudes(1.0, -1.0);
        assert!(bad.validate(&metric, &params).is_err());
        let neither = InitialData::new(&metric, 1.0, 1.0).with_amplitudes(0.0, 0.0);
        assert!(neither.validate(&metric, &params).is_err());
    }

    #[test]
    fn step_wrapper_respects_cfl_and_matches_propagator() {
        let metric = RadialMetric::flat(3);
        let params = strauss_params(3, 2.0);
        let dr = 0.02;
        let data = InitialData::new(&metric, 1.0, 1.0);
        let (u, v) = data.sample(dr, 200);
        let state = WaveState::from_grid(0.0, dr, u.clone(), v.clone());
        assert!(step(&state, &metric, &params, 1.0).is_err(), "CFL violation accepted");

        let dt = 0.005;
        let next = step(&state, &metric, &params, dt).unwrap();
        let mut prop = Propagator::new(&metric, &params, dr, 200);
        let (mut u2, mut v2) = (u, v);
        prop.step_in_place(0.0, &mut u2, &mut v2, dt, 200);
        for j in 0..200 {
            assert_eq!(next.u.values[j], u2[j]);
            assert_eq!(next.v.values[j], v2[j]);
        }
        assert!((next.t - dt).abs() < 1e-15);
    }
}

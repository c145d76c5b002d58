//! The averaged functionals of the blow-up argument along a numerical run:
//!
//! F(t) = G₁(t) = ∫u dv_g, G₂(t) = ∫∂ₜu dv_g,
//! N(t) = ∫(c₁|∂ₜu|^p + c₂|u|^q) dv_g,
//! H(t) = (1+t)^α·F(t),
//! L(t) = (1+t)^((1+√δ)/2)·H(t) for δ ≥ 1, (1+t)·H(t) for δ < 1,
//!
//! together with the checkable pieces of the inequality chain: the averaged
//! ODE identity F'' + μ₁/(1+t)·F' + μ₂/(1+t)²·F = N, the monotonicity
//! ladder for H and L, the lower bounds G₁ ≳ ε and G₂ ≳ ε past measured
//! onset times, and the cone Hölder bound N·(t+R)^(n(q−1)) ≳ |F|^q.

use crate::error::{Error, Result};
use crate::exponents::{derive, ProblemParams};
use crate::geometry::{GridFunction, RadialMetric};
use crate::wave_solver::RunHistory;

/// Constants measured from a run family rather than quoted from the
/// existence proofs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeasuredConstants {
    /// inf of G₁/ε past the onset T₀.
    pub c1: f64,
    pub t0: f64,
    /// inf of G₂/ε past the onset T₁.
    pub c2: f64,
    pub t1: f64,
    /// Decay-regime onset of the associated test function, when one is in
    /// play (set by the CLI pipeline, not by trace computation).
    pub t_star: Option<f64>,
}

/// Functionals sampled along one run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FunctionalTrace {
    pub epsilon: f64,
    /// Damping discriminant δ = (μ₁−1)² − 4μ₂ (selects the L branch).
    pub delta: f64,
    pub alpha: f64,
    pub dr: f64,
    pub sample_dt: f64,
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    /// Identically F (both are ∫u dv_g); kept as its own series so the
    /// identity is visible in emitted tables.
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub h: Vec<f64>,
    pub l: Vec<f64>,
    pub n: Vec<f64>,
    pub branch_delta_geq_one: bool,
    pub constants: Option<MeasuredConstants>,
}

impl FunctionalTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Quadrature tolerance scale for inequality checks:
    /// τ_q = 10·(dr² + Δt²)·scale.
    pub fn quadrature_tolerance(&self, scale: f64) -> f64 {
        10.0 * (self.dr * self.dr + self.sample_dt * self.sample_dt) * scale
    }

    /// All functionals identically zero (zero data).
    pub fn is_trivial(&self) -> bool {
        self.f.iter().all(|&x| x == 0.0)
            && self.g2.iter().all(|&x| x == 0.0)
            && self.n.iter().all(|&x| x == 0.0)
    }
}

/// Computes all functionals from a run history by trapezoidal quadrature
/// with the metric volume weight.
pub fn compute_trace(
    history: &RunHistory,
    metric: &RadialMetric,
    params: &ProblemParams,
    epsilon: f64,
) -> Result<FunctionalTrace> {
    if history.times.len() < 2 {
        return Err(Error::config(format!(
            "functionals: need ≥ 2 snapshots, got {}",
            history.times.len()
        )));
    }
    for w in history.times.windows(2) {
        if ((w[1] - w[0]) - history.sample_dt).abs() > 1e-9 * history.sample_dt {
            return Err(Error::config(format!(
                "functionals: non-uniform sample spacing {} vs {}",
                w[1] - w[0],
                history.sample_dt
            )));
        }
    }
    let derived = derive(params)?;
    let (delta, alpha) = (derived.delta, derived.alpha);
    let branch = delta >= 1.0;
    let m = history.times.len();
    let mut f = Vec::with_capacity(m);
    let mut g2 = Vec::with_capacity(m);
    let mut n_series = Vec::with_capacity(m);
    let mut h = Vec::with_capacity(m);
    let mut l = Vec::with_capacity(m);
    for i in 0..m {
        let u = GridFunction::new(history.dr, history.u_snapshots[i].clone());
        let v = GridFunction::new(history.dr, history.v_snapshots[i].clone());
        let fi = u.integrate_volume(metric);
        let g2i = v.integrate_volume(metric);
        let mut nl = vec![0.0; u.len()];
        for j in 0..u.len() {
            let mut s = 0.0;
            if params.c1 != 0.0 {
                s += params.c1 * v.values[j].abs().powf(params.p.unwrap_or(2.0));
            }
            if params.c2 != 0.0 {
                s += params.c2 * u.values[j].abs().powf(params.q.unwrap_or(2.0));
            }
            nl[j] = s;
        }
        let ni = GridFunction::new(history.dr, nl).integrate_volume(metric);
        let t = history.times[i];
        let hi = (1.0 + t).powf(alpha) * fi;
        let li = if branch {
            (1.0 + t).powf(0.5 * (1.0 + delta.sqrt())) * hi
        } else {
            (1.0 + t) * hi
        };
        f.push(fi);
        g2.push(g2i);
        n_series.push(ni);
        h.push(hi);
        l.push(li);
    }
    Ok(FunctionalTrace {
        epsilon,
        delta,
        alpha,
        dr: history.dr,
        sample_dt: history.sample_dt,
        times: history.times.clone(),
        g1: f.clone(),
        f,
        g2,
        h,
        l,
        n: n_series,
        branch_delta_geq_one: branch,
        constants: None,
    })
}

/// Residual series of the averaged ODE identity
/// F'' + μ₁/(1+t)·F' + μ₂/(1+t)²·F − N at the interior samples.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OdeIdentityReport {
    /// Interior sample times (first and last are consumed by centering).
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

pub fn check_ode_identity(trace: &FunctionalTrace, params: &ProblemParams) -> Result<OdeIdentityReport> {
    if trace.len() < 5 {
        return Err(Error::config(format!(
            "functionals: ODE identity needs ≥ 5 samples, got {}",
            trace.len()
        )));
    }
    let dt = trace.sample_dt;
    let mut times = Vec::with_capacity(trace.len() - 2);
    let mut residuals = Vec::with_capacity(trace.len() - 2);
    let mut max_abs = 0.0f64;
    for i in 1..trace.len() - 1 {
        let t = trace.times[i];
        let fpp = (trace.f[i + 1] - 2.0 * trace.f[i] + trace.f[i - 1]) / (dt * dt);
        let fp = (trace.f[i + 1] - trace.f[i - 1]) / (2.0 * dt);
        let r = fpp + params.mu1 / (1.0 + t) * fp + params.mu2 / ((1.0 + t) * (1.0 + t)) * trace.f[i]
            - trace.n[i];
        times.push(t);
        residuals.push(r);
        max_abs = max_abs.max(r.abs());
    }
    Ok(OdeIdentityReport { times, residuals, max_abs })
}

/// One named inequality verdict with its margin and tolerance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub passed: bool,
    /// Worst signed slack (≥ −tolerance passes).
    pub margin: f64,
    pub tolerance: f64,
}

/// Verdicts of the monotonicity ladder.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonotonicityReport {
    pub checks: Vec<InequalityCheck>,
    /// Zero data: everything passes degenerately.
    pub trivial_data: bool,
    /// Fitted constant of the lower envelope L(t) ≥ c·ε·(1+t)^((1+√δ)/2)
    /// (δ ≥ 1) or L(t) ≥ c·ε·(1+t) (δ < 1).
    pub fitted_lower_c: f64,
}

impl MonotonicityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks, at quadrature tolerance:
/// (i) (1+t)^(1+√δ)·H'(t) nondecreasing;
/// (ii) H(t) ≥ H(0);
/// (iii) L nondecreasing (δ ≥ 1 branch only);
/// (iv) L admits a positive lower envelope constant.
pub fn check_monotonicity(trace: &FunctionalTrace, params: &ProblemParams) -> Result<MonotonicityReport> {
    if trace.len() < 5 {
        return Err(Error::config(format!(
            "functionals: monotonicity needs ≥ 5 samples, got {}",
            trace.len()
        )));
    }
    let derived = derive(params)?;
    let delta = derived.delta;
    let trivial = trace.is_trivial();
    let dt = trace.sample_dt;
    let mut checks = Vec::new();

    // (i) weighted H' nondecreasing.
    let mut w = Vec::with_capacity(trace.len() - 2);
    for i in 1..trace.len() - 1 {
        let hp = (trace.h[i + 1] - trace.h[i - 1]) / (2.0 * dt);
        w.push((1.0 + trace.times[i]).powf(1.0 + delta.sqrt()) * hp);
    }
    let w_scale = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol_w = trace.quadrature_tolerance(w_scale.max(1e-300)) / dt;
    let worst_incr = w.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    let margin_i = if w.len() < 2 { 0.0 } else { worst_incr };
    checks.push(InequalityCheck {
        name: "(1+t)^(1+sqrt(delta)) H' nondecreasing".to_string(),
        passed: trivial || margin_i >= -tol_w,
        margin: margin_i,
        tolerance: tol_w,
    });

    // (ii) H ≥ H(0).
    let h_scale = trace.h.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol_h = trace.quadrature_tolerance(h_scale.max(1e-300));
    let margin_ii = trace
        .h
        .iter()
        .map(|&hi| hi - trace.h[0])
        .fold(f64::INFINITY, f64::min);
    checks.push(InequalityCheck {
        name: "H(t) >= H(0)".to_string(),
        passed: trivial || margin_ii >= -tol_h,
        margin: margin_ii,
        tolerance: tol_h,
    });

    // (iii) L nondecreasing, stated for δ ≥ 1 only.
    if trace.branch_delta_geq_one {
        let l_scale = trace.l.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let tol_l = trace.quadrature_tolerance(l_scale.max(1e-300));
        let margin_iii = trace
            .l
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(f64::INFINITY, f64::min);
        checks.push(InequalityCheck {
            name: "L nondecreasing (delta >= 1)".to_string(),
            passed: trivial || margin_iii >= -tol_l,
            margin: margin_iii,
            tolerance: tol_l,
        });
    }

    // (iv) positive lower envelope for L.
    let pow = if trace.branch_delta_geq_one {
        0.5 * (1.0 + delta.sqrt())
    } else {
        1.0
    };
    let mut c_fit = f64::INFINITY;
    for i in 0..trace.len() {
        let envelope = trace.epsilon * (1.0 + trace.times[i]).powf(pow);
        c_fit = c_fit.min(trace.l[i] / envelope);
    }
    if !c_fit.is_finite() {
        c_fit = 0.0;
    }
    checks.push(InequalityCheck {
        name: "L(t) >= c eps (1+t)^power".to_string(),
        passed: trivial || c_fit > 0.0,
        margin: c_fit,
        tolerance: 0.0,
    });

    Ok(MonotonicityReport {
        checks,
        trivial_data: trivial,
        fitted_lower_c: if trivial { 0.0 } else { c_fit },
    })
}

/// Per-ε lower-bound measurement.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LowerBoundEntry {
    pub epsilon: f64,
    pub c1: f64,
    pub t0: f64,
    pub c2: f64,
    pub t1: f64,
}

/// Family report for G₁ ≥ C₁ε (t ≥ T₀) and G₂ ≥ C₂ε (t ≥ T₁ = C₃ln(1/ε)).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LowerBoundReport {
    pub per_epsilon: Vec<LowerBoundEntry>,
    /// Slope of T₁ against ln(1/ε).
    pub c3_slope: f64,
    /// T₁ growth is consistent with at-most-logarithmic: nonnegative slope
    /// and residuals within 30% of the fitted spread (or the spread is
    /// below absolute noise).
    pub log_consistent: bool,
}

/// Onset rule: earliest sample time from which the series stays at or above
/// half the median of its last quarter. `None` when the series never
/// stabilizes above zero.
fn onset_time(times: &[f64], series: &[f64]) -> Option<(usize, f64)> {
    let m = series.len();
    if m < 4 {
        return None;
    }
    let mut tail: Vec<f64> = series[(3 * m) / 4..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = tail[tail.len() / 2];
    if !(median > 0.0) {
        return None;
    }
    let target = 0.5 * median;
    let mut onset = None;
    for i in (0..m).rev() {
        if series[i] < target {
            break;
        }
        onset = Some(i);
    }
    onset.map(|i| (i, times[i]))
}

/// Measures (C₁, T₀) and (C₂, T₁) for each trace, writes them into the
/// traces' `constants`, and fits T₁ against ln(1/ε).
pub fn check_lower_bounds(traces: &mut [FunctionalTrace]) -> Result<LowerBoundReport> {
    if traces.len() < 3 {
        return Err(Error::fit(format!(
            "functionals: lower-bound family needs ≥ 3 ε values, got {}",
            traces.len()
        )));
    }
    let mut per_epsilon = Vec::with_capacity(traces.len());
    for trace in traces.iter_mut() {
        let (i0, t0) = onset_time(&trace.times, &trace.g1).ok_or_else(|| {
            Error::fit(format!(
                "functionals: G1 never stabilizes above 0 for eps = {}",
                trace.epsilon
            ))
        })?;
        let c1 = trace.g1[i0..]
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x / trace.epsilon));
        let (i1, t1) = onset_time(&trace.times, &trace.g2).ok_or_else(|| {
            Error::fit(format!(
                "functionals: G2 never stabilizes above 0 for eps = {}",
                trace.epsilon
            ))
        })?;
        let c2 = trace.g2[i1..]
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x / trace.epsilon));
        let entry = LowerBoundEntry {
            epsilon: trace.epsilon,
            c1,
            t0,
            c2,
            t1,
        };
        trace.constants = Some(MeasuredConstants {
            c1,
            t0,
            c2,
            t1,
            t_star: trace.constants.and_then(|c| c.t_star),
        });
        per_epsilon.push(entry);
    }
    per_epsilon.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());

    // T₁ against ln(1/ε), plain least squares.
    let n = per_epsilon.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for e in &per_epsilon {
        let x = (1.0 / e.epsilon).ln();
        sx += x;
        sy += e.t1;
        sxx += x * x;
        sxy += x * e.t1;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(Error::fit(
            "functionals: degenerate ε values in lower-bound family".to_string(),
        ));
    }
    let c3 = (n * sxy - sx * sy) / denom;
    let intercept = (sy - c3 * sx) / n;
    let spread = per_epsilon
        .iter()
        .map(|e| e.t1)
        .fold(f64::NEG_INFINITY, f64::max)
        - per_epsilon.iter().map(|e| e.t1).fold(f64::INFINITY, f64::min);
    let noise_floor = 2.0 * traces[0].sample_dt;
    let mut worst_resid = 0.0f64;
    for e in &per_epsilon {
        let fit = intercept + c3 * (1.0 / e.epsilon).ln();
        worst_resid = worst_resid.max((e.t1 - fit).abs());
    }
    let log_consistent =
        c3 >= -noise_floor && (spread <= noise_floor || worst_resid <= 0.3 * spread);
    Ok(LowerBoundReport {
        per_epsilon,
        c3_slope: c3,
        log_consistent,
    })
}

/// Cone Hölder verdict: κ = min over samples of N·(t+R)^(n(q−1))/|F|^q.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HolderReport {
    pub kappa: f64,
    /// No sample had F ≠ 0 (zero solution): 0 ≥ 0 passes degenerately.
    pub degenerate: bool,
    pub samples_used: usize,
}

/// Verifies N(t)·(t+R)^(n(q−1)) ≥ κ·|F(t)|^q pointwise in sampled t with
/// the largest such κ; R is the enlarged-cone radius R₁/δ₀.
pub fn check_holder_chain(
    trace: &FunctionalTrace,
    params: &ProblemParams,
    r_enlarged: f64,
) -> Result<HolderReport> {
    if params.c2 <= 0.0 {
        return Err(Error::config(format!(
            "functionals: Hölder chain needs c2 > 0, got {}",
            params.c2
        )));
    }
    let q = params
        .q
        .ok_or_else(|| Error::config("functionals: Hölder chain needs q".to_string()))?;
    let n_dim = params.n as f64;
    let mut kappa = f64::INFINITY;
    let mut used = 0usize;
    for i in 0..trace.len() {
        let fi = trace.f[i].abs();
        if fi == 0.0 {
            continue;
        }
        used += 1;
        let lhs = trace.n[i] * (trace.times[i] + r_enlarged).powf(n_dim * (q - 1.0));
        kappa = kappa.min(lhs / fi.powf(q));
    }
    if used == 0 {
        return Ok(HolderReport {
            kappa: 0.0,
            degenerate: true,
            samples_used: 0,
        });
    }
    Ok(HolderReport {
        kappa,
        degenerate: false,
        samples_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadialMetric;
    use crate::wave_solver::{simulate, InitialData, SolverConfig};

    fn params(n: u32, mu1: f64, mu2: f64, q: f64) -> ProblemParams {
        ProblemParams {
            n,
            mu1,
            mu2,
            p: None,
            q: Some(q),
            c1: 0.0,
            c2: 1.0,
        }
    }

    fn linear_params(n: u32, mu1: f64) -> ProblemParams {
        ProblemParams {
            n,
            mu1,
            mu2: 0.0,
            p: None,
            q: None,
            c1: 0.0,
            c2: 0.0,
        }
    }

    fn run_trace(
        metric: &RadialMetric,
        p: &ProblemParams,
        eps: f64,
        dr: f64,
        t_cap: f64,
        sample_dt: f64,
    ) -> FunctionalTrace {
        let data = InitialData::new(metric, eps, 1.0);
        let config = SolverConfig::new(dr, t_cap);
        let history = simulate(&data, metric, p, &config, sample_dt).unwrap();
        compute_trace(&history, metric, p, eps).unwrap()
    }

    #[test]
    fn zero_solution_gives_zero_functionals_and_degenerate_passes() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let trace = run_trace(&metric, &p, 0.0, 0.05, 2.0, 0.25);
        assert!(trace.is_trivial());
        assert!(trace.f.iter().all(|&x| x == 0.0));
        let mono = check_monotonicity(&trace, &p).unwrap();
        assert!(mono.trivial_data && mono.all_passed());
        let ode = check_ode_identity(&trace, &p).unwrap();
        assert_eq!(ode.max_abs, 0.0);
        let holder = check_holder_chain(&trace, &p, 1.0).unwrap();
        assert!(holder.degenerate && holder.kappa == 0.0);
    }

    #[test]
    fn initial_values_match_data_integrals() {
        // H(0) = ε·∫u0 dv_g and G2(0) = ε·∫u1 dv_g; G2(0) also agrees with
        // the forward difference of F at 0 to sampling order.
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let eps = 0.01;
        let trace = run_trace(&metric, &p, eps, 0.01, 1.0, 0.05);
        let data = InitialData::new(&metric, eps, 1.0);
        let len = crate::wave_solver::domain_nodes(&metric, &data, &SolverConfig::new(0.01, 1.0));
        let (u0, u1) = data.sample(0.01, len);
        let int0 = GridFunction::new(0.01, u0).integrate_volume(&metric);
        let int1 = GridFunction::new(0.01, u1).integrate_volume(&metric);
        assert!((trace.h[0] - int0).abs() < 1e-12 * int0.abs(), "H(0) = {}", trace.h[0]);
        assert!(trace.h[0] > 0.0);
        assert!((trace.g2[0] - int1).abs() < 1e-12 * int1.abs());
        let fd = (trace.f[1] - trace.f[0]) / trace.sample_dt;
        assert!(
            (fd - trace.g2[0]).abs() < 0.1 * trace.g2[0].abs(),
            "G2(0) = {} vs ΔF = {fd}",
            trace.g2[0]
        );
    }

    #[test]
    fn g1_equals_f_and_g2_differences_f() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let trace = run_trace(&metric, &p, 0.05, 0.01, 2.0, 0.1);
        assert_eq!(trace.f, trace.g1);
        // Interior samples: centered difference of F matches G2 at O(dt²).
        let dt = trace.sample_dt;
        let scale = trace.g2.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        for i in 1..trace.len() - 1 {
            let fd = (trace.f[i + 1] - trace.f[i - 1]) / (2.0 * dt);
            assert!(
                (fd - trace.g2[i]).abs() < 0.02 * scale,
                "G2 vs dF/dt mismatch at i = {i}: {} vs {fd}",
                trace.g2[i]
            );
        }
    }

    #[test]
    fn ode_identity_residual_refines_at_second_order() {
        // Linear damped run: the identity has no N term, the residual is
        // pure discretization error and must shrink ~4x under halving both
        // dr and the sample step.
        let metric = RadialMetric::flat(3);
        let p = linear_params(3, 2.0);
        let max_at = |dr: f64, sdt: f64| {
            let trace = run_trace(&metric, &p, 1.0, dr, 2.0, sdt);
            check_ode_identity(&trace, &p).unwrap().max_abs
        };
        let r1 = max_at(0.02, 0.1);
        let r2 = max_at(0.01, 0.05);
        let ratio = r1 / r2;
        assert!(
            (2.8..6.0).contains(&ratio),
            "ODE identity refinement ratio {ratio} (r1 = {r1}, r2 = {r2})"
        );
    }

    #[test]
    fn dropping_the_nonlinearity_leaves_a_residual_of_size_n() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let trace = run_trace(&metric, &p, 1.0, 0.01, 2.0, 0.05);
        let with_n = check_ode_identity(&trace, &p).unwrap();
        // Rebuild the residual without subtracting N: it must track N.
        let n_interior = &trace.n[1..trace.len() - 1];
        let n_max = n_interior.iter().fold(0.0f64, |m, &x| m.max(x));
        let mut no_n_max = 0.0f64;
        for (i, r) in with_n.residuals.iter().enumerate() {
            no_n_max = no_n_max.max((r + n_interior[i]).abs());
        }
        assert!(
            no_n_max > 0.5 * n_max && with_n.max_abs < 0.1 * n_max,
            "dropped-N residual {no_n_max} should be of size N ({n_max}), kept-N {}",
            with_n.max_abs
        );
    }

    #[test]
    fn monotonicity_ladder_passes_on_strauss_run() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let trace = run_trace(&metric, &p, 0.1, 0.01, 4.0, 0.1);
        let report = check_monotonicity(&trace, &p).unwrap();
        assert!(!report.trivial_data);
        for check in &report.checks {
            assert!(
                check.passed,
                "{} failed: margin {}, tolerance {}",
                check.name, check.margin, check.tolerance
            );
        }
        assert!(report.fitted_lower_c > 0.0);
    }

    #[test]
    fn out_of_hypothesis_data_can_break_monotonicity() {
        // u1 strongly negative violates the sign condition (validate would
        // reject it); H then dips below H(0).
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let mut data = InitialData::new(&metric, 0.1, 1.0);
        data.u1_amplitude = -5.0;
        assert!(data.validate(&metric, &p).is_err());
        let config = SolverConfig::new(0.01, 4.0);
        let history = simulate(&data, &metric, &p, &config, 0.1).unwrap();
        let trace = compute_trace(&history, &metric, &p, 0.1).unwrap();
        let report = check_monotonicity(&trace, &p).unwrap();
        assert!(
            report.checks.iter().any(|c| !c.passed),
            "sign-violating data passed every monotonicity check"
        );
    }

    #[test]
    fn lower_bounds_stabilize_on_strauss_family() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let mut traces: Vec<FunctionalTrace> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| run_trace(&metric, &p, e, 0.02, 6.0, 0.2))
            .collect();
        let report = check_lower_bounds(&mut traces).unwrap();
        for entry in &report.per_epsilon {
            assert!(entry.c1 > 0.0, "C1 = {} at eps = {}", entry.c1, entry.epsilon);
            assert!(entry.c2 > 0.0, "C2 = {} at eps = {}", entry.c2, entry.epsilon);
        }
        // Undamped runs have G2 nondecreasing from t = 0, so T1 stays at the
        // first sample and the ln(1/ε) fit is flat.
        assert!(report.log_consistent, "c3 = {}", report.c3_slope);
        assert!(traces[0].constants.is_some());
        // C1 stable across ε at the linear-regime level.
        let c1s: Vec<f64> = report.per_epsilon.iter().map(|e| e.c1).collect();
        let spread = (c1s.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - c1s.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
            / c1s[0];
        assert!(spread < 0.5, "C1 family spread {spread}: {c1s:?}");
    }

    #[test]
    fn damped_free_wave_g2_decays() {
        // Probe outside the lower-bound hypotheses: linear run with μ₁ = 2
        // has G2 ∝ (1+t)^(−2).
        let metric = RadialMetric::flat(3);
        let p = linear_params(3, 2.0);
        let trace = run_trace(&metric, &p, 1.0, 0.02, 3.0, 0.25);
        let first = trace.g2[1];
        let last = *trace.g2.last().unwrap();
        assert!(
            last < first,
            "damped G2 did not decay: {first} → {last}"
        );
        let want = (1.0 + trace.times[1]).powi(2) / (1.0 + trace.times.last().unwrap()).powi(2);
        let got = last / first;
        assert!(
            (got - want).abs() < 0.2 * want,
            "G2 decay ratio {got}, expected ≈ {want}"
        );
    }

    #[test]
    fn holder_constant_positive_and_scale_invariant() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let r_big = 1.0 / metric.delta0;
        let t1 = run_trace(&metric, &p, 1e-3, 0.02, 3.0, 0.2);
        let t2 = run_trace(&metric, &p, 2e-3, 0.02, 3.0, 0.2);
        let k1 = check_holder_chain(&t1, &p, r_big).unwrap();
        let k2 = check_holder_chain(&t2, &p, r_big).unwrap();
        assert!(k1.kappa > 0.0 && !k1.degenerate);
        // In the linear regime u scales with ε, both sides scale by ε^q.
        assert!(
            ((k1.kappa - k2.kappa) / k1.kappa).abs() < 0.05,
            "Hölder κ not scale invariant: {} vs {}",
            k1.kappa,
            k2.kappa
        );
    }

    #[test]
    fn holder_varies_with_profile_but_stays_positive() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let r_big = 1.0 / metric.delta0;
        let config = SolverConfig::new(0.02, 3.0);
        let mut kappas = Vec::new();
        for profile in [
            crate::wave_solver::BumpProfile::Exponential,
            crate::wave_solver::BumpProfile::Polynomial { power: 4 },
        ] {
            let mut data = InitialData::new(&metric, 0.01, 1.0);
            data.u0_profile = profile;
            data.u1_profile = profile;
            let history = simulate(&data, &metric, &p, &config, 0.2).unwrap();
            let trace = compute_trace(&history, &metric, &p, 0.01).unwrap();
            let rep = check_holder_chain(&trace, &p, r_big).unwrap();
            assert!(rep.kappa > 0.0, "κ = {} for {profile:?}", rep.kappa);
            kappas.push(rep.kappa);
        }
        assert!(kappas[0] != kappas[1], "κ should depend on the profile");
    }

    #[test]
    fn arity_errors_are_named() {
        let metric = RadialMetric::flat(3);
        let p = params(3, 0.0, 0.0, 2.0);
        let trace = run_trace(&metric, &p, 0.1, 0.05, 0.5, 0.25);
        assert!(trace.len() < 5);
        assert!(check_ode_identity(&trace, &p).is_err());
        let mut short: Vec<FunctionalTrace> = vec![trace.clone()];
        assert!(check_lower_bounds(&mut short).is_err());
    }
}

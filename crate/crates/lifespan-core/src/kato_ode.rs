//! The Kato-type blow-up lemma as an executable oracle.
//!
//! The lemma: if F'' ≥ k(1+t)^(−α)·F^β with β > 1, a ≥ 1,
//! (β−1)a > α − 2, and F stays above the envelope δ(1+t)^a, then F blows up
//! in finite time T ≤ c·δ^(−γ) with γ = (β−1)/((β−1)a − α + 2). This module
//! integrates the extremal equality ODE, extrapolates the blow-up time from
//! the local power form near the singularity, and fits the measured
//! T-versus-δ slope for comparison with γ.

use crate::error::{Error, Result};

/// Blow-up declaration threshold for F.
const BLOWUP_THRESHOLD: f64 = 1e12;
/// Samples with F above this enter the blow-up time fit.
const FIT_WINDOW_LO: f64 = 1e9;
/// Default relative tolerance of the adaptive integrator.
const DEFAULT_RTOL: f64 = 1e-8;

/// Parameters of the extremal ODE F'' = k(1+t)^(−α)·F^β and of the lower
/// envelope δ(1+t)^a.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KatoParams {
    /// Superlinearity β > 1.
    pub beta: f64,
    /// Envelope growth rate a ≥ 1.
    pub a: f64,
    /// Weight decay α in (1+t)^(−α).
    pub kato_alpha: f64,
    /// Forcing constant k > 0.
    pub k: f64,
    /// Envelope amplitude δ > 0.
    pub delta_small: f64,
    /// F(0).
    pub f0: f64,
    /// F'(0).
    pub f0p: f64,
}

impl KatoParams {
    /// Checks the full lemma hypotheses: β > 1, a ≥ 1,
    /// (β−1)a > α − 2, k > 0, δ > 0, and F(0) ≥ δ (the envelope holds at
    /// t = 0).
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(Error::config(format!(
                "kato.beta: need β > 1, got {}",
                self.beta
            )));
        }
        if !(self.a >= 1.0) {
            return Err(Error::config(format!("kato.a: need a ≥ 1, got {}", self.a)));
        }
        if !((self.beta - 1.0) * self.a > self.kato_alpha - 2.0) {
            return Err(Error::config(format!(
                "kato.kato_alpha: need (β−1)a > α − 2, got (β−1)a = {} ≤ α − 2 = {}",
                (self.beta - 1.0) * self.a,
                self.kato_alpha - 2.0
            )));
        }
        if !(self.k > 0.0) {
            return Err(Error::config(format!("kato.k: need k > 0, got {}", self.k)));
        }
        if !(self.delta_small > 0.0) {
            return Err(Error::config(format!(
                "kato.delta_small: need δ > 0, got {}",
                self.delta_small
            )));
        }
        if !(self.f0 >= self.delta_small) {
            return Err(Error::config(format!(
                "kato.f0: need F(0) ≥ δ so the envelope holds at t = 0, got F(0) = {} < δ = {}",
                self.f0, self.delta_small
            )));
        }
        Ok(())
    }

    /// The weaker preconditions under which the equality ODE itself is
    /// integrable: β > 1 (local blow-up form exists), k ≥ 0, positive data.
    /// Hypothesis-violating parameter probes (large α, k = 0) are admitted
    /// here on purpose; only the lemma's bound needs the full hypotheses.
    fn validate_integration(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(Error::config(format!(
                "kato.beta: need β > 1, got {}",
                self.beta
            )));
        }
        if !(self.k >= 0.0) {
            return Err(Error::config(format!("kato.k: need k ≥ 0, got {}", self.k)));
        }
        if !(self.f0 > 0.0 && self.f0p >= 0.0) {
            return Err(Error::config(format!(
                "kato.f0: need F(0) > 0 and F'(0) ≥ 0, got ({}, {})",
                self.f0, self.f0p
            )));
        }
        Ok(())
    }
}

/// The lemma's lifespan-bound exponent γ = (β−1)/((β−1)a − α + 2), so that
/// T ≤ c·δ^(−γ).
pub fn predicted_bound_exponent(params: &KatoParams) -> Result<f64> {
    params.validate()?;
    Ok((params.beta - 1.0) / ((params.beta - 1.0) * params.a - params.kato_alpha + 2.0))
}

/// Outcome of one extremal-ODE integration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlowupReport {
    pub blew_up: bool,
    /// Extrapolated blow-up time (fit of F ~ A(T−t)^(−2/(β−1)) across the
    /// final growth decades); `None` when t_cap was reached with bounded F.
    pub t_num: Option<f64>,
    /// Set when step underflow forced termination before the threshold; the
    /// reported time is then the current t rather than an extrapolation.
    pub precision_limited: bool,
    /// Last integrated time.
    pub t_end: f64,
    /// Last integrated value of F.
    pub f_end: f64,
}

/// Integrates F'' = k(1+t)^(−α)·F^β from (F(0), F'(0)) = (f0, f0p) with the
/// default tolerance, declaring blow-up when F exceeds 1e12.
pub fn integrate_blowup(params: &KatoParams, t_cap: f64) -> Result<BlowupReport> {
    integrate_blowup_with_tol(params, t_cap, DEFAULT_RTOL)
}

/// [`integrate_blowup`] with an explicit relative tolerance (the
/// self-convergence knob).
pub fn integrate_blowup_with_tol(params: &KatoParams, t_cap: f64, rtol: f64) -> Result<BlowupReport> {
    integrate(params, t_cap, rtol, false)
}

/// One δ-point of a scaling sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub t_num: Option<f64>,
    pub blew_up: bool,
    pub precision_limited: bool,
    /// Point excluded from the fit (no blow-up before the cap).
    pub excluded: bool,
}

/// Fitted δ-scaling of the blow-up time against the lemma's bound.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingFit {
    /// Least-squares slope of log T against log(1/δ).
    pub fitted_exponent: f64,
    /// The lemma's γ for these parameters.
    pub predicted_exponent: f64,
    pub points: Vec<SweepPoint>,
}

/// Runs [`integrate_blowup`] for each δ with data F(0) = δ, F'(0) = δ·a on
/// the envelope, and fits the slope of log T against log(1/δ).
///
/// The integration enforces the lemma's standing hypothesis
/// F(t) ≥ δ(1+t)^a as a floor (in the PDE application that envelope is
/// maintained by a separate mechanism, not by the extremal ODE itself; for
/// a = 1 the floor is inert because F is convex and starts tangent to it).
pub fn scaling_sweep(params: &KatoParams, delta_list: &[f64]) -> Result<ScalingFit> {
    if delta_list.len() < 3 {
        return Err(Error::fit(format!(
            "scaling_sweep: need ≥ 3 δ points to fit, got {}",
            delta_list.len()
        )));
    }
    let mut probe = *params;
    probe.delta_small = delta_list.iter().copied().fold(f64::INFINITY, f64::min);
    probe.f0 = probe.delta_small;
    probe.f0p = probe.delta_small * probe.a;
    probe.validate()?;
    let gamma = predicted_bound_exponent(&probe)?;
    let t_cap = 1e3 * probe.delta_small.powf(-gamma) + 1e3;

    let mut points = Vec::with_capacity(delta_list.len());
    for &delta in delta_list {
        let mut p = *params;
        p.delta_small = delta;
        p.f0 = delta;
        p.f0p = delta * p.a;
        let report = integrate(&p, t_cap, DEFAULT_RTOL, true)?;
        points.push(SweepPoint {
            delta,
            t_num: report.t_num,
            blew_up: report.blew_up,
            precision_limited: report.precision_limited,
            excluded: !report.blew_up,
        });
    }

    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.excluded)
        .filter_map(|p| p.t_num.map(|t| (1.0 / p.delta, t)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::fit(format!(
            "scaling_sweep: only {} of {} δ points blew up before t = {t_cap:.3e}; need ≥ 3",
            pts.len(),
            delta_list.len()
        )));
    }
    let fit = crate::harness::fit_power_law(&pts)?;
    Ok(ScalingFit {
        fitted_exponent: fit.slope,
        predicted_exponent: gamma,
        points,
    })
}

/// Cash–Karp embedded RK45 on (F, F') with step control from the embedded
/// error estimate plus a policy cap dt ≲ 0.1/ω, ω² = βk(1+t)^(−α)F^(β−1)
/// (the local growth rate), so steps shrink ∝ F^(−(β−1)/2) near blow-up.
fn integrate(params: &KatoParams, t_cap: f64, rtol: f64, envelope_floor: bool) -> Result<BlowupReport> {
    params.validate_integration()?;
    if !(t_cap > 0.0) {
        return Err(Error::config(format!("kato: need t_cap > 0, got {t_cap}")));
    }
    let (beta, alpha, k) = (params.beta, params.kato_alpha, params.k);
    let (delta, a) = (params.delta_small, params.a);
    let atol = 1e-12 * params.f0;
    let rhs = |t: f64, y: [f64; 2]| -> [f64; 2] {
        [y[1], k * (1.0 + t).powf(-alpha) * y[0].powf(beta)]
    };

    let mut t = 0.0f64;
    let mut y = [params.f0, params.f0p];
    let mut dt = 1e-3f64;
    let mut fit_samples: Vec<(f64, f64)> = Vec::new();
    let mut precision_limited = false;

    loop {
        if y[0] >= BLOWUP_THRESHOLD {
            break;
        }
        if t >= t_cap {
            return Ok(BlowupReport {
                blew_up: false,
                t_num: None,
                precision_limited: false,
                t_end: t,
                f_end: y[0],
            });
        }
        // Policy cap from the local growth rate, plus a cap against
        // overshooting t_cap and a mild absolute growth cap.
        let omega2 = beta * k * (1.0 + t).powf(-alpha) * y[0].powf(beta - 1.0);
        let mut dt_max = 0.1 * (1.0 + t);
        if omega2 > 0.0 {
            dt_max = dt_max.min(0.1 / omega2.sqrt());
        }
        dt = dt.min(dt_max).min(t_cap - t);
        if dt < 1e-14 * (1.0 + t) {
            precision_limited = true;
            break;
        }

        let (y_new, err) = cash_karp_step(&rhs, t, y, dt);
        let scale0 = atol + rtol * (y[0].abs() + dt * y[1].abs());
        let scale1 = atol + rtol * (y[1].abs() + dt * rhs(t, y)[1].abs());
        let err_ratio = (err[0] / scale0).abs().max((err[1] / scale1).abs());
        if err_ratio <= 1.0 {
            t += dt;
            y = y_new;
            if envelope_floor {
                let floor = delta * (1.0 + t).powf(a);
                if y[0] < floor {
                    y[0] = floor;
                    y[1] = y[1].max(delta * a * (1.0 + t).powf(a - 1.0));
                }
            }
            if y[0] >= FIT_WINDOW_LO {
                fit_samples.push((t, y[0]));
            }
        }
        let grow = if err_ratio > 0.0 {
            (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        dt *= grow;
    }

    if precision_limited {
        return Ok(BlowupReport {
            blew_up: true,
            t_num: Some(t),
            precision_limited: true,
            t_end: t,
            f_end: y[0],
        });
    }

    // Local form near blow-up: F ~ A(T−t)^(−2/(β−1)), so F^(−(β−1)/2) is
    // asymptotically linear in t with root T. Least-squares line through the
    // collected tail samples, root extraction.
    let ys: Vec<(f64, f64)> = fit_samples
        .iter()
        .map(|&(t, f)| (t, f.powf(-0.5 * (beta - 1.0))))
        .collect();
    if ys.len() < 3 {
        return Err(Error::solver(format!(
            "kato: only {} samples in the blow-up fit window; cannot extrapolate T",
            ys.len()
        )));
    }
    let n = ys.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in &ys {
        st += t;
        sy += v;
        stt += t * t;
        sty += t * v;
    }
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    let intercept = (sy - slope * st) / n;
    if !(slope < 0.0) {
        return Err(Error::solver(
            "kato: blow-up fit has non-negative slope; F is not in the local power regime".to_string(),
        ));
    }
    let t_num = -intercept / slope;
    Ok(BlowupReport {
        blew_up: true,
        t_num: Some(t_num),
        precision_limited: false,
        t_end: t,
        f_end: y[0],
    })
}

/// One Cash–Karp step: returns the 5th-order solution and the embedded
/// 5th−4th order error estimate.
fn cash_karp_step(
    rhs: &dyn Fn(f64, [f64; 2]) -> [f64; 2],
    t: f64,
    y: [f64; 2],
    dt: f64,
) -> ([f64; 2], [f64; 2]) {
    const A2: f64 = 0.2;
    const A3: f64 = 0.3;
    const A4: f64 = 0.6;
    const A5: f64 = 1.0;
    const A6: f64 = 0.875;
    const B21: f64 = 0.2;
    const B31: f64 = 3.0 / 40.0;
    const B32: f64 = 9.0 / 40.0;
    const B41: f64 = 0.3;
    const B42: f64 = -0.9;
    const B43: f64 = 1.2;
    const B51: f64 = -11.0 / 54.0;
    const B52: f64 = 2.5;
    const B53: f64 = -70.0 / 27.0;
    const B54: f64 = 35.0 / 27.0;
    const B61: f64 = 1631.0 / 55296.0;
    const B62: f64 = 175.0 / 512.0;
    const B63: f64 = 575.0 / 13824.0;
    const B64: f64 = 44275.0 / 110592.0;
    const B65: f64 = 253.0 / 4096.0;
    const C1: f64 = 37.0 / 378.0;
    const C3: f64 = 250.0 / 621.0;
    const C4: f64 = 125.0 / 594.0;
    const C6: f64 = 512.0 / 1771.0;
    const D1: f64 = C1 - 2825.0 / 27648.0;
    const D3: f64 = C3 - 18575.0 / 48384.0;
    const D4: f64 = C4 - 13525.0 / 55296.0;
    const D5: f64 = -277.0 / 14336.0;
    const D6: f64 = C6 - 0.25;

    let comb = |y: [f64; 2], terms: &[(f64, [f64; 2])]| -> [f64; 2] {
        let mut out = y;
        for &(c, k) in terms {
            out[0] += dt * c * k[0];
            out[1] += dt * c * k[1];
        }
        out
    };
    let k1 = rhs(t, y);
    let k2 = rhs(t + A2 * dt, comb(y, &[(B21, k1)]));
    let k3 = rhs(t + A3 * dt, comb(y, &[(B31, k1), (B32, k2)]));
    let k4 = rhs(t + A4 * dt, comb(y, &[(B41, k1), (B42, k2), (B43, k3)]));
    let k5 = rhs(t + A5 * dt, comb(y, &[(B51, k1), (B52, k2), (B53, k3), (B54, k4)]));
    let k6 = rhs(
        t + A6 * dt,
        comb(y, &[(B61, k1), (B62, k2), (B63, k3), (B64, k4), (B65, k5)]),
    );
    let mut y_new = [0.0; 2];
    let mut err = [0.0; 2];
    for i in 0..2 {
        y_new[i] = y[i] + dt * (C1 * k1[i] + C3 * k3[i] + C4 * k4[i] + C6 * k6[i]);
        err[i] = dt * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]);
    }
    (y_new, err)
}

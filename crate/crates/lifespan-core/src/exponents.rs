//! Critical-exponent algebra and the lifespan-regime classifier.
//!
//! Scale-invariant damping μ₁/(1+t)·∂ₜu and potential μ₂/(1+t)²·u shift the
//! effective spatial dimension: derivative-type (Glassey) and Strauss-type
//! thresholds are evaluated at d = n + μ₁, Fujita-type thresholds at
//! d = n + α, where
//!
//! δ = (μ₁−1)² − 4μ₂,   α = (μ₁ − 1 − √δ)/2.
//!
//! The classifier enumerates the blow-up regimes for small data of size ε and
//! reports, per regime, how the lifespan bound T_ε scales:
//! power form T_ε ≤ C·ε^exponent (exponent < 0), or exponential form
//! T_ε ≤ exp(C₀·ε^exponent).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tolerance for deciding that a nonlinearity power sits exactly on
/// a critical threshold.
const CRITICAL_EQ_TOL: f64 = 1e-12;

/// Reference data size at which overlapping regime bounds are compared to
/// pick the dominant (smallest) one.
const DOMINANCE_EPSILON: f64 = 1e-3;

/// Full parameter tuple of the Cauchy problem
/// ∂²ₜu − Δ_g u + μ₁/(1+t)·∂ₜu + μ₂/(1+t)²·u = c₁|∂ₜu|^p + c₂|u|^q.
///
/// `p` and `q` may be omitted when the matching weight is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Spatial dimension, n ≥ 2.
    pub n: u32,
    /// Damping coefficient μ₁.
    pub mu1: f64,
    /// Potential coefficient μ₂.
    pub mu2: f64,
    /// Derivative-nonlinearity power (required > 1 when c1 > 0).
    pub p: Option<f64>,
    /// Solution-nonlinearity power (required > 1 when c2 > 0).
    pub q: Option<f64>,
    /// Weight of |∂ₜu|^p, c1 ≥ 0.
    pub c1: f64,
    /// Weight of |u|^q, c2 ≥ 0.
    pub c2: f64,
}

impl ProblemParams {
    /// Pure-|u|^q problem (c₁ = 0, c₂ = 1).
    pub fn power_only(n: u32, mu1: f64, mu2: f64, q: f64) -> Self {
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

    /// Pure-|∂ₜu|^p problem (c₁ = 1, c₂ = 0).
    pub fn derivative_only(n: u32, mu1: f64, mu2: f64, p: f64) -> Self {
        ProblemParams {
            n,
            mu1,
            mu2,
            p: Some(p),
            q: None,
            c1: 1.0,
            c2: 0.0,
        }
    }

    /// Checks the structural invariants: n ≥ 2, weights ≥ 0, powers > 1
    /// where their weights are active, all values finite.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("problem.n: need n ≥ 2, got {}", self.n)));
        }
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2), ("c1", self.c1), ("c2", self.c2)] {
            if !v.is_finite() {
                return Err(Error::config(format!("problem.{name}: must be finite")));
            }
        }
        if self.c1 < 0.0 || self.c2 < 0.0 {
            return Err(Error::config("problem.c1/c2: weights must be ≥ 0".to_string()));
        }
        if self.c1 > 0.0 {
            match self.p {
                Some(p) if p > 1.0 && p.is_finite() => {}
                Some(p) => {
                    return Err(Error::config(format!("problem.p: need p > 1 when c1 > 0, got {p}")))
                }
                None => return Err(Error::config("problem.p: required when c1 > 0".to_string())),
            }
        }
        if self.c2 > 0.0 {
            match self.q {
                Some(q) if q > 1.0 && q.is_finite() => {}
                Some(q) => {
                    return Err(Error::config(format!("problem.q: need q > 1 when c2 > 0, got {q}")))
                }
                None => return Err(Error::config("problem.q: required when c2 > 0".to_string())),
            }
        }
        Ok(())
    }

    /// Discriminant δ = (μ₁−1)² − 4μ₂.
    pub fn delta(&self) -> f64 {
        let m = self.mu1 - 1.0;
        m * m - 4.0 * self.mu2
    }
}

/// Quantities derived from (n, μ₁, μ₂); defined when δ ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// δ = (μ₁−1)² − 4μ₂.
    pub delta: f64,
    /// α = (μ₁ − 1 − √δ)/2.
    pub alpha: f64,
    /// Shifted dimension n + μ₁ used by Glassey/Strauss thresholds.
    pub d_glassey_strauss: f64,
    /// Shifted dimension n + α used by the Fujita threshold.
    pub d_fujita: f64,
}

/// Blow-up regime labels. The two critical labels mark exact threshold hits;
/// `CriticalStrauss` is a boundary case the classification theory leaves
/// open (see [`LifespanPrediction::asserted`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Glassey,
    Strauss,
    Fujita,
    Mixed,
    CriticalGlassey,
    CriticalStrauss,
    NoPrediction,
}

impl Regime {
    /// Tie-break rank when two regimes predict identical bounds:
    /// Mixed < Strauss < Fujita < Glassey; critical variants rank with their
    /// base regime.
    fn tie_rank(self) -> u8 {
        match self {
            Regime::Mixed => 0,
            Regime::Strauss | Regime::CriticalStrauss => 1,
            Regime::Fujita => 2,
            Regime::Glassey | Regime::CriticalGlassey => 3,
            Regime::NoPrediction => 4,
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Glassey => "Glassey",
            Regime::Strauss => "Strauss",
            Regime::Fujita => "Fujita",
            Regime::Mixed => "Mixed",
            Regime::CriticalGlassey => "Critical-Glassey",
            Regime::CriticalStrauss => "Critical-Strauss",
            Regime::NoPrediction => "NoPrediction",
        };
        f.write_str(s)
    }
}

/// Functional form of a lifespan upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LifespanForm {
    /// T_ε ≤ C·ε^exponent with exponent < 0.
    Power,
    /// T_ε ≤ exp(C₀·ε^exponent) with exponent < 0.
    Exponential,
}

/// One predicted lifespan bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanPrediction {
    pub regime: Regime,
    pub form: LifespanForm,
    /// Power of ε in the bound: T_ε ≤ C·ε^exponent (power form) or
    /// T_ε ≤ exp(C₀·ε^exponent) (exponential form). Negative in every
    /// predicted regime, so the bound grows as ε → 0. For power form the
    /// slope of log T against log(1/ε) is `-exponent`; see [`Self::log_slope`].
    pub exponent: f64,
    /// The shifted dimension the regime's threshold was evaluated at.
    pub source_dimension: f64,
    /// True for the prediction with the smallest bound as ε → 0 (compared at
    /// ε = 1e−3 with unit constants).
    pub dominant: bool,
    /// False only for boundary cases reported beyond the asserted
    /// classification (the Strauss threshold hit exactly).
    pub asserted: bool,
}

impl LifespanPrediction {
    /// Slope of log T_ε versus log(1/ε) for power-form bounds: `-exponent`.
    pub fn log_slope(&self) -> f64 {
        -self.exponent
    }

    /// Natural log of the predicted bound at data size `eps`, with unit
    /// constants. Used for dominance comparison and regime-ordering checks.
    pub fn log_bound_at(&self, eps: f64) -> f64 {
        match self.form {
            LifespanForm::Power => self.exponent * eps.ln(),
            LifespanForm::Exponential => (self.exponent * eps.ln()).exp(),
        }
    }
}

/// Strauss exponent q_S(d): the positive root of (d−1)q² − (d+1)q − 2 = 0.
/// Strictly decreasing in d, q_S(d) > 1, q_S(d) → 1 as d → ∞.
pub fn strauss_exponent(d: f64) -> Result<f64> {
    if !(d > 1.0) {
        return Err(Error::domain(format!(
            "strauss_exponent: need dimension d > 1 (quadratic degenerates), got {d}"
        )));
    }
    let b = d + 1.0;
    let disc = b * b + 8.0 * (d - 1.0);
    Ok((b + disc.sqrt()) / (2.0 * (d - 1.0)))
}

/// Glassey exponent p_G(d) = 1 + 2/(d−1).
pub fn glassey_exponent(d: f64) -> Result<f64> {
    if !(d > 1.0) {
        return Err(Error::domain(format!(
            "glassey_exponent: need dimension d > 1, got {d}"
        )));
    }
    Ok(1.0 + 2.0 / (d - 1.0))
}

/// Fujita exponent q_F(d) = 1 + 2/d, the root of γ_F(q, d) = 0.
pub fn fujita_exponent(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!(
            "fujita_exponent: need dimension d > 0, got {d}"
        )));
    }
    Ok(1.0 + 2.0 / d)
}

/// Fujita defect γ_F(q, d) = 2 − d(q−1); positive exactly when q is
/// Fujita-subcritical in dimension d > 0.
pub fn gamma_fujita(q: f64, d: f64) -> f64 {
    2.0 - d * (q - 1.0)
}

/// Mixed-nonlinearity curve λ(p, q, d) = (q−1)((d−1)p − 2); the combined
/// regime predicts blow-up when λ < 4.
pub fn lambda_curve(p: f64, q: f64, d: f64) -> f64 {
    (q - 1.0) * ((d - 1.0) * p - 2.0)
}

/// Computes δ, α and the shifted dimensions. Fails when δ < 0 (outside the
/// classification hypotheses: the damping/potential pair is oscillatory).
pub fn derive(params: &ProblemParams) -> Result<DerivedParams> {
    let delta = params.delta();
    if delta < 0.0 {
        return Err(Error::domain(format!(
            "derive: discriminant δ = (μ₁−1)² − 4μ₂ = {delta} < 0 violates the classification hypothesis δ ≥ 0"
        )));
    }
    let alpha = (params.mu1 - 1.0 - delta.sqrt()) / 2.0;
    Ok(DerivedParams {
        delta,
        alpha,
        d_glassey_strauss: params.n as f64 + params.mu1,
        d_fujita: params.n as f64 + alpha,
    })
}

fn on_threshold(x: f64, threshold: f64) -> bool {
    (x - threshold).abs() <= CRITICAL_EQ_TOL * threshold.abs().max(1.0)
}

/// Enumerates every applicable blow-up regime for `params` and its lifespan
/// prediction, in fixed order Glassey, Strauss, Fujita, Mixed. The
/// prediction whose bound is smallest as ε → 0 carries `dominant = true`.
/// When no regime applies the single entry has regime
/// [`Regime::NoPrediction`] (its exponent is 0 and meaningless).
///
/// Cases, with d = n + μ₁ and d_F = n + α:
/// - Glassey: c₁ > 0, 1 < p ≤ p_G(d). Power exponent
///   −2(p−1)/(2 − (d−1)(p−1)) below threshold; exponential exponent −(p−1)
///   at p = p_G(d) exactly (reported as `CriticalGlassey`).
/// - Strauss: c₂ > 0, 1 < q < q_S(d). Power exponent
///   2q(q−1)/((d−1)q² − (d+1)q − 2) (negative: the denominator is negative
///   below the Strauss root). A hit q = q_S(d) is reported as
///   `CriticalStrauss` with exponential exponent −q(q−1) but
///   `asserted = false`: the classification theory states the subcritical
///   case only, and the exponential boundary form is the natural conjecture.
/// - Fujita: c₂ > 0, d_F > 0, 1 < q < q_F(d_F). Power exponent
///   −(q−1)/γ_F(q, d_F).
/// - Mixed: c₁c₂ > 0, λ(p, q, d) < 4. Power exponent −2p(q−1)/(4 − λ).
pub fn classify(params: &ProblemParams) -> Result<Vec<LifespanPrediction>> {
    params.validate()?;
    let derived = derive(params)?;
    let d = derived.d_glassey_strauss;
    let mut out = Vec::new();

    // Glassey / critical Glassey (derivative nonlinearity).
    if params.c1 > 0.0 && d > 1.0 {
        let p = params.p.expect("validated");
        let p_g = glassey_exponent(d)?;
        if on_threshold(p, p_g) {
            out.push(LifespanPrediction {
                regime: Regime::CriticalGlassey,
                form: LifespanForm::Exponential,
                exponent: -(p - 1.0),
                source_dimension: d,
                dominant: false,
                asserted: true,
            });
        } else if p < p_g {
            let denom = 2.0 - (d - 1.0) * (p - 1.0);
            out.push(LifespanPrediction {
                regime: Regime::Glassey,
                form: LifespanForm::Power,
                exponent: -2.0 * (p - 1.0) / denom,
                source_dimension: d,
                dominant: false,
                asserted: true,
            });
        }
    }

    // Strauss / critical Strauss (solution nonlinearity, wave scaling).
    if params.c2 > 0.0 && d > 1.0 {
        let q = params.q.expect("validated");
        let q_s = strauss_exponent(d)?;
        if on_threshold(q, q_s) {
            out.push(LifespanPrediction {
                regime: Regime::CriticalStrauss,
                form: LifespanForm::Exponential,
                exponent: -q * (q - 1.0),
                source_dimension: d,
                dominant: false,
                asserted: false,
            });
        } else if q < q_s {
            let denom = (d - 1.0) * q * q - (d + 1.0) * q - 2.0;
            out.push(LifespanPrediction {
                regime: Regime::Strauss,
                form: LifespanForm::Power,
                exponent: 2.0 * q * (q - 1.0) / denom,
                source_dimension: d,
                dominant: false,
                asserted: true,
            });
        }
    }

    // Fujita (solution nonlinearity, parabolic scaling at dimension n + α).
    if params.c2 > 0.0 && derived.d_fujita > 0.0 {
        let q = params.q.expect("validated");
        let gamma = gamma_fujita(q, derived.d_fujita);
        if gamma > 0.0 {
            out.push(LifespanPrediction {
                regime: Regime::Fujita,
                form: LifespanForm::Power,
                exponent: -(q - 1.0) / gamma,
                source_dimension: derived.d_fujita,
                dominant: false,
                asserted: true,
            });
        }
    }

    // Mixed (both nonlinearities below the combined curve).
    if params.c1 > 0.0 && params.c2 > 0.0 {
        let p = params.p.expect("validated");
        let q = params.q.expect("validated");
        let lambda = lambda_curve(p, q, d);
        if lambda < 4.0 {
            out.push(LifespanPrediction {
                regime: Regime::Mixed,
                form: LifespanForm::Power,
                exponent: -2.0 * p * (q - 1.0) / (4.0 - lambda),
                source_dimension: d,
                dominant: false,
                asserted: true,
            });
        }
    }

    if out.is_empty() {
        out.push(LifespanPrediction {
            regime: Regime::NoPrediction,
            form: LifespanForm::Power,
            exponent: 0.0,
            source_dimension: d,
            dominant: false,
            asserted: false,
        });
        return Ok(out);
    }

    // Dominance: smallest predicted bound at the reference ε; ties broken by
    // regime rank.
    let mut best = 0usize;
    for i in 1..out.len() {
        let (bi, b0) = (
            out[i].log_bound_at(DOMINANCE_EPSILON),
            out[best].log_bound_at(DOMINANCE_EPSILON),
        );
        if bi < b0 || (bi == b0 && out[i].regime.tie_rank() < out[best].regime.tie_rank()) {
            best = i;
        }
    }
    out[best].dominant = true;
    Ok(out)
}

//! Radial asymptotically Euclidean geometry g = K²(r)dr² + r²dω².
//!
//! The profile K determines everything the solver needs: the geodesic radius
//! r̃(r) = ∫₀^r K dτ, the volume density ω_{n−1}·K·r^{n−1}, the radial
//! Laplace–Beltrami operator, and the propagation cone {r̃ ≤ t + R₁}.
//! Ellipticity is expressed by δ₀ ∈ (0, 1) with K ∈ (δ₀, 1/δ₀), which makes
//! r̃ Lipschitz-equivalent to r with constants δ₀, 1/δ₀ and bounds wave
//! speeds in coordinate r by 1/δ₀.

use crate::error::{Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};

/// Relative safety factor applied when an ellipticity constant is derived
/// from the profile's exact range (the bound K ∈ (δ₀, 1/δ₀) is strict).
const DELTA0_SAFETY: f64 = 0.9;

/// Named radial profile families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MetricProfile {
    /// K ≡ 1 (Euclidean).
    Flat,
    /// Long-range perturbation K(r) = 1 + κ·⟨r⟩^(−ρ) with ⟨r⟩ = √(1+r²),
    /// κ > −1, ρ > 0. Satisfies |∂ᵣᵐ(K−1)| ≤ C⟨r⟩^(−m−ρ) for m = 0, 1, 2.
    LongRange { kappa: f64, decay_rho: f64 },
    /// User-tabulated profile on a uniform grid with supplied derivatives
    /// (no numerical differentiation of tables). Values between samples are
    /// linearly interpolated; beyond the table K is frozen at its last value.
    Tabulated {
        dr: f64,
        k: Vec<f64>,
        k_prime: Vec<f64>,
        k_double_prime: Vec<f64>,
    },
}

/// A radial metric: dimension, profile, and ellipticity constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMetric {
    pub n: u32,
    pub profile: MetricProfile,
    /// δ₀ ∈ (0, 1): K ∈ (δ₀, 1/δ₀) on the working range.
    pub delta0: f64,
}

impl RadialMetric {
    /// Euclidean metric in dimension n.
    pub fn flat(n: u32) -> Self {
        RadialMetric {
            n,
            profile: MetricProfile::Flat,
            delta0: DELTA0_SAFETY,
        }
    }

    /// Long-range profile with an automatically derived δ₀ (90% of the exact
    /// ellipticity range of the family).
    pub fn long_range(n: u32, kappa: f64, decay_rho: f64) -> Result<Self> {
        if !(kappa > -1.0) || !kappa.is_finite() {
            return Err(Error::config(format!(
                "metric.kappa: long-range profile needs κ > −1 (ellipticity), got {kappa}"
            )));
        }
        if !(decay_rho > 0.0) {
            return Err(Error::config(format!(
                "metric.decay_rho: need ρ > 0, got {decay_rho}"
            )));
        }
        // K ranges over (1, 1+κ] for κ > 0 and [1+κ, 1) for κ < 0.
        let delta0 = DELTA0_SAFETY * f64::min(1.0 + kappa.min(0.0), 1.0 / (1.0 + kappa.max(0.0)));
        Ok(RadialMetric {
            n,
            profile: MetricProfile::LongRange { kappa, decay_rho },
            delta0,
        })
    }

    /// Replaces the derived δ₀ with an explicit value in (0, 1).
    pub fn with_delta0(mut self, delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(Error::config(format!(
                "metric.delta0: need δ₀ ∈ (0, 1), got {delta0}"
            )));
        }
        self.delta0 = delta0;
        Ok(self)
    }

    /// Profile value K(r).
    pub fn k(&self, r: f64) -> f64 {
        match &self.profile {
            MetricProfile::Flat => 1.0,
            MetricProfile::LongRange { kappa, decay_rho } => {
                1.0 + kappa * (1.0 + r * r).powf(-decay_rho / 2.0)
            }
            MetricProfile::Tabulated { dr, k, .. } => table_lookup(*dr, k, r),
        }
    }

    /// First derivative K'(r).
    pub fn k_prime(&self, r: f64) -> f64 {
        match &self.profile {
            MetricProfile::Flat => 0.0,
            MetricProfile::LongRange { kappa, decay_rho } => {
                -kappa * decay_rho * r * (1.0 + r * r).powf(-(decay_rho + 2.0) / 2.0)
            }
            MetricProfile::Tabulated { dr, k_prime, .. } => table_lookup(*dr, k_prime, r),
        }
    }

    /// Second derivative K''(r).
    pub fn k_double_prime(&self, r: f64) -> f64 {
        match &self.profile {
            MetricProfile::Flat => 0.0,
            MetricProfile::LongRange { kappa, decay_rho } => {
                let s = 1.0 + r * r;
                -kappa * decay_rho * s.powf(-(decay_rho + 4.0) / 2.0) * (1.0 - (decay_rho + 1.0) * r * r)
            }
            MetricProfile::Tabulated { dr, k_double_prime, .. } => {
                table_lookup(*dr, k_double_prime, r)
            }
        }
    }

    /// Geodesic radius r̃(r) = ∫₀^r K(τ)dτ, by adaptive quadrature (exact
    /// for the flat profile). Strictly increasing with
    /// δ₀·r ≤ r̃(r) ≤ r/δ₀.
    pub fn geodesic_radius(&self, r: f64) -> f64 {
        match &self.profile {
            MetricProfile::Flat => r,
            _ => quad::adaptive_simpson(&|t| self.k(t), 0.0, r, 1e-12 * (1.0 + r)),
        }
    }

    /// Radial volume density ω_{n−1}·K(r)·r^(n−1) of dv_g, with ω_{n−1} the
    /// area of the unit sphere S^(n−1).
    pub fn volume_weight(&self, r: f64) -> f64 {
        sphere_area(self.n) * self.k(r) * r.powi(self.n as i32 - 1)
    }

    /// The cone radius r* with r̃(r*) = t + R₁: data supported in
    /// {r̃ ≤ R₁} stays supported in {r ≤ r*} up to time t. Bisection on
    /// [0, (t+R₁)/δ₀].
    pub fn cone_radius(&self, t: f64, r1: f64) -> f64 {
        let target = t + r1;
        if target <= 0.0 {
            return 0.0;
        }
        if matches!(self.profile, MetricProfile::Flat) {
            return target;
        }
        let mut lo = 0.0f64;
        let mut hi = target / self.delta0;
        // Guard: the δ₀ bound makes r̃(hi) ≥ δ₀·hi = target, but expand if a
        // user-supplied δ₀ is loose.
        while self.geodesic_radius(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.geodesic_radius(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + hi) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Checks ellipticity K ∈ (δ₀, 1/δ₀) on a working grid up to `r_max`.
    pub fn check_ellipticity(&self, r_max: f64, samples: usize) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(Error::config(format!(
                "metric.delta0: need δ₀ ∈ (0, 1), got {}",
                self.delta0
            )));
        }
        let m = samples.max(2);
        for j in 0..=m {
            let r = r_max * j as f64 / m as f64;
            let k = self.k(r);
            if !(k > self.delta0 && k < 1.0 / self.delta0) {
                return Err(Error::config(format!(
                    "metric.delta0: K({r}) = {k} outside ({}, {})",
                    self.delta0,
                    1.0 / self.delta0
                )));
            }
        }
        Ok(())
    }

    /// Fits the decay constants C_m = sup_r |∂ᵣᵐ(K−1)|·⟨r⟩^(m+ρ) for
    /// m = 0, 1, 2 on [0, r_max] (long-range profiles; ρ = decay_rho).
    /// Returns [C₀, C₁, C₂].
    pub fn fit_decay_constants(&self, r_max: f64, samples: usize) -> Result<[f64; 3]> {
        let rho = match &self.profile {
            MetricProfile::LongRange { decay_rho, .. } => *decay_rho,
            MetricProfile::Flat => return Ok([0.0, 0.0, 0.0]),
            MetricProfile::Tabulated { .. } => {
                return Err(Error::config(
                    "metric.profile: decay-constant fit needs a named decay rate (flat or long-range profile)"
                        .to_string(),
                ))
            }
        };
        let m = samples.max(2);
        let mut c = [0.0f64; 3];
        for j in 0..=m {
            // Geometric sampling reaches large radii without huge grids.
            let r = if j == 0 {
                0.0
            } else {
                r_max.powf(j as f64 / m as f64) - 1.0
            };
            let w = (1.0 + r * r).sqrt();
            c[0] = c[0].max((self.k(r) - 1.0).abs() * w.powf(rho));
            c[1] = c[1].max(self.k_prime(r).abs() * w.powf(1.0 + rho));
            c[2] = c[2].max(self.k_double_prime(r).abs() * w.powf(2.0 + rho));
        }
        Ok(c)
    }
}

fn table_lookup(dr: f64, values: &[f64], r: f64) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let x = (r / dr).max(0.0);
    let j = x.floor() as usize;
    if j + 1 >= values.len() {
        return *values.last().unwrap();
    }
    let w = x - j as f64;
    values[j] * (1.0 - w) + values[j + 1] * w
}

/// Area of the unit sphere S^(n−1) ⊂ R^n: A(1) = 2, A(2) = 2π,
/// A(n) = 2π·A(n−2)/(n−2).
pub fn sphere_area(n: u32) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => std::f64::consts::TAU,
        _ => std::f64::consts::TAU * sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// A radial function sampled on the uniform grid r_j = j·dr, j = 0..J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub dr: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dr: f64, values: Vec<f64>) -> Self {
        GridFunction { dr, values }
    }

    /// Samples `f` on [0, r_max] with spacing dr (last node rounds r_max to
    /// the grid).
    pub fn sample(dr: f64, r_max: f64, f: impl Fn(f64) -> f64) -> Self {
        let j_max = (r_max / dr).round() as usize;
        let values = (0..=j_max).map(|j| f(j as f64 * dr)).collect();
        GridFunction { dr, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest grid radius J·dr.
    pub fn r_max(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.dr
    }

    /// Radius of node j.
    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    /// ∫ f dv_g by the trapezoidal rule against the volume weight.
    pub fn integrate_volume(&self, metric: &RadialMetric) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.values.len() {
            let w = if j == 0 || j + 1 == self.values.len() { 0.5 } else { 1.0 };
            sum += w * self.values[j] * metric.volume_weight(self.r(j));
        }
        sum * self.dr
    }

    /// Trapezoidal dv_g inner product of two grid functions on the same grid.
    pub fn inner_product_volume(&self, other: &GridFunction, metric: &RadialMetric) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grid size mismatch");
        let mut sum = 0.0;
        for j in 0..self.values.len() {
            let w = if j == 0 || j + 1 == self.values.len() { 0.5 } else { 1.0 };
            sum += w * self.values[j] * other.values[j] * metric.volume_weight(self.r(j));
        }
        sum * self.dr
    }
}

/// Second-order discretization of the radial Laplace–Beltrami operator
///
/// Δ_g φ = (K r^(n−1))^(−1) ∂_r ( r^(n−1) K^(−1) ∂_r φ )
///
/// in flux form on finite-volume cells: with a_{j±1/2} = r^(n−1)/K at the
/// half nodes and cell average v_j of r^(n−1),
///
/// (Δφ)_j = [a_{j+1/2}(φ_{j+1}−φ_j) − a_{j−1/2}(φ_j−φ_{j−1})] / (dr²·K_j·v_j).
///
/// At r = 0 the inner flux vanishes and the cell degenerates to the
/// symmetric limit n·φ''(0)/K(0)² (the half-node K in the flux supplies the
/// first-order correction where K varies). The last node extrapolates φ
/// linearly, which is exact only for locally linear φ; callers keep support
/// away from the boundary.
pub fn laplace_beltrami(metric: &RadialMetric, phi: &GridFunction) -> Result<GridFunction> {
    if phi.values.len() < 3 {
        return Err(Error::domain(format!(
            "laplace_beltrami: need at least 3 samples, got {}",
            phi.values.len()
        )));
    }
    let op = LaplaceStencil::new(metric, phi.dr, phi.values.len());
    let mut out = vec![0.0; phi.values.len()];
    op.apply(&phi.values, &mut out);
    Ok(GridFunction::new(phi.dr, out))
}

/// Precomputed coefficients of the flux-form Laplacian on a fixed grid.
/// `apply` is allocation-free; the wave solver reuses one stencil for the
/// whole run.
#[derive(Debug, Clone)]
pub struct LaplaceStencil {
    /// a_{j+1/2}/(dr²·K_j·v_j) for j = 0..J−1 (flux to the right of j).
    up: Vec<f64>,
    /// a_{j−1/2}/(dr²·K_j·v_j) for j = 0..J−1 (flux to the left of j); 0 at j = 0.
    down: Vec<f64>,
    /// dv_g cell weights K_j·v_j·dr (exact self-adjointness weights).
    cell_weight: Vec<f64>,
    n: u32,
}

impl LaplaceStencil {
    pub fn new(metric: &RadialMetric, dr: f64, len: usize) -> Self {
        let n = metric.n;
        let ni = n as i32;
        let mut up = vec![0.0; len];
        let mut down = vec![0.0; len];
        let mut cell_weight = vec![0.0; len];
        for j in 0..len {
            let r = j as f64 * dr;
            // Cell average of r^(n−1) over [r−dr/2, r+dr/2] ∩ [0, ∞).
            let lo = (r - 0.5 * dr).max(0.0);
            let hi = r + 0.5 * dr;
            let v = (hi.powi(ni) - lo.powi(ni)) / (n as f64 * dr);
            let w = metric.k(r) * v;
            cell_weight[j] = w * dr * sphere_area(n);
            let denom = dr * dr * w;
            let r_up = r + 0.5 * dr;
            up[j] = r_up.powi(ni - 1) / metric.k(r_up) / denom;
            if j > 0 {
                let r_dn = r - 0.5 * dr;
                down[j] = r_dn.powi(ni - 1) / metric.k(r_dn) / denom;
            }
        }
        LaplaceStencil { up, down, cell_weight, n }
    }

    /// Writes Δφ into `out`; the last node uses linear extrapolation of φ.
    pub fn apply(&self, phi: &[f64], out: &mut [f64]) {
        self.apply_range(phi, out, phi.len());
    }

    /// Applies the stencil on nodes 0..limit only (active-region stepping);
    /// nodes at and beyond `limit` are left untouched.
    pub fn apply_range(&self, phi: &[f64], out: &mut [f64], limit: usize) {
        let j_last = phi.len() - 1;
        let end = limit.min(phi.len());
        for j in 0..end {
            let upper = if j < j_last {
                self.up[j] * (phi[j + 1] - phi[j])
            } else {
                // φ_{J+1} := 2φ_J − φ_{J−1} makes the outgoing difference
                // equal the incoming one.
                self.up[j] * (phi[j] - phi[j - 1])
            };
            let lower = if j > 0 { self.down[j] * (phi[j] - phi[j - 1]) } else { 0.0 };
            out[j] = upper - lower;
        }
    }

    /// dv_g-exact inner product associated with the stencil's cells; the
    /// operator is self-adjoint with respect to it to rounding.
    pub fn cell_inner_product(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        for j in 0..a.len().min(b.len()) {
            sum += a[j] * b[j] * self.cell_weight[j];
        }
        sum
    }

    pub fn dimension(&self) -> u32 {
        self.n
    }
}

//! Numerical laboratory for finite-time blow-up of the radial semilinear wave
//! equation with scale-invariant damping and potential,
//!
//! ∂²ₜu − Δ_g u + μ₁/(1+t)·∂ₜu + μ₂/(1+t)²·u = c₁|∂ₜu|^p + c₂|u|^q,
//!
//! on asymptotically Euclidean backgrounds g = K²(r)dr² + r²dω².
//!
//! The crate provides, as separately testable pieces:
//!
//! - [`exponents`]: critical-exponent algebra (Strauss/Glassey/Fujita/mixed
//!   curves, the damping discriminant δ and shift α) and a regime classifier
//!   that predicts the lifespan scaling T_ε for small data of size ε.
//! - [`geometry`]: the radial metric profile K, geodesic radius, volume
//!   weight, Laplace–Beltrami discretization, and the propagation cone.
//! - [`special_functions`]: modified Bessel K_ν, the temporal factor ρ(t),
//!   the elliptic eigenfunction φ_λ, and the test function ψ = ρ·φ with its
//!   decay and dual-equation checks.
//! - [`kato_ode`]: the Kato-type blow-up lemma as an executable oracle, with
//!   blow-up time extrapolation and δ-scaling sweeps.
//! - [`wave_solver`]: the radial finite-difference solver, lifespan
//!   measurement with threshold-robustness audit, and ε-sweeps.
//! - [`functionals`]: the averaged functionals F, G₁, G₂, H, L, N along a
//!   run and the inequality chain checks built on them.
//! - [`harness`]: experiment configuration, power-law fitting, and the
//!   reproducible file-emitting pipelines behind the CLI.

pub mod error;
pub mod exponents;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod kato_ode;
mod quad;
pub mod special_functions;
pub mod wave_solver;

pub use error::{Error, Result};
pub use exponents::{
    classify, derive, fujita_exponent, gamma_fujita, glassey_exponent, lambda_curve,
    strauss_exponent, DerivedParams, LifespanForm, LifespanPrediction, ProblemParams, Regime,
};
pub use functionals::FunctionalTrace;
pub use geometry::{GridFunction, MetricProfile, RadialMetric};
pub use harness::{fit_power_law, run_experiment, Bundle, ExperimentConfig, FitResult, Pipeline, SweepRecord};
pub use kato_ode::{integrate_blowup, predicted_bound_exponent, scaling_sweep, KatoParams};
pub use special_functions::{bessel_k, rho_factor, EigenfunctionResult, GridSpec, TestFunction};
pub use wave_solver::{InitialData, SolverConfig, WaveState};

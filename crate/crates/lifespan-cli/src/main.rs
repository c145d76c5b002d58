//! Experiment driver around the lifespan-core pipelines.
//!
//! Configuration comes from an optional TOML file (see `print-config` for
//! the full default layout); every flag overrides the corresponding config
//! field. Exit codes: 0 success, 1 configuration error, 2 check failure or
//! runtime error.

use clap::{Args, Parser, Subcommand};
use lifespan_core::error::Error;
use lifespan_core::harness::{run_experiment, Bundle, ExperimentConfig, Pipeline};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "lifespan",
    version,
    about = "Numerical laboratory for blow-up of semilinear waves with time-dependent damping and potential",
    after_help = "Exit codes: 0 success, 1 configuration error, 2 check failure or runtime error.\n\
                  All outputs are written atomically and contain no timestamps: identical\n\
                  configurations reproduce identical bytes."
)]
struct Cli {
    /// TOML experiment configuration; built-in defaults are used when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (overrides outputs.directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,

    /// Output formats, comma-separated from csv, jsonl, dat
    /// (overrides outputs.formats).
    #[arg(long, global = true, value_delimiter = ',', value_name = "FMT")]
    format: Option<Vec<String>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProblemArgs {
    /// Spatial dimension n ≥ 2.
    #[arg(long)]
    n: Option<u32>,

    /// Damping coefficient: μ₁/(1+t)·u_t.
    #[arg(long)]
    mu1: Option<f64>,

    /// Potential coefficient: μ₂/(1+t)²·u.
    #[arg(long)]
    mu2: Option<f64>,

    /// Derivative nonlinearity power in c₁|u_t|^p.
    #[arg(long)]
    p: Option<f64>,

    /// Solution nonlinearity power in c₂|u|^q.
    #[arg(long)]
    q: Option<f64>,

    /// Weight c₁ of |u_t|^p.
    #[arg(long)]
    c1: Option<f64>,

    /// Weight c₂ of |u|^q.
    #[arg(long)]
    c2: Option<f64>,
}

impl ProblemArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        let s = &mut config.problem;
        set(&mut s.n, self.n);
        set(&mut s.mu1, self.mu1);
        set(&mut s.mu2, self.mu2);
        if self.p.is_some() {
            s.p = self.p;
        }
        if self.q.is_some() {
            s.q = self.q;
        }
        set(&mut s.c1, self.c1);
        set(&mut s.c2, self.c2);
    }
}

#[derive(Args)]
struct MetricArgs {
    /// Metric profile: flat or long-range.
    #[arg(long)]
    profile: Option<String>,

    /// Long-range amplitude κ in K(r) = 1 + κ⟨r⟩^(−decay_rho).
    #[arg(long)]
    kappa: Option<f64>,

    /// Long-range decay rate.
    #[arg(long)]
    decay_rho: Option<f64>,

    /// Ellipticity margin δ₀ ∈ (0, 1); derived from the profile when omitted.
    #[arg(long)]
    delta0: Option<f64>,
}

impl MetricArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        let s = &mut config.metric;
        set(&mut s.profile, self.profile.clone());
        set(&mut s.kappa, self.kappa);
        set(&mut s.decay_rho, self.decay_rho);
        if self.delta0.is_some() {
            s.delta0 = self.delta0;
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Data size ε multiplying both components.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Support radius R0 of the bumps.
    #[arg(long)]
    r0: Option<f64>,

    /// Amplitude of the u(0) bump.
    #[arg(long)]
    u0_amplitude: Option<f64>,

    /// Amplitude of the u_t(0) bump.
    #[arg(long)]
    u1_amplitude: Option<f64>,
}

impl DataArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        let s = &mut config.data;
        set(&mut s.epsilon, self.epsilon);
        set(&mut s.r0, self.r0);
        set(&mut s.u0_amplitude, self.u0_amplitude);
        set(&mut s.u1_amplitude, self.u1_amplitude);
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Grid spacing dr.
    #[arg(long)]
    dr: Option<f64>,

    /// Courant factor in (0, 1).
    #[arg(long)]
    cfl: Option<f64>,

    /// Blow-up threshold M on max(‖u‖∞, ‖u_t‖∞).
    #[arg(long)]
    threshold: Option<f64>,

    /// Time cap for the run.
    #[arg(long)]
    t_cap: Option<f64>,

    /// Sampling interval for histories and functionals.
    #[arg(long)]
    sample_dt: Option<f64>,
}

impl SolverArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        let s = &mut config.solver;
        set(&mut s.dr, self.dr);
        set(&mut s.cfl, self.cfl);
        set(&mut s.blowup_threshold, self.threshold);
        set(&mut s.t_cap, self.t_cap);
        set(&mut s.sample_dt, self.sample_dt);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Derived constants and predicted lifespan exponents for the problem
    /// parameters.
    #[command(after_help = "Emits exponents.csv (regime, form, exponent, source_dimension,\n\
                            dominant, asserted) and exponents.jsonl (one prediction per line).")]
    Exponents {
        #[command(flatten)]
        problem: ProblemArgs,
    },

    /// Metric diagnostics.
    Geometry {
        #[command(subcommand)]
        action: GeometryAction,
    },

    /// Solves the radial eigenfunction family and certifies the envelope
    /// bound with a single constant.
    #[command(after_help = "Emits eigenfunction.csv (lambda, fitted_c0, strictness_margin,\n\
                            bound_holds) and eigenfunction_lambda_*.dat (r, phi, envelope).")]
    Eigenfunction {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Eigenvalue grid, comma-separated.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Outer radius of the eigenfunction grid.
        #[arg(long)]
        r_max: Option<f64>,
        /// Eigenfunction grid spacing.
        #[arg(long)]
        dr: Option<f64>,
    },

    /// Fits the decay exponent of cone integrals of the dual test function
    /// ψ^m against the closed-form prediction.
    #[command(name = "psi-decay")]
    #[command(after_help = "Emits psi_decay.csv (m, fitted_exponent, predicted_exponent,\n\
                            abs_error, r_squared) and psi_integral_m_*.dat (one_plus_t, integral).")]
    PsiDecay {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Temporal frequency λ₁ of the test function.
        #[arg(long)]
        lambda1: Option<f64>,
        /// Integrand powers m, comma-separated.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<f64>>,
        /// Fit window extent [T_*, t_factor·T_*].
        #[arg(long)]
        t_factor: Option<f64>,
        /// Number of fit samples across the window.
        #[arg(long)]
        samples: Option<usize>,
        /// Acceptance band around the predicted exponent.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Eigenfunction grid spacing under ψ.
        #[arg(long)]
        dr: Option<f64>,
    },

    /// Integrates the blow-up ODE family F'' = k(1+t)^(−α)F^β over a δ
    /// ladder and fits T(δ) against the predicted power law.
    #[command(after_help = "Emits kato_sweep.csv (delta, t_num, blew_up, precision_limited,\n\
                            excluded), kato_sweep.jsonl, and kato_scaling.dat (inv_delta, t_num).")]
    Kato {
        /// Superlinearity β > 1.
        #[arg(long)]
        beta: Option<f64>,
        /// Envelope growth rate a ≥ 1 in F ≥ δ(1+t)^a.
        #[arg(long)]
        a: Option<f64>,
        /// Weight decay α in k(1+t)^(−α).
        #[arg(long)]
        kato_alpha: Option<f64>,
        /// Nonlinearity weight k.
        #[arg(long)]
        k: Option<f64>,
        /// Explicit δ ladder, comma-separated (wins over the range below).
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        /// Smallest δ of the generated log-spaced ladder.
        #[arg(long)]
        delta_min: Option<f64>,
        /// Largest δ of the generated log-spaced ladder.
        #[arg(long)]
        delta_max: Option<f64>,
        /// Ladder size.
        #[arg(long)]
        count: Option<usize>,
        /// Relative slope-agreement band for the verdict.
        #[arg(long)]
        tolerance: Option<f64>,
    },

    /// Runs the wave solver once and records sup-norm, support edge, and
    /// profile snapshots.
    #[command(after_help = "Emits run_history.csv (t, sup_norm, support_edge), sup_norm.dat,\n\
                            and snapshots.dat (r and one u column per snapshot time).")]
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Snapshot times for the profile columns, comma-separated.
        #[arg(long, value_delimiter = ',')]
        snapshots: Option<Vec<f64>>,
    },

    /// Measures the numerical lifespan across an ε ladder and fits the
    /// scaling law against the classified prediction.
    #[command(name = "lifespan-sweep")]
    #[command(after_help = "Emits lifespan_sweep.csv (epsilon, t_num, threshold, dr, flags),\n\
                            lifespan_sweep.jsonl (records plus fitted slope and prediction),\n\
                            and lifespan_scaling.dat (inv_epsilon, t_num).")]
    LifespanSweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// ε ladder, comma-separated (≥ 4 values).
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },

    /// Runs the solver and checks the averaged-functional machinery: ODE
    /// identity, monotonicity ladder, lower bounds, Hölder chain.
    #[command(after_help = "Emits functionals.csv (t, F, G1, G2, H, L, N),\n\
                            functional_checks.csv (check, passed, margin, tolerance),\n\
                            and functionals.dat (t, F, G2, N).")]
    Functionals {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },

    /// Prints the effective TOML configuration (defaults merged with
    /// --config and flags).
    #[command(name = "print-config")]
    PrintConfig {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Subcommand)]
enum GeometryAction {
    /// Verifies ellipticity δ₀ ≤ K ≤ 1/δ₀ and fits the long-range decay
    /// constants of K − 1 on the working range.
    #[command(after_help = "Emits metric_profile.dat (r, K, geodesic_r).")]
    Check {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Working range for the ellipticity scan.
        #[arg(long)]
        r_max: Option<f64>,
    },
}

fn set<T>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let mut config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    set(&mut config.outputs.directory, cli.out.clone());
    set(&mut config.outputs.formats, cli.format.clone());

    let pipeline = match &cli.command {
        Command::Exponents { problem } => {
            problem.apply(&mut config);
            Pipeline::Exponents
        }
        Command::Geometry { action } => {
            let GeometryAction::Check { problem, metric, r_max } = action;
            problem.apply(&mut config);
            metric.apply(&mut config);
            if let Some(r) = r_max {
                config.eigenfunction.r_max = *r;
            }
            Pipeline::GeometryCheck
        }
        Command::Eigenfunction { problem, metric, lambdas, r_max, dr } => {
            problem.apply(&mut config);
            metric.apply(&mut config);
            set(&mut config.eigenfunction.lambdas, lambdas.clone());
            set(&mut config.eigenfunction.r_max, *r_max);
            set(&mut config.eigenfunction.dr, *dr);
            Pipeline::Eigenfunction
        }
        Command::PsiDecay { problem, metric, lambda1, m, t_factor, samples, tolerance, dr } => {
            problem.apply(&mut config);
            metric.apply(&mut config);
            set(&mut config.psi.lambda1, *lambda1);
            set(&mut config.psi.m_values, m.clone());
            set(&mut config.psi.t_factor, *t_factor);
            set(&mut config.psi.samples, *samples);
            set(&mut config.psi.tolerance, *tolerance);
            set(&mut config.psi.dr, *dr);
            Pipeline::PsiDecay
        }
        Command::Kato {
            beta,
            a,
            kato_alpha,
            k,
            deltas,
            delta_min,
            delta_max,
            count,
            tolerance,
        } => {
            let s = &mut config.kato;
            set(&mut s.beta, *beta);
            set(&mut s.a, *a);
            set(&mut s.kato_alpha, *kato_alpha);
            set(&mut s.k, *k);
            set(&mut s.deltas, deltas.clone());
            set(&mut s.delta_min, *delta_min);
            set(&mut s.delta_max, *delta_max);
            set(&mut s.count, *count);
            set(&mut s.tolerance, *tolerance);
            Pipeline::Kato
        }
        Command::Simulate { problem, metric, data, solver, snapshots } => {
            problem.apply(&mut config);
            metric.apply(&mut config);
            data.apply(&mut config);
            solver.apply(&mut config);
            set(&mut config.solver.snapshot_times, snapshots.clone());
            Pipeline::Simulate
        }
        Command::LifespanSweep { problem, metric, data, solver, epsilons } => {
            problem.apply(&mut config);
            metric.apply(&mut config);
            data.apply(&mut config);
            solver.apply(&mut config);
            set(&mut config.sweep.epsilons, epsilons.clone());
            Pipeline::LifespanSweep
        }
        Command::Functionals { problem, metric, data, solver } => {
            problem.apply(&mut config);
            metric.apply(&mut config);
            data.apply(&mut config);
            solver.apply(&mut config);
            Pipeline::Functionals
        }
        Command::PrintConfig { problem, metric, data, solver } => {
            problem.apply(&mut config);
            metric.apply(&mut config);
            data.apply(&mut config);
            solver.apply(&mut config);
            print!("{}", config.to_toml_string());
            return 0;
        }
    };

    match run_experiment(&config, pipeline) {
        Ok(bundle) => report(&bundle),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

fn load_config(cli: &Cli) -> lifespan_core::Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => ExperimentConfig::from_toml_file(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn report(bundle: &Bundle) -> i32 {
    for line in &bundle.report {
        println!("{line}");
    }
    for file in &bundle.files {
        println!("wrote {}", file.display());
    }
    if bundle.check_failures.is_empty() {
        0
    } else {
        for failure in &bundle.check_failures {
            eprintln!("check failed: {failure}");
        }
        2
    }
}

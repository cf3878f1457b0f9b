//! Command-line entry point. Exit codes: 0 success, 1 bad config or
//! arguments, 2 a checked bound was violated (or an acceptance criterion
//! failed), 3 chains diverged.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ssl_cli::config::{AutoScheduleSpec, BoundsSpec, ExperimentConfig, Kind, ModelSpec};
use ssl_cli::experiments;
use ssl_cli::report::{self, Artifacts};
use ssl_cli::verify;
use ssl_core::sde::{DiffusionSchedule, Family};

#[derive(Parser)]
#[command(name = "ssl", version, about = "Score-based sampling laboratory")]
struct Cli {
    /// Worker threads for chain-level parallelism; 0 uses all cores.
    /// The SSL_THREADS environment variable overrides this flag.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run an acceptance suite: closed_forms, soundness, simulation, or all.
    Verify { suite: String },
    /// Print the annealing ladder for the given target constants.
    Schedule(ScheduleArgs),
    /// Evaluate a closed-form bound and print its table.
    #[command(subcommand)]
    Bounds(BoundsCmd),
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    dim: usize,
    /// Variance of the finest smoothing level.
    #[arg(long)]
    sigma_min_sq: f64,
    /// Log-Sobolev constant of the target.
    #[arg(long)]
    c_ls: f64,
    /// Norm of the target mean.
    #[arg(long)]
    m1: f64,
    /// TV accuracy the ladder is sized for.
    #[arg(long)]
    eps_tv: f64,
    /// Geometric growth is 1 + ratio_c / sqrt(dim).
    #[arg(long, default_value_t = 1.0)]
    ratio_c: f64,
    /// Score Lipschitz constant entering the step-size rules.
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    /// Artifact directory; omit to print to stdout.
    #[arg(long)]
    output: Option<String>,
}

impl ScheduleArgs {
    fn into_config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::bare(Kind::Schedule, 0);
        cfg.output = self.output;
        cfg.schedule = Some(AutoScheduleSpec {
            dim: self.dim,
            sigma_min_sq: self.sigma_min_sq,
            c_ls: self.c_ls,
            m1: self.m1,
            eps_tv: self.eps_tv,
            ratio_c: self.ratio_c,
            l: self.l,
        });
        cfg
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    /// Variance-exploding forward noising.
    Smld,
    /// Variance-preserving forward noising.
    Ddpm,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Smld => Family::Smld,
            FamilyArg::Ddpm => Family::Ddpm,
        }
    }
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Langevin chi-square recursion table.
    Lmc {
        #[arg(long)]
        dim: usize,
        /// Score Lipschitz constant.
        #[arg(long)]
        l: f64,
        /// Log-Sobolev constant of the target.
        #[arg(long)]
        c_ls: f64,
        /// Uniform score-error bound.
        #[arg(long)]
        eps1: f64,
        #[arg(long)]
        step_size: f64,
        #[arg(long)]
        steps: usize,
        /// Initial chi-square divergence.
        #[arg(long, default_value_t = 0.0)]
        chi0_sq: f64,
        #[arg(long)]
        output: Option<String>,
    },
    /// Predictor chi-square recursion table along a forward model.
    Predictor {
        #[arg(long)]
        dim: usize,
        /// Lipschitz constant of every noised score along the run.
        #[arg(long)]
        l: f64,
        /// Lipschitz constant of the estimated score.
        #[arg(long)]
        l_s: f64,
        /// Log-Sobolev constant of the data distribution.
        #[arg(long)]
        c_ls: f64,
        /// Second moment of the data distribution.
        #[arg(long)]
        m2: f64,
        /// Uniform score-error bound.
        #[arg(long)]
        eps1: f64,
        #[arg(long)]
        step_size: f64,
        #[arg(long)]
        steps: usize,
        /// Initial chi-square; omitted means the prior-convergence bound.
        #[arg(long)]
        chi0_sq: Option<f64>,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Forward horizon T.
        #[arg(long)]
        horizon: f64,
        /// Constant diffusion g(t) = C (the default, with C = 1).
        #[arg(long, value_name = "C")]
        g_const: Option<f64>,
        /// Exponential diffusion g(t) = A * B^t.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        g_exp: Option<Vec<f64>>,
        /// Diffusion g(t) = sqrt(B + ALPHA t).
        #[arg(long, num_args = 2, value_names = ["B", "ALPHA"])]
        g_affine_sq: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Corrector run plan sized for a TV / chi-square accuracy pair.
    CorrectorBudget {
        /// TV accuracy target.
        #[arg(long)]
        eps_tv: f64,
        /// Chi-square accuracy of the warm start.
        #[arg(long)]
        eps_chi: f64,
        /// Warm-start chi-square level the plan assumes.
        #[arg(long)]
        k_chi: f64,
        #[arg(long)]
        dim: usize,
        /// Score Lipschitz constant.
        #[arg(long)]
        l: f64,
        /// Log-Sobolev constant of the target.
        #[arg(long)]
        c_ls: f64,
        /// Multiplier on the minimal runtime.
        #[arg(long, default_value_t = 1.0)]
        c_t_mult: f64,
        #[arg(long)]
        output: Option<String>,
    },
    /// Chi-square warm-start bound of a Gaussian against the smoothed target.
    WarmStart {
        /// Norm of the target mean.
        #[arg(long)]
        m1: f64,
        /// Log-Sobolev constant of the target.
        #[arg(long)]
        c_ls: f64,
        #[arg(long)]
        dim: usize,
        /// Smoothing variance.
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        output: Option<String>,
    },
}

impl BoundsCmd {
    fn into_config(self) -> Result<ExperimentConfig, String> {
        let mut cfg = ExperimentConfig::bare(Kind::Bounds, 0);
        match self {
            BoundsCmd::Lmc { dim, l, c_ls, eps1, step_size, steps, chi0_sq, output } => {
                cfg.output = output;
                cfg.bounds =
                    Some(BoundsSpec::Lmc { dim, l, c_ls, eps1, step_size, steps, chi0_sq });
            }
            BoundsCmd::Predictor {
                dim,
                l,
                l_s,
                c_ls,
                m2,
                eps1,
                step_size,
                steps,
                chi0_sq,
                family,
                horizon,
                g_const,
                g_exp,
                g_affine_sq,
                output,
            } => {
                let given =
                    g_const.is_some() as u8 + g_exp.is_some() as u8 + g_affine_sq.is_some() as u8;
                if given > 1 {
                    return Err("pick at most one diffusion flag: \
                                --g-const, --g-exp, or --g-affine-sq"
                        .into());
                }
                let schedule = if let Some(c) = g_const {
                    DiffusionSchedule::Constant { c }
                } else if let Some(v) = g_exp {
                    DiffusionSchedule::Exponential { a: v[0], b: v[1] }
                } else if let Some(v) = g_affine_sq {
                    DiffusionSchedule::AffineSq { b: v[0], alpha: v[1] }
                } else {
                    DiffusionSchedule::Constant { c: 1.0 }
                };
                cfg.output = output;
                cfg.model = Some(ModelSpec { family: family.into(), horizon, schedule });
                cfg.bounds = Some(BoundsSpec::Predictor {
                    dim,
                    l,
                    l_s,
                    c_ls,
                    m2,
                    eps1,
                    step_size,
                    steps,
                    chi0_sq,
                });
            }
            BoundsCmd::CorrectorBudget { eps_tv, eps_chi, k_chi, dim, l, c_ls, c_t_mult, output } => {
                cfg.output = output;
                cfg.bounds = Some(BoundsSpec::CorrectorBudget {
                    eps_tv,
                    eps_chi,
                    k_chi,
                    dim,
                    l,
                    c_ls,
                    c_t_mult,
                });
            }
            BoundsCmd::WarmStart { m1, c_ls, dim, sigma2, output } => {
                cfg.output = output;
                cfg.bounds = Some(BoundsSpec::WarmStart { m1, c_ls, dim, sigma2 });
            }
        }
        Ok(cfg)
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match std::env::var("SSL_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => return fail(format!("SSL_THREADS must be a thread count, got `{v}`")),
        },
        Err(_) => cli.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return fail(e),
    };

    match cli.cmd {
        Cmd::Run { config } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            run_config(&pool, cfg)
        }
        Cmd::Verify { suite } => {
            let indices: Vec<usize> = if suite == "all" {
                (1..=verify::CRITERIA.len()).collect()
            } else if let Some(s) = verify::suite(&suite) {
                s.to_vec()
            } else {
                return fail(format!(
                    "unknown suite `{suite}`; expected one of {}, or all",
                    verify::SUITE_NAMES.join(", ")
                ));
            };
            let mut all_pass = true;
            for i in indices {
                let outcome = pool.install(|| verify::run_criterion(i));
                println!("{}", outcome.lines());
                all_pass &= outcome.passed();
            }
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Cmd::Schedule(args) => run_config(&pool, args.into_config()),
        Cmd::Bounds(cmd) => match cmd.into_config() {
            Ok(cfg) => run_config(&pool, cfg),
            Err(e) => fail(e),
        },
    }
}

fn run_config(pool: &rayon::ThreadPool, cfg: ExperimentConfig) -> ExitCode {
    let exp = experiments::find(cfg.kind);
    let art = match pool.install(|| exp.run(&cfg)) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    emit(&cfg, &art)
}

fn emit(cfg: &ExperimentConfig, art: &Artifacts) -> ExitCode {
    match &cfg.output {
        Some(dir) => match report::write_artifacts(Path::new(dir), cfg, art) {
            Ok(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
            Err(e) => return fail(format!("cannot write artifacts to {dir}: {e}")),
        },
        None => print!("{}", art.table.to_csv()),
    }
    if !art.summary.is_empty() {
        print!("{}", art.summary);
        if !art.summary.ends_with('\n') {
            println!();
        }
    }
    for v in &art.violations {
        println!("VIOLATION: {v}");
    }
    if art.diverged > 0 {
        println!("DIVERGED: {} chains", art.diverged);
        return ExitCode::from(3);
    }
    if !art.violations.is_empty() {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

//! The experiment registry: each config `kind` maps to one strategy behind a
//! common trait, looked up by name at runtime. All of them reduce to calls
//! into `ssl-core` plus row bookkeeping.

use ssl_core::bounds::{
    self, all_hold, chi2_isotropic_gaussians, framework_tv_budget, LmcParams, PredictorTheory,
};
use ssl_core::divergences::{
    empirical_moments, histogram_tv_1d, histogram_tv_floor, mode_masses, QuadratureGrid,
};
use ssl_core::oracle::{BadSet, OracleBase, OracleMode, ScoreOracle};
use ssl_core::samplers::{
    annealed_lmc, annealed_oracles, coupled_lmc_run, gaussian_exact_chain, lmc_run,
    predictor_corrector, predictor_run, CorrectorLeg, CoupledPlan, ExactChainKind,
    ExactChainSpec, InitDist, RunOptions, RunShape, SamplerRun,
};
use ssl_core::targets::{BumpTarget, Density, GaussianMixture};

use crate::config::{
    BoundsSpec, ConfigError, ConfigResult, CorrectorPlacement, ExperimentConfig, Kind, OracleSpec,
};
use crate::report::{
    Artifacts, METHOD_CLOSED_FORM, METHOD_CONFIG, METHOD_EXACT_CHAIN, METHOD_HISTOGRAM,
    METHOD_MONTE_CARLO, METHOD_QUADRATURE, METHOD_RECURSION,
};

pub trait Experiment: Sync {
    fn kind(&self) -> Kind;
    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts>;
}

pub static REGISTRY: &[&dyn Experiment] = &[
    &LmcExperiment,
    &AnnealExperiment,
    &PredictorExperiment,
    &PcExperiment,
    &CoupledExperiment,
    &CounterexampleExperiment,
    &BoundsExperiment,
    &ScheduleExperiment,
];

pub fn find(kind: Kind) -> &'static dyn Experiment {
    REGISTRY
        .iter()
        .copied()
        .find(|e| e.kind() == kind)
        .expect("every kind is registered")
}

fn run_options(cfg: &ExperimentConfig) -> RunOptions {
    RunOptions {
        diag_stride: cfg.measure.diag_stride,
        snapshots: cfg.measure.snapshots.clone(),
        moments_after: cfg.measure.moments_after,
    }
}

/// Indices `0, s, 2s, ..., last` with at most `cap + 1` entries.
fn strided(len: usize, cap: usize) -> impl Iterator<Item = usize> {
    let stride = len.div_ceil(cap).max(1);
    (0..len).step_by(stride).chain(if len > 0 { Some(len - 1) } else { None })
        .scan(usize::MAX, |prev, i| {
            let dup = *prev == i;
            *prev = i;
            Some((i, dup))
        })
        .filter_map(|(i, dup)| (!dup).then_some(i))
}

/// A comfortably covering interval for a 1-d mixture.
fn mixture_span(m: &GaussianMixture) -> (f64, f64) {
    let sd = m
        .variances()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v))
        .sqrt();
    let lo = m.means().iter().map(|mu| mu[0]).fold(f64::INFINITY, f64::min);
    let hi = m.means().iter().map(|mu| mu[0]).fold(f64::NEG_INFINITY, f64::max);
    (lo - 10.0 * sd, hi + 10.0 * sd)
}

/// Shared row bookkeeping for anything that produced a [`SamplerRun`].
fn record_run(
    out: &mut Artifacts,
    cfg: &ExperimentConfig,
    run: &SamplerRun,
    final_step: usize,
    target: Option<&GaussianMixture>,
) {
    let d = run.dim;
    for diag in &run.diags {
        out.table.push(diag.step, "mean_drift_norm", diag.mean_drift_norm, METHOD_MONTE_CARLO);
        out.table.push(diag.step, "max_drift_norm", diag.max_drift_norm, METHOD_MONTE_CARLO);
    }
    for snap in &run.snapshots {
        if snap.step == final_step {
            continue;
        }
        let (mean, cov) = empirical_moments(&snap.states, d);
        for a in 0..d {
            out.table.push(snap.step, format!("mean_{a}"), mean[a], METHOD_MONTE_CARLO);
            out.table.push(snap.step, format!("var_{a}"), cov[a * d + a], METHOD_MONTE_CARLO);
        }
    }
    let (mean, cov) = empirical_moments(&run.states, d);
    for a in 0..d {
        out.table.push(final_step, format!("mean_{a}"), mean[a], METHOD_MONTE_CARLO);
        out.table.push(final_step, format!("var_{a}"), cov[a * d + a], METHOD_MONTE_CARLO);
    }
    if let Some(m) = &run.moments {
        for (a, (pm, pv)) in m.mean().iter().zip(m.variance()).enumerate() {
            out.table.push(final_step, format!("pooled_mean_{a}"), *pm, METHOD_MONTE_CARLO);
            out.table.push(final_step, format!("pooled_var_{a}"), pv, METHOD_MONTE_CARLO);
        }
    }
    if let Some(mix) = target {
        if cfg.measure.histogram_tv && d == 1 {
            let (lo, hi) = mixture_span(mix);
            if let (Ok(tv), Ok(floor)) = (
                histogram_tv_1d(&run.states, mix, lo, hi),
                histogram_tv_floor(mix, run.chains, cfg.seed.wrapping_add(1), lo, hi),
            ) {
                out.table.push(final_step, "tv_histogram", tv, METHOD_HISTOGRAM);
                out.table.push(final_step, "tv_floor", floor, METHOD_HISTOGRAM);
            }
        }
        if cfg.measure.mode_masses {
            for (c, mass) in mode_masses(&run.states, mix).iter().enumerate() {
                out.table.push(final_step, format!("mode_mass_{c}"), *mass, METHOD_MONTE_CARLO);
            }
        }
    }
    out.table.push(final_step, "diverged_chains", run.divergences.len() as f64, METHOD_MONTE_CARLO);
    out.diverged = run.divergences.len();
}

struct LmcExperiment;

impl Experiment for LmcExperiment {
    fn kind(&self) -> Kind {
        Kind::Lmc
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let target = cfg.target()?;
        let oracle = cfg.oracle.build(target.oracle_base()?)?;
        let s = cfg.sampler()?;
        let shape = RunShape { dim: oracle.dim(), chains: s.chains, seed: cfg.seed };
        let init = s.require_init()?;
        let run = lmc_run(&shape, &init, &oracle, 0.0, s.step_size, s.steps, &run_options(cfg))?;

        let mut out = Artifacts::default();
        let mix = target.mixture().ok();
        record_run(&mut out, cfg, &run, s.steps, mix.as_ref());
        out.summary = format!(
            "langevin: {} chains x {} steps of h = {} ({} diverged)\n",
            s.chains,
            s.steps,
            s.step_size,
            run.divergences.len(),
        );
        Ok(out)
    }
}

struct AnnealExperiment;

impl Experiment for AnnealExperiment {
    fn kind(&self) -> Kind {
        Kind::Anneal
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        if cfg.oracle != OracleSpec::Exact {
            return Err(ConfigError(
                "anneal always walks exact smoothed scores; remove [oracle]".into(),
            ));
        }
        let mix = cfg.target()?.mixture()?;
        let schedule = cfg
            .anneal
            .as_ref()
            .ok_or_else(|| ConfigError("kind `anneal` needs [anneal]".into()))?
            .schedule()?;
        let s = cfg.sampler()?;
        let dim = mix.dim();
        let shape = RunShape { dim, chains: s.chains, seed: cfg.seed };
        let init = s.init_or(InitDist::Gaussian {
            mean: vec![0.0; dim],
            var: schedule.top().sigma2,
        });
        let oracles = annealed_oracles(&mix, &schedule);
        let run = annealed_lmc(&shape, &init, &oracles, &schedule, &run_options(cfg))?;

        let mut out = Artifacts::default();
        // Execution order is largest smoothing first.
        let mut done = 0usize;
        for lv in schedule.levels().iter().rev() {
            done += lv.steps;
            out.table.push(done, "level_sigma2", lv.sigma2, METHOD_CONFIG);
            out.table.push(done, "level_step_size", lv.step_size, METHOD_CONFIG);
        }
        record_run(&mut out, cfg, &run, schedule.total_steps(), Some(&mix));
        out.summary = format!(
            "annealed langevin: {} levels, {} total steps, {} chains ({} diverged)\n",
            schedule.num_levels(),
            schedule.total_steps(),
            s.chains,
            run.divergences.len(),
        );
        Ok(out)
    }
}

/// Exact-chain comparison inputs extractable from a predictor config: a
/// single-Gaussian data law and a constant-shift (or exact) oracle.
fn predictor_reference(
    mix: &GaussianMixture,
    oracle: &ScoreOracle,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    if mix.num_components() != 1 {
        return None;
    }
    let shift = match oracle.mode() {
        OracleMode::Exact => vec![0.0; mix.dim()],
        OracleMode::ConstantShift { direction, eps1 } => {
            direction.iter().map(|c| c * eps1).collect()
        }
        _ => return None,
    };
    Some((mix.means()[0].clone(), mix.variances()[0], shift))
}

struct PredictorExperiment;

impl Experiment for PredictorExperiment {
    fn kind(&self) -> Kind {
        Kind::Predictor
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let mix = cfg.target()?.mixture()?;
        let model = cfg.model()?.build()?;
        let s = cfg.sampler()?;
        let oracle = cfg.oracle.build(OracleBase::diffused(mix.clone(), model.clone()))?;
        let shape = RunShape { dim: mix.dim(), chains: s.chains, seed: cfg.seed };
        let run = predictor_run(&shape, &model, &oracle, s.step_size, s.steps, &run_options(cfg))?;

        let mut out = Artifacts::default();
        record_run(&mut out, cfg, &run, s.steps, Some(&mix));
        out.summary = format!(
            "predictor: {} chains x {} steps of h = {} over horizon {} ({} diverged)\n",
            s.chains,
            s.steps,
            s.step_size,
            model.horizon,
            run.divergences.len(),
        );

        if let Some((data_mean, data_var, shift)) = predictor_reference(&mix, &oracle) {
            let spec = ExactChainSpec {
                kind: ExactChainKind::Predictor {
                    model: model.clone(),
                    data_mean,
                    data_var,
                },
                init_mean: vec![0.0; mix.dim()],
                init_var: model.prior_variance(),
                shift,
                step_size: s.step_size,
                steps: s.steps,
            };
            let chain = gaussian_exact_chain(&spec)?;
            let chi0 = chain[0].chi2;
            for k in strided(chain.len(), 1000) {
                out.table.push(chain[k].step, "chi2_exact", chain[k].chi2, METHOD_EXACT_CHAIN);
            }
            if chi0.is_finite() {
                let theory = PredictorTheory {
                    model: model.clone(),
                    dim: mix.dim(),
                    l: (1.0f64).max(1.0 / data_var.min(1.0)),
                    l_s: (1.0f64).max(1.0 / data_var.min(1.0)),
                    c_ls_data: data_var,
                    m2_data: mix.m2(),
                };
                let bound = bounds::predictor_chi2_recursion(
                    &theory,
                    oracle.sup_error_bound(),
                    s.step_size,
                    s.steps,
                    chi0,
                )?;
                for k in strided(bound.per_step.len(), 1000) {
                    out.table.push(k, "chi2_bound", bound.per_step[k], METHOD_RECURSION);
                }
                let sound = all_hold(&bound.flags);
                for f in &bound.flags {
                    out.summary.push_str(&format!(
                        "hypothesis {}: {} ({})\n",
                        f.name,
                        if f.holds { "holds" } else { "VIOLATED" },
                        f.detail,
                    ));
                }
                if sound {
                    for (k, (b, c)) in bound.per_step.iter().zip(&chain).enumerate() {
                        if *b < c.chi2 * (1.0 - 1e-12) {
                            out.note_violation(format!(
                                "chi2 bound {b} below exact chain {} at step {k}",
                                c.chi2
                            ));
                            break;
                        }
                    }
                }
            } else {
                out.summary.push_str("exact chain starts at infinite chi2; bound skipped\n");
            }
        }
        Ok(out)
    }
}

struct PcExperiment;

impl Experiment for PcExperiment {
    fn kind(&self) -> Kind {
        Kind::Pc
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let mix = cfg.target()?.mixture()?;
        let model = cfg.model()?.build()?;
        let s = cfg.sampler()?;
        let pc = cfg.pc.as_ref().ok_or_else(|| ConfigError("kind `pc` needs [pc]".into()))?;
        let oracle = cfg.oracle.build(OracleBase::diffused(mix.clone(), model.clone()))?;
        let shape = RunShape { dim: mix.dim(), chains: s.chains, seed: cfg.seed };

        let leg = CorrectorLeg { step_size: pc.corrector_step_size, steps: pc.corrector_steps };
        let legs: Vec<CorrectorLeg> = match pc.placement {
            CorrectorPlacement::Every => vec![leg],
            CorrectorPlacement::Last => {
                let mut v = vec![CorrectorLeg { step_size: pc.corrector_step_size, steps: 0 }; s.steps];
                if let Some(last) = v.last_mut() {
                    *last = leg;
                }
                v
            }
        };
        let run = predictor_corrector(
            &shape,
            &model,
            &oracle,
            s.step_size,
            s.steps,
            &legs,
            &run_options(cfg),
        )?;

        let total = s.steps + legs.iter().map(|l| l.steps).sum::<usize>()
            * if legs.len() == 1 { s.steps } else { 1 };
        let mut out = Artifacts::default();
        record_run(&mut out, cfg, &run, total, Some(&mix));
        out.summary = format!(
            "predictor-corrector: {} predictor steps (h = {}), correctors {:?} x {} steps \
             (h = {}), {} chains ({} diverged)\n",
            s.steps,
            s.step_size,
            pc.placement,
            pc.corrector_steps,
            pc.corrector_step_size,
            s.chains,
            run.divergences.len(),
        );
        Ok(out)
    }
}

struct CoupledExperiment;

impl Experiment for CoupledExperiment {
    fn kind(&self) -> Kind {
        Kind::Coupled
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let target = cfg.target()?;
        let oracle = cfg.oracle.build(target.oracle_base()?)?;
        let s = cfg.sampler()?;
        let cp = cfg
            .coupled
            .as_ref()
            .ok_or_else(|| ConfigError("kind `coupled` needs [coupled]".into()))?;
        let shape = RunShape { dim: oracle.dim(), chains: s.chains, seed: cfg.seed };
        let init = s.require_init()?;
        let plan = CoupledPlan { step_size: s.step_size, steps: s.steps, threshold: cp.threshold };
        let run = coupled_lmc_run(&shape, &init, &oracle, 0.0, &plan)?;

        let mut out = Artifacts::default();
        let n = s.chains as f64;
        for k in strided(s.steps, 2000) {
            out.table.push(k + 1, "disagree_frac", run.disagree[k] as f64 / n, METHOD_MONTE_CARLO);
            out.table.push(k + 1, "bad_hit_frac", run.bad_hits[k] as f64 / n, METHOD_MONTE_CARLO);
        }
        out.table.push(s.steps, "diverged_chains", run.divergences.len() as f64, METHOD_MONTE_CARLO);
        out.diverged = run.divergences.len();
        out.summary = format!(
            "coupled langevin: {} chains x {} steps, splice threshold {} \
             (final disagreement {:.3e})\n",
            s.chains,
            s.steps,
            cp.threshold,
            run.final_disagree_frac(),
        );

        // Disagreement budget: needs a 1-d static target and a closed-form
        // initial chi-square, i.e. a Gaussian init against a single-Gaussian
        // reference (the mismatch oracle's reference is standard normal).
        let reference = oracle.target_at(0.0);
        let budget_inputs = match (&reference, &init) {
            (ssl_core::oracle::FrozenTarget::Mixture(m), InitDist::Gaussian { mean, var })
                if m.num_components() == 1 && m.dim() == 1 =>
            {
                chi2_isotropic_gaussians(mean, *var, &m.means()[0], m.variances()[0])
                    .ok()
                    .filter(|c| c.is_finite())
                    .map(|chi0| (m.clone(), chi0))
            }
            _ => None,
        };
        if let Some((m, chi0)) = budget_inputs {
            let (lo, hi) = mixture_span(&m);
            let delta = BadSet::new(cp.threshold)?.measure_1d(&oracle, 0.0, lo, hi, 16384)?;
            out.table.push(0, "bad_set_mass", delta, METHOD_QUADRATURE);
            let params = LmcParams {
                dim: 1,
                l: cp.l,
                c_ls: cp.c_ls,
                eps1: cp.threshold,
                step_size: s.step_size,
            };
            let bound = bounds::lmc_chi2_recursion(&params, chi0, s.steps)?;
            // The splice is checked before each step, so step k couples at
            // the law after k steps: D_k^2 = chi-square bound at step k.
            let d_seq: Vec<f64> = bound.per_step[..s.steps].iter().map(|c| c.sqrt()).collect();
            let deltas = vec![delta; s.steps];
            let budget = framework_tv_budget(&d_seq, &deltas)?;
            for k in strided(s.steps, 2000) {
                let acc = framework_tv_budget(&d_seq[..=k], &deltas[..=k])?.coupling;
                out.table.push(k + 1, "disagree_budget", acc, METHOD_RECURSION);
            }
            out.table.push(s.steps, "coupling_budget_final", budget.coupling, METHOD_RECURSION);
            let sound = all_hold(&bound.flags);
            for f in &bound.flags {
                out.summary.push_str(&format!(
                    "hypothesis {}: {} ({})\n",
                    f.name,
                    if f.holds { "holds" } else { "VIOLATED" },
                    f.detail,
                ));
            }
            if sound && run.final_disagree_frac() > budget.coupling {
                out.note_violation(format!(
                    "empirical disagreement {} exceeds coupling budget {}",
                    run.final_disagree_frac(),
                    budget.coupling,
                ));
            }
        } else {
            out.summary.push_str(
                "no closed-form chi-square for this init/target; budget skipped\n",
            );
        }
        Ok(out)
    }
}

struct CounterexampleExperiment;

impl Experiment for CounterexampleExperiment {
    fn kind(&self) -> Kind {
        Kind::Counterexample
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let spec = cfg
            .counterexample
            .as_ref()
            .ok_or_else(|| ConfigError("kind `counterexample` needs [counterexample]".into()))?;
        let mut out = Artifacts::default();
        let gauss = GaussianMixture::standard(1);
        let mut prev: Option<(f64, f64)> = None;
        for (i, &l) in spec.l_values.iter().enumerate() {
            let bump = BumpTarget::new(l)?;
            let (err_sq, tv) = dent_error_and_tv(&gauss, &bump, l)?;
            let bound = bump.score_error_sq_bound();
            out.table.push(i, "dent_distance", l, METHOD_CONFIG);
            out.table.push(i, "score_error_l2_sq", err_sq, METHOD_QUADRATURE);
            out.table.push(i, "score_error_l2_sq_bound", bound, METHOD_CLOSED_FORM);
            out.table.push(i, "tv_gap", tv, METHOD_QUADRATURE);
            if err_sq > bound {
                out.note_violation(format!(
                    "measured squared score error {err_sq} exceeds its bound {bound} at distance {l}"
                ));
            }
            if let Some((perr, ptv)) = prev {
                if err_sq >= perr {
                    out.note_violation(format!(
                        "squared score error failed to decrease at distance {l}"
                    ));
                }
                if tv <= ptv {
                    out.note_violation(format!("tv gap failed to increase at distance {l}"));
                }
            }
            prev = Some((err_sq, tv));
        }
        out.summary = format!(
            "dent sweep over {:?}: score error shrinks while the sampling gap grows\n",
            spec.l_values,
        );
        Ok(out)
    }
}

/// Measured squared L2(p) score mismatch and `TV(p, q_l)` for the dented
/// Gaussian. TV is computed as `1 - int min(p, q)`, which stays accurate when
/// the overlap is at the 1e-14 scale where `int |p - q| / 2` loses every
/// significant digit to rounding.
pub fn dent_error_and_tv(
    gauss: &GaussianMixture,
    bump: &BumpTarget,
    l: f64,
) -> ConfigResult<(f64, f64)> {
    let err_grid = QuadratureGrid::new(vec![0.5 * l - 0.5], vec![1.5 * l + 0.5], 8193)?;
    let mut pert = [0.0];
    let mismatch = ScoreOracle::bump_mismatch(l)?;
    let err_sq = err_grid.integrate(|x| {
        mismatch.perturbation_into(x, 0.0, &mut pert);
        pert[0] * pert[0] * gauss.density(x)
    });
    let overlap_grid = QuadratureGrid::new(vec![-12.0], vec![1.5 * l + 8.0], 32769)?;
    let overlap = overlap_grid.integrate(|x| gauss.density(x).min(bump.density(x)));
    Ok((err_sq, 1.0 - overlap))
}

struct BoundsExperiment;

impl Experiment for BoundsExperiment {
    fn kind(&self) -> Kind {
        Kind::Bounds
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let spec = cfg
            .bounds
            .as_ref()
            .ok_or_else(|| ConfigError("kind `bounds` needs [bounds]".into()))?;
        let mut out = Artifacts::default();
        match spec {
            BoundsSpec::Lmc { dim, l, c_ls, eps1, step_size, steps, chi0_sq } => {
                let params = LmcParams {
                    dim: *dim,
                    l: *l,
                    c_ls: *c_ls,
                    eps1: *eps1,
                    step_size: *step_size,
                };
                let b = bounds::lmc_chi2_recursion(&params, *chi0_sq, *steps)?;
                for k in strided(b.per_step.len(), 2000) {
                    out.table.push(k, "chi2_bound", b.per_step[k], METHOD_RECURSION);
                }
                out.table.push(*steps, "chi2_bound_closed_form", b.closed_form_final, METHOD_CLOSED_FORM);
                out.table.push(*steps, "chi2_stationary_limit", b.stationary_limit, METHOD_CLOSED_FORM);
                out.summary = flags_summary("langevin chi2 recursion", &b.flags);
            }
            BoundsSpec::Predictor { dim, l, l_s, c_ls, m2, eps1, step_size, steps, chi0_sq } => {
                let model = cfg.model()?.build()?;
                let theory = PredictorTheory {
                    model: model.clone(),
                    dim: *dim,
                    l: *l,
                    l_s: *l_s,
                    c_ls_data: *c_ls,
                    m2_data: *m2,
                };
                let chi0 = match chi0_sq {
                    Some(c) => *c,
                    None => bounds::prior_chi2_bound(model.family, *c_ls, *dim, model.horizon)?,
                };
                let b = bounds::predictor_chi2_recursion(&theory, *eps1, *step_size, *steps, chi0)?;
                for k in strided(b.per_step.len(), 2000) {
                    out.table.push(k, "chi2_bound", b.per_step[k], METHOD_RECURSION);
                }
                out.table.push(0, "uniform_step_ceiling", theory.uniform_ceiling(256), METHOD_CLOSED_FORM);
                out.summary = flags_summary("predictor chi2 recursion", &b.flags);
            }
            BoundsSpec::CorrectorBudget { eps_tv, eps_chi, k_chi, dim, l, c_ls, c_t_mult } => {
                let b = bounds::corrector_budget(*eps_tv, *eps_chi, *k_chi, *dim, *l, *c_ls, *c_t_mult)?;
                out.table.push(0, "eps_l2_max", b.eps_l2_max, METHOD_CLOSED_FORM);
                out.table.push(0, "step_size", b.step_size, METHOD_CLOSED_FORM);
                out.table.push(0, "t_min", b.t_min, METHOD_CLOSED_FORM);
                out.table.push(0, "t_max", b.t_max, METHOD_CLOSED_FORM);
                out.table.push(0, "eps1", b.eps1, METHOD_CLOSED_FORM);
                out.summary = flags_summary("corrector run plan", &b.flags);
            }
            BoundsSpec::WarmStart { m1, c_ls, dim, sigma2 } => {
                let b = bounds::warm_start_chi2_bound(*m1, *c_ls, *dim, *sigma2)?;
                out.table.push(0, "chi2_warm_statement", b.statement, METHOD_CLOSED_FORM);
                out.table.push(0, "chi2_warm_proof", b.proof_version, METHOD_CLOSED_FORM);
                out.table.push(0, "chi2_warm_sound", b.sound, METHOD_CLOSED_FORM);
                out.summary = "warm-start chi2 bound in both published forms\n".to_string();
            }
        }
        Ok(out)
    }
}

fn flags_summary(what: &str, flags: &[ssl_core::bounds::HypothesisFlag]) -> String {
    let mut s = format!("{what}: {}\n", if all_hold(flags) { "sound" } else { "OUTSIDE HYPOTHESES" });
    for f in flags {
        s.push_str(&format!(
            "hypothesis {}: {} ({})\n",
            f.name,
            if f.holds { "holds" } else { "VIOLATED" },
            f.detail,
        ));
    }
    s
}

struct ScheduleExperiment;

impl Experiment for ScheduleExperiment {
    fn kind(&self) -> Kind {
        Kind::Schedule
    }

    fn run(&self, cfg: &ExperimentConfig) -> ConfigResult<Artifacts> {
        let spec = cfg
            .schedule
            .as_ref()
            .ok_or_else(|| ConfigError("kind `schedule` needs [schedule]".into()))?;
        let schedule = spec.build()?;
        let mut out = Artifacts::default();
        for (i, lv) in schedule.levels().iter().enumerate() {
            out.table.push(i, "sigma2", lv.sigma2, METHOD_CLOSED_FORM);
            out.table.push(i, "step_size", lv.step_size, METHOD_CLOSED_FORM);
            out.table.push(i, "steps", lv.steps as f64, METHOD_CLOSED_FORM);
        }
        out.summary = format!(
            "annealing ladder: {} levels, {} total steps, top variance {}\n",
            schedule.num_levels(),
            schedule.total_steps(),
            schedule.top().sigma2,
        );
        Ok(out)
    }
}

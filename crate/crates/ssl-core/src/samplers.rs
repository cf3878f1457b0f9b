//! Sampling algorithms driven by score oracles.
//!
//! Everything here is deterministic given `(seed, chains, steps)`: noise is
//! drawn from counter-based streams keyed by `(chain, global step)`, chains
//! are processed in fixed blocks of [`CHAIN_BLOCK`], and per-block partial
//! aggregates are merged in block order. Results are therefore bit-identical
//! across thread counts.
//!
//! Algorithms:
//! * [`lmc_run`] — unadjusted Langevin with an estimated score,
//!   `x' = x + h s(x) + sqrt(2h) xi`.
//! * [`annealed_lmc`] — the same chain run through a ladder of smoothed
//!   targets, largest smoothing first ([`AnnealSchedule`]).
//! * [`predictor_run`] — reverse-diffusion discretization: per step
//!   `z' = z + G s(z, T - kh) + N(0, G)` (variance-exploding) or
//!   `z' = z + G (z/2 + s(z, T - kh)) + N(0, G)` (variance-preserving), with
//!   `G` the diffusion mass crossed during the step.
//! * [`predictor_corrector`] — alternates predictor steps with Langevin
//!   correction at the current noise level.
//! * [`coupled_lmc_run`] — two chains under shared noise, one following the
//!   oracle and one following its spliced repair; their per-step disagreement
//!   count is the empirical side of the bad-set coupling bound.
//! * [`gaussian_exact_chain`] — no sampling at all: for Gaussian targets and
//!   constant-shift oracles every update above maps Gaussians to Gaussians,
//!   so the chain's law is computed in closed form.
//!
//! A chain whose state or drift turns non-finite is frozen at its last finite
//! state and reported as a divergence event; it is excluded from later
//! diagnostics but still occupies its slot in the final state array.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::ScoreOracle;
use crate::rng::{streams, CounterRng};
use crate::sde::{DiffusionModel, Family};
use crate::{Error, Result};

/// Chains are processed in fixed blocks so float aggregation order never
/// depends on the thread count.
pub const CHAIN_BLOCK: usize = 64;

/// One Langevin update `x += h * drift + sqrt(2h) * noise`.
#[inline]
pub fn lmc_step(x: &mut [f64], drift: &[f64], h: f64, noise: &[f64]) {
    let amp = (2.0 * h).sqrt();
    for ((xi, di), ni) in x.iter_mut().zip(drift).zip(noise) {
        *xi += h * di + amp * ni;
    }
}

/// One predictor update with diffusion mass `g_big` crossed during the step.
#[inline]
pub fn predictor_step(z: &mut [f64], family: Family, g_big: f64, score: &[f64], noise: &[f64]) {
    let amp = g_big.sqrt();
    match family {
        Family::Smld => {
            for ((zi, si), ni) in z.iter_mut().zip(score).zip(noise) {
                *zi += g_big * si + amp * ni;
            }
        }
        Family::Ddpm => {
            for ((zi, si), ni) in z.iter_mut().zip(score).zip(noise) {
                *zi += g_big * (0.5 * *zi + si) + amp * ni;
            }
        }
    }
}

/// Initial distribution of every chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitDist {
    Point { at: Vec<f64> },
    Gaussian { mean: Vec<f64>, var: f64 },
}

impl InitDist {
    pub fn dim(&self) -> usize {
        match self {
            InitDist::Point { at } => at.len(),
            InitDist::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InitDist::Point { at } => !at.is_empty() && at.iter().all(|c| c.is_finite()),
            InitDist::Gaussian { mean, var } => {
                !mean.is_empty() && mean.iter().all(|c| c.is_finite()) && *var >= 0.0 && var.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("initial distribution has empty or non-finite parameters"))
        }
    }

    fn draw(&self, rng: &CounterRng, chain: u64, out: &mut [f64]) {
        match self {
            InitDist::Point { at } => out.copy_from_slice(at),
            InitDist::Gaussian { mean, var } => {
                let sd = var.sqrt();
                for (a, (o, m)) in out.iter_mut().zip(mean).enumerate() {
                    *o = m + sd * rng.normal(chain, 0, a as u64);
                }
            }
        }
    }
}

/// Population size and base seed of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunShape {
    pub dim: usize,
    pub chains: usize,
    pub seed: u64,
}

/// Optional recordings along a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Record drift-norm diagnostics every `diag_stride` steps (0 = never).
    pub diag_stride: usize,
    /// Record full states after these step counts (0 = initial states).
    pub snapshots: Vec<usize>,
    /// Pool per-coordinate moments over all states strictly after this many
    /// steps (within-chain time averaging across the whole population).
    pub moments_after: Option<usize>,
}

/// A chain that left the finite domain: frozen at its last finite state from
/// `step` onward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainEvent {
    pub chain: usize,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepDiag {
    pub step: usize,
    pub mean_drift_norm: f64,
    pub max_drift_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    /// `chains x dim`, flattened chain-major.
    pub states: Vec<f64>,
}

/// Pooled per-coordinate first and second moments.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSummary {
    pub count: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl MomentSummary {
    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }

    /// Population variance per coordinate.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, sq)| (sq - s * s / n) / n)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerRun {
    pub dim: usize,
    pub chains: usize,
    /// Final states, `chains x dim` flattened chain-major.
    pub states: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diags: Vec<StepDiag>,
    pub divergences: Vec<ChainEvent>,
    pub moments: Option<MomentSummary>,
}

/// One noise level of an annealed run: target smoothed by `N(0, sigma2 I)`,
/// walked with `steps` Langevin updates of size `step_size`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealLevel {
    pub sigma2: f64,
    pub step_size: f64,
    pub steps: usize,
}

/// Ascending ladder of smoothing variances. Adjacent variances may grow by at
/// most a factor of 2, which keeps consecutive smoothed targets within finite
/// chi-square of each other in any dimension; the run itself walks the ladder
/// downward, largest smoothing first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AnnealLevel>", into = "Vec<AnnealLevel>")]
pub struct AnnealSchedule {
    levels: Vec<AnnealLevel>,
}

impl TryFrom<Vec<AnnealLevel>> for AnnealSchedule {
    type Error = Error;

    fn try_from(levels: Vec<AnnealLevel>) -> Result<Self> {
        AnnealSchedule::new(levels)
    }
}

impl From<AnnealSchedule> for Vec<AnnealLevel> {
    fn from(s: AnnealSchedule) -> Vec<AnnealLevel> {
        s.levels
    }
}

impl AnnealSchedule {
    pub fn new(levels: Vec<AnnealLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("schedule needs at least one level"));
        }
        for (m, lv) in levels.iter().enumerate() {
            if !(lv.sigma2 > 0.0 && lv.sigma2.is_finite()) {
                return Err(Error::param(format!(
                    "level {m}: smoothing variance must be positive, got {}",
                    lv.sigma2
                )));
            }
            if !(lv.step_size >= 0.0 && lv.step_size.is_finite())
                || (lv.steps > 0 && lv.step_size == 0.0)
            {
                return Err(Error::param(format!("level {m}: bad step size {}", lv.step_size)));
            }
        }
        for m in 1..levels.len() {
            let ratio = levels[m].sigma2 / levels[m - 1].sigma2;
            if !(ratio > 1.0) {
                return Err(Error::param(format!(
                    "smoothing variances must increase strictly (level {m})"
                )));
            }
            if ratio > 2.0 + 1e-9 {
                return Err(Error::param(format!(
                    "variance ratio {ratio:.6} at level {m} exceeds 2; consecutive smoothed \
                     targets would not stay chi-square-comparable"
                )));
            }
        }
        Ok(AnnealSchedule { levels })
    }

    pub fn levels(&self) -> &[AnnealLevel] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn top(&self) -> &AnnealLevel {
        self.levels.last().expect("validated nonempty")
    }

    pub fn total_steps(&self) -> usize {
        self.levels.iter().map(|lv| lv.steps).sum()
    }
}

/// A contiguous batch of identical updates.
enum Phase<'a> {
    Langevin { oracle: &'a ScoreOracle, tau: f64, h: f64, steps: usize },
    Predictor { oracle: &'a ScoreOracle, tau: f64, family: Family, g_big: f64 },
}

impl Phase<'_> {
    fn oracle_tau(&self) -> (&ScoreOracle, f64) {
        match self {
            Phase::Langevin { oracle, tau, .. } => (oracle, *tau),
            Phase::Predictor { oracle, tau, .. } => (oracle, *tau),
        }
    }

    fn apply(&self, x: &mut [f64], drift: &[f64], noise: &[f64]) {
        match self {
            Phase::Langevin { h, .. } => lmc_step(x, drift, *h, noise),
            Phase::Predictor { family, g_big, .. } => {
                predictor_step(x, *family, *g_big, drift, noise)
            }
        }
    }
}

struct BlockOut {
    divergences: Vec<ChainEvent>,
    diag_sum: Vec<f64>,
    diag_max: Vec<f64>,
    diag_n: Vec<u64>,
    mom_n: u64,
    mom_sum: Vec<f64>,
    mom_sq: Vec<f64>,
}

fn validate_shape(shape: &RunShape, init: &InitDist) -> Result<()> {
    if shape.dim == 0 || shape.chains == 0 {
        return Err(Error::param("need dim >= 1 and chains >= 1"));
    }
    init.validate()?;
    if init.dim() != shape.dim {
        return Err(Error::param(format!(
            "initial distribution dimension {} does not match run dimension {}",
            init.dim(),
            shape.dim
        )));
    }
    Ok(())
}

/// Shared driver: runs every chain through the same step program.
fn run_program(
    shape: &RunShape,
    init: &InitDist,
    program: &[Phase],
    opts: &RunOptions,
) -> Result<SamplerRun> {
    validate_shape(shape, init)?;
    for ph in program {
        let (oracle, h) = match ph {
            Phase::Langevin { oracle, h, .. } => (oracle, *h),
            Phase::Predictor { oracle, g_big, .. } => (oracle, *g_big),
        };
        if oracle.dim() != shape.dim {
            return Err(Error::param("oracle dimension does not match run dimension"));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::param(format!("step mass must be finite and >= 0, got {h}")));
        }
    }

    // Flatten to one phase index per step.
    let mut steps_flat: Vec<usize> = Vec::new();
    for (i, ph) in program.iter().enumerate() {
        match ph {
            Phase::Langevin { steps, .. } => {
                steps_flat.extend(std::iter::repeat(i).take(*steps));
            }
            Phase::Predictor { .. } => steps_flat.push(i),
        }
    }
    let total = steps_flat.len();

    let mut snaps: Vec<usize> = opts.snapshots.clone();
    snaps.sort_unstable();
    snaps.dedup();
    if snaps.last().is_some_and(|&s| s > total) {
        return Err(Error::param(format!(
            "snapshot step beyond the run (total {total} steps)"
        )));
    }
    let n_snaps = snaps.len();
    let stride = opts.diag_stride;
    let n_recs = if stride == 0 { 0 } else { total.div_ceil(stride) };
    if let Some(after) = opts.moments_after {
        if after >= total {
            return Err(Error::param(format!(
                "moment burn-in {after} leaves no states (total {total} steps)"
            )));
        }
    }

    let dim = shape.dim;
    let chains = shape.chains;
    let n_blocks = chains.div_ceil(CHAIN_BLOCK);
    let mut states = vec![0.0f64; chains * dim];
    let snap_stride = n_snaps * dim;
    let mut snap_flat = vec![0.0f64; if n_snaps == 0 { n_blocks } else { chains * snap_stride }];
    let snap_chunk = if n_snaps == 0 { 1 } else { CHAIN_BLOCK * snap_stride };

    let init_rng = CounterRng::new(shape.seed, streams::INIT);
    let step_rng = CounterRng::new(shape.seed, streams::STEP);

    let block_outs: Vec<BlockOut> = states
        .par_chunks_mut(CHAIN_BLOCK * dim)
        .zip(snap_flat.par_chunks_mut(snap_chunk))
        .enumerate()
        .map(|(b, (st_block, sn_block))| {
            let mut out = BlockOut {
                divergences: Vec::new(),
                diag_sum: vec![0.0; n_recs],
                diag_max: vec![0.0; n_recs],
                diag_n: vec![0; n_recs],
                mom_n: 0,
                mom_sum: vec![0.0; dim],
                mom_sq: vec![0.0; dim],
            };
            let mut drift = vec![0.0; dim];
            let mut noise = vec![0.0; dim];
            let mut prev = vec![0.0; dim];
            let n_in_block = st_block.len() / dim;
            for c_local in 0..n_in_block {
                let chain = b * CHAIN_BLOCK + c_local;
                let x = &mut st_block[c_local * dim..(c_local + 1) * dim];
                init.draw(&init_rng, chain as u64, x);
                let mut frozen = false;
                let mut snap_next = 0usize;
                if n_snaps > 0 && snaps[0] == 0 {
                    sn_block[c_local * snap_stride..c_local * snap_stride + dim]
                        .copy_from_slice(x);
                    snap_next = 1;
                }
                for (global, &phase_idx) in steps_flat.iter().enumerate() {
                    if !frozen {
                        let phase = &program[phase_idx];
                        let (oracle, tau) = phase.oracle_tau();
                        oracle.eval_into(x, tau, &mut drift);
                        if drift.iter().any(|d| !d.is_finite()) {
                            out.divergences.push(ChainEvent { chain, step: global });
                            frozen = true;
                        } else {
                            if stride > 0 && global % stride == 0 {
                                let r = global / stride;
                                let norm =
                                    drift.iter().map(|d| d * d).sum::<f64>().sqrt();
                                out.diag_sum[r] += norm;
                                out.diag_max[r] = out.diag_max[r].max(norm);
                                out.diag_n[r] += 1;
                            }
                            step_rng.fill_normals(chain as u64, global as u64, &mut noise);
                            prev.copy_from_slice(x);
                            phase.apply(x, &drift, &noise);
                            if x.iter().any(|c| !c.is_finite()) {
                                x.copy_from_slice(&prev);
                                out.divergences.push(ChainEvent { chain, step: global });
                                frozen = true;
                            }
                        }
                    }
                    let done = global + 1;
                    if snap_next < n_snaps && snaps[snap_next] == done {
                        let at = c_local * snap_stride + snap_next * dim;
                        sn_block[at..at + dim].copy_from_slice(x);
                        snap_next += 1;
                    }
                    if let Some(after) = opts.moments_after {
                        if done > after && !frozen {
                            out.mom_n += 1;
                            for (a, xi) in x.iter().enumerate() {
                                out.mom_sum[a] += xi;
                                out.mom_sq[a] += xi * xi;
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    // Merge partials in block order: deterministic for any thread count.
    let mut divergences = Vec::new();
    let mut diag_sum = vec![0.0; n_recs];
    let mut diag_max = vec![0.0_f64; n_recs];
    let mut diag_n = vec![0u64; n_recs];
    let mut mom_n = 0u64;
    let mut mom_sum = vec![0.0; dim];
    let mut mom_sq = vec![0.0; dim];
    for bo in block_outs {
        divergences.extend(bo.divergences);
        for r in 0..n_recs {
            diag_sum[r] += bo.diag_sum[r];
            diag_max[r] = diag_max[r].max(bo.diag_max[r]);
            diag_n[r] += bo.diag_n[r];
        }
        mom_n += bo.mom_n;
        for a in 0..dim {
            mom_sum[a] += bo.mom_sum[a];
            mom_sq[a] += bo.mom_sq[a];
        }
    }

    let diags = (0..n_recs)
        .map(|r| StepDiag {
            step: r * stride,
            mean_drift_norm: if diag_n[r] > 0 { diag_sum[r] / diag_n[r] as f64 } else { 0.0 },
            max_drift_norm: diag_max[r],
        })
        .collect();

    let snapshots = snaps
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let mut buf = vec![0.0; chains * dim];
            for c in 0..chains {
                let from = c * snap_stride + si * dim;
                buf[c * dim..(c + 1) * dim].copy_from_slice(&snap_flat[from..from + dim]);
            }
            Snapshot { step: s, states: buf }
        })
        .collect();

    let moments = opts.moments_after.map(|_| MomentSummary {
        count: mom_n,
        sum: mom_sum,
        sum_sq: mom_sq,
    });

    Ok(SamplerRun {
        dim,
        chains,
        states,
        snapshots,
        diags,
        divergences,
        moments,
    })
}

/// Langevin run against one oracle at a fixed forward time `tau` (static
/// oracles ignore it).
pub fn lmc_run(
    shape: &RunShape,
    init: &InitDist,
    oracle: &ScoreOracle,
    tau: f64,
    step_size: f64,
    steps: usize,
    opts: &RunOptions,
) -> Result<SamplerRun> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::param(format!("step size must be positive, got {step_size}")));
    }
    let program = [Phase::Langevin { oracle, tau, h: step_size, steps }];
    run_program(shape, init, &program, opts)
}

/// Exact-score oracles for each level of an annealing ladder: the target
/// smoothed by `N(0, sigma2_m I)`.
pub fn annealed_oracles(
    target: &crate::targets::GaussianMixture,
    schedule: &AnnealSchedule,
) -> Vec<ScoreOracle> {
    schedule
        .levels()
        .iter()
        .map(|lv| {
            ScoreOracle::exact(crate::oracle::OracleBase::static_mixture(
                target.convolved(lv.sigma2),
            ))
        })
        .collect()
}

/// Walks the ladder from the largest smoothing down to the smallest, running
/// each level's Langevin leg with its own oracle. `oracles[m]` belongs to
/// `schedule.levels()[m]` (ascending variance order, same as the schedule).
pub fn annealed_lmc(
    shape: &RunShape,
    init: &InitDist,
    oracles: &[ScoreOracle],
    schedule: &AnnealSchedule,
    opts: &RunOptions,
) -> Result<SamplerRun> {
    if oracles.len() != schedule.num_levels() {
        return Err(Error::param(format!(
            "{} oracles for {} levels",
            oracles.len(),
            schedule.num_levels()
        )));
    }
    let program: Vec<Phase> = schedule
        .levels()
        .iter()
        .zip(oracles)
        .rev()
        .map(|(lv, oracle)| Phase::Langevin {
            oracle,
            tau: 0.0,
            h: lv.step_size,
            steps: lv.steps,
        })
        .collect();
    run_program(shape, init, &program, opts)
}

fn predictor_phases<'a>(
    model: &DiffusionModel,
    oracle: &'a ScoreOracle,
    step_size: f64,
    steps: usize,
) -> Result<Vec<Phase<'a>>> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::param(format!("step size must be positive, got {step_size}")));
    }
    if steps as f64 * step_size > model.horizon + 1e-9 {
        return Err(Error::param(format!(
            "{steps} steps of {step_size} overshoot the horizon {}",
            model.horizon
        )));
    }
    Ok((0..steps)
        .map(|k| {
            let kh = k as f64 * step_size;
            let t1 = ((k + 1) as f64 * step_size).min(model.horizon);
            Phase::Predictor {
                oracle,
                tau: model.forward_time(kh),
                family: model.family,
                g_big: model.reverse_diffusion(kh, t1),
            }
        })
        .collect())
}

/// Prior distribution the reverse run starts from.
pub fn prior_init(model: &DiffusionModel, dim: usize) -> InitDist {
    InitDist::Gaussian { mean: vec![0.0; dim], var: model.prior_variance() }
}

/// Reverse-diffusion run: `steps` predictor steps of size `step_size` from
/// the model prior. The oracle is queried at forward time `T - kh`.
pub fn predictor_run(
    shape: &RunShape,
    model: &DiffusionModel,
    oracle: &ScoreOracle,
    step_size: f64,
    steps: usize,
    opts: &RunOptions,
) -> Result<SamplerRun> {
    let program = predictor_phases(model, oracle, step_size, steps)?;
    run_program(shape, &prior_init(model, shape.dim), &program, opts)
}

/// Langevin correction leg after each predictor step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorLeg {
    pub step_size: f64,
    pub steps: usize,
}

/// Predictor-corrector run: after the `m`-th predictor step the chain is
/// corrected by `correctors[m-1]` Langevin steps against the score at the
/// just-reached noise level. Pass one leg to reuse it at every level.
pub fn predictor_corrector(
    shape: &RunShape,
    model: &DiffusionModel,
    oracle: &ScoreOracle,
    predictor_step_size: f64,
    predictor_steps: usize,
    correctors: &[CorrectorLeg],
    opts: &RunOptions,
) -> Result<SamplerRun> {
    if correctors.len() != predictor_steps && correctors.len() != 1 {
        return Err(Error::param(format!(
            "need 1 or {predictor_steps} corrector legs, got {}",
            correctors.len()
        )));
    }
    let preds = predictor_phases(model, oracle, predictor_step_size, predictor_steps)?;
    let mut program = Vec::with_capacity(2 * predictor_steps);
    for (m, pred) in preds.into_iter().enumerate() {
        program.push(pred);
        let leg = correctors[if correctors.len() == 1 { 0 } else { m }];
        if leg.steps > 0 {
            if !(leg.step_size > 0.0 && leg.step_size.is_finite()) {
                return Err(Error::param(format!(
                    "corrector leg {m}: bad step size {}",
                    leg.step_size
                )));
            }
            program.push(Phase::Langevin {
                oracle,
                tau: model.forward_time((m + 1) as f64 * predictor_step_size),
                h: leg.step_size,
                steps: leg.steps,
            });
        }
    }
    run_program(shape, &prior_init(model, shape.dim), &program, opts)
}

/// Plan for a coupled pair of Langevin chains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledPlan {
    pub step_size: f64,
    pub steps: usize,
    /// Error-norm threshold defining the bad set (and hence the splice).
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledRun {
    pub chains: usize,
    pub steps: usize,
    /// `disagree[k]` = chains whose two states differ bitwise after step `k`.
    pub disagree: Vec<u64>,
    /// `bad_hits[k]` = chains whose spliced-side state sat in the bad set
    /// when step `k` was taken.
    pub bad_hits: Vec<u64>,
    pub divergences: Vec<ChainEvent>,
}

impl CoupledRun {
    pub fn final_disagree_frac(&self) -> f64 {
        self.disagree.last().map_or(0.0, |&d| d as f64 / self.chains as f64)
    }
}

/// Runs the oracle chain and its spliced repair under shared noise from a
/// shared initial draw. Both chains use step size `plan.step_size`; the
/// spliced chain replaces the oracle by the exact score wherever the
/// perturbation norm exceeds `plan.threshold`.
pub fn coupled_lmc_run(
    shape: &RunShape,
    init: &InitDist,
    oracle: &ScoreOracle,
    tau: f64,
    plan: &CoupledPlan,
) -> Result<CoupledRun> {
    validate_shape(shape, init)?;
    if oracle.dim() != shape.dim {
        return Err(Error::param("oracle dimension does not match run dimension"));
    }
    if !(plan.step_size > 0.0 && plan.step_size.is_finite()) {
        return Err(Error::param(format!("step size must be positive, got {}", plan.step_size)));
    }
    if !(plan.threshold >= 0.0) {
        return Err(Error::param(format!("threshold must be >= 0, got {}", plan.threshold)));
    }

    let dim = shape.dim;
    let chains = shape.chains;
    let steps = plan.steps;
    let init_rng = CounterRng::new(shape.seed, streams::INIT);
    let step_rng = CounterRng::new(shape.seed, streams::STEP);

    struct CoupledBlock {
        disagree: Vec<u64>,
        bad_hits: Vec<u64>,
        divergences: Vec<ChainEvent>,
    }

    let mut states = vec![0.0f64; chains * dim];
    let block_outs: Vec<CoupledBlock> = states
        .par_chunks_mut(CHAIN_BLOCK * dim)
        .enumerate()
        .map(|(b, st_block)| {
            let mut out = CoupledBlock {
                disagree: vec![0; steps],
                bad_hits: vec![0; steps],
                divergences: Vec::new(),
            };
            let mut y = vec![0.0; dim];
            let mut x_drift = vec![0.0; dim];
            let mut y_drift = vec![0.0; dim];
            let mut pert = vec![0.0; dim];
            let mut noise = vec![0.0; dim];
            let n_in_block = st_block.len() / dim;
            for c_local in 0..n_in_block {
                let chain = b * CHAIN_BLOCK + c_local;
                let x = &mut st_block[c_local * dim..(c_local + 1) * dim];
                init.draw(&init_rng, chain as u64, x);
                y.copy_from_slice(x);
                let mut frozen = false;
                for k in 0..steps {
                    if !frozen {
                        let bad =
                            oracle.splice_into(plan.threshold, &y, tau, &mut pert, &mut y_drift);
                        if bad {
                            out.bad_hits[k] += 1;
                        }
                        oracle.eval_into(x, tau, &mut x_drift);
                        let finite = x_drift.iter().chain(y_drift.iter()).all(|d| d.is_finite());
                        if !finite {
                            out.divergences.push(ChainEvent { chain, step: k });
                            frozen = true;
                        } else {
                            step_rng.fill_normals(chain as u64, k as u64, &mut noise);
                            lmc_step(x, &x_drift, plan.step_size, &noise);
                            lmc_step(&mut y, &y_drift, plan.step_size, &noise);
                            if x.iter().chain(y.iter()).any(|c| !c.is_finite()) {
                                out.divergences.push(ChainEvent { chain, step: k });
                                frozen = true;
                            }
                        }
                    }
                    if x != &y[..] {
                        out.disagree[k] += 1;
                    }
                }
            }
            out
        })
        .collect();

    let mut disagree = vec![0u64; steps];
    let mut bad_hits = vec![0u64; steps];
    let mut divergences = Vec::new();
    for bo in block_outs {
        for k in 0..steps {
            disagree[k] += bo.disagree[k];
            bad_hits[k] += bo.bad_hits[k];
        }
        divergences.extend(bo.divergences);
    }
    Ok(CoupledRun { chains, steps, disagree, bad_hits, divergences })
}

/// Which affine chain to propagate in closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactChainKind {
    /// Langevin targeting `N(target_mean, target_var I)`.
    Lmc { target_mean: Vec<f64>, target_var: f64 },
    /// Predictor run whose data distribution is `N(data_mean, data_var I)`;
    /// the reference at step `k` is the forward marginal at `T - kh`.
    Predictor { model: DiffusionModel, data_mean: Vec<f64>, data_var: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactChainSpec {
    pub kind: ExactChainKind,
    pub init_mean: Vec<f64>,
    pub init_var: f64,
    /// Constant added to the exact score (a constant-shift oracle).
    pub shift: Vec<f64>,
    pub step_size: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactChainPoint {
    pub step: usize,
    pub mean: Vec<f64>,
    pub var: f64,
    /// `chi^2(chain law at this step || reference at this step)`; the
    /// reference is the target (Langevin) or the current forward marginal
    /// (predictor). Infinite when the chain law is too wide.
    pub chi2: f64,
}

/// Propagates the exact law of a Gaussian-to-Gaussian chain: both updates are
/// affine with additive Gaussian noise when the target is Gaussian and the
/// score error is a constant shift, so mean and variance recursions are
/// closed-form and the chi-square to the reference is exact at every step.
/// Returns `steps + 1` points (index 0 = initial law).
pub fn gaussian_exact_chain(spec: &ExactChainSpec) -> Result<Vec<ExactChainPoint>> {
    let d = spec.init_mean.len();
    if d == 0 || spec.shift.len() != d {
        return Err(Error::param("mean and shift must share a nonzero dimension"));
    }
    if !(spec.init_var > 0.0 && spec.init_var.is_finite()) {
        return Err(Error::param(format!("initial variance must be positive, got {}", spec.init_var)));
    }
    if !(spec.step_size > 0.0 && spec.step_size.is_finite()) {
        return Err(Error::param(format!("step size must be positive, got {}", spec.step_size)));
    }
    let h = spec.step_size;
    match &spec.kind {
        ExactChainKind::Lmc { target_mean, target_var } => {
            if target_mean.len() != d {
                return Err(Error::param("target mean dimension mismatch"));
            }
            if !(*target_var > 0.0) {
                return Err(Error::param("target variance must be positive"));
            }
            let mut mean = spec.init_mean.clone();
            let mut var = spec.init_var;
            let mut points = Vec::with_capacity(spec.steps + 1);
            for step in 0..=spec.steps {
                let chi2 = crate::bounds::chi2_isotropic_gaussians(
                    &mean,
                    var,
                    target_mean,
                    *target_var,
                )?;
                points.push(ExactChainPoint { step, mean: mean.clone(), var, chi2 });
                if step == spec.steps {
                    break;
                }
                let a = 1.0 - h / target_var;
                for (m, (mu, s)) in mean.iter_mut().zip(target_mean.iter().zip(&spec.shift)) {
                    *m = a * *m + h * (mu / target_var + s);
                }
                var = a * a * var + 2.0 * h;
            }
            Ok(points)
        }
        ExactChainKind::Predictor { model, data_mean, data_var } => {
            if data_mean.len() != d {
                return Err(Error::param("data mean dimension mismatch"));
            }
            if !(*data_var >= 0.0) {
                return Err(Error::param("data variance must be >= 0"));
            }
            if spec.steps as f64 * h > model.horizon + 1e-9 {
                return Err(Error::param(format!(
                    "{} steps of {h} overshoot the horizon {}",
                    spec.steps, model.horizon
                )));
            }
            let mut mean = spec.init_mean.clone();
            let mut var = spec.init_var;
            let mut points = Vec::with_capacity(spec.steps + 1);
            for step in 0..=spec.steps {
                let kh = step as f64 * h;
                let mp = model.marginal_params(model.forward_time(kh));
                let ref_var = mp.scale * mp.scale * data_var + mp.noise_var;
                let ref_mean: Vec<f64> = data_mean.iter().map(|m| mp.scale * m).collect();
                let chi2 = if ref_var > 0.0 {
                    crate::bounds::chi2_isotropic_gaussians(&mean, var, &ref_mean, ref_var)?
                } else {
                    f64::INFINITY
                };
                points.push(ExactChainPoint { step, mean: mean.clone(), var, chi2 });
                if step == spec.steps {
                    break;
                }
                let t1 = ((step + 1) as f64 * h).min(model.horizon);
                let g_big = model.reverse_diffusion(kh, t1);
                let coef = match model.family {
                    Family::Smld => 1.0 - g_big / ref_var,
                    Family::Ddpm => 1.0 + g_big * (0.5 - 1.0 / ref_var),
                };
                for (m, (mu, s)) in mean.iter_mut().zip(ref_mean.iter().zip(&spec.shift)) {
                    *m = coef * *m + g_big * (mu / ref_var + s);
                }
                var = coef * coef * var + g_big;
            }
            Ok(points)
        }
    }
}

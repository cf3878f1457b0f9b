//! Randomized invariants spanning modules: exact identities of the diffusion
//! algebra, analysis inequalities the quadrature machinery must respect, and
//! the error-budget contracts of the oracle modes.

use proptest::prelude::*;

use ssl_core::bounds::chi2_isotropic_gaussians;
use ssl_core::divergences::{quadrature_divergence, DivergenceKind, QuadratureGrid};
use ssl_core::oracle::{BadSet, OracleBase, ScoreOracle};
use ssl_core::sde::{accumulated_diffusion, DiffusionModel, DiffusionSchedule, Family};
use ssl_core::targets::{Density, GaussianMixture};

fn schedule_strategy() -> impl Strategy<Value = DiffusionSchedule> {
    prop_oneof![
        (0.3f64..2.0).prop_map(|c| DiffusionSchedule::Constant { c }),
        (0.3f64..1.5, 1.0f64..2.5).prop_map(|(a, b)| DiffusionSchedule::Exponential { a, b }),
        (0.1f64..1.5, 0.05f64..1.0).prop_map(|(b, alpha)| DiffusionSchedule::AffineSq { b, alpha }),
    ]
}

fn family_strategy() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Smld), Just(Family::Ddpm)]
}

fn mixture_strategy(dim: usize, max_comps: usize) -> impl Strategy<Value = GaussianMixture> {
    let comp = (
        0.1f64..1.0,
        prop::collection::vec(-3.0f64..3.0, dim),
        0.3f64..3.0,
    );
    prop::collection::vec(comp, 1..=max_comps).prop_map(|cs| {
        let mut w = Vec::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (wi, mi, vi) in cs {
            w.push(wi);
            m.push(mi);
            v.push(vi);
        }
        GaussianMixture::new(w, m, v).expect("strategy stays in the valid domain")
    })
}

proptest! {
    #[test]
    fn diffusion_mass_is_additive(
        schedule in schedule_strategy(),
        ts in (0.0f64..4.0, 0.0f64..4.0, 0.0f64..4.0),
    ) {
        let mut t = [ts.0, ts.1, ts.2];
        t.sort_by(f64::total_cmp);
        let split = accumulated_diffusion(&schedule, t[0], t[1])
            + accumulated_diffusion(&schedule, t[1], t[2]);
        let whole = accumulated_diffusion(&schedule, t[0], t[2]);
        prop_assert!(
            (split - whole).abs() <= 1e-12 * whole.abs().max(1.0),
            "{split} vs {whole} for {schedule:?} at {t:?}"
        );
    }

    #[test]
    fn forward_transitions_compose(
        family in family_strategy(),
        schedule in schedule_strategy(),
        mix in mixture_strategy(1, 3),
        horizon in 0.5f64..4.0,
        fracs in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let model = DiffusionModel::new(family, schedule, horizon).unwrap();
        let (a, b) = (fracs.0 * horizon, fracs.1 * horizon);
        let (tau1, tau2) = if a <= b { (a, b) } else { (b, a) };
        let direct = mix.noised(&model, tau2);
        let tp = model.forward_transition(tau1, tau2);
        let composed = mix.noised(&model, tau1).pushed(tp.scale, tp.noise_var);
        for (dm, cm) in direct.means().iter().zip(composed.means()) {
            for (d, c) in dm.iter().zip(cm) {
                prop_assert!((d - c).abs() <= 1e-12 * d.abs().max(1.0));
            }
        }
        for (dv, cv) in direct.variances().iter().zip(composed.variances()) {
            prop_assert!((dv - cv).abs() <= 1e-12 * dv.abs().max(1.0), "{dv} vs {cv}");
        }
    }

    #[test]
    fn scores_match_log_density_differences(
        mix in mixture_strategy(2, 3),
        x in prop::collection::vec(-6.0f64..6.0, 2),
    ) {
        let mut score = vec![0.0; 2];
        mix.score_into(&x, &mut score);
        let h = 1e-5;
        for a in 0..2 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[a] += h;
            lo[a] -= h;
            let fd = (mix.log_density(&hi) - mix.log_density(&lo)) / (2.0 * h);
            prop_assert!(
                (fd - score[a]).abs() <= 1e-4 * (1.0 + score[a].abs()),
                "coordinate {a}: finite difference {fd} vs score {}", score[a]
            );
        }
    }

    #[test]
    fn chi2_gaussian_finiteness_boundary(
        vq in 0.2f64..3.0,
        vp in 0.2f64..3.0,
        mq in -2.0f64..2.0,
        mp in -2.0f64..2.0,
    ) {
        let got = chi2_isotropic_gaussians(&[mq], vq, &[mp], vp).unwrap();
        // q^2/p is integrable iff a > 0; near that boundary the (finite)
        // value can still overflow f64, for which +inf is the faithful
        // rounding, so the test decides the magnitude analytically.
        let a = 2.0 / vq - 1.0 / vp;
        if a <= 0.0 {
            prop_assert!(got.is_infinite(), "a = {}, chi2 = {}", a, got);
        } else {
            let b = 2.0 * mq / vq - mp / vp;
            let c = 2.0 * mq * mq / vq - mp * mp / vp;
            let log_chi2p1 =
                vp.ln() / 2.0 - vq.ln() - a.ln() / 2.0 + (b * b / a - c) / 2.0;
            if log_chi2p1 < 700.0 {
                prop_assert!(got.is_finite(), "a = {}, chi2 = {}", a, got);
                prop_assert!(got >= -1e-12, "chi-square must be >= 0, got {}", got);
            } else {
                prop_assert!(
                    got.is_infinite() || got > 1e300,
                    "log-scale value {} should overflow, got {}", log_chi2p1, got
                );
            }
        }
    }

    #[test]
    fn spliced_oracle_error_is_capped(
        eps1 in 0.05f64..0.8,
        threshold in 0.01f64..1.0,
        seed in 0u64..512,
        x in prop::collection::vec(-8.0f64..8.0, 2),
    ) {
        let base = OracleBase::static_mixture(GaussianMixture::standard(2));
        let oracle = match seed % 2 {
            0 => ScoreOracle::constant_shift(base, eps1, seed).unwrap(),
            _ => match ScoreOracle::smooth_field(base, eps1, seed) {
                Ok(o) => o,
                // A seed whose 32 calibration attempts all miss is allowed;
                // it just contributes no case.
                Err(_) => return Ok(()),
            },
        };
        let mut exact = vec![0.0; 2];
        let mut spliced = vec![0.0; 2];
        let mut pert = vec![0.0; 2];
        oracle.exact_into(&x, 0.0, &mut exact);
        oracle.splice_into(threshold, &x, 0.0, &mut pert, &mut spliced);
        let dev: f64 = spliced
            .iter()
            .zip(&exact)
            .map(|(s, e)| (s - e) * (s - e))
            .sum::<f64>()
            .sqrt();
        let cap = threshold.min(oracle.sup_error_bound());
        prop_assert!(dev <= cap + 1e-12, "deviation {dev} vs cap {cap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tv_is_symmetric_and_pinsker_holds(
        q in mixture_strategy(1, 2),
        p in mixture_strategy(1, 2),
    ) {
        let grid = QuadratureGrid::new(vec![-30.0], vec![30.0], 1201).unwrap();
        let tv_qp = quadrature_divergence(DivergenceKind::Tv, &q, &p, &grid).unwrap();
        let tv_pq = quadrature_divergence(DivergenceKind::Tv, &p, &q, &grid).unwrap();
        prop_assert!((tv_qp - tv_pq).abs() <= 1e-12, "{tv_qp} vs {tv_pq}");
        let kl = quadrature_divergence(DivergenceKind::Kl, &q, &p, &grid).unwrap();
        prop_assert!(
            tv_qp <= (kl / 2.0).sqrt() + 1e-9,
            "TV {tv_qp} exceeds the divergence bound sqrt(KL/2) = {}", (kl / 2.0).sqrt()
        );
    }

    #[test]
    fn chi2_formula_matches_quadrature(
        vq in 0.3f64..1.4,
        vp in 0.8f64..1.6,
        mq in -1.0f64..1.0,
        mp in -1.0f64..1.0,
    ) {
        let a = 2.0 / vq - 1.0 / vp;
        prop_assume!(a >= 0.3);
        let closed = chi2_isotropic_gaussians(&[mq], vq, &[mp], vp).unwrap();
        let q = GaussianMixture::new(vec![1.0], vec![vec![mq]], vec![vq]).unwrap();
        let p = GaussianMixture::new(vec![1.0], vec![vec![mp]], vec![vp]).unwrap();
        let grid = QuadratureGrid::new(vec![-45.0], vec![45.0], 4501).unwrap();
        let quad = quadrature_divergence(DivergenceKind::Chi2, &q, &p, &grid).unwrap();
        prop_assert!(
            (closed - quad).abs() <= 1e-7 * closed.abs().max(1.0),
            "closed {closed} vs quadrature {quad}"
        );
    }

    #[test]
    fn bad_set_mass_obeys_chebyshev(
        eps_l2 in 0.01f64..0.2,
        threshold in 0.05f64..1.0,
        center in -2.0f64..2.0,
        width in 0.3f64..1.5,
    ) {
        let base = OracleBase::static_mixture(GaussianMixture::standard(1));
        let oracle = ScoreOracle::l2_localized(base, eps_l2, center, width, 0.0).unwrap();
        let bad = BadSet::new(threshold).unwrap();
        let mass = bad.measure_1d(&oracle, 0.0, -12.0, 12.0, 4096).unwrap();
        let markov = (eps_l2 / threshold).powi(2);
        // 0.006 covers the midpoint rule's boundary cells.
        prop_assert!(
            mass <= markov + 6e-3,
            "bad-set mass {mass} vs squared-error budget {markov}"
        );
    }
}

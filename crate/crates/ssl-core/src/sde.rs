//! Forward diffusion models and their closed-form bookkeeping.
//!
//! A model is a family (variance-exploding SMLD or variance-preserving DDPM)
//! plus a diffusion coefficient `g(t)` and a horizon `T`. The forward SDEs are
//!
//! ```text
//! SMLD:  dx =                g(t) dB_t
//! DDPM:  dx = -1/2 g(t)^2 x dt + g(t) dB_t
//! ```
//!
//! Everything downstream needs only integrals of `g^2`, and the three
//! supported schedule kinds all have elementary antiderivatives, so no
//! quadrature is involved anywhere in this module.
//!
//! Reverse clock: samplers index time by `t in [0, T]` counted from the prior;
//! the matching forward time is `forward_time(t) = T - t`. That conversion
//! lives here and only here.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Diffusion coefficient `g(t)`, restricted to shapes with closed-form
/// `int g^2` so the theory engine never stacks quadrature error on top of
/// sampler error.
///
/// All kinds are non-decreasing in `t` (the predictor analysis requires it):
/// `exponential` therefore demands `b >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionSchedule {
    /// `g(t) = c`
    Constant { c: f64 },
    /// `g(t) = a * b^t`
    Exponential { a: f64, b: f64 },
    /// `g(t) = sqrt(b + alpha * t)`
    AffineSq { b: f64, alpha: f64 },
}

impl DiffusionSchedule {
    /// Validates parameter domains (positive, and non-decreasing `g`).
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiffusionSchedule::Constant { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::param(format!("constant schedule needs c > 0, got {c}")));
                }
            }
            DiffusionSchedule::Exponential { a, b } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::param(format!("exponential schedule needs a > 0, got {a}")));
                }
                if !(b >= 1.0 && b.is_finite()) {
                    return Err(Error::param(format!(
                        "exponential schedule needs b >= 1 so g is non-decreasing, got {b}"
                    )));
                }
            }
            DiffusionSchedule::AffineSq { b, alpha } => {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::param(format!("affine_sq schedule needs b > 0, got {b}")));
                }
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::param(format!("affine_sq schedule needs alpha > 0, got {alpha}")));
                }
            }
        }
        Ok(())
    }

    /// `g(t)`.
    pub fn g(&self, t: f64) -> f64 {
        self.g2(t).sqrt()
    }

    /// `g(t)^2`.
    pub fn g2(&self, t: f64) -> f64 {
        match *self {
            DiffusionSchedule::Constant { c } => c * c,
            DiffusionSchedule::Exponential { a, b } => {
                let g = a * b.powf(t);
                g * g
            }
            DiffusionSchedule::AffineSq { b, alpha } => b + alpha * t,
        }
    }
}

/// `int_{t0}^{t1} g(s)^2 ds`, exactly. Requires `0 <= t0 <= t1`.
pub fn accumulated_diffusion(schedule: &DiffusionSchedule, t0: f64, t1: f64) -> f64 {
    debug_assert!(t0 >= 0.0 && t1 >= t0, "bad interval [{t0}, {t1}]");
    let dt = t1 - t0;
    match *schedule {
        DiffusionSchedule::Constant { c } => c * c * dt,
        DiffusionSchedule::Exponential { a, b } => {
            let lam = b.ln();
            if lam == 0.0 {
                a * a * dt
            } else {
                // a^2 e^{2 lam t0} (e^{2 lam dt} - 1) / (2 lam); expm1 keeps
                // short intervals from cancelling.
                a * a * (2.0 * lam * t0).exp() * (2.0 * lam * dt).exp_m1() / (2.0 * lam)
            }
        }
        DiffusionSchedule::AffineSq { b, alpha } => b * dt + 0.5 * alpha * (t1 * t1 - t0 * t0),
    }
}

/// `(1 - (1+x) e^{-x}) / x^2`, the shape factor of ramp-weighted exponential
/// integrals. Series branch below `|x| = 0.01` avoids cancellation.
fn ramp_shape(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        0.5 + x * (-1.0 / 3.0 + x * (0.125 + x * (-1.0 / 30.0 + x / 144.0)))
    } else {
        (1.0 - (1.0 + x) * (-x).exp()) / (x * x)
    }
}

/// `int_{e0}^{e1} (e1 - s) g(s)^2 ds`, exactly. This is the ramp-weighted mass
/// of `g^2`, which the one-step chi-square recursion needs with the ramp
/// anchored at the later endpoint. Requires `0 <= e0 <= e1`.
pub fn ramp_weighted_diffusion(schedule: &DiffusionSchedule, e0: f64, e1: f64) -> f64 {
    debug_assert!(e0 >= 0.0 && e1 >= e0, "bad interval [{e0}, {e1}]");
    let d = e1 - e0;
    match *schedule {
        DiffusionSchedule::Constant { c } => 0.5 * c * c * d * d,
        DiffusionSchedule::Exponential { a, b } => {
            let lam = b.ln();
            if lam == 0.0 {
                0.5 * a * a * d * d
            } else {
                a * a * (2.0 * lam * e1).exp() * d * d * ramp_shape(2.0 * lam * d)
            }
        }
        DiffusionSchedule::AffineSq { b, alpha } => {
            0.5 * (b + alpha * e1) * d * d - alpha * d * d * d / 3.0
        }
    }
}

/// Which forward SDE the diffusion follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Variance-exploding: zero drift, marginals `p_0 * N(0, beta(t) I)`.
    Smld,
    /// Variance-preserving: drift `-1/2 g^2 x`, marginals contract toward `N(0, I)`.
    Ddpm,
}

/// Affine map describing a forward marginal or transition:
/// `x_t = scale * x_0 + N(0, noise_var * I)` in distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginalParams {
    pub scale: f64,
    pub noise_var: f64,
}

/// Parameters `(alpha, sigma2)` of the dilate-then-smooth bridge between two
/// reverse-clock marginals: `p_{kh} = dilate_alpha(p_t) * N(0, sigma2 I)`,
/// where `dilate_alpha(p)(x) = alpha^d p(alpha x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeParams {
    pub alpha: f64,
    pub sigma2: f64,
}

/// A forward diffusion with a fixed horizon `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub family: Family,
    pub schedule: DiffusionSchedule,
    /// Forward horizon `T`; the reverse clock runs from 0 (prior) to `T` (data).
    pub horizon: f64,
}

impl DiffusionModel {
    pub fn new(family: Family, schedule: DiffusionSchedule, horizon: f64) -> Result<Self> {
        schedule.validate()?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::param(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        Ok(DiffusionModel { family, schedule, horizon })
    }

    /// The single reverse-to-forward clock conversion.
    #[inline]
    pub fn forward_time(&self, reverse_t: f64) -> f64 {
        debug_assert!(
            reverse_t >= -1e-12 && reverse_t <= self.horizon + 1e-9,
            "reverse time {reverse_t} outside [0, {}]",
            self.horizon
        );
        self.horizon - reverse_t
    }

    /// `beta(tau) = int_0^tau g^2` on the forward clock.
    #[inline]
    pub fn beta(&self, tau: f64) -> f64 {
        accumulated_diffusion(&self.schedule, 0.0, tau)
    }

    /// `G_{kh,t} = int_{kh}^{t} g(T - s)^2 ds` on the reverse clock
    /// (`kh <= t <= T`), i.e. the diffusion mass crossed between two reverse
    /// times. Equals `beta(T - kh) - beta(T - t)`.
    #[inline]
    pub fn reverse_diffusion(&self, kh: f64, t: f64) -> f64 {
        debug_assert!(kh <= t + 1e-15, "reverse interval reversed: kh={kh}, t={t}");
        accumulated_diffusion(&self.schedule, self.forward_time(t), self.forward_time(kh))
    }

    /// Drift coefficient of the forward SDE at forward time `tau`: the drift
    /// is `drift_coef(tau) * x`.
    #[inline]
    pub fn drift_coef(&self, tau: f64) -> f64 {
        match self.family {
            Family::Smld => 0.0,
            Family::Ddpm => -0.5 * self.schedule.g2(tau),
        }
    }

    /// Forward marginal at forward time `tau`:
    /// `p_tau = (scale-pushforward of p_0) * N(0, noise_var I)`.
    ///
    /// SMLD: `(1, beta(tau))`. DDPM: `(e^{-beta/2}, 1 - e^{-beta})`.
    pub fn marginal_params(&self, tau: f64) -> MarginalParams {
        let beta = self.beta(tau);
        match self.family {
            Family::Smld => MarginalParams { scale: 1.0, noise_var: beta },
            Family::Ddpm => MarginalParams {
                scale: (-0.5 * beta).exp(),
                noise_var: -(-beta).exp_m1(),
            },
        }
    }

    /// Forward transition from forward time `tau1` to `tau2 >= tau1`:
    /// `x_{tau2} = scale * x_{tau1} + N(0, noise_var I)`.
    pub fn forward_transition(&self, tau1: f64, tau2: f64) -> MarginalParams {
        debug_assert!(tau1 <= tau2 + 1e-15);
        let db = accumulated_diffusion(&self.schedule, tau1, tau2);
        match self.family {
            Family::Smld => MarginalParams { scale: 1.0, noise_var: db },
            Family::Ddpm => MarginalParams {
                scale: (-0.5 * db).exp(),
                noise_var: -(-db).exp_m1(),
            },
        }
    }

    /// Bridge between reverse-clock marginals `kh <= t`: the earlier-reverse-time
    /// marginal is the later one dilated by `alpha` and smoothed by `sigma2`.
    ///
    /// SMLD: `(1, G)`. DDPM: `(e^{G/2}, 1 - e^{-G})`, with `G = reverse_diffusion(kh, t)`.
    pub fn bridge_params(&self, kh: f64, t: f64) -> BridgeParams {
        let g = self.reverse_diffusion(kh, t);
        match self.family {
            Family::Smld => BridgeParams { alpha: 1.0, sigma2: g },
            Family::Ddpm => BridgeParams {
                alpha: (0.5 * g).exp(),
                sigma2: -(-g).exp_m1(),
            },
        }
    }

    /// Variance of the isotropic Gaussian the reverse run starts from:
    /// `N(0, beta(T) I)` for SMLD, `N(0, (1 - e^{-beta(T)}) I)` for DDPM.
    pub fn prior_variance(&self) -> f64 {
        let beta = self.beta(self.horizon);
        match self.family {
            Family::Smld => beta,
            Family::Ddpm => -(-beta).exp_m1(),
        }
    }

    /// A zero-variance prior (horizon 0) is representable but cannot be used
    /// as a chi-square reference; callers must check.
    pub fn prior_is_degenerate(&self) -> bool {
        self.prior_variance() <= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn unit_constant() -> DiffusionSchedule {
        DiffusionSchedule::Constant { c: 1.0 }
    }

    #[test]
    fn accumulated_diffusion_constant_unit() {
        assert!((accumulated_diffusion(&unit_constant(), 0.0, 2.0) - 2.0).abs() < TOL);
    }

    #[test]
    fn accumulated_diffusion_affine_sq() {
        // int_0^1 (0.1 + 0.2 s) ds = 0.1 + 0.1
        let s = DiffusionSchedule::AffineSq { b: 0.1, alpha: 0.2 };
        assert!((accumulated_diffusion(&s, 0.0, 1.0) - 0.2).abs() < TOL);
    }

    #[test]
    fn accumulated_diffusion_exponential() {
        // g(s) = e^{s/2}, g^2 = e^s: int_0^{ln 4} e^s ds = 3.
        let s = DiffusionSchedule::Exponential { a: 1.0, b: (0.5f64).exp() };
        assert!((accumulated_diffusion(&s, 0.0, 4.0f64.ln()) - 3.0).abs() < TOL);
    }

    #[test]
    fn accumulated_diffusion_matches_quadrature() {
        // Midpoint-rule oracle over each schedule kind.
        let schedules = [
            DiffusionSchedule::Constant { c: 0.7 },
            DiffusionSchedule::Exponential { a: 0.9, b: 1.3 },
            DiffusionSchedule::Exponential { a: 2.0, b: 1.0 },
            DiffusionSchedule::AffineSq { b: 0.4, alpha: 1.1 },
        ];
        for s in &schedules {
            let (t0, t1) = (0.3, 1.7);
            let n = 200_000;
            let h = (t1 - t0) / n as f64;
            let quad: f64 = (0..n).map(|i| s.g2(t0 + (i as f64 + 0.5) * h) * h).sum();
            let exact = accumulated_diffusion(s, t0, t1);
            assert!(
                (quad - exact).abs() < 1e-8 * exact.max(1.0),
                "{s:?}: quad {quad} vs exact {exact}"
            );
        }
    }

    #[test]
    fn ramp_weighted_diffusion_matches_quadrature() {
        let schedules = [
            DiffusionSchedule::Constant { c: 1.4 },
            DiffusionSchedule::Exponential { a: 0.8, b: 1.6 },
            DiffusionSchedule::Exponential { a: 0.8, b: 1.0 + 1e-9 },
            DiffusionSchedule::AffineSq { b: 0.2, alpha: 0.9 },
        ];
        for s in &schedules {
            let (e0, e1) = (0.5, 2.1);
            let n = 200_000;
            let h = (e1 - e0) / n as f64;
            let quad: f64 = (0..n)
                .map(|i| {
                    let t = e0 + (i as f64 + 0.5) * h;
                    (e1 - t) * s.g2(t) * h
                })
                .sum();
            let exact = ramp_weighted_diffusion(s, e0, e1);
            assert!(
                (quad - exact).abs() < 1e-7 * exact.max(1.0),
                "{s:?}: quad {quad} vs exact {exact}"
            );
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(DiffusionSchedule::Constant { c: 0.0 }.validate().is_err());
        assert!(DiffusionSchedule::Constant { c: -1.0 }.validate().is_err());
        // b < 1 would make g decreasing.
        assert!(DiffusionSchedule::Exponential { a: 1.0, b: 0.9 }.validate().is_err());
        assert!(DiffusionSchedule::AffineSq { b: 1.0, alpha: 0.0 }.validate().is_err());
        assert!(DiffusionSchedule::Exponential { a: 1.0, b: 1.0 }.validate().is_ok());
    }

    #[test]
    fn smld_marginal_is_pure_noise_accretion() {
        let m = DiffusionModel::new(Family::Smld, unit_constant(), 5.0).unwrap();
        let p = m.marginal_params(2.0);
        assert_eq!(p.scale, 1.0);
        assert!((p.noise_var - 2.0).abs() < TOL);
    }

    #[test]
    fn marginal_at_time_zero_is_identity() {
        for fam in [Family::Smld, Family::Ddpm] {
            let m = DiffusionModel::new(fam, unit_constant(), 5.0).unwrap();
            let p = m.marginal_params(0.0);
            assert_eq!(p.scale, 1.0);
            assert_eq!(p.noise_var, 0.0);
        }
    }

    #[test]
    fn ddpm_marginal_contracts_and_fills() {
        // beta = ln 4: scale e^{-beta/2} = 1/2, noise 1 - e^{-beta} = 3/4.
        let m = DiffusionModel::new(Family::Ddpm, unit_constant(), 5.0).unwrap();
        let p = m.marginal_params(4.0f64.ln());
        assert!((p.scale - 0.5).abs() < TOL);
        assert!((p.noise_var - 0.75).abs() < TOL);
    }

    #[test]
    fn bridge_smld_is_plain_smoothing() {
        let m = DiffusionModel::new(Family::Smld, unit_constant(), 1.0).unwrap();
        let b = m.bridge_params(0.0, 0.1);
        assert_eq!(b.alpha, 1.0);
        assert!((b.sigma2 - 0.1).abs() < TOL);
    }

    #[test]
    fn bridge_degenerates_at_equal_times() {
        let m = DiffusionModel::new(Family::Ddpm, unit_constant(), 1.0).unwrap();
        let b = m.bridge_params(0.4, 0.4);
        assert_eq!(b.alpha, 1.0);
        assert_eq!(b.sigma2, 0.0);
    }

    #[test]
    fn bridge_ddpm_dilates_then_smooths() {
        // G = ln 2: alpha = sqrt(2), sigma2 = 1/2.
        let m = DiffusionModel::new(Family::Ddpm, unit_constant(), 5.0).unwrap();
        let b = m.bridge_params(0.0, 2.0f64.ln());
        assert!((b.alpha - 2.0f64.sqrt()).abs() < TOL);
        assert!((b.sigma2 - 0.5).abs() < TOL);
    }

    #[test]
    fn prior_variances() {
        let smld = DiffusionModel::new(Family::Smld, unit_constant(), 3.0).unwrap();
        assert!((smld.prior_variance() - 3.0).abs() < TOL);

        let ddpm = DiffusionModel::new(Family::Ddpm, unit_constant(), 50.0).unwrap();
        assert!((ddpm.prior_variance() - (1.0 - (-50.0f64).exp())).abs() < TOL);
        assert!(!ddpm.prior_is_degenerate());

        let flat = DiffusionModel::new(Family::Ddpm, unit_constant(), 0.0).unwrap();
        assert_eq!(flat.prior_variance(), 0.0);
        assert!(flat.prior_is_degenerate());
    }

    #[test]
    fn smld_rescaling_reproduces_ddpm_marginals() {
        // SMLD with g = e^{t/2} followed by the space rescaling y = e^{-t/2} x
        // has marginal map (e^{-t/2} * 1, e^{-t} (e^t - 1)), which is exactly
        // the unit-g DDPM marginal map (e^{-t/2}, 1 - e^{-t}).
        let smld = DiffusionModel::new(
            Family::Smld,
            DiffusionSchedule::Exponential { a: 1.0, b: (0.5f64).exp() },
            6.0,
        )
        .unwrap();
        let ddpm = DiffusionModel::new(Family::Ddpm, unit_constant(), 6.0).unwrap();
        for i in 0..=60 {
            let t = 0.1 * i as f64;
            let ms = smld.marginal_params(t);
            let md = ddpm.marginal_params(t);
            let resc = (-0.5 * t).exp();
            assert!((ms.scale * resc - md.scale).abs() < 1e-10, "scale at t={t}");
            assert!(
                (ms.noise_var * resc * resc - md.noise_var).abs() < 1e-10,
                "noise at t={t}"
            );
        }
    }

    #[test]
    fn reverse_diffusion_scales_with_g_squared() {
        let m1 = DiffusionModel::new(Family::Smld, DiffusionSchedule::Constant { c: 1.0 }, 2.0).unwrap();
        let m2 = DiffusionModel::new(Family::Smld, DiffusionSchedule::Constant { c: 2.0 }, 2.0).unwrap();
        let g1 = m1.reverse_diffusion(0.3, 0.9);
        let g2 = m2.reverse_diffusion(0.3, 0.9);
        assert!((g2 - 4.0 * g1).abs() < TOL);
    }
}

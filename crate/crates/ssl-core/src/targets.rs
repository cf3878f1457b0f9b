//! Analytic target distributions.
//!
//! Two families cover every experiment in this crate:
//!
//! * [`GaussianMixture`] — isotropic-component mixtures. Density, score,
//!   moments, and forward-noised versions are all closed-form, which is what
//!   lets simulations be compared against exact references.
//! * [`BumpTarget`] — a 1-d standard Gaussian whose potential is dented far in
//!   the tail by a scaled smooth bump. Its score is close to `-x` in L2(p) but
//!   its normalized density is nearly singular to `N(0,1)`; it exists to show
//!   that small average score error does not imply small sampling error.
//!
//! Smoothness bookkeeping travels in [`SmoothnessInfo`]: a log-Sobolev
//! constant, a score Lipschitz constant, and second-moment data, each tagged
//! with how it was obtained. The propagation rules along the forward noising
//! flow are:
//!
//! ```text
//! SMLD:  C_LS(t) <= C_LS + beta(t)            E|x_t|^2 = E|x_0|^2 + d beta(t)
//! DDPM:  C_LS(t) <= (C_LS - 1) e^{-beta} + 1  E|x_t|^2 = e^{-beta} E|x_0|^2 + d (1 - e^{-beta})
//! ```

use std::sync::OnceLock;

use crate::sde::{DiffusionModel, Family};
use crate::{Error, Result};

/// A distribution with analytic log-density and score. Implementors must be
/// deterministic: the quadrature and oracle layers evaluate them repeatedly
/// and expect bit-identical answers.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;

    /// `ln p(x)` including normalization.
    fn log_density(&self, x: &[f64]) -> f64;

    /// `grad ln p(x)` written into `out`.
    fn score_into(&self, x: &[f64], out: &mut [f64]);

    /// Convenience for 1-d densities.
    fn score1(&self, x: f64) -> f64 {
        let mut out = [0.0];
        self.score_into(&[x], &mut out);
        out[0]
    }

    /// `p(x)`.
    fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

/// How a smoothness number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form equality for this target.
    Exact,
    /// Supplied by the caller (diagnostic mode; trusted, not derived).
    UserSupplied,
    /// A proven upper bound (conservative, not tight).
    Bound,
}

/// Smoothness constants of a target, each tagged with provenance.
#[derive(Clone, Copy, Debug)]
pub struct SmoothnessInfo {
    /// Lipschitz constant of the score.
    pub l: f64,
    pub l_prov: Provenance,
    /// Log-Sobolev constant.
    pub c_ls: f64,
    pub c_ls_prov: Provenance,
    /// Second moment `E |x|^2`.
    pub m2: f64,
    pub m2_prov: Provenance,
    /// Norm of the mean, `|E x|`.
    pub m1: f64,
}

/// Propagates smoothness constants through `beta = int_0^tau g^2` of forward
/// noising. The moment updates are equalities; the log-Sobolev update is an
/// upper bound, so its provenance is downgraded to `Bound`. The Lipschitz
/// constant has no family-level propagation rule and is carried over
/// unchanged with `UserSupplied` provenance; mixture targets should instead
/// recompute it from [`GaussianMixture::noised`].
pub fn smoothness_of_noised(
    info: &SmoothnessInfo,
    family: Family,
    beta: f64,
    dim: usize,
) -> SmoothnessInfo {
    let d = dim as f64;
    let (c_ls, m2) = match family {
        Family::Smld => (info.c_ls + beta, info.m2 + d * beta),
        Family::Ddpm => {
            let e = (-beta).exp();
            ((info.c_ls - 1.0) * e + 1.0, e * info.m2 + d * (1.0 - e))
        }
    };
    let m1 = match family {
        Family::Smld => info.m1,
        Family::Ddpm => (-0.5 * beta).exp() * info.m1,
    };
    SmoothnessInfo {
        l: info.l,
        l_prov: Provenance::UserSupplied,
        c_ls,
        c_ls_prov: Provenance::Bound,
        m2,
        m2_prov: info.m2_prov,
        m1,
    }
}

/// Mixture of isotropic Gaussians `sum_i w_i N(mu_i, v_i I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

impl GaussianMixture {
    /// Builds a mixture. Weights must be positive and are normalized to sum
    /// to 1; variances must be positive; all means must share one dimension.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::param(format!(
                "mixture needs matching nonempty component lists, got {}/{}/{} entries",
                weights.len(),
                means.len(),
                variances.len()
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::param("mixture dimension must be at least 1"));
        }
        if means.iter().any(|m| m.len() != dim) {
            return Err(Error::param("mixture component means disagree on dimension"));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::param("mixture weights must be positive and finite"));
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::param("mixture variances must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(GaussianMixture { dim, weights, means, variances })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        GaussianMixture::new(vec![1.0], vec![vec![0.0; dim]], vec![1.0]).unwrap()
    }

    /// Symmetric two-mode 1-d mixture `1/2 N(-a, v) + 1/2 N(a, v)`.
    pub fn symmetric_pair(a: f64, v: f64) -> Self {
        GaussianMixture::new(vec![0.5, 0.5], vec![vec![-a], vec![a]], vec![v, v]).unwrap()
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Mean vector `E x`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for (mi, c) in m.iter_mut().zip(mu) {
                *mi += w * c;
            }
        }
        m
    }

    /// `|E x|`.
    pub fn m1(&self) -> f64 {
        self.mean().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `E |x|^2 = sum_i w_i (|mu_i|^2 + d v_i)`.
    pub fn m2(&self) -> f64 {
        let d = self.dim as f64;
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, mu), v)| w * (mu.iter().map(|c| c * c).sum::<f64>() + d * v))
            .sum()
    }

    /// Per-component log responsibilities at `x`, returned via the scratch
    /// buffer; the return value is `ln p(x)`.
    fn log_parts(&self, x: &[f64], parts: &mut Vec<f64>) -> f64 {
        parts.clear();
        for ((w, mu), v) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            let sq: f64 = x.iter().zip(mu).map(|(xi, mi)| (xi - mi) * (xi - mi)).sum();
            parts.push(
                w.ln() - 0.5 * self.dim as f64 * (std::f64::consts::TAU * v).ln() - 0.5 * sq / v,
            );
        }
        let m = parts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        m + parts.iter().map(|lp| (lp - m).exp()).sum::<f64>().ln()
    }

    /// Exact forward-noised mixture at forward time `tau`: each component
    /// `(w, mu, v)` maps to `(w, scale * mu, scale^2 v + noise_var)`.
    pub fn noised(&self, model: &DiffusionModel, tau: f64) -> GaussianMixture {
        let p = model.marginal_params(tau);
        self.pushed(p.scale, p.noise_var)
    }

    /// Applies an affine Gaussian kernel: scale then add `N(0, noise_var I)`.
    pub fn pushed(&self, scale: f64, noise_var: f64) -> GaussianMixture {
        GaussianMixture {
            dim: self.dim,
            weights: self.weights.clone(),
            means: self
                .means
                .iter()
                .map(|mu| mu.iter().map(|c| scale * c).collect())
                .collect(),
            variances: self.variances.iter().map(|v| scale * scale * v + noise_var).collect(),
        }
    }

    /// Convolution with `N(0, sigma2 I)` (annealing smoothing).
    pub fn convolved(&self, sigma2: f64) -> GaussianMixture {
        self.pushed(1.0, sigma2)
    }

    /// Conservative global Lipschitz bound for the score:
    /// `1/v_min + D^2 / (4 v_min^2)` with `D` the largest pairwise mean
    /// separation. The score Jacobian is `-sum_i r_i / v_i I + Cov_r[(x-mu_i)/v_i]`,
    /// and for shared variances the covariance term is a spread of vectors of
    /// diameter `D / v_min`, hence at most `D^2 / (4 v_min^2)` in norm. For a
    /// single component this is exactly `1/v`. Acceptance experiments verify
    /// it numerically via [`measured_score_lipschitz`].
    pub fn lipschitz_bound(&self) -> f64 {
        let v_min = self.variances.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut d_max: f64 = 0.0;
        for i in 0..self.means.len() {
            for j in (i + 1)..self.means.len() {
                let sq: f64 = self.means[i]
                    .iter()
                    .zip(&self.means[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d_max = d_max.max(sq);
            }
        }
        1.0 / v_min + d_max / (4.0 * v_min * v_min)
    }

    /// Smoothness constants. Single Gaussians have exact `L = 1/v` and
    /// `C_LS = v`; genuine mixtures need a caller-supplied log-Sobolev
    /// constant (diagnostic mode) and get the conservative Lipschitz bound.
    pub fn smoothness_info(&self, c_ls_override: Option<f64>) -> Result<SmoothnessInfo> {
        let (l, l_prov, c_ls, c_ls_prov) = if self.num_components() == 1 {
            let v = self.variances[0];
            match c_ls_override {
                Some(c) => (1.0 / v, Provenance::Exact, c, Provenance::UserSupplied),
                None => (1.0 / v, Provenance::Exact, v, Provenance::Exact),
            }
        } else {
            let c = c_ls_override.ok_or_else(|| {
                Error::param("mixtures need a user-supplied log-Sobolev constant")
            })?;
            (self.lipschitz_bound(), Provenance::Bound, c, Provenance::UserSupplied)
        };
        Ok(SmoothnessInfo {
            l,
            l_prov,
            c_ls,
            c_ls_prov,
            m2: self.m2(),
            m2_prov: Provenance::Exact,
            m1: self.m1(),
        })
    }
}

impl Density for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut parts = Vec::with_capacity(self.weights.len());
        self.log_parts(x, &mut parts)
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        // Allocation-free fast path: samplers hit this millions of times and
        // mostly with a single component.
        if self.weights.len() == 1 {
            let v = self.variances[0];
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(&self.means[0]) {
                *o = (mi - xi) / v;
            }
            return;
        }
        let mut parts = Vec::with_capacity(self.weights.len());
        let logp = self.log_parts(x, &mut parts);
        out.fill(0.0);
        for ((lp, mu), v) in parts.iter().zip(&self.means).zip(&self.variances) {
            let r = (lp - logp).exp();
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(mu) {
                *o += r * (mi - xi) / v;
            }
        }
    }
}

/// Largest spectral norm of the score Jacobian over a regular grid, by
/// central differences. Supports `d <= 2`; used to verify documented
/// Lipschitz bounds for every target an acceptance run touches.
pub fn measured_score_lipschitz(
    density: &dyn Density,
    lo: &[f64],
    hi: &[f64],
    points_per_axis: usize,
) -> Result<f64> {
    let d = density.dim();
    if d > 2 {
        return Err(Error::unsupported("score Jacobian scan only implemented for d <= 2"));
    }
    if lo.len() != d || hi.len() != d || points_per_axis < 2 {
        return Err(Error::param("bad grid specification for Lipschitz scan"));
    }
    let eps = 1e-5;
    let n = points_per_axis;
    let mut worst: f64 = 0.0;
    let mut point = vec![0.0; d];
    let mut jac = [[0.0f64; 2]; 2];
    let total = n.pow(d as u32);
    for idx in 0..total {
        let mut rem = idx;
        for a in 0..d {
            let i = rem % n;
            rem /= n;
            point[a] = lo[a] + (hi[a] - lo[a]) * i as f64 / (n - 1) as f64;
        }
        for col in 0..d {
            let mut xp = point.clone();
            let mut xm = point.clone();
            xp[col] += eps;
            xm[col] -= eps;
            let mut sp = vec![0.0; d];
            let mut sm = vec![0.0; d];
            density.score_into(&xp, &mut sp);
            density.score_into(&xm, &mut sm);
            for row in 0..d {
                jac[row][col] = (sp[row] - sm[row]) / (2.0 * eps);
            }
        }
        let norm = if d == 1 {
            jac[0][0].abs()
        } else {
            // Symmetric part's extreme eigenvalue; score Jacobians are
            // symmetric up to finite-difference noise.
            let a = jac[0][0];
            let c = jac[1][1];
            let b = 0.5 * (jac[0][1] + jac[1][0]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mid + rad).abs().max((mid - rad).abs())
        };
        worst = worst.max(norm);
    }
    Ok(worst)
}

/// Smooth compactly supported mollifier `m(y) = exp(1 - 1/(1 - y^2))` on
/// `|y| < 1`, zero outside. `m(0) = 1`, all derivatives vanish at the edge.
pub fn mollifier(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 1e-12 {
        0.0
    } else {
        (1.0 - 1.0 / s).exp()
    }
}

/// `m'(y) = -2y / (1-y^2)^2 * m(y)`.
pub fn mollifier_deriv(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 1e-12 {
        0.0
    } else {
        -2.0 * y / (s * s) * (1.0 - 1.0 / s).exp()
    }
}

/// `m''(y) = [ -2 (1 + 3 y^2) / (1-y^2)^3 + 4 y^2 / (1-y^2)^4 ] * m(y)`.
pub fn mollifier_second_deriv(y: f64) -> f64 {
    let s = 1.0 - y * y;
    if s <= 1e-12 {
        0.0
    } else {
        let u = -2.0 * (1.0 + 3.0 * y * y) / (s * s * s) + 4.0 * y * y / (s * s * s * s);
        u * (1.0 - 1.0 / s).exp()
    }
}

/// `int_{-1}^{1} m'(y)^2 dy`, computed once by Simpson's rule.
pub fn mollifier_grad_sq_integral() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let n = 1 << 15; // even panel count
        let h = 2.0 / n as f64;
        let f = |y: f64| {
            let d = mollifier_deriv(y);
            d * d
        };
        let mut acc = f(-1.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(-1.0 + i as f64 * h);
        }
        acc * h / 3.0
    })
}

/// `max_y |m'(y)|`, scanned once on a fine grid.
pub fn mollifier_deriv_max() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let n = 400_000;
        (0..=n)
            .map(|i| mollifier_deriv(-1.0 + 2.0 * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    })
}

/// `max_y |m''(y)|`, scanned once on a fine grid.
pub fn mollifier_second_deriv_max() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let n = 400_000;
        (0..=n)
            .map(|i| mollifier_second_deriv(-1.0 + 2.0 * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    })
}

/// 1-d target `q_L` with potential
///
/// ```text
/// V_L(x) = x^2 / 2 - L^2 m((2/L)(x - L))
/// ```
///
/// i.e. a standard Gaussian dented by a deep smooth well centered at `x = L`
/// and supported on `[L/2, 3L/2]`. Its score `-V_L'` differs from the
/// Gaussian score `-x` only inside the well, so the L2(N(0,1)) score error
/// decays like `L^3 e^{-L^2/8}` while `q_L` concentrates essentially all its
/// mass in the well: an arbitrarily accurate-on-average oracle whose
/// stationary law is nearly singular to the target.
#[derive(Clone, Debug)]
pub struct BumpTarget {
    pub l: f64,
    log_z: f64,
}

impl BumpTarget {
    pub fn new(l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::param(format!("bump location parameter must be positive, got {l}")));
        }
        let mut t = BumpTarget { l, log_z: 0.0 };
        t.log_z = t.compute_log_z();
        Ok(t)
    }

    /// `V_L(x)`.
    pub fn potential(&self, x: f64) -> f64 {
        let l = self.l;
        0.5 * x * x - l * l * mollifier(2.0 * (x - l) / l)
    }

    /// `V_L'(x) = x - 2 L m'((2/L)(x - L))`.
    pub fn potential_deriv(&self, x: f64) -> f64 {
        let l = self.l;
        x - 2.0 * l * mollifier_deriv(2.0 * (x - l) / l)
    }

    /// `V_L''(x) = 1 - 4 m''((2/L)(x - L))`.
    pub fn potential_second_deriv(&self, x: f64) -> f64 {
        let l = self.l;
        1.0 - 4.0 * mollifier_second_deriv(2.0 * (x - l) / l)
    }

    /// Normalizer `ln int e^{-V_L}`, by Simpson in log space. The well floor
    /// sits at depth `-L^2/2`, so the integrand spans ~`e^{L^2/2}`; factoring
    /// out the maximum keeps everything in range.
    fn compute_log_z(&self) -> f64 {
        let lo = -12.0;
        let hi = 1.5 * self.l + 6.0;
        let n = 1 << 17;
        let h = (hi - lo) / n as f64;
        // -V is largest near the well center; scan for the max first.
        let max_neg_v = (0..=n)
            .map(|i| -self.potential(lo + i as f64 * h))
            .fold(f64::NEG_INFINITY, f64::max);
        let f = |x: f64| (-self.potential(x) - max_neg_v).exp();
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        max_neg_v + (acc * h / 3.0).ln()
    }

    /// Upper bound on the squared L2(N(0,1)) score error
    /// `E_{N(0,1)} (V_L'(x) - x)^2 <= (1/sqrt(2 pi)) 2 L^3 e^{-L^2/8} int m'^2`.
    pub fn score_error_sq_bound(&self) -> f64 {
        let l = self.l;
        (1.0 / (std::f64::consts::TAU).sqrt())
            * 2.0
            * l.powi(3)
            * (-l * l / 8.0).exp()
            * mollifier_grad_sq_integral()
    }

    /// Lipschitz bound for the score: `|V_L''| <= 1 + 4 max |m''|`.
    pub fn score_lipschitz_bound(&self) -> f64 {
        1.0 + 4.0 * mollifier_second_deriv_max()
    }
}

impl Density for BumpTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -self.potential(x[0]) - self.log_z
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.potential_deriv(x[0]);
    }
}

//! Numerical divergences and empirical-vs-analytic comparisons.
//!
//! Quadrature (composite Simpson, dimension 1 or 2) turns analytic densities
//! into reference numbers: chi-square, KL, TV, and relative Fisher
//! information. Every grid is validated by integrating the density it is
//! about to be used with; a failed mass check widens the box once and then
//! errors rather than silently truncating tails.
//!
//! The empirical side estimates the same quantities from samples: moment
//! gaps, histogram TV against an analytic density (with a same-sample-size
//! noise floor so readers can tell estimator noise from real discrepancy),
//! and per-mode mass for mixtures.

use crate::rng::{streams, CounterRng};
use crate::targets::{Density, GaussianMixture};
use crate::{Error, Result};

/// Composite-Simpson grid over an axis-aligned box, dimension 1 or 2.
/// `points` per axis must be odd (2^k + 1 recommended) and at least 5.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    points: usize,
}

impl QuadratureGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points: usize) -> Result<Self> {
        if lo.is_empty() || lo.len() > 2 || lo.len() != hi.len() {
            return Err(Error::unsupported(
                "quadrature grids support dimension 1 or 2 with matching bounds",
            ));
        }
        if points < 5 || points % 2 == 0 {
            return Err(Error::param(format!(
                "points per axis must be odd and >= 5, got {points}"
            )));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::param("grid bounds must be finite with lo < hi"));
        }
        Ok(QuadratureGrid { lo, hi, points })
    }

    /// Box that comfortably contains a mixture's mass: each axis spans all
    /// component means padded by 8.5 standard deviations.
    pub fn for_mixture(p: &GaussianMixture, points: usize) -> Result<Self> {
        let d = p.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for (mu, v) in p.means().iter().zip(p.variances()) {
            let pad = 8.5 * v.sqrt();
            for a in 0..d {
                lo[a] = lo[a].min(mu[a] - pad);
                hi[a] = hi[a].max(mu[a] + pad);
            }
        }
        QuadratureGrid::new(lo, hi, points)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn widened(&self, factor: f64) -> QuadratureGrid {
        let mut g = self.clone();
        for a in 0..g.lo.len() {
            let c = 0.5 * (g.lo[a] + g.hi[a]);
            let half = 0.5 * (g.hi[a] - g.lo[a]) * factor + 1.0;
            g.lo[a] = c - half;
            g.hi[a] = c + half;
        }
        g
    }

    fn simpson_weight(i: usize, n: usize) -> f64 {
        if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    }

    /// `int_box f`, composite Simpson with tensor-product weights.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let n = self.points;
        match self.dim() {
            1 => {
                let h = (self.hi[0] - self.lo[0]) / (n - 1) as f64;
                let mut acc = 0.0;
                for i in 0..n {
                    let x = [self.lo[0] + i as f64 * h];
                    acc += Self::simpson_weight(i, n) * f(&x);
                }
                acc * h / 3.0
            }
            2 => {
                let hx = (self.hi[0] - self.lo[0]) / (n - 1) as f64;
                let hy = (self.hi[1] - self.lo[1]) / (n - 1) as f64;
                let mut acc = 0.0;
                for i in 0..n {
                    let wi = Self::simpson_weight(i, n);
                    let x = self.lo[0] + i as f64 * hx;
                    for j in 0..n {
                        let wj = Self::simpson_weight(j, n);
                        acc += wi * wj * f(&[x, self.lo[1] + j as f64 * hy]);
                    }
                }
                acc * hx * hy / 9.0
            }
            _ => unreachable!("grid dimension validated at construction"),
        }
    }
}

/// Mass tolerance for declaring a grid adequate for a density.
pub const MASS_TOL: f64 = 1e-6;

/// Checks that `p` integrates to 1 on the grid; widens once on failure.
/// Returns the grid that passed.
pub fn ensure_mass(grid: &QuadratureGrid, p: &dyn Density) -> Result<QuadratureGrid> {
    if p.dim() != grid.dim() {
        return Err(Error::param(format!(
            "density dimension {} does not match grid dimension {}",
            p.dim(),
            grid.dim()
        )));
    }
    let mass = grid.integrate(|x| p.density(x));
    if (mass - 1.0).abs() <= MASS_TOL {
        return Ok(grid.clone());
    }
    let wide = grid.widened(1.5);
    let mass2 = wide.integrate(|x| p.density(x));
    if (mass2 - 1.0).abs() <= MASS_TOL {
        return Ok(wide);
    }
    Err(Error::numerical(format!(
        "density mass {mass2:.9} still off by more than {MASS_TOL} after widening; \
         grid too coarse or misplaced"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceKind {
    /// `chi^2(q || p) = int q^2/p - 1`
    Chi2,
    /// `KL(q || p) = int q ln(q/p)`
    Kl,
    /// `TV(q, p) = 1/2 int |q - p|`
    Tv,
    /// Relative Fisher-type integral `int (q^2/p) |grad ln(q/p)|^2`
    /// (the quantity the chi-square decay arguments differentiate).
    Fisher,
}

/// Divergence of `q` from `p` by quadrature. Both densities must pass the
/// mass check (the grid is widened at most once for each).
pub fn quadrature_divergence(
    kind: DivergenceKind,
    q: &dyn Density,
    p: &dyn Density,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::param("divergence arguments disagree on dimension"));
    }
    let g = ensure_mass(grid, q)?;
    let g = ensure_mass(&g, p)?;
    let d = q.dim();
    let val = match kind {
        DivergenceKind::Chi2 => {
            g.integrate(|x| {
                let lq = q.log_density(x);
                if lq == f64::NEG_INFINITY {
                    return 0.0;
                }
                (2.0 * lq - p.log_density(x)).exp()
            }) - 1.0
        }
        DivergenceKind::Kl => g.integrate(|x| {
            let lq = q.log_density(x);
            if lq < -700.0 {
                return 0.0;
            }
            lq.exp() * (lq - p.log_density(x))
        }),
        DivergenceKind::Tv => {
            0.5 * g.integrate(|x| (q.density(x) - p.density(x)).abs())
        }
        DivergenceKind::Fisher => {
            let mut sq = vec![0.0; d];
            let mut sp = vec![0.0; d];
            g.integrate(|x| {
                let lq = q.log_density(x);
                if lq < -700.0 {
                    return 0.0;
                }
                q.score_into(x, &mut sq);
                p.score_into(x, &mut sp);
                let gap: f64 = sq.iter().zip(&sp).map(|(a, b)| (a - b) * (a - b)).sum();
                (2.0 * lq - p.log_density(x)).exp() * gap
            })
        }
    };
    Ok(val)
}

/// Draws `n` iid samples from a mixture, flattened to `n * dim` values.
/// Purely counter-based: sample `i` depends only on `(seed, i)`.
pub fn exact_sampler(p: &GaussianMixture, n: usize, seed: u64) -> Vec<f64> {
    let d = p.dim();
    let rng = CounterRng::new(seed, streams::EXACT);
    let weights = p.weights();
    let mut out = vec![0.0; n * d];
    for i in 0..n {
        let u = rng.uniform(i as u64, u64::MAX, 0);
        let mut c = weights.len() - 1;
        let mut acc = 0.0;
        for (j, w) in weights.iter().enumerate() {
            acc += w;
            if u <= acc {
                c = j;
                break;
            }
        }
        let mu = &p.means()[c];
        let sd = p.variances()[c].sqrt();
        for a in 0..d {
            out[i * d + a] = mu[a] + sd * rng.normal(i as u64, 0, a as u64);
        }
    }
    out
}

/// Sample mean and covariance (row-major `d x d`).
pub fn empirical_moments(samples: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() / dim;
    assert!(n > 1 && samples.len() == n * dim);
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for a in 0..dim {
            mean[a] += samples[i * dim + a];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; dim * dim];
    for i in 0..n {
        for a in 0..dim {
            let da = samples[i * dim + a] - mean[a];
            for b in 0..dim {
                cov[a * dim + b] += da * (samples[i * dim + b] - mean[b]);
            }
        }
    }
    for c in cov.iter_mut() {
        *c /= n as f64;
    }
    (mean, cov)
}

/// Histogram TV between 1-d samples and an analytic density.
///
/// Bin width follows the n^(-1/3) rule (`3.49 sigma_hat n^{-1/3}`, clamped to
/// [16, 4096] bins over `[lo, hi]`); per-bin reference mass uses 3-point
/// Simpson, and mass outside the range is compared against the out-of-range
/// sample fraction. The estimator is upward-biased by binning plus sampling
/// noise; see [`histogram_tv_floor`] for the noise part.
pub fn histogram_tv_1d(samples: &[f64], p: &dyn Density, lo: f64, hi: f64) -> Result<f64> {
    if p.dim() != 1 {
        return Err(Error::unsupported("histogram TV implemented for d = 1"));
    }
    let n = samples.len();
    if n < 16 || !(lo < hi) {
        return Err(Error::param("need at least 16 samples and lo < hi"));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    let width = 3.49 * var.sqrt().max(1e-9) * nf.powf(-1.0 / 3.0);
    let bins = (((hi - lo) / width).ceil() as usize).clamp(16, 4096);
    let h = (hi - lo) / bins as f64;

    let mut counts = vec![0u64; bins];
    let mut outside = 0u64;
    for &x in samples {
        if x < lo || x >= hi {
            outside += 1;
        } else {
            let b = (((x - lo) / h) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }

    let mut tv = 0.0;
    let mut in_mass = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let a = lo + b as f64 * h;
        let m = (h / 6.0)
            * (p.density(&[a]) + 4.0 * p.density(&[a + 0.5 * h]) + p.density(&[a + h]));
        in_mass += m;
        tv += (c as f64 / nf - m).abs();
    }
    tv += (outside as f64 / nf - (1.0 - in_mass).max(0.0)).abs();
    Ok(0.5 * tv)
}

/// Noise floor for [`histogram_tv_1d`]: the TV the estimator reports for an
/// exact same-size sample from the mixture itself.
pub fn histogram_tv_floor(
    p: &GaussianMixture,
    n: usize,
    seed: u64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let samples = exact_sampler(p, n, seed);
    histogram_tv_1d(&samples, p, lo, hi)
}

/// Fraction of samples nearest (in Euclidean distance) to each component
/// mean. The assignment is geometric, not probabilistic, so it is a mode-mass
/// proxy suitable for well-separated mixtures.
pub fn mode_masses(samples: &[f64], p: &GaussianMixture) -> Vec<f64> {
    let d = p.dim();
    let n = samples.len() / d;
    let mut counts = vec![0u64; p.num_components()];
    for i in 0..n {
        let x = &samples[i * d..(i + 1) * d];
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, mu) in p.means().iter().enumerate() {
            let dist: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best_d {
                best_d = dist;
                best = c;
            }
        }
        counts[best] += 1;
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(QuadratureGrid::new(vec![0.0], vec![1.0], 4).is_err());
        assert!(QuadratureGrid::new(vec![0.0], vec![1.0], 5).is_ok());
        assert!(QuadratureGrid::new(vec![1.0], vec![0.0], 5).is_err());
        assert!(QuadratureGrid::new(vec![0.0; 3], vec![1.0; 3], 5).is_err());
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let g = QuadratureGrid::new(vec![0.0], vec![2.0], 9).unwrap();
        let v = g.integrate(|x| x[0] * x[0] * x[0]);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mass_check_widens_once() {
        let p = GaussianMixture::standard(1);
        // Deliberately too narrow; one widening fixes it.
        let g = QuadratureGrid::new(vec![-4.0], vec![4.0], 513).unwrap();
        let fixed = ensure_mass(&g, &p).unwrap();
        assert!(fixed.bounds().1[0] > 4.0);
        // Hopelessly narrow: fails even widened.
        let g = QuadratureGrid::new(vec![-0.5], vec![0.5], 513).unwrap();
        assert!(ensure_mass(&g, &p).is_err());
    }

    #[test]
    fn divergences_vanish_on_identical_densities() {
        let p = GaussianMixture::standard(1);
        let g = QuadratureGrid::for_mixture(&p, 2049).unwrap();
        for kind in [
            DivergenceKind::Chi2,
            DivergenceKind::Kl,
            DivergenceKind::Tv,
            DivergenceKind::Fisher,
        ] {
            let v = quadrature_divergence(kind, &p, &p, &g).unwrap();
            assert!(v.abs() < 1e-9, "{kind:?} gave {v}");
        }
    }

    #[test]
    fn chi2_quadrature_matches_gaussian_closed_form() {
        // chi^2(N(0,1.5) || N(0,1)) = (1.5)^{-1/2} (0.5)^{-1/2} - 1 = 2/sqrt(3) - 1.
        let q = GaussianMixture::new(vec![1.0], vec![vec![0.0]], vec![1.5]).unwrap();
        let p = GaussianMixture::standard(1);
        let g = QuadratureGrid::new(vec![-14.0], vec![14.0], 4097).unwrap();
        let v = quadrature_divergence(DivergenceKind::Chi2, &q, &p, &g).unwrap();
        let exact = 2.0 / 3.0f64.sqrt() - 1.0;
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn kl_quadrature_matches_gaussian_closed_form() {
        // KL(N(mu,1) || N(0,1)) = mu^2/2.
        let q = GaussianMixture::new(vec![1.0], vec![vec![0.7]], vec![1.0]).unwrap();
        let p = GaussianMixture::standard(1);
        let g = QuadratureGrid::new(vec![-14.0], vec![14.0], 4097).unwrap();
        let v = quadrature_divergence(DivergenceKind::Kl, &q, &p, &g).unwrap();
        assert!((v - 0.245).abs() < 1e-9, "{v}");
    }

    #[test]
    fn tv_symmetry_and_pinsker() {
        let q = GaussianMixture::new(vec![1.0], vec![vec![1.0]], vec![2.0]).unwrap();
        let p = GaussianMixture::standard(1);
        let g = QuadratureGrid::new(vec![-16.0], vec![16.0], 4097).unwrap();
        let tv_qp = quadrature_divergence(DivergenceKind::Tv, &q, &p, &g).unwrap();
        let tv_pq = quadrature_divergence(DivergenceKind::Tv, &p, &q, &g).unwrap();
        assert!((tv_qp - tv_pq).abs() < 1e-10);
        let kl = quadrature_divergence(DivergenceKind::Kl, &q, &p, &g).unwrap();
        assert!(tv_qp <= (kl / 2.0).sqrt() + 1e-9);
    }

    #[test]
    fn fisher_matches_direct_formula_for_shifted_gaussian() {
        // q = N(mu, 1), p = N(0, 1): grad ln(q/p) = mu constant, so the
        // integral is mu^2 (chi^2 + 1) = mu^2 e^{mu^2}.
        let mu = 0.6;
        let q = GaussianMixture::new(vec![1.0], vec![vec![mu]], vec![1.0]).unwrap();
        let p = GaussianMixture::standard(1);
        let g = QuadratureGrid::new(vec![-14.0], vec![14.0], 4097).unwrap();
        let v = quadrature_divergence(DivergenceKind::Fisher, &q, &p, &g).unwrap();
        let exact = mu * mu * (mu * mu).exp();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn two_dimensional_quadrature_works() {
        let q = GaussianMixture::new(vec![1.0], vec![vec![0.0, 0.0]], vec![1.5]).unwrap();
        let p = GaussianMixture::new(vec![1.0], vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let g = QuadratureGrid::new(vec![-13.0, -13.0], vec![13.0, 13.0], 513).unwrap();
        let v = quadrature_divergence(DivergenceKind::Chi2, &q, &p, &g).unwrap();
        // Per-axis factor squared: (2/sqrt(3))^2 - 1 = 4/3 - 1.
        assert!((v - 1.0 / 3.0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn exact_sampler_is_deterministic_and_unbiased() {
        let p = GaussianMixture::symmetric_pair(2.0, 1.0);
        let a = exact_sampler(&p, 50_000, 7);
        let b = exact_sampler(&p, 50_000, 7);
        assert_eq!(a, b);
        let (mean, cov) = empirical_moments(&a, 1);
        assert!(mean[0].abs() < 0.03);
        assert!((cov[0] - 5.0).abs() < 0.1); // var = 4 + 1
        let masses = mode_masses(&a, &p);
        assert!((masses[0] - 0.5).abs() < 0.01);
    }

    #[test]
    fn histogram_tv_detects_mismatch_and_reports_floor() {
        let p = GaussianMixture::standard(1);
        let q = GaussianMixture::new(vec![1.0], vec![vec![1.5]], vec![1.0]).unwrap();
        let n = 40_000;
        let samples = exact_sampler(&q, n, 3);
        let tv = histogram_tv_1d(&samples, &p, -8.0, 8.0).unwrap();
        let floor = histogram_tv_floor(&p, n, 5, -8.0, 8.0).unwrap();
        // True TV(N(1.5,1), N(0,1)) = 2 Phi(0.75) - 1 ~ 0.5467.
        assert!((tv - 0.5467).abs() < 0.03, "tv {tv}");
        assert!(floor < 0.08, "floor {floor}");
        assert!(tv > 4.0 * floor);
    }
}

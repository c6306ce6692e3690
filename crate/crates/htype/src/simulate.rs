//! Horizontal Brownian motion on an H-type group by Euler discretization,
//! used as an independent probabilistic oracle for the heat kernel.
//!
//! Convention: the generator is L = sum X_i^2 (no 1/2), so horizontal
//! increments carry variance 2*dt per coordinate and the x-marginal at time t
//! is the Gaussian (4 pi t)^{-n} e^{-|x|^2/4t}. The central increment is
//! dz = (1/2) [x, dx]; since [dx, dx] = 0 the left-point and midpoint rules
//! coincide exactly, so there is no Ito/Stratonovich ambiguity here.

use crate::algebra::{GroupPoint, HTypeStructure};
use crate::heatkernel::{pt, KernelQuery};
use crate::mat::norm;
use crate::polyop::{Coeff, Polynomial};
use crate::real::Real;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig<T> {
    pub t: T,
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > T::zero()) {
            return Err(Error::InvalidArgument("t must be positive".into()));
        }
        if self.steps == 0 || self.n_paths == 0 {
            return Err(Error::InvalidArgument(
                "steps and n_paths must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal points of the simulated paths, with the parameters that
/// produced them.
#[derive(Debug, Clone)]
pub struct SampleBatch<T> {
    pub points: Vec<GroupPoint<T>>,
    pub t: T,
    pub steps: usize,
    pub seed: u64,
}

/// Simulate `n_paths` independent horizontal Brownian paths and return the
/// terminal points. Each path draws from its own counter-based RNG stream,
/// so the result is independent of scheduling and thread count.
pub fn simulate<T: Real>(s: &HTypeStructure<T>, cfg: &SimConfig<T>) -> Result<SampleBatch<T>> {
    cfg.validate()?;
    let nx = s.horizontal_dim();
    let nz = s.center_dim();
    let dt = cfg.t / T::of(cfg.steps as f64);
    let step_sd = (T::of(2.0) * dt).sqrt();
    let points: Vec<GroupPoint<T>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path as u64 + 1);
            let mut x = vec![T::zero(); nx];
            let mut z = vec![T::zero(); nz];
            let mut dx = vec![T::zero(); nx];
            for _ in 0..cfg.steps {
                for d in dx.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *d = step_sd * T::of(g);
                }
                let dz = s.bracket(&x, &dx).expect("dims fixed by construction");
                for (zj, dj) in z.iter_mut().zip(&dz) {
                    *zj = *zj + *dj * T::of(0.5);
                }
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi = *xi + *di;
                }
            }
            GroupPoint::new(x, z)
        })
        .collect();
    Ok(SampleBatch {
        points,
        t: cfg.t,
        steps: cfg.steps,
        seed: cfg.seed,
    })
}

fn mean_and_se<T: Real>(vals: impl Iterator<Item = T>) -> (T, T) {
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    let mut count = 0usize;
    for v in vals {
        sum = sum + v;
        sum_sq = sum_sq + v * v;
        count += 1;
    }
    let nf = T::of(count as f64);
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(T::zero());
    (mean, (var / nf).sqrt())
}

/// Empirical characteristic function of the central component.
#[derive(Debug, Clone, Copy)]
pub struct CharZ<T> {
    pub re: T,
    pub im: T,
    pub re_se: T,
    pub im_se: T,
}

/// Empirical mean of e^{i <lambda, z_T>} with per-component standard
/// errors. Expected value cosh(t|lambda|)^{-n}, purely real by symmetry.
pub fn char_z<T: Real>(batch: &SampleBatch<T>, lam: &[T]) -> Result<CharZ<T>> {
    if batch.points.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if lam.len() != batch.points[0].z.len() {
        return Err(Error::DimensionMismatch(format!(
            "lambda has {} entries, center has {}",
            lam.len(),
            batch.points[0].z.len()
        )));
    }
    let phases: Vec<T> = batch
        .points
        .iter()
        .map(|g| {
            g.z.iter()
                .zip(lam)
                .fold(T::zero(), |acc, (&zj, &lj)| acc + zj * lj)
        })
        .collect();
    let (re, re_se) = mean_and_se(phases.iter().map(|&p| p.cos()));
    let (im, im_se) = mean_and_se(phases.iter().map(|&p| p.sin()));
    Ok(CharZ { re, im, re_se, im_se })
}

/// Sample mean of |x_T|^2 with standard error; expected value 4 n t.
pub fn mean_x_sq<T: Real>(batch: &SampleBatch<T>) -> (T, T) {
    mean_and_se(batch.points.iter().map(|g| {
        let r = norm(&g.x);
        r * r
    }))
}

/// Sample variance of z_j with standard error; expected value n t^2.
pub fn var_z<T: Real>(batch: &SampleBatch<T>, j: usize) -> (T, T) {
    // E z_j = 0 by symmetry; report the raw second moment, whose standard
    // error is that of the z_j^2 sample mean
    mean_and_se(batch.points.iter().map(|g| g.z[j] * g.z[j]))
}

/// Empirical mean of a polynomial in the terminal point, with standard
/// error. The independent oracle is heat_poly(p, t) evaluated at the origin.
pub fn poly_expectation<T: Real + Coeff>(
    batch: &SampleBatch<T>,
    p: &Polynomial<T>,
) -> Result<(T, T)> {
    let vals: Vec<T> = batch
        .points
        .iter()
        .map(|g| p.eval(&g.x, &g.z))
        .collect();
    Ok(mean_and_se(vals.into_iter()))
}

/// One grid point of a kernel-density comparison.
#[derive(Debug, Clone, Copy)]
pub struct KdePoint<T> {
    pub r: T,
    pub s: T,
    pub kde: T,
    pub kde_se: T,
    pub model: T,
}

/// Density diagnostic: Gaussian-product KDE of the sample cloud against the
/// heat kernel on a coarse grid of radial points. Bandwidth-sensitive, so a
/// diagnostic rather than a gate; `max_rel_dev` is the worst deviation in
/// units of the combined KDE + smoothing error budget left to the caller.
#[derive(Debug, Clone)]
pub struct KdeReport<T> {
    pub points: Vec<KdePoint<T>>,
    pub max_rel_dev: T,
}

pub fn kde_compare<T: Real>(
    s: &HTypeStructure<T>,
    batch: &SampleBatch<T>,
    grid: &[(T, T)],
    bandwidth: T,
) -> Result<KdeReport<T>> {
    let nx = s.horizontal_dim();
    let nz = s.center_dim();
    if nx + nz > 5 {
        return Err(Error::InvalidArgument(
            "kde_compare supports total dimension <= 5".into(),
        ));
    }
    if !(bandwidth > T::zero()) {
        return Err(Error::InvalidArgument("bandwidth must be positive".into()));
    }
    let d = (nx + nz) as i32;
    let h2 = bandwidth * bandwidth;
    let kern_pref = (T::of(2.0) * T::PI() * h2).powi(-d / 2)
        * if d % 2 == 1 {
            (T::of(2.0) * T::PI() * h2).sqrt().recip()
        } else {
            T::one()
        };
    let mut points = Vec::with_capacity(grid.len());
    let mut max_rel_dev = T::zero();
    for &(r, sz) in grid {
        // probe at x = (r, 0, ...), z = (s, 0, ...); the law is radial
        let (kde, se) = mean_and_se(batch.points.iter().map(|g| {
            let mut q = (g.x[0] - r) * (g.x[0] - r);
            for &xi in &g.x[1..] {
                q = q + xi * xi;
            }
            q = q + (g.z[0] - sz) * (g.z[0] - sz);
            for &zj in &g.z[1..] {
                q = q + zj * zj;
            }
            kern_pref * (-q / (T::of(2.0) * h2)).exp()
        }));
        let model = pt(&KernelQuery {
            n: (nx / 2) as u32,
            m: nz as u32,
            t: batch.t,
            r,
            s: sz,
            rel_tol: T::of(1e-8),
        })?
        .value;
        let dev = ((kde - model) / model).abs();
        max_rel_dev = max_rel_dev.max(dev);
        points.push(KdePoint {
            r,
            s: sz,
            kde,
            kde_se: se,
            model,
        });
    }
    Ok(KdeReport {
        points,
        max_rel_dev,
    })
}

/// Outcome of the Monte Carlo semigroup identity check
/// (p_{t/2} * p_{t/2})(g) = p_t(g).
#[derive(Debug, Clone, Copy)]
pub struct SemigroupCheck<T> {
    pub mc_mean: T,
    pub mc_se: T,
    pub direct: T,
    pub z_score: T,
}

/// Verify the Chapman-Kolmogorov identity at a point: draw midpoints
/// h ~ p_{t/2}, average p_{t/2}(h^{-1} g), and compare with p_t(g).
pub fn semigroup_mc_check<T: Real>(
    s: &HTypeStructure<T>,
    g: &GroupPoint<T>,
    t: T,
    n_paths: usize,
    steps: usize,
    seed: u64,
) -> Result<SemigroupCheck<T>> {
    let n = (s.horizontal_dim() / 2) as u32;
    let m = s.center_dim() as u32;
    let half = t * T::of(0.5);
    let cfg = SimConfig {
        t: half,
        steps,
        n_paths,
        seed,
    };
    let batch = simulate(s, &cfg)?;
    let vals: Vec<T> = batch
        .points
        .par_iter()
        .map(|h| {
            let rest = s.group_mul(&s.inverse(h), g).expect("dims fixed");
            pt(&KernelQuery {
                n,
                m,
                t: half,
                r: norm(&rest.x),
                s: norm(&rest.z),
                rel_tol: T::of(1e-7),
            })
            .map(|e| e.value)
            .unwrap_or(T::nan())
        })
        .collect();
    if vals.iter().any(|v| v.is_nan()) {
        return Err(Error::NoConvergence("kernel evaluation failed".into()));
    }
    let (mc_mean, mc_se) = mean_and_se(vals.into_iter());
    let direct = pt(&KernelQuery {
        n,
        m,
        t,
        r: norm(&g.x),
        s: norm(&g.z),
        rel_tol: T::of(1e-9),
    })?
    .value;
    let z_score = (mc_mean - direct) / mc_se;
    Ok(SemigroupCheck {
        mc_mean,
        mc_se,
        direct,
        z_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_heisenberg;
    use crate::polyop::heat_poly;

    fn heis1() -> HTypeStructure<f64> {
        build_heisenberg(1).unwrap()
    }

    fn cfg(t: f64, steps: usize, n_paths: usize, seed: u64) -> SimConfig<f64> {
        SimConfig { t, steps, n_paths, seed }
    }

    #[test]
    fn determinism_and_stream_independence() {
        let s = heis1();
        let a = simulate(&s, &cfg(1.0, 50, 200, 7)).unwrap();
        let b = simulate(&s, &cfg(1.0, 50, 200, 7)).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.x, q.x);
            assert_eq!(p.z, q.z);
        }
        let c = simulate(&s, &cfg(1.0, 50, 200, 8)).unwrap();
        assert!(a.points[0].x != c.points[0].x);
        // paths within a batch are distinct
        assert!(a.points[0].x != a.points[1].x);
    }

    #[test]
    fn midpoint_rule_coincides() {
        // bracket(x + d/2, d) = bracket(x, d) exactly: the scheme has no
        // Ito/Stratonovich gap
        let s = build_heisenberg::<f64>(2).unwrap();
        let x = vec![0.3, -1.2, 0.7, 0.4];
        let d = vec![0.05, -0.02, 0.01, 0.03];
        let mid: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + 0.5 * di).collect();
        let a = s.bracket(&x, &d).unwrap();
        let b = s.bracket(&mid, &d).unwrap();
        for (ai, bi) in a.iter().zip(&b) {
            assert!((ai - bi).abs() < 1e-15);
        }
    }

    #[test]
    fn x_marginal_moments() {
        let s = heis1();
        let t = 0.8;
        let batch = simulate(&s, &cfg(t, 200, 40_000, 11)).unwrap();
        // mean of each x coordinate is 0
        for i in 0..2 {
            let (mean, se) = {
                let vals: Vec<f64> = batch.points.iter().map(|g| g.x[i]).collect();
                super::mean_and_se(vals.into_iter())
            };
            assert!(mean.abs() < 3.0 * se, "coordinate {i}: {mean} vs se {se}");
        }
        let (m2, se) = mean_x_sq(&batch);
        let want = 4.0 * 1.0 * t;
        assert!((m2 - want).abs() < 3.0 * se, "{m2} vs {want} (se {se})");
    }

    #[test]
    fn characteristic_function_of_z() {
        let s = heis1();
        let batch = simulate(&s, &cfg(1.0, 400, 100_000, 3)).unwrap();
        // lambda = 0 gives exactly 1
        let c = char_z(&batch, &[0.0]).unwrap();
        assert_eq!(c.re, 1.0);
        assert_eq!(c.im, 0.0);
        // lambda = 1: cosh(1)^{-1}
        let c = char_z(&batch, &[1.0]).unwrap();
        let want = 0.6480542736638854;
        assert!((c.re - want).abs() < 3.0 * c.re_se, "{} vs {want} (se {})", c.re, c.re_se);
        assert!(c.im.abs() < 3.0 * c.im_se);
        // dimension check
        assert!(char_z(&batch, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn z_variance() {
        let s = heis1();
        let t = 1.0;
        let batch = simulate(&s, &cfg(t, 300, 60_000, 21)).unwrap();
        let (v, se) = var_z(&batch, 0);
        let want = 1.0 * t * t;
        assert!((v - want).abs() < 3.0 * se, "{v} vs {want} (se {se})");
    }

    #[test]
    fn polynomial_cross_oracle() {
        let s = heis1();
        let t = 0.7;
        let batch = simulate(&s, &cfg(t, 300, 60_000, 5)).unwrap();
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        let x2: Polynomial<f64> = Polynomial::x_var(2, 1, 1);
        let z1: Polynomial<f64> = Polynomial::z_var(2, 1, 0);
        let polys = [
            x1.mul(&x1),
            z1.mul(&z1),
            x1.mul(&x1).mul(&x2).mul(&x2),
            x1.mul(&x2).mul(&z1),
            x1.mul(&x1).add(&z1.scale(3.0)),
        ];
        for p in &polys {
            let want = heat_poly(&s, p, t).unwrap().eval_at_zero();
            let (mc, se) = poly_expectation(&batch, p).unwrap();
            let slack = 3.0 * se + 1e-12;
            assert!(
                (mc - want).abs() < slack,
                "{p}: mc {mc} vs {want} (se {se})"
            );
        }
    }

    #[test]
    fn weak_convergence_in_steps() {
        // bias of E cos(lam z_T) decays ~ 1/steps; slope on log2 scale
        let s = heis1();
        let lam = [2.5f64];
        let want = 1.0 / (2.5f64).cosh();
        let bias = |steps: usize| -> f64 {
            let batch = simulate(&s, &cfg(1.0, steps, 400_000, 97)).unwrap();
            (char_z(&batch, &lam).unwrap().re - want).abs()
        };
        let b2 = bias(2);
        let b8 = bias(8);
        let slope = (b2 / b8).log2() / 2.0;
        assert!(slope >= 0.8, "slope {slope} (biases {b2}, {b8})");
    }

    #[test]
    fn kde_against_kernel() {
        let s = heis1();
        let batch = simulate(&s, &cfg(1.0, 200, 200_000, 13)).unwrap();
        let grid = [
            (0.0f64, 0.0f64),
            (0.5, 0.0),
            (1.0, 0.0),
            (0.0, 0.5),
            (1.0, 0.5),
            (1.5, 1.0),
            (2.0, 0.0),
            (0.5, 1.0),
        ];
        let h = 0.18;
        let rep = kde_compare(&s, &batch, &grid, h).unwrap();
        for p in &rep.points {
            assert!(p.kde > 0.0, "kde not positive at ({}, {})", p.r, p.s);
            // budget: 3 sigma MC plus an O(h^2) smoothing allowance
            let budget = 3.0 * p.kde_se + 1.5 * h * h * p.model.max(0.02);
            assert!(
                (p.kde - p.model).abs() < budget,
                "({}, {}): kde {} vs model {} (budget {budget})",
                p.r,
                p.s,
                p.kde,
                p.model
            );
        }
        assert!(kde_compare(&s, &batch, &grid, 0.0).is_err());
    }

    #[test]
    fn kde_scaling_diagnostic() {
        // dilating t = 4 samples by phi_{1/2} reproduces the t = 1 cloud in
        // law; compare characteristic functions of the two batches
        let s = heis1();
        let b4 = simulate(&s, &cfg(4.0, 400, 80_000, 31)).unwrap();
        let b1 = simulate(&s, &cfg(1.0, 400, 80_000, 32)).unwrap();
        let scaled: Vec<f64> = b4.points.iter().map(|g| g.z[0] / 4.0).collect();
        let (m4, se4) = super::mean_and_se(scaled.iter().map(|&z| z.cos()));
        let c1 = char_z(&b1, &[1.0]).unwrap();
        let (m1, se1) = (c1.re, c1.re_se);
        let se = (se4 * se4 + se1 * se1).sqrt();
        assert!((m4 - m1).abs() < 3.0 * se, "{m4} vs {m1} (se {se})");
    }

    #[test]
    fn semigroup_identity() {
        let s = heis1();
        let g = GroupPoint::new(vec![0.8, 0.2], vec![0.3]);
        let chk = semigroup_mc_check(&s, &g, 1.0, 30_000, 200, 41).unwrap();
        assert!(
            chk.z_score.abs() < 3.0,
            "z = {} (mc {} vs direct {})",
            chk.z_score,
            chk.mc_mean,
            chk.direct
        );
        assert!(chk.mc_se < 0.05 * chk.direct, "se too large");
    }

    #[test]
    fn config_validation() {
        let s = heis1();
        assert!(simulate(&s, &cfg(0.0, 10, 10, 1)).is_err());
        assert!(simulate(&s, &cfg(1.0, 0, 10, 1)).is_err());
        assert!(simulate(&s, &cfg(1.0, 10, 0, 1)).is_err());
    }
}

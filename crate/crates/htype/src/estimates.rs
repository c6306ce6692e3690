//! Envelope functions for the sharp two-sided heat kernel and gradient
//! bounds, and grid scans certifying that the ratios of the true quantities
//! to their envelopes stay bounded above and below zero.
//!
//! The constants in the underlying inequalities are existential, so scans
//! report the observed ratio range instead of asserting any fixed constant.

use crate::geometry::nu;
use crate::heatkernel::{grad_norm, p1, q2, KernelQuery};
use crate::real::Real;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    Kernel,
    Gradient,
    CrudeGradient,
    VerticalGradient,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeSpec<T> {
    pub n: u32,
    pub m: u32,
    pub kind: EnvelopeKind,
    pub d0_min: T,
}

impl<T: Real> EnvelopeSpec<T> {
    pub fn new(n: u32, m: u32, kind: EnvelopeKind, d0_min: T) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("n and m must be positive".into()));
        }
        if !(d0_min > T::zero()) {
            return Err(Error::InvalidArgument("d0_min must be positive".into()));
        }
        Ok(EnvelopeSpec { n, m, kind, d0_min })
    }
}

/// Kernel envelope d^{2n-m-1} / (1 + (r d)^{n-1/2}) e^{-d^2/4}.
pub fn kernel_envelope<T: Real>(n: u32, m: u32, r: T, d: T) -> T {
    let a = T::of(2.0 * n as f64 - m as f64 - 1.0);
    let b = T::of(n as f64 - 0.5);
    d.powf(a) / (T::one() + (r * d).powf(b)) * (-d * d / T::of(4.0)).exp()
}

/// Gradient envelope r d^{2n-m+1} / (1 + (r d)^{n+1/2}) e^{-d^2/4}.
pub fn gradient_envelope<T: Real>(n: u32, m: u32, r: T, d: T) -> T {
    let a = T::of(2.0 * n as f64 - m as f64 + 1.0);
    let b = T::of(n as f64 + 0.5);
    r * d.powf(a) / (T::one() + (r * d).powf(b)) * (-d * d / T::of(4.0)).exp()
}

/// Envelope selected by kind. The crude forms multiply the kernel envelope
/// by (1 + d) per derivative order.
pub fn envelope<T: Real>(spec: &EnvelopeSpec<T>, r: T, d: T) -> T {
    match spec.kind {
        EnvelopeKind::Kernel => kernel_envelope(spec.n, spec.m, r, d),
        EnvelopeKind::Gradient => gradient_envelope(spec.n, spec.m, r, d),
        EnvelopeKind::CrudeGradient => (T::one() + d) * kernel_envelope(spec.n, spec.m, r, d),
        EnvelopeKind::VerticalGradient => {
            let f = T::one() + d;
            f * f * kernel_envelope(spec.n, spec.m, r, d)
        }
    }
}

/// Time-dependent kernel envelope t^{-(n+m)} env(r / sqrt t, d / sqrt t),
/// matching the parabolic scaling of p_t.
pub fn kernel_envelope_t<T: Real>(n: u32, m: u32, t: T, r: T, d: T) -> T {
    t.powi(-((n + m) as i32)) * kernel_envelope(n, m, r / t.sqrt(), d / t.sqrt())
}

/// Logarithmic scan grid over distance and over the share of the distance
/// carried by the horizontal component.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec<T> {
    pub d0_min: T,
    pub d0_max: T,
    pub n_d0: usize,
    pub n_angle: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(d0_min: T, d0_max: T, n_d0: usize, n_angle: usize) -> Result<Self> {
        if !(T::zero() < d0_min && d0_min < d0_max) {
            return Err(Error::InvalidArgument("need 0 < d0_min < d0_max".into()));
        }
        if n_d0 < 2 || n_angle < 2 {
            return Err(Error::InvalidArgument("need at least a 2x2 grid".into()));
        }
        Ok(GridSpec { d0_min, d0_max, n_d0, n_angle })
    }

    /// Grid twice as fine in both directions, same extent.
    pub fn refined(&self) -> Self {
        GridSpec {
            n_d0: self.n_d0 * 2,
            n_angle: self.n_angle * 2,
            ..*self
        }
    }
}

/// Solve theta / sin theta = q on [0, pi) for q >= 1, by bisection.
fn theta_from_stretch<T: Real>(q: T) -> T {
    if q <= T::one() {
        return T::zero();
    }
    let mut lo = T::zero();
    let mut hi = T::PI() - T::of(1e-12);
    for _ in 0..120 {
        let mid = (lo + hi) * T::of(0.5);
        let val = if mid < T::of(1e-8) {
            T::one()
        } else {
            mid / mid.sin()
        };
        if val < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::of(0.5)
}

/// Points (r, s, d0) covering the grid: d0 log-spaced, and for each d0 the
/// horizontal share r/d0 log-spaced from near-vertical to the abnormal set
/// s = 0, plus the exact vertical point r = 0.
pub fn grid_points<T: Real>(grid: &GridSpec<T>) -> Vec<(T, T, T)> {
    let mut pts = Vec::new();
    let lo = grid.d0_min.ln();
    let hi = grid.d0_max.ln();
    let u_lo = T::of(1e-3).ln();
    for i in 0..grid.n_d0 {
        let f = T::of(i as f64) / T::of((grid.n_d0 - 1) as f64);
        let d0 = (lo + (hi - lo) * f).exp();
        // r = 0: purely vertical, s = d0^2 / 4 pi
        pts.push((T::zero(), d0 * d0 / (T::of(4.0) * T::PI()), d0));
        for a in 0..grid.n_angle {
            let g = T::of(a as f64) / T::of((grid.n_angle - 1) as f64);
            let u = (u_lo * (T::one() - g)).exp(); // r / d0 in [1e-3, 1]
            let r = u * d0;
            let theta = theta_from_stretch(d0 / r);
            let s = r * r * nu(theta).expect("theta < pi by construction") / T::of(4.0);
            pts.push((r, s, d0));
        }
    }
    pts
}

/// Result of a ratio scan over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport<T> {
    pub kind: EnvelopeKind,
    pub n: u32,
    pub m: u32,
    pub n_points: usize,
    pub min_ratio: T,
    pub max_ratio: T,
    /// (r, s, d0) where the extremes occur
    pub argmin: (T, T, T),
    pub argmax: (T, T, T),
}

impl<T: Real> ScanReport<T> {
    /// Both extremes finite and the minimum bounded away from zero.
    pub fn passes(&self) -> bool {
        self.min_ratio > T::zero()
            && self.min_ratio.is_finite()
            && self.max_ratio.is_finite()
    }
}

fn scan<T: Real>(
    kind: EnvelopeKind,
    n: u32,
    m: u32,
    grid: &GridSpec<T>,
    d0_min: T,
    ratio_at: impl Fn(T, T, T) -> Result<Option<T>> + Sync,
) -> Result<ScanReport<T>> {
    let pts: Vec<(T, T, T)> = grid_points(grid)
        .into_iter()
        .filter(|&(_, _, d0)| d0 >= d0_min)
        .collect();
    let ratios: Vec<Result<Option<T>>> = pts
        .par_iter()
        .map(|&(r, s, d0)| ratio_at(r, s, d0))
        .collect();
    let mut min_ratio = T::infinity();
    let mut max_ratio = T::zero();
    let mut argmin = (T::zero(), T::zero(), T::zero());
    let mut argmax = argmin;
    let mut n_points = 0usize;
    for (pt, ratio) in pts.iter().zip(ratios) {
        let Some(ratio) = ratio? else { continue };
        n_points += 1;
        if ratio < min_ratio {
            min_ratio = ratio;
            argmin = *pt;
        }
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = *pt;
        }
    }
    if n_points == 0 {
        return Err(Error::InvalidArgument(
            "no grid points above d0_min".into(),
        ));
    }
    Ok(ScanReport {
        kind,
        n,
        m,
        n_points,
        min_ratio,
        max_ratio,
        argmin,
        argmax,
    })
}

const SCAN_TOL: f64 = 1e-8;

fn p1_at<T: Real>(n: u32, m: u32, r: T, s: T) -> Result<T> {
    Ok(p1(&KernelQuery {
        n,
        m,
        t: T::one(),
        r,
        s,
        rel_tol: T::of(SCAN_TOL),
    })?
    .value)
}

/// |dp1/d|z||, restoring the prefactor the bare q2 integral omits.
fn vertical_at<T: Real>(n: u32, m: u32, r: T, s: T) -> Result<T> {
    let bare = q2(&KernelQuery {
        n,
        m,
        t: T::one(),
        r,
        s,
        rel_tol: T::of(SCAN_TOL),
    })?
    .value;
    let pref = (T::of(2.0) * T::PI()).powi(-(m as i32))
        * (T::of(4.0) * T::PI()).powi(-(n as i32));
    Ok((pref * bare).abs())
}

fn grad_at<T: Real>(n: u32, m: u32, r: T, s: T) -> Result<T> {
    Ok(grad_norm(&KernelQuery {
        n,
        m,
        t: T::one(),
        r,
        s,
        rel_tol: T::of(SCAN_TOL),
    })?
    .value)
}

/// Scan of p1 / kernel_envelope over the grid, restricted to d0 >= d0_min.
pub fn scan_kernel_ratio<T: Real>(
    n: u32,
    m: u32,
    grid: &GridSpec<T>,
    d0_min: T,
) -> Result<ScanReport<T>> {
    scan(EnvelopeKind::Kernel, n, m, grid, d0_min, |r, s, d0| {
        let env = kernel_envelope(n, m, r, d0);
        Ok(Some(p1_at(n, m, r, s)? / env))
    })
}

/// Scan of |grad p1| / gradient_envelope; the vertical line r = 0, where
/// both sides vanish, is skipped.
pub fn scan_gradient_ratio<T: Real>(
    n: u32,
    m: u32,
    grid: &GridSpec<T>,
    d0_min: T,
) -> Result<ScanReport<T>> {
    scan(EnvelopeKind::Gradient, n, m, grid, d0_min, |r, s, d0| {
        if r == T::zero() {
            return Ok(None);
        }
        let env = gradient_envelope(n, m, r, d0);
        Ok(Some(grad_at(n, m, r, s)? / env))
    })
}

/// Scan of |grad p1| / ((1 + d0) p1): the crude pointwise gradient bound.
/// The pass condition is finiteness of the max; the min can approach zero
/// on the vertical line where the gradient vanishes.
pub fn scan_crude_gradient<T: Real>(
    n: u32,
    m: u32,
    grid: &GridSpec<T>,
) -> Result<ScanReport<T>> {
    scan(
        EnvelopeKind::CrudeGradient,
        n,
        m,
        grid,
        grid.d0_min,
        |r, s, d0| {
            let p = p1_at(n, m, r, s)?;
            let g = grad_at(n, m, r, s)?;
            Ok(Some(g / ((T::one() + d0) * p)))
        },
    )
}

/// Scan of |dp1/d|z|| / ((1 + d0)^2 p1): the vertical derivative is
/// dominated by the kernel with two crude derivative factors. Pass condition
/// is finiteness of the max; the min can vanish where S_m' changes sign.
pub fn scan_vertical_gradient<T: Real>(
    n: u32,
    m: u32,
    grid: &GridSpec<T>,
) -> Result<ScanReport<T>> {
    scan(
        EnvelopeKind::VerticalGradient,
        n,
        m,
        grid,
        grid.d0_min,
        |r, s, d0| {
            let p = p1_at(n, m, r, s)?;
            let v = vertical_at(n, m, r, s)?;
            let f = T::one() + d0;
            Ok(Some(v / (f * f * p)))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cc_distance;

    #[test]
    fn kernel_envelope_closed_forms() {
        // x = 0: denominator is 1
        for &(n, m, d) in &[(1u32, 1u32, 2.0f64), (2, 1, 3.0), (1, 2, 5.0)] {
            let want = d.powf(2.0 * n as f64 - m as f64 - 1.0) * (-d * d / 4.0).exp();
            assert!((kernel_envelope(n, m, 0.0, d) - want).abs() < 1e-15 * want);
        }
        // Heisenberg: 1 / (1 + sqrt(r d)) e^{-d^2/4}
        for &(r, d) in &[(0.5f64, 2.0f64), (1.0, 4.0), (2.0, 7.0)] {
            let want = (-d * d / 4.0).exp() / (1.0 + (r * d).sqrt());
            assert!((kernel_envelope(1, 1, r, d) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_envelope_properties() {
        assert_eq!(gradient_envelope(1, 1, 0.0, 3.0), 0.0);
        // envelope ratio gradient/kernel is <= C (1 + d) with C = 2 here
        for &(n, m) in &[(1u32, 1u32), (2, 1), (1, 2), (2, 3)] {
            for i in 1..=20 {
                for j in 0..=20 {
                    let d = 0.5 * i as f64;
                    let r = d * (j as f64 / 20.0);
                    let ke = kernel_envelope(n, m, r, d);
                    let ge = gradient_envelope(n, m, r, d);
                    assert!(
                        ge <= 2.0 * (1.0 + d) * ke,
                        "(n,m,r,d)=({n},{m},{r},{d})"
                    );
                }
            }
        }
    }

    #[test]
    fn envelope_t_scaling() {
        for &t in &[0.25f64, 1.0, 4.0] {
            for &(r, d) in &[(0.5f64, 2.0f64), (1.5, 6.0)] {
                let lhs = kernel_envelope_t(1, 2, t, t.sqrt() * r, t.sqrt() * d);
                let rhs = t.powi(-3) * kernel_envelope(1, 2, r, d);
                assert!((lhs - rhs).abs() < 1e-14 * rhs.abs());
            }
        }
        assert_eq!(
            kernel_envelope_t(2, 1, 1.0, 0.7, 3.0),
            kernel_envelope(2, 1, 0.7, 3.0)
        );
    }

    #[test]
    fn vertical_profile_eventually_monotone() {
        // at x = 0 the profile is d^{2n-m-1} e^{-d^2/4}, decreasing beyond
        // d* = sqrt(2(2n - m - 1)) (or everywhere when the power is <= 0)
        for &(n, m) in &[(1u32, 1u32), (2, 1), (1, 2)] {
            let p = 2.0 * n as f64 - m as f64 - 1.0;
            let dstar = if p > 0.0 { (2.0 * p).sqrt() } else { 0.0 };
            let mut prev = f64::INFINITY;
            for i in 0..=40 {
                let d = dstar + 1e-9 + 8.0 * i as f64 / 40.0;
                let v = kernel_envelope(n, m, 0.0, d);
                assert!(v < prev, "(n,m)=({n},{m}) at d={d}");
                prev = v;
            }
        }
    }

    #[test]
    fn grid_points_hit_requested_distances() {
        let grid = GridSpec::new(2.0f64, 10.0, 6, 5).unwrap();
        let pts = grid_points(&grid);
        assert_eq!(pts.len(), 6 * (5 + 1));
        for &(r, s, d0) in &pts {
            assert!((2.0..=10.0 + 1e-9).contains(&d0));
            let d = cc_distance(r, s).unwrap().d;
            assert!(
                ((d - d0) / d0).abs() < 1e-9,
                "claimed d0 {d0} but distance is {d} at ({r}, {s})"
            );
        }
        // both extreme branches present: r = 0 and s = 0
        assert!(pts.iter().any(|&(r, _, _)| r == 0.0));
        assert!(pts.iter().any(|&(_, s, _)| s == 0.0));
    }

    #[test]
    fn kernel_scan_heisenberg() {
        let grid = GridSpec::new(2.0f64, 10.0, 12, 12).unwrap();
        let rep = scan_kernel_ratio(1, 1, &grid, 2.0).unwrap();
        assert!(rep.passes(), "{rep:?}");
        assert!(
            rep.max_ratio / rep.min_ratio < 50.0,
            "spread {} / {}",
            rep.max_ratio,
            rep.min_ratio
        );
        // raising d0_min restricts the grid but cannot break the pass
        let rep4 = scan_kernel_ratio(1, 1, &grid, 4.0).unwrap();
        assert!(rep4.passes());
        assert!(rep4.n_points < rep.n_points);
    }

    #[test]
    fn gradient_scan_heisenberg() {
        let grid = GridSpec::new(2.0f64, 10.0, 10, 10).unwrap();
        let rep = scan_gradient_ratio(1, 1, &grid, 2.0).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn crude_gradient_scan_and_refinement() {
        let grid = GridSpec::new(2.0f64, 10.0, 8, 8).unwrap();
        let rep = scan_crude_gradient(1, 1, &grid).unwrap();
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
        let fine = scan_crude_gradient(1, 1, &grid.refined()).unwrap();
        let drift = ((fine.max_ratio - rep.max_ratio) / rep.max_ratio).abs();
        assert!(drift <= 0.05, "max drifted {drift} under refinement");
    }

    #[test]
    fn vertical_gradient_scan_dominated() {
        let grid = GridSpec::new(2.0f64, 10.0, 8, 8).unwrap();
        for &(n, m) in &[(1u32, 1u32), (2, 2)] {
            let rep = scan_vertical_gradient(n, m, &grid).unwrap();
            assert!(
                rep.max_ratio.is_finite() && rep.max_ratio > 0.0,
                "(n,m)=({n},{m}): {rep:?}"
            );
            // two crude derivative factors leave ample headroom
            assert!(rep.max_ratio < 10.0, "(n,m)=({n},{m}): {}", rep.max_ratio);
        }
    }

    #[test]
    fn vertical_derivative_matches_finite_difference() {
        let (r, s, h) = (1.0f64, 0.8, 1e-5);
        let fd = (p1_at(1, 1, r, s + h).unwrap() - p1_at(1, 1, r, s - h).unwrap()) / (2.0 * h);
        let v = super::vertical_at(1, 1, r, s).unwrap();
        assert!((v - fd.abs()).abs() < 1e-7, "{v} vs {fd}");
    }

    #[test]
    fn ratio_continuous_across_branches() {
        // at fixed d0, the kernel ratio as the horizontal share sweeps from
        // vertical to abnormal has no large adjacent-point jumps
        let d0 = 5.0f64;
        let mut prev: Option<f64> = None;
        for a in 0..=24 {
            let u = (1e-3f64).ln() * (1.0 - a as f64 / 24.0);
            let r = u.exp() * d0;
            let theta = super::theta_from_stretch(d0 / r);
            let s = r * r * crate::geometry::nu(theta).unwrap() / 4.0;
            let ratio = p1_at(1, 1, r, s).unwrap() / kernel_envelope(1, 1, r, d0);
            if let Some(p) = prev {
                assert!(
                    (ratio / p).max(p / ratio) < 1.6,
                    "jump at r={r}: {p} -> {ratio}"
                );
            }
            prev = Some(ratio);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(EnvelopeSpec::new(1, 1, EnvelopeKind::Kernel, 0.0f64).is_err());
        assert!(EnvelopeSpec::new(0, 1, EnvelopeKind::Kernel, 1.0f64).is_err());
        assert!(GridSpec::new(2.0f64, 1.0, 5, 5).is_err());
        assert!(GridSpec::new(1.0f64, 2.0, 1, 5).is_err());
        let spec = EnvelopeSpec::new(1, 1, EnvelopeKind::CrudeGradient, 1.0f64).unwrap();
        let base = kernel_envelope(1, 1, 0.5, 3.0);
        assert!((envelope(&spec, 0.5, 3.0) - 4.0 * base).abs() < 1e-14);
    }
}

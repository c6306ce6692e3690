//! Bessel functions J_nu for integer and half-integer orders, just enough
//! for the spherical surface integrals behind the radial kernel reduction.
//! No external special-function dependency: power series at small argument,
//! closed trigonometric forms (half-integer) or the cosine integral
//! representation (integer) beyond.

use crate::real::Real;

const SERIES_LIMIT: f64 = 12.0;

/// Gamma at a positive integer or half-integer: gamma(twice / 2).
fn gamma_half_int<T: Real>(twice: u32) -> T {
    assert!(twice > 0);
    if twice % 2 == 0 {
        let mut acc = T::one();
        for k in 2..(twice / 2) {
            acc = acc * T::of(k as f64);
        }
        acc
    } else {
        // gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
        let k = (twice - 1) / 2;
        let mut acc = T::PI().sqrt();
        // multiply (2k)!/(4^k k!) = prod_{j=1..k} (2j-1)/2
        for j in 1..=k {
            acc = acc * T::of((2 * j - 1) as f64) / T::of(2.0);
        }
        acc
    }
}

/// J_nu(w) / w^nu for nu = twice_nu / 2 >= 0, an entire function of w^2,
/// by its power series. Accurate to ~5e-13 absolute up to w = 12.
fn jratio_series<T: Real>(twice_nu: u32, w: T) -> T {
    let nu = T::of(twice_nu as f64 / 2.0);
    let q = w * w / T::of(4.0);
    let mut term = T::one() / (T::of(2.0).powf(nu) * gamma_half_int::<T>(twice_nu + 2));
    let mut acc = term;
    for k in 1..200 {
        let kf = T::of(k as f64);
        term = -term * q / (kf * (nu + kf));
        acc = acc + term;
        if term.abs() < T::of(1e-18) * acc.abs().max(T::one()) && T::of(k as f64) > w {
            break;
        }
    }
    acc
}

/// Integer-order J_k(w) by the trapezoid rule on
/// (1/pi) int_0^pi cos(k tau - w sin tau) dtau, which converges spectrally
/// because the integrand is smooth with vanishing odd derivatives at both
/// endpoints.
fn bessel_j_int_large<T: Real>(k: u32, w: T) -> T {
    let n = 60 + (1.3 * (w.to_f64_lossy() + k as f64)) as usize;
    let pi = T::PI();
    let h = pi / T::of(n as f64);
    let kf = T::of(k as f64);
    let ends = (T::zero()).cos() + (kf * pi - w * pi.sin()).cos();
    let mut acc = ends * T::of(0.5);
    for i in 1..n {
        let tau = h * T::of(i as f64);
        acc = acc + (kf * tau - w * tau.sin()).cos();
    }
    acc * h / pi
}

/// Integer-order J_k(w) for w >= 25 by the Hankel asymptotic expansion
/// J_k(w) = sqrt(2/(pi w)) (P cos chi - Q sin chi), chi = w - (2k+1) pi/4,
/// with P, Q the standard inverse-power series. Terms shrink far below
/// machine epsilon before the asymptotic tail turns around.
fn bessel_j_int_asymptotic<T: Real>(k: u32, w: T) -> T {
    let mu = T::of(4.0 * (k as f64) * (k as f64));
    let eight_w = T::of(8.0) * w;
    let mut p = T::one();
    let mut q = T::zero();
    let mut term = T::one();
    for j in 1u32..=20 {
        let odd = T::of((2 * j - 1) as f64);
        term = term * (mu - odd * odd) / (T::of(j as f64) * eight_w);
        if j % 2 == 1 {
            // odd j feeds Q with sign (-1)^{(j-1)/2}
            if j % 4 == 1 {
                q = q + term;
            } else {
                q = q - term;
            }
        } else if j % 4 == 2 {
            p = p - term;
        } else {
            p = p + term;
        }
        if term.abs() < T::of(1e-18) {
            break;
        }
    }
    let chi = w - T::of((2 * k + 1) as f64) * T::PI() / T::of(4.0);
    (T::of(2.0) / (T::PI() * w)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Half-integer J_{l + 1/2}(w) = sqrt(2 w / pi) j_l(w) via the spherical
/// Bessel recurrence; stable upward for the small orders used here (l << w).
fn bessel_j_half_large<T: Real>(twice_nu: u32, w: T) -> T {
    let l = (twice_nu - 1) / 2;
    let mut jm = w.sin() / w; // j_0
    if l == 0 {
        return (T::of(2.0) * w / T::PI()).sqrt() * jm;
    }
    let mut j = jm / w - w.cos() / w; // j_1
    for ll in 1..l {
        let next = T::of((2 * ll + 1) as f64) / w * j - jm;
        jm = j;
        j = next;
    }
    (T::of(2.0) * w / T::PI()).sqrt() * j
}

/// J_nu(w) for nu = twice_nu / 2, w >= 0.
pub fn bessel_j<T: Real>(twice_nu: u32, w: T) -> T {
    if w <= T::of(SERIES_LIMIT) {
        let nu = T::of(twice_nu as f64 / 2.0);
        return jratio_series(twice_nu, w) * w.powf(nu);
    }
    if twice_nu % 2 == 0 {
        if w >= T::of(25.0) {
            bessel_j_int_asymptotic(twice_nu / 2, w)
        } else {
            bessel_j_int_large(twice_nu / 2, w)
        }
    } else {
        bessel_j_half_large(twice_nu, w)
    }
}

/// J_nu(w) / w^nu, finite at w = 0.
pub fn jratio<T: Real>(twice_nu: u32, w: T) -> T {
    if w <= T::of(SERIES_LIMIT) {
        jratio_series(twice_nu, w)
    } else {
        let nu = T::of(twice_nu as f64 / 2.0);
        bessel_j(twice_nu, w) / w.powf(nu)
    }
}

/// Surface area of the unit sphere S^{d-1} in R^d: 2 pi^{d/2} / gamma(d/2).
pub fn sphere_surface<T: Real>(d: u32) -> T {
    T::of(2.0) * T::PI().powf(T::of(d as f64 / 2.0)) / gamma_half_int::<T>(d)
}

/// S_m(w) = int_{S^{m-1}} e^{i w sigma_1} dsigma
///        = (2 pi)^{m/2} J_{m/2 - 1}(w) / w^{m/2 - 1}; S_m(0) = |S^{m-1}|.
pub fn s_m<T: Real>(m: u32, w: T) -> T {
    assert!(m >= 1);
    if m == 1 {
        // S^0 is the two-point set {-1, 1}
        return T::of(2.0) * w.cos();
    }
    let half_m = T::of(m as f64 / 2.0);
    (T::of(2.0) * T::PI()).powf(half_m) * jratio(m - 2, w)
}

/// d S_m / dw = -(2 pi)^{m/2} w J_{m/2}(w) / w^{m/2}; valid for all m >= 1.
pub fn s_m_prime<T: Real>(m: u32, w: T) -> T {
    assert!(m >= 1);
    let half_m = T::of(m as f64 / 2.0);
    -(T::of(2.0) * T::PI()).powf(half_m) * w * jratio(m, w)
}

//! Carnot-Caratheodory geometry: the distance function on an H-type group,
//! explicit geodesics from the Hamiltonian solutions, and the geodesic
//! coordinate chart with its Jacobian.

use crate::algebra::{GroupPoint, HTypeStructure};
use crate::mat::{dot, norm};
use crate::real::Real;
use crate::{Error, Result};
use serde::Serialize;

/// Which closed-form branch produced a distance value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceBranch {
    ZZero,
    XZero,
    Generic,
}

/// Distance together with the geodesic angle parameter that produced it.
/// `theta` is `None` on the x = 0 branch, where the angle degenerates.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceResult<T> {
    pub d: T,
    pub theta: Option<T>,
    pub branch: DistanceBranch,
}

/// Initial covectors of a normal geodesic from the identity, parametrized
/// on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicParams<T> {
    pub xi0: Vec<T>,
    pub eta0: Vec<T>,
    /// True when eta0 = 0 and the path is a straight horizontal line.
    pub straight: bool,
}

impl<T: Real> GeodesicParams<T> {
    /// Constant speed of the path, |xi0|.
    pub fn speed(&self) -> T {
        norm(&self.xi0)
    }
}

// Below this angle the closed forms lose ~1e-16/theta^2 of relative accuracy
// to cancellation, while the series are already converged to machine epsilon;
// both branches agree to better than 1e-13 in the overlap.
const SERIES_CROSSOVER: f64 = 1e-2;

/// nu(theta) = (2 theta - sin 2 theta) / (1 - cos 2 theta) on [0, pi),
/// strictly increasing from 0 to infinity. The removable singularity at 0 is
/// handled by the Taylor series below the crossover.
pub fn nu<T: Real>(theta: T) -> Result<T> {
    if theta < T::zero() || theta >= T::PI() {
        return Err(Error::InvalidArgument(format!(
            "theta = {} outside [0, pi)",
            theta
        )));
    }
    if theta < T::of(SERIES_CROSSOVER) {
        // with w = 2 theta: nu = (w/3)(1 + w^2/30 + w^4/840 + O(w^6))
        let w = theta + theta;
        let w2 = w * w;
        return Ok(w / T::of(3.0) * (T::one() + w2 / T::of(30.0) + w2 * w2 / T::of(840.0)));
    }
    // 1 - cos 2 theta = 2 sin^2 theta, which stays fully accurate near pi
    let two_theta = theta + theta;
    let s = theta.sin();
    Ok((two_theta - two_theta.sin()) / (T::of(2.0) * s * s))
}

/// nu'(theta) = 2 (sin theta - theta cos theta) / sin^3 theta; nu'(0) = 2/3.
pub fn nu_prime<T: Real>(theta: T) -> T {
    if theta < T::of(SERIES_CROSSOVER) {
        // 2/3 + 2 theta^2 / 15 + O(theta^4)
        return T::of(2.0 / 3.0) + theta * theta * T::of(2.0 / 15.0);
    }
    let s = theta.sin();
    T::of(2.0) * (s - theta * theta.cos()) / (s * s * s)
}

/// Inverse of [`nu`]: the unique theta in [0, pi) with nu(theta) = y,
/// by Newton iteration safeguarded with bisection.
pub fn nu_inv<T: Real>(y: T) -> Result<T> {
    if y < T::zero() || !y.is_finite() {
        return Err(Error::InvalidArgument(format!("y = {} must be >= 0", y)));
    }
    if y == T::zero() {
        return Ok(T::zero());
    }
    let pi = T::PI();
    let mut lo = T::zero();
    let mut hi = pi - T::of(1e-12);
    // nu ~ 2 theta / 3 near 0 and ~ pi / (pi - theta)^2 near pi
    let mut theta = if y < T::of(2.0) {
        (y * T::of(1.5)).min(T::of(1.5))
    } else {
        pi - (pi / y).sqrt()
    };
    let tol = T::of(1e-12) * (T::one() + y);
    for _ in 0..200 {
        let f = nu(theta)? - y;
        if f.abs() <= tol {
            return Ok(theta);
        }
        if f > T::zero() {
            hi = theta;
        } else {
            lo = theta;
        }
        let step = f / nu_prime(theta);
        let next = theta - step;
        theta = if next > lo && next < hi {
            next
        } else {
            (lo + hi) * T::of(0.5)
        };
    }
    Err(Error::NoConvergence(format!("nu_inv({}) did not settle", y)))
}

/// theta / sin theta with the singularity at 0 removed by series.
fn theta_over_sin<T: Real>(theta: T) -> T {
    if theta < T::of(SERIES_CROSSOVER) {
        let t2 = theta * theta;
        return T::one() + t2 / T::of(6.0) + t2 * t2 * T::of(7.0 / 360.0);
    }
    theta / theta.sin()
}

/// Carnot-Caratheodory distance from the identity as a function of the two
/// radial invariants |x| and |z|.
pub fn cc_distance<T: Real>(x_norm: T, z_norm: T) -> Result<DistanceResult<T>> {
    if x_norm < T::zero() || z_norm < T::zero() {
        return Err(Error::InvalidArgument("norms must be nonnegative".into()));
    }
    if z_norm == T::zero() {
        return Ok(DistanceResult {
            d: x_norm,
            theta: Some(T::zero()),
            branch: DistanceBranch::ZZero,
        });
    }
    if x_norm == T::zero() {
        return Ok(DistanceResult {
            d: (T::of(4.0) * T::PI() * z_norm).sqrt(),
            theta: None,
            branch: DistanceBranch::XZero,
        });
    }
    let theta = nu_inv(T::of(4.0) * z_norm / (x_norm * x_norm))?;
    Ok(DistanceResult {
        d: x_norm * theta_over_sin(theta),
        theta: Some(theta),
        branch: DistanceBranch::Generic,
    })
}

/// Distance from the identity to a group point.
pub fn cc_distance_point<T: Real>(g: &GroupPoint<T>) -> Result<DistanceResult<T>> {
    cc_distance(g.x_norm(), g.z_norm())
}

/// Left-invariant distance d(g, h) = d(0, g^{-1} * h).
pub fn cc_distance_pair<T: Real>(
    s: &HTypeStructure<T>,
    g: &GroupPoint<T>,
    h: &GroupPoint<T>,
) -> Result<DistanceResult<T>> {
    cc_distance_point(&s.group_mul(&s.inverse(g), h)?)
}

/// F(theta) = d0^2 / (|x|^2 + 4|z|) along the theta-parametrization, in the
/// cancellation-free form theta^2 / (sin^2 theta + theta - sin theta cos theta).
/// F(0+) = 1, F(pi-) = pi, minimum pi/4 at theta = pi/4.
pub fn distance_ratio_f<T: Real>(theta: T) -> Result<T> {
    if theta < T::zero() || theta >= T::PI() {
        return Err(Error::InvalidArgument(format!(
            "theta = {} outside [0, pi)",
            theta
        )));
    }
    if theta < T::of(1e-4) {
        // 1 - theta^2/3 + O(theta^4); the direct form is still stable here,
        // this only removes the 0/0 at the origin
        return Ok(T::one() - theta * theta / T::of(3.0));
    }
    let s = theta.sin();
    Ok(theta * theta / (s * s + theta - s * theta.cos()))
}

// ---------------------------------------------------------------------------
// Geodesics
// ---------------------------------------------------------------------------

/// Initial covectors of the minimizing geodesic from the identity to `g`,
/// parametrized on [0, 1].
pub fn geodesic_from_endpoint<T: Real>(
    s: &HTypeStructure<T>,
    g: &GroupPoint<T>,
) -> Result<GeodesicParams<T>> {
    geodesic_from_endpoint_branch(s, g, 1)
}

/// Like [`geodesic_from_endpoint`] with an explicit loop index for the
/// degenerate x = 0 family (|eta0| = 2 pi k); k = 1 is the minimizer. The
/// generic-branch solutions with theta > pi are not exposed.
pub fn geodesic_from_endpoint_branch<T: Real>(
    s: &HTypeStructure<T>,
    g: &GroupPoint<T>,
    k: usize,
) -> Result<GeodesicParams<T>> {
    if g.is_identity() {
        return Err(Error::InvalidArgument(
            "no geodesic parameters at the identity".into(),
        ));
    }
    let m = s.center_dim();
    let z_norm = g.z_norm();
    if z_norm == T::zero() {
        if k != 1 {
            return Err(Error::InvalidArgument(
                "straight lines have a single branch".into(),
            ));
        }
        return Ok(GeodesicParams {
            xi0: g.x.clone(),
            eta0: vec![T::zero(); m],
            straight: true,
        });
    }
    let x_norm = g.x_norm();
    if x_norm == T::zero() {
        if k == 0 {
            return Err(Error::InvalidArgument("branch index starts at 1".into()));
        }
        // |eta0| = 2 pi k; the direction of xi0 is genuinely free, pick e_1.
        let two_pi_k = T::of(2.0 * k as f64) * T::PI();
        let eta0: Vec<T> = g.z.iter().map(|&v| two_pi_k * v / z_norm).collect();
        let speed = (T::of(4.0 * k as f64) * T::PI() * z_norm).sqrt();
        let mut xi0 = vec![T::zero(); s.horizontal_dim()];
        xi0[0] = speed;
        return Ok(GeodesicParams {
            xi0,
            eta0,
            straight: false,
        });
    }
    if k != 1 {
        return Err(Error::InvalidArgument(
            "only the minimizing branch is available when x != 0".into(),
        ));
    }
    let theta = nu_inv(T::of(4.0) * z_norm / (x_norm * x_norm))?;
    let two_theta = theta + theta;
    let eta0: Vec<T> = g.z.iter().map(|&v| two_theta * v / z_norm).collect();
    // x(1) = (1/|eta|^2) J_eta (I - e^{J_eta}) xi0 = (1/|eta|^2)(a I + b J_eta) xi0
    // with a = |eta| sin|eta|, b = 1 - cos|eta|; invert the 2x2 algebra of
    // {I, J_eta}: xi0 = |eta|^2 (a x - b J_eta x) / (a^2 + b^2 |eta|^2).
    let w = two_theta; // |eta0|
    let (a, b) = (w * w.sin(), T::one() - w.cos());
    let denom = a * a + b * b * w * w;
    let jx = s.j_apply(&eta0, &g.x)?;
    let xi0: Vec<T> = g
        .x
        .iter()
        .zip(&jx)
        .map(|(&xv, &jv)| w * w * (a * xv - b * jv) / denom)
        .collect();
    Ok(GeodesicParams {
        xi0,
        eta0,
        straight: false,
    })
}

/// Point of the geodesic with the given covectors at parameter t. The matrix
/// exponential is closed-form since J_eta^2 = -|eta|^2 I.
pub fn geodesic_point<T: Real>(
    s: &HTypeStructure<T>,
    params: &GeodesicParams<T>,
    t: T,
) -> Result<GroupPoint<T>> {
    let m = s.center_dim();
    let w = norm(&params.eta0);
    if params.straight || w == T::zero() {
        return Ok(GroupPoint::new(
            params.xi0.iter().map(|&v| t * v).collect(),
            vec![T::zero(); m],
        ));
    }
    let tw = t * w;
    // x(t) = (1/|eta|^2) [ |eta| sin(t|eta|) xi0 + (1 - cos(t|eta|)) J_eta xi0 ]
    let jxi = s.j_apply(&params.eta0, &params.xi0)?;
    let ca = w * tw.sin() / (w * w);
    let cb = (T::one() - tw.cos()) / (w * w);
    let x: Vec<T> = params
        .xi0
        .iter()
        .zip(&jxi)
        .map(|(&xi, &j)| ca * xi + cb * j)
        .collect();
    // z(t) = (|xi0|^2 / (2|eta|^3)) (|eta| t - sin(|eta| t)) eta0
    let speed2 = dot(&params.xi0, &params.xi0);
    let cz = speed2 * (tw - tw.sin()) / (T::of(2.0) * w * w * w);
    let z: Vec<T> = params.eta0.iter().map(|&e| cz * e).collect();
    Ok(GroupPoint::new(x, z))
}

/// Sample the geodesic at `steps + 1` equally spaced parameters in [0, 1].
pub fn geodesic_path<T: Real>(
    s: &HTypeStructure<T>,
    params: &GeodesicParams<T>,
    steps: usize,
) -> Result<Vec<(T, GroupPoint<T>)>> {
    (0..=steps)
        .map(|i| {
            let t = T::of(i as f64 / steps as f64);
            Ok((t, geodesic_point(s, params, t)?))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Geodesic coordinates
// ---------------------------------------------------------------------------

/// Geodesic coordinate chart Phi(u, eta) = ((I - e^{J_eta}) u,
/// (|u|^2/2)(1 - sin|eta|/|eta|) eta), defined for 0 < |eta| < 2 pi.
pub fn phi<T: Real>(s: &HTypeStructure<T>, u: &[T], eta: &[T]) -> Result<GroupPoint<T>> {
    let w = norm(eta);
    if w <= T::zero() || w >= T::of(2.0) * T::PI() {
        return Err(Error::InvalidArgument(format!(
            "|eta| = {} outside (0, 2 pi)",
            w
        )));
    }
    // (I - e^{J_eta}) u = (1 - cos|eta|) u - (sin|eta|/|eta|) J_eta u
    let ju = s.j_apply(eta, u)?;
    let ca = T::one() - w.cos();
    let cb = w.sin() / w;
    let x: Vec<T> = u
        .iter()
        .zip(&ju)
        .map(|(&uv, &jv)| ca * uv - cb * jv)
        .collect();
    let u2 = dot(u, u);
    let cz = u2 * (T::one() - w.sin() / w) / T::of(2.0);
    let z: Vec<T> = eta.iter().map(|&e| cz * e).collect();
    Ok(GroupPoint::new(x, z))
}

/// Jacobian determinant of Phi as a function of |u| and |eta|:
/// A = |u|^{2m} (1/2 - sin|eta|/(2|eta|))^{m-1} (2 - 2cos|eta|)^{n-1}
///     (2 - 2cos|eta| - |eta| sin|eta|).
pub fn jacobian_a<T: Real>(u_norm: T, eta_norm: T, n: usize, m: usize) -> Result<T> {
    if u_norm <= T::zero() {
        return Err(Error::InvalidArgument("|u| must be positive".into()));
    }
    if eta_norm <= T::zero() || eta_norm >= T::of(2.0) * T::PI() {
        return Err(Error::InvalidArgument(format!(
            "|eta| = {} outside (0, 2 pi)",
            eta_norm
        )));
    }
    let w = eta_norm;
    let half_minus = (T::one() - w.sin() / w) * T::of(0.5);
    let two_minus = T::of(2.0) - T::of(2.0) * w.cos();
    let last = two_minus - w * w.sin();
    Ok(u_norm.powi(2 * m as i32)
        * half_minus.powi(m as i32 - 1)
        * two_minus.powi(n as i32 - 1)
        * last)
}

//! Adaptive Gauss-Kronrod (7-15) quadrature and Gauss-Legendre rules for the
//! kernel integrals.

use crate::real::Real;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// Kronrod abscissae on [0, 1] side of [-1, 1]; even indices are the embedded
// Gauss-7 points.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: T,
    pub panels: usize,
    /// False when the error target was not met within the panel budget; the
    /// partial result is still returned.
    pub converged: bool,
}

/// One Gauss-Kronrod 7-15 pass over [a, b]: (integral, error estimate).
fn gk15<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::of(0.5);
    let mid = (a + b) * T::of(0.5);
    let mut kron = T::zero();
    let mut gauss = T::zero();
    for i in 0..8 {
        let x = T::of(XGK[i]);
        let wk = T::of(WGK[i]);
        let (fp, fm) = if i == 7 {
            let v = f(mid);
            (v, T::zero())
        } else {
            (f(mid + half * x), f(mid - half * x))
        };
        let pair = fp + fm;
        kron = kron + wk * pair;
        if i % 2 == 1 {
            gauss = gauss + T::of(WG[i / 2]) * pair;
        } else if i == 7 {
            gauss = gauss + T::of(WG[3]) * pair;
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).abs();
    (value, err)
}

#[derive(Debug)]
struct Panel<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .partial_cmp(&other.err)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.a.partial_cmp(&other.a).unwrap_or(Ordering::Equal))
    }
}

/// Adaptive quadrature of `f` over [a, b]. The interval is pre-split into
/// `init_panels` equal pieces (>= 1; use this to resolve oscillation), then
/// the worst panel is bisected until the summed error estimate is below
/// max(abs_tol, rel_tol * |integral|) or `max_panels` is reached.
pub fn adaptive<T: Real>(
    f: impl Fn(T) -> T,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    init_panels: usize,
    max_panels: usize,
) -> QuadResult<T> {
    let init = init_panels.max(1);
    let mut heap: BinaryHeap<Panel<T>> = BinaryHeap::new();
    let mut total = T::zero();
    let mut err = T::zero();
    let width = (b - a) / T::of(init as f64);
    for i in 0..init {
        let pa = a + width * T::of(i as f64);
        let pb = if i + 1 == init {
            b
        } else {
            a + width * T::of((i + 1) as f64)
        };
        let (v, e) = gk15(&f, pa, pb);
        total = total + v;
        err = err + e;
        heap.push(Panel {
            a: pa,
            b: pb,
            value: v,
            err: e,
        });
    }
    let mut since_resync = 0usize;
    loop {
        // incremental sums drift; resync from the heap periodically
        if since_resync >= 256 {
            total = heap.iter().fold(T::zero(), |acc, p| acc + p.value);
            err = heap.iter().fold(T::zero(), |acc, p| acc + p.err);
            since_resync = 0;
        }
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return QuadResult {
                value: total,
                abs_err: err,
                panels: heap.len(),
                converged: true,
            };
        }
        if heap.len() >= max_panels {
            return QuadResult {
                value: total,
                abs_err: err,
                panels: heap.len(),
                converged: false,
            };
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = (worst.a + worst.b) * T::of(0.5);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        err = err - worst.err + e1 + e2;
        since_resync += 1;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], by
/// Newton iteration on the Legendre recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess
        let mut x = T::of((std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos());
        let mut dp = T::zero();
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = T::one();
            let mut p1 = x;
            for k in 2..=n {
                let kf = T::of(k as f64);
                let p2 = ((T::of(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = T::of(nf) * (x * p1 - p0) / (x * x - T::one());
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() < T::of(1e-15) {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = T::of(2.0) / ((T::one() - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    let half = (b - a) * T::of(0.5);
    let mid = (a + b) * T::of(0.5);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

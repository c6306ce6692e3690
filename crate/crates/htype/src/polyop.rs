//! Exact polynomial calculus for the invariant vector fields and the
//! sublaplacian. Polynomials carry either `f64` or `BigRational`
//! coefficients; with rationals every operation here is exact.

use crate::algebra::{build_heisenberg, HTypeStructure};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Coefficient ring for [`Polynomial`]: `f64` or exact `BigRational`.
pub trait Coeff:
    Clone
    + PartialEq
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + fmt::Debug
    + Send
    + Sync
    + 'static
{
    /// Exact conversion where possible (`BigRational::from_float` is exact
    /// for finite doubles; structure matrix entries are small integers).
    fn from_f64(v: f64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn parse(s: &str) -> Option<Self>;
    fn render(&self) -> String;
}

impl Coeff for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn parse(s: &str) -> Option<Self> {
        if let Some((a, b)) = s.split_once('/') {
            let a: f64 = a.trim().parse().ok()?;
            let b: f64 = b.trim().parse().ok()?;
            return Some(a / b);
        }
        s.trim().parse().ok()
    }
    fn render(&self) -> String {
        format!("{}", self)
    }
}

impl Coeff for BigRational {
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite float")
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: BigInt = a.trim().parse().ok()?;
            let den: BigInt = b.trim().parse().ok()?;
            if den.is_zero() {
                return None;
            }
            return Some(BigRational::new(num, den));
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            let negative = int_part.trim_start().starts_with('-');
            let int: BigInt = if int_part.is_empty() || int_part == "-" {
                BigInt::zero()
            } else {
                int_part.parse().ok()?
            };
            let frac_digits = frac_part.len() as u32;
            let frac: BigInt = if frac_part.is_empty() {
                BigInt::zero()
            } else {
                frac_part.parse().ok()?
            };
            let den = BigInt::from(10u32).pow(frac_digits);
            let mag = int.abs() * &den + frac;
            let mag = if negative { -mag } else { mag };
            return Some(BigRational::new(mag, den));
        }
        let int: BigInt = s.parse().ok()?;
        Some(BigRational::from_integer(int))
    }
    fn render(&self) -> String {
        if self.denom().is_one() {
            format!("{}", self.numer())
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Sparse polynomial in the variables x_1..x_{2n}, z_1..z_m. Exponent keys
/// store the x block first, then the z block; zero coefficients are never
/// kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<C> {
    nx: usize,
    nz: usize,
    terms: BTreeMap<Vec<u32>, C>,
}

impl<C: Coeff> Polynomial<C> {
    pub fn zero(nx: usize, nz: usize) -> Self {
        Polynomial {
            nx,
            nz,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nx: usize, nz: usize, c: C) -> Self {
        let mut p = Self::zero(nx, nz);
        p.add_term(vec![0; nx + nz], c);
        p
    }

    /// The variable x_{i+1} (0-based index into the x block).
    pub fn x_var(nx: usize, nz: usize, i: usize) -> Self {
        assert!(i < nx);
        let mut e = vec![0; nx + nz];
        e[i] = 1;
        let mut p = Self::zero(nx, nz);
        p.add_term(e, C::one());
        p
    }

    /// The variable z_{j+1} (0-based index into the z block).
    pub fn z_var(nx: usize, nz: usize, j: usize) -> Self {
        assert!(j < nz);
        let mut e = vec![0; nx + nz];
        e[nx + j] = 1;
        let mut p = Self::zero(nx, nz);
        p.add_term(e, C::one());
        p
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn add_term(&mut self, exps: Vec<u32>, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&exps) {
            Some(prev) => {
                let sum = prev + c;
                if !sum.is_zero() {
                    self.terms.insert(exps, sum);
                }
            }
            None => {
                self.terms.insert(exps, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nx, self.nz), (other.nx, other.nz));
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-C::one()))
    }

    pub fn scale(&self, s: C) -> Self {
        let mut out = Self::zero(self.nx, self.nz);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.clone() * s.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!((self.nx, self.nz), (other.nx, other.nz));
        let mut out = Self::zero(self.nx, self.nz);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(&a, &b)| a + b).collect();
                out.add_term(e, ca.clone() * cb.clone());
            }
        }
        out
    }

    /// Partial derivative with respect to variable `v` (0-based over the
    /// combined x, z block).
    fn diff(&self, v: usize) -> Self {
        let mut out = Self::zero(self.nx, self.nz);
        for (e, c) in &self.terms {
            let k = e[v];
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[v] = k - 1;
            out.add_term(e2, c.clone() * C::from_ratio(k as i64, 1));
        }
        out
    }

    /// Homogeneous weight of a monomial: sum of x exponents plus twice the
    /// sum of z exponents. Returns the maximum over terms; None when zero.
    pub fn weight(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|e| {
                let wx: u32 = e[..self.nx].iter().sum();
                let wz: u32 = e[self.nx..].iter().sum();
                wx + 2 * wz
            })
            .max()
    }

    pub fn eval(&self, x: &[C], z: &[C]) -> C {
        assert_eq!(x.len(), self.nx);
        assert_eq!(z.len(), self.nz);
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &k) in e[..self.nx].iter().enumerate() {
                for _ in 0..k {
                    term = term * x[i].clone();
                }
            }
            for (j, &k) in e[self.nx..].iter().enumerate() {
                for _ in 0..k {
                    term = term * z[j].clone();
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// Value at the origin: the constant term.
    pub fn eval_at_zero(&self) -> C {
        self.terms
            .get(&vec![0; self.nx + self.nz])
            .cloned()
            .unwrap_or_else(C::zero)
    }

    /// Terms in graded-lexicographic order.
    pub fn terms_graded(&self) -> Vec<(Vec<u32>, C)> {
        let mut v: Vec<_> = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect();
        v.sort_by(|a, b| {
            let wa: u32 = weight_of(&a.0, self.nx);
            let wb: u32 = weight_of(&b.0, self.nx);
            wa.cmp(&wb).then_with(|| a.0.cmp(&b.0))
        });
        v
    }
}

fn weight_of(e: &[u32], nx: usize) -> u32 {
    let wx: u32 = e[..nx].iter().sum();
    let wz: u32 = e[nx..].iter().sum();
    wx + 2 * wz
}

// ---------------------------------------------------------------------------
// Vector fields and the sublaplacian
// ---------------------------------------------------------------------------

fn check_dims<C: Coeff>(s: &HTypeStructure<f64>, p: &Polynomial<C>) -> Result<()> {
    if p.nx != s.horizontal_dim() || p.nz != s.center_dim() {
        return Err(Error::DimensionMismatch(format!(
            "polynomial has {} x {} variables, structure needs {} x {}",
            p.nx,
            p.nz,
            s.horizontal_dim(),
            s.center_dim()
        )));
    }
    Ok(())
}

fn apply_xi_signed<C: Coeff>(
    s: &HTypeStructure<f64>,
    p: &Polynomial<C>,
    i: usize,
    sign: i64,
) -> Result<Polynomial<C>> {
    check_dims(s, p)?;
    let nx = p.nx;
    if i >= nx {
        return Err(Error::InvalidArgument(format!(
            "field index {} out of range 1..={}",
            i + 1,
            nx
        )));
    }
    let mut out = p.diff(i);
    // +/- (1/2) sum_j <J_j x, e_i> d/dz_j, with <J_j x, e_i> = sum_k (J_j)_{ik} x_k
    for (j, jm) in s.j_matrices().iter().enumerate() {
        let dz = p.diff(nx + j);
        if dz.is_zero() {
            continue;
        }
        for k in 0..nx {
            let entry = jm[(i, k)];
            if entry == 0.0 {
                continue;
            }
            let coef = C::from_f64(entry) * C::from_ratio(sign, 2);
            let xk = Polynomial::x_var(nx, p.nz, k);
            out = out.add(&dz.mul(&xk).scale(coef));
        }
    }
    Ok(out)
}

/// Left-invariant horizontal field X_i = d/dx_i + (1/2) sum_j <J_j x, e_i> d/dz_j,
/// applied as a derivation. `i` is 0-based.
pub fn apply_xi<C: Coeff>(
    s: &HTypeStructure<f64>,
    p: &Polynomial<C>,
    i: usize,
) -> Result<Polynomial<C>> {
    apply_xi_signed(s, p, i, 1)
}

/// Right-invariant counterpart with the sign-flipped z term.
pub fn apply_xi_hat<C: Coeff>(
    s: &HTypeStructure<f64>,
    p: &Polynomial<C>,
    i: usize,
) -> Result<Polynomial<C>> {
    apply_xi_signed(s, p, i, -1)
}

/// Sublaplacian L = sum_i X_i^2.
pub fn apply_l<C: Coeff>(s: &HTypeStructure<f64>, p: &Polynomial<C>) -> Result<Polynomial<C>> {
    check_dims(s, p)?;
    let mut out = Polynomial::zero(p.nx, p.nz);
    for i in 0..p.nx {
        let xi = apply_xi(s, p, i)?;
        out = out.add(&apply_xi(s, &xi, i)?);
    }
    Ok(out)
}

/// Three-term expansion Delta_x + <grad_x, J_{grad_z} x> + (1/4)|x|^2 Delta_z,
/// kept as an independent path for cross-checking [`apply_l`].
pub fn apply_l_expanded<C: Coeff>(
    s: &HTypeStructure<f64>,
    p: &Polynomial<C>,
) -> Result<Polynomial<C>> {
    check_dims(s, p)?;
    let nx = p.nx;
    let nz = p.nz;
    let mut out = Polynomial::zero(nx, nz);
    for i in 0..nx {
        out = out.add(&p.diff(i).diff(i));
    }
    // sum_i d/dx_i sum_j (J_j x)_i d/dz_j applied as first-order cross term:
    // sum_{i,j,k} (J_j)_{ik} x_k d^2 p / dx_i dz_j
    for (j, jm) in s.j_matrices().iter().enumerate() {
        let dz = p.diff(nx + j);
        if dz.is_zero() {
            continue;
        }
        for i in 0..nx {
            let dxdz = dz.diff(i);
            if dxdz.is_zero() {
                continue;
            }
            for k in 0..nx {
                let entry = jm[(i, k)];
                if entry == 0.0 {
                    continue;
                }
                let xk = Polynomial::x_var(nx, nz, k);
                out = out.add(&dxdz.mul(&xk).scale(C::from_f64(entry)));
            }
        }
    }
    let mut xsq = Polynomial::zero(nx, nz);
    for k in 0..nx {
        let xk = Polynomial::x_var(nx, nz, k);
        xsq = xsq.add(&xk.mul(&xk));
    }
    for j in 0..nz {
        let dzz = p.diff(nx + j).diff(nx + j);
        if dzz.is_zero() {
            continue;
        }
        out = out.add(&xsq.mul(&dzz).scale(C::from_ratio(1, 4)));
    }
    Ok(out)
}

/// Heat semigroup on polynomials: P_t p = sum_k t^k L^k p / k!, a finite sum
/// because L lowers homogeneous weight by 2.
pub fn heat_poly<C: Coeff>(
    s: &HTypeStructure<f64>,
    p: &Polynomial<C>,
    t: C,
) -> Result<Polynomial<C>> {
    check_dims(s, p)?;
    let mut acc = p.clone();
    let mut term = p.clone();
    let mut factor = C::one();
    let mut k = 1i64;
    loop {
        term = apply_l(s, &term)?;
        if term.is_zero() {
            break;
        }
        factor = factor * t.clone() / C::from_ratio(k, 1);
        acc = acc.add(&term.scale(factor.clone()));
        k += 1;
    }
    Ok(acc)
}

/// Horizontal gradient square |grad p|^2 = sum_i (X_i p)^2.
pub fn grad_sq<C: Coeff>(s: &HTypeStructure<f64>, p: &Polynomial<C>) -> Result<Polynomial<C>> {
    check_dims(s, p)?;
    let mut out = Polynomial::zero(p.nx, p.nz);
    for i in 0..p.nx {
        let xi = apply_xi(s, p, i)?;
        out = out.add(&xi.mul(&xi));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The ratio k_2(t)
// ---------------------------------------------------------------------------

/// k_2(t) = |grad P_t f(0)|^2 / P_t(|grad f|^2)(0) for f = x_1 + z_1 x_2 on
/// the Heisenberg-Weyl group of horizontal dimension 2n, computed exactly in
/// rationals. Equals (1+t)^2 / (1 - 2t + (3n+2)t^2).
pub fn k2_ratio_exact(n: usize, t: &BigRational) -> Result<BigRational> {
    let s: HTypeStructure<f64> = build_heisenberg(n)?;
    let nx = 2 * n;
    let f: Polynomial<BigRational> = Polynomial::x_var(nx, 1, 0)
        .add(&Polynomial::z_var(nx, 1, 0).mul(&Polynomial::x_var(nx, 1, 1)));
    let ptf = heat_poly(&s, &f, t.clone())?;
    let numer = grad_sq(&s, &ptf)?.eval_at_zero();
    let denom = heat_poly(&s, &grad_sq(&s, &f)?, t.clone())?.eval_at_zero();
    if denom.is_zero() {
        return Err(Error::InvalidArgument(format!(
            "k2 denominator vanishes at t = {}",
            t
        )));
    }
    Ok(numer / denom)
}

/// Double-precision wrapper around [`k2_ratio_exact`] for non-rational t.
pub fn k2_ratio(n: usize, t: f64) -> Result<f64> {
    let tq = BigRational::from_float(t)
        .ok_or_else(|| Error::InvalidArgument("t must be finite".into()))?;
    Ok(Coeff::to_f64(&k2_ratio_exact(n, &tq)?))
}

/// Closed form (1+t)^2 / (1 - 2t + (3n+2)t^2).
pub fn k2_closed_form(n: usize, t: f64) -> f64 {
    (1.0 + t).powi(2) / (1.0 - 2.0 * t + (3.0 * n as f64 + 2.0) * t * t)
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

impl<C: Coeff> fmt::Display for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms_graded() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mut parts = vec![c.render()];
            for (i, &k) in e[..self.nx].iter().enumerate() {
                if k == 1 {
                    parts.push(format!("x{}", i + 1));
                } else if k > 1 {
                    parts.push(format!("x{}^{}", i + 1, k));
                }
            }
            for (j, &k) in e[self.nx..].iter().enumerate() {
                if k == 1 {
                    parts.push(format!("z{}", j + 1));
                } else if k > 1 {
                    parts.push(format!("z{}^{}", j + 1, k));
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

/// Parse the text format produced by `Display`: terms of the shape
/// `coef*x1^a*...*zm^c` joined by `+` or `-`. A missing coefficient means 1.
pub fn parse_polynomial<C: Coeff>(input: &str, nx: usize, nz: usize) -> Result<Polynomial<C>> {
    let mut out = Polynomial::zero(nx, nz);
    let s = input.trim();
    if s.is_empty() || s == "0" {
        return Ok(out);
    }
    // Split into signed terms at top-level + and -. A '-' before any factor
    // text flips the pending sign; scientific-notation exponents are not
    // supported, use fractions instead.
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms: Vec<(bool, String)> = Vec::new();
    let mut current = String::new();
    let mut negative = false;
    for ch in compact.chars() {
        match ch {
            '+' => {
                if !current.is_empty() {
                    terms.push((negative, std::mem::take(&mut current)));
                    negative = false;
                }
            }
            '-' => {
                if current.is_empty() {
                    negative = !negative;
                } else {
                    terms.push((negative, std::mem::take(&mut current)));
                    negative = true;
                }
            }
            _ => current.push(ch),
        }
    }
    if !current.is_empty() {
        terms.push((negative, current));
    }
    for (neg, term) in terms {
        let mut coef = C::one();
        let mut exps = vec![0u32; nx + nz];
        for factor in term.split('*') {
            let factor = factor.trim();
            if factor.is_empty() {
                return Err(Error::Parse(format!("empty factor in term '{}'", term)));
            }
            let (var_block, index_str, exp_str) = if let Some(rest) = factor.strip_prefix('x') {
                if rest.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                    let (i, e) = split_exp(rest)?;
                    (Some(false), i, e)
                } else {
                    (None, String::new(), 1)
                }
            } else if let Some(rest) = factor.strip_prefix('z') {
                if rest.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                    let (i, e) = split_exp(rest)?;
                    (Some(true), i, e)
                } else {
                    (None, String::new(), 1)
                }
            } else {
                (None, String::new(), 1)
            };
            match var_block {
                Some(is_z) => {
                    let idx: usize = index_str
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad variable '{}'", factor)))?;
                    let limit = if is_z { nz } else { nx };
                    if idx == 0 || idx > limit {
                        return Err(Error::Parse(format!(
                            "variable '{}' out of range (1..={})",
                            factor, limit
                        )));
                    }
                    let slot = if is_z { nx + idx - 1 } else { idx - 1 };
                    exps[slot] += exp_str;
                }
                None => {
                    let c = C::parse(factor)
                        .ok_or_else(|| Error::Parse(format!("bad coefficient '{}'", factor)))?;
                    coef = coef * c;
                }
            }
        }
        if neg {
            coef = -coef;
        }
        out.add_term(exps, coef);
    }
    Ok(out)
}

fn split_exp(rest: &str) -> Result<(String, u32)> {
    match rest.split_once('^') {
        Some((i, e)) => {
            let exp: u32 = e
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent '{}'", e)))?;
            Ok((i.trim().to_string(), exp))
        }
        None => Ok((rest.trim().to_string(), 1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_complex_heisenberg;

    fn h1() -> HTypeStructure<f64> {
        build_heisenberg(1).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn xi_basics() {
        let s = h1();
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        assert_eq!(apply_xi(&s, &x1, 0).unwrap(), Polynomial::constant(2, 1, 1.0));
        let c: Polynomial<f64> = Polynomial::constant(2, 1, 5.0);
        assert!(apply_xi(&s, &c, 0).unwrap().is_zero());
        assert!(apply_xi(&s, &c, 5).is_err());
    }

    #[test]
    fn xi_on_z1_heisenberg() {
        // X_1(z1) = -x2/2, X_2(z1) = x1/2
        let s = h1();
        let z1: Polynomial<f64> = Polynomial::z_var(2, 1, 0);
        let want1 = Polynomial::x_var(2, 1, 1).scale(-0.5);
        let want2 = Polynomial::x_var(2, 1, 0).scale(0.5);
        assert_eq!(apply_xi(&s, &z1, 0).unwrap(), want1);
        assert_eq!(apply_xi(&s, &z1, 1).unwrap(), want2);
        // right-invariant fields flip the z term
        assert_eq!(apply_xi_hat(&s, &z1, 0).unwrap(), want1.scale(-1.0));
        assert_eq!(apply_xi_hat(&s, &z1, 1).unwrap(), want2.scale(-1.0));
    }

    #[test]
    fn l_basics() {
        let s = h1();
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        let x1sq = x1.mul(&x1);
        assert_eq!(apply_l(&s, &x1sq).unwrap(), Polynomial::constant(2, 1, 2.0));
        // L(z1^2) = |x|^2 / 2
        let z1: Polynomial<f64> = Polynomial::z_var(2, 1, 0);
        let z1sq = z1.mul(&z1);
        let x2 = Polynomial::x_var(2, 1, 1);
        let want = x1.mul(&x1).add(&x2.mul(&x2)).scale(0.5);
        assert_eq!(apply_l(&s, &z1sq).unwrap(), want);
        // L(x1 + z1 x2) = x1
        let f = x1.add(&z1.mul(&x2));
        assert_eq!(apply_l(&s, &f).unwrap(), x1);
    }

    #[test]
    fn l_matches_three_term_expansion() {
        let s = build_complex_heisenberg::<f64>();
        let nx = 4;
        let nz = 2;
        // a mixed cubic touching both blocks
        let x1: Polynomial<f64> = Polynomial::x_var(nx, nz, 0);
        let x3 = Polynomial::x_var(nx, nz, 2);
        let z2 = Polynomial::z_var(nx, nz, 1);
        let p = x1
            .mul(&x3)
            .mul(&x1)
            .add(&z2.mul(&x1))
            .add(&z2.mul(&z2))
            .add(&x3.scale(2.5));
        let a = apply_l(&s, &p).unwrap();
        let b = apply_l_expanded(&s, &p).unwrap();
        assert!(a.sub(&b).terms_graded().iter().all(|(_, c)| c.abs() < 1e-12));
    }

    #[test]
    fn weight_grading() {
        let s = h1();
        // homogeneous weight-6 sample: x1^2 z1^2
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        let z1 = Polynomial::z_var(2, 1, 0);
        let p = x1.mul(&x1).mul(&z1).mul(&z1);
        assert_eq!(p.weight(), Some(6));
        let mut q = p.clone();
        for step in 0..4 {
            let next = apply_l(&s, &q).unwrap();
            if let (Some(w), Some(wn)) = (q.weight(), next.weight()) {
                assert_eq!(wn, w - 2, "L must lower weight by 2 (step {step})");
            }
            q = next;
        }
        assert!(q.is_zero());
        // X_i lowers weight by exactly 1
        let xp = apply_xi(&s, &p, 0).unwrap();
        assert_eq!(xp.weight(), Some(5));
    }

    #[test]
    fn heat_poly_termination_weight8() {
        let s = h1();
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        let z1 = Polynomial::z_var(2, 1, 0);
        for p in [
            x1.mul(&x1).mul(&x1).mul(&x1).mul(&z1).mul(&z1), // weight 8
            z1.mul(&z1).mul(&z1).mul(&z1),                   // weight 8
            x1.mul(&z1).mul(&z1),                            // weight 5
        ] {
            let w = p.weight().unwrap();
            let mut q = p.clone();
            for _ in 0..(w / 2 + 1) {
                q = apply_l(&s, &q).unwrap();
            }
            assert!(q.is_zero(), "L^{} must kill weight {}", w / 2 + 1, w);
        }
    }

    #[test]
    fn heat_poly_values() {
        let s = h1();
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        assert_eq!(heat_poly(&s, &x1, 0.3).unwrap(), x1);
        // |x|^2 -> |x|^2 + 4nt
        let x2 = Polynomial::x_var(2, 1, 1);
        let xsq = x1.mul(&x1).add(&x2.mul(&x2));
        let got = heat_poly(&s, &xsq, 0.25).unwrap();
        assert_eq!(got, xsq.add(&Polynomial::constant(2, 1, 1.0)));
        // f = x1 + z1 x2 -> f + t x1
        let z1 = Polynomial::z_var(2, 1, 0);
        let f = x1.add(&z1.mul(&x2));
        let got = heat_poly(&s, &f, 0.1).unwrap();
        assert_eq!(got, f.add(&x1.scale(0.1)));
    }

    #[test]
    fn heat_poly_time_derivative_identity() {
        // d/dt P_t p = L P_t p, checked coefficient-wise in t on a grid by
        // comparing the exact rational finite difference of the t-polynomial.
        let s = h1();
        let x1: Polynomial<BigRational> = Polynomial::x_var(2, 1, 0);
        let z1 = Polynomial::z_var(2, 1, 0);
        let p = x1.mul(&x1).mul(&z1).add(&z1.mul(&z1));
        // P_t p is polynomial in t of degree <= 3; five nodes pin it down, so
        // checking the identity at five rational t values is coefficient-wise.
        for k in 0..5i64 {
            let t = q(k, 7);
            let h = q(1, 1_000_000);
            let plus = heat_poly(&s, &p, t.clone() + h.clone()).unwrap();
            let minus = heat_poly(&s, &p, t.clone() - h.clone()).unwrap();
            let diff = plus
                .sub(&minus)
                .scale(q(1, 2) / h.clone());
            let lp = apply_l(&s, &heat_poly(&s, &p, t).unwrap()).unwrap();
            // central difference of a cubic has error h^2/6 * third derivative
            for (_, c) in diff.sub(&lp).terms_graded() {
                assert!(Coeff::to_f64(&c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn grad_sq_values_and_identity() {
        let s = h1();
        let x1: Polynomial<f64> = Polynomial::x_var(2, 1, 0);
        assert_eq!(grad_sq(&s, &x1).unwrap(), Polynomial::constant(2, 1, 1.0));
        // grad_sq(z1) = |x|^2/4
        let z1 = Polynomial::z_var(2, 1, 0);
        let x2 = Polynomial::x_var(2, 1, 1);
        let want = x1.mul(&x1).add(&x2.mul(&x2)).scale(0.25);
        assert_eq!(grad_sq(&s, &z1).unwrap(), want);
        // 1/2 (L(p^2) - 2 p Lp) = sum (X_i p)^2 for a random-ish cubic
        let p = x1
            .mul(&x1)
            .mul(&x2)
            .add(&z1.mul(&x1).scale(3.0))
            .add(&x2.scale(-1.5));
        let lhs = apply_l(&s, &p.mul(&p))
            .unwrap()
            .sub(&p.mul(&apply_l(&s, &p).unwrap()).scale(2.0))
            .scale(0.5);
        let rhs = grad_sq(&s, &p).unwrap();
        for (_, c) in lhs.sub(&rhs).terms_graded() {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn k2_exact_closed_form() {
        // (1+t)^2 / (1-2t+(3n+2)t^2) as exact rationals
        for n in 1..=3usize {
            for (num, den) in [(0i64, 1i64), (1, 3), (1, 4), (2, 5), (7, 10), (-1, 10)] {
                let t = q(num, den);
                let got = k2_ratio_exact(n, &t).unwrap();
                let one = BigRational::one();
                let c3n2 = q(3 * n as i64 + 2, 1);
                let want = (one.clone() + t.clone()) * (one.clone() + t.clone())
                    / (one - q(2, 1) * t.clone() + c3n2 * t.clone() * t.clone());
                assert_eq!(got, want, "n={n} t={num}/{den}");
            }
        }
    }

    #[test]
    fn k2_values() {
        assert_eq!(k2_ratio_exact(1, &q(0, 1)).unwrap(), BigRational::one());
        assert_eq!(k2_ratio_exact(1, &q(1, 3)).unwrap(), q(2, 1));
        assert_eq!(k2_ratio_exact(2, &q(1, 3)).unwrap(), q(16, 11));
        assert_eq!(k2_ratio_exact(3, &q(1, 3)).unwrap(), q(8, 7));
        assert!((k2_ratio(2, 0.17).unwrap() - k2_closed_form(2, 0.17)).abs() < 1e-14);
    }

    #[test]
    fn k2_max_at_tmax() {
        // sup k2 = (3n+5)/(3n+1) at t = 2/(3n+3), checked exactly
        for n in 1..=3usize {
            let tmax = q(2, 3 * n as i64 + 3);
            let val = k2_ratio_exact(n, &tmax).unwrap();
            assert_eq!(val, q(3 * n as i64 + 5, 3 * n as i64 + 1));
            for dt in [q(-1, 50), q(1, 50), q(1, 9)] {
                let other = k2_ratio_exact(n, &(tmax.clone() + dt)).unwrap();
                assert!(other < val);
            }
        }
    }

    #[test]
    fn text_format_round_trip() {
        let s = "2*x1^2*z1 + -1/2*x2 + 3";
        let p: Polynomial<BigRational> = parse_polynomial(s, 2, 1).unwrap();
        assert_eq!(p.num_terms(), 3);
        let printed = format!("{}", p);
        let back: Polynomial<BigRational> = parse_polynomial(&printed, 2, 1).unwrap();
        assert_eq!(p, back);
        // subtraction form and implicit coefficient
        let p2: Polynomial<f64> = parse_polynomial("x1*x2 - 0.5*z1", 2, 1).unwrap();
        assert_eq!(
            p2,
            Polynomial::x_var(2, 1, 0)
                .mul(&Polynomial::x_var(2, 1, 1))
                .add(&Polynomial::z_var(2, 1, 0).scale(-0.5))
        );
        assert!(parse_polynomial::<f64>("x9", 2, 1).is_err());
        assert!(parse_polynomial::<f64>("q1", 2, 1).is_err());
    }

    #[test]
    fn eval_and_weight() {
        let p: Polynomial<f64> = parse_polynomial("x1^2*z1 + 2*x2", 2, 1).unwrap();
        assert_eq!(p.eval(&[2.0, 3.0], &[5.0]), 20.0 + 6.0);
        assert_eq!(p.weight(), Some(4));
        assert_eq!(p.eval_at_zero(), 0.0);
    }
}

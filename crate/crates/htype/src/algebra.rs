//! H-type group structures: construction (built-in families and Clifford
//! representations), validation of the defining identities, and the group
//! operations on the realization R^{2n} x R^m.

use crate::mat::{dot, norm, Mat};
use crate::real::Real;
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default seed for randomized verification sampling.
pub const DEFAULT_VERIFY_SEED: u64 = 0x48_54_59_50_45; // "HTYPE"

/// An H-type structure on R^{2n} x R^m: the m skew matrices J_1..J_m encode
/// the bracket via [x, x']_j = <J_j x, x'> and the maps J_z = sum z_j J_j.
#[derive(Debug, Clone, PartialEq)]
pub struct HTypeStructure<T> {
    n: usize,
    m: usize,
    j: Vec<Mat<T>>,
}

/// A point g = (x, z) of the group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint<T> {
    pub x: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Real> GroupPoint<T> {
    pub fn new(x: Vec<T>, z: Vec<T>) -> Self {
        GroupPoint { x, z }
    }

    pub fn identity(two_n: usize, m: usize) -> Self {
        GroupPoint {
            x: vec![T::zero(); two_n],
            z: vec![T::zero(); m],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&v| v == T::zero()) && self.z.iter().all(|&v| v == T::zero())
    }

    pub fn x_norm(&self) -> T {
        norm(&self.x)
    }

    pub fn z_norm(&self) -> T {
        norm(&self.z)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StructureJson {
    n: usize,
    m: usize,
    #[serde(rename = "J")]
    j: Vec<Vec<f64>>,
}

impl<T: Real> HTypeStructure<T> {
    /// Wrap raw structure matrices. Only shapes are validated here; use
    /// [`verify_htype`] to check the H-type identities.
    pub fn new(n: usize, m: usize, j: Vec<Mat<T>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("n and m must be positive".into()));
        }
        if j.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} structure matrices, got {}",
                m,
                j.len()
            )));
        }
        for (k, jk) in j.iter().enumerate() {
            if jk.rows != 2 * n || jk.cols != 2 * n {
                return Err(Error::DimensionMismatch(format!(
                    "J_{} has shape {}x{}, expected {}x{}",
                    k + 1,
                    jk.rows,
                    jk.cols,
                    2 * n,
                    2 * n
                )));
            }
        }
        Ok(HTypeStructure { n, m, j })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Horizontal dimension 2n.
    pub fn horizontal_dim(&self) -> usize {
        2 * self.n
    }

    /// Center dimension m.
    pub fn center_dim(&self) -> usize {
        self.m
    }

    pub fn j_matrices(&self) -> &[Mat<T>] {
        &self.j
    }

    pub fn identity_point(&self) -> GroupPoint<T> {
        GroupPoint::identity(2 * self.n, self.m)
    }

    pub fn to_json(&self) -> String {
        let doc = StructureJson {
            n: self.n,
            m: self.m,
            j: self
                .j
                .iter()
                .map(|jk| jk.data().iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serialize structure")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: StructureJson =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let d = 2 * doc.n;
        let j = doc
            .j
            .iter()
            .map(|flat| {
                if flat.len() != d * d {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix has {} entries, expected {}",
                        flat.len(),
                        d * d
                    )));
                }
                Ok(Mat::from_vec(d, d, flat.iter().map(|&v| T::of(v)).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        HTypeStructure::new(doc.n, doc.m, j)
    }
}

/// Heisenberg-Weyl group of horizontal dimension 2n: m = 1 and J_1 is the
/// block-diagonal rotation generator with J_1 e_{2i-1} = e_{2i}.
pub fn build_heisenberg<T: Real>(n: usize) -> Result<HTypeStructure<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let d = 2 * n;
    let mut j1 = Mat::zeros(d, d);
    for i in 0..n {
        // e_{2i-1} -> e_{2i}: column 2i-1 is e_{2i}, column 2i is -e_{2i-1}
        j1[(2 * i + 1, 2 * i)] = T::one();
        j1[(2 * i, 2 * i + 1)] = -T::one();
    }
    HTypeStructure::new(n, 1, vec![j1])
}

/// Complex Heisenberg group: 2n = 4, m = 2, coordinates ordered
/// (X1, X2, Y1, Y2) and (Z1, Z2).
pub fn build_complex_heisenberg<T: Real>() -> HTypeStructure<T> {
    let o = T::zero();
    let p = T::one();
    let m = -T::one();
    // J1: X1 -> Y1, X2 -> -Y2, Y1 -> -X1, Y2 -> X2
    let j1 = Mat::from_rows(&[
        &[o, o, m, o],
        &[o, o, o, p],
        &[p, o, o, o],
        &[o, m, o, o],
    ]);
    // J2: X1 -> Y2, X2 -> Y1, Y1 -> -X2, Y2 -> -X1
    let j2 = Mat::from_rows(&[
        &[o, o, o, m],
        &[o, o, m, o],
        &[o, p, o, o],
        &[p, o, o, o],
    ]);
    HTypeStructure::new(2, 2, vec![j1, j2]).expect("built-in structure")
}

/// Hurwitz-Radon function rho(k) = 8p + 2^q for k = a 2^{4p+q}, a odd,
/// 0 <= q <= 3.
pub fn hurwitz_radon(k: u64) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let v = k.trailing_zeros() as u64;
    let p = v / 4;
    let q = v % 4;
    Ok(8 * p + (1 << q))
}

/// Whether an H-type structure with horizontal dimension `two_n` and center
/// dimension `m` exists: m < rho(2n).
pub fn exists_htype(two_n: u64, m: u64) -> Result<bool> {
    if two_n == 0 || two_n % 2 != 0 {
        return Err(Error::InvalidArgument(
            "horizontal dimension must be even and positive".into(),
        ));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    Ok(m < hurwitz_radon(two_n)?)
}

// ---------------------------------------------------------------------------
// Clifford construction
// ---------------------------------------------------------------------------

/// Letters of the 2x2 tensor alphabet: I, P = diag(1,-1), Q = antidiag(1,1),
/// R = rotation generator. R is skew with R^2 = -I; P, Q are symmetric
/// involutions; P, Q, R pairwise anticommute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Letter {
    I,
    P,
    Q,
    R,
}

impl Letter {
    fn matrix<T: Real>(self) -> Mat<T> {
        let o = T::zero();
        let p = T::one();
        let m = -T::one();
        match self {
            Letter::I => Mat::from_rows(&[&[p, o], &[o, p]]),
            Letter::P => Mat::from_rows(&[&[p, o], &[o, m]]),
            Letter::Q => Mat::from_rows(&[&[o, p], &[p, o]]),
            Letter::R => Mat::from_rows(&[&[o, m], &[p, o]]),
        }
    }

    fn anticommutes(self, other: Letter) -> bool {
        self != other && self != Letter::I && other != Letter::I
    }
}

/// Tensor monomial over k slots. Squares to -I iff it has an odd number of
/// R factors; two monomials anticommute iff an odd number of slots carry an
/// anticommuting letter pair.
fn monomial_squares_to_minus_one(word: &[Letter]) -> bool {
    word.iter().filter(|&&l| l == Letter::R).count() % 2 == 1
}

fn monomials_anticommute(a: &[Letter], b: &[Letter]) -> bool {
    a.iter()
        .zip(b)
        .filter(|(&x, &y)| x.anticommutes(y))
        .count()
        % 2
        == 1
}

fn all_words(k: usize) -> Vec<Vec<Letter>> {
    let letters = [Letter::I, Letter::P, Letter::Q, Letter::R];
    let mut words = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::with_capacity(words.len() * 4);
        for w in &words {
            for &l in &letters {
                let mut w2 = w.clone();
                w2.push(l);
                next.push(w2);
            }
        }
        words = next;
    }
    words
}

/// Find `m` pairwise-anticommuting square-(-I) monomials over `k` tensor
/// slots, by backtracking in lexicographic order (deterministic).
fn find_anticommuting_family(k: usize, m: usize) -> Option<Vec<Vec<Letter>>> {
    let candidates: Vec<Vec<Letter>> = all_words(k)
        .into_iter()
        .filter(|w| monomial_squares_to_minus_one(w))
        .collect();
    let mut chosen: Vec<usize> = Vec::new();
    fn backtrack(
        candidates: &[Vec<Letter>],
        chosen: &mut Vec<usize>,
        start: usize,
        m: usize,
    ) -> bool {
        if chosen.len() == m {
            return true;
        }
        for idx in start..candidates.len() {
            if chosen
                .iter()
                .all(|&c| monomials_anticommute(&candidates[c], &candidates[idx]))
            {
                chosen.push(idx);
                if backtrack(candidates, chosen, idx + 1, m) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    if backtrack(&candidates, &mut chosen, 0, m) {
        Some(chosen.into_iter().map(|i| candidates[i].clone()).collect())
    } else {
        None
    }
}

fn word_matrix<T: Real>(word: &[Letter]) -> Mat<T> {
    let mut m = word[0].matrix();
    for &l in &word[1..] {
        m = m.kron(&l.matrix());
    }
    m
}

/// Minimal module dimension for rank-m Clifford generators: the smallest
/// 2^k with m < rho(2^k).
pub fn minimal_clifford_dim(m: u64) -> u64 {
    let mut k = 1u64;
    loop {
        let d = 1u64 << k;
        if m < hurwitz_radon(d).expect("positive") {
            return d;
        }
        k += 1;
    }
}

/// Build an H-type structure from a real representation of the rank-m
/// Clifford algebra on its minimal module, taking `copies` direct-sum copies
/// and then re-orthonormalizing the horizontal inner product by averaging
/// over the finite group generated by the J_j.
pub fn build_clifford<T: Real>(m: usize, copies: usize) -> Result<HTypeStructure<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    if copies == 0 {
        return Err(Error::InvalidArgument("copies must be >= 1".into()));
    }
    let dim = minimal_clifford_dim(m as u64);
    let k = dim.trailing_zeros() as usize;
    let family = find_anticommuting_family(k, m).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no monomial Clifford family of rank {} on dimension {}",
            m, dim
        ))
    })?;
    let generators: Vec<Mat<T>> = family
        .iter()
        .map(|w| word_matrix::<T>(w).direct_sum_copies(copies))
        .collect();
    let generators = orthonormalize_via_averaging(&generators);
    let two_n = dim as usize * copies;
    HTypeStructure::new(two_n / 2, m, generators)
}

/// Replace the horizontal inner product with the average of <pi(g) w, pi(g) w'>
/// over the finite group generated by the J_j, and return the generators
/// expressed in an orthonormal basis of the new inner product. The result is
/// skew-adjoint and orthogonal for unit central directions regardless of how
/// the input representation was constructed.
pub fn orthonormalize_via_averaging<T: Real>(generators: &[Mat<T>]) -> Vec<Mat<T>> {
    let m = generators.len();
    let d = generators[0].rows;
    // Gram matrix of the averaged inner product: (1/|H|) sum_g pi(g)^T pi(g).
    // Signs cancel, so it suffices to run over products of generator subsets.
    let mut gram = Mat::zeros(d, d);
    let mut count = 0usize;
    for mask in 0u64..(1 << m) {
        let mut p = Mat::identity(d);
        for (i, g) in generators.iter().enumerate() {
            if mask & (1 << i) != 0 {
                p = p.matmul(g);
            }
        }
        gram = gram.add(&p.transpose().matmul(&p));
        count += 1;
    }
    let gram = gram.scale(T::one() / T::of(count as f64));
    let a = gram.spd_sqrt();
    let a_inv = gram.spd_inv_sqrt();
    generators
        .iter()
        .map(|g| a.matmul(g).matmul(&a_inv))
        .collect()
}

// ---------------------------------------------------------------------------
// Group operations
// ---------------------------------------------------------------------------

impl<T: Real> HTypeStructure<T> {
    fn check_x(&self, x: &[T]) -> Result<()> {
        if x.len() != 2 * self.n {
            return Err(Error::DimensionMismatch(format!(
                "horizontal vector has length {}, expected {}",
                x.len(),
                2 * self.n
            )));
        }
        Ok(())
    }

    fn check_z(&self, z: &[T]) -> Result<()> {
        if z.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "central vector has length {}, expected {}",
                z.len(),
                self.m
            )));
        }
        Ok(())
    }

    /// Lie bracket [x, x'] in R^m, component j = <J_j x, x'>.
    pub fn bracket(&self, x: &[T], xp: &[T]) -> Result<Vec<T>> {
        self.check_x(x)?;
        self.check_x(xp)?;
        Ok(self
            .j
            .iter()
            .map(|jk| dot(&jk.matvec(x), xp))
            .collect())
    }

    /// J_z x = sum_j z_j J_j x.
    pub fn j_apply(&self, z: &[T], x: &[T]) -> Result<Vec<T>> {
        self.check_z(z)?;
        self.check_x(x)?;
        let mut out = vec![T::zero(); 2 * self.n];
        for (zj, jk) in z.iter().zip(&self.j) {
            if *zj == T::zero() {
                continue;
            }
            let v = jk.matvec(x);
            for (o, vi) in out.iter_mut().zip(v) {
                *o = *o + *zj * vi;
            }
        }
        Ok(out)
    }

    /// BCH group law (x,z) * (x',z') = (x + x', z + z' + [x,x']/2).
    pub fn group_mul(&self, g: &GroupPoint<T>, h: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check_x(&g.x)?;
        self.check_x(&h.x)?;
        self.check_z(&g.z)?;
        self.check_z(&h.z)?;
        let half = T::of(0.5);
        let br = self.bracket(&g.x, &h.x)?;
        let x = g.x.iter().zip(&h.x).map(|(&a, &b)| a + b).collect();
        let z = g
            .z
            .iter()
            .zip(&h.z)
            .zip(br)
            .map(|((&a, &b), c)| a + b + half * c)
            .collect();
        Ok(GroupPoint::new(x, z))
    }

    /// Group inverse: negation of both components.
    pub fn inverse(&self, g: &GroupPoint<T>) -> GroupPoint<T> {
        GroupPoint::new(
            g.x.iter().map(|&v| -v).collect(),
            g.z.iter().map(|&v| -v).collect(),
        )
    }
}

/// Dilation phi_alpha(x, z) = (alpha x, alpha^2 z).
pub fn dilate<T: Real>(alpha: T, g: &GroupPoint<T>) -> Result<GroupPoint<T>> {
    if alpha <= T::zero() {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    Ok(GroupPoint::new(
        g.x.iter().map(|&v| alpha * v).collect(),
        g.z.iter().map(|&v| alpha * alpha * v).collect(),
    ))
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// One checked identity with its worst observed deviation.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome of [`verify_htype`]: per-property deviations plus an overall flag.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<PropertyCheck>,
    pub pass: bool,
}

impl VerificationReport {
    fn push(&mut self, name: &str, dev: f64, tol: f64) {
        let pass = dev <= tol;
        self.pass &= pass;
        self.checks.push(PropertyCheck {
            name: name.to_string(),
            max_deviation: dev,
            tolerance: tol,
            pass,
        });
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks
            .iter()
            .fold(0.0, |acc, c| acc.max(c.max_deviation))
    }
}

fn random_unit<T: Real, R: Rng>(rng: &mut R, len: usize) -> Vec<T> {
    loop {
        let v: Vec<T> = (0..len)
            .map(|_| T::of(rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let nrm = norm(&v);
        if nrm > T::of(1e-3) {
            return v.iter().map(|&a| a / nrm).collect();
        }
    }
}

/// Check the H-type identities on basis pairs and on random samples, with
/// a fixed seed for reproducibility.
pub fn verify_htype<T: Real>(s: &HTypeStructure<T>, tol: f64) -> VerificationReport {
    verify_htype_seeded(s, tol, DEFAULT_VERIFY_SEED, 100)
}

pub fn verify_htype_seeded<T: Real>(
    s: &HTypeStructure<T>,
    tol: f64,
    seed: u64,
    samples: usize,
) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = s.horizontal_dim();
    let m = s.center_dim();
    let mut report = VerificationReport {
        checks: Vec::new(),
        pass: true,
    };

    // Basis-level matrix identities.
    let mut skew_dev = T::zero();
    let mut square_dev = T::zero();
    let mut clifford_dev = T::zero();
    let id = Mat::identity(d);
    for j in 0..m {
        let jj = &s.j_matrices()[j];
        skew_dev = skew_dev.max(jj.transpose().add(jj).max_abs());
        square_dev = square_dev.max(jj.matmul(jj).add(&id).max_abs());
        for k in (j + 1)..m {
            let jk = &s.j_matrices()[k];
            clifford_dev = clifford_dev.max(jj.matmul(jk).add(&jk.matmul(jj)).max_abs());
        }
    }
    report.push("skew-adjoint: J_j^T = -J_j", skew_dev.to_f64_lossy(), tol);
    report.push("square: J_j^2 = -I", square_dev.to_f64_lossy(), tol);
    report.push(
        "Clifford relation: J_j J_k + J_k J_j = -2 delta_jk I",
        clifford_dev.to_f64_lossy(),
        tol,
    );

    // Randomized identities for general z, w, x, y.
    let mut jz_sq = T::zero();
    let mut ortho_zw = T::zero();
    let mut ortho_xy = T::zero();
    let mut bracket_id = T::zero();
    let mut skew_sample = T::zero();
    for _ in 0..samples.max(100) {
        let z = random_unit::<T, _>(&mut rng, m);
        let w = random_unit::<T, _>(&mut rng, m);
        let x = random_unit::<T, _>(&mut rng, d);
        let y = random_unit::<T, _>(&mut rng, d);
        let jzx = s.j_apply(&z, &x).expect("dims");
        let jzz = s.j_apply(&z, &jzx).expect("dims");
        // J_z^2 x = -|z|^2 x (|z| = 1 here)
        for i in 0..d {
            jz_sq = jz_sq.max((jzz[i] + x[i]).abs());
        }
        // <J_z x, J_w x> = <z,w> |x|^2
        let jwx = s.j_apply(&w, &x).expect("dims");
        ortho_zw = ortho_zw.max((dot(&jzx, &jwx) - dot(&z, &w) * dot(&x, &x)).abs());
        // <J_z x, J_z y> = <x,y> |z|^2
        let jzy = s.j_apply(&z, &y).expect("dims");
        ortho_xy = ortho_xy.max((dot(&jzx, &jzy) - dot(&x, &y)).abs());
        // [x, J_z x] = |x|^2 z
        let br = s.bracket(&x, &jzx).expect("dims");
        let xx = dot(&x, &x);
        for j in 0..m {
            bracket_id = bracket_id.max((br[j] - xx * z[j]).abs());
        }
        // <J_z x, x> = 0
        skew_sample = skew_sample.max(dot(&jzx, &x).abs());
    }
    report.push("J_z^2 = -|z|^2 I (sampled)", jz_sq.to_f64_lossy(), tol);
    report.push(
        "<J_z x, J_w x> = <z,w>|x|^2 (sampled)",
        ortho_zw.to_f64_lossy(),
        tol,
    );
    report.push(
        "<J_z x, J_z y> = <x,y>|z|^2 (sampled)",
        ortho_xy.to_f64_lossy(),
        tol,
    );
    report.push(
        "[x, J_z x] = |x|^2 z (sampled)",
        bracket_id.to_f64_lossy(),
        tol,
    );
    report.push("<J_z x, x> = 0 (sampled)", skew_sample.to_f64_lossy(), tol);
    report
}

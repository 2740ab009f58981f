//! Rational subspaces, Plücker coordinates and the SO(Q)-invariant split of
//! `Λ²ℝ⁴` for signature (2,2) forms; null, quasinull and exceptional
//! subspace searches.
//!
//! Wedge coordinates of `v₁ ∧ v₂` in `ℝ⁴` are ordered
//! `(e₁₂, e₁₃, e₁₄, e₂₃, e₂₄, e₃₄)`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::enumerate::par_filter_in_ellipsoid;
use crate::error::{check_dim, invalid, Error, Result};
use crate::forms::{InhomForm, SymmetricForm};
use crate::linalg::{
    hermite_normal_form, integer_determinant, integer_kernel, is_primitive, saturate,
    solve_integer, Mat,
};
use crate::scalar::{frac_distance, rational_to_f64, Rational, Real, Scalar};

pub const PAIRS4: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Integral basis of `L ∩ ℤⁿ` for a rational subspace `L`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RationalSubspace {
    basis: Vec<Vec<i64>>,
}

impl RationalSubspace {
    /// The saturation of the span of `vectors`, with a Hermite-form basis.
    pub fn from_spanning(vectors: &[Vec<i64>]) -> Result<Self> {
        let n = vectors.first().map(Vec::len).ok_or_else(|| invalid("no spanning vectors"))?;
        for v in vectors {
            check_dim(n, v.len())?;
        }
        let basis = saturate(vectors, n)?;
        if basis.is_empty() {
            return Err(invalid("the zero subspace has no basis"));
        }
        Ok(RationalSubspace { basis })
    }

    /// Keeps the given basis, which must be independent and span `L ∩ ℤⁿ`.
    pub fn from_primitive_basis(basis: Vec<Vec<i64>>) -> Result<Self> {
        let n = basis.first().map(Vec::len).ok_or_else(|| invalid("empty basis"))?;
        for v in &basis {
            check_dim(n, v.len())?;
        }
        let h = hermite_normal_form(&basis)?;
        if h.len() != basis.len() {
            return Err(invalid("basis vectors are dependent"));
        }
        if saturate(&basis, n)? != h {
            return Err(invalid("basis does not span the full lattice L ∩ ℤⁿ"));
        }
        Ok(RationalSubspace { basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis[0].len()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    /// Same subspace with its Hermite-form basis.
    pub fn canonical(&self) -> Self {
        RationalSubspace { basis: hermite_normal_form(&self.basis).expect("small entries") }
    }

    /// Plücker vector: all `d×d` minors of the basis, columns chosen in
    /// lexicographic order.
    pub fn wedge(&self) -> Vec<i64> {
        let d = self.dim();
        let n = self.ambient_dim();
        combinations(n, d)
            .into_iter()
            .map(|cols| {
                let m: Mat<i64> = self.basis.iter().map(|v| cols.iter().map(|&c| v[c]).collect()).collect();
                integer_determinant(&m).expect("small entries") as i64
            })
            .collect()
    }

    /// `‖v^L‖`, the covolume of `L ∩ ℤⁿ`.
    pub fn norm(&self) -> f64 {
        self.wedge().iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
    }

    /// Integral basis of `{w ∈ ℤⁿ : w ⊥ L}`.
    pub fn annihilator(&self) -> Mat<i64> {
        integer_kernel(&self.basis, self.ambient_dim()).expect("small entries")
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.annihilator()
            .iter()
            .all(|w| w.iter().zip(v).map(|(a, b)| *a as i128 * *b as i128).sum::<i128>() == 0)
    }

    /// Reconstructs the plane of a primitive decomposable 6-vector.
    pub fn from_wedge(w: &[i64; 6]) -> Result<Self> {
        if plucker_relation(w) != 0 {
            return Err(invalid("vector violates the Plücker relation"));
        }
        let mut m = vec![vec![0i64; 4]; 4];
        for (k, &(i, j)) in PAIRS4.iter().enumerate() {
            m[i][j] = w[k];
            m[j][i] = -w[k];
        }
        let l = RationalSubspace::from_spanning(&m)?;
        if l.dim() != 2 {
            return Err(invalid("wedge vector is not a nonzero decomposable bivector"));
        }
        Ok(l)
    }
}

fn combinations(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, d, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wedge2 {
    pub coords: [i64; 6],
    /// The inputs were linearly dependent, so `coords` is zero.
    pub dependent: bool,
}

pub fn wedge2(v1: &[i64; 4], v2: &[i64; 4]) -> Wedge2 {
    let mut coords = [0i64; 6];
    for (k, &(i, j)) in PAIRS4.iter().enumerate() {
        coords[k] = v1[i] * v2[j] - v1[j] * v2[i];
    }
    Wedge2 { coords, dependent: coords.iter().all(|&c| c == 0) }
}

/// `w₁w₆ − w₂w₅ + w₃w₄`, zero exactly for decomposable bivectors.
pub fn plucker_relation(w: &[i64; 6]) -> i128 {
    w[0] as i128 * w[5] as i128 - w[1] as i128 * w[4] as i128 + w[2] as i128 * w[3] as i128
}

/// Gram matrix of the wedge pairing `v ∧ w = A(v, w)·e₁₂₃₄`.
pub fn wedge_pairing() -> [[f64; 6]; 6] {
    let mut a = [[0.0; 6]; 6];
    a[0][5] = 1.0;
    a[5][0] = 1.0;
    a[1][4] = -1.0;
    a[4][1] = -1.0;
    a[2][3] = 1.0;
    a[3][2] = 1.0;
    a
}

fn wedge_pairing_exact(w: &[Rational]) -> Vec<Rational> {
    vec![w[5].clone(), -w[4].clone(), w[3].clone(), w[2].clone(), -w[1].clone(), w[0].clone()]
}

/// Gram matrix of the form induced by `M` on `Λ²`:
/// `G[(ij),(kl)] = M_ik M_jl − M_il M_jk`.
pub fn induced_gram<S: Scalar>(m: &[Vec<S>]) -> Vec<Vec<S>> {
    PAIRS4
        .iter()
        .map(|&(i, j)| {
            PAIRS4
                .iter()
                .map(|&(k, l)| {
                    m[i][k].clone() * m[j][l].clone() - m[i][l].clone() * m[j][k].clone()
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullType {
    NullFirstType,
    NullSecondType,
    NotNull,
}

/// The decomposition `Λ²ℝ⁴ = V₁ ⊕ V₂` for a (2,2) form `Q`.
///
/// `J = G⁻¹A` (with `G` the induced Gram matrix and `A` the wedge pairing)
/// satisfies `J² = μ²`. `V₁` is the `+μ` eigenspace and `V₂` the `−μ`
/// eigenspace; for `Q = B₄` this puts `e₁∧e₂` in `V₁`. For a general `Q`
/// the labels correspond to transporting the `B₄` convention through a
/// congruence `𝔮` with `det 𝔮 > 0`.
#[derive(Clone, Debug)]
pub struct InvariantSplit {
    pub mu: f64,
    pub v1_basis: [[f64; 6]; 3],
    pub v2_basis: [[f64; 6]; 3],
    pub proj1: [[f64; 6]; 6],
    pub proj2: [[f64; 6]; 6],
    pub ordering_tag: &'static str,
}

fn check_22<S: Scalar>(q: &SymmetricForm<S>) -> Result<()> {
    if q.dim() != 4 {
        return Err(invalid(format!("need a form in 4 variables, got {}", q.dim())));
    }
    let sig = q.signature()?;
    if (sig.positive, sig.negative) != (2, 2) {
        return Err(invalid(format!(
            "need signature (2,2), got ({}, {})",
            sig.positive, sig.negative
        )));
    }
    Ok(())
}

fn column_basis(p: &DMatrix<f64>) -> [[f64; 6]; 3] {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut cols: Vec<DVector<f64>> = (0..6).map(|j| p.column(j).into_owned()).collect();
    for _ in 0..3 {
        for b in &basis {
            for c in cols.iter_mut() {
                let proj = b.dot(c);
                *c -= b * proj;
            }
        }
        let (k, _) = cols
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.norm()))
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        let v = cols[k].normalize();
        basis.push(v);
    }
    let mut out = [[0.0; 6]; 3];
    for (i, b) in basis.iter().enumerate() {
        for j in 0..6 {
            out[i][j] = b[j];
        }
    }
    out
}

pub fn invariant_split<S: Scalar>(q: &SymmetricForm<S>) -> Result<InvariantSplit> {
    check_22(q)?;
    let m = q.to_f64();
    let g = induced_gram(m.entries());
    let gm = DMatrix::from_fn(6, 6, |i, j| g[i][j]);
    let a = wedge_pairing();
    let am = DMatrix::from_fn(6, 6, |i, j| a[i][j]);
    let ginv = gm.try_inverse().ok_or_else(|| Error::Degenerate("singular induced form".into()))?;
    let j = ginv * am;
    let mu = ((&j * &j).trace() / 6.0).sqrt();
    let id = DMatrix::<f64>::identity(6, 6);
    let p1 = (&id + &j / mu) * 0.5;
    let p2 = (&id - &j / mu) * 0.5;
    let to_arr = |p: &DMatrix<f64>| {
        let mut out = [[0.0; 6]; 6];
        for r in 0..6 {
            for c in 0..6 {
                out[r][c] = p[(r, c)];
            }
        }
        out
    };
    Ok(InvariantSplit {
        mu,
        v1_basis: column_basis(&p1),
        v2_basis: column_basis(&p2),
        proj1: to_arr(&p1),
        proj2: to_arr(&p2),
        ordering_tag: "V1 = +mu eigenspace of G^-1 A (contains e1^e2 for x1x4 - x2x3)",
    })
}

impl InvariantSplit {
    pub fn project(&self, which: usize, w: &[f64; 6]) -> [f64; 6] {
        let p = if which == 1 { &self.proj1 } else { &self.proj2 };
        let mut out = [0.0; 6];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..6).map(|c| p[r][c] * w[c]).sum();
        }
        out
    }

    pub fn projection_norms(&self, w: &[i64; 6]) -> (f64, f64) {
        let wf = w.map(|x| x as f64);
        let n = |v: [f64; 6]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (n(self.project(1, &wf)), n(self.project(2, &wf)))
    }
}

fn plane_wedge(l: &RationalSubspace) -> Result<[i64; 6]> {
    if l.ambient_dim() != 4 || l.dim() != 2 {
        return Err(invalid("need a 2-dimensional subspace of R^4"));
    }
    let w = l.wedge();
    Ok([w[0], w[1], w[2], w[3], w[4], w[5]])
}

/// Null test for a plane `L`: exact when `Q` has rational entries.
pub fn null_criterion<S: Scalar>(q: &SymmetricForm<S>, l: &RationalSubspace) -> Result<NullType> {
    check_22(q)?;
    let w = plane_wedge(l)?;
    let basis: Vec<Vec<S>> =
        l.basis().iter().map(|v| v.iter().map(|&x| S::from_i64(x)).collect()).collect();
    if let Some(m) = q.rational_entries() {
        let qr = SymmetricForm::new(m.clone())?;
        let br: Vec<Vec<Rational>> =
            l.basis().iter().map(|v| v.iter().map(|&x| Rational::from_integer(x.into())).collect()).collect();
        let null = qr.evaluate(&br[0])?.is_zero()
            && qr.evaluate(&br[1])?.is_zero()
            && qr.bilinear(&br[0], &br[1])?.is_zero();
        if !null {
            return Ok(NullType::NotNull);
        }
        let wr: Vec<Rational> = w.iter().map(|&x| Rational::from_integer(x.into())).collect();
        let g = induced_gram(&m);
        let gw: Vec<Rational> = g
            .iter()
            .map(|row| row.iter().zip(&wr).fold(Rational::zero(), |acc, (a, b)| acc + a * b))
            .collect();
        let aw = wedge_pairing_exact(&wr);
        let k = gw.iter().position(|x| !x.is_zero()).ok_or_else(|| Error::Degenerate("induced form kills the plane".into()))?;
        let lambda = &aw[k] / &gw[k];
        if aw.iter().zip(&gw).any(|(a, g)| *a != &lambda * g) {
            return Err(Error::Degenerate("null plane is not an eigenvector of G^-1 A".into()));
        }
        return Ok(if lambda.is_positive() { NullType::NullFirstType } else { NullType::NullSecondType });
    }
    let scale = q.to_f64().entries().iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let nb = |v: &[i64]| v.iter().map(|&x| (x * x) as f64).sum::<f64>();
    let tol = 1e-9 * scale * nb(&l.basis()[0]).max(nb(&l.basis()[1]));
    let r = [
        q.evaluate(&basis[0])?.to_f64(),
        q.evaluate(&basis[1])?.to_f64(),
        q.bilinear(&basis[0], &basis[1])?.to_f64(),
    ];
    if r.iter().any(|v| v.abs() > tol) {
        return Ok(NullType::NotNull);
    }
    let split = invariant_split(q)?;
    let (p1, p2) = split.projection_norms(&w);
    Ok(if p2 <= p1 { NullType::NullFirstType } else { NullType::NullSecondType })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasinullReport {
    pub is_quasinull: bool,
    pub norm_pi1: f64,
    pub norm_pi2: f64,
    /// `NullFirstType` when `π₂` is the small projection, `NullSecondType` otherwise.
    pub kind: NullType,
}

pub fn quasinull_test(split: &InvariantSplit, l: &RationalSubspace, mu1: f64) -> Result<QuasinullReport> {
    if !(mu1 > 0.0 && mu1 < 1.0) {
        return Err(invalid(format!("mu1 must lie in (0,1), got {mu1}")));
    }
    let w = plane_wedge(l)?;
    let (p1, p2) = split.projection_norms(&w);
    Ok(QuasinullReport {
        is_quasinull: p1 * p2 < mu1,
        norm_pi1: p1,
        norm_pi2: p2,
        kind: if p2 <= p1 { NullType::NullFirstType } else { NullType::NullSecondType },
    })
}

/// Primitive pairs `(m, n)` up to sign with `lo ≤ m² + n² ≤ hi`, ordered by
/// norm then lexicographically.
pub fn primitive_pairs(lo: f64, hi: f64) -> Vec<(i64, i64)> {
    let r = hi.max(0.0).sqrt().floor() as i64;
    let mut out = Vec::new();
    for m in 0..=r {
        for n in -r..=r {
            if m == 0 && n <= 0 {
                continue;
            }
            let s = (m * m + n * n) as f64;
            if s >= lo && s <= hi && crate::linalg::gcd(m as i128, n as i128) == 1 {
                out.push((m, n));
            }
        }
    }
    out.sort_by_key(|&(m, n)| (m * m + n * n, m, n));
    out
}

/// First-type null planes of `B₄` with `T/2 ≤ ‖v^L‖ ≤ T`, with standard
/// bases `(m,0,n,0), (0,m,0,n)`.
pub fn enumerate_null_first_type(t: f64) -> Vec<RationalSubspace> {
    primitive_pairs(t / 2.0, t)
        .into_iter()
        .map(|(m, n)| RationalSubspace { basis: vec![vec![m, 0, n, 0], vec![0, m, 0, n]] })
        .collect()
}

/// Second-type null planes of `B₄`, with bases `(m,n,0,0), (0,0,m,n)`.
pub fn enumerate_null_second_type(t: f64) -> Vec<RationalSubspace> {
    primitive_pairs(t / 2.0, t)
        .into_iter()
        .map(|(m, n)| RationalSubspace { basis: vec![vec![m, n, 0, 0], vec![0, 0, m, n]] })
        .collect()
}

fn canonical_sign(w: &mut [i64; 6]) {
    if let Some(first) = w.iter().find(|&&x| x != 0) {
        if *first < 0 {
            for x in w.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Primitive decomposable `w ∈ ℤ⁶` with `‖w‖ ≤ t_max`, `‖w‖ ≥ t_min` and
/// `‖π_j(w)‖ ≤ eps` for `j = 1` or `j = 2`, up to sign.
fn tube_search(
    split: &InvariantSplit,
    t_min: f64,
    t_max: f64,
    eps: f64,
    node_cap: u64,
) -> Result<Vec<[i64; 6]>> {
    let mut found = BTreeSet::new();
    for which in [1usize, 2] {
        let p = if which == 1 { &split.proj1 } else { &split.proj2 };
        let mut gram = vec![vec![0.0; 6]; 6];
        for (r, row) in gram.iter_mut().enumerate() {
            for (c, g) in row.iter_mut().enumerate() {
                let ptp: f64 = (0..6).map(|k| p[k][r] * p[k][c]).sum();
                *g = ptp / (eps * eps) + if r == c { 1.0 / (t_max * t_max) } else { 0.0 };
            }
        }
        let hits = par_filter_in_ellipsoid(&gram, &[0.0; 6], 2.0, node_cap, |z, _| {
            let w = [z[0], z[1], z[2], z[3], z[4], z[5]];
            let n2: i128 = w.iter().map(|&x| x as i128 * x as i128).sum();
            let nf = (n2 as f64).sqrt();
            if n2 == 0 || nf > t_max || nf < t_min || plucker_relation(&w) != 0 || !is_primitive(&w) {
                return None;
            }
            let (p1, p2) = split.projection_norms(&w);
            let small = if which == 1 { p1 } else { p2 };
            if small > eps {
                return None;
            }
            let mut w = w;
            canonical_sign(&mut w);
            Some(w)
        })?;
        found.extend(hits);
    }
    Ok(found.into_iter().collect())
}

/// Quasinull planes `L` of `Q` with `T/2 ≤ ‖v^L‖ ≤ T`, each once, with
/// Hermite-form bases, sorted by basis.
pub fn enumerate_quasinull<S: Scalar>(
    q: &SymmetricForm<S>,
    mu1: f64,
    t: f64,
    node_cap: u64,
) -> Result<Vec<RationalSubspace>> {
    if !(mu1 > 0.0 && mu1 < 1.0) {
        return Err(invalid(format!("mu1 must lie in (0,1), got {mu1}")));
    }
    let split = invariant_split(q)?;
    if t < 1.0 {
        return Ok(Vec::new());
    }
    let eps = 4.0 * mu1 / t * (1.0 + 1e-9);
    let candidates = tube_search(&split, t / 2.0, t, eps, node_cap)?;
    let mut out = Vec::new();
    for w in candidates {
        let (p1, p2) = split.projection_norms(&w);
        if p1 * p2 < mu1 {
            out.push(RationalSubspace::from_wedge(&w)?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalWitness {
    pub subspace: RationalSubspace,
    /// `v_ξ ∈ ℤⁿ` with `ξ − v_ξ ∈ L`, so the plane `L − v_ξ` is exceptional.
    pub integral_shift: Vec<i64>,
    /// `max_i dist(⟨w_i, ξ⟩, ℤ)` over the annihilator basis.
    pub residual: f64,
    /// The membership `ξ ∈ L + ℤⁿ` was decided exactly.
    pub certified: bool,
}

/// `Some(Some(k))` when `x` is certified to equal `k`, `Some(None)` when it
/// is certified non-integral, `None` for opaque values.
fn certified_integer(x: &Real) -> Option<Option<BigInt>> {
    x.exact_integer().ok()
}

fn pairing<S: Scalar>(w: &[i64], xi: &[S]) -> S {
    w.iter().zip(xi).fold(S::zero(), |acc, (&a, b)| acc + S::from_i64(a) * b.clone())
}

fn witness_for<S: Scalar>(
    l: &RationalSubspace,
    xi: &[S],
    tol: f64,
) -> Result<Option<ExceptionalWitness>> {
    let ann = l.annihilator();
    let mut targets = Vec::with_capacity(ann.len());
    let mut residual = 0.0f64;
    let mut certified = true;
    for w in &ann {
        let v = pairing(w, xi);
        match v.as_tagged().and_then(|r| certified_integer(&r)) {
            Some(Some(k)) => targets.push(i64::try_from(k).map_err(|_| Error::Overflow("shift"))?),
            Some(None) => return Ok(None),
            None => {
                certified = false;
                let f = v.to_f64();
                let k = f.round();
                residual = residual.max((f - k).abs());
                targets.push(k as i64);
            }
        }
    }
    if residual >= tol {
        return Ok(None);
    }
    let shift = solve_integer(&ann, &targets, l.ambient_dim())?
        .ok_or_else(|| Error::Degenerate("annihilator system has no integral solution".into()))?;
    Ok(Some(ExceptionalWitness { subspace: l.clone(), integral_shift: shift, residual, certified }))
}

pub const EXCEPTIONAL_TOL: f64 = 1e-8;

fn is_multiple_of_b4(m: &[Vec<Rational>]) -> bool {
    let c = &m[0][3];
    if c.is_zero() {
        return false;
    }
    for i in 0..4 {
        for j in 0..4 {
            let expected = match (i, j) {
                (0, 3) | (3, 0) => c.clone(),
                (1, 2) | (2, 1) => -c.clone(),
                _ => Rational::zero(),
            };
            if m[i][j] != expected {
                return false;
            }
        }
    }
    true
}

fn is_multiple_of_x1x3_minus_x2sq(m: &[Vec<Rational>]) -> bool {
    let c = &m[0][2];
    if c.is_zero() {
        return false;
    }
    let two = Rational::from_integer(2.into());
    for i in 0..3 {
        for j in 0..3 {
            let expected = match (i, j) {
                (0, 2) | (2, 0) => c.clone(),
                (1, 1) => -(c * &two),
                _ => Rational::zero(),
            };
            if m[i][j] != expected {
                return false;
            }
        }
    }
    true
}

/// Verifies that `L` is totally isotropic for `Q`: exactly for rational or
/// tagged-linear values, by relative residual otherwise.
fn is_null_plane<S: Scalar>(q: &SymmetricForm<S>, basis: &[Vec<i64>]) -> Result<bool> {
    let scale = q.to_f64().entries().iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let vs: Vec<Vec<S>> = basis.iter().map(|v| v.iter().map(|&x| S::from_i64(x)).collect()).collect();
    for i in 0..vs.len() {
        for j in i..vs.len() {
            let v = q.bilinear(&vs[i], &vs[j])?;
            let size = |u: &[i64]| u.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            let tol = 1e-9 * scale * size(&basis[i]) * size(&basis[j]);
            let zero = match v.as_tagged() {
                Some(Real::Exact(r)) => r.is_zero(),
                Some(Real::Linear { .. }) => false,
                _ => v.to_f64().abs() <= tol,
            };
            if !zero {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Rational null subspaces of `Q` with `‖v^L‖ ≤ t_search`: planes for
/// (2,2) forms, lines for (2,1) forms.
pub fn null_subspaces<S: Scalar>(q: &SymmetricForm<S>, t_search: f64) -> Result<Vec<RationalSubspace>> {
    let sig = q.signature()?;
    let mut out = Vec::new();
    match (q.dim(), sig.positive.min(sig.negative), sig.positive.max(sig.negative)) {
        (4, 2, 2) => {
            if let Some(m) = q.rational_entries().filter(|m| is_multiple_of_b4(m)) {
                let _ = m;
                out.extend(enumerate_null_first_type_upto(t_search));
                out.extend(enumerate_null_second_type_upto(t_search));
            } else {
                let split = invariant_split(q)?;
                let eps = 1e-6 * t_search.max(1.0);
                for w in tube_search(&split, 1.0, t_search, eps, 1 << 36)? {
                    let l = RationalSubspace::from_wedge(&w)?;
                    if is_null_plane(q, l.basis())? {
                        out.push(l);
                    }
                }
            }
        }
        (3, 1, 2) => {
            if let Some(m) = q.rational_entries().filter(|m| is_multiple_of_x1x3_minus_x2sq(m)) {
                let _ = m;
                for v in null_vectors_21(t_search) {
                    out.push(RationalSubspace { basis: vec![v.to_vec()] });
                }
            } else {
                for v in null_lines_3(q, t_search)? {
                    out.push(RationalSubspace { basis: vec![v] });
                }
            }
        }
        _ => {
            return Err(invalid(format!(
                "exceptional subspaces need signature (2,2) or (2,1), got ({}, {}) in {} variables",
                sig.positive,
                sig.negative,
                q.dim()
            )))
        }
    }
    let mut canon: Vec<RationalSubspace> = out.into_iter().map(|l| l.canonical()).collect();
    canon.sort();
    canon.dedup();
    Ok(canon)
}

fn enumerate_null_first_type_upto(t: f64) -> Vec<RationalSubspace> {
    primitive_pairs(1.0, t)
        .into_iter()
        .map(|(m, n)| RationalSubspace { basis: vec![vec![m, 0, n, 0], vec![0, m, 0, n]] })
        .collect()
}

fn enumerate_null_second_type_upto(t: f64) -> Vec<RationalSubspace> {
    primitive_pairs(1.0, t)
        .into_iter()
        .map(|(m, n)| RationalSubspace { basis: vec![vec![m, n, 0, 0], vec![0, 0, m, n]] })
        .collect()
}

/// Primitive null vectors of a ternary form with `‖w‖ ≤ t`, up to sign.
fn null_lines_3<S: Scalar>(q: &SymmetricForm<S>, t: f64) -> Result<Vec<Vec<i64>>> {
    let f = q.to_f64();
    let m = f.entries();
    let r = t.floor() as i64;
    // Solve for the coordinate with the largest diagonal coefficient.
    let k = (0..3).max_by(|&a, &b| m[a][a].abs().total_cmp(&m[b][b].abs())).unwrap();
    let others: Vec<usize> = (0..3).filter(|&i| i != k).collect();
    let mut out = BTreeSet::new();
    let mut push = |v: Vec<i64>| -> Result<()> {
        let norm2: i64 = v.iter().map(|x| x * x).sum();
        if norm2 == 0 || norm2 as f64 > t * t || !is_primitive(&v) {
            return Ok(());
        }
        if is_null_plane(q, std::slice::from_ref(&v))? {
            let mut v = v;
            if v.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            out.insert(v);
        }
        Ok(())
    };
    for a in -r..=r {
        for b in -r..=r {
            let (i, j) = (others[0], others[1]);
            let (ya, yb) = (a as f64, b as f64);
            if m[k][k].abs() < 1e-300 {
                // Q linear in x_k: handled by the quadratic below with c = 0.
            }
            let c = m[k][k];
            let beta = m[k][i] * ya + m[k][j] * yb;
            let gamma = m[i][i] * ya * ya + 2.0 * m[i][j] * ya * yb + m[j][j] * yb * yb;
            let mut roots = Vec::new();
            if c.abs() > 0.0 {
                let disc = beta * beta - c * gamma;
                if disc >= -1e-9 * (beta * beta + (c * gamma).abs() + 1.0) {
                    let s = disc.max(0.0).sqrt();
                    roots.push((-beta + s) / c);
                    roots.push((-beta - s) / c);
                }
            } else if beta != 0.0 {
                roots.push(-gamma / (2.0 * beta));
            }
            for root in roots {
                for cand in [root.floor() as i64, root.ceil() as i64] {
                    let mut v = vec![0i64; 3];
                    v[i] = a;
                    v[j] = b;
                    v[k] = cand;
                    push(v)?;
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Exceptional subspaces of `Q_ξ` among the null subspaces with
/// `‖v^L‖ ≤ t_search`: those `L` with `ξ ∈ L + ℤⁿ`.
pub fn exceptional_subspaces<S: Scalar>(
    form: &InhomForm<S>,
    t_search: f64,
) -> Result<Vec<ExceptionalWitness>> {
    let nulls = null_subspaces(form.homogeneous(), t_search)?;
    let mut out = Vec::new();
    for l in &nulls {
        if let Some(w) = witness_for(l, form.shift(), EXCEPTIONAL_TOL)? {
            out.push(w);
        }
    }
    Ok(out)
}

/// Primitive null vectors `(m², mn, n²)` of `xz − y²`, one per `±(m, n)`,
/// with matrix norm `m² + n² ≤ t`.
pub fn null_vectors_21(t: f64) -> Vec<[i64; 3]> {
    primitive_pairs(1.0, t).into_iter().map(|(m, n)| [m * m, m * n, n * n]).collect()
}

/// Distance to `ℤ` of `n²ξ₁ − 2mnξ₂ + m²ξ₃`.
pub fn fractional_pairing_21<S: Scalar>(xi: &[S; 3], m: i64, n: i64) -> Result<f64> {
    if crate::linalg::gcd(m as i128, n as i128) != 1 {
        return Err(invalid(format!("(m, n) = ({m}, {n}) is not primitive")));
    }
    let c = S::from_i64(n * n) * xi[0].clone() - S::from_i64(2 * m * n) * xi[1].clone()
        + S::from_i64(m * m) * xi[2].clone();
    Ok(match c.as_rational() {
        Some(q) => rational_to_f64(&frac_distance(&q)),
        None => {
            let f = c.to_f64();
            (f - f.round()).abs()
        }
    })
}

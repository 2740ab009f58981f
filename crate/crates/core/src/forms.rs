//! Quadratic forms `Q(x) = xᵀMx` and their inhomogeneous shifts
//! `Q_ξ(x) = Q(x + ξ)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{determinant, mat_mul, transpose, Mat};
use crate::scalar::{integer_nth_root, Generator, Rational, Real, Scalar};

pub const MIN_DIM: usize = 3;
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
}

impl Signature {
    pub fn new(positive: usize, negative: usize) -> Self {
        Signature { positive, negative }
    }

    pub fn is_indefinite(&self) -> bool {
        self.positive > 0 && self.negative > 0
    }
}

/// Symmetric coefficient matrix of a quadratic form in `3..=8` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricForm<S> {
    entries: Mat<S>,
}

impl<S: Scalar> SymmetricForm<S> {
    pub fn new(entries: Mat<S>) -> Result<Self> {
        let n = entries.len();
        if !(MIN_DIM..=MAX_DIM).contains(&n) {
            return Err(invalid(format!(
                "form dimension must be between {MIN_DIM} and {MAX_DIM}, got {n}"
            )));
        }
        for (i, row) in entries.iter().enumerate() {
            check_dim(n, row.len())?;
            for j in 0..i {
                if row[j] != entries[j][i] {
                    return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymmetricForm { entries })
    }

    pub fn diagonal(diag: Vec<S>) -> Result<Self> {
        let n = diag.len();
        let mut m = vec![vec![S::zero(); n]; n];
        for (i, d) in diag.into_iter().enumerate() {
            m[i][i] = d;
        }
        Self::new(m)
    }

    /// Builds the form from polynomial coefficients: `coeffs[(i, j)]` with
    /// `i ≤ j` multiplies `x_i x_j`.
    pub fn from_polynomial(n: usize, coeffs: &[((usize, usize), S)]) -> Result<Self> {
        let two = S::one() + S::one();
        let mut m = vec![vec![S::zero(); n]; n];
        for ((i, j), c) in coeffs {
            let (i, j) = (*i.min(j), *i.max(j));
            if j >= n {
                return Err(invalid(format!("variable index {j} out of range")));
            }
            if i == j {
                m[i][i] = m[i][i].clone() + c.clone();
            } else {
                let h = c.clone() / two.clone();
                m[i][j] = m[i][j].clone() + h.clone();
                m[j][i] = m[j][i].clone() + h;
            }
        }
        Self::new(m)
    }

    /// `x₁x₄ − x₂x₃`, the determinant on 2×2 matrices.
    pub fn split_22() -> Self {
        let h = S::from_rational(&Rational::new(1.into(), 2.into()));
        let mut m = vec![vec![S::zero(); 4]; 4];
        m[0][3] = h.clone();
        m[3][0] = h.clone();
        m[1][2] = -h.clone();
        m[2][1] = -h;
        SymmetricForm { entries: m }
    }

    /// `x₁x₃ − x₂²`, the determinant on symmetric 2×2 matrices.
    pub fn split_21() -> Self {
        let h = S::from_rational(&Rational::new(1.into(), 2.into()));
        let mut m = vec![vec![S::zero(); 3]; 3];
        m[0][2] = h.clone();
        m[2][0] = h;
        m[1][1] = -S::one();
        SymmetricForm { entries: m }
    }

    /// `2x₁xₙ + Σ_{i=2}^{p} x_i² − Σ_{i=p+1}^{n−1} x_i²` for `p ≥ 2`, `q ≥ 1`.
    pub fn standard(p: usize, q: usize) -> Result<Self> {
        let n = p + q;
        if p < 2 || q < 1 {
            return Err(invalid(format!("standard form needs p ≥ 2 and q ≥ 1, got ({p}, {q})")));
        }
        let mut m = vec![vec![S::zero(); n]; n];
        m[0][n - 1] = S::one();
        m[n - 1][0] = S::one();
        for (i, row) in m.iter_mut().enumerate().take(n - 1).skip(1) {
            row[i] = if i < p { S::one() } else { -S::one() };
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &S {
        &self.entries[i][j]
    }

    pub fn entries(&self) -> &Mat<S> {
        &self.entries
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().flatten().all(Scalar::is_exact)
    }

    pub fn rational_entries(&self) -> Option<Mat<Rational>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(Scalar::as_rational).collect())
            .collect()
    }

    pub fn to_f64(&self) -> SymmetricForm<f64> {
        SymmetricForm {
            entries: self.entries.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect(),
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> SymmetricForm<T> {
        SymmetricForm { entries: self.entries.iter().map(|r| r.iter().map(&f).collect()).collect() }
    }

    pub fn scaled(&self, c: &S) -> Self {
        self.map(|x| x.clone() * c.clone())
    }

    /// Polynomial coefficients: `x_i²` gets `M_ii`, `x_i x_j` (`i < j`) gets `2M_ij`.
    pub fn polynomial_coefficients(&self) -> Vec<((usize, usize), S)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let c = if i == j {
                    self.entries[i][i].clone()
                } else {
                    self.entries[i][j].clone() + self.entries[i][j].clone()
                };
                out.push(((i, j), c));
            }
        }
        out
    }

    pub fn evaluate(&self, y: &[S]) -> Result<S> {
        check_dim(self.dim(), y.len())?;
        Ok(self.eval_unchecked(y))
    }

    fn eval_unchecked(&self, y: &[S]) -> S {
        let n = y.len();
        let mut acc = S::zero();
        for i in 0..n {
            let mut row = self.entries[i][i].clone() * y[i].clone();
            for j in i + 1..n {
                let t = self.entries[i][j].clone() * y[j].clone();
                row = row + t.clone() + t;
            }
            acc = acc + row * y[i].clone();
        }
        acc
    }

    /// Polar bilinear form `B(x, y) = xᵀMy`.
    pub fn bilinear(&self, x: &[S], y: &[S]) -> Result<S> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        let mut acc = S::zero();
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                acc = acc + xi.clone() * self.entries[i][j].clone() * yj.clone();
            }
        }
        Ok(acc)
    }

    pub fn determinant(&self) -> S {
        determinant(&self.entries)
    }

    /// `GᵀMG`.
    pub fn congruent(&self, g: &[Vec<S>]) -> Result<Self> {
        check_dim(self.dim(), g.len())?;
        let gt = transpose(g);
        Self::new(mat_mul(&mat_mul(&gt, &self.entries), g))
    }

    pub fn signature(&self) -> Result<Signature> {
        match self.rational_entries() {
            Some(m) => exact_inertia(&m),
            None => float_inertia(&self.to_f64().entries),
        }
    }

    /// Rescales by `c > 0` so that `|det(cM)| = 1`. Already-normalized forms
    /// are returned unchanged. Fails for exact scalar types when `c` is
    /// irrational, since the result would not be representable.
    pub fn normalize_discriminant(&self) -> Result<Self> {
        let n = self.dim() as u32;
        let det = self.determinant();
        if det.is_zero() {
            return Err(Error::Degenerate("zero determinant".into()));
        }
        if let Some(d) = det.as_rational() {
            let d = d.abs();
            if d.is_one() {
                return Ok(self.clone());
            }
            if let (Some(p), Some(q)) =
                (integer_nth_root(d.numer(), n), integer_nth_root(d.denom(), n))
            {
                return Ok(self.scaled(&S::from_rational(&Rational::new(q, p))));
            }
        }
        let df = det.to_f64().abs();
        let c = df.powf(-1.0 / n as f64);
        if (c - 1.0).abs() <= 1e-12 {
            return Ok(self.clone());
        }
        let cs = S::from_f64(c);
        if cs.is_exact() {
            return Err(Error::Unsupported(
                "the normalizing factor is irrational; use a tagged or floating form".into(),
            ));
        }
        Ok(self.scaled(&cs))
    }
}

fn to_integer_matrix(m: &Mat<Rational>) -> Vec<Vec<BigInt>> {
    let lcm = m.iter().flatten().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
    m.iter()
        .map(|row| row.iter().map(|q| (q * Rational::from_integer(lcm.clone())).to_integer()).collect())
        .collect()
}

/// Inertia by symmetric fraction-free elimination. Each pivot of the
/// Bareiss recursion is a leading principal minor of a congruent integer
/// matrix, so the signs of successive minor ratios count the eigenvalue
/// signs (Sylvester). Symmetric swaps and the shear `e_k ↦ e_k + e_j`
/// supply a nonzero pivot when the diagonal vanishes.
fn exact_inertia(m: &Mat<Rational>) -> Result<Signature> {
    let n = m.len();
    let mut a = to_integer_matrix(m);
    let mut prev = BigInt::one();
    let mut positive = 0;
    let mut negative = 0;
    let swap = |a: &mut Vec<Vec<BigInt>>, i: usize, j: usize| {
        a.swap(i, j);
        for row in a.iter_mut() {
            row.swap(i, j);
        }
    };
    for k in 0..n {
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                swap(&mut a, k, j);
            } else {
                let pair = (k..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .find(|&(i, j)| !a[i][j].is_zero());
                let Some((i, j)) = pair else {
                    return Err(Error::Degenerate(format!("rank {k} < {n}")));
                };
                swap(&mut a, k, i);
                for c in 0..n {
                    let v = a[j][c].clone();
                    a[k][c] += v;
                }
                for r in 0..n {
                    let v = a[r][j].clone();
                    a[r][k] += v;
                }
            }
        }
        let pivot = a[k][k].clone();
        if (pivot.is_positive()) == (prev.is_positive()) {
            positive += 1;
        } else {
            negative += 1;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &pivot * &a[i][j] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        for i in k + 1..n {
            a[i][k] = BigInt::zero();
            a[k][i] = BigInt::zero();
        }
        prev = pivot;
    }
    Ok(Signature { positive, negative })
}

fn float_inertia(m: &Mat<f64>) -> Result<Signature> {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let eig = mat.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut sig = Signature { positive: 0, negative: 0 };
    for &v in eig.eigenvalues.iter() {
        if v > tol {
            sig.positive += 1;
        } else if v < -tol {
            sig.negative += 1;
        }
    }
    if sig.positive + sig.negative < n || scale == 0.0 {
        return Err(Error::Degenerate(format!(
            "numerical rank {} < {n}",
            sig.positive + sig.negative
        )));
    }
    Ok(sig)
}

/// `Q_ξ(x) = Q(x + ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InhomForm<S> {
    homogeneous: SymmetricForm<S>,
    shift: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RationalityClass {
    RationalForm,
    IrrationalHomogeneous,
    RationalHomogeneousIrrationalShift,
}

#[derive(Clone, Debug)]
pub struct RationalityReport {
    pub class: RationalityClass,
    /// `c` such that `c·Q` has coprime integer polynomial coefficients, when
    /// `Q` is proportional to a rational form. Exact when `Q` itself is.
    pub witness: Option<Real>,
    /// The integral form `c·Q`, as a matrix.
    pub integral_matrix: Option<Mat<Rational>>,
}

impl<S: Scalar> InhomForm<S> {
    pub fn new(homogeneous: SymmetricForm<S>, shift: Vec<S>) -> Result<Self> {
        check_dim(homogeneous.dim(), shift.len())?;
        Ok(InhomForm { homogeneous, shift })
    }

    pub fn homogeneous_only(homogeneous: SymmetricForm<S>) -> Self {
        let n = homogeneous.dim();
        InhomForm { homogeneous, shift: vec![S::zero(); n] }
    }

    pub fn homogeneous(&self) -> &SymmetricForm<S> {
        &self.homogeneous
    }

    pub fn shift(&self) -> &[S] {
        &self.shift
    }

    pub fn dim(&self) -> usize {
        self.homogeneous.dim()
    }

    pub fn is_exact(&self) -> bool {
        self.homogeneous.is_exact() && self.shift.iter().all(Scalar::is_exact)
    }

    pub fn to_f64(&self) -> InhomForm<f64> {
        InhomForm {
            homogeneous: self.homogeneous.to_f64(),
            shift: self.shift.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> InhomForm<T> {
        InhomForm {
            homogeneous: self.homogeneous.map(&f),
            shift: self.shift.iter().map(&f).collect(),
        }
    }

    pub fn with_shift(&self, shift: Vec<S>) -> Result<Self> {
        Self::new(self.homogeneous.clone(), shift)
    }

    /// `(x + ξ)ᵀ M (x + ξ)`.
    pub fn evaluate(&self, x: &[S]) -> Result<S> {
        check_dim(self.dim(), x.len())?;
        let y: Vec<S> = x.iter().zip(&self.shift).map(|(a, b)| a.clone() + b.clone()).collect();
        Ok(self.homogeneous.eval_unchecked(&y))
    }

    pub fn evaluate_int(&self, x: &[i64]) -> Result<S> {
        let xs: Vec<S> = x.iter().map(|&v| S::from_i64(v)).collect();
        self.evaluate(&xs)
    }

    /// Decides from the scalar tags whether `Q_ξ` is rational, has an
    /// irrational homogeneous part, or a rational part with irrational shift.
    /// Untagged floats are refused. Opaque entries are treated as generic
    /// reals: two of them are proportional only if equal up to sign.
    pub fn classify_rationality(&self) -> Result<RationalityReport> {
        let tag = |x: &S| {
            x.as_tagged().ok_or_else(|| {
                Error::Unsupported("rationality of untagged floating entries is undecidable".into())
            })
        };
        let n = self.dim();
        let mut m: Vec<Vec<Real>> = Vec::with_capacity(n);
        for row in self.homogeneous.entries() {
            m.push(row.iter().map(tag).collect::<Result<_>>()?);
        }
        let shift: Vec<Real> = self.shift.iter().map(tag).collect::<Result<_>>()?;
        let base = m
            .iter()
            .flatten()
            .find(|x| !num_traits::Zero::is_zero(*x))
            .cloned()
            .ok_or_else(|| invalid("the zero form has no rationality class"))?;
        let mut ratios: Vec<Vec<Rational>> = Vec::with_capacity(n);
        for row in &m {
            let mut r = Vec::with_capacity(n);
            for x in row {
                match rational_ratio(x, &base) {
                    Some(q) => r.push(q),
                    None => {
                        return Ok(RationalityReport {
                            class: RationalityClass::IrrationalHomogeneous,
                            witness: None,
                            integral_matrix: None,
                        })
                    }
                }
            }
            ratios.push(r);
        }
        // Primitive integral polynomial coefficients of the ratio matrix.
        let coeffs: Vec<Rational> = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| if i == j { ratios[i][i].clone() } else { &ratios[i][j] * Rational::from_integer(2.into()) })
            .collect();
        let lcm = coeffs.iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
        let content = coeffs
            .iter()
            .map(|q| (q * Rational::from_integer(lcm.clone())).to_integer())
            .fold(BigInt::zero(), |g, v| g.gcd(&v));
        let factor = Rational::new(lcm, content);
        let integral: Mat<Rational> =
            ratios.iter().map(|r| r.iter().map(|q| q * &factor).collect()).collect();
        let witness = Real::Exact(factor) / base;
        let class = if shift.iter().all(|x| matches!(x, Real::Exact(_))) {
            RationalityClass::RationalForm
        } else {
            RationalityClass::RationalHomogeneousIrrationalShift
        };
        Ok(RationalityReport { class, witness: Some(witness), integral_matrix: Some(integral) })
    }
}

/// `x / base` when it is a certified rational number.
fn rational_ratio(x: &Real, base: &Real) -> Option<Rational> {
    if num_traits::Zero::is_zero(x) {
        return Some(Rational::zero());
    }
    match (x, base) {
        (Real::Opaque(a), Real::Opaque(b)) => {
            if a == b {
                Some(Rational::one())
            } else if *a == -*b {
                Some(-Rational::one())
            } else {
                None
            }
        }
        (Real::Opaque(_), _) | (_, Real::Opaque(_)) => None,
        _ => {
            let (cx, tx) = x.linear_parts()?;
            let (cb, tb) = base.linear_parts()?;
            let coords = |c: Rational, t: BTreeMap<Generator, Rational>| {
                let mut v: BTreeMap<Option<Generator>, Rational> =
                    t.into_iter().map(|(g, q)| (Some(g), q)).collect();
                if !c.is_zero() {
                    v.insert(None, c);
                }
                v
            };
            let vx = coords(cx, tx);
            let vb = coords(cb, tb);
            if vx.len() != vb.len() || !vx.keys().eq(vb.keys()) {
                return None;
            }
            let mut ratio: Option<Rational> = None;
            for (k, qx) in &vx {
                let r = qx / &vb[k];
                match &ratio {
                    None => ratio = Some(r),
                    Some(prev) if *prev != r => return None,
                    _ => {}
                }
            }
            ratio
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    fn b4() -> SymmetricForm<Rational> {
        SymmetricForm::split_22()
    }

    #[test]
    fn b4_at_identity_matrix_is_one() {
        let q = InhomForm::homogeneous_only(b4());
        assert_eq!(q.evaluate_int(&[1, 0, 0, 1]).unwrap(), rat_int(1));
        assert_eq!(q.evaluate_int(&[0, 0, 0, 0]).unwrap(), rat_int(0));
    }

    #[test]
    fn polynomial_round_trip() {
        let q = SymmetricForm::<Rational>::from_polynomial(
            4,
            &[((0, 3), rat_int(1)), ((1, 2), rat_int(-1))],
        )
        .unwrap();
        assert_eq!(q, b4());
    }

    #[test]
    fn signatures() {
        assert_eq!(b4().signature().unwrap(), Signature::new(2, 2));
        let d = SymmetricForm::diagonal(vec![rat_int(1), rat_int(1), rat_int(-1)]).unwrap();
        assert_eq!(d.signature().unwrap(), Signature::new(2, 1));
        let f = SymmetricForm::diagonal(vec![1.0, 1.0, 1.0, -2f64.sqrt()]).unwrap();
        assert_eq!(f.signature().unwrap(), Signature::new(3, 1));
        // x₁x₃ − x₂² is a (2,1) form up to the overall sign.
        assert_eq!(
            SymmetricForm::<Rational>::split_21().signature().unwrap(),
            Signature::new(1, 2)
        );
        assert_eq!(
            SymmetricForm::<Rational>::standard(3, 2).unwrap().signature().unwrap(),
            Signature::new(3, 2)
        );
    }

    #[test]
    fn degenerate_forms_are_rejected() {
        let d = SymmetricForm::diagonal(vec![rat_int(1), rat_int(0), rat_int(-1)]).unwrap();
        assert!(matches!(d.signature(), Err(Error::Degenerate(_))));
        let f = SymmetricForm::diagonal(vec![1.0, 0.0, -1.0]).unwrap();
        assert!(matches!(f.signature(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn small_dimensions_are_rejected() {
        assert!(SymmetricForm::diagonal(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn normalization() {
        let d = SymmetricForm::diagonal(vec![rat_int(2), rat_int(2), rat_int(-2), rat_int(-2)])
            .unwrap();
        let n = d.normalize_discriminant().unwrap();
        assert_eq!(
            n,
            SymmetricForm::diagonal(vec![rat_int(1), rat_int(1), rat_int(-1), rat_int(-1)]).unwrap()
        );
        // det(B₄) = 1/16, so the factor is 2.
        assert_eq!(b4().determinant(), rat(1, 16));
        let nb = b4().normalize_discriminant().unwrap();
        assert_eq!(nb, b4().scaled(&rat_int(2)));
        assert_eq!(nb.normalize_discriminant().unwrap(), nb);
    }

    #[test]
    fn rationality_classes() {
        let xi = vec![rat(1, 2), rat_int(0), rat_int(0), rat_int(0)];
        let q = InhomForm::new(b4().map(|x| Real::Exact(x.clone())), xi.into_iter().map(Real::Exact).collect())
            .unwrap();
        assert_eq!(q.classify_rationality().unwrap().class, RationalityClass::RationalForm);

        let irr_shift = vec![Real::generator("sqrt2", 2f64.sqrt()), Real::zero(), Real::zero(), Real::zero()];
        let q2 = q.with_shift(irr_shift).unwrap();
        assert_eq!(
            q2.classify_rationality().unwrap().class,
            RationalityClass::RationalHomogeneousIrrationalShift
        );

        let three = InhomForm::homogeneous_only(b4().scaled(&rat_int(3)));
        let rep = three.classify_rationality().unwrap();
        assert_eq!(rep.class, RationalityClass::RationalForm);
        assert_eq!(rep.witness.unwrap().as_rational(), Some(rat(1, 3)));

        let s2 = Real::generator("sqrt2", 2f64.sqrt());
        let irr = SymmetricForm::diagonal(vec![Real::one(), Real::one(), Real::one(), -s2]).unwrap();
        assert_eq!(
            InhomForm::homogeneous_only(irr).classify_rationality().unwrap().class,
            RationalityClass::IrrationalHomogeneous
        );
    }

    #[test]
    fn proportional_irrational_multiple_is_rational_form() {
        let s2 = Real::generator("sqrt2", 2f64.sqrt());
        let q = SymmetricForm::<Real>::split_22().scaled(&s2);
        let rep = InhomForm::homogeneous_only(q).classify_rationality().unwrap();
        assert_eq!(rep.class, RationalityClass::RationalForm);
        let m = rep.integral_matrix.unwrap();
        assert_eq!(m[0][3], rat(1, 2));
    }

    #[test]
    fn floats_cannot_be_classified() {
        let q = InhomForm::homogeneous_only(SymmetricForm::diagonal(vec![1.0, 1.0, -1.0]).unwrap());
        assert!(matches!(q.classify_rationality(), Err(Error::Unsupported(_))));
    }
}

//! Small dense linear algebra: generic elimination over any [`Scalar`],
//! integer lattice reductions (Hermite form, kernels, saturation) and a
//! floating LLL.
//!
//! Matrices are `Vec<Vec<_>>` in row-major order; sizes here never exceed 8.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Mat<S> = Vec<Vec<S>>;

pub fn identity<S: Scalar>(n: usize) -> Mat<S> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
        .collect()
}

pub fn transpose<S: Clone>(m: &[Vec<S>]) -> Mat<S> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn mat_mul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Mat<S> {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(S::zero(), |acc, k| acc + row[k].clone() * b[k][j].clone())
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec<S: Scalar>(a: &[Vec<S>], v: &[S]) -> Vec<S> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone()))
        .collect()
}

/// Gaussian elimination to upper-triangular form with largest-magnitude
/// pivots. Returns the transformed matrix and the determinant sign flips.
fn eliminate<S: Scalar>(mut a: Mat<S>, mut rhs: Option<&mut Mat<S>>) -> Option<(Mat<S>, bool)> {
    let n = a.len();
    let mut flipped = false;
    for k in 0..n {
        let pivot = (k..n).max_by(|&i, &j| {
            a[i][k]
                .abs_value()
                .partial_cmp(&a[j][k].abs_value())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][k].is_zero() {
            return None;
        }
        if pivot != k {
            a.swap(pivot, k);
            if let Some(r) = rhs.as_deref_mut() {
                r.swap(pivot, k);
            }
            flipped = !flipped;
        }
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = a[i][k].clone() / a[k][k].clone();
            for j in k..n {
                let t = f.clone() * a[k][j].clone();
                a[i][j] = a[i][j].clone() - t;
            }
            if let Some(r) = rhs.as_deref_mut() {
                for j in 0..r[i].len() {
                    let t = f.clone() * r[k][j].clone();
                    r[i][j] = r[i][j].clone() - t;
                }
            }
        }
    }
    Some((a, flipped))
}

pub fn determinant<S: Scalar>(m: &[Vec<S>]) -> S {
    match eliminate(m.to_vec(), None) {
        None => S::zero(),
        Some((u, flipped)) => {
            let d = (0..u.len()).fold(S::one(), |acc, i| acc * u[i][i].clone());
            if flipped {
                -d
            } else {
                d
            }
        }
    }
}

/// Solves `m · X = rhs` for a square nonsingular `m`.
pub fn solve<S: Scalar>(m: &[Vec<S>], rhs: &[Vec<S>]) -> Option<Mat<S>> {
    let n = m.len();
    let mut r = rhs.to_vec();
    let (u, _) = eliminate(m.to_vec(), Some(&mut r))?;
    let cols = if n == 0 { 0 } else { r[0].len() };
    let mut x = vec![vec![S::zero(); cols]; n];
    for i in (0..n).rev() {
        for c in 0..cols {
            let mut acc = r[i][c].clone();
            for j in i + 1..n {
                acc = acc - u[i][j].clone() * x[j][c].clone();
            }
            x[i][c] = acc / u[i][i].clone();
        }
    }
    Some(x)
}

pub fn inverse<S: Scalar>(m: &[Vec<S>]) -> Option<Mat<S>> {
    solve(m, &identity(m.len()))
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Returns `(g, s, t)` with `s·a + t·b = g = gcd(a, b) ≥ 0`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

pub fn vector_gcd(v: &[i64]) -> i64 {
    v.iter().fold(0i128, |g, &x| gcd(g, x as i128)) as i64
}

/// Divides by the content; the zero vector is returned unchanged.
pub fn primitive(v: &[i64]) -> Vec<i64> {
    let g = vector_gcd(v);
    if g <= 1 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / g).collect()
    }
}

pub fn is_primitive(v: &[i64]) -> bool {
    vector_gcd(v) == 1
}

fn checked(x: Option<i128>) -> Result<i128> {
    x.ok_or(Error::Overflow("integer lattice reduction"))
}

fn to_i64(x: i128) -> Result<i64> {
    i64::try_from(x).map_err(|_| Error::Overflow("integer lattice reduction"))
}

fn widen(rows: &[Vec<i64>]) -> Vec<Vec<i128>> {
    rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect()
}

fn narrow(rows: Vec<Vec<i128>>) -> Result<Mat<i64>> {
    rows.into_iter().map(|r| r.into_iter().map(to_i64).collect()).collect()
}

/// Row Hermite normal form of the lattice spanned by `rows`: echelon,
/// positive pivots, entries above each pivot reduced into `[0, pivot)`.
/// Zero rows are dropped.
pub fn hermite_normal_form(rows: &[Vec<i64>]) -> Result<Mat<i64>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let n = rows[0].len();
    let mut a = widen(rows);
    let mut r = 0;
    for c in 0..n {
        if r == a.len() {
            break;
        }
        for i in r + 1..a.len() {
            if a[i][c] == 0 {
                continue;
            }
            let (g, s, t) = ext_gcd(a[r][c], a[i][c]);
            let (p, q) = (a[r][c] / g, a[i][c] / g);
            for j in 0..n {
                let (x, y) = (a[r][j], a[i][j]);
                let nx = checked(s.checked_mul(x).and_then(|u| t.checked_mul(y).and_then(|v| u.checked_add(v))))?;
                let ny = checked(p.checked_mul(y).and_then(|u| q.checked_mul(x).and_then(|v| u.checked_sub(v))))?;
                a[r][j] = nx;
                a[i][j] = ny;
            }
        }
        if a[r][c] == 0 {
            continue;
        }
        if a[r][c] < 0 {
            for x in a[r].iter_mut() {
                *x = -*x;
            }
        }
        let pivot = a[r][c];
        for i in 0..r {
            let f = a[i][c].div_euclid(pivot);
            if f != 0 {
                for j in 0..n {
                    a[i][j] = checked(a[r][j].checked_mul(f).and_then(|u| a[i][j].checked_sub(u)))?;
                }
            }
        }
        r += 1;
    }
    a.truncate(r);
    narrow(a)
}

/// Column echelon form `A·U = [H | 0]` with `U` unimodular.
struct ColumnEchelon {
    h: Vec<Vec<i128>>,
    u: Vec<Vec<i128>>,
    /// `(row, column)` of each pivot, columns `0..rank`.
    pivots: Vec<(usize, usize)>,
}

fn column_echelon(rows: &[Vec<i64>], n: usize) -> Result<ColumnEchelon> {
    let mut h = widen(rows);
    let mut u: Vec<Vec<i128>> =
        (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    let combine = |m: &mut Vec<Vec<i128>>, c1: usize, c2: usize, coeff: [i128; 4]| -> Result<()> {
        for row in m.iter_mut() {
            let (x, y) = (row[c1], row[c2]);
            row[c1] = checked(coeff[0].checked_mul(x).and_then(|a| coeff[1].checked_mul(y).and_then(|b| a.checked_add(b))))?;
            row[c2] = checked(coeff[2].checked_mul(x).and_then(|a| coeff[3].checked_mul(y).and_then(|b| a.checked_add(b))))?;
        }
        Ok(())
    };
    for i in 0..h.len() {
        if r == n {
            break;
        }
        for j in r + 1..n {
            if h[i][j] == 0 {
                continue;
            }
            let (g, s, t) = ext_gcd(h[i][r], h[i][j]);
            let (p, q) = (h[i][r] / g, h[i][j] / g);
            let coeff = [s, t, -q, p];
            combine(&mut h, r, j, coeff)?;
            combine(&mut u, r, j, coeff)?;
        }
        if h[i][r] != 0 {
            if h[i][r] < 0 {
                for row in h.iter_mut() {
                    row[r] = -row[r];
                }
                for row in u.iter_mut() {
                    row[r] = -row[r];
                }
            }
            pivots.push((i, r));
            r += 1;
        }
    }
    Ok(ColumnEchelon { h, u, pivots })
}

/// Integral basis (in Hermite form) of `{x ∈ ℤⁿ : rows · x = 0}`.
pub fn integer_kernel(rows: &[Vec<i64>], n: usize) -> Result<Mat<i64>> {
    let ce = column_echelon(rows, n)?;
    let rank = ce.pivots.len();
    let basis: Vec<Vec<i128>> = (rank..n).map(|c| ce.u.iter().map(|row| row[c]).collect()).collect();
    hermite_normal_form(&narrow(basis)?)
}

/// Integral basis of `span(rows) ∩ ℤⁿ`, in Hermite form.
pub fn saturate(rows: &[Vec<i64>], n: usize) -> Result<Mat<i64>> {
    let annihilator = integer_kernel(rows, n)?;
    integer_kernel(&annihilator, n)
}

/// An integral solution of `rows · x = rhs`, if one exists.
pub fn solve_integer(rows: &[Vec<i64>], rhs: &[i64], n: usize) -> Result<Option<Vec<i64>>> {
    let ce = column_echelon(rows, n)?;
    let mut y = vec![0i128; n];
    for &(i, c) in &ce.pivots {
        let mut acc = rhs[i] as i128;
        for l in 0..c {
            acc = checked(ce.h[i][l].checked_mul(y[l]).and_then(|v| acc.checked_sub(v)))?;
        }
        if acc % ce.h[i][c] != 0 {
            return Ok(None);
        }
        y[c] = acc / ce.h[i][c];
    }
    for (i, row) in ce.h.iter().enumerate() {
        let mut acc = 0i128;
        for (hv, yv) in row.iter().zip(&y) {
            acc = checked(hv.checked_mul(*yv).and_then(|v| acc.checked_add(v)))?;
        }
        if acc != rhs[i] as i128 {
            return Ok(None);
        }
    }
    let mut x = vec![0i128; n];
    for (k, xk) in x.iter_mut().enumerate() {
        for (c, yc) in y.iter().enumerate() {
            *xk = checked(ce.u[k][c].checked_mul(*yc).and_then(|v| xk.checked_add(v)))?;
        }
    }
    Ok(Some(x.into_iter().map(to_i64).collect::<Result<_>>()?))
}

pub fn rank_i64(rows: &[Vec<i64>]) -> Result<usize> {
    Ok(hermite_normal_form(rows)?.len())
}

/// Determinant of a small integer matrix by fraction-free (Bareiss) elimination.
pub fn integer_determinant(m: &[Vec<i64>]) -> Result<i128> {
    let n = m.len();
    let mut a = widen(m);
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(p) => {
                    a.swap(k, p);
                    sign = -sign;
                }
                None => return Ok(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = checked(
                    a[k][k]
                        .checked_mul(a[i][j])
                        .and_then(|x| a[i][k].checked_mul(a[k][j]).and_then(|y| x.checked_sub(y))),
                )?;
                a[i][j] = v / prev;
            }
        }
        prev = a[k][k];
    }
    Ok(sign * a[n - 1][n - 1])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// LLL-reduces the vectors `basis` (one vector per entry) with parameter
/// `delta`. Returns the unimodular transform `U` with
/// `reduced[k] = Σ_j U[k][j] · original[j]`.
pub fn lll_reduce(basis: &mut [Vec<f64>], delta: f64) -> Mat<i64> {
    let n = basis.len();
    let mut u: Mat<i64> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    if n < 2 {
        return u;
    }
    let gram_schmidt = |b: &[Vec<f64>]| {
        let mut star: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        let mut norms = vec![0.0; n];
        for i in 0..n {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = dot(&b[i], &star[j]) / norms[j];
                for (vk, sk) in v.iter_mut().zip(&star[j]) {
                    *vk -= mu[i][j] * sk;
                }
            }
            norms[i] = dot(&v, &v);
            star.push(v);
        }
        (mu, norms)
    };
    let (mut mu, mut norms) = gram_schmidt(basis);
    let mut k = 1;
    let mut guard = 0usize;
    while k < n && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let qi = q as i64;
                for d in 0..basis[k].len() {
                    basis[k][d] -= q * basis[j][d];
                }
                for d in 0..n {
                    u[k][d] -= qi * u[j][d];
                }
                for l in 0..=j {
                    let m = if l == j { 1.0 } else { mu[j][l] };
                    mu[k][l] -= q * m;
                }
            }
        }
        if norms[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            u.swap(k, k - 1);
            let (m2, n2) = gram_schmidt(basis);
            mu = m2;
            norms = n2;
            k = k.max(2) - 1;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int, Rational};

    #[test]
    fn rational_determinant_and_inverse() {
        let m: Mat<Rational> = vec![
            vec![rat_int(0), rat(1, 2), rat_int(1)],
            vec![rat(1, 2), rat_int(0), rat_int(2)],
            vec![rat_int(1), rat_int(2), rat_int(3)],
        ];
        let d = determinant(&m);
        // 0*(0-4) - 1/2*(3/2-2) + 1*(1-0)
        assert_eq!(d, rat(5, 4));
        let inv = inverse(&m).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity::<Rational>(3));
    }

    #[test]
    fn hermite_form_is_canonical() {
        let h1 = hermite_normal_form(&[vec![2, 4, 6], vec![1, 1, 1]]).unwrap();
        let h2 = hermite_normal_form(&[vec![3, 5, 7], vec![1, 1, 1]]).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1, vec![vec![1, 1, 1], vec![0, 2, 4]]);
    }

    #[test]
    fn kernel_and_saturation() {
        let k = integer_kernel(&[vec![1, 0, -1, 0], vec![0, 1, 0, -1]], 4).unwrap();
        assert_eq!(k, vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]]);
        let s = saturate(&[vec![2, 0, 2, 0], vec![0, 3, 0, 3]], 4).unwrap();
        assert_eq!(s, vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]]);
    }

    #[test]
    fn integer_solve() {
        let rows = vec![vec![2, 0, 1], vec![0, 3, 1]];
        let x = solve_integer(&rows, &[5, 7], 3).unwrap().unwrap();
        assert_eq!(2 * x[0] + x[2], 5);
        assert_eq!(3 * x[1] + x[2], 7);
        assert_eq!(solve_integer(&[vec![2, 4]], &[3], 2).unwrap(), None);
    }

    #[test]
    fn bareiss_determinant() {
        assert_eq!(integer_determinant(&[vec![0, 1], vec![1, 0]]).unwrap(), -1);
        assert_eq!(
            integer_determinant(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 2]]).unwrap(),
            4
        );
    }

    #[test]
    fn lll_finds_short_basis() {
        let mut b = vec![vec![1.0, 0.0], vec![1000.0, 1.0]];
        let u = lll_reduce(&mut b, 0.99);
        assert!(norm(&b[0]) <= 1.0 + 1e-12 && norm(&b[1]) <= 1.0 + 1e-12);
        assert_eq!(integer_determinant(&u).unwrap().abs(), 1);
    }
}

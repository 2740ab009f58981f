//! Lattice-point counts `N_{Q,ξ,Ω}(a,b,T) = #{x ∈ ℤⁿ ∩ TΩ : a < Q_ξ(x) < b}`
//! and the variant `Ñ` with exceptional affine planes removed.
//!
//! The kernel walks the first `n − 1` coordinates of a box containing `TΩ`
//! and solves the quadratic inequality in the last coordinate, so only
//! O(T^{n−1}) slabs are visited. The slab solve is a pruning step: every
//! candidate it yields is decided by the same point predicate the full-box
//! reference count uses.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumerate::for_each_in_ellipsoid;
use crate::error::{check_dim, check_interval, invalid, Error, Result};
use crate::forms::InhomForm;
use crate::linalg::{inverse, Mat};
use crate::regions::{StarRegion, Verdict, BOUNDARY_TOL};
use crate::scalar::{dyadic, Rational, Scalar};
use crate::subspaces::ExceptionalWitness;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub n_total: u64,
    pub n_tilde: u64,
    /// Points removed per exceptional plane; a point on several planes is
    /// attributed to the first one listed.
    pub excluded: Vec<u64>,
    pub a: f64,
    pub b: f64,
    pub t: f64,
    /// Counted points that lie within the floating tolerance of a boundary.
    pub boundary_flagged: u64,
    /// Whether every comparison was decided exactly.
    pub exact: bool,
}

/// `Q_ξ(x) = (dx + p)ᵀ A (dx + p) / (D d²)` with integer `A`, `p`.
struct IntegerEval {
    a: Vec<Vec<i128>>,
    d: i128,
    p: Vec<i128>,
    denom: i128,
}

impl IntegerEval {
    fn new(form: &InhomForm<Rational>) -> Option<Self> {
        let m = form.homogeneous().entries();
        let big_d = m.iter().flatten().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
        let d = form.shift().iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
        let a = m
            .iter()
            .map(|row| {
                row.iter()
                    .map(|q| (q * Rational::from_integer(big_d.clone())).to_integer().to_i128())
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        let p = form
            .shift()
            .iter()
            .map(|q| (q * Rational::from_integer(d.clone())).to_integer().to_i128())
            .collect::<Option<Vec<_>>>()?;
        let d = d.to_i128()?;
        let denom = big_d.to_i128()?.checked_mul(d.checked_mul(d)?)?;
        Some(IntegerEval { a, d, p, denom })
    }

    fn numerator(&self, x: &[i64]) -> Option<i128> {
        let n = x.len();
        let mut z = [0i128; 8];
        for i in 0..n {
            z[i] = self.d.checked_mul(x[i] as i128)?.checked_add(self.p[i])?;
        }
        let mut acc = 0i128;
        for i in 0..n {
            let mut row = 0i128;
            for j in 0..n {
                row = row.checked_add(self.a[i][j].checked_mul(z[j])?)?;
            }
            acc = acc.checked_add(row.checked_mul(z[i])?)?;
        }
        Some(acc)
    }
}

/// The point predicate `x ∈ TΩ and a < Q_ξ(x) < b`.
pub struct PointClassifier<'r> {
    n: usize,
    m: Vec<Vec<f64>>,
    xi: Vec<f64>,
    exact: Option<(InhomForm<Rational>, Option<IntegerEval>)>,
    region: &'r StarRegion,
    a: f64,
    b: f64,
    a_exact: Rational,
    b_exact: Rational,
    t: f64,
}

impl<'r> PointClassifier<'r> {
    pub fn new<S: Scalar>(
        form: &InhomForm<S>,
        region: &'r StarRegion,
        a: f64,
        b: f64,
        t: f64,
    ) -> Result<Self> {
        check_interval(a, b)?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(format!("T must be positive, got {t}")));
        }
        check_dim(form.dim(), region.dim())?;
        let f = form.to_f64();
        let exact = if form.is_exact() {
            let r = form.map(|x| x.as_rational().unwrap());
            let ie = IntegerEval::new(&r);
            Some((r, ie))
        } else {
            None
        };
        Ok(PointClassifier {
            n: form.dim(),
            m: f.homogeneous().entries().clone(),
            xi: f.shift().to_vec(),
            exact,
            region,
            a,
            b,
            a_exact: dyadic(a).unwrap(),
            b_exact: dyadic(b).unwrap(),
            t,
        })
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    fn float_value(&self, x: &[i64]) -> f64 {
        let n = self.n;
        let mut y = [0.0f64; 8];
        for i in 0..n {
            y[i] = x[i] as f64 + self.xi[i];
        }
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = self.m[i][i] * y[i];
            for j in i + 1..n {
                row += 2.0 * self.m[i][j] * y[j];
            }
            acc += row * y[i];
        }
        acc
    }

    fn value_verdict(&self, x: &[i64]) -> Verdict {
        let (a, b) = (self.a, self.b);
        match &self.exact {
            None => {
                let v = self.float_value(x);
                let tol = BOUNDARY_TOL * a.abs().max(b.abs()).max(1.0);
                if v <= a - tol || v >= b + tol {
                    Verdict::Outside
                } else if v >= a + tol && v <= b - tol {
                    Verdict::Inside
                } else {
                    Verdict::Boundary
                }
            }
            Some((rform, ieval)) => {
                let exact_value = || -> Rational {
                    if let Some(ie) = ieval {
                        if let Some(num) = ie.numerator(x) {
                            return Rational::new(BigInt::from(num), BigInt::from(ie.denom));
                        }
                    }
                    rform.evaluate_int(x).expect("dimension checked")
                };
                if let Some(ie) = ieval {
                    if let Some(num) = ie.numerator(x) {
                        let v = num as f64 / ie.denom as f64;
                        let tol = 1e-9 * (1.0 + v.abs() + a.abs() + b.abs());
                        if v > a + tol && v < b - tol {
                            return Verdict::Inside;
                        }
                        if v < a - tol || v > b + tol {
                            return Verdict::Outside;
                        }
                    }
                }
                let v = exact_value();
                if v > self.a_exact && v < self.b_exact {
                    Verdict::Inside
                } else {
                    Verdict::Outside
                }
            }
        }
    }

    pub fn classify(&self, x: &[i64]) -> Verdict {
        let r = self.region.classify_integer(x, self.t, self.exact.is_some());
        if r == Verdict::Outside {
            return r;
        }
        r.and(self.value_verdict(x))
    }
}

/// Integer half-widths of a box containing `TΩ`, including points the
/// floating tolerance might flag.
fn integer_box(region: &StarRegion, t: f64) -> Vec<i64> {
    region
        .half_widths(t)
        .iter()
        .map(|h| (h * (1.0 + 1e-8) + 1e-8).floor() as i64)
        .collect()
}

/// Unimodular change of variables `x = U y` after which the last
/// coordinate has the largest available diagonal coefficient.
struct Plan {
    n: usize,
    u: Vec<Vec<i64>>,
    m: Vec<Vec<f64>>,
    s: Vec<f64>,
    ybox: Vec<i64>,
}

fn make_plan(m: &[Vec<f64>], xi: &[f64], xbox: &[i64]) -> Result<Plan> {
    let n = m.len();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut u: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    let (jd, dmax) = (0..n).map(|j| (j, m[j][j].abs())).fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
    let j = if dmax > 1e-6 * scale {
        jd
    } else {
        let mut best = (0, 1, 0.0);
        for i in 0..n {
            for k in i + 1..n {
                if m[i][k].abs() > best.2 {
                    best = (i, k, m[i][k].abs());
                }
            }
        }
        let (i, k, _) = best;
        // Shear x_i = y_i + y_k makes the k-th diagonal equal to 2M_ik.
        u[i][k] += 1;
        k
    };
    for row in u.iter_mut() {
        row.swap(j, n - 1);
    }
    let uf: Mat<f64> = u.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let mut mp = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                for l in 0..n {
                    acc += uf[k][a] * m[k][l] * uf[l][b];
                }
            }
            mp[a][b] = acc;
        }
    }
    let ur: Mat<Rational> = u.iter().map(|r| r.iter().map(|&v| Rational::from_integer(v.into())).collect()).collect();
    let uinv = inverse(&ur).ok_or_else(|| Error::Invalid("singular change of basis".into()))?;
    let uinv: Vec<Vec<i64>> = uinv
        .iter()
        .map(|r| r.iter().map(|q| q.to_integer().to_i64().unwrap()).collect())
        .collect();
    let s: Vec<f64> = (0..n).map(|a| (0..n).map(|b| uinv[a][b] as f64 * xi[b]).sum()).collect();
    let ybox: Vec<i64> = (0..n).map(|a| (0..n).map(|b| uinv[a][b].abs() * xbox[b]).sum()).collect();
    if mp[n - 1][n - 1] == 0.0 {
        return Err(Error::Degenerate("no usable pivot coordinate".into()));
    }
    Ok(Plan { n, u, m: mp, s, ybox })
}

#[derive(Default, Clone, Copy)]
struct Tally {
    count: u64,
    flagged: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally { count: self.count + o.count, flagged: self.flagged + o.flagged }
    }
}

impl Plan {
    /// Integer ranges of the last coordinate where `a < q < b` may hold.
    fn slab_ranges(&self, y: &[i64], a: f64, b: f64) -> [(i64, i64); 2] {
        let n = self.n;
        let last = n - 1;
        let mut beta = 0.0;
        let mut gamma = 0.0;
        for k in 0..last {
            let zk = y[k] as f64 + self.s[k];
            beta += self.m[last][k] * zk;
            let mut row = self.m[k][k] * zk;
            for l in k + 1..last {
                row += 2.0 * self.m[k][l] * (y[l] as f64 + self.s[l]);
            }
            gamma += row * zk;
        }
        let c = self.m[last][last];
        let (lo_q, hi_q) = if c > 0.0 { (a, b) } else { (-b, -a) };
        let cp = c.abs();
        let sigma = c.signum();
        let u0 = -beta / c;
        let m = sigma * (gamma - beta * beta / c);
        let eps = 1e-9 * (gamma.abs() + beta * beta / cp + a.abs() + b.abs() + 1.0);
        let hi = (hi_q - m + eps) / cp;
        let empty = [(1, 0), (1, 0)];
        if hi < 0.0 {
            return empty;
        }
        let lo = ((lo_q - m - eps) / cp).max(0.0);
        let (r_hi, r_lo) = (hi.sqrt(), lo.sqrt());
        let eta = 1e-9 * (1.0 + u0.abs() + r_hi);
        let sh = self.s[last];
        let lim = self.ybox[last];
        let clip = |l: f64, h: f64| -> (i64, i64) {
            let l = ((l - sh - eta).ceil()).max(-(lim as f64)) as i64;
            let h = ((h - sh + eta).floor()).min(lim as f64) as i64;
            (l, h)
        };
        let left = clip(u0 - r_hi, u0 - r_lo);
        let right = clip(u0 + r_lo, u0 + r_hi);
        let nonempty = |r: (i64, i64)| r.0 <= r.1;
        if nonempty(left) && nonempty(right) && right.0 <= left.1 + 1 {
            [(left.0.min(right.0), left.1.max(right.1)), (1, 0)]
        } else {
            [left, right]
        }
    }

    fn run(&self, classifier: &PointClassifier<'_>, a: f64, b: f64) -> Tally {
        let n = self.n;
        let b0 = self.ybox[0];
        (-b0..=b0)
            .into_par_iter()
            .map(|y0| {
                let mut tally = Tally::default();
                let mut y = vec![0i64; n];
                let mut x = vec![0i64; n];
                y[0] = y0;
                for k in 1..n - 1 {
                    y[k] = -self.ybox[k];
                }
                loop {
                    for (lo, hi) in self.slab_ranges(&y, a, b) {
                        for yl in lo..=hi {
                            y[n - 1] = yl;
                            for (i, xi) in x.iter_mut().enumerate() {
                                *xi = self.u[i].iter().zip(&y).map(|(u, v)| u * v).sum();
                            }
                            match classifier.classify(&x) {
                                Verdict::Inside => tally.count += 1,
                                Verdict::Boundary => {
                                    tally.count += 1;
                                    tally.flagged += 1;
                                }
                                Verdict::Outside => {}
                            }
                        }
                    }
                    // Odometer over the middle coordinates.
                    let mut k = n - 2;
                    loop {
                        if k == 0 {
                            return tally;
                        }
                        if y[k] < self.ybox[k] {
                            y[k] += 1;
                            break;
                        }
                        y[k] = -self.ybox[k];
                        k -= 1;
                    }
                }
            })
            .reduce(Tally::default, |p, q| p + q)
    }
}

fn check_form<S: Scalar>(form: &InhomForm<S>) -> Result<()> {
    let sig = form.homogeneous().signature()?;
    if !sig.is_indefinite() {
        return Err(invalid(format!(
            "counting needs an indefinite form, got signature ({}, {})",
            sig.positive, sig.negative
        )));
    }
    Ok(())
}

pub fn count_n<S: Scalar>(
    form: &InhomForm<S>,
    region: &StarRegion,
    a: f64,
    b: f64,
    t: f64,
) -> Result<CountResult> {
    count_n_tilde(form, region, a, b, t, &[])
}

pub fn count_n_tilde<S: Scalar>(
    form: &InhomForm<S>,
    region: &StarRegion,
    a: f64,
    b: f64,
    t: f64,
    exceptional: &[ExceptionalWitness],
) -> Result<CountResult> {
    check_form(form)?;
    let classifier = PointClassifier::new(form, region, a, b, t)?;
    let f = form.to_f64();
    let xbox = integer_box(region, t);
    let plan = make_plan(f.homogeneous().entries(), f.shift(), &xbox)?;
    let tally = plan.run(&classifier, a, b);
    let excluded = exceptional_hits(&classifier, region, t, exceptional)?;
    let removed: u64 = excluded.iter().sum();
    Ok(CountResult {
        n_total: tally.count,
        n_tilde: tally.count - removed,
        excluded,
        a,
        b,
        t,
        boundary_flagged: tally.flagged,
        exact: classifier.is_exact(),
    })
}

/// Counted points on each affine plane `L − v_ξ`, deduplicated across planes.
fn exceptional_hits(
    classifier: &PointClassifier<'_>,
    region: &StarRegion,
    t: f64,
    exceptional: &[ExceptionalWitness],
) -> Result<Vec<u64>> {
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut out = Vec::with_capacity(exceptional.len());
    let radius = t * region.max_radial() * (1.0 + 1e-8) + 1e-8;
    for w in exceptional {
        let basis = w.subspace.basis();
        let d = basis.len();
        let n = w.integral_shift.len();
        check_dim(classifier.n, n)?;
        let offset: Vec<f64> = w.integral_shift.iter().map(|&v| -(v as f64)).collect();
        let bf: Vec<Vec<f64>> = basis.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
        let gram: Vec<Vec<f64>> =
            bf.iter().map(|u| bf.iter().map(|v| crate::linalg::dot(u, v)).collect()).collect();
        // Centre: least-squares coefficients of the point of the plane closest to 0.
        let rhs: Vec<Vec<f64>> = bf.iter().map(|u| vec![-crate::linalg::dot(u, &offset)]).collect();
        let centre = crate::linalg::solve(&gram, &rhs).ok_or_else(|| invalid("dependent subspace basis"))?;
        let centre: Vec<f64> = centre.iter().map(|r| r[0]).collect();
        let mut hits = 0u64;
        let mut x = vec![0i64; n];
        for_each_in_ellipsoid(&gram, &centre, radius * radius, 1 << 34, |c, _| {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = -w.integral_shift[i] + (0..d).map(|k| c[k] * basis[k][i]).sum::<i64>();
            }
            if classifier.classify(&x).counts() && seen.insert(x.clone()) {
                hits += 1;
            }
        })?;
        out.push(hits);
    }
    Ok(out)
}

/// Reference count over the full box containing `TΩ`, sharing only the
/// point predicate with [`count_n`].
pub fn brute_force_count<S: Scalar>(
    form: &InhomForm<S>,
    region: &StarRegion,
    a: f64,
    b: f64,
    t: f64,
) -> Result<u64> {
    let classifier = PointClassifier::new(form, region, a, b, t)?;
    let h = integer_box(region, t);
    let n = h.len();
    let mut x: Vec<i64> = h.iter().map(|v| -v).collect();
    let mut count = 0u64;
    loop {
        if classifier.classify(&x).counts() {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(count);
            }
            if x[k] < h[k] {
                x[k] += 1;
                break;
            }
            x[k] = -h[k];
            k += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub t: f64,
    pub n: u64,
    pub n_tilde: u64,
    pub ratio_n: f64,
    pub ratio_n_tilde: f64,
}

/// Rows `(T, N, Ñ, N/(λ̂(b−a)T^{n−2}), Ñ/(λ̂(b−a)T^{n−2}))`.
pub fn asymptotic_table<S: Scalar>(
    form: &InhomForm<S>,
    region: &StarRegion,
    a: f64,
    b: f64,
    t_grid: &[f64],
    lambda_hat: f64,
    exceptional: &[ExceptionalWitness],
) -> Result<Vec<AsymptoticRow>> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[0] < w[1])) || t_grid[0] <= 0.0 {
        return Err(invalid("T grid must be positive and strictly increasing"));
    }
    if !(lambda_hat > 0.0) {
        return Err(invalid("lambda_hat must be positive"));
    }
    let n = form.dim() as i32;
    t_grid
        .iter()
        .map(|&t| {
            let r = count_n_tilde(form, region, a, b, t, exceptional)?;
            let norm = lambda_hat * (b - a) * t.powi(n - 2);
            Ok(AsymptoticRow {
                t,
                n: r.n_total,
                n_tilde: r.n_tilde,
                ratio_n: r.n_total as f64 / norm,
                ratio_n_tilde: r.n_tilde as f64 / norm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::SymmetricForm;
    use crate::scalar::{rat, rat_int, Real};

    fn diag(v: &[i64]) -> InhomForm<Rational> {
        InhomForm::homogeneous_only(SymmetricForm::diagonal(v.iter().map(|&x| rat_int(x)).collect()).unwrap())
    }

    #[test]
    fn matches_brute_force_on_small_cone() {
        let q = diag(&[1, 1, -1]);
        let ball = StarRegion::ball(3, 1.0).unwrap();
        let fast = count_n(&q, &ball, -0.5, 0.5, 5.0).unwrap();
        let slow = brute_force_count(&q, &ball, -0.5, 0.5, 5.0).unwrap();
        assert_eq!(fast.n_total, slow);
        assert!(fast.exact);
    }

    #[test]
    fn b4_needs_the_shear() {
        let q = InhomForm::new(
            SymmetricForm::<Rational>::split_22(),
            vec![rat(1, 3), rat(-1, 5), rat_int(0), rat(1, 7)],
        )
        .unwrap();
        let ball = StarRegion::ball(4, 1.0).unwrap();
        for t in [3.0, 6.5] {
            let fast = count_n(&q, &ball, -1.0, 2.0, t).unwrap();
            assert_eq!(fast.n_total, brute_force_count(&q, &ball, -1.0, 2.0, t).unwrap());
        }
    }

    #[test]
    fn tiny_region_counts_origin() {
        let q = diag(&[1, 1, -1]);
        let ball = StarRegion::ball(3, 1.0).unwrap();
        assert_eq!(count_n(&q, &ball, -1.0, 1.0, 0.5).unwrap().n_total, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let q = diag(&[1, 1, -1]);
        let ball = StarRegion::ball(3, 1.0).unwrap();
        assert!(matches!(count_n(&q, &ball, 1.0, 1.0, 5.0), Err(Error::InvalidInterval { .. })));
        let def = diag(&[1, 1, 1]);
        assert!(count_n(&def, &ball, -1.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn float_and_tagged_modes_agree_away_from_boundaries() {
        let s2 = 2f64.sqrt();
        let qf = InhomForm::new(
            SymmetricForm::diagonal(vec![1.0, 1.0, 1.0, -s2]).unwrap(),
            vec![0.3, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let qt = qf.map(|&x| Real::opaque(x));
        let ball = StarRegion::ball(4, 1.0).unwrap();
        let a = count_n(&qf, &ball, -1.0, 1.0, 7.0).unwrap();
        let b = count_n(&qt, &ball, -1.0, 1.0, 7.0).unwrap();
        assert_eq!(a.n_total, b.n_total);
        assert_eq!(a.n_total, brute_force_count(&qf, &ball, -1.0, 1.0, 7.0).unwrap());
    }
}

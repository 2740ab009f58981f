//! Diophantine diagnostics at finite scales: rational approximation quality
//! of vectors, fitted exponents, split-form approximation of (2,2) forms and
//! the combined verdict. Every verdict is evidence at the tested scales, not
//! a proof.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::forms::{InhomForm, SymmetricForm};
use crate::linalg::{inverse, mat_vec};
use crate::scalar::{dyadic, format_rational, rational_to_f64, Rational, Scalar};

pub const EVIDENCE_LABEL: &str = "numerical evidence at tested scales";
pub const FORM_NORM: &str = "max absolute entry of the symmetric matrix";
/// Largest denominator budget for the common-denominator scan.
pub const COMMON_SCAN_CAP: u64 = 10_000_000;

/// How the denominators in `max_i |ξ_i − p_i/q_i|` are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// Independent `q_i` per coordinate, `max_i |q_i| < 1/δ`.
    #[default]
    Independent,
    /// One `q < 1/δ` shared by all coordinates.
    Common,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub delta: f64,
    pub quality: f64,
    /// `log₁₀` of the quality, finite even where `quality` underflows;
    /// `-inf` for an exact hit.
    pub log10_quality: f64,
    /// Minimizing rationals as `"p/q"`, one per coordinate.
    pub witnesses: Vec<String>,
}

fn to_rational<S: Scalar>(x: &S) -> Result<Rational> {
    x.as_rational()
        .or_else(|| dyadic(x.to_f64()))
        .ok_or_else(|| invalid("coordinate is not finite"))
}

pub fn to_rational_vec<S: Scalar>(xi: &[S]) -> Result<Vec<Rational>> {
    xi.iter().map(to_rational).collect()
}

/// `log₁₀ |x|` for a nonzero big integer.
fn log10_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.abs().to_f64().unwrap().log10();
    }
    let shift = bits - 64;
    (x.abs() >> shift).to_f64().unwrap().log10() + shift as f64 * std::f64::consts::LOG10_2
}

pub fn log10_rational(q: &Rational) -> f64 {
    if q.is_zero() {
        f64::NEG_INFINITY
    } else {
        log10_big(q.numer()) - log10_big(q.denom())
    }
}

/// Largest admissible denominator: the largest integer strictly below `1/δ`.
pub fn max_denominator(delta: f64) -> Result<BigInt> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let inv = dyadic(delta).unwrap().recip();
    Ok(inv.ceil().to_integer() - BigInt::one())
}

/// Closest rational to `x` with denominator at most `max_den` (ties go to
/// the convergent).
pub fn limit_denominator(x: &Rational, max_den: &BigInt) -> Rational {
    if x.denom() <= max_den {
        return x.clone();
    }
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (x.numer().clone(), x.denom().clone());
    loop {
        let a = n.div_floor(&d);
        let q2 = &q0 + &a * &q1;
        if &q2 > max_den {
            break;
        }
        let p2 = &p0 + &a * &p1;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let r = &n - &a * &d;
        n = std::mem::replace(&mut d, r);
    }
    let k = (max_den - &q0).div_floor(&q1);
    let semi = Rational::new(&p0 + &k * &p1, &q0 + &k * &q1);
    let conv = Rational::new(p1, q1);
    if (&semi - x).abs() < (&conv - x).abs() {
        semi
    } else {
        conv
    }
}

fn quality_from(delta: f64, best: Vec<Rational>, xi: &[Rational]) -> Quality {
    let worst = best.iter().zip(xi).map(|(b, x)| (b - x).abs()).max().unwrap_or_else(Rational::zero);
    Quality {
        delta,
        quality: rational_to_f64(&worst),
        log10_quality: log10_rational(&worst),
        witnesses: best.iter().map(format_rational).collect(),
    }
}

/// `max_i min |ξ_i − p_i/q_i|` over denominators below `1/δ`, computed
/// exactly; floats are read as their exact binary values.
pub fn dioph_quality<S: Scalar>(xi: &[S], delta: f64, mode: DenominatorMode) -> Result<Quality> {
    if xi.is_empty() {
        return Err(invalid("empty vector"));
    }
    let q_max = max_denominator(delta)?;
    let xi = to_rational_vec(xi)?;
    let best = match mode {
        DenominatorMode::Independent => xi.iter().map(|x| limit_denominator(x, &q_max)).collect(),
        DenominatorMode::Common => common_denominator_best(&xi, &q_max)?,
    };
    Ok(quality_from(delta, best, &xi))
}

fn common_denominator_best(xi: &[Rational], q_max: &BigInt) -> Result<Vec<Rational>> {
    let cap = q_max
        .to_u64()
        .filter(|&q| q <= COMMON_SCAN_CAP)
        .ok_or_else(|| Error::CapExceeded(format!("common-denominator scan limited to q < {COMMON_SCAN_CAP}")))?;
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for q in 1..=cap {
        let qr = Rational::from_integer(q.into());
        let cand: Vec<Rational> = xi.iter().map(|x| (x * &qr).round() / &qr).collect();
        let err = cand.iter().zip(xi).map(|(c, x)| (c - x).abs()).max().unwrap();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            let zero = err.is_zero();
            best = Some((err, cand));
            if zero {
                break;
            }
        }
    }
    Ok(best.unwrap().1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaFit {
    Fit { kappa_hat: f64, c_hat: f64 },
    /// Some grid point is hit exactly by a rational.
    RationalAtScale { delta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophReport {
    pub label: String,
    pub mode: DenominatorMode,
    pub delta_grid: Vec<f64>,
    pub qualities: Vec<Quality>,
    pub fit: KappaFit,
}

impl DiophReport {
    pub fn kappa_hat(&self) -> Option<f64> {
        match self.fit {
            KappaFit::Fit { kappa_hat, .. } => Some(kappa_hat),
            KappaFit::RationalAtScale { .. } => None,
        }
    }
}

/// `n` geometrically spaced values from `start` to `end`.
pub fn geometric_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (start.ln(), end.ln());
    (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn check_geometric(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(invalid(format!("grid needs at least {min_len} points, got {}", grid.len())));
    }
    let logs: Vec<f64> = grid.iter().map(|d| d.ln()).collect();
    let step = logs[1] - logs[0];
    if step == 0.0 || logs.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs()) {
        return Err(invalid("grid must be geometric"));
    }
    Ok(())
}

/// Least squares of `y` on `x`: `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `quality ≈ C δ^κ` by least squares of `log quality` on `log δ`.
pub fn estimate_kappa<S: Scalar + Sync>(
    xi: &[S],
    delta_grid: &[f64],
    mode: DenominatorMode,
) -> Result<DiophReport> {
    check_geometric(delta_grid, 6)?;
    let qualities = delta_grid
        .par_iter()
        .map(|&d| dioph_quality(xi, d, mode))
        .collect::<Result<Vec<_>>>()?;
    let fit = match qualities.iter().find(|q| q.log10_quality == f64::NEG_INFINITY) {
        Some(q) => KappaFit::RationalAtScale { delta: q.delta },
        None => {
            let x: Vec<f64> = delta_grid.iter().map(|d| d.log10()).collect();
            let y: Vec<f64> = qualities.iter().map(|q| q.log10_quality).collect();
            let (slope, intercept) = linear_fit(&x, &y);
            KappaFit::Fit { kappa_hat: slope, c_hat: 10f64.powf(intercept) }
        }
    };
    Ok(DiophReport { label: EVIDENCE_LABEL.into(), mode, delta_grid: delta_grid.to_vec(), qualities, fit })
}

/// Integral quaternary form by its polynomial coefficients in the order
/// `x₁², x₁x₂, x₁x₃, x₁x₄, x₂², x₂x₃, x₂x₄, x₃², x₃x₄, x₄²`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegralForm4 {
    pub coeffs: [i64; 10],
}

const MONOMIALS: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

impl IntegralForm4 {
    pub fn value(&self, v: &[i64; 4]) -> i128 {
        MONOMIALS.iter().zip(&self.coeffs).map(|(&(i, j), &c)| c as i128 * v[i] as i128 * v[j] as i128).sum()
    }

    /// Twice the polar form, an integer.
    pub fn polar2(&self, v: &[i64; 4], w: &[i64; 4]) -> i128 {
        MONOMIALS
            .iter()
            .zip(&self.coeffs)
            .map(|(&(i, j), &c)| {
                let c = c as i128;
                if i == j {
                    2 * c * v[i] as i128 * w[i] as i128
                } else {
                    c * (v[i] as i128 * w[j] as i128 + v[j] as i128 * w[i] as i128)
                }
            })
            .sum()
    }

    /// Symmetric matrix with entries `c_ii` and `c_ij/2`.
    pub fn matrix(&self) -> Vec<Vec<Rational>> {
        let mut m = vec![vec![Rational::zero(); 4]; 4];
        for (&(i, j), &c) in MONOMIALS.iter().zip(&self.coeffs) {
            if i == j {
                m[i][i] = Rational::from_integer(c.into());
            } else {
                let h = Rational::new(c.into(), 2.into());
                m[i][j] = h.clone();
                m[j][i] = h;
            }
        }
        m
    }

    /// `det(2M)`, an integer since `2M` has integer entries.
    fn det_2m(&self) -> i128 {
        let mut m = [[0i128; 4]; 4];
        for (&(i, j), &c) in MONOMIALS.iter().zip(&self.coeffs) {
            if i == j {
                m[i][i] = 2 * c as i128;
            } else {
                m[i][j] = c as i128;
                m[j][i] = c as i128;
            }
        }
        let minor = |r: usize, c: usize| {
            let rows: Vec<usize> = (0..4).filter(|&x| x != r).collect();
            let cols: Vec<usize> = (0..4).filter(|&x| x != c).collect();
            let e = |a: usize, b: usize| m[rows[a]][cols[b]];
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        };
        (0..4).map(|c| if c % 2 == 0 { m[0][c] * minor(0, c) } else { -m[0][c] * minor(0, c) }).sum()
    }
}

/// `true` when `x ≥ 0` is a perfect square.
fn is_square(x: i128) -> bool {
    if x < 0 {
        return false;
    }
    let r = (x as f64).sqrt() as i128;
    (r.saturating_sub(2)..=r + 2).any(|s| s >= 0 && s * s == x)
}

/// Primitive null vectors with entries in `[-bound, bound]`, up to sign,
/// found by solving for the last coordinate.
fn null_vectors(f: &IntegralForm4, bound: i64) -> Vec<[i64; 4]> {
    let mut out = Vec::new();
    let c33 = f.coeffs[9] as i128;
    for a in -bound..=bound {
        for b in -bound..=bound {
            for c in -bound..=bound {
                let base = [a, b, c, 0];
                let lin = f.coeffs[3] as i128 * a as i128 + f.coeffs[6] as i128 * b as i128 + f.coeffs[8] as i128 * c as i128;
                let cst = f.value(&base);
                let mut cands: Vec<i64> = Vec::new();
                if c33 == 0 {
                    if lin != 0 && cst % lin == 0 {
                        cands.push((-cst / lin) as i64);
                    } else if lin == 0 && cst == 0 {
                        cands.extend(-bound..=bound);
                    }
                } else {
                    let disc = lin * lin - 4 * c33 * cst;
                    if is_square(disc) {
                        let s = (disc as f64).sqrt().round() as i128;
                        for num in [-lin + s, -lin - s] {
                            if num % (2 * c33) == 0 {
                                cands.push((num / (2 * c33)) as i64);
                            }
                        }
                    }
                }
                for d in cands {
                    if d.abs() > bound {
                        continue;
                    }
                    let v = [a, b, c, d];
                    if v == [0; 4] || !crate::linalg::is_primitive(&v) || f.value(&v) != 0 {
                        continue;
                    }
                    let first = v.iter().find(|&&x| x != 0).unwrap();
                    if *first > 0 {
                        out.push(v);
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// An integral 2-plane on which `f` vanishes, with basis entries bounded by
/// `bound`; a one-sided certificate of splitness over ℚ.
pub fn split_certificate(f: &IntegralForm4, bound: i64) -> Option<[[i64; 4]; 2]> {
    let nulls = null_vectors(f, bound);
    for (i, v) in nulls.iter().enumerate() {
        for w in &nulls[i + 1..] {
            if f.polar2(v, w) == 0 {
                return Some([*v, *w]);
            }
        }
    }
    None
}

/// Exact re-verification: `f(a v₁ + b v₂) = 0` on the `3×3` grid of
/// `(a, b) ∈ {−1, 0, 1}²`.
pub fn verify_certificate(f: &IntegralForm4, basis: &[[i64; 4]; 2]) -> bool {
    !crate::subspaces::wedge2(&basis[0], &basis[1]).dependent
        && (-1..=1).all(|a: i64| {
            (-1..=1).all(|b: i64| {
                let v: [i64; 4] = std::array::from_fn(|k| a * basis[0][k] + b * basis[1][k]);
                f.value(&v) == 0
            })
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwasCandidate {
    pub form: IntegralForm4,
    pub null_basis: [[i64; 4]; 2],
    /// `‖Q − Q′/r‖` in the declared norm.
    pub norm: f64,
    pub log10_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwasEntry {
    pub r: u64,
    pub best: Option<EwasCandidate>,
    pub no_candidate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwasReport {
    pub label: String,
    pub norm: String,
    pub coeff_bound: i64,
    pub certificate_bound: i64,
    pub entries: Vec<EwasEntry>,
    /// Fitted `N` in `‖Q − Q′/r‖ ≈ r^{−N}` over entries with nonzero norm.
    pub exponent_hat: Option<f64>,
    /// Every entry was matched exactly (`Q` is itself `Q′/r`).
    pub exact_split: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwasConfig {
    pub r_grid: Vec<u64>,
    pub coeff_bound: i64,
    pub certificate_bound: i64,
}

impl Default for EwasConfig {
    fn default() -> Self {
        EwasConfig { r_grid: vec![10, 100, 1_000, 10_000, 100_000, 1_000_000], coeff_bound: 10_000_000, certificate_bound: 3 }
    }
}

fn form_distance(q: &[Vec<Rational>], f: &IntegralForm4, r: u64) -> Rational {
    let m = f.matrix();
    let rr = Rational::from_integer(r.into());
    let mut worst = Rational::zero();
    for i in 0..4 {
        for j in 0..4 {
            let d = (&q[i][j] - &m[i][j] / &rr).abs();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Searches split integral `Q′` near `r·Q`: candidates are the rounded
/// coefficients of `r·Q` moved by `{−1, 0, 1}` in each of the ten
/// coefficients, filtered by `|c| ≤ coeff_bound`, a square-determinant test
/// and the bounded null-plane certificate; the closest certified one wins.
pub fn ewas_search<S: Scalar>(q: &SymmetricForm<S>, config: &EwasConfig) -> Result<EwasReport> {
    if q.dim() != 4 {
        return Err(invalid("EWAS search needs a form in 4 variables"));
    }
    let sig = q.signature()?;
    if (sig.positive, sig.negative) != (2, 2) {
        return Err(invalid("EWAS search needs signature (2,2)"));
    }
    if config.r_grid.is_empty() || config.r_grid.iter().any(|&r| r < 2) {
        return Err(invalid("r grid must be nonempty with every r ≥ 2"));
    }
    let qm: Vec<Vec<Rational>> =
        q.entries().iter().map(|row| row.iter().map(to_rational).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let entries = config
        .r_grid
        .par_iter()
        .map(|&r| ewas_at(&qm, r, config))
        .collect::<Result<Vec<_>>>()?;
    let exact_split = entries.iter().all(|e| e.best.as_ref().is_some_and(|b| b.log10_norm == f64::NEG_INFINITY));
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.best.as_ref().filter(|b| b.log10_norm.is_finite()).map(|b| ((e.r as f64).log10(), b.log10_norm)))
        .collect();
    let exponent_hat = (pts.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        -linear_fit(&x, &y).0
    });
    Ok(EwasReport {
        label: EVIDENCE_LABEL.into(),
        norm: FORM_NORM.into(),
        coeff_bound: config.coeff_bound,
        certificate_bound: config.certificate_bound,
        entries,
        exponent_hat,
        exact_split,
    })
}

fn ewas_at(qm: &[Vec<Rational>], r: u64, config: &EwasConfig) -> Result<EwasEntry> {
    let rr = Rational::from_integer(r.into());
    let two = Rational::from_integer(2.into());
    let mut centre = [0i64; 10];
    for (k, &(i, j)) in MONOMIALS.iter().enumerate() {
        let c = if i == j { &qm[i][i] * &rr } else { &qm[i][j] * &two * &rr };
        centre[k] = c.round().to_integer().to_i64().ok_or(Error::Overflow("EWAS coefficient"))?;
    }
    let mut cands: Vec<(Rational, IntegralForm4)> = Vec::new();
    for code in 0..59_049u32 {
        let mut c = centre;
        let mut k = code;
        for x in c.iter_mut() {
            *x += (k % 3) as i64 - 1;
            k /= 3;
        }
        if c.iter().any(|x| x.abs() > config.coeff_bound) {
            continue;
        }
        let f = IntegralForm4 { coeffs: c };
        let det = f.det_2m();
        if det <= 0 || !is_square(det) {
            continue;
        }
        cands.push((form_distance(qm, &f, r), f));
    }
    cands.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.coeffs.cmp(&b.1.coeffs)));
    for (dist, f) in cands {
        if let Some(basis) = split_certificate(&f, config.certificate_bound) {
            debug_assert!(verify_certificate(&f, &basis));
            return Ok(EwasEntry {
                r,
                best: Some(EwasCandidate {
                    norm: rational_to_f64(&dist),
                    log10_norm: log10_rational(&dist),
                    form: f,
                    null_basis: basis,
                }),
                no_candidate: false,
            });
        }
    }
    Ok(EwasEntry { r, best: None, no_candidate: true })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormVerdict {
    DiophantineEvidence,
    EwasEvidenceAndShiftNonDioph,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub ewas: EwasConfig,
    pub delta_grid: Vec<f64>,
    pub mode: DenominatorMode,
    /// Fitted approximation exponents at least this large count as EWAS evidence.
    pub ewas_exponent: f64,
    /// Fitted `κ̂` above this counts as evidence that `ξ` is not Diophantine.
    pub kappa_max: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            ewas: EwasConfig::default(),
            delta_grid: geometric_grid(1e-1, 1e-6, 6),
            mode: DenominatorMode::Independent,
            ewas_exponent: 3.0,
            kappa_max: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    pub verdict: FormVerdict,
    /// `1` when `Q` shows no EWAS evidence, `2` when `ξ` shows Diophantine
    /// evidence; absent otherwise.
    pub disjunct: Option<u8>,
    pub ewas: EwasReport,
    pub shift: Option<DiophReport>,
}

pub fn classify_form<S: Scalar + Sync>(form: &InhomForm<S>, config: &ClassifyConfig) -> Result<Classification> {
    let ewas = ewas_search(form.homogeneous(), &config.ewas)?;
    let ewas_evidence = if ewas.exact_split {
        Some(true)
    } else {
        ewas.exponent_hat.map(|e| e >= config.ewas_exponent)
    };
    let (verdict, disjunct, shift) = match ewas_evidence {
        None => (FormVerdict::Inconclusive, None, None),
        Some(false) => (FormVerdict::DiophantineEvidence, Some(1), None),
        Some(true) => {
            let report = estimate_kappa(form.shift(), &config.delta_grid, config.mode)?;
            let diophantine = report.kappa_hat().is_some_and(|k| k <= config.kappa_max);
            if diophantine {
                (FormVerdict::DiophantineEvidence, Some(2), Some(report))
            } else {
                (FormVerdict::EwasEvidenceAndShiftNonDioph, None, Some(report))
            }
        }
    };
    Ok(Classification { label: EVIDENCE_LABEL.into(), verdict, disjunct, ewas, shift })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub original: DiophReport,
    pub mapped: DiophReport,
    /// `(n + 1)κ̂(ξ) + 1`, the exponent the mapped vector may not exceed.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
}

/// Compares fitted exponents of `ξ` and `Aξ` for an invertible rational `A`.
pub fn rational_map_preservation<S: Scalar + Sync>(
    xi: &[S],
    a: &[Vec<Rational>],
    delta_grid: &[f64],
    mode: DenominatorMode,
) -> Result<PreservationReport> {
    let n = xi.len();
    check_dim(n, a.len())?;
    for row in a {
        check_dim(n, row.len())?;
    }
    if inverse(a).is_none() {
        return Err(Error::Degenerate("the map A is singular".into()));
    }
    let x = to_rational_vec(xi)?;
    let ax = mat_vec(a, &x);
    let original = estimate_kappa(&x, delta_grid, mode)?;
    let mapped = estimate_kappa(&ax, delta_grid, mode)?;
    let bound = original.kappa_hat().map(|k| (n as f64 + 1.0) * k + 1.0);
    let holds = match (bound, mapped.kappa_hat()) {
        (Some(b), Some(k)) => Some(k <= b),
        _ => None,
    };
    Ok(PreservationReport { original, mapped, bound, holds })
}

/// `Σ_{k=1}^{terms} 10^{−k!}`, exactly.
pub fn liouville(terms: u32) -> Rational {
    let mut s = Rational::zero();
    let mut fact = 1usize;
    for k in 1..=terms as usize {
        fact *= k;
        s += Rational::new(BigInt::one(), num_traits::pow(BigInt::from(10), fact));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int, Real};
    use rand::{Rng, SeedableRng};

    /// Minimum of `|x − p/q|` over `1 ≤ q ≤ q_max` by scanning every `q`.
    fn direct_scan(x: &Rational, q_max: u64) -> Rational {
        let mut best: Option<Rational> = None;
        for q in 1..=q_max {
            let qr = Rational::from_integer(q.into());
            let f = (x * &qr).floor();
            for p in [f.clone(), f + Rational::one()] {
                let e = (x - p / &qr).abs();
                if best.as_ref().is_none_or(|b| e < *b) {
                    best = Some(e);
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn matches_direct_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let xr = dyadic(x).unwrap();
            for delta in [0.3, 0.01, 1.0 / 777.0, 1e-3] {
                let q = dioph_quality(&[x], delta, DenominatorMode::Independent).unwrap();
                let qmax = max_denominator(delta).unwrap().to_u64().unwrap();
                assert_eq!(q.quality, rational_to_f64(&direct_scan(&xr, qmax)));
            }
        }
    }

    #[test]
    fn strict_denominator_bound() {
        // 0.125 is exact, so 1/δ = 8 and q = 8 is excluded while q = 7 is allowed.
        let q = dioph_quality(&[rat(3, 8)], 0.125, DenominatorMode::Independent).unwrap();
        assert!(q.quality > 0.0);
        let q = dioph_quality(&[rat(3, 7)], 0.125, DenominatorMode::Independent).unwrap();
        assert_eq!(q.quality, 0.0);
        assert_eq!(q.witnesses, vec!["3/7".to_string()]);
    }

    #[test]
    fn integer_shift_invariance_and_rational_hits() {
        let x = [Real::generator("sqrt2", 2f64.sqrt()), Real::rational(1, 3)];
        let y = [x[0].clone() + Real::integer(5), x[1].clone() - Real::integer(2)];
        let a = dioph_quality(&x, 1e-3, DenominatorMode::Independent).unwrap();
        let b = dioph_quality(&y, 1e-3, DenominatorMode::Independent).unwrap();
        assert!((a.quality - b.quality).abs() <= 1e-15);
        let r = estimate_kappa(&[rat_int(2), rat_int(-1)], &geometric_grid(0.5, 1e-4, 6), DenominatorMode::Independent).unwrap();
        assert!(matches!(r.fit, KappaFit::RationalAtScale { .. }));
        assert!(dioph_quality(&[rat(1, 2)], 1.5, DenominatorMode::Independent).is_err());
    }

    #[test]
    fn common_mode_is_no_better_than_independent() {
        let x = [0.123456789f64, 0.987654321];
        for d in [0.1, 0.01, 0.001] {
            let ind = dioph_quality(&x, d, DenominatorMode::Independent).unwrap();
            let com = dioph_quality(&x, d, DenominatorMode::Common).unwrap();
            assert!(com.quality >= ind.quality);
        }
    }

    #[test]
    fn liouville_collapses() {
        let l = liouville(4);
        let r = estimate_kappa(&[l], &geometric_grid(1e-3, 1e-8, 6), DenominatorMode::Independent).unwrap();
        assert!(r.qualities.last().unwrap().log10_quality < -23.0);
        assert!(r.kappa_hat().unwrap() > 3.0);
    }

    #[test]
    fn certificate_for_b4_multiple() {
        let f = IntegralForm4 { coeffs: [0, 0, 0, 7, 0, -7, 0, 0, 0, 0] };
        let c = split_certificate(&f, 1).unwrap();
        assert!(verify_certificate(&f, &c));
        let aniso = IntegralForm4 { coeffs: [1, 0, 0, 0, 1, 0, 0, 1, 0, -7] };
        assert!(split_certificate(&aniso, 3).is_none());
    }

    #[test]
    fn perturbed_b4_is_approximated_by_multiples() {
        let eps = std::f64::consts::PI * 1e-6;
        let q = SymmetricForm::new(vec![
            vec![eps, 0.0, 0.0, 0.5],
            vec![0.0, 0.0, -0.5, 0.0],
            vec![0.0, -0.5, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let cfg = EwasConfig { r_grid: vec![10, 1000], coeff_bound: 10_000, certificate_bound: 2 };
        let rep = ewas_search(&q, &cfg).unwrap();
        for e in &rep.entries {
            let b = e.best.as_ref().unwrap();
            assert!(b.norm <= eps * (1.0 + 1e-12), "{b:?}");
            assert!(verify_certificate(&b.form, &b.null_basis));
        }
    }

    #[test]
    fn split_rational_form_is_exact() {
        let rep = ewas_search(&SymmetricForm::<Rational>::split_22(), &EwasConfig { r_grid: vec![2, 6], coeff_bound: 100, certificate_bound: 1 }).unwrap();
        assert!(rep.exact_split);
        assert!(ewas_search(&SymmetricForm::<Rational>::split_22(), &EwasConfig { r_grid: vec![1], ..Default::default() }).is_err());
    }

    #[test]
    fn identity_map_preserves_reports() {
        let x = [Real::generator("sqrt2", 2f64.sqrt()) - Real::integer(1), Real::generator("sqrt3", 3f64.sqrt()) - Real::integer(1)];
        let id = vec![vec![rat_int(1), rat_int(0)], vec![rat_int(0), rat_int(1)]];
        let grid = geometric_grid(1e-1, 1e-5, 6);
        let r = rational_map_preservation(&x, &id, &grid, DenominatorMode::Independent).unwrap();
        assert_eq!(r.original, r.mapped);
        assert_eq!(r.holds, Some(true));
        let d = vec![vec![rat_int(2), rat_int(0)], vec![rat_int(0), rat_int(1)]];
        let r = rational_map_preservation(&x, &d, &grid, DenominatorMode::Independent).unwrap();
        assert_eq!(r.holds, Some(true));
        let sing = vec![vec![rat_int(1), rat_int(1)], vec![rat_int(1), rat_int(1)]];
        assert!(rational_map_preservation(&x, &sing, &grid, DenominatorMode::Independent).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn quality_is_monotone(x in -10.0f64..10.0, a in 1e-4f64..0.5, b in 1e-4f64..0.5) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let q_lo = dioph_quality(&[x], lo, DenominatorMode::Independent).unwrap();
                let q_hi = dioph_quality(&[x], hi, DenominatorMode::Independent).unwrap();
                prop_assert!(q_lo.quality <= q_hi.quality);
                for w in &q_lo.witnesses {
                    let r = crate::scalar::parse_rational(w).unwrap();
                    prop_assert!(Rational::from_integer(r.denom().clone()) < dyadic(lo).unwrap().recip());
                }
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn ewas_norm_nonincreasing_in_bound(seed in 0u64..1000) {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let eps: f64 = rand::Rng::gen_range(&mut rng, -1e-3..1e-3);
                let q = SymmetricForm::new(vec![
                    vec![eps, 0.0, 0.0, 0.5],
                    vec![0.0, 0.0, -0.5, 0.0],
                    vec![0.0, -0.5, 0.0, 0.0],
                    vec![0.5, 0.0, 0.0, eps],
                ]).unwrap();
                let small = ewas_search(&q, &EwasConfig { r_grid: vec![20], coeff_bound: 10, certificate_bound: 1 }).unwrap();
                let large = ewas_search(&q, &EwasConfig { r_grid: vec![20], coeff_bound: 30, certificate_bound: 1 }).unwrap();
                let n = |r: &EwasReport| r.entries[0].best.as_ref().map_or(f64::INFINITY, |b| b.norm);
                prop_assert!(n(&large) <= n(&small));
            }
        }
    }
}

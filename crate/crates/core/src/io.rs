//! JSON form format:
//! `{"dim": n, "entries": [[...]], "shift": [...], "mode": "rational" | "float" | "tagged"}`.
//!
//! Rational entries are `"p/q"` strings (plain integers and decimals are
//! read exactly). Tagged entries additionally accept rational combinations
//! of square roots such as `"1/2 - 3*sqrt(2)"`; every `sqrt(k)` is reduced
//! to a squarefree radicand and named `sqrt(k)`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::{InhomForm, SymmetricForm};
use crate::scalar::{dyadic, format_rational, parse_rational, Generator, Rational, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormMode {
    Rational,
    Float,
    Tagged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub dim: usize,
    pub entries: Vec<Vec<Entry>>,
    #[serde(default)]
    pub shift: Option<Vec<Entry>>,
    pub mode: FormMode,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedForm {
    Rational(InhomForm<Rational>),
    Float(InhomForm<f64>),
    Tagged(InhomForm<Real>),
}

impl LoadedForm {
    pub fn dim(&self) -> usize {
        match self {
            LoadedForm::Rational(f) => f.dim(),
            LoadedForm::Float(f) => f.dim(),
            LoadedForm::Tagged(f) => f.dim(),
        }
    }

    pub fn to_f64(&self) -> InhomForm<f64> {
        match self {
            LoadedForm::Rational(f) => f.to_f64(),
            LoadedForm::Float(f) => f.clone(),
            LoadedForm::Tagged(f) => f.to_f64(),
        }
    }

    /// Every mode viewed as tagged reals; floats become opaque.
    pub fn to_tagged(&self) -> InhomForm<Real> {
        match self {
            LoadedForm::Rational(f) => f.map(|q| Real::Exact(q.clone())),
            LoadedForm::Float(f) => f.map(|x| Real::Opaque(*x)),
            LoadedForm::Tagged(f) => f.clone(),
        }
    }
}

fn squarefree_split(k: u64) -> (u64, u64) {
    // k = outer² · inner with inner squarefree.
    let (mut outer, mut inner, mut rest) = (1u64, 1u64, k);
    let mut p = 2u64;
    while p * p <= rest {
        let mut e = 0;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        outer *= p.pow(e / 2);
        if e % 2 == 1 {
            inner *= p;
        }
        p += 1;
    }
    (outer, inner * rest)
}

fn sqrt_generator(k: u64) -> (Rational, Option<Generator>) {
    let (outer, inner) = squarefree_split(k);
    let c = Rational::from_integer(outer.into());
    if inner == 1 {
        (c, None)
    } else {
        (c, Some(Generator::new(&format!("sqrt({inner})"), (inner as f64).sqrt())))
    }
}

fn parse_term(term: &str) -> Option<(Rational, Option<Generator>)> {
    let (neg, body) = match term.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, term.strip_prefix('+').unwrap_or(term)),
    };
    let sign = |q: Rational| if neg { -q } else { q };
    let Some(start) = body.find("sqrt(") else {
        return parse_rational(body).map(|q| (sign(q), None));
    };
    let coeff = match &body[..start] {
        "" => Rational::one(),
        c => parse_rational(c.strip_suffix('*')?)?,
    };
    let radicand: u64 = body[start + 5..].strip_suffix(')')?.parse().ok()?;
    let (outer, g) = sqrt_generator(radicand);
    Some((sign(coeff * outer), g))
}

/// Parses a rational combination of square roots.
pub fn parse_tagged(s: &str) -> Result<Real> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut normalized = compact.clone();
    loop {
        let next = normalized.replace("+-", "-").replace("-+", "-").replace("--", "+").replace("++", "+");
        if next == normalized {
            break;
        }
        normalized = next;
    }
    let bytes: Vec<char> = normalized.chars().collect();
    let mut terms = Vec::new();
    let mut current = String::new();
    for (i, &c) in bytes.iter().enumerate() {
        let split = (c == '+' || c == '-') && i > 0 && !matches!(bytes[i - 1], '*' | '/' | '(' | 'e' | 'E');
        if split {
            terms.push(std::mem::take(&mut current));
        }
        current.push(c);
    }
    terms.push(current);
    let bad = || invalid(format!("cannot parse tagged value {s:?}"));
    if compact.is_empty() {
        return Err(bad());
    }
    let mut constant = Rational::zero();
    let mut coeffs: BTreeMap<Generator, Rational> = BTreeMap::new();
    for t in terms {
        let (c, g) = parse_term(&t).ok_or_else(bad)?;
        match g {
            None => constant += c,
            Some(g) => *coeffs.entry(g).or_insert_with(Rational::zero) += c,
        }
    }
    let mut value = Real::Exact(constant);
    for (g, c) in coeffs {
        if !c.is_zero() {
            value = value + Real::Exact(c) * Real::generator(g.name(), g.value());
        }
    }
    Ok(value)
}

fn entry_rational(e: &Entry) -> Result<Rational> {
    match e {
        Entry::Number(x) => dyadic(*x).ok_or_else(|| invalid(format!("non-finite entry {x}"))),
        Entry::Text(s) => parse_rational(s).ok_or_else(|| invalid(format!("cannot parse rational {s:?}"))),
    }
}

fn entry_f64(e: &Entry) -> Result<f64> {
    match e {
        Entry::Number(x) => Ok(*x),
        Entry::Text(s) => parse_tagged(s).map(|r| crate::scalar::Scalar::to_f64(&r)),
    }
}

fn entry_tagged(e: &Entry) -> Result<Real> {
    match e {
        Entry::Number(x) => Ok(match dyadic(*x) {
            Some(q) if x.fract() == 0.0 => Real::Exact(q),
            _ => Real::Opaque(*x),
        }),
        Entry::Text(s) => parse_tagged(s),
    }
}

impl FormSpec {
    pub fn load(&self) -> Result<LoadedForm> {
        let n = self.dim;
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: self.entries.len() });
        }
        if let Some(s) = &self.shift {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
        }
        fn build<S: crate::scalar::Scalar>(
            spec: &FormSpec,
            f: impl Fn(&Entry) -> Result<S>,
        ) -> Result<InhomForm<S>> {
            let m = spec.entries.iter().map(|r| r.iter().map(&f).collect::<Result<Vec<S>>>()).collect::<Result<_>>()?;
            let q = SymmetricForm::new(m)?;
            match &spec.shift {
                Some(s) => InhomForm::new(q, s.iter().map(&f).collect::<Result<_>>()?),
                None => Ok(InhomForm::homogeneous_only(q)),
            }
        }
        Ok(match self.mode {
            FormMode::Rational => LoadedForm::Rational(build(self, entry_rational)?),
            FormMode::Float => LoadedForm::Float(build(self, entry_f64)?),
            FormMode::Tagged => LoadedForm::Tagged(build(self, entry_tagged)?),
        })
    }

    pub fn from_rational(form: &InhomForm<Rational>) -> Self {
        let text = |q: &Rational| Entry::Text(format_rational(q));
        FormSpec {
            dim: form.dim(),
            entries: form.homogeneous().entries().iter().map(|r| r.iter().map(text).collect()).collect(),
            shift: Some(form.shift().iter().map(text).collect()),
            mode: FormMode::Rational,
        }
    }

    pub fn from_float(form: &InhomForm<f64>) -> Self {
        FormSpec {
            dim: form.dim(),
            entries: form.homogeneous().entries().iter().map(|r| r.iter().map(|x| Entry::Number(*x)).collect()).collect(),
            shift: Some(form.shift().iter().map(|x| Entry::Number(*x)).collect()),
            mode: FormMode::Float,
        }
    }

    pub fn from_tagged(form: &InhomForm<Real>) -> Self {
        let entry = |r: &Real| match r {
            Real::Opaque(x) => Entry::Number(*x),
            other => Entry::Text(other.to_string()),
        };
        FormSpec {
            dim: form.dim(),
            entries: form.homogeneous().entries().iter().map(|r| r.iter().map(entry).collect()).collect(),
            shift: Some(form.shift().iter().map(entry).collect()),
            mode: FormMode::Tagged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Scalar};

    #[test]
    fn tagged_parsing() {
        assert_eq!(parse_tagged("1/2").unwrap(), Real::rational(1, 2));
        let r = parse_tagged("sqrt(2) - 1").unwrap();
        assert!((r.to_f64() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(r.exact_integer().unwrap().is_none());
        assert_eq!(parse_tagged("sqrt(4)").unwrap(), Real::integer(2));
        assert_eq!(parse_tagged("sqrt(8)").unwrap(), parse_tagged("2*sqrt(2)").unwrap());
        assert_eq!(parse_tagged("sqrt(2) - sqrt(2) + 3/4").unwrap(), Real::rational(3, 4));
        let r = parse_tagged("-3/2*sqrt(3) + 0.5").unwrap();
        assert_eq!(parse_tagged(&r.to_string()).unwrap(), r);
        assert!(parse_tagged("sqrt(x)").is_err());
        assert!(parse_tagged("").is_err());
    }

    #[test]
    fn rational_round_trip() {
        let json = r#"{"dim": 3, "entries": [["1","1/2","0"],["1/2","-2","0"],["0","0",3]], "shift": ["1/3", 0, "0.25"], "mode": "rational"}"#;
        let spec: FormSpec = serde_json::from_str(json).unwrap();
        let LoadedForm::Rational(f) = spec.load().unwrap() else { panic!() };
        assert_eq!(f.shift()[0], rat(1, 3));
        assert_eq!(f.shift()[2], rat(1, 4));
        let back = FormSpec::from_rational(&f);
        let again: FormSpec = serde_json::from_str(&serde_json::to_string(&back).unwrap()).unwrap();
        assert_eq!(again.load().unwrap(), LoadedForm::Rational(f));
    }

    #[test]
    fn float_and_tagged_round_trip() {
        let json = r#"{"dim": 3, "entries": [[1, 0, 0],[0, 1, 0],[0, 0, "-sqrt(2)"]], "shift": [0.1, 0, 0], "mode": "float"}"#;
        let spec: FormSpec = serde_json::from_str(json).unwrap();
        let LoadedForm::Float(f) = spec.load().unwrap() else { panic!() };
        assert_eq!(f.homogeneous().entries()[2][2], -2f64.sqrt());
        let back: FormSpec = serde_json::from_str(&serde_json::to_string(&FormSpec::from_float(&f)).unwrap()).unwrap();
        assert_eq!(back.load().unwrap(), LoadedForm::Float(f));

        let json = r#"{"dim": 3, "entries": [[1, 0, 0],[0, 1, 0],[0, 0, "-sqrt(2)"]], "shift": ["3/10", 0, 0.3], "mode": "tagged"}"#;
        let LoadedForm::Tagged(t) = serde_json::from_str::<FormSpec>(json).unwrap().load().unwrap() else { panic!() };
        assert!(matches!(t.shift()[2], Real::Opaque(_)));
        let spec = FormSpec::from_tagged(&t);
        let back = serde_json::from_str::<FormSpec>(&serde_json::to_string(&spec).unwrap()).unwrap().load().unwrap();
        assert_eq!(back.to_f64(), t.to_f64());
    }

    #[test]
    fn schema_is_strict() {
        let json = r#"{"dim": 3, "entries": [[1,0,0],[0,1,0],[0,0,-1]], "mode": "float", "extra": 1}"#;
        let err = serde_json::from_str::<FormSpec>(json).unwrap_err().to_string();
        assert!(err.contains("extra"));
        let json = r#"{"dim": 3, "entries": [[1,0,0],[0,1,0]], "mode": "float"}"#;
        assert!(serde_json::from_str::<FormSpec>(json).unwrap().load().is_err());
        let json = r#"{"dim": 3, "entries": [[1,0,0],[0,1,2],[0,0,-1]], "mode": "float"}"#;
        assert!(serde_json::from_str::<FormSpec>(json).unwrap().load().is_err());
    }
}

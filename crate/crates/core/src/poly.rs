//! Canonical sparse multivariate polynomials over `F_p`.
//!
//! Terms are kept sorted by a graded order (total degree first, then the
//! exponent of `x0`, `x1`, ... descending), with zero coefficients removed.
//! Structural equality is therefore mathematical equality. Polynomials are
//! formal: `x^p` is not reduced to `x`.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::error::{config_err, Error, Result};
use crate::field::{FieldElement, Modulus};

/// Exponent vector of length `n_vars`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(SmallVec<[u16; 4]>);

impl Monomial {
    pub fn one(n_vars: usize) -> Self {
        Monomial(SmallVec::from_elem(0, n_vars))
    }

    pub fn variable(n_vars: usize, index: usize) -> Self {
        let mut m = Self::one(n_vars);
        m.0[index] = 1;
        m
    }

    pub fn from_exponents(exponents: &[u16]) -> Self {
        Monomial(SmallVec::from_slice(exponents))
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    fn product(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                .collect(),
        )
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldPolynomial {
    n_vars: usize,
    modulus: Modulus,
    terms: Vec<(Monomial, u32)>,
}

impl FieldPolynomial {
    pub fn zero(n_vars: usize, modulus: Modulus) -> Self {
        FieldPolynomial {
            n_vars,
            modulus,
            terms: Vec::new(),
        }
    }

    pub fn constant(n_vars: usize, modulus: Modulus, c: u64) -> Self {
        let c = modulus.reduce(c);
        let mut f = Self::zero(n_vars, modulus);
        if c != 0 {
            f.terms.push((Monomial::one(n_vars), c));
        }
        f
    }

    pub fn one(n_vars: usize, modulus: Modulus) -> Self {
        Self::constant(n_vars, modulus, 1)
    }

    /// The variable `x_index`.
    pub fn variable(n_vars: usize, modulus: Modulus, index: usize) -> Result<Self> {
        if index >= n_vars {
            return Err(Error::Domain(format!(
                "variable x{index} outside {n_vars} variables"
            )));
        }
        Ok(FieldPolynomial {
            n_vars,
            modulus,
            terms: vec![(Monomial::variable(n_vars, index), 1)],
        })
    }

    /// Builds a canonical polynomial from arbitrary (possibly repeated, possibly zero) terms.
    pub fn from_terms(
        n_vars: usize,
        modulus: Modulus,
        terms: impl IntoIterator<Item = (Monomial, u64)>,
    ) -> Result<Self> {
        let mut raw: Vec<(Monomial, u32)> = Vec::new();
        for (m, c) in terms {
            if m.n_vars() != n_vars {
                return config_err(format!(
                    "monomial has {} exponents, expected {n_vars}",
                    m.n_vars()
                ));
            }
            raw.push((m, modulus.reduce(c)));
        }
        Ok(Self::canonicalize(n_vars, modulus, raw))
    }

    fn canonicalize(n_vars: usize, modulus: Modulus, mut raw: Vec<(Monomial, u32)>) -> Self {
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        let mut terms: Vec<(Monomial, u32)> = Vec::with_capacity(raw.len());
        for (m, c) in raw {
            match terms.last_mut() {
                Some((last, acc)) if *last == m => *acc = modulus.add(*acc, c),
                _ => terms.push((m, c)),
            }
        }
        terms.retain(|(_, c)| *c != 0);
        FieldPolynomial {
            n_vars,
            modulus,
            terms,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn terms(&self) -> &[(Monomial, u32)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.last().map(|(m, _)| m.total_degree())
    }

    pub fn constant_term(&self) -> u32 {
        match self.terms.first() {
            Some((m, c)) if m.total_degree() == 0 => *c,
            _ => 0,
        }
    }

    fn check_compatible(&self, other: &FieldPolynomial) -> Result<()> {
        if self.n_vars != other.n_vars {
            return config_err(format!(
                "variable count mismatch: {} vs {}",
                self.n_vars, other.n_vars
            ));
        }
        if self.modulus != other.modulus {
            return config_err(format!(
                "modulus mismatch: {} vs {}",
                self.modulus, other.modulus
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &FieldPolynomial) -> Result<FieldPolynomial> {
        self.check_compatible(other)?;
        let p = self.modulus;
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            let (ma, ca) = &self.terms[i];
            let (mb, cb) = &other.terms[j];
            match ma.cmp(mb) {
                Ordering::Less => {
                    terms.push((ma.clone(), *ca));
                    i += 1;
                }
                Ordering::Greater => {
                    terms.push((mb.clone(), *cb));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = p.add(*ca, *cb);
                    if c != 0 {
                        terms.push((ma.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        terms.extend_from_slice(&self.terms[i..]);
        terms.extend_from_slice(&other.terms[j..]);
        Ok(FieldPolynomial {
            n_vars: self.n_vars,
            modulus: p,
            terms,
        })
    }

    pub fn mul(&self, other: &FieldPolynomial) -> Result<FieldPolynomial> {
        self.check_compatible(other)?;
        let p = self.modulus;
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                raw.push((ma.product(mb), p.mul(*ca, *cb)));
            }
        }
        Ok(Self::canonicalize(self.n_vars, p, raw))
    }

    pub fn eval(&self, point: &[FieldElement]) -> Result<FieldElement> {
        if point.len() != self.n_vars {
            return config_err(format!(
                "evaluation point has {} coordinates, expected {}",
                point.len(),
                self.n_vars
            ));
        }
        if let Some(bad) = point.iter().find(|x| x.modulus() != self.modulus) {
            return config_err(format!(
                "point modulus {} differs from {}",
                bad.modulus(),
                self.modulus
            ));
        }
        let values: Vec<u32> = point.iter().map(|x| x.value()).collect();
        Ok(FieldElement::new(
            self.eval_residues(&values) as u64,
            self.modulus,
        ))
    }

    /// Evaluation on raw residues; the caller guarantees the length.
    pub(crate) fn eval_residues(&self, point: &[u32]) -> u32 {
        let p = self.modulus;
        let mut acc = 0u32;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (x, &e) in point.iter().zip(m.exponents()) {
                for _ in 0..e {
                    t = p.mul(t, *x);
                }
            }
            acc = p.add(acc, t);
        }
        acc
    }

    /// Parses the canonical text form, e.g. `1*x0^2 + 2*x0^1*x1^1 + 1*x1^2`.
    ///
    /// Coefficients and exponents may be omitted (`x0*x1 + 3`); the result is
    /// canonicalized, so non-canonical inputs are accepted.
    pub fn parse(text: &str, n_vars: usize, modulus: Modulus) -> Result<Self> {
        let text = text.trim();
        if text == "0" {
            return Ok(Self::zero(n_vars, modulus));
        }
        let mut raw = Vec::new();
        for term in text.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::Parse(format!("empty term in {text:?}")));
            }
            let mut coeff: u64 = 1;
            let mut exps = vec![0u16; n_vars];
            for (k, factor) in term.split('*').enumerate() {
                let factor = factor.trim();
                if let Some(var) = factor.strip_prefix('x') {
                    let (idx, exp) = match var.split_once('^') {
                        Some((i, e)) => (i, e),
                        None => (var, "1"),
                    };
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad variable {factor:?}")))?;
                    let exp: u16 = exp
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad exponent {factor:?}")))?;
                    if idx >= n_vars {
                        return Err(Error::Parse(format!(
                            "variable x{idx} outside {n_vars} variables"
                        )));
                    }
                    exps[idx] = exps[idx]
                        .checked_add(exp)
                        .ok_or_else(|| Error::Parse(format!("exponent overflow in {term:?}")))?;
                } else if k == 0 {
                    coeff = factor
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad coefficient {factor:?}")))?;
                } else {
                    return Err(Error::Parse(format!("unexpected factor {factor:?}")));
                }
            }
            raw.push((Monomial(SmallVec::from_vec(exps)), coeff));
        }
        Self::from_terms(n_vars, modulus, raw)
    }
}

/// Canonical rendering; the stable key used by board files.
impl fmt::Display for FieldPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    write!(f, "*x{i}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

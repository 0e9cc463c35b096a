//! Polynomials over the rationals in a fixed number of variables.
//!
//! Variables all carry internal degree 2, so a polynomial of total degree `k`
//! sits in internal degree `2k`. Monomials of one total degree are indexed in
//! descending lexicographic order of their exponent vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::exact::{SparseVec, Q};

/// Exponent vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(pub SmallVec<[u32; 4]>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(SmallVec::from_elem(0, nvars))
    }

    pub fn var(nvars: usize, k: usize) -> Self {
        let mut m = Self::one(nvars);
        m.0[k] = 1;
        m
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }
}

/// All monomials of one total degree in a fixed number of variables.
#[derive(Debug)]
pub struct MonomialBasis {
    pub nvars: usize,
    pub degree: u32,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    fn build(nvars: usize, degree: u32) -> Self {
        let mut monomials = Vec::new();
        let mut current = vec![0u32; nvars];
        fill(&mut monomials, &mut current, 0, degree);
        let index = monomials.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Self { nvars, degree, monomials, index }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn index_of(&self, m: &Monomial) -> usize {
        self.index[m]
    }
}

fn fill(out: &mut Vec<Monomial>, current: &mut Vec<u32>, pos: usize, left: u32) {
    let nvars = current.len();
    if nvars == 0 {
        if left == 0 {
            out.push(Monomial(SmallVec::new()));
        }
        return;
    }
    if pos == nvars - 1 {
        current[pos] = left;
        out.push(Monomial(current.iter().copied().collect()));
        current[pos] = 0;
        return;
    }
    for e in (0..=left).rev() {
        current[pos] = e;
        fill(out, current, pos + 1, left - e);
    }
    current[pos] = 0;
}

/// Shared cache of monomial bases keyed by (variables, degree).
pub fn monomials(nvars: usize, degree: u32) -> Arc<MonomialBasis> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<MonomialBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("monomial cache poisoned");
    guard
        .entry((nvars, degree))
        .or_insert_with(|| Arc::new(MonomialBasis::build(nvars, degree)))
        .clone()
}

/// Number of monomials of total degree `degree` in `nvars` variables.
pub fn monomial_count(nvars: usize, degree: u32) -> usize {
    if nvars == 0 {
        return usize::from(degree == 0);
    }
    // binomial(degree + nvars - 1, nvars - 1)
    let (n, k) = (degree as u128 + nvars as u128 - 1, nvars as u128 - 1);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc as usize
}

/// A polynomial in a fixed number of variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        Self::monomial(Monomial::one(nvars), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Q::one())
    }

    pub fn var(nvars: usize, k: usize) -> Self {
        Self::monomial(Monomial::var(nvars, k), Q::one())
    }

    pub fn monomial(m: Monomial, c: Q) -> Self {
        let nvars = m.nvars();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self { nvars, terms }
    }

    /// Linear form `sum_k coeffs[k] * x_k`.
    pub fn linear(coeffs: &[Q]) -> Self {
        let nvars = coeffs.len();
        let mut p = Self::zero(nvars);
        for (k, c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::var(nvars, k), c.clone());
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> + '_ {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(m.nvars(), self.nvars);
        let entry = self.terms.entry(m.clone()).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    /// Total degree if homogeneous and nonzero.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(Monomial::degree);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn is_homogeneous_of(&self, degree: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == degree)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, a: &Q) -> Poly {
        if a.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(m, c)| (m.clone(), c * a)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(k, c)| (k.mul(m), c.clone())).collect() }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one(self.nvars);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Substitutes variable `k` by `images[k]`; all images share one ring.
    pub fn substitute(&self, images: &[Poly], target_nvars: usize) -> Poly {
        let mut out = Poly::zero(target_nvars);
        for (m, c) in &self.terms {
            let mut t = Poly::constant(target_nvars, c.clone());
            for (k, e) in m.0.iter().enumerate() {
                if *e > 0 {
                    t = t.mul(&images[k].pow(*e));
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Coefficient vector in the monomial basis of `degree` (terms of other
    /// degrees must be absent).
    pub fn to_vector(&self, degree: u32, offset: usize) -> SparseVec {
        let basis = monomials(self.nvars, degree);
        SparseVec::from_pairs(self.terms.iter().map(|(m, c)| {
            debug_assert_eq!(m.degree(), degree);
            (offset + basis.index_of(m), c.clone())
        }))
    }

    pub fn from_vector(nvars: usize, degree: u32, v: &SparseVec) -> Poly {
        let basis = monomials(nvars, degree);
        let mut p = Poly::zero(nvars);
        for (i, c) in v.iter() {
            p.add_term(basis.get(i).clone(), c.clone());
        }
        p
    }
}

impl fmt::Display for Poly {
    /// Terms joined by " + ", each `c` or `c*t0^a*t1^b` with zero exponents
    /// omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        // highest monomials first reads more naturally
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (k, e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*t{k}")?,
                    _ => write!(f, "*t{k}^{e}")?,
                }
            }
        }
        Ok(())
    }
}

impl Poly {
    /// Parses the `Display` format.
    pub fn parse(s: &str, nvars: usize) -> Result<Poly, String> {
        let s = s.trim();
        let mut p = Poly::zero(nvars);
        if s == "0" {
            return Ok(p);
        }
        for term in s.split(" + ") {
            let mut parts = term.trim().split('*');
            let coeff_text = parts.next().ok_or("empty term")?;
            let coeff: Q = coeff_text.parse().map_err(|_| format!("bad coefficient '{coeff_text}'"))?;
            let mut m = Monomial::one(nvars);
            for factor in parts {
                let factor = factor.strip_prefix('t').ok_or_else(|| format!("bad factor '{factor}'"))?;
                let (var, exp) = match factor.split_once('^') {
                    Some((v, e)) => (v, e.parse::<u32>().map_err(|_| format!("bad exponent in '{factor}'"))?),
                    None => (factor, 1),
                };
                let k: usize = var.parse().map_err(|_| format!("bad variable in '{factor}'"))?;
                if k >= nvars {
                    return Err(format!("variable t{k} out of range for {nvars} variables"));
                }
                m.0[k] += exp;
            }
            p.add_term(m, coeff);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q, q_frac};

    #[test]
    fn monomial_counts_match_enumeration() {
        for nvars in 0..5 {
            for degree in 0..6 {
                assert_eq!(monomials(nvars, degree).len(), monomial_count(nvars, degree));
            }
        }
    }

    #[test]
    fn order_is_descending_lex() {
        let b = monomials(2, 2);
        let exps: Vec<Vec<u32>> = b.monomials().iter().map(|m| m.0.to_vec()).collect();
        assert_eq!(exps, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn substitution_and_display_round_trip() {
        // (x + y) at (x, y) = (t, t) is 2t
        let p = Poly::linear(&[q(1), q(1)]);
        let t = Poly::var(1, 0);
        let r = p.substitute(&[t.clone(), t], 1);
        assert_eq!(r, Poly::linear(&[q(2)]));

        let mut p = Poly::zero(2);
        p.add_term(Monomial(SmallVec::from_slice(&[2, 1])), q_frac(-3, 2));
        p.add_term(Monomial(SmallVec::from_slice(&[0, 3])), q(4));
        let text = p.to_string();
        assert_eq!(Poly::parse(&text, 2).unwrap(), p);
    }
}

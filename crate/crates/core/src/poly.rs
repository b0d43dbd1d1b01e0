//! Multivariate polynomials over canonical phase-space variables.
//!
//! Variables are indexed `0..2N`; indices `0..N` are positions and `N..2N`
//! the conjugate momenta, so index `i` pairs with `i + N`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients below this fraction of the largest coefficient are dropped.
pub const DUST_RELATIVE: f64 = 1e-12;

/// Exponent multi-index, one entry per canonical variable.
pub type Exponents = Vec<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalVariable {
    pub index: usize,
    pub kind: VariableKind,
    pub label: String,
}

/// The ordered set of `2N` canonical variables of a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpace {
    labels: Vec<String>,
}

impl PhaseSpace {
    /// `labels` lists positions first, then momenta in the same order.
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() || labels.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "phase space needs an even, non-zero number of variables, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::invalid(format!("duplicate variable label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// Default labels `q1..qN, p1..pN` (or `q, p` for one degree of freedom).
    pub fn with_degrees(n: usize) -> Self {
        let labels = if n == 1 {
            vec!["q".to_string(), "p".to_string()]
        } else {
            (1..=n)
                .map(|i| format!("q{i}"))
                .chain((1..=n).map(|i| format!("p{i}")))
                .collect()
        };
        Self { labels }
    }

    pub fn degrees(&self) -> usize {
        self.labels.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn variable(&self, index: usize) -> CanonicalVariable {
        CanonicalVariable {
            index,
            kind: self.kind(index),
            label: self.labels[index].clone(),
        }
    }

    pub fn variables(&self) -> Vec<CanonicalVariable> {
        (0..self.dim()).map(|i| self.variable(i)).collect()
    }

    pub fn kind(&self, index: usize) -> VariableKind {
        if index < self.degrees() {
            VariableKind::Position
        } else {
            VariableKind::Momentum
        }
    }

    /// Position index of the degree of freedom a variable belongs to.
    pub fn axis_of(&self, index: usize) -> usize {
        index % self.degrees()
    }

    pub fn conjugate(&self, index: usize) -> usize {
        let n = self.degrees();
        if index < n {
            index + n
        } else {
            index - n
        }
    }
}

/// Real polynomial in `nvars` canonical variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponents, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(nvars, c, vec![0; nvars])
    }

    /// The bare canonical variable `a_index`.
    pub fn variable(nvars: usize, index: usize) -> Self {
        let mut e = vec![0; nvars];
        e[index] = 1;
        Self::monomial(nvars, 1.0, e)
    }

    pub fn monomial(nvars: usize, coeff: f64, exponents: Exponents) -> Self {
        assert_eq!(exponents.len(), nvars, "exponent vector length");
        let mut p = Self::zero(nvars);
        if coeff != 0.0 {
            p.terms.insert(exponents, coeff);
        }
        p
    }

    /// Builds from `(coefficient, exponents)` pairs, summing repeated exponents.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (f64, Exponents)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (c, e) in terms {
            if e.len() != nvars {
                return Err(Error::invalid(format!(
                    "exponent vector of length {} in a {nvars}-variable polynomial",
                    e.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::invalid("non-finite polynomial coefficient"));
            }
            *p.terms.entry(e).or_insert(0.0) += c;
        }
        p.normalize();
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms.get(exponents).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Drops exact zeros and floating-point dust relative to the largest
    /// coefficient.
    pub fn normalize(&mut self) {
        let cutoff = DUST_RELATIVE * self.max_abs_coefficient();
        self.terms.retain(|_, c| *c != 0.0 && c.abs() >= cutoff);
    }

    fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
        .normalized()
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            *out.terms.entry(e2).or_insert(0.0) += c * f64::from(e[var]);
        }
        out.normalized()
    }

    /// Mixed partial derivative over a multiset of variable indices.
    pub fn partial(&self, vars: &[usize]) -> Self {
        vars.iter().fold(self.clone(), |p, &v| p.derivative(v))
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars, "evaluation point dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(point)
                    .map(|(&k, &x)| x.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Re-expands the polynomial around `origin`: the result `g` satisfies
    /// `g(h) = self(origin + h)`, so its coefficients are Taylor coefficients
    /// `∂^α f(origin) / α!`.
    pub fn shifted(&self, origin: &[f64]) -> Self {
        assert_eq!(origin.len(), self.nvars, "shift origin dimension");
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            // Product over variables of binomial expansions of (a + h)^k.
            let mut partial: Vec<(Exponents, f64)> = vec![(vec![0; self.nvars], *c)];
            for (v, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let a = origin[v];
                let mut next = Vec::with_capacity(partial.len() * (k as usize + 1));
                for (pe, pc) in &partial {
                    let mut binom = 1.0;
                    for j in 0..=k {
                        let mut ne = pe.clone();
                        ne[v] = j;
                        let w = binom * a.powi((k - j) as i32);
                        if w != 0.0 {
                            next.push((ne, pc * w));
                        }
                        binom = binom * f64::from(k - j) / f64::from(j + 1);
                    }
                }
                partial = next;
            }
            for (pe, pc) in partial {
                *out.terms.entry(pe).or_insert(0.0) += pc;
            }
        }
        out.normalized()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {} variables",
                self.nvars, other.nvars
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            *out.terms.entry(e.clone()).or_insert(0.0) += c;
        }
        Ok(out.normalized())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_insert(0.0) += c1 * c2;
            }
        }
        Ok(out.normalized())
    }

    pub fn format_with(&self, space: &PhaseSpace) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                s.push_str(if *c < 0.0 { " - " } else { " + " });
            } else if *c < 0.0 {
                s.push('-');
            }
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, &k)| {
                    let l = space.labels().get(v).map_or_else(|| format!("a{v}"), Clone::clone);
                    if k == 1 {
                        l
                    } else {
                        format!("{l}^{k}")
                    }
                })
                .collect();
            let a = c.abs();
            if mono.is_empty() {
                s.push_str(&format!("{a}"));
            } else if a == 1.0 {
                s.push_str(&mono.join("*"));
            } else {
                s.push_str(&format!("{a}*{}", mono.join("*")));
            }
        }
        s
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let space = if self.nvars % 2 == 0 && self.nvars > 0 {
            PhaseSpace::with_degrees(self.nvars / 2)
        } else {
            PhaseSpace {
                labels: (0..self.nvars).map(|i| format!("a{i}")).collect(),
            }
        };
        f.write_str(&self.format_with(&space))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial dimensions")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(&rhs.scale(-1.0)).expect("polynomial dimensions")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial dimensions")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// Canonical Poisson bracket `{f, g} = Σ_i ∂f/∂q_i ∂g/∂p_i − ∂f/∂p_i ∂g/∂q_i`.
pub fn poisson_bracket(f: &Polynomial, g: &Polynomial) -> Result<Polynomial> {
    f.check_same(g)?;
    if f.nvars % 2 != 0 {
        return Err(Error::invalid(format!(
            "Poisson bracket needs an even number of variables, got {}",
            f.nvars
        )));
    }
    let n = f.nvars / 2;
    let mut out = Polynomial::zero(f.nvars);
    for i in 0..n {
        let a = f.derivative(i).try_mul(&g.derivative(i + n))?;
        let b = f.derivative(i + n).try_mul(&g.derivative(i))?;
        for (e, c) in a.terms.into_iter() {
            *out.terms.entry(e).or_insert(0.0) += c;
        }
        for (e, c) in b.terms.into_iter() {
            *out.terms.entry(e).or_insert(0.0) -= c;
        }
    }
    Ok(out.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ho() -> Polynomial {
        Polynomial::from_terms(2, [(0.5, vec![2, 0]), (0.5, vec![0, 2])]).unwrap()
    }

    #[test]
    fn canonical_pair() {
        let q = Polynomial::variable(2, 0);
        let p = Polynomial::variable(2, 1);
        assert_eq!(poisson_bracket(&q, &p).unwrap(), Polynomial::constant(2, 1.0));
        assert_eq!(poisson_bracket(&p, &q).unwrap(), Polynomial::constant(2, -1.0));
    }

    #[test]
    fn bracket_with_oscillator_gives_velocity() {
        let q = Polynomial::variable(2, 0);
        assert_eq!(poisson_bracket(&q, &ho()).unwrap(), Polynomial::variable(2, 1));
    }

    #[test]
    fn coupled_term() {
        // variables (q, Q, p, P); {q, k Q p^2} = 2 k Q p
        let k = 0.3;
        let h = Polynomial::monomial(4, k, vec![0, 1, 2, 0]);
        let q = Polynomial::variable(4, 0);
        let b = poisson_bracket(&q, &h).unwrap();
        assert_eq!(b, Polynomial::monomial(4, 2.0 * k, vec![0, 1, 1, 0]));
    }

    #[test]
    fn dimension_mismatch() {
        let a = Polynomial::variable(2, 0);
        let b = Polynomial::variable(4, 0);
        assert!(matches!(poisson_bracket(&a, &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn dust_is_dropped() {
        let p = Polynomial::from_terms(2, [(1.0, vec![1, 0]), (1e-14, vec![0, 1])]).unwrap();
        assert_eq!(p.len(), 1);
        let z = Polynomial::from_terms(2, [(1.0, vec![1, 0]), (-1.0, vec![1, 0])]).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn shift_matches_evaluation() {
        let f = Polynomial::from_terms(
            4,
            [(1.5, vec![1, 2, 0, 1]), (-0.25, vec![0, 0, 3, 0]), (2.0, vec![0, 0, 0, 0])],
        )
        .unwrap();
        let origin = [0.3, -1.2, 0.7, 2.0];
        let g = f.shifted(&origin);
        let h = [0.1, 0.05, -0.2, 0.3];
        let x: Vec<f64> = origin.iter().zip(&h).map(|(a, b)| a + b).collect();
        assert!((g.eval(&h) - f.eval(&x)).abs() < 1e-12);
        assert!((g.coefficient(&[0, 0, 0, 0]) - f.eval(&origin)).abs() < 1e-12);
    }

    #[test]
    fn display_uses_labels() {
        let space = PhaseSpace::new(["q", "Q", "p", "P"]).unwrap();
        let f = Polynomial::from_terms(4, [(2.0, vec![0, 1, 1, 0]), (-1.0, vec![0, 0, 0, 1])]).unwrap();
        assert_eq!(f.format_with(&space), "-P + 2*Q*p");
    }
}

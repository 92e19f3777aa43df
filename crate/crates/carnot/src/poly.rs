//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! The structural checks on a group (coefficient homogeneity, brackets,
//! Jacobi, divergence-freeness) must be exact, so polynomials carry
//! `BigRational` coefficients and only drop to `f64` at evaluation time.

use num::{BigInt, BigRational, One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Exponent vector of a monomial; index j is the power of coordinate x_{j+1}.
pub type Monomial = Vec<u32>;

/// Sparse polynomial: monomial -> nonzero rational coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Polynomial::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn from_i64(nvars: usize, num: i64, den: i64) -> Self {
        Polynomial::constant(
            nvars,
            BigRational::new(BigInt::from(num), BigInt::from(den)),
        )
    }

    /// The coordinate x_{var+1} as a polynomial.
    pub fn var(nvars: usize, var: usize) -> Self {
        assert!(var < nvars);
        let mut m = vec![0; nvars];
        m[var] = 1;
        let mut p = Polynomial::zero(nvars);
        p.terms.insert(m, BigRational::one());
        p
    }

    pub fn monomial(nvars: usize, exps: Monomial, coeff: BigRational) -> Self {
        assert_eq!(exps.len(), nvars);
        let mut p = Polynomial::zero(nvars);
        if !coeff.is_zero() {
            p.terms.insert(exps, coeff);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    fn insert(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), -c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                out.insert(m, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, a) in &self.terms {
            out.terms.insert(m.clone(), a * c);
        }
        out
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m[var];
            if e == 0 {
                continue;
            }
            let mut md = m.clone();
            md[var] = e - 1;
            out.insert(md, c * BigRational::from(BigInt::from(e)));
        }
        out
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars);
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for (j, &e) in m.iter().enumerate() {
                if e > 0 {
                    t *= x[j].powi(e as i32);
                }
            }
            sum += t;
        }
        sum
    }

    /// Flattened (coefficient, [(var, exp)]) view for fast repeated evaluation.
    pub fn compile(&self) -> CompiledPoly {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let factors: Vec<(usize, u32)> = m
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(j, &e)| (j, e))
                    .collect();
                (rational_to_f64(c), factors)
            })
            .collect();
        CompiledPoly { terms }
    }

    /// If every monomial has the same weighted degree `sum_j w_j e_j`,
    /// returns it. Zero polynomials are homogeneous of any degree (None here
    /// stands for "vacuous"). A mixed polynomial returns Err with the two
    /// degrees found.
    pub fn uniform_weighted_degree(&self, weights: &[u32]) -> Result<Option<u32>, (u32, u32)> {
        assert_eq!(weights.len(), self.nvars);
        let mut deg: Option<u32> = None;
        for m in self.terms.keys() {
            let d: u32 = m.iter().zip(weights).map(|(e, w)| e * w).sum();
            match deg {
                None => deg = Some(d),
                Some(d0) if d0 != d => return Err((d0, d)),
                _ => {}
            }
        }
        Ok(deg)
    }

    /// Highest variable index that actually occurs, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.terms
            .keys()
            .flat_map(|m| {
                m.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(j, _)| j)
            })
            .max()
    }

    /// Coefficient of the linear monomial in `var` (used to read structure
    /// constants off degree-one coefficients).
    pub fn linear_coeff(&self, var: usize) -> BigRational {
        let mut m = vec![0u32; self.nvars];
        m[var] = 1;
        self.terms.get(&m).cloned().unwrap_or_else(BigRational::zero)
    }
}

pub fn rational_to_f64(c: &BigRational) -> f64 {
    // Exact for anything the presets produce; falls back to a quotient of
    // bigint approximations for pathological magnitudes.
    let n = c.numer();
    let d = c.denom();
    let nf = bigint_to_f64(n);
    let df = bigint_to_f64(d);
    nf / df
}

fn bigint_to_f64(v: &BigInt) -> f64 {
    use num::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

/// Float-ready flattened polynomial for hot evaluation loops.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(j, e) in factors {
                t *= x[j].powi(e as i32);
            }
            sum += t;
        }
        sum
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || m.iter().all(|&e| e == 0) {
                factors.push(if mag.denom().is_one() {
                    format!("{}", mag.numer())
                } else {
                    format!("{}/{}", mag.numer(), mag.denom())
                });
            }
            for (j, &e) in m.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", j + 1)),
                    _ => factors.push(format!("x{}^{}", j + 1, e)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, j: usize) -> Polynomial {
        Polynomial::var(n, j)
    }

    #[test]
    fn arithmetic_and_diff_are_exact() {
        // p = x1^2 x2 - x2/2
        let p = x(2, 0)
            .mul(&x(2, 0))
            .mul(&x(2, 1))
            .sub(&x(2, 1).scale(&BigRational::new(1.into(), 2.into())));
        let dp = p.diff(0); // 2 x1 x2
        assert_eq!(dp, x(2, 0).mul(&x(2, 1)).scale(&BigRational::from(BigInt::from(2))));
        let dp2 = p.diff(1); // x1^2 - 1/2
        assert_eq!(
            dp2,
            x(2, 0)
                .mul(&x(2, 0))
                .add(&Polynomial::from_i64(2, -1, 2))
        );
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn weighted_degree_detects_homogeneity() {
        // On H^1 weights are (1,1,2): x1*x2 and x3 are both degree 2.
        let w = [1u32, 1, 2];
        let p = x(3, 0).mul(&x(3, 1)).add(&x(3, 2));
        assert_eq!(p.uniform_weighted_degree(&w), Ok(Some(2)));
        let q = x(3, 0).add(&x(3, 2));
        assert!(q.uniform_weighted_degree(&w).is_err());
        assert_eq!(Polynomial::zero(3).uniform_weighted_degree(&w), Ok(None));
    }

    #[test]
    fn eval_matches_compiled() {
        let p = x(3, 0)
            .mul(&x(3, 1))
            .sub(&x(3, 2).scale(&BigRational::new(3.into(), 4.into())));
        let pt = [0.3, -1.7, 2.5];
        let direct = p.eval_f64(&pt);
        let compiled = p.compile().eval(&pt);
        assert!((direct - compiled).abs() < 1e-15);
        assert!((direct - (0.3 * -1.7 - 0.75 * 2.5)).abs() < 1e-15);
    }

    #[test]
    fn display_is_readable() {
        let p = x(2, 0)
            .mul(&x(2, 0))
            .sub(&x(2, 1).scale(&BigRational::new(1.into(), 2.into())));
        assert_eq!(format!("{}", p), "-1/2*x2 + x1^2");
    }
}

//! Stratified Lie groups as validated data: generators with polynomial
//! coefficients, dilations, group law, brackets, and the Hörmander rank
//! check.
//!
//! A group lives on R^N split into strata of dimensions N_1..N_r. Generator
//! k has the canonical form X_k = d/dx_k + sum a_{k,m}^{(l)} d/dx_m^{(l)}
//! where each coefficient is a dilation-homogeneous polynomial of degree
//! l-1. Coefficient homogeneity is checked exactly in rational arithmetic;
//! the rank condition is sampled at seeded points.

use crate::expr::Expression;
use crate::poly::{CompiledPoly, Polynomial};
use num::{BigInt, BigRational, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("bad strata: {0}")]
    BadStrata(String),
    #[error("coefficient a^({l})_({k},{m}) is not dilation-homogeneous of degree {expected}: {detail}")]
    HomogeneityViolation {
        k: usize,
        l: usize,
        m: usize,
        expected: u32,
        detail: String,
    },
    #[error("Lie span has rank {rank} < {expected} at sample point {point:?}")]
    RankDeficient {
        point: Vec<f64>,
        rank: usize,
        expected: usize,
    },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("no closed-form group law for a custom spec of step >= 3")]
    UnsupportedGroupLaw,
    #[error("bad coefficient entry: {0}")]
    BadCoefficient(String),
}

/// Left-invariant vector field, stored as one exact coefficient polynomial
/// per coordinate. Compiled float forms are kept for hot evaluation loops.
#[derive(Clone, Debug)]
pub struct VectorField {
    coeffs: Vec<Polynomial>,
    compiled: Vec<CompiledPoly>,
}

impl VectorField {
    pub fn new(coeffs: Vec<Polynomial>) -> Self {
        let compiled = coeffs.iter().map(|p| p.compile()).collect();
        VectorField { coeffs, compiled }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, j: usize) -> &Polynomial {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[Polynomial] {
        &self.coeffs
    }

    /// Coefficient values at a point.
    pub fn eval_at(&self, x: &[f64]) -> Vec<f64> {
        self.compiled.iter().map(|c| c.eval(x)).collect()
    }

    pub fn eval_coeff(&self, j: usize, x: &[f64]) -> f64 {
        self.compiled[j].eval(x)
    }

    /// Euclidean divergence sum_j d c_j / d x_j, exact.
    pub fn euclidean_divergence(&self) -> Polynomial {
        let n = self.coeffs.len();
        let mut acc = Polynomial::zero(n);
        for (j, c) in self.coeffs.iter().enumerate() {
            acc = acc.add(&c.diff(j));
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }
}

/// Lie bracket [V, W]_j = sum_i (V_i dW_j/dx_i - W_i dV_j/dx_i), exact.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> VectorField {
    assert_eq!(v.dim(), w.dim());
    let n = v.dim();
    let mut coeffs = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = Polynomial::zero(n);
        for i in 0..n {
            if !v.coeffs[i].is_zero() {
                acc = acc.add(&v.coeffs[i].mul(&w.coeffs[j].diff(i)));
            }
            if !w.coeffs[i].is_zero() {
                acc = acc.sub(&w.coeffs[i].mul(&v.coeffs[j].diff(i)));
            }
        }
        coeffs.push(acc);
    }
    VectorField::new(coeffs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Euclidean(usize),
    Heisenberg(usize),
    FreeStep2(usize),
    Engel,
}

impl Preset {
    pub fn parse(id: &str) -> Option<Preset> {
        let id = id.trim().to_ascii_lowercase();
        if id == "engel" {
            return Some(Preset::Engel);
        }
        for (prefix, ctor) in [
            ("euclidean", 0usize),
            ("r", 0),
            ("heisenberg", 1),
            ("h", 1),
            ("free_step2_", 2),
            ("free2_", 2),
        ] {
            if let Some(rest) = id.strip_prefix(prefix) {
                if let Ok(n) = rest.parse::<usize>() {
                    if n >= 1 {
                        return Some(match ctor {
                            0 => Preset::Euclidean(n),
                            1 => Preset::Heisenberg(n),
                            _ => Preset::FreeStep2(n),
                        });
                    }
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
enum LawKind {
    /// z = x + y
    Abelian,
    /// z^(2)_m gains the bilinear term sum_{k,i} c^m_{k,i} x_i y_k
    Step2(Vec<Vec<Vec<BigRational>>>),
    /// shipped closed form (exponential coordinates, step 3)
    Engel,
    /// custom step >= 3 spec without a law
    Unsupported,
}

/// Validated spec: strata plus the coefficient table of the generators.
#[derive(Clone, Debug)]
pub struct StratifiedGroupSpec {
    pub name: String,
    pub strata: Vec<usize>,
    /// coeffs[k][j - N_1] is a^{(l)}_{k,m} for the higher coordinate j.
    coeffs: Vec<Vec<Polynomial>>,
    preset: Option<Preset>,
}

impl StratifiedGroupSpec {
    /// A custom spec; `entries` holds (k, l, m, polynomial) with 1-based
    /// k, l, m as in the coefficient notation a^{(l)}_{k,m}.
    pub fn custom(
        name: &str,
        strata: Vec<usize>,
        entries: Vec<(usize, usize, usize, Polynomial)>,
    ) -> Result<Self, GroupError> {
        validate_strata(&strata)?;
        let n: usize = strata.iter().sum();
        let n1 = strata[0];
        let mut coeffs = vec![vec![Polynomial::zero(n); n - n1]; n1];
        for (k, l, m, poly) in entries {
            if k < 1 || k > n1 {
                return Err(GroupError::BadCoefficient(format!(
                    "generator index k={k} out of range 1..={n1}"
                )));
            }
            if l < 2 || l > strata.len() {
                return Err(GroupError::BadCoefficient(format!(
                    "stratum index l={l} out of range 2..={}",
                    strata.len()
                )));
            }
            if m < 1 || m > strata[l - 1] {
                return Err(GroupError::BadCoefficient(format!(
                    "coordinate index m={m} out of range 1..={}",
                    strata[l - 1]
                )));
            }
            if poly.nvars() != n {
                return Err(GroupError::BadCoefficient(format!(
                    "polynomial for a^({l})_({k},{m}) has {} variables, group has {n}",
                    poly.nvars()
                )));
            }
            let offset: usize = strata[..l - 1].iter().sum();
            coeffs[k - 1][offset + m - 1 - n1] = poly;
        }
        Ok(StratifiedGroupSpec {
            name: name.to_string(),
            strata,
            coeffs,
            preset: None,
        })
    }

    pub fn preset(p: Preset) -> Self {
        let (name, strata, entries) = preset_data(p);
        let mut spec = StratifiedGroupSpec::custom(&name, strata, entries)
            .expect("preset specs are well-formed");
        spec.preset = Some(p);
        spec
    }
}

fn validate_strata(strata: &[usize]) -> Result<(), GroupError> {
    if strata.is_empty() {
        return Err(GroupError::BadStrata("no strata given".into()));
    }
    if let Some(bad) = strata.iter().position(|&s| s == 0) {
        return Err(GroupError::BadStrata(format!(
            "stratum {} has nonpositive size",
            bad + 1
        )));
    }
    Ok(())
}

fn half() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

fn preset_data(p: Preset) -> (String, Vec<usize>, Vec<(usize, usize, usize, Polynomial)>) {
    match p {
        Preset::Euclidean(n) => (format!("R{n}"), vec![n], vec![]),
        Preset::Heisenberg(n) => {
            let dim = 2 * n + 1;
            let mut entries = Vec::new();
            for i in 0..n {
                // X_i picks up -y_i/2 d/dt, X_{n+i} picks up x_i/2 d/dt
                entries.push((
                    i + 1,
                    2,
                    1,
                    Polynomial::var(dim, n + i).scale(&-half()),
                ));
                entries.push((n + i + 1, 2, 1, Polynomial::var(dim, i).scale(&half())));
            }
            (format!("H{n}"), vec![2 * n, 1], entries)
        }
        Preset::FreeStep2(m) => {
            let n2 = m * (m - 1) / 2;
            let dim = m + n2;
            let mut entries = Vec::new();
            let mut idx = 0;
            for i in 0..m {
                for j in (i + 1)..m {
                    idx += 1;
                    entries.push((i + 1, 2, idx, Polynomial::var(dim, j).scale(&-half())));
                    entries.push((j + 1, 2, idx, Polynomial::var(dim, i).scale(&half())));
                }
            }
            (format!("free2_{m}"), vec![m, n2], entries)
        }
        Preset::Engel => {
            let dim = 4;
            let twelfth = BigRational::new(BigInt::from(1), BigInt::from(12));
            // X_1 = d1 - (x2/2) d3 - (x3/2 + x1 x2/12) d4
            // X_2 = d2 + (x1/2) d3 + (x1^2/12) d4
            let a13 = Polynomial::var(dim, 1).scale(&-half());
            let a14 = Polynomial::var(dim, 2)
                .scale(&-half())
                .sub(&Polynomial::var(dim, 0).mul(&Polynomial::var(dim, 1)).scale(&twelfth));
            let a23 = Polynomial::var(dim, 0).scale(&half());
            let a24 = Polynomial::var(dim, 0)
                .mul(&Polynomial::var(dim, 0))
                .scale(&twelfth);
            (
                "engel".into(),
                vec![2, 1, 1],
                vec![(1, 2, 1, a13), (2, 2, 1, a23), (1, 3, 1, a14), (2, 3, 1, a24)],
            )
        }
    }
}

/// A validated stratified group.
#[derive(Clone, Debug)]
pub struct StratifiedGroup {
    spec: StratifiedGroupSpec,
    q: u32,
    weights: Vec<u32>,
    generators: Vec<VectorField>,
    law: LawKind,
}

/// Validates the spec (exact homogeneity, sampled Hörmander rank) and
/// builds the group.
pub fn build_group(spec: StratifiedGroupSpec) -> Result<StratifiedGroup, GroupError> {
    validate_strata(&spec.strata)?;
    let n: usize = spec.strata.iter().sum();
    let n1 = spec.strata[0];
    let step = spec.strata.len();

    let mut weights = Vec::with_capacity(n);
    for (i, &s) in spec.strata.iter().enumerate() {
        weights.extend(std::iter::repeat((i + 1) as u32).take(s));
    }
    let q: u32 = weights.iter().sum();

    // a^{(l)}_{k,m} must be homogeneous of degree l-1 under the dilations;
    // this also forces it to depend only on strata strictly below l.
    for (k, row) in spec.coeffs.iter().enumerate() {
        for (off, poly) in row.iter().enumerate() {
            let j = n1 + off;
            let l = weights[j] as usize;
            match poly.uniform_weighted_degree(&weights) {
                Ok(None) => {}
                Ok(Some(d)) if d as usize == l - 1 => {}
                Ok(Some(d)) => {
                    let (l_, m_) = stratum_position(&spec.strata, j);
                    return Err(GroupError::HomogeneityViolation {
                        k: k + 1,
                        l: l_,
                        m: m_,
                        expected: (l - 1) as u32,
                        detail: format!("all monomials have weighted degree {d}"),
                    });
                }
                Err((d0, d1)) => {
                    let (l_, m_) = stratum_position(&spec.strata, j);
                    return Err(GroupError::HomogeneityViolation {
                        k: k + 1,
                        l: l_,
                        m: m_,
                        expected: (l - 1) as u32,
                        detail: format!("mixed weighted degrees {d0} and {d1}"),
                    });
                }
            }
        }
    }

    let mut generators = Vec::with_capacity(n1);
    for k in 0..n1 {
        let mut coeffs = vec![Polynomial::zero(n); n];
        coeffs[k] = Polynomial::from_i64(n, 1, 1);
        for (off, poly) in spec.coeffs[k].iter().enumerate() {
            coeffs[n1 + off] = poly.clone();
        }
        generators.push(VectorField::new(coeffs));
    }

    let law = derive_law(&spec, n, n1, step);

    let group = StratifiedGroup {
        spec,
        q,
        weights,
        generators,
        law,
    };

    // Hörmander rank at the origin plus 8 seeded pseudo-random points.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut samples = vec![vec![0.0; n]];
    for _ in 0..8 {
        samples.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    for point in samples {
        let rank = group.hoermander_rank(&point);
        if rank < n {
            return Err(GroupError::RankDeficient {
                point,
                rank,
                expected: n,
            });
        }
    }

    Ok(group)
}

fn stratum_position(strata: &[usize], j: usize) -> (usize, usize) {
    let mut acc = 0;
    for (i, &s) in strata.iter().enumerate() {
        if j < acc + s {
            return (i + 1, j - acc + 1);
        }
        acc += s;
    }
    unreachable!()
}

fn derive_law(spec: &StratifiedGroupSpec, n: usize, n1: usize, step: usize) -> LawKind {
    if spec.preset == Some(Preset::Engel) {
        return LawKind::Engel;
    }
    if step == 1 {
        return LawKind::Abelian;
    }
    if step == 2 {
        // z_m picks up sum_{k,i} c^m_{k,i} x_i y_k with c read off the
        // linear coefficient of x_i in a^{(2)}_{k,m}.
        let n2 = n - n1;
        let mut table = vec![vec![vec![BigRational::zero(); n1]; n1]; n2];
        for k in 0..n1 {
            for m in 0..n2 {
                let poly = &spec.coeffs[k][m];
                for i in 0..n1 {
                    table[m][k][i] = poly.linear_coeff(i);
                }
            }
        }
        return LawKind::Step2(table);
    }
    LawKind::Unsupported
}

impl StratifiedGroup {
    pub fn preset(p: Preset) -> StratifiedGroup {
        build_group(StratifiedGroupSpec::preset(p)).expect("presets validate")
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &StratifiedGroupSpec {
        &self.spec
    }

    /// The preset this group was built from, if any.
    pub fn preset_id(&self) -> Option<Preset> {
        self.spec.preset
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn first_stratum(&self) -> usize {
        self.spec.strata[0]
    }

    pub fn step(&self) -> usize {
        self.spec.strata.len()
    }

    pub fn strata(&self) -> &[usize] {
        &self.spec.strata
    }

    /// Homogeneous dimension Q = sum_k k N_k.
    pub fn homogeneous_dimension(&self) -> u32 {
        self.q
    }

    /// Dilation weight of each coordinate.
    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> &VectorField {
        &self.generators[k]
    }

    /// delta_lambda: scales the k-th stratum by lambda^k.
    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>, GroupError> {
        if !(lambda > 0.0) {
            return Err(GroupError::NonPositiveLambda(lambda));
        }
        assert_eq!(x.len(), self.dim());
        Ok(x.iter()
            .zip(&self.weights)
            .map(|(&v, &w)| lambda.powi(w as i32) * v)
            .collect())
    }

    /// Group product x o y.
    pub fn multiply(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, GroupError> {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        match &self.law {
            LawKind::Abelian => Ok(x.iter().zip(y).map(|(a, b)| a + b).collect()),
            LawKind::Step2(table) => {
                let n1 = self.first_stratum();
                let mut z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                for (m, mat) in table.iter().enumerate() {
                    let mut extra = 0.0;
                    for (k, row) in mat.iter().enumerate() {
                        for (i, c) in row.iter().enumerate() {
                            if !c.is_zero() {
                                extra += crate::poly::rational_to_f64(c) * x[i] * y[k];
                            }
                        }
                    }
                    z[n1 + m] += extra;
                }
                Ok(z)
            }
            LawKind::Engel => Ok(engel_multiply(x, y)),
            LawKind::Unsupported => Err(GroupError::UnsupportedGroupLaw),
        }
    }

    /// Group inverse of x.
    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>, GroupError> {
        match &self.law {
            LawKind::Abelian | LawKind::Engel => Ok(x.iter().map(|v| -v).collect()),
            LawKind::Step2(table) => {
                let n1 = self.first_stratum();
                let mut z: Vec<f64> = x.iter().map(|v| -v).collect();
                for (m, mat) in table.iter().enumerate() {
                    let mut extra = 0.0;
                    for (k, row) in mat.iter().enumerate() {
                        for (i, c) in row.iter().enumerate() {
                            if !c.is_zero() {
                                extra += crate::poly::rational_to_f64(c) * x[i] * x[k];
                            }
                        }
                    }
                    z[n1 + m] += extra;
                }
                Ok(z)
            }
            LawKind::Unsupported => Err(GroupError::UnsupportedGroupLaw),
        }
    }

    /// Components of y o x as expressions in x, for a fixed numeric y.
    /// This is the left translation L_y in symbolic form.
    pub fn left_translation_exprs(&self, y: &[f64]) -> Result<Vec<Expression>, GroupError> {
        assert_eq!(y.len(), self.dim());
        let n1 = self.first_stratum();
        match &self.law {
            LawKind::Abelian => Ok((0..self.dim())
                .map(|j| Expression::add(Expression::num(y[j]), Expression::coord(j)))
                .collect()),
            LawKind::Step2(table) => {
                let mut out: Vec<Expression> = (0..self.dim())
                    .map(|j| Expression::add(Expression::num(y[j]), Expression::coord(j)))
                    .collect();
                for (m, mat) in table.iter().enumerate() {
                    let mut extra = Expression::num(0.0);
                    for (k, row) in mat.iter().enumerate() {
                        for (i, c) in row.iter().enumerate() {
                            if !c.is_zero() {
                                // law term c^m_{k,i} a_i b_k with a = y, b = x
                                extra = Expression::add(
                                    extra,
                                    Expression::mul(
                                        Expression::num(
                                            crate::poly::rational_to_f64(c) * y[i],
                                        ),
                                        Expression::coord(k),
                                    ),
                                );
                            }
                        }
                    }
                    out[n1 + m] = Expression::add(out[n1 + m].clone(), extra);
                }
                Ok(out)
            }
            LawKind::Engel => {
                let xc = |j: usize| Expression::coord(j);
                let yc = |j: usize| Expression::num(y[j]);
                // z3 = a3 + b3 + (a1 b2 - a2 b1)/2 with a = y, b = x
                let cross12 = Expression::sub(
                    Expression::mul(yc(0), xc(1)),
                    Expression::mul(yc(1), xc(0)),
                );
                let z3 = Expression::add(
                    Expression::add(yc(2), xc(2)),
                    Expression::div(cross12.clone(), Expression::num(2.0)),
                );
                // z4 = a4 + b4 + (a1 b3 - a3 b1)/2 + (a1 - b1)(a1 b2 - a2 b1)/12
                let cross13 = Expression::sub(
                    Expression::mul(yc(0), xc(2)),
                    Expression::mul(yc(2), xc(0)),
                );
                let z4 = Expression::add(
                    Expression::add(
                        Expression::add(yc(3), xc(3)),
                        Expression::div(cross13, Expression::num(2.0)),
                    ),
                    Expression::div(
                        Expression::mul(Expression::sub(yc(0), xc(0)), cross12),
                        Expression::num(12.0),
                    ),
                );
                Ok(vec![
                    Expression::add(yc(0), xc(0)),
                    Expression::add(yc(1), xc(1)),
                    z3,
                    z4,
                ])
            }
            LawKind::Unsupported => Err(GroupError::UnsupportedGroupLaw),
        }
    }

    /// Rank of the span of iterated brackets up to the group step, at x,
    /// via rank-revealing elimination with tolerance 1e-10.
    pub fn hoermander_rank(&self, x: &[f64]) -> usize {
        let mut layer: Vec<VectorField> = self.generators.clone();
        let mut all: Vec<Vec<f64>> = layer.iter().map(|f| f.eval_at(x)).collect();
        for _depth in 2..=self.step() {
            let mut next = Vec::new();
            for g in &self.generators {
                for w in &layer {
                    let b = lie_bracket(g, w);
                    if !b.is_zero() {
                        all.push(b.eval_at(x));
                        next.push(b);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layer = next;
        }
        matrix_rank(&all, 1e-10)
    }
}

fn engel_multiply(x: &[f64], y: &[f64]) -> Vec<f64> {
    let cross12 = x[0] * y[1] - x[1] * y[0];
    let cross13 = x[0] * y[2] - x[2] * y[0];
    vec![
        x[0] + y[0],
        x[1] + y[1],
        x[2] + y[2] + 0.5 * cross12,
        x[3] + y[3] + 0.5 * cross13 + (x[0] - y[0]) * cross12 / 12.0,
    ]
}

/// Row rank of a small dense matrix by Gaussian elimination with partial
/// pivoting; pivots below `tol` (scaled by the largest entry) count as zero.
pub fn matrix_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let thresh = tol * scale;
    let mut rank = 0;
    for col in 0..ncols {
        let Some((pivot_row, pivot_val)) = (rank..m.len())
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if pivot_val <= thresh {
            continue;
        }
        m.swap(rank, pivot_row);
        for r in (rank + 1)..m.len() {
            let f = m[r][col] / m[rank][col];
            if f != 0.0 {
                for c in col..ncols {
                    m[r][c] -= f * m[rank][c];
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Convert a polynomial-shaped expression into an exact polynomial.
/// Division is only allowed by nonzero constants, exponents must be
/// nonnegative integer literals, and function calls are rejected.
pub fn expression_to_polynomial(e: &Expression, nvars: usize) -> Result<Polynomial, String> {
    use num::FromPrimitive;
    match e {
        Expression::Num(v) => BigRational::from_f64(*v)
            .map(|c| Polynomial::constant(nvars, c))
            .ok_or_else(|| format!("non-finite literal {v}")),
        Expression::Coord(j) => {
            if *j < nvars {
                Ok(Polynomial::var(nvars, *j))
            } else {
                Err(format!("coordinate x{} exceeds dimension {nvars}", j + 1))
            }
        }
        Expression::Param(p) => Err(format!("symbol `{p}` is not allowed in a polynomial")),
        Expression::Neg(a) => Ok(expression_to_polynomial(a, nvars)?.neg()),
        Expression::Add(a, b) => {
            Ok(expression_to_polynomial(a, nvars)?.add(&expression_to_polynomial(b, nvars)?))
        }
        Expression::Sub(a, b) => {
            Ok(expression_to_polynomial(a, nvars)?.sub(&expression_to_polynomial(b, nvars)?))
        }
        Expression::Mul(a, b) => {
            Ok(expression_to_polynomial(a, nvars)?.mul(&expression_to_polynomial(b, nvars)?))
        }
        Expression::Div(a, b) => {
            let den = expression_to_polynomial(b, nvars)?;
            let c = den
                .terms()
                .try_fold(None, |acc: Option<BigRational>, (m, c)| {
                    if m.iter().all(|&e| e == 0) && acc.is_none() {
                        Ok(Some(c.clone()))
                    } else {
                        Err("division by a non-constant polynomial".to_string())
                    }
                })?
                .ok_or_else(|| "division by zero polynomial".to_string())?;
            Ok(expression_to_polynomial(a, nvars)?.scale(&c.recip()))
        }
        Expression::Pow(a, b) => {
            let Expression::Num(k) = **b else {
                return Err("polynomial exponents must be integer literals".to_string());
            };
            if k < 0.0 || k.fract() != 0.0 || k > 64.0 {
                return Err(format!("bad polynomial exponent {k}"));
            }
            let base = expression_to_polynomial(a, nvars)?;
            let mut out = Polynomial::from_i64(nvars, 1, 1);
            for _ in 0..k as u32 {
                out = out.mul(&base);
            }
            Ok(out)
        }
        Expression::Call(f, _) => Err(format!(
            "function {:?} is not allowed in a polynomial",
            f
        )),
    }
}

/// Convert an exact polynomial into the expression AST.
pub fn poly_to_expression(p: &Polynomial) -> Expression {
    let mut acc = Expression::num(0.0);
    for (m, c) in p.terms() {
        let mut t = Expression::num(crate::poly::rational_to_f64(c));
        for (j, &e) in m.iter().enumerate() {
            match e {
                0 => {}
                1 => t = Expression::mul(t, Expression::coord(j)),
                _ => {
                    t = Expression::mul(
                        t,
                        Expression::pow(Expression::coord(j), Expression::num(e as f64)),
                    )
                }
            }
        }
        acc = Expression::add(acc, t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> StratifiedGroup {
        StratifiedGroup::preset(Preset::Heisenberg(1))
    }

    #[test]
    fn homogeneous_dimensions() {
        assert_eq!(h1().homogeneous_dimension(), 4);
        assert_eq!(
            StratifiedGroup::preset(Preset::Euclidean(3)).homogeneous_dimension(),
            3
        );
        assert_eq!(
            StratifiedGroup::preset(Preset::Engel).homogeneous_dimension(),
            7
        );
        assert_eq!(
            StratifiedGroup::preset(Preset::FreeStep2(3)).homogeneous_dimension(),
            3 + 2 * 3
        );
    }

    #[test]
    fn dilations() {
        let g = h1();
        assert_eq!(g.dilate(2.0, &[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 2.0, 4.0]);
        assert_eq!(g.dilate(1.0, &[0.3, -0.4, 0.9]).unwrap(), vec![0.3, -0.4, 0.9]);
        let e = StratifiedGroup::preset(Preset::Engel);
        assert_eq!(
            e.dilate(3.0, &[1.0, 0.0, 1.0, 1.0]).unwrap(),
            vec![3.0, 0.0, 9.0, 27.0]
        );
        assert!(matches!(
            g.dilate(0.0, &[0.0; 3]),
            Err(GroupError::NonPositiveLambda(_))
        ));
    }

    #[test]
    fn group_law_examples() {
        let g = h1();
        let z = g.multiply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(z, vec![1.0, 1.0, 0.5]);
        let z = g.multiply(&[0.2, -0.4, 0.7], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(z, vec![0.2, -0.4, 0.7]);
        let r3 = StratifiedGroup::preset(Preset::Euclidean(3));
        assert_eq!(
            r3.multiply(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(),
            vec![5.0, 7.0, 9.0]
        );
    }

    #[test]
    fn law_is_associative_with_identity_and_inverse() {
        for g in [
            h1(),
            StratifiedGroup::preset(Preset::Engel),
            StratifiedGroup::preset(Preset::FreeStep2(3)),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..20 {
                let n = g.dim();
                let rnd = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
                };
                let (x, y, w) = (rnd(&mut rng), rnd(&mut rng), rnd(&mut rng));
                let a = g.multiply(&g.multiply(&x, &y).unwrap(), &w).unwrap();
                let b = g.multiply(&x, &g.multiply(&y, &w).unwrap()).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-12);
                }
                let inv = g.inverse(&x).unwrap();
                let id = g.multiply(&x, &inv).unwrap();
                assert!(id.iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn dilation_is_automorphism() {
        for g in [h1(), StratifiedGroup::preset(Preset::Engel)] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let n = g.dim();
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let lam = rng.gen_range(0.2..3.0);
                let lhs = g.dilate(lam, &g.multiply(&x, &y).unwrap()).unwrap();
                let rhs = g
                    .multiply(&g.dilate(lam, &x).unwrap(), &g.dilate(lam, &y).unwrap())
                    .unwrap();
                for (u, v) in lhs.iter().zip(&rhs) {
                    assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dilation_composition_law() {
        for g in [h1(), StratifiedGroup::preset(Preset::Engel)] {
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            let n = g.dim();
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let lam = rng.gen_range(0.2..2.0);
                let mu = rng.gen_range(0.2..2.0);
                let once = g.dilate(lam * mu, &x).unwrap();
                let twice = g.dilate(lam, &g.dilate(mu, &x).unwrap()).unwrap();
                for (u, v) in once.iter().zip(&twice) {
                    assert!((u - v).abs() < 1e-14 * (1.0 + u.abs()));
                }
            }
        }
    }

    #[test]
    fn h1_bracket_is_d3() {
        let g = h1();
        let b = lie_bracket(g.generator(0), g.generator(1));
        assert!(b.coeff(0).is_zero());
        assert!(b.coeff(1).is_zero());
        assert_eq!(b.coeff(2), &Polynomial::from_i64(3, 1, 1));
    }

    #[test]
    fn bracket_antisymmetry_and_jacobi() {
        for g in [StratifiedGroup::preset(Preset::Engel), StratifiedGroup::preset(Preset::FreeStep2(3))] {
            let gens = g.generators();
            for v in gens {
                assert!(lie_bracket(v, v).is_zero());
            }
            // Jacobi on triples of generators, symbolically zero
            for a in gens {
                for b in gens {
                    for c in gens {
                        let j = lie_bracket(a, &lie_bracket(b, c))
                            .coeffs()
                            .iter()
                            .zip(lie_bracket(b, &lie_bracket(c, a)).coeffs())
                            .zip(lie_bracket(c, &lie_bracket(a, b)).coeffs())
                            .all(|((p1, p2), p3)| p1.add(p2).add(p3).is_zero());
                        assert!(j);
                    }
                }
            }
        }
    }

    #[test]
    fn euclidean_fields_commute() {
        let g = StratifiedGroup::preset(Preset::Euclidean(3));
        let b = lie_bracket(g.generator(0), g.generator(1));
        assert!(b.is_zero());
    }

    #[test]
    fn hoermander_ranks() {
        assert_eq!(h1().hoermander_rank(&[0.0, 0.0, 0.0]), 3);
        assert_eq!(
            StratifiedGroup::preset(Preset::Euclidean(3)).hoermander_rank(&[0.5, -1.0, 2.0]),
            3
        );
        assert_eq!(
            StratifiedGroup::preset(Preset::Engel).hoermander_rank(&[0.0; 4]),
            4
        );
    }

    #[test]
    fn generators_are_divergence_free() {
        for g in [
            h1(),
            StratifiedGroup::preset(Preset::Engel),
            StratifiedGroup::preset(Preset::FreeStep2(3)),
        ] {
            for v in g.generators() {
                assert!(v.euclidean_divergence().is_zero());
            }
            // brackets too
            for a in g.generators() {
                for b in g.generators() {
                    assert!(lie_bracket(a, b).euclidean_divergence().is_zero());
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(
            StratifiedGroupSpec::custom("bad", vec![2, 0], vec![]),
            Err(GroupError::BadStrata(_))
        ));

        // x1 has weighted degree 1, not the required 1 for l=2? degree must be l-1=1,
        // so a constant violates homogeneity.
        let spec = StratifiedGroupSpec::custom(
            "bad2",
            vec![2, 1],
            vec![(1, 2, 1, Polynomial::from_i64(3, 1, 1))],
        )
        .unwrap();
        assert!(matches!(
            build_group(spec),
            Err(GroupError::HomogeneityViolation { .. })
        ));

        // abelian-looking spec with a second stratum never spans
       let spec = StratifiedGroupSpec::custom("bad3", vec![2, 1], vec![]).unwrap();
        assert!(matches!(
            build_group(spec),
            Err(GroupError::RankDeficient { .. })
        ));
    }

    #[test]
    fn custom_step3_spec_has_no_law() {
        // a hand-entered Engel without the preset tag gets fields but no law
        let (_, strata, entries) = preset_data(Preset::Engel);
        let spec = StratifiedGroupSpec::custom("myengel", strata, entries).unwrap();
        let g = build_group(spec).unwrap();
        assert!(matches!(
            g.multiply(&[0.0; 4], &[0.0; 4]),
            Err(GroupError::UnsupportedGroupLaw)
        ));
    }
}

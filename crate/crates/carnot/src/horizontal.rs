//! Horizontal differential operators: vector-field application, the
//! horizontal gradient, the p-sub-Laplacian and the infinity-sub-Laplacian.
//!
//! Everything here differentiates symbolically on the expression AST;
//! finite differences appear only as test oracles.

use crate::expr::{EvalError, Expression};
use crate::group::{poly_to_expression, StratifiedGroup, VectorField};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HorizontalError {
    #[error("singular gradient: |grad u| = 0 with p < 2 at this point")]
    SingularGradient,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The horizontal vector (X_1 u, ..., X_{N_1} u) at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalVector(pub Vec<f64>);

impl HorizontalVector {
    pub fn dot(&self, other: &HorizontalVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// V u = sum_j c_j du/dx_j, simplified on construction.
pub fn apply_vector_field(v: &VectorField, u: &Expression) -> Expression {
    let mut acc = Expression::num(0.0);
    for (j, c) in v.coeffs().iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let du = u.diff(j);
        if du.is_zero() {
            continue;
        }
        acc = Expression::add(acc, Expression::mul(poly_to_expression(c), du));
    }
    acc
}

/// Symbolic components of the horizontal gradient (X_1 u, ..., X_{N_1} u).
pub fn grad_exprs(g: &StratifiedGroup, u: &Expression) -> Vec<Expression> {
    g.generators()
        .iter()
        .map(|v| apply_vector_field(v, u))
        .collect()
}

/// |grad_G u|^2 as an expression.
pub fn grad_norm_sq_expr(g: &StratifiedGroup, u: &Expression) -> Expression {
    Expression::sum(
        grad_exprs(g, u)
            .into_iter()
            .map(|c| Expression::mul(c.clone(), c)),
    )
}

/// (|grad u|^2 + eps^2)^{(p-2)/2}; folds to 1 for p = 2.
pub fn p_weight_expr(grad_sq: Expression, p: f64, eps: f64) -> Expression {
    let base = if eps == 0.0 {
        grad_sq
    } else {
        Expression::add(grad_sq, Expression::num(eps * eps))
    };
    Expression::pow(base, Expression::num((p - 2.0) / 2.0))
}

/// The horizontal gradient at a point.
pub fn horizontal_gradient(
    g: &StratifiedGroup,
    u: &Expression,
    x: &[f64],
) -> Result<HorizontalVector, EvalError> {
    let mut comps = Vec::with_capacity(g.first_stratum());
    for v in g.generators() {
        comps.push(apply_vector_field(v, u).eval(x)?);
    }
    Ok(HorizontalVector(comps))
}

/// The p-sub-Laplacian at a point, expanded by the product rule into
/// sum_k X_k(w^{p-2} X_k u) with w = (|grad u|^2 + eps^2)^{1/2} and the
/// second derivatives X_k X_j u taken symbolically. For p = 2 this reduces
/// exactly to sum_k X_k X_k u.
pub fn p_sub_laplacian(
    g: &StratifiedGroup,
    u: &Expression,
    p: f64,
    x: &[f64],
    eps: f64,
) -> Result<f64, HorizontalError> {
    assert!(p > 1.0, "p must exceed 1");
    let n1 = g.first_stratum();
    let firsts: Vec<Expression> = grad_exprs(g, u);
    let mut grad = Vec::with_capacity(n1);
    for e in &firsts {
        grad.push(e.eval(x)?);
    }
    // hess[k][j] = (X_k X_j u)(x)
    let mut trace = 0.0;
    let mut hess = vec![vec![0.0; n1]; n1];
    for (j, fj) in firsts.iter().enumerate() {
        for (k, gen) in g.generators().iter().enumerate() {
            let v = apply_vector_field(gen, fj).eval(x)?;
            hess[k][j] = v;
            if k == j {
                trace += v;
            }
        }
    }
    if p == 2.0 {
        return Ok(trace);
    }
    let g2: f64 = grad.iter().map(|v| v * v).sum();
    let w2 = g2 + eps * eps;
    if w2 == 0.0 {
        // the product-rule terms vanish in the limit for p > 2
        if p > 2.0 {
            return Ok(0.0);
        }
        return Err(HorizontalError::SingularGradient);
    }
    let w = w2.sqrt();
    let mut mixed = 0.0;
    for k in 0..n1 {
        for j in 0..n1 {
            mixed += grad[k] * grad[j] * hess[k][j];
        }
    }
    Ok(w.powf(p - 2.0) * trace + (p - 2.0) * w.powf(p - 4.0) * mixed)
}

/// Full symbolic expression for sum_k X_k(w^{p-2} X_k u); polynomial for
/// even integer p on polynomial u, and exactly sum_k X_k X_k u at p = 2.
pub fn p_sub_laplacian_expr(g: &StratifiedGroup, u: &Expression, p: f64, eps: f64) -> Expression {
    let firsts = grad_exprs(g, u);
    let grad_sq = Expression::sum(
        firsts
            .iter()
            .map(|c| Expression::mul(c.clone(), c.clone())),
    );
    let weight = p_weight_expr(grad_sq, p, eps);
    let mut acc = Expression::num(0.0);
    for (k, gen) in g.generators().iter().enumerate() {
        let flux_k = Expression::mul(weight.clone(), firsts[k].clone());
        acc = Expression::add(acc, apply_vector_field(gen, &flux_k));
    }
    acc
}

/// |grad u(x)|^{p-2} sum_k X_k u X_k v: the integrand of the weak form and
/// of Green's first identity.
pub fn weighted_gradient_pairing(
    g: &StratifiedGroup,
    u: &Expression,
    v: &Expression,
    x: &[f64],
    p: f64,
) -> Result<f64, HorizontalError> {
    let gu = horizontal_gradient(g, u, x)?;
    let gv = horizontal_gradient(g, v, x)?;
    let dot = gu.dot(&gv);
    if p == 2.0 {
        return Ok(dot);
    }
    let norm = gu.norm();
    if norm == 0.0 {
        if p > 2.0 {
            return Ok(0.0);
        }
        return Err(HorizontalError::SingularGradient);
    }
    Ok(norm.powf(p - 2.0) * dot)
}

/// L_inf d = (1/2) grad|grad d|^2 . grad d, all gradients horizontal.
pub fn infinity_sub_laplacian(
    g: &StratifiedGroup,
    d: &Expression,
    x: &[f64],
) -> Result<f64, HorizontalError> {
    Ok(InfinityLaplacian::new(g, d).eval(x)?)
}

/// Precomputed symbolic form of L_inf d, for repeated evaluation.
pub struct InfinityLaplacian {
    terms: Vec<(Expression, Expression)>,
}

impl InfinityLaplacian {
    pub fn new(g: &StratifiedGroup, d: &Expression) -> Self {
        let firsts = grad_exprs(g, d);
        let w2 = Expression::sum(
            firsts
                .iter()
                .map(|c| Expression::mul(c.clone(), c.clone())),
        );
        let terms = g
            .generators()
            .iter()
            .zip(&firsts)
            .map(|(gen, dk)| (apply_vector_field(gen, &w2), dk.clone()))
            .collect();
        InfinityLaplacian { terms }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (dw2, dk) in &self.terms {
            acc += dw2.eval(x)? * dk.eval(x)?;
        }
        Ok(0.5 * acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::group::Preset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h1() -> StratifiedGroup {
        StratifiedGroup::preset(Preset::Heisenberg(1))
    }

    #[test]
    fn vector_field_application() {
        let g = h1();
        let u = parse_expression("x3").unwrap();
        let e = apply_vector_field(g.generator(0), &u);
        // X_1 x3 = -x2/2
        for x2 in [-1.0, 0.0, 2.5] {
            assert_eq!(e.eval(&[0.3, x2, 0.9]).unwrap(), -x2 / 2.0);
        }
        let c = parse_expression("7").unwrap();
        assert!(apply_vector_field(g.generator(1), &c).is_zero());

        let r2 = StratifiedGroup::preset(Preset::Euclidean(2));
        let u = parse_expression("x1^2").unwrap();
        let d = apply_vector_field(r2.generator(0), &u);
        assert_eq!(d.eval(&[3.0, 0.0]).unwrap(), 6.0);
    }

    #[test]
    fn gradient_examples() {
        let g = h1();
        let u = parse_expression("x3").unwrap();
        let hv = horizontal_gradient(&g, &u, &[0.0, 2.0, 0.0]).unwrap();
        assert_eq!(hv, HorizontalVector(vec![-1.0, 0.0]));

        let r2 = StratifiedGroup::preset(Preset::Euclidean(2));
        let u = parse_expression("x1^2 + x2^2").unwrap();
        let hv = horizontal_gradient(&r2, &u, &[1.0, 1.0]).unwrap();
        assert_eq!(hv, HorizontalVector(vec![2.0, 2.0]));

        let c = parse_expression("4").unwrap();
        let hv = horizontal_gradient(&g, &c, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(hv.norm(), 0.0);
    }

    #[test]
    fn symbolic_gradient_matches_finite_differences() {
        let g = h1();
        let samples = [
            "x1^2*x3 + x2",
            "sin(x1)*x2 + exp(x3/4)",
            "sqrt(1 + x1^2 + x2^2)",
            "x1*x2*x3",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for s in samples {
            let u = parse_expression(s).unwrap();
            for _ in 0..50 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let hv = horizontal_gradient(&g, &u, &x).unwrap();
                for (k, gen) in g.generators().iter().enumerate() {
                    // central differences along each coordinate direction
                    let h = 1e-5;
                    let mut fd = 0.0;
                    for j in 0..3 {
                        let c = gen.eval_coeff(j, &x);
                        if c == 0.0 {
                            continue;
                        }
                        let mut xp = x.clone();
                        xp[j] += h;
                        let mut xm = x.clone();
                        xm[j] -= h;
                        fd += c * (u.eval(&xp).unwrap() - u.eval(&xm).unwrap()) / (2.0 * h);
                    }
                    let tol = 1e-6_f64.max(1e-6 * hv.0[k].abs());
                    assert!(
                        (hv.0[k] - fd).abs() < tol,
                        "{s}: component {k} symbolic {} vs fd {fd}",
                        hv.0[k]
                    );
                }
            }
        }
    }

    #[test]
    fn p_laplacian_examples() {
        let r2 = StratifiedGroup::preset(Preset::Euclidean(2));
        let u = parse_expression("x1^2 + x2^2").unwrap();
        let v = p_sub_laplacian(&r2, &u, 2.0, &[0.7, -0.3], 0.0).unwrap();
        assert!((v - 4.0).abs() < 1e-14);

        let g = h1();
        let u = parse_expression("x3").unwrap();
        let v = p_sub_laplacian(&g, &u, 2.0, &[0.4, 0.1, -0.9], 0.0).unwrap();
        assert!(v.abs() < 1e-14);

        let r1 = StratifiedGroup::preset(Preset::Euclidean(1));
        let u = parse_expression("x1^2").unwrap();
        let v = p_sub_laplacian(&r1, &u, 3.0, &[1.0], 0.0).unwrap();
        assert!((v - 8.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn p_laplacian_singular_gradient() {
        let r1 = StratifiedGroup::preset(Preset::Euclidean(1));
        let u = parse_expression("x1^2").unwrap();
        assert!(matches!(
            p_sub_laplacian(&r1, &u, 1.5, &[0.0], 0.0),
            Err(HorizontalError::SingularGradient)
        ));
        // p > 2 takes the limit value 0
        assert_eq!(p_sub_laplacian(&r1, &u, 3.0, &[0.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn p2_reduces_to_iterated_fields() {
        let g = h1();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = parse_expression("x1^2*x2 + x3^2 - x1*x3").unwrap();
        let expr = p_sub_laplacian_expr(&g, &u, 2.0, 0.0);
        for _ in 0..30 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = p_sub_laplacian(&g, &u, 2.0, &x, 0.0).unwrap();
            let b = expr.eval(&x).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn eps_regularization_converges() {
        let g = h1();
        let u = parse_expression("x1^2 + x2*x3").unwrap();
        let x = [0.4, -0.2, 0.6];
        let p = 2.7;
        let mut values = Vec::new();
        let mut eps = 1e-2;
        while eps >= 1e-8 {
            values.push(p_sub_laplacian(&g, &u, p, &x, eps).unwrap());
            eps /= 10.0;
        }
        let exact = p_sub_laplacian(&g, &u, p, &x, 0.0).unwrap();
        let mut last_gap = f64::INFINITY;
        for v in values {
            let gap = (v - exact).abs();
            assert!(gap < last_gap || gap < 1e-12);
            last_gap = gap;
        }
    }

    #[test]
    fn pairing_examples() {
        let g = h1();
        let u = parse_expression("x1^2 + x3").unwrap();
        let x = [0.3, 0.5, -0.2];
        let self_pair = weighted_gradient_pairing(&g, &u, &u, &x, 2.0).unwrap();
        let hv = horizontal_gradient(&g, &u, &x).unwrap();
        assert!((self_pair - hv.norm_sq()).abs() < 1e-14);

        let c = parse_expression("5").unwrap();
        assert_eq!(weighted_gradient_pairing(&g, &u, &c, &x, 2.0).unwrap(), 0.0);

        let u = parse_expression("x1").unwrap();
        let v = parse_expression("x3").unwrap();
        let pair = weighted_gradient_pairing(&g, &u, &v, &[0.0, 2.0, 0.0], 2.0).unwrap();
        assert_eq!(pair, -1.0);
    }

    #[test]
    fn infinity_laplacian_examples() {
        let r2 = StratifiedGroup::preset(Preset::Euclidean(2));
        let d = parse_expression("sqrt(x1^2 + x2^2)").unwrap();
        let v = infinity_sub_laplacian(&r2, &d, &[1.0, 0.0]).unwrap();
        assert!(v.abs() < 1e-14);

        let g = h1();
        let c = parse_expression("3").unwrap();
        assert_eq!(infinity_sub_laplacian(&g, &c, &[1.0, 1.0, 1.0]).unwrap(), 0.0);

        // Kaplan gauge on H^1: polarizable, so L_inf d vanishes off the pole
        let d = parse_expression("pow((x1^2 + x2^2)^2 + 16*x3^2, 0.25)").unwrap();
        let v = infinity_sub_laplacian(&g, &d, &[1.0, 1.0, 1.0]).unwrap();
        assert!(v.abs() < 1e-8, "got {v}");
    }
}

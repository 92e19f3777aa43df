//! Picone's identity L(u,v) = R(u,v) >= 0, the Hardy-type inequality, and
//! the Diaz-Saa inequality, evaluated pointwise and in quadrature.
//!
//! The nonlinearity f is a one-variable expression in x1 subject to the
//! admissibility bound (p-1)|f(t)|^{(p-2)/(p-1)} <= f'(t), machine-checked
//! on a log grid at construction. Gradients are obtained symbolically; the
//! quotient rule in R is expanded in closed form so the identity check is
//! a pure floating-point algebra statement.

use crate::domain::{Domain, DomainError};
use crate::expr::{EvalError, Expression};
use crate::greens::IdentityReport;
use crate::group::StratifiedGroup;
use crate::horizontal::{grad_exprs, p_sub_laplacian_expr};
use crate::integrate::{volume_integral, IntegrateError};
use crate::quadrature::QuadratureRule;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PiconeError {
    #[error("inadmissible nonlinearity: (p-1)|f|^((p-2)/(p-1)) = {lhs:.6e} > f' = {rhs:.6e} at t = {t:.6e}")]
    Inadmissible { t: f64, lhs: f64, rhs: f64 },
    #[error("nonlinearity must map (0,inf) to (0,inf): f({t:.3e}) = {value:.3e}")]
    NonpositiveF { t: f64, value: f64 },
    #[error("nonlinearity is not locally Lipschitz near t = {0:.3e}")]
    NotLipschitz(f64),
    #[error("v must be positive: v = {value:.3e} at {point:?}")]
    NonpositiveV { point: Vec<f64>, value: f64 },
    #[error("input must be positive: {value:.3e} at {point:?}")]
    NonpositiveInput { point: Vec<f64>, value: f64 },
    #[error("v is not bounded below by a positive constant (min = {0:.3e})")]
    VNotBoundedBelow(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A locally Lipschitz f: (0,inf) -> (0,inf) with
/// (p-1)|f(t)|^{(p-2)/(p-1)} <= f'(t), validated on a 2000-point log grid
/// over [1e-6, 1e6] at construction.
#[derive(Clone, Debug)]
pub struct AdmissibleNonlinearity {
    f: Expression,
    df: Expression,
    p: f64,
}

impl AdmissibleNonlinearity {
    pub fn new(f: Expression, p: f64) -> Result<Self, PiconeError> {
        assert!(p > 1.0);
        let df = f.diff(0);
        let grid = 2000;
        let (lo, hi) = (1e-6f64, 1e6f64);
        let ratio = (hi / lo).ln() / (grid - 1) as f64;
        for i in 0..grid {
            let t = lo * (ratio * i as f64).exp();
            let fv = f.eval(&[t])?;
            if !(fv > 0.0) || !fv.is_finite() {
                return Err(PiconeError::NonpositiveF { t, value: fv });
            }
            let dfv = df.eval(&[t]).map_err(|_| PiconeError::NotLipschitz(t))?;
            if !dfv.is_finite() {
                return Err(PiconeError::NotLipschitz(t));
            }
            let lhs = (p - 1.0) * fv.abs().powf((p - 2.0) / (p - 1.0));
            let slack = 1e-12 * (1.0 + lhs.abs() + dfv.abs());
            if lhs > dfv + slack {
                return Err(PiconeError::Inadmissible { t, lhs, rhs: dfv });
            }
        }
        Ok(AdmissibleNonlinearity { f, df, p })
    }

    /// The canonical choice f(t) = t^{p-1} (equality in the bound).
    pub fn canonical(p: f64) -> Self {
        let f = Expression::pow(Expression::coord(0), Expression::num(p - 1.0));
        AdmissibleNonlinearity::new(f, p).expect("t^{p-1} is admissible")
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn expression(&self) -> &Expression {
        &self.f
    }

    pub fn f_at(&self, t: f64) -> Result<f64, EvalError> {
        self.f.eval(&[t])
    }

    pub fn df_at(&self, t: f64) -> Result<f64, EvalError> {
        self.df.eval(&[t])
    }

    /// f(v) as an expression in the group coordinates.
    pub fn compose(&self, v: &Expression) -> Expression {
        self.f.substitute_coords(std::slice::from_ref(v))
    }
}

fn sgn_pow(t: f64, q: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(q)
    }
}

/// |g|^{p-2} (g . h) with the limit value 0 when g vanishes (the product
/// |g|^{p-1}|h| tends to 0 for every p > 1).
fn weighted_dot(gnorm: f64, dot: f64, p: f64) -> f64 {
    if gnorm == 0.0 {
        0.0
    } else {
        gnorm.powf(p - 2.0) * dot
    }
}

/// Precomputed symbolic gradients for repeated pointwise Picone evaluation.
pub struct PiconeEvaluator {
    u: Expression,
    v: Expression,
    grads_u: Vec<Expression>,
    grads_v: Vec<Expression>,
}

impl PiconeEvaluator {
    pub fn new(g: &StratifiedGroup, u: &Expression, v: &Expression) -> Self {
        PiconeEvaluator {
            u: u.clone(),
            v: v.clone(),
            grads_u: grad_exprs(g, u),
            grads_v: grad_exprs(g, v),
        }
    }

    /// (L, R) at a point.
    pub fn at(&self, af: &AdmissibleNonlinearity, x: &[f64]) -> Result<(f64, f64), PiconeError> {
        let p = af.p;
        let uv = self.u.eval(x)?;
        let vv = self.v.eval(x)?;
        if !(vv > 0.0) {
            return Err(PiconeError::NonpositiveV {
                point: x.to_vec(),
                value: vv,
            });
        }
        let fv = af.f_at(vv)?;
        if !(fv > 0.0) {
            return Err(PiconeError::NonpositiveF { t: vv, value: fv });
        }
        let dfv = af.df_at(vv)?;
        let gu: Vec<f64> = self
            .grads_u
            .iter()
            .map(|e| e.eval(x))
            .collect::<Result<_, _>>()?;
        let gv: Vec<f64> = self
            .grads_v
            .iter()
            .map(|e| e.eval(x))
            .collect::<Result<_, _>>()?;
        let nu: f64 = gu.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv: f64 = gv.iter().map(|a| a * a).sum::<f64>().sqrt();
        let dot: f64 = gu.iter().zip(&gv).map(|(a, b)| a * b).sum();

        let abs_u_p = uv.abs().powf(p);
        let l = nu.powf(p) - p * sgn_pow(uv, p - 1.0) / fv * weighted_dot(nv, dot, p)
            + dfv * abs_u_p / (fv * fv) * nv.powf(p);

        // grad(|u|^p / f(v)) . |grad v|^{p-2} grad v, quotient rule expanded
        let quot = if nv == 0.0 {
            0.0
        } else {
            let grad_dot =
                p * sgn_pow(uv, p - 1.0) * fv * dot - abs_u_p * dfv * (nv * nv);
            nv.powf(p - 2.0) * grad_dot / (fv * fv)
        };
        let r = nu.powf(p) - quot;
        Ok((l, r))
    }
}

/// L(u,v) at a point.
pub fn picone_l(
    g: &StratifiedGroup,
    u: &Expression,
    v: &Expression,
    af: &AdmissibleNonlinearity,
    x: &[f64],
) -> Result<f64, PiconeError> {
    Ok(PiconeEvaluator::new(g, u, v).at(af, x)?.0)
}

/// R(u,v) at a point.
pub fn picone_r(
    g: &StratifiedGroup,
    u: &Expression,
    v: &Expression,
    af: &AdmissibleNonlinearity,
    x: &[f64],
) -> Result<f64, PiconeError> {
    Ok(PiconeEvaluator::new(g, u, v).at(af, x)?.1)
}

/// Sample the identity over seeded interior points. In the report, lhs is
/// max |L - R|, rhs is 0, min_pointwise is min R, max_pointwise is max |L|.
pub fn picone_scan(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    v: &Expression,
    af: &AdmissibleNonlinearity,
    n_samples: usize,
    seed: u64,
) -> Result<IdentityReport, PiconeError> {
    let eval = PiconeEvaluator::new(g, u, v);
    let points = dom.sample_interior(n_samples, seed);
    let mut max_gap: f64 = 0.0;
    let mut min_r = f64::INFINITY;
    let mut max_l: f64 = 0.0;
    for x in &points {
        let (l, r) = eval.at(af, x)?;
        max_gap = max_gap.max((l - r).abs());
        min_r = min_r.min(r);
        max_l = max_l.max(l.abs());
    }
    Ok(IdentityReport::new(max_gap, 0.0, min_r, max_l, points.len(), 0))
}

/// Pass criterion for a scan report: max|L-R| <= 1e-9 (1 + max|L|) and
/// min R >= -1e-9.
pub fn picone_scan_passes(report: &IdentityReport) -> bool {
    report.lhs <= 1e-9 * (1.0 + report.max_pointwise) && report.min_pointwise >= -1e-9
}

/// int |grad_G u|^p dx - int (|u|^p / f(v)) (-L_p v) dx with u = profile
/// times the built-in boundary bump; the Hardy-type lemma predicts >= 0.
pub fn hardy_gap(
    g: &StratifiedGroup,
    dom: &Domain,
    profile: &Expression,
    v: &Expression,
    af: &AdmissibleNonlinearity,
    rule: &QuadratureRule,
) -> Result<f64, PiconeError> {
    let p = af.p;
    let u = Expression::mul(profile.clone(), dom.bump_expr());

    // v >= eps > 0 sampled on the quadrature nodes
    let mut min_v = f64::INFINITY;
    {
        let mut err: Option<EvalError> = None;
        rule.for_each_node(dom.dim(), |uu, _| {
            if err.is_some() {
                return;
            }
            let (x, _) = dom.volume_node(uu);
            match v.eval(&x) {
                Ok(val) => min_v = min_v.min(val),
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    if !(min_v > 0.0) {
        return Err(PiconeError::VNotBoundedBelow(min_v));
    }

    let grad_sq = Expression::sum(
        grad_exprs(g, &u)
            .into_iter()
            .map(|c| Expression::mul(c.clone(), c)),
    );
    let energy = Expression::pow(grad_sq, Expression::num(p / 2.0));
    let lhs = volume_integral(dom, &energy, rule)?;

    let lp_v = p_sub_laplacian_expr(g, v, p, 0.0);
    let weight = Expression::div(
        Expression::pow(Expression::abs(u.clone()), Expression::num(p)),
        af.compose(v),
    );
    let rhs_integrand = Expression::mul(weight, Expression::neg(lp_v));
    let rhs = volume_integral(dom, &rhs_integrand, rule)?;
    Ok(lhs - rhs)
}

/// int (-L_p u1 / u1^{p-1} + L_p u2 / u2^{p-1}) (u1^p - u2^p) dx; the
/// Diaz-Saa inequality predicts >= 0 when u1 and u2 share boundary values.
pub fn diaz_saa_gap(
    g: &StratifiedGroup,
    dom: &Domain,
    u1: &Expression,
    u2: &Expression,
    p: f64,
    rule: &QuadratureRule,
) -> Result<f64, PiconeError> {
    // positivity of both inputs on the quadrature nodes
    let mut bad: Option<(Vec<f64>, f64)> = None;
    {
        let mut err: Option<EvalError> = None;
        rule.for_each_node(dom.dim(), |uu, _| {
            if err.is_some() || bad.is_some() {
                return;
            }
            let (x, _) = dom.volume_node(uu);
            for e in [u1, u2] {
                match e.eval(&x) {
                    Ok(val) if val > 0.0 => {}
                    Ok(val) => {
                        bad = Some((x.clone(), val));
                        return;
                    }
                    Err(e) => {
                        err = Some(e);
                        return;
                    }
                }
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    if let Some((point, value)) = bad {
        return Err(PiconeError::NonpositiveInput { point, value });
    }

    let lp1 = p_sub_laplacian_expr(g, u1, p, 0.0);
    let lp2 = p_sub_laplacian_expr(g, u2, p, 0.0);
    let frac = |lp: Expression, u: &Expression| {
        Expression::div(
            lp,
            Expression::pow(u.clone(), Expression::num(p - 1.0)),
        )
    };
    let bracket = Expression::add(
        Expression::neg(frac(lp1, u1)),
        frac(lp2, u2),
    );
    let diff = Expression::sub(
        Expression::pow(u1.clone(), Expression::num(p)),
        Expression::pow(u2.clone(), Expression::num(p)),
    );
    let integrand = Expression::mul(bracket, diff);
    Ok(volume_integral(dom, &integrand, rule)?)
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
    fn canonical_nonlinearity_is_admissible() {
        for p in [1.5, 2.0, 2.5, 3.0, 4.0] {
            AdmissibleNonlinearity::canonical(p);
        }
    }

    #[test]
    fn squared_power_is_rejected() {
        for p in [2.0, 2.5, 3.0] {
            let f = Expression::pow(
                Expression::coord(0),
                Expression::num(2.0 * (p - 1.0)),
            );
            assert!(matches!(
                AdmissibleNonlinearity::new(f, p),
                Err(PiconeError::Inadmissible { .. })
            ));
        }
    }

    #[test]
    fn shifted_canonical_is_admissible_below_p2() {
        // f = t^{p-1} + c is admissible only for p < 2
        let f = Expression::add(
            Expression::pow(Expression::coord(0), Expression::num(0.5)),
            Expression::num(1.0),
        );
        assert!(AdmissibleNonlinearity::new(f.clone(), 1.5).is_ok());
        let f3 = Expression::add(
            Expression::pow(Expression::coord(0), Expression::num(2.0)),
            Expression::num(1.0),
        );
        assert!(AdmissibleNonlinearity::new(f3, 3.0).is_err());
    }

    #[test]
    fn equality_case_r_vanishes() {
        let g = h1();
        let af = AdmissibleNonlinearity::canonical(2.5);
        let v = parse_expression("1 + x1^2 + x2^2").unwrap();
        let eval = PiconeEvaluator::new(&g, &v, &v);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (l, r) = eval.at(&af, &x).unwrap();
            assert!(r.abs() < 1e-12 * (1.0 + l.abs()), "R = {r}");
            assert!(l.abs() < 1e-12 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn hand_expansion_oracle_euclidean() {
        // p=2, f=t, u = x+1, v = 1+x^2 at x=1: L = R = 1
        let g = StratifiedGroup::preset(Preset::Euclidean(1));
        let af = AdmissibleNonlinearity::new(Expression::coord(0), 2.0).unwrap();
        let u = parse_expression("x1 + 1").unwrap();
        let v = parse_expression("1 + x1^2").unwrap();
        let l = picone_l(&g, &u, &v, &af, &[1.0]).unwrap();
        let r = picone_r(&g, &u, &v, &af, &[1.0]).unwrap();
        assert!((l - 1.0).abs() < 1e-14, "L = {l}");
        assert!((r - 1.0).abs() < 1e-14, "R = {r}");
    }

    #[test]
    fn vanishing_gradient_of_u() {
        // grad u = 0, u != 0: L reduces to f'(v)|u|^p |grad v|^p / f(v)^2
        let g = StratifiedGroup::preset(Preset::Euclidean(2));
        let af = AdmissibleNonlinearity::canonical(3.0);
        let u = parse_expression("2").unwrap();
        let v = parse_expression("1 + x1").unwrap();
        let x = [0.5, 0.0];
        let (l, r) = PiconeEvaluator::new(&g, &u, &v).at(&af, &x).unwrap();
        let vv = 1.5f64;
        let expect = 2.0 * vv.powf(1.0) * 8.0 / vv.powf(4.0); // f' |u|^3 |gv|^3 / f^2
        assert!((l - expect).abs() < 1e-12, "{l} vs {expect}");
        assert!((l - r).abs() < 1e-13);
        assert!(r >= 0.0);
    }

    #[test]
    fn nonpositive_v_is_an_error() {
        let g = h1();
        let af = AdmissibleNonlinearity::canonical(2.0);
        let u = parse_expression("x1").unwrap();
        let v = parse_expression("x2").unwrap();
        assert!(matches!(
            picone_l(&g, &u, &v, &af, &[0.1, -0.3, 0.0]),
            Err(PiconeError::NonpositiveV { .. })
        ));
    }

    #[test]
    fn scan_on_h1() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let af = AdmissibleNonlinearity::canonical(2.5);
        let u = parse_expression("x1^2*x3 - x2 + 0.3*x1*x2").unwrap();
        let v = parse_expression("1 + x1^2 + x2^2").unwrap();
        let rep = picone_scan(&g, &dom, &u, &v, &af, 10_000, 99).unwrap();
        assert!(picone_scan_passes(&rep), "gap {}, minR {}", rep.lhs, rep.min_pointwise);
        assert_eq!(rep.sample_count, 10_000);
    }

    #[test]
    fn hardy_gap_examples() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(10);
        let af2 = AdmissibleNonlinearity::new(Expression::coord(0), 2.0).unwrap();

        // zero profile: gap is exactly 0
        let zero = parse_expression("0").unwrap();
        let v = parse_expression("2 + x1^2").unwrap();
        let gap = hardy_gap(&g, &dom, &zero, &v, &af2, &rule).unwrap();
        assert_eq!(gap, 0.0);

        // -L_p v = 0 pointwise: the gap reduces to the u-energy, positive
        let one = parse_expression("1").unwrap();
        let vlin = parse_expression("2 + x1").unwrap();
        let gap = hardy_gap(&g, &dom, &one, &vlin, &af2, &rule).unwrap();
        let u = Expression::mul(one.clone(), dom.bump_expr());
        let energy = crate::integrate::energy_seminorm(&g, &dom, &u, 2.0, &rule).unwrap();
        assert!((gap - energy * energy).abs() < 1e-12);
        assert!(gap > 0.0);

        // the lemma's prediction on a curved v
        let gap = hardy_gap(&g, &dom, &one, &v, &af2, &rule).unwrap();
        assert!(gap >= -1e-9, "gap {gap}");
    }

    #[test]
    fn diaz_saa_examples() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(10);
        let bump = dom.bump_expr();
        let u1 = Expression::add(Expression::num(1.0), bump.clone());
        // equal inputs: integrand vanishes identically
        let gap = diaz_saa_gap(&g, &dom, &u1, &u1, 2.0, &rule).unwrap();
        assert!(gap.abs() < 1e-14);

        // scaling invariance: L_p(cu) = c^{p-1} L_p u makes both fractions agree
        let u2 = Expression::mul(Expression::num(2.0), u1.clone());
        let gap = diaz_saa_gap(&g, &dom, &u1, &u2, 2.0, &rule).unwrap();
        assert!(gap.abs() < 1e-11, "gap {gap}");

        let u3 = Expression::add(
            Expression::num(1.0),
            Expression::mul(Expression::num(2.0), Expression::mul(bump.clone(), bump)),
        );
        let gap = diaz_saa_gap(&g, &dom, &u1, &u3, 2.0, &rule).unwrap();
        assert!(gap >= -1e-8, "gap {gap}");

        // nonpositive input rejected
        let neg = parse_expression("x1 - 2").unwrap();
        assert!(matches!(
            diaz_saa_gap(&g, &dom, &neg, &u1, 2.0, &rule),
            Err(PiconeError::NonpositiveInput { .. })
        ));
    }
}

//! Green's identities for the p-sub-Laplacian, flux normalization of
//! fundamental solutions, representation formulas, and boundary-condition
//! diagnostics.

use crate::domain::{cross_normal, Domain, DomainError};
use crate::expr::{EvalError, Expression};
use crate::gauge::{
    fundamental_solution_expr, translated_fundamental_solution, GaugeError, PolarizableGauge,
};
use crate::group::{GroupError, StratifiedGroup};
use crate::horizontal::{grad_exprs, p_sub_laplacian_expr, p_weight_expr};
use crate::integrate::{for_each_boundary_node, BoundaryForm, IntegrateError};
use crate::quadrature::QuadratureRule;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentityError {
    #[error("singular gradient: |grad| = 0 met a negative p-2 power on the integration set")]
    SingularGradient,
    #[error("raw flux {0:.3e} is below the degeneracy floor 1e-12")]
    DegenerateFlux(f64),
    #[error("pole is closer to the boundary than twice the largest excision radius {0}")]
    PoleTooCloseToBoundary(f64),
    #[error("robin boundary measure is negative ({value:.3e}) at {point:?}")]
    NegativeRobinMeasure { point: Vec<f64>, value: f64 },
    #[error("no calibrated flux constant stored for p = {0}")]
    MissingCalibration(f64),
    #[error(transparent)]
    Integrate(IntegrateError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

impl From<IntegrateError> for IdentityError {
    fn from(e: IntegrateError) -> Self {
        match &e {
            IntegrateError::Eval(EvalError::Domain(msg)) if msg.contains("negative power") => {
                IdentityError::SingularGradient
            }
            _ => IdentityError::Integrate(e),
        }
    }
}

impl From<EvalError> for IdentityError {
    fn from(e: EvalError) -> Self {
        IntegrateError::from(e).into()
    }
}

/// Outcome of one identity evaluation: both sides, the residual, and the
/// extremes of the monitored pointwise quantity (|grad u|^2 over the
/// quadrature nodes unless noted).
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub min_pointwise: f64,
    pub max_pointwise: f64,
    pub sample_count: usize,
    pub order: usize,
}

impl IdentityReport {
    pub fn new(
        lhs: f64,
        rhs: f64,
        min_pw: f64,
        max_pw: f64,
        samples: usize,
        order: usize,
    ) -> Self {
        IdentityReport {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            min_pointwise: min_pw,
            max_pointwise: max_pw,
            sample_count: samples,
            order,
        }
    }
}

struct PointwiseTrack {
    min: f64,
    max: f64,
    count: usize,
}

impl PointwiseTrack {
    fn new() -> Self {
        PointwiseTrack {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.count += 1;
    }
}

/// Green's first identity:
/// int_Omega (|grad u|^{p-2} (grad~ v) u + v L_p u) dnu
///   = int_dOmega |grad u|^{p-2} v <grad~ u, dnu>.
pub fn green_first_residual(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    v: &Expression,
    p: f64,
    rule: &QuadratureRule,
) -> Result<IdentityReport, IdentityError> {
    let grads_u = grad_exprs(g, u);
    let grads_v = grad_exprs(g, v);
    let grad_sq_u = Expression::sum(
        grads_u
            .iter()
            .map(|c| Expression::mul(c.clone(), c.clone())),
    );
    let weight_u = p_weight_expr(grad_sq_u.clone(), p, 0.0);
    let pairing = Expression::mul(
        weight_u.clone(),
        Expression::sum(
            grads_u
                .iter()
                .zip(&grads_v)
                .map(|(a, b)| Expression::mul(a.clone(), b.clone())),
        ),
    );
    let lp_u = p_sub_laplacian_expr(g, u, p, 0.0);
    let volume_integrand = Expression::add(pairing, Expression::mul(v.clone(), lp_u));

    let mut track = PointwiseTrack::new();
    let mut lhs = 0.0;
    {
        let mut err: Option<IdentityError> = None;
        rule.for_each_node(dom.dim(), |uu, w| {
            if err.is_some() {
                return;
            }
            let (x, jac) = dom.volume_node(uu);
            match (volume_integrand.eval(&x), grad_sq_u.eval(&x)) {
                (Ok(val), Ok(gs)) => {
                    lhs += w * jac * val;
                    track.push(gs);
                }
                (Err(e), _) | (_, Err(e)) => err = Some(IdentityError::from(e)),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }

    // boundary side: sum_k int f_k <X_k, dnu> with f_k = v |grad u|^{p-2} X_k u
    let flux_exprs: Vec<Expression> = grads_u
        .iter()
        .map(|gk| Expression::mul(v.clone(), Expression::mul(weight_u.clone(), gk.clone())))
        .collect();
    let forms: Vec<BoundaryForm> = (0..g.first_stratum())
        .map(|k| BoundaryForm::new(g, k))
        .collect();
    let mut rhs = 0.0;
    for_each_boundary_node::<IdentityError, _>(dom, rule, |x, t, w| {
        for (fk, form) in flux_exprs.iter().zip(&forms) {
            rhs += w * fk.eval(x)? * form.pullback(x, t);
        }
        track.count += 1;
        Ok(())
    })?;

    Ok(IdentityReport::new(
        lhs,
        rhs,
        track.min,
        track.max,
        track.count,
        rule.order(),
    ))
}

/// Green's second identity:
/// int_Omega (u L_p v - v L_p u + (|grad v|^{p-2} - |grad u|^{p-2})(grad~ v) u) dnu
///   = int_dOmega (|grad v|^{p-2} u <grad~ v, dnu> - |grad u|^{p-2} v <grad~ u, dnu>).
pub fn green_second_residual(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    v: &Expression,
    p: f64,
    rule: &QuadratureRule,
) -> Result<IdentityReport, IdentityError> {
    let grads_u = grad_exprs(g, u);
    let grads_v = grad_exprs(g, v);
    let sq = |grads: &[Expression]| {
        Expression::sum(grads.iter().map(|c| Expression::mul(c.clone(), c.clone())))
    };
    let weight_u = p_weight_expr(sq(&grads_u), p, 0.0);
    let weight_v = p_weight_expr(sq(&grads_v), p, 0.0);
    let pairing = Expression::sum(
        grads_u
            .iter()
            .zip(&grads_v)
            .map(|(a, b)| Expression::mul(a.clone(), b.clone())),
    );
    let lp_u = p_sub_laplacian_expr(g, u, p, 0.0);
    let lp_v = p_sub_laplacian_expr(g, v, p, 0.0);
    let volume_integrand = Expression::add(
        Expression::sub(
            Expression::mul(u.clone(), lp_v),
            Expression::mul(v.clone(), lp_u),
        ),
        Expression::mul(
            Expression::sub(weight_v.clone(), weight_u.clone()),
            pairing,
        ),
    );
    let grad_sq_u = sq(&grads_u);

    let mut track = PointwiseTrack::new();
    let mut lhs = 0.0;
    {
        let mut err: Option<IdentityError> = None;
        rule.for_each_node(dom.dim(), |uu, w| {
            if err.is_some() {
                return;
            }
            let (x, jac) = dom.volume_node(uu);
            match (volume_integrand.eval(&x), grad_sq_u.eval(&x)) {
                (Ok(val), Ok(gs)) => {
                    lhs += w * jac * val;
                    track.push(gs);
                }
                (Err(e), _) | (_, Err(e)) => err = Some(IdentityError::from(e)),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }

    let flux_exprs: Vec<Expression> = grads_u
        .iter()
        .zip(&grads_v)
        .map(|(gu, gv)| {
            Expression::sub(
                Expression::mul(u.clone(), Expression::mul(weight_v.clone(), gv.clone())),
                Expression::mul(v.clone(), Expression::mul(weight_u.clone(), gu.clone())),
            )
        })
        .collect();
    let forms: Vec<BoundaryForm> = (0..g.first_stratum())
        .map(|k| BoundaryForm::new(g, k))
        .collect();
    let mut rhs = 0.0;
    for_each_boundary_node::<IdentityError, _>(dom, rule, |x, t, w| {
        for (fk, form) in flux_exprs.iter().zip(&forms) {
            rhs += w * fk.eval(x)? * form.pullback(x, t);
        }
        track.count += 1;
        Ok(())
    })?;

    Ok(IdentityReport::new(
        lhs,
        rhs,
        track.min,
        track.max,
        track.count,
        rule.order(),
    ))
}

/// |lhs(u,v) + lhs(v,u)|: the left side of Green's second identity changes
/// sign under swapping the two fields.
pub fn green_second_antisymmetry_defect(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    v: &Expression,
    p: f64,
    rule: &QuadratureRule,
) -> Result<f64, IdentityError> {
    let a = green_second_residual(g, dom, u, v, p, rule)?;
    let b = green_second_residual(g, dom, v, u, p, rule)?;
    Ok((a.lhs + b.lhs).abs())
}

/// int_dOmega |grad u|^{p-2} <grad~ u, dnu>: the boundary flux whose
/// vanishing is the Gauss mean-value statement for p-harmonic functions.
pub fn horizontal_flux(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    p: f64,
    rule: &QuadratureRule,
) -> Result<f64, IdentityError> {
    let grads = grad_exprs(g, u);
    let weight = p_weight_expr(
        Expression::sum(grads.iter().map(|c| Expression::mul(c.clone(), c.clone()))),
        p,
        0.0,
    );
    let flux_exprs: Vec<Expression> = grads
        .iter()
        .map(|gk| Expression::mul(weight.clone(), gk.clone()))
        .collect();
    let forms: Vec<BoundaryForm> = (0..g.first_stratum())
        .map(|k| BoundaryForm::new(g, k))
        .collect();
    let mut flux = 0.0;
    for_each_boundary_node::<IdentityError, _>(dom, rule, |x, t, w| {
        for (fk, form) in flux_exprs.iter().zip(&forms) {
            flux += w * fk.eval(x)? * form.pullback(x, t);
        }
        Ok(())
    })?;
    Ok(flux)
}

/// Normalize the fundamental solution: returns c_p with
/// int_dB |grad eps_p|^{p-2} <grad~ eps_p, dnu> = 1 on a reference gauge
/// ball about the pole. The sign of c_p follows from the outward-flux
/// convention (negative for p < Q, matching the classical Delta(-1/4 pi r)
/// = delta normalization on R^3).
pub fn calibrate_c_p(
    pg: &PolarizableGauge,
    g: &StratifiedGroup,
    p: f64,
    rule: &QuadratureRule,
) -> Result<f64, IdentityError> {
    let ball = Domain::gauge_ball(g, pg, &vec![0.0; g.dim()], 0.75)?;
    let raw_expr = fundamental_solution_expr(pg, p, g.homogeneous_dimension(), 1.0);
    let raw = horizontal_flux(g, &ball, &raw_expr, p, rule)?;
    if raw.abs() < 1e-12 {
        return Err(IdentityError::DegenerateFlux(raw));
    }
    Ok(raw.signum() * raw.abs().powf(-1.0 / (p - 1.0)))
}

/// Representation-formula residual |u(x) - RHS| with the fundamental
/// solution's pole excised by gauge balls of shrinking radius and the
/// volume term extrapolated to rho -> 0 (Aitken on a geometric ladder).
/// Exact (up to quadrature) for p = 2; a diagnostic for other p.
pub fn representation_residual(
    pg: &PolarizableGauge,
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    p: f64,
    x: &[f64],
    rule: &QuadratureRule,
) -> Result<f64, IdentityError> {
    let c = pg.c_p(p).ok_or(IdentityError::MissingCalibration(p))?;
    let eps = translated_fundamental_solution(pg, g, p, x, c)?;

    // gauge distance from the pole, for excision
    let inv_x = g.inverse(x)?;
    let inv_translation = g.left_translation_exprs(&inv_x)?;
    let pole_gauge = pg.expression().substitute_coords(&inv_translation);

    let rhos: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|s| s * dom.diameter())
        .collect();
    let rho_max = rhos[0];

    // boundary side (independent of rho)
    let grads_u = grad_exprs(g, u);
    let grads_e = grad_exprs(g, &eps);
    let sq = |grads: &[Expression]| {
        Expression::sum(grads.iter().map(|c| Expression::mul(c.clone(), c.clone())))
    };
    let weight_u = p_weight_expr(sq(&grads_u), p, 0.0);
    let weight_e = p_weight_expr(sq(&grads_e), p, 0.0);
    let flux_exprs: Vec<Expression> = grads_u
        .iter()
        .zip(&grads_e)
        .map(|(gu, ge)| {
            Expression::sub(
                Expression::mul(u.clone(), Expression::mul(weight_e.clone(), ge.clone())),
                Expression::mul(eps.clone(), Expression::mul(weight_u.clone(), gu.clone())),
            )
        })
        .collect();
    let forms: Vec<BoundaryForm> = (0..g.first_stratum())
        .map(|k| BoundaryForm::new(g, k))
        .collect();
    let mut boundary = 0.0;
    let mut min_pole_gap = f64::INFINITY;
    for_each_boundary_node::<IdentityError, _>(dom, rule, |q, t, w| {
        for (fk, form) in flux_exprs.iter().zip(&forms) {
            boundary += w * fk.eval(q)? * form.pullback(q, t);
        }
        min_pole_gap = min_pole_gap.min(pole_gauge.eval(q)?);
        Ok(())
    })?;
    if min_pole_gap <= 2.0 * rho_max {
        return Err(IdentityError::PoleTooCloseToBoundary(rho_max));
    }

    // volume integrand eps L_p u - (w_eps - w_u) (grad~ eps) u; the weight
    // difference folds away structurally at p = 2
    let lp_u = p_sub_laplacian_expr(g, u, p, 0.0);
    let pairing = Expression::sum(
        grads_e
            .iter()
            .zip(&grads_u)
            .map(|(a, b)| Expression::mul(a.clone(), b.clone())),
    );
    let vol_integrand = Expression::sub(
        Expression::mul(eps.clone(), lp_u),
        Expression::mul(Expression::sub(weight_e, weight_u), pairing),
    );

    let values: Vec<f64> = rhos
        .iter()
        .map(|&rho| {
            excised_volume_integral(dom, &vol_integrand, &pole_gauge, x, rho, rule)
                .map(|v| v + boundary)
        })
        .collect::<Result<_, _>>()?;
    let extrapolated = aitken(&values);
    let ux = u.eval(x)?;
    Ok((ux - extrapolated).abs())
}

/// Integral of f over dom minus the gauge ball of radius rho about the
/// apex, by cones from the apex over the boundary patches with the ray
/// clipped at the excision sphere. Requires the domain star-shaped about
/// the apex, which holds for boxes and the shipped gauge balls.
fn excised_volume_integral(
    dom: &Domain,
    f: &Expression,
    pole_gauge: &Expression,
    apex: &[f64],
    rho: f64,
    rule: &QuadratureRule,
) -> Result<f64, IdentityError> {
    let n = dom.dim();
    let mut acc = 0.0;
    for_each_boundary_node::<IdentityError, _>(dom, rule, |q, tangents, w| {
        let ray: Vec<f64> = q.iter().zip(apex).map(|(a, b)| a - b).collect();
        // det[q - apex, T_1, ..., T_{N-1}] with the patch orientation
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][0] = ray[i];
            for (c, t) in tangents.iter().enumerate() {
                m[i][c + 1] = t[i];
            }
        }
        let cone_jac = crate::domain::det(&m);
        // radial clip: exit of the excision ball along the ray
        let d_at = |t: f64| -> Result<f64, IdentityError> {
            let y: Vec<f64> = apex.iter().zip(&ray).map(|(a, r)| a + t * r).collect();
            Ok(pole_gauge.eval(&y)?)
        };
        if d_at(1.0)? <= rho {
            return Ok(());
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if d_at(mid)? < rho {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        let t0 = 0.5 * (lo + hi);
        let mut inner = 0.0;
        for (i, &tn) in rule.nodes().iter().enumerate() {
            let t = t0 + (1.0 - t0) * tn;
            let y: Vec<f64> = apex.iter().zip(&ray).map(|(a, r)| a + t * r).collect();
            inner += rule.weights()[i] * f.eval(&y)? * t.powi(n as i32 - 1);
        }
        acc += w * cone_jac * (1.0 - t0) * inner;
        Ok(())
    })?;
    Ok(acc)
}

fn aitken(vals: &[f64]) -> f64 {
    assert_eq!(vals.len(), 3);
    let d1 = vals[1] - vals[0];
    let d2 = vals[2] - vals[1];
    let denom = d2 - d1;
    if denom.abs() < 1e-300 {
        return vals[2];
    }
    let out = vals[2] - d2 * d2 / denom;
    if out.is_finite() {
        out
    } else {
        vals[2]
    }
}

/// Boundary-condition diagnostics: the integral of the absolute condition
/// density over the boundary.
pub enum BoundaryCondition {
    /// |u| against the Euclidean surface measure.
    Dirichlet,
    /// |sum_j X_j u <X_j, dnu>| against the parameter measure.
    Neumann,
    /// |sum_j (a_j u + X_j u) <X_j, dnu>|; the measure sum_j a_j <X_j, dnu>
    /// must be nonnegative on the boundary.
    Robin(Vec<Expression>),
}

pub fn boundary_condition_residual(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    kind: &BoundaryCondition,
    rule: &QuadratureRule,
) -> Result<f64, IdentityError> {
    let n = dom.dim();
    let grads = grad_exprs(g, u);
    let forms: Vec<BoundaryForm> = (0..g.first_stratum())
        .map(|k| BoundaryForm::new(g, k))
        .collect();
    let mut acc = 0.0;
    for_each_boundary_node::<IdentityError, _>(dom, rule, |x, t, w| {
        match kind {
            BoundaryCondition::Dirichlet => {
                let area = if n == 1 {
                    1.0
                } else {
                    let z = cross_normal(t, n);
                    z.iter().map(|v| v * v).sum::<f64>().sqrt()
                };
                acc += w.abs() * u.eval(x)?.abs() * area;
            }
            BoundaryCondition::Neumann => {
                let mut q = 0.0;
                for (gj, form) in grads.iter().zip(&forms) {
                    q += gj.eval(x)? * form.pullback(x, t);
                }
                acc += w.abs() * q.abs();
            }
            BoundaryCondition::Robin(coeffs) => {
                let uval = u.eval(x)?;
                let mut q = 0.0;
                let mut measure = 0.0;
                for ((gj, aj), form) in grads.iter().zip(coeffs).zip(&forms) {
                    let pb = w.signum() * form.pullback(x, t);
                    let ajv = aj.eval(x)?;
                    measure += ajv * pb;
                    q += (ajv * uval + gj.eval(x)?) * pb;
                }
                if measure < -1e-12 {
                    return Err(IdentityError::NegativeRobinMeasure {
                        point: x.to_vec(),
                        value: measure,
                    });
                }
                acc += w.abs() * q.abs();
            }
        }
        Ok(())
    })?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::gauge::gauge_calibrate;
    use crate::group::Preset;

    fn h1() -> StratifiedGroup {
        StratifiedGroup::preset(Preset::Heisenberg(1))
    }

    #[test]
    fn green_first_classical_interval() {
        let g = StratifiedGroup::preset(Preset::Euclidean(1));
        let dom = Domain::box_domain(&[0.0], &[1.0]).unwrap();
        let rule = QuadratureRule::new(6);
        let u = parse_expression("x1^2").unwrap();
        let v = parse_expression("1").unwrap();
        let rep = green_first_residual(&g, &dom, &u, &v, 2.0, &rule).unwrap();
        assert!((rep.lhs - 2.0).abs() < 1e-14);
        assert!((rep.rhs - 2.0).abs() < 1e-14);
        assert!(rep.residual < 1e-14);
    }

    #[test]
    fn green_first_h1_polynomials() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(6);
        let u = parse_expression("x1^2 + x2*x3").unwrap();
        let v = parse_expression("x3 - x1*x2").unwrap();
        let rep = green_first_residual(&g, &dom, &u, &v, 2.0, &rule).unwrap();
        assert!(rep.residual < 1e-10, "residual {}", rep.residual);
    }

    #[test]
    fn green_first_p3_converges_under_refinement() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let u = parse_expression("x1 + 2*x2 + x3").unwrap();
        let v = parse_expression("x1*x2").unwrap();
        let mut last = f64::INFINITY;
        for order in [4, 6, 8] {
            let rule = QuadratureRule::new(order);
            let rep = green_first_residual(&g, &dom, &u, &v, 3.0, &rule).unwrap();
            assert!(rep.residual < last, "order {order}: {}", rep.residual);
            last = rep.residual;
        }
        assert!(last < 1e-8, "final residual {last}");
    }

    #[test]
    fn green_second_properties() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(6);
        let u = parse_expression("x1^2").unwrap();
        let v = parse_expression("x2^2").unwrap();
        let rep = green_second_residual(&g, &dom, &u, &v, 2.0, &rule).unwrap();
        assert!(rep.residual < 1e-10, "residual {}", rep.residual);

        // swap symmetry: same fields on both slots vanish identically
        let same = green_second_residual(&g, &dom, &u, &u, 2.0, &rule).unwrap();
        assert!(same.lhs.abs() < 1e-14 && same.rhs.abs() < 1e-14);

        let defect = green_second_antisymmetry_defect(&g, &dom, &u, &v, 2.0, &rule).unwrap();
        assert!(defect < 1e-10);
    }

    #[test]
    fn green_first_reduces_to_the_divergence_formula() {
        // two code paths, one identity: the Green-I residual must equal
        // the divergence residual of f_k = v |grad u|^{p-2} X_k u
        use crate::horizontal::{grad_exprs, p_weight_expr};
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(6);
        for p in [2.0, 3.0] {
            let u = parse_expression("x1 + 2*x2 + x3^2").unwrap();
            let v = parse_expression("x1*x3 - x2").unwrap();
            let rep = green_first_residual(&g, &dom, &u, &v, p, &rule).unwrap();
            let grads = grad_exprs(&g, &u);
            let weight = p_weight_expr(
                Expression::sum(grads.iter().map(|c| Expression::mul(c.clone(), c.clone()))),
                p,
                0.0,
            );
            let fields: Vec<Expression> = grads
                .iter()
                .map(|gk| {
                    Expression::mul(v.clone(), Expression::mul(weight.clone(), gk.clone()))
                })
                .collect();
            let div = crate::integrate::divergence_residual(&g, &dom, &fields, &rule).unwrap();
            assert!(
                (rep.residual - div).abs() < 1e-12,
                "p={p}: green {} vs divergence {}",
                rep.residual,
                div
            );
        }
    }

    #[test]
    fn flux_of_a_constant_vanishes() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(8);
        let c = parse_expression("2").unwrap();
        assert_eq!(horizontal_flux(&g, &dom, &c, 2.0, &rule).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_c2_matches_newtonian_constant() {
        let g = StratifiedGroup::preset(Preset::Euclidean(3));
        let pg = gauge_calibrate(&g).unwrap();
        let rule = QuadratureRule::new(16);
        let c2 = calibrate_c_p(&pg, &g, 2.0, &rule).unwrap();
        // Delta(-1/(4 pi r)) = delta: c_2 = -1/(4 pi), and flux = +1
        let expect = -1.0 / (4.0 * std::f64::consts::PI);
        assert!(
            (c2 - expect).abs() < 1e-6 * expect.abs(),
            "c2 = {c2}, expected {expect}"
        );
        let eps = fundamental_solution_expr(&pg, 2.0, 3, c2);
        let ball = Domain::gauge_ball(&g, &pg, &[0.0; 3], 0.75).unwrap();
        let flux = horizontal_flux(&g, &ball, &eps, 2.0, &rule).unwrap();
        assert!((flux - 1.0).abs() < 1e-6, "flux {flux}");
        let boxdom = Domain::box_domain(&[-0.6, -0.7, -0.55], &[0.8, 0.6, 0.7]).unwrap();
        let flux_box = horizontal_flux(&g, &boxdom, &eps, 2.0, &rule).unwrap();
        assert!((flux_box - 1.0).abs() < 1e-3, "box flux {flux_box}");
    }

    #[test]
    fn h1_flux_is_domain_independent() {
        let g = h1();
        let pg = gauge_calibrate(&g).unwrap();
        let rule = QuadratureRule::new(20);
        for p in [2.0, 3.0] {
            let cp = calibrate_c_p(&pg, &g, p, &rule).unwrap();
            let eps = fundamental_solution_expr(&pg, p, 4, cp);
            let ball = Domain::gauge_ball(&g, &pg, &[0.0; 3], 0.75).unwrap();
            let fb = horizontal_flux(&g, &ball, &eps, p, &rule).unwrap();
            let boxdom = Domain::box_domain(&[-0.8, -0.75, -0.6], &[0.7, 0.8, 0.75]).unwrap();
            let fx = horizontal_flux(&g, &boxdom, &eps, p, &rule).unwrap();
            assert!((fb - 1.0).abs() < 1e-4, "p={p}: ball flux {fb}");
            assert!((fx - 1.0).abs() < 1e-3, "p={p}: box flux {fx}");
        }
    }

    #[test]
    fn mean_value_flux_vanishes_for_translated_pole() {
        let g = h1();
        let pg = gauge_calibrate(&g).unwrap();
        let rule = QuadratureRule::new(12);
        let dom = Domain::unit_box(3);
        // pole well outside the unit box
        let eps = translated_fundamental_solution(&pg, &g, 2.0, &[2.5, 2.5, 2.0], 1.0).unwrap();
        let flux = horizontal_flux(&g, &dom, &eps, 2.0, &rule).unwrap();
        assert!(flux.abs() < 1e-6, "flux {flux}");
    }

    #[test]
    fn representation_formula_p2() {
        // Euclidean harmonic polynomial reproduced at an interior point
        let g = StratifiedGroup::preset(Preset::Euclidean(3));
        let pg = gauge_calibrate(&g).unwrap();
        let rule = QuadratureRule::new(12);
        let c2 = calibrate_c_p(&pg, &g, 2.0, &rule).unwrap();
        let pg = pg.with_c_p(2.0, c2);
        let dom = Domain::box_domain(&[-1.0; 3].to_vec(), &[1.0; 3].to_vec()).unwrap();
        let u = parse_expression("x1^2 - x2^2 + x1*x3 + 2").unwrap();
        let r =
            representation_residual(&pg, &g, &dom, &u, 2.0, &[0.1, -0.05, 0.2], &rule).unwrap();
        assert!(r < 1e-4, "residual {r}");

        // u = 0: every term vanishes
        let zero = parse_expression("0").unwrap();
        let r = representation_residual(&pg, &g, &dom, &zero, 2.0, &[0.0; 3], &rule).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn representation_formula_h1() {
        let g = h1();
        let pg = gauge_calibrate(&g).unwrap();
        let rule = QuadratureRule::new(12);
        let c2 = calibrate_c_p(&pg, &g, 2.0, &rule).unwrap();
        let pg = pg.with_c_p(2.0, c2);
        let dom = Domain::box_domain(&[-1.0; 3].to_vec(), &[1.0; 3].to_vec()).unwrap();
        let u = parse_expression("x1").unwrap();
        let r = representation_residual(&pg, &g, &dom, &u, 2.0, &[0.0; 3], &rule).unwrap();
        assert!(r < 1e-3, "residual {r}");
    }

    #[test]
    fn boundary_condition_densities() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(8);
        let zero = parse_expression("0").unwrap();
        assert_eq!(
            boundary_condition_residual(&g, &dom, &zero, &BoundaryCondition::Dirichlet, &rule)
                .unwrap(),
            0.0
        );
        let one = parse_expression("1").unwrap();
        assert_eq!(
            boundary_condition_residual(&g, &dom, &one, &BoundaryCondition::Neumann, &rule)
                .unwrap(),
            0.0
        );
        // X_1 x3 = -x2/2, X_2 x3 = x1/2. Per face: |x2/2| on the x1-faces,
        // |x1/2| on the x2-faces, (x1^2 + x2^2)/4 on the x3-faces, so the
        // total is 4 * 1/4 + 2 * 1/6 = 4/3.
        let u = parse_expression("x3").unwrap();
        let v = boundary_condition_residual(&g, &dom, &u, &BoundaryCondition::Neumann, &rule)
            .unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn robin_measure_sign_check() {
        let g = h1();
        let dom = Domain::unit_box(3);
        let rule = QuadratureRule::new(4);
        let u = parse_expression("x1").unwrap();
        let ok = BoundaryCondition::Robin(vec![
            parse_expression("0").unwrap(),
            parse_expression("0").unwrap(),
        ]);
        assert!(boundary_condition_residual(&g, &dom, &u, &ok, &rule).is_ok());
    }
}

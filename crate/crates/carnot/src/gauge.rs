//! Homogeneous gauges on polarizable groups and the explicit fundamental
//! solutions of the p-sub-Laplacian built from them.
//!
//! A calibrated gauge d is dilation-homogeneous of degree 1 and solves the
//! infinity-sub-Laplacian equation off the pole. On Euclidean space d is
//! the Euclidean norm; on H^n the gauge has the shape
//! ((sum x_i^2)^2 + beta t^2)^{1/4} and beta is fitted numerically by
//! driving max |L_inf d| to its floor over a sample cloud.

use crate::expr::{EvalError, Expression};
use crate::group::{GroupError, Preset, StratifiedGroup};
use crate::horizontal::InfinityLaplacian;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("gauge calibration only ships for Euclidean and Heisenberg presets, not {0}")]
    UnsupportedGroup(String),
    #[error("calibration failed: best residual {residual:.3e} at shape {shape:.6} is above the floor {floor:.1e}")]
    CalibrationFailed {
        shape: f64,
        residual: f64,
        floor: f64,
    },
    #[error("gauge evaluated at its pole")]
    PoleEvaluation,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Closed-form description of the unit gauge sphere, used to parameterize
/// gauge balls smoothly (dilation-radial coordinate, shape-adapted angles).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GaugeShape {
    /// d = |x|: the unit sphere is the Euclidean one.
    Euclidean { dim: usize },
    /// d = ((sum x^2)^2 + beta t^2)^{1/4} on H^n: the unit sphere is
    /// (sqrt(sin phi) omega_h, cos phi / sqrt(beta)).
    Heisenberg { n: usize, beta: f64 },
}

impl GaugeShape {
    pub fn dim(&self) -> usize {
        match self {
            GaugeShape::Euclidean { dim } => *dim,
            GaugeShape::Heisenberg { n, .. } => 2 * n + 1,
        }
    }
}

/// A calibrated homogeneous gauge with its per-p flux constants.
#[derive(Clone, Debug)]
pub struct PolarizableGauge {
    group_name: String,
    d: Expression,
    shape: GaugeShape,
    /// Largest |L_inf d| observed over the calibration cloud.
    residual: f64,
    cp: Vec<(f64, f64)>,
}

impl PolarizableGauge {
    pub fn group_name(&self) -> &str {
        &self.group_name
    }

    pub fn expression(&self) -> &Expression {
        &self.d
    }

    pub fn shape(&self) -> GaugeShape {
        self.shape
    }

    /// The fitted free parameter (beta on H^n), if the shape has one.
    pub fn shape_parameter(&self) -> Option<f64> {
        match self.shape {
            GaugeShape::Euclidean { .. } => None,
            GaugeShape::Heisenberg { beta, .. } => Some(beta),
        }
    }

    pub fn infinity_residual(&self) -> f64 {
        self.residual
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, GaugeError> {
        Ok(self.d.eval(x)?)
    }

    /// Stored flux constant for this p, if calibrated.
    pub fn c_p(&self, p: f64) -> Option<f64> {
        self.cp
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-12)
            .map(|(_, c)| *c)
    }

    pub fn with_c_p(mut self, p: f64, c: f64) -> Self {
        self.cp.retain(|(q, _)| (q - p).abs() >= 1e-12);
        self.cp.push((p, c));
        self.cp.sort_by(|a, b| a.0.total_cmp(&b.0));
        self
    }
}

/// Builds and calibrates the gauge for a shipped preset.
pub fn gauge_calibrate(g: &StratifiedGroup) -> Result<PolarizableGauge, GaugeError> {
    const FLOOR: f64 = 1e-8;
    match g.preset_id() {
        Some(Preset::Euclidean(n)) => {
            let d = euclidean_norm_expr(n);
            Ok(PolarizableGauge {
                group_name: g.name().to_string(),
                d,
                shape: GaugeShape::Euclidean { dim: n },
                residual: 0.0,
                cp: Vec::new(),
            })
        }
        Some(Preset::Heisenberg(n)) => {
            let cloud = sample_cloud(g, 100, 0x9a03e);
            let objective = |beta: f64| -> f64 {
                let d = heisenberg_gauge_expr(n, beta);
                let linf = InfinityLaplacian::new(g, &d);
                cloud
                    .iter()
                    .map(|x| linf.eval(x).map(f64::abs).unwrap_or(f64::INFINITY))
                    .fold(0.0, f64::max)
            };
            // coarse bracket, then golden-section refinement
            let mut best = (1.0, objective(1.0));
            let mut beta = 1.0;
            while beta <= 128.0 {
                let r = objective(beta);
                if r < best.1 {
                    best = (beta, r);
                }
                beta *= 1.25;
            }
            let (mut lo, mut hi) = (best.0 / 1.3, best.0 * 1.3);
            let phi = (5.0f64.sqrt() - 1.0) / 2.0;
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let mut f1 = objective(x1);
            let mut f2 = objective(x2);
            for _ in 0..120 {
                if f1 < f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = objective(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = objective(x2);
                }
            }
            let beta = 0.5 * (lo + hi);
            let residual = objective(beta);
            if residual >= FLOOR {
                return Err(GaugeError::CalibrationFailed {
                    shape: beta,
                    residual,
                    floor: FLOOR,
                });
            }
            Ok(PolarizableGauge {
                group_name: g.name().to_string(),
                d: heisenberg_gauge_expr(n, beta),
                shape: GaugeShape::Heisenberg { n, beta },
                residual,
                cp: Vec::new(),
            })
        }
        _ => Err(GaugeError::UnsupportedGroup(g.name().to_string())),
    }
}

fn euclidean_norm_expr(n: usize) -> Expression {
    Expression::sqrt(Expression::sum((0..n).map(|j| {
        Expression::mul(Expression::coord(j), Expression::coord(j))
    })))
}

fn heisenberg_gauge_expr(n: usize, beta: f64) -> Expression {
    let horiz = Expression::sum((0..2 * n).map(|j| {
        Expression::mul(Expression::coord(j), Expression::coord(j))
    }));
    let t = Expression::coord(2 * n);
    let inner = Expression::add(
        Expression::mul(horiz.clone(), horiz),
        Expression::mul(Expression::num(beta), Expression::mul(t.clone(), t)),
    );
    Expression::pow(inner, Expression::num(0.25))
}

/// A point on the unit gauge sphere and its angular derivatives, from
/// dim-1 angles (first angles in [0, pi], the last in [0, 2 pi]).
/// Returns (S, dS) with dS[t][j] = d S_j / d theta_t.
pub fn unit_sphere(shape: &GaugeShape, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    match shape {
        GaugeShape::Euclidean { dim } => {
            assert_eq!(theta.len(), dim - 1);
            omega_and_derivs(theta)
        }
        GaugeShape::Heisenberg { n, beta } => {
            let nh = 2 * n;
            assert_eq!(theta.len(), nh);
            let phi = theta[0];
            let (omega_h, domega_h) = omega_and_derivs(&theta[1..]);
            let root = phi.sin().max(0.0).sqrt();
            let rb = beta.sqrt();
            let mut s = Vec::with_capacity(nh + 1);
            for w in &omega_h {
                s.push(root * w);
            }
            s.push(phi.cos() / rb);
            let mut ds = Vec::with_capacity(nh);
            // d/d phi
            let droot = if root > 0.0 {
                phi.cos() / (2.0 * root)
            } else {
                0.0
            };
            let mut dphi: Vec<f64> = omega_h.iter().map(|w| droot * w).collect();
            dphi.push(-phi.sin() / rb);
            ds.push(dphi);
            // d/d psi_i
            for drow in &domega_h {
                let mut v: Vec<f64> = drow.iter().map(|w| root * w).collect();
                v.push(0.0);
                ds.push(v);
            }
            (s, ds)
        }
    }
}

/// Unit direction omega(theta) on S^{m} from m angles and its derivatives
/// (derivs[t][i] = d omega_i / d theta_t), computed without divisions so
/// nodes with sin(theta) = 0 stay finite.
pub(crate) fn omega_and_derivs(theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = theta.len() + 1;
    let comp = |i: usize, dt: Option<usize>| -> f64 {
        // omega_i = prod_{j<i} sin(theta_j) * cos(theta_i), last uses sin
        let mut prod = 1.0;
        for j in 0..i.min(n - 1) {
            let f = if Some(j) == dt {
                theta[j].cos()
            } else {
                theta[j].sin()
            };
            prod *= f;
        }
        if i < n - 1 {
            prod *= if Some(i) == dt {
                -theta[i].sin()
            } else {
                theta[i].cos()
            };
        }
        prod
    };
    let omega: Vec<f64> = (0..n).map(|i| comp(i, None)).collect();
    let derivs: Vec<Vec<f64>> = (0..n - 1)
        .map(|t| {
            (0..n)
                .map(|i| {
                    let depends = t < i || (t == i && i < n - 1);
                    if depends {
                        comp(i, Some(t))
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (omega, derivs)
}

fn sample_cloud(g: &StratifiedGroup, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.dim();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.3 {
            out.push(x);
        }
    }
    out
}

/// The exponent (p-Q)/(p-1) of the power branch.
pub fn power_exponent(p: f64, q: u32) -> f64 {
    (p - q as f64) / (p - 1.0)
}

/// epsilon_p as an expression in x with an explicit constant: c d^{(p-Q)/(p-1)}
/// for p != Q and -c log d at p = Q.
pub fn fundamental_solution_expr(pg: &PolarizableGauge, p: f64, q: u32, c: f64) -> Expression {
    if (p - q as f64).abs() < 1e-12 {
        Expression::neg(Expression::mul(
            Expression::num(c),
            Expression::call(crate::expr::Func::Log, pg.expression().clone()),
        ))
    } else {
        Expression::mul(
            Expression::num(c),
            Expression::pow(
                pg.expression().clone(),
                Expression::num(power_exponent(p, q)),
            ),
        )
    }
}

/// epsilon_p(x) with the stored calibration constant (1 before calibration).
pub fn fundamental_solution(
    pg: &PolarizableGauge,
    g: &StratifiedGroup,
    p: f64,
    x: &[f64],
) -> Result<f64, GaugeError> {
    let d = pg.eval(x)?;
    if d == 0.0 {
        return Err(GaugeError::PoleEvaluation);
    }
    let c = pg.c_p(p).unwrap_or(1.0);
    let q = g.homogeneous_dimension();
    if (p - q as f64).abs() < 1e-12 {
        Ok(-c * d.ln())
    } else {
        Ok(c * d.powf(power_exponent(p, q)))
    }
}

/// epsilon_p(pole^{-1} o x) as an expression in x: the fundamental solution
/// with its pole translated to `pole`.
pub fn translated_fundamental_solution(
    pg: &PolarizableGauge,
    g: &StratifiedGroup,
    p: f64,
    pole: &[f64],
    c: f64,
) -> Result<Expression, GaugeError> {
    let inv = g.inverse(pole)?;
    let comps = g.left_translation_exprs(&inv)?;
    let eps = fundamental_solution_expr(pg, p, g.homogeneous_dimension(), c);
    Ok(eps.substitute_coords(&comps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horizontal::infinity_sub_laplacian;

    #[test]
    fn euclidean_gauge_is_the_norm() {
        let g = StratifiedGroup::preset(Preset::Euclidean(3));
        let pg = gauge_calibrate(&g).unwrap();
        assert!((pg.eval(&[3.0, 0.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);
        let v = infinity_sub_laplacian(&g, pg.expression(), &[0.3, -0.4, 1.0]).unwrap();
        assert!(v.abs() < 1e-13);
    }

    #[test]
    fn h1_calibration_finds_the_kaplan_shape() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let pg = gauge_calibrate(&g).unwrap();
        let beta = pg.shape_parameter().unwrap();
        assert!((beta - 16.0).abs() < 1e-3, "beta = {beta}");
        assert!(pg.infinity_residual() < 1e-8);
    }

    #[test]
    fn unit_sphere_points_have_unit_gauge() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let pg = gauge_calibrate(&g).unwrap();
        let shape = pg.shape();
        for (a, b) in [(0.3, 0.9), (0.77, 0.15), (0.5, 0.5)] {
            let theta = [std::f64::consts::PI * a, 2.0 * std::f64::consts::PI * b];
            let (s, ds) = unit_sphere(&shape, &theta);
            assert!((pg.eval(&s).unwrap() - 1.0).abs() < 1e-12);
            // derivatives stay tangent to the sphere: d/dtheta d(S) = 0
            let grad: Vec<f64> = (0..3)
                .map(|j| pg.expression().diff(j).eval(&s).unwrap())
                .collect();
            for row in &ds {
                let dot: f64 = grad.iter().zip(row).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-10, "tangency violated: {dot}");
            }
        }
    }

    #[test]
    fn gauge_homogeneity_degree_one() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let pg = gauge_calibrate(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lam: f64 = rng.gen_range(0.25..4.0);
            let dx = pg.eval(&x).unwrap();
            let dlx = pg.eval(&g.dilate(lam, &x).unwrap()).unwrap();
            assert!((dlx - lam * dx).abs() <= 1e-12 * (1.0 + dlx.abs()));
        }
        // the forced example: doubling doubles the gauge
        let x = [0.7, -0.2, 0.4];
        let d2 = pg.eval(&g.dilate(2.0, &x).unwrap()).unwrap();
        assert!((d2 - 2.0 * pg.eval(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fundamental_solution_homogeneity() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let pg = gauge_calibrate(&g).unwrap();
        let q = g.homogeneous_dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [1.5, 2.0, 3.0] {
            let kappa = power_exponent(p, q);
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if pg.eval(&x).unwrap() < 0.2 {
                    continue;
                }
                let lam: f64 = rng.gen_range(0.5..2.0);
                let e1 = fundamental_solution(&pg, &g, p, &g.dilate(lam, &x).unwrap()).unwrap();
                let e0 = fundamental_solution(&pg, &g, p, &x).unwrap();
                assert!((e1 - lam.powf(kappa) * e0).abs() <= 1e-12 * (1.0 + e1.abs()));
            }
        }
    }

    #[test]
    fn log_branch_at_p_equals_q() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let pg = gauge_calibrate(&g).unwrap().with_c_p(4.0, 1.0);
        // Q = 4 on H^1, so p = 4 selects the logarithmic branch
        let x = [1.0, 0.0, 0.0];
        let d = pg.eval(&x).unwrap();
        let v = fundamental_solution(&pg, &g, 4.0, &x).unwrap();
        assert!((v + d.ln()).abs() < 1e-14);
        assert!(matches!(
            fundamental_solution(&pg, &g, 4.0, &[0.0, 0.0, 0.0]),
            Err(GaugeError::PoleEvaluation)
        ));
    }

    #[test]
    fn newtonian_potential_is_harmonic_off_pole() {
        let g = StratifiedGroup::preset(Preset::Euclidean(3));
        let pg = gauge_calibrate(&g).unwrap();
        let eps = fundamental_solution_expr(&pg, 2.0, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.3..1.5)).collect();
            let v = crate::horizontal::p_sub_laplacian(&g, &eps, 2.0, &x, 0.0).unwrap();
            assert!(v.abs() < 1e-9, "L_2 eps = {v} at {x:?}");
        }
    }
}

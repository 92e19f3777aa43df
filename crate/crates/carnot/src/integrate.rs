//! Volume quadrature and integration of the boundary (N-1)-forms
//! <X_k, dnu> over oriented patches.
//!
//! The pairing of a generator with the volume form is assembled from its
//! constituent 1-forms: the first-stratum dx_j with j != k and, for every
//! higher coordinate x_m^{(l)}, the form theta_{l,m} = dx_m^{(l)} -
//! sum_k a^{(l)}_{k,m} dx_k^{(1)}. The pullback under a patch is the
//! determinant of these forms applied to the tangent vectors, times the
//! parity (-1)^{k-1} that aligns the wedge with the interior product
//! i_{X_k} dnu. With outward-oriented patches this normalization is the
//! one that makes the divergence formula hold on every preset, which is
//! how the sign convention is pinned down.

use crate::domain::{cross_normal, det, Domain};
use crate::expr::{EvalError, Expression};
use crate::group::StratifiedGroup;
use crate::horizontal::grad_exprs;
use crate::poly::CompiledPoly;
use crate::quadrature::QuadratureRule;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("degenerate pullback Jacobian at boundary node {0:?}")]
    DegenerateJacobian(Vec<f64>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The (N-1)-form <X_k, dnu> for one generator, ready for pullback.
pub struct BoundaryForm {
    dim: usize,
    parity: f64,
    rows: Vec<FormRow>,
}

enum FormRow {
    Dx(usize),
    Theta {
        coord: usize,
        coeffs: Vec<CompiledPoly>,
    },
}

impl BoundaryForm {
    /// Build the form for generator k (0-based).
    pub fn new(g: &StratifiedGroup, k: usize) -> Self {
        let n = g.dim();
        let n1 = g.first_stratum();
        assert!(k < n1, "generator index out of range");
        let mut rows = Vec::with_capacity(n - 1);
        for j in 0..n1 {
            if j != k {
                rows.push(FormRow::Dx(j));
            }
        }
        for j in n1..n {
            let coeffs = (0..n1)
                .map(|kk| g.generator(kk).coeff(j).compile())
                .collect();
            rows.push(FormRow::Theta { coord: j, coeffs });
        }
        BoundaryForm {
            dim: n,
            parity: if k % 2 == 0 { 1.0 } else { -1.0 },
            rows,
        }
    }

    /// Signed pullback density at x against the given tangent vectors.
    pub fn pullback(&self, x: &[f64], tangents: &[Vec<f64>]) -> f64 {
        let n = self.dim;
        if n == 1 {
            return self.parity;
        }
        let mut m = vec![vec![0.0; n - 1]; n - 1];
        for (r, row) in self.rows.iter().enumerate() {
            match row {
                FormRow::Dx(j) => {
                    for (c, t) in tangents.iter().enumerate() {
                        m[r][c] = t[*j];
                    }
                }
                FormRow::Theta { coord, coeffs } => {
                    let a: Vec<f64> = coeffs.iter().map(|p| p.eval(x)).collect();
                    for (c, t) in tangents.iter().enumerate() {
                        let mut v = t[*coord];
                        for (kk, ak) in a.iter().enumerate() {
                            v -= ak * t[kk];
                        }
                        m[r][c] = v;
                    }
                }
            }
        }
        self.parity * det(&m)
    }

    /// Independent route: (i_{X_k} dnu)(T_1..T_{N-1}) = det[X_k, T_1, ...].
    pub fn pullback_contraction(
        g: &StratifiedGroup,
        k: usize,
        x: &[f64],
        tangents: &[Vec<f64>],
    ) -> f64 {
        let n = g.dim();
        if n == 1 {
            return 1.0;
        }
        let field = g.generator(k).eval_at(x);
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][0] = field[i];
            for (c, t) in tangents.iter().enumerate() {
                m[i][c + 1] = t[i];
            }
        }
        det(&m)
    }
}

/// Visit every boundary quadrature node: callback receives the point, the
/// tangent vectors, and the orientation-corrected parameter weight.
pub fn for_each_boundary_node<E, F>(
    dom: &Domain,
    rule: &QuadratureRule,
    mut f: F,
) -> Result<(), E>
where
    E: From<IntegrateError>,
    F: FnMut(&[f64], &[Vec<f64>], f64) -> Result<(), E>,
{
    let n = dom.dim();
    for patch in dom.patches() {
        let mut err: Option<E> = None;
        rule.for_each_node(patch.param_dim(), |u, w| {
            if err.is_some() {
                return;
            }
            let x = patch.point(u);
            let t = patch.tangents(u);
            if n > 1 {
                let z = cross_normal(&t, n);
                let zn: f64 = z.iter().map(|v| v * v).sum::<f64>();
                if !(zn > 1e-26) {
                    err = Some(E::from(IntegrateError::DegenerateJacobian(x.clone())));
                    return;
                }
            }
            if let Err(e) = f(&x, &t, w * patch.sign()) {
                err = Some(e);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(())
}

/// Tensor-product Gauss approximation of the volume integral of f.
pub fn volume_integral(
    dom: &Domain,
    f: &Expression,
    rule: &QuadratureRule,
) -> Result<f64, IntegrateError> {
    let mut acc = 0.0;
    let mut err: Option<EvalError> = None;
    rule.for_each_node(dom.dim(), |u, w| {
        if err.is_some() {
            return;
        }
        let (x, jac) = dom.volume_node(u);
        match f.eval(&x) {
            Ok(v) => acc += w * jac * v,
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e.into()),
        None => Ok(acc),
    }
}

/// int_{dOmega} f <X_k, dnu> over the oriented patches.
pub fn boundary_form_integral(
    g: &StratifiedGroup,
    dom: &Domain,
    k: usize,
    f: &Expression,
    rule: &QuadratureRule,
) -> Result<f64, IntegrateError> {
    let form = BoundaryForm::new(g, k);
    let mut acc = 0.0;
    for_each_boundary_node::<IntegrateError, _>(dom, rule, |x, t, w| {
        let v = f.eval(x)?;
        acc += w * v * form.pullback(x, t);
        Ok(())
    })?;
    Ok(acc)
}

/// Both sides of the divergence formula for a horizontal field list and
/// their absolute mismatch.
pub struct DivergenceSides {
    pub volume: f64,
    pub boundary: f64,
}

impl DivergenceSides {
    pub fn residual(&self) -> f64 {
        (self.volume - self.boundary).abs()
    }
}

pub fn divergence_sides(
    g: &StratifiedGroup,
    dom: &Domain,
    fields: &[Expression],
    rule: &QuadratureRule,
) -> Result<DivergenceSides, IntegrateError> {
    assert_eq!(fields.len(), g.first_stratum());
    let divergence = Expression::sum(
        g.generators()
            .iter()
            .zip(fields)
            .map(|(gen, fk)| crate::horizontal::apply_vector_field(gen, fk)),
    );
    let volume = volume_integral(dom, &divergence, rule)?;

    let forms: Vec<BoundaryForm> = (0..g.first_stratum())
        .map(|k| BoundaryForm::new(g, k))
        .collect();
    let mut boundary = 0.0;
    for_each_boundary_node::<IntegrateError, _>(dom, rule, |x, t, w| {
        for (fk, form) in fields.iter().zip(&forms) {
            boundary += w * fk.eval(x)? * form.pullback(x, t);
        }
        Ok(())
    })?;
    Ok(DivergenceSides { volume, boundary })
}

/// |int_Omega sum X_k f_k dnu - int_dOmega sum f_k <X_k, dnu>|.
pub fn divergence_residual(
    g: &StratifiedGroup,
    dom: &Domain,
    fields: &[Expression],
    rule: &QuadratureRule,
) -> Result<f64, IntegrateError> {
    Ok(divergence_sides(g, dom, fields, rule)?.residual())
}

/// (int_Omega |grad_G u|^p)^{1/p}.
pub fn energy_seminorm(
    g: &StratifiedGroup,
    dom: &Domain,
    u: &Expression,
    p: f64,
    rule: &QuadratureRule,
) -> Result<f64, IntegrateError> {
    assert!(p > 1.0);
    let grad_sq = Expression::sum(
        grad_exprs(g, u)
            .into_iter()
            .map(|c| Expression::mul(c.clone(), c)),
    );
    let integrand = Expression::pow(grad_sq, Expression::num(p / 2.0));
    let v = volume_integral(dom, &integrand, rule)?;
    Ok(v.max(0.0).powf(1.0 / p))
}

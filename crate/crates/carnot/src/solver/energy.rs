//! Discrete energy E(u) = sum w (|grad_h u|^2 + eps^2)^{p/2}/p
//! - sum w G(x, u), with the gradient assembled as the exact adjoint of
//! the difference-stencil network.

use super::grid::Grid;
use super::reaction::Reaction;
use super::SolverError;

/// Reaction side of the energy: nothing, a frozen per-node load (F
/// independent of u), or a full F(x, rho) expression.
#[derive(Clone, Copy)]
pub enum Load<'a> {
    None,
    Frozen(&'a [f64]),
    Expr(&'a Reaction),
}

impl<'a> Load<'a> {
    /// F(x_node, rho).
    fn force(&self, grid: &Grid, node: usize, rho: f64) -> Result<f64, SolverError> {
        match self {
            Load::None => Ok(0.0),
            Load::Frozen(f) => Ok(f[node]),
            Load::Expr(r) => Ok(r.eval(grid.coords(node), rho)?),
        }
    }

    /// G(x_node, t) = int_0^t F(x_node, s) ds, by 16-point Gauss.
    fn potential(&self, grid: &Grid, node: usize, t: f64) -> Result<f64, SolverError> {
        match self {
            Load::None => Ok(0.0),
            Load::Frozen(f) => Ok(f[node] * t),
            Load::Expr(r) => {
                if t == 0.0 {
                    return Ok(0.0);
                }
                let mut acc = 0.0;
                for (s, w) in GAUSS16 {
                    acc += w * r.eval(grid.coords(node), t * s)?;
                }
                Ok(t * acc)
            }
        }
    }
}

// 16-point Gauss-Legendre rule on [0, 1]
const GAUSS16: [(f64, f64); 16] = [
    (0.005299532504175031, 0.013576229705877047),
    (0.0277124884633837, 0.031126761969323946),
    (0.06718439880608412, 0.04757925584124639),
    (0.12229779582249845, 0.06231448562776694),
    (0.19106187779867811, 0.07479799440828837),
    (0.2709916111713863, 0.08457825969750127),
    (0.35919822461037054, 0.09130170752246179),
    (0.4524937450811813, 0.09472530522753425),
    (0.5475062549188188, 0.09472530522753425),
    (0.6408017753896295, 0.09130170752246179),
    (0.7290083888286137, 0.08457825969750127),
    (0.8089381222013219, 0.07479799440828837),
    (0.8777022041775016, 0.06231448562776694),
    (0.9328156011939159, 0.04757925584124639),
    (0.9722875115366163, 0.031126761969323946),
    (0.994700467495825, 0.013576229705877047),
];

fn p_density(g2e: f64, p: f64) -> f64 {
    if p == 2.0 {
        0.5 * g2e
    } else {
        g2e.powf(0.5 * p) / p
    }
}

fn p_weight(g2e: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if g2e == 0.0 {
        // limit of g^{p-2} g_k terms for p > 1
        0.0
    } else {
        g2e.powf(0.5 * p - 1.0)
    }
}

/// Energy and (optionally) its exact gradient. The gradient of the
/// p-term scatters lambda_{k,i} = w_i (g_i^2 + eps^2)^{(p-2)/2} (X_k u)_i
/// back through the stencil adjoint.
pub fn energy_eval(
    grid: &Grid,
    u: &[f64],
    p: f64,
    load: Load,
    eps: f64,
    grad: Option<&mut [f64]>,
) -> Result<f64, SolverError> {
    assert!(p > 1.0);
    let nodes = grid.node_count();
    assert_eq!(u.len(), nodes);
    let eps2 = eps * eps;
    let n1 = grid.first_stratum();
    let mut e = 0.0;
    let mut xku = vec![0.0; n1];
    let mut grad = grad;
    if let Some(gr) = grad.as_deref_mut() {
        gr.fill(0.0);
    }
    for i in 0..nodes {
        let w = grid.weight(i);
        let mut g2 = 0.0;
        for (k, xk) in xku.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (slot, &j) in grid.active_axes(k).iter().enumerate() {
                let c = grid.coeff_table(k, slot)[i];
                if c != 0.0 {
                    acc += c * grid.energy_axis_derivative(u, i, j);
                }
            }
            *xk = acc;
            g2 += acc * acc;
        }
        let g2e = g2 + eps2;
        e += w * p_density(g2e, p);
        e -= w * load.potential(grid, i, u[i])?;
        if let Some(gr) = grad.as_deref_mut() {
            let weight = p_weight(g2e, p);
            for (k, &xk) in xku.iter().enumerate() {
                let lambda = w * weight * xk;
                if lambda == 0.0 {
                    continue;
                }
                for (slot, &j) in grid.active_axes(k).iter().enumerate() {
                    let c = grid.coeff_table(k, slot)[i];
                    if c == 0.0 {
                        continue;
                    }
                    let a = lambda * c;
                    for s in grid.energy_stencil(i, j) {
                        gr[s.node as usize] += a * s.coeff;
                    }
                }
            }
            gr[i] -= w * load.force(grid, i, u[i])?;
        }
    }
    Ok(e)
}

/// E(u) and its exact discrete gradient; eps must be positive.
pub fn discrete_energy(
    grid: &Grid,
    u: &[f64],
    p: f64,
    load: Load,
    eps: f64,
) -> Result<(f64, Vec<f64>), SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::NonPositiveEps);
    }
    let mut grad = vec![0.0; grid.node_count()];
    let e = energy_eval(grid, u, p, load, eps, Some(&mut grad))?;
    Ok((e, grad))
}

/// The discrete operator -L_p u: the gradient of the pure p-term divided
/// by the node weights. eps = 0 is allowed (degenerate nodes take the
/// limit value).
pub fn apply_p_operator(
    grid: &Grid,
    u: &[f64],
    p: f64,
    eps: f64,
) -> Result<Vec<f64>, SolverError> {
    let mut grad = vec![0.0; grid.node_count()];
    energy_eval(grid, u, p, Load::None, eps, Some(&mut grad))?;
    for i in 0..grid.node_count() {
        grad[i] /= grid.weight(i);
    }
    Ok(grad)
}

/// Weak-form residual against the nodal hat basis: for each interior node
/// the mismatch sum w |grad u|_eps^{p-2} (grad~ u)(phi) - sum w F phi is
/// exactly the energy-gradient component; the normalized form divides by
/// the hat's energy seminorm. Returns (max normalized, max raw).
pub fn weak_residual(
    grid: &Grid,
    u: &[f64],
    p: f64,
    load: Load,
    eps: f64,
) -> Result<(f64, f64), SolverError> {
    let mut grad = vec![0.0; grid.node_count()];
    energy_eval(grid, u, p, load, eps, Some(&mut grad))?;

    // hat energies: s_n^2 = sum_{i,k} w_i (X_k e_n)_i^2, accumulated by
    // scattering each node's stencil contributions
    let nodes = grid.node_count();
    let n1 = grid.first_stratum();
    let mut s2 = vec![0.0; nodes];
    let mut contrib: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
    for i in 0..nodes {
        let w = grid.weight(i);
        for k in 0..n1 {
            contrib.clear();
            for (slot, &j) in grid.active_axes(k).iter().enumerate() {
                let c = grid.coeff_table(k, slot)[i];
                if c == 0.0 {
                    continue;
                }
                for s in grid.energy_stencil(i, j) {
                    *contrib.entry(s.node).or_insert(0.0) += c * s.coeff;
                }
            }
            for (&n, &v) in contrib.iter() {
                s2[n as usize] += w * v * v;
            }
        }
    }

    let mut max_norm: f64 = 0.0;
    let mut max_raw: f64 = 0.0;
    for &n in grid.interior() {
        let raw = grad[n].abs();
        max_raw = max_raw.max(raw);
        let s = s2[n].sqrt();
        if s > 0.0 {
            max_norm = max_norm.max(raw / s);
        }
    }
    Ok((max_norm, max_raw))
}

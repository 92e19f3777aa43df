//! Nonlinear conjugate gradient (Polak-Ribiere+, Armijo backtracking) on
//! the discrete Dirichlet energy, over the interior unknowns with the
//! boundary trace pinned to zero.

use super::energy::{energy_eval, weak_residual, Load};
use super::grid::Grid;
use super::SolverError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub enum Init {
    Zero,
    /// Seeded uniform values on the interior; positive draws from
    /// (0, scale], symmetric draws from [-scale, scale].
    Seeded { scale: f64, positive: bool },
    /// Full nodal vector (boundary entries are overwritten with zero).
    Vector(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolveOpts {
    pub tol: f64,
    pub max_iter: usize,
    pub eps: f64,
    pub seed: u64,
    pub init: Init,
    /// Halve eps from 1e-2 down to the target, warm-starting each stage.
    pub eps_continuation: bool,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts {
            tol: 1e-8,
            max_iter: 200_000,
            eps: 1e-8,
            seed: 0,
            init: Init::Zero,
            eps_continuation: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridSolution {
    /// Nodal values (boundary entries zero).
    pub values: Vec<f64>,
    pub iterations: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub weak_residual_norm: f64,
    pub eps: f64,
    /// Energy after every accepted step; nonincreasing.
    pub energy_trace: Vec<f64>,
}

impl GridSolution {
    pub fn sup_norm(&self) -> f64 {
        Grid::sup_norm(&self.values)
    }

    pub fn min_interior(&self, grid: &Grid) -> f64 {
        grid.interior()
            .iter()
            .map(|&i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Minimizes the discrete energy; accepts when the interior gradient
/// two-norm drops below tol (1 + |E|).
pub fn solve_dirichlet(
    grid: &Grid,
    p: f64,
    load: Load,
    opts: &SolveOpts,
) -> Result<GridSolution, SolverError> {
    if !(opts.eps > 0.0) {
        return Err(SolverError::NonPositiveEps);
    }
    let nodes = grid.node_count();
    let interior = grid.interior();
    let mut u = vec![0.0; nodes];
    match &opts.init {
        Init::Zero => {}
        Init::Seeded { scale, positive } => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for &i in interior {
                u[i] = if *positive {
                    rng.gen_range(0.0..*scale) + 1e-6
                } else {
                    rng.gen_range(-*scale..*scale)
                };
            }
        }
        Init::Vector(v) => {
            assert_eq!(v.len(), nodes);
            for &i in interior {
                u[i] = v[i];
            }
        }
    }

    let mut eps_stages = vec![opts.eps];
    if opts.eps_continuation && opts.eps < 1e-2 {
        let mut stages = Vec::new();
        let mut e = 1e-2;
        while e > opts.eps * 2.0 {
            stages.push(e);
            e *= 0.5;
        }
        stages.push(opts.eps);
        eps_stages = stages;
    }

    let mut trace: Vec<f64> = Vec::new();
    let mut total_iters = 0usize;
    let mut last = (0.0f64, 0.0f64); // (energy, gradient norm)

    for (stage, &eps) in eps_stages.iter().enumerate() {
        let loose = stage + 1 < eps_stages.len();
        let tol = if loose { (opts.tol * 1e3).min(1e-6) } else { opts.tol };
        let (e, gn, iters) =
            ncg_stage(grid, p, load, eps, tol, opts.max_iter, &mut u, &mut trace)?;
        total_iters += iters;
        last = (e, gn);
    }

    let (wres, _) = weak_residual(grid, &u, p, load, opts.eps)?;
    Ok(GridSolution {
        values: u,
        iterations: total_iters,
        energy: last.0,
        gradient_norm: last.1,
        weak_residual_norm: wres,
        eps: opts.eps,
        energy_trace: trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn ncg_stage(
    grid: &Grid,
    p: f64,
    load: Load,
    eps: f64,
    tol: f64,
    max_iter: usize,
    u: &mut [f64],
    trace: &mut Vec<f64>,
) -> Result<(f64, f64, usize), SolverError> {
    let nodes = grid.node_count();
    let interior = grid.interior();
    let m = interior.len();

    let dot = |a: &[f64], b: &[f64]| -> f64 {
        interior.iter().map(|&i| a[i] * b[i]).sum()
    };

    let mut grad = vec![0.0; nodes];
    let mut e = energy_eval(grid, u, p, load, eps, Some(&mut grad))?;
    trace.push(e);
    let mut g2 = dot(&grad, &grad);
    let mut dir: Vec<f64> = grad.iter().map(|v| -v).collect();
    for i in 0..nodes {
        if grid.is_boundary(i) {
            dir[i] = 0.0;
        }
    }
    let mut alpha_guess = 1.0 / (1.0 + g2.sqrt());
    let mut trial = vec![0.0; nodes];
    let mut new_grad = vec![0.0; nodes];
    let restart_period = (m.max(16)).min(200);

    for iter in 0..max_iter {
        let gnorm = g2.sqrt();
        if gnorm <= tol * (1.0 + e.abs()) {
            return Ok((e, gnorm, iter));
        }
        let mut slope = dot(&grad, &dir);
        if slope >= -1e-300 {
            for &i in interior {
                dir[i] = -grad[i];
            }
            slope = -g2;
        }

        let energy_at = |alpha: f64, trial: &mut [f64]| -> Option<f64> {
            for &i in interior {
                trial[i] = u[i] + alpha * dir[i];
            }
            match energy_eval(grid, trial, p, load, eps, None) {
                Ok(v) if v.is_finite() => Some(v),
                _ => None,
            }
        };

        // Probe step, then the minimizer of the quadratic fit through
        // (0, e, slope) and the probe; exact for quadratic energies.
        let mut alpha1 = alpha_guess.max(1e-18);
        let mut e1 = None;
        for _ in 0..60 {
            if let Some(v) = energy_at(alpha1, &mut trial) {
                e1 = Some(v);
                break;
            }
            alpha1 *= 0.5;
        }
        let Some(e1) = e1 else {
            return Err(SolverError::LineSearchStall(iter));
        };
        let denom = e1 - e - slope * alpha1;
        let mut alpha = if denom > 0.0 {
            (-0.5 * slope * alpha1 * alpha1 / denom).clamp(1e-3 * alpha1, 1e3 * alpha1)
        } else {
            // the probe already sees concave decrease; take it and grow next time
            alpha1
        };

        // Armijo backtracking with c = 1e-4 and shrink 0.5
        let mut accepted = None;
        for _ in 0..80 {
            if let Some(et) = energy_at(alpha, &mut trial) {
                if et <= e + 1e-4 * alpha * slope {
                    accepted = Some(et);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(et) = accepted else {
            return Err(SolverError::LineSearchStall(iter));
        };
        for &i in interior {
            u[i] = trial[i];
        }
        let enew = energy_eval(grid, u, p, load, eps, Some(&mut new_grad))?;
        let _ = et;
        trace.push(enew);

        // Polak-Ribiere+ with periodic restart
        let g2_new = dot(&new_grad, &new_grad);
        let mut beta = (g2_new - dot(&new_grad, &grad)) / g2;
        if beta < 0.0 || (iter + 1) % restart_period == 0 {
            beta = 0.0;
        }
        for &i in interior {
            dir[i] = -new_grad[i] + beta * dir[i];
        }
        std::mem::swap(&mut grad, &mut new_grad);
        g2 = g2_new;
        e = enew;
        alpha_guess = (alpha * 2.0).min(1e8);
    }
    Err(SolverError::NoConvergence {
        iterations: max_iter,
        gradient_norm: g2.sqrt(),
        trace: trace.clone(),
    })
}

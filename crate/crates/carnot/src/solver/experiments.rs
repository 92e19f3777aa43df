//! Theorem-level numerical experiments: trivial-solution uniqueness for
//! the homogeneous Dirichlet and Schrodinger problems, the comparison
//! principle for sublinear reactions, and uniqueness of positive
//! solutions under assumptions (a) and (b).

use super::energy::Load;
use super::grid::Grid;
use super::ncg::{solve_dirichlet, GridSolution, Init, SolveOpts};
use super::reaction::Reaction;
use super::SolverError;
use crate::expr::Expression;

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub name: String,
    /// Headline number (max sup-norm, max violation, or max pairwise gap).
    pub metric: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub runs: usize,
    pub notes: Vec<String>,
}

#[derive(Clone)]
pub enum TrivialVariant {
    /// L_p u = 0.
    Plain,
    /// -L_p u + q(u, x) u = 0 with q >= 0 bounded; the expression may use
    /// the coordinates and `rho` for the solution value.
    Schrodinger(Expression),
}

/// Solves the homogeneous problem from seeded random initializations and
/// reports the largest sup-norm reached; the corollaries predict the
/// trivial solution, so the pass threshold is 1e-5.
pub fn trivial_solution_experiment(
    grid: &Grid,
    p: f64,
    variant: &TrivialVariant,
    starts: usize,
    seed: u64,
) -> Result<ExperimentReport, SolverError> {
    let reaction = match variant {
        TrivialVariant::Plain => None,
        TrivialVariant::Schrodinger(q) => {
            // sampled nonnegativity of the potential
            for node in 0..grid.node_count() {
                for rho in [-1.0, -0.25, 0.0, 0.25, 1.0] {
                    let val = q.eval_with(grid.coords(node), &[("rho", rho)])?;
                    if val < 0.0 {
                        return Err(SolverError::NegativePotential { node, value: val });
                    }
                }
            }
            // F(x, u) = -q(u, x) u
            let f = Expression::neg(Expression::mul(q.clone(), Expression::param("rho")));
            Some(Reaction::unchecked(f))
        }
    };
    let load = match &reaction {
        Some(r) => Load::Expr(r),
        None => Load::None,
    };
    let mut metric: f64 = 0.0;
    let mut notes = Vec::new();
    for run in 0..starts {
        let opts = SolveOpts {
            tol: 1e-8,
            seed: seed.wrapping_add(run as u64),
            init: Init::Seeded {
                scale: 0.3,
                positive: false,
            },
            ..Default::default()
        };
        let sol = solve_dirichlet(grid, p, load, &opts)?;
        let norm = sol.sup_norm();
        metric = metric.max(norm);
        notes.push(format!(
            "run {run}: sup norm {:.3e} after {} iterations",
            norm, sol.iterations
        ));
    }
    let tolerance = 1e-5;
    Ok(ExperimentReport {
        name: match variant {
            TrivialVariant::Plain => "trivial".into(),
            TrivialVariant::Schrodinger(_) => "schrodinger".into(),
        },
        metric,
        tolerance,
        pass: metric < tolerance,
        runs: starts,
        notes,
    })
}

/// Constructs the sub/supersolution pair of the comparison theorem for a
/// sublinear reaction F(x) rho^q (0 < q < p-1): v solves the equality
/// problem by a frozen-coefficient fixed point, u the same problem with a
/// +delta load, so -L_p u >= F u^q. Reports max (v - u)_+.
pub fn comparison_experiment(
    grid: &Grid,
    p: f64,
    q_exp: f64,
    f_coeff: &Expression,
    delta: f64,
) -> Result<ExperimentReport, SolverError> {
    assert!(delta > 0.0);
    if !(q_exp > 0.0 && q_exp < p - 1.0) {
        return Err(SolverError::ReactionViolatesAssumptions(
            "comparison needs 0 < q < p-1",
        ));
    }
    let nodes = grid.node_count();
    let mut f_vals = vec![0.0; nodes];
    let mut f_max: f64 = 0.0;
    for i in 0..nodes {
        let v = f_coeff.eval(grid.coords(i))?;
        if v < 0.0 {
            return Err(SolverError::ReactionViolatesAssumptions(
                "comparison needs F >= 0",
            ));
        }
        f_vals[i] = v;
        f_max = f_max.max(v);
    }
    if f_max == 0.0 {
        return Err(SolverError::ReactionViolatesAssumptions(
            "comparison needs F not identically zero",
        ));
    }

    let solve_fixed_point = |extra: f64| -> Result<(GridSolution, usize), SolverError> {
        let base_opts = SolveOpts {
            tol: 1e-8,
            eps_continuation: (p - 2.0).abs() > 0.4,
            ..Default::default()
        };
        let load0: Vec<f64> = f_vals.iter().map(|f| f + extra).collect();
        let mut sol = solve_dirichlet(grid, p, Load::Frozen(&load0), &base_opts)?;
        for sweep in 0..60 {
            let load: Vec<f64> = (0..nodes)
                .map(|i| f_vals[i] * sol.values[i].max(0.0).powf(q_exp) + extra)
                .collect();
            let opts = SolveOpts {
                tol: 1e-8,
                init: Init::Vector(sol.values.clone()),
                ..Default::default()
            };
            let next = solve_dirichlet(grid, p, Load::Frozen(&load), &opts)?;
            let diff: f64 = (0..nodes)
                .map(|i| (next.values[i] - sol.values[i]).abs())
                .fold(0.0, f64::max);
            let scale = Grid::sup_norm(&next.values);
            sol = next;
            if !scale.is_finite() || scale > 1e8 {
                return Err(SolverError::FixedPointDivergence(sweep));
            }
            if diff < 3e-7 {
                return Ok((sol, sweep + 1));
            }
        }
        Err(SolverError::FixedPointDivergence(60))
    };

    let (v, sweeps_v) = solve_fixed_point(0.0)?;
    let (u, sweeps_u) = solve_fixed_point(delta)?;
    let metric = (0..nodes)
        .map(|i| (v.values[i] - u.values[i]).max(0.0))
        .fold(0.0, f64::max);
    let tolerance = 1e-6;
    Ok(ExperimentReport {
        name: "comparison".into(),
        metric,
        tolerance,
        pass: metric <= tolerance,
        runs: 2,
        notes: vec![
            format!("subsolution fixed point converged in {sweeps_v} sweeps"),
            format!("supersolution (+{delta}) fixed point converged in {sweeps_u} sweeps"),
            format!("max v = {:.4}, max u = {:.4}", v.sup_norm(), u.sup_norm()),
        ],
    })
}

/// Runs the Dirichlet problem from several positive seeded starts,
/// discards runs that do not converge to a positive solution, and reports
/// the largest pairwise sup-distance among the survivors. Refuses
/// reactions that fail the machine checks of assumptions (a) or (b).
pub fn uniqueness_experiment(
    grid: &Grid,
    p: f64,
    reaction: &Reaction,
    n_starts: usize,
    seed: u64,
) -> Result<ExperimentReport, SolverError> {
    if !reaction.satisfies_growth() {
        return Err(SolverError::ReactionViolatesAssumptions(
            "(a) positivity/growth",
        ));
    }
    if !reaction.satisfies_decrease() {
        return Err(SolverError::ReactionViolatesAssumptions(
            "(b) strict decrease of F/rho^{p-1}",
        ));
    }
    let q = grid.homogeneous_dimension();
    if !(p > 1.0 && p <= q as f64) {
        return Err(SolverError::BadExponent { p, q });
    }

    let mut kept: Vec<GridSolution> = Vec::new();
    let mut notes = Vec::new();
    for run in 0..n_starts {
        let opts = SolveOpts {
            tol: 3e-8,
            seed: seed.wrapping_add(1000 * run as u64),
            init: Init::Seeded {
                scale: 0.5,
                positive: true,
            },
            eps_continuation: (p - 2.0).abs() > 0.4,
            ..Default::default()
        };
        let sol = solve_dirichlet(grid, p, Load::Expr(reaction), &opts)?;
        let min_int = sol.min_interior(grid);
        if min_int > 0.0 {
            notes.push(format!(
                "run {run}: positive solution, sup {:.5}, {} iterations",
                sol.sup_norm(),
                sol.iterations
            ));
            kept.push(sol);
        } else {
            notes.push(format!("run {run}: discarded (min interior {min_int:.3e})"));
        }
    }

    let mut metric: f64 = 0.0;
    for a in 0..kept.len() {
        for b in (a + 1)..kept.len() {
            let d = kept[a]
                .values
                .iter()
                .zip(&kept[b].values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            metric = metric.max(d);
        }
    }
    let tolerance = 1e-5;
    let pass = kept.len() >= 2 && metric <= tolerance;
    Ok(ExperimentReport {
        name: "uniqueness".into(),
        metric,
        tolerance,
        pass,
        runs: n_starts,
        notes,
    })
}

//! Reaction terms F(x, rho) with machine-checked structural flags: (a)
//! positivity and the growth bound F <= C (rho^{p-1} + 1), (b) strict
//! decrease of rho -> F / rho^{p-1}, both sampled on grids before any
//! uniqueness experiment is allowed to run.

use crate::expr::{EvalError, Expression};

#[derive(Clone, Debug)]
pub struct Reaction {
    expr: Expression,
    satisfies_growth: bool,
    satisfies_decrease: bool,
    growth_constant: f64,
}

impl Reaction {
    /// Analyze F on the given spatial sample points and a log-spaced rho
    /// grid. Evaluation failures on the positive axis mark both flags
    /// false rather than erroring, so diagnostics can still run.
    pub fn analyze(
        expr: Expression,
        p: f64,
        xs: &[Vec<f64>],
    ) -> Result<Reaction, EvalError> {
        let rho_grid: Vec<f64> = {
            let (lo, hi, m) = (1e-3f64, 1e3f64, 120);
            let step = (hi / lo).ln() / (m - 1) as f64;
            (0..m).map(|i| lo * (step * i as f64).exp()).collect()
        };
        let mut positive = true;
        let mut decreasing = true;
        let mut growth: f64 = 0.0;
        for x in xs {
            let mut prev: Option<f64> = None;
            for &rho in &rho_grid {
                let f = match expr.eval_with(x, &[("rho", rho)]) {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        positive = false;
                        decreasing = false;
                        prev = None;
                        continue;
                    }
                };
                if f <= 0.0 {
                    positive = false;
                }
                growth = growth.max(f / (rho.powf(p - 1.0) + 1.0));
                let ratio = f / rho.powf(p - 1.0);
                if let Some(prev) = prev {
                    if !(ratio < prev - 1e-12 * (1.0 + prev.abs())) {
                        decreasing = false;
                    }
                }
                prev = Some(ratio);
            }
        }
        Ok(Reaction {
            expr,
            satisfies_growth: positive && growth.is_finite(),
            satisfies_decrease: decreasing,
            growth_constant: growth,
        })
    }

    /// A reaction used as a plain load or diagnostic, skipping the flags.
    pub fn unchecked(expr: Expression) -> Reaction {
        Reaction {
            expr,
            satisfies_growth: false,
            satisfies_decrease: false,
            growth_constant: f64::NAN,
        }
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    /// (a): positive with finite growth constant on the sample grid.
    pub fn satisfies_growth(&self) -> bool {
        self.satisfies_growth
    }

    /// (b): rho -> F / rho^{p-1} strictly decreasing on the sample grid.
    pub fn satisfies_decrease(&self) -> bool {
        self.satisfies_decrease
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn eval(&self, x: &[f64], rho: f64) -> Result<f64, EvalError> {
        self.expr.eval_with(x, &[("rho", rho)])
    }
}

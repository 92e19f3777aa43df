//! Tensor-product grid on a box with Dirichlet boundary flags, per-node
//! generator coefficients, and second-order difference stencils (central
//! in the interior, one-sided on the faces).

use super::SolverError;
use crate::group::StratifiedGroup;

#[derive(Clone, Copy, Debug)]
pub(crate) struct StencilEntry {
    pub node: u32,
    pub coeff: f64,
}

#[derive(Clone, Debug)]
pub struct Grid {
    group_name: String,
    q: u32,
    dim: usize,
    n1: usize,
    counts: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    spacing: Vec<f64>,
    nodes: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    is_boundary: Vec<bool>,
    interior: Vec<usize>,
    /// active[k] lists the axes j where generator k has a nonzero
    /// coefficient; ctab[k] holds the matching per-node coefficient values.
    active: Vec<Vec<usize>>,
    ctab: Vec<Vec<Vec<f64>>>,
    /// dsten[node * dim + j]: three-point difference stencil for d/dx_j
    /// (central inside, one-sided second-order on the faces).
    dsten: Vec<[StencilEntry; 3]>,
    /// esten: the stencils used inside the discrete energy; identical in
    /// the interior but first-order one-sided on the faces, which keeps
    /// the assembled scheme adjoint-consistent at near-boundary rows and
    /// the minimizers second-order accurate.
    esten: Vec<[StencilEntry; 3]>,
}

/// Builds the grid and precomputes the horizontal-derivative tables:
/// X_k u is approximated at the nodes by sum_j c_{k,j}(x) D_j u with D_j
/// the second-order stencils.
pub fn discretize(
    g: &StratifiedGroup,
    lo: &[f64],
    hi: &[f64],
    counts: &[usize],
) -> Result<Grid, SolverError> {
    let dim = g.dim();
    assert_eq!(lo.len(), dim);
    assert_eq!(hi.len(), dim);
    assert_eq!(counts.len(), dim);
    for (axis, &c) in counts.iter().enumerate() {
        if c < 4 {
            return Err(SolverError::TooCoarse { axis, count: c });
        }
    }
    let spacing: Vec<f64> = (0..dim)
        .map(|j| (hi[j] - lo[j]) / (counts[j] - 1) as f64)
        .collect();
    let nodes: usize = counts.iter().product();
    let mut strides = vec![1usize; dim];
    for j in (0..dim.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * counts[j + 1];
    }

    let mut coords = vec![0.0; nodes * dim];
    let mut weights = vec![0.0; nodes];
    let mut is_boundary = vec![false; nodes];
    let mut interior = Vec::new();
    let mut dsten = Vec::with_capacity(nodes * dim);
    let mut esten = Vec::with_capacity(nodes * dim);

    let mut idx = vec![0usize; dim];
    for flat in 0..nodes {
        let mut w = 1.0;
        let mut boundary = false;
        for j in 0..dim {
            let i = idx[j];
            coords[flat * dim + j] = lo[j] + i as f64 * spacing[j];
            w *= spacing[j] * if i == 0 || i == counts[j] - 1 { 0.5 } else { 1.0 };
            if i == 0 || i == counts[j] - 1 {
                boundary = true;
            }
        }
        weights[flat] = w;
        is_boundary[flat] = boundary;
        if !boundary {
            interior.push(flat);
        }
        for j in 0..dim {
            let i = idx[j];
            let s = strides[j];
            let h = spacing[j];
            if i == 0 {
                dsten.push([
                    StencilEntry { node: flat as u32, coeff: -1.5 / h },
                    StencilEntry { node: (flat + s) as u32, coeff: 2.0 / h },
                    StencilEntry { node: (flat + 2 * s) as u32, coeff: -0.5 / h },
                ]);
                esten.push([
                    StencilEntry { node: flat as u32, coeff: -1.0 / h },
                    StencilEntry { node: (flat + s) as u32, coeff: 1.0 / h },
                    StencilEntry { node: flat as u32, coeff: 0.0 },
                ]);
            } else if i == counts[j] - 1 {
                dsten.push([
                    StencilEntry { node: flat as u32, coeff: 1.5 / h },
                    StencilEntry { node: (flat - s) as u32, coeff: -2.0 / h },
                    StencilEntry { node: (flat - 2 * s) as u32, coeff: 0.5 / h },
                ]);
                esten.push([
                    StencilEntry { node: flat as u32, coeff: 1.0 / h },
                    StencilEntry { node: (flat - s) as u32, coeff: -1.0 / h },
                    StencilEntry { node: flat as u32, coeff: 0.0 },
                ]);
            } else {
                let central = [
                    StencilEntry { node: (flat + s) as u32, coeff: 0.5 / h },
                    StencilEntry { node: (flat - s) as u32, coeff: -0.5 / h },
                    StencilEntry { node: flat as u32, coeff: 0.0 },
                ];
                dsten.push(central);
                esten.push(central);
            }
        }
        // odometer
        for j in (0..dim).rev() {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }

    let n1 = g.first_stratum();
    let mut active = Vec::with_capacity(n1);
    let mut ctab = Vec::with_capacity(n1);
    for k in 0..n1 {
        let gen = g.generator(k);
        let mut axes = Vec::new();
        let mut tabs = Vec::new();
        for j in 0..dim {
            if gen.coeff(j).is_zero() {
                continue;
            }
            let compiled = gen.coeff(j).compile();
            let tab: Vec<f64> = (0..nodes)
                .map(|i| compiled.eval(&coords[i * dim..(i + 1) * dim]))
                .collect();
            axes.push(j);
            tabs.push(tab);
        }
        active.push(axes);
        ctab.push(tabs);
    }

    Ok(Grid {
        group_name: g.name().to_string(),
        q: g.homogeneous_dimension(),
        dim,
        n1,
        counts: counts.to_vec(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        spacing,
        nodes,
        coords,
        weights,
        is_boundary,
        interior,
        active,
        ctab,
        dsten,
        esten,
    })
}

impl Grid {
    pub fn group_name(&self) -> &str {
        &self.group_name
    }

    pub fn homogeneous_dimension(&self) -> u32 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn first_stratum(&self) -> usize {
        self.n1
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn coords(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.is_boundary[node]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Coefficient of generator k on axis j at a node (0 if inactive).
    pub fn coefficient(&self, k: usize, j: usize, node: usize) -> f64 {
        match self.active[k].iter().position(|&a| a == j) {
            Some(a) => self.ctab[k][a][node],
            None => 0.0,
        }
    }

    pub(crate) fn active_axes(&self, k: usize) -> &[usize] {
        &self.active[k]
    }

    pub(crate) fn coeff_table(&self, k: usize, slot: usize) -> &[f64] {
        &self.ctab[k][slot]
    }

    pub(crate) fn stencil(&self, node: usize, axis: usize) -> &[StencilEntry; 3] {
        &self.dsten[node * self.dim + axis]
    }

    pub(crate) fn energy_stencil(&self, node: usize, axis: usize) -> &[StencilEntry; 3] {
        &self.esten[node * self.dim + axis]
    }

    pub(crate) fn energy_axis_derivative(&self, u: &[f64], node: usize, axis: usize) -> f64 {
        self.energy_stencil(node, axis)
            .iter()
            .map(|e| e.coeff * u[e.node as usize])
            .sum()
    }

    /// D_j u at a node.
    pub fn axis_derivative(&self, u: &[f64], node: usize, axis: usize) -> f64 {
        self.stencil(node, axis)
            .iter()
            .map(|e| e.coeff * u[e.node as usize])
            .sum()
    }

    /// (X_k u) at a node via the coefficient table.
    pub fn horizontal_derivative(&self, u: &[f64], node: usize, k: usize) -> f64 {
        let mut acc = 0.0;
        for (slot, &j) in self.active[k].iter().enumerate() {
            let c = self.ctab[k][slot][node];
            if c != 0.0 {
                acc += c * self.axis_derivative(u, node, j);
            }
        }
        acc
    }

    /// Max-norm over all nodes.
    pub fn sup_norm(u: &[f64]) -> f64 {
        u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Preset;

    #[test]
    fn interval_grid_basics() {
        let g = StratifiedGroup::preset(Preset::Euclidean(1));
        let grid = discretize(&g, &[0.0], &[1.0], &[5]).unwrap();
        assert_eq!(grid.spacing(), &[0.25]);
        assert_eq!(grid.node_count(), 5);
        assert_eq!(grid.interior().len(), 3);
        // central stencil at an interior node
        let u: Vec<f64> = (0..5).map(|i| (i as f64 * 0.25).powi(2)).collect();
        let d = grid.axis_derivative(&u, 2, 0);
        assert!((d - 1.0).abs() < 1e-13); // exact on quadratics
    }

    #[test]
    fn too_coarse_is_rejected() {
        let g = StratifiedGroup::preset(Preset::Euclidean(2));
        assert!(matches!(
            discretize(&g, &[0.0, 0.0], &[1.0, 1.0], &[5, 3]),
            Err(SolverError::TooCoarse { axis: 1, count: 3 })
        ));
    }

    #[test]
    fn h1_coefficient_table_matches_symbolic() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let grid = discretize(&g, &[0.0; 3], &[1.0; 3], &[5, 5, 5]).unwrap();
        for node in 0..grid.node_count() {
            let x = grid.coords(node).to_vec();
            for k in 0..2 {
                for j in 0..3 {
                    let table = grid.coefficient(k, j, node);
                    let exact = g.generator(k).eval_coeff(j, &x);
                    assert!((table - exact).abs() < 1e-14);
                }
            }
        }
        // spot value from the coefficient convention: X_1 at (0.5, 0.5, 0.5)
        // has coefficients (1, 0, -0.25)
        let node = (0..grid.node_count())
            .find(|&i| grid.coords(i) == [0.5, 0.5, 0.5])
            .unwrap();
        assert_eq!(grid.coefficient(0, 0, node), 1.0);
        assert_eq!(grid.coefficient(0, 1, node), 0.0);
        assert_eq!(grid.coefficient(0, 2, node), -0.25);
    }

    #[test]
    fn horizontal_derivative_exact_on_affine() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let grid = discretize(&g, &[0.0; 3], &[1.0; 3], &[6, 5, 7]).unwrap();
        // u = 2 x1 - x2 + 3 x3
        let u: Vec<f64> = (0..grid.node_count())
            .map(|i| {
                let x = grid.coords(i);
                2.0 * x[0] - x[1] + 3.0 * x[2]
            })
            .collect();
        for &node in grid.interior() {
            let x = grid.coords(node).to_vec();
            // X_1 u = 2 + 3(-x2/2), X_2 u = -1 + 3(x1/2)
            let e1 = 2.0 - 1.5 * x[1];
            let e2 = -1.0 + 1.5 * x[0];
            assert!((grid.horizontal_derivative(&u, node, 0) - e1).abs() < 1e-12);
            assert!((grid.horizontal_derivative(&u, node, 1) - e2).abs() < 1e-12);
        }
        // faces use the one-sided second-order stencil, still exact on affine
        for node in 0..grid.node_count() {
            if grid.is_boundary(node) {
                let x = grid.coords(node).to_vec();
                let e1 = 2.0 - 1.5 * x[1];
                assert!((grid.horizontal_derivative(&u, node, 0) - e1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let g = StratifiedGroup::preset(Preset::Heisenberg(1));
        let grid = discretize(&g, &[0.0, -1.0, 2.0], &[2.0, 1.0, 3.0], &[7, 6, 5]).unwrap();
        let total: f64 = (0..grid.node_count()).map(|i| grid.weight(i)).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }
}

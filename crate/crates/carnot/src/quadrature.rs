//! Tensor-product Gauss-Legendre quadrature on the unit cube.

/// Gauss-Legendre nodes and weights of a given order per axis, stored on
/// [0, 1]. A rule of order n integrates polynomials of degree 2n-1 exactly
/// on each axis.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be at least 1");
        let (nodes, weights) = gauss_legendre_01(order);
        QuadratureRule {
            order,
            nodes,
            weights,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// 1D nodes on [0,1].
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// 1D weights summing to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Visit the tensor-product nodes of [0,1]^dim in lexicographic order.
    /// `dim = 0` is the single empty node with weight 1 (point integrals).
    pub fn for_each_node<F: FnMut(&[f64], f64)>(&self, dim: usize, mut f: F) {
        let mut idx = vec![0usize; dim];
        let mut node = vec![0.0f64; dim];
        loop {
            let mut w = 1.0;
            for (d, &i) in idx.iter().enumerate() {
                node[d] = self.nodes[i];
                w *= self.weights[i];
            }
            f(&node, w);
            // odometer increment
            let mut d = dim;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.order {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Integrate a function given on [0,1]^dim.
    pub fn integrate_unit<F: FnMut(&[f64]) -> f64>(&self, dim: usize, mut f: F) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(dim, |u, w| acc += w * f(u));
        acc
    }
}

/// Nodes/weights on [0,1] by Newton iteration on the Legendre recurrence.
fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // symmetric counterpart; map both to [0, 1]
        nodes[i] = (1.0 - x) / 2.0;
        weights[i] = w / 2.0;
        nodes[n - 1 - i] = (1.0 + x) / 2.0;
        weights[n - 1 - i] = w / 2.0;
    }
    (nodes, weights)
}

/// Legendre P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exactness_through_degree_2n_minus_1() {
        for order in 1..=12 {
            let rule = QuadratureRule::new(order);
            for deg in 0..=(2 * order - 1) {
                let exact = 1.0 / (deg as f64 + 1.0);
                let approx = rule.integrate_unit(1, |u| u[0].powi(deg as i32));
                assert!(
                    (approx - exact).abs() < 1e-13 * exact.abs().max(1.0),
                    "order {order} degree {deg}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn weights_are_positive_and_sum_to_one() {
        for order in 1..=16 {
            let rule = QuadratureRule::new(order);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_rule_integrates_separable_polys() {
        let rule = QuadratureRule::new(4);
        // int over [0,1]^3 of x^2 y^3 z = (1/3)(1/4)(1/2)
        let v = rule.integrate_unit(3, |u| u[0] * u[0] * u[1].powi(3) * u[2]);
        assert!((v - 1.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn zero_dimensional_rule_is_a_point_mass() {
        let rule = QuadratureRule::new(3);
        let v = rule.integrate_unit(0, |_| 7.5);
        assert_eq!(v, 7.5);
    }
}

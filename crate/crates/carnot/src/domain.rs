//! Admissible domains: coordinate boxes and gauge balls, with oriented
//! boundary patches for differential-form integration.
//!
//! Patches are smooth maps [0,1]^{N-1} -> R^N. Each patch carries a sign
//! that corrects its parameterization to the outward (Stokes) orientation:
//! a parameterization is positive when (n_out, T_1, ..., T_{N-1}) is a
//! positive basis of R^N. The sign is fixed once at construction by probing
//! which side of the patch is interior, so permuting parameters never
//! changes an integral.

use crate::expr::Expression;
use crate::gauge::PolarizableGauge;
use crate::group::{GroupError, StratifiedGroup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("box has empty extent on axis {0}")]
    EmptyBox(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gauge ball radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("could not orient a boundary patch (degenerate tangents)")]
    OrientationFailure,
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Clone, Debug)]
enum PatchGeom {
    /// One endpoint of an interval (N = 1); parameter space is a point.
    Endpoint { x: f64 },
    /// A face of a box; parameters run over the remaining axes ascending.
    BoxFace {
        axis: usize,
        value: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// The gauge sphere d(c^{-1} o x) = R, parameterized by rescaled
    /// angles on the closed-form unit gauge sphere, pushed out by the
    /// group dilation delta_R and left-translated to the center.
    GaugeSphere(Box<SphereData>),
    /// Test wrapper: same surface with the first two parameters swapped.
    Flipped(Box<PatchGeom>),
}

#[derive(Clone, Debug)]
struct SphereData {
    dim: usize,
    radius: f64,
    shape: crate::gauge::GaugeShape,
    /// dilation weight of each coordinate
    weights: Vec<u32>,
    /// components of c o y as expressions in y
    translation: Vec<Expression>,
    /// d(translation_i)/d y_j
    translation_jac: Vec<Vec<Expression>>,
}

/// An oriented boundary patch.
#[derive(Clone, Debug)]
pub struct Patch {
    geom: PatchGeom,
    sign: f64,
}

impl Patch {
    pub fn param_dim(&self) -> usize {
        self.geom.param_dim()
    }

    /// Orientation correction: +1 when the stored parameterization is
    /// already outward-Stokes, -1 otherwise.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        self.geom.point(u)
    }

    /// Tangent vectors d(point)/d(u_t).
    pub fn tangents(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.geom.tangents(u)
    }
}

impl PatchGeom {
    fn param_dim(&self) -> usize {
        match self {
            PatchGeom::Endpoint { .. } => 0,
            PatchGeom::BoxFace { lo, .. } => lo.len() - 1,
            PatchGeom::GaugeSphere(s) => s.dim - 1,
            PatchGeom::Flipped(inner) => inner.param_dim(),
        }
    }

    fn point(&self, u: &[f64]) -> Vec<f64> {
        match self {
            PatchGeom::Endpoint { x } => vec![*x],
            PatchGeom::BoxFace {
                axis,
                value,
                lo,
                hi,
            } => {
                let n = lo.len();
                let mut x = vec![0.0; n];
                x[*axis] = *value;
                let mut t = 0;
                for j in 0..n {
                    if j != *axis {
                        x[j] = lo[j] + u[t] * (hi[j] - lo[j]);
                        t += 1;
                    }
                }
                x
            }
            PatchGeom::GaugeSphere(s) => {
                let (sp, _) = crate::gauge::unit_sphere(&s.shape, &angles(u, s.dim));
                let y: Vec<f64> = sp
                    .iter()
                    .zip(&s.weights)
                    .map(|(v, &w)| s.radius.powi(w as i32) * v)
                    .collect();
                s.translation
                    .iter()
                    .map(|e| e.eval(&y).expect("translation is polynomial"))
                    .collect()
            }
            PatchGeom::Flipped(inner) => inner.point(&swap01(u)),
        }
    }

    fn tangents(&self, u: &[f64]) -> Vec<Vec<f64>> {
        match self {
            PatchGeom::Endpoint { .. } => Vec::new(),
            PatchGeom::BoxFace { axis, lo, hi, .. } => {
                let n = lo.len();
                let mut out = Vec::with_capacity(n - 1);
                for j in 0..n {
                    if j != *axis {
                        let mut t = vec![0.0; n];
                        t[j] = hi[j] - lo[j];
                        out.push(t);
                    }
                }
                out
            }
            PatchGeom::GaugeSphere(s) => {
                let n = s.dim;
                let th = angles(u, n);
                let (sp, dsp) = crate::gauge::unit_sphere(&s.shape, &th);
                let y: Vec<f64> = sp
                    .iter()
                    .zip(&s.weights)
                    .map(|(v, &w)| s.radius.powi(w as i32) * v)
                    .collect();
                let jac: Vec<Vec<f64>> = s
                    .translation_jac
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| e.eval(&y).expect("translation jacobian is polynomial"))
                            .collect()
                    })
                    .collect();
                let mut out = Vec::with_capacity(n - 1);
                for t in 0..(n - 1) {
                    let scale = angle_scale(t, n);
                    let dy: Vec<f64> = (0..n)
                        .map(|i| scale * s.radius.powi(s.weights[i] as i32) * dsp[t][i])
                        .collect();
                    let tv: Vec<f64> = (0..n)
                        .map(|i| (0..n).map(|j| jac[i][j] * dy[j]).sum())
                        .collect();
                    out.push(tv);
                }
                out
            }
            PatchGeom::Flipped(inner) => {
                let mut t = inner.tangents(&swap01(u));
                t.swap(0, 1);
                t
            }
        }
    }
}

fn swap01(u: &[f64]) -> Vec<f64> {
    let mut v = u.to_vec();
    if v.len() >= 2 {
        v.swap(0, 1);
    }
    v
}

fn angles(u: &[f64], dim: usize) -> Vec<f64> {
    (0..dim - 1).map(|t| angle_scale(t, dim) * u[t]).collect()
}

fn angle_scale(t: usize, dim: usize) -> f64 {
    if t + 2 == dim {
        2.0 * std::f64::consts::PI
    } else {
        std::f64::consts::PI
    }
}

#[derive(Clone, Debug)]
enum VolumeMap {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Dilation-polar coordinates about the ball center: u[0] is the gauge
    /// radius fraction, u[1..] the unit-sphere angles.
    Polar(Box<SphereData>),
}

/// An admissible domain with its oriented boundary patches.
#[derive(Clone, Debug)]
pub struct Domain {
    dim: usize,
    label: String,
    patches: Vec<Patch>,
    vol: VolumeMap,
    /// d(c^{-1} o x) as an expression in x, for gauge balls
    membership_gauge: Option<(Expression, f64)>,
    bbox: (Vec<f64>, Vec<f64>),
    diameter: f64,
}

impl Domain {
    pub fn box_domain(lo: &[f64], hi: &[f64]) -> Result<Domain, DomainError> {
        if lo.len() != hi.len() {
            return Err(DomainError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let n = lo.len();
        for j in 0..n {
            if !(hi[j] > lo[j]) {
                return Err(DomainError::EmptyBox(j));
            }
        }
        let mut geoms = Vec::new();
        if n == 1 {
            geoms.push(PatchGeom::Endpoint { x: lo[0] });
            geoms.push(PatchGeom::Endpoint { x: hi[0] });
        } else {
            for axis in 0..n {
                for value in [lo[axis], hi[axis]] {
                    geoms.push(PatchGeom::BoxFace {
                        axis,
                        value,
                        lo: lo.to_vec(),
                        hi: hi.to_vec(),
                    });
                }
            }
        }
        let diameter = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        let mut dom = Domain {
            dim: n,
            label: format!("box{:?}-{:?}", lo, hi),
            patches: Vec::new(),
            vol: VolumeMap::Box {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
            membership_gauge: None,
            bbox: (lo.to_vec(), hi.to_vec()),
            diameter,
        };
        dom.patches = orient_patches(geoms, &dom)?;
        Ok(dom)
    }

    pub fn unit_box(n: usize) -> Domain {
        Domain::box_domain(&vec![0.0; n], &vec![1.0; n]).expect("unit box is valid")
    }

    /// Gauge ball {x : d(c^{-1} o x) < R} on a group with a calibrated gauge.
    pub fn gauge_ball(
        g: &StratifiedGroup,
        pg: &PolarizableGauge,
        center: &[f64],
        radius: f64,
    ) -> Result<Domain, DomainError> {
        let n = g.dim();
        if center.len() != n {
            return Err(DomainError::DimensionMismatch {
                expected: n,
                got: center.len(),
            });
        }
        if !(radius > 0.0) {
            return Err(DomainError::BadRadius(radius));
        }
        if n == 1 {
            // the gauge ball on R^1 is just an interval
            return Domain::box_domain(&[center[0] - radius], &[center[0] + radius]);
        }
        if pg.shape().dim() != n {
            return Err(DomainError::DimensionMismatch {
                expected: n,
                got: pg.shape().dim(),
            });
        }
        let gauge = pg.expression().clone();
        let translation = g.left_translation_exprs(center)?;
        let translation_jac: Vec<Vec<Expression>> = translation
            .iter()
            .map(|e| (0..n).map(|j| e.diff(j)).collect())
            .collect();
        let inv_center = g.inverse(center)?;
        let inv_translation = g.left_translation_exprs(&inv_center)?;
        let membership = gauge.substitute_coords(&inv_translation);

        let sphere = SphereData {
            dim: n,
            radius,
            shape: pg.shape(),
            weights: g.weights().to_vec(),
            translation: translation.clone(),
            translation_jac,
        };
        // bounding box from a coarse boundary scan
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let probe = PatchGeom::GaugeSphere(Box::new(sphere.clone()));
        let m = 9;
        let mut idx = vec![0usize; n - 1];
        loop {
            let u: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) / m as f64).collect();
            let x = probe.point(&u);
            for j in 0..n {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
            let mut d = n - 1;
            loop {
                if d == 0 {
                    idx.clear();
                    break;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
            }
            if idx.is_empty() {
                break;
            }
        }

        let mut dom = Domain {
            dim: n,
            label: format!("gauge_ball(c={:?}, R={})", center, radius),
            patches: Vec::new(),
            vol: VolumeMap::Polar(Box::new(sphere.clone())),
            membership_gauge: Some((membership, radius)),
            bbox: (lo, hi),
            diameter: 2.0 * radius,
        };
        dom.patches = orient_patches(vec![PatchGeom::GaugeSphere(Box::new(sphere))], &dom)?;
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// Diameter used to scale excision radii (Euclidean for boxes, 2R in
    /// gauge units for balls).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.bbox.0, &self.bbox.1)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match (&self.vol, &self.membership_gauge) {
            (VolumeMap::Box { lo, hi }, _) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
            (_, Some((gauge, radius))) => match gauge.eval(x) {
                Ok(d) => d <= *radius,
                Err(_) => false,
            },
            _ => false,
        }
    }

    /// Map a unit-cube node to a domain point with its volume Jacobian.
    pub fn volume_node(&self, u: &[f64]) -> (Vec<f64>, f64) {
        match &self.vol {
            VolumeMap::Box { lo, hi } => {
                let mut jac = 1.0;
                let x: Vec<f64> = (0..self.dim)
                    .map(|j| {
                        jac *= hi[j] - lo[j];
                        lo[j] + u[j] * (hi[j] - lo[j])
                    })
                    .collect();
                (x, jac)
            }
            VolumeMap::Polar(s) => {
                let n = s.dim;
                let th = angles(&u[1..], n);
                let (sp, dsp) = crate::gauge::unit_sphere(&s.shape, &th);
                let rho = u[0] * s.radius;
                let y: Vec<f64> = sp
                    .iter()
                    .zip(&s.weights)
                    .map(|(v, &w)| rho.powi(w as i32) * v)
                    .collect();
                let x: Vec<f64> = s
                    .translation
                    .iter()
                    .map(|e| e.eval(&y).expect("translation is polynomial"))
                    .collect();
                // |det[w . S, dS/dtheta ...]| rho^{Q-1} dr, plus the angle
                // rescalings; left translation is measure preserving.
                let q: u32 = s.weights.iter().sum();
                let mut cols = vec![vec![0.0; n]; n];
                for i in 0..n {
                    cols[0][i] = s.weights[i] as f64 * sp[i];
                }
                for (t, drow) in dsp.iter().enumerate() {
                    cols[t + 1][..n].copy_from_slice(&drow[..n]);
                }
                // det wants rows; build the matrix with entries m[i][j] = cols[j][i]
                let m: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| cols[j][i]).collect())
                    .collect();
                let mut jac = s.radius * rho.powi(q as i32 - 1) * det(&m).abs();
                for i in 0..(n - 1) {
                    jac *= angle_scale(i, n);
                }
                (x, jac)
            }
        }
    }

    /// Seeded uniform samples from the domain interior (rejection from the
    /// bounding box).
    pub fn sample_interior(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (&self.bbox.0, &self.bbox.1);
        let mut out = Vec::with_capacity(count);
        let mut guard = 0usize;
        while out.len() < count && guard < count * 10_000 {
            guard += 1;
            let x: Vec<f64> = (0..self.dim)
                .map(|j| rng.gen_range(lo[j]..hi[j]))
                .collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    /// The built-in polynomial bump: prod_j (1 - s_j^2)^2 with s_j the
    /// affine image of coordinate j in [-1, 1]. Vanishes to second order on
    /// every face; box domains only.
    pub fn bump_expr(&self) -> Expression {
        let VolumeMap::Box { lo, hi } = &self.vol else {
            panic!("bump profile is defined for box domains");
        };
        let mut acc = Expression::num(1.0);
        for j in 0..self.dim {
            let mid = 0.5 * (lo[j] + hi[j]);
            let half = 0.5 * (hi[j] - lo[j]);
            let s = Expression::div(
                Expression::sub(Expression::coord(j), Expression::num(mid)),
                Expression::num(half),
            );
            let one_minus = Expression::sub(Expression::num(1.0), Expression::mul(s.clone(), s));
            acc = Expression::mul(acc, Expression::mul(one_minus.clone(), one_minus));
        }
        acc
    }

    /// Test helper: the same domain with one patch's first two parameters
    /// swapped; the orientation sign is recomputed.
    pub fn with_flipped_patch(&self, idx: usize) -> Result<Domain, DomainError> {
        let mut dom = self.clone();
        let flipped = PatchGeom::Flipped(Box::new(dom.patches[idx].geom.clone()));
        let sign = stokes_sign(&flipped, &dom)?;
        dom.patches[idx] = Patch {
            geom: flipped,
            sign,
        };
        Ok(dom)
    }
}

fn orient_patches(geoms: Vec<PatchGeom>, dom: &Domain) -> Result<Vec<Patch>, DomainError> {
    geoms
        .into_iter()
        .map(|geom| {
            let sign = stokes_sign(&geom, dom)?;
            Ok(Patch { geom, sign })
        })
        .collect()
}

/// +1 when (outward normal, tangents) is positively oriented at the patch
/// center, -1 otherwise. Outward is decided by probing domain membership.
fn stokes_sign(geom: &PatchGeom, dom: &Domain) -> Result<f64, DomainError> {
    let pd = geom.param_dim();
    let u0 = vec![0.5; pd.max(1)];
    let u0 = &u0[..pd];
    let y = geom.point(u0);
    let tangents = geom.tangents(u0);
    let z = cross_normal(&tangents, dom.dim);
    let zn: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(zn > 1e-13) {
        return Err(DomainError::OrientationFailure);
    }
    let z: Vec<f64> = z.iter().map(|v| v / zn).collect();
    let scale = dom.diameter().max(1e-6);
    for k in 0..8 {
        let h = scale * 1e-4 * 0.5f64.powi(k);
        let plus: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - h * b).collect();
        let (ip, im) = (dom.contains(&plus), dom.contains(&minus));
        if !ip && im {
            // z points outward; by construction det[z, T...] > 0
            return Ok(1.0);
        }
        if ip && !im {
            return Ok(-1.0);
        }
    }
    Err(DomainError::OrientationFailure)
}

/// Generalized cross product: the vector z with det[z, T_1, .., T_{N-1}]
/// = |z|^2 >= 0 (so (z, T...) is positively oriented whenever z != 0).
pub fn cross_normal(tangents: &[Vec<f64>], dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    assert_eq!(tangents.len(), dim - 1);
    let mut z = vec![0.0; dim];
    let mut minor = vec![vec![0.0; dim - 1]; dim - 1];
    for i in 0..dim {
        for (r, t) in tangents.iter().enumerate() {
            let mut c = 0;
            for j in 0..dim {
                if j != i {
                    minor[r][c] = t[j];
                    c += 1;
                }
            }
        }
        let m = det(&minor);
        z[i] = if i % 2 == 0 { m } else { -m };
    }
    z
}

/// Determinant of a small dense matrix (LU with partial pivoting).
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return m[0][0];
    }
    if n == 2 {
        return m[0][0] * m[1][1] - m[0][1] * m[1][0];
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut sign = 1.0;
    let mut out = 1.0;
    for col in 0..n {
        let (piv, pv) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pv == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            sign = -sign;
        }
        out *= a[col][col];
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    sign * out
}

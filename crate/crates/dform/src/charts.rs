//! Conformal constant-curvature charts on coordinate boxes.
//!
//! The metric is `λ(x)² δ` with `λ = (1 - κ|x|²/4)^{-1}`. With this sign the
//! curvature tensor is exactly `Rm = κ/2 g∧g` for the operator conventions
//! used in `calculus` (second covariant derivatives commute as
//! `d∇d∇ψ = -κ g∧Gψ`), so κ > 0 is the hyperbolic model and κ < 0 the
//! spherical one.

use crate::algebra::{DoubleFormValue, MetricValue};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Lower bound on `1 - κ|x|²/4` over the closed box.
pub const DOMAIN_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub dim: usize,
    pub kappa: f64,
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(dim: usize, kappa: f64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let c = Self { dim, kappa, bounds };
        c.validate()?;
        Ok(c)
    }

    /// Box `[-half, half]^dim`.
    pub fn centered(dim: usize, kappa: f64, half: f64) -> Result<Self> {
        Self::new(dim, kappa, vec![(-half, half); dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > 4 {
            return Err(Error::InvalidValue(format!("chart dimension {} not in 1..=4", self.dim)));
        }
        if self.bounds.len() != self.dim {
            return Err(Error::DimensionMismatch(self.bounds.len(), self.dim));
        }
        if !self.kappa.is_finite() {
            return Err(Error::InvalidValue("kappa must be finite".into()));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidValue(format!("bad box interval [{lo}, {hi}]")));
            }
        }
        // the denominator is smallest at the corner farthest from the origin
        let far: Vec<f64> = self.bounds.iter().map(|&(lo, hi)| if lo.abs() > hi.abs() { lo } else { hi }).collect();
        if self.denom(&far) < DOMAIN_MARGIN {
            return Err(Error::OutOfDomain(far));
        }
        Ok(())
    }

    fn denom(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        1.0 - self.kappa * r2 / 4.0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().zip(&self.bounds).all(|(v, &(lo, hi))| *v >= lo - 1e-12 * (hi - lo) && *v <= hi + 1e-12 * (hi - lo))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if !self.contains(x) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        Ok(())
    }

    /// Conformal factor λ(x).
    pub fn lambda(&self, x: &[f64]) -> f64 {
        1.0 / self.denom(x)
    }

    /// Gradient of log λ.
    pub fn dlog_lambda(&self, x: &[f64]) -> Vec<f64> {
        let lam = self.lambda(x);
        x.iter().map(|xi| 0.5 * self.kappa * xi * lam).collect()
    }
}

pub fn metric_at(chart: &Chart, x: &[f64]) -> Result<MetricValue> {
    chart.check(x)?;
    Ok(MetricValue::conformal(chart.dim, chart.lambda(x)))
}

/// Christoffel symbols `Γ^k_{ij}` stored at `k*d*d + i*d + j`.
pub fn christoffel_at(chart: &Chart, x: &[f64]) -> Result<Vec<f64>> {
    chart.check(x)?;
    Ok(christoffel_from_dlog(&chart.dlog_lambda(x)))
}

pub(crate) fn christoffel_from_dlog(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut gam = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                if i == k {
                    v += u[j];
                }
                if j == k {
                    v += u[i];
                }
                if i == j {
                    v -= u[k];
                }
                gam[k * d * d + i * d + j] = v;
            }
        }
    }
    gam
}

/// `κ/2 g∧g` at `x`.
pub fn riemann_at(chart: &Chart, x: &[f64]) -> Result<DoubleFormValue> {
    let g = metric_at(chart, x)?;
    let gf = DoubleFormValue::metric(&g);
    Ok(gf.wedge(&gf)?.scale(chart.kappa / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    /// false = lower face (x_axis = min), true = upper face.
    pub upper: bool,
}

impl Face {
    pub fn id(&self) -> usize {
        2 * self.axis + self.upper as usize
    }
    pub fn from_id(id: usize) -> Self {
        Self { axis: id / 2, upper: id % 2 == 1 }
    }
    /// +1 for the upper face, -1 for the lower one.
    pub fn sign(&self) -> f64 {
        if self.upper {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub spacing: Vec<f64>,
    #[serde(skip)]
    pub origin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Interior,
    Boundary(Vec<Face>),
}

impl Grid {
    pub fn new(chart: &Chart, shape: Vec<usize>) -> Result<Self> {
        if shape.len() != chart.dim {
            return Err(Error::DimensionMismatch(shape.len(), chart.dim));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < 5) {
            return Err(Error::InvalidValue(format!("grid needs at least 5 nodes per axis, got {n}")));
        }
        let spacing = shape.iter().zip(&chart.bounds).map(|(&n, &(lo, hi))| (hi - lo) / (n - 1) as f64).collect();
        let origin = chart.bounds.iter().map(|b| b.0).collect();
        Ok(Self { shape, spacing, origin })
    }

    pub fn uniform(chart: &Chart, n: usize) -> Result<Self> {
        Self::new(chart, vec![n; chart.dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn nnodes(&self) -> usize {
        self.shape.iter().product()
    }

    /// Multi-index of a node (last axis fastest).
    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut r = node;
        for a in (0..self.dim()).rev() {
            idx[a] = r % self.shape[a];
            r /= self.shape[a];
        }
        idx
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        let idx = self.multi_index(node);
        let faces: Vec<Face> = idx
            .iter()
            .enumerate()
            .flat_map(|(a, &i)| {
                let mut f = Vec::new();
                if i == 0 {
                    f.push(Face { axis: a, upper: false });
                }
                if i + 1 == self.shape[a] {
                    f.push(Face { axis: a, upper: true });
                }
                f
            })
            .collect();
        if faces.is_empty() {
            NodeKind::Interior
        } else {
            NodeKind::Boundary(faces)
        }
    }

    /// Distance (in layers) from the nearest face.
    pub fn depth(&self, node: usize) -> usize {
        self.multi_index(node).iter().zip(&self.shape).map(|(&i, &n)| i.min(n - 1 - i)).min().unwrap_or(0)
    }

    pub fn faces(&self) -> Vec<Face> {
        (0..2 * self.dim()).map(Face::from_id).collect()
    }

    /// Nodes of a face in face-local row-major order.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let fixed = if face.upper { self.shape[face.axis] - 1 } else { 0 };
        (0..self.nnodes()).filter(|&n| self.multi_index(n)[face.axis] == fixed).collect()
    }

    /// Tensor-product trapezoid weight of a node (coordinate measure).
    pub fn trapezoid_weight(&self, node: usize) -> f64 {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| if i == 0 || i + 1 == self.shape[a] { 0.5 * self.spacing[a] } else { self.spacing[a] })
            .product()
    }
}

/// Outward g-unit normals, one per face incident to `node`.
pub fn boundary_normal(chart: &Chart, grid: &Grid, node: usize) -> Result<Vec<(Face, Vec<f64>)>> {
    match grid.kind(node) {
        NodeKind::Interior => Err(Error::NotBoundaryNode(node)),
        NodeKind::Boundary(faces) => {
            let lam = chart.lambda(&grid.coords(node));
            Ok(faces
                .into_iter()
                .map(|f| {
                    let mut n = vec![0.0; chart.dim];
                    n[f.axis] = f.sign() / lam;
                    (f, n)
                })
                .collect())
        }
    }
}

/// Scalar second fundamental form `h0(X,Y) = g(∇_X n, Y)` on the face
/// tangent space (face axes in increasing order).
pub fn second_fundamental_form(chart: &Chart, grid: &Grid, node: usize) -> Result<DoubleFormValue> {
    let faces = match grid.kind(node) {
        NodeKind::Boundary(f) if f.len() == 1 => f,
        _ => return Err(Error::NotBoundaryNode(node)),
    };
    let x = grid.coords(node);
    Ok(second_fundamental_form_at(chart, faces[0], &x))
}

pub(crate) fn second_fundamental_form_at(chart: &Chart, face: Face, x: &[f64]) -> DoubleFormValue {
    let d = chart.dim;
    let lam = chart.lambda(x);
    let gam = christoffel_from_dlog(&chart.dlog_lambda(x));
    let a = face.axis;
    let tang: Vec<usize> = (0..d).filter(|&b| b != a).collect();
    let mut c = vec![0.0; tang.len() * tang.len()];
    // n = s λ^{-1} e_a; the derivative of its coefficient is normal and drops
    for (p, &b) in tang.iter().enumerate() {
        for (q, &cc) in tang.iter().enumerate() {
            c[p * tang.len() + q] = face.sign() * lam * gam[cc * d * d + b * d + a];
        }
    }
    DoubleFormValue::from_raw(d - 1, 1, 1, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let flat = Chart::centered(2, 0.0, 1.0).unwrap();
        assert_eq!(metric_at(&flat, &[0.3, -0.2]).unwrap().g, vec![1.0, 0.0, 0.0, 1.0]);
        let c = Chart::centered(2, 1.0, 1.0).unwrap();
        assert_eq!(metric_at(&c, &[0.0, 0.0]).unwrap().g, vec![1.0, 0.0, 0.0, 1.0]);
        // λ = (1 - κ/4)^{-1} at |x| = 1; κ = 1 gives 4/3
        let m = metric_at(&c, &[1.0, 0.0]).unwrap();
        assert!((m.g[0] - 16.0 / 9.0).abs() < 1e-15 && m.g[1] == 0.0);
        assert!((m.det_sqrt - 16.0 / 9.0).abs() < 1e-15);
        let s = Chart::centered(2, -1.0, 1.0).unwrap();
        assert!((s.lambda(&[1.0, 0.0]) - 0.8).abs() < 1e-15);
        assert!(metric_at(&c, &[1.5, 0.0]).is_err());
    }

    #[test]
    fn christoffel_examples() {
        let flat = Chart::centered(3, 0.0, 1.0).unwrap();
        assert!(christoffel_at(&flat, &[0.1, 0.2, 0.3]).unwrap().iter().all(|&v| v == 0.0));
        let c = Chart::centered(2, -1.0, 1.0).unwrap();
        assert!(christoffel_at(&c, &[0.0, 0.0]).unwrap().iter().all(|&v| v == 0.0));
        // κ = -1, x = (1,0): ∂1 log λ = (κ x1 / 2) λ = -(1/2)(4/5) = -2/5
        let g = christoffel_at(&c, &[1.0, 0.0]).unwrap();
        let at = |k: usize, i: usize, j: usize| g[k * 4 + i * 2 + j];
        assert!((at(0, 0, 0) + 0.4).abs() < 1e-15);
        assert!((at(0, 1, 1) - 0.4).abs() < 1e-15);
        assert!((at(1, 0, 1) + 0.4).abs() < 1e-15);
        assert_eq!(at(1, 0, 1), at(1, 1, 0));
    }

    #[test]
    fn christoffel_matches_metric_derivatives() {
        // Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il - ∂_l g_ij), derivatives by central differences
        let c = Chart::centered(3, 0.7, 1.0).unwrap();
        let x = [0.3, -0.2, 0.5];
        let d = 3;
        let h = 1e-5;
        let dg = |l: usize| {
            let mut xp = x;
            let mut xm = x;
            xp[l] += h;
            xm[l] -= h;
            let gp = metric_at(&c, &xp).unwrap().g;
            let gm = metric_at(&c, &xm).unwrap().g;
            gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>()
        };
        let der: Vec<Vec<f64>> = (0..d).map(dg).collect();
        let ginv = metric_at(&c, &x).unwrap().g_inv;
        let gam = christoffel_at(&c, &x).unwrap();
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut want = 0.0;
                    for l in 0..d {
                        want += 0.5 * ginv[k * d + l] * (der[i][j * d + l] + der[j][i * d + l] - der[l][i * d + j]);
                    }
                    assert!((gam[k * d * d + i * d + j] - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn riemann_examples() {
        let flat = Chart::centered(2, 0.0, 1.0).unwrap();
        assert_eq!(riemann_at(&flat, &[0.2, 0.1]).unwrap().max_abs(), 0.0);
        let c = Chart::centered(2, 1.0, 1.0).unwrap();
        assert_eq!(riemann_at(&c, &[0.0, 0.0]).unwrap().components(), &[1.0]);
        let c3 = Chart::centered(3, -1.0, 1.0).unwrap();
        let rm = riemann_at(&c3, &[0.2, 0.4, -0.1]).unwrap();
        assert!(rm.is_algebraic_curvature(1e-13).unwrap());
    }

    #[test]
    fn domain_validation() {
        assert!(Chart::centered(2, 1.0, 1.4).is_ok());
        // 1 - κ r²/4 with r² = 8 vanishes for κ = 1/2
        assert!(matches!(Chart::centered(2, 0.5, 2.0), Err(Error::OutOfDomain(_))));
        assert!(Chart::centered(2, -5.0, 2.0).is_ok());
        assert!(Chart::new(2, 0.0, vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
        let c = Chart::centered(2, 0.0, 1.0).unwrap();
        assert!(Grid::new(&c, vec![4, 9]).is_err());
    }

    #[test]
    fn grid_bookkeeping() {
        let c = Chart::new(2, 0.0, vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let g = Grid::new(&c, vec![5, 9]).unwrap();
        assert_eq!(g.spacing, vec![0.25, 0.25]);
        let n = g.node(&[2, 3]);
        assert_eq!(g.multi_index(n), vec![2, 3]);
        assert_eq!(g.coords(n), vec![0.5, 0.75]);
        assert_eq!(g.kind(n), NodeKind::Interior);
        assert_eq!(g.kind(0), NodeKind::Boundary(vec![Face { axis: 0, upper: false }, Face { axis: 1, upper: false }]));
        let total: f64 = (0..g.nnodes()).map(|i| g.trapezoid_weight(i)).sum();
        assert!((total - 2.0).abs() < 1e-14);
        let mut seen = vec![0; g.nnodes()];
        for f in g.faces() {
            for v in g.face_nodes(f) {
                seen[v] += 1;
            }
        }
        for (i, s) in seen.iter().enumerate() {
            let want = match g.kind(i) {
                NodeKind::Interior => 0,
                NodeKind::Boundary(f) => f.len(),
            };
            assert_eq!(*s, want);
        }
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let c = Chart::centered(2, 1.0, 1.0).unwrap();
        let g = Grid::uniform(&c, 9).unwrap();
        let node = g.node(&[8, 3]);
        let ns = boundary_normal(&c, &g, node).unwrap();
        assert_eq!(ns.len(), 1);
        let m = metric_at(&c, &g.coords(node)).unwrap();
        assert!((m.apply(&ns[0].1, &ns[0].1) - 1.0).abs() < 1e-12);
        assert!(ns[0].1[0] > 0.0 && m.apply(&ns[0].1, &[0.0, 1.0]) == 0.0);
        assert!(boundary_normal(&c, &g, g.node(&[3, 3])).is_err());
        assert_eq!(boundary_normal(&c, &g, 0).unwrap().len(), 2);
        let flat = Chart::centered(2, 0.0, 1.0).unwrap();
        let gf = Grid::uniform(&flat, 9).unwrap();
        assert_eq!(boundary_normal(&flat, &gf, gf.node(&[8, 3])).unwrap()[0].1, vec![1.0, 0.0]);
    }

    #[test]
    fn second_fundamental_form_is_half_lie_derivative_of_metric() {
        // h0 = ½ (L_n g) on tangent vectors, with n = s λ^{-1} e_a extended off the face
        let c = Chart::centered(3, -0.8, 1.0).unwrap();
        let g = Grid::uniform(&c, 9).unwrap();
        let node = g.node(&[8, 3, 5]);
        let h0 = second_fundamental_form(&c, &g, node).unwrap();
        let x = g.coords(node);
        let eps = 1e-5;
        let lam2 = |t: f64| {
            let mut y = x.clone();
            y[0] += t;
            c.lambda(&y).powi(2)
        };
        let dlam2 = (lam2(eps) - lam2(-eps)) / (2.0 * eps);
        let want = 0.5 * dlam2 / c.lambda(&x);
        assert!((h0.components()[0] - want).abs() < 1e-8);
        assert!(h0.components()[1].abs() < 1e-15);
        assert!((h0.components()[3] - want).abs() < 1e-8);
        let flat = Chart::centered(3, 0.0, 1.0).unwrap();
        let gf = Grid::uniform(&flat, 9).unwrap();
        assert_eq!(second_fundamental_form(&flat, &gf, node).unwrap().max_abs(), 0.0);
        assert!(second_fundamental_form(&c, &g, 0).is_err());
    }
}

//! Grid-sampled double-form fields on a chart and on its box faces.

use std::sync::Arc;

use crate::algebra::{ncomp, DoubleFormValue};
use crate::charts::{Chart, Face, Grid};
use crate::error::{Error, Result};
use crate::rng::{Rng, SmoothFn};

/// A structured lattice carrying the conformal factor and `∂ log λ` at each
/// node. The volume and every face are patches, so the same stencil code
/// serves both.
#[derive(Clone, Debug)]
pub struct Patch {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub h: Vec<f64>,
    pub strides: Vec<usize>,
    pub nnodes: usize,
    pub lam: Vec<f64>,
    /// `∂_a log λ`, node-major.
    pub u: Vec<f64>,
}

impl Patch {
    fn build(shape: Vec<usize>, h: Vec<f64>, lam: Vec<f64>, u: Vec<f64>) -> Self {
        let dim = shape.len();
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let nnodes = shape.iter().product();
        Self { dim, shape, h, strides, nnodes, lam, u }
    }

    #[inline]
    pub fn index_along(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.shape[axis]
    }

    /// Distance in layers from the nearest edge of the patch.
    pub fn depth(&self, node: usize) -> usize {
        (0..self.dim)
            .map(|a| {
                let i = self.index_along(node, a);
                i.min(self.shape[a] - 1 - i)
            })
            .min()
            .unwrap_or(usize::MAX)
    }

    /// Trapezoid weight times the Riemannian density `λ^dim`.
    pub fn volume_weight(&self, node: usize) -> f64 {
        let mut w = self.lam[node].powi(self.dim as i32);
        for a in 0..self.dim {
            let i = self.index_along(node, a);
            w *= if i == 0 || i + 1 == self.shape[a] { 0.5 * self.h[a] } else { self.h[a] };
        }
        w
    }
}

#[derive(Clone, Debug)]
pub struct FacePatch {
    pub face: Face,
    /// Volume node of each face node, in face-local row-major order.
    pub nodes: Vec<usize>,
    /// Volume axes spanning the face, increasing.
    pub tangent_axes: Vec<usize>,
    pub patch: Patch,
}

/// A chart together with a grid and the cached geometry on it.
#[derive(Debug)]
pub struct Domain {
    pub chart: Chart,
    pub grid: Grid,
    pub patch: Patch,
    pub faces: Vec<FacePatch>,
}

impl Domain {
    pub fn new(chart: Chart, grid: Grid) -> Result<Arc<Self>> {
        chart.validate()?;
        if grid.dim() != chart.dim {
            return Err(Error::DimensionMismatch(grid.dim(), chart.dim));
        }
        let d = chart.dim;
        let nn = grid.nnodes();
        let mut lam = Vec::with_capacity(nn);
        let mut u = Vec::with_capacity(nn * d);
        for node in 0..nn {
            let x = grid.coords(node);
            lam.push(chart.lambda(&x));
            u.extend(chart.dlog_lambda(&x));
        }
        let patch = Patch::build(grid.shape.clone(), grid.spacing.clone(), lam, u);
        let faces = grid
            .faces()
            .into_iter()
            .map(|face| {
                let nodes = grid.face_nodes(face);
                let tangent_axes: Vec<usize> = (0..d).filter(|&b| b != face.axis).collect();
                let shape = tangent_axes.iter().map(|&b| grid.shape[b]).collect();
                let h = tangent_axes.iter().map(|&b| grid.spacing[b]).collect();
                let flam = nodes.iter().map(|&n| patch.lam[n]).collect();
                let fu = nodes.iter().flat_map(|&n| tangent_axes.iter().map(move |&b| (n, b))).map(|(n, b)| patch.u[n * d + b]).collect();
                FacePatch { face, nodes, tangent_axes, patch: Patch::build(shape, h, flam, fu) }
            })
            .collect();
        Ok(Arc::new(Self { chart, grid, patch, faces }))
    }

    pub fn uniform(chart: Chart, n: usize) -> Result<Arc<Self>> {
        let grid = Grid::uniform(&chart, n)?;
        Self::new(chart, grid)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn nnodes(&self) -> usize {
        self.patch.nnodes
    }

    pub fn face(&self, face_id: usize) -> Result<&FacePatch> {
        self.faces.get(face_id).ok_or(Error::NotBoundaryFace(face_id))
    }

    /// Largest grid spacing.
    pub fn h(&self) -> f64 {
        self.grid.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn same_as(&self, other: &Domain) -> bool {
        std::ptr::eq(self, other) || (self.chart == other.chart && self.grid.shape == other.grid.shape)
    }
}

/// Fraction of the box side cut off every face when measuring interior
/// errors. A fixed physical region keeps the O(h) layer next to the faces
/// out of the norm at every resolution.
pub fn core_fraction(dim: usize) -> f64 {
    if dim <= 2 {
        0.125
    } else {
        0.25
    }
}

pub(crate) fn check_same(a: &Domain, b: &Domain) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// One `DoubleFormValue` per grid node, stored node-major.
#[derive(Clone, Debug)]
pub struct DoubleFormField {
    pub domain: Arc<Domain>,
    pub k: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl DoubleFormField {
    pub fn zeros(domain: &Arc<Domain>, k: usize, m: usize) -> Result<Self> {
        let d = domain.dim();
        if k > d || m > d {
            return Err(Error::DegreeOverflow { k, m, dim: d });
        }
        Ok(Self { domain: domain.clone(), k, m, data: vec![0.0; domain.nnodes() * ncomp(d, k, m)] })
    }

    pub fn from_data(domain: &Arc<Domain>, k: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        let f = Self::zeros(domain, k, m)?;
        if data.len() != f.data.len() {
            return Err(Error::DimensionMismatch(data.len(), f.data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite field value".into()));
        }
        Ok(Self { data, ..f })
    }

    /// Samples `f(x, out)` at every node; `out` holds the node's components.
    pub fn from_fn(domain: &Arc<Domain>, k: usize, m: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let mut out = Self::zeros(domain, k, m)?;
        let nc = out.ncomp();
        for node in 0..domain.nnodes() {
            let x = domain.grid.coords(node);
            f(&x, &mut out.data[node * nc..(node + 1) * nc]);
        }
        Ok(out)
    }

    pub fn scalar(domain: &Arc<Domain>, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(domain, 0, 0, |x, o| o[0] = f(x)).expect("scalar degrees are valid")
    }

    /// The metric as a (1,1) field.
    pub fn metric(domain: &Arc<Domain>) -> Self {
        let d = domain.dim();
        let mut out = Self::zeros(domain, 1, 1).expect("(1,1) fits");
        for (node, l) in domain.patch.lam.iter().enumerate() {
            for a in 0..d {
                out.data[node * d * d + a * d + a] = l * l;
            }
        }
        out
    }

    /// The curvature tensor `κ/2 g∧g` as a (2,2) field.
    pub fn riemann(domain: &Arc<Domain>) -> Result<Self> {
        let d = domain.dim();
        let base = DoubleFormValue::metric(&crate::algebra::MetricValue::euclidean(d));
        let rm0 = base.wedge(&base)?.scale(domain.chart.kappa / 2.0);
        let nc = rm0.components().len();
        let mut out = Self::zeros(domain, 2, 2)?;
        for (node, l) in domain.patch.lam.iter().enumerate() {
            let s = l.powi(4);
            for (o, v) in out.data[node * nc..(node + 1) * nc].iter_mut().zip(rm0.components()) {
                *o = s * v;
            }
        }
        Ok(out)
    }

    /// Every component an independent seeded smooth function of the
    /// coordinates; the same seed gives the same field on any grid.
    pub fn random_smooth(domain: &Arc<Domain>, k: usize, m: usize, seed: u64) -> Result<Self> {
        let d = domain.dim();
        let mut rng = Rng::new(seed);
        let fs: Vec<SmoothFn> = (0..ncomp(d, k, m)).map(|_| SmoothFn::random(&mut rng, d)).collect();
        Self::from_fn(domain, k, m, |x, o| {
            for (v, f) in o.iter_mut().zip(&fs) {
                *v = f.eval(x);
            }
        })
    }

    /// Symmetric part of a random smooth (k,k) field.
    pub fn random_smooth_symmetric(domain: &Arc<Domain>, k: usize, seed: u64) -> Result<Self> {
        let f = Self::random_smooth(domain, k, k, seed)?;
        let t = crate::calculus::transpose(&f);
        Ok(f.add(&t)?.scale(0.5))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn ncomp(&self) -> usize {
        ncomp(self.dim(), self.k, self.m)
    }

    /// Largest nodewise deviation from symmetry, for (k,k) fields.
    pub fn asymmetry(&self) -> f64 {
        if self.k != self.m {
            return f64::INFINITY;
        }
        let t = crate::calculus::transpose(self);
        self.data.iter().zip(&t.data).fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    pub fn node_slice(&self, node: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.data[node * nc..(node + 1) * nc]
    }

    pub fn value_at(&self, node: usize) -> DoubleFormValue {
        DoubleFormValue::from_raw(self.dim(), self.k, self.m, self.node_slice(node).to_vec())
    }

    pub fn like(&self, data: Vec<f64>) -> Self {
        Self { domain: self.domain.clone(), k: self.k, m: self.m, data }
    }

    pub fn with_degrees(&self, k: usize, m: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.domain.nnodes() * ncomp(self.dim(), k, m));
        Self { domain: self.domain.clone(), k, m, data }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        check_same(&self.domain, &other.domain)?;
        if self.k != other.k || self.m != other.m {
            return Err(Error::DegreeMismatch(self.k, self.m, other.k, other.m));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.like(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.like(self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.like(self.data.iter().map(|a| a * s).collect())
    }

    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Squared fiber norm at a node; the metric is `λ²δ`, so the
    /// orthonormal-basis Gram factor is `λ^{-2(k+m)}`.
    pub fn fiber_norm2(&self, node: usize) -> f64 {
        let s = self.domain.patch.lam[node].powi(-2 * (self.k + self.m) as i32);
        s * self.node_slice(node).iter().map(|v| v * v).sum::<f64>()
    }

    /// Discrete L² norm over nodes at depth ≥ `margin` from the boundary.
    pub fn l2_norm_interior(&self, margin: usize) -> f64 {
        let p = &self.domain.patch;
        (0..p.nnodes).filter(|&n| p.depth(n) >= margin).map(|n| p.volume_weight(n) * self.fiber_norm2(n)).sum::<f64>().sqrt()
    }

    /// Max fiber norm over nodes at depth ≥ `margin`.
    pub fn max_norm_interior(&self, margin: usize) -> f64 {
        let p = &self.domain.patch;
        (0..p.nnodes).filter(|&n| p.depth(n) >= margin).map(|n| self.fiber_norm2(n).sqrt()).fold(0.0, f64::max)
    }

    /// Nodes at least `frac` of the box side away from every face.
    pub fn in_core(&self, node: usize, frac: f64) -> bool {
        let g = &self.domain.grid;
        g.multi_index(node).iter().zip(&g.shape).all(|(&i, &n)| {
            let t = i as f64 / (n - 1) as f64;
            t.min(1.0 - t) >= frac - 1e-12
        })
    }

    /// Discrete L² norm over the fixed core region of [`Self::in_core`].
    pub fn l2_norm_core(&self, frac: f64) -> f64 {
        let p = &self.domain.patch;
        (0..p.nnodes).filter(|&n| self.in_core(n, frac)).map(|n| p.volume_weight(n) * self.fiber_norm2(n)).sum::<f64>().sqrt()
    }

    pub fn max_norm_core(&self, frac: f64) -> f64 {
        (0..self.domain.nnodes()).filter(|&n| self.in_core(n, frac)).map(|n| self.fiber_norm2(n).sqrt()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_interior(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Values of an intrinsic (k,m) double form on one face, indexed by the
/// face's own tangent axes.
#[derive(Clone, Debug)]
pub struct BoundaryField {
    pub domain: Arc<Domain>,
    pub face: usize,
    pub k: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(domain: &Arc<Domain>, face: usize, k: usize, m: usize) -> Result<Self> {
        let fp = domain.face(face)?;
        let d0 = domain.dim() - 1;
        if k > d0 || m > d0 {
            return Err(Error::DegreeOverflow { k, m, dim: d0 });
        }
        Ok(Self { domain: domain.clone(), face, k, m, data: vec![0.0; fp.nodes.len() * ncomp(d0, k, m)] })
    }

    pub fn from_fn(domain: &Arc<Domain>, face: usize, k: usize, m: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let mut out = Self::zeros(domain, face, k, m)?;
        let nc = out.ncomp();
        let nodes = domain.faces[face].nodes.clone();
        for (i, &n) in nodes.iter().enumerate() {
            f(&domain.grid.coords(n), &mut out.data[i * nc..(i + 1) * nc]);
        }
        Ok(out)
    }

    pub fn face_patch(&self) -> &FacePatch {
        &self.domain.faces[self.face]
    }

    pub fn ncomp(&self) -> usize {
        ncomp(self.domain.dim() - 1, self.k, self.m)
    }

    pub fn like(&self, data: Vec<f64>) -> Self {
        Self { domain: self.domain.clone(), face: self.face, k: self.k, m: self.m, data }
    }

    pub fn with_degrees(&self, k: usize, m: usize, data: Vec<f64>) -> Self {
        Self { domain: self.domain.clone(), face: self.face, k, m, data }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        check_same(&self.domain, &other.domain)?;
        if self.face != other.face {
            return Err(Error::DomainMismatch);
        }
        if self.k != other.k || self.m != other.m {
            return Err(Error::DegreeMismatch(self.k, self.m, other.k, other.m));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.like(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.like(self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.like(self.data.iter().map(|a| a * s).collect())
    }

    pub fn fiber_norm2(&self, i: usize) -> f64 {
        let nc = self.ncomp();
        let s = self.face_patch().patch.lam[i].powi(-2 * (self.k + self.m) as i32);
        s * self.data[i * nc..(i + 1) * nc].iter().map(|v| v * v).sum::<f64>()
    }

    /// L² norm over face nodes at depth ≥ `margin` inside the face.
    pub fn l2_norm_interior(&self, margin: usize) -> f64 {
        let p = &self.face_patch().patch;
        (0..p.nnodes).filter(|&n| p.depth(n) >= margin).map(|n| p.volume_weight(n) * self.fiber_norm2(n)).sum::<f64>().sqrt()
    }

    pub fn max_norm_interior(&self, margin: usize) -> f64 {
        let p = &self.face_patch().patch;
        (0..p.nnodes).filter(|&n| p.depth(n) >= margin).map(|n| self.fiber_norm2(n).sqrt()).fold(0.0, f64::max)
    }
}

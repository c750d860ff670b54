//! Pointwise algebra of double forms over one fiber.
//!
//! A (k,m)-form is stored by its values on basis vectors, `a[I,J] =
//! a(e_I; e_J)`, for strictly increasing `I` (k entries) and `J` (m entries),
//! I-major. The fiber inner product is the Gram-determinant one on both
//! blocks, so basis k-forms are orthonormal for the Euclidean metric.

pub mod basis;
mod kernels;

pub use basis::{binomial, MAX_DIM};
pub use kernels::*;

use crate::error::{Error, Result};
use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

/// Number of components of a (k,m)-form in dimension d.
#[inline]
pub fn ncomp(d: usize, k: usize, m: usize) -> usize {
    binomial(d, k) * binomial(d, m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubleFormValue {
    dim: usize,
    k: usize,
    m: usize,
    c: Vec<f64>,
}

impl DoubleFormValue {
    pub fn new(dim: usize, k: usize, m: usize, components: Vec<f64>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::InvalidValue(format!("dimension {dim} > {MAX_DIM}")));
        }
        if k > dim || m > dim {
            return Err(Error::DegreeOverflow { k, m, dim });
        }
        if components.len() != ncomp(dim, k, m) {
            return Err(Error::InvalidValue(format!(
                "expected {} components, got {}",
                ncomp(dim, k, m),
                components.len()
            )));
        }
        if components.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidValue("non-finite component".into()));
        }
        Ok(Self { dim, k, m, c: components })
    }

    pub fn zeros(dim: usize, k: usize, m: usize) -> Self {
        assert!(k <= dim && m <= dim && dim <= MAX_DIM);
        Self { dim, k, m, c: vec![0.0; ncomp(dim, k, m)] }
    }

    /// Constant function 1 as a (0,0)-form.
    pub fn one(dim: usize) -> Self {
        Self { dim, k: 0, m: 0, c: vec![1.0] }
    }

    /// `dx^I ⊗ dx^J` for zero-based index lists (must be increasing).
    pub fn basis(dim: usize, form: &[usize], vector: &[usize]) -> Self {
        let mut v = Self::zeros(dim, form.len(), vector.len());
        let i = basis::rank(dim, mask_of(form));
        let j = basis::rank(dim, mask_of(vector));
        let nm = binomial(dim, vector.len());
        v.c[i * nm + j] = 1.0;
        v
    }

    /// The metric as a symmetric (1,1)-form.
    pub fn metric(g: &MetricValue) -> Self {
        Self { dim: g.dim, k: 1, m: 1, c: g.g.clone() }
    }

    /// Wraps raw components without validation; used by field kernels.
    pub(crate) fn from_raw(dim: usize, k: usize, m: usize, c: Vec<f64>) -> Self {
        debug_assert_eq!(c.len(), ncomp(dim, k, m));
        Self { dim, k, m, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn degrees(&self) -> (usize, usize) {
        (self.k, self.m)
    }
    pub fn components(&self) -> &[f64] {
        &self.c
    }
    pub fn components_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }
    pub fn into_components(self) -> Vec<f64> {
        self.c
    }

    /// Component at zero-based increasing index lists.
    pub fn get(&self, form: &[usize], vector: &[usize]) -> f64 {
        let i = basis::rank(self.dim, mask_of(form));
        let j = basis::rank(self.dim, mask_of(vector));
        self.c[i * binomial(self.dim, self.m) + j]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.c.iter_mut().for_each(|x| *x *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.c.iter_mut().zip(&other.c).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if (self.k, self.m) != (other.k, other.m) {
            return Err(Error::DegreeMismatch(self.k, self.m, other.k, other.m));
        }
        Ok(())
    }

    pub fn wedge(&self, b: &Self) -> Result<Self> {
        if self.dim != b.dim {
            return Err(Error::DimensionMismatch(self.dim, b.dim));
        }
        let (k, m) = (self.k + b.k, self.m + b.m);
        if k > self.dim || m > self.dim {
            return Err(Error::DegreeOverflow { k, m, dim: self.dim });
        }
        let mut out = Self::zeros(self.dim, k, m);
        wedge_acc(self.dim, (self.k, self.m), &self.c, (b.k, b.m), &b.c, 1.0, &mut out.c);
        Ok(out)
    }

    /// Wedge product that returns `None` when the result degree leaves the
    /// fiber (the zero space).
    pub fn wedge_or_zero(&self, b: &Self) -> Result<Option<Self>> {
        match self.wedge(b) {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegreeOverflow { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim, self.m, self.k);
        transpose_into(self.dim, self.k, self.m, &self.c, &mut out.c);
        out
    }

    pub fn bianchi(&self) -> Result<Self> {
        if self.m == 0 {
            return Err(Error::DegreeUnderflow { k: self.k, m: self.m });
        }
        if self.k + 1 > self.dim {
            return Err(Error::DegreeOverflow { k: self.k + 1, m: self.m - 1, dim: self.dim });
        }
        let mut out = Self::zeros(self.dim, self.k + 1, self.m - 1);
        bianchi_acc(self.dim, self.k, self.m, &self.c, 1.0, &mut out.c);
        Ok(out)
    }

    pub fn bianchi_v(&self) -> Result<Self> {
        Ok(self.transpose().bianchi()?.transpose())
    }

    pub fn interior(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch(v.len(), self.dim));
        }
        if self.k == 0 {
            return Err(Error::DegreeUnderflow { k: self.k, m: self.m });
        }
        let mut out = Self::zeros(self.dim, self.k - 1, self.m);
        interior_acc(self.dim, self.k, self.m, v, &self.c, 1.0, &mut out.c);
        Ok(out)
    }

    pub fn interior_v(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch(v.len(), self.dim));
        }
        if self.m == 0 {
            return Err(Error::DegreeUnderflow { k: self.k, m: self.m });
        }
        let mut out = Self::zeros(self.dim, self.k, self.m - 1);
        interior_v_acc(self.dim, self.k, self.m, v, &self.c, 1.0, &mut out.c);
        Ok(out)
    }

    /// Hodge star on the form part; `orientation` is +1 or -1.
    pub fn hodge_star(&self, g: &MetricValue, orientation: f64) -> Result<Self> {
        if g.dim != self.dim {
            return Err(Error::DimensionMismatch(g.dim, self.dim));
        }
        let mut out = Self::zeros(self.dim, self.dim - self.k, self.m);
        hodge_acc(self.dim, self.k, self.m, g, orientation, &self.c, &mut out.c);
        Ok(out)
    }

    pub fn hodge_star_v(&self, g: &MetricValue, orientation: f64) -> Result<Self> {
        Ok(self.transpose().hodge_star(g, orientation)?.transpose())
    }

    pub fn trace_g(&self, g: &MetricValue) -> Result<Self> {
        if g.dim != self.dim {
            return Err(Error::DimensionMismatch(g.dim, self.dim));
        }
        if self.k == 0 || self.m == 0 {
            return Err(Error::DegreeUnderflow { k: self.k, m: self.m });
        }
        let mut out = Self::zeros(self.dim, self.k - 1, self.m - 1);
        trace_acc(self.dim, self.k, self.m, &g.g_inv, &self.c, 1.0, &mut out.c);
        Ok(out)
    }

    pub fn g_wedge(&self, g: &MetricValue) -> Result<Self> {
        if g.dim != self.dim {
            return Err(Error::DimensionMismatch(g.dim, self.dim));
        }
        DoubleFormValue::metric(g).wedge(self)
    }

    pub fn inner(&self, b: &Self, g: &MetricValue) -> Result<f64> {
        self.same_shape(b)?;
        if g.dim != self.dim {
            return Err(Error::DimensionMismatch(g.dim, self.dim));
        }
        Ok(inner_raw(self.dim, self.k, self.m, g, &self.c, &b.c))
    }

    pub fn norm(&self, g: &MetricValue) -> f64 {
        inner_raw(self.dim, self.k, self.m, g, &self.c, &self.c).max(0.0).sqrt()
    }

    /// Checks both the Bianchi condition and symmetry of a (2,2)-form.
    pub fn is_algebraic_curvature(&self, tol: f64) -> Result<bool> {
        if (self.k, self.m) != (2, 2) {
            return Err(Error::DegreeMismatch(self.k, self.m, 2, 2));
        }
        if self.dim < 2 {
            return Ok(true);
        }
        let b = if self.dim >= 3 { self.bianchi()?.max_abs() } else { 0.0 };
        let s = self.sub(&self.transpose())?.max_abs();
        Ok(b <= tol && s <= tol)
    }
}

pub(crate) fn mask_of(idx: &[usize]) -> u16 {
    let mut m = 0u16;
    for w in idx.windows(2) {
        assert!(w[0] < w[1], "multi-index must be strictly increasing");
    }
    for &i in idx {
        m |= 1 << i;
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricValue {
    pub dim: usize,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    pub det_sqrt: f64,
}

impl MetricValue {
    /// Validates symmetry and positive definiteness, then inverts.
    pub fn new(dim: usize, g: Vec<f64>) -> Result<Self> {
        if g.len() != dim * dim {
            return Err(Error::InvalidValue(format!("metric needs {} entries", dim * dim)));
        }
        let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (g[i * dim + j] - g[j * dim + i]).abs() > 1e-14 * scale {
                    return Err(Error::InvalidValue("metric is not symmetric".into()));
                }
            }
        }
        let a = Mat::<f64>::from_fn(dim, dim, |i, j| g[i * dim + j]);
        let llt = a
            .llt(Side::Lower)
            .map_err(|_| Error::InvalidValue("metric is not positive definite".into()))?;
        let l = llt.L();
        let mut det_sqrt = 1.0;
        for i in 0..dim {
            det_sqrt *= l[(i, i)];
        }
        let inv = llt.inverse();
        let mut g_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                g_inv[i * dim + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        Ok(Self { dim, g, g_inv, det_sqrt })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::conformal(dim, 1.0)
    }

    /// The metric `lam^2 δ`.
    pub fn conformal(dim: usize, lam: f64) -> Self {
        let mut g = vec![0.0; dim * dim];
        let mut g_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            g[i * dim + i] = lam * lam;
            g_inv[i * dim + i] = 1.0 / (lam * lam);
        }
        Self { dim, g, g_inv, det_sqrt: lam.powi(dim as i32) }
    }

    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.g[i * self.dim + j] * v[j]).sum()).collect()
    }

    pub fn raise(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.g_inv[i * self.dim + j] * w[j]).sum()).collect()
    }

    pub fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        self.lower(u).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

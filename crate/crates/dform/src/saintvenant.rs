//! Saint-Venant compatibility: Lie derivatives of the metric, the residual
//! `𝐇σ`, the discrete Killing kernel and least-squares recovery of a
//! displacement from a symmetric field.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{d_nabla_v, h_op, l2_inner, stencil, transpose};
use crate::error::{Error, Result};
use crate::field::{check_same, core_fraction, Domain, DoubleFormField};
use crate::linalg::{self, Csr, SolverStats};

/// Above this many unknowns the Killing kernel is found iteratively.
pub const DENSE_SVD_LIMIT: usize = 1500;
/// Required ratio between the first non-Killing singular value and the
/// last Killing one.
pub const GAP_RATIO: f64 = 1e3;

/// A displacement stored as its 1-form `Y♭ = λ²Y`.
#[derive(Clone, Debug)]
pub struct DisplacementField {
    pub form: DoubleFormField,
}

impl DisplacementField {
    pub fn new(form: DoubleFormField) -> Result<Self> {
        if (form.k, form.m) != (1, 0) {
            return Err(Error::DegreeMismatch(form.k, form.m, 1, 0));
        }
        if form.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("displacement has non-finite entries".into()));
        }
        Ok(Self { form })
    }

    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self { form: DoubleFormField::zeros(domain, 1, 0).expect("(1,0) fits") }
    }

    /// From the vector components `Y^a` in chart coordinates.
    pub fn from_vector_fn(domain: &Arc<Domain>, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let chart = &domain.chart;
        let form = DoubleFormField::from_fn(domain, 1, 0, |x, o| {
            f(x, o);
            let l2 = chart.lambda(x).powi(2);
            o.iter_mut().for_each(|v| *v *= l2);
        })
        .expect("(1,0) fits");
        Self { form }
    }

    pub fn from_form_fn(domain: &Arc<Domain>, f: impl Fn(&[f64], &mut [f64])) -> Self {
        Self { form: DoubleFormField::from_fn(domain, 1, 0, f).expect("(1,0) fits") }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.form.domain
    }

    /// `Y^a` at a node.
    pub fn vector_at(&self, node: usize) -> Vec<f64> {
        let s = self.domain().patch.lam[node].powi(-2);
        self.form.node_slice(node).iter().map(|v| v * s).collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.form.l2_norm()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        l2_inner(&self.form, &other.form)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self { form: self.form.sub(&other.form)? })
    }
}

/// `ℒ_Y𝔤 = d_V Y♭ + (d_V Y♭)ᵀ`.
pub fn lie_derivative_metric(y: &DisplacementField) -> Result<DoubleFormField> {
    let a = d_nabla_v(&y.form)?;
    a.add(&transpose(&a))
}

fn check_symmetric(sigma: &DoubleFormField) -> Result<()> {
    if (sigma.k, sigma.m) != (1, 1) {
        return Err(Error::DegreeMismatch(sigma.k, sigma.m, 1, 1));
    }
    let dev = sigma.asymmetry();
    if dev > 1e-10 * (1.0 + sigma.max_abs()) {
        return Err(Error::NotSymmetric(dev));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CompatibilityResidual {
    pub l2: f64,
    pub max: f64,
}

/// Interior norms of `𝐇σ`. Vanishing is necessary for σ to be a Lie
/// derivative of the metric; sufficiency also needs orthogonality to a
/// finite-dimensional harmonic space, which is probed by reconstruction.
pub fn compatibility_residual(sigma: &DoubleFormField) -> Result<CompatibilityResidual> {
    check_symmetric(sigma)?;
    let r = h_op(sigma)?;
    let c = core_fraction(sigma.dim());
    Ok(CompatibilityResidual { l2: r.l2_norm_core(c), max: r.max_norm_core(c) })
}

/// Pairs `a ≤ b` in row order.
fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect()
}

/// Sparse matrix of `Y♭ ↦ ℒ_Y𝔤`. Columns are node-major `Y♭` components;
/// rows are node-major independent components `(a, b)`, `a ≤ b`, of the
/// symmetric image. Uses the same stencils as [`lie_derivative_metric`].
pub fn assemble_lie_operator(domain: &Arc<Domain>) -> Csr {
    let d = domain.dim();
    let p = &domain.patch;
    let pairs = sym_pairs(d);
    let np = pairs.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..p.nnodes)
        .flat_map(|node| {
            let u = &p.u[node * d..(node + 1) * d];
            let w: Vec<Vec<(usize, f64)>> = (0..d).map(|ax| stencil::partial_weights(p, node, ax)).collect();
            pairs
                .iter()
                .map(|&(a, b)| {
                    let mut row = Vec::new();
                    // ∂_b ω_a + ∂_a ω_b − 2Γ^c_{ab} ω_c
                    for &(n2, c) in &w[b] {
                        row.push((n2 * d + a, c));
                    }
                    for &(n2, c) in &w[a] {
                        row.push((n2 * d + b, c));
                    }
                    for c in 0..d {
                        let g = stencil::gamma(u, c, a, b);
                        if g != 0.0 {
                            row.push((node * d + c, -2.0 * g));
                        }
                    }
                    row
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Csr::from_rows(p.nnodes * np, p.nnodes * d, rows)
}

/// Row and column scalings that turn the Euclidean norms of the assembled
/// operator into the discrete L² norms of fields.
fn lie_weights(domain: &Domain) -> (Vec<f64>, Vec<f64>) {
    let d = domain.dim();
    let p = &domain.patch;
    let pairs = sym_pairs(d);
    let mut rw = Vec::with_capacity(p.nnodes * pairs.len());
    let mut cw = Vec::with_capacity(p.nnodes * d);
    for node in 0..p.nnodes {
        let vw = p.volume_weight(node);
        let l = p.lam[node];
        for &(a, b) in &pairs {
            let mult = if a == b { 1.0 } else { 2.0 };
            rw.push((vw * mult).sqrt() / (l * l));
        }
        for _ in 0..d {
            cw.push(vw.sqrt() / l);
        }
    }
    (rw, cw)
}

fn sym_components(sigma: &DoubleFormField) -> Vec<f64> {
    let d = sigma.dim();
    let pairs = sym_pairs(d);
    (0..sigma.domain.nnodes())
        .flat_map(|n| {
            let s = sigma.node_slice(n);
            pairs.iter().map(move |&(a, b)| 0.5 * (s[a * d + b] + s[b * d + a])).collect::<Vec<_>>()
        })
        .collect()
}

/// L²-orthonormal basis of the discrete Killing fields.
#[derive(Clone, Debug)]
pub struct KillingBasis {
    pub domain: Arc<Domain>,
    pub fields: Vec<DisplacementField>,
    /// Smallest singular values of the L²-weighted Lie operator, increasing.
    pub singular_values: Vec<f64>,
    pub largest_singular_value: f64,
    /// First non-Killing singular value over the last Killing one.
    pub gap_ratio: f64,
    pub kill_tol: f64,
}

impl KillingBasis {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    /// Removes the Killing components of `y`.
    pub fn project_out(&self, y: &DisplacementField) -> Result<DisplacementField> {
        check_same(&self.domain, y.domain())?;
        let mut out = y.clone();
        for b in &self.fields {
            let c = b.inner(y)?;
            out.form.axpy(-c, &b.form)?;
        }
        Ok(out)
    }
}

/// Default threshold for a singular value to count as Killing.
pub fn default_kill_tol(largest: f64, h: f64) -> f64 {
    0.05 * largest * h * h
}

/// Null space of the Lie operator by thresholded SVD. The kernel dimension
/// is the number of singular values below `kill_tol`; the next one must be
/// at least [`GAP_RATIO`] times larger.
pub fn killing_basis(domain: &Arc<Domain>, kill_tol: Option<f64>) -> Result<KillingBasis> {
    let d = domain.dim();
    let (rw, cw) = lie_weights(domain);
    let inv_cw: Vec<f64> = cw.iter().map(|w| 1.0 / w).collect();
    let b = assemble_lie_operator(domain).scaled(&rw, &inv_cw);
    let count = d * (d + 1) / 2 + 3;
    let sv = if b.ncols <= DENSE_SVD_LIMIT {
        linalg::dense_smallest_singular(&b, count)?
    } else {
        linalg::sparse_smallest_singular(&b, count, 0x4b11)?
    };
    let tol = kill_tol.unwrap_or_else(|| default_kill_tol(sv.largest, domain.h()));
    let dim = sv.values.iter().take_while(|&&s| s <= tol).count();
    let next = sv.values.get(dim).copied().unwrap_or(f64::INFINITY);
    let last = if dim == 0 { 0.0 } else { sv.values[dim - 1] };
    let gap_ratio = if last > 0.0 { next / last } else { f64::INFINITY };
    if dim == 0 || dim == sv.values.len() || gap_ratio < GAP_RATIO {
        return Err(Error::NoSpectralGap { ratio: if dim == 0 { 0.0 } else { gap_ratio }, required: GAP_RATIO });
    }
    let fields = sv.vectors[..dim]
        .iter()
        .map(|z| {
            let data: Vec<f64> = z.iter().zip(&inv_cw).map(|(v, w)| v * w).collect();
            DisplacementField::new(DoubleFormField::from_data(domain, 1, 0, data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KillingBasis {
        domain: domain.clone(),
        fields,
        singular_values: sv.values,
        largest_singular_value: sv.largest,
        gap_ratio,
        kill_tol: tol,
    })
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub y: DisplacementField,
    /// `‖ℒ_Y𝔤 − σ‖ / ‖σ‖` in L² (absolute when σ = 0).
    pub residual: f64,
    pub stats: SolverStats,
}

/// Least-squares displacement with `ℒ_Y𝔤 ≈ σ`, minimal in L² and free of
/// Killing components.
pub fn reconstruct_displacement(sigma: &DoubleFormField, killing: Option<&KillingBasis>, tol: f64) -> Result<Reconstruction> {
    check_symmetric(sigma)?;
    let domain = &sigma.domain;
    if let Some(k) = killing {
        check_same(&k.domain, domain).map_err(|_| Error::BasisMismatch)?;
    }
    let (rw, cw) = lie_weights(domain);
    let inv_cw: Vec<f64> = cw.iter().map(|w| 1.0 / w).collect();
    let b = assemble_lie_operator(domain).scaled(&rw, &inv_cw);
    let rhs: Vec<f64> = sym_components(sigma).iter().zip(&rw).map(|(s, w)| s * w).collect();
    let cap = 20 * b.ncols + 1000;
    let (z, stats) = linalg::lsqr(&b, &rhs, tol, cap)?;
    let data: Vec<f64> = z.iter().zip(&inv_cw).map(|(v, w)| v * w).collect();
    let mut y = DisplacementField::new(DoubleFormField::from_data(domain, 1, 0, data)?)?;
    if let Some(k) = killing {
        y = k.project_out(&y)?;
    }
    let misfit = lie_derivative_metric(&y)?.sub(sigma)?.l2_norm();
    let sn = sigma.l2_norm();
    let residual = if sn > 0.0 { misfit / sn } else { misfit };
    Ok(Reconstruction { y, residual, stats })
}

//! Linearized stress equations: the 2D Airy potential, stress recovery,
//! residual reports, traction compatibility against Killing fields, and
//! experimental direct least-squares solves.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{
    b_op, boundary_f, boundary_l2_inner, boundary_t_star, d_face, d_nabla, delta_face, delta_nabla, double_star, h_op,
    h_star_op, project_boundary, second_fundamental_form_field, trace_face, transpose, wedge_face, Projection,
};
use crate::error::{Error, Result};
use crate::field::{check_same, core_fraction, BoundaryField, Domain, DoubleFormField};
use crate::linalg::{self, Csr, SolverStats};
use crate::saintvenant::KillingBasis;

/// Largest system the dense direct solvers accept.
pub const DIRECT_LIMIT: usize = 6000;

/// A (2,2) source with the symmetries of a curvature tensor.
#[derive(Clone, Debug)]
pub struct CurvatureSource {
    pub field: DoubleFormField,
    /// Whether the source is known to lie in the image of `𝐇`. Only the
    /// built-in source `−2Rm = 𝐇𝔤` is.
    pub in_image: bool,
}

impl CurvatureSource {
    pub fn new(field: DoubleFormField) -> Result<Self> {
        if (field.k, field.m) != (2, 2) {
            return Err(Error::DegreeMismatch(field.k, field.m, 2, 2));
        }
        let scale = 1.0 + field.max_abs();
        let dev = field.asymmetry();
        if dev > 1e-10 * scale {
            return Err(Error::NotSymmetric(dev));
        }
        if field.dim() > 2 {
            let b = crate::calculus::bianchi(&field)?;
            if b.max_abs() > 1e-10 * scale {
                return Err(Error::InvalidValue(format!("source is not an algebraic curvature (Bianchi sum {:.3e})", b.max_abs())));
            }
        }
        Ok(Self { field, in_image: false })
    }

    /// `ℛ = −2Rm`, the source for which the metric itself is a stress.
    pub fn default_for(domain: &Arc<Domain>) -> Result<Self> {
        Ok(Self { field: DoubleFormField::riemann(domain)?.scale(-2.0), in_image: true })
    }
}

/// Normal-normal and tangential-normal stress on every face.
#[derive(Clone, Debug)]
pub struct TractionData {
    /// (0,0) on each face.
    pub rho: Vec<BoundaryField>,
    /// (1,0) on each face.
    pub tau: Vec<BoundaryField>,
}

impl TractionData {
    pub fn zeros(domain: &Arc<Domain>) -> Result<Self> {
        let nf = domain.faces.len();
        Ok(Self {
            rho: (0..nf).map(|f| BoundaryField::zeros(domain, f, 0, 0)).collect::<Result<_>>()?,
            tau: (0..nf).map(|f| BoundaryField::zeros(domain, f, 1, 0)).collect::<Result<_>>()?,
        })
    }

    /// Constant normal pressure `ρ = c`, no shear.
    pub fn constant_normal(domain: &Arc<Domain>, c: f64) -> Result<Self> {
        let mut t = Self::zeros(domain)?;
        for r in &mut t.rho {
            r.data.iter_mut().for_each(|v| *v = c);
        }
        Ok(t)
    }

    /// `(ℙ^nn σ, ℙ^tn σ)`.
    pub fn from_stress(sigma: &DoubleFormField) -> Result<Self> {
        let nf = sigma.domain.faces.len();
        Ok(Self {
            rho: (0..nf).map(|f| project_boundary(sigma, f, Projection::NN)).collect::<Result<_>>()?,
            tau: (0..nf).map(|f| project_boundary(sigma, f, Projection::TN)).collect::<Result<_>>()?,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.rho[0].domain
    }

    pub fn validate(&self, domain: &Arc<Domain>) -> Result<()> {
        let nf = domain.faces.len();
        if self.rho.len() != nf || self.tau.len() != nf {
            return Err(Error::InvalidValue(format!("traction needs data on all {nf} faces")));
        }
        for (f, (r, t)) in self.rho.iter().zip(&self.tau).enumerate() {
            check_same(&r.domain, domain)?;
            check_same(&t.domain, domain)?;
            if r.face != f || t.face != f || (r.k, r.m) != (0, 0) || (t.k, t.m) != (1, 0) {
                return Err(Error::InvalidValue(format!("traction on face {f} has the wrong layout")));
            }
            if r.data.iter().chain(&t.data).any(|v| !v.is_finite()) {
                return Err(Error::InvalidValue("traction has non-finite entries".into()));
            }
        }
        Ok(())
    }
}

/// `½Tr(𝔥₀∧τ)` with `𝔥₀` taken against the outward normal; it vanishes on
/// curves, where `𝔥₀∧τ` has no room.
fn shape_term(domain: &Arc<Domain>, face: usize, tau: &BoundaryField) -> Result<BoundaryField> {
    if domain.dim() == 2 {
        return BoundaryField::zeros(domain, face, 1, 0);
    }
    let h0 = second_fundamental_form_field(domain, face)?;
    Ok(trace_face(&wedge_face(&h0, tau)?)?.scale(0.5))
}

/// Boundary values that `𝔗*σ` and `𝔉σ` take for a divergence-free σ with
/// traction `(ρ, τ)`: `−δ₀τ` and `−dρ − ½Tr(𝔥₀∧τ)`.
pub fn derived_boundary_data(traction: &TractionData, face: usize) -> Result<(BoundaryField, BoundaryField)> {
    let domain = traction.domain().clone();
    let tau = &traction.tau[face];
    let t = delta_face(tau)?.scale(-1.0);
    let f = d_face(&traction.rho[face])?.add(&shape_term(&domain, face, tau)?)?.scale(-1.0);
    Ok((t, f))
}

fn need_dim(domain: &Domain, d: usize) -> Result<()> {
    if domain.dim() != d {
        return Err(Error::WrongDimension { expected: d, got: domain.dim() });
    }
    Ok(())
}

/// `⋆⋆^V ℛ`; with the default source this is the constant `−2κ`.
pub fn airy_rhs(domain: &Arc<Domain>, source: Option<&CurvatureSource>) -> Result<DoubleFormField> {
    need_dim(domain, 2)?;
    let owned;
    let src = match source {
        Some(s) => {
            check_same(&s.field.domain, domain)?;
            s
        }
        None => {
            owned = CurvatureSource::default_for(domain)?;
            &owned
        }
    };
    Ok(double_star(&src.field))
}

/// Dirichlet and normal-derivative data for the Airy potential. Both are
/// scalar fields on the whole grid; only boundary entries are read. The
/// normal derivative is along the outward unit normal of the metric and is
/// ignored at corners.
#[derive(Clone, Debug)]
pub struct AiryBc {
    pub value: DoubleFormField,
    pub normal: DoubleFormField,
}

impl AiryBc {
    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self { value: DoubleFormField::scalar(domain, |_| 0.0), normal: DoubleFormField::scalar(domain, |_| 0.0) }
    }

    /// Data of a known potential from its value and coordinate gradient.
    pub fn from_exact(domain: &Arc<Domain>, chi: impl Fn(&[f64]) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let value = DoubleFormField::scalar(domain, &chi);
        let mut normal = DoubleFormField::scalar(domain, |_| 0.0);
        for node in 0..domain.nnodes() {
            if let Some((axis, s)) = single_face(domain, node) {
                let x = domain.grid.coords(node);
                normal.data[node] = s * grad(&x)[axis] / domain.patch.lam[node];
            }
        }
        Self { value, normal }
    }
}

/// The face of a boundary node that is not on an edge of the box.
fn single_face(domain: &Domain, node: usize) -> Option<(usize, f64)> {
    let p = &domain.patch;
    let mut hit = None;
    for a in 0..p.dim {
        let i = p.index_along(node, a);
        if i == 0 || i + 1 == p.shape[a] {
            if hit.is_some() {
                return None;
            }
            hit = Some((a, if i == 0 { -1.0 } else { 1.0 }));
        }
    }
    hit
}

/// Rows of the five-point flat Laplacian at a node of depth ≥ 1.
fn flat_laplacian(domain: &Domain, node: usize) -> Vec<(usize, f64)> {
    let p = &domain.patch;
    let mut row = vec![(node, 0.0)];
    for a in 0..p.dim {
        let (s, h2) = (p.strides[a], p.h[a] * p.h[a]);
        row[0].1 -= 2.0 / h2;
        row.push((node + s, 1.0 / h2));
        row.push((node - s, 1.0 / h2));
    }
    row
}

/// Rows of `Δ_g = λ⁻² Δ_flat` at a node of depth ≥ 1.
fn laplace_beltrami(domain: &Domain, node: usize) -> Vec<(usize, f64)> {
    let mu = domain.patch.lam[node].powi(-2);
    flat_laplacian(domain, node).into_iter().map(|(n, c)| (n, mu * c)).collect()
}

/// Sparse square system for the Airy potential:
/// `(Δ − κ)(Δ − 2κ)χ = ⋆⋆ℛ` on nodes of depth ≥ 2, Dirichlet rows on the
/// boundary, and one-sided normal-derivative rows on the first inner ring.
/// The inner corner nodes carry the sum of their two normal conditions.
pub fn assemble_airy(domain: &Arc<Domain>, rhs: &DoubleFormField, bc: &AiryBc) -> Result<(Csr, Vec<f64>)> {
    need_dim(domain, 2)?;
    for f in [rhs, &bc.value, &bc.normal] {
        check_same(&f.domain, domain)?;
        if (f.k, f.m) != (0, 0) {
            return Err(Error::DegreeMismatch(f.k, f.m, 0, 0));
        }
    }
    let p = &domain.patch;
    let kappa = domain.chart.kappa;
    let nn = p.nnodes;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nn];
    let mut b = vec![0.0; nn];
    for node in 0..nn {
        match p.depth(node) {
            0 => {
                rows[node].push((node, 1.0));
                b[node] = bc.value.data[node];
            }
            1 => {}
            _ => {
                let mut row = Vec::new();
                for (nb, c) in laplace_beltrami(domain, node) {
                    for (m, c2) in laplace_beltrami(domain, nb) {
                        row.push((m, c * c2));
                    }
                    row.push((nb, -3.0 * kappa * c));
                }
                row.push((node, 2.0 * kappa * kappa));
                rows[node] = row;
                b[node] = rhs.data[node];
            }
        }
    }
    // normal conditions at non-corner boundary nodes go to the inward
    // neighbour, scaled by h so the rows are O(1)
    for node in 0..nn {
        if p.depth(node) != 0 {
            continue;
        }
        let Some((axis, s)) = single_face(domain, node) else { continue };
        let st = p.strides[axis] as isize * if s > 0.0 { -1 } else { 1 };
        let in1 = (node as isize + st) as usize;
        let in2 = (node as isize + 2 * st) as usize;
        let h = p.h[axis];
        let c = 1.0 / (2.0 * p.lam[node]);
        rows[in1].extend([(node, 3.0 * c), (in1, -4.0 * c), (in2, c)]);
        b[in1] += h * bc.normal.data[node];
    }
    Ok((Csr::from_rows(nn, nn, rows), b))
}

/// Solves the Airy boundary-value problem by sparse LU.
pub fn airy_solve(domain: &Arc<Domain>, rhs: &DoubleFormField, bc: &AiryBc) -> Result<(DoubleFormField, SolverStats)> {
    let (a, b) = assemble_airy(domain, rhs, bc)?;
    let (x, stats) = linalg::solve_square(&a, &b)?;
    if stats.relative_residual > 1e-8 {
        return Err(Error::SolverDiverged(format!("Airy solve stopped at relative residual {:.3e}", stats.relative_residual)));
    }
    Ok((DoubleFormField::from_data(domain, 0, 0, x)?, stats))
}

/// Manufactured Airy problem with `χ = sin(2x + 0.3)·cos(1.7y)`. Returns
/// the right-hand side, boundary data and exact potential, all computed
/// from closed forms of `μ = λ⁻²`.
pub fn manufactured_sin(domain: &Arc<Domain>) -> Result<(DoubleFormField, AiryBc, DoubleFormField)> {
    need_dim(domain, 2)?;
    let kappa = domain.chart.kappa;
    let (a, b) = (2.0, 1.7);
    let k2 = a * a + b * b;
    let chi = move |x: &[f64]| (a * x[0] + 0.3).sin() * (b * x[1]).cos();
    let grad = move |x: &[f64]| vec![a * (a * x[0] + 0.3).cos() * (b * x[1]).cos(), -b * (a * x[0] + 0.3).sin() * (b * x[1]).sin()];
    let rhs = DoubleFormField::scalar(domain, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let q = 1.0 - kappa * r2 / 4.0;
        let mu = q * q;
        let lap_mu = -2.0 * kappa * q + kappa * kappa * r2 / 2.0;
        let g = grad(x);
        let grad_mu_dot = -kappa * q * (x[0] * g[0] + x[1] * g[1]);
        let c = chi(x);
        let lap = -k2 * mu * c;
        let bilap = -k2 * mu * (c * lap_mu + 2.0 * grad_mu_dot - k2 * mu * c);
        bilap - 3.0 * kappa * lap + 2.0 * kappa * kappa * c
    });
    let bc = AiryBc::from_exact(domain, chi, grad);
    Ok((rhs, bc, DoubleFormField::scalar(domain, chi)))
}

/// `σ = 𝐇*(⋆⋆^V χ)`. On a flat chart this is the classical Airy map
/// `σ₁₁ = ∂₂₂χ`, `σ₂₂ = ∂₁₁χ`, `σ₁₂ = −∂₁₂χ`.
pub fn stress_from_airy(chi: &DoubleFormField) -> Result<DoubleFormField> {
    need_dim(&chi.domain, 2)?;
    if (chi.k, chi.m) != (0, 0) {
        return Err(Error::DegreeMismatch(chi.k, chi.m, 0, 0));
    }
    h_star_op(&double_star(chi))
}

/// Residuals of the first-order stress system and of the derived boundary
/// identities. Interior norms use the fixed core region; face norms skip
/// the face edges.
#[derive(Clone, Debug, Default, Serialize)]
pub struct StressReport {
    pub divergence: f64,
    pub source: f64,
    pub normal_traction: f64,
    pub shear_traction: f64,
    pub t_star_identity: f64,
    pub f_identity: f64,
    /// `"verified"` for the built-in source, `"unverified"` otherwise.
    pub source_in_image: String,
}

pub fn stress_residuals(sigma: &DoubleFormField, source: &CurvatureSource, traction: &TractionData) -> Result<StressReport> {
    if (sigma.k, sigma.m) != (1, 1) {
        return Err(Error::DegreeMismatch(sigma.k, sigma.m, 1, 1));
    }
    let dev = sigma.asymmetry();
    if dev > 1e-10 * (1.0 + sigma.max_abs()) {
        return Err(Error::NotSymmetric(dev));
    }
    let domain = &sigma.domain;
    check_same(&source.field.domain, domain)?;
    traction.validate(domain)?;
    let c = core_fraction(domain.dim());
    let mut rep = StressReport {
        divergence: delta_nabla(sigma)?.l2_norm_core(c),
        source: h_op(sigma)?.sub(&source.field)?.l2_norm_core(c),
        source_in_image: if source.in_image { "verified" } else { "unverified" }.into(),
        ..Default::default()
    };
    let sq = |v: f64| v * v;
    let (mut a, mut b, mut t, mut f) = (0.0, 0.0, 0.0, 0.0);
    for face in 0..domain.faces.len() {
        a += sq(project_boundary(sigma, face, Projection::NN)?.sub(&traction.rho[face])?.l2_norm_interior(1));
        b += sq(project_boundary(sigma, face, Projection::TN)?.sub(&traction.tau[face])?.l2_norm_interior(1));
        let (want_t, want_f) = derived_boundary_data(traction, face)?;
        t += sq(boundary_t_star(sigma, face)?.sub(&want_t)?.l2_norm_interior(1));
        f += sq(boundary_f(sigma, face)?.sub(&want_f)?.l2_norm_interior(1));
    }
    rep.normal_traction = a.sqrt();
    rep.shear_traction = b.sqrt();
    rep.t_star_identity = t.sqrt();
    rep.f_identity = f.sqrt();
    Ok(rep)
}

/// `∫_∂M (ρ, ℙ^nt ω) + (τ, ℙ^tt ω)` for every Killing 1-form ω. Traction
/// data admit an equilibrium stress only if all of these vanish.
pub fn traction_compatibility(traction: &TractionData, killing: &KillingBasis) -> Result<Vec<f64>> {
    let domain = traction.domain();
    check_same(domain, &killing.domain).map_err(|_| Error::BasisMismatch)?;
    traction.validate(domain)?;
    killing
        .fields
        .iter()
        .map(|k| {
            let mut s = 0.0;
            for face in 0..domain.faces.len() {
                s += boundary_l2_inner(&traction.rho[face], &project_boundary(&k.form, face, Projection::NT)?)?;
                s += boundary_l2_inner(&traction.tau[face], &project_boundary(&k.form, face, Projection::TT)?)?;
            }
            Ok(s)
        })
        .collect()
}

fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect()
}

fn sym_field(domain: &Arc<Domain>, x: &[f64]) -> Result<DoubleFormField> {
    let d = domain.dim();
    let pairs = sym_pairs(d);
    let np = pairs.len();
    let mut f = DoubleFormField::zeros(domain, 1, 1)?;
    for node in 0..domain.nnodes() {
        for (q, &(a, b)) in pairs.iter().enumerate() {
            let v = x[node * np + q];
            f.data[node * d * d + a * d + b] = v;
            f.data[node * d * d + b * d + a] = v;
        }
    }
    Ok(f)
}

/// Row blocks of the boundary-value problem `𝐁σ = 𝐇*ℛ` together with
/// `(ℙ^nn, ℙ^tn, 𝔗*, 𝔉, ℙ^nn𝐇, 𝔗*𝐇)` on every face, weighted by
/// quadrature so the Euclidean residual approximates an L² functional.
fn direct_rows(sigma: &DoubleFormField) -> Result<Vec<f64>> {
    let domain = &sigma.domain;
    let p = &domain.patch;
    let mut out = Vec::new();
    let bs = b_op(sigma)?;
    for node in 0..p.nnodes {
        if p.depth(node) >= 2 {
            let w = p.volume_weight(node).sqrt() * p.lam[node].powi(-2);
            out.extend(bs.node_slice(node).iter().map(|v| w * v));
        }
    }
    let hs = h_op(sigma)?;
    for face in 0..domain.faces.len() {
        let parts = [
            project_boundary(sigma, face, Projection::NN)?,
            project_boundary(sigma, face, Projection::TN)?,
            boundary_t_star(sigma, face)?,
            boundary_f(sigma, face)?,
            project_boundary(&hs, face, Projection::NN)?,
            boundary_t_star(&hs, face)?,
        ];
        push_face_rows(&mut out, &parts);
    }
    Ok(out)
}

fn push_face_rows(out: &mut Vec<f64>, parts: &[BoundaryField]) {
    for bf in parts {
        let fp = &bf.face_patch().patch;
        let nc = bf.ncomp();
        let pow = -((bf.k + bf.m) as i32);
        for i in 0..fp.nnodes {
            let w = fp.volume_weight(i).sqrt() * fp.lam[i].powi(pow);
            out.extend(bf.data[i * nc..(i + 1) * nc].iter().map(|v| w * v));
        }
    }
}

fn direct_data(domain: &Arc<Domain>, source: &CurvatureSource, traction: &TractionData) -> Result<Vec<f64>> {
    let p = &domain.patch;
    let mut out = Vec::new();
    let hr = h_star_op(&source.field)?;
    let nc = hr.ncomp();
    for node in 0..p.nnodes {
        if p.depth(node) >= 2 {
            let w = p.volume_weight(node).sqrt() * p.lam[node].powi(-2);
            out.extend(hr.data[node * nc..(node + 1) * nc].iter().map(|v| w * v));
        }
    }
    for face in 0..domain.faces.len() {
        let (t, f) = derived_boundary_data(traction, face)?;
        let parts = [
            traction.rho[face].clone(),
            traction.tau[face].clone(),
            t,
            f,
            project_boundary(&source.field, face, Projection::NN)?,
            boundary_t_star(&source.field, face)?,
        ];
        push_face_rows(&mut out, &parts);
    }
    Ok(out)
}

/// Assembles the direct system by probing the row map with unit symmetric
/// fields; the map is local, so each probe only touches a few rows, but it
/// is evaluated globally for simplicity. Meant for small grids.
fn assemble_direct(domain: &Arc<Domain>) -> Result<Csr> {
    let np = sym_pairs(domain.dim()).len();
    let ncols = domain.nnodes() * np;
    if ncols > DIRECT_LIMIT {
        return Err(Error::TooLarge { unknowns: ncols, limit: DIRECT_LIMIT });
    }
    use rayon::prelude::*;
    let cols: Vec<Vec<(usize, f64)>> = (0..ncols)
        .into_par_iter()
        .map(|j| {
            let mut x = vec![0.0; ncols];
            x[j] = 1.0;
            let rows = direct_rows(&sym_field(domain, &x)?)?;
            Ok(rows.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect())
        })
        .collect::<Result<_>>()?;
    let nrows = direct_rows(&DoubleFormField::zeros(domain, 1, 1)?)?.len();
    let mut trip = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            trip.push((i, j, v));
        }
    }
    Ok(Csr::from_triplets(nrows, ncols, &trip))
}

#[derive(Clone, Debug)]
pub struct DirectSolve {
    pub sigma: DoubleFormField,
    pub stats: SolverStats,
    pub report: StressReport,
}

/// Experimental: minimum-norm least-squares solution of the fourth-order
/// stress system. The system is rank-deficient when traction-free
/// harmonic fields exist, hence the minimum-norm semantics.
pub fn solve_stress_direct(domain: &Arc<Domain>, source: &CurvatureSource, traction: &TractionData) -> Result<DirectSolve> {
    check_same(&source.field.domain, domain)?;
    traction.validate(domain)?;
    let a = assemble_direct(domain)?;
    let b = direct_data(domain, source, traction)?;
    let (x, stats) = linalg::dense_min_norm(&a, &b, 1e-12)?;
    let sigma = sym_field(domain, &x)?;
    let report = stress_residuals(&sigma, source, traction)?;
    Ok(DirectSolve { sigma, stats, report })
}

#[derive(Clone, Debug)]
pub struct Potential {
    pub psi: DoubleFormField,
    /// `‖𝐇*ψ − σ‖` over the core region.
    pub h_star_residual: f64,
    /// `‖d^∇ψ‖` over the core region.
    pub d_residual: f64,
    pub stats: SolverStats,
}

/// Experimental 3D stress potential: solve the dual system for χ with
/// source `⋆⋆^V σ` and zero traction, then `ψ = ⋆⋆^V χ`.
pub fn potential_3d(sigma: &DoubleFormField) -> Result<Potential> {
    let domain = &sigma.domain;
    need_dim(domain, 3)?;
    if (sigma.k, sigma.m) != (1, 1) {
        return Err(Error::DegreeMismatch(sigma.k, sigma.m, 1, 1));
    }
    let big_sigma = double_star(sigma);
    let big_sigma = big_sigma.add(&transpose(&big_sigma))?.scale(0.5);
    let source = CurvatureSource { field: big_sigma, in_image: false };
    let sol = solve_stress_direct(domain, &source, &TractionData::zeros(domain)?)?;
    let psi = double_star(&sol.sigma);
    let c = core_fraction(3);
    Ok(Potential {
        h_star_residual: h_star_op(&psi)?.sub(sigma)?.l2_norm_core(c),
        d_residual: d_nabla(&psi)?.l2_norm_core(c),
        psi,
        stats: sol.stats,
    })
}

//! Discrete covariant calculus on double-form fields.
//!
//! First-order operators come from a single covariant derivative
//! (`stencil::nabla_all`); vector-part twins are conjugated by transposition.
//! Second-order operators are compositions, so they inherit O(h²) accuracy
//! in the interior and O(h) in a thin layer next to the faces.

pub mod boundary;
pub mod pointwise;
pub mod quadrature;
pub mod stencil;

use crate::algebra::{DoubleFormValue, MetricValue};
use crate::error::{Error, Result};
use crate::field::DoubleFormField;
use pointwise::PointMap;

pub use boundary::*;
pub use quadrature::*;

fn need_up(f: &DoubleFormField, dk: usize, dm: usize) -> Result<()> {
    let d = f.dim();
    if f.k + dk > d || f.m + dm > d {
        return Err(Error::DegreeOverflow { k: f.k + dk, m: f.m + dm, dim: d });
    }
    Ok(())
}

fn need_down(f: &DoubleFormField, dk: usize, dm: usize) -> Result<()> {
    if f.k < dk || f.m < dm {
        return Err(Error::DegreeUnderflow { k: f.k, m: f.m });
    }
    Ok(())
}

fn map_field(f: &DoubleFormField, map: &PointMap, k: usize, m: usize) -> DoubleFormField {
    f.with_degrees(k, m, map.apply_patch(&f.domain.patch, &f.data))
}

fn euclid(d: usize) -> MetricValue {
    MetricValue::euclidean(d)
}

pub fn transpose(f: &DoubleFormField) -> DoubleFormField {
    let p = &f.domain.patch;
    f.with_degrees(f.m, f.k, stencil::transpose_nodes(p.dim, f.k, f.m, p.nnodes, &f.data))
}

pub fn bianchi(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 0, 1)?;
    need_up(f, 1, 0)?;
    let map = PointMap::probe(f.dim(), (f.k, f.m), (f.k + 1, f.m - 1), 0, |v| v.bianchi())?;
    Ok(map_field(f, &map, f.k + 1, f.m - 1))
}

pub fn bianchi_v(f: &DoubleFormField) -> Result<DoubleFormField> {
    Ok(transpose(&bianchi(&transpose(f))?))
}

pub fn g_wedge(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_up(f, 1, 1)?;
    let g = euclid(f.dim());
    let map = PointMap::probe(f.dim(), (f.k, f.m), (f.k + 1, f.m + 1), 2, |v| v.g_wedge(&g))?;
    Ok(map_field(f, &map, f.k + 1, f.m + 1))
}

pub fn trace_g(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 1, 1)?;
    let g = euclid(f.dim());
    let map = PointMap::probe(f.dim(), (f.k, f.m), (f.k - 1, f.m - 1), -2, |v| v.trace_g(&g))?;
    Ok(map_field(f, &map, f.k - 1, f.m - 1))
}

/// Hodge star on the form part, positive orientation `dx¹∧…∧dx^d`.
pub fn hodge_star(f: &DoubleFormField) -> DoubleFormField {
    let d = f.dim();
    let g = euclid(d);
    let map = PointMap::probe(d, (f.k, f.m), (d - f.k, f.m), d as i32 - 2 * f.k as i32, |v| v.hodge_star(&g, 1.0))
        .expect("hodge star is total");
    map_field(f, &map, d - f.k, f.m)
}

pub fn hodge_star_v(f: &DoubleFormField) -> DoubleFormField {
    transpose(&hodge_star(&transpose(f)))
}

/// `⋆⋆^V`.
pub fn double_star(f: &DoubleFormField) -> DoubleFormField {
    hodge_star(&hodge_star_v(f))
}

/// Matrix of the curvature term at the Euclidean metric.
fn curvature_map(d: usize, kappa: f64, k: usize, m: usize) -> Result<PointMap> {
    let e = euclid(d);
    let delta = DoubleFormValue::metric(&e);
    let rm = delta.wedge(&delta)?.scale(kappa / 2.0);
    PointMap::probe(d, (k, m), (k + 1, m + 1), 2, |psi| {
        let mut acc = DoubleFormValue::zeros(d, k + 1, m + 1);
        for i in 0..d {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            let a = rm.interior(&v)?;
            let b = rm.interior_v(&v)?;
            if m >= 1 {
                if let Some(w) = a.wedge_or_zero(&psi.interior_v(&v)?)? {
                    acc = acc.add(&w)?;
                }
            }
            if k >= 1 {
                if let Some(w) = b.wedge_or_zero(&psi.interior(&v)?)? {
                    acc = acc.add(&w)?;
                }
            }
        }
        Ok(acc.scale(0.5))
    })
}

/// Zeroth-order curvature correction `D_g`.
pub fn d_g(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_up(f, 1, 1)?;
    let map = curvature_map(f.dim(), f.domain.chart.kappa, f.k, f.m)?;
    Ok(map_field(f, &map, f.k + 1, f.m + 1))
}

/// Fiber adjoint of `D_g`.
pub fn d_g_star(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 1, 1)?;
    let map = curvature_map(f.dim(), f.domain.chart.kappa, f.k - 1, f.m - 1)?.transposed(-2);
    Ok(map_field(f, &map, f.k - 1, f.m - 1))
}

/// `∇_{e_axis} f`.
pub fn nabla(f: &DoubleFormField, axis: usize) -> Result<DoubleFormField> {
    if axis >= f.dim() {
        return Err(Error::InvalidValue(format!("axis {axis} out of range")));
    }
    let mut all = stencil::nabla_all(&f.domain.patch, f.k, f.m, &f.data);
    Ok(f.like(all.swap_remove(axis)))
}

pub fn d_nabla(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_up(f, 1, 0)?;
    Ok(f.with_degrees(f.k + 1, f.m, stencil::d_form(&f.domain.patch, f.k, f.m, &f.data)))
}

pub fn d_nabla_v(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_up(f, 0, 1)?;
    Ok(f.with_degrees(f.k, f.m + 1, stencil::d_vector(&f.domain.patch, f.k, f.m, &f.data)))
}

pub fn delta_nabla(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 1, 0)?;
    Ok(f.with_degrees(f.k - 1, f.m, stencil::delta_form(&f.domain.patch, f.k, f.m, &f.data)))
}

pub fn delta_nabla_v(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 0, 1)?;
    Ok(f.with_degrees(f.k, f.m - 1, stencil::delta_vector(&f.domain.patch, f.k, f.m, &f.data)))
}

/// `½(d_V d + d d_V)`.
pub fn h_plain(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_up(f, 1, 1)?;
    let a = d_nabla_v(&d_nabla(f)?)?;
    let b = d_nabla(&d_nabla_v(f)?)?;
    Ok(a.add(&b)?.scale(0.5))
}

/// `𝐇 = ½(d_V d + d d_V) + D_g`.
pub fn h_op(f: &DoubleFormField) -> Result<DoubleFormField> {
    h_plain(f)?.add(&d_g(f)?)
}

/// `𝐇* = ½(δ δ_V + δ_V δ) + D*_g`.
pub fn h_star_op(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 1, 1)?;
    let a = delta_nabla(&delta_nabla_v(f)?)?;
    let b = delta_nabla_v(&delta_nabla(f)?)?;
    a.add(&b)?.scale(0.5).add(&d_g_star(f)?)
}

/// `𝐅 = d δ_V`.
pub fn f_op(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 0, 1)?;
    need_up(f, 1, 0)?;
    d_nabla(&delta_nabla_v(f)?)
}

/// `𝐅* = d_V δ`.
pub fn f_star_op(f: &DoubleFormField) -> Result<DoubleFormField> {
    need_down(f, 1, 0)?;
    need_up(f, 0, 1)?;
    d_nabla_v(&delta_nabla(f)?)
}

/// `½(𝐅* + (𝐅*·)^T)`, mapping (2,0)-type fields into symmetric ones.
pub fn f_sym_star_op(f: &DoubleFormField) -> Result<DoubleFormField> {
    let a = f_star_op(f)?;
    if a.k != a.m {
        return Err(Error::DegreeMismatch(a.k, a.m, a.m, a.k));
    }
    Ok(a.add(&transpose(&a))?.scale(0.5))
}

/// `𝐁 = 𝐇𝐇* + 𝐇*𝐇 + 𝐅*𝐅 + 𝐅𝐅*`, dropping compositions that leave the
/// degree range.
pub fn b_op(f: &DoubleFormField) -> Result<DoubleFormField> {
    let d = f.dim();
    let (k, m) = (f.k, f.m);
    let mut acc = DoubleFormField::zeros(&f.domain, k, m)?;
    if k >= 1 && m >= 1 {
        acc = acc.add(&h_op(&h_star_op(f)?)?)?;
    }
    if k < d && m < d {
        acc = acc.add(&h_star_op(&h_op(f)?)?)?;
    }
    if m >= 1 && k < d {
        acc = acc.add(&f_star_op(&f_op(f)?)?)?;
    }
    if k >= 1 && m < d {
        acc = acc.add(&f_op(&f_star_op(f)?)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests;

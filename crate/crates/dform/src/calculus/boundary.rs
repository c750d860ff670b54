//! Boundary projections and first-order boundary operators on box faces.
//!
//! A face carries the pullback metric `g₀ = λ²δ` on its tangent axes, so the
//! intrinsic operators reuse the volume stencils on the face patch.

use crate::algebra::basis::{insert_sign, rank, subsets};
use crate::algebra::MetricValue;
use crate::charts::second_fundamental_form_at;
use crate::error::{Error, Result};
use crate::field::{check_same, BoundaryField, DoubleFormField, FacePatch};

use super::pointwise::PointMap;
use super::{d_nabla, d_nabla_v, delta_nabla, delta_nabla_v, stencil};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Pullback.
    TT,
    /// Pullback of `i_n`.
    NT,
    /// Pullback of `i_n^V`.
    TN,
    /// Pullback of `i_n i_n^V`.
    NN,
}

impl Projection {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tt" => Some(Self::TT),
            "nt" => Some(Self::NT),
            "tn" => Some(Self::TN),
            "nn" => Some(Self::NN),
            _ => None,
        }
    }

    /// Degree drop on the (form, vector) blocks.
    fn drops(self) -> (usize, usize) {
        match self {
            Self::TT => (0, 0),
            Self::NT => (1, 0),
            Self::TN => (0, 1),
            Self::NN => (1, 1),
        }
    }
}

/// Inserts a zero bit at position `axis`.
fn lift(mask: u16, axis: usize) -> u16 {
    let low = mask & ((1u16 << axis) - 1);
    let high = (mask >> axis) << (axis + 1);
    low | high
}

/// Orientation of a face relative to its increasing tangent axes, fixed so
/// that `ℙ^tt ⋆ψ = (-1)^{d+1} ⋆₀ ℙ^nt ψ`.
pub fn face_orientation(d: usize, fp: &FacePatch) -> f64 {
    let s = fp.face.sign();
    let a = fp.face.axis;
    if (d - 1 + a) % 2 == 0 {
        s
    } else {
        -s
    }
}

pub fn project_boundary(f: &DoubleFormField, face: usize, which: Projection) -> Result<BoundaryField> {
    let dom = &f.domain;
    let fp = dom.face(face)?;
    let d = dom.dim();
    let (dk, dm) = which.drops();
    if f.k < dk || f.m < dm {
        return Err(Error::DegreeUnderflow { k: f.k, m: f.m });
    }
    let (k0, m0) = (f.k - dk, f.m - dm);
    let mut out = BoundaryField::zeros(dom, face, k0, m0)?;
    let a = fp.face.axis;
    let s = fp.face.sign();
    let nm_in = crate::algebra::binomial(d, f.m);
    // (out component, in component, coefficient)
    let mut entries = Vec::new();
    let nm0 = crate::algebra::binomial(d - 1, m0);
    for (ri, &i0) in subsets(d - 1, k0).iter().enumerate() {
        let il = lift(i0, a);
        let (iv, si) = if dk == 1 { (il | (1 << a), s * insert_sign(il, a)) } else { (il, 1.0) };
        for (rj, &j0) in subsets(d - 1, m0).iter().enumerate() {
            let jl = lift(j0, a);
            let (jv, sj) = if dm == 1 { (jl | (1 << a), s * insert_sign(jl, a)) } else { (jl, 1.0) };
            entries.push((ri * nm0 + rj, rank(d, iv) * nm_in + rank(d, jv), si * sj));
        }
    }
    let pow = -((dk + dm) as i32);
    let nc_in = f.ncomp();
    let nc_out = out.ncomp();
    for (i, &n) in fp.nodes.iter().enumerate() {
        let scale = fp.patch.lam[i].powi(pow);
        for &(o, inp, c) in &entries {
            out.data[i * nc_out + o] = scale * c * f.data[n * nc_in + inp];
        }
    }
    Ok(out)
}

fn face_need(bf: &BoundaryField, up: (usize, usize), down: (usize, usize)) -> Result<()> {
    let d0 = bf.domain.dim() - 1;
    if bf.k < down.0 || bf.m < down.1 {
        return Err(Error::DegreeUnderflow { k: bf.k, m: bf.m });
    }
    if bf.k + up.0 > d0 || bf.m + up.1 > d0 {
        return Err(Error::DegreeOverflow { k: bf.k + up.0, m: bf.m + up.1, dim: d0 });
    }
    Ok(())
}

pub fn transpose_face(bf: &BoundaryField) -> BoundaryField {
    let p = &bf.face_patch().patch;
    bf.with_degrees(bf.m, bf.k, stencil::transpose_nodes(p.dim, bf.k, bf.m, p.nnodes, &bf.data))
}

/// Intrinsic covariant exterior derivative on the face.
pub fn d_face(bf: &BoundaryField) -> Result<BoundaryField> {
    face_need(bf, (1, 0), (0, 0))?;
    Ok(bf.with_degrees(bf.k + 1, bf.m, stencil::d_form(&bf.face_patch().patch, bf.k, bf.m, &bf.data)))
}

pub fn d_face_v(bf: &BoundaryField) -> Result<BoundaryField> {
    face_need(bf, (0, 1), (0, 0))?;
    Ok(bf.with_degrees(bf.k, bf.m + 1, stencil::d_vector(&bf.face_patch().patch, bf.k, bf.m, &bf.data)))
}

pub fn delta_face(bf: &BoundaryField) -> Result<BoundaryField> {
    face_need(bf, (0, 0), (1, 0))?;
    Ok(bf.with_degrees(bf.k - 1, bf.m, stencil::delta_form(&bf.face_patch().patch, bf.k, bf.m, &bf.data)))
}

pub fn delta_face_v(bf: &BoundaryField) -> Result<BoundaryField> {
    face_need(bf, (0, 0), (0, 1))?;
    Ok(bf.with_degrees(bf.k, bf.m - 1, stencil::delta_vector(&bf.face_patch().patch, bf.k, bf.m, &bf.data)))
}

/// Hodge star of the pullback metric, form part.
pub fn hodge_face(bf: &BoundaryField) -> BoundaryField {
    let d0 = bf.domain.dim() - 1;
    let o = face_orientation(bf.domain.dim(), bf.face_patch());
    let g = MetricValue::euclidean(d0);
    let map = PointMap::probe(d0, (bf.k, bf.m), (d0 - bf.k, bf.m), d0 as i32 - 2 * bf.k as i32, |v| v.hodge_star(&g, o))
        .expect("hodge star is total");
    bf.with_degrees(d0 - bf.k, bf.m, map.apply_patch(&bf.face_patch().patch, &bf.data))
}

pub fn hodge_face_v(bf: &BoundaryField) -> BoundaryField {
    transpose_face(&hodge_face(&transpose_face(bf)))
}

/// Pullback-metric contraction.
pub fn trace_face(bf: &BoundaryField) -> Result<BoundaryField> {
    face_need(bf, (0, 0), (1, 1))?;
    let d0 = bf.domain.dim() - 1;
    let g = MetricValue::euclidean(d0);
    let map = PointMap::probe(d0, (bf.k, bf.m), (bf.k - 1, bf.m - 1), -2, |v| v.trace_g(&g))?;
    Ok(bf.with_degrees(bf.k - 1, bf.m - 1, map.apply_patch(&bf.face_patch().patch, &bf.data)))
}

/// Nodewise wedge of two face fields.
pub fn wedge_face(a: &BoundaryField, b: &BoundaryField) -> Result<BoundaryField> {
    check_same(&a.domain, &b.domain)?;
    if a.face != b.face {
        return Err(Error::DomainMismatch);
    }
    let d0 = a.domain.dim() - 1;
    let (k, m) = (a.k + b.k, a.m + b.m);
    let mut out = BoundaryField::zeros(&a.domain, a.face, k, m)?;
    let (na, nb, no) = (a.ncomp(), b.ncomp(), out.ncomp());
    for i in 0..a.face_patch().nodes.len() {
        crate::algebra::wedge_acc(
            d0,
            (a.k, a.m),
            &a.data[i * na..(i + 1) * na],
            (b.k, b.m),
            &b.data[i * nb..(i + 1) * nb],
            1.0,
            &mut out.data[i * no..(i + 1) * no],
        );
    }
    Ok(out)
}

/// Scalar second fundamental form `g(∇_X n, Y)` of a face as a (1,1) field.
pub fn second_fundamental_form_field(f: &std::sync::Arc<crate::field::Domain>, face: usize) -> Result<BoundaryField> {
    let fp = f.face(face)?;
    let mut out = BoundaryField::zeros(f, face, 1, 1)?;
    let nc = out.ncomp();
    for (i, &n) in fp.nodes.iter().enumerate() {
        let h0 = second_fundamental_form_at(&f.chart, fp.face, &f.grid.coords(n));
        out.data[i * nc..(i + 1) * nc].copy_from_slice(h0.components());
    }
    Ok(out)
}

/// Projects a derived volume field to a face; a term whose degrees fall
/// outside the fiber range contributes nothing.
fn restrict_then(f: Result<DoubleFormField>, face: usize, which: Projection) -> Result<Option<BoundaryField>> {
    match f {
        Ok(v) => match project_boundary(&v, face, which) {
            Ok(b) => Ok(Some(b)),
            Err(Error::DegreeOverflow { .. }) | Err(Error::DegreeUnderflow { .. }) => Ok(None),
            Err(e) => Err(e),
        },
        Err(Error::DegreeOverflow { .. }) | Err(Error::DegreeUnderflow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn face_term(f: &DoubleFormField, face: usize, which: Projection, op: fn(&BoundaryField) -> Result<BoundaryField>) -> Result<Option<BoundaryField>> {
    match project_boundary(f, face, which) {
        Ok(b) => match op(&b) {
            Ok(r) => Ok(Some(r)),
            Err(Error::DegreeOverflow { .. }) | Err(Error::DegreeUnderflow { .. }) => Ok(None),
            Err(e) => Err(e),
        },
        Err(Error::DegreeOverflow { .. }) | Err(Error::DegreeUnderflow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn combine(f: &DoubleFormField, face: usize, (k, m): (usize, usize), terms: Vec<(f64, Option<BoundaryField>)>) -> Result<BoundaryField> {
    let mut acc = BoundaryField::zeros(&f.domain, face, k, m)?;
    for (c, t) in terms.into_iter() {
        if let Some(t) = t {
            debug_assert_eq!((t.k, t.m), (k, m));
            for (a, b) in acc.data.iter_mut().zip(&t.data) {
                *a += c * b;
            }
        }
    }
    Ok(acc)
}

/// `𝔗ψ = ½(ℙ^nt d ψ − d₀ ℙ^nt ψ) + ½(ℙ^tn d_V ψ − d₀_V ℙ^tn ψ)`.
pub fn boundary_t(f: &DoubleFormField, face: usize) -> Result<BoundaryField> {
    let terms = vec![
        (0.5, restrict_then(d_nabla(f), face, Projection::NT)?),
        (-0.5, face_term(f, face, Projection::NT, d_face)?),
        (0.5, restrict_then(d_nabla_v(f), face, Projection::TN)?),
        (-0.5, face_term(f, face, Projection::TN, d_face_v)?),
    ];
    combine(f, face, (f.k, f.m), terms)
}

/// `𝔗*ψ = −½(ℙ^tn δψ + δ₀ ℙ^tn ψ) − ½(ℙ^nt δ_V ψ + δ₀_V ℙ^nt ψ)`.
pub fn boundary_t_star(f: &DoubleFormField, face: usize) -> Result<BoundaryField> {
    if f.k == 0 || f.m == 0 {
        return Err(Error::DegreeUnderflow { k: f.k, m: f.m });
    }
    let terms = vec![
        (-0.5, restrict_then(delta_nabla(f), face, Projection::TN)?),
        (-0.5, face_term(f, face, Projection::TN, delta_face)?),
        (-0.5, restrict_then(delta_nabla_v(f), face, Projection::NT)?),
        (-0.5, face_term(f, face, Projection::NT, delta_face_v)?),
    ];
    combine(f, face, (f.k - 1, f.m - 1), terms)
}

/// `𝔉*ψ = ½(ℙ^nn d_V ψ − d₀_V ℙ^nn ψ) − ½(ℙ^tt δψ + δ₀ ℙ^tt ψ)`.
pub fn boundary_f_star(f: &DoubleFormField, face: usize) -> Result<BoundaryField> {
    if f.k == 0 {
        return Err(Error::DegreeUnderflow { k: f.k, m: f.m });
    }
    let terms = vec![
        (0.5, restrict_then(d_nabla_v(f), face, Projection::NN)?),
        (-0.5, face_term(f, face, Projection::NN, d_face_v)?),
        (-0.5, restrict_then(delta_nabla(f), face, Projection::TT)?),
        (-0.5, face_term(f, face, Projection::TT, delta_face)?),
    ];
    combine(f, face, (f.k - 1, f.m), terms)
}

/// `𝔉ψ = ½(ℙ^nn dψ − d₀ ℙ^nn ψ) − ½(ℙ^tt δ_V ψ + δ₀_V ℙ^tt ψ)`.
pub fn boundary_f(f: &DoubleFormField, face: usize) -> Result<BoundaryField> {
    if f.m == 0 {
        return Err(Error::DegreeUnderflow { k: f.k, m: f.m });
    }
    let terms = vec![
        (0.5, restrict_then(d_nabla(f), face, Projection::NN)?),
        (-0.5, face_term(f, face, Projection::NN, d_face)?),
        (-0.5, restrict_then(delta_nabla_v(f), face, Projection::TT)?),
        (-0.5, face_term(f, face, Projection::TT, delta_face_v)?),
    ];
    combine(f, face, (f.k, f.m - 1), terms)
}

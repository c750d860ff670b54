//! Finite-difference kernels on raw node-major component arrays over a
//! `Patch`. Second-order central differences in the interior and
//! three-point one-sided differences on the patch edges.

use rayon::prelude::*;

use crate::algebra::basis::{insert_sign, rank, subsets};
use crate::algebra::{binomial, ncomp};
use crate::field::Patch;

/// `∂_axis` of every component.
pub fn partial(p: &Patch, nc: usize, data: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    let n = p.shape[axis];
    let s = p.strides[axis];
    let inv = 0.5 / p.h[axis];
    out.par_chunks_mut(nc).enumerate().for_each(|(node, o)| {
        let i = p.index_along(node, axis);
        let at = |off: isize, c: usize| data[((node as isize + off * s as isize) as usize) * nc + c];
        for (c, oc) in o.iter_mut().enumerate() {
            *oc = if i == 0 {
                (-3.0 * at(0, c) + 4.0 * at(1, c) - at(2, c)) * inv
            } else if i + 1 == n {
                (3.0 * at(0, c) - 4.0 * at(-1, c) + at(-2, c)) * inv
            } else {
                (at(1, c) - at(-1, c)) * inv
            };
        }
    });
    out
}

/// One term of the connection acting as a derivation:
/// `out += sign * Γ^c_{a i} * in`.
#[derive(Clone, Copy, Debug)]
struct ConnEntry {
    out: u32,
    inp: u32,
    sign: f64,
    i: u8,
    c: u8,
}

fn conn_table(d: usize, k: usize, m: usize) -> Vec<ConnEntry> {
    let nm = binomial(d, m);
    let mut t = Vec::new();
    for (ri, &im) in subsets(d, k).iter().enumerate() {
        for (rj, &jm) in subsets(d, m).iter().enumerate() {
            let out = (ri * nm + rj) as u32;
            // slots in the form block
            for i in 0..d {
                if im & (1 << i) == 0 {
                    continue;
                }
                let rest = im & !(1 << i);
                for c in 0..d {
                    if rest & (1 << c) != 0 {
                        continue;
                    }
                    let sign = insert_sign(rest, i) * insert_sign(rest, c);
                    let inp = (rank(d, rest | (1 << c)) * nm + rj) as u32;
                    t.push(ConnEntry { out, inp, sign, i: i as u8, c: c as u8 });
                }
            }
            for i in 0..d {
                if jm & (1 << i) == 0 {
                    continue;
                }
                let rest = jm & !(1 << i);
                for c in 0..d {
                    if rest & (1 << c) != 0 {
                        continue;
                    }
                    let sign = insert_sign(rest, i) * insert_sign(rest, c);
                    let inp = (ri * nm + rank(d, rest | (1 << c))) as u32;
                    t.push(ConnEntry { out, inp, sign, i: i as u8, c: c as u8 });
                }
            }
        }
    }
    t
}

/// Christoffel symbol `Γ^c_{ai}` of `λ²δ` from `u = ∂ log λ`.
#[inline]
pub(crate) fn gamma(u: &[f64], c: usize, a: usize, i: usize) -> f64 {
    let mut v = 0.0;
    if a == c {
        v += u[i];
    }
    if i == c {
        v += u[a];
    }
    if a == i {
        v -= u[c];
    }
    v
}

/// `∇_{e_a} ψ` for every coordinate direction `a`.
pub fn nabla_all(p: &Patch, k: usize, m: usize, data: &[f64]) -> Vec<Vec<f64>> {
    let d = p.dim;
    let nc = ncomp(d, k, m);
    let table = conn_table(d, k, m);
    (0..d)
        .map(|a| {
            let mut out = partial(p, nc, data, a);
            if !table.is_empty() {
                out.par_chunks_mut(nc).enumerate().for_each(|(node, o)| {
                    let u = &p.u[node * d..(node + 1) * d];
                    if u.iter().all(|&v| v == 0.0) {
                        return;
                    }
                    let src = &data[node * nc..(node + 1) * nc];
                    for e in &table {
                        let g = gamma(u, e.c as usize, a, e.i as usize);
                        if g != 0.0 {
                            o[e.out as usize] -= e.sign * g * src[e.inp as usize];
                        }
                    }
                });
            }
            out
        })
        .collect()
}

/// Covariant exterior derivative on the form block, `Σ_a dx^a ∧ ∇_a ψ`.
pub fn d_form(p: &Patch, k: usize, m: usize, data: &[f64]) -> Vec<f64> {
    let d = p.dim;
    let nab = nabla_all(p, k, m, data);
    let nm = binomial(d, m);
    let nc_in = ncomp(d, k, m);
    let nc_out = ncomp(d, k + 1, m);
    let mut terms = Vec::new();
    for (rk, &km) in subsets(d, k + 1).iter().enumerate() {
        for a in 0..d {
            if km & (1 << a) != 0 {
                let rest = km & !(1 << a);
                terms.push((rk, a, rank(d, rest), insert_sign(rest, a)));
            }
        }
    }
    let mut out = vec![0.0; p.nnodes * nc_out];
    out.par_chunks_mut(nc_out).enumerate().for_each(|(node, o)| {
        for &(rk, a, ri, s) in &terms {
            let src = &nab[a][node * nc_in + ri * nm..node * nc_in + (ri + 1) * nm];
            for (j, v) in src.iter().enumerate() {
                o[rk * nm + j] += s * v;
            }
        }
    });
    out
}

/// Codifferential on the form block, `-Σ g^{ab} i_{e_a} ∇_b ψ`.
pub fn delta_form(p: &Patch, k: usize, m: usize, data: &[f64]) -> Vec<f64> {
    let d = p.dim;
    let nab = nabla_all(p, k, m, data);
    let nm = binomial(d, m);
    let nc_in = ncomp(d, k, m);
    let nc_out = ncomp(d, k - 1, m);
    let mut terms = Vec::new();
    for (ro, &om) in subsets(d, k - 1).iter().enumerate() {
        for a in 0..d {
            if om & (1 << a) == 0 {
                terms.push((ro, a, rank(d, om | (1 << a)), insert_sign(om, a)));
            }
        }
    }
    let mut out = vec![0.0; p.nnodes * nc_out];
    out.par_chunks_mut(nc_out).enumerate().for_each(|(node, o)| {
        let w = -1.0 / (p.lam[node] * p.lam[node]);
        for &(ro, a, ri, s) in &terms {
            let src = &nab[a][node * nc_in + ri * nm..node * nc_in + (ri + 1) * nm];
            for (j, v) in src.iter().enumerate() {
                o[ro * nm + j] += w * s * v;
            }
        }
    });
    out
}

/// Transpose every node value.
pub fn transpose_nodes(d: usize, k: usize, m: usize, nnodes: usize, data: &[f64]) -> Vec<f64> {
    let nk = binomial(d, k);
    let nm = binomial(d, m);
    let nc = nk * nm;
    let mut out = vec![0.0; data.len()];
    for node in 0..nnodes {
        let (s, o) = (&data[node * nc..(node + 1) * nc], &mut out[node * nc..(node + 1) * nc]);
        for i in 0..nk {
            for j in 0..nm {
                o[j * nk + i] = s[i * nm + j];
            }
        }
    }
    out
}

pub fn d_vector(p: &Patch, k: usize, m: usize, data: &[f64]) -> Vec<f64> {
    let t = transpose_nodes(p.dim, k, m, p.nnodes, data);
    transpose_nodes(p.dim, m + 1, k, p.nnodes, &d_form(p, m, k, &t))
}

pub fn delta_vector(p: &Patch, k: usize, m: usize, data: &[f64]) -> Vec<f64> {
    let t = transpose_nodes(p.dim, k, m, p.nnodes, data);
    transpose_nodes(p.dim, m - 1, k, p.nnodes, &delta_form(p, m, k, &t))
}


/// Nodes and weights of the `∂_axis` stencil used by [`partial`] at `node`.
pub fn partial_weights(p: &Patch, node: usize, axis: usize) -> Vec<(usize, f64)> {
    let n = p.shape[axis];
    let s = p.strides[axis];
    let inv = 0.5 / p.h[axis];
    let i = p.index_along(node, axis);
    if i == 0 {
        vec![(node, -3.0 * inv), (node + s, 4.0 * inv), (node + 2 * s, -inv)]
    } else if i + 1 == n {
        vec![(node, 3.0 * inv), (node - s, -4.0 * inv), (node - 2 * s, inv)]
    } else {
        vec![(node + s, inv), (node - s, -inv)]
    }
}

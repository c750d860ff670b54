//! Slice-level kernels shared by `DoubleFormValue` and the field operators.
//! All `*_acc` functions add `scale * result` into `out`.

use super::basis::{insert_sign, merge_sign, minor_det, rank, subsets};
use super::{binomial, MetricValue};

pub fn wedge_acc(
    d: usize,
    (k, m): (usize, usize),
    a: &[f64],
    (n, l): (usize, usize),
    b: &[f64],
    scale: f64,
    out: &mut [f64],
) {
    let nm = binomial(d, m);
    let nl = binomial(d, l);
    let nout = binomial(d, m + l);
    let (sk, sm, sn, sl) = (subsets(d, k), subsets(d, m), subsets(d, n), subsets(d, l));
    for (ri, &i) in sk.iter().enumerate() {
        for (rj, &j) in sm.iter().enumerate() {
            let va = a[ri * nm + rj];
            if va == 0.0 {
                continue;
            }
            for (rk, &kk) in sn.iter().enumerate() {
                if i & kk != 0 {
                    continue;
                }
                let s1 = merge_sign(i, kk) * va * scale;
                let row = rank(d, i | kk) * nout;
                for (rl, &ll) in sl.iter().enumerate() {
                    if j & ll != 0 {
                        continue;
                    }
                    out[row + rank(d, j | ll)] += s1 * merge_sign(j, ll) * b[rk * nl + rl];
                }
            }
        }
    }
}

pub fn transpose_into(d: usize, k: usize, m: usize, src: &[f64], dst: &mut [f64]) {
    let nk = binomial(d, k);
    let nm = binomial(d, m);
    for i in 0..nk {
        for j in 0..nm {
            dst[j * nk + i] = src[i * nm + j];
        }
    }
}

/// Bianchi sum: moves one vector-part slot into the form part,
/// `Gψ(X_1..X_{k+1}; Y..) = Σ_j (-1)^{j+1} ψ(..X̂_j..; X_j, Y..)`.
pub fn bianchi_acc(d: usize, k: usize, m: usize, src: &[f64], scale: f64, out: &mut [f64]) {
    let nm = binomial(d, m);
    let nout = binomial(d, m - 1);
    for (ri, &i) in subsets(d, k).iter().enumerate() {
        for (rj, &j) in subsets(d, m).iter().enumerate() {
            let v = src[ri * nm + rj];
            if v == 0.0 {
                continue;
            }
            let mut rest = j;
            while rest != 0 {
                let c = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if i & (1 << c) != 0 {
                    continue;
                }
                let jr = j & !(1 << c);
                let s = insert_sign(i, c) * insert_sign(jr, c);
                out[rank(d, i | (1 << c)) * nout + rank(d, jr)] += scale * s * v;
            }
        }
    }
}

/// Interior product on the form part.
pub fn interior_acc(d: usize, k: usize, m: usize, v: &[f64], src: &[f64], scale: f64, out: &mut [f64]) {
    let nm = binomial(d, m);
    for (ri, &i) in subsets(d, k).iter().enumerate() {
        let mut rest = i;
        while rest != 0 {
            let a = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if v[a] == 0.0 {
                continue;
            }
            let ir = i & !(1 << a);
            let f = scale * insert_sign(ir, a) * v[a];
            let row = rank(d, ir) * nm;
            for j in 0..nm {
                out[row + j] += f * src[ri * nm + j];
            }
        }
    }
}

/// Interior product on the vector part.
pub fn interior_v_acc(d: usize, k: usize, m: usize, v: &[f64], src: &[f64], scale: f64, out: &mut [f64]) {
    let nk = binomial(d, k);
    let nm = binomial(d, m);
    let nout = binomial(d, m - 1);
    for (rj, &j) in subsets(d, m).iter().enumerate() {
        let mut rest = j;
        while rest != 0 {
            let a = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if v[a] == 0.0 {
                continue;
            }
            let jr = j & !(1 << a);
            let f = scale * insert_sign(jr, a) * v[a];
            let col = rank(d, jr);
            for i in 0..nk {
                out[i * nout + col] += f * src[i * nm + rj];
            }
        }
    }
}

/// Gram matrix of the induced inner product on k-forms (minors of `g_inv`).
pub fn gram(d: usize, k: usize, g_inv: &[f64]) -> Vec<f64> {
    let s = subsets(d, k);
    let n = s.len();
    let mut out = vec![0.0; n * n];
    for (a, &i) in s.iter().enumerate() {
        for (b, &j) in s.iter().enumerate() {
            out[a * n + b] = minor_det(g_inv, d, i, j);
        }
    }
    out
}

pub fn inner_raw(d: usize, k: usize, m: usize, g: &MetricValue, a: &[f64], b: &[f64]) -> f64 {
    let gk = gram(d, k, &g.g_inv);
    let gm = gram(d, m, &g.g_inv);
    let nk = binomial(d, k);
    let nm = binomial(d, m);
    // t = b * gm^T, then sum over a[I,J] gk[I,K] t[K,J]
    let mut t = vec![0.0; nk * nm];
    for kk in 0..nk {
        for j in 0..nm {
            let mut s = 0.0;
            for l in 0..nm {
                s += gm[j * nm + l] * b[kk * nm + l];
            }
            t[kk * nm + j] = s;
        }
    }
    let mut acc = 0.0;
    for i in 0..nk {
        for kk in 0..nk {
            let w = gk[i * nk + kk];
            if w == 0.0 {
                continue;
            }
            for j in 0..nm {
                acc += a[i * nm + j] * w * t[kk * nm + j];
            }
        }
    }
    acc
}

/// Hodge star on the form part, `(⋆ψ)_{J,L} = o √det g ε(J^c, J) ψ^{J^c}_L`
/// with the form indices raised by `g`.
pub fn hodge_acc(d: usize, k: usize, m: usize, g: &MetricValue, orientation: f64, src: &[f64], out: &mut [f64]) {
    let nm = binomial(d, m);
    let gk = gram(d, k, &g.g_inv);
    let nk = binomial(d, k);
    let full: u16 = ((1u32 << d) - 1) as u16;
    for (rj, &j) in subsets(d, d - k).iter().enumerate() {
        let ic = full & !j;
        let ri = rank(d, ic);
        let f = orientation * g.det_sqrt * merge_sign(ic, j);
        for kk in 0..nk {
            let w = gk[ri * nk + kk];
            if w == 0.0 {
                continue;
            }
            for l in 0..nm {
                out[rj * nm + l] += f * w * src[kk * nm + l];
            }
        }
    }
}

/// Metric contraction `Σ g^{ab} i_{e_a} i^V_{e_b}`.
pub fn trace_acc(d: usize, k: usize, m: usize, g_inv: &[f64], src: &[f64], scale: f64, out: &mut [f64]) {
    let nm = binomial(d, m);
    let nm1 = binomial(d, m - 1);
    for (ri, &i) in subsets(d, k).iter().enumerate() {
        let mut ra = i;
        while ra != 0 {
            let a = ra.trailing_zeros() as usize;
            ra &= ra - 1;
            let ir = i & !(1 << a);
            let sa = insert_sign(ir, a);
            let row = rank(d, ir);
            for (rj, &j) in subsets(d, m).iter().enumerate() {
                let v = src[ri * nm + rj];
                if v == 0.0 {
                    continue;
                }
                let mut rb = j;
                while rb != 0 {
                    let b = rb.trailing_zeros() as usize;
                    rb &= rb - 1;
                    let w = g_inv[a * d + b];
                    if w == 0.0 {
                        continue;
                    }
                    let jr = j & !(1 << b);
                    out[row * nm1 + rank(d, jr)] += scale * w * sa * insert_sign(jr, b) * v;
                }
            }
        }
    }
}

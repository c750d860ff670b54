//! Tensorial operators on fields. Every fiber map used here is homogeneous
//! under the conformal factor, so it is a fixed matrix at the Euclidean
//! metric times `λ^p` at each node.

use rayon::prelude::*;

use crate::algebra::{ncomp, DoubleFormValue};
use crate::error::Result;
use crate::field::Patch;

#[derive(Clone, Debug)]
pub struct PointMap {
    pub nin: usize,
    pub nout: usize,
    /// Row-major `nout × nin`.
    pub mat: Vec<f64>,
    pub lam_pow: i32,
}

impl PointMap {
    /// Builds the matrix by applying `f` to every basis element of the input
    /// fiber at the Euclidean metric.
    pub fn probe(
        d: usize,
        (k, m): (usize, usize),
        (k2, m2): (usize, usize),
        lam_pow: i32,
        f: impl Fn(&DoubleFormValue) -> Result<DoubleFormValue>,
    ) -> Result<Self> {
        let nin = ncomp(d, k, m);
        let nout = ncomp(d, k2, m2);
        let mut mat = vec![0.0; nout * nin];
        for c in 0..nin {
            let mut e = vec![0.0; nin];
            e[c] = 1.0;
            let img = f(&DoubleFormValue::from_raw(d, k, m, e))?;
            debug_assert_eq!(img.degrees(), (k2, m2));
            for (r, v) in img.components().iter().enumerate() {
                mat[r * nin + c] = *v;
            }
        }
        Ok(Self { nin, nout, mat, lam_pow })
    }

    pub fn transposed(&self, lam_pow: i32) -> Self {
        let mut mat = vec![0.0; self.mat.len()];
        for r in 0..self.nout {
            for c in 0..self.nin {
                mat[c * self.nout + r] = self.mat[r * self.nin + c];
            }
        }
        Self { nin: self.nout, nout: self.nin, mat, lam_pow }
    }

    pub fn apply(&self, lam: &[f64], data: &[f64]) -> Vec<f64> {
        let nnodes = lam.len();
        debug_assert_eq!(data.len(), nnodes * self.nin);
        let mut out = vec![0.0; nnodes * self.nout];
        if self.nout == 0 {
            return out;
        }
        out.par_chunks_mut(self.nout).enumerate().for_each(|(node, o)| {
            let s = if self.lam_pow == 0 { 1.0 } else { lam[node].powi(self.lam_pow) };
            let src = &data[node * self.nin..(node + 1) * self.nin];
            for (r, or) in o.iter_mut().enumerate() {
                let row = &self.mat[r * self.nin..(r + 1) * self.nin];
                *or = s * row.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
            }
        });
        out
    }

    pub fn apply_patch(&self, p: &Patch, data: &[f64]) -> Vec<f64> {
        self.apply(&p.lam, data)
    }
}

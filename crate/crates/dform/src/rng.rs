//! Seeded randomness. Every random input in the crate is drawn from a
//! SplitMix64 stream so that suites are reproducible from one 64-bit seed.

use rand::{Rng as _, SeedableRng};
use rand_xoshiro::SplitMix64;

pub struct Rng(SplitMix64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    /// Uniform in [-1, 1).
    pub fn sym(&mut self) -> f64 {
        self.0.gen_range(-1.0..1.0)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.gen_range(lo..hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sym()).collect()
    }

    /// A well-conditioned random symmetric positive definite matrix.
    pub fn spd(&mut self, d: usize) -> Vec<f64> {
        let a = self.vec(d * d);
        let mut g = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = if i == j { d as f64 * 0.5 } else { 0.0 };
                for l in 0..d {
                    s += a[l * d + i] * a[l * d + j];
                }
                g[i * d + j] = s;
            }
        }
        g
    }
}

/// A smooth scalar function: a short sum of low-frequency sinusoids plus a
/// quadratic, with seeded coefficients.
#[derive(Clone, Debug)]
pub struct SmoothFn {
    waves: Vec<(Vec<f64>, f64, f64)>,
    lin: Vec<f64>,
    quad: Vec<f64>,
    c0: f64,
    dim: usize,
}

impl SmoothFn {
    pub fn random(rng: &mut Rng, dim: usize) -> Self {
        let waves = (0..3)
            .map(|_| {
                let k: Vec<f64> = (0..dim).map(|_| rng.range(-2.0, 2.0)).collect();
                (k, rng.range(0.0, std::f64::consts::TAU), rng.sym() / 2.0)
            })
            .collect();
        Self { waves, lin: rng.vec(dim), quad: rng.vec(dim * dim).iter().map(|x| x / 2.0).collect(), c0: rng.sym(), dim }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = self.c0;
        for (k, ph, a) in &self.waves {
            let t: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            s += a * (t + ph).sin();
        }
        for i in 0..self.dim {
            s += self.lin[i] * x[i];
            for j in 0..self.dim {
                s += self.quad[i * self.dim + j] * x[i] * x[j];
            }
        }
        s
    }
}

/// A random polynomial of total degree at most `deg` in `dim` variables.
#[derive(Clone, Debug)]
pub struct Polynomial {
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn random(rng: &mut Rng, dim: usize, deg: u32) -> Self {
        let mut terms = Vec::new();
        let mut exps = vec![0u32; dim];
        loop {
            if exps.iter().sum::<u32>() <= deg {
                terms.push((exps.clone(), rng.sym()));
            }
            let mut i = 0;
            loop {
                if i == dim {
                    return Self { terms };
                }
                exps[i] += 1;
                if exps[i] <= deg {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>())
            .sum()
    }
}

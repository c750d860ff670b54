//! Identity suites: exact fiber-algebra checks on random inputs and
//! grid-refinement studies for the differential identities.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{DoubleFormValue, MetricValue};
use crate::calculus::{
    bianchi, bianchi_v, d_nabla, d_nabla_v, delta_nabla, delta_nabla_v, f_op, f_sym_star_op, g_wedge, h_op, h_star_op,
    trace_g, transpose,
};
use crate::charts::Chart;
use crate::error::{Error, Result};
use crate::field::{core_fraction, Domain, DoubleFormField};
use crate::rng::{Polynomial, Rng};
use crate::saintvenant::{lie_derivative_metric, DisplacementField};

pub const MIN_RATE: f64 = 1.8;
/// Residuals below this are treated as roundoff and need no rate.
pub const ROUNDOFF_FLOOR: f64 = 1e-9;
pub const ALGEBRA_TOL: f64 = 1e-11;
/// Half-width of the coordinate box used by the suites.
pub const SUITE_HALF_WIDTH: f64 = 0.8;

/// Grid sizes `2^(j+s)+1` for `levels` refinements, starting at 17 in 2D and
/// 9 in 3D.
pub fn grid_levels(dim: usize, levels: usize) -> Vec<usize> {
    let start = if dim == 2 { 4 } else { 3 };
    (0..levels).map(|j| (1usize << (start + j)) + 1).collect()
}

/// Successive log₂ error ratios of a halving sequence.
pub fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Every refinement must reach `min_rate` unless the finer residual is
/// already at roundoff.
pub fn refinement_passes(errors: &[f64], min_rate: f64, floor: f64) -> bool {
    errors.iter().all(|e| e.is_finite())
        && rates(errors).iter().zip(&errors[1..]).all(|(r, e)| *r >= min_rate || *e <= floor)
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementResult {
    pub identity: String,
    pub case: String,
    pub grids: Vec<usize>,
    pub residuals: Vec<f64>,
    /// `None` where a ratio is undefined (a residual is exactly zero).
    pub rates: Vec<Option<f64>>,
    pub passed: bool,
}

impl RefinementResult {
    pub fn new(identity: &str, case: String, grids: Vec<usize>, residuals: Vec<f64>) -> Self {
        let rates = rates(&residuals).into_iter().map(|r| r.is_finite().then_some(r)).collect();
        let mut out = Self { identity: identity.into(), case, rates, grids, residuals, passed: false };
        out.judge(MIN_RATE, ROUNDOFF_FLOOR);
        out
    }

    /// Re-evaluates the verdict under other thresholds.
    pub fn judge(&mut self, min_rate: f64, floor: f64) {
        self.passed = refinement_passes(&self.residuals, min_rate, floor);
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AlgebraReport {
    pub checks: usize,
    pub max_scaled_residual: f64,
    pub failures: Vec<String>,
}

impl AlgebraReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_form(rng: &mut Rng, d: usize, k: usize, m: usize) -> DoubleFormValue {
    let mut a = DoubleFormValue::zeros(d, k, m);
    a.components_mut().iter_mut().for_each(|c| *c = rng.sym());
    a
}

/// One randomized fiber identity; returns its name and scaled residual.
fn algebra_check(kind: usize, rng: &mut Rng) -> Result<(&'static str, f64)> {
    let d = 2 + rng.below(3);
    let g = MetricValue::new(d, rng.spd(d))?;
    let rel = |r: &DoubleFormValue, s: f64| r.max_abs() / (1.0 + s);
    Ok(match kind {
        0 => {
            let (k, m) = (rng.below(d + 1), rng.below(d + 1));
            let (n, l) = (rng.below(d - k + 1), rng.below(d - m + 1));
            let a = random_form(rng, d, k, m);
            let b = random_form(rng, d, n, l);
            let sign = if (k * n + m * l) % 2 == 0 { 1.0 } else { -1.0 };
            let ab = a.wedge(&b)?;
            ("wedge_sign", rel(&ab.sub(&b.wedge(&a)?.scale(sign))?, ab.max_abs()))
        }
        1 => {
            let (k1, m1) = (rng.below(d / 2 + 1), rng.below(d / 2 + 1));
            let (k2, m2) = (rng.below(d - k1 + 1), rng.below(d - m1 + 1));
            let (k3, m3) = (rng.below(d - k1 - k2 + 1), rng.below(d - m1 - m2 + 1));
            let a = random_form(rng, d, k1, m1);
            let b = random_form(rng, d, k2, m2);
            let c = random_form(rng, d, k3, m3);
            let l = a.wedge(&b)?.wedge(&c)?;
            ("wedge_associativity", rel(&l.sub(&a.wedge(&b.wedge(&c)?)?)?, l.max_abs()))
        }
        2 => {
            let (k, m) = (rng.below(d + 1), rng.below(d + 1));
            let a = random_form(rng, d, k, m);
            ("transpose_involution", rel(&a.transpose().transpose().sub(&a)?, a.max_abs()))
        }
        3 => {
            let (k, m) = (rng.below(d + 1), rng.below(d + 1));
            let a = random_form(rng, d, k, m);
            let ss = a.hodge_star(&g, 1.0)?.hodge_star(&g, 1.0)?;
            let sign = if (k * (d - k)) % 2 == 0 { 1.0 } else { -1.0 };
            ("double_star_sign", rel(&ss.sub(&a.scale(sign))?, a.max_abs()))
        }
        4 => {
            let (k, m) = (1 + rng.below(d), 1 + rng.below(d));
            let psi = random_form(rng, d, k, m);
            let phi = random_form(rng, d, k - 1, m - 1);
            let lhs = psi.trace_g(&g)?.inner(&phi, &g)?;
            let rhs = psi.inner(&phi.g_wedge(&g)?, &g)?;
            ("trace_g_wedge_adjoint", (lhs - rhs).abs() / (1.0 + lhs.abs()))
        }
        5 => {
            let s = random_form(rng, d, 1, 1);
            let s = s.add(&s.transpose())?;
            ("bianchi_symmetric", rel(&s.bianchi()?, s.max_abs()))
        }
        _ => {
            // the Bianchi sum of a (2,2) form needs a third dimension
            let d = 3 + rng.below(2);
            let g = MetricValue::new(d, rng.spd(d))?;
            let gf = DoubleFormValue::metric(&g);
            let rm = gf.wedge(&gf)?.scale(rng.sym() / 2.0);
            ("bianchi_constant_curvature", rel(&rm.bianchi()?, rm.max_abs()))
        }
    })
}

pub const ALGEBRA_IDENTITIES: usize = 7;

/// `checks` randomized fiber identities over d ∈ {2,3,4}, cycling through
/// the identity kinds.
pub fn algebra_suite(seed: u64, checks: usize) -> Result<AlgebraReport> {
    let results: Vec<(usize, &'static str, f64)> = (0..checks)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(seed.wrapping_add(i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            algebra_check(i % ALGEBRA_IDENTITIES, &mut rng).map(|(n, r)| (i, n, r))
        })
        .collect::<Result<_>>()?;
    let mut rep = AlgebraReport { checks, ..Default::default() };
    for (i, name, r) in results {
        rep.max_scaled_residual = rep.max_scaled_residual.max(r);
        if !(r <= ALGEBRA_TOL) {
            rep.failures.push(format!("{name} #{i}: {r:.3e}"));
        }
    }
    Ok(rep)
}

type Probe = Box<dyn Fn(&Arc<Domain>) -> Result<f64> + Send + Sync>;

fn suite_domain(dim: usize, kappa: f64, n: usize) -> Result<Arc<Domain>> {
    Domain::uniform(Chart::centered(dim, kappa, SUITE_HALF_WIDTH)?, n)
}

/// Evaluates every probe on every grid and turns the residuals into rates.
pub fn run_probes(dim: usize, kappa: f64, grids: &[usize], probes: Vec<(String, String, Probe)>) -> Result<Vec<RefinementResult>> {
    let domains: Vec<Arc<Domain>> = grids.iter().map(|&n| suite_domain(dim, kappa, n)).collect::<Result<_>>()?;
    // degree combinations that do not exist in this dimension are dropped
    let tiny = suite_domain(dim, kappa, 5)?;
    let probes: Vec<_> = probes
        .into_iter()
        .filter(|(_, _, p)| !matches!(p(&tiny), Err(Error::DegreeOverflow { .. } | Error::DegreeUnderflow { .. })))
        .collect();
    probes
        .into_par_iter()
        .map(|(id, case, p)| {
            let res = domains.iter().map(|dm| p(dm)).collect::<Result<Vec<_>>>()?;
            Ok(RefinementResult::new(&id, case, grids.to_vec(), res))
        })
        .collect()
}

fn probe(f: impl Fn(&Arc<Domain>) -> Result<f64> + Send + Sync + 'static) -> Probe {
    Box::new(f)
}

fn core_norm(f: &DoubleFormField) -> f64 {
    f.l2_norm_core(core_fraction(f.dim()))
}

/// Curvature identities `kappa1`..`kappa5` on random smooth fields.
pub fn kappa_probes(dim: usize, kappa: f64, seed: u64) -> Vec<(String, String, Probe)> {
    let mut out = Vec::new();
    let d = dim;
    for (k, m) in [(0, 1), (1, 1), (0, 2), (1, 2)] {
        if k + 2 > d || m > d {
            continue;
        }
        let s = seed ^ (k * 10 + m) as u64;
        out.push((
            "kappa1".into(),
            format!("({k},{m})"),
            probe(move |dm| {
                // d d ψ = −κ g∧𝔊ψ
                let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                let lhs = d_nabla(&d_nabla(&psi)?)?;
                Ok(core_norm(&lhs.sub(&g_wedge(&bianchi(&psi)?)?.scale(-kappa))?))
            }),
        ));
    }
    for (k, m) in [(2, 1), (2, 2), (3, 1)] {
        if k > d {
            continue;
        }
        let s = seed ^ (100 + k * 10 + m) as u64;
        out.push((
            "kappa2".into(),
            format!("({k},{m})"),
            probe(move |dm| {
                // δδψ = −κ Tr 𝔊_V ψ
                let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                let lhs = delta_nabla(&delta_nabla(&psi)?)?;
                Ok(core_norm(&lhs.sub(&trace_g(&bianchi_v(&psi)?)?.scale(-kappa))?))
            }),
        ));
    }
    for (k, m) in [(0, 1), (1, 0), (1, 1), (0, 2)] {
        if k + 1 > d || m + 1 > d {
            continue;
        }
        let s = seed ^ (200 + k * 10 + m) as u64;
        out.push((
            "kappa3".into(),
            format!("({k},{m})"),
            probe(move |dm| {
                // d d_V − d_V d = (m−k)κ g∧ψ
                let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                let lhs = d_nabla(&d_nabla_v(&psi)?)?.sub(&d_nabla_v(&d_nabla(&psi)?)?)?;
                Ok(core_norm(&lhs.sub(&g_wedge(&psi)?.scale((m as f64 - k as f64) * kappa))?))
            }),
        ));
    }
    for (k, m) in [(0, 1), (1, 1), (0, 2), (1, 2)] {
        if k + 1 > d || m > d {
            continue;
        }
        let s = seed ^ (300 + k * 10 + m) as u64;
        out.push((
            "kappa4".into(),
            format!("({k},{m})"),
            probe(move |dm| {
                // d δ_V − δ_V d = −(d−m−k)κ 𝔊ψ
                let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                let lhs = d_nabla(&delta_nabla_v(&psi)?)?.sub(&delta_nabla_v(&d_nabla(&psi)?)?)?;
                let c = -(dm.dim() as f64 - m as f64 - k as f64) * kappa;
                Ok(core_norm(&lhs.sub(&bianchi(&psi)?.scale(c))?))
            }),
        ));
    }
    // the three commutators again on one-forms, either slot
    for (k, m) in [(1, 0), (0, 1)] {
        let s = seed ^ (400 + k * 10 + m) as u64;
        out.push((
            "kappa5".into(),
            format!("d d on ({k},{m})"),
            probe(move |dm| {
                let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                let lhs = d_nabla(&d_nabla(&psi)?)?;
                Ok(core_norm(&lhs.sub(&g_wedge(&bianchi(&psi)?)?.scale(-kappa))?))
            }),
        ));
        out.push((
            "kappa5".into(),
            format!("[d, d_V] on ({k},{m})"),
            probe(move |dm| {
                let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                let lhs = d_nabla(&d_nabla_v(&psi)?)?.sub(&d_nabla_v(&d_nabla(&psi)?)?)?;
                Ok(core_norm(&lhs.sub(&g_wedge(&psi)?.scale((m as f64 - k as f64) * kappa))?))
            }),
        ));
        if m == 1 {
            out.push((
                "kappa5".into(),
                format!("[d, δ_V] on ({k},{m})"),
                probe(move |dm| {
                    let psi = DoubleFormField::random_smooth(dm, k, m, s)?;
                    let lhs = d_nabla(&delta_nabla_v(&psi)?)?.sub(&delta_nabla_v(&d_nabla(&psi)?)?)?;
                    let c = -(dm.dim() as f64 - m as f64 - k as f64) * kappa;
                    Ok(core_norm(&lhs.sub(&bianchi(&psi)?.scale(c))?))
                }),
            ));
        }
    }
    out
}

/// The six compositions that vanish identically.
pub fn exactness_probes(seed: u64) -> Vec<(String, String, Probe)> {
    let s = seed;
    vec![
        ("exactness".into(), "HH f".into(), probe(move |dm| {
            let f = DoubleFormField::random_smooth(dm, 0, 0, s ^ 1)?;
            // 𝐇𝐇 on scalars lands in degree (4,4), absent below four dimensions
            Ok(h_op(&h_op(&f)?).map(|r| core_norm(&r)).unwrap_or(0.0))
        })),
        ("exactness".into(), "FH f".into(), probe(move |dm| {
            let f = DoubleFormField::random_smooth(dm, 0, 0, s ^ 2)?;
            Ok(core_norm(&f_op(&h_op(&f)?)?))
        })),
        ("exactness".into(), "H(F*l + (F*l)^T)".into(), probe(move |dm| {
            let l = DoubleFormField::random_smooth(dm, 2, 0, s ^ 3)?;
            Ok(core_norm(&h_op(&f_sym_star_op(&l)?)?))
        })),
        ("exactness".into(), "H*H* psi".into(), probe(move |dm| {
            let p = DoubleFormField::random_smooth_symmetric(dm, 2, s ^ 4)?;
            Ok(core_norm(&h_star_op(&h_star_op(&p)?)?))
        })),
        ("exactness".into(), "F H* psi".into(), probe(move |dm| {
            let p = DoubleFormField::random_smooth_symmetric(dm, 2, s ^ 5)?;
            Ok(f_op(&h_star_op(&p)?).map(|r| core_norm(&r)).unwrap_or(0.0))
        })),
        ("exactness".into(), "H*(F*l + (F*l)^T)".into(), probe(move |dm| {
            let l = DoubleFormField::random_smooth(dm, 2, 0, s ^ 6)?;
            Ok(core_norm(&h_star_op(&f_sym_star_op(&l)?)?))
        })),
    ]
}

/// `𝐇𝔤 + 2Rm` in the core max norm.
pub fn h_on_metric_probe() -> (String, String, Probe) {
    ("H_on_metric".into(), "max".into(), probe(|dm| {
        let hg = h_op(&DoubleFormField::metric(dm))?;
        Ok(hg.add(&DoubleFormField::riemann(dm)?.scale(2.0))?.max_norm_core(core_fraction(dm.dim())))
    }))
}

/// `𝐇(ℒ_Y𝔤)` for `count` seeded polynomial fields Y of degree four.
pub fn lie_kernel_probes(seed: u64, count: usize) -> Vec<(String, String, Probe)> {
    (0..count as u64)
        .map(|j| {
            let s = seed.wrapping_add(j);
            ("H_lie_derivative".into(), format!("seed {s}"), probe(move |dm| {
                let d = dm.dim();
                let mut rng = Rng::new(s);
                let polys: Vec<Polynomial> = (0..d).map(|_| Polynomial::random(&mut rng, d, 4)).collect();
                let y = DisplacementField::from_vector_fn(dm, |x, o| {
                    for (v, p) in o.iter_mut().zip(&polys) {
                        *v = p.eval(x);
                    }
                });
                Ok(core_norm(&h_op(&lie_derivative_metric(&y)?)?))
            }))
        })
        .collect()
}

/// `δ(𝐇*ψ)` and `δ_V(𝐇*ψ)` for `count` seeded symmetric (2,2) fields.
pub fn divergence_of_dual_probes(seed: u64, count: usize) -> Vec<(String, String, Probe)> {
    (0..count as u64)
        .map(|j| {
            let s = seed.wrapping_add(1000 + j);
            ("delta_H_star".into(), format!("seed {s}"), probe(move |dm| {
                let p = DoubleFormField::random_smooth_symmetric(dm, 2, s)?;
                let hs = h_star_op(&p)?;
                let a = core_norm(&delta_nabla(&hs)?);
                let b = core_norm(&delta_nabla_v(&hs)?);
                Ok(a.hypot(b))
            }))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CalculusReport {
    pub dim: usize,
    pub kappa: f64,
    pub grids: Vec<usize>,
    pub results: Vec<RefinementResult>,
}

impl CalculusReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.results.iter().filter(|r| !r.passed).map(|r| format!("{} {}", r.identity, r.case)).collect()
    }
}

/// The refinement suite behind `dform verify`: curvature identities,
/// exactness, `𝐇𝔤 = −2Rm`, `𝐇ℒ_Y𝔤 = 0` and `δ𝐇* = 0`.
pub fn calculus_suite(dim: usize, kappa: f64, grids: &[usize], seed: u64) -> Result<CalculusReport> {
    let mut probes = kappa_probes(dim, kappa, seed);
    probes.extend(exactness_probes(seed));
    probes.push(h_on_metric_probe());
    probes.extend(lie_kernel_probes(seed, 5));
    probes.extend(divergence_of_dual_probes(seed, 5));
    let results = run_probes(dim, kappa, grids, probes)?;
    Ok(CalculusReport { dim, kappa, grids: grids.to_vec(), results })
}

/// Transpose commutes with 𝐇 exactly; a cheap sanity probe used by the CLI.
pub fn transpose_commutes(domain: &Arc<Domain>, seed: u64) -> Result<f64> {
    let psi = DoubleFormField::random_smooth(domain, 1, 2, seed)?;
    let a = transpose(&h_op(&transpose(&psi))?);
    Ok(a.sub(&h_op(&psi)?)?.max_abs() / (1.0 + a.max_abs()))
}

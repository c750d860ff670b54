//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use dform::calculus::{delta_nabla, double_star, project_boundary, Projection};
use dform::charts::Chart;
use dform::elasticity::{self, CurvatureSource, TractionData};
use dform::field::{core_fraction, Domain, DoubleFormField};
use dform::saintvenant::{killing_basis, lie_derivative_metric, reconstruct_displacement, DisplacementField};
use dform::verify::{self, grid_levels, rates, refinement_passes, RefinementResult, MIN_RATE, ROUNDOFF_FLOOR};
use dform::Result;

const KAPPAS: [f64; 3] = [-1.0, 0.0, 1.0];
const SEED: u64 = 7;

fn dom(d: usize, kappa: f64, n: usize) -> Result<Arc<Domain>> {
    Domain::uniform(Chart::centered(d, kappa, verify::SUITE_HALF_WIDTH)?, n)
}

fn sci(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", "))
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn summarize(results: &[RefinementResult]) -> Verdict {
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} {} {:?} rates {:?}", r.identity, r.case, r.residuals, r.rates))
        .collect();
    let worst = results
        .iter()
        .filter(|r| r.residuals.last().is_some_and(|e| *e > ROUNDOFF_FLOOR))
        .flat_map(|r| r.rates.iter().flatten().copied())
        .fold(f64::INFINITY, f64::min);
    Verdict {
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} refinement studies, slowest rate above roundoff {worst:.2}", results.len())
        } else {
            format!("failing: {}", failed.join("; "))
        },
    }
}

fn c1_algebra() -> Result<Verdict> {
    let t = Instant::now();
    let rep = verify::algebra_suite(SEED, 2000)?;
    let secs = t.elapsed().as_secs_f64();
    Ok(Verdict {
        passed: rep.passed() && rep.checks == 2000 && secs < 30.0,
        detail: format!("{} checks, max scaled residual {:.2e}, {secs:.1}s", rep.checks, rep.max_scaled_residual),
    })
}

fn c2_constant_curvature() -> Result<Verdict> {
    let t = Instant::now();
    let mut all = Vec::new();
    for kappa in KAPPAS {
        for d in [2, 3] {
            let mut probes = verify::kappa_probes(d, kappa, SEED);
            probes.extend(verify::exactness_probes(SEED));
            all.extend(verify::run_probes(d, kappa, &grid_levels(d, 3), probes)?);
        }
    }
    let mut v = summarize(&all);
    let secs = t.elapsed().as_secs_f64();
    v.passed &= secs < 600.0;
    v.detail = format!("{}, {secs:.1}s", v.detail);
    Ok(v)
}

fn c3_h_on_metric() -> Result<Verdict> {
    let mut all = Vec::new();
    for kappa in [-1.0, 1.0] {
        for d in [2, 3] {
            all.extend(verify::run_probes(d, kappa, &grid_levels(d, 3), vec![verify::h_on_metric_probe()])?);
        }
    }
    let mut v = summarize(&all);
    // every case here is curved, so a roundoff pass would be suspicious
    v.passed &= all.iter().all(|r| r.residuals.iter().all(|e| *e > ROUNDOFF_FLOOR));
    Ok(v)
}

fn c4_lie_kernel() -> Result<Verdict> {
    let mut all = Vec::new();
    for kappa in KAPPAS {
        for d in [2, 3] {
            all.extend(verify::run_probes(d, kappa, &grid_levels(d, 3), verify::lie_kernel_probes(SEED, 5))?);
        }
    }
    Ok(summarize(&all))
}

/// A smooth non-polynomial displacement on the flat square and its exact
/// symmetric gradient.
fn y0(x: &[f64]) -> [f64; 2] {
    let u = 1.1 * x[0] + 0.4 * x[1];
    [u.sin(), (0.9 * x[1]).cos() * x[0] + 0.3 * x[0] * x[0]]
}

fn sym_grad_y0(x: &[f64]) -> [f64; 4] {
    let u = 1.1 * x[0] + 0.4 * x[1];
    let s12 = 0.4 * u.cos() + (0.9 * x[1]).cos() + 0.6 * x[0];
    [2.2 * u.cos(), s12, s12, -1.8 * x[0] * (0.9 * x[1]).sin()]
}

fn c5_reconstruction() -> Result<Verdict> {
    let grids = [17, 33, 65];
    let mut errors = Vec::new();
    let mut exact_misfit = 0.0;
    let mut optimality = 0.0f64;
    let mut discrete_misfit = 0.0;
    for n in grids {
        let dm = dom(2, 0.0, n)?;
        let kb = killing_basis(&dm, None)?;
        let target = kb.project_out(&DisplacementField::from_vector_fn(&dm, |x, o| o.copy_from_slice(&y0(x))))?;
        let sigma = DoubleFormField::from_fn(&dm, 1, 1, |x, o| o.copy_from_slice(&sym_grad_y0(x)))?;
        let rec = reconstruct_displacement(&sigma, Some(&kb), 1e-12)?;
        errors.push(rec.y.sub(&target)?.l2_norm() / target.l2_norm());
        optimality = optimality.max(rec.stats.normal_residual);
        if n == 65 {
            exact_misfit = rec.residual;
            // consistent data: r is at roundoff, so only the misfit is meaningful
            discrete_misfit = reconstruct_displacement(&lie_derivative_metric(&target)?, Some(&kb), 1e-12)?.residual;
        }
    }
    let r = rates(&errors);
    let passed = r.iter().all(|v| *v >= 1.5) && discrete_misfit <= 1e-8 && optimality <= 1e-8;
    Ok(Verdict {
        passed,
        detail: format!(
            "relative L2 errors {} rates {r:.2?}; n=65 misfit {discrete_misfit:.1e} (discrete image), {exact_misfit:.1e} (exact σ); LSQR optimality on exact σ {optimality:.1e}",
            sci(&errors)
        ),
    })
}

fn c6_killing() -> Result<Verdict> {
    let mut lines = Vec::new();
    let mut passed = true;
    let cases: Vec<(usize, f64, usize, usize)> = KAPPAS.iter().map(|&k| (2, k, 33, 3)).chain([(3, 0.0, 17, 6)]).collect();
    for (d, kappa, n, want) in cases {
        let t = Instant::now();
        let kb = killing_basis(&dom(d, kappa, n)?, None)?;
        let el = t.elapsed();
        let ok = kb.dim() == want && kb.gap_ratio >= 1e3 && el < Duration::from_secs(120);
        passed &= ok;
        lines.push(format!("d={d} κ={kappa} n={n}: dim {} gap {:.1e} {:.1}s", kb.dim(), kb.gap_ratio, el.as_secs_f64()));
    }
    Ok(Verdict { passed, detail: lines.join("; ") })
}

fn sin_chi(x: &[f64]) -> f64 {
    (2.0 * x[0] + 0.3).sin() * (1.7 * x[1]).cos()
}

fn c7_airy() -> Result<Verdict> {
    let grids = grid_levels(2, 3);
    let mut studies = Vec::new();
    let mut rhs_dev = 0.0f64;
    for kappa in KAPPAS {
        let (mut err, mut div) = (Vec::new(), Vec::new());
        for &n in &grids {
            let dm = dom(2, kappa, n)?;
            let rhs = elasticity::airy_rhs(&dm, None)?;
            rhs_dev = rhs_dev.max(rhs.data.iter().fold(0.0f64, |a, v| a.max((v + 2.0 * kappa).abs())));
            let (rhs, bc, exact) = elasticity::manufactured_sin(&dm)?;
            let (chi, _) = elasticity::airy_solve(&dm, &rhs, &bc)?;
            err.push(chi.sub(&exact)?.l2_norm());
            let sigma = elasticity::stress_from_airy(&chi)?;
            div.push(delta_nabla(&sigma)?.l2_norm_core(core_fraction(2)));
        }
        studies.push(RefinementResult::new("airy_error", format!("κ={kappa}"), grids.clone(), err));
        studies.push(RefinementResult::new("stress_divergence", format!("κ={kappa}"), grids.clone(), div));
    }
    // flat stress against the classical second-derivative relations
    let (a, b) = (2.0, 1.7);
    let mut flat = Vec::new();
    for &n in &grids {
        let dm = dom(2, 0.0, n)?;
        let (rhs, bc, _) = elasticity::manufactured_sin(&dm)?;
        let (chi, _) = elasticity::airy_solve(&dm, &rhs, &bc)?;
        let sigma = elasticity::stress_from_airy(&chi)?;
        let classical = DoubleFormField::from_fn(&dm, 1, 1, |x, o| {
            let s12 = a * b * (a * x[0] + 0.3).cos() * (b * x[1]).sin();
            o.copy_from_slice(&[-b * b * sin_chi(x), s12, s12, -a * a * sin_chi(x)]);
        })?;
        flat.push(sigma.sub(&classical)?.l2_norm_core(core_fraction(2)));
    }
    studies.push(RefinementResult::new("classical_airy_relations", "κ=0".into(), grids, flat));
    let mut v = summarize(&studies);
    v.passed &= rhs_dev <= 1e-12;
    v.detail = format!("{}; default source deviates from −2κ by {rhs_dev:.1e}", v.detail);
    Ok(v)
}

fn c8_traction() -> Result<Verdict> {
    // the κ=1 Killing gap is only about 2e2 at n=17, so the study starts at 33;
    // the box is off-centre so that no reflection symmetry cancels the fluxes
    let grids = vec![33, 65, 129];
    let mut studies = Vec::new();
    let mut ratios = Vec::new();
    let mut pressure = Vec::new();
    let mut passed = true;
    for kappa in KAPPAS {
        let mut worst = Vec::new();
        for &n in &grids {
            let dm = Domain::uniform(Chart::new(2, kappa, vec![(-0.5, 0.9), (-0.7, 0.6)])?, n)?;
            let kb = killing_basis(&dm, None)?;
            let ints = elasticity::traction_compatibility(&TractionData::constant_normal(&dm, 1.0)?, &kb)?;
            worst.push(ints.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            if n == grids[0] {
                // shear equal to the tangential part of a Killing field
                for w in &kb.fields {
                    let mut t = TractionData::zeros(&dm)?;
                    let mut norm2 = 0.0;
                    for f in 0..dm.faces.len() {
                        t.tau[f] = project_boundary(&w.form, f, Projection::TT)?;
                        norm2 += dform::calculus::boundary_l2_inner(&t.tau[f], &t.tau[f])?;
                    }
                    let own = kb.fields.iter().position(|k| std::ptr::eq(k, w)).unwrap();
                    let i = elasticity::traction_compatibility(&t, &kb)?[own];
                    passed &= i >= 0.1 * norm2 && norm2 > 0.0;
                    ratios.push(i / norm2);
                }
            }
        }
        pressure.push(format!("κ={kappa} {}", sci(&worst)));
        studies.push(RefinementResult::new("constant_pressure", format!("κ={kappa}"), grids.clone(), worst));
    }
    let mut v = summarize(&studies);
    v.passed &= passed;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    v.detail = format!("{}; max constant-pressure integrals {}; incompatible shear integral / ‖ℙ^tt ω‖² ≥ {lo:.3}", v.detail, pressure.join(", "));
    Ok(v)
}

fn c9_divergence_of_dual() -> Result<Verdict> {
    let mut all = Vec::new();
    for kappa in KAPPAS {
        for d in [2, 3] {
            all.extend(verify::run_probes(d, kappa, &grid_levels(d, 3), verify::divergence_of_dual_probes(SEED, 5))?);
        }
    }
    Ok(summarize(&all))
}

fn c10_direct_solve() -> Result<Verdict> {
    let t = Instant::now();
    let (a, b) = (2.0f64, 1.7f64);
    let k2 = a * a + b * b;
    let mut reports = Vec::new();
    let mut stats = Vec::new();
    for n in [17, 33] {
        let dm = dom(2, 0.0, n)?;
        // equilibrium stress of the manufactured Airy potential; on a flat
        // chart 𝐇σ is the double dual of Δ²χ
        let sigma = DoubleFormField::from_fn(&dm, 1, 1, |x, o| {
            let s12 = a * b * (a * x[0] + 0.3).cos() * (b * x[1]).sin();
            o.copy_from_slice(&[-b * b * sin_chi(x), s12, s12, -a * a * sin_chi(x)]);
        })?;
        let source = CurvatureSource::new(double_star(&DoubleFormField::scalar(&dm, |x| k2 * k2 * sin_chi(x))))?;
        let sol = elasticity::solve_stress_direct(&dm, &source, &TractionData::from_stress(&sigma)?)?;
        stats.push(sol.stats);
        reports.push(sol.report);
    }
    let secs = t.elapsed().as_secs_f64();
    let first = |r: &elasticity::StressReport| [r.divergence, r.source, r.normal_traction, r.shear_traction];
    let (c, f) = (first(&reports[0]), first(&reports[1]));
    let decreasing = c.iter().zip(&f).all(|(c, f)| f < c);
    let passed = stats[0].normal_residual <= 1e-8 && decreasing && secs < 180.0;
    Ok(Verdict {
        passed,
        detail: format!(
            "n=17 LSQ optimality {:.1e} (plain relative residual {:.1e}); first-order residuals n=17 {} -> n=33 {}; {secs:.0}s",
            stats[0].normal_residual,
            stats[0].relative_residual,
            sci(&c),
            sci(&f)
        ),
    })
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict>); 10] = [
        ("fiber algebra suite", c1_algebra),
        ("constant-curvature identity suite", c2_constant_curvature),
        ("H of the metric is -2Rm", c3_h_on_metric),
        ("H annihilates Lie derivatives of the metric", c4_lie_kernel),
        ("displacement reconstruction", c5_reconstruction),
        ("Killing kernel dimensions", c6_killing),
        ("Airy solver", c7_airy),
        ("traction compatibility", c8_traction),
        ("divergence of H* vanishes", c9_divergence_of_dual),
        ("direct stress solve smoke test", c10_direct_solve),
    ];
    // a filter argument, as passed by `cargo test <name>`, selects nothing
    // here unless it matches "acceptance"
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    assert!(refinement_passes(&[1.0, 0.25], MIN_RATE, ROUNDOFF_FLOOR));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict { passed: false, detail: format!("error: {e}") });
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::sync::Arc;

use super::*;
use crate::charts::Chart;
use crate::field::Domain;

fn dom(d: usize, kappa: f64, n: usize) -> Arc<Domain> {
    Domain::uniform(Chart::centered(d, kappa, 0.8).unwrap(), n).unwrap()
}

/// Residuals on nested grids and their successive log₂ ratios.
fn study(d: usize, kappa: f64, levels: &[usize], res: impl Fn(&Arc<Domain>) -> f64) -> (Vec<f64>, Vec<f64>) {
    let errs: Vec<f64> = levels.iter().map(|&n| res(&dom(d, kappa, n))).collect();
    let rates = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    (errs, rates)
}

fn assert_second_order(name: &str, d: usize, kappa: f64, res: impl Fn(&Arc<Domain>) -> f64) {
    let levels: &[usize] = if d == 2 { &[17, 33] } else { &[9, 17] };
    let (errs, rates) = study(d, kappa, levels, res);
    let ok = rates.iter().zip(&errs[1..]).all(|(r, e)| *r >= 1.8 || *e <= 1e-10);
    assert!(ok, "{name} d={d} κ={kappa}: errors {errs:?} rates {rates:?}");
}

#[test]
fn exterior_derivative_examples() {
    let dm = dom(2, 0.0, 9);
    let f = DoubleFormField::scalar(&dm, |x| x[0] * x[0]);
    let df = d_nabla(&f).unwrap();
    for n in 0..dm.nnodes() {
        let x = dm.grid.coords(n);
        assert!((df.node_slice(n)[0] - 2.0 * x[0]).abs() < 1e-12);
        assert!(df.node_slice(n)[1].abs() < 1e-12);
    }
    let c = DoubleFormField::scalar(&dm, |_| 3.0);
    assert!(d_nabla(&c).unwrap().max_abs() < 1e-12);
    let w = DoubleFormField::from_fn(&dm, 1, 0, |x, o| o[0] = x[0]).unwrap();
    let dw = delta_nabla(&w).unwrap();
    assert!(dw.data.iter().all(|v| (v + 1.0).abs() < 1e-12));
    assert!(matches!(delta_nabla(&c), Err(Error::DegreeUnderflow { .. })));
    let top = DoubleFormField::zeros(&dm, 2, 0).unwrap();
    assert!(matches!(d_nabla(&top), Err(Error::DegreeOverflow { .. })));
}

#[test]
fn metric_is_parallel() {
    for kappa in [-1.0, 1.0] {
        assert_second_order("d g", 2, kappa, |dm| d_nabla(&DoubleFormField::metric(dm)).unwrap().max_norm_core(core(dm.dim())));
        assert_second_order("∇g", 3, kappa, |dm| nabla(&DoubleFormField::metric(dm), 1).unwrap().max_norm_core(core(dm.dim())));
    }
}

#[test]
fn curvature_commutator_identities() {
    for kappa in [-1.0, 1.0] {
        for d in [2, 3] {
            for (k, m) in [(0, 1), (1, 0), (1, 1), (0, 2)] {
                if k + 1 > d || m + 1 > d {
                    continue;
                }
                // d d_V − d_V d = (m−k)κ g∧ψ
                assert_second_order("kappa3", d, kappa, |dm| {
                    let psi = DoubleFormField::random_smooth(dm, k, m, 11).unwrap();
                    let lhs = d_nabla(&d_nabla_v(&psi).unwrap()).unwrap().sub(&d_nabla_v(&d_nabla(&psi).unwrap()).unwrap()).unwrap();
                    let rhs = g_wedge(&psi).unwrap().scale((m as f64 - k as f64) * kappa);
                    lhs.sub(&rhs).unwrap().l2_norm_core(core(dm.dim()))
                });
            }
        }
    }
}

#[test]
fn d_squared_is_curvature() {
    for kappa in [-1.0, 1.0] {
        for (d, k, m) in [(2, 0, 1), (3, 1, 1), (3, 0, 2)] {
            assert_second_order("kappa1", d, kappa, |dm| {
                let psi = DoubleFormField::random_smooth(dm, k, m, 5).unwrap();
                let lhs = d_nabla(&d_nabla(&psi).unwrap()).unwrap();
                let rhs = g_wedge(&bianchi(&psi).unwrap()).unwrap().scale(-kappa);
                lhs.sub(&rhs).unwrap().l2_norm_core(core(dm.dim()))
            });
        }
    }
}

#[test]
fn curvature_term_on_symmetric_forms() {
    for d in [2, 3] {
        let dm = dom(d, 1.0, 7);
        let s = DoubleFormField::random_smooth_symmetric(&dm, 1, 3).unwrap();
        let r = d_g(&s).unwrap().add(&g_wedge(&s).unwrap()).unwrap();
        assert!(r.max_abs() < 1e-12 * s.max_abs().max(1.0));
        let g = DoubleFormField::metric(&dm);
        let r = d_g(&g).unwrap().add(&DoubleFormField::riemann(&dm).unwrap().scale(2.0)).unwrap();
        assert!(r.max_abs() < 1e-12);
        // D* = −κ Tr on (2,2)
        let p = DoubleFormField::random_smooth_symmetric(&dm, 2, 4).unwrap();
        let r = d_g_star(&p).unwrap().add(&trace_g(&p).unwrap()).unwrap();
        assert!(r.max_abs() < 1e-12 * p.max_abs().max(1.0), "{}", r.max_abs());
    }
}

#[test]
fn h_on_metric_is_minus_twice_curvature() {
    for kappa in [-1.0, 1.0] {
        for d in [2, 3] {
            assert_second_order("H g", d, kappa, |dm| {
                let hg = h_op(&DoubleFormField::metric(dm)).unwrap();
                hg.add(&DoubleFormField::riemann(dm).unwrap().scale(2.0)).unwrap().max_norm_core(core(dm.dim()))
            });
        }
    }
}

#[test]
fn transposition_rules_are_exact() {
    let dm = dom(3, -1.0, 7);
    let psi = DoubleFormField::random_smooth(&dm, 1, 2, 9).unwrap();
    let a = transpose(&h_op(&transpose(&psi)).unwrap());
    assert!(a.sub(&h_op(&psi).unwrap()).unwrap().max_abs() < 1e-12 * a.max_abs());
    let eta = DoubleFormField::random_smooth(&dm, 2, 1, 9).unwrap();
    let b = transpose(&h_star_op(&transpose(&eta)).unwrap());
    assert!(b.sub(&h_star_op(&eta).unwrap()).unwrap().max_abs() < 1e-12 * b.max_abs());
    let c = transpose(&f_op(&transpose(&eta)).unwrap());
    assert!(c.sub(&f_star_op(&eta).unwrap()).unwrap().max_abs() < 1e-12 * c.max_abs());
}

#[test]
fn curl_curl_in_the_plane() {
    let dm = dom(2, 0.0, 9);
    let s = DoubleFormField::from_fn(&dm, 1, 1, |x, o| o[0] = x[1] * x[1]).unwrap();
    let h = h_op(&s).unwrap();
    assert!(h.data.iter().all(|v| (v - 2.0).abs() < 1e-10), "{:?}", &h.data[..3]);
}

#[test]
fn projections_of_the_metric() {
    for d in [2, 3] {
        let dm = dom(d, 1.0, 5);
        let g = DoubleFormField::metric(&dm);
        for face in 0..2 * d {
            let nn = project_boundary(&g, face, Projection::NN).unwrap();
            assert!(nn.data.iter().all(|v| (v - 1.0).abs() < 1e-14));
            assert!(project_boundary(&g, face, Projection::NT).unwrap().data.iter().all(|v| *v == 0.0));
            let tt = project_boundary(&g, face, Projection::TT).unwrap();
            let lam = &dm.faces[face].patch.lam;
            for (i, l) in lam.iter().enumerate() {
                let v = &tt.data[i * (d - 1) * (d - 1)..(i + 1) * (d - 1) * (d - 1)];
                for p in 0..d - 1 {
                    assert!((v[p * d] - l * l).abs() < 1e-14);
                }
            }
        }
    }
    let flat = dom(2, 0.0, 5);
    let s = DoubleFormField::from_fn(&flat, 1, 1, |_, o| o[0] = 1.0).unwrap();
    assert!(project_boundary(&s, 1, Projection::NN).unwrap().data.iter().all(|v| *v == 1.0));
    assert!(project_boundary(&s, 1, Projection::TT).unwrap().data.iter().all(|v| *v == 0.0));
}

#[test]
fn projection_duality_relations() {
    for d in [2, 3, 4] {
        let dm = Domain::uniform(Chart::centered(d, -0.7, 0.8).unwrap(), 5).unwrap();
        for k in 0..=d {
            for m in 0..=d {
                let psi = DoubleFormField::random_smooth(&dm, k, m, (10 * k + m) as u64).unwrap();
                let st = hodge_star(&psi);
                let sv = hodge_star_v(&psi);
                let sign = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
                for face in 0..2 * d {
                    let pr = |f: &DoubleFormField, w| project_boundary(f, face, w).ok();
                    let check = |lhs: Option<BoundaryFieldAlias>, rhs: Option<BoundaryFieldAlias>, s: f64, what: &str| {
                        if let (Some(l), Some(r)) = (lhs, rhs) {
                            let diff = l.sub(&r.scale(s)).unwrap();
                            let mx = diff.data.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                            assert!(mx < 1e-12, "{what} d={d} k={k} m={m} face={face}: {mx}");
                        }
                    };
                    check(pr(&st, Projection::TT), pr(&psi, Projection::NT).map(|b| hodge_face(&b)), sign(d + 1), "tt*");
                    check(pr(&st, Projection::TN), pr(&psi, Projection::NN).map(|b| hodge_face(&b)), sign(d + 1), "tn*");
                    check(pr(&st, Projection::NT), pr(&psi, Projection::TT).map(|b| hodge_face(&b)), sign(d + k + 1), "nt*");
                    check(pr(&st, Projection::NN), pr(&psi, Projection::TN).map(|b| hodge_face(&b)), sign(d + k + 1), "nn*");
                    check(pr(&sv, Projection::TT), pr(&psi, Projection::TN).map(|b| hodge_face_v(&b)), sign(d + 1), "tt*V");
                    check(pr(&sv, Projection::NT), pr(&psi, Projection::NN).map(|b| hodge_face_v(&b)), sign(d + 1), "nt*V");
                    check(pr(&sv, Projection::TN), pr(&psi, Projection::TT).map(|b| hodge_face_v(&b)), sign(d + m + 1), "tn*V");
                    check(pr(&sv, Projection::NN), pr(&psi, Projection::NT).map(|b| hodge_face_v(&b)), sign(d + m + 1), "nn*V");
                }
            }
        }
    }
}

type BoundaryFieldAlias = crate::field::BoundaryField;

#[test]
fn lie_derivatives_of_the_metric_are_in_the_kernel() {
    for kappa in [-1.0, 1.0] {
        for d in [2, 3] {
            assert_second_order("H L_Y g", d, kappa, |dm| {
                let w = DoubleFormField::random_smooth(dm, 1, 0, 21).unwrap();
                let dv = d_nabla_v(&w).unwrap();
                let lie = dv.add(&transpose(&dv)).unwrap();
                h_op(&lie).unwrap().l2_norm_core(core(dm.dim()))
            });
        }
    }
}

/// Core region fraction: two coarse-grid layers.
fn core(d: usize) -> f64 {
    if d == 2 {
        0.125
    } else {
        0.25
    }
}

#[test]
fn divergence_identities() {
    for kappa in [-1.0, 1.0] {
        for (d, k, m) in [(2, 2, 1), (3, 2, 1), (3, 2, 2), (3, 3, 1)] {
            // δδψ = −κ Tr 𝔊_V ψ
            assert_second_order("kappa2", d, kappa, |dm| {
                let psi = DoubleFormField::random_smooth(dm, k, m, 8).unwrap();
                let lhs = delta_nabla(&delta_nabla(&psi).unwrap()).unwrap();
                let rhs = trace_g(&bianchi_v(&psi).unwrap()).unwrap().scale(-kappa);
                lhs.sub(&rhs).unwrap().l2_norm_core(core(dm.dim()))
            });
        }
        for (d, k, m) in [(2, 0, 1), (2, 1, 1), (3, 1, 1), (3, 0, 2), (3, 1, 2)] {
            // d δ_V − δ_V d = −(d−m−k)κ 𝔊ψ; on a (0,1) field this is the Ricci identity
            assert_second_order("kappa4", d, kappa, |dm| {
                let psi = DoubleFormField::random_smooth(dm, k, m, 9).unwrap();
                let lhs = d_nabla(&delta_nabla_v(&psi).unwrap()).unwrap().sub(&delta_nabla_v(&d_nabla(&psi).unwrap()).unwrap()).unwrap();
                let rhs = bianchi(&psi).unwrap().scale(-(d as f64 - m as f64 - k as f64) * kappa);
                lhs.sub(&rhs).unwrap().l2_norm_core(core(dm.dim()))
            });
        }
    }
}

#[test]
fn exactness_relations() {
    for kappa in [-1.0, 0.0, 1.0] {
        for d in [2, 3] {
            let c = core(d);
            assert_second_order("HH", d, kappa, |dm| {
                let f = DoubleFormField::random_smooth(dm, 0, 0, 1).unwrap();
                h_op(&h_op(&f).unwrap()).map(|r| r.l2_norm_core(c)).unwrap_or(0.0)
            });
            assert_second_order("FH", d, kappa, |dm| {
                let f = DoubleFormField::random_smooth(dm, 0, 0, 2).unwrap();
                f_op(&h_op(&f).unwrap()).unwrap().l2_norm_core(c)
            });
            assert_second_order("H F*sym", d, kappa, |dm| {
                let l = DoubleFormField::random_smooth(dm, 2, 0, 3).unwrap();
                h_op(&f_sym_star_op(&l).unwrap()).unwrap().l2_norm_core(c)
            });
            assert_second_order("H*H*", d, kappa, |dm| {
                let p = DoubleFormField::random_smooth_symmetric(dm, 2, 4).unwrap();
                h_star_op(&h_star_op(&p).unwrap()).unwrap().l2_norm_core(c)
            });
            assert_second_order("F H*", d, kappa, |dm| {
                let p = DoubleFormField::random_smooth_symmetric(dm, 2, 5).unwrap();
                f_op(&h_star_op(&p).unwrap()).map(|r| r.l2_norm_core(c)).unwrap_or(0.0)
            });
            assert_second_order("H* F*sym", d, kappa, |dm| {
                let l = DoubleFormField::random_smooth(dm, 2, 0, 6).unwrap();
                h_star_op(&f_sym_star_op(&l).unwrap()).unwrap().l2_norm_core(c)
            });
        }
    }
}

#[test]
fn divergence_of_dual_operator_vanishes() {
    for kappa in [-1.0, 0.0, 1.0] {
        for d in [2, 3] {
            assert_second_order("δ H*", d, kappa, |dm| {
                let p = DoubleFormField::random_smooth_symmetric(dm, 2, 12).unwrap();
                delta_nabla(&h_star_op(&p).unwrap()).unwrap().l2_norm_core(core(d))
            });
        }
    }
}

#[test]
fn bilaplacian_on_scalars_is_biharmonic() {
    let dm = dom(2, 0.0, 17);
    let f = DoubleFormField::scalar(&dm, |x| x[0].powi(4) + x[0] * x[0] * x[1] * x[1] - 3.0 * x[1].powi(3));
    let b = b_op(&f).unwrap();
    // Δ² of x⁴ + x²y² is 24 + 8
    for n in 0..dm.nnodes() {
        if dm.patch.depth(n) >= 4 {
            assert!((b.data[n] - 32.0).abs() < 1e-8, "{}", b.data[n]);
        }
    }
    assert_eq!(b_op(&DoubleFormField::zeros(&dm, 1, 1).unwrap()).unwrap().max_abs(), 0.0);
}

#[test]
fn quadrature_examples() {
    let unit = Domain::uniform(Chart::new(2, 0.0, vec![(0.0, 1.0); 2]).unwrap(), 9).unwrap();
    let one = DoubleFormField::scalar(&unit, |_| 1.0);
    assert!((l2_inner(&one, &one).unwrap() - 1.0).abs() < 1e-12);
    // ⟨1,1⟩ = ∫λ² dx converges to a fine-grid value
    let vol = |n| {
        let dm = dom(2, 1.0, n);
        let one = DoubleFormField::scalar(&dm, |_| 1.0);
        l2_inner(&one, &one).unwrap()
    };
    let reference = vol(1025);
    let (e1, e2) = ((vol(17) - reference).abs(), (vol(33) - reference).abs());
    assert!((e1 / e2).log2() > 1.9);
    let dm = dom(3, -1.0, 5);
    let a = DoubleFormField::random_smooth(&dm, 1, 2, 1).unwrap();
    let b = DoubleFormField::random_smooth(&dm, 1, 2, 2).unwrap();
    assert!((l2_inner(&a, &b).unwrap() - l2_inner(&b, &a).unwrap()).abs() < 1e-14);
}

#[test]
fn boundary_operators_vanish_on_constants() {
    let dm = dom(2, 0.0, 9);
    let c = DoubleFormField::scalar(&dm, |_| 2.0);
    for face in 0..4 {
        assert!(boundary_t(&c, face).unwrap().data.iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn traction_identities_of_divergence_free_fields() {
    // exact form: 𝔗*σ = −ℙ^tn δσ − δ₀τ and 𝔉σ = −ℙ^tt δ_V σ − dρ − ½Tr(𝔥₀∧τ),
    // with 𝔥₀ taken against the outward normal
    for kappa in [-1.0, 0.0, 1.0] {
        for d in [2, 3] {
            let levels: &[usize] = if d == 2 { &[17, 33] } else { &[9, 17] };
            let errs: Vec<(f64, f64)> = levels
                .iter()
                .map(|&n| {
                    let dm = dom(d, kappa, n);
                    let s = DoubleFormField::random_smooth_symmetric(&dm, 1, 77).unwrap();
                    let ds = delta_nabla(&s).unwrap();
                    let dsv = delta_nabla_v(&s).unwrap();
                    let mut worst = (0.0f64, 0.0f64);
                    for face in 0..2 * d {
                        let rho = project_boundary(&s, face, Projection::NN).unwrap();
                        let tau = project_boundary(&s, face, Projection::TN).unwrap();
                        let t1 = boundary_t_star(&s, face).unwrap();
                        let r1 = project_boundary(&ds, face, Projection::TN).unwrap().add(&delta_face(&tau).unwrap()).unwrap();
                        let e1 = t1.add(&r1).unwrap().max_norm_interior(1);
                        let h0 = second_fundamental_form_field(&dm, face).unwrap();
                        // 𝔥₀∧τ has no room on a curve
                        let tr = if d == 2 { d_face(&rho).unwrap().scale(0.0) } else { trace_face(&wedge_face(&h0, &tau).unwrap()).unwrap() };
                        let f1 = boundary_f(&s, face).unwrap();
                        let want = project_boundary(&dsv, face, Projection::TT)
                            .unwrap()
                            .add(&d_face(&rho).unwrap())
                            .unwrap()
                            .scale(-1.0)
                            .add(&tr.scale(-0.5))
                            .unwrap();
                        let e2 = f1.sub(&want).unwrap().max_norm_interior(1);
                        worst = (worst.0.max(e1), worst.1.max(e2));
                    }
                    worst
                })
                .collect();
            assert!(errs[1].0 < 1e-10, "𝔗* form d={d} κ={kappa}: {errs:?}");
            let rate = (errs[0].1 / errs[1].1).log2();
            assert!(rate > 0.9 || errs[1].1 < 1e-10, "𝔉 form d={d} κ={kappa}: {errs:?}");
        }
    }
}

#[test]
fn integration_by_parts_defect_decreases() {
    // corners of the box add terms that never refine away, so both fields
    // are tapered to vanish to second order along every corner and edge
    fn taper(f: DoubleFormField) -> DoubleFormField {
        let nc = f.ncomp();
        let mut out = f.clone();
        for n in 0..f.domain.nnodes() {
            let t: Vec<f64> = f.domain.grid.coords(n).iter().map(|v| v / 0.8).collect();
            let mut w = 1.0;
            for a in 0..t.len() {
                for b in a + 1..t.len() {
                    w *= (1.0 - t[a] * t[a]).powi(2) + (1.0 - t[b] * t[b]).powi(2);
                }
            }
            out.data[n * nc..(n + 1) * nc].iter_mut().for_each(|c| *c *= w);
        }
        out
    }
    for (kappa, d) in [(0.0, 2), (1.0, 2), (-1.0, 3)] {
        let levels: &[usize] = if d == 2 { &[33, 65] } else { &[17, 33] };
        for op in [IbpOperator::H, IbpOperator::F] {
            let errs: Vec<f64> = levels
                .iter()
                .map(|&n| {
                    let dm = dom(d, kappa, n);
                    let f = taper(DoubleFormField::random_smooth(&dm, 1, 1, 30).unwrap());
                    let g = match op {
                        IbpOperator::H => DoubleFormField::random_smooth(&dm, 2, 2, 31).unwrap(),
                        IbpOperator::F => DoubleFormField::random_smooth(&dm, 2, 0, 31).unwrap(),
                    };
                    ibp_residual(&f, &taper(g), op).unwrap()
                })
                .collect();
            assert!((errs[0] / errs[1]).log2() > 0.9, "{op:?} d={d} κ={kappa}: {errs:?}");
        }
    }
}

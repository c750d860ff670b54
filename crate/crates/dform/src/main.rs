use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use dform::charts::Chart;
use dform::config::RunConfig;
use dform::elasticity::{self, AiryBc, CurvatureSource, TractionData};
use dform::field::{core_fraction, BoundaryField, Domain, DoubleFormField};
use dform::saintvenant::{compatibility_residual, killing_basis, reconstruct_displacement};
use dform::verify::{self, grid_levels};
use dform::{io, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dform", version, about = "Double-form identity checks and linear elasticity solvers on constant-curvature charts")]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the fiber-algebra suite and the grid-refinement identity suite.
    Verify {
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        levels: Option<usize>,
        /// Half-width of the coordinate box; only used to validate the chart.
        #[arg(long)]
        half_width: Option<f64>,
    },
    /// Solve the 2D Airy problem and recover the stress.
    SolveAiry {
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(short = 'n', long, default_value_t = 33)]
        resolution: usize,
        /// Source field: a (2,2) curvature source or its scalar double dual.
        #[arg(long, conflicts_with = "default_source")]
        rhs: Option<PathBuf>,
        #[arg(long)]
        default_source: bool,
        /// Scalar field whose boundary values are the Dirichlet data.
        #[arg(long)]
        bc_value: Option<PathBuf>,
        /// Scalar field whose boundary values are the outward normal derivative.
        #[arg(long)]
        bc_normal: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["bc_value", "bc_normal"])]
        zero_bc: bool,
        /// Manufactured-solution refinement study instead of a single solve.
        #[arg(long, value_enum)]
        mms: Option<Mms>,
        /// Directory for chi.dff and sigma.dff.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Saint-Venant compatibility residual of a symmetric (1,1) field.
    CheckSv {
        sigma: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Least-squares displacement with the given metric perturbation.
    Reconstruct {
        sigma: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Numerical Killing fields of a chart.
    Killing {
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long)]
        dim: usize,
        #[arg(short = 'n', long)]
        resolution: usize,
    },
    /// Integrals of traction data against the Killing fields.
    TractionCheck {
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(short = 'n', long)]
        resolution: usize,
        /// JSON file {"faces": [{"rho": [..], "tau": [..]}, ..]}.
        #[arg(long, conflicts_with_all = ["rho", "stress"])]
        traction: Option<PathBuf>,
        /// Constant normal traction with zero shear.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "stress")]
        rho: Option<f64>,
        /// Take the traction of a stress field file.
        #[arg(long)]
        stress: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mms {
    Sin,
}

struct Outcome {
    result: Value,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("DFORM_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: DFORM_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let (name, args, out) = match &cli.cmd {
        Command::Verify { kappa, dim, levels, half_width } => {
            if let Some(l) = levels {
                cfg.levels = *l;
            }
            if let Some(h) = half_width {
                cfg.half_width = *h;
            }
            cfg.validate()?;
            ("verify", json!({"kappa": kappa, "dim": dim}), cmd_verify(&cfg, *kappa, *dim)?)
        }
        Command::SolveAiry { kappa, resolution, rhs, default_source, bc_value, bc_normal, zero_bc, mms, out } => {
            cfg.validate()?;
            let args = json!({"kappa": kappa, "resolution": resolution, "rhs": rhs, "default_source": default_source,
                "bc_value": bc_value, "bc_normal": bc_normal, "zero_bc": zero_bc, "mms": mms.map(|_| "sin"), "out": out});
            let o = if mms.is_some() {
                cmd_airy_mms(&cfg, *kappa)?
            } else {
                cmd_solve_airy(&cfg, *kappa, *resolution, rhs.as_deref(), bc_value.as_deref(), bc_normal.as_deref(), out.as_deref())?
            };
            ("solve-airy", args, o)
        }
        Command::CheckSv { sigma, tol } => {
            if let Some(t) = tol {
                cfg.sv_tol = *t;
            }
            cfg.validate()?;
            ("check-sv", json!({"sigma": sigma}), cmd_check_sv(&cfg, sigma)?)
        }
        Command::Reconstruct { sigma, out } => {
            cfg.validate()?;
            ("reconstruct", json!({"sigma": sigma, "out": out}), cmd_reconstruct(&cfg, sigma, out)?)
        }
        Command::Killing { kappa, dim, resolution } => {
            cfg.validate()?;
            ("killing", json!({"kappa": kappa, "dim": dim, "resolution": resolution}), cmd_killing(&cfg, *kappa, *dim, *resolution)?)
        }
        Command::TractionCheck { kappa, dim, resolution, traction, rho, stress } => {
            cfg.validate()?;
            let args = json!({"kappa": kappa, "dim": dim, "resolution": resolution, "traction": traction, "rho": rho, "stress": stress});
            ("traction-check", args, cmd_traction_check(&cfg, *kappa, *dim, *resolution, traction.as_deref(), *rho, stress.as_deref())?)
        }
    };
    let report = json!({"command": name, "args": args, "config": cfg, "passed": out.passed, "result": out.result});
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::InvalidValue(e.to_string()))?;
    println!("{text}");
    if let Some(p) = &cli.report {
        io::write_atomic(p, text.as_bytes())?;
    }
    Ok(if out.passed { 0 } else { 1 })
}

fn domain(cfg: &RunConfig, dim: usize, kappa: f64, n: usize) -> Result<Arc<Domain>> {
    if n < 5 {
        return Err(Error::InvalidValue(format!("resolution must be at least 5, got {n}")));
    }
    Domain::uniform(Chart::centered(dim, kappa, cfg.half_width)?, n)
}

fn cmd_verify(cfg: &RunConfig, kappa: f64, dim: usize) -> Result<Outcome> {
    if !(2..=3).contains(&dim) {
        // still validate the chart so an impossible box is reported as such
        Chart::centered(dim, kappa, cfg.half_width)?;
        return Err(Error::InvalidValue(format!("verify supports dim 2 or 3, got {dim}")));
    }
    Chart::centered(dim, kappa, cfg.half_width)?;
    let algebra = verify::algebra_suite(cfg.seed, cfg.algebra_checks)?;
    let algebra_ok = algebra.max_scaled_residual <= cfg.algebra_tol;
    let mut calc = verify::calculus_suite(dim, kappa, &grid_levels(dim, cfg.levels), cfg.seed)?;
    for r in &mut calc.results {
        r.judge(cfg.min_rate, cfg.roundoff_floor);
    }
    let mut failures: Vec<String> = if algebra_ok { Vec::new() } else { algebra.failures.clone() };
    failures.extend(calc.failures());
    Ok(Outcome {
        passed: failures.is_empty(),
        result: json!({"algebra": algebra, "calculus": calc, "failures": failures}),
    })
}

fn scalar_boundary_source(path: Option<&Path>, dm: &Arc<Domain>) -> Result<DoubleFormField> {
    match path {
        None => Ok(DoubleFormField::scalar(dm, |_| 0.0)),
        Some(p) => {
            let f = io::read_field(p)?;
            if !f.domain.same_as(dm) || (f.k, f.m) != (0, 0) {
                return Err(Error::InvalidValue(format!("{} must be a scalar field on the solve grid", p.display())));
            }
            Ok(f)
        }
    }
}

fn cmd_solve_airy(
    cfg: &RunConfig,
    kappa: f64,
    n: usize,
    rhs: Option<&Path>,
    bc_value: Option<&Path>,
    bc_normal: Option<&Path>,
    out: Option<&Path>,
) -> Result<Outcome> {
    let dm = domain(cfg, 2, kappa, n)?;
    let (rhs_field, source) = match rhs {
        None => (elasticity::airy_rhs(&dm, None)?, Some(CurvatureSource::default_for(&dm)?)),
        Some(p) => {
            let f = io::read_field(p)?;
            if !f.domain.same_as(&dm) {
                return Err(Error::DomainMismatch);
            }
            match (f.k, f.m) {
                (2, 2) => {
                    let s = CurvatureSource::new(f)?;
                    (elasticity::airy_rhs(&dm, Some(&s))?, Some(s))
                }
                (0, 0) => (f, None),
                (k, m) => return Err(Error::DegreeMismatch(k, m, 2, 2)),
            }
        }
    };
    let bc = AiryBc { value: scalar_boundary_source(bc_value, &dm)?, normal: scalar_boundary_source(bc_normal, &dm)? };
    let (chi, stats) = elasticity::airy_solve(&dm, &rhs_field, &bc)?;
    let sigma = elasticity::stress_from_airy(&chi)?;
    let residuals = match &source {
        Some(s) => Some(elasticity::stress_residuals(&sigma, s, &TractionData::from_stress(&sigma)?)?),
        None => None,
    };
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.output_dir.as_ref().map(PathBuf::from));
    if let Some(dir) = &dir {
        std::fs::create_dir_all(dir)?;
        io::write_field(&dir.join("chi.dff"), &chi)?;
        io::write_field(&dir.join("sigma.dff"), &sigma)?;
    }
    let rhs_range = rhs_field.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(Outcome {
        passed: true,
        result: json!({
            "rhs_min": rhs_range.0, "rhs_max": rhs_range.1,
            "chi_max_abs": chi.max_abs(),
            "solver": stats,
            "divergence": dform::calculus::delta_nabla(&sigma)?.l2_norm_core(core_fraction(2)),
            "residuals": residuals,
            "written": dir,
        }),
    })
}

fn cmd_airy_mms(cfg: &RunConfig, kappa: f64) -> Result<Outcome> {
    let grids = grid_levels(2, cfg.levels);
    let mut errors = Vec::new();
    let mut divergence = Vec::new();
    for &n in &grids {
        let dm = domain(cfg, 2, kappa, n)?;
        let (rhs, bc, exact) = elasticity::manufactured_sin(&dm)?;
        let (chi, _) = elasticity::airy_solve(&dm, &rhs, &bc)?;
        errors.push(chi.sub(&exact)?.l2_norm());
        let sigma = elasticity::stress_from_airy(&chi)?;
        divergence.push(dform::calculus::delta_nabla(&sigma)?.l2_norm_core(core_fraction(2)));
    }
    let mut potential = verify::RefinementResult::new("airy_potential_error", "sin".into(), grids.clone(), errors);
    potential.judge(cfg.min_rate, cfg.roundoff_floor);
    let mut div = verify::RefinementResult::new("stress_divergence", "sin".into(), grids, divergence);
    div.judge(cfg.min_rate, cfg.roundoff_floor);
    Ok(Outcome { passed: potential.passed && div.passed, result: json!({"potential": potential, "divergence": div}) })
}

fn read_symmetric(path: &Path) -> Result<DoubleFormField> {
    let s = io::read_field(path)?;
    if (s.k, s.m) != (1, 1) {
        return Err(Error::DegreeMismatch(s.k, s.m, 1, 1));
    }
    let dev = s.asymmetry();
    if dev > 1e-10 * (1.0 + s.max_abs()) {
        return Err(Error::NotSymmetric(dev));
    }
    Ok(s)
}

fn cmd_check_sv(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let s = read_symmetric(path)?;
    let r = compatibility_residual(&s)?;
    Ok(Outcome { passed: r.l2 <= cfg.sv_tol, result: json!({"l2": r.l2, "max": r.max, "tol": cfg.sv_tol}) })
}

fn cmd_reconstruct(cfg: &RunConfig, path: &Path, out: &Path) -> Result<Outcome> {
    let s = read_symmetric(path)?;
    let kb = killing_basis(&s.domain, cfg.kill_tol)?;
    let rec = reconstruct_displacement(&s, Some(&kb), cfg.lsqr_tol)?;
    io::write_field(out, &rec.y.form)?;
    Ok(Outcome {
        passed: true,
        result: json!({"residual": rec.residual, "solver": rec.stats, "killing_dim": kb.dim(), "written": out}),
    })
}

fn cmd_killing(cfg: &RunConfig, kappa: f64, dim: usize, n: usize) -> Result<Outcome> {
    let dm = domain(cfg, dim, kappa, n)?;
    let kb = killing_basis(&dm, cfg.kill_tol)?;
    let expected = dim * (dim + 1) / 2;
    Ok(Outcome {
        passed: kb.dim() == expected,
        result: json!({
            "killing_dim": kb.dim(),
            "expected_dim": expected,
            "singular_values": kb.singular_values,
            "largest_singular_value": kb.largest_singular_value,
            "gap_ratio": kb.gap_ratio,
            "kill_tol": kb.kill_tol,
        }),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TractionFile {
    faces: Vec<FaceTraction>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceTraction {
    rho: Vec<f64>,
    tau: Vec<f64>,
}

fn load_traction(path: &Path, dm: &Arc<Domain>) -> Result<TractionData> {
    let file: TractionFile = serde_json::from_slice(&std::fs::read(path)?).map_err(|e| Error::Format(format!("traction: {e}")))?;
    if file.faces.len() != dm.faces.len() {
        return Err(Error::InvalidValue(format!("traction file has {} faces, grid has {}", file.faces.len(), dm.faces.len())));
    }
    let mut t = TractionData::zeros(dm)?;
    for (f, ft) in file.faces.into_iter().enumerate() {
        let fill = |b: &mut BoundaryField, v: Vec<f64>| {
            if v.len() != b.data.len() {
                return Err(Error::InvalidValue(format!("face {f}: expected {} values, got {}", b.data.len(), v.len())));
            }
            b.data = v;
            Ok(())
        };
        fill(&mut t.rho[f], ft.rho)?;
        fill(&mut t.tau[f], ft.tau)?;
    }
    t.validate(dm)?;
    Ok(t)
}

fn cmd_traction_check(
    cfg: &RunConfig,
    kappa: f64,
    dim: usize,
    n: usize,
    traction: Option<&Path>,
    rho: Option<f64>,
    stress: Option<&Path>,
) -> Result<Outcome> {
    let dm = domain(cfg, dim, kappa, n)?;
    let t = match (traction, rho, stress) {
        (Some(p), _, _) => load_traction(p, &dm)?,
        (_, _, Some(p)) => {
            let s = read_symmetric(p)?;
            if !s.domain.same_as(&dm) {
                return Err(Error::DomainMismatch);
            }
            TractionData::from_stress(&s)?
        }
        (_, Some(c), _) => TractionData::constant_normal(&dm, c)?,
        _ => return Err(Error::InvalidValue("one of --traction, --rho or --stress is required".into())),
    };
    let kb = killing_basis(&dm, cfg.kill_tol)?;
    let integrals = elasticity::traction_compatibility(&t, &kb)?;
    let worst = integrals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(Outcome {
        passed: worst <= cfg.traction_tol,
        result: json!({"integrals": integrals, "max_abs": worst, "tol": cfg.traction_tol, "killing_dim": kb.dim()}),
    })
}

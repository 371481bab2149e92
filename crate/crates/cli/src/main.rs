//! Command-line front end: model selection, point evaluation, identity
//! suite runs, algebra reports, and catalog listing.
//!
//! Exit codes: 0 when every executed check passed, 1 when a check failed,
//! 2 for usage or input errors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bismut_core::catalog::{self, HermitianModel};
use bismut_core::connection::{
    covariant_torsion_derivatives, curvature_pack, ConnectionPack,
};
use bismut_core::forms::{Form, FormMatrix};
use bismut_core::jets::{format_c64, ChartPoint, C64};
use bismut_core::suite::{self, SuiteConfig};
use bismut_core::{lie, Error};

#[derive(Parser)]
#[command(name = "bismut", version, about = "Hermitian metrics: connections, torsion, curvature, and identity verification at chart points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run identity checks over seeded points of a model.
    Verify(VerifyArgs),
    /// Print connection and curvature data at a single chart point.
    Eval(EvalArgs),
    /// Lie-algebra reports: integrability, algebraic flatness, exp charts.
    Lie(LieArgs),
    /// List built-in models, checks, and algebras.
    List,
}

#[derive(Args)]
struct VerifyArgs {
    /// Built-in model reference, e.g. `hopf`, `hopf:c=2`, `boothby:f=z2,h=0`.
    #[arg(long, conflicts_with = "spec")]
    model: Option<String>,
    /// Model-spec file (declarative text format).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated check ids; defaults to every applicable check.
    #[arg(long)]
    suite: Option<String>,
    /// Number of sampled points.
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Sampling seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Tolerance overrides `check-id=value`; repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate points sequentially instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, conflicts_with = "spec")]
    model: Option<String>,
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Chart point as comma-separated complex literals, e.g. `1,0` or `0.5+0.2i,1-i`.
    #[arg(long)]
    at: String,
    /// Quantities to print: metric,torsion,eta,theta,theta1,theta2,thetaB,
    /// curvature:{chern|riem|bismut},covderiv:{chern|bismut}
    #[arg(long, default_value = "metric,torsion,eta")]
    show: String,
}

#[derive(Args)]
struct LieArgs {
    /// Algebra name: su2, su2+r, su2+r3, su2+su2, su2+su2+r2, r2, r4, r6.
    #[arg(long)]
    algebra: String,
    /// Structure id, e.g. central, central-ce, split, mixed:a=0.6,b=0.8.
    #[arg(long)]
    structure: Option<String>,
    #[command(subcommand)]
    action: LieAction,
}

#[derive(Subcommand)]
enum LieAction {
    /// Integrability and polarization-subalgebra residuals of a structure.
    CheckIntegrability,
    /// Algebraic flatness report in the invariant frame.
    CheckBismut,
    /// Numerical cross-validation through the exponential chart.
    ExpChartVerify {
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Lie(args) => cmd_lie(args),
        Command::List => {
            cmd_list();
            Ok(true)
        }
    }
}

fn load_model(model: &Option<String>, spec: &Option<PathBuf>) -> Result<HermitianModel, Error> {
    match (model, spec) {
        (Some(m), None) => catalog::parse_model_ref(m),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidModel(format!("cannot read {}: {e}", path.display()))
            })?;
            catalog::parse_spec_file(&text)
        }
        _ => Err(Error::InvalidModel("exactly one of --model or --spec is required".into())),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, Error> {
    let model = load_model(&args.model, &args.spec)?;
    let checks = match &args.suite {
        None => suite::default_checks(&model),
        Some(list) => {
            let ids: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            suite::resolve_checks(&model, &ids)?
        }
    };
    let mut tol_overrides = BTreeMap::new();
    for entry in &args.tol {
        let (id, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::InvalidModel(format!("--tol expects id=value, got `{entry}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::InvalidModel(format!("bad tolerance value `{value}`")))?;
        tol_overrides.insert(id.trim().to_string(), value);
    }
    let cfg = SuiteConfig {
        seed: args.seed,
        points: args.points,
        tol_overrides,
        exec: if args.sequential {
            bismut_core::exec::ExecMode::Sequential
        } else {
            bismut_core::exec::ExecMode::Parallel
        },
    };
    let report = suite::run_suite(&model, &checks, &cfg)?;

    println!("model={} seed={} points={}", report.model, report.seed, report.points);
    for check in &report.checks {
        println!(
            "{:34} {:>12.3e}  {}",
            check.id,
            check.residual,
            if check.pass { "PASS" } else { "FAIL" }
        );
    }
    eprintln!("wall time: {} ms", report.wall_time.as_millis());
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_json()).map_err(|e| {
            Error::InvalidModel(format!("cannot write {}: {e}", out.display()))
        })?;
        println!("report written to {}", out.display());
    }
    Ok(report.all_passed())
}

fn parse_complex(text: &str) -> Result<C64, Error> {
    let t = text.trim().replace(' ', "");
    let bad = || Error::InvalidModel(format!("cannot parse complex literal `{text}`"));
    if t.is_empty() {
        return Err(bad());
    }
    // forms: a, bi, a+bi, a-bi (with optional signs and bare `i`)
    let parse_part = |s: &str| -> Result<f64, Error> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            other => other.parse::<f64>().map_err(|_| bad()),
        }
    };
    if let Some(imag_text) = t.strip_suffix('i') {
        // locate the split between real and imaginary parts: the last +/-
        // that is not part of an exponent and not the leading sign
        let bytes = imag_text.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let b = bytes[idx];
            if (b == b'+' || b == b'-') && bytes[idx - 1] != b'e' && bytes[idx - 1] != b'E' {
                split = Some(idx);
                break;
            }
        }
        match split {
            Some(idx) => {
                let re: f64 = imag_text[..idx].parse().map_err(|_| bad())?;
                let im = parse_part(&imag_text[idx..])?;
                Ok(C64::new(re, im))
            }
            None => Ok(C64::new(0.0, parse_part(imag_text)?)),
        }
    } else {
        Ok(C64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0))
    }
}

fn parse_point(text: &str, dim: usize) -> Result<ChartPoint, Error> {
    let coords: Result<Vec<C64>, Error> = text.split(',').map(parse_complex).collect();
    let coords = coords?;
    if coords.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, model needs {dim}",
            coords.len()
        )));
    }
    ChartPoint::new(coords)
}

/// Renders a one- or two-form over the coordinate covectors.
fn form_to_string(f: &Form, n: usize) -> String {
    let slot_name = |s: usize| {
        if s < n {
            format!("dz{}", s + 1)
        } else {
            format!("dz\u{0304}{}", s + 1 - n)
        }
    };
    let mut parts = Vec::new();
    for (mask, coeff) in f.terms() {
        let value = coeff.value();
        if value.norm() < 1e-13 {
            continue;
        }
        let mut slots = Vec::new();
        let mut rest = *mask;
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            slots.push(slot_name(s));
        }
        parts.push(format!("({})*{}", format_c64(value), slots.join("^")));
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

fn print_form_matrix(label: &str, m: &FormMatrix, n: usize) {
    for r in 0..m.rows {
        for c in 0..m.cols {
            println!("{label}[{}][{}] = {}", r + 1, c + 1, form_to_string(m.at(r, c), n));
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<bool, Error> {
    let model = load_model(&args.model, &args.spec)?;
    let point = parse_point(&args.at, model.dim)?;
    let pack = ConnectionPack::new(model.coframe.as_ref(), &point, 2)?;
    let n = model.dim;
    println!("model={} point={point}", model.name);
    for what in args.show.split(',').map(str::trim) {
        match what {
            "metric" => {
                let g = pack.frame.metric_values();
                for a in 0..n {
                    let row: Vec<String> = (0..n).map(|b| format_c64(g[a * n + b])).collect();
                    println!("g[{}] = [{}]", a + 1, row.join(", "));
                }
            }
            "torsion" => {
                for k in 0..n {
                    for i in 0..n {
                        for j in i + 1..n {
                            println!(
                                "T^{}_{}{} = {}",
                                k + 1,
                                i + 1,
                                j + 1,
                                format_c64(pack.torsion.value(k, i, j))
                            );
                        }
                    }
                }
                println!("|T|^2 = {}", pack.torsion.norm_sq());
            }
            "eta" => {
                for (j, v) in pack.eta.iter().enumerate() {
                    println!("eta_{} = {}", j + 1, format_c64(v.value()));
                }
            }
            "theta" => print_form_matrix("theta", &pack.theta, n),
            "theta1" => print_form_matrix("theta1", &pack.theta1, n),
            "theta2" => print_form_matrix("theta2", &pack.theta2, n),
            "thetaB" => print_form_matrix("thetaB", &pack.theta_b, n),
            "curvature:chern" | "curvature:riem" | "curvature:bismut" => {
                let curv = curvature_pack(&pack)?;
                match what {
                    "curvature:chern" => print_form_matrix("Theta", &curv.chern, n),
                    "curvature:riem" => {
                        print_form_matrix("Theta1", &curv.riem1, n);
                        print_form_matrix("Theta2", &curv.riem2, n);
                    }
                    _ => print_form_matrix("ThetaB", &curv.bismut, n),
                }
            }
            "covderiv:chern" | "covderiv:bismut" => {
                let conn = if what.ends_with("chern") { &pack.theta } else { &pack.theta_b };
                let d = covariant_torsion_derivatives(&pack, conn)?;
                let w = 2 * n;
                let mut any = false;
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            for a in 0..w {
                                let v = d[((k * n + i) * n + j) * w + a];
                                if v.norm() < 1e-12 {
                                    continue;
                                }
                                any = true;
                                let dir = if a < n {
                                    format!("{}", a + 1)
                                } else {
                                    format!("{}\u{0304}", a - n + 1)
                                };
                                println!(
                                    "T^{}_{}{},{dir} = {}",
                                    k + 1,
                                    i + 1,
                                    j + 1,
                                    format_c64(v)
                                );
                            }
                        }
                    }
                }
                if !any {
                    println!("all covariant torsion derivatives vanish (|.| < 1e-12)");
                }
            }
            other => {
                return Err(Error::Unknown { kind: "quantity", name: other.to_string() });
            }
        }
    }
    Ok(true)
}

fn cmd_lie(args: LieArgs) -> Result<bool, Error> {
    let alg = lie::algebra_by_name(&args.algebra)?;
    let need_structure = || -> Result<lie::OrthogonalComplexStructure, Error> {
        let name = args
            .structure
            .as_deref()
            .ok_or_else(|| Error::InvalidStructure("--structure is required".into()))?;
        lie::structure_by_name(&alg, name)
    };
    match args.action {
        LieAction::CheckIntegrability => {
            let j = need_structure()?;
            let integrability = lie::check_integrability(&alg, &j);
            let conditions = lie::samelson_conditions(&alg, &j);
            println!("algebra={} structure={}", alg.name, args.structure.as_deref().unwrap_or("-"));
            println!("eq-23 integrability residual   = {integrability:.3e}");
            println!("J^2 + I defect                 = {:.3e}", j.square_defect());
            println!("metric compatibility defect    = {:.3e}", j.orthogonality_defect(&alg));
            println!("polarization isotropy          = {:.3e}", conditions.isotropy);
            println!("polarization closure           = {:.3e}", conditions.closure);
            println!("spans complexification         = {}", conditions.spans);
            println!("meets real algebra trivially   = {}", conditions.trivial_real_intersection);
            let pass = integrability < 1e-10
                && conditions.isotropy < 1e-10
                && conditions.spans
                && conditions.trivial_real_intersection;
            println!("{}", if pass { "PASS" } else { "FAIL" });
            Ok(pass)
        }
        LieAction::CheckBismut => {
            let j = need_structure()?;
            let report = lie::algebraic_bismut_check(&alg, &j)?;
            println!("algebra={} structure={}", alg.name, args.structure.as_deref().unwrap_or("-"));
            println!("eq-39 ad-skew residual         = {:.3e}", report.ad_skew);
            println!("eq-23 integrability residual   = {:.3e}", report.integrability);
            println!("torsion vs structure constants = {:.3e}", report.torsion_vs_structure);
            println!("Bismut connection coefficients = {:.3e}", report.bismut_connection);
            println!("eq-33 torsion Jacobi           = {:.3e}", report.torsion_jacobi);
            println!("eq-35 right side               = {:.3e}", report.conjugate_rhs);
            println!("|T|^2                          = {}", report.torsion_norm_sq);
            let pass = report.max_residual() < 1e-12;
            println!("{}", if pass { "PASS" } else { "FAIL" });
            Ok(pass)
        }
        LieAction::ExpChartVerify { radius, k, points, seed } => {
            let j = need_structure()?;
            let label = args.structure.as_deref().unwrap_or("-");
            let model = lie::exp_chart_model(&alg, &j, label, k, radius, 1e-9)?;
            if !model.flags.bismut_flat {
                return Err(Error::InvalidStructure(
                    "structure is not integrable on a bi-invariant algebra; nothing to verify".into(),
                ));
            }
            // worst truncation bound over the sampled ball
            let sample = model.sample_points(seed, points)?;
            let cf = lie::exp_chart_coframe(&alg, &j, k, 1e-9)?;
            let max_bound = sample
                .iter()
                .map(|p| cf.truncation_bound(p))
                .fold(0.0f64, f64::max);
            let checks = suite::resolve_checks(&model, &["bismut-curvature-zero".into()])?;
            let mut cfg = SuiteConfig { seed, points, ..Default::default() };
            cfg.tol_overrides.insert("bismut-curvature-zero".into(), 1e-6);
            let report = suite::run_suite(&model, &checks, &cfg)?;
            println!("model={} seed={seed} points={points}", report.model);
            println!("max truncation bound           = {max_bound:.3e}");
            for check in &report.checks {
                println!(
                    "{:34} {:>12.3e}  {}",
                    check.id,
                    check.residual,
                    if check.pass { "PASS" } else { "FAIL" }
                );
            }
            Ok(report.all_passed())
        }
    }
}

fn cmd_list() {
    println!("models:");
    for name in catalog::builtin_names() {
        println!("  {name}");
    }
    println!("\nchecks:");
    for check in suite::registry() {
        println!("  {:34} tol {:<8.1e} {}", check.id, check.tolerance, check.description);
    }
    println!("\nalgebras: su2, su2+r, su2+r3, su2+su2, su2+su2+r2, r2, r4, r6");
    println!("structures: su2+r: central|anti; su2+su2: central-ce|factor-swap;");
    println!("            su2+r3: split|split-flat; su2+su2+r2: mixed:a=A,b=B");
}

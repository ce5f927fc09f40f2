//! Command line driver: mesh generation and inspection, single ground-state
//! solves, certification, and uniform/adaptive studies with CSV output.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use gpcert::certify::{eta, residual_indicators, solve_dual};
use gpcert::fem::rt::RtOrder;
use gpcert::gpe::scf_solve;
use gpcert::mesh::{refine_red, TriangleMesh};
use gpcert::study::{run_adaptive, run_uniform, StudyConfig, StudyMode};
use gpcert::DomainPreset;

#[derive(Parser)]
#[command(
    name = "gpcert",
    about = "Gross-Pitaevskii ground states with computable error certificates",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, refine or inspect a triangle mesh (plain-text format).
    Mesh(MeshArgs),
    /// Solve one ground state and print λ_h and E_h.
    Solve(SolveArgs),
    /// Solve, reconstruct the dual flux, and print η with the lower bounds.
    Certify(CertifyArgs),
    /// Uniform red-refinement study; writes the CSV table.
    Study(StudyArgs),
    /// Adaptive bisection study; writes the CSV table.
    Adapt(StudyArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// Read an existing mesh instead of generating one.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["domain", "n"])]
    input: Option<PathBuf>,
    /// Domain preset (unit_square or l_shape).
    #[arg(long, default_value = "unit_square")]
    domain: DomainPreset,
    /// Subdivisions per unit side.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Apply this many uniform red refinements.
    #[arg(long, default_value_t = 0)]
    red: usize,
    /// Write the mesh in the plain-text format.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Print vertex/edge/triangle counts, mesh size and area.
    #[arg(long)]
    info: bool,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// TOML config file; explicit flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<DomainPreset>,
    /// Initial subdivisions per unit side.
    #[arg(long)]
    n0: Option<usize>,
    /// Interaction strength ζ >= 0.
    #[arg(long)]
    zeta: Option<f64>,
    /// Trap curvature γ₁.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Trap curvature γ₂.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Switch the trap potential off (W ≡ 0).
    #[arg(long)]
    zero_potential: bool,
    /// SCF tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// SCF iteration budget.
    #[arg(long)]
    max_iter: Option<usize>,
    /// SCF damping β in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Raviart-Thomas order of the dual solve (0 or 1).
    #[arg(long)]
    rt_order: Option<u8>,
    /// Dump per-element residual indicators as `element_index value` lines.
    #[arg(long, value_name = "PATH")]
    indicators: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Mesh levels (uniform) or iterations (adaptive).
    #[arg(long)]
    levels: Option<usize>,
    /// Raviart-Thomas order of the dual solve (0 or 1).
    #[arg(long)]
    rt_order: Option<u8>,
    /// Dörfler bulk parameter in (0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// CSV output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Skip the reference solves (leaves err_a/effectivity blank).
    #[arg(long)]
    no_reference: bool,
    /// Zero the wall-clock column for byte-reproducible CSVs.
    #[arg(long)]
    deterministic: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Mesh(args) => mesh_command(args),
        Command::Solve(args) => solve_command(args),
        Command::Certify(args) => certify_command(args),
        Command::Study(args) => study_command(args, StudyMode::Uniform),
        Command::Adapt(args) => study_command(args, StudyMode::Adaptive),
    }
}

fn mesh_command(args: MeshArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut mesh = match &args.input {
        Some(path) => TriangleMesh::read_file(path)?,
        None => args.domain.mesh(args.n)?,
    };
    for _ in 0..args.red {
        mesh = refine_red(&mesh);
    }
    mesh.validate()?;
    if args.info {
        println!(
            "vertices {}  edges {}  triangles {}",
            mesh.num_vertices(),
            mesh.num_edges(),
            mesh.num_triangles()
        );
        println!("h = {:.6e}", mesh.mesh_size());
        println!("area = {:.12e}", mesh.total_area());
        println!("min angle = {:.4} rad", mesh.min_angle());
    }
    if let Some(path) = &args.out {
        mesh.write_file(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Merge a config file (or the defaults) with explicit flag overrides.
fn build_config(args: &ProblemArgs) -> Result<StudyConfig, Box<dyn std::error::Error>> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::from_toml_path(path)?,
        None => StudyConfig::default(),
    };
    if let Some(d) = args.domain {
        cfg.domain = d;
    }
    if let Some(n0) = args.n0 {
        cfg.n0 = n0;
    }
    if let Some(z) = args.zeta {
        cfg.zeta = z;
    }
    if let Some(g1) = args.gamma1 {
        cfg.gamma[0] = g1;
    }
    if let Some(g2) = args.gamma2 {
        cfg.gamma[1] = g2;
    }
    if args.zero_potential {
        cfg.zero_potential = true;
    }
    if let Some(tol) = args.tol {
        cfg.scf.tol = tol;
    }
    if let Some(mi) = args.max_iter {
        cfg.scf.max_iter = mi;
    }
    if let Some(b) = args.damping {
        cfg.scf.damping = b;
    }
    Ok(cfg)
}

fn solve_command(args: SolveArgs) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = build_config(&args.problem)?;
    cfg.validate()?;
    let problem = cfg.problem()?;
    let mesh = Arc::new(cfg.domain.mesh(cfg.n0)?);
    let state = scf_solve(&problem, &mesh, &cfg.scf)?;
    println!(
        "dofs     = {} interior / {} vertices",
        state.space.num_interior(),
        state.space.ndofs()
    );
    println!("scf iter = {}", state.scf_log.len());
    println!("lambda_h = {:.12e}", state.lambda_h);
    println!("E_h      = {:.12e}", state.energy_h);
    Ok(())
}

fn certify_command(args: CertifyArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = build_config(&args.problem)?;
    if let Some(p) = args.rt_order {
        cfg.rt_order = p;
    }
    cfg.validate()?;
    let problem = cfg.problem()?;
    let mesh = Arc::new(cfg.domain.mesh(cfg.n0)?);
    let state = scf_solve(&problem, &mesh, &cfg.scf)?;
    let order = RtOrder::from_index(cfg.rt_order as usize)?;
    let flux = solve_dual(&state, order)?;
    let cert = eta(&state, &flux)?;
    let indicators = residual_indicators(&state);
    println!("lambda_h = {:.12e}", state.lambda_h);
    println!("E_h      = {:.12e}", state.energy_h);
    println!("eta      = {:.12e}", cert.eta);
    println!("  residual term = {:.12e}", cert.term_residual);
    println!("  flux term     = {:.12e}", cert.term_flux);
    println!("lambda_L = {:.12e}", cert.lambda_low);
    println!("E_L      = {:.12e}", cert.energy_low);
    println!("eta_ad   = {:.12e}", indicators.global);
    if let Some(path) = &args.indicators {
        let mut text = String::new();
        for (k, v) in indicators.per_element.iter().enumerate() {
            text.push_str(&format!("{k} {v:.16e}\n"));
        }
        std::fs::write(path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn study_command(args: StudyArgs, mode: StudyMode) -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = build_config(&args.problem)?;
    cfg.mode = mode;
    if let Some(levels) = args.levels {
        cfg.levels = levels;
    }
    if let Some(p) = args.rt_order {
        cfg.rt_order = p;
    }
    if let Some(theta) = args.theta {
        cfg.theta = theta;
    }
    if args.no_reference {
        cfg.with_reference = false;
    }
    if args.deterministic {
        cfg.deterministic = true;
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.clone());
    } else if cfg.output_path.is_none() {
        cfg.output_path = Some(PathBuf::from(match mode {
            StudyMode::Uniform => "study.csv",
            StudyMode::Adaptive => "adapt.csv",
        }));
    }
    cfg.validate()?;

    let outcome = match mode {
        StudyMode::Uniform => run_uniform(&cfg)?,
        StudyMode::Adaptive => run_adaptive(&cfg)?,
    };
    if let Some(reference) = &outcome.reference {
        println!("lambda_ref = {:.12e}", reference.lambda_ref);
        println!("E_ref      = {:.12e}", reference.energy_ref);
    }
    for row in &outcome.rows {
        println!(
            "level {:>2}  h {:.4e}  ndof {:>8}  lambda_h {:.8e}  eta {:.4e}",
            row.level, row.h, row.ndof, row.lambda_h, row.eta
        );
    }
    if let Some(path) = &cfg.output_path {
        println!("wrote {}", path.display());
    }
    Ok(())
}

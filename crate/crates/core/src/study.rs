//! Experiment orchestration: uniform convergence studies, adaptive loops
//! with Dörfler marking, reference solutions by Richardson extrapolation,
//! and CSV reporting.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certify::{
    error_vs_reference_via, eta, residual_indicators, solve_dual, ResidualIndicators,
};
use crate::error::{Error, Result};
use crate::fem::rt::RtOrder;
use crate::gpe::{scf_solve_from, GpeProblem, GroundState, ScfOptions};
use crate::mesh::{refine_bisect, refine_red, DomainPreset, TriangleMesh};

/// Study configuration; every field has an Example-1 style default so a
/// config file may specify any subset of keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: DomainPreset,
    /// Initial subdivisions per unit side.
    pub n0: usize,
    /// Uniform: number of mesh levels. Adaptive: number of iterations.
    pub levels: usize,
    pub zeta: f64,
    pub gamma: [f64; 2],
    /// Test hook: switch the trap potential off (`W ≡ 0`).
    pub zero_potential: bool,
    /// Raviart-Thomas order of the dual solve (0 or 1).
    pub rt_order: u8,
    pub scf: ScfOptions,
    /// Dörfler bulk parameter in (0, 1].
    pub theta: f64,
    pub mode: StudyMode,
    /// CSV destination; `None` keeps results in memory only.
    pub output_path: Option<PathBuf>,
    /// Compute the reference solution (two extra red refinements) and fill
    /// the `err_a`/`effectivity` columns.
    pub with_reference: bool,
    /// Deterministic mode zeroes the wall-clock column so identical configs
    /// byte-reproduce their CSV.
    pub deterministic: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            domain: DomainPreset::UnitSquare,
            n0: 6,
            levels: 4,
            zeta: 1.0,
            gamma: [1.0, 1.0],
            zero_potential: false,
            rt_order: 1,
            scf: ScfOptions {
                tol: 1e-10,
                max_iter: 400,
                damping: 0.7,
            },
            theta: 0.5,
            mode: StudyMode::Uniform,
            output_path: None,
            with_reference: true,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Uniform,
    Adaptive,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: StudyConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::Config("levels must be >= 1".into()));
        }
        if self.n0 < 1 {
            return Err(Error::Config("n0 must be >= 1".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        RtOrder::from_index(self.rt_order as usize)?;
        self.problem()?;
        Ok(())
    }

    pub fn problem(&self) -> Result<GpeProblem> {
        if self.zero_potential {
            GpeProblem::with_zero_potential(self.domain, self.zeta)
        } else {
            GpeProblem::new(self.domain, self.gamma, self.zeta)
        }
    }

    fn order(&self) -> RtOrder {
        RtOrder::from_index(self.rt_order as usize).expect("validated")
    }
}

/// One line of a study table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    /// Interior P1 dof count (actual unknowns).
    pub ndof: usize,
    pub lambda_h: f64,
    pub energy_h: f64,
    pub eta: f64,
    pub lambda_low: f64,
    pub energy_low: f64,
    pub eta_ad: f64,
    /// Blank until the reference is computed.
    pub err_a: Option<f64>,
    pub effectivity: Option<f64>,
    pub wall_ms: f64,
}

/// Reference solution: Richardson-extrapolated eigenvalue and energy from
/// two further red refinements; `state` is the solve on the finest of them.
#[derive(Debug, Clone)]
pub struct Reference {
    pub lambda_ref: f64,
    pub energy_ref: f64,
    pub state: GroundState,
    /// The two reference meshes, coarser first.
    pub meshes: [Arc<TriangleMesh>; 2],
}

/// Outcome of a study run.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub reference: Option<Reference>,
    pub final_mesh: Arc<TriangleMesh>,
}

/// Uniform study: solve, certify and tabulate on a red-refinement ladder,
/// then (optionally) compute the reference and fill the error columns. On
/// failure the partial table is flushed to the CSV with an error row.
pub fn run_uniform(config: &StudyConfig) -> Result<StudyOutcome> {
    config.validate()?;
    if config.mode != StudyMode::Uniform {
        return Err(Error::Config("run_uniform requires mode = uniform".into()));
    }
    match run_uniform_inner(config) {
        Ok(outcome) => Ok(outcome),
        Err((rows, err)) => {
            flush_csv(config, &rows, Some(&err.to_string()))?;
            Err(err)
        }
    }
}

type Partial<T> = std::result::Result<T, (Vec<StudyRow>, Error)>;

fn run_uniform_inner(config: &StudyConfig) -> Partial<StudyOutcome> {
    let fail = |rows: &[StudyRow], e: Error| (rows.to_vec(), e);
    let problem = config.problem().map_err(|e| fail(&[], e))?;
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut meshes: Vec<Arc<TriangleMesh>> = Vec::new();
    let mut states: Vec<GroundState> = Vec::new();

    let mut mesh = Arc::new(
        config
            .domain
            .mesh(config.n0)
            .map_err(|e| fail(&rows, e))?,
    );
    for level in 1..=config.levels {
        if level > 1 {
            mesh = Arc::new(refine_red(&mesh));
        }
        let started = Instant::now();
        let guess = match states.last() {
            Some(prev) => Some(
                mesh.prolong_vertex_values(&prev.coeffs)
                    .map_err(|e| fail(&rows, e))?,
            ),
            None => None,
        };
        let state = scf_solve_from(&problem, &mesh, &config.scf, guess.as_deref())
            .map_err(|e| fail(&rows, e))?;
        let flux = solve_dual(&state, config.order()).map_err(|e| fail(&rows, e))?;
        let cert = eta(&state, &flux).map_err(|e| fail(&rows, e))?;
        let indicators = residual_indicators(&state);
        rows.push(StudyRow {
            level,
            h: mesh.mesh_size(),
            ndof: state.space.num_interior(),
            lambda_h: state.lambda_h,
            energy_h: state.energy_h,
            eta: cert.eta,
            lambda_low: cert.lambda_low,
            energy_low: cert.energy_low,
            eta_ad: indicators.global,
            err_a: None,
            effectivity: None,
            wall_ms: elapsed_ms(config, started),
        });
        meshes.push(mesh.clone());
        states.push(state);
    }

    let mut reference = None;
    if config.with_reference {
        let reference_data = compute_reference(config, &mesh, states.last())
            .map_err(|e| fail(&rows, e))?;
        fill_error_columns(&mut rows, &meshes, &states, &reference_data)
            .map_err(|e| fail(&rows, e))?;
        reference = Some(reference_data);
    }

    flush_csv(config, &rows, None).map_err(|e| fail(&rows, e))?;
    Ok(StudyOutcome {
        rows,
        reference,
        final_mesh: mesh,
    })
}

/// Adaptive study: solve, certify, mark with the Dörfler strategy and bisect
/// until the iteration budget is exhausted.
pub fn run_adaptive(config: &StudyConfig) -> Result<StudyOutcome> {
    config.validate()?;
    if config.mode != StudyMode::Adaptive {
        return Err(Error::Config("run_adaptive requires mode = adaptive".into()));
    }
    match run_adaptive_inner(config) {
        Ok(outcome) => Ok(outcome),
        Err((rows, err)) => {
            flush_csv(config, &rows, Some(&err.to_string()))?;
            Err(err)
        }
    }
}

fn run_adaptive_inner(config: &StudyConfig) -> Partial<StudyOutcome> {
    let fail = |rows: &[StudyRow], e: Error| (rows.to_vec(), e);
    let problem = config.problem().map_err(|e| fail(&[], e))?;
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut meshes: Vec<Arc<TriangleMesh>> = Vec::new();
    let mut states: Vec<GroundState> = Vec::new();

    let mut mesh = Arc::new(
        config
            .domain
            .mesh(config.n0)
            .map_err(|e| fail(&rows, e))?,
    );
    for iteration in 1..=config.levels {
        let started = Instant::now();
        let guess = match states.last() {
            Some(prev) => Some(
                mesh.prolong_vertex_values(&prev.coeffs)
                    .map_err(|e| fail(&rows, e))?,
            ),
            None => None,
        };
        let state = scf_solve_from(&problem, &mesh, &config.scf, guess.as_deref())
            .map_err(|e| fail(&rows, e))?;
        let flux = solve_dual(&state, config.order()).map_err(|e| fail(&rows, e))?;
        let cert = eta(&state, &flux).map_err(|e| fail(&rows, e))?;
        let indicators = residual_indicators(&state);
        rows.push(StudyRow {
            level: iteration,
            h: mesh.mesh_size(),
            ndof: state.space.num_interior(),
            lambda_h: state.lambda_h,
            energy_h: state.energy_h,
            eta: cert.eta,
            lambda_low: cert.lambda_low,
            energy_low: cert.energy_low,
            eta_ad: indicators.global,
            err_a: None,
            effectivity: None,
            wall_ms: elapsed_ms(config, started),
        });
        meshes.push(mesh.clone());
        states.push(state);

        if iteration < config.levels {
            let marked =
                dorfler_mark(&indicators, config.theta).map_err(|e| fail(&rows, e))?;
            mesh = Arc::new(refine_bisect(&mesh, &marked).map_err(|e| fail(&rows, e))?);
        }
    }

    let mut reference = None;
    if config.with_reference {
        let reference_data = compute_reference(config, &mesh, states.last())
            .map_err(|e| fail(&rows, e))?;
        fill_error_columns(&mut rows, &meshes, &states, &reference_data)
            .map_err(|e| fail(&rows, e))?;
        reference = Some(reference_data);
    }

    flush_csv(config, &rows, None).map_err(|e| fail(&rows, e))?;
    Ok(StudyOutcome {
        rows,
        reference,
        final_mesh: mesh,
    })
}

/// Minimal-cardinality greedy Dörfler set: the largest squared indicators
/// (ties broken toward lower element index) whose sum reaches
/// `theta · Σ η_h²(K)`.
pub fn dorfler_mark(indicators: &ResidualIndicators, theta: f64) -> Result<Vec<usize>> {
    if indicators.per_element.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot mark an empty indicator list".into(),
        ));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Dörfler parameter must lie in (0, 1], got {theta}"
        )));
    }
    let mut order: Vec<usize> = (0..indicators.per_element.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        let sa = indicators.per_element[a] * indicators.per_element[a];
        let sb = indicators.per_element[b] * indicators.per_element[b];
        sb.partial_cmp(&sa).expect("indicators are finite").then(a.cmp(&b))
    });
    // Total in the same summation order as the greedy scan, so theta = 1
    // marks exactly the nonzero indicators.
    let total: f64 = order
        .iter()
        .map(|&k| indicators.per_element[k] * indicators.per_element[k])
        .sum();
    let target = theta * total;
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for &k in &order {
        let sq = indicators.per_element[k] * indicators.per_element[k];
        if acc >= target || sq == 0.0 {
            break;
        }
        marked.push(k);
        acc += sq;
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Reference solve: two further red refinements of the finest mesh, warm
/// started, with order-2 Richardson extrapolation of the eigenvalue and
/// energy from the two solves.
pub fn compute_reference(
    config: &StudyConfig,
    finest_mesh: &Arc<TriangleMesh>,
    warm: Option<&GroundState>,
) -> Result<Reference> {
    let problem = config.problem()?;
    let mesh_mid = Arc::new(refine_red(finest_mesh));
    let guess = warm
        .map(|s| mesh_mid.prolong_vertex_values(&s.coeffs))
        .transpose()?;
    let state_mid = scf_solve_from(&problem, &mesh_mid, &config.scf, guess.as_deref())?;

    let mesh_fine = Arc::new(refine_red(&mesh_mid));
    let guess = mesh_fine.prolong_vertex_values(&state_mid.coeffs)?;
    let state_fine = scf_solve_from(&problem, &mesh_fine, &config.scf, Some(&guess))?;

    let lambda_ref = state_fine.lambda_h + (state_fine.lambda_h - state_mid.lambda_h) / 3.0;
    let energy_ref = state_fine.energy_h + (state_fine.energy_h - state_mid.energy_h) / 3.0;
    Ok(Reference {
        lambda_ref,
        energy_ref,
        state: state_fine,
        meshes: [mesh_mid, mesh_fine],
    })
}

fn fill_error_columns(
    rows: &mut [StudyRow],
    meshes: &[Arc<TriangleMesh>],
    states: &[GroundState],
    reference: &Reference,
) -> Result<()> {
    for (k, state) in states.iter().enumerate() {
        let mut chain: Vec<Arc<TriangleMesh>> = meshes[k + 1..].to_vec();
        chain.push(reference.meshes[0].clone());
        chain.push(reference.meshes[1].clone());
        let (err_a, effectivity) =
            error_vs_reference_via(state, &chain, &reference.state, rows[k].eta)?;
        rows[k].err_a = Some(err_a);
        rows[k].effectivity = Some(effectivity);
    }
    Ok(())
}

fn elapsed_ms(config: &StudyConfig, started: Instant) -> f64 {
    if config.deterministic {
        0.0
    } else {
        started.elapsed().as_secs_f64() * 1e3
    }
}

/// Exact CSV header.
pub const CSV_HEADER: &str =
    "level,h,ndof,lambda_h,E_h,eta,lambda_L,E_L,eta_ad,err_a,effectivity,wall_ms";

/// Render rows in the study CSV schema; an `error` message appends a final
/// diagnostic row.
pub fn rows_to_csv(rows: &[StudyRow], error: Option<&str>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.12e}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{:.3}\n",
            r.level,
            r.h,
            r.ndof,
            r.lambda_h,
            r.energy_h,
            r.eta,
            r.lambda_low,
            r.energy_low,
            r.eta_ad,
            opt(r.err_a),
            opt(r.effectivity),
            r.wall_ms,
        ));
    }
    if let Some(msg) = error {
        out.push_str(&format!("error,\"{}\"\n", msg.replace('"', "'")));
    }
    out
}

fn flush_csv(config: &StudyConfig, rows: &[StudyRow], error: Option<&str>) -> Result<()> {
    if let Some(path) = &config.output_path {
        std::fs::write(path, rows_to_csv(rows, error))?;
    }
    Ok(())
}

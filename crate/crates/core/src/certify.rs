//! Error certification for discrete ground states: the H(div) dual solve,
//! the complementarity estimator η, eigenvalue and energy lower bounds,
//! residual indicators for adaptivity, and the structural identity checks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::p1::{eval_p1, grad_p1};
use crate::fem::quadrature::{default_rule, quadrature};
use crate::fem::rt::{assemble_rt_rhs, assemble_rt_system, RtOrder, RtSpace};
use crate::gpe::{integral_u, GroundState};
use crate::linalg::{cg_solve, CgOptions, Precond, SolveReport};
use crate::mesh::{refine_red, TriangleMesh};

/// Discrete dual (flux) solution in a Raviart-Thomas space.
#[derive(Debug, Clone)]
pub struct FluxField {
    pub space: RtSpace,
    pub coeffs: Vec<f64>,
    pub report: SolveReport,
}

/// Per-element squared contributions of the two estimator terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementContribution {
    pub element: usize,
    pub residual_sq: f64,
    pub flux_sq: f64,
}

/// Computable error certificate
/// `η² = ‖λ_h u_h - W u_h - ζ u_h³ + div p‖₀² + ‖p - ∇u_h‖₀²`
/// with the derived lower bounds `λ_h - η` and `E_h - η`.
#[derive(Debug, Clone)]
pub struct ErrorCertificate {
    pub eta: f64,
    pub term_residual: f64,
    pub term_flux: f64,
    pub per_element: Vec<ElementContribution>,
    pub lambda_low: f64,
    pub energy_low: f64,
}

/// Residual-type local indicators driving adaptive marking.
#[derive(Debug, Clone)]
pub struct ResidualIndicators {
    /// `η_h(K)` per element (not squared).
    pub per_element: Vec<f64>,
    /// Global value; `global² = Σ per_element²`.
    pub global: f64,
}

/// Solve the discrete dual problem `a*(p, q) = -(g, div q)` on the state's
/// mesh, with `g = λ_h u_h - ζ u_h³ - (W - 1) u_h`.
pub fn solve_dual(state: &GroundState, order: RtOrder) -> Result<FluxField> {
    solve_dual_with(state, order, 1e-11)
}

/// [`solve_dual`] with an explicit relative CG tolerance (the attainable
/// floor grows with the H(div) condition number, roughly `h⁻²` times machine
/// precision).
pub fn solve_dual_with(state: &GroundState, order: RtOrder, tol: f64) -> Result<FluxField> {
    let mesh = state.mesh().clone();
    let space = RtSpace::new(mesh, order)?;
    let system = assemble_rt_system(&space, quadrature(5)?);
    let problem = state.problem;
    let rhs = assemble_rt_rhs(
        &space,
        &state.coeffs,
        state.lambda_h,
        problem.zeta,
        |x| problem.potential_at(x),
        default_rule(),
    )?;
    let opts = CgOptions {
        tol,
        max_iter: 40 * space.ndofs() + 1000,
        precond: Precond::Jacobi,
    };
    let (coeffs, report) = cg_solve(&system, &rhs, &opts)?;
    Ok(FluxField {
        space,
        coeffs,
        report,
    })
}

/// Evaluate the error certificate for a state and a reconstructed flux on
/// the same mesh.
pub fn eta(state: &GroundState, flux: &FluxField) -> Result<ErrorCertificate> {
    if !Arc::ptr_eq(state.mesh(), &flux.space.mesh) {
        return Err(Error::MeshMismatch);
    }
    let mesh = state.mesh();
    let rule = default_rule();
    let problem = state.problem;
    let lambda = state.lambda_h;
    let mut per_element = Vec::with_capacity(mesh.num_triangles());
    let mut residual_total = 0.0;
    let mut flux_total = 0.0;
    for t in 0..mesh.num_triangles() {
        let verts = mesh.tri_vertices(t);
        let area2 = 2.0 * mesh.triangle_area(t);
        let grad_u = grad_p1(mesh, &state.coeffs, t);
        let mut residual_sq = 0.0;
        let mut flux_sq = 0.0;
        for k in 0..rule.len() {
            let bary = &rule.points[k];
            let w = area2 * rule.weights[k];
            let u = eval_p1(mesh, &state.coeffs, t, bary);
            let x = rule.point_in(k, &verts);
            let g = lambda * u - problem.potential_at(x) * u - problem.zeta * u * u * u;
            let div_p = flux.space.divergence(&flux.coeffs, t, bary);
            let p = flux.space.eval(&flux.coeffs, t, bary);
            let r = g + div_p;
            residual_sq += w * r * r;
            let dx = p[0] - grad_u[0];
            let dy = p[1] - grad_u[1];
            flux_sq += w * (dx * dx + dy * dy);
        }
        residual_total += residual_sq;
        flux_total += flux_sq;
        per_element.push(ElementContribution {
            element: t,
            residual_sq,
            flux_sq,
        });
    }
    let eta = (residual_total + flux_total).sqrt();
    let (lambda_low, energy_low) = lower_bounds(state.lambda_h, state.energy_h, eta);
    Ok(ErrorCertificate {
        eta,
        term_residual: residual_total.sqrt(),
        term_flux: flux_total.sqrt(),
        per_element,
        lambda_low,
        energy_low,
    })
}

/// Asymptotic lower bounds `λ_h - η` and `E_h - η`.
pub fn lower_bounds(lambda_h: f64, energy_h: f64, eta: f64) -> (f64, f64) {
    (lambda_h - eta, energy_h - eta)
}

/// Embed an RT0 flux into the RT1 space on the same mesh by evaluating the
/// RT1 dof functionals on the field (exact: RT0 ⊂ RT1).
pub fn embed_rt0_in_rt1(flux: &FluxField) -> Result<FluxField> {
    if flux.space.order != RtOrder::Rt0 {
        return Err(Error::InvalidArgument(
            "embedding expects an RT0 flux".into(),
        ));
    }
    let rt1 = RtSpace::new(flux.space.mesh.clone(), RtOrder::Rt1)?;
    let coeffs = rt1.dof_values_of(|t, bary| flux.space.eval(&flux.coeffs, t, bary));
    Ok(FluxField {
        space: rt1,
        coeffs,
        report: flux.report.clone(),
    })
}

/// Check the quadratic-minimization identity
/// `η²(q) = η²(p) + |||p - q|||²` for the Galerkin flux `p = flux_a` and any
/// `q = flux_b` in the same space (an RT0 `flux_b` is embedded into RT1).
/// Returns `(|||p - q|||, |η²(q) - η²(p) - |||p - q|||²|)`. The `|||·|||`
/// norm is the one induced by the `a*` inner product.
pub fn pythagoras_gap(
    state: &GroundState,
    flux_a: &FluxField,
    flux_b: &FluxField,
) -> Result<(f64, f64)> {
    if !Arc::ptr_eq(&flux_a.space.mesh, &flux_b.space.mesh) {
        return Err(Error::MeshMismatch);
    }
    let embedded;
    let flux_b = match (flux_a.space.order, flux_b.space.order) {
        (a, b) if a == b => flux_b,
        (RtOrder::Rt1, RtOrder::Rt0) => {
            embedded = embed_rt0_in_rt1(flux_b)?;
            &embedded
        }
        _ => {
            return Err(Error::InvalidArgument(
                "flux_b must live in (a subspace of) flux_a's space".into(),
            ));
        }
    };
    let eta_a = eta(state, flux_a)?.eta;
    let eta_b = eta(state, flux_b)?.eta;
    let system = assemble_rt_system(&flux_a.space, quadrature(5)?);
    let diff: Vec<f64> = flux_a
        .coeffs
        .iter()
        .zip(&flux_b.coeffs)
        .map(|(a, b)| a - b)
        .collect();
    let gap_sq = crate::linalg::dot(&diff, &system.matvec(&diff));
    let gap = gap_sq.max(0.0).sqrt();
    let identity_residual = (eta_b * eta_b - eta_a * eta_a - gap_sq).abs();
    Ok((gap, identity_residual))
}

/// Residual indicators: `η_h²(K) = h_K² ‖λ_h u_h - ζ u_h³ - W u_h‖²_K +
/// Σ_E (h_E/2) ‖[[∇u_h]]·ν‖²_E` with interior jump terms split evenly
/// between the two incident elements (boundary edges contribute nothing);
/// the elementwise Laplacian of a P1 function vanishes.
pub fn residual_indicators(state: &GroundState) -> ResidualIndicators {
    let mesh = state.mesh();
    let rule = default_rule();
    let problem = state.problem;
    let lambda = state.lambda_h;
    let mut squared = vec![0.0; mesh.num_triangles()];

    for t in 0..mesh.num_triangles() {
        let verts = mesh.tri_vertices(t);
        let area2 = 2.0 * mesh.triangle_area(t);
        let h_k = mesh.triangle_diameter(t);
        let mut r_sq = 0.0;
        for k in 0..rule.len() {
            let w = area2 * rule.weights[k];
            let u = eval_p1(mesh, &state.coeffs, t, &rule.points[k]);
            let x = rule.point_in(k, &verts);
            let r = lambda * u - problem.zeta * u * u * u - problem.potential_at(x) * u;
            r_sq += w * r * r;
        }
        squared[t] = h_k * h_k * r_sq;
    }

    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(t1) = edge.triangles.1 else { continue };
        let t0 = edge.triangles.0;
        let nu = mesh.edge_normal(e);
        let g0 = grad_p1(mesh, &state.coeffs, t0);
        let g1 = grad_p1(mesh, &state.coeffs, t1);
        let jump = (g0[0] - g1[0]) * nu[0] + (g0[1] - g1[1]) * nu[1];
        let h_e = mesh.edge_length(e);
        // h_E ‖J‖²_E = h_E² J² for the constant P1 gradient jump.
        let term = h_e * h_e * jump * jump;
        squared[t0] += 0.5 * term;
        squared[t1] += 0.5 * term;
    }

    let total: f64 = squared.iter().sum();
    ResidualIndicators {
        per_element: squared.iter().map(|s| s.sqrt()).collect(),
        global: total.sqrt(),
    }
}

/// `‖u_ref - u_h‖_a` against a reference state on a mesh reached from the
/// state's mesh by red refinements, plus the effectivity `η / err_a`. Both
/// functions are canonicalized to positive mean before comparison.
pub fn error_vs_reference(
    state: &GroundState,
    ref_state: &GroundState,
    eta: f64,
) -> Result<(f64, f64)> {
    let chain = regenerate_red_chain(state.mesh(), ref_state.mesh())?;
    error_vs_reference_via(state, &chain, ref_state, eta)
}

/// Chain-based variant of [`error_vs_reference`] for meshes related by an
/// arbitrary stored refinement sequence: `chain` holds the successive meshes
/// strictly above `state`'s, ending in `ref_state`'s.
pub fn error_vs_reference_via(
    state: &GroundState,
    chain: &[Arc<TriangleMesh>],
    ref_state: &GroundState,
    eta: f64,
) -> Result<(f64, f64)> {
    let coarse_on_fine = prolong_through(state.mesh(), &state.coeffs, chain, ref_state.mesh())?;
    let mesh = ref_state.mesh();
    let u_h = canonical_sign(mesh, coarse_on_fine);
    let u_ref = canonical_sign(mesh, ref_state.coeffs.clone());

    let rule = default_rule();
    let mut err_sq = 0.0;
    let diff: Vec<f64> = u_ref.iter().zip(&u_h).map(|(a, b)| a - b).collect();
    for t in 0..mesh.num_triangles() {
        let area2 = 2.0 * mesh.triangle_area(t);
        let g = grad_p1(mesh, &diff, t);
        err_sq += 0.5 * area2 * (g[0] * g[0] + g[1] * g[1]);
        for k in 0..rule.len() {
            let v = eval_p1(mesh, &diff, t, &rule.points[k]);
            err_sq += area2 * rule.weights[k] * v * v;
        }
    }
    let err_a = err_sq.sqrt();
    Ok((err_a, eta / err_a))
}

/// Result of the Rayleigh-quotient expansion identity check.
#[derive(Debug, Clone, Copy)]
pub struct RqExpansion {
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

/// Verify the eigenvalue expansion
/// `λ_h - λ = [a(e,e) - λ b(e,e) + ∫(W-1)e² + ζ ∫ (u⁴ + u_h⁴ - 2u³u_h)] /
/// b(u_h,u_h)` with `e = u_h - u`, using the reference state as proxy for
/// `(λ, u)`; exact up to solver residuals and roundoff since every integrand
/// is a polynomial within the quadrature exactness.
pub fn rq_expansion_check(state: &GroundState, ref_state: &GroundState) -> Result<RqExpansion> {
    if state.problem != ref_state.problem {
        return Err(Error::InvalidArgument(
            "states discretize different problems".into(),
        ));
    }
    let chain = regenerate_red_chain(state.mesh(), ref_state.mesh())?;
    let u_h = prolong_through(state.mesh(), &state.coeffs, &chain, ref_state.mesh())?;
    let mesh = ref_state.mesh();
    let u_h = canonical_sign(mesh, u_h);
    let u_ref = canonical_sign(mesh, ref_state.coeffs.clone());

    let problem = state.problem;
    let zeta = problem.zeta;
    let rule = default_rule();
    let mut a_ee = 0.0;
    let mut b_ee = 0.0;
    let mut w_ee = 0.0;
    let mut quartic = 0.0;
    let mut b_hh = 0.0;
    let diff: Vec<f64> = u_h.iter().zip(&u_ref).map(|(h, r)| h - r).collect();
    for t in 0..mesh.num_triangles() {
        let verts = mesh.tri_vertices(t);
        let area2 = 2.0 * mesh.triangle_area(t);
        let ge = grad_p1(mesh, &diff, t);
        a_ee += 0.5 * area2 * (ge[0] * ge[0] + ge[1] * ge[1]);
        for k in 0..rule.len() {
            let w = area2 * rule.weights[k];
            let e = eval_p1(mesh, &diff, t, &rule.points[k]);
            let uh = eval_p1(mesh, &u_h, t, &rule.points[k]);
            let ur = eval_p1(mesh, &u_ref, t, &rule.points[k]);
            let x = rule.point_in(k, &verts);
            a_ee += w * e * e;
            b_ee += w * e * e;
            w_ee += w * (problem.potential_at(x) - 1.0) * e * e;
            quartic += w * (ur.powi(4) + uh.powi(4) - 2.0 * ur.powi(3) * uh);
            b_hh += w * uh * uh;
        }
    }
    let lambda_ref = ref_state.lambda_h;
    let rhs = (a_ee - lambda_ref * b_ee + w_ee + zeta * quartic) / b_hh;
    let lhs = state.lambda_h - lambda_ref;
    Ok(RqExpansion {
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    })
}

fn canonical_sign(mesh: &TriangleMesh, mut coeffs: Vec<f64>) -> Vec<f64> {
    if integral_u(mesh, &coeffs) < 0.0 {
        for c in coeffs.iter_mut() {
            *c = -*c;
        }
    }
    coeffs
}

/// Re-derive the red-refinement chain from `coarse` up to `fine`; fails with
/// [`Error::NotNested`] if `fine` is not a repeated red refinement of
/// `coarse`.
fn regenerate_red_chain(
    coarse: &Arc<TriangleMesh>,
    fine: &Arc<TriangleMesh>,
) -> Result<Vec<Arc<TriangleMesh>>> {
    let mut chain = Vec::new();
    let mut current = coarse.clone();
    while current.num_vertices() < fine.num_vertices() {
        current = Arc::new(refine_red(&current));
        chain.push(current.clone());
    }
    let last = chain.last().map(|m| m.as_ref()).unwrap_or(coarse.as_ref());
    if last.vertices != fine.vertices || last.triangles != fine.triangles {
        return Err(Error::NotNested);
    }
    Ok(chain)
}

fn prolong_through(
    start: &Arc<TriangleMesh>,
    coeffs: &[f64],
    chain: &[Arc<TriangleMesh>],
    target: &Arc<TriangleMesh>,
) -> Result<Vec<f64>> {
    let mut values = coeffs.to_vec();
    let mut current = start.as_ref();
    for mesh in chain {
        values = mesh.prolong_vertex_values(&values)?;
        current = mesh.as_ref();
    }
    if current.vertices != target.vertices || current.triangles != target.triangles {
        return Err(Error::NotNested);
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpe::{scf_solve, scf_solve_from, GpeProblem, ScfOptions};
    use crate::mesh::{unit_square_mesh, DomainPreset};

    fn example1_state(n: usize, tol: f64) -> GroundState {
        let problem = GpeProblem::new(DomainPreset::UnitSquare, [1.0, 1.0], 1.0).unwrap();
        let mesh = Arc::new(unit_square_mesh(n).unwrap());
        let opts = ScfOptions {
            tol,
            max_iter: 400,
            damping: 0.7,
        };
        scf_solve(&problem, &mesh, &opts).unwrap()
    }

    #[test]
    fn zero_load_gives_zero_flux() {
        // Synthetic state with u ≡ 0 has g ≡ 0 and p = 0.
        let problem = GpeProblem::new(DomainPreset::UnitSquare, [1.0, 1.0], 1.0).unwrap();
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let space = crate::fem::p1::P1Space::new(mesh.clone());
        let state = GroundState {
            problem,
            space,
            lambda_h: 1.0,
            coeffs: vec![0.0; mesh.num_vertices()],
            energy_h: 1.0,
            scf_log: Vec::new(),
        };
        let flux = solve_dual(&state, RtOrder::Rt0).unwrap();
        assert!(flux.coeffs.iter().all(|&c| c == 0.0));
        let cert = eta(&state, &flux).unwrap();
        assert_eq!(cert.eta, 0.0);
        assert_eq!(cert.lambda_low, 1.0);
    }

    #[test]
    fn galerkin_orthogonality_of_dual_solve() {
        let state = example1_state(6, 1e-10);
        let flux = solve_dual(&state, RtOrder::Rt1).unwrap();
        assert!(flux.report.converged);
        let system = assemble_rt_system(&flux.space, quadrature(5).unwrap());
        let rhs = assemble_rt_rhs(
            &flux.space,
            &state.coeffs,
            state.lambda_h,
            state.problem.zeta,
            |x| state.problem.potential_at(x),
            default_rule(),
        )
        .unwrap();
        let residual = {
            let ax = system.matvec(&flux.coeffs);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            crate::linalg::norm(&r) / crate::linalg::norm(&rhs)
        };
        assert!(residual <= 1e-10, "relative dual residual {residual}");
    }

    #[test]
    fn certificate_splits_and_bounds() {
        let state = example1_state(6, 1e-10);
        let flux = solve_dual(&state, RtOrder::Rt1).unwrap();
        let cert = eta(&state, &flux).unwrap();
        assert!(cert.eta >= 0.0);
        let sum_sq: f64 = cert
            .per_element
            .iter()
            .map(|c| c.residual_sq + c.flux_sq)
            .sum();
        assert!((cert.eta * cert.eta - sum_sq).abs() <= 1e-12 * cert.eta * cert.eta);
        let t2 = cert.term_residual * cert.term_residual + cert.term_flux * cert.term_flux;
        assert!((cert.eta * cert.eta - t2).abs() <= 1e-12 * cert.eta * cert.eta);
        assert_eq!(cert.lambda_low, state.lambda_h - cert.eta);
        assert_eq!(cert.energy_low, state.energy_h - cert.eta);
        assert!(cert.lambda_low <= state.lambda_h);
    }

    #[test]
    fn rt1_beats_rt0() {
        let state = example1_state(6, 1e-10);
        let f0 = solve_dual(&state, RtOrder::Rt0).unwrap();
        let f1 = solve_dual(&state, RtOrder::Rt1).unwrap();
        let e0 = eta(&state, &f0).unwrap().eta;
        let e1 = eta(&state, &f1).unwrap().eta;
        assert!(e1 <= e0, "η(RT1) = {e1} vs η(RT0) = {e0}");
    }

    #[test]
    fn pythagoras_identity() {
        let state = example1_state(6, 1e-10);
        let flux = solve_dual(&state, RtOrder::Rt1).unwrap();

        // Identical fluxes: zero gap, zero residual.
        let (gap, resid) = pythagoras_gap(&state, &flux, &flux).unwrap();
        assert_eq!(gap, 0.0);
        assert!(resid <= 1e-14);

        // Perturbed flux in the same space.
        let mut perturbed = flux.clone();
        for (k, c) in perturbed.coeffs.iter_mut().enumerate() {
            *c += 1e-3 * ((k as f64 * 0.61).sin());
        }
        let eta_q = eta(&state, &perturbed).unwrap().eta;
        let (gap, resid) = pythagoras_gap(&state, &flux, &perturbed).unwrap();
        assert!(gap > 0.0);
        assert!(
            resid <= 1e-10 * eta_q * eta_q,
            "identity residual {resid} vs eta² {}",
            eta_q * eta_q
        );

        // RT0 solution embedded into the RT1 space.
        let f0 = solve_dual(&state, RtOrder::Rt0).unwrap();
        let eta0 = eta(&state, &f0).unwrap().eta;
        let (gap, resid) = pythagoras_gap(&state, &flux, &f0).unwrap();
        assert!(gap > 0.0);
        assert!(resid <= 1e-10 * eta0 * eta0);
    }

    #[test]
    fn indicators_sum_and_jump_oracle() {
        let state = example1_state(6, 1e-10);
        let ind = residual_indicators(&state);
        let sum_sq: f64 = ind.per_element.iter().map(|v| v * v).sum();
        assert!((ind.global * ind.global - sum_sq).abs() <= 1e-12 * sum_sq);

        // Hand-computable jump: two triangles, u = hat at vertex (1,0).
        let mesh = Arc::new(unit_square_mesh(1).unwrap());
        let coeffs: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|v| if (v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12 { 1.0 } else { 0.0 })
            .collect();
        let (e, edge) = mesh
            .edges
            .iter()
            .enumerate()
            .find(|(_, e)| !e.boundary)
            .map(|(i, e)| (i, e.clone()))
            .unwrap();
        let nu = mesh.edge_normal(e);
        let g0 = grad_p1(&mesh, &coeffs, edge.triangles.0);
        let g1 = grad_p1(&mesh, &coeffs, edge.triangles.1.unwrap());
        let jump = ((g0[0] - g1[0]) * nu[0] + (g0[1] - g1[1]) * nu[1]).abs();
        // Analytic: gradients (1,-1) and (0,0), normal (-1,1)/√2 -> |J| = √2.
        assert!((jump - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn reference_error_of_prolonged_state_is_zero() {
        let problem = GpeProblem::new(DomainPreset::UnitSquare, [1.0, 1.0], 1.0).unwrap();
        let mesh = Arc::new(unit_square_mesh(4).unwrap());
        let state = scf_solve(&problem, &mesh, &ScfOptions::default()).unwrap();

        // Build a "reference" that is the same function on the refined mesh.
        let fine = Arc::new(refine_red(&mesh));
        let fine_coeffs = fine.prolong_vertex_values(&state.coeffs).unwrap();
        let fine_state = GroundState {
            problem,
            space: crate::fem::p1::P1Space::new(fine.clone()),
            lambda_h: state.lambda_h,
            coeffs: fine_coeffs,
            energy_h: state.energy_h,
            scf_log: Vec::new(),
        };
        let (err, _) = error_vs_reference(&state, &fine_state, 1.0).unwrap();
        assert!(err < 1e-12);

        // Sign flips are canonicalized away.
        let mut flipped = fine_state.clone();
        for c in flipped.coeffs.iter_mut() {
            *c = -*c;
        }
        let (err, _) = error_vs_reference(&state, &flipped, 1.0).unwrap();
        assert!(err < 1e-12);
    }

    #[test]
    fn non_nested_reference_rejected() {
        let problem = GpeProblem::new(DomainPreset::UnitSquare, [1.0, 1.0], 1.0).unwrap();
        let coarse = Arc::new(unit_square_mesh(4).unwrap());
        let other = Arc::new(unit_square_mesh(6).unwrap());
        let opts = ScfOptions::default();
        let a = scf_solve(&problem, &coarse, &opts).unwrap();
        let b = scf_solve(&problem, &other, &opts).unwrap();
        assert!(matches!(
            error_vs_reference(&a, &b, 1.0),
            Err(Error::NotNested)
        ));
    }

    #[test]
    fn rq_expansion_same_state_is_zero() {
        let state = example1_state(6, 1e-10);
        let check = rq_expansion_check(&state, &state).unwrap();
        assert!(check.lhs.abs() < 1e-14);
        assert!(check.rhs.abs() < 1e-12);
        assert!(check.discrepancy < 1e-12);
    }

    #[test]
    fn rq_expansion_identity_against_finer_proxy() {
        // n=6 against an n=12 proxy solved tightly; the identity holds to
        // solver precision. Also exercise the ζ = 0 linear reduction.
        for (zeta, tol) in [(1.0, 5e-10), (0.0, 5e-10)] {
            let problem = if zeta == 0.0 {
                GpeProblem::with_zero_potential(DomainPreset::UnitSquare, 0.0).unwrap()
            } else {
                GpeProblem::new(DomainPreset::UnitSquare, [1.0, 1.0], zeta).unwrap()
            };
            let opts = ScfOptions {
                tol: 1e-12,
                max_iter: 600,
                damping: 0.7,
            };
            let coarse = Arc::new(unit_square_mesh(6).unwrap());
            let fine = Arc::new(refine_red(&coarse));
            let a = scf_solve(&problem, &coarse, &opts).unwrap();
            let guess = fine.prolong_vertex_values(&a.coeffs).unwrap();
            let b = scf_solve_from(&problem, &fine, &opts, Some(&guess)).unwrap();
            let check = rq_expansion_check(&a, &b).unwrap();
            assert!(
                check.discrepancy <= tol,
                "zeta {zeta}: lhs {} rhs {} discrepancy {}",
                check.lhs,
                check.rhs,
                check.discrepancy
            );
        }
    }
}

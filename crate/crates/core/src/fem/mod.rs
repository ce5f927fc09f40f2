//! Finite element spaces and assembly: P1 Lagrange on H¹₀, Raviart-Thomas
//! on H(div), triangle quadrature, and sparse symmetric matrices.

pub mod p1;
pub mod quadrature;
pub mod rt;
pub mod sparse;

pub use p1::{assemble_p1, eval_p1, grad_p1, restrict_dirichlet, P1Form, P1Space};
pub use quadrature::{default_rule, quadrature, QuadratureRule, DEFAULT_DEGREE};
pub use rt::{assemble_rt_rhs, assemble_rt_system, RtOrder, RtSpace};
pub use sparse::SparseSymmetricMatrix;

/// Largest scaled residual of the discrete Green identity
/// `(div ψ, φ)₀ + (ψ, ∇φ)₀ = 0` over all RT basis functions ψ and interior
/// P1 basis functions φ, scaled by the product of the H(div) and H¹ norms of
/// the pair. Both spaces must live on the same mesh. Intended for coarse
/// meshes; storage is dense in the pair count.
pub fn green_identity_max_residual(rt_space: &RtSpace, p1_space: &P1Space) -> f64 {
    assert!(
        std::sync::Arc::ptr_eq(&rt_space.mesh, &p1_space.mesh),
        "spaces must share a mesh"
    );
    let mesh = &rt_space.mesh;
    let rule = default_rule();
    let n_rt = rt_space.ndofs();
    let n_p1 = p1_space.num_interior();
    let mut pairing = vec![0.0; n_rt * n_p1];
    let mut interior_of = vec![usize::MAX; p1_space.ndofs()];
    for (k, &v) in p1_space.interior_dofs.iter().enumerate() {
        interior_of[v] = k;
    }

    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let verts = mesh.tri_vertices(t);
        let area = mesh.triangle_area(t);
        let grads = p1::hat_gradients(&verts, area);
        let dofs = rt_space.element_dofs(t);
        for k in 0..rule.len() {
            let bary = &rule.points[k];
            let w = 2.0 * area * rule.weights[k];
            let (vals, divs) = rt_space.basis_at(t, bary);
            for (alpha, &g) in dofs.iter().enumerate() {
                for i in 0..3 {
                    let col = interior_of[tri[i]];
                    if col == usize::MAX {
                        continue;
                    }
                    pairing[g * n_p1 + col] += w
                        * (divs[alpha] * bary[i]
                            + vals[alpha][0] * grads[i][0]
                            + vals[alpha][1] * grads[i][1]);
                }
            }
        }
    }

    // Norm scales from the diagonal of the Galerkin matrices.
    let a_star = assemble_rt_system(rt_space, quadrature(5).expect("rule"));
    let rt_norms: Vec<f64> = a_star.diagonal().iter().map(|d| d.sqrt()).collect();
    let stiff = assemble_p1(mesh, P1Form::Stiffness, rule).expect("stiffness");
    let mass = assemble_p1(mesh, P1Form::Mass, rule).expect("mass");
    let p1_norms: Vec<f64> = p1_space
        .interior_dofs
        .iter()
        .map(|&v| (stiff.get(v, v) + mass.get(v, v)).sqrt())
        .collect();

    let mut worst = 0.0f64;
    for g in 0..n_rt {
        for i in 0..n_p1 {
            let scaled = (pairing[g * n_p1 + i] / (rt_norms[g] * p1_norms[i])).abs();
            worst = worst.max(scaled);
        }
    }
    worst
}

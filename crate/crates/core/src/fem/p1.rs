//! Piecewise-linear Lagrange elements on triangles with homogeneous
//! Dirichlet boundary conditions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::sparse::SparseSymmetricMatrix;
use crate::mesh::TriangleMesh;

/// P1 Lagrange space; one degree of freedom per vertex, interior dofs
/// exclude exactly the boundary vertices.
#[derive(Debug, Clone)]
pub struct P1Space {
    pub mesh: Arc<TriangleMesh>,
    pub interior_dofs: Vec<usize>,
    pub boundary: Vec<bool>,
}

impl P1Space {
    pub fn new(mesh: Arc<TriangleMesh>) -> Self {
        let boundary = mesh.boundary_vertex_flags();
        let interior_dofs = (0..mesh.num_vertices()).filter(|&v| !boundary[v]).collect();
        P1Space {
            mesh,
            interior_dofs,
            boundary,
        }
    }

    /// Total number of dofs (vertex count).
    pub fn ndofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_dofs.len()
    }

    /// Extract interior entries from a full coefficient vector.
    pub fn gather_interior(&self, full: &[f64]) -> Vec<f64> {
        self.interior_dofs.iter().map(|&v| full[v]).collect()
    }

    /// Expand interior coefficients to a full vector with zero boundary
    /// values.
    pub fn scatter_interior(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.ndofs()];
        for (k, &v) in self.interior_dofs.iter().enumerate() {
            full[v] = interior[k];
        }
        full
    }
}

/// Bilinear form selector for [`assemble_p1`].
pub enum P1Form<'a> {
    /// `∫ ∇φ_i · ∇φ_j`
    Stiffness,
    /// `∫ φ_i φ_j`
    Mass,
    /// `∫ W φ_i φ_j` with `W(x) = γ₁x₁² + γ₂x₂²`
    Potential { gamma: [f64; 2] },
    /// `∫ w φ_i φ_j` with `w >= 0` sampled at the rule's points, flattened
    /// as `values[t * rule.len() + k]`.
    WeightedMass { values: &'a [f64] },
}

/// Assemble a symmetric P1 matrix over all vertex dofs; the Dirichlet
/// restriction is applied separately by [`restrict_dirichlet`].
pub fn assemble_p1(
    mesh: &TriangleMesh,
    form: P1Form,
    rule: &QuadratureRule,
) -> Result<SparseSymmetricMatrix> {
    let nt = mesh.num_triangles();
    let nq = rule.len();
    match &form {
        P1Form::Potential { gamma } => {
            if gamma[0] <= 0.0 || gamma[1] <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "potential coefficients must be positive, got ({}, {})",
                    gamma[0], gamma[1]
                )));
            }
        }
        P1Form::WeightedMass { values } => {
            if values.len() != nt * nq {
                return Err(Error::DimensionMismatch(format!(
                    "weighted mass expects {} samples ({} triangles x {} points), got {}",
                    nt * nq,
                    nt,
                    nq,
                    values.len()
                )));
            }
            if values.iter().any(|&w| w < 0.0) {
                return Err(Error::InvalidArgument(
                    "weighted mass requires nonnegative samples".into(),
                ));
            }
        }
        _ => {}
    }

    let mut triplets = Vec::with_capacity(9 * nt);
    for t in 0..nt {
        let tri = mesh.triangles[t];
        let verts = mesh.tri_vertices(t);
        let area = mesh.triangle_area(t);
        let mut local = [[0.0f64; 3]; 3];
        match &form {
            P1Form::Stiffness => {
                let g = hat_gradients(&verts, area);
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
            }
            P1Form::Mass => {
                accumulate_weighted(&mut local, rule, area, |_| 1.0);
            }
            P1Form::Potential { gamma } => {
                let [g1, g2] = *gamma;
                accumulate_weighted(&mut local, rule, area, |k| {
                    let p = rule.point_in(k, &verts);
                    g1 * p[0] * p[0] + g2 * p[1] * p[1]
                });
            }
            P1Form::WeightedMass { values } => {
                accumulate_weighted(&mut local, rule, area, |k| values[t * nq + k]);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    SparseSymmetricMatrix::from_triplets(mesh.num_vertices(), triplets)
}

fn accumulate_weighted(
    local: &mut [[f64; 3]; 3],
    rule: &QuadratureRule,
    area: f64,
    weight_at: impl Fn(usize) -> f64,
) {
    for k in 0..rule.len() {
        let b = rule.points[k];
        let w = 2.0 * area * rule.weights[k] * weight_at(k);
        for i in 0..3 {
            for j in 0..3 {
                local[i][j] += w * b[i] * b[j];
            }
        }
    }
}

/// Constant gradients of the three hat functions on a triangle.
pub(crate) fn hat_gradients(v: &[[f64; 2]; 3], area: f64) -> [[f64; 2]; 3] {
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = v[(i + 1) % 3];
        let b = v[(i + 2) % 3];
        // 90° counterclockwise rotation of (b - a), scaled by 1/(2|K|).
        g[i] = [
            -(b[1] - a[1]) / (2.0 * area),
            (b[0] - a[0]) / (2.0 * area),
        ];
    }
    g
}

/// Principal submatrix on the interior dofs.
pub fn restrict_dirichlet(
    matrix: &SparseSymmetricMatrix,
    space: &P1Space,
) -> SparseSymmetricMatrix {
    matrix.restrict(&space.interior_dofs)
}

/// Evaluate a P1 function at a barycentric point of triangle `t`.
/// Panics if `t` is out of range.
pub fn eval_p1(mesh: &TriangleMesh, coeffs: &[f64], t: usize, bary: &[f64; 3]) -> f64 {
    let tri = mesh.triangles[t];
    bary[0] * coeffs[tri[0]] + bary[1] * coeffs[tri[1]] + bary[2] * coeffs[tri[2]]
}

/// Constant gradient of a P1 function on triangle `t`.
pub fn grad_p1(mesh: &TriangleMesh, coeffs: &[f64], t: usize) -> [f64; 2] {
    let tri = mesh.triangles[t];
    let verts = mesh.tri_vertices(t);
    let g = hat_gradients(&verts, mesh.triangle_area(t));
    let mut out = [0.0; 2];
    for i in 0..3 {
        out[0] += coeffs[tri[i]] * g[i][0];
        out[1] += coeffs[tri[i]] * g[i][1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::{default_rule, quadrature};
    use crate::mesh::{unit_square_mesh, TriangleMesh};

    fn single_triangle() -> Arc<TriangleMesh> {
        Arc::new(
            TriangleMesh::from_parts(
                vec![[0.2, 0.1], [1.3, 0.4], [0.5, 1.2]],
                vec![[0, 1, 2]],
            )
            .unwrap(),
        )
    }

    #[test]
    fn mass_matrix_matches_symbolic() {
        // Exact local mass matrix: |K|/12 * [[2,1,1],[1,2,1],[1,1,2]].
        let mesh = single_triangle();
        let area = mesh.triangle_area(0);
        let m = assemble_p1(&mesh, P1Form::Mass, quadrature(2).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let exact = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!(
                    (m.get(i, j) - exact).abs() < 1e-14,
                    "({i},{j}): {} vs {exact}",
                    m.get(i, j)
                );
            }
        }
    }

    #[test]
    fn stiffness_kernel_contains_constants() {
        let mesh = Arc::new(unit_square_mesh(4).unwrap());
        let k = assemble_p1(&mesh, P1Form::Stiffness, default_rule()).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        let y = k.matvec(&ones);
        for v in y {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn mass_entries_sum_to_domain_area() {
        let mesh = Arc::new(unit_square_mesh(5).unwrap());
        let m = assemble_p1(&mesh, P1Form::Mass, default_rule()).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        let total: f64 = m.matvec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assembly_is_traversal_order_independent() {
        // Permute the triangle list; assembled entries must agree to 1e-13.
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let mut tris = mesh.triangles.clone();
        tris.reverse();
        let permuted = Arc::new(TriangleMesh::from_parts(mesh.vertices.clone(), tris).unwrap());
        for form in [0, 1, 2] {
            let mk = |mesh: &TriangleMesh| {
                let f = match form {
                    0 => P1Form::Stiffness,
                    1 => P1Form::Mass,
                    _ => P1Form::Potential { gamma: [1.0, 2.0] },
                };
                assemble_p1(mesh, f, default_rule()).unwrap()
            };
            let a = mk(&mesh);
            let b = mk(&permuted);
            let scale = 1.0;
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-13 * scale);
                }
            }
        }
    }

    #[test]
    fn dirichlet_restriction_counts() {
        // n=1: all four vertices on the boundary -> empty system.
        let mesh = Arc::new(unit_square_mesh(1).unwrap());
        let space = P1Space::new(mesh.clone());
        assert_eq!(space.num_interior(), 0);
        let m = assemble_p1(&mesh, P1Form::Mass, default_rule()).unwrap();
        assert_eq!(restrict_dirichlet(&m, &space).dim(), 0);

        // n=2: exactly one interior vertex.
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let space = P1Space::new(mesh.clone());
        assert_eq!(space.num_interior(), 1);
        let m = assemble_p1(&mesh, P1Form::Stiffness, default_rule()).unwrap();
        let r = restrict_dirichlet(&m, &space);
        assert_eq!(r.dim(), 1);
        assert_eq!(r.max_relative_asymmetry(), 0.0);
    }

    #[test]
    fn weighted_mass_validates_samples() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let rule = default_rule();
        let bad = vec![0.0; 3];
        assert!(matches!(
            assemble_p1(&mesh, P1Form::WeightedMass { values: &bad }, rule),
            Err(Error::DimensionMismatch(_))
        ));
        let negative = vec![-1.0; mesh.num_triangles() * rule.len()];
        assert!(assemble_p1(&mesh, P1Form::WeightedMass { values: &negative }, rule).is_err());
        // Weight 1 reproduces the mass matrix.
        let ones = vec![1.0; mesh.num_triangles() * rule.len()];
        let wm = assemble_p1(&mesh, P1Form::WeightedMass { values: &ones }, rule).unwrap();
        let m = assemble_p1(&mesh, P1Form::Mass, rule).unwrap();
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                assert!((wm.get(i, j) - m.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn evaluation_and_gradients() {
        let mesh = single_triangle();
        // Hat function of local vertex 1.
        let coeffs = vec![0.0, 1.0, 0.0];
        assert_eq!(eval_p1(&mesh, &coeffs, 0, &[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(eval_p1(&mesh, &coeffs, 0, &[1.0, 0.0, 0.0]), 0.0);
        let third = 1.0 / 3.0;
        assert!((eval_p1(&mesh, &coeffs, 0, &[third, third, third]) - third).abs() < 1e-15);

        // Global interpolant of x1 has gradient (1, 0) everywhere.
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let coeffs: Vec<f64> = mesh.vertices.iter().map(|v| v[0]).collect();
        for t in 0..mesh.num_triangles() {
            let g = grad_p1(&mesh, &coeffs, t);
            assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
        }
    }

    #[test]
    fn potential_rejects_nonpositive_gamma() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        assert!(assemble_p1(
            &mesh,
            P1Form::Potential { gamma: [0.0, 1.0] },
            default_rule()
        )
        .is_err());
    }
}

//! Raviart-Thomas H(div) elements of order 0 and 1.
//!
//! Degrees of freedom follow the mesh edge convention: the normal of edge
//! `(a, b)` with `a < b` is the counterclockwise rotation of `b - a`, and
//! edge dofs are moments of the normal component against `{1, t - 1/2}` in
//! the parametrization `x(t) = a + t (b - a)`. RT1 adds two interior moments
//! against the constant unit vector fields. The basis is constructed per
//! element by inverting the dof/monomial matrix in diameter-scaled local
//! coordinates, which makes the normal trace single-valued across interior
//! edges by construction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::p1::eval_p1;
use crate::fem::quadrature::{quadrature, QuadratureRule};
use crate::fem::sparse::SparseSymmetricMatrix;
use crate::mesh::TriangleMesh;

/// Polynomial order of the Raviart-Thomas space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtOrder {
    Rt0,
    Rt1,
}

impl RtOrder {
    pub fn index(self) -> usize {
        match self {
            RtOrder::Rt0 => 0,
            RtOrder::Rt1 => 1,
        }
    }

    pub fn from_index(p: usize) -> Result<Self> {
        match p {
            0 => Ok(RtOrder::Rt0),
            1 => Ok(RtOrder::Rt1),
            _ => Err(Error::InvalidArgument(format!(
                "Raviart-Thomas order must be 0 or 1, got {p}"
            ))),
        }
    }

    /// Local dofs per element.
    fn ndl(self) -> usize {
        match self {
            RtOrder::Rt0 => 3,
            RtOrder::Rt1 => 8,
        }
    }
}

/// Two-point Gauss rule on [0, 1], exact to degree 3.
const EDGE_T: [f64; 2] = [0.21132486540518713, 0.7886751345948129];
const EDGE_W: [f64; 2] = [0.5, 0.5];

/// H(div)-conforming Raviart-Thomas space on a triangle mesh. No boundary
/// condition is imposed: the normal trace on the domain boundary is free.
#[derive(Debug, Clone)]
pub struct RtSpace {
    pub mesh: Arc<TriangleMesh>,
    pub order: RtOrder,
    ndofs: usize,
    /// Global dof ids per element, `ndl` entries each.
    elem_dofs: Vec<usize>,
    /// Per-element monomial coefficients of the local basis,
    /// `inv[j * ndl + alpha]` is the coefficient of monomial `j` in basis
    /// function `alpha`; stride `ndl * ndl`.
    inv: Vec<f64>,
    /// Local frame per element: centroid and diameter scale.
    center: Vec<[f64; 2]>,
    scale: Vec<f64>,
}

impl RtSpace {
    pub fn new(mesh: Arc<TriangleMesh>, order: RtOrder) -> Result<Self> {
        let nt = mesh.num_triangles();
        let ne = mesh.num_edges();
        let ndl = order.ndl();
        let ndofs = match order {
            RtOrder::Rt0 => ne,
            RtOrder::Rt1 => 2 * ne + 2 * nt,
        };

        let mut elem_dofs = Vec::with_capacity(nt * ndl);
        let mut inv = Vec::with_capacity(nt * ndl * ndl);
        let mut center = Vec::with_capacity(nt);
        let mut scale = Vec::with_capacity(nt);
        let interior_rule = quadrature(2)?;

        for t in 0..nt {
            let c = mesh.centroid(t);
            let s = mesh.triangle_diameter(t);
            center.push(c);
            scale.push(s);

            for i in 0..3 {
                let e = mesh.triangle_edges[t][i];
                match order {
                    RtOrder::Rt0 => elem_dofs.push(e),
                    RtOrder::Rt1 => {
                        elem_dofs.push(2 * e);
                        elem_dofs.push(2 * e + 1);
                    }
                }
            }
            if order == RtOrder::Rt1 {
                elem_dofs.push(2 * ne + 2 * t);
                elem_dofs.push(2 * ne + 2 * t + 1);
            }

            // Vandermonde of dof functionals applied to the local monomials.
            let mut v = vec![0.0; ndl * ndl];
            for i in 0..3 {
                let e = mesh.triangle_edges[t][i];
                let (a, b) = mesh.edges[e].vertices;
                let (va, vb) = (mesh.vertices[a], mesh.vertices[b]);
                let len = mesh.edge_length(e);
                let nu = mesh.edge_normal(e);
                for g in 0..2 {
                    let tau = EDGE_T[g];
                    let x = [va[0] + tau * (vb[0] - va[0]), va[1] + tau * (vb[1] - va[1])];
                    let xt = [(x[0] - c[0]) / s, (x[1] - c[1]) / s];
                    let mono = monomial_values(order, xt);
                    for (j, m) in mono.iter().enumerate() {
                        let tr = len * EDGE_W[g] * (m[0] * nu[0] + m[1] * nu[1]);
                        match order {
                            RtOrder::Rt0 => v[i * ndl + j] += tr,
                            RtOrder::Rt1 => {
                                v[(2 * i) * ndl + j] += tr;
                                v[(2 * i + 1) * ndl + j] += tr * (tau - 0.5);
                            }
                        }
                    }
                }
            }
            if order == RtOrder::Rt1 {
                let verts = mesh.tri_vertices(t);
                let area2 = 2.0 * mesh.triangle_area(t);
                for k in 0..interior_rule.len() {
                    let x = interior_rule.point_in(k, &verts);
                    let xt = [(x[0] - c[0]) / s, (x[1] - c[1]) / s];
                    let w = area2 * interior_rule.weights[k];
                    let mono = monomial_values(order, xt);
                    for (j, m) in mono.iter().enumerate() {
                        v[6 * ndl + j] += w * m[0];
                        v[7 * ndl + j] += w * m[1];
                    }
                }
            }

            let v_inv = invert_small(&mut v, ndl).ok_or_else(|| {
                Error::InvalidMesh(format!("triangle {t} yields a singular RT dof matrix"))
            })?;
            inv.extend_from_slice(&v_inv);
        }

        Ok(RtSpace {
            mesh,
            order,
            ndofs,
            elem_dofs,
            inv,
            center,
            scale,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    fn ndl(&self) -> usize {
        self.order.ndl()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let ndl = self.ndl();
        &self.elem_dofs[t * ndl..(t + 1) * ndl]
    }

    /// Monomial coefficients `c_j` of the field `Σ coeffs[dof] ψ_dof`
    /// restricted to element `t`.
    fn local_monomial_coeffs(&self, coeffs: &[f64], t: usize) -> Vec<f64> {
        let ndl = self.ndl();
        let inv = &self.inv[t * ndl * ndl..(t + 1) * ndl * ndl];
        let dofs = self.element_dofs(t);
        let mut c = vec![0.0; ndl];
        for (j, cj) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (alpha, &dof) in dofs.iter().enumerate() {
                acc += inv[j * ndl + alpha] * coeffs[dof];
            }
            *cj = acc;
        }
        c
    }

    /// Vector value of an RT function at a barycentric point of triangle `t`.
    pub fn eval(&self, coeffs: &[f64], t: usize, bary: &[f64; 3]) -> [f64; 2] {
        debug_assert_eq!(coeffs.len(), self.ndofs);
        let c = self.local_monomial_coeffs(coeffs, t);
        let xt = self.local_point(t, bary);
        let mono = monomial_values(self.order, xt);
        let mut out = [0.0; 2];
        for (j, m) in mono.iter().enumerate() {
            out[0] += c[j] * m[0];
            out[1] += c[j] * m[1];
        }
        out
    }

    /// Divergence of an RT function at a barycentric point of triangle `t`
    /// (constant for RT0, linear for RT1).
    pub fn divergence(&self, coeffs: &[f64], t: usize, bary: &[f64; 3]) -> f64 {
        debug_assert_eq!(coeffs.len(), self.ndofs);
        let c = self.local_monomial_coeffs(coeffs, t);
        let xt = self.local_point(t, bary);
        let div = monomial_divergences(self.order, xt, self.scale[t]);
        c.iter().zip(&div).map(|(cj, dj)| cj * dj).sum()
    }

    fn local_point(&self, t: usize, bary: &[f64; 3]) -> [f64; 2] {
        let verts = self.mesh.tri_vertices(t);
        let x = [
            bary[0] * verts[0][0] + bary[1] * verts[1][0] + bary[2] * verts[2][0],
            bary[0] * verts[0][1] + bary[1] * verts[1][1] + bary[2] * verts[2][1],
        ];
        [
            (x[0] - self.center[t][0]) / self.scale[t],
            (x[1] - self.center[t][1]) / self.scale[t],
        ]
    }

    /// Per-point values and divergences of all local basis functions on
    /// element `t` at barycentric point `bary`.
    pub(crate) fn basis_at(&self, t: usize, bary: &[f64; 3]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let ndl = self.ndl();
        let inv = &self.inv[t * ndl * ndl..(t + 1) * ndl * ndl];
        let xt = self.local_point(t, bary);
        let mono = monomial_values(self.order, xt);
        let mdiv = monomial_divergences(self.order, xt, self.scale[t]);
        let mut vals = vec![[0.0; 2]; ndl];
        let mut divs = vec![0.0; ndl];
        for alpha in 0..ndl {
            let mut v = [0.0; 2];
            let mut d = 0.0;
            for j in 0..ndl {
                let c = inv[j * ndl + alpha];
                v[0] += c * mono[j][0];
                v[1] += c * mono[j][1];
                d += c * mdiv[j];
            }
            vals[alpha] = v;
            divs[alpha] = d;
        }
        (vals, divs)
    }

    /// Apply every dof functional to a piecewise vector field given by an
    /// element-wise evaluator (used to interpolate fields with single-valued
    /// normal traces, e.g. embedding RT0 into RT1).
    pub fn dof_values_of(&self, field: impl Fn(usize, &[f64; 3]) -> [f64; 2]) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut out = vec![0.0; self.ndofs];
        for (e, edge) in mesh.edges.iter().enumerate() {
            let t = edge.triangles.0;
            let len = mesh.edge_length(e);
            let nu = mesh.edge_normal(e);
            for g in 0..2 {
                let tau = EDGE_T[g];
                let bary = bary_on_edge(mesh, t, e, tau);
                let f = field(t, &bary);
                let tr = len * EDGE_W[g] * (f[0] * nu[0] + f[1] * nu[1]);
                match self.order {
                    RtOrder::Rt0 => out[e] += tr,
                    RtOrder::Rt1 => {
                        out[2 * e] += tr;
                        out[2 * e + 1] += tr * (tau - 0.5);
                    }
                }
            }
        }
        if self.order == RtOrder::Rt1 {
            let rule = quadrature(2).expect("degree 2 rule exists");
            let ne = mesh.num_edges();
            for t in 0..mesh.num_triangles() {
                let area2 = 2.0 * mesh.triangle_area(t);
                for k in 0..rule.len() {
                    let f = field(t, &rule.points[k]);
                    let w = area2 * rule.weights[k];
                    out[2 * ne + 2 * t] += w * f[0];
                    out[2 * ne + 2 * t + 1] += w * f[1];
                }
            }
        }
        out
    }
}

/// Barycentric coordinates in triangle `t` of the point at parameter `tau`
/// along edge `e` (measured from the smaller-indexed endpoint).
pub(crate) fn bary_on_edge(mesh: &TriangleMesh, t: usize, e: usize, tau: f64) -> [f64; 3] {
    let (a, b) = mesh.edges[e].vertices;
    let tri = mesh.triangles[t];
    let mut bary = [0.0; 3];
    for i in 0..3 {
        if tri[i] == a {
            bary[i] = 1.0 - tau;
        } else if tri[i] == b {
            bary[i] = tau;
        }
    }
    bary
}

fn monomial_values(order: RtOrder, xt: [f64; 2]) -> Vec<[f64; 2]> {
    let [x, y] = xt;
    match order {
        RtOrder::Rt0 => vec![[1.0, 0.0], [0.0, 1.0], [x, y]],
        RtOrder::Rt1 => vec![
            [1.0, 0.0],
            [x, 0.0],
            [y, 0.0],
            [0.0, 1.0],
            [0.0, x],
            [0.0, y],
            [x * x, x * y],
            [x * y, y * y],
        ],
    }
}

fn monomial_divergences(order: RtOrder, xt: [f64; 2], scale: f64) -> Vec<f64> {
    let [x, y] = xt;
    match order {
        RtOrder::Rt0 => vec![0.0, 0.0, 2.0 / scale],
        RtOrder::Rt1 => vec![
            0.0,
            1.0 / scale,
            0.0,
            0.0,
            0.0,
            1.0 / scale,
            3.0 * x / scale,
            3.0 * y / scale,
        ],
    }
}

/// Invert a small row-major `n x n` matrix by Gauss-Jordan elimination with
/// partial pivoting; returns `None` on numerical singularity.
fn invert_small(a: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let d = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f != 0.0 {
                for k in 0..n {
                    a[r * n + k] -= f * a[col * n + k];
                    inv[r * n + k] -= f * inv[col * n + k];
                }
            }
        }
    }
    Some(inv)
}

/// Assemble the H(div) Galerkin matrix `∫ (div ψ_a div ψ_b + ψ_a · ψ_b)`.
/// The matrix is symmetric positive definite; no boundary condition is
/// imposed.
pub fn assemble_rt_system(space: &RtSpace, rule: &QuadratureRule) -> SparseSymmetricMatrix {
    let mesh = &space.mesh;
    let ndl = space.ndl();
    let mut triplets = Vec::with_capacity(mesh.num_triangles() * ndl * ndl);
    for t in 0..mesh.num_triangles() {
        let area2 = 2.0 * mesh.triangle_area(t);
        let mut local = vec![0.0; ndl * ndl];
        for k in 0..rule.len() {
            let (vals, divs) = space.basis_at(t, &rule.points[k]);
            let w = area2 * rule.weights[k];
            for a in 0..ndl {
                for b in 0..ndl {
                    local[a * ndl + b] += w
                        * (divs[a] * divs[b] + vals[a][0] * vals[b][0] + vals[a][1] * vals[b][1]);
                }
            }
        }
        let dofs = space.element_dofs(t);
        for a in 0..ndl {
            for b in 0..ndl {
                triplets.push((dofs[a], dofs[b], local[a * ndl + b]));
            }
        }
    }
    SparseSymmetricMatrix::from_triplets(space.ndofs, triplets)
        .expect("element dofs are in range by construction")
}

/// Assemble the dual right-hand side `-∫ g (div ψ)` with
/// `g = λ u - ζ u³ - (W - 1) u`; the inner product pairs `g` with the
/// divergence of the test field. `u` is a P1 coefficient vector on the same
/// mesh and `potential` evaluates `W`.
pub fn assemble_rt_rhs(
    space: &RtSpace,
    u: &[f64],
    lambda: f64,
    zeta: f64,
    potential: impl Fn([f64; 2]) -> f64,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let mesh = &space.mesh;
    if u.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} P1 coefficients, got {}",
            mesh.num_vertices(),
            u.len()
        )));
    }
    let ndl = space.ndl();
    let mut rhs = vec![0.0; space.ndofs];
    for t in 0..mesh.num_triangles() {
        let verts = mesh.tri_vertices(t);
        let area2 = 2.0 * mesh.triangle_area(t);
        let dofs = space.element_dofs(t);
        for k in 0..rule.len() {
            let bary = &rule.points[k];
            let uh = eval_p1(mesh, u, t, bary);
            let x = rule.point_in(k, &verts);
            let g = lambda * uh - zeta * uh * uh * uh - (potential(x) - 1.0) * uh;
            let (_, divs) = space.basis_at(t, bary);
            let w = area2 * rule.weights[k];
            for a in 0..ndl {
                rhs[dofs[a]] -= w * g * divs[a];
            }
        }
    }
    Ok(rhs)
}

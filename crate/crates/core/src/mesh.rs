//! Conforming triangulations of the preset domains with red and bisection
//! refinement.
//!
//! Meshes are immutable after construction; every refinement returns a new
//! mesh. Triangles are stored counterclockwise. Edges are stored as
//! `(min vertex, max vertex)` pairs; the unit normal of an edge is the 90°
//! counterclockwise rotation of its direction vector, and every sign
//! convention downstream (Raviart-Thomas degrees of freedom, jump residuals)
//! derives from that single choice.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Preset computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPreset {
    /// Unit square `(0,1)²`.
    UnitSquare,
    /// L-shaped domain `(-1,1)² \ [0,1)×(-1,0]` with a reentrant corner at
    /// the origin.
    LShape,
}

impl DomainPreset {
    pub fn area(self) -> f64 {
        match self {
            DomainPreset::UnitSquare => 1.0,
            DomainPreset::LShape => 3.0,
        }
    }

    /// Structured mesh with `n` subdivisions per unit side.
    pub fn mesh(self, n: usize) -> Result<TriangleMesh> {
        match self {
            DomainPreset::UnitSquare => unit_square_mesh(n),
            DomainPreset::LShape => l_shape_mesh(n),
        }
    }
}

impl FromStr for DomainPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unit_square" | "square" => Ok(DomainPreset::UnitSquare),
            "l_shape" | "lshape" => Ok(DomainPreset::LShape),
            other => Err(Error::Parse(format!("unknown domain preset `{other}`"))),
        }
    }
}

impl std::fmt::Display for DomainPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainPreset::UnitSquare => write!(f, "unit_square"),
            DomainPreset::LShape => write!(f, "l_shape"),
        }
    }
}

/// Mesh edge with incidence information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints, always `(min index, max index)`.
    pub vertices: (usize, usize),
    /// Incident triangles; interior edges have two.
    pub triangles: (usize, Option<usize>),
    pub boundary: bool,
}

/// Conforming triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    /// Vertex coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `triangle_edges[t][i]` is the global edge opposite local vertex `i`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Local vertex opposite the bisection refinement edge of each triangle.
    pub refine_edge: Vec<u8>,
    /// Refinement generation count.
    pub level: u32,
    /// Parent triangle (in the previous mesh) of each triangle; empty at
    /// level 0.
    pub lineage: Vec<usize>,
    /// Parent vertex pair of each vertex created by the last refinement;
    /// vertex `base + i` is the midpoint of `vertex_lineage[i]`, where
    /// `base = vertices.len() - vertex_lineage.len()`.
    pub vertex_lineage: Vec<(usize, usize)>,
}

impl TriangleMesh {
    fn build(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        refine_edge: Option<Vec<u8>>,
        level: u32,
        lineage: Vec<usize>,
        vertex_lineage: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];

        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} but mesh has {nv} vertices"
                    )));
                }
            }
            let [a, b, c] = *tri;
            if a == b || b == c || a == c {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            let area2 = cross(sub(vertices[b], vertices[a]), sub(vertices[c], vertices[a]));
            if area2 <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {}",
                    0.5 * area2
                )));
            }
            for i in 0..3 {
                let key = ordered(tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let e = match edge_index.get(&key) {
                    Some(&e) => {
                        if edges[e].triangles.1.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) is incident to more than two triangles",
                                key.0, key.1
                            )));
                        }
                        edges[e].triangles.1 = Some(t);
                        edges[e].boundary = false;
                        e
                    }
                    None => {
                        let e = edges.len();
                        edge_index.insert(key, e);
                        edges.push(Edge {
                            vertices: key,
                            triangles: (t, None),
                            boundary: true,
                        });
                        e
                    }
                };
                triangle_edges[t][i] = e;
            }
        }

        let refine_edge = match refine_edge {
            Some(r) => {
                debug_assert_eq!(r.len(), triangles.len());
                r
            }
            None => triangles
                .iter()
                .map(|tri| longest_edge_local(&vertices, tri))
                .collect(),
        };

        Ok(TriangleMesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            refine_edge,
            level,
            lineage,
            vertex_lineage,
        })
    }

    /// Construct from raw vertices and counterclockwise triangles (level 0).
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(vertices, triangles, None, 0, Vec::new(), Vec::new())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn tri_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.tri_vertices(t);
        0.5 * cross(sub(q, p), sub(r, p))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.tri_vertices(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Diameter of triangle `t` (its longest edge).
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [p, q, r] = self.tri_vertices(t);
        dist(p, q).max(dist(q, r)).max(dist(r, p))
    }

    /// Maximum triangle diameter `h`.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.triangle_diameter(t))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let v = self.tri_vertices(t);
            for i in 0..3 {
                let d1 = sub(v[(i + 1) % 3], v[i]);
                let d2 = sub(v[(i + 2) % 3], v[i]);
                let cos = dot(d1, d2) / (norm(d1) * norm(d2));
                min = min.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let (a, b) = self.edges[e].vertices;
        mid(self.vertices[a], self.vertices[b])
    }

    /// Unit normal of edge `e`: the 90° counterclockwise rotation of the
    /// direction from the smaller-indexed to the larger-indexed endpoint.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let (a, b) = self.edges[e].vertices;
        let d = sub(self.vertices[b], self.vertices[a]);
        let len = norm(d);
        [-d[1] / len, d[0] / len]
    }

    /// Sign with which the global edge normal points out of triangle `t`
    /// (`+1.0` outward, `-1.0` inward).
    pub fn edge_outward_sign(&self, t: usize, e: usize) -> f64 {
        let n = self.edge_normal(e);
        let to_edge = sub(self.edge_midpoint(e), self.centroid(t));
        if dot(n, to_edge) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `true` for vertices lying on the domain boundary.
    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.num_vertices()];
        for edge in &self.edges {
            if edge.boundary {
                flags[edge.vertices.0] = true;
                flags[edge.vertices.1] = true;
            }
        }
        flags
    }

    /// Check all structural invariants: positive areas, edge incidence,
    /// Euler characteristic `V - E + T = 1`, distinct vertices.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.num_triangles() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive area"
                )));
            }
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let incident = 1 + edge.triangles.1.is_some() as usize;
            if edge.boundary != (incident == 1) {
                return Err(Error::InvalidMesh(format!(
                    "edge {e} has inconsistent boundary flag"
                )));
            }
        }
        let euler =
            self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64;
        if euler != 1 {
            return Err(Error::InvalidMesh(format!(
                "Euler characteristic V - E + T = {euler}, expected 1"
            )));
        }
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if let Some(&j) = seen.get(&(v[0].to_bits(), v[1].to_bits())) {
                return Err(Error::InvalidMesh(format!(
                    "vertices {j} and {i} coincide at ({}, {})",
                    v[0], v[1]
                )));
            }
            seen.insert((v[0].to_bits(), v[1].to_bits()), i);
        }
        Ok(())
    }

    /// Interpolate vertex values from the parent mesh of the last refinement:
    /// original vertices keep their value, refinement midpoints take the
    /// average of their parent pair.
    pub fn prolong_vertex_values(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        let base = self.num_vertices() - self.vertex_lineage.len();
        if coarse.len() != base {
            return Err(Error::DimensionMismatch(format!(
                "prolongation expects {base} coarse values, got {}",
                coarse.len()
            )));
        }
        let mut fine = Vec::with_capacity(self.num_vertices());
        fine.extend_from_slice(coarse);
        for &(a, b) in &self.vertex_lineage {
            fine.push(0.5 * (fine[a] + fine[b]));
        }
        Ok(fine)
    }

    /// Plain-text serialization: `vertices <V> triangles <T>` header, then
    /// one `x y` line per vertex (17 significant digits) and one `i j k`
    /// line per triangle.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "vertices {} triangles {}",
            self.num_vertices(),
            self.num_triangles()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(out, "{:.16e} {:.16e}", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "vertices" || fields[2] != "triangles" {
            return Err(Error::Parse(format!("bad mesh header `{header}`")));
        }
        let nv: usize = fields[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad vertex count `{}`", fields[1])))?;
        let nt: usize = fields[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad triangle count `{}`", fields[3])))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated vertex block".into()))?;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad vertex line `{line}`")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad coordinate in `{line}`")))?;
            let y: f64 = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad vertex line `{line}`")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad coordinate in `{line}`")))?;
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated triangle block".into()))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Parse(format!("bad index in `{line}`")))
                })
                .collect::<Result<_>>()?;
            if idx.len() != 3 {
                return Err(Error::Parse(format!("bad triangle line `{line}`")));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        Self::from_parts(vertices, triangles)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Structured criss-cross mesh of the unit square with `n` subdivisions per
/// side: `(n+1)²` vertices, `2n²` triangles, each grid cell split along the
/// diagonal toward the upper-right corner.
pub fn unit_square_mesh(n: usize) -> Result<TriangleMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "unit_square_mesh requires n >= 1".into(),
        ));
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::from_parts(vertices, triangles)
}

/// Structured mesh of the L-shaped domain `(-1,1)² \ [0,1)×(-1,0]` with `n`
/// subdivisions per unit side: `6n²` triangles covering the three unit
/// squares of the L.
pub fn l_shape_mesh(n: usize) -> Result<TriangleMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("l_shape_mesh requires n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let m = 2 * n; // grid cells per side of the bounding square
    // Grid vertex -> mesh vertex, skipping vertices used only by removed cells.
    let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
    let gid = |i: usize, j: usize| j * (m + 1) + i;
    let cell_kept = |i: usize, j: usize| {
        // Cell (i, j) spans [x, x+h] x [y, y+h]; removed quadrant is x >= 0, y <= 0.
        !(i >= n && j < n)
    };
    let mut vertices = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            let used = (i > 0 && j > 0 && cell_kept(i - 1, j - 1))
                || (i < m && j > 0 && cell_kept(i, j - 1))
                || (i > 0 && j < m && cell_kept(i - 1, j))
                || (i < m && j < m && cell_kept(i, j));
            if used {
                index[gid(i, j)] = vertices.len();
                vertices.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
            }
        }
    }
    let mut triangles = Vec::with_capacity(6 * n * n);
    for j in 0..m {
        for i in 0..m {
            if !cell_kept(i, j) {
                continue;
            }
            let (a, b, c, d) = (
                index[gid(i, j)],
                index[gid(i + 1, j)],
                index[gid(i + 1, j + 1)],
                index[gid(i, j + 1)],
            );
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::from_parts(vertices, triangles)
}

/// Regular (red) refinement: every triangle is replaced by the four similar
/// children obtained by connecting its edge midpoints.
pub fn refine_red(mesh: &TriangleMesh) -> TriangleMesh {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    let mut vertex_lineage = Vec::with_capacity(mesh.num_edges());
    for edge in &mesh.edges {
        vertices.push(mid(
            mesh.vertices[edge.vertices.0],
            mesh.vertices[edge.vertices.1],
        ));
        vertex_lineage.push(edge.vertices);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut lineage = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        // Midpoint of the edge opposite local vertex i.
        let m_bc = nv + mesh.triangle_edges[t][0];
        let m_ca = nv + mesh.triangle_edges[t][1];
        let m_ab = nv + mesh.triangle_edges[t][2];
        triangles.push([a, m_ab, m_ca]);
        triangles.push([b, m_bc, m_ab]);
        triangles.push([c, m_ca, m_bc]);
        triangles.push([m_ab, m_bc, m_ca]);
        lineage.extend_from_slice(&[t, t, t, t]);
    }
    TriangleMesh::build(
        vertices,
        triangles,
        None,
        mesh.level + 1,
        lineage,
        vertex_lineage,
    )
    .expect("red refinement of a valid mesh is valid")
}

/// Newest-vertex bisection of the marked triangles plus the conforming
/// closure. An empty marked set returns the input unchanged.
pub fn refine_bisect(mesh: &TriangleMesh, marked: &[usize]) -> Result<TriangleMesh> {
    let nt = mesh.num_triangles();
    for &t in marked {
        if t >= nt {
            return Err(Error::TriangleOutOfRange { index: t, count: nt });
        }
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    // Edges to be cut: refinement edges of marked triangles, closed so that
    // any triangle with a cut edge also has its refinement edge cut.
    let mut cut = vec![false; mesh.num_edges()];
    for &t in marked {
        cut[mesh.triangle_edges[t][mesh.refine_edge[t] as usize]] = true;
    }
    loop {
        let mut changed = false;
        for t in 0..nt {
            let re = mesh.triangle_edges[t][mesh.refine_edge[t] as usize];
            if !cut[re] && mesh.triangle_edges[t].iter().any(|&e| cut[e]) {
                cut[re] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut vertex_lineage = Vec::new();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if cut[e] {
            midpoint.insert(edge.vertices, vertices.len());
            vertices.push(mesh.edge_midpoint(e));
            vertex_lineage.push(edge.vertices);
        }
    }

    let mut triangles = Vec::new();
    let mut refine_edge = Vec::new();
    let mut lineage = Vec::new();
    // Split (p, q, r) with refinement edge (q, r); children peak at the new
    // midpoint and inherit the remaining original edges as refinement edges,
    // so the recursion stops after at most two levels.
    fn split(
        p: usize,
        q: usize,
        r: usize,
        parent: usize,
        midpoint: &HashMap<(usize, usize), usize>,
        triangles: &mut Vec<[usize; 3]>,
        refine_edge: &mut Vec<u8>,
        lineage: &mut Vec<usize>,
    ) {
        match midpoint.get(&ordered(q, r)) {
            Some(&m) => {
                split(m, p, q, parent, midpoint, triangles, refine_edge, lineage);
                split(m, r, p, parent, midpoint, triangles, refine_edge, lineage);
            }
            None => {
                triangles.push([p, q, r]);
                refine_edge.push(0);
                lineage.push(parent);
            }
        }
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let k = mesh.refine_edge[t] as usize;
        let (p, q, r) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
        split(
            p,
            q,
            r,
            t,
            &midpoint,
            &mut triangles,
            &mut refine_edge,
            &mut lineage,
        );
    }

    TriangleMesh::build(
        vertices,
        triangles,
        Some(refine_edge),
        mesh.level + 1,
        lineage,
        vertex_lineage,
    )
}

fn longest_edge_local(vertices: &[[f64; 2]], tri: &[usize; 3]) -> u8 {
    let mut best = 0u8;
    let mut best_len = -1.0;
    for i in 0..3 {
        let len = dist(
            vertices[tri[(i + 1) % 3]],
            vertices[tri[(i + 2) % 3]],
        );
        if len > best_len {
            best_len = len;
            best = i as u8;
        }
    }
    best
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

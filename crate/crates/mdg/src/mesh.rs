//! Space-time slab meshes of quadrilaterals: fixed bottom nodes, movable
//! top-node abscissae, coincident-node fans at singular points, and face
//! geometry.
//!
//! A slab spans one time interval [t_n, t_n+1]. Element node ordering is
//! counterclockwise (bottom-left, bottom-right, top-right, top-left). The
//! Jacobian determinant of the bilinear map may be zero or negative; element
//! validity is diagnosed, never enforced.

use crate::physics::SpaceTimeNormal;
use thiserror::Error;

/// Relative tolerance deciding when two abscissae are "the same node".
pub const COINCIDENCE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("bottom abscissae must be sorted and strictly increasing away from the fan point")]
    UnsortedInput,
    #[error("need at least two bottom abscissae")]
    TooFewNodes,
    #[error("slab height must be positive (t_top = {t_top}, t_bottom = {t_bottom})")]
    EmptyTimeInterval { t_bottom: f64, t_top: f64 },
    #[error("fan point {0} lies outside the domain interior")]
    FanOutsideDomain(f64),
    #[error("hand-off requires an untangled top row (node {0} is out of order)")]
    TangledTopRow(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub x: f64,
    pub t: f64,
}

/// Interior space-time face between two adjacent elements, oriented from the
/// bottom node to the top node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorFace {
    pub left_elem: usize,
    pub right_elem: usize,
    pub bottom_node: usize,
    pub top_node: usize,
}

/// One space-time slab of quadrilaterals.
///
/// Nodes 0..n_bottom are the bottom row (left to right), the rest are the top
/// row. Element e uses bottom nodes (e, e+1) and top nodes (n_bottom+e+1,
/// n_bottom+e). Stored top coordinates are the initial seed; the solver moves
/// them through [`SlabMesh::with_top_positions`] or a geometry view.
#[derive(Clone, Debug)]
pub struct SlabMesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<[usize; 4]>,
    pub interior_faces: Vec<InteriorFace>,
    pub n_bottom: usize,
    pub t_bottom: f64,
    pub t_top: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl SlabMesh {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_top_nodes(&self) -> usize {
        self.nodes.len() - self.n_bottom
    }

    pub fn domain_width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn slab_height(&self) -> f64 {
        self.t_top - self.t_bottom
    }

    /// Top-row node index for top position k (0 = left domain boundary).
    pub fn top_node(&self, k: usize) -> usize {
        self.n_bottom + k
    }

    pub fn top_positions(&self) -> Vec<f64> {
        self.nodes[self.n_bottom..].iter().map(|n| n.x).collect()
    }

    pub fn bottom_positions(&self) -> Vec<f64> {
        self.nodes[..self.n_bottom].iter().map(|n| n.x).collect()
    }

    /// A copy of the mesh with the full top row replaced.
    pub fn with_top_positions(&self, top_x: &[f64]) -> SlabMesh {
        assert_eq!(top_x.len(), self.num_top_nodes());
        let mut mesh = self.clone();
        for (node, &x) in mesh.nodes[self.n_bottom..].iter_mut().zip(top_x) {
            node.x = x;
        }
        mesh
    }

    /// Corner coordinates of an element in CCW order.
    pub fn element_coords(&self, e: usize) -> QuadCoords {
        let idx = self.elements[e];
        QuadCoords::new(
            [self.nodes[idx[0]].x, self.nodes[idx[1]].x, self.nodes[idx[2]].x, self.nodes[idx[3]].x],
            [self.nodes[idx[0]].t, self.nodes[idx[1]].t, self.nodes[idx[2]].t, self.nodes[idx[3]].t],
        )
    }

    /// Signed area of the whole slab by 2x2 Gauss quadrature of det J (exact
    /// for bilinear maps).
    pub fn signed_area(&self) -> f64 {
        let rule = crate::dg_space::gauss_rule_quad(2);
        let mut total = 0.0;
        for e in 0..self.num_elements() {
            let coords = self.element_coords(e);
            for (q, &[xi, eta]) in rule.points.iter().enumerate() {
                total += rule.weights[q] * coords.jacobian_det(xi, eta);
            }
        }
        total
    }

    /// Plain-text dump: node table (id, x, t) then element table (4 node ids).
    pub fn write_dump<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes {}", self.nodes.len())?;
        writeln!(w, "# id x t")?;
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(w, "{} {:.17e} {:.17e}", i, n.x, n.t)?;
        }
        writeln!(w, "# elements {}", self.elements.len())?;
        writeln!(w, "# bl br tr tl")?;
        for e in &self.elements {
            writeln!(w, "{} {} {} {}", e[0], e[1], e[2], e[3])?;
        }
        Ok(())
    }
}

/// Identifies which top nodes are geometric unknowns. The two domain-endpoint
/// abscissae stay fixed; every interior top node is movable.
#[derive(Clone, Debug)]
pub struct GeometryDofMap {
    /// Mesh node index per geometry unknown, in left-to-right order.
    pub movable: Vec<usize>,
}

impl GeometryDofMap {
    pub fn new(mesh: &SlabMesh) -> Self {
        let n_top = mesh.num_top_nodes();
        let movable = (1..n_top - 1).map(|k| mesh.top_node(k)).collect();
        Self { movable }
    }

    pub fn num_movable(&self) -> usize {
        self.movable.len()
    }
}

/// Builds a slab over `[t_bottom, t_top]` from sorted bottom abscissae, with
/// an optional fan of `count` coincident bottom nodes at `x_f`, each spawning
/// a zero-bottom-width element opening toward the top.
///
/// Top nodes are seeded directly above an evenly respaced set of abscissae
/// spanning the domain (including the fan's extra nodes).
pub fn build_slab(
    x_bottom: &[f64],
    t_bottom: f64,
    t_top: f64,
    fan: Option<(f64, usize)>,
) -> Result<SlabMesh, MeshError> {
    if x_bottom.len() < 2 {
        return Err(MeshError::TooFewNodes);
    }
    if !(t_top > t_bottom) {
        return Err(MeshError::EmptyTimeInterval { t_bottom, t_top });
    }
    if x_bottom.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MeshError::UnsortedInput);
    }
    let (x_lo, x_hi) = (x_bottom[0], *x_bottom.last().unwrap());

    let mut abscissae: Vec<f64> = x_bottom.to_vec();
    if let Some((x_f, count)) = fan {
        if !(x_f > x_lo && x_f < x_hi) {
            return Err(MeshError::FanOutsideDomain(x_f));
        }
        let pos = abscissae.partition_point(|&x| x <= x_f);
        for _ in 0..count {
            abscissae.insert(pos, x_f);
        }
    }

    let n_nodes = abscissae.len();
    let mut nodes: Vec<Node> = abscissae.iter().map(|&x| Node { x, t: t_bottom }).collect();
    let width = x_hi - x_lo;
    for k in 0..n_nodes {
        let x = x_lo + width * k as f64 / (n_nodes - 1) as f64;
        nodes.push(Node { x, t: t_top });
    }

    Ok(assemble_topology(nodes, n_nodes, t_bottom, t_top, x_lo, x_hi))
}

fn assemble_topology(
    nodes: Vec<Node>,
    n_bottom: usize,
    t_bottom: f64,
    t_top: f64,
    x_lo: f64,
    x_hi: f64,
) -> SlabMesh {
    let n_elem = n_bottom - 1;
    let mut elements = Vec::with_capacity(n_elem);
    for e in 0..n_elem {
        elements.push([e, e + 1, n_bottom + e + 1, n_bottom + e]);
    }
    let mut interior_faces = Vec::with_capacity(n_elem.saturating_sub(1));
    for k in 1..n_elem {
        interior_faces.push(InteriorFace {
            left_elem: k - 1,
            right_elem: k,
            bottom_node: k,
            top_node: n_bottom + k,
        });
    }
    SlabMesh { nodes, elements, interior_faces, n_bottom, t_bottom, t_top, x_lo, x_hi }
}

/// Rebuilds a mesh from explicit node rows (used by mesh management).
pub fn mesh_from_rows(
    bottom: &[(f64, f64)],
    top: &[(f64, f64)],
    x_lo: f64,
    x_hi: f64,
) -> SlabMesh {
    assert_eq!(bottom.len(), top.len());
    let t_bottom = bottom[0].1;
    let t_top = top[0].1;
    let mut nodes: Vec<Node> = bottom.iter().map(|&(x, t)| Node { x, t }).collect();
    nodes.extend(top.iter().map(|&(x, t)| Node { x, t }));
    assemble_topology(nodes, bottom.len(), t_bottom, t_top, x_lo, x_hi)
}

/// Starts the next slab in a time-marching sequence: the converged top row
/// becomes the new bottom row, and the new top row is seeded directly above
/// it.
pub fn sequential_slab(prev: &SlabMesh, new_t_top: f64) -> Result<SlabMesh, MeshError> {
    if !(new_t_top > prev.t_top) {
        return Err(MeshError::EmptyTimeInterval { t_bottom: prev.t_top, t_top: new_t_top });
    }
    let tops = prev.top_positions();
    let tol = COINCIDENCE_REL_TOL * prev.domain_width();
    for (k, w) in tops.windows(2).enumerate() {
        if w[1] < w[0] - tol {
            return Err(MeshError::TangledTopRow(k + 1));
        }
    }
    let bottom: Vec<(f64, f64)> = tops.iter().map(|&x| (x, prev.t_top)).collect();
    let top: Vec<(f64, f64)> = tops.iter().map(|&x| (x, new_t_top)).collect();
    Ok(mesh_from_rows(&bottom, &top, prev.x_lo, prev.x_hi))
}

/// Corner coordinates of one quadrilateral, CCW from bottom-left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadCoords {
    pub x: [f64; 4],
    pub t: [f64; 4],
}

impl QuadCoords {
    pub fn new(x: [f64; 4], t: [f64; 4]) -> Self {
        Self { x, t }
    }

    /// Bilinear interpolation of the corner coordinates.
    pub fn map(&self, xi: f64, eta: f64) -> (f64, f64) {
        let shape = [
            0.25 * (1.0 - xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 + eta),
            0.25 * (1.0 - xi) * (1.0 + eta),
        ];
        let mut x = 0.0;
        let mut t = 0.0;
        for a in 0..4 {
            x += shape[a] * self.x[a];
            t += shape[a] * self.t[a];
        }
        (x, t)
    }

    /// Jacobian of the bilinear map: [[dx/dxi, dx/deta], [dt/dxi, dt/deta]].
    pub fn jacobian(&self, xi: f64, eta: f64) -> [[f64; 2]; 2] {
        let dxi = [
            -0.25 * (1.0 - eta),
            0.25 * (1.0 - eta),
            0.25 * (1.0 + eta),
            -0.25 * (1.0 + eta),
        ];
        let deta = [
            -0.25 * (1.0 - xi),
            -0.25 * (1.0 + xi),
            0.25 * (1.0 + xi),
            0.25 * (1.0 - xi),
        ];
        let mut jac = [[0.0; 2]; 2];
        for a in 0..4 {
            jac[0][0] += dxi[a] * self.x[a];
            jac[0][1] += deta[a] * self.x[a];
            jac[1][0] += dxi[a] * self.t[a];
            jac[1][1] += deta[a] * self.t[a];
        }
        jac
    }

    /// Signed determinant of the map gradient; no sign restriction.
    pub fn jacobian_det(&self, xi: f64, eta: f64) -> f64 {
        let j = self.jacobian(xi, eta);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// det(J) times the physical gradient of a reference gradient: the
    /// adjugate-transpose contraction, finite even where det J = 0.
    pub fn adjugate_grad(&self, xi: f64, eta: f64, ref_grad: &[f64; 2]) -> [f64; 2] {
        let j = self.jacobian(xi, eta);
        [
            j[1][1] * ref_grad[0] - j[1][0] * ref_grad[1],
            -j[0][1] * ref_grad[0] + j[0][0] * ref_grad[1],
        ]
    }
}

/// Geometry of an oriented face from a bottom point to a top point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceGeometry {
    /// Unit normal pointing from the left element to the right element; zero
    /// when the face is degenerate.
    pub normal: SpaceTimeNormal,
    pub length: f64,
    pub degenerate: bool,
}

/// Face geometry for a segment from (x_bottom, t_bottom) to (x_top, t_top).
/// The unnormalized normal is (t_top - t_bottom, -(x_top - x_bottom)).
pub fn face_geometry(x_bottom: f64, t_bottom: f64, x_top: f64, t_top: f64) -> FaceGeometry {
    let dx = x_top - x_bottom;
    let dt = t_top - t_bottom;
    let length = dx.hypot(dt);
    if length == 0.0 {
        return FaceGeometry { normal: SpaceTimeNormal::new(0.0, 0.0), length: 0.0, degenerate: true };
    }
    FaceGeometry {
        normal: SpaceTimeNormal::new(dt / length, -dx / length),
        length,
        degenerate: false,
    }
}

//! Assembly of the over-determined residual: per-element space-time DG
//! residuals plus nodal interface-conservation residuals tested with
//! continuous hat functions on the interior face skeleton, both as functions
//! of the flow coefficients and the movable top-node abscissae.
//!
//! Unknown layout: all flow coefficients first (element-major, then basis
//! function, then component), then one geometry unknown per movable top node
//! in left-to-right order. Residual layout: one N*m block per element, then
//! one m block per movable top node.
//!
//! Flux rules: time-slab faces are one-sided (the past trace below, the
//! element's own trace above — causality), interior space-time faces take the
//! average flux, domain-boundary faces average the interior trace with the
//! prescribed exterior state. No Riemann-solver flux anywhere.

use crate::dg_space::{gauss_rule_1d, gauss_rule_quad, Basis, QuadratureRule1d, QuadratureRule2d};
use crate::mesh::{GeometryDofMap, QuadCoords, SlabMesh};
use crate::physics::{State, System};
use nalgebra::DMatrix;
use std::cell::Cell;

/// Finite-difference step scale for Jacobian columns.
const FD_EPSILON: f64 = 1e-7;

/// Index bookkeeping for the unknown and residual vectors.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub n_elems: usize,
    pub n_funcs: usize,
    pub n_comp: usize,
    pub n_geom: usize,
}

impl Layout {
    pub fn flow_len(&self) -> usize {
        self.n_elems * self.n_funcs * self.n_comp
    }

    pub fn num_unknowns(&self) -> usize {
        self.flow_len() + self.n_geom
    }

    pub fn num_residuals(&self) -> usize {
        self.flow_len() + self.n_geom * self.n_comp
    }

    pub fn flow_index(&self, e: usize, i: usize, c: usize) -> usize {
        (e * self.n_funcs + i) * self.n_comp + c
    }

    pub fn geom_index(&self, j: usize) -> usize {
        self.flow_len() + j
    }

    pub fn dg_block_start(&self, e: usize) -> usize {
        e * self.n_funcs * self.n_comp
    }

    pub fn ice_block_start(&self, j: usize) -> usize {
        self.flow_len() + j * self.n_comp
    }
}

/// Upwind data for the slab-bottom faces.
#[derive(Clone, Debug)]
pub enum PastTrace {
    /// Piecewise-constant initial condition with one jump.
    InitialCondition { x_interface: f64, left: State, right: State },
    /// Top-edge traces of the previous slab, one coefficient block per
    /// element (same basis, element-for-element hand-off).
    SlabTrace { coeffs: Vec<f64> },
}

const EDGE_BOTTOM: usize = 0;
const EDGE_RIGHT: usize = 1;
const EDGE_TOP: usize = 2;
const EDGE_LEFT: usize = 3;

/// Basis values tabulated at the quadrature points of the volume rule and of
/// each local edge.
struct Tables {
    vol: QuadratureRule2d,
    face: QuadratureRule1d,
    vol_values: Vec<Vec<f64>>,
    vol_grads: Vec<Vec<[f64; 2]>>,
    edge_values: [Vec<Vec<f64>>; 4],
}

impl Tables {
    fn new(basis: &Basis) -> Self {
        let p = basis.degree();
        // Volume rule exact one degree beyond 2p to absorb the bilinear-map
        // Jacobian; face rule exact to 2p+1.
        let vol = gauss_rule_quad(p + 2);
        let face = gauss_rule_1d(p + 1);
        let vol_values = vol.points.iter().map(|&[xi, eta]| basis.eval(xi, eta)).collect();
        let vol_grads = vol.points.iter().map(|&[xi, eta]| basis.eval_grad(xi, eta)).collect();
        let edge_point = |edge: usize, s: f64| match edge {
            EDGE_BOTTOM => (s, -1.0),
            EDGE_RIGHT => (1.0, s),
            EDGE_TOP => (s, 1.0),
            EDGE_LEFT => (-1.0, s),
            _ => unreachable!(),
        };
        let edge_values = std::array::from_fn(|edge| {
            face.points
                .iter()
                .map(|&s| {
                    let (xi, eta) = edge_point(edge, s);
                    basis.eval(xi, eta)
                })
                .collect()
        });
        Tables { vol, face, vol_values, vol_grads, edge_values }
    }
}

/// Residual and Jacobian assembler for one space-time slab.
pub struct Assembler {
    system: System,
    mesh: SlabMesh,
    basis: Basis,
    dof_map: GeometryDofMap,
    past: PastTrace,
    exterior_left: State,
    exterior_right: State,
    layout: Layout,
    tables: Tables,
    negative_events: Cell<usize>,
    negative_since_poll: Cell<bool>,
}

impl Assembler {
    pub fn new(
        system: System,
        mesh: SlabMesh,
        basis: Basis,
        past: PastTrace,
        exterior_left: State,
        exterior_right: State,
    ) -> Self {
        let dof_map = GeometryDofMap::new(&mesh);
        let layout = Layout {
            n_elems: mesh.num_elements(),
            n_funcs: basis.num_funcs(),
            n_comp: system.num_components(),
            n_geom: dof_map.num_movable(),
        };
        assert!(layout.num_residuals() >= layout.num_unknowns());
        let tables = Tables::new(&basis);
        Assembler {
            system,
            mesh,
            basis,
            dof_map,
            past,
            exterior_left,
            exterior_right,
            layout,
            tables,
            negative_events: Cell::new(0),
            negative_since_poll: Cell::new(false),
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mesh(&self) -> &SlabMesh {
        &self.mesh
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn dof_map(&self) -> &GeometryDofMap {
        &self.dof_map
    }

    /// Total count of quadrature-point states with nonpositive density or
    /// pressure seen so far (Euler only; diagnostic, never fatal).
    pub fn negative_state_events(&self) -> usize {
        self.negative_events.get()
    }

    /// True if a negative state was seen since the last poll.
    pub fn poll_negative_flag(&self) -> bool {
        self.negative_since_poll.replace(false)
    }

    fn observe_state(&self, s: &State) {
        if let System::Euler { gamma } = self.system {
            let rho = s[0];
            let p = (gamma - 1.0) * (s[2] - 0.5 * s[1] * s[1] / rho);
            if !(rho > 0.0) || !(p > 0.0) {
                self.negative_events.set(self.negative_events.get() + 1);
                self.negative_since_poll.set(true);
            }
        }
    }

    /// Abscissa of top-row position k under the current unknowns.
    fn top_x(&self, k: usize, u: &[f64]) -> f64 {
        let n_top = self.mesh.num_top_nodes();
        if k == 0 || k == n_top - 1 {
            self.mesh.nodes[self.mesh.top_node(k)].x
        } else {
            u[self.layout.geom_index(k - 1)]
        }
    }

    pub fn element_coords(&self, e: usize, u: &[f64]) -> QuadCoords {
        let b0 = self.mesh.nodes[e];
        let b1 = self.mesh.nodes[e + 1];
        let xt_l = self.top_x(e, u);
        let xt_r = self.top_x(e + 1, u);
        QuadCoords::new([b0.x, b1.x, xt_r, xt_l], [b0.t, b1.t, self.mesh.t_top, self.mesh.t_top])
    }

    fn flow_block<'a>(&self, e: usize, u: &'a [f64]) -> &'a [f64] {
        let start = self.layout.dg_block_start(e);
        &u[start..start + self.layout.n_funcs * self.layout.n_comp]
    }

    fn eval_block(&self, block: &[f64], values: &[f64]) -> State {
        crate::dg_space::eval_coeffs(block, values, self.layout.n_comp)
    }

    fn past_state(&self, e: usize, s: f64, x: f64) -> State {
        match &self.past {
            PastTrace::InitialCondition { x_interface, left, right } => {
                if x < *x_interface {
                    *left
                } else {
                    *right
                }
            }
            PastTrace::SlabTrace { coeffs } => {
                let nm = self.layout.n_funcs * self.layout.n_comp;
                let block = &coeffs[e * nm..(e + 1) * nm];
                let values = self.basis.eval(s, 1.0);
                self.eval_block(block, &values)
            }
        }
    }

    /// Space-time DG residual of one element: N*m entries.
    pub fn dg_element_residual(&self, e: usize, u: &[f64], out: &mut [f64]) {
        let n = self.layout.n_funcs;
        let m = self.layout.n_comp;
        debug_assert_eq!(out.len(), n * m);
        out.fill(0.0);
        let coords = self.element_coords(e, u);
        let block = self.flow_block(e, u);
        let dt = self.mesh.slab_height();

        // Volume term -int F . grad(B) dOmega with the adjugate contraction:
        // det J cancels, so degenerate points stay finite.
        for (q, point) in self.tables.vol.points.iter().enumerate() {
            let w = self.tables.vol.weights[q];
            let state = self.eval_block(block, &self.tables.vol_values[q]);
            self.observe_state(&state);
            let fx = self.system.physical_flux(&state);
            for i in 0..n {
                let g = coords.adjugate_grad(point[0], point[1], &self.tables.vol_grads[q][i]);
                let bi = i * m;
                for c in 0..m {
                    out[bi + c] -= w * (fx[c] * g[0] + state[c] * g[1]);
                }
            }
        }

        // Bottom face: upwind from the past trace; zero-length fan edges
        // contribute nothing.
        let x_bl = self.mesh.nodes[e].x;
        let x_br = self.mesh.nodes[e + 1].x;
        let half_b = 0.5 * (x_br - x_bl);
        if half_b != 0.0 {
            let mid = 0.5 * (x_bl + x_br);
            for (q, &s) in self.tables.face.points.iter().enumerate() {
                let w = self.tables.face.weights[q];
                let past = self.past_state(e, s, mid + s * half_b);
                let values = &self.tables.edge_values[EDGE_BOTTOM][q];
                for i in 0..n {
                    let bi = i * m;
                    for c in 0..m {
                        out[bi + c] -= w * past[c] * values[i] * half_b;
                    }
                }
            }
        }

        // Top face: the element's own trace (one-sided toward the future).
        let half_t = 0.5 * (self.top_x(e + 1, u) - self.top_x(e, u));
        if half_t != 0.0 {
            for (q, _) in self.tables.face.points.iter().enumerate() {
                let w = self.tables.face.weights[q];
                let values = &self.tables.edge_values[EDGE_TOP][q];
                let own = self.eval_block(block, values);
                self.observe_state(&own);
                for i in 0..n {
                    let bi = i * m;
                    for c in 0..m {
                        out[bi + c] += w * own[c] * values[i] * half_t;
                    }
                }
            }
        }

        // Left face: average flux with the neighbor trace or the exterior
        // state. Contribution [-fhat*dt + Uhat*dx]/2 per unit parameter.
        {
            let dx = self.top_x(e, u) - self.mesh.nodes[e].x;
            for q in 0..self.tables.face.points.len() {
                let w = self.tables.face.weights[q];
                let own_values = &self.tables.edge_values[EDGE_LEFT][q];
                let own = self.eval_block(self.flow_block(e, u), own_values);
                self.observe_state(&own);
                let other = if e == 0 {
                    self.exterior_left
                } else {
                    let nb = self.eval_block(self.flow_block(e - 1, u), &self.tables.edge_values[EDGE_RIGHT][q]);
                    self.observe_state(&nb);
                    nb
                };
                let f_hat = (self.system.physical_flux(&own) + self.system.physical_flux(&other)) * 0.5;
                let u_hat = (own + other) * 0.5;
                for i in 0..n {
                    let bi = i * m;
                    for c in 0..m {
                        out[bi + c] += w * 0.5 * (-f_hat[c] * dt + u_hat[c] * dx) * own_values[i];
                    }
                }
            }
        }

        // Right face, mirrored: [fhat*dt - Uhat*dx]/2.
        {
            let dx = self.top_x(e + 1, u) - self.mesh.nodes[e + 1].x;
            let last = self.layout.n_elems - 1;
            for q in 0..self.tables.face.points.len() {
                let w = self.tables.face.weights[q];
                let own_values = &self.tables.edge_values[EDGE_RIGHT][q];
                let own = self.eval_block(self.flow_block(e, u), own_values);
                let other = if e == last {
                    self.exterior_right
                } else {
                    self.eval_block(self.flow_block(e + 1, u), &self.tables.edge_values[EDGE_LEFT][q])
                };
                let f_hat = (self.system.physical_flux(&own) + self.system.physical_flux(&other)) * 0.5;
                let u_hat = (own + other) * 0.5;
                for i in 0..n {
                    let bi = i * m;
                    for c in 0..m {
                        out[bi + c] += w * 0.5 * (f_hat[c] * dt - u_hat[c] * dx) * own_values[i];
                    }
                }
            }
        }
    }

    /// Interface-conservation residual of the movable top node j: the flux
    /// jump across interior face j weighted by the hat rising from the fixed
    /// bottom node to the top node. Time-slab faces are excluded by
    /// construction.
    pub fn ice_node_residual(&self, j: usize, u: &[f64], out: &mut [f64]) {
        let m = self.layout.n_comp;
        debug_assert_eq!(out.len(), m);
        out.fill(0.0);
        let face = self.mesh.interior_faces[j];
        let dt = self.mesh.slab_height();
        let dx = self.top_x(j + 1, u) - self.mesh.nodes[face.bottom_node].x;
        let left_block = self.flow_block(face.left_elem, u);
        let right_block = self.flow_block(face.right_elem, u);
        for (q, &s) in self.tables.face.points.iter().enumerate() {
            let w = self.tables.face.weights[q];
            let left = self.eval_block(left_block, &self.tables.edge_values[EDGE_RIGHT][q]);
            let right = self.eval_block(right_block, &self.tables.edge_values[EDGE_LEFT][q]);
            let df = self.system.physical_flux(&right) - self.system.physical_flux(&left);
            let du = right - left;
            let hat = 0.5 * (1.0 + s);
            for c in 0..m {
                out[c] += w * hat * 0.5 * (df[c] * dt - du[c] * dx);
            }
        }
    }

    /// Full residual vector: DG blocks then ICE blocks.
    pub fn assemble_residual(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.layout.num_unknowns());
        debug_assert_eq!(out.len(), self.layout.num_residuals());
        let nm = self.layout.n_funcs * self.layout.n_comp;
        for e in 0..self.layout.n_elems {
            let start = self.layout.dg_block_start(e);
            self.dg_element_residual(e, u, &mut out[start..start + nm]);
        }
        let m = self.layout.n_comp;
        for j in 0..self.layout.n_geom {
            let start = self.layout.ice_block_start(j);
            self.ice_node_residual(j, u, &mut out[start..start + m]);
        }
    }

    /// Residual row blocks affected by unknown column `j`:
    /// (element indices, interior-face indices).
    pub fn column_dependencies(&self, col: usize) -> (Vec<usize>, Vec<usize>) {
        let n_elems = self.layout.n_elems;
        let n_faces = self.layout.n_geom;
        if col < self.layout.flow_len() {
            let e = col / (self.layout.n_funcs * self.layout.n_comp);
            let mut elems = Vec::with_capacity(3);
            if e > 0 {
                elems.push(e - 1);
            }
            elems.push(e);
            if e + 1 < n_elems {
                elems.push(e + 1);
            }
            let mut faces = Vec::with_capacity(2);
            if e >= 1 && e - 1 < n_faces {
                faces.push(e - 1);
            }
            if e < n_faces {
                faces.push(e);
            }
            (elems, faces)
        } else {
            let j = col - self.layout.flow_len();
            (vec![j, j + 1], vec![j])
        }
    }

    /// Sparse-pattern forward-difference Jacobian (stored dense). Column j is
    /// recomputed only on the blocks its unknown touches.
    pub fn assemble_jacobian(&self, u: &[f64], base: &[f64]) -> DMatrix<f64> {
        let n = self.layout.num_unknowns();
        let m_total = self.layout.num_residuals();
        let nm = self.layout.n_funcs * self.layout.n_comp;
        let m = self.layout.n_comp;
        let mut jac = DMatrix::zeros(m_total, n);
        let mut pert = u.to_vec();
        let mut block = vec![0.0; nm];
        for col in 0..n {
            let h = FD_EPSILON * u[col].abs().max(1.0);
            pert[col] = u[col] + h;
            let (elems, faces) = self.column_dependencies(col);
            for &e in &elems {
                let start = self.layout.dg_block_start(e);
                self.dg_element_residual(e, &pert, &mut block[..nm]);
                for r in 0..nm {
                    jac[(start + r, col)] = (block[r] - base[start + r]) / h;
                }
            }
            for &f in &faces {
                let start = self.layout.ice_block_start(f);
                self.ice_node_residual(f, &pert, &mut block[..m]);
                for r in 0..m {
                    jac[(start + r, col)] = (block[r] - base[start + r]) / h;
                }
            }
            pert[col] = u[col];
        }
        jac
    }

    /// Dense forward-difference Jacobian recomputing the full residual per
    /// column. Verification only; O(n) full assemblies.
    pub fn dense_fd_jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.layout.num_unknowns();
        let m_total = self.layout.num_residuals();
        let mut base = vec![0.0; m_total];
        self.assemble_residual(u, &mut base);
        let mut jac = DMatrix::zeros(m_total, n);
        let mut pert = u.to_vec();
        let mut r = vec![0.0; m_total];
        for col in 0..n {
            let h = FD_EPSILON * u[col].abs().max(1.0);
            pert[col] = u[col] + h;
            self.assemble_residual(&pert, &mut r);
            for row in 0..m_total {
                jac[(row, col)] = (r[row] - base[row]) / h;
            }
            pert[col] = u[col];
        }
        jac
    }

    /// Right-preconditioning column scales: per-field reference magnitudes
    /// from the exterior (initial) states for flow columns, floor-clamped at
    /// 1e-2 of the largest field scale; geometry columns scale with the
    /// domain width.
    pub fn column_scaling(&self, geometry_scale: f64) -> Vec<f64> {
        let m = self.layout.n_comp;
        let mut field_ref = vec![0.0f64; m];
        for c in 0..m {
            field_ref[c] = self.exterior_left[c].abs().max(self.exterior_right[c].abs());
        }
        let top = field_ref.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
        for r in field_ref.iter_mut() {
            *r = r.max(1e-2 * top);
        }
        let mut scales = Vec::with_capacity(self.layout.num_unknowns());
        for _e in 0..self.layout.n_elems {
            for _i in 0..self.layout.n_funcs {
                for c in 0..m {
                    scales.push(field_ref[c]);
                }
            }
        }
        let g = geometry_scale * self.mesh.domain_width();
        scales.extend(std::iter::repeat(g).take(self.layout.n_geom));
        scales
    }

    /// Net space-time flux through the whole slab boundary, evaluated with
    /// the same one-sided and averaged fluxes the residual uses. Zero (to
    /// solver tolerance) at a converged solution.
    pub fn slab_flux_balance(&self, u: &[f64]) -> State {
        let m = self.layout.n_comp;
        let dt = self.mesh.slab_height();
        let mut total = State::zeros(m);
        for e in 0..self.layout.n_elems {
            // Bottom: outward normal points to the past.
            let x_bl = self.mesh.nodes[e].x;
            let x_br = self.mesh.nodes[e + 1].x;
            let half_b = 0.5 * (x_br - x_bl);
            if half_b != 0.0 {
                let mid = 0.5 * (x_bl + x_br);
                for (q, &s) in self.tables.face.points.iter().enumerate() {
                    let w = self.tables.face.weights[q];
                    let past = self.past_state(e, s, mid + s * half_b);
                    total = total - past * (w * half_b);
                }
            }
            // Top: the element's own trace leaves the slab.
            let half_t = 0.5 * (self.top_x(e + 1, u) - self.top_x(e, u));
            if half_t != 0.0 {
                for (q, _) in self.tables.face.points.iter().enumerate() {
                    let w = self.tables.face.weights[q];
                    let own = self.eval_block(self.flow_block(e, u), &self.tables.edge_values[EDGE_TOP][q]);
                    total = total + own * (w * half_t);
                }
            }
        }
        // Side boundaries with the averaged exterior flux.
        let last = self.layout.n_elems - 1;
        for (q, _) in self.tables.face.points.iter().enumerate() {
            let w = self.tables.face.weights[q];
            let own = self.eval_block(self.flow_block(0, u), &self.tables.edge_values[EDGE_LEFT][q]);
            let f_hat =
                (self.system.physical_flux(&own) + self.system.physical_flux(&self.exterior_left)) * 0.5;
            let u_hat = (own + self.exterior_left) * 0.5;
            let dx = self.top_x(0, u) - self.mesh.nodes[0].x;
            total = total + (f_hat * (-dt) + u_hat * dx) * (0.5 * w);

            let own = self.eval_block(self.flow_block(last, u), &self.tables.edge_values[EDGE_RIGHT][q]);
            let f_hat =
                (self.system.physical_flux(&own) + self.system.physical_flux(&self.exterior_right)) * 0.5;
            let u_hat = (own + self.exterior_right) * 0.5;
            let dx = self.top_x(last + 1, u) - self.mesh.nodes[last + 1].x;
            total = total + (f_hat * dt - u_hat * dx) * (0.5 * w);
        }
        total
    }
}

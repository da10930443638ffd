//! Polynomial bases, Gauss quadrature, and solution evaluation on the
//! reference square [-1,1]^2.
//!
//! The basis is modal: monomials ordered by total degree, orthonormalized
//! against the reference-square measure by a Cholesky factorization of their
//! Gram matrix. This keeps mass matrices well conditioned on distorted
//! space-time quadrilaterals. The first function is always the normalized
//! constant 1/2.

use crate::mesh::QuadCoords;
use crate::physics::State;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DgError {
    #[error("unsupported polynomial degree {0}; supported degrees are 1..=3")]
    UnsupportedDegree(usize),
    #[error("singular bilinear map (det J = 0) at a quadrature point")]
    SingularMap,
}

/// Basis family: total-degree space P_p or tensor-product space Q_p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisFamily {
    TotalDegree,
    TensorProduct,
}

impl BasisFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            BasisFamily::TotalDegree => "P",
            BasisFamily::TensorProduct => "Q",
        }
    }
}

impl std::str::FromStr for BasisFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "P" | "p" | "total" => Ok(BasisFamily::TotalDegree),
            "Q" | "q" | "tensor" => Ok(BasisFamily::TensorProduct),
            other => Err(format!("unknown basis family '{other}' (expected P or Q)")),
        }
    }
}

/// Orthonormal modal basis of degree p on the reference square.
#[derive(Clone, Debug)]
pub struct Basis {
    family: BasisFamily,
    degree: usize,
    exps: Vec<(u32, u32)>,
    // Row i holds the monomial coefficients of basis function i (lower
    // triangular by construction).
    coeff: DMatrix<f64>,
}

/// Exact reference-interval moment of xi^k.
fn moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        2.0 / (k as f64 + 1.0)
    }
}

impl Basis {
    pub fn new(family: BasisFamily, degree: usize) -> Result<Self, DgError> {
        if !(1..=3).contains(&degree) {
            return Err(DgError::UnsupportedDegree(degree));
        }
        let p = degree as u32;
        let mut exps = Vec::new();
        match family {
            BasisFamily::TotalDegree => {
                for total in 0..=p {
                    for b in 0..=total {
                        exps.push((total - b, b));
                    }
                }
            }
            BasisFamily::TensorProduct => {
                // Total-degree ordering first so both families share the
                // leading P monomials, then the remaining tensor products.
                for total in 0..=(2 * p) {
                    for b in 0..=total.min(p) {
                        let a = total - b;
                        if a <= p {
                            exps.push((a, b));
                        }
                    }
                }
            }
        }
        let n = exps.len();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = moment(exps[i].0 + exps[j].0) * moment(exps[i].1 + exps[j].1);
            }
        }
        let chol = gram.cholesky().expect("monomial Gram matrix is SPD");
        let coeff = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("triangular solve");
        Ok(Self { family, degree, exps, coeff })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_funcs(&self) -> usize {
        self.exps.len()
    }

    fn mono_values(&self, xi: f64, eta: f64) -> Vec<f64> {
        self.exps.iter().map(|&(a, b)| xi.powi(a as i32) * eta.powi(b as i32)).collect()
    }

    fn mono_grads(&self, xi: f64, eta: f64) -> Vec<[f64; 2]> {
        self.exps
            .iter()
            .map(|&(a, b)| {
                let dxi = if a == 0 { 0.0 } else { a as f64 * xi.powi(a as i32 - 1) * eta.powi(b as i32) };
                let deta = if b == 0 { 0.0 } else { b as f64 * xi.powi(a as i32) * eta.powi(b as i32 - 1) };
                [dxi, deta]
            })
            .collect()
    }

    /// Values of all basis functions at a reference point.
    pub fn eval(&self, xi: f64, eta: f64) -> Vec<f64> {
        let mono = self.mono_values(xi, eta);
        let n = self.num_funcs();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.coeff[(i, j)] * mono[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Reference-coordinate gradients (d/dxi, d/deta) of all basis functions.
    pub fn eval_grad(&self, xi: f64, eta: f64) -> Vec<[f64; 2]> {
        let mono = self.mono_grads(xi, eta);
        let n = self.num_funcs();
        let mut out = vec![[0.0; 2]; n];
        for i in 0..n {
            let mut acc = [0.0; 2];
            for j in 0..=i {
                acc[0] += self.coeff[(i, j)] * mono[j][0];
                acc[1] += self.coeff[(i, j)] * mono[j][1];
            }
            out[i] = acc;
        }
        out
    }
}

/// Gauss-Legendre rule on [-1,1].
#[derive(Clone, Debug)]
pub struct QuadratureRule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Tensor-product Gauss rule on the reference square.
#[derive(Clone, Debug)]
pub struct QuadratureRule2d {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// n-point Gauss-Legendre rule; exact for polynomials of degree 2n-1.
pub fn gauss_rule_1d(n_points: usize) -> QuadratureRule1d {
    assert!(n_points >= 1);
    let n = n_points;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Newton on the Legendre polynomial from the Chebyshev-like guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 1 {
                p1 = x;
            }
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x.abs();
        points[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    QuadratureRule1d { points, weights }
}

/// Tensor product of an n-point Gauss rule; exact to degree 2n-1 per axis.
pub fn gauss_rule_quad(n_points: usize) -> QuadratureRule2d {
    let rule = gauss_rule_1d(n_points);
    let mut points = Vec::with_capacity(n_points * n_points);
    let mut weights = Vec::with_capacity(n_points * n_points);
    for (j, &eta) in rule.points.iter().enumerate() {
        for (i, &xi) in rule.points.iter().enumerate() {
            points.push([xi, eta]);
            weights.push(rule.weights[i] * rule.weights[j]);
        }
    }
    QuadratureRule2d { points, weights }
}

/// Per-element modal coefficients, N basis functions by m components.
#[derive(Clone, Debug)]
pub struct DgSolution {
    pub n_elems: usize,
    pub n_funcs: usize,
    pub n_comp: usize,
    coeffs: Vec<f64>,
}

impl DgSolution {
    pub fn zeros(n_elems: usize, n_funcs: usize, n_comp: usize) -> Self {
        Self { n_elems, n_funcs, n_comp, coeffs: vec![0.0; n_elems * n_funcs * n_comp] }
    }

    pub fn from_coeffs(n_elems: usize, n_funcs: usize, n_comp: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), n_elems * n_funcs * n_comp);
        Self { n_elems, n_funcs, n_comp, coeffs }
    }

    pub fn element(&self, e: usize) -> &[f64] {
        let block = self.n_funcs * self.n_comp;
        &self.coeffs[e * block..(e + 1) * block]
    }

    pub fn element_mut(&mut self, e: usize) -> &mut [f64] {
        let block = self.n_funcs * self.n_comp;
        &mut self.coeffs[e * block..(e + 1) * block]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sets an element to a spatially constant state (higher modes zero).
    pub fn set_constant(&mut self, e: usize, basis: &Basis, s: &State) {
        debug_assert_eq!(basis.num_funcs(), self.n_funcs);
        let m = self.n_comp;
        let block = self.element_mut(e);
        block.fill(0.0);
        // The first basis function is the normalized constant 1/2.
        for c in 0..m {
            block[c] = 2.0 * s[c];
        }
    }

    pub fn eval(&self, basis: &Basis, e: usize, xi: f64, eta: f64) -> State {
        let values = basis.eval(xi, eta);
        eval_coeffs(self.element(e), &values, self.n_comp)
    }
}

/// Evaluates a coefficient block (layout [basis][component]) at tabulated
/// basis values.
pub fn eval_coeffs(block: &[f64], basis_values: &[f64], n_comp: usize) -> State {
    let mut s = State::zeros(n_comp);
    for (i, &b) in basis_values.iter().enumerate() {
        for c in 0..n_comp {
            s[c] += block[i * n_comp + c] * b;
        }
    }
    s
}

/// L2 projection of a scalar function onto the reference basis. The rule must
/// integrate products f * B_i accurately.
pub fn project_scalar(
    basis: &Basis,
    rule: &QuadratureRule2d,
    f: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let n = basis.num_funcs();
    let mut coeffs = vec![0.0; n];
    for (q, &[xi, eta]) in rule.points.iter().enumerate() {
        let w = rule.weights[q];
        let fv = f(xi, eta);
        let values = basis.eval(xi, eta);
        for i in 0..n {
            coeffs[i] += w * fv * values[i];
        }
    }
    coeffs
}

/// Physical-space gradients (d/dx, d/dt) of all basis functions through the
/// bilinear map. Fails where the map is singular.
pub fn physical_gradient(
    basis: &Basis,
    coords: &QuadCoords,
    xi: f64,
    eta: f64,
) -> Result<Vec<[f64; 2]>, DgError> {
    let det = coords.jacobian_det(xi, eta);
    if det == 0.0 {
        return Err(DgError::SingularMap);
    }
    let grads = basis.eval_grad(xi, eta);
    Ok(grads
        .iter()
        .map(|g| {
            let scaled = coords.adjugate_grad(xi, eta, g);
            [scaled[0] / det, scaled[1] / det]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::QuadCoords;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn dimensions_match_the_polynomial_spaces() {
        for (p, n) in [(1, 3), (2, 6), (3, 10)] {
            assert_eq!(Basis::new(BasisFamily::TotalDegree, p).unwrap().num_funcs(), n);
        }
        for (p, n) in [(1, 4), (2, 9), (3, 16)] {
            assert_eq!(Basis::new(BasisFamily::TensorProduct, p).unwrap().num_funcs(), n);
        }
        assert_eq!(
            Basis::new(BasisFamily::TotalDegree, 4).unwrap_err(),
            DgError::UnsupportedDegree(4)
        );
        assert_eq!(
            Basis::new(BasisFamily::TotalDegree, 0).unwrap_err(),
            DgError::UnsupportedDegree(0)
        );
    }

    #[test]
    fn leading_function_is_the_normalized_constant() {
        for family in [BasisFamily::TotalDegree, BasisFamily::TensorProduct] {
            for p in 1..=3 {
                let basis = Basis::new(family, p).unwrap();
                for (xi, eta) in [(0.0, 0.0), (0.3, -0.7), (1.0, 1.0)] {
                    let v = basis.eval(xi, eta);
                    assert_relative_eq!(v[0], 0.5, max_relative = 1e-14);
                }
                // Linear modes vanish at the centroid.
                let v = basis.eval(0.0, 0.0);
                assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!(v[2], 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        for family in [BasisFamily::TotalDegree, BasisFamily::TensorProduct] {
            for p in 1..=3 {
                let basis = Basis::new(family, p).unwrap();
                let rule = gauss_rule_quad(p + 1);
                let n = basis.num_funcs();
                let mut gram = vec![0.0; n * n];
                for (q, &[xi, eta]) in rule.points.iter().enumerate() {
                    let v = basis.eval(xi, eta);
                    for i in 0..n {
                        for j in 0..n {
                            gram[i * n + j] += rule.weights[q] * v[i] * v[j];
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(gram[i * n + j], want, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn projection_reproduces_every_spanned_monomial() {
        for (family, q) in [(BasisFamily::TotalDegree, 5), (BasisFamily::TensorProduct, 5)] {
            for p in 1..=3usize {
                let basis = Basis::new(family, p).unwrap();
                let rule = gauss_rule_quad(q);
                for &(a, b) in basis.exps.clone().iter() {
                    let coeffs =
                        project_scalar(&basis, &rule, |xi, eta| xi.powi(a as i32) * eta.powi(b as i32));
                    for &(xi, eta) in &[(0.123, -0.54), (-0.9, 0.8), (0.5, 0.5)] {
                        let values = basis.eval(xi, eta);
                        let got: f64 = coeffs.iter().zip(&values).map(|(c, v)| c * v).sum();
                        let want = xi.powi(a as i32) * eta.powi(b as i32);
                        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 1.8 - 0.9
        };
        for family in [BasisFamily::TotalDegree, BasisFamily::TensorProduct] {
            for p in 1..=3 {
                let basis = Basis::new(family, p).unwrap();
                for _ in 0..10 {
                    let (xi, eta) = (next(), next());
                    let grads = basis.eval_grad(xi, eta);
                    let h = 1e-6;
                    let vxp = basis.eval(xi + h, eta);
                    let vxm = basis.eval(xi - h, eta);
                    let vyp = basis.eval(xi, eta + h);
                    let vym = basis.eval(xi, eta - h);
                    for i in 0..basis.num_funcs() {
                        assert_abs_diff_eq!(grads[i][0], (vxp[i] - vxm[i]) / (2.0 * h), epsilon = 1e-8);
                        assert_abs_diff_eq!(grads[i][1], (vyp[i] - vym[i]) / (2.0 * h), epsilon = 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_rules_hit_known_integrals() {
        let r1 = gauss_rule_1d(1);
        let integral: f64 = r1.points.iter().zip(&r1.weights).map(|(x, w)| w * x).sum();
        assert_abs_diff_eq!(integral, 0.0);

        let r2 = gauss_rule_1d(2);
        let integral: f64 = r2.points.iter().zip(&r2.weights).map(|(x, w)| w * x * x).sum();
        assert_abs_diff_eq!(integral, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_rules_are_exact_to_degree_2n_minus_1() {
        for n in 1..=6usize {
            let rule = gauss_rule_1d(n);
            for k in 0..=(2 * n - 1) as u32 {
                let got: f64 =
                    rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert_abs_diff_eq!(got, moment(k), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn constant_solution_has_zero_gradient_and_exact_value() {
        let basis = Basis::new(BasisFamily::TotalDegree, 2).unwrap();
        let mut sol = DgSolution::zeros(1, basis.num_funcs(), 3);
        let s = State::euler(1.5, -0.25, 2.0);
        sol.set_constant(0, &basis, &s);
        let coords = QuadCoords::new([0.0, 2.0, 2.0, 0.0], [0.0, 0.0, 1.0, 1.0]);
        for &(xi, eta) in &[(0.0, 0.0), (0.7, -0.3), (-1.0, 1.0)] {
            let v = sol.eval(&basis, 0, xi, eta);
            for c in 0..3 {
                assert_relative_eq!(v[c], s[c], max_relative = 1e-14);
            }
            let grads = physical_gradient(&basis, &coords, xi, eta).unwrap();
            let mut dx = 0.0;
            for (i, g) in grads.iter().enumerate() {
                dx += sol.element(0)[i * 3] * g[0];
            }
            assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_in_x_gradient_scales_with_element_width() {
        // Axis-aligned element of width h: d/dx of the solution equal to x
        // must be 1, i.e. 2/h times the reference gradient.
        let h = 0.25;
        let basis = Basis::new(BasisFamily::TotalDegree, 1).unwrap();
        let coords = QuadCoords::new([0.0, h, h, 0.0], [0.0, 0.0, 1.0, 1.0]);
        let rule = gauss_rule_quad(3);
        let coeffs = project_scalar(&basis, &rule, |xi, _| (xi + 1.0) * 0.5 * h);
        for &(xi, eta) in &[(0.0, 0.0), (0.5, -0.5)] {
            let grads = physical_gradient(&basis, &coords, xi, eta).unwrap();
            let dx: f64 = coeffs.iter().zip(&grads).map(|(c, g)| c * g[0]).sum();
            assert_relative_eq!(dx, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn p2_reproduces_x_squared_on_a_parallelogram() {
        // Sheared parallelogram: the bilinear map stays affine, so x^2 lies
        // in the mapped P2 space.
        let basis = Basis::new(BasisFamily::TotalDegree, 2).unwrap();
        let coords = QuadCoords::new([0.1, 1.3, 1.8, 0.6], [0.0, 0.0, 1.0, 1.0]);
        let rule = gauss_rule_quad(5);
        let coeffs = project_scalar(&basis, &rule, |xi, eta| {
            let (x, _) = coords.map(xi, eta);
            x * x
        });
        for &(xi, eta) in &[(0.37, -0.81), (-0.64, 0.29), (0.95, 0.95)] {
            let (x, _) = coords.map(xi, eta);
            let values = basis.eval(xi, eta);
            let got: f64 = coeffs.iter().zip(&values).map(|(c, v)| c * v).sum();
            assert_relative_eq!(got, x * x, max_relative = 1e-12);
        }
    }

    #[test]
    fn mass_matrix_is_spd_on_a_distorted_element() {
        let coords = QuadCoords::new([0.0, 1.0, 1.4, -0.3], [0.0, 0.0, 1.0, 1.0]);
        for p in 1..=3 {
            let basis = Basis::new(BasisFamily::TotalDegree, p).unwrap();
            let n = basis.num_funcs();
            let rule = gauss_rule_quad(p + 2);
            let mut mass = DMatrix::<f64>::zeros(n, n);
            for (q, &[xi, eta]) in rule.points.iter().enumerate() {
                let det = coords.jacobian_det(xi, eta);
                let v = basis.eval(xi, eta);
                for i in 0..n {
                    for j in 0..n {
                        mass[(i, j)] += rule.weights[q] * v[i] * v[j] * det;
                    }
                }
            }
            let sym = (&mass - mass.transpose()).norm();
            assert!(sym < 1e-13);
            let eig = mass.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "p={p}: min eigenvalue {min}");
        }
    }

    #[test]
    fn fan_element_keeps_positive_jacobian_at_interior_points() {
        // Collapsed bottom edge; interior tensor-Gauss points avoid eta = -1.
        let coords = QuadCoords::new([0.0, 0.0, 0.4, -0.4], [0.0, 0.0, 1.0, 1.0]);
        for p in 1..=3usize {
            let rule = gauss_rule_quad(p + 2);
            for &[xi, eta] in &rule.points {
                assert!(coords.jacobian_det(xi, eta) > 0.0);
            }
        }
        assert_abs_diff_eq!(coords.jacobian_det(0.3, -1.0), 0.0);
    }

    #[test]
    fn physical_gradient_signals_singular_maps() {
        let coords = QuadCoords::new([0.0, 0.0, 0.4, -0.4], [0.0, 0.0, 1.0, 1.0]);
        let basis = Basis::new(BasisFamily::TotalDegree, 1).unwrap();
        assert_eq!(physical_gradient(&basis, &coords, 0.0, -1.0).unwrap_err(), DgError::SingularMap);
    }
}

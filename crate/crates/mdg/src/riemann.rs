//! Independent exact solutions used for initialization, error norms, and
//! verification: scalar Riemann closed forms, the exact Euler Riemann solver,
//! and the planar Noh solution.
//!
//! Nothing here feeds the discrete residual; the solver itself never needs a
//! Riemann flux or a sound speed.

use crate::dg_space::{gauss_rule_quad, Basis};
use crate::mesh::SlabMesh;
use crate::physics::{Primitive, State, System};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiemannError {
    #[error("initial states generate vacuum; the star region is undefined")]
    VacuumFormation,
    #[error("pressure iteration failed to converge within {0} steps")]
    NoConvergence(usize),
    #[error("nonphysical input state (rho = {rho}, p = {p})")]
    NonphysicalState { rho: f64, p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveKind {
    Shock,
    Rarefaction,
}

/// Self-similar exact solution of the Euler Riemann problem.
#[derive(Clone, Debug)]
pub struct RiemannSolution {
    pub gamma: f64,
    pub left: Primitive,
    pub right: Primitive,
    pub p_star: f64,
    pub u_star: f64,
    pub left_wave: WaveKind,
    pub right_wave: WaveKind,
}

fn sound_speed(gamma: f64, s: &Primitive) -> f64 {
    (gamma * s.p / s.rho).sqrt()
}

/// One-sided pressure function f_K(p) and its derivative (Toro's notation).
fn pressure_fn(gamma: f64, side: &Primitive, p: f64) -> (f64, f64) {
    let c = sound_speed(gamma, side);
    if p > side.p {
        // Shock branch.
        let a = 2.0 / ((gamma + 1.0) * side.rho);
        let b = (gamma - 1.0) / (gamma + 1.0) * side.p;
        let root = (a / (p + b)).sqrt();
        let f = (p - side.p) * root;
        let df = root * (1.0 - 0.5 * (p - side.p) / (p + b));
        (f, df)
    } else {
        // Rarefaction branch.
        let exp = (gamma - 1.0) / (2.0 * gamma);
        let f = 2.0 * c / (gamma - 1.0) * ((p / side.p).powf(exp) - 1.0);
        let df = (p / side.p).powf(-(gamma + 1.0) / (2.0 * gamma)) / (side.rho * c);
        (f, df)
    }
}

/// Two-rarefaction closed-form star pressure, exact when both waves are
/// rarefactions.
pub fn two_rarefaction_p_star(gamma: f64, left: &Primitive, right: &Primitive) -> f64 {
    let cl = sound_speed(gamma, left);
    let cr = sound_speed(gamma, right);
    let z = (gamma - 1.0) / (2.0 * gamma);
    let num = cl + cr - 0.5 * (gamma - 1.0) * (right.v - left.v);
    let den = cl / left.p.powf(z) + cr / right.p.powf(z);
    (num / den).powf(1.0 / z)
}

/// Exact Riemann solver: Newton iteration on the pressure function to
/// |f| < 1e-13.
pub fn solve_euler_riemann(
    left: Primitive,
    right: Primitive,
    gamma: f64,
) -> Result<RiemannSolution, RiemannError> {
    for s in [&left, &right] {
        if !(s.rho > 0.0 && s.p > 0.0) {
            return Err(RiemannError::NonphysicalState { rho: s.rho, p: s.p });
        }
    }
    let cl = sound_speed(gamma, &left);
    let cr = sound_speed(gamma, &right);
    if 2.0 * (cl + cr) / (gamma - 1.0) <= right.v - left.v {
        return Err(RiemannError::VacuumFormation);
    }

    // Start from the two-rarefaction guess, floored away from zero.
    let mut p = two_rarefaction_p_star(gamma, &left, &right).max(1e-14 * left.p.min(right.p));
    let du = right.v - left.v;
    let max_iter = 100;
    let mut converged = false;
    for _ in 0..max_iter {
        let (fl, dfl) = pressure_fn(gamma, &left, p);
        let (fr, dfr) = pressure_fn(gamma, &right, p);
        let f = fl + fr + du;
        if f.abs() < 1e-13 {
            converged = true;
            break;
        }
        let mut step = f / (dfl + dfr);
        if p - step <= 0.0 {
            step = 0.5 * p;
        }
        p -= step;
    }
    if !converged {
        let (fl, _) = pressure_fn(gamma, &left, p);
        let (fr, _) = pressure_fn(gamma, &right, p);
        if (fl + fr + du).abs() >= 1e-11 {
            return Err(RiemannError::NoConvergence(max_iter));
        }
    }
    let (fl, _) = pressure_fn(gamma, &left, p);
    let (fr, _) = pressure_fn(gamma, &right, p);
    let u_star = 0.5 * (left.v + right.v) + 0.5 * (fr - fl);
    Ok(RiemannSolution {
        gamma,
        left,
        right,
        p_star: p,
        u_star,
        left_wave: if p > left.p { WaveKind::Shock } else { WaveKind::Rarefaction },
        right_wave: if p > right.p { WaveKind::Shock } else { WaveKind::Rarefaction },
    })
}

/// Signal speeds of the wave pattern.
#[derive(Clone, Copy, Debug)]
pub struct WaveSpeeds {
    /// Left wave: (head, tail) for a rarefaction, equal speeds for a shock.
    pub left: (f64, f64),
    pub contact: f64,
    /// Right wave: (tail, head) for a rarefaction, equal speeds for a shock.
    pub right: (f64, f64),
}

impl RiemannSolution {
    pub fn star_density_left(&self) -> f64 {
        star_density(self.gamma, &self.left, self.p_star)
    }

    pub fn star_density_right(&self) -> f64 {
        star_density(self.gamma, &self.right, self.p_star)
    }

    pub fn wave_speeds(&self) -> WaveSpeeds {
        let g = self.gamma;
        let cl = sound_speed(g, &self.left);
        let cr = sound_speed(g, &self.right);
        let left = match self.left_wave {
            WaveKind::Shock => {
                let s = self.left.v
                    - cl * ((g + 1.0) / (2.0 * g) * self.p_star / self.left.p
                        + (g - 1.0) / (2.0 * g))
                    .sqrt();
                (s, s)
            }
            WaveKind::Rarefaction => {
                let c_star = cl * (self.p_star / self.left.p).powf((g - 1.0) / (2.0 * g));
                (self.left.v - cl, self.u_star - c_star)
            }
        };
        let right = match self.right_wave {
            WaveKind::Shock => {
                let s = self.right.v
                    + cr * ((g + 1.0) / (2.0 * g) * self.p_star / self.right.p
                        + (g - 1.0) / (2.0 * g))
                    .sqrt();
                (s, s)
            }
            WaveKind::Rarefaction => {
                let c_star = cr * (self.p_star / self.right.p).powf((g - 1.0) / (2.0 * g));
                (self.u_star + c_star, self.right.v + cr)
            }
        };
        WaveSpeeds { left, contact: self.u_star, right }
    }

    /// Samples the self-similar solution at xi = (x - x_interface) / t.
    pub fn sample_xi(&self, xi: f64) -> Primitive {
        let g = self.gamma;
        let speeds = self.wave_speeds();
        if xi < self.u_star {
            // Left of the contact.
            match self.left_wave {
                WaveKind::Shock => {
                    if xi < speeds.left.0 {
                        self.left
                    } else {
                        Primitive::new(self.star_density_left(), self.u_star, self.p_star)
                    }
                }
                WaveKind::Rarefaction => {
                    let cl = sound_speed(g, &self.left);
                    if xi < speeds.left.0 {
                        self.left
                    } else if xi > speeds.left.1 {
                        Primitive::new(self.star_density_left(), self.u_star, self.p_star)
                    } else {
                        // Inside the fan.
                        let c = 2.0 / (g + 1.0) * (cl + 0.5 * (g - 1.0) * (self.left.v - xi));
                        let v = 2.0 / (g + 1.0) * (cl + 0.5 * (g - 1.0) * self.left.v + xi);
                        let rho = self.left.rho * (c / cl).powf(2.0 / (g - 1.0));
                        let p = self.left.p * (c / cl).powf(2.0 * g / (g - 1.0));
                        Primitive::new(rho, v, p)
                    }
                }
            }
        } else {
            match self.right_wave {
                WaveKind::Shock => {
                    if xi > speeds.right.1 {
                        self.right
                    } else {
                        Primitive::new(self.star_density_right(), self.u_star, self.p_star)
                    }
                }
                WaveKind::Rarefaction => {
                    let cr = sound_speed(g, &self.right);
                    if xi > speeds.right.1 {
                        self.right
                    } else if xi < speeds.right.0 {
                        Primitive::new(self.star_density_right(), self.u_star, self.p_star)
                    } else {
                        let c = 2.0 / (g + 1.0) * (cr - 0.5 * (g - 1.0) * (self.right.v - xi));
                        let v = 2.0 / (g + 1.0) * (-cr + 0.5 * (g - 1.0) * self.right.v + xi);
                        let rho = self.right.rho * (c / cr).powf(2.0 / (g - 1.0));
                        let p = self.right.p * (c / cr).powf(2.0 * g / (g - 1.0));
                        Primitive::new(rho, v, p)
                    }
                }
            }
        }
    }
}

fn star_density(gamma: f64, side: &Primitive, p_star: f64) -> f64 {
    let ratio = p_star / side.p;
    if p_star > side.p {
        // Shock Hugoniot.
        let beta = (gamma - 1.0) / (gamma + 1.0);
        side.rho * (ratio + beta) / (beta * ratio + 1.0)
    } else {
        // Isentrope.
        side.rho * ratio.powf(1.0 / gamma)
    }
}

/// Closed-form scalar Riemann solutions: the advection contact and the
/// Burgers shock or rarefaction fan.
pub fn scalar_exact(system: &System, u_l: f64, u_r: f64, x_i: f64, x: f64, t: f64) -> f64 {
    match system {
        System::Advection { speed } => {
            if x - speed * t < x_i {
                u_l
            } else {
                u_r
            }
        }
        System::Burgers => {
            if t <= 0.0 {
                return if x < x_i { u_l } else { u_r };
            }
            if u_l > u_r {
                // Shock at speed (u_l + u_r)/2.
                let s = 0.5 * (u_l + u_r);
                if x < x_i + s * t {
                    u_l
                } else {
                    u_r
                }
            } else {
                // Rarefaction fan u = (x - x_i)/t between the characteristics.
                if x < x_i + u_l * t {
                    u_l
                } else if x > x_i + u_r * t {
                    u_r
                } else {
                    (x - x_i) / t
                }
            }
        }
        System::Euler { .. } => panic!("scalar_exact is for scalar systems"),
    }
}

/// Planar Noh solution in the infinite-strength limit: two shocks at speed
/// (gamma-1)/2 leave a stagnant state of density (gamma+1)/(gamma-1) and
/// pressure (gamma+1)/2 behind. Pre-shock states keep the small initial
/// pressure `p0` (an O(p0) model error, far below solver tolerances).
pub fn noh_exact(gamma: f64, p0: f64, x: f64, t: f64) -> Primitive {
    let shock_speed = 0.5 * (gamma - 1.0);
    if t <= 0.0 || x.abs() > shock_speed * t {
        Primitive::new(1.0, if x < 0.0 { 1.0 } else { -1.0 }, p0)
    } else {
        Primitive::new((gamma + 1.0) / (gamma - 1.0), 0.0, 0.5 * (gamma + 1.0))
    }
}

/// Field selector for error norms and profile sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Density,
    Velocity,
    Pressure,
    InternalEnergy,
    /// The single component of a scalar law.
    Scalar,
}

/// Exact solution of a whole problem over the slab.
#[derive(Clone, Debug)]
pub enum ExactSolution {
    Riemann { solution: RiemannSolution, x_interface: f64 },
    Noh { gamma: f64, p0: f64 },
    Scalar { system: System, u_l: f64, u_r: f64, x_interface: f64 },
}

impl ExactSolution {
    /// Primitive sample; scalar problems report their value as `rho`.
    pub fn primitives(&self, x: f64, t: f64) -> Primitive {
        match self {
            ExactSolution::Riemann { solution, x_interface } => {
                if t <= 0.0 {
                    if x < *x_interface {
                        solution.left
                    } else {
                        solution.right
                    }
                } else {
                    solution.sample_xi((x - x_interface) / t)
                }
            }
            ExactSolution::Noh { gamma, p0 } => noh_exact(*gamma, *p0, x, t),
            ExactSolution::Scalar { system, u_l, u_r, x_interface } => {
                Primitive::new(scalar_exact(system, *u_l, *u_r, *x_interface, x, t), 0.0, 0.0)
            }
        }
    }

    pub fn field(&self, field: Field, x: f64, t: f64) -> f64 {
        let prim = self.primitives(x, t);
        match field {
            Field::Density | Field::Scalar => prim.rho,
            Field::Velocity => prim.v,
            Field::Pressure => prim.p,
            Field::InternalEnergy => match self {
                ExactSolution::Riemann { solution, .. } => prim.internal_energy(solution.gamma),
                ExactSolution::Noh { gamma, .. } => prim.internal_energy(*gamma),
                ExactSolution::Scalar { .. } => f64::NAN,
            },
        }
    }

    /// The exact conservative state, used for residual oracles.
    pub fn conservative(&self, system: &System, x: f64, t: f64) -> State {
        let prim = self.primitives(x, t);
        match system {
            System::Euler { .. } => system.primitive_to_conservative(prim),
            _ => State::scalar(prim.rho),
        }
    }
}

/// Space-time L2 error of a selected field over the slab, by per-element
/// Gauss quadrature of order at least 2p+4 (the integrand is not polynomial).
pub fn l2_spacetime_error(
    mesh: &SlabMesh,
    coeffs: &[f64],
    basis: &Basis,
    system: &System,
    exact: &ExactSolution,
    field: Field,
) -> f64 {
    let n = basis.num_funcs();
    let m = system.num_components();
    let rule = gauss_rule_quad(basis.degree() + 3);
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let coords = mesh.element_coords(e);
        let block = &coeffs[e * n * m..(e + 1) * n * m];
        for (q, &[xi, eta]) in rule.points.iter().enumerate() {
            let det = coords.jacobian_det(xi, eta).abs();
            if det == 0.0 {
                continue;
            }
            let values = basis.eval(xi, eta);
            let s = crate::dg_space::eval_coeffs(block, &values, m);
            let (x, t) = coords.map(xi, eta);
            let approx = match (field, system) {
                (Field::Scalar | Field::Density, System::Advection { .. } | System::Burgers) => s[0],
                (Field::Density, System::Euler { .. }) => s[0],
                (Field::Velocity, System::Euler { .. }) => s[1] / s[0],
                (Field::Pressure, System::Euler { .. }) => match system.pressure(&s) {
                    Ok(p) => p,
                    Err(_) => f64::NAN,
                },
                (Field::InternalEnergy, System::Euler { gamma }) => {
                    match system.conservative_to_primitive(&s) {
                        Ok(prim) => prim.internal_energy(*gamma),
                        Err(_) => f64::NAN,
                    }
                }
                _ => s[0],
            };
            let diff = approx - exact.field(field, x, t);
            total += rule.weights[q] * diff * diff * det;
        }
    }
    total.sqrt()
}

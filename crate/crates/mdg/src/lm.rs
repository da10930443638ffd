//! Regularized nonlinear least squares: a Levenberg-Marquardt driver
//! minimizing 0.5 ||R(u)||^2 over combined flow and geometry unknowns.
//!
//! Marquardt damping acts on the diagonal of J^T J (mixed unit scales), with
//! a small identity shift so flat directions stay solvable. Steps are
//! accepted only when they strictly reduce ||R||; rejected steps raise the
//! damping and retry with the same Jacobian. Non-finite trial residuals are
//! ordinary rejections, so negative density, pressure, or Jacobians never
//! abort a solve.

use nalgebra::{DMatrix, DVector};

/// Bounds on the damping parameter; hitting the upper cap is a declared
/// nonconvergence, never undefined behavior.
const LAMBDA_MIN: f64 = 1e-14;
const LAMBDA_MAX: f64 = 1e14;

/// Monotonic timer that degrades to zero where std::time is unavailable
/// (wasm32 without a runtime clock).
struct Timer {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Timer {
    fn start() -> Self {
        Timer {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// A residual/Jacobian pair the driver can minimize.
pub trait LeastSquaresProblem {
    fn num_unknowns(&self) -> usize;
    fn num_residuals(&self) -> usize;
    fn residual(&self, u: &[f64], out: &mut [f64]);
    /// Jacobian given the residual already evaluated at `u`.
    fn jacobian(&self, u: &[f64], base_residual: &[f64]) -> DMatrix<f64>;
    /// Right-preconditioning column scales (defaults to none).
    fn column_scaling(&self, _geometry_scale: f64) -> Vec<f64> {
        vec![1.0; self.num_unknowns()]
    }
    /// Split of the residual norm into (element, interface) parts.
    fn split_norms(&self, r: &[f64]) -> (f64, f64) {
        (r.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0)
    }
    /// True if a nonpositive-density/pressure state was seen since last poll.
    fn poll_negative_flag(&self) -> bool {
        false
    }
    fn negative_state_events(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub tol_residual: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    /// Relative weighting of geometry columns in the scaling vector.
    pub geometry_scale: f64,
    /// Identity shift factor applied along with the damping.
    pub eps_diag: f64,
    /// Apply the column scaling (disable to debug conditioning).
    pub use_scaling: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 1.0 / 3.0,
            tol_residual: 1e-10,
            tol_step: 1e-12,
            max_iter: 200,
            geometry_scale: 1.0,
            eps_diag: 1e-12,
            use_scaling: true,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lambda0 < 0.0 {
            return Err(format!("lambda0 must be nonnegative, got {}", self.lambda0));
        }
        if !(self.lambda_up > 1.0) || !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return Err("need lambda_up > 1 > lambda_down > 0".to_string());
        }
        if !(self.tol_residual > 0.0 && self.tol_step > 0.0) {
            return Err("tolerances must be positive".to_string());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ResidualTolerance,
    StepTolerance,
    MaxIterations,
    /// The damping cap was reached without an acceptable step.
    StalledLambda,
    /// The damped normal equations failed at every damping level.
    SolverFailure,
}

impl Termination {
    pub fn converged(&self) -> bool {
        matches!(self, Termination::ResidualTolerance | Termination::StepTolerance)
    }
}

/// One row of the iteration history (the initial state is iteration 0).
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual_norm: f64,
    pub residual_dg: f64,
    pub residual_ice: f64,
    pub lambda: f64,
    pub step_norm: f64,
    pub accepted: bool,
    pub negative_state: bool,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub termination: Termination,
    pub residual_norm: f64,
    pub residual_dg: f64,
    pub residual_ice: f64,
    pub history: Vec<IterationRecord>,
    pub negative_state_events: usize,
    pub wall_seconds: f64,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes 0.5||R||^2 from `u0`. Returns the best iterate and the report.
pub fn minimize<P: LeastSquaresProblem>(
    problem: &P,
    u0: &[f64],
    cfg: &LmConfig,
) -> (Vec<f64>, SolveReport) {
    minimize_observed(problem, u0, cfg, |_, _| {})
}

/// `minimize` with a per-accepted-iterate observer (iteration index, current
/// unknowns); used to capture geometry trajectories.
pub fn minimize_observed<P: LeastSquaresProblem>(
    problem: &P,
    u0: &[f64],
    cfg: &LmConfig,
    mut observer: impl FnMut(usize, &[f64]),
) -> (Vec<f64>, SolveReport) {
    cfg.validate().expect("invalid solver configuration");
    let start = Timer::start();
    let n = problem.num_unknowns();
    let m = problem.num_residuals();
    assert!(m >= n, "least-squares system must not be under-determined");

    let scaling = if cfg.use_scaling {
        problem.column_scaling(cfg.geometry_scale)
    } else {
        vec![1.0; n]
    };

    let mut u = u0.to_vec();
    let mut r = vec![0.0; m];
    problem.residual(&u, &mut r);
    let mut norm = l2(&r);
    let (dg, ice) = problem.split_norms(&r);
    let mut lambda = cfg.lambda0;
    let mut history = vec![IterationRecord {
        iter: 0,
        residual_norm: norm,
        residual_dg: dg,
        residual_ice: ice,
        lambda,
        step_norm: 0.0,
        accepted: true,
        negative_state: problem.poll_negative_flag(),
    }];
    observer(0, &u);

    let mut termination = Termination::MaxIterations;
    if norm <= cfg.tol_residual {
        termination = Termination::ResidualTolerance;
        let report = SolveReport {
            iterations: 0,
            termination,
            residual_norm: norm,
            residual_dg: dg,
            residual_ice: ice,
            history,
            negative_state_events: problem.negative_state_events(),
            wall_seconds: start.seconds(),
        };
        return (u, report);
    }

    let mut iter = 0;
    'outer: while iter < cfg.max_iter {
        let jac = problem.jacobian(&u, &r);
        // Right-preconditioned normal equations.
        let mut jac_scaled = jac;
        for (c, &s) in scaling.iter().enumerate() {
            if s != 1.0 {
                jac_scaled.column_mut(c).scale_mut(s);
            }
        }
        let normal = jac_scaled.transpose() * &jac_scaled;
        let gradient = jac_scaled.transpose() * DVector::from_column_slice(&r);

        // Inner loop: retry the same Jacobian with increasing damping.
        loop {
            iter += 1;
            let mut damped = normal.clone();
            for d in 0..n {
                damped[(d, d)] += lambda * normal[(d, d)] + lambda * cfg.eps_diag;
            }
            let step_scaled = damped.cholesky().map(|ch| ch.solve(&(-&gradient)));
            let Some(step_scaled) = step_scaled else {
                // Singular normal matrix: escalate the damping.
                history.push(IterationRecord {
                    iter,
                    residual_norm: norm,
                    residual_dg: history.last().unwrap().residual_dg,
                    residual_ice: history.last().unwrap().residual_ice,
                    lambda,
                    step_norm: 0.0,
                    accepted: false,
                    negative_state: false,
                });
                lambda = (lambda * cfg.lambda_up).max(LAMBDA_MIN);
                if lambda > LAMBDA_MAX {
                    termination = Termination::SolverFailure;
                    break 'outer;
                }
                if iter >= cfg.max_iter {
                    break 'outer;
                }
                continue;
            };
            let step: Vec<f64> =
                step_scaled.iter().zip(&scaling).map(|(d, s)| d * s).collect();
            let step_norm = l2(&step);

            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + b).collect();
            let mut r_trial = vec![0.0; m];
            problem.residual(&trial, &mut r_trial);
            let trial_norm = l2(&r_trial);
            let negative = problem.poll_negative_flag();

            // NaN trial norms fail this comparison and are rejected.
            if trial_norm < norm {
                u = trial;
                r = r_trial;
                norm = trial_norm;
                lambda = (lambda * cfg.lambda_down).max(LAMBDA_MIN);
                let (dg, ice) = problem.split_norms(&r);
                history.push(IterationRecord {
                    iter,
                    residual_norm: norm,
                    residual_dg: dg,
                    residual_ice: ice,
                    lambda,
                    step_norm,
                    accepted: true,
                    negative_state: negative,
                });
                observer(iter, &u);
                if norm <= cfg.tol_residual {
                    termination = Termination::ResidualTolerance;
                    break 'outer;
                }
                if step_norm <= cfg.tol_step {
                    termination = Termination::StepTolerance;
                    break 'outer;
                }
                if iter >= cfg.max_iter {
                    break 'outer;
                }
                break; // fresh Jacobian
            } else {
                history.push(IterationRecord {
                    iter,
                    residual_norm: norm,
                    residual_dg: history.last().unwrap().residual_dg,
                    residual_ice: history.last().unwrap().residual_ice,
                    lambda,
                    step_norm,
                    accepted: false,
                    negative_state: negative,
                });
                lambda *= cfg.lambda_up;
                if lambda > LAMBDA_MAX {
                    termination = Termination::StalledLambda;
                    break 'outer;
                }
                if step_norm <= cfg.tol_step && lambda > 1.0 {
                    // The model proposes no meaningful step even fully damped.
                    termination = Termination::StepTolerance;
                    break 'outer;
                }
                if iter >= cfg.max_iter {
                    break 'outer;
                }
            }
        }
    }

    let (dg, ice) = problem.split_norms(&r);
    let report = SolveReport {
        iterations: iter,
        termination,
        residual_norm: norm,
        residual_dg: dg,
        residual_ice: ice,
        history,
        negative_state_events: problem.negative_state_events(),
        wall_seconds: start.seconds(),
    };
    (u, report)
}

//! Bilevel Pareto descent: at every outer step the inner solver picks
//! simplex weights minimizing `||G alpha||^2`, the weighted gradient
//! combination `d = G alpha` is a common descent direction for all
//! objectives (or zero at a Pareto-stationary point), and the parameters
//! step along `-eta d`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{evaluate, gradient_matrix, GradientMatrix, ObjectiveBundle, ParameterVector};
use crate::simplex::{solve_inner, InnerSolveReport, SimplexWeights};

/// Which objective vector supplied the recorded step direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepMode {
    /// Descent on the main objective vector.
    Main,
    /// Descent on the preference-augmented objective vector.
    Preference,
    /// Step along the preference gradient alone (frontier tracing).
    KlOnly,
}

impl StepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StepMode::Main => "main",
            StepMode::Preference => "preference",
            StepMode::KlOnly => "kl-only",
        }
    }
}

/// One recorded optimizer state.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub w: ParameterVector,
    pub objective_values: Array1<f64>,
    /// Inner-solve weights behind the step; absent for kl-only steps.
    pub alpha: Option<SimplexWeights>,
    pub direction_norm: f64,
    pub mode: StepMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdoConfig {
    /// Outer step size eta.
    pub eta: f64,
    /// Inner step size rho; `None` estimates it per outer iteration.
    pub rho: Option<f64>,
    /// Inner iterations K per outer step.
    pub inner_iters: usize,
    /// Outer iteration budget T.
    pub outer_iters: usize,
    /// Early stop once `||d||` falls to this; `d = 0` certifies Pareto
    /// stationarity.
    pub stationarity_tol: f64,
    /// Hand unit-norm gradient columns to the inner solve (and use the same
    /// columns for the step), guarding against scale disparity between
    /// objectives.
    pub normalize_gradients: bool,
    /// Re-use the previous outer iteration's alpha as the inner start.
    pub warm_start_alpha: bool,
    /// Record every n-th iteration (the terminal point is always recorded).
    pub record_every: usize,
    /// Halve the step when any objective increases, restoring the
    /// monotone-descent property at finite step sizes.
    pub backtracking: bool,
}

impl Default for PdoConfig {
    fn default() -> Self {
        PdoConfig {
            eta: 0.1,
            rho: None,
            inner_iters: 100,
            outer_iters: 1000,
            stationarity_tol: 1e-6,
            normalize_gradients: true,
            warm_start_alpha: true,
            record_every: 1,
            backtracking: false,
        }
    }
}

impl PdoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::usage("eta must be positive"));
        }
        if self.inner_iters == 0 || self.outer_iters == 0 {
            return Err(Error::usage("iteration budgets must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::usage("record_every must be at least 1"));
        }
        if self.stationarity_tol < 0.0 {
            return Err(Error::usage("stationarity tolerance must be nonnegative"));
        }
        Ok(())
    }
}

/// A finished optimizer run: terminal parameters plus the recorded trajectory.
#[derive(Debug, Clone)]
pub struct OptimizerRun {
    pub final_w: ParameterVector,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Outer steps actually taken.
    pub steps_taken: usize,
    /// Whether the stationarity test stopped the run before the budget.
    pub converged: bool,
}

/// Weighted objective sum `psi = sum_i alpha_i h_i`.
pub fn psi(values: &Array1<f64>, alpha: &SimplexWeights) -> f64 {
    assert_eq!(values.len(), alpha.len(), "psi: length mismatch");
    values.dot(alpha.as_array())
}

/// Common descent direction `d = G alpha`. For alpha at the inner optimum,
/// `<d, g_i> >= 0` for every column `i`.
pub fn descent_direction(g: &GradientMatrix, alpha: &SimplexWeights) -> Array1<f64> {
    assert_eq!(
        g.num_objectives(),
        alpha.len(),
        "descent_direction: length mismatch"
    );
    g.columns.dot(alpha.as_array())
}

/// First-order Pareto stationarity test: approximates `min ||G alpha||`
/// over the simplex with the given inner budget and compares against `tol`.
/// Returns the decision and the achieved minimum norm.
pub fn is_pareto_stationary(
    g: &GradientMatrix,
    tol: f64,
    inner_budget: usize,
) -> Result<(bool, f64)> {
    let report = solve_inner(
        g,
        &SimplexWeights::uniform(g.num_objectives()),
        None,
        inner_budget,
    )?;
    let min_norm = report.phi_value.max(0.0).sqrt();
    Ok((min_norm <= tol, min_norm))
}

pub(crate) struct StepOutcome {
    pub report: InnerSolveReport,
    pub direction: Array1<f64>,
}

/// Inner solve + direction for one outer iteration.
pub(crate) fn solve_direction(
    g: &GradientMatrix,
    alpha0: &SimplexWeights,
    rho: Option<f64>,
    inner_iters: usize,
) -> Result<StepOutcome> {
    let report = solve_inner(g, alpha0, rho, inner_iters)?;
    let direction = descent_direction(g, &report.weights);
    Ok(StepOutcome { report, direction })
}

/// Run PDO from `w0`.
pub fn run_pdo(
    bundle: &dyn ObjectiveBundle,
    w0: &ParameterVector,
    config: &PdoConfig,
) -> Result<OptimizerRun> {
    config.validate()?;
    let m = bundle.num_objectives();
    let mut w = w0.clone();
    let mut alpha = SimplexWeights::uniform(m);
    let mut trajectory = Vec::new();
    let mut steps_taken = 0;
    let mut converged = false;

    for t in 0..=config.outer_iters {
        let at = |e: Error| match e {
            Error::Numeric(msg) => Error::numeric(format!("outer iteration {t}: {msg}")),
            other => other,
        };
        let values = evaluate(bundle, &w).map_err(at)?;
        let g = gradient_matrix(bundle, &w, config.normalize_gradients).map_err(at)?;
        if !config.warm_start_alpha {
            alpha = SimplexWeights::uniform(m);
        }
        let outcome = solve_direction(&g, &alpha, config.rho, config.inner_iters)?;
        alpha = outcome.report.weights.clone();
        let direction = outcome.direction;
        let direction_norm = direction.dot(&direction).sqrt();

        let terminal = direction_norm <= config.stationarity_tol || t == config.outer_iters;
        if terminal || t % config.record_every == 0 {
            trajectory.push(TrajectoryPoint {
                iteration: t,
                w: w.clone(),
                objective_values: values.clone(),
                alpha: Some(alpha.clone()),
                direction_norm,
                mode: StepMode::Main,
            });
        }
        if terminal {
            converged = direction_norm <= config.stationarity_tol;
            break;
        }

        let mut eta = config.eta;
        if config.backtracking {
            // halve until no objective increases (first-order slack only)
            for _ in 0..30 {
                let candidate = &w - &(&direction * eta);
                let next = evaluate(bundle, &candidate).map_err(at)?;
                if next.iter().zip(values.iter()).all(|(n, c)| *n <= c + 1e-12) {
                    break;
                }
                eta *= 0.5;
            }
        }
        w = &w - &(&direction * eta);
        steps_taken += 1;
    }

    Ok(OptimizerRun {
        final_w: w,
        trajectory,
        steps_taken,
        converged,
    })
}

//! Preference-based Pareto descent: a strictly positive preference vector
//! `pi` declares the desired ratio between terminal objective values
//! (`pi_1 h_1 = ... = pi_m h_m`). The softmax of `pi .* h` is compared to
//! the uniform distribution through a KL objective that vanishes exactly on
//! the preference line; appending it to the objective vector and switching
//! descent sources near the line (Case I) or on the frontier (Case II)
//! drives the iterate to the line/frontier intersection while tracing
//! frontier points along the way.

use ndarray::{concatenate, Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{
    evaluate, gradient_matrix, GradientMatrix, ObjectiveBundle, ParameterVector,
};
use crate::pdo::{solve_direction, OptimizerRun, PdoConfig, StepMode, TrajectoryPoint};
use crate::simplex::SimplexWeights;

/// Strictly positive preferences over objectives, unnormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    pi: Vec<f64>,
}

impl PreferenceVector {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::usage("preference vector must not be empty"));
        }
        if pi.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::usage(
                "preference vector entries must be strictly positive and finite",
            ));
        }
        Ok(PreferenceVector { pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Reciprocals `p_i = 1 / pi_i`; the preference line passes through `p`.
    pub fn reciprocals(&self) -> Vec<f64> {
        self.pi.iter().map(|&v| 1.0 / v).collect()
    }

    /// Residuals `|pi_i h_i - pi_j h_j|` over all pairs, reported at the end
    /// of a tracing run.
    pub fn ratio_residuals(&self, values: &Array1<f64>) -> Vec<f64> {
        let scaled: Vec<f64> = self
            .pi
            .iter()
            .zip(values.iter())
            .map(|(p, h)| p * h)
            .collect();
        let mut out = Vec::new();
        for i in 0..scaled.len() {
            for j in (i + 1)..scaled.len() {
                out.push((scaled[i] - scaled[j]).abs());
            }
        }
        out
    }
}

/// Softmax scores, KL value, and the KL gradient decomposition at one point.
#[derive(Debug, Clone)]
pub struct PreferenceState {
    /// Softmax of `pi .* h`; positive, sums to one.
    pub sigma: Array1<f64>,
    /// KL divergence to the uniform distribution; zero exactly on the
    /// preference line.
    pub kl_value: f64,
    /// Coefficients with `kl_gradient = sum_i lambda_i g_i`.
    pub lambda: Array1<f64>,
    pub kl_gradient: Array1<f64>,
}

/// Softmax of the preference-scaled objective values, computed with
/// max-subtraction so large logits cannot overflow.
pub fn softmax_scores(values: &Array1<f64>, pref: &PreferenceVector) -> Array1<f64> {
    assert_eq!(values.len(), pref.len(), "softmax_scores: length mismatch");
    let logits: Array1<f64> = Array1::from_iter(
        values
            .iter()
            .zip(pref.pi().iter())
            .map(|(h, p)| h * p),
    );
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.mapv(|z| (z - max).exp());
    let total = exps.sum();
    exps / total
}

/// `h_KL = sum_i sigma_i log(m sigma_i)`, nonnegative and zero iff the
/// scores are uniform.
pub fn kl_objective(values: &Array1<f64>, pref: &PreferenceVector) -> f64 {
    let sigma = softmax_scores(values, pref);
    kl_from_scores(&sigma)
}

fn kl_from_scores(sigma: &Array1<f64>) -> f64 {
    let m = sigma.len() as f64;
    let kl: f64 = sigma
        .iter()
        .map(|&s| if s > 0.0 { s * (m * s).ln() } else { 0.0 })
        .sum();
    kl.max(0.0)
}

/// Full preference state at `w`: scores, KL value, the coefficients
/// `lambda_i = pi_i sigma_i (log(m sigma_i) - h_KL)`, and the resulting
/// gradient `g_KL = sum_i lambda_i g_i`.
///
/// `g` must carry raw (unnormalized) gradient columns of the same `m`
/// objectives, in the same order as `values`; the chain rule behind the
/// lambda coefficients does not survive column rescaling.
pub fn kl_gradient(
    values: &Array1<f64>,
    g: &GradientMatrix,
    pref: &PreferenceVector,
) -> Result<PreferenceState> {
    if g.normalized {
        return Err(Error::usage(
            "kl_gradient requires raw gradient columns, not normalized ones",
        ));
    }
    if values.len() != pref.len() || g.num_objectives() != pref.len() {
        return Err(Error::usage(format!(
            "kl_gradient: {} values, {} gradient columns, {} preferences",
            values.len(),
            g.num_objectives(),
            pref.len()
        )));
    }
    let sigma = softmax_scores(values, pref);
    let kl_value = kl_from_scores(&sigma);
    let m = sigma.len() as f64;
    let lambda = Array1::from_iter(
        sigma
            .iter()
            .zip(pref.pi().iter())
            .map(|(&s, &p)| {
                if s > 0.0 {
                    p * s * ((m * s).ln() - kl_value)
                } else {
                    0.0
                }
            }),
    );
    let kl_gradient = g.columns.dot(&lambda);
    Ok(PreferenceState {
        sigma,
        kl_value,
        lambda,
        kl_gradient,
    })
}

/// A bundle with the KL steering objective appended at index `m`.
pub struct AugmentedBundle<B> {
    inner: B,
    pref: PreferenceVector,
}

/// Append `h_KL(., pi)` to a bundle as one more objective.
pub fn augmented_bundle<B: ObjectiveBundle>(inner: B, pref: PreferenceVector) -> AugmentedBundle<B> {
    AugmentedBundle { inner, pref }
}

impl<B: ObjectiveBundle> ObjectiveBundle for AugmentedBundle<B> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn num_objectives(&self) -> usize {
        self.inner.num_objectives() + 1
    }

    fn value(&self, index: usize, w: &ParameterVector) -> f64 {
        if index < self.inner.num_objectives() {
            self.inner.value(index, w)
        } else {
            kl_objective(&self.inner.values(w), &self.pref)
        }
    }

    fn gradient(&self, index: usize, w: &ParameterVector) -> Array1<f64> {
        if index < self.inner.num_objectives() {
            self.inner.gradient(index, w)
        } else {
            let values = self.inner.values(w);
            let cols = GradientMatrix {
                columns: self.inner.gradient_columns(w),
                normalized: false,
            };
            kl_gradient(&values, &cols, &self.pref)
                .expect("inner bundle matches preference length")
                .kl_gradient
        }
    }

    fn values(&self, w: &ParameterVector) -> Array1<f64> {
        let inner = self.inner.values(w);
        let kl = kl_objective(&inner, &self.pref);
        let mut out = inner.to_vec();
        out.push(kl);
        Array1::from_vec(out)
    }

    fn gradient_columns(&self, w: &ParameterVector) -> ndarray::Array2<f64> {
        let values = self.inner.values(w);
        let cols = self.inner.gradient_columns(w);
        let wrapped = GradientMatrix {
            columns: cols,
            normalized: false,
        };
        let state = kl_gradient(&values, &wrapped, &self.pref)
            .expect("inner bundle matches preference length");
        let kl_col = state
            .kl_gradient
            .into_shape_with_order((self.inner.param_dim(), 1))
            .expect("column reshape");
        concatenate(Axis(1), &[wrapped.columns.view(), kl_col.view()]).expect("concat")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PbpdoConfig {
    #[serde(flatten)]
    pub base: PdoConfig,
    /// Case I threshold on `||g_KL||`: close enough to the preference line
    /// to descend the raw objective vector.
    pub eps1: f64,
    /// Case II threshold on `||d|| / ||g_KL||`: on the frontier before the
    /// desired point, step along `g_KL` to trace it.
    pub eps2: f64,
    /// Termination requires both `||d|| <= stationarity_tol` and
    /// `kl_value <= kl_tol`.
    pub kl_tol: f64,
}

impl Default for PbpdoConfig {
    fn default() -> Self {
        PbpdoConfig {
            base: PdoConfig::default(),
            eps1: 1e-2,
            eps2: 1e-2,
            kl_tol: 1e-6,
        }
    }
}

impl PbpdoConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.eps1 > 0.0) || !(self.eps2 > 0.0) {
            return Err(Error::usage("eps1 and eps2 must be positive"));
        }
        if self.kl_tol < 0.0 {
            return Err(Error::usage("kl_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Run PB-PDO from `w0` toward the preference-line/frontier intersection.
pub fn run_pbpdo(
    bundle: &dyn ObjectiveBundle,
    pref: &PreferenceVector,
    w0: &ParameterVector,
    config: &PbpdoConfig,
) -> Result<OptimizerRun> {
    config.validate()?;
    let m = bundle.num_objectives();
    if pref.len() != m {
        return Err(Error::usage(format!(
            "preference vector has length {}, bundle has {m} objectives",
            pref.len()
        )));
    }

    let base = &config.base;
    let mut w = w0.clone();
    // warm start resets whenever the active bundle switches between m and
    // m + 1 objectives
    let mut alpha = SimplexWeights::uniform(m);
    let mut trajectory = Vec::new();
    let mut steps_taken = 0;
    let mut converged = false;

    for t in 0..=base.outer_iters {
        let at = |e: Error| match e {
            Error::Numeric(msg) => Error::numeric(format!("outer iteration {t}: {msg}")),
            other => other,
        };
        let values = evaluate(bundle, &w).map_err(at)?;
        let raw = gradient_matrix(bundle, &w, false).map_err(at)?;
        let state = kl_gradient(&values, &raw, pref)?;
        let gkl_norm = state.kl_gradient.dot(&state.kl_gradient).sqrt();

        // Case I picks the descent source: near the preference line the raw
        // objective vector, elsewhere the augmented one. `main_norm` is the
        // step norm of the raw bundle, the frontier-membership certificate
        // behind Case II.
        let (mut direction, mut mode, mut step_alpha, main_norm);
        if gkl_norm <= config.eps1 {
            let g = GradientMatrix::from_columns(raw.columns.clone(), base.normalize_gradients);
            if !base.warm_start_alpha || alpha.len() != m {
                alpha = SimplexWeights::uniform(m);
            }
            let outcome = solve_direction(&g, &alpha, base.rho, base.inner_iters)?;
            alpha = outcome.report.weights.clone();
            main_norm = outcome.direction.dot(&outcome.direction).sqrt();
            direction = outcome.direction;
            mode = StepMode::Main;
            step_alpha = Some(alpha.clone());
        } else {
            let kl_col = state
                .kl_gradient
                .clone()
                .into_shape_with_order((raw.param_dim(), 1))
                .expect("column reshape");
            let aug_cols =
                concatenate(Axis(1), &[raw.columns.view(), kl_col.view()]).expect("concat");
            let g = GradientMatrix::from_columns(aug_cols, base.normalize_gradients);
            if !base.warm_start_alpha || alpha.len() != m + 1 {
                alpha = SimplexWeights::uniform(m + 1);
            }
            let outcome = solve_direction(&g, &alpha, base.rho, base.inner_iters)?;
            alpha = outcome.report.weights.clone();
            let d = outcome.direction;
            let dn = d.dot(&d).sqrt();

            let g_main =
                GradientMatrix::from_columns(raw.columns.clone(), base.normalize_gradients);
            let main_outcome = solve_direction(
                &g_main,
                &SimplexWeights::uniform(m),
                base.rho,
                base.inner_iters,
            )?;
            main_norm = main_outcome.direction.dot(&main_outcome.direction).sqrt();

            if dn / gkl_norm <= config.eps2 && main_norm / gkl_norm > config.eps2 {
                // the augmented vector is stationary (g_KL nearly collinear
                // with an objective gradient) but h is not: descend h to
                // escape toward the frontier
                direction = main_outcome.direction;
                mode = StepMode::Main;
                step_alpha = Some(main_outcome.report.weights);
            } else {
                direction = d;
                mode = StepMode::Preference;
                step_alpha = Some(alpha.clone());
            }
        }

        // Case II: on the frontier before the desired point the raw bundle
        // is stationary while g_KL is not; stepping along g_KL (itself a
        // combination of objective gradients) traces the frontier. A zero
        // g_KL means the iterate is exactly on the preference line and
        // there is nothing to trace.
        if gkl_norm > 0.0 && main_norm / gkl_norm <= config.eps2 {
            direction = state.kl_gradient.clone();
            mode = StepMode::KlOnly;
            step_alpha = None;
        }

        let direction_norm = direction.dot(&direction).sqrt();
        let terminal = (direction_norm <= base.stationarity_tol
            && state.kl_value <= config.kl_tol)
            || t == base.outer_iters;
        if terminal || t % base.record_every == 0 {
            trajectory.push(TrajectoryPoint {
                iteration: t,
                w: w.clone(),
                objective_values: values.clone(),
                alpha: step_alpha,
                direction_norm,
                mode,
            });
        }
        if terminal {
            converged =
                direction_norm <= base.stationarity_tol && state.kl_value <= config.kl_tol;
            break;
        }

        w = &w - &(&direction * base.eta);
        steps_taken += 1;
    }

    Ok(OptimizerRun {
        final_w: w,
        trajectory,
        steps_taken,
        converged,
    })
}

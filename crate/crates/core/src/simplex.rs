//! Inner level of the bilevel program: minimize `phi(alpha) = ||G alpha||^2`
//! over the probability simplex by projected gradient descent.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::objective::GradientMatrix;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Array1<f64>);

impl SimplexWeights {
    /// Validate and wrap a weight vector. Entries down to -1e-12 are
    /// clamped to zero; anything more negative or a sum off by more than
    /// 1e-9 is rejected.
    pub fn new(alpha: Array1<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::usage("simplex weights need at least one entry"));
        }
        let mut alpha = alpha;
        for v in alpha.iter_mut() {
            if !v.is_finite() || *v < -1e-12 {
                return Err(Error::usage(format!("invalid simplex weight {v}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = alpha.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!("simplex weights sum to {sum}, not 1")));
        }
        Ok(SimplexWeights(alpha))
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m >= 1);
        SimplexWeights(Array1::from_elem(m, 1.0 / m as f64))
    }

    pub fn one_hot(m: usize, index: usize) -> Self {
        assert!(index < m);
        let mut alpha = Array1::zeros(m);
        alpha[index] = 1.0;
        SimplexWeights(alpha)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array1<f64> {
        self.0
    }
}

/// Euclidean projection onto the simplex via sort-then-threshold, O(m log m).
/// Feasible inputs are returned unchanged, making the projection exactly
/// idempotent.
pub fn project_simplex(v: &Array1<f64>) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::usage("cannot project an empty vector onto a simplex"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::usage("cannot project non-finite values onto a simplex"));
    }
    if v.iter().all(|&x| x >= 0.0) && (v.sum() - 1.0).abs() <= 1e-9 {
        return SimplexWeights::new(v.clone());
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    let projected = v.mapv(|x| (x - tau).max(0.0));
    SimplexWeights::new(projected)
}

/// `phi(alpha) = ||G alpha||^2`, the inner objective.
pub fn phi(g: &GradientMatrix, alpha: &SimplexWeights) -> f64 {
    let combined = g.columns.dot(alpha.as_array());
    combined.dot(&combined)
}

/// Outcome of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerSolveReport {
    pub weights: SimplexWeights,
    pub phi_value: f64,
    pub iterations_run: usize,
    /// phi after the initial point and after every update step.
    pub phi_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InnerSolveOptions {
    /// Step size; `None` estimates `1 / (2 ||G||_F^2 + eps)` from the Gram
    /// matrix, a safe bound since `||G||_F^2 >= lambda_max(G^T G)`.
    pub rho: Option<f64>,
    /// Iteration budget K.
    pub max_iters: usize,
    /// Early exit once phi drops to this value.
    pub tol: f64,
    /// Early exit once a step improves phi by less than this.
    pub min_improvement: f64,
    /// Disable to run exactly `max_iters` steps.
    pub early_exit: bool,
}

impl InnerSolveOptions {
    pub fn with_budget(max_iters: usize) -> Self {
        InnerSolveOptions {
            rho: None,
            max_iters,
            tol: 1e-12,
            min_improvement: 1e-14,
            early_exit: true,
        }
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration,
/// floored by the largest diagonal entry. Used to pick a step size with
/// `rho <= 1/(2 lambda_max)`, which keeps projected descent monotone.
fn lambda_max(gram: &Array2<f64>) -> f64 {
    let m = gram.nrows();
    let max_diag = gram.diag().iter().cloned().fold(0.0f64, f64::max);
    // deterministic non-symmetric start so the top eigenvector is reachable
    let mut v = Array1::from_iter((1..=m).map(|i| i as f64));
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..64 {
        let mv = gram.dot(&v);
        let norm = mv.dot(&mv).sqrt();
        if norm <= 0.0 {
            break;
        }
        v = mv / norm;
        estimate = v.dot(&gram.dot(&v));
    }
    estimate.max(max_diag)
}

/// Projected gradient descent on `phi` from `alpha0`:
/// `alpha <- proj(alpha - rho * 2 G^T G alpha)`, K steps.
pub fn solve_inner(
    g: &GradientMatrix,
    alpha0: &SimplexWeights,
    rho: Option<f64>,
    max_iters: usize,
) -> Result<InnerSolveReport> {
    solve_inner_with(
        g,
        alpha0,
        &InnerSolveOptions {
            rho,
            ..InnerSolveOptions::with_budget(max_iters)
        },
    )
}

pub fn solve_inner_with(
    g: &GradientMatrix,
    alpha0: &SimplexWeights,
    opts: &InnerSolveOptions,
) -> Result<InnerSolveReport> {
    if alpha0.len() != g.num_objectives() {
        return Err(Error::usage(format!(
            "alpha has length {}, gradient matrix has {} columns",
            alpha0.len(),
            g.num_objectives()
        )));
    }
    if opts.max_iters == 0 {
        return Err(Error::usage("inner solve needs at least one iteration"));
    }
    if let Some(r) = opts.rho {
        if !(r > 0.0) {
            return Err(Error::usage("inner step size rho must be positive"));
        }
    }

    // phi(alpha) = alpha^T M alpha with M = G^T G; iterations are O(m^2)
    // after the one-time Gram computation.
    let gram: Array2<f64> = g.columns.t().dot(&g.columns);
    let rho = opts.rho.unwrap_or_else(|| 1.0 / (2.04 * lambda_max(&gram) + 1e-12));

    let mut alpha = alpha0.clone().into_array();
    let mut phi_value = alpha.dot(&gram.dot(&alpha));
    let mut trace = vec![phi_value];
    let mut iterations_run = 0;

    for _ in 0..opts.max_iters {
        if opts.early_exit && phi_value <= opts.tol {
            break;
        }
        let grad = gram.dot(&alpha) * 2.0;
        let stepped = &alpha - &(grad * rho);
        let projected = project_simplex(&stepped)?;
        let next = projected.into_array();
        let next_phi = next.dot(&gram.dot(&next));
        if !next_phi.is_finite() {
            return Err(Error::numeric(
                "inner solve produced a non-finite phi; try a smaller rho",
            ));
        }
        let improvement = phi_value - next_phi;
        alpha = next;
        phi_value = next_phi;
        trace.push(phi_value);
        iterations_run += 1;
        if opts.early_exit && improvement < opts.min_improvement {
            break;
        }
    }

    Ok(InnerSolveReport {
        weights: SimplexWeights::new(alpha)?,
        phi_value,
        iterations_run,
        phi_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn matrix(cols: &[&[f64]]) -> GradientMatrix {
        let d = cols[0].len();
        let mut m = Array2::zeros((d, cols.len()));
        for (i, col) in cols.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                m[[j, i]] = v;
            }
        }
        GradientMatrix::from_columns(m, false)
    }

    #[test]
    fn projection_keeps_feasible_points() {
        let v = arr1(&[0.3, 0.7]);
        let p = project_simplex(&v).unwrap();
        assert_eq!(p.as_array(), &v);
    }

    #[test]
    fn projection_symmetric_case() {
        let p = project_simplex(&arr1(&[0.6, 0.6])).unwrap();
        assert!((p.as_array()[0] - 0.5).abs() < 1e-12);
        assert!((p.as_array()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_grid_search() {
        // dense grid over the 3-simplex at resolution 1e-3 as an
        // independent optimality oracle
        let v = arr1(&[2.0, 0.0, 0.0]);
        let p = project_simplex(&v).unwrap();
        assert!((p.as_array()[0] - 1.0).abs() < 1e-12);

        let mut best = f64::INFINITY;
        let n = 1000;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let x = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ];
                let dist: f64 = x
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(dist);
            }
        }
        let ours: f64 = p
            .as_array()
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!(ours <= best + 1e-9);
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = rng.gen_range(1..=8);
            let v = Array1::from_iter((0..m).map(|_| rng.gen_range(-2.0..2.0)));
            let p = project_simplex(&v).unwrap();
            let p_dist = p
                .as_array()
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            for _ in 0..100 {
                let raw = Array1::from_iter((0..m).map(|_| -rng.gen::<f64>().ln()));
                let x = &raw / raw.sum();
                let x_dist = x
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(p_dist <= x_dist + 1e-9);
            }
        }
    }

    #[test]
    fn phi_arithmetic() {
        let g = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let alpha = SimplexWeights::uniform(2);
        assert!((phi(&g, &alpha) - 0.5).abs() < 1e-15);

        let g = matrix(&[&[1.0, 2.0], &[-1.0, -2.0]]);
        assert!(phi(&g, &alpha).abs() < 1e-15);

        let g = matrix(&[&[3.0, 4.0]]);
        let alpha = SimplexWeights::one_hot(1, 0);
        assert!((phi(&g, &alpha) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn inner_solve_orthogonal_columns() {
        // minimizer of a^2 + (1-a)^2 over the simplex is (0.5, 0.5)
        let g = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let report = solve_inner(&g, &SimplexWeights::one_hot(2, 0), Some(0.25), 200).unwrap();
        assert!((report.weights.as_array()[0] - 0.5).abs() < 1e-6);
        assert!((report.weights.as_array()[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn inner_solve_antiparallel_columns() {
        let g = matrix(&[&[2.0, 1.0], &[-2.0, -1.0]]);
        let report = solve_inner(&g, &SimplexWeights::uniform(2), None, 100).unwrap();
        assert!((report.weights.as_array()[0] - 0.5).abs() < 1e-12);
        assert!(report.phi_value < 1e-12);
    }

    #[test]
    fn inner_solve_parallel_columns() {
        // phi(alpha) = (2 - alpha_1)^2 ||g1||^2 is decreasing in alpha_1
        let g = matrix(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let report = solve_inner(&g, &SimplexWeights::uniform(2), None, 4000).unwrap();
        assert!((report.weights.as_array()[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn phi_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let d = rng.gen_range(2..10);
            let m = rng.gen_range(1..6);
            let cols =
                Array2::from_shape_fn((d, m), |_| rng.gen_range(-1.0..1.0));
            let g = GradientMatrix::from_columns(cols, false);
            let report = solve_inner(&g, &SimplexWeights::uniform(m), None, 500).unwrap();
            for pair in report.phi_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }

    #[test]
    fn exact_budget_without_early_exit() {
        let g = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let opts = InnerSolveOptions {
            early_exit: false,
            ..InnerSolveOptions::with_budget(57)
        };
        let report = solve_inner_with(&g, &SimplexWeights::uniform(2), &opts).unwrap();
        assert_eq!(report.iterations_run, 57);
        assert_eq!(report.phi_trace.len(), 58);
    }

    #[test]
    fn empty_projection_is_usage_error() {
        let v: Array1<f64> = arr1(&[]);
        assert!(matches!(project_simplex(&v), Err(Error::Usage(_))));
    }
}

//! Objective-vector abstraction: bundles of differentiable scalar objectives
//! over a shared parameter vector, gradient matrices, and a finite-difference
//! harness used to verify every analytic gradient in the crate.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Model parameters; length `d`, all entries finite.
pub type ParameterVector = Array1<f64>;

/// An ordered collection of `m` differentiable scalar objectives over a
/// `d`-dimensional parameter vector.
///
/// Index 0 is the primary loss when the bundle is built by the fairness
/// module. Implementations must be pure: repeated calls at the same `w`
/// return bit-identical results, and bundles are safe to share read-only
/// across concurrent runs.
pub trait ObjectiveBundle: Send + Sync {
    /// Parameter dimension `d`.
    fn param_dim(&self) -> usize;

    /// Number of objectives `m`.
    fn num_objectives(&self) -> usize;

    /// Value of objective `index` at `w`.
    fn value(&self, index: usize, w: &ParameterVector) -> f64;

    /// Gradient of objective `index` at `w`; length `d`.
    fn gradient(&self, index: usize, w: &ParameterVector) -> Array1<f64>;

    /// All objective values at `w`. Implementations that share work across
    /// objectives (e.g. one pass over a dataset) should override this.
    fn values(&self, w: &ParameterVector) -> Array1<f64> {
        Array1::from_iter((0..self.num_objectives()).map(|i| self.value(i, w)))
    }

    /// Raw gradient columns at `w` as a `d x m` matrix.
    fn gradient_columns(&self, w: &ParameterVector) -> Array2<f64> {
        let (d, m) = (self.param_dim(), self.num_objectives());
        let mut cols = Array2::zeros((d, m));
        for i in 0..m {
            cols.column_mut(i).assign(&self.gradient(i, w));
        }
        cols
    }
}

impl<B: ObjectiveBundle + ?Sized> ObjectiveBundle for &B {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }

    fn num_objectives(&self) -> usize {
        (**self).num_objectives()
    }

    fn value(&self, index: usize, w: &ParameterVector) -> f64 {
        (**self).value(index, w)
    }

    fn gradient(&self, index: usize, w: &ParameterVector) -> Array1<f64> {
        (**self).gradient(index, w)
    }

    fn values(&self, w: &ParameterVector) -> Array1<f64> {
        (**self).values(w)
    }

    fn gradient_columns(&self, w: &ParameterVector) -> Array2<f64> {
        (**self).gradient_columns(w)
    }
}

/// `d x m` matrix whose column `i` is the gradient of objective `i`.
#[derive(Debug, Clone)]
pub struct GradientMatrix {
    /// Gradient columns, possibly rescaled to unit norm.
    pub columns: Array2<f64>,
    /// Whether the columns were rescaled to unit Euclidean norm. Zero
    /// columns are left untouched either way.
    pub normalized: bool,
}

impl GradientMatrix {
    pub fn param_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn num_objectives(&self) -> usize {
        self.columns.ncols()
    }

    /// Build from raw columns, optionally rescaling each nonzero column to
    /// unit norm. A zero column means that objective is locally stationary;
    /// it stays zero so it cannot steer the inner solve.
    pub fn from_columns(mut columns: Array2<f64>, normalize: bool) -> Self {
        if normalize {
            for mut col in columns.columns_mut() {
                let norm = col.dot(&col).sqrt();
                if norm > 0.0 {
                    col.mapv_inplace(|v| v / norm);
                }
            }
        }
        GradientMatrix {
            columns,
            normalized: normalize,
        }
    }
}

fn check_dims(bundle: &dyn ObjectiveBundle, w: &ParameterVector) -> Result<()> {
    if w.len() != bundle.param_dim() {
        return Err(Error::usage(format!(
            "parameter vector has length {}, bundle expects {}",
            w.len(),
            bundle.param_dim()
        )));
    }
    if let Some(j) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::usage(format!(
            "parameter vector has non-finite entry at coordinate {j}"
        )));
    }
    Ok(())
}

/// Evaluate all objectives at `w`.
pub fn evaluate(bundle: &dyn ObjectiveBundle, w: &ParameterVector) -> Result<Array1<f64>> {
    check_dims(bundle, w)?;
    let values = bundle.values(w);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "objective {i} returned a non-finite value"
        )));
    }
    Ok(values)
}

/// Assemble the gradient matrix at `w`, optionally normalizing columns.
pub fn gradient_matrix(
    bundle: &dyn ObjectiveBundle,
    w: &ParameterVector,
    normalize: bool,
) -> Result<GradientMatrix> {
    check_dims(bundle, w)?;
    let cols = bundle.gradient_columns(w);
    for (i, col) in cols.columns().into_iter().enumerate() {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "gradient of objective {i} has a non-finite entry"
            )));
        }
    }
    Ok(GradientMatrix::from_columns(cols, normalize))
}

/// Max relative error between an analytic gradient and central finite
/// differences of `f` at `w`:
///
/// `max_j |(f(w + step e_j) - f(w - step e_j)) / (2 step) - g_j| / max(1, |g_j|)`
pub fn finite_difference_check<F>(
    f: F,
    analytic: &Array1<f64>,
    w: &ParameterVector,
    step: f64,
) -> f64
where
    F: Fn(&ParameterVector) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = w.clone();
    let mut worst = 0.0f64;
    for j in 0..w.len() {
        probe[j] = w[j] + step;
        let plus = f(&probe);
        probe[j] = w[j] - step;
        let minus = f(&probe);
        probe[j] = w[j];
        let numeric = (plus - minus) / (2.0 * step);
        let err = (numeric - analytic[j]).abs() / analytic[j].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Convenience wrapper checking objective `index` of a bundle.
pub fn finite_difference_check_bundle(
    bundle: &dyn ObjectiveBundle,
    index: usize,
    w: &ParameterVector,
    step: f64,
) -> f64 {
    let analytic = bundle.gradient(index, w);
    finite_difference_check(|p| bundle.value(index, p), &analytic, w, step)
}

type ValueFn = Box<dyn Fn(&ParameterVector) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&ParameterVector) -> Array1<f64> + Send + Sync>;

/// A bundle assembled from per-objective closures.
pub struct FnBundle {
    param_dim: usize,
    objectives: Vec<(ValueFn, GradFn)>,
}

impl FnBundle {
    pub fn new(param_dim: usize) -> Self {
        FnBundle {
            param_dim,
            objectives: Vec::new(),
        }
    }

    pub fn push<V, G>(mut self, value: V, gradient: G) -> Self
    where
        V: Fn(&ParameterVector) -> f64 + Send + Sync + 'static,
        G: Fn(&ParameterVector) -> Array1<f64> + Send + Sync + 'static,
    {
        self.objectives.push((Box::new(value), Box::new(gradient)));
        self
    }
}

impl ObjectiveBundle for FnBundle {
    fn param_dim(&self) -> usize {
        self.param_dim
    }

    fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    fn value(&self, index: usize, w: &ParameterVector) -> f64 {
        (self.objectives[index].0)(w)
    }

    fn gradient(&self, index: usize, w: &ParameterVector) -> Array1<f64> {
        (self.objectives[index].1)(w)
    }
}

/// Parameters of the synthetic Gaussian-pair benchmark.
#[derive(Debug, Clone)]
pub struct GaussianPairParams {
    /// Mean offset; the two objectives are centred at `nu` and `-nu`.
    pub nu: Array1<f64>,
    /// Spread; must be positive.
    pub s: f64,
}

/// The classic two-objective benchmark
///
/// `h_1(w) = 1 - exp(-||w - nu||^2 / s^2)`,
/// `h_2(w) = 1 - exp(-||w + nu||^2 / s^2)`.
///
/// Its Pareto set is the segment `{t nu : t in [-1, 1]}` in parameter space,
/// which makes it a convenient ground truth for optimizer tests.
pub struct GaussianPair {
    params: GaussianPairParams,
}

impl GaussianPair {
    pub fn new(params: GaussianPairParams) -> Result<Self> {
        if !(params.s > 0.0) {
            return Err(Error::usage("gaussian pair spread s must be positive"));
        }
        if params.nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("gaussian pair mean offset must be finite"));
        }
        Ok(GaussianPair { params })
    }

    /// The standard configuration used throughout the synthetic suites:
    /// `nu = (1, 1)`, `s = 1.5`.
    pub fn standard() -> Self {
        GaussianPair::new(GaussianPairParams {
            nu: Array1::from_elem(2, 1.0),
            s: 1.5,
        })
        .expect("standard parameters are valid")
    }

    pub fn nu(&self) -> &Array1<f64> {
        &self.params.nu
    }

    fn center(&self, index: usize) -> Array1<f64> {
        // objective 0 is centred at +nu, objective 1 at -nu
        if index == 0 {
            self.params.nu.clone()
        } else {
            -self.params.nu.clone()
        }
    }
}

pub fn make_gaussian_pair(params: GaussianPairParams) -> Result<GaussianPair> {
    GaussianPair::new(params)
}

impl ObjectiveBundle for GaussianPair {
    fn param_dim(&self) -> usize {
        self.params.nu.len()
    }

    fn num_objectives(&self) -> usize {
        2
    }

    fn value(&self, index: usize, w: &ParameterVector) -> f64 {
        let diff = w - &self.center(index);
        1.0 - (-diff.dot(&diff) / (self.params.s * self.params.s)).exp()
    }

    fn gradient(&self, index: usize, w: &ParameterVector) -> Array1<f64> {
        let s2 = self.params.s * self.params.s;
        let diff = w - &self.center(index);
        let scale = (2.0 / s2) * (-diff.dot(&diff) / s2).exp();
        diff * scale
    }
}

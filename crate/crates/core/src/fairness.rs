//! Reductions of fairness notions to objective vectors over differentiable
//! linear models.
//!
//! Equality of opportunity compares per-group losses on positively labeled
//! samples, equalized odds additionally on negatively labeled samples, and
//! disparate mistreatment on whole groups. Each pair of groups contributes
//! one penalized loss-difference objective next to the total empirical risk
//! at index 0.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::GroupedDataset;
use crate::error::{Error, Result};
use crate::objective::{ObjectiveBundle, ParameterVector};

/// Per-group index sets: all samples, positives, negatives.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    pub groups: Vec<Vec<usize>>,
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

/// Exact per-group index partition in deterministic (row) order.
pub fn partition_groups(dataset: &GroupedDataset) -> GroupPartition {
    let c = dataset.num_groups();
    let mut groups = vec![Vec::new(); c];
    let mut positives = vec![Vec::new(); c];
    let mut negatives = vec![Vec::new(); c];
    for i in 0..dataset.num_rows() {
        let g = dataset.groups[i];
        groups[g].push(i);
        if dataset.labels[i] > 0.0 {
            positives[g].push(i);
        } else {
            negatives[g].push(i);
        }
    }
    GroupPartition {
        groups,
        positives,
        negatives,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    SmoothHinge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModelSpec {
    pub kind: ModelKind,
    /// Width of the quadratic zone of the smoothed hinge.
    pub smoothing: f64,
    /// Keep the trailing intercept column out of the ridge term.
    pub fit_intercept: bool,
    /// Ridge coefficient on the weight vector (intercept excluded); set 0
    /// for the unregularized empirical risk.
    pub l2: f64,
}

impl LinearModelSpec {
    pub fn logistic() -> Self {
        LinearModelSpec {
            kind: ModelKind::Logistic,
            smoothing: 0.5,
            fit_intercept: true,
            l2: 1e-4,
        }
    }

    pub fn smooth_hinge() -> Self {
        LinearModelSpec {
            kind: ModelKind::SmoothHinge,
            ..LinearModelSpec::logistic()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ModelKind::SmoothHinge && !(self.smoothing > 0.0) {
            return Err(Error::usage("smooth-hinge smoothing width must be positive"));
        }
        if self.l2 < 0.0 {
            return Err(Error::usage("ridge coefficient must be nonnegative"));
        }
        Ok(())
    }

    /// Per-sample loss and its derivative in the margin `u = y w^T x`.
    fn loss_and_slope(&self, u: f64) -> (f64, f64) {
        match self.kind {
            ModelKind::Logistic => {
                // ln(1 + e^-u), computed without overflow
                let value = (-u).max(0.0) + (1.0 + (-u.abs()).exp()).ln();
                let slope = -1.0 / (1.0 + u.exp());
                (value, slope)
            }
            ModelKind::SmoothHinge => {
                let delta = self.smoothing;
                if u >= 1.0 {
                    (0.0, 0.0)
                } else if u >= 1.0 - delta {
                    let gap = 1.0 - u;
                    (gap * gap / (2.0 * delta), -gap / delta)
                } else {
                    (1.0 - u - delta / 2.0, -1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessNotion {
    /// Equal loss on positively labeled samples per group pair.
    Eo,
    /// Equal loss on positives and on negatives per group pair.
    Eod,
    /// Equal loss on whole groups per pair.
    Dm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    /// `phi(z) = z^2 / 2`, smooth with `phi'(0) = 0`.
    Squared,
    /// `phi(z) = |z|` with subgradient 0 at 0.
    Abs,
}

impl Penalty {
    fn value(self, z: f64) -> f64 {
        match self {
            Penalty::Squared => 0.5 * z * z,
            Penalty::Abs => z.abs(),
        }
    }

    fn slope(self, z: f64) -> f64 {
        match self {
            Penalty::Squared => z,
            Penalty::Abs => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum SubsetSign {
    Positives,
    Negatives,
    Whole,
}

#[derive(Debug, Clone)]
struct PairObjective {
    sign: SubsetSign,
    a: usize,
    b: usize,
}

/// Mean model loss plus ridge over an explicit subset of rows, with its
/// gradient.
pub fn model_loss_grad(
    spec: &LinearModelSpec,
    w: &ParameterVector,
    dataset: &GroupedDataset,
    subset: &[usize],
) -> Result<(f64, Array1<f64>)> {
    if subset.is_empty() {
        return Err(Error::usage("model_loss_grad on an empty subset"));
    }
    spec.validate()?;
    let d = dataset.num_features();
    if w.len() != d {
        return Err(Error::usage(format!(
            "weight vector has length {}, dataset has {d} features",
            w.len()
        )));
    }
    let mut value = 0.0;
    let mut grad = Array1::zeros(d);
    for &i in subset {
        let x = dataset.features.row(i);
        let u = dataset.labels[i] * x.dot(w);
        let (l, s) = spec.loss_and_slope(u);
        value += l;
        grad.scaled_add(s * dataset.labels[i], &x);
    }
    let inv = 1.0 / subset.len() as f64;
    value *= inv;
    grad *= inv;
    add_ridge(spec, w, &mut value, &mut grad);
    Ok((value, grad))
}

fn add_ridge(spec: &LinearModelSpec, w: &ParameterVector, value: &mut f64, grad: &mut Array1<f64>) {
    if spec.l2 == 0.0 {
        return;
    }
    let d = w.len();
    let limit = if spec.fit_intercept { d - 1 } else { d };
    let mut ss = 0.0;
    for j in 0..limit {
        ss += w[j] * w[j];
        grad[j] += spec.l2 * w[j];
    }
    *value += 0.5 * spec.l2 * ss;
}

/// The fairness objective vector: index 0 is the total empirical risk, the
/// rest are penalized pairwise group-loss differences.
pub struct FairnessBundle {
    data: Arc<GroupedDataset>,
    model: LinearModelSpec,
    penalty: Penalty,
    partition: GroupPartition,
    pairs: Vec<PairObjective>,
    names: Vec<String>,
}

impl FairnessBundle {
    pub fn dataset(&self) -> &Arc<GroupedDataset> {
        &self.data
    }

    pub fn model(&self) -> &LinearModelSpec {
        &self.model
    }

    pub fn objective_names(&self) -> &[String] {
        &self.names
    }

    fn subset(&self, sign: SubsetSign, g: usize) -> &[usize] {
        match sign {
            SubsetSign::Positives => &self.partition.positives[g],
            SubsetSign::Negatives => &self.partition.negatives[g],
            SubsetSign::Whole => &self.partition.groups[g],
        }
    }

    /// Per-sample margin losses and slopes in one pass.
    fn pass(&self, w: &ParameterVector) -> (Array1<f64>, Array1<f64>) {
        let scores = self.data.features.dot(w);
        let n = self.data.num_rows();
        let mut losses = Array1::zeros(n);
        let mut slopes = Array1::zeros(n);
        for i in 0..n {
            let (l, s) = self.model.loss_and_slope(self.data.labels[i] * scores[i]);
            losses[i] = l;
            slopes[i] = s;
        }
        (losses, slopes)
    }

    fn subset_mean(&self, losses: &Array1<f64>, subset: &[usize]) -> f64 {
        let sum: f64 = subset.iter().map(|&i| losses[i]).sum();
        sum / subset.len() as f64
    }

    fn subset_grad(&self, slopes: &Array1<f64>, subset: &[usize], w: &ParameterVector) -> Array1<f64> {
        let mut grad = Array1::zeros(self.data.num_features());
        for &i in subset {
            grad.scaled_add(slopes[i] * self.data.labels[i], &self.data.features.row(i));
        }
        grad /= subset.len() as f64;
        let mut unused = 0.0;
        add_ridge(&self.model, w, &mut unused, &mut grad);
        grad
    }
}

impl ObjectiveBundle for FairnessBundle {
    fn param_dim(&self) -> usize {
        self.data.num_features()
    }

    fn num_objectives(&self) -> usize {
        1 + self.pairs.len()
    }

    fn value(&self, index: usize, w: &ParameterVector) -> f64 {
        self.values(w)[index]
    }

    fn gradient(&self, index: usize, w: &ParameterVector) -> Array1<f64> {
        self.gradient_columns(w).column(index).to_owned()
    }

    fn values(&self, w: &ParameterVector) -> Array1<f64> {
        let (losses, _) = self.pass(w);
        let mut ridge = 0.0;
        let mut ridge_grad = Array1::zeros(self.data.num_features());
        add_ridge(&self.model, w, &mut ridge, &mut ridge_grad);

        let all: Vec<usize> = (0..self.data.num_rows()).collect();
        let mut out = Vec::with_capacity(self.num_objectives());
        out.push(self.subset_mean(&losses, &all) + ridge);
        for pair in &self.pairs {
            let la = self.subset_mean(&losses, self.subset(pair.sign, pair.a));
            let lb = self.subset_mean(&losses, self.subset(pair.sign, pair.b));
            out.push(self.penalty.value(la - lb));
        }
        Array1::from_vec(out)
    }

    fn gradient_columns(&self, w: &ParameterVector) -> Array2<f64> {
        let (losses, slopes) = self.pass(w);
        let d = self.data.num_features();
        let mut cols = Array2::zeros((d, self.num_objectives()));

        let all: Vec<usize> = (0..self.data.num_rows()).collect();
        cols.column_mut(0).assign(&self.subset_grad(&slopes, &all, w));

        for (k, pair) in self.pairs.iter().enumerate() {
            let sa = self.subset(pair.sign, pair.a);
            let sb = self.subset(pair.sign, pair.b);
            let la = self.subset_mean(&losses, sa);
            let lb = self.subset_mean(&losses, sb);
            // ridge contributions cancel inside the difference
            let ga = self.subset_grad(&slopes, sa, w);
            let gb = self.subset_grad(&slopes, sb, w);
            let slope = self.penalty.slope(la - lb);
            cols.column_mut(k + 1).assign(&((ga - gb) * slope));
        }
        cols
    }
}

/// Build the objective vector for a notion (or plain empirical risk when
/// `notion` is `None`). Checks that every subset a notion needs is
/// populated.
pub fn build_objectives(
    notion: Option<FairnessNotion>,
    model: &LinearModelSpec,
    data: Arc<GroupedDataset>,
    penalty: Penalty,
) -> Result<FairnessBundle> {
    model.validate()?;
    let partition = partition_groups(&data);
    let c = data.num_groups();

    let needs: &[SubsetSign] = match notion {
        None => &[],
        Some(FairnessNotion::Eo) => &[SubsetSign::Positives],
        Some(FairnessNotion::Eod) => &[SubsetSign::Positives, SubsetSign::Negatives],
        Some(FairnessNotion::Dm) => &[SubsetSign::Whole],
    };
    for sign in needs {
        for g in 0..c {
            let (set, what) = match sign {
                SubsetSign::Positives => (&partition.positives[g], "positive"),
                SubsetSign::Negatives => (&partition.negatives[g], "negative"),
                SubsetSign::Whole => (&partition.groups[g], "any"),
            };
            if set.is_empty() {
                return Err(Error::usage(format!(
                    "group '{}' has no {what} samples, required by the chosen fairness notion",
                    data.group_names[g]
                )));
            }
        }
    }

    let mut pairs = Vec::new();
    let mut names = vec!["loss".to_string()];
    for sign in needs {
        for a in 0..c {
            for b in (a + 1)..c {
                pairs.push(PairObjective { sign: *sign, a, b });
                let tag = match sign {
                    SubsetSign::Positives => "tpr",
                    SubsetSign::Negatives => "tnr",
                    SubsetSign::Whole => "err",
                };
                names.push(format!(
                    "{tag}[{}-{}]",
                    data.group_names[a], data.group_names[b]
                ));
            }
        }
    }

    Ok(FairnessBundle {
        data,
        model: model.clone(),
        penalty,
        partition,
        pairs,
        names,
    })
}

/// Per-group rates of a sign predictor plus the DEO summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessMetrics {
    pub total_accuracy: f64,
    pub group_names: Vec<String>,
    pub group_support: Vec<usize>,
    pub group_accuracy: Vec<f64>,
    /// `None` when a group has no positive samples.
    pub group_tpr: Vec<Option<f64>>,
    /// `None` when a group has no negative samples.
    pub group_fpr: Vec<Option<f64>>,
    /// Max pairwise |TPR_i - TPR_j| over groups with a defined rate.
    pub deo: f64,
}

/// Empirical rates of `sign(w^T x)` (with `sign(0) = +1`) per group.
pub fn evaluate_metrics(w: &ParameterVector, dataset: &GroupedDataset) -> FairnessMetrics {
    let c = dataset.num_groups();
    let scores = dataset.features.dot(w);
    let mut correct = vec![0usize; c];
    let mut support = vec![0usize; c];
    let mut tp = vec![0usize; c];
    let mut pos = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut neg = vec![0usize; c];

    for i in 0..dataset.num_rows() {
        let g = dataset.groups[i];
        let predicted = if scores[i] >= 0.0 { 1.0 } else { -1.0 };
        support[g] += 1;
        if predicted == dataset.labels[i] {
            correct[g] += 1;
        }
        if dataset.labels[i] > 0.0 {
            pos[g] += 1;
            if predicted > 0.0 {
                tp[g] += 1;
            }
        } else {
            neg[g] += 1;
            if predicted > 0.0 {
                fp[g] += 1;
            }
        }
    }

    let group_tpr: Vec<Option<f64>> = (0..c)
        .map(|g| (pos[g] > 0).then(|| tp[g] as f64 / pos[g] as f64))
        .collect();
    let group_fpr: Vec<Option<f64>> = (0..c)
        .map(|g| (neg[g] > 0).then(|| fp[g] as f64 / neg[g] as f64))
        .collect();
    let defined: Vec<f64> = group_tpr.iter().flatten().copied().collect();
    let mut deo = 0.0f64;
    for i in 0..defined.len() {
        for j in (i + 1)..defined.len() {
            deo = deo.max((defined[i] - defined[j]).abs());
        }
    }

    let group_accuracy = (0..c)
        .map(|g| correct[g] as f64 / support[g].max(1) as f64)
        .collect();
    FairnessMetrics {
        total_accuracy: correct.iter().sum::<usize>() as f64 / dataset.num_rows() as f64,
        group_names: dataset.group_names.clone(),
        group_support: support,
        group_accuracy,
        group_tpr,
        group_fpr,
        deo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::objective::finite_difference_check_bundle;
    use ndarray::arr1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(n: usize, d_raw: usize, seed: u64) -> GroupedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = d_raw + 1;
        let mut features = Array2::zeros((n, d));
        let mut labels = Array1::zeros(n);
        let mut groups = Vec::new();
        for i in 0..n {
            for j in 0..d_raw {
                features[[i, j]] = rng.gen_range(-2.0..2.0);
            }
            features[[i, d - 1]] = 1.0;
            labels[i] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            groups.push(rng.gen_range(0..2));
        }
        GroupedDataset {
            features,
            labels,
            groups,
            group_names: vec!["A".into(), "B".into()],
            feature_names: (0..d).map(|j| format!("f{j}")).collect(),
            provenance: Provenance {
                source: "toy".into(),
                schema_hash: "toy".into(),
                rows_dropped_missing: 0,
                rows_filtered: 0,
            },
        }
    }

    #[test]
    fn logistic_at_origin() {
        let data = toy_dataset(40, 3, 1);
        let spec = LinearModelSpec {
            l2: 0.0,
            ..LinearModelSpec::logistic()
        };
        let all: Vec<usize> = (0..data.num_rows()).collect();
        let w = Array1::zeros(data.num_features());
        let (value, grad) = model_loss_grad(&spec, &w, &data, &all).unwrap();
        assert!((value - 2f64.ln()).abs() < 1e-12);
        // gradient = -mean(y x) / 2
        let mut expected = Array1::zeros(data.num_features());
        for i in 0..data.num_rows() {
            expected.scaled_add(-data.labels[i] / 2.0, &data.features.row(i));
        }
        expected /= data.num_rows() as f64;
        for (a, b) in grad.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_hinge_flat_region() {
        // all margins beyond 1 + smoothing: value is the ridge term only
        let mut data = toy_dataset(10, 2, 2);
        for i in 0..10 {
            data.labels[i] = 1.0;
            data.features[[i, 0]] = 5.0;
            data.features[[i, 1]] = 0.0;
        }
        let spec = LinearModelSpec::smooth_hinge();
        let all: Vec<usize> = (0..10).collect();
        let w = arr1(&[1.0, 0.3, 0.0]);
        let (value, grad) = model_loss_grad(&spec, &w, &data, &all).unwrap();
        let ridge = 0.5 * spec.l2 * (1.0 + 0.09);
        assert!((value - ridge).abs() < 1e-15);
        // data part of the gradient vanishes, only ridge remains
        assert!((grad[0] - spec.l2 * 1.0).abs() < 1e-15);
        assert!((grad[1] - spec.l2 * 0.3).abs() < 1e-15);
        assert_eq!(grad[2], 0.0);
    }

    #[test]
    fn empty_subset_is_usage_error() {
        let data = toy_dataset(10, 2, 3);
        let w = Array1::zeros(data.num_features());
        assert!(matches!(
            model_loss_grad(&LinearModelSpec::logistic(), &w, &data, &[]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn bundle_sizes_by_notion() {
        let data = Arc::new(toy_dataset(60, 3, 4));
        let spec = LinearModelSpec::logistic();
        let eo = build_objectives(Some(FairnessNotion::Eo), &spec, data.clone(), Penalty::Squared)
            .unwrap();
        assert_eq!(eo.num_objectives(), 2); // 1 + C(2,2... 1 pair
        let eod =
            build_objectives(Some(FairnessNotion::Eod), &spec, data.clone(), Penalty::Squared)
                .unwrap();
        assert_eq!(eod.num_objectives(), 3);
        let dm = build_objectives(Some(FairnessNotion::Dm), &spec, data.clone(), Penalty::Squared)
            .unwrap();
        assert_eq!(dm.num_objectives(), 2);
        let plain = build_objectives(None, &spec, data, Penalty::Squared).unwrap();
        assert_eq!(plain.num_objectives(), 1);
    }

    #[test]
    fn eo_allows_missing_negatives_eod_does_not() {
        let mut data = toy_dataset(12, 2, 5);
        for i in 0..12 {
            data.labels[i] = if data.groups[i] == 0 { 1.0 } else { -1.0 };
        }
        // group A has no negatives now, group B no positives
        let data = Arc::new(data);
        let spec = LinearModelSpec::logistic();
        let err = match build_objectives(Some(FairnessNotion::Eo), &spec, data.clone(), Penalty::Squared) {
            Err(e) => e,
            Ok(_) => panic!("expected configuration error"),
        };
        match err {
            Error::Usage(msg) => assert!(msg.contains('B') && msg.contains("positive"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(
            build_objectives(Some(FairnessNotion::Dm), &spec, data, Penalty::Squared).is_ok()
        );
    }

    #[test]
    fn all_bundle_gradients_pass_finite_differences() {
        let data = Arc::new(toy_dataset(24, 3, 7));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in [ModelKind::Logistic, ModelKind::SmoothHinge] {
            let spec = LinearModelSpec {
                kind,
                ..LinearModelSpec::logistic()
            };
            for notion in [FairnessNotion::Eo, FairnessNotion::Eod, FairnessNotion::Dm] {
                let bundle =
                    build_objectives(Some(notion), &spec, data.clone(), Penalty::Squared).unwrap();
                for _ in 0..3 {
                    let w = Array1::from_iter(
                        (0..data.num_features()).map(|_| rng.gen_range(-0.8..0.8)),
                    );
                    for index in 0..bundle.num_objectives() {
                        let err = finite_difference_check_bundle(&bundle, index, &w, 1e-6);
                        assert!(
                            err <= 1e-5,
                            "{kind:?}/{notion:?} objective {index}: fd error {err}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dm_losses_reassemble_total() {
        let data = Arc::new(toy_dataset(50, 3, 9));
        let spec = LinearModelSpec::smooth_hinge();
        let partition = partition_groups(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = Array1::from_iter((0..data.num_features()).map(|_| rng.gen_range(-1.0..1.0)));
        let all: Vec<usize> = (0..data.num_rows()).collect();
        let (total, _) = model_loss_grad(&spec, &w, &data, &all).unwrap();
        let mut reassembled = 0.0;
        for g in 0..2 {
            let (lg, _) = model_loss_grad(&spec, &w, &data, &partition.groups[g]).unwrap();
            reassembled += partition.groups[g].len() as f64 / data.num_rows() as f64 * lg;
        }
        assert!((total - reassembled).abs() < 1e-9);
    }

    #[test]
    fn equal_group_losses_zero_the_fairness_objectives() {
        // duplicate every row into both groups: losses match exactly
        let base = toy_dataset(20, 3, 11);
        let n = base.num_rows();
        let mut features = Array2::zeros((2 * n, base.num_features()));
        let mut labels = Array1::zeros(2 * n);
        let mut groups = Vec::new();
        for i in 0..n {
            for g in 0..2 {
                features.row_mut(2 * i + g).assign(&base.features.row(i));
                labels[2 * i + g] = base.labels[i];
                groups.push(g);
            }
        }
        let data = Arc::new(GroupedDataset {
            features,
            labels,
            groups,
            ..base
        });
        let bundle = build_objectives(
            Some(FairnessNotion::Eod),
            &LinearModelSpec::logistic(),
            data.clone(),
            Penalty::Squared,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = Array1::from_iter((0..data.num_features()).map(|_| rng.gen_range(-1.0..1.0)));
        let h = bundle.values(&w);
        let cols = bundle.gradient_columns(&w);
        for k in 1..bundle.num_objectives() {
            assert!(h[k].abs() < 1e-15);
            assert!(cols.column(k).iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn group_swap_is_a_symmetry_for_squared_penalty() {
        let data = toy_dataset(40, 3, 13);
        let mut swapped = data.clone();
        for g in swapped.groups.iter_mut() {
            *g = 1 - *g;
        }
        swapped.group_names.swap(0, 1);
        let spec = LinearModelSpec::logistic();
        let a = build_objectives(
            Some(FairnessNotion::Eo),
            &spec,
            Arc::new(data),
            Penalty::Squared,
        )
        .unwrap();
        let b = build_objectives(
            Some(FairnessNotion::Eo),
            &spec,
            Arc::new(swapped),
            Penalty::Squared,
        )
        .unwrap();
        let config = crate::pdo::PdoConfig {
            outer_iters: 5,
            stationarity_tol: 0.0,
            ..crate::pdo::PdoConfig::default()
        };
        let w0 = Array1::zeros(a.param_dim());
        let run_a = crate::pdo::run_pdo(&a, &w0, &config).unwrap();
        let run_b = crate::pdo::run_pdo(&b, &w0, &config).unwrap();
        assert_eq!(run_a.final_w, run_b.final_w);
    }

    #[test]
    fn metrics_hand_counts() {
        // group A: 10 positives, 9 predicted +; group B: 10 positives, 7
        // predicted +; DEO = 0.2 by hand count
        let mut features = Array2::zeros((24, 2));
        let mut labels = Array1::zeros(24);
        let mut groups = Vec::new();
        let mut row = 0;
        let mut push = |score: f64, label: f64, group: usize, features: &mut Array2<f64>, labels: &mut Array1<f64>| {
            features[[row, 0]] = score;
            features[[row, 1]] = 1.0;
            labels[row] = label;
            groups.push(group);
            row += 1;
        };
        for k in 0..10 {
            push(if k < 9 { 1.0 } else { -1.0 }, 1.0, 0, &mut features, &mut labels);
        }
        for k in 0..10 {
            push(if k < 7 { 1.0 } else { -1.0 }, 1.0, 1, &mut features, &mut labels);
        }
        // two negatives per group, all predicted negative
        for g in 0..2 {
            push(-1.0, -1.0, g, &mut features, &mut labels);
            push(-1.0, -1.0, g, &mut features, &mut labels);
        }
        let data = GroupedDataset {
            features,
            labels,
            groups,
            group_names: vec!["A".into(), "B".into()],
            feature_names: vec!["s".into(), "(intercept)".into()],
            provenance: Provenance {
                source: "fixture".into(),
                schema_hash: String::new(),
                rows_dropped_missing: 0,
                rows_filtered: 0,
            },
        };
        let w = arr1(&[1.0, 0.0]);
        let metrics = evaluate_metrics(&w, &data);
        assert!((metrics.group_tpr[0].unwrap() - 0.9).abs() < 1e-12);
        assert!((metrics.group_tpr[1].unwrap() - 0.7).abs() < 1e-12);
        assert!((metrics.deo - 0.2).abs() < 1e-12);

        // constant-positive classifier: TPR 1 everywhere, DEO 0, accuracy
        // equals the base rate (sign(0) = +1)
        let w = arr1(&[0.0, 0.0]);
        let metrics = evaluate_metrics(&w, &data);
        assert_eq!(metrics.group_tpr[0], Some(1.0));
        assert_eq!(metrics.group_tpr[1], Some(1.0));
        assert_eq!(metrics.deo, 0.0);
        assert!((metrics.total_accuracy - 20.0 / 24.0).abs() < 1e-12);
    }
}

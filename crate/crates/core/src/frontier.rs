//! Dominance tests and non-dominated filtering of optimizer trajectories.
//!
//! Frontier sets are harvested by merging the recorded points of one or more
//! runs and keeping the points no other point dominates.

use std::collections::HashMap;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::objective::ParameterVector;
use crate::pdo::OptimizerRun;

/// One harvested frontier candidate with its provenance.
#[derive(Debug, Clone)]
pub struct FrontierPoint {
    pub w: ParameterVector,
    pub objectives: Array1<f64>,
    /// Index of the source run in the merged collection.
    pub run: usize,
    /// Iteration the point was recorded at.
    pub iteration: usize,
}

/// A mutually non-dominated, exactly-deduplicated set of points.
#[derive(Debug, Clone)]
pub struct FrontierSet {
    pub objective_dim: usize,
    pub points: Vec<FrontierPoint>,
}

impl FrontierSet {
    /// Canonical order: ascending in objective 0, ties broken by the full
    /// objective vector, then provenance.
    pub fn sort_canonical(&mut self) {
        self.points.sort_by(|a, b| {
            for (x, y) in a.objectives.iter().zip(b.objectives.iter()) {
                match x.partial_cmp(y).expect("frontier objectives are finite") {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            (a.run, a.iteration).cmp(&(b.run, b.iteration))
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "dominance needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| v.is_nan()) {
        return Err(Error::data("dominance comparison on NaN objective values"));
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b.iter()) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn bits_key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Indices of the points not dominated by any other point. Exact duplicates
/// collapse to their first occurrence. Output is ascending in the original
/// index.
pub fn non_dominated_filter(points: &[Array1<f64>]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let m = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != m {
            return Err(Error::usage(format!(
                "point {i} has {} objectives, expected {m}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "point {i} has a non-finite objective value"
            )));
        }
    }

    // exact duplicates: keep the earliest index
    let mut first_seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique: Vec<usize> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if let std::collections::hash_map::Entry::Vacant(e) = first_seen.entry(bits_key(p.as_slice().unwrap())) {
            e.insert(i);
            unique.push(i);
        }
    }

    // in lexicographic order a dominator always precedes what it dominates,
    // so comparing against the running archive is sufficient
    let mut order = unique;
    order.sort_by(|&a, &b| {
        for (x, y) in points[a].iter().zip(points[b].iter()) {
            match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        a.cmp(&b)
    });

    let mut archive: Vec<usize> = Vec::new();
    for &idx in &order {
        let candidate = points[idx].as_slice().unwrap();
        let dominated = archive
            .iter()
            .any(|&kept| dominates_unchecked(points[kept].as_slice().unwrap(), candidate));
        if !dominated {
            archive.push(idx);
        }
    }
    archive.sort_unstable();
    Ok(archive)
}

/// Merge recorded trajectories into one frontier set: concatenate all
/// points, filter, and keep provenance tags.
pub fn merge_runs(runs: &[OptimizerRun]) -> Result<FrontierSet> {
    if runs.is_empty() {
        return Err(Error::usage("merge_runs needs at least one run"));
    }
    let dim = runs[0]
        .trajectory
        .first()
        .map(|p| p.objective_values.len())
        .ok_or_else(|| Error::usage("merge_runs: first run has an empty trajectory"))?;

    let mut objectives: Vec<Array1<f64>> = Vec::new();
    let mut provenance: Vec<(usize, usize)> = Vec::new();
    let mut params: Vec<&ParameterVector> = Vec::new();
    for (run_id, run) in runs.iter().enumerate() {
        for point in &run.trajectory {
            if point.objective_values.len() != dim {
                return Err(Error::usage(format!(
                    "run {run_id} records {} objectives, expected {dim}",
                    point.objective_values.len()
                )));
            }
            objectives.push(point.objective_values.clone());
            provenance.push((run_id, point.iteration));
            params.push(&point.w);
        }
    }

    let kept = non_dominated_filter(&objectives)?;
    let points = kept
        .into_iter()
        .map(|i| FrontierPoint {
            w: params[i].clone(),
            objectives: objectives[i].clone(),
            run: provenance[i].0,
            iteration: provenance[i].1,
        })
        .collect();
    Ok(FrontierSet {
        objective_dim: dim,
        points,
    })
}

//! Independent oracles shared by the integration suites. These deliberately
//! avoid the library's own code paths: brute-force enumeration and grids
//! stand against the implementations they check.

use ndarray::{Array1, Array2};

/// Minimum of `alpha^T (G^T G) alpha` over a dense simplex grid. Resolution
/// is the step along each coordinate.
pub fn grid_search_phi(columns: &Array2<f64>, resolution: f64) -> f64 {
    let m = columns.ncols();
    let gram = columns.t().dot(columns);
    let steps = (1.0 / resolution).round() as usize;
    let phi = |alpha: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                total += alpha[i] * gram[[i, j]] * alpha[j];
            }
        }
        total
    };
    let mut best = f64::INFINITY;
    match m {
        1 => best = phi(&[1.0]),
        2 => {
            for i in 0..=steps {
                let a = i as f64 / steps as f64;
                best = best.min(phi(&[a, 1.0 - a]));
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 / steps as f64;
                    let b = j as f64 / steps as f64;
                    best = best.min(phi(&[a, b, 1.0 - a - b]));
                }
            }
        }
        _ => panic!("grid oracle supports m <= 3"),
    }
    best
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
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

/// O(n^2) non-dominated filter with first-seen duplicate collapsing.
pub fn brute_force_non_dominated(points: &[Array1<f64>]) -> Vec<usize> {
    let mut unique: Vec<usize> = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for &k in &unique {
            if points[k]
                .iter()
                .zip(p.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
            {
                continue 'outer;
            }
        }
        unique.push(i);
    }
    unique
        .iter()
        .copied()
        .filter(|&i| {
            !unique.iter().any(|&j| {
                j != i
                    && dominates(
                        points[j].as_slice().unwrap(),
                        points[i].as_slice().unwrap(),
                    )
            })
        })
        .collect()
}

/// Distance from `w` to the segment `{t * nu : t in [-1, 1]}`.
pub fn distance_to_segment(w: &Array1<f64>, nu: &Array1<f64>) -> f64 {
    let t = (w.dot(nu) / nu.dot(nu)).clamp(-1.0, 1.0);
    let diff = w - &(nu * t);
    diff.dot(&diff).sqrt()
}

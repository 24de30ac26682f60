//! Geometric (L1) median by the modified Weiszfeld iteration.

use crate::error::{argument, OlpsError, Result};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `Σ_i ‖p_i − y‖`.
pub fn l1_objective(points: &[Vec<f64>], y: &[f64]) -> f64 {
    points.iter().map(|p| distance(p, y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianTrace {
    pub median: Vec<f64>,
    /// Objective at the start point and after every accepted step.
    pub objectives: Vec<f64>,
}

/// Weiszfeld iteration from the coordinate-wise mean. Stops when a step is
/// shorter than `tol`, or when a step would not lower the objective.
pub fn l1_median_trace(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<MedianTrace> {
    let first = points.first().ok_or_else(|| argument("no points"))?;
    let d = first.len();
    if points.iter().any(|p| p.len() != d) {
        return Err(OlpsError::Shape("points differ in dimension".into()));
    }
    let mut y: Vec<f64> = (0..d)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / points.len() as f64)
        .collect();
    let mut objectives = vec![l1_objective(points, &y)];

    for _ in 0..max_iter {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for p in points {
            let mut dist = distance(p, &y);
            if dist < 1e-12 {
                dist += 1e-10;
            }
            for (n, v) in num.iter_mut().zip(p) {
                *n += v / dist;
            }
            den += 1.0 / dist;
        }
        let next: Vec<f64> = num.iter().map(|n| n / den).collect();
        if let Some(vertex) = optimal_vertex(points, &next) {
            let obj = l1_objective(points, &vertex);
            if obj <= *objectives.last().unwrap() {
                objectives.push(obj);
                return Ok(MedianTrace { median: vertex, objectives });
            }
        }
        let obj = l1_objective(points, &next);
        let step = distance(&next, &y);
        if obj > *objectives.last().unwrap() {
            return Ok(MedianTrace { median: y, objectives });
        }
        y = next;
        objectives.push(obj);
        if step < tol {
            return Ok(MedianTrace { median: y, objectives });
        }
    }
    Err(OlpsError::Convergence {
        solver: "weiszfeld",
        iterations: max_iter,
        best: y,
    })
}

/// The data point nearest to `y`, if it satisfies the optimality condition
/// for a median located at a data point: the pull of the other points,
/// a sum of unit vectors, has norm at most its multiplicity.
fn optimal_vertex(points: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let nearest = points
        .iter()
        .min_by(|a, b| distance(a, y).total_cmp(&distance(b, y)))?;
    let mut pull = vec![0.0; y.len()];
    let mut multiplicity = 0.0;
    for p in points {
        let d = distance(p, nearest);
        if d < 1e-12 {
            multiplicity += 1.0;
            continue;
        }
        for (r, (a, b)) in pull.iter_mut().zip(p.iter().zip(nearest)) {
            *r += (a - b) / d;
        }
    }
    let norm = pull.iter().map(|r| r * r).sum::<f64>().sqrt();
    (norm <= multiplicity).then(|| nearest.clone())
}

pub fn l1_median(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    l1_median_trace(points, tol, max_iter).map(|t| t.median)
}

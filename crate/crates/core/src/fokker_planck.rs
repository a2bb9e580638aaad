//! Kolmogorov-forward evolution of the population density.
//!
//! The density step works on node probabilities `q = w ⊙ m` and solves
//! `(I − dt·𝒜ᵀ) q′ = q` with the same generator the HJB step assembled.
//! Columns of `I − dt·𝒜ᵀ` sum to one, so mass is conserved up to rounding,
//! and the matrix is an M-matrix, so nonnegativity is preserved.

use crate::error::{check_len, Error, Result};
use crate::hjb::TransitionOperator;
use crate::linalg::BandedMatrix;
use crate::model::{Density, StateGrid};

/// Implicit step on raw probabilities.
pub fn fp_step_probabilities(q: &[f64], op: &TransitionOperator, dt: f64) -> Result<Vec<f64>> {
    check_len("probabilities", op.dim(), q.len())?;
    if !(dt > 0.0) {
        return Err(Error::invalid("model.dt", "must be > 0"));
    }
    let lu = BandedMatrix::shifted(&op.matrix, 1.0, -dt, true).factor()?;
    let mut out = lu.solve(q);
    // Rounding can leave entries at -1e-20; the exact solution is >= 0.
    for v in &mut out {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// One implicit Fokker-Planck step of `m` under `op`.
pub fn fp_forward_step(
    m: &Density,
    op: &TransitionOperator,
    dt: f64,
    grid: &StateGrid,
) -> Result<Density> {
    check_len("density", grid.len(), m.len())?;
    let q = fp_step_probabilities(&m.probabilities(grid), op, dt)?;
    Ok(Density::from_values_unchecked(
        q.iter()
            .enumerate()
            .map(|(k, v)| v / grid.weight(k))
            .collect(),
    ))
}

/// Normalized null vector of `opᵀ` (counting measure).
///
/// A first solve anchored at node 0 locates the bulk of the mass; the
/// system is then re-solved anchored at the node of largest mass, which is
/// certainly recurrent. A vanishing pivot in the anchored system means the
/// null space has more than one dimension.
pub fn stationary_probabilities(op: &TransitionOperator) -> Result<Vec<f64>> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::Domain("empty operator".into()));
    }
    let anchored = |k0: usize| -> Result<Vec<f64>> {
        let mut m = BandedMatrix::shifted(&op.matrix, 0.0, 1.0, true);
        m.set_unit_row(k0);
        let lu = m.factor().map_err(|e| match e {
            Error::LinearSolve { row, pivot, .. } => Error::NonUnique(format!(
                "anchored null-space system is singular at row {row} (pivot {pivot:e})"
            )),
            other => other,
        })?;
        let mut rhs = vec![0.0; n];
        rhs[k0] = 1.0;
        Ok(lu.solve(&rhs))
    };
    let first = match anchored(0) {
        Ok(q) if q.iter().all(|v| v.is_finite()) => q,
        _ => {
            // Node 0 may be transient; locate the bulk by pseudo-time
            // stepping from the uniform distribution instead.
            let mut q = vec![1.0 / n as f64; n];
            for _ in 0..50 {
                q = fp_step_probabilities(&q, op, 1e4)?;
            }
            q
        }
    };
    let k_max = first
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| {
            if *v > acc.1 {
                (k, *v)
            } else {
                acc
            }
        })
        .0;
    let q = anchored(k_max)?;
    let total: f64 = q.iter().sum();
    let scale = q.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let most_negative = q.iter().copied().fold(0.0, f64::min);
    if !(total > 0.0) || !total.is_finite() || most_negative < -1e-8 * scale {
        return Err(Error::NonUnique(format!(
            "anchored null vector is not a distribution (sum {total:e}, min {most_negative:e})"
        )));
    }
    Ok(q.iter().map(|v| (v / total).max(0.0)).collect())
}

/// Stationary density of `op` on `grid`.
pub fn stationary_density(op: &TransitionOperator, grid: &StateGrid) -> Result<Density> {
    check_len("operator", grid.len(), op.dim())?;
    let q = stationary_probabilities(op)?;
    Density::normalized(grid, &q)
}

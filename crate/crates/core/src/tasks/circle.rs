use thiserror::Error;

use crate::linalg::{det3, solve3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CircleFitError {
    #[error("circle fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("points are collinear or coincident")]
    IllConditioned,
}

/// Algebraic least-squares circle fit.
///
/// Minimizes Σ (x² + y² + D·x + E·y + F)² over (D, E, F). Points are first
/// centered on their mean and scaled to unit RMS spread; the algebraic
/// residual is invariant under both, so this only improves conditioning.
/// Returns the center and radius.
pub fn circle_fit<T: Real>(points: &[[T; 2]]) -> Result<([T; 2], T), CircleFitError> {
    if points.len() < 3 {
        return Err(CircleFitError::TooFewPoints(points.len()));
    }
    let n = T::from_usize(points.len()).expect("point count fits the scalar type");
    let mean = points
        .iter()
        .fold([T::zero(); 2], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let mean = [mean[0] / n, mean[1] / n];
    let spread = points.iter().fold(T::zero(), |acc, p| {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        acc + dx * dx + dy * dy
    });
    let scale = (spread / n).sqrt();
    if scale == T::zero() {
        return Err(CircleFitError::IllConditioned);
    }

    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    for p in points {
        let x = (p[0] - mean[0]) / scale;
        let y = (p[1] - mean[1]) / scale;
        let row = [x, y, T::one()];
        let rhs = -(x * x + y * y);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] = ata[i][j] + row[i] * row[j];
            }
            atb[i] = atb[i] + row[i] * rhs;
        }
    }
    // Normal matrix of unit-spread data: its determinant is O(1) unless the
    // points lie on a line.
    if det3(&ata).abs() / (n * n * n) < T::lit(1e-12) {
        return Err(CircleFitError::IllConditioned);
    }
    let [d, e, f] = solve3(&ata, &atb).ok_or(CircleFitError::IllConditioned)?;
    let two = T::lit(2.0);
    let cx = -d / two;
    let cy = -e / two;
    let r2 = cx * cx + cy * cy - f;
    if r2 <= T::zero() || !r2.is_finite() {
        return Err(CircleFitError::IllConditioned);
    }
    Ok((
        [mean[0] + cx * scale, mean[1] + cy * scale],
        r2.sqrt() * scale,
    ))
}

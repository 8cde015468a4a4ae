use crate::vectors::{l2_norm, median, ParameterVector};

/// `C = 2 * median(norms)`; zero for an empty list.
pub fn adaptive_clip_threshold(all_norms: &[f64]) -> f64 {
    2.0 * median(all_norms).unwrap_or(0.0)
}

/// Scale `update` by `min(1, C / ||update||)`. Zero vectors pass through.
pub fn clip_update(update: &ParameterVector, clip: f64) -> ParameterVector {
    let norm = l2_norm(update);
    if norm == 0.0 || norm <= clip {
        return update.clone();
    }
    update.scaled(clip / norm)
}

use crate::error::{LopError, Result};

/// Percentage shortfall of `value` relative to `reference` for a
/// maximization objective: `100 * (reference - value) / reference`.
pub fn gap_percent(value: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(LopError::InvalidArgument(format!(
            "gap reference must be positive, got {reference}"
        )));
    }
    Ok(100.0 * (reference - value) / reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        assert_eq!(gap_percent(60.0, 60.0).unwrap(), 0.0);
        assert!((gap_percent(59.4, 60.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(gap_percent(61.0, 60.0).unwrap() < 0.0);
        assert!(gap_percent(1.0, 0.0).is_err());
        assert!(gap_percent(1.0, -3.0).is_err());
    }
}

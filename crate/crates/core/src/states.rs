//! Initial states, all expressed in the energy eigenbasis.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};

/// `|ψ⟩⟨ψ|` with `|ψ⟩ = d^{-1/2} Σ_k |k⟩`.
pub fn uniform_superposition(dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_element(dim, dim, C64::new(1.0 / dim as f64, 0.0))
}

/// Projector onto eigenstate `k` (0-based).
pub fn eigenstate(dim: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(k, k)] = C64::new(1.0, 0.0);
    m
}

/// Diagonal state from occupation probabilities, which must be non-negative
/// and sum to 1 within `1e-9`.
pub fn diagonal(pops: &[f64]) -> Result<ComplexMatrix> {
    if pops.is_empty() || pops.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidParameter(
            "occupations must be finite and non-negative".into(),
        ));
    }
    let total: f64 = pops.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "occupations sum to {total}, expected 1"
        )));
    }
    Ok(linalg::diag_real(pops))
}

/// True when every off-diagonal entry is exactly zero.
pub fn is_diagonal(rho: &ComplexMatrix) -> bool {
    (0..rho.nrows()).all(|r| (0..rho.ncols()).all(|c| r == c || rho[(r, c)] == C64::new(0.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_superposition_is_pure() {
        let rho = uniform_superposition(4);
        let sq = &rho * &rho;
        assert!(linalg::max_abs_diff(&sq, &rho) <= 1e-15);
        assert!(!is_diagonal(&rho));
    }

    #[test]
    fn diagonal_validation() {
        assert!(diagonal(&[0.5, 0.5]).is_ok());
        assert!(diagonal(&[0.5, 0.6]).is_err());
        assert!(diagonal(&[1.5, -0.5]).is_err());
        assert!(is_diagonal(&eigenstate(3, 1)));
    }
}

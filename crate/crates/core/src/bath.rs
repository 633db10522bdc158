//! Spectrum-matched bath ancillas.
//!
//! Each ancilla has a ground level at zero energy plus one excited level per
//! system transition, so that every gap `E_i - E_j` of the system is
//! resonant with a ground-to-excited gap of the ancilla. Degenerate system
//! pairs keep their own (zero-energy) excited level.

use crate::error::{Error, Result};
use crate::linalg::{self, real, ComplexMatrix};
use crate::model::TransitionTable;

#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    /// Ancilla level energies; `levels[0] = 0` is the ground level.
    pub levels: Vec<f64>,
    /// Excited level index for each transition pair, in table order.
    pub pair_index: Vec<usize>,
    /// The `(i, j)` system pairs, in table order.
    pub pairs: Vec<(usize, usize)>,
    pub dim_system: usize,
}

impl BathSpec {
    /// Ancilla Hilbert dimension, M + 1.
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn joint_dim(&self) -> usize {
        self.dim_system * self.dim()
    }

    /// Number of excited levels, M.
    pub fn transitions(&self) -> usize {
        self.pairs.len()
    }
}

pub fn build_bath_spec(table: &TransitionTable) -> BathSpec {
    let mut levels = Vec::with_capacity(table.count() + 1);
    levels.push(0.0);
    levels.extend_from_slice(&table.gaps);
    BathSpec {
        levels,
        pair_index: (1..=table.count()).collect(),
        pairs: table.pairs.clone(),
        dim_system: table.dim,
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "beta must be non-negative, got {beta}"
        )))
    }
}

/// `e^{-βε}` with the zero-temperature limit taken for `β = ∞`.
pub(crate) fn boltzmann_weight(level: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        if level == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (-beta * level).exp()
    }
}

/// `Z_a = 1 + Σ_gaps e^{-β gap}`, straight from the gap multiset.
pub fn partition_function_from_gaps(gaps: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(1.0 + gaps.iter().map(|&g| boltzmann_weight(g, beta)).sum::<f64>())
}

/// Accepts `β = f64::INFINITY`.
pub fn partition_function(spec: &BathSpec, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(spec.levels.iter().map(|&e| boltzmann_weight(e, beta)).sum())
}

/// Thermal ancilla state, diagonal in the level basis.
pub fn ancilla_state(spec: &BathSpec, beta: f64) -> Result<ComplexMatrix> {
    let z = partition_function(spec, beta)?;
    let pops: Vec<f64> = spec
        .levels
        .iter()
        .map(|&e| boltzmann_weight(e, beta) / z)
        .collect();
    Ok(linalg::diag_real(&pops))
}

/// `g Σ_{i>j} (A_ij ⊗ B_ij^† + h.c.)` on the system ⊗ ancilla space, with
/// `A_ij = |j⟩⟨i|` and `B_ij = |0⟩⟨α_ij|`: a system decay `i → j` is paired
/// with the ancilla excitation `0 → α_ij`, so each term conserves energy.
pub fn build_interaction(dim_system: usize, spec: &BathSpec, g: f64) -> Result<ComplexMatrix> {
    if dim_system != spec.dim_system {
        return Err(Error::DimensionMismatch(format!(
            "system dimension {dim_system} does not match bath built for {}",
            spec.dim_system
        )));
    }
    let da = spec.dim();
    let joint = dim_system * da;
    let mut h = ComplexMatrix::zeros(joint, joint);
    for (&(i, j), &alpha) in spec.pairs.iter().zip(&spec.pair_index) {
        let lowered = j * da + alpha; // |j⟩|α_ij⟩
        let raised = i * da; // |i⟩|0⟩
        h[(lowered, raised)] = real(g);
        h[(raised, lowered)] = real(g);
    }
    Ok(h)
}

/// `Z_a / L` with `L = d - 1`.
pub fn ratio_za_l(spec: &BathSpec, beta: f64, dim_system: usize) -> Result<f64> {
    if dim_system < 2 {
        return Err(Error::InvalidParameter("dim_system must be at least 2".into()));
    }
    Ok(partition_function(spec, beta)? / (dim_system - 1) as f64)
}

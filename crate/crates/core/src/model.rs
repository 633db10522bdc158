//! The open-boundary XXZ chain, its Gibbs state and the table of eigenstate
//! transitions that drives both the bath construction and Metropolis
//! proposals.

use crate::error::{Error, Result};
use crate::linalg::{self, real, ComplexMatrix, EigenSystem};

/// Largest chain handled by the dense builders (Hilbert dimension 4096).
pub const MAX_SITES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinChainParams {
    pub n_sites: usize,
    /// J
    pub coupling: f64,
    /// h
    pub field: f64,
    /// Δ
    pub anisotropy: f64,
}

impl SpinChainParams {
    pub fn new(n_sites: usize, coupling: f64, field: f64, anisotropy: f64) -> Result<Self> {
        let params = Self {
            n_sites,
            coupling,
            field,
            anisotropy,
        };
        params.validate()?;
        Ok(params)
    }

    /// J = h = Δ = 1.
    pub fn unit(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, 1.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites > MAX_SITES {
            return Err(Error::InvalidParameter(format!(
                "n_sites must be in 2..={MAX_SITES}, got {}",
                self.n_sites
            )));
        }
        for (name, v) in [
            ("coupling", self.coupling),
            ("field", self.field),
            ("anisotropy", self.anisotropy),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }
}

/// `-J Σ_q (σˣσˣ + σʸσʸ + Δ σᶻσᶻ) + (h/2) Σ_q σᶻ` with open boundaries.
///
/// Site 1 is the most significant bit of the basis index, matching
/// `σ_1 ⊗ σ_2 ⊗ …`; bit value 0 is spin up (σᶻ = +1).
pub fn build_xxz(params: &SpinChainParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let n = params.n_sites;
    let dim = params.dim();
    let sz = |state: usize, site: usize| -> f64 {
        if state >> (n - 1 - site) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    };

    let mut h = ComplexMatrix::zeros(dim, dim);
    for state in 0..dim {
        let mut diag = 0.0;
        for q in 0..n {
            diag += 0.5 * params.field * sz(state, q);
        }
        for q in 0..n - 1 {
            let (a, b) = (sz(state, q), sz(state, q + 1));
            diag -= params.coupling * params.anisotropy * a * b;
            if a != b {
                // σˣσˣ + σʸσʸ = 2(σ⁺σ⁻ + σ⁻σ⁺) swaps an antiparallel pair.
                let mask = (1 << (n - 1 - q)) | (1 << (n - 2 - q));
                h[(state ^ mask, state)] += real(-2.0 * params.coupling);
            }
        }
        h[(state, state)] += real(diag);
    }
    Ok(h)
}

/// Diagonalizes the chain; the returned eigenbasis is the working basis for
/// all dynamics.
pub fn diagonalize(params: &SpinChainParams) -> Result<EigenSystem> {
    linalg::herm_eig(&build_xxz(params)?)
}

/// Normalized Boltzmann populations `e^{-βE_k}/Z`, computed with the minimum
/// energy subtracted.
pub fn boltzmann_populations(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and non-negative, got {beta}"
        )));
    }
    if energies.is_empty() {
        return Err(Error::InvalidParameter("empty spectrum".into()));
    }
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Thermal state, diagonal in the eigenbasis.
pub fn gibbs_state(energies: &[f64], beta: f64) -> Result<ComplexMatrix> {
    Ok(linalg::diag_real(&boltzmann_populations(energies, beta)?))
}

/// All ordered eigenstate pairs `(i, j)` with `i > j` and their gaps
/// `E_i - E_j`.
///
/// Pairs are listed with `j` ascending in the outer loop and `i` ascending in
/// the inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub dim: usize,
    pub pairs: Vec<(usize, usize)>,
    pub gaps: Vec<f64>,
}

impl TransitionTable {
    /// M = d(d-1)/2.
    pub fn count(&self) -> usize {
        self.pairs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.pairs.iter().copied().zip(self.gaps.iter().copied())
    }
}

pub fn transitions(energies: &[f64]) -> Result<TransitionTable> {
    let dim = energies.len();
    if dim < 2 {
        return Err(Error::InvalidParameter(
            "a transition table needs at least two levels".into(),
        ));
    }
    if let Some(index) = energies.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(Error::NotSorted { index: index + 1 });
    }
    let mut pairs = Vec::with_capacity(dim * (dim - 1) / 2);
    let mut gaps = Vec::with_capacity(dim * (dim - 1) / 2);
    for j in 0..dim {
        for i in (j + 1)..dim {
            pairs.push((i, j));
            gaps.push(energies[i] - energies[j]);
        }
    }
    Ok(TransitionTable { dim, pairs, gaps })
}

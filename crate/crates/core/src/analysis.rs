//! Observables and side-by-side runs of the two engines.

use crate::bath::{self, partition_function_from_gaps};
use crate::collisional::{self, CmMode, CollisionConfig, CollisionSetup, TimeSeries};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::metropolis::{self, McMode, MetropolisConfig};
use crate::model::{self, SpinChainParams};

use rayon::prelude::*;

pub use crate::collisional::occupations;

/// `gΔt = √(Z_a / L)` with `L = d - 1`, the coupling at which the truncated
/// collisional map and the averaged Metropolis map coincide.
pub fn equivalence_coupling(z_a: f64, dim_system: usize) -> Result<f64> {
    if dim_system < 2 {
        return Err(Error::InvalidParameter("dim_system must be at least 2".into()));
    }
    Ok((z_a / (dim_system - 1) as f64).sqrt())
}

/// The second-order expansion only makes sense for `gΔt < 1`.
pub fn coupling_is_perturbative(g_dt: f64) -> bool {
    g_dt < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    pub beta: f64,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub mc_mode: McMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonStep {
    pub n: usize,
    pub trace_distance: f64,
    pub min_eig_cm: f64,
    pub min_eig_mc: f64,
    pub occupations_cm: Vec<f64>,
    pub occupations_mc: Vec<f64>,
    /// 3σ statistical trace-distance envelope of the Monte Carlo mean; zero
    /// for the deterministic averaged map.
    pub stat_envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub steps: usize,
    pub per_step: Vec<ComparisonStep>,
    pub coupling_used: f64,
    pub z_a: f64,
    pub ratio: f64,
    pub runs: usize,
    pub cm: TimeSeries,
    pub mc: TimeSeries,
}

impl ComparisonReport {
    pub fn trace_distances(&self) -> Vec<f64> {
        self.per_step.iter().map(|s| s.trace_distance).collect()
    }

    /// `(step, D)` at the largest trace distance.
    pub fn peak(&self) -> (usize, f64) {
        self.per_step
            .iter()
            .map(|s| (s.n, s.trace_distance))
            .fold((0, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
    }
}

/// Runs the exact collisional model (free evolution off, `gΔt` fixed by
/// [`equivalence_coupling`], `Δt = 1`) and the Metropolis engine side by side
/// from `rho0`, given in the eigenbasis of `h_system`.
pub fn compare_models(h_system: &ComplexMatrix, config: &CompareConfig, rho0: &ComplexMatrix) -> Result<ComparisonReport> {
    let eig = linalg::herm_eig(h_system)?;
    compare_models_energies(&eig.values, config, rho0)
}

pub fn compare_models_energies(energies: &[f64], config: &CompareConfig, rho0: &ComplexMatrix) -> Result<ComparisonReport> {
    let d = energies.len();
    let table = model::transitions(energies)?;
    let z_a = partition_function_from_gaps(&table.gaps, config.beta)?;
    let g_dt = equivalence_coupling(z_a, d)?;
    let collision = CollisionConfig {
        g: g_dt,
        dt: 1.0,
        ts: 0.0,
        beta: config.beta,
        steps: config.steps,
        include_free_evolution: false,
    };
    let mc_config = MetropolisConfig {
        beta: config.beta,
        steps: config.steps,
        runs: config.runs,
        seed: config.seed,
    };

    let (cm, mc) = rayon::join(
        || collisional::cm_evolve_energies(energies, &collision, rho0, CmMode::Exact),
        || -> Result<(TimeSeries, Vec<f64>)> {
            match config.mc_mode {
                McMode::Trajectories => {
                    let ens = metropolis::mc_sample(energies, &mc_config, rho0)?;
                    let env = (0..=config.steps).map(|n| ens.trace_distance_envelope(n, 3.0)).collect();
                    Ok((ens.mean, env))
                }
                McMode::AveragedMap => {
                    let series = metropolis::mc_evolve(energies, &mc_config, rho0, McMode::AveragedMap)?;
                    Ok((series, vec![0.0; config.steps + 1]))
                }
            }
        },
    );
    let cm = cm?;
    let (mc, envelope) = mc?;

    let per_step = (0..=config.steps)
        .map(|n| {
            let (a, b) = (&cm.states[n], &mc.states[n]);
            Ok(ComparisonStep {
                n,
                trace_distance: linalg::trace_distance(a, b)?,
                min_eig_cm: linalg::min_eigenvalue(a)?,
                min_eig_mc: linalg::min_eigenvalue(b)?,
                occupations_cm: occupations(a),
                occupations_mc: occupations(b),
                stat_envelope: envelope[n],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ComparisonReport {
        steps: config.steps,
        per_step,
        coupling_used: g_dt,
        z_a,
        ratio: z_a / (d - 1) as f64,
        runs: match config.mc_mode {
            McMode::Trajectories => config.runs,
            McMode::AveragedMap => 0,
        },
        cm,
        mc,
    })
}

/// Trace distance per step between the exact collisional run and the
/// second-order map at the same `gΔt` (free evolution off, `Δt = 1`).
/// At `gΔt = √(Z_a/L)` this is the gap between the exact model and the
/// averaged Metropolis map.
pub fn truncation_gap(energies: &[f64], beta: f64, g_dt: f64, steps: usize, rho0: &ComplexMatrix) -> Result<Vec<f64>> {
    let config = CollisionConfig {
        g: g_dt,
        dt: 1.0,
        ts: 0.0,
        beta,
        steps,
        include_free_evolution: false,
    };
    let exact = CollisionSetup::new(energies, config, CmMode::Exact)?.evolve(rho0)?;
    let approx = CollisionSetup::new(energies, config, CmMode::SecondOrder)?.evolve(rho0)?;
    exact
        .states
        .iter()
        .zip(&approx.states)
        .map(|(a, b)| linalg::trace_distance(a, b))
        .collect()
}

/// One-step truncation error along the second-order path: entry `k` is
/// `½‖(E - A)(A^k ρ0)‖_1`, with `E` the exact collision and `A` the
/// second-order map. Each entry is `O((gΔt)^4)`.
pub fn truncation_step_errors(energies: &[f64], beta: f64, g_dt: f64, steps: usize, rho0: &ComplexMatrix) -> Result<Vec<f64>> {
    let config = CollisionConfig {
        g: g_dt,
        dt: 1.0,
        ts: 0.0,
        beta,
        steps,
        include_free_evolution: false,
    };
    let exact = CollisionSetup::new(energies, config, CmMode::Exact)?;
    let approx = CollisionSetup::new(energies, config, CmMode::SecondOrder)?;
    let path = approx.evolve(rho0)?;
    path.states[..steps]
        .iter()
        .map(|state| linalg::trace_distance(&exact.step(state)?, &approx.step(state)?))
        .collect()
}

/// Running bound on [`truncation_gap`], the partial sums of
/// [`truncation_step_errors`] starting from 0. Because `E` is trace-norm
/// contractive, `E^n ρ0 - A^n ρ0 = Σ_k E^{n-1-k} (E - A) A^k ρ0` stays inside it.
pub fn truncation_envelope(energies: &[f64], beta: f64, g_dt: f64, steps: usize, rho0: &ComplexMatrix) -> Result<Vec<f64>> {
    let errors = truncation_step_errors(energies, beta, g_dt, steps, rho0)?;
    let mut acc = 0.0;
    let mut envelope = vec![0.0];
    for e in errors {
        acc += e;
        envelope.push(acc);
    }
    Ok(envelope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub n_sites: usize,
    /// `0.0` is the infinite-temperature limit.
    pub beta: f64,
    pub ratio: f64,
}

/// `(C(2^N, 2) + 1) / (2^N - 1) = 2^N/2 + 1/(2^N - 1)`.
pub fn infinite_temperature_ratio(n_sites: usize) -> f64 {
    let d = (1u64 << n_sites) as f64;
    d / 2.0 + 1.0 / (d - 1.0)
}

/// Zero-temperature ratio for a spectrum without degeneracies, `1/(2^N - 1)`.
pub fn nondegenerate_lower_bound(n_sites: usize) -> f64 {
    1.0 / ((1u64 << n_sites) as f64 - 1.0)
}

/// `Z_a / L` over a grid of chain lengths and inverse temperatures, using
/// `template` for J, h and Δ. Only spectra are computed; the bath is never
/// materialized.
pub fn ratio_scan(n_sites: &[usize], betas: &[f64], template: &SpinChainParams) -> Result<Vec<RatioRow>> {
    let spectra: Vec<(usize, Vec<f64>)> = n_sites
        .par_iter()
        .map(|&n| {
            let params = SpinChainParams { n_sites: n, ..*template };
            let values = linalg::herm_eigenvalues(&model::build_xxz(&params)?)?;
            Ok((n, values))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(n_sites.len() * betas.len());
    for (n, energies) in &spectra {
        let table = model::transitions(energies)?;
        let l = (energies.len() - 1) as f64;
        for &beta in betas {
            let z_a = bath::partition_function_from_gaps(&table.gaps, beta)?;
            rows.push(RatioRow {
                n_sites: *n,
                beta,
                ratio: z_a / l,
            });
        }
    }
    Ok(rows)
}

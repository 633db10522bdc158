//! Metropolis dynamics over energy eigenstates with a decoherence map on
//! rejection.
//!
//! A trajectory samples a source eigenstate `i` from its current
//! populations, proposes one of the `L = d - 1` other eigenstates uniformly
//! and accepts with `min(1, e^{-β(E_j - E_i)})`. An accepted jump collapses
//! the run onto `|j⟩⟨j|`; a rejection keeps only the populations and
//! coherences attached to `|i⟩`. Averaging runs reproduces the deterministic
//! map [`mc_averaged_map`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collisional::{check_state_dim, TimeSeries};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::states;

/// Diagonal entries at or below this value are treated as unpopulated.
pub const POPULATION_FLOOR: f64 = 1e-15;

/// Runs per reduction chunk. Fixed so that summation order depends only on
/// the run count.
pub const CHUNK_RUNS: usize = 4096;

/// Words of the ChaCha stream reserved for each step of a run.
const WORDS_PER_STEP: u128 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetropolisConfig {
    pub beta: f64,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
}

impl MetropolisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    Trajectories,
    AveragedMap,
}

/// Per-run state. Trace is held at 1; after a rejection on a coherent state
/// the matrix is generally not positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub matrix: ComplexMatrix,
}

impl TrajectoryState {
    pub fn new(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn weight(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }
}

/// Energy cost of the jump `i -> j`: zero when downhill or level.
pub fn omega(e_i: f64, e_j: f64) -> f64 {
    let diff = e_j - e_i;
    if diff > 0.0 {
        diff
    } else {
        0.0
    }
}

/// `min(1, e^{-β ΔE})`.
pub fn acceptance(delta_e: f64, beta: f64) -> f64 {
    if delta_e <= 0.0 || beta == 0.0 {
        1.0
    } else {
        (-beta * delta_e).exp()
    }
}

/// Half the rejection probability of each source state:
/// `f_i = (1/2L) Σ_{j≠i} (1 - p_ij)`.
pub fn rejection_rates(energies: &[f64], beta: f64) -> Vec<f64> {
    let d = energies.len();
    let l = (d - 1) as f64;
    (0..d)
        .map(|i| {
            let rejected: f64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| 1.0 - acceptance(omega(energies[i], energies[j]), beta))
                .sum();
            rejected / (2.0 * l)
        })
        .collect()
}

/// One proposal and its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub source: usize,
    pub target: usize,
    pub accepted: bool,
}

/// Probability of picking each eigenstate as the jump source.
pub fn source_probabilities(matrix: &ComplexMatrix) -> Result<Vec<f64>> {
    let pops: Vec<f64> = matrix
        .diagonal()
        .iter()
        .map(|z| if z.re > POPULATION_FLOOR { z.re } else { 0.0 })
        .collect();
    let total: f64 = pops.iter().sum();
    if total <= POPULATION_FLOOR {
        return Err(Error::DegenerateState);
    }
    Ok(pops.into_iter().map(|p| p / total).collect())
}

/// Draws an outcome from three uniforms, consuming exactly three `f64`s.
pub fn sample_outcome<R: Rng + ?Sized>(
    matrix: &ComplexMatrix,
    energies: &[f64],
    beta: f64,
    rng: &mut R,
) -> Result<Outcome> {
    let u_source: f64 = rng.random();
    let u_target: f64 = rng.random();
    let u_accept: f64 = rng.random();

    let probs = source_probabilities(matrix)?;
    let mut source = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if p > 0.0 && u_source < acc {
            source = k;
            break;
        }
    }

    let l = energies.len() - 1;
    let pick = ((u_target * l as f64) as usize).min(l - 1);
    let target = if pick >= source { pick + 1 } else { pick };

    let p = acceptance(omega(energies[source], energies[target]), beta);
    Ok(Outcome {
        source,
        target,
        accepted: u_accept < p,
    })
}

/// The state a run moves to for a given outcome.
///
/// Accepting collapses onto `|target⟩⟨target|`. Rejecting keeps row and
/// column `source`: the population becomes 1 and each coherence `ρ_sl` is
/// scaled by `(f_s + f_l [ρ_ll unpopulated]) / (2 f_s ρ_ss)`. When every
/// population is positive this is `(2ρ_ss)^{-1} (|s⟩⟨s|ρ + ρ|s⟩⟨s|)`; the extra
/// `f_l` term carries the decay that an unpopulated partner state can no
/// longer contribute through its own rejections.
pub fn apply_outcome(
    state: &TrajectoryState,
    rates: &[f64],
    outcome: Outcome,
) -> TrajectoryState {
    let d = state.matrix.nrows();
    if outcome.accepted {
        return TrajectoryState::new(states::eigenstate(d, outcome.target));
    }
    let s = outcome.source;
    let rho = &state.matrix;
    let pop = rho[(s, s)].re;
    let mut next = ComplexMatrix::zeros(d, d);
    next[(s, s)] = C64::new(1.0, 0.0);
    for l in (0..d).filter(|&l| l != s) {
        let partner = if rho[(l, l)].re > POPULATION_FLOOR { 0.0 } else { rates[l] };
        let factor = (rates[s] + partner) / (2.0 * rates[s] * pop);
        next[(s, l)] = rho[(s, l)] * factor;
        next[(l, s)] = rho[(l, s)] * factor;
    }
    TrajectoryState::new(next)
}

/// One stochastic Metropolis step of a single run.
pub fn mc_trajectory_step<R: Rng + ?Sized>(
    state: &TrajectoryState,
    energies: &[f64],
    beta: f64,
    rng: &mut R,
) -> Result<TrajectoryState> {
    check_state_dim(&state.matrix, energies.len())?;
    if energies.len() < 2 {
        return Err(Error::InvalidParameter("need at least two eigenstates".into()));
    }
    let outcome = sample_outcome(&state.matrix, energies, beta, rng)?;
    let rates = rejection_rates(energies, beta);
    Ok(apply_outcome(state, &rates, outcome))
}

/// The run-averaged single step,
///
/// `(1/L) Σ_{i≠j} [p_ij A ρ A^† + (1 - p_ij) ½(|i⟩⟨i|ρ + ρ|i⟩⟨i|)]`,
///
/// with `A = |j⟩⟨i|` and `p_ij = e^{-β ω_ij}`.
pub fn mc_averaged_map(rho: &ComplexMatrix, energies: &[f64], beta: f64) -> Result<ComplexMatrix> {
    let d = energies.len();
    if d < 2 || rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, spectrum has {d} levels",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let inv_l = 1.0 / (d - 1) as f64;
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            let p = acceptance(omega(energies[i], energies[j]), beta);
            out[(j, j)] += rho[(i, i)] * (p * inv_l);
            let keep = 0.5 * (1.0 - p) * inv_l;
            for k in 0..d {
                out[(i, k)] += rho[(i, k)] * keep;
                out[(k, i)] += rho[(k, i)] * keep;
            }
        }
    }
    Ok(out)
}

/// Random stream for step `step` of run `run`.
pub fn stream_rng(seed: u64, run: usize, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    rng
}

/// Sampled mean and second moments of a batch of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct McEnsemble {
    pub mean: TimeSeries,
    /// Per step, the run average of `|X_kl|^2`.
    pub second_moment: Vec<DMatrix<f64>>,
    pub runs: usize,
}

impl McEnsemble {
    /// Entrywise standard error of the mean at `step`.
    pub fn standard_error(&self, step: usize) -> DMatrix<f64> {
        let mean = &self.mean.states[step];
        let r = self.runs as f64;
        DMatrix::from_fn(mean.nrows(), mean.ncols(), |k, l| {
            let var = self.second_moment[step][(k, l)] - mean[(k, l)].norm_sqr();
            (var.max(0.0) / r).sqrt()
        })
    }

    /// `sigmas` standard errors of the mean, converted to a trace-distance
    /// bound through `½‖Δ‖_1 ≤ ½ √d ‖Δ‖_F`.
    pub fn trace_distance_envelope(&self, step: usize, sigmas: f64) -> f64 {
        let se = self.standard_error(step);
        let d = se.nrows() as f64;
        let frob = se.iter().map(|v| v * v).sum::<f64>().sqrt();
        sigmas * 0.5 * d.sqrt() * frob
    }
}

struct ChunkSums {
    sum: Vec<ComplexMatrix>,
    sum_sq: Vec<DMatrix<f64>>,
}

impl ChunkSums {
    fn new(d: usize, steps: usize) -> Self {
        Self {
            sum: vec![ComplexMatrix::zeros(d, d); steps + 1],
            sum_sq: vec![DMatrix::zeros(d, d); steps + 1],
        }
    }

    fn add_matrix(&mut self, step: usize, x: &ComplexMatrix) {
        self.sum[step] += x;
        for (acc, z) in self.sum_sq[step].iter_mut().zip(x.iter()) {
            *acc += z.norm_sqr();
        }
    }

    fn add_projector(&mut self, step: usize, k: usize) {
        self.sum[step][(k, k)] += C64::new(1.0, 0.0);
        self.sum_sq[step][(k, k)] += 1.0;
    }

    fn merge(&mut self, other: &ChunkSums) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }
}

fn run_chunk(
    energies: &[f64],
    config: &MetropolisConfig,
    rho0: &ComplexMatrix,
    rates: &[f64],
    runs: std::ops::Range<usize>,
    diagonal_start: bool,
) -> Result<ChunkSums> {
    let d = energies.len();
    let mut sums = ChunkSums::new(d, config.steps);
    let start = TrajectoryState::new(rho0.clone());
    for run in runs {
        sums.add_matrix(0, rho0);
        if diagonal_start {
            // Every state after the first step is a projector; track the index.
            let mut current: Option<usize> = None;
            for step in 0..config.steps {
                let mut rng = stream_rng(config.seed, run, step);
                let outcome = match current {
                    None => sample_outcome(rho0, energies, config.beta, &mut rng)?,
                    Some(k) => sample_outcome(&states::eigenstate(d, k), energies, config.beta, &mut rng)?,
                };
                let next = if outcome.accepted { outcome.target } else { outcome.source };
                sums.add_projector(step + 1, next);
                current = Some(next);
            }
        } else {
            let mut state = start.clone();
            for step in 0..config.steps {
                let mut rng = stream_rng(config.seed, run, step);
                let outcome = sample_outcome(&state.matrix, energies, config.beta, &mut rng)?;
                state = apply_outcome(&state, rates, outcome);
                sums.add_matrix(step + 1, &state.matrix);
            }
        }
    }
    Ok(sums)
}

/// Runs `config.runs` independent trajectories and returns the per-step
/// sample mean and second moments.
pub fn mc_sample(energies: &[f64], config: &MetropolisConfig, rho0: &ComplexMatrix) -> Result<McEnsemble> {
    config.validate()?;
    check_state_dim(rho0, energies.len())?;
    if energies.len() < 2 {
        return Err(Error::InvalidParameter("need at least two eigenstates".into()));
    }
    source_probabilities(rho0)?;

    let rates = rejection_rates(energies, config.beta);
    let diagonal_start = states::is_diagonal(rho0);
    let chunks = config.runs.div_ceil(CHUNK_RUNS);
    let partials: Vec<Result<ChunkSums>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK_RUNS;
            let hi = (lo + CHUNK_RUNS).min(config.runs);
            run_chunk(energies, config, rho0, &rates, lo..hi, diagonal_start)
        })
        .collect();

    let d = energies.len();
    let mut total = ChunkSums::new(d, config.steps);
    for partial in partials {
        total.merge(&partial?);
    }
    let r = config.runs as f64;
    let mut mean = TimeSeries {
        states: total.sum.into_iter().map(|m| m.unscale(r)).collect(),
    };
    // Every run starts from rho0 itself.
    mean.states[0] = rho0.clone();
    if mean.states.iter().any(|m| !linalg::is_finite(m)) {
        return Err(Error::NonFinite("Monte Carlo mean".into()));
    }
    Ok(McEnsemble {
        mean,
        second_moment: total.sum_sq.into_iter().map(|m| m / r).collect(),
        runs: config.runs,
    })
}

pub fn mc_evolve(energies: &[f64], config: &MetropolisConfig, rho0: &ComplexMatrix, mode: McMode) -> Result<TimeSeries> {
    match mode {
        McMode::Trajectories => Ok(mc_sample(energies, config, rho0)?.mean),
        McMode::AveragedMap => {
            config.validate()?;
            check_state_dim(rho0, energies.len())?;
            let mut states = Vec::with_capacity(config.steps + 1);
            states.push(rho0.clone());
            for _ in 0..config.steps {
                let next = mc_averaged_map(states.last().unwrap(), energies, config.beta)?;
                if !linalg::is_finite(&next) {
                    return Err(Error::NonFinite("averaged Metropolis map".into()));
                }
                states.push(next);
            }
            Ok(TimeSeries { states })
        }
    }
}

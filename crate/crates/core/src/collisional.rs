//! Repeated-interaction dynamics.
//!
//! Each step optionally evolves the system freely for `ts`, then lets it
//! collide for `dt` with a fresh thermal ancilla that is traced out
//! afterwards. The exact stepper uses the full joint unitary; the
//! second-order stepper is the discrete master equation obtained by
//! truncating the interaction propagator at order `(g dt)^2`.

use crate::bath::{self, BathSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::model::{self, TransitionTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionConfig {
    pub g: f64,
    pub dt: f64,
    pub ts: f64,
    pub beta: f64,
    pub steps: usize,
    pub include_free_evolution: bool,
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.ts >= 0.0 && self.ts.is_finite()) {
            return Err(Error::InvalidParameter(format!("ts must be non-negative, got {}", self.ts)));
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidParameter("g must be finite".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be finite and non-negative, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn g_dt(&self) -> f64 {
        self.g * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmMode {
    Exact,
    SecondOrder,
}

/// Density matrices in the energy eigenbasis, one per step (index 0 is the
/// initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub states: Vec<ComplexMatrix>,
}

/// Per-state structural check results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateHealth {
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateHealth {
    pub fn of(rho: &ComplexMatrix) -> Result<Self> {
        let hermiticity = linalg::hermiticity_deviation(rho);
        let sym = (rho + rho.adjoint()).scale(0.5);
        Ok(Self {
            trace_error: (linalg::trace(rho) - C64::new(1.0, 0.0)).norm(),
            hermiticity,
            min_eigenvalue: linalg::min_eigenvalue(&sym)?,
        })
    }

    pub fn is_density_matrix(&self, tol_trace: f64, tol_herm: f64, tol_eig: f64) -> bool {
        self.trace_error <= tol_trace && self.hermiticity <= tol_herm && self.min_eigenvalue >= -tol_eig
    }
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }

    pub fn last(&self) -> &ComplexMatrix {
        self.states.last().expect("time series always holds the initial state")
    }

    /// Eigenbasis occupation probabilities per step.
    pub fn occupations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(occupations).collect()
    }

    pub fn trace_distances_to(&self, target: &ComplexMatrix) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| linalg::trace_distance(s, target))
            .collect()
    }

    pub fn health(&self) -> Result<Vec<StateHealth>> {
        self.states.iter().map(StateHealth::of).collect()
    }
}

/// The real diagonal of `rho`.
pub fn occupations(rho: &ComplexMatrix) -> Vec<f64> {
    rho.diagonal().iter().map(|z| z.re).collect()
}

/// Kraus form of one collision, `ρ ↦ Σ_n K_n ρ K_n^†`, with
/// `K_(l,k) = √p_k ⟨l|U|k⟩` for a diagonal ancilla state `Σ_k p_k |k⟩⟨k|`.
/// Blocks that vanish identically are dropped.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    pub dim: usize,
    pub operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn from_unitary(u_int: &ComplexMatrix, ancilla_pops: &[f64], dim: usize) -> Result<Self> {
        let da = ancilla_pops.len();
        if u_int.nrows() != dim * da || u_int.ncols() != dim * da {
            return Err(Error::DimensionMismatch(format!(
                "joint unitary is {}x{}, expected {}",
                u_int.nrows(),
                u_int.ncols(),
                dim * da
            )));
        }
        let mut operators = Vec::new();
        for (k, &p) in ancilla_pops.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let amp = p.sqrt();
            for l in 0..da {
                let block = ComplexMatrix::from_fn(dim, dim, |s, t| u_int[(s * da + l, t * da + k)]);
                if block.iter().any(|z| z.norm() != 0.0) {
                    operators.push(block.scale(amp));
                }
            }
        }
        Ok(Self { dim, operators })
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for k in &self.operators {
            out += k * rho * k.adjoint();
        }
        out
    }
}

fn diagonal_pops(rho_a: &ComplexMatrix) -> Option<Vec<f64>> {
    let n = rho_a.nrows();
    for r in 0..n {
        for c in 0..n {
            if r != c && rho_a[(r, c)].norm() != 0.0 {
                return None;
            }
        }
    }
    Some(rho_a.diagonal().iter().map(|z| z.re).collect())
}

/// One exact collision: `tr_a{U (ρ_S ⊗ ρ_a) U^†}`.
pub fn cm_step_exact(rho_s: &ComplexMatrix, u_int: &ComplexMatrix, rho_a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = rho_s.nrows();
    let da = rho_a.nrows();
    if u_int.nrows() != d * da || u_int.ncols() != d * da || rho_s.ncols() != d || rho_a.ncols() != da {
        return Err(Error::DimensionMismatch(format!(
            "collision with system {d}, ancilla {da}, unitary {}x{}",
            u_int.nrows(),
            u_int.ncols()
        )));
    }
    match diagonal_pops(rho_a) {
        Some(pops) => Ok(KrausChannel::from_unitary(u_int, &pops, d)?.apply(rho_s)),
        None => {
            let joint = linalg::kron(rho_s, rho_a);
            linalg::partial_trace_second(&(u_int * joint * u_int.adjoint()), d, da)
        }
    }
}

/// One step of the truncated discrete master equation:
///
/// `ρ + (g dt)²/Z_a Σ_{i>j} [A ρ A^† + w A^† ρ A - ½{ρ,|i⟩⟨i|} - (w/2){ρ,|j⟩⟨j|}]`
///
/// with `A = |j⟩⟨i|` and `w = e^{-β ε_ij}`, `ε_ij` taken from the table gaps.
pub fn cm_step_second_order(
    rho_s: &ComplexMatrix,
    table: &TransitionTable,
    beta: f64,
    g_dt: f64,
    z_a: f64,
) -> Result<ComplexMatrix> {
    let d = table.dim;
    if rho_s.nrows() != d || rho_s.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, table has dimension {d}",
            rho_s.nrows(),
            rho_s.ncols()
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
    }
    let mut delta = ComplexMatrix::zeros(d, d);
    for ((i, j), gap) in table.iter() {
        let w = bath::boltzmann_weight(gap, beta);
        delta[(j, j)] += rho_s[(i, i)];
        delta[(i, i)] += rho_s[(j, j)] * w;
        for k in 0..d {
            delta[(i, k)] -= rho_s[(i, k)] * 0.5;
            delta[(k, i)] -= rho_s[(k, i)] * 0.5;
            delta[(j, k)] -= rho_s[(j, k)] * (0.5 * w);
            delta[(k, j)] -= rho_s[(k, j)] * (0.5 * w);
        }
    }
    Ok(rho_s + delta.scale(g_dt * g_dt / z_a))
}

/// Free evolution in the eigenbasis: `ρ_kl ↦ ρ_kl e^{-i(E_k - E_l) t}`.
pub fn free_evolution(rho: &ComplexMatrix, energies: &[f64], t: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(rho.nrows(), rho.ncols(), |k, l| {
        if k == l {
            rho[(k, l)]
        } else {
            rho[(k, l)] * C64::from_polar(1.0, -(energies[k] - energies[l]) * t)
        }
    })
}

/// Everything a collisional run needs that does not change between steps.
#[derive(Debug, Clone)]
pub struct CollisionSetup {
    pub energies: Vec<f64>,
    pub table: TransitionTable,
    pub bath: BathSpec,
    pub z_a: f64,
    pub ancilla_pops: Vec<f64>,
    pub config: CollisionConfig,
    channel: Option<KrausChannel>,
}

impl CollisionSetup {
    pub fn new(energies: &[f64], config: CollisionConfig, mode: CmMode) -> Result<Self> {
        config.validate()?;
        let table = model::transitions(energies)?;
        let bath = bath::build_bath_spec(&table);
        let z_a = bath::partition_function(&bath, config.beta)?;
        let ancilla_pops: Vec<f64> = bath::ancilla_state(&bath, config.beta)?
            .diagonal()
            .iter()
            .map(|z| z.re)
            .collect();
        let channel = match mode {
            CmMode::Exact => {
                let h_int = bath::build_interaction(table.dim, &bath, config.g)?;
                let u = linalg::unitary_exp(&h_int, config.dt)?;
                Some(KrausChannel::from_unitary(&u, &ancilla_pops, table.dim)?)
            }
            CmMode::SecondOrder => None,
        };
        Ok(Self {
            energies: energies.to_vec(),
            table,
            bath,
            z_a,
            ancilla_pops,
            config,
            channel,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn ratio(&self) -> f64 {
        self.z_a / (self.dim() - 1) as f64
    }

    /// Free evolution (when enabled) followed by one collision.
    pub fn step(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let rho = if self.config.include_free_evolution && self.config.ts != 0.0 {
            free_evolution(rho, &self.energies, self.config.ts)
        } else {
            rho.clone()
        };
        let next = match &self.channel {
            Some(channel) => channel.apply(&rho),
            None => cm_step_second_order(&rho, &self.table, self.config.beta, self.config.g_dt(), self.z_a)?,
        };
        if !linalg::is_finite(&next) {
            return Err(Error::NonFinite("collisional step produced NaN/Inf".into()));
        }
        Ok(next)
    }

    pub fn evolve(&self, rho0: &ComplexMatrix) -> Result<TimeSeries> {
        check_state_dim(rho0, self.dim())?;
        let mut states = Vec::with_capacity(self.config.steps + 1);
        states.push(rho0.clone());
        for _ in 0..self.config.steps {
            let next = self.step(states.last().unwrap())?;
            states.push(next);
        }
        Ok(TimeSeries { states })
    }
}

pub(crate) fn check_state_dim(rho: &ComplexMatrix, d: usize) -> Result<()> {
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial state is {}x{}, system dimension is {d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if !linalg::is_finite(rho) {
        return Err(Error::NonFinite("initial state".into()));
    }
    Ok(())
}

/// Diagonalizes `h_system` and runs the collisional model from `rho0`, which
/// must already be expressed in the energy eigenbasis.
pub fn cm_evolve(h_system: &ComplexMatrix, config: &CollisionConfig, rho0: &ComplexMatrix, mode: CmMode) -> Result<TimeSeries> {
    let eig = linalg::herm_eig(h_system)?;
    cm_evolve_energies(&eig.values, config, rho0, mode)
}

pub fn cm_evolve_energies(energies: &[f64], config: &CollisionConfig, rho0: &ComplexMatrix, mode: CmMode) -> Result<TimeSeries> {
    CollisionSetup::new(energies, *config, mode)?.evolve(rho0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::*;
    use crate::linalg::{identity, max_abs_diff, trace};
    use crate::model::{build_xxz, diagonalize, gibbs_state, SpinChainParams};
    use crate::states::uniform_superposition;

    fn config(g: f64, beta: f64, steps: usize) -> CollisionConfig {
        CollisionConfig {
            g,
            dt: 1.0,
            ts: 1.0,
            beta,
            steps,
            include_free_evolution: false,
        }
    }

    fn setup(n: usize, g: f64, beta: f64, mode: CmMode) -> CollisionSetup {
        let eig = diagonalize(&SpinChainParams::unit(n).unwrap()).unwrap();
        CollisionSetup::new(&eig.values, config(g, beta, 0), mode).unwrap()
    }

    fn exact_unitary(s: &CollisionSetup) -> (ComplexMatrix, ComplexMatrix) {
        let h_int = bath::build_interaction(s.dim(), &s.bath, s.config.g).unwrap();
        let u = linalg::unitary_exp(&h_int, s.config.dt).unwrap();
        (u, bath::ancilla_state(&s.bath, s.config.beta).unwrap())
    }

    #[test]
    fn exact_step_matches_joint_space_route() {
        let s = setup(2, 0.8, 1.3, CmMode::Exact);
        let (u, rho_a) = exact_unitary(&s);
        let mut rng = rng(41);
        for _ in 0..10 {
            let rho = random_density(&mut rng, 4);
            let joint = linalg::kron(&rho, &rho_a);
            let reference = linalg::partial_trace_second(&(&u * joint * u.adjoint()), 4, 7).unwrap();
            let via_kraus = cm_step_exact(&rho, &u, &rho_a).unwrap();
            assert!(max_abs_diff(&via_kraus, &reference) <= 1e-13);
            assert!(max_abs_diff(&s.step(&rho).unwrap(), &reference) <= 1e-13);
        }
    }

    #[test]
    fn exact_step_decoupled_is_identity() {
        let s = setup(2, 0.0, 2.0, CmMode::Exact);
        let (u, rho_a) = exact_unitary(&s);
        assert!(max_abs_diff(&u, &identity(28)) <= 1e-15);
        let rho = random_density(&mut rng(2), 4);
        assert!(max_abs_diff(&cm_step_exact(&rho, &u, &rho_a).unwrap(), &rho) <= 1e-15);
    }

    #[test]
    fn exact_step_preserves_density_matrices() {
        let s = setup(3, 0.6, 0.7, CmMode::Exact);
        let mut rng = rng(43);
        for _ in 0..10 {
            let out = s.step(&random_density(&mut rng, 8)).unwrap();
            let health = StateHealth::of(&out).unwrap();
            assert!(health.is_density_matrix(1e-12, 1e-12, 1e-10), "{health:?}");
        }
    }

    #[test]
    fn second_order_examples() {
        let eig = diagonalize(&SpinChainParams::unit(3).unwrap()).unwrap();
        let table = model::transitions(&eig.values).unwrap();
        let bath = bath::build_bath_spec(&table);
        for beta in [0.0, 0.5, 2.0, 20.0] {
            let z_a = bath::partition_function(&bath, beta).unwrap();
            let gibbs = gibbs_state(&eig.values, beta).unwrap();
            let out = cm_step_second_order(&gibbs, &table, beta, 0.3, z_a).unwrap();
            assert!(max_abs_diff(&out, &gibbs) <= 1e-12, "beta={beta}");
        }

        let rho = random_density(&mut rng(3), 8);
        let same = cm_step_second_order(&rho, &table, 2.0, 0.0, 1.7).unwrap();
        assert_eq!(same, rho);

        let wrong = random_density(&mut rng(3), 4);
        assert!(cm_step_second_order(&wrong, &table, 2.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn second_order_preserves_trace_and_contracts_coherences() {
        let eig = diagonalize(&SpinChainParams::unit(2).unwrap()).unwrap();
        let table = model::transitions(&eig.values).unwrap();
        let bath = bath::build_bath_spec(&table);
        let mut rng = rng(47);
        for beta in [0.0, 2.0, 20.0] {
            let z_a = bath::partition_function(&bath, beta).unwrap();
            let g_dt = (z_a / 3.0).sqrt();
            for _ in 0..20 {
                let rho = random_density(&mut rng, 4);
                let out = cm_step_second_order(&rho, &table, beta, g_dt, z_a).unwrap();
                assert!((trace(&out) - trace(&rho)).norm() <= 1e-12);
                for k in 0..4 {
                    for l in 0..4 {
                        if k != l {
                            assert!(out[(k, l)].norm() <= rho[(k, l)].norm() + 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn exact_and_second_order_agree_to_fourth_order() {
        let eig = diagonalize(&SpinChainParams::unit(2).unwrap()).unwrap();
        let rho = random_density(&mut rng(53), 4);
        let error_at = |g: f64| {
            let exact = CollisionSetup::new(&eig.values, config(g, 2.0, 0), CmMode::Exact).unwrap();
            let approx = CollisionSetup::new(&eig.values, config(g, 2.0, 0), CmMode::SecondOrder).unwrap();
            max_abs_diff(&exact.step(&rho).unwrap(), &approx.step(&rho).unwrap())
        };
        let mut g = 0.2;
        for _ in 0..3 {
            let ratio = error_at(g) / error_at(g / 2.0);
            assert!(ratio >= 8.0, "g={g} ratio={ratio}");
            g /= 2.0;
        }
    }

    #[test]
    fn free_evolution_keeps_occupations() {
        let eig = diagonalize(&SpinChainParams::unit(2).unwrap()).unwrap();
        let rho0 = uniform_superposition(4);
        let mut on = config(1.0, 2.0, 6);
        on.include_free_evolution = true;
        let off = config(1.0, 2.0, 6);

        let coherent_on = cm_evolve_energies(&eig.values, &on, &rho0, CmMode::Exact).unwrap();
        for a in &coherent_on.states {
            let phased = free_evolution(a, &eig.values, 1.0);
            assert_eq!(occupations(&phased), occupations(a));
        }

        let diag = gibbs_state(&eig.values, 0.3).unwrap();
        let s_on = cm_evolve_energies(&eig.values, &on, &diag, CmMode::Exact).unwrap();
        let s_off = cm_evolve_energies(&eig.values, &off, &diag, CmMode::Exact).unwrap();
        for (a, b) in s_on.occupations().iter().zip(s_off.occupations()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn evolve_zero_steps_returns_initial_state() {
        let h = build_xxz(&SpinChainParams::unit(2).unwrap()).unwrap();
        let rho0 = uniform_superposition(4);
        let series = cm_evolve(&h, &config(1.0, 2.0, 0), &rho0, CmMode::Exact).unwrap();
        assert_eq!(series.states, vec![rho0]);
    }

    #[test]
    fn thermalizes_two_site_chain() {
        let params = SpinChainParams::unit(2).unwrap();
        let h = build_xxz(&params).unwrap();
        let eig = diagonalize(&params).unwrap();
        let mut cfg = config(1.0, 2.0, 20);
        cfg.include_free_evolution = true;
        let series = cm_evolve(&h, &cfg, &uniform_superposition(4), CmMode::Exact).unwrap();
        let gibbs = gibbs_state(&eig.values, 2.0).unwrap();
        let d = series.trace_distances_to(&gibbs).unwrap();
        assert!(d[20] < 0.05, "final trace distance {}", d[20]);
        for h in series.health().unwrap() {
            assert!(h.is_density_matrix(1e-10, 1e-10, 1e-9));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let eig = diagonalize(&SpinChainParams::unit(2).unwrap()).unwrap();
        let mut cfg = config(1.0, 2.0, 1);
        cfg.dt = 0.0;
        assert!(CollisionSetup::new(&eig.values, cfg, CmMode::Exact).is_err());
        let cfg = config(1.0, 2.0, 1);
        let bad = random_density(&mut rng(1), 3);
        assert!(cm_evolve_energies(&eig.values, &cfg, &bad, CmMode::SecondOrder).is_err());
    }
}

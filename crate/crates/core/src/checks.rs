//! Self-checks on the unit chains, run by `qcollide check`.

use crate::bath::partition_function_from_gaps;
use crate::collisional::{CmMode, CollisionConfig, CollisionSetup};
use crate::error::Result;
use crate::linalg::{self, c, ComplexMatrix};
use crate::metropolis::{self, acceptance, apply_outcome, omega, rejection_rates, source_probabilities, Outcome, TrajectoryState};
use crate::model::{self, SpinChainParams};
use crate::states;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

/// Mean over every (source, target, verdict) branch of one trajectory step.
pub fn enumerated_step(rho: &ComplexMatrix, energies: &[f64], beta: f64) -> Result<ComplexMatrix> {
    let d = energies.len();
    let l = (d - 1) as f64;
    let rates = rejection_rates(energies, beta);
    let probs = source_probabilities(rho)?;
    let state = TrajectoryState::new(rho.clone());
    let mut out = ComplexMatrix::zeros(d, d);
    for (source, &ps) in probs.iter().enumerate().filter(|(_, &p)| p > 0.0) {
        for target in (0..d).filter(|&t| t != source) {
            let p = acceptance(omega(energies[source], energies[target]), beta);
            for (accepted, w) in [(true, p), (false, 1.0 - p)] {
                if w == 0.0 {
                    continue;
                }
                let next = apply_outcome(&state, &rates, Outcome { source, target, accepted });
                out += next.matrix * c(ps * w / l, 0.0);
            }
        }
    }
    Ok(out)
}

fn random_density(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let t = linalg::trace(&m);
    m / t
}

fn unit_spectrum(n: usize) -> Result<Vec<f64>> {
    Ok(model::diagonalize(&SpinChainParams::unit(n)?)?.values)
}

pub fn run_all() -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();
    let betas = [0.0, 0.5, 2.0, 20.0];

    for n in [2, 3] {
        let energies = unit_spectrum(n)?;
        let d = energies.len();
        let table = model::transitions(&energies)?;
        for &beta in &betas {
            let gibbs = model::gibbs_state(&energies, beta)?;
            let config = CollisionConfig {
                g: 0.3,
                dt: 1.0,
                ts: 0.7,
                beta,
                steps: 1,
                include_free_evolution: true,
            };
            let cm = CollisionSetup::new(&energies, config, CmMode::Exact)?.step(&gibbs)?;
            results.push(CheckResult {
                name: format!("collisional Gibbs fixed point N={n} beta={beta}"),
                value: linalg::max_abs_diff(&cm, &gibbs),
                tolerance: 1e-10,
            });
            let mc = metropolis::mc_averaged_map(&gibbs, &energies, beta)?;
            results.push(CheckResult {
                name: format!("Metropolis Gibbs fixed point N={n} beta={beta}"),
                value: linalg::max_abs_diff(&mc, &gibbs),
                tolerance: 1e-12,
            });

            let z_a = partition_function_from_gaps(&table.gaps, beta)?;
            let g_dt = (z_a / (d - 1) as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(7 + n as u64);
            let rho = random_density(&mut rng, d);
            let second = crate::collisional::cm_step_second_order(&rho, &table, beta, g_dt, z_a)?;
            let averaged = metropolis::mc_averaged_map(&rho, &energies, beta)?;
            results.push(CheckResult {
                name: format!("map equivalence N={n} beta={beta}"),
                value: linalg::max_abs_diff(&second, &averaged),
                tolerance: 1e-12,
            });

            let enumerated = enumerated_step(&rho, &energies, beta)?;
            results.push(CheckResult {
                name: format!("unraveling enumeration N={n} beta={beta}"),
                value: linalg::max_abs_diff(&enumerated, &averaged),
                tolerance: 1e-12,
            });
        }
    }

    // Enumeration from a state with an unpopulated level.
    let energies = unit_spectrum(2)?;
    let mut rho = states::uniform_superposition(4);
    for k in 0..4 {
        rho[(3, k)] = c(0.0, 0.0);
        rho[(k, 3)] = c(0.0, 0.0);
    }
    rho /= c(0.75, 0.0);
    let enumerated = enumerated_step(&rho, &energies, 2.0)?;
    let averaged = metropolis::mc_averaged_map(&rho, &energies, 2.0)?;
    results.push(CheckResult {
        name: "unraveling enumeration with empty level".into(),
        value: linalg::max_abs_diff(&enumerated, &averaged),
        tolerance: 1e-12,
    });

    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run_all().unwrap();
        assert!(results.len() > 30);
        for r in results {
            assert!(r.passed(), "{}: {:e} > {:e}", r.name, r.value, r.tolerance);
        }
    }

    #[test]
    fn failed_check_reports_failure() {
        let r = CheckResult { name: "x".into(), value: f64::NAN, tolerance: 1.0 };
        assert!(!r.passed());
    }
}

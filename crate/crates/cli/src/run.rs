//! Executes one experiment and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qcollide::analysis::{self, CompareConfig};
use qcollide::collisional::{CmMode, CollisionSetup, TimeSeries};
use qcollide::linalg::{self, ComplexMatrix};
use qcollide::metropolis::{self, McMode, MetropolisConfig};
use qcollide::model;
use qcollide::states;

use crate::config::{CompareMc, Engine, ExperimentConfig, InitialState, NamedState};
use crate::error::CliError;
use crate::output;
use crate::plot;

#[derive(Debug, Default)]
pub struct RunReport {
    pub summary: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

fn initial_state(config: &ExperimentConfig, energies: &[f64], beta: f64) -> Result<ComplexMatrix, CliError> {
    let d = energies.len();
    Ok(match &config.initial_state {
        InitialState::Named(NamedState::UniformSuperposition) => states::uniform_superposition(d),
        InitialState::Named(NamedState::Ground) => states::eigenstate(d, 0),
        InitialState::Named(NamedState::Gibbs) => model::gibbs_state(energies, beta)?,
        InitialState::Diagonal(pops) => states::diagonal(pops)?,
    })
}

fn check_finite(series: &TimeSeries) -> Result<(), CliError> {
    match series.states.iter().position(|m| !linalg::is_finite(m)) {
        Some(n) => Err(CliError::Numeric(format!("NaN/Inf in the state at step {n}"))),
        None => Ok(()),
    }
}

pub fn execute(config: &ExperimentConfig, plot_enabled: bool) -> Result<RunReport, CliError> {
    config.validate()?;
    let start = Instant::now();
    let mut report = RunReport::default();
    std::fs::create_dir_all(&config.output)?;

    if config.engine == Engine::RatioScan {
        ratio_scan(config, &mut report, plot_enabled)?;
    } else {
        let params = config.params()?;
        let beta = config.beta()?;
        let energies = model::diagonalize(&params)?.values;
        let table = model::transitions(&energies)?;
        let z_a = qcollide::bath::partition_function_from_gaps(&table.gaps, beta)?;
        let d = energies.len();
        let rho0 = initial_state(config, &energies, beta)?;

        report.note("engine", format!("{:?}", config.engine));
        report.note("N", params.n_sites);
        report.note("J", params.coupling);
        report.note("h", params.field);
        report.note("Delta", params.anisotropy);
        report.note("beta", beta);
        report.note("d", d);
        report.note("M", table.count());
        report.note("Z_a", format!("{z_a:.10}"));
        report.note("Z_a/L", format!("{:.10}", z_a / (d - 1) as f64));

        match config.engine {
            Engine::CmExact | Engine::CmSecondOrder => {
                let section = config.collision.as_ref().expect("validated");
                let cc = config.collision_config(section)?;
                let mode = if config.engine == Engine::CmExact { CmMode::Exact } else { CmMode::SecondOrder };
                report.note("gΔt", format!("{:.10}", cc.g_dt()));
                report.note("steps", cc.steps);
                let series = CollisionSetup::new(&energies, cc, mode)?.evolve(&rho0)?;
                write_series(config, &series, &energies, beta, &mut report, plot_enabled)?;
            }
            Engine::McTrajectories | Engine::McAveraged => {
                let mc = config.mc.as_ref().expect("validated");
                let mode = if config.engine == Engine::McTrajectories { McMode::Trajectories } else { McMode::AveragedMap };
                let mcc = MetropolisConfig {
                    beta,
                    steps: mc.steps,
                    runs: mc.runs.max(1),
                    seed: mc.seed,
                };
                report.note("equivalent gΔt", format!("{:.10}", analysis::equivalence_coupling(z_a, d)?));
                report.note("steps", mc.steps);
                if mode == McMode::Trajectories {
                    report.note("runs", mc.runs);
                    report.note("seed", mc.seed);
                }
                let series = metropolis::mc_evolve(&energies, &mcc, &rho0, mode)?;
                write_series(config, &series, &energies, beta, &mut report, plot_enabled)?;
            }
            Engine::Compare => compare(config, &energies, beta, &rho0, &mut report, plot_enabled)?,
            Engine::RatioScan => unreachable!(),
        }
    }

    report.note("wall time", format!("{:.3?}", start.elapsed()));
    Ok(report)
}

fn write_series(
    config: &ExperimentConfig,
    series: &TimeSeries,
    energies: &[f64],
    beta: f64,
    report: &mut RunReport,
    plot_enabled: bool,
) -> Result<(), CliError> {
    check_finite(series)?;
    let occupations = series.occupations();
    let distances = series.trace_distances_to(&model::gibbs_state(energies, beta)?)?;
    if distances.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Numeric("non-finite trace distance".into()));
    }
    let d = energies.len();

    let occ_path = config.output.join("occupations.csv");
    let mut header = vec!["n".to_string()];
    header.extend((1..=d).map(|k| format!("p_{k}")));
    output::write_rows(&occ_path, &header, occupations.iter().enumerate().map(|(n, row)| (n, row.clone())))?;
    report.files.push(occ_path.clone());

    let td_path = config.output.join("trace_distance.csv");
    output::write_rows(
        &td_path,
        &["n".to_string(), "D".to_string()],
        distances.iter().enumerate().map(|(n, &v)| (n, vec![v])),
    )?;
    report.files.push(td_path.clone());
    report.note("final D to Gibbs", format!("{:.6e}", distances.last().copied().unwrap_or(0.0)));

    if plot_enabled {
        let gibbs = model::boltzmann_populations(energies, beta)?;
        let lines: Vec<plot::Series> = (0..d)
            .map(|k| plot::Series {
                label: format!("p_{}", k + 1),
                points: occupations.iter().enumerate().map(|(n, row)| (n as f64, row[k])).collect(),
            })
            .collect();
        report.files.push(plot::line_chart(
            &svg_path(&occ_path),
            "Eigenstate occupations",
            "step n",
            "occupation",
            &lines,
            &gibbs,
        )?);
        let line = plot::Series {
            label: "D".into(),
            points: distances.iter().enumerate().map(|(n, &v)| (n as f64, v)).collect(),
        };
        report.files.push(plot::line_chart(&svg_path(&td_path), "Trace distance to Gibbs", "step n", "D", &[line], &[])?);
    }
    Ok(())
}

fn compare(
    config: &ExperimentConfig,
    energies: &[f64],
    beta: f64,
    rho0: &ComplexMatrix,
    report: &mut RunReport,
    plot_enabled: bool,
) -> Result<(), CliError> {
    let mc = config.mc.as_ref().expect("validated");
    let mode = match config.compare.mc {
        CompareMc::Trajectories => McMode::Trajectories,
        CompareMc::Averaged => McMode::AveragedMap,
    };
    let cc = CompareConfig {
        beta,
        steps: mc.steps,
        runs: mc.runs.max(1),
        seed: mc.seed,
        mc_mode: mode,
    };
    let result = analysis::compare_models_energies(energies, &cc, rho0)?;
    check_finite(&result.cm)?;
    check_finite(&result.mc)?;
    report.note("gΔt", format!("{:.10}", result.coupling_used));
    report.note("steps", mc.steps);
    report.note("Metropolis", format!("{mode:?}"));
    if mode == McMode::Trajectories {
        report.note("runs", mc.runs);
        report.note("seed", mc.seed);
    }

    let path = config.output.join("comparison.csv");
    let header: Vec<String> = ["n", "D", "min_eig_cm", "min_eig_mc"].iter().map(|s| s.to_string()).collect();
    output::write_rows(
        &path,
        &header,
        result
            .per_step
            .iter()
            .map(|s| (s.n, vec![s.trace_distance, s.min_eig_cm, s.min_eig_mc])),
    )?;
    report.files.push(path.clone());
    let (peak_step, peak) = result.peak();
    report.note("peak D", format!("{peak:.6e} at step {peak_step}"));

    if plot_enabled {
        let line = plot::Series {
            label: "D".into(),
            points: result.per_step.iter().map(|s| (s.n as f64, s.trace_distance)).collect(),
        };
        report.files.push(plot::line_chart(
            &svg_path(&path),
            "Collisional model vs Metropolis",
            "step n",
            "D",
            &[line],
            &[],
        )?);
    }
    Ok(())
}

fn ratio_scan(config: &ExperimentConfig, report: &mut RunReport, plot_enabled: bool) -> Result<(), CliError> {
    let scan = config.scan.as_ref().expect("validated");
    let template = config.params()?;
    let rows = analysis::ratio_scan(&scan.n_sites, &scan.betas, &template)?;
    if rows.iter().any(|r| !r.ratio.is_finite()) {
        return Err(CliError::Numeric("non-finite Z_a/L".into()));
    }
    report.note("engine", "RatioScan");
    report.note("J", template.coupling);
    report.note("h", template.field);
    report.note("Delta", template.anisotropy);
    report.note("N values", format!("{:?}", scan.n_sites));
    report.note("betas", format!("{:?}", scan.betas));

    let path = config.output.join("ratio.csv");
    output::write_ratio(&path, &rows)?;
    report.files.push(path.clone());

    if plot_enabled {
        let lines: Vec<plot::Series> = scan
            .betas
            .iter()
            .map(|&b| plot::Series {
                label: format!("beta = {b}"),
                points: rows
                    .iter()
                    .filter(|r| r.beta.to_bits() == b.to_bits())
                    .map(|r| (r.n_sites as f64, r.ratio))
                    .collect(),
            })
            .collect();
        report.files.push(plot::line_chart(&svg_path(&path), "Z_a / L", "N", "Z_a / L", &lines, &[])?);
    }
    Ok(())
}

fn svg_path(csv: &Path) -> PathBuf {
    csv.with_extension("svg")
}

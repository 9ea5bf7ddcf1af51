use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::config::ExperimentConfig;
use super::output::{band_columns, matrix_columns, vector_columns, ResultTable, RunMetadata};
use crate::error::{Error, Result};
use crate::mfsim::{ensemble, EnsembleConfig};
use crate::riccati::solve_mean_field;
use crate::stats::Band;
use crate::verify::{self, CheckResult, MAX_DENSE_DIM};

const SERIES: [&str; 4] = ["x_avg", "x_max", "u_avg", "u_max"];

fn metadata(config: &ExperimentConfig, command: &str) -> RunMetadata {
    RunMetadata {
        command: command.to_string(),
        config_sha256: config.sha256.clone(),
        seed: config.base_seed,
        n_runs: config.n_runs,
    }
}

fn flatten(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

fn flatten_vec(v: &DVector<f64>) -> impl Iterator<Item = f64> + '_ {
    v.iter().copied()
}

fn band_cells(band: &Band) -> [f64; 3] {
    [band.mean, band.lower, band.upper]
}

/// Per λ: `gains_lambda_<i>.csv` (`t, K, Kbar, f`, `T` rows) and
/// `value_lambda_<i>.csv` (`t, S, Sbar, g`, `T + 1` rows).
pub fn cmd_solve(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let meta = metadata(config, "solve");
    let (n, m) = (config.spec.n(), config.spec.m());
    let mut written = Vec::new();
    for (index, &lambda) in config.lambda_grid.iter().enumerate() {
        let spec = config.spec_at(lambda)?;
        let schedule = solve_mean_field(&spec)?;

        let mut columns = vec!["t".to_string()];
        columns.extend(matrix_columns("K", m, n));
        columns.extend(matrix_columns("Kbar", m, n));
        columns.extend(vector_columns("f", m));
        let mut gains = ResultTable::new(columns)
            .note("lambda", format!("{lambda:e}"))
            .note("lambda_index", index);
        for t in 0..spec.horizon() {
            let row = std::iter::once(t as f64)
                .chain(flatten(&schedule.gain[t]))
                .chain(flatten(&schedule.gain_bar[t]))
                .chain(flatten_vec(&schedule.offset[t]))
                .collect();
            gains.push(row)?;
        }
        written.push(gains.write(out, &format!("gains_lambda_{index}.csv"), &meta)?);

        let mut columns = vec!["t".to_string()];
        columns.extend(matrix_columns("S", n, n));
        columns.extend(matrix_columns("Sbar", n, n));
        columns.extend(vector_columns("g", n));
        let mut value = ResultTable::new(columns)
            .note("lambda", format!("{lambda:e}"))
            .note("lambda_index", index);
        for t in 0..=spec.horizon() {
            let row = std::iter::once(t as f64)
                .chain(flatten(&schedule.cost_to_go[t]))
                .chain(flatten(&schedule.cost_to_go_bar[t]))
                .chain(flatten_vec(&schedule.linear_term[t]))
                .collect();
            value.push(row)?;
        }
        written.push(value.write(out, &format!("value_lambda_{index}.csv"), &meta)?);
    }
    Ok(written)
}

/// Per λ: `simulate_lambda_<i>.csv` with mean and band of each energy series, `T + 1` rows.
pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let meta = metadata(config, "simulate");
    let x0 = config.initial_states()?;
    let mut written = Vec::new();
    for (index, &lambda) in config.lambda_grid.iter().enumerate() {
        let spec = config.spec_at(lambda)?;
        let schedule = solve_mean_field(&spec)?;
        let stats = ensemble(&spec, &schedule, &x0, ensemble_config(config))?;

        let mut columns = vec!["t".to_string()];
        columns.extend(band_columns(&SERIES));
        let mut table = ResultTable::new(columns)
            .note("lambda", format!("{lambda:e}"))
            .note("lambda_index", index)
            .note(
                "band",
                format!("{:e}..{:e}", config.tail, 1.0 - config.tail),
            );
        let bands = &stats.per_time;
        let undefined = [f64::NAN; 3];
        for t in 0..=spec.horizon() {
            let mut row = vec![t as f64];
            row.extend(band_cells(&bands.x_avg[t]));
            row.extend(band_cells(&bands.x_max[t]));
            row.extend(bands.u_avg.get(t).map_or(undefined, band_cells));
            row.extend(bands.u_max.get(t).map_or(undefined, band_cells));
            table.push(row)?;
        }
        written.push(table.write(out, &format!("simulate_lambda_{index}.csv"), &meta)?);
    }
    Ok(written)
}

/// `sweep.csv`: one row per λ with mean and band of the time-averaged series.
pub fn cmd_sweep(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if config.lambda_grid.len() < 2 {
        return Err(Error::Invalid(
            "sweep needs at least two lambda values".into(),
        ));
    }
    let meta = metadata(config, "sweep");
    let x0 = config.initial_states()?;
    let mut columns = vec!["lambda".to_string()];
    columns.extend(band_columns(&SERIES));
    let mut table = ResultTable::new(columns).note(
        "band",
        format!("{:e}..{:e}", config.tail, 1.0 - config.tail),
    );
    for &lambda in &config.lambda_grid {
        let spec = config.spec_at(lambda)?;
        let schedule = solve_mean_field(&spec)?;
        let stats = ensemble(&spec, &schedule, &x0, ensemble_config(config))?;
        let avg = &stats.time_average;
        let mut row = vec![lambda];
        for band in [&avg.x_avg, &avg.x_max, &avg.u_avg, &avg.u_max] {
            row.extend(band_cells(band));
        }
        table.push(row)?;
    }
    Ok(vec![table.write(out, "sweep.csv", &meta)?])
}

/// All verification checks at every λ of the grid.
pub fn cmd_verify(config: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let spec = &config.spec;
    let dense_dim = spec.n().max(spec.m()) * spec.k();
    if dense_dim > MAX_DENSE_DIM {
        return Err(Error::Invalid(format!(
            "verify runs a dense solver and needs max(n, m)·k ≤ {MAX_DENSE_DIM}, got {dense_dim}"
        )));
    }
    let x0 = config.initial_states()?;
    let mut results = Vec::new();
    for &lambda in &config.lambda_grid {
        let spec = config.spec_at(lambda)?;
        let schedule = solve_mean_field(&spec)?;
        let checks = [
            verify::equivalence_check(&spec, &schedule)?,
            verify::psd_check(&schedule),
            verify::pbd_check(&spec, &schedule)?,
            verify::predictive_variance_result(
                &spec,
                &schedule,
                &x0,
                config.verify_samples,
                config.base_seed,
            )?,
            verify::offset_result(
                &spec,
                &schedule,
                &x0,
                config.verify_samples,
                config.base_seed,
            )?,
        ];
        results.extend(checks.into_iter().map(|mut c| {
            c.name = format!("lambda={lambda:e} {}", c.name);
            c
        }));
    }
    Ok(results)
}

fn ensemble_config(config: &ExperimentConfig) -> EnsembleConfig {
    EnsembleConfig {
        n_runs: config.n_runs,
        base_seed: config.base_seed,
        tail: config.tail,
    }
}

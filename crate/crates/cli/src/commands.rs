use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use npiv_core::concentration::{
    default_block_length, ident_stat, rayleigh_brute_force, scaling_study, tail_check,
    ConcentrationReport, EnsembleSpec, GramEnsemble, TailCheck,
};
use npiv_core::dgp::{Dependence, NpivDgp};
use npiv_core::estimators::{unit_grid, FitMode, FitOptions, NpivSolver, Sample};
use npiv_core::experiments::presets::{acceptance_config, smoke_config};
use npiv_core::experiments::{
    heavy_tail_sweep, resize_basis, run_rate_study, variance_bias_split,
};
use npiv_core::numerics::Mat;
use npiv_core::{NpivError, Result};
use serde::{Deserialize, Serialize};

use crate::config::{
    at_field, missing, Column, ConcentrationSection, FitSection, IdentifiabilitySection,
    RatesSection, RunConfig, RunProfile, SimulateSection,
};
use crate::manifest::Outputs;

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn csv_bytes(header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.into_inner().map_err(|e| NpivError::Io(e.to_string()))
}

fn axis_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}_{i}")).collect()
}

fn read_sample(path: &Path, field: &str) -> Result<Sample> {
    let file = File::open(path)
        .map_err(|e| NpivError::Io(format!("{field} = {}: {e}", path.display())))?;
    Sample::read_csv(BufReader::new(file)).map_err(|e| match e {
        NpivError::Schema(msg) => NpivError::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn grid_rows(grid: &Mat) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..grid.rows()).map(|i| grid.row(i).to_vec())
}

pub fn fit(section: FitSection) -> Result<(RunConfig, Outputs)> {
    let input = section.input.clone().ok_or_else(|| missing("fit.input"))?;
    let mode = section.mode.ok_or_else(|| missing("fit.mode"))?;
    let b = section.b.clone().ok_or_else(|| missing("fit.b"))?;
    if section.grid_points == Some(0) {
        return Err(NpivError::Config("fit.grid_points: must be at least 1".into()));
    }
    let opts = FitOptions {
        orthonormalization: section.orthonormalization.unwrap_or_default(),
        ..FitOptions::default()
    };
    let sample = read_sample(&input, "fit.input")?;
    let solver = match mode {
        FitMode::Ls => {
            if section.psi.is_some() {
                return Err(NpivError::Config("fit.psi: least squares takes no psi basis".into()));
            }
            NpivSolver::least_squares(&sample, &b, &opts).map_err(|e| at_field("fit.b", e))?
        }
        FitMode::Npiv => {
            let psi = section.psi.clone().ok_or_else(|| missing("fit.psi"))?;
            NpivSolver::npiv(&sample, &psi, &b, &opts).map_err(|e| at_field("fit", e))?
        }
    };
    let solver = match section.smoothness {
        Some(p) => solver.with_smoothness(p),
        None => solver,
    };
    let fit = solver.fit(sample.y1())?;
    for w in &fit.diag.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = Outputs::default();
    out.add("fit.json", json_bytes(&fit.report())?);
    if let Some(g) = section.grid_points {
        let grid = unit_grid(fit.domain_dim(), g);
        let pred = fit.predict(&grid)?;
        let mut header = axis_header("y2", fit.domain_dim());
        header.push("h_hat".into());
        let rows = grid_rows(&grid).zip(pred).map(|(mut r, v)| {
            r.push(v);
            r
        });
        out.add("predictions.csv", csv_bytes(header, rows)?);
    }
    let resolved = FitSection {
        orthonormalization: Some(opts.orthonormalization),
        ..section
    };
    Ok((
        RunConfig {
            fit: Some(resolved),
            ..RunConfig::default()
        },
        out,
    ))
}

pub fn simulate(mut section: SimulateSection, seed: Option<u64>) -> Result<(RunConfig, Outputs)> {
    if let Some(s) = seed {
        section.base_seed = s;
    }
    if section.n == 0 {
        return Err(NpivError::Config("simulate.n: must be at least 1".into()));
    }
    if section.oracle_grid == Some(0) {
        return Err(NpivError::Config("simulate.oracle_grid: must be at least 1".into()));
    }
    let dgp = NpivDgp::new(section.dgp.clone()).map_err(|e| at_field("simulate.dgp", e))?;
    let sample = dgp.sample(section.n, section.base_seed)?;
    let mut out = Outputs::default();
    let mut buf = Vec::new();
    sample.write_csv(&mut buf)?;
    out.add("sample.csv", buf);
    if let Some(g) = section.oracle_grid {
        let grid = unit_grid(dgp.d(), g);
        let h = dgp.oracle_h(&grid)?;
        let th = dgp.oracle_th(&grid)?;
        let mut header = axis_header("t", dgp.d());
        header.extend(["h0".to_string(), "th0".to_string()]);
        let rows = grid_rows(&grid).enumerate().map(|(i, mut r)| {
            r.push(h[i]);
            r.push(th[i]);
            r
        });
        out.add("oracle.csv", csv_bytes(header, rows)?);
    }
    Ok((
        RunConfig {
            simulate: Some(section),
            ..RunConfig::default()
        },
        out,
    ))
}

pub fn rates(section: RatesSection, seed: Option<u64>) -> Result<(RunConfig, Outputs)> {
    let mut study = match (&section.study, section.preset) {
        (Some(_), Some(_)) => {
            return Err(NpivError::Config("rates: give either `preset` or `study`, not both".into()))
        }
        (None, None) => return Err(missing("rates.study")),
        (Some(study), None) => {
            if section.profile.is_some() {
                return Err(NpivError::Config("rates.profile: only meaningful with a preset".into()));
            }
            study.clone()
        }
        (None, Some(preset)) => {
            let base = section.base_seed.unwrap_or(0);
            match section.profile.unwrap_or(RunProfile::Smoke) {
                RunProfile::Smoke => smoke_config(preset, base),
                RunProfile::Acceptance => acceptance_config(preset, base),
            }
            .map_err(|e| at_field("rates.preset", e))?
        }
    };
    if let Some(s) = seed.or(section.base_seed) {
        study.base_seed = s;
    }
    study.validate().map_err(|e| at_field("rates.study", e))?;
    if section.heavy_tail_deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(NpivError::Config("rates.heavy_tail_deltas: entries must be positive".into()));
    }
    let table = run_rate_study(&study)?;
    let mut out = Outputs::default();
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    out.add("rates.csv", buf);
    out.add("rates.json", json_bytes(&table)?);
    if section.variance_bias {
        out.add("variance_bias.json", json_bytes(&variance_bias_split(&study)?)?);
    }
    if !section.heavy_tail_deltas.is_empty() {
        let sweep = heavy_tail_sweep(&study, &section.heavy_tail_deltas)
            .map_err(|e| at_field("rates.heavy_tail_deltas", e))?;
        out.add("heavy_tail.json", json_bytes(&sweep)?);
    }
    let resolved = RatesSection {
        preset: None,
        profile: None,
        base_seed: None,
        variance_bias: section.variance_bias,
        heavy_tail_deltas: section.heavy_tail_deltas,
        study: Some(study),
    };
    Ok((
        RunConfig {
            rates: Some(resolved),
            ..RunConfig::default()
        },
        out,
    ))
}

/// Machine-readable summary written by `concentration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSummary {
    pub reports: Vec<ConcentrationReport>,
    pub tail_checks: Vec<TailCheck>,
    pub total_violations: usize,
    /// Whether every dependent scaling study dominates the first i.i.d. one cell by cell.
    pub dependent_dominates_iid: Option<bool>,
}

pub fn concentration(mut section: ConcentrationSection, seed: Option<u64>) -> Result<(RunConfig, Outputs)> {
    if let Some(s) = seed {
        section.base_seed = s;
    }
    if section.scaling.is_empty() && section.tail.is_empty() {
        return Err(NpivError::Config("concentration: needs at least one `scaling` or `tail` block".into()));
    }
    for (i, t) in section.tail.iter_mut().enumerate() {
        let field = format!("concentration.tail[{i}]");
        if 2 * t.q.unwrap_or(1) > t.n {
            return Err(NpivError::Config(format!("{field}.q: block length exceeds n/2")));
        }
        t.q.get_or_insert(match t.dependence {
            Dependence::Iid => 1,
            Dependence::GaussianCopulaAr { .. } => default_block_length(t.n),
        });
    }
    let mut reports = Vec::with_capacity(section.scaling.len());
    for (i, block) in section.scaling.iter().enumerate() {
        let field = format!("concentration.scaling[{i}]");
        let n0 = block.n_grid.first().copied().ok_or_else(|| missing(&format!("{field}.n_grid")))?;
        let spec = EnsembleSpec::gram_deviation(section.basis.clone(), n0, block.dependence)
            .map_err(|e| at_field(&field, e))?;
        let report = scaling_study(&spec, &block.n_grid, &block.k_grid, block.reps, section.base_seed)
            .map_err(|e| at_field(&field, e))?;
        reports.push(report);
    }
    let mut checks = Vec::with_capacity(section.tail.len());
    for (i, t) in section.tail.iter().enumerate() {
        let field = format!("concentration.tail[{i}]");
        let basis = resize_basis(&section.basis, t.k).map_err(|e| at_field(&format!("{field}.k"), e))?;
        let spec = EnsembleSpec::gram_deviation(basis, t.n, t.dependence).map_err(|e| at_field(&field, e))?;
        let ensemble = GramEnsemble::new(spec).map_err(|e| at_field(&field, e))?;
        let q = t.q.unwrap_or(1);
        checks.push(
            tail_check(&ensemble, t.reps, section.base_seed, t.grid_points, q)
                .map_err(|e| at_field(&field, e))?,
        );
    }
    let iid = reports.iter().find(|r| r.dependence == Dependence::Iid);
    let dependent: Vec<&ConcentrationReport> =
        reports.iter().filter(|r| r.dependence != Dependence::Iid).collect();
    let dominance = match (iid, dependent.is_empty()) {
        (Some(base), false) => Some(dependent.iter().all(|r| r.dominates(base))),
        _ => None,
    };
    let summary = ConcentrationSummary {
        total_violations: checks.iter().map(|c| c.violations).sum(),
        reports,
        tail_checks: checks,
        dependent_dominates_iid: dominance,
    };
    let mut out = Outputs::default();
    for (i, r) in summary.reports.iter().enumerate() {
        let mut buf = Vec::new();
        r.write_csv(&mut buf)?;
        out.add(&format!("scaling_{i}.csv"), buf);
    }
    out.add("concentration.json", json_bytes(&summary)?);
    Ok((
        RunConfig {
            concentration: Some(section),
            ..RunConfig::default()
        },
        out,
    ))
}

/// Summary written by `identifiability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub n: usize,
    pub k: usize,
    pub basis: String,
    /// `‖B̃'B̃/n − I‖` with `B̃` orthonormalized under the uniform measure.
    pub ident_stat: f64,
    pub rayleigh_random_max: f64,
    pub rayleigh_eigvec_max: f64,
    pub rayleigh_gap: f64,
    pub zeta0: f64,
    /// `ζ₀·sqrt(ln K / n)`.
    pub envelope: f64,
}

pub fn identifiability(mut section: IdentifiabilitySection, seed: Option<u64>) -> Result<(RunConfig, Outputs)> {
    if let Some(s) = seed {
        section.base_seed = s;
    }
    let regressors = match (&section.input, section.n) {
        (Some(_), Some(_)) => {
            return Err(NpivError::Config("identifiability: give either `input` or `n`, not both".into()))
        }
        (None, None) => return Err(missing("identifiability.n")),
        (Some(path), None) => {
            let sample = read_sample(path, "identifiability.input")?;
            match section.column {
                Column::X => sample.x().clone(),
                Column::Y2 => sample.y2().clone(),
            }
        }
        (None, Some(_)) => Mat::zeros(0, 0),
    };
    let n = section.n.unwrap_or(regressors.rows());
    let spec = EnsembleSpec::gram_deviation(section.basis.clone(), n.max(1), section.dependence)
        .map_err(|e| at_field("identifiability", e))?;
    let ensemble = GramEnsemble::new(spec).map_err(|e| at_field("identifiability.basis", e))?;
    let x = if section.input.is_some() {
        if regressors.cols() != section.basis.domain_dim() {
            return Err(NpivError::Schema(format!(
                "identifiability.basis: has dimension {}, data column has {}",
                section.basis.domain_dim(),
                regressors.cols()
            )));
        }
        regressors
    } else {
        ensemble.draw_regressors(section.base_seed)?
    };
    let stat = ident_stat(&x, ensemble.handle())?;
    let (random_max, eig_max) =
        rayleigh_brute_force(&x, ensemble.handle(), section.rayleigh_vectors, section.base_seed)?;
    let k = section.basis.dim();
    let report = IdentifiabilityReport {
        n,
        k,
        basis: section.basis.to_string(),
        ident_stat: stat,
        rayleigh_random_max: random_max,
        rayleigh_eigvec_max: eig_max,
        rayleigh_gap: (stat - random_max.max(eig_max)).abs(),
        zeta0: ensemble.zeta0(),
        envelope: ensemble.zeta0() * ((k as f64).ln().max(0.0) / n as f64).sqrt(),
    };
    let mut out = Outputs::default();
    out.add("identifiability.json", json_bytes(&report)?);
    Ok((
        RunConfig {
            identifiability: Some(section),
            ..RunConfig::default()
        },
        out,
    ))
}

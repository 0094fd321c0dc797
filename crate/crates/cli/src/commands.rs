//! `limit-cycle`, `floquet`, `msf` and `simulate`.

use std::collections::BTreeMap;
use std::path::Path;

use floqnet::floquet::{ajl_determinant, monodromy};
use floqnet::limit_cycle::{find_limit_cycle_with, CycleOptions, LimitCycle};
use floqnet::models::OscillatorModel;
use floqnet::msf::{msf_sweep, sync_predicate, SyncVerdict};
use floqnet::network::simulate_network_with;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{
    csv, emit, msf_plot_script, plot_script_path, sidecar, simulate_plot_script, write_atomic,
    write_json,
};
use crate::CliError;

/// Error threshold at `t_end` for calling a run synchronized.
pub const CONVERGED_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Serialize)]
struct CycleSummary<'a> {
    model: &'a str,
    params: &'a BTreeMap<String, f64>,
    period: f64,
    anchor: &'a [f64],
    closure_residual: f64,
    section_coordinate: usize,
    section_level: f64,
    samples: usize,
}

fn cycle_summary<'a>(model: &'a OscillatorModel, lc: &'a LimitCycle) -> CycleSummary<'a> {
    CycleSummary {
        model: model.name(),
        params: model.params(),
        period: lc.period,
        anchor: &lc.anchor,
        closure_residual: lc.closure_residual,
        section_coordinate: lc.section_coordinate,
        section_level: lc.section_level,
        samples: lc.samples.len(),
    }
}

pub fn compute_cycle(
    cfg: &ExperimentConfig,
    model: &OscillatorModel,
    samples: usize,
) -> Result<LimitCycle, CliError> {
    cycle_from(cfg, model, &cfg.single_initial(model)?, samples)
}

fn cycle_from(
    cfg: &ExperimentConfig,
    model: &OscillatorModel,
    x0: &[f64],
    samples: usize,
) -> Result<LimitCycle, CliError> {
    let integrator = cfg.integrator()?;
    if samples < 2 {
        return Err(CliError::Config("--samples: must be at least 2".into()));
    }
    let opts = CycleOptions {
        samples,
        ..CycleOptions::default()
    };
    Ok(find_limit_cycle_with(model, x0, &integrator, &opts)?)
}

fn state_header(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("{prefix}{j}")).collect()
}

pub fn limit_cycle(
    cfg: &ExperimentConfig,
    samples: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let lc = compute_cycle(cfg, &model, samples)?;
    let summary = cycle_summary(&model, &lc);
    if let Some(path) = out {
        let mut header = vec!["t".to_string()];
        header.extend(state_header("x", model.dim()));
        let rows = lc
            .sample_times()
            .into_iter()
            .zip(&lc.samples)
            .map(|(t, x)| {
                let mut row = vec![t];
                row.extend_from_slice(x);
                row
            });
        write_atomic(path, csv(&header, rows).as_bytes())?;
        write_json(&sidecar(path), &summary)?;
    }
    print_json(&summary)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    emit(&format!("{text}\n"))
}

#[derive(Debug, Serialize)]
struct LfSummary {
    periodicity_residual: f64,
    exp_residual: f64,
    /// Row-major real parts of R.
    r_real: Vec<Vec<f64>>,
    r_max_imag: f64,
}

#[derive(Debug, Serialize)]
struct FloquetSummary<'a> {
    model: &'a str,
    params: &'a BTreeMap<String, f64>,
    period: f64,
    kappa: f64,
    mask: Vec<f64>,
    multipliers: Vec<ComplexValue>,
    moduli: Vec<f64>,
    exponents: Vec<ComplexValue>,
    log_moduli: Vec<f64>,
    determinant: f64,
    log_determinant: f64,
    ajl_rhs: f64,
    ajl_relative_error: f64,
    closure_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyapunov_floquet: Option<LfSummary>,
}

pub fn floquet(
    cfg: &ExperimentConfig,
    kappa: f64,
    mask: Option<Vec<f64>>,
    lf: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let mask = mask.unwrap_or_else(|| cfg.mask(&model));
    if mask.len() != model.dim() {
        return Err(CliError::Config(format!(
            "mask: has {} entries, model {} has dimension {}",
            mask.len(),
            model.name(),
            model.dim()
        )));
    }
    if !kappa.is_finite() {
        return Err(CliError::Config("kappa: must be finite".into()));
    }
    let lc = compute_cycle(cfg, &model, CycleOptions::default().samples)?;
    let mono = monodromy(&model, &lc, kappa, &mask)?;
    let ajl = ajl_determinant(&model, &lc, kappa, &mask, lc.period)?;
    let lyapunov_floquet = if lf {
        let d = mono.lf_decomposition()?;
        let n = d.r.rows();
        let r_real = (0..n)
            .map(|i| (0..n).map(|j| d.r[(i, j)].re).collect())
            .collect();
        let r_max_imag =
            d.r.as_slice()
                .iter()
                .map(|z| z.im.abs())
                .fold(0.0, f64::max);
        Some(LfSummary {
            periodicity_residual: d.periodicity_residual,
            exp_residual: d.exp_residual,
            r_real,
            r_max_imag,
        })
    } else {
        None
    };
    let values = mono.multipliers.values();
    let summary = FloquetSummary {
        model: model.name(),
        params: model.params(),
        period: lc.period,
        kappa,
        mask: mask.clone(),
        multipliers: values
            .iter()
            .map(|z| ComplexValue { re: z.re, im: z.im })
            .collect(),
        moduli: values.iter().map(|z| z.norm()).collect(),
        exponents: mono
            .exponents
            .iter()
            .map(|z| ComplexValue { re: z.re, im: z.im })
            .collect(),
        log_moduli: mono.log_moduli.clone(),
        determinant: mono.determinant,
        log_determinant: mono.log_determinant,
        ajl_rhs: ajl.rhs,
        ajl_relative_error: ajl.relative_error(),
        closure_drift: mono.closure_drift,
        lyapunov_floquet,
    };
    if let Some(path) = out {
        let header: Vec<String> = [
            "index",
            "re",
            "im",
            "modulus",
            "log_modulus",
            "exponent_re",
            "exponent_im",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let rows = values.iter().enumerate().map(|(i, z)| {
            vec![
                (i + 1) as f64,
                z.re,
                z.im,
                z.norm(),
                mono.log_moduli[i],
                mono.exponents[i].re,
                mono.exponents[i].im,
            ]
        });
        write_atomic(path, csv(&header, rows).as_bytes())?;
        write_json(&sidecar(path), &summary)?;
    }
    print_json(&summary)
}

#[derive(Debug, Serialize)]
struct MsfSummary<'a> {
    model: &'a str,
    params: &'a BTreeMap<String, f64>,
    mask: &'a [f64],
    period: f64,
    points: usize,
    kappa_min: f64,
    kappa_max: f64,
    min_mu_max: f64,
    kappa_at_min: f64,
    max_mu_max_positive_kappa: f64,
    all_stable_for_positive_kappa: bool,
}

pub fn msf(cfg: &ExperimentConfig, out: &Path, plot: bool) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let mask = cfg.mask(&model);
    // Reuse the coupling validation for the mask itself.
    cfg.build_coupling(&model)?;
    let grid = cfg.kappa_grid()?;
    let lc = compute_cycle(cfg, &model, CycleOptions::default().samples)?;
    let curve = msf_sweep(&model, &lc, &mask, &grid)?;
    let width = curve
        .points
        .iter()
        .map(|p| p.multipliers.len())
        .max()
        .unwrap_or(0);
    let mut header = vec!["kappa".to_string(), "mu_max".to_string()];
    for j in 1..=width {
        header.push(format!("mult_{j}_re"));
        header.push(format!("mult_{j}_im"));
    }
    let rows = curve.points.iter().map(|p| {
        let mut row = vec![p.kappa, p.mu_max];
        for z in &p.multipliers {
            row.push(z.re);
            row.push(z.im);
        }
        row
    });
    write_atomic(out, csv(&header, rows).as_bytes())?;
    let (kappa_at_min, min_mu_max) =
        curve
            .points
            .iter()
            .map(|p| (p.kappa, p.mu_max))
            .fold(
                (f64::NAN, f64::INFINITY),
                |a, b| if b.1 < a.1 { b } else { a },
            );
    let positive: Vec<f64> = curve
        .points
        .iter()
        .filter(|p| p.kappa > 0.0)
        .map(|p| p.mu_max)
        .collect();
    let max_positive = positive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = MsfSummary {
        model: model.name(),
        params: model.params(),
        mask: &mask,
        period: lc.period,
        points: curve.points.len(),
        kappa_min: grid[0],
        kappa_max: grid[grid.len() - 1],
        min_mu_max,
        kappa_at_min,
        max_mu_max_positive_kappa: max_positive,
        all_stable_for_positive_kappa: positive.iter().all(|&m| m < 1.0),
    };
    write_json(&sidecar(out), &summary)?;
    if plot {
        let title = format!(
            "Master stability function, {} mask {:?}",
            model.name(),
            mask
        );
        write_atomic(
            &plot_script_path(out),
            msf_plot_script(out, &title).as_bytes(),
        )?;
    }
    print_json(&summary)
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    model: &'a str,
    params: &'a BTreeMap<String, f64>,
    nodes: usize,
    laplacian_eigenvalues: &'a [f64],
    coupling_k: f64,
    mask: &'a [f64],
    activation_time: f64,
    t_end: f64,
    output_grid_points: usize,
    integrator_steps: usize,
    final_error: f64,
    max_error_after_activation: f64,
    converged_threshold: f64,
    converged: bool,
    converged_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<SyncVerdict>,
}

pub fn simulate(
    cfg: &ExperimentConfig,
    out: &Path,
    plot: bool,
    predict: bool,
) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let graph = cfg.build_graph()?;
    let coupling = cfg.build_coupling(&model)?;
    let integrator = cfg.integrator()?;
    cfg.validate_run()?;
    let x0 = cfg.network_initial(&model, &graph)?;
    let prediction = if predict {
        // `initial` holds the network state here, so the cycle starts from
        // the model default.
        let lc = cycle_from(
            cfg,
            &model,
            model.default_initial(),
            CycleOptions::default().samples,
        )?;
        Some(sync_predicate(
            &model,
            &lc,
            &graph,
            coupling.k,
            &coupling.mask,
        )?)
    } else {
        None
    };
    let run = simulate_network_with(
        &model,
        &graph,
        &coupling,
        &x0,
        cfg.run.t_end,
        &integrator,
        cfg.run.output_grid_points,
    )?;
    let (n, m) = (graph.n, model.dim());
    let mut header = vec!["t".to_string(), "sync_error".to_string()];
    for i in 1..=n {
        header.extend(state_header(&format!("x{i}_"), m));
    }
    let rows = run
        .sync
        .times
        .iter()
        .zip(&run.sync.error)
        .zip(&run.grid_states)
        .map(|((t, e), x)| {
            let mut row = vec![*t, *e];
            row.extend_from_slice(x);
            row
        });
    write_atomic(out, csv(&header, rows).as_bytes())?;
    let final_error = run.sync.final_error();
    let summary = SimulateSummary {
        model: model.name(),
        params: model.params(),
        nodes: n,
        laplacian_eigenvalues: &graph.eigenvalues,
        coupling_k: coupling.k,
        mask: &coupling.mask,
        activation_time: coupling.activation_time,
        t_end: cfg.run.t_end,
        output_grid_points: cfg.run.output_grid_points,
        integrator_steps: run.trajectory.len() - 1,
        final_error,
        max_error_after_activation: run.sync.max_after(coupling.activation_time),
        converged_threshold: CONVERGED_THRESHOLD,
        converged: final_error < CONVERGED_THRESHOLD,
        converged_at: run.sync.converged_at(CONVERGED_THRESHOLD),
        prediction,
    };
    write_json(&sidecar(out), &summary)?;
    if plot {
        let script = simulate_plot_script(out, n, m, coupling.activation_time);
        write_atomic(&plot_script_path(out), script.as_bytes())?;
    }
    print_json(&summary)
}

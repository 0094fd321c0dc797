//! Invariant checks run by `floqnet verify`.

use std::fmt::Write as _;

use floqnet::floquet::{
    ajl_determinant, lf_decomposition, monodromy, shifted_multipliers_fullstate,
};
use floqnet::limit_cycle::{find_limit_cycle, LimitCycle};
use floqnet::linalg::{eigenvalues, Matrix};
use floqnet::models::{repressilator_model, vdp_model, OscillatorModel};
use floqnet::msf::sync_predicate;
use floqnet::network::{complete_graph, ring_graph, simulate_network, CouplingSpec, GraphSpec};
use floqnet::ode::IntegratorConfig;
use floqnet::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::CONVERGED_THRESHOLD;
use crate::config::ExperimentConfig;
use crate::CliError;

const ACTIVATION: f64 = 20.0;
const AGREEMENT_T_END: f64 = 200.0;
const NECESSITY_T_END: f64 = 100.0;
const NECESSITY_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub quick: bool,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    /// Negates the coupling inside the variational integrations. Used to
    /// confirm the shift-law check can fail.
    pub flip_coupling_sign: bool,
    pub config: Option<ExperimentConfig>,
}

struct Target {
    model: OscillatorModel,
    partial: Vec<f64>,
    graphs: Vec<GraphSpec>,
}

fn odd_mask(dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| if i % 2 == 1 { 1.0 } else { 0.0 })
        .collect()
}

fn targets(opts: &VerifyOptions) -> Result<Vec<Target>, CliError> {
    let default_graphs = || -> Vec<GraphSpec> {
        let mut g = vec![complete_graph(3).expect("n = 3 is valid")];
        if !opts.quick {
            g.push(ring_graph(4).expect("n = 4 is valid"));
        }
        g
    };
    if let Some(cfg) = &opts.config {
        let model = cfg.build_model()?;
        let mask = cfg.mask(&model);
        cfg.build_coupling(&model)?;
        let partial = if mask.iter().all(|&d| d == 1.0) {
            odd_mask(model.dim())
        } else {
            mask
        };
        return Ok(vec![Target {
            model,
            partial,
            graphs: vec![cfg.build_graph()?],
        }]);
    }
    let mut models = vec![vdp_model(1.0)?];
    if !opts.quick {
        models.push(repressilator_model(1000.0, 1.0, 5.0, 2.0)?);
    }
    Ok(models
        .into_iter()
        .map(|model| Target {
            partial: odd_mask(model.dim()),
            model,
            graphs: default_graphs(),
        })
        .collect())
}

fn check(name: String, value: f64, limit: f64, detail: String) -> Check {
    Check {
        name,
        passed: value < limit,
        value,
        limit,
        detail,
    }
}

fn nearest_relative_error(actual: &[Complex64], predicted: &[Complex64]) -> f64 {
    predicted
        .iter()
        .map(|p| {
            let d = actual
                .iter()
                .map(|a| (a - p).norm())
                .fold(f64::INFINITY, f64::min);
            d / p.norm()
        })
        .fold(0.0, f64::max)
}

pub fn run(opts: &VerifyOptions) -> Result<Report, CliError> {
    let integrator = match &opts.config {
        Some(cfg) => cfg.integrator()?,
        None => IntegratorConfig::default(),
    };
    let seed = opts.config.as_ref().map_or(0, |c| c.seed);
    let targets = targets(opts)?;
    let sign = if opts.flip_coupling_sign { -1.0 } else { 1.0 };
    let kappas: &[f64] = if opts.quick {
        &[0.5, 1.0]
    } else {
        &[0.25, 0.5, 1.0, 2.0]
    };
    let gains: &[f64] = if opts.quick { &[1.0] } else { &[0.5, 1.0, 2.0] };
    let mut checks = Vec::new();
    for t in &targets {
        let model = &t.model;
        let name = model.name();
        let full = vec![1.0; model.dim()];
        let lc = find_limit_cycle(model, model.default_initial(), &integrator)?;

        let base = monodromy(model, &lc, 0.0, &full)?;
        let mut worst: f64 = 0.0;
        for &kappa in kappas {
            let coupled = monodromy(model, &lc, sign * kappa, &full)?;
            let predicted = shifted_multipliers_fullstate(&base, kappa, lc.period);
            worst = worst.max(nearest_relative_error(
                coupled.multipliers.values(),
                &predicted,
            ));
        }
        checks.push(check(
            format!("shift_law:{name}"),
            worst,
            1e-6,
            format!("multipliers at kappa {kappas:?} vs uncoupled x exp(-kappa T)"),
        ));

        let mut worst: f64 = 0.0;
        for &kappa in &[0.0, 0.5, 1.0, 2.0] {
            for mask in [&full, &t.partial] {
                let c = ajl_determinant(model, &lc, sign * kappa, mask, lc.period)?;
                // The right-hand side must use the nominal coupling.
                let expected =
                    c.log_rhs + (sign - 1.0) * kappa * mask.iter().sum::<f64>() * lc.period;
                worst = worst.max((c.log_det_phi - expected).exp_m1().abs());
            }
        }
        checks.push(check(
            format!("ajl:{name}"),
            worst,
            1e-6,
            format!("|det phi(T) - rhs| / rhs, masks full and {:?}", t.partial),
        ));

        let lf = lf_decomposition(model, &lc)?;
        checks.push(check(
            format!("lf_periodicity:{name}"),
            lf.periodicity_residual,
            1e-4,
            format!(
                "|P(T) - P(0)| / |P(0)|, exp residual {:.2e}",
                lf.exp_residual
            ),
        ));

        checks.push(agreement(t, &lc, gains, &integrator)?);
        if model.name() == "vdp" || opts.config.is_some() {
            checks.push(necessity(model, &lc, &base, &integrator)?);
        }
    }
    checks.push(eigen_oracle(seed, if opts.quick { 20 } else { 100 })?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(Report {
        quick: opts.quick,
        seed,
        passed,
        checks,
    })
}

/// Nodes start on the cycle a small phase apart.
fn phase_offsets(lc: &LimitCycle, n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|i| lc.eval(i as f64 * lc.period / (4.0 * n as f64)))
        .collect()
}

fn agreement(
    t: &Target,
    lc: &LimitCycle,
    gains: &[f64],
    integrator: &IntegratorConfig,
) -> Result<Check, CliError> {
    let model = &t.model;
    let full = vec![1.0; model.dim()];
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for graph in &t.graphs {
        let x0 = phase_offsets(lc, graph.n);
        for mask in [&full, &t.partial] {
            for &k in gains {
                let verdict = sync_predicate(model, lc, graph, k, mask)?;
                let coupling = CouplingSpec::new(k, mask.clone(), ACTIVATION);
                let converged = match simulate_network(
                    model,
                    graph,
                    &coupling,
                    &x0,
                    AGREEMENT_T_END,
                    integrator,
                ) {
                    Ok(run) => run.sync.final_error() < CONVERGED_THRESHOLD,
                    Err(Error::Blowup { .. }) => false,
                    Err(e) => return Err(e.into()),
                };
                cases += 1;
                if converged != verdict.synchronizes {
                    mismatches.push(format!(
                        "n={} K={k} mask={mask:?}: predicted {}, simulated {converged}",
                        graph.n, verdict.synchronizes
                    ));
                }
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{cases} cases, MSF verdict matches e(t_end) < {CONVERGED_THRESHOLD}")
    } else {
        mismatches.join("; ")
    };
    Ok(check(
        format!("agreement:{}", model.name()),
        mismatches.len() as f64,
        0.5,
        detail,
    ))
}

fn necessity(
    model: &OscillatorModel,
    lc: &LimitCycle,
    base: &floqnet::floquet::Monodromy,
    integrator: &IntegratorConfig,
) -> Result<Check, CliError> {
    let graph = complete_graph(3)?;
    let full = vec![1.0; model.dim()];
    let x0 = phase_offsets(lc, graph.n);
    let base_max = base.multipliers.max_modulus();
    let mut failures = 0usize;
    let mut notes = Vec::new();
    for k in [-0.1, -0.5] {
        let coupling = CouplingSpec::new(k, full.clone(), ACTIVATION);
        let outcome =
            match simulate_network(model, &graph, &coupling, &x0, NECESSITY_T_END, integrator) {
                Ok(run) => {
                    let floor = run.sync.min_after(ACTIVATION + 20.0);
                    failures += usize::from(!(floor > NECESSITY_FLOOR));
                    format!("min e = {floor:.3}")
                }
                Err(Error::Blowup { t }) => format!("blowup at t = {t:.2}"),
                Err(e) => return Err(e.into()),
            };
        let verdict = sync_predicate(model, lc, &graph, k, &full)?;
        failures += usize::from(verdict.synchronizes);
        for mode in verdict.per_mode.iter().filter(|m| m.in_verdict) {
            let predicted = (-k * mode.lambda * lc.period).exp() * base_max;
            let rel = (mode.mu_max - predicted).abs() / predicted;
            failures += usize::from(!(rel < 1e-6 && mode.mu_max > 1.0));
        }
        notes.push(format!("K={k}: {outcome}"));
    }
    Ok(check(
        format!("necessity:{}", model.name()),
        failures as f64,
        0.5,
        notes.join(", "),
    ))
}

fn eigen_oracle(seed: u64, count: usize) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for n in 3..=5 {
        let g = complete_graph(n)?;
        let spectrum = eigenvalues(&g.laplacian)?;
        for (i, z) in spectrum.iter().enumerate() {
            let expected = if i + 1 < n { n as f64 } else { 0.0 };
            worst = worst.max((z.re - expected).abs() + z.im.abs());
        }
    }
    let lap = worst;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det_worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.gen_range(2..=8);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = Matrix::from_real(n, n, &data)?;
        let det = m.determinant();
        let prod = eigenvalues(&m)?.product();
        det_worst = det_worst.max((prod - det).norm() / det.norm());
    }
    let passed = lap < 1e-10 && det_worst < 1e-8;
    Ok(Check {
        name: "eigen_oracle".into(),
        passed,
        value: det_worst,
        limit: 1e-8,
        detail: format!(
            "{count} seeded matrices; complete-graph Laplacian spectra error {lap:.1e}"
        ),
    })
}

pub fn text_table(report: &Report) -> String {
    let width = report
        .checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:<6}  {:>10}  {:>8}  detail",
        "check", "status", "value", "limit"
    );
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{:<width$}  {:<6}  {:>10.3e}  {:>8.1e}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.value,
            c.limit,
            c.detail
        );
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(
        s,
        "{} of {} checks passed",
        report.checks.len() - failed,
        report.checks.len()
    );
    s
}

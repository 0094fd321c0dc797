use std::process::ExitCode;
use std::time::{Duration, Instant};

use floqnet::floquet::{
    ajl_determinant, lf_decomposition, monodromy, shifted_multipliers_fullstate, UNITY_TOL,
};
use floqnet::limit_cycle::{find_limit_cycle, LimitCycle};
use floqnet::linalg::{eigenvalues, Matrix};
use floqnet::models::{repressilator_model, vdp_model, OscillatorModel};
use floqnet::msf::{msf_sweep, sync_predicate};
use floqnet::network::{complete_graph, ring_graph, simulate_network, CouplingSpec, GraphSpec};
use floqnet::ode::IntegratorConfig;
use floqnet::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn vdp() -> OscillatorModel {
    vdp_model(1.0).unwrap()
}

fn repressilator() -> OscillatorModel {
    repressilator_model(1000.0, 1.0, 5.0, 2.0).unwrap()
}

fn cycle(model: &OscillatorModel) -> Result<LimitCycle, String> {
    find_limit_cycle(model, model.default_initial(), &IntegratorConfig::default())
        .map_err(|e| e.to_string())
}

fn partial_mask(dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| if i % 2 == 1 { 1.0 } else { 0.0 })
        .collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Classical RK4 at a fixed small step, crossings located by bisection on
// a restarted sub-step. Shares nothing with the adaptive integrator.
fn rk4_vdp_period(mu: f64) -> f64 {
    let f = |x: [f64; 2]| [x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]];
    let step = |x: [f64; 2], h: f64| {
        let k1 = f(x);
        let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
        let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
        [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    let h = 1e-3;
    let mut x = [2.0, 0.0];
    let mut t = 0.0;
    let mut crossings = Vec::new();
    while crossings.len() < 12 {
        let next = step(x, h);
        if t > 60.0 && x[0] < 0.0 && next[0] >= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if step(x, mid)[0] < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(t + 0.5 * (lo + hi));
        }
        x = next;
        t += h;
    }
    (crossings[crossings.len() - 1] - crossings[1]) / (crossings.len() - 2) as f64
}

fn c1_limit_cycle() -> Outcome {
    let start = Instant::now();
    let lc = cycle(&vdp())?;
    let elapsed = start.elapsed();
    let reference = rk4_vdp_period(1.0);
    let rel = (lc.period - reference).abs() / reference;
    check(
        rel < 1e-3 && elapsed < Duration::from_secs(1),
        format!(
            "T = {:.10}, reference {:.10}, rel err {rel:.2e}, cycle search {elapsed:.2?}",
            lc.period, reference
        ),
    )
}

fn c2_uncoupled_structure() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for model in [vdp(), repressilator()] {
        let lc = cycle(&model)?;
        let mono =
            monodromy(&model, &lc, 0.0, &vec![1.0; model.dim()]).map_err(|e| e.to_string())?;
        let unity = mono
            .multipliers
            .iter()
            .filter(|z| (*z - 1.0).norm() < UNITY_TOL)
            .count();
        let others_max = mono
            .multipliers
            .iter()
            .filter(|z| (*z - 1.0).norm() >= UNITY_TOL)
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        ok &= unity == 1 && others_max < 1.0;
        notes.push(format!(
            "{}: {unity} unity, max other {others_max:.3e}",
            model.name()
        ));
    }
    check(ok, notes.join("; "))
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

fn c3_shift_law() -> Outcome {
    let mut worst: f64 = 0.0;
    for model in [vdp(), repressilator()] {
        let lc = cycle(&model)?;
        let full = vec![1.0; model.dim()];
        let base = monodromy(&model, &lc, 0.0, &full).map_err(|e| e.to_string())?;
        for kappa in [0.25, 0.5, 1.0, 2.0] {
            let coupled = monodromy(&model, &lc, kappa, &full).map_err(|e| e.to_string())?;
            let predicted = shifted_multipliers_fullstate(&base, kappa, lc.period);
            worst = worst.max(nearest_relative_error(
                coupled.multipliers.values(),
                &predicted,
            ));
        }
    }
    check(worst < 1e-6, format!("max relative deviation {worst:.2e}"))
}

fn c4_ajl() -> Outcome {
    let mut worst: f64 = 0.0;
    for model in [vdp(), repressilator()] {
        let lc = cycle(&model)?;
        for mask in [vec![1.0; model.dim()], partial_mask(model.dim())] {
            for kappa in [0.0, 1.0, 2.0] {
                let c = ajl_determinant(&model, &lc, kappa, &mask, lc.period)
                    .map_err(|e| e.to_string())?;
                worst = worst.max(c.relative_error());
            }
        }
    }
    check(worst < 1e-6, format!("max |det - rhs| / rhs = {worst:.2e}"))
}

fn c5_msf_curve() -> Outcome {
    let model = vdp();
    let lc = cycle(&model)?;
    let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 10.0).collect();
    let curve = msf_sweep(&model, &lc, &[0.0, 1.0], &grid).map_err(|e| e.to_string())?;
    let mu: Vec<f64> = curve.points.iter().map(|p| p.mu_max).collect();
    let below_one = mu.iter().all(|&m| m < 1.0);
    let first_rise = mu.windows(2).position(|w| w[1] >= w[0]);
    let (argmin, min) =
        mu.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc },
        );
    let shape =
        format!(
        "mu_max(0.1) = {:.4}, min {:.3e} at kappa {:.1}, mu_max(5) = {:.4}, all < 1: {below_one}",
        mu[0], min, grid[argmin], mu[mu.len() - 1]
    );
    match first_rise {
        None => check(below_one, format!("strictly decreasing; {shape}")),
        Some(i) => Err(format!(
            "not strictly decreasing: mu_max({:.1}) = {:.4e} >= mu_max({:.1}) = {:.4e}; {shape}",
            grid[i + 1],
            mu[i + 1],
            grid[i],
            mu[i]
        )),
    }
}

fn run_network(
    model: &OscillatorModel,
    graph: &GraphSpec,
    k: f64,
    mask: &[f64],
    x0: &[f64],
    t_end: f64,
) -> floqnet::Result<floqnet::network::NetworkRun> {
    let coupling = CouplingSpec::new(k, mask.to_vec(), 20.0);
    simulate_network(
        model,
        graph,
        &coupling,
        x0,
        t_end,
        &IntegratorConfig::default(),
    )
}

fn c6_vdp_network() -> Outcome {
    let model = vdp();
    let graph = complete_graph(3).unwrap();
    let x0 = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, mask) in [("full", [1.0, 1.0]), ("partial", [0.0, 1.0])] {
        let run = run_network(&model, &graph, 1.0, &mask, &x0, 100.0).map_err(|e| e.to_string())?;
        let tail = run.sync.max_after(60.0);
        ok &= tail < 1e-3;
        notes.push(format!("{name}: max e(t >= 60) = {tail:.2e}"));
    }
    check(ok, notes.join("; "))
}

fn value_at(series: &floqnet::network::SyncSeries, t: f64) -> f64 {
    let i = series
        .times
        .iter()
        .position(|&s| s >= t)
        .unwrap_or(series.times.len() - 1);
    series.error[i]
}

fn c7_repressilator_network() -> Outcome {
    let model = repressilator();
    let graph = complete_graph(3).unwrap();
    let x0 = [
        0.0, 1.0, 0.0, 3.0, 0.0, 5.0, 0.0, 7.0, 0.0, 9.0, 0.0, 11.0, 0.0, 13.0, 15.0, 17.0, 4.0,
        6.0,
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, mask) in [("full", vec![1.0; 6]), ("partial", partial_mask(6))] {
        let run = run_network(&model, &graph, 1.0, &mask, &x0, 100.0).map_err(|e| e.to_string())?;
        let at_on = value_at(&run.sync, 20.0);
        let early = run.sync.max_after(20.0);
        let late = run.sync.max_after(60.0);
        let end = run.sync.final_error();
        ok &= end < 1e-2 && late < early && end < at_on;
        notes.push(format!(
            "{name}: e(20) = {at_on:.2e}, max e(t >= 60) = {late:.2e}, e(100) = {end:.2e}"
        ));
    }
    check(ok, notes.join("; "))
}

fn c8_necessity() -> Outcome {
    let model = vdp();
    let lc = cycle(&model)?;
    let graph = complete_graph(3).unwrap();
    let full = [1.0, 1.0];
    let base = monodromy(&model, &lc, 0.0, &full).map_err(|e| e.to_string())?;
    let base_max = base.multipliers.max_modulus();
    let x0 = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let mut notes = Vec::new();
    let mut ok = true;
    for k in [-0.1, -0.5] {
        let sim = match run_network(&model, &graph, k, &full, &x0, 100.0) {
            Ok(run) => {
                let floor = run.sync.min_after(40.0);
                ok &= floor > 0.1;
                format!("min e(t >= 40) = {floor:.3}")
            }
            Err(Error::Blowup { t }) => format!("blowup at t = {t:.2}"),
            Err(e) => return Err(format!("K = {k}: unexpected failure {e}")),
        };
        let verdict = sync_predicate(&model, &lc, &graph, k, &full).map_err(|e| e.to_string())?;
        ok &= !verdict.synchronizes;
        let mut worst: f64 = 0.0;
        for mode in verdict.per_mode.iter().filter(|m| m.in_verdict) {
            let predicted = (-k * mode.lambda * lc.period).exp() * base_max;
            worst = worst.max((mode.mu_max - predicted).abs() / predicted);
            ok &= mode.mu_max > 1.0;
        }
        ok &= worst < 1e-6;
        notes.push(format!(
            "K = {k}: {sim}, synchronizes = {}, closed-form rel err {worst:.1e}",
            verdict.synchronizes
        ));
    }
    check(ok, notes.join("; "))
}

fn c9_agreement() -> Outcome {
    let mut cases = 0;
    let mut disagreements = Vec::new();
    for model in [vdp(), repressilator()] {
        let lc = cycle(&model)?;
        for graph in [complete_graph(3).unwrap(), ring_graph(4).unwrap()] {
            // Nodes start on the cycle a small phase apart.
            let x0: Vec<f64> = (0..graph.n)
                .flat_map(|i| lc.eval(i as f64 * lc.period / (4.0 * graph.n as f64)))
                .collect();
            for mask in [vec![1.0; model.dim()], partial_mask(model.dim())] {
                for k in [0.5, 1.0, 2.0] {
                    let verdict =
                        sync_predicate(&model, &lc, &graph, k, &mask).map_err(|e| e.to_string())?;
                    let converged = match run_network(&model, &graph, k, &mask, &x0, 200.0) {
                        Ok(run) => run.sync.final_error() < 1e-3,
                        Err(Error::Blowup { .. }) => false,
                        Err(e) => return Err(e.to_string()),
                    };
                    cases += 1;
                    if converged != verdict.synchronizes {
                        disagreements.push(format!(
                            "{} n={} K={k} mask={mask:?}: predicted {}, simulated {converged}",
                            model.name(),
                            graph.n,
                            verdict.synchronizes
                        ));
                    }
                }
            }
        }
    }
    check(
        disagreements.is_empty(),
        format!(
            "{} of {cases} cases agree {}",
            cases - disagreements.len(),
            disagreements.join("; ")
        ),
    )
}

fn c10_lf_periodicity() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for model in [vdp(), repressilator()] {
        let lc = cycle(&model)?;
        let lf = lf_decomposition(&model, &lc).map_err(|e| e.to_string())?;
        ok &= lf.periodicity_residual < 1e-4;
        notes.push(format!("{}: {:.2e}", model.name(), lf.periodicity_residual));
    }
    check(ok, format!("|P(T) - P(0)| / |P(0)|: {}", notes.join(", ")))
}

fn c11_linear_algebra() -> Outcome {
    let mut worst_lap: f64 = 0.0;
    for n in 3..=5 {
        let g = complete_graph(n).unwrap();
        let direct = eigenvalues(&g.laplacian).map_err(|e| e.to_string())?;
        let mut expected = vec![n as f64; n - 1];
        expected.push(0.0);
        for (z, e) in direct.iter().zip(&expected) {
            worst_lap = worst_lap.max((z - Complex64::new(*e, 0.0)).norm());
        }
        let mut sym = g.eigenvalues.clone();
        sym.reverse();
        for (z, e) in sym.iter().zip(&expected) {
            worst_lap = worst_lap.max((z - e).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_det: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=8);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = Matrix::from_real(n, n, &data).unwrap();
        let det = m.determinant();
        let prod = eigenvalues(&m).map_err(|e| e.to_string())?.product();
        worst_det = worst_det.max((prod - det).norm() / det.norm());
    }
    check(
        worst_lap < 1e-10 && worst_det < 1e-8,
        format!("Laplacian spectra err {worst_lap:.1e}, eigenvalue product vs det rel err {worst_det:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("limit cycle period", 1, c1_limit_cycle),
        ("uncoupled multiplier structure", 5, c2_uncoupled_structure),
        ("full-state shift law", 10, c3_shift_law),
        ("Abel-Jacobi-Liouville determinant", 10, c4_ajl),
        ("partial-mask MSF curve", 30, c5_msf_curve),
        (
            "three Van der Pol oscillators synchronize",
            10,
            c6_vdp_network,
        ),
        (
            "three repressilators synchronize",
            30,
            c7_repressilator_network,
        ),
        ("negative coupling prevents synchrony", 10, c8_necessity),
        ("MSF verdict matches simulation", 300, c9_agreement),
        ("Lyapunov-Floquet periodicity", 10, c10_lf_periodicity),
        ("linear algebra oracles", 5, c11_linear_algebra),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*limit);
        let (pass, detail) = match outcome {
            Ok(d) if in_time => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {limit} s")),
            Err(d) => (false, d),
        };
        failures += usize::from(!pass);
        println!(
            "{} {:>2} {name} [{elapsed:.2?} / {limit} s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

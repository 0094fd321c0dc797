//! Master stability function: largest Floquet multiplier modulus of the mode
//! equation as a function of the effective coupling `kappa = K lambda`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::monodromy;
use crate::limit_cycle::LimitCycle;
use crate::models::OscillatorModel;
use crate::network::GraphSpec;

const CONNECTED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsfPoint {
    pub kappa: f64,
    pub mu_max: f64,
    /// All multipliers, sorted by descending modulus.
    pub multipliers: Vec<Complex64>,
    /// Whether the unity multiplier was left out of `mu_max`.
    pub unity_excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsfCurve {
    pub model: String,
    pub mask: Vec<f64>,
    pub period: f64,
    pub points: Vec<MsfPoint>,
}

/// MSF value at `kappa`. At `kappa = 0` the unity multiplier is excluded;
/// otherwise every multiplier counts. Negative `kappa` is accepted so that
/// repulsive coupling can be assessed.
pub fn msf_point(
    model: &OscillatorModel,
    lc: &LimitCycle,
    kappa: f64,
    mask: &[f64],
) -> Result<MsfPoint> {
    let mono = monodromy(model, lc, kappa, mask)?;
    let unity = if kappa == 0.0 {
        mono.unity_index()
    } else {
        None
    };
    let mu_max = mono
        .multipliers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != unity)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    Ok(MsfPoint {
        kappa,
        mu_max,
        multipliers: mono.multipliers.values().to_vec(),
        unity_excluded: unity.is_some(),
    })
}

/// Evaluates the MSF on a strictly increasing, non-negative grid. Points run
/// in parallel and are returned in grid order.
pub fn msf_sweep(
    model: &OscillatorModel,
    lc: &LimitCycle,
    mask: &[f64],
    grid: &[f64],
) -> Result<MsfCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("kappa grid is empty".into()));
    }
    if grid.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(Error::InvalidParam(
            "kappa grid values must be finite and non-negative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam(
            "kappa grid must be strictly increasing".into(),
        ));
    }
    let results: Vec<Result<MsfPoint>> = grid
        .par_iter()
        .map(|&k| msf_point(model, lc, k, mask))
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut first_err = None;
    for (k, r) in grid.iter().zip(results) {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                log::error!("MSF point at kappa = {k} failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(MsfCurve {
        model: model.name().to_string(),
        mask: mask.to_vec(),
        period: lc.period,
        points,
    })
}

/// `points` values evenly spaced over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `points` log-spaced values over `[lo, hi]` (both positive).
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    linear_grid(lo.ln(), hi.ln(), points)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Zero followed by 50 log-spaced points over `[0.01, 10]`.
pub fn default_kappa_grid() -> Vec<f64> {
    std::iter::once(0.0)
        .chain(log_grid(0.01, 10.0, 50))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeStability {
    pub lambda: f64,
    pub kappa: f64,
    pub mu_max: f64,
    /// False for the synchronous mode `lambda_1 = 0`.
    pub in_verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncVerdict {
    pub synchronizes: bool,
    pub per_mode: Vec<ModeStability>,
}

/// Predicts synchronization of the network from the MSF at `kappa = K lambda_i`
/// for the transverse modes `i = 2..n`.
pub fn sync_predicate(
    model: &OscillatorModel,
    lc: &LimitCycle,
    graph: &GraphSpec,
    k: f64,
    mask: &[f64],
) -> Result<SyncVerdict> {
    let lambda2 = graph.eigenvalues.get(1).copied().unwrap_or(0.0);
    if lambda2 <= CONNECTED_TOL {
        return Err(Error::DisconnectedGraph { lambda2 });
    }
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut per_mode = Vec::with_capacity(graph.n);
    for (i, &lambda) in graph.eigenvalues.iter().enumerate() {
        let transverse = i > 0;
        let lambda = if transverse { lambda } else { 0.0 };
        let kappa = k * lambda;
        let mu_max = match cache.iter().find(|(c, _)| *c == kappa) {
            Some(&(_, v)) => v,
            None => {
                let v = msf_point(model, lc, kappa, mask)?.mu_max;
                cache.push((kappa, v));
                v
            }
        };
        per_mode.push(ModeStability {
            lambda,
            kappa,
            mu_max,
            in_verdict: transverse,
        });
    }
    // Without coupling the transverse directions inherit the marginal phase
    // direction, so distinct states never converge.
    let synchronizes = k != 0.0
        && per_mode
            .iter()
            .filter(|m| m.in_verdict)
            .all(|m| m.mu_max < 1.0);
    Ok(SyncVerdict {
        synchronizes,
        per_mode,
    })
}

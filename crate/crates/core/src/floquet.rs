//! Monodromy matrices, Floquet multipliers, the Lyapunov-Floquet factorization
//! and the Abel-Jacobi-Liouville determinant identity.
//!
//! The transition matrix over one period is kept as the product of the
//! transition matrices over the cycle's sample intervals. Multipliers come from
//! a periodic Schur decomposition of those factors, which resolves strongly
//! contracting directions to full relative accuracy.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit_cycle::LimitCycle;
use crate::linalg::{
    expm, periodic_schur, spectral_order, Matrix, PeriodicSchur, Spectrum, TriangularLog,
};
use crate::models::OscillatorModel;
use crate::ode::{integrate, IntegratorConfig};

/// Distance from 1 below which a multiplier counts as the unity multiplier.
pub const UNITY_TOL: f64 = 1e-3;
const CLOSURE_DRIFT_TOL: f64 = 1e-4;
const MAX_DIM: usize = 10;

#[derive(Debug, Clone)]
pub struct Monodromy {
    /// `phi(T, 0)` as an explicit product.
    pub matrix: Matrix,
    pub multipliers: Spectrum,
    /// `ln(mu_j) / T`, principal branch, in multiplier order.
    pub exponents: Vec<Complex64>,
    /// `ln |mu_j|`, in multiplier order.
    pub log_moduli: Vec<f64>,
    pub kappa: f64,
    pub mask: Vec<f64>,
    pub period: f64,
    /// `det phi(T, 0)` from the segment determinants.
    pub determinant: f64,
    pub log_determinant: f64,
    /// Distance between the integrated cycle state at `T` and the anchor.
    pub closure_drift: f64,
    segments: Vec<Matrix>,
    schur: PeriodicSchur,
}

impl Monodromy {
    /// Transition matrices over the sample intervals, `phi(t_{k+1}, t_k)`.
    pub fn segments(&self) -> &[Matrix] {
        &self.segments
    }

    /// Index of the multiplier closest to 1 if it lies within [`UNITY_TOL`].
    pub fn unity_index(&self) -> Option<usize> {
        let one = Complex64::new(1.0, 0.0);
        self.multipliers
            .iter()
            .enumerate()
            .map(|(i, m)| (i, (m - one).norm()))
            .filter(|(_, d)| *d < UNITY_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn lf_decomposition(&self) -> Result<LFDecomposition> {
        lf_from_segments(self)
    }
}

fn validate_mask(model: &OscillatorModel, mask: &[f64]) -> Result<()> {
    if mask.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "coupling mask has {} entries, model {} has dimension {}",
            mask.len(),
            model.name(),
            model.dim()
        )));
    }
    if mask.iter().any(|&d| d != 0.0 && d != 1.0) {
        return Err(Error::InvalidParam(
            "coupling mask entries must be 0 or 1".into(),
        ));
    }
    Ok(())
}

/// Integrator settings for variational segments.
pub fn variational_config(segment: f64) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step: Some(segment),
        max_steps: 10_000_000,
    }
}

/// Transition matrices of `Y' = (Df(x) - kappa DH) Y` over consecutive
/// intervals `[grid[k], grid[k+1]]`, integrated jointly with the cycle state
/// from the anchor. Returns the factors and the final cycle state.
fn transition_segments(
    model: &OscillatorModel,
    lc: &LimitCycle,
    kappa: f64,
    mask: &[f64],
    grid: &[f64],
) -> Result<(Vec<Matrix>, Vec<f64>)> {
    let m = model.dim();
    if m > MAX_DIM || lc.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "cycle of dimension {} does not fit model {} of dimension {m}",
            lc.dim(),
            model.name()
        )));
    }
    let field = |z: &[f64], dz: &mut [f64]| {
        let (x, y) = z.split_at(m);
        let (dx, dy) = dz.split_at_mut(m);
        model.field(x, dx);
        let mut jac = [0.0f64; MAX_DIM * MAX_DIM];
        model.jacobian_into(x, &mut jac[..m * m]);
        for i in 0..m {
            jac[i * m + i] -= kappa * mask[i];
        }
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += jac[i * m + l] * y[l * m + j];
                }
                dy[i * m + j] = acc;
            }
        }
    };
    let mut z = vec![0.0; m + m * m];
    z[..m].copy_from_slice(&lc.anchor);
    let mut factors = Vec::with_capacity(grid.len().saturating_sub(1));
    for w in grid.windows(2) {
        for i in 0..m {
            for j in 0..m {
                z[m + i * m + j] = if i == j { 1.0 } else { 0.0 };
            }
        }
        let cfg = variational_config(w[1] - w[0]);
        let tr = integrate(&field, &z, (w[0], w[1]), &cfg)?;
        z.copy_from_slice(tr.last_state());
        factors.push(Matrix::from_real(m, m, &z[m..])?);
    }
    Ok((factors, z[..m].to_vec()))
}

/// Monodromy of the mode equation `zeta' = (Df(x_s) - kappa DH) zeta` over one
/// period of `lc`, with `DH = diag(mask)`.
pub fn monodromy(
    model: &OscillatorModel,
    lc: &LimitCycle,
    kappa: f64,
    mask: &[f64],
) -> Result<Monodromy> {
    validate_mask(model, mask)?;
    if !kappa.is_finite() {
        return Err(Error::InvalidParam("kappa must be finite".into()));
    }
    let grid = lc
        .sample_times()
        .into_iter()
        .chain([lc.period])
        .collect::<Vec<_>>();
    let (segments, end) = transition_segments(model, lc, kappa, mask, &grid)?;
    let drift = end
        .iter()
        .zip(&lc.anchor)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = lc.anchor.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    if drift > CLOSURE_DRIFT_TOL * scale {
        return Err(Error::ClosureDrift { drift });
    }
    let schur = periodic_schur(&segments)?;
    let raw = schur.eigenvalues();
    let raw_logs = schur.log_moduli();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| spectral_order(&raw[a], &raw[b]));
    let multipliers = Spectrum::new(raw.clone(), true);
    let log_moduli: Vec<f64> = order.iter().map(|&i| raw_logs[i]).collect();
    let exponents = multipliers
        .iter()
        .zip(&log_moduli)
        .map(|(mu, lm)| Complex64::new(*lm, mu.arg()) / lc.period)
        .collect();
    let mut matrix = segments[0].clone();
    for s in &segments[1..] {
        matrix = s.matmul(&matrix);
    }
    let (mut log_det, mut sign) = (0.0, 1.0);
    for s in &segments {
        let d = s.determinant().re;
        log_det += d.abs().ln();
        sign *= d.signum();
    }
    Ok(Monodromy {
        matrix,
        multipliers,
        exponents,
        log_moduli,
        kappa,
        mask: mask.to_vec(),
        period: lc.period,
        determinant: sign * log_det.exp(),
        log_determinant: log_det,
        closure_drift: drift,
        segments,
        schur,
    })
}

/// Multipliers of the full-state coupled mode equation predicted from the
/// uncoupled ones: each is scaled by `exp(-kappa T)`.
pub fn shifted_multipliers_fullstate(base: &Monodromy, kappa: f64, period: f64) -> Vec<Complex64> {
    let factor = (-kappa * period).exp();
    base.multipliers.iter().map(|m| m * factor).collect()
}

/// Both sides of `det phi(t, 0) = exp(int_0^t tr Df) exp(-kappa tr(DH) t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AjlCheck {
    pub det_phi: f64,
    pub rhs: f64,
    pub log_det_phi: f64,
    pub log_rhs: f64,
}

impl AjlCheck {
    /// `|det - rhs| / rhs`, evaluated in the log domain.
    pub fn relative_error(&self) -> f64 {
        (self.log_det_phi - self.log_rhs).exp_m1().abs()
    }
}

/// `int_0^t tr Df(x_s)` by five-point Gauss-Legendre on each step of the
/// stored orbit.
pub fn divergence_integral(model: &OscillatorModel, lc: &LimitCycle, t: f64) -> f64 {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let orbit = lc.orbit();
    let times = orbit.times();
    let mut x = vec![0.0; lc.dim()];
    let mut total = 0.0;
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1].min(t));
        if b <= a {
            break;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (n, wt) in NODES.iter().zip(WEIGHTS) {
            orbit
                .eval_into(mid + half * n, &mut x)
                .expect("quadrature node inside the orbit");
            total += wt * half * model.divergence(&x);
        }
    }
    total
}

/// Evaluates both sides of the Abel-Jacobi-Liouville identity at time `t`.
pub fn ajl_determinant(
    model: &OscillatorModel,
    lc: &LimitCycle,
    kappa: f64,
    mask: &[f64],
    t: f64,
) -> Result<AjlCheck> {
    validate_mask(model, mask)?;
    if !(0.0..=lc.period).contains(&t) {
        return Err(Error::OutOfRange {
            t,
            t0: 0.0,
            t1: lc.period,
        });
    }
    let trace_dh: f64 = mask.iter().sum();
    let log_rhs = divergence_integral(model, lc, t) - kappa * trace_dh * t;
    let mut grid: Vec<f64> = lc.sample_times().into_iter().filter(|&s| s < t).collect();
    grid.push(t);
    let log_det = if grid.len() < 2 {
        0.0
    } else {
        let (segments, _) = transition_segments(model, lc, kappa, mask, &grid)?;
        segments.iter().map(|s| s.determinant().re.ln()).sum()
    };
    Ok(AjlCheck {
        det_phi: log_det.exp(),
        rhs: log_rhs.exp(),
        log_det_phi: log_det,
        log_rhs,
    })
}

/// `phi(T, 0) = P(t)^{-1} e^{R t} ...` factorization with `P` periodic.
#[derive(Debug, Clone)]
pub struct LFDecomposition {
    pub r: Matrix,
    /// `P(t_k) = e^{R t_k} phi(t_k, 0)^{-1}` at the cycle sample times.
    pub p_samples: Vec<Matrix>,
    /// `P(T)`, propagated one full period.
    pub p_period: Matrix,
    /// `|P(T) - P(0)| / |P(0)|` in the Frobenius norm.
    pub periodicity_residual: f64,
    /// `|expm(R T) - phi(T, 0)| / |phi(T, 0)|`.
    pub exp_residual: f64,
}

/// Lyapunov-Floquet factorization of the uncoupled cycle.
pub fn lf_decomposition(model: &OscillatorModel, lc: &LimitCycle) -> Result<LFDecomposition> {
    let mask = vec![1.0; model.dim()];
    monodromy(model, lc, 0.0, &mask)?.lf_decomposition()
}

fn lf_from_segments(mono: &Monodromy) -> Result<LFDecomposition> {
    // In Schur coordinates, with moduli ascending down the diagonal, the
    // recursion M_{k+1} = e^{L h} M_k T_k^{-1} only ever maps errors towards
    // smaller relative size, so P stays accurate even when the multipliers
    // span many decades.
    let mut ps = mono.schur.clone();
    ps.sort_ascending_modulus();
    let k = ps.period();
    let n = ps.dim();
    let period = mono.period;
    let tl = TriangularLog::new(&ps.triangular_product())?;
    let q0 = &ps.bases[0];
    let r = q0
        .matmul(&tl.log())
        .matmul(&q0.adjoint())
        .scale_real(1.0 / period);
    let step = tl.power(1.0 / k as f64);
    let mut m = Matrix::identity(n);
    let mut p_samples = Vec::with_capacity(k);
    p_samples.push(Matrix::identity(n));
    for i in 0..k {
        let t_inv = ps.factors[i].upper_triangular_inverse()?;
        m = step.matmul(&m).matmul(&t_inv);
        let basis = &ps.bases[(i + 1) % k];
        p_samples.push(q0.matmul(&m).matmul(&basis.adjoint()));
    }
    let p_period = p_samples.pop().expect("k >= 1");
    let identity = Matrix::identity(n);
    let periodicity_residual = (&p_period - &identity).norm_fro() / identity.norm_fro();
    let exp_rt = expm(&r.scale_real(period));
    let exp_residual = (&exp_rt - &mono.matrix).norm_fro() / mono.matrix.norm_fro();
    Ok(LFDecomposition {
        r,
        p_samples,
        p_period,
        periodicity_residual,
        exp_residual,
    })
}

//! Dormand-Prince 5(4) integration with dense output and event location, a
//! linearly implicit Rosenbrock continuation for runs that turn stiff, and a
//! fixed-step classical RK4 for cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State norm beyond which an integration is declared divergent.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest allowed step; `None` means a tenth of the integration span.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: None,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(Error::InvalidParam(
                "integrator tolerances must be positive".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParam("max_steps must be positive".into()));
        }
        if let Some(h) = self.max_step {
            if !positive(h) {
                return Err(Error::InvalidParam("max_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Accepted steps of an integration with a quartic interpolant on each step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    // Five coefficient vectors per step.
    dense: Vec<f64>,
}

impl Trajectory {
    fn start(t0: f64, x0: &[f64]) -> Self {
        Self {
            dim: x0.len(),
            times: vec![t0],
            states: x0.to_vec(),
            dense: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored nodes.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Appends a continuation that starts where this trajectory ends.
    pub fn append(&mut self, other: Trajectory) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch(
                "appended trajectory has a different dimension".into(),
            ));
        }
        if other.t0() != self.t_end() {
            return Err(Error::InvalidInput(
                "appended trajectory must start at the current end time".into(),
            ));
        }
        self.times.extend_from_slice(&other.times[1..]);
        self.states.extend_from_slice(&other.states[self.dim..]);
        self.dense.extend_from_slice(&other.dense);
        Ok(())
    }

    fn push_step(&mut self, t: f64, x: &[f64], coeffs: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.dense.extend_from_slice(coeffs);
    }

    /// Evaluates the interpolant at `t`, writing into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (t0, t1) = (self.t0(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return Err(Error::OutOfRange { t, t0, t1 });
        }
        let i = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => {
                out.copy_from_slice(self.state(i));
                return Ok(());
            }
            Err(i) => i - 1,
        };
        let theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        eval_dense(
            &self.dense[i * 5 * self.dim..(i + 1) * 5 * self.dim],
            theta,
            out,
        );
        Ok(())
    }
}

fn eval_dense(coeffs: &[f64], theta: f64, out: &mut [f64]) {
    let d = out.len();
    let t1 = 1.0 - theta;
    for (j, o) in out.iter_mut().enumerate() {
        let r = |k: usize| coeffs[k * d + j];
        *o = r(0) + theta * (r(1) + t1 * (r(2) + theta * (r(3) + t1 * r(4))));
    }
}

/// State of the trajectory at `t` from the dense interpolant.
pub fn dense_eval(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; traj.dim()];
    traj.eval_into(t, &mut out)?;
    Ok(out)
}

/// Upward zero crossing of an event function.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub state: Vec<f64>,
}

struct Stepper<'a, F> {
    field: &'a F,
    dim: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    // State at which k[5] was evaluated, for the stiffness estimate.
    y_stage6: Vec<f64>,
    coeffs: Vec<f64>,
}

impl<'a, F: Fn(&[f64], &mut [f64])> Stepper<'a, F> {
    fn new(field: &'a F, dim: usize) -> Self {
        Self {
            field,
            dim,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            y_stage6: vec![0.0; dim],
            coeffs: vec![0.0; 5 * dim],
        }
    }

    /// Attempts a step of size `h` from `y` (with `k[0] = f(y)`), returning the
    /// scaled error norm. On success `y_new` and `k[6]` hold the new state and
    /// its derivative.
    fn attempt(&mut self, y: &[f64], h: f64, cfg: &IntegratorConfig) -> f64 {
        for s in 1..7 {
            for j in 0..self.dim {
                let mut acc = 0.0;
                for (l, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[l][j];
                }
                self.tmp[j] = y[j] + h * acc;
            }
            match s {
                5 => self.y_stage6.copy_from_slice(&self.tmp),
                6 => self.y_new.copy_from_slice(&self.tmp),
                _ => {}
            }
            (self.field)(&self.tmp, &mut self.k[s]);
        }
        let mut sum = 0.0;
        for j in 0..self.dim {
            let mut err = 0.0;
            for (l, e) in E.iter().enumerate() {
                err += e * self.k[l][j];
            }
            err *= h;
            let sk = cfg.abs_tol + cfg.rel_tol * y[j].abs().max(self.y_new[j].abs());
            sum += (err / sk).powi(2);
        }
        let norm = (sum / self.dim.max(1) as f64).sqrt();
        if norm.is_finite() {
            norm
        } else {
            f64::INFINITY
        }
    }

    /// `h` times a local Lipschitz estimate along the last two stages. Values
    /// above 3.25 put the step on the boundary of the stability region.
    fn stiffness_ratio(&self, h: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.dim {
            num += (self.k[6][j] - self.k[5][j]).powi(2);
            den += (self.y_new[j] - self.y_stage6[j]).powi(2);
        }
        if den > 0.0 {
            h * (num / den).sqrt()
        } else {
            0.0
        }
    }

    fn build_dense(&mut self, y: &[f64], h: f64) {
        let d = self.dim;
        for j in 0..d {
            let r2 = self.y_new[j] - y[j];
            let r3 = h * self.k[0][j] - r2;
            let r4 = r2 - h * self.k[6][j] - r3;
            let mut r5 = 0.0;
            for (l, dl) in D.iter().enumerate() {
                r5 += dl * self.k[l][j];
            }
            self.coeffs[j] = y[j];
            self.coeffs[d + j] = r2;
            self.coeffs[2 * d + j] = r3;
            self.coeffs[3 * d + j] = r4;
            self.coeffs[4 * d + j] = h * r5;
        }
    }
}

fn initial_step<F: Fn(&[f64], &mut [f64])>(
    field: &F,
    y: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    h_max: f64,
) -> f64 {
    let d = y.len().max(1) as f64;
    let sk = |j: usize| cfg.abs_tol + cfg.rel_tol * y[j].abs();
    let d0 = (y
        .iter()
        .enumerate()
        .map(|(j, v)| (v / sk(j)).powi(2))
        .sum::<f64>()
        / d)
        .sqrt();
    let d1 = (f0
        .iter()
        .enumerate()
        .map(|(j, v)| (v / sk(j)).powi(2))
        .sum::<f64>()
        / d)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    field(&y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(j, (a, b))| ((a - b) / sk(j)).powi(2))
        .sum::<f64>()
        / d)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(h_max)
}

fn check_inputs(x0: &[f64], t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidInput(format!(
            "integration span [{t0}, {t1}] must be finite and increasing"
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial state must be finite".into()));
    }
    Ok(())
}

/// Integrates the autonomous system `x' = field(x)` over `t_span`.
pub fn integrate<F>(
    field: &F,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    check_inputs(x0, t_span, cfg)?;
    run(field, x0, t_span, cfg, false).map(|(traj, _)| traj)
}

/// Integrates like [`integrate`] and additionally locates every upward zero
/// crossing of `event` by bisection on the dense interpolant.
pub fn integrate_with_events<F, G>(
    field: &F,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    event: G,
) -> Result<(Trajectory, Vec<Crossing>)>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64]) -> f64,
{
    let traj = integrate(field, x0, t_span, cfg)?;
    let crossings = upward_crossings(&traj, event);
    Ok((traj, crossings))
}

/// Upward zero crossings of `event` along a stored trajectory, located to
/// about 1e-13 in time on the dense interpolant.
pub fn upward_crossings<G: Fn(&[f64]) -> f64>(traj: &Trajectory, event: G) -> Vec<Crossing> {
    let d = traj.dim();
    let mut probe = vec![0.0; d];
    let mut crossings = Vec::new();
    let mut g_old = event(traj.state(0));
    for i in 0..traj.len() - 1 {
        let g_new = event(traj.state(i + 1));
        if g_old < 0.0 && g_new >= 0.0 {
            let coeffs = &traj.dense[i * 5 * d..(i + 1) * 5 * d];
            let (t_old, h) = (traj.times[i], traj.times[i + 1] - traj.times[i]);
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while (hi - lo) * h > 1e-13 && hi - lo > 4.0 * f64::EPSILON {
                let mid = 0.5 * (lo + hi);
                eval_dense(coeffs, mid, &mut probe);
                if event(&probe) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = 0.5 * (lo + hi);
            let mut state = vec![0.0; d];
            eval_dense(coeffs, theta, &mut state);
            crossings.push(Crossing {
                t: t_old + theta * h,
                state,
            });
        }
        g_old = g_new;
    }
    crossings
}

const STIFF_RATIO: f64 = 3.25;
const STIFF_STEPS: usize = 15;
const NONSTIFF_RESET: usize = 6;

/// Dormand-Prince core. With `stop_when_stiff`, returns early (flag set) once
/// the stability bound has limited `STIFF_STEPS` accepted steps without
/// `NONSTIFF_RESET` unconstrained steps in between.
fn run<F>(
    field: &F,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    stop_when_stiff: bool,
) -> Result<(Trajectory, bool)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let (t0, t1) = t_span;
    let dim = x0.len();
    let h_max = cfg.max_step.unwrap_or((t1 - t0) / 10.0).min(t1 - t0);
    let mut traj = Trajectory::start(t0, x0);
    let mut st = Stepper::new(field, dim);
    let mut y = x0.to_vec();
    field(&y, &mut st.k[0]);
    let mut h = initial_step(field, &y, &st.k[0], cfg, h_max);
    let mut t = t0;
    let mut steps = 0usize;
    let mut last_rejected = false;
    let (mut stiff, mut nonstiff) = (0usize, 0usize);
    while t < t1 {
        if steps >= cfg.max_steps {
            return Err(Error::StepBudgetExceeded {
                t,
                max_steps: cfg.max_steps,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepFailure { t });
        }
        let mut last = false;
        if t + h * 1.0001 >= t1 {
            h = t1 - t;
            last = true;
        }
        steps += 1;
        let err = st.attempt(&y, h, cfg);
        if err <= 1.0 {
            st.build_dense(&y, h);
            let t_new = if last { t1 } else { t + h };
            if st.y_new.iter().any(|v| !(v.abs() <= BLOWUP_THRESHOLD)) {
                return Err(Error::Blowup { t: t_new });
            }
            traj.push_step(t_new, &st.y_new, &st.coeffs);
            y.copy_from_slice(&st.y_new);
            let (k0, rest) = st.k.split_at_mut(1);
            k0[0].copy_from_slice(&rest[5]);
            t = t_new;
            let mut fac = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
            };
            if last_rejected {
                fac = fac.min(1.0);
            }
            if stop_when_stiff && !last {
                if st.stiffness_ratio(h) > STIFF_RATIO {
                    nonstiff = 0;
                    stiff += 1;
                    if stiff == STIFF_STEPS {
                        return Ok((traj, true));
                    }
                } else {
                    nonstiff += 1;
                    if nonstiff == NONSTIFF_RESET {
                        stiff = 0;
                    }
                }
            }
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            h *= fac;
            last_rejected = true;
        }
    }
    Ok((traj, false))
}

/// In-place LU factorization with partial pivoting of a row-major `n x n`
/// matrix. Returns `None` on an exactly singular pivot.
fn lu_factor(a: &mut [f64], n: usize, piv: &mut [usize]) -> Option<()> {
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[p * n + c] == 0.0 {
            return None;
        }
        piv[c] = p;
        if p != c {
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            a[r * n + c] = f;
            for j in c + 1..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    Some(())
}

fn lu_solve(lu: &[f64], n: usize, piv: &[usize], b: &mut [f64]) {
    for (c, &p) in piv.iter().enumerate().take(n) {
        b.swap(c, p);
    }
    for c in 0..n {
        for r in c + 1..n {
            b[r] -= lu[r * n + c] * b[c];
        }
    }
    for r in (0..n).rev() {
        let mut acc = b[r];
        for j in r + 1..n {
            acc -= lu[r * n + j] * b[j];
        }
        b[r] = acc / lu[r * n + r];
    }
}

fn scaled_norm(err: &[f64], y: &[f64], y_new: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = err
        .iter()
        .enumerate()
        .map(|(j, e)| (e / (cfg.abs_tol + cfg.rel_tol * y[j].abs().max(y_new[j].abs()))).powi(2))
        .sum();
    let norm = (sum / err.len().max(1) as f64).sqrt();
    if norm.is_finite() {
        norm
    } else {
        f64::INFINITY
    }
}

/// Integrates `x' = field(x)` with the L-stable second-order Rosenbrock pair
/// of Shampine and Reichelt (third-order error estimate). `jacobian` writes
/// the row-major Jacobian. Dense output is the method's own quadratic
/// interpolant.
pub fn integrate_rosenbrock<F, J>(
    field: &F,
    jacobian: &J,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &mut [f64]),
{
    check_inputs(x0, t_span, cfg)?;
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;
    let (t0, t1) = t_span;
    let n = x0.len();
    let h_max = cfg.max_step.unwrap_or((t1 - t0) / 10.0).min(t1 - t0);
    let mut traj = Trajectory::start(t0, x0);
    let mut y = x0.to_vec();
    let mut f0 = vec![0.0; n];
    field(&y, &mut f0);
    let mut h = initial_step(field, &y, &f0, cfg, h_max);
    let (mut jac, mut w, mut piv) = (vec![0.0; n * n], vec![0.0; n * n], vec![0usize; n]);
    let (mut k1, mut k2, mut k3) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut f1, mut f2, mut tmp, mut y_new) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut err_vec = vec![0.0; n];
    let mut coeffs = vec![0.0; 5 * n];
    let mut t = t0;
    let mut steps = 0usize;
    let mut jac_fresh = false;
    let mut last_rejected = false;
    while t < t1 {
        if steps >= cfg.max_steps {
            return Err(Error::StepBudgetExceeded {
                t,
                max_steps: cfg.max_steps,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepFailure { t });
        }
        let mut last = false;
        if t + h * 1.0001 >= t1 {
            h = t1 - t;
            last = true;
        }
        steps += 1;
        if !jac_fresh {
            jacobian(&y, &mut jac);
            jac_fresh = true;
        }
        for (i, (wi, ji)) in w.iter_mut().zip(&jac).enumerate() {
            *wi = -h * d * ji + if i % (n + 1) == 0 { 1.0 } else { 0.0 };
        }
        if lu_factor(&mut w, n, &mut piv).is_none() {
            h *= 0.5;
            last_rejected = true;
            continue;
        }
        k1.copy_from_slice(&f0);
        lu_solve(&w, n, &piv, &mut k1);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        field(&tmp, &mut f1);
        for j in 0..n {
            k2[j] = f1[j] - k1[j];
        }
        lu_solve(&w, n, &piv, &mut k2);
        for j in 0..n {
            k2[j] += k1[j];
            y_new[j] = y[j] + h * k2[j];
        }
        field(&y_new, &mut f2);
        for j in 0..n {
            k3[j] = f2[j] - e32 * (k2[j] - f1[j]) - 2.0 * (k1[j] - f0[j]);
        }
        lu_solve(&w, n, &piv, &mut k3);
        for j in 0..n {
            err_vec[j] = h / 6.0 * (k1[j] - 2.0 * k2[j] + k3[j]);
        }
        let err = scaled_norm(&err_vec, &y, &y_new, cfg);
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            if y_new.iter().any(|v| !(v.abs() <= BLOWUP_THRESHOLD)) {
                return Err(Error::Blowup { t: t_new });
            }
            // y + h (theta k2 + theta (1 - theta) (k1 - k2) / (1 - 2d)).
            for j in 0..n {
                coeffs[j] = y[j];
                coeffs[n + j] = h * k2[j];
                coeffs[2 * n + j] = h * (k1[j] - k2[j]) / (1.0 - 2.0 * d);
                coeffs[3 * n + j] = 0.0;
                coeffs[4 * n + j] = 0.0;
            }
            traj.push_step(t_new, &y_new, &coeffs);
            y.copy_from_slice(&y_new);
            f0.copy_from_slice(&f2);
            jac_fresh = false;
            t = t_new;
            let mut fac = if err == 0.0 {
                5.0
            } else {
                (0.8 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
            };
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            let fac = if err.is_finite() {
                (0.8 * err.powf(-1.0 / 3.0)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(traj)
}

/// Dormand-Prince until the step size becomes stability-limited, then the
/// Rosenbrock method from the last accepted state to the end of the span.
/// Non-stiff problems never touch `jacobian` and match [`integrate`].
pub fn integrate_switching<F, J>(
    field: &F,
    jacobian: &J,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &mut [f64]),
{
    check_inputs(x0, t_span, cfg)?;
    let (mut traj, stiff) = run(field, x0, t_span, cfg, true)?;
    if stiff {
        let t = traj.t_end();
        log::debug!("stiffness detected at t = {t}, continuing with the Rosenbrock method");
        let budget = cfg.max_steps.saturating_sub(traj.len() - 1).max(1);
        let rest_cfg = IntegratorConfig {
            max_steps: budget,
            ..*cfg
        };
        let rest =
            integrate_rosenbrock(field, jacobian, traj.last_state(), (t, t_span.1), &rest_cfg)?;
        traj.append(rest)?;
    }
    Ok(traj)
}

/// Fixed-step classical fourth-order Runge-Kutta; returns the final state.
pub fn rk4<F>(field: &F, x0: &[f64], t_span: (f64, f64), steps: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = x0.len();
    let h = (t_span.1 - t_span.0) / steps as f64;
    let mut y = x0.to_vec();
    let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    for _ in 0..steps {
        field(&y, &mut k[0]);
        for (s, w) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for j in 0..d {
                tmp[j] = y[j] + w * h * k[s - 1][j];
            }
            field(&tmp, &mut k[s]);
        }
        for j in 0..d {
            y[j] += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
        }
    }
    y
}

//! Oscillator models with analytic Jacobians.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    VanDerPol {
        mu: f64,
    },
    Repressilator {
        alpha: f64,
        alpha0: f64,
        beta: f64,
        n: f64,
    },
    LinearRotation,
}

/// Named autonomous vector field `f: R^m -> R^m` with its Jacobian.
#[derive(Debug, Clone)]
pub struct OscillatorModel {
    name: &'static str,
    kind: ModelKind,
    params: BTreeMap<String, f64>,
    default_initial: Vec<f64>,
    transient_hint: f64,
    clipped: Arc<AtomicUsize>,
}

/// Names accepted by [`by_name`].
pub const MODEL_NAMES: [&str; 3] = ["vdp", "repressilator", "linear_rotation"];

impl OscillatorModel {
    fn new(
        name: &'static str,
        kind: ModelKind,
        params: &[(&str, f64)],
        x0: Vec<f64>,
        hint: f64,
    ) -> Self {
        Self {
            name,
            kind,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            default_initial: x0,
            transient_hint: hint,
            clipped: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn name(&self) -> &str {
        self.name
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Repressilator { .. } => 6,
            _ => 2,
        }
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn default_initial(&self) -> &[f64] {
        &self.default_initial
    }

    /// Time after which trajectories from the default initial state are
    /// close to the attractor.
    pub fn transient_hint(&self) -> f64 {
        self.transient_hint
    }

    /// Number of evaluations in which a negative concentration was clipped.
    pub fn clip_count(&self) -> usize {
        self.clipped.load(Ordering::Relaxed)
    }

    fn clip(&self, p: f64) -> f64 {
        if p >= 0.0 {
            return p;
        }
        if self.clipped.fetch_add(1, Ordering::Relaxed) == 0 {
            log::warn!("negative concentration {p:.3e} clipped to zero");
        }
        0.0
    }

    pub fn field(&self, x: &[f64], dx: &mut [f64]) {
        match self.kind {
            ModelKind::VanDerPol { mu } => {
                dx[0] = x[1];
                dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
            }
            ModelKind::LinearRotation => {
                dx[0] = x[1];
                dx[1] = -x[0];
            }
            ModelKind::Repressilator {
                alpha,
                alpha0,
                beta,
                n,
            } => {
                for j in 0..3 {
                    let prev = (j + 2) % 3;
                    let p_prev = self.clip(x[2 * prev + 1]);
                    let (m, p) = (x[2 * j], x[2 * j + 1]);
                    dx[2 * j] = -m + alpha / (1.0 + hill(p_prev, n)) + alpha0;
                    dx[2 * j + 1] = -beta * (p - m);
                }
            }
        }
    }

    /// Row-major Jacobian written into `out` (length `dim * dim`).
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self.kind {
            ModelKind::VanDerPol { mu } => {
                out[1] = 1.0;
                out[2] = -2.0 * mu * x[0] * x[1] - 1.0;
                out[3] = mu * (1.0 - x[0] * x[0]);
            }
            ModelKind::LinearRotation => {
                out[1] = 1.0;
                out[2] = -1.0;
            }
            ModelKind::Repressilator { alpha, beta, n, .. } => {
                for j in 0..3 {
                    let prev = (j + 2) % 3;
                    let p = self.clip(x[2 * prev + 1]);
                    let (mr, pr) = (2 * j, 2 * j + 1);
                    out[mr * 6 + mr] = -1.0;
                    let pn = hill(p, n);
                    let dpn = if p > 0.0 {
                        n * pn / p
                    } else if n == 1.0 {
                        1.0
                    } else {
                        0.0
                    };
                    out[mr * 6 + 2 * prev + 1] = -alpha * dpn / (1.0 + pn).powi(2);
                    out[pr * 6 + mr] = beta;
                    out[pr * 6 + pr] = -beta;
                }
            }
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let m = self.dim();
        let mut out = vec![0.0; m * m];
        self.jacobian_into(x, &mut out);
        let rows: Vec<&[f64]> = out.chunks(m).collect();
        Matrix::from_rows(&rows)
    }

    /// Trace of the Jacobian.
    pub fn divergence(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::VanDerPol { mu } => mu * (1.0 - x[0] * x[0]),
            ModelKind::LinearRotation => 0.0,
            ModelKind::Repressilator { beta, .. } => -3.0 - 3.0 * beta,
        }
    }
}

fn hill(p: f64, n: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        (n * p.ln()).exp()
    }
}

pub fn vdp_model(mu: f64) -> Result<OscillatorModel> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParam(format!(
            "mu must be positive, got {mu}"
        )));
    }
    Ok(OscillatorModel::new(
        "vdp",
        ModelKind::VanDerPol { mu },
        &[("mu", mu)],
        vec![2.0, 0.0],
        50.0 * mu.max(1.0),
    ))
}

/// Three-gene repressilator with state order `(m1, p1, m2, p2, m3, p3)`.
pub fn repressilator_model(alpha: f64, alpha0: f64, beta: f64, n: f64) -> Result<OscillatorModel> {
    let finite = [alpha, alpha0, beta, n].iter().all(|v| v.is_finite());
    if !finite || alpha <= 0.0 || beta <= 0.0 || n < 1.0 || alpha0 < 0.0 {
        return Err(Error::InvalidParam(format!(
            "repressilator needs alpha > 0, alpha0 >= 0, beta > 0, n >= 1 \
             (got alpha={alpha}, alpha0={alpha0}, beta={beta}, n={n})"
        )));
    }
    Ok(OscillatorModel::new(
        "repressilator",
        ModelKind::Repressilator {
            alpha,
            alpha0,
            beta,
            n,
        },
        &[
            ("alpha", alpha),
            ("alpha0", alpha0),
            ("beta", beta),
            ("n", n),
        ],
        vec![0.0, 1.0, 0.0, 3.0, 0.0, 5.0],
        30.0,
    ))
}

/// Harmonic rotation `x1' = x2, x2' = -x1` with period `2 pi`.
pub fn linear_rotation_model() -> OscillatorModel {
    OscillatorModel::new(
        "linear_rotation",
        ModelKind::LinearRotation,
        &[],
        vec![1.0, 0.0],
        0.0,
    )
}

/// Builds a registered model, filling unspecified parameters with defaults.
pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<OscillatorModel> {
    let allowed: &[(&str, f64)] = match name {
        "vdp" => &[("mu", 1.0)],
        "repressilator" => &[
            ("alpha", 1000.0),
            ("alpha0", 1.0),
            ("beta", 5.0),
            ("n", 2.0),
        ],
        "linear_rotation" => &[],
        _ => {
            return Err(Error::InvalidParam(format!(
                "unknown model '{name}' (expected one of {})",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    if let Some(bad) = params.keys().find(|k| !allowed.iter().any(|(a, _)| a == k)) {
        return Err(Error::InvalidParam(format!(
            "unknown parameter '{bad}' for model '{name}'"
        )));
    }
    let get = |key: &str| {
        params
            .get(key)
            .copied()
            .unwrap_or_else(|| allowed.iter().find(|(k, _)| *k == key).unwrap().1)
    };
    match name {
        "vdp" => vdp_model(get("mu")),
        "repressilator" => repressilator_model(get("alpha"), get("alpha0"), get("beta"), get("n")),
        _ => Ok(linear_rotation_model()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval(m: &OscillatorModel, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; m.dim()];
        m.field(x, &mut dx);
        dx
    }

    fn check_jacobian(model: &OscillatorModel, lo: &[f64], hi: &[f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = model.dim();
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
            let j = model.jacobian(&x);
            let scale = j.max_abs().max(1.0);
            for c in 0..d {
                let h = 1e-6 * x[c].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let (fp, fm) = (eval(model, &xp), eval(model, &xm));
                for r in 0..d {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(
                        (fd - j[(r, c)].re).abs() < 1e-5 * scale,
                        "{} d{r}/d{c} at {x:?}: {fd} vs {}",
                        model.name(),
                        j[(r, c)].re
                    );
                }
            }
            let tr: f64 = (0..d).map(|i| j[(i, i)].re).sum();
            assert!((tr - model.divergence(&x)).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn van_der_pol_field_and_jacobian() {
        let m = vdp_model(1.0).unwrap();
        assert_eq!(eval(&m, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(eval(&m, &[1.0, 1.0]), vec![1.0, -1.0]);
        let j = vdp_model(0.7).unwrap().jacobian(&[0.0, 0.0]);
        assert_eq!(j, Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.7]]));
        check_jacobian(&m, &[-3.0, -4.0], &[3.0, 4.0]);
        assert!(matches!(vdp_model(0.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn repressilator_field_and_jacobian() {
        let m = repressilator_model(1000.0, 1.0, 5.0, 2.0).unwrap();
        let dx = eval(&m, &[0.0; 6]);
        for j in 0..3 {
            assert_eq!(dx[2 * j], 1001.0);
            assert_eq!(dx[2 * j + 1], 0.0);
        }
        let dx = eval(&m, &[3.0, 3.0, 7.0, 7.0, 1.5, 1.5]);
        for j in 0..3 {
            assert_eq!(dx[2 * j + 1], 0.0);
        }
        check_jacobian(&m, &[0.0; 6], &[200.0; 6]);
        let frac = repressilator_model(50.0, 0.5, 2.0, 2.5).unwrap();
        check_jacobian(&frac, &[0.01; 6], &[60.0; 6]);
        assert!(repressilator_model(1000.0, 1.0, 5.0, 0.5).is_err());
    }

    #[test]
    fn repressilator_symmetric_equilibrium() {
        // Bisection on s(1 + s^2) = 1001 + s^2.
        let g = |s: f64| s * (1.0 + s * s) - 1001.0 - s * s;
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let s = 0.5 * (lo + hi);
        let m = repressilator_model(1000.0, 1.0, 5.0, 2.0).unwrap();
        let dx = eval(&m, &[s; 6]);
        assert!(dx.iter().all(|v| v.abs() < 1e-9), "{dx:?}");
    }

    #[test]
    fn negative_concentrations_are_clipped() {
        let m = repressilator_model(1000.0, 1.0, 5.0, 2.0).unwrap();
        let dx = eval(&m, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        assert_eq!(dx[0], 1001.0);
        assert!(m.clip_count() >= 1);
    }

    #[test]
    fn rotation_model() {
        let m = linear_rotation_model();
        assert_eq!(eval(&m, &[1.0, 0.0]), vec![0.0, -1.0]);
        assert_eq!(
            m.jacobian(&[3.0, -2.0]),
            Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
        );
    }

    #[test]
    fn registry_validates_names_and_params() {
        let mut p = BTreeMap::new();
        assert_eq!(by_name("vdp", &p).unwrap().params()["mu"], 1.0);
        assert_eq!(by_name("repressilator", &p).unwrap().dim(), 6);
        p.insert("mu".to_string(), 2.0);
        let m = by_name("vdp", &p).unwrap();
        assert_eq!(m.kind(), ModelKind::VanDerPol { mu: 2.0 });
        assert_eq!(m.transient_hint(), 100.0);
        assert!(by_name("repressilator", &p).is_err());
        assert!(by_name("lorenz", &BTreeMap::new()).is_err());
    }

    #[test]
    fn van_der_pol_attractor_is_bounded() {
        use crate::ode::{integrate, IntegratorConfig};
        let m = vdp_model(1.0).unwrap();
        let tr = integrate(
            &|x: &[f64], dx: &mut [f64]| m.field(x, dx),
            &[2.0, 0.0],
            (0.0, 60.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        for (t, x) in tr.times().iter().zip(tr.states()) {
            if *t >= 5.0 {
                assert!(x[0].abs() <= 3.0 && x[1].abs() <= 4.0);
            }
        }
    }
}

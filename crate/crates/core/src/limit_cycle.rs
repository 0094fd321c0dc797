//! Periodic orbit detection from Poincare section returns.

use crate::error::{Error, Result};
use crate::models::OscillatorModel;
use crate::ode::{dense_eval, integrate, upward_crossings, IntegratorConfig, Trajectory};

/// Returns averaged for the period estimate.
const RETURNS: usize = 5;
const MIN_WINDOW: f64 = 20.0;
const AMPLITUDE_FLOOR: f64 = 1e-6;
const RETURN_TOL: f64 = 1e-6;
const CLOSURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOptions {
    pub samples: usize,
    /// Section coordinate; by default the one with the largest swing.
    pub section_coordinate: Option<usize>,
    /// Transient length; by default the model's hint.
    pub transient: Option<f64>,
    /// How many times the transient is doubled before giving up.
    pub retries: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            samples: 512,
            section_coordinate: None,
            transient: None,
            retries: 3,
        }
    }
}

/// Attracting periodic orbit sampled at uniform phase.
#[derive(Debug, Clone)]
pub struct LimitCycle {
    pub period: f64,
    pub anchor: Vec<f64>,
    /// `samples[k]` is the state at time `k * period / samples.len()`.
    pub samples: Vec<Vec<f64>>,
    pub closure_residual: f64,
    pub section_coordinate: usize,
    pub section_level: f64,
    orbit: Trajectory,
}

impl LimitCycle {
    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.samples.len();
        (0..n).map(|k| k as f64 * self.period / n as f64).collect()
    }

    /// One period of the orbit starting at the anchor, with dense output.
    pub fn orbit(&self) -> &Trajectory {
        &self.orbit
    }

    /// State at phase time `t`, reduced modulo the period.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let tau = t.rem_euclid(self.period).min(self.orbit.t_end());
        dense_eval(&self.orbit, tau).expect("phase time inside the stored period")
    }
}

fn field_of(model: &OscillatorModel) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |x: &[f64], dx: &mut [f64]| model.field(x, dx)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Coordinate with the largest swing and its time average over the window.
fn choose_section(window: &Trajectory, forced: Option<usize>) -> Result<(usize, f64, f64)> {
    const GRID: usize = 4000;
    let d = window.dim();
    let (t0, t1) = (window.t0(), window.t_end());
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut mean = vec![0.0; d];
    let mut x = vec![0.0; d];
    for k in 0..GRID {
        window.eval_into(t0 + (t1 - t0) * k as f64 / GRID as f64, &mut x)?;
        for c in 0..d {
            lo[c] = lo[c].min(x[c]);
            hi[c] = hi[c].max(x[c]);
            mean[c] += x[c] / GRID as f64;
        }
    }
    let swing: Vec<f64> = (0..d).map(|c| hi[c] - lo[c]).collect();
    let widest = swing.iter().cloned().fold(0.0, f64::max);
    if widest < AMPLITUDE_FLOOR {
        return Err(Error::FixedPointConvergence { amplitude: widest });
    }
    let c = match forced {
        Some(c) if c < d => c,
        Some(c) => {
            return Err(Error::InvalidParam(format!(
                "section coordinate {c} out of range for dimension {d}"
            )))
        }
        None => (0..d).fold(0, |best, c| if swing[c] > swing[best] { c } else { best }),
    };
    if swing[c] < AMPLITUDE_FLOOR {
        return Err(Error::FixedPointConvergence {
            amplitude: swing[c],
        });
    }
    Ok((c, mean[c], widest))
}

/// Locates the attracting limit cycle reached from `x0`.
pub fn find_limit_cycle(
    model: &OscillatorModel,
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<LimitCycle> {
    find_limit_cycle_with(model, x0, cfg, &CycleOptions::default())
}

pub fn find_limit_cycle_with(
    model: &OscillatorModel,
    x0: &[f64],
    cfg: &IntegratorConfig,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, model {} has dimension {}",
            x0.len(),
            model.name(),
            model.dim()
        )));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidParam(
            "a cycle needs at least two samples".into(),
        ));
    }
    let field = field_of(model);
    let mut transient = opts.transient.unwrap_or(model.transient_hint());
    let mut start = x0.to_vec();
    let mut last_err = None;
    for attempt in 0..=opts.retries {
        if transient > 0.0 {
            start = integrate(&field, &start, (0.0, transient), cfg)?
                .last_state()
                .to_vec();
        }
        match locate(model, &start, transient, cfg, opts) {
            Ok(lc) => return Ok(lc),
            Err(e @ (Error::NotPeriodic { .. } | Error::NoCrossings { .. })) => {
                log::debug!("limit cycle attempt {attempt} failed: {e}");
                last_err = Some(e);
                transient = if transient > 0.0 {
                    2.0 * transient
                } else {
                    MIN_WINDOW
                };
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn locate(
    model: &OscillatorModel,
    start: &[f64],
    transient: f64,
    cfg: &IntegratorConfig,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    let field = field_of(model);
    let mut span = transient.max(MIN_WINDOW);
    let mut window = integrate(&field, start, (0.0, span), cfg)?;
    let (c, level, _) = choose_section(&window, opts.section_coordinate)?;
    let event = |x: &[f64]| x[c] - level;
    let mut crossings = upward_crossings(&window, event);
    if crossings.len() < RETURNS + 1 {
        span = if crossings.len() >= 2 {
            let gap = crossings[1].t - crossings[0].t;
            (RETURNS as f64 + 2.0) * gap * 1.1
        } else {
            4.0 * span
        }
        .max(span);
        window = integrate(&field, start, (0.0, span), cfg)?;
        crossings = upward_crossings(&window, event);
    }
    if crossings.len() < RETURNS + 1 {
        return Err(Error::NoCrossings {
            found: crossings.len(),
        });
    }
    let last = &crossings[crossings.len() - RETURNS - 1..];
    let period = (last[RETURNS].t - last[0].t) / RETURNS as f64;
    let anchor = last[RETURNS].state.clone();
    let ret = distance(&anchor, &last[RETURNS - 1].state);
    if ret > RETURN_TOL * norm(&anchor).max(1.0) {
        return Err(Error::NotPeriodic { distance: ret });
    }
    let orbit = integrate(&field, &anchor, (0.0, period), cfg)?;
    let closure_residual =
        distance(orbit.last_state(), &anchor) / norm(&anchor).max(f64::MIN_POSITIVE);
    if closure_residual >= CLOSURE_TOL {
        return Err(Error::NotPeriodic {
            distance: closure_residual,
        });
    }
    let mut lc = LimitCycle {
        period,
        anchor,
        samples: Vec::new(),
        closure_residual,
        section_coordinate: c,
        section_level: level,
        orbit,
    };
    lc.samples = sample_orbit(&lc, opts.samples);
    Ok(lc)
}

fn sample_orbit(lc: &LimitCycle, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            if k == 0 {
                lc.anchor.clone()
            } else {
                lc.eval(k as f64 * lc.period / count as f64)
            }
        })
        .collect()
}

/// Resamples the cycle at `count` uniform phases from its dense orbit.
pub fn resample(lc: &LimitCycle, count: usize) -> Result<LimitCycle> {
    if count < 64 {
        return Err(Error::InvalidParam(format!(
            "resample needs at least 64 samples, got {count}"
        )));
    }
    let mut out = lc.clone();
    out.samples = sample_orbit(lc, count);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{linear_rotation_model, repressilator_model, vdp_model};
    use std::f64::consts::PI;

    fn reference_vdp_period() -> f64 {
        // 100 time units of transient, then the mean of five section returns at
        // rel_tol 1e-12.
        let m = vdp_model(1.0).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
        let f = |x: &[f64], dx: &mut [f64]| m.field(x, dx);
        let start = integrate(&f, &[2.0, 0.0], (0.0, 100.0), &cfg)
            .unwrap()
            .last_state()
            .to_vec();
        let tr = integrate(&f, &start, (0.0, 50.0), &cfg).unwrap();
        let ev = upward_crossings(&tr, |x| x[1]);
        let n = ev.len();
        (ev[n - 1].t - ev[n - 6].t) / 5.0
    }

    #[test]
    fn rotation_period_is_two_pi() {
        let lc = find_limit_cycle(
            &linear_rotation_model(),
            &[1.0, 0.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!((lc.period - 2.0 * PI).abs() < 1e-8, "{}", lc.period);
        assert_eq!(lc.samples.len(), 512);
        assert!(lc.closure_residual < 1e-6);
    }

    #[test]
    fn van_der_pol_period_matches_reference() {
        let reference = reference_vdp_period();
        assert!((reference - 6.6632868593).abs() < 1e-8);
        let lc = find_limit_cycle(
            &vdp_model(1.0).unwrap(),
            &[2.0, 0.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!((lc.period - reference).abs() < 1e-3 * reference);
        assert!(lc.closure_residual < 1e-6);
        assert_eq!(lc.samples[0], lc.anchor);
    }

    #[test]
    fn period_is_independent_of_initial_condition() {
        let m = vdp_model(1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let a = find_limit_cycle(&m, &[2.0, 0.0], &cfg).unwrap();
        let b = find_limit_cycle(&m, &[0.1, -0.3], &cfg).unwrap();
        assert!((a.period - b.period).abs() < 1e-6 * a.period);
    }

    #[test]
    fn period_is_invariant_under_section_choice() {
        let m = vdp_model(1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let periods: Vec<f64> = [0, 1]
            .iter()
            .map(|&c| {
                let opts = CycleOptions {
                    section_coordinate: Some(c),
                    ..CycleOptions::default()
                };
                find_limit_cycle_with(&m, &[2.0, 0.0], &cfg, &opts)
                    .unwrap()
                    .period
            })
            .collect();
        assert!(
            (periods[0] - periods[1]).abs() < 1e-8 * periods[0],
            "{periods:?}"
        );
    }

    #[test]
    fn repressilator_cycle_closes() {
        let m = repressilator_model(1000.0, 1.0, 5.0, 2.0).unwrap();
        let lc = find_limit_cycle(&m, m.default_initial(), &IntegratorConfig::default()).unwrap();
        assert!(lc.period.is_finite() && lc.period > 0.0);
        assert!(lc.closure_residual < 1e-6);
        assert_eq!(lc.section_coordinate % 2, 0, "mRNA swings are the widest");
    }

    #[test]
    fn fixed_point_is_reported() {
        // The origin is an equilibrium of the rotation model.
        let r = find_limit_cycle(
            &linear_rotation_model(),
            &[0.0, 0.0],
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(Error::FixedPointConvergence { .. })));
    }

    #[test]
    fn resample_rotation_lies_on_unit_circle() {
        let lc = find_limit_cycle(
            &linear_rotation_model(),
            &[1.0, 0.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let r = resample(&lc, 1024).unwrap();
        assert_eq!(r.period, lc.period);
        for s in &r.samples {
            assert!((norm(s) - 1.0).abs() < 1e-6);
        }
        let same = resample(&lc, 512).unwrap();
        for (a, b) in same.samples.iter().zip(&lc.samples) {
            assert!(distance(a, b) < 1e-12);
        }
        assert!(resample(&lc, 10).is_err());
    }

    #[test]
    fn doubling_samples_halves_interpolation_defect() {
        let m = vdp_model(1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let lc = find_limit_cycle(&m, &[2.0, 0.0], &cfg).unwrap();
        let f = |x: &[f64], dx: &mut [f64]| m.field(x, dx);
        let defect = |count: usize| {
            let r = resample(&lc, count).unwrap();
            let h = r.period / count as f64;
            (0..count)
                .map(|k| {
                    let a = &r.samples[k];
                    let b = &r.samples[(k + 1) % count];
                    let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
                    let t = (k as f64 + 0.5) * h;
                    let direct = integrate(&f, &lc.anchor, (0.0, t), &cfg).unwrap();
                    distance(&mid, direct.last_state())
                })
                .fold(0.0, f64::max)
        };
        let (d1, d2) = (defect(64), defect(128));
        assert!(d2 <= 0.5 * d1, "{d1} {d2}");
    }

    #[test]
    fn rejects_wrong_dimension() {
        let r = find_limit_cycle(
            &vdp_model(1.0).unwrap(),
            &[1.0],
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}

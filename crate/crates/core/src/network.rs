//! Graph Laplacians, diffusively coupled networks and synchronization error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, Matrix};
use crate::models::OscillatorModel;
use crate::ode::{integrate_switching, IntegratorConfig, Trajectory};

/// Default number of points on the synchronization-error output grid.
pub const DEFAULT_GRID_POINTS: usize = 2000;
const CONNECTED_TOL: f64 = 1e-10;

/// Undirected graph with non-negative weights, stored as its Laplacian.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub n: usize,
    pub laplacian: Matrix,
    /// Laplacian eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    laplacian_flat: Vec<f64>,
}

impl GraphSpec {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn is_connected(&self) -> bool {
        self.lambda2() > CONNECTED_TOL
    }

    /// Laplacian entry `G[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.laplacian_flat[i * self.n + j]
    }
}

/// Builds `G = D - A` from a symmetric, non-negative adjacency matrix with
/// zero diagonal.
pub fn from_adjacency(adjacency: &[Vec<f64>]) -> Result<GraphSpec> {
    let n = adjacency.len();
    if n < 2 {
        return Err(Error::InvalidAdjacency("need at least two nodes".into()));
    }
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidAdjacency(format!(
                "row {i} has length {}, expected {n}",
                row.len()
            )));
        }
        for (j, &a) in row.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidAdjacency(format!(
                    "entry ({i}, {j}) = {a} is not a non-negative weight"
                )));
            }
            if i == j && a != 0.0 {
                return Err(Error::InvalidAdjacency(format!(
                    "diagonal entry ({i}, {i}) must be zero"
                )));
            }
            if a != adjacency[j][i] {
                return Err(Error::InvalidAdjacency(format!(
                    "entries ({i}, {j}) and ({j}, {i}) differ"
                )));
            }
        }
    }
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                flat[i * n + j] = -adjacency[i][j];
                flat[i * n + i] += adjacency[i][j];
            }
        }
    }
    let laplacian = Matrix::from_real(n, n, &flat)?;
    let mut eig: Vec<f64> = eigenvalues(&laplacian)?.iter().map(|z| z.re).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(GraphSpec {
        n,
        laplacian,
        eigenvalues: eig,
        laplacian_flat: flat,
    })
}

pub fn complete_graph(n: usize) -> Result<GraphSpec> {
    let adj: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    from_adjacency(&adj)
}

/// Cycle graph; for `n = 2` a single edge.
pub fn ring_graph(n: usize) -> Result<GraphSpec> {
    let mut adj = vec![vec![0.0; n]; n];
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j {
            adj[i][j] = 1.0;
            adj[j][i] = 1.0;
        }
    }
    from_adjacency(&adj)
}

pub fn path_graph(n: usize) -> Result<GraphSpec> {
    let mut adj = vec![vec![0.0; n]; n];
    for i in 0..n.saturating_sub(1) {
        adj[i][i + 1] = 1.0;
        adj[i + 1][i] = 1.0;
    }
    from_adjacency(&adj)
}

/// Coupling gain, diagonal 0/1 mask `DH` and the time the coupling switches on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    #[serde(rename = "K")]
    pub k: f64,
    pub mask: Vec<f64>,
    pub activation_time: f64,
}

impl CouplingSpec {
    pub fn new(k: f64, mask: Vec<f64>, activation_time: f64) -> Self {
        Self {
            k,
            mask,
            activation_time,
        }
    }

    pub fn validate(&self, model: &OscillatorModel) -> Result<()> {
        if self.mask.len() != model.dim() {
            return Err(Error::DimensionMismatch(format!(
                "coupling mask has {} entries, model {} has dimension {}",
                self.mask.len(),
                model.name(),
                model.dim()
            )));
        }
        if self.mask.iter().any(|&d| d != 0.0 && d != 1.0) {
            return Err(Error::InvalidParam(
                "coupling mask entries must be 0 or 1".into(),
            ));
        }
        if !self.k.is_finite() {
            return Err(Error::InvalidParam("coupling gain must be finite".into()));
        }
        if !(self.activation_time.is_finite() && self.activation_time >= 0.0) {
            return Err(Error::InvalidParam(
                "activation time must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `X' = F(X) - K (G kron DH) X` for `n` copies of a model.
#[derive(Debug, Clone)]
pub struct CoupledField<'a> {
    model: &'a OscillatorModel,
    graph: &'a GraphSpec,
    k: f64,
    mask: Vec<f64>,
}

impl<'a> CoupledField<'a> {
    pub fn dim(&self) -> usize {
        self.graph.n * self.model.dim()
    }

    pub fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let m = self.model.dim();
        let n = self.graph.n;
        for i in 0..n {
            self.model
                .field(&x[i * m..(i + 1) * m], &mut dx[i * m..(i + 1) * m]);
        }
        if self.k == 0.0 {
            return;
        }
        // Pairwise differences vanish exactly on the synchronization manifold.
        for i in 0..n {
            for j in 0..n {
                let a = -self.graph.entry(i, j);
                if i == j || a == 0.0 {
                    continue;
                }
                for c in 0..m {
                    dx[i * m + c] += self.k * a * self.mask[c] * (x[j * m + c] - x[i * m + c]);
                }
            }
        }
    }

    /// Row-major Jacobian `blockdiag(Df(x_i)) - K (G kron DH)`.
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.model.dim();
        let n = self.graph.n;
        let dim = n * m;
        out.fill(0.0);
        let mut block = vec![0.0; m * m];
        for i in 0..n {
            self.model.jacobian_into(&x[i * m..(i + 1) * m], &mut block);
            for r in 0..m {
                let row = (i * m + r) * dim + i * m;
                out[row..row + m].copy_from_slice(&block[r * m..(r + 1) * m]);
            }
        }
        if self.k == 0.0 {
            return;
        }
        for i in 0..n {
            for j in 0..n {
                let g = self.graph.entry(i, j);
                if g == 0.0 {
                    continue;
                }
                for c in 0..m {
                    out[(i * m + c) * dim + j * m + c] -= self.k * g * self.mask[c];
                }
            }
        }
    }
}

pub fn assemble_coupled_field<'a>(
    model: &'a OscillatorModel,
    graph: &'a GraphSpec,
    coupling: &CouplingSpec,
) -> Result<CoupledField<'a>> {
    coupling.validate(model)?;
    Ok(CoupledField {
        model,
        graph,
        k: coupling.k,
        mask: coupling.mask.clone(),
    })
}

/// Largest coordinate-wise difference between any two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSeries {
    pub times: Vec<f64>,
    pub error: Vec<f64>,
}

impl SyncSeries {
    pub fn final_error(&self) -> f64 {
        *self.error.last().unwrap_or(&0.0)
    }

    /// Largest error at or after `t`.
    pub fn max_after(&self, t: f64) -> f64 {
        self.iter_after(t).fold(0.0, f64::max)
    }

    /// Smallest error at or after `t`.
    pub fn min_after(&self, t: f64) -> f64 {
        self.iter_after(t).fold(f64::INFINITY, f64::min)
    }

    /// First grid time after which the error stays below `threshold`.
    pub fn converged_at(&self, threshold: f64) -> Option<f64> {
        let last_bad = self.error.iter().rposition(|&e| e >= threshold);
        match last_bad {
            None => self.times.first().copied(),
            Some(i) if i + 1 < self.times.len() => Some(self.times[i + 1]),
            Some(_) => None,
        }
    }

    fn iter_after(&self, t: f64) -> impl Iterator<Item = f64> + '_ {
        self.times
            .iter()
            .zip(&self.error)
            .filter(move |(s, _)| **s >= t)
            .map(|(_, e)| *e)
    }
}

/// Synchronization error of a single network state.
pub fn state_sync_error(x: &[f64], n: usize, m: usize) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            lo = lo.min(x[i * m + c]);
            hi = hi.max(x[i * m + c]);
        }
        worst = worst.max(hi - lo);
    }
    worst
}

/// Synchronization error at every stored node of a network trajectory.
pub fn sync_error(traj: &Trajectory, n: usize, m: usize) -> Result<SyncSeries> {
    if traj.dim() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "trajectory dimension {} is not {n} x {m}",
            traj.dim()
        )));
    }
    Ok(SyncSeries {
        times: traj.times().to_vec(),
        error: traj.states().map(|x| state_sync_error(x, n, m)).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub trajectory: Trajectory,
    pub sync: SyncSeries,
    /// Output grid states, one vector of length `n * m` per grid time.
    pub grid_states: Vec<Vec<f64>>,
}

pub fn simulate_network(
    model: &OscillatorModel,
    graph: &GraphSpec,
    coupling: &CouplingSpec,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<NetworkRun> {
    simulate_network_with(model, graph, coupling, x0, t_end, cfg, DEFAULT_GRID_POINTS)
}

/// Integrates uncoupled up to the activation time and coupled afterwards,
/// then samples the synchronization error on a uniform grid over `[0, t_end]`.
pub fn simulate_network_with(
    model: &OscillatorModel,
    graph: &GraphSpec,
    coupling: &CouplingSpec,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    grid_points: usize,
) -> Result<NetworkRun> {
    let coupled = assemble_coupled_field(model, graph, coupling)?;
    let (n, m) = (graph.n, model.dim());
    if x0.len() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, network needs {}",
            x0.len(),
            n * m
        )));
    }
    let t_on = coupling.activation_time;
    if !(t_end > t_on) {
        return Err(Error::InvalidParam(format!(
            "t_end = {t_end} must exceed the activation time {t_on}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidParam(
            "output grid needs at least two points".into(),
        ));
    }
    let free = CouplingSpec {
        k: 0.0,
        ..coupling.clone()
    };
    let uncoupled = assemble_coupled_field(model, graph, &free)?;
    let f_free = |x: &[f64], dx: &mut [f64]| uncoupled.eval(x, dx);
    let j_free = |x: &[f64], out: &mut [f64]| uncoupled.jacobian_into(x, out);
    let f_on = |x: &[f64], dx: &mut [f64]| coupled.eval(x, dx);
    let j_on = |x: &[f64], out: &mut [f64]| coupled.jacobian_into(x, out);
    // Repulsive coupling drives some models into stiff regimes on the way
    // to divergence, hence the switching integrator.
    let trajectory = if t_on > 0.0 {
        let mut first = integrate_switching(&f_free, &j_free, x0, (0.0, t_on), cfg)?;
        let second = integrate_switching(&f_on, &j_on, first.last_state(), (t_on, t_end), cfg)?;
        first.append(second)?;
        first
    } else {
        integrate_switching(&f_on, &j_on, x0, (0.0, t_end), cfg)?
    };
    let mut times = Vec::with_capacity(grid_points);
    let mut error = Vec::with_capacity(grid_points);
    let mut grid_states = Vec::with_capacity(grid_points);
    for k in 0..grid_points {
        let t = if k + 1 == grid_points {
            t_end
        } else {
            t_end * k as f64 / (grid_points - 1) as f64
        };
        let mut x = vec![0.0; n * m];
        trajectory.eval_into(t, &mut x)?;
        times.push(t);
        error.push(state_sync_error(&x, n, m));
        grid_states.push(x);
    }
    Ok(NetworkRun {
        trajectory,
        sync: SyncSeries { times, error },
        grid_states,
    })
}

//! Feedback policies from a value field.
//!
//! The optimal control is `u* = -R⁻¹ Gᵀ ∇V`. Gradients are per-cell centered
//! differences (one-sided next to non-free cells), interpolated multilinearly
//! between cell centers. Continuous states are in native axis units (degrees
//! on angular axes); velocities, noise and gradients are in metric units.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::{CSpaceMap, CellClass, GridSpec};
use crate::error::{Error, Result};
use crate::pde::{PdeProblem, PdeVariant};
use crate::transform::{transform_boundary, ControlModel, ValueField};

/// Corner cells and weights for multilinear interpolation at `x`.
fn corners(grid: &GridSpec, x: &[f64]) -> Vec<(usize, f64)> {
    let dim = grid.dim();
    let mut lo = vec![0usize; dim];
    let mut hi = vec![0usize; dim];
    let mut t = vec![0.0; dim];
    for a in 0..dim {
        let axis = grid.axis(a);
        let n = grid.counts()[a];
        let mut u = (x[a] - axis.min) / axis.spacing - 0.5;
        if axis.periodic {
            u = u.rem_euclid(n as f64);
            let i0 = (u.floor() as usize).min(n - 1);
            lo[a] = i0;
            hi[a] = (i0 + 1) % n;
            t[a] = u - i0 as f64;
        } else {
            let u = u.clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n.saturating_sub(2));
            lo[a] = i0;
            hi[a] = (i0 + 1).min(n - 1);
            t[a] = u - i0 as f64;
        }
    }
    let mut out = Vec::with_capacity(1 << dim);
    let mut coords = vec![0usize; dim];
    for mask in 0..(1usize << dim) {
        let mut w = 1.0;
        for a in 0..dim {
            if mask & (1 << a) != 0 {
                coords[a] = hi[a];
                w *= t[a];
            } else {
                coords[a] = lo[a];
                w *= 1.0 - t[a];
            }
        }
        out.push((grid.index(&coords), w));
    }
    out
}

/// Gradient of `values` at a free cell, in metric units.
fn cell_gradient(map: &CSpaceMap, values: &[f64], i: usize) -> Vec<f64> {
    let grid = map.grid();
    (0..grid.dim())
        .map(|a| {
            let h = grid.axis(a).metric_spacing();
            let free = |j: Option<usize>| j.filter(|&j| map.cell(j).is_free());
            match (free(grid.neighbor(i, a, -1)), free(grid.neighbor(i, a, 1))) {
                (Some(m), Some(p)) => (values[p] - values[m]) / (2.0 * h),
                (None, Some(p)) => (values[p] - values[i]) / h,
                (Some(m), None) => (values[i] - values[m]) / h,
                (None, None) => 0.0,
            }
        })
        .collect()
}

fn interpolate_gradient(map: &CSpaceMap, x: &[f64], grad_at: impl Fn(usize) -> Vec<f64>) -> Result<Vec<f64>> {
    match map.classify(x) {
        Some((_, CellClass::Free)) => {}
        _ => return Err(Error::NotFree),
    }
    let dim = map.grid().dim();
    let mut g = vec![0.0; dim];
    let mut total = 0.0;
    for (j, w) in corners(map.grid(), x) {
        if w == 0.0 || !map.cell(j).is_free() {
            continue;
        }
        for (ga, ca) in g.iter_mut().zip(grad_at(j)) {
            *ga += w * ca;
        }
        total += w;
    }
    if total > 0.0 {
        g.iter_mut().for_each(|v| *v /= total);
    }
    Ok(g)
}

/// Interpolated `∇V` at a free point `x`.
pub fn sample_gradient(map: &CSpaceMap, field: &ValueField, x: &[f64]) -> Result<Vec<f64>> {
    if field.values.len() != map.grid().len() {
        return Err(Error::DimensionMismatch { expected: map.grid().len(), got: field.values.len() });
    }
    if x.len() != map.grid().dim() {
        return Err(Error::DimensionMismatch { expected: map.grid().dim(), got: x.len() });
    }
    interpolate_gradient(map, x, |j| cell_gradient(map, &field.values, j))
}

/// A solved problem together with its value field and control model.
pub struct PolicyContext<'a> {
    problem: &'a PdeProblem,
    value: ValueField,
    control: ControlModel,
    gradients: Vec<f64>,
}

impl<'a> PolicyContext<'a> {
    pub fn new(problem: &'a PdeProblem, value: ValueField, control: ControlModel) -> Result<Self> {
        let map = &problem.map;
        let (n, dim) = (map.grid().len(), map.grid().dim());
        if value.values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: value.values.len() });
        }
        if control.state_dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: control.state_dim() });
        }
        let mut gradients = vec![0.0; n * dim];
        for i in (0..n).filter(|&i| map.cell(i).is_free()) {
            gradients[i * dim..(i + 1) * dim].copy_from_slice(&cell_gradient(map, &value.values, i));
        }
        Ok(PolicyContext { problem, value, control, gradients })
    }

    pub fn problem(&self) -> &PdeProblem {
        self.problem
    }

    pub fn map(&self) -> &CSpaceMap {
        &self.problem.map
    }

    pub fn grid(&self) -> &GridSpec {
        self.problem.map.grid()
    }

    pub fn value(&self) -> &ValueField {
        &self.value
    }

    pub fn control(&self) -> &ControlModel {
        &self.control
    }

    pub fn sample_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.grid().dim() {
            return Err(Error::DimensionMismatch { expected: self.grid().dim(), got: x.len() });
        }
        let dim = self.grid().dim();
        interpolate_gradient(self.map(), x, |j| self.gradients[j * dim..(j + 1) * dim].to_vec())
    }

    /// `u* = -R⁻¹ Gᵀ ∇V(x)`.
    pub fn optimal_control(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.control.optimal_control(&self.sample_gradient(x)?))
    }

    /// Multilinear interpolation of `V`, including boundary values.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        corners(self.grid(), x)
            .into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|(j, w)| w * self.value.values[j])
            .sum()
    }

    /// Interpolated `V` over free and goal corners only, so that boundary
    /// values of nearby obstacles do not mask descent along walls.
    pub fn passable_value_at(&self, x: &[f64]) -> f64 {
        let (mut sum, mut total) = (0.0, 0.0);
        for (j, w) in corners(self.grid(), x) {
            let c = self.map().cell(j);
            if w != 0.0 && (c.is_free() || c.is_goal()) {
                sum += w * self.value.values[j];
                total += w;
            }
        }
        if total > 0.0 {
            sum / total
        } else {
            f64::INFINITY
        }
    }

    /// Closed-loop velocity `f(x) + G u` and the control `u`, metric units.
    fn velocity(&self, x: &[f64], cell: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let u = self.optimal_control(x)?;
        let mut v = self.control.actuate(&u);
        for (a, va) in v.iter_mut().enumerate() {
            *va += self.problem.drift_at(cell, a);
        }
        Ok((u, v))
    }
}

/// Shortest displacement from `from` to `to` in metric units.
fn metric_offset(grid: &GridSpec, from: &[f64], to: &[f64]) -> Vec<f64> {
    (0..grid.dim())
        .map(|a| {
            let axis = grid.axis(a);
            let mut d = to[a] - from[a];
            if axis.periodic {
                let p = axis.period();
                d = (d + p / 2.0).rem_euclid(p) - p / 2.0;
            }
            d * axis.metric_scale()
        })
        .collect()
}

/// Center of the lowest-valued free or goal face neighbor of `cell`, if it is
/// lower than `cell` itself. The two cells together form a box, so the segment
/// from any point of `cell` to that center stays inside them.
fn lowest_neighbor(ctx: &PolicyContext, cell: usize) -> Option<Vec<f64>> {
    let grid = ctx.grid();
    let values = &ctx.value().values;
    (0..grid.dim())
        .flat_map(|a| [grid.neighbor(cell, a, -1), grid.neighbor(cell, a, 1)])
        .flatten()
        .filter(|&k| {
            let c = ctx.map().cell(k);
            (c.is_free() || c.is_goal()) && values[k] < values[cell]
        })
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .map(|k| grid.center(k))
}

fn advance(grid: &GridSpec, x: &[f64], metric_step: &[f64]) -> Vec<f64> {
    let mut y: Vec<f64> = x
        .iter()
        .zip(metric_step)
        .enumerate()
        .map(|(a, (xa, d))| xa + d / grid.axis(a).metric_scale())
        .collect();
    grid.wrap(&mut y);
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Goal,
    Obstacle,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States in native axis units.
    pub states: Vec<Vec<f64>>,
    /// Control applied at each state; one fewer entry than `states`.
    pub controls: Vec<Vec<f64>>,
    pub cells: Vec<CellClass>,
    pub outcome: Outcome,
    pub cost: f64,
}

impl Trajectory {
    pub fn exit_time(&self) -> f64 {
        *self.times.last().expect("trajectory has a start state")
    }

    /// Path length in metric units, shortest way around periodic axes.
    pub fn length(&self, grid: &GridSpec) -> f64 {
        self.states
            .windows(2)
            .map(|w| {
                metric_offset(grid, &w[0], &w[1]).iter().map(|d| d * d).sum::<f64>().sqrt()
            })
            .sum()
    }

    /// Visited cells with consecutive repeats removed.
    pub fn cell_sequence(&self, grid: &GridSpec) -> Vec<usize> {
        let mut seq: Vec<usize> = self.states.iter().filter_map(|x| grid.locate(x)).collect();
        seq.dedup();
        seq
    }
}

fn start_cell(map: &CSpaceMap, x: &[f64]) -> Result<(usize, CellClass)> {
    if x.len() != map.grid().dim() {
        return Err(Error::DimensionMismatch { expected: map.grid().dim(), got: x.len() });
    }
    map.classify(x).ok_or(Error::NotFree)
}

fn terminal(cell: Option<(usize, CellClass)>) -> Option<(Outcome, f64, CellClass)> {
    match cell {
        Some((_, c @ CellClass::Goal(phi))) => Some((Outcome::Goal, phi, c)),
        Some((_, c @ (CellClass::Obstacle(phi) | CellClass::Exterior(phi)))) => Some((Outcome::Obstacle, phi, c)),
        Some((_, CellClass::Free)) => None,
        None => unreachable!("states are wrapped or rejected before classification"),
    }
}

/// Deterministic descent along the closed-loop velocity.
///
/// Each step moves `step` metric units along `f + G u*`, and time advances by
/// `step / |f + G u*|`, so this is explicit Euler with an adaptive time step.
/// A step that would raise the interpolated value is halved until it does
/// not; if no such step exists the path ends with `Outcome::Timeout`.
pub fn extract_path(ctx: &PolicyContext, start: &[f64], step: f64, max_steps: usize) -> Result<Trajectory> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let map = ctx.map();
    let grid = map.grid();
    let (mut cell, class) = start_cell(map, start)?;
    let mut x = start.to_vec();
    grid.wrap(&mut x);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        controls: Vec::new(),
        cells: vec![class],
        outcome: Outcome::Timeout,
        cost: 0.0,
    };
    match class {
        CellClass::Goal(phi) => {
            traj.outcome = Outcome::Goal;
            traj.cost = phi;
            return Ok(traj);
        }
        CellClass::Free => {}
        _ => return Err(Error::NotFree),
    }
    let min_step = step * 1e-6;
    let mut t = 0.0;
    for _ in 0..max_steps {
        let (u, v) = ctx.velocity(&x, cell)?;
        let speed = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(speed > 0.0 && speed.is_finite()) {
            break;
        }
        let v0 = ctx.passable_value_at(&x);
        let descend = |dir: &[f64], longest: f64| {
            let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
            let mut s = step.min(longest);
            loop {
                let trial = advance(grid, &x, &dir.iter().map(|c| s * c / norm).collect::<Vec<_>>());
                let passable = map.classify(&trial).is_some_and(|(_, c)| c.is_free() || c.is_goal());
                if passable && ctx.passable_value_at(&trial) <= v0 {
                    return Some((trial, s));
                }
                s /= 2.0;
                if s < min_step {
                    return None;
                }
            }
        };
        // next to walls the one-sided gradient can point into an obstacle;
        // fall back to heading for the lowest neighboring cell
        let next = descend(&v, f64::INFINITY).or_else(|| {
            let target = lowest_neighbor(ctx, cell)?;
            let offset = metric_offset(grid, &x, &target);
            let dist = offset.iter().map(|c| c * c).sum::<f64>().sqrt();
            descend(&offset, dist)
        });
        let Some((next, s)) = next else { break };
        let dt = s / speed;
        let q = ctx.problem.state_cost.at(cell);
        traj.cost += (q + ctx.control.effort(&u)) * dt;
        t += dt;
        x = next;
        let located = map.classify(&x);
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.controls.push(u);
        if let Some((outcome, phi, class)) = terminal(located) {
            traj.cells.push(class);
            traj.outcome = outcome;
            traj.cost += phi;
            return Ok(traj);
        }
        traj.cells.push(CellClass::Free);
        cell = located.expect("inside").0;
    }
    Ok(traj)
}

/// Largest time step whose per-axis noise standard deviation stays within one cell.
pub fn max_stable_dt(grid: &GridSpec, sigma_t: &[f64]) -> f64 {
    (0..grid.dim())
        .map(|a| grid.axis(a).metric_spacing().powi(2) / sigma_t[a])
        .fold(f64::INFINITY, f64::min)
}

/// Expected overshoot of a Gaussian random walk past a level, in units of
/// the per-step standard deviation.
const OVERSHOOT: f64 = 0.5826;

/// Walker step for which the mean overshoot past a cell edge is half a cell,
/// so walkers stop where the solver imposes its boundary data: at the
/// centers of the boundary cells.
pub fn fk_matched_dt(grid: &GridSpec, sigma_t: &[f64]) -> f64 {
    (0.5 / OVERSHOOT).powi(2) * max_stable_dt(grid, sigma_t)
}

fn check_dt(grid: &GridSpec, sigma_t: &[f64], dt: f64) -> Result<()> {
    let limit = max_stable_dt(grid, sigma_t);
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    // small slack so the recommended dt = limit passes after rounding
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::DtTooCoarse { dt, limit });
    }
    Ok(())
}

fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub dt: f64,
    pub trials: usize,
    pub seed: u64,
    /// Simulated time after which a trajectory counts as a timeout.
    pub max_time: f64,
    /// Multiplies the noise standard deviation; 0 gives deterministic rollouts.
    pub noise_scale: f64,
}

impl RolloutOptions {
    pub fn new(dt: f64, trials: usize, seed: u64) -> Self {
        RolloutOptions { dt, trials, seed, max_time: 1e3, noise_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStats {
    pub trials: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub p_hat: f64,
    pub p_stderr: f64,
    pub mean_cost: f64,
    pub cost_stderr: f64,
    pub mean_exit_time: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct RolloutSample {
    outcome: Outcome,
    cost: f64,
    time: f64,
}

fn rollout_one(ctx: &PolicyContext, start: &[f64], opts: &RolloutOptions, rng: &mut ChaCha8Rng) -> Result<RolloutSample> {
    let map = ctx.map();
    let grid = map.grid();
    let dim = grid.dim();
    let sigma = &ctx.problem.sigma_t;
    let spacing: Vec<f64> = (0..dim).map(|a| grid.axis(a).metric_spacing()).collect();
    let mut x = start.to_vec();
    let (mut cell, _) = start_cell(map, &x)?;
    let mut t = 0.0;
    let mut cost = 0.0;
    let mut dx = vec![0.0; dim];
    while t < opts.max_time {
        let (u, v) = ctx.velocity(&x, cell)?;
        // keep the deterministic displacement within half a cell per axis
        let mut dt = opts.dt;
        for a in 0..dim {
            if v[a] != 0.0 {
                dt = dt.min(0.5 * spacing[a] / v[a].abs());
            }
        }
        for a in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            dx[a] = v[a] * dt + opts.noise_scale * (sigma[a] * dt).sqrt() * z;
        }
        cost += (ctx.problem.state_cost.at(cell) + ctx.control.effort(&u)) * dt;
        t += dt;
        x = advance(grid, &x, &dx);
        let located = match map.classify(&x) {
            Some(hit) => hit,
            // left the bounding box: the nearest boundary cell decides
            None => map.classify(&clamp_to_grid(grid, &x)).expect("clamped into the domain"),
        };
        if let Some((outcome, phi, _)) = terminal(Some(located)) {
            return Ok(RolloutSample { outcome, cost: cost + phi, time: t });
        }
        cell = located.0;
    }
    Ok(RolloutSample { outcome: Outcome::Timeout, cost, time: t })
}

/// Closed-loop Euler–Maruyama rollouts of `dx = (f + G u*) dt + √Σt dω`.
///
/// Trajectory `k` draws from ChaCha8 stream `k` of `seed`, so results do not
/// depend on thread scheduling. Timeouts count as failures and contribute
/// their running cost only.
pub fn simulate_rollouts(ctx: &PolicyContext, start: &[f64], opts: &RolloutOptions) -> Result<RolloutStats> {
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    check_dt(ctx.grid(), &ctx.problem.sigma_t, opts.dt)?;
    match start_cell(ctx.map(), start)? {
        (_, CellClass::Free) => {}
        _ => return Err(Error::NotFree),
    }
    let samples = (0..opts.trials)
        .into_par_iter()
        .map(|k| rollout_one(ctx, start, opts, &mut stream_rng(opts.seed, k)))
        .collect::<Result<Vec<_>>>()?;

    let n = samples.len() as f64;
    let successes = samples.iter().filter(|s| s.outcome == Outcome::Goal).count();
    let collisions = samples.iter().filter(|s| s.outcome == Outcome::Obstacle).count();
    let p_hat = successes as f64 / n;
    let mean_cost = samples.iter().map(|s| s.cost).sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s.cost - mean_cost).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(RolloutStats {
        trials: samples.len(),
        successes,
        collisions,
        timeouts: samples.len() - successes - collisions,
        p_hat,
        p_stderr: (p_hat * (1.0 - p_hat) / n).sqrt(),
        mean_cost,
        cost_stderr: (var / n).sqrt(),
        mean_exit_time: samples.iter().map(|s| s.time).sum::<f64>() / n,
        seed: opts.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    pub dt: f64,
    pub walkers: usize,
    pub seed: u64,
    pub max_steps: usize,
}

impl FkOptions {
    pub fn new(dt: f64, walkers: usize, seed: u64) -> Self {
        FkOptions { dt, walkers, seed, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub timed_out: usize,
}

/// Feynman–Kac estimate of `Ψ(x)`: mean over uncontrolled diffusions of
/// `e^(-φ(x_T)/λ) · exp(-∫ q/λ dt)`.
pub fn fk_point_estimate(problem: &PdeProblem, x: &[f64], opts: &FkOptions) -> Result<FkEstimate> {
    if opts.walkers == 0 {
        return Err(Error::InvalidParameter("need at least one walker".into()));
    }
    let map = &problem.map;
    let grid = map.grid();
    check_dt(grid, &problem.sigma_t, opts.dt)?;
    let (start, class) = start_cell(map, x)?;
    if !class.is_free() {
        return Err(Error::NotFree);
    }
    let dim = grid.dim();
    let scale: Vec<f64> = problem.sigma_t.iter().map(|s| (s * opts.dt).sqrt()).collect();
    let lambda = problem.lambda;
    let discount = problem.variant != PdeVariant::LaplaceNavigation;

    let samples: Vec<Option<f64>> = (0..opts.walkers)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(opts.seed, k);
            let mut pos = x.to_vec();
            let mut cell = start;
            let mut exponent = 0.0;
            let mut dx = vec![0.0; dim];
            for _ in 0..opts.max_steps {
                if discount {
                    exponent += problem.state_cost.at(cell) * opts.dt / lambda;
                }
                for a in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    dx[a] = problem.drift_at(cell, a) * opts.dt + scale[a] * z;
                }
                pos = advance(grid, &pos, &dx);
                let phi = match grid.locate(&pos) {
                    None => Some(exterior_phi(map, &pos)),
                    Some(j) => {
                        cell = j;
                        map.cell(j).phi()
                    }
                };
                if let Some(phi) = phi {
                    return Some(transform_boundary(phi, lambda) * (-exponent).exp());
                }
            }
            None
        })
        .collect();

    let timed_out = samples.iter().filter(|s| s.is_none()).count();
    if timed_out * 100 > opts.walkers {
        return Err(Error::NonconvergentWalkers { timed_out, total: opts.walkers });
    }
    let n = opts.walkers as f64;
    let values: Vec<f64> = samples.iter().map(|s| s.unwrap_or(0.0)).collect();
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(FkEstimate { estimate: mean, stderr: (var / n).sqrt(), timed_out })
}

fn clamp_to_grid(grid: &GridSpec, pos: &[f64]) -> Vec<f64> {
    pos.iter()
        .enumerate()
        .map(|(a, &v)| {
            let axis = grid.axis(a);
            let eps = 1e-9 * axis.spacing;
            v.clamp(axis.min + eps, axis.max - eps)
        })
        .collect()
}

fn exterior_phi(map: &CSpaceMap, pos: &[f64]) -> f64 {
    map.classify(&clamp_to_grid(map.grid(), pos)).and_then(|(_, c)| c.phi()).unwrap_or(0.0)
}

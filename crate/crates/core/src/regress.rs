//! Fitting Riemannian polynomials to timed manifold-valued data.
//!
//! The objective is `E = (1/N) Σ d(γ(tᵢ), yᵢ)²` over the initial conditions
//! of an order-`k` polynomial. Its gradient comes from integrating the
//! adjoint system backward along the stored forward trajectory:
//!
//! ```text
//! ∇λ₀ = −Σᵢ R(vᵢ, λᵢ) v₁     ∇λᵢ = −λᵢ₋₁     λᵢ(T) = 0
//! ```
//!
//! with `λ₀` jumping by `(2/N) Log_{γ(tⱼ)} yⱼ` at each observation. The
//! gradient with respect to `(γ(0), vᵢ(0))` is `−λᵢ(0)`.
//!
//! Observation times are mapped affinely onto `[0, 1]` and snapped to the
//! nearest grid node (ties to the earlier node).

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{tolerance, Manifold, Point, Tangent};
use crate::polyflow::{
    collinearity_diagnostic, integrate_polynomial, node_index, PolynomialState, Trajectory,
};

/// Highest order accepted; the covariant Euler scheme stiffens quickly beyond it.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub point: Point,
}

/// Affine map from original time units onto the internal `[0, 1]` interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMap {
    pub origin: f64,
    pub scale: f64,
}

impl TimeMap {
    pub const IDENTITY: TimeMap = TimeMap {
        origin: 0.0,
        scale: 1.0,
    };

    /// Maps `[min, max]` of the given times onto `[0, 1]`. A single distinct
    /// time maps to 0.
    pub fn spanning(times: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in times {
            if !t.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite time {t}")));
            }
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if lo > hi {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        let scale = if hi > lo { hi - lo } else { 1.0 };
        Ok(Self { origin: lo, scale })
    }

    pub fn to_internal(&self, t: f64) -> f64 {
        (t - self.origin) / self.scale
    }

    pub fn to_original(&self, s: f64) -> f64 {
        self.origin + s * self.scale
    }

    /// Rescales internal velocities `vᵢ` to original time units (`vᵢ / scaleⁱ`).
    pub fn velocities_to_original(&self, vels: &[Tangent]) -> Vec<Tangent> {
        vels.iter()
            .enumerate()
            .map(|(i, v)| v / self.scale.powi(i as i32 + 1))
            .collect()
    }
}

/// Observations on the internal `[0, 1]` clock, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedDataset {
    pub observations: Vec<Observation>,
    pub horizon: f64,
    pub time_map: TimeMap,
}

impl TimedDataset {
    /// Rescales times onto `[0, 1]` and sorts stably by time.
    pub fn from_original(observations: Vec<Observation>) -> Result<Self> {
        let map = TimeMap::spanning(observations.iter().map(|o| o.time))?;
        Self::with_time_map(observations, map)
    }

    /// Uses the given map; internal times must land in `[0, 1]`.
    pub fn with_time_map(mut observations: Vec<Observation>, time_map: TimeMap) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one observation".into()));
        }
        for (i, o) in observations.iter_mut().enumerate() {
            let s = time_map.to_internal(o.time);
            if !(-1e-12..=1.0 + 1e-12).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "observation {i} maps to internal time {s}, outside [0, 1]"
                )));
            }
            o.time = s.clamp(0.0, 1.0);
        }
        observations.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self {
            observations,
            horizon: 1.0,
            time_map,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.observations.iter().map(|o| &o.point)
    }

    /// Grid node of every observation for a trajectory with `steps` steps.
    pub fn snap(&self, steps: usize) -> Result<Vec<usize>> {
        self.observations
            .iter()
            .map(|o| node_index(o.time, self.horizon, steps))
            .collect()
    }
}

/// Gradient of the objective with respect to `γ(0)` and each `vᵢ(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub base: Tangent,
    pub vels: Vec<Tangent>,
}

impl Gradient {
    /// `Σ ⟨aᵢ, bᵢ⟩` in the metric at `p`.
    pub fn dot(&self, manifold: &dyn Manifold, p: &Point, other: &Gradient) -> f64 {
        let mut acc = manifold.inner(p, &self.base, &other.base);
        for (a, b) in self.vels.iter().zip(&other.vels) {
            acc += manifold.inner(p, a, b);
        }
        acc
    }

    /// `sqrt(Σ |gᵢ|²)` in the metric at `p`.
    pub fn norm(&self, manifold: &dyn Manifold, p: &Point) -> f64 {
        self.dot(manifold, p, self).max(0.0).sqrt()
    }

    /// `self + c·other`, componentwise.
    fn axpy(&self, c: f64, other: &Gradient) -> Gradient {
        Gradient {
            base: &self.base + &other.base * c,
            vels: self.vels.iter().zip(&other.vels).map(|(a, b)| a + b * c).collect(),
        }
    }
}

/// Residual vectors `Log_{γ(tᵢ)} yᵢ` and the objective they define.
#[derive(Debug, Clone)]
pub struct Residuals {
    pub nodes: Vec<usize>,
    pub logs: Vec<Tangent>,
    pub distances: Vec<f64>,
    pub sse: f64,
}

/// Computes `(1/N) Σ d(γ(tᵢ), yᵢ)²` and keeps the logs for the adjoint pass.
pub fn residuals(manifold: &dyn Manifold, traj: &Trajectory, data: &TimedDataset) -> Result<Residuals> {
    if (traj.horizon - data.horizon).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "trajectory horizon {} does not match data horizon {}",
            traj.horizon, data.horizon
        )));
    }
    let nodes = data.snap(traj.steps())?;
    let mut logs = Vec::with_capacity(data.len());
    let mut distances = Vec::with_capacity(data.len());
    for (i, (obs, &n)) in data.observations.iter().zip(&nodes).enumerate() {
        let g = &traj.states[n].gamma;
        let l = manifold.log(g, &obs.point).map_err(|e| e.at_observation(i))?;
        distances.push(manifold.norm(g, &l));
        logs.push(l);
    }
    let sse = distances.iter().map(|d| d * d).sum::<f64>() / data.len() as f64;
    Ok(Residuals {
        nodes,
        logs,
        distances,
        sse,
    })
}

pub fn objective_sse(manifold: &dyn Manifold, traj: &Trajectory, data: &TimedDataset) -> Result<f64> {
    Ok(residuals(manifold, traj, data)?.sse)
}

/// Backward adjoint pass; `res` must come from [`residuals`] on the same trajectory.
pub fn integrate_adjoint(manifold: &dyn Manifold, traj: &Trajectory, res: &Residuals) -> Result<Gradient> {
    let steps = traj.steps();
    let k = traj.states[0].vels.len();
    let dt = traj.dt;
    let n_obs = res.logs.len() as f64;

    let mut jumps: Vec<Option<Tangent>> = vec![None; steps + 1];
    for (&n, l) in res.nodes.iter().zip(&res.logs) {
        let j = l * (2.0 / n_obs);
        match &mut jumps[n] {
            Some(acc) => *acc += j,
            slot => *slot = Some(j),
        }
    }

    let end = &traj.states[steps].gamma;
    let mut lam: Vec<Tangent> = (0..=k).map(|_| manifold.zero_tangent(end)).collect();
    if k > 0 {
        for n in (1..=steps).rev() {
            let s = &traj.states[n];
            let mut drift = manifold.zero_tangent(&s.gamma);
            for (v, l) in s.vels.iter().zip(&lam[1..]) {
                drift += manifold.curvature(&s.gamma, v, l, &s.vels[0]).map_err(|e| e.at_time(n))?;
            }
            lam[0] += drift * dt;
            if let Some(j) = &jumps[n] {
                lam[0] += j;
            }

            // Retrace the forward step in reverse: the velocity it arrived with.
            let prev = &traj.states[n - 1];
            let fwd = &prev.vels[0] * dt;
            let arrived = manifold
                .transport_step(&prev.gamma, &fwd, &fwd)
                .map_err(|e| e.at_time(n))?;
            let back = -arrived;
            let mut next = Vec::with_capacity(k + 1);
            for i in 0..=k {
                let raised = if i > 0 { &lam[i] + &lam[i - 1] * dt } else { lam[0].clone() };
                let moved = manifold
                    .transport_step(&s.gamma, &back, &raised)
                    .map_err(|e| e.at_time(n))?;
                next.push(manifold.project_tangent(&prev.gamma, &moved));
            }
            lam = next;
        }
    } else {
        // constant curve: every node is γ(0) and no transport is needed
        for j in jumps.iter().skip(1).flatten() {
            lam[0] += j;
        }
    }
    if let Some(j) = &jumps[0] {
        lam[0] += j;
    }

    let mut it = lam.into_iter().map(|l| -l);
    let base = it.next().expect("λ₀");
    Ok(Gradient {
        base,
        vels: it.collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub order: usize,
    /// Integration steps per unit (internal) time.
    pub steps: usize,
    pub max_iters: usize,
    /// Initial line-search step.
    pub step_size: f64,
    /// Convergence threshold on the metric norm of the full gradient.
    pub tol: f64,
    pub shrink: f64,
    pub grow: f64,
    /// Line search gives up below this step.
    pub min_step: f64,
    /// Start each line search at the Barzilai–Borwein step instead of the
    /// previous step times `grow`. Acceptance still requires a decrease.
    /// Only used by [`Descent::Steepest`].
    pub barzilai_borwein: bool,
    pub descent: Descent,
}

/// Search direction of the optimizer. Both keep every accepted step
/// non-increasing in the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Descent {
    /// Negative gradient.
    Steepest,
    /// Polak–Ribière+ conjugate gradient with the previous direction
    /// transported along the update, plus a parabolic step refinement.
    #[default]
    ConjugateGradient,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            order: 1,
            steps: crate::polyflow::DEFAULT_STEPS,
            max_iters: 2000,
            step_size: 0.1,
            tol: 1e-6,
            shrink: 0.5,
            grow: 1.2,
            min_step: 1e-14,
            barzilai_borwein: true,
            descent: Descent::ConjugateGradient,
        }
    }
}

impl FitConfig {
    pub fn with_order(&self, order: usize) -> Self {
        Self { order, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "order {} exceeds the supported maximum {MAX_ORDER}",
                self.order
            )));
        }
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if self.grow.is_nan() || self.grow < 1.0 {
            return bad("grow must be at least 1");
        }
        if self.min_step.is_nan() || self.min_step <= 0.0 {
            return bad("min_step must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub order: usize,
    /// Initial conditions on the internal `[0, 1]` clock.
    pub params: PolynomialState,
    /// Mean squared geodesic residual (the objective).
    pub sse: f64,
    pub frechet_variance: f64,
    /// `None` when the data has zero variance.
    pub r_squared: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub gradient_norm: f64,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    /// Only defined for `k ≥ 2` with nonzero `v₁`.
    pub collinearity: Option<f64>,
    pub residuals: Vec<f64>,
    pub trajectory: Trajectory,
}

/// `1 − sse / variance`; `None` when the variance vanishes.
pub fn r_squared(sse: f64, variance: f64) -> Option<f64> {
    if variance > 0.0 {
        Some(1.0 - sse / variance)
    } else {
        None
    }
}

/// `(1/N) Σ d(mean, yᵢ)²`.
pub fn frechet_variance<'a>(
    manifold: &dyn Manifold,
    mean: &Point,
    points: impl IntoIterator<Item = &'a Point>,
) -> Result<f64> {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (i, y) in points.into_iter().enumerate() {
        acc += manifold.dist(mean, y).map_err(|e| e.at_observation(i))?.powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("variance of an empty set".into()));
    }
    Ok(acc / n as f64)
}

/// Karcher iteration `μ ← Exp_μ((1/N) Σ Log_μ yᵢ)` started at the first point.
pub fn frechet_mean<'a>(manifold: &dyn Manifold, points: impl IntoIterator<Item = &'a Point>) -> Result<Point> {
    let pts: Vec<&Point> = points.into_iter().collect();
    let first = pts
        .first()
        .ok_or_else(|| Error::InvalidArgument("mean of an empty set".into()))?;
    let mut mu = manifold.project_point(first);
    let n = pts.len() as f64;
    let max_iter = 500;
    let mut step = f64::INFINITY;
    for _ in 0..max_iter {
        let mut g = manifold.zero_tangent(&mu);
        for (i, y) in pts.iter().enumerate() {
            g += manifold.log(&mu, y).map_err(|e| e.at_observation(i))?;
        }
        g /= n;
        step = manifold.norm(&mu, &g);
        if step < 1e-13 {
            return Ok(mu);
        }
        mu = manifold.project_point(&manifold.exp(&mu, &g)?);
    }
    if step < 1e-10 {
        return Ok(mu);
    }
    Err(Error::MeanNotConverged {
        iterations: max_iter,
        step,
    })
}

/// Moves `γ(0)` to `Exp(−η·g₀)` and transports `vᵢ − η·gᵢ` along the same geodesic.
fn update(
    manifold: &dyn Manifold,
    s: &PolynomialState,
    grad: &Gradient,
    eta: f64,
) -> Result<PolynomialState> {
    let dir = &grad.base * -eta;
    let gamma = manifold.project_point(&manifold.exp(&s.gamma, &dir)?);
    let mut vels = Vec::with_capacity(s.vels.len());
    for (v, g) in s.vels.iter().zip(&grad.vels) {
        let moved = manifold.transport(&s.gamma, &dir, &(v - g * eta))?;
        vels.push(manifold.project_tangent(&gamma, &moved));
    }
    Ok(PolynomialState { gamma, vels })
}

/// `⟨s,s⟩/⟨s,y⟩` with `s = −η·g_prev` and `y = g − g_prev`, both at the current point.
fn bb_step(manifold: &dyn Manifold, p: &Point, eta: f64, prev: &Gradient, grad: &Gradient) -> Option<f64> {
    let pairs = std::iter::once((&prev.base, &grad.base)).chain(prev.vels.iter().zip(&grad.vels));
    let (mut gg, mut gy) = (0.0, 0.0);
    for (a, b) in pairs {
        gg += manifold.inner(p, a, a);
        gy += manifold.inner(p, a, &(b - a));
    }
    // ⟨s,s⟩ = η²⟨g,g⟩ and ⟨s,y⟩ = −η⟨g,y⟩
    let sy = -eta * gy;
    (sy > 0.0).then(|| eta * eta * gg / sy)
}

/// Fits starting from the Fréchet mean with zero velocities.
pub fn fit_polynomial(manifold: &dyn Manifold, data: &TimedDataset, cfg: &FitConfig) -> Result<FitResult> {
    let mean = frechet_mean(manifold, data.points())?;
    let variance = frechet_variance(manifold, &mean, data.points())?;
    let init = PolynomialState::at_rest(mean).with_order(manifold, cfg.order);
    fit_from(manifold, data, cfg, init, variance)
}

/// Descent from `init` along [`FitConfig::descent`] with a monotone backtracking line search.
pub fn fit_from(
    manifold: &dyn Manifold,
    data: &TimedDataset,
    cfg: &FitConfig,
    init: PolynomialState,
    frechet_variance: f64,
) -> Result<FitResult> {
    cfg.validate()?;
    if init.order() != cfg.order {
        return Err(Error::InvalidArgument(format!(
            "initial state has order {}, config asks for {}",
            init.order(),
            cfg.order
        )));
    }
    if data.len() < cfg.order + 1 {
        warn!(
            "order {} fit to {} observations is underdetermined",
            cfg.order,
            data.len()
        );
    }
    let mut state = init;
    let mut traj = integrate_polynomial(manifold, &state, data.horizon, cfg.steps)?;
    let mut res = residuals(manifold, &traj, data)?;
    let mut trace = vec![res.sse];
    let mut eta = cfg.step_size;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    let mut gnorm = f64::INFINITY;
    // previous step, gradient and ascent direction, carried to the current point
    let mut memory: Option<(f64, Gradient, Gradient)> = None;
    let cg = cfg.descent == Descent::ConjugateGradient;
    let evaluate = |cand: PolynomialState| -> Result<(PolynomialState, Trajectory, Residuals)> {
        let t = integrate_polynomial(manifold, &cand, data.horizon, cfg.steps)?;
        let r = residuals(manifold, &t, data)?;
        Ok((cand, t, r))
    };

    while iterations < cfg.max_iters {
        let grad = integrate_adjoint(manifold, &traj, &res)?;
        gnorm = grad.norm(manifold, &state.gamma);
        if gnorm < cfg.tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        // the update moves along −ascent
        let mut ascent = grad.clone();
        if let Some((prev_eta, prev, prev_ascent)) = memory.take() {
            if cg {
                let y = grad.axpy(-1.0, &prev);
                let beta = (grad.dot(manifold, &state.gamma, &y) / prev.dot(manifold, &state.gamma, &prev)).max(0.0);
                let candidate = grad.axpy(beta, &prev_ascent);
                if beta.is_finite() && grad.dot(manifold, &state.gamma, &candidate) > 0.0 {
                    ascent = candidate;
                }
            } else if cfg.barzilai_borwein {
                if let Some(bb) = bb_step(manifold, &state.gamma, prev_eta, &prev, &grad) {
                    eta = bb.clamp(cfg.min_step, 1e6);
                }
            }
        }
        let search = |ascent: &Gradient, mut eta: f64| {
            while eta >= cfg.min_step {
                match update(manifold, &state, ascent, eta).and_then(evaluate) {
                    Ok(trial) if trial.2.sse < res.sse => return Some((eta, trial)),
                    Ok(_) => {}
                    Err(e) => debug!("trial step {eta:e} rejected: {e}"),
                }
                eta *= cfg.shrink;
            }
            None
        };
        let mut accepted = search(&ascent, eta);
        if accepted.is_none() && ascent != grad {
            // restart along the gradient
            ascent = grad.clone();
            accepted = search(&ascent, eta);
        }
        let Some((found, mut best)) = accepted else {
            stop = StopReason::LineSearchStalled;
            break;
        };
        eta = found;
        if cg {
            // minimizer of the parabola through f(0), f'(0) and f(η)
            let slope = -grad.dot(manifold, &state.gamma, &ascent);
            let curv = best.2.sse - res.sse - slope * eta;
            let refined = -slope * eta * eta / (2.0 * curv);
            if curv > 0.0 && refined.is_finite() && refined > cfg.min_step && refined != eta {
                match update(manifold, &state, &ascent, refined).and_then(evaluate) {
                    Ok(trial) if trial.2.sse < best.2.sse => {
                        best = trial;
                        eta = refined;
                    }
                    Ok(_) => {}
                    Err(e) => debug!("refined step {refined:e} rejected: {e}"),
                }
            }
        }
        let (cand, t, r) = best;
        let diag = manifold.validate_point(&cand.gamma);
        if let Some(w) = diag.residuals.iter().find(|r| r.residual > tolerance::DRIFT) {
            return Err(Error::InvariantDrift {
                name: w.name,
                residual: w.residual,
            });
        }
        if cg || cfg.barzilai_borwein {
            let dir = &ascent.base * -eta;
            let carry_one = |g: &Tangent| -> Result<Tangent> {
                Ok(manifold.project_tangent(&cand.gamma, &manifold.transport(&state.gamma, &dir, g)?))
            };
            let carry = |g: &Gradient| -> Result<Gradient> {
                Ok(Gradient {
                    base: carry_one(&g.base)?,
                    vels: g.vels.iter().map(carry_one).collect::<Result<_>>()?,
                })
            };
            memory = Some((eta, carry(&grad)?, carry(&ascent)?));
        }
        state = cand;
        traj = t;
        res = r;
        trace.push(res.sse);
        eta *= cfg.grow;
        iterations += 1;
    }

    let collinearity = if cfg.order >= 2 {
        collinearity_diagnostic(manifold, &state).ok()
    } else {
        None
    };
    Ok(FitResult {
        order: cfg.order,
        params: state,
        sse: res.sse,
        frechet_variance,
        r_squared: r_squared(res.sse, frechet_variance),
        iterations,
        converged: stop == StopReason::GradientTolerance,
        stop_reason: stop,
        gradient_norm: gnorm,
        trace,
        collinearity,
        residuals: res.distances,
        trajectory: traj,
    })
}

/// Fits every requested order. With `warm_start`, orders run ascending and
/// each starts from the previous fit padded with a zero vector; otherwise
/// they run in parallel from the mean. Results follow the input order.
pub fn fit_orders(
    manifold: &dyn Manifold,
    data: &TimedDataset,
    orders: &[usize],
    cfg: &FitConfig,
    warm_start: bool,
) -> Result<Vec<FitResult>> {
    for &k in orders {
        cfg.with_order(k).validate()?;
    }
    let mean = frechet_mean(manifold, data.points())?;
    let variance = frechet_variance(manifold, &mean, data.points())?;
    let start = PolynomialState::at_rest(mean);

    if !warm_start {
        return orders
            .par_iter()
            .map(|&k| fit_from(manifold, data, &cfg.with_order(k), start.with_order(manifold, k), variance))
            .collect();
    }

    let mut sorted: Vec<usize> = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut done: Vec<FitResult> = Vec::with_capacity(sorted.len());
    for &k in &sorted {
        let init = match done.last() {
            Some(prev) => prev.params.with_order(manifold, k),
            None => start.with_order(manifold, k),
        };
        done.push(fit_from(manifold, data, &cfg.with_order(k), init, variance)?);
    }
    Ok(orders
        .iter()
        .map(|k| done.iter().find(|r| r.order == *k).expect("fit for every order").clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Euclidean;
    use crate::sphere::Sphere;
    use nalgebra::DVector;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn obs(t: f64, p: &[f64]) -> Observation {
        Observation { time: t, point: v(p) }
    }

    #[test]
    fn time_map_rescales_to_unit_interval() {
        let d = TimedDataset::from_original(vec![obs(150.0, &[1.0]), obs(7.0, &[0.0]), obs(40.0, &[2.0])]).unwrap();
        let ts: Vec<f64> = d.observations.iter().map(|o| o.time).collect();
        assert_eq!(ts[0], 0.0);
        assert_eq!(ts[2], 1.0);
        assert!((ts[1] - 33.0 / 143.0).abs() < 1e-15);
        assert_eq!(d.time_map.to_original(1.0), 150.0);
    }

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared(0.3, 0.3), Some(0.0));
        assert_eq!(r_squared(0.0, 0.3), Some(1.0));
        assert_eq!(r_squared(0.0, 0.0), None);
    }

    #[test]
    fn objective_single_observation_is_squared_distance() {
        let m = Sphere::new(2).unwrap();
        let theta: f64 = 0.7;
        let data = TimedDataset::with_time_map(vec![obs(0.5, &[theta.cos(), theta.sin(), 0.0])], TimeMap::IDENTITY).unwrap();
        let s = PolynomialState::at_rest(v(&[1.0, 0.0, 0.0]));
        let traj = integrate_polynomial(&m, &s, 1.0, 10).unwrap();
        assert!((objective_sse(&m, &traj, &data).unwrap() - theta * theta).abs() < 1e-14);
    }

    #[test]
    fn objective_and_gradient_vanish_on_exact_samples() {
        let m = Sphere::new(2).unwrap();
        let s = PolynomialState::new(v(&[0.0, 0.0, 1.0]), vec![v(&[0.5, 0.2, 0.0]), v(&[0.0, 0.3, 0.0])]);
        let traj = integrate_polynomial(&m, &s, 1.0, 100).unwrap();
        let data = TimedDataset::with_time_map(
            [0.0, 0.13, 0.5, 0.77, 1.0]
                .iter()
                .map(|&t| Observation {
                    time: t,
                    point: traj.states[traj.node_index(t).unwrap()].gamma.clone(),
                })
                .collect(),
            TimeMap::IDENTITY,
        )
        .unwrap();
        let res = residuals(&m, &traj, &data).unwrap();
        assert!(res.sse < 1e-20);
        let g = integrate_adjoint(&m, &traj, &res).unwrap();
        assert!(g.norm(&m, &s.gamma) < 1e-8);
    }

    #[test]
    fn order_zero_gradient_is_mean_log() {
        let m = Sphere::new(2).unwrap();
        let p = v(&[0.0, 0.0, 1.0]);
        let ys = [v(&[0.6, 0.0, 0.8]), v(&[0.0, 0.6, 0.8]), v(&[0.0, -0.28, 0.96])];
        let data = TimedDataset::with_time_map(
            ys.iter().zip([0.0, 0.4, 1.0]).map(|(y, t)| Observation { time: t, point: y.clone() }).collect(),
            TimeMap::IDENTITY,
        )
        .unwrap();
        let traj = integrate_polynomial(&m, &PolynomialState::at_rest(p.clone()), 1.0, 20).unwrap();
        let g = integrate_adjoint(&m, &traj, &residuals(&m, &traj, &data).unwrap()).unwrap();
        let expected = ys.iter().fold(DVector::zeros(3), |acc, y| acc + crate::sphere::log(&p, y).unwrap()) * (-2.0 / 3.0);
        assert!((g.base - expected).norm() < 1e-15);
        assert!(g.vels.is_empty());
    }

    #[test]
    fn two_point_sphere_mean() {
        let m = Sphere::new(2).unwrap();
        let data = TimedDataset::from_original(vec![obs(0.0, &[1.0, 0.0, 0.0]), obs(1.0, &[0.0, 1.0, 0.0])]).unwrap();
        let fit = fit_polynomial(&m, &data, &FitConfig::default().with_order(0)).unwrap();
        assert!((&fit.params.gamma - v(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0])).norm() < 1e-12);
        assert!((fit.frechet_variance - FRAC_PI_4 * FRAC_PI_4).abs() < 1e-12);
        assert!(fit.r_squared.unwrap().abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn euclidean_mean_is_arithmetic() {
        let m = Euclidean::new(2);
        let pts = [v(&[1.0, 2.0]), v(&[-3.0, 0.5]), v(&[0.25, 4.0]), v(&[7.0, -1.0])];
        let mu = frechet_mean(&m, pts.iter()).unwrap();
        assert!((mu - v(&[1.3125, 1.375])).norm() < 1e-10);
        let same = [v(&[0.5, 0.5]), v(&[0.5, 0.5])];
        assert_eq!(frechet_mean(&m, same.iter()).unwrap(), v(&[0.5, 0.5]));
    }

    #[test]
    fn euclidean_quadratic_recovers_least_squares() {
        let m = Euclidean::new(1);
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let data = TimedDataset::with_time_map(ts.iter().map(|&t| obs(t, &[t * t])).collect(), TimeMap::IDENTITY).unwrap();
        let cfg = FitConfig {
            order: 2,
            steps: 100,
            tol: 1e-10,
            max_iters: 20_000,
            ..FitConfig::default()
        };
        let fit = fit_polynomial(&m, &data, &cfg).unwrap();
        assert!(fit.converged, "{:?} after {} iterations", fit.stop_reason, fit.iterations);
        // on the grid the discrete curve is γ₀ + v₁t + v₂·t(t − Δt)/2, so t² needs v₂ = 2 and v₁ = Δt
        assert!(fit.sse < 1e-16);
        assert!((fit.params.gamma[0]).abs() < 1e-6);
        assert!((fit.params.vels[0][0] - 0.01).abs() < 1e-6);
        assert!((fit.params.vels[1][0] - 2.0).abs() < 1e-6);
    }

    fn wobbly_sphere_data() -> TimedDataset {
        TimedDataset::from_original(
            (0..12)
                .map(|i| {
                    let t = i as f64;
                    let p = v(&[(0.1 * t).cos(), (0.1 * t).sin() * (0.3 * t).cos(), 0.2 + 0.05 * (2.0 * t).sin()]);
                    Observation { time: t, point: &p / p.norm() }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn trace_never_increases() {
        let m = Sphere::new(2).unwrap();
        let data = wobbly_sphere_data();
        for descent in [Descent::Steepest, Descent::ConjugateGradient] {
            let cfg = FitConfig { order: 2, max_iters: 200, descent, ..FitConfig::default() };
            let fit = fit_polynomial(&m, &data, &cfg).unwrap();
            assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]), "{descent:?}");
            assert!(fit.sse <= fit.frechet_variance);
        }
    }

    #[test]
    fn descent_methods_agree() {
        let m = Sphere::new(2).unwrap();
        let data = wobbly_sphere_data();
        // the reverse pass differs from the exact discrete gradient by O(Δt),
        // so the tolerance stays above that floor
        let fit = |descent| {
            let cfg = FitConfig { order: 2, steps: 1000, max_iters: 20_000, tol: 1e-6, descent, ..FitConfig::default() };
            fit_polynomial(&m, &data, &cfg).unwrap()
        };
        let (sd, cg) = (fit(Descent::Steepest), fit(Descent::ConjugateGradient));
        assert!(sd.converged && cg.converged);
        assert!(cg.iterations < sd.iterations);
        assert!((sd.sse - cg.sse).abs() < 1e-8 * sd.sse);
        assert!(m.dist(&sd.params.gamma, &cg.params.gamma).unwrap() < 1e-4);
        for (a, b) in sd.params.vels.iter().zip(&cg.params.vels) {
            assert!((a - b).norm() < 1e-3 * a.norm().max(1.0));
        }
    }

    #[test]
    fn rejects_excessive_order() {
        let cfg = FitConfig::default().with_order(MAX_ORDER + 1);
        assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn warm_start_results_nest() {
        let m = Sphere::new(2).unwrap();
        let data = TimedDataset::from_original(
            (0..15)
                .map(|i| {
                    let t = i as f64 / 14.0;
                    let p = v(&[1.0, 1.2 * t - 0.4 * t * t, 0.3 * (5.0 * t).sin()]);
                    Observation { time: t, point: &p / p.norm() }
                })
                .collect(),
        )
        .unwrap();
        let cfg = FitConfig { max_iters: 300, ..FitConfig::default() };
        let fits = fit_orders(&m, &data, &[3, 1, 2], &cfg, true).unwrap();
        let sse: Vec<f64> = fits.iter().map(|f| f.sse).collect();
        assert!(sse[0] <= sse[2] + 1e-12 && sse[2] <= sse[1] + 1e-12, "{sse:?}");
    }
}

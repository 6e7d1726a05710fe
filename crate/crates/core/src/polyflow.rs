//! Forward integration of Riemannian polynomials.
//!
//! A polynomial of order `k` is determined by a point and `k` tangent
//! vectors there. Each step moves the point along `v₁` and carries every
//! `vᵢ + Δt·vᵢ₊₁` along that step by parallel transport, so that
//! `∇_{γ'} vᵢ = vᵢ₊₁` and `∇_{γ'} v_k = 0` hold to first order.

use crate::error::{Error, Result};
use crate::geometry::{check_dim, Manifold, Point, Tangent};

/// Default sub-steps per unit time.
pub const DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialState {
    pub gamma: Point,
    pub vels: Vec<Tangent>,
}

impl PolynomialState {
    pub fn new(gamma: Point, vels: Vec<Tangent>) -> Self {
        Self { gamma, vels }
    }

    /// Constant curve at `gamma`.
    pub fn at_rest(gamma: Point) -> Self {
        Self { gamma, vels: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.vels.len()
    }

    /// Same curve viewed as a member of the order-`k` family, padding with
    /// zero vectors or truncating.
    pub fn with_order(&self, manifold: &dyn Manifold, k: usize) -> Self {
        let mut vels = self.vels.clone();
        vels.resize_with(k, || manifold.zero_tangent(&self.gamma));
        Self {
            gamma: self.gamma.clone(),
            vels,
        }
    }

    pub fn check(&self, manifold: &dyn Manifold) -> Result<()> {
        check_dim(manifold.point_dim(), &self.gamma)?;
        let diag = manifold.validate_point(&self.gamma);
        if let Some(worst) = diag.failures().next() {
            return Err(Error::InvariantDrift {
                name: worst.name,
                residual: worst.residual,
            });
        }
        for v in &self.vels {
            check_dim(manifold.tangent_dim(), v)?;
            let residual = (manifold.project_tangent(&self.gamma, v) - v).norm();
            if residual > crate::geometry::tolerance::TANGENCY * v.norm().max(1.0) {
                return Err(Error::NotTangent { residual });
            }
        }
        Ok(())
    }
}

/// Every state on a uniform grid `tₙ = n·Δt`, `n = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub horizon: f64,
    pub dt: f64,
    pub states: Vec<PolynomialState>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps() {
            self.horizon
        } else {
            n as f64 * self.dt
        }
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.states.iter().map(|s| &s.gamma)
    }

    pub fn end(&self) -> &PolynomialState {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Index of the grid node nearest `t`; exact midpoints go to the earlier node.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        node_index(t, self.horizon, self.steps())
    }
}

pub fn node_index(t: f64, horizon: f64, steps: usize) -> Result<usize> {
    let slack = 1e-12 * horizon.abs().max(1.0);
    if !t.is_finite() || t < -slack || t > horizon + slack {
        return Err(Error::InvalidArgument(format!(
            "time {t} outside [0, {horizon}]"
        )));
    }
    let x = t / horizon * steps as f64;
    let below = x.floor();
    let idx = if x - below > 0.5 { below + 1.0 } else { below };
    Ok((idx.max(0.0) as usize).min(steps))
}

/// One covariant Euler step of size `dt`.
pub fn step_state(manifold: &dyn Manifold, s: &PolynomialState, dt: f64) -> Result<PolynomialState> {
    let k = s.vels.len();
    if k == 0 {
        return Ok(s.clone());
    }
    let dir = &s.vels[0] * dt;
    let mut vels = Vec::with_capacity(k);
    for i in 0..k {
        let raised = if i + 1 < k {
            &s.vels[i] + &s.vels[i + 1] * dt
        } else {
            s.vels[i].clone()
        };
        vels.push(manifold.transport_step(&s.gamma, &dir, &raised)?);
    }
    let gamma = manifold.project_point(&manifold.exp_step(&s.gamma, &dir)?);
    for v in vels.iter_mut() {
        *v = manifold.project_tangent(&gamma, v);
    }
    Ok(PolynomialState { gamma, vels })
}

/// Integrates `s0` over `[0, horizon]` in `steps` uniform steps.
pub fn integrate_polynomial(
    manifold: &dyn Manifold,
    s0: &PolynomialState,
    horizon: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    s0.check(manifold)?;
    let dt = horizon / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s0.clone());
    for n in 0..steps {
        let next = step_state(manifold, &states[n], dt).map_err(|e| e.at_time(n))?;
        let diag = manifold.validate_point(&next.gamma);
        if let Some(worst) = diag.failures().next() {
            return Err(Error::InvariantDrift {
                name: worst.name,
                residual: worst.residual,
            }
            .at_time(n + 1));
        }
        states.push(next);
    }
    Ok(Trajectory { horizon, dt, states })
}

/// Points at the grid nodes nearest each requested time.
pub fn sample_curve(traj: &Trajectory, times: &[f64]) -> Result<Vec<Point>> {
    times
        .iter()
        .map(|&t| Ok(traj.states[traj.node_index(t)?].gamma.clone()))
        .collect()
}

/// `min_i |⟨vᵢ, v₁⟩| / (‖vᵢ‖‖v₁‖)` over nonzero `vᵢ`; 1 means the curve
/// is a time-reparametrized geodesic.
pub fn collinearity_diagnostic(manifold: &dyn Manifold, s0: &PolynomialState) -> Result<f64> {
    let p = &s0.gamma;
    let v1 = s0
        .vels
        .first()
        .ok_or_else(|| Error::InvalidArgument("collinearity needs at least one velocity".into()))?;
    let n1 = manifold.norm(p, v1);
    if n1 == 0.0 {
        return Err(Error::Degenerate("v₁ is zero".into()));
    }
    let mut score: f64 = 1.0;
    for v in &s0.vels[1..] {
        let n = manifold.norm(p, v);
        if n == 0.0 {
            continue;
        }
        let c = (manifold.inner(p, v, v1).abs() / (n * n1)).min(1.0);
        score = score.min(c);
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Euclidean;
    use crate::sphere::Sphere;
    use nalgebra::DVector;
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn euclidean_quadratic_error_is_first_order() {
        let m = Euclidean::new(1);
        let s0 = PolynomialState::new(v(&[0.0]), vec![v(&[0.0]), v(&[2.0])]);
        let mut prev = f64::NAN;
        for steps in [10, 100, 1000] {
            let traj = integrate_polynomial(&m, &s0, 1.0, steps).unwrap();
            let err = (traj.end().gamma[0] - 1.0).abs();
            // γ_N = Σ 2n·Δt² = 1 − Δt exactly
            assert!((err - 1.0 / steps as f64).abs() < 1e-12, "{steps}: {err}");
            if prev.is_finite() {
                assert!((prev / err - 10.0).abs() < 1e-6);
            }
            prev = err;
        }
    }

    #[test]
    fn order_zero_is_constant() {
        let m = Sphere::new(2).unwrap();
        let s0 = PolynomialState::at_rest(v(&[0.0, 0.6, 0.8]));
        let traj = integrate_polynomial(&m, &s0, 1.0, 25).unwrap();
        assert_eq!(traj.states.len(), 26);
        assert!(traj.states.iter().all(|s| s == &s0));
    }

    #[test]
    fn sphere_quarter_circle() {
        let m = Sphere::new(2).unwrap();
        let s0 = PolynomialState::new(v(&[1.0, 0.0, 0.0]), vec![v(&[0.0, FRAC_PI_2, 0.0])]);
        let traj = integrate_polynomial(&m, &s0, 1.0, 10_000).unwrap();
        assert!((traj.end().gamma.clone() - v(&[0.0, 1.0, 0.0])).norm() < 1e-3);
        for s in &traj.states {
            assert!((s.vels[0].norm() - FRAC_PI_2).abs() < 1e-9);
        }
    }

    #[test]
    fn padding_with_zero_vector_reproduces_lower_order() {
        let m = Sphere::new(2).unwrap();
        let p = v(&[0.0, 0.0, 1.0]);
        let s1 = PolynomialState::new(p.clone(), vec![v(&[0.8, 0.1, 0.0])]);
        let s2 = PolynomialState::new(p.clone(), vec![v(&[0.8, 0.1, 0.0]), v(&[0.0, 1.5, 0.0])]);
        for (lo, hi) in [(s1.clone(), s1.with_order(&m, 2)), (s2.clone(), s2.with_order(&m, 3))] {
            let a = integrate_polynomial(&m, &lo, 1.0, 200).unwrap();
            let b = integrate_polynomial(&m, &hi, 1.0, 200).unwrap();
            for (x, y) in a.points().zip(b.points()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        // a nonzero extra vector does change the curve
        let a = integrate_polynomial(&m, &s1, 1.0, 200).unwrap();
        let b = integrate_polynomial(&m, &s2, 1.0, 200).unwrap();
        assert!((&a.end().gamma - &b.end().gamma).norm() > 1e-2);
    }

    #[test]
    fn sample_curve_snaps_to_nodes() {
        let m = Euclidean::new(1);
        let s0 = PolynomialState::new(v(&[0.0]), vec![v(&[1.0])]);
        let traj = integrate_polynomial(&m, &s0, 1.0, 4).unwrap();
        let pts = sample_curve(&traj, &[0.0, 1.0, 0.125, 0.126, 0.3]).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 0.0, 0.25, 0.25]);
        assert!(sample_curve(&traj, &[1.5]).is_err());
    }

    #[test]
    fn collinearity_examples() {
        let m = Euclidean::new(3);
        let p = v(&[0.0, 0.0, 0.0]);
        let a = v(&[1.0, 2.0, 0.5]);
        let s = PolynomialState::new(p.clone(), vec![a.clone(), &a * 2.0, &a * -3.0]);
        assert!((collinearity_diagnostic(&m, &s).unwrap() - 1.0).abs() < 1e-15);
        let s = PolynomialState::new(p.clone(), vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 4.0, 0.0])]);
        assert_eq!(collinearity_diagnostic(&m, &s).unwrap(), 0.0);
        let s = PolynomialState::new(p.clone(), vec![v(&[0.0, 0.0, 0.0]), v(&[0.0, 4.0, 0.0])]);
        assert!(collinearity_diagnostic(&m, &s).is_err());
    }

    #[test]
    fn rejects_non_tangent_initial_velocity() {
        let m = Sphere::new(2).unwrap();
        let s0 = PolynomialState::new(v(&[1.0, 0.0, 0.0]), vec![v(&[0.5, 0.0, 0.0])]);
        assert!(matches!(
            integrate_polynomial(&m, &s0, 1.0, 10),
            Err(Error::NotTangent { .. })
        ));
    }
}

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use riempoly::geometry::{Euclidean, Manifold, ManifoldKind};
use riempoly::kendall::{self, Kendall};
use riempoly::polyflow::{integrate_polynomial, PolynomialState};
use riempoly::regress::{integrate_adjoint, objective_sse, residuals, Observation, TimeMap, TimedDataset};
use riempoly::so3::{MetricSpec, So3};
use riempoly::sphere::Sphere;

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn manifold(kind: ManifoldKind) -> Box<dyn Manifold> {
    match kind {
        ManifoldKind::Euclidean => Box::new(Euclidean::new(3)),
        ManifoldKind::Sphere => Box::new(Sphere::new(2).unwrap()),
        ManifoldKind::So3 => Box::new(So3::new(MetricSpec::diagonal([1.0, 2.0, 3.0]).unwrap())),
        ManifoldKind::Kendall => Box::new(Kendall::new(5, 2).unwrap()),
    }
}

pub const ALL_KINDS: [ManifoldKind; 4] = [
    ManifoldKind::Euclidean,
    ManifoldKind::Sphere,
    ManifoldKind::So3,
    ManifoldKind::Kendall,
];

/// A base point valid for `m`.
pub fn base_point(m: &dyn Manifold, rng: &mut ChaCha8Rng) -> DVector<f64> {
    match m.kind() {
        ManifoldKind::Kendall => {
            let raw = DMatrix::from_fn(5, 2, |i, j| {
                let theta = i as f64 * std::f64::consts::TAU / 5.0;
                let ring = if j == 0 { theta.cos() } else { theta.sin() };
                ring + 0.15 * rng.sample::<f64, _>(StandardNormal)
            });
            kendall::to_preshape(&raw).unwrap().coords
        }
        ManifoldKind::So3 => {
            let id = DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
            let v = m.project_tangent(&id, &(gaussian(rng, 3) * 0.5));
            m.exp(&id, &v).unwrap()
        }
        _ => {
            let g = gaussian(rng, m.point_dim());
            m.project_point(&(&g / g.norm()))
        }
    }
}

/// A random tangent vector at `p` with the given metric scale.
pub fn random_tangent(m: &dyn Manifold, p: &DVector<f64>, scale: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let basis = m.tangent_basis(p);
    basis
        .iter()
        .fold(m.zero_tangent(p), |acc, b| acc + b * (scale * rng.sample::<f64, _>(StandardNormal)))
        / (basis.len() as f64).sqrt()
}

pub fn random_state(m: &dyn Manifold, k: usize, rng: &mut ChaCha8Rng) -> PolynomialState {
    let p = base_point(m, rng);
    let vels = (0..k).map(|i| random_tangent(m, &p, 0.4 / (i + 1) as f64, rng)).collect();
    PolynomialState::new(p, vels)
}

/// `n` observations scattered around random points of a random curve.
pub fn random_data(m: &dyn Manifold, n: usize, rng: &mut ChaCha8Rng) -> TimedDataset {
    let p = base_point(m, rng);
    let obs = (0..n)
        .map(|_| {
            let t: f64 = rng.gen();
            let v = random_tangent(m, &p, 0.4, rng);
            Observation { time: t, point: m.exp(&p, &v).unwrap() }
        })
        .collect();
    TimedDataset::with_time_map(obs, TimeMap::IDENTITY).unwrap()
}

pub fn energy(m: &dyn Manifold, s: &PolynomialState, data: &TimedDataset, steps: usize) -> f64 {
    let traj = integrate_polynomial(m, s, 1.0, steps).unwrap();
    objective_sse(m, &traj, data).unwrap()
}

/// Adjoint and central-difference gradients, both as coordinates in the
/// orthonormal tangent basis at `γ(0)`.
pub fn gradient_pair(
    m: &dyn Manifold,
    s: &PolynomialState,
    data: &TimedDataset,
    steps: usize,
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let traj = integrate_polynomial(m, s, 1.0, steps).unwrap();
    let res = residuals(m, &traj, data).unwrap();
    let g = integrate_adjoint(m, &traj, &res).unwrap();
    let p = &s.gamma;
    let basis = m.tangent_basis(p);
    let mut adj = Vec::new();
    let mut fd = Vec::new();
    for e in &basis {
        adj.push(m.inner(p, &g.base, e));
        let shifted = |sign: f64| {
            let dir = e * (sign * eps);
            let gamma = m.exp(p, &dir).unwrap();
            let vels = s.vels.iter().map(|v| m.transport(p, &dir, v).unwrap()).collect();
            energy(m, &PolynomialState::new(gamma, vels), data, steps)
        };
        fd.push((shifted(1.0) - shifted(-1.0)) / (2.0 * eps));
    }
    for i in 0..s.vels.len() {
        for e in &basis {
            adj.push(m.inner(p, &g.vels[i], e));
            let shifted = |sign: f64| {
                let mut t = s.clone();
                t.vels[i] += e * (sign * eps);
                energy(m, &t, data, steps)
            };
            fd.push((shifted(1.0) - shifted(-1.0)) / (2.0 * eps));
        }
    }
    (adj, fd)
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale
}

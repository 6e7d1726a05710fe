//! SO(3) with a left-invariant metric `⟨x, y⟩ = xᵀAy` on the Lie algebra.
//!
//! Tangent vectors are left-trivialized: a velocity `γ̇` at `γ` is stored as
//! `ω = vee(γᵀγ̇) ∈ ℝ³`. The Lie bracket is the cross product and
//! `ad†_x y = −A⁻¹(x × Ay)`.
//!
//! Geodesics integrate the Euler–Poincaré equation `ω̇ = −A⁻¹(ω × Aω)`
//! while the group element follows `γ ← γ·expm(h·hat(ω))`; transported
//! vectors integrate `Ẋ = ½(A⁻¹(−X × Aω − ω × AX) − ω × X)` alongside.
//! Both use an explicit midpoint step and the rotation is re-projected onto
//! SO(3) after every step.

use nalgebra::{DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{
    check_dim, tolerance, InvariantResidual, Manifold, ManifoldKind, Point, PointDiagnostics,
    Tangent,
};

pub type AlgebraVector = Vector3<f64>;

/// Symmetric positive-definite inertia-like matrix defining the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    a: Matrix3<f64>,
    a_inv: Matrix3<f64>,
    chol: Matrix3<f64>,
}

impl MetricSpec {
    pub fn new(a: Matrix3<f64>) -> Result<Self> {
        let asym = (a - a.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::InvalidMetric(format!(
                "matrix is not symmetric (asymmetry {asym:.3e})"
            )));
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::InvalidMetric("matrix is not positive definite".into()))?;
        let a_inv = chol.inverse();
        Ok(Self {
            a,
            a_inv,
            chol: chol.l(),
        })
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity()).expect("identity is SPD")
    }

    pub fn diagonal(d: [f64; 3]) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vector3::from(d)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.a
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.a_inv
    }

    pub fn inner(&self, x: &AlgebraVector, y: &AlgebraVector) -> f64 {
        x.dot(&(self.a * y))
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.a.symmetric_eigenvalues().min()
    }
}

pub fn hat(x: &AlgebraVector) -> Matrix3<f64> {
    Matrix3::new(0.0, -x[2], x[1], x[2], 0.0, -x[0], -x[1], x[0], 0.0)
}

pub fn vee(w: &Matrix3<f64>) -> Result<AlgebraVector> {
    let asym = (w + w.transpose()).abs().max();
    if asym >= 1e-9 {
        return Err(Error::NotSkew(asym));
    }
    Ok(Vector3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)]))
}

/// `ad†_x y = −A⁻¹(x × Ay)`.
pub fn ad_dagger(x: &AlgebraVector, y: &AlgebraVector, metric: &MetricSpec) -> AlgebraVector {
    -(metric.a_inv * x.cross(&(metric.a * y)))
}

/// Euler–Poincaré right-hand side `ω̇ = ad†_ω ω`.
pub fn geodesic_rhs(omega: &AlgebraVector, metric: &MetricSpec) -> AlgebraVector {
    ad_dagger(omega, omega, metric)
}

/// Time derivative of a vector parallel transported along a curve with body
/// velocity `omega`.
pub fn transport_rhs(x: &AlgebraVector, omega: &AlgebraVector, metric: &MetricSpec) -> AlgebraVector {
    let a = &metric.a;
    let inner = metric.a_inv * (-x.cross(&(a * omega)) - omega.cross(&(a * x)));
    0.5 * (inner - omega.cross(x))
}

/// Levi-Civita connection on left-invariant fields,
/// `∇_X Y = ½(ad_X Y − ad†_X Y − ad†_Y X)`.
pub fn connection(x: &AlgebraVector, y: &AlgebraVector, metric: &MetricSpec) -> AlgebraVector {
    0.5 * (x.cross(y) - ad_dagger(x, y, metric) - ad_dagger(y, x, metric))
}

/// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` on left-invariant fields.
pub fn curvature(
    x: &AlgebraVector,
    y: &AlgebraVector,
    z: &AlgebraVector,
    metric: &MetricSpec,
) -> AlgebraVector {
    let xy = connection(x, &connection(y, z, metric), metric);
    let yx = connection(y, &connection(x, z, metric), metric);
    let br = connection(&x.cross(y), z, metric);
    xy - yx - br
}

/// Exact matrix exponential of `hat(phi)`.
pub fn rodrigues(phi: &AlgebraVector) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = hat(phi);
    let k2 = k * k;
    let (a, b) = if theta2 < 1e-16 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k2 * b
}

/// Principal matrix logarithm of a rotation, as a rotation vector.
pub fn log_rotation(r: &Matrix3<f64>) -> AlgebraVector {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let sin = skew.norm();
    let theta = sin.atan2(cos);
    if theta < 1e-8 {
        return skew * (1.0 + theta * theta / 6.0);
    }
    if std::f64::consts::PI - theta > 1e-6 {
        return skew * (theta / sin);
    }
    // near π: recover the axis from the symmetric part R + Rᵀ = 2cosθ I + 2(1−cosθ) nnᵀ
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos;
    let col = (0..3)
        .max_by(|&i, &j| sym[(i, i)].total_cmp(&sym[(j, j)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = sym.column(col).into();
    axis /= axis.norm();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Nearest rotation in Frobenius norm (polar factor with det = +1).
pub fn polar(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

/// State advanced by the geodesic integrator.
#[derive(Debug, Clone)]
struct FlowState {
    rot: Matrix3<f64>,
    omega: AlgebraVector,
    carried: Vec<AlgebraVector>,
}

fn flow(mut s: FlowState, horizon: f64, steps: usize, metric: &MetricSpec) -> FlowState {
    let steps = steps.max(1);
    let h = horizon / steps as f64;
    for _ in 0..steps {
        let omega_half = s.omega + geodesic_rhs(&s.omega, metric) * (0.5 * h);
        for x in s.carried.iter_mut() {
            let x_half = *x + transport_rhs(x, &s.omega, metric) * (0.5 * h);
            *x += transport_rhs(&x_half, &omega_half, metric) * h;
        }
        s.rot = polar(&(s.rot * rodrigues(&(omega_half * h))));
        s.omega += geodesic_rhs(&omega_half, metric) * h;
    }
    s
}

/// Geodesic from `rot` with initial body velocity `omega`, integrated to time
/// `horizon` with step at most `dt`.
pub fn exp(
    rot: &Matrix3<f64>,
    omega: &AlgebraVector,
    horizon: f64,
    dt: f64,
    metric: &MetricSpec,
) -> Matrix3<f64> {
    if *omega == Vector3::zeros() || horizon == 0.0 {
        return *rot;
    }
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    flow(
        FlowState {
            rot: *rot,
            omega: *omega,
            carried: Vec::new(),
        },
        horizon,
        steps,
        metric,
    )
    .rot
}

pub fn matrix_from_point(p: &DVector<f64>) -> Matrix3<f64> {
    Matrix3::from_row_slice(p.as_slice())
}

pub fn point_from_matrix(m: &Matrix3<f64>) -> DVector<f64> {
    DVector::from_row_slice(m.transpose().as_slice())
}

fn algebra(v: &DVector<f64>) -> AlgebraVector {
    Vector3::new(v[0], v[1], v[2])
}

fn tangent(v: &AlgebraVector) -> DVector<f64> {
    DVector::from_row_slice(v.as_slice())
}

#[derive(Debug, Clone)]
pub struct So3 {
    pub metric: MetricSpec,
    /// Sub-steps per unit time for finite exp and transport.
    pub steps: usize,
    pub log_tol: f64,
    pub log_max_iter: usize,
}

impl So3 {
    pub fn new(metric: MetricSpec) -> Self {
        Self {
            metric,
            steps: 200,
            log_tol: 1e-12,
            log_max_iter: 50,
        }
    }

    pub fn bi_invariant() -> Self {
        Self::new(MetricSpec::identity())
    }

    fn run(&self, p: &Point, dir: &Tangent, carried: Vec<AlgebraVector>, steps: usize) -> Result<FlowState> {
        check_dim(9, p)?;
        check_dim(3, dir)?;
        Ok(flow(
            FlowState {
                rot: matrix_from_point(p),
                omega: algebra(dir),
                carried,
            },
            1.0,
            steps,
            &self.metric,
        ))
    }

    /// Body-frame residual `log(Exp_p(ω)ᵀ q)`.
    fn shoot_residual(&self, p: &Point, q: &Matrix3<f64>, omega: &AlgebraVector) -> Result<AlgebraVector> {
        let end = self.run(p, &tangent(omega), Vec::new(), self.steps)?.rot;
        Ok(log_rotation(&(end.transpose() * q)))
    }
}

impl Manifold for So3 {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::So3
    }

    fn point_dim(&self) -> usize {
        9
    }

    fn tangent_dim(&self) -> usize {
        3
    }

    fn exp(&self, p: &Point, v: &Tangent) -> Result<Point> {
        check_dim(9, p)?;
        check_dim(3, v)?;
        if v.iter().all(|&c| c == 0.0) {
            return Ok(p.clone());
        }
        Ok(point_from_matrix(&self.run(p, v, Vec::new(), self.steps)?.rot))
    }

    fn exp_step(&self, p: &Point, v: &Tangent) -> Result<Point> {
        check_dim(9, p)?;
        if v.iter().all(|&c| c == 0.0) {
            return Ok(p.clone());
        }
        Ok(point_from_matrix(&self.run(p, v, Vec::new(), 1)?.rot))
    }

    /// Newton shooting on the body-frame endpoint residual, started from the
    /// bi-invariant answer `log(pᵀq)`.
    fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        check_dim(9, p)?;
        check_dim(9, q)?;
        if p == q {
            return Ok(DVector::zeros(3));
        }
        let rp = matrix_from_point(p);
        let rq = matrix_from_point(q);
        let mut omega = log_rotation(&(rp.transpose() * rq));
        let mut residual = self.shoot_residual(p, &rq, &omega)?;
        let h = 1e-7;
        let mut last_jac: Option<Matrix3<f64>> = None;
        for _ in 0..self.log_max_iter {
            if residual.norm() < self.log_tol {
                // one more step with the last Jacobian pushes the residual
                // to roundoff, which keeps objectives built on this map smooth
                if let Some(step) = last_jac.and_then(|j| j.lu().solve(&residual)) {
                    let trial = omega - step;
                    if self.shoot_residual(p, &rq, &trial)?.norm() < residual.norm() {
                        omega = trial;
                    }
                }
                return Ok(tangent(&omega));
            }
            let mut jac = Matrix3::zeros();
            for j in 0..3 {
                let mut e = Vector3::zeros();
                e[j] = h;
                let plus = self.shoot_residual(p, &rq, &(omega + e))?;
                let minus = self.shoot_residual(p, &rq, &(omega - e))?;
                jac.set_column(j, &((plus - minus) / (2.0 * h)));
            }
            last_jac = Some(jac);
            let step = jac
                .lu()
                .solve(&residual)
                .ok_or(Error::LogNotConverged {
                    iterations: 0,
                    residual: residual.norm(),
                })?;
            let mut alpha = 1.0;
            loop {
                let trial = omega - step * alpha;
                let r = self.shoot_residual(p, &rq, &trial)?;
                if r.norm() < residual.norm() || alpha < 1e-4 {
                    omega = trial;
                    residual = r;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if residual.norm() < self.log_tol {
            return Ok(tangent(&omega));
        }
        Err(Error::LogNotConverged {
            iterations: self.log_max_iter,
            residual: residual.norm(),
        })
    }

    fn transport(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        check_dim(3, x)?;
        if dir.iter().all(|&c| c == 0.0) {
            return Ok(x.clone());
        }
        let s = self.run(p, dir, vec![algebra(x)], self.steps)?;
        Ok(tangent(&s.carried[0]))
    }

    fn transport_step(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        check_dim(3, x)?;
        let s = self.run(p, dir, vec![algebra(x)], 1)?;
        Ok(tangent(&s.carried[0]))
    }

    fn curvature(&self, p: &Point, x: &Tangent, y: &Tangent, z: &Tangent) -> Result<Tangent> {
        check_dim(9, p)?;
        for w in [x, y, z] {
            check_dim(3, w)?;
        }
        Ok(tangent(&curvature(&algebra(x), &algebra(y), &algebra(z), &self.metric)))
    }

    fn inner(&self, _p: &Point, x: &Tangent, y: &Tangent) -> f64 {
        self.metric.inner(&algebra(x), &algebra(y))
    }

    fn project_point(&self, p: &Point) -> Point {
        point_from_matrix(&polar(&matrix_from_point(p)))
    }

    fn project_tangent(&self, _p: &Point, v: &Tangent) -> Tangent {
        v.clone()
    }

    fn validate_point(&self, p: &Point) -> PointDiagnostics {
        let r = matrix_from_point(p);
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        PointDiagnostics {
            kind: ManifoldKind::So3,
            residuals: vec![
                InvariantResidual {
                    name: "orthogonality",
                    residual: ortho,
                    tolerance: tolerance::SO3,
                },
                InvariantResidual {
                    name: "unit determinant",
                    residual: (r.determinant() - 1.0).abs(),
                    tolerance: tolerance::SO3,
                },
            ],
        }
    }

    fn tangent_basis(&self, _p: &Point) -> Vec<Tangent> {
        // columns of L⁻ᵀ with A = LLᵀ are A-orthonormal
        let l_inv_t = self
            .metric
            .chol
            .try_inverse()
            .expect("cholesky factor is invertible")
            .transpose();
        (0..3).map(|j| tangent(&l_inv_t.column(j).into())).collect()
    }

    fn injectivity_radius(&self) -> f64 {
        std::f64::consts::PI * self.metric.smallest_eigenvalue().sqrt()
    }
}

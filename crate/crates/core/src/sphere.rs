//! The unit sphere `Sⁿ ⊂ ℝⁿ⁺¹` with closed-form exp, log and transport.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{
    check_dim, orthonormalize_against, tolerance, InvariantResidual, Manifold, ManifoldKind,
    Point, PointDiagnostics, Tangent,
};

/// Below this angle the closed forms switch to Taylor expansions.
const SMALL_ANGLE: f64 = 1e-8;

fn check_tangent(p: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
    let residual = p.dot(v).abs();
    if residual > tolerance::TANGENCY * v.norm().max(1.0) {
        return Err(Error::NotTangent { residual });
    }
    Ok(())
}

/// Removes the normal component `(pᵀv)p`.
pub fn project_tangent(p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let c = p.dot(v);
    let mut out = v.clone();
    out.axpy(-c, p, 1.0);
    out
}

/// `Exp_p v = cos θ·p + sin θ·v/θ` with `θ = ‖v‖`.
pub fn exp(p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(p.len(), v)?;
    check_tangent(p, v)?;
    let theta = v.norm();
    if theta == 0.0 {
        return Ok(p.clone());
    }
    let (c, sinc) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - 0.5 * t2, 1.0 - t2 / 6.0)
    } else {
        (theta.cos(), theta.sin() / theta)
    };
    let out = p * c + v * sinc;
    let n = out.norm();
    Ok(out / n)
}

/// `Log_p q = θ (q − (pᵀq)p) / ‖q − (pᵀq)p‖` with `θ = cos⁻¹(pᵀq)`.
pub fn log(p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(p.len(), q)?;
    if p == q {
        return Ok(DVector::zeros(p.len()));
    }
    let dot = p.dot(q);
    if dot <= -1.0 + tolerance::CUT_LOCUS {
        return Err(Error::CutLocus { dot });
    }
    let u = project_tangent(p, q);
    let nu = u.norm();
    if nu == 0.0 {
        return Ok(DVector::zeros(p.len()));
    }
    // atan2 keeps full precision at both small and large angles
    let theta = nu.atan2(dot);
    let scale = if theta < SMALL_ANGLE {
        1.0 + theta * theta / 6.0
    } else {
        theta / nu
    };
    Ok(project_tangent(p, &(u * scale)))
}

/// `R(X,Y)Z = ⟨Y,Z⟩X − ⟨X,Z⟩Y` (sectional curvature +1).
pub fn curvature(
    p: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    for w in [x, y, z] {
        check_dim(p.len(), w)?;
        check_tangent(p, w)?;
    }
    Ok(x * y.dot(z) - y * x.dot(z))
}

/// Transport of `x` along `Exp_p(s·v)`: the component orthogonal to `v` is
/// fixed, the component along `v` turns with the great circle.
pub fn transport(p: &DVector<f64>, v: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(p.len(), v)?;
    check_dim(p.len(), x)?;
    check_tangent(p, x)?;
    let theta = v.norm();
    if theta == 0.0 {
        return Ok(x.clone());
    }
    let u = v / theta;
    let x = project_tangent(p, x);
    let a = u.dot(&x);
    let mut out = x;
    out.axpy(-a, &u, 1.0);
    let turned = p * (-theta.sin()) + &u * theta.cos();
    out.axpy(a, &turned, 1.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sphere {
    /// Intrinsic dimension; points live in `ℝⁿ⁺¹`.
    pub n: usize,
}

impl Sphere {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sphere dimension must be ≥ 1".into()));
        }
        Ok(Self { n })
    }
}

impl Manifold for Sphere {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Sphere
    }

    fn point_dim(&self) -> usize {
        self.n + 1
    }

    fn tangent_dim(&self) -> usize {
        self.n + 1
    }

    fn exp(&self, p: &Point, v: &Tangent) -> Result<Point> {
        check_dim(self.n + 1, p)?;
        exp(p, v)
    }

    fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        check_dim(self.n + 1, p)?;
        log(p, q)
    }

    fn transport(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        check_dim(self.n + 1, p)?;
        transport(p, dir, x)
    }

    fn curvature(&self, p: &Point, x: &Tangent, y: &Tangent, z: &Tangent) -> Result<Tangent> {
        check_dim(self.n + 1, p)?;
        curvature(p, x, y, z)
    }

    fn inner(&self, _p: &Point, x: &Tangent, y: &Tangent) -> f64 {
        x.dot(y)
    }

    fn project_point(&self, p: &Point) -> Point {
        p / p.norm()
    }

    fn project_tangent(&self, p: &Point, v: &Tangent) -> Tangent {
        project_tangent(p, v)
    }

    fn validate_point(&self, p: &Point) -> PointDiagnostics {
        PointDiagnostics {
            kind: ManifoldKind::Sphere,
            residuals: vec![InvariantResidual {
                name: "unit norm",
                residual: (p.norm() - 1.0).abs(),
                tolerance: tolerance::SPHERE,
            }],
        }
    }

    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        let dim = self.n + 1;
        let mut basis: Vec<Tangent> = vec![p.clone()];
        for i in 0..dim {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            if let Some(b) = orthonormalize_against(&basis, &e, 1e-8) {
                basis.push(b);
            }
            if basis.len() == dim {
                break;
            }
        }
        basis.remove(0);
        basis
    }

    fn injectivity_radius(&self) -> f64 {
        std::f64::consts::PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn exp_examples() {
        let p = v(&[1.0, 0.0, 0.0]);
        assert!(close(&exp(&p, &v(&[0.0, FRAC_PI_2, 0.0])).unwrap(), &v(&[0.0, 1.0, 0.0]), 1e-15));
        assert_eq!(exp(&p, &v(&[0.0, 0.0, 0.0])).unwrap(), p);
        assert!(close(&exp(&p, &v(&[0.0, PI, 0.0])).unwrap(), &v(&[-1.0, 0.0, 0.0]), 1e-15));
    }

    #[test]
    fn exp_rejects_normal_vectors() {
        let p = v(&[1.0, 0.0, 0.0]);
        assert!(matches!(exp(&p, &v(&[0.1, 0.2, 0.0])), Err(Error::NotTangent { .. })));
    }

    #[test]
    fn exp_small_angle_branch_stays_on_sphere() {
        let p = v(&[0.0, 0.0, 1.0]);
        let q = exp(&p, &v(&[1e-10, -3e-11, 0.0])).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-15);
        assert!(close(&q, &v(&[1e-10, -3e-11, 1.0]), 1e-15));
    }

    #[test]
    fn log_examples() {
        let p = v(&[1.0, 0.0, 0.0]);
        assert_eq!(log(&p, &p).unwrap(), DVector::zeros(3));
        assert!(close(&log(&p, &v(&[0.0, 1.0, 0.0])).unwrap(), &v(&[0.0, FRAC_PI_2, 0.0]), 1e-15));
    }

    #[test]
    fn log_rejects_antipodes() {
        let p = v(&[1.0, 0.0, 0.0]);
        assert!(matches!(log(&p, &-&p), Err(Error::CutLocus { .. })));
    }

    #[test]
    fn curvature_examples() {
        let p = v(&[1.0, 0.0, 0.0]);
        let e2 = v(&[0.0, 1.0, 0.0]);
        let e3 = v(&[0.0, 0.0, 1.0]);
        // ⟨Y,Z⟩X − ⟨X,Z⟩Y with X = Z = e₂, Y = e₃
        assert!(close(&curvature(&p, &e2, &e3, &e2).unwrap(), &v(&[0.0, 0.0, -1.0]), 1e-15));
        let x = v(&[0.0, 0.3, -0.7]);
        assert_eq!(curvature(&p, &x, &x, &e3).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn curvature_vanishes_for_orthogonal_z() {
        let p = v(&[1.0, 0.0, 0.0, 0.0]);
        let x = v(&[0.0, 1.0, 0.0, 0.0]);
        let y = v(&[0.0, 0.5, 0.5, 0.0]);
        let z = v(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(curvature(&p, &x, &y, &z).unwrap(), DVector::zeros(4));
    }

    #[test]
    fn transport_examples() {
        let p = v(&[1.0, 0.0, 0.0]);
        let x = v(&[0.0, 0.2, 0.4]);
        assert_eq!(transport(&p, &DVector::zeros(3), &x).unwrap(), x);
        let dir = v(&[0.0, 0.7, 0.0]);
        let ortho = v(&[0.0, 0.0, 1.3]);
        assert_eq!(transport(&p, &dir, &ortho).unwrap(), ortho);
        let vel = v(&[0.0, FRAC_PI_2, 0.0]);
        let out = transport(&p, &vel, &vel).unwrap();
        assert!(close(&out, &v(&[-FRAC_PI_2, 0.0, 0.0]), 1e-15));
    }

    #[test]
    fn geodesic_speed_is_constant() {
        let p = v(&[0.6, 0.0, 0.8]);
        let vel = v(&[0.0, 1.3, 0.0]);
        let h = 1e-6;
        let mut speeds = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.2;
            let a = exp(&p, &(&vel * (t - h))).unwrap();
            let b = exp(&p, &(&vel * (t + h))).unwrap();
            speeds.push((b - a).norm() / (2.0 * h));
        }
        for s in &speeds {
            assert!((s - 1.3).abs() < 1e-9, "speed {s}");
        }
    }

    fn unit3() -> impl Strategy<Value = DVector<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 0.05)
            .prop_map(|(a, b, c)| {
                let x = v(&[a, b, c]);
                let n = x.norm();
                x / n
            })
    }

    fn raw3() -> impl Strategy<Value = DVector<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| v(&[a, b, c]))
    }

    proptest! {
        #[test]
        fn log_inverts_exp(p in unit3(), raw in raw3()) {
            let t = project_tangent(&p, &raw);
            prop_assume!(t.norm() > 1e-3);
            let vel = &t / t.norm();
            let back = log(&p, &exp(&p, &vel).unwrap()).unwrap();
            prop_assert!((back - vel).norm() < 1e-9);
        }

        #[test]
        fn transport_preserves_norm_and_tangency(p in unit3(), a in raw3(), b in raw3()) {
            let dir = project_tangent(&p, &a);
            let x = project_tangent(&p, &b);
            let q = exp(&p, &dir).unwrap();
            let y = transport(&p, &dir, &x).unwrap();
            prop_assert!((y.norm() - x.norm()).abs() < 1e-12);
            prop_assert!(q.dot(&y).abs() < 1e-10);
        }

        #[test]
        fn sectional_curvature_is_one(p in unit3(), a in raw3(), b in raw3()) {
            let x = project_tangent(&p, &a);
            let y = project_tangent(&p, &b);
            let r = curvature(&p, &x, &y, &y).unwrap();
            let lhs = r.dot(&x);
            let rhs = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}

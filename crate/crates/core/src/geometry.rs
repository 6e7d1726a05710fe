//! The manifold contract shared by every geometry, plus the flat Euclidean
//! space used as a correctness oracle.
//!
//! Points and tangent vectors are plain `DVector<f64>`s in ambient
//! coordinates. What the coordinates mean is owned by the manifold:
//!
//! | manifold  | point coords              | tangent coords                      |
//! |-----------|---------------------------|-------------------------------------|
//! | Euclidean | `x ∈ ℝⁿ`                  | `v ∈ ℝⁿ`                            |
//! | Sphere    | unit `p ∈ ℝⁿ⁺¹`           | `v ∈ ℝⁿ⁺¹`, `pᵀv = 0`               |
//! | SO(3)     | row-major 3×3 rotation    | body angular velocity `ω ∈ ℝ³`      |
//! | Kendall   | row-major m×d preshape    | centered, sphere-tangent, horizontal |
//!
//! Curvature follows `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, so the
//! sectional curvature of a plane is `⟨R(X,Y)Y, X⟩ / |X∧Y|²`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

pub type Point = DVector<f64>;
pub type Tangent = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Euclidean,
    Sphere,
    So3,
    Kendall,
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ManifoldKind::Euclidean => "euclidean",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::So3 => "so3",
            ManifoldKind::Kendall => "kendall",
        };
        f.write_str(s)
    }
}

/// Per-manifold thresholds above which a point invariant counts as violated.
pub mod tolerance {
    pub const SPHERE: f64 = 1e-10;
    pub const SO3: f64 = 1e-8;
    pub const KENDALL: f64 = 1e-8;
    /// Residual of `pᵀv` above which a vector is rejected as non-tangent.
    pub const TANGENCY: f64 = 1e-6;
    /// Antipodal guard for sphere-type log maps.
    pub const CUT_LOCUS: f64 = 1e-9;
    /// Drift tolerated by the optimizer before it aborts.
    pub const DRIFT: f64 = 1e-6;
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResidual {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl InvariantResidual {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// Residuals of every point invariant of a manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDiagnostics {
    pub kind: ManifoldKind,
    pub residuals: Vec<InvariantResidual>,
}

impl PointDiagnostics {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(InvariantResidual::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantResidual> {
        self.residuals.iter().filter(|r| !r.passed())
    }

    pub fn worst(&self) -> Option<&InvariantResidual> {
        self.residuals
            .iter()
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
    }
}

/// Operations every geometry provides.
///
/// `transport(p, dir, x)` moves `x ∈ T_pM` along `s ↦ Exp_p(s·dir)` for
/// `s ∈ [0, 1]`. The `*_step` variants are the single-step versions used
/// by the covariant integrators, where `dir` is already scaled by `Δt`;
/// geometries whose exp/transport are themselves time-stepped override
/// them with one sub-step.
pub trait Manifold: Send + Sync + fmt::Debug {
    fn kind(&self) -> ManifoldKind;

    /// Length of a point's coordinate vector.
    fn point_dim(&self) -> usize;

    /// Length of a tangent vector's coordinate vector.
    fn tangent_dim(&self) -> usize;

    fn exp(&self, p: &Point, v: &Tangent) -> Result<Point>;

    fn log(&self, p: &Point, q: &Point) -> Result<Tangent>;

    fn transport(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent>;

    fn curvature(&self, p: &Point, x: &Tangent, y: &Tangent, z: &Tangent) -> Result<Tangent>;

    fn inner(&self, p: &Point, x: &Tangent, y: &Tangent) -> f64;

    fn norm(&self, p: &Point, x: &Tangent) -> f64 {
        self.inner(p, x, x).max(0.0).sqrt()
    }

    fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        let v = self.log(p, q)?;
        Ok(self.norm(p, &v))
    }

    fn exp_step(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.exp(p, v)
    }

    fn transport_step(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        self.transport(p, dir, x)
    }

    /// Nearest point on the constraint set.
    fn project_point(&self, p: &Point) -> Point;

    /// Nearest admissible tangent vector at `p`.
    fn project_tangent(&self, p: &Point, v: &Tangent) -> Tangent;

    fn validate_point(&self, p: &Point) -> PointDiagnostics;

    /// An orthonormal basis of `T_pM` under `inner`.
    fn tangent_basis(&self, p: &Point) -> Vec<Tangent>;

    fn zero_tangent(&self, _p: &Point) -> Tangent {
        DVector::zeros(self.tangent_dim())
    }

    fn injectivity_radius(&self) -> f64 {
        f64::INFINITY
    }
}

pub(crate) fn check_dim(expected: usize, v: &DVector<f64>) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

/// Gram–Schmidt against an existing orthonormal set; returns `None` when the
/// remainder falls below `drop_tol`.
pub(crate) fn orthonormalize_against(
    basis: &[DVector<f64>],
    v: &DVector<f64>,
    drop_tol: f64,
) -> Option<DVector<f64>> {
    let mut w = v.clone();
    // two passes for stability
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
    }
    let n = w.norm();
    if n <= drop_tol {
        None
    } else {
        Some(w / n)
    }
}

/// Flat `ℝⁿ`: exp is addition, transport is the identity, curvature vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    pub dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

pub fn euclid_exp(p: &Point, v: &Tangent) -> Result<Point> {
    check_dim(p.len(), v)?;
    Ok(p + v)
}

impl Manifold for Euclidean {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Euclidean
    }

    fn point_dim(&self) -> usize {
        self.dim
    }

    fn tangent_dim(&self) -> usize {
        self.dim
    }

    fn exp(&self, p: &Point, v: &Tangent) -> Result<Point> {
        check_dim(self.dim, p)?;
        euclid_exp(p, v)
    }

    fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        check_dim(self.dim, p)?;
        check_dim(self.dim, q)?;
        Ok(q - p)
    }

    fn transport(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        check_dim(self.dim, p)?;
        check_dim(self.dim, dir)?;
        check_dim(self.dim, x)?;
        Ok(x.clone())
    }

    fn curvature(&self, p: &Point, x: &Tangent, y: &Tangent, z: &Tangent) -> Result<Tangent> {
        for v in [p, x, y, z] {
            check_dim(self.dim, v)?;
        }
        Ok(DVector::zeros(self.dim))
    }

    fn inner(&self, _p: &Point, x: &Tangent, y: &Tangent) -> f64 {
        x.dot(y)
    }

    fn project_point(&self, p: &Point) -> Point {
        p.clone()
    }

    fn project_tangent(&self, _p: &Point, v: &Tangent) -> Tangent {
        v.clone()
    }

    fn validate_point(&self, _p: &Point) -> PointDiagnostics {
        PointDiagnostics {
            kind: ManifoldKind::Euclidean,
            residuals: Vec::new(),
        }
    }

    fn tangent_basis(&self, _p: &Point) -> Vec<Tangent> {
        (0..self.dim)
            .map(|i| {
                let mut e = DVector::zeros(self.dim);
                e[i] = 1.0;
                e
            })
            .collect()
    }
}

//! Kendall shape space `Σ_d^m`, represented by preshapes on `S^{md−1}`.
//!
//! A configuration of `m` landmarks in `ℝ^d` is stored row-major as a
//! vector of length `m·d`. Translation and scale are removed by
//! [`to_preshape`]; rotation is quotiented out by working with horizontal
//! tangent vectors only (those orthogonal to every `x ↦ Wx` with `W` skew).
//!
//! Exp is the closed-form great circle of a horizontal velocity; a stepped
//! variant is kept for checking. Transport integrates the horizontal-lift
//! equation with RK4 along that circle. The log map aligns the target
//! with Procrustes and then refines by shooting. Curvature is the quotient
//! curvature: the sphere's tensor corrected by the vertical part of the
//! covariant derivative of horizontal fields.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    check_dim, orthonormalize_against, tolerance, InvariantResidual, Manifold, ManifoldKind,
    Point, PointDiagnostics, Tangent,
};
use crate::sphere;

/// Vertical spanning vectors whose remainder falls below this are dropped.
const VERTICAL_DROP: f64 = 1e-10;

/// A standardized landmark configuration plus what was removed to get there.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfig {
    pub coords: DVector<f64>,
    pub m: usize,
    pub d: usize,
    pub centroid: DVector<f64>,
    pub scale: f64,
}

impl LandmarkConfig {
    /// The landmarks as an `m × d` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        as_matrix(&self.coords, self.m, self.d)
    }
}

pub fn as_matrix(v: &DVector<f64>, m: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, d, v.as_slice())
}

pub fn as_vector(mat: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_row_slice(mat.transpose().as_slice())
}

/// Centers and scales a raw `m × d` configuration onto the preshape sphere.
pub fn to_preshape(raw: &DMatrix<f64>) -> Result<LandmarkConfig> {
    let (m, d) = raw.shape();
    if m < 2 || m * d < 3 {
        return Err(Error::Degenerate(format!(
            "need at least two landmarks and m·d ≥ 3, got m={m}, d={d}"
        )));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite coordinate".into()));
    }
    let centroid = raw.row_mean().transpose();
    let mut centered = raw.clone();
    for mut row in centered.row_iter_mut() {
        row -= centroid.transpose();
    }
    let scale = centered.norm();
    let magnitude = raw.amax().max(1.0);
    if scale <= 1e-12 * magnitude {
        return Err(Error::Degenerate("all landmarks coincide".into()));
    }
    Ok(LandmarkConfig {
        coords: as_vector(&(centered / scale)),
        m,
        d,
        centroid,
        scale,
    })
}

/// Subtracts the mean landmark from a tangent vector.
pub fn center(v: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    let mut mat = as_matrix(v, m, d);
    let mean = mat.row_mean();
    for mut row in mat.row_iter_mut() {
        row -= &mean;
    }
    as_vector(&mat)
}

fn skew_basis(d: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for a in 0..d {
        for b in (a + 1)..d {
            let mut w = DMatrix::zeros(d, d);
            w[(a, b)] = 1.0;
            w[(b, a)] = -1.0;
            out.push(w);
        }
    }
    out
}

/// Orthonormal basis of the vertical subspace at a preshape.
#[derive(Debug, Clone)]
pub struct VerticalBasis {
    pub vectors: Vec<DVector<f64>>,
}

impl VerticalBasis {
    pub fn at(p: &DVector<f64>, m: usize, d: usize) -> Self {
        let pm = as_matrix(p, m, d);
        let mut vectors: Vec<DVector<f64>> = Vec::new();
        for w in skew_basis(d) {
            // rows x_i ↦ W x_i
            let gen = as_vector(&(&pm * w.transpose()));
            if let Some(b) = orthonormalize_against(&vectors, &gen, VERTICAL_DROP) {
                vectors.push(b);
            }
        }
        Self { vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn remove_from(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for b in &self.vectors {
            let c = b.dot(&out);
            out.axpy(-c, b, 1.0);
        }
        out
    }
}

/// Removes the vertical (pure-rotation) component of `x` at `p`.
pub fn horizontal_project(p: &DVector<f64>, x: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    VerticalBasis::at(p, m, d).remove_from(x)
}

/// Full projection onto the horizontal tangent space: centered, orthogonal
/// to `p`, and orthogonal to the vertical subspace.
pub fn project_horizontal_tangent(p: &DVector<f64>, x: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    let t = sphere::project_tangent(p, &center(x, m, d));
    horizontal_project(p, &t, m, d)
}

/// Rotation `R ∈ SO(d)` minimizing `‖target·Rᵀ − base‖_F`.
pub fn procrustes_rotation(target: &DVector<f64>, base: &DVector<f64>, m: usize, d: usize) -> DMatrix<f64> {
    let t = as_matrix(target, m, d);
    let b = as_matrix(base, m, d);
    let cross = t.transpose() * b;
    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v_t").transpose();
    let mut r = &v * u.transpose();
    if r.determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let mut v2 = v.clone();
        v2.column_mut(d - 1).neg_mut();
        r = v2 * u.transpose();
    }
    r
}

/// Rotates `target` onto `base`.
pub fn procrustes_align(target: &DVector<f64>, base: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    let r = procrustes_rotation(target, base, m, d);
    as_vector(&(as_matrix(target, m, d) * r.transpose()))
}

/// Config-level wrapper around [`procrustes_align`]; keeps the target's
/// centroid and scale.
pub fn procrustes_align_config(target: &LandmarkConfig, base: &LandmarkConfig) -> Result<LandmarkConfig> {
    if target.m != base.m || target.d != base.d {
        return Err(Error::DimensionMismatch {
            expected: base.m * base.d,
            actual: target.m * target.d,
        });
    }
    Ok(LandmarkConfig {
        coords: procrustes_align(&target.coords, &base.coords, base.m, base.d),
        ..target.clone()
    })
}

/// Vertical part of `∇_X Y` for horizontal `X`, `Y` (O'Neill's `A_X Y`).
///
/// Writing it as `P·Ω` with `Ω` skew, differentiating the horizontality
/// condition `YᵀP = PᵀY` gives `SΩ + ΩS = YᵀX − XᵀY` with `S = PᵀP`.
pub fn a_tensor(p: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    let pm = as_matrix(p, m, d);
    let xm = as_matrix(x, m, d);
    let ym = as_matrix(y, m, d);
    let s = pm.transpose() * &pm;
    let rhs = ym.transpose() * &xm - xm.transpose() * &ym;
    let omega = solve_skew_lyapunov(&s, &rhs);
    as_vector(&(pm * omega))
}

/// Horizontal part of `Σⱼ ⟨V, A_Z eⱼ⟩ eⱼ` over an orthonormal horizontal
/// basis, returned before projection.
///
/// With `L(Ω) = SΩ + ΩS` self-adjoint on skew matrices, `⟨V, P·L⁻¹(EᵀZ − ZᵀE)⟩`
/// has gradient `−2·Z·W` in `E`, where `W = L⁻¹(skew(PᵀV))`.
pub fn a_tensor_adjoint(p: &DVector<f64>, z: &DVector<f64>, v: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    let pm = as_matrix(p, m, d);
    let zm = as_matrix(z, m, d);
    let pv = pm.transpose() * as_matrix(v, m, d);
    let skew = (&pv - pv.transpose()) * 0.5;
    let s = pm.transpose() * &pm;
    let w = solve_skew_lyapunov(&s, &skew);
    as_vector(&(zm * w * -2.0))
}

/// Solves `SΩ + ΩS = C` for skew `Ω` given symmetric `S` and skew `C`.
fn solve_skew_lyapunov(s: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    if d == 2 {
        // SJ + JS = tr(S)·J for 2×2 skew J
        let tr = s.trace();
        return if tr > 0.0 { c / tr } else { DMatrix::zeros(2, 2) };
    }
    let basis = skew_basis(d);
    let n = basis.len();
    let idx: Vec<(usize, usize)> = (0..d).flat_map(|a| ((a + 1)..d).map(move |b| (a, b))).collect();
    let mut k = DMatrix::zeros(n, n);
    for (j, e) in basis.iter().enumerate() {
        let img = s * e + e * s;
        for (i, &(a, b)) in idx.iter().enumerate() {
            k[(i, j)] = img[(a, b)];
        }
    }
    let rhs = DVector::from_iterator(n, idx.iter().map(|&(a, b)| c[(a, b)]));
    let coef = k
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(n));
    let mut omega = DMatrix::zeros(d, d);
    for (j, e) in basis.iter().enumerate() {
        omega += e * coef[j];
    }
    omega
}

/// Orthonormal basis of the horizontal tangent space at `p`.
pub fn horizontal_basis(p: &DVector<f64>, m: usize, d: usize) -> Vec<DVector<f64>> {
    let n = m * d;
    let mut span: Vec<DVector<f64>> = vec![p.clone()];
    for k in 0..d {
        let mut t = DVector::zeros(n);
        for i in 0..m {
            t[i * d + k] = 1.0;
        }
        if let Some(b) = orthonormalize_against(&span, &t, 1e-10) {
            span.push(b);
        }
    }
    for v in VerticalBasis::at(p, m, d).vectors {
        if let Some(b) = orthonormalize_against(&span, &v, 1e-10) {
            span.push(b);
        }
    }
    let fixed = span.len();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        if let Some(b) = orthonormalize_against(&span, &e, 1e-8) {
            span.push(b);
        }
        if span.len() == n {
            break;
        }
    }
    span.split_off(fixed)
}

/// Time-stepped exponential map: a sphere step followed by horizontal
/// projection of the transported velocity.
pub fn exp(p: &DVector<f64>, v: &DVector<f64>, horizon: f64, dt: f64, m: usize, d: usize) -> Result<DVector<f64>> {
    check_dim(m * d, p)?;
    check_dim(m * d, v)?;
    if v.iter().all(|&c| c == 0.0) || horizon == 0.0 {
        return Ok(p.clone());
    }
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let mut gamma = p.clone();
    let mut vel = project_horizontal_tangent(p, v, m, d);
    for _ in 0..steps {
        let step = &vel * h;
        let next = normalize_preshape(&sphere::exp(&gamma, &step)?, m, d);
        let moved = sphere::transport(&gamma, &step, &vel)?;
        vel = project_horizontal_tangent(&next, &moved, m, d);
        gamma = next;
    }
    Ok(gamma)
}

fn normalize_preshape(p: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
    let c = center(p, m, d);
    let n = c.norm();
    c / n
}

/// Endpoint, final velocity, and carried vectors of a transport.
type Carried = (DVector<f64>, DVector<f64>, Vec<DVector<f64>>);

/// Time-stepped parallel transport of `x` along `Exp_p(s·dir)`; returns the
/// endpoint, the transported velocity, and the transported vectors.
fn transport_many(
    p: &DVector<f64>,
    dir: &DVector<f64>,
    xs: &[DVector<f64>],
    steps: usize,
    m: usize,
    d: usize,
) -> Result<Carried> {
    let steps = steps.max(1);
    let w = project_horizontal_tangent(p, dir, m, d);
    let theta = w.norm();
    let carried: Vec<DVector<f64>> = xs.iter().map(|x| project_horizontal_tangent(p, x, m, d)).collect();
    if theta == 0.0 {
        return Ok((p.clone(), w, carried));
    }
    let u = &w / theta;
    let curve = |t: f64| {
        let (s, c) = (theta * t).sin_cos();
        (p * c + &u * s, (&u * c - p * s) * theta)
    };
    // horizontal lift of the quotient parallel transport:
    // X' = −⟨X, γ'⟩γ + A_{γ'}X
    let rhs = |t: f64, x: &DVector<f64>| {
        let (g, v) = curve(t);
        a_tensor(&g, &v, x, m, d) - &g * x.dot(&v)
    };
    let h = 1.0 / steps as f64;
    let mut out = Vec::with_capacity(carried.len());
    for x0 in carried {
        let mut x = x0;
        for i in 0..steps {
            let t = i as f64 * h;
            let k1 = rhs(t, &x);
            let k2 = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
            let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
            let k4 = rhs(t + h, &(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        out.push(x);
    }
    let (end, vel) = curve(1.0);
    let end = normalize_preshape(&end, m, d);
    let out = out.into_iter().map(|x| project_horizontal_tangent(&end, &x, m, d)).collect();
    Ok((end, vel, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kendall {
    pub m: usize,
    pub d: usize,
    /// Sub-steps per unit time for finite exp and transport.
    pub steps: usize,
    pub log_tol: f64,
    pub log_max_iter: usize,
    /// Initial shooting step of the log map; halved whenever the residual grows.
    pub log_step: f64,
}

impl Kendall {
    pub fn new(m: usize, d: usize) -> Result<Self> {
        if m < 2 || d == 0 || m * d < 3 {
            return Err(Error::InvalidArgument(format!(
                "Kendall space needs m ≥ 2 and m·d ≥ 3, got m={m}, d={d}"
            )));
        }
        Ok(Self {
            m,
            d,
            steps: 20,
            log_tol: 1e-10,
            log_max_iter: 200,
            log_step: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.m * self.d
    }

    /// Horizontal log by shooting; returns the vector and iterations used.
    pub fn log_with_stats(&self, p: &Point, q: &Point) -> Result<(Tangent, usize)> {
        let (m, d) = (self.m, self.d);
        check_dim(m * d, p)?;
        check_dim(m * d, q)?;
        if p == q {
            return Ok((DVector::zeros(m * d), 0));
        }
        let aligned = procrustes_align(q, p, m, d);
        let dot = p.dot(&aligned);
        if dot <= tolerance::CUT_LOCUS {
            return Err(Error::CutLocus { dot });
        }
        let mut best = project_horizontal_tangent(p, &sphere::log(p, &aligned)?, m, d);
        let mut best_res = self.residual(p, q, &best)?.1.norm();
        let mut step = self.log_step;
        for iter in 0..self.log_max_iter {
            if best_res < self.log_tol {
                return Ok((best, iter));
            }
            let corr = self.correction(p, q, &best)?;
            loop {
                let cand = project_horizontal_tangent(p, &(&best + &corr * step), m, d);
                let res = self.residual(p, q, &cand)?.1.norm();
                if res < best_res {
                    best = cand;
                    best_res = res;
                    break;
                }
                step *= 0.5;
                if step < 1e-12 {
                    return Err(Error::LogNotConverged {
                        iterations: iter,
                        residual: best_res,
                    });
                }
            }
        }
        if best_res < self.log_tol {
            return Ok((best, self.log_max_iter));
        }
        Err(Error::LogNotConverged {
            iterations: self.log_max_iter,
            residual: best_res,
        })
    }

    /// Endpoint of the shot from `p` with `v`, and the horizontal log there
    /// of `q` aligned to it.
    fn residual(&self, p: &Point, q: &Point, v: &Tangent) -> Result<(Point, Tangent)> {
        let (m, d) = (self.m, self.d);
        let end = self.exp(p, v)?;
        let target = procrustes_align(q, &end, m, d);
        let r = project_horizontal_tangent(&end, &sphere::log(&end, &target)?, m, d);
        Ok((end, r))
    }

    /// Endpoint residual carried back to `p` along the reversed shot.
    fn correction(&self, p: &Point, q: &Point, v: &Tangent) -> Result<Tangent> {
        let (m, d) = (self.m, self.d);
        let (end, r) = self.residual(p, q, v)?;
        let vel_end = project_horizontal_tangent(&end, &sphere::transport(p, v, v)?, m, d);
        let (_, _, back) = transport_many(&end, &-vel_end, &[r], self.steps, m, d)?;
        Ok(back.into_iter().next().expect("one carried vector"))
    }

    pub fn shape_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        Ok(self.log(p, q)?.norm())
    }
}

impl Manifold for Kendall {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Kendall
    }

    fn point_dim(&self) -> usize {
        self.dim()
    }

    fn tangent_dim(&self) -> usize {
        self.dim()
    }

    /// Horizontal great circles are the lifts of quotient geodesics, so the
    /// closed-form sphere exp of the horizontal part is exact; [`exp`] is the
    /// stepped equivalent.
    fn exp(&self, p: &Point, v: &Tangent) -> Result<Point> {
        check_dim(self.dim(), p)?;
        check_dim(self.dim(), v)?;
        let w = project_horizontal_tangent(p, v, self.m, self.d);
        Ok(normalize_preshape(&sphere::exp(p, &w)?, self.m, self.d))
    }

    fn exp_step(&self, p: &Point, v: &Tangent) -> Result<Point> {
        check_dim(self.dim(), p)?;
        check_dim(self.dim(), v)?;
        if v.iter().all(|&c| c == 0.0) {
            return Ok(p.clone());
        }
        let w = project_horizontal_tangent(p, v, self.m, self.d);
        Ok(normalize_preshape(&sphere::exp(p, &w)?, self.m, self.d))
    }

    fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.log_with_stats(p, q).map(|(v, _)| v)
    }

    fn transport(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        check_dim(self.dim(), p)?;
        check_dim(self.dim(), dir)?;
        check_dim(self.dim(), x)?;
        if dir.iter().all(|&c| c == 0.0) {
            return Ok(project_horizontal_tangent(p, x, self.m, self.d));
        }
        let (_, _, out) = transport_many(p, dir, std::slice::from_ref(x), self.steps, self.m, self.d)?;
        Ok(out.into_iter().next().expect("one carried vector"))
    }

    fn transport_step(&self, p: &Point, dir: &Tangent, x: &Tangent) -> Result<Tangent> {
        check_dim(self.dim(), p)?;
        check_dim(self.dim(), dir)?;
        check_dim(self.dim(), x)?;
        let (_, _, out) = transport_many(p, dir, std::slice::from_ref(x), 1, self.m, self.d)?;
        Ok(out.into_iter().next().expect("one carried vector"))
    }

    fn curvature(&self, p: &Point, x: &Tangent, y: &Tangent, z: &Tangent) -> Result<Tangent> {
        let (m, d) = (self.m, self.d);
        for v in [p, x, y, z] {
            check_dim(m * d, v)?;
        }
        let x = project_horizontal_tangent(p, x, m, d);
        let y = project_horizontal_tangent(p, y, m, d);
        let z = project_horizontal_tangent(p, z, m, d);
        let axy = a_tensor(p, &x, &y, m, d);
        let ayz = a_tensor(p, &y, &z, m, d);
        let azx = a_tensor(p, &z, &x, m, d);
        let mut out = sphere::curvature(p, &x, &y, &z)?;
        out += a_tensor_adjoint(p, &z, &axy, m, d) * -2.0;
        out += a_tensor_adjoint(p, &x, &ayz, m, d);
        out += a_tensor_adjoint(p, &y, &azx, m, d);
        Ok(project_horizontal_tangent(p, &out, m, d))
    }

    fn inner(&self, _p: &Point, x: &Tangent, y: &Tangent) -> f64 {
        x.dot(y)
    }

    fn project_point(&self, p: &Point) -> Point {
        normalize_preshape(p, self.m, self.d)
    }

    fn project_tangent(&self, p: &Point, v: &Tangent) -> Tangent {
        project_horizontal_tangent(p, v, self.m, self.d)
    }

    fn validate_point(&self, p: &Point) -> PointDiagnostics {
        let mat = as_matrix(p, self.m, self.d);
        let centroid = mat.row_mean().amax();
        PointDiagnostics {
            kind: ManifoldKind::Kendall,
            residuals: vec![
                InvariantResidual {
                    name: "centered",
                    residual: centroid,
                    tolerance: tolerance::KENDALL,
                },
                InvariantResidual {
                    name: "unit norm",
                    residual: (p.norm() - 1.0).abs(),
                    tolerance: tolerance::KENDALL,
                },
            ],
        }
    }

    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        horizontal_basis(p, self.m, self.d)
    }

    fn injectivity_radius(&self) -> f64 {
        std::f64::consts::FRAC_PI_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn rot2(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    fn triangle() -> LandmarkConfig {
        to_preshape(&DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.1, 0.3, 0.9])).unwrap()
    }

    fn quad() -> LandmarkConfig {
        to_preshape(&DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.2, 1.1, 1.0, -0.1, 0.8])).unwrap()
    }

    #[test]
    fn to_preshape_examples() {
        let c = to_preshape(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0])).unwrap();
        let expected = DVector::from_row_slice(&[-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0]);
        assert!((c.coords - expected).norm() < 1e-15);

        let t = triangle();
        let again = to_preshape(&t.matrix()).unwrap();
        assert!((again.coords - &t.coords).norm() < 1e-12);

        let mut shifted = t.matrix();
        for mut row in shifted.row_iter_mut() {
            row[0] += 3.5;
            row[1] -= 1.25;
        }
        assert!((to_preshape(&shifted).unwrap().coords - &t.coords).norm() < 1e-12);
    }

    #[test]
    fn to_preshape_rejects_coincident_points() {
        let raw = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(to_preshape(&raw), Err(Error::Degenerate(_))));
    }

    #[test]
    fn validate_flags_uncentered_preshape() {
        let k = Kendall::new(2, 2).unwrap();
        let mut p = DVector::from_row_slice(&[-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0]);
        assert!(k.validate_point(&p).passed());
        p[0] += 2e-3;
        p[2] += 0.0;
        let diag = k.validate_point(&p);
        let failed: Vec<_> = diag.failures().map(|r| r.name).collect();
        assert!(failed.contains(&"centered"), "{failed:?}");
    }

    #[test]
    fn horizontal_projection_kills_vertical_vectors() {
        let p = quad().coords;
        let gen = as_vector(&(as_matrix(&p, 4, 2) * rot2(0.0).transpose() * DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])));
        assert!(horizontal_project(&p, &gen, 4, 2).norm() < 1e-9);
    }

    #[test]
    fn horizontal_projection_is_idempotent_orthogonal() {
        let p = quad().coords;
        let raw = DVector::from_row_slice(&[0.3, -0.1, 0.2, 0.5, -0.4, 0.1, 0.05, -0.3]);
        let x = sphere::project_tangent(&p, &center(&raw, 4, 2));
        let h = horizontal_project(&p, &x, 4, 2);
        assert!((horizontal_project(&p, &h, 4, 2) - &h).norm() < 1e-12);
        assert!((&x - &h).dot(&h).abs() < 1e-10);
        for v in VerticalBasis::at(&p, 4, 2).vectors {
            assert!(v.dot(&h).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_basis_drops_rank_for_collinear_configs() {
        // collinear in 3D: rotations about the line do not move it
        let raw = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let c = to_preshape(&raw).unwrap();
        assert_eq!(VerticalBasis::at(&c.coords, 3, 3).dim(), 2);
        let tri = to_preshape(&DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.2])).unwrap();
        assert_eq!(VerticalBasis::at(&tri.coords, 3, 3).dim(), 3);
    }

    #[test]
    fn procrustes_examples() {
        let base = quad();
        let same = procrustes_rotation(&base.coords, &base.coords, 4, 2);
        assert!((same - DMatrix::identity(2, 2)).norm() < 1e-12);

        let rotated = as_vector(&(base.matrix() * rot2(0.6).transpose()));
        let r = procrustes_rotation(&rotated, &base.coords, 4, 2);
        assert!((r - rot2(-0.6)).norm() < 1e-10);
        let aligned = procrustes_align(&rotated, &base.coords, 4, 2);
        assert!((aligned - &base.coords).norm() < 1e-10);
    }

    #[test]
    fn procrustes_beats_angle_grid() {
        let a = quad().coords;
        let b = triangle_like_quad();
        let aligned = procrustes_align(&b, &a, 4, 2);
        let best = (0..3600)
            .map(|i| {
                let th = i as f64 * std::f64::consts::TAU / 3600.0;
                (as_vector(&(as_matrix(&b, 4, 2) * rot2(th).transpose())) - &a).norm()
            })
            .fold(f64::INFINITY, f64::min);
        let got = (aligned - &a).norm();
        assert!(got <= best + 1e-12);
        assert!(got <= (&b - &a).norm());
    }

    fn triangle_like_quad() -> DVector<f64> {
        to_preshape(&DMatrix::from_row_slice(4, 2, &[0.2, -0.1, 0.9, 0.4, 0.7, 1.3, -0.4, 0.6]))
            .unwrap()
            .coords
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let p = quad().coords;
        assert_eq!(exp(&p, &DVector::zeros(8), 1.0, 0.01, 4, 2).unwrap(), p);
    }

    #[test]
    fn log_of_rotated_copy_is_zero() {
        let k = Kendall::new(4, 2).unwrap();
        let p = quad().coords;
        let (v, iters) = k.log_with_stats(&p, &p).unwrap();
        assert_eq!(v.norm(), 0.0);
        assert!(iters <= 1);
        let q = as_vector(&(quad().matrix() * rot2(1.1).transpose()));
        assert!(k.log(&p, &q).unwrap().norm() < 1e-9);
    }

    #[test]
    fn stepped_exp_matches_closed_form() {
        let k = Kendall::new(4, 2).unwrap();
        let p = quad().coords;
        let v = &horizontal_basis(&p, 4, 2)[1] * 0.9 + &horizontal_basis(&p, 4, 2)[3] * 0.4;
        let closed = k.exp(&p, &v).unwrap();
        let stepped = exp(&p, &v, 1.0, 1e-3, 4, 2).unwrap();
        assert!((closed - stepped).norm() < 1e-10);
    }

    #[test]
    fn log_inverts_exp_in_three_dimensions() {
        let k = Kendall::new(5, 3).unwrap();
        let raw = DMatrix::from_row_slice(5, 3, &[0.0, 0.0, 0.0, 1.0, 0.1, 0.0, 0.2, 1.1, 0.3, -0.4, 0.5, 0.9, 0.7, -0.6, 0.2]);
        let p = to_preshape(&raw).unwrap().coords;
        let basis = k.tangent_basis(&p);
        assert_eq!(basis.len(), 15 - 3 - 1 - 3);
        let v = basis.iter().enumerate().fold(DVector::zeros(15), |acc, (i, b)| acc + b * (0.13 * (i as f64 + 1.0).sin()));
        let q = k.exp(&p, &v).unwrap();
        let spun = as_vector(&(as_matrix(&q, 5, 3) * DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0])));
        let back = k.log(&p, &spun).unwrap();
        assert!((back - &v).norm() < 1e-9);
    }

    /// Transport by sphere steps followed by projection onto the horizontal
    /// space; first order in the step, so only useful with many steps.
    fn projected_transport(p: &DVector<f64>, w: &DVector<f64>, x: &DVector<f64>, steps: usize, m: usize, d: usize) -> DVector<f64> {
        let theta = w.norm();
        let u = w / theta;
        let h = 1.0 / steps as f64;
        let mut x = x.clone();
        for i in 0..steps {
            let t = i as f64 * h;
            let g = p * (theta * t).cos() + &u * (theta * t).sin();
            let v = (&u * (theta * t).cos() - p * (theta * t).sin()) * theta;
            let moved = sphere::transport(&g, &(&v * h), &x).unwrap();
            let next = p * (theta * (t + h)).cos() + &u * (theta * (t + h)).sin();
            x = project_horizontal_tangent(&next, &moved, m, d);
        }
        x
    }

    #[test]
    fn transport_matches_fine_projected_transport() {
        for (m, d) in [(4, 2), (5, 3)] {
            let k = Kendall::new(m, d).unwrap();
            let raw = DMatrix::from_fn(m, d, |i, j| ((i * d + j) as f64 * 1.7).sin() + i as f64 * 0.3);
            let p = to_preshape(&raw).unwrap().coords;
            let basis = k.tangent_basis(&p);
            let w = basis.iter().enumerate().fold(DVector::zeros(m * d), |acc, (i, b)| acc + b * (0.4 * (i as f64 + 0.5).cos()));
            let x = basis.iter().enumerate().fold(DVector::zeros(m * d), |acc, (i, b)| acc + b * (i as f64 * 0.9).sin());
            let fast = k.transport(&p, &w, &x).unwrap();
            let slow = projected_transport(&p, &w, &x, 20000, m, d);
            assert!((&fast - &slow).norm() < 1e-3 * x.norm(), "m={m} d={d}: {}", (&fast - &slow).norm());
            assert!((fast.norm() - x.norm()).abs() < 1e-7);
        }
    }

    #[test]
    fn a_tensor_is_vertical_and_alternating() {
        let p = quad().coords;
        let basis = horizontal_basis(&p, 4, 2);
        assert_eq!(basis.len(), 8 - 2 - 1 - 1);
        let a = a_tensor(&p, &basis[0], &basis[1], 4, 2);
        let b = a_tensor(&p, &basis[1], &basis[0], 4, 2);
        assert!((&a + &b).norm() < 1e-14);
        let vb = VerticalBasis::at(&p, 4, 2);
        assert!((vb.remove_from(&a)).norm() < 1e-12);
    }

    #[test]
    fn holomorphic_sectional_curvature_is_four_in_the_plane() {
        // in d = 2, X ↦ iX (rotate each landmark by 90°) preserves horizontality
        let k = Kendall::new(4, 2).unwrap();
        let p = quad().coords;
        let x = horizontal_basis(&p, 4, 2)[2].clone();
        let ix = as_vector(&(as_matrix(&x, 4, 2) * DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])));
        assert!((project_horizontal_tangent(&p, &ix, 4, 2) - &ix).norm() < 1e-12);
        let r = k.curvature(&p, &x, &ix, &ix).unwrap();
        assert!((r.dot(&x) - 4.0).abs() < 1e-10, "{}", r.dot(&x));
    }

    /// The quotient curvature assembled term by term over a horizontal basis.
    fn curvature_by_basis(p: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, m: usize, d: usize) -> DVector<f64> {
        let base = sphere::curvature(p, x, y, z).unwrap();
        let mut out = horizontal_project(p, &base, m, d);
        let axy = a_tensor(p, x, y, m, d);
        let ayz = a_tensor(p, y, z, m, d);
        let azx = a_tensor(p, z, x, m, d);
        for e in horizontal_basis(p, m, d) {
            let c = -2.0 * axy.dot(&a_tensor(p, z, &e, m, d))
                + ayz.dot(&a_tensor(p, x, &e, m, d))
                + azx.dot(&a_tensor(p, y, &e, m, d));
            out.axpy(c, &e, 1.0);
        }
        out
    }

    #[test]
    fn closed_form_curvature_matches_basis_sum() {
        for (m, d, raw) in [
            (4, 2, vec![0.0, 0.0, 1.0, 0.2, 1.1, 1.0, -0.1, 0.8]),
            (4, 3, vec![0.0, 0.0, 0.0, 1.0, 0.1, 0.2, 0.3, 1.0, -0.4, 0.2, 0.5, 1.2]),
        ] {
            let k = Kendall::new(m, d).unwrap();
            let p = to_preshape(&DMatrix::from_row_slice(m, d, &raw)).unwrap().coords;
            let b = horizontal_basis(&p, m, d);
            let x = &b[0] + &b[1] * 0.5;
            let y = &b[2] - &b[0] * 0.3;
            let z = &b[1] + &b[b.len() - 1];
            let fast = k.curvature(&p, &x, &y, &z).unwrap();
            let slow = curvature_by_basis(&p, &x, &y, &z, m, d);
            assert!((fast - slow).norm() < 1e-12, "m={m} d={d}");
        }
    }

    #[test]
    fn lyapunov_solver_general_dimension() {
        let s = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]);
        let c = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, -0.1, -0.2, 0.0, 0.3, 0.1, -0.3, 0.0]);
        let om = solve_skew_lyapunov(&s, &c);
        assert!((&s * &om + &om * &s - &c).norm() < 1e-12);
        assert!((&om + om.transpose()).norm() < 1e-15);
    }
}

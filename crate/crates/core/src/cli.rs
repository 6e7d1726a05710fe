//! Orchestration behind the `riempoly` binary: ingest, fit, report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{Euclidean, Manifold, ManifoldKind, Point};
use crate::kendall::{self, Kendall};
use crate::landmarks::{self, Format, LandmarkFileRecord};
use crate::polyflow::{integrate_polynomial, sample_curve, PolynomialState};
use crate::regress::{fit_orders, FitConfig, FitResult, Observation, TimedDataset};
use crate::so3::{self, So3};
use crate::sphere::Sphere;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifold: ManifoldKind,
    pub orders: Vec<usize>,
    pub fit: FitConfig,
    pub input: PathBuf,
    pub out: PathBuf,
    /// Points per sampled curve in `curves.csv` and `plot.csv`.
    pub samples: usize,
    pub warm_start: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub fits: Vec<FitResult>,
    pub all_converged: bool,
}

/// Input records converted to manifold points.
pub struct PreparedData {
    pub manifold: Box<dyn Manifold>,
    pub data: TimedDataset,
    /// Record ids in the dataset's (time-sorted) order.
    pub ids: Vec<String>,
    /// Landmark shape `(m, d)` of the input.
    pub shape: (usize, usize),
}

/// Builds the geometry for `kind` and maps every record onto it.
pub fn prepare(kind: ManifoldKind, records: &[LandmarkFileRecord]) -> Result<PreparedData> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("input has no records".into()))?;
    let (m, d) = first.landmarks.shape();
    let n = m * d;
    let manifold: Box<dyn Manifold> = match kind {
        ManifoldKind::Euclidean => Box::new(Euclidean::new(n)),
        ManifoldKind::Sphere => Box::new(Sphere::new(n.checked_sub(1).filter(|&k| k > 0).ok_or_else(
            || Error::InvalidArgument("sphere data needs at least 2 coordinates".into()),
        )?)?),
        ManifoldKind::So3 => {
            if n != 9 {
                return Err(Error::InvalidArgument(format!(
                    "so3 data needs 9 coordinates (row-major rotation), got {n}"
                )));
            }
            Box::new(So3::bi_invariant())
        }
        ManifoldKind::Kendall => Box::new(Kendall::new(m, d)?),
    };
    let mut keyed: Vec<(f64, String, Point)> = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.landmarks.shape() != (m, d) {
            return Err(Error::InvalidArgument(format!("record {i} ('{}') has a different shape", r.id)));
        }
        let point = match kind {
            ManifoldKind::Kendall => kendall::to_preshape(&r.landmarks).map_err(|e| e.at_observation(i))?.coords,
            ManifoldKind::Euclidean => DVector::from_row_slice(&r.flat()),
            _ => {
                let raw = DVector::from_row_slice(&r.flat());
                let p = manifold.project_point(&raw);
                if (&p - &raw).norm() > 1e-6 * raw.norm().max(1.0) {
                    log::warn!("record '{}' projected onto the {kind} by {:e}", r.id, (&p - &raw).norm());
                }
                p
            }
        };
        keyed.push((r.time, r.id.clone(), point));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ids = keyed.iter().map(|k| k.1.clone()).collect();
    let data = TimedDataset::from_original(
        keyed
            .into_iter()
            .map(|(time, _, point)| Observation { time, point })
            .collect(),
    )?;
    Ok(PreparedData {
        manifold,
        data,
        ids,
        shape: (m, d),
    })
}

fn format_for(path: &Path) -> Result<Format> {
    Format::from_path(path).ok_or_else(|| {
        Error::InvalidArgument(format!("cannot tell the format of '{}' (expected .csv or .tps)", path.display()))
    })
}

/// Fits every order and writes `fit.json`, `curves.csv`, `residuals.csv` and `plot.csv`.
pub fn run_regression(cfg: &RunConfig) -> Result<RunReport> {
    if cfg.orders.is_empty() {
        return Err(Error::InvalidArgument("no orders requested".into()));
    }
    if cfg.samples < 2 {
        return Err(Error::InvalidArgument("samples must be at least 2".into()));
    }
    let records = landmarks::parse_landmarks(&cfg.input, format_for(&cfg.input)?)?;
    let prep = prepare(cfg.manifold, &records)?;
    let m = prep.manifold.as_ref();
    let fits = fit_orders(m, &prep.data, &cfg.orders, &cfg.fit, cfg.warm_start)?;

    fs::create_dir_all(&cfg.out)?;
    write_fit_json(&cfg.out.join("fit.json"), cfg, &prep, &fits)?;
    write_curves(&cfg.out.join("curves.csv"), m, &prep, &fits, cfg.samples)?;
    write_residuals(&cfg.out.join("residuals.csv"), &prep, &fits)?;
    let mut plot = BufWriter::new(File::create(cfg.out.join("plot.csv"))?);
    let mut header_written = false;
    for f in &fits {
        emit_plot_data(&mut plot, m, f, &prep, cfg.samples, !header_written)?;
        header_written = true;
    }
    plot.flush()?;

    let all_converged = fits.iter().all(|f| f.converged);
    Ok(RunReport { fits, all_converged })
}

fn vecs(vs: &[DVector<f64>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.as_slice().to_vec()).collect()
}

fn write_fit_json(path: &Path, cfg: &RunConfig, prep: &PreparedData, fits: &[FitResult]) -> Result<()> {
    let tm = prep.data.time_map;
    let entries: Vec<_> = fits
        .iter()
        .map(|f| {
            json!({
                "order": f.order,
                "converged": f.converged,
                "stop_reason": format!("{:?}", f.stop_reason),
                "iterations": f.iterations,
                "sse": f.sse,
                "frechet_variance": f.frechet_variance,
                "r_squared": f.r_squared,
                "gradient_norm": f.gradient_norm,
                "collinearity": f.collinearity,
                "params": {
                    "gamma": f.params.gamma.as_slice(),
                    "vels_internal": vecs(&f.params.vels),
                    "vels_original": vecs(&tm.velocities_to_original(&f.params.vels)),
                },
                "trace": f.trace,
            })
        })
        .collect();
    let doc = json!({
        "manifold": cfg.manifold,
        "observations": prep.data.len(),
        "landmarks": prep.shape.0,
        "dimension": prep.shape.1,
        "time_map": {
            "origin": tm.origin,
            "scale": tm.scale,
            "note": "internal time s = (t - origin) / scale maps the observed range onto [0, 1]; vels_original[i] = vels_internal[i] / scale^(i+1)",
        },
        "config": {
            "steps": cfg.fit.steps,
            "max_iters": cfg.fit.max_iters,
            "tol": cfg.fit.tol,
            "step_size": cfg.fit.step_size,
            "descent": format!("{:?}", cfg.fit.descent),
            "warm_start": cfg.warm_start,
        },
        "fits": entries,
    });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn sample_times(samples: usize) -> Vec<f64> {
    (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect()
}

fn sampled(f: &FitResult, samples: usize) -> Result<Vec<(f64, Point)>> {
    let ts = sample_times(samples);
    let pts = sample_curve(&f.trajectory, &ts)?;
    Ok(ts.into_iter().zip(pts).collect())
}

fn write_curves(path: &Path, m: &dyn Manifold, prep: &PreparedData, fits: &[FitResult], samples: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = m.point_dim();
    let mut header = vec!["order".to_string(), "time".to_string()];
    header.extend((1..=n).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    for f in fits {
        for (s, p) in sampled(f, samples)? {
            let mut row = vec![f.order.to_string(), prep.data.time_map.to_original(s).to_string()];
            row.extend(p.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_residuals(path: &Path, prep: &PreparedData, fits: &[FitResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["order", "id", "time", "distance"])?;
    for f in fits {
        for ((obs, id), dist) in prep.data.observations.iter().zip(&prep.ids).zip(&f.residuals) {
            w.write_record([
                f.order.to_string(),
                id.clone(),
                prep.data.time_map.to_original(obs.time).to_string(),
                dist.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes per-landmark curve polylines and the observations as CSV rows
/// `kind,order,landmark,time,c1..cd`. Kendall observations are rotated onto
/// the fitted shape at their time for display; nothing else is altered.
pub fn emit_plot_data<W: Write>(
    w: W,
    m: &dyn Manifold,
    fit: &FitResult,
    prep: &PreparedData,
    samples: usize,
    header: bool,
) -> Result<()> {
    let (lm, d) = match m.kind() {
        ManifoldKind::Kendall => prep.shape,
        _ => (1, m.point_dim()),
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if header {
        let mut h = vec!["kind".to_string(), "order".to_string(), "landmark".to_string(), "time".to_string()];
        h.extend((1..=d).map(|i| format!("c{i}")));
        w.write_record(&h)?;
    }
    let tm = prep.data.time_map;
    let mut emit = |kind: &str, t: f64, p: &Point| -> Result<()> {
        for l in 0..lm {
            let mut row = vec![kind.to_string(), fit.order.to_string(), l.to_string(), tm.to_original(t).to_string()];
            row.extend(p.as_slice()[l * d..(l + 1) * d].iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        Ok(())
    };
    for (s, p) in sampled(fit, samples)? {
        emit("curve", s, &p)?;
    }
    for obs in &prep.data.observations {
        let p = match m.kind() {
            ManifoldKind::Kendall => {
                let at = &fit.trajectory.states[fit.trajectory.node_index(obs.time)?].gamma;
                kendall::procrustes_align(&obs.point, at, lm, d)
            }
            _ => obs.point.clone(),
        };
        emit("observation", obs.time, &p)?;
    }
    w.flush()?;
    Ok(())
}

/// Base point and nested initial velocities used by `simulate`.
pub fn simulation_seed(kind: ManifoldKind, order: usize) -> Result<(Box<dyn Manifold>, PolynomialState)> {
    let (manifold, base): (Box<dyn Manifold>, Point) = match kind {
        ManifoldKind::Euclidean => (Box::new(Euclidean::new(3)), DVector::zeros(3)),
        ManifoldKind::Sphere => (Box::new(Sphere::new(2)?), DVector::from_row_slice(&[0.0, 0.0, 1.0])),
        ManifoldKind::So3 => (
            Box::new(So3::bi_invariant()),
            so3::point_from_matrix(&nalgebra::Matrix3::identity()),
        ),
        ManifoldKind::Kendall => {
            let raw = DMatrix::from_fn(5, 2, |i, j| {
                let th = i as f64 * std::f64::consts::TAU / 5.0;
                if j == 0 {
                    th.cos()
                } else {
                    th.sin() * (1.0 + 0.2 * i as f64)
                }
            });
            (Box::new(Kendall::new(5, 2)?), kendall::to_preshape(&raw)?.coords)
        }
    };
    let basis = manifold.tangent_basis(&base);
    let scale = match kind {
        ManifoldKind::Kendall => 0.3,
        _ => 1.0,
    };
    let coef = [1.0, 1.5, -3.0, 4.0, -5.0, 6.0];
    if order > coef.len() {
        return Err(Error::InvalidArgument(format!("order {order} above {}", coef.len())));
    }
    let vels = (0..order)
        .map(|i| &basis[i % basis.len()] * (scale * coef[i]))
        .collect();
    Ok((manifold, PolynomialState::new(base, vels)))
}

/// Writes curves of orders `1..=order` sharing a base point, each extending
/// the previous one's initial conditions by one vector.
pub fn simulate(kind: ManifoldKind, order: usize, steps: usize, samples: usize, out: &Path) -> Result<()> {
    if order == 0 || samples < 2 {
        return Err(Error::InvalidArgument("simulate needs order ≥ 1 and samples ≥ 2".into()));
    }
    let (manifold, full) = simulation_seed(kind, order)?;
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["order".to_string(), "time".to_string()];
    header.extend((1..=manifold.point_dim()).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    let ts = sample_times(samples);
    for k in 1..=order {
        let s = full.with_order(manifold.as_ref(), k);
        let traj = integrate_polynomial(manifold.as_ref(), &s, 1.0, steps)?;
        for (t, p) in ts.iter().zip(sample_curve(&traj, &ts)?) {
            let mut row = vec![k.to_string(), t.to_string()];
            row.extend(p.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn convert_tps(input: &Path, out: &Path) -> Result<usize> {
    let recs = landmarks::parse_landmarks(input, Format::Tps)?;
    let file = BufWriter::new(File::create(out)?);
    landmarks::write_csv(file, &recs)?;
    Ok(recs.len())
}

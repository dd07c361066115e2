//! Simulated measurements, reconstruction on an evaluation grid and
//! sweet-spot statistics for the two ambisonic pipelines.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::geometry::{ArrayGeometry, Axis, Baffle, PlaneWave, Rotation, Vec3};
use crate::numerics::SolveReport;
use crate::spherical::{
    encode_spherical_with_report, plane_wave_coeffs, reconstruct_field, rigid_sphere_surface_pressure, SphericalCoeffs,
};
use crate::spheroidal::{
    encode_spheroidal, encoding_matrix_spheroidal, index_a, index_b, len_a, plane_wave_coeffs_spheroidal,
    SpheroidalCoeffs,
};
use crate::swf::SwfContext;
use crate::transcode::transcode;

/// Upper cap on reported SDR.
pub const SDR_CAP_DB: f64 = 300.0;
/// Ground-truth magnitudes below this are excluded from the SDR map.
pub const SDR_FLOOR: f64 = 1e-12;
/// Relative change allowed between the simulation order and its check.
pub const SIM_TOLERANCE: f64 = 1e-8;

/// Internal order used to synthesize microphone signals for encoding order `order`.
pub fn simulation_order(order: usize) -> usize {
    2 * order + 6
}

fn max_rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
        / scale.max(f64::MIN_POSITIVE)
}

/// Total pressure at every microphone for an incident plane wave, from the
/// analytic coefficients at order `n_sim`.
///
/// The sphere result is checked against order `2 n_sim`; the spheroid result
/// against the same sum without its two highest degrees (higher orders would
/// need factorials beyond double range at large `m`).
pub fn simulate_observation(
    pw: &PlaneWave,
    mics: &ArrayGeometry,
    n_sim: usize,
    ctx: Option<&SwfContext>,
) -> Result<Vec<Complex64>> {
    match mics.baffle {
        Baffle::RigidSphere { radius } => {
            let p = rigid_sphere_surface_pressure(&plane_wave_coeffs(pw, n_sim), radius, mics)?;
            let check = rigid_sphere_surface_pressure(&plane_wave_coeffs(pw, 2 * n_sim), radius, mics)?;
            let diff = max_rel_diff(&check, &p);
            if !(diff < SIM_TOLERANCE) {
                return Err(Error::numerical(format!(
                    "sphere simulation at order {n_sim} changes by {diff:e} when doubled"
                )));
            }
            Ok(p)
        }
        Baffle::RigidProlateSpheroid { params, long_axis } => {
            let ctx = ctx.ok_or_else(|| Error::domain("spheroid simulation needs spheroidal tables"))?;
            let local = pw.in_frame(&Rotation::local_z_to(long_axis));
            let coeffs = plane_wave_coeffs_spheroidal(&local, ctx, params.a, n_sim)?;
            let lambda = encoding_matrix_spheroidal(mics, ctx, n_sim)?;
            let x = coeffs.stacked();
            let p = lambda.mul_vec(&x)?;
            let mut truncated = x.clone();
            let la = len_a(n_sim);
            for n in n_sim.saturating_sub(1)..=n_sim {
                for m in 0..=n {
                    truncated[index_a(m, n)] = Complex64::new(0.0, 0.0);
                    if m > 0 {
                        truncated[la + index_b(m, n)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            let q = lambda.mul_vec(&truncated)?;
            let diff = max_rel_diff(&p, &q);
            if !(diff < SIM_TOLERANCE) {
                return Err(Error::numerical(format!(
                    "spheroid simulation at order {n_sim}: last two degrees contribute {diff:e}"
                )));
            }
            Ok(p)
        }
    }
}

/// Pointwise `10 log10(|p_true|² / |p_true - p_rec|²)`, capped at
/// [`SDR_CAP_DB`]; NaN where `|p_true| < SDR_FLOOR`.
pub fn sdr_map(p_true: &[Complex64], p_rec: &[Complex64]) -> Result<Vec<f64>> {
    if p_true.len() != p_rec.len() {
        return Err(Error::domain(format!(
            "SDR needs equal lengths, got {} and {}",
            p_true.len(),
            p_rec.len()
        )));
    }
    Ok(p_true
        .iter()
        .zip(p_rec)
        .map(|(t, r)| {
            if t.norm() < SDR_FLOOR {
                return f64::NAN;
            }
            let err = (t - r).norm_sqr();
            if err == 0.0 {
                return SDR_CAP_DB;
            }
            (10.0 * (t.norm_sqr() / err).log10()).min(SDR_CAP_DB)
        })
        .collect())
}

/// Rectangular evaluation grid in a plane of constant `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    #[serde(default)]
    pub z: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 201,
            ny: 201,
            x_min: -2.0,
            x_max: 2.0,
            y_min: -2.0,
            y_max: 2.0,
            z: 0.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::domain(format!(
                "grid needs at least 2x2 points over a nonempty rectangle, got {}x{} over [{}, {}]x[{}, {}]",
                self.nx, self.ny, self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy()
    }

    /// Row-major points, `x` fastest.
    pub fn points(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push([self.x(i), self.y(j), self.z]);
            }
        }
        out
    }
}

/// Ground truth and reconstruction sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub k: f64,
    /// Frame the grid coordinates are given in.
    pub frame: Axis,
    pub p_true: Vec<Complex64>,
    pub p_rec: Vec<Complex64>,
    pub sdr_db: Vec<f64>,
    /// Points strictly inside the baffle.
    pub interior: Vec<bool>,
}

impl FieldGrid {
    pub fn new(
        spec: GridSpec,
        k: f64,
        p_true: Vec<Complex64>,
        p_rec: Vec<Complex64>,
        baffle: Option<&Baffle>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = spec.nx * spec.ny;
        if p_true.len() != n || p_rec.len() != n {
            return Err(Error::domain(format!(
                "grid of {n} points got {} true and {} reconstructed values",
                p_true.len(),
                p_rec.len()
            )));
        }
        let sdr_db = sdr_map(&p_true, &p_rec)?;
        let interior = match baffle {
            Some(b) => spec.points().iter().map(|p| b.contains(p)).collect(),
            None => vec![false; n],
        };
        Ok(Self {
            spec,
            k,
            frame: Axis::Z,
            p_true,
            p_rec,
            sdr_db,
            interior,
        })
    }

    pub fn len(&self) -> usize {
        self.p_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_true.is_empty()
    }

    pub fn sdr_at(&self, i: usize, j: usize) -> f64 {
        self.sdr_db[j * self.spec.nx + i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweetSpotMetrics {
    pub threshold_db: f64,
    /// Extent along x of the above-threshold run through the origin, meters.
    pub width_x: f64,
    pub width_y: f64,
    /// Above-threshold area outside the baffle, m².
    pub area_m2: f64,
    /// SDR at the grid point nearest the origin.
    pub origin_sdr_db: f64,
}

fn nearest_index(min: f64, step: f64, count: usize) -> usize {
    (((0.0 - min) / step).round().max(0.0) as usize).min(count - 1)
}

/// Number of steps spanned by the above-threshold run containing `start`,
/// or `None` when `start` itself is below threshold.
fn run_through(values: impl Fn(usize) -> f64, count: usize, start: usize, threshold: f64) -> Option<usize> {
    let above = |i: usize| values(i) > threshold;
    if !above(start) {
        return None;
    }
    let (mut lo, mut hi) = (start, start);
    while lo > 0 && above(lo - 1) {
        lo -= 1;
    }
    while hi + 1 < count && above(hi + 1) {
        hi += 1;
    }
    Some(hi - lo)
}

/// Sweet-spot widths along the grid axes through the origin and the
/// above-threshold area.
///
/// A width is the distance between the outermost above-threshold points of
/// the run, so a grid above threshold everywhere has the full extent. The
/// baffle interior is part of the runs because the origin lies inside it.
pub fn sweet_spot(grid: &FieldGrid, threshold_db: f64) -> SweetSpotMetrics {
    let s = &grid.spec;
    let (i0, j0) = (nearest_index(s.x_min, s.dx(), s.nx), nearest_index(s.y_min, s.dy(), s.ny));
    let wx = run_through(|i| grid.sdr_at(i, j0), s.nx, i0, threshold_db);
    let wy = run_through(|j| grid.sdr_at(i0, j), s.ny, j0, threshold_db);
    let cells = grid
        .sdr_db
        .iter()
        .zip(&grid.interior)
        .filter(|(v, inside)| **v > threshold_db && !**inside)
        .count();
    SweetSpotMetrics {
        threshold_db,
        width_x: wx.map_or(0.0, |w| w as f64 * s.dx()),
        width_y: wy.map_or(0.0, |w| w as f64 * s.dy()),
        area_m2: cells as f64 * s.dx() * s.dy(),
        origin_sdr_db: grid.sdr_at(i0, j0),
    }
}

/// Parameters for one incidence of the two-pipeline comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub name: String,
    pub wave: PlaneWave,
    pub sphere: ArrayGeometry,
    pub spheroid: ArrayGeometry,
    pub order: usize,
    pub sigma: f64,
    pub n_sum: usize,
    pub grid: GridSpec,
    pub threshold_db: f64,
}

/// Everything produced for one incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub wave: PlaneWave,
    /// Spherical coefficients from the sphere array (global frame).
    pub hoa: SphericalCoeffs,
    pub hoa_report: SolveReport,
    /// Spheroidal coefficients from the spheroid array (local frame).
    pub spheroidal: SpheroidalCoeffs,
    pub spheroidal_report: SolveReport,
    /// Transcoded spheroidal coefficients, rotated to the global frame.
    pub transcoded: SphericalCoeffs,
    pub truth: FieldGrid,
    pub hoa_grid: FieldGrid,
    pub pshoa_grid: FieldGrid,
    pub hoa_metrics: SweetSpotMetrics,
    pub pshoa_metrics: SweetSpotMetrics,
}

/// Tables needed by [`run_case`] for encoding order `order`.
pub fn required_table_order(order: usize, n_sum: usize) -> usize {
    simulation_order(order).max(n_sum)
}

/// Runs both pipelines for one incidence.
pub fn run_case(spec: &CaseSpec, ctx: &SwfContext) -> Result<CaseResult> {
    spec.grid.validate().stage("grid")?;
    let pw = &spec.wave;
    let n_sim = simulation_order(spec.order);
    let points = spec.grid.points();
    let truth_values: Vec<Complex64> = points.par_iter().map(|p| pw.value_at(p)).collect();

    // sphere
    let p_sphere = simulate_observation(pw, &spec.sphere, n_sim, None).stage("simulate sphere")?;
    let (hoa, hoa_report) = encode_spherical_with_report(&p_sphere, &spec.sphere, pw.k, spec.order, spec.sigma)
        .stage("encode sphere")?;
    let hoa_rec = reconstruct_field(&hoa, &points);

    // spheroid
    let p_spheroid = simulate_observation(pw, &spec.spheroid, n_sim, Some(ctx)).stage("simulate spheroid")?;
    let (spheroidal, spheroidal_report) =
        encode_spheroidal(&p_spheroid, &spec.spheroid, ctx, spec.order, spec.sigma).stage("encode spheroid")?;
    let local = transcode(&spheroidal, ctx, spec.order, spec.n_sum).stage("transcode")?;
    let transcoded = local.to_global();
    let pshoa_rec = reconstruct_field(&transcoded, &points);

    let truth = FieldGrid::new(spec.grid, pw.k, truth_values.clone(), truth_values.clone(), None).stage("evaluate")?;
    let hoa_grid =
        FieldGrid::new(spec.grid, pw.k, truth_values.clone(), hoa_rec, Some(&spec.sphere.baffle)).stage("evaluate")?;
    let pshoa_grid =
        FieldGrid::new(spec.grid, pw.k, truth_values, pshoa_rec, Some(&spec.spheroid.baffle)).stage("evaluate")?;
    let hoa_metrics = sweet_spot(&hoa_grid, spec.threshold_db);
    let pshoa_metrics = sweet_spot(&pshoa_grid, spec.threshold_db);
    log::info!(
        "{}: HOA widths {:.3} x {:.3} m, ps-HOA widths {:.3} x {:.3} m",
        spec.name,
        hoa_metrics.width_x,
        hoa_metrics.width_y,
        pshoa_metrics.width_x,
        pshoa_metrics.width_y
    );
    Ok(CaseResult {
        name: spec.name.clone(),
        wave: *pw,
        hoa,
        hoa_report,
        spheroidal,
        spheroidal_report,
        transcoded,
        truth,
        hoa_grid,
        pshoa_grid,
        hoa_metrics,
        pshoa_metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_sphere_array;

    #[test]
    fn sdr_definition() {
        let t = vec![Complex64::new(1.0, 0.0); 3];
        let r = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0 - 10f64.powf(-1.5), 0.0),
        ];
        let s = sdr_map(&t, &r).unwrap();
        assert_eq!(s[0], SDR_CAP_DB);
        assert!(s[1].abs() < 1e-12);
        assert!((s[2] - 30.0).abs() < 1e-9);
        let s = sdr_map(&[Complex64::new(0.0, 0.0)], &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!(s[0].is_nan());
        assert!(sdr_map(&t, &r[..2]).is_err());
    }

    fn uniform_grid(sdr: f64) -> FieldGrid {
        let spec = GridSpec {
            nx: 11,
            ny: 11,
            ..GridSpec::default()
        };
        let n = spec.nx * spec.ny;
        let mut g = FieldGrid::new(spec, 1.0, vec![Complex64::new(1.0, 0.0); n], vec![Complex64::new(1.0, 0.0); n], None)
            .unwrap();
        g.sdr_db = vec![sdr; n];
        g
    }

    #[test]
    fn uniform_sweet_spots() {
        let m = sweet_spot(&uniform_grid(40.0), 30.0);
        assert!((m.width_x - 4.0).abs() < 1e-12 && (m.width_y - 4.0).abs() < 1e-12);
        assert!((m.area_m2 - 121.0 * 0.16).abs() < 1e-9);
        let m = sweet_spot(&uniform_grid(20.0), 30.0);
        assert_eq!((m.width_x, m.width_y, m.area_m2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_simulation_converges_and_low_k_is_uniform() {
        let arr = build_sphere_array(0.198, 16, 32).unwrap();
        let pw = PlaneWave::new(541.8, 343.0, [1.0, 0.0, 0.0]).unwrap();
        let a = simulate_observation(&pw, &arr, 30, None).unwrap();
        let crate::geometry::Baffle::RigidSphere { radius } = arr.baffle else { unreachable!() };
        let b = rigid_sphere_surface_pressure(&plane_wave_coeffs(&pw, 60), radius, &arr).unwrap();
        assert!(max_rel_diff(&b, &a) < 1e-10);
        let slow = PlaneWave::from_wavenumber(1e-4, [0.0, 0.0, 1.0]).unwrap();
        let p = simulate_observation(&slow, &arr, 12, None).unwrap();
        assert!(p.iter().all(|v| (v - 1.0).norm() < 1e-3));
    }
}

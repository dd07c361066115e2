//! Spherical ambisonics on a rigid sphere.
//!
//! Coefficients `A_n^m(k)` expand the incident field in regular spherical
//! wave functions, `p(r) = Σ A_n^m j_n(kr) Y_n^m(θ, φ)`, and are stored at
//! flat index `n² + n + m`. Time dependence is `e^{-iωt}` throughout.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{spherical_from_cartesian, ArrayGeometry, Axis, Baffle, PlaneWave, Rotation, Vec3};
use crate::numerics::{rls_solve_with_report, ComplexMatrix, SolveReport};
use crate::special::{derivatives, gauss_legendre, sh_index, sph_harmonics_all, sph_jn_all, sph_yn_all};

/// Spherical ambisonic coefficients up to order `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCoeffs {
    pub order: usize,
    pub k: f64,
    /// Global axis the coefficient frame's z-axis points along.
    pub frame: Axis,
    pub values: Vec<Complex64>,
}

impl SphericalCoeffs {
    pub fn zeros(order: usize, k: f64) -> Self {
        Self {
            order,
            k,
            frame: Axis::Z,
            values: vec![Complex64::new(0.0, 0.0); (order + 1) * (order + 1)],
        }
    }

    pub fn new(order: usize, k: f64, frame: Axis, values: Vec<Complex64>) -> Result<Self> {
        let expected = (order + 1) * (order + 1);
        if values.len() != expected {
            return Err(Error::domain(format!(
                "order {order} needs {expected} spherical coefficients, got {}",
                values.len()
            )));
        }
        Ok(Self {
            order,
            k,
            frame,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `A_n^m`, zero above the stored order.
    pub fn get(&self, n: usize, m: i64) -> Complex64 {
        if n > self.order || m.unsigned_abs() as usize > n {
            return Complex64::new(0.0, 0.0);
        }
        self.values[sh_index(n, m)]
    }

    /// The same field with coefficients referred to the global frame.
    pub fn to_global(&self) -> SphericalCoeffs {
        if self.frame == Axis::Z {
            return self.clone();
        }
        let mut out = rotate(self, &Rotation::local_z_to(self.frame));
        out.frame = Axis::Z;
        out
    }
}

/// `4π i^n Y_n^m(θ_i, φ_i)*` for the direction of `pw` in the global frame.
pub fn plane_wave_coeffs(pw: &PlaneWave, order: usize) -> SphericalCoeffs {
    let (_, theta, phi) = spherical_from_cartesian(&pw.direction);
    let y = sph_harmonics_all(order, theta, phi);
    let mut out = SphericalCoeffs::zeros(order, pw.k);
    for n in 0..=order {
        let scale = 4.0 * PI * Complex64::i().powu(n as u32);
        for m in -(n as i64)..=n as i64 {
            let l = sh_index(n, m);
            out.values[l] = scale * y[l].conj();
        }
    }
    out
}

/// Rigid-sphere surface factors `i / ((kR)² h_n'(kR))` for `n <= order`.
pub fn sphere_surface_factors(order: usize, kr: f64) -> Result<Vec<Complex64>> {
    if !(kr > 0.0) || !kr.is_finite() {
        return Err(Error::domain(format!("rigid-sphere factor needs kR > 0, got {kr}")));
    }
    let dj = derivatives(&sph_jn_all(order + 1, kr), kr);
    let dy = derivatives(&sph_yn_all(order + 1, kr), kr);
    Ok((0..=order)
        .map(|n| Complex64::i() / (kr * kr * Complex64::new(dj[n], dy[n])))
        .collect())
}

fn sphere_radius(mics: &ArrayGeometry) -> Result<f64> {
    match mics.baffle {
        Baffle::RigidSphere { radius } => Ok(radius),
        _ => Err(Error::domain("array is not mounted on a rigid sphere")),
    }
}

/// Inverse encoding matrix: row `q`, column `n² + n + m` holds
/// `i / ((kR)² h_n'(kR)) Y_n^m(θ_q, φ_q)`.
pub fn encoding_matrix(mics: &ArrayGeometry, radius: f64, k: f64, order: usize) -> Result<ComplexMatrix> {
    let factors = sphere_surface_factors(order, k * radius)?;
    let cols = (order + 1) * (order + 1);
    let rows: Vec<Vec<Complex64>> = mics
        .mics
        .par_iter()
        .map(|mic| {
            let (theta, phi) = mic.native;
            let y = sph_harmonics_all(order, theta, phi);
            (0..cols)
                .map(|l| {
                    let n = (l as f64).sqrt() as usize;
                    factors[n] * y[l]
                })
                .collect()
        })
        .collect();
    ComplexMatrix::from_row_major(mics.len(), cols, rows.concat())
}

/// Total pressure at each microphone of a rigid sphere of radius `radius`.
pub fn rigid_sphere_surface_pressure(
    coeffs: &SphericalCoeffs,
    radius: f64,
    mics: &ArrayGeometry,
) -> Result<Vec<Complex64>> {
    let r = sphere_radius(mics)?;
    if (r - radius).abs() > 1e-12 * radius {
        return Err(Error::domain(format!(
            "array radius {r} does not match requested radius {radius}"
        )));
    }
    if coeffs.frame != Axis::Z {
        return Err(Error::domain("sphere pressures need coefficients in the global frame"));
    }
    let lambda = encoding_matrix(mics, radius, coeffs.k, coeffs.order)?;
    lambda.mul_vec(&coeffs.values)
}

/// Least-squares spherical encoding with Tikhonov weight `sigma`.
pub fn encode_spherical(
    pressures: &[Complex64],
    mics: &ArrayGeometry,
    k: f64,
    order: usize,
    sigma: f64,
) -> Result<SphericalCoeffs> {
    encode_spherical_with_report(pressures, mics, k, order, sigma).map(|(c, _)| c)
}

pub fn encode_spherical_with_report(
    pressures: &[Complex64],
    mics: &ArrayGeometry,
    k: f64,
    order: usize,
    sigma: f64,
) -> Result<(SphericalCoeffs, SolveReport)> {
    let unknowns = (order + 1) * (order + 1);
    if mics.len() < unknowns {
        return Err(Error::Underdetermined {
            observations: mics.len(),
            unknowns,
        });
    }
    if pressures.len() != mics.len() {
        return Err(Error::domain(format!(
            "{} pressures for {} microphones",
            pressures.len(),
            mics.len()
        )));
    }
    let radius = sphere_radius(mics)?;
    let lambda = encoding_matrix(mics, radius, k, order)?;
    let (values, report) = rls_solve_with_report(&lambda, pressures, sigma)?;
    if report.is_rank_deficient() {
        log::warn!(
            "spherical encoding matrix has effective rank {} of {}",
            report.effective_rank,
            report.unknowns
        );
    }
    Ok((SphericalCoeffs::new(order, k, Axis::Z, values)?, report))
}

/// Evaluates `Σ A_n^m j_n(kr) Y_n^m(θ, φ)` at points given in the coefficient frame.
pub fn reconstruct_field(coeffs: &SphericalCoeffs, points: &[Vec3]) -> Vec<Complex64> {
    let order = coeffs.order;
    points
        .par_iter()
        .map(|p| {
            let (r, theta, phi) = spherical_from_cartesian(p);
            let j = sph_jn_all(order, coeffs.k * r);
            let y = sph_harmonics_all(order, theta, phi);
            let mut sum = Complex64::new(0.0, 0.0);
            for n in 0..=order {
                let mut inner = Complex64::new(0.0, 0.0);
                for m in -(n as i64)..=n as i64 {
                    let l = sh_index(n, m);
                    inner += coeffs.values[l] * y[l];
                }
                sum += inner * j[n];
            }
            sum
        })
        .collect()
}

/// Re-expands coefficients given in a local frame in the frame reached by
/// `to_global` (global point = `to_global.apply(local point)`).
///
/// Each degree is projected separately with a quadrature that is exact for
/// products of two harmonics of that degree.
pub fn rotate(coeffs: &SphericalCoeffs, to_global: &Rotation) -> SphericalCoeffs {
    let order = coeffs.order;
    let rule = gauss_legendre(order + 1).expect("positive quadrature size");
    let n_phi = 2 * order + 2;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(rule.len() * n_phi);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        for j in 0..n_phi {
            nodes.push((x.acos(), j as f64 * dphi, w * dphi));
        }
    }
    let partial: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .map(|&(theta, phi, w)| {
            let (st, ct) = theta.sin_cos();
            let g = [st * phi.cos(), st * phi.sin(), ct];
            let local = to_global.apply_inverse(&g);
            let (_, lt, lp) = spherical_from_cartesian(&local);
            let y_local = sph_harmonics_all(order, lt, lp);
            let y_global = sph_harmonics_all(order, theta, phi);
            let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
            for n in 0..=order {
                let mut f = Complex64::new(0.0, 0.0);
                for m in -(n as i64)..=n as i64 {
                    let l = sh_index(n, m);
                    f += coeffs.values[l] * y_local[l];
                }
                for m in -(n as i64)..=n as i64 {
                    let l = sh_index(n, m);
                    out[l] = f * y_global[l].conj() * w;
                }
            }
            out
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for row in &partial {
        for (v, r) in values.iter_mut().zip(row) {
            *v += r;
        }
    }
    SphericalCoeffs {
        order,
        k: coeffs.k,
        frame: coeffs.frame,
        values,
    }
}

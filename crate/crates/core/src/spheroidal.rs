//! Prolate spheroidal ambisonics on a rigid spheroid.
//!
//! The incident field is expanded as
//!
//! ```text
//! p(ξ, η, φ) = Σ_{n} Σ_{m<=n} R1_mn(c, ξ) S_mn(c, η) (A_mn cos mφ + B_mn sin mφ)
//! ```
//!
//! in the spheroid's local frame (long axis along local z). `A_mn` sits at
//! `n(n+1)/2 + m` and `B_mn` (m >= 1) at `n(n-1)/2 + m - 1`; stacking `A`
//! then `B` gives `(N+1)²` unknowns.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    prolate_from_cartesian, spherical_from_cartesian, ArrayGeometry, Axis, Baffle, PlaneWave, ProlateParams, Vec3,
};
use crate::numerics::{rls_solve_with_report, ComplexMatrix, SolveReport};
use crate::swf::{angular_s_unchecked, radial, radial_first_value, RadialKind, SwfContext};

/// Index of `A_mn`.
#[inline]
pub fn index_a(m: usize, n: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Index of `B_mn`, `m >= 1`.
#[inline]
pub fn index_b(m: usize, n: usize) -> usize {
    n * (n - 1) / 2 + m - 1
}

pub fn len_a(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

pub fn len_b(order: usize) -> usize {
    order * (order + 1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpheroidalCoeffs {
    pub order: usize,
    pub c: f64,
    /// Half interfocal distance in meters.
    pub a: f64,
    /// Global axis along the spheroid's long axis.
    pub frame: Axis,
    pub a_coeffs: Vec<Complex64>,
    pub b_coeffs: Vec<Complex64>,
}

impl SpheroidalCoeffs {
    pub fn zeros(order: usize, c: f64, a: f64) -> Self {
        Self {
            order,
            c,
            a,
            frame: Axis::Z,
            a_coeffs: vec![Complex64::new(0.0, 0.0); len_a(order)],
            b_coeffs: vec![Complex64::new(0.0, 0.0); len_b(order)],
        }
    }

    /// Splits a stacked `[A; B]` vector.
    pub fn from_stacked(order: usize, c: f64, a: f64, frame: Axis, x: &[Complex64]) -> Result<Self> {
        let la = len_a(order);
        if x.len() != la + len_b(order) {
            return Err(Error::domain(format!(
                "order {order} needs {} spheroidal coefficients, got {}",
                la + len_b(order),
                x.len()
            )));
        }
        Ok(Self {
            order,
            c,
            a,
            frame,
            a_coeffs: x[..la].to_vec(),
            b_coeffs: x[la..].to_vec(),
        })
    }

    pub fn stacked(&self) -> Vec<Complex64> {
        let mut out = self.a_coeffs.clone();
        out.extend_from_slice(&self.b_coeffs);
        out
    }

    /// `A_mn`, zero beyond the stored order.
    pub fn a(&self, m: usize, n: usize) -> Complex64 {
        if m > n || n > self.order {
            return Complex64::new(0.0, 0.0);
        }
        self.a_coeffs[index_a(m, n)]
    }

    /// `B_mn`, identically zero for `m = 0`.
    pub fn b(&self, m: usize, n: usize) -> Complex64 {
        if m == 0 || m > n || n > self.order {
            return Complex64::new(0.0, 0.0);
        }
        self.b_coeffs[index_b(m, n)]
    }
}

fn check_context(ctx: &SwfContext, order: usize, c: f64) -> Result<()> {
    if (ctx.c() - c).abs() > 1e-9 * c {
        return Err(Error::domain(format!(
            "spheroidal parameter mismatch: tables have c = {}, field needs c = {c}",
            ctx.c()
        )));
    }
    if ctx.n_max() < order {
        return Err(Error::MissingTable { m: 0, n: order });
    }
    Ok(())
}

/// Plane-wave coefficients `2 i^n ε_m / N_mn S_mn(c, cos θ0) (cos mφ0, sin mφ0)`.
///
/// `pw` must already be expressed in the spheroid's local frame.
pub fn plane_wave_coeffs_spheroidal(
    pw: &PlaneWave,
    ctx: &SwfContext,
    a: f64,
    order: usize,
) -> Result<SpheroidalCoeffs> {
    let c = pw.k * a;
    check_context(ctx, order, c)?;
    let (_, theta0, phi0) = spherical_from_cartesian(&pw.direction);
    let cos0 = theta0.cos().clamp(-1.0, 1.0);
    let mut out = SpheroidalCoeffs::zeros(order, ctx.c(), a);
    for n in 0..=order {
        let i_n = Complex64::i().powu(n as u32);
        for m in 0..=n {
            let t = ctx.table(m, n)?;
            let eps = if m == 0 { 1.0 } else { 2.0 };
            let v = i_n * (2.0 * eps / t.norm * angular_s_unchecked(t, cos0));
            let (s, co) = (m as f64 * phi0).sin_cos();
            out.a_coeffs[index_a(m, n)] = v * co;
            if m > 0 {
                out.b_coeffs[index_b(m, n)] = v * s;
            }
        }
    }
    Ok(out)
}

/// Diagonal equalization `i / (c (ξ1² - 1) R3'_mn(c, ξ1))` in stacked order.
pub fn equalization(ctx: &SwfContext, xi1: f64, order: usize) -> Result<Vec<Complex64>> {
    let c = ctx.c();
    let mut ra = vec![Complex64::new(0.0, 0.0); len_a(order)];
    let mut rb = vec![Complex64::new(0.0, 0.0); len_b(order)];
    let pairs: Vec<(usize, usize)> = (0..=order).flat_map(|n| (0..=n).map(move |m| (m, n))).collect();
    let values = pairs
        .par_iter()
        .map(|&(m, n)| {
            let t = ctx.table(m, n)?;
            let (_, d3) = radial(RadialKind::Third, t, xi1)?;
            Ok(Complex64::i() / (c * (xi1 * xi1 - 1.0) * d3))
        })
        .collect::<Result<Vec<_>>>()?;
    for (&(m, n), v) in pairs.iter().zip(values) {
        ra[index_a(m, n)] = v;
        if m > 0 {
            rb[index_b(m, n)] = v;
        }
    }
    ra.extend(rb);
    Ok(ra)
}

/// Angular matrix `S`: row `q` holds `S_mn(c, η_q) cos mφ_q` in the `A` columns
/// and `S_mn(c, η_q) sin mφ_q` in the `B` columns.
pub fn angular_matrix(mics: &ArrayGeometry, ctx: &SwfContext, order: usize) -> Result<ComplexMatrix> {
    if ctx.n_max() < order {
        return Err(Error::MissingTable { m: 0, n: order });
    }
    let la = len_a(order);
    let cols = la + len_b(order);
    let rows: Vec<Vec<Complex64>> = mics
        .mics
        .par_iter()
        .map(|mic| {
            let (eta, phi) = mic.native;
            let mut row = vec![Complex64::new(0.0, 0.0); cols];
            for n in 0..=order {
                for m in 0..=n {
                    let s = angular_s_unchecked(ctx.table(m, n).expect("checked order"), eta);
                    let (sn, cs) = (m as f64 * phi).sin_cos();
                    row[index_a(m, n)] = Complex64::new(s * cs, 0.0);
                    if m > 0 {
                        row[la + index_b(m, n)] = Complex64::new(s * sn, 0.0);
                    }
                }
            }
            row
        })
        .collect();
    ComplexMatrix::from_row_major(mics.len(), cols, rows.concat())
}

fn spheroid_params(mics: &ArrayGeometry) -> Result<ProlateParams> {
    match mics.baffle {
        Baffle::RigidProlateSpheroid { params, .. } => Ok(params),
        _ => Err(Error::domain("array is not mounted on a rigid prolate spheroid")),
    }
}

/// Inverse encoding matrix `Λ = S R`.
pub fn encoding_matrix_spheroidal(mics: &ArrayGeometry, ctx: &SwfContext, order: usize) -> Result<ComplexMatrix> {
    let params = spheroid_params(mics)?;
    let s = angular_matrix(mics, ctx, order)?;
    s.scale_columns(&equalization(ctx, params.xi1, order)?)
}

/// Total pressure at each microphone of the rigid spheroid.
pub fn rigid_spheroid_surface_pressure(
    coeffs: &SpheroidalCoeffs,
    params: &ProlateParams,
    mics: &ArrayGeometry,
    ctx: &SwfContext,
) -> Result<Vec<Complex64>> {
    let own = spheroid_params(mics)?;
    if own != *params {
        return Err(Error::domain("array spheroid does not match the requested parameters"));
    }
    check_context(ctx, coeffs.order, coeffs.c)?;
    let lambda = encoding_matrix_spheroidal(mics, ctx, coeffs.order)?;
    lambda.mul_vec(&coeffs.stacked())
}

/// Least-squares spheroidal encoding with Tikhonov weight `sigma`.
pub fn encode_spheroidal(
    pressures: &[Complex64],
    mics: &ArrayGeometry,
    ctx: &SwfContext,
    order: usize,
    sigma: f64,
) -> Result<(SpheroidalCoeffs, SolveReport)> {
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
    let params = spheroid_params(mics)?;
    let axis = match mics.baffle {
        Baffle::RigidProlateSpheroid { long_axis, .. } => long_axis,
        _ => unreachable!(),
    };
    let lambda = encoding_matrix_spheroidal(mics, ctx, order)?;
    let (x, report) = rls_solve_with_report(&lambda, pressures, sigma)?;
    if report.is_rank_deficient() {
        log::warn!(
            "spheroidal encoding matrix has effective rank {} of {} (condition {:.3e})",
            report.effective_rank,
            report.unknowns,
            report.condition_number()
        );
    }
    let coeffs = SpheroidalCoeffs::from_stacked(order, ctx.c(), params.a, axis, &x)?;
    Ok((coeffs, report))
}

/// Evaluates the incident-field expansion at points given in the local frame.
///
/// Points on the interfocal segment (`ξ = 1`) are allowed.
pub fn reconstruct_incident_spheroidal(
    coeffs: &SpheroidalCoeffs,
    ctx: &SwfContext,
    points: &[Vec3],
) -> Result<Vec<Complex64>> {
    check_context(ctx, coeffs.order, coeffs.c)?;
    let order = coeffs.order;
    Ok(points
        .par_iter()
        .map(|p| {
            let pc = prolate_from_cartesian(p[0], p[1], p[2], coeffs.a);
            let mut sum = Complex64::new(0.0, 0.0);
            for n in 0..=order {
                for m in 0..=n {
                    let t = ctx.table(m, n).expect("checked order");
                    let (sn, cs) = (m as f64 * pc.phi).sin_cos();
                    let ang = coeffs.a(m, n) * cs + coeffs.b(m, n) * sn;
                    if ang == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    sum += ang * (angular_s_unchecked(t, pc.eta) * radial_first_value(t, pc.xi));
                }
            }
            sum
        })
        .collect())
}

/// Total (incident plus scattered) field at `(ξ, η, φ)`, `ξ >= ξ1`, from the
/// radial functions directly, without the Wronskian simplification used on
/// the surface.
pub fn total_field(
    coeffs: &SpheroidalCoeffs,
    ctx: &SwfContext,
    xi1: f64,
    point: (f64, f64, f64),
) -> Result<Complex64> {
    check_context(ctx, coeffs.order, coeffs.c)?;
    let (xi, eta, phi) = point;
    if xi < xi1 {
        return Err(Error::domain(format!("ξ = {xi} lies inside the spheroid ξ1 = {xi1}")));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..=coeffs.order {
        for m in 0..=n {
            let t = ctx.table(m, n)?;
            let (_, d1s) = radial(RadialKind::First, t, xi1)?;
            let (_, d3s) = radial(RadialKind::Third, t, xi1)?;
            let (r1, _) = radial(RadialKind::First, t, xi)?;
            let (r3, _) = radial(RadialKind::Third, t, xi)?;
            let radial_part = r1 - d1s / d3s * r3;
            let (sn, cs) = (m as f64 * phi).sin_cos();
            let ang = coeffs.a(m, n) * cs + coeffs.b(m, n) * sn;
            sum += ang * angular_s_unchecked(t, eta) * radial_part;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_spheroid_array, cartesian_from_prolate};
    use crate::swf::PrecisionMode;

    #[test]
    fn index_maps_cover_all_columns() {
        for order in 0..=12 {
            let la = len_a(order);
            let mut seen = vec![false; (order + 1) * (order + 1)];
            for n in 0..=order {
                for m in 0..=n {
                    assert!(!std::mem::replace(&mut seen[index_a(m, n)], true));
                    if m > 0 {
                        assert!(!std::mem::replace(&mut seen[la + index_b(m, n)], true));
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn plane_wave_symmetries() {
        let ctx = SwfContext::build(5.0, 6, PrecisionMode::Double).unwrap();
        let axial = PlaneWave::from_wavenumber(5.0, [0.0, 0.0, 1.0]).unwrap();
        let c = plane_wave_coeffs_spheroidal(&axial, &ctx, 1.0, 6).unwrap();
        for n in 0..=6 {
            for m in 1..=n {
                assert!(c.a(m, n).norm() < 1e-14 && c.b(m, n).norm() < 1e-14);
            }
        }
        let in_xz = PlaneWave::from_wavenumber(5.0, [0.6, 0.0, 0.8]).unwrap();
        let c = plane_wave_coeffs_spheroidal(&in_xz, &ctx, 1.0, 6).unwrap();
        assert!(c.b_coeffs.iter().all(|b| b.norm() < 1e-14));
        let up = PlaneWave::from_wavenumber(5.0, [0.3, 0.4, 0.5]).unwrap();
        let down = PlaneWave::from_wavenumber(5.0, [0.3, -0.4, 0.5]).unwrap();
        let (cu, cd) = (
            plane_wave_coeffs_spheroidal(&up, &ctx, 1.0, 6).unwrap(),
            plane_wave_coeffs_spheroidal(&down, &ctx, 1.0, 6).unwrap(),
        );
        for (a, b) in cu.b_coeffs.iter().zip(&cd.b_coeffs) {
            assert!((a + b).norm() < 1e-12);
        }
        assert!(plane_wave_coeffs_spheroidal(&up, &ctx, 2.0, 6).is_err());
    }

    #[test]
    fn surface_pressure_matches_direct_total_field() {
        let params = ProlateParams::new(1.0, 1.5).unwrap();
        let ctx = SwfContext::build(5.0, 14, PrecisionMode::Double).unwrap();
        let arr = build_spheroid_array(params, 4, 6, Axis::Z).unwrap();
        let pw = PlaneWave::from_wavenumber(5.0, [0.5, 0.2, 0.7]).unwrap();
        let coeffs = plane_wave_coeffs_spheroidal(&pw, &ctx, 1.0, 14).unwrap();
        let p = rigid_spheroid_surface_pressure(&coeffs, &params, &arr, &ctx).unwrap();
        for (mic, pq) in arr.mics.iter().zip(&p) {
            let direct = total_field(&coeffs, &ctx, 1.5, (1.5, mic.native.0, mic.native.1)).unwrap();
            assert!((direct - pq).norm() < 1e-8 * pq.norm(), "{direct} vs {pq}");
        }
    }

    #[test]
    fn axisymmetric_pressure_ignores_phi() {
        let params = ProlateParams::new(1.0, 1.5).unwrap();
        let ctx = SwfContext::build(5.0, 4, PrecisionMode::Double).unwrap();
        let arr = build_spheroid_array(params, 4, 8, Axis::Z).unwrap();
        let mut c = SpheroidalCoeffs::zeros(4, 5.0, 1.0);
        for n in 0..=4 {
            c.a_coeffs[index_a(0, n)] = Complex64::new(1.0, -0.5 * n as f64);
        }
        let p = rigid_spheroid_surface_pressure(&c, &params, &arr, &ctx).unwrap();
        for ring in p.chunks(8) {
            for v in ring {
                assert!((v - ring[0]).norm() < 1e-12 * ring[0].norm());
            }
        }
        let zero = SpheroidalCoeffs::zeros(4, 5.0, 1.0);
        let p = rigid_spheroid_surface_pressure(&zero, &params, &arr, &ctx).unwrap();
        assert!(p.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_coefficient_field() {
        let ctx = SwfContext::build(2.0, 2, PrecisionMode::Double).unwrap();
        let mut c = SpheroidalCoeffs::zeros(2, 2.0, 1.0);
        c.a_coeffs[0] = Complex64::new(1.0, 0.0);
        let pt = cartesian_from_prolate(1.7, 0.3, 0.4, 1.0).unwrap();
        let v = reconstruct_incident_spheroidal(&c, &ctx, &[pt]).unwrap()[0];
        let t = ctx.table(0, 0).unwrap();
        let expected = angular_s_unchecked(t, 0.3) * crate::swf::radial_first(t, 1.7).0;
        assert!((v.re - expected).abs() < 1e-12 && v.im.abs() < 1e-15);
    }
}

//! Conversion of spheroidal ambisonic coefficients to spherical ones.
//!
//! Substituting the spherical Bessel expansion of `S_mn R1_mn` into the
//! spheroidal incident-field expansion and collecting terms by `(n', m')`
//! gives
//!
//! ```text
//! A_{n'}^{m'} = I(m') sqrt(π (n'+|m'|)! / ((2n'+1)(n'-|m'|)!))
//!               Σ_{n >= |m'|, n ≡ n' mod 2} (-1)^{(n'-n)/2} d_{n'-|m'|}^{|m'| n}(c)
//!               (A_{|m'| n} - i sgn(m') B_{|m'| n})
//! ```
//!
//! The spherical coefficients are referred to the spheroid's local frame.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::special::{factorial_ratio, sh_index};
use crate::spherical::SphericalCoeffs;
use crate::spheroidal::SpheroidalCoeffs;
use crate::swf::SwfContext;

/// `(-1)^{m'}` for `m' < 0`, `2` for `m' = 0`, `1` for `m' > 0`.
pub fn i_factor(m: i64) -> Complex64 {
    let v = match m {
        0 => 2.0,
        m if m > 0 => 1.0,
        m if m % 2 == 0 => 1.0,
        _ => -1.0,
    };
    Complex64::new(v, 0.0)
}

/// Spherical coefficients up to `n_out`, summing spheroidal degrees up to `n_sum`.
pub fn transcode(
    coeffs: &SpheroidalCoeffs,
    ctx: &SwfContext,
    n_out: usize,
    n_sum: usize,
) -> Result<SphericalCoeffs> {
    if n_sum < coeffs.order {
        return Err(Error::domain(format!(
            "transcoding sum cap {n_sum} is below the coefficient order {}",
            coeffs.order
        )));
    }
    let n_top = n_sum.min(coeffs.order);
    if ctx.n_max() < n_top {
        return Err(Error::MissingTable { m: 0, n: n_top });
    }
    if (ctx.c() - coeffs.c).abs() > 1e-9 * coeffs.c {
        return Err(Error::domain(format!(
            "spheroidal parameter mismatch: tables have c = {}, coefficients have c = {}",
            ctx.c(),
            coeffs.c
        )));
    }
    let k = coeffs.c / coeffs.a;
    let entries: Vec<(usize, i64)> = (0..=n_out)
        .flat_map(|n| (-(n as i64)..=n as i64).map(move |m| (n, m)))
        .collect();
    let values: Vec<Complex64> = entries
        .par_iter()
        .map(|&(np, mp)| {
            let am = mp.unsigned_abs() as usize;
            let r = np - am;
            let pref = i_factor(mp)
                * (PI * factorial_ratio(np - am, np + am) / (2 * np + 1) as f64).sqrt();
            let sgn = mp.signum() as f64;
            let mut sum = Complex64::new(0.0, 0.0);
            let mut n = am + r % 2;
            while n <= n_top {
                let d = ctx.table(am, n).expect("checked order").d_at(r);
                if d != 0.0 {
                    let half = if np >= n { (np - n) / 2 } else { (n - np) / 2 };
                    let sign = if half % 2 == 0 { 1.0 } else { -1.0 };
                    let ab = coeffs.a(am, n) - Complex64::i() * sgn * coeffs.b(am, n);
                    sum += ab * (sign * d);
                }
                n += 2;
            }
            pref * sum
        })
        .collect();
    debug_assert!(entries.iter().enumerate().all(|(i, &(n, m))| sh_index(n, m) == i));
    SphericalCoeffs::new(n_out, k, coeffs.frame, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlaneWave;
    use crate::spherical::plane_wave_coeffs;
    use crate::spheroidal::{index_a, plane_wave_coeffs_spheroidal};
    use crate::swf::PrecisionMode;

    #[test]
    fn i_factor_values() {
        assert_eq!(i_factor(0), Complex64::new(2.0, 0.0));
        assert_eq!(i_factor(1), Complex64::new(1.0, 0.0));
        assert_eq!(i_factor(-1), Complex64::new(-1.0, 0.0));
        assert_eq!(i_factor(-2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn zero_and_axisymmetric_inputs() {
        let ctx = SwfContext::build(2.0, 6, PrecisionMode::Double).unwrap();
        let zero = SpheroidalCoeffs::zeros(6, 2.0, 1.0);
        let out = transcode(&zero, &ctx, 6, 6).unwrap();
        assert!(out.values.iter().all(|v| v.norm() == 0.0));
        let mut axi = zero.clone();
        for n in 0..=6 {
            axi.a_coeffs[index_a(0, n)] = Complex64::new(1.0 + n as f64, 0.5);
        }
        let out = transcode(&axi, &ctx, 6, 6).unwrap();
        for n in 0..=6usize {
            for m in -(n as i64)..=n as i64 {
                if m != 0 {
                    assert_eq!(out.get(n, m), Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn small_c_plane_wave() {
        let ctx = SwfContext::build(0.5, 14, PrecisionMode::Double).unwrap();
        let pw = PlaneWave::from_wavenumber(0.5, [0.3, -0.4, 0.7]).unwrap();
        let sph = plane_wave_coeffs_spheroidal(&pw, &ctx, 1.0, 14).unwrap();
        let out = transcode(&sph, &ctx, 6, 14).unwrap();
        let expected = plane_wave_coeffs(&pw, 6);
        for (a, b) in out.values.iter().zip(&expected.values) {
            assert!((a - b).norm() < 1e-10 * b.norm().max(1e-3), "{a} vs {b}");
        }
    }
}

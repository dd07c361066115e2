//! Classical special functions used by both the spherical and the spheroidal
//! pipelines.
//!
//! Associated Legendre functions carry the Condon-Shortley phase `(-1)^m`, and
//! spherical harmonics are orthonormal on the unit sphere:
//!
//! ```text
//! Y_n^m(θ, φ) = sqrt((2n+1)/(4π) (n-m)!/(n+m)!) P_n^m(cos θ) e^{imφ}
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Flat index `n² + n + m` of the spherical basis function `(n, m)`.
#[inline]
pub fn sh_index(n: usize, m: i64) -> usize {
    ((n * n + n) as i64 + m) as usize
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Legendre polynomial `P_n(x)` by forward recurrence.
pub fn legendre_p(n: usize, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    Ok(legendre_column(0, n, x)[n])
}

/// Associated Legendre function `P_n^m(x)` including the Condon-Shortley phase.
///
/// Negative orders use `P_n^{-m} = (-1)^m (n-m)!/(n+m)! P_n^m`.
pub fn assoc_legendre(n: usize, m: i64, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    let am = m.unsigned_abs() as usize;
    if am > n {
        return Err(Error::domain(format!("|m| = {am} exceeds degree n = {n}")));
    }
    let p = legendre_column(am, n, x)[n - am];
    if m >= 0 {
        Ok(p)
    } else {
        let sign = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(sign * p / factorial_ratio(n - am, n + am))
    }
}

/// `P_l^m(x)` for `l = m..=lmax`, indexed by `l - m`.
///
/// Computed by the stable `(m,m) -> (m+1,m) -> upward in l` recurrence. The
/// caller guarantees `|x| <= 1`; returns an empty vector if `lmax < m`.
pub fn legendre_column(m: usize, lmax: usize, x: f64) -> Vec<f64> {
    if lmax < m {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(lmax - m + 1);
    let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= -((2 * i - 1) as f64) * s;
    }
    out.push(pmm);
    if lmax == m {
        return out;
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    out.push(cur);
    for l in (m + 2)..=lmax {
        let next = ((2 * l - 1) as f64 * x * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// `hi! / lo!` as a product of `hi - lo` factors; 1 when `hi <= lo`.
pub fn factorial_ratio(lo: usize, hi: usize) -> f64 {
    ((lo + 1)..=hi).fold(1.0, |acc, j| acc * j as f64)
}

/// Kind of spherical Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphBesselKind {
    /// Regular function `j_n`.
    J,
    /// Neumann function `y_n`.
    Y,
    /// Hankel function of the first kind, `h_n = j_n + i y_n`.
    H1,
}

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "spherical Bessel argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// Spherical Bessel function of the requested kind.
pub fn sph_bessel(kind: SphBesselKind, n: usize, x: f64) -> Result<Complex64> {
    check_positive(x)?;
    Ok(match kind {
        SphBesselKind::J => Complex64::new(sph_jn_all(n, x)[n], 0.0),
        SphBesselKind::Y => Complex64::new(sph_yn_all(n, x)[n], 0.0),
        SphBesselKind::H1 => Complex64::new(sph_jn_all(n, x)[n], sph_yn_all(n, x)[n]),
    })
}

/// Derivative with respect to `x` of [`sph_bessel`].
pub fn sph_bessel_deriv(kind: SphBesselKind, n: usize, x: f64) -> Result<Complex64> {
    check_positive(x)?;
    let dj = || derivatives(&sph_jn_all(n + 1, x), x)[n];
    let dy = || derivatives(&sph_yn_all(n + 1, x), x)[n];
    Ok(match kind {
        SphBesselKind::J => Complex64::new(dj(), 0.0),
        SphBesselKind::Y => Complex64::new(dy(), 0.0),
        SphBesselKind::H1 => Complex64::new(dj(), dy()),
    })
}

/// Derivatives `f_n'` for `n = 0..values.len()-1` from `f_0..f_{len-1}` using
/// `f_0' = -f_1` and `f_n' = f_{n-1} - (n+1) f_n / x`.
///
/// The last entry of the result needs `f_{len}` and is therefore omitted.
pub fn derivatives(values: &[f64], x: f64) -> Vec<f64> {
    let len = values.len().saturating_sub(1);
    (0..len)
        .map(|n| {
            if n == 0 {
                -values[1]
            } else {
                values[n - 1] - (n + 1) as f64 * values[n] / x
            }
        })
        .collect()
}

/// `j_0(x)..j_nmax(x)` for `x >= 0`.
///
/// Upward recurrence while the order does not exceed `x`, then a downward
/// continued fraction for the ratios `j_n / j_{n-1}`.
pub fn sph_jn_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    out[0] = if x < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    };
    if nmax == 0 {
        return out;
    }
    let n_up = (x.floor() as usize).min(nmax);
    if n_up >= 1 {
        out[1] = x.sin() / (x * x) - x.cos() / x;
        for n in 1..n_up {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
    }
    if n_up < nmax {
        let start = nmax + 60 + (x.sqrt() * 10.0) as usize;
        let mut ratios = vec![0.0; nmax + 1];
        let mut rho = 0.0;
        for n in (n_up + 1..=start).rev() {
            rho = x / ((2 * n + 1) as f64 - x * rho);
            if n <= nmax {
                ratios[n] = rho;
            }
        }
        for n in (n_up + 1)..=nmax {
            out[n] = out[n - 1] * ratios[n];
        }
    }
    out
}

/// `y_0(x)..y_nmax(x)` for `x > 0` by upward recurrence (stable for the
/// dominant solution). Large orders at small arguments overflow to `-inf`.
pub fn sph_yn_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    out[0] = -x.cos() / x;
    if nmax == 0 {
        return out;
    }
    out[1] = -x.cos() / (x * x) - x.sin() / x;
    for n in 1..nmax {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    out
}

/// Normalization `sqrt((2n+1)/(4π) (n-m)!/(n+m)!)` for `m >= 0`.
fn sh_norm(n: usize, m: usize) -> f64 {
    ((2 * n + 1) as f64 / (4.0 * PI) / factorial_ratio(n - m, n + m)).sqrt()
}

/// Orthonormal spherical harmonic `Y_n^m(θ, φ)`.
pub fn sph_harmonic(n: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if am > n {
        return Err(Error::domain(format!("|m| = {am} exceeds degree n = {n}")));
    }
    let p = legendre_column(am, n, theta.cos())[n - am];
    let y = Complex64::from_polar(sh_norm(n, am) * p, am as f64 * phi);
    Ok(if m >= 0 {
        y
    } else if am.is_multiple_of(2) {
        y.conj()
    } else {
        -y.conj()
    })
}

/// All `Y_n^m(θ, φ)` for `n <= nmax`, flat-indexed by [`sh_index`].
pub fn sph_harmonics_all(nmax: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); (nmax + 1) * (nmax + 1)];
    let x = theta.cos();
    for m in 0..=nmax {
        let column = legendre_column(m, nmax, x);
        let phase = Complex64::from_polar(1.0, m as f64 * phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for (i, p) in column.iter().enumerate() {
            let n = m + i;
            let y = phase * (sh_norm(n, m) * p);
            out[sh_index(n, m as i64)] = y;
            if m > 0 {
                out[sh_index(n, -(m as i64))] = y.conj() * sign;
            }
        }
    }
    out
}

/// Gauss-Legendre quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Strictly increasing abscissae.
    pub nodes: Vec<f64>,
    /// Positive weights summing to 2.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f` on `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `k`-point Gauss-Legendre rule by Newton iteration on `P_k`.
pub fn gauss_legendre(k: usize) -> Result<QuadratureRule> {
    if k == 0 {
        return Err(Error::domain("quadrature rule needs at least one node"));
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let half = k.div_ceil(2);
    for i in 0..half {
        // Largest roots first; mirrored onto the negative half below.
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(k, x);
            dp = k as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p, p_prev) = legendre_pair(k, x);
                dp = k as f64 * (x * p - p_prev) / (x * x - 1.0);
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k - 1 - i] = x;
        nodes[i] = -x;
        weights[k - 1 - i] = w;
        weights[i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `(P_k(x), P_{k-1}(x))`.
fn legendre_pair(k: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for l in 1..k {
        let next = ((2 * l + 1) as f64 * x * cur - l as f64 * prev) / (l + 1) as f64;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

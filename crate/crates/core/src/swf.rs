//! Prolate spheroidal wave functions.
//!
//! Angular functions are expanded in associated Legendre functions,
//!
//! ```text
//! S_mn(c, η) = Σ' d_r P_{m+r}^m(η)        (r ≡ n - m mod 2)
//! ```
//!
//! with the coefficients `d_r` normalized so that `S_mn(c, η) → P_n^m(η)` as
//! `c → 0` (Flammer's convention). The characteristic value comes from the
//! symmetric tridiagonal form of the three-term recurrence for `d_r`; the
//! coefficients themselves are then recomputed from continued fractions run
//! from both ends and matched at `r = n - m`, which keeps the small
//! coefficients on either side relatively accurate.
//!
//! Radial functions of the first kind use the spherical Bessel expansion.
//! The second kind uses the Neumann expansion where it converges quickly
//! (`ξ >= 2`); closer to the surface `ξ = 1` it is carried inward by
//! integrating the radial equation, along which it is the dominant solution.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_dopri5, tridiag_sym_eigvals, Accumulator};
use crate::special::{derivatives, factorial_ratio, legendre_column, sph_jn_all, sph_yn_all};

/// Arithmetic used while building and evaluating tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    /// Plain double-precision accumulation.
    #[default]
    Double,
    /// Compensated accumulation of every series plus a tighter ODE tolerance.
    Extended,
}

impl PrecisionMode {
    pub fn name(self) -> &'static str {
        match self {
            PrecisionMode::Double => "double",
            PrecisionMode::Extended => "extended",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(PrecisionMode::Double),
            "extended" => Ok(PrecisionMode::Extended),
            other => Err(Error::parse(format!("unknown precision mode `{other}`"))),
        }
    }

    fn compensated(self) -> bool {
        self == PrecisionMode::Extended
    }

    fn ode_rtol(self) -> f64 {
        match self {
            PrecisionMode::Double => 1e-12,
            PrecisionMode::Extended => 1e-13,
        }
    }
}

/// Stored coefficients end once `|d_r| / max|d| < TAIL_RATIO` past the peak.
pub const TAIL_RATIO: f64 = 1e-20;
/// Extra even steps of `r` beyond `2n` in the initial eigenproblem.
const EXTRA_TERMS: usize = 40;
/// Boundary between the direct Neumann expansion and inward ODE integration.
const NEUMANN_MIN_XI: f64 = 2.0;
const MAX_NEUMANN_TERMS: usize = 600;
const NEUMANN_TOL: f64 = 1e-17;

/// Coefficient table of one prolate spheroidal wave function `(m, n, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwfTable {
    pub m: usize,
    pub n: usize,
    pub c: f64,
    /// Characteristic value `λ_mn(c)`.
    pub lambda: f64,
    /// `N_mn(c) = ∫ S_mn² dη` over `[-1, 1]`.
    pub norm: f64,
    /// `d[i]` holds `d_r` at `r = parity + 2i`.
    pub d: Vec<f64>,
    pub precision: PrecisionMode,
}

/// `(2m + r)! / r!`.
#[inline]
fn rising(r: usize, m: usize) -> f64 {
    factorial_ratio(r, r + 2 * m)
}

struct Recurrence {
    m: f64,
    c2: f64,
}

impl Recurrence {
    fn new(m: usize, c: f64) -> Self {
        Self {
            m: m as f64,
            c2: c * c,
        }
    }

    fn alpha(&self, r: usize) -> f64 {
        let (m, r) = (self.m, r as f64);
        (2.0 * m + r + 2.0) * (2.0 * m + r + 1.0) * self.c2
            / ((2.0 * m + 2.0 * r + 3.0) * (2.0 * m + 2.0 * r + 5.0))
    }

    fn beta(&self, r: usize) -> f64 {
        let (m, r) = (self.m, r as f64);
        let mr = m + r;
        mr * (mr + 1.0)
            + (2.0 * mr * (mr + 1.0) - 2.0 * m * m - 1.0) * self.c2
                / ((2.0 * m + 2.0 * r - 1.0) * (2.0 * m + 2.0 * r + 3.0))
    }

    fn gamma(&self, r: usize) -> f64 {
        let (m, rf) = (self.m, r as f64);
        if r < 2 {
            return 0.0;
        }
        rf * (rf - 1.0) * self.c2 / ((2.0 * m + 2.0 * rf - 3.0) * (2.0 * m + 2.0 * rf - 1.0))
    }

    /// Ratios `d_r / d_{r-2}` for `r = from, from+2, ..., to` (same parity),
    /// by the backward continued fraction started far above `to`.
    fn upper_ratios(&self, lambda: f64, from: usize, to: usize) -> Vec<f64> {
        let top = to + 2 * EXTRA_TERMS;
        let mut ratios = vec![0.0; (to - from) / 2 + 1];
        let mut ratio = 0.0;
        let mut r = top;
        while r >= from {
            ratio = -self.gamma(r) / (self.beta(r) - lambda + self.alpha(r) * ratio);
            if r <= to {
                ratios[(r - from) / 2] = ratio;
            }
            if r < 2 {
                break;
            }
            r -= 2;
        }
        ratios
    }
}

impl SwfTable {
    /// Index of the first stored `r`.
    pub fn parity(&self) -> usize {
        (self.n - self.m) % 2
    }

    /// Largest stored `r`.
    pub fn r_last(&self) -> usize {
        self.parity() + 2 * (self.d.len() - 1)
    }

    /// `d_r`, zero for the opposite parity or beyond the stored tail.
    pub fn d_at(&self, r: usize) -> f64 {
        if r % 2 != self.parity() {
            return 0.0;
        }
        self.d.get((r - self.parity()) / 2).copied().unwrap_or(0.0)
    }

    /// `(r, d_r)` pairs of the stored coefficients.
    pub fn coefficients(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let p = self.parity();
        self.d.iter().enumerate().map(move |(i, &d)| (p + 2 * i, d))
    }

    /// `Σ' (2m+r)!/r! d_r`, the radial normalization denominator.
    fn radial_denominator(&self) -> f64 {
        let mut acc = Accumulator::new(self.precision.compensated());
        for (r, d) in self.coefficients() {
            acc.add(rising(r, self.m) * d);
        }
        acc.value()
    }

    /// Sign `i^{r+m-n}` for `r` of matching parity.
    fn phase(&self, r: usize) -> f64 {
        let k = self.n - self.m;
        let half = if r >= k { (r - k) / 2 } else { (k - r) / 2 };
        if half % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Builds the table for `(m, n, c)`.
pub fn build_table(m: usize, n: usize, c: f64, precision: PrecisionMode) -> Result<SwfTable> {
    if n < m {
        return Err(Error::domain(format!("need m <= n, got m = {m}, n = {n}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("spheroidal parameter must be positive, got c = {c}")));
    }
    let mut r_max = 2 * n + 2 * EXTRA_TERMS + (n - m) % 2;
    for _ in 0..8 {
        let table = build_with_cap(m, n, c, precision, r_max)?;
        if let Some(table) = table {
            return Ok(table);
        }
        r_max += 2 * EXTRA_TERMS;
    }
    Err(Error::numerical(format!(
        "d coefficients for (m={m}, n={n}, c={c}) did not decay below {TAIL_RATIO:e} by r = {r_max}"
    )))
}

fn build_with_cap(
    m: usize,
    n: usize,
    c: f64,
    precision: PrecisionMode,
    r_max: usize,
) -> Result<Option<SwfTable>> {
    let parity = (n - m) % 2;
    let peak = n - m;
    let rec = Recurrence::new(m, c);
    let count = (r_max - parity) / 2 + 1;

    let diag: Vec<f64> = (0..count).map(|i| rec.beta(parity + 2 * i)).collect();
    let off: Vec<f64> = (0..count - 1)
        .map(|i| {
            let r = parity + 2 * i;
            (rec.alpha(r) * rec.gamma(r + 2)).sqrt()
        })
        .collect();
    let eigenvalues = tridiag_sym_eigvals(&diag, &off).map_err(|e| {
        Error::numerical(format!("characteristic value for (m={m}, n={n}, c={c}): {e}"))
    })?;
    let lambda = eigenvalues[peak / 2];

    // d_{peak} = 1, lower side from the forward continued fraction.
    let mut d = vec![0.0; count];
    let kpeak = peak / 2;
    d[kpeak] = 1.0;
    if kpeak > 0 {
        let mut lower = vec![0.0; kpeak];
        let mut prev = 0.0;
        for (i, slot) in lower.iter_mut().enumerate() {
            let r = parity + 2 * i;
            prev = -rec.alpha(r) / (rec.beta(r) - lambda + rec.gamma(r) * prev);
            *slot = prev;
        }
        for i in (0..kpeak).rev() {
            d[i] = d[i + 1] * lower[i];
        }
    }
    if kpeak + 1 < count {
        let ratios = rec.upper_ratios(lambda, peak + 2, r_max);
        for i in (kpeak + 1)..count {
            d[i] = d[i - 1] * ratios[i - kpeak - 1];
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(format!(
            "non-finite d coefficients for (m={m}, n={n}, c={c})"
        )));
    }

    // Flammer normalization.
    let mut acc = Accumulator::new(precision.compensated());
    for (i, &di) in d.iter().enumerate() {
        let r = parity + 2 * i;
        let w = if parity == 0 {
            rising(r, m)
        } else {
            factorial_ratio(r, r + 2 * m + 1)
        };
        acc.add(w * di);
    }
    let target = if parity == 0 {
        factorial_ratio(n - m, n + m)
    } else {
        factorial_ratio(n - m, n + m + 1)
    };
    let scale = target / acc.value();
    for di in d.iter_mut() {
        *di *= scale;
    }

    let dmax = d.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let cut = (kpeak..count).find(|&i| d[i].abs() < TAIL_RATIO * dmax);
    let Some(cut) = cut else {
        return Ok(None);
    };
    d.truncate(cut + 1);

    let mut nacc = Accumulator::new(precision.compensated());
    for (i, &di) in d.iter().enumerate() {
        let r = parity + 2 * i;
        nacc.add(di * di * 2.0 / (2 * m + 2 * r + 1) as f64 * rising(r, m));
    }

    Ok(Some(SwfTable {
        m,
        n,
        c,
        lambda,
        norm: nacc.value(),
        d,
        precision,
    }))
}

/// Angular function `S_mn(c, η)`.
pub fn angular_s(table: &SwfTable, eta: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("η = {eta} outside [-1, 1]")));
    }
    Ok(angular_s_unchecked(table, eta))
}

pub(crate) fn angular_s_unchecked(table: &SwfTable, eta: f64) -> f64 {
    let m = table.m;
    let column = legendre_column(m, m + table.r_last(), eta);
    let mut acc = Accumulator::new(table.precision.compensated());
    for (r, d) in table.coefficients() {
        acc.add(d * column[r]);
    }
    acc.value()
}

/// [`angular_s`] over many arguments.
pub fn angular_s_all(table: &SwfTable, etas: &[f64]) -> Result<Vec<f64>> {
    etas.iter().map(|&eta| angular_s(table, eta)).collect()
}

/// Kind of radial function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    First,
    Second,
    /// `R^(3) = R^(1) + i R^(2)`.
    Third,
}

/// Radial function value and first derivative with respect to `ξ`.
pub fn radial(kind: RadialKind, table: &SwfTable, xi: f64) -> Result<(Complex64, Complex64)> {
    if !(xi > 1.0) || !xi.is_finite() {
        return Err(Error::domain(format!("radial functions need ξ > 1, got {xi}")));
    }
    let re = |(v, d): (f64, f64)| (Complex64::new(v, 0.0), Complex64::new(d, 0.0));
    match kind {
        RadialKind::First => Ok(re(radial_first(table, xi))),
        RadialKind::Second => radial_second(table, xi).map(re),
        RadialKind::Third => {
            let (r1, d1) = radial_first(table, xi);
            let (r2, d2) = radial_second(table, xi)?;
            Ok((Complex64::new(r1, r2), Complex64::new(d1, d2)))
        }
    }
}

fn prefactor(m: usize, xi: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let base = (xi * xi - 1.0) / (xi * xi);
    let half = m as f64 / 2.0;
    (base.powf(half), m as f64 * base.powf(half - 1.0) / (xi * xi * xi))
}

/// `R^(1)_mn(c, ξ)` and its derivative, `ξ > 1`.
pub fn radial_first(table: &SwfTable, xi: f64) -> (f64, f64) {
    let (m, c) = (table.m, table.c);
    let x = c * xi;
    let jmax = m + table.r_last() + 1;
    let j = sph_jn_all(jmax, x);
    let dj = derivatives(&j, x);
    let comp = table.precision.compensated();
    let mut sum = Accumulator::new(comp);
    let mut dsum = Accumulator::new(comp);
    for (r, d) in table.coefficients() {
        let w = table.phase(r) * rising(r, m) * d;
        sum.add(w * j[m + r]);
        dsum.add(w * dj[m + r]);
    }
    let den = table.radial_denominator();
    let (pre, dpre) = prefactor(m, xi);
    (
        pre * sum.value() / den,
        (dpre * sum.value() + pre * c * dsum.value()) / den,
    )
}

/// `R^(1)_mn(c, ξ)` for `ξ >= 1`, value only.
pub(crate) fn radial_first_value(table: &SwfTable, xi: f64) -> f64 {
    if xi > 1.0 {
        return radial_first(table, xi).0;
    }
    if table.m > 0 {
        return 0.0;
    }
    let j = sph_jn_all(table.r_last(), table.c);
    let mut sum = Accumulator::new(table.precision.compensated());
    for (r, d) in table.coefficients() {
        sum.add(table.phase(r) * rising(r, 0) * d * j[r]);
    }
    sum.value() / table.radial_denominator()
}

/// `R^(2)_mn(c, ξ)` and its derivative, `ξ > 1`.
pub fn radial_second(table: &SwfTable, xi: f64) -> Result<(f64, f64)> {
    if xi >= NEUMANN_MIN_XI {
        return neumann_series(table, xi);
    }
    let xi0 = NEUMANN_MIN_XI;
    let (r0, dr0) = neumann_series(table, xi0)?;
    let (m2, c2, lambda) = ((table.m * table.m) as f64, table.c * table.c, table.lambda);
    // t = ln(ξ - 1); state (R, (ξ² - 1) R').
    let rhs = |t: f64, y: &[f64; 2]| {
        let u = t.exp();
        let xi = 1.0 + u;
        [
            y[1] / (xi + 1.0),
            u * (lambda - c2 * xi * xi) * y[0] + m2 * y[0] / (xi + 1.0),
        ]
    };
    let y0 = [r0, (xi0 * xi0 - 1.0) * dr0];
    let y = integrate_dopri5(
        rhs,
        (xi0 - 1.0).ln(),
        y0,
        (xi - 1.0).ln(),
        table.precision.ode_rtol(),
        200_000,
    )
    .map_err(|e| {
        Error::numerical(format!(
            "R2 integration for (m={}, n={}, c={}) to ξ={xi}: {e}",
            table.m, table.n, table.c
        ))
    })?;
    Ok((y[0], y[1] / (xi * xi - 1.0)))
}

/// Neumann-function expansion of `R^(2)`; converges like `ξ^{-r}`.
fn neumann_series(table: &SwfTable, xi: f64) -> Result<(f64, f64)> {
    let (m, n, c) = (table.m, table.n, table.c);
    let x = c * xi;
    let peak = n - m;
    let comp = table.precision.compensated();
    let mut sum = Accumulator::new(comp);
    let mut dsum = Accumulator::new(comp);

    // Orders up to n directly.
    let y = sph_yn_all(n + 1, x);
    let dy = derivatives(&y, x);
    let mut r = table.parity();
    while r <= peak {
        let w = table.phase(r) * rising(r, m) * table.d_at(r);
        sum.add(w * y[m + r]);
        dsum.add(w * dy[m + r]);
        r += 2;
    }
    if !sum.value().is_finite() || !dsum.value().is_finite() {
        return Err(Error::numerical(format!(
            "Neumann expansion overflow for (m={m}, n={n}, c={c}, ξ={xi})"
        )));
    }

    // Above the peak: term ratios, so large orders never overflow.
    let rec = Recurrence::new(m, c);
    let r_end = peak + 2 * MAX_NEUMANN_TERMS;
    let dratios = rec.upper_ratios(table.lambda, peak + 2, r_end);
    let mut term = table.phase(peak) * rising(peak, m) * table.d_at(peak) * y[n];
    // q = y_{k+1} / y_k at the current order k = m + r.
    let mut k = n;
    let mut q = y[n + 1] / y[n];
    let mut converged = false;
    let mut last_ratio = f64::INFINITY;
    for (i, dratio) in dratios.iter().enumerate() {
        let rr = peak + 2 + 2 * i;
        let q_next = (2 * k + 3) as f64 / x - 1.0 / q;
        term *= -(rising(rr, m) / rising(rr - 2, m)) * dratio * q * q_next;
        k += 2;
        q = (2 * k + 1) as f64 / x - 1.0 / q_next;
        // y_k' / y_k = y_{k-1} / y_k - (k + 1) / x
        let dlog = 1.0 / q_next - (k + 1) as f64 / x;
        sum.add(term);
        dsum.add(term * dlog);
        let scale = sum.value().abs().max((dsum.value() / c).abs());
        last_ratio = term.abs().max((term * dlog / c).abs()) / scale;
        if last_ratio < NEUMANN_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Neumann expansion of R2 for (m={m}, n={n}, c={c}) at ξ={xi} left tail ratio {last_ratio:e}; \
             use extended precision or a larger ξ"
        )));
    }
    let den = table.radial_denominator();
    let (pre, dpre) = prefactor(m, xi);
    Ok((
        pre * sum.value() / den,
        (dpre * sum.value() + pre * c * dsum.value()) / den,
    ))
}

/// All tables `0 <= m <= n <= n_max` sharing one spheroidal parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SwfContext {
    c: f64,
    n_max: usize,
    precision: PrecisionMode,
    tables: Vec<SwfTable>,
}

#[inline]
fn tri_index(m: usize, n: usize) -> usize {
    n * (n + 1) / 2 + m
}

impl SwfContext {
    /// Builds every table up to `n_max`, in parallel.
    pub fn build(c: f64, n_max: usize, precision: PrecisionMode) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = (0..=n_max)
            .flat_map(|n| (0..=n).map(move |m| (m, n)))
            .collect();
        let tables = pairs
            .par_iter()
            .map(|&(m, n)| build_table(m, n, c, precision))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            c,
            n_max,
            precision,
            tables,
        })
    }

    /// Assembles a context from previously built tables.
    pub fn from_tables(c: f64, n_max: usize, precision: PrecisionMode, mut tables: Vec<SwfTable>) -> Result<Self> {
        tables.sort_by_key(|t| tri_index(t.m, t.n));
        let expected = (n_max + 1) * (n_max + 2) / 2;
        if tables.len() != expected {
            return Err(Error::parse(format!(
                "expected {expected} tables for n_max = {n_max}, found {}",
                tables.len()
            )));
        }
        for (i, t) in tables.iter().enumerate() {
            if tri_index(t.m, t.n) != i {
                return Err(Error::MissingTable { m: t.m, n: t.n });
            }
            if t.c != c {
                return Err(Error::parse(format!(
                    "table (m={}, n={}) has c = {} but context has c = {c}",
                    t.m, t.n, t.c
                )));
            }
        }
        Ok(Self {
            c,
            n_max,
            precision,
            tables,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn precision(&self) -> PrecisionMode {
        self.precision
    }

    pub fn table(&self, m: usize, n: usize) -> Result<&SwfTable> {
        if m > n || n > self.n_max {
            return Err(Error::MissingTable { m, n });
        }
        Ok(&self.tables[tri_index(m, n)])
    }

    pub fn tables(&self) -> &[SwfTable] {
        &self.tables
    }
}

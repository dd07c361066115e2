//! Dense linear algebra and ODE integration used by the encoders and the
//! spheroidal wave function tables.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::domain(format!(
                "vector of length {} for matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// `self · diag(d)`.
    pub fn scale_columns(&self, d: &[Complex64]) -> Result<ComplexMatrix> {
        if d.len() != self.cols {
            return Err(Error::domain("diagonal length does not match column count"));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for (j, dj) in d.iter().enumerate() {
                out.data[i * self.cols + j] *= dj;
            }
        }
        Ok(out)
    }

    pub fn conj_transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Diagnostics of a regularized least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Number of singular values retained.
    pub effective_rank: usize,
    /// Number of unknowns.
    pub unknowns: usize,
    pub max_singular_value: f64,
    /// Smallest retained singular value.
    pub min_singular_value: f64,
}

impl SolveReport {
    pub fn is_rank_deficient(&self) -> bool {
        self.effective_rank < self.unknowns
    }

    pub fn condition_number(&self) -> f64 {
        self.max_singular_value / self.min_singular_value
    }
}

/// Relative singular value cutoff applied when no regularization is requested.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Minimizer of `‖b − Mx‖² + σ‖x‖²`.
pub fn rls_solve(m: &ComplexMatrix, b: &[Complex64], sigma: f64) -> Result<Vec<Complex64>> {
    rls_solve_with_report(m, b, sigma).map(|(x, _)| x)
}

/// [`rls_solve`] with rank diagnostics.
///
/// For `σ = 0` the columns are first scaled to unit norm (the least-squares
/// minimizer does not depend on column scaling) and the rank is the number of
/// singular values of the scaled matrix above `RANK_TOLERANCE · s_max`. A
/// full-rank system is then solved by Householder QR; a rank-deficient one
/// by the truncated SVD, giving the minimum-norm solution in the scaled
/// unknowns. For `σ > 0` the Tikhonov solution
/// `x = Σ sᵢ/(sᵢ² + σ) (uᵢᴴ b) vᵢ` is formed from the SVD of the unscaled
/// matrix. The report describes the matrix that was actually decomposed.
pub fn rls_solve_with_report(
    m: &ComplexMatrix,
    b: &[Complex64],
    sigma: f64,
) -> Result<(Vec<Complex64>, SolveReport)> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::domain("empty system matrix"));
    }
    if b.len() != m.rows {
        return Err(Error::domain(format!(
            "right-hand side has length {} but matrix has {} rows",
            b.len(),
            m.rows
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::domain(format!("regularization must be nonnegative, got {sigma}")));
    }
    let mut a = m.to_nalgebra();
    let scale: Vec<f64> = if sigma == 0.0 {
        a.column_iter().map(|c| c.norm()).map(|n| if n > 0.0 { n } else { 1.0 }).collect()
    } else {
        vec![1.0; m.cols]
    };
    for (j, &sj) in scale.iter().enumerate() {
        a.column_mut(j).unscale_mut(sj);
    }
    let rhs = DVector::from_column_slice(b);
    let s = a.singular_values();
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = if sigma == 0.0 { RANK_TOLERANCE * s_max } else { 0.0 };
    let kept = |si: f64| si > cutoff && si > 0.0;
    let rank = s.iter().filter(|&&si| kept(si)).count();
    let s_min = s.iter().cloned().filter(|&si| kept(si)).fold(f64::INFINITY, f64::min);

    let y: Vec<Complex64> = if sigma == 0.0 && rank == m.cols && m.rows >= m.cols {
        let qr = a.qr();
        let qtb = qr.q().adjoint() * &rhs;
        let y = qr
            .r()
            .solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::numerical("singular triangular factor in least-squares solve"))?;
        y.iter().cloned().collect()
    } else {
        let svd = a
            .try_svd(true, true, SVD_EPS, SVD_MAX_ITER)
            .ok_or_else(|| Error::numerical("singular value decomposition did not converge"))?;
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested V^H");
        let mut y = vec![Complex64::new(0.0, 0.0); m.cols];
        for (i, &si) in svd.singular_values.iter().enumerate() {
            if !kept(si) {
                continue;
            }
            let proj = u.column(i).dotc(&rhs);
            let coef = proj * (si / (si * si + sigma));
            // v_i is the conjugate of row i of V^H.
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += coef * v_t[(i, j)].conj();
            }
        }
        y
    };
    let x = y.iter().zip(&scale).map(|(yj, sj)| yj / *sj).collect();
    let report = SolveReport {
        effective_rank: rank,
        unknowns: m.cols,
        max_singular_value: s_max,
        min_singular_value: s_min,
    };
    Ok((x, report))
}

/// Convergence threshold and iteration cap for the vector-producing SVD.
/// The library default stops at roughly 1e-13 relative accuracy.
const SVD_EPS: f64 = 1e-17;
const SVD_MAX_ITER: usize = 100_000;

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors; `eigenvectors[j]` belongs to `eigenvalues[j]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

const QL_MAX_ITER: usize = 60;

/// Full spectrum of the symmetric tridiagonal matrix with the given diagonal
/// and off-diagonal, by the implicit QL algorithm.
pub fn tridiag_sym_eig(diag: &[f64], offdiag: &[f64]) -> Result<TridiagEigen> {
    let n = diag.len();
    let (values, z) = implicit_ql(diag, offdiag, true)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&j| (0..n).map(|k| z[k * n + j]).collect())
        .collect();
    Ok(TridiagEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Ascending eigenvalues only.
pub fn tridiag_sym_eigvals(diag: &[f64], offdiag: &[f64]) -> Result<Vec<f64>> {
    let (mut values, _) = implicit_ql(diag, offdiag, false)?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn implicit_ql(diag: &[f64], offdiag: &[f64], vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::domain("empty tridiagonal matrix"));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::domain(format!(
            "off-diagonal length {} for diagonal length {n}",
            offdiag.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);
    let mut z = if vectors {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    } else {
        Vec::new()
    };

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::numerical(format!(
                        "implicit QL did not converge for eigenvalue {l} of {n}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        for k in 0..n {
                            let zk1 = z[k * n + i + 1];
                            let zk = z[k * n + i];
                            z[k * n + i + 1] = s * zk + c * zk1;
                            z[k * n + i] = c * zk - s * zk1;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, z))
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Accumulates either plainly or with compensation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Accumulator {
    compensated: bool,
    plain: f64,
    comp: CompensatedSum,
}

impl Accumulator {
    pub(crate) fn new(compensated: bool) -> Self {
        Self {
            compensated,
            plain: 0.0,
            comp: CompensatedSum::default(),
        }
    }

    pub(crate) fn add(&mut self, x: f64) {
        if self.compensated {
            self.comp.add(x);
        } else {
            self.plain += x;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.compensated {
            self.comp.value()
        } else {
            self.plain
        }
    }
}

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(t, y)` from `t0` to `t1`.
pub fn integrate_dopri5<const D: usize>(
    f: impl Fn(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    t1: f64,
    rtol: f64,
    max_steps: usize,
) -> Result<[f64; D]> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = dir * (span.abs() / 100.0).min(0.05);
    for _ in 0..max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let mut k = [[0.0; D]; 7];
        k[0] = f(t, &y);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for d in 0..D {
                        ys[d] += h * a * kj[d];
                    }
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for d in 0..D {
            let mut inc5 = 0.0;
            let mut inc4 = 0.0;
            for s in 0..7 {
                inc5 += B5[s] * k[s][d];
                inc4 += B4[s] * k[s][d];
            }
            y5[d] += h * inc5;
            let scale = rtol * y[d].abs().max(y5[d].abs()).max(f64::MIN_POSITIVE);
            err = err.max((h * (inc5 - inc4)).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if !h.is_finite() || h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::numerical("ODE step size underflow"));
        }
    }
    Err(Error::numerical(format!(
        "ODE integration exceeded {max_steps} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tridiag_trivial_spectra() {
        let e = tridiag_sym_eig(&[2.0, 2.0], &[0.0]).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 2.0]);
        let e = tridiag_sym_eig(&[0.0, 0.0], &[1.0]).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-15);
        assert!(tridiag_sym_eig(&[1.0, 2.0], &[]).is_err());
    }

    #[test]
    fn tridiag_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let eig = tridiag_sym_eig(&diag, &off).unwrap();
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        for (lam, v) in eig.eigenvalues.iter().zip(&eig.eigenvectors) {
            let mut res: f64 = 0.0;
            for i in 0..n {
                let mut tv = diag[i] * v[i];
                if i > 0 {
                    tv += off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    tv += off[i] * v[i + 1];
                }
                res += (tv - lam * v[i]).powi(2);
            }
            assert!(res.sqrt() < 1e-10);
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| eig.eigenvectors[a][i] * eig.eigenvectors[b][i]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12);
            }
        }
        let vals = tridiag_sym_eigvals(&diag, &off).unwrap();
        for (a, b) in vals.iter().zip(&eig.eigenvalues) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rls_identity_and_shrinkage() {
        let id3 = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let x = rls_solve(&id3, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)], 0.0).unwrap();
        for (xi, e) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((xi - e).norm() < 1e-14);
        }
        let id1 = ComplexMatrix::from_fn(1, 1, |_, _| c(1.0, 0.0));
        let x = rls_solve(&id1, &[c(1.0, 0.0)], 1.0).unwrap();
        assert!((x[0] - 0.5).norm() < 1e-15);
    }

    #[test]
    fn rls_dimension_mismatch() {
        let m = ComplexMatrix::zeros(3, 2);
        assert!(rls_solve(&m, &[c(1.0, 0.0)], 0.0).is_err());
        assert!(rls_solve(&ComplexMatrix::zeros(2, 2), &[c(0.0, 0.0); 2], -1.0).is_err());
    }

    #[test]
    fn rls_recovers_overdetermined_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = ComplexMatrix::from_fn(20, 5, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let x: Vec<Complex64> = (0..5).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let b = m.mul_vec(&x).unwrap();
        let (got, report) = rls_solve_with_report(&m, &b, 0.0).unwrap();
        assert_eq!(report.effective_rank, 5);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-10);
        }
    }

    #[test]
    fn rls_rank_deficient_reports_rank() {
        // Two identical columns.
        let m = ComplexMatrix::from_fn(4, 2, |i, _| c(i as f64 + 1.0, 0.0));
        let b: Vec<Complex64> = (0..4).map(|i| c(2.0 * (i as f64 + 1.0), 0.0)).collect();
        let (x, report) = rls_solve_with_report(&m, &b, 0.0).unwrap();
        assert!(report.is_rank_deficient());
        assert_eq!(report.effective_rank, 1);
        // Minimum-norm solution splits the weight evenly.
        assert!((x[0] - 1.0).norm() < 1e-12 && (x[1] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn dopri5_exponential_and_oscillator() {
        let y = integrate_dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, 1e-12, 100_000).unwrap();
        assert!((y[0] - 2f64.exp()).abs() / 2f64.exp() < 1e-10);
        let y = integrate_dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], -3.0, 1e-12, 100_000).unwrap();
        assert!((y[0] - (-3f64).sin()).abs() < 1e-10);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}

//! Dense linear-algebra kernel.
//!
//! Everything here works on small dense systems (a few up to a few hundred
//! unknowns). Matrices are stored row-major. The LU factorization uses
//! partial pivoting with an absolute pivot floor near underflow, so that
//! M-matrices with extreme entry ranges are never rejected as singular.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots with magnitude below this are treated as exact zeros.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// A real vector whose entries are finite on construction.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `data`, rejecting NaN or infinite entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {i} is {}", data[i])));
        }
        Ok(Vector(data))
    }

    /// Wraps `data` without the finiteness check. Used on hot paths where
    /// the values come out of arithmetic on already-validated inputs.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Vector(vec![value; n])
    }

    pub fn ones(n: usize) -> Self {
        Self::filled(n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &[f64]) {
        for (s, v) in self.0.iter_mut().zip(x) {
            *s += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|v| alpha * v).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Vector {
        Vector(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.0)
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Smallest entry; `+inf` for an empty vector.
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {}) is {}",
                i / cols.max(1),
                i % cols.max(1),
                data[i]
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in model definitions and tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok(Vector(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    /// `wᵀ M` as a vector of length `cols`.
    pub fn left_mul_vec(&self, w: &[f64]) -> Result<Vector> {
        if w.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, vector has {} entries",
                self.rows,
                w.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += wi * m;
            }
        }
        Ok(Vector(out))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Right-multiplies by `diag(scale)`, i.e. scales column `j` by `scale[j]`.
    pub fn scale_columns(&self, scale: &[f64]) -> Result<DenseMatrix> {
        if scale.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} column scales for {} columns",
                scale.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, s) in out.data[i * self.cols..(i + 1) * self.cols]
                .iter_mut()
                .zip(scale)
            {
                *v *= s;
            }
        }
        Ok(out)
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// `I - h * self` for a square matrix.
    pub fn identity_minus_scaled(&self, h: f64) -> DenseMatrix {
        debug_assert!(self.is_square());
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= -h;
        }
        for i in 0..self.rows {
            out[(i, i)] += 1.0;
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors `P A = L U` with unit lower-triangular `L`, stored packed.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factorizes a square matrix with partial (row) pivoting.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax >= PIVOT_FLOOR) {
                return Err(Error::SingularMatrix { column: k, pivot: pmax.max(0.0) });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "LU of order {n} cannot solve a right-hand side of length {}",
                b.len()
            )));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(Vector(x))
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vector> {
    if a.rows != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, right-hand side has {} entries",
            a.rows,
            b.len()
        )));
    }
    LuFactors::factor(a)?.solve(b)
}

/// Explicit inverse, column by column. Only used for small structural checks.
pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let lu = LuFactors::factor(a)?;
    let n = a.rows;
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = lu.solve(&e)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Weighted root-mean-square norm
/// `sqrt(mean((delta_i / (atol + rtol |y_ref_i|))^2))`.
pub fn wrms_norm(delta: &[f64], y_ref: &[f64], atol: f64, rtol: f64) -> Result<f64> {
    if delta.len() != y_ref.len() {
        return Err(Error::DimensionMismatch(format!(
            "delta has {} entries, reference has {}",
            delta.len(),
            y_ref.len()
        )));
    }
    if delta.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = delta
        .iter()
        .zip(y_ref)
        .map(|(d, y)| {
            let r = d / (atol + rtol * y.abs());
            r * r
        })
        .sum();
    Ok((sum / delta.len() as f64).sqrt())
}

/// Least-squares slope of `ln ys` against `ln xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} abscissae, {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("slope fit needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * n * (1.0 + mx * mx) {
        return Err(Error::Degenerate("all abscissae are identical".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_ok(a: &DenseMatrix, x: &[f64], b: &[f64]) -> bool {
        let ax = a.mul_vec(x).unwrap();
        let r = norm_inf(&ax.sub(b));
        r <= 1e-10 * (a.norm_inf() * norm_inf(x) + norm_inf(b))
    }

    #[test]
    fn lu_identity() {
        let x = lu_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn lu_two_by_two() {
        let a = DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let x = lu_solve(&a, &[1.0, 0.0]).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lu_zero_matrix_is_singular() {
        let err = lu_solve(&DenseMatrix::zeros(2, 2), &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }));
    }

    #[test]
    fn lu_accepts_extreme_but_regular_pivots() {
        let a = DenseMatrix::diagonal(&[1e-250, 1e250]);
        let x = lu_solve(&a, &[1e-250, 1e250]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn lu_needs_pivoting() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let x = lu_solve(&a, &[3.0, 4.0]).unwrap();
        assert_eq!(x.as_slice(), &[4.0, 3.0]);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            lu_solve(&DenseMatrix::identity(2), &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            lu_solve(&DenseMatrix::zeros(2, 3), &[1.0, 2.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Vector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn lu_residual_random_well_conditioned() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n = 1 + trial % 20;
            // Diagonally dominant => condition number bounded by a modest constant.
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                let mut off = 0.0;
                for j in 0..n {
                    if i != j {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        a[(i, j)] = v;
                        off += v.abs();
                    }
                }
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                a[(i, i)] = sign * (off + rng.gen_range(0.1..2.0));
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let x = lu_solve(&a, &b).unwrap();
            assert!(residual_ok(&a, &x, &b), "trial {trial}");
        }
    }

    #[test]
    fn lu_is_deterministic() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, -1.0, 0.3],
            vec![-2.0, 5.0, 1.0],
            vec![0.5, 0.25, 3.0],
        ])
        .unwrap();
        let b = [1.0, 2.0, 3.0];
        let x1 = lu_solve(&a, &b).unwrap();
        let x2 = lu_solve(&a, &b).unwrap();
        assert_eq!(x1, x2);
    }

    #[test]
    fn wrms_examples() {
        assert_eq!(wrms_norm(&[0.0, 0.0], &[3.0, -1.0], 1e-6, 1e-3).unwrap(), 0.0);
        let one = wrms_norm(&[1e-6, 1e-6], &[0.0, 0.0], 1e-6, 0.0).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let r2 = wrms_norm(&[2e-6, 0.0], &[0.0, 0.0], 1e-6, 0.0).unwrap();
        assert!((r2 - 2f64.sqrt()).abs() < 1e-12);
        assert!(wrms_norm(&[1.0], &[1.0, 2.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn slope_examples() {
        let s = fit_slope(&[0.1, 0.05, 0.025], &[1e-2, 2.5e-3, 6.25e-4]).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        assert!(fit_slope(&[1.0, 2.0], &[3.0, 3.0]).unwrap().abs() < 1e-15);
        let s3 = fit_slope(&[0.1, 0.05], &[1e-3, 1.25e-4]).unwrap();
        assert!((s3 - 3.0).abs() < 1e-12);
        assert!(matches!(
            fit_slope(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_slope(&[1.0], &[1.0]).is_err());
        assert!(fit_slope(&[1.0, -1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn column_scaling_and_products() {
        let g = DenseMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let s = g.scale_columns(&[2.0, 0.0]).unwrap();
        assert_eq!(s.as_slice(), &[-2.0, 0.0, 2.0, 0.0]);
        let p = g.matmul(&DenseMatrix::diagonal(&[2.0, 0.0])).unwrap();
        assert_eq!(p, s);
        let w = g.left_mul_vec(&[1.0, 1.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wrms_homogeneous_in_delta(
                delta in proptest::collection::vec(-1e3f64..1e3, 1..12),
                c in -50.0f64..50.0,
                atol in 1e-8f64..1.0,
            ) {
                let y = vec![0.0; delta.len()];
                let base = wrms_norm(&delta, &y, atol, 0.0).unwrap();
                let scaled: Vec<f64> = delta.iter().map(|d| c * d).collect();
                let lhs = wrms_norm(&scaled, &y, atol, 0.0).unwrap();
                prop_assert!((lhs - c.abs() * base).abs() <= 1e-12 * (1.0 + c.abs() * base));
            }

            #[test]
            fn slope_recovers_power_law(
                p in -6.0f64..6.0,
                c in 1e-3f64..1e3,
                x0 in 1e-4f64..1.0,
                n in 2usize..8,
            ) {
                let xs: Vec<f64> = (0..n).map(|k| x0 * 0.5f64.powi(k as i32)).collect();
                let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
                let s = fit_slope(&xs, &ys).unwrap();
                prop_assert!((s - p).abs() <= 1e-12 * (1.0 + p.abs()) * 10.0);
            }
        }
    }
}

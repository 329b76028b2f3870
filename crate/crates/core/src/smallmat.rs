//! Dense kernels for the tiny matrices used by the tracking pipeline.
//!
//! Every value lives in fixed-capacity inline storage (at most
//! [`MAX_DIM`]×[`MAX_DIM`]), so none of the kernels touch the heap. Data is
//! row-major and packed: element `(i, j)` of an `r×c` matrix sits at
//! `i * c + j`.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Largest supported row or column count.
pub const MAX_DIM: usize = 16;

const CAPACITY: usize = MAX_DIM * MAX_DIM;

/// Absolute symmetry tolerance for [`cholesky`], scaled by the entry
/// magnitude once entries exceed one.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch ({}x{} vs {}x{})", .left.0, .left.1, .right.0, .right.1)]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("shape {rows}x{cols} outside 1..={MAX_DIM}")]
    BadShape { rows: usize, cols: usize },
    #[error("expected {expected} values, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {max_asym:e})")]
    NotSymmetric { max_asym: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
        return Err(LinalgError::BadShape { rows, cols });
    }
    Ok(())
}

/// A dense `rows×cols` matrix with inline storage.
#[derive(Clone, Copy)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: [f64; CAPACITY],
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_shape(rows, cols)?;
        Ok(Mat {
            rows,
            cols,
            data: [0.0; CAPACITY],
        })
    }

    /// Identity of order `n`. Panics if `n` is outside `1..=MAX_DIM`.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n).expect("identity order out of range");
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix. Panics if `diag` is empty or too long.
    pub fn diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Mat::zeros(n, n).expect("diagonal length out of range");
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn from_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        let mut m = Mat::zeros(rows, cols)?;
        if values.len() != rows * cols {
            return Err(LinalgError::DataLength {
                expected: rows * cols,
                got: values.len(),
            });
        }
        m.data[..values.len()].copy_from_slice(values);
        Ok(m)
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut m = Mat::zeros(r, c)?;
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != c {
                return Err(LinalgError::DataLength {
                    expected: c,
                    got: row.len(),
                });
            }
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// The packed row-major values.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.rows * self.cols]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.rows * self.cols]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a[i][j] - a[j][i]|`. Panics on non-square input.
    pub fn max_asymmetry(&self) -> f64 {
        assert!(self.is_square(), "max_asymmetry on non-square matrix");
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    /// Replaces `self` by `(self + selfᵀ) / 2`.
    pub fn symmetrize(&mut self) -> Result<()> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Mat) -> Result<f64> {
        same_shape("max_abs_diff", self.shape(), other.shape())?;
        Ok(self
            .as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl PartialEq for Mat {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.as_slice() == other.as_slice()
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                f.write_str("; ")?;
            }
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
        }
        f.write_str("]")
    }
}

/// A dense column vector with inline storage.
#[derive(Clone, Copy)]
pub struct Vector {
    len: usize,
    data: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(len: usize) -> Result<Self> {
        check_shape(len, 1)?;
        Ok(Vector {
            len,
            data: [0.0; MAX_DIM],
        })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let mut v = Vector::zeros(values.len())?;
        v.data[..values.len()].copy_from_slice(values);
        Ok(v)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; zero-length vectors cannot be constructed.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.len]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.len]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Vector) -> Result<f64> {
        same_shape("max_abs_diff", (self.len, 1), (other.len, 1))?;
        Ok(self
            .as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl PartialEq for Vector {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vector{:?}", self.as_slice())
    }
}

fn same_shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(LinalgError::DimensionMismatch { op, left, right });
    }
    Ok(())
}

/// `a · b`.
pub fn matmul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(LinalgError::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = Mat {
        rows: n,
        cols: m,
        data: [0.0; CAPACITY],
    };
    for i in 0..n {
        let out_row = &mut out.data[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a.data[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b.data[p * m..(p + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Ok(out)
}

/// `a · v`.
pub fn matvec(a: &Mat, v: &Vector) -> Result<Vector> {
    if a.cols != v.len {
        return Err(LinalgError::DimensionMismatch {
            op: "matvec",
            left: a.shape(),
            right: (v.len, 1),
        });
    }
    let mut out = Vector {
        len: a.rows,
        data: [0.0; MAX_DIM],
    };
    for i in 0..a.rows {
        out.data[i] = a.row(i).iter().zip(v.as_slice()).map(|(x, y)| x * y).sum();
    }
    Ok(out)
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = Mat {
        rows: a.cols,
        cols: a.rows,
        data: [0.0; CAPACITY],
    };
    for i in 0..a.rows {
        for j in 0..a.cols {
            out.data[j * a.rows + i] = a.data[i * a.cols + j];
        }
    }
    out
}

/// Lower-triangular `L` with `L·Lᵀ = a`.
///
/// The input must already be symmetric to within [`SYMMETRY_TOL`]; callers
/// that accumulate rounding error symmetrize first.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (a.data[i * n + j], a.data[j * n + i]);
            let asym = (x - y).abs();
            if !(asym <= SYMMETRY_TOL * x.abs().max(y.abs()).max(1.0)) {
                return Err(LinalgError::NotSymmetric { max_asym: asym });
            }
        }
    }
    let mut l = Mat {
        rows: n,
        cols: n,
        data: [0.0; CAPACITY],
    };
    for j in 0..n {
        let mut d = a.data[j * n + j];
        for k in 0..j {
            d -= l.data[j * n + k] * l.data[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l.data[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a.data[i * n + j];
            for k in 0..j {
                s -= l.data[i * n + k] * l.data[j * n + k];
            }
            l.data[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix by Cholesky forward and
/// back substitution.
pub fn inverse_spd(a: &Mat) -> Result<Mat> {
    let l = cholesky(a)?;
    let n = a.rows;
    let mut inv = Mat {
        rows: n,
        cols: n,
        data: [0.0; CAPACITY],
    };
    let mut col = [0.0f64; MAX_DIM];
    for c in 0..n {
        // L y = e_c
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l.data[i * n + k] * col[k];
            }
            col[i] = s / l.data[i * n + i];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in (i + 1)..n {
                s -= l.data[k * n + i] * col[k];
            }
            col[i] = s / l.data[i * n + i];
        }
        for i in 0..n {
            inv.data[i * n + c] = col[i];
        }
    }
    Ok(inv)
}

/// Element-wise binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwOp {
    Add,
    Sub,
    Mul,
    Min,
}

impl EwOp {
    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            EwOp::Add => a + b,
            EwOp::Sub => a - b,
            EwOp::Mul => a * b,
            EwOp::Min => a.min(b),
        }
    }
}

/// Shared element-wise surface of [`Mat`] and [`Vector`].
pub trait Elementwise: Sized + Copy {
    fn shape(&self) -> (usize, usize);
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];
}

impl Elementwise for Mat {
    fn shape(&self) -> (usize, usize) {
        Mat::shape(self)
    }
    fn values(&self) -> &[f64] {
        self.as_slice()
    }
    fn values_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

impl Elementwise for Vector {
    fn shape(&self) -> (usize, usize) {
        (self.len, 1)
    }
    fn values(&self) -> &[f64] {
        self.as_slice()
    }
    fn values_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

pub fn ew_binary<T: Elementwise>(op: EwOp, a: &T, b: &T) -> Result<T> {
    same_shape("ew_binary", a.shape(), b.shape())?;
    let mut out = *a;
    for (o, &bv) in out.values_mut().iter_mut().zip(b.values()) {
        *o = op.apply(*o, bv);
    }
    Ok(out)
}

pub fn scale<T: Elementwise>(a: &T, k: f64) -> T {
    let mut out = *a;
    for v in out.values_mut() {
        *v *= k;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat {
        Mat::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let p = Mat::from_slice(7, 7, &(0..49).map(|v| v as f64 * 0.5).collect::<Vec<_>>()).unwrap();
        assert_eq!(matmul(&Mat::identity(7), &p).unwrap(), p);

        let mut h = Mat::zeros(4, 7).unwrap();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        let hp = matmul(&h, &p).unwrap();
        assert_eq!(hp.shape(), (4, 7));
        assert_eq!(hp.row(2), p.row(2));

        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), m(&[&[19.0, 22.0], &[43.0, 50.0]]));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let err = matmul(&Mat::zeros(4, 7).unwrap(), &Mat::zeros(4, 4).unwrap()).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { op: "matmul", .. }));
    }

    #[test]
    fn matvec_examples() {
        let x = Vector::from_slice(&[1.0, -2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        assert_eq!(matvec(&Mat::identity(7), &x).unwrap(), x);
        let f = Mat::identity(7);
        assert_eq!(matvec(&f, &x).unwrap().len(), 7);
        let a = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let v = Vector::from_slice(&[3.0, 4.0]).unwrap();
        assert_eq!(matvec(&a, &v).unwrap().as_slice(), &[3.0, 8.0]);
        assert!(matvec(&a, &x).is_err());
    }

    #[test]
    fn transpose_examples() {
        assert_eq!(transpose(&Mat::identity(7)), Mat::identity(7));
        let h = Mat::zeros(4, 7).unwrap();
        assert_eq!(transpose(&h).shape(), (7, 4));
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let t = transpose(&a);
        assert_eq!(t, m(&[&[1.0, 4.0], &[2.0, 5.0], &[3.0, 6.0]]));
        assert_eq!(transpose(&t), a);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&Mat::identity(4)).unwrap(), Mat::identity(4));

        let a = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let expected = m(&[&[2.0, 0.0], &[1.0, 2f64.sqrt()]]);
        assert!(l.max_abs_diff(&expected).unwrap() < 1e-15);
        let llt = matmul(&l, &transpose(&l)).unwrap();
        assert!(llt.max_abs_diff(&a).unwrap() < 1e-9);

        let indefinite = m(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(
            cholesky(&indefinite).unwrap_err(),
            LinalgError::NotPositiveDefinite { pivot: 1 }
        );
    }

    #[test]
    fn cholesky_rejects_asymmetric_and_rectangular() {
        let a = m(&[&[4.0, 2.0], &[2.1, 3.0]]);
        assert!(matches!(cholesky(&a), Err(LinalgError::NotSymmetric { .. })));
        assert!(matches!(
            cholesky(&Mat::zeros(2, 3).unwrap()),
            Err(LinalgError::NotSquare { .. })
        ));
        let nan = m(&[&[f64::NAN, 0.0], &[0.0, 1.0]]);
        assert!(cholesky(&nan).is_err());
    }

    #[test]
    fn inverse_spd_examples() {
        assert_eq!(inverse_spd(&Mat::identity(4)).unwrap(), Mat::identity(4));
        let two = scale(&Mat::identity(4), 2.0);
        assert!(inverse_spd(&two)
            .unwrap()
            .max_abs_diff(&scale(&Mat::identity(4), 0.5))
            .unwrap()
            < 1e-15);
        let a = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        // det = 4*3 - 2*2 = 8
        let expected = scale(&m(&[&[3.0, -2.0], &[-2.0, 4.0]]), 1.0 / 8.0);
        assert!(inverse_spd(&a).unwrap().max_abs_diff(&expected).unwrap() < 1e-15);
        assert!(inverse_spd(&m(&[&[1.0, 2.0], &[2.0, 1.0]])).is_err());
    }

    #[test]
    fn elementwise_examples() {
        let a = m(&[&[1.0, -2.0], &[3.5, 4.0]]);
        let zero = Mat::zeros(2, 2).unwrap();
        assert_eq!(ew_binary(EwOp::Add, &a, &zero).unwrap(), a);

        let z = Vector::from_slice(&[10.0, 20.0, 800.0, 0.5]).unwrap();
        let hx = Vector::from_slice(&[9.0, 21.0, 790.0, 0.5]).unwrap();
        let y = ew_binary(EwOp::Sub, &z, &hx).unwrap();
        assert_eq!(y.as_slice(), &[1.0, -1.0, 10.0, 0.0]);

        let lo = ew_binary(
            EwOp::Min,
            &Vector::from_slice(&[1.0, 5.0]).unwrap(),
            &Vector::from_slice(&[3.0, 2.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(lo.as_slice(), &[1.0, 2.0]);

        let prod = ew_binary(EwOp::Mul, &a, &a).unwrap();
        assert_eq!(prod.as_slice(), &[1.0, 4.0, 12.25, 16.0]);

        assert!(ew_binary(EwOp::Add, &a, &Mat::zeros(2, 3).unwrap()).is_err());
    }

    #[test]
    fn scale_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(scale(&a, 1.0), a);
        assert_eq!(scale(&Mat::identity(7), 10.0), Mat::diag(&[10.0; 7]));
        let v = scale(&Vector::from_slice(&[1.0, 2.0]).unwrap(), -0.5);
        assert_eq!(v.as_slice(), &[-0.5, -1.0]);
    }

    #[test]
    fn shape_limits() {
        assert!(Mat::zeros(0, 3).is_err());
        assert!(Mat::zeros(17, 3).is_err());
        assert!(Mat::zeros(16, 16).is_ok());
        assert!(Vector::zeros(17).is_err());
        assert!(Mat::from_slice(2, 2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn symmetrize_averages_off_diagonal() {
        let mut a = m(&[&[1.0, 2.0], &[4.0, 5.0]]);
        assert_eq!(a.max_asymmetry(), 2.0);
        a.symmetrize().unwrap();
        assert_eq!(a, m(&[&[1.0, 3.0], &[3.0, 5.0]]));
    }
}

//! Minimal dense row-major matrix plus the small symmetric solve behind
//! every alternating row update.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Squared Frobenius norm.
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Mutable row chunks for parallel per-row updates.
    pub fn par_rows_mut(&mut self) -> rayon::slice::ChunksMut<'_, f64> {
        use rayon::prelude::*;
        self.data.par_chunks_mut(self.cols)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `a += alpha * x x'` over a row-major r x r buffer.
#[inline]
pub fn add_outer(a: &mut [f64], alpha: f64, x: &[f64]) {
    let r = x.len();
    for i in 0..r {
        let s = alpha * x[i];
        axpy(s, x, &mut a[i * r..(i + 1) * r]);
    }
}

/// In-place Cholesky solve of `a x = b` for symmetric positive-definite `a`
/// (row-major r x r; lower triangle overwritten, `b` overwritten with x).
/// Returns false on a non-positive pivot.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], r: usize) -> bool {
    for j in 0..r {
        let mut sum = a[j * r + j];
        for p in 0..j {
            sum -= a[j * r + p] * a[j * r + p];
        }
        if sum <= 0.0 {
            return false;
        }
        let ljj = sum.sqrt();
        a[j * r + j] = ljj;
        let inv = 1.0 / ljj;
        for i in (j + 1)..r {
            let mut s = a[i * r + j];
            for p in 0..j {
                s -= a[i * r + p] * a[j * r + p];
            }
            a[i * r + j] = s * inv;
        }
    }
    for i in 0..r {
        let mut s = b[i];
        for j in 0..i {
            s -= a[i * r + j] * b[j];
        }
        b[i] = s / a[i * r + i];
    }
    for i in (0..r).rev() {
        let mut s = b[i];
        for j in (i + 1)..r {
            s -= a[j * r + i] * b[j];
        }
        b[i] = s / a[i * r + i];
    }
    true
}

/// Solve with escalating diagonal jitter when the plain factorization hits a
/// non-positive pivot (only reachable with a zero ridge term). Returns false
/// if even the jittered system fails; callers then keep the previous row.
pub fn solve_spd(a: &mut [f64], b: &mut [f64], r: usize) -> bool {
    let a0 = a.to_vec();
    let b0 = b.to_vec();
    if cholesky_solve(a, b, r) {
        return true;
    }
    let trace: f64 = (0..r).map(|i| a0[i * r + i]).sum();
    let mut jitter = 1e-12 * (trace / r as f64).abs().max(1.0);
    for _ in 0..3 {
        a.copy_from_slice(&a0);
        b.copy_from_slice(&b0);
        for i in 0..r {
            a[i * r + i] += jitter;
        }
        if cholesky_solve(a, b, r) {
            return true;
        }
        jitter *= 1e4;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // a = [[4,1],[1,3]], b = [1,2] -> x = [1/11, 7/11]
        let mut a = vec![4.0, 1.0, 1.0, 3.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_spd(&mut a, &mut b, 2));
        assert!((b[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((b[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_zero_rhs_yields_zero() {
        let mut a = vec![0.0; 9];
        let mut b = vec![0.0; 3];
        assert!(solve_spd(&mut a, &mut b, 3));
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outer_product_accumulation() {
        let mut a = vec![0.0; 4];
        add_outer(&mut a, 2.0, &[1.0, 3.0]);
        assert_eq!(a, vec![2.0, 6.0, 6.0, 18.0]);
    }
}

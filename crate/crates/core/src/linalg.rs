//! Small dense linear algebra helpers on `f64` slices.
//!
//! Everything here operates on row-major matrices stored flat. The sizes in
//! this crate are modest (ambient dimension ≤ ~16k, subspace dimension ≤ ~1k),
//! so plain loops are sufficient.

/// Dot product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// a += s * b
#[inline]
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        assert!(rows.iter().all(|v| v.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn to_row_vecs(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(|r| r.to_vec()).collect()
    }

    /// M · x for x of length `cols`; returns length `rows`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.iter_rows().map(|r| dot(r, x)).collect()
    }

    /// Σ_k c_k · row_k, i.e. Mᵀ·c; returns length `cols`.
    pub fn combine_rows(&self, c: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (ck, row) in c.iter().zip(self.iter_rows()) {
            if *ck != 0.0 {
                axpy(&mut out, *ck, row);
            }
        }
        out
    }

    /// Like `combine_rows` but writes into a provided buffer.
    pub fn combine_rows_into(&self, c: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (ck, row) in c.iter().zip(self.iter_rows()) {
            if *ck != 0.0 {
                axpy(out, *ck, row);
            }
        }
    }
}

/// Outcome of `orthonormalize`: orthonormal rows `q` spanning the input rows,
/// plus the transform `a` with `q = a · input` (row-combination coefficients),
/// and the indices of input rows that were kept.
pub struct Orthonormalized {
    pub q: Mat,
    pub a: Mat,
    pub kept: Vec<usize>,
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Rows whose residual norm falls below `rank_tol` times the largest input
/// row norm are dropped, so the output always has orthonormal rows.
pub fn orthonormalize(input: &Mat, rank_tol: f64) -> Orthonormalized {
    let n = input.rows;
    let dim = input.cols;
    let max_norm = input
        .iter_rows()
        .map(norm2)
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let threshold = rank_tol * max_norm;

    let mut q_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut a_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut kept = Vec::with_capacity(n);

    for i in 0..n {
        let mut v = input.row(i).to_vec();
        let mut coeff = vec![0.0; n];
        coeff[i] = 1.0;
        // two passes of projection removal for numerical stability
        for _ in 0..2 {
            for (qr, ar) in q_rows.iter().zip(a_rows.iter()) {
                let p = dot(&v, qr);
                axpy(&mut v, -p, qr);
                axpy(&mut coeff, -p, ar);
            }
        }
        let nv = norm2(&v);
        if nv > threshold {
            let inv = 1.0 / nv;
            v.iter_mut().for_each(|x| *x *= inv);
            coeff.iter_mut().for_each(|x| *x *= inv);
            q_rows.push(v);
            a_rows.push(coeff);
            kept.push(i);
        }
    }

    let r = q_rows.len();
    let q = if r == 0 { Mat::zeros(0, dim) } else { Mat::from_rows(q_rows) };
    let a = if r == 0 { Mat::zeros(0, n) } else { Mat::from_rows(a_rows) };
    Orthonormalized { q, a, kept }
}

/// Max absolute deviation of Q·Qᵀ from the identity.
pub fn gram_identity_error(q: &Mat) -> f64 {
    let mut err = 0.0_f64;
    for i in 0..q.rows {
        for j in i..q.rows {
            let g = dot(q.row(i), q.row(j));
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((g - target).abs());
        }
    }
    err
}

/// |x|^q with fast paths for the exponents that dominate our workloads.
#[inline]
pub fn abs_pow(x: f64, q: f64) -> f64 {
    let a = x.abs();
    if q == 2.0 {
        a * a
    } else if q == 4.0 {
        let s = a * a;
        s * s
    } else if q == 1.0 {
        a
    } else if q == 3.0 {
        a * a * a
    } else {
        a.powf(q)
    }
}

/// x^(q-2) for x ≥ 0, with the same fast paths (used in norm gradients).
#[inline]
pub fn pow_qm2(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        1.0
    } else if q == 4.0 {
        x * x
    } else if q == 3.0 {
        x
    } else if q == 1.0 {
        if x == 0.0 {
            0.0
        } else {
            1.0 / x
        }
    } else {
        x.powf(q - 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mgs_orthonormalizes_and_tracks_transform() {
        let m = Mat::from_rows(vec![
            vec![1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 2.0, -1.0],
        ]);
        let o = orthonormalize(&m, 1e-12);
        assert_eq!(o.q.rows, 3);
        assert!(gram_identity_error(&o.q) < 1e-12);
        // q = a · input, row by row
        for i in 0..3 {
            let rebuilt = m.combine_rows(o.a.row(i));
            for (x, y) in rebuilt.iter().zip(o.q.row(i)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mgs_drops_dependent_rows() {
        let m = Mat::from_rows(vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 3.0],
        ]);
        let o = orthonormalize(&m, 1e-10);
        assert_eq!(o.q.rows, 2);
        assert_eq!(o.kept, vec![0, 2]);
    }

    #[test]
    fn abs_pow_matches_powf() {
        for &q in &[1.0, 2.0, 3.0, 4.0, 2.5] {
            for &x in &[-1.7, 0.0, 0.3, 2.0] {
                assert!((abs_pow(x, q) - x.abs().powf(q)).abs() < 1e-12);
            }
        }
    }
}

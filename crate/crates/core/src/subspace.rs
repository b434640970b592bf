//! Linear subspaces of ℝ^N and spectral profiles.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{gram_identity_error, orthonormalize, Mat};
use crate::octahedron::BlockPartition;
use crate::rng::Rng;

/// An n-dimensional linear subspace of ℝ^N given by basis rows.
///
/// `orthonormal` records whether the stored basis has Gram matrix equal to
/// the identity within 1e-10; `orthonormalized()` returns an equivalent
/// subspace for which it always holds.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: Mat,
    orthonormal: bool,
}

impl Subspace {
    /// Build from basis rows. Errors on linear dependence.
    pub fn from_rows(rows: Vec<Vec<f64>>, ambient: usize) -> Result<Self> {
        if rows.is_empty() {
            return Ok(Subspace::zero(ambient));
        }
        if rows.iter().any(|r| r.len() != ambient) {
            return Err(Error::input("basis vectors must have the ambient length"));
        }
        let m = Mat::from_rows(rows);
        let o = orthonormalize(&m, 1e-10);
        if o.q.rows != m.rows {
            return Err(Error::input("basis vectors are linearly dependent"));
        }
        let orthonormal = gram_identity_error(&m) <= 1e-10;
        if orthonormal {
            Ok(Subspace { basis: m, orthonormal: true })
        } else {
            Ok(Subspace { basis: m, orthonormal: false })
        }
    }

    /// The zero subspace {0} (dimension 0).
    pub fn zero(ambient: usize) -> Self {
        Subspace { basis: Mat::zeros(0, ambient), orthonormal: true }
    }

    /// All of ℝ^ambient.
    pub fn full(ambient: usize) -> Self {
        let mut m = Mat::zeros(ambient, ambient);
        for i in 0..ambient {
            m.row_mut(i)[i] = 1.0;
        }
        Subspace { basis: m, orthonormal: true }
    }

    /// Random n-dimensional subspace (Gaussian basis, orthonormalized).
    pub fn random(n: usize, ambient: usize, rng: &mut Rng) -> Self {
        assert!(n <= ambient);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..ambient).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        // Gaussian rows are a.s. independent; orthonormalize directly
        let o = orthonormalize(&Mat::from_rows(rows), 1e-12);
        debug_assert_eq!(o.q.rows, n);
        Subspace { basis: o.q, orthonormal: true }
    }

    /// Assemble a block-diagonal subspace: for each listed block of
    /// coordinates, a random subspace of the given dimension inside it.
    pub fn block_diagonal_random(
        partition: &BlockPartition,
        dims: &[usize],
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.len() != partition.num_blocks() {
            return Err(Error::input("one dimension per block required"));
        }
        let ambient = partition.dim();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (b, &d) in partition.blocks().iter().zip(dims) {
            if d > b.len() {
                return Err(Error::input("block dimension exceeds block size"));
            }
            if d == 0 {
                continue;
            }
            if d == b.len() {
                for &i in b {
                    let mut row = vec![0.0; ambient];
                    row[i] = 1.0;
                    rows.push(row);
                }
                continue;
            }
            let local: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..b.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let o = orthonormalize(&Mat::from_rows(local), 1e-12);
            for r in o.q.iter_rows() {
                let mut row = vec![0.0; ambient];
                for (&i, &v) in b.iter().zip(r) {
                    row[i] = v;
                }
                rows.push(row);
            }
        }
        if rows.is_empty() {
            return Ok(Subspace::zero(ambient));
        }
        Ok(Subspace { basis: Mat::from_rows(rows), orthonormal: true })
    }

    /// Coordinate subspace span{e_i : i ∈ indices}.
    pub fn coordinate(indices: &[usize], ambient: usize) -> Self {
        let mut m = Mat::zeros(indices.len(), ambient);
        for (r, &i) in indices.iter().enumerate() {
            m.row_mut(r)[i] = 1.0;
        }
        Subspace { basis: m, orthonormal: true }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn ambient(&self) -> usize {
        self.basis.cols
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// Equivalent subspace with an orthonormal basis.
    pub fn orthonormalized(&self) -> Subspace {
        if self.orthonormal {
            return self.clone();
        }
        let o = orthonormalize(&self.basis, 1e-12);
        Subspace { basis: o.q, orthonormal: true }
    }

    /// Orthogonal (ℓ₂) projection of x onto the subspace.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let q = if self.orthonormal { self.basis.clone() } else { self.orthonormalized().basis };
        let c = q.matvec(x);
        q.combine_rows(&c)
    }

    /// Euclidean distance from x to the subspace.
    pub fn distance_l2(&self, x: &[f64]) -> f64 {
        let p = self.project(x);
        x.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Does the subspace contain x (within tol, ℓ₂)?
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.distance_l2(x) <= tol
    }

    /// Stack the bases of two subspaces (spans are summed; dependent
    /// directions are dropped).
    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut rows = self.basis.to_row_vecs();
        rows.extend(other.basis.to_row_vecs());
        let o = orthonormalize(&Mat::from_rows(rows), 1e-12);
        Subspace { basis: o.q, orthonormal: true }
    }
}

/// Coordinate standard deviations σ of a random vector together with their
/// nonincreasing rearrangement σ*.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    sigma: Vec<f64>,
    sorted: Vec<f64>,
}

impl SpectralProfile {
    /// Build from the squared values σ_i². Sorting is stable: descending by
    /// value, ties broken by original index.
    pub fn from_squares(sigma_sq: &[f64]) -> Self {
        let sigma: Vec<f64> = sigma_sq.iter().map(|s| s.max(0.0).sqrt()).collect();
        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&a, &b| {
            sigma[b].partial_cmp(&sigma[a]).unwrap().then(a.cmp(&b))
        });
        let sorted = order.iter().map(|&i| sigma[i]).collect();
        SpectralProfile { sigma, sorted }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Σ_{k>n} (σ_k*)², the certified residual second moment.
    pub fn tail_square_sum(&self, n: usize) -> f64 {
        if n >= self.sorted.len() {
            return 0.0;
        }
        self.sorted[n..].iter().map(|s| s * s).sum()
    }
}

/// Deterministic greedy choice of the `n` coordinates with the largest score.
pub fn top_indices_by(scores: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order.truncate(n);
    order.sort_unstable();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn projection_onto_diagonal() {
        let l = Subspace::from_rows(vec![vec![1.0, 1.0]], 2).unwrap();
        let d = l.distance_l2(&[1.0, 0.0]);
        assert!((d - (2.0_f64).sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dependent_rows_rejected() {
        let r = Subspace::from_rows(vec![vec![1.0, 0.0], vec![2.0, 0.0]], 2);
        assert!(r.is_err());
    }

    #[test]
    fn random_subspace_is_orthonormal() {
        let mut rng = rng_from(5);
        let l = Subspace::random(3, 8, &mut rng);
        assert!(gram_identity_error(l.basis()) < 1e-10);
        assert_eq!(l.dim(), 3);
    }

    #[test]
    fn zero_and_full() {
        let z = Subspace::zero(4);
        assert_eq!(z.dim(), 0);
        assert!((z.distance_l2(&[1.0, 2.0, 0.0, 0.0]) - 5.0_f64.sqrt()).abs() < 1e-12);
        let f = Subspace::full(4);
        assert!(f.distance_l2(&[1.0, 2.0, 0.0, 0.0]) < 1e-12);
    }

    #[test]
    fn block_diagonal_dims() {
        let p = BlockPartition::new(vec![vec![0, 1, 2], vec![3, 4]], 5).unwrap();
        let mut rng = rng_from(1);
        let l = Subspace::block_diagonal_random(&p, &[2, 1], &mut rng).unwrap();
        assert_eq!(l.dim(), 3);
        // rows in the first block have no support in the second
        for r in 0..2 {
            assert_eq!(l.basis().row(r)[3], 0.0);
            assert_eq!(l.basis().row(r)[4], 0.0);
        }
    }

    #[test]
    fn spectral_profile_sorts_stably() {
        let p = SpectralProfile::from_squares(&[0.25, 1.0, 0.25, 4.0]);
        assert_eq!(p.sorted(), &[2.0, 1.0, 0.5, 0.5]);
        assert!((p.tail_square_sum(2) - 0.5).abs() < 1e-15);
        assert_eq!(p.tail_square_sum(4), 0.0);
        assert_eq!(p.tail_square_sum(9), 0.0);
    }
}

//! Block partitions and products of octahedra.
//!
//! The body under study is ∏_s B_1^{N_s}: a block partition {Δ_s} of the
//! coordinates with a unit ℓ₁ ball in each block. Its extreme points pick one
//! signed coordinate per block, so a product with blocks of sizes N_1..N_m has
//! ∏ 2·N_s vertices.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, Rng};

/// Default limit for exhaustive vertex enumeration.
pub const DEFAULT_VERTEX_CAP: u128 = 1_000_000;

/// Disjoint index blocks covering {0, …, N−1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    dim: usize,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::input("partition needs at least one block"));
        }
        let mut seen = vec![false; dim];
        let mut count = 0usize;
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::input("empty block in partition"));
            }
            for &i in b {
                if i >= dim {
                    return Err(Error::input(format!("index {i} out of range (dim {dim})")));
                }
                if seen[i] {
                    return Err(Error::input(format!("index {i} appears in two blocks")));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != dim {
            return Err(Error::input("blocks do not cover all coordinates"));
        }
        Ok(BlockPartition { blocks, dim })
    }

    /// Single block over all of {0, …, dim−1}.
    pub fn single_block(dim: usize) -> Self {
        BlockPartition { blocks: vec![(0..dim).collect()], dim }
    }

    /// `m` contiguous blocks of equal size (dim must be divisible by m).
    pub fn equal_blocks(m: usize, dim: usize) -> Result<Self> {
        if m == 0 || dim % m != 0 {
            return Err(Error::input(format!("cannot split dim {dim} into {m} equal blocks")));
        }
        let size = dim / m;
        let blocks = (0..m)
            .map(|s| (s * size..(s + 1) * size).collect())
            .collect();
        Ok(BlockPartition { blocks, dim })
    }

    /// Dyadic level blocks of sizes 1, 2, 4, …, 2^{m−1} (total 2^m − 1).
    pub fn dyadic_levels(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::input("need at least one level"));
        }
        let mut blocks = Vec::with_capacity(m);
        let mut offset = 0usize;
        for k in 0..m {
            let size = 1usize << k;
            blocks.push((offset..offset + size).collect());
            offset += size;
        }
        Ok(BlockPartition { blocks, dim: offset })
    }

    /// Random partition into `m` nonempty contiguous chunks (test helper).
    pub fn random(m: usize, dim: usize, rng: &mut Rng) -> Self {
        assert!(m >= 1 && m <= dim);
        // choose m-1 distinct cut points
        let mut cuts: Vec<usize> = Vec::new();
        while cuts.len() < m - 1 {
            let c = rng.gen_range(1..dim);
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_unstable();
        cuts.push(dim);
        let mut blocks = Vec::with_capacity(m);
        let mut start = 0;
        for &c in &cuts {
            blocks.push((start..c).collect());
            start = c;
        }
        BlockPartition { blocks, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, s: usize) -> &[usize] {
        &self.blocks[s]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// Block index of each coordinate.
    pub fn block_of(&self) -> Vec<usize> {
        let mut owner = vec![0usize; self.dim];
        for (s, b) in self.blocks.iter().enumerate() {
            for &i in b {
                owner[i] = s;
            }
        }
        owner
    }
}

/// ∏_s radius·B_1^{N_s}: per-block ℓ₁ balls over a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct OctahedronProduct {
    partition: BlockPartition,
    radius: f64,
}

impl OctahedronProduct {
    pub fn new(partition: BlockPartition) -> Self {
        OctahedronProduct { partition, radius: 1.0 }
    }

    /// Scalar multiple c·B (the only other body shape in scope).
    pub fn with_radius(partition: BlockPartition, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::input("radius must be positive and finite"));
        }
        Ok(OctahedronProduct { partition, radius })
    }

    /// The unit cross-polytope B_1^dim.
    pub fn cross_polytope(dim: usize) -> Self {
        OctahedronProduct::new(BlockPartition::single_block(dim))
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        OctahedronProduct::with_radius(self.partition.clone(), self.radius * factor)
    }

    /// Membership: Σ_{i∈Δ_s} |x_i| ≤ radius for every block.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        self.partition.blocks().iter().all(|b| {
            b.iter().map(|&i| x[i].abs()).sum::<f64>() <= self.radius + tol
        })
    }

    pub fn vertex_count(&self) -> u128 {
        self.partition
            .blocks()
            .iter()
            .map(|b| 2u128 * b.len() as u128)
            .product()
    }

    /// Exhaustive vertex stream. Fails if the count exceeds `cap`.
    pub fn vertices(&self, cap: u128) -> Result<VertexIter<'_>> {
        let count = self.vertex_count();
        if count > cap {
            return Err(Error::CapExceeded { count, cap });
        }
        Ok(VertexIter { body: self, state: vec![0; self.partition.num_blocks()], done: false })
    }

    pub fn sample_vertex(&self, rng: &mut Rng) -> Vertex {
        let picks = self
            .partition
            .blocks()
            .iter()
            .map(|b| {
                let idx = b[rng.gen_range(0..b.len())];
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                (idx, sign * self.radius)
            })
            .collect();
        Vertex { picks }
    }

    /// `count` i.i.d. uniform vertices, deterministic in `seed`.
    pub fn sample_vertices(&self, count: usize, seed: u64) -> Vec<Vertex> {
        let mut rng = rng_from(derive_seed(seed, VERTEX_STREAM));
        (0..count).map(|_| self.sample_vertex(&mut rng)).collect()
    }

    /// E[u_i²] for a uniform random vertex u: radius²/N_s on block s.
    pub fn coordinate_second_moments(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let r2 = self.radius * self.radius;
        for b in self.partition.blocks() {
            let v = r2 / b.len() as f64;
            for &i in b {
                out[i] = v;
            }
        }
        out
    }
}

/// One extreme point: exactly one signed coordinate per block.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    /// (coordinate index, signed value), one entry per block, in block order.
    picks: Vec<(usize, f64)>,
}

impl Vertex {
    pub fn picks(&self) -> &[(usize, f64)] {
        &self.picks
    }

    pub fn support(&self) -> Vec<usize> {
        self.picks.iter().map(|(i, _)| *i).collect()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for &(i, v) in &self.picks {
            x[i] = v;
        }
        x
    }

    /// Neighbor for local ascent: move the pick of block `s` to `idx` with
    /// sign `sign` (coordinate swap within one block, or a sign flip).
    pub fn with_pick(&self, s: usize, idx: usize, value: f64) -> Vertex {
        let mut picks = self.picks.clone();
        picks[s] = (idx, value);
        Vertex { picks }
    }

    pub fn from_picks(picks: Vec<(usize, f64)>) -> Vertex {
        Vertex { picks }
    }
}

/// Iterator over all vertices in a fixed lexicographic order
/// (per block: +e_{i0}, −e_{i0}, +e_{i1}, …).
#[derive(Debug)]
pub struct VertexIter<'a> {
    body: &'a OctahedronProduct,
    state: Vec<usize>,
    done: bool,
}

impl Iterator for VertexIter<'_> {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        if self.done {
            return None;
        }
        let blocks = self.body.partition.blocks();
        let picks = self
            .state
            .iter()
            .zip(blocks)
            .map(|(&st, b)| {
                let idx = b[st / 2];
                let sign = if st % 2 == 0 { 1.0 } else { -1.0 };
                (idx, sign * self.body.radius)
            })
            .collect();
        // advance mixed-radix counter
        let mut carried = true;
        for (st, b) in self.state.iter_mut().zip(blocks) {
            if carried {
                *st += 1;
                if *st == 2 * b.len() {
                    *st = 0;
                } else {
                    carried = false;
                }
            }
        }
        if carried {
            self.done = true;
        }
        Some(Vertex { picks })
    }
}

// fixed stream tag for vertex sampling (see rng::derive_seed)
const VERTEX_STREAM: u64 = 0x5645_5254;

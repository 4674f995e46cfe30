//! Synthetic rating generator: user factors are smoothed over a random
//! friendship graph for `steps` rounds before the rating matrix is formed,
//! so multi-hop graph structure genuinely carries signal about the ratings.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::factorize::{Mode, RatingData, Split};
use crate::graph::SparseGraph;

/// How a node combines its neighbors during a smoothing round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// `u_i <- w * mean(neighbors) + (1-w) * u_i`; isolated nodes keep their
    /// embedding. Bounded for any degree; the default.
    Mean,
    /// `u_i <- w * sum(neighbors) + (1-w) * u_i`, the literal recurrence;
    /// diverges on high-degree nodes, kept for fidelity.
    Sum,
}

impl std::fmt::Display for Smoothing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Smoothing::Mean => "mean",
            Smoothing::Sum => "sum",
        })
    }
}

impl std::str::FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Smoothing::Mean),
            "sum" => Ok(Smoothing::Sum),
            other => Err(Error::InvalidParam(format!("unknown smoothing `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_users: usize,
    pub m_items: usize,
    pub rank: usize,
    /// Influence weight w of the neighborhood during smoothing.
    pub influence: f64,
    /// Smoothing rounds T.
    pub steps: usize,
    /// Edge probability p of the Erdos-Renyi friendship graph.
    pub edge_prob: f64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub smoothing: Smoothing,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 10_000,
            m_items: 2_000,
            rank: 50,
            influence: 0.6,
            steps: 3,
            edge_prob: 0.001,
            train_fraction: 0.05,
            validation_fraction: 0.0,
            test_fraction: 0.02,
            seed: 42,
            smoothing: Smoothing::Mean,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.m_items == 0 || self.rank == 0 {
            return Err(Error::InvalidParam(
                "synth: n, m, and rank must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.influence) {
            return Err(Error::InvalidParam("synth: influence must be in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::InvalidParam("synth: edge_prob must be in [0,1]".into()));
        }
        let fracs = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidParam("synth: fractions must be in [0,1]".into()));
        }
        if fracs.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::InvalidParam(
                "synth: train + validation + test fractions exceed 1".into(),
            ));
        }
        Ok(())
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Erdos-Renyi G(n, p) over unordered pairs, sampled by geometric skips so
/// the cost is proportional to the edge count, not n^2.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<SparseGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam("erdos_renyi: p must be in [0,1]".into()));
    }
    let total_pairs = n as u64 * (n as u64 - 1) / 2;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    if p > 0.0 && n >= 2 {
        if p >= 1.0 {
            for i in 0..n {
                for j in (i + 1)..n {
                    edges.push((i, j, 1.0));
                }
            }
        } else {
            let geo = rand_distr::Geometric::new(p)
                .map_err(|_| Error::InvalidParam("erdos_renyi: bad p".into()))?;
            let mut cursor: u64 = 0;
            loop {
                let skip = geo.sample(rng);
                cursor = match cursor.checked_add(skip) {
                    Some(c) => c,
                    None => break,
                };
                if cursor >= total_pairs {
                    break;
                }
                edges.push(pair_from_index(cursor, n as u64));
                cursor += 1;
            }
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// Map a linear index over the upper triangle (row-major, i < j) back to the
/// pair (i, j). Row i owns n-1-i consecutive indices starting at
/// `offset(i) = i (2n - i - 1) / 2`.
fn pair_from_index(t: u64, n: u64) -> (usize, usize, f64) {
    let offset = |i: u64| i * (2 * n - i - 1) / 2;
    let tf = t as f64;
    let nf = n as f64;
    let disc = ((2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * tf).max(0.0);
    let guess = ((2.0 * nf - 1.0 - disc.sqrt()) / 2.0).floor().max(0.0) as u64;
    let mut i = guess.min(n - 2);
    // float guard: nudge i until offset(i) <= t < offset(i+1)
    while i > 0 && offset(i) > t {
        i -= 1;
    }
    while i < n - 2 && offset(i + 1) <= t {
        i += 1;
    }
    let j = i + 1 + (t - offset(i));
    (i as usize, j as usize, 1.0)
}

/// Generate `(ratings, graph)` per the smoothed-factor recipe: standard
/// normal U and V, an Erdos-Renyi user graph, `steps` synchronous smoothing
/// rounds of U over the graph, ratings `R = U V'`, and disjoint uniform
/// train/validation/test samples of the n x m grid.
pub fn generate(cfg: &SynthConfig) -> Result<(RatingData, SparseGraph)> {
    cfg.validate()?;
    let (n, m, r) = (cfg.n_users, cfg.m_items, cfg.rank);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut rng_u = substream(cfg.seed, 1);
    let mut u: Vec<f64> = (0..n * r).map(|_| normal.sample(&mut rng_u)).collect();
    let mut rng_v = substream(cfg.seed, 2);
    let v: Vec<f64> = (0..m * r).map(|_| normal.sample(&mut rng_v)).collect();

    let mut rng_g = substream(cfg.seed, 3);
    let graph = erdos_renyi(n, cfg.edge_prob, &mut rng_g)?;

    // synchronous smoothing: round s reads only round s-1
    let w = cfg.influence;
    for _ in 0..cfg.steps {
        let mut next = vec![0.0; n * r];
        for i in 0..n {
            let row = &u[i * r..(i + 1) * r];
            let out = &mut next[i * r..(i + 1) * r];
            let neighbors = graph.neighbors(i);
            match cfg.smoothing {
                Smoothing::Mean if !neighbors.is_empty() => {
                    let inv = 1.0 / neighbors.len() as f64;
                    for &(j, _) in neighbors {
                        let nj = &u[j as usize * r..(j as usize + 1) * r];
                        for (o, x) in out.iter_mut().zip(nj) {
                            *o += x * inv;
                        }
                    }
                    for (o, x) in out.iter_mut().zip(row) {
                        *o = w * *o + (1.0 - w) * x;
                    }
                }
                Smoothing::Mean => out.copy_from_slice(row),
                Smoothing::Sum => {
                    for &(j, _) in neighbors {
                        let nj = &u[j as usize * r..(j as usize + 1) * r];
                        for (o, x) in out.iter_mut().zip(nj) {
                            *o += w * x;
                        }
                    }
                    for (o, x) in out.iter_mut().zip(row) {
                        *o += (1.0 - w) * x;
                    }
                }
            }
        }
        u = next;
    }

    // disjoint uniform cell samples
    let cells = n as u64 * m as u64;
    let k_train = (cfg.train_fraction * cells as f64).round() as u64;
    let mut k_val = (cfg.validation_fraction * cells as f64).round() as u64;
    let mut k_test = (cfg.test_fraction * cells as f64).round() as u64;
    // rounding can overshoot by a cell or two when the fractions sum to 1
    let mut excess = (k_train + k_val + k_test).saturating_sub(cells);
    let trim = excess.min(k_test);
    k_test -= trim;
    excess -= trim;
    k_val -= excess.min(k_val);
    let k_total = k_train + k_val + k_test;
    let mut rng_s = substream(cfg.seed, 4);
    let picked = sample_distinct(cells, k_total, &mut rng_s);

    let mut tagged: Vec<(u64, Split)> = picked
        .iter()
        .enumerate()
        .map(|(pos, &cell)| {
            let split = if (pos as u64) < k_train {
                Split::Train
            } else if (pos as u64) < k_train + k_val {
                Split::Validation
            } else {
                Split::Test
            };
            (cell, split)
        })
        .collect();
    tagged.sort_unstable_by_key(|&(cell, _)| cell);

    let mut data = RatingData::new(n, m, Mode::Explicit);
    for (cell, split) in tagged {
        let i = (cell / m as u64) as usize;
        let j = (cell % m as u64) as usize;
        let score: f64 = (0..r).map(|t| u[i * r + t] * v[j * r + t]).sum();
        data.push(i, j, score, split)?;
    }
    Ok((data, graph))
}

/// `k` distinct values from `0..total`: partial Fisher-Yates on small grids,
/// rejection sampling on large ones.
fn sample_distinct(total: u64, k: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    assert!(k <= total);
    if total <= 10_000_000 {
        let mut pool: Vec<u64> = (0..total).collect();
        for pos in 0..k as usize {
            let swap = rng.random_range(pos..total as usize);
            pool.swap(pos, swap);
        }
        pool.truncate(k as usize);
        pool
    } else {
        let mut seen = HashSet::with_capacity(k as usize);
        let mut out = Vec::with_capacity(k as usize);
        while (out.len() as u64) < k {
            let cell = rng.random_range(0..total);
            if seen.insert(cell) {
                out.push(cell);
            }
        }
        out
    }
}

/// Check that no cell appears in two splits and that each split's realized
/// fraction is within +/- 0.1 percentage points of the configured one.
pub fn verify_splits(data: &RatingData, cfg: &SynthConfig) -> bool {
    let mut seen = HashSet::with_capacity(data.len());
    for r in data.ratings() {
        if !seen.insert((r.user, r.item)) {
            return false;
        }
    }
    let cells = (data.n_users() * data.m_items()) as f64;
    for (split, want) in [
        (Split::Train, cfg.train_fraction),
        (Split::Validation, cfg.validation_fraction),
        (Split::Test, cfg.test_fraction),
    ] {
        let got = data.count(split) as f64 / cells;
        if (got - want).abs() > 0.001 {
            return false;
        }
    }
    true
}

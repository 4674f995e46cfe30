//! Neighborhood signature encoding: every node starts with a Bloom filter
//! containing only itself, then for `d` rounds each node unions in its
//! neighbors' previous-round filters. After round `d`, row `i` covers the
//! d-hop neighborhood of node `i` (up to the saturation threshold).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::bloom::{bits_from_hex, bits_to_hex, BloomFilter, HashFamily};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;

/// Parameters of an encoding run.
///
/// `theta` caps a row's estimated cardinality: once a row estimates past it
/// during a round, the remaining neighbors are skipped for that node in that
/// round. `+inf` disables the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnaConfig {
    pub c: usize,
    pub k: u32,
    pub depth: usize,
    pub theta: f64,
    pub master_seed: u64,
}

impl DnaConfig {
    pub fn new(c: usize, k: u32, depth: usize, master_seed: u64) -> Self {
        DnaConfig {
            c,
            k,
            depth,
            theta: f64::INFINITY,
            master_seed,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(Error::InvalidParam("dna: c must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParam("dna: k must be >= 1".into()));
        }
        if self.theta.is_nan() || self.theta <= 0.0 {
            return Err(Error::InvalidParam(
                "dna: theta must be positive or +inf".into(),
            ));
        }
        Ok(())
    }
}

/// The stacked bit rows of all node filters: an n x c binary matrix plus the
/// parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DnaMatrix {
    n: usize,
    c: usize,
    k: u32,
    depth: usize,
    theta: f64,
    master_seed: u64,
    rows: Vec<Vec<u64>>,
}

impl DnaMatrix {
    /// Assemble from raw bit rows (one `Vec<u64>` block array per node).
    /// Used by the loader and by external producers of signature files.
    pub fn from_raw_parts(
        n: usize,
        c: usize,
        k: u32,
        depth: usize,
        theta: f64,
        master_seed: u64,
        rows: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if c == 0 || k == 0 {
            return Err(Error::InvalidParam("dna: c and k must be >= 1".into()));
        }
        if rows.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "dna: {} rows for n = {n}",
                rows.len()
            )));
        }
        let blocks = c.div_ceil(64);
        if rows.iter().any(|r| r.len() != blocks) {
            return Err(Error::DimensionMismatch(
                "dna: row block length does not match c".into(),
            ));
        }
        Ok(DnaMatrix {
            n,
            c,
            k,
            depth,
            theta,
            master_seed,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn family(&self) -> HashFamily {
        HashFamily::new(self.k, self.master_seed)
    }

    pub fn row_blocks(&self, i: usize) -> &[u64] {
        &self.rows[i]
    }

    /// Indices of the set bits of row `i`, ascending.
    pub fn row_bits(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().enumerate().flat_map(|(b, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(b * 64 + bit)
                }
            })
        })
    }

    pub fn row_popcount(&self, i: usize) -> usize {
        self.rows[i].iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Total set bits.
    pub fn nnz(&self) -> usize {
        (0..self.n).map(|i| self.row_popcount(i)).sum()
    }

    /// Whether the filter of node `row` reports membership of element `x`.
    pub fn contains(&self, row: usize, x: u64) -> bool {
        let blocks = &self.rows[row];
        self.family()
            .bit_indices(x, self.c)
            .all(|idx| blocks[idx / 64] & (1u64 << (idx % 64)) != 0)
    }

    /// Number of common set bits between rows `i` and `j` (the AND popcount),
    /// a proxy for the size of the two nodes' neighborhood intersection.
    pub fn common_bits(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.n || j >= self.n {
            return Err(Error::IndexOutOfRange(format!(
                "common_bits({i}, {j}) on {} rows",
                self.n
            )));
        }
        Ok(self.rows[i]
            .iter()
            .zip(&self.rows[j])
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// Header `DNA1 n c k d theta master_seed`, then one lowercase-hex row
    /// per node.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut out = BufWriter::new(file);
        writeln!(
            out,
            "DNA1 {} {} {} {} {} {}",
            self.n, self.c, self.k, self.depth, self.theta, self.master_seed
        )
        .map_err(|e| Error::io(&pstr, e))?;
        for i in 0..self.n {
            writeln!(out, "{}", bits_to_hex(&self.rows[i], self.c))
                .map_err(|e| Error::io(&pstr, e))?;
        }
        out.flush().map_err(|e| Error::io(&pstr, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let pstr = path.as_ref().display().to_string();
        let file = File::open(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(&pstr, e))?,
            None => return Err(Error::parse(&pstr, 1, "empty file")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "DNA1" {
            return Err(Error::parse(
                &pstr,
                1,
                "header must be `DNA1 n c k d theta master_seed`",
            ));
        }
        let n: usize = fields[1].parse().map_err(|_| Error::parse(&pstr, 1, "bad n"))?;
        let c: usize = fields[2].parse().map_err(|_| Error::parse(&pstr, 1, "bad c"))?;
        let k: u32 = fields[3].parse().map_err(|_| Error::parse(&pstr, 1, "bad k"))?;
        let depth: usize = fields[4].parse().map_err(|_| Error::parse(&pstr, 1, "bad d"))?;
        let theta: f64 = fields[5]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad theta"))?;
        let master_seed: u64 = fields[6]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad master_seed"))?;
        let mut rows = Vec::with_capacity(n);
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io(&pstr, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bits = bits_from_hex(c, line)
                .map_err(|e| Error::parse(&pstr, lineno + 1, e.to_string()))?;
            rows.push(bits);
        }
        if rows.len() != n {
            return Err(Error::parse(
                &pstr,
                0,
                format!("expected {n} rows, found {}", rows.len()),
            ));
        }
        Self::from_raw_parts(n, c, k, depth, theta, master_seed, rows)
    }

    /// Triplet view `i bit_index`, one set bit per line, for external tools.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut out = BufWriter::new(file);
        for i in 0..self.n {
            for bit in self.row_bits(i) {
                writeln!(out, "{i} {bit}").map_err(|e| Error::io(&pstr, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(&pstr, e))
    }
}

/// Run the propagation encoder over `g`.
///
/// Round semantics are synchronous: generation `s` rows are computed from
/// generation `s-1` rows only, so results do not depend on node order or
/// thread count. Each round seeds row `i` with its own previous bits before
/// unioning neighbors (ascending node id); without the self-copy the row
/// would not accumulate its full d-hop neighborhood. The theta check runs
/// against the current row before each neighbor union.
pub fn encode(g: &SparseGraph, cfg: &DnaConfig) -> Result<DnaMatrix> {
    cfg.validate()?;
    let n = g.n();
    let family = HashFamily::new(cfg.k, cfg.master_seed);
    let mut current: Vec<BloomFilter> = (0..n)
        .map(|i| {
            let mut f = BloomFilter::new(cfg.c, family)?;
            f.add(i as u64);
            Ok(f)
        })
        .collect::<Result<_>>()?;

    for _round in 0..cfg.depth {
        let previous = &current;
        let next: Vec<BloomFilter> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = previous[i].clone();
                for &(j, _) in g.neighbors(i) {
                    if cfg.theta.is_finite() && row.estimate_size() > cfg.theta {
                        break;
                    }
                    row.union(&previous[j as usize])
                        .expect("rows share one family");
                }
                row
            })
            .collect();
        current = next;
    }

    let rows = current.into_iter().map(|f| f.blocks().to_vec()).collect();
    DnaMatrix::from_raw_parts(n, cfg.c, cfg.k, cfg.depth, cfg.theta, cfg.master_seed, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn path_graph(n: usize) -> SparseGraph {
        let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        SparseGraph::from_edges(n, &edges).unwrap()
    }

    fn er_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SparseGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(p) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        SparseGraph::from_edges(n, &edges).unwrap()
    }

    /// Exact d-hop neighborhoods by BFS; the membership oracle.
    fn bfs_neighborhood(g: &SparseGraph, start: usize, d: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; g.n()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut out = vec![start];
        while let Some(u) = queue.pop_front() {
            if dist[u] == d {
                continue;
            }
            for &(v, _) in g.neighbors(u) {
                let v = v as usize;
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                    out.push(v);
                }
            }
        }
        out
    }

    #[test]
    fn depth_zero_is_self_only() {
        let g = path_graph(5);
        let cfg = DnaConfig::new(64, 3, 0, 9);
        let b = encode(&g, &cfg).unwrap();
        for i in 0..5 {
            assert!(b.contains(i, i as u64));
            assert!(b.row_popcount(i) <= 3);
            // exactly the hash bits of i
            let mut expect = BloomFilter::new(64, b.family()).unwrap();
            expect.add(i as u64);
            assert_eq!(b.row_blocks(i), expect.blocks());
        }
    }

    #[test]
    fn path_one_round_covers_neighbors() {
        let g = path_graph(3);
        let b = encode(&g, &DnaConfig::new(128, 3, 1, 4)).unwrap();
        assert!(b.contains(0, 0) && b.contains(0, 1));
        assert!(b.contains(1, 0) && b.contains(1, 1) && b.contains(1, 2));
    }

    #[test]
    fn covers_bfs_neighborhood_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..10 {
            let n = rng.random_range(20..120);
            let g = er_graph(n, 0.05, &mut rng);
            let d = (trial % 4) + 1;
            let b = encode(&g, &DnaConfig::new(512, 4, d, trial as u64)).unwrap();
            for i in 0..n {
                for j in bfs_neighborhood(&g, i, d) {
                    assert!(b.contains(i, j as u64), "row {i} misses {j} at d={d}");
                }
            }
        }
    }

    #[test]
    fn depth_monotone_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = er_graph(60, 0.08, &mut rng);
        let mats: Vec<DnaMatrix> = (0..=3)
            .map(|d| encode(&g, &DnaConfig::new(256, 3, d, 7)).unwrap())
            .collect();
        for d in 0..3 {
            for i in 0..g.n() {
                for (a, b) in mats[d].row_blocks(i).iter().zip(mats[d + 1].row_blocks(i)) {
                    assert_eq!(a & !b, 0, "bit lost from d={d} to d={}", d + 1);
                }
            }
        }
    }

    #[test]
    fn shared_midpoint_after_half_the_hops() {
        // Two endpoints of a 6-edge path share the midpoint in their 3-hop
        // neighborhoods, so their rows share at least one bit after 3 rounds.
        let g = path_graph(7);
        let b = encode(&g, &DnaConfig::new(256, 4, 3, 11)).unwrap();
        assert!(b.common_bits(0, 6).unwrap() >= 1);
        // common_bits(i, i) is the row popcount
        assert_eq!(b.common_bits(2, 2).unwrap(), b.row_popcount(2));
        assert!(b.common_bits(0, 7).is_err());
    }

    #[test]
    fn theta_truncates_and_keeps_self() {
        // Star graph: the hub has many neighbors; a small theta stops the
        // hub's unions partway but every row still carries its own bits.
        let n = 40;
        let edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (0, i, 1.0)).collect();
        let g = SparseGraph::from_edges(n, &edges).unwrap();
        let unbounded = encode(&g, &DnaConfig::new(128, 2, 1, 5)).unwrap();
        let capped = encode(&g, &DnaConfig::new(128, 2, 1, 5).with_theta(4.0)).unwrap();
        assert!(capped.row_popcount(0) < unbounded.row_popcount(0));
        for i in 0..n {
            assert!(capped.contains(i, i as u64));
        }
        // truncation is monotone at the bit level too
        for i in 0..n {
            for (a, b) in capped.row_blocks(i).iter().zip(unbounded.row_blocks(i)) {
                assert_eq!(a & !b, 0);
            }
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = er_graph(80, 0.06, &mut rng);
        let cfg = DnaConfig::new(256, 4, 3, 99);
        let reference = encode(&g, &cfg).unwrap();
        for threads in [1usize, 2, 7] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let run = pool.install(|| encode(&g, &cfg).unwrap());
            assert_eq!(run, reference);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let g = path_graph(6);
        let b = encode(&g, &DnaConfig::new(100, 3, 2, 42).with_theta(7.5)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        b.save(f.path()).unwrap();
        let back = DnaMatrix::load(f.path()).unwrap();
        assert_eq!(back, b);

        let inf = encode(&g, &DnaConfig::new(100, 3, 2, 1)).unwrap();
        let f2 = tempfile::NamedTempFile::new().unwrap();
        inf.save(f2.path()).unwrap();
        let back2 = DnaMatrix::load(f2.path()).unwrap();
        assert_eq!(back2.theta(), f64::INFINITY);
        assert_eq!(back2, inf);
    }

    #[test]
    fn load_rejects_garbage() {
        use std::io::Write as _;
        let write = |content: &str| {
            let mut f = tempfile::NamedTempFile::new().unwrap();
            f.write_all(content.as_bytes()).unwrap();
            f
        };
        // empty file
        assert!(DnaMatrix::load(write("").path()).is_err());
        // wrong magic
        assert!(DnaMatrix::load(write("NOPE 1 8 1 0 inf 0\nff\n").path()).is_err());
        // row width disagrees with header c
        assert!(DnaMatrix::load(write("DNA1 1 16 1 0 inf 0\nff\n").path()).is_err());
        // corrupt hex
        assert!(DnaMatrix::load(write("DNA1 1 8 1 0 inf 0\nzz\n").path()).is_err());
        // row count mismatch
        assert!(DnaMatrix::load(write("DNA1 2 8 1 0 inf 0\nff\n").path()).is_err());
    }

    #[test]
    fn triplet_export_lists_set_bits() {
        let mut rows = vec![vec![0u64; 1]; 2];
        rows[0][0] = 0b101;
        rows[1][0] = 0b010;
        let b = DnaMatrix::from_raw_parts(2, 8, 1, 0, f64::INFINITY, 0, rows).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        b.write_triplets(f.path()).unwrap();
        let content = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(content, "0 0\n0 2\n1 1\n");
    }
}

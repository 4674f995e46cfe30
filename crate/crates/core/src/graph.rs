//! Sparse undirected weighted graphs: edge-list ingestion, Laplacians,
//! exact matrix powers with thresholding (the expensive higher-order
//! baseline), and pseudo-node augmentation with a signature matrix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::dna::DnaMatrix;
use crate::error::{Error, Result};

/// Default cap on materialized sparse entries for matrix powers. Exact
/// higher powers of real-world graphs reach billions of entries; past this
/// point the right behavior is a loud error, not swapping.
pub const DEFAULT_NNZ_CAP: usize = 200_000_000;

/// Undirected weighted graph stored symmetrically as per-node neighbor
/// lists, sorted ascending by neighbor id. No self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    n: usize,
    adj: Vec<Vec<(u32, f64)>>,
}

impl SparseGraph {
    pub fn empty(n: usize) -> Self {
        SparseGraph {
            n,
            adj: vec![Vec::new(); n],
        }
    }

    /// Build from undirected triplets. Edges are symmetrized; duplicates
    /// (either orientation) keep the maximum weight. Rejects self-loops,
    /// out-of-range ids, and non-positive weights.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange(format!(
                    "edge ({i}, {j}) exceeds node count {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidParam(format!("self-loop on node {i}")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "edge ({i}, {j}) has non-positive weight {w}"
                )));
            }
            adj[i].push((j as u32, w));
            adj[j].push((i as u32, w));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(j, _)| j);
            list.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 = kept.1.max(next.1);
                    true
                } else {
                    false
                }
            });
        }
        Ok(SparseGraph { n, adj })
    }

    /// Internal constructor for rows already sorted, deduplicated and
    /// symmetric (used by the power routine).
    fn from_sorted_adjacency(adj: Vec<Vec<(u32, f64)>>) -> Self {
        SparseGraph { n: adj.len(), adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Count of stored directed entries (twice the undirected edge count).
    pub fn nnz(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adj[i]
    }

    /// Weighted degree of node i.
    pub fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        let list = &self.adj[i];
        list.binary_search_by_key(&(j as u32), |&(t, _)| t)
            .ok()
            .map(|pos| list[pos].1)
    }

    /// All stored directed triplets `(i, j, w)` in `(i, j)` order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().map(move |&(j, w)| (i, j as usize, w)))
    }

    /// Parse a whitespace-separated edge list: one `i j [w]` per line, 0-based
    /// ids, weight defaulting to 1. Blank lines and `#` comments are skipped.
    /// When `declared_n` is given, ids must stay below it; otherwise the node
    /// count is `max id + 1`.
    pub fn load_edges(path: impl AsRef<Path>, declared_n: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&pstr, e))?;
        let mut edges = Vec::new();
        let mut max_id = 0usize;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&pstr, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(Error::parse(&pstr, lineno + 1, "expected `i j [w]`"));
            }
            let i: usize = fields[0].parse().map_err(|_| {
                Error::parse(&pstr, lineno + 1, format!("bad node id `{}`", fields[0]))
            })?;
            let j: usize = fields[1].parse().map_err(|_| {
                Error::parse(&pstr, lineno + 1, format!("bad node id `{}`", fields[1]))
            })?;
            let w: f64 = if fields.len() == 3 {
                fields[2].parse().map_err(|_| {
                    Error::parse(&pstr, lineno + 1, format!("bad weight `{}`", fields[2]))
                })?
            } else {
                1.0
            };
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::parse(
                    &pstr,
                    lineno + 1,
                    format!("non-positive weight {w}"),
                ));
            }
            if i == j {
                return Err(Error::parse(
                    &pstr,
                    lineno + 1,
                    format!("self-loop on node {i}"),
                ));
            }
            if let Some(n) = declared_n {
                if i >= n || j >= n {
                    return Err(Error::parse(
                        &pstr,
                        lineno + 1,
                        format!("node id >= declared n = {n}"),
                    ));
                }
            }
            max_id = max_id.max(i).max(j);
            edges.push((i, j, w));
        }
        let n = declared_n.unwrap_or(if edges.is_empty() { 0 } else { max_id + 1 });
        Self::from_edges(n, &edges)
    }

    /// Write all stored directed triplets `i j w`, sorted by `(i, j)`.
    pub fn save_edges(&self, path: impl AsRef<Path>) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut out = BufWriter::new(file);
        for (i, j, w) in self.triplets() {
            writeln!(out, "{i} {j} {w}").map_err(|e| Error::io(&pstr, e))?;
        }
        out.flush().map_err(|e| Error::io(&pstr, e))
    }

    /// Graph Laplacian `L = D - W` as a CSR matrix. Diagonal entries are the
    /// weighted degrees, so each row sums to zero.
    pub fn laplacian(&self) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(self.n + 1);
        let mut indices = Vec::with_capacity(self.nnz() + self.n);
        let mut values = Vec::with_capacity(self.nnz() + self.n);
        indptr.push(0);
        for i in 0..self.n {
            let mut placed_diag = false;
            let degree = self.degree(i);
            for &(j, w) in &self.adj[i] {
                if !placed_diag && (j as usize) > i {
                    indices.push(i as u32);
                    values.push(degree);
                    placed_diag = true;
                }
                indices.push(j);
                values.push(-w);
            }
            if !placed_diag {
                indices.push(i as u32);
                values.push(degree);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: self.n,
            cols: self.n,
            indptr,
            indices,
            values,
        }
    }

    /// Weighted combination of exact matrix powers `sum_i w_i * G^i`
    /// (i = 1..=weights.len()), with the diagonal removed and entries of
    /// magnitude below `threshold` dropped. `G^i` counts weighted walks of
    /// length i, so thresholding on counts is meaningful.
    ///
    /// Refuses with [`Error::NnzCap`] once the materialized intermediates
    /// exceed `nnz_cap` entries.
    pub fn power_combine(
        &self,
        weights: &[f64],
        threshold: f64,
        nnz_cap: usize,
    ) -> Result<SparseGraph> {
        if weights.is_empty() {
            return Err(Error::InvalidParam("power: need at least one weight".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParam("power: weights must be finite".into()));
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::InvalidParam("power: threshold must be >= 0".into()));
        }
        let top = match weights.iter().rposition(|&w| w != 0.0) {
            Some(idx) => idx + 1, // highest power actually needed
            None => return Ok(SparseGraph::empty(self.n)),
        };

        // Accumulated sum and current power, both as sorted row lists.
        let mut acc: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.n];
        let mut live = self.nnz();
        let mut power: Vec<Vec<(u32, f64)>> = self.adj.clone();
        for (step, &w) in weights.iter().enumerate().take(top) {
            if w != 0.0 {
                for row in 0..self.n {
                    let merged = merge_scaled(&acc[row], &power[row], w);
                    live += merged.len();
                    live -= acc[row].len();
                    acc[row] = merged;
                }
                if live > nnz_cap {
                    return Err(Error::NnzCap { cap: nnz_cap });
                }
            }
            if step + 1 < top {
                let next = self.spgemm(&power, live, nnz_cap)?;
                live -= power.iter().map(Vec::len).sum::<usize>();
                live += next.iter().map(Vec::len).sum::<usize>();
                power = next;
            }
        }

        // Zero the diagonal, threshold, and rebuild symmetrically from the
        // upper triangle so float summation order cannot break symmetry.
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for &(j, v) in &acc[i] {
                let j = j as usize;
                if j <= i || v == 0.0 || v.abs() < threshold {
                    continue;
                }
                rows[i].push((j as u32, v));
                rows[j].push((i as u32, v));
            }
        }
        for list in &mut rows {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(SparseGraph::from_sorted_adjacency(rows))
    }

    /// Row-parallel sparse product `M * G`, guarding the running entry count.
    fn spgemm(
        &self,
        left: &[Vec<(u32, f64)>],
        live_before: usize,
        nnz_cap: usize,
    ) -> Result<Vec<Vec<(u32, f64)>>> {
        let counter = AtomicUsize::new(live_before);
        let rows: Vec<Option<Vec<(u32, f64)>>> = left
            .par_iter()
            .map_init(
                || (vec![0.0f64; self.n], Vec::<u32>::new()),
                |(scratch, touched), row| {
                    if counter.load(Ordering::Relaxed) > nnz_cap {
                        return None;
                    }
                    for &(s, vs) in row {
                        for &(j, wj) in &self.adj[s as usize] {
                            let slot = &mut scratch[j as usize];
                            if *slot == 0.0 {
                                touched.push(j);
                            }
                            *slot += vs * wj;
                        }
                    }
                    touched.sort_unstable();
                    let out: Vec<(u32, f64)> = touched
                        .iter()
                        .map(|&j| {
                            let v = scratch[j as usize];
                            scratch[j as usize] = 0.0;
                            (j, v)
                        })
                        .filter(|&(_, v)| v != 0.0)
                        .collect();
                    touched.clear();
                    counter.fetch_add(out.len(), Ordering::Relaxed);
                    Some(out)
                },
            )
            .collect();
        if counter.load(Ordering::Relaxed) > nnz_cap {
            return Err(Error::NnzCap { cap: nnz_cap });
        }
        Ok(rows
            .into_iter()
            .map(|r| r.expect("rows only skipped after cap trip"))
            .collect())
    }
}

/// Compressed sparse row matrix; just what the Laplacian consumers need.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// x' M x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (i, dense_row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                dense_row[j] = v;
            }
        }
        out
    }
}

/// Merge `acc + w * add` over two id-sorted sparse rows.
fn merge_scaled(acc: &[(u32, f64)], add: &[(u32, f64)], w: f64) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(acc.len() + add.len());
    let (mut a, mut b) = (0, 0);
    while a < acc.len() && b < add.len() {
        match acc[a].0.cmp(&add[b].0) {
            std::cmp::Ordering::Less => {
                out.push(acc[a]);
                a += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push((add[b].0, w * add[b].1));
                b += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((acc[a].0, acc[a].1 + w * add[b].1));
                a += 1;
                b += 1;
            }
        }
    }
    out.extend_from_slice(&acc[a..]);
    out.extend(add[b..].iter().map(|&(j, v)| (j, w * v)));
    out
}

/// A graph over `n + c` nodes: the original `n`-node graph in the top-left
/// block, the signature matrix `B` as edges between real nodes and `c`
/// pseudo-nodes (weight 1), and no pseudo-pseudo edges.
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    combined: SparseGraph,
    n_real: usize,
    c: usize,
}

impl AugmentedGraph {
    pub fn as_graph(&self) -> &SparseGraph {
        &self.combined
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn pseudo_count(&self) -> usize {
        self.c
    }

    pub fn n_total(&self) -> usize {
        self.n_real + self.c
    }

    pub fn nnz(&self) -> usize {
        self.combined.nnz()
    }

    /// The original graph, recovered from the first `n` nodes.
    pub fn restrict_to_real(&self) -> SparseGraph {
        let adj = (0..self.n_real)
            .map(|i| {
                self.combined.adj[i]
                    .iter()
                    .copied()
                    .filter(|&(j, _)| (j as usize) < self.n_real)
                    .collect()
            })
            .collect();
        SparseGraph::from_sorted_adjacency(adj)
    }
}

/// Attach the signature matrix `b` to `g` as `c` pseudo-nodes: bit `(i, j)`
/// becomes the edge `(i, n + j)` with weight 1. The degree of pseudo-node
/// `j` is then the popcount of column `j`.
pub fn augment(g: &SparseGraph, b: &DnaMatrix) -> Result<AugmentedGraph> {
    if b.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "augment: graph has {} nodes but signature matrix has {} rows",
            g.n(),
            b.n()
        )));
    }
    let n = g.n();
    let c = b.c();
    let mut adj: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n + c);
    let mut pseudo: Vec<Vec<(u32, f64)>> = vec![Vec::new(); c];
    for i in 0..n {
        let mut list = g.adj[i].clone();
        for bit in b.row_bits(i) {
            list.push(((n + bit) as u32, 1.0));
            pseudo[bit].push((i as u32, 1.0));
        }
        adj.push(list);
    }
    adj.extend(pseudo); // pseudo rows are already ascending in i
    Ok(AugmentedGraph {
        combined: SparseGraph::from_sorted_adjacency(adj),
        n_real: n,
        c,
    })
}

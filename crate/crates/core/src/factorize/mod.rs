//! Matrix factorization solvers over rating data with graph side
//! information: graph-regularized explicit factorization, weighted implicit
//! factorization, and co-factorization of a side matrix.

mod data;
pub(crate) mod la;
mod model;
mod objective;
mod solver;

pub use data::{Mode, Rating, RatingData, Split};
pub use la::Mat;
pub use model::FactorModel;
pub use objective::{
    grad_cofactor, grad_grmf, grad_wmf, objective_cofactor, objective_grmf, objective_wmf,
};
pub use solver::{train_cofactor, train_grmf, train_wmf, FitResult, TrainConfig};

use crate::dna::DnaMatrix;
use crate::graph::SparseGraph;

/// The matrix a co-factorization fits alongside the ratings: either the user
/// graph itself (n x n) or a signature matrix (n x c, unit entries).
#[derive(Debug, Clone, Copy)]
pub enum Side<'a> {
    Graph(&'a SparseGraph),
    Dna(&'a DnaMatrix),
}

impl Side<'_> {
    pub fn rows(&self) -> usize {
        match self {
            Side::Graph(g) => g.n(),
            Side::Dna(b) => b.n(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Side::Graph(g) => g.n(),
            Side::Dna(b) => b.c(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Side::Graph(g) => g.nnz(),
            Side::Dna(b) => b.nnz(),
        }
    }

    /// Visit every stored entry `(row, col, value)`.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        match self {
            Side::Graph(g) => {
                for (i, j, w) in g.triplets() {
                    f(i, j, w);
                }
            }
            Side::Dna(b) => {
                for i in 0..b.n() {
                    for bit in b.row_bits(i) {
                        f(i, bit, 1.0);
                    }
                }
            }
        }
    }

    pub(crate) fn by_row(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.rows()];
        self.for_each_entry(|i, j, v| out[i].push((j as u32, v)));
        out
    }

    pub(crate) fn by_col(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.cols()];
        self.for_each_entry(|i, j, v| out[j].push((i as u32, v)));
        out
    }
}

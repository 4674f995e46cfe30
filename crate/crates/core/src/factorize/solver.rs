//! Alternating minimization. Each half-sweep solves exact r x r ridge
//! systems per row; rows of the graph-coupled user sweep read a snapshot of
//! the previous user factors (Jacobi), so row updates parallelize without
//! losing determinism. The snapshot sweep is non-increasing in the
//! objective for any lambda, mu >= 0 (2D - A here dominates the signless
//! Laplacian, which is positive semidefinite); the divergence guard checks
//! it at runtime anyway.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::data::{Mode, RatingData, Split};
use super::la::{add_outer, axpy, solve_spd, Mat};
use super::model::FactorModel;
use super::objective::{gram, objective_cofactor, objective_grmf, objective_wmf};
use super::Side;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;

/// Hyperparameters shared by all three trainers.
///
/// `lambda_l` is the l2 coefficient (applied as lambda_l/2 times the squared
/// Frobenius norms), `lambda_g` the graph-penalty coefficient, `rho` the
/// weight of unobserved cells in the implicit loss. `u_sweeps` is the number
/// of Jacobi passes over the user rows per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub rank: usize,
    pub lambda_l: f64,
    pub lambda_g: f64,
    pub rho: f64,
    pub epochs: usize,
    pub seed: u64,
    pub u_sweeps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rank: 10,
            lambda_l: 0.01,
            lambda_g: 0.01,
            rho: 0.01,
            epochs: 40,
            seed: 42,
            u_sweeps: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidParam("train: rank must be >= 1".into()));
        }
        if self.lambda_l < 0.0 || self.lambda_g < 0.0 {
            return Err(Error::InvalidParam(
                "train: lambda_l and lambda_g must be >= 0".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParam("train: rho must be in (0, 1]".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParam("train: epochs must be >= 1".into()));
        }
        if self.u_sweeps == 0 {
            return Err(Error::InvalidParam("train: u_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// A trained model plus the objective value recorded after every epoch.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FactorModel,
    pub objectives: Vec<f64>,
}

/// Aborts once the objective rises beyond tolerance three epochs in a row.
struct DivergenceGuard {
    prev: f64,
    strikes: usize,
}

impl DivergenceGuard {
    fn new(initial: f64) -> Self {
        DivergenceGuard {
            prev: initial,
            strikes: 0,
        }
    }

    fn check(&mut self, epoch: usize, obj: f64) -> Result<()> {
        // relative tolerance with an absolute floor for objectives that sit
        // at float-cancellation scale near zero
        let tol = 1e-9 * self.prev.abs() + 1e-12;
        if obj > self.prev + tol || !obj.is_finite() {
            self.strikes += 1;
            if self.strikes >= 3 || !obj.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    prev: self.prev,
                    curr: obj,
                });
            }
        } else {
            self.strikes = 0;
        }
        self.prev = obj;
        Ok(())
    }
}

/// N(0, 1/sqrt(rank)) entries, row-major, from a dedicated seeded stream.
fn init_mat(rows: usize, rank: usize, seed: u64) -> Mat {
    let normal = Normal::new(0.0, (rank as f64).sqrt().recip()).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * rank).map(|_| normal.sample(&mut rng)).collect();
    Mat::from_vec(rows, rank, data)
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    // distinct substreams per factor matrix keep the first n user rows
    // identical between plain and augmented runs of the same seed
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn require_train(data: &RatingData) -> Result<()> {
    if data.iter_split(Split::Train).next().is_none() {
        return Err(Error::EmptySplit("train"));
    }
    Ok(())
}

/// Per-row ridge solve: `(A + diag_boost I) x = b`. The candidate replaces
/// `row` only when it does not worsen the row subproblem
/// `q(x) = x'Ax/2 - b'x`; a jittered solve of a singular system (reachable
/// only with a zero ridge) can otherwise blow up along null directions.
#[inline]
fn solve_row(a: &mut [f64], b: &mut [f64], rank: usize, diag_boost: f64, row: &mut [f64]) {
    for d in 0..rank {
        a[d * rank + d] += diag_boost;
    }
    let a0 = a.to_vec();
    let b0 = b.to_vec();
    if !solve_spd(a, b, rank) {
        return;
    }
    let q = |x: &[f64]| -> f64 {
        let mut v = 0.0;
        for i in 0..rank {
            v += 0.5 * x[i] * crate::factorize::la::dot(&a0[i * rank..(i + 1) * rank], x)
                - b0[i] * x[i];
        }
        v
    };
    if q(b) <= q(row) {
        row.copy_from_slice(b);
    }
}

/// One Jacobi sweep over user rows for the quadratic losses. `gram_v` is the
/// rho-weighted item Gram for the implicit loss (None for explicit).
#[allow(clippy::too_many_arguments)]
fn sweep_users(
    users: &Mat,
    items: &Mat,
    by_user: &[Vec<(u32, f64)>],
    graph: Option<&SparseGraph>,
    gram_v: Option<&[f64]>,
    rho: f64,
    lambda_l: f64,
    lambda_g: f64,
) -> Mat {
    let rank = users.cols();
    let n_users = by_user.len();
    let mut next = users.clone();
    next.par_rows_mut().enumerate().for_each(|(i, row)| {
        let mut a = match gram_v {
            Some(g) if i < n_users => {
                let mut a: Vec<f64> = g.to_vec();
                for v in a.iter_mut() {
                    *v *= rho;
                }
                a
            }
            _ => vec![0.0; rank * rank],
        };
        let mut b = vec![0.0; rank];
        if i < n_users {
            let weight = if gram_v.is_some() { 1.0 - rho } else { 1.0 };
            for &(j, val) in &by_user[i] {
                let vj = items.row(j as usize);
                add_outer(&mut a, weight, vj);
                // implicit entries have val = 1; explicit use the rating
                axpy(val, vj, &mut b);
            }
        }
        let mut boost = lambda_l / 2.0;
        if let Some(g) = graph {
            boost += lambda_g * g.degree(i);
            for &(t, w) in g.neighbors(i) {
                axpy(lambda_g * w, users.row(t as usize), &mut b);
            }
        }
        solve_row(&mut a, &mut b, rank, boost, row);
    });
    next
}

/// Exact item updates (items decouple given the users).
fn sweep_items(
    users: &Mat,
    by_item: &[Vec<(u32, f64)>],
    items: &mut Mat,
    gram_u: Option<&[f64]>,
    rho: f64,
    lambda_l: f64,
) {
    let rank = users.cols();
    items.par_rows_mut().enumerate().for_each(|(j, row)| {
        let mut a = match gram_u {
            Some(g) => {
                let mut a: Vec<f64> = g.to_vec();
                for v in a.iter_mut() {
                    *v *= rho;
                }
                a
            }
            None => vec![0.0; rank * rank],
        };
        let mut b = vec![0.0; rank];
        let weight = if gram_u.is_some() { 1.0 - rho } else { 1.0 };
        for &(i, val) in &by_item[j] {
            let ui = users.row(i as usize);
            add_outer(&mut a, weight, ui);
            axpy(val, ui, &mut b);
        }
        solve_row(&mut a, &mut b, rank, lambda_l / 2.0, row);
    });
}

/// Graph-regularized factorization of explicit ratings. Pass the plain user
/// graph, an augmented graph's combined view, or `None` for unregularized
/// matrix factorization. The factor matrix covers every graph node; rows
/// past `data.n_users()` are pseudo-node embeddings that predictions ignore.
pub fn train_grmf(
    data: &RatingData,
    graph: Option<&SparseGraph>,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    require_train(data)?;
    let u_rows = graph.map_or(data.n_users(), SparseGraph::n);
    if u_rows < data.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {u_rows} nodes but data has {} users",
            data.n_users()
        )));
    }
    let mut model = FactorModel {
        users: init_mat(u_rows, cfg.rank, stream_seed(cfg.seed, 1)),
        items: init_mat(data.m_items(), cfg.rank, stream_seed(cfg.seed, 2)),
        side: None,
        n_users: data.n_users(),
        mode: data.mode(),
    };
    let by_user = data.train_by_user();
    let by_item = data.train_by_item();
    let mut guard = DivergenceGuard::new(objective_grmf(&model, data, graph, cfg)?);
    let mut objectives = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for _ in 0..cfg.u_sweeps {
            model.users = sweep_users(
                &model.users,
                &model.items,
                &by_user,
                graph,
                None,
                cfg.rho,
                cfg.lambda_l,
                cfg.lambda_g,
            );
        }
        sweep_items(&model.users, &by_item, &mut model.items, None, cfg.rho, cfg.lambda_l);
        let obj = objective_grmf(&model, data, graph, cfg)?;
        guard.check(epoch, obj)?;
        objectives.push(obj);
    }
    Ok(FitResult { model, objectives })
}

/// Weighted factorization of implicit 0/1 data: unit weight on observed
/// ones, `rho` on all other cells, handled through the Gram identity so the
/// zero set is never materialized. Graph handling as in [`train_grmf`].
pub fn train_wmf(
    data: &RatingData,
    graph: Option<&SparseGraph>,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if data.mode() != Mode::Implicit {
        return Err(Error::InvalidParam(
            "train_wmf needs implicit-mode data".into(),
        ));
    }
    // no require_train: an all-zero matrix still trains against the
    // rho-weighted zero cells (everything shrinks to the l2 optimum)
    let u_rows = graph.map_or(data.n_users(), SparseGraph::n);
    if u_rows < data.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {u_rows} nodes but data has {} users",
            data.n_users()
        )));
    }
    let mut model = FactorModel {
        users: init_mat(u_rows, cfg.rank, stream_seed(cfg.seed, 1)),
        items: init_mat(data.m_items(), cfg.rank, stream_seed(cfg.seed, 2)),
        side: None,
        n_users: data.n_users(),
        mode: data.mode(),
    };
    let by_user = data.train_by_user();
    let by_item = data.train_by_item();
    let mut guard = DivergenceGuard::new(objective_wmf(&model, data, graph, cfg)?);
    let mut objectives = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for _ in 0..cfg.u_sweeps {
            let gram_v = gram(&model.items, model.items.rows());
            model.users = sweep_users(
                &model.users,
                &model.items,
                &by_user,
                graph,
                Some(&gram_v),
                cfg.rho,
                cfg.lambda_l,
                cfg.lambda_g,
            );
        }
        let gram_u = gram(&model.users, data.n_users());
        sweep_items(
            &model.users,
            &by_item,
            &mut model.items,
            Some(&gram_u),
            cfg.rho,
            cfg.lambda_l,
        );
        let obj = objective_wmf(&model, data, graph, cfg)?;
        guard.check(epoch, obj)?;
        objectives.push(obj);
    }
    Ok(FitResult { model, objectives })
}

/// Joint factorization of the ratings and a side matrix (the user graph or
/// a signature matrix) sharing the user factors; the side matrix gets its
/// own column factors V'. All three updates are exact block minimizations.
pub fn train_cofactor(data: &RatingData, side: &Side<'_>, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_train(data)?;
    if side.rows() != data.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "side matrix has {} rows but data has {} users",
            side.rows(),
            data.n_users()
        )));
    }
    let mut model = FactorModel {
        users: init_mat(data.n_users(), cfg.rank, stream_seed(cfg.seed, 1)),
        items: init_mat(data.m_items(), cfg.rank, stream_seed(cfg.seed, 2)),
        side: Some(init_mat(side.cols(), cfg.rank, stream_seed(cfg.seed, 3))),
        n_users: data.n_users(),
        mode: data.mode(),
    };
    let by_user = data.train_by_user();
    let by_item = data.train_by_item();
    let side_by_row = side.by_row();
    let side_by_col = side.by_col();
    let rank = cfg.rank;
    let mut guard = DivergenceGuard::new(objective_cofactor(&model, data, side, cfg)?);
    let mut objectives = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        // users see both the ratings and the side entries of their row
        let vp_snapshot = model.side.take().expect("side factors present");
        let mut users = model.users.clone();
        users.par_rows_mut().enumerate().for_each(|(i, row)| {
            let mut a = vec![0.0; rank * rank];
            let mut b = vec![0.0; rank];
            for &(j, val) in &by_user[i] {
                let vj = model.items.row(j as usize);
                add_outer(&mut a, 1.0, vj);
                axpy(val, vj, &mut b);
            }
            for &(j, val) in &side_by_row[i] {
                let vpj = vp_snapshot.row(j as usize);
                add_outer(&mut a, 1.0, vpj);
                axpy(val, vpj, &mut b);
            }
            solve_row(&mut a, &mut b, rank, cfg.lambda_l / 2.0, row);
        });
        model.users = users;
        sweep_items(&model.users, &by_item, &mut model.items, None, cfg.rho, cfg.lambda_l);
        let mut vp = vp_snapshot;
        vp.par_rows_mut().enumerate().for_each(|(j, row)| {
            let mut a = vec![0.0; rank * rank];
            let mut b = vec![0.0; rank];
            for &(i, val) in &side_by_col[j] {
                let ui = model.users.row(i as usize);
                add_outer(&mut a, 1.0, ui);
                axpy(val, ui, &mut b);
            }
            solve_row(&mut a, &mut b, rank, cfg.lambda_l / 2.0, row);
        });
        model.side = Some(vp);
        let obj = objective_cofactor(&model, data, side, cfg)?;
        guard.check(epoch, obj)?;
        objectives.push(obj);
    }
    Ok(FitResult { model, objectives })
}

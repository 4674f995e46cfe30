//! Objective evaluation and analytic gradients for the three losses. The
//! gradients exist for finite-difference verification and diagnostics; the
//! solvers use closed-form row updates instead.

use super::data::{Mode, RatingData, Split};
use super::la::{add_outer, axpy, dot, Mat};
use super::model::FactorModel;
use super::solver::TrainConfig;
use super::Side;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;

fn check_dims(
    model: &FactorModel,
    data: &RatingData,
    graph: Option<&SparseGraph>,
) -> Result<()> {
    let want_u = graph.map_or(data.n_users(), SparseGraph::n);
    if model.users.rows() != want_u {
        return Err(Error::DimensionMismatch(format!(
            "user factors have {} rows, want {want_u}",
            model.users.rows()
        )));
    }
    if want_u < data.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {want_u} nodes but data has {} users",
            data.n_users()
        )));
    }
    if model.items.rows() != data.m_items() {
        return Err(Error::DimensionMismatch(format!(
            "item factors have {} rows, want {}",
            model.items.rows(),
            data.m_items()
        )));
    }
    Ok(())
}

/// Laplacian quadratic penalty `sum over edges w * ||u_i - u_j||^2`,
/// equal to tr(U' Lap(G) U).
fn graph_penalty(users: &Mat, graph: &SparseGraph) -> f64 {
    let mut total = 0.0;
    for (i, j, w) in graph.triplets() {
        if j <= i {
            continue; // each undirected edge once
        }
        let (ui, uj) = (users.row(i), users.row(j));
        let dist: f64 = ui
            .iter()
            .zip(uj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += w * dist;
    }
    total
}

/// Squared error over the train split plus `lambda_l/2` Frobenius penalties
/// plus `lambda_g` times the Laplacian penalty.
pub fn objective_grmf(
    model: &FactorModel,
    data: &RatingData,
    graph: Option<&SparseGraph>,
    cfg: &TrainConfig,
) -> Result<f64> {
    check_dims(model, data, graph)?;
    let mut loss = 0.0;
    for r in data.iter_split(Split::Train) {
        let e = r.value - model.score(r.user as usize, r.item as usize);
        loss += e * e;
    }
    loss += cfg.lambda_l / 2.0 * (model.users.frob_sq() + model.items.frob_sq());
    if let Some(g) = graph {
        loss += cfg.lambda_g * graph_penalty(&model.users, g);
    }
    Ok(loss)
}

pub fn grad_grmf(
    model: &FactorModel,
    data: &RatingData,
    graph: Option<&SparseGraph>,
    cfg: &TrainConfig,
) -> Result<(Mat, Mat)> {
    check_dims(model, data, graph)?;
    let r = model.rank();
    let mut gu = Mat::zeros(model.users.rows(), r);
    let mut gv = Mat::zeros(model.items.rows(), r);
    for rating in data.iter_split(Split::Train) {
        let (i, j) = (rating.user as usize, rating.item as usize);
        let e = rating.value - model.score(i, j);
        axpy(-2.0 * e, model.items.row(j), gu.row_mut(i));
        axpy(-2.0 * e, model.users.row(i), gv.row_mut(j));
    }
    add_l2(&mut gu, &model.users, cfg.lambda_l);
    add_l2(&mut gv, &model.items, cfg.lambda_l);
    if let Some(g) = graph {
        add_laplacian_grad(&mut gu, &model.users, g, cfg.lambda_g);
    }
    Ok((gu, gv))
}

/// Weighted implicit loss: unit weight on observed train ones, weight `rho`
/// on every other cell of the n x m grid, plus the GRMF regularizers. The
/// all-cells term is evaluated through the item Gram matrix, never by
/// materializing the zeros.
pub fn objective_wmf(
    model: &FactorModel,
    data: &RatingData,
    graph: Option<&SparseGraph>,
    cfg: &TrainConfig,
) -> Result<f64> {
    if data.mode() != Mode::Implicit {
        return Err(Error::InvalidParam(
            "weighted implicit loss needs implicit-mode data".into(),
        ));
    }
    check_dims(model, data, graph)?;
    let gram_v = gram(&model.items, model.items.rows());
    let r = model.rank();
    let mut loss = 0.0;
    // rho * sum over ALL cells of (u v)^2  ==  rho * sum_i u_i' G_V u_i
    for i in 0..data.n_users() {
        let ui = model.users.row(i);
        let mut quad = 0.0;
        for a in 0..r {
            quad += ui[a] * dot(&gram_v[a * r..(a + 1) * r], ui);
        }
        loss += cfg.rho * quad;
    }
    // observed ones: upgrade the weight from rho to 1 and add the -2uv + 1
    for rating in data.iter_split(Split::Train) {
        let s = model.score(rating.user as usize, rating.item as usize);
        let e = 1.0 - s;
        loss += e * e - cfg.rho * s * s;
    }
    loss += cfg.lambda_l / 2.0 * (model.users.frob_sq() + model.items.frob_sq());
    if let Some(g) = graph {
        loss += cfg.lambda_g * graph_penalty(&model.users, g);
    }
    Ok(loss)
}

pub fn grad_wmf(
    model: &FactorModel,
    data: &RatingData,
    graph: Option<&SparseGraph>,
    cfg: &TrainConfig,
) -> Result<(Mat, Mat)> {
    if data.mode() != Mode::Implicit {
        return Err(Error::InvalidParam(
            "weighted implicit loss needs implicit-mode data".into(),
        ));
    }
    check_dims(model, data, graph)?;
    let r = model.rank();
    let mut gu = Mat::zeros(model.users.rows(), r);
    let mut gv = Mat::zeros(model.items.rows(), r);

    let gram_v = gram(&model.items, model.items.rows());
    let gram_u = gram(&model.users, data.n_users());
    for i in 0..data.n_users() {
        let ui = model.users.row(i);
        let gi = gu.row_mut(i);
        for a in 0..r {
            gi[a] += 2.0 * cfg.rho * dot(&gram_v[a * r..(a + 1) * r], ui);
        }
    }
    for j in 0..data.m_items() {
        let vj = model.items.row(j);
        let gj = gv.row_mut(j);
        for a in 0..r {
            gj[a] += 2.0 * cfg.rho * dot(&gram_u[a * r..(a + 1) * r], vj);
        }
    }
    for rating in data.iter_split(Split::Train) {
        let (i, j) = (rating.user as usize, rating.item as usize);
        let s = model.score(i, j);
        // d/ds of [(1-s)^2 - rho s^2] = -2(1-s) - 2 rho s
        let dls = -2.0 * (1.0 - s) - 2.0 * cfg.rho * s;
        axpy(dls, model.items.row(j), gu.row_mut(i));
        axpy(dls, model.users.row(i), gv.row_mut(j));
    }
    add_l2(&mut gu, &model.users, cfg.lambda_l);
    add_l2(&mut gv, &model.items, cfg.lambda_l);
    if let Some(g) = graph {
        add_laplacian_grad(&mut gu, &model.users, g, cfg.lambda_g);
    }
    Ok((gu, gv))
}

/// Rating loss plus a second factorization of the side matrix sharing the
/// user factors: `sum over side entries (S_ij - u_i' v'_j)^2`, with the l2
/// penalty also covering V'. No Laplacian term.
pub fn objective_cofactor(
    model: &FactorModel,
    data: &RatingData,
    side: &Side<'_>,
    cfg: &TrainConfig,
) -> Result<f64> {
    let vp = cofactor_dims(model, data, side)?;
    let mut loss = 0.0;
    for r in data.iter_split(Split::Train) {
        let e = r.value - model.score(r.user as usize, r.item as usize);
        loss += e * e;
    }
    side.for_each_entry(|i, j, s| {
        let e = s - dot(model.users.row(i), vp.row(j));
        loss += e * e;
    });
    loss += cfg.lambda_l / 2.0
        * (model.users.frob_sq() + model.items.frob_sq() + vp.frob_sq());
    Ok(loss)
}

pub fn grad_cofactor(
    model: &FactorModel,
    data: &RatingData,
    side: &Side<'_>,
    cfg: &TrainConfig,
) -> Result<(Mat, Mat, Mat)> {
    let vp = cofactor_dims(model, data, side)?;
    let r = model.rank();
    let mut gu = Mat::zeros(model.users.rows(), r);
    let mut gv = Mat::zeros(model.items.rows(), r);
    let mut gvp = Mat::zeros(vp.rows(), r);
    for rating in data.iter_split(Split::Train) {
        let (i, j) = (rating.user as usize, rating.item as usize);
        let e = rating.value - model.score(i, j);
        axpy(-2.0 * e, model.items.row(j), gu.row_mut(i));
        axpy(-2.0 * e, model.users.row(i), gv.row_mut(j));
    }
    side.for_each_entry(|i, j, s| {
        let e = s - dot(model.users.row(i), vp.row(j));
        axpy(-2.0 * e, vp.row(j), gu.row_mut(i));
        axpy(-2.0 * e, model.users.row(i), gvp.row_mut(j));
    });
    add_l2(&mut gu, &model.users, cfg.lambda_l);
    add_l2(&mut gv, &model.items, cfg.lambda_l);
    add_l2(&mut gvp, vp, cfg.lambda_l);
    Ok((gu, gv, gvp))
}

fn cofactor_dims<'m>(
    model: &'m FactorModel,
    data: &RatingData,
    side: &Side<'_>,
) -> Result<&'m Mat> {
    check_dims(model, data, None)?;
    if side.rows() != data.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "side matrix has {} rows but data has {} users",
            side.rows(),
            data.n_users()
        )));
    }
    let vp = model
        .side
        .as_ref()
        .ok_or_else(|| Error::DimensionMismatch("model has no side factors".into()))?;
    if vp.rows() != side.cols() {
        return Err(Error::DimensionMismatch(format!(
            "side factors have {} rows but side matrix has {} columns",
            vp.rows(),
            side.cols()
        )));
    }
    Ok(vp)
}

fn add_l2(grad: &mut Mat, mat: &Mat, lambda: f64) {
    for (g, m) in grad.data_mut().iter_mut().zip(mat.data()) {
        *g += lambda * m;
    }
}

/// `grad += 2 mu (Lap U)`, accumulated edge-wise.
fn add_laplacian_grad(grad: &mut Mat, users: &Mat, graph: &SparseGraph, mu: f64) {
    for (i, j, w) in graph.triplets() {
        if j <= i {
            continue;
        }
        let coeff = 2.0 * mu * w;
        let diff: Vec<f64> = users
            .row(i)
            .iter()
            .zip(users.row(j))
            .map(|(a, b)| a - b)
            .collect();
        axpy(coeff, &diff, grad.row_mut(i));
        axpy(-coeff, &diff, grad.row_mut(j));
    }
}

/// Gram matrix `sum of row outer products` over the first `rows` rows,
/// computed sequentially so the result never depends on thread count.
pub(super) fn gram(mat: &Mat, rows: usize) -> Vec<f64> {
    let r = mat.cols();
    let mut out = vec![0.0; r * r];
    for i in 0..rows {
        add_outer(&mut out, 1.0, mat.row(i));
    }
    out
}

//! Evaluation: RMSE, relative graph gain, and per-user ranking metrics
//! (MAP, half-life utility, precision@k, NDCG@k) for implicit feedback.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorize::{FactorModel, Mode, RatingData, Split};

/// Root mean squared error of the model over one split.
pub fn rmse(model: &FactorModel, data: &RatingData, split: Split) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in data.iter_split(split) {
        let e = r.value - model.predict(r.user as usize, r.item as usize)?;
        sum += e * e;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySplit(split.name()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Relative graph gain of method X over the first-order-graph baseline, in
/// percent: `((rmse_none - rmse_x) / (rmse_none - rmse_g) - 1) * 100`.
/// Only defined when the first-order graph actually improves on no graph.
pub fn rgg(rmse_no_graph: f64, rmse_with_g: f64, rmse_with_x: f64) -> Result<f64> {
    let denom = rmse_no_graph - rmse_with_g;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "relative graph gain needs rmse_no_graph > rmse_with_g (got {rmse_no_graph} vs {rmse_with_g})"
        )));
    }
    Ok(((rmse_no_graph - rmse_with_x) / denom - 1.0) * 100.0)
}

/// Half-life utility parameters: `neutral` is subtracted from the relevance
/// before clamping at zero, and `half_life` is the list position at which
/// the positional discount halves.
#[derive(Debug, Clone, Copy)]
pub struct HluParams {
    pub neutral: f64,
    pub half_life: f64,
}

impl Default for HluParams {
    fn default() -> Self {
        // 0/1 relevance with a half-life of 5 positions
        HluParams {
            neutral: 0.0,
            half_life: 5.0,
        }
    }
}

/// Metric values plus the per-user vectors they were averaged from.
#[derive(Debug, Clone)]
pub struct EvalReport {
    entries: Vec<(String, f64)>,
    per_user: Vec<(String, Vec<f64>)>,
    pub evaluated_users: usize,
    pub skipped_users: usize,
}

impl EvalReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn per_user(&self, name: &str) -> Option<&[f64]> {
        self.per_user
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Aligned table with both the raw fraction and the percent view.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10} {:>12} {:>12}\n", "metric", "value", "percent"));
        for (name, value) in &self.entries {
            out.push_str(&format!("{name:<10} {value:>12.6} {:>12.4}\n", value * 100.0));
        }
        out.push_str(&format!(
            "evaluated users: {}  skipped (no test items): {}\n",
            self.evaluated_users, self.skipped_users
        ));
        out
    }

    /// Machine-readable `metric=value` lines, lowercase names.
    pub fn render_machine(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.entries {
            out.push_str(&format!("{}={}\n", name.to_lowercase(), value));
        }
        out.push_str(&format!("evaluated_users={}\n", self.evaluated_users));
        out.push_str(&format!("skipped_users={}\n", self.skipped_users));
        out
    }
}

struct UserMetrics {
    precision: Vec<f64>,
    ndcg: Vec<f64>,
    ap: f64,
    hlu: f64,
}

/// Rank every candidate item (training items excluded) for each user and
/// average P@k / NDCG@k (binary gains, log2 discounts), MAP, and HLU over
/// users that have at least one test item; users without test items are
/// skipped and counted.
pub fn ranking_metrics(
    model: &FactorModel,
    data: &RatingData,
    ks: &[usize],
    hlu: HluParams,
) -> Result<EvalReport> {
    if data.mode() != Mode::Implicit {
        return Err(Error::InvalidParam(
            "ranking metrics need implicit-mode data".into(),
        ));
    }
    if ks.contains(&0) {
        return Err(Error::InvalidParam("ranking metrics: k must be >= 1".into()));
    }
    if hlu.half_life.is_nan() || hlu.half_life <= 1.0 {
        return Err(Error::InvalidParam(
            "ranking metrics: half_life must be > 1".into(),
        ));
    }
    if model.n_users < data.n_users() || model.items.rows() != data.m_items() {
        return Err(Error::DimensionMismatch(format!(
            "model covers {} users x {} items, data is {} x {}",
            model.n_users,
            model.items.rows(),
            data.n_users(),
            data.m_items()
        )));
    }
    let n = data.n_users();
    let mut train_items: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut test_items: Vec<HashSet<u32>> = vec![HashSet::new(); n];
    for r in data.ratings() {
        match r.split {
            Split::Train => train_items[r.user as usize].push(r.item),
            Split::Test => {
                test_items[r.user as usize].insert(r.item);
            }
            Split::Validation => {}
        }
    }
    for items in &mut train_items {
        items.sort_unstable();
    }

    let per_user: Vec<Option<UserMetrics>> = (0..n)
        .into_par_iter()
        .map(|u| {
            if test_items[u].is_empty() {
                return None;
            }
            let ranked = model
                .top_k(u, data.m_items(), &train_items[u])
                .expect("user in range");
            Some(user_metrics(&ranked, &test_items[u], ks, hlu))
        })
        .collect();

    let evaluated: Vec<&UserMetrics> = per_user.iter().flatten().collect();
    let skipped = n - evaluated.len();
    if evaluated.is_empty() {
        return Err(Error::EmptySplit("test"));
    }

    let collect = |f: &dyn Fn(&UserMetrics) -> f64| -> Vec<f64> {
        evaluated.iter().map(|m| f(m)).collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let mut entries = Vec::new();
    let mut vectors = Vec::new();
    let ap = collect(&|m| m.ap);
    entries.push(("MAP".to_string(), mean(&ap)));
    vectors.push(("MAP".to_string(), ap));
    let hlu_v = collect(&|m| m.hlu);
    entries.push(("HLU".to_string(), mean(&hlu_v)));
    vectors.push(("HLU".to_string(), hlu_v));
    for (pos, &k) in ks.iter().enumerate() {
        let v = collect(&|m| m.precision[pos]);
        entries.push((format!("P@{k}"), mean(&v)));
        vectors.push((format!("P@{k}"), v));
    }
    for (pos, &k) in ks.iter().enumerate() {
        let v = collect(&|m| m.ndcg[pos]);
        entries.push((format!("NDCG@{k}"), mean(&v)));
        vectors.push((format!("NDCG@{k}"), v));
    }
    Ok(EvalReport {
        entries,
        per_user: vectors,
        evaluated_users: evaluated.len(),
        skipped_users: skipped,
    })
}

fn user_metrics(
    ranked: &[(u32, f64)],
    relevant: &HashSet<u32>,
    ks: &[usize],
    hlu: HluParams,
) -> UserMetrics {
    let rel: Vec<bool> = ranked.iter().map(|(item, _)| relevant.contains(item)).collect();
    let total_rel = rel.iter().filter(|&&r| r).count();

    let precision = ks
        .iter()
        .map(|&k| {
            let hits = rel.iter().take(k).filter(|&&r| r).count();
            hits as f64 / k as f64
        })
        .collect();

    let discount = |pos: usize| 1.0 / ((pos as f64 + 2.0).log2());
    let ndcg = ks
        .iter()
        .map(|&k| {
            let dcg: f64 = rel
                .iter()
                .take(k)
                .enumerate()
                .filter(|(_, &r)| r)
                .map(|(pos, _)| discount(pos))
                .sum();
            let ideal: f64 = (0..total_rel.min(k)).map(discount).sum();
            if ideal == 0.0 {
                0.0
            } else {
                dcg / ideal
            }
        })
        .collect();

    // average precision over all relevant positions in the full ranking
    let mut hits = 0usize;
    let mut ap_sum = 0.0;
    for (pos, &r) in rel.iter().enumerate() {
        if r {
            hits += 1;
            ap_sum += hits as f64 / (pos + 1) as f64;
        }
    }
    let ap = if total_rel == 0 {
        0.0
    } else {
        ap_sum / total_rel as f64
    };

    // half-life utility: position-discounted above-neutral relevance over
    // the full list, the discount halving every `half_life - 1` positions
    let hlu_value: f64 = rel
        .iter()
        .enumerate()
        .map(|(pos, &r)| {
            let gain = (if r { 1.0 } else { 0.0 }) - hlu.neutral;
            gain.max(0.0) / 2f64.powf(pos as f64 / (hlu.half_life - 1.0))
        })
        .sum();

    UserMetrics {
        precision,
        ndcg,
        ap,
        hlu: hlu_value,
    }
}

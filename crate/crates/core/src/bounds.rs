//! Monte-Carlo verification of the closed-form envelopes on Q, the common
//! 1-bit count between two filters built on overlapping sets.
//!
//! With set sizes a1 = |N(x)\N(y)|, a2 = |N(y)\N(x)|, a3 = |N(x) n N(y)|,
//! the expected Q is bracketed by
//!
//!   gamma0 = c * (1 - exp(-k * a3 / c))
//!   gamma1 = c * (1 - exp(-k^2 (a1+a2)^2 / (4 c^2) - k * a3 / (c-1)))
//!
//! and the negative association of filter bits gives Chernoff-Hoeffding
//! tails on Q. The harness draws fresh hash positions per element per trial
//! (the independence the analysis assumes; the production encoder shares one
//! family across nodes — that gap is measured, not hidden).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// One grid point of the overlap experiment.
#[derive(Debug, Clone, Copy)]
pub struct OverlapExperiment {
    pub c: usize,
    pub k: u32,
    /// |N(x) \ N(y)|
    pub only_x: usize,
    /// |N(y) \ N(x)|
    pub only_y: usize,
    /// |N(x) n N(y)|
    pub inter: usize,
    pub trials: usize,
    pub seed: u64,
}

impl OverlapExperiment {
    pub fn symdiff(&self) -> usize {
        self.only_x + self.only_y
    }
}

/// Closed-form envelope `(gamma0, gamma1)` for the expected common-bit count.
/// Requires `c >= 2` (the upper envelope divides by `c - 1`).
pub fn gamma_bounds(c: usize, k: u32, inter: usize, symdiff: usize) -> Result<(f64, f64)> {
    if c < 2 {
        return Err(Error::InvalidParam("gamma_bounds: c must be >= 2".into()));
    }
    let cf = c as f64;
    let kf = k as f64;
    let lower = cf * (1.0 - (-kf * inter as f64 / cf).exp());
    let upper = cf
        * (1.0
            - (-kf * kf * (symdiff as f64) * (symdiff as f64) / (4.0 * cf * cf)
                - kf * inter as f64 / (cf - 1.0))
                .exp());
    Ok((lower, upper))
}

/// Chernoff-Hoeffding tail factors at mean proxy `m`:
/// upper tail `P{Q >= (1+d) m} <= (e^d / (1+d)^(1+d))^m`.
pub fn upper_tail_bound(m: f64, delta: f64) -> f64 {
    (delta - (1.0 + delta) * (1.0 + delta).ln()).exp().powf(m)
}

/// Lower tail `P{Q <= (1-d) m} <= exp(-d^2 m / 3)`.
pub fn lower_tail_bound(m: f64, delta: f64) -> f64 {
    (-delta * delta * m / 3.0).exp()
}

/// Empirical distribution of Q over the experiment's trials, kept as an
/// exact histogram so means and tail frequencies are reproducible bit-for-bit
/// regardless of thread count.
#[derive(Debug, Clone)]
pub struct QSummary {
    pub trials: usize,
    counts: Vec<u64>, // counts[q] = number of trials with Q == q
    sum: u64,
    sum_sq: u64,
}

impl QSummary {
    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.trials as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.sum_sq as f64 / self.trials as f64 - m * m
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        (self.variance().max(0.0) / self.trials as f64).sqrt()
    }

    /// Fraction of trials with `Q <= x`.
    pub fn freq_le(&self, x: f64) -> f64 {
        let hits: u64 = self
            .counts
            .iter()
            .enumerate()
            .take_while(|(q, _)| (*q as f64) <= x)
            .map(|(_, &cnt)| cnt)
            .sum();
        hits as f64 / self.trials as f64
    }

    /// Fraction of trials with `Q >= x`.
    pub fn freq_ge(&self, x: f64) -> f64 {
        let hits: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(q, _)| (*q as f64) >= x)
            .map(|(_, &cnt)| cnt)
            .sum();
        hits as f64 / self.trials as f64
    }

    pub fn histogram(&self) -> &[u64] {
        &self.counts
    }

    fn merge(mut self, other: QSummary) -> QSummary {
        for (slot, cnt) in self.counts.iter_mut().zip(&other.counts) {
            *slot += cnt;
        }
        self.trials += other.trials;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    fn empty(c: usize) -> QSummary {
        QSummary {
            trials: 0,
            counts: vec![0; c + 1],
            sum: 0,
            sum_sq: 0,
        }
    }

    fn record(&mut self, q: usize) {
        self.counts[q] += 1;
        self.trials += 1;
        self.sum += q as u64;
        self.sum_sq += (q as u64) * (q as u64);
    }
}

/// Per trial: draw k uniform bit positions for every element, build the two
/// bit arrays (shared elements reuse the same draws in both), and record the
/// AND popcount.
pub fn empirical_q(exp: &OverlapExperiment) -> Result<QSummary> {
    if exp.c < 2 {
        return Err(Error::InvalidParam("empirical_q: c must be >= 2".into()));
    }
    if exp.trials == 0 {
        return Err(Error::InvalidParam(
            "empirical_q: trials must be >= 1".into(),
        ));
    }
    let blocks = exp.c.div_ceil(64);
    let summary = (0..exp.trials)
        .into_par_iter()
        .fold(
            || QSummary::empty(exp.c),
            |mut acc, trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix(exp.seed ^ trial as u64));
                let mut bx = vec![0u64; blocks];
                let mut by = vec![0u64; blocks];
                let set_bits = |target: &mut [u64], rng: &mut ChaCha8Rng| {
                    for _ in 0..exp.k {
                        let idx = rng.random_range(0..exp.c);
                        target[idx / 64] |= 1u64 << (idx % 64);
                    }
                };
                for _ in 0..exp.only_x {
                    set_bits(&mut bx, &mut rng);
                }
                for _ in 0..exp.only_y {
                    set_bits(&mut by, &mut rng);
                }
                let mut shared = vec![0u64; blocks];
                for _ in 0..exp.inter {
                    // the shared element hashes identically in both filters
                    shared.fill(0);
                    set_bits(&mut shared, &mut rng);
                    for ((x, y), s) in bx.iter_mut().zip(&mut by).zip(&shared) {
                        *x |= s;
                        *y |= s;
                    }
                }
                let q: usize = bx
                    .iter()
                    .zip(&by)
                    .map(|(a, b)| (a & b).count_ones() as usize)
                    .sum();
                acc.record(q);
                acc
            },
        )
        .reduce(|| QSummary::empty(exp.c), QSummary::merge);
    Ok(summary)
}

/// Pairwise bit-covariance scan of a single filter's bits.
#[derive(Debug, Clone)]
pub struct CovarianceReport {
    pub c: usize,
    pub trials: usize,
    pub pairs: usize,
    /// Largest pairwise covariance and the standard error of that estimate.
    pub max_cov: f64,
    pub max_cov_std_err: f64,
    pub min_cov: f64,
}

/// Estimate all pairwise covariances of the bits of a filter built on
/// `set_size` elements, fresh hash draws per trial per element. Negative
/// association implies every pairwise covariance is non-positive.
pub fn na_sanity(
    c: usize,
    k: u32,
    set_size: usize,
    trials: usize,
    seed: u64,
) -> Result<CovarianceReport> {
    if c < 2 {
        return Err(Error::InvalidParam("na_sanity: c must be >= 2".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParam("na_sanity: trials must be >= 1".into()));
    }
    let blocks = c.div_ceil(64);
    let tri = c * (c - 1) / 2;
    // counts of single bits and of upper-triangle pairs, merged exactly
    let (singles, pairs) = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; c], vec![0u64; tri]),
            |(mut singles, mut pairs), trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ trial as u64));
                let mut bits = vec![0u64; blocks];
                for _ in 0..set_size {
                    for _ in 0..k {
                        let idx = rng.random_range(0..c);
                        bits[idx / 64] |= 1u64 << (idx % 64);
                    }
                }
                let set: Vec<usize> = (0..c)
                    .filter(|&i| bits[i / 64] & (1u64 << (i % 64)) != 0)
                    .collect();
                for (pos, &i) in set.iter().enumerate() {
                    singles[i] += 1;
                    for &j in &set[pos + 1..] {
                        pairs[pair_index(i, j, c)] += 1;
                    }
                }
                (singles, pairs)
            },
        )
        .reduce(
            || (vec![0u64; c], vec![0u64; tri]),
            |(mut s1, mut p1), (s2, p2)| {
                for (a, b) in s1.iter_mut().zip(&s2) {
                    *a += b;
                }
                for (a, b) in p1.iter_mut().zip(&p2) {
                    *a += b;
                }
                (s1, p1)
            },
        );

    let t = trials as f64;
    let mut max_cov = f64::NEG_INFINITY;
    let mut max_se = 0.0;
    let mut min_cov = f64::INFINITY;
    for i in 0..c {
        let mi = singles[i] as f64 / t;
        for j in (i + 1)..c {
            let mj = singles[j] as f64 / t;
            let mij = pairs[pair_index(i, j, c)] as f64 / t;
            let cov = mij - mi * mj;
            // SE of the covariance estimate from the variance of the
            // per-trial product statistic, via the four cell frequencies.
            let n11 = mij;
            let n10 = mi - mij;
            let n01 = mj - mij;
            let n00 = 1.0 - mi - mj + mij;
            let z11 = (1.0 - mi) * (1.0 - mj);
            let z10 = (1.0 - mi) * (0.0 - mj);
            let z01 = (0.0 - mi) * (1.0 - mj);
            let z00 = mi * mj;
            let mean_z = n11 * z11 + n10 * z10 + n01 * z01 + n00 * z00;
            let var_z = n11 * (z11 - mean_z).powi(2)
                + n10 * (z10 - mean_z).powi(2)
                + n01 * (z01 - mean_z).powi(2)
                + n00 * (z00 - mean_z).powi(2);
            let se = (var_z.max(0.0) / t).sqrt();
            if cov > max_cov {
                max_cov = cov;
                max_se = se;
            }
            min_cov = min_cov.min(cov);
        }
    }
    Ok(CovarianceReport {
        c,
        trials,
        pairs: tri,
        max_cov,
        max_cov_std_err: max_se,
        min_cov,
    })
}

fn pair_index(i: usize, j: usize, c: usize) -> usize {
    // upper-triangle (i < j) linearization
    i * c - i * (i + 1) / 2 + (j - i - 1)
}

/// One evaluated grid point of the verification table.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub c: usize,
    pub k: u32,
    pub inter: usize,
    pub symdiff: usize,
    pub gamma0: f64,
    pub mean_q: f64,
    pub gamma1: f64,
    pub std_err: f64,
    /// Observed `P{Q <= (1-delta) gamma0}` and its closed-form bound.
    pub lower_freq: f64,
    pub lower_bound: f64,
    /// Observed `P{Q >= (1+delta) gamma1}` and its closed-form bound.
    pub upper_freq: f64,
    pub upper_bound: f64,
}

pub const TAIL_DELTA: f64 = 0.3;

/// Default verification grid: for every (c, k), three overlap profiles with
/// `k * (inter + symdiff) <= c/2` so the filters stay clear of saturation.
pub fn default_grid() -> Vec<(usize, u32, usize, usize)> {
    let mut out = Vec::new();
    for &c in &[256usize, 1024, 4096] {
        for &k in &[2u32, 4, 7] {
            let base = c / (4 * k as usize);
            out.push((c, k, base, base)); // both tails populated
            out.push((c, k, base, 0)); // pure intersection
            out.push((c, k, 0, base)); // pure symmetric difference
        }
    }
    out
}

/// Evaluate each grid point with `trials` Monte-Carlo trials.
pub fn evaluate_grid(
    grid: &[(usize, u32, usize, usize)],
    trials: usize,
    seed: u64,
) -> Result<Vec<GridRow>> {
    grid.iter()
        .enumerate()
        .map(|(idx, &(c, k, inter, symdiff))| {
            let (gamma0, gamma1) = gamma_bounds(c, k, inter, symdiff)?;
            let exp = OverlapExperiment {
                c,
                k,
                only_x: symdiff / 2,
                only_y: symdiff - symdiff / 2,
                inter,
                trials,
                seed: seed.wrapping_add(idx as u64),
            };
            let q = empirical_q(&exp)?;
            Ok(GridRow {
                c,
                k,
                inter,
                symdiff,
                gamma0,
                mean_q: q.mean(),
                gamma1,
                std_err: q.std_err(),
                lower_freq: q.freq_le((1.0 - TAIL_DELTA) * gamma0),
                lower_bound: lower_tail_bound(gamma0, TAIL_DELTA),
                upper_freq: q.freq_ge((1.0 + TAIL_DELTA) * gamma1),
                upper_bound: upper_tail_bound(gamma1, TAIL_DELTA),
            })
        })
        .collect()
}

/// Plain-text table, one row per grid point.
pub fn render_report(rows: &[GridRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>5} {:>2} {:>6} {:>7} {:>10} {:>10} {:>10} {:>8} {:>9} {:>9} {:>9} {:>9}\n",
        "c",
        "k",
        "inter",
        "symdiff",
        "gamma0",
        "meanQ",
        "gamma1",
        "se",
        "p_low",
        "bnd_low",
        "p_up",
        "bnd_up"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:>5} {:>2} {:>6} {:>7} {:>10.4} {:>10.4} {:>10.4} {:>8.4} {:>9.5} {:>9.5} {:>9.5} {:>9.5}\n",
            r.c,
            r.k,
            r.inter,
            r.symdiff,
            r.gamma0,
            r.mean_q,
            r.gamma1,
            r.std_err,
            r.lower_freq,
            r.lower_bound,
            r.upper_freq,
            r.upper_bound,
        ));
    }
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_frozen_reference_point() {
        // Reference values computed with 30-digit arithmetic.
        let (g0, g1) = gamma_bounds(1000, 4, 10, 40).unwrap();
        assert!((g0 - 39.21056084767679).abs() < 1e-9, "{g0}");
        assert!((g1 - 45.37820206124067).abs() < 1e-9, "{g1}");
    }

    #[test]
    fn gamma_degenerate_cases() {
        let (g0, _) = gamma_bounds(512, 3, 0, 20).unwrap();
        assert_eq!(g0, 0.0);
        // symdiff = 0 collapses the first exponent
        let (_, g1) = gamma_bounds(512, 3, 10, 0).unwrap();
        let expect = 512.0 * (1.0 - (-3.0 * 10.0 / 511.0f64).exp());
        assert!((g1 - expect).abs() < 1e-12);
        assert!(gamma_bounds(1, 3, 1, 1).is_err());
    }

    #[test]
    fn gamma_order_holds_on_grid() {
        for &(c, k, inter, symdiff) in &default_grid() {
            let (g0, g1) = gamma_bounds(c, k, inter, symdiff).unwrap();
            assert!(g0 <= g1 + 1e-12, "gamma0 {g0} > gamma1 {g1}");
        }
    }

    #[test]
    fn empty_sets_give_zero_q() {
        let exp = OverlapExperiment {
            c: 128,
            k: 3,
            only_x: 0,
            only_y: 0,
            inter: 0,
            trials: 200,
            seed: 5,
        };
        let q = empirical_q(&exp).unwrap();
        assert_eq!(q.mean(), 0.0);
        assert_eq!(q.freq_ge(1.0), 0.0);
    }

    #[test]
    fn pure_intersection_sits_inside_envelope() {
        let (c, k, inter) = (1024usize, 4u32, 32usize);
        let exp = OverlapExperiment {
            c,
            k,
            only_x: 0,
            only_y: 0,
            inter,
            trials: 10_000,
            seed: 17,
        };
        let q = empirical_q(&exp).unwrap();
        let (g0, g1) = gamma_bounds(c, k, inter, 0).unwrap();
        let se = q.std_err();
        assert!(
            q.mean() >= g0 - 4.0 * se && q.mean() <= g1 + 4.0 * se,
            "mean {} outside [{g0}, {g1}] +/- 4se",
            q.mean()
        );
    }

    #[test]
    fn lower_tail_obeys_chernoff_bound() {
        // gamma0 here is ~56, comfortably past the regime where the bound
        // has bite; observed frequency must stay within 1.05x of it.
        let (c, k, inter) = (256usize, 2u32, 32usize);
        let exp = OverlapExperiment {
            c,
            k,
            only_x: 16,
            only_y: 16,
            inter,
            trials: 10_000,
            seed: 23,
        };
        let q = empirical_q(&exp).unwrap();
        let (g0, _) = gamma_bounds(c, k, inter, 32).unwrap();
        assert!(g0 >= 20.0);
        let freq = q.freq_le((1.0 - TAIL_DELTA) * g0);
        let bound = lower_tail_bound(g0, TAIL_DELTA) * 1.05;
        assert!(freq <= bound, "freq {freq} > bound {bound}");
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let exp = OverlapExperiment {
            c: 256,
            k: 3,
            only_x: 8,
            only_y: 8,
            inter: 8,
            trials: 2_000,
            seed: 3,
        };
        let reference = empirical_q(&exp).unwrap();
        for threads in [1usize, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let run = pool.install(|| empirical_q(&exp).unwrap());
            assert_eq!(run.mean(), reference.mean());
            assert_eq!(run.histogram(), reference.histogram());
        }
    }

    #[test]
    fn na_covariances_nonpositive_within_noise() {
        let report = na_sanity(64, 2, 8, 100_000, 7).unwrap();
        assert!(
            report.max_cov <= 3.0 * report.max_cov_std_err,
            "max covariance {} exceeds 3 se {}",
            report.max_cov,
            report.max_cov_std_err
        );
    }

    #[test]
    fn na_zero_set_is_constant() {
        let report = na_sanity(32, 2, 0, 500, 1).unwrap();
        assert_eq!(report.max_cov, 0.0);
        assert_eq!(report.min_cov, 0.0);
    }

    #[test]
    fn na_single_bit_closed_form() {
        // k = 1, one element: exactly one bit set per trial, so for any pair
        // E[b_i b_j] = 0 and cov = -E[b_i] E[b_j] ~ -1/c^2.
        let c = 64;
        let report = na_sanity(c, 1, 1, 100_000, 11).unwrap();
        assert!(report.max_cov < 0.0, "every covariance must be negative");
        let expect = -1.0 / (c as f64 * c as f64);
        assert!(
            (report.min_cov - expect).abs() < 5e-5,
            "min cov {} vs closed form {expect}",
            report.min_cov
        );
    }

    #[test]
    fn report_renders_one_line_per_point() {
        let grid = vec![(256usize, 2u32, 16usize, 16usize)];
        let rows = evaluate_grid(&grid, 500, 9).unwrap();
        let text = render_report(&rows);
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("gamma0"));
    }
}

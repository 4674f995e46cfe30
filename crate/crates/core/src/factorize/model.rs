//! Trained factor matrices, prediction, ranking, and the model file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::data::Mode;
use super::la::{dot, Mat};
use crate::error::{Error, Result};

/// User and item factors, plus the side-matrix factors a co-factorization
/// carries. `users` may have more rows than `n_users` (pseudo-node rows of an
/// augmented graph); prediction only ever reads the first `n_users` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub users: Mat,
    pub items: Mat,
    pub side: Option<Mat>,
    pub n_users: usize,
    pub mode: Mode,
}

impl FactorModel {
    pub fn rank(&self) -> usize {
        self.users.cols()
    }

    /// Inner product of user and item factors.
    pub fn predict(&self, user: usize, item: usize) -> Result<f64> {
        if user >= self.n_users {
            return Err(Error::IndexOutOfRange(format!(
                "user {user} >= {}",
                self.n_users
            )));
        }
        if item >= self.items.rows() {
            return Err(Error::IndexOutOfRange(format!(
                "item {item} >= {}",
                self.items.rows()
            )));
        }
        Ok(self.score(user, item))
    }

    #[inline]
    pub(crate) fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.users.row(user), self.items.row(item))
    }

    /// Top `k` items for `user` by descending score, ties broken by ascending
    /// item id. `excluded` must be sorted; its items never appear. Returns
    /// fewer than `k` entries when fewer candidates exist.
    pub fn top_k(&self, user: usize, k: usize, excluded: &[u32]) -> Result<Vec<(u32, f64)>> {
        if user >= self.n_users {
            return Err(Error::IndexOutOfRange(format!(
                "user {user} >= {}",
                self.n_users
            )));
        }
        let mut scored: Vec<(u32, f64)> = (0..self.items.rows() as u32)
            .filter(|item| excluded.binary_search(item).is_err())
            .map(|item| (item, self.score(user, item as usize)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Text format: header
    /// `MODEL1 mode rank n_users u_rows v_rows side_rows`, then the factor
    /// matrices row-major, one row per line, in decimal.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut out = BufWriter::new(file);
        let side_rows = self.side.as_ref().map_or(0, Mat::rows);
        writeln!(
            out,
            "MODEL1 {} {} {} {} {} {}",
            self.mode,
            self.rank(),
            self.n_users,
            self.users.rows(),
            self.items.rows(),
            side_rows
        )
        .map_err(|e| Error::io(&pstr, e))?;
        let mut dump = |m: &Mat| -> Result<()> {
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
                writeln!(out, "{}", row.join(" ")).map_err(|e| Error::io(&pstr, e))?;
            }
            Ok(())
        };
        dump(&self.users)?;
        dump(&self.items)?;
        if let Some(side) = &self.side {
            dump(side)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let pstr = path.as_ref().display().to_string();
        let file = File::open(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(&pstr, e))?,
            None => return Err(Error::parse(&pstr, 1, "empty model file")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "MODEL1" {
            return Err(Error::parse(
                &pstr,
                1,
                "header must be `MODEL1 mode rank n_users u_rows v_rows side_rows`",
            ));
        }
        let mode: Mode = fields[1].parse()?;
        let rank: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad rank"))?;
        let n_users: usize = fields[3]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad n_users"))?;
        let u_rows: usize = fields[4]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad u_rows"))?;
        let v_rows: usize = fields[5]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad v_rows"))?;
        let side_rows: usize = fields[6]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad side_rows"))?;

        let mut read_mat = |rows: usize, what: &str| -> Result<Mat> {
            let mut data = Vec::with_capacity(rows * rank);
            for i in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::parse(&pstr, 0, format!("missing {what} row {i}")))?
                    .map_err(|e| Error::io(&pstr, e))?;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|tok| tok.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(&pstr, 0, format!("bad float in {what} row {i}")))?;
                if values.len() != rank {
                    return Err(Error::parse(
                        &pstr,
                        0,
                        format!("{what} row {i} has {} values, want {rank}", values.len()),
                    ));
                }
                data.extend(values);
            }
            Ok(Mat::from_vec(rows, rank, data))
        };
        let users = read_mat(u_rows, "user")?;
        let items = read_mat(v_rows, "item")?;
        let side = if side_rows > 0 {
            Some(read_mat(side_rows, "side")?)
        } else {
            None
        };
        Ok(FactorModel {
            users,
            items,
            side,
            n_users,
            mode,
        })
    }
}

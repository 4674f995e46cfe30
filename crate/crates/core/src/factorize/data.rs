//! Sparse rating observations with split membership.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Real-valued observed entries.
    Explicit,
    /// 0/1 entries; only the ones are stored, zeros are implicit.
    Implicit,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Explicit => "explicit",
            Mode::Implicit => "implicit",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Mode::Explicit),
            "implicit" => Ok(Mode::Implicit),
            other => Err(Error::InvalidParam(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    pub split: Split,
}

/// User x item observations. Implicit mode stores only positive (value 1)
/// entries; everything else is an implicit zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingData {
    n_users: usize,
    m_items: usize,
    mode: Mode,
    ratings: Vec<Rating>,
}

impl RatingData {
    pub fn new(n_users: usize, m_items: usize, mode: Mode) -> Self {
        RatingData {
            n_users,
            m_items,
            mode,
            ratings: Vec::new(),
        }
    }

    pub fn push(&mut self, user: usize, item: usize, value: f64, split: Split) -> Result<()> {
        if user >= self.n_users || item >= self.m_items {
            return Err(Error::IndexOutOfRange(format!(
                "rating ({user}, {item}) outside {} x {}",
                self.n_users, self.m_items
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidParam(format!(
                "rating ({user}, {item}) has non-finite value"
            )));
        }
        if self.mode == Mode::Implicit && value != 1.0 {
            return Err(Error::InvalidParam(format!(
                "implicit data stores only 1s; got {value} at ({user}, {item})"
            )));
        }
        self.ratings.push(Rating {
            user: user as u32,
            item: item as u32,
            value,
            split,
        });
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn m_items(&self) -> usize {
        self.m_items
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = &Rating> {
        self.ratings.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.iter_split(split).count()
    }

    /// Train entries grouped by user: `out[i]` lists `(item, value)`.
    pub fn train_by_user(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.n_users];
        for r in self.iter_split(Split::Train) {
            out[r.user as usize].push((r.item, r.value));
        }
        out
    }

    /// Train entries grouped by item: `out[j]` lists `(user, value)`.
    pub fn train_by_item(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.m_items];
        for r in self.iter_split(Split::Train) {
            out[r.item as usize].push((r.user, r.value));
        }
        out
    }

    /// Header `n m mode`, then one `i j r` triplet per line. Split tags are
    /// written separately (`write_split_file`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{} {} {}", self.n_users, self.m_items, self.mode)
            .map_err(|e| Error::io(&pstr, e))?;
        for r in &self.ratings {
            writeln!(out, "{} {} {}", r.user, r.item, r.value).map_err(|e| Error::io(&pstr, e))?;
        }
        out.flush().map_err(|e| Error::io(&pstr, e))
    }

    /// Load triplets; every entry starts in the train split until split files
    /// are applied.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let pstr = path.as_ref().display().to_string();
        let file = File::open(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(&pstr, e))?,
            None => return Err(Error::parse(&pstr, 1, "empty ratings file")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(&pstr, 1, "header must be `n m mode`"));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad n"))?;
        let m: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(&pstr, 1, "bad m"))?;
        let mode: Mode = fields[2].parse()?;
        let mut data = RatingData::new(n, m, mode);
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io(&pstr, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(&pstr, lineno + 1, "expected `i j r`"));
            }
            let user: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(&pstr, lineno + 1, "bad user id"))?;
            let item: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(&pstr, lineno + 1, "bad item id"))?;
            let value: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(&pstr, lineno + 1, "bad value"))?;
            data.push(user, item, value, Split::Train)
                .map_err(|e| Error::parse(&pstr, lineno + 1, e.to_string()))?;
        }
        Ok(data)
    }

    /// Mark the triplets whose 0-based indices are listed in `path` (one per
    /// line) as members of `split`. An index may be assigned a split only
    /// once across all applied files.
    pub fn apply_split_file(&mut self, path: impl AsRef<Path>, split: Split) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::open(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&pstr, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let idx: usize = line
                .parse()
                .map_err(|_| Error::parse(&pstr, lineno + 1, "bad triplet index"))?;
            if idx >= self.ratings.len() {
                return Err(Error::parse(
                    &pstr,
                    lineno + 1,
                    format!("triplet index {idx} out of range ({} triplets)", self.ratings.len()),
                ));
            }
            if split != Split::Train && self.ratings[idx].split != Split::Train {
                return Err(Error::parse(
                    &pstr,
                    lineno + 1,
                    format!("triplet {idx} assigned to two splits"),
                ));
            }
            self.ratings[idx].split = split;
        }
        Ok(())
    }

    /// Indices of the given split, one per line.
    pub fn write_split_file(&self, path: impl AsRef<Path>, split: Split) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let mut out = BufWriter::new(file);
        for (idx, r) in self.ratings.iter().enumerate() {
            if r.split == split {
                writeln!(out, "{idx}").map_err(|e| Error::io(&pstr, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(&pstr, e))
    }
}

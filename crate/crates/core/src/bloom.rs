//! Classic Bloom filter: a c-bit array written through k seeded hash
//! functions, supporting add, membership, bitwise-OR union, and cardinality
//! estimation from the population count.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// splitmix64 finalizer; full-avalanche 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A family of k hash functions derived from one 64-bit master seed via
/// double hashing: the t-th index of element x is `(h1(x) + t * h2(x)) mod c`.
///
/// The k indices of an element depend only on `(master_seed, k, c, x)`, never
/// on filter state. Element ids are unsigned 64-bit values; the hash consumes
/// the id directly, which is equivalent to hashing its 8-byte little-endian
/// encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashFamily {
    k: u32,
    master_seed: u64,
}

impl HashFamily {
    pub fn new(k: u32, master_seed: u64) -> Self {
        HashFamily { k, master_seed }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The k bit indices of `x` in a c-bit array.
    #[inline]
    pub fn bit_indices(&self, x: u64, c: usize) -> impl Iterator<Item = usize> {
        let h1 = mix64(x ^ mix64(self.master_seed));
        let h2 = mix64(x ^ mix64(self.master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        let c = c as u64;
        (0..self.k as u64).map(move |t| (h1.wrapping_add(t.wrapping_mul(h2)) % c) as usize)
    }
}

/// Fixed-width Bloom filter over u64 element ids.
///
/// Bits only ever turn on: `add` and `union` are monotone, and the final bit
/// array is independent of insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    c: usize,
    family: HashFamily,
    bits: Vec<u64>,
}

impl BloomFilter {
    /// All-zero filter of `c` bits. Rejects `c == 0` and `k == 0`.
    pub fn new(c: usize, family: HashFamily) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidParam("bloom: bit length c must be >= 1".into()));
        }
        if family.k == 0 {
            return Err(Error::InvalidParam("bloom: hash count k must be >= 1".into()));
        }
        Ok(BloomFilter {
            c,
            family,
            bits: vec![0u64; c.div_ceil(64)],
        })
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn family(&self) -> HashFamily {
        self.family
    }

    /// Raw bit blocks, least-significant bit first within each word.
    pub fn blocks(&self) -> &[u64] {
        &self.bits
    }

    pub fn add(&mut self, x: u64) {
        for idx in self.family.bit_indices(x, self.c) {
            self.bits[idx / 64] |= 1u64 << (idx % 64);
        }
    }

    pub fn contains(&self, x: u64) -> bool {
        self.family
            .bit_indices(x, self.c)
            .all(|idx| self.bits[idx / 64] & (1u64 << (idx % 64)) != 0)
    }

    /// Bitwise-OR `other` into `self`. Requires equal width and the same
    /// hash family.
    pub fn union(&mut self, other: &BloomFilter) -> Result<()> {
        if self.c != other.c {
            return Err(Error::DimensionMismatch(format!(
                "bloom union: widths differ ({} vs {})",
                self.c, other.c
            )));
        }
        if self.family != other.family {
            return Err(Error::DimensionMismatch(
                "bloom union: hash families differ".into(),
            ));
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Estimated cardinality `-(c/k) * ln(1 - popcount/c)`.
    ///
    /// Returns a real value rather than a ceiling so threshold comparisons do
    /// not flap on off-by-one rounding; a saturated filter (every bit set)
    /// reports +inf, which trips any finite threshold.
    pub fn estimate_size(&self) -> f64 {
        let nnz = self.popcount();
        if nnz == 0 {
            return 0.0;
        }
        if nnz >= self.c {
            return f64::INFINITY;
        }
        let c = self.c as f64;
        let k = self.family.k as f64;
        -(c / k) * (1.0 - nnz as f64 / c).ln()
    }

    /// Lowercase-hex encoding of the bit array: bytes in ascending bit order,
    /// bit i stored at byte i/8, position i%8 (LSB first).
    pub fn to_hex(&self) -> String {
        bits_to_hex(&self.bits, self.c)
    }

    pub fn from_hex(c: usize, family: HashFamily, hex: &str) -> Result<Self> {
        let bits = bits_from_hex(c, hex)?;
        if family.k == 0 || c == 0 {
            return Err(Error::InvalidParam("bloom: c and k must be >= 1".into()));
        }
        Ok(BloomFilter { c, family, bits })
    }

    /// One serialized record: header line `c k master_seed`, then the bit
    /// array as lowercase hex.
    pub fn write_record(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.c, self.family.k, self.family.master_seed)?;
        writeln!(out, "{}", self.to_hex())
    }

    pub fn read_record(input: &mut impl std::io::BufRead) -> Result<Self> {
        let mut header = String::new();
        if input
            .read_line(&mut header)
            .map_err(|e| Error::io("<bloom record>", e))?
            == 0
        {
            return Err(Error::parse("<bloom record>", 1, "empty record"));
        }
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                "<bloom record>",
                1,
                "header must be `c k master_seed`",
            ));
        }
        let c: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse("<bloom record>", 1, "bad c"))?;
        let k: u32 = fields[1]
            .parse()
            .map_err(|_| Error::parse("<bloom record>", 1, "bad k"))?;
        let seed: u64 = fields[2]
            .parse()
            .map_err(|_| Error::parse("<bloom record>", 1, "bad master_seed"))?;
        let mut hex = String::new();
        input
            .read_line(&mut hex)
            .map_err(|e| Error::io("<bloom record>", e))?;
        Self::from_hex(c, HashFamily::new(k, seed), hex.trim())
    }
}

pub(crate) fn bits_to_hex(blocks: &[u64], c: usize) -> String {
    let nbytes = c.div_ceil(8);
    let mut s = String::with_capacity(nbytes * 2);
    let mut written = 0;
    'outer: for word in blocks {
        for byte in word.to_le_bytes() {
            if written == nbytes {
                break 'outer;
            }
            let _ = write!(s, "{byte:02x}");
            written += 1;
        }
    }
    s
}

pub(crate) fn bits_from_hex(c: usize, hex: &str) -> Result<Vec<u64>> {
    let nbytes = c.div_ceil(8);
    if !hex.is_ascii() {
        return Err(Error::parse("<hex>", 0, "corrupt hex"));
    }
    if hex.len() != nbytes * 2 {
        return Err(Error::parse(
            "<hex>",
            0,
            format!("expected {} hex chars for c={c}, got {}", nbytes * 2, hex.len()),
        ));
    }
    let mut bits = vec![0u64; c.div_ceil(64)];
    for i in 0..nbytes {
        let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
            .map_err(|_| Error::parse("<hex>", 0, "corrupt hex"))?;
        bits[i / 8] |= (byte as u64) << (8 * (i % 8));
    }
    // Stray bits past c mean the row was written with a different width.
    if !c.is_multiple_of(64) {
        let last = bits.len() - 1;
        let mask = (1u64 << (c % 64)) - 1;
        if bits[last] & !mask != 0 {
            return Err(Error::parse("<hex>", 0, "set bits beyond declared width"));
        }
    }
    Ok(bits)
}

/// Sizing from a target capacity and false-positive rate:
/// `k = ceil(log2(1/fpr))`, `c = ceil(capacity * 1.44 * log2(1/fpr))` rounded
/// up to a multiple of 8. Returns `(c, k)`.
pub fn params_for(capacity: usize, fpr: f64) -> Result<(usize, u32)> {
    if capacity == 0 {
        return Err(Error::InvalidParam("bloom sizing: capacity must be >= 1".into()));
    }
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(Error::InvalidParam(format!(
            "bloom sizing: fpr must be in (0,1), got {fpr}"
        )));
    }
    let bits_per_key = (1.0 / fpr).log2();
    let k = bits_per_key.ceil() as u32;
    let c = (capacity as f64 * 1.44 * bits_per_key).ceil() as usize;
    Ok((c.div_ceil(8) * 8, k))
}

//! Regression data and model indicators.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Response `y` (length n) and design `X` (n × p) for `y ~ N(Xθ, φI)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: x.nrows(),
            });
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response contains {v}")));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("design contains {v}")));
        }
        let xty = x.tr_mul(&y);
        let yty = y.dot(&y);
        Ok(Self { y, x, xty, yty })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// `X_k' X_k` for the listed columns.
    pub fn sub_gram(&self, cols: &[usize]) -> DMatrix<f64> {
        let k = cols.len();
        let mut g = DMatrix::zeros(k, k);
        for a in 0..k {
            let ca = self.x.column(cols[a]);
            for b in a..k {
                let v = ca.dot(&self.x.column(cols[b]));
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }

    /// `X_k' y` for the listed columns.
    pub fn sub_xty(&self, cols: &[usize]) -> DVector<f64> {
        DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.xty[c]))
    }

    /// Dataset restricted to the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r]));
        let x = self.x.select_rows(rows.iter());
        Self::new(y, x)
    }
}

/// Inclusion bitmask δ over p candidate variables.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelIndicator {
    p: usize,
    words: Vec<u64>,
}

impl ModelIndicator {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            words: vec![0; p.div_ceil(64).max(1)],
        }
    }

    pub fn full(p: usize) -> Self {
        let mut m = Self::empty(p);
        for i in 0..p {
            m.set(i, true);
        }
        m
    }

    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let mut m = Self::empty(p);
        for &i in indices {
            if i >= p {
                return Err(Error::InvalidArgument(format!(
                    "variable index {i} out of range for p = {p}"
                )));
            }
            m.set(i, true);
        }
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.p && (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.p, "variable index {i} out of range for p = {}", self.p);
        let mask = 1u64 << (i % 64);
        if on {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn with(&self, i: usize, on: bool) -> Self {
        let mut m = self.clone();
        m.set(i, on);
        m
    }

    pub fn size(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.p).filter(|&i| self.contains(i)).collect()
    }

    /// Hex bitmask, most significant digit first; bit i is variable i.
    pub fn to_hex(&self) -> String {
        let digits = self.p.div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4).fold(0u32, |acc, b| {
                    acc | ((self.contains(4 * d + b) as u32) << b)
                });
                char::from_digit(nibble, 16).expect("nibble < 16")
            })
            .collect()
    }

    pub fn from_hex(p: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim().trim_start_matches("0x");
        let mut m = Self::empty(p);
        for (d, ch) in hex.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::InvalidArgument(format!("bad hex digit '{ch}'")))?;
            for b in 0..4 {
                if (nibble >> b) & 1 == 1 {
                    let i = 4 * d + b;
                    if i >= p {
                        return Err(Error::InvalidArgument(format!(
                            "hex model sets variable {i} but p = {p}"
                        )));
                    }
                    m.set(i, true);
                }
            }
        }
        Ok(m)
    }
}

impl fmt::Debug for ModelIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Model{:?}", self.indices())
    }
}

impl fmt::Display for ModelIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    p: usize,
    hex: String,
}

impl Serialize for ModelIndicator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRepr {
            p: self.p,
            hex: self.to_hex(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelIndicator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ModelRepr::deserialize(d)?;
        ModelIndicator::from_hex(r.p, &r.hex).map_err(serde::de::Error::custom)
    }
}

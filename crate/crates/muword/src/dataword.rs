//! Finite data words: class structure, 1-types, marked projections,
//! canonicalization up to data-value permutation, and exhaustive enumeration.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Positions are 1-based, matching the usual convention for word logics.
pub type Pos = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("letters and values have different lengths ({letters} vs {values})")]
    LengthMismatch { letters: usize, values: usize },
    #[error("position {0} out of range 1..={1}")]
    OutOfRange(Pos, usize),
    #[error("parse error at token {0:?}: {1}")]
    Parse(String, String),
}

/// A finite data word: a letter and a data value at each position.
///
/// Data values are plain nonnegative integers; the semantics only ever
/// consults equality of values, so languages are invariant under permuting
/// them. `canonicalize` produces the restricted-growth normal form for that
/// invariance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataWord {
    pub letters: Vec<String>,
    pub values: Vec<u64>,
}

/// The 1-type of a position: whether its global predecessor/successor stays
/// in the same class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Marking {
    /// true iff position i-1 exists and is the class predecessor of i
    pub pred: bool,
    /// true iff position i+1 exists and is the class successor of i
    pub succ: bool,
}

/// A word over Σ×M: letters paired with their 1-type markings.
pub type MarkedWord = Vec<(String, Marking)>;

/// One class of a data word, listed by its (1-based) positions in order,
/// together with the marked letters found there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassProjection {
    pub positions: Vec<Pos>,
    pub marked: MarkedWord,
}

impl DataWord {
    pub fn new(letters: Vec<String>, values: Vec<u64>) -> Result<Self, WordError> {
        if letters.len() != values.len() {
            return Err(WordError::LengthMismatch {
                letters: letters.len(),
                values: values.len(),
            });
        }
        Ok(DataWord { letters, values })
    }

    pub fn empty() -> Self {
        DataWord { letters: vec![], values: vec![] }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letter(&self, i: Pos) -> &str {
        &self.letters[i - 1]
    }

    pub fn value(&self, i: Pos) -> u64 {
        self.values[i - 1]
    }

    fn check_pos(&self, i: Pos) -> Result<(), WordError> {
        if i == 0 || i > self.len() {
            Err(WordError::OutOfRange(i, self.len()))
        } else {
            Ok(())
        }
    }

    /// Least position j > i with the same data value, if any.
    pub fn class_successor(&self, i: Pos) -> Result<Option<Pos>, WordError> {
        self.check_pos(i)?;
        Ok((i + 1..=self.len()).find(|&j| self.values[j - 1] == self.values[i - 1]))
    }

    /// Greatest position j < i with the same data value, if any.
    pub fn class_predecessor(&self, i: Pos) -> Result<Option<Pos>, WordError> {
        self.check_pos(i)?;
        Ok((1..i).rev().find(|&j| self.values[j - 1] == self.values[i - 1]))
    }

    /// The 1-type of position i.
    pub fn one_type(&self, i: Pos) -> Result<Marking, WordError> {
        self.check_pos(i)?;
        let succ = self.class_successor(i)? == Some(i + 1);
        let pred = i > 1 && self.class_predecessor(i)? == Some(i - 1);
        Ok(Marking { pred, succ })
    }

    /// Marked string projection: the letter/marking pair at every position.
    pub fn marked_string_projection(&self) -> MarkedWord {
        (1..=self.len())
            .map(|i| (self.letters[i - 1].clone(), self.one_type(i).unwrap()))
            .collect()
    }

    /// The marked string projection and, per class (ordered by first
    /// occurrence), the marked class projection. The classes' position sets
    /// partition 1..n.
    pub fn projections(&self) -> (MarkedWord, Vec<ClassProjection>) {
        let msp = self.marked_string_projection();
        let mut classes: Vec<(u64, ClassProjection)> = Vec::new();
        for i in 1..=self.len() {
            let v = self.values[i - 1];
            let entry = (self.letters[i - 1].clone(), msp[i - 1].1);
            match classes.iter_mut().find(|(cv, _)| *cv == v) {
                Some((_, c)) => {
                    c.positions.push(i);
                    c.marked.push(entry);
                }
                None => classes.push((
                    v,
                    ClassProjection { positions: vec![i], marked: vec![entry] },
                )),
            }
        }
        (msp, classes.into_iter().map(|(_, c)| c).collect())
    }

    /// Restricted-growth renaming: the k-th distinct value (by first
    /// occurrence) becomes k. Canonical representative of the orbit under
    /// data-value permutations.
    pub fn canonicalize(&self) -> DataWord {
        let mut seen: Vec<u64> = Vec::new();
        let values = self
            .values
            .iter()
            .map(|&v| {
                match seen.iter().position(|&s| s == v) {
                    Some(k) => (k + 1) as u64,
                    None => {
                        seen.push(v);
                        seen.len() as u64
                    }
                }
            })
            .collect();
        DataWord { letters: self.letters.clone(), values }
    }

    /// Parse the whitespace-separated `letter:value` text format.
    pub fn parse(text: &str) -> Result<DataWord, WordError> {
        let mut letters = Vec::new();
        let mut values = Vec::new();
        for tok in text.split_whitespace() {
            let (l, v) = tok
                .split_once(':')
                .ok_or_else(|| WordError::Parse(tok.into(), "expected letter:value".into()))?;
            if !is_letter_ident(l) {
                return Err(WordError::Parse(tok.into(), "bad letter".into()));
            }
            let v: u64 = v
                .parse()
                .map_err(|e| WordError::Parse(tok.into(), format!("bad value: {e}")))?;
            letters.push(l.to_string());
            values.push(v);
        }
        Ok(DataWord { letters, values })
    }
}

pub fn is_letter_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for DataWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}:{}", self.letters[i], self.values[i])?;
        }
        Ok(())
    }
}

/// All set partitions of {1..n} as restricted-growth strings.
fn rgs(n: usize) -> Vec<Vec<u64>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut cur = vec![0u64; n];
    fn go(cur: &mut Vec<u64>, i: usize, max: u64, out: &mut Vec<Vec<u64>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 1..=max + 1 {
            cur[i] = v;
            go(cur, i + 1, max.max(v), out);
        }
    }
    go(&mut cur, 0, 0, &mut out);
    out
}

/// Exactly one representative per permutation-equivalence class: every letter
/// word of length n paired with every restricted-growth value string. The
/// count is |Σ|^n · Bell(n).
pub fn enumerate(alphabet: &[String], n: usize) -> Vec<DataWord> {
    let parts = rgs(n);
    let mut letter_words: Vec<Vec<String>> = vec![vec![]];
    for _ in 0..n {
        letter_words = letter_words
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |l| {
                    let mut w2 = w.clone();
                    w2.push(l.clone());
                    w2
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for lw in &letter_words {
        for p in &parts {
            out.push(DataWord { letters: lw.clone(), values: p.clone() });
        }
    }
    out
}

/// All representatives of lengths 0..=max_len, shortest first.
pub fn enumerate_up_to(alphabet: &[String], max_len: usize) -> Vec<DataWord> {
    (0..=max_len).flat_map(|n| enumerate(alphabet, n)).collect()
}

/// Convenience: single-character alphabet list from a str like "ab".
pub fn alphabet(s: &str) -> Vec<String> {
    s.chars().map(|c| c.to_string()).collect()
}

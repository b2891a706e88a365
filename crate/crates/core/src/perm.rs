//! Permutations of `{1..r}` with one-line notation.
//!
//! Internally images are 0-based; the text form is the 1-based one-line
//! notation `2 1 4 3`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    #[error("one-line notation must list each of 1..{0} exactly once")]
    NotAPermutation(usize),
    #[error("empty permutation text")]
    Empty,
    #[error("`{0}` is not a positive integer")]
    BadEntry(String),
}

/// A permutation of `{0..n-1}`, stored as its image vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(Vec<u32>);

impl Perm {
    pub fn identity(n: usize) -> Perm {
        Perm((0..n as u32).collect())
    }

    /// Builds from 0-based images, checking bijectivity.
    pub fn from_images(images: Vec<u32>) -> Result<Perm, PermError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if (x as usize) >= n || seen[x as usize] {
                return Err(PermError::NotAPermutation(n));
            }
            seen[x as usize] = true;
        }
        Ok(Perm(images))
    }

    /// Parses 1-based one-line notation, e.g. `2 1 4 3`.
    pub fn parse_one_line(text: &str) -> Result<Perm, PermError> {
        let mut images = Vec::new();
        for tok in text.split_whitespace() {
            let v: u32 = tok
                .parse()
                .map_err(|_| PermError::BadEntry(tok.to_string()))?;
            if v == 0 {
                return Err(PermError::BadEntry(tok.to_string()));
            }
            images.push(v - 1);
        }
        if images.is_empty() {
            return Err(PermError::Empty);
        }
        Perm::from_images(images)
    }

    pub fn one_line(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|x| (x + 1).to_string()).collect();
        parts.join(" ")
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.0[x] as usize
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.degree(), other.degree());
        Perm(other.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u32;
        }
        Perm(inv)
    }

    pub fn fixed_points(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(i, &x)| *i == x as usize)
            .count()
    }

    pub fn is_identity(&self) -> bool {
        self.fixed_points() == self.degree()
    }

    /// Number of points where the two permutations disagree.
    pub fn hamming(&self, other: &Perm) -> usize {
        debug_assert_eq!(self.degree(), other.degree());
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// All permutations of degree `n`, lexicographic by one-line notation.
    pub fn all(n: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut current: Vec<u32> = (0..n as u32).collect();
        loop {
            out.push(Perm(current.clone()));
            if !next_lex(&mut current) {
                break;
            }
        }
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_line())
    }
}

fn next_lex(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

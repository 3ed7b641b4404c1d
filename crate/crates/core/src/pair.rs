use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Unordered pair of distinct variable indices, stored as `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    lo: usize,
    hi: usize,
}

impl Pair {
    /// Returns `None` when `a == b`.
    pub fn new(a: usize, b: usize) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Pair { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(Pair { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(self) -> usize {
        self.lo
    }

    pub fn hi(self) -> usize {
        self.hi
    }

    /// Position of this pair in the lexicographic enumeration of pairs over `n` variables.
    pub fn lex_index(self, n: usize) -> usize {
        // pairs starting with 0..lo come first
        self.lo * (2 * n - self.lo - 1) / 2 + (self.hi - self.lo - 1)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(V{}, V{})", self.lo, self.hi)
    }
}

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [a, b] = <[usize; 2]>::deserialize(d)?;
        Pair::new(a, b).ok_or_else(|| serde::de::Error::custom("pair indices must be distinct"))
    }
}

/// Number of unordered pairs over `n` items.
pub fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All unordered pairs over `n` variables in lexicographic order.
pub fn all_pairs(n: usize) -> impl Iterator<Item = Pair> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| Pair { lo: i, hi: j }))
}

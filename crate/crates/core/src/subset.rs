//! Subsets of `{0, .., p-1}` stored as 64-bit masks.
//!
//! Column indices are zero-based throughout the crate. The numeric value of
//! the mask doubles as the state index in every exact enumeration, so
//! `enumerate_states(p, None)` yields state `i` at position `i`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

/// Default cap on the number of states a full enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    bits: u64,
    p: u8,
}

fn mask(p: usize) -> u64 {
    if p == 64 {
        u64::MAX
    } else {
        (1u64 << p) - 1
    }
}

impl Subset {
    pub fn empty(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_DIM {
            return Err(Error::DimensionTooLarge(p));
        }
        Ok(Subset { bits: 0, p: p as u8 })
    }

    pub fn full(p: usize) -> Result<Self> {
        let s = Self::empty(p)?;
        Ok(Subset { bits: mask(p), ..s })
    }

    pub fn from_bits(p: usize, bits: u64) -> Result<Self> {
        let s = Self::empty(p)?;
        if bits & !mask(p) != 0 {
            return Err(Error::IndexOutOfRange {
                index: 63 - bits.leading_zeros() as usize,
                p,
            });
        }
        Ok(Subset { bits, ..s })
    }

    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::empty(p)?;
        for &j in indices {
            if j >= p {
                return Err(Error::IndexOutOfRange { index: j, p });
            }
            s.bits |= 1 << j;
        }
        Ok(s)
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Ambient dimension p.
    #[inline]
    pub fn dim(&self) -> usize {
        self.p as usize
    }

    /// Number of members, |S|.
    #[inline]
    pub fn size(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        j < self.dim() && self.bits >> j & 1 == 1
    }

    /// The set with membership of `j` toggled.
    #[inline]
    pub fn flip(&self, j: usize) -> Subset {
        debug_assert!(j < self.dim());
        Subset {
            bits: self.bits ^ (1 << j),
            p: self.p,
        }
    }

    #[inline]
    pub fn with(&self, j: usize) -> Subset {
        Subset {
            bits: self.bits | (1 << j),
            p: self.p,
        }
    }

    #[inline]
    pub fn without(&self, j: usize) -> Subset {
        Subset {
            bits: self.bits & !(1 << j),
            p: self.p,
        }
    }

    /// Size of the symmetric difference.
    #[inline]
    pub fn hamming(&self, other: &Subset) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }

    #[inline]
    pub fn union(&self, other: &Subset) -> Subset {
        Subset {
            bits: self.bits | other.bits,
            p: self.p,
        }
    }

    #[inline]
    pub fn intersection(&self, other: &Subset) -> Subset {
        Subset {
            bits: self.bits & other.bits,
            p: self.p,
        }
    }

    /// Members of `self` not in `other`.
    #[inline]
    pub fn difference(&self, other: &Subset) -> Subset {
        Subset {
            bits: self.bits & !other.bits,
            p: self.p,
        }
    }

    #[inline]
    pub fn symmetric_difference(&self, other: &Subset) -> Subset {
        Subset {
            bits: self.bits ^ other.bits,
            p: self.p,
        }
    }

    #[inline]
    pub fn complement(&self) -> Subset {
        Subset {
            bits: !self.bits & mask(self.dim()),
            p: self.p,
        }
    }

    #[inline]
    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.bits & !other.bits == 0
    }

    #[inline]
    pub fn is_disjoint(&self, other: &Subset) -> bool {
        self.bits & other.bits == 0
    }

    /// Members in ascending order.
    pub fn indices(&self) -> Indices {
        Indices { rest: self.bits }
    }

    pub fn smallest(&self) -> Option<usize> {
        (self.bits != 0).then(|| self.bits.trailing_zeros() as usize)
    }

    /// The p states at Hamming distance one, ordered by flipped index.
    pub fn neighbors(&self) -> Vec<Subset> {
        (0..self.dim()).map(|j| self.flip(j)).collect()
    }

    /// Zero-padded lowercase hex of the mask, one digit per four columns.
    pub fn to_hex(&self) -> String {
        let width = self.dim().div_ceil(4);
        format!("{:0width$x}", self.bits, width = width)
    }

    /// All subsets of `self` (including `self` and the empty set), ascending.
    pub fn submasks(&self) -> Submasks {
        Submasks {
            full: self.bits,
            next: Some(0),
            p: self.p,
        }
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, j) in self.indices().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", j)?;
        }
        f.write_str("}")
    }
}

pub struct Indices {
    rest: u64,
}

impl Iterator for Indices {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.rest == 0 {
            return None;
        }
        let j = self.rest.trailing_zeros() as usize;
        self.rest &= self.rest - 1;
        Some(j)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.rest.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Indices {}

pub struct Submasks {
    full: u64,
    next: Option<u64>,
    p: u8,
}

impl Iterator for Submasks {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        let cur = self.next?;
        self.next = if cur == self.full {
            None
        } else {
            // next submask in ascending numeric order
            Some(((cur | !self.full).wrapping_add(1)) & self.full)
        };
        Some(Subset { bits: cur, p: self.p })
    }
}

/// Binomial coefficient, exact.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of subsets of a p-set with at most `max_size` members.
pub fn count_states(p: usize, max_size: Option<usize>) -> u128 {
    let top = max_size.unwrap_or(p).min(p);
    (0..=top).map(|k| binomial(p, k)).sum()
}

/// Iterator over subsets in ascending numeric order of the bit pattern.
#[derive(Clone, Debug)]
pub struct States {
    p: u8,
    max_size: u32,
    next: Option<u64>,
    last: u64,
}

impl Iterator for States {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        let cur = self.next?;
        self.next = if cur == self.last {
            None
        } else {
            let mut y = cur + 1;
            // every integer in [y, y + lowbit(y)) keeps y's bits set
            while y.count_ones() > self.max_size {
                y += y & y.wrapping_neg();
            }
            (y <= self.last).then_some(y)
        };
        Some(Subset { bits: cur, p: self.p })
    }
}

/// All subsets of `{0..p}`, optionally limited to size `max_size`, in
/// ascending bit-pattern order. Refuses when the count exceeds
/// [`DEFAULT_ENUMERATION_CAP`].
pub fn enumerate_states(p: usize, max_size: Option<usize>) -> Result<States> {
    enumerate_states_with_cap(p, max_size, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_states_with_cap(p: usize, max_size: Option<usize>, cap: u128) -> Result<States> {
    Subset::empty(p)?;
    let states = count_states(p, max_size);
    if states > cap {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    let max_size = max_size.unwrap_or(p).min(p);
    // largest pattern with at most max_size bits: the top max_size bits
    let last = if max_size == 0 {
        0
    } else {
        mask(p) & !mask(p - max_size)
    };
    Ok(States {
        p: p as u8,
        max_size: max_size as u32,
        next: Some(0),
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(p: usize, idx: &[usize]) -> Subset {
        Subset::from_indices(p, idx).unwrap()
    }

    #[test]
    fn neighbors_of_empty_are_singletons() {
        let s = Subset::empty(3).unwrap();
        assert_eq!(s.neighbors(), vec![set(3, &[0]), set(3, &[1]), set(3, &[2])]);
    }

    #[test]
    fn neighbors_of_full_are_deletions() {
        let s = Subset::full(3).unwrap();
        assert_eq!(s.neighbors(), vec![set(3, &[1, 2]), set(3, &[0, 2]), set(3, &[0, 1])]);
    }

    #[test]
    fn neighbors_flip_in_index_order() {
        let s = set(5, &[1, 3]);
        let nb = s.neighbors();
        assert_eq!(nb.len(), 5);
        for (j, t) in nb.iter().enumerate() {
            assert_eq!(*t, s.flip(j));
            assert_eq!(s.hamming(t), 1);
        }
    }

    #[test]
    fn enumerate_small() {
        let all: Vec<_> = enumerate_states(2, None).unwrap().collect();
        assert_eq!(all, vec![set(2, &[]), set(2, &[0]), set(2, &[1]), set(2, &[0, 1])]);
        assert_eq!(enumerate_states(4, Some(1)).unwrap().count(), 5);
    }

    #[test]
    fn enumerate_size_capped_matches_binomial_sum() {
        // 1 + 12 + 66 + 220 + 495 + 792
        let v: Vec<_> = enumerate_states(12, Some(5)).unwrap().collect();
        assert_eq!(v.len(), 1586);
        assert!(v.windows(2).all(|w| w[0].bits() < w[1].bits()));
        assert!(v.iter().all(|s| s.size() <= 5));
        let brute = (0u64..1 << 12).filter(|b| b.count_ones() <= 5).count();
        assert_eq!(brute, 1586);
    }

    #[test]
    fn enumerate_full_is_identity_indexed() {
        for (i, s) in enumerate_states(10, None).unwrap().enumerate() {
            assert_eq!(s.bits(), i as u64);
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        assert!(matches!(
            enumerate_states(30, None),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        // a size-limited sweep of a wide design stays under the cap
        assert_eq!(enumerate_states(64, Some(2)).unwrap().count(), 1 + 64 + 2016);
    }

    #[test]
    fn p64_masks() {
        let f = Subset::full(64).unwrap();
        assert_eq!(f.size(), 64);
        assert_eq!(f.complement().size(), 0);
        assert_eq!(f.to_hex().len(), 16);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Subset::empty(0).is_err());
        assert!(Subset::empty(65).is_err());
        assert!(Subset::from_indices(4, &[4]).is_err());
        assert!(Subset::from_bits(4, 1 << 4).is_err());
    }

    #[test]
    fn submasks_cover_powerset() {
        let s = set(8, &[1, 4, 6]);
        let subs: Vec<_> = s.submasks().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|t| t.is_subset_of(&s)));
        assert_eq!(subs.first().unwrap().size(), 0);
        assert_eq!(*subs.last().unwrap(), s);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 4), 5);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn display_and_hex() {
        let s = set(6, &[0, 5]);
        assert_eq!(s.to_string(), "{0,5}");
        assert_eq!(s.to_hex(), "21");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn hamming_is_a_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
            let (a, b, c) = (
                Subset::from_bits(64, a).unwrap(),
                Subset::from_bits(64, b).unwrap(),
                Subset::from_bits(64, c).unwrap(),
            );
            prop_assert_eq!(a.hamming(&a), 0);
            prop_assert_eq!(a.hamming(&b), b.hamming(&a));
            prop_assert!(a.hamming(&c) <= a.hamming(&b) + b.hamming(&c));
        }

        #[test]
        fn neighbors_differ_in_one_bit(p in 1usize..=64, bits in any::<u64>()) {
            let s = Subset::from_bits(p, bits & mask(p)).unwrap();
            let nb = s.neighbors();
            prop_assert_eq!(nb.len(), p);
            for t in nb {
                prop_assert_eq!(s.hamming(&t), 1);
            }
        }
    }

    #[test]
    fn full_enumeration_is_distinct() {
        for p in 1..=12 {
            let v: Vec<_> = enumerate_states(p, None).unwrap().collect();
            let mut bits: Vec<_> = v.iter().map(|s| s.bits()).collect();
            bits.dedup();
            assert_eq!(bits.len(), 1 << p);
        }
    }
}

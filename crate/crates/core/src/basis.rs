//! Multi-indices for 2D Taylor expansions and geometric moments.
//!
//! Every moment vector and every vector of Taylor coefficients in this crate
//! is addressed through a [`MultiIndexSet`]. The ordering is fixed: exponents
//! are grouped by `qy`, and within each group `qx` increases, i.e.
//! `00, 10, 20, .., P0, 01, 11, .., 0P`.

use crate::error::{Error, Result};
use std::fmt;

/// Exponent pair `(qx, qy)` of the monomial `x^qx * y^qy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub qx: usize,
    pub qy: usize,
}

impl MultiIndex {
    pub const fn new(qx: usize, qy: usize) -> Self {
        Self { qx, qy }
    }

    /// Total degree `|q| = qx + qy`.
    pub const fn order(self) -> usize {
        self.qx + self.qy
    }

    pub fn add(self, other: MultiIndex) -> MultiIndex {
        MultiIndex::new(self.qx + other.qx, self.qy + other.qy)
    }

    /// `q - e_x`, or `None` when `qx == 0`.
    pub fn minus_x(self) -> Option<MultiIndex> {
        (self.qx > 0).then(|| MultiIndex::new(self.qx - 1, self.qy))
    }

    /// `q - e_y`, or `None` when `qy == 0`.
    pub fn minus_y(self) -> Option<MultiIndex> {
        (self.qy > 0).then(|| MultiIndex::new(self.qx, self.qy - 1))
    }

    /// Evaluates the monomial at `(x, y)`.
    pub fn eval(self, x: f64, y: f64) -> f64 {
        x.powi(self.qx as i32) * y.powi(self.qy as i32)
    }

    pub fn both_even(self) -> bool {
        self.qx % 2 == 0 && self.qy % 2 == 0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.qx, self.qy)
    }
}

/// Position of `q` inside the full set of order `p` (requires `|q| <= p`).
#[inline]
pub fn position(q: MultiIndex, p: usize) -> usize {
    debug_assert!(q.order() <= p);
    // Blocks for qy' < qy have lengths p+1, p, .., p-qy+2.
    let qy = q.qy;
    qy * (p + 1) - qy * (qy.saturating_sub(1)) / 2 + q.qx
}

/// Number of multi-indices with `|q| <= p`.
pub const fn full_len(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// An ordered list of multi-indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    order: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    /// All `q` with `|q| <= order`, in canonical order.
    pub fn enumerate(order: usize) -> Self {
        let mut indices = Vec::with_capacity(full_len(order));
        for qy in 0..=order {
            for qx in 0..=(order - qy) {
                indices.push(MultiIndex::new(qx, qy));
            }
        }
        Self { order, indices }
    }

    /// Columns used by regular-cell stencils: every `q` with `|q| < order`,
    /// plus the top-order indices whose exponents are both even.
    pub fn reduced_regular(order: usize) -> Result<Self> {
        if order < 2 || order % 2 == 1 {
            return Err(Error::InvalidOrder(order));
        }
        Ok(Self::enumerate(order).filter(|q| q.order() < order || q.both_even()))
    }

    /// Keeps the indices accepted by `keep`, preserving order.
    pub fn filter(&self, keep: impl Fn(MultiIndex) -> bool) -> Self {
        Self {
            order: self.order,
            indices: self.indices.iter().copied().filter(|&q| keep(q)).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, k: usize) -> MultiIndex {
        self.indices[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        self.indices.iter().copied()
    }

    pub fn as_slice(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Position of `q` in this set, if present.
    pub fn position_of(&self, q: MultiIndex) -> Option<usize> {
        if q.order() > self.order {
            return None;
        }
        if self.indices.len() == full_len(self.order) {
            return Some(position(q, self.order));
        }
        self.indices.iter().position(|&x| x == q)
    }

    pub fn contains(&self, q: MultiIndex) -> bool {
        self.position_of(q).is_some()
    }
}

/// Exact factorials and binomial coefficients, stored as `f64` after being
/// built in `u128` arithmetic.
#[derive(Debug, Clone)]
pub struct Binomials {
    table: Vec<Vec<f64>>,
    factorials: Vec<f64>,
}

impl Binomials {
    pub fn new(max_n: usize) -> Self {
        let mut exact: Vec<Vec<u128>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = exact[n - 1][k - 1] + exact[n - 1][k];
            }
            exact.push(row);
        }
        let mut fact = vec![1u128; max_n + 1];
        for n in 1..=max_n {
            fact[n] = fact[n - 1] * n as u128;
        }
        Self {
            table: exact
                .into_iter()
                .map(|r| r.into_iter().map(|v| v as f64).collect())
                .collect(),
            factorials: fact.into_iter().map(|v| v as f64).collect(),
        }
    }

    #[inline]
    pub fn choose(&self, n: usize, k: usize) -> f64 {
        self.table[n][k]
    }

    #[inline]
    pub fn factorial(&self, n: usize) -> f64 {
        self.factorials[n]
    }

    pub fn max_n(&self) -> usize {
        self.table.len() - 1
    }
}

/// Shared table large enough for every order this crate supports (P <= 6,
/// moments to 2P + 2).
pub fn binomials() -> &'static Binomials {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Binomials> = OnceLock::new();
    TABLE.get_or_init(|| Binomials::new(32))
}

/// Re-centers a moment vector.
///
/// `moments` holds integrals of `(x - a)^q` for `|q| <= order`; the result
/// holds integrals of `(x - b)^q` where `a - b = shift`.
pub fn shift_moments(
    moments: &[f64],
    order: usize,
    shift: (f64, f64),
    out_order: usize,
) -> Vec<f64> {
    assert!(out_order <= order);
    let b = binomials();
    let (dx, dy) = shift;
    let mut px = vec![1.0; out_order + 1];
    let mut py = vec![1.0; out_order + 1];
    for k in 1..=out_order {
        px[k] = px[k - 1] * dx;
        py[k] = py[k - 1] * dy;
    }
    let set = MultiIndexSet::enumerate(out_order);
    let mut out = Vec::with_capacity(set.len());
    for q in set.iter() {
        let mut acc = 0.0;
        for ax in 0..=q.qx {
            let cx = b.choose(q.qx, ax) * px[q.qx - ax];
            for ay in 0..=q.qy {
                let a = MultiIndex::new(ax, ay);
                acc += cx * b.choose(q.qy, ay) * py[q.qy - ay] * moments[position(a, order)];
            }
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(set: &MultiIndexSet) -> Vec<(usize, usize)> {
        set.iter().map(|q| (q.qx, q.qy)).collect()
    }

    #[test]
    fn enumerate_small_orders() {
        assert_eq!(pairs(&MultiIndexSet::enumerate(0)), vec![(0, 0)]);
        assert_eq!(
            pairs(&MultiIndexSet::enumerate(1)),
            vec![(0, 0), (1, 0), (0, 1)]
        );
        assert_eq!(
            pairs(&MultiIndexSet::enumerate(2)),
            vec![(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)]
        );
    }

    #[test]
    fn reduced_regular_sets() {
        let r2 = MultiIndexSet::reduced_regular(2).unwrap();
        assert_eq!(pairs(&r2), vec![(0, 0), (1, 0), (2, 0), (0, 1), (0, 2)]);
        let r4 = MultiIndexSet::reduced_regular(4).unwrap();
        assert_eq!(r4.len(), 13);
        assert!(!r4.contains(MultiIndex::new(3, 1)));
        assert!(!r4.contains(MultiIndex::new(1, 3)));
        let r6 = MultiIndexSet::reduced_regular(6).unwrap();
        assert_eq!(r6.len(), 25);
        for q in [(5, 1), (3, 3), (1, 5)] {
            assert!(!r6.contains(MultiIndex::new(q.0, q.1)));
        }
        assert!(MultiIndexSet::reduced_regular(3).is_err());
        assert!(MultiIndexSet::reduced_regular(0).is_err());
    }

    #[test]
    fn reduced_is_subset_and_excludes_only_odd_top_order() {
        for p in [2, 4, 6] {
            let full = MultiIndexSet::enumerate(p);
            let red = MultiIndexSet::reduced_regular(p).unwrap();
            for q in red.iter() {
                assert!(full.contains(q));
            }
            for q in full.iter().filter(|&q| !red.contains(q)) {
                assert_eq!(q.order(), p);
                assert!(q.qx % 2 == 1 || q.qy % 2 == 1);
            }
        }
    }

    #[test]
    fn binomials_are_exact() {
        let b = binomials();
        assert_eq!(b.choose(10, 3), 120.0);
        assert_eq!(b.choose(26, 13), 10_400_600.0);
        assert_eq!(b.factorial(10), 3_628_800.0);
    }

    #[test]
    fn shift_moments_of_a_point_mass() {
        // Unit mass at a = (0.3, -0.2) relative to the old center.
        let order = 3;
        let set = MultiIndexSet::enumerate(order);
        let m: Vec<f64> = set.iter().map(|q| q.eval(0.3, -0.2)).collect();
        let shifted = shift_moments(&m, order, (1.0, 2.0), order);
        for (k, q) in set.iter().enumerate() {
            approx::assert_relative_eq!(shifted[k], q.eval(1.3, 1.8), max_relative = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn position_round_trip(p in 0usize..14) {
            let set = MultiIndexSet::enumerate(p);
            prop_assert_eq!(set.len(), full_len(p));
            for (k, q) in set.iter().enumerate() {
                prop_assert_eq!(position(q, p), k);
                prop_assert_eq!(set.position_of(q), Some(k));
            }
        }

        #[test]
        fn ordering_is_monotone(p in 1usize..12) {
            let set = MultiIndexSet::enumerate(p);
            for w in set.as_slice().windows(2) {
                let (a, b) = (w[0], w[1]);
                prop_assert!(b.qy > a.qy || (b.qy == a.qy && b.qx == a.qx + 1));
                if b.qy > a.qy {
                    prop_assert_eq!(b.qy, a.qy + 1);
                    prop_assert_eq!(b.qx, 0);
                }
            }
        }
    }
}

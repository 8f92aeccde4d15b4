//! Execution trace and constraints for the statement `v > x`.
//!
//! Columns over 64 rows: `V` (constant v), `B` (bits of d = v - x - 1),
//! `P` (powers of two) and `A` (running sum of `B_t * P_t`). The last row
//! pins `A_63 = V - x - 1`.
//!
//! Over the field alone that statement is unsound: with 64 free bits a
//! prover can make `A_63` equal `p - k` and "prove" `v = x + 1 - k`. The
//! two top bits are therefore forced to zero, which keeps `A_63 < 2^62`,
//! and `x` is limited to `< 2^62`, so `v = x + 1 + d` never wraps.

use super::field::GElement;
use super::StarkError;

pub const TRACE_LEN: usize = 64;
/// Bits of `d` that may be set.
pub const RANGE_BITS: u32 = 62;
pub const MAX_THRESHOLD: u64 = (1 << RANGE_BITS) - 1;

pub const COL_V: usize = 0;
pub const COL_B: usize = 1;
pub const COL_P: usize = 2;
pub const COL_A: usize = 3;
pub const NUM_COLUMNS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceTable {
    pub columns: [Vec<GElement>; NUM_COLUMNS],
}

impl TraceTable {
    pub fn row(&self, t: usize) -> [GElement; NUM_COLUMNS] {
        std::array::from_fn(|c| self.columns[c][t])
    }
}

pub fn threshold_trace(v: u64, x: u64) -> Result<TraceTable, StarkError> {
    if v <= x {
        return Err(StarkError::ThresholdNotMet { v, x });
    }
    if x > MAX_THRESHOLD {
        return Err(StarkError::OutOfRange(x));
    }
    let d = v - x - 1;
    if d >> RANGE_BITS != 0 {
        return Err(StarkError::OutOfRange(v));
    }
    Ok(trace_from_bits(GElement::new(v), d))
}

/// Trace with `V = v` and `B` the 64 bits of `bits`, no checks applied.
pub fn trace_from_bits(v: GElement, bits: u64) -> TraceTable {
    let mut cols: [Vec<GElement>; NUM_COLUMNS] = Default::default();
    let mut acc = GElement::ZERO;
    for t in 0..TRACE_LEN {
        let b = GElement::new((bits >> t) & 1);
        let p = GElement::new(2).pow(t as u64);
        acc += b * p;
        cols[COL_V].push(v);
        cols[COL_B].push(b);
        cols[COL_P].push(p);
        cols[COL_A].push(acc);
    }
    TraceTable { columns: cols }
}

/// Direct row-by-row check of every constraint.
pub fn air_check(trace: &TraceTable, x: u64) -> bool {
    if trace.columns.iter().any(|c| c.len() != TRACE_LEN) || x > MAX_THRESHOLD {
        return false;
    }
    let [v, b, p, a] = &trace.columns;
    let one = GElement::ONE;
    let last = TRACE_LEN - 1;
    let rows_ok = (0..TRACE_LEN).all(|t| b[t] * (b[t] - one) == GElement::ZERO);
    let steps_ok = (0..last).all(|t| {
        p[t + 1] == p[t].double() && v[t + 1] == v[t] && a[t + 1] == a[t] + b[t + 1] * p[t + 1]
    });
    rows_ok
        && steps_ok
        && p[0] == one
        && a[0] == b[0] * p[0]
        && a[last] == v[0] - GElement::new(x) - one
        && b[last - 1].is_zero()
        && b[last].is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stark::field::MODULUS;

    #[test]
    fn small_examples() {
        let t = threshold_trace(1, 0).unwrap();
        assert!(t.columns[COL_B].iter().all(|b| b.is_zero()));
        assert_eq!(t.columns[COL_A][63], GElement::ZERO);
        let t = threshold_trace(12, 10).unwrap();
        assert_eq!(t.columns[COL_B][0], GElement::ONE);
        assert!(t.columns[COL_B][1..].iter().all(|b| b.is_zero()));
        assert!(air_check(&t, 10));
        assert!(!air_check(&t, 9));
    }

    #[test]
    fn exhaustive_small_range() {
        for v in 0..=255u64 {
            for x in 0..=255u64 {
                match threshold_trace(v, x) {
                    Ok(t) => {
                        assert!(v > x);
                        assert!(air_check(&t, x));
                    }
                    Err(StarkError::ThresholdNotMet { .. }) => assert!(v <= x),
                    Err(e) => panic!("unexpected {e}"),
                }
            }
        }
    }

    #[test]
    fn single_cell_mutations_fail() {
        let t = threshold_trace(100_000, 50_000).unwrap();
        let mut bad = t.clone();
        bad.columns[COL_B][5] = GElement::new(2);
        assert!(!air_check(&bad, 50_000));
        let mut bad = t.clone();
        bad.columns[COL_V][10] += GElement::ONE;
        assert!(!air_check(&bad, 50_000));
        let mut bad = t.clone();
        bad.columns[COL_A][63] += GElement::ONE;
        assert!(!air_check(&bad, 50_000));
        let mut bad = t;
        bad.columns[COL_P][0] = GElement::new(2);
        assert!(!air_check(&bad, 50_000));
    }

    #[test]
    fn wraparound_forgery_needs_top_bits() {
        // v = 3, x = 5: v - x - 1 = -3 = p - 3 in the field.
        let d = MODULUS - 3;
        let forged = trace_from_bits(GElement::new(3), d);
        // Every constraint except the top-bit pins holds.
        assert_eq!(forged.columns[COL_A][63], GElement::new(3) - GElement::new(5) - GElement::ONE);
        assert!(!forged.columns[COL_B][63].is_zero());
        assert!(!air_check(&forged, 5));
    }

    #[test]
    fn range_limits() {
        assert!(matches!(threshold_trace(u64::MAX, MAX_THRESHOLD + 1), Err(StarkError::OutOfRange(_))));
        assert!(matches!(threshold_trace(u64::MAX, 0), Err(StarkError::OutOfRange(_))));
        let t = threshold_trace(1 << 62, 0).unwrap();
        assert!(air_check(&t, 0));
    }
}

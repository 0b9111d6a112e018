//! Greedy backward decomposition of `[0, N)` into unit steps and bad jumps.
//!
//! Walking down from `N`, each time `n` either contributes a unit interval
//! `[n - 1, n)` or, when the caller's rule declares a bad jump of length
//! `l` at `n`, the whole block `[n - l, n)` at once. The recursion is
//! `n_{i+1} = n_i - 1` or `n_{i+1} = n_i - l_i`; it terminates at `0` and the
//! recorded intervals partition `[0, N)` exactly.

use crate::error::{Error, Result};
use crate::subadd::goodtimes::GoodTimeReport;

/// How one interval of the partition was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalTag {
    UnitStep,
    /// A jump over `l` times; the payload is the jump length.
    BadJump(usize),
}

/// Half-open interval `[start, end)` with its production tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
    pub tag: IntervalTag,
}

/// The full partition, intervals listed from the top (`end = horizon`) down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionRecord {
    pub horizon: usize,
    pub intervals: Vec<Interval>,
}

impl DecompositionRecord {
    /// Check the intervals tile `[0, horizon)` exactly: contiguous,
    /// descending, first ends at the horizon, last starts at zero.
    pub fn verify_partition(&self) -> Result<()> {
        if self.horizon == 0 {
            return if self.intervals.is_empty() {
                Ok(())
            } else {
                Err(Error::Domain("zero horizon admits only the empty partition".into()))
            };
        }
        let mut expected_end = self.horizon;
        for iv in &self.intervals {
            if iv.end != expected_end {
                return Err(Error::Domain(format!(
                    "interval [{}, {}) does not abut expected end {}",
                    iv.start, iv.end, expected_end
                )));
            }
            if iv.start >= iv.end {
                return Err(Error::Domain(format!(
                    "interval [{}, {}) is empty or reversed",
                    iv.start, iv.end
                )));
            }
            let width = iv.end - iv.start;
            match iv.tag {
                IntervalTag::UnitStep if width != 1 => {
                    return Err(Error::Domain(format!(
                        "unit interval [{}, {}) has width {}",
                        iv.start, iv.end, width
                    )));
                }
                IntervalTag::BadJump(l) if width != l => {
                    return Err(Error::Domain(format!(
                        "bad jump [{}, {}) disagrees with its length tag {}",
                        iv.start, iv.end, l
                    )));
                }
                _ => {}
            }
            expected_end = iv.start;
        }
        if expected_end != 0 {
            return Err(Error::Domain(format!("partition stops at {expected_end}, not 0")));
        }
        Ok(())
    }

    pub fn unit_count(&self) -> usize {
        self.intervals.iter().filter(|iv| iv.tag == IntervalTag::UnitStep).count()
    }

    pub fn bad_count(&self) -> usize {
        self.intervals.len() - self.unit_count()
    }

    /// Total length covered by bad jumps.
    pub fn bad_mass(&self) -> usize {
        self.intervals
            .iter()
            .filter_map(|iv| match iv.tag {
                IntervalTag::BadJump(_) => Some(iv.end - iv.start),
                IntervalTag::UnitStep => None,
            })
            .sum()
    }
}

/// Run the greedy recursion from `n` down to `0`. `bad_jump(k)` returns
/// `Some(l)` to jump the block `[k - l, k)`, `None` to take a unit step.
/// Jump lengths outside `[1, k]` violate the contract and are an error.
pub fn greedy_decompose(
    n: usize,
    bad_jump: impl Fn(usize) -> Option<usize>,
) -> Result<DecompositionRecord> {
    let mut intervals = Vec::new();
    let mut cursor = n;
    while cursor > 0 {
        match bad_jump(cursor) {
            None => {
                intervals.push(Interval {
                    start: cursor - 1,
                    end: cursor,
                    tag: IntervalTag::UnitStep,
                });
                cursor -= 1;
            }
            Some(l) => {
                if l == 0 || l > cursor {
                    return Err(Error::Domain(format!(
                        "bad jump of length {l} at time {cursor} leaves [1, {cursor}]"
                    )));
                }
                intervals.push(Interval {
                    start: cursor - l,
                    end: cursor,
                    tag: IntervalTag::BadJump(l),
                });
                cursor -= l;
            }
        }
    }
    let record = DecompositionRecord { horizon: n, intervals };
    record.verify_partition()?;
    Ok(record)
}

/// Decompose using a good-time report: good times step by one unit, bad
/// times jump to the nearest good time below (which exists, since `0` is
/// always good).
pub fn decompose_from_report(report: &GoodTimeReport, n: usize) -> Result<DecompositionRecord> {
    if n > report.horizon {
        return Err(Error::OutOfRange { what: "decomposition start", index: n, max: report.horizon });
    }
    greedy_decompose(n, |k| {
        if report.is_good(k) {
            None
        } else {
            let prev_good = report
                .good_times
                .iter()
                .rev()
                .copied()
                .find(|&g| g < k)
                .unwrap_or(0);
            Some(k - prev_good)
        }
    })
}

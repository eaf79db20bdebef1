//! Exhaustive non-signalling checks.
//!
//! Every condition has the same shape: on one side, sum the outputs at a set
//! of positions `S` and require the resulting marginal (jointly with all other
//! outputs on both sides) not to depend on that side's inputs at `S`.
//!
//! * Alice↔Bob: `S` is every position, on each side in turn.
//! * Time-ordered: for each cut `i`, `S = {i, …, n}` on each side.
//! * Subset: a caller-chosen `S` on one side.
//!
//! Inputs are compared against a reference input whose digits in `S` are all
//! zero, which covers every pair by transitivity.

use std::fmt;

use rayon::prelude::*;

use crate::bits;
use crate::error::{Error, Result};
use crate::system::{all_settings, ensure_within_cap, SystemEvaluator};
use crate::value::{Number, Value};

/// Witnesses retained per report.
pub const MAX_VIOLATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Alice,
    Bob,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Alice => "alice",
            Side::Bob => "bob",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    Ab,
    TimeOrdered,
    TimeOrderedAlice,
    TimeOrderedBob,
    Subset,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Ab => "ab",
            Condition::TimeOrdered => "time-ordered",
            Condition::TimeOrderedAlice => "time-ordered-alice",
            Condition::TimeOrderedBob => "time-ordered-bob",
            Condition::Subset => "subset",
        })
    }
}

/// Constraint set a partition's parts must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    Ab,
    TimeOrdered,
}

/// Two inputs that give different marginals.
///
/// `x` and `y` carry `*` at the summed positions; `inputs` is the reference
/// input and `alt_inputs` the one that differs from it inside the summed set.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub side: Side,
    /// 1-based positions summed over (and varied) on `side`.
    pub summed: Vec<usize>,
    pub x: String,
    pub y: String,
    pub inputs: (Vec<usize>, Vec<usize>),
    pub alt_inputs: (Vec<usize>, Vec<usize>),
    pub left: Number,
    pub right: Number,
    sort_key: [usize; 6],
}

impl Violation {
    /// Recomputes both marginals from scratch by direct evaluation.
    pub fn replay<V: Value>(&self, system: &dyn SystemEvaluator<V>) -> (Number, Number) {
        let unit = system.unit();
        let left = marginal_by_pattern(system, &self.x, &self.y, &self.inputs.0, &self.inputs.1);
        let right = marginal_by_pattern(
            system,
            &self.x,
            &self.y,
            &self.alt_inputs.0,
            &self.alt_inputs.1,
        );
        (left.normalize(&unit), right.normalize(&unit))
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} side, summed {:?}: x={} y={} u={:?} v={:?} gives {} but u={:?} v={:?} gives {}",
            self.side,
            self.summed,
            self.x,
            self.y,
            self.inputs.0,
            self.inputs.1,
            self.left.decimal(),
            self.alt_inputs.0,
            self.alt_inputs.1,
            self.right.decimal()
        )
    }
}

/// Sums `P(x, y | u, v)` over every completion of the `*` positions.
fn marginal_by_pattern<V: Value>(
    system: &dyn SystemEvaluator<V>,
    x: &str,
    y: &str,
    u: &[usize],
    v: &[usize],
) -> V {
    let parse = |s: &str| -> (usize, usize) {
        let n = s.len();
        let mut fixed = 0;
        let mut free = 0;
        for (k, c) in s.chars().enumerate() {
            let pos = k + 1;
            match c {
                '1' => fixed |= 1 << (n - pos),
                '*' => free |= 1 << (n - pos),
                _ => {}
            }
        }
        (fixed, free)
    };
    let (xf, xs) = parse(x);
    let (yf, ys) = parse(y);
    let mut total = V::zero_value();
    // Enumerate submasks of the free positions.
    let mut xsub = xs;
    loop {
        let mut ysub = ys;
        loop {
            total = total + system.evaluate(xf | xsub, yf | ysub, u, v);
            if ysub == 0 {
                break;
            }
            ysub = (ysub - 1) & ys;
        }
        if xsub == 0 {
            break;
        }
        xsub = (xsub - 1) & xs;
    }
    total
}

#[derive(Clone, Debug)]
pub struct NsReport {
    pub condition: Condition,
    pub passed: bool,
    /// First violations in lexicographic witness order.
    pub violations: Vec<Violation>,
    pub violation_count: u64,
    pub checks_performed: u64,
}

impl NsReport {
    fn merge(condition: Condition, parts: Vec<NsReport>) -> NsReport {
        let mut violations: Vec<Violation> =
            parts.iter().flat_map(|r| r.violations.iter().cloned()).collect();
        violations.sort_by_key(|v| v.sort_key);
        violations.truncate(MAX_VIOLATIONS);
        let violation_count = parts.iter().map(|r| r.violation_count).sum();
        NsReport {
            condition,
            passed: violation_count == 0,
            violations,
            violation_count,
            checks_performed: parts.iter().map(|r| r.checks_performed).sum(),
        }
    }
}

struct SliceOutcome {
    violations: Vec<Violation>,
    count: u64,
    checks: u64,
}

/// Runs the marginal-equality test for each mask on one side.
fn scan_side<V: Value>(
    system: &dyn SystemEvaluator<V>,
    side: Side,
    masks: &[usize],
    condition: Condition,
    cap: u128,
) -> Result<NsReport> {
    let n = system.n();
    let radix = system.n_settings();
    ensure_within_cap(n, radix, cap)?;
    let settings = all_settings(n, radix);
    let size = 1usize << n;
    let side_tag = match side {
        Side::Alice => 0,
        Side::Bob => 1,
    };

    // Reference input for each (mask, code): digits in the mask zeroed.
    let references: Vec<Vec<usize>> = masks
        .iter()
        .map(|&mask| {
            settings
                .iter()
                .map(|s| {
                    let zeroed: Vec<usize> = s
                        .iter()
                        .enumerate()
                        .map(|(k, &d)| if mask >> (n - 1 - k) & 1 == 1 { 0 } else { d })
                        .collect();
                    bits::settings_code(&zeroed, radix)
                })
                .collect()
        })
        .collect();

    let slices: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|outer| (0..size).map(move |out| (outer, out)))
        .collect();

    let outcomes: Vec<SliceOutcome> = slices
        .par_iter()
        .map(|&(outer, fixed_out)| {
            let mut result = SliceOutcome {
                violations: Vec::new(),
                count: 0,
                checks: 0,
            };
            let mut table = Vec::with_capacity(size);
            let mut stored: Vec<Vec<Option<Vec<V>>>> =
                vec![vec![None; settings.len()]; masks.len()];
            for inner in 0..settings.len() {
                match side {
                    Side::Alice => {
                        system.alice_vector(fixed_out, &settings[inner], &settings[outer], &mut table)
                    }
                    Side::Bob => {
                        system.bob_vector(fixed_out, &settings[outer], &settings[inner], &mut table)
                    }
                }
                for (m, &mask) in masks.iter().enumerate() {
                    let mut marginal = vec![V::zero_value(); size];
                    for (o, val) in table.iter().enumerate() {
                        let key = o & !mask;
                        marginal[key] = marginal[key].clone() + val.clone();
                    }
                    let reference = references[m][inner];
                    if reference == inner {
                        stored[m][inner] = Some(marginal);
                        continue;
                    }
                    let base = stored[m][reference]
                        .as_ref()
                        .expect("reference input precedes its variants");
                    for key in (0..size).filter(|k| k & mask == 0) {
                        result.checks += 1;
                        if base[key].agrees(&marginal[key]) {
                            continue;
                        }
                        result.count += 1;
                        if result.violations.len() >= MAX_VIOLATIONS {
                            continue;
                        }
                        let pattern = starred(key, mask, n);
                        let full = bits::to_string(fixed_out, n);
                        let (x, y) = match side {
                            Side::Alice => (pattern, full),
                            Side::Bob => (full, pattern),
                        };
                        let (inputs, alt_inputs) = match side {
                            Side::Alice => (
                                (settings[reference].clone(), settings[outer].clone()),
                                (settings[inner].clone(), settings[outer].clone()),
                            ),
                            Side::Bob => (
                                (settings[outer].clone(), settings[reference].clone()),
                                (settings[outer].clone(), settings[inner].clone()),
                            ),
                        };
                        result.violations.push(Violation {
                            side,
                            summed: positions(mask, n),
                            x,
                            y,
                            inputs,
                            alt_inputs,
                            left: base[key].normalize(&system.unit()),
                            right: marginal[key].normalize(&system.unit()),
                            sort_key: [side_tag, m, outer, fixed_out, inner, key],
                        });
                    }
                }
            }
            result
        })
        .collect();

    let mut violations: Vec<Violation> = Vec::new();
    let mut count = 0;
    let mut checks = 0;
    for o in outcomes {
        count += o.count;
        checks += o.checks;
        violations.extend(o.violations);
    }
    violations.sort_by_key(|v| v.sort_key);
    violations.truncate(MAX_VIOLATIONS);
    Ok(NsReport {
        condition,
        passed: count == 0,
        violations,
        violation_count: count,
        checks_performed: checks,
    })
}

fn starred(key: usize, mask: usize, n: usize) -> String {
    (1..=n)
        .map(|pos| {
            if bits::bit(mask, pos, n) == 1 {
                '*'
            } else if bits::bit(key, pos, n) == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

fn positions(mask: usize, n: usize) -> Vec<usize> {
    (1..=n).filter(|&pos| bits::bit(mask, pos, n) == 1).collect()
}

/// No signalling between Alice and Bob: each party's marginal is
/// independent of the other's inputs.
pub fn check_ab<V: Value>(system: &dyn SystemEvaluator<V>, cap: u128) -> Result<NsReport> {
    let all = (1usize << system.n()) - 1;
    let alice = scan_side(system, Side::Alice, &[all], Condition::Ab, cap)?;
    let bob = scan_side(system, Side::Bob, &[all], Condition::Ab, cap)?;
    Ok(NsReport::merge(Condition::Ab, vec![alice, bob]))
}

fn time_ordered_masks(n: usize) -> Vec<usize> {
    // Cut i sums positions i..n.
    (1..=n).map(|i| (1usize << (n - i + 1)) - 1).collect()
}

/// Time-ordered conditions on one side, every cut.
pub fn check_time_ordered_side<V: Value>(
    system: &dyn SystemEvaluator<V>,
    side: Side,
    cap: u128,
) -> Result<NsReport> {
    let condition = match side {
        Side::Alice => Condition::TimeOrderedAlice,
        Side::Bob => Condition::TimeOrderedBob,
    };
    scan_side(system, side, &time_ordered_masks(system.n()), condition, cap)
}

/// No signalling from later pairs to earlier ones, on both sides.
pub fn check_time_ordered<V: Value>(system: &dyn SystemEvaluator<V>, cap: u128) -> Result<NsReport> {
    let alice = check_time_ordered_side(system, Side::Alice, cap)?;
    let bob = check_time_ordered_side(system, Side::Bob, cap)?;
    Ok(NsReport::merge(Condition::TimeOrdered, vec![alice, bob]))
}

/// The marginal of everything outside `subset` on `side` (plus all of the
/// other side) must not depend on `side`'s inputs inside `subset`.
pub fn check_subset<V: Value>(
    system: &dyn SystemEvaluator<V>,
    side: Side,
    subset: &[usize],
    cap: u128,
) -> Result<NsReport> {
    let n = system.n();
    if subset.is_empty() {
        return Err(Error::InvalidParameter("subset must be nonempty".into()));
    }
    if let Some(bad) = subset.iter().find(|&&p| p == 0 || p > n) {
        return Err(Error::InvalidParameter(format!(
            "subset position {bad} outside 1..={n}"
        )));
    }
    let mask = bits::mask_of(subset, n);
    scan_side(system, side, &[mask], Condition::Subset, cap)
}

pub fn check<V: Value>(
    system: &dyn SystemEvaluator<V>,
    constraint: Constraint,
    cap: u128,
) -> Result<NsReport> {
    match constraint {
        Constraint::Ab => check_ab(system, cap),
        Constraint::TimeOrdered => check_time_ordered(system, cap),
    }
}

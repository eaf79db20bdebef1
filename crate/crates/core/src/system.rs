//! n-fold systems `P(x, y | u, v)` evaluated lazily, and Eve's partitions.
//!
//! Outputs `x`, `y` are packed bit strings (see [`crate::bits`]); settings
//! `u`, `v` are per-position indices in `0..N`. Values come back in the
//! system's own units, see [`SystemEvaluator::unit`].

use std::sync::Arc;

use num::{BigInt, Integer, One, ToPrimitive};
use rayon::prelude::*;

use crate::bits;
use crate::box_lab::SinglePairBox;
use crate::error::{Error, Result};
use crate::hash::PivotalProfile;
use crate::ns::{self, Constraint, NsReport};
use crate::value::{Number, Rat, Value};

/// Default cap on the size of an exhaustively enumerated state space.
pub const DEFAULT_EVAL_CAP: u128 = 1 << 26;

/// Number of `(x, y, u, v)` entries of an n-fold system, `(4N²)^n`.
pub fn state_space_size(n: usize, n_settings: usize) -> u128 {
    let per_pair = 4 * (n_settings as u128) * (n_settings as u128);
    (0..n).fold(1u128, |acc, _| acc.saturating_mul(per_pair))
}

pub fn ensure_within_cap(n: usize, n_settings: usize, cap: u128) -> Result<()> {
    let size = state_space_size(n, n_settings);
    if size > cap {
        return Err(Error::Infeasible { size, cap });
    }
    Ok(())
}

/// Every setting vector in `{0..N}^n`, in mixed-radix order.
pub fn all_settings(n: usize, n_settings: usize) -> Vec<Vec<usize>> {
    let count = n_settings.pow(n as u32);
    (0..count).map(|c| bits::settings_of(c, n, n_settings)).collect()
}

pub trait SystemEvaluator<V: Value>: Send + Sync {
    /// Number of box pairs.
    fn n(&self) -> usize;

    fn n_settings(&self) -> usize;

    /// The value standing for probability one.
    fn unit(&self) -> V;

    fn evaluate(&self, x: usize, y: usize, u: &[usize], v: &[usize]) -> V;

    /// `P(·, y | u, v)` for all packed `x`.
    fn alice_vector(&self, y: usize, u: &[usize], v: &[usize], out: &mut Vec<V>) {
        out.clear();
        out.extend((0..1usize << self.n()).map(|x| self.evaluate(x, y, u, v)));
    }

    /// `P(x, · | u, v)` for all packed `y`.
    fn bob_vector(&self, x: usize, u: &[usize], v: &[usize], out: &mut Vec<V>) {
        out.clear();
        out.extend((0..1usize << self.n()).map(|y| self.evaluate(x, y, u, v)));
    }

    /// Alice's output distribution when it is known in closed form to be the
    /// same for every input.
    fn input_free_alice_distribution(&self) -> Option<Vec<V>> {
        None
    }
}

/// [`SystemEvaluator::evaluate`] with bit-vector arguments and full
/// validation of dimensions and setting ranges.
pub fn evaluate_checked<V: Value, S: SystemEvaluator<V> + ?Sized>(
    system: &S,
    x: &[u8],
    y: &[u8],
    u: &[usize],
    v: &[usize],
) -> Result<V> {
    let n = system.n();
    for (name, len) in [("x", x.len()), ("y", y.len()), ("u", u.len()), ("v", v.len())] {
        if len != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} has length {len}, system has {n} pairs"
            )));
        }
    }
    if let Some(bad) = x.iter().chain(y).find(|&&b| b > 1) {
        return Err(Error::InvalidParameter(format!("output bit {bad} is not 0 or 1")));
    }
    let range = system.n_settings();
    if let Some(bad) = u.iter().chain(v).find(|&&s| s >= range) {
        return Err(Error::SettingOutOfRange(format!(
            "setting index {bad} not below {range}"
        )));
    }
    Ok(system.evaluate(bits::pack(x), bits::pack(y), u, v))
}

/// `Σ_y P(x, y | u, v)` for every `x`, by direct summation.
pub fn alice_marginal_at<V: Value, S: SystemEvaluator<V> + ?Sized>(
    system: &S,
    u: &[usize],
    v: &[usize],
) -> Vec<V> {
    let size = 1usize << system.n();
    let mut acc = vec![V::zero_value(); size];
    let mut row = Vec::with_capacity(size);
    for y in 0..size {
        system.alice_vector(y, u, v, &mut row);
        for (a, r) in acc.iter_mut().zip(row.drain(..)) {
            *a = a.clone() + r;
        }
    }
    acc
}

fn product_unit<V: Value>(units: impl Iterator<Item = V>) -> V {
    units.fold(V::from_int(1), |acc, u| acc * u)
}

/// Expands per-position 2-vectors into their tensor product over packed
/// strings, position 1 most significant.
fn tensor_fill<V: Value>(n: usize, mut factor: impl FnMut(usize, usize) -> V, out: &mut Vec<V>) {
    out.clear();
    out.push(V::from_int(1));
    let mut next = Vec::with_capacity(1 << n);
    for pos in 1..=n {
        next.clear();
        let f0 = factor(pos, 0);
        let f1 = factor(pos, 1);
        for acc in out.iter() {
            next.push(acc.clone() * f0.clone());
            next.push(acc.clone() * f1.clone());
        }
        std::mem::swap(out, &mut next);
    }
}

/// `Π_j box_j(u_j, v_j, x_j, y_j)`.
#[derive(Clone, Debug)]
pub struct ProductSystem<V> {
    boxes: Vec<SinglePairBox<V>>,
    unit: V,
}

impl<V: Value> ProductSystem<V> {
    pub fn new(boxes: Vec<SinglePairBox<V>>) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::InvalidParameter("a system needs at least one pair".into()))?;
        if boxes.iter().any(|b| b.n_settings() != first.n_settings()) {
            return Err(Error::DimensionMismatch("boxes disagree on N".into()));
        }
        check_width(boxes.len())?;
        let unit = product_unit(boxes.iter().map(|b| b.unit().clone()));
        Ok(ProductSystem { boxes, unit })
    }

    /// `n` identical copies of `b`.
    pub fn iid(b: &SinglePairBox<V>, n: usize) -> Result<Self> {
        Self::new(vec![b.clone(); n])
    }

    pub fn boxes(&self) -> &[SinglePairBox<V>] {
        &self.boxes
    }
}

fn check_width(n: usize) -> Result<()> {
    if n == 0 || n > 24 {
        return Err(Error::InvalidParameter(format!(
            "number of pairs must be in 1..=24, got {n}"
        )));
    }
    Ok(())
}

impl<V: Value> SystemEvaluator<V> for ProductSystem<V> {
    fn n(&self) -> usize {
        self.boxes.len()
    }

    fn n_settings(&self) -> usize {
        self.boxes[0].n_settings()
    }

    fn unit(&self) -> V {
        self.unit.clone()
    }

    fn evaluate(&self, x: usize, y: usize, u: &[usize], v: &[usize]) -> V {
        let n = self.boxes.len();
        self.boxes
            .iter()
            .enumerate()
            .fold(V::from_int(1), |acc, (j, b)| {
                let pos = j + 1;
                acc * b
                    .get(u[j], v[j], bits::bit(x, pos, n), bits::bit(y, pos, n))
                    .clone()
            })
    }

    fn alice_vector(&self, y: usize, u: &[usize], v: &[usize], out: &mut Vec<V>) {
        let n = self.boxes.len();
        tensor_fill(
            n,
            |pos, xb| {
                self.boxes[pos - 1]
                    .get(u[pos - 1], v[pos - 1], xb, bits::bit(y, pos, n))
                    .clone()
            },
            out,
        );
    }

    fn bob_vector(&self, x: usize, u: &[usize], v: &[usize], out: &mut Vec<V>) {
        let n = self.boxes.len();
        tensor_fill(
            n,
            |pos, yb| {
                self.boxes[pos - 1]
                    .get(u[pos - 1], v[pos - 1], bits::bit(x, pos, n), yb)
                    .clone()
            },
            out,
        );
    }

    fn input_free_alice_distribution(&self) -> Option<Vec<V>> {
        let n = self.boxes.len();
        let mut out = Vec::new();
        tensor_fill(n, |pos, xb| self.boxes[pos - 1].alice_marginal(0, 0, xb), &mut out);
        Some(out)
    }
}

/// The adversary's part `P^z`: the iid base system with box `i(x)` replaced
/// by the box biased toward `σ(x)` (part 0) or `1 − σ(x)` (part 1).
#[derive(Clone, Debug)]
pub struct AttackedSystem<V> {
    base: SinglePairBox<V>,
    biased: [SinglePairBox<V>; 2],
    profile: Arc<PivotalProfile>,
    z: u8,
    unit: V,
}

impl<V: Value> AttackedSystem<V> {
    /// `biased[s]` must be `base` biased toward `s`.
    pub fn new(
        base: SinglePairBox<V>,
        biased: [SinglePairBox<V>; 2],
        profile: Arc<PivotalProfile>,
        z: u8,
    ) -> Result<Self> {
        if z > 1 {
            return Err(Error::InvalidParameter(format!("part index must be 0 or 1, got {z}")));
        }
        if biased.iter().any(|b| b.n_settings() != base.n_settings()) {
            return Err(Error::DimensionMismatch("biased boxes disagree on N".into()));
        }
        if !profile.is_complete() {
            return Err(Error::Precondition(
                "pivotal profile does not cover every string".into(),
            ));
        }
        check_width(profile.n())?;
        let unit = product_unit(std::iter::repeat_n(base.unit().clone(), profile.n()));
        Ok(AttackedSystem {
            base,
            biased,
            profile,
            z,
            unit,
        })
    }

    pub fn z(&self) -> u8 {
        self.z
    }

    pub fn profile(&self) -> &PivotalProfile {
        &self.profile
    }

    /// `(i(x), σ')` where `σ'` is the direction this part biases toward.
    #[inline]
    pub fn biased_position(&self, x: usize) -> (usize, u8) {
        let p = self.profile.pivot(x).expect("complete profile");
        (p.index, p.sigma ^ self.z)
    }

    /// Closed-form `Σ_y P^z(x, y | u, v)`; the same for every `(u, v)`.
    pub fn alice_output_distribution(&self) -> Vec<V> {
        let n = self.profile.n();
        (0..1usize << n)
            .map(|x| {
                let (i, s) = self.biased_position(x);
                (1..=n).fold(V::from_int(1), |acc, pos| {
                    let b = if pos == i { &self.biased[s as usize] } else { &self.base };
                    acc * b.alice_marginal(0, 0, bits::bit(x, pos, n))
                })
            })
            .collect()
    }
}

impl<V: Value> SystemEvaluator<V> for AttackedSystem<V> {
    fn n(&self) -> usize {
        self.profile.n()
    }

    fn n_settings(&self) -> usize {
        self.base.n_settings()
    }

    fn unit(&self) -> V {
        self.unit.clone()
    }

    fn evaluate(&self, x: usize, y: usize, u: &[usize], v: &[usize]) -> V {
        let n = self.profile.n();
        let (i, s) = self.biased_position(x);
        (1..=n).fold(V::from_int(1), |acc, pos| {
            let b = if pos == i { &self.biased[s as usize] } else { &self.base };
            acc * b
                .get(u[pos - 1], v[pos - 1], bits::bit(x, pos, n), bits::bit(y, pos, n))
                .clone()
        })
    }

    fn alice_vector(&self, y: usize, u: &[usize], v: &[usize], out: &mut Vec<V>) {
        // Walk the prefix tree; once a prefix is pivotal, the next position
        // uses the biased box and the rest of the subtree stays unbiased.
        let n = self.profile.n();
        let mut level: Vec<(V, bool)> = vec![(V::from_int(1), false)];
        let mut next = Vec::with_capacity(1 << n);
        for pos in 1..=n {
            next.clear();
            let (a, b, yb) = (u[pos - 1], v[pos - 1], bits::bit(y, pos, n));
            for (p, (acc, done)) in level.iter().enumerate() {
                let pivot = if *done {
                    None
                } else {
                    self.profile.pivot_at_prefix(pos - 1, p)
                };
                for xb in 0..2 {
                    let cell = match pivot {
                        Some(sigma) => self.biased[(sigma ^ self.z) as usize].get(a, b, xb, yb),
                        None => self.base.get(a, b, xb, yb),
                    };
                    next.push((acc.clone() * cell.clone(), *done || pivot.is_some()));
                }
            }
            std::mem::swap(&mut level, &mut next);
        }
        out.clear();
        out.extend(level.into_iter().map(|(v, _)| v));
    }

    fn bob_vector(&self, x: usize, u: &[usize], v: &[usize], out: &mut Vec<V>) {
        let n = self.profile.n();
        let (i, s) = self.biased_position(x);
        tensor_fill(
            n,
            |pos, yb| {
                let b = if pos == i { &self.biased[s as usize] } else { &self.base };
                b.get(u[pos - 1], v[pos - 1], bits::bit(x, pos, n), yb).clone()
            },
            out,
        );
    }

    fn input_free_alice_distribution(&self) -> Option<Vec<V>> {
        Some(self.alice_output_distribution())
    }
}

pub struct Part<V> {
    pub weight: Rat,
    pub system: Arc<dyn SystemEvaluator<V>>,
}

impl<V> Clone for Part<V> {
    fn clone(&self) -> Self {
        Part {
            weight: self.weight.clone(),
            system: Arc::clone(&self.system),
        }
    }
}

/// A convex decomposition `{(p^z, P^z)}` of a base system.
#[derive(Clone)]
pub struct Partition<V> {
    pub parts: Vec<Part<V>>,
}

impl<V: Value> Partition<V> {
    pub fn new(parts: Vec<Part<V>>) -> Self {
        Partition { parts }
    }

    pub fn weights(&self) -> Vec<Rat> {
        self.parts.iter().map(|p| p.weight.clone()).collect()
    }
}

/// One entry `(x, y, u, v)` of a system, for failure reports.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryWitness {
    pub x: String,
    pub y: String,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct PartCheck {
    pub weight: Rat,
    pub nonnegative: bool,
    pub normalized: bool,
    pub problems: Vec<EntryWitness>,
    pub constraint: NsReport,
}

impl PartCheck {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.normalized && self.constraint.passed
    }
}

#[derive(Clone, Debug)]
pub struct PartitionReport {
    /// Weights form a probability distribution.
    pub weights_ok: bool,
    /// The weighted parts reproduce the base pointwise.
    pub convex_ok: bool,
    pub convex_violations: Vec<EntryWitness>,
    pub convex_violation_count: u64,
    /// Each part is a distribution obeying the constraint set.
    pub parts: Vec<PartCheck>,
    pub entries_checked: u64,
    pub passed: bool,
}

const MAX_WITNESSES: usize = 10;

struct SliceTally {
    convex: Vec<EntryWitness>,
    convex_count: u64,
    negative: Vec<Vec<EntryWitness>>,
    unnormalized: Vec<Vec<EntryWitness>>,
    entries: u64,
}

/// Exhaustively checks that `partition` is a legal decomposition of `base`
/// whose parts satisfy `constraint`.
pub fn verify_partition<V: Value>(
    partition: &Partition<V>,
    base: &dyn SystemEvaluator<V>,
    constraint: Constraint,
    cap: u128,
) -> Result<PartitionReport> {
    let n = base.n();
    let n_settings = base.n_settings();
    if partition.parts.is_empty() {
        return Err(Error::MalformedPartition("no parts".into()));
    }
    for p in &partition.parts {
        if p.system.n() != n || p.system.n_settings() != n_settings {
            return Err(Error::DimensionMismatch(
                "partition parts and base differ in shape".into(),
            ));
        }
        if !p.system.unit().agrees(&base.unit()) {
            return Err(Error::MalformedPartition(
                "parts and base use different value units".into(),
            ));
        }
    }
    ensure_within_cap(n, n_settings, cap)?;

    let weights = partition.weights();
    let weight_sum = weights.iter().fold(Rat::from_integer(0.into()), |a, w| a + w);
    let weights_ok = weights.iter().all(|w| *w.numer() >= 0.into()) && weight_sum == Rat::one();

    // Scale the weights to integers so fixed-point values stay exact.
    let common = weights
        .iter()
        .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
    let to_i64 = |b: BigInt| {
        b.to_i64()
            .ok_or_else(|| Error::InvalidParameter("partition weights too fine-grained".into()))
    };
    let scale = V::from_int(to_i64(common.clone())?);
    let scaled: Vec<V> = weights
        .iter()
        .map(|w| {
            let k = (w * Rat::from_integer(common.clone())).to_integer();
            to_i64(k).map(V::from_int)
        })
        .collect::<Result<_>>()?;

    let inputs = all_settings(n, n_settings);
    let size = 1usize << n;
    let parts = &partition.parts;
    let n_parts = parts.len();
    let unit = base.unit();

    let tallies: Vec<SliceTally> = inputs
        .par_iter()
        .flat_map_iter(|u| inputs.iter().map(move |v| (u, v)))
        .map(|(u, v)| {
            let mut t = SliceTally {
                convex: Vec::new(),
                convex_count: 0,
                negative: vec![Vec::new(); n_parts],
                unnormalized: vec![Vec::new(); n_parts],
                entries: 0,
            };
            let mut base_row = Vec::with_capacity(size);
            let mut rows: Vec<Vec<V>> = vec![Vec::with_capacity(size); n_parts];
            let mut totals = vec![V::zero_value(); n_parts];
            for y in 0..size {
                base.alice_vector(y, u, v, &mut base_row);
                for (p, row) in parts.iter().zip(rows.iter_mut()) {
                    p.system.alice_vector(y, u, v, row);
                }
                for x in 0..size {
                    t.entries += 1;
                    let mut mix = V::zero_value();
                    for z in 0..n_parts {
                        let val = &rows[z][x];
                        if val.below_zero() && t.negative[z].len() < MAX_WITNESSES {
                            t.negative[z].push(entry(x, y, u, v, n, format!("value {val:?}")));
                        }
                        totals[z] = totals[z].clone() + val.clone();
                        mix = mix + scaled[z].clone() * val.clone();
                    }
                    let want = scale.clone() * base_row[x].clone();
                    if !mix.agrees(&want) {
                        t.convex_count += 1;
                        if t.convex.len() < MAX_WITNESSES {
                            t.convex.push(entry(
                                x,
                                y,
                                u,
                                v,
                                n,
                                format!("mixture {:?} vs base {:?}", mix, want),
                            ));
                        }
                    }
                }
            }
            for z in 0..n_parts {
                if !totals[z].agrees(&unit) {
                    t.unnormalized[z].push(EntryWitness {
                        x: "*".repeat(n),
                        y: "*".repeat(n),
                        u: u.clone(),
                        v: v.clone(),
                        detail: format!(
                            "total {}",
                            totals[z].normalize(&unit).decimal()
                        ),
                    });
                }
            }
            t
        })
        .collect();

    let mut convex = Vec::new();
    let mut convex_count = 0;
    let mut entries = 0;
    let mut negative = vec![Vec::new(); n_parts];
    let mut unnormalized = vec![Vec::new(); n_parts];
    for t in tallies {
        convex_count += t.convex_count;
        entries += t.entries;
        convex.extend(t.convex);
        for z in 0..n_parts {
            negative[z].extend(t.negative[z].iter().cloned());
            unnormalized[z].extend(t.unnormalized[z].iter().cloned());
        }
    }
    convex.truncate(MAX_WITNESSES);

    let mut part_checks = Vec::with_capacity(n_parts);
    for (z, p) in parts.iter().enumerate() {
        let constraint_report = ns::check(p.system.as_ref(), constraint, cap)?;
        let nonnegative = negative[z].is_empty();
        let normalized = unnormalized[z].is_empty();
        let mut problems: Vec<EntryWitness> = negative[z].drain(..).collect();
        problems.append(&mut unnormalized[z]);
        problems.truncate(MAX_WITNESSES);
        part_checks.push(PartCheck {
            weight: p.weight.clone(),
            nonnegative,
            normalized,
            problems,
            constraint: constraint_report,
        });
    }

    let convex_ok = convex_count == 0;
    let passed = weights_ok && convex_ok && part_checks.iter().all(PartCheck::passed);
    Ok(PartitionReport {
        weights_ok,
        convex_ok,
        convex_violations: convex,
        convex_violation_count: convex_count,
        parts: part_checks,
        entries_checked: entries,
        passed,
    })
}

fn entry(x: usize, y: usize, u: &[usize], v: &[usize], n: usize, detail: String) -> EntryWitness {
    EntryWitness {
        x: bits::to_string(x, n),
        y: bits::to_string(y, n),
        u: u.to_vec(),
        v: v.to_vec(),
        detail,
    }
}

/// Reads a system value as a reportable probability.
pub fn probability<V: Value, S: SystemEvaluator<V> + ?Sized>(
    system: &S,
    x: usize,
    y: usize,
    u: &[usize],
    v: &[usize],
) -> Number {
    system.evaluate(x, y, u, v).normalize(&system.unit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::box_lab::{bias_box, build_exact_box};
    use crate::hash::HashFunction;
    use crate::value::{rat, Fixed};

    fn attack_parts(f: &HashFunction, eps: Rat) -> (ProductSystem<Rat>, [AttackedSystem<Rat>; 2]) {
        let base = build_exact_box(2, &eps).unwrap();
        let b0 = bias_box(&base, 0, &eps).unwrap();
        let b1 = bias_box(&base, 1, &eps).unwrap();
        let profile = Arc::new(PivotalProfile::build(f).unwrap());
        let p0 = AttackedSystem::new(base.clone(), [b0.clone(), b1.clone()], profile.clone(), 0).unwrap();
        let p1 = AttackedSystem::new(base.clone(), [b0, b1], profile, 1).unwrap();
        (ProductSystem::iid(&base, f.n()).unwrap(), [p0, p1])
    }

    #[test]
    fn product_entry_is_square_of_cell() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        let sys = ProductSystem::iid(&b, 2).unwrap();
        let p = evaluate_checked(&sys, &[0, 0], &[0, 0], &[0, 0], &[0, 0]).unwrap();
        assert_eq!(p, rat(49, 256));
    }

    #[test]
    fn evaluate_checked_rejects_bad_input() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        let sys = ProductSystem::iid(&b, 2).unwrap();
        assert!(matches!(
            evaluate_checked(&sys, &[0], &[0, 0], &[0, 0], &[0, 0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            evaluate_checked(&sys, &[0, 0], &[0, 0], &[0, 2], &[0, 0]),
            Err(Error::SettingOutOfRange(_))
        ));
    }

    #[test]
    fn fast_vectors_match_pointwise_evaluation() {
        let f = HashFunction::from_hex(3, "39").unwrap();
        let (base, [p0, p1]) = attack_parts(&f, rat(1, 8));
        let systems: [&dyn SystemEvaluator<Rat>; 3] = [&base, &p0, &p1];
        let u = [1, 0, 1];
        let v = [0, 1, 1];
        let mut row = Vec::new();
        for sys in systems {
            for y in 0..8 {
                sys.alice_vector(y, &u, &v, &mut row);
                for x in 0..8 {
                    assert_eq!(row[x], sys.evaluate(x, y, &u, &v));
                }
            }
            for x in 0..8 {
                sys.bob_vector(x, &u, &v, &mut row);
                for y in 0..8 {
                    assert_eq!(row[y], sys.evaluate(x, y, &u, &v));
                }
            }
        }
    }

    #[test]
    fn halves_recombine_to_base() {
        let f = HashFunction::from_hex(3, "39").unwrap();
        let (base, [p0, p1]) = attack_parts(&f, rat(1, 8));
        for u in all_settings(3, 2) {
            for v in all_settings(3, 2) {
                for x in 0..8 {
                    for y in 0..8 {
                        let mix = (p0.evaluate(x, y, &u, &v) + p1.evaluate(x, y, &u, &v)) * rat(1, 2);
                        assert_eq!(mix, base.evaluate(x, y, &u, &v));
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_marginal_example() {
        let f = HashFunction::from_hex(3, "39").unwrap();
        let eps = rat(1, 8);
        let (_, [p0, _]) = attack_parts(&f, eps.clone());
        let dist = p0.alice_output_distribution();
        // x = 010: pivotal index 2, sigma 0, x_2 = 1 mismatches.
        assert_eq!(dist[0b010], rat(1, 4) * (rat(1, 2) - &eps));
        for u in all_settings(3, 2) {
            for v in all_settings(3, 2) {
                assert_eq!(alice_marginal_at(&p0, &u, &v), dist);
            }
        }
    }

    #[test]
    fn identity_function_single_box() {
        let f = HashFunction::from_bits(1, vec![0, 1], "identity").unwrap();
        let eps = rat(1, 8);
        let (_, [p0, p1]) = attack_parts(&f, eps.clone());
        assert_eq!(p0.alice_output_distribution()[0], rat(1, 2) + &eps);
        let base = build_exact_box(2, &eps).unwrap();
        let b0 = bias_box(&base, 0, &eps).unwrap();
        let b1 = bias_box(&base, 1, &eps).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        assert_eq!(&p0.evaluate(x, y, &[a], &[b]), b0.get(a, b, x, y));
                        assert_eq!(&p1.evaluate(x, y, &[a], &[b]), b1.get(a, b, x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn partition_weight_failure() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        let (fixed, _) = SinglePairBox::to_fixed(&[&b]).unwrap();
        let sys: Arc<dyn SystemEvaluator<Fixed>> = Arc::new(ProductSystem::iid(&fixed[0], 2).unwrap());
        let partition = Partition::new(vec![
            Part { weight: rat(3, 5), system: sys.clone() },
            Part { weight: rat(1, 2), system: sys.clone() },
        ]);
        let report = verify_partition(&partition, sys.as_ref(), Constraint::TimeOrdered, DEFAULT_EVAL_CAP).unwrap();
        assert!(!report.weights_ok);
        assert!(!report.passed);
    }

    #[test]
    fn partition_rejects_oversized_space() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        let sys: Arc<dyn SystemEvaluator<Rat>> = Arc::new(ProductSystem::iid(&b, 3).unwrap());
        let partition = Partition::new(vec![Part { weight: rat(1, 1), system: sys.clone() }]);
        let err = verify_partition(&partition, sys.as_ref(), Constraint::Ab, 1000).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn state_space_sizes() {
        assert_eq!(state_space_size(4, 2), 1 << 16);
        assert_eq!(state_space_size(1, 3), 36);
    }
}

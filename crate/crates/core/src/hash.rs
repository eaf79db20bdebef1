//! Hash functions as truth tables, prefix influences and the adversary's
//! pivotal-index partition.
//!
//! For a prefix `p = x₁…x_{i−1}` let `π⁰(p)` be the fraction of completions
//! `s` with `f(p·s) = 0`, and `Δ_i(p) = |π⁰(p·0) − π⁰(p·1)|`. The pivotal
//! index `i(x)` is the smallest `i` with `Δ_i(x₁…x_{i−1}) ≥ 2/(3n)`; it only
//! depends on the prefix before it. The bias direction is `σ = 0` iff
//! `π⁰(p·0) > π⁰(p·1)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits;
use crate::box_lab::{bias_box, bias_float_box, build_exact_box, build_quantum_box, BoxParams, Mode, SinglePairBox};
use crate::error::{Error, Result};
use crate::system::{AttackedSystem, Part, Partition, ProductSystem};
use crate::value::{rat, Fixed, Rat, Value};

/// Largest supported input length; tables and prefix trees are `O(2^n)`.
pub const MAX_INPUT_BITS: usize = 24;

/// `f: {0,1}ⁿ → {0,1}` stored as `2ⁿ` output bits indexed by the packed
/// input (`x₁` most significant).
#[derive(Clone, PartialEq, Eq)]
pub struct HashFunction {
    n: usize,
    bits: Vec<u8>,
    name: String,
}

impl fmt::Debug for HashFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashFunction({}, n={})", self.name, self.n)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_INPUT_BITS {
        return Err(Error::InvalidParameter(format!(
            "input length must be in 1..={MAX_INPUT_BITS}, got {n}"
        )));
    }
    Ok(())
}

impl HashFunction {
    pub fn from_bits(n: usize, bits: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        check_n(n)?;
        if bits.len() != 1 << n {
            return Err(Error::DimensionMismatch(format!(
                "truth table for n={n} needs {} entries, got {}",
                1usize << n,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParameter("truth table entries must be 0 or 1".into()));
        }
        Ok(HashFunction {
            n,
            bits,
            name: name.into(),
        })
    }

    pub fn from_fn(n: usize, name: impl Into<String>, f: impl Fn(usize) -> u8) -> Result<Self> {
        check_n(n)?;
        let bits = (0..1usize << n).map(|x| f(x) & 1).collect();
        Self::from_bits(n, bits, name)
    }

    /// Parity of all input bits.
    pub fn xor(n: usize) -> Result<Self> {
        Self::from_fn(n, "xor", |x| (x.count_ones() & 1) as u8)
    }

    /// 1 iff at least half the bits are 1; even-length ties go to 1.
    pub fn majority(n: usize) -> Result<Self> {
        Self::from_fn(n, "majority", |x| (2 * x.count_ones() as usize >= n) as u8)
    }

    pub fn and(n: usize) -> Result<Self> {
        Self::from_fn(n, "and", |x| (x == (1 << n) - 1) as u8)
    }

    pub fn or(n: usize) -> Result<Self> {
        Self::from_fn(n, "or", |x| (x != 0) as u8)
    }

    pub fn constant(n: usize, value: u8) -> Result<Self> {
        Self::from_fn(n, format!("constant:{value}"), |_| value)
    }

    /// Uniformly random truth table from a ChaCha8 stream seeded with `seed`,
    /// consumed 64 entries per word, most significant bit first.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        check_n(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = 1usize << n;
        let mut bits = Vec::with_capacity(size);
        while bits.len() < size {
            let word: u64 = rng.gen();
            let take = (size - bits.len()).min(64);
            bits.extend((0..take).map(|k| ((word >> (63 - k)) & 1) as u8));
        }
        Self::from_bits(n, bits, format!("random:{seed}"))
    }

    /// Truth table from hex, most significant bit first. For `n ≥ 2` exactly
    /// `2ⁿ/4` digits; for `n = 1` one digit whose top two bits hold the table
    /// and whose low bits are zero.
    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        check_n(n)?;
        let size = 1usize << n;
        let digits = size.div_ceil(4);
        let hex = hex.trim();
        if hex.len() != digits {
            return Err(Error::Parse(format!(
                "hex table for n={n} needs {digits} digit(s), got {:?}",
                hex
            )));
        }
        let mut bits = Vec::with_capacity(digits * 4);
        for c in hex.chars() {
            let d = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit {c:?}")))?;
            bits.extend((0..4).rev().map(|k| ((d >> k) & 1) as u8));
        }
        if bits[size..].iter().any(|&b| b != 0) {
            return Err(Error::Parse(format!(
                "hex table for n={n} has nonzero padding bits"
            )));
        }
        bits.truncate(size);
        Self::from_bits(n, bits, format!("hex:{}", hex.to_ascii_lowercase()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn eval(&self, x: usize) -> u8 {
        self.bits[x]
    }

    pub fn eval_bits(&self, x: &[u8]) -> Result<u8> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "input has {} bits, function takes {}",
                x.len(),
                self.n
            )));
        }
        Ok(self.bits[bits::pack(x)])
    }

    pub fn zero_count(&self) -> u64 {
        self.bits.iter().filter(|&&b| b == 0).count() as u64
    }

    pub fn to_hex(&self) -> String {
        let mut padded = self.bits.clone();
        padded.resize(self.bits.len().div_ceil(4) * 4, 0);
        padded
            .chunks(4)
            .map(|c| {
                let d = c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                std::char::from_digit(d, 16).unwrap()
            })
            .collect()
    }
}

/// A named family of functions, one per input length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FunctionSpec {
    Xor,
    Majority,
    And,
    Or,
    Random(u64),
    Hex(String),
}

impl FunctionSpec {
    pub fn build(&self, n: usize) -> Result<HashFunction> {
        match self {
            FunctionSpec::Xor => HashFunction::xor(n),
            FunctionSpec::Majority => HashFunction::majority(n),
            FunctionSpec::And => HashFunction::and(n),
            FunctionSpec::Or => HashFunction::or(n),
            FunctionSpec::Random(seed) => HashFunction::random(n, *seed),
            FunctionSpec::Hex(h) => HashFunction::from_hex(n, h),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "xor" => return Ok(FunctionSpec::Xor),
            "majority" => return Ok(FunctionSpec::Majority),
            "and" => return Ok(FunctionSpec::And),
            "or" => return Ok(FunctionSpec::Or),
            _ => {}
        }
        if let Some(seed) = s.strip_prefix("random:") {
            let seed = seed
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed in function spec {s:?}")))?;
            return Ok(FunctionSpec::Random(seed));
        }
        if let Some(hex) = s.strip_prefix("hex:") {
            if hex.is_empty() || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(Error::Parse(format!("bad hex table in function spec {s:?}")));
            }
            return Ok(FunctionSpec::Hex(hex.to_ascii_lowercase()));
        }
        Err(Error::Parse(format!(
            "unknown function spec {s:?}; expected xor | majority | and | or | random:<seed> | hex:<digits>"
        )))
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Xor => f.write_str("xor"),
            FunctionSpec::Majority => f.write_str("majority"),
            FunctionSpec::And => f.write_str("and"),
            FunctionSpec::Or => f.write_str("or"),
            FunctionSpec::Random(seed) => write!(f, "random:{seed}"),
            FunctionSpec::Hex(h) => write!(f, "hex:{h}"),
        }
    }
}

/// Number of zero outputs below every prefix, in heap order: the prefix `p`
/// of length `L` lives at `2^L − 1 + p`.
#[derive(Clone, Debug)]
pub struct ZeroCountTree {
    n: usize,
    zeros: Vec<u32>,
}

#[inline]
fn node(len: usize, prefix: usize) -> usize {
    (1 << len) - 1 + prefix
}

impl ZeroCountTree {
    pub fn new(f: &HashFunction) -> Self {
        let n = f.n;
        let mut zeros = vec![0u32; (1 << (n + 1)) - 1];
        for x in 0..1usize << n {
            zeros[node(n, x)] = (f.bits[x] == 0) as u32;
        }
        for len in (0..n).rev() {
            for p in 0..1usize << len {
                zeros[node(len, p)] = zeros[node(len + 1, 2 * p)] + zeros[node(len + 1, 2 * p + 1)];
            }
        }
        ZeroCountTree { n, zeros }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn zeros(&self, len: usize, prefix: usize) -> u32 {
        self.zeros[node(len, prefix)]
    }

    /// `π⁰(p)`: probability that `f` outputs 0 given prefix `p`.
    pub fn pi0(&self, len: usize, prefix: usize) -> Rat {
        rat(
            self.zeros(len, prefix) as i64,
            1i64 << (self.n - len),
        )
    }

    /// `|zeros(p·0) − zeros(p·1)|` for a prefix of length `i − 1`.
    #[inline]
    pub fn gap(&self, i: usize, prefix: usize) -> u64 {
        let z0 = self.zeros(i, 2 * prefix) as i64;
        let z1 = self.zeros(i, 2 * prefix + 1) as i64;
        (z0 - z1).unsigned_abs()
    }

    /// `Δ_i(p) = gap / 2^{n−i}`.
    pub fn delta(&self, i: usize, prefix: usize) -> Rat {
        rat(self.gap(i, prefix) as i64, 1i64 << (self.n - i))
    }

    /// `Δ_i(p) ≥ 2/(3n)`, compared exactly as `3n·gap ≥ 2·2^{n−i}`.
    #[inline]
    pub fn meets_threshold(&self, i: usize, prefix: usize) -> bool {
        3 * self.n as u64 * self.gap(i, prefix) >= 2u64 << (self.n - i)
    }

    /// `σ = 0` iff `π⁰(p·0) > π⁰(p·1)`.
    #[inline]
    pub fn sigma(&self, i: usize, prefix: usize) -> u8 {
        (self.zeros(i, 2 * prefix) <= self.zeros(i, 2 * prefix + 1)) as u8
    }
}

/// `|Pr[f = 0] − Pr[f = 1]| ≤ 1/3`.
pub fn is_almost_balanced(f: &HashFunction) -> bool {
    // |2z/2ⁿ − 1| ≤ 1/3  ⇔  3·|2z − 2ⁿ| ≤ 2ⁿ
    let z = f.zero_count() as i64;
    let size = 1i64 << f.n;
    3 * (2 * z - size).abs() <= size
}

/// `Δ_i(x₁…x_{i−1})` for a prefix given as bits.
pub fn delta(f: &HashFunction, i: usize, prefix: &[u8]) -> Result<Rat> {
    if i == 0 || i > f.n {
        return Err(Error::InvalidParameter(format!("index {i} outside 1..={}", f.n)));
    }
    if prefix.len() != i - 1 {
        return Err(Error::DimensionMismatch(format!(
            "prefix for index {i} needs {} bits, got {}",
            i - 1,
            prefix.len()
        )));
    }
    Ok(ZeroCountTree::new(f).delta(i, bits::pack(prefix)))
}

/// Where and how one string gets biased.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pivot {
    /// 1-based pivotal index `i(x)`.
    pub index: usize,
    pub sigma: u8,
    /// `x₁…x_{i−1}` packed.
    pub prefix: usize,
    /// `|zeros(p·0) − zeros(p·1)|`; `Δ = gap / 2^{n−i}`.
    pub gap: u64,
}

impl Pivot {
    pub fn delta(&self, n: usize) -> Rat {
        rat(self.gap as i64, 1i64 << (n - self.index))
    }
}

const NO_PIVOT: u8 = u8::MAX;

/// Pivotal index, bias direction and influence for every input string.
#[derive(Clone, Debug)]
pub struct PivotalProfile {
    n: usize,
    /// Per prefix node: σ if this node is where its strings turn pivotal.
    node_sigma: Vec<u8>,
    node_gap: Vec<u32>,
    /// Per string: the pivotal node, or `NO_NODE`.
    per_x: Vec<u32>,
}

const NO_NODE: u32 = u32::MAX;

impl PivotalProfile {
    /// Pivots for every string that has one. Works for any `f`; strings
    /// without a qualifying index are left uncovered.
    pub fn scan(f: &HashFunction) -> Self {
        let tree = ZeroCountTree::new(f);
        Self::from_tree(&tree)
    }

    pub fn from_tree(tree: &ZeroCountTree) -> Self {
        let n = tree.n();
        let mut node_sigma = vec![NO_PIVOT; (1 << n) - 1];
        let mut node_gap = vec![0u32; (1 << n) - 1];
        let mut per_x = vec![NO_NODE; 1 << n];
        // covered[p] at the current length: some ancestor of p is pivotal.
        let mut covered = vec![false];
        for len in 0..n {
            let i = len + 1;
            let mut next = vec![false; 1 << (len + 1)];
            for p in 0..1usize << len {
                let hit = !covered[p] && tree.meets_threshold(i, p);
                if hit {
                    let id = node(len, p);
                    node_sigma[id] = tree.sigma(i, p);
                    node_gap[id] = tree.gap(i, p) as u32;
                    let span = n - len;
                    per_x[p << span..(p + 1) << span].fill(id as u32);
                }
                next[2 * p] = covered[p] || hit;
                next[2 * p + 1] = covered[p] || hit;
            }
            covered = next;
        }
        PivotalProfile {
            n,
            node_sigma,
            node_gap,
            per_x,
        }
    }

    /// Requires `f` almost balanced; then every string has a pivot.
    pub fn build(f: &HashFunction) -> Result<Self> {
        if !is_almost_balanced(f) {
            return Err(Error::Precondition(format!(
                "{} is not almost balanced: {} zeros out of {}",
                f.name(),
                f.zero_count(),
                1u64 << f.n()
            )));
        }
        let profile = Self::scan(f);
        if let Some(x) = profile.per_x.iter().position(|&id| id == NO_NODE) {
            return Err(Error::Precondition(format!(
                "no pivotal index for x={}",
                bits::to_string(x, f.n())
            )));
        }
        Ok(profile)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_complete(&self) -> bool {
        self.per_x.iter().all(|&id| id != NO_NODE)
    }

    #[inline]
    pub fn pivot(&self, x: usize) -> Option<Pivot> {
        match self.per_x[x] {
            NO_NODE => None,
            id => Some(self.pivot_of_node(id as usize)),
        }
    }

    fn pivot_of_node(&self, id: usize) -> Pivot {
        let len = (usize::BITS - 1 - (id + 1).leading_zeros()) as usize;
        Pivot {
            index: len + 1,
            sigma: self.node_sigma[id],
            prefix: id + 1 - (1 << len),
            gap: self.node_gap[id] as u64,
        }
    }

    /// `σ` if strings with this prefix (of length `len`) have pivotal index
    /// `len + 1`.
    #[inline]
    pub fn pivot_at_prefix(&self, len: usize, prefix: usize) -> Option<u8> {
        match self.node_sigma[node(len, prefix)] {
            NO_PIVOT => None,
            s => Some(s),
        }
    }

    /// Number of strings with each pivotal index.
    pub fn histogram(&self) -> BTreeMap<usize, u64> {
        let mut h = BTreeMap::new();
        for x in 0..self.per_x.len() {
            if let Some(p) = self.pivot(x) {
                *h.entry(p.index).or_insert(0) += 1;
            }
        }
        h
    }

    /// `E_x[Δ_{i(x)}]` over uniform `x`, exactly.
    pub fn mean_delta(&self) -> Rat {
        // Each string contributes Δ/2^n = gap·2^i / 2^{2n}.
        let n = self.n;
        let total: u128 = (0..self.per_x.len())
            .filter_map(|x| self.pivot(x))
            .map(|p| (p.gap as u128) << p.index)
            .sum();
        Rat::new(BigInt::from(total), BigInt::from(1u128) << (2 * n))
    }
}

/// `(i(x), σ, Δ)` for one input string.
pub fn pivotal_index(f: &HashFunction, x: &[u8]) -> Result<(usize, u8, Rat)> {
    if x.len() != f.n() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} bits, function takes {}",
            x.len(),
            f.n()
        )));
    }
    if !is_almost_balanced(f) {
        return Err(Error::Precondition(format!(
            "{} is not almost balanced",
            f.name()
        )));
    }
    let profile = PivotalProfile::build(f)?;
    let p = profile.pivot(bits::pack(x)).expect("complete profile");
    Ok((p.index, p.sigma, p.delta(f.n())))
}

/// Guessing the majority output without touching the system:
/// `(guess, max(Pr[f=0], Pr[f=1]) − 1/2)`.
pub fn trivial_strategy(f: &HashFunction) -> (u8, Rat) {
    let size = 1i64 << f.n();
    let zeros = f.zero_count() as i64;
    let (guess, hits) = if 2 * zeros >= size { (0, zeros) } else { (1, size - zeros) };
    (guess, rat(hits, size) - rat(1, 2))
}

/// Base box, its two biased versions and the profile: everything needed to
/// instantiate both parts of the attack in one numeric domain.
#[derive(Clone, Debug)]
pub struct AttackSetup<V> {
    pub base: SinglePairBox<V>,
    pub biased: [SinglePairBox<V>; 2],
    pub profile: Arc<PivotalProfile>,
}

impl<V: Value> AttackSetup<V> {
    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn part(&self, z: u8) -> Result<AttackedSystem<V>> {
        AttackedSystem::new(
            self.base.clone(),
            self.biased.clone(),
            Arc::clone(&self.profile),
            z,
        )
    }

    pub fn base_system(&self) -> Result<ProductSystem<V>> {
        ProductSystem::iid(&self.base, self.n())
    }

    /// `{(1/2, P⁰), (1/2, P¹)}`.
    pub fn partition(&self) -> Result<Partition<V>> {
        Ok(Partition::new(vec![
            Part {
                weight: rat(1, 2),
                system: Arc::new(self.part(0)?),
            },
            Part {
                weight: rat(1, 2),
                system: Arc::new(self.part(1)?),
            },
        ]))
    }
}

/// The attack in whichever numeric domain the parameters allow: scaled
/// integers when `D^n` fits comfortably in `i128`, big rationals otherwise,
/// doubles in quantum mode.
#[derive(Clone, Debug)]
pub enum AttackPartition {
    Fixed(AttackSetup<Fixed>),
    Rational(AttackSetup<Rat>),
    Float(AttackSetup<f64>),
}

impl AttackPartition {
    pub fn n(&self) -> usize {
        match self {
            AttackPartition::Fixed(s) => s.n(),
            AttackPartition::Rational(s) => s.n(),
            AttackPartition::Float(s) => s.n(),
        }
    }

    pub fn profile(&self) -> &PivotalProfile {
        match self {
            AttackPartition::Fixed(s) => &s.profile,
            AttackPartition::Rational(s) => &s.profile,
            AttackPartition::Float(s) => &s.profile,
        }
    }
}

/// Headroom kept below `i128::MAX` for sums and weight scaling.
const FIXED_BITS_LIMIT: u64 = 100;

/// Whether tables over `den` can be multiplied `n` deep in `i128`.
pub fn fixed_fits(den: &BigInt, n: usize) -> bool {
    den.bits() * n as u64 <= FIXED_BITS_LIMIT + n as u64 && den.pow(n as u32).bits() <= FIXED_BITS_LIMIT
}

pub fn exact_attack_setup(f: &HashFunction, n_settings: usize, eps: &Rat) -> Result<AttackSetup<Rat>> {
    let profile = Arc::new(PivotalProfile::build(f)?);
    let base = build_exact_box(n_settings, eps)?;
    let b0 = bias_box(&base, 0, eps)?;
    let b1 = bias_box(&base, 1, eps)?;
    Ok(AttackSetup {
        base,
        biased: [b0, b1],
        profile,
    })
}

/// Converts an exact setup to scaled integers if `D^n` stays within bounds.
pub fn to_fixed_setup(setup: &AttackSetup<Rat>) -> Result<Option<AttackSetup<Fixed>>> {
    let (mut fixed, den) =
        SinglePairBox::to_fixed(&[&setup.base, &setup.biased[0], &setup.biased[1]])?;
    if !fixed_fits(&den, setup.n()) {
        return Ok(None);
    }
    let b1 = fixed.pop().unwrap();
    let b0 = fixed.pop().unwrap();
    let base = fixed.pop().unwrap();
    Ok(Some(AttackSetup {
        base,
        biased: [b0, b1],
        profile: Arc::clone(&setup.profile),
    }))
}

/// Eve's two-part partition over the iid unbiased base. Requires `f` almost
/// balanced.
pub fn build_attack_partition(f: &HashFunction, params: &BoxParams) -> Result<AttackPartition> {
    match params.mode() {
        Mode::RationalLinear => {
            let eps = params.eps_exact().expect("rational mode");
            let exact = exact_attack_setup(f, params.n_settings(), eps)?;
            Ok(match to_fixed_setup(&exact)? {
                Some(fixed) => AttackPartition::Fixed(fixed),
                None => AttackPartition::Rational(exact),
            })
        }
        Mode::QuantumFloat => {
            let profile = Arc::new(PivotalProfile::build(f)?);
            let base = build_quantum_box(params.n_settings())?;
            let eps = params.eps_float();
            let b0 = bias_float_box(&base, 0, eps)?;
            let b1 = bias_float_box(&base, 1, eps)?;
            Ok(AttackPartition::Float(AttackSetup {
                base,
                biased: [b0, b1],
                profile,
            }))
        }
    }
}

//! Single-pair chained-Bell boxes.
//!
//! A box is the conditional table `P(x, y | u, v)` of one shared pair. Alice
//! picks setting index `a` (physical setting `u = 2a`), Bob picks `b`
//! (physical setting `v = 2b + 1`), and each outputs one bit. Within a square
//! the columns are Alice's outcome `x` and the rows Bob's outcome `y`.
//!
//! Every constructed box has uniform marginals on both sides. For settings at
//! odd distance `δ = |u − v|` the probability that the outputs differ is
//!
//! ```text
//! rational-linear:  g(δ) = eps + (δ − 1)(1 − 2·eps) / (2N − 2)
//! quantum-float:    g(δ) = sin²(πδ / 4N)
//! ```
//!
//! so `g(1) = eps` and `g(2N − 1) = 1 − eps`, and each chained-Bell term
//! contributes exactly `eps`.

use std::fmt;

use num::{BigInt, ToPrimitive};

use crate::error::{Error, Result};
use crate::value::{common_denominator, rat, rat_int, Fixed, Number, Rat, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    RationalLinear,
    QuantumFloat,
}

/// Number of settings per party and the cross probability on adjacent
/// settings.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxParams {
    n_settings: usize,
    mode: Mode,
    eps: Rat,
}

impl BoxParams {
    /// Exact box family with a free rational `eps` in `(0, 1/2]`.
    pub fn rational(n_settings: usize, eps: Rat) -> Result<Self> {
        check_settings(n_settings)?;
        if eps <= Rat::from_integer(0.into()) || eps > rat(1, 2) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1/2], got {eps}"
            )));
        }
        Ok(BoxParams {
            n_settings,
            mode: Mode::RationalLinear,
            eps,
        })
    }

    /// Quantum statistics of the maximally entangled pair; `eps` is
    /// `sin²(π/4N)` in floating point.
    pub fn quantum(n_settings: usize) -> Result<Self> {
        check_settings(n_settings)?;
        Ok(BoxParams {
            n_settings,
            mode: Mode::QuantumFloat,
            eps: Rat::from_integer(0.into()),
        })
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// The exact `eps`, only available in rational mode.
    pub fn eps_exact(&self) -> Option<&Rat> {
        match self.mode {
            Mode::RationalLinear => Some(&self.eps),
            Mode::QuantumFloat => None,
        }
    }

    pub fn eps_float(&self) -> f64 {
        match self.mode {
            Mode::RationalLinear => crate::value::rat_to_f64(&self.eps),
            Mode::QuantumFloat => quantum_eps(self.n_settings),
        }
    }

    /// `eps`, which is also the bias `c = I_N / 2N` a single box admits.
    pub fn eps(&self) -> Number {
        match self.mode {
            Mode::RationalLinear => Number::Exact(self.eps.clone()),
            Mode::QuantumFloat => Number::Float(quantum_eps(self.n_settings)),
        }
    }
}

fn check_settings(n_settings: usize) -> Result<()> {
    if n_settings < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 settings per party, got {n_settings}"
        )));
    }
    if n_settings > 64 {
        return Err(Error::InvalidParameter(format!(
            "at most 64 settings per party supported, got {n_settings}"
        )));
    }
    Ok(())
}

pub fn quantum_eps(n_settings: usize) -> f64 {
    let s = (std::f64::consts::PI / (4.0 * n_settings as f64)).sin();
    s * s
}

/// The `2N` setting pairs `(u, v)` entering the chained Bell expression, in
/// chain order: `(0,1), (2,1), (2,3), …, (2N−2, 2N−1)` and the closing pair
/// `(0, 2N−1)`.
pub fn allowed_pairs(n_settings: usize) -> Result<Vec<(usize, usize)>> {
    check_settings(n_settings)?;
    let mut pairs = Vec::with_capacity(2 * n_settings);
    for a in 0..n_settings {
        let u = 2 * a;
        if a > 0 {
            pairs.push((u, u - 1));
        }
        pairs.push((u, u + 1));
    }
    pairs.push((0, 2 * n_settings - 1));
    Ok(pairs)
}

/// Probability table of one box pair, stored relative to `unit`.
#[derive(Clone, Debug, PartialEq)]
pub struct SinglePairBox<V> {
    n_settings: usize,
    cells: Vec<V>,
    unit: V,
}

#[inline]
fn cell_index(n_settings: usize, a: usize, b: usize, x: usize, y: usize) -> usize {
    ((a * n_settings + b) * 2 + x) * 2 + y
}

impl<V: Value> SinglePairBox<V> {
    /// Wraps a raw table laid out as `[a][b][x][y]`. Only the size is
    /// checked; call [`SinglePairBox::check_invariants`] for the rest.
    pub fn from_cells(n_settings: usize, cells: Vec<V>, unit: V) -> Result<Self> {
        check_settings(n_settings)?;
        let want = 4 * n_settings * n_settings;
        if cells.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "box table needs {want} cells, got {}",
                cells.len()
            )));
        }
        Ok(SinglePairBox {
            n_settings,
            cells,
            unit,
        })
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn unit(&self) -> &V {
        &self.unit
    }

    pub fn cells(&self) -> &[V] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> &V {
        &self.cells[cell_index(self.n_settings, a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, value: V) {
        let i = cell_index(self.n_settings, a, b, x, y);
        self.cells[i] = value;
    }

    /// `Σ_y P(x, y | a, b)`.
    pub fn alice_marginal(&self, a: usize, b: usize, x: usize) -> V {
        self.get(a, b, x, 0).clone() + self.get(a, b, x, 1).clone()
    }

    /// `Σ_x P(x, y | a, b)`.
    pub fn bob_marginal(&self, a: usize, b: usize, y: usize) -> V {
        self.get(a, b, 0, y).clone() + self.get(a, b, 1, y).clone()
    }

    /// Nonnegativity, per-square normalization, uniform Bob marginal and a
    /// setting-independent Alice marginal.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_settings;
        let half_twice = |v: V| (v.clone() + v).agrees(&self.unit);
        for a in 0..n {
            for b in 0..n {
                let mut total = V::zero_value();
                for x in 0..2 {
                    for y in 0..2 {
                        let c = self.get(a, b, x, y);
                        if c.below_zero() {
                            return Err(Error::MalformedBox(format!(
                                "negative cell at a={a} b={b} x={x} y={y}: {c:?}"
                            )));
                        }
                        total = total + c.clone();
                    }
                }
                if !total.agrees(&self.unit) {
                    return Err(Error::MalformedBox(format!(
                        "square a={a} b={b} sums to {total:?}"
                    )));
                }
                for y in 0..2 {
                    if !half_twice(self.bob_marginal(a, b, y)) {
                        return Err(Error::MalformedBox(format!(
                            "Bob marginal at a={a} b={b} y={y} is not 1/2"
                        )));
                    }
                }
                for x in 0..2 {
                    if !self.alice_marginal(a, b, x).agrees(&self.alice_marginal(a, 0, x)) {
                        return Err(Error::MalformedBox(format!(
                            "Alice marginal at a={a} depends on Bob's setting b={b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl SinglePairBox<Rat> {
    /// Re-expresses several exact boxes as integer numerators over their
    /// least common denominator `D`. Returns the boxes and `D`.
    pub fn to_fixed(boxes: &[&SinglePairBox<Rat>]) -> Result<(Vec<SinglePairBox<Fixed>>, BigInt)> {
        let den = common_denominator(boxes.iter().flat_map(|b| b.cells.iter()));
        let unit = den.to_i128().ok_or_else(|| {
            Error::InvalidParameter(format!("common denominator {den} too large for fixed point"))
        })?;
        let converted = boxes
            .iter()
            .map(|b| {
                let cells = b
                    .cells
                    .iter()
                    .map(|c| {
                        let scaled = c * Rat::from_integer(den.clone()) / &b.unit;
                        debug_assert!(scaled.is_integer());
                        Fixed(scaled.to_integer().to_i128().expect("scaled cell fits"))
                    })
                    .collect();
                SinglePairBox {
                    n_settings: b.n_settings,
                    cells,
                    unit: Fixed(unit),
                }
            })
            .collect();
        Ok((converted, den))
    }
}

/// A box in whichever numeric domain its mode calls for.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyBox {
    Exact(SinglePairBox<Rat>),
    Float(SinglePairBox<f64>),
}

impl AnyBox {
    pub fn n_settings(&self) -> usize {
        match self {
            AnyBox::Exact(b) => b.n_settings(),
            AnyBox::Float(b) => b.n_settings(),
        }
    }

    /// Cell value as a reportable number.
    pub fn cell(&self, a: usize, b: usize, x: usize, y: usize) -> Number {
        match self {
            AnyBox::Exact(bx) => bx.get(a, b, x, y).normalize(bx.unit()),
            AnyBox::Float(bx) => bx.get(a, b, x, y).normalize(bx.unit()),
        }
    }

    pub fn bell_value(&self) -> Number {
        match self {
            AnyBox::Exact(b) => bell_value(b),
            AnyBox::Float(b) => bell_value(b),
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        match self {
            AnyBox::Exact(b) => b.check_invariants(),
            AnyBox::Float(b) => b.check_invariants(),
        }
    }
}

/// Cross probability `g(δ)` of the rational-linear completion.
pub fn linear_cross_probability(n_settings: usize, eps: &Rat, distance: usize) -> Rat {
    let slope = (rat_int(1) - eps * rat_int(2)) / rat_int(2 * n_settings as i64 - 2);
    eps + slope * rat_int(distance as i64 - 1)
}

pub fn quantum_cross_probability(n_settings: usize, distance: usize) -> f64 {
    let s = (std::f64::consts::PI * distance as f64 / (4.0 * n_settings as f64)).sin();
    s * s
}

fn setting_distance(a: usize, b: usize) -> usize {
    (2 * a).abs_diff(2 * b + 1)
}

fn fill_from_cross<V: Value>(
    n_settings: usize,
    unit: V,
    mut cross: impl FnMut(usize) -> (V, V),
) -> SinglePairBox<V> {
    let mut cells = vec![V::zero_value(); 4 * n_settings * n_settings];
    for a in 0..n_settings {
        for b in 0..n_settings {
            // (same-output cell, different-output cell)
            let (same, diff) = cross(setting_distance(a, b));
            for x in 0..2 {
                for y in 0..2 {
                    let v = if x == y { same.clone() } else { diff.clone() };
                    cells[cell_index(n_settings, a, b, x, y)] = v;
                }
            }
        }
    }
    SinglePairBox {
        n_settings,
        cells,
        unit,
    }
}

/// Unbiased box of the rational-linear family.
pub fn build_exact_box(n_settings: usize, eps: &Rat) -> Result<SinglePairBox<Rat>> {
    check_settings(n_settings)?;
    let half = rat(1, 2);
    Ok(fill_from_cross(n_settings, rat_int(1), |d| {
        let g = linear_cross_probability(n_settings, eps, d);
        ((rat_int(1) - &g) * &half, g * &half)
    }))
}

/// Unbiased box with the quantum cross probabilities `sin²(πδ/4N)`.
pub fn build_quantum_box(n_settings: usize) -> Result<SinglePairBox<f64>> {
    check_settings(n_settings)?;
    Ok(fill_from_cross(n_settings, 1.0, |d| {
        let g = quantum_cross_probability(n_settings, d);
        ((1.0 - g) / 2.0, g / 2.0)
    }))
}

pub fn build_unbiased_box(params: &BoxParams) -> Result<AnyBox> {
    match params.mode() {
        Mode::RationalLinear => Ok(AnyBox::Exact(build_exact_box(
            params.n_settings(),
            &params.eps,
        )?)),
        Mode::QuantumFloat => Ok(AnyBox::Float(build_quantum_box(params.n_settings())?)),
    }
}

/// Moves `shift` of probability, in every row of every square, from the cell
/// with `x = 1 − sigma` into the cell with `x = sigma`.
///
/// `shift` is `eps/2` for a bias of `eps`; it is expressed in the box's own
/// units so that the same routine serves exact, fixed and float tables.
pub fn shift_rows<V: Value>(b: &SinglePairBox<V>, sigma: u8, shift: &V) -> Result<SinglePairBox<V>> {
    if sigma > 1 {
        return Err(Error::InvalidParameter(format!("sigma must be 0 or 1, got {sigma}")));
    }
    let to = sigma as usize;
    let from = 1 - to;
    let mut out = b.clone();
    for a in 0..b.n_settings {
        for bb in 0..b.n_settings {
            for y in 0..2 {
                let source = b.get(a, bb, from, y).clone() - shift.clone();
                if source.below_zero() {
                    return Err(Error::MalformedBox(format!(
                        "cell a={a} b={bb} x={from} y={y} holds less than the shifted mass"
                    )));
                }
                let target = b.get(a, bb, to, y).clone() + shift.clone();
                out.set(a, bb, from, y, source);
                out.set(a, bb, to, y, target);
            }
        }
    }
    Ok(out)
}

/// Biases an exact box toward `x = sigma` by `eps`.
pub fn bias_box(b: &SinglePairBox<Rat>, sigma: u8, eps: &Rat) -> Result<SinglePairBox<Rat>> {
    shift_rows(b, sigma, &(eps * b.unit() / rat_int(2)))
}

pub fn bias_float_box(b: &SinglePairBox<f64>, sigma: u8, eps: f64) -> Result<SinglePairBox<f64>> {
    shift_rows(b, sigma, &(eps * b.unit() / 2.0))
}

/// Biases a box of either domain by the `eps` its parameters fix.
pub fn bias_any_box(b: &AnyBox, sigma: u8, params: &BoxParams) -> Result<AnyBox> {
    match b {
        AnyBox::Exact(bx) => {
            let eps = params.eps_exact().ok_or_else(|| {
                Error::InvalidParameter("exact box needs rational-linear parameters".into())
            })?;
            Ok(AnyBox::Exact(bias_box(bx, sigma, eps)?))
        }
        AnyBox::Float(bx) => Ok(AnyBox::Float(bias_float_box(bx, sigma, params.eps_float())?)),
    }
}

/// The chained Bell expression
/// `P(X = Y | 0, 2N−1) + Σ_{|u−v|=1} P(X ≠ Y | u, v)`.
pub fn bell_value<V: Value>(b: &SinglePairBox<V>) -> Number {
    let n = b.n_settings;
    let same = |a: usize, bb: usize| b.get(a, bb, 0, 0).clone() + b.get(a, bb, 1, 1).clone();
    let diff = |a: usize, bb: usize| b.get(a, bb, 0, 1).clone() + b.get(a, bb, 1, 0).clone();
    let mut total = same(0, n - 1);
    for a in 0..n {
        // v = u + 1 is Bob index a; v = u − 1 is Bob index a − 1.
        total = total + diff(a, a);
        if a > 0 {
            total = total + diff(a, a - 1);
        }
    }
    total.normalize(&b.unit)
}

impl<V: Value + fmt::Display> fmt::Display for SinglePairBox<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.n_settings {
            for b in 0..self.n_settings {
                writeln!(
                    f,
                    "u={} v={}: [{} {}; {} {}]",
                    2 * a,
                    2 * b + 1,
                    self.get(a, b, 0, 0),
                    self.get(a, b, 1, 0),
                    self.get(a, b, 0, 1),
                    self.get(a, b, 1, 1)
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn pair_set(n: usize) -> BTreeSet<(usize, usize)> {
        allowed_pairs(n).unwrap().into_iter().collect()
    }

    #[test]
    fn allowed_pairs_small_cases() {
        assert_eq!(
            pair_set(2),
            [(0, 1), (2, 1), (2, 3), (0, 3)].into_iter().collect()
        );
        assert_eq!(
            pair_set(3),
            [(0, 1), (2, 1), (2, 3), (4, 3), (4, 5), (0, 5)]
                .into_iter()
                .collect()
        );
        assert!(allowed_pairs(1).is_err());
    }

    #[test]
    fn allowed_pairs_match_enumeration() {
        for n in 2usize..8 {
            let mut brute = BTreeSet::new();
            for u in (0..2 * n).step_by(2) {
                for v in (1..2 * n).step_by(2) {
                    if u.abs_diff(v) == 1 || (u == 0 && v == 2 * n - 1) {
                        brute.insert((u, v));
                    }
                }
            }
            assert_eq!(pair_set(n), brute);
            assert_eq!(allowed_pairs(n).unwrap().len(), 2 * n);
        }
    }

    #[test]
    fn unbiased_exact_cells() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        // (u, v) = (0, 1)
        assert_eq!(b.get(0, 0, 0, 0), &rat(7, 16));
        assert_eq!(b.get(0, 0, 1, 1), &rat(7, 16));
        assert_eq!(b.get(0, 0, 0, 1), &rat(1, 16));
        // (u, v) = (0, 3)
        assert_eq!(b.get(0, 1, 0, 0), &rat(1, 16));
        assert_eq!(b.get(0, 1, 1, 0), &rat(7, 16));
        b.check_invariants().unwrap();
    }

    #[test]
    fn unbiased_quantum_cells() {
        let b = build_quantum_box(2).unwrap();
        assert!((quantum_eps(2) - 0.146_446_609_406_726_2).abs() < 1e-12);
        assert!((b.get(0, 0, 0, 0) - 0.426_776_695_296_636_9).abs() < 1e-12);
        b.check_invariants().unwrap();
    }

    #[test]
    fn cross_probability_endpoints() {
        for n in 2..6 {
            let eps = rat(1, 10);
            assert_eq!(linear_cross_probability(n, &eps, 1), eps);
            assert_eq!(linear_cross_probability(n, &eps, 2 * n - 1), rat(9, 10));
            let q = quantum_cross_probability(n, 2 * n - 1);
            assert!((q - (1.0 - quantum_eps(n))).abs() < 1e-12);
        }
    }

    #[test]
    fn biased_box_row_pattern() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        let biased = bias_box(&b, 0, &rat(1, 8)).unwrap();
        assert_eq!(biased.get(0, 0, 0, 0), &rat(1, 2));
        assert_eq!(biased.get(0, 0, 1, 0), &rat(0, 1));
        assert_eq!(biased.get(0, 0, 0, 1), &rat(1, 8));
        assert_eq!(biased.get(0, 0, 1, 1), &rat(3, 8));
        biased.check_invariants().unwrap();
    }

    #[test]
    fn biased_alice_marginal_n3() {
        let eps = rat(1, 10);
        let b = build_exact_box(3, &eps).unwrap();
        let biased = bias_box(&b, 1, &eps).unwrap();
        for a in 0..3 {
            for bb in 0..3 {
                assert_eq!(biased.alice_marginal(a, bb, 1), rat(3, 5));
            }
        }
    }

    #[test]
    fn bias_underflow_is_reported() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        assert!(matches!(
            bias_box(&b, 0, &rat(1, 4)),
            Err(Error::MalformedBox(_))
        ));
    }

    #[test]
    fn bell_values() {
        let b = build_exact_box(2, &rat(1, 8)).unwrap();
        assert_eq!(bell_value(&b), Number::ratio(1, 2));
        let q = build_quantum_box(2).unwrap();
        let v = bell_value(&q).to_f64();
        assert!((v - 0.585_786_437_626_904_9).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(BoxParams::rational(2, rat(0, 1)).is_err());
        assert!(BoxParams::rational(2, rat(3, 5)).is_err());
        assert!(BoxParams::rational(1, rat(1, 8)).is_err());
        assert!(BoxParams::rational(2, rat(1, 2)).is_ok());
        assert!(BoxParams::quantum(1).is_err());
    }

    #[test]
    fn fixed_conversion_shares_denominator() {
        let eps = rat(1, 8);
        let b = build_exact_box(2, &eps).unwrap();
        let b0 = bias_box(&b, 0, &eps).unwrap();
        let (fixed, den) = SinglePairBox::to_fixed(&[&b, &b0]).unwrap();
        assert_eq!(den, BigInt::from(16));
        assert_eq!(fixed[0].get(0, 0, 0, 0), &Fixed(7));
        assert_eq!(fixed[1].get(0, 0, 0, 0), &Fixed(8));
        fixed[1].check_invariants().unwrap();
    }
}

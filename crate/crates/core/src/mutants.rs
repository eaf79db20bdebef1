//! Deliberately broken systems and boxes for mutation tests of the verifiers.

use std::sync::Arc;

use crate::bits;
use crate::box_lab::SinglePairBox;
use crate::error::{Error, Result};
use crate::system::SystemEvaluator;
use crate::value::Value;

/// Biases box `position` toward the output of box `position + 1` (XOR the
/// part index). Each string's bias decision thus reads a bit produced later
/// in time, which the pivotal index of the real attack never does.
///
/// Flipping `x_position` leaves the decision unchanged, so the system is
/// still normalized and nonnegative; only the time order is broken.
#[derive(Clone, Debug)]
pub struct FuturePeekingSystem<V> {
    base: SinglePairBox<V>,
    biased: [SinglePairBox<V>; 2],
    n: usize,
    position: usize,
    z: u8,
    unit: V,
}

impl<V: Value> FuturePeekingSystem<V> {
    pub fn new(
        base: SinglePairBox<V>,
        biased: [SinglePairBox<V>; 2],
        n: usize,
        position: usize,
        z: u8,
    ) -> Result<Self> {
        if position == 0 || position >= n {
            return Err(Error::InvalidParameter(format!(
                "peeking position must be in 1..{n}, got {position}"
            )));
        }
        let unit = (0..n).fold(V::from_int(1), |acc, _| acc * base.unit().clone());
        Ok(FuturePeekingSystem {
            base,
            biased,
            n,
            position,
            z: z & 1,
            unit,
        })
    }
}

impl<V: Value> SystemEvaluator<V> for FuturePeekingSystem<V> {
    fn n(&self) -> usize {
        self.n
    }

    fn n_settings(&self) -> usize {
        self.base.n_settings()
    }

    fn unit(&self) -> V {
        self.unit.clone()
    }

    fn evaluate(&self, x: usize, y: usize, u: &[usize], v: &[usize]) -> V {
        let n = self.n;
        let sigma = bits::bit(x, self.position + 1, n) as u8 ^ self.z;
        (1..=n).fold(V::from_int(1), |acc, pos| {
            let b = if pos == self.position {
                &self.biased[sigma as usize]
            } else {
                &self.base
            };
            acc * b
                .get(u[pos - 1], v[pos - 1], bits::bit(x, pos, n), bits::bit(y, pos, n))
                .clone()
        })
    }
}

/// Moves `amount` from entry `(x_from, y_from)` to `(x_to, y_to)` at one
/// input pair. Normalization survives; nonnegativity need not.
pub struct ShiftedEntry<V> {
    pub inner: Arc<dyn SystemEvaluator<V>>,
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub amount: V,
}

impl<V: Value> SystemEvaluator<V> for ShiftedEntry<V> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn n_settings(&self) -> usize {
        self.inner.n_settings()
    }

    fn unit(&self) -> V {
        self.inner.unit()
    }

    fn evaluate(&self, x: usize, y: usize, u: &[usize], v: &[usize]) -> V {
        let value = self.inner.evaluate(x, y, u, v);
        if u != self.u.as_slice() || v != self.v.as_slice() {
            return value;
        }
        if (x, y) == self.from {
            value - self.amount.clone()
        } else if (x, y) == self.to {
            value + self.amount.clone()
        } else {
            value
        }
    }
}

/// Shifts `amount` between the two `x = 0` cells of square `(a, b)`: the
/// square stays normalized and Alice's marginal is untouched, but Bob's
/// marginal now depends on Alice's setting.
pub fn perturb_bob_marginal<V: Value>(
    b: &SinglePairBox<V>,
    a: usize,
    bob: usize,
    amount: V,
) -> SinglePairBox<V> {
    let mut out = b.clone();
    out.set(a, bob, 0, 0, b.get(a, bob, 0, 0).clone() + amount.clone());
    out.set(a, bob, 0, 1, b.get(a, bob, 0, 1).clone() - amount);
    out
}

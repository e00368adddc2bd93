//! Distribution-valued signal samples.
//!
//! A signal at one scheduled instant is stored as its impulse-free left and
//! right limits plus a sparse vector of Dirac coefficients, where the entry at
//! order `i` multiplies the `i`-th derivative of the delta located at the
//! current instant. Both limits share the same impulses.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("need {needed} derivative values of the impulse-free factor, got {got}")]
    InsufficientDerivatives { needed: usize, got: usize },
}

/// Sparse impulse coefficients keyed by derivative order.
///
/// Exact zeros are never stored, so an empty vector means "no impulse".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImpulseVector {
    coefficients: BTreeMap<u32, f64>,
}

impl ImpulseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from `(order, coefficient)` pairs. Repeated orders are
    /// summed.
    pub fn from_pairs<I: IntoIterator<Item = (u32, f64)>>(pairs: I) -> Self {
        let mut v = Self::new();
        for (order, value) in pairs {
            v.accumulate(order, value);
        }
        v.prune();
        v
    }

    pub fn single(order: u32, coefficient: f64) -> Self {
        Self::from_pairs([(order, coefficient)])
    }

    pub fn get(&self, order: u32) -> f64 {
        self.coefficients.get(&order).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, order: u32, value: f64) {
        if value == 0.0 {
            self.coefficients.remove(&order);
        } else {
            self.coefficients.insert(order, value);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn max_order(&self) -> Option<u32> {
        self.coefficients.keys().next_back().copied()
    }

    /// Iterates `(order, coefficient)` in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.coefficients.iter().map(|(&o, &c)| (o, c))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_pairs(self.iter().map(|(o, c)| (o, c * factor)))
    }

    // Adds without pruning; callers prune once at the end so that
    // intermediate cancellation does not reorder additions.
    fn accumulate(&mut self, order: u32, value: f64) {
        *self.coefficients.entry(order).or_insert(0.0) += value;
    }

    fn prune(&mut self) {
        self.coefficients.retain(|_, c| *c != 0.0);
    }
}

impl fmt::Display for ImpulseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, (o, c)) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{o}: {c}")?;
        }
        write!(f, "}}")
    }
}

/// One signal value at one scheduled time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepSample {
    pub left: f64,
    pub right: f64,
    pub impulses: ImpulseVector,
}

impl StepSample {
    pub fn new(left: f64, right: f64, impulses: ImpulseVector) -> Self {
        Self {
            left,
            right,
            impulses,
        }
    }

    /// A sample with equal limits and no impulses.
    pub fn value(v: f64) -> Self {
        Self::new(v, v, ImpulseVector::new())
    }

    pub fn limits(left: f64, right: f64) -> Self {
        Self::new(left, right, ImpulseVector::new())
    }

    pub fn has_impulses(&self) -> bool {
        !self.impulses.is_empty()
    }

    /// True when the impulse-free part jumps at this instant.
    pub fn is_discontinuous(&self) -> bool {
        self.left != self.right
    }
}

/// Orderwise sum of two coefficient vectors.
pub fn add_impulses(a: &ImpulseVector, b: &ImpulseVector) -> ImpulseVector {
    let mut out = a.clone();
    for (o, c) in b.iter() {
        out.accumulate(o, c);
    }
    out.prune();
    out
}

pub fn add_samples(a: &StepSample, b: &StepSample) -> StepSample {
    StepSample {
        left: a.left + b.left,
        right: a.right + b.right,
        impulses: add_impulses(&a.impulses, &b.impulses),
    }
}

pub fn negate_sample(a: &StepSample) -> StepSample {
    StepSample {
        left: -a.left,
        right: -a.right,
        impulses: a.impulses.scaled(-1.0),
    }
}

/// Differentiates the impulse part: every `δ^(i)` becomes `δ^(i+1)`.
pub fn shift_orders_up(v: &ImpulseVector) -> ImpulseVector {
    ImpulseVector::from_pairs(v.iter().map(|(o, c)| (o + 1, c)))
}

/// Integrates the impulse part. The order-0 coefficient becomes a step of
/// that height; every other order drops by one.
pub fn extract_order_zero(v: &ImpulseVector) -> (f64, ImpulseVector) {
    let jump = v.get(0);
    let rest = ImpulseVector::from_pairs(v.iter().filter(|&(o, _)| o > 0).map(|(o, c)| (o - 1, c)));
    (jump, rest)
}

/// Multiplies an impulse vector by a smooth factor `u`.
///
/// `u_derivatives[k]` holds `u^(k)` at the impulse instant. Each coefficient
/// `a_i` at order `i` contributes `a_i * C(i,k) * u^(k) * (-1)^k` to order
/// `i - k` for `k = 0..=i`.
pub fn leibniz_product(
    u_derivatives: &[f64],
    v: &ImpulseVector,
) -> Result<ImpulseVector, SignalError> {
    let Some(max) = v.max_order() else {
        return Ok(ImpulseVector::new());
    };
    let needed = max as usize + 1;
    if u_derivatives.len() < needed {
        return Err(SignalError::InsufficientDerivatives {
            needed,
            got: u_derivatives.len(),
        });
    }
    let mut out = ImpulseVector::new();
    for (i, a) in v.iter() {
        for k in 0..=i {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            out.accumulate(i - k, a * binomial(i, k) * u_derivatives[k as usize] * sign);
        }
    }
    out.prune();
    Ok(out)
}

/// Binomial coefficient as a float; exact while the result fits in 53 bits.
/// Past 128-bit range it falls back to a floating product, which may
/// overflow to infinity.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        match acc.checked_mul(u128::from(n - j)) {
            Some(p) => acc = p / u128::from(j + 1),
            None => return (0..k).fold(1.0, |a, j| a * f64::from(n - j) / f64::from(j + 1)),
        }
    }
    acc as f64
}

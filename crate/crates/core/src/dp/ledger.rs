use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::PrivacyBudget;
use crate::error::{Error, Result};

/// An exact nonnegative rational, used for shares of a declared budget so that
/// composition can be checked without rounding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub num: u64,
    pub den: u64,
}

const fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Share {
    pub const ZERO: Share = Share { num: 0, den: 1 };
    pub const ONE: Share = Share { num: 1, den: 1 };

    /// `num / den` in lowest terms. Panics if `den == 0`.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "share denominator must be nonzero");
        Self::reduce(num as u128, den as u128).expect("reduced share fits in u64")
    }

    fn reduce(num: u128, den: u128) -> Option<Self> {
        let g = gcd(num, den).max(1);
        let (n, d) = (num / g, den / g);
        Some(Self { num: u64::try_from(n).ok()?, den: u64::try_from(d).ok()? })
    }

    pub fn add(self, o: Self) -> Result<Self> {
        let num = self.num as u128 * o.den as u128 + o.num as u128 * self.den as u128;
        let den = self.den as u128 * o.den as u128;
        Self::reduce(num, den).ok_or(Error::Invalid("share arithmetic overflow"))
    }

    pub fn mul(self, o: Self) -> Result<Self> {
        Self::reduce(self.num as u128 * o.num as u128, self.den as u128 * o.den as u128)
            .ok_or(Error::Invalid("share arithmetic overflow"))
    }

    pub fn max(self, o: Self) -> Self {
        if self.num as u128 * o.den as u128 >= o.num as u128 * self.den as u128 {
            self
        } else {
            o
        }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }

    fn exceeds_one(self) -> bool {
        self.num > self.den
    }

    /// `value · share`, returning `value` bit-exactly when the share is 1.
    pub fn apply(self, value: f64) -> f64 {
        if self.is_one() {
            value
        } else {
            value * self.num as f64 / self.den as f64
        }
    }
}

/// How a charge composes with the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    /// Adds to every other sequential charge.
    Sequential,
    /// Charges in the same group touch disjoint data; the group costs its
    /// maximum share, not the sum.
    Parallel { group: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub scope: Scope,
    pub epsilon_share: Share,
    pub delta_share: Share,
}

/// Records every mechanism invocation against a declared budget.
///
/// `charged()` reproduces the declared budget exactly when the composed
/// shares add up to exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    declared: PrivacyBudget,
    charges: Vec<Charge>,
}

impl PrivacyLedger {
    pub fn new(declared: PrivacyBudget) -> Self {
        Self { declared, charges: Vec::new() }
    }

    pub fn declared(&self) -> PrivacyBudget {
        self.declared
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    /// Records a charge and returns the `(ε, δ)` the mechanism may spend.
    /// Fails without recording if the total would exceed the declared budget.
    pub fn charge(&mut self, label: &str, scope: Scope, epsilon_share: Share, delta_share: Share) -> Result<PrivacyBudget> {
        self.charges.push(Charge { label: label.into(), scope, epsilon_share, delta_share });
        let (e, d) = match self.total_shares() {
            Ok(t) => t,
            Err(err) => {
                self.charges.pop();
                return Err(err);
            }
        };
        for s in [e, d] {
            if s.exceeds_one() {
                self.charges.pop();
                return Err(Error::BudgetExceeded { num: s.num, den: s.den });
            }
        }
        Ok(PrivacyBudget {
            epsilon: epsilon_share.apply(self.declared.epsilon),
            delta: delta_share.apply(self.declared.delta),
        })
    }

    /// Records a sub-computation that kept its own ledger. The sub-ledger's
    /// total shares, scaled by `share`, become a single charge here.
    pub fn charge_composed(&mut self, label: &str, scope: Scope, share: Share, inner: &PrivacyLedger) -> Result<PrivacyBudget> {
        let (e, d) = inner.total_shares()?;
        self.charge(label, scope, share.mul(e)?, share.mul(d)?)
    }

    /// Composed `(ε, δ)` shares: sequential charges add, each parallel group
    /// contributes its maximum.
    pub fn total_shares(&self) -> Result<(Share, Share)> {
        let mut groups: Vec<(u32, Share, Share)> = Vec::new();
        let (mut e, mut d) = (Share::ZERO, Share::ZERO);
        for c in &self.charges {
            match c.scope {
                Scope::Sequential => {
                    e = e.add(c.epsilon_share)?;
                    d = d.add(c.delta_share)?;
                }
                Scope::Parallel { group } => match groups.iter_mut().find(|g| g.0 == group) {
                    Some(g) => {
                        g.1 = g.1.max(c.epsilon_share);
                        g.2 = g.2.max(c.delta_share);
                    }
                    None => groups.push((group, c.epsilon_share, c.delta_share)),
                },
            }
        }
        for (_, ge, gd) in groups {
            e = e.add(ge)?;
            d = d.add(gd)?;
        }
        Ok((e, d))
    }

    /// Total privacy loss computed from the recorded charges.
    pub fn charged(&self) -> Result<PrivacyBudget> {
        let (e, d) = self.total_shares()?;
        Ok(PrivacyBudget { epsilon: e.apply(self.declared.epsilon), delta: d.apply(self.declared.delta) })
    }

    /// True when the charges compose to exactly the declared budget.
    pub fn is_exhausted(&self) -> bool {
        matches!(self.total_shares(), Ok((e, d)) if e.is_one() && (d.is_one() || self.declared.delta == 0.0))
    }
}

//! Linear functionals on behaviours and their local bounds.

use serde::Serialize;

use crate::bloch::{Behavior, Scenario};
use crate::error::{Error, Result};

/// Coefficients `c_{ab|xy}` with the same layout as a [`Behavior`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellFunctional {
    coefficients: Behavior,
    local_bound: Option<f64>,
}

/// Deterministic strategies are enumerated on one side only; this caps their number.
const MAX_STRATEGIES: usize = 1 << 22;

/// Every map `x ↦ a` with `a < outcomes[x]`, first setting most significant.
pub fn response_maps(outcomes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = outcomes.iter().product();
    (0..total)
        .map(|mut k| {
            let mut map = vec![0; outcomes.len()];
            for (slot, &c) in map.iter_mut().zip(outcomes).rev() {
                *slot = k % c;
                k /= c;
            }
            map
        })
        .collect()
}

impl BellFunctional {
    pub fn zeros(scenario: Scenario) -> Self {
        BellFunctional {
            coefficients: Behavior::zeros(scenario),
            local_bound: None,
        }
    }

    pub fn from_fn(scenario: Scenario, f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        BellFunctional {
            coefficients: Behavior::from_fn(scenario, f),
            local_bound: None,
        }
    }

    /// Coefficients in [`Behavior::values`] order.
    pub fn from_values(scenario: Scenario, values: &[f64]) -> Result<Self> {
        let mut k = 0;
        let mut ok = true;
        let table = Behavior::from_fn(scenario, |_, _, _, _| {
            let v = values.get(k).copied();
            k += 1;
            ok &= v.is_some();
            v.unwrap_or(0.0)
        });
        if !ok || k != values.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a table of {k}",
                values.len()
            )));
        }
        Ok(BellFunctional {
            coefficients: table,
            local_bound: None,
        })
    }

    /// `Σ_xy (−1)^{xy} E_xy` with `E_xy = Σ_ab (−1)^{a+b} p(ab|xy)`; local bound 2.
    pub fn chsh() -> Self {
        let scenario = Scenario::new(vec![2, 2], vec![2, 2]);
        let f = BellFunctional::from_fn(scenario, |a, b, x, y| if (a + b + x * y) % 2 == 0 { 1.0 } else { -1.0 });
        f.with_local_bound(2.0)
    }

    pub fn with_local_bound(mut self, bound: f64) -> Self {
        self.local_bound = Some(bound);
        self
    }

    pub fn scenario(&self) -> &Scenario {
        self.coefficients.scenario()
    }

    pub fn coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coefficients.get(a, b, x, y)
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        self.coefficients.set(a, b, x, y, v);
        self.local_bound = None;
    }

    pub fn values(&self) -> &[f64] {
        self.coefficients.values()
    }

    pub fn known_local_bound(&self) -> Option<f64> {
        self.local_bound
    }

    pub fn evaluate(&self, p: &Behavior) -> Result<f64> {
        if p.scenario() != self.scenario() {
            return Err(Error::Dimension("functional and behaviour scenarios differ".into()));
        }
        Ok(self.values().iter().zip(p.values()).map(|(c, v)| c * v).sum())
    }

    /// Exact maximum over deterministic strategies: enumerate Alice's maps and let Bob
    /// respond optimally per setting.
    pub fn enumerated_local_bound(&self) -> Result<f64> {
        let s = self.scenario();
        let count: usize = s.alice_outcomes.iter().product();
        if count > MAX_STRATEGIES {
            return Err(Error::TooLarge(format!("{count} deterministic strategies for Alice")));
        }
        let mut best = f64::NEG_INFINITY;
        for f in response_maps(&s.alice_outcomes) {
            let mut total = 0.0;
            for y in 0..s.bob_settings() {
                let column = (0..s.bob_outcomes[y])
                    .map(|b| {
                        (0..s.alice_settings())
                            .map(|x| self.coefficient(f[x], b, x, y))
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                total += column;
            }
            best = best.max(total);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chsh_local_bound_is_two() {
        let f = BellFunctional::chsh();
        assert_eq!(f.enumerated_local_bound().unwrap(), 2.0);
        assert_eq!(f.known_local_bound(), Some(2.0));
    }

    #[test]
    fn zero_functional() {
        let f = BellFunctional::zeros(Scenario::new(vec![2, 3], vec![3]));
        assert_eq!(f.enumerated_local_bound().unwrap(), 0.0);
    }

    #[test]
    fn from_values_checks_length() {
        let s = Scenario::new(vec![2], vec![2]);
        assert!(BellFunctional::from_values(s.clone(), &[1.0, 2.0, 3.0]).is_err());
        let f = BellFunctional::from_values(s, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.coefficient(1, 0, 0, 0), 3.0);
    }

    #[test]
    fn maps_cover_all_strategies() {
        let m = response_maps(&[2, 3]);
        assert_eq!(m.len(), 6);
        assert_eq!(m[5], vec![1, 2]);
    }
}

use super::{SequentialGraph, TwistError, TwistingSet};
use crate::math::log_sum_exp;

/// Largest joint state space accepted by exhaustive routines.
pub const MAX_ENUMERATION_STATES: usize = 1 << 24;

/// Exact twisting `psi*_t(x_0..x_t) = sum over x_{t+1..} of the product of
/// the factors not yet included`, tabulated for every prefix.
#[derive(Debug, Clone)]
pub struct EnumeratedTwist {
    cards: Vec<usize>,
    /// `tables[t]` holds `log psi*` for prefixes of length `t + 1`, indexed
    /// in mixed radix with the first step most significant.
    tables: Vec<Vec<f64>>,
    log_z: f64,
}

impl EnumeratedTwist {
    fn index(&self, prefix: &[usize]) -> usize {
        prefix
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&x, &c)| acc * c + x)
    }

    /// `log Z`, the sum of the full product over all assignments.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }
}

impl TwistingSet for EnumeratedTwist {
    fn num_steps(&self) -> usize {
        self.cards.len()
    }

    fn log_psi(&self, prefix: &[usize]) -> f64 {
        let len = prefix.len();
        if len == 0 || len == self.cards.len() {
            0.0
        } else {
            self.tables[len - 1][self.index(prefix)]
        }
    }
}

/// Advances a mixed-radix counter (last position fastest); returns false
/// after the final state.
fn odometer(digits: &mut [usize], cards: &[usize]) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < cards[k] {
            return true;
        }
        digits[k] = 0;
    }
    false
}

/// Computes optimal twisting functions by backward summation over the
/// visiting order of `model`.
pub fn optimal_twisting_enumerate(model: &SequentialGraph) -> Result<EnumeratedTwist, TwistError> {
    let steps = model.cards.len();
    let states: f64 = model.cards.iter().map(|&c| c as f64).product();
    if states > MAX_ENUMERATION_STATES as f64 {
        return Err(TwistError::TooLargeForEnumeration {
            states,
            limit: MAX_ENUMERATION_STATES,
        });
    }
    let cards = model.cards.clone();
    let mut tables: Vec<Vec<f64>> = vec![Vec::new(); steps.saturating_sub(1)];
    let mut terms = Vec::new();
    // `next` is log psi* at prefix length t + 2 (all zeros at full length).
    for t in (0..steps.saturating_sub(1)).rev() {
        let len = t + 1;
        let size: usize = cards[..len].iter().product();
        let mut table = Vec::with_capacity(size);
        let mut prefix = vec![0; len];
        let c_next = cards[len];
        loop {
            let base = table.len() * c_next;
            terms.clear();
            for x in 0..c_next {
                let after = if len + 1 == steps { 0.0 } else { tables[len][base + x] };
                terms.push(model.log_step_factors(&prefix, x) + after);
            }
            table.push(log_sum_exp(&terms));
            if !odometer(&mut prefix, &cards[..len]) {
                break;
            }
        }
        tables[t] = table;
    }
    let log_z = if steps == 0 {
        0.0
    } else {
        let first: Vec<f64> = (0..cards[0])
            .map(|x| {
                let after = if steps == 1 { 0.0 } else { tables[0][x] };
                model.log_step_factors(&[], x) + after
            })
            .collect();
        log_sum_exp(&first)
    };
    Ok(EnumeratedTwist {
        cards,
        tables,
        log_z,
    })
}

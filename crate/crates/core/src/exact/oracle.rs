//! Exhaustive reference solver for tiny instances.

use thiserror::Error;

use crate::feasibility::check_feasibility;
use crate::model::{EvId, Scenario};
use crate::schedule::{simulate_trace, Assignment};

pub const ORACLE_MAX_CUSTOMERS: usize = 8;
pub const ORACLE_MAX_EVS: usize = 4;
const ORACLE_MAX_CANDIDATES: u128 = 20_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("instance too large for exhaustive enumeration ({customers} customers, {evs} EVs, {candidates} candidates)")]
pub struct InstanceTooLarge {
    pub customers: usize,
    pub evs: usize,
    pub candidates: u128,
}

/// Best objective over every mapping of customers to rejection or an
/// (alternative, EV) pair, each candidate validated by the trace simulator
/// and the constraint checker.
pub fn brute_force_oracle(s: &Scenario) -> Result<usize, InstanceTooLarge> {
    let n_ev = s.evs.len();
    let radix: Vec<usize> = s
        .customers
        .iter()
        .map(|c| 1 + c.alternatives.len() * n_ev)
        .collect();
    let candidates = radix.iter().map(|&r| r as u128).product::<u128>();
    if s.customers.len() > ORACLE_MAX_CUSTOMERS
        || n_ev > ORACLE_MAX_EVS
        || candidates > ORACLE_MAX_CANDIDATES
    {
        return Err(InstanceTooLarge {
            customers: s.customers.len(),
            evs: n_ev,
            candidates,
        });
    }

    let mut digits = vec![0usize; radix.len()];
    let mut best = 0;
    loop {
        let accepted = digits.iter().filter(|&&d| d > 0).count();
        if accepted > best {
            let mut assignment = Assignment::new();
            for (c, &d) in s.customers.iter().zip(&digits) {
                if d > 0 {
                    let k = d - 1;
                    assignment.insert(c.alternatives[k / n_ev], EvId(k % n_ev));
                }
            }
            if let Ok(sch) = simulate_trace(s, &assignment) {
                if check_feasibility(s, &sch).ok {
                    best = accepted;
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return Ok(best);
            }
            digits[pos] += 1;
            if digits[pos] < radix[pos] {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    #[test]
    fn zero_customers() {
        let s = two_station_scenario(5, &[(0, 100.0)]);
        assert_eq!(brute_force_oracle(&s), Ok(0));
    }

    #[test]
    fn single_task() {
        let mut s = two_station_scenario(5, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 1)], 0);
        assert_eq!(brute_force_oracle(&s), Ok(1));
    }

    #[test]
    fn chains_and_conflicts() {
        // A->B at 1, B->A at 4, and a competing A->B at 2 for the one EV.
        let mut s = two_station_scenario(9, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 1)], 0);
        add_customer(&mut s, &[(1, 4)], 0);
        add_customer(&mut s, &[(0, 2)], 0);
        assert_eq!(brute_force_oracle(&s), Ok(2));
    }

    #[test]
    fn refuses_large_instances() {
        let mut s = two_station_scenario(9, &[(0, 100.0); 5]);
        add_customer(&mut s, &[(0, 1)], 0);
        assert!(brute_force_oracle(&s).is_err());
    }
}

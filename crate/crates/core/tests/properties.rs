mod common;

use common::props::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solvers_are_deterministic(seed in any::<u64>(), tight in any::<bool>()) {
        determinism(seed, tight)?;
    }

    #[test]
    fn reservations_respect_capacity(seed in any::<u64>(), tight in any::<bool>()) {
        capacity_with_reservations(seed, tight)?;
    }

    #[test]
    fn battery_stays_in_band(seed in any::<u64>(), tight in any::<bool>()) {
        battery_band(seed, tight)?;
    }

    #[test]
    fn two_location_changes_per_task(seed in any::<u64>(), tight in any::<bool>()) {
        location_change_count(seed, tight)?;
    }

    #[test]
    fn one_alternative_per_customer(seed in any::<u64>(), tight in any::<bool>()) {
        customer_exclusivity(seed, tight)?;
    }

    #[test]
    fn extra_ev_never_hurts(seed in any::<u64>(), tight in any::<bool>()) {
        ev_addition_monotone(seed, tight)?;
    }

    #[test]
    fn online_never_beats_optimal(seed in any::<u64>(), tight in any::<bool>()) {
        online_within_optimal(seed, tight)?;
    }

    #[test]
    fn every_schedule_is_feasible(seed in any::<u64>(), tight in any::<bool>()) {
        schedules_feasible(seed, tight)?;
    }

    #[test]
    fn balance_rows_do_not_change_the_optimum(seed in any::<u64>(), tight in any::<bool>()) {
        cut_neutral(seed, tight)?;
    }

    #[test]
    fn full_model_agrees_with_and_without_balance_rows(seed in any::<u64>()) {
        model_cut_neutral(seed)?;
    }

    #[test]
    fn lp_text_round_trips(seed in any::<u64>(), tight in any::<bool>()) {
        lp_round_trip(seed, tight)?;
    }

    #[test]
    fn rejected_customers_leave_no_trace(seed in any::<u64>(), tight in any::<bool>()) {
        rejection_replay(seed, tight)?;
    }

    #[test]
    fn files_round_trip(seed in any::<u64>(), tight in any::<bool>()) {
        json_round_trip(seed, tight)?;
    }
}

#[test]
fn extra_ev_can_block_the_only_free_spot() {
    use modfleet::exact::{solve_exact, ExactConfig};
    use modfleet::model::StationId;

    let s = common::small_scenario(6915790662529924287, common::SmallSpec::ORACLE.tight());
    assert_eq!(s.network.stations[0].capacity, 1);
    assert_eq!(s.tasks.len(), 1);
    assert_eq!(s.tasks[0].dest, StationId(0));
    let cfg = ExactConfig::default();
    assert_eq!(solve_exact(&s, &cfg).unwrap().objective, 1);
    let bigger = s.with_extra_ev(StationId(0));
    assert_eq!(solve_exact(&bigger, &cfg).unwrap().objective, 0);
}

mod common;

use common::props::*;
use common::{layer_case, net_case};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn spikes_stay_in_their_window(case in net_case()) {
        window(&case)?;
    }

    #[test]
    fn spike_time_is_the_first_crossing(case in layer_case()) {
        first_crossing(&case)?;
    }

    #[test]
    fn output_gradient_sums_to_zero(case in grad_case()) {
        grad_zero_sum(&case)?;
    }

    #[test]
    fn ledger_is_monotone_and_snapshots_replay(case in ledger_case()) {
        ledger_replay(&case)?;
    }

    #[test]
    fn top_k_moves_exactly_the_largest_changes(case in top_k_case()) {
        top_k_exact(&case)?;
    }
}

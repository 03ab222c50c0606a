mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use fchp::model::{check_feasibility, derive_timeline, evaluate, Pool};
use fchp::rng::seeded;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn evaluate_ignores_assignment_order(seed in 0u64..10_000, shuffle in any::<u64>()) {
        let inst = common::tiny_varied(seed);
        let sol = common::random_feasible(&inst, &mut seeded(seed));
        let mut permuted = sol.clone();
        permuted.assignments.shuffle(&mut seeded(shuffle));
        for a in &mut permuted.assignments {
            a.request_ids.shuffle(&mut seeded(shuffle ^ 1));
        }
        prop_assert_eq!(evaluate(&inst, &sol).unwrap(), evaluate(&inst, &permuted).unwrap());
    }

    #[test]
    fn total_matches_brute_force(seed in 0u64..10_000) {
        let inst = common::tiny_varied(seed);
        let sol = common::random_feasible(&inst, &mut seeded(seed + 7));
        prop_assert!(check_feasibility(&inst, &sol).is_empty());
        let cost = evaluate(&inst, &sol).unwrap();
        let oracle = common::brute_force_objective(&inst, &sol);
        prop_assert!((cost.total - oracle.total()).abs() <= 1e-9);
        prop_assert_eq!(cost.total, cost.attend + cost.backlog + cost.replication);
    }

    #[test]
    fn backlog_term_count_is_wait_length(seed in 0u64..10_000) {
        let inst = common::tiny_varied(seed);
        let sol = common::random_feasible(&inst, &mut seeded(seed + 3));
        let oracle = common::brute_force_objective(&inst, &sol);
        for a in &sol.assignments {
            for r in &a.request_ids {
                let i = inst.requests.iter().position(|q| q.id == *r).unwrap();
                prop_assert_eq!(oracle.backlog_terms[&i], a.period - inst.requests[i].arrival_period);
            }
        }
    }

    #[test]
    fn some_replica_always_exists(seed in 0u64..10_000) {
        let inst = common::tiny_varied(seed);
        let sol = common::random_feasible(&inst, &mut seeded(seed + 5));
        let tl = derive_timeline(&inst, &sol).unwrap();
        for c in &inst.contents {
            for t in c.start_period..inst.horizon {
                prop_assert!(tl.replica_count(t, c.id) >= 1);
            }
        }
    }

    #[test]
    fn hired_servers_bounded_by_pool(seed in 0u64..10_000) {
        let inst = common::tiny_varied(seed);
        let sol = common::random_feasible(&inst, &mut seeded(seed + 11));
        let cost = evaluate(&inst, &sol).unwrap();
        prop_assert!(cost.servers_od <= common::cloud_pool(&inst));
        let uses_cloud = sol.assignments.iter().any(|a| inst.server(a.server_id).unwrap().pool == Pool::Cloud);
        if !uses_cloud {
            prop_assert_eq!(cost.financial, 0.0);
            prop_assert_eq!(cost.servers_od, 0);
        }
    }
}

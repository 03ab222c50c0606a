use std::collections::BTreeMap;

use super::*;

pub(crate) fn server(id: u32, pool: Pool, storage: f64, bandwidth: f64) -> ServerSpec {
    ServerSpec { id: ServerId(id), pool, storage_mb: storage, bandwidth_mb: bandwidth, price_per_period: 1.0 }
}

fn content(id: u32, size: f64, origin: u32) -> Content {
    Content { id: ContentId(id), size_mb: size, start_period: 0, origin_server: ServerId(origin), mirrors: vec![] }
}

fn request(id: u32, content: u32, arrival: usize) -> Request {
    Request { id: RequestId(id), content_id: ContentId(content), arrival_period: arrival }
}

fn assign(content: u32, server: u32, requests: &[u32], period: usize) -> Assignment {
    Assignment {
        content_id: ContentId(content),
        server_id: ServerId(server),
        request_ids: requests.iter().map(|&r| RequestId(r)).collect(),
        period,
    }
}

/// Origin 0, cloud 1; one content of 600 MB; c = 90, h = 90, p = 180.
fn two_server_instance(requests: Vec<Request>) -> Instance {
    let mut costs = CostParams::default();
    for r in &requests {
        costs.attend.insert(r.id, 90.0);
    }
    costs.copy.insert(ContentId(0), 90.0);
    Instance {
        servers: vec![
            server(0, Pool::Origin, 10_000.0, 1000.0),
            server(1, Pool::Cloud, 1000.0, 1000.0),
        ],
        contents: vec![content(0, 600.0, 0)],
        requests,
        horizon: 4,
        period_seconds: 60.0,
        costs,
    }
}

#[test]
fn origin_service_moves_nothing() {
    let inst = two_server_instance(vec![request(0, 0, 1)]);
    let sol = Solution::new(vec![assign(0, 0, &[0], 1)]);
    let tl = derive_timeline(&inst, &sol).unwrap();
    assert!(tl.copy_events.is_empty());
    assert!(tl.hire_activity.is_empty());
    assert!(tl.holds(0, ServerId(0), ContentId(0)));
}

#[test]
fn cloud_service_forces_one_copy() {
    let inst = two_server_instance(vec![request(0, 0, 1)]);
    let sol = Solution::new(vec![assign(0, 1, &[0], 1)]);
    let tl = derive_timeline(&inst, &sol).unwrap();
    assert_eq!(
        tl.copy_events,
        vec![CopyEvent { content: ContentId(0), source: ServerId(0), destination: ServerId(1), period: 1 }]
    );
    assert!(tl.hire_activity[&ServerId(1)].contains(&1));
    assert!(!tl.hire_activity[&ServerId(1)].contains(&0));
}

#[test]
fn replica_persists_into_next_period() {
    let inst = two_server_instance(vec![request(0, 0, 1), request(1, 0, 2)]);
    let sol = Solution::new(vec![assign(0, 1, &[0], 1), assign(0, 1, &[1], 2)]);
    let tl = derive_timeline(&inst, &sol).unwrap();
    assert_eq!(tl.copy_events.len(), 1);
    assert_eq!(tl.copy_events[0].period, 1);
    assert!(tl.holds(2, ServerId(1), ContentId(0)));
    // released after its last use
    assert!(!tl.holds(3, ServerId(1), ContentId(0)));
    assert_eq!(tl.hire_activity[&ServerId(1)], [1, 2].into_iter().collect());
}

#[test]
fn empty_instance_costs_nothing() {
    let inst = two_server_instance(vec![]);
    let cost = evaluate(&inst, &Solution::default()).unwrap();
    assert_eq!(cost, CostBreakdown::default());
}

#[test]
fn single_term_objective() {
    let inst = two_server_instance(vec![request(0, 0, 0)]);
    let cost = evaluate(&inst, &Solution::new(vec![assign(0, 0, &[0], 0)])).unwrap();
    assert_eq!((cost.total, cost.attend, cost.backlog, cost.replication), (90.0, 90.0, 0.0, 0.0));
}

#[test]
fn three_term_objective() {
    let inst = two_server_instance(vec![request(0, 0, 0)]);
    let cost = evaluate(&inst, &Solution::new(vec![assign(0, 1, &[0], 1)])).unwrap();
    assert_eq!(cost.attend, 90.0);
    assert_eq!(cost.backlog, 180.0);
    assert_eq!(cost.replication, 90.0);
    assert_eq!(cost.total, 360.0);
    assert_eq!(cost.servers_od, 1);
    // cloud-1 active in period 1 only
    assert_eq!(cost.financial, 1.0);
}

#[test]
fn backlog_overrides_apply_per_period() {
    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.costs.backlog_overrides.push(BacklogOverride { request: RequestId(0), period: 1, penalty: 5.0 });
    let cost = evaluate(&inst, &Solution::new(vec![assign(0, 0, &[0], 2)])).unwrap();
    assert_eq!(cost.backlog, 180.0 + 5.0);
}

#[test]
fn evaluate_rejects_missing_and_duplicate_requests() {
    let inst = two_server_instance(vec![request(0, 0, 0), request(1, 0, 0)]);
    let err = evaluate(&inst, &Solution::new(vec![assign(0, 0, &[0], 0)])).unwrap_err();
    assert!(matches!(err, ModelError::IncompleteSolution(RequestId(1))));
    let err = evaluate(&inst, &Solution::new(vec![assign(0, 0, &[0, 1], 0), assign(0, 0, &[1], 1)]))
        .unwrap_err();
    assert!(matches!(err, ModelError::DuplicateRequest(RequestId(1))));
}

#[test]
fn feasible_single_request() {
    let inst = two_server_instance(vec![request(0, 0, 0)]);
    assert!(check_feasibility(&inst, &Solution::new(vec![assign(0, 0, &[0], 0)])).is_empty());
}

#[test]
fn bandwidth_exceeded_by_two_large_requests() {
    let inst = two_server_instance(vec![request(0, 0, 0), request(1, 0, 0)]);
    let v = check_feasibility(&inst, &Solution::new(vec![assign(0, 0, &[0, 1], 0)]));
    assert_eq!(v.len(), 1);
    assert!(matches!(
        v[0],
        Violation::BandwidthExceeded { server: ServerId(0), period: 0, load_mb, capacity_mb }
            if load_mb == 1200.0 && capacity_mb == 1000.0
    ));
    assert_eq!(v[0].to_string(), "BANDWIDTH_EXCEEDED server=0 period=0 load_mb=1200 capacity_mb=1000");
}

#[test]
fn omitted_request_is_unattended() {
    let inst = two_server_instance(vec![request(0, 0, 0), request(1, 0, 1)]);
    let v = check_feasibility(&inst, &Solution::new(vec![assign(0, 0, &[0], 0)]));
    assert_eq!(v, vec![Violation::Unattended { request: RequestId(1) }]);
}

#[test]
fn structural_violations_are_reported() {
    let mut inst = two_server_instance(vec![request(0, 0, 2)]);
    inst.contents.push(content(1, 10.0, 0));
    inst.fill_default_costs();
    let v = check_feasibility(&inst, &Solution::new(vec![assign(1, 0, &[0], 1)]));
    let rules: Vec<_> = v.iter().map(Violation::rule).collect();
    assert!(rules.contains(&"CONTENT_MISMATCH"));
    assert!(rules.contains(&"EARLY_SERVICE"));

    let v = check_feasibility(&inst, &Solution::new(vec![assign(0, 7, &[0], 2)]));
    assert_eq!(v[0].rule(), "UNKNOWN_REFERENCE");
    let v = check_feasibility(&inst, &Solution::new(vec![assign(0, 0, &[0], 9)]));
    assert!(v.iter().any(|x| x.rule() == "OUTSIDE_HORIZON"));
}

#[test]
fn content_used_before_start_is_flagged() {
    let mut inst = two_server_instance(vec![]);
    inst.contents[0].start_period = 2;
    inst.requests.push(request(0, 0, 2));
    inst.fill_default_costs();
    let v = check_feasibility(&inst, &Solution::new(vec![assign(0, 1, &[0], 1)]));
    assert!(v.iter().any(|x| x.rule() == "CONTENT_NOT_STARTED"));
}

fn lru_instance() -> Instance {
    // cloud server 1 stores a single 600 MB replica at a time
    let mut inst = two_server_instance(vec![]);
    inst.contents.push(content(1, 600.0, 0));
    inst.requests = vec![request(0, 0, 0), request(1, 1, 1), request(2, 0, 2), request(3, 1, 3)];
    inst.costs = CostParams::default();
    inst.fill_default_costs();
    inst
}

#[test]
fn lru_evicts_least_recently_used_copy() {
    let inst = lru_instance();
    let sol = Solution::new(vec![
        assign(0, 1, &[0], 0),
        assign(1, 1, &[1], 1),
        assign(0, 1, &[2], 2),
        assign(1, 1, &[3], 3),
    ]);
    let tl = derive_timeline(&inst, &sol).unwrap();
    assert_eq!(tl.copy_events.len(), 4);
    assert_eq!(tl.evictions.len(), 3);
    assert_eq!(tl.evictions[0], Eviction { content: ContentId(0), server: ServerId(1), period: 1 });
    assert!(!tl.holds(1, ServerId(1), ContentId(0)));
    assert!(check_feasibility(&inst, &sol).is_empty());
}

#[test]
fn replica_in_use_cannot_be_evicted() {
    let inst = lru_instance();
    let sol = Solution::new(vec![
        assign(0, 1, &[0], 0),
        assign(1, 1, &[1], 1),
        assign(0, 1, &[2], 1),
        assign(1, 0, &[3], 3),
    ]);
    // request 2 arrives at 2, so also early; storage is the point here
    let err = derive_timeline(&inst, &sol).unwrap_err();
    assert!(matches!(err, ModelError::UnsatisfiableStorage { server: ServerId(1), period: 1, .. }));
    let v = check_feasibility(&inst, &sol);
    assert!(v.iter().any(|x| x.rule() == "STORAGE_EXCEEDED"));
}

#[test]
fn pinned_replica_survives_pressure_on_origin() {
    // origin 0 only has room for its own content plus one copy
    let mut inst = lru_instance();
    inst.servers = vec![
        server(0, Pool::Origin, 1200.0, 5000.0),
        server(1, Pool::Origin, 1200.0, 5000.0),
    ];
    inst.contents[1].origin_server = ServerId(1);
    inst.contents.push(content(2, 600.0, 1));
    inst.requests.push(request(4, 2, 2));
    inst.fill_default_costs();
    let sol = Solution::new(vec![
        assign(1, 0, &[1], 1),
        assign(2, 0, &[4], 2),
        assign(0, 0, &[0], 0),
        assign(0, 0, &[2], 2),
        assign(1, 1, &[3], 3),
    ]);
    let tl = derive_timeline(&inst, &sol).unwrap();
    assert_eq!(tl.evictions, vec![Eviction { content: ContentId(1), server: ServerId(0), period: 2 }]);
    for t in 0..inst.horizon {
        for c in 0..3 {
            assert!(tl.replica_count(t, ContentId(c)) >= 1);
        }
        assert!(tl.holds(t, ServerId(0), ContentId(0)));
    }
}

#[test]
fn mirrors_hold_content_without_copies() {
    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.servers.push(server(2, Pool::Origin, 1000.0, 1000.0));
    inst.contents[0].mirrors.push(ServerId(2));
    let sol = Solution::new(vec![assign(0, 2, &[0], 0)]);
    assert_eq!(evaluate(&inst, &sol).unwrap().replication, 0.0);
}

#[test]
fn default_costs_follow_sizes() {
    let json = r#"{
        "servers": [{"id": 0, "pool": "origin", "storage_mb": 5000, "bandwidth_mb": 3000}],
        "contents": [{"id": 3, "size_mb": 900, "origin_server": 0}],
        "requests": [{"id": 0, "content_id": 3, "arrival_period": 0}],
        "horizon": 2
    }"#;
    let inst = Instance::from_json(json).unwrap();
    assert_eq!(inst.costs.attend[&RequestId(0)], 15.0);
    assert_eq!(inst.costs.copy[&ContentId(3)], 1.5);
    assert_eq!(inst.costs.backlog_penalty(RequestId(0), 1), Some(30.0));
    let back = Instance::from_json(&inst.to_json()).unwrap();
    assert_eq!(back, inst);
}

#[test]
fn invalid_instances_are_rejected() {
    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.horizon = 0;
    assert!(inst.validate().is_err());

    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.contents[0].origin_server = ServerId(1);
    assert!(inst.validate().is_err());

    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.requests[0].content_id = ContentId(9);
    assert!(matches!(inst.validate(), Err(ModelError::BrokenReference(_))));

    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.servers[0].storage_mb = 100.0;
    assert!(inst.validate().is_err());

    let mut inst = two_server_instance(vec![request(0, 0, 0)]);
    inst.costs.attend = BTreeMap::new();
    assert!(inst.validate().is_err());
}

#[test]
fn permuting_assignments_does_not_change_cost() {
    let inst = lru_instance();
    let mut sol = Solution::new(vec![
        assign(0, 1, &[0], 0),
        assign(1, 1, &[1], 1),
        assign(0, 1, &[2], 2),
        assign(1, 0, &[3], 3),
    ]);
    let a = evaluate(&inst, &sol).unwrap();
    sol.assignments.reverse();
    assert_eq!(evaluate(&inst, &sol).unwrap(), a);
    sol.canonicalize();
    assert_eq!(evaluate(&inst, &sol).unwrap(), a);
}

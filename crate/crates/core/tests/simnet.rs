mod common;

use common::{ring_scenario, scenario_path};
use hornet_core::simnet::{run_scenario, Scenario, SimError};

fn load(name: &str) -> Scenario {
    Scenario::from_json(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

#[test]
fn same_seed_same_transcript() {
    for name in ["echo3.json", "rendezvous.json", "flipbit.json"] {
        let sc = load(name);
        let a = serde_json::to_string(&run_scenario(&sc).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario(&sc).unwrap()).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seed_changes_observed_bytes() {
    let mut sc = load("echo3.json");
    let a = run_scenario(&sc).unwrap().observation_log();
    sc.seed += 1;
    let b = run_scenario(&sc).unwrap().observation_log();
    assert_ne!(a, b);
}

#[test]
fn echo_scenario_completes() {
    let r = run_scenario(&load("echo3.json")).unwrap();
    let f = r.flow("echo").unwrap();
    assert!(f.setup_complete);
    assert_eq!((f.sent, f.delivered, f.echoed), (10, 10, 10));
    assert_eq!(r.violations(), 0);
    assert!(r.drops.is_empty());
}

#[test]
fn flipped_bit_is_dropped_at_next_hop() {
    let r = run_scenario(&load("flipbit.json")).unwrap();
    let f = &r.flows[0];
    assert_eq!((f.delivered, f.echoed), (9, 9));
    assert_eq!(r.drops.len(), 1);
    assert_eq!(r.drops[0].node, "R2");
    assert_eq!(r.violations(), 0);
}

#[test]
fn dropped_first_packet_is_recovered_by_announcement() {
    let mut v = ring_scenario(3, 3, 5, 21, false);
    v["adversary"] = serde_json::json!([
        {"at": {"link": ["F1", "F2"]}, "action": "drop", "packet_type": "data-fwd", "limit": 1}
    ]);
    // Messages at 0, 600, ..., 2400; the announcement is resent at 1000.
    v["sessions"][0]["interval"] = 600.into();
    let r = run_scenario(&serde_json::from_value(v).unwrap()).unwrap();
    let f = &r.flows[0];
    assert_eq!(f.delivered, 4);
    assert_eq!(f.announce_resends, 1);
    assert_eq!(f.echoed, 3);
}

#[test]
fn delayed_packets_still_arrive() {
    let mut v = ring_scenario(4, 2, 10, 22, false);
    v["adversary"] = serde_json::json!([
        {"at": {"node": "D"}, "action": {"delay": {"ticks": 50}}, "packet_type": "data-fwd"}
    ]);
    let r = run_scenario(&serde_json::from_value(v).unwrap()).unwrap();
    assert!(r.flows[0].complete(true));
}

#[test]
fn observation_log_format() {
    let r = run_scenario(&load("echo3.json")).unwrap();
    let log = r.observation_log();
    let first = log.lines().next().unwrap();
    assert!(first.starts_with("# tick="), "{first}");
    assert!(
        first.contains(" link=S->R1 ") && first.ends_with(" len=1144"),
        "{first}"
    );
    assert!(log.lines().nth(1).unwrap().starts_with("0000  "));
    let headers = log.lines().filter(|l| l.starts_with('#')).count();
    assert_eq!(headers, r.recorded.len());
}

#[test]
fn invalid_scenarios_name_the_field() {
    let cases = [
        (r#"{"x": 1}"#, None),
        (
            r#"{"seed":1,"topology":{"nodes":[{"name":"A","id":0},{"name":"B","id":1}],"links":[]},
               "sessions":[{"name":"s","source":"A","forward":["B"],"backward":[]}]}"#,
            Some("sessions[0].forward[0]"),
        ),
        (
            r#"{"seed":1,"topology":{"nodes":[{"name":"A","id":0},{"name":"B","id":1}],
               "links":[{"a":"A","b":"B","rel":"peer"}]},
               "sessions":[{"name":"s","source":"A","forward":["B"],"backward":[]}]}"#,
            Some("sessions[0].backward"),
        ),
    ];
    for (text, path) in cases {
        let err = Scenario::from_json(text).and_then(|s| s.validate().map(|_| ()));
        match (err, path) {
            (Err(SimError::Json(_)), None) => {}
            (Err(SimError::Validation { path: p, .. }), Some(want)) => assert_eq!(p, want),
            (other, _) => panic!("{text}: {other:?}"),
        }
    }
}

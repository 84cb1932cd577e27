use qresource_core::graphstate::QubitGraph;
use qresource_core::oracle::{exhaustive_sweep, verify_all_sites, verify_rule, RewriteOp};

#[test]
fn rules_hold_on_every_graph_up_to_six_vertices() {
    let report = exhaustive_sweep(6).unwrap();
    assert!(report.all_passed(), "{report:?}");
    assert_eq!(report.summary(), "rule1 PASS rule2 PASS rule3 PASS rule4 PASS");
}

/// Star with a two-qubit user at the centre, as produced by a repeater path.
#[test]
fn repeater_merge_is_sound() {
    let mut g = QubitGraph::new();
    let a = g.add_qubit(0);
    let l = g.add_qubit(1);
    let r = g.add_qubit(1);
    let b = g.add_qubit(2);
    g.add_edge(a, l).unwrap();
    g.add_edge(r, b).unwrap();
    assert!(verify_rule(&g, RewriteOp::Merge(l, r)).unwrap());
    assert!(verify_all_sites(&g).unwrap().all_passed());
}

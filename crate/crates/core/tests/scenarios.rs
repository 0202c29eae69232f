use std::path::PathBuf;

use gnnprep_core::policy::PolicyRegistry;
use gnnprep_core::scenario::{replay, Scenario};

fn scenario(name: &str) -> (Scenario, PathBuf) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    (Scenario::load(&dir.join(name)).unwrap(), dir)
}

#[test]
fn two_graphs_reconfigure_once_with_the_full_penalty() {
    let (s, dir) = scenario("two_graphs.toml");
    let out = replay(&s, &dir, &PolicyRegistry::default()).unwrap();
    assert_eq!(out.reconfigurations("static"), 0);
    assert_eq!(out.reconfigurations("dynamic"), 1);
    let switch = out.rows_for("dynamic").find(|r| r.reconfigured).unwrap();
    assert_eq!(switch.penalty_ms, 230.0);
    assert_eq!(switch.handle, "so");
    let after: Vec<_> = out
        .rows_for("dynamic")
        .filter(|r| r.run > switch.run)
        .collect();
    let stat: Vec<_> = out
        .rows_for("static")
        .filter(|r| r.run > switch.run)
        .collect();
    assert!(after.iter().zip(&stat).all(|(d, s)| d.run_ms < s.run_ms));
    assert!(
        out.final_cumulative_ms("dynamic").unwrap() < out.final_cumulative_ms("static").unwrap()
    );
}

#[test]
fn short_horizon_keeps_the_boot_configuration() {
    let (mut s, dir) = scenario("two_graphs.toml");
    s.reconfig.horizon = 1;
    // The scenario's own assert-config steps expect the switch.
    let err = replay(&s, &dir, &PolicyRegistry::default()).unwrap_err();
    assert!(err.to_string().contains("assert-config failed"));
    s.steps
        .retain(|st| !matches!(st, gnnprep_core::scenario::Step::AssertConfig { .. }));
    let out = replay(&s, &dir, &PolicyRegistry::default()).unwrap();
    assert_eq!(out.reconfigurations("dynamic"), 0);
}

#[test]
fn growing_graph_shifts_time_into_reshaping() {
    let (s, dir) = scenario("growing.toml");
    let out = replay(&s, &dir, &PolicyRegistry::default()).unwrap();
    let shares: Vec<f64> = out.rows.iter().map(|r| r.reshaping_share()).collect();
    assert_eq!(shares.len(), 4);
    assert!(shares.windows(2).all(|w| w[0] < w[1]), "{shares:?}");
}

#[test]
fn file_backed_loads_and_deltas() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("base.txt"), "# nodes: 6\n0 1\n1 2\n2 3\n").unwrap();
    std::fs::write(dir.path().join("more.txt"), "3 4\n4 5\n5 7\n").unwrap();
    let script = |add_nodes: u32| {
        format!(
            "policies = [\"static\"]\n\
             [[step]]\nop = \"load\"\nhandle = \"g\"\npath = \"base.txt\"\n\
             [[step]]\nop = \"delta\"\nhandle = \"g\"\npath = \"more.txt\"\nadd_nodes = {add_nodes}\n\
             [[step]]\nop = \"preprocess\"\nhandle = \"g\"\nk = 1\nlayers = 1\n"
        )
    };
    let out = replay(
        &Scenario::from_toml_str(&script(2)).unwrap(),
        dir.path(),
        &PolicyRegistry::default(),
    )
    .unwrap();
    assert_eq!(out.rows.len(), 1);
    let err = replay(
        &Scenario::from_toml_str(&script(1)).unwrap(),
        dir.path(),
        &PolicyRegistry::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("VID 7"), "{err}");
}

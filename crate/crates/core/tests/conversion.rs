use gnnprep_core::graph::uniform_random;
use gnnprep_core::io::{
    encode_csc, load_csc, load_graph, save_csc, save_graph, EdgeOrder, GraphFormat,
};
use gnnprep_core::pipeline::convert;
use gnnprep_core::{CscGraph, Edge, EdgeArrayCoo, ScrConfig, UpeConfig};
use proptest::prelude::*;

/// Counting sort by dst, then sources sorted per column.
fn csc_oracle(g: &EdgeArrayCoo) -> CscGraph {
    let n = g.node_count();
    let mut cols = vec![Vec::new(); n];
    for e in g.edges() {
        cols[e.dst as usize].push(e.src);
    }
    let mut pointers = vec![0u64];
    let mut indices = Vec::new();
    for mut c in cols {
        c.sort_unstable();
        indices.extend(c);
        pointers.push(indices.len() as u64);
    }
    CscGraph { pointers, indices }
}

fn arb_graph() -> impl Strategy<Value = EdgeArrayCoo> {
    (1usize..300).prop_flat_map(|n| {
        prop::collection::vec((0..n as u32, 0..n as u32), 0..2000).prop_map(move |es| {
            EdgeArrayCoo::new(n, es.into_iter().map(|(d, s)| Edge::new(d, s)).collect()).unwrap()
        })
    })
}

fn arb_cfg() -> impl Strategy<Value = (UpeConfig, ScrConfig)> {
    (0u32..6, 1u32..7, 0u32..5, 0u32..8).prop_map(|(a, b, c, d)| {
        (
            UpeConfig::new(1 << a, 2 << b).unwrap(),
            ScrConfig::new(1 << c, 1 << d).unwrap(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conversion_matches_oracle_for_any_config(g in arb_graph(), (upe, scr) in arb_cfg()) {
        let (csc, _) = convert(&g, upe, scr).unwrap();
        prop_assert_eq!(&csc, &csc_oracle(&g));
        prop_assert!(csc.validate().is_ok());
    }

    #[test]
    fn cycles_do_not_depend_on_edge_values(n in 2usize..200, e in 0usize..1500, s1 in any::<u64>(), s2 in any::<u64>()) {
        let cfg = (UpeConfig::new(4, 16).unwrap(), ScrConfig::new(2, 64).unwrap());
        let a = convert(&uniform_random(n, e, s1).unwrap(), cfg.0, cfg.1).unwrap().1;
        let b = convert(&uniform_random(n, e, s2).unwrap(), cfg.0, cfg.1).unwrap().1;
        prop_assert_eq!(a.ordering, b.ordering);
    }
}

#[test]
fn files_round_trip_through_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let g = uniform_random(500, 4000, 9).unwrap();
    for (format, order, name) in [
        (GraphFormat::Text, EdgeOrder::SrcDst, "g.txt"),
        (GraphFormat::Text, EdgeOrder::DstSrc, "g.tsv"),
        (GraphFormat::Binary, EdgeOrder::SrcDst, "g.agn"),
    ] {
        let p = dir.path().join(name);
        save_graph(&p, &g, format, order).unwrap();
        assert_eq!(load_graph(&p, format, order).unwrap(), g, "{name}");
    }
    let (csc, _) = convert(&g, UpeConfig::default(), ScrConfig::default()).unwrap();
    let p = dir.path().join("g.agc");
    save_csc(&p, &csc).unwrap();
    assert_eq!(load_csc(&p).unwrap(), csc);
    assert_eq!(std::fs::read(&p).unwrap(), encode_csc(&csc));
}

#[test]
fn isolated_trailing_nodes_survive_conversion() {
    let g = EdgeArrayCoo::new(10, vec![Edge::new(1, 0), Edge::new(1, 0), Edge::new(2, 2)]).unwrap();
    let (csc, _) = convert(
        &g,
        UpeConfig::new(2, 4).unwrap(),
        ScrConfig::new(1, 2).unwrap(),
    )
    .unwrap();
    assert_eq!(csc.pointers, vec![0, 0, 2, 3, 3, 3, 3, 3, 3, 3, 3]);
    assert_eq!(csc.indices, vec![0, 0, 2]);
}

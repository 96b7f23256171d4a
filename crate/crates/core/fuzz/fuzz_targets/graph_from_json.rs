#![no_main]

use gest_core::graph::{export_dot, GestGraph};
use gest_core::pipeline::proto_for_graph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // A dump that loads must export, render and reload to the same bytes
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = GestGraph::from_json(text) {
        let _ = export_dot(&g);
        let _ = proto_for_graph(&g);
        let back = GestGraph::from_json(&g.to_json()).expect("dump reloads");
        assert_eq!(back.to_json(), g.to_json());
    }
});

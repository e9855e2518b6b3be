#![no_main]

use barnbench::sim::trace::{replay, EpisodeTrace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(tr) = EpisodeTrace::read_jsonl(data) else { return };
    let again = EpisodeTrace::from_jsonl_str(&tr.to_jsonl()).expect("re-parse");
    assert_eq!(tr, again);
    if tr.steps.len() <= 50 && tr.sim.substeps <= 50 {
        let _ = replay(&tr);
    }
});

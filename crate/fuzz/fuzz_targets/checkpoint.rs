#![no_main]

use barnbench::nn::Checkpoint;
use barnbench::rl::TrainedPolicy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ck) = Checkpoint::from_json_str(text) {
        let again = Checkpoint::from_json_str(&ck.to_json_string()).expect("re-parse");
        assert_eq!(ck, again);
        let _ = TrainedPolicy::from_checkpoint(&ck);
    }
});

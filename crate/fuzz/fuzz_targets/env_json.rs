#![no_main]

use barnbench::envgen::EnvironmentSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(env) = EnvironmentSpec::from_json_str(text) {
        let again = EnvironmentSpec::from_json_str(&env.to_json_string()).expect("re-parse");
        assert_eq!(env, again);
    }
});

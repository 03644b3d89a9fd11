#![no_main]

use libfuzzer_sys::fuzz_target;
use ptscrc_cli::summary::summarize_episode_csv;

fuzz_target!(|data: &[u8]| {
    let _ = summarize_episode_csv(data);
});

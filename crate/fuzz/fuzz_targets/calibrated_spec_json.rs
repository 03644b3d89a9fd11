#![no_main]

use libfuzzer_sys::fuzz_target;
use ptscrc::calibrate::CalibratedPredictorSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<CalibratedPredictorSpec>(data) else { return };
    if spec.validate().is_ok() {
        let text = serde_json::to_string(&spec).unwrap();
        let back: CalibratedPredictorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.lambda.to_bits(), spec.lambda.to_bits());
    }
});

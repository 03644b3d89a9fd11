use ptscrc::calibrate::{evaluate, pts_crc_calibrate, ts_cp_calibrate, LossSpec, PtsCrcSettings};
use ptscrc::generators::{gen_dataset, GeneratorConfig, RoundaboutConfig};
use ptscrc::models::{FilterSpec, Forecaster, ModelConfig};
use ptscrc::stats::{mean, std_error};
use ptscrc::DistanceSpec;

fn setup() -> (GeneratorConfig, Box<dyn Forecaster>) {
    let cfg = RoundaboutConfig::default();
    let model = ModelConfig::RoundaboutBranches { generator: cfg.clone(), noise_std: cfg.noise_std }.build().unwrap();
    (GeneratorConfig::Roundabout(cfg), model)
}

#[test]
fn every_loss_is_controlled_on_average() {
    let (gen, model) = setup();
    let horizon = model.horizon();
    let uniform = DistanceSpec::uniform_max(horizon);
    let losses = [LossSpec::Miscoverage, LossSpec::PerSampleRate, LossSpec::MinDistance { bound: 1.0 }];
    for loss in losses {
        for alpha in [0.1, 0.2] {
            let risks: Vec<f64> = (0..8u64)
                .map(|rep| {
                    let cal = gen_dataset(&gen, 300, 1000 + rep).unwrap();
                    let test = gen_dataset(&gen, 300, 2000 + rep).unwrap();
                    let settings =
                        PtsCrcSettings { alpha, m: 4, filter: FilterSpec::None, distance: uniform.clone(), loss, seed: rep };
                    let spec = pts_crc_calibrate(model.as_ref(), &cal, &settings).unwrap();
                    evaluate(&spec, model.as_ref(), &test, &loss, None).unwrap().risk
                })
                .collect();
            let (m, se) = (mean(&risks), std_error(&risks));
            assert!(m <= alpha + 3.0 * se, "{} at {alpha}: {m} > {alpha} + 3·{se}", loss.name());
        }
    }
}

#[test]
fn ts_cp_covers_at_nominal_level() {
    let (gen, model) = setup();
    let alpha = 0.1;
    let cover: Vec<f64> = (0..8u64)
        .map(|rep| {
            let cal = gen_dataset(&gen, 300, 3000 + rep).unwrap();
            let test = gen_dataset(&gen, 300, 4000 + rep).unwrap();
            let spec = ts_cp_calibrate(model.as_ref(), &cal, alpha, vec![1.0; model.horizon()]).unwrap();
            evaluate(&spec, model.as_ref(), &test, &LossSpec::Miscoverage, None).unwrap().coverage
        })
        .collect();
    let (m, se) = (mean(&cover), std_error(&cover));
    assert!(m >= 1.0 - alpha - 3.0 * se, "{m}");
}

#[test]
fn many_prototypes_beat_a_single_mean_on_forking_data() {
    let (gen, model) = setup();
    let bounds = gen.bounds();
    let cal = gen_dataset(&gen, 500, 5).unwrap();
    let test = gen_dataset(&gen, 500, 6).unwrap();
    let horizon = model.horizon();
    let ts = ts_cp_calibrate(model.as_ref(), &cal, 0.1, vec![1.0; horizon]).unwrap();
    let ts_ineff = evaluate(&ts, model.as_ref(), &test, &LossSpec::Miscoverage, Some(&bounds)).unwrap().inefficiency.unwrap();
    let settings = PtsCrcSettings {
        alpha: 0.1,
        m: 16,
        filter: FilterSpec::None,
        distance: DistanceSpec::uniform_max(horizon),
        loss: LossSpec::Miscoverage,
        seed: 1,
    };
    let pts = pts_crc_calibrate(model.as_ref(), &cal, &settings).unwrap();
    let pts_ineff =
        evaluate(&pts, model.as_ref(), &test, &LossSpec::Miscoverage, Some(&bounds)).unwrap().inefficiency.unwrap();
    assert!(pts_ineff < ts_ineff, "{pts_ineff} vs {ts_ineff}");
}

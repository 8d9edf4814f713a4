mod common;

use std::collections::BTreeSet;

use sardiff::predictor::{init_params, layout, predict_noise, NoisePredictor, Predictor, PredictorConfig};
use sardiff::rng::{gaussian_image, seeded};
use sardiff::Image;

#[test]
fn tiny_config_parameter_count_by_hand() {
    // time 2·(8·8+8)=144, input conv 2·8·9+8=152, enc.0 res 1272, enc.0.down 1344,
    // enc.1 res 3824 + attn 1120, mid 2·4848 + 1120, dec.1 7712+1120 and 6416+1120,
    // dec.1.up 2000, dec.0 2·2000, out norm 16 + conv 73
    let expected = 144 + 152 + 1272 + 1344 + 3824 + 1120 + 9696 + 1120 + 7712 + 1120 + 6416 + 1120 + 2000 + 4000 + 16 + 73;
    assert_eq!(expected, 41_129);
    let cfg = PredictorConfig::tiny();
    assert_eq!(cfg.param_count(), expected);
    assert_eq!(init_params(&cfg, 0).unwrap().num_scalars(), expected);
}

#[test]
fn doubling_base_channels_matches_count_formula() {
    for cfg in [PredictorConfig::tiny(), PredictorConfig::toy(), PredictorConfig::desk()] {
        let doubled = PredictorConfig { base_channels: cfg.base_channels * 2, ..cfg.clone() };
        let counted: usize = layout(&doubled).iter().map(|s| s.shape.iter().product::<usize>()).sum();
        assert_eq!(doubled.param_count(), counted);
        assert!(doubled.param_count() > 3 * cfg.param_count() && doubled.param_count() < 4 * cfg.param_count());
    }
}

#[test]
fn layout_names_unique_and_complete() {
    let cfg = PredictorConfig::desk();
    let slots = layout(&cfg);
    let names: BTreeSet<_> = slots.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names.len(), slots.len());
    init_params(&cfg, 1).unwrap().check_against(&cfg).unwrap();
}

#[test]
fn desk_shape_contract_and_zero_output() {
    let cfg = PredictorConfig::desk();
    let params = init_params(&cfg, 5).unwrap();
    let mut rng = seeded(1);
    let x = gaussian_image(64, 64, &mut rng);
    let c = gaussian_image(64, 64, &mut rng);
    let eps = predict_noise(&x, &c, 17, &params, &cfg).unwrap();
    assert_eq!(eps.dims(), (64, 64));
    assert!(eps.pixels().iter().all(|&v| v == 0.0));
}

#[test]
fn size_mismatch_rejected() {
    let cfg = PredictorConfig::tiny();
    let params = init_params(&cfg, 5).unwrap();
    let small = Image::filled(4, 4, 0.0);
    let right = Image::filled(8, 8, 0.0);
    assert!(predict_noise(&small, &small, 1, &params, &cfg).is_err());
    assert!(predict_noise(&right, &small, 1, &params, &cfg).is_err());
}

#[test]
fn init_is_deterministic_in_seed() {
    let cfg = PredictorConfig::toy();
    assert_eq!(init_params(&cfg, 9).unwrap(), init_params(&cfg, 9).unwrap());
    assert_ne!(init_params(&cfg, 9).unwrap(), init_params(&cfg, 10).unwrap());
}

#[test]
fn batched_prediction_matches_single_samples() {
    let cfg = PredictorConfig::tiny();
    let params = common::generic_params(&cfg, 2).cast::<f32>();
    let predictor = Predictor::new(cfg.clone(), params.clone()).unwrap();
    let mut rng = seeded(4);
    let xs: Vec<Image> = (0..3).map(|_| gaussian_image(8, 8, &mut rng)).collect();
    let cs: Vec<Image> = (0..3).map(|_| gaussian_image(8, 8, &mut rng)).collect();
    let ts = [1, 40, 100];
    let batched = predictor
        .predict(&Image::stack(&xs.iter().collect::<Vec<_>>()).unwrap(), &Image::stack(&cs.iter().collect::<Vec<_>>()).unwrap(), &ts)
        .unwrap();
    let batched = Image::unstack(&batched).unwrap();
    for i in 0..3 {
        assert_eq!(batched[i], predict_noise(&xs[i], &cs[i], ts[i], &params, &cfg).unwrap());
    }
}

#[test]
fn distinct_timesteps_give_distinct_outputs() {
    let cfg = PredictorConfig::tiny();
    let params = common::generic_params(&cfg, 3).cast::<f32>();
    let mut rng = seeded(8);
    let x = gaussian_image(8, 8, &mut rng);
    let c = gaussian_image(8, 8, &mut rng);
    let a = predict_noise(&x, &c, 10, &params, &cfg).unwrap();
    let b = predict_noise(&x, &c, 11, &params, &cfg).unwrap();
    let diff = a.pixels().iter().zip(b.pixels()).fold(0.0f32, |m, (p, q)| m.max((p - q).abs()));
    assert!(diff > 0.0);
}

#[test]
fn resized_predictor_shares_parameters() {
    let cfg = PredictorConfig::toy();
    let p = Predictor::init(cfg, 0).unwrap();
    let big = p.resized(64).unwrap();
    assert_eq!(big.params(), p.params());
    assert_eq!(big.input_size(), 64);
    big.params().check_against(big.config()).unwrap();
}

#[test]
fn sampled_network_gradient_check_f64() {
    let checks = common::predictor_gradcheck(&PredictorConfig::tiny(), 11, 1e-4, Some(6));
    assert_eq!(checks.len(), layout(&PredictorConfig::tiny()).len());
    for (name, err) in common::relative_errors(&checks) {
        assert!(err <= 1e-4, "{name}: relative error {err:e}");
    }
}

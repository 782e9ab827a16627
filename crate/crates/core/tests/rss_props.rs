use proptest::prelude::*;

use radar_forge::fixture::{generate, FixtureOptions, SceneKind};
use radar_forge::rss_net::{build_training_set, rss_loss, train, RssNetConfig, TrainConfig};
use radar_forge::sampler::SeededRng;

proptest! {
    #[test]
    fn loss_ignores_a_common_shift(
        pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..40),
        shift in -1e3..1e3f64,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let base = rss_loss(&a, &b, -60.0, 60.0).unwrap();
        let moved = |v: &[f64]| v.iter().map(|x| x + shift).collect::<Vec<_>>();
        let shifted = rss_loss(&moved(&a), &moved(&b), -60.0 + shift, 60.0 + shift).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-9 * base.max(1e-12) + 1e-15);
    }
}

#[test]
fn overfit_loss_trends_down() {
    let config = RssNetConfig {
        patch_radius: 8,
        range_width: 32,
        range_height: 8,
        ..Default::default()
    };
    let frames: Vec<_> = generate(&FixtureOptions::new(SceneKind::Wall, 1, 7)).into_iter().map(|f| f.bundle).collect();
    let samples = build_training_set(&frames, 64, &config, &mut SeededRng::new(7, 1)).unwrap();
    let tc = TrainConfig {
        epochs: 2000,
        lr: 2e-4,
        seed: 13,
        batch_size: 0,
    };
    let (_, history) = train(&samples, config, &tc).unwrap();
    let losses = &history.step_losses;
    assert_eq!(losses.len(), 2000);
    let window = 100;
    let averages: Vec<f64> = losses.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect();
    // averages[i] covers steps i..i+100; compare windows that start after step 200
    for (i, pair) in averages.windows(2).enumerate().skip(200) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "moving average rose at step {}: {} -> {}", i + window, pair[0], pair[1]);
    }
    assert!(history.final_loss() < losses[0]);
}

use ddtf_core::classify::{expand_templates, nearest_template, BaseTemplates};
use ddtf_core::frame::{denoise, train_with_trace, TrainConfig};
use ddtf_core::{assemble_patches, extract_patches, Image};
use proptest::prelude::*;

fn image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(-300.0f64..300.0, w * h).prop_map(move |p| Image::new(w, h, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extract_assemble_round_trip(img in image(8, 8), k1 in 1usize..=8, k2 in 1usize..=8, stride in 1usize..=8) {
        prop_assume!(stride <= k1.min(k2));
        let x = extract_patches(std::slice::from_ref(&img), k1, k2, stride).unwrap();
        let back = assemble_patches(&x, img.dims(), 0).unwrap();
        for (a, b) in back.pixels().iter().zip(img.pixels()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn trained_bank_is_tight_and_trace_monotone(
        imgs in prop::collection::vec(image(12, 12), 1..3),
        k in prop::sample::select(vec![2usize, 3, 4]),
        threshold in 0.0f64..200.0,
    ) {
        let x = extract_patches(&imgs, k, k, 1).unwrap();
        let cfg = TrainConfig { patch_size: k, threshold, iterations: 4, ..Default::default() };
        let out = train_with_trace(&x, &cfg).unwrap();
        prop_assert!(out.bank.orthogonality_error() < 1e-10);
        for w in out.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_threshold_is_identity(imgs in prop::collection::vec(image(10, 10), 1..3)) {
        let cfg = TrainConfig { patch_size: 4, threshold: 0.0, iterations: 2, ..Default::default() };
        let out = denoise(&imgs, &cfg, imgs.len()).unwrap();
        for (o, i) in out.iter().zip(&imgs) {
            for (a, b) in o.pixels().iter().zip(i.pixels()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn classification_ignores_a_common_offset(
        a in image(9, 9), b in image(9, 9), probe in image(9, 9), c in -50i32..50,
    ) {
        let c = f64::from(c);
        let bases = |shift: f64| BaseTemplates {
            classes: vec!["open".into(), "close".into()],
            templates: vec![(0, a.map(|p| p + shift)), (1, b.map(|p| p + shift))],
        };
        // no rotation, so zero padding never enters
        let plain = expand_templates(&bases(0.0), 360.0, true).unwrap();
        let shifted = expand_templates(&bases(c), 360.0, true).unwrap();
        let m0 = nearest_template(&probe, &plain).unwrap();
        let m1 = nearest_template(&probe.map(|p| p + c), &shifted).unwrap();
        prop_assert_eq!(m0.class, m1.class);
        prop_assert_eq!(m0.provenance, m1.provenance);
    }
}

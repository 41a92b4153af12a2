//! Property-based invariants for the codec, serialization, quantization
//! arithmetic, and decision logic.

mod common;

use common::tiny_model;
use packsense::augment::{self, OversampleConfig};
use packsense::compress::QuantParams;
use packsense::dataio::{Label, TimeWindow, AXES, NUM_CLASSES};
use packsense::decide::{classify, ThresholdPolicy};
use packsense::nnet::SoftDecision;
use packsense::runtime::{
    deserialize, huffman_decode, huffman_encode, serialize_float, EncodedModel,
    FixedPointMultiplier, Model,
};
use proptest::prelude::*;

proptest! {
    /// Huffman encode/decode is the identity, including the byte container.
    #[test]
    fn huffman_round_trip(data in proptest::collection::vec(any::<u8>(), 1..512)) {
        let encoded = huffman_encode(&data).unwrap();
        prop_assert_eq!(&huffman_decode(&encoded).unwrap(), &data);
        let reparsed = EncodedModel::from_bytes(&encoded.to_bytes()).unwrap();
        prop_assert_eq!(&huffman_decode(&reparsed).unwrap(), &data);
    }

    /// Encoding never loses information on skewed alphabets either.
    #[test]
    fn huffman_round_trip_narrow(data in proptest::collection::vec(0u8..4, 1..512)) {
        let encoded = huffman_encode(&data).unwrap();
        prop_assert_eq!(huffman_decode(&encoded).unwrap(), data);
    }

    /// Float model serialization round-trips to identical bytes.
    #[test]
    fn serialization_round_trip(seed in any::<u64>()) {
        let model = tiny_model(seed);
        let bytes = serialize_float(&model);
        let Model::Float(rt) = deserialize(&bytes).unwrap() else {
            panic!("expected float model");
        };
        prop_assert_eq!(serialize_float(&rt), bytes);
    }

    /// Affine quantization error is bounded by half a step for in-range
    /// values. Calibration always widens ranges to include zero, so only
    /// zero-spanning ranges are representable inputs here.
    #[test]
    fn affine_quantization_error_bound(
        lo in -100.0f32..=0.0,
        hi in 1e-3f32..100.0,
        t in 0.0f32..1.0,
    ) {
        let params = QuantParams::affine_for((lo, hi)).unwrap();
        let x = lo + t * (hi - lo);
        let err = (params.dequantize_value(params.quantize_value(x)) - x).abs();
        prop_assert!(err <= params.scale / 2.0 + 1e-6 * x.abs(),
            "error {} exceeds half-step {}", err, params.scale / 2.0);
    }

    /// The fixed-point multiplier approximates the real ratio to within one
    /// unit after rounding.
    #[test]
    fn fixed_point_multiplier_accuracy(
        ratio in 1e-5f64..1e4,
        x in -100_000i64..100_000,
    ) {
        let m = FixedPointMultiplier::from_ratio(ratio).unwrap();
        let exact = x as f64 * ratio;
        let err = (m.apply(x) as f64 - exact).abs();
        prop_assert!(err <= 0.5 + exact.abs() * 1e-8 + 1e-9,
            "apply({x}) = {} vs exact {exact}", m.apply(x));
    }

    /// SMOTE synthetics are elementwise convex combinations of their
    /// recorded parents.
    #[test]
    fn smote_convexity(seed in any::<u64>(), count in 1usize..40) {
        let mut rng = rng_from(seed);
        let v_l = 8usize;
        let minority: Vec<TimeWindow> = (0..8)
            .map(|_| {
                let values: Vec<f32> =
                    (0..v_l * AXES).map(|_| rng.random_range(-5.0f32..5.0)).collect();
                TimeWindow::new(values, v_l, Some(Label::Forklift)).unwrap()
            })
            .collect();
        let cfg = OversampleConfig { seed, ..OversampleConfig::default() };
        let batch = augment::smote_generate(&minority, count, &cfg).unwrap();
        for (w, p) in batch.windows.iter().zip(&batch.provenance) {
            prop_assert!((0.0..=1.0).contains(&p.alpha));
            let a = minority[p.selected].values();
            let b = minority[p.neighbor].values();
            for (i, &v) in w.values().iter().enumerate() {
                let lo = a[i].min(b[i]);
                let hi = a[i].max(b[i]);
                let eps = 1e-5 * hi.abs().max(lo.abs()).max(1.0);
                prop_assert!(v >= lo - eps && v <= hi + eps);
            }
        }
    }

    /// With zero thresholds, threshold-gated classification is argmax.
    #[test]
    fn zero_threshold_classify_is_argmax(
        raw in proptest::collection::vec(1e-6f32..1.0, NUM_CLASSES),
    ) {
        let sum: f32 = raw.iter().sum();
        let probs = SoftDecision {
            probs: raw.iter().map(|p| p / sum).collect(),
        };
        let expected = Label::from_index(probs.argmax()).unwrap();
        prop_assert_eq!(classify(&probs, &ThresholdPolicy::zero()), expected);
    }

    /// Corrupting any single byte of a serialized model is detected.
    #[test]
    fn corruption_detected(seed in any::<u64>(), pos_frac in 0.0f64..1.0, flip in 1u8..=255) {
        let bytes = serialize_float(&tiny_model(seed));
        let pos = ((bytes.len() - 1) as f64 * pos_frac) as usize;
        let mut bad = bytes.clone();
        bad[pos] ^= flip;
        prop_assert!(deserialize(&bad).is_err(), "corruption at byte {} undetected", pos);
    }
}

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;

fn rng_from(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

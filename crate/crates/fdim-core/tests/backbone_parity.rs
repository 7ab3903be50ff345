//! Architecture parity against the reference residual-network
//! implementation: hash-derived weights (bit-identical to the fixture
//! generator's) are loaded by torchvision parameter name and the pooled
//! four-stage taps must match the frozen float64 reference outputs.
//!
//! Fixture: tests/fixtures/backbone_parity.json, produced by
//! tools/gen_backbone_fixture.py.

use ndarray::{Array3, ArrayD, IxDyn};
use serde::Deserialize;

use fdim_core::model::{ModelConfig, ResNetBackbone};
use fdim_core::nn::ParamStore;

#[derive(Deserialize)]
struct Fixture {
    input: TensorDesc,
    tensors: Vec<RuleDesc>,
    expected_pooled: Vec<f64>,
    tap_shapes: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct TensorDesc {
    name: String,
    shape: Vec<usize>,
}

#[derive(Deserialize)]
struct RuleDesc {
    name: String,
    rule: String,
    shape: Vec<usize>,
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_float(name: &str, index: u64) -> f64 {
    let h = splitmix64(fnv1a64(name.as_bytes()).wrapping_add(index));
    (h >> 11) as f64 * 2.0f64.powi(-53)
}

fn apply_rule(rule: &str, u: f64) -> f64 {
    match rule {
        "conv" => (u - 0.5) * 0.2,
        "bn_weight" | "bn_var" => 0.5 + u,
        "bn_bias" | "bn_mean" => (u - 0.5) * 0.5,
        other => panic!("unknown rule {other}"),
    }
}

#[test]
fn four_stage_taps_match_reference_implementation() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/backbone_parity.json"
    ))
    .expect("fixture present");
    let fixture: Fixture = serde_json::from_str(&text).unwrap();

    let mut store = ParamStore::<f64>::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    use rand::SeedableRng;
    let backbone = ResNetBackbone::new(&mut store, &mut rng);

    // overwrite every parameter with the fixture's hash-derived values,
    // addressed by the reference implementation's tensor names
    for t in &fixture.tensors {
        let local = format!("backbone.{}", t.name);
        let id = store
            .lookup(&local)
            .unwrap_or_else(|| panic!("model lacks parameter {local}"));
        let n: usize = t.shape.iter().product();
        assert_eq!(
            store.value(id).shape(),
            t.shape.as_slice(),
            "shape mismatch for {local}"
        );
        let vals: Vec<f64> = (0..n as u64)
            .map(|i| apply_rule(&t.rule, unit_float(&t.name, i)))
            .collect();
        store.set_value(id, ArrayD::from_shape_vec(IxDyn(&t.shape), vals).unwrap());
    }

    let (c, h, w) = (
        fixture.input.shape[0],
        fixture.input.shape[1],
        fixture.input.shape[2],
    );
    let mut frame = Array3::<f64>::zeros((c, h, w));
    for (i, v) in frame.iter_mut().enumerate() {
        *v = unit_float(&fixture.input.name, i as u64);
    }

    let taps = backbone.pyramid_values(&store, &frame).unwrap();
    assert_eq!(taps.len(), 4);
    for (tap, expected_shape) in taps.iter().zip(&fixture.tap_shapes) {
        assert_eq!(tap.shape(), expected_shape.as_slice());
    }

    let mut pooled = Vec::with_capacity(960);
    for tap in &taps {
        let spatial = (tap.shape()[1] * tap.shape()[2]) as f64;
        for ch in 0..tap.shape()[0] {
            pooled.push(tap.index_axis(ndarray::Axis(0), ch).sum() / spatial);
        }
    }
    assert_eq!(pooled.len(), fixture.expected_pooled.len());

    let mut max_diff = 0.0f64;
    for (got, want) in pooled.iter().zip(&fixture.expected_pooled) {
        max_diff = max_diff.max((got - want).abs());
    }
    assert!(
        max_diff < 1e-4,
        "pooled tap mismatch vs reference implementation: {max_diff:.3e}"
    );
    // double precision end to end: the real agreement is much tighter than
    // the contract tolerance
    assert!(max_diff < 1e-9, "unexpected precision loss: {max_diff:.3e}");
    let _ = ModelConfig::default();
}

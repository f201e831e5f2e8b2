// SPDX-License-Identifier: MIT OR Apache-2.0

use patchlab::model_zoo::{
    gelu, make_random_mlp, sample_example, RotatedToyNet, SyntheticConfig, SyntheticPathwayModel, ToyNet,
};
use patchlab::patching::patch_1d;
use patchlab::linalg::Vector;

#[test]
fn toy_patch_closed_form_on_half_step_grid() {
    let net = ToyNet::<f64>::canonical();
    let v = Vector::from_f64(&[1.0, 1.0, 0.0]).normalized().unwrap();
    for i in 0..21 {
        for j in 0..21 {
            let (x, xs) = (-5.0 + 0.5 * i as f64, -5.0 + 0.5 * j as f64);
            let h = patch_1d(&net.hidden(x), &net.hidden(xs), &v).unwrap();
            let expected = Vector::from_f64(&[(x + xs) / 2.0, (xs - x) / 2.0, x]);
            assert!(h.sub(&expected).max_abs() < 1e-12);
            assert!((net.readout(&h) - xs).abs() < 1e-12);
        }
    }
}

#[test]
fn rotated_net_hidden_at_one() {
    let net = RotatedToyNet::<f64>::canonical();
    let (h, y) = net.forward(1.0);
    let expected = [1.0 / 2f64.sqrt(), -(1.5f64).sqrt(), 0.0];
    for (a, b) in h.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((y - 1.0).abs() < 1e-12);
    let r = &net.rotation;
    assert!(r.matmul(&r.transpose()).sub(&patchlab::linalg::Matrix::identity(3)).max_abs() < 1e-12);
}

#[test]
fn gelu_reference_values() {
    // x·Φ(x) at a few points, Φ from a high-precision table.
    let cases: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.841_344_746_068_542_9), (-1.0, -0.158_655_253_931_457_05), (2.0, 1.954_499_736_103_642)];
    for (x, y) in cases {
        assert!((gelu(x) - y).abs() < 1e-14, "gelu({x})");
    }
}

#[test]
fn random_mlp_hits_target_norm() {
    let mlp = make_random_mlp::<f64>(3, 8, 32, 4.0).unwrap();
    let norm = mlp.mean_output_norm(&patchlab::model_zoo::standard_normal_inputs::<f64>(3, 0x63616c69, 256, 8));
    assert!((norm - 4.0).abs() < 1e-10, "{norm}");
}

#[test]
fn class_means_differ_by_two_c() {
    let model: SyntheticPathwayModel<f64> = SyntheticConfig::default().build().unwrap();
    let n = 1000;
    let mut diff = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let p = model.v_feat.dot(&sample_example(&model, 1, 2 * i).unwrap());
        let m = model.v_feat.dot(&sample_example(&model, -1, 2 * i + 1).unwrap());
        diff.push(p - m);
    }
    let mean = diff.iter().sum::<f64>() / n as f64;
    let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - 2.0 * model.c).abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn noise_free_logitdiffs_are_plus_minus_two_c() {
    let model: SyntheticPathwayModel<f64> = SyntheticConfig { noise_scale: 0.0, ..Default::default() }.build().unwrap();
    for label in [1i8, -1] {
        let ld = model.forward(&model.clean_input(label)).unwrap().logitdiff();
        assert!((ld - 2.0 * model.c * label as f64).abs() < 1e-10);
    }
}

#[test]
fn config_json_is_strict() {
    let text = serde_json::to_string(&SyntheticConfig::default()).unwrap();
    let back: SyntheticConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, SyntheticConfig::default());
    let extra = text.replacen('{', "{\"surprise\":1,", 1);
    assert!(serde_json::from_str::<SyntheticConfig>(&extra).is_err());
}

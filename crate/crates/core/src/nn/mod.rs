//! Regression networks over spectral head maps, with hand-written
//! forward and backward passes.
//!
//! All trainable scalars of a [`Network`] live in one flat `f64` vector
//! described by a [`ParamLayout`]; gradients use the same layout, so
//! optimizers and finite-difference checks work on plain slices.

mod file;
mod layers;
mod lstm;
mod model;
mod params;

pub use file::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use layers::dropout_mask;
pub use lstm::{LstmCell, LstmStep};
pub use model::{count_parameters, Architecture, CnnEncoder, Network, NetworkKind, Normalization, RegressionHead};
pub use params::{ParamGroup, ParamLayout};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topomap::TopoMap;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn maps(arch: &Architecture, seed: u64) -> Vec<TopoMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..arch.sequence)
            .map(|w| TopoMap {
                data: Array3::from_shape_fn((arch.grid, arch.grid, arch.bands), |_| rng.random_range(-1.0..1.0)),
                trial_id: "t".into(),
                window_start: w,
            })
            .collect()
    }

    /// Closed-form count of the layer stack.
    fn expected_count(arch: &Architecture, kind: NetworkKind) -> usize {
        let mut n = 0;
        let mut c = arch.bands;
        for &f in arch.blocks.iter().flatten() {
            n += c * f * 9 + f;
            c = f;
        }
        let (fc, fh, fw) = arch.feature_shape();
        let feat = fc * fh * fw;
        let h = arch.lstm_hidden;
        let dense = |i: usize, o: usize| i * o + o;
        match kind {
            NetworkKind::Cnn => n + dense(feat, arch.dense) + dense(arch.dense, 1),
            NetworkKind::Full => {
                let lstm = 4 * h * feat + 4 * h * h + 3 * h * h + 4 * h;
                let var = fc * arch.sequence * arch.variation_filters * 9 + arch.variation_filters;
                let head_in = h + arch.variation_filters * (fh - 2) * (fw - 2);
                n + lstm + var + dense(head_in, arch.dense) + dense(arch.dense, 1)
            }
        }
    }

    #[test]
    fn parameter_counts_match_layer_arithmetic() {
        for arch in [Architecture::default(), Architecture::toy()] {
            for kind in [NetworkKind::Cnn, NetworkKind::Full] {
                let net = Network::zeros(kind, arch.clone()).unwrap();
                assert_eq!(count_parameters(&net), expected_count(&arch, kind));
            }
        }
        let net = Network::zeros(NetworkKind::Full, Architecture::default()).unwrap();
        assert_eq!(net.encoder().conv_count(), 7);
        assert_eq!(net.encoder_range().len(), 158_496);
        assert_eq!(Architecture::default().feature_shape(), (128, 4, 4));
    }

    #[test]
    fn zero_network_predicts_zero() {
        let arch = Architecture::toy();
        for kind in [NetworkKind::Cnn, NetworkKind::Full] {
            let net = Network::zeros(kind, arch.clone()).unwrap();
            let zero: Vec<TopoMap> = maps(&arch, 0)
                .into_iter()
                .map(|mut m| {
                    m.data.fill(0.0);
                    m
                })
                .collect();
            assert_eq!(net.predict(&zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn inference_is_deterministic_and_order_sensitive() {
        let arch = Architecture::toy();
        let net = Network::full(arch.clone(), 3).unwrap();
        let xs = maps(&arch, 1);
        let a = net.predict(&xs).unwrap();
        assert_eq!(a.to_bits(), net.predict(&xs).unwrap().to_bits());
        let mut rev = xs.clone();
        rev.reverse();
        assert_ne!(a, net.predict(&rev).unwrap());
        assert!(net.predict(&xs[..3]).is_err());
    }

    #[test]
    fn exact_target_gives_zero_gradient() {
        let arch = Architecture::toy();
        let net = Network::full(arch.clone(), 5).unwrap();
        let xs = maps(&arch, 2);
        let y = net.predict(&xs).unwrap();
        let mut g = vec![0.0; net.params().len()];
        net.accumulate_gradient(net.params(), &xs, y, None, 1.0, &mut g).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    fn check_gradients(kind: NetworkKind, dropout_seed: Option<u64>) {
        let arch = Architecture::toy();
        let net = Network::new(kind, arch.clone(), 11).unwrap();
        let xs = maps(&arch, 4);
        let target = 0.3;
        let p = net.params().to_vec();
        let mut g = vec![0.0; p.len()];
        net.accumulate_gradient(&p, &xs, target, dropout_seed, 1.0, &mut g).unwrap();
        let loss = |p: &[f64]| (net.predict_with(p, &xs, dropout_seed).unwrap() - target).powi(2);
        let h = 1e-4;
        for group in net.layout().groups() {
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for i in group.range() {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                num += (fd - g[i]).powi(2);
                den += fd.powi(2).max(g[i].powi(2));
            }
            let rel = num.sqrt() / den.sqrt().max(1e-12);
            assert!(rel < 1e-3, "{kind:?} group {} relative error {rel}", group.name);
        }
    }

    #[test]
    fn full_model_gradients_match_finite_differences() {
        check_gradients(NetworkKind::Full, None);
        check_gradients(NetworkKind::Full, Some(17));
    }

    #[test]
    fn cnn_gradients_match_finite_differences() {
        check_gradients(NetworkKind::Cnn, None);
        check_gradients(NetworkKind::Cnn, Some(3));
    }

    #[test]
    fn shared_encoder_gradient_is_sum_over_untied_copies() {
        let arch = Architecture::toy();
        let net = Network::full(arch.clone(), 8).unwrap();
        let xs = maps(&arch, 6);
        let p = net.params().to_vec();
        let y = net.predict(&xs).unwrap();
        // loss (ŷ - (y - 0.5))² has gradient exactly dŷ/dθ at θ
        let mut g = vec![0.0; p.len()];
        net.accumulate_gradient(&p, &xs, y - 0.5, None, 1.0, &mut g).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = net.encoder_range();
        let dir: Vec<f64> = (0..p.len()).map(|i| if enc.contains(&i) { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
        let shared: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();

        let h = 1e-5;
        let mut per_window = Vec::new();
        for t in 0..arch.sequence {
            let at = |s: f64| {
                let mut copies = vec![p.clone(); arch.sequence];
                for (v, d) in copies[t].iter_mut().zip(&dir) {
                    *v += s * d;
                }
                net.predict_untied(&p, &copies, &xs).unwrap()
            };
            per_window.push((at(h) - at(-h)) / (2.0 * h));
        }
        let total: f64 = per_window.iter().sum();
        assert!((total - shared).abs() < 1e-6 * shared.abs().max(1.0), "{total} vs {shared}");
        assert!(per_window.iter().filter(|d| d.abs() > 1e-9).count() > 1);
    }

    #[test]
    fn model_file_round_trip() {
        let arch = Architecture::toy();
        let mut net = Network::full(arch.clone(), 2).unwrap();
        let mut norm = Normalization::identity(2);
        norm.band_mean = vec![0.5, -1.0];
        norm.target_mean = 12.0;
        norm.target_std = 0.7;
        net.set_normalization(norm).unwrap();
        net.round_to_f32();
        let mut buf = Vec::new();
        write_model(&mut buf, &net).unwrap();
        assert_eq!(&buf[..4], MODEL_MAGIC);
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let xs = maps(&arch, 3);
        assert_eq!(back.predict(&xs).unwrap().to_bits(), net.predict(&xs).unwrap().to_bits());
        buf.truncate(buf.len() - 1);
        assert!(read_model(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn stage_two_inherits_the_encoder() {
        let arch = Architecture::toy();
        let cnn = Network::cnn(arch.clone(), 1).unwrap();
        let mut full = Network::full(arch, 2).unwrap();
        full.load_encoder_from(&cnn).unwrap();
        let r = full.encoder_range();
        assert_eq!(&full.params()[r.clone()], &cnn.params()[r]);
    }

    #[test]
    fn invalid_architectures() {
        let mut a = Architecture::toy();
        a.grid = 9;
        assert!(a.validate().is_err());
        let mut a = Architecture::toy();
        a.blocks = vec![vec![2], vec![2]];
        assert!(a.validate().is_err(), "2×2 features cannot feed a valid 3×3 convolution");
        let mut a = Architecture::toy();
        a.dropout = 1.0;
        assert!(a.validate().is_err());
    }
}

//! Property tests for the quaternion algebra, PH layers and normalization.

use hyperstar::algebra::{quaternion_algebra, AlgebraMatrices, Quaternion};
use hyperstar::layers::{PhcLayer, QuaternionConvLayer};
use hyperstar::norm::{hyper_instance_norm, HinParams, VarianceDivisor};
use hyperstar::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quat() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-3.0f64..3.0).prop_map(Quaternion::from_array)
}

fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
    a.to_array().iter().zip(b.to_array()).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn product_is_associative(p in quat(), q in quat(), r in quat()) {
        prop_assert!(close(p * (q * r), (p * q) * r, 1e-11));
    }

    #[test]
    fn norm_is_multiplicative(p in quat(), q in quat()) {
        prop_assert!(((p * q).norm() - p.norm() * q.norm()).abs() < 1e-11);
    }

    #[test]
    fn conjugate_reverses_products(p in quat(), q in quat()) {
        prop_assert!(close((p * q).conj(), q.conj() * p.conj(), 1e-11));
    }

    #[test]
    fn phc_with_hamilton_algebra_is_quaternion_conv(
        gi in 1usize..3, go in 1usize..3, k in prop::sample::select(vec![1usize, 3]),
        stride in 1usize..3, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cin, cout, pad) = (4 * gi, 4 * go, k / 2);
        let q = QuaternionConvLayer::new(cin, cout, k, stride, pad, true).unwrap();
        let mut p = PhcLayer::new(4, cin, cout, k, stride, pad, true).unwrap();
        p.alg = AlgebraMatrices::from_matrices(&quaternion_algebra(), true).unwrap();
        let w: Vec<f64> = (0..q.weights.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
        q.weights.data_mut().copy_from_slice(&w);
        p.blocks.f.data_mut().copy_from_slice(&w);
        let b: Vec<f64> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        q.bias.as_ref().unwrap().data_mut().copy_from_slice(&b);
        p.bias.as_ref().unwrap().data_mut().copy_from_slice(&b);
        let x = Tensor::uniform(&[2, cin, 6, 5], -1.0, 1.0, &mut rng);
        let (a, c) = (q.forward(&x).unwrap().to_vec(), p.forward(&x).unwrap().to_vec());
        for (u, v) in a.iter().zip(&c) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn hin_ignores_per_channel_offsets(n in 1usize..5, g in 1usize..3, seed in any::<u64>(), comp in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = n * g;
        let divisor = if comp { VarianceDivisor::ComponentMean } else { VarianceDivisor::Spatial };
        let p = HinParams::new(n, c, divisor).unwrap();
        let x = Tensor::uniform(&[2, c, 4, 4], -1.0, 1.0, &mut rng);
        let offsets: Vec<f64> = (0..2 * c).flat_map(|_| {
            let o = rng.random_range(-5.0..5.0);
            std::iter::repeat_n(o, 16)
        }).collect();
        let shifted = x.add(&Tensor::new(&[2, c, 4, 4], offsets).unwrap()).unwrap();
        let a = hyper_instance_norm(&x, &p).unwrap().to_vec();
        let b = hyper_instance_norm(&shifted, &p).unwrap().to_vec();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }
}

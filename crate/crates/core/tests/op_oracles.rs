//! Tensor kernels against naive loop implementations.

use hyperstar::algebra::AlgebraMatrices;
use hyperstar::layers::PhmLayer;
use hyperstar::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(clippy::too_many_arguments)]
fn naive_conv(x: &[f64], xs: [usize; 4], w: &[f64], ws: [usize; 4], stride: usize, pad: usize) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, wd] = xs;
    let [o, _, k, _] = ws;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut y = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                let (r, s) = ((i * stride + ki) as isize - pad as isize, (j * stride + kj) as isize - pad as isize);
                                if r < 0 || s < 0 || r >= h as isize || s >= wd as isize {
                                    continue;
                                }
                                acc += x[((b * c + ic) * h + r as usize) * wd + s as usize] * w[((oc * c + ic) * k + ki) * k + kj];
                            }
                        }
                    }
                    y[((b * o + oc) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    (y, [n, o, oh, ow])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv2d_matches_loops(
        n in 1usize..3, c in 1usize..4, o in 1usize..4, k in prop::sample::select(vec![1usize, 3, 5]),
        stride in 1usize..3, pad in 0usize..3, extra_h in 0usize..5, extra_w in 0usize..5, seed in any::<u64>(),
    ) {
        let (h, w) = (k + extra_h, k + extra_w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::uniform(&[n, c, h, w], -1.0, 1.0, &mut rng);
        let kern = Tensor::uniform(&[o, c, k, k], -1.0, 1.0, &mut rng);
        let y = x.conv2d(&kern, stride, pad).unwrap();
        let (want, shape) = naive_conv(&x.to_vec(), [n, c, h, w], &kern.to_vec(), [o, c, k, k], stride, pad);
        prop_assert_eq!(y.shape(), &shape[..]);
        for (a, b) in y.to_vec().iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_matches_loops(m in 1usize..7, k in 1usize..7, p in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::uniform(&[m, k], -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[k, p], -1.0, 1.0, &mut rng);
        let (av, bv) = (a.to_vec(), b.to_vec());
        let y = a.matmul(&b).unwrap().to_vec();
        for i in 0..m {
            for j in 0..p {
                let want: f64 = (0..k).map(|t| av[i * k + t] * bv[t * p + j]).sum();
                prop_assert!((y[i * p + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phm_weight_is_kronecker_sum(n in 1usize..5, go in 1usize..4, gi in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (out, inp) = (n * go, n * gi);
        let l = PhmLayer::new(n, inp, out, false).unwrap();
        let a: Vec<f64> = (0..n * n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        l.alg.assign(&a).unwrap();
        let f: Vec<f64> = (0..l.blocks.f.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
        l.blocks.f.data_mut().copy_from_slice(&f);
        let h = l.weight().unwrap().to_vec();
        for r in 0..out {
            for c in 0..inp {
                let (bi, bj, ii, jj) = (r / go, c / gi, r % go, c % gi);
                let want: f64 = (0..n).map(|t| a[(t * n + bi) * n + bj] * f[(t * go + ii) * gi + jj]).sum();
                prop_assert!((h[r * inp + c] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn pooling_and_upsampling() {
    let x = Tensor::new(&[1, 1, 2, 4], (0..8).map(f64::from).collect()).unwrap();
    assert_eq!(x.avg_pool2d().unwrap().to_vec(), vec![2.5, 4.5]);
    let u = x.upsample_nearest2().unwrap();
    assert_eq!(u.shape(), &[1, 1, 4, 8]);
    assert_eq!(&u.to_vec()[..8], &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
    assert_eq!(&u.to_vec()[8..16], &u.to_vec()[..8]);
}

#[test]
fn frozen_algebra_has_no_gradient_leaf() {
    let alg = AlgebraMatrices::from_matrices(&hyperstar::algebra::quaternion_algebra(), true).unwrap();
    assert!(!alg.a.requires_grad());
}

//! Finite-difference checks of layer gradients over many seeds.

use hyperstar::init::{initialize, AScheme, InitSpec};
use hyperstar::layers::{LayerKind, Params, PhcLayer, PhmLayer};
use hyperstar::nets::Factory;
use hyperstar::norm::{hyper_adain, hyper_instance_norm, HinParams, VarianceDivisor};
use hyperstar::tensor::grad_check_params;
use hyperstar::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn leaves(p: &dyn Params) -> Vec<Tensor> {
    p.trainable_params().into_iter().map(|p| p.tensor).collect()
}

fn probe(y: &Tensor, w: &Tensor) -> hyperstar::Result<Tensor> {
    Ok(y.mul(w)?.sum())
}

#[test]
fn ph_layers_over_seeds() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=4);
        let scheme = [AScheme::XavierA, AScheme::RandIntegerA][seed as usize % 2];
        let spec = InitSpec { scheme, seed, ..Default::default() };

        let phm = PhmLayer::new(n, 2 * n, 3 * n, true).unwrap();
        initialize(&phm.params(), &spec).unwrap();
        let x = Tensor::uniform(&[3, 2 * n], -1.0, 1.0, &mut rng);
        let w = Tensor::uniform(&[3, 3 * n], -1.0, 1.0, &mut rng);
        let mut ps = leaves(&phm);
        ps.push(x.clone().into_leaf(true));
        let xl = ps.last().unwrap().clone();
        let r = grad_check_params(|| probe(&phm.forward(&xl)?, &w), &ps, H).unwrap();
        assert!(r.max_rel_error < TOL, "phm seed {seed} n {n}: {}", r.max_rel_error);

        let phc = PhcLayer::new(n, n, 2 * n, 3, 1 + seed as usize % 2, 1, true).unwrap();
        initialize(&phc.params(), &spec).unwrap();
        let x = Tensor::uniform(&[1, n, 5, 5], -1.0, 1.0, &mut rng).into_leaf(true);
        let y = phc.forward(&x).unwrap();
        let w = Tensor::uniform(y.shape(), -1.0, 1.0, &mut rng);
        let mut ps = leaves(&phc);
        ps.push(x.clone());
        let r = grad_check_params(|| probe(&phc.forward(&x)?, &w), &ps, H).unwrap();
        assert!(r.max_rel_error < TOL, "phc seed {seed} n {n}: {}", r.max_rel_error);
    }
}

#[test]
fn normalizations_over_seeds() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.random_range(1..=4);
        let c = 2 * n;
        let divisor = [VarianceDivisor::Spatial, VarianceDivisor::ComponentMean][seed as usize % 2];
        let hin = HinParams::new(n, c, divisor).unwrap();
        hin.gamma.data_mut().iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
        hin.beta.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let x = Tensor::uniform(&[2, c, 3, 3], -1.0, 1.0, &mut rng).into_leaf(true);
        let w = Tensor::uniform(&[2, c, 3, 3], -1.0, 1.0, &mut rng);
        let mut ps = leaves(&hin);
        ps.push(x.clone());
        let r = grad_check_params(|| probe(&hyper_instance_norm(&x, &hin)?, &w), &ps, H).unwrap();
        assert!(r.max_rel_error < TOL, "hin seed {seed} n {n}: {}", r.max_rel_error);

        let ada = Factory { kind: LayerKind::Ph(n), divisor }.hadain(5, c).unwrap();
        initialize(&ada.params(), &InitSpec { seed, ..Default::default() }).unwrap();
        let s = Tensor::uniform(&[2, 5], -1.0, 1.0, &mut rng).into_leaf(true);
        let mut ps = leaves(&ada);
        ps.push(x.clone());
        ps.push(s.clone());
        let r = grad_check_params(|| probe(&hyper_adain(&x, &s, &ada)?, &w), &ps, H).unwrap();
        assert!(r.max_rel_error < TOL, "hadain seed {seed} n {n}: {}", r.max_rel_error);
    }
}

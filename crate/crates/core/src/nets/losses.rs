//! Adversarial, style reconstruction, diversification and cycle losses.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which network an adversarial loss is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    D,
    G,
}

/// D side: `−log σ(real) − log(1 − σ(fake))`; G side: `−log σ(fake)`. Both
/// averaged over the batch. `real` is ignored on the G side.
pub fn adversarial_loss(real: Option<&Tensor>, fake: &Tensor, side: Side) -> Result<Tensor> {
    match side {
        Side::D => {
            let real = real.ok_or_else(|| Error::invalid("adversarial_loss", "D side needs real logits"))?;
            real.bce_with_logits(1.0).add(&fake.bce_with_logits(0.0))
        }
        Side::G => Ok(fake.bce_with_logits(1.0)),
    }
}

/// Mean `|a − b|` between two style codes.
pub fn style_reconstruction_loss(target: &Tensor, recovered: &Tensor) -> Result<Tensor> {
    target.l1_distance(recovered)
}

/// The first three (RGB) channels; padding channels are never compared.
pub fn rgb(img: &Tensor) -> Result<Tensor> {
    if img.ndim() != 4 || img.shape()[1] < 3 {
        return Err(Error::invalid("rgb", format!("expected N×C×H×W with C ≥ 3, got {:?}", img.shape())));
    }
    if img.shape()[1] == 3 {
        Ok(img.clone())
    } else {
        img.narrow(1, 0, 3)
    }
}

/// Mean `|G(x, s₁) − G(x, s₂)|` over RGB; enters the objective negated.
pub fn diversification_loss(img1: &Tensor, img2: &Tensor) -> Result<Tensor> {
    if img1.shape() != img2.shape() {
        return Err(Error::shape("diversification_loss", img1.shape(), img2.shape()));
    }
    rgb(img1)?.l1_distance(&rgb(img2)?)
}

/// Mean `|x − G(G(x, s̃), ŝ)|` over RGB.
pub fn cycle_loss(x: &Tensor, reconstructed: &Tensor) -> Result<Tensor> {
    if x.shape() != reconstructed.shape() {
        return Err(Error::shape("cycle_loss", x.shape(), reconstructed.shape()));
    }
    rgb(x)?.l1_distance(&rgb(reconstructed)?)
}

/// Loss weights of the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub sty: f64,
    pub ds: f64,
    pub cyc: f64,
}

/// `adv + λ_sty·sty − λ_ds·ds + λ_cyc·cyc`.
pub fn generator_objective(adv: &Tensor, sty: &Tensor, ds: &Tensor, cyc: &Tensor, w: LossWeights) -> Result<Tensor> {
    adv.add(&sty.scale(w.sty))?.sub(&ds.scale(w.ds))?.add(&cyc.scale(w.cyc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adversarial_values() {
        let z = Tensor::zeros(&[3]);
        let d = adversarial_loss(Some(&z), &z, Side::D).unwrap().item();
        assert!((d - 2.0 * 2f64.ln()).abs() < 1e-12);
        let g = adversarial_loss(None, &z, Side::G).unwrap().item();
        assert!((g - 2f64.ln()).abs() < 1e-12);
        let perfect = adversarial_loss(Some(&Tensor::full(&[2], 50.0)), &Tensor::full(&[2], -50.0), Side::D).unwrap();
        assert!(perfect.item() < 1e-20);
        assert!(adversarial_loss(None, &z, Side::D).is_err());
    }

    #[test]
    fn l1_losses() {
        let a = Tensor::full(&[2, 64], 0.3);
        assert_eq!(style_reconstruction_loss(&a, &a).unwrap().item(), 0.0);
        let b = Tensor::full(&[2, 64], 1.3);
        assert!((style_reconstruction_loss(&a, &b).unwrap().item() - 1.0).abs() < 1e-12);
        let x = Tensor::full(&[1, 4, 2, 2], 1.0);
        let mut rec = vec![-1.0; 16];
        rec[12..].fill(7.0);
        let rec = Tensor::new(&[1, 4, 2, 2], rec).unwrap();
        assert_eq!(cycle_loss(&x, &rec).unwrap().item(), 2.0);
        let y = Tensor::full(&[1, 3, 2, 2], 0.5);
        assert_eq!(diversification_loss(&y, &Tensor::zeros(&[1, 3, 2, 2])).unwrap().item(), 0.5);
        assert!(diversification_loss(&y, &x).is_err());
    }

    #[test]
    fn objective_combination() {
        let one = Tensor::scalar(1.0);
        let w = LossWeights { sty: 2.0, ds: 0.5, cyc: 3.0 };
        assert_eq!(generator_objective(&one, &one, &one, &one, w).unwrap().item(), 5.5);
        let zero = Tensor::scalar(0.0);
        let w = LossWeights { sty: 1.0, ds: 0.0, cyc: 1.0 };
        assert_eq!(generator_objective(&zero, &zero, &zero, &zero, w).unwrap().item(), 0.0);
    }

    #[test]
    fn loss_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let other = Tensor::uniform(&[2, 4, 3, 3], -1.0, 1.0, &mut rng);
        let x = Tensor::uniform(&[2, 4, 3, 3], -1.0, 1.0, &mut rng);
        let fake = Tensor::uniform(&[5], -3.0, 3.0, &mut rng);
        let real = Tensor::uniform(&[5], -3.0, 3.0, &mut rng);
        let checks = [
            grad_check(|x| cycle_loss(x, &other), &x, 1e-5).unwrap(),
            grad_check(|x| diversification_loss(&other, x), &x, 1e-5).unwrap(),
            grad_check(|s| style_reconstruction_loss(s, &other), &x, 1e-5).unwrap(),
            grad_check(|f| adversarial_loss(Some(&real), f, Side::D), &fake, 1e-5).unwrap(),
            grad_check(|r| adversarial_loss(Some(r), &fake, Side::D), &real, 1e-5).unwrap(),
            grad_check(|f| adversarial_loss(None, f, Side::G), &fake, 1e-5).unwrap(),
        ];
        for (i, e) in checks.iter().enumerate() {
            assert!(*e < 1e-4, "check {i}: {e}");
        }
    }
}

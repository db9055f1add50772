//! Central-difference gradient verification.

use rand::seq::index::sample;
use rand::Rng;

use super::{kink_trace, Tensor};
use crate::error::Result;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − cd| / max(|analytic|, |cd|, 1e-8)` over checked entries.
    pub max_rel_error: f64,
    /// Number of scalar entries compared.
    pub checked: usize,
    /// Entries left out because a `±h` evaluation crossed a kink of a
    /// piecewise-linear op (only in kink-aware checks).
    pub skipped: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks the gradient of the scalar function `f` at `x` with step `h`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let leaf = x.detach().into_leaf(true);
    let report = grad_check_params(|| f(&leaf), std::slice::from_ref(&leaf), h)?;
    Ok(report.max_rel_error)
}

/// Checks the gradient of `f` with respect to every entry of the given leaf
/// tensors. `f` must rebuild its graph on every call.
pub fn grad_check_params<F>(f: F, params: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    let picks: Vec<Vec<usize>> = params.iter().map(|p| (0..p.numel()).collect()).collect();
    check_entries(f, params, h, &picks, false)
}

/// Like [`grad_check_params`] but compares only a random `fraction` of the
/// entries of each tensor (at least one per tensor).
pub fn grad_check_params_sampled<F, R>(
    f: F,
    params: &[Tensor],
    h: f64,
    fraction: f64,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
    R: Rng + ?Sized,
{
    check_entries(f, params, h, &sample_entries(params, fraction, rng), false)
}

/// Like [`grad_check_params_sampled`], but an entry whose `x ± h`
/// evaluations put any input of `relu`, `leaky_relu` or `abs` on a
/// different side of its kink than at `x` is counted as skipped instead of
/// compared: the function is not differentiable along that segment.
pub fn grad_check_params_sampled_smooth<F, R>(
    f: F,
    params: &[Tensor],
    h: f64,
    fraction: f64,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
    R: Rng + ?Sized,
{
    check_entries(f, params, h, &sample_entries(params, fraction, rng), true)
}

fn sample_entries<R: Rng + ?Sized>(params: &[Tensor], fraction: f64, rng: &mut R) -> Vec<Vec<usize>> {
    params
        .iter()
        .map(|p| {
            let n = p.numel();
            let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
            let mut idx = sample(rng, n, k).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

fn check_entries<F>(f: F, params: &[Tensor], h: f64, picks: &[Vec<usize>], smooth: bool) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    for p in params {
        p.zero_grad();
    }
    let (loss, base) = kink_trace(&f);
    let loss = loss?;
    if loss.requires_grad() {
        loss.backward()?;
    }
    drop(loss);
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    let eval = || -> Result<(f64, u64)> {
        let (v, k) = kink_trace(&f);
        Ok((v?.item(), k))
    };
    for ((p, grad), idx) in params.iter().zip(&analytic).zip(picks) {
        for &i in idx {
            let orig = p.data()[i];
            p.data_mut()[i] = orig + h;
            let plus = eval();
            p.data_mut()[i] = orig - h;
            let minus = eval();
            p.data_mut()[i] = orig;
            let ((plus, kp), (minus, km)) = (plus?, minus?);
            if smooth && (kp != base || km != base) {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_error(grad[i], numeric));
            checked += 1;
        }
    }
    for p in params {
        p.zero_grad();
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        checked,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_function_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::uniform(&[5, 3], -1.0, 1.0, &mut rng);
        let err = grad_check(|x| Ok(x.sum()), &x, 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn mean_tanh() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::uniform(&[4, 4], -1.0, 1.0, &mut rng);
        let err = grad_check(|x| Ok(x.tanh().mean()), &x, 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn detects_wrong_rule() {
        // d/dx of x*x registered as x instead of 2x
        let x = Tensor::new(&[3], vec![0.3, -0.8, 1.1]).unwrap();
        let err = grad_check(
            |x| {
                let v = x.to_vec();
                let y: Vec<f64> = v.iter().map(|a| a * a).collect();
                let t = Tensor::from_op(
                    "broken_square",
                    vec![3],
                    y,
                    vec![x.clone()],
                    Box::new(move |g| vec![Some(g.iter().zip(&v).map(|(g, a)| g * a).collect())]),
                );
                Ok(t.sum())
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn kink_crossings_are_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // relu(b) at b = 0: subgradient 0, central difference 1/2
        let b = Tensor::param(&[2], vec![0.0, 0.5]).unwrap();
        let f = || Ok(b.relu().sum());
        let plain = grad_check_params_sampled(f, std::slice::from_ref(&b), 1e-5, 1.0, &mut rng).unwrap();
        assert!(plain.max_rel_error > 0.9);
        let smooth = grad_check_params_sampled_smooth(f, std::slice::from_ref(&b), 1e-5, 1.0, &mut rng).unwrap();
        assert_eq!((smooth.checked, smooth.skipped), (1, 1));
        assert!(smooth.max_rel_error < 1e-9);
    }
}

use super::{numel, same_shape, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
enum Bin {
    Add,
    Sub,
    Mul,
}

impl Tensor {
    fn unary(
        &self,
        name: &'static str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Tensor {
        let x = self.to_vec();
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let y_saved = y.clone();
        Tensor::from_op(
            name,
            self.shape().to_vec(),
            y,
            vec![self.clone()],
            Box::new(move |g| {
                let dx = g
                    .iter()
                    .zip(x.iter().zip(&y_saved))
                    .map(|(g, (&x, &y))| g * df(x, y))
                    .collect();
                vec![Some(dx)]
            }),
        )
    }

    fn binary(&self, other: &Tensor, kind: Bin, name: &'static str) -> Result<Tensor> {
        let (an, bn) = (self.numel(), other.numel());
        let shape = if self.shape() == other.shape() || bn == 1 {
            self.shape().to_vec()
        } else if an == 1 {
            other.shape().to_vec()
        } else {
            return Err(Error::shape(name, self.shape(), other.shape()));
        };
        let n = numel(&shape);
        let a = self.to_vec();
        let b = other.to_vec();
        let at = |i: usize| if an == 1 { a[0] } else { a[i] };
        let bt = |i: usize| if bn == 1 { b[0] } else { b[i] };
        let out: Vec<f64> = (0..n)
            .map(|i| match kind {
                Bin::Add => at(i) + bt(i),
                Bin::Sub => at(i) - bt(i),
                Bin::Mul => at(i) * bt(i),
            })
            .collect();
        let (a_rg, b_rg) = (self.requires_grad(), other.requires_grad());
        Ok(Tensor::from_op(
            name,
            shape,
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let reduce = |full: Vec<f64>, len: usize| {
                    if len == 1 && full.len() != 1 {
                        vec![full.iter().sum()]
                    } else {
                        full
                    }
                };
                let ga = a_rg.then(|| {
                    let full: Vec<f64> = match kind {
                        Bin::Add | Bin::Sub => g.to_vec(),
                        Bin::Mul => g
                            .iter()
                            .enumerate()
                            .map(|(i, g)| g * if bn == 1 { b[0] } else { b[i] })
                            .collect(),
                    };
                    reduce(full, an)
                });
                let gb = b_rg.then(|| {
                    let full: Vec<f64> = match kind {
                        Bin::Add => g.to_vec(),
                        Bin::Sub => g.iter().map(|g| -g).collect(),
                        Bin::Mul => g
                            .iter()
                            .enumerate()
                            .map(|(i, g)| g * if an == 1 { a[0] } else { a[i] })
                            .collect(),
                    };
                    reduce(full, bn)
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Elementwise sum; either side may be a single-element tensor.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Bin::Add, "add")
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Bin::Sub, "sub")
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Bin::Mul, "mul")
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.unary("scale", |x| x * s, move |_, _| s)
    }

    pub fn add_scalar(&self, s: f64) -> Tensor {
        self.unary("add_scalar", |x| x + s, |_, _| 1.0)
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    pub fn relu(&self) -> Tensor {
        super::note_kinks(&self.data());
        self.unary("relu", |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        super::note_kinks(&self.data());
        let dslope = if super::backward_fault() { 2.0 * slope } else { slope };
        self.unary(
            "leaky_relu",
            |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { dslope },
        )
    }

    pub fn tanh(&self) -> Tensor {
        self.unary("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    /// Absolute value; the subgradient at zero is 0.
    pub fn abs(&self) -> Tensor {
        super::note_kinks(&self.data());
        self.unary("abs", f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn sum(&self) -> Tensor {
        let n = self.numel();
        let s = self.data().iter().sum();
        Tensor::from_op(
            "sum",
            vec![1],
            vec![s],
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel();
        let s: f64 = self.data().iter().sum::<f64>() / n as f64;
        Tensor::from_op(
            "mean",
            vec![1],
            vec![s],
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0] / n as f64; n])]),
        )
    }

    /// Mean absolute difference.
    pub fn l1_distance(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("l1_distance", self, other)?;
        Ok(self.sub(other)?.abs().mean())
    }

    /// Mean binary cross-entropy of `sigmoid(self)` against a constant target,
    /// evaluated as `max(x,0) - x t + ln(1 + e^{-|x|})`.
    pub fn bce_with_logits(&self, target: f64) -> Tensor {
        let n = self.numel() as f64;
        let x = self.to_vec();
        let loss = x
            .iter()
            .map(|&x| x.max(0.0) - x * target + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        Tensor::from_op(
            "bce_with_logits",
            vec![1],
            vec![loss],
            vec![self.clone()],
            Box::new(move |g| {
                let dx = x
                    .iter()
                    .map(|&x| {
                        let sig = if x >= 0.0 {
                            1.0 / (1.0 + (-x).exp())
                        } else {
                            let e = x.exp();
                            e / (1.0 + e)
                        };
                        g[0] * (sig - target) / n
                    })
                    .collect();
                vec![Some(dx)]
            }),
        )
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(Error::shape("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op(
            "reshape",
            shape.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Box::new(|g| vec![Some(g.to_vec())]),
        ))
    }

    /// `len` consecutive entries of `axis` starting at `start`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::invalid(
                "narrow",
                format!("axis {axis} range {start}..{} on {shape:?}", start + len),
            ));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let full = shape[axis];
        let src = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        drop(src);
        let mut new_shape = shape.clone();
        new_shape[axis] = len;
        let total = self.numel();
        Ok(Tensor::from_op(
            "narrow",
            new_shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![0.0; total];
                for o in 0..outer {
                    let base = (o * full + start) * inner;
                    let gb = o * len * inner;
                    dx[base..base + len * inner].copy_from_slice(&g[gb..gb + len * inner]);
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Concatenation along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat", "no tensors"))?;
        let base_shape = first.shape().to_vec();
        if axis >= base_shape.len() {
            return Err(Error::invalid("concat", format!("axis {axis} on {base_shape:?}")));
        }
        for p in parts {
            let s = p.shape();
            let ok = s.len() == base_shape.len()
                && s.iter()
                    .zip(&base_shape)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::shape("concat", &base_shape, s));
            }
        }
        let outer: usize = base_shape[..axis].iter().product();
        let inner: usize = base_shape[axis + 1..].iter().product();
        let widths: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total_w: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(outer * total_w * inner);
        let datas: Vec<_> = parts.iter().map(|p| p.data()).collect();
        for o in 0..outer {
            for (d, &w) in datas.iter().zip(&widths) {
                out.extend_from_slice(&d[o * w * inner..(o + 1) * w * inner]);
            }
        }
        drop(datas);
        let mut shape = base_shape;
        shape[axis] = total_w;
        Ok(Tensor::from_op(
            "concat",
            shape,
            out,
            parts.to_vec(),
            Box::new(move |g| {
                let mut grads: Vec<Vec<f64>> =
                    widths.iter().map(|w| Vec::with_capacity(outer * w * inner)).collect();
                let mut off = 0;
                for _ in 0..outer {
                    for (gr, &w) in grads.iter_mut().zip(&widths) {
                        gr.extend_from_slice(&g[off..off + w * inner]);
                        off += w * inner;
                    }
                }
                grads.into_iter().map(Some).collect()
            }),
        ))
    }

    /// Adds `bias[c]` along axis 1 of an `N×C×…` tensor.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if shape.len() < 2 || bias.shape() != [shape[1]] {
            return Err(Error::shape("add_bias", &shape, bias.shape()));
        }
        let (n, c) = (shape[0], shape[1]);
        let inner: usize = shape[2..].iter().product();
        let b = bias.to_vec();
        let mut out = self.to_vec();
        for (i, v) in out.iter_mut().enumerate() {
            *v += b[(i / inner) % c];
        }
        let x_rg = self.requires_grad();
        Ok(Tensor::from_op(
            "add_bias",
            shape,
            out,
            vec![self.clone(), bias.clone()],
            Box::new(move |g| {
                let mut gb = vec![0.0; c];
                for ni in 0..n {
                    for (ci, acc) in gb.iter_mut().enumerate() {
                        let base = (ni * c + ci) * inner;
                        *acc += g[base..base + inner].iter().sum::<f64>();
                    }
                }
                vec![x_rg.then(|| g.to_vec()), Some(gb)]
            }),
        ))
    }

    /// `y[n,c,·] = x[n,c,·] * scale[n,c] + shift[n,c]`. `scale` and `shift`
    /// are either `[C]` (shared across the batch) or `[N, C]`.
    pub fn scale_shift(&self, scale: &Tensor, shift: &Tensor) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if shape.len() < 2 {
            return Err(Error::invalid("scale_shift", format!("rank of {shape:?} below 2")));
        }
        let (n, c) = (shape[0], shape[1]);
        let per_sample = |t: &Tensor| -> Result<bool> {
            if t.shape() == [c] {
                Ok(false)
            } else if t.shape() == [n, c] {
                Ok(true)
            } else {
                Err(Error::shape("scale_shift", &shape, t.shape()))
            }
        };
        let (sc_ps, sh_ps) = (per_sample(scale)?, per_sample(shift)?);
        let inner: usize = shape[2..].iter().product();
        let x = self.to_vec();
        let s = scale.to_vec();
        let b = shift.to_vec();
        let idx = move |ni: usize, ci: usize, ps: bool| if ps { ni * c + ci } else { ci };
        let mut out = vec![0.0; x.len()];
        for ni in 0..n {
            for ci in 0..c {
                let (sv, bv) = (s[idx(ni, ci, sc_ps)], b[idx(ni, ci, sh_ps)]);
                let base = (ni * c + ci) * inner;
                for k in base..base + inner {
                    out[k] = x[k] * sv + bv;
                }
            }
        }
        let (s_len, b_len) = (s.len(), b.len());
        let x_rg = self.requires_grad();
        let s_rg = scale.requires_grad();
        Ok(Tensor::from_op(
            "scale_shift",
            shape,
            out,
            vec![self.clone(), scale.clone(), shift.clone()],
            Box::new(move |g| {
                let mut gx = x_rg.then(|| vec![0.0; x.len()]);
                let mut gs = vec![0.0; s_len];
                let mut gb = vec![0.0; b_len];
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * inner;
                        let sv = s[idx(ni, ci, sc_ps)];
                        let (mut acc_s, mut acc_b) = (0.0, 0.0);
                        for k in base..base + inner {
                            acc_s += g[k] * x[k];
                            acc_b += g[k];
                        }
                        if let Some(gx) = gx.as_mut() {
                            for k in base..base + inner {
                                gx[k] = g[k] * sv;
                            }
                        }
                        gs[idx(ni, ci, sc_ps)] += acc_s;
                        gb[idx(ni, ci, sh_ps)] += acc_b;
                    }
                }
                vec![gx, s_rg.then_some(gs), Some(gb)]
            }),
        ))
    }

    /// Repeats the last axis `reps` times: `[…, G] -> […, reps·G]` with
    /// `out[…, r·G + j] = in[…, j]`.
    pub fn tile_last(&self, reps: usize) -> Result<Tensor> {
        if reps == 0 {
            return Err(Error::invalid("tile_last", "reps must be positive"));
        }
        let shape = self.shape().to_vec();
        let g = *shape.last().expect("non-empty shape");
        let outer = self.numel() / g;
        let x = self.data();
        let mut out = Vec::with_capacity(self.numel() * reps);
        for o in 0..outer {
            for _ in 0..reps {
                out.extend_from_slice(&x[o * g..(o + 1) * g]);
            }
        }
        drop(x);
        let mut new_shape = shape;
        *new_shape.last_mut().unwrap() = g * reps;
        Ok(Tensor::from_op(
            "tile_last",
            new_shape,
            out,
            vec![self.clone()],
            Box::new(move |gr| {
                let mut dx = vec![0.0; outer * g];
                for o in 0..outer {
                    for r in 0..reps {
                        let src = (o * reps + r) * g;
                        for j in 0..g {
                            dx[o * g + j] += gr[src + j];
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Picks `x[n, idx[n]]` from an `N×K` tensor.
    pub fn gather_cols(&self, idx: &[usize]) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 || shape[0] != idx.len() {
            return Err(Error::shape("gather_cols", shape, &[idx.len()]));
        }
        let (n, k) = (shape[0], shape[1]);
        if let Some(&bad) = idx.iter().find(|&&i| i >= k) {
            return Err(Error::invalid("gather_cols", format!("index {bad} >= {k}")));
        }
        let x = self.data();
        let out: Vec<f64> = idx.iter().enumerate().map(|(r, &c)| x[r * k + c]).collect();
        drop(x);
        let idx = idx.to_vec();
        Ok(Tensor::from_op(
            "gather_cols",
            vec![n],
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![0.0; n * k];
                for (r, &c) in idx.iter().enumerate() {
                    dx[r * k + c] = g[r];
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Row `r` of the result is row `r` of `branches[labels[r]]`.
    pub fn select_rows(branches: &[Tensor], labels: &[usize]) -> Result<Tensor> {
        let first = branches
            .first()
            .ok_or_else(|| Error::invalid("select_rows", "no branches"))?;
        let shape = first.shape().to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::shape("select_rows", &shape, &[labels.len()]));
        }
        for b in branches {
            if b.shape() != shape.as_slice() {
                return Err(Error::shape("select_rows", &shape, b.shape()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= branches.len()) {
            return Err(Error::invalid(
                "select_rows",
                format!("label {bad} >= {} branches", branches.len()),
            ));
        }
        let w = shape[1];
        let mut out = Vec::with_capacity(labels.len() * w);
        for (r, &l) in labels.iter().enumerate() {
            out.extend_from_slice(&branches[l].data()[r * w..(r + 1) * w]);
        }
        let labels = labels.to_vec();
        let nb = branches.len();
        Ok(Tensor::from_op(
            "select_rows",
            shape.clone(),
            out,
            branches.to_vec(),
            Box::new(move |g| {
                let mut grads = vec![vec![0.0; labels.len() * w]; nb];
                for (r, &l) in labels.iter().enumerate() {
                    grads[l][r * w..(r + 1) * w].copy_from_slice(&g[r * w..(r + 1) * w]);
                }
                grads.into_iter().map(Some).collect()
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::param(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn leaky_relu_definition() {
        let y = Tensor::scalar(-1.0).leaky_relu(0.2);
        assert!((y.item() + 0.2).abs() < 1e-15);
        assert_eq!(Tensor::scalar(3.0).leaky_relu(0.2).item(), 3.0);
    }

    #[test]
    fn l1_of_identical_is_zero() {
        let x = t(&[2, 2], &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(x.l1_distance(&x).unwrap().item(), 0.0);
    }

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let l = Tensor::scalar(0.0).bce_with_logits(1.0).item();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let l = Tensor::scalar(800.0).bce_with_logits(1.0).item();
        assert!(l.is_finite() && l < 1e-300);
        let l = Tensor::scalar(-800.0).bce_with_logits(1.0).item();
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn scalar_broadcast_reduces_gradient() {
        let a = t(&[3], &[1.0, 2.0, 3.0]);
        let s = t(&[1], &[2.0]);
        a.mul(&s).unwrap().sum().backward().unwrap();
        assert_eq!(s.grad().unwrap(), vec![6.0]);
        assert_eq!(a.grad().unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = t(&[3], &[1.0, 2.0, 3.0]);
        let b = t(&[2], &[1.0, 2.0]);
        assert!(matches!(a.add(&b), Err(Error::Shape { .. })));
        assert!(a.l1_distance(&b).is_err());
    }

    #[test]
    fn narrow_and_concat_invert() {
        let x = Tensor::new(&[2, 3, 2], (0..12).map(f64::from).collect()).unwrap();
        let a = x.narrow(1, 0, 1).unwrap();
        let b = x.narrow(1, 1, 2).unwrap();
        assert_eq!(a.to_vec(), vec![0.0, 1.0, 6.0, 7.0]);
        let back = Tensor::concat(&[a, b], 1).unwrap();
        assert_eq!(back.to_vec(), x.to_vec());
        assert!(x.narrow(1, 2, 2).is_err());
    }

    #[test]
    fn tile_last_layout() {
        let x = Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = x.tile_last(3).unwrap();
        assert_eq!(y.shape(), &[2, 6]);
        assert_eq!(y.to_vec(), vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn select_rows_routes_gradients() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        let y = Tensor::select_rows(&[a.clone(), b.clone()], &[1, 0]).unwrap();
        assert_eq!(y.to_vec(), vec![5.0, 6.0, 3.0, 4.0]);
        y.sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(b.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
    }
}

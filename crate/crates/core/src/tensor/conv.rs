use super::linalg::gemm;
use super::Tensor;
use crate::error::{Error, Result};

/// Output extent of a convolution along one axis, or `None` when the
/// padded input is smaller than the kernel.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    (stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }

    /// Input offset feeding column entry (row `r`, output position `oy, ox`).
    #[inline]
    fn source(&self, ci: usize, ky: usize, kx: usize, oy: usize, ox: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
        if iy < 0 || ix < 0 || iy >= self.h as isize || ix >= self.w as isize {
            return None;
        }
        Some((ci * self.h + iy as usize) * self.w + ix as usize)
    }

    /// Column matrix `[C·kh·kw, N·Ho·Wo]` for the whole batch.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let (patch, pos) = (self.patch(), self.positions());
        let cols = self.n * pos;
        let mut out = vec![0.0; patch * cols];
        let sample = self.c * self.h * self.w;
        for ni in 0..self.n {
            let xs = &x[ni * sample..(ni + 1) * sample];
            for ci in 0..self.c {
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let row = (ci * self.kh + ky) * self.kw + kx;
                        let dst = &mut out[row * cols + ni * pos..row * cols + (ni + 1) * pos];
                        for oy in 0..self.ho {
                            for ox in 0..self.wo {
                                if let Some(s) = self.source(ci, ky, kx, oy, ox) {
                                    dst[oy * self.wo + ox] = xs[s];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn col2im(&self, col: &[f64]) -> Vec<f64> {
        let pos = self.positions();
        let cols = self.n * pos;
        let sample = self.c * self.h * self.w;
        let mut dx = vec![0.0; self.n * sample];
        for ni in 0..self.n {
            let dxs = &mut dx[ni * sample..(ni + 1) * sample];
            for ci in 0..self.c {
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let row = (ci * self.kh + ky) * self.kw + kx;
                        let src = &col[row * cols + ni * pos..row * cols + (ni + 1) * pos];
                        for oy in 0..self.ho {
                            for ox in 0..self.wo {
                                if let Some(s) = self.source(ci, ky, kx, oy, ox) {
                                    dxs[s] += src[oy * self.wo + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl Tensor {
    /// Zero-padded cross-correlation of `N×C×H×W` input with an
    /// `O×C×kh×kw` kernel.
    pub fn conv2d(&self, kernel: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
        let (xs, ks) = (self.shape(), kernel.shape());
        if xs.len() != 4 || ks.len() != 4 || xs[1] != ks[1] {
            return Err(Error::shape("conv2d", xs, ks));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be at least 1"));
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (o, kh, kw) = (ks[0], ks[2], ks[3]);
        let (ho, wo) = match (
            conv_output_size(h, kh, stride, padding),
            conv_output_size(w, kw, stride, padding),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::invalid(
                    "conv2d",
                    format!("non-positive output size for input {xs:?}, kernel {ks:?}, padding {padding}"),
                ))
            }
        };
        let geo = Geometry { n, c, h, w, kh, kw, ho, wo, stride, pad: padding };
        let (patch, pos) = (geo.patch(), geo.positions());
        let cols = n * pos;

        let col = geo.im2col(&self.data());
        let k = kernel.to_vec();
        let mut tmp = vec![0.0; o * cols];
        gemm(o, patch, cols, &k, false, &col, false, &mut tmp, 0.0);
        // [O, N, P] -> [N, O, P]
        let mut out = vec![0.0; n * o * pos];
        for oi in 0..o {
            for ni in 0..n {
                out[(ni * o + oi) * pos..(ni * o + oi + 1) * pos]
                    .copy_from_slice(&tmp[oi * cols + ni * pos..oi * cols + (ni + 1) * pos]);
            }
        }

        let (x_rg, k_rg) = (self.requires_grad(), kernel.requires_grad());
        Ok(Tensor::from_op(
            "conv2d",
            vec![n, o, ho, wo],
            out,
            vec![self.clone(), kernel.clone()],
            Box::new(move |g| {
                let mut gp = vec![0.0; o * cols];
                for oi in 0..o {
                    for ni in 0..n {
                        gp[oi * cols + ni * pos..oi * cols + (ni + 1) * pos]
                            .copy_from_slice(&g[(ni * o + oi) * pos..(ni * o + oi + 1) * pos]);
                    }
                }
                let gk = k_rg.then(|| {
                    let mut gk = vec![0.0; o * patch];
                    gemm(o, cols, patch, &gp, false, &col, true, &mut gk, 0.0);
                    gk
                });
                let gx = x_rg.then(|| {
                    let mut dcol = vec![0.0; patch * cols];
                    gemm(patch, o, cols, &k, true, &gp, false, &mut dcol, 0.0);
                    geo.col2im(&dcol)
                });
                vec![gx, gk]
            }),
        ))
    }

    /// 2×2 average pooling with stride 2.
    pub fn avg_pool2d(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 4 || !s[2].is_multiple_of(2) || !s[3].is_multiple_of(2) {
            return Err(Error::invalid(
                "avg_pool2d",
                format!("needs N×C×H×W with even H and W, got {s:?}"),
            ));
        }
        let (nc, h, w) = (s[0] * s[1], s[2], s[3]);
        let (ho, wo) = (h / 2, w / 2);
        let x = self.data();
        let mut out = vec![0.0; nc * ho * wo];
        for p in 0..nc {
            let xi = &x[p * h * w..(p + 1) * h * w];
            for oy in 0..ho {
                for ox in 0..wo {
                    let (y, xx) = (2 * oy, 2 * ox);
                    out[(p * ho + oy) * wo + ox] =
                        0.25 * (xi[y * w + xx] + xi[y * w + xx + 1] + xi[(y + 1) * w + xx] + xi[(y + 1) * w + xx + 1]);
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            "avg_pool2d",
            vec![s[0], s[1], ho, wo],
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![0.0; nc * h * w];
                for p in 0..nc {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let gv = 0.25 * g[(p * ho + oy) * wo + ox];
                            let (y, xx) = (2 * oy, 2 * ox);
                            let base = p * h * w;
                            dx[base + y * w + xx] += gv;
                            dx[base + y * w + xx + 1] += gv;
                            dx[base + (y + 1) * w + xx] += gv;
                            dx[base + (y + 1) * w + xx + 1] += gv;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Nearest-neighbour ×2 upsampling.
    pub fn upsample_nearest2(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 4 {
            return Err(Error::invalid("upsample_nearest2", format!("needs N×C×H×W, got {s:?}")));
        }
        let (nc, h, w) = (s[0] * s[1], s[2], s[3]);
        let (ho, wo) = (2 * h, 2 * w);
        let x = self.data();
        let mut out = vec![0.0; nc * ho * wo];
        for p in 0..nc {
            for oy in 0..ho {
                for ox in 0..wo {
                    out[(p * ho + oy) * wo + ox] = x[(p * h + oy / 2) * w + ox / 2];
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            "upsample_nearest2",
            vec![s[0], s[1], ho, wo],
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![0.0; nc * h * w];
                for p in 0..nc {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            dx[(p * h + oy / 2) * w + ox / 2] += g[(p * ho + oy) * wo + ox];
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }
}

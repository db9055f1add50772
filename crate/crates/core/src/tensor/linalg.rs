use super::Tensor;
use crate::error::{Error, Result};

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers, where
/// `op` optionally transposes. `a` is m×k after `op`, `b` is k×n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: strides describe exactly the m×k, k×n and m×n row-major (or
    // transposed) views of the slices checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tensor {
    /// Matrix product of `m×k` and `k×p` tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, p) = (sa[0], sa[1], sb[1]);
        let a = self.to_vec();
        let b = other.to_vec();
        let mut out = vec![0.0; m * p];
        gemm(m, k, p, &a, false, &b, false, &mut out, 0.0);
        let (a_rg, b_rg) = (self.requires_grad(), other.requires_grad());
        Ok(Tensor::from_op(
            "matmul",
            vec![m, p],
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let ga = a_rg.then(|| {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, p, k, g, false, &b, true, &mut ga, 0.0);
                    ga
                });
                let gb = b_rg.then(|| {
                    let mut gb = vec![0.0; k * p];
                    gemm(k, m, p, &a, true, g, false, &mut gb, 0.0);
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Transpose of a 2-D tensor.
    pub fn t(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::invalid("transpose", format!("expected 2-D, got {s:?}")));
        }
        let (r, c) = (s[0], s[1]);
        let x = self.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = x[i * c + j];
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            "transpose",
            vec![c, r],
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        dx[i * c + j] = g[j * r + i];
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * p];
        for i in 0..m {
            for j in 0..p {
                for l in 0..k {
                    c[i * p + j] += a[i * k + l] * b[l * p + j];
                }
            }
        }
        c
    }

    #[test]
    fn identity_product() {
        let i2 = Tensor::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = Tensor::new(&[2, 1], vec![3.0, 4.0]).unwrap();
        assert_eq!(i2.matmul(&v).unwrap().to_vec(), vec![3.0, 4.0]);
    }

    #[test]
    fn two_by_two_product() {
        let a = Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(&[2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let c = a.matmul(&b).unwrap().to_vec();
        assert_eq!(c, naive(&a.to_vec(), &b.to_vec(), 2, 2, 2));
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[4, 2]);
        match a.matmul(&b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![4, 2]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn gemm_transposes_match_naive() {
        let a: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect(); // 3x4
        let expect = naive(&a, &b, 2, 3, 4);
        // a^T stored as 3x2
        let mut at = vec![0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                at[j * 2 + i] = a[i * 3 + j];
            }
        }
        let mut bt = vec![0.0; 12];
        for i in 0..3 {
            for j in 0..4 {
                bt[j * 3 + i] = b[i * 4 + j];
            }
        }
        let mut c = vec![0.0; 8];
        gemm(2, 3, 4, &at, true, &bt, true, &mut c, 0.0);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

//! Quaternion arithmetic, the Hamilton-product block matrix, Kronecker
//! products and the sum-of-Kronecker weight synthesis used by PH layers.
//!
//! Hypercomplex feature maps use a component-blocked channel layout: with
//! `C = n·G` channels, component `r` of hypercomplex channel `j` lives at
//! channel `r·G + j`. This is the layout `Σ Aᵢ ⊗ Fᵢ` produces, and it keeps
//! every block of the Hamilton matrix a contiguous sub-matrix.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `q0 + q1·i + q2·j + q3·k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quaternion { q0, q1, q2, q3 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn norm(self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.q0, -self.q1, -self.q2, -self.q3)
    }
}

/// Non-commutative quaternion product `p ⊗ q`.
pub fn hamilton_product(p: Quaternion, q: Quaternion) -> Quaternion {
    Quaternion {
        q0: p.q0 * q.q0 - p.q1 * q.q1 - p.q2 * q.q2 - p.q3 * q.q3,
        q1: p.q1 * q.q0 + p.q0 * q.q1 - p.q3 * q.q2 + p.q2 * q.q3,
        q2: p.q2 * q.q0 + p.q3 * q.q1 + p.q0 * q.q2 - p.q1 * q.q3,
        q3: p.q3 * q.q0 - p.q2 * q.q1 + p.q1 * q.q2 + p.q0 * q.q3,
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        hamilton_product(self, rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.q0 + rhs.q0, self.q1 + rhs.q1, self.q2 + rhs.q2, self.q3 + rhs.q3)
    }
}

/// Block `(row, col)` of the Hamilton matrix holds `sign · W[component]`.
///
/// ```text
/// | W0 -W1 -W2 -W3 |
/// | W1  W0 -W3  W2 |
/// | W2  W3  W0 -W1 |
/// | W3 -W2  W1  W0 |
/// ```
pub const HAMILTON_PATTERN: [[(usize, f64); 4]; 4] = [
    [(0, 1.0), (1, -1.0), (2, -1.0), (3, -1.0)],
    [(1, 1.0), (0, 1.0), (3, -1.0), (2, 1.0)],
    [(2, 1.0), (3, 1.0), (0, 1.0), (1, -1.0)],
    [(3, 1.0), (2, -1.0), (1, 1.0), (0, 1.0)],
];

/// Dense row-major matrix for the pure algebra kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape("matrix", &[rows, cols], &[data.len()]));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Matrix { rows: 1, cols: 1, data: vec![v] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape("matrix matmul", &[self.rows, self.cols], &[other.rows, other.cols]));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::shape("mat_vec", &[self.rows, self.cols], &[v.len()]));
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum())
            .collect())
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[i,j] · b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (rows, cols) = (a.rows * b.rows, a.cols * b.cols);
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a.get(i, j);
            for p in 0..b.rows {
                for q in 0..b.cols {
                    out.set(i * b.rows + p, j * b.cols + q, s * b.get(p, q));
                }
            }
        }
    }
    out
}

/// Sum of Kronecker products `Σ aᵢ ⊗ fᵢ` over plain matrices.
pub fn kronecker_sum(a: &[Matrix], f: &[Matrix]) -> Result<Matrix> {
    if a.len() != f.len() || a.is_empty() {
        return Err(Error::invalid("kronecker_sum", format!("{} algebra vs {} blocks", a.len(), f.len())));
    }
    let mut acc = kronecker(&a[0], &f[0]);
    for (ai, fi) in a.iter().zip(f).skip(1) {
        let term = kronecker(ai, fi);
        if term.rows != acc.rows || term.cols != acc.cols {
            return Err(Error::shape("kronecker_sum", &[acc.rows, acc.cols], &[term.rows, term.cols]));
        }
        acc.data.iter_mut().zip(&term.data).for_each(|(x, y)| *x += y);
    }
    Ok(acc)
}

/// The 4×4 block matrix of the Hamilton product for quaternion weight
/// blocks `W0..W3`.
pub fn hamilton_matrix(w: [&Matrix; 4]) -> Result<Matrix> {
    let (p, q) = (w[0].rows, w[0].cols);
    if let Some(bad) = w.iter().find(|m| m.rows != p || m.cols != q) {
        return Err(Error::shape("hamilton_matrix", &[p, q], &[bad.rows, bad.cols]));
    }
    let mut out = Matrix::zeros(4 * p, 4 * q);
    for (br, row) in HAMILTON_PATTERN.iter().enumerate() {
        for (bc, &(comp, sign)) in row.iter().enumerate() {
            for i in 0..p {
                for j in 0..q {
                    let v = w[comp].get(i, j);
                    out.set(br * p + i, bc * q + j, if sign < 0.0 { -v } else { v });
                }
            }
        }
    }
    Ok(out)
}

/// The four `Aᵢ` that make `Σ Aᵢ ⊗ Wᵢ` equal the Hamilton matrix.
pub fn quaternion_algebra() -> [Matrix; 4] {
    let mut a = [Matrix::zeros(4, 4), Matrix::zeros(4, 4), Matrix::zeros(4, 4), Matrix::zeros(4, 4)];
    for (r, row) in HAMILTON_PATTERN.iter().enumerate() {
        for (c, &(comp, sign)) in row.iter().enumerate() {
            a[comp].set(r, c, sign);
        }
    }
    a
}

/// The `n` algebra matrices `Aᵢ` (each `n×n`), stored as one `[n, n, n]`
/// tensor so they can be trained.
#[derive(Debug, Clone)]
pub struct AlgebraMatrices {
    pub n: usize,
    pub a: Tensor,
    pub frozen: bool,
}

impl AlgebraMatrices {
    /// Zero-initialized trainable algebra.
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("algebra", "n must be at least 1"));
        }
        Ok(AlgebraMatrices { n, a: Tensor::param(&[n, n, n], vec![0.0; n * n * n])?, frozen: false })
    }

    pub fn from_matrices(mats: &[Matrix], frozen: bool) -> Result<Self> {
        let n = mats.len();
        if n == 0 {
            return Err(Error::invalid("algebra", "need at least one matrix"));
        }
        if let Some(m) = mats.iter().find(|m| m.rows != n || m.cols != n) {
            return Err(Error::shape("algebra", &[n, n], &[m.rows, m.cols]));
        }
        let data: Vec<f64> = mats.iter().flat_map(|m| m.data.iter().copied()).collect();
        let t = Tensor::new(&[n, n, n], data)?.into_leaf(!frozen);
        Ok(AlgebraMatrices { n, a: t, frozen })
    }

    pub fn matrices(&self) -> Vec<Matrix> {
        let n = self.n;
        let d = self.a.data();
        (0..n)
            .map(|k| Matrix { rows: n, cols: n, data: d[k * n * n..(k + 1) * n * n].to_vec() })
            .collect()
    }

    /// Overwrites all entries; keeps the same trainable leaf.
    pub fn assign(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n.pow(3) {
            return Err(Error::shape("algebra assign", &[self.n, self.n, self.n], &[values.len()]));
        }
        self.a.data_mut().copy_from_slice(values);
        Ok(())
    }
}

/// The `n` weight blocks `Fᵢ`, stored as `[n, out/n, in/n, (kh, kw)]`.
#[derive(Debug, Clone)]
pub struct WeightBlocks {
    pub n: usize,
    pub f: Tensor,
}

impl WeightBlocks {
    /// Zero blocks for an `out×in` (optionally `×kh×kw`) synthesized weight.
    pub fn zeros(n: usize, out: usize, inp: usize, spatial: &[usize]) -> Result<Self> {
        check_div(out, n, "output width")?;
        check_div(inp, n, "input width")?;
        let mut shape = vec![n, out / n, inp / n];
        shape.extend_from_slice(spatial);
        let len = shape.iter().product();
        Ok(WeightBlocks { n, f: Tensor::param(&shape, vec![0.0; len])? })
    }

    /// Shape of one block.
    pub fn block_shape(&self) -> &[usize] {
        &self.f.shape()[1..]
    }
}

pub(crate) fn check_div(value: usize, n: usize, context: &str) -> Result<()> {
    if n == 0 || !value.is_multiple_of(n) {
        return Err(Error::Divisibility { value, n, context: context.to_string() });
    }
    Ok(())
}

/// `H = Σᵢ Aᵢ ⊗ Fᵢ`. For convolutional blocks the Kronecker structure acts
/// on the two channel axes and the spatial taps pass through, giving an
/// `O×C×kh×kw` kernel. Differentiable in both `A` and `F`.
pub fn synthesize_ph_weight(alg: &AlgebraMatrices, blocks: &WeightBlocks) -> Result<Tensor> {
    if alg.n != blocks.n || blocks.f.shape()[0] != alg.n {
        return Err(Error::invalid(
            "synthesize_ph_weight",
            format!("algebra n = {} but blocks n = {}", alg.n, blocks.n),
        ));
    }
    synthesize_raw(&alg.a, &blocks.f)
}

pub(crate) fn synthesize_raw(a: &Tensor, f: &Tensor) -> Result<Tensor> {
    let fs = f.shape().to_vec();
    let n = a.shape()[0];
    if a.shape() != [n, n, n] || fs.len() < 3 || fs[0] != n {
        return Err(Error::shape("synthesize_ph_weight", a.shape(), &fs));
    }
    let (p, q) = (fs[1], fs[2]);
    let r: usize = fs[3..].iter().product();
    let av = a.to_vec();
    let fv = f.to_vec();
    let row_len = n * q * r;
    let mut h = vec![0.0; n * p * row_len];
    for br in 0..n {
        for bc in 0..n {
            for k in 0..n {
                let coef = av[(k * n + br) * n + bc];
                for i in 0..p {
                    let dst = (br * p + i) * row_len + bc * q * r;
                    let src = (k * p + i) * q * r;
                    for (d, s) in h[dst..dst + q * r].iter_mut().zip(&fv[src..src + q * r]) {
                        *d += coef * s;
                    }
                }
            }
        }
    }
    let mut shape = vec![n * p, n * q];
    shape.extend_from_slice(&fs[3..]);
    let (a_rg, f_rg) = (a.requires_grad(), f.requires_grad());
    Ok(Tensor::from_op(
        "ph_synthesize",
        shape,
        h,
        vec![a.clone(), f.clone()],
        Box::new(move |g| {
            let mut ga = a_rg.then(|| vec![0.0; n * n * n]);
            let mut gf = f_rg.then(|| vec![0.0; fv.len()]);
            for br in 0..n {
                for bc in 0..n {
                    for k in 0..n {
                        let ai = (k * n + br) * n + bc;
                        let coef = av[ai];
                        let mut acc = 0.0;
                        for i in 0..p {
                            let hs = (br * p + i) * row_len + bc * q * r;
                            let fsrc = (k * p + i) * q * r;
                            let gblk = &g[hs..hs + q * r];
                            if ga.is_some() {
                                acc += gblk.iter().zip(&fv[fsrc..fsrc + q * r]).map(|(x, y)| x * y).sum::<f64>();
                            }
                            if let Some(gf) = gf.as_mut() {
                                for (d, s) in gf[fsrc..fsrc + q * r].iter_mut().zip(gblk) {
                                    *d += coef * s;
                                }
                            }
                        }
                        if let Some(ga) = ga.as_mut() {
                            ga[ai] += acc;
                        }
                    }
                }
            }
            vec![ga, gf]
        }),
    ))
}

/// Places quaternion blocks `w = [4, p, q, …]` directly in the Hamilton
/// pattern, giving a `[4p, 4q, …]` weight. Independent of the Kronecker
/// route above.
pub fn hamilton_kernel(w: &Tensor) -> Result<Tensor> {
    let ws = w.shape().to_vec();
    if ws.len() < 3 || ws[0] != 4 {
        return Err(Error::invalid("hamilton_kernel", format!("expected [4, p, q, ..], got {ws:?}")));
    }
    let (p, q) = (ws[1], ws[2]);
    let r: usize = ws[3..].iter().product();
    let wv = w.to_vec();
    let row_len = 4 * q * r;
    let mut out = vec![0.0; 4 * p * row_len];
    for (br, row) in HAMILTON_PATTERN.iter().enumerate() {
        for (bc, &(comp, sign)) in row.iter().enumerate() {
            for i in 0..p {
                let dst = (br * p + i) * row_len + bc * q * r;
                let src = (comp * p + i) * q * r;
                for (d, s) in out[dst..dst + q * r].iter_mut().zip(&wv[src..src + q * r]) {
                    *d = if sign < 0.0 { -*s } else { *s };
                }
            }
        }
    }
    let mut shape = vec![4 * p, 4 * q];
    shape.extend_from_slice(&ws[3..]);
    let len = wv.len();
    Ok(Tensor::from_op(
        "hamilton_kernel",
        shape,
        out,
        vec![w.clone()],
        Box::new(move |g| {
            let mut gw = vec![0.0; len];
            for (br, row) in HAMILTON_PATTERN.iter().enumerate() {
                for (bc, &(comp, sign)) in row.iter().enumerate() {
                    for i in 0..p {
                        let src = (br * p + i) * row_len + bc * q * r;
                        let dst = (comp * p + i) * q * r;
                        for (d, s) in gw[dst..dst + q * r].iter_mut().zip(&g[src..src + q * r]) {
                            *d += sign * s;
                        }
                    }
                }
            }
            vec![Some(gw)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    // Definition-loop oracle: four nested loops over (i, j, p, q).
    fn kron_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
        for i in 0..a.rows {
            for j in 0..a.cols {
                for p in 0..b.rows {
                    for q in 0..b.cols {
                        out.data[(i * b.rows + p) * out.cols + j * b.cols + q] = a.data[i * a.cols + j] * b.data[p * b.cols + q];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_and_axioms() {
        let p = Quaternion::new(0.3, -1.2, 2.0, 0.7);
        assert_eq!(p * Quaternion::ONE, p);
        assert_eq!(Quaternion::I * Quaternion::J, Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::I, Quaternion::new(0.0, 0.0, 0.0, -1.0));
        assert_eq!(Quaternion::J * Quaternion::K, Quaternion::I);
        assert_eq!(Quaternion::K * Quaternion::I, Quaternion::J);
    }

    #[test]
    fn worked_product() {
        let r = Quaternion::new(1.0, 2.0, 3.0, 4.0) * Quaternion::new(5.0, 6.0, 7.0, 8.0);
        assert_eq!(r, Quaternion::new(-60.0, 12.0, 30.0, 24.0));
    }

    #[test]
    fn hamilton_matrix_identity_and_i() {
        let one = [1.0, 0.0, 0.0, 0.0].map(Matrix::scalar);
        let h = hamilton_matrix([&one[0], &one[1], &one[2], &one[3]]).unwrap();
        assert_eq!(h, Matrix::identity(4));

        let i = [0.0, 1.0, 0.0, 0.0].map(Matrix::scalar);
        let h = hamilton_matrix([&i[0], &i[1], &i[2], &i[3]]).unwrap();
        #[rustfmt::skip]
        let expect = vec![
            0.0, -1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        assert_eq!(h.data.iter().map(|v| v + 0.0).collect::<Vec<_>>(), expect);
    }

    #[test]
    fn hamilton_matrix_rejects_unequal_blocks() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(hamilton_matrix([&a, &a, &b, &a]).is_err());
    }

    #[test]
    fn kronecker_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = rand_matrix(&mut rng, 3, 3);
        let diag = kronecker(&Matrix::identity(2), &b);
        let swap = kronecker(&Matrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap(), &b);
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(diag.get(p, q), b.get(p, q));
                assert_eq!(diag.get(3 + p, 3 + q), b.get(p, q));
                assert_eq!(diag.get(p, 3 + q), 0.0);
                assert_eq!(swap.get(p, 3 + q), b.get(p, q));
                assert_eq!(swap.get(3 + p, q), b.get(p, q));
                assert_eq!(swap.get(p, q), 0.0);
            }
        }
        let a = rand_matrix(&mut rng, 2, 2);
        assert_eq!(kronecker(&a, &b), kron_oracle(&a, &b));
    }

    #[test]
    fn synthesis_degenerate_and_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // n = 1: H = a·F
        let alg = AlgebraMatrices::from_matrices(&[Matrix::scalar(-0.5)], false).unwrap();
        let blocks = WeightBlocks::zeros(1, 3, 2, &[]).unwrap();
        let fv: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        blocks.f.data_mut().copy_from_slice(&fv);
        let h = synthesize_ph_weight(&alg, &blocks).unwrap();
        assert_eq!(h.shape(), &[3, 2]);
        assert_eq!(h.to_vec(), fv.iter().map(|v| -0.5 * v).collect::<Vec<_>>());

        // n = 2 complex pattern: [[F1, -F2], [F2, F1]]
        let a1 = Matrix::identity(2);
        let a2 = Matrix::new(2, 2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        let alg = AlgebraMatrices::from_matrices(&[a1.clone(), a2.clone()], true).unwrap();
        let blocks = WeightBlocks::zeros(2, 4, 4, &[]).unwrap();
        let f1 = rand_matrix(&mut rng, 2, 2);
        let f2 = rand_matrix(&mut rng, 2, 2);
        blocks.f.data_mut().copy_from_slice(&[f1.data.clone(), f2.data.clone()].concat());
        let h = synthesize_ph_weight(&alg, &blocks).unwrap();
        let oracle = kronecker_sum(&[a1, a2], &[f1.clone(), f2.clone()]).unwrap();
        assert_eq!(h.to_vec(), oracle.data);
        for i in 0..2 {
            for j in 0..2 {
                let hv = |r: usize, c: usize| h.data()[r * 4 + c];
                assert_eq!(hv(i, j), f1.get(i, j));
                assert_eq!(hv(i, 2 + j), -f2.get(i, j));
                assert_eq!(hv(2 + i, j), f2.get(i, j));
                assert_eq!(hv(2 + i, 2 + j), f1.get(i, j));
            }
        }
    }

    #[test]
    fn quaternion_pattern_matches_hamilton_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<Matrix> = (0..4).map(|_| rand_matrix(&mut rng, 3, 2)).collect();
        let alg = AlgebraMatrices::from_matrices(&quaternion_algebra(), true).unwrap();
        let blocks = WeightBlocks::zeros(4, 12, 8, &[]).unwrap();
        blocks.f.data_mut().copy_from_slice(&w.iter().flat_map(|m| m.data.clone()).collect::<Vec<_>>());
        let h = synthesize_ph_weight(&alg, &blocks).unwrap();
        let hm = hamilton_matrix([&w[0], &w[1], &w[2], &w[3]]).unwrap();
        assert_eq!(h.to_vec(), hm.data);
        let hk = hamilton_kernel(&blocks.f).unwrap();
        assert_eq!(hk.to_vec(), hm.data);
    }

    #[test]
    fn pattern_counts() {
        let a = quaternion_algebra();
        let plus: usize = a.iter().map(|m| m.data.iter().filter(|&&v| v == 1.0).count()).sum();
        let minus: usize = a.iter().map(|m| m.data.iter().filter(|&&v| v == -1.0).count()).sum();
        assert_eq!((plus, minus), (10, 6));
        for m in &a {
            assert_eq!(m.data.iter().filter(|&&v| v != 0.0).count(), 4);
        }
    }

    #[test]
    fn synthesis_rejects_n_mismatch() {
        let alg = AlgebraMatrices::zeros(2).unwrap();
        let blocks = WeightBlocks::zeros(4, 8, 8, &[]).unwrap();
        assert!(synthesize_ph_weight(&alg, &blocks).is_err());
        assert!(matches!(WeightBlocks::zeros(3, 8, 9, &[]), Err(Error::Divisibility { .. })));
    }
}

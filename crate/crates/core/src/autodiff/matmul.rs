//! GEMM backend. `matrixmultiply` does the per-block work; when the
//! parallel switch is on and the product is large enough, output rows are
//! split into blocks across rayon workers. Each output element is a single
//! dot product with a fixed accumulation order, so the block split cannot
//! change results.

use super::tensor::Tensor;
use crate::parallel;

/// Products below this many multiply-adds stay sequential; the fork/join
/// overhead dominates under it.
const PAR_THRESHOLD: usize = 1 << 18;

#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    fn normal(t: &'a Tensor) -> Self {
        View {
            data: t.data(),
            rows: t.rows(),
            cols: t.cols(),
            rs: t.cols() as isize,
            cs: 1,
        }
    }

    fn transposed(t: &'a Tensor) -> Self {
        View {
            data: t.data(),
            rows: t.cols(),
            cols: t.rows(),
            rs: 1,
            cs: t.cols() as isize,
        }
    }

    /// Rows `r0..r0+n` of this view.
    fn row_block(&self, r0: usize, n: usize) -> View<'a> {
        let offset = (r0 as isize * self.rs) as usize;
        View {
            data: &self.data[offset..],
            rows: n,
            cols: self.cols,
            rs: self.rs,
            cs: self.cs,
        }
    }
}

fn gemm_block(a: View, b: View, out: &mut [f64], out_cols: usize) {
    debug_assert_eq!(a.cols, b.rows);
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            0.0,
            out.as_mut_ptr(),
            out_cols as isize,
            1,
        );
    }
}

fn gemm(a: View, b: View) -> Tensor {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Tensor::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    let go_parallel = parallel::is_enabled() && m * k * n >= PAR_THRESHOLD && m > 1;
    #[cfg(feature = "parallel")]
    {
        if go_parallel {
            use rayon::prelude::*;
            let threads = rayon::current_num_threads().max(1);
            let block = m.div_ceil(threads).max(16);
            out.data_mut()
                .par_chunks_mut(block * n)
                .enumerate()
                .for_each(|(i, chunk)| {
                    let r0 = i * block;
                    let nrows = chunk.len() / n;
                    gemm_block(a.row_block(r0, nrows), b, chunk, n);
                });
            return out;
        }
    }
    let _ = go_parallel;
    gemm_block(a, b, out.data_mut(), n);
    out
}

/// `a (m x k) * b (k x n)`.
pub fn matmul_nn(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.cols(), b.rows());
    gemm(View::normal(a), View::normal(b))
}

/// `a (m x k) * b^T` where `b` is `n x k`.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.cols(), b.cols());
    gemm(View::normal(a), View::transposed(b))
}

/// `a^T * b` where `a` is `k x m`, `b` is `k x n`.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.rows(), b.rows());
    gemm(View::transposed(a), View::normal(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive(a: &Tensor, b: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for kk in 0..a.cols() {
                    acc += a.get(i, kk) * b.get(kk, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
        Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn matches_naive_matmul() {
        let mut rng = crate::rng::stream_rng(7, crate::rng::Stream::Init);
        for &(m, k, n) in &[(1, 1, 1), (3, 4, 5), (17, 9, 13), (64, 48, 48)] {
            let a = random(m, k, &mut rng);
            let b = random(k, n, &mut rng);
            let got = matmul_nn(&a, &b);
            let want = naive(&a, &b);
            for (x, y) in got.data().iter().zip(want.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_variants_match() {
        let mut rng = crate::rng::stream_rng(8, crate::rng::Stream::Init);
        let a = random(6, 4, &mut rng);
        let b = random(5, 4, &mut rng);
        // a * b^T
        let got = matmul_nt(&a, &b);
        let mut bt = Tensor::zeros(4, 5);
        for i in 0..5 {
            for j in 0..4 {
                bt.set(j, i, b.get(i, j));
            }
        }
        let want = naive(&a, &bt);
        for (x, y) in got.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        let c = random(4, 6, &mut rng);
        let d = random(4, 3, &mut rng);
        let got = matmul_tn(&c, &d);
        let mut ct = Tensor::zeros(6, 4);
        for i in 0..4 {
            for j in 0..6 {
                ct.set(j, i, c.get(i, j));
            }
        }
        let want = naive(&ct, &d);
        for (x, y) in got.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// The row-block split must be bit-identical to the single-call path.
    #[test]
    fn parallel_split_is_bit_identical() {
        let mut rng = crate::rng::stream_rng(9, crate::rng::Stream::Init);
        let a = random(512, 96, &mut rng);
        let b = random(96, 160, &mut rng);
        let seq = crate::parallel::with_parallelism(false, || matmul_nn(&a, &b));
        let par = crate::parallel::with_parallelism(true, || matmul_nn(&a, &b));
        assert_eq!(seq.data(), par.data());
    }
}

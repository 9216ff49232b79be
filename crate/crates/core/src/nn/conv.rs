use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::Rng;

/// Stride-1 1-D convolution with zero "same" padding. The kernel size must be odd.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `(out, in * kernel)`; column `i * kernel + k` holds tap `k` of input channel `i`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ConvGrad {
    pub fn zeros_like(conv: &Conv1d) -> Self {
        Self { weight: Array2::zeros(conv.weight.dim()), bias: Array1::zeros(conv.bias.len()) }
    }
}

impl Conv1d {
    /// Fan-in scaled uniform init, `U(-1/sqrt(in * kernel), 1/sqrt(in * kernel))` for weights and bias.
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd, got {kernel}");
        let fan_in = in_channels * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((out_channels, fan_in), || rng.random_range(-bound..bound));
        let bias = Array1::from_shape_simple_fn(out_channels, || rng.random_range(-bound..bound));
        Self { weight, bias, kernel }
    }

    pub fn from_parts(weight: Array2<f64>, bias: Array1<f64>, kernel: usize) -> Self {
        assert!(kernel % 2 == 1 && weight.ncols() % kernel == 0 && weight.nrows() == bias.len());
        Self { weight, bias, kernel }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.ncols() / self.kernel
    }

    pub fn out_channels(&self) -> usize {
        self.weight.nrows()
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Unfolds `(in, batch, frames)` into `(in * kernel, batch * frames)`.
    fn im2col(&self, x: &Array3<f64>) -> Array2<f64> {
        let (channels, batch, frames) = x.dim();
        let pad = self.kernel / 2;
        let mut col = Array2::zeros((channels * self.kernel, batch * frames));
        for i in 0..channels {
            for k in 0..self.kernel {
                let mut row = col.row_mut(i * self.kernel + k);
                // output frame t reads input frame t + k - pad
                let lo = pad.saturating_sub(k);
                let hi = (frames + pad).saturating_sub(k).min(frames);
                if lo >= hi {
                    continue;
                }
                for b in 0..batch {
                    let src = x.slice(s![i, b, lo + k - pad..hi + k - pad]);
                    row.slice_mut(s![b * frames + lo..b * frames + hi]).assign(&src);
                }
            }
        }
        col
    }

    fn col2im(&self, col: &Array2<f64>, batch: usize, frames: usize) -> Array3<f64> {
        let channels = self.in_channels();
        let pad = self.kernel / 2;
        let mut x = Array3::zeros((channels, batch, frames));
        for i in 0..channels {
            for k in 0..self.kernel {
                let row = col.row(i * self.kernel + k);
                let lo = pad.saturating_sub(k);
                let hi = (frames + pad).saturating_sub(k).min(frames);
                if lo >= hi {
                    continue;
                }
                for b in 0..batch {
                    let mut dst = x.slice_mut(s![i, b, lo + k - pad..hi + k - pad]);
                    dst += &row.slice(s![b * frames + lo..b * frames + hi]);
                }
            }
        }
        x
    }

    /// Returns the output and the unfolded input needed by [`Conv1d::backward`].
    pub fn forward(&self, x: &Array3<f64>) -> (Array3<f64>, Array2<f64>) {
        let (channels, batch, frames) = x.dim();
        assert_eq!(channels, self.in_channels(), "conv input channel mismatch");
        let col = self.im2col(x);
        let mut y = self.weight.dot(&col);
        y += &self.bias.view().insert_axis(Axis(1));
        let y = y
            .into_shape_with_order((self.out_channels(), batch, frames))
            .expect("gemm output is contiguous");
        (y, col)
    }

    pub fn backward(&self, col: &Array2<f64>, dy: &Array3<f64>, need_input_grad: bool) -> (Option<Array3<f64>>, ConvGrad) {
        let (out, batch, frames) = dy.dim();
        let dy2 = dy
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((out, batch * frames))
            .expect("standard layout");
        let grad = ConvGrad { weight: dy2.dot(&col.t()), bias: dy2.sum_axis(Axis(1)) };
        let dx = need_input_grad.then(|| self.col2im(&self.weight.t().dot(&dy2), batch, frames));
        (dx, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct definition of the convolution.
    fn naive(conv: &Conv1d, x: &Array3<f64>) -> Array3<f64> {
        let (c_in, batch, frames) = x.dim();
        let k = conv.kernel();
        let pad = k as isize / 2;
        Array3::from_shape_fn((conv.out_channels(), batch, frames), |(o, b, t)| {
            let mut acc = conv.bias[o];
            for i in 0..c_in {
                for j in 0..k {
                    let src = t as isize + j as isize - pad;
                    if src >= 0 && (src as usize) < frames {
                        acc += conv.weight[[o, i * k + j]] * x[[i, b, src as usize]];
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (c_in, c_out, k, b, t) in [(3, 4, 3, 2, 7), (2, 5, 5, 1, 3), (4, 2, 1, 3, 5), (1, 1, 7, 1, 2)] {
            let conv = Conv1d::new(c_in, c_out, k, &mut rng);
            let x = Array3::from_shape_simple_fn((c_in, b, t), || rng.random_range(-1.0..1.0));
            let (y, _) = conv.forward(&x);
            let want = naive(&conv, &x);
            assert!((&y - &want).iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Conv1d::new(8, 4, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = Conv1d::new(8, 4, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let bound = 1.0 / 40f64.sqrt();
        assert!(a.weight.iter().chain(a.bias.iter()).all(|w| w.abs() <= bound));
        assert_eq!(a.parameter_count(), 8 * 4 * 5 + 4);
    }
}

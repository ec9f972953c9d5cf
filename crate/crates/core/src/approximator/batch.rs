//! Batched Taylor-mode evaluation with a reverse pass over parameters.
//!
//! A batch carries, for every point, a fixed set of *channels*: the value,
//! optionally every first input-derivative, and a chosen list of second
//! input-derivatives. Channels are stored channel-major: channel `c` of point
//! `p` lives at column `c * n_points + p`, so each layer's affine map is one
//! GEMM over all channels of all points (the bias only touches the value
//! block). Through `tanh` the channels transform as
//!
//! ```text
//! h    = s(z)
//! h_i  = s'(z) z_i
//! h_ab = s''(z) z_a z_b + s'(z) z_ab
//! ```
//!
//! `backward` is the exact adjoint of that recursion, so any loss that is a
//! smooth function of the output channels gets an exact parameter gradient.

use crate::error::{Error, Result};

use super::ApproximatorParams;

/// Which derivative channels a batch evaluation propagates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channels {
    first: bool,
    second: Vec<(usize, usize)>,
}

impl Channels {
    pub fn value_only() -> Self {
        Self {
            first: false,
            second: Vec::new(),
        }
    }

    pub fn with_first() -> Self {
        Self {
            first: true,
            second: Vec::new(),
        }
    }

    /// Value, all first derivatives, and the listed second derivatives.
    /// Pairs are normalized so that `i <= j`.
    pub fn with_second(pairs: &[(usize, usize)]) -> Self {
        let mut second: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(i, j)| if i <= j { (i, j) } else { (j, i) })
            .collect();
        second.sort_unstable();
        second.dedup();
        Self {
            first: true,
            second,
        }
    }

    /// Every first and second derivative (upper triangle of the Hessian).
    pub fn full(dim: usize) -> Self {
        let pairs: Vec<_> = (0..dim)
            .flat_map(|i| (i..dim).map(move |j| (i, j)))
            .collect();
        Self::with_second(&pairs)
    }

    pub fn has_first(&self) -> bool {
        self.first
    }

    pub fn second_pairs(&self) -> &[(usize, usize)] {
        &self.second
    }

    pub fn count(&self, dim: usize) -> usize {
        1 + if self.first { dim } else { 0 } + self.second.len()
    }

    pub fn first_index(&self, i: usize) -> Option<usize> {
        self.first.then_some(1 + i)
    }

    pub fn second_index(&self, dim: usize, i: usize, j: usize) -> Option<usize> {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.second
            .iter()
            .position(|&p| p == key)
            .map(|k| 1 + dim + k)
    }
}

struct LayerTape {
    /// Layer input, `fan_in × cols`.
    input: Vec<f64>,
    /// Pre-activation, `fan_out × cols` (hidden layers only).
    pre: Vec<f64>,
}

/// Forward tape of one batch evaluation.
pub struct BatchJets {
    dim: usize,
    n_points: usize,
    channels: Channels,
    tape: Vec<LayerTape>,
    output: Vec<f64>,
}

/// `c = alpha * a * b + beta * c` on strided row/column layouts.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    rsc: isize,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices above bound every index the strided views touch.
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
            rsc,
            1,
        );
    }
}

impl BatchJets {
    /// Runs the forward pass for `points` (flattened, `dim` coordinates each).
    pub fn forward(
        params: &ApproximatorParams,
        points: &[f64],
        channels: &Channels,
    ) -> Result<Self> {
        let dim = params.input_dim();
        if !points.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "flattened point buffer of length {} is not a multiple of input dimension {dim}",
                points.len()
            )));
        }
        if let Some(&(i, j)) = channels.second.iter().find(|&&(_, j)| j >= dim) {
            return Err(Error::Input(format!(
                "second-derivative channel ({i}, {j}) out of range for input dimension {dim}"
            )));
        }
        let n_points = points.len() / dim;
        let n_ch = channels.count(dim);
        let cols = n_ch * n_points;
        let sizes = params.layer_sizes();
        let n_layers = params.n_layers();

        let mut input = vec![0.0; dim * cols];
        for (p, x) in points.chunks_exact(dim).enumerate() {
            for (k, &xk) in x.iter().enumerate() {
                input[k * cols + p] = xk;
            }
        }
        if channels.first {
            for i in 0..dim {
                let start = i * cols + (1 + i) * n_points;
                input[start..start + n_points].fill(1.0);
            }
        }

        let mut tape = Vec::with_capacity(n_layers);
        let mut current = input;
        let mut output = Vec::new();
        for layer in 0..n_layers {
            let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
            let w = params.weights(layer);
            let b = params.biases(layer);
            let mut z = vec![0.0; fan_out * cols];
            gemm(
                fan_out,
                fan_in,
                cols,
                w,
                (fan_in as isize, 1),
                &current,
                (cols as isize, 1),
                0.0,
                &mut z,
                cols as isize,
            );
            for (row, &bj) in z.chunks_exact_mut(cols).zip(b) {
                row[..n_points].iter_mut().for_each(|v| *v += bj);
            }
            if layer + 1 == n_layers {
                tape.push(LayerTape {
                    input: current,
                    pre: Vec::new(),
                });
                output = z;
                break;
            }
            let mut a = vec![0.0; fan_out * cols];
            for (zrow, arow) in z.chunks_exact(cols).zip(a.chunks_exact_mut(cols)) {
                activate_row(zrow, arow, n_points, dim, channels);
            }
            tape.push(LayerTape {
                input: current,
                pre: z,
            });
            current = a;
        }

        Ok(Self {
            dim,
            n_points,
            channels: channels.clone(),
            tape,
            output,
        })
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &Channels {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.count(self.dim)
    }

    /// Output values of one channel for every point.
    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.output[ch * self.n_points..(ch + 1) * self.n_points]
    }

    pub fn value(&self, p: usize) -> f64 {
        self.output[p]
    }

    /// `∂û/∂x_i` at point `p`; panics when first derivatives were not requested.
    pub fn first(&self, p: usize, i: usize) -> f64 {
        let ch = self
            .channels
            .first_index(i)
            .expect("first derivatives not propagated in this batch");
        self.output[ch * self.n_points + p]
    }

    /// `∂²û/∂x_i∂x_j` at point `p`; panics when the pair was not requested.
    pub fn second(&self, p: usize, i: usize, j: usize) -> f64 {
        let ch = self
            .channels
            .second_index(self.dim, i, j)
            .expect("second derivative not propagated in this batch");
        self.output[ch * self.n_points + p]
    }

    /// Accumulates into `grad` the parameter gradient of `Σ adjoint · output`,
    /// where `adjoint` has the output's channel-major layout.
    pub fn backward(&self, params: &ApproximatorParams, adjoint: &[f64], grad: &mut [f64]) {
        let cols = self.n_ch_cols();
        assert_eq!(adjoint.len(), cols, "adjoint must match the output layout");
        assert_eq!(grad.len(), params.len(), "gradient buffer length");
        let sizes = params.layer_sizes();
        let n_layers = params.n_layers();
        let n = self.n_points;

        let mut upstream = adjoint.to_vec();
        for layer in (0..n_layers).rev() {
            let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
            let tape = &self.tape[layer];
            if layer + 1 < n_layers {
                let post = &self.tape[layer + 1].input;
                for ((zbar, zrow), srow) in upstream
                    .chunks_exact_mut(cols)
                    .zip(tape.pre.chunks_exact(cols))
                    .zip(post.chunks_exact(cols))
                {
                    activate_row_adjoint(zbar, zrow, srow, n, self.dim, &self.channels);
                }
            }
            let (w_off, b_off) = params.layer_offsets(layer);
            // dW += Zbar · Aᵀ
            gemm(
                fan_out,
                cols,
                fan_in,
                &upstream,
                (cols as isize, 1),
                &tape.input,
                (1, cols as isize),
                1.0,
                &mut grad[w_off..b_off],
                fan_in as isize,
            );
            for (j, row) in upstream.chunks_exact(cols).enumerate() {
                grad[b_off + j] += row[..n].iter().sum::<f64>();
            }
            if layer > 0 {
                let mut below = vec![0.0; fan_in * cols];
                // Abar = Wᵀ · Zbar
                gemm(
                    fan_in,
                    fan_out,
                    cols,
                    params.weights(layer),
                    (1, fan_in as isize),
                    &upstream,
                    (cols as isize, 1),
                    0.0,
                    &mut below,
                    cols as isize,
                );
                upstream = below;
            }
        }
    }

    fn n_ch_cols(&self) -> usize {
        self.n_channels() * self.n_points
    }
}

/// `e^x` for `x ∈ [0, 40]`: Cody-Waite reduction and a degree-13 Taylor
/// polynomial. Branch-free so the activation loop vectorizes.
#[inline(always)]
fn exp_nonneg(x: f64) -> f64 {
    const LN2_HI: f64 = f64::from_bits(0x3FE6_2E42_FEE0_0000);
    const LN2_LO: f64 = f64::from_bits(0x3DEA_39EF_3579_3C76);
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let k = (x * std::f64::consts::LOG2_E + SHIFT) - SHIFT;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    const C: [f64; 14] = [
        1.0 / 6_227_020_800.0,
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ];
    let mut p = C[0];
    for c in &C[1..] {
        p = p * r + c;
    }
    p * f64::from_bits(((k as i64 + 1023) as u64) << 52)
}

/// `tanh` with absolute error about one ulp of 1; saturates exactly beyond |x| = 20.
#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    let e = exp_nonneg(2.0 * x.abs().min(20.0));
    (1.0 - 2.0 / (e + 1.0)).copysign(x)
}

/// Pushes one neuron's channels through `tanh`.
fn activate_row(z: &[f64], a: &mut [f64], n: usize, dim: usize, channels: &Channels) {
    let (zv, _) = z.split_at(n);
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for p in 0..n {
        let s = tanh(zv[p]);
        a[p] = s;
        s1[p] = 1.0 - s * s;
        s2[p] = -2.0 * s * s1[p];
    }
    if channels.first {
        for i in 0..dim {
            let off = (1 + i) * n;
            for p in 0..n {
                a[off + p] = s1[p] * z[off + p];
            }
        }
    }
    for (k, &(i, j)) in channels.second.iter().enumerate() {
        let off = (1 + dim + k) * n;
        let (zi, zj) = ((1 + i) * n, (1 + j) * n);
        for p in 0..n {
            a[off + p] = s2[p] * z[zi + p] * z[zj + p] + s1[p] * z[off + p];
        }
    }
}

/// Turns `Abar` (in place) into `Zbar` for one neuron.
fn activate_row_adjoint(bar: &mut [f64], z: &[f64], post: &[f64], n: usize, dim: usize, channels: &Channels) {
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut s3 = vec![0.0; n];
    for p in 0..n {
        let s = post[p];
        let d1 = 1.0 - s * s;
        s1[p] = d1;
        s2[p] = -2.0 * s * d1;
        s3[p] = -2.0 * d1 * d1 + 4.0 * s * s * d1;
    }

    // Value channel first: it reads every other channel's adjoint unmodified.
    for p in 0..n {
        bar[p] *= s1[p];
    }
    if channels.first {
        for i in 0..dim {
            let off = (1 + i) * n;
            for p in 0..n {
                bar[p] += bar[off + p] * s2[p] * z[off + p];
            }
        }
    }
    for (k, &(i, j)) in channels.second.iter().enumerate() {
        let off = (1 + dim + k) * n;
        let (zi, zj) = ((1 + i) * n, (1 + j) * n);
        for p in 0..n {
            bar[p] += bar[off + p] * (s3[p] * z[zi + p] * z[zj + p] + s2[p] * z[off + p]);
        }
    }

    // First-derivative channels read the second-derivative adjoints.
    if channels.first {
        for i in 0..dim {
            let off = (1 + i) * n;
            for p in 0..n {
                bar[off + p] *= s1[p];
            }
        }
        for (k, &(i, j)) in channels.second.iter().enumerate() {
            let off = (1 + dim + k) * n;
            let (zi, zj) = ((1 + i) * n, (1 + j) * n);
            for p in 0..n {
                let g = bar[off + p] * s2[p];
                bar[zi + p] += g * z[zj + p];
                bar[zj + p] += g * z[zi + p];
            }
        }
    }

    for k in 0..channels.second.len() {
        let off = (1 + dim + k) * n;
        for p in 0..n {
            bar[off + p] *= s1[p];
        }
    }
}

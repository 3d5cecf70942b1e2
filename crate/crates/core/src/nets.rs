//! Small feedforward networks with exact reverse-mode gradients, plus the
//! residual and null-space wrappers built on top of them.
//!
//! The parameter vector θ of a net is the concatenation, layer by layer, of
//! the weight entries (row-major for dense layers, kernel entries for
//! convolutional ones) followed by the bias entries. Every routine that
//! exchanges flat parameter vectors relies on that order.
//!
//! A null-space wrapper x ↦ x + P_ker(A)(N(x)) never alters what the forward
//! operator sees: A applied to the output equals A applied to the input up to
//! the projection tolerance. A plain residual wrapper x ↦ x + N(x) has no
//! such guarantee, and the tests pin both facts.

use crate::error::{Error, Result};
use crate::geometry::{kernel_project, Projector};
use crate::mat::{jacobi_svd, Mat};
use crate::rng::{norm, seeded_rng, uniform_in};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Identity,
}

impl Activation {
    fn eval(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at z; the subgradient 0 is used at the ReLU kink.
    fn deriv(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    *slope
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum LayerWeight {
    Dense(Mat),
    /// Periodic convolution kernel; the layer maps length-n to length-n with
    /// n = kernel.len(), sharing the kernel weights across positions.
    ConvKernel(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub weight: LayerWeight,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn dense(weight: Mat, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::DimensionMismatch {
                context: "dense layer bias",
                expected: weight.rows(),
                got: bias.len(),
            });
        }
        Ok(Layer {
            weight: LayerWeight::Dense(weight),
            bias,
            activation,
        })
    }

    pub fn conv(kernel: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if kernel.is_empty() {
            return Err(Error::invalid("conv layer needs a nonempty kernel"));
        }
        if bias.len() != kernel.len() {
            return Err(Error::DimensionMismatch {
                context: "conv layer bias",
                expected: kernel.len(),
                got: bias.len(),
            });
        }
        Ok(Layer {
            weight: LayerWeight::ConvKernel(kernel),
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        match &self.weight {
            LayerWeight::Dense(w) => w.cols(),
            LayerWeight::ConvKernel(k) => k.len(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match &self.weight {
            LayerWeight::Dense(w) => w.rows(),
            LayerWeight::ConvKernel(k) => k.len(),
        }
    }

    fn weight_len(&self) -> usize {
        match &self.weight {
            LayerWeight::Dense(w) => w.rows() * w.cols(),
            LayerWeight::ConvKernel(k) => k.len(),
        }
    }

    /// z = W a + b (or k ⊛ a + b for convolutional layers).
    fn preactivation(&self, a: &[f64]) -> Vec<f64> {
        let mut z = match &self.weight {
            LayerWeight::Dense(w) => w.matvec(a),
            LayerWeight::ConvKernel(k) => {
                let n = k.len();
                (0..n)
                    .map(|j| (0..n).map(|m| k[m] * a[(j + n - m) % n]).sum::<f64>())
                    .collect()
            }
        };
        for (zi, bi) in z.iter_mut().zip(&self.bias) {
            *zi += bi;
        }
        z
    }
}

#[derive(Debug, Clone)]
pub struct FeedforwardNet {
    layers: Vec<Layer>,
}

impl FeedforwardNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: "layer dimension chain",
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        Ok(FeedforwardNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().unwrap().in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn params_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight_len() + l.bias.len())
            .sum()
    }

    /// θ: per layer, weight entries (row-major / kernel) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.params_len());
        for layer in &self.layers {
            match &layer.weight {
                LayerWeight::Dense(w) => theta.extend_from_slice(w.data()),
                LayerWeight::ConvKernel(k) => theta.extend_from_slice(k),
            }
            theta.extend_from_slice(&layer.bias);
        }
        theta
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params_len() {
            return Err(Error::DimensionMismatch {
                context: "set_params",
                expected: self.params_len(),
                got: theta.len(),
            });
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let wl = layer.weight_len();
            match &mut layer.weight {
                LayerWeight::Dense(w) => {
                    let (rows, cols) = (w.rows(), w.cols());
                    for i in 0..rows {
                        for j in 0..cols {
                            w[(i, j)] = theta[off + i * cols + j];
                        }
                    }
                }
                LayerWeight::ConvKernel(k) => {
                    k.copy_from_slice(&theta[off..off + wl]);
                }
            }
            off += wl;
            let bl = layer.bias.len();
            layer.bias.copy_from_slice(&theta[off..off + bl]);
            off += bl;
        }
        Ok(())
    }

    /// FNV-1a over the parameter bits and layer shape; used to detect stale
    /// forward caches.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |v: u64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for layer in &self.layers {
            eat(layer.in_dim() as u64);
            eat(layer.out_dim() as u64);
        }
        for p in self.params() {
            eat(p.to_bits());
        }
        h
    }
}

/// Intermediate state of one forward pass: the input, every pre-activation,
/// and every post-activation, plus the fingerprint of the parameters that
/// produced them.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    /// activations[0] = x, activations[ℓ] = σ(z_ℓ).
    activations: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn preactivations(&self) -> &[Vec<f64>] {
        &self.preacts
    }
}

pub fn net_forward(net: &FeedforwardNet, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if x.len() != net.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "net_forward",
            expected: net.in_dim(),
            got: x.len(),
        });
    }
    let mut activations = vec![x.to_vec()];
    let mut preacts = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let z = layer.preactivation(activations.last().unwrap());
        let a = z.iter().map(|&v| layer.activation.eval(v)).collect();
        preacts.push(z);
        activations.push(a);
    }
    let out = activations.last().unwrap().clone();
    Ok((
        out,
        ForwardCache {
            fingerprint: net.fingerprint(),
            activations,
            preacts,
        },
    ))
}

/// Exact reverse-mode gradients of ⟨grad_output, net(x)⟩ with respect to θ
/// and to x. The cache must come from a forward pass of this very net with
/// its current parameters.
pub fn net_backward(
    net: &FeedforwardNet,
    cache: &ForwardCache,
    grad_output: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if cache.fingerprint != net.fingerprint() {
        return Err(Error::StaleCache);
    }
    if grad_output.len() != net.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "net_backward",
            expected: net.out_dim(),
            got: grad_output.len(),
        });
    }

    let mut grad_params = vec![0.0; net.params_len()];
    // Offsets of each layer's weight block inside θ.
    let mut offsets = Vec::with_capacity(net.layers.len());
    let mut off = 0;
    for layer in &net.layers {
        offsets.push(off);
        off += layer.weight_len() + layer.bias.len();
    }

    let mut delta: Vec<f64> = grad_output.to_vec();
    for (ell, layer) in net.layers.iter().enumerate().rev() {
        let z = &cache.preacts[ell];
        for (d, zi) in delta.iter_mut().zip(z) {
            *d *= layer.activation.deriv(*zi);
        }
        let a_prev = &cache.activations[ell];
        let woff = offsets[ell];
        match &layer.weight {
            LayerWeight::Dense(w) => {
                let cols = w.cols();
                for i in 0..w.rows() {
                    let di = delta[i];
                    for j in 0..cols {
                        grad_params[woff + i * cols + j] += di * a_prev[j];
                    }
                }
            }
            LayerWeight::ConvKernel(k) => {
                let n = k.len();
                for m in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += delta[j] * a_prev[(j + n - m) % n];
                    }
                    grad_params[woff + m] += acc;
                }
            }
        }
        let boff = woff + layer.weight_len();
        for (i, di) in delta.iter().enumerate() {
            grad_params[boff + i] += di;
        }
        // Propagate through the linear map: Wᵀδ, or the reversed kernel.
        delta = match &layer.weight {
            LayerWeight::Dense(w) => w.tr_matvec(&delta),
            LayerWeight::ConvKernel(k) => {
                let n = k.len();
                (0..n)
                    .map(|i| (0..n).map(|m| k[m] * delta[(i + m) % n]).sum::<f64>())
                    .collect()
            }
        };
    }
    Ok((grad_params, delta))
}

/// x + N(x).
pub fn residual_forward(net: &FeedforwardNet, x: &[f64]) -> Result<Vec<f64>> {
    if net.in_dim() != net.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "residual_forward (square nets only)",
            expected: net.in_dim(),
            got: net.out_dim(),
        });
    }
    let (nx, _) = net_forward(net, x)?;
    Ok(x.iter().zip(&nx).map(|(a, b)| a + b).collect())
}

/// N together with the kernel projection of a fixed forward operator:
/// x ↦ x + P_ker(A)(N(x)).
#[derive(Debug, Clone)]
pub struct NullSpaceNet {
    pub base: FeedforwardNet,
    pub projection: Projector,
}

impl NullSpaceNet {
    pub fn new(base: FeedforwardNet, projection: Projector) -> Result<Self> {
        let n = projection.in_dim();
        if base.in_dim() != n || base.out_dim() != n {
            return Err(Error::DimensionMismatch {
                context: "null-space net dims vs projection",
                expected: n,
                got: base.in_dim().max(base.out_dim()),
            });
        }
        Ok(NullSpaceNet { base, projection })
    }
}

pub fn nullspace_forward(nsnet: &NullSpaceNet, x: &[f64]) -> Result<Vec<f64>> {
    let (nx, _) = net_forward(&nsnet.base, x)?;
    let pnx = kernel_project(&nsnet.projection, &nx)?;
    Ok(x.iter().zip(&pnx).map(|(a, b)| a + b).collect())
}

/// Spectral norm of one layer's linear part.
fn layer_spectral_norm(layer: &Layer) -> f64 {
    match &layer.weight {
        LayerWeight::Dense(w) => dense_spectral_norm(w),
        LayerWeight::ConvKernel(k) => conv_spectral_norm(k),
    }
}

/// Power iteration on WᵀW; the returned value inflates the Rayleigh quotient
/// by the residual norm so it errs on the upper side.
fn dense_spectral_norm(w: &Mat) -> f64 {
    let n = w.cols();
    let mut v = crate::rng::unit_vector(&mut seeded_rng(0x11f5), n);
    let mut bound = 0.0;
    for _ in 0..100_000 {
        let mv = w.tr_matvec(&w.matvec(&v));
        let rho: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let res = norm(
            &mv.iter()
                .zip(&v)
                .map(|(m, vi)| m - rho * vi)
                .collect::<Vec<_>>(),
        );
        bound = (rho + res).max(0.0).sqrt();
        let mn = norm(&mv);
        if mn == 0.0 {
            return 0.0;
        }
        if res <= 1e-12 * rho.abs().max(1e-300) {
            break;
        }
        for (vi, mi) in v.iter_mut().zip(&mv) {
            *vi = mi / mn;
        }
    }
    bound
}

/// Exact: the spectrum of a circulant map is the discrete Fourier transform
/// of its kernel.
fn conv_spectral_norm(kernel: &[f64]) -> f64 {
    let n = kernel.len();
    let mut best = 0.0_f64;
    for j in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (m, km) in kernel.iter().enumerate() {
            let phase = std::f64::consts::TAU * (m * j % n) as f64 / n as f64;
            re += km * phase.cos();
            im -= km * phase.sin();
        }
        best = best.max((re * re + im * im).sqrt());
    }
    best
}

/// Product of layer spectral norms — an upper bound on the Lipschitz constant
/// of the net as long as every activation is 1-Lipschitz. For a null-space
/// wrapper, 1 + this bound is a Lipschitz bound of the whole map since the
/// orthogonal projection has norm at most one.
pub fn lipschitz_upper_bound(net: &FeedforwardNet) -> Result<f64> {
    for layer in &net.layers {
        if let Activation::LeakyRelu(slope) = layer.activation {
            if slope.abs() > 1.0 {
                return Err(Error::invalid(format!(
                    "LeakyReLU slope {slope} is not 1-Lipschitz"
                )));
            }
        }
    }
    Ok(net.layers.iter().map(layer_spectral_norm).product())
}

/// Fresh dense net with seeded uniform weights in [−a, a],
/// a = sqrt(6/(d_in + d_out)) per layer, and zero biases. The draw order is
/// the θ order, so equal seeds give bit-identical parameters.
pub fn init_params(
    layer_dims: &[usize],
    activations: &[Activation],
    seed: u64,
) -> Result<FeedforwardNet> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid("need at least input and output dims"));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid("layer dims must be positive"));
    }
    if activations.len() != layer_dims.len() - 1 {
        return Err(Error::DimensionMismatch {
            context: "init_params activations",
            expected: layer_dims.len() - 1,
            got: activations.len(),
        });
    }
    let mut rng = seeded_rng(seed);
    let mut layers = Vec::with_capacity(activations.len());
    for (ell, act) in activations.iter().enumerate() {
        let (d_in, d_out) = (layer_dims[ell], layer_dims[ell + 1]);
        let a = (6.0 / (d_in + d_out) as f64).sqrt();
        let w = Mat::from_fn(d_out, d_in, |_, _| uniform_in(&mut rng, -a, a));
        layers.push(Layer::dense(w, vec![0.0; d_out], *act)?);
    }
    FeedforwardNet::new(layers)
}

/// Net computing the zero map: zero weights and biases, identity activation.
pub fn zero_net(dim: usize) -> FeedforwardNet {
    FeedforwardNet::new(vec![Layer::dense(
        Mat::zeros(dim, dim),
        vec![0.0; dim],
        Activation::Identity,
    )
    .unwrap()])
    .unwrap()
}

/// Net computing a constant map: zero weights, bias = value.
pub fn constant_net(value: Vec<f64>, in_dim: usize) -> FeedforwardNet {
    let out = value.len();
    FeedforwardNet::new(vec![Layer::dense(
        Mat::zeros(out, in_dim),
        value,
        Activation::Identity,
    )
    .unwrap()])
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{central_diff_gradient, max_relative_error};
    use crate::linops::{apply, operator_norm, svd, Operator, DEFAULT_RANK_TOL};
    use crate::rng::{dot, gaussian_vec, sub};

    fn tanh_net(dims: &[usize], seed: u64) -> FeedforwardNet {
        let acts: Vec<Activation> = dims[1..]
            .iter()
            .enumerate()
            .map(|(i, _)| {
                if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    Activation::Tanh
                }
            })
            .collect();
        init_params(dims, &acts, seed).unwrap()
    }

    #[test]
    fn identity_layer_is_identity() {
        let net = FeedforwardNet::new(vec![Layer::dense(
            Mat::identity(3),
            vec![0.0; 3],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let x = [1.0, -2.0, 3.0];
        let (y, _) = net_forward(&net, &x).unwrap();
        assert_eq!(y, x.to_vec());
    }

    #[test]
    fn relu_layer_clamps_negatives() {
        let net = FeedforwardNet::new(vec![Layer::dense(
            Mat::identity(2),
            vec![0.0; 2],
            Activation::Relu,
        )
        .unwrap()])
        .unwrap();
        let (y, _) = net_forward(&net, &[-1.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 2.0]);
    }

    #[test]
    fn forward_matches_straight_line_recomputation() {
        // Independent oracle: spell the two layers out by hand.
        let net = tanh_net(&[3, 4, 2], 5);
        let x = gaussian_vec(&mut seeded_rng(6), 3);
        let (got, _) = net_forward(&net, &x).unwrap();

        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let (w0, w1) = match (&l0.weight, &l1.weight) {
            (LayerWeight::Dense(a), LayerWeight::Dense(b)) => (a, b),
            _ => unreachable!(),
        };
        let mut h = vec![0.0; 4];
        for i in 0..4 {
            let mut acc = l0.bias[i];
            for j in 0..3 {
                acc += w0[(i, j)] * x[j];
            }
            h[i] = acc.tanh();
        }
        let mut want = vec![0.0; 2];
        for i in 0..2 {
            let mut acc = l1.bias[i];
            for j in 0..4 {
                acc += w1[(i, j)] * h[j];
            }
            want[i] = acc;
        }
        assert!(norm(&sub(&got, &want)) < 1e-14);
    }

    #[test]
    fn linear_net_grad_input_is_transpose_times_g() {
        let w = Mat::from_rows(&[vec![1.0, 2.0, 0.5], vec![-1.0, 0.0, 3.0]]);
        let net = FeedforwardNet::new(vec![Layer::dense(
            w.clone(),
            vec![0.0; 2],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let x = [0.3, -0.7, 1.1];
        let g = [2.0, -1.0];
        let (_, cache) = net_forward(&net, &x).unwrap();
        let (_, grad_input) = net_backward(&net, &cache, &g).unwrap();
        assert!(norm(&sub(&grad_input, &w.tr_matvec(&g))) < 1e-14);
    }

    #[test]
    fn zero_grad_output_gives_zero_gradients() {
        let net = tanh_net(&[3, 5, 3], 8);
        let x = gaussian_vec(&mut seeded_rng(9), 3);
        let (_, cache) = net_forward(&net, &x).unwrap();
        let (gp, gx) = net_backward(&net, &cache, &[0.0; 3]).unwrap();
        assert!(gp.iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    /// Sample a test point whose pre-activations stay clear of ReLU kinks so
    /// the central-difference oracle is valid.
    fn kink_free_point(net: &FeedforwardNet, seed: u64) -> Vec<f64> {
        'outer: for attempt in 0..100 {
            let x = gaussian_vec(&mut seeded_rng(seed + 1000 * attempt), net.in_dim());
            let (_, cache) = net_forward(net, &x).unwrap();
            for (layer, z) in net.layers().iter().zip(cache.preactivations()) {
                if matches!(layer.activation, Activation::Relu | Activation::LeakyRelu(_))
                    && z.iter().any(|v| v.abs() < 1e-4)
                {
                    continue 'outer;
                }
            }
            return x;
        }
        panic!("no kink-free point found");
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut nets = vec![
            tanh_net(&[4, 6, 4], 11),
            init_params(
                &[3, 8, 5, 3],
                &[
                    Activation::Relu,
                    Activation::LeakyRelu(0.2),
                    Activation::Identity,
                ],
                12,
            )
            .unwrap(),
        ];
        // A net with a convolutional first layer exercises the kernel path.
        let conv = FeedforwardNet::new(vec![
            Layer::conv(
                gaussian_vec(&mut seeded_rng(13), 6),
                gaussian_vec(&mut seeded_rng(14), 6),
                Activation::Tanh,
            )
            .unwrap(),
            Layer::dense(
                Mat::from_fn(6, 6, {
                    let d = gaussian_vec(&mut seeded_rng(15), 36);
                    move |i, j| d[i * 6 + j]
                }),
                vec![0.0; 6],
                Activation::Identity,
            )
            .unwrap(),
        ])
        .unwrap();
        nets.push(conv);

        for (k, net) in nets.iter_mut().enumerate() {
            for trial in 0..20u64 {
                let seed = 31 * (k as u64 + 1) + trial;
                let x = kink_free_point(net, seed);
                let g = gaussian_vec(&mut seeded_rng(seed + 7777), net.out_dim());
                let (_, cache) = net_forward(net, &x).unwrap();
                let (grad_theta, grad_x) = net_backward(net, &cache, &g).unwrap();

                let theta0 = net.params();
                let mut probe = net.clone();
                let fd_theta = central_diff_gradient(
                    |theta| {
                        probe.set_params(theta).unwrap();
                        let (out, _) = net_forward(&probe, &x).unwrap();
                        dot(&g, &out)
                    },
                    &theta0,
                    1e-6,
                );
                let fd_x = central_diff_gradient(
                    |xv| {
                        let (out, _) = net_forward(net, xv).unwrap();
                        dot(&g, &out)
                    },
                    &x,
                    1e-6,
                );
                assert!(
                    max_relative_error(&grad_theta, &fd_theta) <= 1e-5,
                    "theta grads, net {k} trial {trial}"
                );
                assert!(
                    max_relative_error(&grad_x, &fd_x) <= 1e-5,
                    "input grads, net {k} trial {trial}"
                );
            }
        }
    }

    #[test]
    fn residual_wrappers() {
        let x = [1.0, -2.0, 0.5];
        assert_eq!(residual_forward(&zero_net(3), &x).unwrap(), x.to_vec());

        let ident = FeedforwardNet::new(vec![Layer::dense(
            Mat::identity(3),
            vec![0.0; 3],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let doubled = residual_forward(&ident, &x).unwrap();
        assert_eq!(doubled, vec![2.0, -4.0, 1.0]);

        let net = tanh_net(&[3, 5, 3], 21);
        let (nx, _) = net_forward(&net, &x).unwrap();
        let want: Vec<f64> = x.iter().zip(&nx).map(|(a, b)| a + b).collect();
        assert_eq!(residual_forward(&net, &x).unwrap(), want);
    }

    #[test]
    fn nullspace_wrapper_examples() {
        let op = Operator::masked_sampling(vec![0, 1], 4).unwrap();
        let f = svd(&op, DEFAULT_RANK_TOL).unwrap();
        let proj = Projector::explicit(f);

        let x = [1.0, 2.0, 3.0, 4.0];
        let ns = NullSpaceNet::new(zero_net(4), proj.clone()).unwrap();
        let out = nullspace_forward(&ns, &x).unwrap();
        assert!(norm(&sub(&out, &x)) < 1e-12);

        let ns = NullSpaceNet::new(constant_net(vec![1.0; 4], 4), proj).unwrap();
        let out = nullspace_forward(&ns, &x).unwrap();
        assert!(norm(&sub(&out, &[1.0, 2.0, 4.0, 5.0])) < 1e-10, "{out:?}");
    }

    #[test]
    fn injective_operator_makes_wrapper_identity() {
        let data = gaussian_vec(&mut seeded_rng(23), 15);
        let op = Operator::Dense(Mat::from_fn(5, 3, |i, j| data[i * 3 + j]));
        let f = svd(&op, DEFAULT_RANK_TOL).unwrap();
        let ns = NullSpaceNet::new(tanh_net(&[3, 6, 3], 24), Projector::explicit(f)).unwrap();
        let x = gaussian_vec(&mut seeded_rng(25), 3);
        let out = nullspace_forward(&ns, &x).unwrap();
        assert!(norm(&sub(&out, &x)) <= 1e-10 * (1.0 + norm(&x)));
    }

    #[test]
    fn data_consistency_holds_for_nullspace_and_fails_for_residual() {
        let op = Operator::masked_sampling(vec![0, 2, 3], 6).unwrap();
        let f = svd(&op, DEFAULT_RANK_TOL).unwrap();
        let a_norm = operator_norm(&op, 1e-8, 10_000, 1).unwrap();
        for net_seed in 0..5u64 {
            let net = tanh_net(&[6, 9, 6], 40 + net_seed);
            let ns = NullSpaceNet::new(net.clone(), Projector::explicit(f.clone())).unwrap();
            for trial in 0..100u64 {
                let x = gaussian_vec(&mut seeded_rng(5000 + 100 * net_seed + trial), 6);
                let out = nullspace_forward(&ns, &x).unwrap();
                let defect = norm(&sub(
                    &apply(&op, &out).unwrap(),
                    &apply(&op, &x).unwrap(),
                ));
                assert!(defect <= 1e-8 * a_norm * (1.0 + norm(&x)));
            }
        }

        // A residual wrapper with the same base nets breaks the identity.
        let mut violated = false;
        for net_seed in 0..5u64 {
            let net = tanh_net(&[6, 9, 6], 40 + net_seed);
            for trial in 0..20u64 {
                let x = gaussian_vec(&mut seeded_rng(9000 + trial), 6);
                let out = residual_forward(&net, &x).unwrap();
                let defect = norm(&sub(
                    &apply(&op, &out).unwrap(),
                    &apply(&op, &x).unwrap(),
                ));
                if defect > 1e-3 * a_norm * norm(&x) {
                    violated = true;
                }
            }
        }
        assert!(violated, "residual nets unexpectedly data-consistent");
    }

    #[test]
    fn lipschitz_bounds() {
        let twice = FeedforwardNet::new(vec![Layer::dense(
            Mat::identity(3).scale(2.0),
            vec![0.0; 3],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        assert!((lipschitz_upper_bound(&twice).unwrap() - 2.0).abs() < 1e-10);

        assert_eq!(lipschitz_upper_bound(&zero_net(4)).unwrap(), 0.0);

        // Independent oracle: spectral norms from the Jacobi factorization.
        let net = tanh_net(&[4, 7, 4], 33);
        let got = lipschitz_upper_bound(&net).unwrap();
        let mut want = 1.0;
        for layer in net.layers() {
            if let LayerWeight::Dense(w) = &layer.weight {
                let (_, s, _) = jacobi_svd(w, 1e-14);
                want *= s[0];
            }
        }
        assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");

        // Convolution layer: oracle is the materialized circulant.
        let kernel = gaussian_vec(&mut seeded_rng(34), 8);
        let conv = FeedforwardNet::new(vec![Layer::conv(
            kernel.clone(),
            vec![0.0; 8],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let op = Operator::circular_convolution(kernel).unwrap();
        let (_, s, _) = jacobi_svd(&crate::linops::materialize(&op).unwrap(), 1e-14);
        let got = lipschitz_upper_bound(&conv).unwrap();
        assert!((got - s[0]).abs() <= 1e-10 * s[0]);

        let steep = FeedforwardNet::new(vec![Layer::dense(
            Mat::identity(2),
            vec![0.0; 2],
            Activation::LeakyRelu(1.5),
        )
        .unwrap()])
        .unwrap();
        assert!(lipschitz_upper_bound(&steep).is_err());
    }

    #[test]
    fn lipschitz_bound_dominates_sampled_ratios() {
        let net = tanh_net(&[5, 8, 5], 36);
        let bound = lipschitz_upper_bound(&net).unwrap();
        let mut rng = seeded_rng(37);
        for _ in 0..50 {
            let x = gaussian_vec(&mut rng, 5);
            let y = gaussian_vec(&mut rng, 5);
            let (fx, _) = net_forward(&net, &x).unwrap();
            let (fy, _) = net_forward(&net, &y).unwrap();
            let ratio = norm(&sub(&fx, &fy)) / norm(&sub(&x, &y));
            assert!(ratio <= bound * (1.0 + 1e-10), "{ratio} > {bound}");
        }
    }

    #[test]
    fn init_is_deterministic_and_sized() {
        let dims = [4usize, 8, 4];
        let acts = [Activation::Relu, Activation::Identity];
        let a = init_params(&dims, &acts, 99).unwrap();
        let b = init_params(&dims, &acts, 99).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(a.params_len(), 76);

        // Bias entries stay zero; weights respect the per-layer bound.
        for layer in a.layers() {
            assert!(layer.bias.iter().all(|&v| v == 0.0));
            let bound = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
            assert!(bound > 0.0);
            if let LayerWeight::Dense(w) = &layer.weight {
                assert!(w.data().iter().all(|v| v.abs() <= bound));
                assert!(w.data().iter().any(|v| *v != 0.0));
            }
        }
        let c = init_params(&dims, &acts, 100).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = tanh_net(&[3, 4, 3], 50);
        let x = gaussian_vec(&mut seeded_rng(51), 3);
        let (_, cache) = net_forward(&net, &x).unwrap();
        let mut theta = net.params();
        theta[0] += 1e-3;
        net.set_params(&theta).unwrap();
        let err = net_backward(&net, &cache, &[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::StaleCache));
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = tanh_net(&[3, 4, 3], 60);
        assert!(net_forward(&net, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn params_round_trip_through_set() {
        let net = tanh_net(&[3, 6, 4, 2], 61);
        let theta = net.params();
        let mut other = net.clone();
        other.set_params(&theta).unwrap();
        assert_eq!(other.params(), theta);
        assert_eq!(net.fingerprint(), other.fingerprint());
    }
}

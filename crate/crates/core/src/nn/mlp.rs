use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::Matrix;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 64;

/// One affine layer. `w` is `n_out x n_in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![S::zero(); n_in * n_out],
            b: vec![S::zero(); n_out],
        }
    }

    fn uniform<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut layer = Self::zeros(n_in, n_out);
        for x in layer.w.iter_mut().chain(layer.b.iter_mut()) {
            *x = S::lit(dist.sample(rng));
        }
        layer
    }

    /// `x * w^T + b` for a batch `x` of shape `rows x n_in`.
    fn forward(&self, x: &Matrix<S>) -> Matrix<S> {
        let rows = x.rows();
        let mut out = Matrix::zeros(rows, self.n_out);
        for r in 0..rows {
            out.row_mut(r).copy_from_slice(&self.b);
        }
        S::gemm(
            rows,
            self.n_in,
            self.n_out,
            S::one(),
            x.as_slice(),
            self.n_in as isize,
            1,
            &self.w,
            1,
            self.n_in as isize,
            S::one(),
            out.as_mut_slice(),
        );
        out
    }

    /// Accumulates parameter gradients for upstream `g` (rows x n_out) and
    /// returns the gradient with respect to the layer input when requested.
    fn backward(&self, x: &Matrix<S>, g: &Matrix<S>, grads: Option<&mut Dense<S>>) -> Matrix<S> {
        let rows = x.rows();
        if let Some(grads) = grads {
            self.param_grads(x, g, grads);
        }
        // dx = g w
        let mut dx = Matrix::zeros(rows, self.n_in);
        S::gemm(
            rows,
            self.n_out,
            self.n_in,
            S::one(),
            g.as_slice(),
            self.n_out as isize,
            1,
            &self.w,
            self.n_in as isize,
            1,
            S::zero(),
            dx.as_mut_slice(),
        );
        dx
    }

    fn param_grads(&self, x: &Matrix<S>, g: &Matrix<S>, grads: &mut Dense<S>) {
        let rows = x.rows();
        // dW = g^T x
        S::gemm(
            self.n_out,
            rows,
            self.n_in,
            S::one(),
            g.as_slice(),
            1,
            self.n_out as isize,
            x.as_slice(),
            self.n_in as isize,
            1,
            S::zero(),
            &mut grads.w,
        );
        grads.b.iter_mut().for_each(|v| *v = S::zero());
        for r in 0..rows {
            for (db, &gv) in grads.b.iter_mut().zip(g.row(r)) {
                *db += gv;
            }
        }
    }

    fn tensors(&self) -> [&[S]; 2] {
        [&self.w, &self.b]
    }

    fn tensors_mut(&mut self) -> [&mut [S]; 2] {
        [&mut self.w, &mut self.b]
    }
}

/// Two hidden ReLU layers followed by a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<S> {
    pub layers: [Dense<S>; 3],
}

/// Gradient of a scalar loss with respect to every entry of an [`MlpParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<S> {
    pub layers: [Dense<S>; 3],
}

/// Activations retained by the forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    input: Matrix<S>,
    z1: Matrix<S>,
    h1: Matrix<S>,
    z2: Matrix<S>,
    h2: Matrix<S>,
}

impl<S: Scalar> ForwardCache<S> {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    pub fn input(&self) -> &Matrix<S> {
        &self.input
    }
}

fn relu<S: Scalar>(z: &Matrix<S>) -> Matrix<S> {
    let mut h = z.clone();
    for v in h.as_mut_slice() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
    h
}

fn relu_mask<S: Scalar>(g: &mut Matrix<S>, z: &Matrix<S>) {
    for (gv, &zv) in g.as_mut_slice().iter_mut().zip(z.as_slice()) {
        if zv <= S::zero() {
            *gv = S::zero();
        }
    }
}

fn shape_of<S>(layers: &[Dense<S>; 3]) -> (usize, usize, usize) {
    (layers[0].n_in, layers[0].n_out, layers[2].n_out)
}

impl<S: Scalar> MlpParams<S> {
    pub fn zeros(n_in: usize, hidden: usize, n_out: usize) -> Result<Self> {
        validate_dims(n_in, hidden, n_out)?;
        Ok(Self {
            layers: [
                Dense::zeros(n_in, hidden),
                Dense::zeros(hidden, hidden),
                Dense::zeros(hidden, n_out),
            ],
        })
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization of weights and biases.
    pub fn init<R: Rng + ?Sized>(n_in: usize, hidden: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        validate_dims(n_in, hidden, n_out)?;
        Ok(Self {
            layers: [
                Dense::uniform(n_in, hidden, rng),
                Dense::uniform(hidden, hidden, rng),
                Dense::uniform(hidden, n_out, rng),
            ],
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].n_out
    }

    pub fn out_dim(&self) -> usize {
        self.layers[2].n_out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Weight and bias slices in layer order: `w1, b1, w2, b2, w3, b3`.
    pub fn tensors(&self) -> impl Iterator<Item = &[S]> {
        self.layers.iter().flat_map(|l| l.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [S]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn same_shape(&self, other_layers: &[Dense<S>; 3]) -> bool {
        self.layers
            .iter()
            .zip(other_layers)
            .all(|(a, b)| a.n_in == b.n_in && a.n_out == b.n_out)
    }

    fn check_input(&self, x: &Matrix<S>) -> Result<()> {
        check_len("mlp input width", self.in_dim(), x.cols())
    }

    /// Batched forward pass keeping the activations for [`MlpParams::backward`].
    pub fn forward_batch(&self, x: &Matrix<S>) -> Result<(Matrix<S>, ForwardCache<S>)> {
        self.check_input(x)?;
        let z1 = self.layers[0].forward(x);
        let h1 = relu(&z1);
        let z2 = self.layers[1].forward(&h1);
        let h2 = relu(&z2);
        let out = self.layers[2].forward(&h2);
        Ok((
            out,
            ForwardCache {
                input: x.clone(),
                z1,
                h1,
                z2,
                h2,
            },
        ))
    }

    /// Batched forward pass without a cache.
    pub fn predict(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        self.check_input(x)?;
        let mut h = self.layers[0].forward(x);
        relu_in_place(&mut h);
        let mut h = self.layers[1].forward(&h);
        relu_in_place(&mut h);
        Ok(self.layers[2].forward(&h))
    }

    pub fn forward(&self, input: &[S]) -> Result<(Vec<S>, ForwardCache<S>)> {
        let (out, cache) = self.forward_batch(&Matrix::row_vector(input))?;
        Ok((out.into_vec(), cache))
    }

    /// Gradients of `sum(upstream . output)` summed over the batch.
    pub fn backward(
        &self,
        cache: &ForwardCache<S>,
        upstream: &Matrix<S>,
    ) -> Result<(MlpGrads<S>, Matrix<S>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let dx = self.backward_impl(cache, upstream, Some(&mut grads))?;
        Ok((grads, dx))
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn input_gradient(&self, cache: &ForwardCache<S>, upstream: &Matrix<S>) -> Result<Matrix<S>> {
        self.backward_impl(cache, upstream, None)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache<S>,
        upstream: &Matrix<S>,
        mut grads: Option<&mut MlpGrads<S>>,
    ) -> Result<Matrix<S>> {
        self.check_input(&cache.input)?;
        check_len("upstream rows", cache.batch_size(), upstream.rows())?;
        check_len("upstream width", self.out_dim(), upstream.cols())?;
        check_len("cache hidden width", self.hidden(), cache.h1.cols())?;
        let inputs = [&cache.input, &cache.h1, &cache.h2];
        let pre = [None, Some(&cache.z1), Some(&cache.z2)];
        let mut g = upstream.clone();
        for l in (0..3).rev() {
            let layer_grads = grads.as_deref_mut().map(|gr| &mut gr.layers[l]);
            let mut dx = self.layers[l].backward(inputs[l], &g, layer_grads);
            if let Some(z) = pre[l] {
                relu_mask(&mut dx, z);
            }
            g = dx;
        }
        Ok(g)
    }

    /// Little-endian snapshot: magic, version, scalar tag, `in/hidden/out` as
    /// u32, then `w1 b1 w2 b2 w3 b3` row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.param_count() * S::BYTES);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.push(SNAPSHOT_VERSION);
        out.push(S::TAG);
        for d in [self.in_dim(), self.hidden(), self.out_dim()] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for t in self.tensors() {
            for &x in t {
                x.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 2 + 12;
        if bytes.len() < HEADER || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Format("not an mlp snapshot".into()));
        }
        if bytes[4] != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {}", bytes[4])));
        }
        if bytes[5] != S::TAG {
            return Err(Error::Format(format!(
                "snapshot scalar width {} does not match {}",
                bytes[5],
                S::TAG
            )));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
        let mut params = Self::zeros(dim(0), dim(1), dim(2))?;
        check_len(
            "snapshot payload bytes",
            params.param_count() * S::BYTES,
            bytes.len() - HEADER,
        )?;
        let mut chunks = bytes[HEADER..].chunks_exact(S::BYTES);
        for t in params.tensors_mut() {
            for x in t.iter_mut() {
                *x = S::read_le(chunks.next().expect("length checked"));
            }
        }
        Ok(params)
    }
}

fn relu_in_place<S: Scalar>(m: &mut Matrix<S>) {
    for v in m.as_mut_slice() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"MLPS";
const SNAPSHOT_VERSION: u8 = 1;

fn validate_dims(n_in: usize, hidden: usize, n_out: usize) -> Result<()> {
    if n_in == 0 || hidden == 0 || n_out == 0 {
        return Err(Error::Parameter(format!(
            "mlp dimensions must be positive, got {n_in}/{hidden}/{n_out}"
        )));
    }
    Ok(())
}

impl<S: Scalar> MlpGrads<S> {
    pub fn zeros_like(params: &MlpParams<S>) -> Self {
        let (i, h, o) = shape_of(&params.layers);
        Self {
            layers: [Dense::zeros(i, h), Dense::zeros(h, h), Dense::zeros(h, o)],
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[S]> {
        self.layers.iter().flat_map(|l| l.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [S]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|x| x.is_zero()))
    }

    /// Adds `other` entry-wise.
    pub fn accumulate(&mut self, other: &MlpGrads<S>) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update<S: Scalar>(target: &mut MlpParams<S>, online: &MlpParams<S>, tau: S) -> Result<()> {
    if !(tau >= S::zero() && tau <= S::one()) {
        return Err(Error::Parameter(format!("tau must lie in [0, 1], got {tau}")));
    }
    if !target.same_shape(&online.layers) {
        return Err(Error::Parameter("soft_update: target and online shapes differ".into()));
    }
    if tau == S::one() {
        *target = online.clone();
        return Ok(());
    }
    for (t, o) in target.tensors_mut().zip(online.tensors()) {
        for (x, &y) in t.iter_mut().zip(o) {
            let (lo, hi) = if *x <= y { (*x, y) } else { (y, *x) };
            // Rounding in `y - x` can push the sum one ulp past the endpoints.
            *x = (*x + tau * (y - *x)).max(lo).min(hi);
        }
    }
    Ok(())
}

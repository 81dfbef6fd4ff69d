//! Dense ReLU networks with hand-written backpropagation and Adam.

use std::fmt::{Debug, Display};

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

/// Floating point element type of the networks.
pub trait Scalar:
    LinalgScalar + Float + FromPrimitive + ToPrimitive + ScalarOperand + Debug + Display + Send + Sync + 'static
{
    /// Tag written into checkpoints.
    const DTYPE: &'static str;
    fn from_f64_lossy(x: f64) -> Self;
    fn to_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
    const BYTES: usize;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
    fn to_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
    fn to_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[inline]
pub(crate) fn c<T: Scalar>(x: f64) -> T {
    T::from_f64_lossy(x)
}

/// Affine layer `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and bias.
    pub fn init<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| c(rng.gen_range(-bound..=bound)));
        let b = Array1::from_shape_fn(fan_out, |_| c(rng.gen_range(-bound..=bound)));
        Self { w, b }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// ReLU multilayer perceptron with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

/// Gradients with the same shapes as the network parameters.
pub type MlpGrads<T> = Vec<Linear<T>>;

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// Input to each layer.
    inputs: Vec<Array2<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("layers").w.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn zero_grads(&self) -> MlpGrads<T> {
        self.layers.iter().map(Linear::zeros_like).collect()
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let last = self.layers.len() - 1;
        let mut h = x.dot(&self.layers[0].w) + &self.layers[0].b;
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            h.mapv_inplace(relu);
            h = h.dot(&layer.w) + &layer.b;
            debug_assert!(i <= last);
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.w) + &layer.b;
            inputs.push(h);
            h = if i + 1 < self.layers.len() { z.mapv(relu) } else { z };
        }
        (h, MlpCache { inputs })
    }

    /// Backpropagates `grad_out` (dL/d output). Parameter gradients are
    /// accumulated into `grads` when given; the input gradient is returned
    /// when `want_input` is set.
    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        grad_out: Array2<T>,
        mut grads: Option<&mut MlpGrads<T>>,
        want_input: bool,
    ) -> Option<Array2<T>> {
        let mut g = grad_out;
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            if let Some(gr) = grads.as_deref_mut() {
                gr[i].w = &gr[i].w + &input.t().dot(&g);
                gr[i].b = &gr[i].b + &g.sum_axis(Axis(0));
            }
            if i == 0 && !want_input {
                return None;
            }
            let mut gi = g.dot(&self.layers[i].w.t());
            if i > 0 {
                // input of layer i is relu(z); relu(z) > 0 iff z > 0
                ndarray::Zip::from(&mut gi).and(input).for_each(|gv, &a| {
                    if a <= T::zero() {
                        *gv = T::zero();
                    }
                });
            }
            g = gi;
        }
        Some(g)
    }

    /// `self <- (1 - tau) * self + tau * other`.
    pub fn polyak_from(&mut self, other: &Mlp<T>, tau: T) {
        let keep = T::one() - tau;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            ndarray::Zip::from(&mut a.w).and(&b.w).for_each(|x, &y| *x = keep * *x + tau * y);
            ndarray::Zip::from(&mut a.b).and(&b.b).for_each(|x, &y| *x = keep * *x + tau * y);
        }
    }

    /// Visits every parameter in layer order, weights row-major then bias.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut T)) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(&mut f);
            l.b.iter_mut().for_each(&mut f);
        }
    }

    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter().copied());
            out.extend(l.b.iter().copied());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|x| x.is_finite()) && l.b.iter().all(|x| x.is_finite()))
    }
}

/// Flattens gradients in the same order as [`Mlp::params`].
pub fn flatten_grads<T: Scalar>(g: &MlpGrads<T>) -> Vec<T> {
    let mut out = Vec::new();
    for l in g {
        out.extend(l.w.iter().copied());
        out.extend(l.b.iter().copied());
    }
    out
}

#[inline]
fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam state for one network.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: i32,
    m: MlpGrads<T>,
    v: MlpGrads<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Mlp<T>, cfg: AdamConfig) -> Self {
        Self { cfg, step: 0, m: net.zero_grads(), v: net.zero_grads() }
    }

    pub fn apply(&mut self, net: &mut Mlp<T>, grads: &MlpGrads<T>) {
        self.step += 1;
        let b1: T = c(self.cfg.beta1);
        let b2: T = c(self.cfg.beta2);
        let one = T::one();
        let bc1 = one - b1.powi(self.step);
        let bc2 = one - b2.powi(self.step);
        let lr: T = c(self.cfg.lr);
        let eps: T = c(self.cfg.eps);
        let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        };
        for (((layer, m), v), g) in net.layers.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grads) {
            ndarray::Zip::from(&mut layer.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Adam on a single scalar (the entropy temperature).
#[derive(Debug, Clone, Copy)]
pub struct ScalarAdam {
    cfg: AdamConfig,
    step: i32,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, step: 0, m: 0.0, v: 0.0 }
    }

    pub fn apply(&mut self, p: &mut f64, g: f64) {
        self.step += 1;
        let c = &self.cfg;
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * g;
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * g * g;
        let mh = self.m / (1.0 - c.beta1.powi(self.step));
        let vh = self.v / (1.0 - c.beta2.powi(self.step));
        *p -= c.lr * mh / (vh.sqrt() + c.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(net: &Mlp<f64>, x: &Array2<f64>) -> f64 {
        net.forward(x.view()).mapv(|v| v * v).sum() * 0.5
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::new(&[3, 5, 4, 2], &mut rng);
        let x = array![[0.3, -0.2, 0.9], [-1.0, 0.4, 0.1]];
        let (y, cache) = net.forward_cached(x.view());
        let mut grads = net.zero_grads();
        let gin = net.backward(&cache, y.clone(), Some(&mut grads), true).unwrap();
        let analytic = flatten_grads(&grads);

        let h = 1e-6;
        let base = net.params();
        for k in 0..base.len() {
            let eval = |delta: f64| {
                let mut n = net.clone();
                let mut i = 0;
                n.for_each_param_mut(|p| {
                    if i == k {
                        *p += delta;
                    }
                    i += 1;
                });
                loss(&n, &x)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - analytic[k]).abs() < 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", analytic[k]);
        }
        for (r, cidx) in [(0usize, 0usize), (1, 2)] {
            let mut xp = x.clone();
            xp[[r, cidx]] += h;
            let mut xm = x.clone();
            xm[[r, cidx]] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert!((fd - gin[[r, cidx]]).abs() < 1e-6);
        }
    }

    #[test]
    fn forward_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::<f32>::new(&[4, 8, 3], &mut rng);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f32 - j as f32) * 0.1);
        assert_eq!(net.forward(x.view()), net.forward_cached(x.view()).0);
    }

    #[test]
    fn polyak_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Mlp::<f64>::new(&[2, 3, 1], &mut rng);
        let b = Mlp::<f64>::new(&[2, 3, 1], &mut rng);
        let mut t = a.clone();
        t.polyak_from(&b, 0.0);
        assert_eq!(t, a);
        t.polyak_from(&b, 1.0);
        assert_eq!(t, b);
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut p = 3.0;
        let mut opt = ScalarAdam::new(AdamConfig::with_lr(0.1));
        for _ in 0..500 {
            let g = 2.0 * p;
            opt.apply(&mut p, g);
        }
        assert!(p.abs() < 1e-2);
    }
}

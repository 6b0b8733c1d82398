//! Plain fully-connected network with ReLU hidden layers and a linear
//! output, written out by hand so backpropagation through the ODE unroll
//! stays transparent and allocation-free in the hot loop.

use crate::Real;
use rand::Rng;

/// Four-lane dot product: independent accumulators break the sequential
/// float dependency so the compiler can keep the 256-wide layers vector.
fn dot4<T: Real>(a: &[T], b: &[T]) -> T {
    let mut c = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        c[0] += x[0] * y[0];
        c[1] += x[1] * y[1];
        c[2] += x[2] * y[2];
        c[3] += x[3] * y[3];
    }
    let mut acc = (c[0] + c[1]) + (c[2] + c[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        acc += *x * *y;
    }
    acc
}

/// Weights are row-major `out x in` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    sizes: Vec<usize>,
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> MlpParams<T> {
    /// Kaiming-uniform weights (`U(+-sqrt(6/fan_in))`), biases
    /// `U(+-1/sqrt(fan_in))`. Draw order is layer by layer, weights first
    /// (row-major), then biases; reproducibility depends on it.
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least one layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let wb = (6.0 / fan_in as f64).sqrt();
            let bb = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| T::of(rng.random_range(-wb..wb)))
                    .collect(),
            );
            biases.push((0..fan_out).map(|_| T::of(rng.random_range(-bb..bb))).collect());
        }
        MlpParams { sizes: sizes.to_vec(), weights, biases }
    }

    /// Builds from explicit values; shapes are checked.
    pub fn from_parts(sizes: Vec<usize>, weights: Vec<Vec<T>>, biases: Vec<Vec<T>>) -> Self {
        assert_eq!(weights.len(), sizes.len() - 1);
        assert_eq!(biases.len(), sizes.len() - 1);
        for l in 0..weights.len() {
            assert_eq!(weights[l].len(), sizes[l] * sizes[l + 1], "layer {l} weight shape");
            assert_eq!(biases[l].len(), sizes[l + 1], "layer {l} bias shape");
        }
        MlpParams { sizes, weights, biases }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Activation names per layer, as stored in checkpoints.
    pub fn activations(&self) -> Vec<&'static str> {
        let mut a = vec!["relu"; self.layer_count() - 1];
        a.push("linear");
        a
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, &mut cache);
        cache.preacts.last().unwrap().clone()
    }

    /// Forward pass that keeps layer inputs and pre-activations for `vjp`.
    /// The cache buffers are reused across calls.
    pub fn forward_cached(&self, x: &[T], cache: &mut MlpCache<T>) {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let layers = self.layer_count();
        cache.inputs.resize(layers, Vec::new());
        cache.preacts.resize(layers, Vec::new());
        cache.inputs[0].clear();
        cache.inputs[0].extend_from_slice(x);
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l > 0 {
                // Input of layer l = ReLU of previous pre-activation.
                let (prev, cur) = cache.split_input(l);
                cur.clear();
                cur.extend(prev.iter().map(|z| z.max(T::zero())));
            }
            let w = &self.weights[l];
            let b = &self.biases[l];
            let z = &mut cache.preacts[l];
            z.clear();
            z.reserve(n_out);
            let xin = &cache.inputs[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                z.push(b[o] + dot4(row, xin));
            }
        }
    }

    /// Output of the latest [`forward_cached`] call on `cache`.
    pub fn output<'c>(&self, cache: &'c MlpCache<T>) -> &'c [T] {
        cache.preacts.last().unwrap()
    }

    /// Backward pass: accumulates parameter gradients into `grads` and
    /// writes the input gradient into `dx`.
    pub fn vjp(&self, cache: &MlpCache<T>, upstream: &[T], grads: &mut MlpGrads<T>, dx: &mut Vec<T>) {
        let layers = self.layer_count();
        let mut g: Vec<T> = upstream.to_vec();
        for l in (0..layers).rev() {
            let n_in = self.sizes[l];
            if l < layers - 1 {
                // Through the ReLU that fed layer l+1.
                for (gi, z) in g.iter_mut().zip(&cache.preacts[l]) {
                    if *z <= T::zero() {
                        *gi = T::zero();
                    }
                }
            }
            let xin = &cache.inputs[l];
            let dw = &mut grads.weights[l];
            for (o, row) in dw.chunks_exact_mut(n_in).enumerate() {
                let go = g[o];
                grads.biases[l][o] += go;
                for (r, x) in row.iter_mut().zip(xin) {
                    *r += go * *x;
                }
            }
            dx.clear();
            dx.resize(n_in, T::zero());
            let w = &self.weights[l];
            for (o, row) in w.chunks_exact(n_in).enumerate() {
                let go = g[o];
                for (d, wv) in dx.iter_mut().zip(row) {
                    *d += go * *wv;
                }
            }
            std::mem::swap(&mut g, dx);
        }
        // After the last swap the input gradient sits in g.
        std::mem::swap(&mut g, dx);
    }
}

/// Scratch space for one forward/backward pair.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    inputs: Vec<Vec<T>>,
    preacts: Vec<Vec<T>>,
}

impl<T> Default for MlpCache<T> {
    fn default() -> Self {
        MlpCache { inputs: Vec::new(), preacts: Vec::new() }
    }
}

impl<T: Real> MlpCache<T> {
    /// Borrow preact of layer `l-1` and input of layer `l` simultaneously.
    fn split_input(&mut self, l: usize) -> (&[T], &mut Vec<T>) {
        let (pre, inp) = (&self.preacts[l - 1], &mut self.inputs[l]);
        (pre.as_slice(), inp)
    }

    /// Smallest pre-activation magnitude seen in the hidden layers; used by
    /// gradient checks to stay away from ReLU kinks.
    pub fn min_hidden_preact_abs(&self, layers: usize) -> T {
        let mut m = T::infinity();
        for z in self.preacts.iter().take(layers - 1) {
            for v in z {
                m = m.min(v.abs());
            }
        }
        m
    }
}

/// Gradient (or first/second-moment) buffers shaped like [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpGrads<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> MlpGrads<T> {
    pub fn zeros_like(p: &MlpParams<T>) -> Self {
        MlpGrads {
            weights: p.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: p.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x = T::zero());
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn add_from(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }
}

/// Adam with bias correction; `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: MlpGrads<T>,
    v: MlpGrads<T>,
    t: u32,
    pub lr: T,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &MlpParams<T>, lr: T) -> Self {
        Adam { m: MlpGrads::zeros_like(params), v: MlpGrads::zeros_like(params), t: 0, lr }
    }

    pub fn step(&mut self, params: &mut MlpParams<T>, grads: &MlpGrads<T>) {
        let (b1, b2, eps) = (T::of(0.9), T::of(0.999), T::of(1e-8));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t as i32);
        let c2 = T::one() - b2.powi(self.t as i32);
        let lr = self.lr;
        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for (((p, g), m), v) in p.iter_mut().zip(g).zip(m).zip(v) {
                *m = b1 * *m + (T::one() - b1) * *g;
                *v = b2 * *v + (T::one() - b2) * *g * *g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p = *p - lr * mh / (vh.sqrt() + eps);
            }
        };
        for l in 0..params.weights.len() {
            update(&mut params.weights[l], &grads.weights[l], &mut self.m.weights[l], &mut self.v.weights[l]);
            update(&mut params.biases[l], &grads.biases[l], &mut self.m.biases[l], &mut self.v.biases[l]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_manual_single_layer() {
        // y = W x + b with W = [[1,2],[3,4]], b = [0.5, -0.5]
        let p = MlpParams::from_parts(
            vec![2, 2],
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            vec![vec![0.5, -0.5]],
        );
        let y = p.forward(&[1.0, 1.0]);
        assert_eq!(y, vec![3.5, 6.5]);
    }

    #[test]
    fn hidden_relu_clips_negatives() {
        // First layer maps x to (x, -x); ReLU kills one branch; second layer sums.
        let p = MlpParams::from_parts(
            vec![1, 2, 1],
            vec![vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![vec![0.0, 0.0], vec![0.0]],
        );
        assert_eq!(p.forward(&[2.0]), vec![2.0]);
        assert_eq!(p.forward(&[-3.0]), vec![3.0]);
    }

    #[test]
    fn init_is_seeded_and_in_bounds() {
        let sizes = [10, 16, 10];
        let a = MlpParams::<f64>::init(&sizes, &mut ChaCha8Rng::seed_from_u64(5));
        let b = MlpParams::<f64>::init(&sizes, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let bound0 = (6.0 / 10.0_f64).sqrt();
        for w in &a.weights[0] {
            assert!(w.abs() <= bound0);
        }
        assert_eq!(a.param_count(), 10 * 16 + 16 + 16 * 10 + 10);
        assert_eq!(a.activations(), vec!["relu", "linear"]);
    }

    /// Oracle: central finite differences on a small network.
    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let sizes = [3, 5, 2];
        let mut p = MlpParams::<f64>::init(&sizes, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let upstream = [1.0, -2.0];
        // Scalar objective: upstream . f(x)
        let eval = |p: &MlpParams<f64>| -> f64 {
            p.forward(&x).iter().zip(&upstream).map(|(a, b)| a * b).sum()
        };
        let mut cache = MlpCache::default();
        p.forward_cached(&x, &mut cache);
        let mut grads = MlpGrads::zeros_like(&p);
        let mut dx = Vec::new();
        p.vjp(&cache, &upstream, &mut grads, &mut dx);
        let h = 1e-6;
        for l in 0..p.layer_count() {
            for k in 0..p.weights[l].len() {
                let orig = p.weights[l][k];
                p.weights[l][k] = orig + h;
                let up = eval(&p);
                p.weights[l][k] = orig - h;
                let dn = eval(&p);
                p.weights[l][k] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - grads.weights[l][k]).abs() < 1e-6, "w[{l}][{k}]");
            }
            for k in 0..p.biases[l].len() {
                let orig = p.biases[l][k];
                p.biases[l][k] = orig + h;
                let up = eval(&p);
                p.biases[l][k] = orig - h;
                let dn = eval(&p);
                p.biases[l][k] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - grads.biases[l][k]).abs() < 1e-6, "b[{l}][{k}]");
            }
        }
        // Input gradient too.
        for k in 0..3 {
            let mut xp = x;
            xp[k] += h;
            let up: f64 = p.forward(&xp).iter().zip(&upstream).map(|(a, b)| a * b).sum();
            xp[k] -= 2.0 * h;
            let dn: f64 = p.forward(&xp).iter().zip(&upstream).map(|(a, b)| a * b).sum();
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - dx[k]).abs() < 1e-6, "dx[{k}]");
        }
    }

    #[test]
    fn adam_minimizes_a_simple_quadratic() {
        // Fit a 1-layer net to the zero function on fixed inputs; loss must drop.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = MlpParams::<f64>::init(&[2, 1], &mut rng);
        let mut adam = Adam::new(&p, 0.05);
        let xs = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let loss = |p: &MlpParams<f64>| -> f64 {
            xs.iter().map(|x| p.forward(x)[0].powi(2)).sum::<f64>() / 2.0
        };
        let l0 = loss(&p);
        let mut cache = MlpCache::default();
        let mut dx = Vec::new();
        for _ in 0..500 {
            let mut g = MlpGrads::zeros_like(&p);
            for x in &xs {
                p.forward_cached(x, &mut cache);
                let y = p.output(&cache)[0];
                p.vjp(&cache, &[y], &mut g, &mut dx);
            }
            adam.step(&mut p, &g);
        }
        assert!(loss(&p) < l0 * 1e-4, "loss {} -> {}", l0, loss(&p));
    }
}

use nalgebra::DMatrix;
use rand::Rng;

use super::mlp::{Activation, Mlp, MlpGrads};

/// Probabilities are clamped to `[D_EPS, 1 − D_EPS]` before taking logs.
pub const D_EPS: f64 = 1e-7;

/// Backward pass of the gradient reversal layer. The forward pass is the
/// identity and is therefore omitted.
pub fn grl_backward(upstream: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    upstream * -lambda
}

/// Domain classification loss `−mean log D(z_s) − mean log(1 − D(z_t))`
/// with the source domain as the positive class. Returns the loss and its
/// gradients with respect to each output; clamped outputs get zero gradient.
pub fn da_loss(d_source: &[f64], d_target: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (ns, nt) = (d_source.len() as f64, d_target.len() as f64);
    let clamp = |d: f64| d.clamp(D_EPS, 1.0 - D_EPS);
    let inside = |d: f64| d > D_EPS && d < 1.0 - D_EPS;
    let loss_s: f64 = d_source.iter().map(|&d| -clamp(d).ln()).sum::<f64>() / ns;
    let loss_t: f64 = d_target.iter().map(|&d| -(1.0 - clamp(d)).ln()).sum::<f64>() / nt;
    let grad_s = d_source
        .iter()
        .map(|&d| if inside(d) { -1.0 / (ns * d) } else { 0.0 })
        .collect();
    let grad_t = d_target
        .iter()
        .map(|&d| if inside(d) { 1.0 / (nt * (1.0 - d)) } else { 0.0 })
        .collect();
    (loss_s + loss_t, grad_s, grad_t)
}

/// Gradients for every parameter group of a [`DaNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct DaGrads {
    pub encoder: MlpGrads,
    pub discriminator: MlpGrads,
    pub head: MlpGrads,
}

impl DaGrads {
    pub fn zeros_like(net: &DaNetwork) -> Self {
        Self {
            encoder: MlpGrads::zeros_like(&net.encoder),
            discriminator: MlpGrads::zeros_like(&net.discriminator),
            head: MlpGrads::zeros_like(&net.head),
        }
    }

    fn add_scaled(&mut self, other: &DaGrads, s: f64) {
        self.encoder.add_scaled(&other.encoder, s);
        self.discriminator.add_scaled(&other.discriminator, s);
        self.head.add_scaled(&other.head, s);
    }
}

/// `λ1·task + λ2·da` for both the scalar and every gradient buffer.
pub fn total_loss(task: (f64, &DaGrads), da: (f64, &DaGrads), lambda1: f64, lambda2: f64) -> (f64, DaGrads) {
    let mut g = task.1.clone();
    g.encoder.scale(lambda1);
    g.discriminator.scale(lambda1);
    g.head.scale(lambda1);
    g.add_scaled(da.1, lambda2);
    (lambda1 * task.0 + lambda2 * da.0, g)
}

/// Plain SGD with L2 weight decay. The discriminator has its own step scale
/// and decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdSettings {
    pub learning_rate: f64,
    pub disc_lr_scale: f64,
    /// Applied to encoder and head weights.
    pub weight_decay: f64,
    pub disc_weight_decay: f64,
}

impl Default for SgdSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            disc_lr_scale: 1.0,
            weight_decay: 0.0,
            disc_weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub task: f64,
    pub da: f64,
    pub total: f64,
}

/// Encoder with a content-regression head and a domain discriminator
/// attached through a gradient reversal layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DaNetwork {
    pub encoder: Mlp,
    pub discriminator: Mlp,
    pub head: Mlp,
    pub lambda_grl: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl DaNetwork {
    /// `encoder_sizes` runs from the input width to the latent width;
    /// `disc_hidden` is the discriminator's hidden width; the head is linear
    /// from latent to `task_dim`.
    pub fn new<R: Rng + ?Sized>(encoder_sizes: &[usize], disc_hidden: usize, task_dim: usize, rng: &mut R) -> Self {
        let latent = *encoder_sizes.last().expect("encoder sizes");
        Self {
            encoder: Mlp::new(encoder_sizes, Activation::Tanh, Activation::Tanh, rng),
            discriminator: Mlp::new(&[latent, disc_hidden, 1], Activation::Tanh, Activation::Sigmoid, rng),
            head: Mlp::new(&[latent, task_dim], Activation::Identity, Activation::Identity, rng),
            lambda_grl: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }

    pub fn features(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.encoder.predict(x)
    }

    /// `D(E(x))` per row.
    pub fn discriminate(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.discriminator.predict(&self.features(x)).iter().copied().collect()
    }

    /// Mean squared content-regression error on `x` (averaged over rows and
    /// output dimensions) and its gradients.
    pub fn task_branch(&self, x: &DMatrix<f64>, target: &DMatrix<f64>) -> (f64, DaGrads) {
        let enc = self.encoder.forward(x);
        let head = self.head.forward(enc.output());
        let diff = head.output() - target;
        let count = diff.len() as f64;
        let loss = diff.norm_squared() / count;
        let (head_grads, dz) = self.head.backward(&head, &(diff * (2.0 / count)));
        let (enc_grads, _) = self.encoder.backward(&enc, &dz);
        let mut g = DaGrads::zeros_like(self);
        g.encoder = enc_grads;
        g.head = head_grads;
        (loss, g)
    }

    /// Domain loss and gradients. Encoder gradients pass through the
    /// reversal layer and so point away from discriminability.
    pub fn da_branch(&self, source: &DMatrix<f64>, target: &DMatrix<f64>) -> (f64, DaGrads) {
        let (ns, nt) = (source.nrows(), target.nrows());
        let mut x = DMatrix::zeros(ns + nt, source.ncols());
        x.rows_mut(0, ns).copy_from(source);
        x.rows_mut(ns, nt).copy_from(target);
        let enc = self.encoder.forward(&x);
        let disc = self.discriminator.forward(enc.output());
        let d: Vec<f64> = disc.output().iter().copied().collect();
        let (loss, gs, gt) = da_loss(&d[..ns], &d[ns..]);
        let upstream = DMatrix::from_iterator(ns + nt, 1, gs.into_iter().chain(gt));
        let (disc_grads, dz) = self.discriminator.backward(&disc, &upstream);
        let (enc_grads, _) = self.encoder.backward(&enc, &grl_backward(&dz, self.lambda_grl));
        let mut g = DaGrads::zeros_like(self);
        g.encoder = enc_grads;
        g.discriminator = disc_grads;
        (loss, g)
    }

    /// Combined objective on a source batch with content labels and an
    /// unlabeled target batch.
    pub fn loss_and_grads(
        &self,
        source: &DMatrix<f64>,
        content: &DMatrix<f64>,
        target: &DMatrix<f64>,
    ) -> (LossParts, DaGrads) {
        let (task, tg) = self.task_branch(source, content);
        let (da, dg) = self.da_branch(source, target);
        let (total, g) = total_loss((task, &tg), (da, &dg), self.lambda1, self.lambda2);
        (LossParts { task, da, total }, g)
    }

    /// One joint SGD update of encoder, head and discriminator.
    pub fn sgd_step(&mut self, grads: &DaGrads, sgd: &SgdSettings) {
        let lr = sgd.learning_rate;
        self.encoder.sgd_step(&grads.encoder, lr, sgd.weight_decay);
        self.discriminator
            .sgd_step(&grads.discriminator, lr * sgd.disc_lr_scale, sgd.disc_weight_decay);
        self.head.sgd_step(&grads.head, lr, sgd.weight_decay);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grl_scales_and_flips() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(grl_backward(&g, 0.0), DMatrix::zeros(2, 2));
        assert_eq!(grl_backward(&g, 1.0), -g.clone());
        assert_eq!(grl_backward(&g, 0.25), g * -0.25);
    }

    #[test]
    fn uninformative_discriminator_loss() {
        let (l, _, _) = da_loss(&[0.5; 7], &[0.5; 3]);
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-15);
        let (l, gs, gt) = da_loss(&[1.0 - 1e-7; 4], &[1e-7; 4]);
        assert!(l >= 0.0 && l < 1e-6);
        assert!(gs.iter().chain(&gt).all(|g| *g == 0.0));
        let (l, _, _) = da_loss(&[0.0], &[1.0]);
        assert!(l.is_finite() && l > 0.0);
    }

    #[test]
    fn da_loss_gradient_matches_finite_difference() {
        let ds = [0.3, 0.8, 0.55];
        let dt = [0.1, 0.6];
        let (_, gs, gt) = da_loss(&ds, &dt);
        let h = 1e-6;
        for i in 0..3 {
            let (mut up, mut dn) = (ds, ds);
            up[i] += h;
            dn[i] -= h;
            let fd = (da_loss(&up, &dt).0 - da_loss(&dn, &dt).0) / (2.0 * h);
            assert!((fd - gs[i]).abs() < 1e-6);
        }
        for i in 0..2 {
            let (mut up, mut dn) = (dt, dt);
            up[i] += h;
            dn[i] -= h;
            let fd = (da_loss(&ds, &up).0 - da_loss(&ds, &dn).0) / (2.0 * h);
            assert!((fd - gt[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn total_loss_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DaNetwork::new(&[4, 6, 3], 5, 2, &mut rng);
        let xs = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let xt = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let (lt, gt) = net.task_branch(&xs, &c);
        let (ld, gd) = net.da_branch(&xs, &xt);
        assert_eq!(total_loss((lt, &gt), (ld, &gd), 1.0, 0.0), (lt, gt.clone()));
        assert_eq!(total_loss((lt, &gt), (ld, &gd), 0.0, 1.0), (ld, gd.clone()));
        let (l, g) = total_loss((lt, &gt), (ld, &gd), 0.5, 0.5);
        assert_eq!(l, 0.5 * lt + 0.5 * ld);
        for k in 0..g.encoder.len() {
            assert!((g.encoder.get(k) - 0.5 * (gt.encoder.get(k) + gd.encoder.get(k))).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_is_unaffected_by_reversal_strength() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = DaNetwork::new(&[4, 6, 3], 5, 2, &mut rng);
        let x = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let a = net.discriminate(&x);
        net.lambda_grl = 3.0;
        assert_eq!(a, net.discriminate(&x));
    }

    fn batch(seed: u64) -> (DaNetwork, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DaNetwork::new(&[6, 8, 4], 5, 2, &mut rng);
        let xs = DMatrix::from_fn(5, 6, |_, _| rng.random_range(-1.0..1.0));
        let xt = DMatrix::from_fn(5, 6, |_, _| rng.random_range(-1.0..1.0) + 0.3);
        let c = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        (net, xs, xt, c)
    }

    fn check(an: f64, fd: f64) {
        assert!(
            (an - fd).abs() <= 1e-3 * fd.abs().max(1e-4),
            "analytic {an} vs numeric {fd}"
        );
    }

    #[test]
    fn reversed_encoder_gradient_is_negated_finite_difference() {
        let (mut net, xs, xt, _) = batch(1);
        let (_, g) = net.da_branch(&xs, &xt);
        let h = 1e-5;
        for k in 0..net.encoder.parameter_count() {
            let orig = *net.encoder.parameter_mut(k);
            *net.encoder.parameter_mut(k) = orig + h;
            let up = net.da_branch(&xs, &xt).0;
            *net.encoder.parameter_mut(k) = orig - h;
            let dn = net.da_branch(&xs, &xt).0;
            *net.encoder.parameter_mut(k) = orig;
            check(-g.encoder.get(k), (up - dn) / (2.0 * h));
        }
        for k in 0..net.discriminator.parameter_count() {
            let orig = *net.discriminator.parameter_mut(k);
            *net.discriminator.parameter_mut(k) = orig + h;
            let up = net.da_branch(&xs, &xt).0;
            *net.discriminator.parameter_mut(k) = orig - h;
            let dn = net.da_branch(&xs, &xt).0;
            *net.discriminator.parameter_mut(k) = orig;
            check(g.discriminator.get(k), (up - dn) / (2.0 * h));
        }
    }

    #[test]
    fn reversed_step_raises_domain_loss() {
        let (mut net, xs, xt, _) = batch(2);
        let before = net.da_branch(&xs, &xt).0;
        let (_, g) = net.da_branch(&xs, &xt);
        net.encoder.sgd_step(&g.encoder, 1e-3, 0.0);
        assert!(net.da_branch(&xs, &xt).0 > before);
    }
}

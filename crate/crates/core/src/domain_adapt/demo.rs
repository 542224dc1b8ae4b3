use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::metrics::{gsi, probe_accuracy};
use super::network::{DaNetwork, SgdSettings};
use super::DaError;
use crate::rng::stream;

/// Two domains sharing content variables but differing in a style
/// component: `x = A·c + B·s + σ·ε` with `s ~ N(±shift, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetParams {
    pub input_dim: usize,
    pub content_dim: usize,
    pub style_dim: usize,
    pub style_shift: f64,
    pub noise: f64,
    pub train_per_domain: usize,
    pub holdout_per_domain: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            input_dim: 128,
            content_dim: 4,
            style_dim: 2,
            style_shift: 1.5,
            noise: 2.0,
            train_per_domain: 1000,
            holdout_per_domain: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    pub x: DMatrix<f64>,
    pub content: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoDomainDataset {
    pub source_train: DomainData,
    pub target_train: DomainData,
    pub source_test: DomainData,
    pub target_test: DomainData,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate_dataset<R: Rng + ?Sized>(p: &DatasetParams, rng: &mut R) -> TwoDomainDataset {
    let a = DMatrix::from_fn(p.input_dim, p.content_dim, |_, _| {
        gaussian(rng) / (p.content_dim as f64).sqrt()
    });
    let b = DMatrix::from_fn(p.input_dim, p.style_dim, |_, _| {
        gaussian(rng) / (p.style_dim as f64).sqrt()
    });
    let domain = |n: usize, shift: f64, rng: &mut R| {
        let content = DMatrix::from_fn(n, p.content_dim, |_, _| gaussian(rng));
        let style = DMatrix::from_fn(n, p.style_dim, |_, _| shift + gaussian(rng));
        let noise = DMatrix::from_fn(n, p.input_dim, |_, _| p.noise * gaussian(rng));
        let x = &content * a.transpose() + &style * b.transpose() + noise;
        DomainData { x, content }
    };
    TwoDomainDataset {
        source_train: domain(p.train_per_domain, p.style_shift, rng),
        target_train: domain(p.train_per_domain, -p.style_shift, rng),
        source_test: domain(p.holdout_per_domain, p.style_shift, rng),
        target_test: domain(p.holdout_per_domain, -p.style_shift, rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaConfig {
    /// Encoder widths after the input layer; the last is the latent width.
    pub encoder: Vec<usize>,
    pub disc_hidden: usize,
    pub lambda_grl: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sgd: SgdSettings,
    pub batch_size: usize,
    pub epochs: usize,
    pub probe_train_fraction: f64,
    pub data: DatasetParams,
}

impl Default for DaConfig {
    fn default() -> Self {
        Self {
            encoder: vec![256, 64],
            disc_hidden: 32,
            lambda_grl: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            sgd: SgdSettings {
                learning_rate: 0.02,
                disc_lr_scale: 5.0,
                weight_decay: 0.01,
                disc_weight_decay: 0.15,
            },
            batch_size: 64,
            epochs: 30,
            probe_train_fraction: 0.5,
            data: DatasetParams::default(),
        }
    }
}

/// Held-out metrics after an epoch; epoch 0 is the untrained network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub da_loss: f64,
    pub disc_acc: f64,
    pub gsi: f64,
    pub probe_acc: f64,
    pub task_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DaReport {
    pub epochs: Vec<EpochMetrics>,
}

impl DaReport {
    pub fn last(&self) -> &EpochMetrics {
        self.epochs.last().expect("report holds the baseline row")
    }

    pub fn first(&self) -> &EpochMetrics {
        &self.epochs[0]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,L_DA,disc_acc,gsi,probe_acc,task_loss\n");
        for m in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                m.epoch, m.da_loss, m.disc_acc, m.gsi, m.probe_acc, m.task_loss
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(a);
    m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    m
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

/// Source rows labelled 1, target rows labelled 0.
pub fn domain_labels(n_source: usize, n_target: usize) -> Vec<usize> {
    std::iter::repeat_n(1, n_source)
        .chain(std::iter::repeat_n(0, n_target))
        .collect()
}

/// GSI and probe accuracy of labelled features.
pub fn score_features(
    features: &DMatrix<f64>,
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(f64, f64), DaError> {
    Ok((
        gsi(features, labels)?,
        probe_accuracy(features, labels, train_fraction, seed)?,
    ))
}

fn evaluate(
    net: &DaNetwork,
    data: &TwoDomainDataset,
    epoch: usize,
    cfg: &DaConfig,
    seed: u64,
) -> Result<EpochMetrics, DaError> {
    let (src, tgt) = (&data.source_test, &data.target_test);
    let (task_loss, _) = net.task_branch(&src.x, &src.content);
    let (da_loss, _) = net.da_branch(&src.x, &tgt.x);
    let ds = net.discriminate(&src.x);
    let dt = net.discriminate(&tgt.x);
    let correct = ds.iter().filter(|&&d| d >= 0.5).count() + dt.iter().filter(|&&d| d < 0.5).count();
    let features = net.features(&stack(&src.x, &tgt.x));
    let labels = domain_labels(src.x.nrows(), tgt.x.nrows());
    let (g, probe) = score_features(&features, &labels, cfg.probe_train_fraction, seed)?;
    Ok(EpochMetrics {
        epoch,
        da_loss,
        disc_acc: correct as f64 / (ds.len() + dt.len()) as f64,
        gsi: g,
        probe_acc: probe,
        task_loss,
    })
}

/// Trains encoder, head and discriminator jointly on a synthetic
/// two-domain dataset and records held-out metrics after every epoch.
pub fn train_da_demo(cfg: &DaConfig, seed: u64) -> Result<DaReport, DaError> {
    train_da(cfg, seed).map(|t| t.report)
}

/// Result of [`train_da`]: the report plus the trained network and the data
/// it was trained and evaluated on.
#[derive(Debug, Clone)]
pub struct TrainedDa {
    pub report: DaReport,
    pub network: DaNetwork,
    pub data: TwoDomainDataset,
}

pub fn train_da(cfg: &DaConfig, seed: u64) -> Result<TrainedDa, DaError> {
    if cfg.batch_size == 0 || cfg.encoder.is_empty() {
        return Err(DaError::Argument(
            "batch size and encoder widths must be non-empty".into(),
        ));
    }
    if !(cfg.lambda_grl >= 0.0) {
        return Err(DaError::Argument(format!(
            "lambda must be non-negative, got {}",
            cfg.lambda_grl
        )));
    }
    let data = generate_dataset(&cfg.data, &mut stream(seed, "da", 0));
    let mut sizes = vec![cfg.data.input_dim];
    sizes.extend(&cfg.encoder);
    let mut net = DaNetwork::new(
        &sizes,
        cfg.disc_hidden,
        cfg.data.content_dim,
        &mut stream(seed, "da", 1),
    );
    net.lambda_grl = cfg.lambda_grl;
    net.lambda1 = cfg.lambda1;
    net.lambda2 = cfg.lambda2;
    let mut shuffle = stream(seed, "da", 2);

    let mut report = DaReport::default();
    report.epochs.push(evaluate(&net, &data, 0, cfg, seed)?);
    let n_src = data.source_train.x.nrows();
    let n_tgt = data.target_train.x.nrows();
    let mut src_idx: Vec<usize> = (0..n_src).collect();
    let mut tgt_idx: Vec<usize> = (0..n_tgt).collect();
    for epoch in 1..=cfg.epochs {
        src_idx.shuffle(&mut shuffle);
        tgt_idx.shuffle(&mut shuffle);
        for (s, t) in src_idx.chunks(cfg.batch_size).zip(tgt_idx.chunks(cfg.batch_size)) {
            let xs = rows(&data.source_train.x, s);
            let cs = rows(&data.source_train.content, s);
            let xt = rows(&data.target_train.x, t);
            let (loss, grads) = net.loss_and_grads(&xs, &cs, &xt);
            if !loss.total.is_finite() {
                return Err(DaError::Diverged { epoch, report });
            }
            net.sgd_step(&grads, &cfg.sgd);
        }
        let m = evaluate(&net, &data, epoch, cfg, seed)?;
        if !(m.da_loss.is_finite() && m.task_loss.is_finite()) {
            return Err(DaError::Diverged { epoch, report });
        }
        report.epochs.push(m);
    }
    Ok(TrainedDa {
        report,
        network: net,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DaConfig {
        DaConfig {
            encoder: vec![16, 8],
            disc_hidden: 8,
            epochs: 2,
            data: DatasetParams {
                input_dim: 12,
                train_per_domain: 64,
                holdout_per_domain: 40,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn dataset_shapes_and_style_sign() {
        let p = DatasetParams {
            noise: 0.0,
            ..Default::default()
        };
        let d = generate_dataset(&p, &mut stream(3, "t", 0));
        assert_eq!(d.source_train.x.shape(), (p.train_per_domain, p.input_dim));
        assert_eq!(d.target_test.content.shape(), (p.holdout_per_domain, p.content_dim));
        // Domain means differ along the style directions only.
        let mean = |m: &DMatrix<f64>| m.row_mean();
        let gap = (mean(&d.source_train.x) - mean(&d.target_train.x)).norm();
        let within = (mean(&d.source_train.x) - mean(&d.source_test.x)).norm();
        assert!(gap > 5.0 * within, "gap {gap} within {within}");
    }

    #[test]
    fn report_rows_and_csv() {
        let r = train_da_demo(&small(), 1).unwrap();
        assert_eq!(r.epochs.len(), 3);
        assert_eq!(r.first().epoch, 0);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,L_DA,disc_acc,gsi,probe_acc,task_loss");
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 6));
    }

    #[test]
    fn training_is_deterministic() {
        let a = train_da_demo(&small(), 9).unwrap();
        let b = train_da_demo(&small(), 9).unwrap();
        assert_eq!(a, b);
        let c = train_da_demo(&small(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_arguments_rejected() {
        let mut cfg = small();
        cfg.batch_size = 0;
        assert!(matches!(train_da_demo(&cfg, 0), Err(DaError::Argument(_))));
        let mut cfg = small();
        cfg.lambda_grl = f64::NAN;
        assert!(matches!(train_da_demo(&cfg, 0), Err(DaError::Argument(_))));
    }

    #[test]
    fn divergence_returns_partial_report() {
        let mut cfg = small();
        cfg.sgd.learning_rate = 1e200;
        match train_da_demo(&cfg, 0) {
            Err(DaError::Diverged { epoch, report }) => {
                assert!(epoch >= 1);
                assert_eq!(report.epochs.len(), epoch);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}

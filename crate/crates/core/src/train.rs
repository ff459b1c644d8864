//! Regularized log-loss minimization with analytic gradients.
//!
//! Embedding rows and per-feature weights are updated lazily: a minibatch
//! touches (and regularizes) only the rows of the features it contains.
//! Dense blocks (bias, field-shared weights, matrices) are updated every step.

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::{auc, logloss};
use crate::bin_io::*;
use crate::error::{format_err, Error, Result};
use crate::ingest::{Dataset, DatasetSplit};
use crate::model::{sigmoid, Architecture, FmModel, LinearMode, MatrixKind, Params};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Adagrad { eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn adagrad() -> Self {
        OptimizerKind::Adagrad { eps: 1e-8 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
            OptimizerKind::Adagrad { .. } => "adagrad",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Standard deviation of the initial embedding entries.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            l2: 0.0,
            epochs: 10,
            batch_size: 1024,
            optimizer: OptimizerKind::adam(),
            init_scale: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be a finite non-negative number");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be a finite non-negative number");
        }
        match self.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                    return bad("adam needs 0 <= beta < 1 and eps > 0");
                }
            }
            OptimizerKind::Adagrad { eps } if eps <= 0.0 => return bad("adagrad needs eps > 0"),
            _ => {}
        }
        Ok(())
    }

    /// Flat `key=value` lines; `#` starts a comment. Unlisted keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let (mut beta1, mut beta2, mut eps) = (0.9, 0.999, 1e-8);
        let mut optimizer = "adam".to_owned();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || -> Result<f64> {
                value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{key}: bad number {value:?}")))
            };
            let int = || -> Result<u64> {
                value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{key}: bad integer {value:?}")))
            };
            match key {
                "learning_rate" => cfg.learning_rate = num()?,
                "l2" => cfg.l2 = num()?,
                "epochs" => cfg.epochs = int()? as usize,
                "batch_size" => cfg.batch_size = int()? as usize,
                "init_scale" => cfg.init_scale = num()?,
                "seed" => cfg.seed = int()?,
                "optimizer" => optimizer = value.to_owned(),
                "beta1" => beta1 = num()?,
                "beta2" => beta2 = num()?,
                "eps" => eps = num()?,
                _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
            }
        }
        cfg.optimizer = match optimizer.as_str() {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam { beta1, beta2, eps },
            "adagrad" => OptimizerKind::Adagrad { eps },
            other => return Err(Error::InvalidConfig(format!("unknown optimizer {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "learning_rate={}\nl2={}\nepochs={}\nbatch_size={}\ninit_scale={}\nseed={}\noptimizer={}\n",
            self.learning_rate,
            self.l2,
            self.epochs,
            self.batch_size,
            self.init_scale,
            self.seed,
            self.optimizer.name()
        );
        match self.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                s += &format!("beta1={beta1}\nbeta2={beta2}\neps={eps}\n");
            }
            OptimizerKind::Adagrad { eps } => s += &format!("eps={eps}\n"),
            OptimizerKind::Sgd => {}
        }
        s
    }
}

/// Gaussian embeddings with standard deviation `config.init_scale`; Full
/// matrices start as identity-padded rectangles, Scalar at 1, Diagonal at 1;
/// linear terms and bias at 0.
pub fn init_model(arch: Architecture, schema_hash: u64, config: &TrainConfig) -> Result<FmModel> {
    config.validate()?;
    let mut model = FmModel::zeros(arch, schema_hash);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if config.init_scale > 0.0 {
        let normal = Normal::new(0.0, config.init_scale).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for table in &mut model.params.embeddings {
            table.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
        }
    }
    let arch = model.arch().clone();
    let dims = arch.dims();
    for (pi, (k, l)) in arch.pairs().enumerate() {
        let payload = &mut model.params.matrices[pi];
        match arch.matrix_kind() {
            Some(MatrixKind::Scalar) | Some(MatrixKind::Diagonal) => payload.fill(1.0),
            Some(MatrixKind::Full) => {
                for a in 0..dims[k].min(dims[l]) {
                    payload[a * dims[l] + a] = 1.0;
                }
            }
            _ => {}
        }
    }
    Ok(model)
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(-t))` without the logit clamp, for exact gradients.
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss over `batch` plus `l2 * ||params||^2` (bias excluded).
pub fn loss(model: &FmModel, batch: &Dataset, l2: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let logits = model.score_all(batch)?;
    let data: f64 = logits
        .iter()
        .zip(batch.labels())
        .map(|(z, &y)| softplus(-(y as f64) * z))
        .sum::<f64>()
        / batch.len() as f64;
    Ok(data + l2 * model.params.norm_sq())
}

/// Exact gradient of [`loss`] with respect to every parameter.
pub fn gradients(model: &FmModel, batch: &Dataset, l2: f64) -> Result<Params> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    batch.validate(model.arch().feature_counts())?;
    let mut grads = model.arch().zero_params();
    let scale = 1.0 / batch.len() as f64;
    for (y, active) in batch.iter() {
        let y = y as f64;
        let z = model.logit(active);
        model.accumulate_logit_gradient(active, -y * logistic(-y * z) * scale, &mut grads);
    }
    // values() leads with the bias, which is not regularized
    let theta = model.params.values();
    for (g, p) in grads.values_mut_iter().zip(&theta[1..]) {
        *g += 2.0 * l2 * p;
    }
    Ok(grads)
}

impl Params {
    /// Non-bias values in the same order as [`Params::values`] after the bias.
    fn values_mut_iter(&mut self) -> impl Iterator<Item = &mut f64> {
        self.linear
            .iter_mut()
            .chain(&mut self.embeddings)
            .chain(&mut self.matrices)
            .flat_map(|v| v.iter_mut())
    }
}

/// Features seen in the current minibatch, per field.
#[derive(Clone, Debug)]
struct Touched {
    mark: Vec<Vec<bool>>,
    rows: Vec<Vec<u32>>,
}

impl Touched {
    fn new(counts: &[usize]) -> Self {
        Self {
            mark: counts.iter().map(|&c| vec![false; c]).collect(),
            rows: vec![Vec::new(); counts.len()],
        }
    }

    fn add(&mut self, active: &[u32]) {
        for (f, &a) in active.iter().enumerate() {
            let m = &mut self.mark[f][a as usize];
            if !*m {
                *m = true;
                self.rows[f].push(a);
            }
        }
    }

    fn clear(&mut self) {
        for (mark, rows) in self.mark.iter_mut().zip(&mut self.rows) {
            for &r in rows.iter() {
                mark[r as usize] = false;
            }
            rows.clear();
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Block {
    Bias,
    Linear(usize, usize, usize),
    Embedding(usize, usize, usize),
    Matrix(usize),
}

fn block_mut(p: &mut Params, b: Block) -> &mut [f64] {
    match b {
        Block::Bias => std::slice::from_mut(&mut p.bias),
        Block::Linear(f, s, len) => &mut p.linear[f][s..s + len],
        Block::Embedding(f, s, len) => &mut p.embeddings[f][s..s + len],
        Block::Matrix(i) => &mut p.matrices[i],
    }
}

fn block_ref(p: &Params, b: Block) -> &[f64] {
    match b {
        Block::Bias => std::slice::from_ref(&p.bias),
        Block::Linear(f, s, len) => &p.linear[f][s..s + len],
        Block::Embedding(f, s, len) => &p.embeddings[f][s..s + len],
        Block::Matrix(i) => &p.matrices[i],
    }
}

fn blocks(arch: &Architecture, touched: &Touched, out: &mut Vec<Block>) {
    out.clear();
    out.push(Block::Bias);
    for f in 0..arch.field_count() {
        match arch.linear_mode() {
            LinearMode::PerFeature => out.extend(touched.rows[f].iter().map(|&r| Block::Linear(f, r as usize, 1))),
            LinearMode::FieldShared => out.push(Block::Linear(f, 0, arch.linear_len(f))),
        }
        let w = arch.row_width(f);
        if w > 0 {
            out.extend(touched.rows[f].iter().map(|&r| Block::Embedding(f, r as usize * w, w)));
        }
    }
    out.extend((0..arch.pair_count()).map(Block::Matrix));
}

/// Optimizer moments, shaped like the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step: u64,
    first: Option<Params>,
    second: Option<Params>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, arch: &Architecture) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (None, None),
            OptimizerKind::Adam { .. } => (Some(arch.zero_params()), Some(arch.zero_params())),
            OptimizerKind::Adagrad { .. } => (None, Some(arch.zero_params())),
        };
        Self {
            kind,
            step: 0,
            first,
            second,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn apply(&mut self, lr: f64, params: &mut Params, grads: &Params, blocks: &[Block]) {
        self.step += 1;
        for &b in blocks {
            let p = block_mut(params, b);
            let g = block_ref(grads, b);
            match self.kind {
                OptimizerKind::Sgd => p.iter_mut().zip(g.iter()).for_each(|(p, g)| *p -= lr * g),
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let m = block_mut(self.first.as_mut().unwrap(), b);
                    let v = block_mut(self.second.as_mut().unwrap(), b);
                    let t = self.step as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
                OptimizerKind::Adagrad { eps } => {
                    let v = block_mut(self.second.as_mut().unwrap(), b);
                    for i in 0..p.len() {
                        v[i] += g[i] * g[i];
                        p[i] -= lr * g[i] / (v[i].sqrt() + eps);
                    }
                }
            }
        }
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, OPTIM_MAGIC, OPTIM_VERSION)?;
        let (tag, a, b, c) = match self.kind {
            OptimizerKind::Sgd => (0u8, 0.0, 0.0, 0.0),
            OptimizerKind::Adam { beta1, beta2, eps } => (1, beta1, beta2, eps),
            OptimizerKind::Adagrad { eps } => (2, 0.0, 0.0, eps),
        };
        put_u8(w, tag)?;
        put_f64s(w, &[a, b, c])?;
        put_u64(w, self.step)?;
        for p in self.first.iter().chain(&self.second) {
            put_f64s(w, &p.values())?;
        }
        Ok(())
    }

    fn read<R: BufRead>(r: &mut R, arch: &Architecture) -> Result<Self> {
        const WHAT: &str = "checkpoint";
        read_header(r, WHAT, OPTIM_MAGIC, OPTIM_VERSION)?;
        let tag = get_u8(r, WHAT)?;
        let h = get_f64s(r, 3, WHAT)?;
        let kind = match tag {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::Adam {
                beta1: h[0],
                beta2: h[1],
                eps: h[2],
            },
            2 => OptimizerKind::Adagrad { eps: h[2] },
            t => return Err(format_err(WHAT, format!("optimizer tag {t}"))),
        };
        let mut state = Self::new(kind, arch);
        state.step = get_u64(r, WHAT)?;
        for p in state.first.iter_mut().chain(state.second.iter_mut()) {
            let values = get_f64s(r, p.count() + 1, WHAT)?;
            let mut it = values.into_iter();
            p.for_each_mut(|x| *x = it.next().unwrap());
        }
        Ok(state)
    }
}

pub const OPTIM_MAGIC: &str = "fmfm-optim";
pub const OPTIM_VERSION: u32 = 1;

/// Writes the model file followed by the optimizer appendix.
pub fn save_checkpoint(path: impl AsRef<Path>, model: &FmModel, state: &OptimizerState) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    model.write(&mut w)?;
    state.write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(FmModel, OptimizerState)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let model = FmModel::read_from(&mut r)?;
    let state = OptimizerState::read(&mut r, model.arch())?;
    expect_eof(&mut r, "checkpoint")?;
    Ok((model, state))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub train_logloss: Vec<f64>,
    pub validation_auc: Vec<f64>,
    pub validation_logloss: Vec<f64>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub wall_time: Duration,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_logloss.len()
    }

    /// Per-epoch metrics as CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_logloss,validation_auc,validation_logloss\n");
        for e in 0..self.epochs_run() {
            s += &format!(
                "{},{},{},{}\n",
                e, self.train_logloss[e], self.validation_auc[e], self.validation_logloss[e]
            );
        }
        s
    }
}

/// Minibatch trainer owning a model and its optimizer state.
pub struct Trainer {
    model: FmModel,
    state: OptimizerState,
    config: TrainConfig,
    shuffle_rng: ChaCha8Rng,
    grads: Params,
    touched: Touched,
    blocks: Vec<Block>,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: FmModel, config: TrainConfig) -> Result<Self> {
        let state = OptimizerState::new(config.optimizer, model.arch());
        Self::resume(model, state, config)
    }

    pub fn resume(model: FmModel, state: OptimizerState, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
        shuffle_rng.set_stream(1);
        let grads = model.arch().zero_params();
        let touched = Touched::new(model.arch().feature_counts());
        Ok(Self {
            model,
            state,
            config,
            shuffle_rng,
            grads,
            touched,
            blocks: Vec::new(),
            epoch: 0,
        })
    }

    pub fn model(&self) -> &FmModel {
        &self.model
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn into_parts(self) -> (FmModel, OptimizerState) {
        (self.model, self.state)
    }

    /// One update on the given instances; returns their mean data loss
    /// evaluated before the update.
    pub fn step(&mut self, data: &Dataset, batch: &[usize]) -> Result<f64> {
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &i in batch {
            let active = data.active(i);
            let y = data.label(i) as f64;
            let z = self.model.logit(active);
            total += softplus(-y * z);
            self.model
                .accumulate_logit_gradient(active, -y * logistic(-y * z) * scale, &mut self.grads);
            self.touched.add(active);
        }
        if !total.is_finite() {
            return Err(Error::Diverged {
                epoch: self.epoch,
                batch: 0,
            });
        }
        blocks(self.model.arch(), &self.touched, &mut self.blocks);
        let l2 = self.config.l2;
        for &b in &self.blocks {
            if matches!(b, Block::Bias) || l2 == 0.0 {
                continue;
            }
            let p = block_ref(&self.model.params, b);
            block_mut(&mut self.grads, b)
                .iter_mut()
                .zip(p)
                .for_each(|(g, p)| *g += 2.0 * l2 * p);
        }
        self.state
            .apply(self.config.learning_rate, &mut self.model.params, &self.grads, &self.blocks);
        for &b in &self.blocks {
            block_mut(&mut self.grads, b).fill(0.0);
        }
        self.touched.clear();
        Ok(total * scale)
    }

    /// Shuffles and sweeps `train` once; returns the mean training log loss.
    pub fn run_epoch(&mut self, train: &Dataset) -> Result<f64> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let mut total = 0.0;
        for (bi, batch) in order.chunks(self.config.batch_size).enumerate() {
            let l = self.step(train, batch).map_err(|e| match e {
                Error::Diverged { epoch, .. } => Error::Diverged { epoch, batch: bi },
                e => e,
            })?;
            total += l * batch.len() as f64;
        }
        if !self.model.params.is_finite() {
            return Err(Error::Diverged {
                epoch: self.epoch,
                batch: order.len().div_ceil(self.config.batch_size),
            });
        }
        self.epoch += 1;
        Ok(total / train.len().max(1) as f64)
    }
}

/// AUC and log loss of `model` on `data`; AUC is NaN when `data` has a
/// single class.
pub fn evaluate(model: &FmModel, data: &Dataset) -> Result<(f64, f64)> {
    let logits = model.score_all(data)?;
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let a = auc(&logits, data.labels()).unwrap_or(f64::NAN);
    let l = if data.is_empty() { f64::NAN } else { logloss(&probs, data.labels()) };
    Ok((a, l))
}

/// Trains for `config.epochs` epochs and returns the parameters of the epoch
/// with the best validation AUC (the last epoch when validation AUC is
/// undefined).
pub fn fit(model: FmModel, split: &DatasetSplit, config: &TrainConfig) -> Result<(FmModel, TrainReport)> {
    let start = Instant::now();
    if split.train.is_empty() {
        return Err(Error::EmptyInput);
    }
    split.train.validate(model.arch().feature_counts())?;
    split.validation.validate(model.arch().feature_counts())?;
    let mut trainer = Trainer::new(model, config.clone())?;
    let mut report = TrainReport {
        train_logloss: Vec::new(),
        validation_auc: Vec::new(),
        validation_logloss: Vec::new(),
        best_epoch: 0,
        wall_time: Duration::ZERO,
    };
    let mut best: Option<(f64, FmModel)> = None;
    for epoch in 0..config.epochs {
        let train_loss = trainer.run_epoch(&split.train)?;
        let (va, vl) = evaluate(trainer.model(), &split.validation)?;
        report.train_logloss.push(train_loss);
        report.validation_auc.push(va);
        report.validation_logloss.push(vl);
        let better = match &best {
            _ if va.is_nan() => true,
            None => true,
            Some((b, _)) => va > *b,
        };
        if better {
            report.best_epoch = epoch;
            best = Some((if va.is_nan() { f64::NEG_INFINITY } else { va }, trainer.model().clone()));
        }
    }
    report.wall_time = start.elapsed();
    Ok((best.unwrap().1, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    fn toy(n_fields: usize) -> Dataset {
        let mut ds = Dataset::new(n_fields);
        for i in 0..16u32 {
            let active: Vec<u32> = (0..n_fields as u32).map(|f| (i + f) % 3).collect();
            ds.push(if i % 2 == 0 { 1 } else { -1 }, &active).unwrap();
        }
        ds
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let arch = Architecture::uniform(Variant::FmFm, vec![3, 3], 2).unwrap();
        let m = FmModel::zeros(arch, 0);
        assert!((loss(&m, &toy(2), 0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(loss(&m, &Dataset::new(2), 0.0).is_err());
    }

    #[test]
    fn confident_instance_loss() {
        let arch = Architecture::uniform(Variant::Lr, vec![1], 0).unwrap();
        let mut m = FmModel::zeros(arch, 0);
        m.params.bias = 10.0;
        let mut ds = Dataset::new(1);
        ds.push(1, &[0]).unwrap();
        let l = loss(&m, &ds, 0.0).unwrap();
        assert!((l / (-10f64).exp().ln_1p() - 1.0).abs() < 1e-12);
        assert!((l - 4.54e-5).abs() < 1e-7);
        m.params.linear[0][0] = 0.5;
        assert!(loss(&m, &ds, 0.1).unwrap() > loss(&m, &ds, 0.0).unwrap());
    }

    #[test]
    fn init_properties() {
        let cfg = TrainConfig {
            seed: 3,
            ..Default::default()
        };
        let arch = Architecture::new(Variant::FmFm, LinearMode::FieldShared, vec![4, 5], vec![2, 3]).unwrap();
        let a = init_model(arch.clone(), 0, &cfg).unwrap();
        let b = init_model(arch, 0, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params.matrices[0], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

        let zero = TrainConfig {
            init_scale: 0.0,
            ..cfg
        };
        let arch = Architecture::uniform(Variant::FwFm, vec![4, 5, 2], 3).unwrap();
        let m = init_model(arch, 0, &zero).unwrap();
        assert!(m.params.embeddings.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(m.score(&[1, 2, 1]).unwrap(), 0.0);
    }

    #[test]
    fn identity_padded_fmfm_starts_at_fm() {
        let cfg = TrainConfig {
            init_scale: 0.5,
            seed: 9,
            ..Default::default()
        };
        let counts = vec![3, 4, 2, 5];
        let fm = init_model(Architecture::uniform(Variant::Fm, counts.clone(), 3).unwrap(), 0, &cfg).unwrap();
        let fmfm = init_model(
            Architecture::new(Variant::FmFm, LinearMode::PerFeature, counts, vec![3; 4]).unwrap(),
            0,
            &cfg,
        )
        .unwrap();
        for a in 0..2u32 {
            let x = [a, a + 1, a, a + 2];
            assert!((fm.score(&x).unwrap() - fmfm.score(&x).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn penalty_gradient_alone() {
        // a model whose logit ignores every parameter but the bias is not
        // available, so compare l2 = 0 and l2 > 0 on the same batch
        let cfg = TrainConfig {
            init_scale: 0.3,
            seed: 1,
            ..Default::default()
        };
        let m = init_model(Architecture::uniform(Variant::FvFm, vec![3, 3], 2).unwrap(), 0, &cfg).unwrap();
        let g0 = gradients(&m, &toy(2), 0.0).unwrap().values();
        let g1 = gradients(&m, &toy(2), 0.25).unwrap().values();
        let p = m.params.values();
        assert_eq!(g0[0], g1[0]);
        for i in 1..p.len() {
            assert!((g1[i] - g0[i] - 0.5 * p[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_embeddings_give_zero_matrix_gradients() {
        let arch = Architecture::uniform(Variant::FmFm, vec![3, 3, 3], 2).unwrap();
        let cfg = TrainConfig {
            init_scale: 0.0,
            ..Default::default()
        };
        let m = init_model(arch, 0, &cfg).unwrap();
        let g = gradients(&m, &toy(3), 0.0).unwrap();
        assert!(g.matrices.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            l2: 1e-6,
            epochs: 3,
            batch_size: 64,
            optimizer: OptimizerKind::Adagrad { eps: 1e-6 },
            init_scale: 0.1,
            seed: 42,
        };
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(TrainConfig::parse("epochs=0").is_err());
        assert!(TrainConfig::parse("nope=1").is_err());
        assert!(TrainConfig::parse("# comment only\n").is_ok());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        let arch = Architecture::uniform(Variant::FwFm, vec![3, 3], 2).unwrap();
        let cfg = TrainConfig {
            batch_size: 4,
            ..Default::default()
        };
        let mut t = Trainer::new(init_model(arch, 5, &cfg).unwrap(), cfg).unwrap();
        t.run_epoch(&toy(2)).unwrap();
        let (m, s) = t.into_parts();
        save_checkpoint(&path, &m, &s).unwrap();
        let (m2, s2) = load_checkpoint(&path).unwrap();
        assert_eq!(m, m2);
        assert_eq!(s, s2);
        assert_eq!(s2.steps(), 4);
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let arch = Architecture::uniform(Variant::FmFm, vec![3, 3], 4).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e200,
            optimizer: OptimizerKind::Sgd,
            init_scale: 1.0,
            batch_size: 2,
            epochs: 5,
            ..Default::default()
        };
        let m = init_model(arch, 0, &cfg).unwrap();
        let split = DatasetSplit {
            train: toy(2),
            validation: toy(2),
            test: toy(2),
            seed: 0,
        };
        assert!(matches!(fit(m, &split, &cfg), Err(Error::Diverged { .. })));
    }
}

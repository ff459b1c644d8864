use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use fmfm_core::analysis::{auc, count_params, count_params_uniform, estimate_flops, logloss, mi_matrix, Dims};
use fmfm_core::cache::{build_cache_with_threads, peek_float_bytes, CachedModel};
use fmfm_core::ingest::{encode_records, split_dataset, Part, RawFormat, RawReader, Splitter};
use fmfm_core::model::sigmoid;
use fmfm_core::reduce::{pca_field_dims_with, PcaWeighting};
use fmfm_core::schema::FrequencyCounter;
use fmfm_core::synth::{generate, SynthSpec};
use fmfm_core::train::{fit, init_model, OptimizerKind};
use fmfm_core::{
    Architecture, Dataset, DimsPlan, Error, FieldSchema, FmModel, LinearMode, MatrixKind, TieBreak, TrainConfig,
    Variant,
};

use crate::*;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::SchemaBuild(a) => schema_build(a),
        Command::Encode(a) => encode(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::Reduce(a) => reduce(a),
        Command::Cache(a) => cache(a),
        Command::Flops(a) => flops(a),
        Command::Params(a) => params(a),
        Command::Mi(a) => mi(a),
        Command::Synth(a) => synth(a),
    }
}

impl From<FormatArg> for RawFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Criteo => RawFormat::Criteo,
            FormatArg::Avazu => RawFormat::Avazu,
        }
    }
}

impl From<KindArg> for MatrixKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Identity => MatrixKind::Identity,
            KindArg::Scalar => MatrixKind::Scalar,
            KindArg::Diagonal => MatrixKind::Diagonal,
            KindArg::Full => MatrixKind::Full,
        }
    }
}

impl From<LinearArg> for LinearMode {
    fn from(l: LinearArg) -> Self {
        match l {
            LinearArg::PerFeature => LinearMode::PerFeature,
            LinearArg::FieldShared => LinearMode::FieldShared,
        }
    }
}

/// `--variant` refined by `--matrix-kind`.
fn resolve_variant(variant: VariantArg, kind: Option<KindArg>) -> Result<Variant> {
    let v = match variant {
        VariantArg::Lr => Variant::Lr,
        VariantArg::Fm => Variant::Fm,
        VariantArg::Fwfm => Variant::FwFm,
        VariantArg::Fvfm => Variant::FvFm,
        VariantArg::Fmfm => Variant::FmFm,
        VariantArg::Ffm => Variant::Ffm,
    };
    match kind {
        None => Ok(v),
        Some(_) if v.matrix_kind().is_none() => {
            Err(Error::InvalidConfig(format!("--matrix-kind does not apply to {v}")).into())
        }
        Some(k) => Ok(Variant::from_kind(k.into())),
    }
}

fn load_schema(path: &Path) -> Result<FieldSchema> {
    FieldSchema::load(path).with_context(|| format!("reading schema {}", path.display()))
}

fn load_data(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("reading data {}", path.display()))
}

fn load_model(path: &Path) -> Result<FmModel> {
    FmModel::load(path).with_context(|| format!("reading model {}", path.display()))
}

fn load_dims(path: &Path) -> Result<DimsPlan> {
    DimsPlan::load(path).with_context(|| format!("reading dims {}", path.display()))
}

fn print_json(value: serde_json::Value) {
    println!("{}", serde_json::to_string(&value).expect("json values serialize"));
}

fn schema_build(a: SchemaBuildArgs) -> Result<()> {
    let mut reader = RawReader::<fs::File>::open(a.format.into(), &a.input)
        .with_context(|| format!("opening {}", a.input.display()))?;
    let mut counter = FrequencyCounter::new(reader.fields())?;
    let mut splitter = Splitter::new(a.seed);
    for rec in reader.by_ref() {
        let rec = rec?;
        let counted = match a.count_on {
            CountOn::All => true,
            CountOn::Train => splitter.next_part() == Part::Train,
        };
        if counted {
            counter.observe(&rec.values)?;
        }
    }
    let rows = counter.rows();
    let schema = counter.finish(&[a.min_freq])?;
    schema.save(&a.out)?;
    println!(
        "fields={} features={} counted_rows={} rejected_rows={}",
        schema.field_count(),
        schema.total_features(),
        rows,
        reader.rejected()
    );
    Ok(())
}

fn encode(a: EncodeArgs) -> Result<()> {
    let schema = load_schema(&a.schema)?;
    let mut reader = RawReader::<fs::File>::open(a.format.into(), &a.input)
        .with_context(|| format!("opening {}", a.input.display()))?;
    let fields = reader.fields().to_vec();
    if fields.len() != schema.field_count() {
        bail!(Error::SchemaMismatch(format!(
            "raw file has {} fields, schema has {}",
            fields.len(),
            schema.field_count()
        )));
    }
    let data = encode_records(&schema, &fields, reader.by_ref())?;
    data.save(&a.out)?;
    println!("instances={} rejected_rows={}", data.len(), reader.rejected());
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let data = load_data(&a.input)?;
    if data.is_empty() {
        bail!(Error::EmptyInput);
    }
    let parts = split_dataset(&data, a.seed);
    fs::create_dir_all(&a.out_dir)?;
    parts.train.save(a.out_dir.join("train.bin"))?;
    parts.validation.save(a.out_dir.join("validation.bin"))?;
    parts.test.save(a.out_dir.join("test.bin"))?;
    println!(
        "train={} validation={} test={}",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            TrainConfig::parse(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(x) = a.lr {
        cfg.learning_rate = x;
    }
    if let Some(x) = a.l2 {
        cfg.l2 = x;
    }
    if let Some(x) = a.epochs {
        cfg.epochs = x;
    }
    if let Some(x) = a.batch {
        cfg.batch_size = x;
    }
    if let Some(x) = a.init_scale {
        cfg.init_scale = x;
    }
    if let Some(x) = a.seed {
        cfg.seed = x;
    }
    if let Some(o) = a.optimizer {
        cfg.optimizer = match (o, cfg.optimizer) {
            (OptimizerArg::Sgd, _) => OptimizerKind::Sgd,
            (OptimizerArg::Adam, keep @ OptimizerKind::Adam { .. }) => keep,
            (OptimizerArg::Adam, _) => OptimizerKind::adam(),
            (OptimizerArg::Adagrad, keep @ OptimizerKind::Adagrad { .. }) => keep,
            (OptimizerArg::Adagrad, _) => OptimizerKind::adagrad(),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a)?;
    let variant = resolve_variant(a.variant, a.matrix_kind)?;
    let schema = load_schema(&a.schema)?;
    let counts = schema.feature_counts();
    let n = counts.len();
    let dims = match (&a.dims, a.dim) {
        (Some(p), _) => {
            let plan = load_dims(p)?;
            if plan.dims.len() != n {
                bail!(Error::SchemaMismatch(format!("dims file has {} fields, schema {n}", plan.dims.len())));
            }
            plan.dims
        }
        (None, k) => vec![k.unwrap_or(16); n],
    };
    let linear = a.linear.map_or(variant.default_linear(), LinearMode::from);
    let arch = Architecture::new(variant, linear, counts.clone(), dims)?;
    let split = fmfm_core::DatasetSplit {
        train: load_data(&a.train)?,
        validation: load_data(&a.validation)?,
        test: Dataset::new(n),
        seed: cfg.seed,
    };
    split.train.validate(&counts)?;
    split.validation.validate(&counts)?;
    let test = a.test.as_deref().map(load_data).transpose()?;
    if let Some(t) = &test {
        t.validate(&counts)?;
    }

    let model = init_model(arch, schema.hash(), &cfg)?;
    let (best, report) = fit(model, &split, &cfg)?;
    for e in 0..report.epochs_run() {
        eprintln!(
            "epoch {e}: train_logloss={:.6} validation_auc={:.6} validation_logloss={:.6}",
            report.train_logloss[e], report.validation_auc[e], report.validation_logloss[e]
        );
    }
    best.save(&a.out)?;
    if let Some(p) = &a.report {
        fs::write(p, report.to_csv())?;
    }
    let b = report.best_epoch;
    let mut line = format!(
        "variant={} params={} best_epoch={b} validation_auc={:.6} validation_logloss={:.6}",
        variant,
        best.param_count(),
        report.validation_auc[b],
        report.validation_logloss[b]
    );
    if let Some(t) = &test {
        let (ta, tl) = metrics(&Scorer::Model(best), t, a.threads)?;
        line += &format!(" test_auc={ta:.6} test_logloss={tl:.6}");
    }
    println!("{line}");
    Ok(())
}

enum Scorer {
    Model(FmModel),
    Cache32(CachedModel<f32>),
    Cache64(CachedModel<f64>),
}

impl Scorer {
    fn load(a: &ScorerArgs) -> Result<Self> {
        let scorer = match (&a.model, &a.cache) {
            (Some(p), _) => Scorer::Model(load_model(p)?),
            (None, Some(p)) => {
                let ctx = || format!("reading cache {}", p.display());
                match peek_float_bytes(p).with_context(ctx)? {
                    8 => Scorer::Cache64(CachedModel::load(p).with_context(ctx)?),
                    _ => Scorer::Cache32(CachedModel::load(p).with_context(ctx)?),
                }
            }
            (None, None) => unreachable!("clap requires one of --model and --cache"),
        };
        if let Some(p) = &a.schema {
            let schema = load_schema(p)?;
            if schema.hash() != scorer.schema_hash() || schema.feature_counts() != scorer.feature_counts() {
                bail!(Error::SchemaMismatch(format!("scorer was not built against {}", p.display())));
            }
        }
        Ok(scorer)
    }

    fn schema_hash(&self) -> u64 {
        match self {
            Scorer::Model(m) => m.schema_hash(),
            Scorer::Cache32(c) => c.schema_hash(),
            Scorer::Cache64(c) => c.schema_hash(),
        }
    }

    fn feature_counts(&self) -> Vec<usize> {
        match self {
            Scorer::Model(m) => m.arch().feature_counts().to_vec(),
            Scorer::Cache32(c) => c.feature_counts().to_vec(),
            Scorer::Cache64(c) => c.feature_counts().to_vec(),
        }
    }

    fn score(&self, active: &[u32]) -> fmfm_core::Result<f64> {
        match self {
            Scorer::Model(m) => m.score(active),
            Scorer::Cache32(c) => c.cached_score(active),
            Scorer::Cache64(c) => c.cached_score(active),
        }
    }

    /// Logits in data order, scored on `threads` workers.
    fn logits(&self, data: &Dataset, threads: usize) -> Result<Vec<f64>> {
        data.validate(&self.feature_counts())?;
        let len = data.len();
        let chunk = len.div_ceil(threads.max(1)).max(1);
        let parts: Vec<fmfm_core::Result<Vec<f64>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..len)
                .step_by(chunk)
                .map(|start| {
                    s.spawn(move || (start..(start + chunk).min(len)).map(|i| self.score(data.active(i))).collect())
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("scoring worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(len);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

fn metrics(scorer: &Scorer, data: &Dataset, threads: usize) -> Result<(f64, f64)> {
    let logits = scorer.logits(data, threads)?;
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok((auc(&logits, data.labels())?, logloss(&probs, data.labels())))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let scorer = Scorer::load(&a.scorer)?;
    let data = load_data(&a.data)?;
    if data.is_empty() {
        bail!(Error::EmptyInput);
    }
    let (auc, ll) = metrics(&scorer, &data, a.scorer.threads)?;
    if a.json {
        print_json(json!({ "auc": auc, "logloss": ll, "instances": data.len() }));
    } else {
        println!("auc={auc:.6} logloss={ll:.6} instances={}", data.len());
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let scorer = Scorer::load(&a.scorer)?;
    let data = load_data(&a.data)?;
    let logits = scorer.logits(&data, a.scorer.threads)?;
    let mut w = std::io::BufWriter::new(fs::File::create(&a.out)?);
    for z in logits {
        writeln!(w, "{}", sigmoid(z))?;
    }
    w.flush()?;
    Ok(())
}

fn reduce(a: ReduceArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let plan = match &a.weighted_by {
        None => pca_field_dims_with(&model, a.variance, PcaWeighting::Unweighted, None)?,
        Some(p) => {
            let schema = load_schema(p)?;
            if schema.hash() != model.schema_hash() {
                bail!(Error::SchemaMismatch(format!("model was not trained against {}", p.display())));
            }
            let freq: Vec<Vec<u64>> = (0..schema.field_count()).map(|f| schema.frequencies(f)).collect();
            pca_field_dims_with(&model, a.variance, PcaWeighting::Frequency, Some(&freq))?
        }
    };
    plan.save(&a.out)?;
    let k = model.arch().dims()[0];
    println!(
        "mean_dim={:.4} source_dim={k} ratio={:.4} dims={}",
        plan.mean_dim(),
        plan.mean_dim() / k as f64,
        plan.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    );
    Ok(())
}

fn cache(a: CacheArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let tie = match a.tie {
        TieArg::LowerIndex => TieBreak::LowerIndex,
        TieArg::MoreFeatures => TieBreak::MoreFeatures,
    };
    let (pairs, numbers) = if a.f64 {
        let c: CachedModel<f64> = build_cache_with_threads(&model, tie, a.threads)?;
        c.save(&a.out)?;
        (c.pairs().len(), c.pair_table_len())
    } else {
        let c: CachedModel<f32> = build_cache_with_threads(&model, tie, a.threads)?;
        c.save(&a.out)?;
        (c.pairs().len(), c.pair_table_len())
    };
    let arch = model.arch();
    let flops = estimate_flops(
        arch.variant(),
        arch.field_count(),
        &Dims::PerField(arch.dims().to_vec()),
        true,
        arch.linear_mode(),
    );
    println!(
        "pairs={pairs} pair_table_numbers={numbers} precision={} cached_flops={flops}",
        if a.f64 { "f64" } else { "f32" }
    );
    Ok(())
}

/// Dimensions from `--dims` or a uniform `--k`; `None` for LR.
fn dims_arg(variant: Variant, k: Option<usize>, dims: Option<&Path>, n: usize) -> Result<Dims> {
    Ok(match (dims, k) {
        (Some(p), _) => Dims::PerField(load_dims(p)?.dims),
        (None, Some(k)) => Dims::Uniform(k),
        (None, None) if variant == Variant::Lr => Dims::Uniform(0),
        (None, None) => Dims::Uniform(16),
    })
    .and_then(|d| match &d {
        Dims::PerField(v) if variant != Variant::FmFm && v.iter().any(|&x| x != v[0]) => {
            Err(Error::InvalidDims(format!("{variant} needs a uniform dimension")).into())
        }
        Dims::PerField(v) if v.len() != n => {
            Err(Error::InvalidDims(format!("{} dims for {n} fields", v.len())).into())
        }
        _ => Ok(d),
    })
}

fn flops(a: FlopsArgs) -> Result<()> {
    let variant = resolve_variant(a.variant, a.matrix_kind)?;
    let n = match (&a.dims, a.n) {
        (Some(p), _) => load_dims(p)?.dims.len(),
        (None, Some(n)) => n,
        (None, None) => bail!(Error::InvalidConfig("give --n or --dims".into())),
    };
    let dims = dims_arg(variant, a.k, a.dims.as_deref(), n)?;
    let linear = LinearMode::from(a.linear);
    if linear == LinearMode::FieldShared && matches!(variant, Variant::Lr | Variant::Ffm) {
        bail!(Error::InvalidConfig(format!("{variant} supports per-feature linear terms only")));
    }
    let f = estimate_flops(variant, n, &dims, a.cached, linear);
    if a.json {
        print_json(json!({ "variant": variant.name(), "n": n, "cached": a.cached, "flops": f }));
    } else {
        println!("{f}");
    }
    Ok(())
}

fn params(a: ParamsArgs) -> Result<()> {
    let variant = resolve_variant(a.variant, a.matrix_kind)?;
    let linear = LinearMode::from(a.linear);
    if linear == LinearMode::FieldShared && matches!(variant, Variant::Lr | Variant::Ffm) {
        bail!(Error::InvalidConfig(format!("{variant} supports per-feature linear terms only")));
    }
    let count = match (&a.schema, a.m, a.n) {
        (Some(p), _, _) => {
            let counts = load_schema(p)?.feature_counts();
            let dims = dims_arg(variant, a.k, a.dims.as_deref(), counts.len())?;
            count_params(variant, &counts, &dims, linear)
        }
        (None, Some(m), Some(n)) => {
            let k = a.k.unwrap_or(if variant == Variant::Lr { 0 } else { 16 }) as u64;
            let base = count_params_uniform(variant, m, n, k);
            match linear {
                LinearMode::PerFeature => base,
                // one K-vector per field replaces the m per-feature weights
                LinearMode::FieldShared => base - m + n * k,
            }
        }
        _ => bail!(Error::InvalidConfig("give --schema, or --m and --n".into())),
    };
    if a.json {
        print_json(json!({ "variant": variant.name(), "params": count }));
    } else {
        println!("{count}");
    }
    Ok(())
}

fn mi(a: MiArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    if data.is_empty() {
        bail!(Error::EmptyInput);
    }
    let m = mi_matrix(&data);
    if let Some(p) = &a.out {
        fs::write(p, m.to_csv())?;
    }
    let n = data.field_count();
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|k| (k + 1..n).map(move |l| (k, l)))
        .map(|(k, l)| (k, l, m.values[k][l]))
        .collect();
    if a.json {
        let list: Vec<_> = pairs.iter().map(|&(k, l, v)| json!({ "k": k, "l": l, "mi": v })).collect();
        print_json(json!({ "fields": n, "unit": "bits", "pairs": list }));
    } else {
        for (k, l, v) in pairs {
            println!("{k}\t{l}\t{v:.6e}");
        }
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = if a.benchmark {
        SynthSpec::benchmark(a.seed)
    } else {
        SynthSpec {
            seed: a.seed,
            ..SynthSpec::default()
        }
    };
    if let Some(v) = a.vocab {
        if a.truth_dims.is_none() {
            spec.truth_dims = vec![spec.truth_dims[0]; v.len()];
        }
        spec.vocab = v;
    }
    if let Some(d) = a.truth_dims {
        spec.truth_dims = d;
    }
    if let Some(k) = a.truth_kind {
        spec.truth_kind = k.into();
    }
    if let Some(z) = a.zipf {
        spec.zipf_exponent = z;
    }
    if let Some(x) = a.noise {
        spec.label_noise = x;
    }
    if let Some(s) = a.samples {
        spec.samples = s;
    }
    let out = generate(&spec)?;
    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    out.schema.save(dir.join("schema.txt"))?;
    out.data.save(dir.join("data.bin"))?;
    out.split.train.save(dir.join("train.bin"))?;
    out.split.validation.save(dir.join("validation.bin"))?;
    out.split.test.save(dir.join("test.bin"))?;
    out.truth.save(dir.join("truth.model"))?;
    println!(
        "instances={} train={} validation={} test={} unseen_validation_pairs={}",
        out.data.len(),
        out.split.train.len(),
        out.split.validation.len(),
        out.split.test.len(),
        out.unseen_pairs
    );
    Ok(())
}

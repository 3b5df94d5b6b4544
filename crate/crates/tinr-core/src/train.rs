//! The overfit loop: full-batch gradient descent of an INR on one texture
//! (or its mipmap pyramid), with per-epoch loss tracking and learning
//! snapshots.
//!
//! The loss is plain MSE over every sample in `[0,1]` pixel space. Gradients
//! are accumulated over fixed-size row chunks so arbitrarily large sample
//! sets train in bounded memory while staying bit-deterministic.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{
    build_dataset, build_mipmap_dataset, build_pyramid, dataset_matrices, decode_image,
    decode_pyramid, pyramid_atlas, save_image, Image,
};
use crate::network::{init, InrModel, NetworkSpec};
use crate::optim::{Optimizer, OptimizerConfig, ParamBlock};
use crate::store;
use crate::tensor::{Matrix, Tape};

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_SNAPSHOT_EPOCHS: [usize; 6] = [1, 10, 20, 30, 40, 50];

const CHUNK_ROWS: usize = 4096;

/// One training run: architecture, optimizer, schedule, and mipmap mode.
#[derive(Debug, Clone)]
pub struct TrainJob {
    pub spec: NetworkSpec,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub seed: u64,
    /// `Some(levels)` trains on the full pyramid with a `t` input.
    pub mipmap_levels: Option<usize>,
    /// Epochs at which to decode and dump a snapshot (requires `outputs`).
    pub snapshot_epochs: Vec<usize>,
}

impl TrainJob {
    pub fn new(spec: NetworkSpec, optimizer: OptimizerConfig) -> Self {
        TrainJob {
            spec,
            optimizer,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            mipmap_levels: None,
            snapshot_epochs: DEFAULT_SNAPSHOT_EPOCHS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.optimizer.validate()?;
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if let Some(&bad) = self
            .snapshot_epochs
            .iter()
            .find(|&&e| e < 1 || e > self.epochs)
        {
            return Err(Error::Config(format!(
                "snapshot epoch {bad} outside [1, {}]",
                self.epochs
            )));
        }
        let want_dim = if self.mipmap_levels.is_some() { 3 } else { 2 };
        if self.spec.input_dim != want_dim {
            return Err(Error::Config(format!(
                "input_dim {} does not match mipmap mode (want {want_dim})",
                self.spec.input_dim
            )));
        }
        if let Some(levels) = self.mipmap_levels {
            if levels < 1 {
                return Err(Error::Config("mipmap levels must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Where to put loss curves, snapshot PNGs, and snapshot checkpoints.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub dir: PathBuf,
    pub stem: String,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub png: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: InrModel,
    /// MSE per epoch, `[0,1]` pixel space, recorded before that epoch's
    /// parameter update.
    pub loss_curve: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub train_seconds: f64,
}

struct GradAccum {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
    hash: Vec<f64>,
}

impl GradAccum {
    fn new(model: &InrModel) -> Self {
        GradAccum {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    (
                        vec![0.0; l.weight.data().len()],
                        vec![0.0; l.bias.len()],
                    )
                })
                .collect(),
            hash: vec![0.0; model.hash_table.as_ref().map_or(0, |t| t.data.len())],
        }
    }

    fn zero(&mut self) {
        for (w, b) in &mut self.layers {
            w.fill(0.0);
            b.fill(0.0);
        }
        self.hash.fill(0.0);
    }
}

/// Computes the full-batch loss and gradient for the current parameters.
fn epoch_pass(
    model: &InrModel,
    coords: &Matrix,
    targets: &Matrix,
    accum: &mut GradAccum,
) -> Result<f64> {
    accum.zero();
    let n_values = targets.data().len() as f64;
    let mut loss_sum = 0.0;
    let rows = coords.rows();
    let mut start = 0;
    while start < rows {
        let end = (start + CHUNK_ROWS).min(rows);
        let chunk = coords.slice_rows(start, end);
        let target_chunk = targets.slice_rows(start, end);

        let mut tape = Tape::new();
        let (out, trace) = model.forward_train(&chunk, &mut tape)?;
        let mut grad = Matrix::zeros(out.rows(), out.cols());
        for ((g, &o), &t) in grad
            .data_mut()
            .iter_mut()
            .zip(out.data())
            .zip(target_chunk.data())
        {
            let diff = o - t;
            loss_sum += diff * diff;
            *g = 2.0 * diff / n_values;
        }
        let grads = tape.backward(&grad)?;
        for ((wacc, bacc), lg) in accum.layers.iter_mut().zip(&grads.layers) {
            for (a, &g) in wacc.iter_mut().zip(lg.weight.data()) {
                *a += g;
            }
            for (a, &g) in bacc.iter_mut().zip(lg.bias.data()) {
                *a += g;
            }
        }
        if let Some(trace) = &trace {
            let hg = model.hash_table_grads(trace, &grads.input);
            for (a, g) in accum.hash.iter_mut().zip(hg) {
                *a += g;
            }
        }
        start = end;
    }
    Ok(loss_sum / n_values)
}

fn write_snapshot(
    model: &InrModel,
    base: &Image,
    job: &TrainJob,
    outputs: &TrainOutputs,
    epoch: usize,
) -> Result<Snapshot> {
    let png = outputs.dir.join(format!("{}_epoch{epoch}.png", outputs.stem));
    match job.mipmap_levels {
        Some(levels) => {
            let pyr = decode_pyramid(model, base.width(), base.height(), levels)?;
            save_image(&pyramid_atlas(&pyr), &png)?;
        }
        None => {
            let img = decode_image(model, base.width(), base.height(), None)?;
            save_image(&img, &png)?;
        }
    }
    let checkpoint = outputs
        .dir
        .join(format!("{}_epoch{epoch}.tinr", outputs.stem));
    store::save(model, &checkpoint)?;
    Ok(Snapshot {
        epoch,
        png,
        checkpoint,
    })
}

pub fn write_loss_curve(curve: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path.as_ref())?;
    for (i, loss) in curve.iter().enumerate() {
        writeln!(file, "{}\t{}", i + 1, loss)?;
    }
    Ok(())
}

/// Trains `job` against `base`. With `outputs` set, writes the loss curve
/// after every epoch and snapshot PNG + checkpoint pairs at the snapshot
/// epochs; on divergence the last good snapshot stays on disk.
pub fn train(job: &TrainJob, base: &Image, outputs: Option<&TrainOutputs>) -> Result<TrainOutcome> {
    job.validate()?;
    let started = Instant::now();

    let samples = match job.mipmap_levels {
        Some(levels) => build_mipmap_dataset(&build_pyramid(base, levels)?),
        None => build_dataset(base),
    };
    let (coords, targets) = dataset_matrices(&samples)?;

    let mut model = init(&job.spec, job.seed)?;
    let mut optimizer = Optimizer::new(job.optimizer)?;
    let mut accum = GradAccum::new(&model);
    let block_names: Vec<String> = (0..model.layers.len())
        .flat_map(|i| [format!("layer{i}.weight"), format!("layer{i}.bias")])
        .chain(model.hash_table.is_some().then(|| "hash_table".to_string()))
        .collect();

    if let Some(out) = outputs {
        fs::create_dir_all(&out.dir)?;
    }

    let mut loss_curve = Vec::with_capacity(job.epochs);
    let mut snapshots = Vec::new();
    for epoch in 1..=job.epochs {
        let loss = match epoch_pass(&model, &coords, &targets, &mut accum) {
            Ok(loss) if loss.is_finite() => loss,
            _ => {
                if let Some(out) = outputs {
                    write_loss_curve(&loss_curve, out.dir.join(format!("{}_loss.tsv", out.stem)))?;
                }
                return Err(Error::Diverged { epoch });
            }
        };
        loss_curve.push(loss);

        {
            let mut blocks: Vec<ParamBlock<'_>> = Vec::with_capacity(block_names.len());
            let mut name_iter = block_names.iter();
            for (layer, (wg, bg)) in model.layers.iter_mut().zip(&accum.layers) {
                blocks.push(ParamBlock {
                    name: name_iter.next().unwrap(),
                    params: layer.weight.data_mut(),
                    grads: wg,
                });
                blocks.push(ParamBlock {
                    name: name_iter.next().unwrap(),
                    params: layer.bias.data_mut(),
                    grads: bg,
                });
            }
            if let Some(table) = &mut model.hash_table {
                blocks.push(ParamBlock {
                    name: name_iter.next().unwrap(),
                    params: &mut table.data,
                    grads: &accum.hash,
                });
            }
            optimizer.step(&mut blocks)?;
        }

        if let Some(out) = outputs {
            if job.snapshot_epochs.contains(&epoch) {
                snapshots.push(write_snapshot(&model, base, job, out, epoch)?);
            }
        }
    }

    if let Some(out) = outputs {
        write_loss_curve(&loss_curve, out.dir.join(format!("{}_loss.tsv", out.stem)))?;
    }

    Ok(TrainOutcome {
        model,
        loss_curve,
        snapshots,
        train_seconds: started.elapsed().as_secs_f64(),
    })
}

//! The rate-distortion sweep: architecture grid x optimizers x corpus,
//! flat CSV output, and bitrate-bucketed series.
//!
//! The reference grid is 1-3 hidden layers of width 128/256/512 minus the
//! (512 x 3) cell — eight configurations per architecture. Jobs run in a
//! worker pool; results are collected in job order so the CSV is
//! byte-reproducible for a fixed (manifest, grid, seed) triple.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::image::{load_image, Image};
use crate::metrics::{EvalRecord, SsimConfig};
use crate::network::{ActivationKind, EncoderConfig, NetworkSpec, DEFAULT_FOURIER_BANDS};
use crate::optim::{default_config, OptimizerKind};
use crate::train::{train, TrainJob};

/// The evaluated architecture families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Mlp,
    Sine,
    Fourier,
    /// Optional extra; not part of the reference grid.
    Hash,
}

impl ArchKind {
    pub fn tag(self) -> &'static str {
        match self {
            ArchKind::Mlp => "mlp",
            ArchKind::Sine => "sine_mlp",
            ArchKind::Fourier => "fourier_mlp",
            ArchKind::Hash => "hash_mlp",
        }
    }

    pub fn activation(self) -> ActivationKind {
        match self {
            ArchKind::Sine => ActivationKind::Sine,
            _ => ActivationKind::Relu,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub archs: Vec<ArchKind>,
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    /// `(width, depth)` cells dropped from the grid.
    pub exclude: Vec<(usize, usize)>,
    pub optimizers: Vec<OptimizerKind>,
    pub epochs: usize,
    pub seed: u64,
    pub fourier_bands: usize,
    pub mipmap_levels: Option<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            archs: vec![ArchKind::Mlp, ArchKind::Sine, ArchKind::Fourier],
            widths: vec![128, 256, 512],
            depths: vec![1, 2, 3],
            exclude: vec![(512, 3)],
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::Rprop],
            epochs: crate::train::DEFAULT_EPOCHS,
            seed: 0,
            fourier_bands: DEFAULT_FOURIER_BANDS,
            mipmap_levels: None,
        }
    }
}

impl SweepGrid {
    /// `(width, depth)` cells in grid order, exclusions removed.
    pub fn size_configs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &depth in &self.depths {
            for &width in &self.widths {
                if !self.exclude.contains(&(width, depth)) {
                    out.push((width, depth));
                }
            }
        }
        out
    }

    pub fn network_spec(&self, arch: ArchKind, width: usize, depth: usize) -> Result<NetworkSpec> {
        let input_dim = if self.mipmap_levels.is_some() { 3 } else { 2 };
        let encoder = match arch {
            ArchKind::Fourier => EncoderConfig::fourier_octaves(self.fourier_bands),
            ArchKind::Hash => EncoderConfig::Hash {
                levels: 8,
                table_size: 1 << 12,
                features_per_entry: 2,
                base_resolution: 4,
                growth: 1.5,
            },
            _ => EncoderConfig::Identity,
        };
        NetworkSpec::new(input_dim, width, depth, arch.activation(), encoder)
    }
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug)]
pub struct SweepReport {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<SweepFailure>,
}

struct SweepJob {
    image_index: usize,
    image_name: String,
    arch: ArchKind,
    width: usize,
    depth: usize,
    optimizer: OptimizerKind,
}

fn image_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Runs the full grid over the manifest images. Individual job failures are
/// recorded and the sweep continues. `timing` fills `train_seconds` (which
/// makes the CSV non-reproducible across runs).
pub fn run_sweep(manifest: &[PathBuf], grid: &SweepGrid, timing: bool) -> Result<SweepReport> {
    if manifest.is_empty() {
        return Err(Error::EmptyCorpus("sweep manifest is empty".into()));
    }
    let images: Vec<(String, Image)> = manifest
        .iter()
        .map(|p| Ok((image_stem(p), load_image(p)?)))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (image_index, (name, _)) in images.iter().enumerate() {
        for &arch in &grid.archs {
            for (width, depth) in grid.size_configs() {
                for &optimizer in &grid.optimizers {
                    jobs.push(SweepJob {
                        image_index,
                        image_name: name.clone(),
                        arch,
                        width,
                        depth,
                        optimizer,
                    });
                }
            }
        }
    }

    let ssim_cfg = SsimConfig::default();
    let results: Vec<std::result::Result<EvalRecord, SweepFailure>> = jobs
        .par_iter()
        .map(|job| {
            let id = format!(
                "{}_{}_{}x{}_{}",
                job.image_name,
                job.arch.tag(),
                job.width,
                job.depth,
                job.optimizer.tag()
            );
            let run = || -> Result<EvalRecord> {
                let spec = grid.network_spec(job.arch, job.width, job.depth)?;
                let optimizer = default_config(job.arch.activation(), job.optimizer);
                let mut train_job = TrainJob::new(spec, optimizer);
                train_job.epochs = grid.epochs;
                train_job.seed = grid.seed;
                train_job.mipmap_levels = grid.mipmap_levels;
                train_job.snapshot_epochs = vec![];
                let image = &images[job.image_index].1;
                let outcome = train(&train_job, image, None)?;
                let ev = evaluate(&outcome.model, image, grid.mipmap_levels, &ssim_cfg)?;
                Ok(EvalRecord {
                    id: id.clone(),
                    image: job.image_name.clone(),
                    arch: job.arch.tag().to_string(),
                    width: job.width,
                    depth: job.depth,
                    optimizer: job.optimizer.tag().to_string(),
                    learning_rate: optimizer.learning_rate(),
                    epochs: grid.epochs,
                    params: ev.params,
                    bpp: ev.bpp,
                    bucket: ev.bucket,
                    mae: ev.quality.mae,
                    mse: ev.quality.mse,
                    psnr_db: ev.quality.psnr_db,
                    ssim: ev.quality.ssim,
                    train_seconds: timing.then_some(outcome.train_seconds),
                })
            };
            run().map_err(|e| SweepFailure {
                id,
                error: e.to_string(),
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    Ok(SweepReport { records, failures })
}

// ── CSV ──────────────────────────────────────────────────────────────

pub const CSV_HEADER: [&str; 17] = [
    "image", "arch", "width", "depth", "optimizer", "lr", "epochs", "params", "bpp", "bucket",
    "mae", "mse", "psnr", "ssim", "seconds", "lpips", "vmaf",
];

/// Writes one record per row in the fixed column order. `lpips`/`vmaf` are
/// reserved columns and always empty; `seconds` is empty unless timing was
/// requested.
pub fn write_csv(records: &[EvalRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    w.write_record(CSV_HEADER)
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    for r in records {
        let row = [
            r.image.clone(),
            r.arch.clone(),
            r.width.to_string(),
            r.depth.to_string(),
            r.optimizer.clone(),
            format!("{}", r.learning_rate),
            r.epochs.to_string(),
            r.params.to_string(),
            format!("{}", r.bpp),
            format!("{}", r.bucket),
            format!("{}", r.mae),
            format!("{}", r.mse),
            format!("{}", r.psnr_db),
            format!("{}", r.ssim),
            r.train_seconds.map(|s| format!("{s}")).unwrap_or_default(),
            String::new(),
            String::new(),
        ];
        w.write_record(&row)
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records back from a sweep CSV; the loss-free counterpart of
/// `write_csv`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Config(format!("csv: {e}")))?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::Config(format!("csv row missing column {i}")))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|e| Error::Config(format!("csv column {i}: {e}")))
        };
        let image = field(0)?.to_string();
        let arch = field(1)?.to_string();
        let width: usize = field(2)?.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let depth: usize = field(3)?.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let optimizer = field(4)?.to_string();
        let seconds = field(14)?;
        out.push(EvalRecord {
            id: format!("{image}_{arch}_{width}x{depth}_{optimizer}"),
            image,
            arch,
            width,
            depth,
            optimizer,
            learning_rate: num(5)?,
            epochs: field(6)?.parse().map_err(|e| Error::Config(format!("{e}")))?,
            params: field(7)?.parse().map_err(|e| Error::Config(format!("{e}")))?,
            bpp: num(8)?,
            bucket: num(9)?,
            mae: num(10)?,
            mse: num(11)?,
            psnr_db: num(12)?,
            ssim: num(13)?,
            train_seconds: if seconds.is_empty() {
                None
            } else {
                Some(seconds.parse().map_err(|e| Error::Config(format!("{e}")))?)
            },
        });
    }
    Ok(out)
}

// ── Bucketed series ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketPoint {
    pub bucket: f64,
    pub mean: f64,
    pub count: usize,
    pub std: f64,
}

pub const SERIES_METRICS: [&str; 4] = ["mae", "mse", "psnr", "ssim"];

pub fn metric_value(record: &EvalRecord, metric: &str) -> Option<f64> {
    match metric {
        "mae" => Some(record.mae),
        "mse" => Some(record.mse),
        "psnr" => Some(record.psnr_db),
        "ssim" => Some(record.ssim),
        _ => None,
    }
}

/// Groups records by bitrate bucket and reduces one metric to
/// mean/count/sample-std per bucket, ascending.
pub fn bucket_series(records: &[EvalRecord], metric: &str) -> Result<Vec<BucketPoint>> {
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for r in records {
        let v = metric_value(r, metric)
            .ok_or_else(|| Error::Config(format!("unknown metric {metric}")))?;
        groups.entry(r.bucket as i64).or_default().push(v);
    }
    Ok(groups
        .into_iter()
        .map(|(bucket, values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            BucketPoint {
                bucket: bucket as f64,
                mean,
                count: n,
                std,
            }
        })
        .collect())
}

/// Writes one `series_{arch}_{metric}.tsv` per architecture and metric into
/// `dir`; returns the written paths.
pub fn write_series_files(records: &[EvalRecord], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut archs: Vec<String> = records.iter().map(|r| r.arch.clone()).collect();
    archs.sort();
    archs.dedup();
    let mut written = Vec::new();
    for arch in &archs {
        let subset: Vec<EvalRecord> = records
            .iter()
            .filter(|r| &r.arch == arch)
            .cloned()
            .collect();
        for metric in SERIES_METRICS {
            let series = bucket_series(&subset, metric)?;
            let path = dir.join(format!("series_{arch}_{metric}.tsv"));
            let mut file = fs::File::create(&path)?;
            writeln!(file, "bucket\tmean\tcount\tstd")?;
            for p in &series {
                writeln!(file, "{}\t{}\t{}\t{}", p.bucket, p.mean, p.count, p.std)?;
            }
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(arch: &str, bucket: f64, psnr: f64) -> EvalRecord {
        EvalRecord {
            id: "t".into(),
            image: "img".into(),
            arch: arch.into(),
            width: 128,
            depth: 1,
            optimizer: "adam".into(),
            learning_rate: 1e-3,
            epochs: 50,
            params: 771,
            bpp: bucket + 0.3,
            bucket,
            mae: 1.0,
            mse: 2.0,
            psnr_db: psnr,
            ssim: 0.9,
            train_seconds: None,
        }
    }

    #[test]
    fn grid_has_eight_size_configs() {
        let grid = SweepGrid::default();
        let configs = grid.size_configs();
        assert_eq!(configs.len(), 8);
        assert!(!configs.contains(&(512, 3)));
        assert!(configs.contains(&(512, 2)));
    }

    #[test]
    fn bucketed_mean_of_single_record_is_the_record() {
        let records = vec![record("mlp", 2.0, 30.0)];
        let series = bucket_series(&records, "psnr").unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].mean, 30.0);
        assert_eq!(series[0].count, 1);
        assert_eq!(series[0].std, 0.0);
    }

    #[test]
    fn bucket_series_groups_and_sorts() {
        let records = vec![
            record("mlp", 4.0, 30.0),
            record("mlp", 2.0, 20.0),
            record("mlp", 4.0, 34.0),
        ];
        let series = bucket_series(&records, "psnr").unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].bucket, 2.0);
        assert_eq!(series[1].bucket, 4.0);
        assert_eq!(series[1].mean, 32.0);
        assert_eq!(series[1].count, 2);
        let want_std = ((30.0f64 - 32.0).powi(2) + (34.0f64 - 32.0).powi(2)).sqrt();
        assert!((series[1].std - want_std).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let records = vec![
            record("mlp", 2.0, 27.123456789012345),
            record("fourier_mlp", 4.0, f64::INFINITY),
        ];
        write_csv(&records, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].psnr_db, records[0].psnr_db);
        assert!(back[1].psnr_db.is_infinite());
        assert_eq!(back[0].bucket, 2.0);

        // re-derived series from the parsed CSV match the originals exactly
        let a = bucket_series(&records, "psnr").unwrap();
        let b = bucket_series(&back, "psnr").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn series_files_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            record("mlp", 2.0, 20.0),
            record("mlp", 2.0, 24.0),
            record("sine_mlp", 2.0, 28.0),
        ];
        let d1 = dir.path().join("a");
        let d2 = dir.path().join("b");
        let w1 = write_series_files(&records, &d1).unwrap();
        let w2 = write_series_files(&records, &d2).unwrap();
        assert_eq!(w1.len(), 8); // 2 archs x 4 metrics
        for (p1, p2) in w1.iter().zip(&w2) {
            assert_eq!(
                std::fs::read(p1).unwrap(),
                std::fs::read(p2).unwrap()
            );
        }
    }
}

//! Corpus diversity sampling: Laplacian-variance indexing and
//! regular-interval selection over the empirical CDF.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::load_image;
use crate::metrics::lapv;

/// Corpus entries sorted ascending by Laplacian variance (ties by path).
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    entries: Vec<(PathBuf, f64)>,
}

impl CorpusIndex {
    pub fn entries(&self) -> &[(PathBuf, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Scores every readable image under `dir` (non-recursive) by `lapv`.
/// Unreadable files are reported in the second return value and skipped.
pub fn index_corpus(dir: impl AsRef<Path>) -> Result<(CorpusIndex, Vec<(PathBuf, String)>)> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no readable images in {}",
            dir.display()
        )));
    }

    let scored: Vec<std::result::Result<(PathBuf, f64), (PathBuf, String)>> = paths
        .par_iter()
        .map(|p| match load_image(p).and_then(|img| lapv(&img)) {
            Ok(score) => Ok((p.clone(), score)),
            Err(e) => Err((p.clone(), e.to_string())),
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for item in scored {
        match item {
            Ok(entry) => entries.push(entry),
            Err(miss) => skipped.push(miss),
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "all {} candidate files in {} were unreadable",
            skipped.len(),
            dir.display()
        )));
    }
    entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    Ok((CorpusIndex { entries }, skipped))
}

/// Picks `n` entries at regular quantile intervals of the lapv-sorted index:
/// rank `floor((k + 0.5) * size / n)` for `k = 0..n-1`, advancing past any
/// rank already taken.
pub fn select_regular(index: &CorpusIndex, n: usize) -> Result<Vec<PathBuf>> {
    let size = index.len();
    if n == 0 || n > size {
        return Err(Error::Config(format!(
            "cannot select {n} from a corpus of {size}"
        )));
    }
    let mut used = vec![false; size];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut rank = (((k as f64 + 0.5) * size as f64) / n as f64).floor() as usize;
        rank = rank.min(size - 1);
        while used[rank] {
            rank = (rank + 1) % size;
        }
        used[rank] = true;
        out.push(index.entries[rank].0.clone());
    }
    Ok(out)
}

/// Midpoint-rank positions used by `select_regular`, exposed for reporting.
pub fn selection_ranks(size: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|k| ((((k as f64 + 0.5) * size as f64) / n as f64).floor() as usize).min(size - 1))
        .collect()
}

/// Writes `path<TAB>lapv` lines for the given selection, in selection order.
pub fn write_manifest(
    index: &CorpusIndex,
    selection: &[PathBuf],
    out: impl AsRef<Path>,
) -> Result<()> {
    let mut file = fs::File::create(out.as_ref())?;
    for path in selection {
        let lapv = index
            .entries
            .iter()
            .find(|(p, _)| p == path)
            .map(|(_, s)| *s)
            .ok_or_else(|| Error::Config(format!("{} not in index", path.display())))?;
        writeln!(file, "{}\t{}", path.display(), lapv)?;
    }
    Ok(())
}

/// Reads image paths back from a manifest written by `write_manifest`.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let path = line.split('\t').next().unwrap();
        out.push(PathBuf::from(path));
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "manifest {} has no entries",
            path.as_ref().display()
        )));
    }
    Ok(out)
}

//! Class-per-directory ingestion and the stratified train/val/test split.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::image::{decode_image, ImageBuffer};
use crate::error::{Error, Result};
use crate::tensor::Rng;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "nnim"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub path: PathBuf,
    pub label: usize,
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    pub entries: Vec<Entry>,
    pub class_names: Vec<String>,
}

impl DatasetIndex {
    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    /// `counts[class][split]` with splits ordered train, val, test.
    pub fn split_counts(&self) -> Vec<[usize; 3]> {
        let mut counts = vec![[0usize; 3]; self.class_names.len()];
        for e in &self.entries {
            let slot = match e.split {
                Some(Split::Train) => 0,
                Some(Split::Val) => 1,
                Some(Split::Test) => 2,
                None => continue,
            };
            counts[e.label][slot] += 1;
        }
        counts
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanReport {
    /// Files with an image extension that could not be opened.
    pub skipped: usize,
}

/// Lists `root/<Class>/*.{png,jpg,jpeg,nnim}`. Classes are labelled in sorted
/// name order; entries are ordered by class then file name.
pub fn scan_dataset(root: &Path) -> Result<(DatasetIndex, ScanReport)> {
    let mut class_dirs: Vec<(String, PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::Data(format!("cannot read dataset root {}: {e}", root.display())))?
        .filter_map(|d| d.ok())
        .filter(|d| d.path().is_dir())
        .map(|d| (d.file_name().to_string_lossy().into_owned(), d.path()))
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Data(format!("no class directories under {}", root.display())));
    }
    let mut report = ScanReport::default();
    let mut entries = Vec::new();
    let mut class_names = Vec::new();
    for (label, (name, dir)) in class_dirs.into_iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|d| d.ok())
            .map(|d| d.path())
            .filter(|p| p.is_file())
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort();
        let before = entries.len();
        for path in files {
            if fs::File::open(&path).is_err() {
                log::warn!("skipping unreadable file {}", path.display());
                report.skipped += 1;
                continue;
            }
            entries.push(Entry { path, label, split: None });
        }
        if entries.len() == before {
            return Err(Error::Data(format!("class directory {} contains no images", dir.display())));
        }
        class_names.push(name);
    }
    Ok((DatasetIndex { entries, class_names }, report))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    /// `(train, val, test)` sizes for a class of `n`: val and test are
    /// floored, the remainder goes to train.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let val = (self.val * n as f64 + 1e-9).floor() as usize;
        let test = (self.test * n as f64 + 1e-9).floor() as usize;
        (n - val - test, val, test)
    }
}

/// Per class: seeded shuffle, then the first `floor(val·n)` go to val, the
/// next `floor(test·n)` to test, the rest to train. Entry order is kept.
pub fn stratified_split(index: &DatasetIndex, ratios: SplitRatios, seed: u64) -> Result<DatasetIndex> {
    let total = ratios.train + ratios.val + ratios.test;
    if (total - 1.0).abs() > 1e-9 || ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 {
        return Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got {total}")));
    }
    let mut out = index.clone();
    for label in 0..index.class_names.len() {
        let mut members: Vec<usize> = (0..index.entries.len()).filter(|&i| index.entries[i].label == label).collect();
        if members.len() < 3 {
            return Err(Error::Data(format!(
                "class {:?} has {} samples; at least 3 are needed to split",
                index.class_names[label],
                members.len()
            )));
        }
        Rng::derive(seed, label as u64, 0).shuffle(&mut members);
        let (_, val, test) = ratios.counts(members.len());
        for (k, &i) in members.iter().enumerate() {
            out.entries[i].split = Some(if k < val {
                Split::Val
            } else if k < val + test {
                Split::Test
            } else {
                Split::Train
            });
        }
    }
    Ok(out)
}

/// Writes `path,label,split` with a header line.
pub fn write_index_csv(index: &DatasetIndex, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(["path", "label", "split"])?;
    for e in &index.entries {
        let split = e.split.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([e.path.to_string_lossy().as_ref(), &e.label.to_string(), &split])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a split index. Class names are recovered from each label's parent
/// directory name.
pub fn read_index_csv(path: &Path) -> Result<DatasetIndex> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label", "split"] {
        return Err(Error::Data(format!("{}: expected header path,label,split", path.display())));
    }
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let label = rec[1]
            .parse::<usize>()
            .map_err(|_| Error::Data(format!("bad label {:?} in {}", &rec[1], path.display())))?;
        let split = if rec[2].is_empty() { None } else { Some(rec[2].parse()?) };
        entries.push(Entry { path: PathBuf::from(&rec[0]), label, split });
    }
    let num_classes = entries.iter().map(|e| e.label + 1).max().unwrap_or(0);
    let class_names = (0..num_classes)
        .map(|k| {
            entries
                .iter()
                .find(|e| e.label == k)
                .and_then(|e| e.path.parent())
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("class_{k}"))
        })
        .collect();
    Ok(DatasetIndex { entries, class_names })
}

/// Decoded images of one split, in index order.
#[derive(Clone, Debug)]
pub struct LoadedSplit {
    pub images: Vec<ImageBuffer>,
    pub labels: Vec<usize>,
}

impl LoadedSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn load_split(index: &DatasetIndex, split: Split) -> Result<LoadedSplit> {
    let entries: Vec<&Entry> = index.split_entries(split).collect();
    let images = entries.par_iter().map(|e| decode_image(&e.path)).collect::<Result<Vec<_>>>()?;
    Ok(LoadedSplit { images, labels: entries.iter().map(|e| e.label).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_index(sizes: &[usize]) -> DatasetIndex {
        let mut entries = Vec::new();
        for (label, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                entries.push(Entry { path: PathBuf::from(format!("c{label}/{i:05}.png")), label, split: None });
            }
        }
        DatasetIndex { entries, class_names: (0..sizes.len()).map(|k| format!("c{k}")).collect() }
    }

    #[test]
    fn floor_rule_counts() {
        let r = SplitRatios::default();
        assert_eq!(r.counts(1250), (1000, 125, 125));
        assert_eq!(r.counts(1125), (901, 112, 112));
        assert_eq!(r.counts(1100), (880, 110, 110));
        assert_eq!(r.counts(30), (24, 3, 3));
        assert_eq!(r.counts(3), (3, 0, 0));
    }

    #[test]
    fn too_small_class_errors() {
        assert!(matches!(stratified_split(&fake_index(&[5, 2]), SplitRatios::default(), 0), Err(Error::Data(_))));
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let bad = SplitRatios { train: 0.8, val: 0.1, test: 0.2 };
        assert!(matches!(stratified_split(&fake_index(&[10]), bad, 0), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_change_assignment_not_counts() {
        let idx = fake_index(&[40, 37]);
        let a = stratified_split(&idx, SplitRatios::default(), 1).unwrap();
        let b = stratified_split(&idx, SplitRatios::default(), 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.split_counts(), b.split_counts());
        assert_eq!(a, stratified_split(&idx, SplitRatios::default(), 1).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let idx = stratified_split(&fake_index(&[10, 12]), SplitRatios::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.csv");
        write_index_csv(&idx, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("path,label,split\nc0/00000.png,0,"));
        assert_eq!(read_index_csv(&p).unwrap(), idx);
    }
}

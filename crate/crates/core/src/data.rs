//! Datasets: synthetic Moons, delimited-file loading and deterministic splits.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{KanError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { labels: Vec<usize>, n_classes: usize },
    /// Real-valued targets for reconstruction tasks.
    Values(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Targets,
    /// Original label strings, indexed by class id.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn classification(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (0..n_classes).map(|c| c.to_string()).collect();
        let ds = Dataset {
            features,
            targets: Targets::Classes { labels, n_classes },
            class_names: names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    pub fn n_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classes { n_classes, .. } => Some(*n_classes),
            Targets::Values(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let width = self.width();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != width {
                return Err(KanError::Dataset(format!("row {i} has {} features, expected {width}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(KanError::Dataset(format!("row {i} contains a non-finite value")));
            }
        }
        match &self.targets {
            Targets::Classes { labels, n_classes } => {
                if labels.len() != self.len() {
                    return Err(KanError::Dataset("label count differs from row count".into()));
                }
                if let Some(l) = labels.iter().find(|&&l| l >= *n_classes) {
                    return Err(KanError::Dataset(format!("label {l} >= class count {n_classes}")));
                }
            }
            Targets::Values(v) => {
                if v.len() != self.len() {
                    return Err(KanError::Dataset("target count differs from row count".into()));
                }
            }
        }
        Ok(())
    }

    /// Per-column mean and population standard deviation. Constant columns
    /// get std 1 so standardization stays finite.
    pub fn feature_stats(&self) -> Vec<FeatureStats> {
        let n = self.len().max(1) as f64;
        (0..self.width())
            .map(|j| {
                let mean = self.features.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = self.features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                FeatureStats {
                    mean,
                    std: if std > 0.0 { std } else { 1.0 },
                }
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let targets = match &self.targets {
            Targets::Classes { labels, n_classes } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
            Targets::Values(v) => Targets::Values(indices.iter().map(|&i| v[i].clone()).collect()),
        };
        Dataset {
            features,
            targets,
            class_names: self.class_names.clone(),
        }
    }
}

/// Two interleaving half circles: class 0 on the upper unit semicircle,
/// class 1 on a lower semicircle shifted by `(1, -0.5)`, with Gaussian noise
/// of standard deviation `noise` on both coordinates. Samples are shuffled.
pub fn gen_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(KanError::Dataset("moons needs at least 2 samples".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(KanError::Dataset(format!("noise {noise} must be non-negative")));
    }
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let arc = |k: usize, count: usize| {
        if count <= 1 {
            0.0
        } else {
            PI * k as f64 / (count - 1) as f64
        }
    };
    let mut rows = Vec::with_capacity(n);
    for k in 0..n_upper {
        let t = arc(k, n_upper);
        rows.push((vec![t.cos(), t.sin()], 0));
    }
    for k in 0..n_lower {
        let t = arc(k, n_lower);
        rows.push((vec![1.0 - t.cos(), 0.5 - t.sin()], 1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    if noise > 0.0 {
        let dist = Normal::new(0.0, noise).map_err(|e| KanError::Dataset(e.to_string()))?;
        for (x, _) in &mut rows {
            for v in x.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }
    }
    let (features, labels) = rows.into_iter().unzip();
    Dataset::classification(features, labels, 2)
}

/// Which column of a delimited file holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Column name from the header row.
    Name(String),
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            label: LabelColumn::Last,
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Loads a delimited file of numeric features and one label column. Label
/// strings become dense class ids in first-appearance order.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| KanError::io(path, e))?;
    parse_csv(&text, &path.display().to_string(), opts)
}

pub fn parse_csv(text: &str, source: &str, opts: &CsvOptions) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| KanError::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut label_idx: Option<usize> = None;
    let mut width: Option<usize> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if opts.has_header && header.is_none() {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let cols = record.len();
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(parse_err(line, format!("expected {w} columns, found {cols}")));
            }
            _ => {}
        }
        let li = match label_idx {
            Some(i) => i,
            None => {
                let i = resolve_label(&opts.label, header.as_deref(), cols).map_err(|m| parse_err(line, m))?;
                label_idx = Some(i);
                i
            }
        };
        let mut row = Vec::with_capacity(cols - 1);
        for (j, cell) in record.iter().enumerate() {
            if j == li {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: non-numeric value {cell:?}", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value {cell:?}", j + 1)));
            }
            row.push(v);
        }
        let label = record.get(li).unwrap_or_default().to_string();
        let next = ids.len();
        let id = *ids.entry(label.clone()).or_insert_with(|| {
            names.push(label);
            next
        });
        features.push(row);
        labels.push(id);
    }
    if features.is_empty() {
        return Err(KanError::Dataset(format!("{source}: no data rows")));
    }
    let n_classes = names.len();
    let ds = Dataset {
        features,
        targets: Targets::Classes { labels, n_classes },
        class_names: names,
    };
    ds.validate()?;
    Ok(ds)
}

fn resolve_label(label: &LabelColumn, header: Option<&[String]>, cols: usize) -> std::result::Result<usize, String> {
    let idx = match label {
        LabelColumn::Last => cols.checked_sub(1).ok_or("empty row")?,
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => header
            .ok_or_else(|| format!("label column {name:?} needs a header row"))?
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("no column named {name:?}"))?,
    };
    if idx >= cols || cols < 2 {
        return Err(format!("label column {idx} invalid for {cols} columns"));
    }
    Ok(idx)
}

/// Deterministic shuffled split; `train_fraction` of the samples go to the
/// first set. Stratification splits every class separately.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64, stratified: bool) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, train_fraction, seed, stratified)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(KanError::Dataset(format!("split fraction {train_fraction} must be in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match (stratified, &ds.targets) {
        (true, Targets::Classes { labels, n_classes }) => {
            let mut g = vec![Vec::new(); *n_classes];
            for (i, &l) in labels.iter().enumerate() {
                g[l].push(i);
            }
            if let Some(c) = g.iter().position(|m| m.len() == 1) {
                return Err(KanError::Dataset(format!(
                    "class {c} has fewer than 2 samples; cannot stratify"
                )));
            }
            g
        }
        (true, Targets::Values(_)) => {
            return Err(KanError::Dataset("stratified split needs class labels".into()));
        }
        (false, _) => vec![(0..ds.len()).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut members in groups {
        members.shuffle(&mut rng);
        let k = (members.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    if stratified {
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
    }
    Ok((train, test))
}

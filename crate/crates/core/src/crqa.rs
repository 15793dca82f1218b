//! Cross-recurrence quantification of paired series: delay embedding,
//! binary recurrence matrices, diagonal-line histograms and their entropy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CrqaError {
    #[error("series of length {len} too short for embedding m={m}, tau={tau}")]
    TooShort { len: usize, m: usize, tau: usize },
    #[error("invalid CRQA config: {0}")]
    InvalidConfig(String),
    #[error("series {a:?} and {b:?} share {shared} dates; at least 2 are required")]
    TooFewSharedDates { a: String, b: String, shared: usize },
    #[error("at least 2 series are required, got {0}")]
    TooFewSeries(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    Max,
}

impl Norm {
    pub fn key(self) -> &'static str {
        match self {
            Norm::Euclidean => "euclidean",
            Norm::Max => "max",
        }
    }

    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Max => diffs.fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    /// Absolute threshold.
    Fixed(f64),
    /// Fraction of the standard deviation of the concatenated (possibly
    /// normalized) pair. A zero deviation falls back to the fraction itself.
    StdFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrqaConfig {
    pub embed_dim: usize,
    pub delay: usize,
    pub radius: Radius,
    pub norm: Norm,
    pub l_min: usize,
    pub normalize_input: bool,
}

impl Default for CrqaConfig {
    fn default() -> Self {
        Self {
            embed_dim: 1,
            delay: 1,
            radius: Radius::StdFraction(0.1),
            norm: Norm::Euclidean,
            l_min: 2,
            normalize_input: true,
        }
    }
}

impl CrqaConfig {
    pub fn validate(&self) -> Result<(), CrqaError> {
        let bad = |m: &str| Err(CrqaError::InvalidConfig(m.to_string()));
        if self.embed_dim < 1 {
            return bad("embed_dim must be at least 1");
        }
        if self.delay < 1 {
            return bad("delay must be at least 1");
        }
        let r = match self.radius {
            Radius::Fixed(r) | Radius::StdFraction(r) => r,
        };
        if !(r > 0.0 && r.is_finite()) {
            return bad("radius must be positive");
        }
        if self.l_min < 2 {
            return bad("l_min must be at least 2");
        }
        Ok(())
    }
}

/// Delay embedding: point `i` is `(x_i, x_{i+tau}, ..., x_{i+(m-1)tau})`.
pub fn embed(series: &[f64], m: usize, tau: usize) -> Result<Vec<Vec<f64>>, CrqaError> {
    let span = (m.max(1) - 1) * tau;
    if m == 0 || tau == 0 || series.len() < span + 1 {
        return Err(CrqaError::TooShort { len: series.len(), m, tau });
    }
    Ok((0..series.len() - span)
        .map(|i| (0..m).map(|j| series[i + j * tau]).collect())
        .collect())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-score with population standard deviation; a constant series maps to
/// all zeros.
pub fn z_score(series: &[f64]) -> Vec<f64> {
    let (mean, std) = mean_std(series);
    if std == 0.0 {
        return vec![0.0; series.len()];
    }
    series.iter().map(|v| (v - mean) / std).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrenceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl RecurrenceMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn recurrence_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn recurrence_rate(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.recurrence_count() as f64 / self.data.len() as f64
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// One line per row: `rows cols` header, then alternating run lengths
    /// starting with a (possibly empty) run of zeros.
    pub fn to_rle(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let mut runs = Vec::new();
            let mut current = false;
            let mut len = 0usize;
            for j in 0..self.cols {
                if self.get(i, j) == current {
                    len += 1;
                } else {
                    runs.push(len);
                    current = !current;
                    len = 1;
                }
            }
            runs.push(len);
            let line: Vec<String> = runs.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn resolve_radius(radius: Radius, x: &[f64], y: &[f64]) -> f64 {
    match radius {
        Radius::Fixed(r) => r,
        Radius::StdFraction(frac) => {
            let joined: Vec<f64> = x.iter().chain(y).copied().collect();
            let (_, std) = mean_std(&joined);
            if std > 0.0 {
                frac * std
            } else {
                frac
            }
        }
    }
}

fn prepare(series: &[f64], config: &CrqaConfig) -> Vec<f64> {
    if config.normalize_input {
        z_score(series)
    } else {
        series.to_vec()
    }
}

/// Cross-recurrence matrix and the radius actually used.
pub fn cross_recurrence(x: &[f64], y: &[f64], config: &CrqaConfig) -> Result<(RecurrenceMatrix, f64), CrqaError> {
    config.validate()?;
    let (xn, yn) = (prepare(x, config), prepare(y, config));
    let ex = embed(&xn, config.embed_dim, config.delay)?;
    let ey = embed(&yn, config.embed_dim, config.delay)?;
    let eps = resolve_radius(config.radius, &xn, &yn);
    let r = RecurrenceMatrix::from_fn(ex.len(), ey.len(), |i, j| config.norm.distance(&ex[i], &ey[j]) <= eps);
    Ok((r, eps))
}

/// Recurrence of a series with itself. Computes each unordered pair once and
/// mirrors it; the main diagonal is kept.
pub fn auto_recurrence(x: &[f64], config: &CrqaConfig) -> Result<(RecurrenceMatrix, f64), CrqaError> {
    config.validate()?;
    let xn = prepare(x, config);
    let ex = embed(&xn, config.embed_dim, config.delay)?;
    let eps = resolve_radius(config.radius, &xn, &xn);
    let n = ex.len();
    let mut data = vec![false; n * n];
    for i in 0..n {
        for j in i..n {
            let hit = config.norm.distance(&ex[i], &ex[j]) <= eps;
            data[i * n + j] = hit;
            data[j * n + i] = hit;
        }
    }
    Ok((RecurrenceMatrix { rows: n, cols: n, data }, eps))
}

/// Maximal runs of ones along every diagonal (offsets `-(rows-1)..=cols-1`),
/// keeping runs of at least `l_min`.
pub fn diagonal_histogram(r: &RecurrenceMatrix, l_min: usize) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    let (rows, cols) = (r.rows as isize, r.cols as isize);
    for offset in -(rows - 1)..cols {
        let (mut i, mut j) = if offset < 0 { (-offset, 0) } else { (0, offset) };
        let mut run = 0usize;
        let mut flush = |run: &mut usize| {
            if *run >= l_min {
                *hist.entry(*run).or_insert(0) += 1;
            }
            *run = 0;
        };
        while i < rows && j < cols {
            if r.get(i as usize, j as usize) {
                run += 1;
            } else {
                flush(&mut run);
            }
            i += 1;
            j += 1;
        }
        flush(&mut run);
    }
    hist
}

/// Shannon entropy in nats of the line-length distribution.
pub fn shannon_entropy(hist: &BTreeMap<usize, usize>) -> f64 {
    let total: usize = hist.values().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = hist
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrqaMetrics {
    pub recurrence_rate: f64,
    /// Share of recurrent points lying on diagonal lines of length >= l_min.
    pub determinism: f64,
    pub entropy: f64,
    pub epsilon: f64,
    pub n_points: usize,
}

pub fn metrics_of(r: &RecurrenceMatrix, l_min: usize, epsilon: f64, n_points: usize) -> CrqaMetrics {
    let hist = diagonal_histogram(r, l_min);
    let on_lines: usize = hist.iter().map(|(l, c)| l * c).sum();
    let recurrent = r.recurrence_count();
    CrqaMetrics {
        recurrence_rate: r.recurrence_rate(),
        determinism: if recurrent == 0 { 0.0 } else { on_lines as f64 / recurrent as f64 },
        entropy: shannon_entropy(&hist),
        epsilon,
        n_points,
    }
}

pub fn crqa(x: &[f64], y: &[f64], config: &CrqaConfig) -> Result<CrqaMetrics, CrqaError> {
    let (r, eps) = cross_recurrence(x, y, config)?;
    Ok(metrics_of(&r, config.l_min, eps, x.len().min(y.len())))
}

pub fn auto_crqa(x: &[f64], config: &CrqaConfig) -> Result<CrqaMetrics, CrqaError> {
    let (r, eps) = auto_recurrence(x, config)?;
    Ok(metrics_of(&r, config.l_min, eps, x.len()))
}

pub type DatedSeries = BTreeMap<NaiveDate, f64>;

/// Values of both series on the dates they share, in date order.
pub fn align(a: &DatedSeries, b: &DatedSeries) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .filter_map(|(d, va)| b.get(d).map(|vb| (*va, *vb)))
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub series_a: String,
    pub series_b: String,
    pub metrics: CrqaMetrics,
}

/// Metrics for every pair `(i, j)` with `i < j` in input order.
pub fn crqa_pairwise(series: &[(String, DatedSeries)], config: &CrqaConfig) -> Result<Vec<PairMetrics>, CrqaError> {
    config.validate()?;
    if series.len() < 2 {
        return Err(CrqaError::TooFewSeries(series.len()));
    }
    let pairs: Vec<(usize, usize)> = (0..series.len())
        .flat_map(|i| (i + 1..series.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let (na, sa) = &series[i];
            let (nb, sb) = &series[j];
            let (x, y) = align(sa, sb);
            if x.len() < 2 {
                return Err(CrqaError::TooFewSharedDates { a: na.clone(), b: nb.clone(), shared: x.len() });
            }
            Ok(PairMetrics {
                series_a: na.clone(),
                series_b: nb.clone(),
                metrics: crqa(&x, &y, config)?,
            })
        })
        .collect()
}

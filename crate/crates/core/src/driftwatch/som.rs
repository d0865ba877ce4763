use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DriftError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomParams {
    pub iterations: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// `None` means `max(rows, cols) / 2`.
    pub radius_start: Option<f64>,
    pub radius_end: f64,
}

impl Default for SomParams {
    fn default() -> Self {
        Self {
            iterations: 1000,
            lr_start: 0.5,
            lr_end: 0.01,
            radius_start: None,
            radius_end: 0.5,
        }
    }
}

/// How codebook vectors are seeded before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SomInit {
    /// Node `i` starts at pattern `i mod len`.
    Patterns,
    /// Each node starts at a pattern drawn with the training seed.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Som {
    pub rows: usize,
    pub cols: usize,
    codebook: Vec<Vec<f64>>,
    pub labels: Option<Vec<Option<String>>>,
    pub params: SomParams,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl Som {
    pub fn from_codebook(
        rows: usize,
        cols: usize,
        codebook: Vec<Vec<f64>>,
    ) -> Result<Self, DriftError> {
        if rows * cols == 0 || codebook.len() != rows * cols {
            return Err(DriftError::DimensionMismatch {
                expected: rows * cols,
                got: codebook.len(),
            });
        }
        let dim = codebook[0].len();
        if let Some(bad) = codebook.iter().find(|c| c.len() != dim) {
            return Err(DriftError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if codebook.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DriftError::NonFinite);
        }
        Ok(Self {
            rows,
            cols,
            codebook,
            labels: None,
            params: SomParams::default(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.codebook.len()
    }

    pub fn dim(&self) -> usize {
        self.codebook[0].len()
    }

    pub fn codebook(&self) -> &[Vec<f64>] {
        &self.codebook
    }

    /// Grid coordinates of node `i` (row-major).
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    fn grid_distance(&self, a: usize, b: usize) -> f64 {
        let ((ra, ca), (rb, cb)) = (self.position(a), self.position(b));
        ((ra as f64 - rb as f64).powi(2) + (ca as f64 - cb as f64).powi(2)).sqrt()
    }

    /// Best-matching unit and its distance; ties go to the lowest index.
    pub fn classify(&self, pattern: &[f64]) -> Result<(usize, f64), DriftError> {
        if pattern.len() != self.dim() {
            return Err(DriftError::DimensionMismatch {
                expected: self.dim(),
                got: pattern.len(),
            });
        }
        Ok(self.bmu(pattern))
    }

    fn bmu(&self, pattern: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.codebook.iter().enumerate() {
            let d = distance(c, pattern);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Online SOM training. Each iteration draws a pattern, finds its BMU and
/// pulls every node within the current radius towards the pattern with a
/// Gaussian weight. Learning rate and radius decay exponentially. A final
/// batch pass moves each node to the mean of the patterns it wins, which
/// makes degenerate grids converge to exact centroids.
pub fn som_train(
    patterns: &[Vec<f64>],
    rows: usize,
    cols: usize,
    params: SomParams,
    init: SomInit,
    seed: u64,
) -> Result<Som, DriftError> {
    if patterns.is_empty() {
        return Err(DriftError::EmptyPatternSet);
    }
    let dim = patterns[0].len();
    if let Some(bad) = patterns.iter().find(|p| p.len() != dim) {
        return Err(DriftError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows * cols;
    let codebook = match init {
        SomInit::Patterns => (0..n)
            .map(|i| patterns[i % patterns.len()].clone())
            .collect(),
        SomInit::Sampled => (0..n)
            .map(|_| patterns[rng.random_range(0..patterns.len())].clone())
            .collect(),
    };
    let mut som = Som::from_codebook(rows, cols, codebook)?;
    som.params = params;

    let r0 = params
        .radius_start
        .unwrap_or(rows.max(cols) as f64 / 2.0)
        .max(params.radius_end);
    let steps = params.iterations.max(1) as f64;
    for t in 0..params.iterations {
        let frac = t as f64 / steps;
        let lr = params.lr_start * (params.lr_end / params.lr_start).powf(frac);
        let radius = r0 * (params.radius_end / r0).powf(frac);
        let x = &patterns[rng.random_range(0..patterns.len())];
        let (bmu, _) = som.bmu(x);
        for i in 0..n {
            let g = som.grid_distance(bmu, i);
            if g > radius {
                continue;
            }
            let h = lr * (-(g * g) / (2.0 * radius * radius)).exp();
            for (c, v) in som.codebook[i].iter_mut().zip(x) {
                *c += h * (v - *c);
            }
        }
    }

    if params.iterations > 0 {
        let mut sums = vec![vec![0.0; dim]; n];
        let mut counts = vec![0usize; n];
        for x in patterns {
            let (b, _) = som.bmu(x);
            counts[b] += 1;
            sums[b].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for i in (0..n).filter(|&i| counts[i] > 0) {
            som.codebook[i] = sums[i].iter().map(|s| s / counts[i] as f64).collect();
        }
    }
    Ok(som)
}

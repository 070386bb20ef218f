//! Skip-gram with negative sampling, shared by the document and topic trainers.
//!
//! Weights live in [`SharedMatrix`], a row-major table of `f32` stored as
//! relaxed atomics. Single-threaded training over it is bit-reproducible;
//! concurrent training performs lock-free racy updates (Hogwild style) whose
//! outcome depends on scheduling.

use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;

pub struct SharedMatrix {
    dim: usize,
    data: Vec<AtomicU32>,
}

impl SharedMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        SharedMatrix {
            dim,
            data: (0..rows * dim).map(|_| AtomicU32::new(0)).collect(),
        }
    }

    pub fn from_vec(dim: usize, values: &[f32]) -> Self {
        SharedMatrix {
            dim,
            data: values.iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn get(&self, row: usize, out: &mut [f32]) {
        let base = row * self.dim;
        for (k, o) in out.iter_mut().enumerate() {
            *o = f32::from_bits(self.data[base + k].load(Ordering::Relaxed));
        }
    }

    #[inline]
    pub fn set(&self, row: usize, v: &[f32]) {
        let base = row * self.dim;
        for (k, x) in v.iter().enumerate() {
            self.data[base + k].store(x.to_bits(), Ordering::Relaxed);
        }
    }

    /// `row += scale * v`
    #[inline]
    pub fn add_scaled(&self, row: usize, scale: f32, v: &[f32]) {
        let base = row * self.dim;
        for (k, x) in v.iter().enumerate() {
            let cell = &self.data[base + k];
            let cur = f32::from_bits(cell.load(Ordering::Relaxed));
            cell.store((cur + scale * x).to_bits(), Ordering::Relaxed);
        }
    }

    #[cfg(test)]
    fn dot_row(&self, row: usize, v: &[f32]) -> f32 {
        let base = row * self.dim;
        let mut s = 0f32;
        for (k, x) in v.iter().enumerate() {
            s += f32::from_bits(self.data[base + k].load(Ordering::Relaxed)) * x;
        }
        s
    }

    pub fn row_vec(&self, row: usize) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        self.get(row, &mut v);
        v
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.data
            .iter()
            .map(|c| f32::from_bits(c.load(Ordering::Relaxed)))
            .collect()
    }

    /// Append rows, keeping existing contents.
    pub fn grow(&mut self, extra_rows: usize) {
        self.data
            .extend((0..extra_rows * self.dim).map(|_| AtomicU32::new(0)));
    }
}

/// Sampling distribution proportional to `weight^0.75`.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    pub fn new(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .into_iter()
            .map(|w| {
                acc += w.max(0.0).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.last().is_none_or(|t| *t <= 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("empty noise table");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|c| *c <= u)
            .min(self.cumulative.len() - 1)
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    if x > 8.0 {
        1.0
    } else if x < -8.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Scratch buffers reused across updates.
pub struct Scratch {
    h: Vec<f32>,
    o: Vec<f32>,
    grad: Vec<f32>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Scratch {
            h: vec![0.0; dim],
            o: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }
}

/// One positive pair plus `negatives` noise samples. Returns the logistic loss.
#[allow(clippy::too_many_arguments)]
pub fn train_pair<R: Rng + ?Sized>(
    input: &SharedMatrix,
    input_row: usize,
    output: &SharedMatrix,
    target: usize,
    noise: &NoiseTable,
    negatives: usize,
    lr: f32,
    rng: &mut R,
    scratch: &mut Scratch,
) -> f32 {
    train_pair_excluding(input, input_row, output, target, None, noise, negatives, lr, rng, scratch)
}

/// As [`train_pair`], but noise samples equal to `exclude` are skipped too.
/// Node embeddings pass the centre node here: input and output rows index
/// the same nodes, and drawing the centre as its own negative would push
/// nodes with shared contexts apart.
#[allow(clippy::too_many_arguments)]
pub fn train_pair_excluding<R: Rng + ?Sized>(
    input: &SharedMatrix,
    input_row: usize,
    output: &SharedMatrix,
    target: usize,
    exclude: Option<usize>,
    noise: &NoiseTable,
    negatives: usize,
    lr: f32,
    rng: &mut R,
    scratch: &mut Scratch,
) -> f32 {
    let Scratch { h, o, grad } = scratch;
    input.get(input_row, h);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0f32;
    for n in 0..=negatives {
        let (row, label) = if n == 0 {
            (target, 1.0f32)
        } else {
            let s = noise.sample(rng);
            if s == target || Some(s) == exclude {
                continue;
            }
            (s, 0.0f32)
        };
        // Work on a local copy of the output row so the arithmetic vectorises.
        output.get(row, o);
        let score: f32 = h.iter().zip(o.iter()).map(|(a, b)| a * b).sum();
        let p = sigmoid(score);
        loss -= if label > 0.5 { p.max(1e-7).ln() } else { (1.0 - p).max(1e-7).ln() };
        let g = (label - p) * lr;
        for ((gr, ov), hv) in grad.iter_mut().zip(o.iter_mut()).zip(h.iter()) {
            *gr += g * *ov;
            *ov += g * hv;
        }
        output.set(row, o);
    }
    input.add_scaled(input_row, 1.0, grad);
    loss
}

/// Uniform initialisation in `[-0.5/dim, 0.5/dim]`.
pub fn init_row<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f32> {
    let half = 0.5 / dim as f32;
    (0..dim).map(|_| rng.gen_range(-half..half)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn noise_table_follows_three_quarter_power() {
        let t = NoiseTable::new([1.0, 16.0, 0.0]);
        let mut rng = seed::rng(3);
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[t.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        // 16^0.75 = 8, so the ratio should be near 8.
        let ratio = counts[1] as f64 / counts[0] as f64;
        assert!((ratio - 8.0).abs() < 0.6, "ratio {ratio}");
    }

    #[test]
    fn positive_pair_score_increases() {
        let dim = 8;
        let mut rng = seed::rng(1);
        let init: Vec<f32> = (0..4).flat_map(|_| init_row(dim, &mut rng)).collect();
        let input = SharedMatrix::from_vec(dim, &init);
        let output = SharedMatrix::zeros(4, dim);
        let noise = NoiseTable::new([1.0; 4]);
        let mut s = Scratch::new(dim);
        let first = train_pair(&input, 0, &output, 1, &noise, 2, 0.1, &mut rng, &mut s);
        let mut last = first;
        for _ in 0..200 {
            last = train_pair(&input, 0, &output, 1, &noise, 2, 0.1, &mut rng, &mut s);
        }
        assert!(last < first);
        assert!(input.dot_row(0, &output.row_vec(1)) > 0.5);
    }
}

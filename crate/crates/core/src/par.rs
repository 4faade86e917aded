//! Parallel reduction helpers.
//!
//! Rayon's adaptive splitting makes floating-point sums depend on the worker
//! count and on scheduling. [`Reduction::Deterministic`] sums fixed-size
//! chunks in parallel and combines the partial sums sequentially, so results
//! are bit-identical for any thread count.

use rayon::prelude::*;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Deterministic,
    Fast,
}

impl Reduction {
    /// Sums `f(i)` for `i in 0..n`.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync,
    {
        match self {
            Reduction::Fast => (0..n).into_par_iter().map(&f).sum(),
            Reduction::Deterministic => {
                let chunks = n.div_ceil(CHUNK);
                let partial: Vec<f64> = (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let end = ((c + 1) * CHUNK).min(n);
                        let mut acc = 0.0;
                        for i in c * CHUNK..end {
                            acc += f(i);
                        }
                        acc
                    })
                    .collect();
                partial.iter().sum()
            }
        }
    }

    pub fn dot(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        self.sum(a.len(), |i| a[i] * b[i])
    }

    pub fn norm2(self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }
}

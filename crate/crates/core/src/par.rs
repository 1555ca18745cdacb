//! Parallel reductions whose floating-point result does not depend on the thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::C64;

const CHUNK: usize = 32;

/// Σ_k f(k) for k in 0..n, summed in fixed chunks and merged in index order.
pub fn ordered_matrix_sum<F>(n: usize, rows: usize, cols: usize, f: F) -> DMatrix<C64>
where
    F: Fn(usize) -> DMatrix<C64> + Sync,
{
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partial: Vec<DMatrix<C64>> = starts
        .par_iter()
        .map(|&s| {
            let mut acc = DMatrix::zeros(rows, cols);
            for k in s..(s + CHUNK).min(n) {
                acc += f(k);
            }
            acc
        })
        .collect();
    let mut total = DMatrix::zeros(rows, cols);
    for p in partial {
        total += p;
    }
    total
}

/// Same as `ordered_matrix_sum` with an additional scalar accumulated alongside.
pub fn ordered_matrix_sum_with<F>(n: usize, rows: usize, cols: usize, f: F) -> (DMatrix<C64>, f64)
where
    F: Fn(usize) -> (DMatrix<C64>, f64) + Sync,
{
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partial: Vec<(DMatrix<C64>, f64)> = starts
        .par_iter()
        .map(|&s| {
            let mut acc = DMatrix::zeros(rows, cols);
            let mut extra = 0.0;
            for k in s..(s + CHUNK).min(n) {
                let (m, e) = f(k);
                acc += m;
                extra += e;
            }
            (acc, extra)
        })
        .collect();
    let mut total = DMatrix::zeros(rows, cols);
    let mut extra = 0.0;
    for (m, e) in partial {
        total += m;
        extra += e;
    }
    (total, extra)
}

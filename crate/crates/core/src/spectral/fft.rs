//! Cached rustfft plans and multi-dimensional transforms over row-major
//! `[N1][N2][N3]` arrays.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

type PlanCache = Mutex<(FftPlanner<f64>, HashMap<(usize, Direction), Arc<dyn Fft<f64>>>)>;

fn cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

pub(crate) fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut guard = cache().lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((n, dir))
        .or_insert_with(|| match dir {
            Direction::Forward => planner.plan_fft_forward(n),
            Direction::Inverse => planner.plan_fft_inverse(n),
        })
        .clone()
}

/// Unnormalized transform of every line along `axis`.
///
/// `keep_line` receives the two indices of the line in the remaining axes
/// (in increasing axis order) and may skip lines known to be zero.
pub(crate) fn transform_axis<F>(
    data: &mut [Complex64],
    sizes: [usize; 3],
    axis: usize,
    dir: Direction,
    keep_line: F,
) where
    F: Fn(usize, usize) -> bool + Sync,
{
    let n = sizes[axis];
    let outer: usize = sizes[..axis].iter().product();
    let inner: usize = sizes[axis + 1..].iter().product();
    let fft = plan(n, dir);
    let scratch_len = fft.get_inplace_scratch_len();

    // Splits a line number (outer, inner) into the indices of the two other axes.
    let other = |o: usize, j: usize| -> (usize, usize) {
        match axis {
            0 => (j / sizes[2], j % sizes[2]),
            1 => (o, j),
            _ => (o / sizes[1], o % sizes[1]),
        }
    };

    if inner == 1 {
        data.par_chunks_mut(n).enumerate().for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, (o, line)| {
                let (a, b) = other(o, 0);
                if keep_line(a, b) {
                    fft.process_with_scratch(line, scratch);
                }
            },
        );
        return;
    }

    // Lines along `axis` are strided by `inner`; gather a batch of adjacent
    // lines into a contiguous buffer, transform, and scatter back.
    const BATCH: usize = 16;
    let process_block = |block: &mut [Complex64], o: usize, buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>| {
        let mut idx = [0usize; BATCH];
        let mut j0 = 0;
        while j0 < inner {
            let j1 = (j0 + BATCH).min(inner);
            let mut m = 0;
            for j in j0..j1 {
                let (a, b) = other(o, j);
                if keep_line(a, b) {
                    idx[m] = j;
                    m += 1;
                }
            }
            if m > 0 {
                for i in 0..n {
                    let row = &block[i * inner..(i + 1) * inner];
                    for (b, &j) in idx[..m].iter().enumerate() {
                        buf[b * n + i] = row[j];
                    }
                }
                fft.process_with_scratch(&mut buf[..m * n], scratch);
                for i in 0..n {
                    let row = &mut block[i * inner..(i + 1) * inner];
                    for (b, &j) in idx[..m].iter().enumerate() {
                        row[j] = buf[b * n + i];
                    }
                }
            }
            j0 = j1;
        }
    };
    let init = || (vec![Complex64::default(); BATCH * n], vec![Complex64::default(); scratch_len]);
    if outer > 1 {
        data.par_chunks_mut(n * inner)
            .enumerate()
            .for_each_init(init, |(buf, scratch), (o, block)| process_block(block, o, buf, scratch));
    } else {
        let (mut buf, mut scratch) = init();
        process_block(data, 0, &mut buf, &mut scratch);
    }
}

/// Forward 3D transform normalized so that the zero coefficient is the mean.
pub(crate) fn forward3(data: &mut [Complex64], sizes: [usize; 3]) {
    for axis in (0..3).rev() {
        transform_axis(data, sizes, axis, Direction::Forward, |_, _| true);
    }
    let scale = 1.0 / (sizes[0] * sizes[1] * sizes[2]) as f64;
    data.par_iter_mut().for_each(|v| *v *= scale);
}

/// Inverse of [`forward3`] (unnormalized synthesis).
pub(crate) fn inverse3(data: &mut [Complex64], sizes: [usize; 3]) {
    for axis in 0..3 {
        transform_axis(data, sizes, axis, Direction::Inverse, |_, _| true);
    }
}

/// Inverse transform of a field whose coefficients vanish outside the
/// retained band `|n_a| <= band[a]`; zero lines are skipped.
pub(crate) fn inverse3_banded(data: &mut [Complex64], sizes: [usize; 3], band: [usize; 3]) {
    let keep = |i: usize, axis: usize| super::mode_index(i, sizes[axis]).unsigned_abs() as usize <= band[axis];
    // Axis 1 lines are indexed by spectral (n2, n3).
    transform_axis(data, sizes, 0, Direction::Inverse, |a, b| keep(a, 1) && keep(b, 2));
    // Axis 2 lines: physical x1, spectral n3.
    transform_axis(data, sizes, 1, Direction::Inverse, |_, b| keep(b, 2));
    transform_axis(data, sizes, 2, Direction::Inverse, |_, _| true);
}

/// Forward transform followed by truncation to `|n_a| <= band[a]`; lines
/// that would only feed discarded coefficients are skipped.
pub(crate) fn forward3_banded(data: &mut [Complex64], sizes: [usize; 3], band: [usize; 3]) {
    let keep = |i: usize, axis: usize| super::mode_index(i, sizes[axis]).unsigned_abs() as usize <= band[axis];
    transform_axis(data, sizes, 2, Direction::Forward, |_, _| true);
    transform_axis(data, sizes, 1, Direction::Forward, |_, b| keep(b, 2));
    transform_axis(data, sizes, 0, Direction::Forward, |a, b| keep(a, 1) && keep(b, 2));
    let scale = 1.0 / (sizes[0] * sizes[1] * sizes[2]) as f64;
    let [_, n2, n3] = sizes;
    data.par_chunks_mut(n3).enumerate().for_each(|(col, line)| {
        let (i1, i2) = (col / n2, col % n2);
        let col_kept = keep(i1, 0) && keep(i2, 1);
        for (i3, v) in line.iter_mut().enumerate() {
            if col_kept && keep(i3, 2) {
                *v *= scale;
            } else {
                *v = Complex64::default();
            }
        }
    });
}

//! Multi-dimensional complex FFTs over row-major grids, plus the mode
//! bookkeeping shared by differentiation and resampling.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::MAX_AXES;
use crate::par;

type Plan = Arc<dyn Fft<f64>>;

fn plan(len: usize, inverse: bool) -> Plan {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
        OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((len, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Signed Fourier mode of storage index `idx` on an axis of `m` samples.
/// For even `m` the Nyquist index `m/2` is reported as `+m/2`.
#[inline]
pub fn signed_mode(idx: usize, m: usize) -> i64 {
    if idx <= m / 2 {
        idx as i64
    } else {
        idx as i64 - m as i64
    }
}

/// Storage index of signed mode `k` on an axis of `m` samples.
#[inline]
pub fn mode_index(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

#[inline]
pub fn is_nyquist(idx: usize, m: usize) -> bool {
    m.is_multiple_of(2) && idx == m / 2
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

/// Unnormalized in-place FFT of one row-major plane along every axis.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    fft_nd_banded(data, shape, inverse, None);
}

fn in_band(idx: usize, m: usize, band: usize) -> bool {
    signed_mode(idx, m).unsigned_abs() as usize <= band
}

/// [`fft_nd`] restricted to the mode box `|k_a| ≤ band_a`.
///
/// Inverse: the input must vanish outside the box; the output is complete.
/// Forward: only outputs inside the box are valid.
///
/// Inverse transforms run from the last axis to the first and forward ones
/// from the first to the last, so in both cases the axes preceding the
/// current one are still confined to the box and lines outside it are
/// skipped.
pub fn fft_nd_banded(data: &mut [Complex64], shape: &[usize], inverse: bool, band: Option<&[usize]>) {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    thread_local! {
        static LINES: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
    }
    LINES.with_borrow_mut(|lines| transform_axes(data, shape, inverse, band, lines));
}

fn transform_axes(
    data: &mut [Complex64],
    shape: &[usize],
    inverse: bool,
    band: Option<&[usize]>,
    lines: &mut Vec<Complex64>,
) {
    let total = data.len();
    let d = shape.len();
    let st = strides(shape);
    let axes: Vec<usize> = if inverse { (0..d).rev().collect() } else { (0..d).collect() };
    for axis in axes {
        let m = shape[axis];
        if m == 1 {
            continue;
        }
        let fft = plan(m, inverse);
        let stride = st[axis];
        let block = m * stride;
        // Blocks are indexed by the axes before `axis`.
        let live: Vec<usize> = {
            let outer_shape = &shape[..axis];
            let nblocks = total / block;
            let mut idx = [0usize; MAX_AXES];
            (0..nblocks)
                .filter(|&b| match band {
                    None => true,
                    Some(band) => {
                        unravel(b, outer_shape, &mut idx[..axis]);
                        (0..axis).all(|a| in_band(idx[a], shape[a], band[a]))
                    }
                })
                .collect()
        };
        if stride == 1 {
            if live.len() == total / m {
                let lines_per_task = (4096 / m).max(1);
                par::for_each_chunk_mut(data, m * lines_per_task, |_, chunk| fft.process(chunk));
            } else {
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for &b in &live {
                    fft.process_with_scratch(&mut data[b * m..(b + 1) * m], &mut scratch);
                }
            }
            continue;
        }
        // Transpose each live (m × stride) block so the axis becomes contiguous.
        if lines.len() < live.len() * block {
            lines.resize(live.len() * block, Complex64::new(0.0, 0.0));
        }
        for (slot, &b) in live.iter().enumerate() {
            let src = &data[b * block..(b + 1) * block];
            let dst = &mut lines[slot * block..(slot + 1) * block];
            for j in 0..m {
                for (inner, v) in src[j * stride..(j + 1) * stride].iter().enumerate() {
                    dst[inner * m + j] = *v;
                }
            }
        }
        let lines_per_task = (4096 / m).max(1);
        par::for_each_chunk_mut(&mut lines[..live.len() * block], m * lines_per_task, |_, chunk| fft.process(chunk));
        for (slot, &b) in live.iter().enumerate() {
            let src = &lines[slot * block..(slot + 1) * block];
            let dst = &mut data[b * block..(b + 1) * block];
            for j in 0..m {
                for (inner, v) in dst[j * stride..(j + 1) * stride].iter_mut().enumerate() {
                    *v = src[inner * m + j];
                }
            }
        }
    }
}

/// Decomposes a flat row-major index into per-axis indices.
#[inline]
pub fn unravel(mut idx: usize, shape: &[usize], out: &mut [usize]) {
    for a in (0..shape.len()).rev() {
        out[a] = idx % shape[a];
        idx /= shape[a];
    }
}

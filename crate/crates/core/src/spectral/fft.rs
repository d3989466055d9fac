use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::exec::{self, Execution};

/// Square two-dimensional FFT on an `n x n` row-major buffer.
///
/// Forward transforms are scaled by `1/n^2` so that the zero mode holds the
/// grid mean; inverse transforms are unscaled.
pub(crate) struct Plan2d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    exec: Execution,
}

impl fmt::Debug for Plan2d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Plan2d").field("n", &self.n).finish()
    }
}

impl Plan2d {
    pub(crate) fn new(n: usize, exec: Execution) -> Self {
        let mut planner = FftPlanner::new();
        Plan2d { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), exec }
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.apply(&self.forward, buf);
        let scale = 1.0 / (self.n * self.n) as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(&self.inverse, buf);
    }

    fn apply(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n * self.n);
        let rows = |data: &mut [Complex64]| {
            exec::for_each_chunk(data, self.n, self.exec, |row| fft.process(row));
        };
        rows(buf);
        transpose_in_place(buf, self.n);
        rows(buf);
        transpose_in_place(buf, self.n);
    }
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

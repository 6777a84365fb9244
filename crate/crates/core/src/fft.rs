use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::Complex64;

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(len)
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(len)
}

/// `exp(i 2π cycles)`, reducing the argument to one turn first so large
/// cycle counts keep their fractional precision.
#[inline]
pub(crate) fn cis_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, TAU * frac)
}

/// Signed frequency index of DFT bin `k` out of `len`.
#[inline]
#[cfg(test)]
pub(crate) fn signed_bin(k: usize, len: usize) -> i64 {
    if k < len.div_ceil(2) {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// Generates `exp(i 2π k c)` for consecutive integer `k` with a geometric
/// recurrence that is re-anchored exactly every `ANCHOR` steps.
pub(crate) struct PhaseRamp {
    cycles_per_step: f64,
    k: i64,
    current: Complex64,
    step: Complex64,
}

impl PhaseRamp {
    const ANCHOR: i64 = 256;

    pub(crate) fn new(cycles_per_step: f64, start: i64) -> Self {
        let c = cycles_per_step - cycles_per_step.floor();
        Self {
            cycles_per_step: c,
            k: start,
            current: Self::exact(c, start),
            step: cis_cycles(c),
        }
    }

    #[inline]
    fn exact(c: f64, k: i64) -> Complex64 {
        // k·c can be large; reduce the product modulo one turn.
        let p = (k as f64) * c;
        cis_cycles(p - p.floor())
    }

    #[inline]
    pub(crate) fn next_value(&mut self) -> Complex64 {
        let out = self.current;
        self.k += 1;
        if self.k % Self::ANCHOR == 0 {
            self.current = Self::exact(self.cycles_per_step, self.k);
        } else {
            self.current *= self.step;
        }
        out
    }
}

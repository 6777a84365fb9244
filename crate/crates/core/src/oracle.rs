//! Brute-force time-domain correlators.
//!
//! Both correlators are Riemann sums over the receive samples with measure
//! `1/fs`, and evaluate the template analytically at continuous arguments.
//! They are O(Np · N_r · N_t) per delay profile and meant as references.

use rayon::prelude::*;

use crate::fft::cis_cycles;
use crate::motion::{exact_delay, motion_terms, TargetTruth};
use crate::synth::EchoCube;
use crate::waveform::Waveform;
use crate::{Complex64, Result};

/// Exact-delay matched filter at `theta`, coherently summed over pulses.
pub fn matched_filter_exact(cube: &EchoCube, w: &Waveform, theta: &TargetTruth) -> Result<Complex64> {
    cube.validate()?;
    let rp = &cube.params;
    let fs = rp.fs;
    let per_pulse = cube
        .records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let t_m = rp.pulse_time(i + 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &x) in rec.iter().enumerate() {
                let dt = cube.t_off + n as f64 / fs;
                let tau = exact_delay(theta, t_m + dt, rp.c0)?;
                let s = w.eval(dt - tau);
                if s.re != 0.0 || s.im != 0.0 {
                    acc += x * s.conj() * cis_cycles(rp.fc * tau);
                }
            }
            Ok(acc / fs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_pulse.into_iter().sum())
}

/// Cruise-and-go correlation of pulse `m` (1-based) for the velocity and
/// acceleration hypothesis, at each absolute delay `τ0 = 2 r0 / c0` in
/// `delays`.
///
/// With `stretch` the template is `s*((1 - γ)Δt - φ)`; without it the time
/// scaling is dropped and the template is `s*(Δt - φ)`. Both carry the
/// carrier term `exp(i2π fc (φ + γ Δt))`.
pub fn cago_td_pulse(
    cube: &EchoCube,
    w: &Waveform,
    v0: f64,
    a0: f64,
    m: usize,
    delays: &[f64],
    stretch: bool,
) -> Result<Vec<Complex64>> {
    cube.validate()?;
    let rp = &cube.params;
    let k = motion_terms(v0, a0, m, rp)?;
    let rec = &cube.records[m - 1];
    let fs = rp.fs;
    let n_r = rec.len() as i64;
    let c0 = rp.c0;
    let travelled = 0.5 * k.zeta_m * (c0 - k.v_m);
    let scale = if stretch { 1.0 - k.gamma_m } else { 1.0 };
    Ok(delays
        .par_iter()
        .map(|&tau0| {
            let r_m = 0.5 * c0 * tau0 + travelled;
            let phi = 2.0 * r_m / (c0 + k.v_m);
            // Template support: scale·Δt - φ in [0, Tp).
            let lo = ((phi / scale - cube.t_off) * fs).floor() as i64 - 1;
            let hi = (((phi + w.tp()) / scale - cube.t_off) * fs).ceil() as i64 + 1;
            let mut acc = Complex64::new(0.0, 0.0);
            for n in lo.max(0)..hi.min(n_r) {
                let dt = cube.t_off + n as f64 / fs;
                let s = w.eval(scale * dt - phi);
                if s.re != 0.0 || s.im != 0.0 {
                    acc += rec[n as usize] * s.conj() * cis_cycles(rp.fc * (phi + k.gamma_m * dt));
                }
            }
            acc / fs
        })
        .collect())
}

/// Coherent pulse sum of [`cago_td_pulse`] over the whole CPI.
pub fn cago_td_profile(
    cube: &EchoCube,
    w: &Waveform,
    v0: f64,
    a0: f64,
    delays: &[f64],
    stretch: bool,
) -> Result<Vec<Complex64>> {
    let mut acc = vec![Complex64::new(0.0, 0.0); delays.len()];
    for m in 1..=cube.params.np {
        let p = cago_td_pulse(cube, w, v0, a0, m, delays, stretch)?;
        acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    Ok(acc)
}

/// Cruise-and-go correlator evaluated at the single point `theta`.
pub fn matched_filter_cago_td(cube: &EchoCube, w: &Waveform, theta: &TargetTruth) -> Result<Complex64> {
    let tau0 = 2.0 * theta.r0 / cube.params.c0;
    Ok(cago_td_profile(cube, w, theta.v0, theta.a0, &[tau0], true)?[0])
}

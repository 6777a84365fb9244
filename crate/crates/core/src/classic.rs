//! Stop-and-go baseline: per-pulse FFT range compression followed by a
//! slow-time Doppler transform.

use rayon::prelude::*;

use crate::fft::{self, cis_cycles};
use crate::motion::RadarParams;
use crate::synth::EchoCube;
use crate::waveform::Waveform;
use crate::{Complex64, Error, Result};

/// Range-compressed pulses on a common absolute delay axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfiles {
    /// One profile per pulse, `delays.len()` values each.
    pub profiles: Vec<Vec<Complex64>>,
    /// Delay of every bin, s, measured from the pulse transmit time.
    pub delays: Vec<f64>,
}

/// Magnitude over delay × Doppler, Doppler-major inside each delay row.
#[derive(Debug, Clone, PartialEq)]
pub struct RdMap {
    /// `values[i * dopplers.len() + j]` at `(delays[i], dopplers[j])`.
    pub values: Vec<f64>,
    pub delays: Vec<f64>,
    /// Doppler frequency, Hz, ascending from `-PRF/2`.
    pub dopplers: Vec<f64>,
    /// Radial velocity of each Doppler bin, `-f_d c0 / (2 fc)`.
    pub velocities: Vec<f64>,
}

impl RdMap {
    pub fn at(&self, delay: usize, doppler: usize) -> f64 {
        self.values[delay * self.dopplers.len() + doppler]
    }
}

/// Matched filter of every record against the waveform samples, with the
/// carrier term `exp(i2π fc τ0)` applied per output bin.
///
/// Bins cover lags `-(N_t - 1) ..= N_r - 1` samples, i.e. delays
/// `t_off + lag / fs`. The integration measure is `1/fs`, so a matched
/// unit-modulus echo peaks at about `Tp`.
pub fn range_compress(cube: &EchoCube, w: &Waveform) -> Result<RangeProfiles> {
    cube.validate()?;
    let n_r = cube.n_r();
    let n_t = w.len();
    if n_r < n_t {
        return Err(Error::Parameter(format!(
            "record length {n_r} is shorter than the waveform ({n_t} samples)"
        )));
    }
    let fs = cube.params.fs;
    let len = (n_r + n_t - 1).next_power_of_two();
    let fwd = fft::forward(len);
    let inv = fft::inverse(len);

    // Template: conj(s[-n]) placed at index -n mod len.
    let mut tmpl = vec![Complex64::new(0.0, 0.0); len];
    for (n, s) in w.samples().iter().enumerate() {
        tmpl[(len - n) % len] = s.conj();
    }
    fwd.process(&mut tmpl);

    let lags: Vec<i64> = (-(n_t as i64 - 1)..n_r as i64).collect();
    let delays: Vec<f64> = lags.iter().map(|&l| cube.t_off + l as f64 / fs).collect();
    let carrier: Vec<Complex64> = delays.iter().map(|&d| cis_cycles(cube.params.fc * d)).collect();
    let scale = 1.0 / (fs * len as f64);

    let profiles = cube
        .records
        .par_iter()
        .map(|rec| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            buf[..n_r].copy_from_slice(rec);
            fwd.process(&mut buf);
            buf.iter_mut().zip(&tmpl).for_each(|(x, t)| *x *= t);
            inv.process(&mut buf);
            lags.iter()
                .zip(&carrier)
                .map(|(&l, c)| buf[l.rem_euclid(len as i64) as usize] * scale * c)
                .collect()
        })
        .collect();
    Ok(RangeProfiles { profiles, delays })
}

/// Slow-time transform `Σ_m p_m exp(-i2π f_d T_m)` per delay bin on a grid
/// zero-padded by `pad`, as a magnitude map.
pub fn doppler_process(profiles: &RangeProfiles, rp: &RadarParams, pad: usize) -> Result<RdMap> {
    let np = profiles.profiles.len();
    if np < 2 {
        return Err(Error::Parameter("Doppler processing needs at least two pulses".into()));
    }
    if pad == 0 {
        return Err(Error::Parameter("Doppler zero-pad factor must be at least 1".into()));
    }
    let nd = profiles.delays.len();
    if profiles.profiles.iter().any(|p| p.len() != nd) {
        return Err(Error::Parameter("profiles and delay axis differ in length".into()));
    }
    let k = np * pad;
    let prf = 1.0 / rp.tpri;
    let dopplers: Vec<f64> = (0..k)
        .map(|j| (j as i64 - (k / 2) as i64) as f64 * prf / k as f64)
        .collect();
    let velocities = dopplers.iter().map(|f| -f * rp.c0 / (2.0 * rp.fc)).collect();
    let fwd = fft::forward(k);
    let values = (0..nd)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut buf = vec![Complex64::new(0.0, 0.0); k];
            for (m, p) in profiles.profiles.iter().enumerate() {
                buf[m] = p[i];
            }
            fwd.process(&mut buf);
            (0..k).map(move |j| buf[(j + k - k / 2) % k].norm())
        })
        .collect();
    Ok(RdMap { values, delays: profiles.delays.clone(), dopplers, velocities })
}

/// Delay, velocity and peak level (dB of magnitude) of the map maximum; ties
/// go to the lowest delay, then the lowest |Doppler|.
pub fn classic_estimate(map: &RdMap) -> Result<(f64, f64, f64)> {
    let nf = map.dopplers.len();
    if map.values.is_empty() || nf == 0 {
        return Err(Error::Parameter("empty range-Doppler map".into()));
    }
    let mut best = (0usize, 0usize);
    let mut best_v = f64::NEG_INFINITY;
    for (idx, &v) in map.values.iter().enumerate() {
        let (i, j) = (idx / nf, idx % nf);
        let better = v > best_v
            || (v == best_v && i == best.0 && map.dopplers[j].abs() < map.dopplers[best.1].abs());
        if better {
            best = (i, j);
            best_v = v;
        }
    }
    Ok((map.delays[best.0], map.velocities[best.1], 20.0 * best_v.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{TargetTruth, C0};
    use crate::synth::{synthesize_echo, ReceiveWindow};

    fn setup(tgt: TargetTruth, rp: RadarParams) -> (EchoCube, Waveform) {
        let w = Waveform::costas(10, rp.tp, rp.bandwidth, rp.fs).unwrap();
        let win = ReceiveWindow::fit(&rp, &[tgt], 8).unwrap();
        (synthesize_echo(&rp, &[tgt], &w, win).unwrap(), w)
    }

    fn argmax(p: &[Complex64]) -> usize {
        (0..p.len()).max_by(|&a, &b| p[a].norm().total_cmp(&p[b].norm())).unwrap()
    }

    #[test]
    fn stationary_target_peaks_at_its_delay() {
        let rp = RadarParams::new(1e9, 1e6, 1e-3, 1e-4, 4, 1.25e6).unwrap();
        // Exactly on a sample: 2 r0 / c0 = 400 / fs.
        let tgt = TargetTruth::new(400.0 / rp.fs * C0 / 2.0, 0.0, 0.0);
        let (cube, w) = setup(tgt, rp);
        let rc = range_compress(&cube, &w).unwrap();
        let k = argmax(&rc.profiles[0]);
        assert!((rc.delays[k] - 2.0 * tgt.r0 / C0).abs() < 1e-12);
        for p in &rc.profiles {
            assert!((p[k] - rc.profiles[0][k]).norm() < 1e-12);
        }
        // Matched gain Tp, give or take the sample that straddles the echo edge.
        assert!((rc.profiles[0][k].norm() - rp.tp).abs() <= 1.0 / rp.fs + 1e-12);
        let map = doppler_process(&rc, &rp, 4).unwrap();
        let (tau, v, _) = classic_estimate(&map).unwrap();
        assert_eq!(tau, rc.delays[k]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn doppler_frequency_of_slow_target() {
        // f_d = -2 v fc / c0 = -53.4 Hz for 4 m/s at 2 GHz.
        let rp = RadarParams::new(2e9, 1e6, 1e-3, 1e-4, 16, 1.25e6).unwrap();
        let tgt = TargetTruth::new(60e3, 4.0, 0.0);
        let (cube, w) = setup(tgt, rp);
        let map = doppler_process(&range_compress(&cube, &w).unwrap(), &rp, 4).unwrap();
        let (_, v, _) = classic_estimate(&map).unwrap();
        let fd = -2.0 * v * rp.fc / C0;
        let step = map.dopplers[1] - map.dopplers[0];
        assert!((fd - (-53.4)).abs() <= step / 2.0 + 0.1, "fd = {fd}");
        assert!(map.dopplers.windows(2).all(|d| d[1] > d[0]));
        assert!((map.dopplers[0] + 500.0).abs() < 1e-9);
    }

    #[test]
    fn doppler_aliases_beyond_the_unambiguous_span() {
        let rp = RadarParams::new(2e9, 1e6, 1e-3, 1e-4, 16, 1.25e6).unwrap();
        let v_amb = rp.ambiguous_velocity();
        let delta = 10.0;
        let (cube, w) = setup(TargetTruth::new(60e3, v_amb + delta, 0.0), rp);
        let map = doppler_process(&range_compress(&cube, &w).unwrap(), &rp, 4).unwrap();
        let (_, v, _) = classic_estimate(&map).unwrap();
        let step = map.velocities[0] - map.velocities[1];
        assert!((v - delta).abs() <= step, "v = {v}");
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let rp = RadarParams::new(1e9, 1e6, 1e-3, 1e-4, 4, 1.25e6).unwrap();
        let (cube, w) = setup(TargetTruth::new(60e3, 25.0, 0.0), rp);
        let a = doppler_process(&range_compress(&cube, &w).unwrap(), &rp, 4).unwrap();
        let scaled = cube.scaled(Complex64::new(-3.0, 7.5));
        let b = doppler_process(&range_compress(&scaled, &w).unwrap(), &rp, 4).unwrap();
        let (ta, va, _) = classic_estimate(&a).unwrap();
        let (tb, vb, _) = classic_estimate(&b).unwrap();
        assert_eq!((ta, va), (tb, vb));
    }

    #[test]
    fn tie_break_prefers_lower_delay_then_lower_doppler() {
        let map = RdMap {
            values: vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0],
            delays: vec![1.0, 2.0, 3.0],
            dopplers: vec![-1.0, 0.0, 1.0],
            velocities: vec![1.0, 0.0, -1.0],
        };
        let (tau, v, _) = classic_estimate(&map).unwrap();
        assert_eq!((tau, v), (1.0, 0.0));
        let map2 = RdMap { values: vec![0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0], ..map };
        let (tau, v, _) = classic_estimate(&map2).unwrap();
        assert_eq!((tau, v), (2.0, 1.0));
    }

    #[test]
    fn accelerating_target_is_smeared_in_doppler() {
        let rp = RadarParams::new(1.3e9, 1e6, 5e-3, 2e-4, 120, 1.25e6).unwrap();
        let (cube, w) = setup(TargetTruth::new(310e3, 500.0, 300.0), rp);
        let map = doppler_process(&range_compress(&cube, &w).unwrap(), &rp, 1).unwrap();
        let nf = map.dopplers.len();
        let peak = map.values.iter().cloned().fold(0.0, f64::max);
        let row = map.values.iter().position(|&v| v == peak).unwrap() / nf;
        let strong = map.values[row * nf..(row + 1) * nf].iter().filter(|&&v| v > 0.1 * peak).count();
        assert!(strong > 20, "{strong} bins within 20 dB");
    }
}

//! Per-pulse receive records synthesized from the exact delay model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::fft::cis_cycles;
use crate::motion::{exact_delay, RadarParams, TargetTruth};
use crate::waveform::Waveform;
use crate::{Complex64, Error, Result};

/// Receive gate shared by all pulses: pulse `m` is recorded over
/// `[T_m + t_off, T_m + t_off + n_r / fs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiveWindow {
    /// Offset of the first sample from the pulse transmit time, s.
    pub t_off: f64,
    /// Samples per record.
    pub n_r: usize,
}

/// Fast time (from transmit start) at which the echo of `tgt` reaches
/// waveform time `u`, i.e. the root of `Δt - τ(T_m + Δt) = u`.
fn echo_time(tgt: &TargetTruth, t_m: f64, u: f64, c0: f64) -> Result<f64> {
    let mut dt = u + exact_delay(tgt, t_m + u, c0)?;
    for _ in 0..60 {
        let next = u + exact_delay(tgt, t_m + dt, c0)?;
        if (next - dt).abs() <= 1e-18 + 1e-15 * dt.abs() {
            return Ok(next);
        }
        dt = next;
    }
    Ok(dt)
}

impl ReceiveWindow {
    pub fn new(t_off: f64, n_r: usize) -> Self {
        ReceiveWindow { t_off, n_r }
    }

    /// Smallest sample-aligned window holding every echo of every target,
    /// with `guard` empty samples on each side.
    pub fn fit(rp: &RadarParams, targets: &[TargetTruth], guard: usize) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Parameter("no targets".into()));
        }
        let (mut first, mut last) = (f64::INFINITY, f64::NEG_INFINITY);
        for tgt in targets {
            for m in 1..=rp.np {
                let t_m = rp.pulse_time(m);
                first = first.min(echo_time(tgt, t_m, 0.0, rp.c0)?);
                last = last.max(echo_time(tgt, t_m, rp.tp, rp.c0)?);
            }
        }
        let start = (first * rp.fs).floor() as i64 - guard as i64;
        let end = (last * rp.fs).ceil() as i64 + guard as i64;
        Ok(ReceiveWindow {
            t_off: start as f64 / rp.fs,
            n_r: (end - start + 1) as usize,
        })
    }

    /// Window offset from a reference range: `floor(fs · 2 r_ref / c0) / fs`
    /// minus `guard` samples.
    pub fn from_reference_range(rp: &RadarParams, r_ref: f64, guard: usize, n_r: usize) -> Self {
        let start = (rp.fs * 2.0 * r_ref / rp.c0).floor() - guard as f64;
        ReceiveWindow { t_off: start / rp.fs, n_r }
    }
}

/// Complex baseband records of one CPI.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoCube {
    pub params: RadarParams,
    /// `params.np` records of equal length.
    pub records: Vec<Vec<Complex64>>,
    /// Receive-window offset from each transmit time, s.
    pub t_off: f64,
    /// Complex noise variance per sample; zero when noise-free.
    pub noise_power: f64,
    /// Seed of the noise draw, if any.
    pub seed: Option<u64>,
}

impl EchoCube {
    pub fn n_r(&self) -> usize {
        self.records.first().map_or(0, Vec::len)
    }

    pub fn window(&self) -> ReceiveWindow {
        ReceiveWindow::new(self.t_off, self.n_r())
    }

    /// Copy with every sample multiplied by `k`.
    pub fn scaled(&self, k: Complex64) -> EchoCube {
        let mut out = self.clone();
        out.records.iter_mut().flatten().for_each(|z| *z *= k);
        out
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.records.len() != self.params.np {
            return Err(Error::Parameter(format!(
                "cube holds {} records for {} pulses",
                self.records.len(),
                self.params.np
            )));
        }
        let n = self.n_r();
        if n == 0 || self.records.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter("records must be non-empty and of equal length".into()));
        }
        Ok(())
    }
}

/// Echo records of `targets` for every pulse, with unit amplitude and the
/// exact delay evaluated at every receive sample.
pub fn synthesize_echo(
    rp: &RadarParams,
    targets: &[TargetTruth],
    w: &Waveform,
    window: ReceiveWindow,
) -> Result<EchoCube> {
    rp.validate()?;
    if targets.is_empty() {
        return Err(Error::Parameter("no targets".into()));
    }
    if window.n_r == 0 {
        return Err(Error::Parameter("empty receive window".into()));
    }
    if (w.fs() - rp.fs).abs() > 1e-9 * rp.fs {
        return Err(Error::Parameter(format!(
            "waveform sample rate {} Hz differs from radar sample rate {} Hz",
            w.fs(),
            rp.fs
        )));
    }
    let ReceiveWindow { t_off, n_r } = window;
    let fs = rp.fs;
    let last = t_off + (n_r - 1) as f64 / fs;
    for tgt in targets {
        for m in 1..=rp.np {
            let t_m = rp.pulse_time(m);
            let head = t_off - exact_delay(tgt, t_m + t_off, rp.c0)?;
            let tail = last - exact_delay(tgt, t_m + last, rp.c0)?;
            if !(head < 0.0 && tail >= w.tp()) {
                let need = ReceiveWindow::fit(rp, targets, 4).ok();
                let hint = need.map_or(String::new(), |n| {
                    format!("; a window with t_off = {:.9e} s and n_r = {} would hold it", n.t_off, n.n_r)
                });
                return Err(Error::Synthesis(format!(
                    "echo of target (r0 = {} m, v0 = {} m/s, a0 = {} m/s²) in pulse {m} is not \
                     contained in the receive window{hint}",
                    tgt.r0, tgt.v0, tgt.a0
                )));
            }
        }
    }
    let records = (1..=rp.np)
        .into_par_iter()
        .map(|m| {
            let t_m = rp.pulse_time(m);
            let mut rec = vec![Complex64::new(0.0, 0.0); n_r];
            for tgt in targets {
                for (n, z) in rec.iter_mut().enumerate() {
                    let dt = t_off + n as f64 / fs;
                    let tau = exact_delay(tgt, t_m + dt, rp.c0)?;
                    let s = w.eval(dt - tau);
                    if s.re != 0.0 || s.im != 0.0 {
                        *z += s * cis_cycles(-rp.fc * tau);
                    }
                }
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EchoCube { params: *rp, records, t_off, noise_power: 0.0, seed: None })
}

/// Adds circular complex white Gaussian noise at `snr_db` relative to unit
/// echo amplitude. Pulse `m` draws from its own ChaCha stream, so the result
/// depends only on `seed`. An infinite SNR returns the cube unchanged.
pub fn add_noise(cube: &EchoCube, snr_db: f64, seed: u64) -> Result<EchoCube> {
    if cube.noise_power != 0.0 {
        return Err(Error::Parameter("cube already contains noise".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(cube.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("invalid SNR {snr_db} dB")));
    }
    let power = 10f64.powf(-snr_db / 10.0);
    let normal = Normal::new(0.0, (power / 2.0).sqrt())
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let records = cube
        .records
        .par_iter()
        .enumerate()
        .map(|(m, rec)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(m as u64);
            rec.iter()
                .map(|&z| {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    z + Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    Ok(EchoCube {
        records,
        noise_power: power,
        seed: Some(seed),
        ..cube.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::C0;

    fn params(np: usize) -> RadarParams {
        RadarParams::new(1.3e9, 1e6, 2e-3, 2e-4, np, 1.25e6).unwrap()
    }

    #[test]
    fn stationary_records_are_identical_delayed_pulses() {
        let rp = params(4);
        let w = Waveform::lfm(rp.tp, rp.bandwidth, rp.fs).unwrap();
        let tgt = TargetTruth::new(150e3, 0.0, 0.0);
        let win = ReceiveWindow::fit(&rp, &[tgt], 4).unwrap();
        let cube = synthesize_echo(&rp, &[tgt], &w, win).unwrap();
        let tau = 2.0 * tgt.r0 / C0;
        let carrier = cis_cycles(-rp.fc * tau);
        for rec in &cube.records {
            assert_eq!(rec, &cube.records[0]);
            for (n, z) in rec.iter().enumerate() {
                let want = w.eval(win.t_off + n as f64 / rp.fs - tau) * carrier;
                assert!((z - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn superposition() {
        let rp = params(3);
        let w = Waveform::costas(10, rp.tp, rp.bandwidth, rp.fs).unwrap();
        let a = TargetTruth::new(150e3, 300.0, 20.0);
        let b = TargetTruth::new(150.3e3, -800.0, -50.0);
        let win = ReceiveWindow::fit(&rp, &[a, b], 4).unwrap();
        let ca = synthesize_echo(&rp, &[a], &w, win).unwrap();
        let cb = synthesize_echo(&rp, &[b], &w, win).unwrap();
        let cab = synthesize_echo(&rp, &[a, b], &w, win).unwrap();
        for m in 0..3 {
            for n in 0..win.n_r {
                let sum = ca.records[m][n] + cb.records[m][n];
                assert!((cab.records[m][n] - sum).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stretched_support_and_energy() {
        // Fast target so the stretch spans several samples.
        let rp = RadarParams::new(2e9, 80e6, 30e-3, 6e-3, 1, 100e6).unwrap();
        let w = Waveform::lfm(rp.tp, rp.bandwidth, rp.fs).unwrap();
        let tgt = TargetTruth::new(1e6, -4000.0, 0.0);
        let win = ReceiveWindow::fit(&rp, &[tgt], 4).unwrap();
        let cube = synthesize_echo(&rp, &[tgt], &w, win).unwrap();
        let support = cube.records[0].iter().filter(|z| z.norm() > 0.5).count() as f64;
        let gamma = 2.0 * tgt.v0 / (C0 + tgt.v0);
        let want = rp.tp * rp.fs / (1.0 - gamma);
        assert!((support - want).abs() <= 1.0, "support {support} want {want}");
        let energy: f64 = cube.records[0].iter().map(|z| z.norm_sqr()).sum();
        assert!((energy - want).abs() <= 1.0);
    }

    #[test]
    fn pulse_to_pulse_phase_law() {
        let rp = params(6);
        let w = Waveform::lfm(rp.tp, rp.bandwidth, rp.fs).unwrap();
        let tgt = TargetTruth::new(150e3, 37.0, 0.0);
        let win = ReceiveWindow::fit(&rp, &[tgt], 4).unwrap();
        let cube = synthesize_echo(&rp, &[tgt], &w, win).unwrap();
        // Sample the first record's peak position in every pulse; the slow
        // drift in range is far below a sample here.
        let n = win.n_r / 2;
        let want = -2.0 * std::f64::consts::PI * rp.fc * 2.0 * tgt.v0 * rp.tpri / (C0 + tgt.v0);
        for m in 1..6 {
            let d = (cube.records[m][n] / cube.records[m - 1][n]).arg();
            let diff = (d - want).rem_euclid(std::f64::consts::TAU);
            let diff = diff.min(std::f64::consts::TAU - diff);
            assert!(diff < 1e-3, "pulse {m}: {d} vs {want}");
        }
    }

    #[test]
    fn truncated_echo_is_an_error() {
        let rp = params(2);
        let w = Waveform::lfm(rp.tp, rp.bandwidth, rp.fs).unwrap();
        let tgt = TargetTruth::new(150e3, 0.0, 0.0);
        let win = ReceiveWindow::fit(&rp, &[tgt], 4).unwrap();
        let short = ReceiveWindow::new(win.t_off, win.n_r - 10);
        match synthesize_echo(&rp, &[tgt], &w, short) {
            Err(Error::Synthesis(msg)) => assert!(msg.contains("pulse 1") && msg.contains("n_r")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noise_is_deterministic_and_calibrated() {
        let rp = RadarParams::new(1e9, 1e6, 2e-3, 1e-4, 4, 1e6).unwrap();
        let zeros = EchoCube {
            params: rp,
            records: vec![vec![Complex64::new(0.0, 0.0); 250_000]; 4],
            t_off: 0.0,
            noise_power: 0.0,
            seed: None,
        };
        let a = add_noise(&zeros, 3.0, 42).unwrap();
        let b = add_noise(&zeros, 3.0, 42).unwrap();
        assert_eq!(a, b);
        let want = 10f64.powf(-0.3);
        let var: f64 = a.records.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / 1e6;
        assert!((var / want - 1.0).abs() < 0.01, "{var} vs {want}");
        assert_eq!(add_noise(&zeros, f64::INFINITY, 1).unwrap(), zeros);
        assert!(add_noise(&a, 3.0, 1).is_err());
    }
}

//! Baseband transmit pulses and their upsampled spectra.

mod costas;

pub use costas::{costas_sequence, is_costas, supported_orders, MAX_ORDER};

use crate::fft::{self, cis_cycles};
use crate::{Complex64, Error, Result};

/// Pulse family.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveformKind {
    /// Linear FM chirp centered on zero baseband frequency.
    Lfm,
    /// Frequency-hopped pulse driven by a Costas permutation.
    Costas { sequence: Vec<usize> },
    /// Externally supplied samples, held constant between sample instants.
    Samples,
}

impl WaveformKind {
    pub fn name(&self) -> &'static str {
        match self {
            WaveformKind::Lfm => "lfm",
            WaveformKind::Costas { .. } => "costas",
            WaveformKind::Samples => "samples",
        }
    }
}

/// A unit-amplitude baseband pulse of length `tp` that can be evaluated at
/// arbitrary times, together with its samples at `n / fs`.
#[derive(Debug, Clone)]
pub struct Waveform {
    kind: WaveformKind,
    tp: f64,
    bandwidth: f64,
    fs: f64,
    samples: Vec<Complex64>,
    // Costas: per-hop baseband frequency and phase (cycles) at hop start.
    hop_freq: Vec<f64>,
    hop_phase: Vec<f64>,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_common(tp: f64, bandwidth: f64, fs: f64) -> Result<()> {
    check_positive("pulse length", tp)?;
    check_positive("bandwidth", bandwidth)?;
    check_positive("sample rate", fs)?;
    if fs < bandwidth {
        return Err(Error::Parameter(format!(
            "sample rate {fs} Hz is below the bandwidth {bandwidth} Hz"
        )));
    }
    let n = (tp * fs).round();
    if n < 1.0 {
        return Err(Error::Parameter("pulse is shorter than one sample".into()));
    }
    Ok(())
}

impl Waveform {
    /// Centered chirp `exp(iπ(B/Tp)(t - Tp/2)²)` on `[0, Tp)`.
    pub fn lfm(tp: f64, bandwidth: f64, fs: f64) -> Result<Self> {
        check_common(tp, bandwidth, fs)?;
        let mut w = Waveform {
            kind: WaveformKind::Lfm,
            tp,
            bandwidth,
            fs,
            samples: Vec::new(),
            hop_freq: Vec::new(),
            hop_phase: Vec::new(),
        };
        w.fill_samples();
        Ok(w)
    }

    /// Costas pulse with `hops` contiguous sub-pulses of length `tp / hops`.
    ///
    /// Sub-pulse `j` sits at `(c_j - (hops - 1)/2) · B / hops` and the phase
    /// is continuous across hop boundaries.
    pub fn costas(hops: usize, tp: f64, bandwidth: f64, fs: f64) -> Result<Self> {
        if hops < 3 {
            return Err(Error::Parameter(format!("a Costas pulse needs at least 3 hops, got {hops}")));
        }
        check_common(tp, bandwidth, fs)?;
        let sequence = costas_sequence(hops)?;
        Self::costas_with_sequence(sequence, tp, bandwidth, fs)
    }

    /// Costas pulse from an explicit permutation, which must pass [`is_costas`].
    pub fn costas_with_sequence(sequence: Vec<usize>, tp: f64, bandwidth: f64, fs: f64) -> Result<Self> {
        check_common(tp, bandwidth, fs)?;
        if sequence.len() < 3 || !is_costas(&sequence) {
            return Err(Error::Construction("sequence is not a Costas permutation of order >= 3".into()));
        }
        let n = sequence.len();
        let tc = tp / n as f64;
        let center = (n as f64 - 1.0) / 2.0;
        let hop_freq: Vec<f64> = sequence
            .iter()
            .map(|&c| (c as f64 - center) * bandwidth / n as f64)
            .collect();
        let mut hop_phase = Vec::with_capacity(n);
        let mut phase = 0.0f64;
        for f in &hop_freq {
            hop_phase.push(phase);
            phase += f * tc;
            phase -= phase.floor();
        }
        let mut w = Waveform {
            kind: WaveformKind::Costas { sequence },
            tp,
            bandwidth,
            fs,
            samples: Vec::new(),
            hop_freq,
            hop_phase,
        };
        w.fill_samples();
        Ok(w)
    }

    /// Pulse defined by its samples at `n / fs`; `bandwidth` is nominal.
    pub fn from_samples(samples: Vec<Complex64>, bandwidth: f64, fs: f64) -> Result<Self> {
        check_positive("bandwidth", bandwidth)?;
        check_positive("sample rate", fs)?;
        if samples.is_empty() {
            return Err(Error::Parameter("empty sample vector".into()));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Parameter("non-finite waveform sample".into()));
        }
        Ok(Waveform {
            kind: WaveformKind::Samples,
            tp: samples.len() as f64 / fs,
            bandwidth,
            fs,
            samples,
            hop_freq: Vec::new(),
            hop_phase: Vec::new(),
        })
    }

    fn fill_samples(&mut self) {
        let n = (self.tp * self.fs).round() as usize;
        self.samples = (0..n).map(|i| self.eval(i as f64 / self.fs)).collect();
    }

    pub fn kind(&self) -> &WaveformKind {
        &self.kind
    }

    /// Pulse length in seconds.
    pub fn tp(&self) -> f64 {
        self.tp
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Value of the continuous pulse at `t` seconds after its start; zero
    /// outside `[0, Tp)`.
    #[inline]
    pub fn eval(&self, t: f64) -> Complex64 {
        if !(t >= 0.0 && t < self.tp) {
            return Complex64::new(0.0, 0.0);
        }
        match &self.kind {
            WaveformKind::Lfm => {
                let u = t - 0.5 * self.tp;
                cis_cycles(0.5 * self.bandwidth / self.tp * u * u)
            }
            WaveformKind::Costas { .. } => {
                let n = self.hop_freq.len();
                let tc = self.tp / n as f64;
                let j = ((t / tc) as usize).min(n - 1);
                let local = t - j as f64 * tc;
                cis_cycles(self.hop_phase[j] + self.hop_freq[j] * local)
            }
            WaveformKind::Samples => {
                let i = ((t * self.fs) as usize).min(self.samples.len() - 1);
                self.samples[i]
            }
        }
    }

    /// Baseband frequency of hop `j` (Costas only).
    pub fn hop_frequency(&self, j: usize) -> Option<f64> {
        self.hop_freq.get(j).copied()
    }

    /// Zero-padded transform of the samples on a grid `U` times finer than
    /// the sample-count resolution.
    pub fn spectrum(&self, upsample: usize) -> Result<SpectrumTable> {
        if upsample == 0 {
            return Err(Error::Parameter("upsampling factor must be at least 1".into()));
        }
        Ok(SpectrumTable::build(&self.samples, self.fs, upsample * self.samples.len(), 0))
    }
}

/// Frequency samples of a zero-padded DFT, `values[j]` at `j · df` in FFT
/// order (negative frequencies in the upper half), `df = fs / values.len()`.
///
/// The table may be built about a time origin `o` (in samples): the stored
/// values are then `Σ s[n] exp(-i2π f (n - o)/fs)`, which varies slowly in
/// `f` and interpolates better. [`SpectrumTable::at`] removes the origin again.
#[derive(Debug, Clone)]
pub struct SpectrumTable {
    values: Vec<Complex64>,
    fs: f64,
    source_len: usize,
    origin: usize,
    inv_df: f64,
}

impl SpectrumTable {
    pub(crate) fn build(samples: &[Complex64], fs: f64, len: usize, origin: usize) -> Self {
        assert!(len >= samples.len() && len > 0);
        let mut values = vec![Complex64::new(0.0, 0.0); len];
        for (n, &s) in samples.iter().enumerate() {
            values[(n + len - origin % len) % len] = s;
        }
        fft::forward(len).process(&mut values);
        SpectrumTable {
            values,
            fs,
            source_len: samples.len(),
            origin,
            inv_df: len as f64 / fs,
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Grid step in Hz.
    pub fn df(&self) -> f64 {
        self.fs / self.values.len() as f64
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Ratio of table length to source length.
    pub fn upsample(&self) -> f64 {
        self.values.len() as f64 / self.source_len as f64
    }

    /// Time origin of the stored values, in samples.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Linearly interpolated transform at `f` Hz; zero for `|f| > fs/2`.
    pub fn at(&self, f: f64) -> Complex64 {
        let v = self.at_origin(f);
        if self.origin == 0 {
            v
        } else {
            v * cis_cycles(-f * self.origin as f64 / self.fs)
        }
    }

    /// Interpolated value relative to the table origin.
    #[inline]
    pub(crate) fn at_origin(&self, f: f64) -> Complex64 {
        if !(f.abs() <= 0.5 * self.fs) {
            return Complex64::new(0.0, 0.0);
        }
        let len = self.values.len();
        let x = f * self.inv_df;
        let i0 = x.floor();
        let t = x - i0;
        let i = (i0 as i64).rem_euclid(len as i64) as usize;
        let a = self.values[i];
        if t == 0.0 {
            return a;
        }
        let b = self.values[if i + 1 == len { 0 } else { i + 1 }];
        a + (b - a) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dtft(s: &[Complex64], fs: f64, f: f64) -> Complex64 {
        s.iter()
            .enumerate()
            .map(|(n, &x)| x * cis_cycles(-f * n as f64 / fs))
            .sum()
    }

    #[test]
    fn lfm_table_one_length_and_modulus() {
        let w = Waveform::lfm(2e-3, 8e6, 10e6).unwrap();
        assert_eq!(w.len(), 20_000);
        assert!(w.samples().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn lfm_vertex_and_sweep() {
        let (tp, b) = (1e-4, 1e6);
        let w = Waveform::lfm(tp, b, 2e6).unwrap();
        assert!((w.eval(tp / 2.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let h = 1e-9;
        let freq = |t: f64| (w.eval(t + h) / w.eval(t)).arg() / (2.0 * PI * h);
        assert!((freq(0.0) + b / 2.0).abs() < 1e-3 * b);
        assert!((freq(tp - 2.0 * h) - b / 2.0).abs() < 1e-3 * b);
    }

    #[test]
    fn eval_outside_support_is_zero() {
        let w = Waveform::costas(7, 1e-4, 1e6, 2e6).unwrap();
        assert_eq!(w.eval(-1e-6), Complex64::new(0.0, 0.0));
        assert_eq!(w.eval(w.tp()), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn samples_match_evaluator() {
        for w in [
            Waveform::lfm(1e-4, 1e6, 1.25e6).unwrap(),
            Waveform::costas(10, 1e-4, 1e6, 1.25e6).unwrap(),
        ] {
            for (n, &s) in w.samples().iter().enumerate() {
                assert_eq!(s, w.eval(n as f64 / w.fs()));
            }
        }
    }

    #[test]
    fn costas_hops_have_their_frequencies() {
        let (tp, b) = (1e-3, 1e6);
        let w = Waveform::costas(12, tp, b, 4e6).unwrap();
        let seq = match w.kind() {
            WaveformKind::Costas { sequence } => sequence.clone(),
            _ => unreachable!(),
        };
        let tc = tp / 12.0;
        let h = 1e-9;
        for (j, &c) in seq.iter().enumerate() {
            let t = (j as f64 + 0.5) * tc;
            let f = (w.eval(t + h) / w.eval(t)).arg() / (2.0 * PI * h);
            let want = (c as f64 - 5.5) * b / 12.0;
            assert!((f - want).abs() < 1.0, "hop {j}: {f} vs {want}");
        }
        // Phase continuity at every boundary.
        for j in 1..12 {
            let t = j as f64 * tc;
            assert!((w.eval(t - 1e-12) - w.eval(t)).norm() < 1e-4);
        }
    }

    #[test]
    fn costas_rejects_short_orders() {
        assert!(matches!(Waveform::costas(1, 1e-3, 1e6, 2e6), Err(Error::Parameter(_))));
        assert!(matches!(Waveform::costas(32, 1e-3, 1e6, 2e6), Err(Error::Construction(_))));
    }

    #[test]
    fn costas_autocorrelation_is_thumbtack() {
        let hops = 12;
        let w = Waveform::costas(hops, 1.2e-4, 1e6, 1e6).unwrap();
        let s = w.samples();
        let n = s.len();
        let sub = n / hops;
        let corr = |lag: usize| -> f64 {
            (lag..n).map(|i| s[i] * s[i - lag].conj()).sum::<Complex64>().norm()
        };
        let peak = corr(0);
        let side = (1..hops).map(|k| corr(k * sub)).fold(0.0, f64::max);
        // At most one hop coincides on the sub-pulse grid; the rest of the
        // overlap is incoherent and adds a little on top.
        assert!(peak / side >= 0.8 * hops as f64, "peak {peak} side {side}");
    }

    #[test]
    fn spectrum_u1_is_plain_dft_and_parseval_holds() {
        let w = Waveform::costas(5, 1e-5, 1e6, 1.6e6).unwrap();
        let s = w.samples();
        let tab = w.spectrum(1).unwrap();
        for (j, v) in tab.values().iter().enumerate() {
            let f = j as f64 * tab.df();
            assert!((v - dtft(s, w.fs(), f)).norm() < 1e-9);
        }
        let tab8 = w.spectrum(8).unwrap();
        let e_f: f64 = tab8.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * tab8.df() / (w.fs() * w.fs());
        let e_t: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / w.fs();
        assert!((e_f - e_t).abs() < 1e-12 * e_t.max(1.0));
    }

    #[test]
    fn lfm_spectrum_is_flat_in_band() {
        let w = Waveform::lfm(1e-3, 1e6, 1.25e6).unwrap();
        let tab = w.spectrum(4).unwrap();
        let mags: Vec<f64> = (-40..=40)
            .map(|k| tab.at(k as f64 * 0.4e6 / 40.0).norm())
            .collect();
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        assert!(mags.iter().all(|m| (m / mean - 1.0).abs() < 0.25));
    }

    #[test]
    fn interpolation_exact_on_grid_and_zero_out_of_band() {
        let w = Waveform::lfm(1e-4, 1e6, 1.25e6).unwrap();
        let tab = w.spectrum(4).unwrap();
        for j in [0usize, 3, 100, 499] {
            let f = fft::signed_bin(j, tab.values().len()) as f64 * tab.df();
            assert_eq!(tab.at(f), tab.values()[j]);
        }
        assert_eq!(tab.at(0.7e6), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn interpolation_of_constant_spectrum() {
        // A single impulse at n = 0 has a flat spectrum.
        let w = Waveform::from_samples(vec![Complex64::new(1.0, 0.0)], 1.0, 1.0).unwrap();
        let tab = SpectrumTable::build(w.samples(), 1.0, 8, 0);
        for f in [-0.37, 0.01, 0.2449] {
            assert!((tab.at(f) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn interpolation_error_falls_quadratically() {
        let w = Waveform::costas(7, 7e-5, 1e6, 1.25e6).unwrap();
        let freqs: Vec<f64> = (0..200).map(|i| -0.45e6 + i as f64 * 4_517.3).collect();
        let err = |u: usize| {
            let tab = w.spectrum(u).unwrap();
            freqs
                .iter()
                .map(|&f| (tab.at(f) - dtft(w.samples(), w.fs(), f)).norm())
                .fold(0.0, f64::max)
        };
        let (e8, e32) = (err(8), err(32));
        // Quadratic convergence: 4x finer grid, ~16x smaller error.
        assert!(e8 / e32 > 10.0, "e8={e8} e32={e32}");
    }

    #[test]
    fn centered_table_agrees_with_plain_table() {
        let w = Waveform::lfm(1e-4, 1e6, 1.25e6).unwrap();
        let plain = w.spectrum(4).unwrap();
        let centered = SpectrumTable::build(w.samples(), w.fs(), plain.values().len(), w.len() / 2);
        for j in 0..plain.values().len() {
            let f = fft::signed_bin(j, plain.values().len()) as f64 * plain.df();
            assert!((centered.at(f) - plain.values()[j]).norm() < 1e-8);
        }
    }

    proptest::proptest! {
        #[test]
        fn supported_sequences_are_costas_permutations(i in 0usize..1000) {
            let orders = supported_orders();
            let n = orders[i % orders.len()];
            let seq = costas_sequence(n).unwrap();
            let mut sorted = seq.clone();
            sorted.sort_unstable();
            proptest::prop_assert!(sorted.iter().enumerate().all(|(k, &c)| k == c));
            proptest::prop_assert!(is_costas(&seq));
        }

        #[test]
        fn pulses_have_unit_modulus(tp in 2e-5f64..2e-4, b in 2e5f64..2e6, over in 1.1f64..2.0) {
            let fs = b * over;
            let lfm = Waveform::lfm(tp, b, fs).unwrap();
            proptest::prop_assert!(lfm.samples().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            if let Ok(c) = Waveform::costas(7, tp, b, fs) {
                proptest::prop_assert!(c.samples().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            }
        }
    }
}

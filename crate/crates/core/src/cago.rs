//! Frequency-remapped range-Doppler-acceleration compression under the
//! cruise-and-go model, with coherent integration over pulses.
//!
//! For pulse `m` and a hypothesis `(v0, a0)` the correlation against the
//! stretched, Doppler-shifted template is evaluated in the frequency domain
//! as
//!
//! ```text
//! RDA_m(τ0) = ρ/(1-γ) · exp(i2π fc α) ∫ X(ρf) S*((ρf + fc γ)/(1-γ)) exp(i2π f (τ0 + ρ(ζ - t_off))) df
//! ```
//!
//! with `α = τ0/ρ + ζ`, so the inverse transform lands directly on a uniform
//! `τ0` grid. `X` and `S` are read from spectrum tables upsampled by `U`
//! and interpolated linearly. Both tables are stored about the centre of
//! their source so the stored values vary slowly with frequency.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::Fft;

use crate::fft::{self, cis_cycles, PhaseRamp};
use crate::motion::{motion_terms, PulseKinematics};
use crate::synth::EchoCube;
use crate::waveform::{SpectrumTable, Waveform};
use crate::{Complex64, Error, Result};

/// Velocity and acceleration pair under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub v0: f64,
    pub a0: f64,
}

impl Hypothesis {
    pub fn new(v0: f64, a0: f64) -> Self {
        Hypothesis { v0, a0 }
    }
}

/// Uniform grid of absolute delays `τ0 = 2 r0 / c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayAxis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl DelayAxis {
    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    fn end(&self) -> f64 {
        self.value(self.len.saturating_sub(1))
    }
}

/// Velocity and acceleration hypotheses; the delay axis is set through
/// [`RdaOptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisGrid {
    pub velocities: Vec<f64>,
    pub accelerations: Vec<f64>,
}

impl HypothesisGrid {
    pub fn new(velocities: Vec<f64>, accelerations: Vec<f64>) -> Result<Self> {
        for (name, v) in [("velocity", &velocities), ("acceleration", &accelerations)] {
            if v.is_empty() {
                return Err(Error::Parameter(format!("empty {name} list")));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!("{name} list must be finite and strictly increasing")));
            }
        }
        Ok(HypothesisGrid { velocities, accelerations })
    }

    /// `center ± k·step` for `k = 0..=half` in each dimension.
    pub fn window(center: Hypothesis, dv: f64, half_v: usize, da: f64, half_a: usize) -> Result<Self> {
        let span = |c: f64, d: f64, h: usize| -> Vec<f64> {
            (-(h as i64)..=h as i64).map(|k| c + k as f64 * d).collect()
        };
        Self::new(span(center.v0, dv, half_v), span(center.a0, da, half_a))
    }

    pub fn len(&self) -> usize {
        self.velocities.len() * self.accelerations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hypotheses in storage order: acceleration-major, then velocity.
    pub fn hypotheses(&self) -> Vec<Hypothesis> {
        self.accelerations
            .iter()
            .flat_map(|&a| self.velocities.iter().map(move |&v| Hypothesis::new(v, a)))
            .collect()
    }
}

/// Processing knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdaOptions {
    /// Spectrum-table upsampling factor.
    pub upsample: usize,
    /// Compensate the intra-pulse time scaling (otherwise only the Doppler
    /// shift is removed).
    pub stretch: bool,
    /// Output delay samples per `1/fs`.
    pub delay_oversample: usize,
    /// First output delay; defaults to the earliest lag of a full
    /// correlation, `t_off - (N_t - 1)/fs`.
    pub delay_start: Option<f64>,
    /// Output length; defaults to the full correlation `N_r + N_t - 1`
    /// (times the oversampling).
    pub delay_len: Option<usize>,
}

impl Default for RdaOptions {
    fn default() -> Self {
        RdaOptions { upsample: 16, stretch: true, delay_oversample: 1, delay_start: None, delay_len: None }
    }
}

/// Magnitudes over `(a0, v0, τ0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdaMap {
    /// `values[(ia * velocities.len() + iv) * delays.len() + id]`.
    pub values: Vec<f64>,
    pub delays: Vec<f64>,
    pub velocities: Vec<f64>,
    pub accelerations: Vec<f64>,
    pub c0: f64,
}

impl RdaMap {
    pub fn at(&self, ia: usize, iv: usize, id: usize) -> f64 {
        self.values[(ia * self.velocities.len() + iv) * self.delays.len() + id]
    }

    /// Delay profile of one hypothesis.
    pub fn profile(&self, ia: usize, iv: usize) -> &[f64] {
        let n = self.delays.len();
        let o = (ia * self.velocities.len() + iv) * n;
        &self.values[o..o + n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Map maximum and its grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakReport {
    pub r0_hat: f64,
    pub v0_hat: f64,
    pub a0_hat: f64,
    /// `20 log10` of the peak magnitude.
    pub peak_db: f64,
    pub peak_complex_sum_magnitude: f64,
}

/// Per-pulse remapping coefficients.
struct Remap {
    kin: PulseKinematics,
    mu: f64,
    lam1: f64,
    lam0: f64,
    amp: f64,
    /// Carrier phase per unit `α`.
    carrier: f64,
}

/// Shared state for compressing one cube: template spectrum, transform plan
/// and output axis.
pub struct RdaProcessor<'a> {
    cube: &'a EchoCube,
    template: SpectrumTable,
    tp: f64,
    n_t: usize,
    transform_len: usize,
    record_table_len: usize,
    axis: DelayAxis,
    options: RdaOptions,
    ifft: Arc<dyn Fft<f64>>,
}

impl<'a> RdaProcessor<'a> {
    pub fn new(cube: &'a EchoCube, w: &Waveform, options: RdaOptions) -> Result<Self> {
        cube.validate()?;
        let rp = &cube.params;
        if (w.fs() - rp.fs).abs() > 1e-9 * rp.fs {
            return Err(Error::Parameter("waveform and cube sample rates differ".into()));
        }
        if options.upsample == 0 || options.delay_oversample == 0 {
            return Err(Error::Parameter("upsampling factors must be at least 1".into()));
        }
        let n_r = cube.n_r();
        let n_t = w.len();
        let fs = rp.fs;
        let transform_len = (n_r + 2 * n_t).next_power_of_two();
        // Multiples of the transform length keep the zero-hypothesis grid
        // exactly on table points.
        let table_len = |n: usize| transform_len * (options.upsample * n).div_ceil(transform_len);
        let template = SpectrumTable::build(w.samples(), fs, table_len(n_t), n_t / 2);
        let p = options.delay_oversample;
        let axis = DelayAxis {
            start: options.delay_start.unwrap_or(cube.t_off - (n_t as f64 - 1.0) / fs),
            step: 1.0 / (p as f64 * fs),
            len: options.delay_len.unwrap_or((n_r + n_t - 1) * p),
        };
        if axis.len == 0 || axis.len > p * transform_len {
            return Err(Error::Parameter(format!(
                "delay axis length {} must lie in 1..={}",
                axis.len,
                p * transform_len
            )));
        }
        Ok(RdaProcessor {
            cube,
            template,
            tp: w.tp(),
            n_t,
            transform_len,
            record_table_len: table_len(n_r),
            axis,
            options,
            ifft: fft::inverse(p * transform_len),
        })
    }

    pub fn axis(&self) -> DelayAxis {
        self.axis
    }

    pub fn transform_len(&self) -> usize {
        self.transform_len
    }

    pub fn options(&self) -> RdaOptions {
        self.options
    }

    /// Upsampled spectrum of record `m` (1-based).
    pub fn record_table(&self, m: usize) -> Result<SpectrumTable> {
        let rec = self
            .cube
            .records
            .get(m.wrapping_sub(1))
            .ok_or_else(|| Error::Parameter(format!("pulse index {m} outside 1..={}", self.cube.params.np)))?;
        Ok(SpectrumTable::build(rec, self.cube.params.fs, self.record_table_len, rec.len() / 2))
    }

    fn remap(&self, hyp: Hypothesis, m: usize) -> Result<Remap> {
        let rp = &self.cube.params;
        let kin = motion_terms(hyp.v0, hyp.a0, m, rp)?;
        let (rho, gamma) = (kin.rho_m, kin.gamma_m);
        let lam1 = rho / (1.0 - gamma);
        let r = if self.options.stretch {
            Remap { kin, mu: rho, lam1, lam0: rp.fc * gamma / (1.0 - gamma), amp: lam1, carrier: rp.fc }
        } else {
            Remap { kin, mu: lam1, lam1, lam0: rp.fc * gamma, amp: lam1, carrier: rp.fc * (1.0 - gamma * gamma) }
        };
        self.check_support(&r, hyp)?;
        Ok(r)
    }

    /// The circular transform only holds one period of `L / fs` seconds; the
    /// hypothesis' correlation support and the output axis must fit in it.
    fn check_support(&self, r: &Remap, hyp: Hypothesis) -> Result<()> {
        let fs = self.cube.params.fs;
        let t_off = self.cube.t_off;
        let t_end = t_off + self.cube.n_r() as f64 / fs;
        let (rho, gamma, zeta) = (r.kin.rho_m, r.kin.gamma_m, r.kin.zeta_m);
        let (lo, hi) = if self.options.stretch {
            (rho * (t_off - self.tp / (1.0 - gamma) - zeta), rho * (t_end - zeta))
        } else {
            (rho * ((t_off - self.tp) / (1.0 - gamma) - zeta), rho * (t_end / (1.0 - gamma) - zeta))
        };
        let span = hi.max(self.axis.end()) - lo.min(self.axis.start);
        let period = self.transform_len as f64 / fs;
        if span > period - 2.0 / fs {
            return Err(Error::Parameter(format!(
                "hypothesis v0 = {} m/s, a0 = {} m/s² at pulse {} shifts the correlation by more \
                 than the transform slack ({:.3e} s needed, {:.3e} s available)",
                hyp.v0,
                hyp.a0,
                r.kin.m,
                span,
                period
            )));
        }
        Ok(())
    }

    /// Adds the compressed pulse `m` for `hyp` into `out` (length of the
    /// delay axis). `buf` is scratch of any length.
    pub fn accumulate_pulse(
        &self,
        xtab: &SpectrumTable,
        hyp: Hypothesis,
        m: usize,
        buf: &mut Vec<Complex64>,
        out: &mut [Complex64],
    ) -> Result<()> {
        let r = self.remap(hyp, m)?;
        let rp = &self.cube.params;
        let fs = rp.fs;
        let l = self.transform_len;
        let p = self.options.delay_oversample;
        let pl = p * l;
        let o_x = xtab.origin() as f64;
        let o_s = self.template.origin() as f64;
        let (rho, zeta) = (r.kin.rho_m, r.kin.zeta_m);
        let df = fs / l as f64;
        let t_ramp = self.axis.start + rho * zeta - r.mu * (self.cube.t_off + o_x / fs) + r.lam1 * o_s / fs;

        buf.clear();
        buf.resize(pl, Complex64::new(0.0, 0.0));
        let half = (l / 2) as i64;
        let mut ramp = PhaseRamp::new(df * t_ramp, -half);
        for k in -half..half {
            let g = k as f64 * df;
            let x = xtab.at_origin(r.mu * g);
            let s = self.template.at_origin(r.lam1 * g + r.lam0);
            let idx = if k < 0 { (k + pl as i64) as usize } else { k as usize };
            buf[idx] = x * s.conj() * ramp.next_value();
        }
        self.ifft.process(buf);

        let scale = r.amp / (fs * l as f64) * cis_cycles(r.lam0 * o_s / fs);
        // Carrier exp(i2π c (τ0/ρ + ζ)) along the axis.
        let base = r.carrier * (self.axis.start / rho + zeta);
        let mut carrier = PhaseRamp::new(r.carrier * self.axis.step / rho, 0);
        let c0 = scale * cis_cycles(base);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o += b * c0 * carrier.next_value();
        }
        Ok(())
    }

    /// Compressed pulse `m` on the delay axis.
    pub fn pulse(&self, hyp: Hypothesis, m: usize) -> Result<Vec<Complex64>> {
        let xtab = self.record_table(m)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.axis.len];
        self.accumulate_pulse(&xtab, hyp, m, &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    /// Coherent sum over pulses, in pulse order.
    pub fn integrate(&self, hyp: Hypothesis) -> Result<Vec<Complex64>> {
        let per_pulse = (1..=self.cube.params.np)
            .into_par_iter()
            .map(|m| self.pulse(hyp, m))
            .collect::<Result<Vec<_>>>()?;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.axis.len];
        for p in per_pulse {
            acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        Ok(acc)
    }

    /// Magnitude map over a hypothesis grid. Pulses are processed in order
    /// with one record table at a time; hypotheses run in parallel.
    pub fn map(&self, grid: &HypothesisGrid) -> Result<RdaMap> {
        let hyps = grid.hypotheses();
        let n = self.axis.len;
        let mut acc = vec![vec![Complex64::new(0.0, 0.0); n]; hyps.len()];
        for m in 1..=self.cube.params.np {
            let xtab = self.record_table(m)?;
            acc.par_iter_mut()
                .zip(hyps.par_iter())
                .try_for_each_init(Vec::new, |buf, (out, &h)| self.accumulate_pulse(&xtab, h, m, buf, out))?;
        }
        Ok(RdaMap {
            values: acc.into_iter().flatten().map(|z| z.norm()).collect(),
            delays: self.axis.values(),
            velocities: grid.velocities.clone(),
            accelerations: grid.accelerations.clone(),
            c0: self.cube.params.c0,
        })
    }

    /// Number of template samples.
    pub fn template_len(&self) -> usize {
        self.n_t
    }
}

/// Compressed pulse `m` (1-based) for one hypothesis.
pub fn rda_pulse(cube: &EchoCube, w: &Waveform, hyp: Hypothesis, m: usize, options: RdaOptions) -> Result<Vec<Complex64>> {
    RdaProcessor::new(cube, w, options)?.pulse(hyp, m)
}

/// `|Σ_m RDA_m|` along the delay axis for one hypothesis.
pub fn rda_integrate(cube: &EchoCube, w: &Waveform, hyp: Hypothesis, options: RdaOptions) -> Result<Vec<f64>> {
    Ok(RdaProcessor::new(cube, w, options)?
        .integrate(hyp)?
        .into_iter()
        .map(|z| z.norm())
        .collect())
}

/// Stacked [`rda_integrate`] over a hypothesis grid.
pub fn rda_map(cube: &EchoCube, w: &Waveform, grid: &HypothesisGrid, options: RdaOptions) -> Result<RdaMap> {
    RdaProcessor::new(cube, w, options)?.map(grid)
}

/// Map maximum; ties go to the lowest delay, then the lowest |v0|, then the
/// lowest |a0|.
pub fn rda_estimate(map: &RdaMap) -> Result<PeakReport> {
    let (nd, nv) = (map.delays.len(), map.velocities.len());
    if map.values.is_empty() || nd == 0 || nv == 0 || map.accelerations.is_empty() {
        return Err(Error::Parameter("empty RDA map".into()));
    }
    let key = |idx: usize| {
        let (id, rest) = (idx % nd, idx / nd);
        let (iv, ia) = (rest % nv, rest / nv);
        (id, map.velocities[iv].abs(), map.accelerations[ia].abs(), iv, ia)
    };
    let mut best = 0usize;
    for idx in 1..map.values.len() {
        let (v, b) = (map.values[idx], map.values[best]);
        if v > b {
            best = idx;
        } else if v == b {
            let (ki, kb) = (key(idx), key(best));
            if (ki.0, ki.1, ki.2) < (kb.0, kb.1, kb.2) {
                best = idx;
            }
        }
    }
    let (id, _, _, iv, ia) = key(best);
    let peak = map.values[best];
    Ok(PeakReport {
        r0_hat: 0.5 * map.c0 * map.delays[id],
        v0_hat: map.velocities[iv],
        a0_hat: map.accelerations[ia],
        peak_db: 20.0 * peak.log10(),
        peak_complex_sum_magnitude: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_with(values: Vec<f64>, delays: Vec<f64>, velocities: Vec<f64>, accelerations: Vec<f64>) -> RdaMap {
        RdaMap { values, delays, velocities, accelerations, c0: 2.0 }
    }

    #[test]
    fn grid_validation() {
        assert!(HypothesisGrid::new(vec![], vec![0.0]).is_err());
        assert!(HypothesisGrid::new(vec![1.0, 1.0], vec![0.0]).is_err());
        let g = HypothesisGrid::window(Hypothesis::new(10.0, 1.0), 0.5, 2, 0.25, 1).unwrap();
        assert_eq!(g.velocities, vec![9.0, 9.5, 10.0, 10.5, 11.0]);
        assert_eq!(g.accelerations, vec![0.75, 1.0, 1.25]);
        assert_eq!(g.hypotheses()[5], Hypothesis::new(9.0, 1.0));
    }

    #[test]
    fn estimate_picks_delta_cell() {
        let mut values = vec![0.0; 2 * 3 * 4];
        values[(3 + 2) * 4 + 1] = 5.0;
        let map = map_with(values, vec![0.0, 1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0], vec![0.0, 7.0]);
        let p = rda_estimate(&map).unwrap();
        assert_eq!((p.r0_hat, p.v0_hat, p.a0_hat), (1.0, 1.0, 7.0));
        assert_eq!(p.peak_complex_sum_magnitude, 5.0);
    }

    #[test]
    fn estimate_tie_breaks() {
        // Constant map: lowest delay, then smallest |v|, then smallest |a|.
        let map = map_with(vec![1.0; 2 * 3 * 2], vec![4.0, 5.0], vec![-1.0, 0.5, 2.0], vec![-3.0, 1.0]);
        let p = rda_estimate(&map).unwrap();
        assert_eq!((p.r0_hat, p.v0_hat, p.a0_hat), (4.0, 0.5, 1.0));
    }
}

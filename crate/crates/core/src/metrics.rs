//! Figures of merit computed from maps and correlator outputs.

use crate::cago::{rda_estimate, Hypothesis, PeakReport, RdaMap, RdaOptions, RdaProcessor};
use crate::classic::RdMap;
use crate::motion::TargetTruth;
use crate::oracle::matched_filter_exact;
use crate::synth::EchoCube;
use crate::waveform::Waveform;
use crate::{Error, Result};

/// Half-width, in delay bins, of the window searched for the peak around the
/// true delay in [`correlation_loss`].
pub const LOSS_SEARCH_BINS: usize = 8;

/// Ratio of the FFT-path peak at the true hypothesis to the exact matched
/// filter, in dB (`20 log10`).
///
/// The FFT path is evaluated on a delay axis with one bin on the true delay
/// and searched over `±LOSS_SEARCH_BINS` bins.
pub fn correlation_loss(cube: &EchoCube, w: &Waveform, theta: &TargetTruth) -> Result<f64> {
    correlation_loss_with(cube, w, theta, RdaOptions::default())
}

/// [`correlation_loss`] with explicit processing options. The delay axis
/// fields of `options` are overridden.
pub fn correlation_loss_with(
    cube: &EchoCube,
    w: &Waveform,
    theta: &TargetTruth,
    options: RdaOptions,
) -> Result<f64> {
    let exact = matched_filter_exact(cube, w, theta)?.norm();
    if !(exact > 0.0) {
        return Err(Error::DegenerateScene(
            "exact matched filter output is zero; the target is not inside the receive window".into(),
        ));
    }
    let tau0 = 2.0 * theta.r0 / cube.params.c0;
    let step = 1.0 / (cube.params.fs * options.delay_oversample.max(1) as f64);
    let half = LOSS_SEARCH_BINS * options.delay_oversample.max(1);
    let opts = RdaOptions {
        delay_start: Some(tau0 - half as f64 * step),
        delay_len: Some(2 * half + 1),
        ..options
    };
    let proc = RdaProcessor::new(cube, w, opts)?;
    let peak = proc
        .integrate(Hypothesis::new(theta.v0, theta.a0))?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(20.0 * (peak / exact).log10())
}

fn relative(report: PeakReport, reference: Option<f64>) -> PeakReport {
    match reference {
        Some(r) => PeakReport { peak_db: report.peak_db - 20.0 * r.log10(), ..report },
        None => report,
    }
}

/// Maximum of an RDA map. With `reference` (a magnitude, e.g. the maximum of
/// another run) the level is reported relative to it.
pub fn extract_peak(map: &RdaMap, reference: Option<f64>) -> Result<PeakReport> {
    Ok(relative(rda_estimate(map)?, reference))
}

/// Maximum of a range-Doppler map, with `a0_hat = 0`. Ties go to the lowest
/// delay, then the lowest |Doppler|.
pub fn extract_rd_peak(map: &RdMap, c0: f64, reference: Option<f64>) -> Result<PeakReport> {
    let nf = map.dopplers.len();
    if map.values.is_empty() || nf == 0 {
        return Err(Error::Parameter("empty range-Doppler map".into()));
    }
    let mut best = 0usize;
    for idx in 1..map.values.len() {
        let (v, b) = (map.values[idx], map.values[best]);
        if v > b || (v == b && idx / nf == best / nf && map.dopplers[idx % nf].abs() < map.dopplers[best % nf].abs()) {
            best = idx;
        }
    }
    let peak = map.values[best];
    let report = PeakReport {
        r0_hat: 0.5 * c0 * map.delays[best / nf],
        v0_hat: map.velocities[best % nf],
        a0_hat: 0.0,
        peak_db: 20.0 * peak.log10(),
        peak_complex_sum_magnitude: peak,
    };
    Ok(relative(report, reference))
}

/// Ambiguity maxima relative to the main peak.
#[derive(Debug, Clone, PartialEq)]
pub struct SidelobeLevels {
    /// dB relative to the main peak, index `k - 1` for the `k`-th ambiguity.
    pub levels_db: Vec<f64>,
    /// Fewer ambiguities than requested were inside the grid.
    pub truncated: bool,
}

/// Local maxima at `v_true ± k v_amb`, `k = 1..=count`.
///
/// `profile[i]` is the largest magnitude over delay for hypothesis
/// `velocities[i]`. Every maximum, the main one included, is searched within
/// `±search` of its nominal velocity; the larger of the two sides is kept.
/// Listing stops at the first order with no grid point on either side.
pub fn sidelobe_levels(
    velocities: &[f64],
    profile: &[f64],
    v_true: f64,
    v_amb: f64,
    count: usize,
    search: f64,
) -> Result<SidelobeLevels> {
    if velocities.len() != profile.len() || velocities.is_empty() {
        return Err(Error::Parameter("velocity axis and profile must be non-empty and equally long".into()));
    }
    if !(v_amb > 0.0) || !(search >= 0.0) || search >= 0.5 * v_amb {
        return Err(Error::Parameter(format!(
            "ambiguity spacing {v_amb} must be positive and exceed twice the search half-width {search}"
        )));
    }
    let window_max = |centre: f64| {
        velocities
            .iter()
            .zip(profile)
            .filter(|(v, _)| (**v - centre).abs() <= search)
            .map(|(_, p)| *p)
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))
    };
    let main = window_max(v_true)
        .filter(|m| *m > 0.0)
        .ok_or_else(|| Error::Parameter(format!("no positive main peak within {search} m/s of {v_true} m/s")))?;
    let mut levels_db = Vec::with_capacity(count);
    for k in 1..=count {
        let off = k as f64 * v_amb;
        let side = match (window_max(v_true - off), window_max(v_true + off)) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => break,
        };
        levels_db.push(20.0 * (side / main).log10());
    }
    let truncated = levels_db.len() < count;
    Ok(SidelobeLevels { levels_db, truncated })
}

/// Operation-count ratio `N_r N_t / ((N_r + 2 N_t) ln(N_r + 2 N_t))` of the
/// direct correlator over the FFT path.
pub fn speedup_estimate(n_r: usize, n_t: usize) -> f64 {
    let (r, t) = (n_r as f64, n_t as f64);
    let s = r + 2.0 * t;
    r * t / (s * s.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{RadarParams, C0};
    use crate::synth::{synthesize_echo, ReceiveWindow};

    #[test]
    fn speedup_formula() {
        let n = 4096usize;
        let nf = n as f64;
        assert!((speedup_estimate(n, n) - nf / (3.0 * (3.0 * nf).ln())).abs() < 1e-9);
        let s = speedup_estimate(50_000, 20_000);
        assert!((s - 974.0125).abs() < 1e-3, "{s}");
        let mut prev = 0.0;
        for nr in (1..40).map(|k| 1000 * k) {
            let v = speedup_estimate(nr, 2000);
            assert!(v > prev);
            prev = v;
        }
    }

    fn rda(values: Vec<f64>, nd: usize) -> RdaMap {
        let nv = values.len() / nd;
        RdaMap {
            values,
            delays: (0..nd).map(|i| i as f64).collect(),
            velocities: (0..nv).map(|i| i as f64 - 1.0).collect(),
            accelerations: vec![0.0],
            c0: 2.0,
        }
    }

    #[test]
    fn delta_and_constant_maps() {
        let mut v = vec![0.0; 12];
        v[7] = 2.0;
        let p = extract_peak(&rda(v, 4), None).unwrap();
        assert_eq!((p.r0_hat, p.v0_hat), (3.0, 0.0));
        assert!((p.peak_db - 20.0 * 2f64.log10()).abs() < 1e-12);
        let p = extract_peak(&rda(vec![1.0; 12], 4), Some(10.0)).unwrap();
        assert_eq!((p.r0_hat, p.v0_hat), (0.0, 0.0));
        assert!((p.peak_db + 20.0).abs() < 1e-12);

        let rd = RdMap {
            values: vec![1.0; 6],
            delays: vec![4.0, 5.0],
            dopplers: vec![-1.0, 0.0, 1.0],
            velocities: vec![3.0, 0.0, -3.0],
        };
        let p = extract_rd_peak(&rd, 2.0, None).unwrap();
        assert_eq!((p.r0_hat, p.v0_hat, p.a0_hat), (4.0, 0.0, 0.0));
        assert!(extract_rd_peak(&RdMap { values: vec![], ..rd }, 2.0, None).is_err());
    }

    #[test]
    fn sidelobes_of_a_synthetic_profile() {
        let v: Vec<f64> = (-100..=100).map(|i| i as f64).collect();
        let mut p = vec![0.01; v.len()];
        let set = |p: &mut Vec<f64>, vel: i64, x: f64| p[(vel + 100) as usize] = x;
        set(&mut p, 5, 1.0);
        set(&mut p, 35, 0.5);
        set(&mut p, -26, 0.6); // one cell off nominal -25
        set(&mut p, 65, 0.1);
        let s = sidelobe_levels(&v, &p, 5.0, 30.0, 4, 2.0).unwrap();
        assert!(s.truncated);
        assert_eq!(s.levels_db.len(), 3);
        assert!((s.levels_db[0] - 20.0 * 0.6f64.log10()).abs() < 1e-12);
        assert!((s.levels_db[1] - 20.0 * 0.1f64.log10()).abs() < 1e-12);
        assert!((s.levels_db[2] - 20.0 * 0.01f64.log10()).abs() < 1e-12);

        let scaled: Vec<f64> = p.iter().map(|x| 7.0 * x).collect();
        let t = sidelobe_levels(&v, &scaled, 5.0, 30.0, 4, 2.0).unwrap();
        for (a, b) in s.levels_db.iter().zip(&t.levels_db) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(sidelobe_levels(&v, &p, 5.0, 3.0, 4, 2.0).is_err());
        assert!(sidelobe_levels(&v, &p[1..], 5.0, 30.0, 4, 2.0).is_err());
    }

    #[test]
    fn loss_is_near_zero_for_linear_motion_and_rejects_empty_scenes() {
        let rp = RadarParams::new(1.3e9, 1e6, 2e-3, 2e-4, 4, 1.25e6).unwrap();
        let w = Waveform::costas(10, rp.tp, rp.bandwidth, rp.fs).unwrap();
        let tgt = TargetTruth::new(150e3, 2500.0, 0.0);
        let win = ReceiveWindow::fit(&rp, &[tgt], 8).unwrap();
        let cube = synthesize_echo(&rp, &[tgt], &w, win).unwrap();
        let loss = correlation_loss(&cube, &w, &tgt).unwrap();
        assert!((-0.05..=0.0).contains(&loss), "{loss}");

        let far = TargetTruth::new(tgt.r0 + 1000.0 * C0 / rp.fs, 2500.0, 0.0);
        let err = correlation_loss(&cube, &w, &far).unwrap_err();
        assert_eq!(err.kind(), "degenerate_scene");
    }
}

//! Experiment runners behind the CLI subcommands.
//!
//! Every runner returns its results and, given an output directory, also
//! writes them. Apart from timing files, outputs depend only on the scenario
//! and seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rda_core::oracle::{cago_td_profile, cago_td_pulse, matched_filter_exact};
use rda_core::{
    acceleration_ratio, add_noise, correlation_loss, doppler_process, extract_peak, extract_rd_peak,
    predicted_loss, range_compress, sidelobe_levels, speedup_estimate, synthesize_echo, EchoCube,
    Hypothesis, HypothesisGrid, PeakReport, RadarParams, RdMap, RdaMap, RdaOptions, RdaProcessor,
    ReceiveWindow, SidelobeLevels, TargetTruth, Waveform,
};

use crate::formats;
use crate::scenario::{default_hops, Combination, Scenario, SweepSpec};

/// A scenario resolved into core types.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub params: RadarParams,
    pub waveform: Waveform,
    pub truths: Vec<TargetTruth>,
    pub window: ReceiveWindow,
}

impl Setup {
    /// `base` resolves relative waveform paths.
    pub fn new(scenario: &Scenario, base: Option<&Path>) -> Result<Self> {
        scenario.check()?;
        let params = scenario.params()?;
        let waveform = scenario.build_waveform(base)?;
        let truths = scenario.truths();
        let ws = &scenario.window;
        let window = match (ws.t_off, ws.n_r) {
            (Some(t_off), Some(n_r)) => ReceiveWindow::new(t_off, n_r),
            (None, Some(n_r)) => ReceiveWindow::from_reference_range(&params, truths[0].r0, ws.guard, n_r),
            (Some(_), None) => bail!("window.t_off needs window.n_r"),
            (None, None) => ReceiveWindow::fit(&params, &truths, ws.guard)?,
        };
        Ok(Setup { scenario: scenario.clone(), params, waveform, truths, window })
    }

    /// Echo cube, with noise if the scenario asks for it. `seed` overrides the
    /// scenario's noise seed.
    pub fn cube(&self, seed: Option<u64>) -> Result<EchoCube> {
        let cube = synthesize_echo(&self.params, &self.truths, &self.waveform, self.window)?;
        Ok(match self.scenario.noise {
            Some(n) => add_noise(&cube, n.snr_db, seed.unwrap_or(n.seed))?,
            None => cube,
        })
    }

    /// Options with a delay window of `half` samples (each side) around the
    /// first target's delay, one output bin on that delay.
    pub fn options(&self, half: usize) -> RdaOptions {
        let p = &self.scenario.processing;
        let ov = p.delay_oversample;
        let step = 1.0 / (self.params.fs * ov as f64);
        let tau0 = 2.0 * self.truths[0].r0 / self.params.c0;
        RdaOptions {
            upsample: p.upsample,
            stretch: p.stretch,
            delay_oversample: ov,
            delay_start: Some(tau0 - (half * ov) as f64 * step),
            delay_len: Some(2 * half * ov + 1),
        }
    }
}

/// Cube, waveform and resolved scenario files.
pub fn run_synth(setup: &Setup, seed: Option<u64>, out: &Path) -> Result<EchoCube> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let cube = setup.cube(seed)?;
    formats::write_cube(&cube, out, "cube")?;
    formats::write_waveform(&setup.waveform, &out.join("waveform.bin"))?;
    fs::write(out.join("scenario.toml"), setup.scenario.to_toml()?)?;
    Ok(cube)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Classic,
    Cago,
    Oracle,
}

#[derive(Debug, Clone, Default)]
pub struct MapRequest {
    pub full: bool,
    /// Replaces the acceleration hypotheses. The velocity and delay windows
    /// then widen to cover the target's velocity and range excursion over
    /// the CPI.
    pub accelerations: Option<Vec<f64>>,
    /// Also integrate the true hypothesis with and without stretch
    /// compensation.
    pub compare_stretch: bool,
    pub seed: Option<u64>,
}

/// True-hypothesis profiles with and without stretch compensation.
#[derive(Debug, Clone, Serialize)]
pub struct StretchComparison {
    pub peak_on_db: f64,
    pub peak_off_db: f64,
    pub degradation_db: f64,
    pub bias_on_m: f64,
    pub bias_off_m: f64,
    /// `c0 / (2B)`.
    pub range_cell_m: f64,
    #[serde(skip)]
    pub delays: Vec<f64>,
    #[serde(skip)]
    pub on: Vec<f64>,
    #[serde(skip)]
    pub off: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub peak: PeakReport,
    pub rda: Option<RdaMap>,
    pub rd: Option<RdMap>,
    pub ambiguity: Option<SidelobeLevels>,
    pub stretch: Option<StretchComparison>,
    pub files: Vec<PathBuf>,
}

/// Compresses a cube (synthesized from the scenario unless given) and writes
/// the map, the peak report and any requested extras.
pub fn run_map(
    setup: &Setup,
    method: Method,
    req: &MapRequest,
    cube: Option<&EchoCube>,
    out: Option<&Path>,
) -> Result<MapOutcome> {
    let owned;
    let cube = match cube {
        Some(c) => c,
        None => {
            owned = setup.cube(req.seed)?;
            &owned
        }
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut files = Vec::new();
    let mut path = |name: &str| {
        out.map(|d| {
            let p = d.join(name);
            files.push(p.clone());
            p
        })
    };
    let rp = &setup.params;
    let tgt = setup.truths[0];
    let (grid, delay_half) = hypothesis_window(setup, req)?;

    let mut outcome = match method {
        Method::Classic => {
            let rc = range_compress(cube, &setup.waveform)?;
            let map = doppler_process(&rc, rp, setup.scenario.processing.doppler_pad)?;
            let peak = extract_rd_peak(&map, rp.c0, None)?;
            if let Some(p) = path("rd_map.csv") {
                formats::write_rd_map(&crop_rd(&map, setup, delay_half), rp.c0, &p, Some(max_of(&map.values)))?;
            }
            MapOutcome { peak, rda: None, rd: Some(map), ambiguity: None, stretch: None, files: Vec::new() }
        }
        Method::Cago => {
            let proc = RdaProcessor::new(cube, &setup.waveform, setup.options(delay_half))?;
            let map = proc.map(&grid)?;
            let peak = extract_peak(&map, None)?;
            let top = map.max();
            for ia in 0..map.accelerations.len() {
                if let Some(p) = path(&format!("rda_map_a{ia:03}.csv")) {
                    formats::write_rda_slice(&map, ia, &p, top)?;
                }
            }
            if let Some(p) = path("velocity_profile.csv") {
                write_velocity_profile(&map, &p, top)?;
            }
            let ambiguity = match setup.scenario.ambiguity {
                Some(a) => {
                    let ia = nearest(&map.accelerations, tgt.a0);
                    let prof = velocity_profile(&map, ia);
                    let levels = sidelobe_levels(
                        &map.velocities,
                        &prof,
                        tgt.v0,
                        rp.ambiguous_velocity(),
                        a.orders,
                        a.search_cells * rp.velocity_resolution(),
                    )?;
                    if let Some(p) = path("ambiguity.json") {
                        formats::write_json(
                            &serde_json::json!({ "levels_db": levels.levels_db, "truncated": levels.truncated }),
                            &p,
                        )?;
                    }
                    Some(levels)
                }
                None => None,
            };
            MapOutcome { peak, rda: Some(map), rd: None, ambiguity, stretch: None, files: Vec::new() }
        }
        Method::Oracle => {
            let axis = RdaProcessor::new(cube, &setup.waveform, setup.options(delay_half))?.axis();
            let delays = axis.values();
            let prof: Vec<f64> = cago_td_profile(cube, &setup.waveform, tgt.v0, tgt.a0, &delays, true)?
                .iter()
                .map(|z| z.norm())
                .collect();
            let exact = matched_filter_exact(cube, &setup.waveform, &tgt)?.norm();
            let map = RdaMap {
                values: prof.clone(),
                delays: delays.clone(),
                velocities: vec![tgt.v0],
                accelerations: vec![tgt.a0],
                c0: rp.c0,
            };
            let peak = extract_peak(&map, None)?;
            if let Some(p) = path("oracle_profile.csv") {
                formats::write_profiles(&p, &delays, rp.c0, &[("cago_td", &prof)], max_of(&prof))?;
            }
            if let Some(p) = path("oracle.json") {
                formats::write_json(&serde_json::json!({ "exact_magnitude": exact }), &p)?;
            }
            MapOutcome { peak, rda: Some(map), rd: None, ambiguity: None, stretch: None, files: Vec::new() }
        }
    };
    if req.compare_stretch {
        let cmp = compare_stretch(setup, cube, delay_half)?;
        if let Some(p) = path("stretch_profiles.csv") {
            let reference = max_of(&cmp.on).max(max_of(&cmp.off));
            formats::write_profiles(&p, &cmp.delays, rp.c0, &[("stretch_on", &cmp.on), ("stretch_off", &cmp.off)], reference)?;
        }
        if let Some(p) = path("stretch.json") {
            formats::write_json(&cmp, &p)?;
        }
        outcome.stretch = Some(cmp);
    }
    if let Some(p) = path("peak.json") {
        formats::write_peak(&outcome.peak, &p)?;
    }
    outcome.files = files;
    Ok(outcome)
}

fn hypothesis_window(setup: &Setup, req: &MapRequest) -> Result<(HypothesisGrid, usize)> {
    let sc = &setup.scenario;
    let rp = &setup.params;
    let k = if req.full { sc.grid.full_factor } else { 1 };
    let base = sc.grid(req.full)?;
    let delay_half = sc.grid.delay_half * k;
    let Some(acc) = &req.accelerations else {
        return Ok((base, delay_half));
    };
    let tgt = setup.truths[0];
    let dv = rp.velocity_resolution() / sc.grid.v_oversample as f64;
    let dvel = tgt.a0 * rp.tcpi();
    let (lo, hi) = (dvel.min(0.0), dvel.max(0.0));
    let pad = (sc.grid.v_half * k) as i64;
    let first = (lo / dv).floor() as i64 - pad;
    let last = (hi / dv).ceil() as i64 + pad;
    let velocities = (first..=last).map(|i| tgt.v0 + i as f64 * dv).collect();
    let excursion = 0.5 * tgt.a0.abs() * rp.tcpi().powi(2);
    let extra = (2.0 * excursion / rp.c0 * rp.fs).ceil() as usize;
    Ok((HypothesisGrid::new(velocities, acc.clone())?, delay_half + extra))
}

/// Integrates the true hypothesis with and without stretch compensation.
pub fn compare_stretch(setup: &Setup, cube: &EchoCube, delay_half: usize) -> Result<StretchComparison> {
    let rp = &setup.params;
    let tgt = setup.truths[0];
    let run = |stretch: bool| -> Result<(Vec<f64>, Vec<f64>)> {
        let opts = RdaOptions { stretch, ..setup.options(delay_half) };
        let proc = RdaProcessor::new(cube, &setup.waveform, opts)?;
        let prof = proc.integrate(Hypothesis::new(tgt.v0, tgt.a0))?.iter().map(|z| z.norm()).collect();
        Ok((proc.axis().values(), prof))
    };
    let (delays, on) = run(true)?;
    let (_, off) = run(false)?;
    let locate = |p: &[f64]| {
        let k = argmax(p);
        (20.0 * p[k].log10(), 0.5 * rp.c0 * delays[k] - tgt.r0)
    };
    let (peak_on_db, bias_on_m) = locate(&on);
    let (peak_off_db, bias_off_m) = locate(&off);
    Ok(StretchComparison {
        peak_on_db,
        peak_off_db,
        degradation_db: peak_on_db - peak_off_db,
        bias_on_m,
        bias_off_m,
        range_cell_m: rp.c0 / (2.0 * rp.bandwidth),
        delays,
        on,
        off,
    })
}

/// First index of the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(0.0, f64::max)
}

fn nearest(xs: &[f64], x: f64) -> usize {
    (0..xs.len()).min_by(|&a, &b| (xs[a] - x).abs().total_cmp(&(xs[b] - x).abs())).unwrap_or(0)
}

/// Largest magnitude over delay for each velocity of slice `ia`.
pub fn velocity_profile(map: &RdaMap, ia: usize) -> Vec<f64> {
    (0..map.velocities.len()).map(|iv| max_of(map.profile(ia, iv))).collect()
}

fn write_velocity_profile(map: &RdaMap, path: &Path, reference: f64) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        a0_mps2: f64,
        v0_mps: f64,
        max_db: f64,
    }
    let mut rows = Vec::new();
    for (ia, &a) in map.accelerations.iter().enumerate() {
        for (iv, m) in velocity_profile(map, ia).into_iter().enumerate() {
            rows.push(Row { a0_mps2: a, v0_mps: map.velocities[iv], max_db: formats::db_rel(m, reference) });
        }
    }
    formats::write_rows(path, &rows)
}

/// Rows of a range-Doppler map within `half` samples of the target delay
/// window.
fn crop_rd(map: &RdMap, setup: &Setup, half: usize) -> RdMap {
    let tau0 = 2.0 * setup.truths[0].r0 / setup.params.c0;
    let reach = (half as f64 + 0.5) / setup.params.fs;
    let keep: Vec<usize> = (0..map.delays.len()).filter(|&i| (map.delays[i] - tau0).abs() <= reach).collect();
    let nf = map.dopplers.len();
    RdMap {
        values: keep.iter().flat_map(|&i| map.values[i * nf..(i + 1) * nf].iter().cloned()).collect(),
        delays: keep.iter().map(|&i| map.delays[i]).collect(),
        dopplers: map.dopplers.clone(),
        velocities: map.velocities.clone(),
    }
}

/// One row of the loss sweep.
#[derive(Debug, Clone, Serialize)]
pub struct LossRow {
    pub fc: f64,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    #[serde(rename = "Tpri")]
    pub tpri: f64,
    #[serde(rename = "Tp")]
    pub tp: f64,
    pub r0: f64,
    pub v0: f64,
    pub a0: f64,
    #[serde(rename = "Np")]
    pub np: usize,
    pub upsilon: f64,
    pub loss_db: f64,
    pub predicted_db: f64,
    /// `ok`, or `skipped: <reason>`.
    pub status: String,
}

/// Sampling rate of sweep runs relative to the bandwidth.
pub const SWEEP_OVERSAMPLING: f64 = 1.25;

/// Correlation loss at the truth for one combination, with a Costas pulse of
/// [`default_hops`] hops.
pub fn loss_row(c: &Combination) -> LossRow {
    let tau = 2.0 * c.r0 / rda_core::motion::C0;
    let upsilon = acceleration_ratio(c.a0, c.tp, tau, c.fc, rda_core::motion::C0);
    let mut row = LossRow {
        fc: c.fc,
        bandwidth: c.bandwidth,
        tpri: c.tpri,
        tp: c.tp,
        r0: c.r0,
        v0: c.v0,
        a0: c.a0,
        np: c.np,
        upsilon,
        loss_db: f64::NAN,
        predicted_db: predicted_loss(upsilon),
        status: "ok".into(),
    };
    let run = || -> Result<f64> {
        let rp = RadarParams::new(c.fc, c.bandwidth, c.tpri, c.tp, c.np, SWEEP_OVERSAMPLING * c.bandwidth)?;
        let w = Waveform::costas(default_hops(c.bandwidth, c.tp), c.tp, c.bandwidth, rp.fs)?;
        let tgt = TargetTruth::new(c.r0, c.v0, c.a0);
        let win = ReceiveWindow::fit(&rp, &[tgt], 8)?;
        let cube = synthesize_echo(&rp, &[tgt], &w, win)?;
        Ok(correlation_loss(&cube, &w, &tgt)?)
    };
    match run() {
        Ok(l) => row.loss_db = l,
        Err(e) => row.status = format!("skipped: {e}"),
    }
    row
}

/// Runs `rows` in order and writes `loss_sweep.csv`.
pub fn run_loss_sweep(rows: &[Combination], out: Option<&Path>) -> Result<Vec<LossRow>> {
    let result: Vec<LossRow> = rows.iter().map(loss_row).collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        formats::write_rows(&dir.join("loss_sweep.csv"), &result)?;
    }
    Ok(result)
}

/// Rows of a sweep: all of them, or the stratified subset of `count`.
pub fn sweep_rows(spec: &SweepSpec, full: bool, count: Option<usize>) -> Vec<Combination> {
    if full {
        spec.combinations()
    } else {
        spec.stratified(count.unwrap_or(spec.subset))
    }
}

/// Wall-clock comparison of the direct correlator and the FFT path for one
/// hypothesis and one pulse.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n_r: usize,
    pub n_t: usize,
    pub transform_len: usize,
    pub oracle_s: f64,
    pub cago_s: f64,
    pub measured_ratio: f64,
    pub speedup_estimate: f64,
}

/// Default benchmark sizes `(N_r, N_t)`.
pub const BENCH_SIZES: [(usize, usize); 4] = [(8192, 2048), (16384, 4096), (32768, 8192), (65536, 16384)];

/// Times both paths on an LFM echo; the FFT path is the best of `reps`.
pub fn run_bench(sizes: &[(usize, usize)], reps: usize, out: Option<&Path>) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &(n_r, n_t) in sizes {
        if n_t == 0 || n_r < n_t {
            bail!("benchmark size ({n_r}, {n_t}) needs 0 < N_t <= N_r");
        }
        let fs = 1.25e6;
        let tp = n_t as f64 / fs;
        let rp = RadarParams::new(1.3e9, 1e6, 2.0 * tp, tp, 1, fs)?;
        let t_off = 1e-3;
        let tau0 = t_off + ((n_r - n_t) / 2) as f64 / fs;
        let tgt = TargetTruth::new(0.5 * rp.c0 * tau0, 50.0, 0.0);
        let w = Waveform::lfm(tp, rp.bandwidth, fs)?;
        let cube = synthesize_echo(&rp, &[tgt], &w, ReceiveWindow::new(t_off, n_r))?;
        let proc = RdaProcessor::new(&cube, &w, RdaOptions::default())?;
        let hyp = Hypothesis::new(tgt.v0, tgt.a0);
        let mut cago_s = f64::INFINITY;
        for _ in 0..reps.max(1) {
            let t = Instant::now();
            std::hint::black_box(proc.integrate(hyp)?);
            cago_s = cago_s.min(t.elapsed().as_secs_f64());
        }
        let delays = proc.axis().values();
        let t = Instant::now();
        std::hint::black_box(cago_td_pulse(&cube, &w, tgt.v0, tgt.a0, 1, &delays, true)?);
        let oracle_s = t.elapsed().as_secs_f64();
        rows.push(BenchRow {
            n_r,
            n_t,
            transform_len: proc.transform_len(),
            oracle_s,
            cago_s,
            measured_ratio: oracle_s / cago_s,
            speedup_estimate: speedup_estimate(n_r, n_t),
        });
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        formats::write_rows(&dir.join("bench.csv"), &rows)?;
    }
    Ok(rows)
}

/// R² of the through-origin fit `cago_s = c (N_r + 2N_t) ln(N_r + 2N_t)`.
pub fn nlogn_fit_r2(rows: &[BenchRow]) -> f64 {
    let x: Vec<f64> = rows
        .iter()
        .map(|r| {
            let s = (r.n_r + 2 * r.n_t) as f64;
            s * s.ln()
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.cago_s).collect();
    let c = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - c * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        let mut sc = Scenario::preset("table1").unwrap();
        sc.name = "small".into();
        sc.radar.np = 8;
        sc.radar.tp = 2e-4;
        sc.radar.bandwidth = 1e6;
        sc.radar.fs = Some(1.25e6);
        sc.waveform = crate::scenario::WaveformSpec::Costas { hops: Some(12) };
        sc.grid.v_half = 2;
        sc.grid.a_half = 1;
        sc.grid.delay_half = 4;
        sc
    }

    #[test]
    fn cago_map_finds_the_truth_cell() {
        let setup = Setup::new(&small(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_map(&setup, Method::Cago, &MapRequest::default(), None, Some(dir.path())).unwrap();
        let t = setup.truths[0];
        assert!((out.peak.r0_hat - t.r0).abs() < 1e-6);
        assert_eq!((out.peak.v0_hat, out.peak.a0_hat), (t.v0, t.a0));
        let names: Vec<String> =
            out.files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert!(names.contains(&"rda_map_a000.csv".to_string()) && names.contains(&"peak.json".to_string()));
        assert!(out.files.iter().all(|p| p.exists()));
    }

    #[test]
    fn classic_and_oracle_methods_run() {
        let setup = Setup::new(&small(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let c = run_map(&setup, Method::Classic, &MapRequest::default(), None, Some(dir.path())).unwrap();
        assert!(c.rd.is_some());
        let o = run_map(&setup, Method::Oracle, &MapRequest::default(), None, None).unwrap();
        assert!((o.peak.r0_hat - setup.truths[0].r0).abs() < 1e-6);
    }

    #[test]
    fn mismatch_window_covers_the_velocity_excursion() {
        let setup = Setup::new(&small(), None).unwrap();
        let req = MapRequest { accelerations: Some(vec![0.0]), ..MapRequest::default() };
        let (g, half) = hypothesis_window(&setup, &req).unwrap();
        let t = setup.truths[0];
        let v_end = t.v0 + t.a0 * setup.params.tcpi();
        assert!(g.velocities[0] < t.v0 && *g.velocities.last().unwrap() > v_end);
        assert!(g.velocities.contains(&t.v0));
        assert!(half >= setup.scenario.grid.delay_half);
    }

    #[test]
    fn skipped_rows_are_flagged() {
        let mut c = Scenario::preset("table4").unwrap().sweep.unwrap().combinations()[0];
        c.tp = c.tpri * 2.0;
        let r = loss_row(&c);
        assert!(r.status.starts_with("skipped"), "{}", r.status);
        assert!(r.loss_db.is_nan());
    }

    #[test]
    fn r2_of_an_exact_fit_is_one() {
        let rows: Vec<BenchRow> = [(1000usize, 100usize), (2000, 200), (4000, 400)]
            .iter()
            .map(|&(n_r, n_t)| {
                let s = (n_r + 2 * n_t) as f64;
                BenchRow {
                    n_r,
                    n_t,
                    transform_len: 0,
                    oracle_s: 1.0,
                    cago_s: 3e-9 * s * s.ln(),
                    measured_ratio: 0.0,
                    speedup_estimate: 0.0,
                }
            })
            .collect();
        assert!((nlogn_fit_r2(&rows) - 1.0).abs() < 1e-12);
    }
}

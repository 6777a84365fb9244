//! Scenario configuration and the built-in presets.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rda_core::waveform::supported_orders;
use rda_core::{HypothesisGrid, Hypothesis, RadarParams, TargetTruth, Waveform};

const PRESETS: [(&str, &str); 4] = [
    ("table1", include_str!("../presets/table1.toml")),
    ("table2", include_str!("../presets/table2.toml")),
    ("table3", include_str!("../presets/table3.toml")),
    ("table4", include_str!("../presets/table4.toml")),
];

/// Sampling rate used when a scenario does not set one, relative to the
/// bandwidth.
pub const DEFAULT_OVERSAMPLING: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub radar: Radar,
    pub targets: Vec<Target>,
    pub waveform: WaveformSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub processing: ProcessingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity: Option<AmbiguitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Radar {
    pub fc: f64,
    pub bandwidth: f64,
    pub tpri: f64,
    pub tp: f64,
    pub np: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub r0: f64,
    pub v0: f64,
    pub a0: f64,
}

impl From<Target> for TargetTruth {
    fn from(t: Target) -> Self {
        TargetTruth::new(t.r0, t.v0, t.a0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveformSpec {
    Lfm,
    Costas {
        /// Number of hops; defaults to the supported order nearest
        /// `sqrt(B Tp)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hops: Option<usize>,
    },
    /// Raw samples written by `synth` (or any compatible tool).
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// Extra samples on each side of the echo span.
    #[serde(default = "default_guard")]
    pub guard: usize,
    /// Explicit receive-window start after each transmit, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_off: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_r: Option<usize>,
}

fn default_guard() -> usize {
    8
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { guard: default_guard(), t_off: None, n_r: None }
    }
}

/// Hypothesis window around the first target. Steps are the velocity and
/// acceleration resolutions divided by the oversampling factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_v_half")]
    pub v_half: usize,
    #[serde(default = "default_a_half")]
    pub a_half: usize,
    #[serde(default = "one")]
    pub v_oversample: usize,
    #[serde(default = "one")]
    pub a_oversample: usize,
    /// Output delay bins on each side of the target delay.
    #[serde(default = "default_delay_half")]
    pub delay_half: usize,
    /// Multiplier applied to all half-widths by `--full`.
    #[serde(default = "default_full_factor")]
    pub full_factor: usize,
}

fn default_v_half() -> usize {
    10
}
fn default_a_half() -> usize {
    5
}
fn default_delay_half() -> usize {
    32
}
fn default_full_factor() -> usize {
    8
}
fn one() -> usize {
    1
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            v_half: default_v_half(),
            a_half: default_a_half(),
            v_oversample: 1,
            a_oversample: 1,
            delay_half: default_delay_half(),
            full_factor: default_full_factor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingSpec {
    #[serde(default = "default_upsample")]
    pub upsample: usize,
    #[serde(default = "yes")]
    pub stretch: bool,
    #[serde(default = "one")]
    pub delay_oversample: usize,
    #[serde(default = "default_pad")]
    pub doppler_pad: usize,
}

fn default_upsample() -> usize {
    16
}
fn yes() -> bool {
    true
}
fn default_pad() -> usize {
    4
}

impl Default for ProcessingSpec {
    fn default() -> Self {
        ProcessingSpec { upsample: 16, stretch: true, delay_oversample: 1, doppler_pad: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-sample SNR of a unit-amplitude echo, dB.
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguitySpec {
    pub orders: usize,
    /// Search half-width around each ambiguity, in velocity resolution cells.
    #[serde(default = "default_search_cells")]
    pub search_cells: f64,
}

fn default_search_cells() -> f64 {
    2.0
}

/// Cartesian parameter sweep for the correlation-loss study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub fc: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub tpri: Vec<f64>,
    pub tp: Vec<f64>,
    pub r0: Vec<f64>,
    pub v0: Vec<f64>,
    pub a0: Vec<f64>,
    pub np: Vec<usize>,
    /// Rows in the default stratified subset.
    #[serde(default = "default_subset")]
    pub subset: usize,
}

fn default_subset() -> usize {
    64
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub fc: f64,
    pub bandwidth: f64,
    pub tpri: f64,
    pub tp: f64,
    pub r0: f64,
    pub v0: f64,
    pub a0: f64,
    pub np: usize,
}

impl SweepSpec {
    /// Full Cartesian product, acceleration varying slowest.
    pub fn combinations(&self) -> Vec<Combination> {
        let mut out = Vec::new();
        for &a0 in &self.a0 {
            for &fc in &self.fc {
                for &bandwidth in &self.bandwidth {
                    for &tpri in &self.tpri {
                        for &tp in &self.tp {
                            for &r0 in &self.r0 {
                                for &v0 in &self.v0 {
                                    for &np in &self.np {
                                        out.push(Combination { fc, bandwidth, tpri, tp, r0, v0, a0, np });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `count` combinations spread evenly over the acceleration levels.
    ///
    /// Row `j` takes level `j mod L`; within a level, picks are evenly spaced
    /// and rotated by a level-dependent offset so that the other parameters
    /// vary across levels.
    pub fn stratified(&self, count: usize) -> Vec<Combination> {
        let all = self.combinations();
        let levels = self.a0.len();
        if levels == 0 || all.is_empty() || count >= all.len() {
            return all;
        }
        let block = all.len() / levels;
        let per_level = count.div_ceil(levels);
        (0..count)
            .map(|j| {
                let (level, k) = (j % levels, j / levels);
                let idx = (k * block / per_level + 37 * level) % block;
                all[level * block + idx]
            })
            .collect()
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).context("invalid scenario file")?;
        sc.check()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match PRESETS.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => Self::from_toml(text).with_context(|| format!("preset {name}")),
            None => bail!(
                "unknown preset {name:?}; available: {}",
                PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ),
        }
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    /// A preset name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<Self> {
        if PRESETS.iter().any(|(n, _)| *n == spec) {
            return Self::preset(spec);
        }
        let text = std::fs::read_to_string(Path::new(spec))
            .with_context(|| format!("cannot read scenario {spec:?} (not a preset name either)"))?;
        Self::from_toml(&text)
    }

    /// Validates everything that does not need the waveform file.
    pub fn check(&self) -> Result<()> {
        self.params()?;
        if self.targets.is_empty() {
            bail!("scenario {:?} has no targets", self.name);
        }
        for t in &self.targets {
            if !(t.r0.is_finite() && t.v0.is_finite() && t.a0.is_finite()) || t.r0 <= 0.0 {
                bail!("target {t:?} needs a positive range and finite motion");
            }
        }
        if let WaveformSpec::Costas { hops: Some(n) } = self.waveform {
            if !supported_orders().contains(&n) {
                bail!("no Costas sequence of order {n}");
            }
        }
        let g = &self.grid;
        if g.v_oversample == 0 || g.a_oversample == 0 || g.full_factor == 0 {
            bail!("grid oversampling and full_factor must be at least 1");
        }
        let p = &self.processing;
        if p.upsample == 0 || p.delay_oversample == 0 || p.doppler_pad == 0 {
            bail!("processing upsample, delay_oversample and doppler_pad must be at least 1");
        }
        if let Some(s) = &self.sweep {
            if s.combinations().is_empty() {
                bail!("sweep has an empty parameter list");
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<RadarParams> {
        let r = &self.radar;
        let fs = r.fs.unwrap_or(DEFAULT_OVERSAMPLING * r.bandwidth);
        Ok(RadarParams::new(r.fc, r.bandwidth, r.tpri, r.tp, r.np, fs)?)
    }

    pub fn truths(&self) -> Vec<TargetTruth> {
        self.targets.iter().map(|&t| t.into()).collect()
    }

    /// Builds the waveform; relative file paths resolve against `base`.
    pub fn build_waveform(&self, base: Option<&Path>) -> Result<Waveform> {
        let rp = self.params()?;
        Ok(match &self.waveform {
            WaveformSpec::Lfm => Waveform::lfm(rp.tp, rp.bandwidth, rp.fs)?,
            WaveformSpec::Costas { hops } => {
                let n = hops.unwrap_or_else(|| default_hops(rp.bandwidth, rp.tp));
                Waveform::costas(n, rp.tp, rp.bandwidth, rp.fs)?
            }
            WaveformSpec::File { path } => {
                let p = match base {
                    Some(b) if Path::new(path).is_relative() => b.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                let w = crate::formats::read_waveform(&p)?;
                if (w.fs() - rp.fs).abs() > 1e-9 * rp.fs || w.len() != rp.pulse_samples() {
                    bail!(
                        "waveform file {} has fs = {} Hz and {} samples; the scenario needs fs = {} Hz and {} samples",
                        p.display(),
                        w.fs(),
                        w.len(),
                        rp.fs,
                        rp.pulse_samples()
                    );
                }
                w
            }
        })
    }

    /// Hypothesis window around the first target. `full` widens every
    /// half-width by `full_factor`.
    pub fn grid(&self, full: bool) -> Result<HypothesisGrid> {
        let rp = self.params()?;
        let g = &self.grid;
        let k = if full { g.full_factor } else { 1 };
        let t = self.targets[0];
        let dv = rp.velocity_resolution() / g.v_oversample as f64;
        let da = rp.acceleration_resolution() / g.a_oversample as f64;
        Ok(HypothesisGrid::window(Hypothesis::new(t.v0, t.a0), dv, g.v_half * k, da, g.a_half * k)?)
    }
}

/// Supported Costas order closest to the time-bandwidth root `sqrt(B Tp)`;
/// ties go to the lower order.
pub fn default_hops(bandwidth: f64, tp: f64) -> usize {
    let target = (bandwidth * tp).sqrt();
    supported_orders()
        .into_iter()
        .min_by(|&a, &b| {
            let d = |n: usize| (n as f64 - target).abs();
            d(a).total_cmp(&d(b)).then(a.cmp(&b))
        })
        .unwrap_or(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for name in Scenario::preset_names() {
            let sc = Scenario::preset(name).unwrap();
            assert_eq!(sc.name, name);
            let text = sc.to_toml().unwrap();
            assert_eq!(Scenario::from_toml(&text).unwrap(), sc, "{name}");
        }
    }

    #[test]
    fn preset_values() {
        let t1 = Scenario::preset("table1").unwrap();
        assert_eq!(t1.radar.np, 120);
        assert_eq!(t1.targets[0], Target { r0: 310e3, v0: 500.0, a0: 300.0 });
        let t3 = Scenario::preset("table3").unwrap();
        assert_eq!(t3.radar.np, 6);
        assert!((t3.radar.tp / t3.radar.tpri - 1.0 / 6.0).abs() < 1e-12);
        let t4 = Scenario::preset("table4").unwrap();
        assert_eq!(t4.sweep.unwrap().combinations().len(), 1664);
    }

    #[test]
    fn unknown_keys_and_presets_are_rejected() {
        assert!(Scenario::preset("table9").is_err());
        let mut text = Scenario::preset("table1").unwrap().to_toml().unwrap();
        text = text.replace("[radar]", "[radar]\nfoo = 1");
        assert!(Scenario::from_toml(&text).is_err());
        let bad = Scenario::preset("table1").unwrap().to_toml().unwrap().replace("hops = 126", "hops = 118");
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn stratified_subset_covers_every_level() {
        let sweep = Scenario::preset("table4").unwrap().sweep.unwrap();
        let rows = sweep.stratified(64);
        assert_eq!(rows.len(), 64);
        for a in &sweep.a0 {
            let n = rows.iter().filter(|c| c.a0 == *a).count();
            assert!((4..=5).contains(&n), "a0 = {a}: {n}");
        }
        for (i, a) in rows.iter().enumerate() {
            assert!(rows[..i].iter().all(|b| b != a), "duplicate row {i}");
        }
        assert_eq!(sweep.stratified(16).len(), 16);
        assert_eq!(sweep.stratified(5000).len(), 1664);
    }

    #[test]
    fn hop_defaults() {
        assert_eq!(default_hops(8e6, 2e-3), 126);
        assert_eq!(default_hops(2e6, 4e-3), 88);
        assert_eq!(default_hops(2e6, 8e-3), 126);
    }

    #[test]
    fn grid_is_centred_on_truth() {
        let sc = Scenario::preset("table1").unwrap();
        let g = sc.grid(false).unwrap();
        assert_eq!((g.velocities.len(), g.accelerations.len()), (21, 11));
        assert_eq!(g.velocities[10], 500.0);
        assert_eq!(g.accelerations[5], 300.0);
        assert_eq!(sc.grid(true).unwrap().velocities.len(), 161);
    }
}

//! On-disk artifacts.
//!
//! Sample files are little-endian interleaved `f64` pairs `(re, im)`, with a
//! TOML sidecar of the same stem. Maps are CSV in dB relative to the map
//! maximum, peak reports are JSON.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rda_core::{Complex64, EchoCube, PeakReport, RadarParams, RdMap, RdaMap, Waveform};

/// Floor for dB values of zero magnitudes.
pub const DB_FLOOR: f64 = -300.0;

pub fn db_rel(x: f64, reference: f64) -> f64 {
    if x > 0.0 && reference > 0.0 {
        (20.0 * (x / reference).log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

fn write_samples<'a>(path: &Path, rows: impl Iterator<Item = &'a [Complex64]>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        for z in row {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.len() % 16 != 0 {
        bail!("{}: length {} is not a multiple of 16 bytes", path.display(), bytes.len());
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

/// Sidecar of a cube file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    pub fc: f64,
    pub bandwidth: f64,
    pub tpri: f64,
    pub tp: f64,
    pub np: usize,
    pub fs: f64,
    pub c0: f64,
    pub n_r: usize,
    pub t_off: f64,
    pub noise_power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Writes `<stem>.bin` and `<stem>.toml` into `dir`.
pub fn write_cube(cube: &EchoCube, dir: &Path, stem: &str) -> Result<()> {
    let rp = &cube.params;
    let header = CubeHeader {
        fc: rp.fc,
        bandwidth: rp.bandwidth,
        tpri: rp.tpri,
        tp: rp.tp,
        np: rp.np,
        fs: rp.fs,
        c0: rp.c0,
        n_r: cube.n_r(),
        t_off: cube.t_off,
        noise_power: cube.noise_power,
        seed: cube.seed,
    };
    write_samples(&dir.join(format!("{stem}.bin")), cube.records.iter().map(|r| r.as_slice()))?;
    fs::write(dir.join(format!("{stem}.toml")), toml::to_string(&header)?)?;
    Ok(())
}

pub fn read_cube(dir: &Path, stem: &str) -> Result<EchoCube> {
    let side = dir.join(format!("{stem}.toml"));
    let text = fs::read_to_string(&side).with_context(|| format!("cannot read {}", side.display()))?;
    let h: CubeHeader = toml::from_str(&text).with_context(|| format!("invalid cube header {}", side.display()))?;
    let mut params = RadarParams::new(h.fc, h.bandwidth, h.tpri, h.tp, h.np, h.fs)?;
    params.c0 = h.c0;
    let samples = read_samples(&dir.join(format!("{stem}.bin")))?;
    if samples.len() != h.np * h.n_r {
        bail!("cube file holds {} samples, header says {} x {}", samples.len(), h.np, h.n_r);
    }
    let records = samples.chunks(h.n_r.max(1)).map(|c| c.to_vec()).collect();
    Ok(EchoCube { params, records, t_off: h.t_off, noise_power: h.noise_power, seed: h.seed })
}

/// Sidecar of a waveform file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformHeader {
    pub kind: String,
    pub fs: f64,
    pub tp: f64,
    pub bandwidth: f64,
}

/// Writes `<path>` (samples) and `<path>.toml`.
pub fn write_waveform(w: &Waveform, path: &Path) -> Result<()> {
    let header = WaveformHeader { kind: w.kind().name().into(), fs: w.fs(), tp: w.tp(), bandwidth: w.bandwidth() };
    write_samples(path, std::iter::once(w.samples()))?;
    fs::write(sidecar(path), toml::to_string(&header)?)?;
    Ok(())
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    s.into()
}

/// Reads a sample file written by [`write_waveform`]. The samples are
/// imported as-is, whatever kind produced them.
pub fn read_waveform(path: &Path) -> Result<Waveform> {
    let side = sidecar(path);
    let text = fs::read_to_string(&side).with_context(|| format!("cannot read {}", side.display()))?;
    let h: WaveformHeader = toml::from_str(&text)?;
    let samples = read_samples(path)?;
    let w = Waveform::from_samples(samples, h.bandwidth, h.fs)?;
    if (w.tp() - h.tp).abs() > 0.5 / h.fs {
        bail!("{}: {} samples at {} Hz do not span Tp = {} s", path.display(), w.len(), h.fs, h.tp);
    }
    Ok(w)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn db(x: f64) -> String {
    format!("{x:.4}")
}

/// Range-Doppler map: two header rows (Doppler and velocity per column),
/// then one row per delay with `delay_s, range_m` and dB values relative to
/// `reference` (the map maximum when `None`).
pub fn write_rd_map(map: &RdMap, c0: f64, path: &Path, reference: Option<f64>) -> Result<()> {
    let peak = reference.unwrap_or_else(|| map.values.iter().cloned().fold(0.0, f64::max));
    let mut w = csv_writer(path)?;
    let head = |label: &str, xs: &[f64]| {
        let mut r = vec![label.to_string(), String::new()];
        r.extend(xs.iter().map(|&x| num(x)));
        r
    };
    w.write_record(head("doppler_hz", &map.dopplers))?;
    w.write_record(head("velocity_mps", &map.velocities))?;
    let nf = map.dopplers.len();
    for (i, &d) in map.delays.iter().enumerate() {
        let mut r = vec![num(d), num(0.5 * c0 * d)];
        r.extend(map.values[i * nf..(i + 1) * nf].iter().map(|&v| db(db_rel(v, peak))));
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One acceleration slice of an RDA map: a velocity header row, then one
/// row per delay. Values in dB relative to `reference`.
pub fn write_rda_slice(map: &RdaMap, ia: usize, path: &Path, reference: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut head = vec![format!("a0_mps2={}", map.accelerations[ia]), "velocity_mps".to_string()];
    head.extend(map.velocities.iter().map(|&v| num(v)));
    w.write_record(head)?;
    for (id, &d) in map.delays.iter().enumerate() {
        let mut r = vec![num(d), num(0.5 * map.c0 * d)];
        r.extend((0..map.velocities.len()).map(|iv| db(db_rel(map.at(ia, iv, id), reference))));
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Delay profiles side by side: `delay_s, range_m, <name>...` in dB relative
/// to `reference`.
pub fn write_profiles(path: &Path, delays: &[f64], c0: f64, columns: &[(&str, &[f64])], reference: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut head = vec!["delay_s".to_string(), "range_m".to_string()];
    head.extend(columns.iter().map(|(n, _)| format!("{n}_db")));
    w.write_record(head)?;
    for (i, &d) in delays.iter().enumerate() {
        let mut r = vec![num(d), num(0.5 * c0 * d)];
        r.extend(columns.iter().map(|(_, c)| db(db_rel(c[i], reference))));
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Any serializable rows as CSV with a header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PeakJson {
    r0_hat: f64,
    v0_hat: f64,
    a0_hat: f64,
    peak_db: f64,
    peak_complex_sum_magnitude: f64,
}

pub fn write_peak(report: &PeakReport, path: &Path) -> Result<()> {
    let j = PeakJson {
        r0_hat: report.r0_hat,
        v0_hat: report.v0_hat,
        a0_hat: report.a0_hat,
        peak_db: report.peak_db,
        peak_complex_sum_magnitude: report.peak_complex_sum_magnitude,
    };
    fs::write(path, serde_json::to_string_pretty(&j)? + "\n")?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rda_core::Error as CoreError;
use rda_harness::experiments::{self, nlogn_fit_r2, sweep_rows, BENCH_SIZES};
use rda_harness::formats;
use rda_harness::scenario::WaveformSpec;
use rda_harness::{MapRequest, Method, Scenario, Setup};

/// Range-Doppler-acceleration experiments on simulated radar echoes.
#[derive(Parser)]
#[command(name = "rda", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Preset name (table1..table4) or path to a scenario TOML file.
    #[arg(long, default_value = "table1")]
    scenario: String,
    /// Output directory [default: out/<scenario name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed, overriding the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the scenario waveform.
    #[arg(long, value_enum)]
    waveform: Option<WaveformArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the echo cube of a scenario.
    Synth(Common),
    /// Compress a scenario into a map and report its peak.
    Map {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "cago")]
        method: MethodArg,
        /// Widen the hypothesis and delay windows by the scenario's full_factor.
        #[arg(long)]
        full: bool,
        /// Comma-separated acceleration hypotheses, m/s², replacing the grid.
        #[arg(long, value_delimiter = ',')]
        accel: Option<Vec<f64>>,
        /// Disable intra-pulse stretch compensation.
        #[arg(long)]
        no_stretch: bool,
        /// Also write true-hypothesis profiles with and without stretch.
        #[arg(long)]
        compare_stretch: bool,
        /// Read the cube written by `synth` from this directory instead of
        /// synthesizing it.
        #[arg(long)]
        cube: Option<PathBuf>,
    },
    /// Correlation loss over the scenario's parameter sweep.
    LossSweep {
        #[command(flatten)]
        common: Common,
        /// All combinations instead of the stratified subset.
        #[arg(long)]
        full: bool,
        /// Size of the stratified subset.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Time the direct correlator against the FFT path.
    Bench {
        /// Output directory.
        #[arg(long, default_value = "out/bench")]
        out: PathBuf,
        /// Sizes as N_r:N_t, comma-separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<String>>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Classic,
    Cago,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum WaveformArg {
    Lfm,
    Costas,
}

fn load(common: &Common) -> Result<(Scenario, Option<PathBuf>, PathBuf)> {
    let mut sc = Scenario::load(&common.scenario)?;
    match common.waveform {
        Some(WaveformArg::Lfm) => sc.waveform = WaveformSpec::Lfm,
        Some(WaveformArg::Costas) if !matches!(sc.waveform, WaveformSpec::Costas { .. }) => {
            sc.waveform = WaveformSpec::Costas { hops: None };
        }
        _ => {}
    }
    let base = Path::new(&common.scenario).parent().filter(|_| Path::new(&common.scenario).is_file());
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
    Ok((sc, base.map(Path::to_path_buf), out))
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(':').with_context(|| format!("size {s:?} is not N_r:N_t"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth(common) => {
            let (sc, base, out) = load(&common)?;
            let setup = Setup::new(&sc, base.as_deref())?;
            let cube = experiments::run_synth(&setup, common.seed, &out)?;
            println!("wrote {} pulses x {} samples to {}", cube.records.len(), cube.n_r(), out.display());
        }
        Command::Map { common, method, full, accel, no_stretch, compare_stretch, cube } => {
            let (mut sc, base, out) = load(&common)?;
            if no_stretch {
                sc.processing.stretch = false;
            }
            let setup = Setup::new(&sc, base.as_deref())?;
            let cube = cube.map(|d| formats::read_cube(&d, "cube")).transpose()?;
            let method = match method {
                MethodArg::Classic => Method::Classic,
                MethodArg::Cago => Method::Cago,
                MethodArg::Oracle => Method::Oracle,
            };
            let req = MapRequest { full, accelerations: accel, compare_stretch, seed: common.seed };
            let res = experiments::run_map(&setup, method, &req, cube.as_ref(), Some(&out))?;
            let p = res.peak;
            println!(
                "peak {:.3} dB at r0 = {:.3} m, v0 = {:.4} m/s, a0 = {:.4} m/s^2",
                p.peak_db, p.r0_hat, p.v0_hat, p.a0_hat
            );
            if let Some(a) = &res.ambiguity {
                let levels: Vec<String> = a.levels_db.iter().map(|l| format!("{l:.2}")).collect();
                println!("ambiguity levels [dB]: {}{}", levels.join(", "), if a.truncated { " (truncated)" } else { "" });
            }
            if let Some(s) = &res.stretch {
                println!(
                    "stretch off: {:.2} dB lower, bias {:.2} m (on: {:.2} m)",
                    s.degradation_db, s.bias_off_m, s.bias_on_m
                );
            }
            println!("outputs in {}", out.display());
        }
        Command::LossSweep { common, full, rows } => {
            let (sc, _, out) = load(&common)?;
            let spec = sc.sweep.as_ref().with_context(|| format!("scenario {:?} has no [sweep] section", sc.name))?;
            let combos = sweep_rows(spec, full, rows);
            let result = experiments::run_loss_sweep(&combos, Some(&out))?;
            let skipped = result.iter().filter(|r| r.status != "ok").count();
            let worst = result
                .iter()
                .filter(|r| r.status == "ok" && r.upsilon <= 0.6)
                .map(|r| (r.loss_db - r.predicted_db).abs())
                .fold(0.0, f64::max);
            println!(
                "{} rows ({skipped} skipped); max |loss - predicted| for upsilon <= 0.6: {worst:.3} dB",
                result.len()
            );
            println!("wrote {}", out.join("loss_sweep.csv").display());
        }
        Command::Bench { out, sizes, reps } => {
            let sizes = match sizes {
                Some(s) => s.iter().map(|x| parse_size(x)).collect::<Result<Vec<_>>>()?,
                None => BENCH_SIZES.to_vec(),
            };
            let rows = experiments::run_bench(&sizes, reps, Some(&out))?;
            for r in &rows {
                println!(
                    "N_r {:>7} N_t {:>7}: oracle {:.3} s, fft {:.4} s, ratio {:.1} (estimate {:.1})",
                    r.n_r, r.n_t, r.oracle_s, r.cago_s, r.measured_ratio, r.speedup_estimate
                );
            }
            if rows.len() >= 2 {
                println!("R^2 of n log n fit: {:.4}", nlogn_fit_r2(&rows));
            }
        }
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CoreError>() {
            return c.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
    }
    "usage"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({
                "error": error_kind(&e),
                "message": format!("{e:#}"),
            });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}

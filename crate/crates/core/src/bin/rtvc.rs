use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rtvc::dsp::features::FeatureMatrix;
use rtvc::dsp::wav::{read_wav, read_raw, write_raw, write_wav, SampleFormat};
use rtvc::metrics::{report as metric_report, CepstraTrack};
use rtvc::runtime::{
    approximate_track, bench, convert_pipelined, init_dense, init_random, loss_eval, LatencyReport,
    LossEvalOptions, ModelBundle, Preset, RunConfig, Session, SessionOptions,
};
use rtvc::{Error, Result};

const EXIT_OVERRUN: u8 = 4;

#[derive(Parser)]
#[command(name = "rtvc", version, about = "Streaming low-latency voice conversion")]
struct Cli {
    /// TOML file with defaults for any flag; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a WAV file.
    Convert(ConvertArgs),
    /// Convert raw mono PCM from standard input to standard output.
    Stream(ConvertArgs),
    /// Time the streaming engine on synthetic input.
    Bench(BenchArgs),
    /// Write a deterministic random weight container.
    InitWeights(InitArgs),
    /// Prune the recurrent kernels of a container.
    Sparsify(SparsifyArgs),
    /// Evaluate the training objective on a generated/reference pair.
    LossEval(LossEvalArgs),
    /// Objective metrics between two utterances (WAV or VCFT features).
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    target_speaker: Option<usize>,
    /// Only needed for models in the pretraining wiring.
    #[arg(long)]
    source_speaker: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Condition the vocoder on the decoder mean instead of a sample.
    #[arg(long)]
    condition_on_mean: bool,
    /// Run front end, spectral model and vocoder on separate threads.
    #[arg(long)]
    pipelined: bool,
    #[arg(long)]
    queue_depth: Option<usize>,
    /// Samples per read; defaults to one hop.
    #[arg(long)]
    chunk: Option<usize>,
    /// Raw sample format for `stream`: s16 or f32.
    #[arg(long)]
    format: Option<SampleFormat>,
    /// Write the latency report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Exit with status 4 when any frame takes longer than one hop.
    #[arg(long)]
    strict_rt: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long)]
    preset: Option<String>,
    /// Benchmark a container instead of a preset.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Exit with status 4 when the total real-time factor reaches 1.
    #[arg(long)]
    strict_rt: bool,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every recurrent kernel dense.
    #[arg(long)]
    dense: bool,
}

#[derive(Args)]
struct SparsifyArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Per-gate densities of the spectral-model recurrences, `r,z,n`.
    #[arg(long, value_delimiter = ',')]
    densities: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LossEvalArgs {
    #[arg(long)]
    gen: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    source_speaker: Option<usize>,
    /// Defaults to the source speaker.
    #[arg(long)]
    target_speaker: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    gen: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Command {
    fn as_config(&self) -> RunConfig {
        let d = RunConfig::default();
        match self {
            Command::Convert(a) | Command::Stream(a) => RunConfig {
                input: a.input.clone(),
                out: a.out.clone(),
                weights: a.weights.clone(),
                target_speaker: a.target_speaker,
                source_speaker: a.source_speaker,
                seed: a.seed,
                condition_on_mean: flag(a.condition_on_mean),
                pipelined: flag(a.pipelined),
                queue_depth: a.queue_depth,
                chunk: a.chunk,
                format: a.format,
                report: a.report.clone(),
                strict_rt: flag(a.strict_rt),
                ..d
            },
            Command::Bench(a) => RunConfig {
                seconds: a.seconds,
                preset: a.preset.clone(),
                weights: a.weights.clone(),
                seed: a.seed,
                report: a.report.clone(),
                strict_rt: flag(a.strict_rt),
                ..d
            },
            Command::InitWeights(a) => RunConfig {
                preset: a.preset.clone(),
                seed: a.seed,
                out: a.out.clone(),
                dense: flag(a.dense),
                ..d
            },
            Command::Sparsify(a) => RunConfig {
                input: a.input.clone(),
                densities: a.densities.clone(),
                out: a.out.clone(),
                ..d
            },
            Command::LossEval(a) => RunConfig {
                gen: a.gen.clone(),
                reference: a.reference.clone(),
                weights: a.weights.clone(),
                source_speaker: a.source_speaker,
                target_speaker: a.target_speaker,
                seed: a.seed,
                out: a.out.clone(),
                ..d
            },
            Command::Metrics(a) => RunConfig {
                gen: a.gen.clone(),
                reference: a.reference.clone(),
                out: a.out.clone(),
                ..d
            },
        }
    }
}

fn need<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("--{name} is required")))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    std::fs::write(path, text + "\n").map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })
}

fn session_options(c: &RunConfig) -> Result<SessionOptions> {
    Ok(SessionOptions {
        target: need(c.target_speaker, "target-speaker")?,
        source: c.source_speaker,
        seed: c.seed.unwrap_or(0),
        condition_on_mean: c.condition_on_mean.unwrap_or(false),
    })
}

/// Returns the process status: 0, or 4 for a strict real-time violation.
fn finish_report(c: &RunConfig, r: &LatencyReport) -> Result<u8> {
    if let Some(p) = &c.report {
        write_json(p, r)?;
    }
    if c.strict_rt.unwrap_or(false) && r.overrun_frames > 0 {
        eprintln!("rtvc: {} frames exceeded the hop duration", r.overrun_frames);
        return Ok(EXIT_OVERRUN);
    }
    Ok(0)
}

fn run_convert(c: &RunConfig) -> Result<u8> {
    let bundle = ModelBundle::load(need(c.weights.as_ref(), "weights")?)?;
    let audio = read_wav(need(c.input.as_ref(), "in")?)?;
    if audio.sample_rate != bundle.audio.sample_rate_hz {
        return Err(Error::InvalidInput(format!(
            "input is {} Hz, model expects {} Hz",
            audio.sample_rate, bundle.audio.sample_rate_hz
        )));
    }
    let opts = session_options(c)?;
    let chunk = c.chunk.unwrap_or(bundle.audio.hop_samples()).max(1);
    let (pcm, report) = if c.pipelined.unwrap_or(false) {
        let mut pcm = Vec::with_capacity(audio.samples.len());
        let input = audio.samples.chunks(chunk).map(|s| Ok(s.to_vec()));
        let depth = c.queue_depth.unwrap_or(4);
        let r = convert_pipelined(&bundle, input, &opts, depth, &mut |s| {
            pcm.extend_from_slice(s);
            Ok(())
        })?;
        (pcm, r)
    } else {
        let mut s = Session::new(&bundle, opts)?;
        let mut pcm = Vec::with_capacity(audio.samples.len() + 4 * bundle.audio.hop_samples());
        for x in audio.samples.chunks(chunk) {
            s.push(x, &mut pcm)?;
        }
        s.finish(&mut pcm)?;
        (pcm, s.report())
    };
    write_wav(need(c.out.as_ref(), "out")?, &pcm, bundle.audio.sample_rate_hz, audio.format)?;
    finish_report(c, &report)
}

fn run_stream(c: &RunConfig) -> Result<u8> {
    let bundle = ModelBundle::load(need(c.weights.as_ref(), "weights")?)?;
    let opts = session_options(c)?;
    let format = c.format.unwrap_or_default();
    let chunk = c.chunk.unwrap_or(bundle.audio.hop_samples()).max(1);
    let mut stdout = BufWriter::new(std::io::stdout().lock());
    if c.pipelined.unwrap_or(false) {
        let depth = c.queue_depth.unwrap_or(4);
        let mut stdin = std::io::stdin();
        let input = std::iter::from_fn(move || {
            let mut buf = vec![0.0f32; chunk];
            match read_raw(&mut stdin, format, &mut buf) {
                Ok(0) => None,
                Ok(n) => {
                    buf.truncate(n);
                    Some(Ok(buf))
                }
                Err(e) => Some(Err(e)),
            }
        });
        let r = convert_pipelined(&bundle, input, &opts, depth, &mut |s| {
            write_raw(&mut stdout, format, s)?;
            Ok(stdout.flush()?)
        })?;
        return finish_report(c, &r);
    }
    let mut stdin = std::io::stdin().lock();
    let strict = c.strict_rt.unwrap_or(false);
    let mut s = Session::new(&bundle, opts)?;
    let mut buf = vec![0.0f32; chunk];
    let mut out = Vec::with_capacity(chunk + 4 * bundle.audio.hop_samples());
    loop {
        let n = read_raw(&mut stdin, format, &mut buf)?;
        if n == 0 {
            break;
        }
        out.clear();
        s.push(&buf[..n], &mut out)?;
        write_raw(&mut stdout, format, &out)?;
        stdout.flush()?;
        if strict && s.report().overrun_frames > 0 {
            break;
        }
    }
    if !(strict && s.report().overrun_frames > 0) {
        out.clear();
        s.finish(&mut out)?;
        write_raw(&mut stdout, format, &out)?;
    }
    stdout.flush()?;
    finish_report(c, &s.report())
}

fn run_bench(c: &RunConfig) -> Result<u8> {
    let seed = c.seed.unwrap_or(0);
    let bundle = match &c.weights {
        Some(p) => ModelBundle::load(p)?,
        None => init_random(seed, c.preset.as_deref().unwrap_or("paper-scale").parse()?)?,
    };
    let r = bench(&bundle, c.seconds.unwrap_or(10.0), seed)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    if let Some(p) = &c.report {
        write_json(p, &r)?;
    }
    if c.strict_rt.unwrap_or(false) && r.total_rtf >= 1.0 {
        eprintln!("rtvc: total real-time factor {:.3} is not below 1", r.total_rtf);
        return Ok(EXIT_OVERRUN);
    }
    Ok(0)
}

fn run_init(c: &RunConfig) -> Result<u8> {
    let preset: Preset = need(c.preset.as_deref(), "preset")?.parse()?;
    let seed = c.seed.unwrap_or(0);
    let bundle = if c.dense.unwrap_or(false) {
        init_dense(seed, preset)?
    } else {
        init_random(seed, preset)?
    };
    bundle.save(need(c.out.as_ref(), "out")?)?;
    Ok(0)
}

fn run_sparsify(c: &RunConfig) -> Result<u8> {
    let bundle = ModelBundle::load(need(c.input.as_ref(), "in")?)?;
    let d = match c.densities.as_deref() {
        Some(&[r, z, n]) => [r, z, n],
        Some(other) => {
            return Err(Error::InvalidInput(format!("expected three densities, got {}", other.len())))
        }
        None => bundle.cyclevae.config.densities,
    };
    bundle.sparsify(d)?.save(need(c.out.as_ref(), "out")?)?;
    Ok(0)
}

fn load_pcm(path: &Path, sample_rate: u32) -> Result<Vec<f32>> {
    let a = read_wav(path)?;
    if a.sample_rate != sample_rate {
        return Err(Error::InvalidInput(format!(
            "{}: {} Hz, expected {sample_rate} Hz",
            path.display(),
            a.sample_rate
        )));
    }
    Ok(a.samples)
}

fn run_loss_eval(c: &RunConfig) -> Result<u8> {
    let bundle = ModelBundle::load(need(c.weights.as_ref(), "weights")?)?;
    let sr = bundle.audio.sample_rate_hz;
    let gen = load_pcm(need(c.gen.as_ref(), "gen")?, sr)?;
    let reference = load_pcm(need(c.reference.as_ref(), "ref")?, sr)?;
    let source = c.source_speaker.unwrap_or(0);
    let opts = LossEvalOptions {
        source,
        target: c.target_speaker.unwrap_or(source),
        seed: c.seed.unwrap_or(0),
        weights: c.loss_weights.unwrap_or_default(),
    };
    let r = loss_eval(&bundle, &gen, &reference, &opts)?;
    let mut stdout = std::io::stdout().lock();
    for (k, v) in r.key_values() {
        writeln!(stdout, "{k}={v}")?;
    }
    if let Some(p) = &c.out {
        write_json(p, &r)?;
    }
    Ok(0)
}

enum Track {
    Features(CepstraTrack),
    Approximate(CepstraTrack),
}

fn load_track(path: &Path) -> Result<Track> {
    let mut magic = [0u8; 4];
    let mut f = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })?;
    f.read_exact(&mut magic).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })?;
    if &magic == b"VCFT" {
        return Ok(Track::Features(CepstraTrack::from_features(&FeatureMatrix::load(path)?)?));
    }
    let a = read_wav(path)?;
    let cfg = rtvc::dsp::AudioConfig {
        sample_rate_hz: a.sample_rate,
        fmax_hz: a.sample_rate as f64 / 2.0,
        ..Default::default()
    };
    Ok(Track::Approximate(approximate_track(&cfg, &a.samples)?))
}

fn run_metrics(c: &RunConfig) -> Result<u8> {
    let gen = load_track(need(c.gen.as_ref(), "gen")?)?;
    let reference = load_track(need(c.reference.as_ref(), "ref")?)?;
    let r = match (&gen, &reference) {
        (Track::Features(a), Track::Features(b)) => metric_report(a, b, true, false)?,
        (Track::Approximate(a), Track::Approximate(b)) => metric_report(a, b, false, true)?,
        _ => {
            return Err(Error::InvalidInput(
                "--gen and --ref must both be feature files or both be WAV".into(),
            ))
        }
    };
    println!("{}", serde_json::to_string_pretty(&r)?);
    if let Some(p) = &c.out {
        write_json(p, &r)?;
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let c = file.merge(cli.cmd.as_config());
    match cli.cmd {
        Command::Convert(_) => run_convert(&c),
        Command::Stream(_) => run_stream(&c),
        Command::Bench(_) => run_bench(&c),
        Command::InitWeights(_) => run_init(&c),
        Command::Sparsify(_) => run_sparsify(&c),
        Command::LossEval(_) => run_loss_eval(&c),
        Command::Metrics(_) => run_metrics(&c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rtvc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `i2vc`: encode, decode, evaluate and inspect the codec from the shell.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 configuration, 5 input
//! validation, 6 malformed container, 7 truncated container, 8 codec.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use i2vc::config::RunConfig;
use i2vc::container::{quantize_lambda, Container, ContainerHeader, LAMBDA_SCALE};
use i2vc::gop::{schedule, Codec, FrameType, GopMode, StartPolicy};
use i2vc::harness::{rd_sweep, rd_sweep_detailed, synth_sequence, write_csv, SequenceKind};
use i2vc::{rawio, Error, Frame};

const SEED_ENV: &str = "I2VC_SEED";

#[derive(Parser)]
#[command(name = "i2vc", version, about = "Unified intra/inter learned video codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a directory of .rgbp frames into a container file.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
        /// Also write the encoder-side reconstructions to this directory.
        #[arg(long)]
        recon: Option<PathBuf>,
    },
    /// Decode a container file into a directory of .rgbp frames.
    Decode { input: PathBuf, output: PathBuf },
    /// Rate-distortion sweep over a λ grid, as CSV.
    Eval {
        input: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
        /// Comma-separated λ values; defaults to the configured λ.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        /// Emit per-frame rows as well as the aggregates.
        #[arg(long)]
        per_frame: bool,
        /// Write the CSV here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the coding schedule of one GoP.
    Schedule {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Write a synthetic test sequence as .rgbp frames.
    Synth {
        output: PathBuf,
        /// moving_square, zoom, static or noise.
        #[arg(long, default_value = "moving_square")]
        kind: String,
        #[arg(long, default_value_t = 32)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Flags override the config file, which overrides `I2VC_SEED` and the
/// built-in defaults.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key-value run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<GopMode>,
    /// GoP size.
    #[arg(long)]
    gop: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Denoising steps T.
    #[arg(long)]
    tsteps: Option<usize>,
    /// Inversion steps T′.
    #[arg(long)]
    invsteps: Option<usize>,
    /// P anchors per GoP (LDB).
    #[arg(long)]
    pcount: Option<usize>,
    /// I anchors per GoP (RA).
    #[arg(long)]
    icount: Option<usize>,
    /// consistent or literal.
    #[arg(long = "start-step")]
    start_step: Option<StartPolicy>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut base = RunConfig::default();
        if let Ok(s) = std::env::var(SEED_ENV) {
            base.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
        }
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load_over(p, base)?,
            None => base,
        };
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.gop {
            cfg.gop_size = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tsteps {
            cfg.steps = v;
        }
        if let Some(v) = self.invsteps {
            cfg.inv_steps = v;
        }
        if let Some(v) = self.pcount {
            cfg.p_count = v;
        }
        if let Some(v) = self.icount {
            cfg.i_count = v;
        }
        if let Some(v) = self.start_step {
            cfg.start_policy = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::InvalidConfig(_)
        | Error::InvalidRate(_)
        | Error::InvalidGop(_)
        | Error::StepOutOfRange { .. }
        | Error::InvalidSchedule(_) => 4,
        Error::NotDivisible { .. }
        | Error::InvalidFrame(_)
        | Error::DimensionMismatch { .. }
        | Error::ChannelMismatch { .. } => 5,
        Error::Format(_) => 6,
        Error::TruncatedStream { .. } | Error::TruncatedPayload { .. } => 7,
        Error::SymbolOutOfAlphabet { .. } | Error::MissingReference { .. } => 8,
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new().prefix(".i2vc-").tempfile_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes `frames` into a fresh directory next to `dir` and renames it
/// into place. `dir` must be absent or empty.
fn write_frames_atomic(dir: &Path, frames: &[Frame]) -> Result<(), Error> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::AlreadyExists,
            format!("output directory {} is not empty", dir.display()),
        )));
    }
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let tmp = tempfile::Builder::new().prefix(".i2vc-").tempdir_in(parent)?;
    rawio::write_frame_dir(tmp.path(), frames)?;
    if dir.exists() {
        fs::remove_dir(dir)?;
    }
    fs::rename(tmp.keep(), dir)?;
    Ok(())
}

fn read_input(dir: &Path) -> Result<Vec<Frame>, Error> {
    let frames = rawio::read_frame_dir(dir)?;
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidFrame(format!("no .rgbp frames in {}", dir.display())))?;
    let (h, w) = (first.height(), first.width());
    if h % 4 != 0 || w % 4 != 0 {
        return Err(Error::NotDivisible { height: h, width: w });
    }
    for f in &frames {
        f.ensure_same_dims(first)?;
    }
    Ok(frames)
}

fn cmd_encode(input: &Path, output: &Path, opts: &ConfigArgs, recon: Option<&Path>) -> Result<(), Error> {
    let cfg = opts.resolve()?;
    let frames = read_input(input)?;
    let (h, w) = (frames[0].height(), frames[0].width());
    let gop = cfg.gop_config();
    let header = ContainerHeader::new(&cfg.codec_settings()?, &gop, h, w)?;
    let codec = Codec::new(header.codec_settings())?;
    let seq = codec.encode_sequence(&frames, &gop)?;
    let bytes = Container::from_sequence(header, &seq).to_bytes()?;
    write_atomic(output, &bytes)?;
    if let Some(dir) = recon {
        let frames: Vec<Frame> = seq.recon.iter().map(|r| r.frame.clone()).collect();
        write_frames_atomic(dir, &frames)?;
    }
    let count = |t: FrameType| seq.records.iter().filter(|r| r.frame_type == t).count();
    let pixels = (frames.len() * h * w) as f64;
    println!(
        "encoded {} frames {w}x{h} mode={} lambda={} I={} P={} B={} bytes={} bpp={:.6}",
        frames.len(),
        gop.mode,
        header.lambda(),
        count(FrameType::I),
        count(FrameType::P),
        count(FrameType::B),
        bytes.len(),
        8.0 * bytes.len() as f64 / pixels
    );
    Ok(())
}

fn cmd_decode(input: &Path, output: &Path) -> Result<(), Error> {
    let bytes = fs::read(input)?;
    let c = Container::parse(&bytes)?;
    if c.records.is_empty() {
        return Err(Error::Format("container holds no frame records".into()));
    }
    let h = c.header;
    let codec = Codec::new(h.codec_settings())?;
    let recon = codec.decode_sequence(&c.payloads(), &h.gop_config(), h.height as usize, h.width as usize)?;
    let frames: Vec<Frame> = recon.into_iter().map(|r| r.frame).collect();
    write_frames_atomic(output, &frames)?;
    println!(
        "decoded {} frames {}x{} mode={} lambda={}",
        frames.len(),
        h.width,
        h.height,
        h.mode,
        h.lambda()
    );
    Ok(())
}

fn cmd_eval(
    input: &Path,
    opts: &ConfigArgs,
    lambdas: &[f64],
    per_frame: bool,
    output: Option<&Path>,
) -> Result<(), Error> {
    let cfg = opts.resolve()?;
    let frames = read_input(input)?;
    let grid = if lambdas.is_empty() { vec![cfg.lambda] } else { lambdas.to_vec() };
    let grid = grid
        .iter()
        .map(|&l| quantize_lambda(l).map(|q| q as f64 / LAMBDA_SCALE))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = cfg.codec_settings()?;
    let gop = cfg.gop_config();
    let points = if per_frame {
        rd_sweep_detailed(&frames, &gop, &grid, &settings)?
    } else {
        rd_sweep(&frames, &gop, &grid, &settings)?
    };
    let mut csv = Vec::new();
    write_csv(&points, &mut csv)?;
    match output {
        Some(p) => write_atomic(p, &csv),
        None => Ok(io::stdout().write_all(&csv)?),
    }
}

fn cmd_schedule(opts: &ConfigArgs) -> Result<(), Error> {
    let cfg = opts.resolve()?;
    print!("{}", schedule(&cfg.gop_config())?.dump());
    Ok(())
}

fn cmd_synth(output: &Path, kind: &str, n: usize, height: usize, width: usize, seed: u64) -> Result<(), Error> {
    let kind: SequenceKind = kind.parse()?;
    let seq = synth_sequence(kind, n, height, width, seed)?;
    write_frames_atomic(output, &seq.frames)?;
    println!("wrote {n} {} frames {width}x{height} to {}", kind.name(), output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Encode {
            input,
            output,
            opts,
            recon,
        } => cmd_encode(&input, &output, &opts, recon.as_deref()),
        Command::Decode { input, output } => cmd_decode(&input, &output),
        Command::Eval {
            input,
            opts,
            lambdas,
            per_frame,
            output,
        } => cmd_eval(&input, &opts, &lambdas, per_frame, output.as_deref()),
        Command::Schedule { opts } => cmd_schedule(&opts),
        Command::Synth {
            output,
            kind,
            frames,
            height,
            width,
            seed,
        } => cmd_synth(&output, &kind, frames, height, width, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("i2vc: usage: {}", single_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("i2vc: error: {}", single_line(&e.to_string()));
            ExitCode::from(exit_code(&e))
        }
    }
}

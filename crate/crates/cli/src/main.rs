use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bacs::bitstream::{audit_stream, read_stream};
use bacs::config::CodecConfig;
use bacs::pipeline::{self, sweep_csv, trace_csv, SweepPlan};
use bacs::synth::{synthetic_sequence, SyntheticSpec};
use bacs::video_io::{read_frames, write_frames, GrayImage, VideoFormat, VideoIoError};
use bacs::{Error, Frame, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Block-adaptive compressive video codec.
#[derive(Debug, Parser)]
#[command(name = "bacs", version)]
struct Cli {
    /// `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    codec: CodecFlags,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sense a sequence and write the bitstream.
    Encode {
        #[command(flatten)]
        input: InputArgs,
        /// Bitstream to write.
        #[arg(short, long)]
        output: PathBuf,
        /// Controller trace CSV (quality columns left empty).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Reconstruct a bitstream into a directory of PGM frames.
    Decode {
        /// Bitstream to read.
        #[arg(short, long)]
        input: PathBuf,
        /// Directory for frame_NNNNN.pgm files.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Encode, decode and score a sequence.
    Run {
        #[command(flatten)]
        input: InputArgs,
        /// Per-frame trace CSV with PSNR/SSIM.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also keep the bitstream.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Also write the reconstructed frames.
        #[arg(long, value_name = "DIR")]
        frames: Option<PathBuf>,
    },
    /// Re-run the codec over several target rates.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// Target rates, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.04,0.05,0.1,0.2,0.25,0.3")]
        targets: Vec<f64>,
        /// Lowest key-frame rate; each point uses max(this, factor * target).
        #[arg(long, default_value_t = 0.2)]
        high_floor: f64,
        #[arg(long, default_value_t = 2.0)]
        high_factor: f64,
        /// Report rates only, skipping reconstruction.
        #[arg(long)]
        no_quality: bool,
        /// CSV destination (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the built-in synthetic sequence as PGM frames.
    Synth {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        clip_seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    /// Directory of binary PGM files.
    Pgm,
    /// One file of concatenated 8-bit luma planes (needs --width/--height).
    Planar,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input directory (pgm) or file (planar).
    #[arg(short, long, required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pgm")]
    format: Format,
    /// Use the built-in synthetic sequence instead of an input.
    #[arg(long, conflicts_with = "input")]
    synthetic: bool,
    /// Seed of the synthetic sequence.
    #[arg(long, default_value_t = 1)]
    clip_seed: u64,
}

/// Mirrors the config keys.
#[derive(Debug, Args)]
struct CodecFlags {
    #[arg(long, global = true)]
    block_size: Option<usize>,
    #[arg(long, global = true)]
    high_sr: Option<f64>,
    #[arg(long, global = true)]
    target_sr: Option<f64>,
    #[arg(long, global = true)]
    frame_count: Option<usize>,
    #[arg(long, global = true)]
    width: Option<usize>,
    #[arg(long, global = true)]
    height: Option<usize>,
    #[arg(long, global = true)]
    threshold_init: Option<f64>,
    #[arg(long, global = true)]
    threshold_gamma: Option<f64>,
    #[arg(long, global = true)]
    threshold_min: Option<f64>,
    #[arg(long, global = true)]
    threshold_max: Option<f64>,
    #[arg(long, global = true)]
    cut_fraction: Option<f64>,
    #[arg(long, global = true)]
    initial_storage_fraction: Option<f64>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    step_size: Option<f64>,
    #[arg(long, global = true)]
    lambda_init: Option<f64>,
    #[arg(long, global = true)]
    lambda_decay: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disable block storage: every moving block goes out at high_sr.
    #[arg(long, global = true)]
    no_bss: bool,
    /// Freeze the detection threshold at threshold_init.
    #[arg(long, global = true)]
    no_dt: bool,
}

impl CodecFlags {
    fn apply(&self, cfg: &mut CodecConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field {
                    cfg.$field = v;
                })*
            };
        }
        set!(
            block_size,
            high_sr,
            target_sr,
            frame_count,
            width,
            height,
            threshold_init,
            threshold_gamma,
            threshold_min,
            threshold_max,
            cut_fraction,
            initial_storage_fraction,
            iterations,
            step_size,
            lambda_init,
            lambda_decay,
            seed
        );
        if self.no_bss {
            cfg.block_storage = false;
        }
        if self.no_dt {
            cfg.dynamic_threshold = false;
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    VideoIoError::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

fn write_file(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, data).map_err(|e| io_error(path, e))
}

fn load_config(cli: &Cli) -> Result<CodecConfig> {
    let mut cfg = CodecConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        cfg.apply_str(&text)?;
    }
    cli.codec.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn load_input(args: &InputArgs, cfg: &CodecConfig) -> Result<Vec<GrayImage>> {
    if args.synthetic {
        let defaults = SyntheticSpec::default();
        let spec = SyntheticSpec {
            width: if cfg.width > 0 { cfg.width } else { defaults.width },
            height: if cfg.height > 0 { cfg.height } else { defaults.height },
            frames: cfg.frame_count,
            seed: args.clip_seed,
            ..defaults
        };
        return Ok(synthetic_sequence(&spec).frames);
    }
    let path = args.input.as_deref().expect("clap requires --input without --synthetic");
    let format = match args.format {
        Format::Pgm => VideoFormat::PgmDir,
        Format::Planar => VideoFormat::Planar {
            width: cfg.width,
            height: cfg.height,
            count: None,
        },
    };
    Ok(read_frames(path, &format)?)
}

fn to_images(frames: &[Frame]) -> Vec<GrayImage> {
    frames
        .iter()
        .map(|f| GrayImage {
            width: f.width(),
            height: f.height(),
            data: f.to_u8(),
        })
        .collect()
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Encode { input, output, trace } => {
            let images = load_input(input, &cfg)?;
            let encoded = pipeline::encode(&images, &cfg)?;
            let bytes = encoded.to_bytes()?;
            write_file(output, &bytes)?;
            if let Some(path) = trace {
                write_file(path, trace_csv(&encoded.trace))?;
            }
            let (_, sr) = audit_stream(&bytes)?;
            println!("frames={} bytes={} average_sr={sr:.8}", images.len(), bytes.len());
        }
        Command::Decode { input, output } => {
            let bytes = fs::read(input).map_err(|e| io_error(input, e))?;
            let (header, sets) = read_stream(&bytes)?;
            let frames = pipeline::decode_sets(&header, &sets, &cfg)?;
            write_frames(output, &to_images(&frames))?;
            println!("frames={} width={} height={}", frames.len(), header.width, header.height);
        }
        Command::Run {
            input,
            trace,
            stream,
            frames,
        } => {
            let images = load_input(input, &cfg)?;
            let originals = pipeline::frames_from_images(&images, cfg.block_size)?;
            if let Some(path) = stream {
                write_file(path, pipeline::encode_frames(&originals, &cfg)?.to_bytes()?)?;
            }
            let (report, decoded) = pipeline::run_frames(&originals, &cfg)?;
            if let Some(path) = trace {
                write_file(path, report.to_csv())?;
            }
            if let Some(dir) = frames {
                write_frames(dir, &to_images(&decoded))?;
            }
            println!(
                "frames={} average_sr={:.8} mean_psnr={:.4} mean_ssim={:.6}",
                report.rows.len(),
                report.average_sr,
                report.mean_psnr,
                report.mean_ssim
            );
        }
        Command::Sweep {
            input,
            targets,
            high_floor,
            high_factor,
            no_quality,
            output,
        } => {
            let images = load_input(input, &cfg)?;
            let originals = pipeline::frames_from_images(&images, cfg.block_size)?;
            let plan = SweepPlan {
                high_sr_floor: *high_floor,
                high_sr_factor: *high_factor,
                with_quality: !no_quality,
            };
            let csv = sweep_csv(&pipeline::sweep(&originals, &cfg, targets, &plan)?);
            match output {
                Some(path) => write_file(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Synth { output, clip_seed } => {
            let args = InputArgs {
                input: None,
                format: Format::Pgm,
                synthetic: true,
                clip_seed: *clip_seed,
            };
            let images = load_input(&args, &cfg)?;
            write_frames(output, &images)?;
            println!("frames={} dir={}", images.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

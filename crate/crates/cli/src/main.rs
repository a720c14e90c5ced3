use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use binpick_core::io::{read_ply, read_pnm, write_mask_pgm, write_pgm, write_ply};
use binpick_core::pipeline::{localize_masks, segment, verify_against_ground_truth, DetectionReport, DEFAULT_MATCH_RADIUS_MM};
use binpick_core::segmentation::Bitmap;
use binpick_core::synth::{add_depth_noise, ground_truth, render_depth, render_image, GroundTruth, SceneSpec};
use binpick_core::{run_pipeline, BinaryMask, Error, OrganizedCloud, Phase, PipelineConfig};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "binpick", version, about = "Box detection and grasp poses from an RGB image and an organized depth cloud")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Child,
    Parent,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Child => Phase::ChildFirst,
            PhaseArg::Parent => Phase::ParentAfter,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene description into image.pgm, cloud.ply, truth.json and config.json.
    Synth {
        scene: PathBuf,
        /// Noise seed, overrides the scene's own.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment an image into full-frame mask PGMs.
    Segment {
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parent")]
        phase: PhaseArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate poses from mask PGMs and a cloud.
    Localize {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(required = true)]
        masks: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parent")]
        phase: PhaseArg,
        /// RANSAC seed, overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full detection on an image and a cloud.
    Pipeline {
        image: PathBuf,
        cloud: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parent")]
        phase: PhaseArg,
        /// RANSAC seed, overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare one or more reports with ground truth.
    Verify {
        truth: PathBuf,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Matching radius in mm.
        #[arg(long, default_value_t = DEFAULT_MATCH_RADIUS_MM)]
        radius: f64,
        /// Table path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_error(msg: String) -> anyhow::Error {
    Error::Config(msg).into()
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            PipelineConfig::from_json(&text).with_context(|| format!("loading {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        config.ransac_seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn synth(scene_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = fs::read_to_string(scene_path).with_context(|| format!("reading {}", scene_path.display()))?;
    let mut scene = SceneSpec::from_json(&text).map_err(|e| anyhow!("loading {}: {e}", scene_path.display()))?;
    if let Some(s) = seed {
        scene.seed = s;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cloud = add_depth_noise(&render_depth(&scene), scene.noise_sigma, scene.seed);
    write_pgm(create(&out.join("image.pgm"))?, &render_image(&scene))?;
    write_ply(create(&out.join("cloud.ply"))?, &cloud)?;
    emit(&ground_truth(&scene), Some(&out.join("truth.json")))?;
    let config = PipelineConfig { roi: Some(scene.rgb_bin_roi()), ..PipelineConfig::with_homography(scene.homography()) };
    emit(&config, Some(&out.join("config.json")))
}

fn segment_cmd(image: &Path, config: &PipelineConfig, phase: Phase, out: &Path) -> Result<()> {
    let img = read_pnm(open(image)?).with_context(|| format!("reading {}", image.display()))?;
    let seg = segment(config, &img, phase)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (i, m) in seg.masks.iter().enumerate() {
        let full = m.embed(seg.roi.x, seg.roi.y, img.width(), img.height());
        let path = out.join(format!("mask_{i:03}_{}.pgm", m.role.as_str()));
        write_mask_pgm(create(&path)?, &full.bits)?;
    }
    println!("{} contours, {} {} masks written to {}", seg.contours.len(), seg.masks.len(), phase.role().as_str(), out.display());
    Ok(())
}

fn read_mask(path: &Path, phase: Phase, source: usize) -> Result<BinaryMask> {
    let img = read_pnm(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let bits = Bitmap::from_bits(img.width(), img.height(), img.data().iter().map(|&v| v > 0).collect())?;
    Ok(BinaryMask { bits, role: phase.role(), source })
}

fn read_cloud(path: &Path) -> Result<OrganizedCloud> {
    read_ply(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn verify(truth: &Path, reports: &[PathBuf], radius: f64, out: Option<&Path>) -> Result<()> {
    if radius.is_nan() || radius <= 0.0 {
        bail!(config_error(format!("matching radius must be positive, got {radius}")));
    }
    let truth: Vec<GroundTruth> = read_json(truth)?;
    let mut poses = Vec::new();
    for r in reports {
        let report: DetectionReport = read_json(r)?;
        poses.extend(report.poses);
    }
    for (id, p) in poses.iter_mut().enumerate() {
        p.id = id;
    }
    emit(&verify_against_ground_truth(&poses, &truth, radius), out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { scene, seed, out } => synth(&scene, seed, &out),
        Command::Segment { image, config, phase, out } => {
            let config = load_config(config.as_deref(), None)?;
            segment_cmd(&image, &config, phase.into(), &out)
        }
        Command::Localize { cloud, masks, config, phase, seed, out } => {
            let config = load_config(config.as_deref(), seed)?;
            let phase = Phase::from(phase);
            let masks = masks.iter().enumerate().map(|(i, p)| read_mask(p, phase, i)).collect::<Result<Vec<_>>>()?;
            let cloud = read_cloud(&cloud)?;
            emit(&localize_masks(&config, &masks, (0, 0), &cloud)?, out.as_deref())
        }
        Command::Pipeline { image, cloud, config, phase, seed, out } => {
            let config = load_config(config.as_deref(), seed)?;
            let img = read_pnm(open(&image)?).with_context(|| format!("reading {}", image.display()))?;
            let cloud = read_cloud(&cloud)?;
            emit(&run_pipeline(&config, &img, &cloud, phase.into())?, out.as_deref())
        }
        Command::Verify { truth, reports, radius, out } => verify(&truth, &reports, radius, out.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<Error>(),
            Some(Error::Config(_) | Error::CalibrationMissing | Error::InvalidParameter(_) | Error::InvalidRadii { .. })
        )
    });
    if config {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

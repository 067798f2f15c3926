//! Command-line driver. Exit codes: 0 success, 1 runtime failure, 2 usage
//! error (bad flags or missing input files).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use avatarcraft::articulation::{interpolate_shape, render_articulated, ArticulationContext, MaskMode};
use avatarcraft::body_model::synthetic::{capsule_rig, humanoid_rig, CapsuleRigSpec};
use avatarcraft::body_model::{load_pose_sequence, RiggedBodyModel};
use avatarcraft::field::ImplicitAvatarField;
use avatarcraft::guidance::{GuidanceOracle, RemoteOracle};
use avatarcraft::math::Vec3;
use avatarcraft::renderer::{composite_render, render_image, BackgroundPolicy, Camera, DensityScene, RenderSettings};
use avatarcraft::training::{
    mock_oracle, reconstruct_template, run_generation, GenerationConfig, MeshTargets, OracleKind, ReconstructConfig,
};

#[derive(Parser)]
#[command(name = "avatarcraft", version, about = "Neural SDF avatars: reconstruct, generate, render, animate, reshape, composite")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a template field to renders of a rig's canonical mesh.
    Reconstruct {
        /// Rig file, or builtin:capsule | builtin:capsule1 | builtin:humanoid.
        #[arg(long)]
        rig: String,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[arg(long, default_value_t = 96)]
        res: usize,
        #[arg(long, default_value_t = 50)]
        views: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stylize a template under image guidance.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        rig: String,
        #[arg(long)]
        prompt: Option<String>,
        /// TOML run configuration; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Desk-scale schedule instead of the full one.
        #[arg(long)]
        desk: bool,
        #[arg(long, value_enum)]
        oracle: Option<OracleArg>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a checkpoint from one camera.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        /// Also write the expected-depth map.
        #[arg(long)]
        depth: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one frame per entry of a pose sequence.
    Animate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        rig: String,
        #[arg(long)]
        poses: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a shape interpolation between two beta vectors.
    Reshape {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        rig: String,
        /// Comma-separated betas.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta_a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta_b: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        frames: usize,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the avatar together with a primitive scene by depth test.
    Composite {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackgroundArg {
    White,
    Black,
    Noise,
}

#[derive(Args)]
struct ViewArgs {
    #[arg(long, default_value_t = 128)]
    res: usize,
    /// Degrees; 180 faces the avatar's front.
    #[arg(long, default_value_t = 180.0, allow_hyphen_values = true)]
    azimuth: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    elevation: f64,
    #[arg(long, default_value_t = 2.1)]
    distance: f64,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 45.0)]
    fov: f64,
    #[arg(long, default_value_t = 128)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = BackgroundArg::White)]
    background: BackgroundArg,
}

enum Failure {
    Usage(String),
    Runtime(avatarcraft::Error),
}

impl From<avatarcraft::Error> for Failure {
    fn from(e: avatarcraft::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} not found: {}", path.display())))
    }
}

fn load_rig(spec: &str) -> CliResult<RiggedBodyModel> {
    match spec {
        "builtin:capsule" => Ok(capsule_rig(&CapsuleRigSpec::default())),
        "builtin:capsule1" => Ok(capsule_rig(&CapsuleRigSpec { joints: 1, ..Default::default() })),
        "builtin:humanoid" => Ok(humanoid_rig()),
        path => {
            require(Path::new(path), "rig file")?;
            Ok(RiggedBodyModel::load(path)?)
        }
    }
}

fn load_field(path: &Path) -> CliResult<ImplicitAvatarField> {
    require(path, "checkpoint")?;
    Ok(ImplicitAvatarField::load(path)?)
}

impl ViewArgs {
    fn camera(&self, field: &ImplicitAvatarField) -> CliResult<Camera> {
        let domain = field.domain();
        let center = domain.center();
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        let eye = center + Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos()) * self.distance;
        let r = domain.bounding_radius();
        let near = (self.distance - r).max(1e-2);
        let camera = Camera::look_at(eye, center, Vec3::y(), self.fov.to_radians(), self.res, self.res, near, self.distance + r)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(camera)
    }

    fn settings(&self) -> RenderSettings {
        RenderSettings::with_samples(self.samples)
    }

    fn background(&self) -> BackgroundPolicy {
        match self.background {
            BackgroundArg::White => BackgroundPolicy::White,
            BackgroundArg::Black => BackgroundPolicy::Black,
            BackgroundArg::Noise => BackgroundPolicy::gaussian(),
        }
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Reconstruct { rig, steps, res, views, out } => {
            let model = load_rig(&rig)?;
            let config = ReconstructConfig {
                steps,
                resolution: res,
                views,
                seed,
                ..Default::default()
            };
            let report = reconstruct_template(&model, &config)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            report.field.save(&out)?;
            println!("held-out PSNR {:.2} dB ({steps} steps, {:.1} s)", report.psnr, report.seconds);
            println!("wrote {}", out.display());
        }
        Command::Generate {
            checkpoint,
            rig,
            prompt,
            config,
            desk,
            oracle,
            endpoint,
            out,
        } => {
            let template = load_field(&checkpoint)?;
            let model = load_rig(&rig)?;
            let mut cfg = match &config {
                Some(path) => {
                    require(path, "config file")?;
                    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    GenerationConfig::from_toml(&text).map_err(|e| Failure::Usage(e.to_string()))?
                }
                None if desk => GenerationConfig::desk(),
                None => GenerationConfig::default(),
            };
            cfg.seed = seed;
            if let Some(p) = prompt {
                cfg.prompt = p;
            }
            if let Some(o) = oracle {
                cfg.oracle.kind = match o {
                    OracleArg::Mock => OracleKind::Mock,
                    OracleArg::Remote => OracleKind::Remote,
                };
            }
            if let Some(e) = endpoint {
                cfg.oracle.endpoint = e;
            }
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let s = &cfg.schedule;
            println!(
                "coarse {r}x{r}, {} epochs ({} body + {} head captures); fine {f}x{f}, {} epochs ({} body + {} head captures); lr {}",
                s.coarse.epochs,
                s.coarse.body_captures,
                s.coarse.head_captures,
                s.fine.epochs,
                s.fine.body_captures,
                s.fine.head_captures,
                s.learning_rate,
                r = s.coarse.resolution,
                f = s.fine.resolution,
            );
            let mesh = model.template_mesh();
            let mut oracle: Box<dyn GuidanceOracle> = match cfg.oracle.kind {
                OracleKind::Mock => Box::new(mock_oracle(MeshTargets::new(mesh.clone()), &cfg)),
                OracleKind::Remote => Box::new(RemoteOracle::new(cfg.oracle.endpoint.clone()).with_input_size(cfg.oracle.input_size)),
            };
            if matches!(cfg.oracle.kind, OracleKind::Remote) {
                probe_remote(&cfg)?;
            }
            create_dir(&out)?;
            let report = run_generation(template, &mesh, oracle.as_mut(), cfg, Some(&out))?;
            let skipped = report.coarse.skipped + report.fine.skipped;
            println!("{} steps ({skipped} skipped) in {:.1} s", report.steps, report.seconds);
            for c in &report.checkpoints {
                println!("wrote {}", c.display());
            }
        }
        Command::Render { checkpoint, view, depth, out } => {
            let field = load_field(&checkpoint)?;
            create_dir(&out)?;
            let img = render_image(&field, &view.camera(&field)?, 1, view.background(), &view.settings(), seed)?;
            img.save(&out, "render", depth)?;
            println!("wrote {}", out.join("render.png").display());
        }
        Command::Animate {
            checkpoint,
            rig,
            poses,
            view,
            out,
        } => {
            let field = load_field(&checkpoint)?;
            let model = load_rig(&rig)?;
            require(&poses, "pose sequence")?;
            let frames = load_pose_sequence(&poses)?;
            create_dir(&out)?;
            let camera = view.camera(&field)?;
            for (i, frame) in frames.iter().enumerate() {
                let ctx = ArticulationContext::new(&model, &frame.configuration(), MaskMode::Hard, None)?;
                let img = render_articulated(&field, &camera, &ctx, 1, view.background(), &view.settings(), seed)?;
                img.rgb.save_png(out.join(format!("frame_{i:04}.png")))?;
            }
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::Reshape {
            checkpoint,
            rig,
            beta_a,
            beta_b,
            frames,
            view,
            out,
        } => {
            let field = load_field(&checkpoint)?;
            let model = load_rig(&rig)?;
            if beta_a.len() != model.num_betas || beta_b.len() != model.num_betas {
                return Err(Failure::Usage(format!("the rig has {} shape parameters", model.num_betas)));
            }
            create_dir(&out)?;
            let camera = view.camera(&field)?;
            let base = model.canonical_configuration();
            for i in 0..frames {
                let lambda = if frames > 1 { i as f64 / (frames - 1) as f64 } else { 0.0 };
                let cfg = interpolate_shape(&base, &beta_a, &beta_b, lambda)?;
                let ctx = ArticulationContext::new(&model, &cfg, MaskMode::Hard, None)?;
                let img = render_articulated(&field, &camera, &ctx, 1, view.background(), &view.settings(), seed)?;
                img.rgb.save_png(out.join(format!("frame_{i:04}.png")))?;
            }
            println!("wrote {frames} frames to {}", out.display());
        }
        Command::Composite {
            checkpoint,
            scene,
            threshold,
            view,
            out,
        } => {
            let field = load_field(&checkpoint)?;
            require(&scene, "scene file")?;
            let scene = DensityScene::load(&scene)?;
            create_dir(&out)?;
            let camera = view.camera(&field)?;
            let result = composite_render(&field, &scene, &camera, view.background(), &view.settings(), threshold, seed)?;
            result.render.save(&out, "composite", false)?;
            println!("wrote {}", out.join("composite.png").display());
        }
    }
    Ok(())
}

/// Fail fast when the guidance service is unreachable.
fn probe_remote(cfg: &GenerationConfig) -> CliResult<()> {
    let probe = RemoteOracle::new(cfg.oracle.endpoint.clone());
    let image = avatarcraft::renderer::RgbImage::new(cfg.oracle.input_size, cfg.oracle.input_size);
    let ctx = avatarcraft::guidance::GuidanceContext::new(&cfg.prompt, avatarcraft::guidance::BodyPart::Body, 0.0);
    probe.remote_sds_gradient(&image, &ctx)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

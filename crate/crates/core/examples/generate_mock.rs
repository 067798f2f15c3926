//! Desk-scale generation under mock guidance, starting from a template
//! checkpoint (see `reconstruct_template`).
//!
//! `cargo run --release --example generate_mock -- template.ckpt [full|no-sil|frozen] [out_dir]`
//!
//! `no-sil` drops the silhouette term and erases the torso from the
//! targets; `frozen` trains the color network only.

use std::ops::ControlFlow;
use std::path::PathBuf;

use avatarcraft::body_model::synthetic::{capsule_rig, CapsuleRigSpec};
use avatarcraft::field::ImplicitAvatarField;
use avatarcraft::training::{
    evaluation_cameras, mock_oracle, silhouette_agreement, target_psnr, GenerationConfig, GenerationObserver, GenerationSession,
    MeshTargets, Stage, StepDiagnostics,
};
use avatarcraft::renderer::Camera;

struct Monitor<'a> {
    template: &'a ImplicitAvatarField,
    cameras: &'a [Camera],
    every: usize,
}

impl GenerationObserver for Monitor<'_> {
    fn on_step(&mut self, d: &StepDiagnostics, field: &ImplicitAvatarField) -> ControlFlow<()> {
        if (d.step + 1) % self.every == 0 {
            let iou = silhouette_agreement(field, self.template, self.cameras, 64).unwrap();
            println!("step {:4} {} loss {:?} sil {:.4} iou {:.3} ({:.0} ms)", d.step + 1, d.stage, d.total, d.silhouette, iou, d.millis);
        }
        ControlFlow::Continue(())
    }

    fn on_stage_end(&mut self, stage: Stage, field: &ImplicitAvatarField) -> ControlFlow<()> {
        let iou = silhouette_agreement(field, self.template, self.cameras, 64).unwrap();
        println!("{stage} stage done, IoU vs template {iou:.3}");
        ControlFlow::Continue(())
    }
}

fn main() -> avatarcraft::Result<()> {
    let mut args = std::env::args().skip(1);
    let template = ImplicitAvatarField::load(args.next().expect("template checkpoint path"))?;
    let mode = args.next().unwrap_or_else(|| "full".into());
    let out = args.next().map(PathBuf::from);

    let mesh = capsule_rig(&CapsuleRigSpec::default()).template_mesh();
    let mut config = GenerationConfig::desk();
    config.prompt = "a knight in painted armor".into();
    let mut targets = MeshTargets::new(mesh.clone());
    match mode.as_str() {
        "no-sil" => {
            config.weights.silhouette = 0.0;
            targets = targets.erasing([-0.3, 0.3]);
        }
        "frozen" => config.train_geometry = false,
        _ => {}
    }
    let mut oracle = mock_oracle(targets, &config);
    let session = GenerationSession::new(template.clone(), &mesh, config)?;
    let mut sampler = session.config.cameras.clone();
    sampler.resolution = session.config.oracle.input_size;
    let cameras = evaluation_cameras(&session.boxes, &sampler, 4, 99)?;
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let mut monitor = Monitor { template: &template, cameras: &cameras, every: 20 };
    let report = session.run(&mut oracle, out.as_deref(), &mut monitor)?;
    let psnr = target_psnr(&report.field, &MeshTargets::new(mesh), &cameras, 64)?;
    println!("{} steps in {:.1} s, final PSNR vs targets {psnr:.2} dB", report.steps, report.seconds);
    Ok(())
}

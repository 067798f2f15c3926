//! Fit a template field to renders of the synthetic capsule rig.
//!
//! `cargo run --release --example reconstruct_template -- [steps] [out.ckpt]`

use avatarcraft::body_model::synthetic::{capsule_rig, CapsuleRigSpec};
use avatarcraft::field::SdfField;
use avatarcraft::training::{evaluate_views, reconstruct_template_with, reference_views, ReconstructConfig};

fn main() -> avatarcraft::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let out = args.next();
    let model = capsule_rig(&CapsuleRigSpec::default());
    let config = ReconstructConfig { steps, ..Default::default() };
    let (_, held_out) = reference_views(&model.template_mesh(), config.resolution, config.views, config.held_out, config.seed)?;
    let report = reconstruct_template_with(&model, &config, |step, loss, field| {
        if (step + 1) % 500 == 0 {
            let psnr = evaluate_views(field, &held_out, config.samples).unwrap();
            println!("step {:5}  loss {loss:.5}  s {:7.1}  held-out {psnr:.2} dB", step + 1, field.sharpness());
        }
    })?;
    println!("held-out PSNR {:.2} dB after {steps} steps in {:.1} s", report.psnr, report.seconds);
    if let Some(path) = out {
        report.field.save(&path)?;
        println!("saved {path}");
    }
    Ok(())
}

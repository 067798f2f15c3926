//! Articulate a canonical capsule field through the three-joint capsule rig
//! and write one frame per pose. Pass a checkpoint to animate a trained
//! field instead.
//!
//! `cargo run --release --example animate_capsule -- [out_dir] [field.ckpt]`

use avatarcraft::articulation::{render_articulated, ArticulationContext, MaskMode};
use avatarcraft::body_model::synthetic::{capsule_rig, CapsuleRigSpec};
use avatarcraft::field::{CapsuleSdf, ImplicitAvatarField, SdfField};
use avatarcraft::math::Vec3;
use avatarcraft::renderer::{BackgroundPolicy, Camera, RenderSettings};

fn main() -> avatarcraft::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "capsule_frames".into());
    let spec = CapsuleRigSpec::default();
    let model = capsule_rig(&spec);
    let field: Box<dyn SdfField> = match args.next() {
        Some(path) => Box::new(ImplicitAvatarField::load(path)?),
        None => {
            let (a, b) = (Vec3::new(0.0, -spec.half_length, 0.0), Vec3::new(0.0, spec.half_length, 0.0));
            Box::new(CapsuleSdf::new(a, b, spec.radius, [0.8, 0.5, 0.3], 64.0))
        }
    };
    let camera = Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::y(), 0.8, 96, 96, 1.5, 4.5)?;
    let settings = RenderSettings::with_samples(96);
    std::fs::create_dir_all(&out)?;
    let frames = 8;
    for i in 0..frames {
        // bend the middle and tip joints about z, up to 45 degrees each
        let angle = std::f64::consts::FRAC_PI_4 * i as f64 / (frames - 1) as f64;
        let mut target = model.canonical_configuration();
        target.pose[1] = [0.0, 0.0, angle];
        target.pose[2] = [0.0, 0.0, angle];
        let ctx = ArticulationContext::new(&model, &target, MaskMode::Hard, None)?;
        let img = render_articulated(field.as_ref(), &camera, &ctx, 1, BackgroundPolicy::White, &settings, 0)?;
        let covered = img.opacity.iter().filter(|&&o| o > 0.5).count();
        img.rgb.save_png(format!("{out}/frame_{i:04}.png"))?;
        println!("frame {i}: bend {:5.1} deg, {covered} opaque pixels", angle.to_degrees());
    }
    Ok(())
}

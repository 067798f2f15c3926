//! Render an analytic sphere with color, opacity and depth outputs and
//! compare the depth map with exact ray intersections.
//!
//! `cargo run --release --example render_sphere -- [out_dir]`

use avatarcraft::field::SphereSdf;
use avatarcraft::math::Vec3;
use avatarcraft::renderer::{render_image, BackgroundPolicy, Camera, RenderSettings};

fn main() -> avatarcraft::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sphere_render".into());
    let sphere = SphereSdf::unit(64.0);
    let camera = Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::y(), 0.9, 128, 128, 1.2, 4.8)?;
    let settings = RenderSettings::with_samples(128);
    let img = render_image(&sphere, &camera, 1, BackgroundPolicy::White, &settings, 0)?;

    let spacing = (4.8 - 1.2) / 128.0;
    let (mut hits, mut close) = (0usize, 0usize);
    for r in 0..128 {
        for c in 0..128 {
            let dir = camera.direction_at(r as f64 + 0.5, c as f64 + 0.5);
            if let Some(t) = sphere.intersect(&camera.position(), &dir) {
                hits += 1;
                close += ((img.depth[r * 128 + c] - t).abs() <= 2.0 * spacing) as usize;
            }
        }
    }
    println!("{hits} rays hit the sphere; {close} rendered depths lie within two sample spacings");

    std::fs::create_dir_all(&out)?;
    img.save(&out, "sphere", true)?;
    println!("wrote {out}/sphere.png with opacity and depth maps");
    Ok(())
}

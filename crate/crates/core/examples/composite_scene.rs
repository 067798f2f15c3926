//! Depth-composite an avatar field with a scene of solid primitives.
//!
//! `cargo run --release --example composite_scene -- [out_dir] [field.ckpt]`

use avatarcraft::field::{ImplicitAvatarField, SdfField, SphereSdf};
use avatarcraft::math::Vec3;
use avatarcraft::renderer::{composite_render, BackgroundPolicy, Camera, DensityScene, RenderSettings, ScenePrimitive, Winner};

fn main() -> avatarcraft::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "composite".into());
    let avatar: Box<dyn SdfField> = match args.next() {
        Some(path) => Box::new(ImplicitAvatarField::load(path)?),
        None => Box::new(SphereSdf::new(Vec3::new(-0.25, 0.0, 0.0), 0.6, [0.9, 0.6, 0.4], 64.0)),
    };
    let scene = DensityScene::new(
        vec![
            ScenePrimitive::Sphere { center: [0.3, 0.1, 0.25], radius: 0.5, color: [0.2, 0.4, 0.9] },
            ScenePrimitive::Box { min: [-1.2, -0.9, -0.6], max: [1.2, -0.75, 0.6], color: [0.5, 0.5, 0.5] },
        ],
        64.0,
    );
    let camera = Camera::look_at(Vec3::new(0.0, 0.4, 3.0), Vec3::zeros(), Vec3::y(), 0.9, 96, 96, 1.0, 5.0)?;
    let result = composite_render(avatar.as_ref(), &scene, &camera, BackgroundPolicy::White, &RenderSettings::with_samples(96), 0.5, 0)?;
    let count = |w: Winner| result.winner.iter().filter(|&&x| x == w).count();
    println!(
        "avatar wins {} pixels, scene {} pixels, {} blended",
        count(Winner::Avatar),
        count(Winner::Scene),
        count(Winner::Blend)
    );
    std::fs::create_dir_all(&out)?;
    result.render.save(&out, "composite", true)?;
    scene.save(format!("{out}/scene.json"))?;
    println!("wrote {out}/composite.png and the scene description");
    Ok(())
}

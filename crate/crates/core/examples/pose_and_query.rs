//! Pose the humanoid rig with linear blend skinning, then use the posed
//! mesh's bounding volume hierarchy to warp points back to the canonical
//! frame.
//!
//! `cargo run --release --example pose_and_query`

use avatarcraft::articulation::{ArticulationContext, MaskMode};
use avatarcraft::body_model::synthetic::humanoid_rig;
use avatarcraft::math::Vec3;

fn main() -> avatarcraft::Result<()> {
    let model = humanoid_rig();
    let mut target = model.canonical_configuration();
    // raise both arms and step forward
    target.pose[3] = [0.0, 0.0, 0.9];
    target.pose[4] = [0.0, 0.0, -0.9];
    target.pose[5] = [0.4, 0.0, 0.0];
    target.translation = [0.0, 0.0, 0.1];

    let posed = model.posed_mesh(&target)?;
    let moved = posed
        .vertices
        .iter()
        .zip(&model.template_vertices)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    println!("posed {} vertices; the largest displacement is {moved:.3}", posed.vertices.len());

    let ctx = ArticulationContext::new(&model, &target, MaskMode::Hard, None)?;
    for p in [Vec3::new(0.3, 0.6, 0.1), Vec3::new(0.0, 0.2, 0.25), Vec3::new(0.1, -0.4, 0.2)] {
        let w = ctx.warp_to_canonical(&p)?;
        let c = &w.correspondence;
        println!(
            "({:5.2} {:5.2} {:5.2}) -> canonical ({:5.2} {:5.2} {:5.2}); triangle {} at distance {:.3}, mask {}",
            p[0], p[1], p[2], w.canonical[0], w.canonical[1], w.canonical[2], c.triangle, c.distance, ctx.mask_at(c)
        );
    }
    Ok(())
}

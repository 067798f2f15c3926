//! Sweep the shape parameters of the humanoid rig between two body shapes
//! and report how the posed mesh changes along the way.
//!
//! `cargo run --release --example reshape_interpolation`

use avatarcraft::articulation::interpolate_shape;
use avatarcraft::body_model::synthetic::humanoid_rig;

fn main() -> avatarcraft::Result<()> {
    let model = humanoid_rig();
    let base = model.canonical_configuration();
    let beta_a: Vec<f64> = (0..model.num_betas).map(|k| if k % 2 == 0 { 1.5 } else { -1.0 }).collect();
    let beta_b = vec![0.0; model.num_betas];
    println!("{} joints, {} shape parameters, {} vertices", model.num_joints(), model.num_betas, model.num_vertices());
    for i in 0..=4 {
        let lambda = i as f64 / 4.0;
        let cfg = interpolate_shape(&base, &beta_a, &beta_b, lambda)?;
        let bounds = model.posed_mesh(&cfg)?.bounds();
        let size: Vec<f64> = (0..3).map(|k| bounds.max[k] - bounds.min[k]).collect();
        println!("lambda {lambda:.2}: extent {:.3} x {:.3} x {:.3}", size[0], size[1], size[2]);
    }
    Ok(())
}

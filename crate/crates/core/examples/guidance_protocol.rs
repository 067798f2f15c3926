//! View-dependent prompts and the guidance wire format. With an endpoint,
//! a gray test image is also sent to a running guidance service.
//!
//! `cargo run --release --example guidance_protocol -- [http://host:port]`

use std::f64::consts::PI;

use avatarcraft::guidance::protocol::{decode_request, decode_response, encode_request, encode_response, ResponseDiagnostics};
use avatarcraft::guidance::{BodyPart, GuidanceContext, RemoteOracle};
use avatarcraft::renderer::RgbImage;

fn main() -> avatarcraft::Result<()> {
    let base = "a marble statue of a dancer";
    for phi in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0] {
        for part in [BodyPart::Body, BodyPart::Face] {
            let ctx = GuidanceContext::new(base, part, phi);
            println!("azimuth {:5.1} deg {part:?}: {}", phi.to_degrees(), ctx.prompt);
        }
    }

    let image = RgbImage::filled(64, 64, [0.5; 3]);
    let ctx = GuidanceContext::new(base, BodyPart::Body, PI);
    let request = encode_request(&image, &ctx);
    let (header, decoded) = decode_request(&request)?;
    println!("request: {} bytes, {}x{}, prompt {:?}, round trip exact: {}", request.len(), header.width, header.height, header.prompt, decoded == image);
    let zeros = vec![0.0f32; 64 * 64 * 3];
    let diagnostics = ResponseDiagnostics { timestep: Some(500.0), weight: Some(1.0), ..Default::default() };
    let response = encode_response(&zeros, 64, 64, diagnostics);
    let gradient = decode_response(&response, 64, 64)?;
    println!("response: {} bytes, timestep {:?}", response.len(), gradient.timestep);

    if let Some(endpoint) = std::env::args().nth(1) {
        let oracle = RemoteOracle::new(endpoint);
        let g = oracle.remote_sds_gradient(&image, &ctx)?;
        let norm = g.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("service gradient: norm {norm:.4}, timestep {:?}, weight {:?}", g.timestep, g.weight);
    }
    Ok(())
}

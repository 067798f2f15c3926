//! The HTTP guidance client against a scripted in-process server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use avatarcraft::guidance::protocol::{decode_request, encode_response, ResponseDiagnostics};
use avatarcraft::guidance::{BodyPart, GuidanceContext, RemoteOracle};
use avatarcraft::renderer::RgbImage;
use avatarcraft::Error;

type Handler = dyn Fn(usize, &[u8]) -> (u16, Vec<u8>) + Send + Sync;

struct Server {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<Vec<u8>> {
    let mut reader = BufReader::new(stream);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some(body)
}

fn serve(handler: Arc<Handler>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some(body) = read_request(&mut stream) else { continue };
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, payload) = handler(n, &body);
            let head = format!(
                "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nContent-Type: application/octet-stream\r\nConnection: close\r\n\r\n",
                payload.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(&payload);
        }
    });
    Server { url, hits }
}

/// Gradient = guidance_scale * (pixel - 0.5) + seed-dependent offset.
fn echo_handler() -> Arc<Handler> {
    Arc::new(|_, body: &[u8]| {
        let (h, img) = decode_request(body).unwrap();
        let grad: Vec<f32> = img
            .pixels
            .iter()
            .flatten()
            .map(|v| (h.guidance_scale * (v - 0.5) + (h.seed % 7) as f64 * 1e-3) as f32)
            .collect();
        let diag = ResponseDiagnostics {
            timestep: Some(h.t_range[0]),
            weight: Some(1.0),
            model_id: Some("echo".into()),
            latency_ms: Some(0.0),
        };
        (200, encode_response(&grad, h.height, h.width, diag))
    })
}

fn image() -> RgbImage {
    RgbImage::from_pixels(3, 2, (0..6).map(|i| [i as f64 / 6.0, 0.25, 1.0]).collect()).unwrap()
}

fn ctx() -> GuidanceContext {
    let mut c = GuidanceContext::new("a robot", BodyPart::Body, 3.0);
    c.seed = 12;
    c
}

#[test]
fn identical_requests_give_identical_gradients() {
    let server = serve(echo_handler());
    let oracle = RemoteOracle::new(&server.url);
    let a = oracle.remote_sds_gradient(&image(), &ctx()).unwrap();
    let b = oracle.remote_sds_gradient(&image(), &ctx()).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.width, a.height), (3, 2));
    assert_eq!(a.timestep, Some(20.0));
}

#[test]
fn guidance_scale_reaches_the_service() {
    let server = serve(echo_handler());
    let oracle = RemoteOracle::new(&server.url);
    let mut c = ctx();
    c.seed = 14;
    let base = oracle.remote_sds_gradient(&image(), &c).unwrap();
    c.guidance_scale *= 2.0;
    let doubled = oracle.remote_sds_gradient(&image(), &c).unwrap();
    for (a, b) in base.data.iter().zip(&doubled.data) {
        assert!((2.0 * a - b).abs() < 1e-4, "{a} {b}");
    }
}

#[test]
fn transient_failures_are_retried() {
    let echo = echo_handler();
    let server = serve(Arc::new(move |n, body: &[u8]| if n < 2 { (503, b"warming up".to_vec()) } else { echo(n, body) }));
    let oracle = RemoteOracle::new(&server.url).with_backoff(Duration::from_millis(5));
    oracle.remote_sds_gradient(&image(), &ctx()).unwrap();
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_unavailability_is_a_transport_error_after_three_attempts() {
    let server = serve(Arc::new(|_, _: &[u8]| (503, b"busy".to_vec())));
    let oracle = RemoteOracle::new(&server.url).with_backoff(Duration::from_millis(5));
    match oracle.remote_sds_gradient(&image(), &ctx()) {
        Err(Error::Transport { attempts, endpoint, .. }) => {
            assert_eq!(attempts, 3);
            assert_eq!(endpoint, server.url);
        }
        other => panic!("expected a transport error, got {other:?}"),
    }
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(Arc::new(|_, _: &[u8]| (400, b"bad field: prompt".to_vec())));
    let oracle = RemoteOracle::new(&server.url).with_backoff(Duration::from_millis(5));
    match oracle.remote_sds_gradient(&image(), &ctx()) {
        Err(Error::Protocol(msg)) => assert!(msg.contains("400") && msg.contains("prompt"), "{msg}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn mismatched_response_shape_is_a_protocol_error() {
    let server = serve(Arc::new(|_, _: &[u8]| (200, encode_response(&[0.0; 3], 1, 1, Default::default()))));
    let oracle = RemoteOracle::new(&server.url);
    assert!(matches!(oracle.remote_sds_gradient(&image(), &ctx()), Err(Error::Protocol(_))));
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let oracle = RemoteOracle::new(format!("http://127.0.0.1:{port}")).with_backoff(Duration::from_millis(1));
    assert!(matches!(
        oracle.remote_sds_gradient(&image(), &ctx()),
        Err(Error::Transport { attempts: 3, .. })
    ));
}

#[test]
fn invalid_context_is_rejected_before_sending() {
    let server = serve(echo_handler());
    let oracle = RemoteOracle::new(&server.url);
    let mut c = ctx();
    c.guidance_scale = -1.0;
    assert!(oracle.remote_sds_gradient(&image(), &c).is_err());
    assert_eq!(server.hits.load(Ordering::SeqCst), 0);
}

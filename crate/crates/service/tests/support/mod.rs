//! Test server and WebSocket client helpers.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use polyscene_core::mesh::TriMesh;
use polyscene_core::render::{CameraIntrinsics, CameraPose, Image, LightingConfig, RayCaster, RenderError, Renderer};
use polyscene_core::scenegen::{Scene, SceneSource};
use polyscene_service::{RenderResponse, RenderService, SceneRegistry, ServiceConfig, Status};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;

pub const GOLDEN_ID: &str = "golden-cube";

pub struct Faulty;

impl Renderer for Faulty {
    fn render(&self, _: &Scene, _: &CameraPose, _: &LightingConfig, _: &CameraIntrinsics) -> Result<Image, RenderError> {
        Err(RenderError("injected fault".into()))
    }
}

pub struct Slow(pub Duration);

impl Renderer for Slow {
    fn render(&self, s: &Scene, p: &CameraPose, l: &LightingConfig, i: &CameraIntrinsics) -> Result<Image, RenderError> {
        std::thread::sleep(self.0);
        RayCaster::default().render(s, p, l, i)
    }
}

pub struct Panicky;

impl Renderer for Panicky {
    fn render(&self, _: &Scene, _: &CameraPose, _: &LightingConfig, _: &CameraIntrinsics) -> Result<Image, RenderError> {
        panic!("renderer exploded")
    }
}

pub fn golden_scene() -> Scene {
    Scene::from_meshes(GOLDEN_ID, vec![TriMesh::cube(0.5)], SceneSource::Imported { filename: "cube.obj".into() })
}

pub fn small_config(dir: &Path, compat_200: bool) -> ServiceConfig {
    ServiceConfig {
        intrinsics: CameraIntrinsics::with_resolution(64, 48),
        compat_200,
        ..ServiceConfig::new(dir.to_path_buf())
    }
}

pub fn service(dir: &Path, compat_200: bool, renderer: Arc<dyn Renderer>) -> Arc<RenderService> {
    let registry = Arc::new(SceneRegistry::open(dir).unwrap());
    registry.publish(&golden_scene()).unwrap();
    Arc::new(RenderService::with_parts(registry, renderer, small_config(dir, compat_200)))
}

pub async fn start(service: Arc<RenderService>) -> SocketAddr {
    let (tx, rx) = tokio::sync::oneshot::channel();
    tokio::spawn(async move {
        polyscene_service::serve(service, "127.0.0.1:0".parse().unwrap(), |a| {
            let _ = tx.send(a);
        })
        .await
        .unwrap();
    });
    rx.await.unwrap()
}

/// Sends one request; returns every message up to and including the terminal one.
pub async fn ws_exchange(addr: SocketAddr, request: &str) -> Vec<RenderResponse> {
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/api/")).await.unwrap();
    ws.send(Message::Text(request.to_string().into())).await.unwrap();
    let mut out = Vec::new();
    while let Some(msg) = ws.next().await {
        let Message::Text(t) = msg.unwrap() else { continue };
        let r: RenderResponse = serde_json::from_str(&t).unwrap();
        let terminal = Status::is_terminal_wire(&r.status);
        out.push(r);
        if terminal {
            break;
        }
    }
    ws.close(None).await.ok();
    out
}

pub struct Transcript {
    pub name: String,
    pub compat_200: bool,
    pub fault: bool,
    pub request: String,
    pub expect: Value,
}

pub fn load_transcripts() -> Vec<Transcript> {
    let text = include_str!("../golden/transcripts.json");
    let items: Vec<Value> = serde_json::from_str(text).unwrap();
    items
        .into_iter()
        .map(|v| Transcript {
            name: v["name"].as_str().unwrap().to_string(),
            compat_200: v["compat_200"].as_bool().unwrap_or(false),
            fault: v["fault"].as_bool().unwrap_or(false),
            request: v["request"].to_string(),
            expect: v["expect"].clone(),
        })
        .collect()
}

/// Checks a terminal response against a transcript's expectations; returns a
/// description of the first mismatch.
pub fn check(t: &Transcript, r: &RenderResponse, resolution: (u32, u32)) -> Result<(), String> {
    let want = t.expect["status"].as_str().unwrap();
    if r.status != want {
        return Err(format!("{}: status {:?}, want {want:?}", t.name, r.status));
    }
    let want_image = t.expect["image"].as_bool().unwrap();
    if r.image.is_some() != want_image {
        return Err(format!("{}: image presence {}", t.name, r.image.is_some()));
    }
    if let Some(img) = &r.image {
        use base64::Engine;
        let png = base64::engine::general_purpose::STANDARD.decode(img).map_err(|e| e.to_string())?;
        let decoded = Image::decode_png(&png).map_err(|e| format!("{}: bad PNG {e}", t.name))?;
        if (decoded.width, decoded.height) != resolution {
            return Err(format!("{}: resolution {}x{}", t.name, decoded.width, decoded.height));
        }
        if r.cam_pose.is_none() {
            return Err(format!("{}: missing cam_pose", t.name));
        }
    } else if r.cam_pose.is_some() {
        return Err(format!("{}: cam_pose without image", t.name));
    }
    if let Some(norm) = t.expect.get("cam_pose_norm").and_then(Value::as_f64) {
        let p = r.cam_pose.unwrap().to_pose().position.norm();
        if (p - norm).abs() > 1e-9 {
            return Err(format!("{}: cam_pose norm {p}", t.name));
        }
    }
    if let Some(pose) = t.expect.get("cam_pose") {
        let got = serde_json::to_value(r.cam_pose.unwrap()).unwrap();
        if &got != pose {
            return Err(format!("{}: cam_pose {got}", t.name));
        }
    }
    Ok(())
}

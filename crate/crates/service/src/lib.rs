//! On-demand render API over a registry of stored scenes.
//!
//! Endpoints:
//! - `GET /api/` upgrades to a WebSocket. Each text message is one request;
//!   the reply is a `RENDERING` progress message followed by exactly one
//!   terminal message, in request order.
//! - `POST /api/render` takes one request body and returns the terminal
//!   message.
//! - `GET /api/health` returns `ok`.

pub mod protocol;
pub mod registry;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use base64::Engine;
use polyscene_core::geom::RngStream;
use polyscene_core::render::{
    sample_camera_pose, CameraIntrinsics, CameraPose, LightingConfig, RayCaster, Renderer, CAMERA_RADIUS,
};
use polyscene_core::scenegen::Scene;

pub use protocol::{parse_request, CamPose, RenderRequest, RenderResponse, Status};
pub use registry::{RegistryError, SceneRecord, SceneRegistry};

pub const DEFAULT_PORT: u16 = 8765;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
/// Overrides the data directory when set.
pub const DATA_ENV: &str = "POLYSCENE_DATA";

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub compat_200: bool,
    pub timeout: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: PathBuf) -> Self {
        Self { data_dir, intrinsics: CameraIntrinsics::default(), compat_200: false, timeout: DEFAULT_TIMEOUT }
    }
}

/// A request that passed validation and resolved to a stored scene.
pub struct Prepared {
    pub request: RenderRequest,
    pub scene: Arc<Scene>,
}

pub struct RenderService {
    registry: Arc<SceneRegistry>,
    renderer: Arc<dyn Renderer>,
    config: ServiceConfig,
}

impl RenderService {
    pub fn open(config: ServiceConfig) -> Result<Self, RegistryError> {
        let registry = Arc::new(SceneRegistry::open(&config.data_dir)?);
        Ok(Self::with_parts(registry, Arc::new(RayCaster::default()), config))
    }

    pub fn with_parts(registry: Arc<SceneRegistry>, renderer: Arc<dyn Renderer>, config: ServiceConfig) -> Self {
        Self { registry, renderer, config }
    }

    pub fn registry(&self) -> &SceneRegistry {
        &self.registry
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn reject(&self, status: Status) -> RenderResponse {
        RenderResponse::error(&status, self.config.compat_200)
    }

    /// Validation and id lookup; errors are terminal responses.
    pub fn prepare(&self, text: &str) -> Result<Prepared, RenderResponse> {
        let request = parse_request(text).map_err(|v| self.reject(Status::Invalid(v.join("; "))))?;
        match self.registry.get(&request.id) {
            Ok(Some(scene)) => Ok(Prepared { request, scene }),
            Ok(None) => Err(self.reject(Status::Invalid("unknown id".into()))),
            Err(e) => {
                tracing::warn!(id = %request.id, error = %e, "scene lookup failed");
                Err(self.reject(Status::Failure(e.to_string())))
            }
        }
    }

    /// Renders a prepared request on the calling thread.
    pub fn execute(&self, prepared: &Prepared) -> RenderResponse {
        let pose = match pose_for(&prepared.request) {
            Ok(p) => p,
            Err(e) => return self.reject(Status::Failure(e)),
        };
        let lighting = LightingConfig::new(prepared.request.lighting);
        match self.renderer.render(&prepared.scene, &pose, &lighting, &self.config.intrinsics) {
            Ok(image) => RenderResponse {
                status: Status::Success.wire(self.config.compat_200),
                image: Some(base64::engine::general_purpose::STANDARD.encode(image.encode_png())),
                cam_pose: Some(CamPose::from(&pose)),
            },
            Err(e) => {
                tracing::warn!(id = %prepared.request.id, error = %e, "render failed");
                self.reject(Status::Failure(e.to_string()))
            }
        }
    }

    /// Full request handling without a timeout.
    pub fn handle_render_request_blocking(&self, text: &str) -> RenderResponse {
        match self.prepare(text) {
            Ok(p) => self.execute(&p),
            Err(r) => r,
        }
    }

    /// Renders on the blocking pool under the configured timeout.
    pub async fn execute_async(self: &Arc<Self>, prepared: Prepared) -> RenderResponse {
        let me = self.clone();
        let job = tokio::task::spawn_blocking(move || me.execute(&prepared));
        match tokio::time::timeout(self.config.timeout, job).await {
            Ok(Ok(resp)) => resp,
            Ok(Err(e)) => self.reject(Status::Failure(format!("render task aborted: {e}"))),
            Err(_) => self.reject(Status::Failure(format!("render timed out after {}s", self.config.timeout.as_secs()))),
        }
    }

    pub async fn handle_render_request(self: &Arc<Self>, text: &str) -> RenderResponse {
        match self.prepare(text) {
            Ok(p) => self.execute_async(p).await,
            Err(r) => r,
        }
    }
}

fn pose_for(request: &RenderRequest) -> Result<CameraPose, String> {
    if request.random {
        let mut rng = RngStream::new(rand::random());
        sample_camera_pose(&mut rng, CAMERA_RADIUS).map_err(|e| e.to_string())
    } else {
        request.camera_pose().ok_or_else(|| "camera pose missing".to_string())
    }
}

pub fn router(service: Arc<RenderService>) -> Router {
    Router::new()
        .route("/api/", get(ws_upgrade))
        .route("/api", get(ws_upgrade))
        .route("/api/render", post(http_render))
        .route("/api/health", get(|| async { "ok" }))
        .with_state(service)
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(service): State<Arc<RenderService>>) -> impl IntoResponse {
    ws.max_message_size(1 << 20).on_upgrade(move |socket| ws_session(socket, service))
}

async fn ws_session(mut socket: WebSocket, service: Arc<RenderService>) {
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => match String::from_utf8(b.to_vec()) {
                Ok(t) => t,
                Err(_) => {
                    let r = service.reject(Status::Invalid("message is not UTF-8 text".into()));
                    if socket.send(Message::Text(r.to_json().into())).await.is_err() {
                        return;
                    }
                    continue;
                }
            },
            Message::Close(_) => return,
            _ => continue,
        };
        let response = match service.prepare(&text) {
            Ok(prepared) => {
                if socket.send(Message::Text(RenderResponse::progress().to_json().into())).await.is_err() {
                    return;
                }
                service.execute_async(prepared).await
            }
            Err(r) => r,
        };
        if socket.send(Message::Text(response.to_json().into())).await.is_err() {
            return;
        }
    }
}

async fn http_render(State(service): State<Arc<RenderService>>, body: String) -> impl IntoResponse {
    let response = service.handle_render_request(&body).await;
    let code = if response.status.starts_with("INVALID") {
        StatusCode::BAD_REQUEST
    } else if response.status.starts_with("FAILURE") {
        StatusCode::INTERNAL_SERVER_ERROR
    } else {
        StatusCode::OK
    };
    (code, [(axum::http::header::CONTENT_TYPE, "application/json")], response.to_json())
}

/// Binds and serves until the future is dropped. Returns the bound address
/// through `on_bound` before serving (useful with port 0).
pub async fn serve(
    service: Arc<RenderService>,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    tracing::info!(%bound, "serving render API");
    on_bound(bound);
    axum::serve(listener, router(service)).await
}

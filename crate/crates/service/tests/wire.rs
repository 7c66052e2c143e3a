mod support;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine;
use polyscene_core::dataset::canonical_scene;
use polyscene_core::geom::{Quaternion, Vec3};
use polyscene_core::render::{render, CameraPose, LightingConfig, LightingMode, RayCaster};
use polyscene_service::{router, RenderResponse, RenderService, SceneRegistry, ServiceConfig};
use support::*;
use tower::ServiceExt;

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn golden_transcripts_over_websocket() {
    for t in load_transcripts() {
        let tmp = tempfile::tempdir().unwrap();
        let renderer: Arc<dyn polyscene_core::render::Renderer> =
            if t.fault { Arc::new(Faulty) } else { Arc::new(RayCaster::default()) };
        let addr = start(service(tmp.path(), t.compat_200, renderer)).await;
        let msgs = ws_exchange(addr, &t.request).await;
        let terminal = msgs.last().unwrap();
        check(&t, terminal, (64, 48)).unwrap();
        for m in &msgs[..msgs.len() - 1] {
            assert_eq!(m.status, "RENDERING", "{}: unexpected intermediate message", t.name);
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn golden_transcripts_over_post() {
    for t in load_transcripts() {
        let tmp = tempfile::tempdir().unwrap();
        let renderer: Arc<dyn polyscene_core::render::Renderer> =
            if t.fault { Arc::new(Faulty) } else { Arc::new(RayCaster::default()) };
        let app = router(service(tmp.path(), t.compat_200, renderer));
        let resp = app
            .oneshot(Request::post("/api/render").body(Body::from(t.request.clone())).unwrap())
            .await
            .unwrap();
        let code = resp.status();
        let bytes = axum::body::to_bytes(resp.into_body(), 1 << 24).await.unwrap();
        let r: RenderResponse = serde_json::from_slice(&bytes).unwrap();
        check(&t, &r, (64, 48)).unwrap();
        let want = if r.status.starts_with("INVALID") {
            StatusCode::BAD_REQUEST
        } else if r.status.starts_with("FAILURE") {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::OK
        };
        assert_eq!(code, want, "{}", t.name);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn defined_camera_matches_direct_render() {
    let tmp = tempfile::tempdir().unwrap();
    let svc = service(tmp.path(), false, Arc::new(RayCaster::default()));
    let r = svc.handle_render_request(r#"{"id":"golden-cube","lighting":"fixed","random":false,"camera":[0,0,5,1,0,0,0]}"#).await;
    assert_eq!(r.status, "SUCCESS");
    let png = base64::engine::general_purpose::STANDARD.decode(r.image.unwrap()).unwrap();
    let pose = CameraPose { position: Vec3::new(0.0, 0.0, 5.0), orientation: Quaternion::IDENTITY };
    let direct = render(
        &canonical_scene(&golden_scene()),
        &pose,
        &LightingConfig::new(LightingMode::FixedSpotlight),
        &svc.config().intrinsics,
    );
    assert_eq!(png, direct.encode_png());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn identical_defined_requests_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let svc = service(tmp.path(), false, Arc::new(RayCaster::default()));
    let req = r#"{"id":"golden-cube","lighting":"homogeneous","camera":[3,4,0,0.9,0.1,-0.3,0.2]}"#;
    let a = svc.handle_render_request(req).await;
    let b = svc.handle_render_request(req).await;
    assert_eq!(a.status, "SUCCESS");
    assert_eq!(a, b);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn timeout_and_panic_become_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let registry = Arc::new(SceneRegistry::open(tmp.path()).unwrap());
    registry.publish(&golden_scene()).unwrap();
    let config = ServiceConfig { timeout: Duration::from_millis(50), ..small_config(tmp.path(), false) };
    let slow = Arc::new(RenderService::with_parts(registry.clone(), Arc::new(Slow(Duration::from_millis(500))), config.clone()));
    let r = slow.handle_render_request(r#"{"id":"golden-cube","random":true}"#).await;
    assert!(r.status.starts_with("FAILURE: render timed out"), "{}", r.status);
    let panicky = Arc::new(RenderService::with_parts(registry, Arc::new(Panicky), config));
    let r = panicky.handle_render_request(r#"{"id":"golden-cube","random":true}"#).await;
    assert!(r.status.starts_with("FAILURE"), "{}", r.status);
    assert!(r.image.is_none());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn corrupt_scene_is_a_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let svc = service(tmp.path(), false, Arc::new(RayCaster::default()));
    std::fs::write(svc.registry().root().join("golden-cube").join("scene.obj"), "f 1 2 3\n").unwrap();
    let r = svc.handle_render_request(r#"{"id":"golden-cube","random":true}"#).await;
    assert!(r.status.starts_with("FAILURE"), "{}", r.status);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn one_terminal_response_per_message_in_order() {
    use futures::{SinkExt, StreamExt};
    use tokio_tungstenite::tungstenite::Message;
    let tmp = tempfile::tempdir().unwrap();
    let addr = start(service(tmp.path(), false, Arc::new(RayCaster::default()))).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/api/")).await.unwrap();
    let requests = [
        r#"{"id":"nope","random":true}"#,
        "not json",
        r#"{"id":"golden-cube","camera":[0,0,5,1,0,0,0]}"#,
        r#"[]"#,
        r#"{"id":"golden-cube","random":true,"lighting":"homogeneous"}"#,
    ];
    for r in requests {
        ws.send(Message::Text(r.to_string().into())).await.unwrap();
    }
    let mut terminals = Vec::new();
    while terminals.len() < requests.len() {
        let Message::Text(t) = ws.next().await.unwrap().unwrap() else { continue };
        let r: RenderResponse = serde_json::from_str(&t).unwrap();
        if r.status != "RENDERING" {
            terminals.push(r.status);
        }
    }
    assert_eq!(terminals[0], "INVALID: unknown id");
    assert!(terminals[1].starts_with("INVALID: malformed JSON"));
    assert_eq!(terminals[2], "SUCCESS");
    assert_eq!(terminals[3], "INVALID: request must be a JSON object");
    assert_eq!(terminals[4], "SUCCESS");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_clients_get_their_own_answers() {
    let tmp = tempfile::tempdir().unwrap();
    let svc = service(tmp.path(), false, Arc::new(RayCaster::default()));
    let other = polyscene_core::scenegen::Scene::from_meshes(
        "other",
        vec![polyscene_core::mesh::TriMesh::cube(0.2)],
        polyscene_core::scenegen::SceneSource::Imported { filename: "o.obj".into() },
    );
    svc.registry().publish(&other).unwrap();
    let addr = start(svc.clone()).await;
    let req = |id: &str| format!(r#"{{"id":"{id}","camera":[0,0,5,1,0,0,0]}}"#);
    let (ra, rb) = (req("golden-cube"), req("other"));
    let (a, b) = tokio::join!(ws_exchange(addr, &ra), ws_exchange(addr, &rb));
    let (a, b) = (a.last().unwrap().clone(), b.last().unwrap().clone());
    assert_eq!(a, svc.handle_render_request_blocking(&req("golden-cube")));
    assert_eq!(b, svc.handle_render_request_blocking(&req("other")));
    assert_ne!(a.image, b.image);
}

//! Wire format of render requests and responses.
//!
//! Requests are JSON objects. Accepted keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `ID` or `id` | scene id |
//! | `lighting` | `"fixed"`, `"homogeneous"` or `"homogenous"`; wins over `light_fixed` |
//! | `light_fixed` | boolean or `"true"`/`"false"` |
//! | `random_cam` or `random` | boolean or `"true"`/`"false"` |
//! | `cam_x` … `cam_qz` | pose, numbers or numeric strings |
//! | `camera` | the same pose as `[x, y, z, qw, qx, qy, qz]` |
//!
//! Lighting defaults to `fixed`. `random` may be omitted when a camera is
//! given. The camera is ignored for random requests.

use polyscene_core::geom::{Quaternion, Vec3};
use polyscene_core::render::{CameraPose, LightingMode};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const CAMERA_KEYS: [&str; 7] = ["cam_x", "cam_y", "cam_z", "cam_qw", "cam_qx", "cam_qy", "cam_qz"];

/// Status of progress messages sent before the terminal response.
pub const PROGRESS_STATUS: &str = "RENDERING";

#[derive(Clone, Debug, PartialEq)]
pub struct RenderRequest {
    pub id: String,
    pub lighting: LightingMode,
    pub random: bool,
    pub camera: Option<[f64; 7]>,
}

impl RenderRequest {
    /// Pose for a defined-camera request; the quaternion is normalized.
    pub fn camera_pose(&self) -> Option<CameraPose> {
        self.camera.and_then(|c| CameraPose::from_array(c).ok())
    }
}

/// Pose in the request's own key names.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CamPose {
    pub cam_x: f64,
    pub cam_y: f64,
    pub cam_z: f64,
    pub cam_qw: f64,
    pub cam_qx: f64,
    pub cam_qy: f64,
    pub cam_qz: f64,
}

impl From<&CameraPose> for CamPose {
    fn from(p: &CameraPose) -> Self {
        let [cam_x, cam_y, cam_z, cam_qw, cam_qx, cam_qy, cam_qz] = p.to_array();
        Self { cam_x, cam_y, cam_z, cam_qw, cam_qx, cam_qy, cam_qz }
    }
}

impl CamPose {
    pub fn to_pose(&self) -> CameraPose {
        CameraPose {
            position: Vec3::new(self.cam_x, self.cam_y, self.cam_z),
            orientation: Quaternion::new(self.cam_qw, self.cam_qx, self.cam_qy, self.cam_qz),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Invalid(String),
    Failure(String),
}

impl Status {
    /// Wire string; `compat_200` spells success as `"200"`.
    pub fn wire(&self, compat_200: bool) -> String {
        match self {
            Status::Success if compat_200 => "200".into(),
            Status::Success => "SUCCESS".into(),
            Status::Invalid(r) => format!("INVALID: {r}"),
            Status::Failure(r) => format!("FAILURE: {r}"),
        }
    }

    pub fn is_terminal_wire(s: &str) -> bool {
        s == "SUCCESS" || s == "200" || s.starts_with("INVALID") || s.starts_with("FAILURE")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderResponse {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cam_pose: Option<CamPose>,
}

impl RenderResponse {
    pub fn progress() -> Self {
        Self { status: PROGRESS_STATUS.into(), image: None, cam_pose: None }
    }

    pub fn error(status: &Status, compat_200: bool) -> Self {
        Self { status: status.wire(compat_200), image: None, cam_pose: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

fn as_bool(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            _ => None,
        },
        Value::Number(n) => n.as_i64().map(|i| i != 0),
        _ => None,
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .filter(|x: &f64| x.is_finite())
}

fn first<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k)).filter(|v| !v.is_null())
}

/// Parses and validates a request text. All problems are reported together.
pub fn parse_request(text: &str) -> Result<RenderRequest, Vec<String>> {
    let value: Value = serde_json::from_str(text).map_err(|e| vec![format!("malformed JSON: {e}")])?;
    let Value::Object(obj) = value else {
        return Err(vec!["request must be a JSON object".into()]);
    };
    validate_request(&obj)
}

pub fn validate_request(obj: &Map<String, Value>) -> Result<RenderRequest, Vec<String>> {
    let mut violations = Vec::new();

    let id = match first(obj, &["ID", "id"]) {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(_) => {
            violations.push("id must be a non-empty string".into());
            String::new()
        }
        None => {
            violations.push("missing field id".into());
            String::new()
        }
    };

    let lighting = if let Some(v) = first(obj, &["lighting"]) {
        match v.as_str().map(str::parse::<LightingMode>) {
            Some(Ok(m)) => m,
            _ => {
                violations.push(format!("unknown lighting {v}"));
                LightingMode::FixedSpotlight
            }
        }
    } else if let Some(v) = first(obj, &["light_fixed"]) {
        match as_bool(v) {
            Some(true) => LightingMode::FixedSpotlight,
            Some(false) => LightingMode::Homogeneous,
            None => {
                violations.push(format!("light_fixed must be a boolean, got {v}"));
                LightingMode::FixedSpotlight
            }
        }
    } else {
        LightingMode::FixedSpotlight
    };

    let camera_given = first(obj, &["camera"]).is_some() || CAMERA_KEYS.iter().any(|k| first(obj, &[k]).is_some());
    let random = match first(obj, &["random_cam", "random"]) {
        Some(v) => as_bool(v).or_else(|| {
            violations.push(format!("random must be a boolean, got {v}"));
            None
        }),
        None if camera_given => Some(false),
        None => {
            violations.push("missing field random".into());
            None
        }
    };

    let mut camera = None;
    if random == Some(false) {
        match read_camera(obj) {
            Ok(Some(c)) => {
                if Quaternion::new(c[3], c[4], c[5], c[6]).normalized().is_err() {
                    violations.push("degenerate quaternion".into());
                } else {
                    camera = Some(c);
                }
            }
            Ok(None) => violations.push("camera required when random is false".into()),
            Err(e) => violations.push(e),
        }
    }

    if violations.is_empty() {
        Ok(RenderRequest { id, lighting, random: random == Some(true), camera })
    } else {
        Err(violations)
    }
}

fn read_camera(obj: &Map<String, Value>) -> Result<Option<[f64; 7]>, String> {
    if let Some(v) = first(obj, &["camera"]) {
        let items: Vec<&Value> = match v {
            Value::Array(a) => a.iter().collect(),
            Value::Object(m) => {
                let named: Option<Vec<&Value>> = CAMERA_KEYS
                    .iter()
                    .map(|k| m.get(*k).or_else(|| m.get(&k[4..])))
                    .collect();
                named.ok_or("camera object needs x, y, z, qw, qx, qy, qz")?
            }
            _ => return Err("camera must be an array of 7 numbers".into()),
        };
        if items.len() != 7 {
            return Err(format!("camera needs 7 numbers, got {}", items.len()));
        }
        let mut out = [0.0; 7];
        for (slot, item) in out.iter_mut().zip(items) {
            *slot = as_f64(item).ok_or_else(|| format!("camera value {item} is not a finite number"))?;
        }
        return Ok(Some(out));
    }
    let present: Vec<&str> = CAMERA_KEYS.iter().copied().filter(|k| first(obj, &[k]).is_some()).collect();
    if present.is_empty() {
        return Ok(None);
    }
    let mut out = [0.0; 7];
    for (slot, key) in out.iter_mut().zip(CAMERA_KEYS) {
        let v = first(obj, &[key]).ok_or_else(|| format!("incomplete camera: missing {key}"))?;
        *slot = as_f64(v).ok_or_else(|| format!("{key} must be a finite number, got {v}"))?;
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<String> {
        parse_request(text).unwrap_err()
    }

    #[test]
    fn listing_style_request() {
        let r = parse_request(
            r#"{"ID":"abc","light_fixed":"true","random_cam":"true","cam_x":-0.911,"cam_y":1.238,
                "cam_z":-4.1961,"cam_qw":-0.0544,"cam_qx":-0.307,"cam_qy":0.9355,"cam_qz":0.16599}"#,
        )
        .unwrap();
        assert_eq!(r.id, "abc");
        assert!(r.random);
        assert_eq!(r.lighting, LightingMode::FixedSpotlight);
        assert_eq!(r.camera, None);
    }

    #[test]
    fn lighting_wins_over_light_fixed() {
        let r = parse_request(r#"{"id":"a","lighting":"homogenous","light_fixed":true,"random":true}"#).unwrap();
        assert_eq!(r.lighting, LightingMode::Homogeneous);
    }

    #[test]
    fn camera_array_and_fields_agree() {
        let a = parse_request(r#"{"id":"a","random":false,"camera":[0,0,5,1,0,0,0]}"#).unwrap();
        let b = parse_request(
            r#"{"id":"a","random_cam":"false","cam_x":0,"cam_y":0,"cam_z":"5","cam_qw":1,"cam_qx":0,"cam_qy":0,"cam_qz":0}"#,
        )
        .unwrap();
        assert_eq!(a.camera, b.camera);
        assert_eq!(a.camera, Some([0.0, 0.0, 5.0, 1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn violations_are_reported() {
        assert_eq!(violations(r#"{"id":"a","random":false}"#), vec!["camera required when random is false"]);
        assert_eq!(violations(r#"{"id":"a","random":true,"lighting":"disco"}"#), vec![r#"unknown lighting "disco""#]);
        assert_eq!(violations(r#"{"id":"a","camera":[0,0,5,0,0,0,0]}"#), vec!["degenerate quaternion"]);
        assert_eq!(violations(r#"{"random":true}"#), vec!["missing field id"]);
        assert!(violations("{not json")[0].starts_with("malformed JSON"));
        assert!(violations(r#"{"id":"a","cam_x":1}"#)[0].starts_with("incomplete camera"));
        assert_eq!(violations(r#"{"lighting":"disco"}"#).len(), 3);
    }

    #[test]
    fn status_strings() {
        assert_eq!(Status::Success.wire(false), "SUCCESS");
        assert_eq!(Status::Success.wire(true), "200");
        assert_eq!(Status::Invalid("unknown id".into()).wire(true), "INVALID: unknown id");
        assert!(Status::is_terminal_wire("FAILURE: x"));
        assert!(!Status::is_terminal_wire(PROGRESS_STATUS));
    }

    #[test]
    fn error_responses_have_no_image() {
        let json = RenderResponse::error(&Status::Invalid("unknown id".into()), false).to_json();
        assert_eq!(json, r#"{"status":"INVALID: unknown id"}"#);
    }

    proptest::proptest! {
        #[test]
        fn camera_forms_agree(
            c in proptest::array::uniform7(-10.0f64..10.0),
        ) {
            proptest::prop_assume!(c[3..].iter().map(|q| q * q).sum::<f64>() > 1e-6);
            let array = serde_json::json!({"id": "a", "random": false, "camera": c});
            let mut fields = serde_json::json!({"id": "a", "random_cam": "false"});
            for (k, v) in CAMERA_KEYS.iter().zip(c) {
                fields[*k] = serde_json::json!(v.to_string());
            }
            let a = parse_request(&array.to_string()).unwrap();
            let b = parse_request(&fields.to_string()).unwrap();
            proptest::prop_assert_eq!(a.camera, Some(c));
            proptest::prop_assert_eq!(b.camera, Some(c));
        }
    }
}

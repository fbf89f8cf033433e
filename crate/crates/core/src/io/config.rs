//! JSON configuration: sensor geometry, label remap, loss weights and
//! pipeline parameters in one document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::label::LabelRemap;
use crate::error::{Error, Result};
use crate::restore::InpaintParams;
use crate::types::{LossWeights, SensorModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sensor: SensorModel,
    pub remap: LabelRemap,
    pub class_names: Vec<String>,
    /// Per-class cross-entropy weights; uniform when not configured.
    pub class_weights: Vec<f64>,
    pub weights: LossWeights,
    pub pipeline: PipelineParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// Raw remission is divided by this before clamping to [0, 1].
    pub remission_max: f32,
    /// Closing structuring element, rows x columns.
    pub kernel: [usize; 2],
    pub inpaint: InpaintParams,
    pub fill_labels: bool,
    pub crop_width: Option<usize>,
    pub seed: Option<u64>,
    pub boundary_tau: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            remission_max: 1.0,
            kernel: [3, 3],
            inpaint: InpaintParams::default(),
            fill_labels: true,
            crop_width: None,
            seed: None,
            boundary_tau: 0.8,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    #[serde(default = "default_sensor_name")]
    name: String,
    height: usize,
    width: usize,
    fov_up: f64,
    fov_total: f64,
    #[serde(default = "default_min_range")]
    min_range: f64,
}

fn default_sensor_name() -> String {
    "lidar".into()
}

fn default_min_range() -> f64 {
    SensorModel::DEFAULT_MIN_RANGE
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabels {
    num_classes: usize,
    #[serde(default)]
    remap: Option<BTreeMap<String, u32>>,
    #[serde(default)]
    class_names: Option<Vec<String>>,
    #[serde(default)]
    class_weights: Option<Vec<f64>>,
}

const TOP_LEVEL: [&str; 4] = ["sensor", "labels", "loss_weights", "pipeline"];

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::schema("<document>", e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::schema("<document>", "top level must be an object"))?;
    if let Some(k) = obj.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
        return Err(Error::schema(k.clone(), "unknown top-level key"));
    }

    let raw: RawSensor = section(obj.get("sensor"), "sensor")?
        .ok_or_else(|| Error::schema("sensor", "missing required section"))?;
    let sensor = SensorModel {
        name: raw.name,
        height: raw.height,
        width: raw.width,
        fov_up: raw.fov_up,
        fov_total: raw.fov_total,
        min_range: raw.min_range,
    };
    if let Err(e) = sensor.check() {
        let key = if sensor.height < 2 {
            "sensor.height"
        } else if sensor.width < 4 {
            "sensor.width"
        } else if !(sensor.min_range >= 0.0) {
            "sensor.min_range"
        } else if !(sensor.fov_total > 0.0 && sensor.fov_total <= 180.0) {
            "sensor.fov_total"
        } else {
            "sensor.fov_up"
        };
        return Err(Error::schema(key, e.to_string()));
    }

    let (remap, class_names, class_weights) = match section::<RawLabels>(obj.get("labels"), "labels")? {
        None => {
            let remap = LabelRemap::semantic_kitti();
            let names = SEMANTIC_KITTI_NAMES.iter().map(|s| s.to_string()).collect();
            let n = remap.num_classes();
            (remap, names, vec![1.0; n])
        }
        Some(raw) => {
            let n = raw.num_classes;
            let remap = match raw.remap {
                None => LabelRemap::identity(n.max(2)),
                Some(table) => {
                    let mut parsed = BTreeMap::new();
                    for (k, v) in table {
                        let id = k.parse::<u32>().map_err(|_| {
                            Error::schema(format!("labels.remap.{k}"), "key is not a u32 label id")
                        })?;
                        parsed.insert(id, v);
                    }
                    LabelRemap::new(parsed, n)?
                }
            };
            if n < 2 {
                return Err(Error::schema("labels.num_classes", "need at least 2 classes"));
            }
            let names = match raw.class_names {
                Some(names) if names.len() != n => {
                    return Err(Error::schema(
                        "labels.class_names",
                        format!("{} names for {n} classes", names.len()),
                    ))
                }
                Some(names) => names,
                None => (0..n).map(|c| format!("class_{c}")).collect(),
            };
            let weights = match raw.class_weights {
                Some(w) if w.len() != n => {
                    return Err(Error::schema(
                        "labels.class_weights",
                        format!("{} weights for {n} classes", w.len()),
                    ))
                }
                Some(w) if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) => {
                    return Err(Error::schema("labels.class_weights", "weights must be finite and >= 0"))
                }
                Some(w) => w,
                None => vec![1.0; n],
            };
            (remap, names, weights)
        }
    };

    let weights: LossWeights = section(obj.get("loss_weights"), "loss_weights")?.unwrap_or_default();
    weights.check()?;

    let pipeline: PipelineParams = section(obj.get("pipeline"), "pipeline")?.unwrap_or_default();
    check_pipeline(&pipeline, &sensor)?;

    Ok(Config {
        sensor,
        remap,
        class_names,
        class_weights,
        weights,
        pipeline,
    })
}

fn check_pipeline(p: &PipelineParams, sensor: &SensorModel) -> Result<()> {
    if !(p.remission_max > 0.0 && p.remission_max.is_finite()) {
        return Err(Error::schema("pipeline.remission_max", "must be finite and > 0"));
    }
    for (i, k) in p.kernel.iter().enumerate() {
        if *k < 1 || k % 2 == 0 {
            return Err(Error::schema(format!("pipeline.kernel[{i}]"), "must be odd and >= 1"));
        }
    }
    let ip = &p.inpaint;
    if !(ip.dt > 0.0 && ip.dt.is_finite()) {
        return Err(Error::schema("pipeline.inpaint.dt", "must be finite and > 0"));
    }
    if ip.diffusion_every == 0 {
        return Err(Error::schema("pipeline.inpaint.diffusion_every", "must be >= 1"));
    }
    if !(ip.tol >= 0.0 && ip.tol.is_finite()) {
        return Err(Error::schema("pipeline.inpaint.tol", "must be finite and >= 0"));
    }
    if let Some(cw) = p.crop_width {
        if cw == 0 || cw > sensor.width {
            return Err(Error::schema(
                "pipeline.crop_width",
                format!("must be in 1..={}", sensor.width),
            ));
        }
    }
    if !(0.0..=1.0).contains(&p.boundary_tau) {
        return Err(Error::schema("pipeline.boundary_tau", "must lie in [0, 1]"));
    }
    Ok(())
}

/// Deserializes an optional section, naming the offending field on failure.
fn section<T: DeserializeOwned>(value: Option<&Value>, name: &str) -> Result<Option<T>> {
    let Some(value) = value else { return Ok(None) };
    serde_json::from_value(value.clone())
        .map(Some)
        .map_err(|e| {
            let msg = e.to_string();
            let key = match backticked(&msg) {
                Some(field) => format!("{name}.{field}"),
                None => name.to_string(),
            };
            Error::schema(key, msg)
        })
}

fn backticked(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

pub(crate) const SEMANTIC_KITTI_NAMES: [&str; 20] = [
    "unlabeled",
    "car",
    "bicycle",
    "motorcycle",
    "truck",
    "other-vehicle",
    "person",
    "bicyclist",
    "motorcyclist",
    "road",
    "parking",
    "sidewalk",
    "other-ground",
    "building",
    "fence",
    "vegetation",
    "trunk",
    "terrain",
    "pole",
    "traffic-sign",
];

impl LabelRemap {
    /// The 20-class SemanticKITTI training map (moving classes folded onto
    /// their static counterparts).
    pub fn semantic_kitti() -> Self {
        const MAP: [(u32, u32); 34] = [
            (0, 0), (1, 0), (10, 1), (11, 2), (13, 5), (15, 3), (16, 5), (18, 4), (20, 5),
            (30, 6), (31, 7), (32, 8), (40, 9), (44, 10), (48, 11), (49, 12), (50, 13),
            (51, 14), (52, 0), (60, 9), (70, 15), (71, 16), (72, 17), (80, 18), (81, 19),
            (99, 0), (252, 1), (253, 7), (254, 6), (255, 8), (256, 5), (257, 5), (258, 4),
            (259, 5),
        ];
        Self::new(MAP.into_iter().collect(), 20).expect("static map is in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SENSOR: &str = r#""sensor": {"height": 64, "width": 2048, "fov_up": 3, "fov_total": 28}"#;

    #[test]
    fn hdl64_geometry_is_valid() {
        let cfg = parse_config(&format!("{{{SENSOR}}}")).unwrap();
        assert_eq!(cfg.sensor.height, 64);
        assert_eq!(cfg.sensor.width, 2048);
        assert_eq!(cfg.sensor.fov_up, 3.0);
        cfg.sensor.check().unwrap();
    }

    #[test]
    fn inverted_fov_is_schema_error() {
        let text = r#"{"sensor": {"height": 64, "width": 2048, "fov_up": 30, "fov_total": 28}}"#;
        match parse_config(text) {
            Err(Error::Schema { key, .. }) => assert_eq!(key, "sensor.fov_up"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn omitted_weights_default_to_one() {
        let cfg = parse_config(&format!("{{{SENSOR}}}")).unwrap();
        assert!(cfg.weights.named().iter().all(|(_, w)| *w == 1.0));
        let cfg = parse_config(&format!(r#"{{{SENSOR}, "loss_weights": {{"lambda_d": 0.1}}}}"#)).unwrap();
        assert_eq!(cfg.weights.lambda_d, 0.1);
        assert_eq!(cfg.weights.lambda_p, 1.0);
    }

    #[test]
    fn errors_name_the_key() {
        let missing = r#"{"sensor": {"width": 2048, "fov_up": 3, "fov_total": 28}}"#;
        assert!(matches!(parse_config(missing), Err(Error::Schema { key, .. }) if key == "sensor.height"));
        let unknown = format!(r#"{{{SENSOR}, "pipeline": {{"kernal": [3, 3]}}}}"#);
        assert!(matches!(parse_config(&unknown), Err(Error::Schema { key, .. }) if key == "pipeline.kernal"));
        let neg = format!(r#"{{{SENSOR}, "loss_weights": {{"lambda_m": -1}}}}"#);
        assert!(matches!(parse_config(&neg), Err(Error::Schema { key, .. }) if key == "loss_weights.lambda_m"));
        let even = format!(r#"{{{SENSOR}, "pipeline": {{"kernel": [3, 4]}}}}"#);
        assert!(matches!(parse_config(&even), Err(Error::Schema { key, .. }) if key == "pipeline.kernel[1]"));
    }

    #[test]
    fn labels_section() {
        let text = format!(
            r#"{{{SENSOR}, "labels": {{"num_classes": 3, "remap": {{"10": 1, "40": 2}}}}}}"#
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.remap.map(40), 2);
        assert_eq!(cfg.remap.map(41), 0);
        assert_eq!(cfg.class_weights, vec![1.0; 3]);
    }

    #[test]
    fn default_ontology_is_semantic_kitti() {
        let cfg = parse_config(&format!("{{{SENSOR}}}")).unwrap();
        assert_eq!(cfg.remap.num_classes(), 20);
        assert_eq!(cfg.remap.map(10), 1);
        assert_eq!(cfg.remap.map(252), 1);
        assert_eq!(cfg.class_names[9], "road");
    }
}

//! Every JSON file the tool reads or writes validates against docs/schemas.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::{Registry, Validator};
use serde_json::{json, Value};

const BASE: &str = "https://wallscan.invalid/schemas/";

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

struct Schemas {
    docs: Vec<(String, Value)>,
}

impl Schemas {
    fn load() -> Schemas {
        let mut docs = Vec::new();
        for e in fs::read_dir(schema_dir()).unwrap() {
            let p = e.unwrap().path();
            let doc: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
            let id = doc["$id"].as_str().unwrap().to_string();
            assert_eq!(id, format!("{BASE}{}", p.file_name().unwrap().to_str().unwrap()));
            docs.push((id, doc));
        }
        Schemas { docs }
    }

    fn check(&self, name: &str, instance: &Value) -> Vec<String> {
        let mut reg = Registry::new();
        for (id, doc) in &self.docs {
            reg = reg.add(id.as_str(), doc.clone()).unwrap();
        }
        let reg = reg.prepare().unwrap();
        let root = json!({ "$ref": format!("{BASE}{name}.schema.json") });
        let v: Validator = jsonschema::options().with_registry(&reg).build(&root).unwrap();
        v.iter_errors(instance).map(|e| format!("{e} at {}", e.instance_path())).collect()
    }

    fn assert_valid(&self, name: &str, path: &Path) {
        let value: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        let errors = self.check(name, &value);
        assert!(errors.is_empty(), "{} against {name}: {errors:?}", path.display());
    }
}

fn wallscan(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_wallscan")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_outputs_match_schemas() {
    let schemas = Schemas::load();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = d.join("scene.json");
    let scan = d.join("scan.json");
    let wave = d.join("wave.json");
    fs::write(
        &scene,
        r#"{"permittivity": 7.5, "wall": "brick", "targets": [
            {"x0": 0.1, "z0": 0.05, "material": "corroded_rebar"},
            {"x0": 0.2, "z0": 0.08, "material": "custom", "refractive_index": [3.0, 0.5], "dispersion_slope": 0.02}]}"#,
    )
    .unwrap();
    fs::write(&scan, r#"{"speed": 0.02, "scan_length": 0.3, "seed": 9, "range_samples": 160}"#).unwrap();
    fs::write(
        &wave,
        r#"{"amplitude": 1.0, "carrier_hz": 7.29e9, "bandwidth_hz": 1.5e9, "sample_rate_hz": 23.328e9}"#,
    )
    .unwrap();
    for (name, p) in [("scene", &scene), ("scan", &scan), ("waveform", &wave)] {
        schemas.assert_valid(name, p);
    }

    let sim = d.join("sim");
    let img = d.join("img");
    wallscan(&["simulate", "--scene", s(&scene), "--scan", s(&scan), "--waveform", s(&wave), "--out", s(&sim)]);
    wallscan(&["focus", "--algo", "bp", "--eps", "7.5", "--speed", "0.02", "--in", s(&sim), "--out", s(&img)]);
    wallscan(&["detect", "--in", s(&img)]);
    schemas.assert_valid("bscan-meta", &sim.join("co_pol.json"));
    schemas.assert_valid("bscan-meta", &sim.join("cross_pol.json"));
    schemas.assert_valid("scene", &sim.join("scene.json"));
    schemas.assert_valid("image-meta", &img.join("image.json"));
    schemas.assert_valid("focus", &img.join("focus.json"));
    schemas.assert_valid("detections", &img.join("detections.json"));

    for kind in ["inet", "mnet"] {
        let out = d.join(kind);
        wallscan(&["export-dataset", "--kind", kind, "--n", "4", "--seed", "3", "--out", s(&out)]);
        schemas.assert_valid("manifest", &out.join("manifest.json"));
    }
}

#[test]
fn schemas_reject_unknown_keys_like_the_parser() {
    let schemas = Schemas::load();
    let typo = json!({"speed": 0.02, "scan_length": 0.3, "noise": 0.1});
    assert!(!schemas.check("scan", &typo).is_empty());
    assert!(serde_json::from_value::<wallscan::ScanConfig>(typo).is_err());
    let missing = json!({"permittivity": 9.0, "targets": [{"x0": 0.1, "material": "leaked_pvc"}]});
    assert!(!schemas.check("scene", &missing).is_empty());
}

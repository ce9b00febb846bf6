#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spv_core::experiment::ObjectClass;

pub const PANO_W: u32 = 64;
pub const PANO_H: u32 = 32;

/// Small display used to keep sessions fast.
pub const SMALL_DISPLAY: [&str; 4] = ["--width", "96", "--height", "108"];

pub fn spv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn spv")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = spv(args);
    assert!(
        out.status.success(),
        "spv {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn write_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    image::GrayImage::from_fn(w, h, |x, y| image::Luma([f(x, y)]))
        .save(path)
        .unwrap();
}

/// Annotations for scene `i`: between 1 and 5 objects.
pub fn scene_objects(i: usize) -> Vec<(ObjectClass, u32)> {
    let a = ObjectClass::ALL[i % ObjectClass::ALL.len()];
    let b = ObjectClass::ALL[(i * 5 + 3) % ObjectClass::ALL.len()];
    if a == b {
        vec![(a, 1 + (i % 3) as u32)]
    } else {
        vec![(a, 1 + (i % 3) as u32), (b, 1 + (i % 2) as u32)]
    }
}

/// Writes `n` scenes with textured panoramas and annotations; returns the
/// manifest path.
pub fn write_corpus(dir: &Path, n: usize) -> PathBuf {
    std::fs::create_dir_all(dir.join("pano")).unwrap();
    std::fs::create_dir_all(dir.join("ann")).unwrap();
    let mut scenes = Vec::new();
    for i in 0..n {
        let id = format!("scene{i:02}");
        write_png(&dir.join(format!("pano/{id}.png")), PANO_W, PANO_H, |x, y| {
            ((x * 7 + y * 13 + i as u32 * 31) % 256) as u8
        });
        let objects: serde_json::Map<String, serde_json::Value> = scene_objects(i)
            .into_iter()
            .map(|(c, n)| (c.as_str().to_owned(), n.into()))
            .collect();
        std::fs::write(
            dir.join(format!("ann/{id}.json")),
            serde_json::json!({ "objects": objects }).to_string(),
        )
        .unwrap();
        scenes.push(serde_json::json!({
            "id": id,
            "panorama": format!("pano/{id}.png"),
            "annotations": format!("ann/{id}.json"),
        }));
    }
    let manifest = dir.join("corpus.json");
    std::fs::write(
        &manifest,
        serde_json::json!({ "width": PANO_W, "height": PANO_H, "scenes": scenes }).to_string(),
    )
    .unwrap();
    manifest
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

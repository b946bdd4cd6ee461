//! On-disk fixtures and process helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use pbrboost_core::camera::Camera;
use pbrboost_core::fixtures;
use pbrboost_core::mask::{default_view_set, render_face_labels, save_view_labels};
use pbrboost_core::obj::save_mesh;
use pbrboost_core::pipeline::{fit_ortho_scale, prepare_mesh};
use pbrboost_core::texture::TextureMap;
use pbrboost_core::{Exec, TriMesh};

pub const BIN: &str = env!("CARGO_BIN_EXE_pbrboost");

pub struct Assets {
    pub dir: PathBuf,
    pub mesh: PathBuf,
    pub labels: PathBuf,
    pub albedo: PathBuf,
    pub recommendations: PathBuf,
    pub rig: PathBuf,
    pub camera: PathBuf,
    pub reference: PathBuf,
    pub triangles: usize,
}

pub fn sphere() -> TriMesh {
    fixtures::uv_sphere(32, 16, 1.0)
}

/// Writes a three-band sphere with clean per-view labels, a patterned albedo,
/// a recommendation file, a rig, a camera and a finer reference mesh.
pub fn write_assets(dir: &Path) -> Assets {
    let mesh = sphere();
    let mesh_path = dir.join("sphere.obj");
    save_mesh(&mesh_path, &mesh).unwrap();

    let truth = fixtures::height_bands(&mesh, 3);
    let centered = prepare_mesh(&mesh);
    let views: Vec<_> = default_view_set(96, fit_ortho_scale(&centered))
        .iter()
        .map(|cam| render_face_labels(&centered, &truth, cam, Exec::default()))
        .collect();
    let labels = dir.join("labels");
    save_view_labels(&labels, &views).unwrap();

    let mut albedo = TextureMap::new(64, 64, 3);
    for y in 0..64 {
        for x in 0..64 {
            let c = [x as f64 / 63.0, 0.4 + 0.2 * ((x / 8 + y / 8) % 2) as f64, y as f64 / 63.0];
            albedo.set_texel(x, y, &c);
        }
    }
    let albedo_path = dir.join("albedo.png");
    albedo.save_png(&albedo_path).unwrap();

    let recommendations = dir.join("recommendations.json");
    std::fs::write(
        &recommendations,
        r#"{"default":{"roughness":0.8,"metalness":0.0},"segments":[{"id":0,"name":"base","roughness":0.35,"metalness":1.0},{"id":2,"name":"cap","roughness":0.2,"metalness":0.0}]}"#,
    )
    .unwrap();

    let rig = dir.join("rig.json");
    std::fs::write(
        &rig,
        r#"{"directionals":[{"dir":[0.48,0.6,0.64],"rgb":[2.5,2.5,2.4]},{"dir":[-0.6,0.0,0.8],"rgb":[0.5,0.6,0.8]}],"ambient":[0.05,0.05,0.05]}"#,
    )
    .unwrap();

    let camera = dir.join("camera.json");
    write_camera(&camera, &Camera::orthographic(30.0, 20.0, fit_ortho_scale(&centered), 96));

    let reference = dir.join("reference.obj");
    save_mesh(&reference, &fixtures::bumpy_sphere(48, 48, 0.05, 4.0)).unwrap();

    Assets {
        dir: dir.to_owned(),
        mesh: mesh_path,
        labels,
        albedo: albedo_path,
        recommendations,
        rig,
        camera,
        reference,
        triangles: mesh.triangles.len(),
    }
}

pub fn write_camera(path: &Path, cam: &Camera) {
    std::fs::write(path, serde_json::to_string_pretty(cam).unwrap()).unwrap();
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(BIN).args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `mask`, `assign` and a short `refine` into `out`.
pub fn run_pipeline(a: &Assets, out: &Path, seed: &str) -> Vec<Output> {
    let mask = out.join("mask.txt");
    let maps = out.join("maps");
    let refined = out.join("refine");
    vec![
        run(["mask", "--mesh", p(&a.mesh), "--labels", p(&a.labels), "--out", p(&mask), "--seed", seed]),
        run([
            "assign", "--mesh", p(&a.mesh), "--mask", p(&mask), "--recommendations", p(&a.recommendations),
            "--res", "128", "--out", p(&maps), "--seed", seed,
        ]),
        run([
            "refine", "--mesh", p(&a.mesh), "--reference-mesh", p(&a.reference), "--rounds", "2", "--steps", "15",
            "--batch", "512", "--view-size", "48", "--res", "64", "--out", p(&refined), "--seed", seed,
        ]),
    ]
}

/// Spawns `pbrboost serve` on a free port and waits until it accepts
/// connections.
pub struct Server {
    child: Child,
    pub port: u16,
}

impl Server {
    pub fn start(extra: &[&str]) -> Server {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let mut args = vec!["serve".to_owned(), "--port".to_owned(), port.to_string()];
        args.extend(extra.iter().map(|s| s.to_string()));
        let child = Command::new(BIN).args(&args).stdout(Stdio::null()).stderr(Stdio::null()).spawn().unwrap();
        let server = Server { child, port };
        let start = Instant::now();
        while TcpStream::connect(("127.0.0.1", port)).is_err() {
            assert!(start.elapsed() < Duration::from_secs(30), "server did not start");
            std::thread::sleep(Duration::from_millis(50));
        }
        server
    }

    /// Minimal HTTP/1.1 exchange. Returns status, headers and body.
    pub fn request(&self, method: &str, path: &str, body: Option<&str>) -> (u16, Vec<(String, String)>, Vec<u8>) {
        let mut s = TcpStream::connect(("127.0.0.1", self.port)).unwrap();
        let body = body.unwrap_or("");
        write!(
            s,
            "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut raw = Vec::new();
        s.read_to_end(&mut raw).unwrap();
        let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
        let head = String::from_utf8_lossy(&raw[..split]).into_owned();
        let mut lines = head.lines();
        let status = lines.next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
        let headers = lines
            .filter_map(|l| l.split_once(':'))
            .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_owned()))
            .collect();
        (status, headers, raw[split + 4..].to_vec())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn header<'a>(headers: &'a [(String, String)], key: &str) -> Option<&'a str> {
    headers.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

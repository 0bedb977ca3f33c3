#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/kg")
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_medconsult")
}

pub const STOMACH_SCRIPT: [&str; 5] = ["I am sick in my stomach", "yes", "no", "What medicine can I take?", "thanks"];

/// Runs the CLI with `stdin` piped in.
pub fn run_cli(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(binary())
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn cli");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().expect("cli output")
}

/// A `serve` subprocess on a free port; killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(store: &Path, seed: Option<u64>) -> Self {
        Self::start_with(store, seed, &[])
    }

    pub fn start_with(store: &Path, seed: Option<u64>, extra: &[&str]) -> Self {
        let fixture = fixture_dir();
        let mut args = vec![
            "serve".to_string(),
            "--graph".into(),
            fixture.display().to_string(),
            "--listen".into(),
            "127.0.0.1:0".into(),
            "--store".into(),
            store.display().to_string(),
        ];
        if let Some(seed) = seed {
            args.push("--seed".into());
            args.push(seed.to_string());
        }
        args.extend(extra.iter().map(|s| s.to_string()));
        let mut child = Command::new(binary())
            .args(&args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).expect("server banner");
        let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}"));
        Self { child, base: format!("http://{addr}") }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .redirect(reqwest::redirect::Policy::none())
        .build()
        .unwrap()
}

pub fn create_session(client: &reqwest::blocking::Client, server: &Server) -> String {
    let resp = client.post(server.url("/v1/sessions")).send().unwrap();
    assert_eq!(resp.status().as_u16(), 201);
    let handle: serde_json::Value = resp.json().unwrap();
    handle["session_id"].as_str().unwrap().to_string()
}

pub fn post(client: &reqwest::blocking::Client, server: &Server, id: &str, text: &str) -> (u16, serde_json::Value) {
    let resp = client
        .post(server.url(&format!("/v1/sessions/{id}/messages")))
        .json(&serde_json::json!({ "text": text }))
        .send()
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().unwrap())
}

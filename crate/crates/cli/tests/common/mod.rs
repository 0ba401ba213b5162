#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_shelfwise");

pub fn shelfwise(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SHELFWISE_LOG_LEVEL").output().expect("run shelfwise")
}

pub fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Sorted keys, no whitespace.
pub fn canonical(value: &Value) -> String {
    // serde_json's default map is ordered, so re-serializing sorts keys.
    serde_json::to_string(value).expect("serializes")
}

/// `shelfwise serve` on a free port; killed on drop.
pub struct Server {
    child: Child,
    pub addr: SocketAddr,
}

impl Server {
    // The child is reaped in `Drop`.
    #[allow(clippy::zombie_processes)]
    pub fn start(input: &Path) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve", "--port", "0", "--input"])
            .arg(input)
            .env("SHELFWISE_LOG_LEVEL", "warn")
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .expect("spawn server");
        let mut stderr = BufReader::new(child.stderr.take().expect("piped"));
        let mut line = String::new();
        loop {
            line.clear();
            if stderr.read_line(&mut line).expect("read stderr") == 0 {
                let status = child.wait();
                panic!("server exited before listening: {status:?}");
            }
            if let Some(url) = line.trim().strip_prefix("listening on http://") {
                let addr = url.parse().expect("socket address");
                std::thread::spawn(move || std::io::copy(&mut stderr, &mut std::io::sink()));
                return Self { child, addr };
            }
        }
    }

    /// One HTTP/1.1 exchange; returns the status and body.
    pub fn request(&self, method: &str, path: &str, body: Option<&Value>) -> (u16, Vec<u8>) {
        let payload = body.map(|b| b.to_string()).unwrap_or_default();
        let mut stream = TcpStream::connect(self.addr).expect("connect");
        stream.set_read_timeout(Some(Duration::from_secs(120))).unwrap();
        write!(
            stream,
            "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        )
        .unwrap();
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).expect("read response");
        let split = raw.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
        let head = String::from_utf8_lossy(&raw[..split]);
        let status = head.split_whitespace().nth(1).and_then(|s| s.parse().ok()).expect("status code");
        (status, raw[split + 4..].to_vec())
    }

    pub fn post_json(&self, path: &str, body: &Value) -> (u16, Value) {
        let (status, bytes) = self.request("POST", path, Some(body));
        (status, serde_json::from_slice(&bytes).expect("JSON body"))
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

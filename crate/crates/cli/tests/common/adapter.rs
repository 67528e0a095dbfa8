//! A minimal in-process adapter: fixed generations, hash-derived vectors.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub const DIM: usize = 4;

pub struct ToyAdapter {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

fn vector_hex(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    (0..DIM)
        .flat_map(|i| (((h >> (8 * i)) & 0xff) as f32 / 64.0 - 2.0).to_le_bytes())
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn reply(path: &str, body: &str) -> (u16, String) {
    match path {
        "/health" => (200, format!(r#"{{"model_id":"toy","d":{DIM},"context_length":512}}"#)),
        "/generate" => (
            200,
            r#"{"generation":" Berlin, probably","first_token_probability":0.9,"token_count":3}"#.into(),
        ),
        "/represent" => {
            let v: serde_json::Value = serde_json::from_str(body).unwrap_or_default();
            let text = v["text"].as_str().unwrap_or_default();
            if text.is_empty() {
                return (400, r#"{"error":"empty text"}"#.into());
            }
            (
                200,
                format!(r#"{{"vector":"{}","d":{DIM},"layer":"last","position":"last"}}"#, vector_hex(text)),
            )
        }
        _ => (404, r#"{"error":"not found"}"#.into()),
    }
}

impl ToyAdapter {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).unwrap_or(0) == 0 {
                        break;
                    }
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; len];
                let _ = reader.read_exact(&mut body);
                counter.fetch_add(1, Ordering::SeqCst);
                let (status, text) = reply(&path, &String::from_utf8_lossy(&body));
                let mut out = stream;
                let _ = write!(
                    out,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = out.flush();
            }
        });
        ToyAdapter { url, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

//! An in-process echo bridge: 1-nearest-neighbour on standardized features
//! over the line protocol, plus a misbehaving variant.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Echo,
    /// Answers every request with a line that is not part of the protocol.
    Garbage,
}

pub struct EchoServer {
    pub addr: String,
    pub contexts: Arc<AtomicUsize>,
}

impl EchoServer {
    pub fn start(mode: Mode) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let contexts = Arc::new(AtomicUsize::new(0));
        let counter = contexts.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let counter = counter.clone();
                thread::spawn(move || serve(stream, mode, &counter));
            }
        });
        Self { addr, contexts }
    }

    pub fn endpoint(&self) -> String {
        format!("tcp://{}", self.addr)
    }
}

struct Session {
    mean: Vec<f64>,
    scale: Vec<f64>,
    z: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl Session {
    fn new(rows: Vec<Vec<f64>>) -> Self {
        let n_feat = rows[0].len() - 1;
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..n_feat).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..n_feat)
            .map(|j| {
                let sd = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let z = rows.iter().map(|r| (0..n_feat).map(|j| (r[j] - mean[j]) / scale[j]).collect()).collect();
        let labels = rows.iter().map(|r| r[n_feat]).collect();
        Self { mean, scale, z, labels }
    }

    fn predict(&self, q: &[f64]) -> f64 {
        let zq: Vec<f64> = q.iter().enumerate().map(|(j, x)| (x - self.mean[j]) / self.scale[j]).collect();
        let mut best = (f64::INFINITY, 0usize);
        for (i, row) in self.z.iter().enumerate() {
            let d: f64 = row.iter().zip(&zq).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        self.labels[best.1]
    }
}

fn parse_row(line: &str) -> Option<Vec<f64>> {
    line.split('\t').map(|f| f.trim().parse::<f64>().ok()).collect()
}

fn serve(stream: TcpStream, mode: Mode, contexts: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    let mut session: Option<(Session, usize)> = None;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let head: Vec<String> = line.trim_end().split('\t').map(str::to_string).collect();
        let mut block = |n: usize| -> Vec<String> {
            (0..n)
                .map(|_| {
                    let mut l = String::new();
                    reader.read_line(&mut l).unwrap();
                    l.trim_end().to_string()
                })
                .collect()
        };
        let reply = match head[0].as_str() {
            _ if mode == Mode::Garbage => {
                if head[0] == "CTX" || head[0] == "QRY" {
                    block(head[1].parse().unwrap());
                }
                "HELLO?\n".to_string()
            }
            "PING" => "PONG\n".to_string(),
            "QUIT" => return,
            "CTX" => {
                let (n, f): (usize, usize) = (head[1].parse().unwrap(), head[2].parse().unwrap());
                let rows: Option<Vec<Vec<f64>>> = block(n).iter().map(|l| parse_row(l)).collect();
                match rows {
                    None => "ERR BADNUM unparseable float\n".to_string(),
                    Some(rows) if rows.iter().any(|r| r.len() != f + 1) => "ERR BADDIM row width\n".to_string(),
                    Some(rows) => {
                        contexts.fetch_add(1, Ordering::SeqCst);
                        session = Some((Session::new(rows), f));
                        "OK 0\n".to_string()
                    }
                }
            }
            "QRY" => {
                let m: usize = head[1].parse().unwrap();
                let rows: Option<Vec<Vec<f64>>> = block(m).iter().map(|l| parse_row(l)).collect();
                match (&session, rows) {
                    (None, _) => "ERR BADDIM no context\n".to_string(),
                    (_, None) => "ERR BADNUM unparseable float\n".to_string(),
                    (Some((_, f)), Some(rows)) if rows.iter().any(|r| r.len() != *f) => {
                        "ERR BADDIM query width\n".to_string()
                    }
                    (Some((s, _)), Some(rows)) => {
                        let mut r = format!("OK {m}\n");
                        for q in rows {
                            r.push_str(&format!("{}\n", s.predict(&q)));
                        }
                        r
                    }
                }
            }
            _ => "ERR BADCMD unknown command\n".to_string(),
        };
        if out.write_all(reply.as_bytes()).is_err() {
            return;
        }
    }
}

//! Client for an external regressor process speaking the line protocol:
//!
//! ```text
//! client: CTX <n_rows> <n_feat>, then n_rows lines of features + label
//!         QRY <m_rows>, then m_rows lines of features
//!         PING | QUIT
//! server: OK <m_rows>, then m_rows lines of one float
//!         PONG | ERR <code> <message>
//! ```
//!
//! Fields are tab-separated; replies are split on any whitespace. A CTX is
//! acknowledged with `OK 0`. The context is resent only when the row set
//! changes.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use super::rows::RowSet;
use super::RegressorError;
use crate::env::FeatureRow;
use crate::format_float;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio(Vec<String>),
}

impl Endpoint {
    /// `tcp://host:port`, `host:port`, or `stdio:<program> [args...]`.
    pub fn parse(s: &str) -> Result<Self, RegressorError> {
        let s = s.trim();
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(RegressorError::Unreachable("empty stdio command".into()));
            }
            return Ok(Endpoint::Stdio(argv));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        if addr.rsplit_once(':').is_none_or(|(h, p)| h.is_empty() || p.parse::<u16>().is_err()) {
            return Err(RegressorError::Unreachable(format!("bad endpoint `{s}`")));
        }
        Ok(Endpoint::Tcp(addr.to_string()))
    }
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Connection {
    fn open(endpoint: &Endpoint) -> Result<Self, RegressorError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream =
                    TcpStream::connect(addr).map_err(|e| RegressorError::Unreachable(format!("{addr}: {e}")))?;
                stream.set_nodelay(true).ok();
                stream.set_read_timeout(Some(Duration::from_secs(600))).ok();
                let reader = stream.try_clone().map_err(|e| RegressorError::Unreachable(e.to_string()))?;
                Ok(Self { reader: Box::new(BufReader::new(reader)), writer: Box::new(stream), child: None })
            }
            Endpoint::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| RegressorError::Unreachable(format!("{}: {e}", argv[0])))?;
                let stdin = child.stdin.take().unwrap();
                let stdout = child.stdout.take().unwrap();
                Ok(Self { reader: Box::new(BufReader::new(stdout)), writer: Box::new(stdin), child: Some(child) })
            }
        }
    }

    fn send(&mut self, text: &str) -> Result<(), RegressorError> {
        self.writer
            .write_all(text.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| RegressorError::Unreachable(format!("write failed: {e}")))
    }

    fn read_line(&mut self) -> Result<String, RegressorError> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(RegressorError::Unreachable("connection closed".into())),
            Ok(_) => Ok(line.trim_end_matches(['\r', '\n']).to_string()),
            Err(e) => Err(RegressorError::Unreachable(format!("read failed: {e}"))),
        }
    }

    /// Reads an `OK <n>` header (or maps `ERR`) and returns n.
    fn read_ok(&mut self) -> Result<usize, RegressorError> {
        let line = self.read_line()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("OK") => parts
                .next()
                .and_then(|n| n.parse().ok())
                .filter(|_| parts.next().is_none())
                .ok_or_else(|| RegressorError::Malformed(line.clone())),
            Some("ERR") => Err(remote_error(&line)),
            _ => Err(RegressorError::Malformed(line)),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        let _ = self.writer.write_all(b"QUIT\n");
        let _ = self.writer.flush();
        if let Some(child) = &mut self.child {
            let _ = child.wait();
        }
    }
}

fn remote_error(line: &str) -> RegressorError {
    let rest = line.trim_start_matches("ERR").trim_start();
    let (code, message) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if code == "BADDIM" {
        RegressorError::DimensionMismatch(format!("server: {}", message.trim()))
    } else {
        RegressorError::Remote { code: code.to_string(), message: message.trim().to_string() }
    }
}

fn push_row(out: &mut String, features: &[f64], label: Option<f64>) {
    for (i, v) in features.iter().chain(label.as_ref()).enumerate() {
        if i > 0 {
            out.push('\t');
        }
        out.push_str(&format_float(*v));
    }
    out.push('\n');
}

/// One connection, one request in flight. Not shareable across threads.
pub struct BridgeClient {
    endpoint: Endpoint,
    conn: Option<Connection>,
    sent_context: Option<u64>,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient")
            .field("endpoint", &self.endpoint)
            .field("connected", &self.conn.is_some())
            .finish()
    }
}

impl BridgeClient {
    /// Parses the endpoint; the connection opens on first use.
    pub fn new(endpoint: &str) -> Result<Self, RegressorError> {
        Ok(Self { endpoint: Endpoint::parse(endpoint)?, conn: None, sent_context: None })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn with_conn<T>(
        &mut self,
        f: impl FnOnce(&mut Connection, &mut Option<u64>) -> Result<T, RegressorError>,
    ) -> Result<T, RegressorError> {
        if self.conn.is_none() {
            self.conn = Some(Connection::open(&self.endpoint)?);
            self.sent_context = None;
        }
        let result = f(self.conn.as_mut().unwrap(), &mut self.sent_context);
        if let Err(RegressorError::Unreachable(_) | RegressorError::Malformed(_)) = &result {
            // the stream position is unknown; start over next time
            self.conn = None;
            self.sent_context = None;
        }
        result
    }

    pub fn ping(&mut self) -> Result<(), RegressorError> {
        self.with_conn(|c, _| {
            c.send("PING\n")?;
            let line = c.read_line()?;
            match line.split_whitespace().next() {
                Some("PONG") => Ok(()),
                Some("ERR") => Err(remote_error(&line)),
                _ => Err(RegressorError::Malformed(line)),
            }
        })
    }

    pub fn predict(&mut self, set: &RowSet, queries: &[FeatureRow]) -> Result<Vec<f64>, RegressorError> {
        if set.is_empty() {
            return Err(RegressorError::EmptyContext);
        }
        let n_feat = set.n_feat();
        let mut qry = format!("QRY\t{}\n", queries.len());
        for q in queries {
            if q.features.len() != n_feat {
                return Err(RegressorError::DimensionMismatch(format!(
                    "query has {} features, context {n_feat}",
                    q.features.len()
                )));
            }
            push_row(&mut qry, &q.features, None);
        }
        let set_id = set.id();
        self.with_conn(|c, sent| {
            if *sent != Some(set_id) {
                *sent = None;
                let mut ctx = format!("CTX\t{}\t{}\n", set.len(), n_feat);
                for r in set.rows() {
                    push_row(&mut ctx, &r.features, r.label);
                }
                c.send(&ctx)?;
                let acked = c.read_ok()?;
                if acked != 0 {
                    return Err(RegressorError::Malformed(format!("CTX acknowledged with OK {acked}")));
                }
                *sent = Some(set_id);
            }
            c.send(&qry)?;
            let m = c.read_ok()?;
            if m != queries.len() {
                return Err(RegressorError::Malformed(format!(
                    "expected {} values, server announced {m}",
                    queries.len()
                )));
            }
            (0..m)
                .map(|_| {
                    let line = c.read_line()?;
                    line.trim().parse::<f64>().map_err(|_| RegressorError::Malformed(line))
                })
                .collect()
        })
    }
}

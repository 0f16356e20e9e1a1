//! `jcnsra/1`: line-delimited JSON access to environment sessions.
//!
//! Requests carry a `type` tag: `hello`, `reset` (`seed`, optional `config`),
//! `step` (`node`, `bucket`) and `close`. Each request line gets exactly one
//! response line: `hello_ack`, `state`, `error`, or `bye` for `close`.
//! Observation numbers and rewards are rounded to nine significant digits so
//! transcripts diff cleanly.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::env::{Action, Env, EnvConfig, Observation, StepInfo, FEATURES};
use crate::error::{Error, Result};
use crate::sampling::Sampler;

pub const PROTOCOL: &str = "jcnsra/1";
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Hello,
    Reset {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        config: Option<EnvConfig>,
    },
    Step {
        node: usize,
        bucket: u32,
    },
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireObservation {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    HelloAck {
        protocol: String,
        protocol_version: u32,
        #[serde(rename = "N")]
        nodes: usize,
        #[serde(rename = "K")]
        buckets: u32,
        #[serde(rename = "T")]
        episode_length: usize,
    },
    State {
        observation: WireObservation,
        reward: f64,
        done: bool,
        info: StepInfo,
    },
    Error {
        code: String,
        detail: String,
    },
    Bye,
}

/// Rounds to nine significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

impl From<&Observation> for WireObservation {
    fn from(obs: &Observation) -> Self {
        WireObservation {
            rows: obs.rows,
            cols: FEATURES,
            data: obs.data.iter().map(|&v| round_sig9(v)).collect(),
        }
    }
}

fn error_code(err: &Error) -> &'static str {
    match err {
        Error::NotReset => "not_reset",
        Error::EpisodeDone => "episode_done",
        Error::InvalidAction(_) | Error::NodeOutOfRange { .. } => "invalid_action",
        Error::Config(_) => "invalid_config",
        Error::Sampling(_) => "sampling_failed",
        _ => "internal",
    }
}

impl Response {
    fn error(code: &str, detail: impl Into<String>) -> Self {
        Response::Error {
            code: code.into(),
            detail: detail.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("responses serialize")
    }
}

impl From<Error> for Response {
    fn from(err: Error) -> Self {
        Response::error(error_code(&err), err.to_string())
    }
}

/// One connection's environment. Nothing is shared with other sessions
/// except the read-only snapshot behind the sampler.
pub struct Session {
    env: Env,
    closed: bool,
}

impl Session {
    pub fn new(sampler: Sampler, config: EnvConfig) -> Result<Self> {
        Ok(Session {
            env: Env::with_sampler(sampler, config)?,
            closed: false,
        })
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn handle(&mut self, request: Request) -> Response {
        match request {
            Request::Hello => {
                let cfg = self.env.config();
                Response::HelloAck {
                    protocol: PROTOCOL.into(),
                    protocol_version: PROTOCOL_VERSION,
                    nodes: cfg.sample.target_size,
                    buckets: cfg.buckets,
                    episode_length: cfg.episode_length,
                }
            }
            Request::Reset { seed, config } => {
                if let Some(cfg) = config {
                    if let Err(e) = self.env.set_config(cfg) {
                        return e.into();
                    }
                }
                let obs = match self.env.reset(seed) {
                    Ok(obs) => obs,
                    Err(e) => return e.into(),
                };
                let warmup = self.env.last_flow().expect("episode just reset");
                Response::State {
                    observation: (&obs).into(),
                    reward: 0.0,
                    done: false,
                    info: StepInfo {
                        succeeded: warmup.succeeded,
                        failed: warmup.failed,
                        ..StepInfo::default()
                    },
                }
            }
            Request::Step { node, bucket } => match self.env.step(Action { node, bucket }) {
                Ok(out) => Response::State {
                    observation: (&out.observation).into(),
                    reward: round_sig9(out.reward),
                    done: out.done,
                    info: out.info,
                },
                Err(e) => e.into(),
            },
            Request::Close => {
                self.closed = true;
                Response::Bye
            }
        }
    }

    /// Parses and handles one request line.
    pub fn respond(&mut self, line: &str) -> Response {
        match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(req),
            Err(e) => Response::error("bad_request", e.to_string()),
        }
    }

    pub fn handle_line(&mut self, line: &str) -> String {
        self.respond(line).to_line()
    }
}

/// Serves one session over a line stream until `close` or end of input.
/// Blank lines are skipped.
pub fn serve_stream(session: &mut Session, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", session.handle_line(&line))?;
        output.flush()?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

fn serve_connection(stream: TcpStream, sampler: Sampler, config: EnvConfig) -> io::Result<()> {
    let mut session = Session::new(sampler, config).map_err(io::Error::other)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(&mut session, reader, BufWriter::new(stream))
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve_tcp(listener: TcpListener, sampler: Sampler, config: EnvConfig) -> io::Result<()> {
    config.validate().map_err(io::Error::other)?;
    for stream in listener.incoming() {
        let stream = stream?;
        let (sampler, config) = (sampler.clone(), config.clone());
        thread::spawn(move || {
            let _ = serve_connection(stream, sampler, config);
        });
    }
    Ok(())
}

/// Request/response pairs. The text form is one `>>> request` line followed
/// by one `<<< response` line per exchange.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub exchanges: Vec<(String, String)>,
}

impl Transcript {
    pub fn parse(text: &str) -> Result<Self> {
        let mut exchanges = Vec::new();
        let mut pending: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            if let Some(req) = line.strip_prefix(">>> ") {
                if pending.replace(req.to_string()).is_some() {
                    return Err(Error::Parse(format!("line {}: request without response", i + 1)));
                }
            } else if let Some(resp) = line.strip_prefix("<<< ") {
                let req = pending
                    .take()
                    .ok_or_else(|| Error::Parse(format!("line {}: response without request", i + 1)))?;
                exchanges.push((req, resp.to_string()));
            } else if !line.trim().is_empty() {
                return Err(Error::Parse(format!("line {}: expected '>>> ' or '<<< '", i + 1)));
            }
        }
        if pending.is_some() {
            return Err(Error::Parse("transcript ends with an unanswered request".into()));
        }
        Ok(Transcript { exchanges })
    }

    pub fn requests(&self) -> impl Iterator<Item = &str> {
        self.exchanges.iter().map(|(q, _)| q.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (q, r) in &self.exchanges {
            out.push_str(">>> ");
            out.push_str(q);
            out.push_str("\n<<< ");
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    /// Index of the first exchange whose response differs from `other`'s,
    /// or whose request list differs in length.
    pub fn first_mismatch(&self, other: &Transcript) -> Option<usize> {
        let common = self.exchanges.len().min(other.exchanges.len());
        (0..common)
            .find(|&i| self.exchanges[i] != other.exchanges[i])
            .or((self.exchanges.len() != other.exchanges.len()).then_some(common))
    }
}

/// Runs requests through an in-process session.
pub fn record_in_process<'a>(
    session: &mut Session,
    requests: impl IntoIterator<Item = &'a str>,
) -> Transcript {
    let exchanges = requests
        .into_iter()
        .map(|q| (q.to_string(), session.handle_line(q)))
        .collect();
    Transcript { exchanges }
}

/// Sends requests over a connected stream, one at a time, reading one
/// response line after each.
pub fn record_over<'a>(
    stream: &TcpStream,
    requests: impl IntoIterator<Item = &'a str>,
) -> io::Result<Transcript> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream.try_clone()?;
    let mut exchanges = Vec::new();
    for q in requests {
        writeln!(writer, "{q}")?;
        writer.flush()?;
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the connection"));
        }
        exchanges.push((q.to_string(), line.trim_end_matches(['\r', '\n']).to_string()));
    }
    Ok(Transcript { exchanges })
}

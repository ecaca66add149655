use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use super::{open_session, Action, Briefing, Message, MessageType, Session, SessionConfig, SessionError};
use crate::system::{Assignment, TaskSpec};

/// Runs one session over a line stream until the law is submitted or the
/// peer hangs up. Lines that are not valid messages get an error reply and
/// are left out of the transcript.
pub fn serve_stream<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    task: &TaskSpec,
    config: SessionConfig,
    session_id: &str,
) -> io::Result<Session> {
    let (mut session, _) = open_session(task, config, session_id).map_err(io::Error::other)?;
    writeln!(writer, "{}", session.transcript()[0].to_line())?;
    writer.flush()?;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::from_line(&line) {
            Ok(request) => session.handle(&request),
            Err(e) => Message::new(
                MessageType::Error,
                session_id,
                session.rounds_used(),
                serde_json::json!({"code": e.code(), "message": e.to_string()}),
            ),
        };
        writeln!(writer, "{}", reply.to_line())?;
        writer.flush()?;
        if !session.is_open() {
            return Ok(session);
        }
    }
    session.abort("peer closed the stream");
    Ok(session)
}

/// Accepts connections and runs one independent session per connection on
/// its own thread. Connection `n` (from 0) uses seed `rng_seed + n`.
/// Stops after `limit` connections when given.
pub fn serve_tcp(
    listener: TcpListener,
    task: &TaskSpec,
    config: SessionConfig,
    limit: Option<usize>,
) -> io::Result<Vec<Session>> {
    config.validate().map_err(io::Error::other)?;
    let mut handles = Vec::new();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let task = task.clone();
        let config = SessionConfig {
            rng_seed: config.rng_seed.wrapping_add(n as u64),
            ..config
        };
        handles.push(thread::spawn(move || {
            let reader = BufReader::new(stream.try_clone()?);
            serve_stream(reader, stream, &task, config, &format!("session-{n}"))
        }));
        if limit.is_some_and(|l| n + 1 >= l) {
            break;
        }
    }
    handles
        .into_iter()
        .map(|h| h.join().map_err(|_| io::Error::other("session thread panicked"))?)
        .collect()
}

/// Client side of the wire protocol.
pub struct LineClient<R, W> {
    reader: R,
    writer: W,
    pub session_id: String,
    pub briefing: Briefing,
    round: usize,
}

impl LineClient<BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: impl std::net::ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        LineClient::new(BufReader::new(stream.try_clone()?), stream)
    }
}

impl<R: BufRead, W: Write> LineClient<R, W> {
    /// Reads the briefing.
    pub fn new(mut reader: R, writer: W) -> io::Result<Self> {
        let first = read_message(&mut reader)?;
        if first.kind != MessageType::Briefing {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "expected a briefing"));
        }
        let briefing = serde_json::from_value(first.payload).map_err(io::Error::other)?;
        Ok(LineClient {
            reader,
            writer,
            session_id: first.session_id,
            briefing,
            round: 0,
        })
    }

    /// Rounds the server has charged so far.
    pub fn rounds_used(&self) -> usize {
        self.round
    }

    /// Sends an action and returns the server's reply message.
    pub fn send(&mut self, action: &Action) -> io::Result<Message> {
        let request = Message::request(&self.session_id, self.round + 1, action);
        writeln!(self.writer, "{}", request.to_line())?;
        self.writer.flush()?;
        let reply = read_message(&mut self.reader)?;
        self.round = reply.round;
        Ok(reply)
    }

    pub fn run_experiment(&mut self, sets: Vec<Assignment>) -> io::Result<Message> {
        self.send(&Action::RunExperiment(sets))
    }

    pub fn submit(&mut self, law: &str) -> io::Result<Message> {
        self.send(&Action::SubmitFinalLaw(law.to_string()))
    }
}

fn read_message<R: BufRead>(reader: &mut R) -> io::Result<Message> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the stream"));
    }
    Message::from_line(line.trim_end()).map_err(|e: SessionError| io::Error::new(io::ErrorKind::InvalidData, e))
}

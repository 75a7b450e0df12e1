//! Line protocol between the driver and an out-of-process model.
//!
//! The driver opens with `REFIND 1` and the worker answers
//! `OK <n_cells> <n_p> <n_data>`. Each task is then one request and one
//! reply line:
//!
//! ```text
//! cost\n<p values>\n                      -> ok <J>
//! grad\n<p values>\n                      -> ok <g values>
//! optim\n<zone indices>\n<m values>\n     -> ok <J> <m values>
//! ```
//!
//! Values are space separated, cell-major then component, written as the
//! shortest decimal that parses back to the same `f64`. Failures are
//! reported as `err <message>`.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::{Condvar, Mutex};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::zonation::{CoarseParam, FineParam, Zonation};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sizes {
    pub n_cells: usize,
    pub n_p: usize,
    pub n_data: usize,
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn encode(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn encode_all(values: &[f64]) -> String {
    values.iter().map(|&v| encode(v)).collect::<Vec<_>>().join(" ")
}

fn decode_all(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split_ascii_whitespace()
        .enumerate()
        .map(|(i, tok)| tok.parse().map_err(|_| format!("non-numeric token {i}: {tok:?}")))
        .collect()
}

/// One connection to a worker. Requests are strictly sequential: a request
/// is written only after the reply to the previous one has been read.
pub struct Session {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    sizes: Sizes,
    child: Option<Child>,
}

impl Session {
    /// Performs the handshake over an arbitrary byte-stream pair.
    pub fn handshake(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Result<Self> {
        let mut reader: Box<dyn BufRead + Send> = Box::new(BufReader::new(reader));
        let mut writer: Box<dyn Write + Send> = Box::new(writer);
        let sent = writeln!(writer, "REFIND {PROTOCOL_VERSION}").and_then(|_| writer.flush());
        sent.map_err(|e| Error::Handshake(format!("cannot reach worker: {e}")))?;
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| Error::Handshake(format!("cannot read worker reply: {e}")))?;
        if n == 0 {
            return Err(Error::Handshake("worker closed the stream".into()));
        }
        let sizes = parse_greeting(line.trim_end())
            .ok_or_else(|| Error::Handshake(format!("unexpected reply {:?}", line.trim_end())))?;
        Ok(Self { reader, writer, sizes, child: None })
    }

    /// Launches `cmd` with piped standard streams and performs the handshake.
    pub fn spawn(cmd: &mut Command) -> Result<Self> {
        let mut child = cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        match Self::handshake(stdout, stdin) {
            Ok(mut session) => {
                session.child = Some(child);
                Ok(session)
            }
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }

    pub fn cost(&mut self, p: &FineParam) -> Result<f64> {
        self.check_fine(p)?;
        let reply = self.request(&format!("cost\n{}\n", encode_all(p.as_slice())))?;
        expect_len(&reply, 1)?;
        Ok(reply[0])
    }

    pub fn grad(&mut self, p: &FineParam) -> Result<FineParam> {
        self.check_fine(p)?;
        let reply = self.request(&format!("grad\n{}\n", encode_all(p.as_slice())))?;
        expect_len(&reply, p.as_slice().len())?;
        FineParam::new(self.sizes.n_p, reply)
    }

    pub fn optim(&mut self, z: &Zonation, m_init: &CoarseParam) -> Result<(CoarseParam, f64)> {
        if z.n_cells() != self.sizes.n_cells || m_init.n_p() != self.sizes.n_p || m_init.n_zones() != z.n_zones() {
            return Err(Error::InvalidArgument("zonation or coarse parameter does not match the worker".into()));
        }
        let zones = z.assignment().iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let reply = self.request(&format!("optim\n{zones}\n{}\n", encode_all(m_init.as_slice())))?;
        expect_len(&reply, 1 + m_init.as_slice().len())?;
        Ok((CoarseParam::new(self.sizes.n_p, reply[1..].to_vec())?, reply[0]))
    }

    fn check_fine(&self, p: &FineParam) -> Result<()> {
        if p.n_cells() != self.sizes.n_cells || p.n_p() != self.sizes.n_p {
            return Err(Error::InvalidArgument("fine parameter does not match the worker".into()));
        }
        Ok(())
    }

    fn request(&mut self, body: &str) -> Result<Vec<f64>> {
        let transport = |e: std::io::Error| Error::Transport(e.to_string());
        self.writer.write_all(body.as_bytes()).map_err(transport)?;
        self.writer.flush().map_err(transport)?;
        let mut line = String::new();
        if self.reader.read_line(&mut line).map_err(transport)? == 0 {
            return Err(Error::Transport("worker closed the stream".into()));
        }
        if !line.ends_with('\n') {
            return Err(Error::Transport(format!("worker closed the stream mid-reply after {:?}", line)));
        }
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix("ok") {
            if rest.is_empty() || rest.starts_with(' ') {
                return decode_all(rest).map_err(Error::Protocol);
            }
        }
        if let Some(msg) = line.strip_prefix("err") {
            return Err(Error::Model(msg.trim_start().to_string()));
        }
        Err(Error::Protocol(format!("unexpected reply {line:?}")))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        // closing stdin lets the worker see EOF and exit
        self.writer = Box::new(std::io::sink());
        if let Some(child) = self.child.as_mut() {
            let _ = child.wait();
        }
    }
}

fn parse_greeting(line: &str) -> Option<Sizes> {
    let mut parts = line.split(' ');
    if parts.next()? != "OK" {
        return None;
    }
    let mut next = || parts.next()?.parse::<usize>().ok().filter(|&n| n > 0);
    let sizes = Sizes { n_cells: next()?, n_p: next()?, n_data: next()? };
    parts.next().is_none().then_some(sizes)
}

fn expect_len(values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::Protocol(format!("expected {n} values, received {}", values.len())));
    }
    Ok(())
}

/// A [`Model`] served by a pool of worker sessions. Each call borrows a
/// session exclusively, so up to `pool size` tasks run concurrently.
pub struct RemoteModel {
    sizes: Sizes,
    pool: Mutex<Vec<Session>>,
    returned: Condvar,
}

impl RemoteModel {
    pub fn new(sessions: Vec<Session>) -> Result<Self> {
        let sizes = sessions.first().ok_or_else(|| Error::InvalidArgument("empty session pool".into()))?.sizes;
        if sessions.iter().any(|s| s.sizes != sizes) {
            return Err(Error::Handshake("workers report different sizes".into()));
        }
        Ok(Self { sizes, pool: Mutex::new(sessions), returned: Condvar::new() })
    }

    /// Spawns `count` copies of `program args…`.
    pub fn spawn(program: &std::path::Path, args: &[String], count: usize) -> Result<Self> {
        let sessions =
            (0..count.max(1)).map(|_| Session::spawn(Command::new(program).args(args))).collect::<Result<Vec<_>>>()?;
        Self::new(sessions)
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }

    fn with_session<T>(&self, task: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let mut session = {
            let mut pool = self.pool.lock().expect("session pool poisoned");
            loop {
                match pool.pop() {
                    Some(s) => break s,
                    None => pool = self.returned.wait(pool).expect("session pool poisoned"),
                }
            }
        };
        let out = task(&mut session);
        self.pool.lock().expect("session pool poisoned").push(session);
        self.returned.notify_one();
        out
    }
}

impl Model for RemoteModel {
    fn n_cells(&self) -> usize {
        self.sizes.n_cells
    }

    fn n_p(&self) -> usize {
        self.sizes.n_p
    }

    fn n_data(&self) -> usize {
        self.sizes.n_data
    }

    fn cost(&self, p: &FineParam) -> Result<f64> {
        self.with_session(|s| s.cost(p))
    }

    fn grad(&self, p: &FineParam) -> Result<FineParam> {
        self.with_session(|s| s.grad(p))
    }

    fn optim(&self, z: &Zonation, m_init: &CoarseParam) -> Result<(CoarseParam, f64)> {
        self.with_session(|s| s.optim(z, m_init))
    }
}

/// Worker side: answers requests for `model` until the input ends. A
/// request cut short by EOF ends the loop without a reply.
pub fn serve(model: &dyn Model, input: impl BufRead, mut output: impl Write) -> Result<()> {
    let mut lines = input.lines();
    let greeting = match lines.next() {
        None => return Ok(()),
        Some(line) => line?,
    };
    if greeting.trim_end() != format!("REFIND {PROTOCOL_VERSION}") {
        writeln!(output, "ERR unsupported protocol {:?}", greeting.trim_end())?;
        output.flush()?;
        return Err(Error::Handshake(format!("unexpected greeting {greeting:?}")));
    }
    writeln!(output, "OK {} {} {}", model.n_cells(), model.n_p(), model.n_data())?;
    output.flush()?;

    while let Some(task) = lines.next() {
        let task = task?;
        let task = task.trim();
        if task.is_empty() {
            continue;
        }
        let n_body = match task {
            "cost" | "grad" => 1,
            "optim" => 2,
            _ => 0,
        };
        let mut body = Vec::with_capacity(n_body);
        for _ in 0..n_body {
            match lines.next() {
                Some(line) => body.push(line?),
                None => return Ok(()),
            }
        }
        let reply = match answer(model, task, &body) {
            Ok(values) if values.is_empty() => "ok".to_string(),
            Ok(values) => format!("ok {}", encode_all(&values)),
            Err(msg) => format!("err {}", msg.replace('\n', " ")),
        };
        output.write_all(format!("{reply}\n").as_bytes())?;
        output.flush()?;
    }
    Ok(())
}

fn answer(model: &dyn Model, task: &str, body: &[String]) -> std::result::Result<Vec<f64>, String> {
    let fine = |line: &str| -> std::result::Result<FineParam, String> {
        let p = FineParam::new(model.n_p(), decode_all(line)?).map_err(|e| e.to_string())?;
        if p.n_cells() != model.n_cells() {
            return Err(format!("expected {} cells, received {}", model.n_cells(), p.n_cells()));
        }
        Ok(p)
    };
    match task {
        "cost" => Ok(vec![model.cost(&fine(&body[0])?).map_err(|e| e.to_string())?]),
        "grad" => Ok(model.grad(&fine(&body[0])?).map_err(|e| e.to_string())?.into_vec()),
        "optim" => {
            let zone_of = body[0]
                .split_ascii_whitespace()
                .enumerate()
                .map(|(i, t)| t.parse().map_err(|_| format!("bad zone index {i}: {t:?}")))
                .collect::<std::result::Result<Vec<usize>, _>>()?;
            let m = CoarseParam::new(model.n_p(), decode_all(&body[1])?).map_err(|e| e.to_string())?;
            let z = Zonation::new(zone_of, m.n_zones()).map_err(|e| e.to_string())?;
            let (m_opt, j) = model.optim(&z, &m).map_err(|e| e.to_string())?;
            let mut out = vec![j];
            out.extend_from_slice(m_opt.as_slice());
            Ok(out)
        }
        other => Err(format!("unknown-task {other}")),
    }
}

//! Binary formats and the client/server job exchange.
//!
//! Every artifact travels in an envelope:
//!
//! ```text
//! "RGC1" | version u8 | kind u8 | payload_len u64 LE | payload | crc32(payload) u32 LE
//! ```
//!
//! Payload encodings are little-endian throughout. Variable-length byte
//! fields carry a `u32` length prefix; counts are `u32`, except sparse-state
//! term counts and bit-string lengths, which are `u64`. A bit string is its
//! length followed by `ceil(len / 8)` bytes, byte `j` holding bits
//! `8j..8j+8`; padding bits must be zero. Amplitudes are pairs of IEEE-754
//! doubles, so state roundtrips are exact.
//!
//! Transports carry one request per connection (TCP) or per file
//! (`inbox/<id>.job` -> `outbox/<id>.result`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::bits::BitString;
use crate::circuit::{CpCircuit, Gate};
use crate::delegation::{server_eval, EncodedResult, JobBundle};
use crate::encoding::{KeySchedule, WireKeyPair};
use crate::error::{Error, Result};
use crate::evaluate::EvalStats;
use crate::garble::{GarbledBundle, GateTable, PhaseTable, ToffoliTables};
use crate::oracle::RandomOracle;
use crate::security::GameReport;
use crate::sim::{RegisterLayout, SparseState};
use crate::sym::{ClCiphertext, CryptoParams, KdmpCiphertext, KeyTag, SymKey};

pub const MAGIC: &[u8; 4] = b"RGC1";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 8;
/// Upper bound on a payload accepted from the network.
pub const MAX_PAYLOAD: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    JobBundle = 1,
    Result = 2,
    Error = 3,
    Circuit = 4,
    KeySchedule = 5,
    GarbledBundle = 6,
    SparseState = 7,
    GameReport = 8,
}

impl Kind {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => Kind::JobBundle,
            2 => Kind::Result,
            3 => Kind::Error,
            4 => Kind::Circuit,
            5 => Kind::KeySchedule,
            6 => Kind::GarbledBundle,
            7 => Kind::SparseState,
            8 => Kind::GameReport,
            _ => return Err(Error::Malformed(format!("unknown envelope kind {v}"))),
        })
    }
}

/// Wrap `payload` in an envelope.
pub fn seal(kind: Kind, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(kind as u8);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

/// Check an envelope and return its kind and payload.
pub fn open(bytes: &[u8]) -> Result<(Kind, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Malformed("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Version(bytes[4]));
    }
    let kind = Kind::from_u8(bytes[5])?;
    let len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let end = (HEADER_LEN as u64).checked_add(len).and_then(|e| e.checked_add(4));
    let Some(end) = end.and_then(|e| usize::try_from(e).ok()) else {
        return Err(Error::Malformed("payload length overflow".into()));
    };
    if bytes.len() < end {
        return Err(Error::Truncated);
    }
    if bytes.len() > end {
        return Err(Error::Malformed("trailing bytes after envelope".into()));
    }
    let payload = &bytes[HEADER_LEN..end - 4];
    let crc = u32::from_le_bytes(bytes[end - 4..end].try_into().expect("4 bytes"));
    if crc32fast::hash(payload) != crc {
        return Err(Error::Checksum);
    }
    Ok((kind, payload))
}

// ---------------------------------------------------------------------------
// Primitive writer / reader

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("value fits in u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len());
        self.buf.extend_from_slice(v);
    }

    pub fn raw(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }

    pub fn usizes(&mut self, v: &[usize]) {
        self.u32(v.len());
        for &x in v {
            self.u32(x);
        }
    }

    pub fn bits(&mut self, b: &BitString) {
        self.u64(b.len() as u64);
        self.raw(&b.to_bytes());
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Malformed(format!("{} unread payload bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        if end > self.buf.len() {
            return Err(Error::Truncated);
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()?;
        Ok(self.take(n)?.to_vec())
    }

    pub fn str(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?).map_err(|_| Error::Malformed("string is not UTF-8".into()))
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()?;
        // Each element needs 4 bytes; reject absurd counts before allocating.
        if n > (self.buf.len() - self.pos) / 4 {
            return Err(Error::Truncated);
        }
        (0..n).map(|_| self.u32()).collect()
    }

    fn bits_body(&mut self, len: usize) -> Result<BitString> {
        let raw = self.take(len.div_ceil(8))?;
        if !len.is_multiple_of(8) && raw[raw.len() - 1] >> (len % 8) != 0 {
            return Err(Error::Malformed("nonzero padding bits".into()));
        }
        Ok(BitString::from_bytes(raw, len))
    }

    pub fn bits(&mut self) -> Result<BitString> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::Malformed("bit length".into()))?;
        self.bits_body(len)
    }
}

/// A type with a canonical binary payload.
pub trait Wire: Sized {
    const KIND: Kind;
    fn write(&self, w: &mut Writer);
    fn read(r: &mut Reader) -> Result<Self>;

    fn to_payload(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.into_bytes()
    }

    fn from_payload(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let v = Self::read(&mut r)?;
        r.finish()?;
        Ok(v)
    }

    /// Full enveloped bytes.
    fn to_bytes(&self) -> Vec<u8> {
        seal(Self::KIND, &self.to_payload())
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (kind, payload) = open(bytes)?;
        if kind == Kind::Error && Self::KIND != Kind::Error {
            return Err(Error::Remote(RemoteError::from_payload(payload)?.message));
        }
        if kind != Self::KIND {
            return Err(Error::Malformed(format!("expected {:?} envelope, got {kind:?}", Self::KIND)));
        }
        Self::from_payload(payload)
    }
}

// ---------------------------------------------------------------------------
// Component encodings

fn write_params(w: &mut Writer, p: &CryptoParams) {
    w.u32(p.kappa_bits);
    w.u32(p.tag_bits);
}

fn read_params(r: &mut Reader) -> Result<CryptoParams> {
    let k = r.u32()?;
    let t = r.u32()?;
    CryptoParams::new(k, t)
}

fn write_tag(w: &mut Writer, t: &KeyTag) {
    w.bytes(&t.pad);
    w.bytes(&t.hash);
}

fn read_tag(r: &mut Reader) -> Result<KeyTag> {
    Ok(KeyTag {
        pad: r.bytes()?,
        hash: r.bytes()?,
    })
}

/// `r1 || r2 || r3 || masked || tags`.
pub fn write_cl(w: &mut Writer, c: &ClCiphertext) {
    for p in &c.pads {
        w.bytes(p);
    }
    w.bytes(&c.masked);
    for t in &c.tags {
        write_tag(w, t);
    }
}

pub fn read_cl(r: &mut Reader) -> Result<ClCiphertext> {
    let pads = [r.bytes()?, r.bytes()?, r.bytes()?];
    let masked = r.bytes()?;
    let tags = [read_tag(r)?, read_tag(r)?, read_tag(r)?];
    Ok(ClCiphertext { pads, masked, tags })
}

pub fn write_kdmp(w: &mut Writer, c: &KdmpCiphertext) {
    w.bytes(&c.r1);
    w.bytes(&c.masked);
    write_tag(w, &c.tag);
}

pub fn read_kdmp(r: &mut Reader) -> Result<KdmpCiphertext> {
    Ok(KdmpCiphertext {
        r1: r.bytes()?,
        masked: r.bytes()?,
        tag: read_tag(r)?,
    })
}

fn write_layout(w: &mut Writer, l: &RegisterLayout) {
    w.u32(l.registers().len());
    for (name, width) in l.registers() {
        w.str(name);
        w.u32(*width);
    }
}

fn read_layout(r: &mut Reader) -> Result<RegisterLayout> {
    let n = r.u32()?;
    let mut l = RegisterLayout::default();
    for _ in 0..n {
        let name = r.str()?;
        let width = r.u32()?;
        l.push(name, width)?;
    }
    Ok(l)
}

impl Wire for CpCircuit {
    const KIND: Kind = Kind::Circuit;

    fn write(&self, w: &mut Writer) {
        w.u32(self.num_inputs());
        w.u32(self.num_wires());
        w.u32(self.len());
        for g in self.gates() {
            match *g {
                Gate::Toffoli { inputs, outputs } => {
                    w.u8(0);
                    for x in inputs.iter().chain(&outputs) {
                        w.u32(*x);
                    }
                }
                Gate::Phase {
                    wire,
                    denom_exp,
                    negative,
                } => {
                    w.u8(1);
                    w.u32(wire);
                    w.u32(denom_exp as usize);
                    w.u8(negative as u8);
                }
            }
        }
        w.usizes(self.output_wires());
    }

    fn read(r: &mut Reader) -> Result<Self> {
        let num_inputs = r.u32()?;
        let num_wires = r.u32()?;
        let n = r.u32()?;
        let mut gates = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            gates.push(match r.u8()? {
                0 => {
                    let mut v = [0usize; 6];
                    for x in &mut v {
                        *x = r.u32()?;
                    }
                    Gate::Toffoli {
                        inputs: [v[0], v[1], v[2]],
                        outputs: [v[3], v[4], v[5]],
                    }
                }
                1 => {
                    let wire = r.u32()?;
                    let denom_exp = r.u32()? as u32;
                    let negative = match r.u8()? {
                        0 => false,
                        1 => true,
                        _ => return Err(Error::Malformed("phase sign byte".into())),
                    };
                    Gate::Phase {
                        wire,
                        denom_exp,
                        negative,
                    }
                }
                t => return Err(Error::Malformed(format!("gate tag {t}"))),
            });
        }
        let outputs = r.usizes()?;
        CpCircuit::from_parts(num_inputs, gates, num_wires, outputs)
    }
}

impl Wire for KeySchedule {
    const KIND: Kind = Kind::KeySchedule;

    /// Keys are raw `kappa / 8` bytes each, `k0` then `k1` per wire.
    fn write(&self, w: &mut Writer) {
        w.u32(self.kappa_bits);
        w.u32(self.pairs.len());
        for p in &self.pairs {
            w.raw(p.k0.as_bytes());
            w.raw(p.k1.as_bytes());
        }
        w.usizes(&self.input_wires);
        w.usizes(&self.output_wires);
    }

    fn read(r: &mut Reader) -> Result<Self> {
        let kappa = r.u32()?;
        if kappa == 0 || kappa % 8 != 0 {
            return Err(Error::KeyNotByteAligned(kappa));
        }
        let kb = kappa / 8;
        let n = r.u32()?;
        let mut pairs = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let k0 = SymKey(r.take(kb)?.to_vec());
            let k1 = SymKey(r.take(kb)?.to_vec());
            pairs.push(WireKeyPair { k0, k1 });
        }
        let inputs = r.usizes()?;
        let outputs = r.usizes()?;
        KeySchedule::from_parts(kappa, pairs, inputs, outputs)
    }
}

impl Wire for GarbledBundle {
    const KIND: Kind = Kind::GarbledBundle;

    fn write(&self, w: &mut Writer) {
        write_params(w, &self.params);
        self.circuit.write(w);
        w.u32(self.tables.len());
        for t in &self.tables {
            match t {
                GateTable::Toffoli(tt) => {
                    w.u8(0);
                    for row in tt.forward.iter().chain(&tt.backward) {
                        write_cl(w, row);
                    }
                }
                GateTable::Phase(pt) => {
                    w.u8(1);
                    for row in &pt.rows {
                        write_kdmp(w, row);
                    }
                }
            }
        }
    }

    fn read(r: &mut Reader) -> Result<Self> {
        let params = read_params(r)?;
        let circuit = CpCircuit::read(r)?;
        let n = r.u32()?;
        let mut tables = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            tables.push(match r.u8()? {
                0 => {
                    let rows = (0..16).map(|_| read_cl(r)).collect::<Result<Vec<_>>>()?;
                    GateTable::Toffoli(ToffoliTables {
                        forward: rows[..8].to_vec(),
                        backward: rows[8..].to_vec(),
                    })
                }
                1 => GateTable::Phase(PhaseTable {
                    rows: vec![read_kdmp(r)?, read_kdmp(r)?],
                }),
                t => return Err(Error::Malformed(format!("table tag {t}"))),
            });
        }
        let b = GarbledBundle { circuit, params, tables };
        b.validate()?;
        Ok(b)
    }
}

impl Wire for SparseState {
    const KIND: Kind = Kind::SparseState;

    /// Layout, then `(bits, re, im)` per term in increasing bit-string order.
    /// Term labels omit the length, which the layout fixes.
    fn write(&self, w: &mut Writer) {
        write_layout(w, self.layout());
        w.u64(self.num_terms() as u64);
        for (b, a) in self.terms() {
            w.raw(&b.to_bytes());
            w.f64(a.re);
            w.f64(a.im);
        }
    }

    fn read(r: &mut Reader) -> Result<Self> {
        let layout = read_layout(r)?;
        let width = layout.total_bits();
        let n = r.u64()?;
        let mut terms = BTreeMap::new();
        let mut prev: Option<BitString> = None;
        for _ in 0..n {
            let b = r.bits_body(width)?;
            let a = Complex64::new(r.f64()?, r.f64()?);
            if prev.as_ref().is_some_and(|p| *p >= b) {
                return Err(Error::Malformed("state terms not strictly increasing".into()));
            }
            prev = Some(b.clone());
            terms.insert(b, a);
        }
        SparseState::from_raw(layout, terms)
    }
}

impl Wire for GameReport {
    const KIND: Kind = Kind::GameReport;

    fn write(&self, w: &mut Writer) {
        w.str(&self.game);
        w.str(&self.distinguisher);
        w.u64(self.trials);
        w.f64(self.p1);
        w.f64(self.p0);
        w.f64(self.advantage_estimate);
        w.f64(self.confidence_radius);
        w.u64(self.oracle_queries_used);
    }

    fn read(r: &mut Reader) -> Result<Self> {
        Ok(GameReport {
            game: r.str()?,
            distinguisher: r.str()?,
            trials: r.u64()?,
            p1: r.f64()?,
            p0: r.f64()?,
            advantage_estimate: r.f64()?,
            confidence_radius: r.f64()?,
            oracle_queries_used: r.u64()?,
        })
    }
}

fn write_stats(w: &mut Writer, s: &EvalStats) {
    for v in [
        s.gates,
        s.toffolis,
        s.phases,
        s.terms,
        s.rows_tried,
        s.ver_calls,
        s.memo_hits,
        s.zero_checks,
        s.max_terms,
    ] {
        w.u64(v);
    }
}

fn read_stats(r: &mut Reader) -> Result<EvalStats> {
    Ok(EvalStats {
        gates: r.u64()?,
        toffolis: r.u64()?,
        phases: r.u64()?,
        terms: r.u64()?,
        rows_tried: r.u64()?,
        ver_calls: r.u64()?,
        memo_hits: r.u64()?,
        zero_checks: r.u64()?,
        max_terms: r.u64()?,
    })
}

impl Wire for JobBundle {
    const KIND: Kind = Kind::JobBundle;

    /// Oracle seed, encoded state, garbled bundle.
    fn write(&self, w: &mut Writer) {
        w.bytes(&self.oracle_seed);
        self.encoded.write(w);
        self.bundle.write(w);
    }

    fn read(r: &mut Reader) -> Result<Self> {
        Ok(JobBundle {
            oracle_seed: r.bytes()?,
            encoded: SparseState::read(r)?,
            bundle: GarbledBundle::read(r)?,
        })
    }
}

impl Wire for EncodedResult {
    const KIND: Kind = Kind::Result;

    fn write(&self, w: &mut Writer) {
        self.state.write(w);
        write_stats(w, &self.stats);
    }

    fn read(r: &mut Reader) -> Result<Self> {
        Ok(EncodedResult {
            state: SparseState::read(r)?,
            stats: read_stats(r)?,
        })
    }
}

/// Error reply; `gate` is set when evaluation failed at a specific gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteError {
    pub gate: Option<u64>,
    pub message: String,
}

impl RemoteError {
    pub fn from_error(e: &Error) -> Self {
        let gate = match e {
            Error::NoRowMatch { gate } | Error::AmbiguousRow { gate } | Error::BackwardMismatch { gate } => {
                Some(*gate as u64)
            }
            _ => None,
        };
        Self {
            gate,
            message: e.to_string(),
        }
    }
}

impl Wire for RemoteError {
    const KIND: Kind = Kind::Error;

    fn write(&self, w: &mut Writer) {
        match self.gate {
            Some(g) => {
                w.u8(1);
                w.u64(g);
            }
            None => w.u8(0),
        }
        w.str(&self.message);
    }

    fn read(r: &mut Reader) -> Result<Self> {
        let gate = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            _ => return Err(Error::Malformed("error gate flag".into())),
        };
        Ok(Self {
            gate,
            message: r.str()?,
        })
    }
}

// ---------------------------------------------------------------------------
// Key-leak scanner

/// Byte range of the encoded-state section inside a `JobBundle` payload.
pub fn encoded_state_range(payload: &[u8]) -> Result<std::ops::Range<usize>> {
    let mut r = Reader::new(payload);
    r.bytes()?;
    let start = r.position();
    SparseState::read(&mut r)?;
    Ok(start..r.position())
}

/// Schedule keys `(wire, bit)` whose bytes occur in a serialized job
/// anywhere outside the encoded-state section.
pub fn find_key_leaks(envelope: &[u8], schedule: &KeySchedule) -> Result<Vec<(usize, bool)>> {
    let (kind, payload) = open(envelope)?;
    if kind != Kind::JobBundle {
        return Err(Error::Malformed("not a job bundle".into()));
    }
    let allowed = encoded_state_range(payload)?;
    let mut leaks = Vec::new();
    for (wire, p) in schedule.pairs.iter().enumerate() {
        for bit in [false, true] {
            let key = p.key(bit).as_bytes();
            let hit = payload.windows(key.len()).enumerate().any(|(i, win)| {
                let inside = i >= allowed.start && i + key.len() <= allowed.end;
                !inside && win == key
            });
            if hit {
                leaks.push((wire, bit));
            }
        }
    }
    Ok(leaks)
}

// ---------------------------------------------------------------------------
// Server logic and transports

/// Evaluate one request envelope and produce the reply envelope.
pub fn handle_request(request: &[u8]) -> Vec<u8> {
    let reply = JobBundle::from_bytes(request).and_then(|job| {
        let oracle = RandomOracle::hash_derived(&job.oracle_seed);
        server_eval(&oracle, &job)
    });
    match reply {
        Ok(res) => res.to_bytes(),
        Err(e) => RemoteError::from_error(&e).to_bytes(),
    }
}

/// Read one envelope from a stream, using its header for the length.
pub fn read_envelope<R: Read>(stream: &mut R) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; HEADER_LEN];
    stream.read_exact(&mut buf).map_err(|_| Error::Truncated)?;
    let len = u64::from_le_bytes(buf[6..14].try_into().expect("8 bytes"));
    if len > MAX_PAYLOAD {
        return Err(Error::Malformed(format!("payload of {len} bytes exceeds limit")));
    }
    let rest = len as usize + 4;
    buf.resize(HEADER_LEN + rest, 0);
    stream.read_exact(&mut buf[HEADER_LEN..]).map_err(|_| Error::Truncated)?;
    Ok(buf)
}

fn serve_connection(mut stream: TcpStream) -> Result<()> {
    let reply = match read_envelope(&mut stream) {
        Ok(req) => handle_request(&req),
        Err(e) => RemoteError::from_error(&e).to_bytes(),
    };
    stream.write_all(&reply)?;
    stream.flush()?;
    Ok(())
}

/// Accept connections and answer one request on each, concurrently. Stops
/// accepting after `max_requests` connections when given and returns once
/// those have been answered.
pub fn serve_tcp(listener: TcpListener, max_requests: Option<u64>) -> Result<u64> {
    let jobs = AtomicU64::new(0);
    std::thread::scope(|scope| {
        for stream in listener.incoming() {
            let stream = stream?;
            let n = jobs.fetch_add(1, Ordering::Relaxed) + 1;
            scope.spawn(move || {
                let _ = serve_connection(stream);
            });
            if max_requests.is_some_and(|m| n >= m) {
                break;
            }
        }
        Ok::<(), Error>(())
    })?;
    Ok(jobs.load(Ordering::Relaxed))
}

/// Send raw request bytes and return the raw reply.
pub fn exchange_tcp<A: ToSocketAddrs>(addr: A, request: &[u8], timeout: Duration) -> Result<Vec<u8>> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    stream.write_all(request)?;
    stream.flush()?;
    read_envelope(&mut stream)
}

pub fn submit_tcp<A: ToSocketAddrs>(addr: A, job: &JobBundle, timeout: Duration) -> Result<EncodedResult> {
    let reply = exchange_tcp(addr, &job.to_bytes(), timeout)?;
    EncodedResult::from_bytes(&reply)
}

pub fn inbox(dir: &Path) -> PathBuf {
    dir.join("inbox")
}

pub fn outbox(dir: &Path) -> PathBuf {
    dir.join("outbox")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Drop a job into `dir/inbox/<id>.job`.
pub fn submit_file(dir: &Path, id: &str, job: &JobBundle) -> Result<PathBuf> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(Error::InvalidParameter(format!("job id {id:?}")));
    }
    fs::create_dir_all(inbox(dir))?;
    fs::create_dir_all(outbox(dir))?;
    let path = inbox(dir).join(format!("{id}.job"));
    write_atomic(&path, &job.to_bytes())?;
    Ok(path)
}

/// Answer every pending job in `dir/inbox`; returns how many were handled.
pub fn serve_dir_once(dir: &Path) -> Result<usize> {
    fs::create_dir_all(inbox(dir))?;
    fs::create_dir_all(outbox(dir))?;
    let mut jobs: Vec<PathBuf> = fs::read_dir(inbox(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "job"))
        .collect();
    jobs.sort();
    for p in &jobs {
        let reply = match fs::read(p) {
            Ok(req) => handle_request(&req),
            Err(e) => RemoteError::from_error(&e.into()).to_bytes(),
        };
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("job");
        write_atomic(&outbox(dir).join(format!("{stem}.result")), &reply)?;
        fs::remove_file(p)?;
    }
    Ok(jobs.len())
}

/// Poll the inbox until `max_jobs` jobs have been answered (or forever).
pub fn serve_dir(dir: &Path, poll: Duration, max_jobs: Option<usize>) -> Result<usize> {
    let mut done = 0;
    loop {
        done += serve_dir_once(dir)?;
        if max_jobs.is_some_and(|m| done >= m) {
            return Ok(done);
        }
        std::thread::sleep(poll);
    }
}

/// Raw reply bytes for job `id`, waiting up to `timeout`.
pub fn fetch_file_reply(dir: &Path, id: &str, timeout: Duration) -> Result<Vec<u8>> {
    let path = outbox(dir).join(format!("{id}.result"));
    let start = Instant::now();
    loop {
        if path.exists() {
            return Ok(fs::read(&path)?);
        }
        if start.elapsed() > timeout {
            return Err(Error::Io(format!("timed out waiting for {}", path.display())));
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

pub fn collect_file(dir: &Path, id: &str, timeout: Duration) -> Result<EncodedResult> {
    EncodedResult::from_bytes(&fetch_file_reply(dir, id, timeout)?)
}

//! Byte protocol for out-of-process denoisers.
//!
//! One request is a single binary message: header `magic "DGEC", u32 version,
//! u32 height, u32 width, u32 depth, u32 bands`, then one little-endian f64
//! noise SD per band in canonical band order, then all coefficients as
//! interleaved little-endian (re, im) f64 pairs in canonical flat order. The
//! response repeats the header and carries only the coefficients.
//!
//! Transports: a spawned subprocess speaking the protocol over its standard
//! input/output, or a single HTTP POST per request with the message as the
//! body. On the stream transport every message is followed by one `\n`
//! terminator byte; messages are self-describing in length, so the terminator
//! is a framing check rather than a delimiter search.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Duration;

use num_complex::Complex64;

use super::{Denoiser, DenoiserRequest};
use crate::wavelet::SubbandLayout;
use crate::{Error, Result};

pub const WIRE_MAGIC: [u8; 4] = *b"DGEC";
pub const WIRE_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 * 4 + 4;

/// Layout descriptor carried by every message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BridgeHeader {
    pub height: u32,
    pub width: u32,
    pub depth: u32,
    pub bands: u32,
}

impl BridgeHeader {
    pub fn from_layout(layout: &SubbandLayout) -> Self {
        Self {
            height: layout.height() as u32,
            width: layout.width() as u32,
            depth: layout.depth() as u32,
            bands: layout.num_bands() as u32,
        }
    }

    pub fn coefficient_count(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn matches(&self, layout: &SubbandLayout) -> bool {
        *self == Self::from_layout(layout)
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&WIRE_MAGIC);
        out.extend_from_slice(&WIRE_VERSION.to_le_bytes());
        for v in [self.height, self.width, self.depth, self.bands] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::BridgeMalformed(format!(
                "message too short for header: {} bytes",
                bytes.len()
            )));
        }
        if bytes[..4] != WIRE_MAGIC {
            return Err(Error::BridgeMalformed("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != WIRE_VERSION {
            return Err(Error::BridgeMalformed(format!(
                "unsupported version {version}"
            )));
        }
        Ok(Self {
            height: word(8),
            width: word(12),
            depth: word(16),
            bands: word(20),
        })
    }
}

fn push_complex(out: &mut Vec<u8>, values: &[Complex64]) {
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

fn read_f64s(bytes: &[u8], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap()))
        .collect()
}

/// Serializes a denoising request.
pub fn encode_request(req: &DenoiserRequest) -> Vec<u8> {
    let header = BridgeHeader::from_layout(req.layout);
    let mut out =
        Vec::with_capacity(HEADER_LEN + 8 * req.band_sds.len() + 16 * req.pyramid.len());
    header.write_to(&mut out);
    for sd in req.band_sds {
        out.extend_from_slice(&sd.to_le_bytes());
    }
    push_complex(&mut out, req.pyramid);
    out
}

/// Serializes a response for the given header.
pub fn encode_response(header: BridgeHeader, coefficients: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * coefficients.len());
    header.write_to(&mut out);
    push_complex(&mut out, coefficients);
    out
}

/// Endpoint side: decodes a request message into its layout, band SDs, and
/// coefficients.
pub fn parse_request(bytes: &[u8]) -> Result<(SubbandLayout, Vec<f64>, Vec<Complex64>)> {
    let header = BridgeHeader::parse(bytes)?;
    let layout = SubbandLayout::new(
        header.height as usize,
        header.width as usize,
        header.depth as usize,
    )
    .map_err(|e| Error::BridgeMalformed(format!("header does not describe a layout: {e}")))?;
    if layout.num_bands() != header.bands as usize {
        return Err(Error::BridgeMalformed(format!(
            "header claims {} bands, layout has {}",
            header.bands,
            layout.num_bands()
        )));
    }
    let n = layout.len();
    let expected = HEADER_LEN + 8 * layout.num_bands() + 16 * n;
    if bytes.len() != expected {
        return Err(Error::BridgeMalformed(format!(
            "request length {} does not match header (expected {expected})",
            bytes.len()
        )));
    }
    let sds = read_f64s(&bytes[HEADER_LEN..], layout.num_bands());
    let body = &bytes[HEADER_LEN + 8 * layout.num_bands()..];
    let coeffs: Vec<Complex64> = (0..n)
        .map(|i| {
            let re = f64::from_le_bytes(body[16 * i..16 * i + 8].try_into().unwrap());
            let im = f64::from_le_bytes(body[16 * i + 8..16 * i + 16].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((layout, sds, coeffs))
}

/// Caller side: decodes and validates a response against the layout the
/// request was built from.
pub fn parse_response(bytes: &[u8], layout: &SubbandLayout) -> Result<Vec<Complex64>> {
    let header = BridgeHeader::parse(bytes)?;
    if !header.matches(layout) {
        return Err(Error::BridgeLayoutMismatch(format!(
            "{}x{} depth {} with {} bands, expected {}x{} depth {}",
            header.height,
            header.width,
            header.depth,
            header.bands,
            layout.height(),
            layout.width(),
            layout.depth(),
        )));
    }
    let n = layout.len();
    if bytes.len() != HEADER_LEN + 16 * n {
        return Err(Error::BridgeMalformed(format!(
            "response length {} does not match header (expected {})",
            bytes.len(),
            HEADER_LEN + 16 * n
        )));
    }
    let body = &bytes[HEADER_LEN..];
    let coeffs: Vec<Complex64> = (0..n)
        .map(|i| {
            let re = f64::from_le_bytes(body[16 * i..16 * i + 8].try_into().unwrap());
            let im = f64::from_le_bytes(body[16 * i + 8..16 * i + 16].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    if !crate::linalg::all_finite(&coeffs) {
        return Err(Error::BridgeNonFinite);
    }
    Ok(coeffs)
}

/// Writes one framed message: payload then the `\n` terminator.
pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    w.write_all(payload)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads exactly `buf.len()` bytes. Returns false on end-of-stream before the
/// first byte; a truncation mid-buffer is an error.
fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut got = 0;
    while got < buf.len() {
        let n = r.read(&mut buf[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(false);
            }
            return Err(Error::BridgeMalformed(format!(
                "stream ended inside a frame ({got} of {} bytes)",
                buf.len()
            )));
        }
        got += n;
    }
    Ok(true)
}

/// Reads one framed message (header-described length plus terminator).
/// `None` on clean end-of-stream. `sds` says whether the payload carries the
/// per-band SD block (request) or not (response).
pub fn read_frame<R: Read>(r: &mut R, sds: bool) -> Result<Option<Vec<u8>>> {
    let mut head = [0u8; HEADER_LEN];
    if !fill(r, &mut head)? {
        return Ok(None);
    }
    let header = BridgeHeader::parse(&head)?;
    let mut body = vec![
        0u8;
        if sds { 8 * header.bands as usize } else { 0 }
            + 16 * header.coefficient_count()
    ];
    if !fill(r, &mut body)? {
        return Err(Error::BridgeMalformed("stream ended before body".into()));
    }
    let mut terminator = [0u8; 1];
    if !fill(r, &mut terminator)? {
        return Err(Error::BridgeMalformed("missing frame terminator".into()));
    }
    if terminator[0] != b'\n' {
        return Err(Error::BridgeMalformed("frame terminator is not \\n".into()));
    }
    let mut payload = head.to_vec();
    payload.append(&mut body);
    Ok(Some(payload))
}

/// Endpoint loop over a byte stream: serve requests until clean end-of-input.
pub fn serve_stream<R: Read, W: Write>(
    mut input: R,
    mut output: W,
    denoiser: &dyn Denoiser,
) -> Result<()> {
    while let Some(frame) = read_frame(&mut input, true)? {
        let (layout, sds, coeffs) = parse_request(&frame)?;
        let cleaned = denoiser.denoise(&DenoiserRequest {
            pyramid: &coeffs,
            band_sds: &sds,
            layout: &layout,
        })?;
        let response = encode_response(BridgeHeader::from_layout(&layout), &cleaned);
        write_frame(&mut output, &response)?;
    }
    Ok(())
}

/// Minimal HTTP endpoint: one POST per request, message bytes as the body.
/// Connections are handled sequentially; the loop runs until the listener
/// fails.
pub fn serve_http(listener: TcpListener, denoiser: &dyn Denoiser) -> Result<()> {
    for stream in listener.incoming() {
        let mut stream = stream?;
        match http_handle(&mut stream, denoiser) {
            Ok(()) => {}
            Err(e) => {
                let text = e.to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 400 Bad Request\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    text.len(),
                    text
                );
            }
        }
    }
    Ok(())
}

fn http_handle(stream: &mut TcpStream, denoiser: &dyn Denoiser) -> Result<()> {
    let body = http_read_message(stream)?;
    let (layout, sds, coeffs) = parse_request(&body)?;
    let cleaned = denoiser.denoise(&DenoiserRequest {
        pyramid: &coeffs,
        band_sds: &sds,
        layout: &layout,
    })?;
    let response = encode_response(BridgeHeader::from_layout(&layout), &cleaned);
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/octet-stream\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        response.len()
    )?;
    stream.write_all(&response)?;
    stream.flush()?;
    Ok(())
}

/// Reads an HTTP/1.1 message (request or response) off a stream and returns
/// its body. Only Content-Length framing is supported, which both ends of
/// this protocol always produce.
fn http_read_message(stream: &mut TcpStream) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    let mut buf = [0u8; 4096];
    let header_end = loop {
        if let Some(pos) = find_double_crlf(&raw) {
            break pos;
        }
        let n = stream.read(&mut buf)?;
        if n == 0 {
            return Err(Error::BridgeMalformed(
                "connection closed before HTTP headers ended".into(),
            ));
        }
        raw.extend_from_slice(&buf[..n]);
    };
    let head = String::from_utf8_lossy(&raw[..header_end]).to_string();
    let mut content_length: Option<usize> = None;
    for line in head.lines().skip(1) {
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().ok();
            }
        }
    }
    let length = content_length
        .ok_or_else(|| Error::BridgeMalformed("HTTP message without Content-Length".into()))?;
    let mut body = raw[header_end + 4..].to_vec();
    while body.len() < length {
        let n = stream.read(&mut buf)?;
        if n == 0 {
            return Err(Error::BridgeMalformed(format!(
                "HTTP body truncated at {} of {length} bytes",
                body.len()
            )));
        }
        body.extend_from_slice(&buf[..n]);
    }
    body.truncate(length);
    Ok(body)
}

fn find_double_crlf(bytes: &[u8]) -> Option<usize> {
    bytes.windows(4).position(|w| w == b"\r\n\r\n")
}

/// How to reach an external denoiser.
#[derive(Clone, Debug)]
pub enum Transport {
    /// Spawn `argv[0]` with the remaining arguments and exchange framed
    /// messages over its standard input/output.
    Subprocess { argv: Vec<String> },
    /// One `POST {url}` per request, `http://host:port/path` only.
    Http { url: String },
}

enum Connection {
    Subprocess {
        child: Child,
        stdin: std::process::ChildStdin,
        responses: mpsc::Receiver<Result<Vec<u8>>>,
    },
    Http {
        url: String,
    },
}

/// Client for an out-of-process denoiser. One request is in flight at a
/// time; create one instance per concurrent run.
pub struct ExternalDenoiser {
    connection: Mutex<Connection>,
    timeout: Duration,
    label: String,
}

impl ExternalDenoiser {
    pub fn connect(transport: &Transport, timeout: Duration) -> Result<Self> {
        match transport {
            Transport::Subprocess { argv } => Self::spawn(argv, timeout),
            Transport::Http { url } => {
                split_url(url)?;
                Ok(Self {
                    connection: Mutex::new(Connection::Http { url: url.clone() }),
                    timeout,
                    label: format!("external:{url}"),
                })
            }
        }
    }

    fn spawn(argv: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = argv.split_first().ok_or_else(|| {
            Error::InvalidParameter("external denoiser command is empty".into())
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Denoiser(format!("failed to spawn {program}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was requested");
        let mut stdout = child.stdout.take().expect("stdout was requested");
        // The reader thread owns the child's stdout and forwards whole
        // frames; recv_timeout on the channel is what enforces the deadline.
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || loop {
            match read_frame(&mut stdout, false) {
                Ok(Some(frame)) => {
                    if tx.send(Ok(frame)).is_err() {
                        return;
                    }
                }
                Ok(None) => return,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            }
        });
        Ok(Self {
            connection: Mutex::new(Connection::Subprocess {
                child,
                stdin,
                responses: rx,
            }),
            timeout,
            label: format!("external:{program}"),
        })
    }

    fn http_round_trip(url: &str, payload: &[u8], timeout: Duration) -> Result<Vec<u8>> {
        let (host, path) = split_url(url)?;
        let addr = host
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::Denoiser(format!("cannot resolve {host}")))?;
        let mut stream = TcpStream::connect_timeout(&addr, timeout)
            .map_err(|e| Error::Denoiser(format!("cannot connect to {host}: {e}")))?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        write!(
            stream,
            "POST {path} HTTP/1.1\r\nHost: {host}\r\nContent-Type: application/octet-stream\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            payload.len()
        )?;
        stream.write_all(payload)?;
        stream.flush()?;
        http_read_message(&mut stream).map_err(|e| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::WouldBlock => {
                Error::BridgeTimeout(timeout)
            }
            Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                Error::BridgeTimeout(timeout)
            }
            other => other,
        })
    }
}

/// `http://host:port/path` -> (`host:port`, `/path`).
fn split_url(url: &str) -> Result<(String, String)> {
    let rest = url.strip_prefix("http://").ok_or_else(|| {
        Error::InvalidParameter(format!("endpoint URL must start with http://, got {url}"))
    })?;
    let (host, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, "/"),
    };
    if host.is_empty() {
        return Err(Error::InvalidParameter(format!("empty host in {url}")));
    }
    Ok((host.to_string(), path.to_string()))
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, req: &DenoiserRequest) -> Result<Vec<Complex64>> {
        req.validate()?;
        let payload = encode_request(req);
        let mut connection = self.connection.lock().expect("bridge lock poisoned");
        let raw = match &mut *connection {
            Connection::Subprocess {
                stdin, responses, ..
            } => {
                write_frame(stdin, &payload)
                    .map_err(|e| Error::Denoiser(format!("endpoint rejected request: {e}")))?;
                match responses.recv_timeout(self.timeout) {
                    Ok(frame) => frame?,
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        return Err(Error::BridgeTimeout(self.timeout))
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => {
                        return Err(Error::BridgeMalformed(
                            "endpoint closed its output stream".into(),
                        ))
                    }
                }
            }
            Connection::Http { url } => Self::http_round_trip(url, &payload, self.timeout)?,
        };
        parse_response(&raw, req.layout)
    }

    fn name(&self) -> &str {
        &self.label
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.connection.lock() {
            if let Connection::Subprocess { child, .. } = &mut *guard {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{EchoDenoiser, ShrinkPhase, SubbandSoftThreshold, ThresholdMode};
    use num_complex::Complex64;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn demo_request() -> (SubbandLayout, Vec<f64>, Vec<Complex64>) {
        let layout = SubbandLayout::new(8, 8, 1).unwrap();
        let sds = vec![0.5, 1.0, 1.5, 2.0];
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let coeffs = (0..64)
            .map(|_| crate::linop::standard_complex_normal(&mut rng))
            .collect();
        (layout, sds, coeffs)
    }

    #[test]
    fn request_round_trip_is_bit_exact() {
        let (layout, sds, coeffs) = demo_request();
        let bytes = encode_request(&DenoiserRequest {
            pyramid: &coeffs,
            band_sds: &sds,
            layout: &layout,
        });
        let (layout2, sds2, coeffs2) = parse_request(&bytes).unwrap();
        assert!(layout2.same_geometry(&layout));
        assert_eq!(sds2, sds);
        assert_eq!(coeffs2, coeffs);
    }

    #[test]
    fn response_round_trip_is_bit_exact() {
        let (layout, _, coeffs) = demo_request();
        let bytes = encode_response(BridgeHeader::from_layout(&layout), &coeffs);
        let parsed = parse_response(&bytes, &layout).unwrap();
        assert_eq!(parsed, coeffs);
    }

    #[test]
    fn response_rejects_bad_magic_truncation_and_mismatch() {
        let (layout, _, coeffs) = demo_request();
        let good = encode_response(BridgeHeader::from_layout(&layout), &coeffs);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            parse_response(&bad_magic, &layout),
            Err(Error::BridgeMalformed(_))
        ));

        let truncated = &good[..good.len() - 8];
        assert!(matches!(
            parse_response(truncated, &layout),
            Err(Error::BridgeMalformed(_))
        ));

        let other = SubbandLayout::new(8, 8, 2).unwrap();
        assert!(matches!(
            parse_response(&good, &other),
            Err(Error::BridgeLayoutMismatch(_))
        ));
    }

    #[test]
    fn response_rejects_non_finite_values() {
        let (layout, _, mut coeffs) = demo_request();
        coeffs[5] = Complex64::new(f64::NAN, 0.0);
        let bytes = encode_response(BridgeHeader::from_layout(&layout), &coeffs);
        assert!(matches!(
            parse_response(&bytes, &layout),
            Err(Error::BridgeNonFinite)
        ));
    }

    #[test]
    fn stream_endpoint_echoes_bit_exactly() {
        let (layout, sds, coeffs) = demo_request();
        let request = encode_request(&DenoiserRequest {
            pyramid: &coeffs,
            band_sds: &sds,
            layout: &layout,
        });
        let mut input = Vec::new();
        input.extend_from_slice(&request);
        input.push(b'\n');
        // Two back-to-back requests on one stream.
        input.extend_from_slice(&request);
        input.push(b'\n');

        let mut output = Vec::new();
        serve_stream(&input[..], &mut output, &EchoDenoiser).unwrap();

        let mut cursor = &output[..];
        for _ in 0..2 {
            let frame = read_frame(&mut cursor, false).unwrap().unwrap();
            let parsed = parse_response(&frame, &layout).unwrap();
            assert_eq!(parsed, coeffs);
        }
        assert!(read_frame(&mut cursor, false).unwrap().is_none());
    }

    #[test]
    fn stream_endpoint_applies_the_denoiser() {
        let (layout, sds, coeffs) = demo_request();
        let den =
            SubbandSoftThreshold::new(1.0, ThresholdMode::SdScaled, ShrinkPhase::Complex).unwrap();
        let request = encode_request(&DenoiserRequest {
            pyramid: &coeffs,
            band_sds: &sds,
            layout: &layout,
        });
        let mut input = Vec::new();
        input.extend_from_slice(&request);
        input.push(b'\n');
        let mut output = Vec::new();
        serve_stream(&input[..], &mut output, &den).unwrap();

        let frame = read_frame(&mut &output[..], false).unwrap().unwrap();
        let via_stream = parse_response(&frame, &layout).unwrap();
        let direct = den
            .denoise(&DenoiserRequest {
                pyramid: &coeffs,
                band_sds: &sds,
                layout: &layout,
            })
            .unwrap();
        assert_eq!(via_stream, direct);
    }

    #[test]
    fn http_round_trip_against_in_process_endpoint() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        std::thread::spawn(move || {
            let _ = serve_http(listener, &EchoDenoiser);
        });

        let (layout, sds, coeffs) = demo_request();
        let client = ExternalDenoiser::connect(
            &Transport::Http {
                url: format!("http://127.0.0.1:{port}/denoise"),
            },
            Duration::from_secs(5),
        )
        .unwrap();
        let out = client
            .denoise(&DenoiserRequest {
                pyramid: &coeffs,
                band_sds: &sds,
                layout: &layout,
            })
            .unwrap();
        assert_eq!(out, coeffs);
        // Second request opens a fresh connection.
        let out2 = client
            .denoise(&DenoiserRequest {
                pyramid: &coeffs,
                band_sds: &sds,
                layout: &layout,
            })
            .unwrap();
        assert_eq!(out2, coeffs);
    }

    #[test]
    fn subprocess_timeout_is_reported() {
        let (layout, sds, coeffs) = demo_request();
        let client = ExternalDenoiser::connect(
            &Transport::Subprocess {
                argv: vec!["sleep".into(), "30".into()],
            },
            Duration::from_millis(200),
        )
        .unwrap();
        let started = std::time::Instant::now();
        let err = client
            .denoise(&DenoiserRequest {
                pyramid: &coeffs,
                band_sds: &sds,
                layout: &layout,
            })
            .unwrap_err();
        assert!(matches!(err, Error::BridgeTimeout(_)), "got {err}");
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn url_splitting() {
        assert_eq!(
            split_url("http://127.0.0.1:8080/denoise").unwrap(),
            ("127.0.0.1:8080".to_string(), "/denoise".to_string())
        );
        assert_eq!(
            split_url("http://localhost:9000").unwrap(),
            ("localhost:9000".to_string(), "/".to_string())
        );
        assert!(split_url("https://x/y").is_err());
        assert!(split_url("ftp://x").is_err());
    }
}

//! Text embeddings and the cosine kernel used to rank chunks.

use std::io::Read;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh64::xxh64;

use crate::text::canonical_tokens;

pub const DEFAULT_DIM: usize = 256;
const FEATURE_SEED: u64 = 0x6272_6964_6765_0003;
/// Largest response body accepted from an embedding service.
const MAX_RESPONSE_BYTES: u64 = 64 << 20;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite component")]
    NonFinite,
    #[error("embedding service failed: {message}")]
    Service { message: String, retryable: bool },
    #[error("bad embedding response: {0}")]
    Decode(String),
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Service { retryable: true, .. })
    }
}

/// Unit-norm vector. The all-zero direction is represented by `e0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `raw`; a zero vector becomes the first basis vector.
    pub fn normalized(raw: &[f64]) -> Result<Self, EmbedError> {
        if raw.is_empty() {
            return Err(EmbedError::DimensionMismatch { expected: 1, found: 0 });
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Ok(Self::basis(raw.len()));
        }
        Ok(EmbeddingVector(raw.iter().map(|x| (x / norm) as f32).collect()))
    }

    pub fn basis(dim: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[0] = 1.0;
        EmbeddingVector(v)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Signed feature hashing of canonical tokens.
#[derive(Clone, Debug)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut acc = vec![0.0f64; self.dim];
        for tok in canonical_tokens(text) {
            let h = xxh64(tok.as_bytes(), FEATURE_SEED);
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[(h % self.dim as u64) as usize] += sign;
        }
        EmbeddingVector::normalized(&acc)
    }
}

/// Dot product accumulated in f64.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for i in 0..4 {
            acc[i] += f64::from(x[i]) * f64::from(y[i]);
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine with both norms supplied; 0 when either norm is 0.
#[inline]
pub fn cosine_with_norms(a: &[f32], a_norm: f64, b: &[f32], b_norm: f64) -> f64 {
    if a_norm == 0.0 || b_norm == 0.0 {
        return 0.0;
    }
    dot(a, b) / (a_norm * b_norm)
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(cosine_with_norms(a, norm(a), b, norm(b)))
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Parses `{"vectors": [[f32]]}` and normalizes every vector.
pub fn decode_embed_response(
    body: &[u8],
    expected_count: usize,
    dim: usize,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let resp: EmbedResponse =
        serde_json::from_slice(body).map_err(|e| EmbedError::Decode(e.to_string()))?;
    if resp.vectors.len() != expected_count {
        return Err(EmbedError::Decode(format!(
            "expected {expected_count} vectors, got {}",
            resp.vectors.len()
        )));
    }
    resp.vectors
        .iter()
        .map(|v| {
            if v.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let raw: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            EmbeddingVector::normalized(&raw)
        })
        .collect()
}

/// Counting semaphore bounding in-flight requests.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Client for an HTTP service answering `POST {texts}` with `{vectors}`.
pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
    permits: Permits,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize, max_in_flight: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        HttpEmbedder {
            endpoint: endpoint.into(),
            dim,
            agent,
            permits: Permits {
                free: Mutex::new(max_in_flight.max(1)),
                cv: Condvar::new(),
            },
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_batch(&[text])?;
        Ok(v.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = serde_json::to_vec(&EmbedRequest { texts })
            .map_err(|e| EmbedError::Decode(e.to_string()))?;
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| EmbedError::Service {
                message: e.to_string(),
                retryable: true,
            })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(EmbedError::Service {
                message: format!("HTTP status {status}"),
                retryable: status == 429 || status >= 500,
            });
        }
        let mut bytes = Vec::new();
        resp.body_mut()
            .as_reader()
            .take(MAX_RESPONSE_BYTES)
            .read_to_end(&mut bytes)
            .map_err(|e| EmbedError::Service {
                message: e.to_string(),
                retryable: true,
            })?;
        decode_embed_response(&bytes, texts.len(), self.dim)
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;

    use proptest::prelude::*;

    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashingEmbedder::default();
        let a = e.embed("Horner's syndrome affects the eye").unwrap();
        assert_eq!(a, e.embed("Horner's syndrome affects the eye").unwrap());
        assert!((a.norm() - 1.0).abs() <= 1e-6);
        assert_eq!(a.dim(), 256);
    }

    #[test]
    fn empty_text_is_e0() {
        let e = HashingEmbedder::new(8);
        assert_eq!(e.embed("").unwrap(), EmbeddingVector::basis(8));
        assert_eq!(e.embed("  ... ").unwrap(), EmbeddingVector::basis(8));
    }

    #[test]
    fn cosine_identity_and_orthogonal() {
        let v = HashingEmbedder::default().embed("cell membrane").unwrap();
        assert!((cosine_similarity(v.as_slice(), v.as_slice()).unwrap() - 1.0).abs() < 1e-12);
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0];
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&a, &[0.0; 3]).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&a, &[1.0]),
            Err(EmbedError::DimensionMismatch { .. })
        ));
        assert!(matches!(cosine_similarity(&a, &[f32::NAN, 0.0, 0.0]), Err(EmbedError::NonFinite)));
    }

    /// Error-free product sum: each f32 product is exact in f64, and the
    /// running sum is kept as an unevaluated pair (two-sum).
    fn compensated_dot(a: &[f32], b: &[f32]) -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for (x, y) in a.iter().zip(b) {
            let p = f64::from(*x) * f64::from(*y);
            let t = s + p;
            let bp = t - s;
            c += (s - (t - bp)) + (p - bp);
            s = t;
        }
        s + c
    }

    proptest! {
        #[test]
        fn random_strings_are_unit_norm(s in ".{0,80}") {
            let v = HashingEmbedder::default().embed(&s).unwrap();
            prop_assert!((v.norm() - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn cosine_matches_compensated_oracle(
            a in proptest::collection::vec(-10.0f32..10.0, 16),
            b in proptest::collection::vec(-10.0f32..10.0, 16),
        ) {
            let na = compensated_dot(&a, &a).sqrt();
            let nb = compensated_dot(&b, &b).sqrt();
            prop_assume!(na > 1e-3 && nb > 1e-3);
            let want = compensated_dot(&a, &b) / (na * nb);
            let got = cosine_similarity(&a, &b).unwrap();
            prop_assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
            prop_assert!(got.abs() <= 1.0 + 1e-9);
            prop_assert_eq!(got, cosine_similarity(&b, &a).unwrap());
            let scaled: Vec<f32> = a.iter().map(|x| x * 4.0).collect();
            prop_assert!((cosine_similarity(&scaled, &b).unwrap() - got).abs() <= 1e-9);
        }
    }

    #[test]
    fn decode_response_validates_shape() {
        let ok = decode_embed_response(br#"{"vectors": [[3.0, 4.0], [0.0, 0.0]]}"#, 2, 2).unwrap();
        assert_eq!(ok[0].as_slice(), &[0.6, 0.8]);
        assert_eq!(ok[1], EmbeddingVector::basis(2));
        assert!(decode_embed_response(br#"{"vectors": [[1.0]]}"#, 1, 2).is_err());
        assert!(decode_embed_response(br#"{"vectors": []}"#, 1, 2).is_err());
        assert!(decode_embed_response(b"not json", 1, 2).is_err());
    }

    /// Serves `responses` in order, one HTTP/1.1 exchange per connection.
    fn serve(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut req = vec![0; len];
                reader.read_exact(&mut req).unwrap();
                let req: serde_json::Value = serde_json::from_slice(&req).unwrap();
                assert!(req["texts"].is_array());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        format!("http://{addr}/embed")
    }

    #[test]
    fn http_embedder_roundtrip_and_errors() {
        let url = serve(vec![
            (200, r#"{"vectors": [[0.0, 2.0]]}"#.to_string()),
            (503, "{}".to_string()),
            (400, "{}".to_string()),
        ]);
        let e = HttpEmbedder::new(url, 2, 2, Duration::from_secs(5));
        assert_eq!(e.embed("x").unwrap().as_slice(), &[0.0, 1.0]);
        let err = e.embed("x").unwrap_err();
        assert!(err.is_retryable(), "{err}");
        let err = e.embed("x").unwrap_err();
        assert!(!err.is_retryable(), "{err}");
    }
}

//! Generic JSON-over-HTTP provider adapters. Endpoint URLs, model names, and
//! auth header names are configured per provider; credentials come from
//! environment variables (`PARADOX_<PROVIDER>_API_KEY`), never from files.
//!
//! All adapters share one retry policy: up to `attempts` tries with
//! exponential backoff, honoring `Retry-After` on 429/503. Adapters return
//! canonical-format audio; provider WAV output is resampled to 16 kHz mono on
//! ingestion.

use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

use crate::audio::{wav, Waveform, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::providers::{AsrClient, AsrResult, EmotionClient, EmotionResult, LlmClient, RateLimiter, TtsClient, TtsJob};

/// Retry schedule: `attempts` total tries, delays base, 2*base, 4*base, ...
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_secs(1) }
    }
}

/// Where and how to reach one provider.
#[derive(Debug, Clone)]
pub struct ProviderEndpoint {
    pub provider_id: String,
    pub url: String,
    pub model: String,
    /// Header carrying the credential, e.g. "Authorization".
    pub auth_header: String,
    /// Prefix inside the header value, e.g. "Bearer" (empty for a raw key).
    pub auth_scheme: String,
}

impl ProviderEndpoint {
    pub fn new(provider_id: impl Into<String>, url: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderEndpoint {
            provider_id: provider_id.into(),
            url: url.into(),
            model: model.into(),
            auth_header: "Authorization".into(),
            auth_scheme: "Bearer".into(),
        }
    }

    /// Environment variable holding this provider's API key.
    pub fn api_key_env(&self) -> String {
        format!(
            "PARADOX_{}_API_KEY",
            self.provider_id.to_uppercase().replace(['-', '.'], "_")
        )
    }

    fn auth_value(&self) -> Option<String> {
        let key = std::env::var(self.api_key_env()).ok()?;
        Some(if self.auth_scheme.is_empty() {
            key
        } else {
            format!("{} {}", self.auth_scheme, key)
        })
    }
}

struct HttpResponse {
    status: u16,
    body: Vec<u8>,
    retry_after: Option<u64>,
}

/// Shared transport: one agent, one retry policy, one rate limiter.
pub struct HttpTransport {
    agent: ureq::Agent,
    retry: RetryPolicy,
    limiter: Arc<RateLimiter>,
}

impl HttpTransport {
    pub fn new(retry: RetryPolicy, max_concurrent: usize) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpTransport {
            agent: config.new_agent(),
            retry,
            limiter: Arc::new(RateLimiter::new(max_concurrent)),
        }
    }

    fn post_once(
        &self,
        endpoint: &ProviderEndpoint,
        content_type: &str,
        body: &[u8],
    ) -> std::result::Result<HttpResponse, String> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(&endpoint.url).header("Content-Type", content_type);
        if let Some(auth) = endpoint.auth_value() {
            req = req.header(&endpoint.auth_header, &auth);
        }
        let mut response = req.send(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok());
        let body = response
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body, retry_after })
    }

    /// POST with the retry schedule. Retries transport failures, 429, and
    /// 5xx; other statuses return immediately.
    pub fn post_with_retry(
        &self,
        endpoint: &ProviderEndpoint,
        content_type: &str,
        body: &[u8],
    ) -> Result<Vec<u8>> {
        let mut last_failure = String::new();
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                let backoff = self.retry.base_delay * 2u32.pow(attempt - 1);
                std::thread::sleep(backoff);
            }
            match self.post_once(endpoint, content_type, body) {
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    if let Some(secs) = resp.retry_after {
                        std::thread::sleep(Duration::from_secs(secs));
                    }
                    last_failure = format!("http status {}", resp.status);
                }
                Ok(resp) if !(200..300).contains(&resp.status) => {
                    return Err(Error::provider_with_payload(
                        &endpoint.provider_id,
                        format!("http status {}", resp.status),
                        String::from_utf8_lossy(&resp.body),
                    ));
                }
                Ok(resp) => return Ok(resp.body),
                Err(e) => last_failure = e,
            }
        }
        Err(Error::provider(
            &endpoint.provider_id,
            format!("{} attempts exhausted: {last_failure}", self.retry.attempts),
        ))
    }
}

fn parse_json(provider: &str, body: &[u8]) -> Result<serde_json::Value> {
    serde_json::from_slice(body).map_err(|e| {
        Error::provider_with_payload(
            provider,
            format!("non-JSON response: {e}"),
            String::from_utf8_lossy(body),
        )
    })
}

/// Chat-style completion endpoint (`choices[0].message.content`, with
/// `content` / `text` fallbacks for simpler providers).
pub struct HttpLlmClient {
    pub endpoint: ProviderEndpoint,
    pub transport: Arc<HttpTransport>,
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let raw = self.transport.post_with_retry(
            &self.endpoint,
            "application/json",
            body.to_string().as_bytes(),
        )?;
        let v = parse_json(&self.endpoint.provider_id, &raw)?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .or_else(|| v["content"].as_str())
            .or_else(|| v["text"].as_str())
            .ok_or_else(|| {
                Error::provider_with_payload(
                    &self.endpoint.provider_id,
                    "completion response missing content",
                    v.to_string(),
                )
            })?;
        Ok(content.to_string())
    }
}

/// Synthesis endpoint returning WAV bytes.
pub struct HttpTtsClient {
    pub endpoint: ProviderEndpoint,
    pub transport: Arc<HttpTransport>,
}

impl TtsClient for HttpTtsClient {
    fn synthesize(&self, job: &TtsJob) -> Result<Waveform> {
        let body = json!({
            "model": self.endpoint.model,
            "voice": job.voice.voice_id,
            "input": job.text,
            "ssml": job.is_ssml,
            "style": job.style,
        });
        let raw = self.transport.post_with_retry(
            &self.endpoint,
            "application/json",
            body.to_string().as_bytes(),
        )?;
        if raw.is_empty() {
            return Err(Error::provider(&self.endpoint.provider_id, "empty audio response"));
        }
        if !raw.starts_with(b"RIFF") {
            return Err(Error::provider_with_payload(
                &self.endpoint.provider_id,
                "expected WAV (RIFF) audio in response",
                String::from_utf8_lossy(&raw[..raw.len().min(256)]),
            ));
        }
        let decoded = wav::decode(&raw)?;
        decoded.resampled(CANONICAL_SAMPLE_RATE)
    }

    fn provider_id(&self) -> &str {
        &self.endpoint.provider_id
    }
}

/// Transcription endpoint: raw WAV in, `{"text": ...}` out.
pub struct HttpAsrClient {
    pub endpoint: ProviderEndpoint,
    pub transport: Arc<HttpTransport>,
}

impl AsrClient for HttpAsrClient {
    fn transcribe(&self, audio: &Waveform) -> Result<AsrResult> {
        let raw =
            self.transport.post_with_retry(&self.endpoint, "audio/wav", &wav::encode(audio))?;
        let v = parse_json(&self.endpoint.provider_id, &raw)?;
        let text = v["text"].as_str().or_else(|| v["transcript"].as_str()).ok_or_else(|| {
            Error::provider_with_payload(
                &self.endpoint.provider_id,
                "transcription response missing text",
                v.to_string(),
            )
        })?;
        Ok(AsrResult { hypothesis: text.to_string() })
    }
}

/// Emotion classification endpoint: raw WAV in, `{"label", "confidence"}` out.
pub struct HttpEmotionClient {
    pub endpoint: ProviderEndpoint,
    pub transport: Arc<HttpTransport>,
}

impl EmotionClient for HttpEmotionClient {
    fn classify(&self, audio: &Waveform) -> Result<EmotionResult> {
        let raw =
            self.transport.post_with_retry(&self.endpoint, "audio/wav", &wav::encode(audio))?;
        let v = parse_json(&self.endpoint.provider_id, &raw)?;
        let label = v["label"].as_str().or_else(|| v["top1"].as_str()).ok_or_else(|| {
            Error::provider_with_payload(
                &self.endpoint.provider_id,
                "emotion response missing label",
                v.to_string(),
            )
        })?;
        let confidence = v["confidence"].as_f64().unwrap_or(0.0).clamp(0.0, 1.0);
        Ok(EmotionResult { top1_label: label.to_string(), confidence })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// One-shot HTTP server: for each scripted (status, body) it accepts a
    /// connection, consumes the request, and replies. Returns the bound URL
    /// and a hit counter.
    fn scripted_server(responses: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let hits_inner = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                hits_inner.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream);
                let mut content_len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_len = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut body_buf = vec![0u8; content_len];
                reader.read_exact(&mut body_buf).unwrap();
                let mut stream = reader.into_inner();
                let reason = if status == 200 { "OK" } else { "ERR" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Length: {}\r\nContent-Type: application/json\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        (url, hits)
    }

    fn fast_transport() -> Arc<HttpTransport> {
        Arc::new(HttpTransport::new(
            RetryPolicy { attempts: 3, base_delay: Duration::from_millis(5) },
            4,
        ))
    }

    #[test]
    fn llm_client_reads_chat_content() {
        let (url, _) = scripted_server(vec![(
            200,
            r#"{"choices":[{"message":{"content":"[\"a script\"]"}}]}"#,
        )]);
        let client = HttpLlmClient {
            endpoint: ProviderEndpoint::new("testllm", url, "test-model"),
            transport: fast_transport(),
        };
        assert_eq!(client.complete("prompt").unwrap(), "[\"a script\"]");
    }

    #[test]
    fn rate_limited_then_ok_succeeds_after_backoff() {
        let (url, hits) = scripted_server(vec![
            (429, "slow down"),
            (429, "slow down"),
            (200, r#"{"text":"hello world"}"#),
        ]);
        let client = HttpAsrClient {
            endpoint: ProviderEndpoint::new("testasr", url, "m"),
            transport: fast_transport(),
        };
        let audio = crate::audio::tone::sine(220.0, 0.05, CANONICAL_SAMPLE_RATE, 0.2);
        let out = client.transcribe(&audio).unwrap();
        assert_eq!(out.hypothesis, "hello world");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_budget_exhaustion_is_a_provider_error() {
        let (url, hits) =
            scripted_server(vec![(500, "boom"), (500, "boom"), (500, "boom")]);
        let client = HttpAsrClient {
            endpoint: ProviderEndpoint::new("testasr", url, "m"),
            transport: fast_transport(),
        };
        let audio = crate::audio::tone::sine(220.0, 0.05, CANONICAL_SAMPLE_RATE, 0.2);
        assert!(matches!(client.transcribe(&audio), Err(Error::Provider { .. })));
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn zero_length_audio_body_is_a_provider_error() {
        let (url, _) = scripted_server(vec![(200, "")]);
        let client = HttpTtsClient {
            endpoint: ProviderEndpoint::new("testtts", url, "m"),
            transport: fast_transport(),
        };
        let job = TtsJob::plain("hi", crate::providers::VoiceSpec::new("testtts", "v"));
        match client.synthesize(&job) {
            Err(Error::Provider { message, .. }) => assert!(message.contains("empty")),
            other => panic!("expected empty-audio error, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_host_errors_after_retries() {
        // RFC 5737 TEST-NET address; connection fails fast.
        let client = HttpLlmClient {
            endpoint: ProviderEndpoint::new("testllm", "http://127.0.0.1:9/", "m"),
            transport: fast_transport(),
        };
        assert!(matches!(client.complete("x"), Err(Error::Provider { .. })));
    }

    #[test]
    fn api_key_env_name_follows_the_convention() {
        let ep = ProviderEndpoint::new("eleven-labs", "http://x/", "m");
        assert_eq!(ep.api_key_env(), "PARADOX_ELEVEN_LABS_API_KEY");
    }
}

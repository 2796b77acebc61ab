//! Language model backends: a chat-completion HTTP client and deterministic
//! mocks for tests and offline runs.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::persona::SeverityPrior;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// One completion request. The position fields are local bookkeeping and
/// are not sent over the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    pub patient_index: usize,
    pub item_index: usize,
    pub attempt: usize,
}

impl ChatRequest {
    /// Content of the last user message.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Connection settings for an OpenAI-style chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    /// Environment variable holding the API key; the key itself never
    /// appears in configuration.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    256
}

fn default_timeout() -> u64 {
    60
}

fn default_api_key_env() -> String {
    "KGSYNTH_API_KEY".into()
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            timeout_seconds: default_timeout(),
            api_key_env: default_api_key_env(),
        }
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

/// Blocking HTTP client for a chat-completions endpoint.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let body = CompletionBody {
            model: &self.config.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            seed: request.seed,
        };
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Http { status, body });
        }
        let parsed: CompletionResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices".into()))
    }
}

/// Scripted deterministic backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockBackend {
    /// Always answers the given score.
    Constant(i64),
    /// Answers `item_index mod modulus`.
    ItemCycle(i64),
    /// Reads the severity prior from the prompt's characteristics block and
    /// answers a fixed score per level (minimal 0 .. severe 3).
    Severity,
}

impl MockBackend {
    fn severity_from_prompt(prompt: &str) -> Option<SeverityPrior> {
        prompt
            .lines()
            .find_map(|l| l.strip_prefix("- Severity prior: "))
            .and_then(|label| SeverityPrior::from_label(label.trim()))
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let score = match *self {
            Self::Constant(s) => s,
            Self::ItemCycle(m) => request.item_index as i64 % m.max(1),
            Self::Severity => {
                let level = Self::severity_from_prompt(request.prompt())
                    .ok_or_else(|| BackendError::Malformed("prompt has no severity prior".into()))?;
                match level {
                    SeverityPrior::Minimal => 0,
                    SeverityPrior::Mild => 1,
                    SeverityPrior::Moderate => 2,
                    SeverityPrior::Severe => 3,
                }
            }
        };
        Ok(format!("That matches how things have been for me lately.\nSCORE: {score}"))
    }
}

/// Backend defined by a closure; handy for fault-injection tests.
pub struct FnBackend<F>(pub F);

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(prompt: &str, item_index: usize) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::system("sys"), ChatMessage::user(prompt)],
            temperature: 0.0,
            max_tokens: 16,
            seed: None,
            patient_index: 0,
            item_index,
            attempt: 0,
        }
    }

    #[test]
    fn mocks_answer_with_score_lines() {
        assert!(MockBackend::Constant(0).complete(&request("", 0)).unwrap().ends_with("SCORE: 0"));
        assert!(MockBackend::ItemCycle(5).complete(&request("", 7)).unwrap().ends_with("SCORE: 2"));
        let p = "## Patient characteristics\n- Severity prior: severe\n";
        assert!(MockBackend::Severity.complete(&request(p, 0)).unwrap().ends_with("SCORE: 3"));
        assert!(MockBackend::Severity.complete(&request("nothing", 0)).is_err());
    }

    #[test]
    fn config_defaults() {
        let c: BackendConfig =
            serde_json::from_str(r#"{"endpoint":"http://localhost:1/v1/chat/completions","model":"m"}"#).unwrap();
        assert_eq!(c, BackendConfig::new("http://localhost:1/v1/chat/completions", "m"));
        assert!(serde_json::from_str::<BackendConfig>(r#"{"endpoint":"e","model":"m","api_key":"x"}"#).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let mut c = BackendConfig::new("http://127.0.0.1:9/v1/chat/completions", "m");
        c.timeout_seconds = 2;
        let err = HttpBackend::new(c).complete(&request("hi", 0)).unwrap_err();
        assert!(matches!(err, BackendError::Unavailable(_)), "{err:?}");
    }

    /// Serves one canned HTTP response and returns the raw request it saw.
    fn one_shot_server(status: &str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        use std::io::{BufRead, BufReader, Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let status = status.to_string();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut content_length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut payload = vec![0; content_length];
            reader.read_exact(&mut payload).unwrap();
            let reply = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
            head + &String::from_utf8(payload).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn http_round_trip() {
        let (url, server) =
            one_shot_server("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"Often.\nSCORE: 3"}}]}"#);
        let mut c = BackendConfig::new(url, "test-model");
        c.api_key_env = "KGSYNTH_TEST_UNSET_KEY_VAR".into();
        let mut req = request("how often?", 0);
        req.seed = Some(11);
        assert_eq!(HttpBackend::new(c).complete(&req).unwrap(), "Often.\nSCORE: 3");
        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /v1/chat/completions"));
        assert!(!seen.to_ascii_lowercase().contains("authorization"));
        let body: serde_json::Value = serde_json::from_str(&seen[seen.find('{').unwrap()..]).unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["seed"], 11);
        assert_eq!(body["messages"][1]["content"], "how often?");
    }

    #[test]
    fn http_error_status() {
        let (url, server) = one_shot_server("503 Service Unavailable", r#"{"error":"busy"}"#);
        let err = HttpBackend::new(BackendConfig::new(url, "m")).complete(&request("x", 0)).unwrap_err();
        server.join().unwrap();
        assert_eq!(err, BackendError::Http { status: 503, body: r#"{"error":"busy"}"#.into() });
    }

    #[test]
    fn http_malformed_body() {
        let (url, server) = one_shot_server("200 OK", r#"{"choices":[]}"#);
        let err = HttpBackend::new(BackendConfig::new(url, "m")).complete(&request("x", 0)).unwrap_err();
        server.join().unwrap();
        assert!(matches!(err, BackendError::Malformed(_)));
    }

    #[test]
    fn debug_output_redacts_the_key() {
        let backend = HttpBackend {
            config: BackendConfig::new("http://x", "m"),
            api_key: Some("sk-secret".into()),
            agent: ureq::Agent::new_with_defaults(),
        };
        let shown = format!("{backend:?}");
        assert!(!shown.contains("sk-secret") && shown.contains("<redacted>"));
    }
}

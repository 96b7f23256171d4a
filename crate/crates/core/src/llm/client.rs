use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{LlmError, PromptBundle};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionMode {
    /// Always call the endpoint.
    #[default]
    Live,
    /// Call the endpoint and store every response as a fixture.
    Record,
    /// Serve fixtures only; a missing fixture is an error.
    Replay,
    /// Serve a fixture when present, otherwise call and record.
    ReplayOrRecord,
}

/// The `[llm]` table of the run configuration. Only the *name* of the
/// environment variable holding the key is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
    pub retry_count: u32,
    pub retry_base_delay_ms: u64,
    pub mode: CompletionMode,
    pub fixtures_dir: Option<PathBuf>,
    pub max_concurrent: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            temperature: 0.0,
            max_output_tokens: 1024,
            timeout_secs: 60,
            retry_count: 3,
            retry_base_delay_ms: 500,
            mode: CompletionMode::Live,
            fixtures_dir: None,
            max_concurrent: 4,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: &str| Err(LlmError::Config(m.to_string()));
        if self.model_name.trim().is_empty() {
            return bad("model_name is empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive");
        }
        if self.timeout_secs == 0 {
            return bad("timeout_secs must be positive");
        }
        if self.max_concurrent == 0 {
            return bad("max_concurrent must be positive");
        }
        if self.mode != CompletionMode::Live && self.fixtures_dir.is_none() {
            return bad("fixtures_dir is required unless mode is live");
        }
        if self.mode != CompletionMode::Replay && self.endpoint_url.trim().is_empty() {
            return bad("endpoint_url is empty");
        }
        Ok(())
    }

    fn fixture_path(&self, key: &str) -> Option<PathBuf> {
        self.fixtures_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }
}

/// Content hash of everything that determines a response: model, sampling
/// settings and the full prompt. The endpoint and credentials do not count.
pub fn replay_key(cfg: &CompletionConfig, bundle: &PromptBundle) -> String {
    let canonical = json!({
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "max_output_tokens": cfg.max_output_tokens,
        "system": bundle.system_instructions,
        "user": bundle.user_content,
        "attachments": bundle.attachments,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(digest)
}

#[derive(Debug, Serialize, Deserialize)]
struct Fixture {
    key: String,
    model: String,
    response: String,
}

fn read_fixture(path: &Path, key: &str) -> Result<Option<String>, LlmError> {
    let raw = match std::fs::read_to_string(path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(LlmError::Fixture(format!("{}: {e}", path.display()))),
    };
    let fx: Fixture =
        serde_json::from_str(&raw).map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))?;
    if fx.key != key {
        return Err(LlmError::Fixture(format!("{}: stored key {} does not match", path.display(), fx.key)));
    }
    Ok(Some(fx.response))
}

fn write_fixture(path: &Path, key: &str, model: &str, response: &str) -> Result<(), LlmError> {
    let err = |e: std::io::Error| LlmError::Fixture(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let fx = Fixture {
        key: key.to_string(),
        model: model.to_string(),
        response: response.to_string(),
    };
    let mut text = serde_json::to_string_pretty(&fx).expect("fixture serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(err)
}

/// Returns the completion text for one prompt according to `cfg.mode`.
pub fn complete(cfg: &CompletionConfig, bundle: &PromptBundle) -> Result<String, LlmError> {
    cfg.validate()?;
    let key = replay_key(cfg, bundle);
    let path = cfg.fixture_path(&key);
    match cfg.mode {
        CompletionMode::Live => call_endpoint(cfg, bundle),
        CompletionMode::Replay => {
            let path = path.expect("validated");
            read_fixture(&path, &key)?.ok_or(LlmError::ReplayMiss { key })
        }
        CompletionMode::ReplayOrRecord | CompletionMode::Record => {
            let path = path.expect("validated");
            if cfg.mode == CompletionMode::ReplayOrRecord {
                if let Some(hit) = read_fixture(&path, &key)? {
                    return Ok(hit);
                }
            }
            let text = call_endpoint(cfg, bundle)?;
            write_fixture(&path, &key, &cfg.model_name, &text)?;
            Ok(text)
        }
    }
}

/// Completes every prompt with at most `cfg.max_concurrent` requests in
/// flight. Results come back in input order.
pub fn complete_all(cfg: &CompletionConfig, bundles: &[PromptBundle]) -> Vec<Result<String, LlmError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<String, LlmError>>>> = Mutex::new((0..bundles.len()).map(|_| None).collect());
    let workers = cfg.max_concurrent.max(1).min(bundles.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= bundles.len() {
                    break;
                }
                let r = complete(cfg, &bundles[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn request_body(cfg: &CompletionConfig, bundle: &PromptBundle) -> Value {
    let user = match &bundle.attachments {
        Some(images) if !images.is_empty() => {
            let mut parts = vec![json!({"type": "text", "text": bundle.user_content})];
            parts.extend(images.iter().map(|url| json!({"type": "image_url", "image_url": {"url": url}})));
            Value::Array(parts)
        }
        _ => Value::String(bundle.user_content.clone()),
    };
    json!({
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
        "messages": [
            {"role": "system", "content": bundle.system_instructions},
            {"role": "user", "content": user},
        ],
    })
}

fn extract_text(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
}

enum Attempt {
    Done(Result<String, LlmError>),
    Retry(LlmError),
}

fn call_endpoint(cfg: &CompletionConfig, bundle: &PromptBundle) -> Result<String, LlmError> {
    let api_key = match &cfg.api_key_env {
        Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingCredential(var.clone()))?),
        None => None,
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| LlmError::Transport(e.to_string()))?;
    let body = request_body(cfg, bundle);

    let attempts = cfg.retry_count + 1;
    let mut last = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = cfg.retry_base_delay_ms.saturating_mul(1u64 << (attempt - 1).min(16));
            log::warn!("retrying completion in {delay} ms (attempt {}/{attempts})", attempt + 1);
            std::thread::sleep(Duration::from_millis(delay));
        }
        let mut req = client.post(&cfg.endpoint_url).json(&body);
        if let Some(key) = &api_key {
            req = req.bearer_auth(key);
        }
        match send_once(req, attempts) {
            Attempt::Done(r) => return r,
            Attempt::Retry(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn send_once(req: reqwest::blocking::RequestBuilder, attempts: u32) -> Attempt {
    let resp = match req.send() {
        Ok(r) => r,
        Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout(attempts)),
        Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string())),
    };
    let status = resp.status().as_u16();
    let text = match resp.text() {
        Ok(t) => t,
        Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout(attempts)),
        Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string())),
    };
    if (200..300).contains(&status) {
        return Attempt::Done(extract_text(&text));
    }
    let err = LlmError::HttpStatus { status, body: text };
    if status == 408 || status == 429 || status >= 500 {
        Attempt::Retry(err)
    } else {
        Attempt::Done(Err(err))
    }
}

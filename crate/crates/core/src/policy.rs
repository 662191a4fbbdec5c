//! Policies that pick the next action: the gold-path oracle, a seeded
//! random-valid baseline, transcript replay, and an HTTP completion client
//! for external language models (with an in-process mock server).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::plan;
use crate::seed;
use crate::tasks::TaskVariation;
use crate::transcript::ACTION_CUE;
use crate::world::{valid_actions, WorldState};

/// Environment variable naming the completion endpoint.
pub const COMPLETION_URL_VAR: &str = "TEXTLAB_COMPLETION_URL";

/// Action emitted by policies that have run out of scripted actions.
pub const FALLBACK_ACTION: &str = "wait";

pub struct PolicyContext<'a> {
    /// Packed prompt, ending with the action cue.
    pub prompt: &'a str,
    /// Environment steps consumed so far.
    pub step: usize,
    /// Decisions taken so far, intercepted ones included.
    pub decision: usize,
    pub variation: &'a TaskVariation,
    pub world: &'a WorldState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub action_text: String,
    pub raw_completion: String,
    pub latency_ms: u64,
}

impl PolicyDecision {
    /// Decision for a completion: the first line, trimmed.
    pub fn from_completion(raw: impl Into<String>, latency_ms: u64) -> Self {
        let raw = raw.into();
        PolicyDecision {
            action_text: first_line(&raw).to_string(),
            raw_completion: raw,
            latency_ms,
        }
    }

    fn local(action: &str) -> Self {
        PolicyDecision {
            action_text: action.to_string(),
            raw_completion: action.to_string(),
            latency_ms: 0,
        }
    }
}

pub fn first_line(text: &str) -> &str {
    text.split(['\n', '\r']).next().unwrap_or("").trim()
}

pub trait Policy: Send {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<PolicyDecision>;
}

/// Replays the first gold path of the variation.
pub struct OraclePolicy {
    actions: Vec<String>,
    next: usize,
}

impl OraclePolicy {
    pub fn new(variation: &TaskVariation) -> Result<Self> {
        let mut paths = plan(variation)?;
        Ok(OraclePolicy {
            actions: paths.swap_remove(0).actions,
            next: 0,
        })
    }
}

impl Policy for OraclePolicy {
    fn decide(&mut self, _ctx: &PolicyContext<'_>) -> Result<PolicyDecision> {
        let action = self
            .actions
            .get(self.next)
            .map_or(FALLBACK_ACTION, String::as_str);
        self.next += 1;
        Ok(PolicyDecision::local(action))
    }
}

/// Uniform choice among the engine's valid actions.
pub struct RandomValidPolicy {
    rng: ChaCha8Rng,
}

impl RandomValidPolicy {
    pub fn new(variation: &TaskVariation, seed: u64) -> Self {
        RandomValidPolicy {
            rng: seed::rng(seed, &format!("random/{}", variation.id)),
        }
    }
}

impl Policy for RandomValidPolicy {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<PolicyDecision> {
        let options = valid_actions(ctx.world);
        if options.is_empty() {
            return Ok(PolicyDecision::local(FALLBACK_ACTION));
        }
        let pick = self.rng.gen_range(0..options.len());
        Ok(PolicyDecision::local(&options[pick].text))
    }
}

/// Emits a fixed action list, then waits.
pub struct ReplayPolicy {
    actions: Vec<String>,
    next: usize,
}

impl ReplayPolicy {
    pub fn new(actions: Vec<String>) -> Self {
        ReplayPolicy { actions, next: 0 }
    }
}

impl Policy for ReplayPolicy {
    fn decide(&mut self, _ctx: &PolicyContext<'_>) -> Result<PolicyDecision> {
        let action = self
            .actions
            .get(self.next)
            .map_or(FALLBACK_ACTION, String::as_str);
        self.next += 1;
        Ok(PolicyDecision::local(action))
    }
}

/// One line of a replay file. Evaluation transcripts carry the same two
/// fields, so a stored run can be replayed directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub variation: String,
    pub actions: Vec<String>,
}

/// Reads a JSONL replay file into variation id → actions.
pub fn load_replay(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record: ReplayRecord = serde_json::from_str(line)?;
        out.insert(record.variation, record.actions);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub stop: Vec<String>,
    /// Sampling parameters forwarded untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub url: String,
    pub max_tokens: usize,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            url: String::new(),
            max_tokens: 32,
            timeout_ms: 30_000,
            retries: 3,
            backoff_ms: 200,
            extra: BTreeMap::new(),
        }
    }
}

/// Blocking client for the completion endpoint. Cloning shares the
/// connection pool.
#[derive(Clone)]
pub struct CompletionClient {
    agent: ureq::Agent,
    config: CompletionConfig,
}

impl fmt::Debug for CompletionClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompletionClient")
            .field("config", &self.config)
            .finish()
    }
}

impl CompletionClient {
    pub fn new(config: CompletionConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        CompletionClient { agent, config }
    }

    pub fn config(&self) -> &CompletionConfig {
        &self.config
    }

    fn request_once(&self, body: &CompletionRequest) -> std::result::Result<String, String> {
        let response = self
            .agent
            .post(&self.config.url)
            .send_json(body)
            .map_err(|e| e.to_string())?;
        let parsed: CompletionResponse = response
            .into_body()
            .read_json()
            .map_err(|e| e.to_string())?;
        if first_line(&parsed.text).is_empty() {
            return Err("empty completion".to_string());
        }
        Ok(parsed.text)
    }

    /// Sends `prompt` unchanged; retries transport failures, timeouts and
    /// empty completions.
    pub fn complete(&self, prompt: &str) -> Result<PolicyDecision> {
        let body = CompletionRequest {
            prompt: prompt.to_string(),
            max_tokens: self.config.max_tokens,
            stop: vec!["\n".to_string()],
            extra: self.config.extra.clone(),
        };
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.config.backoff_ms << (attempt - 1).min(6),
                ));
            }
            let start = Instant::now();
            match self.request_once(&body) {
                Ok(text) => {
                    return Ok(PolicyDecision::from_completion(
                        text,
                        start.elapsed().as_millis() as u64,
                    ));
                }
                Err(e) => last = e,
            }
        }
        Err(Error::Transport {
            attempts,
            message: last,
        })
    }
}

pub struct CompletionPolicy {
    client: CompletionClient,
}

impl Policy for CompletionPolicy {
    fn decide(&mut self, ctx: &PolicyContext<'_>) -> Result<PolicyDecision> {
        self.client.complete(ctx.prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PolicySpec {
    Oracle,
    Random,
    Replay { path: PathBuf },
    Completion { url: String },
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(PolicySpec::Oracle),
            None if s == "random" => Ok(PolicySpec::Random),
            None if s == "completion" => std::env::var(COMPLETION_URL_VAR)
                .map(|url| PolicySpec::Completion { url })
                .map_err(|_| format!("policy completion needs a url or {COMPLETION_URL_VAR}")),
            Some(("replay", path)) if !path.is_empty() => {
                Ok(PolicySpec::Replay { path: path.into() })
            }
            Some(("completion", url)) if !url.is_empty() => Ok(PolicySpec::Completion {
                url: url.to_string(),
            }),
            _ => Err(format!(
                "unknown policy {s:?}; expected oracle, random, replay:PATH or completion:URL"
            )),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Oracle => f.write_str("oracle"),
            PolicySpec::Random => f.write_str("random"),
            PolicySpec::Replay { path } => write!(f, "replay:{}", path.display()),
            PolicySpec::Completion { url } => write!(f, "completion:{url}"),
        }
    }
}

/// Builds one fresh policy per episode from a spec, sharing loaded replay
/// data and the HTTP connection pool.
#[derive(Clone)]
pub enum PolicyFactory {
    Oracle,
    Random,
    Replay(Arc<BTreeMap<String, Vec<String>>>),
    Completion(CompletionClient),
}

impl PolicyFactory {
    pub fn new(spec: &PolicySpec, completion: &CompletionConfig) -> Result<Self> {
        Ok(match spec {
            PolicySpec::Oracle => PolicyFactory::Oracle,
            PolicySpec::Random => PolicyFactory::Random,
            PolicySpec::Replay { path } => PolicyFactory::Replay(Arc::new(load_replay(path)?)),
            PolicySpec::Completion { url } => {
                PolicyFactory::Completion(CompletionClient::new(CompletionConfig {
                    url: url.clone(),
                    ..completion.clone()
                }))
            }
        })
    }

    pub fn build(&self, variation: &TaskVariation, seed: u64) -> Result<Box<dyn Policy>> {
        Ok(match self {
            PolicyFactory::Oracle => Box::new(OraclePolicy::new(variation)?),
            PolicyFactory::Random => Box::new(RandomValidPolicy::new(variation, seed)),
            PolicyFactory::Replay(map) => Box::new(ReplayPolicy::new(
                map.get(&variation.id).cloned().unwrap_or_default(),
            )),
            PolicyFactory::Completion(client) => Box::new(CompletionPolicy {
                client: client.clone(),
            }),
        })
    }
}

pub type Responder = Arc<dyn Fn(&CompletionRequest) -> String + Send + Sync>;

/// Canned agent for the mock server: walks through a fixed command list
/// by the number of turns in the prompt, and appends a fake game line the
/// client must cut off.
pub fn scripted_responder() -> Responder {
    const SCRIPT: [&str; 10] = [
        "look around",
        "inventory",
        "open door to kitchen",
        "go to kitchen",
        "look around",
        "open freezer",
        "pick up thermometer",
        "open door to kitchen",
        "look at stove",
        "wait",
    ];
    Arc::new(|request: &CompletionRequest| {
        let turns = request.prompt.matches("\nA: ").count();
        format!("{}\nG: (continued)", SCRIPT[turns % SCRIPT.len()])
    })
}

/// Minimal HTTP completion endpoint for hermetic tests.
pub struct MockServer {
    url: String,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
    log: Arc<Mutex<Vec<CompletionRequest>>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port). The first `fail_first`
    /// requests get a 500.
    pub fn start(addr: &str, responder: Responder, fail_first: usize) -> Result<Self> {
        let server = tiny_http::Server::http(addr)
            .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| Error::Config("mock server needs an IP address".into()))?;
        let server = Arc::new(server);
        let log = Arc::new(Mutex::new(Vec::new()));
        let failures = Arc::new(AtomicUsize::new(fail_first));
        let handle = {
            let server = Arc::clone(&server);
            let log = Arc::clone(&log);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = String::new();
                    let parsed = request
                        .as_reader()
                        .read_to_string(&mut body)
                        .ok()
                        .and_then(|_| serde_json::from_str::<CompletionRequest>(&body).ok());
                    let json_header =
                        tiny_http::Header::from_bytes("Content-Type", "application/json")
                            .expect("static header");
                    let response = match parsed {
                        _ if request.method() != &tiny_http::Method::Post => {
                            tiny_http::Response::from_string("method not allowed")
                                .with_status_code(405)
                        }
                        None => {
                            tiny_http::Response::from_string("bad request").with_status_code(400)
                        }
                        Some(_)
                            if failures
                                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
                                    n.checked_sub(1)
                                })
                                .is_ok() =>
                        {
                            tiny_http::Response::from_string("unavailable").with_status_code(500)
                        }
                        Some(req) => {
                            let text = responder(&req);
                            log.lock().expect("mock log").push(req);
                            let body = serde_json::to_string(&CompletionResponse { text })
                                .expect("serializable");
                            tiny_http::Response::from_string(body).with_header(json_header)
                        }
                    };
                    let _ = request.respond(response);
                }
            })
        };
        Ok(MockServer {
            url: format!("http://127.0.0.1:{port}/v1/completions"),
            server,
            handle: Some(handle),
            log,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Requests answered so far, in arrival order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.log.lock().expect("mock log").clone()
    }

    /// Blocks until the server thread ends.
    pub fn join(mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

/// True when `prompt` is a well-formed policy prompt.
pub fn ends_with_cue(prompt: &str) -> bool {
    prompt.ends_with(ACTION_CUE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::Catalog;

    fn variation() -> TaskVariation {
        Catalog::builtin()
            .enumerate("melting", 10, 3)
            .unwrap()
            .remove(0)
    }

    fn ctx<'a>(v: &'a TaskVariation, world: &'a WorldState) -> PolicyContext<'a> {
        PolicyContext {
            prompt: "task\n\nA:",
            step: 0,
            decision: 0,
            variation: v,
            world,
        }
    }

    #[test]
    fn completion_is_cut_at_the_first_line() {
        let d =
            PolicyDecision::from_completion("open door to kitchen\nG: The door is now open.", 3);
        assert_eq!(d.action_text, "open door to kitchen");
        assert_eq!(
            PolicyDecision::from_completion("  wait \r\n", 0).action_text,
            "wait"
        );
    }

    #[test]
    fn oracle_follows_the_gold_path_then_waits() {
        let v = variation();
        let gold = plan(&v).unwrap().swap_remove(0).actions;
        let mut oracle = OraclePolicy::new(&v).unwrap();
        let world = v.initial_world.clone();
        for expected in &gold {
            assert_eq!(
                &oracle.decide(&ctx(&v, &world)).unwrap().action_text,
                expected
            );
        }
        assert_eq!(oracle.decide(&ctx(&v, &world)).unwrap().action_text, "wait");
    }

    #[test]
    fn random_policy_is_seeded() {
        let v = variation();
        let world = v.initial_world.clone();
        let run = |seed| {
            let mut p = RandomValidPolicy::new(&v, seed);
            (0..20)
                .map(|_| p.decide(&ctx(&v, &world)).unwrap().action_text)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn spec_strings() {
        assert_eq!("oracle".parse::<PolicySpec>().unwrap(), PolicySpec::Oracle);
        assert_eq!(
            "replay:runs/a.jsonl".parse::<PolicySpec>().unwrap(),
            PolicySpec::Replay {
                path: "runs/a.jsonl".into()
            }
        );
        let c: PolicySpec = "completion:http://h:1/x".parse().unwrap();
        assert_eq!(c.to_string(), "completion:http://h:1/x");
        assert!("bogus".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn client_round_trip_and_retries() {
        let server = MockServer::start("127.0.0.1:0", scripted_responder(), 2).unwrap();
        let client = CompletionClient::new(CompletionConfig {
            url: server.url().to_string(),
            backoff_ms: 1,
            ..CompletionConfig::default()
        });
        let prompt = "Your task is x.\n\nA: look around\nG: Here.\nA:";
        let d = client.complete(prompt).unwrap();
        assert_eq!(d.action_text, "inventory");
        let log = server.requests();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].prompt, prompt);
        assert_eq!(log[0].stop, vec!["\n".to_string()]);
    }

    #[test]
    fn exhausted_retries_surface_a_transport_error() {
        let server = MockServer::start("127.0.0.1:0", scripted_responder(), 10).unwrap();
        let client = CompletionClient::new(CompletionConfig {
            url: server.url().to_string(),
            retries: 1,
            backoff_ms: 1,
            ..CompletionConfig::default()
        });
        assert!(matches!(
            client.complete("A:"),
            Err(Error::Transport { attempts: 2, .. })
        ));
        let empty = MockServer::start(
            "127.0.0.1:0",
            Arc::new(|_: &CompletionRequest| "\n".to_string()),
            0,
        )
        .unwrap();
        let client = CompletionClient::new(CompletionConfig {
            url: empty.url().to_string(),
            retries: 0,
            ..CompletionConfig::default()
        });
        assert!(client.complete("A:").is_err());
    }
}

//! Run configuration files.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use cachesage::baselines::{PolicyKind, PolicySettings, TtlConfig};
use cachesage::engine::{CostModel, EngineConfig};
use cachesage::experiment::engine_for;
use cachesage::workloads::{preset, read_trace, Trace, WorkloadSpec};
use cachesage::CacheSageConfig;
use serde::Deserialize;
use toml::Spanned;

/// A configuration problem, anchored to a line of the file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    workload: Vec<Spanned<RawWorkload>>,
    #[serde(default)]
    engine: RawEngine,
    policy: RawPolicy,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    preset: Option<Spanned<String>>,
    trace: Option<Spanned<PathBuf>>,
    sessions: Option<Spanned<u32>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    budget: Option<Spanned<usize>>,
    block_size: Option<Spanned<usize>>,
    concurrency: Option<Spanned<usize>>,
    cost_model: Option<Spanned<CostModel>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    names: Spanned<Vec<Spanned<String>>>,
    #[serde(default)]
    cachesage: Option<Spanned<CacheSageConfig>>,
    #[serde(default)]
    ttl: Option<Spanned<TtlConfig>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_dir")]
    dir: PathBuf,
    #[serde(default = "yes")]
    events: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self { dir: default_dir(), events: true }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone)]
pub enum Source {
    Preset(WorkloadSpec),
    Trace(Trace),
}

/// One workload with the engine it runs on.
#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub source: Source,
    pub engine: EngineConfig,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workloads: Vec<Workload>,
    pub policies: Vec<PolicyKind>,
    pub settings: PolicySettings,
    pub out_dir: PathBuf,
    pub events: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policies: Option<Vec<PolicyKind>>,
    pub budget: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

struct Ctx<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Ctx<'_> {
    fn line_of(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err(&self, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError { path: self.path.to_path_buf(), line: span.map(|s| self.line_of(s)), message: message.into() }
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse(path, &text, overrides)
}

/// Parses and validates `text`. Relative trace paths resolve against the
/// directory of `path`.
pub fn parse(path: &Path, text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let cx = Ctx { path, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| cx.err(e.span(), e.message().trim().to_string()))?;
    let seed = overrides.seed.or(raw.seed);

    let policy = raw.policy;
    let policies = match &overrides.policies {
        Some(p) => p.clone(),
        None => {
            let mut out = Vec::new();
            for name in policy.names.get_ref() {
                let kind: PolicyKind = name.get_ref().parse().map_err(|_| {
                    cx.err(
                        Some(name.span()),
                        format!("unknown policy {:?}; valid policies: {}", name.get_ref(), PolicyKind::valid_names()),
                    )
                })?;
                if out.contains(&kind) {
                    return Err(cx.err(Some(name.span()), format!("policy {kind:?} listed twice")));
                }
                out.push(kind);
            }
            out
        }
    };
    if policies.is_empty() {
        return Err(cx.err(Some(policy.names.span()), "policy.names must list at least one policy"));
    }

    let mut settings = PolicySettings::default();
    if let Some(c) = policy.cachesage {
        let span = c.span();
        settings.cachesage = c.into_inner();
        settings.cachesage.validate().map_err(|e| cx.err(Some(span), e.to_string()))?;
    }
    if let Some(t) = policy.ttl {
        let span = t.span();
        settings.ttl = t.into_inner();
        settings.ttl.validate().map_err(|e| cx.err(Some(span), e.to_string()))?;
    }

    if raw.workload.is_empty() {
        return Err(cx.err(None, "no [[workload]] entries"));
    }
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let mut workloads: Vec<Workload> = Vec::new();
    for entry in raw.workload {
        let span = entry.span();
        let w = entry.into_inner();
        let (name, source, mut engine) = match (w.preset, w.trace) {
            (Some(p), None) => {
                let mut spec = preset(p.get_ref()).map_err(|e| cx.err(Some(p.span()), e.to_string()))?;
                if let Some(s) = &w.sessions {
                    spec.sessions = *s.get_ref();
                }
                if let Some(seed) = seed {
                    spec.seed = seed;
                }
                let span = w.sessions.as_ref().map(|s| s.span()).unwrap_or(p.span());
                spec.validate().map_err(|e| cx.err(Some(span), e.to_string()))?;
                let engine = engine_for(&spec);
                (spec.name.clone(), Source::Preset(spec), engine)
            }
            (None, Some(t)) => {
                if let Some(s) = &w.sessions {
                    return Err(cx.err(Some(s.span()), "sessions applies to presets only"));
                }
                let full = base_dir.join(t.get_ref());
                let file = std::fs::File::open(&full)
                    .map_err(|e| cx.err(Some(t.span()), format!("cannot open trace {}: {e}", full.display())))?;
                let trace = read_trace(std::io::BufReader::new(file))
                    .map_err(|e| cx.err(Some(t.span()), format!("trace {}: {e}", full.display())))?;
                (trace.name.clone(), Source::Trace(trace), EngineConfig::default())
            }
            _ => return Err(cx.err(Some(span), "each [[workload]] needs exactly one of preset or trace")),
        };
        if workloads.iter().any(|x| x.name == name) {
            return Err(cx.err(Some(span), format!("workload {name:?} listed twice")));
        }
        if let Some(b) = &raw.engine.budget {
            engine.budget = *b.get_ref();
        }
        if let Some(b) = &raw.engine.block_size {
            engine.block_size = *b.get_ref();
        }
        if let Some(c) = &raw.engine.concurrency {
            engine.concurrency = *c.get_ref();
        }
        if let Some(c) = &raw.engine.cost_model {
            engine.cost = *c.get_ref();
        }
        if let Some(b) = overrides.budget {
            engine.budget = b;
        }
        engine.record_events = raw.output.events;
        engine.validate().map_err(|e| {
            let span = raw
                .engine
                .budget
                .as_ref()
                .map(|s| s.span())
                .or(raw.engine.block_size.as_ref().map(|s| s.span()))
                .or(raw.engine.concurrency.as_ref().map(|s| s.span()))
                .or(raw.engine.cost_model.as_ref().map(|s| s.span()));
            cx.err(span, e.to_string())
        })?;
        workloads.push(Workload { name, source, engine });
    }

    Ok(RunConfig {
        seed,
        workloads,
        policies,
        settings,
        out_dir: overrides.out_dir.clone().unwrap_or(raw.output.dir),
        events: raw.output.events,
    })
}

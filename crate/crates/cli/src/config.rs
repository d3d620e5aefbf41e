//! Flat key-value experiment configs: diff-able, versionable records of a
//! simulation run.
//!
//! ```text
//! # two heterogeneous clients, four replications
//! experiment   = demo
//! horizon      = 1_000_000
//! warmup       = 100_000          # optional, defaults to horizon/10
//! seed         = 2024
//! replications = 4
//! policy       = approx-index     # repeatable; one CSV row per policy
//! policy       = max-age
//! tie          = lowest-index     # lowest-index | random
//! age-cap      = 16               # only read by policy = optimal-table
//! client       = 0.6 0.9          # lambda p
//! clients      = 5 x 0.5 0.9      # count x lambda p
//! ```

use aoi_core::{ClientParams, PolicyKind, TieRule};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("config declares no clients (need `client` or `clients` entries)")]
    NoClients,
    #[error("config declares no `policy` entries")]
    NoPolicies,
}

/// A fully parsed simulation request.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub experiment: String,
    pub clients: Vec<ClientParams>,
    pub horizon: u64,
    pub warmup: Option<u64>,
    pub seed: u64,
    pub replications: u32,
    pub policies: Vec<PolicyKind>,
    pub tie: TieRule,
    pub age_cap: u32,
}

fn err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Line { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.replace('_', "")
        .parse::<T>()
        .map_err(|e| err(line, format!("bad `{key}` value `{raw}`: {e}")))
}

fn parse_client(line: usize, raw: &str) -> Result<ClientParams, ConfigError> {
    let parts: Vec<&str> = raw.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(err(line, format!("`client` wants `LAMBDA P`, got `{raw}`")));
    }
    let l: f64 = parse_num(line, "client lambda", parts[0])?;
    let p: f64 = parse_num(line, "client p", parts[1])?;
    ClientParams::new(l, p).map_err(|e| err(line, e.to_string()))
}

fn parse_client_group(line: usize, raw: &str) -> Result<(usize, ClientParams), ConfigError> {
    let parts: Vec<&str> = raw.split_whitespace().collect();
    if parts.len() != 4 || parts[1] != "x" {
        return Err(err(line, format!("`clients` wants `COUNT x LAMBDA P`, got `{raw}`")));
    }
    let count: usize = parse_num(line, "clients count", parts[0])?;
    if count == 0 {
        return Err(err(line, "`clients` count must be positive"));
    }
    let l: f64 = parse_num(line, "clients lambda", parts[2])?;
    let p: f64 = parse_num(line, "clients p", parts[3])?;
    let params = ClientParams::new(l, p).map_err(|e| err(line, e.to_string()))?;
    Ok((count, params))
}

/// Parse a config file's text into a simulation spec.
pub fn parse_config(text: &str) -> Result<SimulationSpec, ConfigError> {
    let mut experiment = "custom".to_string();
    let mut clients = Vec::new();
    let mut horizon = None;
    let mut warmup = None;
    let mut seed = 1u64;
    let mut replications = 1u32;
    let mut policies = Vec::new();
    let mut tie = TieRule::LowestIndex;
    let mut age_cap = 16u32;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(err(line, format!("key `{key}` has no value")));
        }
        match key {
            "experiment" => experiment = value.to_string(),
            "horizon" => horizon = Some(parse_num(line, key, value)?),
            "warmup" => warmup = Some(parse_num(line, key, value)?),
            "seed" => seed = parse_num(line, key, value)?,
            "replications" => replications = parse_num(line, key, value)?,
            "policy" => policies
                .push(value.parse::<PolicyKind>().map_err(|e| err(line, e))?),
            "tie" => tie = value.parse::<TieRule>().map_err(|e| err(line, e))?,
            "age-cap" => age_cap = parse_num(line, key, value)?,
            "client" => clients.push(parse_client(line, value)?),
            "clients" => {
                let (count, params) = parse_client_group(line, value)?;
                clients.extend(std::iter::repeat(params).take(count));
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }

    let horizon = horizon.ok_or(ConfigError::Missing("horizon"))?;
    if clients.is_empty() {
        return Err(ConfigError::NoClients);
    }
    if policies.is_empty() {
        return Err(ConfigError::NoPolicies);
    }
    Ok(SimulationSpec {
        experiment,
        clients,
        horizon,
        warmup,
        seed,
        replications,
        policies,
        tie,
        age_cap,
    })
}

/// Parse a success-probability list like `0.9,0.1` or `5x0.9,5x0.1`.
pub fn parse_success_probs(raw: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for token in raw.split(',') {
        let token = token.trim();
        if token.is_empty() {
            return Err("empty entry in probability list".into());
        }
        let (count, p_str) = match token.split_once('x') {
            Some((n, p)) => {
                let n: usize =
                    n.trim().parse().map_err(|_| format!("bad count in `{token}`"))?;
                if n == 0 {
                    return Err(format!("zero count in `{token}`"));
                }
                (n, p.trim())
            }
            None => (1, token),
        };
        let p: f64 = p_str.parse().map_err(|_| format!("bad probability `{p_str}`"))?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(format!("probability {p} outside (0, 1]"));
        }
        out.extend(std::iter::repeat(p).take(count));
    }
    if out.is_empty() {
        return Err("probability list is empty".into());
    }
    Ok(out)
}

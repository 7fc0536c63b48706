//! Flat key-value configuration files and dotted-key overrides.
//!
//! The file format is one `key = value` pair per line, `#` comments, blank
//! lines ignored. Command-line overrides use the same `key=value` syntax.
//! The full key table lives in the README; `objective.*` keys select the
//! surrogate variant and coefficients.

use std::path::Path;

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveConfig, SurrogateVariant};
use crate::trainer::TrainConfig;

/// Parse a config file into ordered pairs.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected 'key = value'", path.display(), lineno + 1))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parse `key=value` override arguments.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    args.iter()
        .map(|a| {
            a.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Usage(format!("override '{a}' is not key=value")))
        })
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: could not parse '{v}'")))
}

fn parse_dims(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|t| parse_num::<usize>(key, t.trim()))
        .collect()
}

/// Apply pairs on top of a base configuration.
pub fn apply_pairs(mut cfg: TrainConfig, pairs: &[(String, String)]) -> Result<TrainConfig> {
    // variant selection may arrive before or after its parameters, so stage
    // them and rebuild at the end
    let mut variant_name: Option<String> = None;
    let mut epsilon: Option<f64> = None;
    let mut beta: Option<f64> = None;
    let mut d_targ: Option<f64> = None;
    match cfg.objective.variant {
        SurrogateVariant::Clip { epsilon: e } => epsilon = Some(e),
        SurrogateVariant::FixedKl { beta: b } => beta = Some(b),
        SurrogateVariant::AdaptiveKl { beta_init, d_targ: d } => {
            beta = Some(beta_init);
            d_targ = Some(d);
        }
        SurrogateVariant::NoClip => {}
    }
    if variant_name.is_none() {
        variant_name = Some(cfg.objective.variant.name().to_string());
    }

    for (k, v) in pairs {
        match k.as_str() {
            "env_name" => cfg.env_name = v.clone(),
            "horizon" => cfg.horizon = parse_num(k, v)?,
            "num_actors" => cfg.num_actors = parse_num(k, v)?,
            "epochs" => cfg.epochs = parse_num(k, v)?,
            "minibatch_size" => cfg.minibatch_size = parse_num(k, v)?,
            "gamma" => cfg.gamma = parse_num(k, v)?,
            "lambda" => cfg.lambda = parse_num(k, v)?,
            "stepsize" => cfg.stepsize = parse_num(k, v)?,
            "total_timesteps" => cfg.total_timesteps = parse_num(k, v)?,
            "anneal" => cfg.anneal = parse_bool(k, v)?,
            "normalize_advantages" => cfg.normalize_advantages = parse_bool(k, v)?,
            "seed" => cfg.seed = parse_num(k, v)?,
            "objective.variant" => variant_name = Some(v.clone()),
            "objective.epsilon" => epsilon = Some(parse_num(k, v)?),
            "objective.beta" => beta = Some(parse_num(k, v)?),
            "objective.d_targ" => d_targ = Some(parse_num(k, v)?),
            "objective.c1" => cfg.objective.c1 = parse_num(k, v)?,
            "objective.c2" => cfg.objective.c2 = parse_num(k, v)?,
            "objective.shared_network" => cfg.objective.shared_network = parse_bool(k, v)?,
            "policy.hidden_dims" => cfg.hidden_dims = parse_dims(k, v)?,
            "policy.log_std_init" => cfg.log_std_init = parse_num(k, v)?,
            "policy.log_std_anneal" => {
                cfg.log_std_anneal = if v == "none" {
                    None
                } else {
                    let (s, e) = v.split_once(',').ok_or_else(|| {
                        Error::Config(format!("{k}: expected '<start>,<end>' or 'none', got '{v}'"))
                    })?;
                    Some((parse_num(k, s.trim())?, parse_num(k, e.trim())?))
                }
            }
            "trainer.parallel_actors" => cfg.parallel_actors = parse_bool(k, v)?,
            "run.checkpoint_every" => cfg.checkpoint_every = parse_num(k, v)?,
            _ => return Err(Error::Config(format!("unknown config key '{k}'"))),
        }
    }

    cfg.objective.variant = build_variant(
        variant_name.as_deref().unwrap_or("clip"),
        epsilon,
        beta,
        d_targ,
    )?;
    cfg.validate()?;
    Ok(cfg)
}

fn build_variant(
    name: &str,
    epsilon: Option<f64>,
    beta: Option<f64>,
    d_targ: Option<f64>,
) -> Result<SurrogateVariant> {
    match name {
        "noclip" => Ok(SurrogateVariant::NoClip),
        "clip" => Ok(SurrogateVariant::Clip { epsilon: epsilon.unwrap_or(0.2) }),
        "fixedkl" => Ok(SurrogateVariant::FixedKl { beta: beta.unwrap_or(1.0) }),
        "adaptivekl" => Ok(SurrogateVariant::AdaptiveKl {
            beta_init: beta.unwrap_or(1.0),
            d_targ: d_targ.unwrap_or(0.01),
        }),
        _ => Err(Error::Config(format!(
            "unknown objective variant '{name}' (noclip, clip, fixedkl, adaptivekl)"
        ))),
    }
}

/// Compact one-token description, e.g. `clip:0.2` or `adaptivekl:1:0.01`.
pub fn variant_label(v: &SurrogateVariant) -> String {
    match v {
        SurrogateVariant::NoClip => "noclip".into(),
        SurrogateVariant::Clip { epsilon } => format!("clip:{epsilon}"),
        SurrogateVariant::FixedKl { beta } => format!("fixedkl:{beta}"),
        SurrogateVariant::AdaptiveKl { beta_init, d_targ } => {
            format!("adaptivekl:{beta_init}:{d_targ}")
        }
    }
}

/// Parse the compact form: `noclip`, `clip:<ε>`, `fixedkl:<β>`,
/// `adaptivekl:<d_targ>` (β₀ = 1) or `adaptivekl:<β₀>:<d_targ>`.
pub fn parse_variant(spec: &str) -> Result<SurrogateVariant> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Config(format!("bad number '{s}' in variant '{spec}'")))
    };
    match (parts[0], parts.len()) {
        ("noclip", 1) => Ok(SurrogateVariant::NoClip),
        ("clip", 1) => Ok(SurrogateVariant::Clip { epsilon: 0.2 }),
        ("clip", 2) => Ok(SurrogateVariant::Clip { epsilon: num(parts[1])? }),
        ("fixedkl", 2) => Ok(SurrogateVariant::FixedKl { beta: num(parts[1])? }),
        ("adaptivekl", 2) => {
            Ok(SurrogateVariant::AdaptiveKl { beta_init: 1.0, d_targ: num(parts[1])? })
        }
        ("adaptivekl", 3) => Ok(SurrogateVariant::AdaptiveKl {
            beta_init: num(parts[1])?,
            d_targ: num(parts[2])?,
        }),
        _ => Err(Error::Config(format!("unparseable variant spec '{spec}'"))),
    }
}

/// Canonical flat serialization (fixed key order); also the hash input for
/// run-directory names.
pub fn to_pairs(cfg: &TrainConfig) -> Vec<(String, String)> {
    let ObjectiveConfig { variant, c1, c2, shared_network } = cfg.objective;
    let mut pairs: Vec<(String, String)> = vec![
        ("env_name".into(), cfg.env_name.clone()),
        ("horizon".into(), cfg.horizon.to_string()),
        ("num_actors".into(), cfg.num_actors.to_string()),
        ("epochs".into(), cfg.epochs.to_string()),
        ("minibatch_size".into(), cfg.minibatch_size.to_string()),
        ("gamma".into(), format!("{:?}", cfg.gamma)),
        ("lambda".into(), format!("{:?}", cfg.lambda)),
        ("stepsize".into(), format!("{:?}", cfg.stepsize)),
        ("total_timesteps".into(), cfg.total_timesteps.to_string()),
        ("anneal".into(), cfg.anneal.to_string()),
        ("normalize_advantages".into(), cfg.normalize_advantages.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("objective.variant".into(), variant.name().into()),
    ];
    match variant {
        SurrogateVariant::Clip { epsilon } => {
            pairs.push(("objective.epsilon".into(), format!("{epsilon:?}")))
        }
        SurrogateVariant::FixedKl { beta } => {
            pairs.push(("objective.beta".into(), format!("{beta:?}")))
        }
        SurrogateVariant::AdaptiveKl { beta_init, d_targ } => {
            pairs.push(("objective.beta".into(), format!("{beta_init:?}")));
            pairs.push(("objective.d_targ".into(), format!("{d_targ:?}")));
        }
        SurrogateVariant::NoClip => {}
    }
    pairs.push(("objective.c1".into(), format!("{c1:?}")));
    pairs.push(("objective.c2".into(), format!("{c2:?}")));
    pairs.push(("objective.shared_network".into(), shared_network.to_string()));
    pairs.push((
        "policy.hidden_dims".into(),
        cfg.hidden_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
    ));
    pairs.push(("policy.log_std_init".into(), format!("{:?}", cfg.log_std_init)));
    pairs.push((
        "policy.log_std_anneal".into(),
        cfg.log_std_anneal
            .map(|(s, e)| format!("{s:?},{e:?}"))
            .unwrap_or_else(|| "none".into()),
    ));
    pairs.push(("trainer.parallel_actors".into(), cfg.parallel_actors.to_string()));
    pairs.push(("run.checkpoint_every".into(), cfg.checkpoint_every.to_string()));
    pairs
}

pub fn render_pairs(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

/// FNV-1a hash of the canonical config text, as 8 hex chars.
pub fn config_hash(cfg: &TrainConfig) -> String {
    let text = render_pairs(&to_pairs(cfg));
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{:08x}", (h >> 32) as u32 ^ h as u32)
}

//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use kacfick::{CorrectionRule, ModelParams, ResolventMethod, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub nodes_per_unit: usize,
    pub options: SolverOptions,
    /// Strictly decreasing epsilon values for `sweep`.
    pub sweep: Vec<f64>,
    pub format: Format,
    pub seed: u64,
    /// Whether sweep rows also carry the boundary-map Jacobian deviation.
    pub jacobian: bool,
    /// Jacobian finite-difference step.
    pub jacobian_step: f64,
    /// Random instances for the resolvent oracle check in `validate`.
    pub validate_samples: usize,
    /// Negative control for `validate`: breaks one kernel row.
    pub corrupt_kernel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[(&str, &str)] = &[
    ("beta", "1.25"),
    ("mu_minus", "0.8"),
    ("mu_plus", "0.7"),
    ("epsilon", "1/50"),
    ("delta_prime", "auto"),
    ("nodes_per_unit", "20"),
    ("inner_tol", "1e-12"),
    ("outer_tol", "1e-10"),
    ("shoot_tol", "1e-8"),
    ("max_inner", "50"),
    ("max_outer", "500"),
    ("max_shoot", "20"),
    ("resolvent", "direct"),
    ("truncation_tol", "1e-14"),
    ("correction", "newton"),
    ("sweep", "1/25, 1/50, 1/100, 1/200"),
    ("format", "csv"),
    ("seed", "0"),
    ("jacobian", "false"),
    ("jacobian_step", "1e-4"),
    ("validate_samples", "20"),
    ("corrupt_kernel", "false"),
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError(format!(
                "line {}: expected `key = value`, got `{raw}`",
                n + 1
            ))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns `--key value` / `--key=value` tokens into pairs.
pub fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let key = tok.strip_prefix("--").ok_or_else(|| {
            ConfigError(format!(
                "unexpected argument `{tok}`; overrides are `--key value`"
            ))
        })?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| {
                    ConfigError(format!("override `--{key}` is missing its value"))
                })?;
                (key.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

/// Real number, also accepting a fraction `a/b`.
pub fn parse_real(key: &str, s: &str) -> Result<f64, ConfigError> {
    let bad = || ConfigError(format!("{key}: cannot parse `{s}` as a number"));
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse<T: FromStr>(key: &str, s: &str) -> Result<T, ConfigError> {
    s.trim()
        .parse()
        .map_err(|_| ConfigError(format!("{key}: cannot parse `{s}`")))
}

fn parse_bool(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError(format!(
            "{key}: expected true or false, got `{s}`"
        ))),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            entries = parse_entries(&text)?;
        }
        entries.extend(overrides.iter().cloned());
        Self::from_entries(&entries)
    }

    /// Later entries win.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&str, String> =
            KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect();
        for (k, v) in entries {
            match KEYS.iter().find(|(name, _)| name == k) {
                Some((name, _)) => {
                    map.insert(name, v.clone());
                }
                None => return Err(ConfigError(format!("unknown configuration key `{k}`"))),
            }
        }
        let get = |k: &str| map[k].as_str();
        let real = |k: &str| parse_real(k, get(k));

        let domain = |e: kacfick::Error| ConfigError(e.to_string());
        let mut params = ModelParams::new(
            real("beta")?,
            real("mu_minus")?,
            real("mu_plus")?,
            real("epsilon")?,
        )
        .map_err(domain)?;
        if get("delta_prime") != "auto" {
            params.delta_prime = real("delta_prime")?;
        }
        params.inner_tol = real("inner_tol")?;
        params.outer_tol = real("outer_tol")?;
        params.shoot_tol = real("shoot_tol")?;
        params.max_inner = parse("max_inner", get("max_inner"))?;
        params.max_outer = parse("max_outer", get("max_outer"))?;
        params.max_shoot = parse("max_shoot", get("max_shoot"))?;
        params.validate().map_err(domain)?;

        let resolvent = match get("resolvent") {
            "direct" => ResolventMethod::DirectSolve,
            "series" => {
                let truncation_tol = real("truncation_tol")?;
                if !(truncation_tol > 0.0) {
                    return Err(ConfigError("truncation_tol must be positive".into()));
                }
                ResolventMethod::NeumannSeries { truncation_tol }
            }
            other => {
                return Err(ConfigError(format!(
                    "resolvent: expected direct or series, got `{other}`"
                )))
            }
        };
        let correction = match get("correction") {
            "newton" => CorrectionRule::Newton,
            "resolvent" => CorrectionRule::ResolventOnly,
            other => {
                return Err(ConfigError(format!(
                    "correction: expected newton or resolvent, got `{other}`"
                )))
            }
        };
        let sweep = get("sweep")
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_real("sweep", s))
            .collect::<Result<Vec<_>, _>>()?;
        if sweep.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ConfigError(
                "sweep: epsilon values must be strictly decreasing".into(),
            ));
        }
        for &e in &sweep {
            params.clone().with_epsilon(e).map_err(domain)?;
        }
        let format = match get("format") {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => {
                return Err(ConfigError(format!(
                    "format: expected csv or json, got `{other}`"
                )))
            }
        };
        let jacobian_step = real("jacobian_step")?;
        if !(jacobian_step > 0.0) {
            return Err(ConfigError("jacobian_step must be positive".into()));
        }
        let nodes_per_unit = parse("nodes_per_unit", get("nodes_per_unit"))?;
        kacfick::Grid::new(params.epsilon, nodes_per_unit).map_err(domain)?;

        Ok(Self {
            params,
            nodes_per_unit,
            options: SolverOptions {
                resolvent,
                correction,
            },
            sweep,
            format,
            seed: parse("seed", get("seed"))?,
            jacobian: parse_bool("jacobian", get("jacobian"))?,
            jacobian_step,
            validate_samples: parse("validate_samples", get("validate_samples"))?,
            corrupt_kernel: parse_bool("corrupt_kernel", get("corrupt_kernel"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn defaults_are_the_reference_instance() {
        let c = RunConfig::from_entries(&[]).unwrap();
        assert_eq!(c.params.beta, 1.25);
        assert_eq!(c.params.epsilon, 0.02);
        assert!((c.params.delta_prime - 0.1).abs() < 1e-15);
        assert_eq!(c.sweep, vec![0.04, 0.02, 0.01, 0.005]);
        assert_eq!(c.options, SolverOptions::default());
    }

    #[test]
    fn file_entries_and_comments() {
        let e = parse_entries("# header\nbeta = 1.5 # hotter\n\n mu_plus=0.75\n").unwrap();
        assert_eq!(e, pairs(&[("beta", "1.5"), ("mu_plus", "0.75")]));
        assert!(parse_entries("beta 1.5").is_err());
    }

    #[test]
    fn overrides_take_both_forms_and_win() {
        let toks: Vec<String> = ["--epsilon", "1/25", "--max-outer=7"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let o = parse_overrides(&toks).unwrap();
        assert_eq!(o, pairs(&[("epsilon", "1/25"), ("max_outer", "7")]));
        let mut all = pairs(&[("epsilon", "0.1")]);
        all.extend(o);
        let c = RunConfig::from_entries(&all).unwrap();
        assert_eq!(c.params.epsilon, 0.04);
        assert_eq!(c.params.max_outer, 7);
        assert!(parse_overrides(&["beta".to_string()]).is_err());
        assert!(parse_overrides(&["--beta".to_string()]).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            ("mu_plus", "0.4"),
            ("beta", "0.9"),
            ("nonsense", "1"),
            ("sweep", "1/50, 1/25"),
            ("resolvent", "lu"),
            ("epsilon", "abc"),
            ("nodes_per_unit", "4"),
            ("delta_prime", "0.5"),
        ] {
            assert!(RunConfig::from_entries(&pairs(&[bad])).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn series_resolvent_and_literal_rule() {
        let c = RunConfig::from_entries(&pairs(&[
            ("resolvent", "series"),
            ("truncation_tol", "1e-13"),
            ("correction", "resolvent"),
        ]))
        .unwrap();
        assert_eq!(
            c.options.resolvent,
            ResolventMethod::NeumannSeries {
                truncation_tol: 1e-13
            }
        );
        assert_eq!(c.options.correction, CorrectionRule::ResolventOnly);
    }

    #[test]
    fn fractions() {
        assert_eq!(parse_real("x", "1/8").unwrap(), 0.125);
        assert!(parse_real("x", "1/0").is_err());
    }
}

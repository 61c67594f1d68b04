//! Turning flags and the optional config file into [`SystemParams`].

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use dicke_fcs::model::thermal_occupation;
use dicke_fcs::{ReservoirLabel, SystemParams};

use crate::args::{Counted, SystemArgs};
use crate::error::{CliError, CliResult};

const KEYS: &[&str] = &[
    "N", "nS", "nD", "gammaS", "gammaD", "TS", "TD", "T", "omega", "nB", "gammaB",
];

/// `key=value` pairs; blank lines and `#` comments are skipped.
#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::usage(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("line {}: expected key=value", i + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::usage(format!("line {}: unknown key `{key}`", i + 1)));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::usage(format!("config key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> CliResult<Vec<usize>> {
        match self.values.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::usage(format!("config key `{key}`: cannot parse `{v}`")))
                })
                .collect(),
        }
    }

    /// Fill every flag left unset from the file.
    pub fn fill(&self, args: &SystemArgs) -> CliResult<SystemArgs> {
        let mut out = args.clone();
        if out.n.is_empty() {
            out.n = self.list("N")?;
        }
        let slots: [(&mut Option<f64>, &str); 9] = [
            (&mut out.n_s, "nS"),
            (&mut out.n_d, "nD"),
            (&mut out.gamma_s, "gammaS"),
            (&mut out.gamma_d, "gammaD"),
            (&mut out.t_s, "TS"),
            (&mut out.t_d, "TD"),
            (&mut out.omega, "omega"),
            (&mut out.n_b, "nB"),
            (&mut out.gamma_b, "gammaB"),
        ];
        for (slot, key) in slots {
            if slot.is_none() {
                *slot = self.get(key)?;
            }
        }
        Ok(out)
    }
}

pub fn is_single_bath(args: &SystemArgs) -> bool {
    args.n_b.is_some() || args.gamma_b.is_some()
}

/// The one `N` of a single-point command.
pub fn single_n(args: &SystemArgs) -> CliResult<usize> {
    match args.n.as_slice() {
        [] => Ok(1),
        [n] => Ok(*n),
        _ => Err(CliError::usage("--N takes a single value here")),
    }
}

fn occupation(n: Option<f64>, t: Option<f64>, omega: f64, default: f64, which: &str) -> CliResult<f64> {
    match (n, t) {
        (Some(_), Some(_)) => Err(CliError::usage(format!(
            "give either --n{which} or --T{which}, not both"
        ))),
        (None, Some(t)) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::usage(format!("--T{which} must be finite and > 0, got {t}")));
            }
            Ok(thermal_occupation(1.0 / t, omega)?)
        }
        (Some(n), None) => Ok(n),
        (None, None) => Ok(default),
    }
}

/// Build the scenario for `n_atoms` emitters from fully merged arguments.
pub fn build(args: &SystemArgs, n_atoms: usize) -> CliResult<SystemParams> {
    let omega = args.omega.unwrap_or(1.0);
    let params = if is_single_bath(args) {
        let two_terminal = [args.n_s, args.n_d, args.gamma_s, args.gamma_d, args.t_s, args.t_d];
        if two_terminal.iter().any(Option::is_some) {
            return Err(CliError::usage("single-bath flags cannot be mixed with source/drain flags"));
        }
        SystemParams::single_bath(n_atoms, args.gamma_b.unwrap_or(1.0), args.n_b.unwrap_or(0.0))?
    } else {
        let n_s = occupation(args.n_s, args.t_s, omega, 1.0, "S")?;
        let n_d = occupation(args.n_d, args.t_d, omega, 0.0, "D")?;
        SystemParams::two_terminal(
            n_atoms,
            args.gamma_s.unwrap_or(1.0),
            n_s,
            args.gamma_d.unwrap_or(1.0),
            n_d,
        )?
    };
    Ok(params.with_omega(omega)?)
}

/// Inverse temperatures `(beta_S, beta_D)` when both temperatures are given.
pub fn inverse_temperatures(args: &SystemArgs) -> Option<(f64, f64)> {
    Some((1.0 / args.t_s?, 1.0 / args.t_d?))
}

pub fn counted_label(counted: Option<Counted>, params: &SystemParams) -> ReservoirLabel {
    match counted {
        Some(Counted::Drain) => ReservoirLabel::Drain,
        Some(Counted::Source) => ReservoirLabel::Source,
        Some(Counted::Single) => ReservoirLabel::Single,
        None => dicke_fcs::transient::default_counted(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cfg = Config::parse("N = 4\nnS=3 # source\n\nnD=0.5\n").unwrap();
        let flags = SystemArgs {
            n_s: Some(2.0),
            ..Default::default()
        };
        let merged = cfg.fill(&flags).unwrap();
        assert_eq!(merged.n, vec![4]);
        assert_eq!(merged.n_s, Some(2.0));
        assert_eq!(merged.n_d, Some(0.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::parse("nX=1"), Err(CliError::Usage(_))));
        assert!(matches!(Config::parse("nS"), Err(CliError::Usage(_))));
    }

    #[test]
    fn temperature_and_occupation_conflict() {
        let args = SystemArgs {
            n_s: Some(1.0),
            t_s: Some(2.0),
            ..Default::default()
        };
        assert!(matches!(build(&args, 1), Err(CliError::Usage(_))));
    }

    #[test]
    fn temperature_sets_occupation() {
        let args = SystemArgs {
            t_s: Some(1.0 / 2f64.ln()),
            ..Default::default()
        };
        let p = build(&args, 2).unwrap();
        assert!((p.source().unwrap().occupation - 1.0).abs() < 1e-12);
    }
}

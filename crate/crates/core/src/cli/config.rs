//! Flat key-value experiment configuration.
//!
//! The format is diffable text, one `key = value` per line, `#` comments,
//! section prefixes spelled out (`mcmc.steps = 20000`). Unknown keys are
//! rejected. `canonical_text` prints a config back in fixed key order such
//! that reparsing reproduces the value exactly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forward::ModelKind;
use crate::harness::{CredCase, ExperimentConfig, McmcSettings};
use crate::spectral::FieldSpec;

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

struct Pairs {
    map: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl Pairs {
    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.used.contains(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_coeff_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_num::<f64>(key, v.trim()))
        .collect()
}

fn parse_field(pairs: &mut Pairs, prefix: &str, default_zero: bool) -> Result<FieldSpec> {
    let kind_key = format!("{prefix}.kind");
    let coeffs_key = format!("{prefix}.coeffs");
    let kind = pairs.take(&kind_key);
    match kind.as_deref() {
        None if default_zero && pairs.take(&coeffs_key).is_none() => {
            Ok(FieldSpec::Coeffs(Vec::new()))
        }
        None => Err(Error::Config(format!("missing key `{kind_key}`"))),
        Some("coeffs") => {
            let coeffs = pairs.require(&coeffs_key)?;
            Ok(FieldSpec::Coeffs(parse_coeff_list(&coeffs_key, &coeffs)?))
        }
        Some("bump") => {
            if pairs.take(&coeffs_key).is_some() {
                return Err(Error::Config(format!(
                    "`{coeffs_key}` is not accepted for the bump field"
                )));
            }
            Ok(FieldSpec::Bump)
        }
        Some(other) => Err(Error::Config(format!(
            "key `{kind_key}`: expected `coeffs` or `bump`, got `{other}`"
        ))),
    }
}

/// Parse configuration text into a resolved experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut pairs = Pairs {
        map: parse_pairs(text)?,
        used: Default::default(),
    };

    let model = match pairs.require("model")?.as_str() {
        "linear" => ModelKind::Linear,
        "darcy" => ModelKind::Darcy,
        "schrodinger" => ModelKind::Schrodinger,
        other => {
            return Err(Error::Config(format!(
                "key `model`: expected linear|darcy|schrodinger, got `{other}`"
            )))
        }
    };
    let d: usize = parse_num("d", &pairs.require("d")?)?;
    let big_d: usize = parse_num("D", &pairs.require("D")?)?;
    let alpha: u32 = parse_num("alpha", &pairs.require("alpha")?)?;
    let n: usize = parse_num("N", &pairs.require("N")?)?;
    let sigma0: f64 = match pairs.take("sigma0") {
        Some(v) => parse_num("sigma0", &v)?,
        None => 1.0,
    };
    let grid_m: usize = match pairs.take("grid.m") {
        Some(v) => parse_num("grid.m", &v)?,
        None => ExperimentConfig::default_grid_m(d, big_d)?,
    };

    let theta0 = parse_field(&mut pairs, "theta0", true)?;

    let k: usize = parse_num("psi.count", &pairs.require("psi.count")?)?;
    if k == 0 {
        return Err(Error::Config("psi.count must be positive".into()));
    }
    let mut psis = Vec::with_capacity(k);
    for i in 1..=k {
        psis.push(parse_field(&mut pairs, &format!("psi.{i}"), false)?);
    }

    let mcmc = McmcSettings {
        steps: match pairs.take("mcmc.steps") {
            Some(v) => parse_num("mcmc.steps", &v)?,
            None => 20_000,
        },
        burnin: match pairs.take("mcmc.burnin") {
            Some(v) => parse_num("mcmc.burnin", &v)?,
            None => 5_000,
        },
        beta: match pairs.take("mcmc.beta") {
            Some(v) => parse_num("mcmc.beta", &v)?,
            None => 0.2,
        },
    };
    let cred_level: f64 = match pairs.take("cred.level") {
        Some(v) => parse_num("cred.level", &v)?,
        None => 0.9,
    };
    let cred_case = match pairs.take("cred.case").as_deref() {
        None | Some("1") => CredCase::One,
        Some("2") => CredCase::Two,
        Some(other) => {
            return Err(Error::Config(format!(
                "key `cred.case`: expected 1 or 2, got `{other}`"
            )))
        }
    };
    let replicates: usize = match pairs.take("coverage.replicates") {
        Some(v) => parse_num("coverage.replicates", &v)?,
        None => 100,
    };
    let seed: u64 = match pairs.take("seed") {
        Some(v) => parse_num("seed", &v)?,
        None => 0,
    };

    pairs.finish()?;

    let config = ExperimentConfig {
        model,
        d,
        big_d,
        alpha,
        sigma0,
        n,
        grid_m,
        theta0,
        psis,
        mcmc,
        cred_level,
        cred_case,
        replicates,
        seed,
    };
    config.validate()?;
    Ok(config)
}

fn field_lines(out: &mut String, prefix: &str, spec: &FieldSpec) {
    match spec {
        FieldSpec::Coeffs(c) => {
            out.push_str(&format!("{prefix}.kind = coeffs\n"));
            let list = c
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&format!("{prefix}.coeffs = {list}\n"));
        }
        FieldSpec::Bump => {
            out.push_str(&format!("{prefix}.kind = bump\n"));
        }
    }
}

/// Fixed-order textual form; `parse_config(canonical_text(c)) == c`.
pub fn canonical_text(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("model = {}\n", config.model));
    out.push_str(&format!("d = {}\n", config.d));
    out.push_str(&format!("D = {}\n", config.big_d));
    out.push_str(&format!("alpha = {}\n", config.alpha));
    out.push_str(&format!("sigma0 = {}\n", config.sigma0));
    out.push_str(&format!("N = {}\n", config.n));
    out.push_str(&format!("grid.m = {}\n", config.grid_m));
    out.push_str(&format!("seed = {}\n", config.seed));
    field_lines(&mut out, "theta0", &config.theta0);
    out.push_str(&format!("psi.count = {}\n", config.psis.len()));
    for (i, psi) in config.psis.iter().enumerate() {
        field_lines(&mut out, &format!("psi.{}", i + 1), psi);
    }
    out.push_str(&format!("mcmc.steps = {}\n", config.mcmc.steps));
    out.push_str(&format!("mcmc.burnin = {}\n", config.mcmc.burnin));
    out.push_str(&format!("mcmc.beta = {}\n", config.mcmc.beta));
    out.push_str(&format!("cred.level = {}\n", config.cred_level));
    out.push_str(&format!(
        "cred.case = {}\n",
        match config.cred_case {
            CredCase::One => 1,
            CredCase::Two => 2,
        }
    ));
    out.push_str(&format!("coverage.replicates = {}\n", config.replicates));
    out
}

//! Flat key=value run configuration.
//!
//! One setting per line, `key = value`, `#` starts a comment line. Every
//! key has a default except `problem`; unknown keys and malformed values
//! are reported with their line number. Command-line `--set key=value`
//! overrides are applied after the file, last one wins.

use anyhow::{anyhow, bail, Context, Result};
use fipinn::trainer::TrainConfig;

/// A fully resolved run: the benchmark name plus the training settings.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: String,
    pub train: TrainConfig,
}

/// Documented keys, in canonical emission order.
pub const CONFIG_KEYS: &[&str] = &[
    "problem",
    "method",
    "n_c",
    "n_b",
    "lambda_b",
    "eps_r",
    "eps_p",
    "t_max",
    "optimizer",
    "lr",
    "hidden_layers",
    "hidden_width",
    "first_layer_scale",
    "anneal.a",
    "anneal.b",
    "restart.window",
    "restart.delta",
    "restart.min_gap",
    "ss.p",
    "ss.width_frac",
    "ss.max_levels",
    "norm_samples",
    "snapshot_period",
    "seed",
];

/// Split a config file into (line number, key, value) triples.
pub fn parse_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`, got {line:?}"))?;
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() || value.is_empty() {
            bail!("line {line_no}: empty key or value in {line:?}");
        }
        out.push((line_no, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn set_key(spec: &mut RunSpec, key: &str, value: &str) -> Result<()> {
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        v.parse()
            .map_err(|e| anyhow!("key {key}: cannot parse {v:?} ({e})"))
    }
    let t = &mut spec.train;
    match key {
        "problem" => spec.problem = value.to_string(),
        "method" => t.method = value.parse()?,
        "n_c" => t.n_c = num(key, value)?,
        "n_b" => t.n_b = num(key, value)?,
        "lambda_b" => t.lambda_b = num(key, value)?,
        "eps_r" => t.eps_r = num(key, value)?,
        "eps_p" => t.eps_p = num(key, value)?,
        "t_max" => t.t_max = num(key, value)?,
        "optimizer" => t.optimizer = value.parse()?,
        "lr" => t.lr = num(key, value)?,
        "hidden_layers" => t.hidden_layers = num(key, value)?,
        "hidden_width" => t.hidden_width = num(key, value)?,
        "first_layer_scale" => t.first_layer_scale = num(key, value)?,
        "anneal.a" => t.anneal.a = num(key, value)?,
        "anneal.b" => t.anneal.b = num(key, value)?,
        "restart.window" => t.restart.window = num(key, value)?,
        "restart.delta" => t.restart.delta = num(key, value)?,
        "restart.min_gap" => t.restart.min_gap = num(key, value)?,
        "ss.p" => t.ss_p = num(key, value)?,
        "ss.width_frac" => t.ss_width_frac = num(key, value)?,
        "ss.max_levels" => t.ss_max_levels = num(key, value)?,
        "norm_samples" => t.norm_samples = num(key, value)?,
        "snapshot_period" => t.snapshot_period = num(key, value)?,
        "seed" => t.seed = num(key, value)?,
        other => bail!("unknown key {other:?}; known keys: {}", CONFIG_KEYS.join(", ")),
    }
    Ok(())
}

/// Build a run spec from file text and `--set` overrides.
pub fn build_spec(file_text: &str, overrides: &[String]) -> Result<RunSpec> {
    let mut spec = RunSpec {
        problem: String::new(),
        train: TrainConfig::defaults(fipinn::trainer::Method::Vanilla),
    };
    for (line_no, key, value) in parse_lines(file_text)? {
        set_key(&mut spec, &key, &value).with_context(|| format!("line {line_no}"))?;
    }
    for (i, ov) in overrides.iter().enumerate() {
        let (k, v) = ov
            .split_once('=')
            .ok_or_else(|| anyhow!("override {}: expected key=value, got {ov:?}", i + 1))?;
        set_key(&mut spec, k.trim(), v.trim()).with_context(|| format!("override {}", i + 1))?;
    }
    if spec.problem.is_empty() {
        bail!("config must set `problem` (multipeak2, multipeak4, wave1d or poisson10d)");
    }
    // fail fast, before any directory is created
    fipinn::problems::ProblemSpec::by_name(&spec.problem)?;
    spec.train = spec.train.clone().validated()?;
    Ok(spec)
}

/// Canonical `key = value` emission of every setting; this text is written
/// as `config.resolved` and is itself a valid config file.
pub fn canonical(spec: &RunSpec) -> String {
    let t = &spec.train;
    let mut s = String::new();
    for key in CONFIG_KEYS {
        let value = match *key {
            "problem" => spec.problem.clone(),
            "method" => t.method.as_str().to_string(),
            "n_c" => t.n_c.to_string(),
            "n_b" => t.n_b.to_string(),
            "lambda_b" => t.lambda_b.to_string(),
            "eps_r" => t.eps_r.to_string(),
            "eps_p" => t.eps_p.to_string(),
            "t_max" => t.t_max.to_string(),
            "optimizer" => t.optimizer.as_str().to_string(),
            "lr" => t.lr.to_string(),
            "hidden_layers" => t.hidden_layers.to_string(),
            "hidden_width" => t.hidden_width.to_string(),
            "first_layer_scale" => t.first_layer_scale.to_string(),
            "anneal.a" => t.anneal.a.to_string(),
            "anneal.b" => t.anneal.b.to_string(),
            "restart.window" => t.restart.window.to_string(),
            "restart.delta" => t.restart.delta.to_string(),
            "restart.min_gap" => t.restart.min_gap.to_string(),
            "ss.p" => t.ss_p.to_string(),
            "ss.width_frac" => t.ss_width_frac.to_string(),
            "ss.max_levels" => t.ss_max_levels.to_string(),
            "norm_samples" => t.norm_samples.to_string(),
            "snapshot_period" => t.snapshot_period.to_string(),
            "seed" => t.seed.to_string(),
            _ => unreachable!(),
        };
        s.push_str(key);
        s.push_str(" = ");
        s.push_str(&value);
        s.push('\n');
    }
    s
}

/// Eight hex digits identifying the configuration, seed excluded, so runs
/// that differ only in seed share a prefix and group together on disk.
pub fn config_hash8(spec: &RunSpec) -> String {
    let mut text = canonical(spec);
    if let Some(pos) = text.rfind("seed = ") {
        text.truncate(pos);
    }
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")[..8].to_string()
}

/// Directory name for one run.
pub fn run_dir_name(spec: &RunSpec) -> String {
    format!(
        "{}_{}_{}_s{}",
        spec.problem,
        spec.train.method.as_str(),
        config_hash8(spec),
        spec.train.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use fipinn::trainer::Method;

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = build_spec("problem = multipeak2\nmethod = vanilla\nt_max = 100\n", &[])
            .unwrap();
        assert_eq!(spec.problem, "multipeak2");
        assert_eq!(spec.train.method, Method::Vanilla);
        assert_eq!(spec.train.t_max, 100);
        assert_eq!(spec.train.n_c, 1000, "untouched default");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# a run\n\nproblem = wave1d\n  # indented comment\nseed = 9\n";
        let spec = build_spec(text, &[]).unwrap();
        assert_eq!(spec.problem, "wave1d");
        assert_eq!(spec.train.seed, 9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = build_spec("problem = multipeak2\nbogus = 1\n", &[]).unwrap_err();
        assert!(format!("{err:#}").contains("line 2"), "{err:#}");
        let err = build_spec("problem = multipeak2\nn_c = many\n", &[]).unwrap_err();
        assert!(format!("{err:#}").contains("line 2"), "{err:#}");
        let err = build_spec("problem multipeak2\n", &[]).unwrap_err();
        assert!(format!("{err:#}").contains("line 1"), "{err:#}");
    }

    #[test]
    fn overrides_win_over_the_file() {
        let spec = build_spec(
            "problem = multipeak2\nt_max = 100\n",
            &["t_max=7".into(), "method=r_fipinn".into()],
        )
        .unwrap();
        assert_eq!(spec.train.t_max, 7);
        assert_eq!(spec.train.method, Method::RFiPinn);
        let err = build_spec("problem = multipeak2\n", &["nope=1".into()]).unwrap_err();
        assert!(format!("{err:#}").contains("override 1"), "{err:#}");
    }

    #[test]
    fn missing_problem_or_invalid_values_are_rejected() {
        assert!(build_spec("method = vanilla\n", &[]).is_err());
        assert!(build_spec("problem = nosuch\n", &[]).is_err());
        assert!(build_spec("problem = multipeak2\nn_c = 0\n", &[]).is_err());
    }

    #[test]
    fn canonical_round_trips_and_hash_ignores_seed() {
        let a = build_spec("problem = multipeak2\nseed = 1\nlr = 0.005\n", &[]).unwrap();
        let again = build_spec(&canonical(&a), &[]).unwrap();
        assert_eq!(canonical(&a), canonical(&again));
        let b = build_spec("problem = multipeak2\nseed = 2\nlr = 0.005\n", &[]).unwrap();
        assert_eq!(config_hash8(&a), config_hash8(&b), "seed outside the hash");
        let c = build_spec("problem = multipeak2\nseed = 1\nlr = 0.004\n", &[]).unwrap();
        assert_ne!(config_hash8(&a), config_hash8(&c));
        assert_eq!(run_dir_name(&a), format!("multipeak2_vanilla_{}_s1", config_hash8(&a)));
    }
}

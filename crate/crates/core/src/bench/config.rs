//! Flat `key = value` experiment configuration.
//!
//! ```text
//! preset = heat
//! eps = 1e-4, 1e-6, 1e-8
//! delta = 1e-6
//! n_mc = 200
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are an error.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{ExperimentConfig, LevelRule, ModelSetup, Preset};
use crate::error::{Error, Result};
use crate::estimator::{LepskiConfig, LepskiGrid, ThetaRefPolicy};

/// Command-line overrides applied on top of a preset or config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub eps: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub n_mc: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub zero_noise: bool,
    pub level: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(e) = &self.eps {
            cfg.eps_grid = e.clone();
        }
        if let Some(d) = &self.delta {
            cfg.delta_grid = d.clone();
        }
        if let Some(n) = self.n_mc {
            cfg.n_mc = n;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(j) = self.level {
            cfg.level_rule = LevelRule::Fixed(j);
        }
        cfg.zero_noise |= self.zero_noise;
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// Parses a comma- or whitespace-separated list of positive reals.
pub fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>> {
    let vals = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<f64>(key, s))
        .collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        return Err(Error::Config(format!("{key}: empty grid")));
    }
    Ok(vals)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

fn preset_config(name: &str) -> Result<ExperimentConfig> {
    match name {
        "heat" => Ok(ExperimentConfig::heat_preset()),
        "deconv" => Ok(ExperimentConfig::deconv_preset()),
        "custom" => Ok(ExperimentConfig {
            preset: Preset::Custom,
            ..ExperimentConfig::heat_preset()
        }),
        _ => Err(Error::Config(format!("unknown preset {name:?}"))),
    }
}

fn lepski_mut(cfg: &mut ExperimentConfig) -> &mut LepskiConfig {
    if !matches!(cfg.level_rule, LevelRule::Lepski(_)) {
        cfg.level_rule = LevelRule::Lepski(LepskiConfig::deconvolution_default());
    }
    match &mut cfg.level_rule {
        LevelRule::Lepski(l) => l,
        _ => unreachable!(),
    }
}

/// Parses config text. The `preset` key, if present, must come first since
/// it resets every other field.
pub fn parse_config_str(text: &str, default_preset: Preset) -> Result<ExperimentConfig> {
    let mut cfg = preset_config(default_preset.name())?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "preset" => cfg = preset_config(value)?,
            "model" => {
                cfg.model = match value {
                    "heat" => ModelSetup::Heat {
                        t_time: 0.1,
                        theta0: 1.0,
                    },
                    "laplace" => ModelSetup::Laplace { h: 0.1 },
                    _ => return Err(Error::Config(format!("unknown model {value:?}"))),
                }
            }
            "t" => match &mut cfg.model {
                ModelSetup::Heat { t_time, .. } => *t_time = parse_num(key, value)?,
                _ => return Err(Error::Config("t only applies to the heat model".into())),
            },
            "theta0" => match &mut cfg.model {
                ModelSetup::Heat { theta0, .. } => *theta0 = parse_num(key, value)?,
                _ => {
                    return Err(Error::Config(
                        "theta0 only applies to the heat model".into(),
                    ))
                }
            },
            "h" => match &mut cfg.model {
                ModelSetup::Laplace { h } => *h = parse_num(key, value)?,
                _ => return Err(Error::Config("h only applies to the Laplace model".into())),
            },
            "eps" => cfg.eps_grid = parse_grid(key, value)?,
            "delta" => cfg.delta_grid = parse_grid(key, value)?,
            "n_mc" => cfg.n_mc = parse_num(key, value)?,
            "seed" => cfg.base_seed = parse_num(key, value)?,
            "tau_sq" => cfg.tau_sq = parse_num(key, value)?,
            "sigma_sq" => cfg.sigma_theta_sq = parse_num(key, value)?,
            "level" => {
                cfg.level_rule = match value {
                    "sqrt-log" => LevelRule::SqrtLogEps,
                    "lepski" => LevelRule::Lepski(LepskiConfig::deconvolution_default()),
                    v => LevelRule::Fixed(parse_num(key, v)?),
                }
            }
            "lepski_delta" => lepski_mut(&mut cfg).delta_tune = parse_num(key, value)?,
            "lepski_s0" => lepski_mut(&mut cfg).s0 = parse_num(key, value)?,
            "lepski_t" => lepski_mut(&mut cfg).t_ill = parse_num(key, value)?,
            "lepski_d" => lepski_mut(&mut cfg).dim_d = parse_num(key, value)?,
            "lepski_b" => lepski_mut(&mut cfg).b = parse_num(key, value)?,
            "lepski_exponent" => {
                lepski_mut(&mut cfg).exponent_override = Some(parse_num(key, value)?)
            }
            "lepski_grid" => {
                lepski_mut(&mut cfg).grid = match value {
                    "dyadic" => LepskiGrid::Dyadic,
                    "geometric" => LepskiGrid::Geometric,
                    _ => return Err(Error::Config(format!("unknown Lepski grid {value:?}"))),
                }
            }
            "burn_in" => cfg.burn_in = parse_num(key, value)?,
            "n_keep" => cfg.n_keep = parse_num(key, value)?,
            "thin" => cfg.thin = parse_num(key, value)?,
            "proposal_scale" => cfg.proposal_scale = parse_num(key, value)?,
            "adapt" => cfg.adapt_proposal = parse_bool(key, value)?,
            "galerkin_tau" => cfg.galerkin.tau = parse_num(key, value)?,
            "zero_noise" => cfg.zero_noise = parse_bool(key, value)?,
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            "plot_draws" => cfg.n_plot_draws = parse_num(key, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, default_preset: Preset) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, default_preset)
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders a configuration in the format accepted by [`parse_config_str`].
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut lines = vec![format!("preset = {}", cfg.preset.name())];
    match cfg.model {
        ModelSetup::Heat { t_time, theta0 } => {
            lines.push("model = heat".into());
            lines.push(format!("t = {t_time:?}"));
            lines.push(format!("theta0 = {theta0:?}"));
        }
        ModelSetup::Laplace { h } => {
            lines.push("model = laplace".into());
            lines.push(format!("h = {h:?}"));
        }
    }
    lines.push(format!("eps = {}", join(&cfg.eps_grid)));
    lines.push(format!("delta = {}", join(&cfg.delta_grid)));
    lines.push(format!("n_mc = {}", cfg.n_mc));
    lines.push(format!("seed = {}", cfg.base_seed));
    lines.push(format!("tau_sq = {:?}", cfg.tau_sq));
    lines.push(format!("sigma_sq = {:?}", cfg.sigma_theta_sq));
    match &cfg.level_rule {
        LevelRule::SqrtLogEps => lines.push("level = sqrt-log".into()),
        LevelRule::Fixed(j) => lines.push(format!("level = {j}")),
        LevelRule::Lepski(l) => {
            lines.push("level = lepski".into());
            lines.push(format!("lepski_delta = {:?}", l.delta_tune));
            lines.push(format!("lepski_s0 = {:?}", l.s0));
            lines.push(format!("lepski_t = {:?}", l.t_ill));
            lines.push(format!("lepski_d = {}", l.dim_d));
            lines.push(format!("lepski_b = {:?}", l.b));
            if let Some(e) = l.exponent_override {
                lines.push(format!("lepski_exponent = {e:?}"));
            }
            let grid = match l.grid {
                LepskiGrid::Dyadic => "dyadic",
                LepskiGrid::Geometric => "geometric",
            };
            lines.push(format!("lepski_grid = {grid}"));
        }
    }
    lines.push(format!("burn_in = {}", cfg.burn_in));
    lines.push(format!("n_keep = {}", cfg.n_keep));
    lines.push(format!("thin = {}", cfg.thin));
    lines.push(format!("proposal_scale = {:?}", cfg.proposal_scale));
    lines.push(format!("adapt = {}", cfg.adapt_proposal));
    lines.push(format!("galerkin_tau = {:?}", cfg.galerkin.tau));
    if let ThetaRefPolicy::Fixed(_) = cfg.galerkin.theta_ref {
        lines.push("# galerkin reference: fixed (not expressible here)".into());
    }
    lines.push(format!("zero_noise = {}", cfg.zero_noise));
    lines.push(format!("output_dir = {}", cfg.output_dir.display()));
    lines.push(format!("plot_draws = {}", cfg.n_plot_draws));
    lines.join("\n") + "\n"
}

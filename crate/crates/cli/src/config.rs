//! Flat TOML configuration merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use topotransfer::lattice::{DisorderKind, LatticeSpec, ModelKind};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Cl,
    Runged,
    Ssh,
    Chain,
    Ladder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Lr,
    Ls,
    Trivial,
    Superposition,
    Prepare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Disorder {
    None,
    SymmetryPreserving,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Series {
    Single,
    Two,
    FixedEll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Right,
    Left,
}

/// Every knob of every command. Unset fields fall back to the defaults of
/// the command that reads them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Model family.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Number of domains.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Inner rungs (sites) per domain.
    #[arg(long)]
    pub ell: Option<usize>,
    /// Total length of a trivial chain or ladder.
    #[arg(long)]
    pub length: Option<usize>,

    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    /// Uniform transfer control (imbalance, rung hopping or weak SSH bond).
    #[arg(long = "eps-tr")]
    pub eps_tr: Option<f64>,
    /// Peak control of every domain, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub controls: Option<Vec<f64>>,
    #[arg(long = "t-prep")]
    pub t_prep: Option<f64>,
    #[arg(long = "t-tr")]
    pub t_tr: Option<f64>,
    /// Scan for the shortest transfer time reaching `f0`.
    #[arg(long = "auto-time", num_args = 0..=1, default_missing_value = "true")]
    pub auto_time: Option<bool>,
    #[arg(long)]
    pub f0: Option<f64>,
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,

    /// Target wall of an L-to-S transfer.
    #[arg(long)]
    pub wall: Option<usize>,
    #[arg(long = "eps-bar")]
    pub eps_bar: Option<f64>,
    #[arg(long = "barrier-prep")]
    pub barrier_prep: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<Side>,
    /// Well depth of the trivial protocols.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Rung (or site) of a state preparation.
    #[arg(long)]
    pub site: Option<usize>,
    /// Leg of a state preparation: `a` or `b`.
    #[arg(long)]
    pub leg: Option<String>,
    #[arg(long = "ramp-time")]
    pub ramp_time: Option<f64>,

    #[arg(long, value_enum)]
    pub kind: Option<Disorder>,
    #[arg(long = "delta-j")]
    pub delta_j: Option<f64>,
    #[arg(long = "delta-mu")]
    pub delta_mu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disorder levels as `start:stop:count` or a comma separated list.
    #[arg(long)]
    pub levels: Option<String>,
    /// Realizations per level.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,

    #[arg(long, value_enum)]
    pub series: Option<Series>,
    #[arg(long = "n-min")]
    pub n_min: Option<usize>,
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,

    /// Outer control held fixed by the optimizer.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Tie every inner control of the optimizer to one value.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub tie: Option<bool>,

    /// State label for `states`: L, R, S<k>, P<k>.
    #[arg(long)]
    pub state: Option<String>,

    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// `top` wins wherever it is set.
    pub fn merged(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            model,
            n,
            ell,
            length,
            protocol,
            eps_tr,
            controls,
            t_prep,
            t_tr,
            auto_time,
            f0,
            t_max,
            dt,
            wall,
            eps_bar,
            barrier_prep,
            side,
            mu0,
            site,
            leg,
            ramp_time,
            kind,
            delta_j,
            delta_mu,
            seed,
            levels,
            m,
            series,
            n_min,
            n_max,
            c1,
            tie,
            state,
            record_every,
            output,
            format,
        );
        self
    }

    pub fn model(&self) -> Model {
        self.model.unwrap_or(Model::Cl)
    }

    pub fn model_kind(&self) -> ModelKind {
        match self.model() {
            Model::Cl => ModelKind::CreutzImbalanced,
            Model::Runged => ModelKind::CreutzRunged,
            Model::Ssh => ModelKind::Ssh,
            Model::Chain => ModelKind::TrivialChain,
            Model::Ladder => ModelKind::TrivialLadder,
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec, CliError> {
        let spec = match self.model() {
            Model::Chain => LatticeSpec::trivial_chain(self.length.unwrap_or(13)),
            Model::Ladder => LatticeSpec::trivial_ladder(self.length.unwrap_or(13)),
            _ => LatticeSpec::new(self.model_kind(), self.n.unwrap_or(2), self.ell.unwrap_or(4)),
        };
        Ok(spec?)
    }

    pub fn is_ssh(&self) -> bool {
        self.model() == Model::Ssh
    }

    pub fn t_prep(&self) -> f64 {
        self.t_prep.unwrap_or(if self.is_ssh() { 15.0 } else { 30.0 })
    }

    pub fn f0(&self) -> f64 {
        self.f0.unwrap_or(0.995)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.1)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(20_000.0)
    }

    pub fn mu0(&self) -> f64 {
        self.mu0.unwrap_or(10.0)
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_bar.unwrap_or(20.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    /// Per-domain peak controls: explicit list, else the uniform `eps_tr`
    /// (default 1 for ladders, 0.5 for SSH).
    pub fn peaks(&self, domains: usize) -> Result<Vec<f64>, CliError> {
        if let Some(c) = &self.controls {
            if c.len() != domains {
                return Err(CliError::Config(format!(
                    "{} controls given for {domains} domains",
                    c.len()
                )));
            }
            return Ok(c.clone());
        }
        let eps = self.eps_tr.unwrap_or(if self.is_ssh() { 0.5 } else { 1.0 });
        Ok(vec![eps; domains])
    }

    pub fn disorder_kind(&self) -> DisorderKind {
        match self.kind.unwrap_or(Disorder::None) {
            Disorder::None => DisorderKind::None,
            Disorder::SymmetryPreserving => DisorderKind::SymmetryPreserving,
            Disorder::General => DisorderKind::General,
        }
    }

    pub fn levels(&self) -> Result<Vec<f64>, CliError> {
        parse_levels(self.levels.as_deref().unwrap_or("0:0.2:9"))
    }
}

/// `start:stop:count` (inclusive, evenly spaced) or `a,b,c`.
pub fn parse_levels(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse levels `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return match count {
            0 => Err(bad()),
            1 => Ok(vec![start]),
            _ => Ok((0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect()),
        };
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("ell = 4\nbogus = 1\n").is_err());
        let c = RunConfig::from_toml("model = \"ssh\"\nN = 4\nell = 2\nM = 10\n").unwrap();
        assert_eq!(c.model, Some(Model::Ssh));
        assert_eq!(c.n, Some(4));
        assert_eq!(c.m, Some(10));
    }

    #[test]
    fn flags_win() {
        let file = RunConfig::from_toml("ell = 4\nt_prep = 20.0\n").unwrap();
        let flags = RunConfig {
            ell: Some(6),
            ..Default::default()
        };
        let c = file.merged(&flags);
        assert_eq!(c.ell, Some(6));
        assert_eq!(c.t_prep, Some(20.0));
    }

    #[test]
    fn level_ranges() {
        let l = parse_levels("0:0.2:9").unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(l[0], 0.0);
        assert!((l[8] - 0.2).abs() < 1e-15);
        assert!((l[4] - 0.1).abs() < 1e-15);
        assert_eq!(parse_levels("0.05, 0.1").unwrap(), vec![0.05, 0.1]);
        assert!(parse_levels("0:1").is_err());
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn defaults_follow_model() {
        let c = RunConfig {
            model: Some(Model::Ssh),
            ..Default::default()
        };
        assert_eq!(c.t_prep(), 15.0);
        assert_eq!(c.peaks(2).unwrap(), vec![0.5, 0.5]);
        assert!(RunConfig::default().peaks(3).is_ok());
        let bad = RunConfig {
            controls: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(bad.peaks(2).is_err());
    }
}

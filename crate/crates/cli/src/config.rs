//! Experiment configuration: TOML schema, per-kind defaults and validation.

use std::fmt;
use std::str::FromStr;

use kickedtop::chain::{PairSum, MAX_DIAGONALIZATION_SITES};
use kickedtop::floquet::TrotterVariant;
use kickedtop::otoc::DEFAULT_PHI;
use serde::{Deserialize, Serialize};

/// Largest Hilbert-space dimension the CLI accepts.
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ThresholdSweep,
    Spectrum,
    Otoc,
    Poincare,
    ChainMap,
    Twodesign,
    RandomizedOtoc,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ThresholdSweep,
        ExperimentKind::Spectrum,
        ExperimentKind::Otoc,
        ExperimentKind::Poincare,
        ExperimentKind::ChainMap,
        ExperimentKind::Twodesign,
        ExperimentKind::RandomizedOtoc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ThresholdSweep => "threshold-sweep",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Otoc => "otoc",
            ExperimentKind::Poincare => "poincare",
            ExperimentKind::ChainMap => "chain-map",
            ExperimentKind::Twodesign => "twodesign",
            ExperimentKind::RandomizedOtoc => "randomized-otoc",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, ExperimentKind::Twodesign | ExperimentKind::RandomizedOtoc)
    }

    /// File stem shared by the CSV and the JSON sidecar.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopConfig {
    pub spin: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub j_x: f64,
    pub j_z: f64,
    pub variant: TrotterVariant,
}

impl TopConfig {
    fn standard(spin: f64) -> Self {
        TopConfig { spin, h_x: 0.1, h_z: 0.3, j_x: 0.7, j_z: 1.0, variant: TrotterVariant::First }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub taus: Vec<f64>,
    /// Time horizon `J_z t`; used by the time-series experiments only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

/// Coherent initial state `|θ, φ⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtocConfig {
    /// Angle of `V = e^{-iφS_z}`; `W = S_z`.
    pub phi: f64,
    /// Fit an exponential growth rate to each series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    pub h_x: f64,
    pub j_z: f64,
    pub pairs: PairSum,
    pub alphas: Vec<f64>,
    pub periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwodesignConfig {
    pub spin: f64,
    pub size: usize,
    pub etas: Vec<usize>,
    pub quench_tau: f64,
    pub cue_repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizedConfig {
    pub n_unitaries: usize,
    pub eta: usize,
    pub quench_tau: f64,
}

/// A fully resolved experiment. Sections that do not apply to `kind` are
/// absent; [`ExperimentConfig::defaults`] fills in every section that does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; `0` means all available cores.
    pub threads: usize,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<TopConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otoc: Option<OtocConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poincare: Option<PoincareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twodesign: Option<TwodesignConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randomized: Option<RandomizedConfig>,
}

fn linspace(start: f64, step: f64, count: usize) -> Vec<f64> {
    // rounded so the grid prints as typed
    (0..count).map(|k| ((start + step * k as f64) * 1e9).round() / 1e9).collect()
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            seed: None,
            threads: 0,
            output: "out".into(),
            top: None,
            grid: None,
            state: None,
            otoc: None,
            poincare: None,
            chain: None,
            twodesign: None,
            randomized: None,
        };
        match kind {
            ExperimentKind::ThresholdSweep => {
                c.top = Some(TopConfig::standard(50.0));
                c.grid = Some(GridConfig { taus: linspace(0.05, 0.05, 80), horizon: Some(200.0) });
                c.state = Some(StateConfig { theta: 0.0, phi: 0.0 });
            }
            ExperimentKind::Spectrum => {
                c.top = Some(TopConfig::standard(128.0));
                c.grid = Some(GridConfig { taus: linspace(0.25, 0.25, 16), horizon: None });
            }
            ExperimentKind::Otoc => {
                c.top = Some(TopConfig::standard(128.0));
                c.grid = Some(GridConfig { taus: vec![0.25, 0.73, 1.0, 3.0], horizon: Some(40.0) });
                c.otoc = Some(OtocConfig { phi: DEFAULT_PHI, fit: Some(true) });
            }
            ExperimentKind::Poincare => {
                c.top = Some(TopConfig::standard(1.0e3));
                c.grid = Some(GridConfig { taus: vec![0.25, 0.75, 1.5], horizon: None });
                c.poincare = Some(PoincareConfig { n_theta: 32, n_phi: 32, iterations: 500 });
            }
            ExperimentKind::ChainMap => {
                c.grid = Some(GridConfig { taus: vec![0.5, 1.5, 2.5, 3.5], horizon: None });
                c.chain = Some(ChainConfig {
                    n: 8,
                    h_x: 0.25,
                    j_z: 1.0,
                    pairs: PairSum::Ordered,
                    alphas: vec![0.5, 1.5, 3.0],
                    periods: 2000,
                });
            }
            ExperimentKind::Twodesign => {
                c.twodesign = Some(TwodesignConfig { spin: 16.0, size: 500, etas: vec![1, 2, 5, 10, 20], quench_tau: 1.0, cue_repetitions: 10 });
            }
            ExperimentKind::RandomizedOtoc => {
                c.top = Some(TopConfig::standard(64.0));
                c.grid = Some(GridConfig { taus: vec![1.0], horizon: Some(20.0) });
                c.state = Some(StateConfig { theta: 0.0, phi: 0.0 });
                c.otoc = Some(OtocConfig { phi: DEFAULT_PHI, fit: None });
                c.randomized = Some(RandomizedConfig { n_unitaries: 100, eta: 5, quench_tau: 1.0 });
            }
        }
        c
    }

    /// Default configuration as TOML, with a note on the seed for stochastic kinds.
    pub fn defaults_toml(kind: ExperimentKind) -> String {
        let body = toml::to_string(&ExperimentConfig::defaults(kind)).expect("defaults serialize");
        if kind.is_stochastic() {
            format!("# seed is required: set `seed = <u64>` here or pass --seed\n{body}")
        } else {
            body
        }
    }

    /// Parses a user file on top of the defaults of `kind`. Keys the user
    /// sets replace the default value; unknown keys and sections that do not
    /// belong to `kind` are rejected.
    pub fn from_toml(kind: ExperimentKind, text: &str) -> Result<Self, String> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| format!("config is not valid TOML: {e}"))?;
        if let Some(k) = user.get("kind") {
            let named = k.as_str().ok_or("`kind` must be a string")?;
            if named != kind.name() {
                return Err(format!("config is for `{named}` but the subcommand is `{kind}`"));
            }
        }
        let mut base = toml::Table::try_from(ExperimentConfig::defaults(kind)).expect("defaults serialize");
        for (key, value) in user {
            match (base.get_mut(&key), value) {
                (Some(toml::Value::Table(b)), toml::Value::Table(u)) => {
                    for (k, v) in u {
                        b.insert(k, v);
                    }
                }
                (Some(_), toml::Value::Table(_)) => return Err(format!("`{key}` is not a section")),
                (Some(slot), v) => *slot = v,
                (None, v) => {
                    if matches!(v, toml::Value::Table(_)) {
                        return Err(format!("section [{key}] does not apply to {kind}"));
                    }
                    base.insert(key, v);
                }
            }
        }
        let cfg: ExperimentConfig = toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| format!("invalid config: {e}"))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let kind = self.kind;
        if kind.is_stochastic() && self.seed.is_none() {
            return Err(format!("{kind} is stochastic: a seed is required (config `seed` or --seed)"));
        }
        if self.output.trim().is_empty() {
            return Err("output directory must not be empty".into());
        }
        if let Some(t) = &self.top {
            check_spin(t.spin)?;
            for (name, v) in [("h_x", t.h_x), ("h_z", t.h_z), ("j_x", t.j_x), ("j_z", t.j_z)] {
                if !v.is_finite() {
                    return Err(format!("top.{name} must be finite"));
                }
            }
        }
        if let Some(g) = &self.grid {
            if g.taus.is_empty() {
                return Err("grid.taus must not be empty".into());
            }
            if let Some(t) = g.taus.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
                return Err(format!("grid.taus must be positive and finite, got {t}"));
            }
            match (needs_horizon(kind), g.horizon) {
                (true, None) => return Err(format!("{kind} needs grid.horizon")),
                (true, Some(h)) if !(h > 0.0) || !h.is_finite() => return Err(format!("grid.horizon must be positive, got {h}")),
                (false, Some(_)) => return Err(format!("grid.horizon does not apply to {kind}")),
                _ => {}
            }
            if needs_horizon(kind) {
                let h = g.horizon.unwrap();
                if let Some(t) = g.taus.iter().find(|&&t| t > h) {
                    return Err(format!("tau {t} exceeds the horizon {h}"));
                }
            }
        }
        if let Some(s) = &self.state {
            if !s.theta.is_finite() || !s.phi.is_finite() {
                return Err("state angles must be finite".into());
            }
        }
        if let Some(o) = &self.otoc {
            if !o.phi.is_finite() || o.phi == 0.0 {
                return Err("otoc.phi must be finite and nonzero".into());
            }
            if o.fit.is_some() && kind != ExperimentKind::Otoc {
                return Err(format!("otoc.fit does not apply to {kind}"));
            }
        }
        if let Some(p) = &self.poincare {
            if p.n_theta == 0 || p.n_phi == 0 || p.iterations == 0 {
                return Err("poincare grid sizes and iterations must be at least 1".into());
            }
        }
        if let Some(c) = &self.chain {
            if c.n < 2 {
                return Err(format!("chain.n must be at least 2, got {}", c.n));
            }
            if c.n > MAX_DIAGONALIZATION_SITES {
                return Err(format!("chain.n = {} exceeds the limit {MAX_DIAGONALIZATION_SITES}", c.n));
            }
            if c.alphas.is_empty() {
                return Err("chain.alphas must not be empty".into());
            }
            if c.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                return Err("chain.alphas must be finite and >= 0".into());
            }
            if c.periods == 0 {
                return Err("chain.periods must be at least 1".into());
            }
            if !c.h_x.is_finite() || !c.j_z.is_finite() {
                return Err("chain couplings must be finite".into());
            }
        }
        if let Some(t) = &self.twodesign {
            check_spin(t.spin)?;
            if t.size == 0 || t.cue_repetitions < 2 {
                return Err("twodesign.size must be >= 1 and cue_repetitions >= 2".into());
            }
            if t.etas.is_empty() || t.etas.contains(&0) {
                return Err("twodesign.etas must be a nonempty list of positive integers".into());
            }
            if !(t.quench_tau > 0.0) || !t.quench_tau.is_finite() {
                return Err("twodesign.quench_tau must be positive".into());
            }
        }
        if let Some(r) = &self.randomized {
            if r.n_unitaries == 0 || r.eta == 0 {
                return Err("randomized.n_unitaries and randomized.eta must be at least 1".into());
            }
            if !(r.quench_tau > 0.0) || !r.quench_tau.is_finite() {
                return Err("randomized.quench_tau must be positive".into());
            }
        }
        if kind == ExperimentKind::RandomizedOtoc {
            if self.grid.as_ref().is_some_and(|g| g.taus.len() != 1) {
                return Err("randomized-otoc takes exactly one tau".into());
            }
            if self.top.as_ref().is_some_and(|t| t.variant != TrotterVariant::First) {
                return Err("randomized-otoc supports the first-order variant only".into());
            }
        }
        let expected = ExperimentConfig::defaults(kind);
        let present = |a: bool, b: bool, name: &str| -> Result<(), String> {
            if a != b {
                Err(format!("section [{name}] is {} for {kind}", if b { "required" } else { "not used" }))
            } else {
                Ok(())
            }
        };
        present(self.top.is_some(), expected.top.is_some(), "top")?;
        present(self.grid.is_some(), expected.grid.is_some(), "grid")?;
        present(self.state.is_some(), expected.state.is_some(), "state")?;
        present(self.otoc.is_some(), expected.otoc.is_some(), "otoc")?;
        present(self.poincare.is_some(), expected.poincare.is_some(), "poincare")?;
        present(self.chain.is_some(), expected.chain.is_some(), "chain")?;
        present(self.twodesign.is_some(), expected.twodesign.is_some(), "twodesign")?;
        present(self.randomized.is_some(), expected.randomized.is_some(), "randomized")?;
        Ok(())
    }
}

fn needs_horizon(kind: ExperimentKind) -> bool {
    matches!(kind, ExperimentKind::ThresholdSweep | ExperimentKind::Otoc | ExperimentKind::RandomizedOtoc)
}

fn check_spin(s: f64) -> Result<(), String> {
    if !(s > 0.0) || (2.0 * s).fract() != 0.0 {
        return Err(format!("spin must be a positive multiple of 1/2, got {s}"));
    }
    let d = (2.0 * s) as usize + 1;
    if d > MAX_DIM {
        return Err(format!("spin {s} gives D = {d}, above the limit {MAX_DIM}"));
    }
    Ok(())
}

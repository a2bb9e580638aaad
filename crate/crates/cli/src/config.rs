//! Run configuration: TOML with every key optional, unknown keys rejected,
//! and a canonical serialization that is hashed into the run manifest.

use std::path::Path;

use mfgl_core::beliefs::{LearningRule, PlmFamily, PriceChart};
use mfgl_core::{IncomeProcess, ModelParams};
use mfgl_discrete::{DiscreteModel, MarkovRewardProcess, PriceMap, Quadratic, TieBreak};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub grid: GridSection,
    pub equilibrium: EquilibriumSection,
    pub transition: TransitionSection,
    pub temporary: TemporarySection,
    pub common_noise: CommonNoiseSection,
    pub discrete: DiscreteSection,
    pub mrp: MrpSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model: ModelSection::default(),
            grid: GridSection::default(),
            equilibrium: EquilibriumSection::default(),
            transition: TransitionSection::default(),
            temporary: TemporarySection::default(),
            common_noise: CommonNoiseSection::default(),
            discrete: DiscreteSection::default(),
            mrp: MrpSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub rho: f64,
    /// CRRA curvature.
    pub gamma: f64,
    pub nu: f64,
    pub beta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub production_scale: f64,
    pub income: IncomeSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default_calibration();
        ModelSection {
            rho: p.rho,
            gamma: p.crra,
            nu: p.nu,
            beta: p.beta,
            dt: p.dt,
            horizon: p.horizon,
            production_scale: p.production_scale,
            income: IncomeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncomeSection {
    TwoState {
        y_lo: f64,
        y_hi: f64,
        rate_up: f64,
        rate_down: f64,
    },
    Ou {
        mean_reversion: f64,
        long_run_mean: f64,
        intensity: f64,
        lower: f64,
        upper: f64,
        n_nodes: usize,
    },
}

impl Default for IncomeSection {
    fn default() -> Self {
        IncomeSection::TwoState {
            y_lo: 0.5,
            y_hi: 1.5,
            rate_up: 0.25,
            rate_down: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_wealth: usize,
    pub a_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n_wealth: 200,
            a_max: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSection {
    pub capital_tolerance: f64,
    pub max_bisections: usize,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        EquilibriumSection {
            capital_tolerance: 1e-13,
            max_bisections: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionSection {
    pub steps: usize,
    pub tolerance: f64,
    pub damping: f64,
    pub max_iter: usize,
    /// The initial density moves mass from wealth node `i` to
    /// `floor(i·wealth_scale)`.
    pub wealth_scale: f64,
}

impl Default for TransitionSection {
    fn default() -> Self {
        TransitionSection {
            steps: 100,
            tolerance: 1e-10,
            damping: 0.1,
            max_iter: 2000,
            wealth_scale: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PredictorKind {
    PerfectForesight,
    ConstantCurrent,
    AdaptiveLevel,
    Plm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum RuleKind {
    Frozen,
    DecreasingGain,
    ConstantGain,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Independent,
    RateFrontier,
}

impl ChartKind {
    pub fn chart(self) -> PriceChart {
        match self {
            ChartKind::Independent => PriceChart::Independent,
            ChartKind::RateFrontier => PriceChart::RateFrontier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Linear,
    Anchored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporarySection {
    pub predictor: PredictorKind,
    pub rule: RuleKind,
    pub chart: ChartKind,
    pub family: FamilyKind,
    /// Speed of the anchored PLM.
    pub speed: f64,
    pub gain: f64,
    pub t0: f64,
    pub regularization: f64,
    /// Initial beliefs; empty means "consistent with the stationary price,
    /// scaled by `theta0_scale`".
    pub theta0: Vec<f64>,
    pub theta0_scale: f64,
    pub steps: usize,
    pub inner_stride: usize,
    /// Half-width of the clipping box around the stationary price.
    pub price_box: f64,
    /// Recovery sup-norm below which the perfect-foresight run passes.
    pub recovery_threshold: f64,
}

impl Default for TemporarySection {
    fn default() -> Self {
        TemporarySection {
            predictor: PredictorKind::PerfectForesight,
            rule: RuleKind::Frozen,
            chart: ChartKind::Independent,
            family: FamilyKind::Anchored,
            speed: 0.5,
            gain: 0.1,
            t0: 1.0,
            regularization: 1e-8,
            theta0: Vec::new(),
            theta0_scale: 1.1,
            steps: 100,
            inner_stride: 1,
            price_box: 0.5,
            recovery_threshold: 1e-6,
        }
    }
}

impl TemporarySection {
    pub fn rule(&self) -> LearningRule {
        rule_from(self.rule, self.gain, self.t0, self.regularization)
    }

    pub fn plm_family(&self) -> PlmFamily {
        match self.family {
            FamilyKind::Linear => PlmFamily::Linear { with_z: false },
            FamilyKind::Anchored => PlmFamily::Anchored {
                speed: self.speed,
                z_loading: 0.0,
            },
        }
    }
}

pub fn rule_from(kind: RuleKind, gain: f64, t0: f64, regularization: f64) -> LearningRule {
    match kind {
        RuleKind::Frozen => LearningRule::Frozen,
        RuleKind::DecreasingGain => LearningRule::DecreasingGain { t0 },
        RuleKind::ConstantGain => LearningRule::ConstantGain { gain },
        RuleKind::LeastSquares => LearningRule::RecursiveLeastSquares { regularization },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommonNoiseSection {
    pub steps: usize,
    /// Time step of the simulation (overrides `model.dt`).
    pub dt: f64,
    /// Aggregate noise intensity (overrides `model.beta`).
    pub beta: f64,
    pub gain: f64,
    pub speed: f64,
    pub theta0_scale: f64,
    pub z0: f64,
    pub cache_threshold: f64,
    pub price_nodes: usize,
    pub price_span: f64,
    pub z_nodes: usize,
    pub z_width_sd: f64,
    pub stride: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for CommonNoiseSection {
    fn default() -> Self {
        CommonNoiseSection {
            steps: 500,
            dt: 0.2,
            beta: 5e-5,
            gain: 0.2,
            speed: 0.5,
            theta0_scale: 1.1,
            z0: 0.0,
            cache_threshold: 0.01,
            price_nodes: 21,
            price_span: 0.3,
            z_nodes: 11,
            z_width_sd: 3.0,
            stride: 25,
            tolerance: 1e-11,
            max_sweeps: 1000,
        }
    }
}

/// Finite model tables. Quadratics are `[c0, c1, c2]` in the price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscreteSection {
    pub n_x: usize,
    pub n_act: usize,
    pub n_z: usize,
    pub tz: Vec<Vec<f64>>,
    /// `tx[z][a][x][x′]`.
    pub tx: Vec<Vec<Vec<Vec<f64>>>>,
    /// `reward[x][z][a]`.
    pub reward: Vec<Vec<Vec<[f64; 3]>>>,
    /// `terminal[x][z]`.
    pub terminal: Vec<Vec<[f64; 3]>>,
    pub discount: f64,
    pub price_intercept: Vec<f64>,
    pub price_loadings: Vec<Vec<f64>>,
    pub horizon: usize,
    pub m0: Vec<f64>,
    pub z0: usize,
    pub ties: TieKind,
    pub master: MasterSection,
    pub learning: DiscreteLearningSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieKind {
    LowestIndex,
    Uniform,
}

impl Default for DiscreteSection {
    fn default() -> Self {
        DiscreteSection {
            n_x: 2,
            n_act: 2,
            n_z: 2,
            tz: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            tx: vec![
                vec![
                    vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                    vec![vec![0.25, 0.75], vec![0.65, 0.35]],
                ],
                vec![
                    vec![vec![0.7, 0.3], vec![0.2, 0.8]],
                    vec![vec![0.4, 0.6], vec![0.9, 0.1]],
                ],
            ],
            reward: vec![
                vec![
                    vec![[0.0, 1.0, -0.5], [0.1, -0.5, 0.0]],
                    vec![[0.2, 0.8, -0.3], [-0.1, 0.0, 0.4]],
                ],
                vec![
                    vec![[0.3, -1.0, 0.2], [0.0, 0.5, 0.5]],
                    vec![[-0.2, 1.2, 0.0], [0.4, -0.2, -0.6]],
                ],
            ],
            terminal: vec![
                vec![[0.0, 1.0, 0.5], [0.1, 0.0, -0.4]],
                vec![[0.5, -0.5, 0.3], [0.0, 0.3, 0.2]],
            ],
            discount: 0.9,
            price_intercept: vec![0.5, 1.0],
            price_loadings: vec![vec![0.0, 1.0], vec![0.4, -0.6]],
            horizon: 3,
            m0: vec![0.35, 0.65],
            z0: 0,
            ties: TieKind::LowestIndex,
            master: MasterSection::default(),
            learning: DiscreteLearningSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MasterSection {
    pub resolution: usize,
    /// Interpolation error above which a warning is recorded; 0 disables
    /// the coarse companion solve.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for MasterSection {
    fn default() -> Self {
        MasterSection {
            resolution: 101,
            tolerance: 1e-3,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastKind {
    ConstantCurrent,
    Level,
    Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscreteLearningSection {
    pub periods: usize,
    pub forecast: ForecastKind,
    pub rule: RuleKind,
    pub gain: f64,
    pub t0: f64,
    pub regularization: f64,
    pub sigma: f64,
    pub theta0: Vec<f64>,
    pub price_nodes: usize,
    pub pilot_periods: usize,
    pub cache_threshold: f64,
}

impl Default for DiscreteLearningSection {
    fn default() -> Self {
        DiscreteLearningSection {
            periods: 200,
            forecast: ForecastKind::Level,
            rule: RuleKind::DecreasingGain,
            gain: 0.1,
            t0: 1.0,
            regularization: 1e-6,
            sigma: 0.1,
            theta0: vec![0.8],
            price_nodes: 15,
            pilot_periods: 200,
            cache_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MrpSection {
    pub n_x: usize,
    pub n_z: usize,
    pub tz: Vec<Vec<f64>>,
    /// `a[z][x][x′]`.
    pub a: Vec<Vec<Vec<f64>>>,
    pub price_intercept: Vec<f64>,
    pub price_loadings: Vec<Vec<f64>>,
    /// `reward[x][z]`.
    pub reward: Vec<Vec<[f64; 3]>>,
    pub terminal: Vec<Vec<[f64; 3]>>,
    pub discount: f64,
    pub horizon: usize,
    /// Initial measures at which values are reported.
    pub m0: Vec<Vec<f64>>,
    pub resolution: usize,
    pub mc_paths: usize,
}

impl Default for MrpSection {
    fn default() -> Self {
        MrpSection {
            n_x: 2,
            n_z: 2,
            tz: vec![vec![0.6, 0.4], vec![0.3, 0.7]],
            a: vec![
                vec![vec![0.7, 0.3], vec![0.4, 0.6]],
                vec![vec![0.2, 0.8], vec![0.9, 0.1]],
            ],
            price_intercept: vec![1.0, 0.5],
            price_loadings: vec![vec![0.0, 2.0], vec![1.0, -0.5]],
            reward: vec![
                vec![[0.0, 1.0, 3.0], [0.5, -1.0, 2.0]],
                vec![[1.0, 0.5, -1.5], [0.0, 2.0, 1.0]],
            ],
            terminal: vec![
                vec![[0.0, 1.0, 1.0], [0.2, 0.0, 2.0]],
                vec![[0.0, -1.0, 0.5], [1.0, 0.5, 0.0]],
            ],
            discount: 0.95,
            horizon: 6,
            m0: vec![vec![0.5, 0.5], vec![0.13, 0.87], vec![1.0, 0.0]],
            resolution: 101,
            mc_paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Density snapshots every this many steps (0 writes none).
    pub density_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { density_every: 10 }
    }
}

fn quad(c: &[f64; 3]) -> Quadratic {
    Quadratic::new(c[0], c[1], c[2])
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical form: every key present, in declaration order.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.normalized().as_bytes()))
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            rho: m.rho,
            crra: m.gamma,
            nu: m.nu,
            beta: m.beta,
            horizon: m.horizon,
            dt: m.dt,
            income: match m.income {
                IncomeSection::TwoState {
                    y_lo,
                    y_hi,
                    rate_up,
                    rate_down,
                } => IncomeProcess::TwoState {
                    y_lo,
                    y_hi,
                    rate_up,
                    rate_down,
                },
                IncomeSection::Ou {
                    mean_reversion,
                    long_run_mean,
                    intensity,
                    lower,
                    upper,
                    n_nodes,
                } => IncomeProcess::OuDiffusion {
                    mean_reversion,
                    long_run_mean,
                    intensity,
                    lower,
                    upper,
                    n_nodes,
                },
            },
            production_scale: m.production_scale,
        }
    }

    pub fn discrete_model(&self) -> DiscreteModel {
        let d = &self.discrete;
        DiscreteModel {
            n_x: d.n_x,
            n_act: d.n_act,
            n_z: d.n_z,
            tz: d.tz.clone(),
            tx: d.tx.clone(),
            reward: d
                .reward
                .iter()
                .map(|per_x| per_x.iter().map(|per_z| per_z.iter().map(quad).collect()).collect())
                .collect(),
            terminal: d.terminal.iter().map(|per_x| per_x.iter().map(quad).collect()).collect(),
            discount: d.discount,
            price_map: PriceMap {
                intercept: d.price_intercept.clone(),
                loadings: d.price_loadings.clone(),
            },
            horizon: d.horizon,
        }
    }

    pub fn ties(&self) -> TieBreak {
        match self.discrete.ties {
            TieKind::LowestIndex => TieBreak::LowestIndex,
            TieKind::Uniform => TieBreak::Uniform,
        }
    }

    pub fn mrp(&self) -> MarkovRewardProcess {
        let r = &self.mrp;
        MarkovRewardProcess {
            n_x: r.n_x,
            n_z: r.n_z,
            tz: r.tz.clone(),
            a: r.a.clone(),
            price_map: PriceMap {
                intercept: r.price_intercept.clone(),
                loadings: r.price_loadings.clone(),
            },
            reward: r.reward.iter().map(|per_x| per_x.iter().map(quad).collect()).collect(),
            terminal: r.terminal.iter().map(|per_x| per_x.iter().map(quad).collect()).collect(),
            discount: r.discount,
            horizon: r.horizon,
        }
    }

    /// Physical and structural checks, naming the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, msg: &str| Err(CliError::Config(format!("invalid `{key}`: {msg}")));
        self.params().validate().map_err(CliError::from_config)?;
        if self.grid.n_wealth < 3 {
            return bad("grid.n_wealth", "need at least 3 nodes");
        }
        if !(self.grid.a_max > 0.0 && self.grid.a_max.is_finite()) {
            return bad("grid.a_max", "must be > 0");
        }
        let t = &self.transition;
        if !(t.wealth_scale > 0.0 && t.wealth_scale <= 1.0) {
            return bad("transition.wealth_scale", "must lie in (0, 1]");
        }
        if !(t.damping > 0.0 && t.damping <= 1.0) {
            return bad("transition.damping", "must lie in (0, 1]");
        }
        let te = &self.temporary;
        if te.inner_stride == 0 {
            return bad("temporary.inner_stride", "must be >= 1");
        }
        if !(te.price_box > 0.0 && te.price_box < 1.0) {
            return bad("temporary.price_box", "must lie in (0, 1)");
        }
        te.rule().validate().map_err(CliError::from_config)?;
        let cn = &self.common_noise;
        if !(cn.dt > 0.0 && cn.dt.is_finite()) {
            return bad("common_noise.dt", "must be > 0");
        }
        if !(cn.beta >= 0.0 && cn.beta.is_finite()) {
            return bad("common_noise.beta", "must be >= 0");
        }
        if !(cn.gain > 0.0 && cn.gain <= 1.0) {
            return bad("common_noise.gain", "must lie in (0, 1]");
        }
        if cn.stride == 0 {
            return bad("common_noise.stride", "must be >= 1");
        }
        let d = &self.discrete;
        if !(d.discount > 0.0 && d.discount <= 1.0) {
            return bad("discrete.discount", "must lie in (0, 1]");
        }
        self.discrete_model().validate().map_err(CliError::from_config)?;
        if d.m0.len() != d.n_x || d.m0.iter().any(|v| *v < 0.0) || (d.m0.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("discrete.m0", "must be a probability vector over the individual states");
        }
        if d.z0 >= d.n_z {
            return bad("discrete.z0", "aggregate state out of range");
        }
        if d.master.resolution < 11 {
            return bad("discrete.master.resolution", "need at least 11");
        }
        if !(d.master.tolerance >= 0.0) {
            return bad("discrete.master.tolerance", "must be >= 0");
        }
        let l = &d.learning;
        rule_from(l.rule, l.gain, l.t0, l.regularization)
            .validate()
            .map_err(CliError::from_config)?;
        if !(l.sigma >= 0.0 && l.sigma.is_finite()) {
            return bad("discrete.learning.sigma", "must be >= 0");
        }
        if l.price_nodes == 0 || l.pilot_periods == 0 {
            return bad("discrete.learning.price_nodes", "need price nodes and a pilot run");
        }
        let r = &self.mrp;
        if !(r.discount > 0.0 && r.discount <= 1.0) {
            return bad("mrp.discount", "must lie in (0, 1]");
        }
        self.mrp().validate().map_err(CliError::from_config)?;
        if r.m0.iter().any(|m| m.len() != r.n_x) {
            return bad("mrp.m0", "each measure needs one entry per state");
        }
        if r.resolution < 11 {
            return bad("mrp.resolution", "need at least 11");
        }
        if r.mc_paths < 2 {
            return bad("mrp.mc_paths", "need at least 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults_and_a_stable_hash() {
        let a = RunConfig::parse("[model]\ngamma = 2.0\n").unwrap();
        assert_eq!(a, RunConfig::default());
        let b = RunConfig::parse("[model]\ngamma = 2.0\n").unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn negative_diffusion_names_the_key() {
        let err = RunConfig::parse("[model]\nnu = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("model.nu"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn discount_outside_the_unit_interval_is_rejected() {
        let err = RunConfig::parse("[discrete]\ndiscount = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("discount"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[model]\ngama = 2.0\n").is_err());
        assert!(RunConfig::parse("typo = 1\n").is_err());
    }

    #[test]
    fn normalized_form_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.seed = 17;
        cfg.model.income = IncomeSection::Ou {
            mean_reversion: 0.3,
            long_run_mean: 1.0,
            intensity: 0.01,
            lower: 0.5,
            upper: 1.5,
            n_nodes: 5,
        };
        cfg.common_noise.tolerance = 1e-12;
        let again = RunConfig::parse(&cfg.normalized()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }
}

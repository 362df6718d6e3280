//! Experiment configuration, read from and echoed back to TOML.
//!
//! ```toml
//! n = 400
//! replications = 500
//! alpha = 0.05
//! base_seed = 7
//! estimators = ["rocket", "pearson"]
//!
//! [scenario]
//! radius = "abs_t:5"
//! graph = { kind = "grid", rows = 10, cols = 10, omega = 0.24 }
//!
//! [[edges]]
//! label = "edge"
//! a = [2, 2]     # 1-based grid coordinate, or a 0-based node index
//! b = [2, 3]
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::lasso::{default_lambda, LassoConfig};
use crate::synth::{
    apply_marginals, contaminate, derive_seed, sample_elliptical,
    ContaminationSpec, GraphSpec, MarginalSet, PrecisionModel, RadiusLaw,
};

pub const FULL_GRID_SIDE: usize = 30;
pub const FULL_P: usize = 1000;
pub const FULL_REPLICATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Rocket,
    Pearson,
    Npn,
    PseudoScore,
}

impl Estimator {
    pub const ALL: [Estimator; 4] =
        [Estimator::Rocket, Estimator::Pearson, Estimator::Npn, Estimator::PseudoScore];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Rocket => "rocket",
            Estimator::Pearson => "pearson",
            Estimator::Npn => "npn",
            Estimator::PseudoScore => "pseudo_score",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rocket" => Ok(Estimator::Rocket),
            "pearson" => Ok(Estimator::Pearson),
            "npn" | "nonparanormal" => Ok(Estimator::Npn),
            "pseudo_score" | "pseudo-score" => Ok(Estimator::PseudoScore),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

/// A node given either as a 0-based index or as a 1-based grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeRef {
    Index(usize),
    Grid([usize; 2]),
}

impl NodeRef {
    pub fn resolve(&self, graph: &GraphSpec) -> Result<usize> {
        let idx = match *self {
            NodeRef::Index(i) => i,
            NodeRef::Grid([r, c]) => graph.grid_node(r, c).map_err(|e| Error::Config(e.to_string()))?,
        };
        if idx >= graph.p() {
            return Err(Error::Config(format!("node {idx} outside 0..{}", graph.p())));
        }
        Ok(idx)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Index(i) => write!(f, "{i}"),
            NodeRef::Grid([r, c]) => write!(f, "({r},{c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub label: String,
    pub a: NodeRef,
    pub b: NodeRef,
}

impl EdgeSpec {
    pub fn new(label: &str, a: NodeRef, b: NodeRef) -> Self {
        Self { label: label.to_string(), a, b }
    }

    pub fn resolve(&self, graph: &GraphSpec) -> Result<(usize, usize)> {
        let (a, b) = (self.a.resolve(graph)?, self.b.resolve(graph)?);
        if a == b {
            return Err(Error::Config(format!("edge {:?} joins a node to itself", self.label)));
        }
        Ok((a, b))
    }
}

/// The data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: GraphSpec,
    #[serde(default)]
    pub radius: RadiusLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<MarginalSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contamination: Option<ContaminationSpec>,
}

impl Scenario {
    pub fn new(graph: GraphSpec, radius: RadiusLaw) -> Self {
        Self { graph, radius, marginals: None, contamination: None }
    }

    /// Draws `n` rows: elliptical sample, then marginals, then contamination.
    /// Sampling and contamination use separate streams derived from `seed`.
    pub fn sample(&self, model: &PrecisionModel, n: usize, seed: u64) -> Result<DataMatrix> {
        let mut x = sample_elliptical(n, &model.sigma, self.radius, derive_seed(seed, 0))?;
        if let Some(m) = &self.marginals {
            x = apply_marginals(&x, m);
        }
        if let Some(c) = &self.contamination {
            x = contaminate(&x, &c.with_seed(derive_seed(seed, 1)))?;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSettings {
    /// Number of disjoint subsamples `L`.
    pub subsamples: usize,
    pub n_sub: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Penalty override; the default is `2.1 sqrt(ln p / n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Values of `rho` for power curves (pair designs only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<SubsampleSettings>,
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Rocket]
}

fn default_alpha() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, n: usize, replications: usize) -> Self {
        Self {
            scenario,
            n,
            replications,
            edges: Vec::new(),
            estimators: default_estimators(),
            alpha: default_alpha(),
            lambda: None,
            base_seed: 0,
            threads: None,
            rho_grid: Vec::new(),
            subsample: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.replications < 1 {
            return fail("replications must be at least 1".into());
        }
        if self.n < 3 {
            return fail(format!("n = {} is too small", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if self.estimators.is_empty() {
            return fail("no estimators selected".into());
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return fail(format!("lambda = {l} must be nonnegative"));
            }
        }
        if self.threads == Some(0) {
            return fail("threads must be positive".into());
        }
        if self.scenario.graph.p() < 3 {
            return fail("the graph needs at least 3 nodes".into());
        }
        for e in &self.edges {
            e.resolve(&self.scenario.graph)?;
        }
        if let Some(c) = &self.scenario.contamination {
            if !(c.rate > 0.0 && c.rate < 1.0) {
                return fail(format!("contamination rate {} must lie in (0, 1)", c.rate));
            }
        }
        if let Some(s) = &self.subsample {
            if s.subsamples < 2 || s.n_sub < 3 {
                return fail("subsample protocol needs L >= 2 and n_sub >= 3".into());
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.scenario.graph.p()
    }

    /// The Lasso settings for sample size `n`.
    pub fn lasso_for(&self, n: usize) -> LassoConfig {
        LassoConfig::new(self.lambda.unwrap_or_else(|| default_lambda(n, self.p())))
    }

    /// Resolved `(label, a, b)` triples.
    pub fn resolved_edges(&self) -> Result<Vec<(String, usize, usize)>> {
        self.edges
            .iter()
            .map(|e| e.resolve(&self.scenario.graph).map(|(a, b)| (e.label.clone(), a, b)))
            .collect()
    }

    /// Seed of replication `rep`.
    pub fn replication_seed(&self, rep: usize) -> u64 {
        derive_seed(self.base_seed, rep as u64)
    }

    /// Scales the design to the large settings (30 x 30 grids, p = 1000 for
    /// chains and pairs, 1000 replications); grid coordinates keep their meaning.
    pub fn full_scale(mut self) -> Self {
        self.scenario.graph = match self.scenario.graph {
            GraphSpec::Grid { omega, .. } => GraphSpec::grid(FULL_GRID_SIDE, omega),
            GraphSpec::Chain { rho, .. } => GraphSpec::chain(FULL_P, rho),
            GraphSpec::Pair { rho, .. } => GraphSpec::pair(FULL_P, rho),
        };
        self.replications = FULL_REPLICATIONS;
        self
    }
}

/// Built-in configurations for each experiment type.
pub mod presets {
    use super::*;

    /// Target edges suited to a graph: for grids an edge, a close non-edge and
    /// a far non-edge from node (2,2); for chains the edge (9,10) when it
    /// exists; for pairs the coupled pair.
    pub fn default_edges(graph: &GraphSpec) -> Vec<EdgeSpec> {
        match *graph {
            GraphSpec::Grid { rows, cols, .. } if rows >= 3 && cols >= 3 => {
                let far = [rows.min(10), cols.min(10)];
                vec![
                    EdgeSpec::new("edge", NodeRef::Grid([2, 2]), NodeRef::Grid([2, 3])),
                    EdgeSpec::new("close_non_edge", NodeRef::Grid([2, 2]), NodeRef::Grid([3, 3])),
                    EdgeSpec::new("far_non_edge", NodeRef::Grid([2, 2]), NodeRef::Grid(far)),
                ]
            }
            GraphSpec::Chain { p, .. } if p > 10 => {
                vec![EdgeSpec::new("edge", NodeRef::Index(9), NodeRef::Index(10))]
            }
            _ => vec![EdgeSpec::new("edge", NodeRef::Index(0), NodeRef::Index(1))],
        }
    }

    fn grid_edges() -> Vec<EdgeSpec> {
        default_edges(&GraphSpec::grid(10, 0.24))
    }

    /// Transelliptical grid coverage with all four estimators.
    pub fn coverage() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Scenario::new(GraphSpec::grid(10, 0.24), RadiusLaw::AbsT(5.0)),
            400,
            500,
        );
        c.edges = grid_edges();
        c.estimators = Estimator::ALL.to_vec();
        c
    }

    /// Gaussian grid Q-Q data.
    pub fn qq() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Scenario::new(GraphSpec::grid(10, 0.24), RadiusLaw::Gaussian),
            400,
            500,
        );
        c.edges = grid_edges();
        c.estimators = Estimator::ALL.to_vec();
        c
    }

    /// Gaussian pair design power curve.
    pub fn power() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Scenario::new(GraphSpec::pair(100, 0.0), RadiusLaw::Gaussian),
            400,
            500,
        );
        c.edges = default_edges(&c.scenario.graph);
        c.estimators = vec![Estimator::Rocket, Estimator::Pearson, Estimator::Npn];
        c.rho_grid = vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5];
        c
    }

    /// Disjoint-subsample variance check on a 4 x 5 Gaussian grid.
    pub fn subsample() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Scenario::new(GraphSpec::Grid { rows: 4, cols: 5, omega: 0.24 }, RadiusLaw::Gaussian),
            50,
            1,
        );
        c.subsample = Some(SubsampleSettings { subsamples: 25, n_sub: 50 });
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Mechanism, Marginal};

    #[test]
    fn echo_round_trips() {
        let mut c = presets::coverage();
        c.scenario.marginals = Some(MarginalSet { cycle: vec![Marginal::Identity, Marginal::Cube] });
        c.scenario.contamination = Some(ContaminationSpec::new(Mechanism::Element, 0.05, 0));
        c.lambda = Some(0.3);
        c.threads = Some(2);
        for cfg in [c, presets::power(), presets::subsample(), presets::qq()] {
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"
            n = 400
            replications = 500
            alpha = 0.05
            base_seed = 7
            estimators = ["rocket", "pearson"]

            [scenario]
            radius = "abs_t:5"
            graph = { kind = "grid", rows = 10, cols = 10, omega = 0.24 }

            [[edges]]
            label = "edge"
            a = [2, 2]
            b = [2, 3]
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.resolved_edges().unwrap(), vec![("edge".to_string(), 11, 12)]);
        assert_eq!(c.scenario.radius, RadiusLaw::AbsT(5.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = presets::coverage();
        c.replications = 0;
        assert!(c.validate().is_err());
        let mut c = presets::coverage();
        c.edges.push(EdgeSpec::new("bad", NodeRef::Index(3), NodeRef::Index(300)));
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml("n = 'x'").is_err());
    }

    #[test]
    fn full_scale_keeps_coordinates() {
        let c = presets::coverage().full_scale();
        assert_eq!(c.p(), 900);
        assert_eq!(c.resolved_edges().unwrap()[0], ("edge".to_string(), 31, 32));
        assert_eq!(c.replications, FULL_REPLICATIONS);
    }
}

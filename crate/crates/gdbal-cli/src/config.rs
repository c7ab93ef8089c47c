//! Declarative job configuration (JSON, schema v1). Unknown keys are
//! rejected everywhere; the parsed configuration re-serializes to an
//! identical job ("effective config" round trip).

use anyhow::{anyhow, bail, Context, Result};
use gdbal_core::expr::Interval;
use gdbal_core::gdreduce::GramianObjective;
use gdbal_core::hinfsyn::RinfMode;
use gdbal_core::lmi::SolveOptions;
use gdbal_core::sim::Signal;
use gdbal_core::sysmodel::{
    build_vertices, builtin_dc_motor, builtin_network_chain, PlantModel, VectorField, VertexSet,
    VertexStrategy,
};
use gdbal_core::nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub plant: PlantSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub vertices: VertexSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSpec>,
    #[serde(default = "default_gramian_objective")]
    pub gramian_objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hinf: Option<HinfSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_gramian_objective() -> String {
    "min-trace".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PlantSpec {
    Builtin {
        builtin: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    Custom {
        expressions: Vec<String>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<Vec<Vec<f64>>>>,
}

fn default_strategy() -> String {
    "scaled-sound".into()
}

impl Default for VertexSpec {
    fn default() -> Self {
        VertexSpec { strategy: default_strategy(), domain: None, explicit: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    pub order: OrderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OrderSpec {
    Fixed(usize),
    Auto(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_margin() -> f64 {
    1e-7
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    5000
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { margin: default_margin(), tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub blocks: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HinfSpec {
    #[serde(default)]
    pub override_spectral: bool,
    #[serde(default)]
    pub improve_gamma: bool,
    #[serde(default = "default_rinf_mode")]
    pub rinf_mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<InjectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
}

fn default_rinf_mode() -> String {
    "per-vertex".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InjectSpec {
    pub p_inf: Vec<Vec<f64>>,
    pub q_inf: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

fn default_t_final() -> f64 {
    20.0
}
fn default_dt() -> f64 {
    1e-3
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec { t_final: default_t_final(), dt: default_dt(), scenarios: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// `plant`, `reduced`, `lqg-loop`, `hinf-loop`, or `hinf-loop-reduced`.
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SignalSpec {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "constant")]
    Constant { value: Vec<f64> },
    #[serde(rename = "sum-of-sines")]
    SumOfSines { amps: Vec<f64>, freqs: Vec<f64> },
    #[serde(rename = "piecewise")]
    Piecewise { times: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_slope_max")]
    pub slope_max: f64,
    #[serde(default = "default_final_ratio")]
    pub final_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
}

fn default_trials() -> usize {
    20
}
fn default_slope_max() -> f64 {
    -1e-3
}
fn default_final_ratio() -> f64 {
    1e-6
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            trials: default_trials(),
            t_final: default_t_final(),
            dt: default_dt(),
            slope_max: default_slope_max(),
            final_ratio: default_final_ratio(),
            checks: None,
        }
    }
}

// ---- construction helpers ----

pub fn matrix_from(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        bail!("{what}: empty matrix");
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        bail!("{what}: ragged rows");
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

pub fn matrix_to(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: JobConfig =
            serde_json::from_str(text).context("configuration does not match schema v1")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            bail!("epsilon must be nonnegative");
        }
        if let Some(g) = self.gamma {
            if g <= 1.0 {
                bail!("gamma must be > 1");
            }
        }
        match self.vertices.strategy.as_str() {
            "one-at-a-time" | "scaled-sound" | "explicit" => {}
            other => bail!("unknown vertex strategy `{other}`"),
        }
        if self.vertices.strategy == "explicit" && self.vertices.explicit.is_none() {
            bail!("explicit vertex strategy requires `vertices.explicit`");
        }
        match self.gramian_objective.as_str() {
            "none" | "min-trace" | "min-x-max-y" => {}
            other => bail!("unknown gramian objective `{other}`"),
        }
        if let Some(h) = &self.hinf {
            match h.rinf_mode.as_str() {
                "per-vertex" | "constant-min-trace" => {}
                other => bail!("unknown rinf mode `{other}`"),
            }
        }
        for sc in &self.simulation.scenarios {
            match sc.system.as_str() {
                "plant" | "reduced" | "lqg-loop" | "hinf-loop" | "hinf-loop-reduced" => {}
                other => bail!("unknown scenario system `{other}`"),
            }
        }
        Ok(())
    }

    pub fn build_plant(&self) -> Result<PlantModel> {
        match &self.plant {
            PlantSpec::Builtin { builtin, n } => match builtin.as_str() {
                "dc_motor" => Ok(builtin_dc_motor(self.epsilon)?),
                "network_chain" => {
                    let n = n.ok_or_else(|| anyhow!("network_chain requires `n`"))?;
                    Ok(builtin_network_chain(n, self.epsilon)?)
                }
                other => bail!("unknown builtin plant `{other}`"),
            },
            PlantSpec::Custom { expressions, b, c } => {
                let dim = expressions.len();
                let field = VectorField::parse(&expressions.join("\n"), dim)?;
                let b = matrix_from(b, "B")?;
                let c = matrix_from(c, "C")?;
                Ok(PlantModel::new(field, b, c, self.epsilon)?)
            }
        }
    }

    pub fn build_vertices(&self, plant: &PlantModel) -> Result<VertexSet> {
        if let Some(explicit) = &self.vertices.explicit {
            if explicit.is_empty() {
                bail!("explicit vertex list must be nonempty");
            }
            let vs: Result<Vec<DMatrix<f64>>> = explicit
                .iter()
                .map(|m| matrix_from(m, "explicit vertex"))
                .collect();
            let vs = vs?;
            if vs.iter().any(|v| v.nrows() != plant.n() || v.ncols() != plant.n()) {
                bail!("explicit vertices must be {n}x{n}", n = plant.n());
            }
            return Ok(VertexSet::explicit(vs));
        }
        let strategy = match self.vertices.strategy.as_str() {
            "one-at-a-time" => VertexStrategy::OneAtATime,
            _ => VertexStrategy::ScaledSound,
        };
        let domain: Option<Vec<Interval>> = match &self.vertices.domain {
            None => None,
            Some(d) => {
                if d.lo.len() != plant.n() || d.hi.len() != plant.n() {
                    bail!("domain box does not match state dimension");
                }
                Some(
                    d.lo.iter()
                        .zip(&d.hi)
                        .map(|(&lo, &hi)| Interval::new(lo, hi))
                        .collect(),
                )
            }
        };
        Ok(build_vertices(plant, strategy, domain.as_deref())?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            margin: self.solver.margin,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            seed: self.seed,
        }
    }

    pub fn gramian_objective(&self) -> GramianObjective {
        match self.gramian_objective.as_str() {
            "none" => GramianObjective::None,
            "min-x-max-y" => GramianObjective::MinTraceXMaxTraceY,
            _ => GramianObjective::MinTraceBoth,
        }
    }

    pub fn rinf_mode(&self) -> RinfMode {
        match self.hinf.as_ref().map(|h| h.rinf_mode.as_str()) {
            Some("constant-min-trace") => RinfMode::ConstantMinTrace,
            _ => RinfMode::PerVertex,
        }
    }

    pub fn blocks(&self) -> Option<Vec<usize>> {
        self.structure.as_ref().map(|s| s.blocks.clone())
    }
}

impl SignalSpec {
    pub fn build(&self, dim: usize) -> Result<Signal> {
        Ok(match self {
            SignalSpec::Zero => Signal::Zero { dim },
            SignalSpec::Constant { value } => {
                if value.len() != dim {
                    bail!("constant signal has {} entries, expected {dim}", value.len());
                }
                Signal::Constant(DVector::from_column_slice(value))
            }
            SignalSpec::SumOfSines { amps, freqs } => {
                if amps.len() != freqs.len() {
                    bail!("sum-of-sines needs matching amps/freqs");
                }
                Signal::SumOfSines {
                    dim,
                    terms: amps.iter().copied().zip(freqs.iter().copied()).collect(),
                }
            }
            SignalSpec::Piecewise { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    bail!("piecewise signal needs matching nonempty times/values");
                }
                Signal::PiecewiseConstant {
                    times: times.clone(),
                    values: values
                        .iter()
                        .map(|v| {
                            if v.len() != dim {
                                bail!("piecewise value has {} entries, expected {dim}", v.len())
                            } else {
                                Ok(DVector::from_column_slice(v))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?,
                }
            }
        })
    }
}

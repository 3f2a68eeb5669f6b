//! Raw job configuration as read from TOML. Everything here is strings and
//! numbers; [`crate::job`] turns it into engine values.

use serde::Deserialize;

pub type StrMatrix = Vec<Vec<String>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub seed: u64,
    /// Default star order `K` for tasks that do not set one.
    pub order: Option<u32>,
    /// Default Fedosov truncation `N`; `2K` when absent.
    pub truncation: Option<u32>,
    pub chart: ChartConfig,
    pub connection: Option<ConnectionConfig>,
    #[serde(default)]
    pub offset: Vec<OffsetTerm>,
    pub subset: Option<SubsetConfig>,
    pub action: Option<ActionConfig>,
    pub reduction: Option<ReductionConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub leaf: Vec<String>,
    #[serde(default)]
    pub transverse: Vec<String>,
    pub pi: Option<StrMatrix>,
    pub omega: Option<StrMatrix>,
    /// Base-degree bound for series-inverted data.
    #[serde(default)]
    pub bound: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionKind {
    Flat,
    Metric,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    Symmetric,
    Literal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionConfig {
    pub kind: ConnectionKind,
    /// Leaf metric `η_ij` (kind = "metric").
    pub metric: Option<StrMatrix>,
    pub mode: Option<ModeConfig>,
    /// `gamma[k][i][j] = Γ^k_ij` (kind = "explicit").
    pub gamma: Option<Vec<StrMatrix>>,
}

/// `ℏ^hbar · Σ_{i<j} form_ij dx^i ∧ dx^j`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetTerm {
    pub hbar: u32,
    pub form: StrMatrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    pub generators: Vec<String>,
    pub order: u32,
    #[serde(default = "default_subset_bound")]
    pub bound: u32,
}

fn default_subset_bound() -> u32 {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    Finite,
    Infinitesimal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub kind: ActionKind,
    /// Matrices `A` acting by `F ↦ F∘A` (kind = "finite").
    pub elements: Option<Vec<StrMatrix>>,
    /// Optional multiplication table, `table[i][j] = index of A_i A_j`.
    pub table: Option<Vec<Vec<usize>>>,
    /// `X = Σ A_ij x^j ∂_i` (kind = "infinitesimal").
    pub generator: Option<StrMatrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    /// The reduced chart `N`.
    pub chart: ChartConfig,
    pub connection: Option<ConnectionConfig>,
    /// Components of `π: M → N` over the upstairs variables.
    pub projection: Vec<String>,
    /// The downstairs subset `Y`; the upstairs one is the top-level `subset`.
    pub subset: SubsetConfig,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBattery {
    pub count: usize,
    pub degree: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeTerm {
    /// Power of `ℏ` the term belongs to (`T = 1 + Σ ℏ^k T_k`).
    pub hbar: u32,
    pub coeff: String,
    /// Leaf monomial naming the derivative, e.g. `"q^2"` for `∂_q²`.
    pub derivative: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub coefficient_degree: u32,
    pub derivative_order: Option<u32>,
    pub battery_degree: Option<u32>,
    pub jet_order: Option<u32>,
}

/// The second product of an `equiv` task: same chart, another connection
/// and/or curvature offset.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgainstConfig {
    pub connection: Option<ConnectionConfig>,
    #[serde(default)]
    pub offset: Vec<OffsetTerm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskConfig {
    Validate(ValidateTask),
    Connection(ConnectionTask),
    Fedosov(FedosovTask),
    Star(StarTask),
    WhitneyStar(WhitneyStarTask),
    Invariance(InvarianceTask),
    ReduceCheck(ReduceCheckTask),
    Equiv(EquivTask),
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Validate(_) => "validate",
            TaskConfig::Connection(_) => "connection",
            TaskConfig::Fedosov(_) => "fedosov",
            TaskConfig::Star(_) => "star",
            TaskConfig::WhitneyStar(_) => "whitney-star",
            TaskConfig::Invariance(_) => "invariance",
            TaskConfig::ReduceCheck(_) => "reduce-check",
            TaskConfig::Equiv(_) => "equiv",
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            TaskConfig::Validate(t) => t.name.as_deref(),
            TaskConfig::Connection(t) => t.name.as_deref(),
            TaskConfig::Fedosov(t) => t.name.as_deref(),
            TaskConfig::Star(t) => t.name.as_deref(),
            TaskConfig::WhitneyStar(t) => t.name.as_deref(),
            TaskConfig::Invariance(t) => t.name.as_deref(),
            TaskConfig::ReduceCheck(t) => t.name.as_deref(),
            TaskConfig::Equiv(t) => t.name.as_deref(),
        }
    }

    /// The default task of a kind, used when a subcommand names a kind the
    /// config does not list.
    pub fn default_of(kind: &str) -> Option<TaskConfig> {
        Some(match kind {
            "validate" => TaskConfig::Validate(ValidateTask::default()),
            "connection" => TaskConfig::Connection(ConnectionTask::default()),
            "fedosov" => TaskConfig::Fedosov(FedosovTask::default()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateTask {
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionTask {
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedosovTask {
    pub name: Option<String>,
    pub truncation: Option<u32>,
    /// Fiber exponent vectors `a` of the test elements `y^a` for `D∘D`;
    /// default `1`, every `y^i` and every `y^i y^j` (`i < j`).
    pub elements: Option<Vec<Vec<u32>>>,
    /// Print `r` itself (default true).
    pub emit_r: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarTask {
    pub name: Option<String>,
    pub order: Option<u32>,
    pub truncation: Option<u32>,
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    pub random: Option<RandomBattery>,
    /// Check DQ0–DQ3 on every pair.
    #[serde(default)]
    pub axioms: bool,
    /// Associativity on this battery of random triples.
    pub associativity: Option<RandomBattery>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitneyStarTask {
    pub name: Option<String>,
    pub order: Option<u32>,
    pub truncation: Option<u32>,
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    /// Representative independence on random `(f, j, g)` with `j` in the ideal.
    pub independence: Option<RandomBattery>,
    /// Associativity of the quotient product on random triples.
    pub associativity: Option<RandomBattery>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceTask {
    pub name: Option<String>,
    pub order: Option<u32>,
    pub truncation: Option<u32>,
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    /// Random invariant pairs: Reynolds averages for a finite action,
    /// pullbacks along the reduction projection for an infinitesimal one.
    pub random: Option<RandomBattery>,
    /// Work modulo the top-level subset (default true when one is given).
    pub use_subset: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceCheckTask {
    pub name: Option<String>,
    pub order: Option<u32>,
    pub truncation: Option<u32>,
    /// Pairs of downstairs polynomials.
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    pub random: Option<RandomBattery>,
    /// Downstairs sample for the `π*` checks; default: every operand.
    pub sample: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivTask {
    pub name: Option<String>,
    pub order: Option<u32>,
    pub truncation: Option<u32>,
    /// Compare with the product of another connection/offset ...
    pub against: Option<AgainstConfig>,
    /// ... or with the main product conjugated by this gauge.
    pub gauge: Option<Vec<GaugeTerm>>,
    pub ansatz: AnsatzConfig,
    /// Held-out validation pairs (explicit and/or random).
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    pub held_out: Option<RandomBattery>,
}

//! Datasets, allocations and endowments, plus JSON ingestion.
//!
//! The on-disk format is
//!
//! ```json
//! { "m": 2,
//!   "agents": [ { "id": "2", "observations": [ {"p": ["2","1"], "x": ["1","2"]} ] } ],
//!   "endowments": { "2": ["1","0"] },
//!   "allocations": { "xbar": { "2": ["0","4"] } },
//!   "prices": { "pbar": ["1","1"] } }
//! ```
//!
//! Numbers are strings holding integers, fractions (`"29/10"`) or decimals,
//! or bare JSON numbers without exponents. Everything is parsed exactly.
//! Observation indices in error messages are 1-based.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::numerics::{parse_rational, RVector, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("{context}: cannot parse number {text:?}")]
    Number { context: String, text: String },
    #[error("{context}: expected {expected} coordinates, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("{context}: negative quantity")]
    Negative { context: String },
    #[error("{context}: price vector is zero")]
    ZeroPrice { context: String },
    #[error("duplicate agent id {0:?}")]
    DuplicateAgent(String),
    #[error("a group dataset needs at least one agent")]
    NoAgents,
    #[error("dimension m must be positive")]
    ZeroDimension,
    #[error("{what} does not cover exactly the agents of the group (missing {missing:?}, unknown {unknown:?})")]
    AgentSet {
        what: String,
        missing: Vec<String>,
        unknown: Vec<String>,
    },
    #[error("aggregate dataset undefined: {0}")]
    Aggregate(String),
    #[error("no {kind} named {name:?} in the data file")]
    MissingNamed { kind: &'static str, name: String },
}

fn obs_context(agent: &str, index: usize) -> String {
    format!("agent {agent:?} observation {}", index + 1)
}

/// A price vector and the bundle chosen at that price. The income is
/// always derived as `p · x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(rename = "p")]
    pub price: RVector,
    #[serde(rename = "x")]
    pub bundle: RVector,
}

impl Observation {
    pub fn new(price: RVector, bundle: RVector) -> Self {
        Observation { price, bundle }
    }

    /// Implied income `p · x`.
    pub fn income(&self) -> Rational {
        self.price.dot_unchecked(&self.bundle)
    }

    /// Cost of `y` at this observation's prices.
    pub fn cost(&self, y: &RVector) -> Rational {
        self.price.dot_unchecked(y)
    }

    fn validate(&self, dim: usize, context: impl Fn() -> String) -> Result<(), ModelError> {
        for v in [&self.price, &self.bundle] {
            if v.len() != dim {
                return Err(ModelError::Dimension {
                    context: context(),
                    expected: dim,
                    found: v.len(),
                });
            }
            if !v.is_nonnegative() {
                return Err(ModelError::Negative { context: context() });
            }
        }
        if self.price.is_zero() {
            return Err(ModelError::ZeroPrice { context: context() });
        }
        Ok(())
    }
}

/// One consumer's observations, in order. May be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndividualDataset {
    id: String,
    dim: usize,
    observations: Vec<Observation>,
}

impl IndividualDataset {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        observations: Vec<Observation>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        for (k, o) in observations.iter().enumerate() {
            o.validate(dim, || obs_context(&id, k))?;
        }
        Ok(IndividualDataset {
            id,
            dim,
            observations,
        })
    }

    /// Convenience constructor from integer `(price, bundle)` pairs.
    pub fn from_ints(id: &str, pairs: &[(&[i64], &[i64])]) -> Result<Self, ModelError> {
        let dim = pairs.first().map_or(1, |(p, _)| p.len());
        let obs = pairs
            .iter()
            .map(|(p, x)| Observation::new(RVector::from_ints(p), RVector::from_ints(x)))
            .collect();
        Self::new(id, dim, obs)
    }

    pub fn empty(id: impl Into<String>, dim: usize) -> Result<Self, ModelError> {
        Self::new(id, dim, Vec::new())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Observation `k`, 0-based.
    pub fn obs(&self, k: usize) -> &Observation {
        &self.observations[k]
    }

    /// Copy of this dataset with one more observation appended.
    pub fn with_observation(&self, extra: Observation) -> Result<Self, ModelError> {
        let mut observations = self.observations.clone();
        observations.push(extra);
        Self::new(self.id.clone(), self.dim, observations)
    }

    /// Dataset with observations `a` followed by those of `b`, under a new id.
    pub fn union(id: impl Into<String>, a: &Self, b: &Self) -> Result<Self, ModelError> {
        let mut observations = a.observations.clone();
        observations.extend(b.observations.iter().cloned());
        Self::new(id, a.dim, observations)
    }
}

/// Individual datasets with distinct ids over a common commodity space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDataset {
    dim: usize,
    agents: Vec<IndividualDataset>,
}

impl GroupDataset {
    pub fn new(agents: Vec<IndividualDataset>) -> Result<Self, ModelError> {
        let first = agents.first().ok_or(ModelError::NoAgents)?;
        let dim = first.dim();
        for (pos, a) in agents.iter().enumerate() {
            if a.dim() != dim {
                return Err(ModelError::Dimension {
                    context: format!("agent {:?}", a.id()),
                    expected: dim,
                    found: a.dim(),
                });
            }
            if agents[..pos].iter().any(|b| b.id() == a.id()) {
                return Err(ModelError::DuplicateAgent(a.id().to_string()));
            }
        }
        Ok(GroupDataset { dim, agents })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> &[IndividualDataset] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agent(&self, id: &str) -> Option<&IndividualDataset> {
        self.agents.iter().find(|a| a.id() == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.agents.iter().map(|a| a.id())
    }

    /// Same agents with every dataset transformed by `f`.
    pub fn map_agents<F>(&self, mut f: F) -> Result<Self, ModelError>
    where
        F: FnMut(&IndividualDataset) -> Result<IndividualDataset, ModelError>,
    {
        GroupDataset::new(self.agents.iter().map(&mut f).collect::<Result<_, _>>()?)
    }
}

/// Per-agent bundles keyed by agent id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    bundles: BTreeMap<String, RVector>,
}

/// Endowments use the same representation as allocations.
pub type EndowmentProfile = Allocation;

impl Allocation {
    pub fn new(bundles: BTreeMap<String, RVector>) -> Self {
        Allocation { bundles }
    }

    /// Build from bundles listed in the group's agent order.
    pub fn from_group_order(group: &GroupDataset, bundles: Vec<RVector>) -> Self {
        Allocation {
            bundles: group.ids().map(str::to_string).zip(bundles).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&RVector> {
        self.bundles.get(id)
    }

    /// Bundle of `id`; panics if absent, so validate first.
    pub fn bundle(&self, id: &str) -> &RVector {
        &self.bundles[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &RVector)> {
        self.bundles.iter()
    }

    /// Bundles in the group's agent order.
    pub fn in_group_order<'a>(&'a self, group: &'a GroupDataset) -> Vec<&'a RVector> {
        group.ids().map(|id| self.bundle(id)).collect()
    }

    /// Aggregate bundle `Σ_i x̄_i`.
    pub fn total(&self, dim: usize) -> RVector {
        let mut acc = RVector::zeros(dim);
        for v in self.bundles.values() {
            acc = acc.add(v);
        }
        acc
    }

    /// Same id set as `group`, dimension `m`, nonnegative bundles.
    pub fn validate_for(&self, group: &GroupDataset, what: &str) -> Result<(), ModelError> {
        let missing: Vec<String> = group
            .ids()
            .filter(|id| !self.bundles.contains_key(*id))
            .map(str::to_string)
            .collect();
        let unknown: Vec<String> = self
            .bundles
            .keys()
            .filter(|id| group.agent(id).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() || !unknown.is_empty() {
            return Err(ModelError::AgentSet {
                what: what.to_string(),
                missing,
                unknown,
            });
        }
        for (id, v) in &self.bundles {
            let context = format!("{what} bundle of agent {id:?}");
            if v.len() != group.dim() {
                return Err(ModelError::Dimension {
                    context,
                    expected: group.dim(),
                    found: v.len(),
                });
            }
            if !v.is_nonnegative() {
                return Err(ModelError::Negative { context });
            }
        }
        Ok(())
    }
}

/// Everything a data file may contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataFile {
    pub group: GroupDataset,
    pub endowments: Option<EndowmentProfile>,
    pub allocations: BTreeMap<String, Allocation>,
    pub prices: BTreeMap<String, RVector>,
}

impl DataFile {
    pub fn allocation(&self, name: &str) -> Result<&Allocation, ModelError> {
        self.allocations
            .get(name)
            .ok_or_else(|| ModelError::MissingNamed {
                kind: "allocation",
                name: name.to_string(),
            })
    }

    pub fn price(&self, name: &str) -> Result<&RVector, ModelError> {
        self.prices
            .get(name)
            .ok_or_else(|| ModelError::MissingNamed {
                kind: "price",
                name: name.to_string(),
            })
    }

    pub fn endowments(&self) -> Result<&EndowmentProfile, ModelError> {
        self.endowments
            .as_ref()
            .ok_or_else(|| ModelError::MissingNamed {
                kind: "endowment profile",
                name: "endowments".to_string(),
            })
    }

    /// JSON value in the format described at the top of this module.
    pub fn to_json(&self) -> Value {
        let agents: Vec<Value> = self
            .group
            .agents()
            .iter()
            .map(|a| {
                serde_json::json!({
                    "id": a.id(),
                    "observations": a.observations(),
                })
            })
            .collect();
        let mut doc = serde_json::json!({ "m": self.group.dim(), "agents": agents });
        if let Some(e) = &self.endowments {
            doc["endowments"] = serde_json::to_value(e).expect("serializable");
        }
        if !self.allocations.is_empty() {
            doc["allocations"] = serde_json::to_value(&self.allocations).expect("serializable");
        }
        if !self.prices.is_empty() {
            doc["prices"] = serde_json::to_value(&self.prices).expect("serializable");
        }
        doc
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    m: usize,
    agents: Vec<RawAgent>,
    #[serde(default)]
    endowments: Option<BTreeMap<String, Vec<Value>>>,
    #[serde(default)]
    allocations: BTreeMap<String, BTreeMap<String, Vec<Value>>>,
    #[serde(default)]
    prices: BTreeMap<String, Vec<Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    #[serde(default)]
    observations: Vec<RawObservation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservation {
    p: Vec<Value>,
    x: Vec<Value>,
}

fn parse_value(v: &Value, context: &dyn Fn() -> String) -> Result<Rational, ModelError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    };
    parse_rational(&text).map_err(|_| ModelError::Number {
        context: context(),
        text,
    })
}

fn parse_vector(values: &[Value], context: &dyn Fn() -> String) -> Result<RVector, ModelError> {
    values
        .iter()
        .map(|v| parse_value(v, context))
        .collect::<Result<Vec<_>, _>>()
        .map(RVector::new)
}

fn parse_named_map(
    raw: &BTreeMap<String, Vec<Value>>,
    what: &str,
) -> Result<BTreeMap<String, RVector>, ModelError> {
    raw.iter()
        .map(|(k, vals)| {
            let ctx = || format!("{what} entry {k:?}");
            parse_vector(vals, &ctx).map(|v| (k.clone(), v))
        })
        .collect()
}

/// Read and validate a complete data file.
pub fn load_data_file<R: Read>(source: R) -> Result<DataFile, ModelError> {
    let raw: RawFile =
        serde_json::from_reader(source).map_err(|e| ModelError::Json(e.to_string()))?;
    if raw.m == 0 {
        return Err(ModelError::ZeroDimension);
    }
    let mut agents = Vec::with_capacity(raw.agents.len());
    for a in &raw.agents {
        let mut observations = Vec::with_capacity(a.observations.len());
        for (k, o) in a.observations.iter().enumerate() {
            let ctx = || obs_context(&a.id, k);
            observations.push(Observation::new(
                parse_vector(&o.p, &ctx)?,
                parse_vector(&o.x, &ctx)?,
            ));
        }
        agents.push(IndividualDataset::new(a.id.clone(), raw.m, observations)?);
    }
    let group = GroupDataset::new(agents)?;

    let endowments = match &raw.endowments {
        Some(e) => {
            let profile = Allocation::new(parse_named_map(e, "endowment")?);
            profile.validate_for(&group, "endowment")?;
            Some(profile)
        }
        None => None,
    };
    let mut allocations = BTreeMap::new();
    for (name, bundles) in &raw.allocations {
        let alloc = Allocation::new(parse_named_map(bundles, &format!("allocation {name:?}"))?);
        alloc.validate_for(&group, &format!("allocation {name:?}"))?;
        allocations.insert(name.clone(), alloc);
    }
    let prices = parse_named_map(&raw.prices, "price")?;
    for (name, p) in &prices {
        let context = format!("price {name:?}");
        if p.len() != group.dim() {
            return Err(ModelError::Dimension {
                context,
                expected: group.dim(),
                found: p.len(),
            });
        }
        if !p.is_nonnegative() {
            return Err(ModelError::Negative { context });
        }
        if p.is_zero() {
            return Err(ModelError::ZeroPrice { context });
        }
    }
    Ok(DataFile {
        group,
        endowments,
        allocations,
        prices,
    })
}

/// Read just the group dataset from a data file.
pub fn load_group_dataset<R: Read>(source: R) -> Result<GroupDataset, ModelError> {
    load_data_file(source).map(|f| f.group)
}

/// The aggregate dataset `{(Σ_i x_i^k, p^k)}`, defined when every agent has
/// the same number of observations and identical prices at each index.
pub fn aggregate_dataset(group: &GroupDataset) -> Result<IndividualDataset, ModelError> {
    let first = &group.agents()[0];
    let count = first.len();
    let dim = group.dim();
    for a in group.agents() {
        if a.len() != count {
            return Err(ModelError::Aggregate(format!(
                "agent {:?} has {} observations, agent {:?} has {}",
                first.id(),
                count,
                a.id(),
                a.len()
            )));
        }
    }
    let mut observations = Vec::with_capacity(count);
    for k in 0..count {
        let price = &first.obs(k).price;
        let mut total = RVector::zeros(dim);
        for a in group.agents() {
            if &a.obs(k).price != price {
                return Err(ModelError::Aggregate(format!(
                    "prices differ at observation {} (agent {:?})",
                    k + 1,
                    a.id()
                )));
            }
            total = total.add(&a.obs(k).bundle);
        }
        observations.push(Observation::new(price.clone(), total));
    }
    IndividualDataset::new("aggregate", dim, observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, ratio};

    pub(crate) const EXAMPLE: &str = r#"{
        "m": 2,
        "agents": [
            { "id": "1", "observations": [] },
            { "id": "2", "observations": [
                {"p": ["2","1"], "x": ["1","2"]},
                {"p": ["2","1"], "x": ["0","4"]},
                {"p": ["1","2"], "x": ["2","1"]},
                {"p": ["1","2"], "x": ["4","0"]}
            ] }
        ],
        "allocations": {
            "xbar1": {"1": ["1","0"], "2": ["0","4"]},
            "xbar2": {"1": ["0","1"], "2": ["4","0"]}
        }
    }"#;

    #[test]
    fn loads_the_two_allocation_example() {
        let file = load_data_file(EXAMPLE.as_bytes()).unwrap();
        let g = &file.group;
        assert_eq!(g.agent("1").unwrap().len(), 0);
        assert_eq!(g.agent("2").unwrap().len(), 4);
        assert_eq!(g.agent("2").unwrap().obs(0).income(), int(4));
        assert_eq!(file.allocations.len(), 2);
        assert_eq!(
            file.allocation("xbar1").unwrap().bundle("2"),
            &RVector::from_ints(&[0, 4])
        );
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let doc = r#"{"m":1,"agents":[{"id":"a"},{"id":"a"}]}"#;
        assert_eq!(
            load_data_file(doc.as_bytes()).unwrap_err(),
            ModelError::DuplicateAgent("a".into())
        );
    }

    #[test]
    fn zero_price_reports_agent_and_index() {
        let doc = r#"{"m":2,"agents":[{"id":"a","observations":[
            {"p":["1","1"],"x":["1","1"]},{"p":["0","0"],"x":["1","1"]}]}]}"#;
        let err = load_data_file(doc.as_bytes()).unwrap_err();
        assert!(
            matches!(&err, ModelError::ZeroPrice { context } if context.contains("observation 2")),
            "{err}"
        );
    }

    #[test]
    fn negative_and_mismatched_inputs_are_rejected() {
        let neg =
            r#"{"m":2,"agents":[{"id":"a","observations":[{"p":["1","1"],"x":["-1","1"]}]}]}"#;
        assert!(matches!(
            load_data_file(neg.as_bytes()),
            Err(ModelError::Negative { .. })
        ));
        let dim = r#"{"m":2,"agents":[{"id":"a","observations":[{"p":["1"],"x":["1","1"]}]}]}"#;
        assert!(matches!(
            load_data_file(dim.as_bytes()),
            Err(ModelError::Dimension { .. })
        ));
        let bad = r#"{"m":1,"agents":[{"id":"a","observations":[{"p":["1e2"],"x":["1"]}]}]}"#;
        assert!(matches!(
            load_data_file(bad.as_bytes()),
            Err(ModelError::Number { .. })
        ));
        let alloc = r#"{"m":1,"agents":[{"id":"a"}],"allocations":{"z":{"b":["1"]}}}"#;
        assert!(matches!(
            load_data_file(alloc.as_bytes()),
            Err(ModelError::AgentSet { .. })
        ));
    }

    #[test]
    fn bare_json_numbers_are_exact() {
        let doc =
            r#"{"m":2,"agents":[{"id":"a","observations":[{"p":[1, 2.9],"x":["29/10", 0.5]}]}]}"#;
        let g = load_group_dataset(doc.as_bytes()).unwrap();
        let o = g.agents()[0].obs(0);
        assert_eq!(o.price, RVector::new(vec![int(1), ratio(29, 10)]));
        assert_eq!(o.bundle, RVector::new(vec![ratio(29, 10), ratio(1, 2)]));
    }

    #[test]
    fn aggregate_sums_bundles() {
        let a = IndividualDataset::from_ints("a", &[(&[1, 1], &[1, 0])]).unwrap();
        let b = IndividualDataset::from_ints("b", &[(&[1, 1], &[0, 1])]).unwrap();
        let g = GroupDataset::new(vec![a.clone(), b]).unwrap();
        let agg = aggregate_dataset(&g).unwrap();
        assert_eq!(agg.obs(0).bundle, RVector::from_ints(&[1, 1]));
        assert_eq!(agg.obs(0).price, RVector::from_ints(&[1, 1]));

        let single = aggregate_dataset(&GroupDataset::new(vec![a.clone()]).unwrap()).unwrap();
        assert_eq!(single.observations(), a.observations());

        let example = load_group_dataset(EXAMPLE.as_bytes()).unwrap();
        assert!(matches!(
            aggregate_dataset(&example),
            Err(ModelError::Aggregate(_))
        ));
    }

    #[test]
    fn differing_prices_block_aggregation() {
        let a = IndividualDataset::from_ints("a", &[(&[1, 1], &[1, 0])]).unwrap();
        let b = IndividualDataset::from_ints("b", &[(&[1, 2], &[0, 1])]).unwrap();
        let g = GroupDataset::new(vec![a, b]).unwrap();
        assert!(matches!(
            aggregate_dataset(&g),
            Err(ModelError::Aggregate(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let file = load_data_file(EXAMPLE.as_bytes()).unwrap();
        let text = serde_json::to_string(&file.to_json()).unwrap();
        let back = load_data_file(text.as_bytes()).unwrap();
        assert_eq!(back, file);
    }
}

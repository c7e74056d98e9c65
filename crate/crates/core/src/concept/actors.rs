use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConceptError, ConceptModel};
use crate::seed;

/// Properties that a real robot cannot observe directly and may therefore be
/// randomized per episode.
pub const RANGED_PROPERTIES: [&str; 3] = ["width", "mass", "hinge_radius"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorRole {
    TargetObject,
    Environment,
    EndEffector,
}

impl ActorRole {
    pub fn name(self) -> &'static str {
        match self {
            Self::TargetObject => "target-object",
            Self::Environment => "environment",
            Self::EndEffector => "end-effector",
        }
    }
}

impl fmt::Display for ActorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A property is either fixed or drawn uniformly from `[lo, hi]` per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Fixed(f64),
    Range([f64; 2]),
}

impl PropertyValue {
    pub fn range(self) -> [f64; 2] {
        match self {
            Self::Fixed(v) => [v, v],
            Self::Range(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyRef {
    pub role: ActorRole,
    pub name: String,
}

impl fmt::Display for PropertyRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.role, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorConfiguration {
    pub actors: BTreeMap<ActorRole, BTreeMap<String, PropertyValue>>,
}

impl ActorConfiguration {
    pub fn with(mut self, role: ActorRole, name: &str, value: PropertyValue) -> Self {
        self.actors.entry(role).or_default().insert(name.to_string(), value);
        self
    }

    pub fn get(&self, role: ActorRole, name: &str) -> Option<PropertyValue> {
        self.actors.get(&role)?.get(name).copied()
    }

    /// Overwrites an existing property; unknown properties are rejected.
    pub fn set(&mut self, role: ActorRole, name: &str, value: PropertyValue) -> Result<(), ConceptError> {
        let slot = self
            .actors
            .get_mut(&role)
            .and_then(|props| props.get_mut(name))
            .ok_or_else(|| ConceptError::InvalidConfiguration(format!("unknown actor property {role}.{name}")))?;
        *slot = value;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConceptError> {
        for (role, props) in &self.actors {
            for (name, value) in props {
                let [lo, hi] = value.range();
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(ConceptError::InvalidConfiguration(format!("{role}.{name} is not finite")));
                }
                if let PropertyValue::Range(_) = value {
                    if !RANGED_PROPERTIES.contains(&name.as_str()) {
                        return Err(ConceptError::InvalidConfiguration(format!(
                            "{role}.{name} is observable and cannot be randomized"
                        )));
                    }
                    if lo > hi {
                        return Err(ConceptError::InvalidConfiguration(format!(
                            "{role}.{name} range [{lo}, {hi}] is empty"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Partially known dynamics parameter. Unknown parameters carry a range from
/// which the hidden ground truth is drawn; a parameter bound to an actor
/// property takes that property's sampled value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub value: Option<f64>,
    pub known: bool,
    pub randomization_range: Option<[f64; 2]>,
    pub binding: Option<PropertyRef>,
}

impl ParameterSpec {
    pub fn known(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value: Some(value),
            known: true,
            randomization_range: None,
            binding: None,
        }
    }

    pub fn unknown(name: &str, range: [f64; 2]) -> Self {
        Self {
            name: name.to_string(),
            value: None,
            known: false,
            randomization_range: Some(range),
            binding: None,
        }
    }

    /// Unknown parameter whose ground truth is an actor property.
    pub fn bound(name: &str, config: &ActorConfiguration, role: ActorRole, property: &str) -> Self {
        let range = config.get(role, property).map(PropertyValue::range);
        Self {
            name: name.to_string(),
            value: None,
            known: false,
            randomization_range: range,
            binding: Some(PropertyRef {
                role,
                name: property.to_string(),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ConceptError> {
        let ok = if self.known {
            self.value.is_some_and(f64::is_finite)
        } else {
            self.randomization_range
                .is_some_and(|[lo, hi]| lo.is_finite() && hi.is_finite() && lo <= hi)
        };
        if ok {
            Ok(())
        } else if self.known {
            Err(ConceptError::InvalidConfiguration(format!("known parameter {} has no value", self.name)))
        } else {
            Err(ConceptError::InvalidConfiguration(format!("unknown parameter {} has no valid range", self.name)))
        }
    }
}

/// Actor properties and hidden parameter values drawn for one episode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResolvedActors {
    pub properties: BTreeMap<ActorRole, BTreeMap<String, f64>>,
    pub hidden: BTreeMap<String, f64>,
}

impl ResolvedActors {
    pub fn get(&self, role: ActorRole, name: &str) -> Option<f64> {
        self.properties.get(&role)?.get(name).copied()
    }

    /// Property that the model's configuration guarantees to exist.
    pub fn require(&self, role: ActorRole, name: &str) -> f64 {
        self.get(role, name)
            .unwrap_or_else(|| panic!("actor configuration lacks {role}.{name}"))
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Draws every ranged property and every unknown parameter's ground truth.
/// Properties are visited in role then name order from a single stream, so
/// the result is a pure function of the model and the seed.
pub fn sample_actor_configuration(model: &ConceptModel, seed: u64) -> ResolvedActors {
    let mut rng = seed::rng(seed);
    let mut resolved = ResolvedActors::default();
    for (role, props) in &model.actor_configs.actors {
        let out = resolved.properties.entry(*role).or_default();
        for (name, value) in props {
            let v = match value {
                PropertyValue::Fixed(v) => *v,
                PropertyValue::Range(r) => uniform(&mut rng, *r),
            };
            out.insert(name.clone(), v);
        }
    }
    for p in model.parameters.iter().filter(|p| !p.known) {
        let v = match &p.binding {
            Some(b) => resolved.get(b.role, &b.name),
            None => None,
        };
        let v = match (v, p.randomization_range) {
            (Some(v), _) => v,
            (None, Some(r)) => uniform(&mut rng, r),
            (None, None) => continue,
        };
        resolved.hidden.insert(p.name.clone(), v);
    }
    resolved
}

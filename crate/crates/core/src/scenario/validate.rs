use std::collections::BTreeSet;
use std::fmt;

use crate::concept::{ConceptModel, PolicySource};
use crate::engines::Backend;
use crate::tasks::build_model;

use super::file::{Scenario, ScenarioMode, SCENARIO_VERSION};

/// One validation finding, tied to the scenario field it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(field: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        field: field.into(),
        message: message.into(),
    }
}

/// `host:port` or a bare host; the port, if present, must fit in 16 bits.
pub fn endpoint_well_formed(endpoint: &str) -> bool {
    let (host, port) = match endpoint.rsplit_once(':') {
        Some((h, p)) => (h, Some(p)),
        None => (endpoint, None),
    };
    let host_ok = !host.is_empty() && !host.chars().any(char::is_whitespace);
    host_ok && port.is_none_or(|p| p.parse::<u16>().is_ok_and(|n| n > 0))
}

/// Builds each task's model with the scenario's parameter, step and actor
/// overrides. Tasks whose model cannot be built are reported and skipped.
pub fn build_models(s: &Scenario) -> (Vec<(String, ConceptModel)>, Vec<Diagnostic>) {
    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let mut used = BTreeSet::new();
    for (i, t) in s.tasks.iter().enumerate() {
        let field = format!("tasks[{i}] ({})", t.id);
        let mut model = match build_model(&t.model, &t.parameters) {
            Ok(m) => m,
            Err(e) => {
                diagnostics.push(diag(field, e.to_string()));
                continue;
            }
        };
        if let Some(n) = t.max_steps {
            if n == 0 {
                diagnostics.push(diag(&field, "max_steps must be positive"));
            }
            model.max_steps = n;
        }
        for (role, props) in &s.actors {
            for (name, value) in props {
                if model.actor_configs.get(*role, name).is_some() {
                    match model.override_actor(*role, name, *value) {
                        Ok(()) => {
                            used.insert((*role, name.clone()));
                        }
                        Err(e) => diagnostics.push(diag(format!("actors.{}.{name}", role.name()), e.to_string())),
                    }
                }
            }
        }
        if let Err(e) = model.validate() {
            diagnostics.push(diag(field, e.to_string()));
        }
        out.push((t.id.clone(), model));
    }
    for (role, props) in &s.actors {
        for name in props.keys() {
            if !used.contains(&(*role, name.clone())) {
                diagnostics.push(diag(
                    format!("actors.{}.{name}", role.name()),
                    "no task declares this actor property",
                ));
            }
        }
    }
    (out, diagnostics)
}

/// Checks a parsed scenario against the task models: model keys and
/// parameters resolve, each task's required attachment pattern is produced
/// by its predecessor (or, at the head, bootstrapped from its actor
/// configuration), learned tasks have parameters where execution needs
/// them, and engine endpoints are well formed. Empty means valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    if s.version != SCENARIO_VERSION {
        diagnostics.push(diag(
            "version",
            format!("unsupported version {} (expected {SCENARIO_VERSION})", s.version),
        ));
    }
    let (models, model_diags) = build_models(s);
    diagnostics.extend(model_diags);
    let model = |id: &str| models.iter().find(|(m, _)| m == id).map(|(_, m)| m);

    let mut previous: Option<&ConceptModel> = None;
    for (i, id) in s.sequence.iter().enumerate() {
        let Some(m) = model(id) else {
            previous = None;
            continue;
        };
        let field = format!("sequence[{i}] ({id})");
        match previous {
            None if i == 0 && !m.initial.bootstrap => {
                diagnostics.push(diag(
                    field,
                    format!("{} requires {}", m.id, m.initial.requires.describe()),
                ));
            }
            Some(p) if p.initial.produces != m.initial.requires => {
                diagnostics.push(diag(
                    field,
                    format!(
                        "{} requires {} but {} leaves {}",
                        m.id,
                        m.initial.requires.describe(),
                        p.id,
                        p.initial.produces.describe()
                    ),
                ));
            }
            _ => {}
        }
        previous = Some(m);
    }

    for (i, t) in s.tasks.iter().enumerate() {
        let Some(m) = model(&t.id) else { continue };
        let field = format!("tasks[{i}] ({})", t.id);
        let learned = matches!(m.policy, PolicySource::Learned { .. });
        let trained = s.mode == ScenarioMode::Train && s.train_task.as_deref() == Some(t.id.as_str());
        if trained && !learned {
            diagnostics.push(diag(
                "train_task",
                format!("{} has a {} policy; only learned policies can be trained", t.id, m.policy.kind_name()),
            ));
        }
        let needed = s.sequence.contains(&t.id) && !trained;
        if learned && needed && t.params_file.is_none() {
            diagnostics.push(diag(field, format!("{} has a learned policy but no params_file", t.id)));
        } else if !learned && t.params_file.is_some() {
            diagnostics.push(diag(field, format!("{} has no learned policy to load params into", t.id)));
        }
    }

    for (role, backend) in &s.engines {
        if let Backend::Remote(endpoint) = backend {
            if !endpoint_well_formed(endpoint) {
                diagnostics.push(diag(
                    format!("engines.{role}"),
                    format!("malformed endpoint {endpoint:?}"),
                ));
            }
        }
    }
    if let Err(e) = s.train.validate() {
        diagnostics.push(diag("train", e.to_string()));
    }
    let r = &s.reward;
    if ![r.alpha, r.step_cost, r.success_bonus, r.failure_penalty]
        .iter()
        .all(|v| v.is_finite())
    {
        diagnostics.push(diag("reward", "constants must be finite"));
    }
    diagnostics
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use entangle_core::topology::{builtin, load_topology, MemorySpec};
use entangle_core::{NodeId, SimConfig, Topology, TopologyDocument, TrafficMatrix};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// An experiment: one topology and request pattern, run once per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDocument {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub topology: TopologySource,
    pub requests: RequestMode,
    /// Simulation parameters shared by all variants. Missing keys take the
    /// defaults.
    #[serde(default)]
    pub params: Map<String, Value>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySource {
    Builtin { name: String },
    Inline { document: TopologyDocument },
    /// Relative paths resolve against the experiment file's directory.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RequestMode {
    /// Every request is between `a` and `b`.
    Pair { a: usize, b: usize },
    /// Every request is between the first pair at maximal hop distance.
    MaxHopPair,
    /// Pairs drawn from the topology document's traffic matrix.
    Traffic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    /// Replaces the topology's memory allocation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memories: Option<MemorySpec>,
    /// Overrides on top of the shared parameters.
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// Command-line overrides applied after the document.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ResolvedVariant {
    pub label: String,
    pub config: SimConfig,
    pub topology: Topology,
    pub traffic: TrafficMatrix,
}

impl ExperimentDocument {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("experiment document: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn resolve(
        &self,
        base_dir: &Path,
        overrides: Overrides,
    ) -> Result<Vec<ResolvedVariant>, CliError> {
        if self.variants.is_empty() {
            return Err(CliError::Config(format!("{}: no variants", self.name)));
        }
        let mut seen = BTreeSet::new();
        for v in &self.variants {
            check_label(&v.label)?;
            if !seen.insert(v.label.as_str()) {
                return Err(CliError::Config(format!("duplicate variant label {}", v.label)));
            }
        }
        let base_doc = self.topology_document(base_dir)?;
        self.variants
            .iter()
            .map(|v| self.resolve_variant(v, &base_doc, overrides))
            .collect()
    }

    fn topology_document(&self, base_dir: &Path) -> Result<TopologyDocument, CliError> {
        match &self.topology {
            TopologySource::Builtin { name } => builtin::document(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown builtin topology {name:?}; known: {}",
                    builtin::names().join(", ")
                ))
            }),
            TopologySource::Inline { document } => Ok(document.clone()),
            TopologySource::File { path } => {
                let path = base_dir.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Config(format!("cannot read topology {}: {e}", path.display()))
                })?;
                TopologyDocument::from_json(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    fn resolve_variant(
        &self,
        variant: &Variant,
        base_doc: &TopologyDocument,
        overrides: Overrides,
    ) -> Result<ResolvedVariant, CliError> {
        let context = |e: &dyn std::fmt::Display| CliError::Config(format!("{}: {e}", variant.label));

        let mut doc = base_doc.clone();
        if let Some(m) = &variant.memories {
            doc.memories = m.clone();
        }
        let topology = load_topology(&doc).map_err(|e| context(&e))?;
        let traffic = match &self.requests {
            RequestMode::Pair { a, b } => {
                for n in [*a, *b] {
                    if n >= topology.n_nodes() {
                        return Err(context(&format!("request node {n} out of range")));
                    }
                }
                TrafficMatrix::single_pair(topology.n_nodes(), NodeId(*a), NodeId(*b))
                    .map_err(|e| context(&e))?
            }
            RequestMode::MaxHopPair => {
                let (a, b) = topology.max_hop_pair();
                TrafficMatrix::single_pair(topology.n_nodes(), a, b).map_err(|e| context(&e))?
            }
            RequestMode::Traffic => doc
                .traffic_matrix()
                .map_err(|e| context(&e))?
                .ok_or_else(|| context(&"traffic mode needs a traffic matrix in the topology"))?,
        };

        let mut params = serde_json::to_value(SimConfig::default()).expect("config serializes");
        let obj = params.as_object_mut().expect("config is an object");
        for (k, v) in self.params.iter().chain(&variant.params) {
            obj.insert(k.clone(), v.clone());
        }
        let mut config: SimConfig = serde_json::from_value(params).map_err(|e| context(&e))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            config.trials = trials;
        }
        config.validate().map_err(|e| context(&e))?;
        Ok(ResolvedVariant {
            label: variant.label.clone(),
            config,
            topology,
            traffic,
        })
    }
}

fn check_label(label: &str) -> Result<(), CliError> {
    let ok = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !label.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("bad variant label {label:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use entangle_core::SchemeKind;

    fn minimal(extra: &str) -> String {
        format!(
            r#"{{"name":"t","topology":{{"source":"builtin","name":"bottleneck8"}},
               "requests":{{"mode":"traffic"}},"variants":[{{"label":"a"{extra}}}]}}"#
        )
    }

    #[test]
    fn defaults_fill_missing_params() {
        let d = ExperimentDocument::from_json(&minimal("")).unwrap();
        let v = d.resolve(Path::new("."), Overrides::default()).unwrap();
        assert_eq!(v[0].config, SimConfig::default());
        assert_eq!(v[0].topology.n_nodes(), 8);
    }

    #[test]
    fn variant_params_override_shared() {
        let d = ExperimentDocument::from_json(&minimal(
            r#","memories":[5,5,5,30,30,5,5,5],"params":{"p_gen":0.1,"memory_lifetime":null,
               "scheme":{"kind":"uniform_global"}}"#,
        ))
        .unwrap();
        let v = &d
            .resolve(Path::new("."), Overrides { seed: Some(9), trials: Some(3) })
            .unwrap()[0];
        assert_eq!(v.config.p_gen, 0.1);
        assert_eq!(v.config.memory_lifetime, None);
        assert_eq!(v.config.scheme.kind, SchemeKind::UniformGlobal);
        assert_eq!((v.config.seed, v.config.trials), (9, 3));
        assert_eq!(v.topology.memory_counts()[3], 30);
    }

    #[test]
    fn rejects_bad_documents() {
        for bad in [
            minimal(r#","params":{"p_gen":2.0}"#),
            minimal(r#","params":{"no_such_key":1}"#),
            minimal(r#","memories":[1,2]"#),
            r#"{"name":"t","topology":{"source":"builtin","name":"nope"},"requests":{"mode":"traffic"},"variants":[{"label":"a"}]}"#.into(),
            r#"{"name":"t","topology":{"source":"builtin","name":"asnet10"},"requests":{"mode":"traffic"},"variants":[{"label":"a"}]}"#.into(),
            r#"{"name":"t","topology":{"source":"builtin","name":"asnet10"},"requests":{"mode":"pair","a":0,"b":0},"variants":[{"label":"a"}]}"#.into(),
            r#"{"name":"t","topology":{"source":"builtin","name":"asnet10"},"requests":{"mode":"max_hop_pair"},"variants":[{"label":"../x"}]}"#.into(),
            r#"{"name":"t","topology":{"source":"builtin","name":"asnet10"},"requests":{"mode":"max_hop_pair"},"variants":[]}"#.into(),
        ] {
            let r = ExperimentDocument::from_json(&bad)
                .and_then(|d| d.resolve(Path::new("."), Overrides::default()));
            assert!(matches!(r, Err(CliError::Config(_))), "{bad}");
        }
        assert!(ExperimentDocument::from_json("{").is_err());
    }
}

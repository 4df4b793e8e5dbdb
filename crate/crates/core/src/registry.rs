//! Name-keyed registries for the interchangeable strategies: linkage rules
//! and distance measures. Callers look strategies up by the names used on
//! the command line and in config files.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cooccur::{ConfidenceDistance, DistanceMeasure, LiftDistance};
use crate::error::{Error, Result};
use crate::linkage::{Average, Complete, Linkage, Single, Ward, Weighted};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
    order: Vec<String>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry { kind, entries: BTreeMap::new(), order: Vec::new() }
    }

    /// Registers `strategy` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &str, strategy: Arc<T>) {
        let key = name.to_ascii_lowercase();
        if self.entries.insert(key.clone(), strategy).is_none() {
            self.order.push(key);
        }
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries.get(&name.to_ascii_lowercase()).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_owned(),
            known: self.order.join(", "),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }

    /// Names in registration order.
    pub fn names(&self) -> &[String] {
        &self.order
    }
}

pub type LinkageRegistry = Registry<dyn Linkage>;
pub type MeasureRegistry = Registry<dyn DistanceMeasure>;

/// The five built-in linkage rules.
pub fn linkages() -> LinkageRegistry {
    let mut r = Registry::new("linkage");
    let builtins: [Arc<dyn Linkage>; 5] =
        [Arc::new(Single), Arc::new(Complete), Arc::new(Average), Arc::new(Weighted), Arc::new(Ward)];
    for l in builtins {
        r.register(l.name(), l);
    }
    r
}

/// The two built-in distance measures.
pub fn distance_measures() -> MeasureRegistry {
    let mut r = Registry::new("distance measure");
    let builtins: [Arc<dyn DistanceMeasure>; 2] = [Arc::new(ConfidenceDistance), Arc::new(LiftDistance)];
    for m in builtins {
        r.register(m.name(), m);
    }
    r
}

//! Name-keyed registries of interchangeable strategies.
//!
//! Each strategy family (derivative models, DMDR initializers) exposes a
//! trait; concrete variants are registered under a stable name and resolved
//! at runtime from config files or CLI flags.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Registry<F> {
    family: &'static str,
    entries: BTreeMap<&'static str, F>,
}

impl<F: Copy> Registry<F> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, factory: F) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn get(&self, name: &str) -> Result<F> {
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownStrategy {
                registry: self.family,
                name: name.to_owned(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}

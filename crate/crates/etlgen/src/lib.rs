//! Turns a semantic mapping between a relational source schema and a
//! star-schema data mart into composed ETL operator plans and SQL load
//! scripts, with an in-memory executor to verify loads on sample data.
//!
//! The pipeline reads three documents — the source schema, the star
//! schema and the mapping — classifies every mapping entry against the
//! rule catalog, composes one operator plan per dimension and one for
//! the fact, and renders the plans as `INSERT INTO … SELECT` statements.
//! [`exec`] interprets the same plans over CSV-loaded relations so a
//! generated load can be checked end to end without a DBMS.

pub mod condition;
pub mod exec;
pub mod ident;
pub mod mapping;
pub mod plan;
pub mod rules;
pub mod schema;
pub mod sql;
pub mod star;
pub mod value;

mod xml;

/// A structural problem found while validating a document or a plan.
///
/// Violations are data, not errors: validators return every problem they
/// find, sorted by `path`, so reports are stable across runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Path of the offending element, e.g. `Dim_client.adresse`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

pub(crate) fn sort_violations(violations: &mut Vec<Violation>) {
    violations.sort_by(|a, b| a.path.cmp(&b.path).then_with(|| a.message.cmp(&b.message)));
}

//! Application-aware routing: map a validated workload to a runtime class via
//! an ordered rule table with a mandatory catch-all.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{AppClass, PayloadKind, RuntimeClass, ValidatedSpec};

/// One routing rule. A rule matches when every present field equals the
/// spec's field; a rule with no match fields is a catch-all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_payload: Option<PayloadKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_app_class: Option<AppClass>,
    pub target: RuntimeClass,
}

impl ClassificationRule {
    pub fn is_catch_all(&self) -> bool {
        self.match_payload.is_none() && self.match_app_class.is_none()
    }

    pub fn matches(&self, spec: &ValidatedSpec) -> bool {
        self.match_payload
            .as_ref()
            .is_none_or(|p| *p == spec.payload_kind)
            && self
                .match_app_class
                .as_ref()
                .is_none_or(|c| *c == spec.app_class)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleTableError {
    #[error("rule table has no catch-all rule")]
    MissingCatchAll,
    #[error("catch-all rule must be the last rule (found at position {0})")]
    CatchAllNotLast(usize),
    #[error("rule table has more than one catch-all rule")]
    MultipleCatchAll,
    #[error("rule targets flavor `{0}` which is not in the calibration registry")]
    UnknownFlavor(String),
}

/// An ordered, validated rule table: exactly one catch-all, positioned last,
/// every target flavor registered.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RuleTable(Vec<ClassificationRule>);

impl RuleTable {
    pub fn new(
        rules: Vec<ClassificationRule>,
        known_flavors: &BTreeSet<String>,
    ) -> Result<Self, RuleTableError> {
        let catch_alls: Vec<usize> = rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_catch_all())
            .map(|(i, _)| i)
            .collect();
        match catch_alls.as_slice() {
            [] => return Err(RuleTableError::MissingCatchAll),
            [last] if *last == rules.len() - 1 => {}
            [misplaced] => return Err(RuleTableError::CatchAllNotLast(*misplaced)),
            _ => return Err(RuleTableError::MultipleCatchAll),
        }
        for rule in &rules {
            if !known_flavors.contains(&rule.target.flavor) {
                return Err(RuleTableError::UnknownFlavor(rule.target.flavor.clone()));
            }
        }
        Ok(RuleTable(rules))
    }

    /// The shipped default table: images to Container(docker), streams to
    /// Unikernel(unikraft), everything else to the Container(docker)
    /// catch-all.
    pub fn default_table() -> Self {
        RuleTable(alloc::vec![
            ClassificationRule {
                match_payload: Some(PayloadKind::Image),
                match_app_class: None,
                target: RuntimeClass::container("docker"),
            },
            ClassificationRule {
                match_payload: Some(PayloadKind::Stream),
                match_app_class: None,
                target: RuntimeClass::unikernel("unikraft"),
            },
            ClassificationRule {
                match_payload: None,
                match_app_class: None,
                target: RuntimeClass::container("docker"),
            },
        ])
    }

    pub fn rules(&self) -> &[ClassificationRule] {
        &self.0
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable::default_table()
    }
}

/// Returns the target of the first matching rule. Total: the catch-all
/// guarantees a match for every spec.
pub fn classify(spec: &ValidatedSpec, rules: &RuleTable) -> RuntimeClass {
    rules
        .0
        .iter()
        .find(|r| r.matches(spec))
        .map(|r| r.target.clone())
        .expect("rule table invariant: catch-all matches everything")
}

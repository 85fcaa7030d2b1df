//! Scope walk that finds identifiers an organ uses but never defines.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::facts::{StatementFacts, WriteKind};
use super::lexer::is_class_like;
use super::parser::{SyntaxUnit, UnitKind};

/// Free identifiers of an organ, split by what a vein could supply.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeIdentifiers {
    /// Value-position names no statement in the organ defines.
    pub variables: BTreeSet<String>,
    /// Called functions and referenced classes; no assignment can define these.
    pub external_callees: BTreeSet<String>,
}

impl FreeIdentifiers {
    pub fn all(&self) -> BTreeSet<String> {
        self.variables.union(&self.external_callees).cloned().collect()
    }

    pub fn is_self_contained(&self) -> bool {
        self.variables.is_empty()
    }
}

/// What the donor context says about names, used to sort free names into
/// variables and externals.
#[derive(Debug, Default)]
struct ContextNames {
    functions: HashSet<String>,
    classes: HashSet<String>,
    variables: HashSet<String>,
}

impl ContextNames {
    fn from_unit(context: &SyntaxUnit) -> Self {
        let mut names = ContextNames::default();
        for unit in context.walk() {
            match unit.kind {
                UnitKind::FunctionDef => {
                    names.functions.extend(unit.name.clone());
                }
                UnitKind::ClassDef => {
                    names.classes.extend(unit.name.clone());
                }
                _ => {}
            }
        }
        for leaf in context.leaves() {
            names.variables.extend(leaf.facts.defined.iter().cloned());
            names.variables.extend(leaf.facts.assigned.iter().cloned());
        }
        names
    }
}

struct Walker<'c> {
    scopes: Vec<HashSet<String>>,
    context: Option<&'c ContextNames>,
    out: FreeIdentifiers,
}

/// Identifiers referenced in `organ` that it does not define itself.
///
/// Declarations, parameters, for-each variables and catch parameters bind a
/// name for the rest of their block. A plain `name = expr` to a name with no
/// visible binding binds it in the current block. Function and class names
/// are hoisted to the start of their block; class fields are visible in the
/// whole class body.
pub fn free_identifiers(organ: &SyntaxUnit, context: Option<&SyntaxUnit>) -> FreeIdentifiers {
    let context_names = context.map(ContextNames::from_unit);
    let mut walker = Walker { scopes: Vec::new(), context: context_names.as_ref(), out: FreeIdentifiers::default() };
    walker.unit(organ);
    walker.out
}

impl Walker<'_> {
    fn bound(&self, name: &str) -> bool {
        self.scopes.iter().rev().any(|s| s.contains(name))
    }

    fn bind(&mut self, name: &str) {
        if let Some(scope) = self.scopes.last_mut() {
            scope.insert(name.to_string());
        }
    }

    fn hoist(&mut self, unit: &SyntaxUnit) {
        let is_class = unit.kind == UnitKind::ClassDef;
        for child in &unit.children {
            match child.kind {
                UnitKind::FunctionDef | UnitKind::ClassDef => {
                    if let Some(n) = &child.name {
                        self.bind(n);
                    }
                }
                UnitKind::Statement if is_class => {
                    for n in &child.facts.defined {
                        self.bind(n);
                    }
                }
                _ => {}
            }
        }
    }

    fn classify(&mut self, name: &str, called: bool, type_position: bool) {
        if self.bound(name) {
            return;
        }
        let external = if type_position || called {
            true
        } else if let Some(ctx) = self.context {
            if ctx.functions.contains(name) || ctx.classes.contains(name) {
                true
            } else if ctx.variables.contains(name) {
                false
            } else {
                is_class_like(name)
            }
        } else {
            is_class_like(name)
        };
        if external {
            self.out.external_callees.insert(name.to_string());
        } else {
            self.out.variables.insert(name.to_string());
        }
    }

    fn reads(&mut self, facts: &StatementFacts) {
        for name in &facts.referenced {
            self.classify(name, facts.called.contains(name), false);
        }
        for name in &facts.type_refs {
            self.classify(name, false, true);
        }
    }

    fn statement(&mut self, facts: &StatementFacts) {
        self.reads(facts);
        for name in &facts.defined {
            self.bind(name);
        }
        for w in &facts.writes {
            if w.kind == WriteKind::Assign && !self.bound(&w.name) {
                self.bind(&w.name);
            }
        }
    }

    /// Header names bind before the header's own reads (`for (int i = 0; i < n; i++)`).
    fn header(&mut self, facts: &StatementFacts) {
        for name in &facts.defined {
            self.bind(name);
        }
        for w in &facts.writes {
            if w.kind == WriteKind::Assign && !self.bound(&w.name) {
                self.bind(&w.name);
            }
        }
        self.reads(facts);
    }

    fn unit(&mut self, unit: &SyntaxUnit) {
        match unit.kind {
            UnitKind::Statement => self.statement(&unit.facts),
            _ => {
                self.scopes.push(HashSet::new());
                self.hoist(unit);
                if let Some(h) = &unit.header {
                    self.header(&h.facts);
                }
                for child in &unit.children {
                    self.unit(child);
                }
                self.scopes.pop();
            }
        }
    }
}

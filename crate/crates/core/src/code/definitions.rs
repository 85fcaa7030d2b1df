//! Backward search for the statements that define or modify a variable.

use serde::{Deserialize, Serialize};

use super::callgraph::CallGraph;
use super::facts::StatementFacts;
use super::parser::{Control, SyntaxUnit, UnitKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePos {
    pub file: String,
    pub line: u32,
}

impl SourcePos {
    pub fn new(file: impl Into<String>, line: u32) -> Self {
        SourcePos { file: file.into(), line }
    }
}

/// Where a definition was found relative to the organ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "function")]
pub enum DefOrigin {
    /// The function enclosing the insertion point (or top-level code).
    Local,
    /// A field declared in the class body.
    Class,
    /// A function reached through the class call graph.
    Callee(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionSite {
    pub facts: StatementFacts,
    pub origin: DefOrigin,
    /// The statement sits in a branch or loop, or is a loop header.
    pub conditional: bool,
}

fn collect<'a>(unit: &'a SyntaxUnit, inside: bool, skip_functions: bool, out: &mut Vec<(&'a SyntaxUnit, bool)>) {
    if unit.is_leaf() {
        out.push((unit, inside));
        return;
    }
    let branchy = unit.control.is_some_and(Control::is_branch_or_loop);
    if let Some(h) = &unit.header {
        let looping = matches!(unit.control, Some(Control::For | Control::While | Control::Do));
        out.push((h, inside || looping));
    }
    for c in &unit.children {
        if skip_functions && c.kind == UnitKind::FunctionDef {
            continue;
        }
        collect(c, inside || branchy, skip_functions, out);
    }
}

/// Every statement that defines or assigns `variable` ahead of `before`:
/// first the enclosing function (statements above `before.line`), then the
/// fields of the enclosing class, then the functions of `graph` in entry order.
pub fn definition_sites(
    variable: &str,
    before: &SourcePos,
    scope: &SyntaxUnit,
    graph: Option<&CallGraph>,
) -> Vec<DefinitionSite> {
    let mut sites = Vec::new();
    let enclosing = scope.innermost(UnitKind::FunctionDef, before.line);
    let class = scope.innermost(UnitKind::ClassDef, before.line);

    let mut local = Vec::new();
    match enclosing {
        Some(f) => collect(f, false, false, &mut local),
        None => collect(scope, false, true, &mut local),
    }
    for (leaf, conditional) in local {
        if leaf.span.start_line < before.line && leaf.facts.touches(variable) {
            sites.push(DefinitionSite { facts: leaf.facts.clone(), origin: DefOrigin::Local, conditional });
        }
    }

    if let (Some(_), Some(class)) = (enclosing, class) {
        for field in class.children.iter().filter(|c| c.is_leaf()) {
            if field.facts.touches(variable) {
                sites.push(DefinitionSite { facts: field.facts.clone(), origin: DefOrigin::Class, conditional: false });
            }
        }
    }

    if let Some(graph) = graph {
        let class = class.or_else(|| scope.find_class(&graph.class));
        let enclosing_name = enclosing.and_then(|f| f.name.as_deref());
        if let Some(class) = class {
            for name in graph.entry_order.iter().filter(|n| Some(n.as_str()) != enclosing_name) {
                for f in class.functions().filter(|f| f.name.as_ref() == Some(name)) {
                    let mut leaves = Vec::new();
                    collect(f, false, false, &mut leaves);
                    for (leaf, conditional) in leaves {
                        if leaf.facts.touches(variable) {
                            sites.push(DefinitionSite {
                                facts: leaf.facts.clone(),
                                origin: DefOrigin::Callee(name.clone()),
                                conditional,
                            });
                        }
                    }
                }
            }
        }
    }
    sites
}

/// Statements defining or assigning `variable` before `before`, in search order.
pub fn last_definitions(
    variable: &str,
    before: &SourcePos,
    scope: &SyntaxUnit,
    graph: Option<&CallGraph>,
) -> Vec<StatementFacts> {
    definition_sites(variable, before, scope, graph).into_iter().map(|s| s.facts).collect()
}

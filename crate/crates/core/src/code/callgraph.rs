//! Call graph over the functions of one class.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parser::{SyntaxUnit, UnitKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallGraphError {
    #[error("function `{function}` not found in class `{class}`")]
    MissingFunction { class: String, function: String },
    #[error("unit is not a class definition")]
    NotAClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    pub class: String,
    /// Function names in source order, duplicates (overloads) merged.
    pub nodes: Vec<String>,
    /// `(caller, callee)` pairs, grouped by caller in node order and by first
    /// reference within each caller.
    pub edges: Vec<(String, String)>,
    /// Breadth-first order from the entry function.
    pub entry_order: Vec<String>,
}

impl CallGraph {
    pub fn callees<'a>(&'a self, caller: &'a str) -> impl Iterator<Item = &'a str> {
        self.edges.iter().filter(move |(c, _)| c == caller).map(|(_, g)| g.as_str())
    }
}

/// Builds the call graph of `class_unit` with BFS order from `organ_function`.
pub fn build_call_graph(class_unit: &SyntaxUnit, organ_function: &str) -> Result<CallGraph, CallGraphError> {
    if class_unit.kind != UnitKind::ClassDef {
        return Err(CallGraphError::NotAClass);
    }
    let class = class_unit.name.clone().unwrap_or_default();
    let mut nodes: Vec<String> = Vec::new();
    for f in class_unit.functions() {
        if let Some(n) = &f.name {
            if !nodes.contains(n) {
                nodes.push(n.clone());
            }
        }
    }
    if !nodes.iter().any(|n| n == organ_function) {
        return Err(CallGraphError::MissingFunction { class, function: organ_function.to_string() });
    }
    let node_set: HashSet<&str> = nodes.iter().map(String::as_str).collect();

    let mut edges: Vec<(String, String)> = Vec::new();
    for caller in &nodes {
        let mut seen: HashSet<String> = HashSet::new();
        for f in class_unit.functions().filter(|f| f.name.as_ref() == Some(caller)) {
            for leaf in f.children.iter().flat_map(|c| c.leaves()) {
                // keep first-reference order inside the statement text
                let mut refs: Vec<&String> =
                    leaf.facts.referenced.iter().filter(|r| node_set.contains(r.as_str())).collect();
                refs.sort_by_key(|r| leaf.text.find(r.as_str()).unwrap_or(usize::MAX));
                for r in refs {
                    if seen.insert(r.clone()) {
                        edges.push((caller.clone(), r.clone()));
                    }
                }
            }
        }
    }

    let mut graph = CallGraph { class, nodes, edges, entry_order: Vec::new() };
    let mut visited: HashSet<String> = HashSet::new();
    let mut queue = VecDeque::from([organ_function.to_string()]);
    visited.insert(organ_function.to_string());
    while let Some(f) = queue.pop_front() {
        let next: Vec<String> = graph.callees(&f).map(str::to_string).collect();
        graph.entry_order.push(f);
        for g in next {
            if visited.insert(g.clone()) {
                queue.push_back(g);
            }
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::parse;

    fn class(src: &str) -> SyntaxUnit {
        parse(src).unwrap().children.remove(0)
    }

    #[test]
    fn single_function_no_calls() {
        let g = build_call_graph(&class("class A { void f() { int x = 1; } }"), "f").unwrap();
        assert_eq!(g.nodes, ["f"]);
        assert!(g.edges.is_empty());
        assert_eq!(g.entry_order, ["f"]);
    }

    #[test]
    fn chain_is_breadth_first() {
        let src = "class A {\n  void h() { }\n  void g() { h(); }\n  void f() { g(); }\n}";
        let g = build_call_graph(&class(src), "f").unwrap();
        assert_eq!(g.entry_order, ["f", "g", "h"]);
        assert_eq!(g.nodes, ["h", "g", "f"]);
    }

    #[test]
    fn mutual_recursion_terminates() {
        let src = "class A {\n  void f() { g(); }\n  void g() { f(); }\n}";
        let g = build_call_graph(&class(src), "f").unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.entry_order, ["f", "g"]);
    }

    #[test]
    fn unreachable_functions_are_not_in_entry_order() {
        let src = "class A {\n  void f() { g(); }\n  void g() { }\n  void lonely() { f(); }\n}";
        let g = build_call_graph(&class(src), "f").unwrap();
        assert_eq!(g.entry_order, ["f", "g"]);
    }

    #[test]
    fn missing_function_is_named() {
        let err = build_call_graph(&class("class A { void f() { } }"), "zz").unwrap_err();
        assert_eq!(err.to_string(), "function `zz` not found in class `A`");
    }
}

//! Vein extraction: find the context definitions an organ depends on, keep
//! the latest one per variable, and prepend them to the organ.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{
    build_call_graph, definition_sites, free_identifiers, parse_lenient, CallGraph, DefOrigin, DefinitionSite,
    FreeIdentifiers, MiniLangTokenizer, SourcePos, StatementFacts, SyntaxUnit, Token, TokenKind, Tokenizer, UnitKind,
    WriteKind,
};
use crate::ingest::AddedBlock;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VeinError {
    #[error("no definition of `{0}` found in the donor context")]
    Unresolvable(String),
    #[error("dependency cycle among vein statements: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("vein does not cover: {}", join(.0))]
    CoverageGap(BTreeSet<String>),
    #[error("graft still reads undefined variables: {}", join(.0))]
    Unsound(BTreeSet<String>),
}

fn join(names: &BTreeSet<String>) -> String {
    names.iter().cloned().collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Organ {
    pub blocks: Vec<AddedBlock>,
    pub donor_class: Option<String>,
    pub donor_function: Option<String>,
    pub insertion_line: u32,
    pub free_vars: BTreeSet<String>,
    pub external_callees: BTreeSet<String>,
}

impl Organ {
    /// Analyzes `blocks` as an organ added at `insertion_line` of `context`.
    pub fn new(blocks: Vec<AddedBlock>, context: &SyntaxUnit, insertion_line: u32) -> Self {
        let donor_class = context.innermost(UnitKind::ClassDef, insertion_line).and_then(|c| c.name.clone());
        let donor_function = context.innermost(UnitKind::FunctionDef, insertion_line).and_then(|f| f.name.clone());
        let text = blocks.iter().map(AddedBlock::text).collect::<Vec<_>>().join("\n");
        let FreeIdentifiers { variables, external_callees } = free_identifiers(&parse_lenient(&text), Some(context));
        Organ { blocks, donor_class, donor_function, insertion_line, free_vars: variables, external_callees }
    }

    /// A single-block organ read from a file.
    pub fn from_source(path: &str, source: &str, context: &SyntaxUnit, insertion_line: u32) -> Self {
        let block = AddedBlock {
            path: path.to_string(),
            start_line: insertion_line,
            lines: source.lines().map(str::to_string).collect(),
        };
        Organ::new(vec![block], context, insertion_line)
    }

    pub fn text(&self) -> String {
        self.blocks.iter().map(AddedBlock::text).collect::<Vec<_>>().join("\n")
    }

    pub fn is_easy(&self) -> bool {
        self.free_vars.is_empty()
    }

    /// Call graph of the donor class from the organ's function, when both are known.
    pub fn call_graph(&self, context: &SyntaxUnit) -> Option<CallGraph> {
        let class = context.find_class(self.donor_class.as_deref()?)?;
        build_call_graph(class, self.donor_function.as_deref()?).ok()
    }
}

/// Every definition site, per organ free variable, that precedes the organ.
#[derive(Debug, Clone)]
pub struct RelatedCode<'a> {
    pub insertion_line: u32,
    pub sites: BTreeMap<String, Vec<DefinitionSite>>,
    organ_vars: BTreeSet<String>,
    scope: &'a SyntaxUnit,
    graph: Option<&'a CallGraph>,
}

impl<'a> RelatedCode<'a> {
    fn lookup(&self, variable: &str) -> Vec<DefinitionSite> {
        match self.sites.get(variable) {
            Some(s) => s.clone(),
            None => definition_sites(variable, &SourcePos::new("", self.insertion_line), self.scope, self.graph),
        }
    }
}

/// Records the statements that define or modify each free variable of the
/// organ: the enclosing function first, then class fields, then the class's
/// functions in call-graph order.
pub fn extract_related<'a>(
    organ: &Organ,
    context: &'a SyntaxUnit,
    graph: Option<&'a CallGraph>,
) -> Result<RelatedCode<'a>, VeinError> {
    let before = SourcePos::new("", organ.insertion_line);
    let mut sites = BTreeMap::new();
    for var in &organ.free_vars {
        let found = definition_sites(var, &before, context, graph);
        if found.is_empty() {
            return Err(VeinError::Unresolvable(var.clone()));
        }
        sites.insert(var.clone(), found);
    }
    Ok(RelatedCode {
        insertion_line: organ.insertion_line,
        sites,
        organ_vars: organ.free_vars.clone(),
        scope: context,
        graph,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VeinStatement {
    /// Text emitted into the graft.
    pub text: String,
    pub variable: String,
    pub declared_type: Option<String>,
    /// The context statement the value came from.
    pub source: StatementFacts,
    pub origin: DefOrigin,
    pub conditional_origin: bool,
    /// True when the text was rebuilt from a type and a value rather than copied.
    pub synthesized: bool,
}

impl VeinStatement {
    pub fn source_line(&self) -> u32 {
        self.source.line
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vein {
    pub statements: Vec<VeinStatement>,
    pub covered: BTreeSet<String>,
    /// Functions and classes the vein statements call or name.
    pub external_callees: BTreeSet<String>,
}

impl Vein {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn text(&self) -> String {
        self.statements.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n")
    }
}

fn choose(sites: &[DefinitionSite], before: u32) -> Option<&DefinitionSite> {
    sites.iter().filter(|s| s.facts.line < before).max_by_key(|s| s.facts.line).or(sites.last())
}

/// Type of `variable` from its declaration nearest above `line`, falling back
/// to any declaration.
fn declared_type(sites: &[DefinitionSite], variable: &str, line: u32) -> Option<String> {
    let typed = |s: &&DefinitionSite| s.facts.declared_types.contains_key(variable);
    let nearest = sites.iter().filter(typed).filter(|s| s.facts.line <= line).max_by_key(|s| s.facts.line);
    nearest.or_else(|| sites.iter().find(typed)).map(|s| s.facts.declared_types[variable].clone())
}

struct Selector<'r, 'a> {
    related: &'r RelatedCode<'a>,
    cache: HashMap<String, Vec<DefinitionSite>>,
    supplied: BTreeSet<String>,
    visiting: Vec<(String, u32)>,
    vein: Vein,
}

impl Selector<'_, '_> {
    fn sites(&mut self, var: &str) -> Vec<DefinitionSite> {
        if let Some(s) = self.cache.get(var) {
            return s.clone();
        }
        let s = self.related.lookup(var);
        self.cache.insert(var.to_string(), s.clone());
        s
    }

    fn free_of(&self, text: &str) -> FreeIdentifiers {
        free_identifiers(&parse_lenient(text), Some(self.related.scope))
    }

    fn need(&mut self, var: &str, before: u32) -> Result<(), VeinError> {
        if self.supplied.contains(var) {
            return Ok(());
        }
        let before = if self.related.organ_vars.contains(var) { self.related.insertion_line } else { before };
        self.supply(var, before)
    }

    /// Emits the latest definition of `var` above `before`, preceded by
    /// whatever it reads.
    fn supply(&mut self, var: &str, before: u32) -> Result<(), VeinError> {
        let sites = self.sites(var);
        let site = choose(&sites, before).cloned().ok_or_else(|| VeinError::Unresolvable(var.to_string()))?;
        let key = (var.to_string(), site.facts.line);
        if let Some(pos) = self.visiting.iter().position(|k| *k == key) {
            let mut path: Vec<String> = self.visiting[pos..].iter().map(|(v, _)| v.clone()).collect();
            path.push(var.to_string());
            return Err(VeinError::Cycle(path));
        }
        self.visiting.push(key);

        let write = site.facts.write_of(var).cloned();
        let verbatim = write.as_ref().is_some_and(|w| {
            w.kind == WriteKind::Declaration
                && site.facts.writes.len() == 1
                && site.facts.text.trim_end().ends_with(';')
                && !w.value.as_deref().is_some_and(|v| reads(v, var))
        });
        let ty = write
            .as_ref()
            .and_then(|w| w.declared_type.clone())
            .or_else(|| declared_type(&sites, var, site.facts.line));
        let (text, synthesized) = if verbatim {
            (site.facts.text.trim().to_string(), false)
        } else {
            let value = value_of(var, &site, &sites);
            let text = match (&ty, value) {
                (Some(t), Some(v)) => format!("{t} {var} = {v};"),
                (Some(t), None) => format!("{t} {var};"),
                (None, Some(v)) => format!("{var} = {v};"),
                (None, None) => format!("var {var};"),
            };
            (text, true)
        };

        let free = self.free_of(&text);
        self.vein.external_callees.extend(free.external_callees);
        for dep in free.variables.iter().filter(|d| d.as_str() != var) {
            self.need(dep, site.facts.line)?;
        }

        self.visiting.pop();
        self.supplied.insert(var.to_string());
        if !synthesized {
            self.supplied.extend(site.facts.defined.iter().cloned());
        }
        self.vein.statements.push(VeinStatement {
            text,
            variable: var.to_string(),
            declared_type: ty,
            source: site.facts.clone(),
            origin: site.origin.clone(),
            conditional_origin: site.conditional,
            synthesized,
        });
        Ok(())
    }
}

/// True when `expr` reads `var` as a plain identifier (not as a member).
fn reads(expr: &str, var: &str) -> bool {
    let tokens = MiniLangTokenizer.tokenize(expr);
    tokens.iter().enumerate().any(|(i, t)| t.is_ident(var) && !(i > 0 && is_member_op(&tokens[i - 1])))
}

fn is_member_op(t: &Token) -> bool {
    t.is(TokenKind::Dot) || t.is_punct("->") || t.is_punct("::")
}

/// Replaces plain reads of `var` in `expr` with `replacement`.
fn substitute(expr: &str, var: &str, replacement: &str) -> String {
    let tokens = MiniLangTokenizer.tokenize(expr);
    let mut out = String::new();
    let mut last = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_ident(var) && !(i > 0 && is_member_op(&tokens[i - 1])) {
            out.push_str(&expr[last..t.start]);
            out.push_str(replacement);
            last = t.end;
        }
    }
    out.push_str(&expr[last..]);
    out
}

fn grouped(expr: &str) -> String {
    let e = expr.trim();
    if MiniLangTokenizer.tokenize(e).len() <= 1 {
        e.to_string()
    } else {
        format!("({e})")
    }
}

/// The value `var` holds right after `site`, as a source expression. A write
/// that reads its own variable (`a = a - 1`, `a++`, `a += 2`) has the value
/// from the definition before it substituted in. `None` when the value is
/// unknown: a parameter, an uninitialized declaration, or an update with
/// nothing before it.
fn value_of(var: &str, site: &DefinitionSite, sites: &[DefinitionSite]) -> Option<String> {
    let w = site.facts.write_of(var)?;
    let expr = match w.kind {
        WriteKind::Parameter => return None,
        WriteKind::Declaration | WriteKind::Assign => w.value.clone()?.trim().to_string(),
        WriteKind::Update => {
            let op = update_operator(&w.text, var)?;
            match &w.value {
                Some(rhs) => format!("{var} {op} {}", grouped(rhs)),
                None => format!("{var} {op} 1"),
            }
        }
    };
    if !reads(&expr, var) {
        return Some(expr);
    }
    let earlier = sites.iter().filter(|s| s.facts.line < site.facts.line).max_by_key(|s| s.facts.line)?;
    let previous = value_of(var, earlier, sites)?;
    Some(substitute(&expr, var, &grouped(&previous)))
}

/// Binary operator applied by an update: `+` for `x++` or `x += e`.
fn update_operator(text: &str, var: &str) -> Option<String> {
    let t = text.trim();
    if t.contains("++") {
        return Some("+".into());
    }
    if t.contains("--") {
        return Some("-".into());
    }
    let rest = t.strip_prefix(var)?.trim_start();
    let op = &rest[..rest.find('=')?];
    (!op.is_empty()).then(|| op.trim().to_string())
}

/// Keeps the latest definition of each variable above the organ, restores
/// its declared type, and pulls in whatever those statements read, ordered so
/// every definition precedes its first use.
pub fn select_practical(related: &RelatedCode<'_>) -> Result<Vein, VeinError> {
    let mut sel = Selector {
        related,
        cache: HashMap::new(),
        supplied: BTreeSet::new(),
        visiting: Vec::new(),
        vein: Vein::default(),
    };
    let mut order: Vec<(u32, String)> = Vec::new();
    for var in &related.organ_vars {
        let sites = sel.sites(var);
        let site = choose(&sites, related.insertion_line).ok_or_else(|| VeinError::Unresolvable(var.clone()))?;
        order.push((site.facts.line, var.clone()));
    }
    order.sort();
    for (_, var) in order {
        sel.need(&var, related.insertion_line)?;
    }
    let mut vein = sel.vein;
    vein.covered = sel.supplied;
    Ok(vein)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub donor_repo: Option<String>,
    pub commit: Option<String>,
    pub donor_class: Option<String>,
    pub donor_function: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graft {
    pub text: String,
    pub organ_text: String,
    pub vein: Vein,
    pub provenance: Provenance,
    /// Functions and classes the host must provide; not inserted automatically.
    pub required_imports: BTreeSet<String>,
}

/// Vein statements followed by the organ lines, verbatim.
pub fn integrate(vein: Vein, organ: &Organ) -> Result<Graft, VeinError> {
    let missing: BTreeSet<String> = organ.free_vars.difference(&vein.covered).cloned().collect();
    if !missing.is_empty() {
        return Err(VeinError::CoverageGap(missing));
    }
    let organ_text = organ.text();
    let text = if vein.is_empty() { organ_text.clone() } else { format!("{}\n{}", vein.text(), organ_text) };
    let required_imports: BTreeSet<String> = organ.external_callees.union(&vein.external_callees).cloned().collect();

    let leftover: BTreeSet<String> = free_identifiers(&parse_lenient(&text), None)
        .variables
        .into_iter()
        .filter(|v| !required_imports.contains(v))
        .collect();
    if !leftover.is_empty() {
        return Err(VeinError::Unsound(leftover));
    }
    Ok(Graft {
        text,
        organ_text,
        vein,
        provenance: Provenance {
            donor_class: organ.donor_class.clone(),
            donor_function: organ.donor_function.clone(),
            ..Provenance::default()
        },
        required_imports,
    })
}

/// Runs related-code extraction, selection and integration for one organ.
pub fn build_graft(organ: &Organ, context: &SyntaxUnit) -> Result<Graft, VeinError> {
    if organ.free_vars.is_empty() {
        return integrate(Vein::default(), organ);
    }
    let graph = organ.call_graph(context);
    let related = extract_related(organ, context, graph.as_ref())?;
    integrate(select_practical(&related)?, organ)
}

const HEADER: &str = "// grafter:";
const REQUIRES: &str = "// requires:";
const VEIN_NOTE: &str = "// vein:";

/// A graft as stored on disk: provenance comments, then the graft text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraftFile {
    pub provenance: Provenance,
    pub required_imports: BTreeSet<String>,
    pub vein_notes: Vec<String>,
    pub text: String,
}

impl Graft {
    /// Renders the graft with its provenance header.
    pub fn export(&self) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        let field = |k: &str, v: &Option<String>| v.as_ref().map(|v| format!(" {k}={v}")).unwrap_or_default();
        out.push_str(HEADER);
        out.push_str(&field("donor-repo", &p.donor_repo));
        out.push_str(&field("commit", &p.commit));
        out.push_str(&field("class", &p.donor_class));
        out.push_str(&field("function", &p.donor_function));
        out.push('\n');
        if !self.required_imports.is_empty() {
            out.push_str(&format!("{REQUIRES} {}\n", join(&self.required_imports)));
        }
        if self.vein.is_empty() {
            out.push_str(&format!("{VEIN_NOTE} empty\n"));
        }
        for s in &self.vein.statements {
            let origin = match &s.origin {
                DefOrigin::Local => "local".to_string(),
                DefOrigin::Class => "class field".to_string(),
                DefOrigin::Callee(f) => format!("callee {f}"),
            };
            let cond = if s.conditional_origin { " conditional" } else { "" };
            out.push_str(&format!("{VEIN_NOTE} {} <- line {} ({origin}{cond})\n", s.variable, s.source_line()));
        }
        out.push_str(&self.text);
        out.push('\n');
        out
    }
}

impl GraftFile {
    pub fn parse(source: &str) -> GraftFile {
        let mut file = GraftFile::default();
        let mut body = Vec::new();
        let mut in_header = true;
        for line in source.lines() {
            if in_header {
                if let Some(rest) = line.strip_prefix(HEADER) {
                    for pair in rest.split_whitespace() {
                        let Some((k, v)) = pair.split_once('=') else { continue };
                        let v = Some(v.to_string());
                        match k {
                            "donor-repo" => file.provenance.donor_repo = v,
                            "commit" => file.provenance.commit = v,
                            "class" => file.provenance.donor_class = v,
                            "function" => file.provenance.donor_function = v,
                            _ => {}
                        }
                    }
                    continue;
                }
                if let Some(rest) = line.strip_prefix(REQUIRES) {
                    file.required_imports
                        .extend(rest.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string));
                    continue;
                }
                if let Some(rest) = line.strip_prefix(VEIN_NOTE) {
                    file.vein_notes.push(rest.trim().to_string());
                    continue;
                }
                in_header = false;
            }
            body.push(line);
        }
        file.text = body.join("\n");
        file
    }
}

//! Per-statement identifier facts: what a statement declares, writes and reads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lexer::{is_keyword, is_modifier, is_primitive_type, Token, TokenKind};

/// How a statement writes one identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteKind {
    /// `Type name = expr` or `Type name`
    Declaration,
    /// Function or catch parameter.
    Parameter,
    /// `name = expr`
    Assign,
    /// `name += expr`, `name++` and friends; reads the old value.
    Update,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Write {
    pub name: String,
    pub kind: WriteKind,
    /// Source text of the right-hand side, when there is one.
    pub value: Option<String>,
    pub declared_type: Option<String>,
    /// Source text of the whole write expression (`a=a-1`, `b++`, `int a = 10`).
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementFacts {
    /// First and last source line of the statement.
    pub line: u32,
    pub end_line: u32,
    pub text: String,
    /// Names introduced by declarations and parameters.
    pub defined: BTreeSet<String>,
    /// Names written (includes initialized declarations).
    pub assigned: BTreeSet<String>,
    /// Names read or called.
    pub referenced: BTreeSet<String>,
    /// Subset of `referenced` used in call position.
    pub called: BTreeSet<String>,
    /// Names used in type position (declarations, `new`, `throws`, `extends`).
    pub type_refs: BTreeSet<String>,
    pub declared_types: BTreeMap<String, String>,
    pub writes: Vec<Write>,
}

impl StatementFacts {
    /// True when the statement declares or writes `name`.
    pub fn touches(&self, name: &str) -> bool {
        self.defined.contains(name) || self.assigned.contains(name)
    }

    /// Reads in value position: referenced minus calls.
    pub fn value_reads(&self) -> impl Iterator<Item = &String> {
        self.referenced.iter().filter(|n| !self.called.contains(*n))
    }

    /// Last write of `name` in this statement.
    pub fn write_of(&self, name: &str) -> Option<&Write> {
        self.writes.iter().rev().find(|w| w.name == name)
    }

    pub(crate) fn merge(&mut self, other: StatementFacts) {
        self.defined.extend(other.defined);
        self.assigned.extend(other.assigned);
        self.referenced.extend(other.referenced);
        self.called.extend(other.called);
        self.type_refs.extend(other.type_refs);
        self.declared_types.extend(other.declared_types);
        self.writes.extend(other.writes);
    }
}

/// Extracts facts from the tokens of one statement (terminator excluded).
pub(crate) struct FactsBuilder<'a> {
    pub source: &'a str,
}

fn slice_text(source: &str, tokens: &[Token]) -> String {
    match (tokens.first(), tokens.last()) {
        (Some(a), Some(b)) => source[a.start..b.end].to_string(),
        _ => String::new(),
    }
}

fn is_open(t: &Token) -> bool {
    matches!(t.kind, TokenKind::LParen | TokenKind::LBracket | TokenKind::LBrace)
}

fn is_close(t: &Token) -> bool {
    matches!(t.kind, TokenKind::RParen | TokenKind::RBracket | TokenKind::RBrace)
}

/// Splits at depth-0 tokens matching `sep`.
pub(crate) fn split_top(tokens: &[Token], sep: impl Fn(&Token) -> bool) -> Vec<&[Token]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
        } else if depth == 0 && sep(t) {
            parts.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    parts.push(&tokens[start..]);
    parts
}

/// Index of the token closing the bracket opened at `open`.
pub(crate) fn matching_close(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Drops leading annotations, modifiers, `case X:` and `label:` prefixes.
pub(crate) fn strip_prefix(tokens: &[Token]) -> &[Token] {
    let mut t = tokens;
    loop {
        match t {
            [at, name, rest @ ..] if at.is(TokenKind::At) && name.is(TokenKind::Ident) => {
                let mut r = rest;
                while let [dot, _id, tail @ ..] = r {
                    if dot.is(TokenKind::Dot) {
                        r = tail;
                    } else {
                        break;
                    }
                }
                if r.first().is_some_and(|p| p.is(TokenKind::LParen)) {
                    match matching_close(r, 0) {
                        Some(close) => r = &r[close + 1..],
                        None => r = &[],
                    }
                }
                t = r;
            }
            [m, rest @ ..] if m.is(TokenKind::Ident) && is_modifier(&m.text) => t = rest,
            [c, rest @ ..] if c.is_ident("case") => match rest.iter().position(|x| x.is_punct(":")) {
                Some(p) => t = &rest[p + 1..],
                None => return &[],
            },
            [d, colon, rest @ ..] if d.is_ident("default") && colon.is_punct(":") => t = rest,
            [l, colon, rest @ ..]
                if l.is(TokenKind::Ident) && !is_keyword(&l.text) && colon.is_punct(":") && !rest.is_empty() =>
            {
                t = rest
            }
            _ => return t,
        }
    }
}

/// Parsed type expression at the head of a token slice.
pub(crate) struct TypeExpr {
    pub end: usize,
    pub idents: Vec<String>,
}

/// Parses `Type` forms: primitives, qualified names, generics, arrays, pointers, varargs.
pub(crate) fn parse_type(tokens: &[Token]) -> Option<TypeExpr> {
    let mut i = 0;
    let mut idents = Vec::new();
    let first = tokens.first()?;
    if !first.is(TokenKind::Ident) {
        return None;
    }
    if is_primitive_type(&first.text) {
        while tokens.get(i).is_some_and(|t| t.is(TokenKind::Ident) && is_primitive_type(&t.text)) {
            i += 1;
        }
        // `const Foo x`
        if let (Some(a), Some(b)) = (tokens.get(i), tokens.get(i + 1)) {
            if a.is(TokenKind::Ident) && !is_keyword(&a.text) && b.is(TokenKind::Ident) && !is_keyword(&b.text) {
                idents.push(a.text.clone());
                i += 1;
            }
        }
    } else if is_keyword(&first.text) {
        return None;
    } else {
        let mut last = first.text.clone();
        i = 1;
        while tokens.get(i).is_some_and(|t| t.is(TokenKind::Dot))
            && tokens.get(i + 1).is_some_and(|t| t.is(TokenKind::Ident))
        {
            last = tokens[i + 1].text.clone();
            i += 2;
        }
        idents.push(last);
    }
    // generics
    if tokens.get(i).is_some_and(|t| t.is_punct("<")) {
        let mut depth = 0i32;
        let mut j = i;
        loop {
            let t = tokens.get(j)?;
            match t.text.as_str() {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                ">>>" => depth -= 3,
                "," | "." | "?" | "[" | "]" | "&" => {}
                _ if t.is(TokenKind::Ident) => {
                    if !is_keyword(&t.text) && t.text != "extends" && t.text != "super" {
                        idents.push(t.text.clone());
                    }
                }
                _ => return None,
            }
            j += 1;
            if depth <= 0 {
                if depth < 0 {
                    return None;
                }
                break;
            }
        }
        i = j;
    }
    loop {
        match (tokens.get(i), tokens.get(i + 1)) {
            (Some(a), Some(b)) if a.is(TokenKind::LBracket) && b.is(TokenKind::RBracket) => i += 2,
            (Some(a), _) if a.is_punct("*") || a.is_punct("&") || a.is_punct("...") => i += 1,
            _ => break,
        }
    }
    Some(TypeExpr { end: i, idents })
}

const COMPOUND_OPS: &[&str] = &["+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="];

impl<'a> FactsBuilder<'a> {
    pub fn new(source: &'a str) -> Self {
        FactsBuilder { source }
    }

    fn base(&self, tokens: &[Token]) -> StatementFacts {
        StatementFacts {
            line: tokens.first().map_or(0, |t| t.line),
            end_line: tokens.last().map_or(0, |t| t.line),
            text: slice_text(self.source, tokens),
            ..Default::default()
        }
    }

    /// Facts for an ordinary statement.
    pub fn statement(&self, tokens: &[Token]) -> StatementFacts {
        let mut facts = self.base(tokens);
        let body = strip_prefix(tokens);
        let body = match body.first() {
            Some(t) if matches!(t.text.as_str(), "return" | "throw" | "yield" | "await" | "assert" | "delete") => {
                &body[1..]
            }
            _ => body,
        };
        if !self.declaration(body, &mut facts) {
            self.expression(body, &mut facts);
        }
        facts
    }

    /// Tries `Type a [= e], b [= e]`. Returns false without touching `facts` when
    /// the tokens are not a declaration.
    pub fn declaration(&self, tokens: &[Token], facts: &mut StatementFacts) -> bool {
        let Some(ty) = parse_type(tokens) else {
            return false;
        };
        if ty.end == 0 {
            return false;
        }
        let rest = &tokens[ty.end..];
        let declarators = split_top(rest, |t| t.is(TokenKind::Comma));
        let mut parsed = Vec::new();
        for d in &declarators {
            let Some(name) = d.first().filter(|t| t.is(TokenKind::Ident) && !is_keyword(&t.text)) else {
                return false;
            };
            let mut j = 1;
            // C arrays: `int a[10]`
            while d.get(j).is_some_and(|t| t.is(TokenKind::LBracket)) {
                match matching_close(d, j) {
                    Some(c) => j = c + 1,
                    None => return false,
                }
            }
            let init = match d.get(j) {
                None => None,
                Some(t) if t.is_punct("=") && d.len() > j + 1 => Some(&d[j + 1..]),
                _ => return false,
            };
            parsed.push((name, init, *d));
        }
        let type_text = slice_text(self.source, &tokens[..ty.end]);
        for id in ty.idents {
            facts.type_refs.insert(id);
        }
        for (name, init, whole) in parsed {
            let name = name.text.clone();
            facts.defined.insert(name.clone());
            facts.declared_types.insert(name.clone(), type_text.clone());
            let mut text = type_text.clone();
            text.push(' ');
            text.push_str(&slice_text(self.source, whole));
            if let Some(init) = init {
                self.expression(init, facts);
                facts.assigned.insert(name.clone());
            }
            facts.writes.push(Write {
                name,
                kind: WriteKind::Declaration,
                value: init.map(|i| slice_text(self.source, i)),
                declared_type: Some(type_text.clone()),
                text,
            });
        }
        true
    }

    /// Parameter list contents (between the parentheses). `None` when some
    /// element is not a parameter.
    pub fn parameters(&self, tokens: &[Token]) -> Option<StatementFacts> {
        let mut facts = self.base(tokens);
        if tokens.is_empty() {
            return Some(facts);
        }
        for p in split_top(tokens, |t| t.is(TokenKind::Comma)) {
            let p = strip_prefix(p);
            if p.is_empty() {
                return None;
            }
            if p.len() == 1 && (p[0].is_ident("self") || p[0].is_ident("this")) {
                continue;
            }
            let (name_idx, ty) = match parse_type(p) {
                Some(ty) if p.get(ty.end).is_some_and(|t| t.is(TokenKind::Ident) && !is_keyword(&t.text)) => {
                    (ty.end, Some((slice_text(self.source, &p[..ty.end]), ty.idents)))
                }
                _ if p[0].is(TokenKind::Ident) && !is_keyword(&p[0].text) => (0, None),
                _ => return None,
            };
            let name = p[name_idx].text.clone();
            let mut j = name_idx + 1;
            let mut declared_type = ty.as_ref().map(|(t, _)| t.clone());
            // `name: Type`
            if declared_type.is_none() && p.get(j).is_some_and(|t| t.is_punct(":")) {
                let tail = &p[j + 1..];
                let end = tail.iter().position(|t| t.is_punct("=")).unwrap_or(tail.len());
                let ty = parse_type(&tail[..end])?;
                if ty.end != end {
                    return None;
                }
                declared_type = Some(slice_text(self.source, &tail[..end]));
                facts.type_refs.extend(ty.idents);
                j += 1 + end;
            }
            match p.get(j) {
                None => {}
                Some(t) if t.is_punct("=") => self.expression(&p[j + 1..], &mut facts),
                _ => return None,
            }
            if let Some((_, idents)) = ty {
                facts.type_refs.extend(idents);
            }
            facts.defined.insert(name.clone());
            if let Some(t) = &declared_type {
                facts.declared_types.insert(name.clone(), t.clone());
            }
            facts.writes.push(Write {
                name,
                kind: WriteKind::Parameter,
                value: None,
                declared_type,
                text: slice_text(self.source, &p[..=name_idx]),
            });
        }
        Some(facts)
    }

    /// `for (...)` header contents.
    pub fn for_header(&self, inner: &[Token], facts: &mut StatementFacts) {
        let parts = split_top(inner, |t| t.is(TokenKind::Semi));
        if parts.len() >= 2 {
            let init = parts[0];
            let mut init_facts = self.base(init);
            if !self.declaration(init, &mut init_facts) {
                self.expression(init, &mut init_facts);
            }
            facts.merge(init_facts);
            for p in &parts[1..] {
                self.expression(p, facts);
            }
            return;
        }
        // for-each: `T x : xs`, `x in xs`, `const x of xs`
        let each = split_top(inner, |t| t.is_punct(":") || t.is_ident("in") || t.is_ident("of"));
        if each.len() == 2 {
            let (lhs, rhs) = (each[0], each[1]);
            let mut lhs_facts = self.base(lhs);
            if self.declaration(lhs, &mut lhs_facts) {
                facts.merge(lhs_facts);
            } else if let [name] = lhs {
                if name.is(TokenKind::Ident) && !is_keyword(&name.text) {
                    facts.defined.insert(name.text.clone());
                    facts.writes.push(Write {
                        name: name.text.clone(),
                        kind: WriteKind::Declaration,
                        value: None,
                        declared_type: None,
                        text: name.text.clone(),
                    });
                }
            } else {
                self.expression(lhs, facts);
            }
            self.expression(rhs, facts);
            return;
        }
        self.expression(inner, facts);
    }

    /// Records reads, calls and bare-name writes of an expression.
    pub fn expression(&self, tokens: &[Token], facts: &mut StatementFacts) {
        let mut call_parens: Vec<bool> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let t = &tokens[i];
            match t.kind {
                TokenKind::LParen => {
                    let is_call = i > 0 && {
                        let p = &tokens[i - 1];
                        (p.is(TokenKind::Ident) && !is_keyword(&p.text))
                            || p.is(TokenKind::RParen)
                            || p.is(TokenKind::RBracket)
                    };
                    call_parens.push(is_call);
                }
                TokenKind::RParen => {
                    call_parens.pop();
                }
                TokenKind::Ident => {
                    let prev = i.checked_sub(1).map(|p| &tokens[p]);
                    let member = prev.is_some_and(|p| p.is(TokenKind::Dot) || p.is_punct("::") || p.is_punct("->"));
                    if member {
                        i += 1;
                        continue;
                    }
                    if is_keyword(&t.text) {
                        if (t.text == "this" || t.text == "self")
                            && tokens.get(i + 1).is_some_and(|d| d.is(TokenKind::Dot))
                            && tokens.get(i + 2).is_some_and(|n| n.is(TokenKind::Ident) && !is_keyword(&n.text))
                        {
                            i = self.name(tokens, i + 2, i, &call_parens, facts);
                            continue;
                        }
                        if t.text == "new" {
                            i = self.new_expr(tokens, i + 1, facts);
                            continue;
                        }
                        i += 1;
                        continue;
                    }
                    i = self.name(tokens, i, i, &call_parens, facts);
                    continue;
                }
                _ => {}
            }
            i += 1;
        }
    }

    fn new_expr(&self, tokens: &[Token], start: usize, facts: &mut StatementFacts) -> usize {
        let mut j = start;
        let mut last = None;
        while let Some(t) = tokens.get(j) {
            if t.is(TokenKind::Ident) {
                last = Some(t.text.clone());
                j += 1;
            } else if t.is(TokenKind::Dot) {
                j += 1;
            } else {
                break;
            }
        }
        if let Some(name) = last.filter(|n| !is_keyword(n)) {
            facts.type_refs.insert(name);
        }
        if tokens.get(j).is_some_and(|t| t.is_punct("<")) {
            if let Some(ty) = parse_type(&tokens[j - 1..]) {
                facts.type_refs.extend(ty.idents);
                j = j - 1 + ty.end;
            }
        }
        j
    }

    /// Handles the identifier at `i` (`origin` is where its expression began,
    /// which differs for `this.x`). Returns the next index to scan.
    fn name(
        &self,
        tokens: &[Token],
        i: usize,
        origin: usize,
        call_parens: &[bool],
        facts: &mut StatementFacts,
    ) -> usize {
        let name = tokens[i].text.clone();
        let next = tokens.get(i + 1);
        let prev = origin.checked_sub(1).map(|p| &tokens[p]);
        if next.is_some_and(|n| n.is(TokenKind::LParen)) {
            facts.referenced.insert(name.clone());
            facts.called.insert(name);
            return i + 1;
        }
        if next.is_some_and(|n| n.is_punct("=")) {
            if call_parens.last() == Some(&true) {
                // named argument
                return i + 2;
            }
            let rhs_start = i + 2;
            let rhs_end = rhs_end(tokens, rhs_start);
            let rhs = &tokens[rhs_start..rhs_end];
            self.expression(rhs, facts);
            facts.assigned.insert(name.clone());
            facts.writes.push(Write {
                name,
                kind: WriteKind::Assign,
                value: Some(slice_text(self.source, rhs)),
                declared_type: None,
                text: slice_text(self.source, &tokens[origin..rhs_end]),
            });
            return rhs_end;
        }
        if next.is_some_and(|n| n.kind == TokenKind::Punct && COMPOUND_OPS.contains(&n.text.as_str())) {
            let rhs_start = i + 2;
            let rhs_end = rhs_end(tokens, rhs_start);
            let rhs = &tokens[rhs_start..rhs_end];
            self.expression(rhs, facts);
            facts.referenced.insert(name.clone());
            facts.assigned.insert(name.clone());
            facts.writes.push(Write {
                name,
                kind: WriteKind::Update,
                value: Some(slice_text(self.source, rhs)),
                declared_type: None,
                text: slice_text(self.source, &tokens[origin..rhs_end]),
            });
            return rhs_end;
        }
        let post = next.is_some_and(|n| n.is_punct("++") || n.is_punct("--"));
        let pre = prev.is_some_and(|p| p.is_punct("++") || p.is_punct("--"));
        if post || pre {
            facts.referenced.insert(name.clone());
            facts.assigned.insert(name.clone());
            let range = if post { origin..i + 2 } else { origin - 1..i + 1 };
            facts.writes.push(Write {
                name,
                kind: WriteKind::Update,
                value: None,
                declared_type: None,
                text: slice_text(self.source, &tokens[range]),
            });
            return if post { i + 2 } else { i + 1 };
        }
        facts.referenced.insert(name);
        i + 1
    }
}

/// End (exclusive) of an assignment right-hand side starting at `start`.
fn rhs_end(tokens: &[Token], start: usize) -> usize {
    let mut depth = 0i32;
    for (j, t) in tokens.iter().enumerate().skip(start) {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            if depth == 0 {
                return j;
            }
            depth -= 1;
        } else if depth == 0 && (t.is(TokenKind::Comma) || t.is(TokenKind::Semi)) {
            return j;
        }
    }
    tokens.len()
}

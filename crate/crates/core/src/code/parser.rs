//! Brace-structured parser producing [`SyntaxUnit`] trees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::facts::{matching_close, parse_type, strip_prefix, FactsBuilder, StatementFacts};
use super::lexer::{is_keyword, MiniLangTokenizer, Token, TokenKind, Tokenizer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unmatched '}}' at line {line}")]
    UnmatchedClose { line: u32 },
    #[error("unclosed '{{' opened at line {line}")]
    Unclosed { line: u32 },
}

impl ParseError {
    pub fn line(&self) -> u32 {
        match self {
            ParseError::UnmatchedClose { line } | ParseError::Unclosed { line } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Statement,
    FunctionDef,
    ClassDef,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    If,
    Else,
    For,
    While,
    Do,
    Switch,
    Try,
    Catch,
    Finally,
    Synchronized,
    /// A block opened by some other header (`translate(...) {`).
    Other,
}

impl Control {
    fn from_keyword(word: &str) -> Option<Control> {
        Some(match word {
            "if" => Control::If,
            "else" => Control::Else,
            "for" => Control::For,
            "while" => Control::While,
            "do" => Control::Do,
            "switch" => Control::Switch,
            "try" => Control::Try,
            "catch" => Control::Catch,
            "finally" => Control::Finally,
            "synchronized" => Control::Synchronized,
            _ => return None,
        })
    }

    pub fn is_branch_or_loop(self) -> bool {
        !matches!(self, Control::Try | Control::Finally | Control::Synchronized | Control::Other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn contains_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxUnit {
    pub kind: UnitKind,
    pub span: Span,
    pub text: String,
    /// Function or class name.
    pub name: Option<String>,
    pub control: Option<Control>,
    /// Header statement of a block, function or class (`if (x)`, the signature).
    pub header: Option<Box<SyntaxUnit>>,
    /// Facts of a statement leaf; empty for composite units.
    pub facts: StatementFacts,
    pub children: Vec<SyntaxUnit>,
    /// False when the closing brace was missing and supplied by lenient parsing.
    pub complete: bool,
    /// Byte offsets of the unit in the source.
    pub start: usize,
    pub end: usize,
    /// Byte offsets of the opening and closing braces of the body.
    pub body: Option<(usize, usize)>,
}

impl SyntaxUnit {
    fn leaf(facts: StatementFacts, start: usize, end: usize) -> SyntaxUnit {
        SyntaxUnit {
            kind: UnitKind::Statement,
            span: Span { start_line: facts.line, end_line: facts.end_line },
            text: facts.text.clone(),
            name: None,
            control: None,
            header: None,
            facts,
            children: Vec::new(),
            complete: true,
            start,
            end,
            body: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == UnitKind::Statement
    }

    /// Statement leaves in source order, headers included.
    pub fn leaves(&self) -> Vec<&SyntaxUnit> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a SyntaxUnit>) {
        if self.is_leaf() {
            out.push(self);
            return;
        }
        if let Some(h) = &self.header {
            out.push(h);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Pre-order walk over all units.
    pub fn walk(&self) -> Vec<&SyntaxUnit> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn functions(&self) -> impl Iterator<Item = &SyntaxUnit> {
        self.children.iter().filter(|c| c.kind == UnitKind::FunctionDef)
    }

    pub fn find_class(&self, name: &str) -> Option<&SyntaxUnit> {
        self.walk().into_iter().find(|u| u.kind == UnitKind::ClassDef && u.name.as_deref() == Some(name))
    }

    pub fn classes(&self) -> Vec<&SyntaxUnit> {
        self.walk().into_iter().filter(|u| u.kind == UnitKind::ClassDef).collect()
    }

    /// Innermost unit of `kind` whose span contains `line`.
    pub fn innermost(&self, kind: UnitKind, line: u32) -> Option<&SyntaxUnit> {
        if !self.span.contains_line(line) {
            return None;
        }
        let inner = self.children.iter().find_map(|c| c.innermost(kind, line));
        inner.or(if self.kind == kind { Some(self) } else { None })
    }
}

/// Parses MiniLang source. Unbalanced braces are an error.
pub fn parse(source: &str) -> Result<SyntaxUnit, ParseError> {
    Parser::new(source, false).run()
}

/// Parses a fragment, dropping stray `}` and closing unclosed blocks at the end.
pub fn parse_lenient(source: &str) -> SyntaxUnit {
    Parser::new(source, true).run().expect("lenient parsing never fails")
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    lenient: bool,
    facts: FactsBuilder<'a>,
}

const FUNCTION_PREFIXES: &[&str] = &["function", "def", "fn", "func", "fun", "module", "sub"];

impl<'a> Parser<'a> {
    fn new(source: &'a str, lenient: bool) -> Self {
        Parser { source, tokens: MiniLangTokenizer.tokenize(source), pos: 0, lenient, facts: FactsBuilder::new(source) }
    }

    fn run(mut self) -> Result<SyntaxUnit, ParseError> {
        let children = self.items(None)?;
        let line_count = self.source.lines().count().max(1) as u32;
        Ok(SyntaxUnit {
            kind: UnitKind::Block,
            span: Span { start_line: 1, end_line: line_count },
            text: self.source.to_string(),
            name: None,
            control: None,
            header: None,
            facts: StatementFacts::default(),
            children,
            complete: true,
            start: 0,
            end: self.source.len(),
            body: None,
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    /// Items until the closing brace of the block opened at `open_line`
    /// (or end of input at top level). The closing brace is not consumed.
    fn items(&mut self, open_line: Option<u32>) -> Result<Vec<SyntaxUnit>, ParseError> {
        let mut items = Vec::new();
        loop {
            let Some(tok) = self.peek() else {
                return match open_line {
                    Some(line) if !self.lenient => Err(ParseError::Unclosed { line }),
                    _ => Ok(items),
                };
            };
            match tok.kind {
                TokenKind::RBrace => {
                    if open_line.is_some() {
                        return Ok(items);
                    }
                    if !self.lenient {
                        return Err(ParseError::UnmatchedClose { line: tok.line });
                    }
                    self.pos += 1;
                }
                TokenKind::Semi => self.pos += 1,
                _ => {
                    if let Some(unit) = self.item()? {
                        items.push(unit);
                    }
                }
            }
        }
    }

    fn item(&mut self) -> Result<Option<SyntaxUnit>, ParseError> {
        let start = self.pos;
        let first = &self.tokens[start];
        if first.is(TokenKind::LBrace) {
            return self.block(start, start, Vec::new(), None, UnitKind::Block, None).map(Some);
        }

        // brace-less control statements: `if (x) return;`, `else foo();`
        if first.is(TokenKind::Ident) {
            if let Some(control) = Control::from_keyword(&first.text) {
                let header_end = if self.tokens.get(start + 1).is_some_and(|t| t.is(TokenKind::LParen)) {
                    matching_close(&self.tokens, start + 1).map(|c| c + 1)
                } else if matches!(control, Control::Else | Control::Do | Control::Try | Control::Finally) {
                    Some(start + 1)
                } else {
                    None
                };
                if let Some(h_end) = header_end {
                    let next = self.tokens.get(h_end);
                    let else_if = control == Control::Else && next.is_some_and(|t| t.is_ident("if"));
                    let statement_follows = next.is_some_and(|t| {
                        !t.is(TokenKind::LBrace) && !t.is(TokenKind::RBrace) && !t.is(TokenKind::Semi)
                    });
                    if else_if || statement_follows {
                        return self.braceless(start, h_end, control).map(Some);
                    }
                }
            }
        }

        // scan to `;`, `{` or `}` at depth 0
        let mut depth = 0i32;
        let mut i = start;
        while i < self.tokens.len() {
            let t = &self.tokens[i];
            match t.kind {
                TokenKind::LParen | TokenKind::LBracket => depth += 1,
                TokenKind::RParen | TokenKind::RBracket => depth -= 1,
                TokenKind::Semi if depth <= 0 => {
                    let unit = self.statement(start, i);
                    self.pos = i + 1;
                    return Ok(Some(unit));
                }
                TokenKind::RBrace if depth <= 0 => {
                    let unit = self.statement(start, i);
                    self.pos = i;
                    return Ok(Some(unit));
                }
                TokenKind::LBrace if depth > 0 => {
                    // lambda or initializer inside parentheses
                    match matching_close(&self.tokens, i) {
                        Some(c) => i = c,
                        None => i = self.tokens.len() - 1,
                    }
                }
                TokenKind::LBrace => {
                    let header = &self.tokens[start..i];
                    if is_initializer(header) {
                        match matching_close(&self.tokens, i) {
                            Some(c) => i = c,
                            None if self.lenient => i = self.tokens.len() - 1,
                            None => return Err(ParseError::Unclosed { line: t.line }),
                        }
                    } else {
                        let (kind, name, control) = classify_header(header);
                        return self.block(start, i, header.to_vec(), control, kind, name).map(Some);
                    }
                }
                _ => {}
            }
            i += 1;
        }
        let unit = self.statement(start, self.tokens.len());
        self.pos = self.tokens.len();
        Ok(Some(unit))
    }

    fn statement(&self, start: usize, end: usize) -> SyntaxUnit {
        let toks = &self.tokens[start..end];
        let mut facts = self.facts.statement(toks);
        let (s, e) = match (toks.first(), toks.last()) {
            (Some(a), Some(b)) => {
                // include the terminator in the text when present
                let e = match self.tokens.get(end) {
                    Some(t) if t.is(TokenKind::Semi) => t.end,
                    _ => b.end,
                };
                (a.start, e)
            }
            _ => (0, 0),
        };
        facts.text = self.source[s..e].to_string();
        SyntaxUnit::leaf(facts, s, e)
    }

    /// Header-only leaf for block-opening constructs.
    fn header_leaf(&self, header: &[Token], kind: UnitKind, control: Option<Control>) -> Option<SyntaxUnit> {
        let first = header.first()?;
        let last = header.last()?;
        let mut facts = StatementFacts {
            line: first.line,
            end_line: last.line,
            text: self.source[first.start..last.end].to_string(),
            ..Default::default()
        };
        let core = strip_prefix(header);
        match kind {
            UnitKind::FunctionDef => {
                if let Some((open, close)) = param_parens(core) {
                    if let Some(params) = self.facts.parameters(&core[open + 1..close]) {
                        facts.merge(params);
                    }
                    if let Some(ty) = parse_type(&core[..open.saturating_sub(1)]) {
                        facts.type_refs.extend(ty.idents);
                    }
                    for t in &core[close + 1..] {
                        if t.is(TokenKind::Ident) && !is_keyword(&t.text) {
                            facts.type_refs.insert(t.text.clone());
                        }
                    }
                }
            }
            UnitKind::ClassDef => {
                let pos = core.iter().position(is_class_keyword).unwrap_or(0);
                for t in core.iter().skip(pos + 2) {
                    if t.is(TokenKind::Ident) && !is_keyword(&t.text) {
                        facts.type_refs.insert(t.text.clone());
                    }
                }
            }
            _ => {
                let inner = if core.get(1).is_some_and(|t| t.is(TokenKind::LParen)) && control.is_some() {
                    matching_close(core, 1).map(|c| &core[2..c])
                } else {
                    None
                };
                match (control, inner) {
                    (Some(Control::For), Some(inner)) => self.facts.for_header(inner, &mut facts),
                    (Some(Control::Catch), Some(inner)) => {
                        if let Some(p) = self.facts.parameters(inner) {
                            facts.merge(p);
                        }
                    }
                    (Some(Control::Try), Some(inner)) => {
                        for part in super::facts::split_top(inner, |t| t.is(TokenKind::Semi)) {
                            let mut f = StatementFacts::default();
                            if !self.facts.declaration(part, &mut f) {
                                self.facts.expression(part, &mut f);
                            }
                            facts.merge(f);
                        }
                    }
                    _ => self.facts.expression(core, &mut facts),
                }
            }
        }
        Some(SyntaxUnit::leaf(facts, first.start, last.end))
    }

    fn block(
        &mut self,
        start: usize,
        brace: usize,
        header: Vec<Token>,
        control: Option<Control>,
        kind: UnitKind,
        name: Option<String>,
    ) -> Result<SyntaxUnit, ParseError> {
        let open = self.tokens[brace].clone();
        self.pos = brace + 1;
        let children = self.items(Some(open.line))?;
        let (close_start, close_end, end_line, complete) = match self.peek() {
            Some(t) if t.is(TokenKind::RBrace) => {
                let r = (t.start, t.end, t.line, true);
                self.pos += 1;
                r
            }
            _ => {
                let last_line = self.source.lines().count().max(1) as u32;
                (self.source.len(), self.source.len(), last_line, false)
            }
        };
        let first = &self.tokens[start];
        let header_leaf = self.header_leaf(&header, kind, control);
        let unit_kind = kind;
        Ok(SyntaxUnit {
            kind: unit_kind,
            span: Span { start_line: first.line, end_line },
            text: self.source[first.start..close_end].to_string(),
            name,
            control,
            header: header_leaf.map(Box::new),
            facts: StatementFacts::default(),
            children,
            complete,
            start: first.start,
            end: close_end,
            body: Some((open.start, close_start)),
        })
    }

    /// `if (x) stmt;` and friends: a block whose body is the single following item.
    fn braceless(&mut self, start: usize, header_end: usize, control: Control) -> Result<SyntaxUnit, ParseError> {
        let header: Vec<Token> = self.tokens[start..header_end].to_vec();
        self.pos = header_end;
        let body = self.item()?;
        let first = &self.tokens[start];
        let (end, end_line) = match &body {
            Some(b) => (b.end, b.span.end_line),
            None => (header.last().map_or(first.end, |t| t.end), first.line),
        };
        let header_leaf = self.header_leaf(&header, UnitKind::Block, Some(control));
        Ok(SyntaxUnit {
            kind: UnitKind::Block,
            span: Span { start_line: first.line, end_line },
            text: self.source[first.start..end].to_string(),
            name: None,
            control: Some(control),
            header: header_leaf.map(Box::new),
            facts: StatementFacts::default(),
            children: body.into_iter().collect(),
            complete: true,
            start: first.start,
            end,
            body: None,
        })
    }
}

fn is_class_keyword(t: &Token) -> bool {
    t.is(TokenKind::Ident) && matches!(t.text.as_str(), "class" | "interface" | "enum" | "struct")
}

/// A `{` that belongs to an expression (array initializer, anonymous class,
/// object literal) rather than opening a block.
fn is_initializer(header: &[Token]) -> bool {
    let Some(last) = header.last() else {
        return false;
    };
    if last.is_punct("=") || last.is(TokenKind::Comma) || last.is_punct("->") || last.is_punct("=>") {
        return true;
    }
    if header.first().is_some_and(|t| t.is_ident("return")) {
        return true;
    }
    let core = strip_prefix(header);
    if core.iter().any(|t| t.is_ident("new")) && !core.first().is_some_and(|t| Control::from_keyword(&t.text).is_some())
    {
        return true;
    }
    false
}

/// Locates the parameter parentheses of a function signature.
fn param_parens(core: &[Token]) -> Option<(usize, usize)> {
    let open = core.iter().position(|t| t.is(TokenKind::LParen))?;
    let close = matching_close(core, open)?;
    Some((open, close))
}

fn classify_header(header: &[Token]) -> (UnitKind, Option<String>, Option<Control>) {
    let core = strip_prefix(header);
    let Some(first) = core.first() else {
        return (UnitKind::Block, None, None);
    };
    if let Some(control) = Control::from_keyword(&first.text).filter(|_| first.is(TokenKind::Ident)) {
        return (UnitKind::Block, None, Some(control));
    }
    if let Some(pos) = core.iter().position(is_class_keyword) {
        if let Some(name) = core.get(pos + 1).filter(|t| t.is(TokenKind::Ident)) {
            return (UnitKind::ClassDef, Some(name.text.clone()), None);
        }
    }
    if let Some(name) = function_name(core) {
        return (UnitKind::FunctionDef, Some(name), None);
    }
    (UnitKind::Block, None, Some(Control::Other))
}

/// `Type name(params) [throws ...]` or typeless `name(params)`.
fn function_name(core: &[Token]) -> Option<String> {
    let (open, close) = param_parens(core)?;
    if open == 0 {
        return None;
    }
    let name = &core[open - 1];
    if !name.is(TokenKind::Ident) || is_keyword(&name.text) {
        return None;
    }
    let before = &core[..open - 1];
    let before = match before.first() {
        Some(t) if FUNCTION_PREFIXES.contains(&t.text.as_str()) => &before[1..],
        _ => before,
    };
    if !before.is_empty() {
        let ty = parse_type(before)?;
        if ty.end != before.len() {
            return None;
        }
    }
    if !params_look_valid(&core[open + 1..close]) {
        return None;
    }
    let trailer = &core[close + 1..];
    let trailer_ok = match trailer.first() {
        None => true,
        Some(t) if t.is_ident("throws") || t.is_ident("const") || t.is_ident("override") => {
            trailer[1..].iter().all(|t| t.is(TokenKind::Ident) || t.is(TokenKind::Comma) || t.is(TokenKind::Dot))
        }
        Some(t) if t.is_punct(":") || t.is_punct("->") => {
            parse_type(&trailer[1..]).is_some_and(|ty| ty.end == trailer.len() - 1)
        }
        _ => false,
    };
    trailer_ok.then(|| name.text.clone())
}

fn params_look_valid(inner: &[Token]) -> bool {
    if inner.is_empty() {
        return true;
    }
    super::facts::split_top(inner, |t| t.is(TokenKind::Comma)).into_iter().all(|p| {
        let p = strip_prefix(p);
        match p {
            [] => false,
            [single] => single.is(TokenKind::Ident),
            _ => {
                let name_idx = match parse_type(p) {
                    Some(ty) if p.get(ty.end).is_some_and(|t| t.is(TokenKind::Ident) && !is_keyword(&t.text)) => ty.end,
                    _ if p[0].is(TokenKind::Ident) => 0,
                    _ => return false,
                };
                p.get(name_idx + 1).is_none() || p.get(name_idx + 1).is_some_and(|t| t.is_punct("=") || t.is_punct(":"))
            }
        }
    })
}

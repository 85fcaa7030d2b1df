//! Brute-force free-variable finder used to cross-check the analyzer.
//!
//! Works on its own token list: every scope is a token interval, every
//! binding records the scope it lives in and the token from which it is
//! visible, and every read is checked against all bindings of that name.

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num,
    Str,
    Sym(String),
}

impl Tok {
    fn sym(&self, s: &str) -> bool {
        matches!(self, Tok::Sym(x) if x == s)
    }

    fn word(&self) -> Option<&str> {
        match self {
            Tok::Word(w) => Some(w),
            _ => None,
        }
    }

    fn is_word(&self, s: &str) -> bool {
        self.word() == Some(s)
    }
}

const TWO_CHAR: [&str; 16] =
    ["==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "->", "::", "=>"];

fn lex(src: &str) -> Vec<Tok> {
    let b: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && b.get(i + 1) == Some(&'/') {
            while i < b.len() && b[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && b.get(i + 1) == Some(&'*') {
            i += 2;
            while i < b.len() && !(b[i] == '*' && b.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '"' || c == '\'' {
            i += 1;
            while i < b.len() && b[i] != c {
                if b[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            out.push(Tok::Str);
        } else if c.is_ascii_digit() {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == '.' || b[i] == '_') {
                i += 1;
            }
            out.push(Tok::Num);
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_alphanumeric() || b[i] == '_') {
                i += 1;
            }
            out.push(Tok::Word(b[start..i].iter().collect()));
        } else {
            let pair: String = b[i..(i + 2).min(b.len())].iter().collect();
            if TWO_CHAR.contains(&pair.as_str()) {
                out.push(Tok::Sym(pair));
                i += 2;
            } else {
                out.push(Tok::Sym(c.to_string()));
                i += 1;
            }
        }
    }
    out
}

const TYPES: [&str; 16] = [
    "void", "int", "long", "short", "byte", "char", "boolean", "bool", "float", "double", "unsigned", "signed", "var",
    "let", "const", "auto",
];
const MODIFIERS: [&str; 16] = [
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
    "synchronized",
    "volatile",
    "transient",
    "native",
    "override",
    "virtual",
    "inline",
    "extern",
    "export",
    "readonly",
];
const RESERVED: [&str; 44] = [
    "if",
    "else",
    "for",
    "while",
    "do",
    "switch",
    "case",
    "default",
    "break",
    "continue",
    "return",
    "new",
    "delete",
    "this",
    "self",
    "super",
    "null",
    "nil",
    "true",
    "false",
    "class",
    "interface",
    "enum",
    "struct",
    "extends",
    "implements",
    "throws",
    "throw",
    "try",
    "catch",
    "finally",
    "import",
    "package",
    "instanceof",
    "typeof",
    "function",
    "goto",
    "assert",
    "yield",
    "await",
    "async",
    "in",
    "of",
    "sizeof",
];

fn reserved(w: &str) -> bool {
    RESERVED.contains(&w) || TYPES.contains(&w) || MODIFIERS.contains(&w)
}

fn user_word(t: &Tok) -> Option<&str> {
    t.word().filter(|w| !reserved(w))
}

fn names_a_class(w: &str) -> bool {
    w.starts_with(|c: char| c.is_ascii_uppercase()) && w.chars().any(|c| c.is_ascii_lowercase())
}

struct Binding {
    name: String,
    scope: usize,
    from: usize,
}

enum Event {
    Read(String),
    /// `name = expr` binds `name` in `scope` from `from` unless already visible.
    Assign {
        name: String,
        scope: usize,
        from: usize,
    },
}

struct Walk {
    toks: Vec<Tok>,
    scopes: Vec<(usize, usize)>,
    bindings: Vec<Binding>,
    events: Vec<(usize, Event)>,
}

/// Free variable names of a MiniLang source, found without the crate's lexer or parser.
pub fn free_variables(src: &str) -> BTreeSet<String> {
    let toks = lex(src);
    let n = toks.len();
    let mut w = Walk { toks, scopes: vec![(0, n + 1)], bindings: Vec::new(), events: Vec::new() };
    w.block(0, n, 0, false);
    w.resolve()
}

impl Walk {
    fn at(&self, i: usize) -> Option<&Tok> {
        self.toks.get(i)
    }

    fn sym_at(&self, i: usize, s: &str) -> bool {
        self.at(i).is_some_and(|t| t.sym(s))
    }

    fn matching(&self, open: usize) -> usize {
        let (o, c) = match &self.toks[open] {
            Tok::Sym(s) if s == "(" => ("(", ")"),
            Tok::Sym(s) if s == "[" => ("[", "]"),
            Tok::Sym(s) if s == "{" => ("{", "}"),
            Tok::Sym(s) if s == "<" => ("<", ">"),
            t => panic!("no bracket at {open}: {t:?}"),
        };
        let mut depth = 0;
        for k in open..self.toks.len() {
            if self.toks[k].sym(o) {
                depth += 1;
            } else if self.toks[k].sym(c) {
                depth -= 1;
                if depth == 0 {
                    return k;
                }
            }
        }
        self.toks.len()
    }

    /// Index of the `;` ending the statement that starts at `i`.
    fn semi(&self, i: usize, end: usize) -> usize {
        let mut depth = 0i32;
        for k in i..end {
            match &self.toks[k] {
                Tok::Sym(s) if s == "(" || s == "[" || s == "{" => depth += 1,
                Tok::Sym(s) if s == ")" || s == "]" || s == "}" => depth -= 1,
                Tok::Sym(s) if s == ";" && depth == 0 => return k,
                _ => {}
            }
        }
        end
    }

    fn scope(&mut self, start: usize, end: usize) -> usize {
        self.scopes.push((start, end));
        self.scopes.len() - 1
    }

    fn bind(&mut self, name: &str, scope: usize, from: usize) {
        self.bindings.push(Binding { name: name.to_string(), scope, from });
    }

    fn read(&mut self, name: &str, at: usize) {
        self.events.push((at, Event::Read(name.to_string())));
    }

    fn visible(&self, name: &str, at: usize) -> bool {
        self.bindings.iter().any(|b| {
            let (s, e) = self.scopes[b.scope];
            b.name == name && s <= at && at < e && b.from <= at
        })
    }

    fn resolve(mut self) -> BTreeSet<String> {
        let mut events = std::mem::take(&mut self.events);
        events.sort_by_key(|(i, _)| *i);
        let mut free = BTreeSet::new();
        for (at, e) in events {
            match e {
                Event::Read(name) => {
                    if !self.visible(&name, at) {
                        free.insert(name);
                    }
                }
                Event::Assign { name, scope, from } => {
                    if !self.visible(&name, at) {
                        self.bind(&name, scope, from);
                    }
                }
            }
        }
        free
    }

    fn block(&mut self, a: usize, b: usize, scope: usize, is_class: bool) {
        self.hoist(a, b, scope, is_class);
        let mut i = a;
        while i < b {
            i = self.statement(i, b, scope);
        }
    }

    /// Functions and classes are visible in their whole block, fields in the whole class body.
    fn hoist(&mut self, a: usize, b: usize, scope: usize, is_class: bool) {
        let mut k = a;
        let mut start = a;
        while k < b {
            let t = self.toks[k].clone();
            if t.sym("{") {
                k = self.matching(k) + 1;
                start = k;
                continue;
            }
            if t.sym("(") {
                let close = self.matching(k);
                let named =
                    k > a && user_word(&self.toks[k - 1]).is_some() && !(k >= a + 2 && self.toks[k - 2].sym("."));
                if named && self.sym_at(close + 1, "{") {
                    let name = self.toks[k - 1].word().unwrap().to_string();
                    self.bind(&name, scope, a);
                }
                k = close + 1;
                continue;
            }
            if (t.is_word("class") || t.is_word("interface")) && self.at(k + 1).and_then(user_word).is_some() {
                let name = self.toks[k + 1].word().unwrap().to_string();
                self.bind(&name, scope, a);
            }
            if t.sym(";") {
                if is_class {
                    if let Some(decls) = self.declaration(start, k) {
                        for (name, _) in decls {
                            self.bind(&name, scope, a);
                        }
                    }
                }
                start = k + 1;
            }
            k += 1;
        }
    }

    fn statement(&mut self, i: usize, end: usize, scope: usize) -> usize {
        let t = self.toks[i].clone();
        if t.sym(";") {
            return i + 1;
        }
        if t.sym("{") {
            let c = self.matching(i);
            let s = self.scope(i, c + 1);
            self.block(i + 1, c, s, false);
            return c + 1;
        }
        let Some(word) = t.word() else {
            let semi = self.semi(i, end);
            self.simple(i, semi, scope);
            return semi + 1;
        };
        match word {
            "else" | "try" | "finally" | "do" => i + 1,
            w if MODIFIERS.contains(&w) => i + 1,
            "if" | "while" | "switch" => {
                if self.sym_at(i + 1, "(") {
                    let c = self.matching(i + 1);
                    self.expr(i + 2, c);
                    c + 1
                } else {
                    i + 1
                }
            }
            "for" => {
                let c = self.matching(i + 1);
                let body_end =
                    if self.sym_at(c + 1, "{") { self.matching(c + 1) + 1 } else { self.semi(c + 1, end) + 1 };
                let s = self.scope(i + 1, body_end);
                self.for_header(i + 2, c, s);
                self.statement(c + 1, end, s)
            }
            "catch" => {
                let c = self.matching(i + 1);
                let bc = self.matching(c + 1);
                let s = self.scope(i + 1, bc + 1);
                if let Some(name) = (i + 2..c).rev().find_map(|k| user_word(&self.toks[k])) {
                    let name = name.to_string();
                    self.bind(&name, s, i + 1);
                }
                self.statement(c + 1, end, s)
            }
            "return" | "throw" => {
                let semi = self.semi(i, end);
                self.expr(i + 1, semi);
                semi + 1
            }
            "break" | "continue" => self.semi(i, end) + 1,
            "class" | "interface" => {
                let open = (i..end).find(|k| self.toks[*k].sym("{")).unwrap_or(end);
                let c = self.matching(open);
                let s = self.scope(open, c + 1);
                self.block(open + 1, c, s, true);
                c + 1
            }
            _ => {
                if let Some(open) = self.function_def(i) {
                    let c = self.matching(open);
                    let bc = self.matching(c + 1);
                    let s = self.scope(open, bc + 1);
                    self.params(open + 1, c, s);
                    let body = self.scope(c + 1, bc + 1);
                    self.block(c + 2, bc, body, false);
                    return bc + 1;
                }
                let semi = self.semi(i, end);
                if let Some(decls) = self.declaration(i, semi) {
                    for (_, init) in &decls {
                        if let Some((a, b)) = init {
                            self.expr(*a, *b);
                        }
                    }
                    for (name, _) in decls {
                        self.bind(&name, scope, semi);
                    }
                } else {
                    self.simple(i, semi, scope);
                }
                semi + 1
            }
        }
    }

    /// `[Type] name(params) {` starting at `i`; returns the index of `(`.
    fn function_def(&self, i: usize) -> Option<usize> {
        let mut k = i;
        while let Some(t) = self.at(k) {
            if t.sym("(") {
                break;
            }
            if t.sym("<") {
                k = self.matching(k) + 1;
                continue;
            }
            if t.word().is_some() || t.sym("[") || t.sym("]") {
                k += 1;
                continue;
            }
            return None;
        }
        if k == i || user_word(self.at(k - 1)?).is_none() {
            return None;
        }
        let c = self.matching(k);
        self.sym_at(c + 1, "{").then_some(k)
    }

    fn params(&mut self, a: usize, b: usize, scope: usize) {
        let mut part_end = a;
        let mut depth = 0;
        for k in a..=b {
            let t = if k < b { self.toks[k].clone() } else { Tok::Sym(",".into()) };
            if t.sym("<") {
                depth += 1;
            } else if t.sym(">") {
                depth -= 1;
            } else if t.sym(",") && depth == 0 {
                if let Some(name) = (part_end..k).rev().find_map(|j| user_word(&self.toks[j])) {
                    let name = name.to_string();
                    self.bind(&name, scope, a - 1);
                }
                part_end = k + 1;
            }
        }
    }

    fn for_header(&mut self, a: usize, b: usize, scope: usize) {
        let semis: Vec<usize> = (a..b).filter(|k| self.toks[*k].sym(";")).collect();
        if semis.is_empty() {
            if let Some(colon) = (a..b).find(|k| self.toks[*k].sym(":")) {
                if let Some(name) = (a..colon).rev().find_map(|k| user_word(&self.toks[k])) {
                    let name = name.to_string();
                    self.bind(&name, scope, a - 1);
                }
                self.expr(colon + 1, b);
            }
            return;
        }
        let (init_end, cond_end) = (semis[0], semis.get(1).copied().unwrap_or(b));
        if let Some(decls) = self.declaration(a, init_end) {
            for (name, _) in &decls {
                self.bind(name, scope, a - 1);
            }
            for (_, init) in decls {
                if let Some((x, y)) = init {
                    self.expr(x, y);
                }
            }
        } else if a < init_end {
            self.simple(a, init_end, scope);
        }
        self.expr(init_end + 1, cond_end);
        if cond_end + 1 < b {
            self.simple(cond_end + 1, b, scope);
        }
    }

    /// `[mods] Type[<..>][[]] name [= init] (, name [= init])*` between `a` and the `;` at `semi`.
    #[allow(clippy::type_complexity)]
    fn declaration(&self, a: usize, semi: usize) -> Option<Vec<(String, Option<(usize, usize)>)>> {
        let mut k = a;
        while self.at(k).and_then(Tok::word).is_some_and(|w| MODIFIERS.contains(&w)) {
            k += 1;
        }
        let ty = self.at(k)?.word()?;
        if RESERVED.contains(&ty) {
            return None;
        }
        k += 1;
        if self.sym_at(k, "<") {
            k = self.matching(k) + 1;
        }
        while self.sym_at(k, "[") && self.sym_at(k + 1, "]") {
            k += 2;
        }
        if k >= semi || user_word(&self.toks[k]).is_none() {
            return None;
        }
        if !(k + 1 == semi || self.sym_at(k + 1, "=") || self.sym_at(k + 1, ",")) {
            return None;
        }
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut part = k;
        for j in k..=semi {
            let t = if j < semi { self.toks[j].clone() } else { Tok::Sym(",".into()) };
            match &t {
                Tok::Sym(s) if s == "(" || s == "[" || s == "{" => depth += 1,
                Tok::Sym(s) if s == ")" || s == "]" || s == "}" => depth -= 1,
                Tok::Sym(s) if s == "," && depth == 0 => {
                    let name = user_word(&self.toks[part])?.to_string();
                    let init = self.sym_at(part + 1, "=").then_some((part + 2, j));
                    out.push((name, init));
                    part = j + 1;
                }
                _ => {}
            }
        }
        Some(out)
    }

    /// Assignment, update or expression statement.
    fn simple(&mut self, a: usize, b: usize, scope: usize) {
        if a >= b {
            return;
        }
        if let Some(name) = user_word(&self.toks[a]).map(str::to_string) {
            let next = self.at(a + 1).cloned();
            match next {
                Some(Tok::Sym(s)) if s == "=" => {
                    self.expr(a + 2, b);
                    self.events.push((a, Event::Assign { name, scope, from: b }));
                    return;
                }
                Some(Tok::Sym(s)) if ["+=", "-=", "*=", "/=", "%="].contains(&s.as_str()) => {
                    self.read(&name, a);
                    self.expr(a + 2, b);
                    return;
                }
                _ => {}
            }
        }
        self.expr(a, b);
    }

    fn expr(&mut self, a: usize, b: usize) {
        let mut k = a;
        while k < b {
            let t = self.toks[k].clone();
            if let Tok::Word(w) = &t {
                if (w == "this" || w == "self") && self.sym_at(k + 1, ".") {
                    if let Some(field) = self.at(k + 2).and_then(user_word).map(str::to_string) {
                        if !self.sym_at(k + 3, "(") {
                            self.read(&field, k + 2);
                        }
                        k += 3;
                        continue;
                    }
                }
                let member = k > 0 && [".", "->", "::"].iter().any(|s| self.toks[k - 1].sym(s));
                let call = self.sym_at(k + 1, "(");
                if !reserved(w) && !member && !call && !names_a_class(w) {
                    self.read(w, k);
                }
            }
            k += 1;
        }
    }
}

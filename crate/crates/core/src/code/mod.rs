//! Parsing and static analysis of MiniLang, the brace-language subset used for
//! donor and host sources.

pub mod callgraph;
pub mod definitions;
pub mod facts;
pub mod lexer;
pub mod parser;
pub mod scope;

pub use callgraph::{build_call_graph, CallGraph, CallGraphError};
pub use definitions::{definition_sites, last_definitions, DefOrigin, DefinitionSite, SourcePos};
pub use facts::{StatementFacts, Write, WriteKind};
pub use lexer::{MiniLangTokenizer, Token, TokenKind, Tokenizer};
pub use parser::{parse, parse_lenient, Control, ParseError, Span, SyntaxUnit, UnitKind};
pub use scope::{free_identifiers, FreeIdentifiers};

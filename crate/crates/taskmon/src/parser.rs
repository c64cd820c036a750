//! Recursive-descent parser for `.spec` text.
//!
//! Surface syntax, loosest-binding first (`ensuring` < `or` < `;` <
//! `achieve`), all binary forms left-associative, parentheses override:
//!
//! ```text
//! spec      := choice ("ensuring" pred)*
//! choice    := seq ("or" seq)*
//! seq       := primary (";" primary)*
//! primary   := "achieve" goal | "(" spec ")"
//! goal      := atom | "(" pred (";" pred)* ")"
//! pred      := conj ("or" conj)*        # predicate context
//! conj      := factor ("and" factor)*
//! factor    := atom | "(" pred ")"
//! atom      := IDENT [ "(" NUMBER ("," NUMBER)* ")" ]
//! ```
//!
//! `achieve (b1; b2; ...)` is sugar for `achieve b1; achieve b2; ...` and is
//! desugared here; the AST never contains it. `#` starts a line comment.
//! Errors carry `file:line:col` positions.

use std::fmt;

use thiserror::Error;

use crate::ast::SpecAst;
use crate::predicate::{PredicateAst, PredicateRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
#[error("{file}:{pos}: {message}")]
pub struct ParseError {
    pub file: String,
    pub pos: Pos,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Achieve,
    Ensuring,
    Or,
    And,
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Achieve => write!(f, "`achieve`"),
            Tok::Ensuring => write!(f, "`ensuring`"),
            Tok::Or => write!(f, "`or`"),
            Tok::And => write!(f, "`and`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(x) => write!(f, "`{x}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    i: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            i: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.i];
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.i + 1).copied()
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, (Pos, String)> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c == b'#' {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if c.is_ascii_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let pos = self.pos();
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, pos));
                return Ok(out);
            };
            let tok = match c {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = self.i;
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == b'_' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let word = std::str::from_utf8(&self.src[start..self.i]).unwrap();
                    match word {
                        "achieve" => Tok::Achieve,
                        "ensuring" => Tok::Ensuring,
                        "or" => Tok::Or,
                        "and" => Tok::And,
                        _ => Tok::Ident(word.to_string()),
                    }
                }
                b'0'..=b'9' | b'.' => self.number(pos)?,
                b'-' => {
                    if matches!(self.peek2(), Some(b'0'..=b'9') | Some(b'.')) {
                        self.number(pos)?
                    } else {
                        return Err((pos, "stray `-` (expected a number)".to_string()));
                    }
                }
                other => {
                    return Err((pos, format!("unexpected character `{}`", other as char)));
                }
            };
            out.push((tok, pos));
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, (Pos, String)> {
        let start = self.i;
        if self.peek() == Some(b'-') {
            self.bump();
        }
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' | b'.' | b'e' | b'E' => {
                    self.bump();
                }
                b'+' | b'-' => {
                    // sign is part of the literal only right after an exponent marker
                    let prev = self.src[self.i - 1];
                    if prev == b'e' || prev == b'E' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.i]).unwrap();
        text.parse::<f64>()
            .map(Tok::Number)
            .map_err(|_| (pos, format!("malformed number literal `{text}`")))
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    file: String,
    registry: &'a PredicateRegistry,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, pos: Pos, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            file: self.file.clone(),
            pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(self.pos(), format!("expected {what}, found {}", self.peek()))
        }
    }

    fn spec(&mut self) -> Result<SpecAst, ParseError> {
        let mut node = self.choice()?;
        while *self.peek() == Tok::Ensuring {
            self.bump();
            let p = self.predicate()?;
            node = SpecAst::ensuring(node, p);
        }
        Ok(node)
    }

    fn choice(&mut self) -> Result<SpecAst, ParseError> {
        let mut node = self.seq()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.seq()?;
            node = SpecAst::choice(node, rhs);
        }
        Ok(node)
    }

    fn seq(&mut self) -> Result<SpecAst, ParseError> {
        let mut node = self.primary()?;
        while *self.peek() == Tok::Semi {
            self.bump();
            let rhs = self.primary()?;
            node = SpecAst::seq(node, rhs);
        }
        Ok(node)
    }

    fn primary(&mut self) -> Result<SpecAst, ParseError> {
        match self.peek() {
            Tok::Achieve => {
                self.bump();
                self.goal()
            }
            Tok::LParen => {
                self.bump();
                let inner = self.spec()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            other => {
                let msg = format!("expected `achieve` or `(`, found {other}");
                self.err(self.pos(), msg)
            }
        }
    }

    /// Argument of `achieve`: a bare atom, or a parenthesized predicate,
    /// where a top-level `;` sequences goals (`achieve (b1; b2)` desugars to
    /// `achieve b1; achieve b2`).
    fn goal(&mut self) -> Result<SpecAst, ParseError> {
        match self.peek() {
            Tok::Ident(_) => {
                let p = self.atom()?;
                Ok(SpecAst::achieve(p))
            }
            Tok::LParen => {
                self.bump();
                let mut goals = vec![self.predicate()?];
                while *self.peek() == Tok::Semi {
                    self.bump();
                    goals.push(self.predicate()?);
                }
                self.expect(&Tok::RParen, "`)`")?;
                let mut it = goals.into_iter();
                let mut node = SpecAst::achieve(it.next().unwrap());
                for g in it {
                    node = SpecAst::seq(node, SpecAst::achieve(g));
                }
                Ok(node)
            }
            other => {
                let msg = format!("expected a predicate after `achieve`, found {other}");
                self.err(self.pos(), msg)
            }
        }
    }

    fn predicate(&mut self) -> Result<PredicateAst, ParseError> {
        let mut node = self.conj()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.conj()?;
            node = PredicateAst::or(node, rhs);
        }
        Ok(node)
    }

    fn conj(&mut self) -> Result<PredicateAst, ParseError> {
        let mut node = self.factor()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.factor()?;
            node = PredicateAst::and(node, rhs);
        }
        Ok(node)
    }

    fn factor(&mut self) -> Result<PredicateAst, ParseError> {
        match self.peek() {
            Tok::Ident(_) => self.atom(),
            Tok::LParen => {
                self.bump();
                let inner = self.predicate()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            other => {
                let msg = format!("expected a predicate, found {other}");
                self.err(self.pos(), msg)
            }
        }
    }

    fn atom(&mut self) -> Result<PredicateAst, ParseError> {
        let pos = self.pos();
        let name = match self.bump() {
            Tok::Ident(name) => name,
            other => return self.err(pos, format!("expected a predicate name, found {other}")),
        };
        let mut params = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                let ppos = self.pos();
                match self.bump() {
                    Tok::Number(x) => params.push(x),
                    other => {
                        return self.err(ppos, format!("expected a number, found {other}"));
                    }
                }
                match self.bump() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return self.err(ppos, format!("expected `,` or `)`, found {other}"));
                    }
                }
            }
        }
        let Some(decl) = self.registry.lookup(&name) else {
            return self.err(pos, format!("unknown predicate `{name}`"));
        };
        if decl.arity != params.len() {
            return self.err(
                pos,
                format!(
                    "predicate `{name}` expects {} parameter(s), got {}",
                    decl.arity,
                    params.len()
                ),
            );
        }
        Ok(PredicateAst::Atom { name, params })
    }
}

/// Parse specification text against a predicate registry.
pub fn parse_spec(text: &str, registry: &PredicateRegistry) -> Result<SpecAst, ParseError> {
    parse_spec_named(text, "<input>", registry)
}

/// Like [`parse_spec`], with a file name for diagnostics.
pub fn parse_spec_named(
    text: &str,
    file: &str,
    registry: &PredicateRegistry,
) -> Result<SpecAst, ParseError> {
    let toks = Lexer::new(text).tokens().map_err(|(pos, message)| ParseError {
        file: file.to_string(),
        pos,
        message,
    })?;
    let mut p = Parser {
        toks,
        i: 0,
        file: file.to_string(),
        registry,
    };
    let ast = p.spec()?;
    if *p.peek() != Tok::Eof {
        let msg = format!("unexpected {} after end of specification", p.peek());
        return p.err(p.pos(), msg);
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::AtomicPredicateDecl;

    fn test_registry() -> PredicateRegistry {
        let mut reg = PredicateRegistry::new();
        reg.register(AtomicPredicateDecl::from_quant("reach", 2, |s, p| {
            1.0 - (s[0] - p[0]).abs().max((s[1] - p[1]).abs())
        }))
        .unwrap();
        reg.register(AtomicPredicateDecl::from_quant("avoid", 4, |s, p| {
            crate::predicate::signed_box_distance(&s[..2], &[p[0], p[2]], &[p[1], p[3]])
        }))
        .unwrap();
        reg.register(AtomicPredicateDecl::from_quant("p", 0, |_, _| 1.0))
            .unwrap();
        reg.register(AtomicPredicateDecl::from_quant("q", 0, |_, _| 1.0))
            .unwrap();
        reg.register(AtomicPredicateDecl::from_quant("r", 0, |_, _| 1.0))
            .unwrap();
        reg
    }

    fn atom(name: &str, params: &[f64]) -> PredicateAst {
        PredicateAst::atom(name, params.to_vec())
    }

    #[test]
    fn smallest_program() {
        let reg = test_registry();
        let ast = parse_spec("achieve p", &reg).unwrap();
        assert_eq!(ast, SpecAst::achieve(atom("p", &[])));
    }

    #[test]
    fn phi1_shape() {
        let reg = test_registry();
        let ast = parse_spec("achieve reach(5, 10) ensuring avoid(4, 6, 4, 6)", &reg).unwrap();
        assert_eq!(
            ast,
            SpecAst::ensuring(
                SpecAst::achieve(atom("reach", &[5.0, 10.0])),
                atom("avoid", &[4.0, 6.0, 4.0, 6.0]),
            )
        );
    }

    #[test]
    fn explicit_and_sugared_seq_agree() {
        let reg = test_registry();
        let a = parse_spec("achieve reach(5,10); achieve reach(5,0)", &reg).unwrap();
        let b = parse_spec("achieve (reach(5,10); reach(5,0))", &reg).unwrap();
        let want = SpecAst::seq(
            SpecAst::achieve(atom("reach", &[5.0, 10.0])),
            SpecAst::achieve(atom("reach", &[5.0, 0.0])),
        );
        assert_eq!(a, want);
        assert_eq!(b, want);
    }

    #[test]
    fn precedence_ensuring_loosest_choice_below_seq() {
        let reg = test_registry();
        // `ensuring` applies to everything on its left
        let ast = parse_spec("achieve p; achieve q ensuring r", &reg).unwrap();
        assert_eq!(
            ast,
            SpecAst::ensuring(
                SpecAst::seq(
                    SpecAst::achieve(atom("p", &[])),
                    SpecAst::achieve(atom("q", &[])),
                ),
                atom("r", &[]),
            )
        );
        // `or` binds looser than `;`
        let ast = parse_spec("achieve p or achieve q; achieve r", &reg).unwrap();
        assert_eq!(
            ast,
            SpecAst::choice(
                SpecAst::achieve(atom("p", &[])),
                SpecAst::seq(
                    SpecAst::achieve(atom("q", &[])),
                    SpecAst::achieve(atom("r", &[])),
                ),
            )
        );
        // parentheses override
        let ast = parse_spec("(achieve p or achieve q); achieve r", &reg).unwrap();
        assert_eq!(
            ast,
            SpecAst::seq(
                SpecAst::choice(
                    SpecAst::achieve(atom("p", &[])),
                    SpecAst::achieve(atom("q", &[])),
                ),
                SpecAst::achieve(atom("r", &[])),
            )
        );
    }

    #[test]
    fn left_associativity() {
        let reg = test_registry();
        let ast = parse_spec("achieve p; achieve q; achieve r", &reg).unwrap();
        assert_eq!(
            ast,
            SpecAst::seq(
                SpecAst::seq(
                    SpecAst::achieve(atom("p", &[])),
                    SpecAst::achieve(atom("q", &[])),
                ),
                SpecAst::achieve(atom("r", &[])),
            )
        );
        let ast = parse_spec("achieve p or achieve q or achieve r", &reg).unwrap();
        assert_eq!(
            ast,
            SpecAst::choice(
                SpecAst::choice(
                    SpecAst::achieve(atom("p", &[])),
                    SpecAst::achieve(atom("q", &[])),
                ),
                SpecAst::achieve(atom("r", &[])),
            )
        );
    }

    #[test]
    fn predicate_connectives_inside_achieve() {
        let reg = test_registry();
        let ast = parse_spec("achieve (p and q or r)", &reg).unwrap();
        // `and` binds tighter than `or` in predicate context
        assert_eq!(
            ast,
            SpecAst::achieve(PredicateAst::or(
                PredicateAst::and(atom("p", &[]), atom("q", &[])),
                atom("r", &[]),
            ))
        );
    }

    #[test]
    fn error_positions() {
        let reg = test_registry();
        let e = parse_spec("achieve nosuch(1)", &reg).unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 9 });
        assert!(e.to_string().contains("unknown predicate"));
        assert!(e.to_string().starts_with("<input>:1:9:"));

        let e = parse_spec("achieve reach(5)", &reg).unwrap_err();
        assert!(e.to_string().contains("expects 2 parameter(s), got 1"));

        let e = parse_spec("achieve (p", &reg).unwrap_err();
        assert!(e.to_string().contains("expected `)`"));

        let e = parse_spec("achieve @p", &reg).unwrap_err();
        assert!(e.to_string().contains("unexpected character"));

        // positions track lines and comments
        let text = "# header\nachieve p;\n  achieve nosuch\n";
        let e = parse_spec_named(text, "task.spec", &reg).unwrap_err();
        assert_eq!(e.pos, Pos { line: 3, col: 11 });
        assert!(e.to_string().starts_with("task.spec:3:11:"));
    }

    #[test]
    fn parse_is_deterministic() {
        let reg = test_registry();
        let text = "achieve (reach(5,10); reach(5,0)) ensuring avoid(4,6,4,6)";
        let a = parse_spec(text, &reg).unwrap();
        let b = parse_spec(text, &reg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_and_scientific_literals() {
        let reg = test_registry();
        let ast = parse_spec("achieve reach(-1.5, 2e1)", &reg).unwrap();
        assert_eq!(ast, SpecAst::achieve(atom("reach", &[-1.5, 20.0])));
    }
}

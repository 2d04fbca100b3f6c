//! Reader and writer for the Galileo fault tree dialect.
//!
//! ```text
//! toplevel "T";
//! "T" or "G" "H";            // gates: and, or, <k>of<n>, pand, por, seq,
//! "G" 2of3 "A" "B" "C";      //        fdep, pdep=<p>, wsp, csp, hsp
//! "A" lambda=0.5 dorm=0.2;   // basic events: lambda=<rate> [dorm=<factor>]
//! "B" prob=0.01;             //            or prob=<constant probability>
//! ```
//!
//! Names are double-quoted, statements end with `;`, `//` starts a comment.
//! Node indices follow statement order.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{BuildError, Distribution, FaultTree, NodeId, NodeType, SpareKind, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Position, message: String },
    #[error("{pos}: reference to undeclared node `{name}`")]
    Undeclared { pos: Position, name: String },
    #[error("{pos}: duplicate declaration of `{name}`")]
    Duplicate { pos: Position, name: String },
    #[error("missing toplevel statement")]
    MissingToplevel,
    #[error("{pos}: second toplevel statement")]
    DuplicateToplevel { pos: Position },
    #[error("{pos}: invalid value for `{attribute}`: {message}")]
    InvalidAttribute {
        pos: Position,
        attribute: String,
        message: String,
    },
    #[error("invalid fault tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SerializeError {
    #[error("basic event `{0}` has a tabulated distribution, which the Galileo format cannot express")]
    Tabulated(String),
}

/// A parsed and validated model.
#[derive(Debug, Clone)]
pub struct GalileoModel {
    pub tree: FaultTree,
    /// Basic events in the order their declarations appear in the file.
    pub be_order: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Word(String),
    Semi,
}

struct Lexer<'a> {
    src: &'a [u8],
    at: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            src: text.as_bytes(),
            at: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            column: self.col,
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.at];
        self.at += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.at).copied()
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.bump();
            } else if c == b'/' && self.src.get(self.at + 1) == Some(&b'/') {
                while self.peek().is_some_and(|c| c != b'\n') {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<Option<(Token, Position)>, ParseError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        match c {
            b';' => {
                self.bump();
                Ok(Some((Token::Semi, pos)))
            }
            b'"' => {
                self.bump();
                let start = self.at;
                loop {
                    match self.peek() {
                        None | Some(b'\n') => {
                            return Err(ParseError::Syntax {
                                pos,
                                message: "unterminated name".into(),
                            })
                        }
                        Some(b'"') => break,
                        Some(_) => {
                            self.bump();
                        }
                    }
                }
                let name = String::from_utf8_lossy(&self.src[start..self.at]).into_owned();
                self.bump();
                if name.is_empty() {
                    return Err(ParseError::Syntax {
                        pos,
                        message: "empty name".into(),
                    });
                }
                Ok(Some((Token::Name(name), pos)))
            }
            _ => {
                let start = self.at;
                while self
                    .peek()
                    .is_some_and(|c| !c.is_ascii_whitespace() && c != b';' && c != b'"')
                {
                    self.bump();
                }
                if self.at == start {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!("unexpected character `{}`", c as char),
                    });
                }
                let word = String::from_utf8_lossy(&self.src[start..self.at]).into_owned();
                Ok(Some((Token::Word(word), pos)))
            }
        }
    }
}

struct Statement {
    tokens: Vec<(Token, Position)>,
}

fn statements(text: &str) -> Result<Vec<Statement>, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut out = Vec::new();
    let mut current = Vec::new();
    while let Some((tok, pos)) = lexer.next()? {
        if tok == Token::Semi {
            if current.is_empty() {
                return Err(ParseError::Syntax {
                    pos,
                    message: "empty statement".into(),
                });
            }
            out.push(Statement {
                tokens: std::mem::take(&mut current),
            });
        } else {
            current.push((tok, pos));
        }
    }
    if let Some((_, pos)) = current.first() {
        return Err(ParseError::Syntax {
            pos: *pos,
            message: "statement not terminated by `;`".into(),
        });
    }
    Ok(out)
}

fn parse_number(attr: &str, value: &str, pos: Position) -> Result<f64, ParseError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::InvalidAttribute {
            pos,
            attribute: attr.into(),
            message: format!("`{value}` is not a number"),
        })
}

fn invalid(attr: &str, pos: Position, message: &str) -> ParseError {
    ParseError::InvalidAttribute {
        pos,
        attribute: attr.into(),
        message: message.into(),
    }
}

fn gate_kind(word: &str, pos: Position, children: usize) -> Result<Option<NodeType>, ParseError> {
    let kind = match word {
        "and" => NodeType::And,
        "or" => NodeType::Or,
        "pand" => NodeType::Pand,
        "por" => NodeType::Por,
        "seq" => NodeType::Seq,
        "fdep" => NodeType::Pdep(1.0),
        "wsp" => NodeType::Spare(SpareKind::Warm),
        "csp" => NodeType::Spare(SpareKind::Cold),
        "hsp" => NodeType::Spare(SpareKind::Hot),
        _ => {
            if let Some(p) = word.strip_prefix("pdep=") {
                let p = parse_number("pdep", p, pos)?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(invalid("pdep", pos, "probability must lie in (0, 1]"));
                }
                NodeType::Pdep(p)
            } else if let Some((k, n)) = word.split_once("of") {
                let (Ok(k), Ok(n)) = (k.parse::<usize>(), n.parse::<usize>()) else {
                    return Ok(None);
                };
                if k == 0 || k > n {
                    return Err(invalid("vot", pos, "k out of range"));
                }
                if n != children {
                    return Err(invalid(
                        "vot",
                        pos,
                        &format!("declared {n} children but found {children}"),
                    ));
                }
                NodeType::Vot(k)
            } else {
                return Ok(None);
            }
        }
    };
    Ok(Some(kind))
}

fn be_distribution(
    attrs: &[(Token, Position)],
    name_pos: Position,
) -> Result<Distribution, ParseError> {
    let mut lambda = None;
    let mut dorm = None;
    let mut prob = None;
    for (tok, pos) in attrs {
        let Token::Word(w) = tok else {
            return Err(ParseError::Syntax {
                pos: *pos,
                message: "expected an attribute".into(),
            });
        };
        let Some((key, value)) = w.split_once('=') else {
            return Err(ParseError::Syntax {
                pos: *pos,
                message: format!("unknown gate type or attribute `{w}`"),
            });
        };
        let slot = match key {
            "lambda" => &mut lambda,
            "dorm" => &mut dorm,
            "prob" => &mut prob,
            _ => {
                return Err(ParseError::Syntax {
                    pos: *pos,
                    message: format!("unknown attribute `{key}`"),
                })
            }
        };
        if slot.is_some() {
            return Err(invalid(key, *pos, "given twice"));
        }
        *slot = Some((parse_number(key, value, *pos)?, *pos));
    }
    match (lambda, prob) {
        (Some((rate, pos)), None) => {
            if rate <= 0.0 {
                return Err(invalid("lambda", pos, "rate must be positive"));
            }
            let dormancy = match dorm {
                Some((d, pos)) if !(0.0..=1.0).contains(&d) => {
                    return Err(invalid("dorm", pos, "dormancy must lie in [0, 1]"))
                }
                Some((d, _)) => d,
                None => 1.0,
            };
            Ok(Distribution::Exponential { rate, dormancy })
        }
        (None, Some((p, pos))) => {
            if let Some((_, pos)) = dorm {
                return Err(invalid("dorm", pos, "not allowed with prob"));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("prob", pos, "probability must lie in [0, 1]"));
            }
            Ok(Distribution::Constant { probability: p })
        }
        (Some(_), Some((_, pos))) => Err(invalid("prob", pos, "not allowed with lambda")),
        (None, None) => Err(ParseError::Syntax {
            pos: name_pos,
            message: "basic event needs `lambda=` or `prob=`".into(),
        }),
    }
}

/// Parses and validates a Galileo document.
pub fn parse(text: &str) -> Result<GalileoModel, ParseError> {
    let mut builder = FaultTree::builder();
    let mut declared: std::collections::HashMap<String, Position> = Default::default();
    let mut references: Vec<(String, Position)> = Vec::new();
    let mut be_names = Vec::new();
    let mut top: Option<(String, Position)> = None;

    for stmt in statements(text)? {
        let (first, first_pos) = &stmt.tokens[0];
        match first {
            Token::Word(w) if w == "toplevel" => {
                if top.is_some() {
                    return Err(ParseError::DuplicateToplevel { pos: *first_pos });
                }
                match stmt.tokens.as_slice() {
                    [_, (Token::Name(n), pos)] => top = Some((n.clone(), *pos)),
                    _ => {
                        return Err(ParseError::Syntax {
                            pos: *first_pos,
                            message: "expected `toplevel \"name\";`".into(),
                        })
                    }
                }
            }
            Token::Word(w) => {
                return Err(ParseError::Syntax {
                    pos: *first_pos,
                    message: format!("expected a quoted name, found `{w}`"),
                })
            }
            Token::Semi => unreachable!(),
            Token::Name(name) => {
                if declared.insert(name.clone(), *first_pos).is_some() {
                    return Err(ParseError::Duplicate {
                        pos: *first_pos,
                        name: name.clone(),
                    });
                }
                let rest = &stmt.tokens[1..];
                let Some((op_tok, op_pos)) = rest.first() else {
                    return Err(ParseError::Syntax {
                        pos: *first_pos,
                        message: "declaration without type or attributes".into(),
                    });
                };
                let gate = match op_tok {
                    Token::Word(w) => gate_kind(w, *op_pos, rest.len() - 1)?,
                    _ => None,
                };
                match gate {
                    Some(kind) => {
                        let mut children = Vec::with_capacity(rest.len() - 1);
                        for (tok, pos) in &rest[1..] {
                            match tok {
                                Token::Name(c) => {
                                    children.push(c.clone());
                                    references.push((c.clone(), *pos));
                                }
                                _ => {
                                    return Err(ParseError::Syntax {
                                        pos: *pos,
                                        message: "expected a quoted child name".into(),
                                    })
                                }
                            }
                        }
                        builder.add_gate(name, kind, children);
                    }
                    None => {
                        let dist = be_distribution(rest, *first_pos)?;
                        builder.add_basic_event(name, dist);
                        be_names.push(name.clone());
                    }
                }
            }
        }
    }

    let (top_name, top_pos) = top.ok_or(ParseError::MissingToplevel)?;
    references.push((top_name.clone(), top_pos));
    for (name, pos) in references {
        if !declared.contains_key(&name) {
            return Err(ParseError::Undeclared { pos, name });
        }
    }
    builder.set_top(&top_name);
    let tree = builder.build().map_err(|e| match e {
        // Every name was checked above; keep a sensible mapping anyway.
        BuildError::Duplicate(name) => ParseError::Duplicate {
            pos: Position { line: 0, column: 0 },
            name,
        },
        other => ParseError::Syntax {
            pos: Position { line: 0, column: 0 },
            message: other.to_string(),
        },
    })?;
    let violations = tree.validate();
    if !violations.is_empty() {
        return Err(ParseError::Invalid(violations));
    }
    let be_order = be_names.iter().map(|n| tree.find(n).unwrap()).collect();
    Ok(GalileoModel { tree, be_order })
}

/// Writes `ft` back out; nodes appear in index order after the toplevel
/// statement, so parsing the result reproduces node indices.
pub fn serialize(ft: &FaultTree) -> Result<String, SerializeError> {
    let mut out = String::new();
    writeln!(out, "toplevel \"{}\";", ft.name(ft.top())).unwrap();
    for (_, node) in ft.nodes() {
        write!(out, "\"{}\"", node.name()).unwrap();
        let op = match node.kind() {
            NodeType::Be => None,
            NodeType::And => Some("and".to_string()),
            NodeType::Or => Some("or".to_string()),
            NodeType::Vot(k) => Some(format!("{k}of{}", node.children().len())),
            NodeType::Pand => Some("pand".to_string()),
            NodeType::Por => Some("por".to_string()),
            NodeType::Seq => Some("seq".to_string()),
            NodeType::Pdep(1.0) => Some("fdep".to_string()),
            NodeType::Pdep(p) => Some(format!("pdep={p}")),
            NodeType::Spare(SpareKind::Warm) => Some("wsp".to_string()),
            NodeType::Spare(SpareKind::Cold) => Some("csp".to_string()),
            NodeType::Spare(SpareKind::Hot) => Some("hsp".to_string()),
        };
        match op {
            Some(op) => {
                write!(out, " {op}").unwrap();
                for &c in node.children() {
                    write!(out, " \"{}\"", ft.name(c)).unwrap();
                }
            }
            None => match node.distribution() {
                Some(Distribution::Exponential { rate, dormancy }) => {
                    write!(out, " lambda={rate} dorm={dormancy}").unwrap()
                }
                Some(Distribution::Constant { probability }) => {
                    write!(out, " prob={probability}").unwrap()
                }
                Some(Distribution::Tabulated(_)) => {
                    return Err(SerializeError::Tabulated(node.name().to_string()))
                }
                None => {}
            },
        }
        out.push_str(";\n");
    }
    Ok(out)
}

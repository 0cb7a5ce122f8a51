//! S-expression model format, e.g.
//! `(agg-min (convolve (input) (filter 0.1 -0.2 ...)) (window rect 0.1 0.1 0.5 0.5))`.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! parse of the output reproduces every coefficient bit for bit.

use std::fmt::Write as _;

use thiserror::Error;

use super::{agg_name, ArithOp, Node, ProgramTree};
use crate::image_ops::{AggStat, Filter, WindowShape, WindowSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl ParseError {
    fn new(pos: usize, msg: impl Into<String>) -> Self {
        Self {
            pos,
            msg: msg.into(),
        }
    }
}

pub fn serialize(tree: &ProgramTree) -> String {
    let mut out = String::new();
    write_node(tree.root(), &mut out);
    out
}

fn write_node(n: &Node, out: &mut String) {
    match n {
        Node::Arith { op, lhs, rhs } => {
            let name = match op {
                ArithOp::Add => "add",
                ArithOp::Sub => "sub",
                ArithOp::Mul => "mul",
                ArithOp::Div => "div",
            };
            write!(out, "({name} ").unwrap();
            write_node(lhs, out);
            out.push(' ');
            write_node(rhs, out);
            out.push(')');
        }
        Node::Agg {
            stat,
            image,
            window,
        } => {
            write!(out, "({} ", agg_name(*stat)).unwrap();
            write_node(image, out);
            out.push(' ');
            write_node(window, out);
            out.push(')');
        }
        Node::Convolve { image, filter } => {
            out.push_str("(convolve ");
            write_node(image, out);
            out.push(' ');
            write_node(filter, out);
            out.push(')');
        }
        Node::Pool { image } => {
            out.push_str("(pool ");
            write_node(image, out);
            out.push(')');
        }
        Node::Input => out.push_str("(input)"),
        Node::Filter(f) => {
            out.push_str("(filter");
            for v in f.coefficients() {
                write!(out, " {v}").unwrap();
            }
            out.push(')');
        }
        Node::Window(w) => {
            write!(
                out,
                "(window {} {} {} {} {})",
                w.shape, w.pos_x, w.pos_y, w.size_w, w.size_h
            )
            .unwrap();
        }
        Node::Const(v) => write!(out, "(const {v})").unwrap(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Option<(usize, Tok<'a>)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let start = self.pos;
        match bytes[start] {
            b'(' => {
                self.pos += 1;
                Some((start, Tok::Open))
            }
            b')' => {
                self.pos += 1;
                Some((start, Tok::Close))
            }
            _ => {
                while self.pos < bytes.len()
                    && !bytes[self.pos].is_ascii_whitespace()
                    && bytes[self.pos] != b'('
                    && bytes[self.pos] != b')'
                {
                    self.pos += 1;
                }
                Some((start, Tok::Atom(&self.src[start..self.pos])))
            }
        }
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    peeked: Option<(usize, Tok<'a>)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Option<&(usize, Tok<'a>)> {
        if self.peeked.is_none() {
            self.peeked = self.lex.next();
        }
        self.peeked.as_ref()
    }

    fn bump(&mut self) -> Result<(usize, Tok<'a>), ParseError> {
        self.peek();
        self.peeked
            .take()
            .ok_or_else(|| ParseError::new(self.lex.src.len(), "unexpected end of input"))
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.bump()? {
            (_, Tok::Close) => Ok(()),
            (pos, tok) => Err(ParseError::new(pos, format!("expected ')', found {tok:?}"))),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.bump()? {
            (pos, Tok::Atom(s)) => s
                .parse::<f64>()
                .map_err(|_| ParseError::new(pos, format!("invalid number '{s}'"))),
            (pos, tok) => Err(ParseError::new(
                pos,
                format!("expected a number, found {tok:?}"),
            )),
        }
    }

    fn node(&mut self) -> Result<Node, ParseError> {
        match self.bump()? {
            (_, Tok::Open) => {}
            (pos, tok) => return Err(ParseError::new(pos, format!("expected '(', found {tok:?}"))),
        }
        let (pos, head) = match self.bump()? {
            (pos, Tok::Atom(s)) => (pos, s),
            (pos, tok) => {
                return Err(ParseError::new(
                    pos,
                    format!("expected a node name, found {tok:?}"),
                ))
            }
        };
        let node = match head {
            "add" | "sub" | "mul" | "div" => {
                let op = match head {
                    "add" => ArithOp::Add,
                    "sub" => ArithOp::Sub,
                    "mul" => ArithOp::Mul,
                    _ => ArithOp::Div,
                };
                let lhs = self.node()?;
                let rhs = self.node()?;
                Node::arith(op, lhs, rhs)
            }
            "agg-min" | "agg-max" | "agg-mean" | "agg-std" => {
                let stat = match head {
                    "agg-min" => AggStat::Min,
                    "agg-max" => AggStat::Max,
                    "agg-mean" => AggStat::Mean,
                    _ => AggStat::Std,
                };
                let image = self.node()?;
                let window = self.node()?;
                Node::Agg {
                    stat,
                    image: Box::new(image),
                    window: Box::new(window),
                }
            }
            "convolve" => {
                let image = self.node()?;
                let filter = self.node()?;
                Node::Convolve {
                    image: Box::new(image),
                    filter: Box::new(filter),
                }
            }
            "pool" => Node::pool(self.node()?),
            "input" => Node::Input,
            "filter" => {
                let mut vals = [0.0; 9];
                for v in vals.iter_mut() {
                    *v = self.number()?;
                }
                Node::Filter(Filter::from_slice(&vals).expect("nine values"))
            }
            "window" => {
                let shape = match self.bump()? {
                    (p, Tok::Atom(s)) => WindowShape::from_name(s)
                        .ok_or_else(|| ParseError::new(p, format!("unknown window shape '{s}'")))?,
                    (p, tok) => {
                        return Err(ParseError::new(
                            p,
                            format!("expected a window shape, found {tok:?}"),
                        ))
                    }
                };
                let pos_x = self.number()?;
                let pos_y = self.number()?;
                let size_w = self.number()?;
                let size_h = self.number()?;
                Node::Window(WindowSpec::new(shape, pos_x, pos_y, size_w, size_h))
            }
            "const" => Node::Const(self.number()?),
            other => return Err(ParseError::new(pos, format!("unknown node '{other}'"))),
        };
        self.expect_close()?;
        Ok(node)
    }
}

/// Parses a model written by [`serialize`]. Typing is checked as well, so a
/// successfully parsed tree is always evaluable.
pub fn deserialize(text: &str) -> Result<ProgramTree, ParseError> {
    let mut p = Parser {
        lex: Lexer { src: text, pos: 0 },
        peeked: None,
    };
    let root = p.node()?;
    if let Some((pos, _)) = p.peek() {
        return Err(ParseError::new(*pos, "trailing input after program"));
    }
    let tree = ProgramTree::new(root);
    tree.validate_types()
        .map_err(|e| ParseError::new(0, format!("ill-typed program: {e}")))?;
    Ok(tree)
}

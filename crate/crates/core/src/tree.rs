//! GP solution trees over pool-mask terminals.
//!
//! Canonical text form is an s-expression: terminals are `A0`, `A1`, ...
//! and internal nodes are `(OP child ...)`, e.g. `(MF (MV A0 A1 A2))`.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::morph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Ero,
    Dil,
    Mf,
    Or,
    And,
    Mv,
}

impl Op {
    pub const ALL: [Op; 6] = [Op::Ero, Op::Dil, Op::Mf, Op::Or, Op::And, Op::Mv];
    pub const UNARY: [Op; 3] = [Op::Ero, Op::Dil, Op::Mf];
    pub const BINARY: [Op; 2] = [Op::Or, Op::And];

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Ero => "ERO",
            Op::Dil => "DIL",
            Op::Mf => "MF",
            Op::Or => "OR",
            Op::And => "AND",
            Op::Mv => "MV",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Op::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            Op::Ero | Op::Dil | Op::Mf => n == 1,
            Op::Or | Op::And => n == 2,
            Op::Mv => n >= 3 && n % 2 == 1,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Terminal(usize),
    Apply { op: Op, children: Vec<Node> },
}

impl Node {
    pub fn apply(op: Op, children: Vec<Node>) -> Result<Node> {
        if !op.arity_ok(children.len()) {
            return Err(Error::Arity(format!(
                "{op} cannot take {} children",
                children.len()
            )));
        }
        Ok(Node::Apply { op, children })
    }

    pub fn children(&self) -> &[Node] {
        match self {
            Node::Terminal(_) => &[],
            Node::Apply { children, .. } => children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Node::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.children()
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if let Node::Apply { op, children } = self {
            if !op.arity_ok(children.len()) {
                return Err(Error::Arity(format!(
                    "{op} cannot take {} children",
                    children.len()
                )));
            }
            children.iter().try_for_each(Node::validate)?;
        }
        Ok(())
    }

    fn collect_terminals(&self, out: &mut BTreeSet<usize>) {
        match self {
            Node::Terminal(i) => {
                out.insert(*i);
            }
            Node::Apply { children, .. } => children.iter().for_each(|c| c.collect_terminals(out)),
        }
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            Node::Terminal(i) => {
                out.push('A');
                out.push_str(&i.to_string());
            }
            Node::Apply { op, children } => {
                out.push('(');
                out.push_str(op.symbol());
                for c in children {
                    out.push(' ');
                    c.write_sexpr(out);
                }
                out.push(')');
            }
        }
    }

    /// Preorder node `index` (0 = self).
    pub fn get(&self, index: usize) -> Option<&Node> {
        if index == 0 {
            return Some(self);
        }
        let mut rest = index - 1;
        for c in self.children() {
            let s = c.size();
            if rest < s {
                return c.get(rest);
            }
            rest -= s;
        }
        None
    }

    pub fn get_mut(&mut self, index: usize) -> Option<&mut Node> {
        if index == 0 {
            return Some(self);
        }
        let mut rest = index - 1;
        if let Node::Apply { children, .. } = self {
            for c in children.iter_mut() {
                let s = c.size();
                if rest < s {
                    return c.get_mut(rest);
                }
                rest -= s;
            }
        }
        None
    }

    fn eval<'a>(&self, inputs: &'a [BinaryMask]) -> Result<Cow<'a, BinaryMask>> {
        match self {
            Node::Terminal(i) => inputs.get(*i).map(Cow::Borrowed).ok_or(Error::TerminalOutOfRange {
                index: *i,
                pool_size: inputs.len(),
            }),
            Node::Apply { op, children } => {
                let arg = |i: usize| children[i].eval(inputs);
                let out = match op {
                    Op::Ero => morph::erode(&*arg(0)?),
                    Op::Dil => morph::dilate(&*arg(0)?),
                    Op::Mf => morph::median5(&*arg(0)?),
                    Op::Or => morph::or(&*arg(0)?, &*arg(1)?)?,
                    Op::And => morph::and(&*arg(0)?, &*arg(1)?)?,
                    Op::Mv => {
                        let args = (0..children.len()).map(arg).collect::<Result<Vec<_>>>()?;
                        morph::majority(&args)?
                    }
                };
                Ok(Cow::Owned(out))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeStats {
    /// A bare terminal has depth 0.
    pub depth: usize,
    pub size: usize,
    pub distinct_terminals: usize,
}

/// A fusion program. Arity is checked on construction; terminal indices
/// are checked against the pool when the tree is evaluated or validated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SolutionTree {
    root: Node,
}

impl SolutionTree {
    pub fn new(root: Node) -> Result<Self> {
        root.validate()?;
        Ok(Self { root })
    }

    pub fn terminal(index: usize) -> Self {
        Self {
            root: Node::Terminal(index),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn terminals(&self) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        self.root.collect_terminals(&mut set);
        set
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            depth: self.depth(),
            size: self.size(),
            distinct_terminals: self.terminals().len(),
        }
    }

    /// Checks every terminal index against a pool of `pool_size` algorithms.
    pub fn validate_terminals(&self, pool_size: usize) -> Result<()> {
        match self.terminals().last() {
            Some(&max) if max >= pool_size => Err(Error::TerminalOutOfRange {
                index: max,
                pool_size,
            }),
            _ => Ok(()),
        }
    }

    /// Applies the program to one frame's pool masks.
    pub fn evaluate(&self, inputs: &[BinaryMask]) -> Result<BinaryMask> {
        if let Some(first) = inputs.first() {
            for m in &inputs[1..] {
                first.ensure_same_dims(m)?;
            }
        }
        self.validate_terminals(inputs.len())?;
        Ok(self.root.eval(inputs)?.into_owned())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.root.write_sexpr(&mut s);
        s
    }

    /// Parses one s-expression. Lines starting with `#` are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser::new(text);
        p.skip_trivia();
        let root = p.node()?;
        p.skip_trivia();
        if p.pos < p.bytes.len() {
            return Err(p.error("trailing input after expression"));
        }
        Ok(Self { root })
    }

    pub(crate) fn node_mut(&mut self, index: usize) -> Option<&mut Node> {
        self.root.get_mut(index)
    }

    pub(crate) fn node(&self, index: usize) -> Option<&Node> {
        self.root.get(index)
    }
}

impl fmt::Display for SolutionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl FromStr for SolutionTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn atom(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("")
    }

    fn node(&mut self) -> Result<Node> {
        match self.bytes.get(self.pos) {
            None => Err(self.error("unexpected end of input")),
            Some(b')') => Err(self.error("unbalanced ')'")),
            Some(b'(') => {
                self.pos += 1;
                self.skip_trivia();
                let start = self.pos;
                let sym = self.atom();
                let op = Op::from_symbol(sym).ok_or_else(|| Error::Parse {
                    position: start,
                    message: format!("unknown symbol {sym:?}"),
                })?;
                let mut children = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.bytes.get(self.pos) {
                        None => return Err(self.error("unbalanced '(': missing ')'")),
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => children.push(self.node()?),
                    }
                }
                Node::apply(op, children)
            }
            Some(_) => {
                let start = self.pos;
                let tok = self.atom();
                let index = tok
                    .strip_prefix('A')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        position: start,
                        message: format!("unknown symbol {tok:?}"),
                    })?;
                Ok(Node::Terminal(index))
            }
        }
    }
}

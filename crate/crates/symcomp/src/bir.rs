//! The mini binary intermediate representation: abstract syntax, a textual
//! format with parser and printer, expression evaluation, and a concrete
//! small-step semantics driven by a world oracle. The concrete semantics
//! serves as the refinement oracle for the symbolic engine.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::terms::FnSym;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BirError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("duplicate block label `{0}`")]
    DuplicateLabel(String),
    #[error("program has no blocks")]
    EmptyProgram,
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("type mismatch applying {op} to {lhs} and {rhs}")]
    TypeMismatch { op: String, lhs: String, rhs: String },
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("unknown jump target `{0}`")]
    UnknownLabel(String),
    #[error("jump target `{0}` is not a label value")]
    IllegalJumpTarget(String),
    #[error("program halted")]
    Halted,
    #[error("world script exhausted at {0}")]
    WorldExhausted(String),
}

/// A base value: a string or a 64-bit unsigned integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bval {
    Str(String),
    Int(u64),
}

impl Bval {
    pub fn truthy(&self) -> bool {
        match self {
            Bval::Int(v) => *v != 0,
            Bval::Str(_) => false,
        }
    }
}

impl fmt::Display for Bval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bval::Str(s) => write!(f, "{s:?}"),
            Bval::Int(v) => write!(f, "{v:#x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Xor,
    Add,
    Mul,
    Concat,
    Eq,
}

impl BinOp {
    pub fn token(&self) -> &'static str {
        match self {
            BinOp::Xor => "^",
            BinOp::Add => "+",
            BinOp::Mul => "*",
            BinOp::Concat => "++",
            BinOp::Eq => "==",
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BinOp::Eq => 1,
            BinOp::Xor => 2,
            BinOp::Concat => 3,
            BinOp::Add => 4,
            BinOp::Mul => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnOp {
    Not,
    /// Named unary operators such as `len`; their translation must be
    /// declared before extraction.
    Named(String),
}

impl fmt::Display for UnOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnOp::Not => f.write_str("!"),
            UnOp::Named(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BirExpr {
    Const(Bval),
    Var(String),
    Unop(UnOp, Box<BirExpr>),
    Binop(BinOp, Box<BirExpr>, Box<BirExpr>),
}

impl BirExpr {
    pub fn int(v: u64) -> Self {
        BirExpr::Const(Bval::Int(v))
    }

    pub fn var(name: impl Into<String>) -> Self {
        BirExpr::Var(name.into())
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            BirExpr::Const(v) => write!(f, "{v}"),
            BirExpr::Var(x) => write!(f, "{x}"),
            BirExpr::Unop(UnOp::Not, e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 10)
            }
            BirExpr::Unop(UnOp::Named(n), e) => {
                write!(f, "{n}(")?;
                e.fmt_prec(f, 0)?;
                write!(f, ")")
            }
            BirExpr::Binop(op, l, r) => {
                let p = op.precedence();
                if p < outer {
                    write!(f, "(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.token())?;
                r.fmt_prec(f, p + 1)?;
                if p < outer {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for BirExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BirStmt {
    Halt,
    Jmp(BirExpr),
    Cjmp(BirExpr, BirExpr, BirExpr),
    Assign(String, BirExpr),
}

impl fmt::Display for BirStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BirStmt::Halt => f.write_str("halt"),
            BirStmt::Jmp(e) => write!(f, "jmp({e})"),
            BirStmt::Cjmp(c, a, b) => write!(f, "cjmp({c}, {a}, {b})"),
            BirStmt::Assign(x, e) => write!(f, "assign({x}, {e})"),
        }
    }
}

/// A program: an ordered list of labeled blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BirProgram {
    blocks: Vec<(Bval, Vec<BirStmt>)>,
}

/// Program counter: block label plus statement index.
pub type Pc = (Bval, usize);

impl BirProgram {
    pub fn new(blocks: Vec<(Bval, Vec<BirStmt>)>) -> Result<Self, BirError> {
        if blocks.is_empty() {
            return Err(BirError::EmptyProgram);
        }
        let mut seen = std::collections::BTreeSet::new();
        for (label, _) in &blocks {
            if !seen.insert(label.clone()) {
                return Err(BirError::DuplicateLabel(label.to_string()));
            }
        }
        Ok(BirProgram { blocks })
    }

    pub fn blocks(&self) -> &[(Bval, Vec<BirStmt>)] {
        &self.blocks
    }

    pub fn entry(&self) -> Pc {
        (self.blocks[0].0.clone(), 0)
    }

    pub fn has_block(&self, label: &Bval) -> bool {
        self.blocks.iter().any(|(l, _)| l == label)
    }

    pub fn stmt_at(&self, pc: &Pc) -> Option<&BirStmt> {
        self.blocks
            .iter()
            .find(|(l, _)| l == &pc.0)
            .and_then(|(_, stmts)| stmts.get(pc.1))
    }

    /// The program point after `pc` within the same block, falling through
    /// to the next block when the statement list runs out.
    pub fn advance(&self, pc: &Pc) -> Option<Pc> {
        let idx = self.blocks.iter().position(|(l, _)| l == &pc.0)?;
        let (_, stmts) = &self.blocks[idx];
        if pc.1 + 1 < stmts.len() {
            return Some((pc.0.clone(), pc.1 + 1));
        }
        self.blocks
            .get(idx + 1)
            .map(|(label, _)| (label.clone(), 0))
    }

    /// Canonical text form; parsing it back yields the same program.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for (label, stmts) in &self.blocks {
            match label {
                Bval::Int(v) => out.push_str(&format!("block {v:#x}:\n")),
                Bval::Str(s) => out.push_str(&format!("block {s}:\n")),
            }
            for s in stmts {
                out.push_str("  ");
                out.push_str(&s.to_string());
                out.push('\n');
            }
        }
        out
    }
}

pub fn parse_program(src: &str) -> Result<BirProgram, BirError> {
    let mut blocks: Vec<(Bval, Vec<BirStmt>)> = Vec::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("block ") {
            let rest = rest.trim();
            let label_text = rest.strip_suffix(':').ok_or(BirError::Parse {
                line: lineno + 1,
                col: raw.len(),
                msg: "block header must end with `:`".into(),
            })?;
            let label = parse_label(label_text.trim(), lineno + 1)?;
            if blocks.iter().any(|(l, _)| l == &label) {
                return Err(BirError::DuplicateLabel(label.to_string()));
            }
            blocks.push((label, Vec::new()));
        } else {
            let stmt = parse_stmt(line, lineno + 1)?;
            match blocks.last_mut() {
                Some((_, stmts)) => stmts.push(stmt),
                None => {
                    return Err(BirError::Parse {
                        line: lineno + 1,
                        col: 1,
                        msg: "statement before any block header".into(),
                    })
                }
            }
        }
    }
    BirProgram::new(blocks)
}

fn strip_comment(line: &str) -> &str {
    let cut = line
        .find('#')
        .into_iter()
        .chain(line.find("//"))
        .min()
        .unwrap_or(line.len());
    &line[..cut]
}

/// Parses a block label written as hex, decimal, or a bare word.
pub fn parse_label_text(text: &str) -> Result<Bval, BirError> {
    parse_label(text, 0)
}

fn parse_label(text: &str, line: usize) -> Result<Bval, BirError> {
    if text.is_empty() {
        return Err(BirError::Parse {
            line,
            col: 1,
            msg: "empty block label".into(),
        });
    }
    if let Some(hex) = text.strip_prefix("0x") {
        let v = u64::from_str_radix(hex, 16).map_err(|_| BirError::Parse {
            line,
            col: 1,
            msg: format!("bad hex label `{text}`"),
        })?;
        return Ok(Bval::Int(v));
    }
    if text.chars().all(|c| c.is_ascii_digit()) {
        return Ok(Bval::Int(text.parse().unwrap()));
    }
    Ok(Bval::Str(text.to_string()))
}

fn parse_stmt(line: &str, lineno: usize) -> Result<BirStmt, BirError> {
    // Link-register annotations like `[R30=4;]` in lifted listings are
    // accepted and dropped.
    let line = if let Some(rest) = line.strip_prefix('[') {
        match rest.find(']') {
            Some(i) => rest[i + 1..].trim(),
            None => {
                return Err(BirError::Parse {
                    line: lineno,
                    col: 1,
                    msg: "unterminated `[..]` prefix".into(),
                })
            }
        }
    } else {
        line
    };
    let err = |msg: String| BirError::Parse {
        line: lineno,
        col: 1,
        msg,
    };
    if line == "halt" {
        return Ok(BirStmt::Halt);
    }
    if let Some(args) = call_args(line, "jmp") {
        let e = parse_expr(args, lineno)?;
        return Ok(BirStmt::Jmp(e));
    }
    if let Some(args) = call_args(line, "cjmp") {
        let parts = split_top_level(args);
        if parts.len() != 3 {
            return Err(err("cjmp takes three arguments".into()));
        }
        return Ok(BirStmt::Cjmp(
            parse_expr(&parts[0], lineno)?,
            parse_expr(&parts[1], lineno)?,
            parse_expr(&parts[2], lineno)?,
        ));
    }
    if let Some(args) = call_args(line, "assign") {
        let parts = split_top_level(args);
        if parts.len() != 2 {
            return Err(err("assign takes two arguments".into()));
        }
        let var = parts[0].trim().to_string();
        if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("bad assignment target `{var}`")));
        }
        return Ok(BirStmt::Assign(var, parse_expr(&parts[1], lineno)?));
    }
    Err(err(format!("unrecognized statement `{line}`")))
}

fn call_args<'a>(line: &'a str, head: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(head)?.trim_start();
    let body = rest.strip_prefix('(')?;
    let body = body.strip_suffix(')')?;
    Some(body)
}

fn split_top_level(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut in_str = false;
    for c in s.chars() {
        match c {
            '"' => {
                in_str = !in_str;
                cur.push(c);
            }
            '(' if !in_str => {
                depth += 1;
                cur.push(c);
            }
            ')' if !in_str => {
                depth -= 1;
                cur.push(c);
            }
            ',' if depth == 0 && !in_str => {
                parts.push(cur.trim().to_string());
                cur = String::new();
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        parts.push(cur.trim().to_string());
    }
    parts
}

pub fn parse_expr(src: &str, lineno: usize) -> Result<BirExpr, BirError> {
    let mut p = ExprParser {
        src: src.as_bytes(),
        pos: 0,
        line: lineno,
    };
    let e = p.parse_bp(0)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(BirError::Parse {
            line: lineno,
            col: p.pos + 1,
            msg: "trailing input in expression".into(),
        });
    }
    Ok(e)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl ExprParser<'_> {
    fn err(&self, msg: impl Into<String>) -> BirError {
        BirError::Parse {
            line: self.line,
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_op(&mut self) -> Option<BinOp> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if rest.starts_with(b"==") {
            Some(BinOp::Eq)
        } else if rest.starts_with(b"++") {
            Some(BinOp::Concat)
        } else if rest.starts_with(b"^") {
            Some(BinOp::Xor)
        } else if rest.starts_with(b"+") {
            Some(BinOp::Add)
        } else if rest.starts_with(b"*") {
            Some(BinOp::Mul)
        } else {
            None
        }
    }

    fn parse_bp(&mut self, min_bp: u8) -> Result<BirExpr, BirError> {
        let mut lhs = self.atom()?;
        while let Some(op) = self.peek_op() {
            let bp = op.precedence();
            if bp < min_bp {
                break;
            }
            self.pos += op.token().len();
            let rhs = self.parse_bp(bp + 1)?;
            lhs = BirExpr::Binop(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<BirExpr, BirError> {
        self.skip_ws();
        let Some(&c) = self.src.get(self.pos) else {
            return Err(self.err("unexpected end of expression"));
        };
        if c == b'!' {
            self.pos += 1;
            let e = self.atom()?;
            return Ok(BirExpr::Unop(UnOp::Not, Box::new(e)));
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.parse_bp(0)?;
            self.skip_ws();
            if self.src.get(self.pos) != Some(&b')') {
                return Err(self.err("expected `)`"));
            }
            self.pos += 1;
            return Ok(e);
        }
        if c == b'"' {
            self.pos += 1;
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos] != b'"' {
                self.pos += 1;
            }
            if self.pos == self.src.len() {
                return Err(self.err("unterminated string literal"));
            }
            let s = std::str::from_utf8(&self.src[start..self.pos])
                .map_err(|_| self.err("invalid utf-8 in string"))?
                .to_string();
            self.pos += 1;
            return Ok(BirExpr::Const(Bval::Str(s)));
        }
        if c.is_ascii_digit() {
            let start = self.pos;
            if self.src[self.pos..].starts_with(b"0x") {
                self.pos += 2;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_hexdigit() {
                    self.pos += 1;
                }
                let hex = std::str::from_utf8(&self.src[start + 2..self.pos]).unwrap();
                let v = u64::from_str_radix(hex, 16)
                    .map_err(|_| self.err("bad hex literal"))?;
                return Ok(BirExpr::int(v));
            }
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let dec = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let v: u64 = dec.parse().map_err(|_| self.err("bad integer literal"))?;
            return Ok(BirExpr::int(v));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            self.skip_ws();
            if self.src.get(self.pos) == Some(&b'(') {
                self.pos += 1;
                let e = self.parse_bp(0)?;
                self.skip_ws();
                if self.src.get(self.pos) != Some(&b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                // `var(x)` is the explicit spelling of a variable reference.
                if ident == "var" {
                    match e {
                        BirExpr::Var(x) => return Ok(BirExpr::Var(x)),
                        other => {
                            return Ok(other);
                        }
                    }
                }
                return Ok(BirExpr::Unop(UnOp::Named(ident), Box::new(e)));
            }
            return Ok(BirExpr::Var(ident));
        }
        Err(self.err(format!("unexpected character `{}`", c as char)))
    }
}

pub type Env = BTreeMap<String, Bval>;

/// Applies a binary operator to concrete values. Integer arithmetic wraps;
/// concatenation packs the low 32 bits of each integer operand.
pub fn apply_binop(op: BinOp, lv: &Bval, rv: &Bval) -> Result<Bval, BirError> {
    let mismatch = || BirError::TypeMismatch {
        op: op.token().into(),
        lhs: lv.to_string(),
        rhs: rv.to_string(),
    };
    match op {
        BinOp::Xor => match (lv, rv) {
            (Bval::Int(a), Bval::Int(b)) => Ok(Bval::Int(a ^ b)),
            _ => Err(mismatch()),
        },
        BinOp::Add => match (lv, rv) {
            (Bval::Int(a), Bval::Int(b)) => Ok(Bval::Int(a.wrapping_add(*b))),
            _ => Err(mismatch()),
        },
        BinOp::Mul => match (lv, rv) {
            (Bval::Int(a), Bval::Int(b)) => Ok(Bval::Int(a.wrapping_mul(*b))),
            _ => Err(mismatch()),
        },
        BinOp::Concat => match (lv, rv) {
            (Bval::Str(a), Bval::Str(b)) => Ok(Bval::Str(format!("{a}{b}"))),
            (Bval::Int(a), Bval::Int(b)) => Ok(Bval::Int(a.wrapping_shl(32) | (b & 0xffff_ffff))),
            _ => Err(mismatch()),
        },
        BinOp::Eq => Ok(Bval::Int(u64::from(lv == rv))),
    }
}

pub fn apply_unop(op: &UnOp, v: &Bval) -> Result<Bval, BirError> {
    match op {
        UnOp::Not => match v {
            Bval::Int(i) => Ok(Bval::Int(if *i == 0 { 1 } else { 0 })),
            other => Err(BirError::TypeMismatch {
                op: "!".into(),
                lhs: other.to_string(),
                rhs: String::new(),
            }),
        },
        UnOp::Named(n) => match (n.as_str(), v) {
            ("len", Bval::Str(s)) => Ok(Bval::Int(s.len() as u64)),
            ("len", Bval::Int(_)) => Ok(Bval::Int(8)),
            _ => Err(BirError::UnknownOperator(n.clone())),
        },
    }
}

/// Strict evaluation of an expression under a concrete environment.
pub fn eval_expr(env: &Env, e: &BirExpr) -> Result<Bval, BirError> {
    match e {
        BirExpr::Const(v) => Ok(v.clone()),
        BirExpr::Var(x) => env
            .get(x)
            .cloned()
            .ok_or_else(|| BirError::UnboundVariable(x.clone())),
        BirExpr::Unop(op, e) => {
            let v = eval_expr(env, e)?;
            apply_unop(op, &v)
        }
        BirExpr::Binop(op, l, r) => {
            let lv = eval_expr(env, l)?;
            let rv = eval_expr(env, r)?;
            apply_binop(*op, &lv, &rv)
        }
    }
}

/// Concrete events, over base values rather than symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CEvent {
    Fr(Bval),
    In(Bval),
    Out(Bval),
    FCall(FnSym, Vec<Bval>, Bval),
    Ev(String),
    Loop,
    Assign(String, Bval),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CEventTag {
    Fr,
    In,
    Out,
    FCall,
    Ev,
    Loop,
    Assign,
}

impl CEvent {
    pub fn tag(&self) -> CEventTag {
        match self {
            CEvent::Fr(_) => CEventTag::Fr,
            CEvent::In(_) => CEventTag::In,
            CEvent::Out(_) => CEventTag::Out,
            CEvent::FCall(..) => CEventTag::FCall,
            CEvent::Ev(_) => CEventTag::Ev,
            CEvent::Loop => CEventTag::Loop,
            CEvent::Assign(..) => CEventTag::Assign,
        }
    }
}

impl fmt::Display for CEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CEvent::Fr(v) => write!(f, "Fr({v})"),
            CEvent::In(v) => write!(f, "In({v})"),
            CEvent::Out(v) => write!(f, "Out({v})"),
            CEvent::FCall(g, args, y) => {
                write!(f, "FCall({}", g.name())?;
                for a in args {
                    write!(f, ",{a}")?;
                }
                write!(f, ";{y})")
            }
            CEvent::Ev(e) => write!(f, "Ev({e})"),
            CEvent::Loop => f.write_str("Loop"),
            CEvent::Assign(x, v) => write!(f, "Assign({x},{v})"),
        }
    }
}

impl crate::symbolic::TaggedEvent for CEvent {
    type Tag = CEventTag;
    fn sync_tag(&self) -> CEventTag {
        self.tag()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConcreteState {
    pub env: Env,
    /// `None` once halted.
    pub pc: Option<Pc>,
}

impl ConcreteState {
    pub fn at_entry(p: &BirProgram) -> Self {
        ConcreteState {
            env: Env::new(),
            pc: Some(p.entry()),
        }
    }
}

/// Supplies the environment's half of external interactions: random draws,
/// incoming messages, and crypto-call results.
pub trait WorldOracle {
    fn rng(&mut self) -> Result<Bval, BirError>;
    fn recv(&mut self) -> Result<Bval, BirError>;
    fn fcall(&mut self, f: &FnSym, args: &[Bval]) -> Result<Bval, BirError>;
}

/// Replays pre-recorded responses.
#[derive(Debug, Clone, Default)]
pub struct ScriptedWorld {
    pub rng: Vec<Bval>,
    pub recv: Vec<Bval>,
    pub fcall: Vec<Bval>,
}

impl WorldOracle for ScriptedWorld {
    fn rng(&mut self) -> Result<Bval, BirError> {
        if self.rng.is_empty() {
            return Err(BirError::WorldExhausted("rng".into()));
        }
        Ok(self.rng.remove(0))
    }

    fn recv(&mut self) -> Result<Bval, BirError> {
        if self.recv.is_empty() {
            return Err(BirError::WorldExhausted("recv".into()));
        }
        Ok(self.recv.remove(0))
    }

    fn fcall(&mut self, _f: &FnSym, _args: &[Bval]) -> Result<Bval, BirError> {
        if self.fcall.is_empty() {
            return Err(BirError::WorldExhausted("fcall".into()));
        }
        Ok(self.fcall.remove(0))
    }
}

/// One concrete step. Control transfers produce no event; assignments and
/// configured labels do. Returns the event, if any, and the successor.
pub fn concrete_step<W: WorldOracle>(
    p: &BirProgram,
    cfg: &crate::sbir::CryptoConfig,
    s: &ConcreteState,
    world: &mut W,
) -> Result<(Option<CEvent>, ConcreteState), BirError> {
    use crate::sbir::Role;

    let Some(pc) = s.pc.clone() else {
        return Err(BirError::Halted);
    };
    let stmt = match p.stmt_at(&pc) {
        Some(st) => st.clone(),
        None => {
            return Ok((
                None,
                ConcreteState {
                    env: s.env.clone(),
                    pc: None,
                },
            ))
        }
    };
    let advance = |env: Env| ConcreteState {
        env,
        pc: p.advance(&pc),
    };
    match stmt {
        BirStmt::Halt => Ok((
            None,
            ConcreteState {
                env: s.env.clone(),
                pc: None,
            },
        )),
        BirStmt::Assign(x, e) => {
            let v = eval_expr(&s.env, &e)?;
            let mut env = s.env.clone();
            env.insert(x.clone(), v.clone());
            Ok((Some(CEvent::Assign(x, v)), advance(env)))
        }
        BirStmt::Cjmp(c, t1, t2) => {
            let cond = eval_expr(&s.env, &c)?;
            let target = if cond.truthy() { t1 } else { t2 };
            let label = eval_expr(&s.env, &target)?;
            if !p.has_block(&label) {
                return Err(BirError::UnknownLabel(label.to_string()));
            }
            Ok((
                None,
                ConcreteState {
                    env: s.env.clone(),
                    pc: Some((label, 0)),
                },
            ))
        }
        BirStmt::Jmp(t) => {
            let label = eval_expr(&s.env, &t)?;
            if let Some(role) = cfg.roles.get(&label) {
                let mut env = s.env.clone();
                let ev = match role {
                    Role::Rng { .. } => {
                        let v = world.rng()?;
                        env.insert("R0".into(), v.clone());
                        CEvent::Fr(v)
                    }
                    Role::Send { reg } => {
                        let v = env
                            .get(reg)
                            .cloned()
                            .ok_or_else(|| BirError::UnboundVariable(reg.clone()))?;
                        CEvent::Out(v)
                    }
                    Role::Recv { reg } => {
                        let v = world.recv()?;
                        env.insert(reg.clone(), v.clone());
                        CEvent::In(v)
                    }
                    Role::Event { name } => CEvent::Ev(name.clone()),
                    Role::Fn { sym, .. } => {
                        let mut args = Vec::new();
                        for i in 0..sym.arity() {
                            let reg = format!("R{i}");
                            let v = env
                                .get(&reg)
                                .cloned()
                                .ok_or_else(|| BirError::UnboundVariable(reg.clone()))?;
                            args.push(v);
                        }
                        let out = world.fcall(sym, &args)?;
                        env.insert("R0".into(), out.clone());
                        CEvent::FCall(sym.clone(), args, out)
                    }
                };
                return Ok((Some(ev), advance(env)));
            }
            if p.has_block(&label) {
                return Ok((
                    None,
                    ConcreteState {
                        env: s.env.clone(),
                        pc: Some((label, 0)),
                    },
                ));
            }
            Err(BirError::UnknownLabel(label.to_string()))
        }
    }
}

/// Runs a program to completion under a scripted world, collecting the
/// visible concrete trace.
pub fn concrete_run<W: WorldOracle>(
    p: &BirProgram,
    cfg: &crate::sbir::CryptoConfig,
    world: &mut W,
    max_steps: usize,
) -> Result<Vec<CEvent>, BirError> {
    let mut state = ConcreteState::at_entry(p);
    let mut out = Vec::new();
    for _ in 0..max_steps {
        if state.pc.is_none() {
            return Ok(out);
        }
        let (ev, next) = concrete_step(p, cfg, &state, world)?;
        if let Some(e) = ev {
            out.push(e);
        }
        state = next;
    }
    Ok(out)
}

/// A configured program with a scripted world, as a concrete LTS. The
/// remaining script is part of the state, so stepping stays pure.
#[derive(Debug, Clone)]
pub struct ConcreteProgramLts {
    pub program: BirProgram,
    pub cfg: crate::sbir::CryptoConfig,
    pub script: ScriptedWorld,
    pub init_env: Env,
}

type ScriptState = (Vec<Bval>, Vec<Bval>, Vec<Bval>);

impl crate::compose::CLts for ConcreteProgramLts {
    type State = (ConcreteState, ScriptState);

    fn initial(&self) -> Self::State {
        (
            ConcreteState {
                env: self.init_env.clone(),
                pc: Some(self.program.entry()),
            },
            (
                self.script.rng.clone(),
                self.script.recv.clone(),
                self.script.fcall.clone(),
            ),
        )
    }

    fn successors(&self, s: &Self::State) -> Vec<(CEvent, Self::State)> {
        let mut state = s.0.clone();
        let mut world = ScriptedWorld {
            rng: s.1 .0.clone(),
            recv: s.1 .1.clone(),
            fcall: s.1 .2.clone(),
        };
        // Run the silent closure to the next visible event.
        for _ in 0..10_000 {
            if state.pc.is_none() {
                return vec![];
            }
            match concrete_step(&self.program, &self.cfg, &state, &mut world) {
                Ok((Some(ev), next)) => {
                    return vec![(ev, (next, (world.rng, world.recv, world.fcall)))];
                }
                Ok((None, next)) => state = next,
                Err(_) => return vec![],
            }
        }
        vec![]
    }

    fn sync_tags(&self) -> std::collections::BTreeSet<CEventTag> {
        [CEventTag::Fr, CEventTag::In, CEventTag::Out, CEventTag::FCall]
            .into_iter()
            .collect()
    }
}

/// An environment stub that absorbs freshness and network events and
/// proposes nothing of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubEnvironment;

impl crate::compose::CLts for StubEnvironment {
    type State = ();

    fn initial(&self) {}

    fn successors(&self, _s: &()) -> Vec<(CEvent, ())> {
        vec![]
    }

    fn accept(&self, _s: &(), ev: &CEvent) -> Vec<()> {
        match ev.tag() {
            CEventTag::Fr | CEventTag::In | CEventTag::Out => vec![()],
            _ => vec![],
        }
    }

    fn sync_tags(&self) -> std::collections::BTreeSet<CEventTag> {
        [CEventTag::Fr, CEventTag::In, CEventTag::Out]
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const FIG5_SRC: &str = "\
block 0x0:
  jmp(0x44)              # rng
  assign(R1, var(R0))
  assign(R0, m)
  jmp(0x20)              # senc
  jmp(0x04)              # send
  assign(R2, R1 ^ 0xdeadbeef)
  jmp(0x05)              # send R2
  halt
";

    #[test]
    fn parses_linear_program() {
        let p = parse_program(FIG5_SRC).unwrap();
        assert_eq!(p.blocks().len(), 1);
        assert_eq!(p.blocks()[0].1.len(), 8);
        assert_eq!(
            p.blocks()[0].1[1],
            BirStmt::Assign("R1".into(), BirExpr::var("R0"))
        );
    }

    #[test]
    fn parses_minimal_block() {
        let p = parse_program("block 0:\n  halt\n").unwrap();
        assert_eq!(p.blocks().len(), 1);
        assert_eq!(p.blocks()[0].1, vec![BirStmt::Halt]);
    }

    #[test]
    fn rejects_duplicate_labels() {
        let err = parse_program("block 0:\n  halt\nblock 0:\n  halt\n");
        assert_eq!(err, Err(BirError::DuplicateLabel("0x0".into())));
    }

    #[test]
    fn drops_link_register_prefix() {
        let p = parse_program("block 0:\n  [R30=4;] jmp(0x20)\n  halt\n").unwrap();
        assert_eq!(p.blocks()[0].1[0], BirStmt::Jmp(BirExpr::int(0x20)));
    }

    #[test]
    fn eval_examples() {
        let mut env = Env::new();
        env.insert("R1".into(), Bval::Int(0x1));
        let e = BirExpr::Binop(
            BinOp::Xor,
            Box::new(BirExpr::var("R1")),
            Box::new(BirExpr::int(0x1)),
        );
        assert_eq!(eval_expr(&env, &e).unwrap(), Bval::Int(0));

        let sum = BirExpr::Binop(
            BinOp::Add,
            Box::new(BirExpr::int(0x2)),
            Box::new(BirExpr::int(0x3)),
        );
        assert_eq!(eval_expr(&Env::new(), &sum).unwrap(), Bval::Int(0x5));

        let mut env2 = Env::new();
        env2.insert("k".into(), Bval::Int(0xab));
        let mask = BirExpr::Binop(
            BinOp::Xor,
            Box::new(BirExpr::Binop(
                BinOp::Xor,
                Box::new(BirExpr::var("k")),
                Box::new(BirExpr::int(0xdeadbeef)),
            )),
            Box::new(BirExpr::int(0xdeadbeef)),
        );
        assert_eq!(eval_expr(&env2, &mask).unwrap(), Bval::Int(0xab));
    }

    #[test]
    fn eval_errors() {
        let e = BirExpr::var("nope");
        assert_eq!(
            eval_expr(&Env::new(), &e),
            Err(BirError::UnboundVariable("nope".into()))
        );
        let bad = BirExpr::Binop(
            BinOp::Add,
            Box::new(BirExpr::Const(Bval::Str("a".into()))),
            Box::new(BirExpr::int(1)),
        );
        assert!(matches!(
            eval_expr(&Env::new(), &bad),
            Err(BirError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn pretty_roundtrip_fig5() {
        let p = parse_program(FIG5_SRC).unwrap();
        let printed = p.pretty();
        let again = parse_program(&printed).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn concrete_steps() {
        use crate::sbir::CryptoConfig;

        let p = parse_program(
            "block 0:\n  assign(R0, 0x1)\n  cjmp(0x1, 0x1, 0x2)\nblock 1:\n  halt\nblock 2:\n  assign(R9, 0x9)\n  halt\n",
        )
        .unwrap();
        let cfg = CryptoConfig::default();
        let mut world = ScriptedWorld::default();
        let s0 = ConcreteState::at_entry(&p);

        let (ev, s1) = concrete_step(&p, &cfg, &s0, &mut world).unwrap();
        assert_eq!(ev, Some(CEvent::Assign("R0".into(), Bval::Int(1))));
        assert_eq!(s1.env.get("R0"), Some(&Bval::Int(1)));

        // True branch of the conditional.
        let (ev, s2) = concrete_step(&p, &cfg, &s1, &mut world).unwrap();
        assert_eq!(ev, None);
        assert_eq!(s2.pc, Some((Bval::Int(1), 0)));

        // Halt clears the program counter; stepping after that is an error.
        let (_, s3) = concrete_step(&p, &cfg, &s2, &mut world).unwrap();
        assert_eq!(s3.pc, None);
        assert_eq!(
            concrete_step(&p, &cfg, &s3, &mut world),
            Err(BirError::Halted)
        );
    }

    #[test]
    fn concrete_run_is_deterministic() {
        use crate::sbir::{CryptoConfig, Role};
        use std::collections::BTreeMap;

        let p = parse_program("block 0:\n  jmp(0x44)\n  assign(R1, var(R0) ^ 0x2)\n  halt\n").unwrap();
        let mut roles = BTreeMap::new();
        roles.insert(Bval::Int(0x44), Role::Rng { name_hint: "k".into() });
        let cfg = CryptoConfig {
            roles,
            const_ops: Default::default(),
        };
        let script = || ScriptedWorld {
            rng: vec![Bval::Int(0xf0)],
            ..Default::default()
        };
        let a = concrete_run(&p, &cfg, &mut script(), 100).unwrap();
        let b = concrete_run(&p, &cfg, &mut script(), 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a,
            vec![
                CEvent::Fr(Bval::Int(0xf0)),
                CEvent::Assign("R1".into(), Bval::Int(0xf2)),
            ]
        );
    }
}

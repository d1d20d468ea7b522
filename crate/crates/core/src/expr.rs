//! A small arithmetic expression language for field definitions in config
//! files.
//!
//! Grammar (1-based columns in error messages):
//!
//! ```text
//!   expr   := term (('+' | '-') term)*
//!   term   := unary (('*' | '/') unary)*
//!   unary  := '-' unary | power
//!   power  := atom ('^' unary)?          // right-associative, binds
//!                                        // tighter than unary minus
//!   atom   := number | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//!   var    := 'x1' .. 'xm'
//!   func   := sin | cos | exp | log | sqrt | abs | min | max
//! ```

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown identifier {name} at column {col}")]
    UnknownIdentifier { name: String, col: usize },
    #[error("math domain error: {0}")]
    Domain(String),
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

/// Parsed expression over variables x1..xm.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(f64),
    /// 0-based coordinate index.
    Var(usize),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Vec<Expression>),
}

impl Expression {
    /// Number of coordinates the expression was parsed against.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ExprError> {
        let v = self.eval_inner(x)?;
        if v.is_nan() {
            return Err(ExprError::Domain("expression evaluated to NaN".into()));
        }
        Ok(v)
    }

    fn eval_inner(&self, x: &[f64]) -> Result<f64, ExprError> {
        match self {
            Expression::Literal(v) => Ok(*v),
            Expression::Var(i) => x.get(*i).copied().ok_or(ExprError::DimensionMismatch {
                expected: *i + 1,
                got: x.len(),
            }),
            Expression::Neg(e) => Ok(-e.eval_inner(x)?),
            Expression::Binary(op, a, b) => {
                let a = a.eval_inner(x)?;
                let b = b.eval_inner(x)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(ExprError::Domain("division by zero".into()))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() {
                            Err(ExprError::Domain(format!("{a}^{b} is undefined")))
                        } else {
                            Ok(v)
                        }
                    }
                }
            }
            Expression::Call(f, args) => {
                let mut vals = [0.0; 2];
                for (slot, a) in vals.iter_mut().zip(args) {
                    *slot = a.eval_inner(x)?;
                }
                match f {
                    Func::Sin => Ok(vals[0].sin()),
                    Func::Cos => Ok(vals[0].cos()),
                    Func::Exp => Ok(vals[0].exp()),
                    Func::Log => {
                        if vals[0] <= 0.0 {
                            Err(ExprError::Domain(format!("log of non-positive {}", vals[0])))
                        } else {
                            Ok(vals[0].ln())
                        }
                    }
                    Func::Sqrt => {
                        if vals[0] < 0.0 {
                            Err(ExprError::Domain(format!("sqrt of negative {}", vals[0])))
                        } else {
                            Ok(vals[0].sqrt())
                        }
                    }
                    Func::Abs => Ok(vals[0].abs()),
                    Func::Min => Ok(vals[0].min(vals[1])),
                    Func::Max => Ok(vals[0].max(vals[1])),
                }
            }
        }
    }
}

impl fmt::Display for Expression {
    /// Fully parenthesized form; `parse(print(e))` reproduces the tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Literal(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Expression::Var(i) => write!(f, "x{}", i + 1),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{sym}{b})")
            }
            Expression::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parse `text` against variables x1..x`dimension`.
pub fn parse(text: &str, dimension: usize) -> Result<Expression, ExprError> {
    let mut p = Parser::new(text, dimension)?;
    let e = p.expr()?;
    if let Some(&(col, c)) = p.peek() {
        return Err(ExprError::Syntax {
            col,
            msg: format!("unexpected '{c}'"),
        });
    }
    Ok(e)
}

/// Parse a comma-separated list of expressions (used for vector fields).
pub fn parse_list(text: &str, dimension: usize) -> Result<Vec<Expression>, ExprError> {
    let mut p = Parser::new(text, dimension)?;
    let mut out = vec![p.expr()?];
    while p.eat(',') {
        out.push(p.expr()?);
    }
    if let Some(&(col, c)) = p.peek() {
        return Err(ExprError::Syntax {
            col,
            msg: format!("unexpected '{c}'"),
        });
    }
    Ok(out)
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
    dimension: usize,
}

impl Parser {
    fn new(text: &str, dimension: usize) -> Result<Self, ExprError> {
        if text.trim().is_empty() {
            return Err(ExprError::Syntax {
                col: 1,
                msg: "empty expression".into(),
            });
        }
        // Track 1-based columns of non-whitespace characters.
        let chars = text
            .chars()
            .enumerate()
            .filter(|(_, c)| !c.is_whitespace())
            .map(|(i, c)| (i + 1, c))
            .collect();
        Ok(Self {
            chars,
            pos: 0,
            dimension,
        })
    }

    fn peek(&self) -> Option<&(usize, char)> {
        self.chars.get(self.pos)
    }

    fn eat(&mut self, want: char) -> bool {
        if let Some(&(_, c)) = self.peek() {
            if c == want {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn end_col(&self) -> usize {
        self.chars.last().map(|&(c, _)| c + 1).unwrap_or(1)
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                let rhs = self.term()?;
                lhs = Expression::Binary(BinOp::Add, Box::new(lhs), Box::new(rhs));
            } else if self.eat('-') {
                let rhs = self.term()?;
                lhs = Expression::Binary(BinOp::Sub, Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                lhs = Expression::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
            } else if self.eat('/') {
                let rhs = self.unary()?;
                lhs = Expression::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if self.eat('-') {
            // '^' binds tighter than unary minus: -2^2 parses as -(2^2).
            Ok(Expression::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            Ok(Expression::Binary(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expression, ExprError> {
        let Some(&(col, c)) = self.peek() else {
            return Err(ExprError::Syntax {
                col: self.end_col(),
                msg: "unexpected end of expression".into(),
            });
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(')') {
                return Err(ExprError::Syntax {
                    col: self.peek().map(|&(c, _)| c).unwrap_or(self.end_col()),
                    msg: "expected ')'".into(),
                });
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            return self.identifier();
        }
        Err(ExprError::Syntax {
            col,
            msg: format!("unexpected '{c}'"),
        })
    }

    fn number(&mut self) -> Result<Expression, ExprError> {
        let start = self.pos;
        let col = self.chars[start].0;
        let mut text = String::new();
        while let Some(&(_, c)) = self.peek() {
            if c.is_ascii_digit() || c == '.' {
                text.push(c);
                self.pos += 1;
            } else if (c == 'e' || c == 'E') && !text.is_empty() {
                // Scientific notation: e[+|-]digits.
                let save = self.pos;
                let mut tail = String::from("e");
                self.pos += 1;
                if let Some(&(_, s)) = self.peek() {
                    if s == '+' || s == '-' {
                        tail.push(s);
                        self.pos += 1;
                    }
                }
                let mut digits = false;
                while let Some(&(_, d)) = self.peek() {
                    if d.is_ascii_digit() {
                        tail.push(d);
                        digits = true;
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                if digits {
                    text.push_str(&tail);
                } else {
                    self.pos = save;
                }
                break;
            } else {
                break;
            }
        }
        text.parse::<f64>()
            .map(Expression::Literal)
            .map_err(|_| ExprError::Syntax {
                col,
                msg: format!("invalid number '{text}'"),
            })
    }

    fn identifier(&mut self) -> Result<Expression, ExprError> {
        let col = self.chars[self.pos].0;
        let mut name = String::new();
        while let Some(&(_, c)) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                name.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        // Variable x<k>?
        if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if idx >= 1 && idx <= self.dimension {
                return Ok(Expression::Var(idx - 1));
            }
            return Err(ExprError::UnknownIdentifier { name, col });
        }
        let func = match name.as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return Err(ExprError::UnknownIdentifier { name, col }),
        };
        if !self.eat('(') {
            return Err(ExprError::Syntax {
                col: self.peek().map(|&(c, _)| c).unwrap_or(self.end_col()),
                msg: format!("expected '(' after {}", func.name()),
            });
        }
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(ExprError::Syntax {
                col: self.peek().map(|&(c, _)| c).unwrap_or(self.end_col()),
                msg: "expected ')'".into(),
            });
        }
        if args.len() != func.arity() {
            return Err(ExprError::Syntax {
                col,
                msg: format!(
                    "{} takes {} argument(s), got {}",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
            });
        }
        Ok(Expression::Call(func, args))
    }
}

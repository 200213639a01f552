//! Potential presets and a small expression evaluator.
//!
//! Presets are built from the smooth periodic coordinate
//! `q_a(x) = (L_a/π)·sin(π·d_a/L_a)` where `d_a` is the centered
//! (minimal-image) displacement from the box center. `q_a ≈ d_a` near the
//! center and `|q_a|` is maximal at the seam, so "decays away from the
//! center" translates to smooth periodic fields with no kink across the box
//! boundary. All presets other than `constant` are negative near the box
//! faces with default-scale parameters, so low-lying eigenfunctions localize
//! away from the seam.
//!
//! The `expression` preset evaluates a user formula in centered coordinates
//! `x, y, z ∈ [−L_a/2, L_a/2)`. Note the raw coordinates themselves are only
//! continuous, not smooth, across the seam; periodic expressions should be
//! built from trigonometric functions of `2π·x/L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Preset {
    Constant { v0: f64 },
    GaussianWell { amplitude: f64, width: f64, floor: f64 },
    HarmonicCapped { cap: f64 },
    Anharmonic { cap: f64, quartic: f64 },
    Expression { expr: String },
}

impl Preset {
    /// The default well used by examples and sweeps: amplitude 6, width 1.4,
    /// floor −0.3 — deep enough to hold a healthy negative spectrum even at
    /// h = 1 (harmonic estimate: ground level near −2) while staying
    /// negative near the faces on boxes of side ≳ 2π.
    pub fn default_well() -> Preset {
        Preset::GaussianWell { amplitude: 6.0, width: 1.4, floor: -0.3 }
    }
}

/// Smooth periodic centered coordinates (see module doc).
fn periodic_q(grid: &Grid, p: [f64; 3]) -> [f64; 3] {
    let c = grid.center();
    let d = grid.periodic_displacement(p, c);
    let l = grid.box_len();
    std::array::from_fn(|a| {
        let t = std::f64::consts::PI * d[a] / l[a];
        l[a] / std::f64::consts::PI * t.sin()
    })
}

pub fn sample_potential(preset: &Preset, grid: &Grid) -> Result<ScalarField> {
    match preset {
        Preset::Constant { v0 } => {
            if !v0.is_finite() {
                return Err(Error::Expression("constant preset: non-finite value".into()));
            }
            Ok(ScalarField::constant(grid, *v0))
        }
        Preset::GaussianWell { amplitude, width, floor } => {
            if *width <= 0.0 {
                return Err(Error::Expression("gaussian_well: width must be positive".into()));
            }
            let two_w2 = 2.0 * width * width;
            Ok(ScalarField::from_fn(grid, |p| {
                let q = periodic_q(grid, p);
                let g = (-(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) / two_w2).exp();
                floor + amplitude * g
            }))
        }
        Preset::HarmonicCapped { cap } => Ok(ScalarField::from_fn(grid, |p| {
            let q = periodic_q(grid, p);
            cap - (q[0] * q[0] + q[1] * q[1] + q[2] * q[2])
        })),
        Preset::Anharmonic { cap, quartic } => Ok(ScalarField::from_fn(grid, |p| {
            let q = periodic_q(grid, p);
            let r2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
            cap - r2 - quartic * r2 * r2
        })),
        Preset::Expression { expr } => {
            let parsed = Expr::parse(expr)?;
            let c = grid.center();
            let mut values = Vec::with_capacity(grid.n_sites());
            for i in 0..grid.n_sites() {
                let d = grid.periodic_displacement(grid.site_position(i), c);
                let v = parsed.eval(d)?;
                if !v.is_finite() {
                    return Err(Error::Expression(format!(
                        "expression produced non-finite value at x={:?}",
                        d
                    )));
                }
                values.push(v);
            }
            ScalarField::from_values(grid, values)
        }
    }
}

// ------------------------------------------------------------ expressions --

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// centered coordinate index 0..3
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
    Atan,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "sinh" => (Func::Sinh, 1),
            "cosh" => (Func::Cosh, 1),
            "atan" => (Func::Atan, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }

    fn apply(&self, args: &[f64]) -> f64 {
        match self {
            Func::Sin => args[0].sin(),
            Func::Cos => args[0].cos(),
            Func::Tan => args[0].tan(),
            Func::Exp => args[0].exp(),
            Func::Ln => args[0].ln(),
            Func::Sqrt => args[0].sqrt(),
            Func::Abs => args[0].abs(),
            Func::Tanh => args[0].tanh(),
            Func::Sinh => args[0].sinh(),
            Func::Cosh => args[0].cosh(),
            Func::Atan => args[0].atan(),
            Func::Min => args[0].min(args[1]),
            Func::Max => args[0].max(args[1]),
            Func::Pow => args[0].powf(args[1]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => { out.push((Tok::Plus, i)); i += 1 }
            '-' => { out.push((Tok::Minus, i)); i += 1 }
            '*' => { out.push((Tok::Star, i)); i += 1 }
            '/' => { out.push((Tok::Slash, i)); i += 1 }
            '^' => { out.push((Tok::Caret, i)); i += 1 }
            '(' => { out.push((Tok::LParen, i)); i += 1 }
            ')' => { out.push((Tok::RParen, i)); i += 1 }
            ',' => { out.push((Tok::Comma, i)); i += 1 }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, '0'..='9' | '.' | 'e' | 'E')
                {
                    // allow exponent sign
                    if matches!(bytes[i] as char, 'e' | 'E')
                        && i + 1 < bytes.len()
                        && matches!(bytes[i + 1] as char, '+' | '-')
                    {
                        i += 1;
                    }
                    i += 1;
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| {
                    Error::Expression(format!("bad number '{text}' at position {start}"))
                })?;
                out.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Expression(format!(
                    "unexpected character '{c}' at position {i}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(usize::MAX)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            // right-associative; exponent may carry a unary minus
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.here();
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(Error::Expression(format!("missing ')' at position {at}"))),
                }
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "z" => Ok(Expr::Var(2)),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "e" => Ok(Expr::Num(std::f64::consts::E)),
                _ => {
                    let (func, arity) = Func::lookup(&name).ok_or_else(|| {
                        Error::Expression(format!("unknown identifier '{name}' at position {at}"))
                    })?;
                    if !matches!(self.next(), Some(Tok::LParen)) {
                        return Err(Error::Expression(format!(
                            "'{name}' needs parenthesized arguments (position {at})"
                        )));
                    }
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Tok::Comma)) {
                        self.next();
                        args.push(self.expr()?);
                    }
                    if !matches!(self.next(), Some(Tok::RParen)) {
                        return Err(Error::Expression(format!(
                            "missing ')' after arguments of '{name}' (position {at})"
                        )));
                    }
                    if args.len() != arity {
                        return Err(Error::Expression(format!(
                            "'{name}' takes {arity} argument(s), got {}",
                            args.len()
                        )));
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            other => Err(Error::Expression(format!(
                "unexpected token {other:?} at position {at}"
            ))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expression(format!(
                "trailing input at position {}",
                p.here()
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, xyz: [f64; 3]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => xyz[*i],
            Expr::Neg(e) => -e.eval(xyz)?,
            Expr::Add(a, b) => a.eval(xyz)? + b.eval(xyz)?,
            Expr::Sub(a, b) => a.eval(xyz)? - b.eval(xyz)?,
            Expr::Mul(a, b) => a.eval(xyz)? * b.eval(xyz)?,
            Expr::Div(a, b) => a.eval(xyz)? / b.eval(xyz)?,
            Expr::Pow(a, b) => a.eval(xyz)?.powf(b.eval(xyz)?),
            Expr::Call(f, args) => {
                let vals: Result<Vec<f64>> = args.iter().map(|a| a.eval(xyz)).collect();
                f.apply(&vals?)
            }
        })
    }
}

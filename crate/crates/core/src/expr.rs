//! Arithmetic expressions over named variables.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Constants `pi` and `e` are predefined. Functions: `sin cos tan exp log ln
//! sqrt abs tanh pos min max pow`, where `pos(a)` is the positive part.

use std::fmt;

use crate::{Error, Result};

const MAX_DEPTH: usize = 64;
const MAX_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Pos,
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
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "pos" => (Func::Pos, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Pos => "pos",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    /// `if a < b { c } else { d }`, produced by differentiation.
    IfLess(Box<[Node; 4]>),
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Parses `src`; identifiers must be one of `vars` (or `pi`, `e`).
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        if src.len() > MAX_LEN {
            return Err(Error::Parse {
                line: 1,
                column: MAX_LEN,
                message: "expression too long".into(),
            });
        }
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            vars,
            depth: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn constant(v: f64) -> Expr {
        Expr {
            root: Node::Num(v),
            vars: Vec::new(),
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with `values[i]` bound to the i-th variable.
    pub fn eval(&self, values: &[f64]) -> f64 {
        eval(&self.root, values)
    }

    /// Symbolic partial derivative with respect to variable `name`.
    pub fn derivative(&self, name: &str) -> Result<Expr> {
        let idx = self
            .vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variable `{name}`")))?;
        Ok(Expr {
            root: simplify(diff(&self.root, idx)),
            vars: self.vars.clone(),
        })
    }

    /// True when the expression does not reference variable `name`.
    pub fn is_independent_of(&self, name: &str) -> bool {
        match self.vars.iter().position(|v| v == name) {
            None => true,
            Some(i) => !uses(&self.root, i),
        }
    }
}

fn uses(n: &Node, i: usize) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(j) => *j == i,
        Node::Neg(a) => uses(a, i),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            uses(a, i) || uses(b, i)
        }
        Node::Call(_, args) => args.iter().any(|a| uses(a, i)),
        Node::IfLess(q) => q.iter().any(|a| uses(a, i)),
    }
}

fn eval(n: &Node, v: &[f64]) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(i) => v.get(*i).copied().unwrap_or(f64::NAN),
        Node::Neg(a) => -eval(a, v),
        Node::Add(a, b) => eval(a, v) + eval(b, v),
        Node::Sub(a, b) => eval(a, v) - eval(b, v),
        Node::Mul(a, b) => eval(a, v) * eval(b, v),
        Node::Div(a, b) => eval(a, v) / eval(b, v),
        Node::Pow(a, b) => pow(eval(a, v), eval(b, v)),
        Node::Call(f, args) => {
            let a = eval(&args[0], v);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Tanh => a.tanh(),
                Func::Pos => a.max(0.0),
                Func::Min => a.min(eval(&args[1], v)),
                Func::Max => a.max(eval(&args[1], v)),
                Func::Pow => pow(a, eval(&args[1], v)),
            }
        }
        Node::IfLess(q) => {
            if eval(&q[0], v) < eval(&q[1], v) {
                eval(&q[2], v)
            } else {
                eval(&q[3], v)
            }
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn num(c: f64) -> Box<Node> {
    Box::new(Node::Num(c))
}

fn bx(n: Node) -> Box<Node> {
    Box::new(n)
}

fn diff(n: &Node, i: usize) -> Node {
    use Node::*;
    match n {
        Num(_) => Num(0.0),
        Var(j) => Num(if *j == i { 1.0 } else { 0.0 }),
        Neg(a) => Neg(bx(diff(a, i))),
        Add(a, b) => Add(bx(diff(a, i)), bx(diff(b, i))),
        Sub(a, b) => Sub(bx(diff(a, i)), bx(diff(b, i))),
        Mul(a, b) => Add(
            bx(Mul(bx(diff(a, i)), b.clone())),
            bx(Mul(a.clone(), bx(diff(b, i)))),
        ),
        Div(a, b) => Div(
            bx(Sub(
                bx(Mul(bx(diff(a, i)), b.clone())),
                bx(Mul(a.clone(), bx(diff(b, i)))),
            )),
            bx(Mul(b.clone(), b.clone())),
        ),
        Pow(a, b) => diff_pow(a, b, i),
        Call(f, args) => {
            let a = &args[0];
            let da = bx(diff(a, i));
            let a = bx(a.clone());
            match f {
                Func::Sin => Mul(bx(Call(Func::Cos, vec![*a])), da),
                Func::Cos => Neg(bx(Mul(bx(Call(Func::Sin, vec![*a])), da))),
                Func::Tan => Div(da, bx(Pow(bx(Call(Func::Cos, vec![*a])), num(2.0)))),
                Func::Exp => Mul(bx(Call(Func::Exp, vec![*a])), da),
                Func::Log => Div(da, a),
                Func::Sqrt => Div(da, bx(Mul(num(2.0), bx(Call(Func::Sqrt, vec![*a]))))),
                Func::Abs => IfLess(Box::new([*a, Num(0.0), Neg(da.clone()), *da])),
                Func::Tanh => Mul(
                    bx(Sub(num(1.0), bx(Pow(bx(Call(Func::Tanh, vec![*a])), num(2.0))))),
                    da,
                ),
                Func::Pos => IfLess(Box::new([Num(0.0), *a, *da, Num(0.0)])),
                Func::Min => IfLess(Box::new([*a, args[1].clone(), *da, diff(&args[1], i)])),
                Func::Max => IfLess(Box::new([*a, args[1].clone(), diff(&args[1], i), *da])),
                Func::Pow => diff_pow(&a, &args[1], i),
            }
        }
        IfLess(q) => IfLess(Box::new([
            q[0].clone(),
            q[1].clone(),
            diff(&q[2], i),
            diff(&q[3], i),
        ])),
    }
}

fn diff_pow(a: &Node, b: &Node, i: usize) -> Node {
    use Node::*;
    if !uses(b, i) {
        // d(a^b) = b a^(b-1) a'
        Mul(
            bx(Mul(
                bx(b.clone()),
                bx(Pow(bx(a.clone()), bx(Sub(bx(b.clone()), num(1.0))))),
            )),
            bx(diff(a, i)),
        )
    } else {
        // d(a^b) = a^b (b' ln a + b a'/a)
        Mul(
            bx(Pow(bx(a.clone()), bx(b.clone()))),
            bx(Add(
                bx(Mul(bx(diff(b, i)), bx(Call(Func::Log, vec![a.clone()])))),
                bx(Div(bx(Mul(bx(b.clone()), bx(diff(a, i)))), bx(a.clone()))),
            )),
        )
    }
}

fn is_num(n: &Node, c: f64) -> bool {
    matches!(n, Node::Num(v) if *v == c)
}

fn simplify(n: Node) -> Node {
    use Node::*;
    match n {
        Neg(a) => match simplify(*a) {
            Num(c) => Num(-c),
            a => Neg(bx(a)),
        },
        Add(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(x), Num(y)) => Num(x + y),
            (a, b) if is_num(&a, 0.0) => b,
            (a, b) if is_num(&b, 0.0) => a,
            (a, b) => Add(bx(a), bx(b)),
        },
        Sub(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(x), Num(y)) => Num(x - y),
            (a, b) if is_num(&b, 0.0) => a,
            (a, b) if is_num(&a, 0.0) => Neg(bx(b)),
            (a, b) => Sub(bx(a), bx(b)),
        },
        Mul(a, b) => match (simplify(*a), simplify(*b)) {
            (Num(x), Num(y)) => Num(x * y),
            (a, b) if is_num(&a, 0.0) || is_num(&b, 0.0) => Num(0.0),
            (a, b) if is_num(&a, 1.0) => b,
            (a, b) if is_num(&b, 1.0) => a,
            (a, b) => Mul(bx(a), bx(b)),
        },
        Div(a, b) => match (simplify(*a), simplify(*b)) {
            (a, b) if is_num(&a, 0.0) && !is_num(&b, 0.0) => Num(0.0),
            (a, b) if is_num(&b, 1.0) => a,
            (a, b) => Div(bx(a), bx(b)),
        },
        Pow(a, b) => match (simplify(*a), simplify(*b)) {
            (a, b) if is_num(&b, 1.0) => a,
            (a, b) => Pow(bx(a), bx(b)),
        },
        Call(f, args) => Call(f, args.into_iter().map(simplify).collect()),
        IfLess(q) => {
            let [a, b, c, d] = *q;
            let (c, d) = (simplify(c), simplify(d));
            if c == d {
                c
            } else {
                IfLess(Box::new([simplify(a), simplify(b), c, d]))
            }
        }
        other => other,
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
    depth: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            line: 1,
            column: self.pos + 1,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error("expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Node> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(bx(lhs), bx(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(bx(lhs), bx(self.term()?));
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(bx(lhs), bx(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(bx(lhs), bx(self.unary()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        self.enter()?;
        let out = if self.eat(b'-') {
            Node::Neg(bx(self.unary()?))
        } else if self.eat(b'+') {
            self.unary()?
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(out)
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            Ok(Node::Pow(bx(base), bx(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Parse {
                line: 1,
                column: start + 1,
                message: format!("invalid number `{text}`"),
            })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if self.peek() == Some(b'(') {
            let Some((f, arity)) = Func::lookup(name) else {
                return Err(Error::Parse {
                    line: 1,
                    column: start + 1,
                    message: format!("unknown function `{name}`"),
                });
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected `)` after arguments"));
            }
            if args.len() != arity {
                return Err(Error::Parse {
                    line: 1,
                    column: start + 1,
                    message: format!("`{}` takes {arity} argument(s), got {}", f.name(), args.len()),
                });
            }
            return Ok(Node::Call(f, args));
        }
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        match name {
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            _ => Err(Error::Parse {
                line: 1,
                column: start + 1,
                message: format!("unknown identifier `{name}`"),
            }),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

fn write_node(n: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let bin = |f: &mut fmt::Formatter<'_>, a: &Node, op: &str, b: &Node| -> fmt::Result {
        write!(f, "(")?;
        write_node(a, vars, f)?;
        write!(f, " {op} ")?;
        write_node(b, vars, f)?;
        write!(f, ")")
    };
    match n {
        Node::Num(c) => write!(f, "{c:?}"),
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::Add(a, b) => bin(f, a, "+", b),
        Node::Sub(a, b) => bin(f, a, "-", b),
        Node::Mul(a, b) => bin(f, a, "*", b),
        Node::Div(a, b) => bin(f, a, "/", b),
        Node::Pow(a, b) => bin(f, a, "^", b),
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write_node(a, vars, f)?;
            }
            write!(f, ")")
        }
        Node::IfLess(q) => {
            write!(f, "ifless(")?;
            for (k, a) in q.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write_node(a, vars, f)?;
            }
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, x: f64) -> f64 {
        Expr::parse(src, &["x", "y"]).unwrap().eval(&[x, 0.0])
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0), -4.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert!((ev("2 + sin(4*pi*x)", 0.125) - 3.0).abs() < 1e-15);
        assert_eq!(ev("max(x, 1) + min(x, 1)", 3.0), 4.0);
        assert_eq!(ev("pos(x - 1)", 0.5), 0.0);
        assert_eq!(ev("1.5e1 + 2E-1", 0.0), 15.2);
        assert!((ev("exp(1) - e", 0.0)).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1 +", "(1", "foo(1)", "z", "sin(1, 2)", "1 2", "$", "max(1)"] {
            assert!(Expr::parse(bad, &["x"]).is_err(), "{bad}");
        }
        let deep = "(".repeat(200) + "1" + &")".repeat(200);
        assert!(Expr::parse(&deep, &[]).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let srcs = [
            "x^3 - 2*x",
            "sin(x) * exp(-x)",
            "abs(x)^1.5",
            "x / (1 + x^2)",
            "pow(x, x)",
            "tanh(x) + sqrt(x) + log(x)",
            "max(x, 2) * pos(x)",
        ];
        for src in srcs {
            let e = Expr::parse(src, &["x"]).unwrap();
            let d = e.derivative("x").unwrap();
            for &x in &[0.3, 1.1, 2.7] {
                let h = 1e-6;
                let fd = (e.eval(&[x + h]) - e.eval(&[x - h])) / (2.0 * h);
                let an = d.eval(&[x]);
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{src} at {x}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn independence() {
        let e = Expr::parse("x * 2 + y", &["x", "y", "z"]).unwrap();
        assert!(!e.is_independent_of("x"));
        assert!(e.is_independent_of("z"));
    }

    proptest! {
        #[test]
        fn display_reparses_to_same_values(a in -5.0f64..5.0, b in 0.1f64..3.0, x in 0.1f64..2.0) {
            let src = format!("{a} * x^{b} - sin(x) / ({b} + x)");
            let e = Expr::parse(&src, &["x"]).unwrap();
            let again = Expr::parse(&e.to_string(), &["x"]).unwrap();
            let (u, v) = (e.eval(&[x]), again.eval(&[x]));
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }

        #[test]
        fn parser_never_panics(s in "\\PC{0,40}") {
            let _ = Expr::parse(&s, &["x", "y"]);
        }
    }
}

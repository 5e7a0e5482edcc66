//! Infix arithmetic expressions: map bodies (`x/4`, `-x/(x+4)`), family
//! generators (`1/(2*k-1)`), and custom three-argument G-metrics
//! (`abs(x-y)`).
//!
//! Grammar (unary minus binds tightest, then `*` `/`, then `+` `-`, all
//! left-associative):
//!
//! ```text
//! expr   = term (("+" | "-") term)*
//! term   = factor (("*" | "/") factor)*
//! factor = "-" factor | atom
//! atom   = number | variable | "abs" "(" expr ")" | "(" expr ")"
//! ```

use crate::error::ParseError;

/// Variables the language knows about. Each parsing context passes the set
/// it allows: `x` for maps, `k` for family generators, `x y z` for metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
    K,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::K => "k",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        match name {
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "z" => Some(Var::Z),
            "k" => Some(Var::K),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

/// Why an evaluation failed. Callers wrap this into a [`crate::error::Fault`]
/// together with the offending input point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalFailure {
    DivisionByZero,
    NonFinite,
}

/// Values bound to the four variable slots during evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bindings {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub k: f64,
}

impl Bindings {
    pub fn for_x(x: f64) -> Self {
        Bindings {
            x,
            ..Default::default()
        }
    }

    pub fn for_k(k: f64) -> Self {
        Bindings {
            k,
            ..Default::default()
        }
    }

    pub fn for_xyz(x: f64, y: f64, z: f64) -> Self {
        Bindings { x, y, z, k: 0.0 }
    }

    fn get(&self, v: Var) -> f64 {
        match v {
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
            Var::K => self.k,
        }
    }
}

impl Expr {
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalFailure> {
        match self {
            Expr::Const(c) => {
                // overflowed literals like 1e999 parse to infinity
                if c.is_finite() {
                    Ok(*c)
                } else {
                    Err(EvalFailure::NonFinite)
                }
            }
            Expr::Var(v) => Ok(b.get(*v)),
            Expr::Neg(e) => Ok(-e.eval(b)?),
            Expr::Abs(e) => Ok(e.eval(b)?.abs()),
            Expr::Bin(op, l, r) => {
                let l = l.eval(b)?;
                let r = r.eval(b)?;
                let v = match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalFailure::DivisionByZero);
                        }
                        l / r
                    }
                };
                if !v.is_finite() {
                    return Err(EvalFailure::NonFinite);
                }
                Ok(v)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Abs(_) => 4,
            Expr::Neg(_) => 3,
            Expr::Bin(op, _, _) => op.precedence(),
        }
    }

    /// Canonical text form. Parenthesization preserves the tree: parsing the
    /// output yields a structurally equal expression.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        match self {
            Expr::Const(c) => {
                out.push_str(&format!("{c}"));
            }
            Expr::Var(v) => out.push_str(v.name()),
            Expr::Abs(e) => {
                out.push_str("abs(");
                e.write(out);
                out.push(')');
            }
            Expr::Neg(e) => {
                out.push('-');
                // nested negations need parens; "--x" is legal input but ugly output
                if e.precedence() < 3 || matches!(**e, Expr::Neg(_)) {
                    out.push('(');
                    e.write(out);
                    out.push(')');
                } else {
                    e.write(out);
                }
            }
            Expr::Bin(op, l, r) => {
                self.write_operand(l, l.precedence() < op.precedence(), out);
                out.push(op.symbol());
                // same-precedence right operands keep parens: the parser is
                // left-associative, so "a-(b-c)" must not flatten to "a-b-c"
                self.write_operand(r, r.precedence() <= op.precedence(), out);
            }
        }
    }

    fn write_operand(&self, child: &Expr, wrap: bool, out: &mut String) {
        if wrap {
            out.push('(');
            child.write(out);
            out.push(')');
        } else {
            child.write(out);
        }
    }

    /// Distinct variables referenced by the expression.
    pub fn vars(&self) -> Vec<Var> {
        let mut acc = Vec::new();
        self.collect_vars(&mut acc);
        acc
    }

    fn collect_vars(&self, acc: &mut Vec<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                if !acc.contains(v) {
                    acc.push(*v);
                }
            }
            Expr::Neg(e) | Expr::Abs(e) => e.collect_vars(acc),
            Expr::Bin(_, l, r) => {
                l.collect_vars(acc);
                r.collect_vars(acc);
            }
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
    LParen,
    RParen,
    Eof,
}

struct Token {
    tok: Tok,
    col: usize,
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    allowed: &'a [Var],
    line: usize,
}

/// Parse an expression restricted to the given variables. `line` and
/// `col_offset` position errors inside a larger document: columns reported
/// are `col_offset + 1`-based offsets into `src`.
pub fn parse_expr(
    src: &str,
    allowed: &[Var],
    line: usize,
    col_offset: usize,
) -> Result<Expr, ParseError> {
    let tokens = lex(src, line, col_offset)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        allowed,
        line,
    };
    let expr = p.parse_sum()?;
    let t = p.peek();
    if t.tok != Tok::Eof {
        return Err(ParseError::new(
            line,
            t.col,
            format!("unexpected {} after expression", describe(&t.tok)),
        ));
    }
    Ok(expr)
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(n) => format!("number {n}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn lex(src: &str, line: usize, col_offset: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col_offset + i + 1;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '+' => {
                out.push(Token {
                    tok: Tok::Plus,
                    col,
                });
                i += 1;
            }
            '-' => {
                out.push(Token {
                    tok: Tok::Minus,
                    col,
                });
                i += 1;
            }
            '*' => {
                out.push(Token {
                    tok: Tok::Star,
                    col,
                });
                i += 1;
            }
            '/' => {
                out.push(Token {
                    tok: Tok::Slash,
                    col,
                });
                i += 1;
            }
            '(' => {
                out.push(Token {
                    tok: Tok::LParen,
                    col,
                });
                i += 1;
            }
            ')' => {
                out.push(Token {
                    tok: Tok::RParen,
                    col,
                });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // optional exponent
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| {
                    ParseError::new(line, col, format!("malformed number '{text}'"))
                })?;
                out.push(Token {
                    tok: Tok::Num(value),
                    col,
                });
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Ident(text),
                    col,
                });
            }
            other => {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("unexpected character '{other}'"),
                ));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        col: col_offset + chars.len() + 1,
    });
    Ok(out)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn parse_sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.parse_factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, col) = {
            let t = self.peek();
            (t.tok.clone(), t.col)
        };
        match tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "abs" {
                    self.expect(Tok::LParen, "'(' after abs")?;
                    let inner = self.parse_sum()?;
                    self.expect(Tok::RParen, "')' closing abs")?;
                    return Ok(Expr::Abs(Box::new(inner)));
                }
                match Var::from_name(&name) {
                    Some(v) if self.allowed.contains(&v) => Ok(Expr::Var(v)),
                    Some(v) => Err(ParseError::new(
                        self.line,
                        col,
                        format!(
                            "variable '{}' is not allowed here (allowed: {})",
                            v.name(),
                            self.allowed_names()
                        ),
                    )),
                    None => Err(ParseError::new(
                        self.line,
                        col,
                        format!("unknown identifier '{name}'"),
                    )),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_sum()?;
                self.expect(Tok::RParen, "closing ')'")?;
                Ok(inner)
            }
            other => Err(ParseError::new(
                self.line,
                col,
                format!("expected a value, found {}", describe(&other)),
            )),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (tok, col) = {
            let t = self.peek();
            (t.tok.clone(), t.col)
        };
        if tok == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::new(
                self.line,
                col,
                format!("expected {what}, found {}", describe(&tok)),
            ))
        }
    }

    fn allowed_names(&self) -> String {
        self.allowed
            .iter()
            .map(|v| v.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_x(src: &str) -> Expr {
        parse_expr(src, &[Var::X], 1, 0).expect("parse")
    }

    #[test]
    fn evaluates_rational_map_formula() {
        // -x/(x+4) at x = 1 is -0.2
        let e = parse_x("-x/(x+4)");
        let v = e.eval(&Bindings::for_x(1.0)).unwrap();
        assert!((v - (-0.2)).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn evaluates_zero_case() {
        let e = parse_x("x/4");
        assert_eq!(e.eval(&Bindings::for_x(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn division_by_zero_is_a_fault() {
        let e = parse_x("1/(x-1)");
        assert_eq!(
            e.eval(&Bindings::for_x(1.0)),
            Err(EvalFailure::DivisionByZero)
        );
    }

    #[test]
    fn unary_minus_binds_tighter_than_division() {
        // -x/(x+4) must parse as (-x)/(x+4), not -(x/(x+4)); both evaluate
        // the same, so check the structure directly.
        let e = parse_x("-x/(x+4)");
        match e {
            Expr::Bin(BinOp::Div, l, _) => assert!(matches!(*l, Expr::Neg(_))),
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn double_slash_reports_position_of_second_slash() {
        let err = parse_expr("x//4", &[Var::X], 3, 7).unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.column, 10);
    }

    #[test]
    fn disallowed_variable_is_rejected_with_position() {
        let err = parse_expr("x+k", &[Var::X], 1, 0).unwrap_err();
        assert_eq!(err.column, 3);
        assert!(err.message.contains("'k'"), "{}", err.message);
    }

    #[test]
    fn abs_parses_and_evaluates() {
        let e = parse_expr("abs(x-y)", &[Var::X, Var::Y], 1, 0).unwrap();
        let v = e.eval(&Bindings::for_xyz(0.2, 0.9, 0.0)).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
    }

    #[test]
    fn canonical_form_round_trips_structurally() {
        for src in [
            "-x/(x+4)",
            "x/4",
            "1/(2*k-1)",
            "abs(x-y)+abs(y-z)",
            "a",
            "x-(1-x)",
            "x*(x*x)",
            "-(x+1)",
            "--x",
            "0.125",
        ] {
            let allowed = [Var::X, Var::Y, Var::Z, Var::K];
            let Ok(e) = parse_expr(src, &allowed, 1, 0) else {
                continue; // "a" is a deliberate non-expression
            };
            let printed = e.to_canonical();
            let reparsed = parse_expr(&printed, &allowed, 1, 0)
                .unwrap_or_else(|err| panic!("reparse of '{printed}' failed: {err}"));
            assert_eq!(reparsed, e, "round trip changed '{src}' -> '{printed}'");
        }
    }

    #[test]
    fn overflow_is_a_non_finite_fault() {
        let e = parse_x("x*x");
        assert_eq!(
            e.eval(&Bindings::for_x(1e200)),
            Err(EvalFailure::NonFinite)
        );
    }
}

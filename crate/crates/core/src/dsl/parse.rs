use super::{BinOp, DslError, Expr, Func, StateIndex, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let start = (line, column);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
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
            let text: String = chars[begin..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| DslError::Syntax {
                line: start.0,
                column: start.1,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            column += i - begin;
            out.push(Token {
                tok: Tok::Num(value),
                line: start.0,
                column: start.1,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - begin;
            out.push(Token {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start.0,
                column: start.1,
            });
            continue;
        }
        if "+-*/^()[],".contains(c) {
            out.push(Token {
                tok: Tok::Op(c),
                line,
                column,
            });
            i += 1;
            column += 1;
            continue;
        }
        return Err(DslError::Syntax {
            line,
            column,
            expected: vec!["expression".into()],
            found: format!("`{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const OPERAND: [&str; 4] = ["number", "identifier", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &[&str]) -> DslError {
        let t = &self.tokens[self.pos];
        DslError::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DslError> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(&[&format!("`{c}`")]))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(name)
            }
            _ => Err(self.error_here(&OPERAND)),
        }
    }

    fn identifier(&mut self, name: String) -> Result<Expr, DslError> {
        match self.peek() {
            Tok::Op('(') => {
                self.bump();
                if name == "maxabs" {
                    let seq = match self.bump().tok {
                        Tok::Ident(s) if !is_reserved(&s) => s,
                        _ => {
                            self.pos -= 1;
                            return Err(self.error_here(&["parameter name"]));
                        }
                    };
                    self.expect(',')?;
                    let count = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::MaxAbs(seq, Box::new(count)));
                }
                let func = Func::from_name(&name).ok_or_else(|| DslError::name(name.clone()))?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Op(',') {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                let ok = if func.is_variadic() {
                    args.len() >= 2
                } else {
                    args.len() == 1
                };
                if !ok {
                    return Err(DslError::domain(format!(
                        "{} called with {} argument(s)",
                        func.name(),
                        args.len()
                    )));
                }
                Ok(Expr::Call(func, args))
            }
            Tok::Op('[') => {
                let open = self.pos;
                self.bump();
                let index = self.expr()?;
                self.expect(']')?;
                match name.as_str() {
                    "x" => state_index(&index).map(Expr::State).ok_or_else(|| {
                        let t = &self.tokens[open + 1];
                        DslError::Syntax {
                            line: t.line,
                            column: t.column,
                            expected: vec!["`n`, `n+k`, `n-k` or an integer".into()],
                            found: format!("`{index}`"),
                        }
                    }),
                    s if is_reserved(s) => Err(DslError::Syntax {
                        line: self.tokens[open].line,
                        column: self.tokens[open].column,
                        expected: vec!["operator".into()],
                        found: "`[`".into(),
                    }),
                    _ => Ok(Expr::Element(name, Box::new(index))),
                }
            }
            _ => match name.as_str() {
                "t" => Ok(Expr::Var(Var::T)),
                "n" => Ok(Expr::Var(Var::N)),
                "p" => Ok(Expr::Var(Var::P)),
                "x" => Err(self.error_here(&["`[`"])),
                s if Func::from_name(s).is_some() || s == "maxabs" => Err(self.error_here(&["`(`"])),
                _ => Ok(Expr::Param(name)),
            },
        }
    }
}

fn is_reserved(name: &str) -> bool {
    matches!(name, "t" | "n" | "p" | "x" | "maxabs") || Func::from_name(name).is_some()
}

fn integer(e: &Expr) -> Option<i64> {
    match e {
        Expr::Num(v) if v.fract() == 0.0 && v.abs() < 1e15 => Some(*v as i64),
        _ => None,
    }
}

fn state_index(e: &Expr) -> Option<StateIndex> {
    let n = Expr::Var(Var::N);
    match e {
        Expr::Var(Var::N) => Some(StateIndex::Relative(0)),
        Expr::Binary(BinOp::Add, l, r) if **l == n => integer(r).map(StateIndex::Relative),
        Expr::Binary(BinOp::Add, l, r) if **r == n => integer(l).map(StateIndex::Relative),
        Expr::Binary(BinOp::Sub, l, r) if **l == n => integer(r).map(|k| StateIndex::Relative(-k)),
        _ => integer(e).map(StateIndex::Absolute),
    }
}

/// Parses one expression.
pub fn parse(source: &str) -> Result<Expr, DslError> {
    let mut p = Parser {
        tokens: lex(source)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error_here(&["operator", "end of input"]));
    }
    Ok(e)
}

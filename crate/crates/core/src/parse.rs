//! Text grammar for polynomials.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' integer)?
//! atom   := integer ('/' integer)? | ident | '(' expr ')'
//! ```
//! Juxtaposition (`2x`, `x y`) is rejected.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{EdrcError, Result};
use crate::poly::{MultiPoly, Scalar, Vars};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(text: &str) -> Result<Lexer> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            toks.push((Tok::Int(s.parse().unwrap()), l0, c0));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            toks.push((Tok::Ident(s), l0, c0));
        } else if "+-*^/()".contains(c) {
            toks.push((Tok::Sym(c), l0, c0));
            i += 1;
            col += 1;
        } else {
            return Err(EdrcError::Parse {
                line,
                column: col,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    toks.push((Tok::End, line, col));
    Ok(Lexer { toks })
}

struct Parser<'a> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    vars: &'a Vars,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (_, line, column) = &self.toks[self.pos];
        Err(EdrcError::Parse {
            line: *line,
            column: *column,
            message: msg.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<MultiPoly> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Sym('-') => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<MultiPoly> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::Sym('*') {
            self.bump();
            acc = &acc * &self.unary()?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<MultiPoly> {
        match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                Ok(-&self.unary()?)
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<MultiPoly> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            match self.bump() {
                Tok::Int(e) => {
                    let e: u32 = match e.try_into() {
                        Ok(e) => e,
                        Err(_) => {
                            self.pos -= 1;
                            return self.err("exponent too large");
                        }
                    };
                    return Ok(base.pow(e));
                }
                _ => {
                    self.pos -= 1;
                    return self.err("expected a non-negative integer exponent");
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<MultiPoly> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let mut c = Scalar::from_integer(n);
                if *self.peek() == Tok::Sym('/') {
                    self.bump();
                    match self.peek().clone() {
                        Tok::Int(d) if !d.is_zero() => {
                            self.bump();
                            c /= Scalar::from_integer(d);
                        }
                        Tok::Int(_) => return self.err("division by zero"),
                        _ => return self.err("only integer literals may follow '/'"),
                    }
                }
                Ok(MultiPoly::constant(self.vars, c))
            }
            Tok::Ident(name) => match self.vars.iter().position(|v| *v == name) {
                Some(i) => {
                    self.bump();
                    Ok(MultiPoly::var(self.vars, i))
                }
                None => self.err(format!("unknown variable '{name}'")),
            },
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::Sym(')') {
                    return self.err("expected ')'");
                }
                self.bump();
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Sym(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

/// Parse `text` as a polynomial over the given variables.
pub fn parse_poly(text: &str, vars: &Vars) -> Result<MultiPoly> {
    let lx = lex(text)?;
    let mut p = Parser {
        toks: lx.toks,
        pos: 0,
        vars,
    };
    let out = p.expr()?;
    match p.peek() {
        Tok::End => Ok(out),
        Tok::Ident(_) | Tok::Int(_) | Tok::Sym('(') => {
            p.err("implicit multiplication is not allowed; use '*'")
        }
        _ => p.err("unexpected trailing input"),
    }
}

/// Identifiers in order of first appearance.
pub fn identifiers(text: &str) -> Result<Vec<String>> {
    let lx = lex(text)?;
    let mut out: Vec<String> = Vec::new();
    for (t, _, _) in lx.toks {
        if let Tok::Ident(s) = t {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::vars;

    #[test]
    fn parses_rationals_and_powers() {
        let v = vars(&["x", "y"]);
        let p = parse_poly("3/4*x^2*y - (x - 1)^2", &v).unwrap();
        assert_eq!(p.to_string(), "3/4*x^2*y - x^2 + 2*x - 1");
    }

    #[test]
    fn rejects_implicit_multiplication() {
        let v = vars(&["x", "y"]);
        match parse_poly("2x", &v) {
            Err(EdrcError::Parse { line, column, .. }) => assert_eq!((line, column), (1, 2)),
            other => panic!("{other:?}"),
        }
        assert!(parse_poly("x y", &v).is_err());
        assert!(parse_poly("(x)(y)", &v).is_err());
    }

    #[test]
    fn reports_line_and_column() {
        let v = vars(&["x"]);
        match parse_poly("x +\n  z", &v) {
            Err(EdrcError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(parse_poly("x^", &v).is_err());
        assert!(parse_poly("1/0", &v).is_err());
        assert!(parse_poly("x/2", &v).is_err());
        assert!(parse_poly("x $", &v).is_err());
    }

    #[test]
    fn identifiers_in_order() {
        assert_eq!(identifiers("y*x_1 + y - z2").unwrap(), vec!["y", "x_1", "z2"]);
    }
}

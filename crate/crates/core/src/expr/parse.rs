//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr     := term (("+" | "-") term)*
//! term     := factor (("*" | "/") factor)*
//! factor   := "-" factor | base ("^" exponent)?
//! exponent := "-"? base
//! base     := number | ident | "(" expr ")" | func "(" expr ")"
//! func     := "ln" | "sqrt" | "sin" | "cos" | "exp"
//! ident    := [a-zA-Z][a-zA-Z0-9_]*
//! ```
//!
//! Identifiers of the form `q<k>` / `p<k>` are phase-space variables; every
//! other identifier is a parameter. A unary minus applied directly to a
//! numeric literal folds into a negative constant.

use super::{Expr, Func, Var, VarKind};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown function `{name}` at column {column}")]
    UnknownFunction { column: usize, name: String },
    #[error("variable `{name}` at column {column} is out of range for dimension {dimension}")]
    IndexOutOfRange {
        column: usize,
        name: String,
        dimension: usize,
    },
}

impl ParseError {
    /// 1-based column of the offending token.
    pub fn column(&self) -> usize {
        match self {
            ParseError::Syntax { column, .. }
            | ParseError::UnknownFunction { column, .. }
            | ParseError::IndexOutOfRange { column, .. } => *column,
        }
    }
}

/// Parse `text` as an expression over a phase space with `dimension` degrees
/// of freedom.
pub fn parse(text: &str, dimension: usize) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        dimension,
        end_column: text.chars().count() + 1,
    };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            column: tok.column,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(x) => format!("number {x}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::Caret => "`^`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(TokenKind::Plus),
            '-' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '/' => Some(TokenKind::Slash),
            '^' => Some(TokenKind::Caret),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            _ => None,
        };
        if let Some(kind) = single {
            tokens.push(Token { kind, column });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // optional exponent: e[+-]digits
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value = literal.parse::<f64>().map_err(|_| ParseError::Syntax {
                column,
                message: format!("malformed number `{literal}`"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                column,
            });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        return Err(ParseError::Syntax {
            column,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
    end_column: usize,
}

/// A parsed factor plus whether it was a bare numeric literal (eligible for
/// folding with a preceding unary minus).
struct Parsed {
    expr: Expr,
    bare_literal: bool,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn column(&self) -> usize {
        self.peek().map(|t| t.column).unwrap_or(self.end_column)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        let column = self.column();
        match self.next() {
            Some(tok) if tok.kind == kind => Ok(()),
            Some(tok) => Err(ParseError::Syntax {
                column,
                message: format!("expected {}, found {}", kind.describe(), tok.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                column,
                message: format!("expected {}, found end of input", kind.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek_kind() {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?.expr;
        loop {
            match self.peek_kind() {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    lhs = lhs * self.factor()?.expr;
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    lhs = lhs / self.factor()?.expr;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Parsed, ParseError> {
        if self.peek_kind() == Some(&TokenKind::Minus) {
            self.pos += 1;
            let inner = self.factor()?;
            let expr = match inner {
                Parsed {
                    expr: Expr::Const(c),
                    bare_literal: true,
                } => Expr::Const(-c),
                Parsed { expr, .. } => -expr,
            };
            return Ok(Parsed {
                expr,
                bare_literal: false,
            });
        }
        let base = self.base()?;
        if self.peek_kind() == Some(&TokenKind::Caret) {
            self.pos += 1;
            let exponent = self.exponent()?;
            return Ok(Parsed {
                expr: base.expr.pow(exponent),
                bare_literal: false,
            });
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.peek_kind() == Some(&TokenKind::Minus) {
            self.pos += 1;
            let inner = self.base()?;
            return Ok(match inner {
                Parsed {
                    expr: Expr::Const(c),
                    bare_literal: true,
                } => Expr::Const(-c),
                Parsed { expr, .. } => -expr,
            });
        }
        Ok(self.base()?.expr)
    }

    fn base(&mut self) -> Result<Parsed, ParseError> {
        let column = self.column();
        let tok = self.next().ok_or(ParseError::Syntax {
            column,
            message: "unexpected end of input".into(),
        })?;
        match tok.kind {
            TokenKind::Number(x) => Ok(Parsed {
                expr: Expr::Const(x),
                bare_literal: true,
            }),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(Parsed {
                    expr: inner,
                    bare_literal: false,
                })
            }
            TokenKind::Ident(name) => {
                if self.peek_kind() == Some(&TokenKind::LParen) {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        column,
                        name: name.clone(),
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    return Ok(Parsed {
                        expr: Expr::func(func, arg),
                        bare_literal: false,
                    });
                }
                if Func::from_name(&name).is_some() {
                    return Err(ParseError::Syntax {
                        column,
                        message: format!("function `{name}` must be applied to a parenthesised argument"),
                    });
                }
                let expr = self.identifier(&name, column)?;
                Ok(Parsed {
                    expr,
                    bare_literal: false,
                })
            }
            other => Err(ParseError::Syntax {
                column,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn identifier(&self, name: &str, column: usize) -> Result<Expr, ParseError> {
        if let Some(var) = reserved_variable(name) {
            if var.index == 0 || var.index > self.dimension {
                return Err(ParseError::IndexOutOfRange {
                    column,
                    name: name.to_string(),
                    dimension: self.dimension,
                });
            }
            return Ok(Expr::Var(var));
        }
        Ok(Expr::Param(name.to_string()))
    }
}

/// Recognise `q<digits>` / `p<digits>`. Index 0 is returned as-is so the
/// caller can report it as out of range.
fn reserved_variable(name: &str) -> Option<Var> {
    let mut chars = name.chars();
    let kind = match chars.next()? {
        'q' => VarKind::Q,
        'p' => VarKind::P,
        _ => return None,
    };
    let digits = chars.as_str();
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let index = digits.parse::<usize>().ok()?;
    Some(Var { kind, index })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_products() {
        let e = parse("q1*p1 + q2*p2", 2).unwrap();
        assert_eq!(e, Expr::q(1) * Expr::p(1) + Expr::q(2) * Expr::p(2));
    }

    #[test]
    fn potential_with_parameter() {
        let e = parse("p1^2/2 + p2^2/2 + g/((q1-q2)^2)", 2).unwrap();
        assert!(e.parameters().contains("g"));
        assert_eq!(e.max_index(), 2);
    }

    #[test]
    fn index_out_of_range() {
        let err = parse("ln(q3)", 2).unwrap_err();
        assert!(matches!(err, ParseError::IndexOutOfRange { column: 4, .. }), "{err:?}");
        assert!(matches!(parse("q0", 2), Err(ParseError::IndexOutOfRange { .. })));
    }

    #[test]
    fn unknown_function_and_syntax_errors() {
        assert!(matches!(parse("foo(q1)", 1), Err(ParseError::UnknownFunction { .. })));
        let err = parse("q1 + * p1", 1).unwrap_err();
        assert_eq!(err.column(), 6);
        assert!(matches!(parse("(q1", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("q1 p1", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("ln q1", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("q1 # 2", 1), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unary_minus_and_powers() {
        assert_eq!(parse("-2", 1).unwrap(), Expr::Const(-2.0));
        // -2^2 is -(2^2)
        assert_eq!(
            parse("-2^2", 1).unwrap(),
            -(Expr::Const(2.0).pow(Expr::Const(2.0)))
        );
        assert_eq!(parse("-(2)", 1).unwrap(), -Expr::Const(2.0));
        assert_eq!(parse("q1^-2", 1).unwrap(), Expr::q(1).pow(Expr::Const(-2.0)));
        assert_eq!(parse("q1*-p1", 1).unwrap(), Expr::q(1) * -Expr::p(1));
        assert_eq!(parse("1.5e-3", 1).unwrap(), Expr::Const(1.5e-3));
    }

    #[test]
    fn left_associativity() {
        assert_eq!(
            parse("q1 - p1 - q1", 1).unwrap(),
            (Expr::q(1) - Expr::p(1)) - Expr::q(1)
        );
        assert_eq!(
            parse("q1 / p1 / q1", 1).unwrap(),
            (Expr::q(1) / Expr::p(1)) / Expr::q(1)
        );
    }

    #[test]
    fn identifiers_that_look_like_variables() {
        assert_eq!(parse("q", 1).unwrap(), Expr::param("q"));
        assert_eq!(parse("q1a", 1).unwrap(), Expr::param("q1a"));
        assert_eq!(parse("h_1", 1).unwrap(), Expr::param("h_1"));
    }
}

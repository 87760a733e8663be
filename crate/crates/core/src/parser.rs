//! Recursive-descent parser for the textual outcome-expression grammar.
//!
//! ```text
//! expr   := choice
//! choice := ftf ( "<" num "|" num ">" ftf | "<[" num "]>" ftf )?
//! ftf    := atf ( "\/" atf )*
//! atf    := seq ( "/\" seq )*
//! seq    := atom ( "->-" atom )*
//! atom   := "top" | "bot" | identifier | "(" expr ")"
//! ```
//!
//! Precedence, tightest first: `->-`, `/\`, `\/`, choice. The first three
//! chain left-associatively. Choice is non-associative: chained choices
//! must be parenthesised, because re-association changes the weights.
//! `top` and `bot` are reserved words. Whitespace is insignificant.

use crate::expr::OutcomeExpr;
use thiserror::Error;

/// Parse failure, with a 1-based source location.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Top,
    Bot,
    LParen,
    RParen,
    SeqOp,       // ->-
    AtfOp,       // /\
    FtfOp,       // \/
    ChoiceOpen,  // <
    ChoiceClose, // >
    Pipe,        // |
    SugarOpen,   // <[
    SugarClose,  // ]>
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::Number(x) => format!("number `{x}`"),
            Tok::Top => "`top`".into(),
            Tok::Bot => "`bot`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::SeqOp => "`->-`".into(),
            Tok::AtfOp => "`/\\`".into(),
            Tok::FtfOp => "`\\/`".into(),
            Tok::ChoiceOpen => "`<`".into(),
            Tok::ChoiceClose => "`>`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::SugarOpen => "`<[`".into(),
            Tok::SugarClose => "`]>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn err(line: u32, col: u32, message: impl Into<String>) -> ParseError {
    ParseError { line, col, message: message.into() }
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    while i < chars.len() {
        let (l, c) = (line, col);
        let ch = chars[i];
        let mut advance = |i: &mut usize, n: usize| {
            for k in 0..n {
                if chars[*i + k] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            *i += n;
        };
        if ch.is_whitespace() {
            advance(&mut i, 1);
            continue;
        }
        let rest = &chars[i..];
        let starts_with =
            |pat: &str| rest.len() >= pat.len() && rest.iter().zip(pat.chars()).all(|(a, b)| *a == b);
        if starts_with("->-") {
            tokens.push(Token { tok: Tok::SeqOp, line: l, col: c });
            advance(&mut i, 3);
        } else if starts_with("/\\") {
            tokens.push(Token { tok: Tok::AtfOp, line: l, col: c });
            advance(&mut i, 2);
        } else if starts_with("\\/") {
            tokens.push(Token { tok: Tok::FtfOp, line: l, col: c });
            advance(&mut i, 2);
        } else if starts_with("<[") {
            tokens.push(Token { tok: Tok::SugarOpen, line: l, col: c });
            advance(&mut i, 2);
        } else if starts_with("]>") {
            tokens.push(Token { tok: Tok::SugarClose, line: l, col: c });
            advance(&mut i, 2);
        } else if ch == '(' {
            tokens.push(Token { tok: Tok::LParen, line: l, col: c });
            advance(&mut i, 1);
        } else if ch == ')' {
            tokens.push(Token { tok: Tok::RParen, line: l, col: c });
            advance(&mut i, 1);
        } else if ch == '<' {
            tokens.push(Token { tok: Tok::ChoiceOpen, line: l, col: c });
            advance(&mut i, 1);
        } else if ch == '>' {
            tokens.push(Token { tok: Tok::ChoiceClose, line: l, col: c });
            advance(&mut i, 1);
        } else if ch == '|' {
            tokens.push(Token { tok: Tok::Pipe, line: l, col: c });
            advance(&mut i, 1);
        } else if ch.is_ascii_digit() {
            // Number: digits, optional fraction, optional exponent.
            let mut len = 0;
            while i + len < chars.len() && chars[i + len].is_ascii_digit() {
                len += 1;
            }
            if i + len < chars.len() && chars[i + len] == '.' {
                len += 1;
                while i + len < chars.len() && chars[i + len].is_ascii_digit() {
                    len += 1;
                }
            }
            if i + len < chars.len() && (chars[i + len] == 'e' || chars[i + len] == 'E') {
                let mut elen = 1;
                if i + len + elen < chars.len() && (chars[i + len + elen] == '+' || chars[i + len + elen] == '-') {
                    elen += 1;
                }
                let digits_start = len + elen;
                while i + len + elen < chars.len() && chars[i + len + elen].is_ascii_digit() {
                    elen += 1;
                }
                if len + elen > digits_start {
                    len += elen;
                }
            }
            let s: String = chars[i..i + len].iter().collect();
            let value: f64 = s
                .parse()
                .map_err(|_| err(l, c, format!("malformed number `{s}`")))?;
            tokens.push(Token { tok: Tok::Number(value), line: l, col: c });
            advance(&mut i, len);
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let mut len = 0;
            while i + len < chars.len()
                && (chars[i + len].is_ascii_alphanumeric() || chars[i + len] == '_')
            {
                len += 1;
            }
            let name: String = chars[i..i + len].iter().collect();
            let tok = match name.as_str() {
                "top" => Tok::Top,
                "bot" => Tok::Bot,
                _ => Tok::Ident(name),
            };
            tokens.push(Token { tok, line: l, col: c });
            advance(&mut i, len);
        } else {
            return Err(err(l, c, format!("unknown token starting with {ch:?}")));
        }
    }
    tokens.push(Token { tok: Tok::Eof, line, col });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
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

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let t = self.peek();
        if t.tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(err(
                t.line,
                t.col,
                format!("expected {}, found {}", tok.describe(), t.tok.describe()),
            ))
        }
    }

    fn number(&mut self, what: &str) -> Result<(f64, u32, u32), ParseError> {
        let t = self.peek();
        let (line, col) = (t.line, t.col);
        match t.tok {
            Tok::Number(x) => {
                self.bump();
                Ok((x, line, col))
            }
            ref other => Err(err(
                line,
                col,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn expr(&mut self) -> Result<OutcomeExpr, ParseError> {
        self.choice()
    }

    fn choice(&mut self) -> Result<OutcomeExpr, ParseError> {
        let left = self.ftf()?;
        match self.peek().tok {
            Tok::ChoiceOpen => {
                self.bump();
                let (w_left, line, col) = self.number("left weight")?;
                if w_left < 0.0 || !w_left.is_finite() {
                    return Err(err(line, col, format!("weight out of range: {w_left} (must be >= 0)")));
                }
                self.expect(Tok::Pipe)?;
                let (w_right, line2, col2) = self.number("right weight")?;
                if w_right < 0.0 || !w_right.is_finite() {
                    return Err(err(line2, col2, format!("weight out of range: {w_right} (must be >= 0)")));
                }
                if w_left + w_right <= 0.0 {
                    return Err(err(line, col, "weight out of range: weights must not both be zero".to_string()));
                }
                self.expect(Tok::ChoiceClose)?;
                let right = self.ftf()?;
                Ok(OutcomeExpr::prob_choice(left, right, w_left, w_right))
            }
            Tok::SugarOpen => {
                self.bump();
                let (p, line, col) = self.number("choice probability")?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(err(line, col, format!("weight out of range: {p} (must be in [0,1])")));
                }
                self.expect(Tok::SugarClose)?;
                let right = self.ftf()?;
                Ok(OutcomeExpr::prob_choice_p(left, right, p))
            }
            _ => Ok(left),
        }
    }

    fn ftf(&mut self) -> Result<OutcomeExpr, ParseError> {
        let mut node = self.atf()?;
        while self.peek().tok == Tok::FtfOp {
            self.bump();
            let rhs = self.atf()?;
            node = OutcomeExpr::any_to_finish(node, rhs);
        }
        Ok(node)
    }

    fn atf(&mut self) -> Result<OutcomeExpr, ParseError> {
        let mut node = self.seq()?;
        while self.peek().tok == Tok::AtfOp {
            self.bump();
            let rhs = self.seq()?;
            node = OutcomeExpr::all_to_finish(node, rhs);
        }
        Ok(node)
    }

    fn seq(&mut self) -> Result<OutcomeExpr, ParseError> {
        let mut node = self.atom()?;
        while self.peek().tok == Tok::SeqOp {
            self.bump();
            let rhs = self.atom()?;
            node = OutcomeExpr::seq(node, rhs);
        }
        Ok(node)
    }

    fn atom(&mut self) -> Result<OutcomeExpr, ParseError> {
        let t = self.peek();
        let (line, col) = (t.line, t.col);
        match t.tok.clone() {
            Tok::Top => {
                self.bump();
                Ok(OutcomeExpr::Top)
            }
            Tok::Bot => {
                self.bump();
                Ok(OutcomeExpr::Bottom)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(OutcomeExpr::Base(name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => Err(err(
                line,
                col,
                format!("expected an outcome (`top`, `bot`, identifier, or `(`), found {}", other.describe()),
            )),
        }
    }
}

/// Parse a complete outcome expression.
pub fn parse(text: &str) -> Result<OutcomeExpr, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    let t = parser.peek();
    if t.tok != Tok::Eof {
        return Err(err(
            t.line,
            t.col,
            format!("unexpected {} after complete expression (chained choices must be parenthesised)", t.tok.describe()),
        ));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::OutcomeExpr as E;

    #[test]
    fn parses_constants_and_bases() {
        assert_eq!(parse("top").unwrap(), E::Top);
        assert_eq!(parse("bot").unwrap(), E::Bottom);
        assert_eq!(parse(" net ").unwrap(), E::base("net"));
    }

    #[test]
    fn parses_spec_shorthand_example() {
        let got = parse("a ->- (b <[0.95]> bot)").unwrap();
        let want = E::seq(E::base("a"), E::prob_choice_p(E::base("b"), E::Bottom, 0.95));
        assert_eq!(got, want);
        // The sugar desugars to weights (p, 1-p).
        if let E::Seq(_, rhs) = &got {
            if let E::ProbChoice { w_left, w_right, .. } = rhs.as_ref() {
                assert_eq!(*w_left, 0.95);
                assert_eq!(*w_right, 1.0 - 0.95);
                assert!((w_right - 0.05).abs() < 1e-15);
            } else {
                panic!("expected choice");
            }
        } else {
            panic!("expected seq");
        }
    }

    #[test]
    fn parses_cache_expression() {
        let text = "c_hit <[0.95]> (c_miss ->- ((net ->- (main <[0.9999999999999999]> bot) ->- net) \\/ t_out))";
        let got = parse(text).unwrap();
        let mem = E::seq(
            E::seq(
                E::base("net"),
                E::prob_choice_p(E::base("main"), E::Bottom, 0.9999999999999999),
            ),
            E::base("net"),
        );
        let want = E::prob_choice_p(
            E::base("c_hit"),
            E::seq(E::base("c_miss"), E::any_to_finish(mem, E::base("t_out"))),
            0.95,
        );
        assert_eq!(got, want);
    }

    #[test]
    fn precedence_seq_tighter_than_atf_tighter_than_ftf() {
        let got = parse("a ->- b /\\ c \\/ d").unwrap();
        let want = E::any_to_finish(
            E::all_to_finish(E::seq(E::base("a"), E::base("b")), E::base("c")),
            E::base("d"),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn operators_chain_left_associatively() {
        assert_eq!(parse("a ->- b ->- c").unwrap().to_string(), "((a ->- b) ->- c)");
        assert_eq!(parse("a \\/ b \\/ c").unwrap().to_string(), "((a \\/ b) \\/ c)");
        assert_eq!(parse("a /\\ b /\\ c").unwrap().to_string(), "((a /\\ b) /\\ c)");
    }

    #[test]
    fn chained_choice_needs_parentheses() {
        let e = parse("a <[0.5]> b <[0.5]> c").unwrap_err();
        assert!(e.message.contains("parenthesised"), "{e}");
        assert!(parse("a <[0.5]> (b <[0.5]> c)").is_ok());
        assert!(parse("(a <[0.5]> b) <[0.5]> c").is_ok());
    }

    #[test]
    fn weight_range_errors() {
        let e = parse("a <[1.5]> b").unwrap_err();
        assert!(e.message.contains("out of range"), "{e}");
        let e = parse("a <0|0> b").unwrap_err();
        assert!(e.message.contains("both be zero"), "{e}");
        // A negative weight never lexes: `-` is not a token on its own.
        let e = parse("a <-1|2> b").unwrap_err();
        assert!(e.message.contains("unknown token"), "{e}");
    }

    #[test]
    fn error_locations_are_line_and_column() {
        let e = parse("a ->-\n  (b <[2]> c)").unwrap_err();
        assert_eq!((e.line, e.col), (2, 8));
        let e = parse("a @ b").unwrap_err();
        assert_eq!((e.line, e.col), (1, 3));
        assert!(e.message.contains("unknown token"));
    }

    #[test]
    fn reserved_words_are_not_identifiers() {
        // `top` as a leaf parses to the constant, never to Base("top").
        assert_eq!(parse("top ->- bot").unwrap(), E::seq(E::Top, E::Bottom));
        // but `topx` is an ordinary identifier
        assert_eq!(parse("topx").unwrap(), E::base("topx"));
    }

    #[test]
    fn scientific_notation_weights() {
        let got = parse("a <0.9999999999999999|1e-16> bot").unwrap();
        if let E::ProbChoice { w_right, .. } = got {
            assert_eq!(w_right, 1e-16);
        } else {
            panic!("expected choice");
        }
    }
}

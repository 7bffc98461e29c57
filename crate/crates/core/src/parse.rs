//! Recursive-descent parser for the property language.
//!
//! ```text
//! phi ::= "(" phi ")" | "!" phi | phi "&" phi | phi "|" phi | phi "=>" phi
//!       | "K_" IDENT phi | "P_" IDENT phi
//!       | "theta(" IDENT "," IDENT ")" | "delta(" IDENT "," IDENT ")"
//!       | "thetaOther(" IDENT "," IDENT ")"
//!       | "Pr_" IDENT "(" phi [ "|" phi ] ")" CMP BOUND
//!       | "true" | "false"
//!       | IDENT
//! CMP ::= "<" | "<=" | "=" | ">=" | ">"
//! BOUND ::= RATIONAL | "Pr_" IDENT "(" phi [ "|" phi ] ")"
//! RATIONAL ::= INT "/" INT | INT | DECIMAL      (decimals parsed exactly)
//! ```
//!
//! Precedence: `!` and the modal prefixes bind tightest, then `&`, then `|`,
//! then `=>` (right-associative). Inside `Pr_j( ... )` a top-level `|`
//! separates the target from the condition; parenthesize the target to use
//! disjunction there.

use std::fmt;

use num::rational::BigRational;
use thiserror::Error;

use crate::logic::{bound_in_range, Cmp, Formula, ProbBound};
use crate::ratio::parse_rational;
use crate::system::AgentId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        ParseError {
            position,
            message: message.into(),
        }
    }
}

type ProbTerm = (AgentId, Box<Formula>, Option<Box<Formula>>);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    LParen,
    RParen,
    Comma,
    Bang,
    Amp,
    Bar,
    Slash,
    Arrow,
    Cmp(Cmp),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => write!(f, "{w:?}"),
            Token::LParen => f.write_str("'('"),
            Token::RParen => f.write_str("')'"),
            Token::Comma => f.write_str("','"),
            Token::Bang => f.write_str("'!'"),
            Token::Amp => f.write_str("'&'"),
            Token::Bar => f.write_str("'|'"),
            Token::Slash => f.write_str("'/'"),
            Token::Arrow => f.write_str("'=>'"),
            Token::Cmp(c) => write!(f, "'{}'", c.symbol()),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                tokens.push((start, Token::LParen));
                i += 1;
            }
            b')' => {
                tokens.push((start, Token::RParen));
                i += 1;
            }
            b',' => {
                tokens.push((start, Token::Comma));
                i += 1;
            }
            b'!' => {
                tokens.push((start, Token::Bang));
                i += 1;
            }
            b'&' => {
                tokens.push((start, Token::Amp));
                i += 1;
            }
            b'|' => {
                tokens.push((start, Token::Bar));
                i += 1;
            }
            b'/' => {
                tokens.push((start, Token::Slash));
                i += 1;
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    tokens.push((start, Token::Arrow));
                    i += 2;
                } else {
                    tokens.push((start, Token::Cmp(Cmp::Eq)));
                    i += 1;
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push((start, Token::Cmp(Cmp::Le)));
                    i += 2;
                } else {
                    tokens.push((start, Token::Cmp(Cmp::Lt)));
                    i += 1;
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push((start, Token::Cmp(Cmp::Ge)));
                    i += 2;
                } else {
                    tokens.push((start, Token::Cmp(Cmp::Gt)));
                    i += 1;
                }
            }
            _ if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'.')
                {
                    j += 1;
                }
                tokens.push((start, Token::Word(text[i..j].to_string())));
                i = j;
            }
            _ => {
                return Err(ParseError::new(
                    start,
                    format!(
                        "unexpected character {:?}",
                        text[i..].chars().next().unwrap()
                    ),
                ))
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.end)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, token: Token) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == token => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::new(
                self.here(),
                format!("expected {token}, found {t}"),
            )),
            None => Err(ParseError::new(
                self.end,
                format!("expected {token}, found end of input"),
            )),
        }
    }

    fn agent(&mut self, word: &str, offset: usize, position: usize) -> Result<AgentId, ParseError> {
        let name = &word[offset..];
        AgentId::new(name)
            .map_err(|e| ParseError::new(position, format!("bad agent name {name:?}: {e}")))
    }

    // "=>" chains, right-associative.
    fn formula(&mut self, bar_is_condition: bool) -> Result<Formula, ParseError> {
        let left = self.disjunction(bar_is_condition)?;
        if self.peek() == Some(&Token::Arrow) {
            self.pos += 1;
            let right = self.formula(bar_is_condition)?;
            return Ok(Formula::implies(left, right));
        }
        Ok(left)
    }

    fn disjunction(&mut self, bar_is_condition: bool) -> Result<Formula, ParseError> {
        let mut left = self.conjunction()?;
        while self.peek() == Some(&Token::Bar) && !bar_is_condition {
            self.pos += 1;
            let right = self.conjunction()?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.unary()?;
        while self.peek() == Some(&Token::Amp) {
            self.pos += 1;
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let position = self.here();
        match self.peek() {
            Some(Token::Bang) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Token::Word(w)) if w.starts_with("K_") && w.len() > 2 => {
                let w = w.clone();
                self.pos += 1;
                let agent = self.agent(&w, 2, position)?;
                Ok(Formula::knows(agent, self.unary()?))
            }
            Some(Token::Word(w)) if w.starts_with("Pr_") && w.len() > 3 => self.prob_comparison(),
            Some(Token::Word(w)) if w.starts_with("P_") && w.len() > 2 => {
                let w = w.clone();
                self.pos += 1;
                let agent = self.agent(&w, 2, position)?;
                Ok(Formula::poss(agent, self.unary()?))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let position = self.here();
        match self.advance() {
            Some(Token::LParen) => {
                let inner = self.formula(false)?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Word(w)) => match w.as_str() {
                "true" => Ok(Formula::Top),
                "false" => Ok(Formula::not(Formula::Top)),
                "theta" | "delta" | "thetaOther" if self.peek() == Some(&Token::LParen) => {
                    self.pos += 1;
                    let agent_pos = self.here();
                    let agent_word = self.word(agent_pos)?;
                    let agent = self.agent(&agent_word, 0, agent_pos)?;
                    self.expect(Token::Comma)?;
                    let action_pos = self.here();
                    let action = self.word(action_pos)?;
                    self.expect(Token::RParen)?;
                    Ok(match w.as_str() {
                        "theta" => Formula::Theta(agent, action),
                        "delta" => Formula::Delta(agent, action),
                        _ => Formula::ThetaOther(agent, action),
                    })
                }
                _ => Ok(Formula::Prop(w)),
            },
            Some(t) => Err(ParseError::new(position, format!("unexpected {t}"))),
            None => Err(ParseError::new(position, "unexpected end of input")),
        }
    }

    fn word(&mut self, position: usize) -> Result<String, ParseError> {
        match self.advance() {
            Some(Token::Word(w)) => Ok(w),
            Some(t) => Err(ParseError::new(
                position,
                format!("expected name, found {t}"),
            )),
            None => Err(ParseError::new(
                position,
                "expected name, found end of input",
            )),
        }
    }

    /// `Pr_j( phi [ "|" phi ] )`, leaving the cursor after the `)`.
    fn prob_term(&mut self) -> Result<ProbTerm, ParseError> {
        let position = self.here();
        let word = self.word(position)?;
        let agent = self.agent(&word, 3, position)?;
        self.expect(Token::LParen)?;
        let target = self.formula(true)?;
        let condition = if self.peek() == Some(&Token::Bar) {
            self.pos += 1;
            Some(Box::new(self.formula(false)?))
        } else {
            None
        };
        self.expect(Token::RParen)?;
        Ok((agent, Box::new(target), condition))
    }

    fn prob_comparison(&mut self) -> Result<Formula, ParseError> {
        let (agent, target, condition) = self.prob_term()?;
        let cmp = match self.advance() {
            Some(Token::Cmp(c)) => c,
            Some(t) => {
                return Err(ParseError::new(
                    self.here(),
                    format!("expected comparison after probability term, found {t}"),
                ))
            }
            None => {
                return Err(ParseError::new(
                    self.end,
                    "expected comparison after probability term",
                ))
            }
        };
        let bound_pos = self.here();
        let bound = match self.peek() {
            Some(Token::Word(w)) if w.starts_with("Pr_") && w.len() > 3 => {
                let (agent, target, condition) = self.prob_term()?;
                ProbBound::Pr {
                    agent,
                    target,
                    condition,
                }
            }
            _ => ProbBound::Const(self.rational(bound_pos)?),
        };
        if let ProbBound::Const(value) = &bound {
            if !bound_in_range(value) {
                return Err(ParseError::new(
                    bound_pos,
                    format!("probability bound {value} is outside [0, 1]"),
                ));
            }
        }
        Ok(Formula::ProbCmp {
            agent,
            target,
            condition,
            cmp,
            bound,
        })
    }

    fn rational(&mut self, position: usize) -> Result<BigRational, ParseError> {
        let first = self.word(position)?;
        let text = if self.peek() == Some(&Token::Slash) {
            self.pos += 1;
            let denom = self.word(self.here())?;
            format!("{first}/{denom}")
        } else {
            first
        };
        parse_rational(&text).map_err(|e| ParseError::new(position, e.to_string()))
    }
}

/// Parses a formula from its concrete syntax.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let formula = parser.formula(false)?;
    if let Some(t) = parser.peek() {
        return Err(ParseError::new(
            parser.here(),
            format!("trailing input starting with {t}"),
        ));
    }
    Ok(formula)
}

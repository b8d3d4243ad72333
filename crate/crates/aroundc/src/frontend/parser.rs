//! Parser for the textual circuit format.
//!
//! Line-oriented, `#` comments, statements separated by newlines or `;`:
//!
//! ```text
//! qubits N
//! x|y|z|h Q
//! rx|ry|rz|p ANGLE Q
//! ctrl Q[, Q...] { ... }
//! around { ... } { ... }        # outer block, then body
//! aux NAME[K] { ... }
//! ```
//!
//! `qN` names the N-th main qubit; aux qubits are referenced as `NAMEi`
//! inside the scope declaring them. Angles accept decimal literals and `pi`
//! expressions (`pi/4`, `-pi`, `2*pi`, `3*pi/4`).

use std::collections::BTreeSet;
use std::fmt;

use crate::ir::{Circuit, GateKind, Instruction, IrError, QubitId};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Sep,
    Star,
    Slash,
    Minus,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &[
    "qubits", "x", "y", "z", "h", "rx", "ry", "rz", "p", "ctrl", "around", "aux", "pi",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (tline, tcol) = (line, col);
        let simple = |c: char| match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Sep),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '-' => Some(Tok::Minus),
            _ => None,
        };
        if ch == '\n' {
            chars.next();
            line += 1;
            col = 1;
            out.push(Token { tok: Tok::Sep, line: tline, col: tcol });
        } else if ch.is_whitespace() {
            chars.next();
            col += 1;
        } else if ch == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
        } else if let Some(tok) = simple(ch) {
            chars.next();
            col += 1;
            out.push(Token { tok, line: tline, col: tcol });
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Word(word), line: tline, col: tcol });
        } else if ch.is_ascii_digit() || ch == '.' {
            let mut num = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() || c == '.' {
                    num.push(c);
                    chars.next();
                    col += 1;
                } else if c == 'e' || c == 'E' {
                    num.push(c);
                    chars.next();
                    col += 1;
                    if let Some(&s) = chars.peek() {
                        if s == '+' || s == '-' {
                            num.push(s);
                            chars.next();
                            col += 1;
                        }
                    }
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Number(num), line: tline, col: tcol });
        } else {
            return Err(ParseError {
                line: tline,
                col: tcol,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    num_main: usize,
    scopes: Vec<(String, Vec<QubitId>)>,
    live: BTreeSet<u32>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .or_else(|| self.toks.last().map(|t| (t.line, t.col + 1)))
            .unwrap_or((1, 1))
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError { line, col, message: message.into() }
    }

    fn skip_seps(&mut self) {
        while matches!(self.peek().map(|t| &t.tok), Some(Tok::Sep)) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn expect_word(&mut self) -> Result<(String, usize, usize), ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Word(w), line, col }) => Ok((w, line, col)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a word"))
            }
        }
    }

    fn expect_number(&mut self) -> Result<f64, ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Number(n), line, col }) => n.parse::<f64>().map_err(|_| ParseError {
                line,
                col,
                message: format!("invalid number `{n}`"),
            }),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a number"))
            }
        }
    }

    fn parse_angle(&mut self) -> Result<f64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let mut allow_div = false;
        let mut value = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Word(w)) if w == "pi" => {
                self.pos += 1;
                allow_div = true;
                std::f64::consts::PI
            }
            Some(Tok::Number(_)) => {
                let n = self.expect_number()?;
                if self.eat(&Tok::Star) {
                    let (w, line, col) = self.expect_word()?;
                    if w != "pi" {
                        return Err(ParseError { line, col, message: "expected `pi` after `*`".into() });
                    }
                    allow_div = true;
                    n * std::f64::consts::PI
                } else {
                    n
                }
            }
            _ => return Err(self.err("expected an angle (number or pi expression)")),
        };
        if allow_div && self.eat(&Tok::Slash) {
            let d = self.expect_number()?;
            if d == 0.0 {
                return Err(self.err("division by zero in angle"));
            }
            value /= d;
        }
        Ok(if neg { -value } else { value })
    }

    fn resolve_ref(&self, word: &str, line: usize, col: usize) -> Result<QubitId, ParseError> {
        let split = word.find(|c: char| c.is_ascii_digit());
        let (prefix, digits) = match split {
            Some(i) if i > 0 => word.split_at(i),
            _ => {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("expected a qubit reference like q0, got `{word}`"),
                })
            }
        };
        let index: u32 = digits.parse().map_err(|_| ParseError {
            line,
            col,
            message: format!("invalid qubit index in `{word}`"),
        })?;
        if prefix == "q" {
            if (index as usize) < self.num_main {
                Ok(QubitId::Main(index))
            } else {
                Err(ParseError {
                    line,
                    col,
                    message: format!("undeclared qubit q{index} (register has {} qubits)", self.num_main),
                })
            }
        } else {
            for (name, ids) in self.scopes.iter().rev() {
                if name == prefix {
                    return ids.get(index as usize).copied().ok_or_else(|| ParseError {
                        line,
                        col,
                        message: format!("aux index {index} out of range for `{name}` (size {})", ids.len()),
                    });
                }
            }
            Err(ParseError {
                line,
                col,
                message: format!("aux qubit `{word}` referenced outside any scope declaring `{prefix}`"),
            })
        }
    }

    fn parse_qref(&mut self) -> Result<QubitId, ParseError> {
        let (word, line, col) = self.expect_word()?;
        self.resolve_ref(&word, line, col)
    }

    fn parse_block(&mut self) -> Result<Vec<Instruction>, ParseError> {
        self.skip_seps();
        self.expect(Tok::LBrace, "`{`")?;
        let body = self.parse_stmts(true)?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(body)
    }

    fn parse_stmts(&mut self, in_block: bool) -> Result<Vec<Instruction>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_seps();
            match self.peek().map(|t| &t.tok) {
                None => break,
                Some(Tok::RBrace) if in_block => break,
                Some(_) => out.push(self.parse_stmt()?),
            }
        }
        Ok(out)
    }

    fn parse_stmt(&mut self) -> Result<Instruction, ParseError> {
        let (word, line, col) = self.expect_word()?;
        let gate1 = |kind: GateKind, p: &mut Parser| -> Result<Instruction, ParseError> {
            let target = p.parse_qref()?;
            Ok(Instruction::apply(kind, target))
        };
        match word.as_str() {
            "qubits" => Err(ParseError {
                line,
                col,
                message: "`qubits` must appear exactly once, before any other statement".into(),
            }),
            "x" => gate1(GateKind::X, self),
            "y" => gate1(GateKind::Y, self),
            "z" => gate1(GateKind::Z, self),
            "h" => gate1(GateKind::H, self),
            "rx" | "ry" | "rz" | "p" => {
                let angle = self.parse_angle()?;
                let target = self.parse_qref()?;
                let kind = match word.as_str() {
                    "rx" => GateKind::RX(angle),
                    "ry" => GateKind::RY(angle),
                    "rz" => GateKind::RZ(angle),
                    _ => GateKind::P(angle),
                };
                Ok(Instruction::apply(kind, target))
            }
            "ctrl" => {
                let mut controls = vec![self.parse_qref()?];
                while self.eat(&Tok::Comma) {
                    controls.push(self.parse_qref()?);
                }
                let body = self.parse_block()?;
                crate::ir::controlled(controls, body).map_err(|e| match e {
                    IrError::Overlap(qid) => ParseError {
                        line,
                        col,
                        message: format!("control qubit {qid} is also acted on inside the block"),
                    },
                    other => ParseError { line, col, message: other.to_string() },
                })
            }
            "around" => {
                let outer = self.parse_block()?;
                let body = self.parse_block()?;
                Ok(Instruction::Around { outer, body })
            }
            "aux" => {
                let (name, nline, ncol) = self.expect_word()?;
                if !name.chars().all(|c| c.is_ascii_alphabetic()) || name == "q" || KEYWORDS.contains(&name.as_str())
                {
                    return Err(ParseError {
                        line: nline,
                        col: ncol,
                        message: format!("invalid aux name `{name}` (alphabetic, not a keyword, not `q`)"),
                    });
                }
                if self.scopes.iter().any(|(n, _)| n == &name) {
                    return Err(ParseError {
                        line: nline,
                        col: ncol,
                        message: format!("aux name `{name}` already in scope"),
                    });
                }
                self.expect(Tok::LBracket, "`[`")?;
                let count = self.expect_number()?;
                if count < 0.0 || count.fract() != 0.0 {
                    return Err(self.err("aux count must be a non-negative integer"));
                }
                let count = count as usize;
                self.expect(Tok::RBracket, "`]`")?;
                let ids = self.allocate_aux(count);
                self.scopes.push((name, ids.clone()));
                let body = self.parse_block();
                self.scopes.pop();
                for id in &ids {
                    self.live.remove(&id.index());
                }
                Ok(Instruction::AuxScope { aux: ids, body: body? })
            }
            other => Err(ParseError { line, col, message: format!("unknown statement `{other}`") }),
        }
    }

    fn allocate_aux(&mut self, count: usize) -> Vec<QubitId> {
        // lowest free indices, free-list style, so sibling scopes reuse slots
        let mut ids = Vec::with_capacity(count);
        let mut idx = 0u32;
        while ids.len() < count {
            if !self.live.contains(&idx) {
                self.live.insert(idx);
                ids.push(QubitId::Aux(idx));
            }
            idx += 1;
        }
        ids
    }
}

/// Parses a source program into a circuit named `name`.
pub fn parse(src: &str, name: &str) -> Result<Circuit, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, num_main: 0, scopes: Vec::new(), live: BTreeSet::new() };
    p.skip_seps();
    let (word, line, col) = p.expect_word()?;
    if word != "qubits" {
        return Err(ParseError { line, col, message: "program must start with `qubits N`".into() });
    }
    let n = p.expect_number()?;
    if n < 1.0 || n.fract() != 0.0 {
        return Err(p.err("qubit count must be a positive integer"));
    }
    p.num_main = n as usize;
    let instructions = p.parse_stmts(false)?;
    let circuit = Circuit::new(name, p.num_main, instructions);
    debug_assert_eq!(circuit.validate(), Ok(()));
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{a, around, cx, h, q, rz, x};

    #[test]
    fn parses_cnot() {
        let c = parse("qubits 2; ctrl q0 { x q1 }", "cnot").unwrap();
        assert_eq!(c.num_main, 2);
        assert_eq!(c.instructions, vec![cx(q(0), q(1))]);
    }

    #[test]
    fn parses_rxx_program() {
        let src = "qubits 2\naround { h q0; h q1; ctrl q0 { x q1 } } { rz pi q1 }\n";
        let c = parse(src, "rxx").unwrap();
        assert_eq!(
            c.instructions,
            vec![around(
                vec![h(q(0)), h(q(1)), cx(q(0), q(1))],
                vec![rz(std::f64::consts::PI, q(1))],
            )]
        );
    }

    #[test]
    fn rejects_undeclared_qubit() {
        let err = parse("qubits 2\nx q5\n", "bad").unwrap_err();
        assert!(err.message.contains("undeclared qubit q5"));
        assert_eq!(err.line, 2);
    }

    #[test]
    fn rejects_aux_outside_scope() {
        let err = parse("qubits 1\naux s[1] { x s0 }\nx s0\n", "bad").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("outside any scope"));
    }

    #[test]
    fn parses_aux_scopes_with_reuse() {
        let src = "qubits 1\naux s[1] { z s0 }\naux t[2] { z t0; z t1 }\n";
        let c = parse(src, "scopes").unwrap();
        match &c.instructions[..] {
            [Instruction::AuxScope { aux: a1, .. }, Instruction::AuxScope { aux: a2, .. }] => {
                assert_eq!(a1, &vec![a(0)]);
                assert_eq!(a2, &vec![a(0), a(1)]); // freed slot reused
            }
            other => panic!("unexpected parse {other:?}"),
        }
        assert_eq!(c.aux_peak(), 2);
    }

    #[test]
    fn angle_expressions() {
        let c = parse("qubits 1\nrz pi/4 q0; rz -pi q0; rz 2*pi q0; rz 3*pi/4 q0; rz 0.25 q0; rz -1.5e-3 q0", "angles")
            .unwrap();
        let angles: Vec<f64> = c
            .instructions
            .iter()
            .map(|i| match i {
                Instruction::Apply { gate: GateKind::RZ(t), .. } => *t,
                other => panic!("expected rz, got {other:?}"),
            })
            .collect();
        let pi = std::f64::consts::PI;
        assert_eq!(angles, vec![pi / 4.0, -pi, 2.0 * pi, 3.0 * pi / 4.0, 0.25, -1.5e-3]);
    }

    #[test]
    fn rejects_control_overlap() {
        let err = parse("qubits 2\nctrl q0 { x q0 }", "bad").unwrap_err();
        assert!(err.message.contains("also acted on"));
    }

    #[test]
    fn rejects_unknown_statement() {
        let err = parse("qubits 1\ncnot q0", "bad").unwrap_err();
        assert!(err.message.contains("unknown statement"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let src = "# header\nqubits 1\n\n# gate\nx q0 # trailing\n";
        let c = parse(src, "c").unwrap();
        assert_eq!(c.instructions, vec![x(q(0))]);
    }

    #[test]
    fn reports_missing_brace() {
        let err = parse("qubits 2\nctrl q0 { x q1", "bad").unwrap_err();
        assert!(err.message.contains("expected `}`"));
    }
}

//! Decision-maker filter conditions.
//!
//! Grammar:
//!
//! ```text
//! expr := term ('||' term)*
//! term := atom ('&&' atom)*
//! atom := OP '(' value ')' | '(' expr ')'
//! OP   := '>' | '<' | '>=' | '<=' | '=' | '<>' | 'like'
//! value := decimal numeral | single-quoted string ('' escapes a quote)
//! ```
//!
//! `&&` binds tighter than `||`; both are left-associative. A condition
//! is bound to one column at the point of use, so atoms name only the
//! operator and the comparison value.

use rust_decimal::Decimal;
use thiserror::Error;

use crate::value::{format_decimal, parse_decimal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
    Ne,
    Like,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
            CompareOp::Ge => ">=",
            CompareOp::Le => "<=",
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Like => "like",
        }
    }
}

/// A comparison value: decimal numeral or single-quoted string.
#[derive(Debug, Clone, PartialEq)]
pub enum CondValue {
    Number(Decimal),
    String(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Atom { op: CompareOp, value: CondValue },
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn atom(op: CompareOp, value: CondValue) -> Self {
        Condition::Atom { op, value }
    }

    pub fn and(left: Condition, right: Condition) -> Self {
        Condition::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: Condition, right: Condition) -> Self {
        Condition::Or(Box::new(left), Box::new(right))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("condition syntax error at offset {position}: {message}")]
pub struct ConditionSyntaxError {
    /// Byte offset into the condition text.
    pub position: usize,
    pub message: String,
}

pub fn parse_condition(text: &str) -> Result<Condition, ConditionSyntaxError> {
    let mut p = Parser { text: text.as_bytes(), pos: 0 };
    let cond = p.expr()?;
    p.skip_ws();
    if p.pos != p.text.len() {
        return Err(p.err("trailing input"));
    }
    Ok(cond)
}

/// Canonical text for a condition; `parse_condition` of the result is
/// structurally equal to the input tree. Parentheses appear only where
/// precedence requires them.
pub fn print_condition(c: &Condition) -> String {
    let mut out = String::new();
    print_node(c, Prec::Or, false, &mut out);
    out
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Or = 1,
    And = 2,
}

fn print_node(c: &Condition, parent: Prec, right_child: bool, out: &mut String) {
    match c {
        Condition::Atom { op, value } => {
            out.push_str(op.symbol());
            out.push('(');
            match value {
                CondValue::Number(d) => out.push_str(&format_decimal(*d)),
                CondValue::String(s) => {
                    out.push('\'');
                    out.push_str(&s.replace('\'', "''"));
                    out.push('\'');
                }
            }
            out.push(')');
        }
        Condition::And(l, r) => {
            // left-associative: a right-hand And under And needs parens
            let parens = Prec::And < parent || (parent == Prec::And && right_child);
            if parens {
                out.push('(');
            }
            print_node(l, Prec::And, false, out);
            out.push_str(" && ");
            print_node(r, Prec::And, true, out);
            if parens {
                out.push(')');
            }
        }
        Condition::Or(l, r) => {
            let parens = parent == Prec::And || right_child;
            if parens {
                out.push('(');
            }
            print_node(l, Prec::Or, false, out);
            out.push_str(" || ");
            print_node(r, Prec::Or, true, out);
            if parens {
                out.push(')');
            }
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ConditionSyntaxError {
        ConditionSyntaxError { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.text[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Condition, ConditionSyntaxError> {
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            if self.eat("||") {
                let rhs = self.term()?;
                node = Condition::or(node, rhs);
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Condition, ConditionSyntaxError> {
        let mut node = self.atom()?;
        loop {
            self.skip_ws();
            // `&&` only; a single `&` is a syntax error caught by atom/end checks
            if self.eat("&&") {
                let rhs = self.atom()?;
                node = Condition::and(node, rhs);
            } else {
                return Ok(node);
            }
        }
    }

    fn atom(&mut self) -> Result<Condition, ConditionSyntaxError> {
        self.skip_ws();
        if self.eat("(") {
            let inner = self.expr()?;
            self.skip_ws();
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(inner);
        }
        let op = self.operator()?;
        self.skip_ws();
        if !self.eat("(") {
            return Err(self.err("expected `(` after operator"));
        }
        self.skip_ws();
        let value = self.value(op)?;
        self.skip_ws();
        if !self.eat(")") {
            return Err(self.err("expected `)` after value"));
        }
        Ok(Condition::atom(op, value))
    }

    fn operator(&mut self) -> Result<CompareOp, ConditionSyntaxError> {
        // longest match first: >= before >, <= and <> before <
        for (tok, op) in [
            (">=", CompareOp::Ge),
            ("<=", CompareOp::Le),
            ("<>", CompareOp::Ne),
            (">", CompareOp::Gt),
            ("<", CompareOp::Lt),
            ("=", CompareOp::Eq),
            ("like", CompareOp::Like),
        ] {
            if self.eat(tok) {
                return Ok(op);
            }
        }
        Err(self.err("expected one of `>`, `<`, `>=`, `<=`, `=`, `<>`, `like`"))
    }

    fn value(&mut self, op: CompareOp) -> Result<CondValue, ConditionSyntaxError> {
        if self.pos < self.text.len() && self.text[self.pos] == b'\'' {
            return Ok(CondValue::String(self.quoted_string()?));
        }
        if op == CompareOp::Like {
            return Err(self.err("`like` requires a quoted string value"));
        }
        let start = self.pos;
        if self.pos < self.text.len() && (self.text[self.pos] == b'+' || self.text[self.pos] == b'-') {
            self.pos += 1;
        }
        while self.pos < self.text.len()
            && (self.text[self.pos].is_ascii_digit() || self.text[self.pos] == b'.')
        {
            self.pos += 1;
        }
        let literal = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        match parse_decimal(literal) {
            Some(d) => Ok(CondValue::Number(d)),
            None => {
                self.pos = start;
                Err(self.err("expected a decimal numeral or quoted string"))
            }
        }
    }

    fn quoted_string(&mut self) -> Result<String, ConditionSyntaxError> {
        debug_assert_eq!(self.text[self.pos], b'\'');
        let open = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.text[self.pos..].iter().position(|&b| b == b'\'') {
                None => {
                    self.pos = open;
                    return Err(self.err("unterminated string literal"));
                }
                Some(i) => {
                    out.push_str(std::str::from_utf8(&self.text[self.pos..self.pos + i]).unwrap());
                    self.pos += i + 1;
                    // doubled quote escapes a quote
                    if self.pos < self.text.len() && self.text[self.pos] == b'\'' {
                        out.push('\'');
                        self.pos += 1;
                    } else {
                        return Ok(out);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(n: i64) -> CondValue {
        CondValue::Number(Decimal::from(n))
    }

    #[test]
    fn parses_and_of_atoms() {
        let c = parse_condition(">(100) && <>(0)").unwrap();
        assert_eq!(
            c,
            Condition::and(
                Condition::atom(CompareOp::Gt, num(100)),
                Condition::atom(CompareOp::Ne, num(0)),
            )
        );
    }

    #[test]
    fn parses_single_like_atom() {
        let c = parse_condition("like('%SFAX%')").unwrap();
        assert_eq!(c, Condition::atom(CompareOp::Like, CondValue::String("%SFAX%".into())));
    }

    #[test]
    fn and_binds_tighter_than_or() {
        // hand-checked against the grammar: || splits first, so the
        // right operand is the whole `=(2) && <(3)` term
        let c = parse_condition(">(1) || =(2) && <(3)").unwrap();
        assert_eq!(
            c,
            Condition::or(
                Condition::atom(CompareOp::Gt, num(1)),
                Condition::and(
                    Condition::atom(CompareOp::Eq, num(2)),
                    Condition::atom(CompareOp::Lt, num(3)),
                ),
            )
        );
    }

    #[test]
    fn grouping_overrides_precedence() {
        let c = parse_condition("(>(1) || =(2)) && <(3)").unwrap();
        assert_eq!(
            c,
            Condition::and(
                Condition::or(
                    Condition::atom(CompareOp::Gt, num(1)),
                    Condition::atom(CompareOp::Eq, num(2)),
                ),
                Condition::atom(CompareOp::Lt, num(3)),
            )
        );
    }

    #[test]
    fn rejects_foreign_operators() {
        for bad in ["!=(3)", ">>(1)", "in(2)", "LIKE('%x%')", "=(1) & =(2)", "~(5)"] {
            assert!(parse_condition(bad).is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn rejects_like_with_number() {
        let err = parse_condition("like(5)").unwrap_err();
        assert!(err.message.contains("quoted string"));
    }

    #[test]
    fn reports_position() {
        let err = parse_condition(">(100) &&& <(2)").unwrap_err();
        assert!(err.position >= 7, "position {} should point past the valid prefix", err.position);
    }

    #[test]
    fn prints_atoms_and_compounds() {
        assert_eq!(print_condition(&Condition::atom(CompareOp::Gt, num(100))), ">(100)");
        let c = Condition::and(
            Condition::atom(CompareOp::Ge, num(10)),
            Condition::atom(CompareOp::Ne, num(0)),
        );
        assert_eq!(print_condition(&c), ">=(10) && <>(0)");
    }

    #[test]
    fn parens_only_where_needed() {
        let or_in_and = Condition::and(
            Condition::or(
                Condition::atom(CompareOp::Gt, num(1)),
                Condition::atom(CompareOp::Eq, num(2)),
            ),
            Condition::atom(CompareOp::Lt, num(3)),
        );
        assert_eq!(print_condition(&or_in_and), "(>(1) || =(2)) && <(3)");
        let and_in_or = Condition::or(
            Condition::atom(CompareOp::Gt, num(1)),
            Condition::and(
                Condition::atom(CompareOp::Eq, num(2)),
                Condition::atom(CompareOp::Lt, num(3)),
            ),
        );
        assert_eq!(print_condition(&and_in_or), ">(1) || =(2) && <(3)");
    }

    #[test]
    fn quote_escape_round_trips() {
        let c = Condition::atom(CompareOp::Eq, CondValue::String("l'été".into()));
        let printed = print_condition(&c);
        assert_eq!(printed, "=('l''été')");
        assert_eq!(parse_condition(&printed).unwrap(), c);
    }
}

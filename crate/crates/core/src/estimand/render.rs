//! Text forms of an estimand.
//!
//! Plain style: `Σ_{x2} P(x4|x3,x2) P(x2)`. Juxtaposition is product, a sum
//! extends to the end of its enclosing group, and a sum that is one factor
//! among several is parenthesized. The parser also accepts `sum_{...}` for
//! `Σ_{...}` and `1` for the empty product.

use std::collections::HashMap;

use super::{default_symbol, Binding, Estimand, EstimandError, SumVar, Term};
use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Style {
    #[default]
    Plain,
    Latex,
}

pub fn render(e: &Estimand, style: Style) -> String {
    let mut out = String::new();
    write_expr(e, style, &mut out);
    out
}

fn write_expr(e: &Estimand, style: Style, out: &mut String) {
    match e {
        Estimand::Sum { vars, body } => {
            let symbols: Vec<String> = vars.iter().map(|v| label(&v.symbol, style)).collect();
            match style {
                Style::Plain => out.push_str(&format!("Σ_{{{}}} ", symbols.join(","))),
                Style::Latex => out.push_str(&format!("\\sum_{{{}}} ", symbols.join(", "))),
            }
            write_expr(body, style, out);
        }
        Estimand::Product { factors } if factors.is_empty() => out.push('1'),
        Estimand::Product { factors } => {
            for (i, f) in factors.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let grouped = matches!(f, Estimand::Sum { .. } | Estimand::Product { .. });
                if grouped {
                    out.push_str(open(style));
                }
                write_expr(f, style, out);
                if grouped {
                    out.push_str(close(style));
                }
            }
        }
        Estimand::Prob { targets, given } => {
            let sep = if style == Style::Plain { "," } else { ", " };
            let list = |ts: &[Term]| ts.iter().map(|t| label(&t.label(), style)).collect::<Vec<_>>().join(sep);
            out.push_str("P(");
            out.push_str(&list(targets));
            if !given.is_empty() {
                out.push_str(if style == Style::Plain { "|" } else { " \\mid " });
                out.push_str(&list(given));
            }
            out.push(')');
        }
        Estimand::Hole(p) => out.push_str(&format!("[#{}]", p.id)),
    }
}

fn open(style: Style) -> &'static str {
    match style {
        Style::Plain => "(",
        Style::Latex => "\\left(",
    }
}

fn close(style: Style) -> &'static str {
    match style {
        Style::Plain => ")",
        Style::Latex => "\\right)",
    }
}

/// `x2` becomes `x_{2}` in LaTeX; underscores are escaped.
fn label(symbol: &str, style: Style) -> String {
    if style == Style::Plain {
        return symbol.to_string();
    }
    let primes = symbol.len() - symbol.trim_end_matches('\'').len();
    let core = &symbol[..symbol.len() - primes];
    let digits = core.len() - core.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (base, sub) = core.split_at(core.len() - digits);
    let mut s = base.replace('_', "\\_");
    if !sub.is_empty() && !base.is_empty() {
        s.push_str(&format!("_{{{sub}}}"));
    } else {
        s.push_str(sub);
    }
    s.push_str(&symbol[symbol.len() - primes..]);
    s
}

/// Parses the plain style back into a tree. Names resolve case-insensitively
/// against `nodes`; an unbound occurrence of `intervention` is the fixed
/// intervention value, any other unbound name is a free variable.
pub fn parse_estimand(text: &str, nodes: &[NodeId], intervention: Option<&NodeId>) -> Result<Estimand, EstimandError> {
    let mut lookup: HashMap<String, Vec<&NodeId>> = HashMap::new();
    for n in nodes {
        lookup.entry(default_symbol(n)).or_default().push(n);
    }
    let mut p = Parser {
        text,
        pos: 0,
        lookup,
        intervention,
        scope: Vec::new(),
    };
    let e = p.product(false)?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    lookup: HashMap<String, Vec<&'a NodeId>>,
    intervention: Option<&'a NodeId>,
    scope: Vec<(String, NodeId)>,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> EstimandError {
        EstimandError::Parse {
            at: self.pos,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), EstimandError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{token}`")))
        }
    }

    fn at_sum(&mut self) -> bool {
        self.skip_ws();
        let r = self.rest();
        r.starts_with("Σ_{") || r.starts_with("sum_{")
    }

    /// Factors up to `)` (when nested) or end of input.
    fn product(&mut self, nested: bool) -> Result<Estimand, EstimandError> {
        let mut factors = Vec::new();
        loop {
            self.skip_ws();
            if self.rest().is_empty() || (nested && self.rest().starts_with(')')) {
                break;
            }
            if self.at_sum() {
                factors.push(self.sum(nested)?);
                break;
            }
            factors.push(self.factor()?);
        }
        Ok(match factors.len() {
            0 => return Err(self.error("expected a factor")),
            1 => factors.pop().unwrap(),
            _ => Estimand::Product { factors },
        })
    }

    fn sum(&mut self, nested: bool) -> Result<Estimand, EstimandError> {
        if !self.eat("Σ_{") {
            self.expect("sum_{")?;
        }
        let mut vars = Vec::new();
        loop {
            let symbol = self.ident()?;
            let base = symbol.trim_end_matches('\'');
            let node = self.resolve(base)?;
            vars.push(SumVar { symbol, node });
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        let depth = self.scope.len();
        for v in &vars {
            if self.scope.iter().any(|(s, _)| *s == v.symbol) {
                return Err(EstimandError::Shadowed(v.symbol.clone()));
            }
            self.scope.push((v.symbol.clone(), v.node.clone()));
        }
        let body = self.product(nested)?;
        self.scope.truncate(depth);
        Ok(Estimand::Sum {
            vars,
            body: Box::new(body),
        })
    }

    fn factor(&mut self) -> Result<Estimand, EstimandError> {
        if self.eat("P(") {
            let targets = self.terms()?;
            let given = if self.eat("|") { self.terms()? } else { Vec::new() };
            self.expect(")")?;
            return Ok(Estimand::Prob { targets, given });
        }
        if self.eat("(") {
            let inner = self.product(true)?;
            self.expect(")")?;
            return Ok(inner);
        }
        if self.eat("1") {
            return Ok(Estimand::one());
        }
        Err(self.error("expected `P(`, `(`, `Σ_{` or `1`"))
    }

    fn terms(&mut self) -> Result<Vec<Term>, EstimandError> {
        let mut out = Vec::new();
        loop {
            let name = self.ident()?;
            out.push(self.term(&name)?);
            if !self.eat(",") {
                return Ok(out);
            }
        }
    }

    fn term(&self, name: &str) -> Result<Term, EstimandError> {
        if let Some((symbol, node)) = self.scope.iter().rev().find(|(s, _)| s == name) {
            return Ok(Term::bound(node.clone(), symbol.clone()));
        }
        let node = self.resolve(name)?;
        let binding = if Some(&node) == self.intervention {
            Binding::Fixed
        } else {
            Binding::Free
        };
        Ok(Term { node, binding })
    }

    fn resolve(&self, name: &str) -> Result<NodeId, EstimandError> {
        match self.lookup.get(&name.to_lowercase()).map(Vec::as_slice) {
            Some([one]) => Ok((*one).clone()),
            Some([_, _, ..]) => Err(self.error(&format!("name {name:?} matches several nodes"))),
            _ => Err(self.error(&format!("unknown variable {name:?}"))),
        }
    }

    fn ident(&mut self) -> Result<String, EstimandError> {
        self.skip_ws();
        let r = self.rest();
        let mut end = 0;
        for (i, c) in r.char_indices() {
            let ok = if i == 0 {
                c.is_ascii_alphabetic() || c == '_'
            } else {
                c.is_ascii_alphanumeric() || c == '_' || c == '\''
            };
            if !ok {
                break;
            }
            end = i + c.len_utf8();
        }
        if end == 0 {
            return Err(self.error("expected a variable name"));
        }
        self.pos += end;
        Ok(r[..end].to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    fn sprinkler_estimand() -> Estimand {
        Estimand::sum(
            vec![SumVar::new(n("X2"))],
            Estimand::product([
                Estimand::prob(vec![Term::free(n("X4"))], vec![Term::fixed(n("X3")), Term::bound(n("X2"), "x2")]),
                Estimand::prob(vec![Term::bound(n("X2"), "x2")], vec![]),
            ]),
        )
    }

    #[test]
    fn renders_conditional() {
        let e = Estimand::prob(vec![Term::free(n("Y"))], vec![Term::fixed(n("X"))]);
        assert_eq!(render(&e, Style::Plain), "P(y|x)");
        assert_eq!(render(&e, Style::Latex), "P(y \\mid x)");
    }

    #[test]
    fn renders_adjustment() {
        let e = sprinkler_estimand();
        assert_eq!(render(&e, Style::Plain), "Σ_{x2} P(x4|x3,x2) P(x2)");
        assert_eq!(
            render(&e, Style::Latex),
            "\\sum_{x_{2}} P(x_{4} \\mid x_{3}, x_{2}) P(x_{2})"
        );
    }

    #[test]
    fn latex_labels() {
        assert_eq!(label("x'", Style::Latex), "x'");
        assert_eq!(label("z12'", Style::Latex), "z_{12}'");
        assert_eq!(label("a_b", Style::Latex), "a\\_b");
    }

    #[test]
    fn parse_round_trip() {
        let nodes = [n("X2"), n("X3"), n("X4")];
        let e = sprinkler_estimand();
        let text = render(&e, Style::Plain);
        let parsed = parse_estimand(&text, &nodes, Some(&n("X3"))).unwrap();
        assert_eq!(parsed, e);
        let ascii = parse_estimand("sum_{x2} ( P(x4|x3,x2) P(x2) )", &nodes, Some(&n("X3"))).unwrap();
        assert_eq!(ascii, e);
    }

    #[test]
    fn parse_errors() {
        let nodes = [n("A"), n("a2"), n("A2")];
        assert!(parse_estimand("P(b)", &nodes, None).is_err());
        assert!(parse_estimand("P(a2)", &nodes, None).is_err());
        assert!(parse_estimand("P(a", &nodes, None).is_err());
        assert!(parse_estimand("P(a) )", &nodes, None).is_err());
        assert_eq!(parse_estimand("1", &nodes, None).unwrap(), Estimand::one());
    }
}

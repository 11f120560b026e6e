//! Exact evaluation of an estimand against a discrete joint distribution.

use std::collections::HashMap;

use thiserror::Error;

use super::{Binding, Estimand, EstimandError, Term};
use crate::graph::NodeId;

/// Tolerance on the total mass of a joint table.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A function of finitely many discrete variables, stored row-major with the
/// last variable varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub variables: Vec<NodeId>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn scalar(v: f64) -> Self {
        Table {
            variables: Vec::new(),
            cards: Vec::new(),
            values: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        strides(&self.cards)
    }

    /// Value at one assignment, given in the order of `variables`.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let idx: usize = assignment.iter().zip(self.strides()).map(|(v, s)| v * s).sum();
        self.values[idx]
    }

    /// Largest absolute entrywise difference, or `None` if the tables do not
    /// range over the same variables in the same order.
    pub fn max_abs_diff(&self, other: &Table) -> Option<f64> {
        if self.variables != other.variables || self.cards != other.cards {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("table has {found} entries, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("variable {0} listed twice")]
    DuplicateVariable(NodeId),
    #[error("variable {0} has no states")]
    EmptyDomain(NodeId),
    #[error("entry {index} is negative or not finite ({value})")]
    Negative { index: usize, value: f64 },
    #[error("entries sum to {0}, not 1")]
    NotNormalized(f64),
}

/// A normalized joint distribution over named discrete variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    table: Table,
}

impl Distribution {
    pub fn new(variables: Vec<NodeId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self, DistributionError> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(DistributionError::DuplicateVariable(v.clone()));
            }
        }
        if let Some(i) = cards.iter().position(|&c| c == 0) {
            return Err(DistributionError::EmptyDomain(variables[i].clone()));
        }
        let expected: usize = cards.iter().product();
        if variables.len() != cards.len() || values.len() != expected {
            return Err(DistributionError::Shape {
                expected,
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DistributionError::Negative {
                index,
                value: values[index],
            });
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Distribution {
            table: Table {
                variables,
                cards,
                values,
            },
        })
    }

    pub fn variables(&self) -> &[NodeId] {
        &self.table.variables
    }

    pub fn cards(&self) -> &[usize] {
        &self.table.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.table.values
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn position(&self, node: &NodeId) -> Option<usize> {
        self.table.variables.iter().position(|v| v == node)
    }

    pub fn card(&self, node: &NodeId) -> Option<usize> {
        self.position(node).map(|i| self.table.cards[i])
    }

    /// Every entry is at least `min`.
    pub fn is_positive(&self, min: f64) -> bool {
        self.table.values.iter().all(|&p| p >= min)
    }

    /// Marginal over the given positions, in the given order.
    fn marginal_positions(&self, keep: &[usize]) -> Vec<f64> {
        let cards = &self.table.cards;
        let out_cards: Vec<usize> = keep.iter().map(|&i| cards[i]).collect();
        let out_strides = strides(&out_cards);
        // stride each joint position contributes to the output index
        let mut contrib = vec![0usize; cards.len()];
        for (k, &i) in keep.iter().enumerate() {
            contrib[i] = out_strides[k];
        }
        let mut out = vec![0.0; out_cards.iter().product()];
        let mut digits = vec![0usize; cards.len()];
        let mut idx = 0usize;
        for &p in &self.table.values {
            out[idx] += p;
            // odometer increment, last variable fastest
            for d in (0..cards.len()).rev() {
                digits[d] += 1;
                idx += contrib[d];
                if digits[d] < cards[d] {
                    break;
                }
                idx -= contrib[d] * digits[d];
                digits[d] = 0;
            }
        }
        out
    }

    /// Marginal over `nodes`, in the given order.
    pub fn marginal(&self, nodes: &[NodeId]) -> Result<Table, EvalError> {
        let keep = nodes
            .iter()
            .map(|n| self.position(n).ok_or_else(|| EvalError::UnknownVariable(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Table {
            variables: nodes.to_vec(),
            cards: keep.iter().map(|&i| self.table.cards[i]).collect(),
            values: self.marginal_positions(&keep),
        })
    }
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Malformed(#[from] EstimandError),
    #[error("variable {0} is not in the distribution")]
    UnknownVariable(NodeId),
    #[error("the estimand fixes the intervention variable but no value was supplied")]
    MissingInterventionValue,
    #[error("intervention value {value} is out of range for {node}")]
    InterventionOutOfRange { node: NodeId, value: usize },
    #[error("the intervention variable is both fixed and free")]
    FixedAndFree(NodeId),
    #[error("the estimand fixes more than one variable ({0} and {1})")]
    SeveralFixed(NodeId, NodeId),
    #[error("free variable {0} is missing from the requested output")]
    MissingOutput(NodeId),
    #[error("conditioning on a zero-probability event in P({0})")]
    ZeroConditioning(String),
}

enum Op {
    Sum { slots: Vec<(usize, usize)>, body: Box<Op> },
    Product(Vec<Op>),
    Prob { num: Lookup, den: Option<Lookup>, text: String },
}

/// A marginal table and, for each of its variables, the slot holding its value.
struct Lookup {
    marginal: usize,
    slots: Vec<usize>,
}

struct Compiler<'a> {
    joint: &'a Distribution,
    marginals: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)>,
    index: HashMap<Vec<usize>, usize>,
    free_slots: HashMap<NodeId, usize>,
    fixed_slot: usize,
    next_slot: usize,
}

impl Compiler<'_> {
    fn lookup(&mut self, terms: &[(usize, usize)]) -> Lookup {
        let mut sorted = terms.to_vec();
        sorted.sort_unstable();
        let positions: Vec<usize> = sorted.iter().map(|&(p, _)| p).collect();
        let marginal = match self.index.get(&positions) {
            Some(&m) => m,
            None => {
                let values = self.joint.marginal_positions(&positions);
                let cards: Vec<usize> = positions.iter().map(|&p| self.joint.cards()[p]).collect();
                self.marginals.push((positions.clone(), strides(&cards), values));
                self.index.insert(positions, self.marginals.len() - 1);
                self.marginals.len() - 1
            }
        };
        Lookup {
            marginal,
            slots: sorted.iter().map(|&(_, s)| s).collect(),
        }
    }

    fn term(&self, t: &Term, scope: &[(String, usize)]) -> Result<(usize, usize), EvalError> {
        let position = self
            .joint
            .position(&t.node)
            .ok_or_else(|| EvalError::UnknownVariable(t.node.clone()))?;
        let slot = match &t.binding {
            Binding::Free => self.free_slots[&t.node],
            Binding::Fixed => self.fixed_slot,
            Binding::Bound { symbol } => {
                scope
                    .iter()
                    .rev()
                    .find(|(s, _)| s == symbol)
                    .expect("validated estimand")
                    .1
            }
        };
        Ok((position, slot))
    }

    fn compile(&mut self, e: &Estimand, scope: &mut Vec<(String, usize)>) -> Result<Op, EvalError> {
        Ok(match e {
            Estimand::Sum { vars, body } => {
                let base = scope.len();
                let mut slots = Vec::new();
                for v in vars {
                    let card = self
                        .joint
                        .card(&v.node)
                        .ok_or_else(|| EvalError::UnknownVariable(v.node.clone()))?;
                    let slot = self.next_slot;
                    self.next_slot += 1;
                    scope.push((v.symbol.clone(), slot));
                    slots.push((slot, card));
                }
                let body = self.compile(body, scope)?;
                scope.truncate(base);
                Op::Sum {
                    slots,
                    body: Box::new(body),
                }
            }
            Estimand::Product { factors } => {
                Op::Product(factors.iter().map(|f| self.compile(f, scope)).collect::<Result<_, _>>()?)
            }
            Estimand::Prob { targets, given } => {
                let all: Vec<(usize, usize)> = targets
                    .iter()
                    .chain(given)
                    .map(|t| self.term(t, scope))
                    .collect::<Result<_, _>>()?;
                let num = self.lookup(&all);
                let den = (!given.is_empty()).then(|| self.lookup(&all[targets.len()..]));
                Op::Prob {
                    num,
                    den,
                    text: super::render(e, super::Style::Plain),
                }
            }
            Estimand::Hole(p) => return Err(EstimandError::UnresolvedHole(p.id).into()),
        })
    }
}

struct Machine {
    marginals: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)>,
    values: Vec<usize>,
}

impl Machine {
    fn read(&self, l: &Lookup) -> f64 {
        let (_, strides, table) = &self.marginals[l.marginal];
        let idx: usize = l.slots.iter().zip(strides).map(|(&s, st)| self.values[s] * st).sum();
        table[idx]
    }

    fn run(&mut self, op: &Op) -> Result<f64, EvalError> {
        match op {
            Op::Prob { num, den, text } => {
                let n = self.read(num);
                match den {
                    None => Ok(n),
                    Some(d) => {
                        let d = self.read(d);
                        if d <= 0.0 {
                            return Err(EvalError::ZeroConditioning(text.clone()));
                        }
                        Ok(n / d)
                    }
                }
            }
            Op::Product(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= self.run(f)?;
                }
                Ok(acc)
            }
            Op::Sum { slots, body } => {
                for &(s, _) in slots {
                    self.values[s] = 0;
                }
                let mut acc = 0.0;
                'outer: loop {
                    acc += self.run(body)?;
                    for &(s, card) in slots.iter().rev() {
                        self.values[s] += 1;
                        if self.values[s] < card {
                            continue 'outer;
                        }
                        self.values[s] = 0;
                    }
                    return Ok(acc);
                }
            }
        }
    }
}

/// Evaluates `e` for every assignment of its free variables, ordered as in
/// the joint. `x_value` is the state of the fixed intervention variable.
pub fn evaluate(e: &Estimand, joint: &Distribution, x_value: Option<usize>) -> Result<Table, EvalError> {
    let mut free = e.free_nodes();
    for n in &free {
        if joint.position(n).is_none() {
            return Err(EvalError::UnknownVariable(n.clone()));
        }
    }
    free.sort_by_key(|n| joint.position(n));
    evaluate_over(e, joint, x_value, &free)
}

/// Like [`evaluate`] but over `output`, which must contain every free
/// variable of `e` and may contain others the estimand does not depend on.
pub fn evaluate_over(
    e: &Estimand,
    joint: &Distribution,
    x_value: Option<usize>,
    output: &[NodeId],
) -> Result<Table, EvalError> {
    e.validate_complete()?;
    let mut fixed: Option<NodeId> = None;
    let mut conflict = None;
    e.visit_terms(&mut |t| {
        if t.binding == Binding::Fixed {
            match &fixed {
                None => fixed = Some(t.node.clone()),
                Some(f) if *f != t.node => conflict = Some((f.clone(), t.node.clone())),
                Some(_) => {}
            }
        }
    });
    if let Some((a, b)) = conflict {
        return Err(EvalError::SeveralFixed(a, b));
    }
    for n in e.free_nodes() {
        if !output.contains(&n) {
            return Err(EvalError::MissingOutput(n));
        }
    }
    let mut cards = Vec::with_capacity(output.len());
    for n in output {
        cards.push(joint.card(n).ok_or_else(|| EvalError::UnknownVariable(n.clone()))?);
    }
    let fixed_value = match &fixed {
        None => 0,
        Some(node) => {
            if output.contains(node) {
                return Err(EvalError::FixedAndFree(node.clone()));
            }
            let card = joint.card(node).ok_or_else(|| EvalError::UnknownVariable(node.clone()))?;
            let v = x_value.ok_or(EvalError::MissingInterventionValue)?;
            if v >= card {
                return Err(EvalError::InterventionOutOfRange {
                    node: node.clone(),
                    value: v,
                });
            }
            v
        }
    };

    let mut compiler = Compiler {
        joint,
        marginals: Vec::new(),
        index: HashMap::new(),
        free_slots: output.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect(),
        fixed_slot: output.len(),
        next_slot: output.len() + 1,
    };
    let op = compiler.compile(e, &mut Vec::new())?;
    let mut machine = Machine {
        marginals: compiler.marginals,
        values: vec![0; compiler.next_slot],
    };
    machine.values[output.len()] = fixed_value;

    let total: usize = cards.iter().product();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        values.push(machine.run(&op)?);
        for d in (0..output.len()).rev() {
            machine.values[d] += 1;
            if machine.values[d] < cards[d] {
                break;
            }
            machine.values[d] = 0;
        }
    }
    Ok(Table {
        variables: output.to_vec(),
        cards,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{SumVar, Term};
    use super::*;

    fn n(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    /// X -> Y with P(x=1) = 0.3, P(y=1|x) = 0.2 / 0.9.
    fn chain() -> Distribution {
        let px = [0.7, 0.3];
        let py = [[0.8, 0.2], [0.1, 0.9]];
        let mut v = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                v.push(px[x] * py[x][y]);
            }
        }
        Distribution::new(vec![n("X"), n("Y")], vec![2, 2], v).unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            Distribution::new(vec![n("A")], vec![2], vec![0.5, 0.6]),
            Err(DistributionError::NotNormalized(_))
        ));
        assert!(matches!(
            Distribution::new(vec![n("A")], vec![2], vec![1.5, -0.5]),
            Err(DistributionError::Negative { index: 1, .. })
        ));
        assert!(matches!(
            Distribution::new(vec![n("A")], vec![3], vec![0.5, 0.5]),
            Err(DistributionError::Shape { .. })
        ));
        assert!(Distribution::new(vec![n("A"), n("A")], vec![1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn marginals() {
        let d = chain();
        let y = d.marginal(&[n("Y")]).unwrap();
        assert!((y.values[1] - (0.7 * 0.2 + 0.3 * 0.9)).abs() < 1e-15);
        let yx = d.marginal(&[n("Y"), n("X")]).unwrap();
        assert!((yx.get(&[1, 0]) - 0.7 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn conditional_with_fixed_value() {
        let d = chain();
        let e = Estimand::prob(vec![Term::free(n("Y"))], vec![Term::fixed(n("X"))]);
        let t = evaluate(&e, &d, Some(1)).unwrap();
        assert_eq!(t.variables, vec![n("Y")]);
        assert!((t.values[1] - 0.9).abs() < 1e-15);
        assert_eq!(evaluate(&e, &d, None), Err(EvalError::MissingInterventionValue));
        assert!(matches!(evaluate(&e, &d, Some(2)), Err(EvalError::InterventionOutOfRange { .. })));
    }

    #[test]
    fn sum_marginalizes() {
        let d = chain();
        let e = Estimand::sum(
            vec![SumVar::new(n("X"))],
            Estimand::product([
                Estimand::prob(vec![Term::free(n("Y"))], vec![Term::bound(n("X"), "x")]),
                Estimand::prob(vec![Term::bound(n("X"), "x")], vec![]),
            ]),
        );
        let t = evaluate(&e, &d, None).unwrap();
        let m = d.marginal(&[n("Y")]).unwrap();
        assert!(t.max_abs_diff(&m).unwrap() < 1e-15);
        let one = evaluate(&Estimand::one(), &d, None).unwrap();
        assert_eq!(one, Table::scalar(1.0));
    }

    #[test]
    fn broadcasts_over_extra_outputs() {
        let d = chain();
        let e = Estimand::prob(vec![Term::free(n("Y"))], vec![]);
        let t = evaluate_over(&e, &d, None, &[n("X"), n("Y")]).unwrap();
        assert_eq!(t.get(&[0, 1]), t.get(&[1, 1]));
        assert!(matches!(
            evaluate_over(&e, &d, None, &[n("X")]),
            Err(EvalError::MissingOutput(_))
        ));
    }

    #[test]
    fn zero_denominator_is_reported() {
        let d = Distribution::new(vec![n("X"), n("Y")], vec![2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let e = Estimand::prob(vec![Term::free(n("Y"))], vec![Term::fixed(n("X"))]);
        assert!(matches!(evaluate(&e, &d, Some(1)), Err(EvalError::ZeroConditioning(_))));
    }
}

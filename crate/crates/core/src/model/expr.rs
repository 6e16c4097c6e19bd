use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Boolean combination of constraint atoms φ1..φ11.
///
/// Serialized as nested objects:
/// `{"op":"and","children":[{"op":"atom","k":2}, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawExpr", into = "RawExpr")]
pub enum ConstraintExpr {
    Atom(u8),
    And(Vec<ConstraintExpr>),
    Or(Vec<ConstraintExpr>),
    Not(Box<ConstraintExpr>),
}

impl ConstraintExpr {
    pub fn atom(k: u8) -> Self {
        ConstraintExpr::Atom(k)
    }

    /// Conjunction of the given atoms.
    pub fn all_of(ks: impl IntoIterator<Item = u8>) -> Self {
        ConstraintExpr::And(ks.into_iter().map(ConstraintExpr::Atom).collect())
    }

    pub fn and(children: Vec<ConstraintExpr>) -> Self {
        ConstraintExpr::And(children)
    }

    pub fn or(children: Vec<ConstraintExpr>) -> Self {
        ConstraintExpr::Or(children)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: ConstraintExpr) -> Self {
        ConstraintExpr::Not(Box::new(child))
    }

    /// The always-true expression (empty conjunction).
    pub fn vacuous() -> Self {
        ConstraintExpr::And(Vec::new())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ConstraintExpr::Atom(k) if (1..=11).contains(k) => Ok(()),
            ConstraintExpr::Atom(k) => Err(ModelError::AtomOutOfRange(*k)),
            ConstraintExpr::And(cs) | ConstraintExpr::Or(cs) => cs.iter().try_for_each(Self::validate),
            ConstraintExpr::Not(c) => c.validate(),
        }
    }

    /// Distinct atom indices mentioned anywhere in the tree.
    pub fn atoms(&self) -> BTreeSet<u8> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<u8>) {
        match self {
            ConstraintExpr::Atom(k) => {
                out.insert(*k);
            }
            ConstraintExpr::And(cs) | ConstraintExpr::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            ConstraintExpr::Not(c) => c.collect_atoms(out),
        }
    }

    pub fn mentions(&self, k: u8) -> bool {
        match self {
            ConstraintExpr::Atom(j) => *j == k,
            ConstraintExpr::And(cs) | ConstraintExpr::Or(cs) => cs.iter().any(|c| c.mentions(k)),
            ConstraintExpr::Not(c) => c.mentions(k),
        }
    }

    /// Evaluates the tree with a caller-supplied atom oracle. `and` over no
    /// children is true, `or` over no children is false.
    pub fn evaluate_with<E>(&self, atom: &mut impl FnMut(u8) -> Result<bool, E>) -> Result<bool, E> {
        Ok(match self {
            ConstraintExpr::Atom(k) => atom(*k)?,
            ConstraintExpr::And(cs) => {
                for c in cs {
                    if !c.evaluate_with(atom)? {
                        return Ok(false);
                    }
                }
                true
            }
            ConstraintExpr::Or(cs) => {
                for c in cs {
                    if c.evaluate_with(atom)? {
                        return Ok(true);
                    }
                }
                false
            }
            ConstraintExpr::Not(c) => !c.evaluate_with(atom)?,
        })
    }

    /// Number of atoms that would have to flip for the expression to hold:
    /// zero when it already holds, the sum over violated children of an
    /// `and`, the cheapest child of an `or`, and one for a violated `not`.
    pub fn violation_count<E>(&self, atom: &mut impl FnMut(u8) -> Result<bool, E>) -> Result<usize, E> {
        if self.evaluate_with(atom)? {
            return Ok(0);
        }
        Ok(match self {
            ConstraintExpr::Atom(_) | ConstraintExpr::Not(_) => 1,
            ConstraintExpr::And(cs) => {
                let mut n = 0;
                for c in cs {
                    n += c.violation_count(atom)?;
                }
                n
            }
            ConstraintExpr::Or(cs) => {
                let mut best = usize::MAX;
                for c in cs {
                    best = best.min(c.violation_count(atom)?);
                }
                best
            }
        })
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, cs: &[ConstraintExpr], sep: &str, empty: &str| {
            if cs.is_empty() {
                return write!(f, "{empty}");
            }
            write!(f, "(")?;
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {sep} ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        };
        match self {
            ConstraintExpr::Atom(k) => write!(f, "φ{k}"),
            ConstraintExpr::And(cs) => join(f, cs, "∧", "true"),
            ConstraintExpr::Or(cs) => join(f, cs, "∨", "false"),
            ConstraintExpr::Not(c) => write!(f, "¬{c}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawExpr {
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<RawExpr>,
}

impl TryFrom<RawExpr> for ConstraintExpr {
    type Error = String;

    fn try_from(raw: RawExpr) -> Result<Self, Self::Error> {
        let children = || {
            raw.children
                .iter()
                .cloned()
                .map(ConstraintExpr::try_from)
                .collect::<Result<Vec<_>, _>>()
        };
        match raw.op.as_str() {
            "atom" => match raw.k {
                Some(k) if (1..=11).contains(&k) => Ok(ConstraintExpr::Atom(k)),
                Some(k) => Err(format!("atom index {k} outside 1..=11")),
                None => Err("atom node without \"k\"".into()),
            },
            "and" => Ok(ConstraintExpr::And(children()?)),
            "or" => Ok(ConstraintExpr::Or(children()?)),
            "not" => {
                let mut cs = children()?;
                if cs.len() != 1 {
                    return Err(format!("\"not\" takes exactly one child, got {}", cs.len()));
                }
                Ok(ConstraintExpr::Not(Box::new(cs.remove(0))))
            }
            other => Err(format!("unknown op {other:?}")),
        }
    }
}

impl From<ConstraintExpr> for RawExpr {
    fn from(e: ConstraintExpr) -> Self {
        match e {
            ConstraintExpr::Atom(k) => RawExpr { op: "atom".into(), k: Some(k), children: vec![] },
            ConstraintExpr::And(cs) => RawExpr { op: "and".into(), k: None, children: cs.into_iter().map(Into::into).collect() },
            ConstraintExpr::Or(cs) => RawExpr { op: "or".into(), k: None, children: cs.into_iter().map(Into::into).collect() },
            ConstraintExpr::Not(c) => RawExpr { op: "not".into(), k: None, children: vec![(*c).into()] },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let e = ConstraintExpr::and(vec![ConstraintExpr::atom(1), ConstraintExpr::not(ConstraintExpr::atom(2))]);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(
            s,
            r#"{"op":"and","children":[{"op":"atom","k":1},{"op":"not","children":[{"op":"atom","k":2}]}]}"#
        );
        let back: ConstraintExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(serde_json::from_str::<ConstraintExpr>(r#"{"op":"atom","k":12}"#).is_err());
        assert!(serde_json::from_str::<ConstraintExpr>(r#"{"op":"atom"}"#).is_err());
        assert!(serde_json::from_str::<ConstraintExpr>(r#"{"op":"not","children":[]}"#).is_err());
        assert!(serde_json::from_str::<ConstraintExpr>(r#"{"op":"xor","children":[]}"#).is_err());
    }

    #[test]
    fn violation_counting() {
        let truth = |k: u8| Ok::<_, ()>(k.is_multiple_of(2));
        let e = ConstraintExpr::all_of([1, 2, 3]);
        assert_eq!(e.violation_count(&mut { truth }).unwrap(), 2);
        let e = ConstraintExpr::or(vec![ConstraintExpr::all_of([1, 3]), ConstraintExpr::atom(5)]);
        assert_eq!(e.violation_count(&mut { truth }).unwrap(), 1);
        assert_eq!(ConstraintExpr::vacuous().violation_count(&mut { truth }).unwrap(), 0);
    }
}

//! Typed constants and the comparison operators used by validity constraints.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A typed constant or an observed property value.
///
/// Sizes are bytes, durations are seconds, counts are plain integers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Value {
    Int(i64),
    Decimal(f64),
    Bool(bool),
    Str(String),
}

/// The scalar type of a [`Value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Decimal,
    Bool,
    Str,
}

impl ValueType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Int | ValueType::Decimal)
    }

    /// Whether a constant of type `other` may be compared against a property of this type.
    pub fn accepts(self, other: ValueType) -> bool {
        self == other || (self.is_numeric() && other.is_numeric())
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Int => "integer",
            ValueType::Decimal => "decimal",
            ValueType::Bool => "boolean",
            ValueType::Str => "string",
        })
    }
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Int,
            Value::Decimal(_) => ValueType::Decimal,
            Value::Bool(_) => ValueType::Bool,
            Value::Str(_) => ValueType::Str,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    /// Total comparison between two values of compatible types.
    ///
    /// Integers and decimals compare numerically; strings lexicographically;
    /// booleans only by equality (`None` for ordering across kinds).
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            _ => {
                let a = self.as_f64()?;
                let b = other.as_f64()?;
                Some(a.total_cmp(&b))
            }
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Decimal(a), Value::Decimal(b)) => a.to_bits() == b.to_bits(),
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Decimal(d) => {
                if d.fract() == 0.0 && d.abs() < 1e15 {
                    write!(f, "{d:.1}")
                } else {
                    write!(f, "{d}")
                }
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Comparison operator of a constraint formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComparisonOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl ComparisonOp {
    pub const ALL: [ComparisonOp; 5] = [
        ComparisonOp::Eq,
        ComparisonOp::Lt,
        ComparisonOp::Gt,
        ComparisonOp::Le,
        ComparisonOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            ComparisonOp::Eq => "=",
            ComparisonOp::Lt => "<",
            ComparisonOp::Gt => ">",
            ComparisonOp::Le => "<=",
            ComparisonOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" | "==" => ComparisonOp::Eq,
            "<" => ComparisonOp::Lt,
            ">" => ComparisonOp::Gt,
            "<=" => ComparisonOp::Le,
            ">=" => ComparisonOp::Ge,
            _ => return None,
        })
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            ComparisonOp::Eq => ord == Ordering::Equal,
            ComparisonOp::Lt => ord == Ordering::Less,
            ComparisonOp::Gt => ord == Ordering::Greater,
            ComparisonOp::Le => ord != Ordering::Greater,
            ComparisonOp::Ge => ord != Ordering::Less,
        }
    }

    /// Applies the operator to `lhs ⊡ rhs`. `None` when the values are not comparable.
    pub fn apply(self, lhs: &Value, rhs: &Value) -> Option<bool> {
        if matches!((lhs, rhs), (Value::Bool(_), Value::Bool(_))) && self != ComparisonOp::Eq {
            return None;
        }
        lhs.compare(rhs).map(|o| self.holds(o))
    }

    /// Complement over a total order: `¬(a ⊡ b)` as a single operator.
    ///
    /// `=` has no single-operator complement; callers handle it separately.
    pub fn complement(self) -> Option<ComparisonOp> {
        match self {
            ComparisonOp::Eq => None,
            ComparisonOp::Lt => Some(ComparisonOp::Ge),
            ComparisonOp::Ge => Some(ComparisonOp::Lt),
            ComparisonOp::Gt => Some(ComparisonOp::Le),
            ComparisonOp::Le => Some(ComparisonOp::Gt),
        }
    }
}

impl fmt::Display for ComparisonOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Parses a numeric literal with an optional unit suffix.
///
/// Binary size suffixes `Ki`, `Mi`, `Gi`, `Ti` multiply by powers of 1024;
/// duration suffixes `s`, `m`, `h` yield seconds.
pub fn parse_quantity(text: &str) -> Option<Value> {
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+'))
        .unwrap_or(text.len());
    let (num, suffix) = text.split_at(split);
    if num.is_empty() {
        return None;
    }
    let mult: i64 = match suffix {
        "" | "s" => 1,
        "Ki" => 1 << 10,
        "Mi" => 1 << 20,
        "Gi" => 1 << 30,
        "Ti" => 1 << 40,
        "m" => 60,
        "h" => 3600,
        _ => return None,
    };
    if num.contains('.') {
        let d: f64 = num.parse().ok()?;
        let scaled = d * mult as f64;
        if suffix.is_empty() {
            Some(Value::Decimal(d))
        } else if scaled.fract() == 0.0 && scaled.abs() < 9.0e15 {
            Some(Value::Int(scaled as i64))
        } else {
            Some(Value::Decimal(scaled))
        }
    } else {
        let i: i64 = num.parse().ok()?;
        i.checked_mul(mult).map(Value::Int)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("8Gi"), Some(Value::Int(8 * (1 << 30))));
        assert_eq!(parse_quantity("1h"), Some(Value::Int(3600)));
        assert_eq!(parse_quantity("2m"), Some(Value::Int(120)));
        assert_eq!(parse_quantity("1.5Ki"), Some(Value::Int(1536)));
        assert_eq!(parse_quantity("0.25"), Some(Value::Decimal(0.25)));
        assert_eq!(parse_quantity("-3"), Some(Value::Int(-3)));
        assert_eq!(parse_quantity("3x"), None);
        assert_eq!(parse_quantity("Gi"), None);
    }

    #[test]
    fn boolean_ordering_is_rejected() {
        let t = Value::Bool(true);
        assert_eq!(ComparisonOp::Eq.apply(&t, &t), Some(true));
        assert_eq!(ComparisonOp::Lt.apply(&t, &t), None);
    }

    #[test]
    fn mixed_numeric_comparison() {
        assert_eq!(ComparisonOp::Le.apply(&Value::Int(3600), &Value::Decimal(3600.0)), Some(true));
        assert_eq!(ComparisonOp::Le.apply(&Value::Int(3601), &Value::Int(3600)), Some(false));
        assert_eq!(ComparisonOp::Eq.apply(&Value::Str("a".into()), &Value::Int(1)), None);
    }

    #[test]
    fn complement_is_negation() {
        for op in ComparisonOp::ALL {
            let Some(c) = op.complement() else { continue };
            for a in -2..=2 {
                let (x, y) = (Value::Int(a), Value::Int(0));
                assert_eq!(op.apply(&x, &y).map(|b| !b), c.apply(&x, &y));
            }
        }
    }
}

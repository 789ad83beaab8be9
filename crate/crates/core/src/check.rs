//! The outcome of checking one inequality or identity on one instance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// `lhs ≤ rhs`
    Inequality,
    /// `lhs = rhs`
    Equality,
}

/// A checked relation between two computed numbers.
///
/// For an inequality the relation is always stated as `lhs ≤ rhs` and the
/// slack is `rhs − lhs`; for an equality the slack is `|lhs − rhs|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub tolerance: f64,
    /// Short description of the instance the check ran on.
    pub witness: String,
    /// Intermediate quantities.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl BoundCheck {
    /// `lhs ≤ rhs` within `tolerance`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            kind: CheckKind::Inequality,
            lhs,
            rhs,
            slack,
            // NaN anywhere fails the check
            holds: lhs <= rhs + tolerance,
            tolerance,
            witness: String::new(),
            details: BTreeMap::new(),
        }
    }

    /// `lhs ≥ rhs` within `tolerance`, stored with the sides swapped.
    pub fn ge(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::le(name, rhs, lhs, tolerance)
    }

    /// `lhs = rhs` within `tolerance`.
    pub fn eq(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = (lhs - rhs).abs();
        Self {
            name: name.into(),
            kind: CheckKind::Equality,
            lhs,
            rhs,
            slack,
            holds: slack <= tolerance,
            tolerance,
            witness: String::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = witness.into();
        self
    }

    pub fn with_detail(mut self, key: impl Into<String>, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }

    /// Re-evaluates `holds` under a different tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.holds = match self.kind {
            CheckKind::Inequality => self.lhs <= self.rhs + tolerance,
            CheckKind::Equality => self.slack <= tolerance,
        };
        self
    }

    /// True when `self` should be reported ahead of `other`: a violation
    /// before a pass, then the smaller margin.
    pub fn is_worse_than(&self, other: &BoundCheck) -> bool {
        rank(self) < rank(other)
    }

    /// Combines several checks of the same relation into the one with the
    /// least slack (a violated check always wins). `None` for an empty input.
    pub fn worst(
        name: impl Into<String>,
        checks: impl IntoIterator<Item = BoundCheck>,
    ) -> Option<Self> {
        let mut count = 0usize;
        let mut worst: Option<BoundCheck> = None;
        for c in checks {
            count += 1;
            let replace = match &worst {
                None => true,
                Some(w) => c.is_worse_than(w),
            };
            if replace {
                worst = Some(c);
            }
        }
        worst.map(|mut w| {
            w.name = name.into();
            w.details.insert("checked".into(), count as f64);
            w
        })
    }
}

/// Sort key: violations first, then by slack (least room first).
fn rank(c: &BoundCheck) -> (bool, f64) {
    let room = match c.kind {
        CheckKind::Inequality => c.slack,
        CheckKind::Equality => -c.slack,
    };
    (
        c.holds,
        if room.is_nan() {
            f64::NEG_INFINITY
        } else {
            room
        },
    )
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.kind {
            CheckKind::Inequality => "<=",
            CheckKind::Equality => "==",
        };
        write!(
            f,
            "{} [{}]: {:.12e} {rel} {:.12e} (slack {:.3e}, tol {:.0e})",
            self.name,
            if self.holds { "ok" } else { "VIOLATED" },
            self.lhs,
            self.rhs,
            self.slack,
            self.tolerance
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inequality_tolerance() {
        assert!(BoundCheck::le("a", 1.0, 1.0, 0.0).holds);
        assert!(BoundCheck::le("a", 1.0 + 1e-12, 1.0, 1e-10).holds);
        assert!(!BoundCheck::le("a", 1.1, 1.0, 1e-10).holds);
        let g = BoundCheck::ge("g", 2.0, 1.0, 0.0);
        assert_eq!((g.lhs, g.rhs, g.slack), (1.0, 2.0, 1.0));
    }

    #[test]
    fn nan_never_holds() {
        assert!(!BoundCheck::le("a", f64::NAN, 1.0, 1.0).holds);
        assert!(!BoundCheck::eq("a", f64::NAN, 1.0, 1.0).holds);
    }

    #[test]
    fn worst_prefers_violations_then_least_slack() {
        let checks = vec![
            BoundCheck::le("x", 0.0, 1.0, 0.0),
            BoundCheck::le("x", 0.9, 1.0, 0.0),
            BoundCheck::le("x", 0.5, 1.0, 0.0),
        ];
        let w = BoundCheck::worst("w", checks.clone()).unwrap();
        assert_eq!(w.lhs, 0.9);
        assert_eq!(w.details["checked"], 3.0);
        let mut with_bad = checks;
        with_bad.push(BoundCheck::le("x", 2.0, 1.0, 0.0));
        assert!(!BoundCheck::worst("w", with_bad).unwrap().holds);
        assert!(BoundCheck::worst("w", Vec::new()).is_none());
    }
}

//! Round-budget and ball-count expressions in `n`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Term {
    Constant,
    Linear,
    LinearLog,
    Quadratic,
}

/// `c`, `c*n`, `c*n*log2(n)` or `c*n^2`, evaluated with a ceiling.
///
/// Accepted spellings include `1000`, `16n`, `16*n`, `n^2`, `2n^2`, `nlogn`,
/// `4 n log2 n`. Whitespace and `*` are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NExpr {
    coefficient: f64,
    term: Term,
}

impl NExpr {
    pub fn constant(value: u64) -> Self {
        NExpr {
            coefficient: value as f64,
            term: Term::Constant,
        }
    }

    pub fn eval(&self, n: usize) -> u64 {
        let n = n as f64;
        let raw = self.coefficient
            * match self.term {
                Term::Constant => 1.0,
                Term::Linear => n,
                Term::LinearLog => n * n.log2(),
                Term::Quadratic => n * n,
            };
        raw.ceil().max(0.0) as u64
    }
}

impl FromStr for NExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |message: &str| Error::Expression {
            expr: s.to_string(),
            message: message.to_string(),
        };
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '*' && *c != '(' && *c != ')')
            .collect::<String>()
            .to_ascii_lowercase();
        if compact.is_empty() {
            return Err(err("empty expression"));
        }
        let split = compact
            .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e'))
            .unwrap_or(compact.len());
        let (num, rest) = compact.split_at(split);
        let coefficient = if num.is_empty() {
            1.0
        } else {
            num.parse::<f64>().map_err(|_| err("invalid coefficient"))?
        };
        if !coefficient.is_finite() || coefficient < 0.0 {
            return Err(err("coefficient must be a non-negative number"));
        }
        let term = match rest {
            "" => Term::Constant,
            "n" => Term::Linear,
            "n^2" | "nn" | "n2" => Term::Quadratic,
            "nlogn" | "nlog2n" | "nlog_2n" => Term::LinearLog,
            _ => return Err(err("expected c, c*n, c*n*log2(n) or c*n^2")),
        };
        Ok(NExpr { coefficient, term })
    }
}

impl fmt::Display for NExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.term {
            Term::Constant => "",
            Term::Linear => "n",
            Term::LinearLog => "nlogn",
            Term::Quadratic => "n^2",
        };
        if self.coefficient == 1.0 && self.term != Term::Constant {
            write!(f, "{suffix}")
        } else {
            write!(f, "{}{suffix}", self.coefficient)
        }
    }
}

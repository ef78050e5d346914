use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Vacuous in this configuration (e.g. `(0,2)`-forms when `n = 1`).
    Skip,
    /// Over tolerance in a configuration known to alias products.
    Flagged,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skip => "skip",
            Self::Flagged => "flagged",
        })
    }
}

/// Outcome of one identity check. `residual` is relative unless the check
/// says otherwise.
#[derive(Clone, Debug)]
pub struct OperatorReport {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
    pub context: String,
}

impl OperatorReport {
    /// Pass iff `residual ≤ tolerance`; NaN fails.
    pub fn check(name: impl Into<String>, residual: f64, tolerance: f64, context: impl Into<String>) -> Self {
        let status = if residual <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { name: name.into(), residual, tolerance, status, context: context.into() }
    }

    pub fn skipped(name: impl Into<String>, context: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            residual: 0.0,
            tolerance: 0.0,
            status: CheckStatus::Skip,
            context: context.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    /// Downgrades a failure to `Flagged`.
    pub fn flag_failure(mut self) -> Self {
        if self.status == CheckStatus::Fail {
            self.status = CheckStatus::Flagged;
        }
        self
    }
}

impl fmt::Display for OperatorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<36} residual={:<11.3e} tol={:<9.1e} {:<7} {}",
            self.name, self.residual, self.tolerance, self.status, self.context
        )
    }
}

/// `‖diff‖ / scale`, or `‖diff‖` when the scale vanishes.
pub fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

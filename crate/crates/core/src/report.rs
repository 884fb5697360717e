//! Verdicts with explicit tolerance accounting.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of the JSON encoding of `value`.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serialisable value");
    let hash = Sha256::digest(&json);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Relative floating-point slack added to every tolerance.
pub const ROUND_OFF: f64 = 1e-12;

/// Absolute slack for comparing `lhs` with `rhs`: `ROUND_OFF · (1 + |lhs| + |rhs|)`.
pub fn round_off(lhs: f64, rhs: f64) -> f64 {
    ROUND_OFF * (1.0 + lhs.abs() + rhs.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "HOLDS",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Evidence that the hypotheses of a check were verified.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct Hypotheses {
    /// Curvature constant used by the check.
    pub k: Option<f64>,
    /// Digest of the curvature-bound report behind `k`.
    pub k_digest: Option<String>,
    /// Digest of the class-𝒟 report, where class 𝒟 is required.
    pub class_d_digest: Option<String>,
    /// `sup φ` over the verification grid.
    pub phi_sup: Option<f64>,
    /// Unmet hypotheses; empty when all were verified.
    pub unmet: Vec<String>,
}

impl Hypotheses {
    pub fn verified(&self) -> bool {
        self.unmet.is_empty() && (self.k_digest.is_some() || self.class_d_digest.is_some())
    }

    pub fn fail(&mut self, why: impl Into<String>) {
        self.unmet.push(why.into());
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub id: String,
    /// Digest of the experiment configuration (set by the runner).
    pub config_digest: String,
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Three combined Monte Carlo standard errors.
    pub stat_tol: f64,
    pub oracle_tol: f64,
    pub bias_tol: f64,
    pub verdict: Verdict,
    /// `rhs − lhs`
    pub margin: f64,
    /// This check is expected to fail (designated negative test).
    pub negative: bool,
    pub hypotheses: Hypotheses,
    pub note: Option<String>,
}

impl CheckReport {
    /// Assesses `lhs ≤ rhs` within `stat + oracle + bias`, plus round-off.
    #[allow(clippy::too_many_arguments)]
    pub fn assess(
        id: &str,
        case: String,
        lhs: f64,
        rhs: f64,
        stat_tol: f64,
        oracle_tol: f64,
        bias_tol: f64,
        hypotheses: Hypotheses,
    ) -> Self {
        let total = stat_tol + oracle_tol + bias_tol;
        let verdict = if lhs.is_nan() || rhs.is_nan() {
            Verdict::Inconclusive
        } else if lhs > rhs + total + round_off(lhs, rhs) {
            Verdict::Violated
        } else if hypotheses.verified() {
            Verdict::Holds
        } else {
            Verdict::Inconclusive
        };
        Self {
            id: id.to_string(),
            config_digest: String::new(),
            case,
            lhs,
            rhs,
            stat_tol,
            oracle_tol,
            bias_tol,
            verdict,
            margin: rhs - lhs,
            negative: false,
            hypotheses,
            note: None,
        }
    }

    pub fn inconclusive(id: &str, case: String, reason: impl Into<String>, hypotheses: Hypotheses) -> Self {
        let mut r = Self::assess(id, case, f64::NAN, f64::NAN, 0.0, 0.0, 0.0, hypotheses);
        r.verdict = Verdict::Inconclusive;
        r.note = Some(reason.into());
        r
    }

    pub fn total_tol(&self) -> f64 {
        self.stat_tol + self.oracle_tol + self.bias_tol
    }

    pub fn as_negative(mut self) -> Self {
        self.negative = true;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Whether this report is consistent with expectations: positive checks
    /// must not be violated, negative checks must be.
    pub fn acceptable(&self) -> bool {
        if self.negative {
            self.verdict == Verdict::Violated
        } else {
            self.verdict != Verdict::Violated
        }
    }
}

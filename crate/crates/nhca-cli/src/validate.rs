//! Configuration diagnostics. Never fails: every problem becomes a message.

use nhca_core::grid::GridKind;
use nhca_core::kernel::Truncation;
use nhca_core::measure::AtomicMeasure;
use serde::Serialize;

use crate::args::ValidateArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Validation {
    pub ok: bool,
    pub dim: usize,
    pub alpha: f64,
    /// `k = n − [α] + δ(α − [α])`.
    pub required_grid_count: usize,
    /// Face dimensions `r` whose grids must be scanned.
    pub required_r: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Grid count with `δ` the Kronecker delta at zero.
pub fn required_grid_count(dim: usize, alpha: f64) -> usize {
    let whole = alpha.floor();
    let kronecker = usize::from(alpha == whole);
    (dim + kronecker).saturating_sub(whole as usize).min(dim)
}

pub fn validate(a: &ValidateArgs) -> Validation {
    let mut diags = Vec::new();
    let mut push = |severity, message: String| diags.push(Diagnostic { severity, message });

    let mu = a.measure.as_ref().and_then(|p| match AtomicMeasure::load(p) {
        Ok(mu) => Some(mu),
        Err(e) => {
            push(Severity::Error, format!("{}: {e}", p.display()));
            None
        }
    });
    let dim = mu.as_ref().map(|m| m.dim()).or(a.dim).unwrap_or(2);
    let alpha = mu.as_ref().map(|m| m.alpha()).or(a.alpha).unwrap_or(1.0);
    if let Some(mu) = &mu {
        if a.dim.is_some_and(|d| d != dim) {
            push(Severity::Warning, format!("--dim ignored: the measure has dimension {dim}"));
        }
        push(
            Severity::Info,
            format!("{} atoms, resolution 2^{}", mu.len(), -mu.resolution_level()),
        );
    }
    if !(alpha > 0.0 && alpha <= dim as f64) {
        push(Severity::Error, format!("alpha = {alpha} must lie in (0, {dim}]"));
    }

    let k = required_grid_count(dim, alpha);
    let required_r: Vec<usize> = (dim + 1 - k.max(1)..=dim).rev().collect();

    if let Some(levels) = a.levels {
        if let Some(mu) = &mu {
            if levels.hi > mu.resolution_level() {
                push(
                    Severity::Error,
                    format!("level {} is finer than the resolution level {}", levels.hi, mu.resolution_level()),
                );
            }
        }
    }
    if let Some(m) = a.m {
        if m.lo < 0 {
            push(Severity::Error, format!("--M {m} must be nonnegative"));
        }
        if m.hi - m.lo < 2 {
            push(Severity::Error, format!("--M {m} needs at least three windows"));
        }
    }
    if let Some(gamma) = a.gamma {
        if let Err(e) = Truncation::new(gamma, a.big_q.unwrap_or(2)) {
            push(Severity::Error, e.to_string());
        }
    }
    if let Some(grids) = &a.grids {
        for &r in &required_r {
            let covered = grids.0.iter().any(|g| match *g {
                GridKind::Boundary(b) => usize::from(b) == r,
                _ => r == dim,
            });
            if !covered {
                let hint = if r == dim { "std".to_string() } else { format!("bd{r}") };
                push(Severity::Warning, format!("no grid for r = {r}; add {hint}"));
            }
        }
        for g in &grids.0 {
            if let GridKind::Boundary(b) = g {
                if usize::from(*b) >= dim {
                    push(Severity::Error, format!("{g} needs faces of dimension below {dim}"));
                }
            }
        }
    }
    let ok = !diags.iter().any(|d| d.severity == Severity::Error);
    Validation {
        ok,
        dim,
        alpha,
        required_grid_count: k,
        required_r,
        diagnostics: diags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(dim: usize, alpha: f64) -> ValidateArgs {
        ValidateArgs {
            measure: None,
            dim: Some(dim),
            alpha: Some(alpha),
            grids: None,
            levels: None,
            m: None,
            gamma: None,
            big_q: None,
        }
    }

    #[test]
    fn grid_counts() {
        let v = validate(&args(2, 1.0));
        assert_eq!((v.required_grid_count, v.required_r.clone()), (2, vec![2, 1]));
        let v = validate(&args(2, 2.0));
        assert_eq!((v.required_grid_count, v.required_r.clone()), (1, vec![2]));
        assert_eq!(required_grid_count(2, 1.5), 1);
        assert_eq!(required_grid_count(3, 1.0), 3);
        assert_eq!(required_grid_count(1, 1.0), 1);
    }

    #[test]
    fn missing_face_grid_is_reported() {
        let mut a = args(2, 1.0);
        a.grids = Some("std".parse().unwrap());
        let v = validate(&a);
        assert!(v.ok);
        assert!(v.diagnostics.iter().any(|d| d.message.contains("bd1")));
        a.grids = Some("std,bd1".parse().unwrap());
        assert!(validate(&a).diagnostics.is_empty());
    }

    #[test]
    fn bad_inputs_are_errors() {
        let mut a = args(2, 3.0);
        a.m = Some("1..2".parse().unwrap());
        a.gamma = Some(100.0);
        let v = validate(&a);
        assert!(!v.ok);
        assert_eq!(v.diagnostics.iter().filter(|d| d.severity == Severity::Error).count(), 3);
    }
}

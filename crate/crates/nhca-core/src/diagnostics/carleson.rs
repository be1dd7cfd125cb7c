//! Carleson embedding: `Σ a_I |⟨f⟩_I|² <= C₀ · packing · ‖f‖²`.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{corner_of, CubeId};
use crate::haar::HaarSystem;
use crate::measure::AtomicMeasure;
use crate::operator::apply;
use crate::reduce::pairwise_sum;

/// Embedding constant of the dyadic Carleson lemma.
pub const CARLESON_C0: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarlesonReport {
    pub packing_constant: f64,
    /// Cube attaining the packing supremum.
    pub packing_cube: Option<CubeId>,
    /// `max_f lhs/(packing·‖f‖²) − C₀`.
    pub max_violation: f64,
    pub ratios: Vec<f64>,
    pub coefficients: usize,
}

/// Averages `⟨f⟩_I` for every cube of `ids`, grouped by level.
fn averages(mu: &AtomicMeasure, ids: &[&CubeId], f: &[Complex64]) -> Vec<Complex64> {
    let mut by_level: BTreeMap<(i32, u64), HashMap<_, (f64, Complex64)>> = BTreeMap::new();
    for id in ids {
        by_level.entry((id.level, id.grid.shift().to_bits())).or_default();
    }
    for ((level, shift), cells) in by_level.iter_mut() {
        for (a, fa) in f.iter().enumerate() {
            let c = corner_of(mu.point(a), f64::from_bits(*shift), *level);
            let e = cells.entry(c).or_insert((0.0, Complex64::new(0.0, 0.0)));
            e.0 += mu.weight(a);
            e.1 += fa * mu.weight(a);
        }
    }
    ids.iter()
        .map(|id| {
            by_level[&(id.level, id.grid.shift().to_bits())]
                .get(&id.corner)
                .filter(|(m, _)| *m > 0.0)
                .map_or(Complex64::new(0.0, 0.0), |(m, s)| s / m)
        })
        .collect()
}

pub fn carleson_check(
    coeffs: &BTreeMap<CubeId, f64>,
    mu: &AtomicMeasure,
    f_samples: &[Vec<Complex64>],
) -> Result<CarlesonReport> {
    let negative: Vec<String> = coeffs
        .iter()
        .filter(|(_, a)| a.is_nan() || **a < 0.0)
        .map(|(id, a)| format!("a_I = {a} at {}", id.corner_string()))
        .collect();
    if !negative.is_empty() {
        return Err(Error::Validation(negative));
    }
    let coarsest = coeffs.keys().map(|id| id.level).min();
    // Σ_{J⊆R} a_J for every ancestor R of the support
    let mut packed: BTreeMap<CubeId, f64> = BTreeMap::new();
    if let Some(top) = coarsest {
        for (id, a) in coeffs {
            for level in (top..=id.level).rev() {
                *packed.entry(id.ancestor(level)).or_default() += a;
            }
        }
    }
    let mut packing_constant = 0.0;
    let mut packing_cube = None;
    for (r, sum) in &packed {
        if *sum == 0.0 {
            continue;
        }
        let m = mu.mass_of(&mu.atoms_in_id(r));
        let v = if m > 0.0 { sum / m } else { f64::INFINITY };
        if v > packing_constant {
            packing_constant = v;
            packing_cube = Some(r.clone());
        }
    }
    let ids: Vec<&CubeId> = coeffs.keys().collect();
    let weights: Vec<f64> = coeffs.values().copied().collect();
    let ratios: Vec<f64> = f_samples
        .iter()
        .map(|f| {
            let avg = averages(mu, &ids, f);
            let lhs = pairwise_sum(weights.iter().zip(&avg).map(|(a, v)| a * v.norm_sqr()));
            let denom = packing_constant * mu.norm2(f);
            if lhs == 0.0 {
                0.0
            } else {
                lhs / denom
            }
        })
        .collect();
    let max_violation = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max) - CARLESON_C0;
    Ok(CarlesonReport {
        packing_constant,
        packing_cube,
        max_violation: if ratios.is_empty() { -CARLESON_C0 } else { max_violation },
        ratios,
        coefficients: coeffs.len(),
    })
}

/// `a_I = |⟨Tχ_Q, ψ_I⟩|²` for the wavelets of `sys` inside `q`.
pub fn paraproduct_family(
    k: &crate::kernel::KernelSpec,
    sys: &HaarSystem<'_>,
    q: &CubeId,
) -> Result<BTreeMap<CubeId, f64>> {
    let mu = sys.mu;
    let chi: Vec<Complex64> = (0..mu.len())
        .map(|a| Complex64::new(if q.contains(mu.point(a)) { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let t = apply(k, mu, &chi)?;
    Ok(sys
        .analyze(&t)
        .entries
        .into_iter()
        .filter(|(id, _)| id.is_within(q) && id != q)
        .map(|(id, c)| (id, c.norm_sqr()))
        .collect())
}

//! Two-bump decay: wavelet pair values against their envelope bounds.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{range, Error, Result};
use crate::geometry::{ec, inrdist};
use crate::grid::{Cube, GridKind};
use crate::haar::{top_level, HaarSystem};
use crate::kernel::{EnvelopeCtx, KernelSpec};
use crate::operator::{apply, wavelets, PairTable, WaveletRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpMode {
    Separated,
    Nested,
}

/// `α/(α+δ/2)`.
pub fn default_theta(alpha: f64, delta: f64) -> f64 {
    alpha / (alpha + delta / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpRow {
    pub e: i32,
    pub m_or_k: u64,
    pub pairs: usize,
    pub sup_ratio: f64,
    pub mean_ratio: f64,
    /// Ratio against the eccentricity-weighted bound, where it applies.
    pub sup_ratio_alt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpReport {
    pub mode: BumpMode,
    pub depth: i32,
    pub theta: f64,
    pub delta: f64,
    pub sup_ratio: f64,
    pub rows: Vec<BumpRow>,
    pub admissible: usize,
    /// Pairs of the right geometric type that fail the gap condition.
    pub excluded: usize,
    /// Largest certified tail bound of the envelope series used.
    pub max_tail_bound: f64,
}

struct Sample {
    key: (i32, u64),
    ratio: f64,
    alt: Option<f64>,
    tail: f64,
}

fn mass(sys: &HaarSystem<'_>, w: &WaveletRef) -> (f64, f64) {
    let lv = &sys.levels[w.level_index];
    (lv.mass[w.cell], sys.levels[w.level_index - 1].mass[w.parent])
}

/// Mass of `R ∩ J` for `R ∈ {I, I_p}` via the atom cells of the system.
fn overlap_mass(sys: &HaarSystem<'_>, r_level: usize, r_cell: usize, j: &WaveletRef) -> f64 {
    let rl = &sys.levels[r_level];
    let jl = &sys.levels[j.level_index];
    let mu = sys.mu;
    let total: f64 = (0..mu.len())
        .filter(|&a| rl.atom_cell[a] as usize == r_cell && jl.atom_cell[a] as usize == j.cell)
        .map(|a| mu.weight(a))
        .sum();
    total
}

/// Ratios of `|⟨Tψ_I,ψ_J⟩|` (separated) or `|⟨T(ψ_I − ψ^full_{I,J}),ψ_J⟩|`
/// (nested) to the two-bump bounds, over `depth` wavelet levels below the top.
pub fn bump_report(
    k: &KernelSpec,
    mu: &crate::measure::AtomicMeasure,
    mode: BumpMode,
    depth: i32,
    theta: Option<f64>,
    delta: f64,
) -> Result<BumpReport> {
    if depth < 1 {
        return Err(range(format!("depth {depth} must be at least 1")));
    }
    let k = k.clone().with_delta(delta)?;
    let alpha = k.alpha;
    let theta = theta.unwrap_or_else(|| default_theta(alpha, delta));
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(range(format!("theta {theta} must lie in (0, 1]")));
    }
    let grid = GridKind::Standard;
    let top = top_level(mu, grid);
    let end = top + depth;
    if end > mu.resolution_level() {
        return Err(range(format!(
            "depth {depth} reaches level {end}, finer than the resolution level {}",
            mu.resolution_level()
        )));
    }
    let sys = HaarSystem::new(mu, grid, Some((top + 1)..=end))?;
    let table = PairTable::new(&k, &sys)?;
    let ws = wavelets(&sys);
    let ctx = EnvelopeCtx::of(&k);
    // ⟨T1, ψ_J⟩ for the full-wavelet correction
    let t1 = match mode {
        BumpMode::Nested => Some(sys.analyze(&apply(&k, mu, &vec![Complex64::new(1.0, 0.0); mu.len()])?)),
        BumpMode::Separated => None,
    };
    let results: Vec<(Vec<Sample>, usize)> = ws
        .par_iter()
        .map(|i| {
            let ic = i.cube();
            let ipc = i.parent_cube();
            let (mi, mip) = mass(&sys, i);
            let mut out = Vec::new();
            let mut excluded = 0;
            for j in &ws {
                if std::ptr::eq(i, j) {
                    continue;
                }
                let jc = j.cube();
                let jpc = j.parent_cube();
                let between = ipc.dist(&jpc);
                let nested = jpc.side < ipc.side && jpc.is_within(&ipc);
                let right_type = match mode {
                    BumpMode::Separated => between > 0.0,
                    BumpMode::Nested => nested,
                };
                if !right_type {
                    continue;
                }
                let ecc = ec(&ic, &jc);
                let ir = inrdist(&ipc, &jpc);
                let gap = ecc.powf(theta) * (ir - 1.0);
                let passes = match mode {
                    BumpMode::Separated => gap > 1.0,
                    BumpMode::Nested => gap >= 1.0,
                };
                if !passes {
                    excluded += 1;
                    continue;
                }
                let (mj, _) = mass(&sys, j);
                let e = j.id.level - i.id.level;
                let meet = ic.side.min(jc.side);
                let root = (mi * mj).sqrt();
                let pair = table.pair(i, j);
                let sample = match mode {
                    BumpMode::Separated => {
                        let bound = ir.powf(-(alpha + delta)) * root / meet.powf(alpha) * ctx.f1(&ipc, &jpc);
                        let m = ipc.rdist(&jpc).floor() as u64;
                        let join_p = ipc.side.max(jpc.side);
                        // eccentricity-weighted form for well-separated parents
                        let alt = (join_p <= between).then(|| {
                            let join = ic.side.max(jc.side);
                            let b = ecc.powf(delta) * ipc.rdist(&jpc).powf(-(alpha + delta)) * root
                                / join.powf(alpha)
                                * ctx.f1(&ipc, &jpc);
                            pair.norm() / b
                        });
                        Sample {
                            key: (e, m),
                            ratio: pair.norm() / bound,
                            alt,
                            tail: 0.0,
                        }
                    }
                    BumpMode::Nested => {
                        let c = jpc.center.clone();
                        let chi = |q: &Cube| if q.contains(&c) { 1.0 } else { 0.0 };
                        let konst = mi.sqrt() * (chi(&ic) / mi - chi(&ipc) / mip);
                        let t1j = t1.as_ref().map_or(Complex64::new(0.0, 0.0), |m| m.get(&j.id));
                        let value = (pair - t1j * konst).norm();
                        let f2 = ctx.f2mu(mu, &ic, &jc, &ipc, &jpc);
                        let f3 = ctx.f3(&ic, &jc, &ipc, &jpc);
                        let over = [(i.level_index, i.cell, mi), (i.level_index - 1, i.parent, mip)]
                            .iter()
                            .map(|&(l, c, m)| (overlap_mass(&sys, l, c, j) / m).sqrt())
                            .sum::<f64>();
                        let outside = chi(&ipc) * (1.0 - chi(&ic));
                        let bound = ir.powf(-delta) * over * f2.value
                            + ir.powf(-(alpha + delta)) * root / meet.powf(alpha) * outside * f3.value;
                        Sample {
                            key: (e, ir.floor() as u64),
                            ratio: value / bound,
                            alt: None,
                            tail: f2.tail_bound.max(f3.tail_bound),
                        }
                    }
                };
                out.push(sample);
            }
            (out, excluded)
        })
        .collect();
    // (pairs, sup, sum, sup of the alternative ratio)
    type Tally = (usize, f64, f64, Option<f64>);
    let mut buckets: BTreeMap<(i32, u64), Tally> = BTreeMap::new();
    let mut excluded = 0;
    let mut admissible = 0;
    let mut max_tail: f64 = 0.0;
    for (samples, ex) in results {
        excluded += ex;
        admissible += samples.len();
        for s in samples {
            let b = buckets.entry(s.key).or_insert((0, 0.0, 0.0, None));
            b.0 += 1;
            b.1 = b.1.max(s.ratio);
            b.2 += s.ratio;
            if let Some(a) = s.alt {
                b.3 = Some(b.3.map_or(a, |x: f64| x.max(a)));
            }
            max_tail = max_tail.max(s.tail);
        }
    }
    if admissible == 0 {
        return Err(Error::EmptyScan(format!(
            "no admissible {mode:?} pairs within depth {depth} (excluded {excluded})"
        )));
    }
    let rows: Vec<BumpRow> = buckets
        .into_iter()
        .map(|((e, m), (n, sup, sum, alt))| BumpRow {
            e,
            m_or_k: m,
            pairs: n,
            sup_ratio: sup,
            mean_ratio: sum / n as f64,
            sup_ratio_alt: alt,
        })
        .collect();
    Ok(BumpReport {
        mode,
        depth,
        theta,
        delta,
        sup_ratio: rows.iter().map(|r| r.sup_ratio).fold(0.0, f64::max),
        rows,
        admissible,
        excluded,
        max_tail_bound: max_tail,
    })
}

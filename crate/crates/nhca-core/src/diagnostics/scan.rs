//! Testing scans over grid families and the compactness table built on them.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{range, Error, Result};
use crate::grid::{corner_of, in_lagom, pow2, Corner, CubeId, GridKind};
use crate::kernel::KernelSpec;
use crate::measure::{density_profile, generate, AtomicMeasure, MeasureKind, RhoInMode};
use crate::operator::{testing_stat_region, BoundKernel, TestingStat};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanConfig {
    pub grids: Vec<GridKind>,
    pub levels: RangeInclusive<i32>,
    /// Each entry is 1 or 2.
    pub dilations: Vec<f64>,
}

impl ScanConfig {
    pub fn aligned(levels: RangeInclusive<i32>) -> Self {
        Self {
            grids: vec![GridKind::Standard],
            levels,
            dilations: vec![1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub grid: String,
    pub level: i32,
    pub dilation: f64,
    pub cubes: usize,
    pub sup_f_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub stats: Vec<TestingStat>,
    pub per_level: Vec<LevelSummary>,
    /// No tested cube carried mass.
    pub empty: bool,
}

/// Cubes of `grid` at `level` whose `dilation`-dilate meets the support.
pub fn candidate_cubes(mu: &AtomicMeasure, grid: GridKind, level: i32, dilation: f64) -> Vec<CubeId> {
    let mut set: BTreeSet<CubeId> = BTreeSet::new();
    match grid {
        GridKind::Boundary(r) => {
            let n = mu.dim();
            let masks: Vec<u8> = (0u32..1 << n)
                .filter(|m| m.count_ones() as usize == n - usize::from(r))
                .map(|m| m as u8)
                .collect();
            let scale = pow2(level);
            for i in 0..mu.len() {
                let x = mu.point(i);
                for &mask in &masks {
                    let on_plane = (0..n).all(|a| mask & (1 << a) == 0 || (x[a] * scale).fract() == 0.0);
                    if on_plane {
                        let corner: Corner = x.iter().map(|v| (v * scale).floor() as i64).collect();
                        set.insert(CubeId {
                            grid,
                            level,
                            corner,
                            open: false,
                            frozen: mask,
                        });
                    }
                }
            }
        }
        _ => {
            let shift = grid.shift();
            for i in 0..mu.len() {
                set.insert(CubeId {
                    grid,
                    level,
                    corner: corner_of(mu.point(i), shift, level),
                    open: false,
                    frozen: 0,
                });
            }
        }
    }
    if dilation > 1.0 {
        // 2I meets exactly the neighbours sharing a closed face or corner
        let base: Vec<CubeId> = set.iter().cloned().collect();
        for id in base {
            let free: Vec<usize> = (0..id.dim()).filter(|&a| !id.is_frozen(a)).collect();
            for code in 0..3usize.pow(free.len() as u32) {
                let mut c = id.clone();
                let mut k = code;
                for &a in &free {
                    c.corner[a] += (k % 3) as i64 - 1;
                    k /= 3;
                }
                set.insert(c);
            }
        }
    }
    set.into_iter().collect()
}

pub fn testing_scan(k: &KernelSpec, mu: &AtomicMeasure, cfg: &ScanConfig) -> Result<ScanResult> {
    if cfg.grids.is_empty() || cfg.levels.is_empty() || cfg.dilations.is_empty() {
        return Err(Error::EmptyScan("no grid, level or dilation requested".into()));
    }
    if *cfg.levels.end() > mu.resolution_level() {
        return Err(range(format!(
            "scan level {} is finer than the resolution level {}",
            cfg.levels.end(),
            mu.resolution_level()
        )));
    }
    if let Some(d) = cfg.dilations.iter().find(|d| **d != 1.0 && **d != 2.0) {
        return Err(range(format!("dilation {d} is not 1 or 2")));
    }
    for g in &cfg.grids {
        if let GridKind::Boundary(r) = g {
            if *r == 0 || usize::from(*r) >= mu.dim() {
                return Err(range(format!("boundary dimension {r} needs 1 <= r < {}", mu.dim())));
            }
        }
    }
    let bound = BoundKernel::new(k, mu);
    let mut stats = Vec::new();
    let mut per_level = Vec::new();
    for &grid in &cfg.grids {
        for level in cfg.levels.clone() {
            for &dilation in &cfg.dilations {
                let cubes = candidate_cubes(mu, grid, level, dilation);
                let found: Vec<TestingStat> = cubes
                    .par_iter()
                    .map(|id| testing_stat_region(&bound, id, dilation))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .filter(|s| !s.empty)
                    .collect();
                per_level.push(LevelSummary {
                    grid: grid.tag(),
                    level,
                    dilation,
                    cubes: found.len(),
                    sup_f_t: found.iter().map(|s| s.f_t).fold(0.0, f64::max),
                });
                stats.extend(found);
            }
        }
    }
    let empty = stats.is_empty();
    Ok(ScanResult { stats, per_level, empty })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BoundedNoncompact,
    CompactConsistent,
    UnboundedSuspected,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::BoundedNoncompact => "bounded_noncompact",
            Verdict::CompactConsistent => "compact_consistent",
            Verdict::UnboundedSuspected => "unbounded_suspected",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Decay, growth and flatness thresholds for verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerdictPolicy {
    /// Compact when `last <= decay * first` for both sequences.
    pub decay: f64,
    /// Unbounded when `last >= growth * first` for `f_t`.
    pub growth: f64,
    /// Flat when every value lies within `flat * first` of the first.
    pub flat: f64,
}

impl Default for VerdictPolicy {
    fn default() -> Self {
        Self {
            decay: 0.8,
            growth: 1.5,
            flat: 0.1,
        }
    }
}

pub fn classify(f_t: &[f64], rho_mu: &[f64], policy: &VerdictPolicy) -> Verdict {
    let (Some(f0), Some(f1)) = (f_t.first(), f_t.last()) else {
        return Verdict::Inconclusive;
    };
    let flat = |v: &[f64]| v.iter().all(|x| (x - v[0]).abs() <= policy.flat * v[0].abs());
    let decays = |v: &[f64]| v[v.len() - 1] <= policy.decay * v[0];
    if *f0 > 0.0 && *f1 >= policy.growth * f0 {
        Verdict::UnboundedSuspected
    } else if decays(f_t) && !rho_mu.is_empty() && decays(rho_mu) {
        Verdict::CompactConsistent
    } else if flat(f_t) && !rho_mu.is_empty() && flat(rho_mu) {
        Verdict::BoundedNoncompact
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactRow {
    #[serde(rename = "M")]
    pub m: u32,
    pub sup_f_t: f64,
    pub sup_rho_mu: f64,
    /// Scanned cubes inside `𝒟_M`.
    pub cube_count: usize,
    /// Scanned cubes in the complement.
    pub complement_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactnessTable {
    pub rows: Vec<CompactRow>,
    pub verdict: Verdict,
    pub policy: VerdictPolicy,
    pub delta: f64,
    pub scan: ScanConfig,
}

/// Per-cube `ρ_μ` of every scanned region.
pub fn rho_mu_of(mu: &AtomicMeasure, stats: &[TestingStat], delta: f64) -> Result<Vec<f64>> {
    stats
        .par_iter()
        .map(|s| {
            let region = s.cube.to_cube().dilate(s.dilation);
            Ok(density_profile(mu, &region, delta, RhoInMode::Balls)?.rho_mu)
        })
        .collect()
}

pub fn compactness_table(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    m_range: RangeInclusive<u32>,
    delta: f64,
    cfg: &ScanConfig,
    policy: &VerdictPolicy,
) -> Result<CompactnessTable> {
    let ms: Vec<u32> = m_range.collect();
    if ms.len() < 3 {
        return Err(Error::InsufficientRange { got: ms.len(), need: 3 });
    }
    let scan = testing_scan(k, mu, cfg)?;
    if scan.empty {
        return Err(Error::EmptyScan("no scanned cube carries mass".into()));
    }
    let rho = rho_mu_of(mu, &scan.stats, delta)?;
    let regions: Vec<_> = scan.stats.iter().map(|s| s.cube.to_cube().dilate(s.dilation)).collect();
    let rows: Vec<CompactRow> = ms
        .iter()
        .map(|&m| {
            let mut row = CompactRow {
                m,
                sup_f_t: 0.0,
                sup_rho_mu: 0.0,
                cube_count: 0,
                complement_count: 0,
            };
            for (i, s) in scan.stats.iter().enumerate() {
                if in_lagom(&regions[i], m) {
                    row.cube_count += 1;
                } else {
                    row.complement_count += 1;
                    row.sup_f_t = row.sup_f_t.max(s.f_t);
                    row.sup_rho_mu = row.sup_rho_mu.max(rho[i]);
                }
            }
            row
        })
        .collect();
    let f: Vec<f64> = rows.iter().map(|r| r.sup_f_t).collect();
    let r: Vec<f64> = rows.iter().map(|r| r.sup_rho_mu).collect();
    // a window whose complement was never scanned carries no information
    let verdict = if rows.iter().any(|r| r.complement_count == 0) {
        Verdict::Inconclusive
    } else {
        classify(&f, &r, policy)
    };
    Ok(CompactnessTable {
        verdict,
        rows,
        policy: *policy,
        delta,
        scan: cfg.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub generation: u32,
    pub f_t: f64,
    pub rho_mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationSweep {
    pub rows: Vec<SweepRow>,
    pub verdict: Verdict,
    pub policy: VerdictPolicy,
}

/// Top-square testing ratio of the quarter-Cantor measures across generations.
pub fn cantor_sweep(
    k: &KernelSpec,
    generations: RangeInclusive<u32>,
    delta: f64,
    policy: &VerdictPolicy,
) -> Result<GenerationSweep> {
    let gens: Vec<u32> = generations.collect();
    if gens.len() < 3 {
        return Err(Error::InsufficientRange { got: gens.len(), need: 3 });
    }
    let top = CubeId::standard(0, &[0, 0]);
    let rows = gens
        .iter()
        .map(|&g| {
            let mu = generate(&MeasureKind::Cantor4 { generation: g })?;
            let stat = testing_stat_region(&BoundKernel::new(k, &mu), &top, 1.0)?;
            let rho = density_profile(&mu, &top.to_cube(), delta, RhoInMode::Dyadic)?;
            Ok(SweepRow {
                generation: g,
                f_t: stat.f_t,
                rho_mu: rho.rho_mu,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f: Vec<f64> = rows.iter().map(|r| r.f_t).collect();
    let r: Vec<f64> = rows.iter().map(|r| r.rho_mu).collect();
    Ok(GenerationSweep {
        verdict: classify(&f, &r, policy),
        rows,
        policy: *policy,
    })
}

//! Measure-adapted Haar wavelets, martingale operators and coefficient maps.
//!
//! `ψ_I = μ(I)^{1/2} (χ_I / μ(I) − χ_{I_p} / μ(I_p))`, and `ψ_I ≡ 0` when
//! `μ(I) = 0`. Level ranges always index the wavelet cube `I`, never its
//! parent.

use std::collections::{BTreeMap, HashMap};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{range, Result};
use crate::grid::{corner_of, in_lagom, on_skeleton, Corner, CubeId, GridKind, MAX_LEVEL, MIN_LEVEL};
use crate::measure::AtomicMeasure;
use crate::reduce::pairwise_sum;

pub type Field = Vec<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Sparse `CubeId → ⟨f, ψ_I⟩`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HaarCoefficientMap {
    pub grid: Option<GridKind>,
    pub levels: Option<RangeInclusive<i32>>,
    pub entries: BTreeMap<CubeId, Complex64>,
}

impl HaarCoefficientMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &CubeId) -> Complex64 {
        self.entries.get(id).copied().unwrap_or(ZERO)
    }

    pub fn energy(&self) -> f64 {
        pairwise_sum(self.entries.values().map(|c| c.norm_sqr()))
    }

    pub fn filter(&self, mut keep: impl FnMut(&CubeId) -> bool) -> Self {
        Self {
            grid: self.grid,
            levels: self.levels.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Split into the `𝒟_M` part and its complement.
    pub fn split_lagom(&self, m: u32) -> (Self, Self) {
        (
            self.filter(|id| in_lagom(&id.to_cube(), m)),
            self.filter(|id| !in_lagom(&id.to_cube(), m)),
        )
    }
}

/// Nonempty cubes of one level, linked to the level above.
#[derive(Clone, Debug)]
pub struct Level {
    pub level: i32,
    pub corners: Vec<Corner>,
    pub mass: Vec<f64>,
    /// Index into the previous level's cells; empty for the top level.
    pub parent: Vec<u32>,
    /// Cell index of every atom.
    pub atom_cell: Vec<u32>,
    /// Number of nonempty children of the parent.
    pub siblings: Vec<u32>,
    lookup: HashMap<Corner, u32>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn index_of(&self, corner: &[i64]) -> Option<u32> {
        self.lookup.get(corner).copied()
    }

    pub fn id(&self, grid: GridKind, cell: usize) -> CubeId {
        CubeId::new(grid, self.level, &self.corners[cell])
    }
}

/// Haar system of one full-dimensional grid restricted to a measure.
///
/// `levels[0]` is the coarse level `start - 1`; wavelets live on
/// `levels[1..]`.
#[derive(Clone, Debug)]
pub struct HaarSystem<'a> {
    pub mu: &'a AtomicMeasure,
    pub grid: GridKind,
    pub levels: Vec<Level>,
}

/// Coarsest level at which each quadrant's atoms share a single cube,
/// capped one above the resolution level.
pub fn top_level(mu: &AtomicMeasure, grid: GridKind) -> i32 {
    let s = grid.shift();
    let mut quadrants: HashMap<Vec<bool>, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for i in 0..mu.len() {
        let x = mu.point(i);
        let key: Vec<bool> = x.iter().map(|v| *v >= s).collect();
        let e = quadrants
            .entry(key)
            .or_insert_with(|| (x.to_vec(), x.to_vec()));
        for (a, &xa) in x.iter().enumerate() {
            e.0[a] = e.0[a].min(xa);
            e.1[a] = e.1[a].max(xa);
        }
    }
    let mut top = MAX_LEVEL.min(mu.resolution_level() - 1);
    for (lo, hi) in quadrants.values() {
        let mut k = MIN_LEVEL;
        while k < MAX_LEVEL && corner_of(lo, s, k + 1) == corner_of(hi, s, k + 1) {
            k += 1;
        }
        top = top.min(k);
    }
    top
}

/// Finest level at which some two atoms still share a cube, plus one.
pub fn separation_level(mu: &AtomicMeasure, grid: GridKind, from: i32, cap: i32) -> i32 {
    let s = grid.shift();
    for k in from..=cap {
        let mut seen = std::collections::HashSet::new();
        if (0..mu.len()).all(|i| seen.insert(corner_of(mu.point(i), s, k))) {
            return k;
        }
    }
    cap
}

impl<'a> HaarSystem<'a> {
    /// Default wavelet range: one below the top level to the resolution level.
    pub fn default_levels(mu: &AtomicMeasure, grid: GridKind) -> RangeInclusive<i32> {
        let top = top_level(mu, grid);
        let end = mu.resolution_level().max(top + 1);
        (top + 1)..=end
    }

    pub fn new(mu: &'a AtomicMeasure, grid: GridKind, wavelet_levels: Option<RangeInclusive<i32>>) -> Result<Self> {
        if matches!(grid, GridKind::Boundary(_)) {
            return Err(range("Haar systems live on full-dimensional grids"));
        }
        let levels = match wavelet_levels {
            Some(r) => r,
            None => Self::default_levels(mu, grid),
        };
        let (start, end) = (*levels.start(), *levels.end());
        if start > end {
            return Err(range(format!("empty level range {start}..={end}")));
        }
        if end > mu.resolution_level() {
            return Err(range(format!(
                "level {end} is finer than the resolution level {}",
                mu.resolution_level()
            )));
        }
        if start - 1 < MIN_LEVEL {
            return Err(range(format!("level {start} below the supported range")));
        }
        let shift = grid.shift();
        let n = mu.len();
        type Built = (i32, Vec<Corner>, Vec<u32>, HashMap<Corner, u32>);
        let built: Vec<Built> = ((start - 1)..=end)
            .into_par_iter()
            .map(|k| {
                let mut lookup: HashMap<Corner, u32> = HashMap::new();
                let mut atom_cell = Vec::with_capacity(n);
                for i in 0..n {
                    let c = corner_of(mu.point(i), shift, k);
                    let next = lookup.len() as u32;
                    atom_cell.push(*lookup.entry(c).or_insert(next));
                }
                // renumber cells in corner order
                let mut corners: Vec<(Corner, u32)> = lookup.into_iter().collect();
                corners.sort();
                let mut remap = vec![0u32; corners.len()];
                for (new, (_, old)) in corners.iter().enumerate() {
                    remap[*old as usize] = new as u32;
                }
                for c in &mut atom_cell {
                    *c = remap[*c as usize];
                }
                let corners: Vec<Corner> = corners.into_iter().map(|(c, _)| c).collect();
                let lookup = corners
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i as u32))
                    .collect();
                (k, corners, atom_cell, lookup)
            })
            .collect();
        let mut out: Vec<Level> = Vec::with_capacity(built.len());
        for (k, corners, atom_cell, lookup) in built {
            let mut mass_terms: Vec<Vec<f64>> = vec![Vec::new(); corners.len()];
            for (i, &c) in atom_cell.iter().enumerate() {
                mass_terms[c as usize].push(mu.weight(i));
            }
            let mass = mass_terms.into_iter().map(pairwise_sum).collect();
            let (parent, siblings) = match out.last() {
                None => (Vec::new(), Vec::new()),
                Some(prev) => {
                    let parent: Vec<u32> = corners
                        .iter()
                        .map(|c| {
                            let pc: Corner = c.iter().map(|v| v >> 1).collect();
                            prev.lookup[&pc]
                        })
                        .collect();
                    let mut count = vec![0u32; prev.len()];
                    for &p in &parent {
                        count[p as usize] += 1;
                    }
                    let siblings = parent.iter().map(|&p| count[p as usize]).collect();
                    (parent, siblings)
                }
            };
            out.push(Level {
                level: k,
                corners,
                mass,
                parent,
                atom_cell,
                siblings,
                lookup,
            });
        }
        Ok(Self { mu, grid, levels: out })
    }

    pub fn wavelet_levels(&self) -> RangeInclusive<i32> {
        self.levels[1].level..=self.levels.last().unwrap().level
    }

    pub fn level(&self, k: i32) -> Option<&Level> {
        let i = k - self.levels[0].level;
        (i >= 0).then(|| self.levels.get(i as usize)).flatten()
    }

    /// `Σ_{x ∈ I} w f(x)` for every cell of every level.
    pub fn cell_sums(&self, f: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut sums: Vec<Vec<Complex64>> = Vec::with_capacity(self.levels.len());
        for lv in &self.levels {
            let mut terms: Vec<Vec<Complex64>> = vec![Vec::new(); lv.len()];
            for (i, &c) in lv.atom_cell.iter().enumerate() {
                terms[c as usize].push(self.mu.weight(i) * f[i]);
            }
            sums.push(terms.into_iter().map(pairwise_sum).collect());
        }
        sums
    }

    /// Coefficients by level and cell, `None` where `ψ_I ≡ 0` on the support.
    pub fn coefficient_table(&self, f: &[Complex64]) -> Vec<Vec<Option<Complex64>>> {
        let sums = self.cell_sums(f);
        let mut table = vec![Vec::new()];
        for li in 1..self.levels.len() {
            let lv = &self.levels[li];
            let up = &self.levels[li - 1];
            let row = (0..lv.len())
                .map(|c| {
                    if lv.siblings[c] == 1 {
                        return None;
                    }
                    let p = lv.parent[c] as usize;
                    let m = lv.mass[c];
                    Some(sums[li][c] / m.sqrt() - m.sqrt() * sums[li - 1][p] / up.mass[p])
                })
                .collect();
            table.push(row);
        }
        table
    }

    pub fn analyze(&self, f: &[Complex64]) -> HaarCoefficientMap {
        let table = self.coefficient_table(f);
        let mut entries = BTreeMap::new();
        for (li, row) in table.iter().enumerate().skip(1) {
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    entries.insert(self.levels[li].id(self.grid, c), *v);
                }
            }
        }
        HaarCoefficientMap {
            grid: Some(self.grid),
            levels: Some(self.wavelet_levels()),
            entries,
        }
    }

    /// `Σ c_I ψ_I` at the atoms; entries outside this system are ignored.
    pub fn synthesize(&self, map: &HaarCoefficientMap) -> Field {
        let n = self.mu.len();
        let mut by_level: Vec<Vec<Complex64>> = self.levels.iter().map(|l| vec![ZERO; l.len()]).collect();
        for (id, c) in &map.entries {
            if id.grid != self.grid || id.open || id.frozen != 0 {
                continue;
            }
            if let Some(lv) = self.level(id.level) {
                if let Some(cell) = lv.index_of(&id.corner) {
                    by_level[(id.level - self.levels[0].level) as usize][cell as usize] = *c;
                }
            }
        }
        let mut terms: Vec<Vec<Complex64>> = vec![Vec::with_capacity(2 * self.levels.len()); n];
        for (li, coef) in by_level.iter().enumerate().skip(1) {
            let lv = &self.levels[li];
            let up = &self.levels[li - 1];
            if coef.iter().all(|c| *c == ZERO) {
                continue;
            }
            let mut parent_term = vec![ZERO; up.len()];
            for (c, cc) in coef.iter().enumerate() {
                if lv.siblings[c] > 1 {
                    let p = lv.parent[c] as usize;
                    parent_term[p] += cc * lv.mass[c].sqrt() / up.mass[p];
                }
            }
            for (i, t) in terms.iter_mut().enumerate() {
                let c = lv.atom_cell[i] as usize;
                let own = if lv.siblings[c] > 1 {
                    coef[c] / lv.mass[c].sqrt()
                } else {
                    ZERO
                };
                t.push(own - parent_term[up.atom_cell[i] as usize]);
            }
        }
        terms.into_iter().map(pairwise_sum).collect()
    }

    /// `E_k f` on the atoms, `k` within the system's levels.
    pub fn expectation(&self, k: i32, f: &[Complex64]) -> Result<Field> {
        let li = self
            .level(k)
            .ok_or_else(|| range(format!("level {k} outside the system")))?;
        let idx = (k - self.levels[0].level) as usize;
        let sums = &self.cell_sums(f)[idx];
        Ok(li
            .atom_cell
            .iter()
            .map(|&c| sums[c as usize] / li.mass[c as usize])
            .collect())
    }

    /// `Δ_k f = E_k f − E_{k−1} f`, summed over all level-`k−1` parents.
    pub fn difference(&self, k: i32, f: &[Complex64]) -> Result<Field> {
        let a = self.expectation(k, f)?;
        let b = self.expectation(k - 1, f)?;
        Ok(a.into_iter().zip(b).map(|(x, y)| x - y).collect())
    }

    /// Coarse means `E_{start−1} f`.
    pub fn coarse_means(&self, f: &[Complex64]) -> Field {
        self.expectation(self.levels[0].level, f).expect("top level exists")
    }

    pub fn parseval(&self, f: &[Complex64]) -> ParsevalReport {
        let map = self.analyze(f);
        let means = self.coarse_means(f);
        let centered: Field = f.iter().zip(&means).map(|(a, b)| a - b).collect();
        let norm_sq = self.mu.norm2(f);
        let centered_sq = self.mu.norm2(&centered);
        let coeff_sq = map.energy();
        let top = &self.levels[0];
        ParsevalReport {
            coeff_sq,
            centered_sq,
            norm_sq,
            residual: if norm_sq > 0.0 {
                (coeff_sq - centered_sq).abs() / norm_sq
            } else {
                0.0
            },
            coarse_level: top.level,
            coarse_means: (0..top.len())
                .map(|c| {
                    let i = top.atom_cell.iter().position(|&a| a as usize == c).unwrap();
                    (top.id(self.grid, c), means[i])
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsevalReport {
    pub coeff_sq: f64,
    pub centered_sq: f64,
    pub norm_sq: f64,
    pub residual: f64,
    pub coarse_level: i32,
    /// Means removed before comparison, one per coarse cube.
    pub coarse_means: Vec<(CubeId, Complex64)>,
}

pub fn parseval_residual(
    mu: &AtomicMeasure,
    f: &[Complex64],
    grid: GridKind,
    levels: Option<RangeInclusive<i32>>,
) -> Result<ParsevalReport> {
    Ok(HaarSystem::new(mu, grid, levels)?.parseval(f))
}

/// Wavelet variants for pointwise evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum WaveletVariant {
    Plain,
    /// Full wavelet frozen at `c(J_p)` and cut off to `Q`.
    Full { jp: CubeId, q: CubeId },
}

fn mass_in(mu: &AtomicMeasure, id: &CubeId) -> f64 {
    pairwise_sum((0..mu.len()).filter(|&i| id.contains(mu.point(i))).map(|i| mu.weight(i)))
}

pub fn wavelet_eval(mu: &AtomicMeasure, i: &CubeId, x: &[f64], variant: &WaveletVariant) -> Result<f64> {
    let ip = i.parent()?;
    let mi = mass_in(mu, i);
    if mi == 0.0 {
        return Ok(0.0);
    }
    let mp = mass_in(mu, &ip);
    let at = |p: &[f64]| {
        let a = if i.contains(p) { 1.0 / mi } else { 0.0 };
        let b = if ip.contains(p) { 1.0 / mp } else { 0.0 };
        mi.sqrt() * (a - b)
    };
    Ok(match variant {
        WaveletVariant::Plain => at(x),
        WaveletVariant::Full { jp, q } => {
            if q.contains(x) {
                at(&jp.center())
            } else {
                0.0
            }
        }
    })
}

/// `ψ_I` at the atoms of `I_p`, as `(atom, value)` pairs.
pub fn wavelet_on_atoms(mu: &AtomicMeasure, i: &CubeId) -> Result<Vec<(u32, f64)>> {
    let ip = i.parent()?;
    let atoms: Vec<usize> = (0..mu.len()).filter(|&a| ip.contains(mu.point(a))).collect();
    let inside: Vec<bool> = atoms.iter().map(|&a| i.contains(mu.point(a))).collect();
    let mi = pairwise_sum(atoms.iter().zip(&inside).filter(|p| *p.1).map(|p| mu.weight(*p.0)));
    if mi == 0.0 {
        return Ok(Vec::new());
    }
    let mp = pairwise_sum(atoms.iter().map(|&a| mu.weight(a)));
    Ok(atoms
        .iter()
        .zip(&inside)
        .map(|(&a, &ins)| {
            let v = if ins { mi.sqrt() * (1.0 / mi - 1.0 / mp) } else { -mi.sqrt() / mp };
            (a as u32, v)
        })
        .collect())
}

/// Closed-form `⟨ψ_I, ψ_J⟩`.
pub fn gram(mu: &AtomicMeasure, i: &CubeId, j: &CubeId) -> Result<f64> {
    let ip = i.parent()?;
    let jp = j.parent()?;
    if ip != jp {
        return Ok(0.0);
    }
    let mi = mass_in(mu, i);
    let mj = mass_in(mu, j);
    if mi == 0.0 || mj == 0.0 {
        return Ok(0.0);
    }
    let mp = mass_in(mu, &ip);
    let diag = if i == j { 1.0 / mi } else { 0.0 };
    Ok(mi.sqrt() * mj.sqrt() * (diag - 1.0 / mp))
}

/// `⟨ψ_I, ψ_J⟩` by direct atom summation.
pub fn gram_brute(mu: &AtomicMeasure, i: &CubeId, j: &CubeId) -> Result<f64> {
    let a: HashMap<u32, f64> = wavelet_on_atoms(mu, i)?.into_iter().collect();
    let b = wavelet_on_atoms(mu, j)?;
    Ok(pairwise_sum(
        b.iter()
            .filter_map(|(k, v)| a.get(k).map(|u| mu.weight(*k as usize) * u * v)),
    ))
}

/// Martingale operators on a single cube.
#[derive(Clone, Debug, PartialEq)]
pub enum Martingale {
    E,
    Delta,
    /// `Ê_Q f = ⟨f⟩_Q χ_Q(c(J_p)) χ_{Q'}`.
    EHat { jp: CubeId, cutoff: CubeId },
    DeltaHat { jp: CubeId, cutoff: CubeId },
}

fn average(mu: &AtomicMeasure, q: &CubeId, f: &[Complex64]) -> (f64, Complex64) {
    crate::measure::mass_and_average(mu, q, f)
}

pub fn martingale(mu: &AtomicMeasure, f: &[Complex64], q: &CubeId, which: &Martingale) -> Field {
    let n = mu.len();
    let indicator = |c: &CubeId| -> Vec<bool> { (0..n).map(|i| c.contains(mu.point(i))).collect() };
    match which {
        Martingale::E => {
            let (_, a) = average(mu, q, f);
            indicator(q).into_iter().map(|b| if b { a } else { ZERO }).collect()
        }
        Martingale::Delta => {
            let mut out = vec![ZERO; n];
            for ch in q.children() {
                let (_, a) = average(mu, &ch, f);
                for (i, b) in indicator(&ch).into_iter().enumerate() {
                    if b {
                        out[i] += a;
                    }
                }
            }
            let (_, a) = average(mu, q, f);
            for (i, b) in indicator(q).into_iter().enumerate() {
                if b {
                    out[i] -= a;
                }
            }
            out
        }
        Martingale::EHat { jp, cutoff } => {
            let c = jp.center();
            let (_, a) = average(mu, q, f);
            let v = if q.contains(&c) { a } else { ZERO };
            indicator(cutoff).into_iter().map(|b| if b { v } else { ZERO }).collect()
        }
        Martingale::DeltaHat { jp, cutoff } => {
            let c = jp.center();
            let mut v = ZERO;
            for ch in q.children() {
                if ch.contains(&c) {
                    v += average(mu, &ch, f).1;
                }
            }
            if q.contains(&c) {
                v -= average(mu, q, f).1;
            }
            indicator(cutoff).into_iter().map(|b| if b { v } else { ZERO }).collect()
        }
    }
}

/// Split `f` into the part off and on the grid's skeleton down to `depth`.
pub fn boundary_split(mu: &AtomicMeasure, f: &[Complex64], grid: GridKind, depth: i32) -> (Field, Field) {
    let s = grid.shift();
    let mut interior = f.to_vec();
    let mut skeleton = vec![ZERO; f.len()];
    let mut shifted = vec![0.0; mu.dim()];
    for i in 0..mu.len() {
        for (a, v) in mu.point(i).iter().enumerate() {
            shifted[a] = v - s;
        }
        if on_skeleton(&shifted, depth) {
            skeleton[i] = f[i];
            interior[i] = ZERO;
        }
    }
    (interior, skeleton)
}

/// `P_M f` and `P_M^⊥ f` over the given system.
pub fn project(system: &HaarSystem<'_>, f: &[Complex64], m: u32) -> (Field, Field) {
    let map = system.analyze(f);
    let (inside, outside) = map.split_lagom(m);
    (system.synthesize(&inside), system.synthesize(&outside))
}

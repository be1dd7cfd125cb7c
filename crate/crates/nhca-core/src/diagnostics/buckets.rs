//! Partition of the wavelet pair sum `⟨T P_{2M}^⊥ f, P_M^⊥ g⟩` into the
//! separated, nested, paraproduct and borderline buckets.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{range, Error, Result};
use crate::geometry::inrdist;
use crate::grid::{CubeId, GridKind};
use crate::haar::{top_level, HaarSystem};
use crate::kernel::KernelSpec;
use crate::operator::{apply, apply_transpose, bilinear, bilinear_abs, check_range, wavelets, PairTable, WaveletRef};
use crate::reduce::Pairwise;

/// Relative agreement required between the bucket total and the direct value.
pub const BUCKET_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Bucket {
    D1,
    D2,
    N2,
    N3,
    P4,
    P5,
    B6,
}

impl Bucket {
    pub const ALL: [Bucket; 7] = [Bucket::D1, Bucket::D2, Bucket::N2, Bucket::N3, Bucket::P4, Bucket::P5, Bucket::B6];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    D1 { shell: u64 },
    D2,
    /// Nested with `J_p ⊊ I_p`; split into `N2 + P4`.
    Inner,
    /// Nested with `I_p ⊊ J_p`; split into `N3 + P5`.
    Outer,
    B6,
}

/// Bucket of an ordered wavelet pair from its parents.
pub fn assign(i: &CubeId, j: &CubeId, theta: f64) -> Result<Assignment> {
    let ip = i.parent()?.to_cube();
    let jp = j.parent()?.to_cube();
    let e = j.level - i.level;
    let m = ip.rdist(&jp).floor() as u64;
    if m >= 2 {
        return Ok(Assignment::D1 { shell: m });
    }
    let k = inrdist(&ip, &jp).floor();
    if k > 2f64.powf(theta * f64::from(e.abs())) {
        if ip.dist(&jp) > 0.0 {
            return Ok(Assignment::D2);
        }
        return Ok(if e >= 0 { Assignment::Inner } else { Assignment::Outer });
    }
    Ok(Assignment::B6)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BucketTotal {
    pub value: Complex64,
    pub magnitude: f64,
    /// `Σ |term|` within the bucket.
    pub absolute: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellRow {
    pub m: u64,
    pub magnitude: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BucketReport {
    #[serde(rename = "M")]
    pub m: u32,
    pub theta: f64,
    pub depth: i32,
    pub buckets: BTreeMap<Bucket, BucketTotal>,
    pub d1_shells: Vec<ShellRow>,
    pub total: Complex64,
    pub direct: Complex64,
    /// `|total − direct|` over the largest of `|direct|` and the absolute sums.
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Ordered pairs with both coefficients nonzero.
    pub pairs: usize,
    pub assigned: usize,
}

#[derive(Default)]
struct Acc {
    value: Pairwise<Complex64>,
    absolute: Pairwise<f64>,
    pairs: usize,
}

impl Acc {
    fn push(&mut self, v: Complex64) {
        self.value.push(v);
        self.absolute.push(v.norm());
        self.pairs += 1;
    }

    fn total(&self) -> BucketTotal {
        let value = self.value.total();
        BucketTotal {
            value,
            magnitude: value.norm(),
            absolute: self.absolute.total(),
            pairs: self.pairs,
        }
    }
}

/// `μ(I)^{1/2}(χ_I(c)/μ(I) − χ_{I_p}(c)/μ(I_p))` at the centre of `other_p`.
fn full_constant(sys: &HaarSystem<'_>, w: &WaveletRef, other_p: &CubeId) -> f64 {
    let c = other_p.center();
    let mi = sys.levels[w.level_index].mass[w.cell];
    let mp = sys.levels[w.level_index - 1].mass[w.parent];
    let a = if w.id.contains(&c) { 1.0 / mi } else { 0.0 };
    let b = if w.parent_cube().contains(&c) { 1.0 / mp } else { 0.0 };
    mi.sqrt() * (a - b)
}

#[allow(clippy::too_many_arguments)]
pub fn bucket_decomposition_report(
    k: &KernelSpec,
    mu: &crate::measure::AtomicMeasure,
    f: &[Complex64],
    g: &[Complex64],
    m: u32,
    theta: f64,
    depth: i32,
) -> Result<BucketReport> {
    if depth < 1 {
        return Err(range(format!("depth {depth} must be at least 1")));
    }
    let grid = GridKind::Standard;
    let top = top_level(mu, grid);
    let sys = HaarSystem::new(mu, grid, Some((top + 1)..=(top + depth)))?;
    check_range(mu, grid, f, &sys)?;
    check_range(mu, grid, g, &sys)?;
    let cf = sys.analyze(f).split_lagom(2 * m).1;
    let cg = sys.analyze(g).split_lagom(m).1;
    let fo = sys.synthesize(&cf);
    let go = sys.synthesize(&cg);
    let direct = bilinear(k, mu, &fo, &go)?;
    let direct_abs = bilinear_abs(k, mu, &fo, &go)?;

    let table = PairTable::new(k, &sys)?;
    let ones = vec![Complex64::new(1.0, 0.0); mu.len()];
    let t1 = sys.analyze(&apply(k, mu, &ones)?);
    let tt1 = sys.analyze(&apply_transpose(k, mu, &ones)?);
    let ws = wavelets(&sys);
    let left: Vec<(&WaveletRef, Complex64)> = ws.iter().filter_map(|w| cf.entries.get(&w.id).map(|c| (w, *c))).collect();
    let right: Vec<(&WaveletRef, Complex64)> = ws.iter().filter_map(|w| cg.entries.get(&w.id).map(|c| (w, *c))).collect();

    let mut acc: BTreeMap<Bucket, Acc> = Bucket::ALL.iter().map(|b| (*b, Acc::default())).collect();
    let mut shells: BTreeMap<u64, Acc> = BTreeMap::new();
    let mut everything = Acc::default();
    let mut assigned = 0;
    let mut pairs = 0;
    for (i, ci) in &left {
        for (j, dj) in &right {
            pairs += 1;
            let w = ci * dj;
            let pair = table.pair(i, j);
            everything.push(w * pair);
            let bucket = assign(&i.id, &j.id, theta)?;
            match bucket {
                Assignment::D1 { shell } => {
                    acc.get_mut(&Bucket::D1).expect("bucket").push(w * pair);
                    shells.entry(shell).or_default().push(w * pair);
                }
                Assignment::D2 => acc.get_mut(&Bucket::D2).expect("bucket").push(w * pair),
                Assignment::B6 => acc.get_mut(&Bucket::B6).expect("bucket").push(w * pair),
                Assignment::Inner => {
                    let jp = j.id.parent()?;
                    let full = t1.get(&j.id) * full_constant(&sys, i, &jp);
                    acc.get_mut(&Bucket::N2).expect("bucket").push(w * (pair - full));
                    acc.get_mut(&Bucket::P4).expect("bucket").push(w * full);
                }
                Assignment::Outer => {
                    let ip = i.id.parent()?;
                    let full = tt1.get(&i.id) * full_constant(&sys, j, &ip);
                    acc.get_mut(&Bucket::N3).expect("bucket").push(w * (pair - full));
                    acc.get_mut(&Bucket::P5).expect("bucket").push(w * full);
                }
            }
            assigned += 1;
        }
    }
    if assigned != pairs {
        return Err(Error::Internal(format!("{} of {pairs} pairs left unassigned", pairs - assigned)));
    }
    let buckets: BTreeMap<Bucket, BucketTotal> = acc.iter().map(|(b, a)| (*b, a.total())).collect();
    let total: Complex64 = {
        let mut p = Pairwise::new();
        for b in buckets.values() {
            p.push(b.value);
        }
        p.total()
    };
    let absolute: f64 = buckets.values().map(|b| b.absolute).sum::<f64>().max(everything.total().absolute);
    let scale = direct.norm().max(absolute).max(direct_abs);
    let residual = if scale > 0.0 { (total - direct).norm() / scale } else { 0.0 };
    Ok(BucketReport {
        m,
        theta,
        depth,
        buckets,
        d1_shells: shells
            .into_iter()
            .map(|(m, a)| {
                let t = a.total();
                ShellRow {
                    m,
                    magnitude: t.magnitude,
                    pairs: t.pairs,
                }
            })
            .collect(),
        total,
        direct,
        residual,
        tolerance: BUCKET_TOLERANCE,
        passed: residual <= BUCKET_TOLERANCE,
        pairs,
        assigned,
    })
}

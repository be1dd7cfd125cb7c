//! Paraproduct forms `Π` and `Π′` built from full wavelets.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ec, inrdist};
use crate::grid::{corner_of, CubeId};
use crate::haar::{Field, HaarCoefficientMap, HaarSystem};
use crate::kernel::KernelSpec;
use crate::operator::{apply, apply_transpose, check_range, wavelets, WaveletRef};
use crate::reduce::Pairwise;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParaproductReport {
    #[serde(rename = "Pi")]
    pub pi: Complex64,
    #[serde(rename = "Pi_prime")]
    pub pi_prime: Complex64,
    pub pairs: usize,
    pub pairs_prime: usize,
    /// Means over `Q` removed from the inputs.
    pub mean_f: Complex64,
    pub mean_g: Complex64,
    pub theta: f64,
    /// Window of the `P_M^⊥` projection applied to both inputs.
    #[serde(rename = "M")]
    pub m: Option<u32>,
    pub telescope_max_error: f64,
    pub telescope_checks: usize,
}

/// Support in `q` is required; the mean over `q` is removed.
pub fn center_on(mu: &crate::measure::AtomicMeasure, q: &CubeId, f: &[Complex64]) -> Result<(Field, Complex64)> {
    let inside: Vec<bool> = (0..mu.len()).map(|a| q.contains(mu.point(a))).collect();
    if let Some(a) = (0..mu.len()).find(|&a| !inside[a] && f[a] != ZERO) {
        return Err(Error::Precondition(format!("field is nonzero at atom {a} outside Q")));
    }
    let mut mass = Pairwise::new();
    let mut sum = Pairwise::new();
    for a in (0..mu.len()).filter(|&a| inside[a]) {
        mass.push(mu.weight(a));
        sum.push(f[a] * mu.weight(a));
    }
    let mass = mass.total();
    let mean = if mass > 0.0 { sum.total() / mass } else { ZERO };
    Ok((
        f.iter().zip(&inside).map(|(v, &i)| if i { v - mean } else { ZERO }).collect(),
        mean,
    ))
}

/// `μ(I)^{1/2} (χ_I(c)/μ(I) − χ_{I_p}(c)/μ(I_p))` at `c = c(J_p)`.
fn full_constant(sys: &HaarSystem<'_>, i: &WaveletRef, jp: &CubeId) -> f64 {
    let c = jp.center();
    let mi = sys.levels[i.level_index].mass[i.cell];
    let mp = sys.levels[i.level_index - 1].mass[i.parent];
    let in_i = if i.id.contains(&c) { 1.0 / mi } else { 0.0 };
    let in_p = if i.id.parent().map(|p| p.contains(&c)).unwrap_or(false) {
        1.0 / mp
    } else {
        0.0
    };
    mi.sqrt() * (in_i - in_p)
}

/// `J_p ⊊ I_p` with `inrdist(I_p, J_p) > 1 + ec(I,J)^{-θ}`.
fn deep_inside(outer: &WaveletRef, inner: &WaveletRef, theta: f64) -> bool {
    let op = outer.parent_cube();
    let ip = inner.parent_cube();
    ip.side < op.side
        && ip.is_within(&op)
        && inrdist(&op, &ip) > 1.0 + ec(&outer.cube(), &inner.cube()).powf(-theta)
}

fn nested_sum(
    sys: &HaarSystem<'_>,
    ws: &[WaveletRef],
    outer: &HaarCoefficientMap,
    inner: &HaarCoefficientMap,
    tested: &HaarCoefficientMap,
    theta: f64,
    q: &CubeId,
) -> (Complex64, usize) {
    // outer wavelets keyed by the (level index, cell) of their parent
    let mut by_parent: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (n, o) in ws.iter().enumerate() {
        if outer.get(&o.id) != ZERO && o.id.parent().is_ok_and(|p| p.is_within(q)) {
            by_parent.entry((o.level_index - 1, o.parent)).or_default().push(n);
        }
    }
    let mut acc = Pairwise::new();
    let mut pairs = 0;
    for i in ws {
        let ci = inner.get(&i.id);
        if ci == ZERO {
            continue;
        }
        let jp = i.id.parent().expect("wavelet cubes have parents");
        let weight = ci * tested.get(&i.id);
        let mut cell = i.parent;
        for la in (0..i.level_index - 1).rev() {
            cell = sys.levels[la + 1].parent[cell] as usize;
            let Some(outers) = by_parent.get(&(la, cell)) else {
                continue;
            };
            for &n in outers {
                let o = &ws[n];
                if deep_inside(o, i, theta) {
                    acc.push(outer.get(&o.id) * weight * full_constant(sys, o, &jp));
                    pairs += 1;
                }
            }
        }
    }
    (acc.total(), pairs)
}

/// Largest `|Σ_{I∈ch(R)} ⟨f,ψ_I⟩ ψ^full_{I,J_p} − Δ̂_R f(c(J_p))|` over
/// sampled `J` and all system ancestors `R ⊋ J_p`.
fn telescope_error(sys: &HaarSystem<'_>, ws: &[WaveletRef], cf: &HaarCoefficientMap, samples: usize, seed: u64) -> (f64, usize) {
    if ws.is_empty() {
        return (0.0, 0);
    }
    let sums = sys.cell_sums(&sys.synthesize(cf));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, ws.len(), samples.min(ws.len()));
    let shift = sys.grid.shift();
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for idx in picks {
        let j = &ws[idx];
        let jp = j.id.parent().expect("wavelet cubes have parents");
        let c = jp.center();
        for li in 1..j.level_index {
            let lv = &sys.levels[li];
            let up = &sys.levels[li - 1];
            let Some(child) = lv.index_of(&corner_of(&c, shift, lv.level)) else {
                continue;
            };
            let child = child as usize;
            let r = lv.parent[child] as usize;
            let lhs: Complex64 = ws
                .iter()
                .filter(|w| w.level_index == li && w.parent == r)
                .map(|w| cf.get(&w.id) * full_constant(sys, w, &jp))
                .sum();
            let rhs = sums[li][child] / lv.mass[child] - sums[li - 1][r] / up.mass[r];
            worst = worst.max((lhs - rhs).norm());
            checks += 1;
        }
    }
    (worst, checks)
}

#[allow(clippy::too_many_arguments)]
pub fn paraproduct_eval(
    k: &KernelSpec,
    sys: &HaarSystem<'_>,
    f: &[Complex64],
    g: &[Complex64],
    q: &CubeId,
    theta: f64,
    m: Option<u32>,
    seed: u64,
) -> Result<ParaproductReport> {
    let mu = sys.mu;
    let (f0, mean_f) = center_on(mu, q, f)?;
    let (g0, mean_g) = center_on(mu, q, g)?;
    check_range(mu, sys.grid, &f0, sys)?;
    check_range(mu, sys.grid, &g0, sys)?;
    let mut cf = sys.analyze(&f0);
    let mut cg = sys.analyze(&g0);
    if let Some(m) = m {
        cf = cf.split_lagom(m).1;
        cg = cg.split_lagom(m).1;
    }
    let chi: Vec<Complex64> = (0..mu.len())
        .map(|a| Complex64::new(if q.contains(mu.point(a)) { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let t1 = sys.analyze(&apply(k, mu, &chi)?);
    let tt1 = sys.analyze(&apply_transpose(k, mu, &chi)?);
    let ws = wavelets(sys);
    let (pi, pairs) = nested_sum(sys, &ws, &cf, &cg, &t1, theta, q);
    let (pi_prime, pairs_prime) = nested_sum(sys, &ws, &cg, &cf, &tt1, theta, q);
    let (telescope_max_error, telescope_checks) = telescope_error(sys, &ws, &cf, 16, seed);
    Ok(ParaproductReport {
        pi,
        pi_prime,
        pairs,
        pairs_prime,
        mean_f,
        mean_g,
        theta,
        m,
        telescope_max_error,
        telescope_checks,
    })
}

//! Classifier for pairs far from the lagom windows: small envelope, extreme
//! eccentricity or extreme relative distance.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ec;
use crate::grid::{corner_of, in_lagom, CubeId};
use crate::kernel::{EnvelopeCtx, KernelSpec};
use crate::measure::{density_profile, AtomicMeasure, RhoInMode};
use crate::operator::{testing_stat_region, BoundKernel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FMuValue {
    pub value: f64,
    /// `sup F_K(R,S) ρ_μ(R∨S)` over the sampled subcubes.
    pub kernel_part: f64,
    /// `F_T(I)` when `I = J`, else 0.
    pub testing_part: f64,
    pub sampled_pairs: usize,
    pub depth_cap: u32,
}

pub trait FMuEvaluator {
    fn evaluate(&self, i: &CubeId, j: &CubeId) -> Result<FMuValue>;
}

/// Samples dyadic subcubes down to `depth_cap` levels, keeping at most
/// `per_depth` of the heaviest at each depth.
pub struct SampledFMu<'a> {
    pub kernel: &'a KernelSpec,
    pub mu: &'a AtomicMeasure,
    pub depth_cap: u32,
    pub per_depth: usize,
}

impl<'a> SampledFMu<'a> {
    pub fn new(kernel: &'a KernelSpec, mu: &'a AtomicMeasure) -> Self {
        Self {
            kernel,
            mu,
            depth_cap: 3,
            per_depth: 8,
        }
    }

    fn subcubes(&self, q: &CubeId) -> Vec<CubeId> {
        let atoms = self.mu.atoms_in_id(q);
        let mut out = vec![q.clone()];
        let finest = (q.level + self.depth_cap as i32).min(self.mu.resolution_level());
        for level in (q.level + 1)..=finest {
            let mut cells: HashMap<_, f64> = HashMap::new();
            for &a in &atoms {
                let c = corner_of(self.mu.point(a as usize), q.grid.shift(), level);
                *cells.entry(c).or_default() += self.mu.weight(a as usize);
            }
            let mut cells: Vec<_> = cells.into_iter().collect();
            cells.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            out.extend(
                cells
                    .into_iter()
                    .take(self.per_depth)
                    .map(|(c, _)| CubeId::new(q.grid, level, &c)),
            );
        }
        out
    }
}

impl FMuEvaluator for SampledFMu<'_> {
    fn evaluate(&self, i: &CubeId, j: &CubeId) -> Result<FMuValue> {
        let ctx = EnvelopeCtx::of(self.kernel);
        let delta = self.kernel.delta;
        let rs = self.subcubes(i);
        let ss = self.subcubes(j);
        let mut rho: HashMap<CubeId, f64> = HashMap::new();
        for c in rs.iter().chain(&ss) {
            if !rho.contains_key(c) {
                let p = density_profile(self.mu, &c.to_cube(), delta, RhoInMode::Balls)?;
                rho.insert(c.clone(), p.rho_mu);
            }
        }
        let mut kernel_part: f64 = 0.0;
        for r in &rs {
            let rc = r.to_cube();
            for s in &ss {
                let sc = s.to_cube();
                let join = if r.side() >= s.side() { r } else { s };
                kernel_part = kernel_part.max(ctx.f_k(&rc, &sc).value * rho[join]);
            }
        }
        let testing_part = if i == j {
            testing_stat_region(&BoundKernel::new(self.kernel, self.mu), i, 1.0)?.f_t
        } else {
            0.0
        };
        Ok(FMuValue {
            value: kernel_part + testing_part,
            kernel_part,
            testing_part,
            sampled_pairs: rs.len() * ss.len(),
            depth_cap: self.depth_cap,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    SmallF,
    ExtremeEc,
    ExtremeRdist,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub eps: f64,
    pub log2_m: f64,
    pub rdist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trichotomy {
    pub clause: Clause,
    /// Set when no clause holds.
    pub flagged: bool,
    pub f_mu: FMuValue,
    pub log2_ec: f64,
    pub rdist: f64,
    pub thresholds: Thresholds,
    pub small_f: bool,
    pub extreme_ec: bool,
    pub extreme_rdist: bool,
}

pub fn trichotomy_classify(
    i: &CubeId,
    j: &CubeId,
    m: u32,
    eps: f64,
    evaluator: &dyn FMuEvaluator,
) -> Result<Trichotomy> {
    if m == 0 {
        return Err(Error::Precondition("M must be positive".into()));
    }
    let (ic, jc) = (i.to_cube(), j.to_cube());
    if in_lagom(&ic, 2 * m) {
        return Err(Error::Precondition(format!("I = {} lies in the window D_{}", i.corner_string(), 2 * m)));
    }
    if in_lagom(&jc, m) {
        return Err(Error::Precondition(format!("J = {} lies in the window D_{m}", j.corner_string())));
    }
    let f_mu = evaluator.evaluate(i, j)?;
    let log2_ec = ec(&ic, &jc).log2().abs();
    let rdist = ic.rdist(&jc);
    let thresholds = Thresholds {
        eps,
        log2_m: f64::from(m).log2(),
        rdist: f64::from(m).powf(0.125),
    };
    let small_f = f_mu.value < eps;
    let extreme_ec = log2_ec >= thresholds.log2_m;
    let extreme_rdist = rdist >= thresholds.rdist;
    let clause = if small_f {
        Clause::SmallF
    } else if extreme_ec {
        Clause::ExtremeEc
    } else if extreme_rdist {
        Clause::ExtremeRdist
    } else {
        Clause::None
    };
    Ok(Trichotomy {
        clause,
        flagged: clause == Clause::None,
        f_mu,
        log2_ec,
        rdist,
        thresholds,
        small_f,
        extreme_ec,
        extreme_rdist,
    })
}

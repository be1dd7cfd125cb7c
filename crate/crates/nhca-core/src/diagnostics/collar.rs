//! Collar sets `C_k`: atoms whose level-k cube hugs the child skeleton of a
//! coarse cube of `𝒟(Q)`.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{range, Result};
use crate::grid::{corner_of, pow2, CubeId};
use crate::measure::AtomicMeasure;
use crate::reduce::pairwise_sum;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollarRow {
    pub k: i32,
    pub mass: f64,
    pub atoms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollarReport {
    pub rows: Vec<CollarRow>,
    pub n0: i32,
    pub theta: f64,
    /// First `k` with `μ(C_k) <= eps`.
    pub k0: Option<i32>,
    pub eps: f64,
    /// `μ(C_{k+1}) <= μ(C_k)` for every consecutive pair.
    pub monotone: bool,
    /// Mass stays flat: the measure charges the skeleton.
    pub flagged: bool,
}

/// Whether atom `x` lies in `C_k` for the cubes `I ∈ 𝒟(Q)` with
/// `level(I) − level(Q) <= n0`.
fn in_collar(x: &[f64], q: &CubeId, n0: i32, k: i32, theta: f64) -> bool {
    let shift = q.grid.shift();
    let n = x.len();
    let rl = q.level + k;
    let r = CubeId::new(q.grid, rl, &corner_of(x, shift, rl));
    let rc = r.to_cube();
    let lr = rc.side;
    let qc = q.to_cube();
    for kl in 0..=n0.min(k) {
        let il = q.level + kl;
        let li = pow2(-il);
        let home = corner_of(x, shift, il);
        for code in 0..3usize.pow(n as u32) {
            let mut corner = home.clone();
            let mut c = code;
            for v in corner.iter_mut() {
                *v += (c % 3) as i64 - 1;
                c /= 3;
            }
            let i = CubeId::new(q.grid, il, &corner).to_cube();
            if !i.is_within(&qc) || !rc.is_within(&i.dilate(3.0)) {
                continue;
            }
            if rc.dist_to_skeleton(&i) < lr.powf(1.0 - theta) * li.powf(theta) {
                return true;
            }
        }
    }
    false
}

pub fn collar_measure(
    mu: &AtomicMeasure,
    q: &CubeId,
    n0: i32,
    theta: f64,
    k_range: RangeInclusive<i32>,
    eps: f64,
) -> Result<CollarReport> {
    if n0 < 0 {
        return Err(range(format!("N0 = {n0} must be nonnegative")));
    }
    if *k_range.start() < n0 {
        return Err(range(format!("k range starts at {} below N0 = {n0}", k_range.start())));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(range(format!("theta {theta} must lie in (0, 1)")));
    }
    let atoms = mu.atoms_in_id(q);
    let rows: Vec<CollarRow> = k_range
        .into_par_iter()
        .map(|k| {
            let hit: Vec<u32> = atoms
                .iter()
                .copied()
                .filter(|&a| in_collar(mu.point(a as usize), q, n0, k, theta))
                .collect();
            CollarRow {
                k,
                mass: pairwise_sum(hit.iter().map(|&a| mu.weight(a as usize))),
                atoms: hit.len(),
            }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].mass <= w[0].mass);
    let k0 = rows.iter().find(|r| r.mass <= eps).map(|r| r.k);
    let flagged = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if rows.len() > 1 => a.mass > 0.0 && b.mass >= 0.9 * a.mass,
        _ => false,
    };
    Ok(CollarReport {
        rows,
        n0,
        theta,
        k0,
        eps,
        monotone,
        flagged,
    })
}

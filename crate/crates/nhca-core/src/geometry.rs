//! Pair geometry of two cubes: eccentricity, relative distances and the
//! bucket labels used to organise wavelet pair sums.

use crate::error::{Error, Result};
use crate::grid::{pow2, Cube, CubeId};

/// Geometry of an ordered pair `(I, J)`.
///
/// `meet` is the smaller cube, `join` the larger; when the sides tie the
/// second argument is the meet.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGeometry {
    pub ec: f64,
    pub rdist: f64,
    pub inrdist: f64,
    pub meet: Cube,
    pub join: Cube,
    /// True when the first argument is the meet.
    pub first_is_meet: bool,
    /// Smallest cube containing both, leftmost on every axis.
    pub enclosing: Cube,
    /// Side of the in-between cube: `dist(I, J)`.
    pub between_side: f64,
    /// `dist(meet, skeleton of join)`.
    pub skeleton_dist: f64,
}

impl PairGeometry {
    pub fn new(i: &Cube, j: &Cube) -> Self {
        let first_is_meet = i.side < j.side;
        let (meet, join) = if first_is_meet { (i, j) } else { (j, i) };
        let dist = i.dist(j);
        let skeleton_dist = meet.dist_to_skeleton(join);
        Self {
            ec: meet.side / join.side,
            rdist: 1.0 + dist / join.side,
            inrdist: 1.0 + skeleton_dist / meet.side,
            meet: meet.clone(),
            join: join.clone(),
            first_is_meet,
            enclosing: enclosing(i, j),
            between_side: dist,
            skeleton_dist,
        }
    }

    pub fn of_ids(i: &CubeId, j: &CubeId) -> Self {
        Self::new(&i.to_cube(), &j.to_cube())
    }

    /// As [`PairGeometry::new`], rejecting mixed ambient dimensions.
    pub fn try_new(i: &Cube, j: &Cube) -> Result<Self> {
        if i.dim() != j.dim() {
            return Err(Error::Dimension {
                left: i.dim(),
                right: j.dim(),
            });
        }
        Ok(Self::new(i, j))
    }
}

pub fn enclosing(i: &Cube, j: &Cube) -> Cube {
    let n = i.dim();
    let side = (0..n)
        .map(|a| i.hi(a).max(j.hi(a)) - i.lo(a).min(j.lo(a)))
        .fold(0.0, f64::max);
    let lower: Vec<f64> = (0..n).map(|a| i.hi(a).max(j.hi(a)) - side).collect();
    Cube::from_lower(&lower, side)
}

pub fn ec(i: &Cube, j: &Cube) -> f64 {
    i.side.min(j.side) / i.side.max(j.side)
}

pub fn inrdist(i: &Cube, j: &Cube) -> f64 {
    let (meet, join) = if i.side < j.side { (i, j) } else { (j, i) };
    1.0 + meet.dist_to_skeleton(join) / meet.side
}

/// `(e, m, k)` label of a wavelet pair: `ℓ(I) = 2^e ℓ(J)`,
/// `m = ⌊rdist(I_p, J_p)⌋`, `k = ⌊inrdist(I_p, J_p)⌋` when `m = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BucketLabel {
    pub e: i32,
    pub m: u64,
    pub k: Option<u64>,
}

pub fn bucket_classify(i: &CubeId, j: &CubeId) -> Result<BucketLabel> {
    let ip = i.parent()?.to_cube();
    let jp = j.parent()?.to_cube();
    Ok(label_from_parents(j.level - i.level, &ip, &jp))
}

pub(crate) fn label_from_parents(e: i32, ip: &Cube, jp: &Cube) -> BucketLabel {
    let m = ip.rdist(jp).floor() as u64;
    let k = (m == 1).then(|| inrdist(ip, jp).floor() as u64);
    BucketLabel { e, m, k }
}

/// Which of the three far-from-lagom clauses hold for `(I, J)` at window `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct FmClauses {
    /// `ℓ(I∧J) > 2^M`
    pub large: bool,
    /// `ℓ(I∨J) < 2^{-M}`
    pub small: bool,
    /// `rdist(⟨I,J⟩, 𝔹) > M^{1/8}`
    pub far: bool,
}

impl FmClauses {
    pub fn any(&self) -> bool {
        self.large || self.small || self.far
    }
}

pub fn fm_membership(i: &Cube, j: &Cube, m: u32) -> FmClauses {
    let big = pow2(m as i32);
    let meet = i.side.min(j.side);
    let join = i.side.max(j.side);
    let enc = enclosing(i, j);
    let unit = Cube::origin_box(1.0, i.dim());
    FmClauses {
        large: meet > big,
        small: join < 1.0 / big,
        far: enc.rdist(&unit) > f64::from(m).powf(0.125),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enclosing_of_diagonal_pair() {
        let a = Cube::from_lower(&[0.0, 0.0], 1.0);
        let b = Cube::from_lower(&[2.0, 2.0], 1.0);
        let e = enclosing(&a, &b);
        assert_eq!(e.side, 3.0);
        assert_eq!((e.lo(0), e.lo(1)), (0.0, 0.0));
    }

    #[test]
    fn tie_puts_second_as_meet() {
        let a = Cube::from_lower(&[0.0], 1.0);
        let b = Cube::from_lower(&[3.0], 1.0);
        let g = PairGeometry::new(&a, &b);
        assert!(!g.first_is_meet);
        assert_eq!(g.meet, b);
    }
}

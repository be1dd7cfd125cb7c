//! Dyadic grids, cube identifiers and the geometric cube type.
//!
//! A [`CubeId`] names the cube `shift + 2^{-level} * prod [corner_i, corner_i + 1)`
//! of one grid. Boundary grids carry a mask of frozen axes: on those axes the
//! cube is the single hyperplane `2^{-level} * corner_i`.
//!
//! A [`Cube`] is the plain geometric object (center, side, frozen mask, open
//! flag). Dilations and enclosing cubes are not dyadic and only exist as
//! [`Cube`]s.

use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{range, Error, Result};

pub type Corner = SmallVec<[i64; 3]>;
pub type Point = SmallVec<[f64; 3]>;

/// Primes backing the shifted grids: `Shifted(i)` translates by `sqrt(PRIMES[i-1])`.
const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

pub const MAX_LEVEL: i32 = 52;
pub const MIN_LEVEL: i32 = -60;

#[inline]
pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GridKind {
    /// The standard grid, shift 0.
    Standard,
    /// Translate of the standard grid by `sqrt(p_i) * (1, ..., 1)`, `i >= 1`.
    Shifted(u8),
    /// `r`-dimensional faces of the standard grid.
    Boundary(u8),
}

impl GridKind {
    pub fn shift(self) -> f64 {
        match self {
            GridKind::Shifted(i) => f64::from(PRIMES[usize::from(i) - 1]).sqrt(),
            _ => 0.0,
        }
    }

    pub fn tag(self) -> String {
        match self {
            GridKind::Standard => "std".into(),
            GridKind::Shifted(i) => format!("sh{i}"),
            GridKind::Boundary(r) => format!("bd{r}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            location: "grid".into(),
            message: format!("unknown grid tag {s:?}"),
        };
        if s == "std" {
            return Ok(GridKind::Standard);
        }
        let (kind, num) = if let Some(n) = s.strip_prefix("sh") {
            (0, n)
        } else if let Some(n) = s.strip_prefix("bd") {
            (1, n)
        } else {
            return Err(bad());
        };
        let n: u8 = num.parse().map_err(|_| bad())?;
        match kind {
            0 if (1..=PRIMES.len() as u8).contains(&n) => Ok(GridKind::Shifted(n)),
            1 if n >= 1 => Ok(GridKind::Boundary(n)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl Serialize for GridKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeId {
    pub grid: GridKind,
    pub level: i32,
    pub corner: Corner,
    pub open: bool,
    /// Bit `i` set when axis `i` is frozen.
    pub frozen: u8,
}

impl CubeId {
    pub fn new(grid: GridKind, level: i32, corner: &[i64]) -> Self {
        Self {
            grid,
            level,
            corner: Corner::from_slice(corner),
            open: false,
            frozen: 0,
        }
    }

    pub fn standard(level: i32, corner: &[i64]) -> Self {
        Self::new(GridKind::Standard, level, corner)
    }

    pub fn with_frozen(mut self, mask: u8) -> Self {
        self.frozen = mask;
        self
    }

    pub fn with_open(mut self, open: bool) -> Self {
        self.open = open;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    #[inline]
    pub fn side(&self) -> f64 {
        pow2(-self.level)
    }

    #[inline]
    pub fn is_frozen(&self, axis: usize) -> bool {
        self.frozen & (1 << axis) != 0
    }

    pub fn free_dims(&self) -> usize {
        self.dim() - self.frozen.count_ones() as usize
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.grid.shift() + self.corner[axis] as f64 * self.side()
    }

    pub fn center(&self) -> Point {
        let h = self.side();
        (0..self.dim())
            .map(|i| {
                if self.is_frozen(i) {
                    self.lower(i)
                } else {
                    self.lower(i) + 0.5 * h
                }
            })
            .collect()
    }

    pub fn to_cube(&self) -> Cube {
        Cube {
            center: self.center(),
            side: self.side(),
            frozen: self.frozen,
            open: self.open,
        }
    }

    /// Index-based membership; agrees with [`Grid::containing`] bit for bit.
    pub fn contains(&self, x: &[f64]) -> bool {
        let s = self.grid.shift();
        let scale = pow2(self.level);
        self.corner.iter().enumerate().all(|(i, &j)| {
            let u = (x[i] - s) * scale;
            if self.is_frozen(i) {
                u == j as f64
            } else if self.open {
                u > j as f64 && u < (j + 1) as f64
            } else {
                u.floor() == j as f64
            }
        })
    }

    /// The parent, or an error for a face whose frozen coordinate is not a
    /// face of the coarser grid.
    pub fn parent(&self) -> Result<CubeId> {
        let mut corner = self.corner.clone();
        for (i, c) in corner.iter_mut().enumerate() {
            if self.is_frozen(i) && c.rem_euclid(2) != 0 {
                return Err(range(format!(
                    "face {self} has no parent: frozen coordinate is odd at level {}",
                    self.level
                )));
            }
            *c = c.div_euclid(2);
        }
        Ok(CubeId {
            grid: self.grid,
            level: self.level - 1,
            corner,
            open: self.open,
            frozen: self.frozen,
        })
    }

    pub fn children(&self) -> Vec<CubeId> {
        let free: Vec<usize> = (0..self.dim()).filter(|&i| !self.is_frozen(i)).collect();
        (0..1u32 << free.len())
            .map(|bits| {
                let mut corner: Corner = self.corner.iter().map(|c| 2 * c).collect();
                for (b, &axis) in free.iter().enumerate() {
                    corner[axis] += i64::from((bits >> b) & 1);
                }
                CubeId {
                    grid: self.grid,
                    level: self.level + 1,
                    corner,
                    open: self.open,
                    frozen: self.frozen,
                }
            })
            .collect()
    }

    /// Ancestor at `level <= self.level`.
    pub fn ancestor(&self, level: i32) -> CubeId {
        debug_assert!(level <= self.level);
        let d = self.level - level;
        CubeId {
            grid: self.grid,
            level,
            corner: self.corner.iter().map(|c| c >> d).collect(),
            open: self.open,
            frozen: self.frozen,
        }
    }

    /// Dyadic inclusion within one grid (ignores the open flag).
    pub fn is_within(&self, other: &CubeId) -> bool {
        self.grid == other.grid
            && self.frozen == other.frozen
            && self.level >= other.level
            && self.ancestor(other.level).corner == other.corner
    }

    pub fn corner_string(&self) -> String {
        self.corner
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}[{}]", self.grid, self.level, self.corner_string())
    }
}

#[derive(Serialize, Deserialize)]
struct CubeJson {
    grid: String,
    level: i32,
    corner: Vec<i64>,
    open: bool,
    frozen: Vec<(usize, f64)>,
}

impl Serialize for CubeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubeJson {
            grid: self.grid.tag(),
            level: self.level,
            corner: self.corner.to_vec(),
            open: self.open,
            frozen: (0..self.dim())
                .filter(|&i| self.is_frozen(i))
                .map(|i| (i, self.lower(i)))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CubeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CubeJson::deserialize(d)?;
        let grid = GridKind::parse(&j.grid).map_err(D::Error::custom)?;
        let mut id = CubeId::new(grid, j.level, &j.corner).with_open(j.open);
        for (axis, value) in j.frozen {
            if axis >= j.corner.len() {
                return Err(D::Error::custom(format!("frozen axis {axis} out of range")));
            }
            if id.lower(axis) != value {
                return Err(D::Error::custom(format!(
                    "frozen value {value} disagrees with corner on axis {axis}"
                )));
            }
            id.frozen |= 1 << axis;
        }
        Ok(id)
    }
}

/// Geometric cube: `center + side * [-1/2, 1/2)` on free axes, the point
/// `center_i` on frozen axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
    pub frozen: u8,
    pub open: bool,
}

impl Cube {
    pub fn new(center: &[f64], side: f64) -> Self {
        Self {
            center: Point::from_slice(center),
            side,
            frozen: 0,
            open: false,
        }
    }

    /// `lambda * [-1/2, 1/2)^n`.
    pub fn origin_box(lambda: f64, dim: usize) -> Self {
        Self::new(&vec![0.0; dim], lambda)
    }

    pub fn from_lower(lower: &[f64], side: f64) -> Self {
        let c: Point = lower.iter().map(|l| l + 0.5 * side).collect();
        Self::new(&c, side)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    pub fn is_frozen(&self, axis: usize) -> bool {
        self.frozen & (1 << axis) != 0
    }

    #[inline]
    pub fn lo(&self, axis: usize) -> f64 {
        if self.is_frozen(axis) {
            self.center[axis]
        } else {
            self.center[axis] - 0.5 * self.side
        }
    }

    #[inline]
    pub fn hi(&self, axis: usize) -> f64 {
        if self.is_frozen(axis) {
            self.center[axis]
        } else {
            self.center[axis] + 0.5 * self.side
        }
    }

    pub fn diam(&self) -> f64 {
        let free = self.dim() - self.frozen.count_ones() as usize;
        self.side * (free as f64).sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|i| {
            let (lo, hi) = (self.lo(i), self.hi(i));
            if self.is_frozen(i) {
                x[i] == lo
            } else if self.open {
                x[i] > lo && x[i] < hi
            } else {
                x[i] >= lo && x[i] < hi
            }
        })
    }

    /// Same center, side scaled by `lambda`.
    pub fn dilate(&self, lambda: f64) -> Cube {
        Cube {
            center: self.center.clone(),
            side: self.side * lambda,
            frozen: self.frozen,
            open: self.open,
        }
    }

    /// Halves along every free axis.
    pub fn children(&self) -> Vec<Cube> {
        let free: Vec<usize> = (0..self.dim()).filter(|&i| !self.is_frozen(i)).collect();
        let q = 0.25 * self.side;
        (0..1u32 << free.len())
            .map(|bits| {
                let mut c = self.center.clone();
                for (b, &axis) in free.iter().enumerate() {
                    c[axis] += if (bits >> b) & 1 == 1 { q } else { -q };
                }
                Cube {
                    center: c,
                    side: 0.5 * self.side,
                    frozen: self.frozen,
                    open: self.open,
                }
            })
            .collect()
    }

    /// Distance between closures.
    pub fn dist(&self, other: &Cube) -> f64 {
        (0..self.dim())
            .map(|i| {
                let g = (other.lo(i) - self.hi(i)).max(self.lo(i) - other.hi(i)).max(0.0);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn dist_point(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let g = (self.lo(i) - x[i]).max(x[i] - self.hi(i)).max(0.0);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `1 + dist(self, other) / max side`.
    pub fn rdist(&self, other: &Cube) -> f64 {
        1.0 + self.dist(other) / self.side.max(other.side)
    }

    /// Closure of `self` inside the relative interior of `other`.
    fn closure_inside_interior(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|i| {
            if other.is_frozen(i) {
                self.is_frozen(i) && self.center[i] == other.center[i]
            } else {
                self.lo(i) > other.lo(i) && self.hi(i) < other.hi(i)
            }
        })
    }

    /// Distance from the closure of `self` to the boundary of `other`.
    pub fn dist_to_boundary(&self, other: &Cube) -> f64 {
        if self.closure_inside_interior(other) {
            (0..self.dim())
                .filter(|&i| !other.is_frozen(i))
                .map(|i| (self.lo(i) - other.lo(i)).min(other.hi(i) - self.hi(i)))
                .fold(f64::INFINITY, f64::min)
        } else {
            self.dist(other)
        }
    }

    /// Distance to the union of the boundaries of the children of `other`.
    pub fn dist_to_skeleton(&self, other: &Cube) -> f64 {
        other
            .children()
            .iter()
            .map(|c| self.dist_to_boundary(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// `self ⊆ other` as half-open boxes.
    pub fn is_within(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|i| self.lo(i) >= other.lo(i) && self.hi(i) <= other.hi(i))
    }
}

/// Membership in the lagom window `D_M`; `M = 0` is the empty window.
pub fn in_lagom(cube: &Cube, m: u32) -> bool {
    if m == 0 {
        return false;
    }
    let big = pow2(m as i32);
    let l = cube.side;
    l >= 1.0 / big && l <= big && cube.rdist(&Cube::origin_box(big, cube.dim())) <= f64::from(m)
}

/// Grid with a configured level range; navigation outside it is a range error.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub kind: GridKind,
    pub dim: usize,
    pub levels: RangeInclusive<i32>,
}

impl Grid {
    pub fn new(kind: GridKind, dim: usize) -> Result<Self> {
        if dim == 0 || dim > 8 {
            return Err(range(format!("dimension {dim} not supported")));
        }
        match kind {
            GridKind::Boundary(r) if usize::from(r) >= dim || r == 0 => {
                return Err(range(format!("boundary dimension {r} needs 1 <= r < {dim}")))
            }
            GridKind::Shifted(i) if i == 0 || usize::from(i) > PRIMES.len() => {
                return Err(range(format!("shifted grid index {i} unsupported")))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            dim,
            levels: MIN_LEVEL..=MAX_LEVEL,
        })
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(GridKind::Standard, dim).expect("valid dimension")
    }

    pub fn with_levels(mut self, levels: RangeInclusive<i32>) -> Self {
        self.levels = levels;
        self
    }

    pub fn shift(&self) -> f64 {
        self.kind.shift()
    }

    fn check_level(&self, level: i32) -> Result<()> {
        if self.levels.contains(&level) {
            Ok(())
        } else {
            Err(range(format!(
                "level {level} outside {}..={}",
                self.levels.start(),
                self.levels.end()
            )))
        }
    }

    fn check_cube(&self, c: &CubeId) -> Result<()> {
        if c.grid != self.kind || c.dim() != self.dim {
            return Err(range(format!("cube {c} does not belong to grid {}", self.kind)));
        }
        self.check_level(c.level)
    }

    pub fn parent(&self, c: &CubeId) -> Result<CubeId> {
        self.check_cube(c)?;
        self.check_level(c.level - 1)?;
        c.parent()
    }

    pub fn children(&self, c: &CubeId) -> Result<Vec<CubeId>> {
        self.check_cube(c)?;
        self.check_level(c.level + 1)?;
        Ok(c.children())
    }

    /// The unique level-`level` cube holding `x`; full-dimensional grids only.
    pub fn containing(&self, x: &[f64], level: i32) -> Result<CubeId> {
        self.check_level(level)?;
        if matches!(self.kind, GridKind::Boundary(_)) {
            return Err(range("containing() is defined for full-dimensional grids"));
        }
        if x.len() != self.dim {
            return Err(range(format!("point has dimension {}, grid {}", x.len(), self.dim)));
        }
        Ok(CubeId {
            grid: self.kind,
            level,
            corner: corner_of(x, self.shift(), level),
            open: false,
            frozen: 0,
        })
    }

    /// The `3^n` same-level cubes whose closures meet the closure of `c`,
    /// `c` included.
    pub fn frontier(&self, c: &CubeId) -> Result<Vec<CubeId>> {
        self.check_cube(c)?;
        let free: Vec<usize> = (0..c.dim()).filter(|&i| !c.is_frozen(i)).collect();
        let count = 3usize.pow(free.len() as u32);
        Ok((0..count)
            .map(|mut code| {
                let mut id = c.clone();
                for &axis in &free {
                    id.corner[axis] += (code % 3) as i64 - 1;
                    code /= 3;
                }
                id
            })
            .collect())
    }
}

#[inline]
pub fn corner_of(x: &[f64], shift: f64, level: i32) -> Corner {
    let scale = pow2(level);
    x.iter().map(|&v| ((v - shift) * scale).floor() as i64).collect()
}

/// True when some coordinate of `x` lies on the level-`depth` skeleton of the
/// standard grid (and hence on every coarser one).
pub fn on_skeleton(x: &[f64], depth: i32) -> bool {
    let scale = pow2(depth);
    x.iter().any(|&v| {
        let u = v * scale;
        u == u.floor()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Whitney {
    pub cubes: Vec<CubeId>,
    /// Deepest examined cubes that did not qualify.
    pub residue: Vec<CubeId>,
    /// Set when no cube qualified within the depth budget.
    pub warning: bool,
}

/// Maximal dyadic `S ⊂ R` with `dist(S, skeleton of R) > 0` and `3S ⊂ R`,
/// searched down to `max_depth` levels below `R`.
pub fn whitney(r: &CubeId, max_depth: u32) -> Result<Whitney> {
    if max_depth < 2 {
        return Err(range("whitney needs max_depth >= 2"));
    }
    let rg = r.to_cube();
    let qualifies = |s: &CubeId| {
        let g = s.to_cube();
        g.dist_to_skeleton(&rg) > 0.0 && g.dilate(3.0).is_within(&rg)
    };
    let mut cubes = Vec::new();
    let mut frontier = r.children();
    for depth in 1..=max_depth {
        let mut next = Vec::new();
        for s in frontier {
            if qualifies(&s) {
                cubes.push(s);
            } else if depth < max_depth {
                next.extend(s.children());
            } else {
                next.push(s);
            }
        }
        frontier = next;
    }
    cubes.sort();
    frontier.sort();
    let warning = cubes.is_empty();
    Ok(Whitney {
        cubes,
        residue: frontier,
        warning,
    })
}

/// `#{S : x ∈ 2S}`.
pub fn overlap_count(cubes: &[CubeId], x: &[f64]) -> usize {
    cubes.iter().filter(|s| s.to_cube().dilate(2.0).contains(x)).count()
}

/// Closed box and level range for enumerating faces.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceWindow {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub levels: RangeInclusive<i32>,
}

/// All `r`-dimensional dyadic faces whose closure lies in the closed window.
pub fn boundary_cubes(dim: usize, r: usize, window: &FaceWindow) -> Result<Vec<CubeId>> {
    if r == 0 || r >= dim {
        return Err(range(format!("boundary dimension {r} needs 1 <= r < {dim}")));
    }
    if window.lo.len() != dim || window.hi.len() != dim {
        return Err(range("window dimension mismatch"));
    }
    let mut out = Vec::new();
    for level in window.levels.clone() {
        let s = pow2(level);
        let ranges: Vec<(i64, i64)> = (0..dim)
            .map(|i| ((window.lo[i] * s).ceil() as i64, (window.hi[i] * s).floor() as i64))
            .collect();
        for mask in 0u32..(1 << dim) {
            if mask.count_ones() as usize != dim - r {
                continue;
            }
            // frozen axes take the whole closed range, free axes stop one short
            let spans: Vec<(i64, i64)> = (0..dim)
                .map(|i| {
                    let (a, b) = ranges[i];
                    if mask & (1 << i) != 0 {
                        (a, b)
                    } else {
                        (a, b - 1)
                    }
                })
                .collect();
            if spans.iter().any(|(a, b)| a > b) {
                continue;
            }
            let mut corner: Vec<i64> = spans.iter().map(|s| s.0).collect();
            'outer: loop {
                out.push(
                    CubeId::new(GridKind::Boundary(r as u8), level, &corner).with_frozen(mask as u8),
                );
                for i in 0..dim {
                    if corner[i] < spans[i].1 {
                        corner[i] += 1;
                        continue 'outer;
                    }
                    corner[i] = spans[i].0;
                }
                break;
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Faces of `cube` of dimension `dim - 1`: the `2n` closed sides.
pub fn sides_of(c: &CubeId) -> Vec<CubeId> {
    let r = c.dim() - 1;
    let mut out = Vec::new();
    for axis in 0..c.dim() {
        for off in 0..2 {
            let mut corner = c.corner.clone();
            corner[axis] += off;
            out.push(CubeId {
                grid: GridKind::Boundary(r as u8),
                level: c.level,
                corner,
                open: false,
                frozen: 1 << axis,
            });
        }
    }
    out
}

//! Atomic measures, canonical generators and density functionals.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{range, Error, Result};
use crate::grid::{corner_of, on_skeleton, pow2, Corner, Cube, CubeId, GridKind};
use crate::reduce::pairwise_sum;

/// Finite positive combination of point masses in `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    alpha: f64,
    resolution: f64,
    label: String,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// `points` is row-major with `dim` coordinates per atom.
    pub fn new(
        dim: usize,
        alpha: f64,
        resolution: f64,
        label: impl Into<String>,
        points: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if dim == 0 || dim > 8 {
            problems.push(format!("dimension {dim} unsupported"));
        }
        if !(alpha > 0.0 && alpha <= dim as f64) {
            problems.push(format!("alpha {alpha} not in (0, {dim}]"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            problems.push(format!("resolution {resolution} must be positive"));
        }
        if dim > 0 && points.len() != weights.len() * dim {
            problems.push(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                points.len(),
                weights.len()
            ));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            problems.push(format!("weight {} at atom {i} is not positive", weights[i]));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            problems.push(format!("non-finite coordinate at index {i}"));
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            dim,
            alpha,
            resolution,
            label: label.into(),
            points,
            weights,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= self.dim as f64) {
            return Err(Error::Validation(vec![format!("alpha {alpha} not in (0, {}]", self.dim)]));
        }
        self.alpha = alpha;
        Ok(self)
    }

    #[inline]
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Finest level whose cubes are at least the resolution.
    pub fn resolution_level(&self) -> i32 {
        (-self.resolution.log2() + 1e-9).floor() as i32
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(self.weights.iter().copied())
    }

    /// Atoms lying on the standard skeleton at `depth`.
    pub fn skeleton_atoms(&self, depth: i32) -> Vec<usize> {
        (0..self.len()).filter(|&i| on_skeleton(self.point(i), depth)).collect()
    }

    pub fn validate_off_skeleton(&self, depth: i32) -> Result<()> {
        let bad = self.skeleton_atoms(depth);
        if bad.is_empty() {
            return Ok(());
        }
        Err(Error::Validation(
            bad.iter()
                .take(10)
                .map(|&i| format!("atom {i} at {:?} lies on the level-{depth} skeleton", self.point(i)))
                .collect(),
        ))
    }

    pub fn atoms_in(&self, cube: &Cube) -> Vec<u32> {
        (0..self.len())
            .filter(|&i| cube.contains(self.point(i)))
            .map(|i| i as u32)
            .collect()
    }

    pub fn atoms_in_id(&self, id: &CubeId) -> Vec<u32> {
        (0..self.len())
            .filter(|&i| id.contains(self.point(i)))
            .map(|i| i as u32)
            .collect()
    }

    pub fn mass_of(&self, atoms: &[u32]) -> f64 {
        pairwise_sum(atoms.iter().map(|&i| self.weights[i as usize]))
    }

    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        pairwise_sum((0..self.len()).map(|i| self.weights[i] * f[i] * g[i]))
    }

    pub fn norm2(&self, f: &[Complex64]) -> f64 {
        pairwise_sum((0..self.len()).map(|i| self.weights[i] * f[i].norm_sqr()))
    }
}

/// Canonical generators.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    /// `atoms` midpoints on `[0,1] x {y0}`, weight `1/atoms`.
    Segment { atoms: usize, y0: f64 },
    /// `side^2` cell midpoints of the unit square, weight `1/side^2`.
    Square { side: usize },
    /// Generation-`g` quarter-Cantor corner set.
    Cantor4 { generation: u32 },
    /// Distinct random cell midpoints of the depth-`depth` grid in
    /// `[-2^span, 2^span)^dim`, weights uniform in `[0.1, 1)`.
    Random {
        dim: usize,
        atoms: usize,
        depth: i32,
        span: i32,
        seed: u64,
    },
}

pub const DEFAULT_Y0: f64 = 1.0 / 3.0;

pub fn generate(kind: &MeasureKind) -> Result<AtomicMeasure> {
    match *kind {
        MeasureKind::Segment { atoms, y0 } => {
            check_power_of_two(atoms, 4, "segment atoms")?;
            let r = atoms.trailing_zeros() as i32;
            if on_skeleton(&[y0], r) || !y0.is_finite() {
                return Err(Error::Validation(vec![format!(
                    "y0 = {y0} lies on the level-{r} skeleton"
                )]));
            }
            let n = atoms as f64;
            let points = (0..atoms)
                .flat_map(|j| [(2 * j + 1) as f64 / (2.0 * n), y0])
                .collect();
            AtomicMeasure::new(2, 1.0, 1.0 / n, "segment", points, vec![1.0 / n; atoms])
        }
        MeasureKind::Square { side } => {
            check_power_of_two(side, 2, "square side")?;
            let n = side as f64;
            let mut points = Vec::with_capacity(2 * side * side);
            for b in 0..side {
                for a in 0..side {
                    points.push((2 * a + 1) as f64 / (2.0 * n));
                    points.push((2 * b + 1) as f64 / (2.0 * n));
                }
            }
            AtomicMeasure::new(2, 1.0, 1.0 / n, "square", points, vec![1.0 / (n * n); side * side])
        }
        MeasureKind::Cantor4 { generation } => {
            if generation == 0 || generation > 10 {
                return Err(range(format!("cantor generation {generation} not in 1..=10")));
            }
            let mut corners = vec![(0.0f64, 0.0f64)];
            let mut s = 1.0;
            for _ in 0..generation {
                s /= 4.0;
                corners = corners
                    .iter()
                    .flat_map(|&(x, y)| {
                        [(x, y), (x + 3.0 * s, y), (x, y + 3.0 * s), (x + 3.0 * s, y + 3.0 * s)]
                    })
                    .collect();
            }
            let count = corners.len();
            let points = corners
                .iter()
                .flat_map(|&(x, y)| [x + 0.5 * s, y + 0.5 * s])
                .collect();
            AtomicMeasure::new(2, 1.0, s, "cantor4", points, vec![1.0 / count as f64; count])
        }
        MeasureKind::Random {
            dim,
            atoms,
            depth,
            span,
            seed,
        } => {
            let per_axis = 1u64 << (depth + span + 1);
            let cells = per_axis.checked_pow(dim as u32).filter(|c| *c <= 1 << 40);
            let cells = cells.ok_or_else(|| range("random measure grid too large"))?;
            if (atoms as u64) > cells || atoms == 0 {
                return Err(range(format!("{atoms} atoms do not fit {cells} cells")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen: Vec<u64> = if cells <= 1 << 24 {
                sample(&mut rng, cells as usize, atoms)
                    .into_iter()
                    .map(|c| c as u64)
                    .collect()
            } else {
                let mut set = std::collections::BTreeSet::new();
                while set.len() < atoms {
                    set.insert(rng.random_range(0..cells));
                }
                set.into_iter().collect()
            };
            chosen.sort_unstable();
            let h = pow2(-depth);
            let origin = -pow2(span);
            let mut points = Vec::with_capacity(atoms * dim);
            for mut c in chosen {
                for _ in 0..dim {
                    points.push(origin + ((c % per_axis) as f64 + 0.5) * h);
                    c /= per_axis;
                }
            }
            let weights = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
            AtomicMeasure::new(dim, 1.0_f64.min(dim as f64), h, "random", points, weights)
        }
    }
}

fn check_power_of_two(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min || !n.is_power_of_two() {
        return Err(Error::Validation(vec![format!(
            "{what} = {n} must be a power of two >= {min}"
        )]));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    version: u32,
    dim: usize,
    alpha: f64,
    resolution: f64,
    label: String,
    atoms: AtomsJson,
}

#[derive(Serialize, Deserialize)]
struct AtomsJson {
    x: Vec<Vec<f64>>,
    w: Vec<f64>,
}

impl AtomicMeasure {
    pub fn to_json(&self) -> String {
        let file = MeasureFile {
            version: 1,
            dim: self.dim,
            alpha: self.alpha,
            resolution: self.resolution,
            label: self.label.clone(),
            atoms: AtomsJson {
                x: (0..self.len()).map(|i| self.point(i).to_vec()).collect(),
                w: self.weights.clone(),
            },
        };
        serde_json::to_string(&file).expect("measure serializes")
    }

    /// Parses and validates, including the off-skeleton check at the
    /// resolution level.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if file.version != 1 {
            return Err(Error::Parse {
                location: "version".into(),
                message: format!("unsupported version {}", file.version),
            });
        }
        if file.atoms.x.len() != file.atoms.w.len() {
            return Err(Error::Parse {
                location: "atoms".into(),
                message: format!("{} positions but {} weights", file.atoms.x.len(), file.atoms.w.len()),
            });
        }
        if let Some(i) = file.atoms.x.iter().position(|p| p.len() != file.dim) {
            return Err(Error::Parse {
                location: format!("atoms.x[{i}]"),
                message: format!("expected {} coordinates", file.dim),
            });
        }
        let points = file.atoms.x.into_iter().flatten().collect();
        let mu = Self::new(file.dim, file.alpha, file.resolution, file.label, points, file.atoms.w)?;
        mu.validate_off_skeleton(mu.resolution_level())?;
        Ok(mu)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Nonempty cube of a level partition.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub id: CubeId,
    pub atoms: Vec<u32>,
    pub mass: f64,
}

/// Nonempty level-`level` cubes of a full-dimensional grid, sorted by corner.
pub fn cells_at(mu: &AtomicMeasure, kind: GridKind, level: i32) -> Vec<Cell> {
    let shift = kind.shift();
    let mut groups: HashMap<Corner, Vec<u32>> = HashMap::new();
    for i in 0..mu.len() {
        groups
            .entry(corner_of(mu.point(i), shift, level))
            .or_default()
            .push(i as u32);
    }
    let mut cells: Vec<Cell> = groups
        .into_iter()
        .map(|(corner, atoms)| Cell {
            id: CubeId {
                grid: kind,
                level,
                corner,
                open: false,
                frozen: 0,
            },
            mass: mu.mass_of(&atoms),
            atoms,
        })
        .collect();
    cells.sort_by(|a, b| a.id.cmp(&b.id));
    cells
}

/// Mass and `μ`-average of `f` over `I`; the average of an empty cube is 0.
pub fn mass_and_average(mu: &AtomicMeasure, cube: &CubeId, f: &[Complex64]) -> (f64, Complex64) {
    let atoms = mu.atoms_in_id(cube);
    let mass = mu.mass_of(&atoms);
    if mass == 0.0 {
        return (0.0, Complex64::new(0.0, 0.0));
    }
    let s = pairwise_sum(atoms.iter().map(|&i| mu.weight(i as usize) * f[i as usize]));
    (mass, s / mass)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub c_growth: f64,
    pub ceiling: f64,
    pub violations: Vec<(CubeId, f64)>,
    pub cubes_scanned: usize,
}

pub fn growth_check(
    mu: &AtomicMeasure,
    alpha: f64,
    levels: std::ops::RangeInclusive<i32>,
    grids: &[GridKind],
    ceiling: f64,
) -> Result<GrowthReport> {
    if *levels.end() > mu.resolution_level() {
        return Err(range(format!(
            "level {} is finer than the resolution level {}",
            levels.end(),
            mu.resolution_level()
        )));
    }
    let mut c_growth: f64 = 0.0;
    let mut violations = Vec::new();
    let mut scanned = 0;
    for &kind in grids {
        if matches!(kind, GridKind::Boundary(_)) {
            return Err(range("growth_check scans full-dimensional grids"));
        }
        for level in levels.clone() {
            for cell in cells_at(mu, kind, level) {
                let rho = cell.mass / cell.id.side().powf(alpha);
                scanned += 1;
                c_growth = c_growth.max(rho);
                if rho > ceiling {
                    violations.push((cell.id, rho));
                }
            }
        }
    }
    Ok(GrowthReport {
        c_growth,
        ceiling,
        violations,
        cubes_scanned: scanned,
    })
}

/// How the inner density is maximised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RhoInMode {
    /// Euclidean balls over candidate centres and a dyadic radius ladder.
    #[default]
    Balls,
    /// Dyadic subcubes in place of balls; exact arithmetic.
    Dyadic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityProfile {
    pub rho: f64,
    pub rho_in: f64,
    pub rho_out: f64,
    pub rho_mu: f64,
    /// Smallest ball radius used for the inner density.
    pub floor: f64,
    /// Bound on the error of the outer series.
    pub tail_bound: f64,
}

pub fn density_profile(mu: &AtomicMeasure, cube: &Cube, delta: f64, mode: RhoInMode) -> Result<DensityProfile> {
    let h = mu.resolution();
    if cube.side < h * (1.0 - 1e-12) {
        return Err(range(format!("cube side {} below resolution {h}", cube.side)));
    }
    let atoms = mu.atoms_in(cube);
    density_profile_with_atoms(mu, cube, &atoms, delta, mode)
}

pub fn density_profile_id(mu: &AtomicMeasure, id: &CubeId, delta: f64, mode: RhoInMode) -> Result<DensityProfile> {
    density_profile(mu, &id.to_cube(), delta, mode)
}

pub(crate) fn density_profile_with_atoms(
    mu: &AtomicMeasure,
    cube: &Cube,
    atoms: &[u32],
    delta: f64,
    mode: RhoInMode,
) -> Result<DensityProfile> {
    let alpha = mu.alpha();
    let mass = mu.mass_of(atoms);
    let rho = mass / cube.side.powf(alpha);
    let rho_in = match mode {
        RhoInMode::Balls => rho_in_balls(mu, cube, atoms),
        RhoInMode::Dyadic => rho_in_dyadic(mu, cube, atoms),
    };
    let (rho_out, tail_bound) = rho_out(mu, cube, delta);
    Ok(DensityProfile {
        rho,
        rho_in,
        rho_out,
        rho_mu: rho_in + rho_out,
        floor: mu.resolution(),
        tail_bound,
    })
}

/// Centers of all nonempty dyadic subcubes of `cube` (itself included) of
/// side at least `h`.
fn subcube_centers(mu: &AtomicMeasure, cube: &Cube, atoms: &[u32], h: f64, out: &mut Vec<(Cube, f64)>) {
    if atoms.is_empty() {
        return;
    }
    out.push((cube.clone(), mu.mass_of(atoms)));
    if 0.5 * cube.side < h * (1.0 - 1e-12) {
        return;
    }
    for child in cube.children() {
        let inner: Vec<u32> = atoms
            .iter()
            .copied()
            .filter(|&i| child.contains(mu.point(i as usize)))
            .collect();
        subcube_centers(mu, &child, &inner, h, out);
    }
}

fn rho_in_dyadic(mu: &AtomicMeasure, cube: &Cube, atoms: &[u32]) -> f64 {
    let mut subs = Vec::new();
    subcube_centers(mu, cube, atoms, mu.resolution(), &mut subs);
    subs.iter()
        .map(|(c, m)| m / c.side.powf(mu.alpha()))
        .fold(0.0, f64::max)
}

fn rho_in_balls(mu: &AtomicMeasure, cube: &Cube, atoms: &[u32]) -> f64 {
    if atoms.is_empty() {
        return 0.0;
    }
    let h = mu.resolution();
    let alpha = mu.alpha();
    let mut ladder = vec![h];
    while *ladder.last().unwrap() < 2.0 * cube.diam() {
        let next = 2.0 * ladder.last().unwrap();
        ladder.push(next);
    }
    let scale: Vec<f64> = ladder.iter().map(|l| l.powf(alpha)).collect();
    let mut subs = Vec::new();
    subcube_centers(mu, cube, atoms, h, &mut subs);
    let mut centers: Vec<Vec<f64>> = atoms.iter().map(|&i| mu.point(i as usize).to_vec()).collect();
    centers.extend(subs.into_iter().map(|(c, _)| c.center.to_vec()));
    let inv_h2 = 1.0 / (h * h);
    let dim = mu.dim();
    let nbins = ladder.len();
    centers
        .par_iter()
        .map(|t| {
            let mut bins = vec![0.0f64; nbins];
            for &i in atoms {
                let x = mu.point(i as usize);
                let d2: f64 = (0..dim).map(|a| (x[a] - t[a]) * (x[a] - t[a])).sum();
                let bin = ladder_bin(d2 * inv_h2);
                if bin < nbins {
                    bins[bin] += mu.weight(i as usize);
                }
            }
            let mut cum = 0.0;
            let mut best: f64 = 0.0;
            for (b, w) in bins.iter().enumerate() {
                cum += w;
                best = best.max(cum / scale[b]);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Smallest `i` with `sqrt(q) < 2^i`.
#[inline]
fn ladder_bin(q: f64) -> usize {
    if q < 1.0 {
        return 0;
    }
    let e = ((q.to_bits() >> 52) & 0x7ff) as i64 - 1023;
    (e.div_euclid(2) + 1) as usize
}

/// Outer density `Σ_m μ(mI)/ℓ(mI)^α m^{-(δ/2+1)}`; the saturated tail is
/// summed in closed form.
fn rho_out(mu: &AtomicMeasure, cube: &Cube, delta: f64) -> (f64, f64) {
    let alpha = mu.alpha();
    let s = alpha + 0.5 * delta + 1.0;
    let mut first: Vec<(u64, f64)> = (0..mu.len())
        .filter_map(|i| first_dilation(cube, mu.point(i)).map(|m| (m, mu.weight(i))))
        .collect();
    if first.is_empty() {
        return (0.0, 0.0);
    }
    first.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut breaks: Vec<(u64, f64)> = Vec::new();
    let mut cum = 0.0;
    for (m, w) in first {
        cum += w;
        match breaks.last_mut() {
            Some(last) if last.0 == m => last.1 = cum,
            _ => breaks.push((m, cum)),
        }
    }
    let mut terms = Vec::with_capacity(breaks.len());
    let mut err = 0.0;
    for (k, &(m, c)) in breaks.iter().enumerate() {
        let (sum, e) = match breaks.get(k + 1) {
            Some(&(next, _)) => power_sum(m, next - 1, s),
            None => zeta_tail(s, m),
        };
        terms.push(c * sum);
        err += c * e;
    }
    let ls = cube.side.powf(alpha);
    (pairwise_sum(terms) / ls, err / ls + f64::EPSILON)
}

/// Smallest `m >= 1` with `x ∈ mI`.
fn first_dilation(cube: &Cube, x: &[f64]) -> Option<u64> {
    let mut m: f64 = 1.0;
    for (a, &xa) in x.iter().enumerate().take(cube.dim()) {
        if cube.is_frozen(a) {
            if xa != cube.center[a] {
                return None;
            }
            continue;
        }
        let u = 2.0 * (xa - cube.center[a]) / cube.side;
        let need = if u < 0.0 { (-u).ceil() } else { u.floor() + 1.0 };
        m = m.max(need);
    }
    Some(m as u64)
}

/// `Σ_{m=a}^{b} m^{-s}` with an error bound.
fn power_sum(a: u64, b: u64, s: f64) -> (f64, f64) {
    if b < a {
        return (0.0, 0.0);
    }
    if b - a < 256 {
        return (pairwise_sum((a..=b).map(|m| (m as f64).powf(-s))), 0.0);
    }
    let (x, ex) = zeta_tail(s, a);
    let (y, ey) = zeta_tail(s, b + 1);
    (x - y, ex + ey)
}

/// `Σ_{m>=a} m^{-s}` for `s > 1`, Euler-Maclaurin after a direct head.
pub fn zeta_tail(s: f64, a: u64) -> (f64, f64) {
    const START: u64 = 64;
    let a = a.max(1);
    let n0 = a.max(START);
    let head: f64 = pairwise_sum((a..n0).map(|m| (m as f64).powf(-s)));
    let n = n0 as f64;
    // B2/2!, B4/4!, B6/6!, B8/8!
    const C: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (k, c) in C.iter().enumerate().take(3) {
        tail += c * rising * power;
        rising *= (s + 2.0 * k as f64 + 1.0) * (s + 2.0 * k as f64 + 2.0);
        power /= n * n;
    }
    let err = (C[3] * rising * power).abs();
    (head + tail, err)
}

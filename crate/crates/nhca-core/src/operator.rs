//! Truncated operators on atomic measures: application, dual pairs, testing
//! norms and wavelet pair tables.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Cube, CubeId};
use crate::haar::{Field, HaarCoefficientMap, HaarSystem};
use crate::kernel::{BaseKernel, KernelSpec};
use crate::measure::AtomicMeasure;
use crate::reduce::pairwise_sum;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Kernel bound to a measure with the spatial cutoffs precomputed.
pub struct BoundKernel<'a> {
    pub k: &'a KernelSpec,
    pub mu: &'a AtomicMeasure,
    spatial: Vec<f64>,
}

impl<'a> BoundKernel<'a> {
    pub fn new(k: &'a KernelSpec, mu: &'a AtomicMeasure) -> Self {
        Self {
            spatial: k.spatial_factors(mu),
            k,
            mu,
        }
    }

    /// `K(x_a, x_b)`; the diagonal of a truncated kernel is 0.
    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> Result<Complex64> {
        let (t, x) = (self.mu.point(a), self.mu.point(b));
        match &self.k.truncation {
            Some(tr) => Ok(self.k.truncated(tr, t, x, self.spatial[a], self.spatial[b])),
            None => {
                if a == b && !matches!(self.k.base, BaseKernel::Constant(_)) {
                    return Err(Error::Diagonal { atom: a });
                }
                self.k.evaluate(t, x)
            }
        }
    }

    pub fn antisymmetric(&self) -> bool {
        matches!(self.k.base, BaseKernel::Cauchy)
    }

    /// `Σ_{k∈src} w_k K(x_k, x_j) f(x_k)` for every `j ∈ dst`.
    pub fn apply_on(&self, f: &[Complex64], src: &[u32], dst: &[u32]) -> Result<Field> {
        dst.par_iter()
            .map(|&j| {
                let j = j as usize;
                let mut acc = crate::reduce::Pairwise::new();
                for &k in src {
                    let k = k as usize;
                    let v = f[k];
                    if v == ZERO {
                        continue;
                    }
                    acc.push(self.entry(k, j)? * (self.mu.weight(k) * v));
                }
                Ok(acc.total())
            })
            .collect()
    }

    /// Transpose kernel `K(x_j, x_k)`.
    pub fn apply_transpose_on(&self, f: &[Complex64], src: &[u32], dst: &[u32]) -> Result<Field> {
        dst.par_iter()
            .map(|&j| {
                let j = j as usize;
                let mut acc = crate::reduce::Pairwise::new();
                for &k in src {
                    let k = k as usize;
                    let v = f[k];
                    if v == ZERO {
                        continue;
                    }
                    acc.push(self.entry(j, k)? * (self.mu.weight(k) * v));
                }
                Ok(acc.total())
            })
            .collect()
    }

    fn all(&self) -> Vec<u32> {
        (0..self.mu.len() as u32).collect()
    }
}

/// `(Tf)(x_j) = Σ_k w_k K(x_k, x_j) f(x_k)`.
pub fn apply(k: &KernelSpec, mu: &AtomicMeasure, f: &[Complex64]) -> Result<Field> {
    let b = BoundKernel::new(k, mu);
    let all = b.all();
    b.apply_on(f, &all, &all)
}

/// `(T^t f)(x_j) = Σ_k w_k K(x_j, x_k) f(x_k)`.
pub fn apply_transpose(k: &KernelSpec, mu: &AtomicMeasure, f: &[Complex64]) -> Result<Field> {
    let b = BoundKernel::new(k, mu);
    let all = b.all();
    b.apply_transpose_on(f, &all, &all)
}

/// `Σ_{j,k} w_j w_k |K(x_k, x_j) f(x_k) g(x_j)|`, the conditioning scale of
/// [`bilinear`].
pub fn bilinear_abs(k: &KernelSpec, mu: &AtomicMeasure, f: &[Complex64], g: &[Complex64]) -> Result<f64> {
    let b = BoundKernel::new(k, mu);
    let rows: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|j| {
            if g[j] == ZERO {
                return Ok(0.0);
            }
            let mut acc = crate::reduce::Pairwise::new();
            for (kk, v) in f.iter().enumerate() {
                if *v != ZERO {
                    acc.push(b.entry(kk, j)?.norm() * mu.weight(kk) * v.norm());
                }
            }
            Ok(acc.total() * mu.weight(j) * g[j].norm())
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(rows))
}

/// `⟨Tf, g⟩ = Σ_j w_j (Tf)(x_j) g(x_j)`, no conjugation.
pub fn bilinear(k: &KernelSpec, mu: &AtomicMeasure, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
    let tf = apply(k, mu, f)?;
    Ok(mu.inner(&tf, g))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestingStat {
    pub cube: CubeId,
    /// Dilation applied to `cube` before testing.
    pub dilation: f64,
    pub side: f64,
    pub mass: f64,
    pub t_norm: f64,
    pub tstar_norm: f64,
    pub f_t: f64,
    /// Set when the tested region carries no mass.
    pub empty: bool,
}

/// `‖χ_I T χ_I‖`, `‖χ_I T* χ_I‖` over the given atoms.
pub fn testing_norms(b: &BoundKernel<'_>, atoms: &[u32]) -> Result<(f64, f64)> {
    let ones = vec![Complex64::new(1.0, 0.0); b.mu.len()];
    let t = b.apply_on(&ones, atoms, atoms)?;
    let norm = |v: &[Complex64]| {
        pairwise_sum(atoms.iter().zip(v).map(|(&j, z)| b.mu.weight(j as usize) * z.norm_sqr())).sqrt()
    };
    let tn = norm(&t);
    let sn = if b.antisymmetric() {
        tn
    } else {
        norm(&b.apply_transpose_on(&ones, atoms, atoms)?)
    };
    Ok((tn, sn))
}

pub fn testing_stat_region(b: &BoundKernel<'_>, id: &CubeId, dilation: f64) -> Result<TestingStat> {
    let region = id.to_cube().dilate(dilation);
    let atoms = if dilation == 1.0 {
        b.mu.atoms_in_id(id)
    } else {
        b.mu.atoms_in(&region)
    };
    let mass = b.mu.mass_of(&atoms);
    if atoms.is_empty() {
        return Ok(TestingStat {
            cube: id.clone(),
            dilation,
            side: region.side,
            mass: 0.0,
            t_norm: 0.0,
            tstar_norm: 0.0,
            f_t: 0.0,
            empty: true,
        });
    }
    let (t_norm, tstar_norm) = testing_norms(b, &atoms)?;
    Ok(TestingStat {
        cube: id.clone(),
        dilation,
        side: region.side,
        mass,
        t_norm,
        tstar_norm,
        f_t: t_norm.max(tstar_norm) / mass.sqrt(),
        empty: false,
    })
}

pub fn testing_stats(k: &KernelSpec, mu: &AtomicMeasure, id: &CubeId) -> Result<TestingStat> {
    testing_stat_region(&BoundKernel::new(k, mu), id, 1.0)
}

/// `⟨Tψ_I, ψ_J⟩` by direct double sum over the parents' atoms.
pub fn wavelet_pair(k: &KernelSpec, mu: &AtomicMeasure, i: &CubeId, j: &CubeId) -> Result<Complex64> {
    let pi = crate::haar::wavelet_on_atoms(mu, i)?;
    let pj = crate::haar::wavelet_on_atoms(mu, j)?;
    if pi.is_empty() || pj.is_empty() {
        return Ok(ZERO);
    }
    let b = BoundKernel::new(k, mu);
    let rows: Vec<Complex64> = pj
        .par_iter()
        .map(|&(x, vx)| {
            let mut acc = crate::reduce::Pairwise::new();
            for &(t, vt) in &pi {
                acc.push(b.entry(t as usize, x as usize)? * (mu.weight(t as usize) * vt));
            }
            Ok(acc.total() * (mu.weight(x as usize) * vx))
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(rows))
}

/// One wavelet of a [`HaarSystem`]: `ψ_I = a χ_I − b χ_{I_p}`.
#[derive(Clone, Debug)]
pub struct WaveletRef {
    pub id: CubeId,
    /// Position in `system.levels`.
    pub level_index: usize,
    pub cell: usize,
    pub parent: usize,
    pub a: f64,
    pub b: f64,
}

impl WaveletRef {
    pub fn cube(&self) -> Cube {
        self.id.to_cube()
    }

    pub fn parent_cube(&self) -> Cube {
        self.id.parent().expect("full-dimensional cube").to_cube()
    }
}

/// Nontrivial wavelets of the system, coarse to fine, in corner order.
pub fn wavelets(sys: &HaarSystem<'_>) -> Vec<WaveletRef> {
    let mut out = Vec::new();
    for li in 1..sys.levels.len() {
        let lv = &sys.levels[li];
        let up = &sys.levels[li - 1];
        for c in 0..lv.len() {
            if lv.siblings[c] < 2 {
                continue;
            }
            let p = lv.parent[c] as usize;
            out.push(WaveletRef {
                id: lv.id(sys.grid, c),
                level_index: li,
                cell: c,
                parent: p,
                a: 1.0 / lv.mass[c].sqrt(),
                b: lv.mass[c].sqrt() / up.mass[p],
            });
        }
    }
    out
}

/// Cell-to-cell kernel sums `B(P, R) = Σ_{t∈P, x∈R} w_t w_x K(t, x)` for all
/// level pairs of a system.
pub struct PairTable {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    /// Row-major over the concatenated cells of all levels.
    blocks: Vec<Complex64>,
    total: usize,
}

impl PairTable {
    pub fn new(k: &KernelSpec, sys: &HaarSystem<'_>) -> Result<Self> {
        let mu = sys.mu;
        let n = mu.len();
        let b = BoundKernel::new(k, mu);
        let sizes: Vec<usize> = sys.levels.iter().map(|l| l.len()).collect();
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for s in &sizes {
            offsets.push(total);
            total += s;
        }
        // global cell index of every atom at every level
        let cell_of: Vec<Vec<usize>> = sys
            .levels
            .iter()
            .zip(&offsets)
            .map(|(l, o)| l.atom_cell.iter().map(|&c| o + c as usize).collect())
            .collect();
        // column aggregation: for each source atom t, Σ_{x in R} w_x K(t, x) per target cell
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|t| {
                let mut per_cell: Vec<crate::reduce::Pairwise<Complex64>> =
                    (0..total).map(|_| crate::reduce::Pairwise::new()).collect();
                for x in 0..n {
                    let v = b.entry(t, x)? * mu.weight(x);
                    if v == ZERO {
                        continue;
                    }
                    for cells in &cell_of {
                        per_cell[cells[x]].push(v);
                    }
                }
                Ok(per_cell.iter().map(|p| p.total() * mu.weight(t)).collect())
            })
            .collect::<Result<_>>()?;
        let mut blocks = vec![ZERO; total * total];
        for cells in &cell_of {
            let mut acc: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); total];
            for (t, row) in rows.iter().enumerate() {
                acc[cells[t]].push(row.clone());
            }
            for (p, members) in acc.into_iter().enumerate() {
                if members.is_empty() {
                    continue;
                }
                for r in 0..total {
                    blocks[p * total + r] = pairwise_sum(members.iter().map(|m| m[r]));
                }
            }
        }
        Ok(Self {
            offsets,
            sizes,
            blocks,
            total,
        })
    }

    #[inline]
    fn block(&self, la: usize, pa: usize, lb: usize, pb: usize) -> Complex64 {
        debug_assert!(pa < self.sizes[la] && pb < self.sizes[lb]);
        self.blocks[(self.offsets[la] + pa) * self.total + self.offsets[lb] + pb]
    }

    /// `⟨Tψ_I, ψ_J⟩` from four box sums.
    #[inline]
    pub fn pair(&self, i: &WaveletRef, j: &WaveletRef) -> Complex64 {
        let (li, lj) = (i.level_index, j.level_index);
        self.block(li, i.cell, lj, j.cell) * (i.a * j.a) - self.block(li, i.cell, lj - 1, j.parent) * (i.a * j.b)
            - self.block(li - 1, i.parent, lj, j.cell) * (i.b * j.a)
            + self.block(li - 1, i.parent, lj - 1, j.parent) * (i.b * j.b)
    }
}

/// Coefficients whose magnitude is negligible relative to `scale`.
const NEGLIGIBLE: f64 = 1e-14;

/// Check that `levels` covers every nonzero coefficient of `f`.
pub fn check_range(mu: &AtomicMeasure, grid: crate::grid::GridKind, f: &[Complex64], sys: &HaarSystem<'_>) -> Result<()> {
    let full_levels = full_range(mu, grid);
    let full = HaarSystem::new(mu, grid, Some(full_levels))?;
    let map = full.analyze(f);
    let scale = mu.norm2(f).sqrt().max(f64::MIN_POSITIVE);
    let have = sys.wavelet_levels();
    let missed: Vec<CubeId> = map
        .entries
        .iter()
        .filter(|(id, c)| !have.contains(&id.level) && c.norm() > NEGLIGIBLE * scale)
        .map(|(id, _)| id.clone())
        .collect();
    if missed.is_empty() {
        Ok(())
    } else {
        Err(Error::IncompleteRange { missed })
    }
}

/// Levels from just below the top cubes to where all atoms are separated.
pub fn full_range(mu: &AtomicMeasure, grid: crate::grid::GridKind) -> std::ops::RangeInclusive<i32> {
    let top = crate::haar::top_level(mu, grid);
    let end = crate::haar::separation_level(mu, grid, top + 1, mu.resolution_level().max(top + 1));
    (top + 1)..=end.max(top + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedBilinear {
    pub coefficient_sum: Complex64,
    pub direct: Complex64,
    /// `Σ |c_I d_J ⟨Tψ_I,ψ_J⟩|`, the conditioning scale of the sum.
    pub absolute_sum: f64,
    /// `Σ w_j w_k |K f g|` over the direct double sum.
    pub direct_absolute: f64,
    /// `|direct − coefficient_sum|` over the largest of `|direct|` and the
    /// two absolute sums.
    pub residual: f64,
    pub pairs: usize,
}

/// Both sides of `⟨P_M^⊥ T P_M^⊥ f, g⟩ = Σ_{I,J ∈ 𝒟_M^c} ⟨f,ψ_I⟩⟨g,ψ_J⟩⟨Tψ_I,ψ_J⟩`.
pub fn compressed_bilinear(
    k: &KernelSpec,
    sys: &HaarSystem<'_>,
    f: &[Complex64],
    g: &[Complex64],
    m: u32,
) -> Result<CompressedBilinear> {
    check_range(sys.mu, sys.grid, f, sys)?;
    check_range(sys.mu, sys.grid, g, sys)?;
    let cf = sys.analyze(f);
    let cg = sys.analyze(g);
    let (_, cf_out) = cf.split_lagom(m);
    let (_, cg_out) = cg.split_lagom(m);
    let fo = sys.synthesize(&cf_out);
    let go = sys.synthesize(&cg_out);
    let direct = bilinear(k, sys.mu, &fo, &go)?;
    let table = PairTable::new(k, sys)?;
    let sum = coefficient_double_sum(&table, sys, &cf_out, &cg_out);
    let direct_absolute = bilinear_abs(k, sys.mu, &fo, &go)?;
    let scale = direct.norm().max(sum.absolute).max(direct_absolute);
    let residual = if scale > 0.0 {
        (direct - sum.value).norm() / scale
    } else {
        0.0
    };
    Ok(CompressedBilinear {
        coefficient_sum: sum.value,
        direct,
        absolute_sum: sum.absolute,
        direct_absolute,
        residual,
        pairs: sum.pairs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleSum {
    pub value: Complex64,
    pub absolute: f64,
    pub pairs: usize,
}

/// `Σ_{I,J} c_I d_J ⟨Tψ_I, ψ_J⟩` over the entries of two coefficient maps.
pub fn coefficient_double_sum(
    table: &PairTable,
    sys: &HaarSystem<'_>,
    cf: &HaarCoefficientMap,
    cg: &HaarCoefficientMap,
) -> DoubleSum {
    let ws = wavelets(sys);
    let left: Vec<(&WaveletRef, Complex64)> = ws
        .iter()
        .filter_map(|w| cf.entries.get(&w.id).map(|c| (w, *c)))
        .collect();
    let right: Vec<(&WaveletRef, Complex64)> = ws
        .iter()
        .filter_map(|w| cg.entries.get(&w.id).map(|c| (w, *c)))
        .collect();
    let rows: Vec<(Complex64, f64)> = left
        .par_iter()
        .map(|(wi, ci)| {
            let terms: Vec<Complex64> = right.iter().map(|(wj, dj)| table.pair(wi, wj) * *dj * *ci).collect();
            (pairwise_sum(terms.iter().copied()), pairwise_sum(terms.iter().map(|t| t.norm())))
        })
        .collect();
    DoubleSum {
        value: pairwise_sum(rows.iter().map(|r| r.0)),
        absolute: pairwise_sum(rows.iter().map(|r| r.1)),
        pairs: left.len() * right.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Truncation;

    #[test]
    fn constant_kernel_sums_mass() {
        let mu = AtomicMeasure::new(1, 1.0, 0.25, "t", vec![0.1, 0.6, 0.9], vec![1.0, 2.0, 0.5]).unwrap();
        let k = KernelSpec::constant(Complex64::new(1.0, 0.0));
        let f = vec![Complex64::new(1.0, 0.0); 3];
        let tf = apply(&k, &mu, &f).unwrap();
        assert!(tf.iter().all(|v| (v.re - 3.5).abs() < 1e-15));
    }

    #[test]
    fn untruncated_cauchy_diagonal_errors() {
        let mu = AtomicMeasure::new(2, 1.0, 0.25, "t", vec![0.1, 0.1, 0.6, 0.3], vec![1.0, 1.0]).unwrap();
        let f = vec![Complex64::new(1.0, 0.0); 2];
        let err = apply(&KernelSpec::cauchy(), &mu, &f).unwrap_err();
        assert_eq!(err.kind(), "DiagonalError");
        let k = KernelSpec::cauchy().truncate(Truncation::new(0.01, 3).unwrap()).unwrap();
        assert!(apply(&k, &mu, &f).is_ok());
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use nhca_core::diagnostics::{
    bucket_decomposition_report, bump_report, carleson_check, collar_measure, compactness_table,
    paraproduct_eval, paraproduct_family, testing_scan, BumpMode, ScanConfig, VerdictPolicy,
};
use nhca_core::grid::{CubeId, GridKind};
use nhca_core::haar::{gram, gram_brute, top_level, HaarSystem};
use nhca_core::measure::{generate, growth_check, AtomicMeasure, MeasureKind};
use nhca_core::operator::full_range;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::output::{decay_svg, OutDir};

/// Largest acceptable Parseval residual in `haar check`.
const PARSEVAL_TOL: f64 = 1e-10;
/// Largest acceptable `|gram − brute force|` in `haar check`.
const GRAM_TOL: f64 = 1e-12;

pub struct Ctx<'a> {
    pub command: &'static str,
    pub config: Value,
    pub global: &'a Global,
}

impl Ctx<'_> {
    fn out_dir(&self) -> Result<OutDir> {
        let root = self.global.out.as_deref().unwrap_or(Path::new("nhca-out"));
        OutDir::create(root, self.config.clone())
    }
}

/// Uniform complex samples in the unit square, zero outside `support`.
fn random_field(mu: &AtomicMeasure, seed: u64, support: Option<&CubeId>) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mu.len())
        .map(|a| {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            match support {
                Some(q) if !q.contains(mu.point(a)) => Complex64::new(0.0, 0.0),
                _ => v,
            }
        })
        .collect()
}

fn load(path: &Path) -> Result<AtomicMeasure> {
    Ok(AtomicMeasure::load(path)?)
}

fn unit_cube(dim: usize) -> CubeId {
    CubeId::standard(0, &vec![0; dim])
}

pub fn measure_gen(ctx: &Ctx<'_>, a: &GenArgs) -> Result<Value> {
    let kind = match a.kind {
        GenKind::Segment => MeasureKind::Segment { atoms: a.atoms, y0: a.y0 },
        GenKind::Square => {
            let side = (a.atoms as f64).sqrt().round() as usize;
            if side * side != a.atoms {
                return Err(CliError::Usage(format!("square needs a perfect-square atom count, got {}", a.atoms)));
            }
            MeasureKind::Square { side }
        }
        GenKind::Cantor4 => {
            let generation = a.atoms.trailing_zeros() / 2;
            if a.atoms == 0 || 4usize.pow(generation) != a.atoms {
                return Err(CliError::Usage(format!("cantor4 needs a power-of-4 atom count, got {}", a.atoms)));
            }
            MeasureKind::Cantor4 { generation }
        }
        GenKind::Random => MeasureKind::Random {
            dim: a.dim,
            atoms: a.atoms,
            depth: a.depth,
            span: a.span,
            seed: ctx.global.seed,
        },
    };
    let mu = generate(&kind)?;
    let path = ctx.global.out.as_deref().unwrap_or(Path::new("measure.json"));
    mu.save(path)?;
    Ok(json!({
        "file": path,
        "atoms": mu.len(),
        "dim": mu.dim(),
        "resolution": mu.resolution(),
    }))
}

pub fn measure_check(ctx: &Ctx<'_>, a: &CheckArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let depth = a.depth.unwrap_or(mu.resolution_level());
    mu.validate_off_skeleton(depth)?;
    let top = top_level(&mu, GridKind::Standard);
    let levels = top.min(mu.resolution_level())..=mu.resolution_level();
    let growth = growth_check(&mu, mu.alpha(), levels, &[GridKind::Standard], a.ceiling)?;
    let violations: Vec<Value> = growth
        .violations
        .iter()
        .map(|(id, ratio)| json!({"cube": id.to_string(), "ratio": ratio}))
        .collect();
    let summary = json!({
        "atoms": mu.len(),
        "dim": mu.dim(),
        "alpha": mu.alpha(),
        "resolution": mu.resolution(),
        "resolution_level": mu.resolution_level(),
        "total_mass": mu.total_mass(),
        "skeleton_depth_checked": depth,
        "c_growth": growth.c_growth,
        "growth_violations": violations,
        "cubes_scanned": growth.cubes_scanned,
    });
    if ctx.global.out.is_some() {
        let mut out = ctx.out_dir()?;
        out.json("summary.json", &summary)?;
        out.finish(ctx.command)?;
    }
    Ok(summary)
}

#[derive(Serialize)]
struct CoefficientRow {
    grid: String,
    level: i32,
    corner: String,
    re: f64,
    im: f64,
}

pub fn haar_check(ctx: &Ctx<'_>, a: &HaarArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let f = random_field(&mu, ctx.global.seed, None);
    let mut out = ctx.out_dir()?;
    let mut rows = Vec::new();
    let mut per_grid = Vec::new();
    let mut failures = Vec::new();
    for &grid in &a.grids.0 {
        if matches!(grid, GridKind::Boundary(_)) {
            return Err(CliError::Usage(format!("haar systems need a full-dimensional grid, got {grid}")));
        }
        let sys = HaarSystem::new(&mu, grid, a.levels.map(Span::range))?;
        let coeffs = sys.analyze(&f);
        let parseval = sys.parseval(&f);
        let cubes: Vec<CubeId> = sys.levels[1..]
            .iter()
            .flat_map(|lv| (0..lv.len()).map(move |c| lv.id(grid, c)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.global.seed ^ 0x9e37_79b9);
        let mut gram_err: f64 = 0.0;
        for _ in 0..a.pairs.min(cubes.len() * cubes.len()) {
            let i = &cubes[rng.random_range(0..cubes.len())];
            let j = if rng.random_bool(0.5) {
                let sib = i.parent()?.children();
                sib[rng.random_range(0..sib.len())].clone()
            } else {
                cubes[rng.random_range(0..cubes.len())].clone()
            };
            gram_err = gram_err.max((gram(&mu, i, &j)? - gram_brute(&mu, i, &j)?).abs());
        }
        if parseval.residual > PARSEVAL_TOL {
            failures.push(format!("{grid}: Parseval residual {:e} above {PARSEVAL_TOL:e}", parseval.residual));
        }
        if gram_err > GRAM_TOL {
            failures.push(format!("{grid}: Gram error {gram_err:e} above {GRAM_TOL:e}"));
        }
        rows.extend(coeffs.entries.iter().filter(|(_, c)| c.norm() > 0.0).map(|(id, c)| CoefficientRow {
            grid: grid.tag(),
            level: id.level,
            corner: id.corner_string(),
            re: c.re,
            im: c.im,
        }));
        let levels = sys.wavelet_levels();
        per_grid.push(json!({
            "grid": grid.tag(),
            "levels": format!("{}..{}", levels.start(), levels.end()),
            "coefficients": coeffs.len(),
            "parseval_residual": parseval.residual,
            "gram_max_error": gram_err,
        }));
    }
    out.csv("coefficients.csv", rows)?;
    let summary = json!({"grids": per_grid, "passed": failures.is_empty()});
    out.json("summary.json", &summary)?;
    out.finish(ctx.command)?;
    if !failures.is_empty() {
        return Err(CliError::Assertion(failures.join("; ")));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct TestingRow {
    grid: String,
    level: i32,
    corner: String,
    side: f64,
    mass: f64,
    t_norm: f64,
    tstar_norm: f64,
    f_t: f64,
}

fn scan_config(a: &ScanArgs) -> ScanConfig {
    ScanConfig {
        grids: a.grids.0.clone(),
        ..ScanConfig::aligned(a.levels.range())
    }
}

pub fn scan(ctx: &Ctx<'_>, a: &ScanArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let k = a.kernel.build()?;
    let r = testing_scan(&k, &mu, &scan_config(a))?;
    let mut out = ctx.out_dir()?;
    out.csv(
        "testing.csv",
        r.stats.iter().map(|s| TestingRow {
            grid: s.cube.grid.tag(),
            level: s.cube.level,
            corner: s.cube.corner_string(),
            side: s.side,
            mass: s.mass,
            t_norm: s.t_norm,
            tstar_norm: s.tstar_norm,
            f_t: s.f_t,
        }),
    )?;
    out.csv("levels.csv", &r.per_level)?;
    let sup = r.stats.iter().map(|s| s.f_t).fold(0.0, f64::max);
    let summary = json!({
        "cubes": r.stats.len(),
        "sup_f_t": sup,
        "levels": r.per_level,
        "empty": r.empty,
    });
    out.json("summary.json", &summary)?;
    out.finish(ctx.command)?;
    Ok(summary)
}

pub fn compact(ctx: &Ctx<'_>, a: &CompactArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let k = a.kernel.build()?;
    let ms = a.m.unsigned()?;
    let levels = a.levels.map(Span::range).unwrap_or_else(|| {
        let hi = (*ms.end() as i32 + 2).min(mu.resolution_level());
        0.min(hi)..=hi
    });
    let cfg = ScanConfig {
        grids: a.grids.0.clone(),
        ..ScanConfig::aligned(levels.clone())
    };
    let t = compactness_table(&k, &mu, ms, a.delta, &cfg, &VerdictPolicy::default())?;
    let mut out = ctx.out_dir()?;
    out.csv("compact.csv", &t.rows)?;
    let m: Vec<u32> = t.rows.iter().map(|r| r.m).collect();
    let f_t: Vec<f64> = t.rows.iter().map(|r| r.sup_f_t).collect();
    let rho: Vec<f64> = t.rows.iter().map(|r| r.sup_rho_mu).collect();
    let summary = json!({
        "M": m,
        "sup_f_t": f_t,
        "sup_rho_mu": rho,
        "verdict": t.verdict.as_str(),
        "levels": format!("{}..{}", levels.start(), levels.end()),
    });
    out.json("summary.json", &summary)?;
    out.text("decay.svg", &decay_svg(&m, &f_t, &rho, &format!("{} on {}", k.name(), mu.label())))?;
    out.finish(ctx.command)?;
    Ok(summary)
}

pub fn bump(ctx: &Ctx<'_>, a: &BumpArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let k = a.kernel.build()?;
    let mode = match a.mode {
        Mode::Separated => BumpMode::Separated,
        Mode::Nested => BumpMode::Nested,
    };
    let r = bump_report(&k, &mu, mode, a.depth, a.theta, a.delta)?;
    let mut out = ctx.out_dir()?;
    out.csv("bump.csv", &r.rows)?;
    let summary = json!({
        "mode": r.mode,
        "depth": r.depth,
        "theta": r.theta,
        "delta": r.delta,
        "sup_ratio": r.sup_ratio,
        "admissible": r.admissible,
        "excluded": r.excluded,
        "max_tail_bound": r.max_tail_bound,
    });
    out.json("summary.json", &summary)?;
    out.finish(ctx.command)?;
    Ok(summary)
}

pub fn para(ctx: &Ctx<'_>, a: &ParaArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let k = a.kernel.build()?;
    let grid = GridKind::Standard;
    let sys = HaarSystem::new(&mu, grid, Some(full_range(&mu, grid)))?;
    let q = unit_cube(mu.dim());
    let seed = ctx.global.seed;
    let f = random_field(&mu, seed, Some(&q));
    let g = random_field(&mu, seed.wrapping_add(1), Some(&q));
    let r = paraproduct_eval(&k, &sys, &f, &g, &q, a.theta, a.m, seed)?;
    let family = paraproduct_family(&k, &sys, &q)?;
    let samples: Vec<_> = (0..a.samples as u64).map(|s| random_field(&mu, seed.wrapping_add(2 + s), None)).collect();
    let c = carleson_check(&family, &mu, &samples)?;
    let mut out = ctx.out_dir()?;
    out.json("paraproduct.json", &r)?;
    out.json("carleson.json", &c)?;
    out.finish(ctx.command)?;
    if c.max_violation > 0.0 {
        return Err(CliError::Assertion(format!("Carleson violation {:e}", c.max_violation)));
    }
    Ok(json!({
        "Pi": [r.pi.re, r.pi.im],
        "Pi_prime": [r.pi_prime.re, r.pi_prime.im],
        "pairs": r.pairs,
        "telescope_max_error": r.telescope_max_error,
        "packing_constant": c.packing_constant,
        "max_violation": c.max_violation,
    }))
}

pub fn collar(ctx: &Ctx<'_>, a: &CollarArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let ks = a.levels.map(Span::range).unwrap_or(a.n0..=mu.resolution_level().max(a.n0));
    let r = collar_measure(&mu, &unit_cube(mu.dim()), a.n0, a.theta, ks, a.eps)?;
    let mut out = ctx.out_dir()?;
    out.csv("collar.csv", &r.rows)?;
    let summary = json!({
        "k0": r.k0,
        "monotone": r.monotone,
        "flagged": r.flagged,
        "masses": r.rows.iter().map(|row| row.mass).collect::<Vec<_>>(),
    });
    out.json("summary.json", &summary)?;
    out.finish(ctx.command)?;
    if !r.monotone {
        return Err(CliError::Assertion("collar masses increase".into()));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct BucketRow {
    bucket: String,
    re: f64,
    im: f64,
    magnitude: f64,
    absolute: f64,
    pairs: usize,
}

pub fn buckets(ctx: &Ctx<'_>, a: &BucketArgs) -> Result<Value> {
    let mu = load(&a.measure.measure)?;
    let k = a.kernel.build()?;
    let depth = a
        .depth
        .unwrap_or_else(|| (mu.resolution_level() - top_level(&mu, GridKind::Standard)).max(1));
    let seed = ctx.global.seed;
    let f = random_field(&mu, seed, None);
    let g = random_field(&mu, seed.wrapping_add(1), None);
    let r = bucket_decomposition_report(&k, &mu, &f, &g, a.m, a.theta, depth)?;
    let mut out = ctx.out_dir()?;
    let rows: Vec<BucketRow> = r
        .buckets
        .iter()
        .map(|(b, t)| BucketRow {
            bucket: format!("{b:?}"),
            re: t.value.re,
            im: t.value.im,
            magnitude: t.magnitude,
            absolute: t.absolute,
            pairs: t.pairs,
        })
        .collect();
    out.csv("buckets.csv", rows)?;
    out.csv("d1_shells.csv", &r.d1_shells)?;
    let totals: BTreeMap<String, usize> = r.buckets.iter().map(|(b, t)| (format!("{b:?}"), t.pairs)).collect();
    let summary = json!({
        "M": r.m,
        "depth": r.depth,
        "residual": r.residual,
        "tolerance": r.tolerance,
        "passed": r.passed,
        "pairs": r.pairs,
        "assigned": r.assigned,
        "bucket_pairs": totals,
    });
    out.json("summary.json", &summary)?;
    out.finish(ctx.command)?;
    if !r.passed || r.assigned != r.pairs {
        return Err(CliError::Assertion(format!(
            "bucket residual {:e} (tolerance {:e}), {} of {} pairs assigned",
            r.residual, r.tolerance, r.assigned, r.pairs
        )));
    }
    Ok(summary)
}

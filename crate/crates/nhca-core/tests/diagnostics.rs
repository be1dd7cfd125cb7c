use std::collections::BTreeMap;

use nhca_core::diagnostics::*;
use nhca_core::grid::{CubeId, GridKind};
use nhca_core::haar::{top_level, HaarSystem};
use nhca_core::kernel::{Envelope, Envelopes, KernelSpec, Truncation};
use nhca_core::measure::{generate, AtomicMeasure, MeasureKind, DEFAULT_Y0};
use nhca_core::operator::full_range;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trunc_cauchy(gamma: f64, big_n: i32) -> KernelSpec {
    KernelSpec::cauchy().truncate(Truncation::new(gamma, big_n).unwrap()).unwrap()
}

fn square(side: usize) -> AtomicMeasure {
    generate(&MeasureKind::Square { side }).unwrap()
}

fn segment(atoms: usize) -> AtomicMeasure {
    generate(&MeasureKind::Segment { atoms, y0: DEFAULT_Y0 }).unwrap()
}

fn random_field(mu: &AtomicMeasure, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mu.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn unit_square() -> CubeId {
    CubeId::standard(0, &[0, 0])
}

#[test]
fn scan_errors_and_empty_windows() {
    let mu = segment(64);
    let k = trunc_cauchy(0.01, 2);
    let mut cfg = ScanConfig::aligned(0..=3);
    cfg.grids.clear();
    assert_eq!(testing_scan(&k, &mu, &cfg).unwrap_err().kind(), "EmptyScanError");
    assert_eq!(testing_scan(&k, &mu, &ScanConfig::aligned(0..=7)).unwrap_err().kind(), "RangeError");
    let faces = ScanConfig {
        grids: vec![GridKind::Boundary(1)],
        ..ScanConfig::aligned(0..=3)
    };
    let r = testing_scan(&k, &mu, &faces).unwrap();
    assert!(r.empty && r.stats.is_empty());
    let bad = ScanConfig {
        dilations: vec![3.0],
        ..ScanConfig::aligned(0..=3)
    };
    assert_eq!(testing_scan(&k, &mu, &bad).unwrap_err().kind(), "RangeError");
}

/// Faces of the boundary grid along `y = 0` see the same atoms as aligned
/// squares do along `y = 1/3`.
#[test]
fn boundary_segments_match_lifted_segment() {
    let n = 1024;
    let lifted = segment(n);
    let xs: Vec<f64> = (0..n).flat_map(|j| [(2 * j + 1) as f64 / (2.0 * n as f64), 0.0]).collect();
    let flat = AtomicMeasure::new(2, 1.0, 1.0 / n as f64, "segment-y0", xs, vec![1.0 / n as f64; n]).unwrap();
    let k = trunc_cauchy(2f64.powi(-9), 2);
    let faces = ScanConfig {
        grids: vec![GridKind::Boundary(1)],
        ..ScanConfig::aligned(2..=4)
    };
    let on_faces = testing_scan(&k, &flat, &faces).unwrap();
    let aligned = testing_scan(&k, &lifted, &ScanConfig::aligned(2..=4)).unwrap();
    assert_eq!(on_faces.stats.len(), aligned.stats.len());
    for (a, b) in on_faces.per_level.iter().zip(&aligned.per_level) {
        assert_eq!(a.cubes, b.cubes);
        assert!((a.sup_f_t - b.sup_f_t).abs() <= 1e-12 * b.sup_f_t);
        assert!((1.5..=1.95).contains(&a.sup_f_t), "{}", a.sup_f_t);
    }
}

#[test]
fn shifted_square_scan_decays() {
    let mu = square(32);
    let k = trunc_cauchy(2f64.powi(-7), 2);
    let cfg = ScanConfig {
        grids: vec![GridKind::Shifted(1)],
        ..ScanConfig::aligned(0..=5)
    };
    let r = testing_scan(&k, &mu, &cfg).unwrap();
    assert!(r.stats.iter().all(|s| s.f_t <= 2.5));
    let sups: Vec<f64> = r.per_level.iter().map(|l| l.sup_f_t).collect();
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}

#[test]
fn verdict_rules() {
    let p = VerdictPolicy::default();
    assert_eq!(classify(&[1.0, 0.7, 0.5], &[2.0, 1.5, 1.0], &p), Verdict::CompactConsistent);
    assert_eq!(classify(&[1.8, 1.85, 1.79], &[4.4, 4.4, 4.4], &p), Verdict::BoundedNoncompact);
    assert_eq!(classify(&[1.0, 1.3, 1.6], &[2.0, 2.0, 2.0], &p), Verdict::UnboundedSuspected);
    assert_eq!(classify(&[1.0, 0.5, 0.4], &[2.0, 2.0, 2.0], &p), Verdict::Inconclusive);
    assert_eq!(classify(&[], &[], &p), Verdict::Inconclusive);
    assert_eq!(Verdict::BoundedNoncompact.as_str(), "bounded_noncompact");
}

#[test]
fn compactness_table_rows() {
    let mu = square(32);
    let k = trunc_cauchy(2f64.powi(-7), 2);
    let p = VerdictPolicy::default();
    let cfg = ScanConfig::aligned(1..=5);
    assert_eq!(compactness_table(&k, &mu, 1..=2, 1.0, &cfg, &p).unwrap_err().kind(), "InsufficientRangeError");
    let t = compactness_table(&k, &mu, 1..=4, 1.0, &cfg, &p).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.rows.windows(2).all(|w| w[0].cube_count <= w[1].cube_count));
    let total = t.rows[0].cube_count + t.rows[0].complement_count;
    assert!(t.rows.iter().all(|r| r.cube_count + r.complement_count == total));
    assert_eq!(t.verdict, Verdict::CompactConsistent);
    let short = compactness_table(&k, &mu, 1..=5, 1.0, &ScanConfig::aligned(1..=3), &p).unwrap();
    assert_eq!(short.rows[4].complement_count, 0);
    assert_eq!(short.verdict, Verdict::Inconclusive);
    let json = serde_json::to_value(&t).unwrap();
    assert_eq!(json["verdict"], "compact_consistent");
    assert_eq!(json["rows"][0]["M"], 1);
}

#[test]
fn cantor_generations_grow() {
    let k = trunc_cauchy(2f64.powi(-12), 2);
    let s = cantor_sweep(&k, 2..=5, 1.0, &VerdictPolicy::default()).unwrap();
    assert!(s.rows.windows(2).all(|w| w[1].f_t > w[0].f_t));
    assert_eq!(s.verdict, Verdict::UnboundedSuspected);
    assert!(s.rows.iter().all(|r| (r.rho_mu - s.rows[0].rho_mu).abs() < 1e-9));
}

#[test]
fn bump_counts_and_errors() {
    let mu = segment(1024);
    let k = trunc_cauchy(1e-5, 4);
    let r = bump_report(&k, &mu, BumpMode::Separated, 4, None, 1.0).unwrap();
    assert!(r.admissible > 0 && r.excluded > 0);
    assert_eq!(r.rows.iter().map(|row| row.pairs).sum::<usize>(), r.admissible);
    assert!(r.sup_ratio.is_finite() && r.sup_ratio > 0.0);
    assert_eq!(r.theta, default_theta(1.0, 1.0));
    let sup = r.rows.iter().map(|row| row.sup_ratio).fold(0.0, f64::max);
    assert_eq!(sup, r.sup_ratio);
    assert!(r.rows.iter().all(|row| row.mean_ratio <= row.sup_ratio));

    let soft = bump_report(&k, &mu, BumpMode::Separated, 4, None, 0.9).unwrap();
    assert_eq!(soft.delta, 0.9);
    assert!(soft.sup_ratio.is_finite());

    assert_eq!(bump_report(&k, &mu, BumpMode::Nested, 4, None, 1.0).unwrap_err().kind(), "EmptyScanError");
    assert_eq!(bump_report(&k, &mu, BumpMode::Separated, 4, Some(1.5), 1.0).unwrap_err().kind(), "RangeError");
    let top = top_level(&mu, GridKind::Standard);
    let too_deep = mu.resolution_level() - top + 1;
    assert_eq!(bump_report(&k, &mu, BumpMode::Separated, too_deep, None, 1.0).unwrap_err().kind(), "RangeError");
}

fn compact_envelopes() -> KernelSpec {
    let env = Envelopes {
        s: Envelope::PowerGrowth(4.0),
        ..Envelopes::default()
    };
    trunc_cauchy(2f64.powi(-8), 2).with_envelopes(env).unwrap()
}

#[test]
fn trichotomy_examples() {
    let mu = square(32);
    let m = 2;

    let k = trunc_cauchy(2f64.powi(-8), 2);
    let eval = SampledFMu::new(&k, &mu);
    let small_i = CubeId::standard(5, &[16, 16]);
    let far_j = CubeId::standard(2, &[40, 40]);
    let t = trichotomy_classify(&small_i, &far_j, m, 1e-12, &eval).unwrap();
    assert!(t.log2_ec >= f64::from(m));
    assert_eq!(t.clause, Clause::ExtremeEc);

    let k = compact_envelopes();
    let eval = SampledFMu::new(&k, &mu);
    let j = CubeId::standard(4, &[8, 8]);
    let t = trichotomy_classify(&small_i, &j, m, 0.01, &eval).unwrap();
    assert_eq!(t.clause, Clause::SmallF, "{t:?}");
    assert_eq!(t.f_mu.depth_cap, 3);

    let t = trichotomy_classify(&small_i, &small_i, m, 0.01, &eval).unwrap();
    assert_eq!(t.clause, Clause::SmallF, "{t:?}");
    assert_eq!(t.f_mu.testing_part, 0.0);
    assert!(!t.flagged);

    let inside = unit_square();
    let err = trichotomy_classify(&inside, &far_j, m, 0.01, &eval).unwrap_err();
    assert_eq!(err.kind(), "PreconditionError");
    let err = trichotomy_classify(&small_i, &inside, m, 0.01, &eval).unwrap_err();
    assert_eq!(err.kind(), "PreconditionError");
}

#[test]
fn trichotomy_flags_when_no_clause_holds() {
    let mu = square(32);
    let k = trunc_cauchy(2f64.powi(-8), 2);
    let eval = SampledFMu::new(&k, &mu);
    let i = CubeId::standard(5, &[16, 16]);
    let j = CubeId::standard(5, &[17, 16]);
    let t = trichotomy_classify(&i, &j, 2, 1e-12, &eval).unwrap();
    assert_eq!(t.clause, Clause::None);
    assert!(t.flagged);
}

#[test]
fn carleson_single_level_packs_to_one() {
    let mu = square(8);
    let coeffs: BTreeMap<CubeId, f64> = (0..4)
        .flat_map(|a| (0..4).map(move |b| CubeId::standard(2, &[a, b])))
        .map(|id| {
            let m = mu.mass_of(&mu.atoms_in_id(&id));
            (id, m)
        })
        .collect();
    let samples: Vec<_> = (0..20).map(|s| random_field(&mu, s)).collect();
    let r = carleson_check(&coeffs, &mu, &samples).unwrap();
    assert!((r.packing_constant - 1.0).abs() < 1e-12);
    assert!(r.ratios.iter().all(|x| *x <= 1.0 + 1e-12));
    assert!(r.max_violation <= 0.0);

    let zero: BTreeMap<CubeId, f64> = coeffs.keys().map(|id| (id.clone(), 0.0)).collect();
    let r = carleson_check(&zero, &mu, &samples).unwrap();
    assert_eq!(r.packing_constant, 0.0);
    assert!(r.ratios.iter().all(|x| *x == 0.0));

    let mut negative = coeffs.clone();
    negative.insert(CubeId::standard(1, &[0, 0]), -0.5);
    assert_eq!(carleson_check(&negative, &mu, &samples).unwrap_err().kind(), "ValidationError");
}

#[test]
fn carleson_paraproduct_family() {
    let mu = square(8);
    let k = trunc_cauchy(2f64.powi(-6), 2);
    let sys = HaarSystem::new(&mu, GridKind::Standard, Some(full_range(&mu, GridKind::Standard))).unwrap();
    let family = paraproduct_family(&k, &sys, &unit_square()).unwrap();
    assert!(!family.is_empty());
    assert!(family.keys().all(|id| id.level > 0));
    let samples: Vec<_> = (0..20).map(|s| random_field(&mu, 100 + s)).collect();
    let r = carleson_check(&family, &mu, &samples).unwrap();
    assert!(r.max_violation <= 0.0, "{}", r.max_violation);
}

#[test]
fn paraproduct_examples() {
    let mu = square(32);
    let k = trunc_cauchy(2f64.powi(-8), 2);
    let grid = GridKind::Standard;
    let sys = HaarSystem::new(&mu, grid, Some(full_range(&mu, grid))).unwrap();
    let q = unit_square();
    let constant = vec![Complex64::new(2.0, -1.0); mu.len()];
    let g = random_field(&mu, 5);
    let r = paraproduct_eval(&k, &sys, &constant, &g, &q, 0.3, None, 1).unwrap();
    assert_eq!(r.pi, Complex64::new(0.0, 0.0));
    assert_eq!(r.mean_f, Complex64::new(2.0, -1.0));

    let f = random_field(&mu, 6);
    let r = paraproduct_eval(&k, &sys, &f, &g, &q, 0.3, None, 1).unwrap();
    assert!(r.pairs > 0 && r.pairs_prime > 0);
    assert!(r.telescope_checks > 0);
    assert!(r.telescope_max_error <= 1e-12, "{}", r.telescope_max_error);

    let mut outside = f.clone();
    let lifted = AtomicMeasure::new(2, 1.0, 1.0 / 32.0, "pad", vec![0.5 / 32.0, 0.5 / 32.0, 1.5, 0.5], vec![1.0, 1.0]).unwrap();
    outside.truncate(2);
    let sys2 = HaarSystem::new(&lifted, grid, None).unwrap();
    let err = paraproduct_eval(&k, &sys2, &outside, &outside, &q, 0.3, None, 1).unwrap_err();
    assert_eq!(err.kind(), "PreconditionError");

    let short = HaarSystem::new(&mu, grid, Some(1..=2)).unwrap();
    let err = paraproduct_eval(&k, &short, &f, &g, &q, 0.3, None, 1).unwrap_err();
    assert_eq!(err.kind(), "IncompleteRangeError");
}

#[test]
fn paraproduct_shrinks_with_the_window() {
    let mu = square(64);
    let k = trunc_cauchy(2f64.powi(-8), 2);
    let grid = GridKind::Standard;
    let sys = HaarSystem::new(&mu, grid, Some(full_range(&mu, grid))).unwrap();
    let q = unit_square();
    let f = random_field(&mu, 7);
    let g = random_field(&mu, 8);
    let full = paraproduct_eval(&k, &sys, &f, &g, &q, 0.3, None, 1).unwrap();
    let runs: Vec<_> = (0..=2)
        .map(|m| paraproduct_eval(&k, &sys, &f, &g, &q, 0.3, Some(m), 1).unwrap())
        .collect();
    assert_eq!(runs[0].pi, full.pi);
    let pairs: Vec<usize> = runs.iter().map(|r| r.pairs).collect();
    assert!(pairs.windows(2).all(|w| w[1] < w[0]), "{pairs:?}");
    assert!(runs[1].pi.norm() > 0.0 && runs[2].pi.norm() == 0.0);
}

#[test]
fn collar_examples() {
    let mu = square(16);
    let q = unit_square();
    let r = collar_measure(&mu, &q, 1, 2.0 / 3.0, 1..=4, 0.01).unwrap();
    assert_eq!(r.rows.len(), 4);
    assert!(r.monotone);
    assert!(r.rows.iter().all(|row| row.mass <= 1.0 + 1e-12 && row.mass >= 0.0));

    // every atom on the line x = 1/2
    let n = 64;
    let pts: Vec<f64> = (0..n).flat_map(|j| [0.5, (2 * j + 1) as f64 / (2.0 * n as f64)]).collect();
    let skeleton = AtomicMeasure::new(2, 1.0, 1.0 / n as f64, "skeleton", pts, vec![1.0 / n as f64; n]).unwrap();
    let r = collar_measure(&skeleton, &q, 1, 2.0 / 3.0, 1..=5, 0.01).unwrap();
    assert!(r.flagged && r.monotone);
    assert_eq!(r.k0, None);

    assert_eq!(collar_measure(&mu, &q, -1, 0.5, 1..=2, 0.01).unwrap_err().kind(), "RangeError");
    assert_eq!(collar_measure(&mu, &q, 2, 0.5, 1..=3, 0.01).unwrap_err().kind(), "RangeError");
    assert_eq!(collar_measure(&mu, &q, 1, 1.0, 1..=3, 0.01).unwrap_err().kind(), "RangeError");
}

#[test]
fn bucket_assignment_rules() {
    let theta = 2.0 / 3.0;
    let a = CubeId::standard(3, &[0, 0]);
    assert_eq!(assign(&a, &CubeId::standard(3, &[4, 4]), theta).unwrap(), Assignment::D1 { shell: 2 });
    assert_eq!(assign(&a, &CubeId::standard(3, &[1, 0]), theta).unwrap(), Assignment::B6);
    let big = CubeId::standard(1, &[0, 0]);
    // parent of side 2^-9 at distance 1/4 from the skeleton of the unit square
    let deep = CubeId::standard(10, &[256, 256]);
    assert_eq!(assign(&big, &deep, theta).unwrap(), Assignment::Inner);
    assert_eq!(assign(&deep, &big, theta).unwrap(), Assignment::Outer);
}

#[test]
fn bucket_partition_reproduces_direct_value() {
    let mu = square(8);
    let k = trunc_cauchy(2f64.powi(-6), 2);
    let f = random_field(&mu, 1);
    let g = random_field(&mu, 2);
    let r = bucket_decomposition_report(&k, &mu, &f, &g, 1, 2.0 / 3.0, 3).unwrap();
    assert!(r.pairs > 0);
    assert_eq!(r.assigned, r.pairs);
    let counted: usize = [Bucket::D1, Bucket::D2, Bucket::N2, Bucket::N3, Bucket::B6].iter().map(|b| r.buckets[b].pairs).sum();
    assert_eq!(counted, r.pairs);
    assert_eq!(r.buckets[&Bucket::N2].pairs, r.buckets[&Bucket::P4].pairs);
    assert!(r.residual <= BUCKET_TOLERANCE, "{}", r.residual);
    assert!(r.passed);
    assert_eq!(r.d1_shells.iter().map(|s| s.pairs).sum::<usize>(), r.buckets[&Bucket::D1].pairs);
}

#[test]
fn d1_shells_decay_on_the_segment() {
    let mu = segment(128);
    let k = trunc_cauchy(2f64.powi(-10), 2);
    let f = random_field(&mu, 3);
    let g = random_field(&mu, 4);
    let depth = mu.resolution_level() - top_level(&mu, GridKind::Standard);
    let r = bucket_decomposition_report(&k, &mu, &f, &g, 1, 2.0 / 3.0, depth).unwrap();
    assert!(r.passed, "{}", r.residual);
    let mut blocks: BTreeMap<u32, f64> = BTreeMap::new();
    for s in &r.d1_shells {
        let b = blocks.entry(s.m.ilog2()).or_default();
        *b = b.max(s.magnitude / s.pairs as f64);
    }
    let maxima: Vec<f64> = blocks.into_values().collect();
    assert!(maxima.len() >= 4, "{:?}", r.d1_shells);
    assert!(maxima.windows(2).all(|w| w[1] <= w[0]), "{maxima:?}");
}

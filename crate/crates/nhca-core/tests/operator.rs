use nhca_core::grid::{CubeId, GridKind};
use nhca_core::haar::HaarSystem;
use nhca_core::kernel::{KernelSpec, Truncation};
use nhca_core::measure::{generate, AtomicMeasure, MeasureKind};
use nhca_core::operator::{
    apply, apply_transpose, bilinear, compressed_bilinear, testing_stats, wavelet_pair, wavelets, PairTable,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn trunc_cauchy(gamma: f64) -> KernelSpec {
    KernelSpec::cauchy().truncate(Truncation::new(gamma, 4).unwrap()).unwrap()
}

fn random_measure(atoms: usize, seed: u64) -> AtomicMeasure {
    generate(&MeasureKind::Random { dim: 2, atoms, depth: 5, span: 1, seed }).unwrap()
}

#[test]
fn two_atom_truncated_cauchy() {
    let mu = AtomicMeasure::new(2, 1.0, 0.25, "two", vec![0.1, 0.2, 0.6, 0.2], vec![1.0, 2.0]).unwrap();
    let f = vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)];
    let tf = apply(&trunc_cauchy(0.1), &mu, &f).unwrap();
    let expect = Complex64::new(2.0 * 3.0 / 0.5, 0.0);
    assert!((tf[0] - expect).norm() < 1e-15, "{}", tf[0]);
    let wide = apply(&trunc_cauchy(0.5), &mu, &f).unwrap();
    assert!(wide.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
}

#[test]
fn adjoint_and_linearity() {
    let mu = random_measure(64, 3);
    let k = trunc_cauchy(0.05);
    let f = random_field(mu.len(), 1);
    let g = random_field(mu.len(), 2);
    let lhs = bilinear(&k, &mu, &f, &g).unwrap();
    let tg = apply_transpose(&k, &mu, &g).unwrap();
    let rhs = mu.inner(&f, &tg);
    assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm());
    let a = Complex64::new(0.3, -1.2);
    let comb: Vec<Complex64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
    let t1 = apply(&k, &mu, &comb).unwrap();
    let tf = apply(&k, &mu, &f).unwrap();
    let tgg = apply(&k, &mu, &g).unwrap();
    for i in 0..mu.len() {
        let e = a * tf[i] + tgg[i];
        assert!((t1[i] - e).norm() <= 1e-13 * e.norm().max(1.0));
    }
}

#[test]
fn antisymmetric_testing_form_vanishes() {
    let mu = random_measure(64, 5);
    let k = trunc_cauchy(0.01);
    let one = vec![Complex64::new(1.0, 0.0); mu.len()];
    let v = bilinear(&k, &mu, &one, &one).unwrap();
    assert!(v.norm() < 1e-12, "{v}");
    let s = testing_stats(&k, &mu, &CubeId::standard(0, &[0, 0])).unwrap();
    assert!(s.f_t.is_finite() && (s.t_norm - s.tstar_norm).abs() < 1e-15);
}

#[test]
fn pair_table_matches_direct_pairs() {
    let mu = random_measure(40, 9);
    let k = trunc_cauchy(0.02);
    let sys = HaarSystem::new(&mu, GridKind::Standard, None).unwrap();
    let table = PairTable::new(&k, &sys).unwrap();
    let ws = wavelets(&sys);
    for (n, i) in ws.iter().enumerate().step_by(7) {
        for j in ws.iter().skip(n % 5).step_by(11) {
            let d = wavelet_pair(&k, &mu, &i.id, &j.id).unwrap();
            let t = table.pair(i, j);
            assert!((d - t).norm() <= 1e-11 * (1.0 + d.norm()), "{} {} {d} {t}", i.id, j.id);
        }
    }
}

#[test]
fn compression_identity_small() {
    let mu = random_measure(64, 11);
    let k = trunc_cauchy(0.02);
    let sys = HaarSystem::new(&mu, GridKind::Standard, Some(nhca_core::operator::full_range(&mu, GridKind::Standard))).unwrap();
    let f = random_field(mu.len(), 12);
    let g = random_field(mu.len(), 13);
    for m in 1..=3 {
        let c = compressed_bilinear(&k, &sys, &f, &g, m).unwrap();
        assert!(c.residual <= 1e-8, "M={m}: {c:?}");
    }
}

#[test]
fn constant_kernel_sums_the_mass() {
    let mu = random_measure(30, 4);
    let k = KernelSpec::constant(Complex64::new(1.0, 0.0));
    let one = vec![Complex64::new(1.0, 0.0); mu.len()];
    let m = mu.total_mass();
    assert!(apply(&k, &mu, &one).unwrap().iter().all(|v| (v.re - m).abs() < 1e-13 && v.im == 0.0));
}

#[test]
fn untruncated_overlap_is_a_diagonal_error() {
    let mu = random_measure(8, 1);
    let one = vec![Complex64::new(1.0, 0.0); mu.len()];
    assert_eq!(apply(&KernelSpec::cauchy(), &mu, &one).unwrap_err().kind(), "DiagonalError");
}

#[test]
fn wavelet_pair_zero_cases() {
    let mu = AtomicMeasure::new(1, 1.0, 0.25, "two", vec![0.25, 0.75], vec![1.0, 3.0]).unwrap();
    let k = KernelSpec::constant(Complex64::new(1.0, 0.0));
    let l = CubeId::standard(1, &[0]);
    let r = CubeId::standard(1, &[1]);
    assert_eq!(wavelet_pair(&k, &mu, &l, &r).unwrap().norm(), 0.0);
    let empty = CubeId::standard(2, &[2]);
    assert_eq!(wavelet_pair(&trunc_cauchy(0.01), &mu, &empty, &l).unwrap(), Complex64::new(0.0, 0.0));

    // spatial cutoff of Q = [-2, 2]^2 removes the far quadrant entirely
    let far = AtomicMeasure::new(2, 1.0, 0.25, "far", vec![0.1, 0.1, 0.4, 0.1, 9.1, 9.1, 9.4, 9.1], vec![1.0; 4]).unwrap();
    let k = KernelSpec::cauchy().truncate(Truncation::new(0.01, 1).unwrap()).unwrap();
    let near = CubeId::standard(2, &[0, 0]);
    let away = CubeId::standard(2, &[36, 36]);
    assert_eq!(wavelet_pair(&k, &far, &near, &away).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn compression_window_extremes() {
    let mu = random_measure(48, 21);
    let k = trunc_cauchy(0.02);
    let grid = GridKind::Standard;
    let sys = HaarSystem::new(&mu, grid, Some(nhca_core::operator::full_range(&mu, grid))).unwrap();
    let f = random_field(mu.len(), 22);
    let g = random_field(mu.len(), 23);
    let all = compressed_bilinear(&k, &sys, &f, &g, 40).unwrap();
    assert_eq!((all.direct, all.coefficient_sum, all.pairs), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 0));

    let none = compressed_bilinear(&k, &sys, &f, &g, 0).unwrap();
    let f0 = sys.synthesize(&sys.analyze(&f));
    let g0 = sys.synthesize(&sys.analyze(&g));
    let direct = bilinear(&k, &mu, &f0, &g0).unwrap();
    assert!((none.direct - direct).norm() <= 1e-13 * direct.norm());
    assert!(none.residual <= 1e-8);
}

#[test]
fn truncated_range_is_reported() {
    let mu = random_measure(48, 31);
    let grid = GridKind::Standard;
    let full = nhca_core::operator::full_range(&mu, grid);
    let short = *full.start()..=(*full.end() - 1);
    let sys = HaarSystem::new(&mu, grid, Some(short)).unwrap();
    let f = random_field(mu.len(), 1);
    let err = compressed_bilinear(&trunc_cauchy(0.02), &sys, &f, &f, 1).unwrap_err();
    assert_eq!(err.kind(), "IncompleteRangeError");
}

#[test]
fn testing_stats_respect_the_truncation_bound() {
    let mu = random_measure(64, 41);
    let gamma = 0.05;
    let k = trunc_cauchy(gamma);
    for level in -1..=2 {
        for cell in nhca_core::measure::cells_at(&mu, GridKind::Standard, level) {
            let s = testing_stats(&k, &mu, &cell.id).unwrap();
            assert!(s.f_t <= cell.mass.sqrt() / gamma + 1e-12);
            assert!(s.t_norm >= 0.0 && s.tstar_norm >= 0.0);
        }
    }
    let empty = testing_stats(&k, &mu, &CubeId::standard(0, &[40, 40])).unwrap();
    assert!(empty.empty && empty.f_t == 0.0);
}

#[test]
fn square_testing_ratio_halves_per_level() {
    let mu = generate(&MeasureKind::Square { side: 64 }).unwrap();
    let k = KernelSpec::cauchy().truncate(Truncation::new(2f64.powi(-8), 2).unwrap()).unwrap();
    let ft = |level: i32| testing_stats(&k, &mu, &CubeId::standard(level, &[0, 0])).unwrap().f_t;
    for level in 2..=4 {
        let r = ft(level + 1) / ft(level);
        assert!((0.4..=0.7).contains(&r), "level {level}: {r}");
    }
}

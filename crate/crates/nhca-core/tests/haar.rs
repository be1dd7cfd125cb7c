use approx::assert_abs_diff_eq;
use nhca_core::grid::{CubeId, GridKind};
use nhca_core::haar::*;
use nhca_core::measure::{generate, AtomicMeasure, MeasureKind, DEFAULT_Y0};
use num_complex::Complex64;
use proptest::prelude::*;

const STD: GridKind = GridKind::Standard;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn two_atoms() -> AtomicMeasure {
    AtomicMeasure::new(1, 1.0, 0.25, "pair", vec![0.25, 0.75], vec![1.0, 3.0]).unwrap()
}

fn left() -> CubeId {
    CubeId::standard(1, &[0])
}

fn right() -> CubeId {
    CubeId::standard(1, &[1])
}

/// `⟨f, ψ_I⟩` by direct atom summation.
fn coefficient(mu: &AtomicMeasure, f: &[Complex64], i: &CubeId) -> Complex64 {
    wavelet_on_atoms(mu, i)
        .unwrap()
        .iter()
        .map(|&(a, v)| f[a as usize] * mu.weight(a as usize) * v)
        .sum()
}

#[test]
fn two_atom_wavelet_values() {
    let mu = two_atoms();
    let plain = WaveletVariant::Plain;
    assert_abs_diff_eq!(wavelet_eval(&mu, &left(), &[0.25], &plain).unwrap(), 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(wavelet_eval(&mu, &left(), &[0.75], &plain).unwrap(), -0.25, epsilon = 1e-15);
    let empty = CubeId::standard(2, &[2]);
    assert_eq!(wavelet_eval(&mu, &empty, &[0.25], &plain).unwrap(), 0.0);
    assert!(wavelet_on_atoms(&mu, &empty).unwrap().is_empty());
}

#[test]
fn full_wavelet_agrees_inside_its_cube() {
    let mu = two_atoms();
    let full = WaveletVariant::Full {
        jp: CubeId::standard(3, &[1]),
        q: CubeId::standard(0, &[0]),
    };
    assert_eq!(
        wavelet_eval(&mu, &left(), &[0.25], &full).unwrap(),
        wavelet_eval(&mu, &left(), &[0.25], &WaveletVariant::Plain).unwrap()
    );
    // frozen at c(J_p) everywhere on Q, zero outside
    assert_abs_diff_eq!(wavelet_eval(&mu, &left(), &[0.75], &full).unwrap(), 0.75, epsilon = 1e-15);
    assert_eq!(wavelet_eval(&mu, &left(), &[1.5], &full).unwrap(), 0.0);
}

#[test]
fn two_atom_gram() {
    let mu = two_atoms();
    assert_abs_diff_eq!(gram(&mu, &left(), &right()).unwrap(), -3f64.sqrt() / 4.0, epsilon = 1e-15);
    assert_abs_diff_eq!(gram(&mu, &left(), &left()).unwrap(), 0.75, epsilon = 1e-15);
    assert_eq!(gram(&mu, &left(), &CubeId::standard(2, &[3])).unwrap(), 0.0);
}

#[test]
fn two_atom_martingales() {
    let mu = two_atoms();
    let f = vec![c(1.0), c(0.0)];
    let q = CubeId::standard(0, &[0]);
    let d = martingale(&mu, &f, &q, &Martingale::Delta);
    assert_abs_diff_eq!(d[0].re, 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(d[1].re, -0.25, epsilon = 1e-15);
    let e = martingale(&mu, &f, &q, &Martingale::E);
    assert_eq!(e, vec![c(0.25), c(0.25)]);
    let constant = vec![c(2.0), c(2.0)];
    assert!(martingale(&mu, &constant, &q, &Martingale::Delta).iter().all(|v| v.norm() < 1e-15));
    assert_abs_diff_eq!(coefficient(&mu, &f, &left()).re, 0.75, epsilon = 1e-15);
}

#[test]
fn two_atom_analysis() {
    let mu = two_atoms();
    let sys = HaarSystem::new(&mu, STD, None).unwrap();
    assert_eq!(sys.wavelet_levels(), 1..=2);
    let f = vec![c(1.0), c(0.0)];
    let map = sys.analyze(&f);
    assert_eq!(map.len(), 2);
    assert_abs_diff_eq!(map.get(&left()).re, 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(map.get(&right()).re, -3f64.sqrt() / 4.0, epsilon = 1e-15);
    let back = sys.synthesize(&map);
    assert!((back[0] - c(0.75)).norm() < 1e-12 && (back[1] - c(-0.25)).norm() < 1e-12);
    let p = sys.parseval(&f);
    assert_abs_diff_eq!(p.coeff_sq, 0.75, epsilon = 1e-14);
    assert_abs_diff_eq!(p.centered_sq, 0.75, epsilon = 1e-14);
    assert_eq!(p.coarse_means, vec![(CubeId::standard(0, &[0]), c(0.25))]);
    assert!(p.residual < 1e-14);
}

#[test]
fn analysis_finer_than_resolution_is_a_range_error() {
    let mu = two_atoms();
    assert_eq!(HaarSystem::new(&mu, STD, Some(1..=3)).unwrap_err().kind(), "RangeError");
}

#[test]
fn full_window_projection_leaves_nothing() {
    let mu = generate(&MeasureKind::Square { side: 8 }).unwrap();
    let sys = HaarSystem::new(&mu, STD, None).unwrap();
    let f: Vec<Complex64> = (0..mu.len()).map(|i| c((i as f64 * 0.37).sin())).collect();
    let (_, perp) = project(&sys, &f, 20);
    assert!(perp.iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn boundary_split_examples() {
    let mu = generate(&MeasureKind::Segment { atoms: 16, y0: DEFAULT_Y0 }).unwrap();
    let f: Vec<Complex64> = (0..mu.len()).map(|i| c(i as f64)).collect();
    let (inner, skel) = boundary_split(&mu, &f, STD, 4);
    assert!(skel.iter().all(|v| *v == c(0.0)));
    assert_eq!(inner, f);

    let user = AtomicMeasure::new(2, 1.0, 0.125, "user", vec![0.5, 0.3, 0.3, 0.3], vec![1.0, 1.0]).unwrap();
    let g = vec![c(2.0), c(5.0)];
    let (inner, skel) = boundary_split(&user, &g, STD, 3);
    assert_eq!(skel, vec![c(2.0), c(0.0)]);
    assert_eq!(inner, vec![c(0.0), c(5.0)]);
    let sum: Vec<Complex64> = inner.iter().zip(&skel).map(|(a, b)| a + b).collect();
    assert_eq!(sum, g);
}

fn random_measure() -> impl Strategy<Value = AtomicMeasure> {
    (2usize..80, 2i32..6, any::<u64>()).prop_map(|(atoms, depth, seed)| {
        let atoms = atoms.min(1 << (2 * (depth + 2)));
        generate(&MeasureKind::Random {
            dim: 2,
            atoms,
            depth,
            span: 1,
            seed,
        })
        .unwrap()
    })
}

fn field(mu: &AtomicMeasure, seed: u64) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..mu.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Cubes of the system's wavelet levels holding at least one atom.
fn cubes_of(sys: &HaarSystem<'_>) -> Vec<CubeId> {
    sys.levels[1..]
        .iter()
        .flat_map(|lv| (0..lv.len()).map(|c| lv.id(sys.grid, c)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_matches_brute_force(mu in random_measure(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let cubes = cubes_of(&sys);
        let i = a.get(&cubes);
        let j = b.get(&cubes);
        let sib = j.parent().unwrap().children();
        for other in sib.iter().chain([i, j]) {
            let fast = gram(&mu, i, other).unwrap();
            let slow = gram_brute(&mu, i, other).unwrap();
            prop_assert!((fast - slow).abs() <= 1e-12, "{} vs {}", fast, slow);
        }
    }

    #[test]
    fn wavelets_have_mean_zero_and_bounded_norms(mu in random_measure(), a in any::<prop::sample::Index>()) {
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let cubes = cubes_of(&sys);
        let i = a.get(&cubes);
        let values = wavelet_on_atoms(&mu, i).unwrap();
        let mean: f64 = values.iter().map(|&(k, v)| mu.weight(k as usize) * v).sum();
        prop_assert!(mean.abs() <= 1e-12);
        let mi: f64 = values.iter().filter(|(k, _)| i.contains(mu.point(*k as usize))).map(|(k, _)| mu.weight(*k as usize)).sum();
        for q in [1.0f64, 2.0, 4.0] {
            let norm = values.iter().map(|&(k, v)| mu.weight(k as usize) * v.abs().powf(q)).sum::<f64>().powf(1.0 / q);
            prop_assert!(norm <= 2.0 * mi.powf(-0.5 + 1.0 / q) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn wavelet_analysis_returns_gram_column(mu in random_measure(), a in any::<prop::sample::Index>()) {
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let cubes = cubes_of(&sys);
        let j = a.get(&cubes);
        let mut f = vec![c(0.0); mu.len()];
        for (k, v) in wavelet_on_atoms(&mu, j).unwrap() {
            f[k as usize] = c(v);
        }
        let map = sys.analyze(&f);
        for i in &cubes {
            let expected = gram(&mu, i, j).unwrap();
            let got = map.get(i);
            let single = sys.level(i.level).map(|lv| lv.siblings[lv.index_of(&i.corner).unwrap() as usize] == 1).unwrap();
            if !single {
                prop_assert!((got - c(expected)).norm() <= 1e-12);
            } else {
                prop_assert!(expected.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parseval_after_coarse_mean_removal(mu in random_measure(), seed in any::<u64>()) {
        let f = field(&mu, seed);
        let report = parseval_residual(&mu, &f, STD, None).unwrap();
        prop_assert!(report.residual <= 1e-10, "{}", report.residual);
        prop_assert!(report.coeff_sq <= report.norm_sq * (1.0 + 1e-12));
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let back = sys.synthesize(&sys.analyze(&f));
        let means = sys.coarse_means(&f);
        for k in 0..mu.len() {
            prop_assert!((back[k] - (f[k] - means[k])).norm() <= 1e-10);
        }
    }

    #[test]
    fn difference_is_sum_of_child_wavelets(mu in random_measure(), seed in any::<u64>(), a in any::<prop::sample::Index>()) {
        let f = field(&mu, seed);
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let cubes = cubes_of(&sys);
        let q = a.get(&cubes).parent().unwrap();
        let delta = martingale(&mu, &f, &q, &Martingale::Delta);
        let mut rebuilt = vec![c(0.0); mu.len()];
        for ch in q.children() {
            let coef = coefficient(&mu, &f, &ch);
            for (k, v) in wavelet_on_atoms(&mu, &ch).unwrap() {
                rebuilt[k as usize] += coef * v;
            }
        }
        for k in 0..mu.len() {
            prop_assert!((delta[k] - rebuilt[k]).norm() <= 1e-12);
        }
    }

    #[test]
    fn level_difference_telescopes(mu in random_measure(), seed in any::<u64>()) {
        let f = field(&mu, seed);
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let map = sys.analyze(&f);
        for k in sys.wavelet_levels() {
            let e1 = sys.expectation(k, &f).unwrap();
            let e0 = sys.expectation(k - 1, &f).unwrap();
            let d = sys.difference(k, &f).unwrap();
            let one_level = sys.synthesize(&map.filter(|id| id.level == k));
            for i in 0..mu.len() {
                prop_assert_eq!(d[i], e1[i] - e0[i]);
                prop_assert!((d[i] - one_level[i]).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn localized_reconstruction(mu in random_measure(), seed in any::<u64>(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>(), up in 1i32..3) {
        let f = field(&mu, seed);
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let cubes = cubes_of(&sys);
        let jp = a.get(&cubes).clone();
        let other = b.get(&cubes);
        let r = other.ancestor(other.level.min(jp.level - up));
        let q = CubeId::standard(-3, &[-1, -1]);
        let hat = martingale(&mu, &f, &r, &Martingale::DeltaHat { jp: jp.clone(), cutoff: q.clone() });
        let x = mu.point(0);
        let mut sum = c(0.0);
        for ch in r.children() {
            let w = wavelet_eval(&mu, &ch, x, &WaveletVariant::Full { jp: jp.clone(), q: q.clone() }).unwrap();
            sum += coefficient(&mu, &f, &ch) * w;
        }
        prop_assert!((hat[0] - sum).norm() <= 1e-12, "{} vs {}", hat[0], sum);
    }

    #[test]
    fn projections_contract(mu in random_measure(), seed in any::<u64>(), m in 1u32..4) {
        let f = field(&mu, seed);
        let sys = HaarSystem::new(&mu, STD, None).unwrap();
        let (p, perp) = project(&sys, &f, m);
        let norm = mu.norm2(&f);
        prop_assert!(mu.norm2(&p) <= norm + 1e-10);
        prop_assert!(mu.norm2(&perp) <= norm + 1e-10);
        let (_, outside) = sys.analyze(&f).split_lagom(m);
        prop_assert!(mu.norm2(&perp) <= outside.energy() + 1e-10);
    }
}

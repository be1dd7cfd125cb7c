use nhca_core::geometry::*;
use nhca_core::grid::{Cube, CubeId};
use proptest::prelude::*;

fn unit(lower: &[f64], side: f64) -> Cube {
    Cube::from_lower(lower, side)
}

#[test]
fn pair_geometry_examples() {
    let i = unit(&[0.0, 0.0], 1.0);
    let g = PairGeometry::new(&i, &i);
    assert_eq!((g.ec, g.rdist, g.between_side), (1.0, 1.0, 0.0));

    let j = unit(&[2.0, 2.0], 1.0);
    let g = PairGeometry::new(&i, &j);
    assert_eq!(g.ec, 1.0);
    assert!((g.rdist - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    assert_eq!(g.enclosing.side, 3.0);
    assert!((g.between_side - 2f64.sqrt()).abs() < 1e-12);

    let big = unit(&[0.0, 0.0], 4.0);
    let small = unit(&[2.25, 2.25], 0.25);
    assert_eq!(inrdist(&big, &small), 2.0);
    assert_eq!(PairGeometry::new(&big, &small).inrdist, 2.0);

    let line = unit(&[0.0], 1.0);
    assert_eq!(PairGeometry::try_new(&i, &line).unwrap_err().kind(), "DimensionError");
}

#[test]
fn bucket_examples() {
    let l = bucket_classify(&CubeId::standard(0, &[0, 0]), &CubeId::standard(1, &[0, 0])).unwrap();
    assert_eq!(l.e, 1);
    let l = bucket_classify(&CubeId::standard(0, &[0, 0]), &CubeId::standard(0, &[8, 8])).unwrap();
    assert_eq!((l.e, l.m, l.k), (0, 5, None));
    let l = bucket_classify(&CubeId::standard(0, &[0, 0]), &CubeId::standard(0, &[2, 2])).unwrap();
    assert_eq!((l.e, l.m, l.k), (0, 1, Some(1)));
}

#[test]
fn fm_examples() {
    let m = 4;
    let huge = unit(&[0.0, 0.0], 32.0);
    assert!(fm_membership(&huge, &huge, m).large);
    let o = unit(&[0.0, 0.0], 1.0);
    assert!(!fm_membership(&o, &o, m).any());
    let a = unit(&[1024.0, 0.0], 1.0);
    let b = unit(&[1025.0, 0.0], 1.0);
    let c = fm_membership(&a, &b, m);
    assert!(c.far && !c.large && !c.small);
}

fn cube_strategy(dim: usize) -> impl Strategy<Value = CubeId> {
    (-4i32..8, prop::collection::vec(-40i64..40, dim)).prop_map(|(level, corner)| CubeId::standard(level, &corner))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ec_multiplies_along_monotone_chains(a in cube_strategy(2), d1 in 0i32..4, d2 in 0i32..4) {
        let i = a.to_cube();
        let j = Cube::new(&i.center, i.side / 2f64.powi(d1));
        let k = Cube::new(&i.center, j.side / 2f64.powi(d2));
        let lhs = ec(&i, &j) * ec(&j, &k);
        prop_assert_eq!(lhs, ec(&i, &k));
    }

    #[test]
    fn parent_rdist_comparable(i in cube_strategy(2), j in cube_strategy(2)) {
        let r = i.to_cube().rdist(&j.to_cube());
        let rp = i.parent().unwrap().to_cube().rdist(&j.parent().unwrap().to_cube());
        prop_assert!(r / 3.0 <= rp + 1e-12 && rp <= r + 1.0 + 1e-12);
    }

    #[test]
    fn enclosing_side_comparable(i in cube_strategy(3), j in cube_strategy(3)) {
        let g = PairGeometry::new(&i.to_cube(), &j.to_cube());
        let scale = g.between_side + g.join.side;
        let ratio = g.enclosing.side / scale;
        prop_assert!((0.5..=3.0).contains(&ratio), "ratio {}", ratio);
        prop_assert!(g.enclosing.side >= g.join.side);
        prop_assert!(i.to_cube().is_within(&g.enclosing) && j.to_cube().is_within(&g.enclosing));
    }

    #[test]
    fn geometry_symmetric_and_bounded(i in cube_strategy(2), j in cube_strategy(2)) {
        let a = PairGeometry::new(&i.to_cube(), &j.to_cube());
        let b = PairGeometry::new(&j.to_cube(), &i.to_cube());
        prop_assert_eq!(a.ec, b.ec);
        prop_assert_eq!(a.rdist, b.rdist);
        prop_assert!(a.ec > 0.0 && a.ec <= 1.0);
        prop_assert!(a.rdist >= 1.0 && a.inrdist >= 1.0);
    }

    #[test]
    fn buckets_partition(i in cube_strategy(2), j in cube_strategy(2)) {
        let l = bucket_classify(&i, &j).unwrap();
        let r = i.parent().unwrap().to_cube().rdist(&j.parent().unwrap().to_cube());
        prop_assert!(l.m as f64 <= r && r < l.m as f64 + 1.0);
        prop_assert_eq!(l.k.is_some(), l.m == 1);
        prop_assert_eq!(l.e, j.level - i.level);
    }
}

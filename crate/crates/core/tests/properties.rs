use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sympos::io::{path_from_json, path_to_json};
use sympos::linalg::block_diag;
use sympos::strata::{quadruplet_canonical, rotation_block};
use sympos::{
    classify, conjugate, random_symplectic, splitting_number, symp_exp, Complex64, DMatrix, Generator, PositivePath,
    Segment, SympMatrix,
};

fn spd(seed: u64, n: usize) -> Generator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_symplectic(&mut rng, n, 0.6);
    let m = x.matrix();
    Generator::new(m.transpose() * m + DMatrix::identity(2 * n, 2 * n) * 0.1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn region_survives_conjugation(a in 0.3f64..1.3, b in 1.6f64..2.8, r in 1.2f64..3.0, phi in 0.3f64..2.8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_symplectic(&mut rng, 2, 0.3);
        let elliptic = SympMatrix::new(block_diag(&[&rotation_block(a), &rotation_block(b)])).unwrap();
        let loxodromic = SympMatrix::new(quadruplet_canonical(Complex64::from_polar(r, phi))).unwrap();
        for m in [elliptic, loxodromic] {
            let before = classify(&m, 1e-8).unwrap();
            let after = classify(&conjugate(&m, &x).unwrap(), 1e-8).unwrap();
            prop_assert_eq!(before.region, after.region);
        }
    }

    #[test]
    fn positive_flows_are_symplectic(seed in any::<u64>(), t in 0.01f64..3.0) {
        let a = symp_exp(&spd(seed, 2), t).unwrap();
        prop_assert!(a.residual() < 1e-10 * a.matrix().norm().powi(2));
    }

    #[test]
    fn rotation_splitting_follows_direction(theta in 0.2f64..3.0) {
        let a = SympMatrix::new(rotation_block(theta)).unwrap();
        let up = Complex64::from_polar(1.0, theta);
        prop_assert_eq!(splitting_number(&a, up).unwrap(), 1);
        prop_assert_eq!(splitting_number(&a, up.conj()).unwrap(), -1);
    }

    #[test]
    fn path_json_round_trip(seed in any::<u64>(), d1 in 0.05f64..1.0, d2 in 0.05f64..1.0) {
        let p = PositivePath::from_identity(2, vec![Segment::new(d1, spd(seed, 2)), Segment::new(d2, spd(seed ^ 1, 2))]).unwrap();
        let v = path_to_json(&p);
        let q = path_from_json(&v, 1e-9).unwrap();
        prop_assert_eq!(&path_to_json(&q), &v);
        for t in [0.0, d1, d1 + d2 / 2.0] {
            let (a, b) = (p.evaluate(t).unwrap(), q.evaluate(t).unwrap());
            assert_relative_eq!(a.matrix(), b.matrix(), epsilon = 1e-12);
        }
    }
}

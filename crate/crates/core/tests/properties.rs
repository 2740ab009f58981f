use proptest::prelude::{any, prop_assert, prop_assert_eq, prop_assume, proptest, ProptestConfig, Strategy};

use oppenheim_core::counting::{brute_force_count, count_n, count_n_tilde};
use oppenheim_core::regions::StarRegion;
use oppenheim_core::scalar::{rat, rat_int};
use oppenheim_core::subspaces::exceptional_subspaces;
use oppenheim_core::{InhomForm, Rational, SymmetricForm};

fn symmetric(n: usize, raw: &[i64]) -> Vec<Vec<Rational>> {
    let mut m = vec![vec![rat_int(0); n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let v = if i == j { rat_int(raw[k]) } else { rat(raw[k], 2) };
            m[i][j] = v.clone();
            m[j][i] = v;
            k += 1;
        }
    }
    m
}

/// Random indefinite nondegenerate rational form in 3 or 4 variables with a shift in tenths.
fn instance() -> impl Strategy<Value = Option<InhomForm<Rational>>> {
    (3usize..=4, proptest::collection::vec(-3i64..=3, 10), proptest::collection::vec(-9i64..=9, 4)).prop_map(|(n, raw, s)| {
        let q = SymmetricForm::new(symmetric(n, &raw)).ok()?;
        let sig = q.signature().ok()?;
        if sig.positive == 0 || sig.negative == 0 || sig.positive + sig.negative != n {
            return None;
        }
        InhomForm::new(q, s[..n].iter().map(|&v| rat(v, 10)).collect()).ok()
    })
}

/// Product of elementary integer matrices, unimodular by construction.
fn unimodular(n: usize, moves: &[(usize, usize, bool)]) -> Vec<Vec<Rational>> {
    let mut g: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| rat_int((i == j) as i64)).collect()).collect();
    for &(i, j, sign) in moves {
        let (i, j) = (i % n, j % n);
        if i == j {
            continue;
        }
        let s = if sign { rat_int(1) } else { rat_int(-1) };
        for row in g.iter_mut() {
            let v = row[i].clone() * s.clone();
            row[j] = row[j].clone() + v;
        }
    }
    g
}

fn neg(f: &InhomForm<Rational>) -> InhomForm<Rational> {
    InhomForm::new(f.homogeneous().map(|x| -x.clone()), f.shift().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn count_equals_brute_force(f in instance(), t in 2.0f64..7.0, a in -5.0f64..3.0, w in 0.2f64..5.0) {
        prop_assume!(f.is_some());
        let f = f.unwrap();
        let region = StarRegion::ball(f.dim(), 1.0).unwrap();
        prop_assert_eq!(count_n(&f, &region, a, a + w, t).unwrap().n_total, brute_force_count(&f, &region, a, a + w, t).unwrap());
    }

    #[test]
    fn count_is_monotone(f in instance(), t in 2.0f64..6.0, dt in 0.0f64..2.0, a in -4.0f64..2.0, w in 0.2f64..3.0, dw in 0.0f64..2.0) {
        prop_assume!(f.is_some());
        let f = f.unwrap();
        let region = StarRegion::ball(f.dim(), 1.0).unwrap();
        let base = count_n(&f, &region, a, a + w, t).unwrap().n_total;
        prop_assert!(base <= count_n(&f, &region, a, a + w, t + dt).unwrap().n_total);
        prop_assert!(base <= count_n(&f, &region, a - dw, a + w, t).unwrap().n_total);
        prop_assert!(base <= count_n(&f, &region, a, a + w + dw, t).unwrap().n_total);
    }

    #[test]
    fn negating_the_form_reflects_the_window(f in instance(), t in 2.0f64..6.0, a in -4.0f64..2.0, w in 0.2f64..3.0) {
        prop_assume!(f.is_some());
        let f = f.unwrap();
        let region = StarRegion::ball(f.dim(), 1.0).unwrap();
        let g = neg(&f);
        prop_assert_eq!(count_n(&f, &region, a, a + w, t).unwrap().n_total, count_n(&g, &region, -a - w, -a, t).unwrap().n_total);
    }

    #[test]
    fn shift_sign_symmetry(f in instance(), t in 2.0f64..6.0, a in -4.0f64..2.0, w in 0.2f64..3.0) {
        prop_assume!(f.is_some());
        let f = f.unwrap();
        let region = StarRegion::ball(f.dim(), 1.0).unwrap();
        let flipped = f.with_shift(f.shift().iter().map(|x| -x.clone()).collect()).unwrap();
        prop_assert_eq!(count_n(&f, &region, a, a + w, t).unwrap().n_total, count_n(&flipped, &region, a, a + w, t).unwrap().n_total);
    }

    #[test]
    fn signature_and_values_survive_congruence(f in instance(), moves in proptest::collection::vec((0usize..4, 0usize..4, any::<bool>()), 0..6), y in proptest::collection::vec(-5i64..=5, 4)) {
        prop_assume!(f.is_some());
        let q = f.unwrap().homogeneous().clone();
        let n = q.dim();
        let g = unimodular(n, &moves);
        let qg = q.congruent(&g).unwrap();
        prop_assert_eq!(qg.signature().unwrap(), q.signature().unwrap());
        let y: Vec<Rational> = y[..n].iter().map(|&v| rat_int(v)).collect();
        let gy: Vec<Rational> = (0..n).map(|i| (0..n).map(|j| g[i][j].clone() * y[j].clone()).sum()).collect();
        prop_assert_eq!(qg.evaluate(&y).unwrap(), q.evaluate(&gy).unwrap());
    }

    #[test]
    fn excluded_points_add_up(num in -3i64..=3, den in 1i64..=4, t in 4.0f64..9.0, a in -2.0f64..-0.1, b in 0.1f64..2.0) {
        let h = rat(1, 2);
        let z = rat_int(0);
        let b4 = SymmetricForm::new(vec![
            vec![z.clone(), z.clone(), z.clone(), h.clone()],
            vec![z.clone(), z.clone(), -h.clone(), z.clone()],
            vec![z.clone(), -h.clone(), z.clone(), z.clone()],
            vec![h, z.clone(), z.clone(), z.clone()],
        ]).unwrap();
        let f = InhomForm::new(b4, vec![rat(num, den), z.clone(), z.clone(), rat(1, 3)]).unwrap();
        let ex = exceptional_subspaces(&f, 10.0).unwrap();
        let region = StarRegion::ball(4, 1.0).unwrap();
        let r = count_n_tilde(&f, &region, a, b, t, &ex).unwrap();
        prop_assert_eq!(r.excluded.len(), ex.len());
        prop_assert_eq!(r.n_tilde + r.excluded.iter().sum::<u64>(), r.n_total);
        prop_assert_eq!(r.n_total, count_n(&f, &region, a, b, t).unwrap().n_total);
    }
}

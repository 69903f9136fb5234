use gaplab_core::frequency::{Frequency, Rational};
use gaplab_core::rational_spectrum::*;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn r(p: i64, q: i64) -> Rational {
    Rational::new(p, q).unwrap()
}

fn spec(lambda: f64, p: i64, q: i64) -> Spectrum {
    spectrum_rational(lambda, r(p, q), TOL).unwrap()
}

fn scaled(s: &[(f64, f64)], c: f64) -> Vec<(f64, f64)> {
    s.iter().map(|&(a, b)| (c * a, c * b)).collect()
}

/// Band unions from Bloch-matrix eigenvalues at k ∈ {0, π}, optimized over θ
/// (numpy `eigvalsh` + bounded scalar minimization).
const ORACLE_05_35: [(f64, f64); 5] = [
    (-2.1422015969460797, -1.833184602571131),
    (-1.7517399890316114, -1.1909830056250523),
    (-0.25173998903161154, 0.25173998903161143),
    (1.1909830056250519, 1.7517399890316112),
    (1.8331846025711316, 2.1422015969460793),
];
const ORACLE_07_27: [(f64, f64); 7] = [
    (-2.36954631007744, -2.24884694320865),
    (-2.2337922739034846, -2.0720379188330726),
    (-0.7725697840878744, -0.5077919550070301),
    (-0.2237228408792238, 0.22372284087922295),
    (0.5077919550070293, 0.7725697840878737),
    (2.0720379188330718, 2.2337922739034832),
    (2.248846943208651, 2.3695463100774403),
];

#[test]
fn discriminant_trivial_cases() {
    assert!((discriminant(0.37, 0.2, 0.0, r(0, 1)) - 0.37).abs() < 1e-15);
    let (e, th, l) = (0.4, 0.13, 0.8);
    let want = e - 2.0 * l * (std::f64::consts::TAU * th).cos();
    assert!((discriminant(e, th, l, r(0, 1)) - want).abs() < 1e-15);
}

#[test]
fn period_two_union_is_one_interval() {
    // tr = E² − 4λ²cos²2πθ − 2, so the θ-union is |E| ≤ 2√(1+λ²).
    for lambda in [0.5, 1.0, 3.0] {
        let s = spec(lambda, 1, 2);
        let edge = 2.0 * (1.0 + lambda * lambda).sqrt();
        assert!((s.bands[0].lo + edge).abs() < 1e-10);
        assert!((s.bands[1].hi - edge).abs() < 1e-10);
        assert!(s.bands[0].hi.abs() < 1e-10 && s.bands[1].lo.abs() < 1e-10);
        let g = gap_labels_with(&s, None);
        assert!(!g.gaps[0].open);
    }
}

#[test]
fn half_frequency_bands_are_symmetric() {
    let s = spec(0.5, 1, 2);
    assert_eq!(s.bands.len(), 2);
    assert!((s.bands[0].lo + s.bands[1].hi).abs() < 1e-12);
    assert!((s.bands[0].hi + s.bands[1].lo).abs() < 1e-12);
}

#[test]
fn bands_match_bloch_oracle() {
    for (lambda, p, q, oracle) in [(0.5, 3, 5, &ORACLE_05_35[..]), (0.7, 2, 7, &ORACLE_07_27[..])] {
        let s = spec(lambda, p, q);
        assert!(s.extremality_verified);
        assert_eq!(s.bands.len(), q as usize);
        for (b, &(lo, hi)) in s.bands.iter().zip(oracle) {
            assert!((b.lo - lo).abs() < 1e-9 && (b.hi - hi).abs() < 1e-9, "{b:?} vs ({lo}, {hi})");
            assert!(b.edge_residuals().iter().all(|r| r.abs() < 1e-8));
        }
        let m: f64 = oracle.iter().map(|(a, b)| b - a).sum();
        assert!((lebesgue_measure(&s.intervals()) - m).abs() < 1e-8);
    }
}

#[test]
fn bands_stay_in_norm_ball() {
    for (lambda, p, q) in [(0.3, 5, 13), (2.0, 8, 13), (1.0, 21, 34), (-0.7, 2, 5)] {
        let s = spec(lambda, p, q);
        let bound = 2.0 + 2.0 * f64::abs(lambda) + 1e-12;
        assert!(s.bands.iter().all(|b| b.lo >= -bound && b.hi <= bound && b.lo <= b.hi));
        assert!(s.bands.windows(2).all(|w| w[0].hi <= w[1].lo + 1e-9));
    }
}

#[test]
fn gaps_of_three_fifths() {
    let s = gap_labels(&spec(0.5, 3, 5));
    assert_eq!(s.gaps.len(), 4);
    for (i, g) in s.gaps.iter().enumerate() {
        assert_eq!(g.j, i + 1);
        assert!(g.open);
        assert_eq!((g.label * 3 - g.j as i64).rem_euclid(5), 0);
        assert!(2 * g.label.abs() <= 5);
        let ids = g.ids_sturm.unwrap();
        assert!((ids - g.ids_value()).abs() <= 2.0 / GAP_CHECK_M as f64 + 1e-3, "{ids}");
    }
}

#[test]
fn ids_trivial_limits() {
    let a = Frequency::Rational(r(3, 5));
    assert_eq!(ids_sturm(-3.5, 0.5, &a, 4, 60), 0.0);
    assert_eq!(ids_sturm(3.5, 0.5, &a, 4, 60), 1.0);
}

#[test]
fn chambers_single_harmonic() {
    for lambda in [0.3, 0.7] {
        for (p, q) in [(1, 3), (2, 5), (3, 8)] {
            for e in [-1.1, 0.0, 0.6] {
                let c = chambers_check(e, lambda, r(p, q), 64).unwrap();
                assert!(c.off_support_energy <= 1e-9);
                assert!((c.amplitude - 2.0 * f64::powi(lambda, q as i32)).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn aubry_duality_on_rationals() {
    for lambda in [0.3, 0.5, 2.0] {
        for (p, q) in [(1, 3), (2, 5), (3, 8), (5, 13)] {
            let a = spec(1.0 / lambda, p, q).intervals();
            let b = scaled(&spec(lambda, p, q).intervals(), 1.0 / lambda);
            assert!(hausdorff_distance(&a, &b).unwrap() <= 1e-6);
        }
    }
}

#[test]
fn holder_between_neighbouring_convergents() {
    let a = spec(1.0, 5, 8).intervals();
    let b = spec(1.0, 8, 13).intervals();
    let d = hausdorff_distance(&a, &b).unwrap();
    let c = d / (5.0f64 / 8.0 - 8.0 / 13.0).abs().sqrt();
    assert!(c <= 10.0, "{c}");
}

#[test]
fn edges_move_continuously_in_coupling() {
    for lambda in [0.3, 0.9, 1.7] {
        let a = spec(lambda, 3, 8);
        let b = spec(lambda + 1e-4, 3, 8);
        for (x, y) in a.bands.iter().zip(&b.bands) {
            assert!((x.lo - y.lo).abs() <= 1e-2 && (x.hi - y.hi).abs() <= 1e-2);
        }
    }
}

#[test]
fn rejects_bad_input() {
    assert!(spectrum_rational(0.0, r(1, 2), TOL).is_err());
    assert!(hausdorff_distance(&[], &[(0.0, 1.0)]).is_err());
}

#[test]
fn json_and_csv_shapes() {
    let s = gap_labels_with(&spec(0.5, 3, 5), None);
    let v = s.to_json();
    assert_eq!(v["bands"].as_array().unwrap().len(), 5);
    assert_eq!(v["gaps"][0]["ids"], "1/5");
    assert_eq!(s.bands_csv().lines().count(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ids_is_monotone(e1 in -3.0f64..3.0, de in 0.0f64..1.0) {
        let a = Frequency::Rational(r(5, 8));
        prop_assert!(ids_sturm(e1, 0.5, &a, 4, 80) <= ids_sturm(e1 + de, 0.5, &a, 4, 80) + 1e-12);
    }

    #[test]
    fn labels_solve_congruence(q in 2i64..60, p_seed in 1i64..1000, j_seed in 1i64..1000) {
        let p = (1..q).cycle().skip(p_seed as usize % q as usize).find(|p| num_integer::gcd(*p, q) == 1).unwrap();
        let j = 1 + j_seed % (q - 1);
        let l = gap_label(j, r(p, q));
        prop_assert_eq!((l * p - j).rem_euclid(q), 0);
        prop_assert!(2 * l.abs() <= q);
    }

    #[test]
    fn hausdorff_is_symmetric_and_shift_exact(d in -1.0f64..1.0) {
        let a = [(0.0, 0.5), (1.0, 2.0)];
        let b = [(d, 0.5 + d), (1.0 + d, 2.0 + d)];
        let h = hausdorff_distance(&a, &b).unwrap();
        prop_assert!((h - d.abs()).abs() < 1e-12);
        prop_assert_eq!(h, hausdorff_distance(&b, &a).unwrap());
    }
}

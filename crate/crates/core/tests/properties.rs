use metastab_core::colehopf::{cole_hopf_forward, cole_hopf_inverse, heat_evolve, spectral_project};
use metastab_core::experiments::{fmt_f64, parse_csv, to_csv, Row};
use metastab_core::similarity::{from_similarity, to_similarity, weighted_norm, WeightExponent};
use metastab_core::{Field, Grid};
use proptest::prelude::*;

fn bump(grid: Grid, c: f64, s: f64, a: f64) -> Field {
    Field::from_fn(grid, |x| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norm_is_monotone_in_m(c in -2.0..2.0f64, s in 0.1..1.0f64, m1 in 0.0..4.0f64, dm in 0.0..2.0f64) {
        let f = bump(Grid::symmetric(8.0, 401).unwrap(), c, s, 1.0);
        let lo = weighted_norm(&f, WeightExponent::unchecked(m1));
        let hi = weighted_norm(&f, WeightExponent::unchecked(m1 + dm));
        prop_assert!(lo <= hi * (1.0 + 1e-15));
    }

    #[test]
    fn csv_values_roundtrip_bitwise(mu in 1e-4..1.0f64, tau in 0.0..10.0f64, v in proptest::num::f64::NORMAL) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        let row = Row { experiment: "x@0".into(), mu, tau, metric: "m".into(), value: v };
        let back = parse_csv(&to_csv(&[&row])).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].value.to_bits(), v.to_bits());
        prop_assert_eq!(back[0].mu.to_bits(), mu.to_bits());
        prop_assert_eq!(back[0].tau.to_bits(), tau.to_bits());
    }

    #[test]
    fn similarity_time_is_log1p(t in 0.0..1e3f64) {
        let grid = Grid::symmetric(1.0, 17).unwrap();
        let wide = Grid::symmetric(40.0, 17).unwrap();
        let (_, tau) = to_similarity(&Field::zeros(wide), t, &grid).unwrap();
        prop_assert!((tau.exp_m1() - t).abs() <= 4.0 * f64::EPSILON * t.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn cole_hopf_roundtrip(c in -1.0..1.0f64, s in 0.2..0.6f64, a in -0.3..0.3f64) {
        let mu = 0.05;
        let w = bump(Grid::with_spacing(5.0, 0.01).unwrap(), c, s, a);
        let back = cole_hopf_inverse(&cole_hopf_forward(&w, mu).unwrap(), mu).unwrap();
        prop_assert!(back.sup_distance(&w).unwrap() <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn heat_flow_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, tau in 0.05..2.0f64) {
        let (mu, grid) = (0.05, Grid::with_spacing(5.0, 0.01).unwrap());
        let f = bump(grid, -0.5, 0.3, 1.0);
        let g = bump(grid, 0.7, 0.2, 1.0);
        let lhs = heat_evolve(&f.lin_comb(a, &g, b).unwrap(), tau, mu).unwrap();
        let rhs = heat_evolve(&f, tau, mu).unwrap().lin_comb(a, &heat_evolve(&g, tau, mu).unwrap(), b).unwrap();
        prop_assert!(lhs.sup_distance(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn heat_flow_semigroup_and_moments(c in -1.0..1.0f64, t1 in 0.1..1.0f64, t2 in 0.1..1.0f64) {
        let (mu, grid) = (0.05, Grid::with_spacing(5.0, 0.01).unwrap());
        let f = bump(grid, c, 0.3, 1.0);
        let two = heat_evolve(&heat_evolve(&f, t1, mu).unwrap(), t2, mu).unwrap();
        let one = heat_evolve(&f, t1 + t2, mu).unwrap();
        prop_assert!(two.sup_distance(&one).unwrap() <= 1e-6 * one.sup_norm());
        let m0 = spectral_project(&f, 0).unwrap();
        let m1 = spectral_project(&f, 1).unwrap();
        prop_assert!((spectral_project(&one, 0).unwrap() - m0).abs() <= 1e-10);
        let want = (-(t1 + t2) / 2.0).exp() * m1;
        prop_assert!((spectral_project(&one, 1).unwrap() - want).abs() <= 1e-8 * want.abs().max(1e-3));
    }

    #[test]
    fn similarity_roundtrip(t in prop::sample::select(vec![0.0f64, 1.0, 10.0, 100.0])) {
        // smooth, compactly supported
        let xi = Grid::symmetric(2.0, 401).unwrap();
        let f = Field::from_fn(xi, |x| if x.abs() < 1.0 { (1.0 - x * x).powi(4) } else { 0.0 }).unwrap();
        let phys = Grid::symmetric(2.0 * (1.0 + t).sqrt(), 4001).unwrap();
        let (u, tt) = from_similarity(&f, t.ln_1p(), &phys).unwrap();
        prop_assert!((tt - t).abs() <= 1e-12 * (1.0 + t));
        let (back, _) = to_similarity(&u, tt, &xi).unwrap();
        prop_assert!(back.sup_distance(&f).unwrap() <= 1e-5);
    }
}

mod common;

#[test]
fn library_matches_brute_force_oracles() {
    let worst = common::oracle_deviation(10).unwrap_or_else(|e| panic!("{e}"));
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn gauss_rule_integrates_monomials() {
    for n in 1..8 {
        let g = common::gauss01(n);
        for p in 0..2 * n {
            let s: f64 = g.iter().map(|(x, w)| w * x.powi(p as i32)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
        }
    }
}

use specverse_core::selftest::{disruption_suite, lsdv_suite, ols_suite, sandwich_suite};

#[test]
fn disruption_fast_path_matches_oracle() {
    let r = disruption_suite(1_000, 11);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn qr_matches_normal_equations() {
    let r = ols_suite(100, 12);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn within_matches_lsdv_with_duplicated_papers() {
    let r = lsdv_suite(100, 13);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn clustered_se_matches_sandwich_bitwise() {
    let r = sandwich_suite(100, 14);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn provenance_fixture_counts() {
    let r = specverse_core::selftest::provenance_suite();
    assert!(r.passed(), "{r:?}");
}

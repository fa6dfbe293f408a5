use trinelhv_web::{chsh_report, hollow_report, lp_report};

#[test]
fn trine_at_067_is_hollow() {
    let r = hollow_report(0.67).unwrap();
    assert_eq!(r.matches(": compatible").count(), 3);
    assert!(r.contains("triple: incompatible"));
    assert!(r.ends_with("hollow triangle: yes"));
    assert!(hollow_report(0.6).unwrap().ends_with("hollow triangle: no"));
    assert!(hollow_report(1.5).is_err());
}

#[test]
fn lp_at_the_minimiser() {
    let r = lp_report(std::f64::consts::FRAC_PI_4, 0.1192).unwrap();
    let last = r.lines().last().unwrap();
    let v: f64 = last.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((v - 0.6808).abs() < 2e-3, "{r}");
    assert_eq!(r.lines().count(), 3);
}

#[test]
fn chsh_report_values() {
    let r = chsh_report(std::f64::consts::FRAC_PI_4).unwrap();
    assert!(r.starts_with("max CHSH = 2.828427"), "{r}");
    assert!(r.contains("η ≤ 0.517638"), "{r}");
    assert!(chsh_report(0.0).unwrap().starts_with("max CHSH = 2.000000"));
    assert!(chsh_report(-0.1).is_err());
}

use kakinuma::config::{BottomConfig, BottomKind};
use kakinuma::selftest::{all_passed, run};
use kakinuma::Config;

#[test]
fn default_configuration_passes() {
    let checks = run(&Config::default()).unwrap();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    assert_eq!(checks.len(), 9);
    assert!(all_passed(&checks));
}

#[test]
fn cosine_bottom_configuration_passes() {
    let cfg = Config {
        n: 2,
        p_list: vec![0, 1, 2],
        bottom: BottomConfig { kind: BottomKind::Cosine, amplitude: 0.2, mode: 1 },
        ..Config::default()
    };
    let checks = run(&cfg).unwrap();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    assert!(all_passed(&checks));
}

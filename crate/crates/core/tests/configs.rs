use std::path::Path;

use nslimit::diagnostics::Mode;
use nslimit::harness::{Config, DEFAULT_EPS_LIST};

fn load(name: &str) -> Config {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    Config::load(&p).unwrap()
}

#[test]
fn shipped_configs_are_the_default_sweeps() {
    for (file, mode) in [("navier.toml", Mode::Navier), ("noslip.toml", Mode::NoSlip)] {
        let cfg = load(file);
        assert_eq!(cfg.sweep.eps_list, DEFAULT_EPS_LIST.to_vec());
        assert_eq!(cfg, Config::new(mode), "{file}");
    }
}

//! Runs a preset with reduced budgets and lists the files it wrote.
//! Usage: run_preset [preset] [out dir]

use std::path::PathBuf;

use torus_deform::{presets, runner};

fn main() -> torus_deform::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "bv-t3".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(format!("torus-{name}")));
    let mut cfg = presets::get(&name)?;
    cfg.verification.membership = None;
    cfg.lyapunov.horizon = 10_000;
    cfg.manifolds.grid = 8;
    cfg.ergodicity.ensemble = 100;
    cfg.ergodicity.horizons = vec![100, 1_000];

    let m = runner::run(&cfg, &out)?;
    for s in &m.stages {
        println!("{:<11} {:?}", s.name, s.status);
    }
    for f in &m.files {
        println!("  {:<26} {:>8} B  {}", f.name, f.bytes, f.sha256.as_deref().unwrap_or("-"));
    }
    println!("exit code would be {}", m.exit_code());
    Ok(())
}

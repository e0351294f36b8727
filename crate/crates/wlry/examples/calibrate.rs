//! Smallest admissible `C_γ` over the smooth suite, per `γ`.
//!
//! Each suite run is executed with a provisional constant; the per-run
//! minima for the second control and for the passive or active bound are
//! collected and the frozen value is twice their maximum.
//!
//! `cargo run --release -p wlry --example calibrate`

use std::collections::BTreeMap;
use std::path::Path;
use wlry::{load_config, run_experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("suite");
    let mut paths: Vec<_> = std::fs::read_dir(&suite)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "toml")).collect();
    paths.sort();
    let out = tempfile_dir()?;
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for p in paths {
        let mut cfg = load_config(&p)?;
        cfg.solver.c_gamma = Some(1.0);
        let r = run_experiment(&cfg, &out.join(p.file_stem().unwrap()))?;
        let m = &r.summary.measured;
        let mins = ["min_c_second_control", "min_c_passive", "min_c_active"].map(|k| m.get(k).copied().unwrap_or(0.0));
        let needed = mins.iter().copied().fold(0.0, f64::max);
        println!("{:<28} gamma {:<4} second {:.4e} passive {:.4e} active {:.4e}", p.file_stem().unwrap().to_string_lossy(), cfg.weight.gamma, mins[0], mins[1], mins[2]);
        let e = worst.entry(format!("{}", cfg.weight.gamma)).or_insert(0.0);
        *e = e.max(needed);
    }
    for (g, c) in worst {
        println!("gamma {g}: largest minimum {c:.6e}, frozen {:.6e}", 2.0 * c);
    }
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let d = std::env::temp_dir().join("wlry-calibration");
    std::fs::create_dir_all(&d)?;
    Ok(d)
}

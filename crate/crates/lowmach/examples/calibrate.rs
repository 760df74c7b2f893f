//! Regenerate the frozen calibration asset on the reference grid.
//!
//! Prints the asset JSON to stdout and the full measurement traces
//! (heat-rate fits, regime/projection ladders, smallness bisection) to
//! stderr, so freezing is a redirect:
//!
//!     cargo run --release --example calibrate > crates/lowmach/assets/calibration.json

use lowmach::calib::{calibrate_semigroup, calibrate_smallness, Calibration};
use lowmach::grid::Grid;
use lowmach::paley::DyadicFilterBank;
use lowmach::params::PhysicalParams;

fn main() -> lowmach::error::Result<()> {
    let n = 32;
    let seed = 4;
    let params = PhysicalParams::default();
    let mu0 = params.mu0();

    let grid = Grid::new(n, 2.0 * std::f64::consts::PI)?;
    let bank = DyadicFilterBank::new(&grid);

    eprintln!("semigroup constants on {n}^3, mu0 = {mu0} ...");
    let sg = calibrate_semigroup(&bank, mu0, seed)?;
    for &(j, rate) in &sg.heat_rates {
        eprintln!("  block rate j={j}: {rate:.4} * 4^j");
    }
    eprintln!("  regime ladder (eps 2^j, envelope ratio):");
    for &(x, r) in &sg.regime_ladder {
        eprintln!("    {x:.2}  {r:.4}");
    }
    eprintln!("  projection ladder (eps 2^j, constant):");
    for &(x, r) in &sg.projection_ladder {
        eprintln!("    {x:.2}  {r:.4}");
    }
    eprintln!("  high-regime ratio: {:.4}", sg.high_regime_ratio);

    eprintln!("stationary smallness ...");
    let sm = calibrate_smallness(&bank, &params, &[1.0, 0.25, 0.03125], seed, 10)?;
    for &(eps, thr) in &sm.thresholds {
        eprintln!("  eps = {eps}: contraction fails at amplitude {thr:.5}");
    }

    let cal = Calibration {
        version: 1,
        n,
        seed,
        mu0,
        semigroup: sg.calibration,
        delta0: sm.delta0,
    };
    println!("{}", serde_json::to_string_pretty(&cal)?);
    Ok(())
}

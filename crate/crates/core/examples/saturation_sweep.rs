//! Compares the two reward providers over ten seeds.
//!
//! Extra arguments are `key=value` training overrides, e.g.
//! `cargo run --example saturation_sweep -- steps=200 learning_rate=8`.

use gqm_core::analysis::moving_average;
use gqm_core::policy_opt::{run_simulation, Provider, TrainConfig, TrainCurve};

const WINDOW: usize = 30;
const TAIL: usize = 50;

fn main() -> gqm_core::Result<()> {
    let mut base = TrainConfig::default();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').unwrap_or((&arg, ""));
        base.set(k, v)?;
    }
    println!("seed  sqm_vanished_min  gqm_vanished_max  gqm_quality  sqm_quality");
    for seed in 0..10u64 {
        let cfg = TrainConfig { seed, ..base.clone() };
        let gqm = run_simulation(&cfg, Provider::Gqm)?;
        let sqm = run_simulation(&cfg, Provider::SaturatingSqm)?;
        let tail = gqm.len().min(TAIL);
        let gv = moving_average(&gqm.column(|p| p.vanished_fraction), WINDOW)?;
        let sv = moving_average(&sqm.column(|p| p.vanished_fraction), WINDOW)?;
        let s_min = sv[sv.len() - tail..].iter().copied().fold(f64::INFINITY, f64::min);
        let g_max = gv[gv.len() - tail..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let last = |c: &TrainCurve| c.points.last().map_or(f64::NAN, |p| p.task_quality);
        println!("{seed:>4}  {s_min:>16.3}  {g_max:>16.3}  {:>11.3}  {:>11.3}", last(&gqm), last(&sqm));
    }
    Ok(())
}

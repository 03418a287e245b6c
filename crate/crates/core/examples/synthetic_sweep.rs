//! C sweep over a synthetic imbalanced corpus, printing per-c means.
//!
//! cargo run --release --example synthetic_sweep -- [overlap] [seeds]

use carol::data::{gen_synthetic, SynthSpec};
use carol::pipeline::{sweep_c_on, DataSource, RunConfig};

fn main() -> carol::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let overlap: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let n_seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let cfg = RunConfig::default();
    let spec = SynthSpec {
        n_minority: 150,
        imbalance_ratio: 9.0,
        overlap,
        ..SynthSpec::default()
    };
    let ds = gen_synthetic(&spec, cfg.feat_dim)?;
    let seeds: Vec<u64> = (1..=n_seeds).collect();
    let started = std::time::Instant::now();
    let table = sweep_c_on(&cfg, &[0.0, 0.5, 1.0], &seeds, 4, &DataSource::Split(ds))?;
    for cell in &table.cells {
        println!(
            "c={} seed={} f1={:.3} si={:.3} kdn={:.3} carol={:.4} recon={:.4} {}",
            cell.c, cell.seed, cell.f1, cell.si, cell.kdn, cell.final_carol, cell.final_recon, cell.error
        );
    }
    for m in &table.means {
        println!(
            "mean c={} f1={:.4} si={:.4} kdn={:.4} carol={:.4} recon={:.4}",
            m.c, m.f1, m.si, m.kdn, m.final_carol, m.final_recon
        );
    }
    println!("best_c={:?} elapsed={:.1}s", table.best_c, started.elapsed().as_secs_f64());
    Ok(())
}

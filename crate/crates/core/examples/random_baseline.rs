// Chance-level baseline: real demographic marginals, uniform items.
//
// cargo run --example random_baseline

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use kgsynth::generation::random_baseline;
use kgsynth::privacy::DEFAULT_QI;
use kgsynth::{fidelity_report, load_table, privacy_report, DisorderSchema};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = Arc::new(DisorderSchema::load(data.join("demo_schema.json"))?);
    let real = load_table(data.join("demo_real.csv"), Arc::clone(&schema))?;

    let baseline = random_baseline(&real, 3)?;
    let syn = load_table(data.join("demo_syn.csv"), Arc::clone(&schema))?;
    for (name, table) in [("random", &baseline), ("synthetic", &syn)] {
        let f = fidelity_report(&real, table)?;
        let p = privacy_report(table, &real, &DEFAULT_QI)?;
        println!(
            "{name:<10} mean JSD {:.4}  MAE_V {:.4}  ED^2 {:.4}  EO {:.4}",
            f.mean_jsd, f.mae_v_error, f.energy_distance_sq, p.exact_overlap
        );
    }
    assert_eq!(baseline.n_rows(), real.n_rows());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example failed");
}

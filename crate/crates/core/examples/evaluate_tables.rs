// Fidelity and privacy of a synthetic table against a real one.
//
// cargo run --example evaluate_tables

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use kgsynth::privacy::DEFAULT_QI;
use kgsynth::{fidelity_report, load_table, privacy_report, DisorderSchema};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = Arc::new(DisorderSchema::load(data.join("demo_schema.json"))?);
    let real = load_table(data.join("demo_real.csv"), Arc::clone(&schema))?;
    let syn = load_table(data.join("demo_syn.csv"), Arc::clone(&schema))?;

    let fidelity = fidelity_report(&real, &syn)?;
    println!("mean JSD      {:.4}", fidelity.mean_jsd);
    for (column, value) in &fidelity.per_column_jsd {
        println!("  {column:<6} {value:.4}");
    }
    println!("MAE_V error   {:.4}", fidelity.mae_v_error);
    println!("ED^2          {:.4}", fidelity.energy_distance_sq);

    let privacy = privacy_report(&syn, &real, &DEFAULT_QI)?;
    println!("exact overlap {:.4}", privacy.exact_overlap);
    println!("NN q05        {:.4} ({} edits)", privacy.nn_q05_normalized, privacy.nn_q05_hamming);
    println!("share <= 1    {:.4}", privacy.near_match_share_le1);
    println!("k-map risk    {:.4}", privacy.k_map_risk_avg);

    // a table compared with itself is a perfect, fully disclosive match
    let own = fidelity_report(&real, &real)?;
    assert_eq!(own.mean_jsd, 0.0);
    assert_eq!(privacy_report(&real, &real, &DEFAULT_QI)?.exact_overlap, 1.0);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example failed");
}

// Building the BM25 knowledge index and retrieving per knowledge mode.
//
// cargo run --example knowledge_retrieval

use std::error::Error;
use std::path::Path;

use kgsynth::generation::{build_kb, load_kb_manifest, retrieve, KbMode};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/kb/manifest.json");
    let index = build_kb(&load_kb_manifest(manifest)?)?;
    println!("{} chunks indexed", index.len());

    let query = "panic_demo Felt moments of sudden terror, fear, or fright";
    for mode in KbMode::ALL {
        let hits = retrieve(Some(&index), query, 3, mode)?;
        println!("{mode}:");
        for s in &hits {
            let preview: String = s.text.chars().take(60).collect();
            println!("  {:<10} {:.3}  {preview}...", s.id(), s.score);
        }
        if mode == KbMode::NoKb {
            assert!(hits.is_empty());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example failed");
}

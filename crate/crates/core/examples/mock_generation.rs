// Persona-conditioned, knowledge-grounded generation with a scripted mock
// backend. Swap in `HttpBackend::new(BackendConfig::new(url, model))` to
// talk to a chat-completions server (API key from `KGSYNTH_API_KEY`).
//
// cargo run --example mock_generation

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use kgsynth::generation::{
    build_kb, generate_dataset, load_kb_manifest, GenerationConfig, KbMode, MockBackend, PersonaConfig,
};
use kgsynth::DisorderSchema;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = Arc::new(DisorderSchema::load(data.join("demo_schema.json"))?);
    let index = build_kb(&load_kb_manifest(data.join("kb/manifest.json"))?)?;

    // the severity mock answers minimal/mild/moderate/severe personas with 0/1/2/3
    let config = GenerationConfig::new(KbMode::DualKb);
    let personas = PersonaConfig::uniform(&schema);
    let dataset = generate_dataset(8, &schema, &MockBackend::Severity, Some(&index), &config, &personas, 7)?;

    print!("{}", dataset.table.to_csv_string());
    for p in &dataset.log.patients {
        let snippets = p.items.first().map(|i| i.snippet_ids.join(" ")).unwrap_or_default();
        println!(
            "patient {}: {} {} {:<8} first-item snippets: {snippets}",
            p.patient_index, p.persona.sex, p.persona.age, p.persona.severity_prior
        );
    }
    assert_eq!(dataset.shortfall(), 0);
    assert_eq!(index.retrieve_calls(), 8 * schema.n_items());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("example failed");
}

//! Rebuild `src/channel/presets.json` from the measured rows.
//!
//! cargo run -p mimicguard-core --example regen_presets

use std::path::Path;

use mimicguard_core::channel::{build_catalog, catalog_json};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = build_catalog()?;
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("src/channel/presets.json");
    std::fs::write(&path, catalog_json(&catalog))?;
    for e in &catalog {
        println!("{:<26} alpha={:<12.5} beta={:<12.5} {}", e.id, e.alpha, e.beta, e.provenance.as_str());
    }
    println!("wrote {}", path.display());
    Ok(())
}

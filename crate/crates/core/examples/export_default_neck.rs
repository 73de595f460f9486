//! Regenerates `data/default_neck.json` from the authored design.

use palpation_core::phantom::default_neck;

fn main() -> std::io::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/default_neck.json").to_string());
    std::fs::write(&path, default_neck().to_json())?;
    eprintln!("wrote {path}");
    Ok(())
}

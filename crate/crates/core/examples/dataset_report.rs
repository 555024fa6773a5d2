//! Class registry, reference counts and manifest validation.
//!
//!     cargo run --example dataset_report -- [manifest.csv]

use kwskit::dataset::{load_manifest, speaker_disjointness, validate_counts, Manifest, Split, CLASSES};

fn main() -> kwskit::Result<()> {
    let manifest = match std::env::args().nth(1) {
        Some(p) => load_manifest(p)?,
        None => Manifest::from_reference(),
    };
    println!("{:<12} {:<14} {:>6} {:>5} {:>4}", "class", "ipa", "train", "test", "css");
    for c in &CLASSES {
        let train = c.train.map_or("-".to_string(), |n| n.to_string());
        println!("{:<12} {:<14} {:>6} {:>5} {:>4}", c.name, c.ipa, train, c.test, c.css);
    }
    let report = validate_counts(&manifest);
    for split in Split::ALL {
        let s = report.split(split);
        println!("{}: {} rows, delta {:+}", split.as_str(), s.total, s.delta);
    }
    println!("{}", serde_json::to_string(&speaker_disjointness(&manifest))?);
    Ok(())
}

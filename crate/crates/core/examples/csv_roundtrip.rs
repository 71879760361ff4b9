//! Writes a synthetic dataset as the three feature CSV files, reads them
//! back and shows the stratified split.

use mmle::data::{load_feature_csv, split, synth_generate, write_feature_csv, SynthSpec};
use mmle::Result;

fn main() -> Result<()> {
    let spec = SynthSpec::simplex(3, 4, 3, 2.0, 2.0, 0.5, 20);
    let data = synth_generate(&spec, 42)?;

    let dir = std::env::temp_dir().join("mmle_csv_example");
    std::fs::create_dir_all(&dir).map_err(|e| mmle::Error::io(&dir, e))?;
    let (px, py, pl) = (dir.join("x.csv"), dir.join("y.csv"), dir.join("labels.csv"));
    write_feature_csv(&data, &px, &py, &pl)?;
    let text = std::fs::read_to_string(&px).map_err(|e| mmle::Error::io(&px, e))?;
    for line in text.lines().take(3) {
        println!("{line}");
    }

    let loaded = load_feature_csv(&px, &py, &pl, Some(3))?;
    println!(
        "read back {} samples, identical: {}",
        loaded.len(),
        loaded == data
    );

    let (train, val, test) = split(&loaded, (0.7, 0.15, 0.15), 0)?;
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        println!(
            "{name:<5} {:>3} samples, per class {:?}",
            part.len(),
            part.class_counts()
        );
    }

    let labels = std::fs::read_to_string(&pl).map_err(|e| mmle::Error::io(&pl, e))?;
    let broken = labels.replacen("s000001,0", "s000001,7", 1);
    std::fs::write(&pl, broken).map_err(|e| mmle::Error::io(&pl, e))?;
    match load_feature_csv(&px, &py, &pl, Some(3)) {
        Ok(_) => println!("unexpectedly accepted a bad label file"),
        Err(e) => println!("bad label file rejected: {}: {e}", e.kind()),
    }
    Ok(())
}

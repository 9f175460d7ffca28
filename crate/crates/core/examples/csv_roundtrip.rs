//! Export a dataset to CSV with its schema sidecar, then read it back.

use cegan::datagen::{export_csv, generate_twins_like, ingest_csv, read_sidecar, sidecar_path, TwinsLikeConfig};

fn main() -> cegan::Result<()> {
    let dir = std::env::temp_dir().join("cegan-csv-example");
    std::fs::create_dir_all(&dir).map_err(|e| cegan::Error::io(&dir, e))?;
    let path = dir.join("twins.csv");

    let data = generate_twins_like(&TwinsLikeConfig { n: 200, seed: 5, ..Default::default() })?;
    export_csv(&data, &path)?;
    let sidecar = read_sidecar(&sidecar_path(&path))?;
    let back = ingest_csv(&path, &sidecar)?;

    println!("wrote {} and {}", path.display(), sidecar_path(&path).display());
    println!("columns: {}", sidecar.header().join(","));
    println!("rows match: {}", back.x() == data.x() && back.t() == data.t() && back.y() == data.y());
    Ok(())
}

//! `object_id,dim_0,...` files. Values use the shortest representation that
//! parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

pub fn format_embedding(vectors: &Array2<f64>) -> String {
    let mut out = String::with_capacity(vectors.len() * 20);
    out.push_str("object_id");
    for j in 0..vectors.ncols() {
        let _ = write!(out, ",dim_{j}");
    }
    out.push('\n');
    for (i, row) in vectors.rows().into_iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_embedding(path: &Path, vectors: &Array2<f64>) -> Result<()> {
    std::fs::write(path, format_embedding(vectors))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn parse_embedding<R: std::io::Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("object_id") {
        bail!("embedding header must start with `object_id`");
    }
    let width = header.len() - 1;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width + 1 {
            bail!(
                "row {}: expected {} fields, found {}",
                i + 1,
                width + 1,
                rec.len()
            );
        }
        for field in rec.iter().skip(1) {
            data.push(
                field
                    .parse::<f64>()
                    .with_context(|| format!("row {}: `{field}` is not a number", i + 1))?,
            );
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, width), data)?)
}

pub fn read_embedding(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_embedding(file).with_context(|| format!("reading {}", path.display()))
}

//! Regenerates the data of one figure preset, `fig8` unless another tag is given.

use std::path::PathBuf;

use dqd_demon::cli::{reproduce_figure, FIGURE_TAGS};

fn main() -> dqd_demon::Result<()> {
    let tag = std::env::args().nth(1).unwrap_or_else(|| "fig8".into());
    let out = std::env::temp_dir().join("dqd-demon-figures");
    println!("presets: {}", FIGURE_TAGS.join(" "));
    let files: Vec<PathBuf> = reproduce_figure(&tag, &out)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

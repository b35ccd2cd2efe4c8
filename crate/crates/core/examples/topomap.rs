//! Project the montage, triangulate it and render one window's band maps.
//!
//!     cargo run --example topomap -- --png-dir /tmp/maps

use std::path::PathBuf;

use clap::Parser;
use neurorate::cli::plot::{band_image, save_gray};
use neurorate::signal::synth::mixture_trial;
use neurorate::signal::{synthesize, MixtureConfig, Montage};
use neurorate::spectral::BandScheme;
use neurorate::topomap::{project, triangulate, TopoProjector};
use neurorate::windowing::{segment, WindowConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long)]
    png_dir: Option<PathBuf>,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let montage = Montage::standard_32();
    let layout = project(&montage)?;
    let tri = triangulate(&layout)?;
    println!(
        "{} electrodes, {} triangles, worst empty-circle violation {:.1e}",
        layout.len(),
        tri.len(),
        tri.max_circumcircle_violation()
    );

    let bands = BandScheme::standard();
    let mix = MixtureConfig {
        duration: 4.0,
        ..MixtureConfig::default()
    };
    let rec = synthesize(&mixture_trial(&mix, &bands, &montage, 1, 1, 0))?;
    let windows = WindowConfig::default();
    let projector = TopoProjector::new(&montage, rec.channel_names(), bands.clone(), args.grid, windows.width(128.0)?, 128.0)?;
    let map = projector.tensor(&segment(&rec, &windows)?[0])?;

    // coarse text rendering of the alpha band
    let alpha = map.data.index_axis(ndarray::Axis(2), 2);
    let max = alpha.iter().cloned().fold(f32::MIN, f32::max);
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for row in alpha.rows().into_iter().step_by(2) {
        let line: String = row.iter().map(|&v| shades[((v / max).clamp(0.0, 1.0) * 9.0).round() as usize]).collect();
        println!("{line}");
    }

    if let Some(dir) = args.png_dir {
        std::fs::create_dir_all(&dir)?;
        for (b, band) in bands.bands().iter().enumerate() {
            let path = dir.join(format!("{}.png", band.name));
            save_gray(&band_image(&map, b, 8), &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

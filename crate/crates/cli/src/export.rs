//! Binary PGM (P5) export of weight tiles.

use std::io::Write;
use std::path::Path;

/// Lays out `tiles` (each `h x w`, row major) on a grid with `cols` columns
/// and a one-pixel gap, each tile min-max scaled to 0..=255 on its own.
pub fn tile_grid(tiles: &[&[f64]], h: usize, w: usize, cols: usize) -> (Vec<u8>, usize, usize) {
    let cols = cols.max(1).min(tiles.len().max(1));
    let rows = tiles.len().div_ceil(cols).max(1);
    let (gw, gh) = (cols * (w + 1) - 1, rows * (h + 1) - 1);
    let mut pixels = vec![0u8; gw * gh];
    for (t, tile) in tiles.iter().enumerate() {
        let lo = tile.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (oy, ox) = ((t / cols) * (h + 1), (t % cols) * (w + 1));
        for y in 0..h {
            for x in 0..w {
                let v = (tile[y * w + x] - lo) / span;
                pixels[(oy + y) * gw + ox + x] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    (pixels, gw, gh)
}

pub fn write_pgm(path: &Path, pixels: &[u8], width: usize, height: usize) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    f.flush()
}

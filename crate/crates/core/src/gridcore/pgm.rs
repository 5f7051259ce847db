use std::io::Write;

use super::grid::ScalarMap;
use crate::error::Result;
use crate::scalar::Scalar;

/// Min-max normalizes finite values to 0..=255, top row first. Values at or
/// above `T::max_value()` (the unreachable marker) render as 255 and are
/// excluded from the range.
pub fn normalize_to_bytes<T: Scalar>(map: &ScalarMap<T>) -> Vec<u8> {
    let is_marker = |v: T| !v.is_finite() || v >= T::max_value();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in map.values() {
        if !is_marker(v) {
            lo = lo.min(v.as_f64());
            hi = hi.max(v.as_f64());
        }
    }
    let span = hi - lo;
    let mut out = Vec::with_capacity(map.values().len());
    for row in (0..map.height()).rev() {
        for col in 0..map.width() {
            let v = map.values()[row * map.width() + col];
            let byte = if is_marker(v) {
                255
            } else if span > 0.0 {
                (((v.as_f64() - lo) / span) * 255.0).round() as u8
            } else {
                0
            };
            out.push(byte);
        }
    }
    out
}

/// Binary graymap (P5).
pub fn write_pgm<T: Scalar, W: Write>(map: &ScalarMap<T>, mut w: W) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", map.width(), map.height())?;
    w.write_all(&normalize_to_bytes(map))?;
    Ok(())
}

/// Binary pixmap (P6) from rows of RGB triples given top row first.
pub fn write_ppm<W: Write>(width: usize, height: usize, rgb_top_down: &[[u8; 3]], mut w: W) -> Result<()> {
    assert_eq!(rgb_top_down.len(), width * height);
    write!(w, "P6\n{width} {height}\n255\n")?;
    for px in rgb_top_down {
        w.write_all(px)?;
    }
    Ok(())
}

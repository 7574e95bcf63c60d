//! PNG I/O. Maps are single-channel 8-bit images whose pixel value is the
//! class id; images are 8-bit RGB.

use std::io::Cursor;
use std::path::Path;

use crate::semmap::{LabelPalette, SemanticMap};
use crate::{Error, Result};

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
    }
    Ok(buf)
}

pub fn encode_map_png(map: &SemanticMap) -> Result<Vec<u8>> {
    encode(map.width(), map.height(), png::ColorType::Grayscale, map.labels())
}

pub fn encode_rgb_png(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    if rgb.len() != width * height * 3 {
        return Err(Error::Contract(format!("{} bytes for a {width}x{height} RGB image", rgb.len())));
    }
    encode(width, height, png::ColorType::Rgb, rgb)
}

pub fn decode_map_png(bytes: &[u8]) -> Result<SemanticMap> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Contract(format!(
            "semantic map PNG must be 8-bit grayscale, got {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    SemanticMap::new(info.width as usize, info.height as usize, buf)
}

pub fn write_map_png(path: &Path, map: &SemanticMap) -> Result<()> {
    std::fs::write(path, encode_map_png(map)?).map_err(|e| Error::path(path, e))
}

pub fn read_map_png(path: &Path) -> Result<SemanticMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::path(path, e))?;
    decode_map_png(&bytes)
}

/// Palette lookup for visualization; unknown ids render black.
pub fn colorize(map: &SemanticMap, palette: &LabelPalette) -> Vec<u8> {
    map.labels().iter().flat_map(|&l| palette.color(u32::from(l)).unwrap_or([0, 0, 0])).collect()
}

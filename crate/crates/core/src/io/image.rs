//! Frame output.

use std::io::Write;
use std::path::Path;

use crate::error::Error;
use crate::render::Frame;

/// Encodes RGBA8 pixels (top row first) as PNG.
pub fn encode_png(width: u32, height: u32, rgba: &[u8]) -> Result<Vec<u8>, Error> {
    if rgba.len() != width as usize * height as usize * 4 {
        return Err(Error::Image(format!(
            "{} bytes do not form a {width}x{height} RGBA image",
            rgba.len()
        )));
    }
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width, height);
    enc.set_color(png::ColorType::Rgba);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
    writer.write_image_data(rgba).map_err(|e| Error::Image(e.to_string()))?;
    writer.finish().map_err(|e| Error::Image(e.to_string()))?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), Error> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| Error::Image(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Image(e.to_string()))?;
    if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Image("expected an 8-bit RGBA image".into()));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

pub fn write_png(path: impl AsRef<Path>, frame: &Frame) -> Result<(), Error> {
    std::fs::write(path, encode_png(frame.width, frame.height, &frame.pixels)?)?;
    Ok(())
}

/// Headerless RGBA8 bytes.
pub fn write_raw(path: impl AsRef<Path>, frame: &Frame) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&frame.pixels)?;
    Ok(())
}

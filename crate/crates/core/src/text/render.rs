use std::fmt;
use std::str::FromStr;

use font8x8::{UnicodeFonts, BASIC_FONTS, LATIN_FONTS};
use serde::{Deserialize, Serialize};

use super::{advance, block_height, FontCatalog, TextError, SCREEN_HEIGHT, SCREEN_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const BLACK: Rgb = Rgb(0, 0, 0);
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const RED: Rgb = Rgb(220, 30, 30);
    pub const GREEN: Rgb = Rgb(30, 170, 60);
    pub const YELLOW: Rgb = Rgb(240, 200, 0);
    pub const GREY: Rgb = Rgb(128, 128, 128);

    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

impl FromStr for Rgb {
    type Err = TextError;

    /// A color name (`white`, `red`, ...) or `#rrggbb`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let named = match s {
            "black" => Some(Rgb::BLACK),
            "white" => Some(Rgb::WHITE),
            "red" => Some(Rgb::RED),
            "green" => Some(Rgb::GREEN),
            "yellow" => Some(Rgb::YELLOW),
            "grey" | "gray" => Some(Rgb::GREY),
            _ => None,
        };
        if let Some(c) = named {
            return Ok(c);
        }
        let bad = || TextError::BadColor(format!("'{s}' is neither a known name nor #rrggbb"));
        let hex = s.strip_prefix('#').filter(|h| h.len() == 6).ok_or_else(bad)?;
        let v = u32::from_str_radix(hex, 16).map_err(|_| bad())?;
        Ok(Rgb((v >> 16) as u8, (v >> 8) as u8, v as u8))
    }
}

/// Row-major RGB bitmap of rendered text, on a black background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedAsset {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub text: String,
    pub size: u32,
    pub color: Rgb,
}

impl RenderedAsset {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = ((y * self.width + x) * 3) as usize;
        Rgb(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Reads a P6 image back as (width, height, pixels).
pub fn parse_ppm(bytes: &[u8]) -> Option<(u32, u32, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    pos += 1;
    if fields[0] != "P6" || fields[3] != "255" {
        return None;
    }
    let w: u32 = fields[1].parse().ok()?;
    let h: u32 = fields[2].parse().ok()?;
    let body = bytes.get(pos..)?;
    (body.len() == (w * h * 3) as usize).then(|| (w, h, body.to_vec()))
}

fn glyph(c: char) -> Option<[u8; 8]> {
    if c == ' ' {
        return Some([0; 8]);
    }
    BASIC_FONTS.get(c).or_else(|| LATIN_FONTS.get(c))
}

fn check_glyphs<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<(), TextError> {
    let mut missing: Vec<char> = Vec::new();
    for c in lines.into_iter().flat_map(str::chars) {
        if glyph(c).is_none() && !missing.contains(&c) {
            missing.push(c);
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(TextError::UnsupportedGlyph(missing))
    }
}

/// Renders pre-broken lines. Each 8×8 glyph is stretched to an
/// `advance × size` cell by nearest-neighbour sampling.
pub fn render_lines(lines: &[String], size: u32, color: Rgb) -> Result<RenderedAsset, TextError> {
    if !FontCatalog::default().contains(size) {
        return Err(TextError::SizeNotInCatalog(size));
    }
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(TextError::EmptyText);
    }
    check_glyphs(lines.iter().map(String::as_str))?;

    let adv = advance(size);
    let cols = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as u32;
    let width = cols * adv;
    let height = block_height(lines.len() as u32, size);
    if width > SCREEN_WIDTH || height > SCREEN_HEIGHT {
        return Err(TextError::TooLarge(width, height));
    }

    let mut pixels = vec![0u8; (width * height * 3) as usize];
    for (row, line) in lines.iter().enumerate() {
        let top = row as u32 * (size + 2);
        for (col, c) in line.chars().enumerate() {
            let g = glyph(c).expect("checked above");
            let left = col as u32 * adv;
            for py in 0..size {
                let bits = g[(py * 8 / size) as usize];
                for px in 0..adv {
                    if bits & (1 << (px * 8 / adv)) != 0 {
                        let i = (((top + py) * width + left + px) * 3) as usize;
                        pixels[i..i + 3].copy_from_slice(&[color.0, color.1, color.2]);
                    }
                }
            }
        }
    }
    Ok(RenderedAsset {
        width,
        height,
        pixels,
        text: lines.join("\n"),
        size,
        color,
    })
}

/// Renders a single line of text.
pub fn render_text(text: &str, size: u32, color: Rgb) -> Result<RenderedAsset, TextError> {
    render_lines(&[text.to_string()], size, color)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = render_text("A", 10, Rgb::WHITE).unwrap();
        let b = render_text("A", 10, Rgb::WHITE).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width, a.height), (6, 10));
        assert!(a.pixels.contains(&255));
    }

    #[test]
    fn german_glyphs() {
        let a = render_text("ß", 14, Rgb::RED).unwrap();
        assert_eq!((a.width, a.height), (9, 14));
        assert!(a.pixels.chunks(3).any(|p| p == [220, 30, 30]));
        render_text("äöüÄÖÜ ABC xyz 0123456789", 10, Rgb::WHITE).unwrap();
    }

    #[test]
    fn unsupported() {
        assert_eq!(
            render_text("a∆b∆", 10, Rgb::WHITE),
            Err(TextError::UnsupportedGlyph(vec!['∆']))
        );
        assert_eq!(render_text("a", 12, Rgb::WHITE), Err(TextError::SizeNotInCatalog(12)));
        assert!(matches!(
            render_text(&"x".repeat(60), 10, Rgb::WHITE),
            Err(TextError::TooLarge(360, 10))
        ));
    }

    #[test]
    fn multi_line_layout() {
        let a = render_lines(&["ab".into(), "c".into()], 10, Rgb::GREEN).unwrap();
        assert_eq!((a.width, a.height), (12, 22));
        // nothing is drawn in the two-pixel line gap
        for y in 10..12 {
            for x in 0..a.width {
                assert_eq!(a.pixel(x, y), Rgb::BLACK);
            }
        }
    }

    #[test]
    fn ppm_roundtrip() {
        let a = render_text("Hallo", 18, Rgb::WHITE).unwrap();
        let ppm = a.to_ppm();
        assert!(ppm.starts_with(b"P6\n55 18\n255\n"));
        assert_eq!(parse_ppm(&ppm), Some((a.width, a.height, a.pixels.clone())));
        assert_eq!(parse_ppm(b"P3\n1 1\n255\n"), None);
    }

    #[test]
    fn colors() {
        assert_eq!("red".parse::<Rgb>().unwrap(), Rgb::RED);
        assert_eq!("#0a0B0c".parse::<Rgb>().unwrap(), Rgb(10, 11, 12));
        assert!("#12345".parse::<Rgb>().is_err());
        assert!("purple".parse::<Rgb>().is_err());
        assert_eq!(Rgb(1, 2, 255).to_string(), "#0102ff");
    }
}

//! Font-size fitting and bitmap text rendering for the 320×240 panel.
//!
//! Glyph metrics follow a monospace model: every character advances
//! `ceil(0.6 · size)` pixels and a line occupies `size + 2` pixels, with no
//! spacing after the last line. That makes every fit decision exactly
//! computable from character counts.

mod pack;
mod render;

use serde::{Deserialize, Serialize};

pub use pack::{generate_asset_pack, Category, ManifestRow, PackReport, Palette};
pub use render::{parse_ppm, render_lines, render_text, RenderedAsset, Rgb};

pub const SCREEN_WIDTH: u32 = 320;
pub const SCREEN_HEIGHT: u32 = 240;

/// The panel's native font size, always present in a catalog.
pub const BASE_SIZE: u32 = 10;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("text is empty")]
    EmptyText,
    #[error("text of {chars} characters does not fit a {width}x{height} box even at the smallest size")]
    DoesNotFit { chars: usize, width: u32, height: u32 },
    #[error("unsupported glyphs: {}", fmt_code_points(.0))]
    UnsupportedGlyph(Vec<char>),
    #[error("box {0}x{1} must be positive and at most 320x240")]
    BadBox(u32, u32),
    #[error("font catalog: {0}")]
    BadCatalog(String),
    #[error("size {0} is not in the font catalog")]
    SizeNotInCatalog(u32),
    #[error("rendered text {0}x{1} exceeds the 320x240 screen")]
    TooLarge(u32, u32),
    #[error("color: {0}")]
    BadColor(String),
    #[error("{0}")]
    Io(String),
}

fn fmt_code_points(chars: &[char]) -> String {
    chars
        .iter()
        .map(|c| format!("U+{:04X}", u32::from(*c)))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FontCatalog {
    sizes: Vec<u32>,
}

impl FontCatalog {
    pub fn new(sizes: Vec<u32>) -> Result<Self, TextError> {
        if !sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(TextError::BadCatalog("sizes must be strictly increasing".into()));
        }
        if !sizes.contains(&BASE_SIZE) {
            return Err(TextError::BadCatalog(format!("size {BASE_SIZE} must be present")));
        }
        if sizes.iter().any(|&s| s == 0 || s > SCREEN_HEIGHT) {
            return Err(TextError::BadCatalog("sizes must be in 1..=240".into()));
        }
        Ok(FontCatalog { sizes })
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn contains(&self, size: u32) -> bool {
        self.sizes.contains(&size)
    }

    pub fn smallest(&self) -> u32 {
        self.sizes[0]
    }
}

impl Default for FontCatalog {
    fn default() -> Self {
        FontCatalog {
            sizes: vec![10, 14, 18, 24],
        }
    }
}

/// Horizontal advance per character: `ceil(0.6 · size)`.
pub const fn advance(size: u32) -> u32 {
    (3 * size).div_ceil(5)
}

pub const fn line_height(size: u32) -> u32 {
    size + 2
}

/// Height of `lines` stacked lines at `size`.
pub const fn block_height(lines: u32, size: u32) -> u32 {
    if lines == 0 {
        0
    } else {
        lines * line_height(size) - 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextBox {
    pub width: u32,
    pub height: u32,
}

impl TextBox {
    pub fn new(width: u32, height: u32) -> Result<Self, TextError> {
        if width == 0 || height == 0 || width > SCREEN_WIDTH || height > SCREEN_HEIGHT {
            return Err(TextError::BadBox(width, height));
        }
        Ok(TextBox { width, height })
    }
}

/// A fit decision: the chosen size and the text split into lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fit {
    pub size: u32,
    pub lines: Vec<String>,
}

impl Fit {
    /// Pixel extent of the laid-out text.
    pub fn extent(&self) -> (u32, u32) {
        let widest = self.lines.iter().map(|l| l.chars().count()).max().unwrap_or(0);
        (
            widest as u32 * advance(self.size),
            block_height(self.lines.len() as u32, self.size),
        )
    }
}

/// Greedy word wrap to at most `cols` characters per line. Words longer
/// than a line are split across lines; runs of spaces collapse.
pub fn wrap_words(text: &str, cols: usize) -> Vec<String> {
    let mut lines = Vec::new();
    if cols == 0 {
        return lines;
    }
    for paragraph in text.split('\n') {
        let mut line = String::new();
        let mut len = 0;
        for word in paragraph.split_whitespace() {
            let mut chars: Vec<char> = word.chars().collect();
            if len > 0 && len + 1 + chars.len() <= cols {
                line.push(' ');
                line.extend(&chars);
                len += 1 + chars.len();
                continue;
            }
            if len > 0 {
                lines.push(std::mem::take(&mut line));
            }
            while chars.len() > cols {
                lines.push(chars.drain(..cols).collect());
            }
            len = chars.len();
            line = chars.into_iter().collect();
        }
        if len > 0 {
            lines.push(line);
        }
    }
    lines
}

/// Lays `text` out at one size, or `None` if it overflows the box.
pub fn layout_at(text: &str, size: u32, bbox: TextBox, wrap: bool) -> Option<Vec<String>> {
    if size > bbox.height {
        return None;
    }
    let cols = (bbox.width / advance(size)) as usize;
    if wrap {
        let lines = wrap_words(text, cols);
        let rows = (bbox.height + 2) / line_height(size);
        (!lines.is_empty() && lines.len() <= rows as usize).then_some(lines)
    } else {
        (text.chars().count() <= cols).then(|| vec![text.to_string()])
    }
}

/// Picks the largest catalog size at which `text` fits `bbox`.
pub fn fit_font_size(text: &str, bbox: TextBox, catalog: &FontCatalog, wrap: bool) -> Result<Fit, TextError> {
    if text.trim().is_empty() {
        return Err(TextError::EmptyText);
    }
    catalog
        .sizes()
        .iter()
        .rev()
        .find_map(|&size| layout_at(text, size, bbox, wrap).map(|lines| Fit { size, lines }))
        .ok_or(TextError::DoesNotFit {
            chars: text.chars().count(),
            width: bbox.width,
            height: bbox.height,
        })
}

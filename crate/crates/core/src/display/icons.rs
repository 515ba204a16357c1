//! Icons drawn from simple shapes at 32×32, shipped as PPM files with a
//! manifest. Clients scale them to the icon rect of a frame.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::text::{RenderedAsset, Rgb};

pub const ICON_SIZE: u32 = 32;

pub const ICON_NAMES: [&str; 14] = [
    "battery", "bell", "check", "cross", "gear", "heart", "list", "log", "menu", "search", "sex_f", "sex_m", "sex_x",
    "warning",
];

struct Canvas {
    px: Vec<u8>,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            px: vec![0; (ICON_SIZE * ICON_SIZE * 3) as usize],
        }
    }

    fn set(&mut self, x: i32, y: i32, c: Rgb) {
        let n = ICON_SIZE as i32;
        if (0..n).contains(&x) && (0..n).contains(&y) {
            let i = ((y * n + x) * 3) as usize;
            self.px[i..i + 3].copy_from_slice(&[c.0, c.1, c.2]);
        }
    }

    fn rect(&mut self, x: i32, y: i32, w: i32, h: i32, c: Rgb) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.set(xx, yy, c);
            }
        }
    }

    /// Filled disc, or a ring when `inner` > 0.
    fn disc(&mut self, cx: i32, cy: i32, r: i32, inner: i32, c: Rgb) {
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                let d = (x - cx).pow(2) + (y - cy).pow(2);
                if d <= r * r && d >= inner * inner {
                    self.set(x, y, c);
                }
            }
        }
    }

    fn line(&mut self, (x0, y0): (i32, i32), (x1, y1): (i32, i32), thick: i32, c: Rgb) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
        for i in 0..=steps {
            let x = x0 + (x1 - x0) * i / steps;
            let y = y0 + (y1 - y0) * i / steps;
            self.disc(x, y, thick, 0, c);
        }
    }
}

fn draw(name: &str) -> Option<Canvas> {
    let mut c = Canvas::new();
    let white = Rgb::WHITE;
    match name {
        "menu" => {
            for y in [8, 14, 20] {
                c.rect(6, y, 20, 3, white);
            }
        }
        "battery" => {
            c.rect(4, 10, 22, 12, white);
            c.rect(6, 12, 18, 8, Rgb::BLACK);
            c.rect(26, 14, 3, 4, white);
            c.rect(7, 13, 12, 6, Rgb::GREEN);
        }
        "heart" => {
            c.disc(11, 12, 6, 0, Rgb::RED);
            c.disc(21, 12, 6, 0, Rgb::RED);
            for y in 12..28 {
                let half = (28 - y) * 15 / 16;
                c.rect(16 - half, y, 2 * half + 1, 1, Rgb::RED);
            }
        }
        "cross" => {
            c.rect(12, 4, 8, 24, Rgb::RED);
            c.rect(4, 12, 24, 8, Rgb::RED);
        }
        "list" => {
            for y in [7, 14, 21] {
                c.rect(5, y, 3, 3, white);
                c.rect(11, y, 16, 3, white);
            }
        }
        "log" => {
            c.rect(7, 4, 18, 24, white);
            c.rect(9, 6, 14, 20, Rgb::BLACK);
            for y in [9, 14, 19] {
                c.rect(11, y, 10, 2, white);
            }
        }
        "search" => {
            c.disc(13, 13, 8, 6, white);
            c.line((19, 19), (27, 27), 1, white);
        }
        "bell" => {
            c.disc(16, 13, 8, 0, Rgb::YELLOW);
            c.rect(8, 13, 17, 10, Rgb::YELLOW);
            c.rect(5, 22, 23, 3, Rgb::YELLOW);
            c.disc(16, 27, 2, 0, Rgb::YELLOW);
        }
        "gear" => {
            for (dx, dy) in [(0, -11), (0, 11), (-11, 0), (11, 0), (-8, -8), (8, 8), (-8, 8), (8, -8)] {
                c.disc(16 + dx, 16 + dy, 3, 0, Rgb::GREY);
            }
            c.disc(16, 16, 10, 4, Rgb::GREY);
        }
        "warning" => {
            for y in 4..28 {
                let half = (y - 4) * 13 / 24;
                c.rect(16 - half, y, 2 * half + 1, 1, Rgb::YELLOW);
            }
            c.rect(15, 11, 3, 9, Rgb::BLACK);
            c.rect(15, 22, 3, 3, Rgb::BLACK);
        }
        "check" => {
            c.line((6, 17), (13, 24), 2, Rgb::GREEN);
            c.line((13, 24), (26, 9), 2, Rgb::GREEN);
        }
        "sex_m" => {
            c.disc(13, 19, 8, 6, white);
            c.line((18, 14), (26, 6), 1, white);
            c.rect(19, 5, 8, 2, white);
            c.rect(25, 5, 2, 8, white);
        }
        "sex_f" => {
            c.disc(16, 12, 8, 6, white);
            c.rect(15, 20, 3, 10, white);
            c.rect(11, 24, 11, 2, white);
        }
        "sex_x" => {
            c.disc(16, 16, 9, 7, white);
            c.line((10, 10), (22, 22), 1, white);
        }
        _ => return None,
    }
    Some(c)
}

/// The named icon as a 32×32 bitmap.
pub fn icon(name: &str) -> Option<RenderedAsset> {
    draw(name).map(|c| RenderedAsset {
        width: ICON_SIZE,
        height: ICON_SIZE,
        pixels: c.px,
        text: name.to_string(),
        size: ICON_SIZE,
        color: Rgb::WHITE,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconManifestRow {
    pub name: String,
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub sha256: String,
}

/// Writes every icon plus `manifest.jsonl` into `dir`.
pub fn write_icon_set(dir: &Path) -> std::io::Result<Vec<IconManifestRow>> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    let mut manifest = String::new();
    for name in ICON_NAMES {
        let bytes = icon(name).expect("listed icons exist").to_ppm();
        let row = IconManifestRow {
            name: name.to_string(),
            file: format!("{name}.ppm"),
            width: ICON_SIZE,
            height: ICON_SIZE,
            sha256: hex::encode(Sha256::digest(&bytes)),
        };
        fs::write(dir.join(&row.file), &bytes)?;
        manifest.push_str(&serde_json::to_string(&row).expect("rows serialize"));
        manifest.push('\n');
        rows.push(row);
    }
    fs::write(dir.join("manifest.jsonl"), manifest)?;
    Ok(rows)
}

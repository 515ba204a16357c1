use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{fit_font_size, render_lines, FontCatalog, Rgb, TextBox, TextError};

/// What a text is used for; each category has the label box it must fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Button,
    Title,
    Step,
    Tile,
    Info,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Button,
        Category::Title,
        Category::Step,
        Category::Tile,
        Category::Info,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Button => "button",
            Category::Title => "title",
            Category::Step => "step",
            Category::Tile => "tile",
            Category::Info => "info",
        }
    }

    /// Label box inside the owning screen element, 4 px padding included.
    pub fn text_box(self) -> TextBox {
        let (w, h) = match self {
            Category::Button => (97, 47),
            Category::Title => (102, 47),
            Category::Step => (312, 27),
            Category::Tile => (60, 26),
            Category::Info => (312, 177),
        };
        TextBox { width: w, height: h }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown category '{s}'"))
    }
}

/// Named colors to render every corpus line in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(pub Vec<(String, Rgb)>);

impl FromStr for Palette {
    type Err = TextError;

    /// Comma-separated names or `#rrggbb` values.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let entries = s
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(|c| c.parse::<Rgb>().map(|rgb| (c.to_string(), rgb)))
            .collect::<Result<Vec<_>, _>>()?;
        if entries.is_empty() {
            return Err(TextError::BadColor("palette is empty".into()));
        }
        Ok(Palette(entries))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    /// Corpus line number, 1-based.
    pub line: usize,
    pub text: String,
    pub category: Category,
    pub color: String,
    pub file: Option<String>,
    pub size: Option<u32>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackReport {
    pub rows: Vec<ManifestRow>,
    /// Files created by this run; zero when re-run on the same inputs.
    pub written: usize,
}

impl PackReport {
    pub fn failures(&self) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

fn io(e: std::io::Error) -> TextError {
    TextError::Io(e.to_string())
}

/// Renders every corpus line in every palette color into `out_dir`.
///
/// A corpus line is `category<TAB>text`, or just `text` for a treatment
/// step. Blank lines and lines starting with `#` are skipped. Files are
/// named after a hash of their bytes, so re-running writes nothing new.
/// Lines that fail are recorded in the manifest and do not stop the run.
pub fn generate_asset_pack(corpus: &str, palette: &Palette, out_dir: &Path) -> Result<PackReport, TextError> {
    fs::create_dir_all(out_dir).map_err(io)?;
    let catalog = FontCatalog::default();
    let mut rows = Vec::new();
    let mut written = 0;

    for (i, raw) in corpus.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (category, text) = match raw.split_once('\t') {
            Some((c, t)) => match c.trim().parse::<Category>() {
                Ok(c) => (Ok(c), t.trim()),
                Err(e) => (Err(e), t.trim()),
            },
            None => (Ok(Category::Step), trimmed),
        };
        for (name, rgb) in &palette.0 {
            let mut row = ManifestRow {
                line: i + 1,
                text: text.to_string(),
                category: *category.as_ref().unwrap_or(&Category::Step),
                color: name.clone(),
                file: None,
                size: None,
                error: None,
            };
            let rendered = category
                .clone()
                .map_err(TextError::Io)
                .and_then(|c| fit_font_size(text, c.text_box(), &catalog, true))
                .and_then(|fit| render_lines(&fit.lines, fit.size, *rgb));
            match rendered {
                Ok(asset) => {
                    let bytes = asset.to_ppm();
                    let file = format!("{}.ppm", &hex::encode(Sha256::digest(&bytes))[..16]);
                    let path = out_dir.join(&file);
                    if !path.exists() {
                        fs::write(&path, &bytes).map_err(io)?;
                        written += 1;
                    }
                    row.file = Some(file);
                    row.size = Some(asset.size);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }

    let mut manifest = String::new();
    for r in &rows {
        manifest.push_str(&serde_json::to_string(r).expect("manifest rows serialize"));
        manifest.push('\n');
    }
    fs::write(out_dir.join("manifest.jsonl"), manifest).map_err(io)?;
    Ok(PackReport { rows, written })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        let palette: Palette = "white,red".parse().unwrap();
        let corpus = "Patient ansprechen\nbutton\tZurück\ntitle\tBewusstlose Person\n";
        let first = generate_asset_pack(corpus, &palette, dir.path()).unwrap();
        assert_eq!(first.rows.len(), 6);
        assert_eq!(first.written, 6);
        assert_eq!(first.failures().count(), 0);
        let manifest = fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(manifest.lines().count(), 6);

        let again = generate_asset_pack(corpus, &palette, dir.path()).unwrap();
        assert_eq!(again.written, 0);
        assert_eq!(again.rows, first.rows);
    }

    #[test]
    fn bad_lines_are_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let palette: Palette = "white".parse().unwrap();
        let corpus = "ok\nDreieck ∆\nbogus\tx\n# comment\n\nauch ok";
        let r = generate_asset_pack(corpus, &palette, dir.path()).unwrap();
        let flagged: Vec<usize> = r.failures().map(|r| r.line).collect();
        assert_eq!(flagged, [2, 3]);
        assert!(r.rows[1].error.as_deref().unwrap().contains("U+2206"));
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.written, 2);
    }

    #[test]
    fn category_boxes_fit_screen() {
        for c in Category::ALL {
            let b = c.text_box();
            assert!(TextBox::new(b.width, b.height).is_ok());
            assert_eq!(c.name().parse::<Category>().unwrap(), c);
        }
        assert!("".parse::<Palette>().is_err());
    }
}

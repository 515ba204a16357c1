use std::collections::BTreeSet;
use std::fmt;

use sha2::{Digest, Sha256};

use super::compose::layout::{MIN_ICON_W, SIDE_SLOTS, TILE};
use super::{ButtonSpec, Element, FrameState, IconRef, Label, Rect, ScreenId};
use crate::text::{advance, block_height, FontCatalog};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryViolation {
    OffScreen { id: String, rect: Rect },
    SideButton { id: String, rect: Rect },
    TooManySideButtons(usize),
    TileWidth { id: String, width: u32 },
    NarrowIcon { id: String, width: u32 },
    Overlap { a: String, b: String },
    Header { screen: ScreenId, present: bool },
    LabelOverflow { id: String },
    DuplicateId(String),
    OutsideModal { id: String },
}

impl fmt::Display for GeometryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryViolation::OffScreen { id, rect } => write!(f, "{id}: {rect:?} leaves the screen"),
            GeometryViolation::SideButton { id, rect } => {
                write!(f, "{id}: side button {rect:?} is not a 105x55 side slot")
            }
            GeometryViolation::TooManySideButtons(n) => write!(f, "{n} side buttons, at most 4 allowed"),
            GeometryViolation::TileWidth { id, width } => write!(f, "{id}: menu tile {width} px wide, expected 64"),
            GeometryViolation::NarrowIcon { id, width } => write!(f, "{id}: icon {width} px wide, minimum 23"),
            GeometryViolation::Overlap { a, b } => write!(f, "{a} overlaps {b}"),
            GeometryViolation::Header { screen, present } => {
                write!(
                    f,
                    "{screen}: header {}",
                    if *present { "must be absent" } else { "missing" }
                )
            }
            GeometryViolation::LabelOverflow { id } => write!(f, "{id}: label does not fit its box"),
            GeometryViolation::DuplicateId(id) => write!(f, "button id {id} used twice"),
            GeometryViolation::OutsideModal { id } => write!(f, "{id}: modal button outside the modal"),
        }
    }
}

fn label_fits(l: &Label, owner: Option<&Rect>) -> bool {
    let cols = l.lines.iter().map(|s| s.chars().count()).max().unwrap_or(0) as u32;
    let w = cols * advance(l.size);
    let h = block_height(l.lines.len() as u32, l.size);
    let inside_owner = owner.is_none_or(|o| o.encloses(&l.rect));
    !l.lines.is_empty()
        && FontCatalog::default().contains(l.size)
        && w <= l.rect.w
        && h <= l.rect.h
        && l.rect.on_screen()
        && inside_owner
}

fn check_icon(id: &str, icon: &IconRef, out: &mut Vec<GeometryViolation>) {
    if icon.rect.w < MIN_ICON_W {
        out.push(GeometryViolation::NarrowIcon {
            id: id.to_string(),
            width: icon.rect.w,
        });
    }
    if !icon.rect.on_screen() {
        out.push(GeometryViolation::OffScreen {
            id: id.to_string(),
            rect: icon.rect,
        });
    }
}

fn check_button(b: &ButtonSpec, out: &mut Vec<GeometryViolation>) {
    if !b.rect.on_screen() {
        out.push(GeometryViolation::OffScreen {
            id: b.id.clone(),
            rect: b.rect,
        });
    }
    if let Some(l) = &b.label {
        if !label_fits(l, Some(&b.rect)) {
            out.push(GeometryViolation::LabelOverflow { id: b.id.clone() });
        }
    }
    if let Some(i) = &b.icon {
        check_icon(&b.id, i, out);
    }
}

fn check_element(e: &Element, out: &mut Vec<GeometryViolation>) {
    match e {
        Element::Text { id, label, .. } => {
            if !label_fits(label, None) {
                out.push(GeometryViolation::LabelOverflow { id: id.clone() });
            }
        }
        Element::Icon { id, icon } => check_icon(id, icon, out),
    }
}

/// Checks every layout rule on one frame; an empty result means the frame
/// is well-formed.
pub fn audit_frame(frame: &FrameState) -> Vec<GeometryViolation> {
    let mut out = Vec::new();

    let base_is_info = frame.header.is_none();
    if base_is_info && frame.screen != ScreenId::MassiveInfo && frame.modal.is_none() {
        out.push(GeometryViolation::Header {
            screen: frame.screen,
            present: false,
        });
    }
    if !base_is_info && frame.screen == ScreenId::MassiveInfo {
        out.push(GeometryViolation::Header {
            screen: frame.screen,
            present: true,
        });
    }

    if frame.side_buttons.len() > 4 {
        out.push(GeometryViolation::TooManySideButtons(frame.side_buttons.len()));
    }
    for b in &frame.side_buttons {
        if !SIDE_SLOTS.contains(&b.rect) {
            out.push(GeometryViolation::SideButton {
                id: b.id.clone(),
                rect: b.rect,
            });
        }
    }
    for b in frame.central_buttons.iter().filter(|b| b.id.starts_with("tile_")) {
        if b.rect.w != TILE {
            out.push(GeometryViolation::TileWidth {
                id: b.id.clone(),
                width: b.rect.w,
            });
        }
    }

    // Buttons are checked per layer: an open modal shadows the base layer,
    // so only buttons on the same layer compete for a touch.
    let base: Vec<&ButtonSpec> = frame.base_buttons().collect();
    let modal: Vec<&ButtonSpec> = frame.modal.iter().flat_map(|m| m.buttons.iter()).collect();
    let mut ids = BTreeSet::new();
    for layer in [&base, &modal] {
        for (i, a) in layer.iter().enumerate() {
            check_button(a, &mut out);
            if !ids.insert(&a.id) {
                out.push(GeometryViolation::DuplicateId(a.id.clone()));
            }
            for b in &layer[i + 1..] {
                if a.rect.overlaps(&b.rect) {
                    out.push(GeometryViolation::Overlap {
                        a: a.id.clone(),
                        b: b.id.clone(),
                    });
                }
            }
        }
    }
    if let Some(m) = &frame.modal {
        for b in modal.iter().filter(|b| !m.rect.encloses(&b.rect)) {
            out.push(GeometryViolation::OutsideModal { id: b.id.clone() });
        }
    }

    let elements = frame
        .header
        .iter()
        .flat_map(|h| h.elements.iter())
        .chain(&frame.central)
        .chain(frame.modal.iter().flat_map(|m| m.elements.iter()));
    for e in elements {
        check_element(e, &mut out);
    }
    if let Some(m) = &frame.modal {
        if !m.rect.on_screen() {
            out.push(GeometryViolation::OffScreen {
                id: "modal".into(),
                rect: m.rect,
            });
        }
    }
    out
}

/// Stable hex digest of a frame's canonical serialization.
pub fn frame_digest(frame: &FrameState) -> String {
    let bytes = serde_json::to_vec(frame).expect("frames serialize");
    hex::encode(Sha256::digest(bytes))
}

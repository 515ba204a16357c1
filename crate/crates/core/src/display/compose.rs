use std::time::Duration;

use super::{
    ButtonSpec, ColorRole, DisplayError, Element, FrameState, Header, IconRef, Label, Modal, ModalKind, Rect, ScreenId,
};
use crate::bus::Snapshot;
use crate::detection::IllnessGroup;
use crate::engine::{PatientFacts, PendingKind, Session, Sex};
use crate::graph::NodeKind;
use crate::text::{fit_font_size, FontCatalog, Rgb, TextBox, TextError, BASE_SIZE};
use crate::warning::WarningEvent;

/// Fixed screen geometry: a header strip, four side buttons, the title
/// panel between the upper buttons, the central band and the footer
/// panel between the lower buttons.
pub mod layout {
    use super::Rect;

    pub const HEADER: Rect = Rect::new(0, 0, 320, 24);
    pub const MENU_BUTTON: Rect = Rect::new(0, 0, 64, 24);
    pub const CLOCK: Rect = Rect::new(112, 0, 96, 24);
    pub const BATTERY_ICON: Rect = Rect::new(234, 0, 24, 24);
    pub const BATTERY_TEXT: Rect = Rect::new(260, 0, 60, 24);

    pub const SIDE_W: u32 = 105;
    pub const SIDE_H: u32 = 55;
    pub const TOP_LEFT: Rect = Rect::new(0, 24, SIDE_W, SIDE_H);
    pub const TOP_RIGHT: Rect = Rect::new(215, 24, SIDE_W, SIDE_H);
    pub const BOTTOM_LEFT: Rect = Rect::new(0, 185, SIDE_W, SIDE_H);
    pub const BOTTOM_RIGHT: Rect = Rect::new(215, 185, SIDE_W, SIDE_H);
    pub const SIDE_SLOTS: [Rect; 4] = [TOP_LEFT, TOP_RIGHT, BOTTOM_LEFT, BOTTOM_RIGHT];

    pub const TITLE: Rect = Rect::new(105, 24, 110, 55);
    pub const BAND: Rect = Rect::new(0, 79, 320, 106);
    pub const FOOTER: Rect = Rect::new(105, 185, 110, 55);

    /// Three equal rows of the central band.
    pub const fn band_row(i: u32) -> Rect {
        Rect::new(0, 79 + 35 * i, 320, 35)
    }

    pub const TILE: u32 = 64;
    pub const TILE_COLUMNS: [u32; 4] = [8, 88, 168, 248];
    pub const TILE_ROWS: [u32; 2] = [36, 132];
    pub const MIN_ICON_W: u32 = 23;

    pub const DETECTION_ROW_H: u32 = 21;

    pub const MODAL: Rect = Rect::new(4, 28, 312, 208);
    pub const MODAL_ICON: Rect = Rect::new(12, 36, 32, 32);
    pub const MODAL_TITLE: Rect = Rect::new(52, 32, 256, 44);
    pub const MODAL_DETAIL: Rect = Rect::new(12, 78, 296, 46);
    pub const MODAL_LEFT: Rect = Rect::new(20, 128, SIDE_W, SIDE_H);
    pub const MODAL_RIGHT: Rect = Rect::new(195, 128, SIDE_W, SIDE_H);
    pub const MODAL_CENTER: Rect = Rect::new(107, 128, SIDE_W, SIDE_H);

    pub const PAD: u32 = 4;
}

use layout::*;

/// Everything a frame is computed from.
#[derive(Debug, Clone, Copy)]
pub struct ComposeInput<'a> {
    pub screen: ScreenId,
    /// Screen underneath when `screen` is a modal; otherwise `screen`.
    pub base: ScreenId,
    pub session: Option<&'a Session>,
    /// Ranked illness groups, most likely first.
    pub detection: Option<&'a [(IllnessGroup, f64)]>,
    pub selected_group: usize,
    pub snapshot: &'a Snapshot,
    pub patient: &'a PatientFacts,
    pub warning: Option<&'a WarningEvent>,
    pub time_of_day: Duration,
    pub battery_percent: u8,
    pub paths: &'a [String],
    /// Most recent first.
    pub alarms: &'a [WarningEvent],
    pub log_lines: &'a [String],
    pub settings_lines: &'a [String],
}

fn inconsistent(msg: &str) -> DisplayError {
    DisplayError::InconsistentInput(msg.to_string())
}

fn truncated(text: &str, keep: usize) -> String {
    let mut s: String = text.chars().take(keep).collect();
    s.push_str("...");
    s
}

/// Fits `text` into `rect` (after padding). Text that cannot fit even at
/// the smallest size is shortened with a trailing ellipsis.
fn fit_label(text: &str, rect: Rect, wrap: bool, catalog: &FontCatalog) -> Label {
    let bbox = TextBox {
        width: rect.w,
        height: rect.h,
    };
    let text = if text.trim().is_empty() { "-" } else { text };
    let mut candidate = text.to_string();
    let mut keep = text.chars().count();
    loop {
        match fit_font_size(&candidate, bbox, catalog, wrap) {
            Ok(fit) => {
                return Label {
                    text: candidate,
                    size: fit.size,
                    lines: fit.lines,
                    rect,
                }
            }
            Err(TextError::DoesNotFit { .. }) if keep > 0 => {
                keep -= 1;
                candidate = truncated(text, keep);
            }
            Err(_) => {
                return Label {
                    text: String::new(),
                    size: catalog.smallest(),
                    lines: Vec::new(),
                    rect,
                }
            }
        }
    }
}

fn label(text: &str, rect: Rect) -> Label {
    fit_label(text, rect, true, &FontCatalog::default())
}

fn text(id: &str, s: &str, rect: Rect, color: Rgb) -> Element {
    Element::Text {
        id: id.to_string(),
        color,
        label: label(s, rect),
    }
}

fn icon(id: &str, name: &str, rect: Rect) -> Element {
    Element::Icon {
        id: id.to_string(),
        icon: IconRef {
            name: name.to_string(),
            rect,
        },
    }
}

fn button(id: &str, rect: Rect, caption: &str, role: ColorRole) -> ButtonSpec {
    ButtonSpec {
        id: id.to_string(),
        rect,
        label: Some(label(caption, rect.inset(PAD))),
        icon: None,
        role,
    }
}

fn icon_button(id: &str, rect: Rect, icon_name: &str, role: ColorRole) -> ButtonSpec {
    let (cx, cy) = rect.center();
    ButtonSpec {
        id: id.to_string(),
        rect,
        label: None,
        icon: Some(IconRef {
            name: icon_name.to_string(),
            rect: Rect::new(cx - 16, cy - 16, 32, 32),
        }),
        role,
    }
}

fn header(input: &ComposeInput) -> Header {
    let secs = input.time_of_day.as_secs() % 86_400;
    let time = format!("{:02}:{:02}:{:02}", secs / 3600, secs / 60 % 60, secs % 60);
    let menu_button = ButtonSpec {
        id: "menu_button".into(),
        rect: MENU_BUTTON,
        label: None,
        icon: Some(IconRef {
            name: "menu".into(),
            rect: Rect::new(20, 0, 24, 24),
        }),
        role: ColorRole::Neutral,
    };
    Header {
        elements: vec![
            text("clock", &time, CLOCK, Rgb::BLACK),
            icon("battery_icon", "battery", BATTERY_ICON),
            text(
                "battery",
                &format!("{}%", input.battery_percent),
                BATTERY_TEXT,
                Rgb::BLACK,
            ),
        ],
        time,
        battery_percent: input.battery_percent,
        menu_button,
    }
}

fn empty_frame(screen: ScreenId, input: &ComposeInput) -> FrameState {
    FrameState {
        screen,
        header: (screen != ScreenId::MassiveInfo).then(|| header(input)),
        side_buttons: Vec::new(),
        central_buttons: Vec::new(),
        central: Vec::new(),
        modal: None,
    }
}

fn title(frame: &mut FrameState, s: &str) {
    frame.central.push(text("title", s, TITLE.inset(PAD), Rgb::BLACK));
}

fn back_button() -> ButtonSpec {
    button("back_button", TOP_LEFT, "Zurück", ColorRole::Neutral)
}

fn session<'a>(input: &ComposeInput<'a>) -> Result<&'a Session, DisplayError> {
    input
        .session
        .ok_or_else(|| inconsistent("treatment screens need a running session"))
}

fn main_menu(f: &mut FrameState) {
    const TILES: [(&str, &str, &str, ColorRole); 7] = [
        ("tile_monitor", "heart", "Monitor", ColorRole::Red),
        ("tile_treatment", "cross", "Behandlung", ColorRole::Green),
        ("tile_paths", "list", "Pfade", ColorRole::Neutral),
        ("tile_detection", "search", "Detektion", ColorRole::Green),
        ("tile_alarms", "bell", "Alarme", ColorRole::Red),
        ("tile_logging", "log", "Protokoll", ColorRole::Neutral),
        ("tile_settings", "gear", "Optionen", ColorRole::Neutral),
    ];
    for (i, (id, icon_name, caption, role)) in TILES.into_iter().enumerate() {
        let x = TILE_COLUMNS[i % 4];
        let y = TILE_ROWS[i / 4];
        f.central_buttons.push(ButtonSpec {
            id: id.into(),
            rect: Rect::new(x, y, TILE, TILE),
            label: Some(label(caption, Rect::new(x + 2, y + 36, 60, 26))),
            icon: Some(IconRef {
                name: icon_name.into(),
                rect: Rect::new(x + 16, y + 4, 32, 32),
            }),
            role,
        });
    }
}

/// Side buttons for the treatment screen. Prompt options take the right
/// side first, then the lower left, then the upper left.
fn treatment_buttons(s: &Session) -> Vec<ButtonSpec> {
    let back = button("back_step", TOP_LEFT, "Zurück", ColorRole::Red);
    let monitor = icon_button("monitor_button", BOTTOM_RIGHT, "cross", ColorRole::Neutral);
    match s.pending() {
        Some(p) if p.kind == PendingKind::Prompt => {
            let slots = [TOP_RIGHT, BOTTOM_RIGHT, BOTTOM_LEFT, TOP_LEFT];
            let two = p.options.len() == 2;
            let mut out: Vec<ButtonSpec> = p
                .options
                .iter()
                .zip(slots)
                .enumerate()
                .map(|(i, (opt, rect))| {
                    let role = match (two, i) {
                        (true, 0) => ColorRole::Green,
                        (true, _) => ColorRole::Red,
                        _ => ColorRole::Neutral,
                    };
                    button(&format!("option_{i}"), rect, opt, role)
                })
                .collect();
            if p.options.len() <= 3 {
                out.push(back);
            }
            if p.options.len() <= 2 {
                out.push(button("info_button", BOTTOM_LEFT, "Info", ColorRole::Neutral));
            }
            out
        }
        _ => {
            let forward = if s.current().kind == NodeKind::End {
                "Ende"
            } else {
                "Weiter"
            };
            vec![
                back,
                button("next_step", TOP_RIGHT, forward, ColorRole::Green),
                button("info_button", BOTTOM_LEFT, "Info", ColorRole::Neutral),
                monitor,
            ]
        }
    }
}

fn treatment(f: &mut FrameState, s: &Session) {
    let v = s.view();
    title(f, &v.path_title);
    let sections = [
        ("previous", v.previous.as_deref(), Rgb::RED),
        ("current", Some(v.current.as_str()), Rgb::BLACK),
        ("next", v.next.as_deref(), Rgb::GREEN),
    ];
    for (i, (id, content, color)) in sections.into_iter().enumerate() {
        if let Some(content) = content {
            f.central.push(text(id, content, band_row(i as u32).inset(PAD), color));
        }
    }
    let status = match &v.pending {
        Some(p) if p.kind == PendingKind::Prompt => p.question.clone(),
        _ => format!("Schritt {}", s.history().len()),
    };
    f.central.push(text("status", &status, FOOTER.inset(PAD), Rgb::BLACK));
    f.side_buttons = treatment_buttons(s);
}

/// Supporting text for the current step shown on the info screen.
pub(crate) fn info_text(s: &Session) -> String {
    s.graph()
        .attached_info(s.cursor().as_str())
        .ok()
        .flatten()
        .unwrap_or("Keine weiteren Informationen zu diesem Schritt.")
        .to_string()
}

fn massive_info(f: &mut FrameState, s: &Session) {
    let base_only = FontCatalog::new(vec![BASE_SIZE]).expect("base catalog is valid");
    f.central.push(Element::Text {
        id: "info".into(),
        color: Rgb::BLACK,
        label: fit_label(&info_text(s), Rect::new(4, 4, 312, 177), true, &base_only),
    });
    f.side_buttons = vec![button("back_button", BOTTOM_LEFT, "Zurück", ColorRole::Neutral)];
}

fn int_slot(snapshot: &Snapshot, slot: &str) -> Option<i32> {
    snapshot.get(slot).and_then(|v| v.as_int())
}

fn patient_monitor(f: &mut FrameState, input: &ComposeInput) {
    let snap = input.snapshot;
    let dash = || "--".to_string();
    let name = input.patient.name().unwrap_or("Unbekannt");
    let sex = int_slot(snap, "sex_code")
        .and_then(Sex::from_code)
        .or_else(|| input.patient.sex());
    let age = int_slot(snap, "age_years").or_else(|| input.patient.age_years().map(|a| a.round() as i32));
    let pulse = int_slot(snap, "pulse").map_or_else(dash, |v| v.to_string());
    let spo2 = int_slot(snap, "spo2").map_or_else(dash, |v| v.to_string());

    title(f, "Patient");
    f.central
        .push(text("name", name, Rect::new(4, 81, 312, 30), Rgb::BLACK));
    let sex_icon = match sex {
        Some(Sex::M) => "sex_m",
        Some(Sex::F) => "sex_f",
        _ => "sex_x",
    };
    f.central.push(icon("sex_icon", sex_icon, Rect::new(4, 118, 24, 24)));
    f.central.push(text(
        "sex",
        sex.map_or("-", |s| s.letter()),
        Rect::new(32, 115, 40, 30),
        Rgb::BLACK,
    ));
    f.central.push(text(
        "age",
        &age.map_or_else(dash, |a| format!("{a} Jahre")),
        Rect::new(160, 115, 156, 30),
        Rgb::BLACK,
    ));
    f.central.push(icon("heart_icon", "heart", Rect::new(4, 153, 24, 24)));
    f.central.push(text(
        "pulse",
        &format!("{pulse} /min"),
        Rect::new(32, 150, 124, 30),
        Rgb::RED,
    ));
    f.central.push(text(
        "spo2",
        &format!("SpO2 {spo2} %"),
        Rect::new(160, 150, 156, 30),
        Rgb::BLACK,
    ));
    f.side_buttons = vec![
        back_button(),
        button("detection_button", TOP_RIGHT, "Detektion", ColorRole::Neutral),
    ];
}

fn situation_select(f: &mut FrameState, input: &ComposeInput) -> Result<(), DisplayError> {
    let ranked = input
        .detection
        .ok_or_else(|| inconsistent("situation selection needs a detection result"))?;
    if ranked.is_empty() {
        return Err(inconsistent("detection result is empty"));
    }
    title(f, "Situation");
    for (i, (group, p)) in ranked.iter().take(5).enumerate() {
        let rect = Rect::new(0, BAND.y + DETECTION_ROW_H * i as u32, 320, DETECTION_ROW_H);
        let role = if i == input.selected_group {
            ColorRole::Green
        } else {
            ColorRole::Neutral
        };
        let caption = format!("{}. {} {:.0}%", i + 1, group.label(), p * 100.0);
        f.central_buttons.push(ButtonSpec {
            id: format!("group_{i}"),
            rect,
            label: Some(label(&caption, rect.inset(2))),
            icon: None,
            role,
        });
    }
    f.side_buttons = vec![
        back_button(),
        button("accept_button", TOP_RIGHT, "Übernehmen", ColorRole::Green),
    ];
    Ok(())
}

fn all_treatments(f: &mut FrameState, input: &ComposeInput) {
    title(f, "Behandlungspfade");
    for (i, path) in input.paths.iter().take(3).enumerate() {
        let rect = band_row(i as u32);
        f.central_buttons.push(ButtonSpec {
            id: format!("path_{i}"),
            rect,
            label: Some(label(path, rect.inset(PAD))),
            icon: None,
            role: ColorRole::Neutral,
        });
    }
    f.side_buttons = vec![back_button()];
}

fn text_list(f: &mut FrameState, heading: &str, rows: &[(String, Rgb)], empty: &str) {
    title(f, heading);
    if rows.is_empty() {
        f.central.push(text("row_0", empty, band_row(0).inset(PAD), Rgb::BLACK));
    }
    for (i, (s, color)) in rows.iter().take(3).enumerate() {
        f.central
            .push(text(&format!("row_{i}"), s, band_row(i as u32).inset(PAD), *color));
    }
    f.side_buttons = vec![back_button()];
}

fn modal(input: &ComposeInput) -> Result<Modal, DisplayError> {
    let panel = |kind, code, icon_name: &str, heading: &str, detail: &str, buttons| Modal {
        kind,
        rect: MODAL,
        code,
        elements: vec![
            icon("modal_icon", icon_name, MODAL_ICON),
            text("modal_title", heading, MODAL_TITLE, Rgb::BLACK),
            text("modal_detail", detail, MODAL_DETAIL, Rgb::BLACK),
        ],
        buttons,
    };
    match input.screen {
        ScreenId::Warning | ScreenId::Notification => {
            let w = input
                .warning
                .ok_or_else(|| inconsistent("warning screen without a warning"))?;
            if w.is_notification() != (input.screen == ScreenId::Notification) {
                return Err(inconsistent("warning code does not match the screen"));
            }
            Ok(if w.is_notification() {
                panel(
                    ModalKind::Notification,
                    Some(w.code),
                    "bell",
                    &format!("Hinweis {}", w.code),
                    &w.message,
                    vec![button("dismiss_button", MODAL_CENTER, "OK", ColorRole::Neutral)],
                )
            } else {
                panel(
                    ModalKind::Warning,
                    Some(w.code),
                    "warning",
                    &format!("Warnung {}", w.code),
                    &w.message,
                    vec![button("dismiss_button", MODAL_CENTER, "Quittieren", ColorRole::Red)],
                )
            })
        }
        ScreenId::Approval => {
            let s = session(input)?;
            let p = s
                .pending()
                .filter(|p| p.kind == PendingKind::Approval)
                .ok_or_else(|| inconsistent("approval screen without a pending approval"))?;
            let detail = format!(
                "Vorschlag: {}\n{}",
                p.auto_choice.as_deref().unwrap_or("-"),
                p.evidence.as_deref().unwrap_or("")
            );
            Ok(panel(
                ModalKind::Approval,
                None,
                "check",
                &p.question,
                &detail,
                vec![
                    button("approve_button", MODAL_LEFT, "Bestätigen", ColorRole::Green),
                    button("decline_button", MODAL_RIGHT, "Ablehnen", ColorRole::Red),
                ],
            ))
        }
        _ => unreachable!("only modal screens get a modal"),
    }
}

/// Builds the frame for `input.screen`. Pure: equal inputs give equal
/// frames.
pub fn compose(input: &ComposeInput) -> Result<FrameState, DisplayError> {
    if input.base.is_modal() {
        return Err(inconsistent("a modal cannot be the base screen"));
    }
    if !input.screen.is_modal() && input.base != input.screen {
        return Err(inconsistent("base differs from a non-modal screen"));
    }
    let mut f = empty_frame(input.base, input);
    match input.base {
        ScreenId::MainMenu => main_menu(&mut f),
        ScreenId::Treatment => treatment(&mut f, session(input)?),
        ScreenId::MassiveInfo => massive_info(&mut f, session(input)?),
        ScreenId::PatientMonitor => patient_monitor(&mut f, input),
        ScreenId::SituationSelect => situation_select(&mut f, input)?,
        ScreenId::AllTreatments => all_treatments(&mut f, input),
        ScreenId::Alarms => {
            let rows: Vec<(String, Rgb)> = input
                .alarms
                .iter()
                .map(|w| {
                    let color = if w.is_notification() { Rgb::BLACK } else { Rgb::RED };
                    (w.to_string(), color)
                })
                .collect();
            text_list(&mut f, "Alarme", &rows, "Keine Alarme");
        }
        ScreenId::Logging => {
            let rows: Vec<(String, Rgb)> = input.log_lines.iter().map(|l| (l.clone(), Rgb::BLACK)).collect();
            text_list(&mut f, "Protokoll", &rows, "Noch keine Einträge");
        }
        ScreenId::Settings => {
            let rows: Vec<(String, Rgb)> = input.settings_lines.iter().map(|l| (l.clone(), Rgb::BLACK)).collect();
            text_list(&mut f, "Optionen", &rows, "Keine Optionen");
        }
        ScreenId::Warning | ScreenId::Notification | ScreenId::Approval => unreachable!("checked above"),
    }
    if input.screen.is_modal() {
        f.screen = input.screen;
        f.modal = Some(modal(input)?);
    }
    Ok(f)
}

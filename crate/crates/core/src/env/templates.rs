use super::{EnvError, Rect, ScreenState, Widget, WidgetKind, STATUS_ID};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;

pub const TEMPLATE_IDS: [&str; 3] = ["editor", "settings", "file_manager"];

/// Build the initial screen for a template. The seed moves widgets around,
/// reorders rows, and picks initial checkbox and field contents.
pub fn spawn(template_id: &str, seed: u64) -> Result<ScreenState, EnvError> {
    let mut rng = seed::rng(seed::derive(seed, template_id));
    let widgets = match template_id {
        "settings" => settings(&mut rng),
        "editor" => editor(&mut rng),
        "file_manager" => file_manager(&mut rng),
        other => return Err(EnvError::UnknownTemplate(other.to_string())),
    };
    Ok(ScreenState {
        template_id: template_id.to_string(),
        seed,
        widgets,
        focus: None,
        terminal: false,
        step_count: 0,
    })
}

/// Human-facing application name used in instructions.
pub fn app_name(template_id: &str) -> &'static str {
    match template_id {
        "settings" => "Settings",
        "editor" => "Editor",
        "file_manager" => "Files",
        _ => "the app",
    }
}

fn status(y: i32) -> Widget {
    let mut w = Widget::new(STATUS_ID, WidgetKind::Label, Rect::new(8, y, 300, 24), "Status");
    w.value = "Ready".to_string();
    w
}

fn menu_with_items(
    out: &mut Vec<Widget>,
    id: &str,
    label: &str,
    x: i32,
    items: &[(&str, &str)],
) {
    out.push(Widget::new(id, WidgetKind::Menu, Rect::new(x, 0, 70, 24), label));
    for (j, (item_id, item_label)) in items.iter().enumerate() {
        let mut item = Widget::new(
            item_id,
            WidgetKind::MenuItem,
            Rect::new(x, 24 + j as i32 * 26, 140, 26),
            item_label,
        );
        item.visible = false;
        item.parent = Some(id.to_string());
        out.push(item);
    }
}

fn settings(rng: &mut seed::Rng) -> Vec<Widget> {
    let ox = 40 + rng.gen_range(0..=60);
    let oy = 60 + rng.gen_range(0..=40);
    let spacing = 40 + rng.gen_range(0..=8);
    let mut rows = [
        ("wifi", "Wi-Fi"),
        ("bluetooth", "Bluetooth"),
        ("dark_mode", "Dark Mode"),
        ("notifications", "Notifications"),
        ("location", "Location Services"),
        ("airplane", "Airplane Mode"),
    ];
    rows.shuffle(rng);

    let mut out = vec![Widget::new("title", WidgetKind::Label, Rect::new(ox, 16, 200, 28), "Settings")];
    for (i, (id, label)) in rows.iter().enumerate() {
        let mut cb = Widget::new(
            id,
            WidgetKind::Checkbox,
            Rect::new(ox, oy + i as i32 * spacing, 220, 28),
            label,
        );
        cb.checked = rng.gen_bool(0.5);
        out.push(cb);
    }
    let bx = 400 + rng.gen_range(0..=60);
    out.push(Widget::new("apply", WidgetKind::Button, Rect::new(bx, oy, 120, 32), "Apply"));
    out.push(Widget::new("reset", WidgetKind::Button, Rect::new(bx, oy + 48, 120, 32), "Reset"));
    out.push(status(448));
    out
}

fn editor(rng: &mut seed::Rng) -> Vec<Widget> {
    let mx = 8 + rng.gen_range(0..=20);
    let mut out = Vec::new();
    menu_with_items(
        &mut out,
        "file",
        "File",
        mx,
        &[("file_new", "New"), ("file_open", "Open"), ("file_save", "Save"), ("file_export", "Export PDF")],
    );
    menu_with_items(
        &mut out,
        "edit",
        "Edit",
        mx + 80,
        &[("edit_undo", "Undo"), ("edit_find", "Find"), ("edit_replace", "Replace")],
    );
    menu_with_items(
        &mut out,
        "format",
        "Format",
        mx + 160,
        &[("format_bold", "Bold Text"), ("format_italic", "Italic Text")],
    );

    let ox = 120 + rng.gen_range(0..=80);
    let oy = 140 + rng.gen_range(0..=30);
    let mut fields = [
        ("title", "Title", 32, ["", "Untitled", "Draft"]),
        ("author", "Author", 32, ["", "Anonymous", "Staff"]),
    ];
    if rng.gen_bool(0.5) {
        fields.swap(0, 1);
    }
    for (i, (id, label, h, initial)) in fields.iter().enumerate() {
        let mut f = Widget::new(id, WidgetKind::TextField, Rect::new(ox, oy + i as i32 * 48, 300, *h), label);
        f.value = initial[rng.gen_range(0..initial.len())].to_string();
        out.push(f);
    }
    let mut body = Widget::new("body", WidgetKind::TextField, Rect::new(ox, oy + 96, 300, 120), "Body");
    body.value = ["", "Lorem ipsum"][rng.gen_range(0..2)].to_string();
    out.push(body);
    let mut spell = Widget::new(
        "spellcheck",
        WidgetKind::Checkbox,
        Rect::new(ox, oy + 232, 200, 28),
        "Spell Check",
    );
    spell.checked = rng.gen_bool(0.5);
    out.push(spell);
    out.push(Widget::new("publish", WidgetKind::Button, Rect::new(520, oy, 100, 32), "Publish"));
    out.push(status(450));
    out
}

fn file_manager(rng: &mut seed::Rng) -> Vec<Widget> {
    let mx = 8 + rng.gen_range(0..=20);
    let mut out = Vec::new();
    menu_with_items(
        &mut out,
        "view",
        "View",
        mx,
        &[("view_list", "List View"), ("view_grid", "Grid View"), ("view_details", "Details")],
    );
    menu_with_items(
        &mut out,
        "sort",
        "Sort",
        mx + 80,
        &[("sort_name", "By Name"), ("sort_date", "By Date"), ("sort_size", "By Size")],
    );
    out.push(Widget::new("path", WidgetKind::Label, Rect::new(300, 2, 160, 20), "Home"));

    let ox = 40 + rng.gen_range(0..=60);
    let oy = 150 + rng.gen_range(0..=30);
    let mut search = Widget::new("search", WidgetKind::TextField, Rect::new(ox, oy, 260, 30), "Search");
    search.value = ["", "docs"][rng.gen_range(0..2)].to_string();
    out.push(search);
    out.push(Widget::new(
        "rename",
        WidgetKind::TextField,
        Rect::new(ox, oy + 44, 260, 30),
        "Rename To",
    ));
    out.push(Widget::new(
        "open_folder",
        WidgetKind::Button,
        Rect::new(ox + 300, oy, 140, 30),
        "Open Folder",
    ));
    out.push(Widget::new("delete", WidgetKind::Button, Rect::new(ox + 300, oy + 44, 140, 30), "Delete"));
    let mut boxes = [("show_hidden", "Show Hidden Files"), ("preview", "Preview Pane")];
    if rng.gen_bool(0.5) {
        boxes.swap(0, 1);
    }
    for (i, (id, label)) in boxes.iter().enumerate() {
        let mut cb = Widget::new(id, WidgetKind::Checkbox, Rect::new(ox, oy + 100 + i as i32 * 40, 240, 28), label);
        cb.checked = rng.gen_bool(0.5);
        out.push(cb);
    }
    out.push(status(450));
    out
}

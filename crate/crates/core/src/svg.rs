//! Small helpers shared by the SVG renderers.

use std::fmt::Write as _;

/// Okabe-Ito colorblind-safe palette.
pub const PALETTE: [&str; 8] = [
    "#0072B2", "#E69F00", "#009E73", "#D55E00", "#CC79A7", "#56B4E9", "#F0E442", "#000000",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Fixed two-decimal coordinates keep output byte-stable.
pub fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn open(out: &mut String, width: f64, height: f64, font_size: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="{f}">"#,
        w = num(width),
        h = num(height),
        f = num(font_size),
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        num(width),
        num(height)
    );
}

pub fn close(out: &mut String) {
    out.push_str("</svg>\n");
}

/// Axis-aligned box used for label overlap checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }
}

/// Approximate extent of a text label with its baseline at `(x, y)`.
pub fn label_box(text: &str, x: f64, y: f64, font_size: f64) -> Rect {
    let w = 0.6 * font_size * text.chars().count() as f64;
    Rect {
        x,
        y: y - font_size,
        w,
        h: font_size * 1.2,
    }
}

/// Places labels in order, pushing each one down until it clears every
/// label already placed. Returns the baseline positions.
pub fn place_labels(labels: &[(String, f64, f64)], font_size: f64) -> Vec<(f64, f64)> {
    let mut placed: Vec<Rect> = Vec::with_capacity(labels.len());
    let mut out = Vec::with_capacity(labels.len());
    for (text, x, y) in labels {
        let (x, mut y) = (*x, *y);
        let mut rect = label_box(text, x, y, font_size);
        for _ in 0..64 {
            if !placed.iter().any(|p| p.overlaps(&rect)) {
                break;
            }
            y += font_size * 1.2;
            rect = label_box(text, x, y, font_size);
        }
        placed.push(rect);
        out.push((x, y));
    }
    out
}

//! Enhanced scatterplot: the target word once per segment among the mean
//! positions of its neighbors, projected to 2-D.

mod pca;

pub use pca::{pca_2d, reduce_2d, Projection};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::shift::{neighbors_of, EmbeddingSequence};
use crate::svg;

/// Default number of neighbors gathered per segment.
pub const DEFAULT_PER_SEGMENT_K: usize = 10;

/// Mean vectors below this norm are left out of the scene.
pub const DEGENERATE_NORM: f64 = 1e-6;

/// High-dimensional inputs to the scatterplot.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborMean {
    /// The target word's own vector in each segment.
    pub target: Vec<Vec<f64>>,
    /// Every collected neighbor's vector averaged over all segments.
    pub neighbors: BTreeMap<String, Vec<f64>>,
}

/// Collects the union of the word's `k` nearest neighbors over all segments
/// and averages each neighbor's normalized vectors across segments.
pub fn neighbor_mean(word: &str, seq: &EmbeddingSequence, k: usize) -> Result<NeighborMean> {
    let w = seq.index_of(word)?;
    if k == 0 || k >= seq.vocab_len() {
        return Err(Error::Config(format!(
            "per-segment neighbor count {k} must be in 1..{}",
            seq.vocab_len()
        )));
    }
    let to_f64 = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    let snapshots = seq.snapshots();
    let union: BTreeSet<usize> = snapshots
        .iter()
        .flat_map(|s| neighbors_of(s, w, k))
        .collect();
    let dim = snapshots[0].dim();
    let neighbors = union
        .into_iter()
        .map(|i| {
            let mut mean = vec![0.0; dim];
            for s in snapshots {
                for (m, &x) in mean.iter_mut().zip(s.vector(i)) {
                    *m += f64::from(x);
                }
            }
            mean.iter_mut().for_each(|m| *m /= snapshots.len() as f64);
            (seq.words()[i].clone(), mean)
        })
        .collect();
    Ok(NeighborMean {
        target: snapshots.iter().map(|s| to_f64(s.vector(w))).collect(),
        neighbors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterScene {
    pub target: String,
    pub segment_labels: Vec<String>,
    /// One point per segment, in segment order.
    pub target_points: Vec<[f64; 2]>,
    pub neighbor_points: BTreeMap<String, [f64; 2]>,
}

impl ScatterScene {
    pub fn validate(&self) -> Result<()> {
        if self.target_points.len() != self.segment_labels.len() {
            return Err(Error::Config("one target point per segment required".into()));
        }
        let unique: BTreeSet<&String> = self.segment_labels.iter().collect();
        if unique.len() != self.segment_labels.len() {
            return Err(Error::Config("segment labels must be unique".into()));
        }
        let finite = self
            .target_points
            .iter()
            .chain(self.neighbor_points.values())
            .all(|p| p[0].is_finite() && p[1].is_finite());
        if !finite {
            return Err(Error::DegenerateGeometry("non-finite scene coordinate"));
        }
        Ok(())
    }
}

/// Gathers neighbors, drops degenerate means, and projects everything with
/// one shared PCA.
pub fn build_scene(word: &str, seq: &EmbeddingSequence, k: usize) -> Result<ScatterScene> {
    let means = neighbor_mean(word, seq, k)?;
    let mut names = Vec::new();
    let mut points = means.target.clone();
    for (name, v) in &means.neighbors {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < DEGENERATE_NORM {
            warn!("dropping {name:?}: mean vector has norm {norm:e}");
            continue;
        }
        names.push(name.clone());
        points.push(v.clone());
    }
    let projected = reduce_2d(&points)?;
    let (targets, rest) = projected.split_at(means.target.len());
    let scene = ScatterScene {
        target: word.to_owned(),
        segment_labels: seq.snapshots().iter().map(|s| s.field_label().to_owned()).collect(),
        target_points: targets.to_vec(),
        neighbor_points: names.into_iter().zip(rest.iter().copied()).collect(),
    };
    scene.validate()?;
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterStyle {
    pub width: f64,
    pub height: f64,
    pub font_size: f64,
    pub margin: f64,
}

impl Default for ScatterStyle {
    fn default() -> Self {
        ScatterStyle {
            width: 800.0,
            height: 600.0,
            font_size: 12.0,
            margin: 60.0,
        }
    }
}

/// Renders the scene as an SVG 1.1 document.
pub fn render_scatter(scene: &ScatterScene, style: &ScatterStyle) -> String {
    let all: Vec<[f64; 2]> = scene
        .target_points
        .iter()
        .chain(scene.neighbor_points.values())
        .copied()
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let legend_w = 160.0;
    let plot_w = (style.width - 2.0 * style.margin - legend_w).max(1.0);
    let plot_h = (style.height - 2.0 * style.margin).max(1.0);
    let span = ((x1 - x0) / plot_w).max((y1 - y0) / plot_h).max(1e-12);
    let cx = (x0 + x1) / 2.0;
    let cy = (y0 + y1) / 2.0;
    let to_screen = |p: [f64; 2]| -> (f64, f64) {
        (
            style.margin + plot_w / 2.0 + (p[0] - cx) / span,
            style.margin + plot_h / 2.0 - (p[1] - cy) / span,
        )
    };

    let mut out = String::new();
    svg::open(&mut out, style.width, style.height, style.font_size);
    let _ = writeln!(
        out,
        r#"<text class="title" x="{}" y="{}" font-size="{}">{}</text>"#,
        svg::num(style.margin),
        svg::num(style.margin / 2.0),
        svg::num(style.font_size * 1.4),
        svg::escape(&scene.target)
    );

    let trail: Vec<String> = scene
        .target_points
        .iter()
        .map(|&p| {
            let (x, y) = to_screen(p);
            format!("{},{}", svg::num(x), svg::num(y))
        })
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline class="trajectory" points="{}" fill="none" stroke="#888888" stroke-opacity="0.4" stroke-width="1.5"/>"##,
        trail.join(" ")
    );

    let mut labels: Vec<(String, f64, f64)> = Vec::new();
    for (word, &p) in &scene.neighbor_points {
        let (x, y) = to_screen(p);
        let _ = writeln!(
            out,
            r##"<circle class="neighbor" cx="{}" cy="{}" r="3" fill="#777777"/>"##,
            svg::num(x),
            svg::num(y)
        );
        labels.push((word.clone(), x + 5.0, y - 4.0));
    }
    for (i, &p) in scene.target_points.iter().enumerate() {
        let (x, y) = to_screen(p);
        let _ = writeln!(
            out,
            r##"<circle class="target" cx="{}" cy="{}" r="6" fill="{}" stroke="#000000" stroke-width="0.8"/>"##,
            svg::num(x),
            svg::num(y),
            svg::color(i)
        );
        labels.push((scene.target.clone(), x + 8.0, y - 6.0));
    }
    let n_neighbors = scene.neighbor_points.len();
    for (i, ((text, _, _), (x, y))) in labels.iter().zip(svg::place_labels(&labels, style.font_size)).enumerate() {
        let (class, fill) = if i < n_neighbors {
            ("label", "#333333")
        } else {
            ("target-label", svg::color(i - n_neighbors))
        };
        let _ = writeln!(
            out,
            r#"<text class="{class}" x="{}" y="{}" fill="{fill}">{}</text>"#,
            svg::num(x),
            svg::num(y),
            svg::escape(text)
        );
    }

    let lx = style.width - style.margin - legend_w + 20.0;
    for (i, label) in scene.segment_labels.iter().enumerate() {
        let ly = style.margin + i as f64 * style.font_size * 1.6;
        let _ = writeln!(
            out,
            r#"<rect class="legend-swatch" x="{}" y="{}" width="{s}" height="{s}" fill="{}"/>"#,
            svg::num(lx),
            svg::num(ly),
            svg::color(i),
            s = svg::num(style.font_size),
        );
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{}" y="{}">{}</text>"#,
            svg::num(lx + style.font_size * 1.5),
            svg::num(ly + style.font_size * 0.9),
            svg::escape(label)
        );
    }
    svg::close(&mut out);
    out
}

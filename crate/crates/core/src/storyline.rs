//! Storyline view of a word's neighborhood: per-segment clusters, a
//! crossing-reducing line layout, and SVG output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::shift::{neighbors_of, EmbeddingSequence};
use crate::svg;

/// Barycenter sweep iterations per start.
const MAX_SWEEPS: usize = 20;
/// Seeded random starting orders tried in addition to the lexicographic one.
const RANDOM_STARTS: u64 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct StorylineConfig {
    /// Nearest neighbors that always join the cluster.
    pub m: usize,
    /// Neighborhood within which previous top-M words are carried over.
    pub k: usize,
    /// Empty slots between the cluster band and other lines.
    pub gap: i64,
}

impl Default for StorylineConfig {
    fn default() -> Self {
        StorylineConfig { m: 4, k: 32, gap: 2 }
    }
}

/// The target word's cluster in each segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTimeline {
    pub target: String,
    pub segment_labels: Vec<String>,
    /// Target first, then the segment's top-M in neighbor order, then
    /// carried-over words in the previous segment's neighbor order.
    pub clusters: Vec<Vec<String>>,
}

impl ClusterTimeline {
    /// Distinct words in order of first appearance.
    pub fn words(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.clusters
            .iter()
            .flatten()
            .filter(|w| seen.insert(w.as_str()))
            .cloned()
            .collect()
    }
}

/// Applies the cluster rule: the segment's top-M neighbors, plus any of the
/// previous segment's top-M that are still within this segment's top-K.
pub fn build_timeline(word: &str, seq: &EmbeddingSequence, config: &StorylineConfig) -> Result<ClusterTimeline> {
    let w = seq.index_of(word)?;
    if !(config.m >= 1 && config.m < config.k && config.k < seq.vocab_len()) {
        return Err(Error::Config(format!(
            "storyline needs 1 <= M < K < |V|, got M={} K={} |V|={}",
            config.m,
            config.k,
            seq.vocab_len()
        )));
    }
    let words = seq.words();
    let mut clusters = Vec::with_capacity(seq.len());
    let mut prev_top_m: Vec<usize> = Vec::new();
    for snap in seq.snapshots() {
        let top_k = neighbors_of(snap, w, config.k);
        let top_m = &top_k[..config.m];
        let in_k: BTreeSet<usize> = top_k.iter().copied().collect();
        let mut cluster = vec![w];
        cluster.extend_from_slice(top_m);
        for &x in &prev_top_m {
            if in_k.contains(&x) && !cluster.contains(&x) {
                cluster.push(x);
            }
        }
        clusters.push(cluster.into_iter().map(|i| words[i].clone()).collect());
        prev_top_m = top_m.to_vec();
    }
    Ok(ClusterTimeline {
        target: word.to_owned(),
        segment_labels: seq.snapshots().iter().map(|s| s.field_label().to_owned()).collect(),
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorylineLayout {
    /// Vertical slot of each word per segment; `None` outside its span.
    pub lines: BTreeMap<String, Vec<Option<i64>>>,
    pub crossings: usize,
    /// First and last slot of the cluster band in each segment.
    pub bands: Vec<(i64, i64)>,
}

impl StorylineLayout {
    /// Words of one segment, top to bottom.
    pub fn segment_order(&self, segment: usize) -> Vec<&str> {
        let mut placed: Vec<(i64, &str)> = self
            .lines
            .iter()
            .filter_map(|(w, s)| s[segment].map(|slot| (slot, w.as_str())))
            .collect();
        placed.sort();
        placed.into_iter().map(|(_, w)| w).collect()
    }
}

/// Counts line pairs whose vertical order flips between adjacent segments
/// where both lines are present.
pub fn count_crossings(lines: &BTreeMap<String, Vec<Option<i64>>>) -> usize {
    let rows: Vec<&Vec<Option<i64>>> = lines.values().collect();
    let segments = rows.first().map_or(0, |r| r.len());
    let mut total = 0;
    for e in 1..segments {
        for a in 0..rows.len() {
            for b in a + 1..rows.len() {
                if let (Some(a0), Some(b0), Some(a1), Some(b1)) =
                    (rows[a][e - 1], rows[b][e - 1], rows[a][e], rows[b][e])
                {
                    if (a0 < b0) != (a1 < b1) {
                        total += 1;
                    }
                }
            }
        }
    }
    total
}

/// Line presence and cluster membership per segment, by line id.
struct Frame {
    words: Vec<String>,
    present: Vec<Vec<usize>>,
    member: Vec<Vec<bool>>,
}

impl Frame {
    fn new(timeline: &ClusterTimeline) -> Self {
        let mut words: Vec<String> = timeline.words();
        words.sort();
        let id = |w: &str| words.binary_search_by(|x| x.as_str().cmp(w)).unwrap();
        let segments = timeline.clusters.len();
        let mut span = vec![(usize::MAX, 0usize); words.len()];
        let mut member = vec![vec![false; words.len()]; segments];
        for (e, cluster) in timeline.clusters.iter().enumerate() {
            for w in cluster {
                let i = id(w);
                member[e][i] = true;
                span[i] = (span[i].0.min(e), span[i].1.max(e));
            }
        }
        let present = (0..segments)
            .map(|e| (0..words.len()).filter(|&i| span[i].0 <= e && e <= span[i].1).collect())
            .collect();
        Frame { words, present, member }
    }

    fn segments(&self) -> usize {
        self.present.len()
    }

    fn is_valid(&self, e: usize, order: &[usize]) -> bool {
        let flags: Vec<bool> = order.iter().map(|&i| self.member[e][i]).collect();
        let first = flags.iter().position(|&m| m);
        let last = flags.iter().rposition(|&m| m);
        match (first, last) {
            (Some(a), Some(b)) => flags[a..=b].iter().all(|&m| m),
            _ => true,
        }
    }

    fn pair_crossings(&self, upper: &[usize], lower: &[usize]) -> usize {
        let mut pos = vec![usize::MAX; self.words.len()];
        for (p, &i) in lower.iter().enumerate() {
            pos[i] = p;
        }
        let shared: Vec<usize> = upper.iter().map(|&i| pos[i]).filter(|&p| p != usize::MAX).collect();
        let mut inversions = 0;
        for a in 0..shared.len() {
            for b in a + 1..shared.len() {
                if shared[a] > shared[b] {
                    inversions += 1;
                }
            }
        }
        inversions
    }

    fn total_crossings(&self, orders: &[Vec<usize>]) -> usize {
        orders.windows(2).map(|p| self.pair_crossings(&p[0], &p[1])).sum()
    }

    fn local_crossings(&self, orders: &[Vec<usize>], e: usize, order: &[usize]) -> usize {
        let mut c = 0;
        if e > 0 {
            c += self.pair_crossings(&orders[e - 1], order);
        }
        if e + 1 < orders.len() {
            c += self.pair_crossings(order, &orders[e + 1]);
        }
        c
    }

    /// Band members in lexicographic order, then the other lines.
    fn lexicographic(&self) -> Vec<Vec<usize>> {
        (0..self.segments())
            .map(|e| {
                let (band, rest): (Vec<usize>, Vec<usize>) =
                    self.present[e].iter().partition(|&&i| self.member[e][i]);
                band.into_iter().chain(rest).collect()
            })
            .collect()
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
        (0..self.segments())
            .map(|e| {
                let (mut band, mut rest): (Vec<usize>, Vec<usize>) =
                    self.present[e].iter().partition(|&&i| self.member[e][i]);
                band.shuffle(rng);
                rest.shuffle(rng);
                let split = rng.gen_range(0..=rest.len());
                let below = rest.split_off(split);
                rest.into_iter().chain(band).chain(below).collect()
            })
            .collect()
    }

    /// Reorders segment `e` by barycenters taken from `reference`.
    fn barycenter(&self, e: usize, current: &[usize], reference: &[usize]) -> Vec<usize> {
        let mut ref_pos = vec![None; self.words.len()];
        for (p, &i) in reference.iter().enumerate() {
            ref_pos[i] = Some(p as f64);
        }
        let key = |slot: usize, i: usize| ref_pos[i].unwrap_or(slot as f64);
        let mut band: Vec<(f64, usize, usize)> = Vec::new();
        let mut others: Vec<(f64, usize, usize)> = Vec::new();
        for (slot, &i) in current.iter().enumerate() {
            let entry = (key(slot, i), slot, i);
            if self.member[e][i] {
                band.push(entry);
            } else {
                others.push(entry);
            }
        }
        let by_key = |a: &(f64, usize, usize), b: &(f64, usize, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        band.sort_by(by_key);
        others.sort_by(by_key);
        let center = if band.is_empty() {
            f64::INFINITY
        } else {
            band.iter().map(|b| b.0).sum::<f64>() / band.len() as f64
        };
        let split = others.partition_point(|o| o.0 < center);
        others[..split]
            .iter()
            .chain(&band)
            .chain(&others[split..])
            .map(|t| t.2)
            .collect()
    }

    fn sweep(&self, mut orders: Vec<Vec<usize>>) -> (Vec<Vec<usize>>, usize) {
        let mut best_cost = self.total_crossings(&orders);
        let mut best = orders.clone();
        let s = self.segments();
        for _ in 0..MAX_SWEEPS {
            for e in 1..s {
                orders[e] = self.barycenter(e, &orders[e], &orders[e - 1]);
            }
            for e in (0..s.saturating_sub(1)).rev() {
                orders[e] = self.barycenter(e, &orders[e], &orders[e + 1]);
            }
            let cost = self.total_crossings(&orders);
            if cost < best_cost {
                best_cost = cost;
                best = orders.clone();
            } else {
                break;
            }
        }
        self.refine(best, best_cost)
    }

    /// Moves single lines to any other valid position while that lowers the
    /// crossing count.
    fn refine(&self, mut orders: Vec<Vec<usize>>, mut cost: usize) -> (Vec<Vec<usize>>, usize) {
        loop {
            let mut improved = false;
            for e in 0..self.segments() {
                let n = orders[e].len();
                let mut local = self.local_crossings(&orders, e, &orders[e]);
                for from in 0..n {
                    for to in 0..n {
                        if from == to {
                            continue;
                        }
                        let mut candidate = orders[e].clone();
                        let x = candidate.remove(from);
                        candidate.insert(to, x);
                        if !self.is_valid(e, &candidate) {
                            continue;
                        }
                        let c = self.local_crossings(&orders, e, &candidate);
                        if c < local {
                            cost -= local - c;
                            local = c;
                            orders[e] = candidate;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                return (orders, cost);
            }
        }
    }

    fn optimize(&self) -> Vec<Vec<usize>> {
        let (mut best, mut best_cost) = self.sweep(self.lexicographic());
        for seed in 0..RANDOM_STARTS {
            if best_cost == 0 {
                break;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (orders, cost) = self.sweep(self.random(&mut rng));
            if cost < best_cost {
                best = orders;
                best_cost = cost;
            }
        }
        best
    }

    fn assign_slots(&self, orders: &[Vec<usize>], gap: i64) -> StorylineLayout {
        let s = self.segments();
        let mut slots = vec![vec![None; s]; self.words.len()];
        let mut bands = Vec::with_capacity(s);
        for (e, order) in orders.iter().enumerate() {
            let mut slot = 0i64;
            let mut band = (0, 0);
            let mut in_band = false;
            for (p, &i) in order.iter().enumerate() {
                let member = self.member[e][i];
                if p > 0 && member != in_band {
                    slot += gap;
                }
                if member && !in_band {
                    band.0 = slot;
                }
                if member {
                    band.1 = slot;
                }
                in_band = member;
                slots[i][e] = Some(slot);
                slot += 1;
            }
            bands.push(band);
        }
        let lines: BTreeMap<String, Vec<Option<i64>>> = self.words.iter().cloned().zip(slots).collect();
        let crossings = count_crossings(&lines);
        StorylineLayout { lines, crossings, bands }
    }
}

/// Orders the lines in every segment to reduce crossings, keeping each
/// cluster contiguous and `gap` slots away from non-member lines.
///
/// Barycenter sweeps run from the lexicographic order and from a fixed set
/// of seeded random orders; each result is polished by single-line moves
/// and the best one is kept.
pub fn layout(timeline: &ClusterTimeline, config: &StorylineConfig) -> StorylineLayout {
    let frame = Frame::new(timeline);
    let orders = frame.optimize();
    frame.assign_slots(&orders, config.gap.max(1))
}

/// The starting layout: cluster members first, then other lines, each in
/// lexicographic order.
pub fn lexicographic_layout(timeline: &ClusterTimeline, config: &StorylineConfig) -> StorylineLayout {
    let frame = Frame::new(timeline);
    frame.assign_slots(&frame.lexicographic(), config.gap.max(1))
}

/// `label: word1 word2 ...` per segment, top to bottom.
pub fn timeline_text(timeline: &ClusterTimeline, layout: &StorylineLayout) -> String {
    let mut out = String::new();
    for (e, label) in timeline.segment_labels.iter().enumerate() {
        let _ = writeln!(out, "{label}: {}", layout.segment_order(e).join(" "));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorylineStyle {
    pub width: f64,
    pub slot_height: f64,
    pub font_size: f64,
    pub margin: f64,
}

impl Default for StorylineStyle {
    fn default() -> Self {
        StorylineStyle {
            width: 900.0,
            slot_height: 18.0,
            font_size: 11.0,
            margin: 70.0,
        }
    }
}

pub fn render_storyline(timeline: &ClusterTimeline, layout: &StorylineLayout, style: &StorylineStyle) -> String {
    let segments = timeline.segment_labels.len();
    let max_slot = layout
        .lines
        .values()
        .flatten()
        .flatten()
        .copied()
        .max()
        .unwrap_or(0);
    let top = style.margin + style.font_size * 2.0;
    let height = top + (max_slot + 1) as f64 * style.slot_height + style.margin;
    let span = style.width - 2.0 * style.margin;
    let x_of = |e: usize| {
        if segments <= 1 {
            style.margin + span / 2.0
        } else {
            style.margin + span * e as f64 / (segments - 1) as f64
        }
    };
    let y_of = |slot: i64| top + slot as f64 * style.slot_height + style.slot_height / 2.0;

    let mut out = String::new();
    svg::open(&mut out, style.width, height, style.font_size);

    for (e, &(first, last)) in layout.bands.iter().enumerate() {
        let _ = writeln!(
            out,
            r##"<rect class="band" x="{}" y="{}" width="{}" height="{}" rx="6" fill="#E8E8F0"/>"##,
            svg::num(x_of(e) - 18.0),
            svg::num(y_of(first) - style.slot_height / 2.0),
            svg::num(36.0),
            svg::num((last - first + 1) as f64 * style.slot_height)
        );
    }
    for (e, label) in timeline.segment_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text class="segment-label" x="{}" y="{}" text-anchor="middle" font-weight="bold">{}</text>"#,
            svg::num(x_of(e)),
            svg::num(style.margin),
            svg::escape(label)
        );
    }

    let mut color_index = 0;
    for (word, slots) in &layout.lines {
        let anchors: Vec<(f64, f64)> = slots
            .iter()
            .enumerate()
            .filter_map(|(e, s)| s.map(|slot| (x_of(e), y_of(slot))))
            .collect();
        let Some(&(x0, y0)) = anchors.first() else {
            continue;
        };
        let is_target = *word == timeline.target;
        let color = if is_target {
            "#000000"
        } else {
            color_index += 1;
            svg::color(color_index - 1)
        };
        let stroke = if is_target { 4.0 } else { 2.0 };
        // A lone anchor still gets a short visible stub.
        let mut d = format!("M {} {}", svg::num(x0 - 12.0), svg::num(y0));
        let _ = write!(d, " L {} {}", svg::num(x0), svg::num(y0));
        for pair in anchors.windows(2) {
            let ((xa, ya), (xb, yb)) = (pair[0], pair[1]);
            let mid = (xa + xb) / 2.0;
            let _ = write!(
                d,
                " C {} {} {} {} {} {}",
                svg::num(mid),
                svg::num(ya),
                svg::num(mid),
                svg::num(yb),
                svg::num(xb),
                svg::num(yb)
            );
        }
        let &(xn, yn) = anchors.last().expect("non-empty");
        let _ = write!(d, " L {} {}", svg::num(xn + 12.0), svg::num(yn));
        let _ = writeln!(
            out,
            r#"<path class="line" data-word="{}" d="{d}" fill="none" stroke="{color}" stroke-width="{}" stroke-linecap="round"/>"#,
            svg::escape(word),
            svg::num(stroke)
        );
        let _ = writeln!(
            out,
            r#"<text class="entry-label" x="{}" y="{}" text-anchor="end" fill="{color}">{}</text>"#,
            svg::num(x0 - 16.0),
            svg::num(y0 + style.font_size / 3.0),
            svg::escape(word)
        );
        let _ = writeln!(
            out,
            r#"<text class="exit-label" x="{}" y="{}" fill="{color}">{}</text>"#,
            svg::num(xn + 16.0),
            svg::num(yn + style.font_size / 3.0),
            svg::escape(word)
        );
    }
    svg::close(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::FieldEmbeddings;

    fn timeline(clusters: &[&[&str]]) -> ClusterTimeline {
        ClusterTimeline {
            target: "t".into(),
            segment_labels: (0..clusters.len()).map(|e| format!("s{e}")).collect(),
            clusters: clusters
                .iter()
                .map(|c| c.iter().map(|w| w.to_string()).collect())
                .collect(),
        }
    }

    fn check_contiguity(tl: &ClusterTimeline, lay: &StorylineLayout) {
        for (e, cluster) in tl.clusters.iter().enumerate() {
            let mut slots: Vec<i64> = cluster.iter().map(|w| lay.lines[w][e].unwrap()).collect();
            slots.sort();
            assert_eq!(slots.last().unwrap() - slots[0], slots.len() as i64 - 1);
            assert_eq!(lay.bands[e], (slots[0], *slots.last().unwrap()));
            for (w, s) in &lay.lines {
                if let Some(slot) = s[e] {
                    if !cluster.contains(w) {
                        assert!(slot < slots[0] - 1 || slot > slots.last().unwrap() + 1, "{w} too close");
                    }
                }
            }
        }
    }

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let x = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }

    /// Minimum crossings over every contiguous ordering of every segment.
    fn exhaustive_optimum(tl: &ClusterTimeline) -> usize {
        let frame = Frame::new(tl);
        let options: Vec<Vec<Vec<usize>>> = (0..frame.segments())
            .map(|e| permutations(&frame.present[e]).into_iter().filter(|o| frame.is_valid(e, o)).collect())
            .collect();
        let mut best = usize::MAX;
        let mut idx = vec![0; options.len()];
        loop {
            let orders: Vec<Vec<usize>> = idx.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect();
            best = best.min(frame.total_crossings(&orders));
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < options[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                return best;
            }
        }
    }

    #[test]
    fn two_lines_swapping_order_cross_once() {
        // b and c each share the band with t but on opposite sides of a:
        // a is above-left of the band in s0 (members t,b) and forced to move.
        let tl = timeline(&[&["t", "a", "b"], &["t", "c"], &["t", "a", "c", "b"], &["t", "b"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        check_contiguity(&tl, &lay);
        assert_eq!(lay.crossings, exhaustive_optimum(&tl));
    }

    #[test]
    fn single_segment_has_no_crossings() {
        let tl = timeline(&[&["t", "a", "b", "c"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        assert_eq!(lay.crossings, 0);
        check_contiguity(&tl, &lay);
    }

    #[test]
    fn swapping_membership_forces_one_crossing() {
        // a leaves the cluster while b joins: a must pass b.
        let tl = timeline(&[&["t", "a"], &["t", "a", "b"], &["t", "b"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        check_contiguity(&tl, &lay);
        assert_eq!(lay.crossings, count_crossings(&lay.lines));

        let two = timeline(&[&["a"], &["b"]]);
        assert_eq!(layout(&two, &StorylineConfig::default()).crossings, 0);
    }

    #[test]
    fn membership_swap_between_two_lines() {
        // Segment 0: cluster {t,a}, b outside. Segment 1: cluster {t,b}, a outside.
        let tl = timeline(&[&["t", "a"], &["t", "b"], &["t", "a", "b"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        check_contiguity(&tl, &lay);
        // The target line can sit between a and b, so nothing has to cross.
        assert_eq!(lay.crossings, 0);
        assert_eq!(lay.crossings, exhaustive_optimum(&tl));
    }

    #[test]
    fn timeline_text_in_slot_order() {
        let tl = timeline(&[&["t", "b", "a"], &["t", "a"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        let text = timeline_text(&tl, &lay);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("s0: "));
        assert_eq!(lines[0].split_whitespace().count(), 4);
        // b's span ends at segment 0
        assert_eq!(lines[1].split_whitespace().count(), 3);
    }

    #[test]
    fn render_single_word() {
        let tl = timeline(&[&["t"], &["t"], &["t"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        assert_eq!(lay.crossings, 0);
        let svg = render_storyline(&tl, &lay, &StorylineStyle::default());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let paths: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("line")).collect();
        assert_eq!(paths.len(), 1);
        // every y coordinate in the path is the same
        let d = paths[0].attribute("d").unwrap();
        let nums: Vec<f64> = d
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect();
        let ys: BTreeSet<String> = nums.chunks(2).map(|p| format!("{:.2}", p[1])).collect();
        assert_eq!(ys.len(), 1);
        assert_eq!(paths[0].attribute("stroke-width"), Some("4.00"));
    }

    #[test]
    fn render_counts_lines_and_is_deterministic() {
        let tl = timeline(&[&["t", "a", "b"], &["t", "b", "c"], &["t", "c", "d", "a"]]);
        let lay = layout(&tl, &StorylineConfig::default());
        let svg = render_storyline(&tl, &lay, &StorylineStyle::default());
        assert_eq!(svg, render_storyline(&tl, &lay, &StorylineStyle::default()));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let count = |c: &str| doc.descendants().filter(|n| n.attribute("class") == Some(c)).count();
        assert_eq!(count("line"), tl.words().len());
        assert_eq!(count("segment-label"), 3);
        assert_eq!(count("band"), 3);
        assert_eq!(count("entry-label"), 5);
    }

    fn seq_from(rows: &[Vec<Vec<f64>>]) -> EmbeddingSequence {
        let n = rows[0].len();
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let snaps = rows
            .iter()
            .enumerate()
            .map(|(e, r)| {
                let flat: Vec<f64> = r.iter().flatten().copied().collect();
                FieldEmbeddings::normalized(format!("seg{e}"), words.clone(), r[0].len(), &flat).unwrap()
            })
            .collect();
        EmbeddingSequence::new(snaps, vec![vec![10; rows.len()]; n]).unwrap()
    }

    /// Query w0 along +x; word i sits at angle angles[i].
    fn at_angles(angles: &[f64]) -> Vec<Vec<f64>> {
        angles.iter().map(|a| vec![a.cos(), a.sin()]).collect()
    }

    #[test]
    fn identical_segments_repeat_cluster() {
        let r = at_angles(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        let s = seq_from(&[r.clone(), r]);
        let cfg = StorylineConfig { m: 2, k: 4, gap: 2 };
        let tl = build_timeline("w0", &s, &cfg).unwrap();
        assert_eq!(tl.clusters[0], tl.clusters[1]);
        assert_eq!(tl.clusters[0], vec!["w0", "w1", "w2"]);
    }

    #[test]
    fn carry_over_rule() {
        // Segment 0 top-4 = {a,b,c,d}; segment 1 top-4 = {e,f,g,h}, top-6 adds a,b.
        let names = ["t", "a", "b", "c", "d", "e", "f", "g", "h", "x", "y"];
        let seg0: Vec<f64> = vec![0.0, 0.1, 0.2, 0.3, 0.4, 1.0, 1.1, 1.2, 1.3, 2.0, 2.1];
        let seg1: Vec<f64> = vec![0.0, 0.5, 0.6, 2.0, 2.1, 0.1, 0.2, 0.3, 0.4, 1.0, 1.1];
        let words: Vec<String> = names.iter().map(|w| w.to_string()).collect();
        let mk = |label: &str, ang: &[f64]| {
            // names are not sorted; index by sorted order
            let mut pairs: Vec<(String, f64)> = words.iter().cloned().zip(ang.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            let flat: Vec<f64> = pairs.iter().flat_map(|(_, a)| [a.cos(), a.sin()]).collect();
            FieldEmbeddings::normalized(label, pairs.into_iter().map(|p| p.0).collect(), 2, &flat).unwrap()
        };
        let s = EmbeddingSequence::new(vec![mk("A", &seg0), mk("B", &seg1)], vec![vec![10, 10]; 11]).unwrap();
        let cfg = StorylineConfig { m: 4, k: 6, gap: 2 };
        let tl = build_timeline("t", &s, &cfg).unwrap();
        assert_eq!(tl.clusters[0], vec!["t", "a", "b", "c", "d"]);
        assert_eq!(tl.clusters[1], vec!["t", "e", "f", "g", "h", "a", "b"]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let r = at_angles(&[0.0, 0.1, 0.2, 0.3]);
        let s = seq_from(&[r.clone(), r]);
        assert!(build_timeline("w0", &s, &StorylineConfig { m: 2, k: 2, gap: 2 }).is_err());
        assert!(build_timeline("w0", &s, &StorylineConfig { m: 1, k: 4, gap: 2 }).is_err());
        assert!(build_timeline("nope", &s, &StorylineConfig { m: 1, k: 2, gap: 2 }).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

        fn random_timeline(seed: u64, words: usize, segments: usize) -> ClusterTimeline {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pool: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
            let clusters = (0..segments)
                .map(|_| {
                    let mut c = vec!["t".to_string()];
                    c.extend(pool.iter().filter(|_| rng.gen_bool(0.4)).cloned());
                    c
                })
                .collect();
            ClusterTimeline {
                target: "t".into(),
                segment_labels: (0..segments).map(|e| format!("s{e}")).collect(),
                clusters,
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]
            #[test]
            fn valid_and_no_worse_than_baseline(seed in any::<u64>(), words in 1usize..10, segments in 1usize..5) {
                let tl = random_timeline(seed, words, segments);
                let cfg = StorylineConfig::default();
                let lay = layout(&tl, &cfg);
                check_contiguity(&tl, &lay);
                prop_assert_eq!(lay.crossings, count_crossings(&lay.lines));
                prop_assert!(lay.crossings <= lexicographic_layout(&tl, &cfg).crossings);
            }
        }
    }
}

//! Mean ± std learning-curve plots as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::skill_library::TransferMode;

use super::aggregate::GroupSummary;
use super::dataset::Variant;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_Y: f64 = 40.0;

fn color(mode: TransferMode) -> &'static str {
    match mode {
        TransferMode::Partial => "#1f77b4",
        TransferMode::Full => "#2ca02c",
        TransferMode::Baseline => "#d62728",
    }
}

/// One figure per (dataset, k, library size) with a curve per transfer mode.
pub fn figures(groups: &[GroupSummary]) -> Vec<(String, String)> {
    let mut panels: BTreeMap<(Variant, usize, usize), Vec<&GroupSummary>> = BTreeMap::new();
    for g in groups {
        panels.entry((g.key.dataset, g.key.k, g.key.library_size)).or_default().push(g);
    }
    panels
        .into_iter()
        .map(|((d, k, n), gs)| {
            let title = format!("dataset {d}, k = {k}, N = {n}");
            (format!("curves_{d}_k{k}_N{n}.svg"), render_svg(&title, &gs))
        })
        .collect()
}

fn nice_bounds(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn render_svg(title: &str, groups: &[&GroupSummary]) -> String {
    let iters = groups.iter().map(|g| g.mean_curve.len()).max().unwrap_or(1).max(1);
    let (lo, hi) = groups
        .iter()
        .flat_map(|g| g.mean_curve.iter().zip(&g.std_curve).flat_map(|(m, s)| [m - s, m + s]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { nice_bounds(lo, hi) } else { (-1.0, 0.0) };

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let x = |i: usize| MARGIN_LEFT + plot_w * if iters == 1 { 0.5 } else { i as f64 / (iters - 1) as f64 };
    let y = |v: f64| MARGIN_Y + plot_h * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, MARGIN_LEFT + plot_w / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
            MARGIN_LEFT - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1</text>"#, x(0), HEIGHT - MARGIN_Y + 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{iters}</text>"#,
        x(iters - 1),
        HEIGHT - MARGIN_Y + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">mean reward</text>"#,
        MARGIN_Y + plot_h / 2.0
    );

    for (row, g) in groups.iter().enumerate() {
        let c = color(g.key.mode);
        let upper: Vec<String> = g
            .mean_curve
            .iter()
            .zip(&g.std_curve)
            .enumerate()
            .map(|(i, (m, s))| format!("{:.2},{:.2}", x(i), y(m + s)))
            .collect();
        let lower: Vec<String> = g
            .mean_curve
            .iter()
            .zip(&g.std_curve)
            .enumerate()
            .rev()
            .map(|(i, (m, s))| format!("{:.2},{:.2}", x(i), y(m - s)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = g.mean_curve.iter().enumerate().map(|(i, m)| format!("{:.2},{:.2}", x(i), y(*m))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, line.join(" "));
        let ly = MARGIN_Y + 14.0 + 18.0 * row as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, g.key.mode);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::aggregate::GroupKey;

    fn group(mode: TransferMode, k: usize) -> GroupSummary {
        GroupSummary {
            key: GroupKey { dataset: Variant::A, mode, k, library_size: 9 },
            num_records: 1,
            mean_curve: vec![-3.0, -2.0, -1.0],
            std_curve: vec![0.5, 0.2, 0.0],
            final_mean: -1.0,
            final_std: 0.0,
            mean_iterations_to_threshold: None,
            mean_initial_reward: -3.0,
            mean_similarity: 0.0,
        }
    }

    #[test]
    fn one_figure_per_panel() {
        let gs = [group(TransferMode::Full, 2), group(TransferMode::Baseline, 2), group(TransferMode::Full, 1)];
        let figs = figures(&gs);
        assert_eq!(figs.len(), 2);
        assert_eq!(figs[1].0, "curves_A_k2_N9.svg");
        let svg = &figs[1].1;
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
    }

    #[test]
    fn flat_curves_render() {
        let mut g = group(TransferMode::Partial, 1);
        g.mean_curve = vec![-1.0];
        g.std_curve = vec![0.0];
        let svg = render_svg("t", &[&g]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}

//! Attention heatmaps as standalone SVG: one column per sample, one row per
//! sentence index, darker cells for larger weights. Shading is normalised
//! per column so the largest weight in a column is black.

use std::fmt::Write;

const CELL: usize = 18;
const LEFT: usize = 40;
const TOP: usize = 30;
const BOTTOM: usize = 90;

pub struct Column<'a> {
    pub label: &'a str,
    pub weights: &'a [f64],
    pub mask: &'a [bool],
}

/// Gray level for a weight relative to its column maximum: 0 = black.
pub fn shade(weight: f64, column_max: f64) -> u8 {
    if column_max <= 0.0 {
        return 255;
    }
    let t = (weight / column_max).clamp(0.0, 1.0);
    (255.0 * (1.0 - t)).round() as u8
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(title: &str, columns: &[Column<'_>]) -> String {
    let rows = columns.iter().map(|c| c.weights.len()).max().unwrap_or(0);
    let width = LEFT + CELL * columns.len() + 10;
    let height = TOP + CELL * rows + BOTTOM;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="16" font-size="12">{}</text>"#, escape(title));
    for r in 0..rows {
        let y = TOP + r * CELL + CELL / 2 + 4;
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, LEFT - 4, r + 1);
    }
    for (j, col) in columns.iter().enumerate() {
        let x = LEFT + j * CELL;
        let max = col
            .weights
            .iter()
            .zip(col.mask)
            .filter(|(_, &m)| m)
            .map(|(&w, _)| w)
            .fold(0.0, f64::max);
        for (i, &w) in col.weights.iter().enumerate() {
            let y = TOP + i * CELL;
            let real = col.mask.get(i).copied().unwrap_or(false);
            let fill = if real {
                let g = shade(w, max);
                format!("rgb({g},{g},{g})")
            } else {
                "none".to_string()
            };
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#bbbbbb" data-row="{i}" data-weight="{w}"/>"##
            );
        }
        let lx = x + CELL / 2;
        let ly = TOP + rows * CELL + 6;
        let _ = writeln!(
            svg,
            r#"<text x="{lx}" y="{ly}" transform="rotate(90 {lx} {ly})">{}</text>"#,
            escape(col.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shading_is_monotone_and_column_normalised() {
        assert_eq!(shade(1.0, 1.0), 0);
        assert_eq!(shade(0.0, 1.0), 255);
        assert_eq!(shade(0.3, 0.3), 0);
        let mut last = 255;
        for k in 0..=10 {
            let s = shade(k as f64 / 10.0, 1.0);
            assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn single_sentence_is_one_dark_cell() {
        let svg = render(
            "a_s1",
            &[Column {
                label: "x<1>",
                weights: &[1.0, 0.0],
                mask: &[true, false],
            }],
        );
        assert_eq!(svg.matches("fill=\"rgb(0,0,0)\"").count(), 1);
        assert_eq!(svg.matches("fill=\"none\"").count(), 1);
        assert!(svg.contains("x&lt;1&gt;"));
    }
}

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::search::{GridCell, Heatmap};

use super::write_bytes;

/// Grid as CSV: `w1,w2` then `p@k,r@k,r@k_InVoc` for each k ascending, all
/// numbers with 6 decimals, rows in the given cell order.
pub fn grid_csv_string(cells: &[GridCell]) -> Result<String> {
    let ks: Vec<usize> = cells
        .first()
        .map(|c| c.report.per_k.keys().copied().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["w1".to_string(), "w2".to_string()];
    for &k in &ks {
        header.extend(MetricKind::ALL.iter().map(|m| m.column(k)));
    }
    let csv_err = |e: csv::Error| Error::contract(format!("csv encoding failed: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for c in cells {
        let mut row = vec![format!("{:.6}", c.w1), format!("{:.6}", c.w2)];
        for &k in &ks {
            let m = c.report.per_k.get(&k).ok_or_else(|| {
                Error::contract(format!("cell ({}, {}) has no k = {k}", c.w1, c.w2))
            })?;
            row.extend(MetricKind::ALL.iter().map(|&kind| format!("{:.6}", m.get(kind))));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::contract(format!("csv flush failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

pub fn save_grid_csv(cells: &[GridCell], path: &Path) -> Result<()> {
    write_bytes(path, grid_csv_string(cells)?.as_bytes())
}

const CELL: usize = 44;
const LEFT: usize = 70;
const TOP: usize = 50;

fn lerp(a: u8, b: u8, t: f64) -> u8 {
    (a as f64 + (b as f64 - a as f64) * t).round() as u8
}

/// Heatmap as SVG: `w2` along x, `w1` along y (increasing upwards), colour
/// linear between the matrix minimum and maximum.
pub fn heatmap_svg_string(h: &Heatmap) -> String {
    let (rows, cols) = (h.w1_values.len(), h.w2_values.len());
    let flat = h.values.iter().flatten().copied();
    let lo = flat.clone().fold(f64::INFINITY, f64::min);
    let hi = flat.fold(f64::NEG_INFINITY, f64::max);
    let width = LEFT + cols * CELL + 20;
    let height = TOP + rows * CELL + 50;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{} (min {:.4}, max {:.4})</text>"#,
        width / 2,
        h.name(),
        if lo.is_finite() { lo } else { 0.0 },
        if hi.is_finite() { hi } else { 0.0 }
    );
    for (i, row) in h.values.iter().enumerate() {
        let y = TOP + (rows - 1 - i) * CELL;
        for (j, &v) in row.iter().enumerate() {
            let x = LEFT + j * CELL;
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let (r, g, b) = (lerp(255, 8, t), lerp(247, 48, t), lerp(188, 107, t));
            let ink = if t > 0.55 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="9" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 3
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.2}</text>"#,
            LEFT - 6,
            y + CELL / 2 + 3,
            h.w1_values[i]
        );
    }
    let axis_y = TOP + rows * CELL;
    for (j, w2) in h.w2_values.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{w2:.2}</text>"#,
            LEFT + j * CELL + CELL / 2,
            axis_y + 14
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">w2</text>"#,
        LEFT + cols * CELL / 2,
        axis_y + 36
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">w1</text>"#,
        TOP + rows * CELL / 2,
        TOP + rows * CELL / 2
    );
    s.push_str("</svg>\n");
    s
}

pub fn save_heatmap_svg(h: &Heatmap, path: &Path) -> Result<()> {
    write_bytes(path, heatmap_svg_string(h).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{LineCounts, MetricsReport, Scope};
    use crate::search::{heatmap_matrix, GridSpec};
    use std::collections::BTreeMap;

    fn cells() -> Vec<GridCell> {
        let vals = GridSpec::default().values().unwrap();
        let mut out = Vec::new();
        for (i, &w1) in vals.iter().enumerate() {
            for (j, &w2) in vals.iter().enumerate() {
                let c = |tp| LineCounts { true_relevant_at_k: tp, retrieved: 30, relevant: 40, relevant_invoc: 20 };
                let per_k = BTreeMap::from([(1, c(i)), (5, c(i + j))]);
                out.push(GridCell { w1, w2, report: MetricsReport::from_counts(Scope::Corpus, per_k) });
            }
        }
        out
    }

    #[test]
    fn csv_shape_and_header() {
        let text = grid_csv_string(&cells()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 122);
        assert_eq!(lines[0], "w1,w2,p@1,r@1,r@1_InVoc,p@5,r@5,r@5_InVoc");
        assert_eq!(lines[1], "0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000");
        assert_eq!(lines[2].split(',').nth(1), Some("0.100000"));
        assert_eq!(text, grid_csv_string(&cells()).unwrap());
    }

    #[test]
    fn svg_is_deterministic() {
        let h = heatmap_matrix(&cells(), MetricKind::RecallInVoc, 5).unwrap();
        let a = heatmap_svg_string(&h);
        assert_eq!(a, heatmap_svg_string(&h));
        assert!(a.starts_with("<svg"));
        assert_eq!(a.matches("<rect x=").count(), 121);
    }
}

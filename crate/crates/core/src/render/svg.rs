use std::fmt::Write;

use super::LayoutRun;

/// Debug SVG of layout runs: a dot at each glyph origin, a tick along the
/// glyph's baseline direction, and the underline bars.
pub fn layout_svg(runs: &[LayoutRun], width: u32, height: u32) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (i, run) in runs.iter().enumerate() {
        let _ = writeln!(s, r#"  <g id="instance-{i}">"#);
        for p in &run.placements {
            let (x, y) = (p.origin.x, p.origin.y);
            let (ex, ey) = (x + p.advance * p.rotation.cos(), y + p.advance * p.rotation.sin());
            let _ = writeln!(s, r#"    <circle cx="{x:.3}" cy="{y:.3}" r="1.5" fill="red"/>"#);
            let _ = writeln!(
                s,
                r#"    <line x1="{x:.3}" y1="{y:.3}" x2="{ex:.3}" y2="{ey:.3}" stroke="blue" stroke-width="0.75"/>"#
            );
        }
        for bar in &run.decorations {
            let pts: Vec<String> = bar.iter().map(|p| format!("{:.3},{:.3}", p.x, p.y)).collect();
            let _ = writeln!(s, r#"    <polygon points="{}" fill="none" stroke="green"/>"#, pts.join(" "));
        }
        let _ = writeln!(s, "  </g>");
    }
    s.push_str("</svg>\n");
    s
}

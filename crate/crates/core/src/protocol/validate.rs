use std::collections::BTreeMap;
use std::fmt;

use super::{angle_in_range, ColorSpec, TextInstance, TextProtocol};

/// A single broken invariant, addressed by a JSON-style field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Returns every invariant violation; an empty list means the protocol is valid.
pub fn validate(p: &TextProtocol) -> Vec<Violation> {
    let mut out = Vec::new();
    if p.canvas_width < 1 {
        out.push(Violation::new("canvas[0]", "canvas width must be at least 1"));
    }
    if p.canvas_height < 1 {
        out.push(Violation::new("canvas[1]", "canvas height must be at least 1"));
    }
    for (i, inst) in p.instances.iter().enumerate() {
        check_instance(&format!("instances[{i}]"), inst, &mut out);
    }

    let mut by_z: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, inst) in p.instances.iter().enumerate() {
        by_z.entry(inst.relational.z_order).or_default().push(i);
    }
    for (z, idx) in by_z.into_iter().filter(|(_, v)| v.len() > 1) {
        let names: Vec<String> = idx.iter().map(|i| format!("instances[{i}]")).collect();
        out.push(Violation::new(
            "relational.z",
            format!("z-order {z} is shared by {}", names.join(" and ")),
        ));
    }
    out
}

fn check_instance(base: &str, inst: &TextInstance, out: &mut Vec<Violation>) {
    let g = &inst.geometry;
    let mut check = |ok: bool, field: &str, msg: String| {
        if !ok {
            out.push(Violation::new(format!("{base}.{field}"), msg));
        }
    };

    check(g.x.is_finite(), "geometry.x", format!("x must be finite, got {}", g.x));
    check(g.y.is_finite(), "geometry.y", format!("y must be finite, got {}", g.y));
    check(g.w.is_finite() && g.w > 0.0, "geometry.w", format!("w must be positive, got {}", g.w));
    check(g.h.is_finite() && g.h > 0.0, "geometry.h", format!("h must be positive, got {}", g.h));
    check(angle_in_range(g.theta), "geometry.theta", format!("theta must be in [0, 2π), got {}", g.theta));

    let b = &g.bending;
    let finite = b.points.iter().all(|p| p.x.is_finite() && p.y.is_finite());
    check(finite, "geometry.bending.p", "control points must be finite".into());
    if b.follow && finite {
        check(
            !b.is_degenerate(),
            "geometry.bending.p",
            "curved text needs a non-degenerate curve (all control points coincide)".into(),
        );
    }

    let a = &inst.appearance;
    check(
        a.font_size.is_finite() && a.font_size > 0.0,
        "appearance.size",
        format!("font size must be positive, got {}", a.font_size),
    );
    check(
        a.stroke_width.is_finite() && a.stroke_width >= 0.0,
        "appearance.stroke_width",
        format!("stroke width must be nonnegative, got {}", a.stroke_width),
    );
    check(
        a.line_height.is_finite() && a.line_height > 0.0,
        "appearance.line_height",
        format!("line height must be positive, got {}", a.line_height),
    );
    check(
        a.char_spacing.is_finite(),
        "appearance.char_spacing",
        format!("char spacing must be finite, got {}", a.char_spacing),
    );
    for (field, c) in [("appearance.fill", &a.fill), ("appearance.stroke_color", &a.stroke_color)] {
        if let ColorSpec::LinearGradient { angle, .. } = c {
            check(
                angle_in_range(*angle),
                &format!("{field}.angle"),
                format!("gradient angle must be in [0, 2π), got {angle}"),
            );
        }
    }
    if let Some(s) = &a.shadow {
        check(
            angle_in_range(s.offset_angle),
            "appearance.shadow.angle",
            format!("shadow angle must be in [0, 2π), got {}", s.offset_angle),
        );
        check(
            s.offset_distance.is_finite() && s.offset_distance >= 0.0,
            "appearance.shadow.distance",
            format!("shadow distance must be nonnegative, got {}", s.offset_distance),
        );
        check(
            s.blur_radius.is_finite() && s.blur_radius >= 0.0,
            "appearance.shadow.blur",
            format!("blur radius must be nonnegative, got {}", s.blur_radius),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{fixtures, Point, ShadowSpec};

    #[test]
    fn valid_fixture_has_no_violations() {
        assert_eq!(validate(&fixtures::two_instances()), vec![]);
    }

    #[test]
    fn duplicate_z_names_both() {
        let mut p = fixtures::two_instances();
        p.instances[1].relational.z_order = 0;
        let v = validate(&p);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("instances[0]") && v[0].message.contains("instances[1]"));
    }

    #[test]
    fn degenerate_curve() {
        let mut p = fixtures::two_instances();
        p.instances[1].geometry.bending.points = [Point::new(3.0, 4.0); 4];
        let v = validate(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "instances[1].geometry.bending.p");

        // A closed loop (p3 == p0) with distinct interior points is fine.
        p.instances[1].geometry.bending.points[1] = Point::new(10.0, 0.0);
        assert!(validate(&p).is_empty());
        // Straight text ignores degenerate control points.
        p.instances[1].geometry.bending = crate::protocol::Bending::straight();
        assert!(validate(&p).is_empty());
    }

    /// Each single-invariant mutation yields exactly one violation.
    #[test]
    fn rejection_completeness() {
        type Mutation = fn(&mut TextProtocol);
        let mutations: &[(&str, Mutation)] = &[
            ("canvas[0]", |p| p.canvas_width = 0),
            ("canvas[1]", |p| p.canvas_height = 0),
            ("geometry.x", |p| p.instances[0].geometry.x = f64::NAN),
            ("geometry.y", |p| p.instances[0].geometry.y = f64::INFINITY),
            ("geometry.w", |p| p.instances[0].geometry.w = 0.0),
            ("geometry.h", |p| p.instances[0].geometry.h = -1.0),
            ("geometry.theta", |p| p.instances[0].geometry.theta = std::f64::consts::TAU),
            ("geometry.theta", |p| p.instances[0].geometry.theta = -0.1),
            ("geometry.bending.p", |p| p.instances[1].geometry.bending.points[2].x = f64::NAN),
            ("appearance.size", |p| p.instances[0].appearance.font_size = 0.0),
            ("appearance.stroke_width", |p| p.instances[0].appearance.stroke_width = -0.5),
            ("appearance.line_height", |p| p.instances[0].appearance.line_height = 0.0),
            ("appearance.char_spacing", |p| p.instances[0].appearance.char_spacing = f64::NAN),
            ("appearance.fill.angle", |p| {
                p.instances[0].appearance.fill = ColorSpec::LinearGradient { stops: [[0; 3]; 2], angle: 9.0 }
            }),
            ("appearance.shadow.angle", |p| {
                p.instances[0].appearance.shadow =
                    Some(ShadowSpec { color: [0; 3], offset_angle: 7.0, offset_distance: 1.0, blur_radius: 1.0 })
            }),
            ("appearance.shadow.distance", |p| {
                p.instances[0].appearance.shadow =
                    Some(ShadowSpec { color: [0; 3], offset_angle: 0.0, offset_distance: -1.0, blur_radius: 1.0 })
            }),
            ("appearance.shadow.blur", |p| {
                p.instances[0].appearance.shadow =
                    Some(ShadowSpec { color: [0; 3], offset_angle: 0.0, offset_distance: 1.0, blur_radius: -2.0 })
            }),
            ("relational.z", |p| p.instances[1].relational.z_order = 0),
        ];
        for (field, m) in mutations {
            let mut p = fixtures::two_instances();
            m(&mut p);
            let v = validate(&p);
            assert_eq!(v.len(), 1, "{field}: {v:?}");
            assert!(v[0].path.ends_with(field), "{field}: {v:?}");
        }
    }
}

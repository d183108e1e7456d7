//! JSON wire format.
//!
//! ```text
//! {"canvas":[W,H],"instances":[{
//!   "geometry":{"x","y","w","h","theta","bending":{"p":[[x,y],[x,y],[x,y],[x,y]],"tau"}},
//!   "semantic":{"text","direction"},
//!   "appearance":{"font","size","fill","stroke_width","stroke_color","shadow",
//!                 "line_height","char_spacing","italic","bold","underline"},
//!   "relational":{"align","z"}}]}
//! ```
//!
//! Colors are `[r,g,b]` with 0–255 channels, or a gradient
//! `{"stops":[[r,g,b],[r,g,b]],"angle":a}`. A shadow is
//! `{"color":[r,g,b],"angle":a,"distance":d,"blur":b}`. `direction` is
//! `"ltr"`/`"rtl"`; `align` is `"left"`/`"center"`/`"right"`/`"justify"`.
//!
//! Optional keys and their defaults: `shadow` (none), `bending` (all-zero
//! control points, tau 0), `bending.tau` (0), `line_height` (1.2),
//! `char_spacing` (0). Unknown keys are rejected.
//!
//! Serialization is canonical: keys are written in the order above, reals use
//! the shortest representation that round-trips, and an absent shadow is
//! omitted.

use serde::{Deserialize, Serialize};

use super::{
    validate, Alignment, Appearance, Bending, ColorSpec, Direction, Geometry, Point, ProtocolError,
    Relational, Rgb, Semantic, ShadowSpec, TextInstance, TextProtocol, Violation,
    DEFAULT_LINE_HEIGHT,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireProtocol {
    canvas: [i64; 2],
    instances: Vec<WireInstance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireInstance {
    geometry: WireGeometry,
    semantic: WireSemantic,
    appearance: WireAppearance,
    relational: WireRelational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireGeometry {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    theta: f64,
    #[serde(default)]
    bending: Option<WireBending>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBending {
    p: [[f64; 2]; 4],
    #[serde(default)]
    tau: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSemantic {
    text: String,
    direction: WireDirection,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum WireDirection {
    Ltr,
    Rtl,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAppearance {
    font: String,
    size: f64,
    fill: WireColor,
    stroke_width: f64,
    stroke_color: WireColor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shadow: Option<WireShadow>,
    #[serde(default)]
    line_height: Option<f64>,
    #[serde(default)]
    char_spacing: Option<f64>,
    italic: bool,
    bold: bool,
    underline: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireColor {
    Solid([i64; 3]),
    Gradient(WireGradient),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireGradient {
    stops: [[i64; 3]; 2],
    angle: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireShadow {
    color: [i64; 3],
    angle: f64,
    distance: f64,
    blur: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRelational {
    align: WireAlign,
    z: i64,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum WireAlign {
    Left,
    Center,
    Right,
    Justify,
}

/// Parses and validates a protocol document.
pub fn parse_protocol(bytes: &[u8]) -> Result<TextProtocol, ProtocolError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ProtocolError::Encoding(e.to_string()))?;
    let wire: WireProtocol = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ProtocolError::Schema(e.to_string()),
        _ => ProtocolError::Encoding(e.to_string()),
    })?;

    let mut conv = Converter::default();
    let protocol = conv.protocol(wire);
    let mut violations = conv.violations;
    violations.extend(validate(&protocol));
    if violations.is_empty() {
        Ok(protocol)
    } else {
        Err(ProtocolError::Range(violations))
    }
}

/// Writes the canonical JSON form. Fails if the protocol does not validate.
pub fn serialize_protocol(p: &TextProtocol) -> Result<String, ProtocolError> {
    let violations = validate(p);
    if !violations.is_empty() {
        return Err(ProtocolError::InvalidProtocol(violations));
    }
    let wire = WireProtocol {
        canvas: [i64::from(p.canvas_width), i64::from(p.canvas_height)],
        instances: p.instances.iter().map(to_wire).collect(),
    };
    Ok(serde_json::to_string(&wire).expect("wire types always serialize"))
}

fn to_wire(inst: &TextInstance) -> WireInstance {
    let g = &inst.geometry;
    let a = &inst.appearance;
    WireInstance {
        geometry: WireGeometry {
            x: g.x,
            y: g.y,
            w: g.w,
            h: g.h,
            theta: g.theta,
            bending: Some(WireBending {
                p: g.bending.points.map(|p| [p.x, p.y]),
                tau: i64::from(g.bending.follow),
            }),
        },
        semantic: WireSemantic {
            text: inst.semantic.text.clone(),
            direction: match inst.semantic.direction {
                Direction::Ltr => WireDirection::Ltr,
                Direction::Rtl => WireDirection::Rtl,
            },
        },
        appearance: WireAppearance {
            font: a.font_id.clone(),
            size: a.font_size,
            fill: color_to_wire(&a.fill),
            stroke_width: a.stroke_width,
            stroke_color: color_to_wire(&a.stroke_color),
            shadow: a.shadow.map(|s| WireShadow {
                color: rgb_to_wire(s.color),
                angle: s.offset_angle,
                distance: s.offset_distance,
                blur: s.blur_radius,
            }),
            line_height: Some(a.line_height),
            char_spacing: Some(a.char_spacing),
            italic: a.italic,
            bold: a.bold,
            underline: a.underline,
        },
        relational: WireRelational {
            align: match inst.relational.alignment {
                Alignment::Left => WireAlign::Left,
                Alignment::Center => WireAlign::Center,
                Alignment::Right => WireAlign::Right,
                Alignment::Justify => WireAlign::Justify,
            },
            z: inst.relational.z_order,
        },
    }
}

fn rgb_to_wire(c: Rgb) -> [i64; 3] {
    c.map(i64::from)
}

fn color_to_wire(c: &ColorSpec) -> WireColor {
    match *c {
        ColorSpec::Solid(rgb) => WireColor::Solid(rgb_to_wire(rgb)),
        ColorSpec::LinearGradient { stops, angle } => {
            WireColor::Gradient(WireGradient { stops: stops.map(rgb_to_wire), angle })
        }
    }
}

/// Wire-to-domain conversion. Values the domain types cannot represent
/// (channels outside 0–255, tau outside {0,1}, canvas sizes outside u32) are
/// recorded as violations and replaced by a harmless placeholder so the
/// remaining invariants can still be checked.
#[derive(Default)]
struct Converter {
    violations: Vec<Violation>,
}

impl Converter {
    fn protocol(&mut self, w: WireProtocol) -> TextProtocol {
        let canvas_width = self.canvas_dim(w.canvas[0], "canvas[0]");
        let canvas_height = self.canvas_dim(w.canvas[1], "canvas[1]");
        let instances = w
            .instances
            .into_iter()
            .enumerate()
            .map(|(i, inst)| self.instance(i, inst))
            .collect();
        TextProtocol { canvas_width, canvas_height, instances }
    }

    fn canvas_dim(&mut self, v: i64, path: &str) -> u32 {
        match u32::try_from(v) {
            Ok(v) => v,
            Err(_) => {
                self.violations.push(Violation::new(path, format!("canvas size {v} is not a positive 32-bit integer")));
                1
            }
        }
    }

    fn instance(&mut self, i: usize, w: WireInstance) -> TextInstance {
        let base = format!("instances[{i}]");
        let g = w.geometry;
        let bending = match g.bending {
            None => Bending::straight(),
            Some(b) => {
                let follow = match b.tau {
                    0 => false,
                    1 => true,
                    t => {
                        self.violations
                            .push(Violation::new(format!("{base}.geometry.bending.tau"), format!("tau must be 0 or 1, got {t}")));
                        false
                    }
                };
                Bending { points: b.p.map(|[x, y]| Point::new(x, y)), follow }
            }
        };
        let a = w.appearance;
        let fill = self.color(a.fill, &format!("{base}.appearance.fill"));
        let stroke_color = self.color(a.stroke_color, &format!("{base}.appearance.stroke_color"));
        let shadow = a.shadow.map(|s| ShadowSpec {
            color: self.rgb(s.color, &format!("{base}.appearance.shadow.color")),
            offset_angle: s.angle,
            offset_distance: s.distance,
            blur_radius: s.blur,
        });
        TextInstance {
            geometry: Geometry { x: g.x, y: g.y, w: g.w, h: g.h, theta: g.theta, bending },
            semantic: Semantic {
                text: w.semantic.text,
                direction: match w.semantic.direction {
                    WireDirection::Ltr => Direction::Ltr,
                    WireDirection::Rtl => Direction::Rtl,
                },
            },
            appearance: Appearance {
                font_id: a.font,
                font_size: a.size,
                fill,
                stroke_width: a.stroke_width,
                stroke_color,
                shadow,
                line_height: a.line_height.unwrap_or(DEFAULT_LINE_HEIGHT),
                char_spacing: a.char_spacing.unwrap_or(0.0),
                italic: a.italic,
                bold: a.bold,
                underline: a.underline,
            },
            relational: Relational {
                alignment: match w.relational.align {
                    WireAlign::Left => Alignment::Left,
                    WireAlign::Center => Alignment::Center,
                    WireAlign::Right => Alignment::Right,
                    WireAlign::Justify => Alignment::Justify,
                },
                z_order: w.relational.z,
            },
        }
    }

    fn rgb(&mut self, c: [i64; 3], path: &str) -> Rgb {
        let mut out = [0u8; 3];
        let mut bad = false;
        for (o, v) in out.iter_mut().zip(c) {
            match u8::try_from(v) {
                Ok(v) => *o = v,
                Err(_) => bad = true,
            }
        }
        if bad {
            self.violations
                .push(Violation::new(path, format!("color channels must be in 0..=255, got {c:?}")));
        }
        out
    }

    fn color(&mut self, c: WireColor, path: &str) -> ColorSpec {
        match c {
            WireColor::Solid(rgb) => ColorSpec::Solid(self.rgb(rgb, path)),
            WireColor::Gradient(g) => {
                let s0 = self.rgb(g.stops[0], &format!("{path}.stops[0]"));
                let s1 = self.rgb(g.stops[1], &format!("{path}.stops[1]"));
                ColorSpec::LinearGradient { stops: [s0, s1], angle: g.angle }
            }
        }
    }
}

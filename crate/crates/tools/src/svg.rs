//! SVG drawing of the measured geometry over the label mask.

use std::fmt::Write;

use aop_core::geometry::Point;
use aop_core::{AopResult, Class, LabelMask};

const CAPTION_HEIGHT: f64 = 14.0;

fn fill(class: Class) -> &'static str {
    match class {
        Class::Ps => "#e3a21a",
        Class::Fh => "#4a90c8",
        Class::Background => "none",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Horizontal pixel runs of `class`, one closed subpath per run.
fn region_path(mask: &LabelMask, class: Class) -> String {
    let mut d = String::new();
    for r in 0..mask.height() {
        let mut c = 0;
        while c < mask.width() {
            if mask.get(r, c) != class.id() {
                c += 1;
                continue;
            }
            let start = c;
            while c < mask.width() && mask.get(r, c) == class.id() {
                c += 1;
            }
            let _ = write!(d, "M{start} {r}h{}v1h-{}z", c - start, c - start);
        }
    }
    d
}

fn header(mask: &LabelMask) -> String {
    let (w, h) = (mask.width(), mask.height());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {}\" width=\"{}\" height=\"{}\">",
        h as f64 + CAPTION_HEIGHT,
        w * 2,
        (h as f64 + CAPTION_HEIGHT) * 2.0
    );
    let _ = writeln!(s, "<!-- viewBox in pixel coordinates: x is the column, y is the row; the y axis points down -->");
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#111\"/>");
    for class in [Class::Ps, Class::Fh] {
        let d = region_path(mask, class);
        if !d.is_empty() {
            let _ = writeln!(s, "<path class=\"{}\" fill=\"{}\" d=\"{d}\"/>", class.name(), fill(class));
        }
    }
    s
}

fn caption(mask: &LabelMask, text: &str) -> String {
    let y = mask.height() as f64 + CAPTION_HEIGHT - 4.0;
    format!("<text class=\"caption\" x=\"2\" y=\"{y}\" font-size=\"10\" fill=\"#000\">{}</text>\n", escape(text))
}

/// Polar point around `center` in the y-down frame.
fn polar(center: Point, radius: f64, angle: f64) -> Point {
    Point::new(center.x + radius * angle.cos(), center.y + radius * angle.sin())
}

/// Mask regions, fitted ellipse, PS axis p1–p3, tangent p3–p4, the angle
/// arc at p3 with its label, and C_AoP in the caption.
pub fn render(mask: &LabelMask, res: &AopResult) -> String {
    let mut s = header(mask);
    let e = &res.ellipse;
    let _ = writeln!(
        s,
        "<ellipse class=\"fh-fit\" cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" transform=\"rotate({} {} {})\" fill=\"none\" stroke=\"#fff\" stroke-width=\"0.8\"/>",
        e.cx,
        e.cy,
        e.a,
        e.b,
        e.theta.to_degrees(),
        e.cx,
        e.cy
    );
    let line = |s: &mut String, class: &str, a: Point, b: Point, color: &str| {
        let _ = writeln!(
            s,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"1\"/>",
            a.x, a.y, b.x, b.y
        );
    };
    line(&mut s, "ps-axis", res.p1, res.p3, "#ff4040");
    line(&mut s, "tangent", res.p3, res.p4, "#40ff40");

    // Arc from the PS ray to the tangent ray, swept through the interior
    // of the angle (at most 180°, so never the large arc).
    let u = res.p1 - res.p3;
    let v = res.p4 - res.p3;
    let (a0, a1) = (u.y.atan2(u.x), v.y.atan2(v.x));
    let radius = (0.3 * res.d13.min(res.d34)).clamp(3.0, 25.0);
    let start = polar(res.p3, radius, a0);
    let end = polar(res.p3, radius, a1);
    let sweep = if u.cross(v) >= 0.0 { 1 } else { 0 };
    let _ = writeln!(
        s,
        "<path class=\"aop-arc\" d=\"M{} {} A{radius} {radius} 0 0 {sweep} {} {}\" fill=\"none\" stroke=\"#ffff40\" stroke-width=\"0.8\"/>",
        start.x, start.y, end.x, end.y
    );
    let mid = {
        let bis = u * (1.0 / u.norm()) + v * (1.0 / v.norm());
        let ang = if bis.norm() > 1e-9 { bis.y.atan2(bis.x) } else { a0 + if sweep == 1 { 1.0 } else { -1.0 } * std::f64::consts::FRAC_PI_2 };
        polar(res.p3, radius + 6.0, ang)
    };
    let _ = writeln!(
        s,
        "<text class=\"aop-label\" x=\"{}\" y=\"{}\" font-size=\"8\" fill=\"#ffff40\" text-anchor=\"middle\">{:.1}°</text>",
        mid.x, mid.y, res.aop_deg
    );
    s.push_str(&caption(mask, &format!("AoP {:.2}°, C_AoP {:.3}", res.aop_deg, res.c_aop)));
    s.push_str("</svg>\n");
    s
}

/// Mask regions only, with the failure reason in the caption.
pub fn render_failure(mask: &LabelMask, reason: &str) -> String {
    let mut s = header(mask);
    s.push_str(&caption(mask, &format!("no measurement: {reason}")));
    s.push_str("</svg>\n");
    s
}

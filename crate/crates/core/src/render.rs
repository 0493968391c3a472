//! Static SVG output: the ICM circuit drawn left to right (initialisation
//! column, CNOT array, measurement column) above an isometric wireframe of
//! its geometry.

use std::fmt::Write;

use crate::circuit::{order_measurements, Circuit, GateOp, InitBasis, MeasBasis};
use crate::geometry::{Coord, GeometryDesc, ParityConvention, StateType, StrandClass};

const WIRE_GAP: f64 = 24.0;
const COL: f64 = 22.0;
const MARGIN: f64 = 40.0;

fn init_label(b: InitBasis) -> &'static str {
    match b {
        InitBasis::Zero => "|0⟩",
        InitBasis::Plus => "|+⟩",
        InitBasis::A => "|A⟩",
        InitBasis::Y => "|Y⟩",
        InitBasis::Empty => "in",
    }
}

fn meas_label(m: &MeasBasis) -> &'static str {
    match m {
        MeasBasis::X => "X",
        MeasBasis::Z => "Z",
        MeasBasis::CondZX(_) => "ZX",
        MeasBasis::CondXZ(_) => "XZ",
        MeasBasis::A => "A",
        MeasBasis::Y => "Y",
        MeasBasis::Empty => "out",
    }
}

/// Circuit panel; returns its height.
fn circuit_panel(s: &mut String, c: &Circuit, top: f64) -> (f64, f64) {
    let n = c.qubit_count();
    let x_first = MARGIN + 40.0;
    let x_end = x_first + COL * (c.gates.len() as f64 + 1.0);
    let y = |i: usize| top + WIRE_GAP * (i as f64 + 0.5);
    for q in c.qubits() {
        let yq = y(q.index());
        let _ = writeln!(
            s,
            r#"<line x1="{x_first}" y1="{yq}" x2="{x_end}" y2="{yq}" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{} {}</text>"#,
            x_first - 4.0,
            yq + 4.0,
            q,
            init_label(c.init(q))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            x_end + 4.0,
            yq + 4.0,
            meas_label(c.measurement(q))
        );
    }
    for (k, g) in c.gates.iter().enumerate() {
        let x = x_first + COL * (k as f64 + 1.0);
        match g {
            GateOp::Cnot { control, target } => {
                let (yc, yt) = (y(control.index()), y(target.index()));
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" y1="{yc}" x2="{x}" y2="{yt}" stroke="black"/>"#
                );
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{yc}" r="3" fill="black"/>"#);
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x}" cy="{yt}" r="7" fill="none" stroke="black"/>"#
                );
            }
            GateOp::Named { name, qubits } => {
                for q in qubits {
                    let yq = y(q.index());
                    let _ = writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="18" height="16" fill="white" stroke="black"/><text x="{x}" y="{}" font-size="8" text-anchor="middle">{}</text>"#,
                        x - 9.0,
                        yq - 8.0,
                        yq + 3.0,
                        escape(name)
                    );
                }
            }
        }
    }
    if let Ok(order) = order_measurements(c) {
        let list: Vec<String> = order.iter().map(|(q, _)| q.to_string()).collect();
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{}" font-size="10">measurement order: {}</text>"#,
            top + WIRE_GAP * n as f64 + 14.0,
            list.join(" ")
        );
    }
    (WIRE_GAP * n as f64 + 24.0, x_end + 40.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Isometric projection of a lattice point.
fn iso(p: Coord, scale: f64) -> (f64, f64) {
    let (x, y, z) = (p[0] as f64, p[1] as f64, p[2] as f64);
    let c = 30f64.to_radians().cos();
    ((x - y) * c * scale, ((x + y) * 0.5 - z) * scale)
}

fn geometry_panel(s: &mut String, g: &GeometryDesc, top: f64) -> (f64, f64) {
    if g.points.is_empty() {
        return (0.0, 0.0);
    }
    let scale = 6.0;
    let proj: Vec<(f64, f64)> = g.points.iter().map(|p| iso(*p, scale)).collect();
    let min_x = proj.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let min_y = proj.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_x = proj.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let max_y = proj.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let at = |id: u32| {
        let (x, y) = proj[id as usize - 1];
        (MARGIN + x - min_x, top + y - min_y)
    };
    let classes = g.segment_classes(ParityConvention::default());
    for ((a, b), cls) in g.segments.iter().zip(classes) {
        let (x1, y1) = at(*a);
        let (x2, y2) = at(*b);
        let colour = match cls {
            Some(StrandClass::Dual) => "#1f5fbf",
            _ => "#bf3f1f",
        };
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{colour}" stroke-width="1.5"/>"#
        );
    }
    for c in &g.config {
        let (x, y) = at(c.point);
        let fill = match c.state {
            StateType::Configurable => "red",
            _ => "gold",
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{fill}"/>"#
        );
    }
    (max_y - min_y + 20.0, MARGIN + max_x - min_x + 20.0)
}

/// Renders the circuit and (optionally) its geometry into one SVG document.
pub fn render_svg(c: &Circuit, g: Option<&GeometryDesc>) -> String {
    let mut body = String::new();
    let (h1, w1) = circuit_panel(&mut body, c, MARGIN);
    let (h2, w2) = match g {
        Some(g) => geometry_panel(&mut body, g, MARGIN + h1 + 20.0),
        None => (0.0, 0.0),
    };
    let width = w1.max(w2) + MARGIN;
    let height = MARGIN * 2.0 + h1 + 20.0 + h2;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

//! File emission: deterministic CSV, minimal self-contained SVG, and JSON
//! helpers shared by the CLI subcommands.
//!
//! Floats are always formatted with 17 significant digits so identical
//! inputs produce byte-identical outputs.

use crate::manifolds::{HomoclinicCandidate, ManifoldCut};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// Shortest round-trip representation capped at 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

/// Write contour polylines as `x,y,loop_id` rows.
pub fn contours_csv(loops: &[Vec<(f64, f64)>]) -> String {
    let mut s = String::from("x,y,loop_id\n");
    for (id, lp) in loops.iter().enumerate() {
        for &(x, y) in lp {
            let _ = writeln!(s, "{},{},{id}", fmt_f64(x), fmt_f64(y));
        }
    }
    s
}

/// Write manifold cuts as `theta,cut_index,x,xdot,direction` rows.
pub fn cuts_csv(cuts: &[ManifoldCut]) -> String {
    let mut s = String::from("theta,cut_index,x,xdot,direction\n");
    for c in cuts {
        for (th, ev) in &c.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_f64(*th),
                c.cut_index,
                fmt_f64(ev.state.x),
                fmt_f64(ev.state.vx),
                ev.direction
            );
        }
    }
    s
}

/// Level-set samples as `r,R` rows.
pub fn level_set_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("r,R\n");
    for &(r, big_r) in points {
        let _ = writeln!(s, "{},{}", fmt_f64(r), fmt_f64(big_r));
    }
    s
}

pub fn candidates_json(cands: &[HomoclinicCandidate]) -> serde_json::Value {
    serde_json::json!(cands)
}

/// A minimal standalone SVG scene: polylines and scatter points in data
/// coordinates, with the viewport fitted to the data.
pub struct SvgScene {
    width: f64,
    height: f64,
    polylines: Vec<(Vec<(f64, f64)>, String)>,
    points: Vec<((f64, f64), String)>,
}

impl SvgScene {
    pub fn new(width: f64, height: f64) -> Self {
        SvgScene { width, height, polylines: Vec::new(), points: Vec::new() }
    }

    pub fn add_polyline(&mut self, pts: Vec<(f64, f64)>, color: &str) {
        self.polylines.push((pts, color.to_string()));
    }

    pub fn add_point(&mut self, p: (f64, f64), color: &str) {
        self.points.push((p, color.to_string()));
    }

    fn data_bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        let mut feed = |&(x, y): &(f64, f64)| {
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
            b.2 = b.2.min(y);
            b.3 = b.3.max(y);
        };
        for (pl, _) in &self.polylines {
            pl.iter().for_each(&mut feed);
        }
        for (p, _) in &self.points {
            feed(p);
        }
        if b.0 > b.1 {
            b = (0.0, 1.0, 0.0, 1.0);
        }
        if b.0 == b.1 {
            b.0 -= 0.5;
            b.1 += 0.5;
        }
        if b.2 == b.3 {
            b.2 -= 0.5;
            b.3 += 0.5;
        }
        b
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.data_bounds();
        let pad = 0.05;
        let (dx, dy) = (x1 - x0, y1 - y0);
        let (x0, x1) = (x0 - pad * dx, x1 + pad * dx);
        let (y0, y1) = (y0 - pad * dy, y1 + pad * dy);
        let sx = self.width / (x1 - x0);
        let sy = self.height / (y1 - y0);
        let map = |(x, y): (f64, f64)| ((x - x0) * sx, self.height - (y - y0) * sy);

        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
             viewBox=\"0 0 {w} {h}\">\n",
            w = self.width,
            h = self.height
        );
        // axes through the origin when visible
        if x0 < 0.0 && x1 > 0.0 {
            let (ax, _) = map((0.0, 0.0));
            let _ = writeln!(
                s,
                "<line x1=\"{ax:.2}\" y1=\"0\" x2=\"{ax:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-width=\"0.5\"/>",
                self.height
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let (_, ay) = map((0.0, 0.0));
            let _ = writeln!(
                s,
                "<line x1=\"0\" y1=\"{ay:.2}\" x2=\"{:.2}\" y2=\"{ay:.2}\" stroke=\"#999\" stroke-width=\"0.5\"/>",
                self.width
            );
        }
        for (pl, color) in &self.polylines {
            let pts: Vec<String> = pl
                .iter()
                .map(|&p| {
                    let (px, py) = map(p);
                    format!("{px:.3},{py:.3}")
                })
                .collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1\"/>",
                pts.join(" ")
            );
        }
        for (p, color) in &self.points {
            let (px, py) = map(*p);
            let _ = writeln!(s, "<circle cx=\"{px:.3}\" cy=\"{py:.3}\" r=\"1.2\" fill=\"{color}\"/>");
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_deterministic() {
        assert_eq!(fmt_f64(1.0 / 3.0), fmt_f64(1.0 / 3.0));
        assert_eq!(fmt_f64(0.1), "1.00000000000000006e-1");
        // 17 significant digits round-trip every double exactly
        for &v in &[std::f64::consts::PI, 1.925437, -0.00270963048924955] {
            let parsed: f64 = fmt_f64(v)
                .parse()
                .unwrap();
            assert_eq!(parsed, v);
        }
    }

    #[test]
    fn csv_shapes() {
        let csv = contours_csv(&[vec![(0.0, 1.0), (2.0, 3.0)], vec![(4.0, 5.0)]]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,loop_id");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(",1"));
    }

    #[test]
    fn svg_renders_valid_envelope() {
        let mut scene = SvgScene::new(400.0, 300.0);
        scene.add_polyline(vec![(-1.0, -1.0), (1.0, 1.0)], "#1f77b4");
        scene.add_point((0.5, -0.5), "#d62728");
        let svg = scene.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("<circle"));
        // deterministic
        assert_eq!(svg, scene.render());
    }
}

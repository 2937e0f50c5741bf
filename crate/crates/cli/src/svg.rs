//! Static SVG plots: fixed canvas, linear axes with rounded tick steps,
//! data-space shapes clipped to the plot area. Hand-rolled so the output
//! depends on nothing but float formatting, which keeps reruns
//! byte-identical.

use std::fmt::Write as _;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

enum Shape {
    Line {
        points: Vec<(f64, f64)>,
        color: String,
        width: f64,
        dashed: bool,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        fill: String,
    },
    Dots {
        points: Vec<(f64, f64)>,
        color: String,
        radius: f64,
    },
}

pub struct Plot {
    header: String,
    title: String,
    x_label: String,
    y_label: String,
    width: f64,
    height: f64,
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
    note: Option<String>,
    shapes: Vec<Shape>,
}

impl Plot {
    pub fn new(header: &str, title: &str, x_label: &str, y_label: &str) -> Plot {
        Plot {
            header: header.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 640.0,
            height: 440.0,
            x_range: None,
            y_range: None,
            note: None,
            shapes: Vec::new(),
        }
    }

    pub fn sized(mut self, width: f64, height: f64) -> Plot {
        self.width = width;
        self.height = height;
        self
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Plot {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Plot {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.note = Some(text.into());
    }

    pub fn line(&mut self, points: Vec<(f64, f64)>, color: &str) {
        self.styled_line(points, color, 1.3, false);
    }

    pub fn styled_line(&mut self, points: Vec<(f64, f64)>, color: &str, width: f64, dashed: bool) {
        if points.len() > 1 {
            self.shapes.push(Shape::Line {
                points,
                color: color.into(),
                width,
                dashed,
            });
        }
    }

    pub fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, fill: &str) {
        self.shapes.push(Shape::Rect {
            x0,
            y0,
            x1,
            y1,
            fill: fill.into(),
        });
    }

    pub fn dots(&mut self, points: Vec<(f64, f64)>, color: &str, radius: f64) {
        if !points.is_empty() {
            self.shapes.push(Shape::Dots {
                points,
                color: color.into(),
                radius,
            });
        }
    }

    fn data_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        let mut feed = |x: f64, y: f64| {
            if x.is_finite() {
                xs = (xs.0.min(x), xs.1.max(x));
            }
            if y.is_finite() {
                ys = (ys.0.min(y), ys.1.max(y));
            }
        };
        for shape in &self.shapes {
            match shape {
                Shape::Line { points, .. } | Shape::Dots { points, .. } => {
                    for &(x, y) in points {
                        feed(x, y);
                    }
                }
                Shape::Rect { x0, y0, x1, y1, .. } => {
                    feed(*x0, *y0);
                    feed(*x1, *y1);
                }
            }
        }
        (pad(xs), pad(ys))
    }

    pub fn render(&self) -> String {
        let (xr, yr) = {
            let auto = self.data_bounds();
            (self.x_range.unwrap_or(auto.0), self.y_range.unwrap_or(auto.1))
        };
        let (ml, mr, mt, mb) = (66.0, 14.0, 36.0, 48.0);
        let pw = self.width - ml - mr;
        let ph = self.height - mt - mb;
        let px = |x: f64| ml + pw * (x - xr.0) / (xr.1 - xr.0);
        let py = |y: f64| mt + ph * (1.0 - (y - yr.0) / (yr.1 - yr.0));

        let mut s = String::new();
        let _ = writeln!(s, "<!-- {} -->", comment_safe(&self.header));
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
             viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">",
            w = self.width,
            h = self.height
        );
        let _ = writeln!(
            s,
            "<rect width=\"{:.0}\" height=\"{:.0}\" fill=\"#ffffff\"/>",
            self.width, self.height
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" \
             fill=\"#222222\">{}</text>",
            ml + pw / 2.0,
            escape(&self.title)
        );

        let (xticks, xstep) = ticks(xr.0, xr.1);
        let (yticks, ystep) = ticks(yr.0, yr.1);
        for &t in &xticks {
            let x = px(t);
            let _ = writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"#dddddd\"/>",
                mt,
                mt + ph
            );
            let _ = writeln!(
                s,
                "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\" \
                 fill=\"#222222\">{}</text>",
                mt + ph + 16.0,
                tick_label(t, xstep)
            );
        }
        for &t in &yticks {
            let y = py(t);
            let _ = writeln!(
                s,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"#dddddd\"/>",
                ml,
                ml + pw
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\" \
                 fill=\"#222222\">{}</text>",
                ml - 6.0,
                y + 4.0,
                tick_label(t, ystep)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\" \
             fill=\"#222222\">{}</text>",
            ml + pw / 2.0,
            self.height - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            "<text transform=\"translate(16,{:.2}) rotate(-90)\" text-anchor=\"middle\" \
             font-size=\"12\" fill=\"#222222\">{}</text>",
            mt + ph / 2.0,
            escape(&self.y_label)
        );
        if let Some(note) = &self.note {
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\" \
                 fill=\"#555555\">{}</text>",
                ml + pw - 6.0,
                mt + 16.0,
                escape(note)
            );
        }

        let _ = writeln!(
            s,
            "<clipPath id=\"plotarea\"><rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" \
             height=\"{:.2}\"/></clipPath>",
            ml, mt, pw, ph
        );
        let _ = writeln!(s, "<g clip-path=\"url(#plotarea)\">");
        for shape in &self.shapes {
            match shape {
                Shape::Rect { x0, y0, x1, y1, fill } => {
                    let xa = px(*x0).min(px(*x1));
                    let ya = py(*y0).min(py(*y1));
                    let _ = writeln!(
                        s,
                        "<rect x=\"{xa:.2}\" y=\"{ya:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                         fill=\"{fill}\"/>",
                        (px(*x1) - px(*x0)).abs(),
                        (py(*y1) - py(*y0)).abs(),
                    );
                }
                Shape::Line { points, color, width, dashed } => {
                    let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
                    let _ = write!(
                        s,
                        "<polyline fill=\"none\" stroke=\"{color}\" \
                         stroke-width=\"{width:.1}\"{dash} points=\""
                    );
                    for (i, &(x, y)) in points.iter().enumerate() {
                        let sep = if i == 0 { "" } else { " " };
                        let _ = write!(s, "{sep}{:.2},{:.2}", px(x), py(y));
                    }
                    let _ = writeln!(s, "\"/>");
                }
                Shape::Dots { points, color, radius } => {
                    for &(x, y) in points {
                        let _ = writeln!(
                            s,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius:.1}\" \
                             fill=\"{color}\"/>",
                            px(x),
                            py(y)
                        );
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" \
             stroke=\"#444444\"/>",
            ml, mt, pw, ph
        );
        s.push_str("</svg>\n");
        s
    }
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let margin = 0.05 * (hi - lo);
    (lo - margin, hi + margin)
}

/// Tick positions at multiples of a 1/2/5 step, and the step itself.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm <= 1.0 {
            1.0
        } else if norm <= 2.0 {
            2.0
        } else if norm <= 5.0 {
            5.0
        } else {
            10.0
        };
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs();
    if mag >= 1e5 || mag < 1e-4 {
        return format!("{v:.1e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// "--" terminates an XML comment early; collapse it.
fn comment_safe(text: &str) -> String {
    let mut t = text.to_string();
    while t.contains("--") {
        t = t.replace("--", "-");
    }
    t
}

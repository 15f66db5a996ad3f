//! Minimal static SVG plotting: polyline charts (optionally log-log),
//! vertical markers, and grouped bar histograms. No external styling; the
//! output depends only on the data.

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

pub const PALETTE: [&str; 6] =
    ["#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d68910", "#16a085"];

pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Vertical reference lines at these x positions.
    pub markers: Vec<f64>,
}

impl LineChart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> LineChart {
        LineChart {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn add_series(&mut self, label: &str, points: Vec<(f64, f64)>) {
        let color = PALETTE[self.series.len() % PALETTE.len()].to_string();
        self.series.push(Series { label: label.to_string(), color, points, dashed: false });
    }

    pub fn add_series_dashed(&mut self, label: &str, points: Vec<(f64, f64)>) {
        let color = PALETTE[self.series.len() % PALETTE.len()].to_string();
        self.series.push(Series { label: label.to_string(), color, points, dashed: true });
    }

    fn tx(&self, x: f64) -> f64 {
        if self.log_x {
            x.ln()
        } else {
            x
        }
    }

    fn ty(&self, y: f64) -> f64 {
        if self.log_y {
            y.ln()
        } else {
            y
        }
    }

    pub fn render(&self) -> String {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if (self.log_x && x <= 0.0) || (self.log_y && y <= 0.0) {
                    continue;
                }
                xs.push(self.tx(x));
                ys.push(self.ty(y));
            }
        }
        for &m in &self.markers {
            xs.push(self.tx(m));
        }
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut out = svg_header(&self.title);
        axes(&mut out, &self.x_label, &self.y_label);

        // ticks: five per axis at nice positions in transformed space
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let lx = if self.log_x { fx.exp() } else { fx };
            let ly = if self.log_y { fy.exp() } else { fy };
            out.push_str(&format!(
                "<line x1='{:.1}' y1='{:.1}' x2='{:.1}' y2='{:.1}' stroke='#999' stroke-width='0.5'/>\n",
                px(fx), HEIGHT - MARGIN_B, px(fx), HEIGHT - MARGIN_B + 5.0
            ));
            out.push_str(&format!(
                "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='middle'>{}</text>\n",
                px(fx), HEIGHT - MARGIN_B + 18.0, tick_label(lx)
            ));
            out.push_str(&format!(
                "<line x1='{:.1}' y1='{:.1}' x2='{:.1}' y2='{:.1}' stroke='#999' stroke-width='0.5'/>\n",
                MARGIN_L - 5.0, py(fy), MARGIN_L, py(fy)
            ));
            out.push_str(&format!(
                "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='end'>{}</text>\n",
                MARGIN_L - 8.0, py(fy) + 4.0, tick_label(ly)
            ));
        }

        for &m in &self.markers {
            let x = px(self.tx(m));
            out.push_str(&format!(
                "<line x1='{x:.1}' y1='{:.1}' x2='{x:.1}' y2='{:.1}' stroke='#888' stroke-width='1' stroke-dasharray='2,3'/>\n",
                MARGIN_T, HEIGHT - MARGIN_B
            ));
        }

        for s in &self.series {
            let mut d = String::new();
            let mut first = true;
            for &(x, y) in &s.points {
                if (self.log_x && x <= 0.0) || (self.log_y && y <= 0.0) {
                    continue;
                }
                let cmd = if first { 'M' } else { 'L' };
                first = false;
                d.push_str(&format!("{cmd}{:.2},{:.2} ", px(self.tx(x)), py(self.ty(y))));
            }
            let dash = if s.dashed { " stroke-dasharray='6,4'" } else { "" };
            out.push_str(&format!(
                "<path d='{d}' fill='none' stroke='{}' stroke-width='1.6'{dash}/>\n",
                s.color
            ));
        }

        legend(&mut out, self.series.iter().map(|s| (s.label.as_str(), s.color.as_str())));
        out.push_str("</svg>\n");
        out
    }
}

pub struct BarGroup {
    pub label: String,
    pub color: String,
    /// (bin, value) pairs.
    pub bars: Vec<(f64, f64)>,
}

pub struct BarChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub groups: Vec<BarGroup>,
}

impl BarChart {
    pub fn render(&self) -> String {
        let mut bins: Vec<f64> = Vec::new();
        let mut vmax = 0.0f64;
        for g in &self.groups {
            for &(b, v) in &g.bars {
                if !bins.iter().any(|&x| (x - b).abs() < 1e-12) {
                    bins.push(b);
                }
                vmax = vmax.max(v);
            }
        }
        bins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = bins.len().max(1);
        let slot = (WIDTH - MARGIN_L - MARGIN_R) / n as f64;
        let sub = slot * 0.8 / self.groups.len().max(1) as f64;
        let py = |v: f64| HEIGHT - MARGIN_B - v / vmax.max(1e-300) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut out = svg_header(&self.title);
        axes(&mut out, &self.x_label, &self.y_label);
        for (bi, &b) in bins.iter().enumerate() {
            let x = MARGIN_L + bi as f64 * slot + slot / 2.0;
            out.push_str(&format!(
                "<text x='{x:.1}' y='{:.1}' font-size='10' text-anchor='middle'>{}</text>\n",
                HEIGHT - MARGIN_B + 16.0,
                tick_label(b)
            ));
        }
        for i in 0..=4 {
            let v = vmax * i as f64 / 4.0;
            out.push_str(&format!(
                "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='end'>{}</text>\n",
                MARGIN_L - 8.0,
                py(v) + 4.0,
                tick_label(v)
            ));
        }
        for (gi, g) in self.groups.iter().enumerate() {
            for &(b, v) in &g.bars {
                let bi = bins.iter().position(|&x| (x - b).abs() < 1e-12).unwrap();
                let x = MARGIN_L + bi as f64 * slot + slot * 0.1 + gi as f64 * sub;
                out.push_str(&format!(
                    "<rect x='{x:.1}' y='{:.1}' width='{sub:.1}' height='{:.1}' fill='{}'/>\n",
                    py(v),
                    (HEIGHT - MARGIN_B - py(v)).max(0.0),
                    g.color
                ));
            }
        }
        legend(&mut out, self.groups.iter().map(|g| (g.label.as_str(), g.color.as_str())));
        out.push_str("</svg>\n");
        out
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{HEIGHT}' \
         viewBox='0 0 {WIDTH} {HEIGHT}'>\n\
         <rect width='100%' height='100%' fill='white'/>\n\
         <text x='{:.1}' y='22' font-size='15' text-anchor='middle' font-family='sans-serif'>{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    )
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<line x1='{MARGIN_L}' y1='{MARGIN_T}' x2='{MARGIN_L}' y2='{:.1}' stroke='black'/>\n\
         <line x1='{MARGIN_L}' y1='{:.1}' x2='{:.1}' y2='{:.1}' stroke='black'/>\n",
        HEIGHT - MARGIN_B,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    out.push_str(&format!(
        "<text x='{:.1}' y='{:.1}' font-size='12' text-anchor='middle'>{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        xml_escape(x_label)
    ));
    out.push_str(&format!(
        "<text x='16' y='{:.1}' font-size='12' text-anchor='middle' transform='rotate(-90 16 {:.1})'>{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        xml_escape(y_label)
    ));
}

fn legend<'a>(out: &mut String, entries: impl Iterator<Item = (&'a str, &'a str)>) {
    let mut y = MARGIN_T + 10.0;
    for (label, color) in entries {
        out.push_str(&format!(
            "<rect x='{:.1}' y='{:.1}' width='14' height='4' fill='{color}'/>\n\
             <text x='{:.1}' y='{:.1}' font-size='11'>{}</text>\n",
            WIDTH - 190.0,
            y - 4.0,
            WIDTH - 172.0,
            y,
            xml_escape(label)
        ));
        y += 16.0;
    }
}

fn span(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.04;
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

use std::fmt::Write as _;

use super::{ChartData, ColorBucket, ReportError, Scale};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 40.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;
const MAX_RADIUS: f64 = 40.0;

const RED: &str = "#d62728";
const BLUE: &str = "#1f77b4";

/// Axis range shared by both axes. Values outside it are clamped to the edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLimits {
    pub min: f64,
    pub max: f64,
}

impl AxisLimits {
    pub fn default_for(scale: Scale) -> Self {
        match scale {
            Scale::Log => Self { min: 0.001, max: 1.0 },
            Scale::Linear => Self { min: 0.0, max: 1.0 },
        }
    }

    fn validate(&self, scale: Scale) -> Result<(), ReportError> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && self.min < self.max
            && (scale == Scale::Linear || self.min > 0.0);
        if ok {
            Ok(())
        } else {
            Err(ReportError::BadLimits {
                min: self.min,
                max: self.max,
                scale,
            })
        }
    }

    /// Position of `v` in [0, 1] along the axis.
    fn fraction(&self, scale: Scale, v: f64) -> f64 {
        let v = v.clamp(self.min, self.max);
        match scale {
            Scale::Log => (v.log10() - self.min.log10()) / (self.max.log10() - self.min.log10()),
            Scale::Linear => (v - self.min) / (self.max - self.min),
        }
    }

    fn ticks(&self, scale: Scale) -> Vec<f64> {
        match scale {
            Scale::Log => {
                let lo = self.min.log10().ceil() as i32;
                let hi = self.max.log10().floor() as i32;
                (lo..=hi).map(|e| 10f64.powi(e)).collect()
            }
            Scale::Linear => (0..=5)
                .map(|i| self.min + (self.max - self.min) * f64::from(i) / 5.0)
                .collect(),
        }
    }
}

fn tick_label(v: f64) -> String {
    let percent = v * 100.0;
    if percent >= 1.0 || percent == 0.0 {
        format!("{}%", trim_float(percent, 1))
    } else {
        format!("{}%", trim_float(percent, 3))
    }
}

fn trim_float(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static bubble chart: one circle per datum, radius proportional to the
/// square root of the article count.
pub fn emit_svg(chart: &ChartData, limits: AxisLimits) -> Result<String, ReportError> {
    if chart.data.is_empty() {
        return Err(ReportError::EmptyChart);
    }
    limits.validate(chart.scale)?;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |v: f64| MARGIN_LEFT + limits.fraction(chart.scale, v) * plot_w;
    let py = |v: f64| MARGIN_TOP + (1.0 - limits.fraction(chart.scale, v)) * plot_h;
    let max_size = chart.data.iter().map(|d| d.size).max().unwrap_or(0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let _ = writeln!(svg, r##"<g class="ticks" stroke="#cccccc">"##);
    let ticks = limits.ticks(chart.scale);
    for &t in &ticks {
        let (x, y) = (px(t), py(t));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{:.2}"/>"#,
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#,
            MARGIN_LEFT + plot_w
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="tick-labels" fill="black">"#);
    for &t in &ticks {
        let label = tick_label(t);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            px(t),
            MARGIN_TOP + plot_h + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            MARGIN_LEFT - 8.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Related articles share ({} scale)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        chart.scale
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">Related articles views share ({} scale)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        chart.scale
    );

    // Largest bubbles first so small ones stay visible.
    let mut order: Vec<_> = chart.data.iter().collect();
    order.sort_by(|a, b| b.size.cmp(&a.size).then_with(|| a.lang.cmp(&b.lang)));
    let _ = writeln!(
        svg,
        r#"<g class="bubbles" fill-opacity="0.6" stroke="black" stroke-width="0.5">"#
    );
    for d in &order {
        let r = if max_size == 0 {
            0.0
        } else {
            MAX_RADIUS * (d.size as f64 / max_size as f64).sqrt()
        };
        let fill = match d.color {
            ColorBucket::Red => RED,
            ColorBucket::Blue => BLUE,
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="{fill}"><title>{}</title></circle>"#,
            px(d.x),
            py(d.y),
            escape(&d.lang)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="labels" text-anchor="middle" fill="black">"#);
    for d in &order {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            px(d.x),
            py(d.y) + 4.0,
            escape(&d.lang)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

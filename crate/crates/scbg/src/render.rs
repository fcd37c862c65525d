//! SVG figure of one scenario: the map, both histories, A's ground-truth
//! future and B's generated future at several courtesy quantiles.

use std::fmt::Write as _;

use scbg_core::courtesy::{courtesy_values, RewardSpec};
use scbg_core::predictor::PredictorModel;
use scbg_core::range::{quantile_to_courtesy, RangeModel};
use scbg_core::scbg::GeneratorModel;
use scbg_core::types::Point;
use scbg_core::Scenario;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 20.0;
const LEGEND_WIDTH: f64 = 230.0;
const RAMP: [[f64; 3]; 2] = [[44.0, 123.0, 182.0], [215.0, 25.0, 28.0]];

/// One generated trajectory of the figure.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedQuantile {
    pub quantile: f64,
    /// Courtesy fed to the generator.
    pub commanded: f64,
    /// Courtesy of the generated trajectory under the predictor.
    pub realized: f64,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub svg: String,
    pub quantiles: Vec<RenderedQuantile>,
}

pub fn render_scenario(
    scenario: &Scenario,
    generator: &GeneratorModel,
    range: &RangeModel,
    predictor: &PredictorModel,
    reward: RewardSpec,
    quantiles: &[f64],
) -> Result<RenderedScene> {
    if quantiles.is_empty() {
        return Err(Error::Invalid("render needs at least one quantile".into()));
    }
    let x = &scenario.observation;
    let r = range.predict_range(x)?;
    let psis = quantiles.iter().map(|&q| quantile_to_courtesy(&r, q)).collect::<scbg_core::Result<Vec<_>>>()?;
    let futures = generator.generate_many(x, &psis)?;
    let realized = courtesy_values(predictor, x, &futures, reward)?;
    let rendered: Vec<RenderedQuantile> = quantiles
        .iter()
        .zip(&psis)
        .zip(futures.iter().zip(&realized))
        .map(|((&quantile, &commanded), (f, &realized))| RenderedQuantile { quantile, commanded, realized, points: f.points().to_vec() })
        .collect();
    Ok(RenderedScene { svg: svg(scenario, &rendered), quantiles: rendered })
}

/// Maps world coordinates into the plot area, y pointing up, equal scale.
struct View {
    min: Point,
    scale: f64,
    offset: Point,
}

impl View {
    fn fit<'a>(points: impl Iterator<Item = &'a Point>) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !lo[0].is_finite() {
            (lo, hi) = ([0.0; 2], [1.0; 2]);
        }
        let (w, h) = (WIDTH - LEGEND_WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let span = [(hi[0] - lo[0]).max(1e-6), (hi[1] - lo[1]).max(1e-6)];
        let scale = (w / span[0]).min(h / span[1]);
        let offset = [MARGIN + (w - span[0] * scale) / 2.0, MARGIN + (h - span[1] * scale) / 2.0];
        Self { min: lo, scale, offset }
    }

    fn map(&self, p: Point) -> Point {
        [self.offset[0] + (p[0] - self.min[0]) * self.scale, HEIGHT - self.offset[1] - (p[1] - self.min[1]) * self.scale]
    }

    fn polyline(&self, out: &mut String, pts: &[Point], attrs: &str) {
        let coords: Vec<String> = pts.iter().map(|&p| self.map(p)).map(|[x, y]| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(out, r#"  <polyline points="{}" fill="none" {attrs}/>"#, coords.join(" "));
    }
}

fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = (0..3).map(|k| (RAMP[0][k] + t * (RAMP[1][k] - RAMP[0][k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg(scenario: &Scenario, rendered: &[RenderedQuantile]) -> String {
    let x = &scenario.observation;
    let view = View::fit(
        x.map_polylines
            .iter()
            .flat_map(|p| p.points.iter())
            .chain(x.history_a.points())
            .chain(x.history_b.points())
            .chain(scenario.future_a.points())
            .chain(rendered.iter().flat_map(|r| r.points.iter())),
    );
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, "  <title>{} ({})</title>", escape(&scenario.id), scenario.family.as_str());
    let _ = writeln!(s, r##"  <rect width="100%" height="100%" fill="#ffffff"/>"##);
    for p in &x.map_polylines {
        view.polyline(&mut s, &p.points, &format!(r##"class="map" data-tag="{}" stroke="#bbbbbb" stroke-width="1""##, escape(&p.tag)));
    }
    for (agent, pts) in [("A", x.history_a.points()), ("B", x.history_b.points())] {
        view.polyline(
            &mut s,
            pts,
            &format!(r##"class="history" data-agent="{agent}" stroke="#555555" stroke-width="2" stroke-dasharray="4 3""##),
        );
    }
    view.polyline(&mut s, scenario.future_a.points(), r##"class="ground-truth" data-agent="A" stroke="#1a9641" stroke-width="2.5""##);
    let n = rendered.len();
    for (i, r) in rendered.iter().enumerate() {
        let color = ramp(if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 });
        let attrs = format!(
            r#"class="generated" data-agent="B" data-quantile="{:.3}" data-psi="{:.4}" stroke="{color}" stroke-width="2""#,
            r.quantile, r.realized
        );
        view.polyline(&mut s, &r.points, &attrs);
    }

    let lx = WIDTH - LEGEND_WIDTH + 10.0;
    let _ = writeln!(s, r#"  <g class="legend" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"    <text x="{lx}" y="30">quantile  commanded  realized</text>"#);
    for (i, r) in rendered.iter().enumerate() {
        let y = 50.0 + 18.0 * i as f64;
        let color = ramp(if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 });
        let _ = writeln!(
            s,
            r#"    <line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="3"/>"#,
            y - 4.0,
            lx + 20.0,
            y - 4.0
        );
        let _ =
            writeln!(s, r#"    <text x="{:.1}" y="{y:.1}">{:.2}  {:+.3}  {:+.3}</text>"#, lx + 26.0, r.quantile, r.commanded, r.realized);
    }
    let y = 50.0 + 18.0 * n as f64 + 10.0;
    let _ = writeln!(
        s,
        r##"    <line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#1a9641" stroke-width="3"/>"##,
        y - 4.0,
        lx + 20.0,
        y - 4.0
    );
    let _ = writeln!(s, r#"    <text x="{:.1}" y="{y:.1}">A ground truth</text>"#, lx + 26.0);
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(s, "</svg>");
    s
}

//! Deterministic SVG rendering of simulation logs.
//!
//! Every plot uses a fixed 720x440 viewport and fixed-precision numbers, so
//! identical logs give byte-identical documents.

use std::fmt::Write as _;
use std::path::Path;

use stlrelax::scenario::{read_rows, ControlRow, DeltaRow, FrontTable, LogError, RegionRole, Scenario, StateRow};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{0}")]
    Scenario(String),
    #[error("nothing to plot: {0} is empty")]
    Empty(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Trajectory,
    Controls,
    Deltas,
    Front,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Linear map from a data box onto a pixel box.
#[derive(Debug, Clone, Copy)]
struct Frame {
    px: [f64; 4],
    x: [f64; 2],
    y: [f64; 2],
}

impl Frame {
    fn new(px: [f64; 4], x: [f64; 2], y: [f64; 2]) -> Self {
        Self { px, x: widen(x), y: widen(y) }
    }

    fn sx(&self, x: f64) -> f64 {
        self.px[0] + (x - self.x[0]) / (self.x[1] - self.x[0]) * (self.px[2] - self.px[0])
    }

    fn sy(&self, y: f64) -> f64 {
        self.px[3] - (y - self.y[0]) / (self.y[1] - self.y[0]) * (self.px[3] - self.px[1])
    }
}

fn widen([lo, hi]: [f64; 2]) -> [f64; 2] {
    if !(lo.is_finite() && hi.is_finite()) {
        return [0.0, 1.0];
    }
    let pad = if hi - lo < 1e-9 { 1.0f64.max(lo.abs() * 0.1) } else { (hi - lo) * 0.05 };
    [lo - pad, hi + pad]
}

fn range(vals: impl IntoIterator<Item = f64>) -> [f64; 2] {
    vals.into_iter().filter(|v| v.is_finite()).fold([f64::INFINITY, f64::NEG_INFINITY], |[a, b], v| [a.min(v), b.max(v)])
}

/// Keeps the aspect ratio of the data box for map-like plots.
fn equal_aspect(px: [f64; 4], x: [f64; 2], y: [f64; 2]) -> Frame {
    let (x, y) = (widen(x), widen(y));
    let (pw, ph) = (px[2] - px[0], px[3] - px[1]);
    let (dw, dh) = (x[1] - x[0], y[1] - y[0]);
    let scale = (pw / dw).min(ph / dh);
    let (cx, cy) = ((x[0] + x[1]) / 2.0, (y[0] + y[1]) / 2.0);
    let (hw, hh) = (pw / scale / 2.0, ph / scale / 2.0);
    Frame { px, x: [cx - hw, cx + hw], y: [cy - hh, cy + hh] }
}

struct Svg(String);

impl Svg {
    fn new(title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
        Self(s)
    }

    fn line(&mut self, pts: &[(f64, f64)], color: &str, extra: &str) {
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(self.0, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>"#, d.join(" "));
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, class: &str, style: &str) {
        let _ = writeln!(self.0, r#"<circle class="{class}" cx="{x:.2}" cy="{y:.2}" r="{r}" {style}/>"#);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(self.0, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, esc(s));
    }

    fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        let [l, t, r, b] = f.px;
        let _ = writeln!(
            self.0,
            r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        self.text(l, b + 14.0, "start", &fmt_num(f.x[0]));
        self.text(r, b + 14.0, "end", &fmt_num(f.x[1]));
        self.text(l - 4.0, b, "end", &fmt_num(f.y[0]));
        self.text(l - 4.0, t + 8.0, "end", &fmt_num(f.y[1]));
        self.text((l + r) / 2.0, b + 28.0, "middle", xlabel);
        let _ = writeln!(
            self.0,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            l - 30.0,
            (t + b) / 2.0,
            l - 30.0,
            (t + b) / 2.0,
            esc(ylabel)
        );
    }

    fn legend(&mut self, x: f64, y: f64, items: &[(String, &str, bool)]) {
        for (i, (name, color, dashed)) in items.iter().enumerate() {
            let yy = y + 14.0 * i as f64;
            let dash = if *dashed { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                self.0,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
                yy - 4.0,
                x + 18.0,
                yy - 4.0
            );
            self.text(x + 22.0, yy, "start", name);
        }
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Ego path over the scenario regions; agents drawn along their
/// constant-velocity paths when a scenario is given.
pub fn trajectory_svg(states: &[StateRow], scenario: Option<&Scenario>) -> Result<String, PlotError> {
    if states.is_empty() {
        return Err(PlotError::Empty("states".into()));
    }
    let t_end = states.last().map(|s| s.time).unwrap_or(0.0);
    let agent_paths: Vec<(String, (f64, f64), (f64, f64))> = scenario
        .map(|sc| {
            sc.agents
                .iter()
                .map(|a| (a.name.clone(), (a.init.x, a.init.y), (a.init.x + a.init.vx * t_end, a.init.y + a.init.vy * t_end)))
                .collect()
        })
        .unwrap_or_default();
    let mut xs: Vec<f64> = states.iter().map(|s| s.px).collect();
    let mut ys: Vec<f64> = states.iter().map(|s| s.py).collect();
    for (_, a, b) in &agent_paths {
        xs.extend([a.0, b.0]);
        ys.extend([a.1, b.1]);
    }
    let (mut xr, mut yr) = (range(xs.iter().copied()), range(ys.iter().copied()));
    // show the local road layout, not the full extent of long lanes
    let (xr0, yr0) = (widen(xr), widen(yr));
    if let Some(sc) = scenario {
        for r in &sc.regions {
            let [x0, x1, y0, y1] = r.bbox;
            if x1 >= xr0[0] && x0 <= xr0[1] {
                yr = [yr[0].min(y0.max(yr0[0] - 10.0)), yr[1].max(y1.min(yr0[1] + 10.0))];
            }
            if y1 >= yr0[0] && y0 <= yr0[1] {
                xr = [xr[0].min(x0.max(xr0[0] - 10.0)), xr[1].max(x1.min(xr0[1] + 10.0))];
            }
        }
    }
    let f = equal_aspect([60.0, 34.0, W - 150.0, H - 44.0], xr, yr);
    let mut svg = Svg::new("Ego trajectory");
    let _ = writeln!(svg.0, r#"<clipPath id="plot"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
        f.px[0], f.px[1], f.px[2] - f.px[0], f.px[3] - f.px[1]);
    let _ = writeln!(svg.0, r#"<g clip-path="url(#plot)">"#);
    if let Some(sc) = scenario {
        // drivable first so that obstacles and lanes paint over it
        let order = [RegionRole::Drivable, RegionRole::EmergencyLane, RegionRole::Goal, RegionRole::Obstacle];
        for role in order {
            for r in sc.regions.iter().filter(|r| r.role == role) {
                let [x0, x1, y0, y1] = r.bbox;
                let (fill, op) = match role {
                    RegionRole::Drivable => ("#e6e6e6", 1.0),
                    RegionRole::EmergencyLane => ("#ffd27f", 0.7),
                    RegionRole::Goal => ("#98df8a", 0.7),
                    RegionRole::Obstacle => ("#7f7f7f", 1.0),
                };
                let (l, r_) = (f.sx(x0.max(f.x[0])), f.sx(x1.min(f.x[1])));
                let (t, b) = (f.sy(y1.min(f.y[1])), f.sy(y0.max(f.y[0])));
                if r_ > l && b > t {
                    let _ = writeln!(
                        svg.0,
                        r#"<rect class="region" data-name="{}" x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{op}"/>"#,
                        esc(&r.name),
                        r_ - l,
                        b - t
                    );
                }
            }
        }
    }
    let mut legend = vec![("ego".to_string(), color(0), false)];
    for (i, (name, a, b)) in agent_paths.iter().enumerate() {
        let c = color(i + 1);
        svg.line(&[(f.sx(a.0), f.sy(a.1)), (f.sx(b.0), f.sy(b.1))], c, r#" stroke-dasharray="5,3""#);
        svg.circle(f.sx(b.0), f.sy(b.1), 3.0, "agent", &format!(r#"fill="{c}""#));
        legend.push((name.clone(), c, true));
    }
    let pts: Vec<(f64, f64)> = states.iter().map(|s| (f.sx(s.px), f.sy(s.py))).collect();
    if pts.len() > 1 {
        svg.line(&pts, color(0), "");
    }
    for (x, y) in &pts {
        svg.circle(*x, *y, 2.5, "ego", &format!(r#"fill="{}""#, color(0)));
    }
    svg.0.push_str("</g>\n");
    svg.axes(&f, "x [m]", "y [m]");
    svg.legend(W - 140.0, 50.0, &legend);
    Ok(svg.finish())
}

/// Acceleration and slip angle against time, one panel each.
pub fn controls_svg(rows: &[ControlRow]) -> Result<String, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::Empty("controls".into()));
    }
    let mut svg = Svg::new("Executed controls");
    let tr = range(rows.iter().map(|r| r.time));
    let tr = [tr[0], tr[1] + rows.get(1).map(|r| r.time - rows[0].time).unwrap_or(0.2)];
    let panels: [(&str, fn(&ControlRow) -> f64, [f64; 4]); 2] = [
        ("a [m/s²]", |r| r.a, [70.0, 34.0, W - 30.0, 210.0]),
        ("β [rad]", |r| r.beta, [70.0, 250.0, W - 30.0, H - 44.0]),
    ];
    for (i, (label, get, px)) in panels.into_iter().enumerate() {
        let f = Frame::new(px, tr, range(rows.iter().map(get)));
        // zero-order hold
        let mut pts = Vec::with_capacity(2 * rows.len());
        for (k, r) in rows.iter().enumerate() {
            let t1 = rows.get(k + 1).map(|n| n.time).unwrap_or(tr[1]);
            pts.push((f.sx(r.time), f.sy(get(r))));
            pts.push((f.sx(t1), f.sy(get(r))));
        }
        svg.line(&pts, color(i), "");
        svg.axes(&f, if i == 1 { "t [s]" } else { "" }, label);
    }
    Ok(svg.finish())
}

/// Executed relaxation per soft spec with the minimal total relaxation.
pub fn deltas_svg(rows: &[DeltaRow]) -> Result<String, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::Empty("deltas".into()));
    }
    let mut specs: Vec<&str> = Vec::new();
    for r in rows {
        if !specs.contains(&r.spec.as_str()) {
            specs.push(&r.spec);
        }
    }
    let mut cycles: Vec<usize> = rows.iter().map(|r| r.cycle).collect();
    cycles.dedup();
    let dmin: Vec<(usize, f64)> = cycles
        .iter()
        .map(|c| (*c, rows.iter().find(|r| r.cycle == *c).map(|r| r.delta_min).unwrap_or(f64::NAN)))
        .collect();
    let yr = range(rows.iter().flat_map(|r| [r.executed, r.delta_min]).chain([0.0]));
    let xr = range(cycles.iter().map(|c| *c as f64));
    let f = Frame::new([70.0, 34.0, W - 150.0, H - 44.0], xr, yr);
    let mut svg = Svg::new("Relaxation allocation");
    let mut legend = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.spec == *s).map(|r| (f.sx(r.cycle as f64), f.sy(r.executed))).collect();
        let _ = writeln!(svg.0, r#"<g class="series" data-spec="{}">"#, esc(s));
        svg.line(&pts, color(i), "");
        for (x, y) in &pts {
            svg.circle(*x, *y, 2.5, "delta", &format!(r#"fill="{}""#, color(i)));
        }
        svg.0.push_str("</g>\n");
        legend.push((s.to_string(), color(i), false));
    }
    let pts: Vec<(f64, f64)> = dmin.iter().map(|(c, d)| (f.sx(*c as f64), f.sy(*d))).collect();
    svg.line(&pts, "black", r#" class="dmin" stroke-dasharray="5,3""#);
    legend.push(("d_min".into(), "black", true));
    svg.axes(&f, "cycle", "relaxation");
    svg.legend(W - 140.0, 50.0, &legend);
    Ok(svg.finish())
}

/// Explored candidates of one cycle in the space of the first two true
/// objectives (or objective against total relaxation when there is only one).
pub fn front_svg(table: &FrontTable, cycle: Option<usize>) -> Result<String, PlotError> {
    let cycle = match cycle {
        Some(c) => c,
        None => table.rows.first().map(|r| r.cycle).ok_or_else(|| PlotError::Empty("fronts".into()))?,
    };
    let rows: Vec<_> = table.rows.iter().filter(|r| r.cycle == cycle).collect();
    if rows.is_empty() {
        return Err(PlotError::Empty(format!("fronts at cycle {cycle}")));
    }
    let (xl, yl) = match table.objectives.as_slice() {
        [] => ("candidate".to_string(), "total relaxation".to_string()),
        [a] => (a.clone(), "total relaxation".to_string()),
        [a, b, ..] => (a.clone(), b.clone()),
    };
    let coord = |r: &stlrelax::scenario::FrontRow| -> (f64, f64) {
        match r.g_true.as_slice() {
            [] => (r.candidate as f64, r.delta_sum),
            [a] => (*a, r.delta_sum),
            [a, b, ..] => (*a, *b),
        }
    };
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| coord(r)).collect();
    let f = Frame::new([80.0, 34.0, W - 150.0, H - 44.0], range(pts.iter().map(|p| p.0)), range(pts.iter().map(|p| p.1)));
    let mut svg = Svg::new(&format!("Explored candidates, cycle {cycle}"));
    // selected point last so it stays on top
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].selected);
    for i in order {
        let r = rows[i];
        let (x, y) = (f.sx(pts[i].0), f.sy(pts[i].1));
        if r.selected {
            svg.circle(x, y, 7.0, "selected", r##"fill="#d62728" stroke="black" stroke-width="1.5""##);
        } else if r.pareto {
            svg.circle(x, y, 4.0, "candidate pareto", r##"fill="#1f77b4""##);
        } else {
            svg.circle(x, y, 4.0, "candidate dominated", r##"fill="none" stroke="#7f7f7f""##);
        }
    }
    svg.axes(&f, &xl, &yl);
    let _ = writeln!(svg.0, r##"<circle cx="{:.2}" cy="46" r="4" fill="#1f77b4"/>"##, W - 134.0);
    svg.text(W - 122.0, 50.0, "start", "Pareto");
    let _ = writeln!(svg.0, r##"<circle cx="{:.2}" cy="60" r="4" fill="none" stroke="#7f7f7f"/>"##, W - 134.0);
    svg.text(W - 122.0, 64.0, "start", "dominated");
    let _ = writeln!(svg.0, r##"<circle cx="{:.2}" cy="74" r="5" fill="#d62728" stroke="black"/>"##, W - 134.0);
    svg.text(W - 122.0, 78.0, "start", "selected");
    Ok(svg.finish())
}

/// Renders `kind` from the streams in a simulation output directory.
pub fn render_dir(dir: &Path, kind: PlotKind, cycle: Option<usize>) -> Result<String, PlotError> {
    match kind {
        PlotKind::Trajectory => {
            let states: Vec<StateRow> = read_rows(&dir.join("states.csv"))?;
            let sc_path = dir.join("scenario.json");
            let sc = if sc_path.exists() {
                Some(Scenario::load(&sc_path).map_err(|e| PlotError::Scenario(e.to_string()))?)
            } else {
                None
            };
            trajectory_svg(&states, sc.as_ref())
        }
        PlotKind::Controls => controls_svg(&read_rows(&dir.join("controls.csv"))?),
        PlotKind::Deltas => deltas_svg(&read_rows(&dir.join("deltas.csv"))?),
        PlotKind::Front => front_svg(&FrontTable::read_path(&dir.join("fronts.csv"))?, cycle),
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::table::Table;
use crate::machine::{MachineModel, OverlapPolicy};
use crate::models::{compose_ecm, convert, EcmTerms};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// `x` rounded to three significant figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (2 - exp).max(0) as usize;
    let scale = 10f64.powi(exp - 2);
    let rounded = (x / scale).round() * scale;
    format!("{rounded:.decimals$}")
}

/// Ticks at 1, 2 or 5 times a power of ten, covering `0..=max`.
pub fn nice_ticks(max: f64) -> Vec<f64> {
    let max = if max > 0.0 && max.is_finite() { max } else { 1.0 };
    let raw = max / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let count = (max / step).ceil() as usize;
    (0..=count).map(|i| i as f64 * step).collect()
}

/// MLUP/s labels for the cycle ticks of a stacked plot.
pub fn secondary_labels(ticks: &[f64], clock_hz: f64, lup_per_cl: f64) -> Vec<(f64, String)> {
    ticks
        .iter()
        .filter(|t| **t > 0.0)
        .map(|t| (*t, sig3(convert(*t, clock_hz, lup_per_cl).unwrap_or(0.0) / 1e6)))
        .collect()
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_ticks: Vec<f64>,
    svg: String,
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, x_min: f64, x_max: f64, y_max: f64) -> Frame {
        let (x_min, x_max) = if x_max > x_min {
            (x_min, x_max)
        } else {
            (x_min - 1.0, x_min + 1.0)
        };
        let y_ticks = nice_ticks(y_max);
        let mut svg = String::new();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#,
            W = WIDTH,
            H = HEIGHT
        )
        .unwrap();
        writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            num(WIDTH / 2.0),
            escape(title)
        )
        .unwrap();
        let mut f = Frame {
            x_min,
            x_max,
            y_ticks,
            svg,
        };
        f.axes(x_label, y_label);
        f
    }

    fn y_max(&self) -> f64 {
        *self.y_ticks.last().unwrap()
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - y / self.y_max() * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        for t in self.y_ticks.clone() {
            let y = self.py(t);
            writeln!(
                self.svg,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                num(x0), num(y), num(x1), num(y), num(x0 - 6.0), num(y + 4.0), num(t)
            )
            .unwrap();
        }
        writeln!(
            self.svg,
            r##"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="#000000"/>"##,
            num(x0),
            num(y1),
            num(x0),
            num(y0),
            num(x1),
            num(y0)
        )
        .unwrap();
        writeln!(
            self.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num((x0 + x1) / 2.0),
            num(HEIGHT - 15.0),
            escape(x_label)
        )
        .unwrap();
        writeln!(
            self.svg,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            num((y0 + y1) / 2.0),
            num((y0 + y1) / 2.0),
            escape(y_label)
        )
        .unwrap();
    }

    fn x_ticks(&mut self, ticks: &[(f64, String)]) {
        for (x, label) in ticks {
            let px = self.px(*x);
            writeln!(
                self.svg,
                r##"<line x1="{px}" y1="{y}" x2="{px}" y2="{y2}" stroke="#000000"/><text x="{px}" y="{ty}" text-anchor="middle">{l}</text>"##,
                px = num(px),
                y = num(HEIGHT - BOTTOM),
                y2 = num(HEIGHT - BOTTOM + 5.0),
                ty = num(HEIGHT - BOTTOM + 18.0),
                l = escape(label)
            )
            .unwrap();
        }
    }

    fn secondary_axis(&mut self, labels: &[(f64, String)], title: &str) {
        let x = WIDTH - RIGHT;
        writeln!(
            self.svg,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#000000"/>"##,
            num(TOP),
            num(HEIGHT - BOTTOM),
            x = num(x)
        )
        .unwrap();
        for (t, label) in labels {
            if *t > self.y_max() {
                continue;
            }
            writeln!(
                self.svg,
                r#"<text x="{}" y="{}" text-anchor="start">{}</text>"#,
                num(x + 6.0),
                num(self.py(*t) + 4.0),
                escape(label)
            )
            .unwrap();
        }
        let mid = (TOP + HEIGHT - BOTTOM) / 2.0;
        writeln!(
            self.svg,
            r#"<text x="{x}" y="{y}" text-anchor="middle" transform="rotate(90 {x} {y})">{}</text>"#,
            escape(title),
            x = num(WIDTH - 20.0),
            y = num(mid)
        )
        .unwrap();
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, dash: Option<&str>) {
        if points.is_empty() {
            return;
        }
        let d: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{},{}", num(self.px(*x)), num(self.py(*y))))
            .collect();
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        writeln!(
            self.svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            d.join(" ")
        )
        .unwrap();
    }

    fn band(&mut self, xs: &[f64], lower: &[f64], upper: &[f64], color: &str) {
        if xs.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, (x, y)) in xs.iter().zip(upper).enumerate() {
            write!(
                d,
                "{}{},{} ",
                if i == 0 { "M" } else { "L" },
                num(self.px(*x)),
                num(self.py(*y))
            )
            .unwrap();
        }
        for (x, y) in xs.iter().zip(lower).rev() {
            write!(d, "L{},{} ", num(self.px(*x)), num(self.py(*y))).unwrap();
        }
        writeln!(
            self.svg,
            r#"<path d="{}Z" fill="{color}" fill-opacity="0.75" stroke="none"/>"#,
            d
        )
        .unwrap();
    }

    fn markers(&mut self, points: &[(f64, f64)], color: &str) {
        for (x, y) in points {
            writeln!(
                self.svg,
                r##"<circle cx="{}" cy="{}" r="3.5" fill="{color}" stroke="#000000" stroke-width="0.5"/>"##,
                num(self.px(*x)),
                num(self.py(*y))
            )
            .unwrap();
        }
    }

    fn vline(&mut self, x: f64, label: &str) {
        if x < self.x_min || x > self.x_max {
            return;
        }
        let px = num(self.px(x));
        writeln!(
            self.svg,
            r##"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="#888888" stroke-dasharray="4 3"/><text x="{px}" y="{}" text-anchor="middle" font-size="10" fill="#555555">{}</text>"##,
            num(TOP),
            num(HEIGHT - BOTTOM),
            num(TOP - 4.0),
            escape(label)
        )
        .unwrap();
    }

    fn rect(&mut self, x0: f64, x1: f64, y: f64, color: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let top = self.py(y);
        writeln!(
            self.svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
            num(a),
            num(top),
            num(b - a),
            num(HEIGHT - BOTTOM - top)
        )
        .unwrap();
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = TOP + 8.0 + 16.0 * i as f64;
            writeln!(
                self.svg,
                r#"<rect x="{}" y="{}" width="12" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
                num(LEFT + 10.0),
                num(y - 9.0),
                num(LEFT + 28.0),
                num(y),
                escape(label)
            )
            .unwrap();
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn present(xs: &[Option<f64>], ys: &[Option<f64>]) -> Vec<(f64, f64)> {
    xs.iter().zip(ys).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect()
}

fn columns(table: &Table, names: &[&str]) -> Result<Vec<Vec<Option<f64>>>, String> {
    names
        .iter()
        .map(|n| table.values(n).ok_or_else(|| format!("column `{n}` missing")))
        .collect()
}

fn size_ticks(xs: &[f64]) -> Vec<(f64, String)> {
    let every = xs.len().div_ceil(12).max(1);
    xs.iter().step_by(every).map(|x| (*x, format!("{x}"))).collect()
}

fn totals(terms: &[Vec<Option<f64>>], policy: OverlapPolicy) -> Vec<Option<f64>> {
    (0..terms[0].len())
        .map(|i| {
            let t: Option<Vec<f64>> = terms.iter().map(|c| c[i]).collect();
            t.and_then(|t| compose_ecm(EcmTerms::new(t[0], t[1], t[2], t[3], t[4]), policy).ok())
                .map(|e| e.t_total)
        })
        .collect()
}

fn fmax(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().filter(|v| v.is_finite()).fold(0.0, f64::max)
}

/// Inputs of the plot set: the report tables by file name.
pub type Tables = BTreeMap<String, Table>;

const LC_TERMS: [&str; 5] = [
    "ECM LC Tol",
    "ECM LC Tnol",
    "ECM LC Tl1l2",
    "ECM LC Tl2l3",
    "ECM LC Tl3mem",
];
const CS_TERMS: [&str; 5] = [
    "ECM CS Tol",
    "ECM CS Tnol",
    "ECM CS Tl1l2",
    "ECM CS Tl2l3",
    "ECM CS Tl3mem",
];

fn stacked_ecm(tables: &Tables, machine: &MachineModel, lup_per_cl: f64) -> Result<String, String> {
    let main = tables.get("report.csv").ok_or("report.csv missing")?;
    let n = columns(main, &["N^3"])?.remove(0);
    let lc = columns(main, &LC_TERMS)?;
    let cs = columns(main, &CS_TERMS)?;
    let [bench, roof] = <[Vec<Option<f64>>; 2]>::try_from(columns(main, &["Benchmark cycl", "Roofline LC cycl"])?)
        .expect("two columns");
    let rows: Vec<usize> = (0..n.len())
        .filter(|&i| n[i].is_some() && lc.iter().all(|c| c[i].is_some()))
        .collect();
    if rows.is_empty() {
        return Err("no row has layer-condition ECM terms".into());
    }
    let xs: Vec<f64> = rows.iter().map(|&i| n[i].unwrap()).collect();
    let term = |k: usize, i: usize| lc[k][i].unwrap();
    let cs_total = totals(&cs, machine.overlap_policy);
    let lc_total = totals(&lc, machine.overlap_policy);
    let mut stack_tops = vec![vec![0.0; rows.len()]];
    for k in 1..5 {
        let prev = stack_tops.last().unwrap().clone();
        stack_tops.push(rows.iter().zip(prev).map(|(&i, p)| p + term(k, i)).collect());
    }
    let phen = tables.get("phenomenological.csv");
    let phen_pts = phen
        .and_then(|t| Some(present(&t.values("N^3")?, &t.values("Phenom cycl")?)))
        .unwrap_or_default();
    let y_max = fmax(
        stack_tops[4]
            .iter()
            .copied()
            .chain(rows.iter().map(|&i| term(0, i)))
            .chain(bench.iter().flatten().copied())
            .chain(roof.iter().flatten().copied())
            .chain(cs_total.iter().flatten().copied())
            .chain(phen_pts.iter().map(|p| p.1)),
    ) * 1.1;

    let mut f = Frame::new(
        &format!("ECM prediction ({})", machine.overlap_policy),
        "grid edge N (N^3 points)",
        "cycles per cacheline",
        xs[0],
        *xs.last().unwrap(),
        y_max,
    );
    let names = ["T_RegL1", "T_L1L2", "T_L2L3", "T_L3MEM"];
    for k in 1..5 {
        f.band(&xs, &stack_tops[k - 1], &stack_tops[k], PALETTE[k - 1]);
    }
    let comp: Vec<(f64, f64)> = rows.iter().map(|&i| (n[i].unwrap(), term(0, i))).collect();
    f.polyline(&comp, "#000000", Some("6 3"));
    f.polyline(&present(&n, &lc_total), "#222222", None);
    f.polyline(&present(&n, &roof), PALETTE[6], Some("2 2"));
    f.polyline(&present(&n, &cs_total), PALETTE[4], Some("8 2 2 2"));
    f.markers(&present(&n, &bench), "#e15759");
    f.markers(&phen_pts, PALETTE[5]);
    if let Some(breaks) = tables.get("lc_breaks.csv") {
        if let (Some(levels), Some(classes), Some(ns)) = (
            breaks.values("level"),
            breaks.values("dimensionality"),
            breaks.values("break N"),
        ) {
            for ((l, c), b) in levels.iter().zip(&classes).zip(&ns) {
                if let (Some(l), Some(c), Some(b)) = (l, c, b) {
                    f.vline(*b, &format!("L{l}-{c}D"));
                }
            }
        }
    }
    f.x_ticks(&size_ticks(&xs));
    let labels = secondary_labels(&f.y_ticks.clone(), machine.clock_hz, lup_per_cl);
    f.secondary_axis(&labels, "MLUP/s");
    let mut legend: Vec<(&str, &str)> = names.iter().zip(PALETTE).map(|(n, c)| (*n, c)).collect();
    legend.extend([
        ("T_comp", "#000000"),
        ("ECM LC total", "#222222"),
        ("Roofline LC", PALETTE[6]),
        ("ECM CS total", PALETTE[4]),
        ("Benchmark", "#e15759"),
    ]);
    if !phen_pts.is_empty() {
        legend.push(("Phenomenological", PALETTE[5]));
    }
    f.legend(&legend);
    Ok(f.finish())
}

fn roofline_plot(tables: &Tables, machine: &MachineModel) -> Result<String, String> {
    let main = tables.get("report.csv").ok_or("report.csv missing")?;
    let n = columns(main, &["N^3"])?.remove(0);
    let cols = columns(main, &["Roofline LC cycl", "Roofline CS cycl", "Benchmark cycl"])?;
    let lc_total = totals(&columns(main, &LC_TERMS)?, machine.overlap_policy);
    let cs_total = totals(&columns(main, &CS_TERMS)?, machine.overlap_policy);
    let xs: Vec<f64> = n.iter().flatten().copied().collect();
    if xs.is_empty() {
        return Err("no rows".into());
    }
    let y_max = fmax(
        cols.iter()
            .chain([&lc_total, &cs_total])
            .flat_map(|c| c.iter().flatten().copied()),
    ) * 1.1;
    let mut f = Frame::new(
        "Roofline and ECM",
        "grid edge N (N^3 points)",
        "cycles per cacheline",
        xs[0],
        *xs.last().unwrap(),
        y_max,
    );
    f.polyline(&present(&n, &cols[0]), PALETTE[0], None);
    f.polyline(&present(&n, &cols[1]), PALETTE[1], None);
    f.polyline(&present(&n, &lc_total), PALETTE[0], Some("6 3"));
    f.polyline(&present(&n, &cs_total), PALETTE[1], Some("6 3"));
    f.markers(&present(&n, &cols[2]), "#e15759");
    f.x_ticks(&size_ticks(&xs));
    f.legend(&[
        ("Roofline LC", PALETTE[0]),
        ("Roofline CS", PALETTE[1]),
        ("ECM LC (dashed)", PALETTE[0]),
        ("ECM CS (dashed)", PALETTE[1]),
        ("Benchmark", "#e15759"),
    ]);
    Ok(f.finish())
}

pub const VOLUME_HEADER: [&str; 7] = [
    "N^3",
    "LC L1L2 B/CL",
    "LC L2L3 B/CL",
    "LC L3MEM B/CL",
    "CS L1L2 B/CL",
    "CS L2L3 B/CL",
    "CS L3MEM B/CL",
];

fn volume_plot(tables: &Tables) -> Result<String, String> {
    let t = tables.get("volumes.csv").ok_or("volumes.csv missing")?;
    let cols = columns(t, &VOLUME_HEADER)?;
    let xs: Vec<f64> = cols[0].iter().flatten().copied().collect();
    if xs.is_empty() {
        return Err("no rows".into());
    }
    let y_max = fmax(cols[1..].iter().flat_map(|c| c.iter().flatten().copied())) * 1.1;
    let mut f = Frame::new(
        "Data transfer volumes",
        "grid edge N (N^3 points)",
        "bytes per cacheline of work",
        xs[0],
        *xs.last().unwrap(),
        y_max,
    );
    for k in 0..3 {
        f.polyline(&present(&cols[0], &cols[1 + k]), PALETTE[k], None);
        f.polyline(&present(&cols[0], &cols[4 + k]), PALETTE[k], Some("6 3"));
        f.markers(&present(&cols[0], &cols[4 + k]), PALETTE[k]);
    }
    f.x_ticks(&size_ticks(&xs));
    f.legend(&[
        ("L1L2 (solid LC, dashed CS)", PALETTE[0]),
        ("L2L3", PALETTE[1]),
        ("L3MEM", PALETTE[2]),
    ]);
    Ok(f.finish())
}

pub const THREAD_HEADER: [&str; 4] = ["cores", "ECM MLUP/s", "Benchmark MLUP/s", "domain"];

fn thread_plot(tables: &Tables) -> Result<String, String> {
    let t = tables.get("thread_scaling.csv").ok_or("thread_scaling.csv missing")?;
    let cols = columns(t, &THREAD_HEADER)?;
    let xs: Vec<f64> = cols[0].iter().flatten().copied().collect();
    if xs.is_empty() {
        return Err("no rows".into());
    }
    let y_max = fmax(cols[1..3].iter().flat_map(|c| c.iter().flatten().copied())) * 1.1;
    let mut f = Frame::new(
        "Thread scaling",
        "cores",
        "MLUP/s",
        xs[0].min(1.0) - 0.5,
        *xs.last().unwrap() + 0.5,
        y_max,
    );
    for w in 1..cols[3].len() {
        if let (Some(a), Some(b), Some(c)) = (cols[3][w - 1], cols[3][w], cols[0][w]) {
            if a != b {
                f.vline(c - 0.5, "NUMA domain");
            }
        }
    }
    f.polyline(&present(&cols[0], &cols[1]), PALETTE[0], None);
    f.markers(&present(&cols[0], &cols[2]), "#e15759");
    f.x_ticks(&xs.iter().map(|x| (*x, format!("{x}"))).collect::<Vec<_>>());
    f.legend(&[("ECM scaling", PALETTE[0]), ("Benchmark", "#e15759")]);
    Ok(f.finish())
}

pub const BLOCKING_HEADER: [&str; 4] = ["N^3", "block", "ECM LC cycl", "Benchmark cycl"];

fn blocking_plot(tables: &Tables) -> Result<String, String> {
    let t = tables.get("blocking.csv").ok_or("blocking.csv missing")?;
    let cols = columns(t, &BLOCKING_HEADER)?;
    let count = cols[1].len();
    if count == 0 {
        return Err("no rows".into());
    }
    let y_max = fmax(cols[2..].iter().flat_map(|c| c.iter().flatten().copied())) * 1.1;
    let edge = cols[0].iter().flatten().next().copied().unwrap_or(0.0);
    let mut f = Frame::new(
        &format!("Spatial blocking at N = {edge}"),
        "block size (0 = unblocked)",
        "cycles per cacheline",
        -0.5,
        count as f64 - 0.5,
        y_max,
    );
    let mut ticks = Vec::new();
    let mut bench = Vec::new();
    for (i, ((block, model), measured)) in cols[1].iter().zip(&cols[2]).zip(&cols[3]).enumerate().take(count) {
        let x = i as f64;
        if let Some(y) = *model {
            f.rect(x - 0.3, x + 0.3, y, PALETTE[0]);
        }
        if let Some(y) = *measured {
            bench.push((x, y));
        }
        let label = block.map(|b| if b == 0.0 { "none".to_string() } else { format!("{b}") });
        ticks.push((x, label.unwrap_or_default()));
    }
    f.markers(&bench, "#e15759");
    f.x_ticks(&ticks);
    f.legend(&[("ECM LC", PALETTE[0]), ("Benchmark", "#e15759")]);
    Ok(f.finish())
}

/// Renders every plot whose input is available. Returns the SVGs by file
/// name and a notice for each skipped plot.
pub fn render_plots(
    tables: &Tables,
    machine: &MachineModel,
    lup_per_cl: f64,
) -> (BTreeMap<String, String>, Vec<String>) {
    let mut out = BTreeMap::new();
    let mut notices = Vec::new();
    let plots = [
        ("ecm_stacked.svg", stacked_ecm(tables, machine, lup_per_cl)),
        ("roofline.svg", roofline_plot(tables, machine)),
        ("volumes.svg", volume_plot(tables)),
        ("thread_scaling.svg", thread_plot(tables)),
        ("blocking.svg", blocking_plot(tables)),
    ];
    for (name, plot) in plots {
        match plot {
            Ok(svg) => {
                out.insert(name.to_string(), svg);
            }
            Err(why) => notices.push(format!("{name} skipped: {why}")),
        }
    }
    (out, notices)
}

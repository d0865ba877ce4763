//! Static SVG charts: one demand overlay per prediction mode and a learning
//! curve with the exploration boundary marked.

use std::fmt::Write;

use pmarl::engine::{ExperimentReport, Method, PredictionMode};

const W: f64 = 800.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn colour(m: Method) -> &'static str {
    match m {
        Method::Greedy => "#d62728",
        Method::NightGreedy => "#ff7f0e",
        Method::Pmarl => "#1f77b4",
        Method::ValleyFill => "#2ca02c",
    }
}

struct Frame {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, i: f64) -> f64 {
        LEFT + (W - LEFT - RIGHT) * i / self.x_max.max(1.0)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-9);
        H - BOTTOM - (H - TOP - BOTTOM) * (v - self.y_min) / span
    }

    fn points(&self, v: &[f64]) -> String {
        v.iter()
            .enumerate()
            .map(|(i, &y)| format!("{:.2},{:.2}", self.x(i as f64), self.y(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn path(&self, v: &[f64]) -> String {
        let mut d = String::new();
        for (i, &y) in v.iter().enumerate() {
            let op = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{op}{:.2},{:.2} ", self.x(i as f64), self.y(y));
        }
        d.trim_end().to_string()
    }
}

fn open(title: &str, x_label: &str, y_label: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" ",
            "font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{cx}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
            "<text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\">{x_label}</text>\n",
            "<text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {cy})\">{y_label}</text>\n",
        ),
        w = W,
        h = H,
        cx = (LEFT + W - RIGHT) / 2.0,
        cy = (TOP + H - BOTTOM) / 2.0,
        xl = H - 10.0,
        title = title,
        x_label = x_label,
        y_label = y_label,
    )
}

fn axes(
    out: &mut String,
    f: &Frame,
    x_ticks: &[(f64, String)],
    y_ticks: usize,
    y_fmt: impl Fn(f64) -> String,
) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        out,
        "<g class=\"axes\" stroke=\"#444\" fill=\"none\"><rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\"/></g>",
        x1 - x0,
        y1 - y0
    );
    for (i, label) in x_ticks {
        let x = f.x(*i);
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
            y1 + 16.0
        );
    }
    for k in 0..=y_ticks {
        let v = f.y_min + (f.y_max - f.y_min) * k as f64 / y_ticks as f64;
        let y = f.y(v);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            x0 - 6.0,
            y + 4.0,
            y_fmt(v)
        );
    }
}

fn legend(out: &mut String, row: usize, colour: &str, dash: &str, label: &str) {
    let x = W - RIGHT + 15.0;
    let y = TOP + 10.0 + 20.0 * row as f64;
    let _ = writeln!(
        out,
        "<g class=\"legend\"><rect x=\"{x}\" y=\"{:.1}\" width=\"18\" height=\"3\" fill=\"{colour}\"{dash}/><text x=\"{}\" y=\"{:.1}\">{label}</text></g>",
        y - 2.0,
        x + 24.0,
        y + 4.0
    );
}

/// Per-slot realised load of every method under `mode`, with baseload and
/// the benchmark drawn as paths.
pub fn overlay(r: &ExperimentReport, mode: PredictionMode) -> String {
    let cells: Vec<_> = r.cells.iter().filter(|c| c.mode == mode).collect();
    let m = cells.first().map_or(0, |c| c.overlay.baseload_kw.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in &cells {
        let o = &c.overlay;
        for v in o
            .aggregate_kw
            .iter()
            .chain(&o.baseload_kw)
            .chain(&o.optimal_kw)
        {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let f = Frame {
        x_max: m.saturating_sub(1) as f64,
        y_min: 0.0_f64.min(lo),
        y_max: hi * 1.05,
    };

    let cfg = &r.config;
    let slots_per_hour = (cfg.slots_per_day / 24).max(1);
    let ticks: Vec<(f64, String)> = (0..m)
        .filter(|j| (cfg.avail_start_slot + j).is_multiple_of(2 * slots_per_hour))
        .map(|j| {
            let slot = (cfg.avail_start_slot + j) % cfg.slots_per_day;
            (j as f64, format!("{:02}:00", slot / slots_per_hour))
        })
        .collect();

    let mut out = open(
        &format!("Demand overlay, {} prediction", mode.name()),
        "time of day",
        "load (kW)",
    );
    axes(&mut out, &f, &ticks, 5, |v| format!("{v:.0}"));
    let mut row = 0;
    if let Some(c) = cells.first() {
        let _ = writeln!(
            out,
            "<path class=\"baseload\" d=\"{}\" fill=\"none\" stroke=\"#777\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
            f.path(&c.overlay.baseload_kw)
        );
        legend(&mut out, row, "#777", "", "baseload");
        row += 1;
        let _ = writeln!(
            out,
            "<path class=\"optimal\" d=\"{}\" fill=\"none\" stroke=\"#000\" stroke-width=\"1\" stroke-dasharray=\"2 3\"/>",
            f.path(&c.overlay.optimal_kw)
        );
        legend(&mut out, row, "#000", "", "benchmark");
        row += 1;
    }
    for c in &cells {
        let _ = writeln!(
            out,
            "<polyline class=\"method\" data-method=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
            c.method,
            f.points(&c.overlay.aggregate_kw),
            colour(c.method)
        );
        legend(&mut out, row, colour(c.method), "", c.method.name());
        row += 1;
    }
    out.push_str("</svg>\n");
    out
}

/// Efficiency per episode for every cell, or `None` when the report holds
/// no episodes.
pub fn learning_curve(r: &ExperimentReport) -> Option<String> {
    let cells: Vec<_> = r
        .cells
        .iter()
        .filter(|c| !c.efficiency_by_episode.is_empty())
        .collect();
    let n = cells.iter().map(|c| c.efficiency_by_episode.len()).max()?;
    let f = Frame {
        x_max: n.saturating_sub(1) as f64,
        y_min: 0.0,
        y_max: 1.0,
    };
    let step = (n / 10).max(1);
    let ticks: Vec<(f64, String)> = (0..n)
        .step_by(step)
        .map(|e| (e as f64, (e + 1).to_string()))
        .collect();
    let mut out = open("Efficiency per episode", "episode", "efficiency");
    axes(&mut out, &f, &ticks, 5, |v| format!("{:.0}%", v * 100.0));

    let boundary = r.exploration_episodes as f64 - 0.5;
    if boundary > 0.0 && (r.exploration_episodes) < n {
        let x = f.x(boundary);
        let _ = writeln!(
            out,
            "<line class=\"boundary\" x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#555\" stroke-dasharray=\"4 4\"/>",
            H - BOTTOM
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{}\" font-size=\"11\">exploitation</text>",
            x + 4.0,
            TOP + 14.0
        );
    }
    let multi_mode = r.modes.len() > 1;
    for (row, c) in cells.iter().enumerate() {
        let dash = match c.mode {
            PredictionMode::Perfect => "",
            PredictionMode::AnomalyRepredict => " stroke-dasharray=\"6 3\"",
            PredictionMode::Simple => " stroke-dasharray=\"2 2\"",
        };
        let label = if multi_mode {
            format!("{} ({})", c.method.name(), c.mode.name())
        } else {
            c.method.name().to_string()
        };
        let _ = writeln!(
            out,
            "<polyline class=\"curve\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash}/>",
            f.points(&c.efficiency_by_episode),
            colour(c.method)
        );
        legend(&mut out, row, colour(c.method), dash, &label);
    }
    out.push_str("</svg>\n");
    Some(out)
}

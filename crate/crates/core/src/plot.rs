//! Self-contained SVG plots of a trace.
//!
//! Each snapshot gets a density and a velocity profile with both classes; each
//! of `rho_m`, `rho_c`, `v_m`, `v_c` gets a space-time heatmap. The root
//! `<svg>` element records its data ranges in `data-x-min`, `data-x-max`,
//! `data-y-min`, `data-y-max` so the axes can be checked without parsing paths.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::model::VehicleClass;
use crate::output::{format_float, io_error, OutputError, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPlan {
    pub width: f64,
    pub height: f64,
}

impl Default for PlotPlan {
    fn default() -> Self {
        Self {
            width: 720.0,
            height: 420.0,
        }
    }
}

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn class_color(class: VehicleClass) -> &'static str {
    match class {
        VehicleClass::Motorcycle => "#d95f02",
        VehicleClass::Car => "#1b9e77",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let rounded = (v * 1e6).round() / 1e6;
    format_float(rounded)
}

/// Upper bound rounded up to a multiple of `step`.
fn round_up(v: f64, step: f64) -> f64 {
    ((v / step).ceil() * step).max(step)
}

struct Frame {
    plan: PlotPlan,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn inner_width(&self) -> f64 {
        self.plan.width - MARGIN_LEFT - MARGIN_RIGHT
    }

    fn inner_height(&self) -> f64 {
        self.plan.height - MARGIN_TOP - MARGIN_BOTTOM
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * self.inner_width()
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN_TOP + (1.0 - (y - self.y.0) / (self.y.1 - self.y.0)) * self.inner_height()
    }

    fn open(&self, out: &mut String, title: &str) {
        let _ = write!(
            out,
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" "#,
                r#"data-x-min="{x0}" data-x-max="{x1}" data-y-min="{y0}" data-y-max="{y1}" "#,
                r#"font-family="sans-serif" font-size="12">"#,
                "\n",
                r#"<rect width="{w}" height="{h}" fill="white"/>"#,
                "\n",
                r#"<text x="{tx}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
                "\n"
            ),
            w = self.plan.width,
            h = self.plan.height,
            x0 = format_float(self.x.0),
            x1 = format_float(self.x.1),
            y0 = format_float(self.y.0),
            y1 = format_float(self.y.1),
            tx = MARGIN_LEFT + self.inner_width() / 2.0,
            title = escape(title),
        );
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str, y_ticks: &[(f64, String)]) {
        let (left, right) = (MARGIN_LEFT, MARGIN_LEFT + self.inner_width());
        let (top, bottom) = (MARGIN_TOP, MARGIN_TOP + self.inner_height());
        let _ = writeln!(
            out,
            r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            self.inner_width(),
            self.inner_height()
        );
        for i in 0..=5 {
            let v = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 5.0;
            let x = self.px(v);
            let _ = writeln!(
                out,
                r#"<line x1="{x}" y1="{bottom}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
                bottom + 5.0,
                bottom + 19.0,
                tick_label(v)
            );
        }
        for (v, label) in y_ticks {
            let y = self.py(*v);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
                left - 5.0,
                left - 8.0,
                y + 4.0,
                escape(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (left + right) / 2.0,
            bottom + 40.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{cy}" text-anchor="middle" transform="rotate(-90 18 {cy})">{}</text>"#,
            escape(y_label),
            cy = (top + bottom) / 2.0
        );
    }

    fn linear_ticks(&self) -> Vec<(f64, String)> {
        (0..=5)
            .map(|i| {
                let v = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 5.0;
                (v, tick_label(v))
            })
            .collect()
    }
}

fn x_range(x: &[f64]) -> (f64, f64) {
    let lo = x.first().copied().unwrap_or(0.0);
    let hi = x.last().copied().unwrap_or(1.0);
    // Cell centers start half a cell in; extend symmetrically to the road ends.
    let start = lo.min(0.0);
    let end = hi + (lo - start);
    if end > start {
        (start, end)
    } else {
        (start, start + 1.0)
    }
}

fn profile_svg(record: &TraceRecord, plan: PlotPlan, quantity: Quantity, y: (f64, f64)) -> String {
    let frame = Frame {
        plan,
        x: x_range(&record.x),
        y,
    };
    let mut out = String::new();
    let title = format!(
        "{} at t = {} s",
        quantity.title(),
        format_float(record.time)
    );
    frame.open(&mut out, &title);
    frame.axes(
        &mut out,
        "x (m)",
        quantity.axis_label(),
        &frame.linear_ticks(),
    );
    for (i, class) in VehicleClass::ALL.into_iter().enumerate() {
        let values = quantity.values(record, class);
        let points: Vec<String> = record
            .x
            .iter()
            .zip(values)
            .map(|(x, v)| format!("{:.3},{:.3}", frame.px(*x), frame.py(*v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            class_color(class),
            points.join(" ")
        );
        let ly = MARGIN_TOP + 16.0 + 20.0 * i as f64;
        let lx = plan.width - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            class_color(class),
            lx + 28.0,
            ly + 4.0,
            class.name()
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Density,
    Velocity,
}

impl Quantity {
    fn title(self) -> &'static str {
        match self {
            Quantity::Density => "Density",
            Quantity::Velocity => "Velocity",
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            Quantity::Density => "density (normalized)",
            Quantity::Velocity => "velocity (m/s)",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Quantity::Density => "rho",
            Quantity::Velocity => "v",
        }
    }

    fn values(self, r: &TraceRecord, class: VehicleClass) -> &[f64] {
        match self {
            Quantity::Density => r.density(class),
            Quantity::Velocity => r.velocity(class),
        }
    }
}

fn data_max(records: &[TraceRecord], quantity: Quantity) -> f64 {
    records
        .iter()
        .flat_map(|r| {
            VehicleClass::ALL
                .into_iter()
                .flat_map(move |c| quantity.values(r, c).iter())
        })
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

fn velocity_ceiling(records: &[TraceRecord]) -> f64 {
    let v_max = records
        .iter()
        .flat_map(|r| VehicleClass::ALL.map(|c| r.v_max(c)))
        .fold(0.0, f64::max);
    v_max.max(data_max(records, Quantity::Velocity))
}

/// Piecewise-linear approximation of the viridis colormap.
fn colormap(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let i = STOPS
        .iter()
        .rposition(|s| s.0 <= t)
        .unwrap_or(0)
        .min(STOPS.len() - 2);
    let (t0, c0) = STOPS[i];
    let (t1, c1) = STOPS[i + 1];
    let w = (t - t0) / (t1 - t0);
    let c: Vec<u8> = (0..3)
        .map(|k| (c0[k] + w * (c1[k] - c0[k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn heatmap_svg(
    records: &[TraceRecord],
    plan: PlotPlan,
    quantity: Quantity,
    class: VehicleClass,
    range: (f64, f64),
) -> String {
    let x = &records[0].x;
    let rows = records.len();
    let frame = Frame {
        plan,
        x: x_range(x),
        y: (0.0, rows as f64),
    };
    let mut out = String::new();
    let title = format!("{} of {}s over time", quantity.title(), class.name());
    frame.open(&mut out, &title);

    let cell_w = frame.inner_width() / x.len().max(1) as f64;
    let row_h = frame.inner_height() / rows as f64;
    for (i, r) in records.iter().enumerate() {
        // Earliest snapshot at the bottom.
        let top = frame.py((i + 1) as f64);
        for (j, v) in quantity.values(r, class).iter().enumerate() {
            let t = (v - range.0) / (range.1 - range.0);
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                MARGIN_LEFT + j as f64 * cell_w,
                top,
                cell_w + 0.05,
                row_h + 0.05,
                colormap(t)
            );
        }
    }
    let ticks: Vec<(f64, String)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i as f64 + 0.5, format!("{} s", format_float(r.time))))
        .collect();
    frame.axes(&mut out, "x (m)", "time", &ticks);

    // Color bar.
    let bar_x = plan.width - MARGIN_RIGHT + 20.0;
    let bar_h = frame.inner_height();
    for i in 0..50 {
        let t = i as f64 / 49.0;
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.3}" width="18" height="{:.3}" fill="{}"/>"#,
            MARGIN_TOP + (1.0 - t) * bar_h * 49.0 / 50.0,
            bar_h / 50.0 + 0.05,
            colormap(t)
        );
    }
    for (v, y) in [(range.1, MARGIN_TOP + 4.0), (range.0, MARGIN_TOP + bar_h)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}">{}</text>"#,
            bar_x + 24.0,
            tick_label(v)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes all profile plots and heatmaps into `dir`, returning the files written.
pub fn render_plots(
    records: &[TraceRecord],
    plan: PlotPlan,
    dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    if records.is_empty() {
        return Err(OutputError::NoData("trace contains no snapshots".into()));
    }
    if let Some(r) = records.iter().find(|r| r.x.is_empty()) {
        return Err(OutputError::NoData(format!(
            "snapshot at t = {} has no cells",
            r.time
        )));
    }
    fs::create_dir_all(dir).map_err(io_error(dir))?;

    let density_range = (
        0.0,
        round_up(data_max(records, Quantity::Density) * 1.05, 0.1),
    );
    let velocity_range = (0.0, velocity_ceiling(records));

    let mut written = Vec::new();
    let mut put = |name: String, svg: String| -> Result<(), OutputError> {
        let path = dir.join(name);
        fs::write(&path, svg).map_err(io_error(&path))?;
        written.push(path);
        Ok(())
    };
    for r in records {
        let t = format_float(r.time);
        put(
            format!("density_t{t}.svg"),
            profile_svg(r, plan, Quantity::Density, density_range),
        )?;
        put(
            format!("velocity_t{t}.svg"),
            profile_svg(r, plan, Quantity::Velocity, velocity_range),
        )?;
    }
    for quantity in [Quantity::Density, Quantity::Velocity] {
        for class in VehicleClass::ALL {
            let range = match quantity {
                Quantity::Density => density_range,
                Quantity::Velocity => velocity_range,
            };
            put(
                format!("heatmap_{}_{}.svg", quantity.key(), class.suffix()),
                heatmap_svg(records, plan, quantity, class, range),
            )?;
        }
    }
    Ok(written)
}

//! SVG figures. Every figure is also backed by a data table, so these are a
//! convenience rather than the record.

use std::path::Path;

use plotters::prelude::*;
use reachbot::analysis::{FosGrid, TradeRow};
use reachbot::dynamics::Stage;
use reachbot::gait::Waypoint;
use reachbot::sim::{Scenario, Trace};

type Fallible = Result<(), String>;

/// Keeps plots light: at most about this many points per series.
const MAX_POINTS: usize = 2000;

fn thin<T>(items: &[T]) -> impl Iterator<Item = &T> {
    let stride = items.len().div_ceil(MAX_POINTS).max(1);
    let last = items.len().saturating_sub(1);
    items
        .iter()
        .enumerate()
        .filter(move |(k, _)| k % stride == 0 || *k == last)
        .map(|(_, item)| item)
}

fn fail(path: &Path) -> impl Fn(String) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn span(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = pad.max(1e-9 * (hi - lo).abs()).max(1e-9);
    (lo - pad, hi + pad)
}

/// Body path through the hallway with anchors and body waypoints.
pub fn trajectory(path: &Path, scenario: &Scenario, trace: &Trace) -> Fallible {
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (1000, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let anchors = scenario.anchors.anchors();
        let xs = anchors
            .iter()
            .map(|a| a.position.x)
            .chain(trace.records.iter().map(|r| r.body.position().x));
        let ys = anchors
            .iter()
            .map(|a| a.position.y)
            .chain(trace.records.iter().map(|r| r.body.position().y));
        let (x0, x1) = span(xs, 0.5);
        let (y0, y1) = span(ys, 0.5);
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{}: body path", scenario.name), ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(x0..x1, y0..y1)?;
        chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw()?;
        chart
            .draw_series(LineSeries::new(
                thin(&trace.records).map(|r| (r.body.position().x, r.body.position().y)),
                &BLUE,
            ))?
            .label("body")
            .legend(|(x, y)| PathElement::new([(x, y), (x + 15, y)], BLUE));
        chart
            .draw_series(
                anchors
                    .iter()
                    .map(|a| Circle::new((a.position.x, a.position.y), 4, BLACK.filled())),
            )?
            .label("anchor")
            .legend(|(x, y)| Circle::new((x + 7, y), 4, BLACK.filled()));
        let goals = scenario.program.waypoints().iter().filter_map(|w| match w {
            Waypoint::Body { position, .. } => Some((position.x, position.y)),
            Waypoint::EndEffector { .. } => None,
        });
        chart
            .draw_series(goals.map(|p| Cross::new(p, 5, RED)))?
            .label("body waypoint")
            .legend(|(x, y)| Cross::new((x + 7, y), 5, RED));
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| e.to_string()).map_err(fail(path))
}

/// Distance to the active waypoint against time. Body moves are blue,
/// end-effector moves orange.
pub fn errors(path: &Path, trace: &Trace) -> Fallible {
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (1000, 400)).into_drawing_area();
        root.fill(&WHITE)?;
        let t1 = trace.final_time().max(trace.dt);
        let (_, e1) = span(trace.records.iter().map(|r| r.error.position), 0.0);
        let mut chart = ChartBuilder::on(&root)
            .caption("position error", ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..t1, 0.0..e1.max(1e-3) * 1.05)?;
        chart.configure_mesh().x_desc("time (s)").y_desc("error (m)").draw()?;
        let orange = RGBColor(230, 120, 20);
        // One polyline per stage segment.
        let mut start = 0;
        let records = &trace.records;
        while start < records.len() {
            let w = records[start].waypoint;
            let end = start + records[start..].iter().take_while(|r| r.waypoint == w).count();
            let color = match records[start].stage {
                Stage::BodyMove => BLUE,
                Stage::EndEffectorMove(_) => orange,
            };
            chart.draw_series(LineSeries::new(
                thin(&records[start..end]).map(|r| (r.time, r.error.position)),
                &color,
            ))?;
            start = end;
        }
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| e.to_string()).map_err(fail(path))
}

fn fos_color(v: f64) -> RGBColor {
    // Red below 1, then white to green up to 3.
    if v < 1.0 {
        let k = v.clamp(0.0, 1.0);
        RGBColor(200, (60.0 + 140.0 * k) as u8, (60.0 + 140.0 * k) as u8)
    } else {
        let k = ((v - 1.0) / 2.0).clamp(0.0, 1.0);
        RGBColor((235.0 - 195.0 * k) as u8, (245.0 - 85.0 * k) as u8, (235.0 - 175.0 * k) as u8)
    }
}

/// Factor of safety over the disturbance grid. Cells below 1 are red.
pub fn fos_map(path: &Path, grid: &FosGrid) -> Fallible {
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (640, 600)).into_drawing_area();
        root.fill(&WHITE)?;
        let (nx, ny) = (grid.fx.len(), grid.fy.len());
        let dx = (grid.fx[nx - 1] - grid.fx[0]) / (nx - 1) as f64;
        let dy = (grid.fy[ny - 1] - grid.fy[0]) / (ny - 1) as f64;
        let mut chart = ChartBuilder::on(&root)
            .caption(
                format!("factor of safety, pretension {} N", grid.pretension),
                ("sans-serif", 20),
            )
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(
                grid.fx[0] - 0.5 * dx..grid.fx[nx - 1] + 0.5 * dx,
                grid.fy[0] - 0.5 * dy..grid.fy[ny - 1] + 0.5 * dy,
            )?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc("disturbance Fx (N)")
            .y_desc("disturbance Fy (N)")
            .draw()?;
        chart.draw_series((0..ny).flat_map(|r| {
            (0..nx).map(move |c| {
                let (x, y) = (grid.fx[c], grid.fy[r]);
                Rectangle::new(
                    [(x - 0.5 * dx, y - 0.5 * dy), (x + 0.5 * dx, y + 0.5 * dy)],
                    fos_color(grid.at(r, c)).filled(),
                )
            })
        }))?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| e.to_string()).map_err(fail(path))
}

/// Response time against plant mass; clipped runs are drawn hollow.
pub fn trade(path: &Path, rows: &[TradeRow]) -> Fallible {
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (700, 450)).into_drawing_area();
        root.fill(&WHITE)?;
        let (m0, m1) = span(rows.iter().map(|r| r.mass_kg), 5.0);
        let (_, t1) = span(rows.iter().map(|r| r.response_time_s), 0.0);
        let mut chart = ChartBuilder::on(&root)
            .caption("response time against mass", ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(m0..m1, 0.0..t1 * 1.1)?;
        chart
            .configure_mesh()
            .x_desc("mass (kg)")
            .y_desc("response time (s)")
            .draw()?;
        chart.draw_series(LineSeries::new(
            rows.iter().map(|r| (r.mass_kg, r.response_time_s)),
            &BLUE,
        ))?;
        chart.draw_series(rows.iter().map(|r| {
            let style = if r.clipped { BLUE.stroke_width(1) } else { BLUE.filled() };
            Circle::new((r.mass_kg, r.response_time_s), 4, style)
        }))?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| e.to_string()).map_err(fail(path))
}

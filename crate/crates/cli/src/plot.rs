//! SVG line charts of the CSV series.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

/// Draws `series` plus dotted horizontal `references`; returns the path written.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    references: &[f64],
) -> Result<PathBuf, CliError> {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for &r in references {
        y0 = y0.min(r);
        y1 = y1.max(r);
    }
    if !(x0.is_finite() && y0.is_finite()) {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-12);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;

    for &r in references {
        let dotted = (0..=40).map(|k| x0 + (x1 - x0) * k as f64 / 40.0).collect::<Vec<_>>();
        chart
            .draw_series(dotted.chunks(2).filter(|c| c.len() == 2).map(|c| PathElement::new(vec![(c[0], r), (c[1], r)], BLACK)))
            .map_err(plot_err)?;
    }
    for (k, s) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(path.to_path_buf())
}

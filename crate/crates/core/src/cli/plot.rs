//! Static SVG line plots of run histories and final states. Output is a
//! pure function of the inputs: identical data produces byte-identical
//! files.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("no histories to plot")]
    Empty,
    #[error("{0}: missing column `{1}`")]
    MissingColumn(PathBuf, String),
    #[error("state plots support one-dimensional problems (found columns {0})")]
    NotOneDimensional(usize),
    #[error("{0}: malformed csv: {1}")]
    Malformed(PathBuf, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `l2_error` against epoch, log-scale vertical axis.
    ErrorVsStep,
    /// Final state `u_theta(x)` with the exact solution dashed.
    StateVsX,
}

impl std::str::FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "error_vs_step" => Ok(PlotKind::ErrorVsStep),
            "state_vs_x" => Ok(PlotKind::StateVsX),
            other => Err(format!(
                "unknown plot kind `{other}` (expected error_vs_step or state_vs_x)"
            )),
        }
    }
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

fn read_csv_columns(
    path: &Path,
    wanted: &[&str],
) -> Result<Vec<Vec<Option<f64>>>, PlotError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| PlotError::Malformed(path.into(), "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            cols.iter()
                .position(|c| c == w)
                .ok_or_else(|| PlotError::MissingColumn(path.into(), w.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let row: Vec<Option<f64>> = idx
            .iter()
            .map(|&i| fields.get(i).and_then(|f| f.parse::<f64>().ok()))
            .collect();
        rows.push(row);
    }
    Ok(rows)
}

/// Render the requested plot from `(label, directory)` pairs into `out`.
pub fn emit_plot(inputs: &[(String, PathBuf)], kind: PlotKind, out: &Path) -> Result<(), PlotError> {
    if inputs.is_empty() {
        return Err(PlotError::Empty);
    }
    let svg = match kind {
        PlotKind::ErrorVsStep => {
            let mut series = Vec::new();
            for (label, dir) in inputs {
                let rows = read_csv_columns(&dir.join("history.csv"), &["epoch", "l2_error"])?;
                let points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter_map(|r| match (r[0], r[1]) {
                        (Some(x), Some(y)) if y.is_finite() => Some((x, y.clamp(1e-16, 1e16))),
                        _ => None,
                    })
                    .collect();
                if points.is_empty() {
                    return Err(PlotError::Empty);
                }
                series.push(Series {
                    label: label.clone(),
                    points,
                    dashed: false,
                });
            }
            render(&series, "epoch", "relative L2 error", true)
        }
        PlotKind::StateVsX => {
            let mut series = Vec::new();
            for (i, (label, dir)) in inputs.iter().enumerate() {
                let path = dir.join("final_state.csv");
                let text = std::fs::read_to_string(&path)?;
                let header = text
                    .lines()
                    .next()
                    .ok_or_else(|| PlotError::Malformed(path.clone(), "empty file".into()))?;
                let xcols = header.split(',').filter(|c| c.starts_with('x')).count();
                if xcols != 1 {
                    return Err(PlotError::NotOneDimensional(xcols));
                }
                let rows = read_csv_columns(&path, &["x0", "u_theta", "u_exact"])?;
                let state: Vec<(f64, f64)> = rows
                    .iter()
                    .filter_map(|r| match (r[0], r[1]) {
                        (Some(x), Some(y)) if y.is_finite() => Some((x, y)),
                        _ => None,
                    })
                    .collect();
                if state.is_empty() {
                    return Err(PlotError::Empty);
                }
                series.push(Series {
                    label: label.clone(),
                    points: state,
                    dashed: false,
                });
                if i == 0 {
                    let exact: Vec<(f64, f64)> = rows
                        .iter()
                        .filter_map(|r| match (r[0], r[2]) {
                            (Some(x), Some(y)) if y.is_finite() => Some((x, y)),
                            _ => None,
                        })
                        .collect();
                    if !exact.is_empty() {
                        series.push(Series {
                            label: "exact".into(),
                            points: exact,
                            dashed: true,
                        });
                    }
                }
            }
            render(&series, "x", "u(x)", false)
        }
    };
    std::fs::write(out, svg)?;
    Ok(())
}

fn render(series: &[Series], x_label: &str, y_label: &str, log_y: bool) -> String {
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            let y = if log_y { y.log10() } else { y };
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::with_capacity(16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes box.
    svg.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    // Vertical ticks: decades on log scale, five divisions otherwise.
    if log_y {
        let mut d = y0 as i64;
        while d <= y1 as i64 {
            let y = py(d as f64);
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#cccccc\"/>\n",
                MARGIN_L,
                WIDTH - MARGIN_R
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">1e{d}</text>\n",
                MARGIN_L - 6.0,
                y + 4.0
            ));
            d += 1;
        }
    } else {
        for i in 0..=5 {
            let v = y0 + (y1 - y0) * i as f64 / 5.0;
            let y = py(v);
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#cccccc\"/>\n",
                MARGIN_L,
                WIDTH - MARGIN_R
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{v:.3}</text>\n",
                MARGIN_L - 6.0,
                y + 4.0
            ));
        }
    }
    for i in 0..=5 {
        let v = x0 + (x1 - x0) * i as f64 / 5.0;
        let x = px(v);
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\">{v:.0}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">{x_label}</text>\n",
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {:.2})\">{y_label}</text>\n",
        MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
        MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0
    ));
    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| {
                let y = if log_y { y.log10() } else { y };
                format!("{:.2},{:.2}", px(x), py(y))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            pts.join(" ")
        ));
        // Legend entry.
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n",
            WIDTH - MARGIN_R + 10.0,
            WIDTH - MARGIN_R + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>\n",
            WIDTH - MARGIN_R + 40.0,
            ly + 4.0,
            xml_escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Find plottable run directories under `input`: either the directory
/// itself (when it holds a `history.csv`) or its immediate
/// subdirectories, sorted by name.
pub fn discover_runs(input: &Path) -> Result<Vec<(String, PathBuf)>, PlotError> {
    if input.join("history.csv").exists() {
        let label = input
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        return Ok(vec![(label, input.to_path_buf())]);
    }
    let mut found = Vec::new();
    if input.is_dir() {
        for entry in std::fs::read_dir(input)? {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() && path.join("history.csv").exists() {
                found.push((entry.file_name().to_string_lossy().into_owned(), path));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    if found.is_empty() {
        return Err(PlotError::Empty);
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uzawa::HistoryRow;

    fn fake_history(dir: &Path, n: usize, scale: f64) {
        std::fs::create_dir_all(dir).unwrap();
        let rows: Vec<HistoryRow> = (1..=n)
            .map(|k| HistoryRow {
                uzawa_step: k as u64,
                epoch: (40 * k) as u64,
                loss: 1.0 / k as f64,
                l2_error: scale / k as f64,
                boundary_l2_error: 0.1 / k as f64,
                h1_error: Some(2.0 / k as f64),
                lambda_norm: 0.2,
                seconds: 0.01 * k as f64,
            })
            .collect();
        crate::cli::runner::write_history_csv(&dir.join("history.csv"), &rows).unwrap();
    }

    #[test]
    fn single_run_produces_one_polyline() {
        let root = std::env::temp_dir().join(format!("duz_plot_single_{}", std::process::id()));
        let dir = root.join("run");
        fake_history(&dir, 10, 1.0);
        let out = root.join("plot.svg");
        emit_plot(&[("run".into(), dir)], PlotKind::ErrorVsStep, &out).unwrap();
        let svg = std::fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("1e-1"), "log decade tick expected");
        std::fs::remove_dir_all(root).ok();
    }

    #[test]
    fn sweep_plot_has_legend_per_series_and_is_deterministic() {
        let root = std::env::temp_dir().join(format!("duz_plot_sweep_{}", std::process::id()));
        for (i, name) in ["rho=0.1", "rho=1", "rho=2", "rho=5", "rho=10"].iter().enumerate() {
            fake_history(&root.join(name), 12, 1.0 + i as f64);
        }
        let runs = discover_runs(&root).unwrap();
        assert_eq!(runs.len(), 5);
        let out1 = root.join("a.svg");
        let out2 = root.join("b.svg");
        emit_plot(&runs, PlotKind::ErrorVsStep, &out1).unwrap();
        emit_plot(&runs, PlotKind::ErrorVsStep, &out2).unwrap();
        let (a, b) = (std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
        assert_eq!(a, b, "identical inputs must produce identical bytes");
        let svg = String::from_utf8(a).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 5);
        for name in ["rho=0.1", "rho=1", "rho=2", "rho=5", "rho=10"] {
            assert!(svg.contains(name));
        }
        std::fs::remove_dir_all(root).ok();
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            emit_plot(&[], PlotKind::ErrorVsStep, Path::new("/tmp/never.svg")),
            Err(PlotError::Empty)
        ));
        let root = std::env::temp_dir().join(format!("duz_plot_none_{}", std::process::id()));
        std::fs::create_dir_all(&root).unwrap();
        assert!(matches!(discover_runs(&root), Err(PlotError::Empty)));
        std::fs::remove_dir_all(root).ok();
    }
}

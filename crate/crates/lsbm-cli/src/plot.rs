//! Plot-data emission for the overlap figures: per-pair CSV series with the
//! critical eps marked in the header, plus an optional self-contained SVG
//! line chart for quick inspection.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::sweep::Series;
use crate::textfmt::sig9;

/// Writes one CSV per `(a, b)` pair next to `out_stem`:
/// `<stem>.series<k>.csv` with a `# a=.. b=.. eps_star=..` marker line, a
/// header row, and `(eps, mean overlap, standard error, seeds)` rows.
pub fn emit_plot_data(series: &[Series], out_stem: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(series.len());
    for (k, s) in series.iter().enumerate() {
        let path = PathBuf::from(format!("{}.series{k}.csv", out_stem.display()));
        let file =
            File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "# a={} b={} eps_star={}",
            sig9(s.a),
            sig9(s.b),
            sig9(s.eps_star)
        )?;
        writeln!(w, "eps,mean_q,se_q,seeds")?;
        for p in &s.points {
            writeln!(
                w,
                "{},{},{},{}",
                sig9(p.eps),
                sig9(p.mean_q),
                sig9(p.se_q),
                p.seeds
            )?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Renders the overlap curves as a simple SVG line chart: one polyline per
/// `(a, b)` pair and a dashed vertical threshold line in the same color.
pub fn render_svg(series: &[Series], path: &Path) -> Result<()> {
    let (width, height) = (640.0, 440.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 20.0, 50.0);
    let (pw, ph) = (width - ml - mr, height - mt - mb);
    let x_of = |eps: f64| ml + pw * (eps / 0.5);
    let y_of = |q: f64| mt + ph * (1.0 - q.clamp(0.0, 1.0));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes and ticks.
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    for i in 0..=5 {
        let eps = 0.1 * i as f64;
        let x = x_of(eps);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            mt + ph,
            mt + ph + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{eps:.1}</text>\n",
            mt + ph + 20.0
        ));
    }
    for i in 0..=5 {
        let q = 0.2 * i as f64;
        let y = y_of(q);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ml}\" y2=\"{y}\" stroke=\"black\"/>\n",
            ml - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{q:.1}</text>\n",
            ml - 10.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">eps</text>\n",
        ml + pw / 2.0,
        height - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">overlap Q</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0
    ));

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.mean_q.is_finite())
            .map(|p| format!("{:.2},{:.2}", x_of(p.eps), y_of(p.mean_q)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        if (0.0..=0.5).contains(&s.eps_star) {
            let x = x_of(s.eps_star);
            svg.push_str(&format!(
                "<line x1=\"{x}\" y1=\"{mt}\" x2=\"{x}\" y2=\"{}\" stroke=\"{color}\" \
                 stroke-dasharray=\"4 3\"/>\n",
                mt + ph
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">a={} b={}</text>\n",
            ml + 10.0,
            mt + 16.0 * (k + 1) as f64,
            s.a,
            s.b
        ));
    }
    svg.push_str("</svg>\n");

    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::SeriesPoint;
    use tempfile::tempdir;

    fn demo_series() -> Vec<Series> {
        vec![Series {
            a: 5.0,
            b: 5.0,
            eps_star: 0.223606797749979,
            points: vec![
                SeriesPoint {
                    eps: 0.1,
                    mean_q: 0.01,
                    se_q: 0.002,
                    seeds: 5,
                },
                SeriesPoint {
                    eps: 0.4,
                    mean_q: 0.6,
                    se_q: 0.01,
                    seeds: 5,
                },
            ],
        }]
    }

    #[test]
    fn emits_marker_line_and_rows() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("fig");
        let files = emit_plot_data(&demo_series(), &stem).unwrap();
        assert_eq!(files.len(), 1);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let mut lines = text.lines();
        let marker = lines.next().unwrap();
        assert!(marker.starts_with("# a=5.00000000 b=5.00000000 eps_star=0.223606798"));
        assert_eq!(lines.next().unwrap(), "eps,mean_q,se_q,seeds");
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn one_file_per_pair_each_with_its_marker() {
        let mut series = demo_series();
        for (a, b) in [(1.0, 3.0), (8.0, 12.0)] {
            let mut s = series[0].clone();
            s.a = a;
            s.b = b;
            s.eps_star = crate::sweep::critical_eps(a, b);
            series.push(s);
        }
        let dir = tempdir().unwrap();
        let files = emit_plot_data(&series, &dir.path().join("fig")).unwrap();
        assert_eq!(files.len(), 3);
        for (file, s) in files.iter().zip(&series) {
            let text = std::fs::read_to_string(file).unwrap();
            assert!(text.starts_with(&format!("# a={} b={}", sig9(s.a), sig9(s.b))));
            assert_eq!(text.matches("eps_star").count(), 1);
        }
    }

    #[test]
    fn svg_renders_curves_and_threshold() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fig.svg");
        render_svg(&demo_series(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("<polyline"));
        assert!(text.contains("stroke-dasharray"));
        assert!(text.contains("</svg>"));
    }
}

//! Minimal static SVG rendering for the report bundle: threshold-curve line
//! charts and shift scatter plots. Data-first outputs (CSV/JSON) are written
//! by the callers; these charts are a convenience view.

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::EPSILON);
        MARGIN_LEFT + (v - self.x_min) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::EPSILON);
        HEIGHT - MARGIN_BOTTOM - (v - self.y_min) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut svg = String::new();
    let x0 = frame.x(frame.x_min);
    let x1 = frame.x(frame.x_max);
    let y0 = frame.y(frame.y_min);
    let y1 = frame.y(frame.y_max);
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=5 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 5.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 5.0;
        let px = frame.x(fx);
        let py = frame.y(fy);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{fx:.2}</text>\n",
            y0 + 18.0
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\n",
            x0 - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{fy:.2}</text>\n",
            x0 - 8.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));
    svg
}

fn legend(labels: &[String]) -> String {
    let mut svg = String::new();
    for (i, label) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 16.0 * i as f64;
        let x = WIDTH - MARGIN_RIGHT + 12.0;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            y - 9.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y}\" font-size=\"12\">{label}</text>\n",
            x + 14.0
        ));
    }
    svg
}

fn document(body: String) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Render one polyline per labeled series over a [0, 1] x [0, 1] frame.
pub fn line_chart(series: &[(String, Vec<(f64, f64)>)], x_label: &str, y_label: &str) -> String {
    let x_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|(x, _)| *x))
        .fold(1.0_f64, f64::max);
    let frame = Frame {
        x_min: 0.0,
        x_max,
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut body = axes(&frame, x_label, y_label);
    for (i, (_, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", frame.x(*x), frame.y(*y)))
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            coords.join(" ")
        ));
    }
    let labels: Vec<String> = series.iter().map(|(l, _)| l.clone()).collect();
    body.push_str(&legend(&labels));
    document(body)
}

/// Render labeled point sets with the x = y reference diagonal.
pub fn scatter_chart(series: &[(String, Vec<(f64, f64)>)], x_label: &str, y_label: &str) -> String {
    let max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().flat_map(|(x, y)| [*x, *y]))
        .fold(0.1_f64, f64::max)
        * 1.05;
    let frame = Frame {
        x_min: 0.0,
        x_max: max,
        y_min: 0.0,
        y_max: max,
    };
    let mut body = axes(&frame, x_label, y_label);
    body.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>\n",
        frame.x(0.0),
        frame.y(0.0),
        frame.x(max),
        frame.y(max)
    ));
    for (i, (_, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (x, y) in points {
            body.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{color}\" fill-opacity=\"0.7\"/>\n",
                frame.x(*x),
                frame.y(*y)
            ));
        }
    }
    let labels: Vec<String> = series.iter().map(|(l, _)| l.clone()).collect();
    body.push_str(&legend(&labels));
    document(body)
}

//! Dependency-free SVG rendering: survival curves with the flagged
//! departure intervals shaded, and power heatmaps with the transition
//! curves overlaid. Output is a deterministic byte string.

use crate::data::KaplanMeierCurve;
use crate::phase::{PowerGrid, RhoEstimate, TransitionCurve};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 16.0;
const MARGIN_B: f64 = 44.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn plot() -> Frame {
        Frame {
            x0: MARGIN_L,
            x1: WIDTH - MARGIN_R,
            y0: MARGIN_T,
            y1: HEIGHT - MARGIN_B,
        }
    }

    /// Map unit coordinates (u right, v up) into pixel space.
    fn px(&self, u: f64) -> f64 {
        self.x0 + u * (self.x1 - self.x0)
    }

    fn py(&self, v: f64) -> f64 {
        self.y1 - v * (self.y1 - self.y0)
    }
}

fn open_svg(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        fmt(f.x0),
        fmt(f.y0),
        fmt(f.x1 - f.x0),
        fmt(f.y1 - f.y0)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt((f.x0 + f.x1) / 2.0),
        fmt(HEIGHT - 10.0),
        x_label
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        fmt((f.y0 + f.y1) / 2.0),
        fmt((f.y0 + f.y1) / 2.0),
        y_label
    ));
}

fn step_path(f: &Frame, values: &[f64], t_len: usize) -> String {
    // step function: survival is 1 at t = 0 and values[t-1] on (t-1, t]
    let mut d = format!("M {} {}", fmt(f.px(0.0)), fmt(f.py(1.0)));
    let mut last = 1.0;
    for (i, &s) in values.iter().enumerate() {
        let u_right = (i + 1) as f64 / t_len as f64;
        if s != last {
            d.push_str(&format!(
                " L {} {}",
                fmt(f.px(i as f64 / t_len as f64)),
                fmt(f.py(s))
            ));
            last = s;
        }
        d.push_str(&format!(" L {} {}", fmt(f.px(u_right)), fmt(f.py(s))));
    }
    d
}

/// Render survival curves for both groups. `delta_star` lists 1-based
/// interval indices to shade; `censor_ticks` lists (t, group-y flag)
/// pairs marked with a "+" at the curve height.
pub fn km_svg(
    curve: &KaplanMeierCurve,
    delta_star: &[usize],
    censor_ticks: &[(usize, bool)],
) -> String {
    let t_len = curve.s_x.len();
    let f = Frame::plot();
    let mut out = String::new();
    open_svg(&mut out);
    for &t in delta_star {
        let u_left = (t - 1) as f64 / t_len as f64;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#cccccc\"/>\n",
            fmt(f.px(u_left)),
            fmt(f.y0),
            fmt((f.x1 - f.x0) / t_len as f64),
            fmt(f.y1 - f.y0)
        ));
    }
    axes(&mut out, &f, "interval", "survival proportion");
    out.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
        step_path(&f, &curve.s_x, t_len)
    ));
    out.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
        step_path(&f, &curve.s_y, t_len)
    ));
    for &(t, is_y) in censor_ticks {
        let s = if is_y {
            curve.s_y[t - 1]
        } else {
            curve.s_x[t - 1]
        };
        let color = if is_y { "#d62728" } else { "#1f77b4" };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{}\" text-anchor=\"middle\">+</text>\n",
            fmt(f.px((t as f64 - 0.5) / t_len as f64)),
            fmt(f.py(s) + 4.0),
            color
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" fill=\"#1f77b4\">group x</text>\n",
        fmt(f.x0 + 8.0),
        fmt(f.y0 + 16.0)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" fill=\"#d62728\">group y</text>\n",
        fmt(f.x0 + 8.0),
        fmt(f.y0 + 32.0)
    ));
    out.push_str("</svg>\n");
    out
}

fn heat_color(power: f64) -> String {
    // white at 0 through dark blue at 1
    let p = power.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - p)).round() as u8;
    let g = (255.0 * (1.0 - 0.7 * p)).round() as u8;
    let b = (255.0 * (1.0 - 0.4 * p)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Render a power heatmap over the (r, beta) plane with the theoretical
/// curve (solid) and the fitted transition points (circles) overlaid.
pub fn heatmap_svg(grid: &PowerGrid, curve: &TransitionCurve) -> String {
    let f = Frame::plot();
    let mut out = String::new();
    open_svg(&mut out);
    let n_b = grid.beta_grid.len();
    let n_r = grid.r_grid.len();
    let beta_lo = grid.beta_grid[0];
    let beta_hi = *grid.beta_grid.last().unwrap();
    let r_lo = grid.r_grid[0];
    let r_hi = *grid.r_grid.last().unwrap();
    let beta_span = (beta_hi - beta_lo).max(f64::MIN_POSITIVE);
    let r_span = (r_hi - r_lo).max(f64::MIN_POSITIVE);
    let u_of = |beta: f64| (beta - beta_lo) / beta_span;
    let v_of = |r: f64| (r - r_lo) / r_span;
    let cell_w = (f.x1 - f.x0) / n_b as f64;
    let cell_h = (f.y1 - f.y0) / n_r as f64;
    for (bi, row) in grid.power.iter().enumerate() {
        for (ri, &p) in row.iter().enumerate() {
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                fmt(f.x0 + bi as f64 * cell_w),
                fmt(f.y1 - (ri + 1) as f64 * cell_h),
                fmt(cell_w),
                fmt(cell_h),
                heat_color(p)
            ));
        }
    }
    axes(&mut out, &f, "beta", "r");
    let mut d = String::new();
    for (i, point) in curve.points.iter().enumerate() {
        let cmd = if i == 0 { "M" } else { "L" };
        d.push_str(&format!(
            "{} {} {} ",
            cmd,
            fmt(f.px(u_of(point.beta))),
            fmt(f.py(v_of(point.rho_theory.clamp(r_lo, r_hi))))
        ));
    }
    out.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
        d.trim_end()
    ));
    for point in &curve.points {
        let r = match point.rho_hat {
            RhoEstimate::Value(v) => v,
            RhoEstimate::AtMostMin(v) | RhoEstimate::AboveMax(v) => v,
            RhoEstimate::Undefined => continue,
        };
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"none\" stroke=\"#d62728\" \
             stroke-width=\"1.5\"/>\n",
            fmt(f.px(u_of(point.beta))),
            fmt(f.py(v_of(r.clamp(r_lo, r_hi))))
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{Statistic, TransitionPoint};

    fn sample_curve() -> KaplanMeierCurve {
        KaplanMeierCurve {
            s_x: vec![0.9, 0.8, 0.7],
            s_y: vec![0.8, 0.5, 0.4],
        }
    }

    #[test]
    fn km_svg_is_wellformed_and_stable() {
        let svg = km_svg(&sample_curve(), &[2], &[(3, false)]);
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches("#cccccc").count(), 1);
        let again = km_svg(&sample_curve(), &[2], &[(3, false)]);
        assert_eq!(svg, again);
    }

    #[test]
    fn heatmap_svg_draws_every_cell() {
        let grid = PowerGrid {
            statistic: Statistic::Hchg,
            beta_grid: vec![0.6, 0.8],
            r_grid: vec![0.5, 1.0, 1.5],
            power: vec![vec![0.1, 0.5, 0.9], vec![0.0, 0.3, 1.0]],
            substantial: vec![vec![false, true, true], vec![false, false, true]],
            n_reps: 100,
            alpha: 0.05,
            alpha1: 0.05,
            null_quantile: 2.0,
        };
        let curve = TransitionCurve {
            statistic: Statistic::Hchg,
            points: vec![
                TransitionPoint {
                    beta: 0.6,
                    theta0: 1.0,
                    theta1: -1.0,
                    rho_hat: RhoEstimate::Value(1.0),
                    rho_theory: 0.2,
                    rho_bonf: 0.27,
                },
                TransitionPoint {
                    beta: 0.8,
                    theta0: 1.2,
                    theta1: -1.0,
                    rho_hat: RhoEstimate::Undefined,
                    rho_theory: 0.62,
                    rho_bonf: 0.62,
                },
            ],
        };
        let svg = heatmap_svg(&grid, &curve);
        // 6 heat cells plus the frame rect and background
        assert_eq!(svg.matches("<rect").count(), 8);
        // undefined estimates are skipped
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}

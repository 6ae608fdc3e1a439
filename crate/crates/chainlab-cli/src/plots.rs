//! Emission of plain-text gnuplot scripts next to each report.

use std::collections::BTreeMap;

use chainlab::experiment::ExperimentReport;

/// Pick the cell slice to draw: the smallest order, the most frequent ring
/// size (the fixed-n sweep in two-sweep reports), and the largest time.
fn plot_slice(report: &ExperimentReport) -> (usize, usize, f64) {
    let m_sel = report.cells.iter().map(|c| c.m).min().unwrap_or(0);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &report.cells {
        *counts.entry(c.n).or_insert(0) += 1;
    }
    let n_sel = counts
        .into_iter()
        .max_by_key(|&(_, cnt)| cnt)
        .map(|(n, _)| n)
        .unwrap_or(0);
    let t_sel = report
        .cells
        .iter()
        .filter(|c| c.m == m_sel && c.n == n_sel)
        .map(|c| c.t)
        .fold(0.0, f64::max);
    (m_sel, n_sel, t_sel)
}

/// A log-log plot of the relevant variance column against β for one slice
/// of the report, with the reference slopes of the experiment kind overlaid.
pub fn gnuplot_script(report: &ExperimentReport, csv_name: &str) -> String {
    let (ycol, ylabel, refs): (usize, &str, &[(f64, &str)]) = match report.kind.as_str() {
        "drift" => (6, "var of increment", &[(-4.0, "slope -4"), (-5.0, "slope -5")]),
        "packet" => (6, "var of packet increment", &[(-1.0, "slope -1")]),
        "floor" => (8, "equilibrium variance", &[(-2.0, "slope -2"), (-3.0, "slope -3")]),
        "bracket" => (6, "bracket mean square", &[(-4.0, "slope -4")]),
        _ => (6, "variance", &[]),
    };
    let (m_sel, n_sel, t_sel) = plot_slice(report);
    let anchor = report
        .cells
        .iter()
        .filter(|c| c.m == m_sel && c.n == n_sel && c.t == t_sel)
        .map(|c| (c.beta, if ycol == 8 { c.var0 } else { c.var_drift }))
        .find(|&(_, v)| v.is_finite() && v > 0.0)
        .unwrap_or((1.0, 1.0));
    let mut script = String::new();
    script.push_str("# generated alongside the report; reads the CSV next to it\n");
    script.push_str(&format!(
        "# slice: m = {m_sel}, n = {n_sel}, t = {t_sel}\n"
    ));
    script.push_str("set logscale xy\nset xlabel 'beta'\n");
    script.push_str(&format!("set ylabel '{ylabel}'\n"));
    script.push_str("set key left bottom\nset datafile separator ','\n");
    // rows outside the slice get an undefined x and vanish from the plot
    let filter = format!(
        "(($1 == {m_sel} && $3 == {n_sel} && $4 == {t_sel}) ? $2 : 1/0)"
    );
    let mut plot = format!(
        "plot '{csv_name}' every ::1 using {filter}:{ycol} with points pt 7 title 'measured'"
    );
    for (slope, label) in refs {
        plot.push_str(&format!(
            ", {:.6e} * (x/{:.6e})**({}) with lines title '{}'",
            anchor.1, anchor.0, slope, label
        ));
    }
    plot.push('\n');
    script.push_str(&plot);
    script
}

//! Gnuplot script emission for convergence studies: log-log error-vs-h
//! curves, one panel per (method, tableau) pair, one series per rank, with a
//! dashed slope guide of the tableau's order anchored to the data.

use dlra::{builtin, ConvergenceRecord, StudyConfig};
use std::fmt::Write;

fn tableau_order(cfg: &StudyConfig, name: &str) -> Option<usize> {
    cfg.custom_tableaux
        .iter()
        .find(|t| t.name == name)
        .map(|t| t.order)
        .or_else(|| builtin(name).ok().map(|t| t.order))
}

pub fn gnuplot_script(cfg: &StudyConfig, records: &[ConvergenceRecord], csv_name: &str) -> String {
    let mut panels: Vec<(String, String)> = Vec::new();
    for rec in records {
        let key = (rec.method.clone(), rec.tableau.clone());
        if !panels.contains(&key) {
            panels.push(key);
        }
    }
    let n_panels = panels.len().max(1);
    let cols = (n_panels as f64).sqrt().ceil() as usize;
    let rows = n_panels.div_ceil(cols);

    let h_max = cfg.h_values.first().copied().unwrap_or(1.0);
    let h_min = cfg.h_values.last().copied().unwrap_or(h_max);
    let stem = csv_name.strip_suffix(".csv").unwrap_or(csv_name);

    let mut s = String::new();
    let _ = writeln!(s, "# generated by dlra convergence; run from the output directory:");
    let _ = writeln!(s, "#   gnuplot {stem}.gp");
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set format y \"10^{{%T}}\"");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set xlabel \"step size h\"");
    let _ = writeln!(s, "set ylabel \"max error vs reference\"");
    let _ = writeln!(s, "set key bottom right font \",8\"");
    let _ = writeln!(s, "set terminal pngcairo size {},{} enhanced", 640 * cols, 480 * rows);
    let _ = writeln!(s, "set output \"{stem}.png\"");
    let _ = writeln!(
        s,
        "set multiplot layout {rows},{cols} title \"{} n={} theta={:e}\"",
        cfg.problem.kind.as_str(),
        cfg.problem.n,
        cfg.problem.resolved_theta()
    );
    let _ = writeln!(s, "set xrange [{:e}:{:e}]", h_min * 0.7, h_max * 1.4);

    for (method, tableau) in &panels {
        let order = tableau_order(cfg, tableau);
        let _ = writeln!(s);
        let _ = match order {
            Some(p) => writeln!(s, "set title \"{method} / {tableau} (order {p})\""),
            None => writeln!(s, "set title \"{method} / {tableau}\""),
        };
        let mut lines: Vec<String> = Vec::new();
        for &r in &cfg.r_values {
            lines.push(format!(
                "  \"{csv_name}\" skip 1 using \
                 (strcol(4) eq \"{method}\" && strcol(5) eq \"{tableau}\" && $7 == {r} \
                 ? $6 : 1/0):8 with linespoints title \"r={r}\""
            ));
        }
        // slope guide anchored at the coarsest finite point of the largest rank
        if let (Some(p), Some(&r_top)) = (order, cfg.r_values.last()) {
            let anchor = records
                .iter()
                .filter(|rec| {
                    rec.method == *method
                        && rec.tableau == *tableau
                        && rec.r == r_top
                        && rec.error.is_finite()
                        && rec.error > 0.0
                })
                .max_by(|a, b| a.h.partial_cmp(&b.h).unwrap());
            if let Some(a) = anchor {
                let c = a.error / a.h.powi(p as i32);
                lines.push(format!(
                    "  {c:e} * x**{p} with lines dashtype 2 linecolor \"gray40\" title \"O(h^{p})\""
                ));
            }
        }
        let _ = writeln!(s, "plot \\\n{}", lines.join(", \\\n"));
    }
    let _ = writeln!(s, "\nunset multiplot");
    s
}

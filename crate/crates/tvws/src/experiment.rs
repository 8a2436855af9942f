//! City-scale gain experiments, evaluated in parallel.

use std::fmt::Write as _;

use rayon::prelude::*;

use tvws_core::geo::PowerClass;
use tvws_core::protection::SeparationRule;
use tvws_core::simulator::{generate_scenario, reference_target, CityScenario, GainEvaluator, GainStats};

use crate::error::Result;

pub const CSV_HEADER: &str =
    "city,power_mw,pct_gaining,avg_gained,stderr,paper_target_pct,paper_target_avg,avg_gained_all";

#[derive(Debug, Clone, PartialEq)]
pub struct CityResult {
    pub city: String,
    pub stats: GainStats,
    pub protected_sets: usize,
}

/// Generates the city and evaluates every device. Devices are spread over
/// the rayon pool; results are gathered in device order so the output does
/// not depend on the thread count.
pub fn run_city(city: &CityScenario, rule: &SeparationRule, powers: &[PowerClass]) -> Result<CityResult> {
    city.validate()?;
    let scenario = generate_scenario(city)?;
    let ev = GainEvaluator::new(&scenario, rule, powers)?;
    let rows: Vec<Vec<u16>> = (0..ev.wsd_count()).into_par_iter().map(|i| ev.counts_for(i)).collect();
    let stats = GainStats::from_counts(powers, rows.iter().map(|r| r.as_slice()), city.seed, city.fingerprint());
    Ok(CityResult {
        city: city.name.clone(),
        stats,
        protected_sets: ev.protected_count(),
    })
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.decimals$}"))
}

pub fn results_csv(results: &[CityResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        for g in &r.stats.per_power {
            let target = PowerClass::from_mw(g.power_mw)
                .ok()
                .and_then(|p| reference_target(&r.city, p));
            writeln!(
                out,
                "{},{},{:.2},{:.3},{:.4},{},{},{:.3}",
                r.city,
                g.power_mw,
                g.pct_gaining,
                g.avg_gained,
                g.stderr,
                opt(target.map(|t| t.0), 1),
                opt(target.map(|t| t.1), 2),
                g.avg_gained_all,
            )
            .expect("string write");
        }
    }
    out
}

fn rel(sim: f64, target: f64) -> f64 {
    if target == 0.0 {
        if sim == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        (sim - target) / target
    }
}

/// Side-by-side table of simulated and published values with relative
/// deviations; rows outside `tolerance` are marked.
pub fn comparison_text(results: &[CityResult], tolerance: f64) -> String {
    let mut out = String::new();
    for r in results {
        writeln!(
            out,
            "{} (seed {}, {} protected sets, fingerprint {:016x})",
            r.city, r.stats.seed, r.protected_sets, r.stats.fingerprint
        )
        .unwrap();
        writeln!(out, "  power_mw  pct_gaining  target   dev     avg_gained  target  dev").unwrap();
        for g in &r.stats.per_power {
            let target = PowerClass::from_mw(g.power_mw)
                .ok()
                .and_then(|p| reference_target(&r.city, p));
            match target {
                Some((tp, ta)) => {
                    let (dp, da) = (rel(g.pct_gaining, tp), rel(g.avg_gained, ta));
                    let mark = if dp.abs() <= tolerance && da.abs() <= tolerance { "" } else { "  *" };
                    writeln!(
                        out,
                        "  {:>8}  {:>11.2}  {:>6.1}  {:>+6.1}%  {:>10.3}  {:>6.2}  {:>+6.1}%{mark}",
                        g.power_mw,
                        g.pct_gaining,
                        tp,
                        100.0 * dp,
                        g.avg_gained,
                        ta,
                        100.0 * da
                    )
                    .unwrap();
                }
                None => {
                    writeln!(
                        out,
                        "  {:>8}  {:>11.2}  {:>6}  {:>7}  {:>10.3}",
                        g.power_mw, g.pct_gaining, "-", "-", g.avg_gained
                    )
                    .unwrap();
                }
            }
        }
    }
    if results.iter().any(|r| reference_target(&r.city, PowerClass::MW_1).is_some()) {
        writeln!(out, "* outside +/-{:.0}% of the published value", 100.0 * tolerance).unwrap();
    }
    out
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Two-panel SVG: percent of devices gaining and average channels gained,
/// against transmit power on a log axis. Published values are drawn as
/// hollow markers.
pub fn svg_chart(results: &[CityResult]) -> String {
    let (w, h) = (900.0, 380.0);
    let (pw, ph) = (360.0, 260.0);
    let top = 50.0;
    let lefts = [70.0, 520.0];
    let powers: Vec<f64> = results
        .iter()
        .flat_map(|r| r.stats.per_power.iter().map(|g| g.power_mw))
        .collect();
    let lo = powers.iter().copied().fold(f64::INFINITY, f64::min).max(1e-3);
    let hi = powers.iter().copied().fold(0.0, f64::max).max(lo * 10.0);
    let max_avg = results
        .iter()
        .flat_map(|r| {
            r.stats.per_power.iter().map(move |g| {
                let t = PowerClass::from_mw(g.power_mw)
                    .ok()
                    .and_then(|p| reference_target(&r.city, p))
                    .map_or(0.0, |t| t.1);
                g.avg_gained.max(t)
            })
        })
        .fold(1.0, f64::max)
        .ceil();
    let x = |left: f64, p: f64| left + pw * (p.ln() - lo.ln()) / (hi.ln() - lo.ln());
    let y = |v: f64, vmax: f64| top + ph * (1.0 - v / vmax);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    for (panel, (left, title, vmax)) in [
        (lefts[0], "devices gaining (%)", 100.0),
        (lefts[1], "average channels gained", max_avg),
    ]
    .into_iter()
    .enumerate()
    {
        writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#,
            left + pw / 2.0,
            top - 12.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">transmit power (mW)</text>"#,
            left + pw / 2.0,
            top + ph + 36.0
        )
        .unwrap();
        for k in 0..=4 {
            let v = vmax * k as f64 / 4.0;
            writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                left - 6.0,
                y(v, vmax) + 4.0,
                if vmax >= 20.0 { format!("{v:.0}") } else { format!("{v:.1}") }
            )
            .unwrap();
        }
        let mut ticks: Vec<f64> = powers.clone();
        ticks.sort_by(f64::total_cmp);
        ticks.dedup();
        for p in ticks {
            writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{p}</text>"#,
                x(left, p),
                top + ph + 16.0
            )
            .unwrap();
        }
        for (ci, r) in results.iter().enumerate() {
            let colour = COLOURS[ci % COLOURS.len()];
            let pts: Vec<String> = r
                .stats
                .per_power
                .iter()
                .map(|g| {
                    let v = if panel == 0 { g.pct_gaining } else { g.avg_gained };
                    format!("{:.1},{:.1}", x(left, g.power_mw), y(v, vmax))
                })
                .collect();
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                pts.join(" ")
            )
            .unwrap();
            for g in &r.stats.per_power {
                let v = if panel == 0 { g.pct_gaining } else { g.avg_gained };
                writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{colour}"/>"#,
                    x(left, g.power_mw),
                    y(v, vmax)
                )
                .unwrap();
                let target = PowerClass::from_mw(g.power_mw)
                    .ok()
                    .and_then(|p| reference_target(&r.city, p));
                if let Some((tp, ta)) = target {
                    let tv = if panel == 0 { tp } else { ta };
                    writeln!(
                        s,
                        r#"<rect x="{:.1}" y="{:.1}" width="8" height="8" fill="none" stroke="{colour}"/>"#,
                        x(left, g.power_mw) - 4.0,
                        y(tv, vmax) - 4.0
                    )
                    .unwrap();
                }
            }
        }
    }
    for (ci, r) in results.iter().enumerate() {
        let colour = COLOURS[ci % COLOURS.len()];
        let ly = h - 18.0;
        let lx = 70.0 + 160.0 * ci as f64;
        writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            r.city
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

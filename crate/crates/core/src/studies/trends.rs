//! Machine-checked trend properties over study tables.

use std::fmt;

use super::sweep::StudyTable;

/// Outcome of one trend property.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl TrendCheck {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        TrendCheck {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for TrendCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Lowest point of a curve if it lies strictly inside and strictly below
/// both end points.
pub fn interior_minimum(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    if curve.len() < 3 {
        return None;
    }
    let (i, &(x, y)) = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let last = curve.len() - 1;
    (i != 0 && i != last && y < curve[0].1 && y < curve[last].1).then_some((x, y))
}

fn strictly(curve: &[(f64, f64)], increasing: bool) -> bool {
    curve.windows(2).all(|w| {
        if increasing {
            w[1].1 > w[0].1
        } else {
            w[1].1 < w[0].1
        }
    })
}

fn fmt_curve(curve: &[(f64, f64)]) -> String {
    curve
        .iter()
        .map(|(x, y)| format!("{x}:{y:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `T_ob` against axis `x`, one curve per value of axis `group`. A line with
/// failed points yields a curve shorter than the grid.
fn curves(
    t: &StudyTable,
    group: &str,
    x: &str,
    y: impl Fn(&super::StudyRow) -> Option<f64>,
) -> Vec<(String, Vec<(f64, f64)>, usize)> {
    let total = |g: &str| {
        t.rows
            .iter()
            .filter(|r| t.axis_index(group).map(|k| r.axes[k] == g).unwrap_or(false))
            .count()
    };
    t.lines(group, x)
        .unwrap_or_default()
        .into_iter()
        .map(|(g, pts)| {
            let n = total(&g);
            let c = pts
                .into_iter()
                .filter_map(|(xv, r)| y(r).map(|yv| (xv, yv)))
                .collect();
            (g, c, n)
        })
        .collect()
}

fn missing_axes(t: &StudyTable, axes: &[&str]) -> Option<TrendCheck> {
    let missing: Vec<&str> = axes
        .iter()
        .copied()
        .filter(|a| t.axis_index(a).is_none())
        .collect();
    (!missing.is_empty())
        .then(|| TrendCheck::new("axes", false, format!("missing axes {missing:?}")))
}

/// Shield-geometry study: every `d3` curve of `T_ob(phi3)` has an interior
/// minimum with the optimum angle in `[10, 40]` deg, and the two-shield
/// optimum, if given, is warmer than the three-shield one.
pub fn check_shield_geometry(three: &StudyTable, two: Option<&StudyTable>) -> Vec<TrendCheck> {
    if let Some(c) = missing_axes(three, &["shields.d3", "shields.phi3_deg"]) {
        return vec![c];
    }
    let mut out = Vec::new();
    for (d3, c, n) in curves(three, "shields.d3", "shields.phi3_deg", |r| r.t_ob) {
        let name = format!("interior minimum of T_ob(phi3) at d3 = {d3}");
        let min = (c.len() == n).then(|| interior_minimum(&c)).flatten();
        let passed = matches!(min, Some((phi, _)) if (10.0..=40.0).contains(&phi));
        let detail = match min {
            Some((phi, t)) => format!("minimum {t:.3} K at {phi} deg; {}", fmt_curve(&c)),
            None if c.len() < n => format!("{} of {n} points failed", n - c.len()),
            None => format!("no interior minimum; {}", fmt_curve(&c)),
        };
        out.push(TrendCheck::new(name, passed, detail));
    }
    if let Some(two) = two {
        let best = |t: &StudyTable| {
            t.rows
                .iter()
                .filter(|r| r.ok())
                .filter_map(|r| r.t_ob)
                .min_by(f64::total_cmp)
        };
        let (b3, b2) = (best(three), best(two));
        let passed = matches!((b3, b2), (Some(a), Some(b)) if b > a);
        out.push(TrendCheck::new(
            "two-shield optimum warmer than three-shield optimum",
            passed,
            format!("3 shields {b3:.3?} K, 2 shields {b2:.3?} K"),
        ));
    }
    out
}

/// Strut study: `T_ob` strictly increasing in `GL_st,st` along every
/// `GL_st,rs` line and strictly decreasing in `GL_st,rs` at every
/// `GL_st,st`; `ob_delta` (the bench change from a 100x weaker top fitting)
/// must stay below `smallness` times the `GL_st,st` span of the nominal line.
pub fn check_strut_couplings(
    t: &StudyTable,
    nominal_rs: &str,
    ob_delta: f64,
    smallness: f64,
) -> Vec<TrendCheck> {
    let (st, rs) = ("network.strut.gl_st_st", "network.strut.gl_st_rs");
    if let Some(c) = missing_axes(t, &[st, rs]) {
        return vec![c];
    }
    let mut out = Vec::new();
    for (g, c, n) in curves(t, rs, st, |r| r.t_ob) {
        out.push(TrendCheck::new(
            format!("T_ob increasing in GL_st,st at GL_st,rs = {g}"),
            c.len() == n && strictly(&c, true),
            fmt_curve(&c),
        ));
    }
    for (g, c, n) in curves(t, st, rs, |r| r.t_ob) {
        out.push(TrendCheck::new(
            format!("T_ob decreasing in GL_st,rs at GL_st,st = {g}"),
            c.len() == n && strictly(&c, false),
            fmt_curve(&c),
        ));
    }
    let span = curves(t, rs, st, |r| r.t_ob)
        .into_iter()
        .find(|(g, _, _)| g == nominal_rs)
        .map(|(_, c, _)| {
            let ys = c.iter().map(|p| p.1);
            ys.clone().fold(f64::MIN, f64::max) - ys.fold(f64::MAX, f64::min)
        });
    out.push(match span {
        Some(s) => TrendCheck::new(
            "100x weaker bench fitting is a small effect",
            ob_delta.abs() < smallness * s,
            format!(
                "|dT_ob| = {:.3} K vs GL_st,st span {s:.3} K (limit {smallness} x span)",
                ob_delta.abs()
            ),
        ),
        None => TrendCheck::new(
            "100x weaker bench fitting is a small effect",
            false,
            format!("no line at GL_st,rs = {nominal_rs}"),
        ),
    });
    out
}

/// Dissipation study: `T_ob` strictly increasing in CCD dissipation and in
/// harness area, convex in dissipation on a logarithmic axis (positive
/// values only), and the harness effect at the nominal point below the
/// strut effect.
pub fn check_dissipation(t: &StudyTable, harness_delta: f64, strut_delta: f64) -> Vec<TrendCheck> {
    let (q, a) = ("network.ccd_q", "network.harness_area");
    if let Some(c) = missing_axes(t, &[q, a]) {
        return vec![c];
    }
    let mut out = Vec::new();
    for (g, c, n) in curves(t, a, q, |r| r.t_ob) {
        out.push(TrendCheck::new(
            format!("T_ob increasing in CCD dissipation at A = {g}"),
            c.len() == n && strictly(&c, true),
            fmt_curve(&c),
        ));
        let log: Vec<(f64, f64)> = c
            .iter()
            .filter(|p| p.0 > 0.0)
            .map(|&(x, y)| (x.ln(), y))
            .collect();
        let convex = log.len() >= 3
            && log.windows(3).all(|w| {
                let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                s2 > s1
            });
        out.push(TrendCheck::new(
            format!("T_ob convex in log CCD dissipation at A = {g}"),
            convex,
            fmt_curve(&c),
        ));
    }
    for (g, c, n) in curves(t, q, a, |r| r.t_ob) {
        out.push(TrendCheck::new(
            format!("T_ob increasing in harness area at Q = {g}"),
            c.len() == n && strictly(&c, true),
            fmt_curve(&c),
        ));
    }
    out.push(TrendCheck::new(
        "harness effect below strut effect at the nominal point",
        harness_delta.abs() < strut_delta.abs(),
        format!("harness {harness_delta:.3} K, struts {strut_delta:.3} K"),
    ));
    out
}

/// Coating study: `T_tv` strictly decreasing and `T_ob` non-decreasing in
/// the coated fraction; removing the lens lowers `T_tv` further.
pub fn check_coating(t: &StudyTable, lens: Option<&StudyTable>) -> Vec<TrendCheck> {
    let f = "coating_fraction";
    if let Some(c) = missing_axes(t, &[f]) {
        return vec![c];
    }
    let pts = |y: fn(&super::StudyRow) -> Option<f64>| -> Vec<(f64, f64)> {
        let k = t.axis_index(f).unwrap();
        t.rows
            .iter()
            .filter(|r| r.ok())
            .filter_map(|r| Some((r.axis_f64(k)?, y(r)?)))
            .collect()
    };
    let tv = pts(|r| r.t_tv);
    let ob = pts(|r| r.t_ob);
    let complete = tv.len() == t.rows.len();
    let mut out = vec![
        TrendCheck::new(
            "T_tv decreasing in coated fraction",
            complete && strictly(&tv, false),
            fmt_curve(&tv),
        ),
        TrendCheck::new(
            "T_ob non-decreasing in coated fraction",
            complete && ob.windows(2).all(|w| w[1].1 >= w[0].1),
            fmt_curve(&ob),
        ),
    ];
    if let Some(l) = lens {
        let tv_of = |flag: &str| {
            let k = l.axis_index("lens")?;
            l.rows.iter().find(|r| r.ok() && r.axes[k] == flag)?.t_tv
        };
        let (with, without) = (tv_of("true"), tv_of("false"));
        let end = tv.last().map(|p| p.1);
        out.push(TrendCheck::new(
            "removing the lens lowers T_tv further",
            matches!((with, without), (Some(a), Some(b)) if b < a),
            format!(
                "T_tv {with:.3?} K with lens, {without:.3?} K without; fully coated {end:.3?} K"
            ),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interior_minimum_cases() {
        assert_eq!(
            interior_minimum(&[(0.0, 3.0), (1.0, 1.0), (2.0, 2.0)]),
            Some((1.0, 1.0))
        );
        assert_eq!(
            interior_minimum(&[(0.0, 3.0), (1.0, 2.0), (2.0, 1.0)]),
            None
        );
        assert_eq!(
            interior_minimum(&[(0.0, 1.0), (1.0, 1.0), (2.0, 2.0)]),
            None
        );
        assert_eq!(interior_minimum(&[(0.0, 1.0), (1.0, 0.0)]), None);
    }

    proptest! {
        #[test]
        fn parabola_minimum_is_found(c in 1.0f64..9.0, a in 0.1f64..5.0) {
            let curve: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64, a * (i as f64 - c).powi(2))).collect();
            let (x, _) = interior_minimum(&curve).unwrap();
            prop_assert!((x - c).abs() <= 0.5 + 1e-12);
        }

        #[test]
        fn monotone_curves_have_no_interior_minimum(s in prop::collection::vec(0.01f64..1.0, 3..12)) {
            let mut y = 0.0;
            let curve: Vec<(f64, f64)> = s.iter().enumerate().map(|(i, d)| { y -= d; (i as f64, y) }).collect();
            prop_assert!(interior_minimum(&curve).is_none());
        }
    }
}

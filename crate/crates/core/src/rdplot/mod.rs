//! RD plot data: binned outcome means on each side of the cutoff with a
//! global polynomial fit per side, and a histogram of the score.

mod svg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::dataset::{profile_of, RDDataset, RDDesign, Side};
use crate::error::{RdError, Result};
use crate::linalg::{polyfit, polyval};

pub use svg::{histogram_svg, rdplot_svg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "bins_per_side")]
pub enum Binning {
    /// Mass points for discrete scores, otherwise 20 evenly spaced bins per side.
    #[default]
    Auto,
    EvenlySpaced(usize),
    QuantileSpaced(usize),
    /// One bin per distinct score value.
    MassPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotOptions {
    pub p_global: usize,
    pub binning: Binning,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            p_global: 4,
            binning: Binning::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotBin {
    pub side: Side,
    /// Bin interval; `[lower, upper)` except the last bin above, which is closed.
    pub lower: f64,
    pub upper: f64,
    pub midpoint: f64,
    pub mean: f64,
    pub count: usize,
    /// Normal interval `mean ± 1.96·sd/√count`; absent for singleton bins.
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

/// Polynomial in `(x - c) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit {
    pub coefficients: Vec<f64>,
    pub scale: f64,
}

impl GlobalFit {
    pub fn eval(&self, x: f64, cutoff: f64) -> f64 {
        polyval(&self.coefficients, (x - cutoff) / self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDPlotData {
    pub cutoff: f64,
    pub binning: Binning,
    pub p_global: usize,
    pub bins: Vec<PlotBin>,
    pub fit_below: Option<GlobalFit>,
    pub fit_above: Option<GlobalFit>,
    /// Score range per side, used to draw the overlays.
    pub range_below: (f64, f64),
    pub range_above: (f64, f64),
    pub flags: Vec<String>,
}

impl RDPlotData {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| RdError::InvalidData(e.to_string()))
    }

    /// One row per bin, with the overlay evaluated at the midpoint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("side,lower,upper,midpoint,mean,count,ci_lower,ci_upper,fit\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for b in &self.bins {
            let fit = match b.side {
                Side::Below => self.fit_below.as_ref(),
                Side::AtOrAbove => self.fit_above.as_ref(),
            }
            .map(|f| f.eval(b.midpoint, self.cutoff));
            let side = match b.side {
                Side::Below => "below",
                Side::AtOrAbove => "above",
            };
            let _ = writeln!(
                out,
                "{side},{},{},{},{},{},{},{},{}",
                b.lower,
                b.upper,
                b.midpoint,
                b.mean,
                b.count,
                opt(b.ci_lower),
                opt(b.ci_upper),
                opt(fit)
            );
        }
        out
    }

    pub fn to_svg(&self) -> String {
        rdplot_svg(self)
    }
}

struct SideRows {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn split_sides(data: &RDDataset, design: &RDDesign) -> (SideRows, SideRows) {
    let mut below = SideRows {
        x: vec![],
        y: vec![],
    };
    let mut above = SideRows {
        x: vec![],
        y: vec![],
    };
    for (&x, &y) in data.score().iter().zip(data.outcome()) {
        let s = match design.side_of(x) {
            Side::Below => &mut below,
            Side::AtOrAbove => &mut above,
        };
        s.x.push(x);
        s.y.push(y);
    }
    (below, above)
}

/// Bin edges for one side. Below: `[e_k, e_{k+1})` ending at the cutoff.
/// Above: starting at the cutoff, last bin closed at the maximum.
fn even_edges(lo: f64, hi: f64, nbins: usize) -> Vec<f64> {
    let w = (hi - lo) / nbins as f64;
    let mut e: Vec<f64> = (0..nbins).map(|k| lo + k as f64 * w).collect();
    e.push(hi);
    e
}

fn quantile_edges(sorted: &[f64], lo: f64, hi: f64, nbins: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut e = vec![lo];
    for k in 1..nbins {
        let v = sorted[(k * n / nbins).min(n - 1)];
        if v > *e.last().unwrap() && v < hi {
            e.push(v);
        }
    }
    e.push(hi);
    e
}

fn bin_side(side: Side, rows: &SideRows, edges: &[f64], closed_last: bool) -> Vec<PlotBin> {
    let nb = edges.len() - 1;
    let mut sum = vec![0.0; nb];
    let mut sum2 = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    for (&x, &y) in rows.x.iter().zip(&rows.y) {
        // Last edge with e <= x.
        let mut k = edges.partition_point(|&e| e <= x).saturating_sub(1);
        if k >= nb {
            if closed_last && x == edges[nb] {
                k = nb - 1;
            } else {
                continue;
            }
        }
        sum[k] += y;
        sum2[k] += y * y;
        count[k] += 1;
    }
    (0..nb)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            make_bin(
                side,
                edges[k],
                edges[k + 1],
                0.5 * (edges[k] + edges[k + 1]),
                sum[k],
                sum2[k],
                count[k],
            )
        })
        .collect()
}

fn make_bin(
    side: Side,
    lower: f64,
    upper: f64,
    midpoint: f64,
    sum: f64,
    sum2: f64,
    count: usize,
) -> PlotBin {
    let n = count as f64;
    let mean = sum / n;
    let (ci_lower, ci_upper) = if count >= 2 {
        let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
        let half = 1.96 * (var / n).sqrt();
        (Some(mean - half), Some(mean + half))
    } else {
        (None, None)
    };
    PlotBin {
        side,
        lower,
        upper,
        midpoint,
        mean,
        count,
        ci_lower,
        ci_upper,
    }
}

fn mass_point_bins(side: Side, rows: &SideRows) -> Vec<PlotBin> {
    let mut idx: Vec<usize> = (0..rows.x.len()).collect();
    idx.sort_by(|&a, &b| rows.x[a].total_cmp(&rows.x[b]));
    let mut bins = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let v = rows.x[idx[start]];
        let mut end = start;
        let (mut s, mut s2) = (0.0, 0.0);
        while end < idx.len() && rows.x[idx[end]] == v {
            let y = rows.y[idx[end]];
            s += y;
            s2 += y * y;
            end += 1;
        }
        bins.push(make_bin(side, v, v, v, s, s2, end - start));
        start = end;
    }
    bins
}

fn global_fit(rows: &SideRows, cutoff: f64, order: usize) -> Option<GlobalFit> {
    let mut distinct = rows.x.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < order + 1 {
        return None;
    }
    let scale = rows
        .x
        .iter()
        .fold(0.0f64, |a, &x| a.max((x - cutoff).abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let t: Vec<f64> = rows.x.iter().map(|&x| (x - cutoff) / scale).collect();
    polyfit(&t, &rows.y, order).map(|coefficients| GlobalFit {
        coefficients,
        scale,
    })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        })
}

/// Binned means of the outcome with global polynomial overlays.
pub fn build_rdplot(
    data: &RDDataset,
    design: &RDDesign,
    options: &PlotOptions,
) -> Result<RDPlotData> {
    let c = design.cutoff;
    let (below, above) = split_sides(data, design);
    if below.x.is_empty() || above.x.is_empty() {
        return Err(RdError::TooFewObservations(
            "the plot needs observations on both sides of the cutoff".into(),
        ));
    }
    let binning = match options.binning {
        Binning::Auto => {
            if profile_of(data.score(), c).is_discrete() {
                Binning::MassPoints
            } else {
                Binning::EvenlySpaced(20)
            }
        }
        b => b,
    };
    let rb = min_max(&below.x);
    let ra = min_max(&above.x);
    let mut bins = match binning {
        Binning::MassPoints => {
            let mut v = mass_point_bins(Side::Below, &below);
            v.extend(mass_point_bins(Side::AtOrAbove, &above));
            v
        }
        Binning::EvenlySpaced(j) | Binning::QuantileSpaced(j) => {
            if j == 0 {
                return Err(RdError::InvalidArgument(
                    "number of bins must be positive".into(),
                ));
            }
            let (eb, ea) = if let Binning::EvenlySpaced(_) = binning {
                (even_edges(rb.0, c, j), even_edges(c, ra.1.max(c), j))
            } else {
                let mut sb = below.x.clone();
                sb.sort_by(f64::total_cmp);
                let mut sa = above.x.clone();
                sa.sort_by(f64::total_cmp);
                (
                    quantile_edges(&sb, rb.0, c, j),
                    quantile_edges(&sa, c, ra.1.max(c), j),
                )
            };
            let mut v = bin_side(Side::Below, &below, &eb, false);
            if ra.1 == c {
                // Every treated-side row sits at the cutoff.
                let s: f64 = above.y.iter().sum();
                let s2: f64 = above.y.iter().map(|y| y * y).sum();
                v.push(make_bin(Side::AtOrAbove, c, c, c, s, s2, above.y.len()));
            } else {
                v.extend(bin_side(Side::AtOrAbove, &above, &ea, true));
            }
            v
        }
        Binning::Auto => unreachable!(),
    };
    bins.sort_by(|a, b| a.lower.total_cmp(&b.lower));

    let mut flags = Vec::new();
    let fit_below = global_fit(&below, c, options.p_global);
    let fit_above = global_fit(&above, c, options.p_global);
    for (fit, name) in [(&fit_below, "below"), (&fit_above, "above")] {
        if fit.is_none() {
            flags.push(format!(
                "global polynomial of order {} omitted {name} the cutoff: too few distinct scores",
                options.p_global
            ));
        }
    }
    Ok(RDPlotData {
        cutoff: c,
        binning,
        p_global: options.p_global,
        bins,
        fit_below,
        fit_above,
        range_below: rb,
        range_above: ra,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub cutoff: f64,
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower,upper,count\n");
        for b in &self.bins {
            let _ = writeln!(out, "{},{},{}", b.lower, b.upper, b.count);
        }
        out
    }
}

/// Histogram of the score with edges at `c + k·width`, so no bin straddles the
/// cutoff. `range` keeps only scores inside `[lo, hi]`. The default width is
/// the Freedman–Diaconis rule.
pub fn score_histogram(
    data: &RDDataset,
    design: &RDDesign,
    bin_width: Option<f64>,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    let c = design.cutoff;
    let xs: Vec<f64> = data
        .score()
        .iter()
        .copied()
        .filter(|&x| range.is_none_or(|(lo, hi)| lo <= x && x <= hi))
        .collect();
    let w = match bin_width {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => {
            return Err(RdError::InvalidArgument(format!(
                "bin width must be positive, got {w}"
            )))
        }
        None => default_histogram_width(&xs),
    };
    if xs.is_empty() {
        return Ok(Histogram {
            cutoff: c,
            bin_width: w,
            bins: vec![],
        });
    }
    let index = |x: f64| ((x - c) / w).floor() as i64;
    let (lo, hi) = min_max(&xs);
    let (k0, k1) = (index(lo), index(hi));
    let mut counts = vec![0usize; (k1 - k0 + 1) as usize];
    for &x in &xs {
        counts[(index(x) - k0) as usize] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let k = k0 + i as i64;
            HistogramBin {
                lower: c + k as f64 * w,
                upper: c + (k + 1) as f64 * w,
                count,
            }
        })
        .collect();
    Ok(Histogram {
        cutoff: c,
        bin_width: w,
        bins,
    })
}

fn default_histogram_width(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 1.0;
    }
    let iqr = Data::new(xs.to_vec()).interquartile_range();
    let (lo, hi) = min_max(xs);
    if iqr > 0.0 {
        2.0 * iqr / (xs.len() as f64).cbrt()
    } else if hi > lo {
        (hi - lo) / 20.0
    } else {
        1.0
    }
}

//! Mean +- std learning-curve bands rendered to SVG.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use crate::engine::{EpisodeRecord, Phase};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub episode: u64,
    pub mean: f64,
    pub std: f64,
}

/// A labeled set of per-seed curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub band: Vec<BandPoint>,
    /// Mean episode index of the first in-context episode, over seeds that
    /// switched.
    pub switch_episode: Option<f64>,
}

fn by_seed(rows: &[EpisodeRecord]) -> BTreeMap<u64, Vec<&EpisodeRecord>> {
    let mut seeds: BTreeMap<u64, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in rows {
        seeds.entry(r.seed).or_default().push(r);
    }
    seeds
}

/// Column-wise mean and population std of the return at each episode
/// index, up to the shortest seed.
pub fn band(rows: &[EpisodeRecord]) -> Vec<BandPoint> {
    let seeds = by_seed(rows);
    let len = seeds.values().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let col: Vec<f64> = seeds.values().map(|s| s[i].ret).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            BandPoint { episode: i as u64, mean, std: var.sqrt() }
        })
        .collect()
}

pub fn series(label: impl Into<String>, rows: &[EpisodeRecord]) -> Series {
    let switches: Vec<f64> =
        by_seed(rows).values().filter_map(|s| s.iter().position(|r| r.phase == Phase::Icl)).map(|i| i as f64).collect();
    Series {
        label: label.into(),
        band: band(rows),
        switch_episode: (!switches.is_empty()).then(|| switches.iter().sum::<f64>() / switches.len() as f64),
    }
}

fn draw_err<E: std::fmt::Debug>(path: &Path, e: E) -> Error {
    Error::io(path, std::io::Error::other(format!("{e:?}")))
}

/// Renders every series with its band, marking switch points with a
/// dashed vertical line.
pub fn render_svg(series: &[Series], title: &str, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let points = series.iter().flat_map(|s| &s.band);
    let x_max = points.clone().map(|p| p.episode).max().unwrap_or(1).max(1) as f64;
    let (mut lo, mut hi) =
        points.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.mean - p.std), hi.max(p.mean + p.std)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);

    let root = SVGBackend::new(out, (960, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(out, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, (lo - pad)..(hi + pad))
        .map_err(|e| draw_err(out, e))?;
    chart.configure_mesh().x_desc("episode").y_desc("return").draw().map_err(|e| draw_err(out, e))?;

    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let upper = s.band.iter().map(|p| (p.episode as f64, p.mean + p.std));
        let lower = s.band.iter().rev().map(|p| (p.episode as f64, p.mean - p.std));
        chart
            .draw_series(std::iter::once(Polygon::new(upper.chain(lower).collect::<Vec<_>>(), color.mix(0.2))))
            .map_err(|e| draw_err(out, e))?;
        chart
            .draw_series(LineSeries::new(s.band.iter().map(|p| (p.episode as f64, p.mean)), color.stroke_width(2)))
            .map_err(|e| draw_err(out, e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        if let Some(x) = s.switch_episode {
            chart
                .draw_series(DashedLineSeries::new(vec![(x, lo - pad), (x, hi + pad)], 6, 4, color.stroke_width(1)))
                .map_err(|e| draw_err(out, e))?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_err(out, e))?;
    root.present().map_err(|e| draw_err(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seed: u64, episode: u64, ret: f64) -> EpisodeRecord {
        EpisodeRecord { seed, episode, end_step: episode + 1, ret, phase: Phase::Warmup }
    }

    #[test]
    fn single_seed_has_zero_width() {
        let b = band(&[rec(0, 0, 1.0), rec(0, 1, 3.0)]);
        assert!(b.iter().all(|p| p.std == 0.0));
        assert_eq!(b[1].mean, 3.0);
    }

    #[test]
    fn truncates_to_shortest_seed() {
        let b = band(&[rec(0, 0, 1.0), rec(0, 1, 3.0), rec(1, 0, 3.0)]);
        assert_eq!(b, vec![BandPoint { episode: 0, mean: 2.0, std: 1.0 }]);
    }
}

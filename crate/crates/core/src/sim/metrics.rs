use std::collections::BTreeMap;

use serde::Serialize;

use super::spec::{OvershootConvention, SteadyBand};
use super::SeriesRow;

/// Speed excursions smaller than this do not fix an approach side.
const SIDE_DEADBAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Collision {
    pub t: f64,
    pub leader: u32,
    pub follower: u32,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSummary {
    pub id: u32,
    pub peak_abs_ex: f64,
    pub peak_abs_ev: f64,
    /// Overshoot rate of this follower (%).
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Start of the final stay in the steady band, if it lasted the dwell.
    pub t_steady: Option<f64>,
    pub converged: bool,
    /// Largest follower overshoot rate (%).
    pub eta: f64,
    pub max_lateral_error: Option<f64>,
    pub t0: Option<f64>,
    pub te: Option<f64>,
    pub min_gap: f64,
    pub collision: Option<Collision>,
    pub peak_abs_ex: f64,
    pub peak_abs_ev: f64,
    pub vehicles: Vec<VehicleSummary>,
    pub diagnostics: Vec<String>,
}

impl MetricsReport {
    pub fn lane_change_duration(&self) -> Option<f64> {
        Some(self.te? - self.t0?)
    }
}

#[derive(Debug, Clone, Default)]
struct Follower {
    side: f64,
    overshoot: f64,
    peak_ex: f64,
    peak_ev: f64,
}

/// Per-tick sample of one vehicle, as seen by the metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub id: u32,
    pub v: f64,
    pub ex: Option<f64>,
    pub ev: Option<f64>,
    pub lat_err: Option<f64>,
}

impl From<&SeriesRow> for Sample {
    fn from(r: &SeriesRow) -> Self {
        Self {
            id: r.vehicle_id,
            v: r.v,
            ex: r.ex,
            ev: r.ev,
            lat_err: r.lat_err,
        }
    }
}

/// Streaming metric computation, fed one tick at a time.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    band: SteadyBand,
    convention: OvershootConvention,
    v_ref: f64,
    ts: f64,
    ticks: usize,
    last_out: Option<usize>,
    followers: BTreeMap<u32, Follower>,
    max_lat: Option<f64>,
    min_gap: f64,
}

impl MetricsAccumulator {
    /// `v_ref` is the leader's steady speed the overshoot is measured from.
    pub fn new(band: SteadyBand, convention: OvershootConvention, v_ref: f64, ts: f64) -> Self {
        Self {
            band,
            convention,
            v_ref,
            ts,
            ticks: 0,
            last_out: None,
            followers: BTreeMap::new(),
            max_lat: None,
            min_gap: f64::INFINITY,
        }
    }

    pub fn push_tick(&mut self, samples: impl IntoIterator<Item = Sample>) {
        let mut in_band = true;
        for s in samples {
            if let Some(l) = s.lat_err {
                self.max_lat = Some(self.max_lat.unwrap_or(0.0).max(l.abs()));
            }
            let (Some(ex), Some(ev)) = (s.ex, s.ev) else {
                continue;
            };
            in_band &= ex.abs() <= self.band.ex && ev.abs() <= self.band.ev;
            let f = self.followers.entry(s.id).or_default();
            f.peak_ex = f.peak_ex.max(ex.abs());
            f.peak_ev = f.peak_ev.max(ev.abs());
            let dv = s.v - self.v_ref;
            match self.convention {
                OvershootConvention::AboveOnly => f.overshoot = f.overshoot.max(dv),
                OvershootConvention::CrossingBased => {
                    if f.side == 0.0 {
                        if dv.abs() > SIDE_DEADBAND {
                            f.side = dv.signum();
                        }
                    } else {
                        f.overshoot = f.overshoot.max(-f.side * dv);
                    }
                }
            }
        }
        if !in_band {
            self.last_out = Some(self.ticks);
        }
        self.ticks += 1;
    }

    pub fn record_gap(&mut self, gap: f64) {
        self.min_gap = self.min_gap.min(gap);
    }

    pub fn finish(self) -> MetricsReport {
        let start = self.last_out.map_or(0, |k| k + 1);
        let dwell = (self.ticks - start) as f64 * self.ts;
        let t_steady =
            (self.ticks > 0 && dwell + 1e-9 >= self.band.dwell).then_some(start as f64 * self.ts);
        let eta_of = |f: &Follower| f.overshoot.max(0.0) / self.v_ref * 100.0;
        let vehicles: Vec<_> = self
            .followers
            .iter()
            .map(|(&id, f)| VehicleSummary {
                id,
                peak_abs_ex: f.peak_ex,
                peak_abs_ev: f.peak_ev,
                eta: eta_of(f),
            })
            .collect();
        MetricsReport {
            t_steady,
            converged: t_steady.is_some(),
            eta: vehicles.iter().map(|v| v.eta).fold(0.0, f64::max),
            max_lateral_error: self.max_lat,
            t0: None,
            te: None,
            min_gap: self.min_gap,
            collision: None,
            peak_abs_ex: vehicles.iter().map(|v| v.peak_abs_ex).fold(0.0, f64::max),
            peak_abs_ev: vehicles.iter().map(|v| v.peak_abs_ev).fold(0.0, f64::max),
            vehicles,
            diagnostics: Vec::new(),
        }
    }
}

/// Metrics of a recorded series (rows grouped by time, in order).
pub fn compute_metrics(
    series: &[SeriesRow],
    band: SteadyBand,
    convention: OvershootConvention,
    v_ref: f64,
    ts: f64,
) -> MetricsReport {
    let mut acc = MetricsAccumulator::new(band, convention, v_ref, ts);
    for tick in series.chunk_by(|a, b| a.t == b.t) {
        acc.push_tick(tick.iter().map(Sample::from));
    }
    acc.finish()
}

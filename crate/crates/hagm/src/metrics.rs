//! Run summaries: tracking error, settling time, power, and energy.
//!
//! All functions take parallel sample slices (time-aligned, uniform or not)
//! and are deliberately dumb about where the data came from; the scenario
//! layer extracts columns from telemetry and feeds them in.

/// Root-mean-square of an error series. `None` for an empty series.
pub fn rmse(errors: &[f64]) -> Option<f64> {
    if errors.is_empty() {
        return None;
    }
    let sum_sq: f64 = errors.iter().map(|e| e * e).sum();
    Some((sum_sq / errors.len() as f64).sqrt())
}

/// Earliest time after which `y` stays within `band` of `target` for the
/// rest of the series: the time of the sample following the last excursion.
///
/// A series that leaves the band and comes back settles at the final
/// re-entry, not the first. `None` if the final sample is still outside
/// (or the series is empty). A series inside the band throughout settles
/// at its first timestamp.
pub fn settling_time(t: &[f64], y: &[f64], target: f64, band: f64) -> Option<f64> {
    assert_eq!(t.len(), y.len(), "time and value series must align");
    if t.is_empty() {
        return None;
    }
    let inside = |v: f64| (v - target).abs() <= band;
    match y.iter().rposition(|&v| !inside(v)) {
        None => Some(t[0]),
        Some(i) if i + 1 < t.len() => Some(t[i + 1]),
        Some(_) => None,
    }
}

/// Samples outside the band after the series first entered it: a chatter
/// count. Zero if the series never enters.
pub fn band_violations(y: &[f64], target: f64, band: f64) -> usize {
    let inside = |v: &&f64| (**v - target).abs() <= band;
    let Some(first_in) = y.iter().position(|v| inside(&v)) else {
        return 0;
    };
    y[first_in..].iter().filter(|v| !inside(v)).count()
}

/// Trapezoidal integral of a power series, J.
pub fn energy(t: &[f64], power: &[f64]) -> f64 {
    assert_eq!(t.len(), power.len(), "time and power series must align");
    t.windows(2)
        .zip(power.windows(2))
        .map(|(tw, pw)| 0.5 * (pw[0] + pw[1]) * (tw[1] - tw[0]))
        .sum()
}

/// Summary of one tracked quantity over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub rmse: f64,
    pub max_abs_error: f64,
    /// `None` when the series never settles into the band.
    pub settling_time_s: Option<f64>,
    /// Out-of-band samples after the first band entry.
    pub band_violations: usize,
    /// Electrical energy spent over the run, J.
    pub energy_j: f64,
}

impl SeriesStats {
    /// Builds the summary for `y` tracking `target` within `band`, with the
    /// run's power series for the energy total. `None` for empty input.
    pub fn compute(t: &[f64], y: &[f64], target: f64, band: f64, power: &[f64]) -> Option<Self> {
        let errors: Vec<f64> = y.iter().map(|v| v - target).collect();
        Some(Self {
            rmse: rmse(&errors)?,
            max_abs_error: errors.iter().fold(0.0_f64, |m, e| m.max(e.abs())),
            settling_time_s: settling_time(t, y, target, band),
            band_violations: band_violations(y, target, band),
            energy_j: energy(t, power),
        })
    }
}

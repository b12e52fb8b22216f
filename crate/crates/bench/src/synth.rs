//! Synthetic seasonal series with injected, labelled anomalies.

use std::io::Write;
use std::path::Path;

use chrono::DateTime;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use tslab_core::{AnomalyLabelSeries, TimeSeries, Timestamp, UnivariateTimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    /// A short burst far outside the usual range.
    Spike,
    /// The level jumps and stays there for the rest of the window.
    LevelShift,
    /// The seasonal pattern inverts for a while.
    SeasonalBreak,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [Archetype::Spike, Archetype::LevelShift, Archetype::SeasonalBreak];

    pub fn name(&self) -> &'static str {
        match self {
            Archetype::Spike => "spike",
            Archetype::LevelShift => "level-shift",
            Archetype::SeasonalBreak => "seasonal-break",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseShape {
    pub n: usize,
    /// Seconds between points.
    pub step: i64,
    /// Season length in points.
    pub period: usize,
    pub level: f64,
    pub amplitude: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub timestamps: Vec<Timestamp>,
    pub values: Vec<f64>,
    pub labels: Vec<bool>,
    /// Seasonal component before noise and anomalies.
    pub seasonal: Vec<f64>,
}

impl Synthetic {
    pub fn series(&self, name: &str) -> TimeSeries {
        UnivariateTimeSeries::new(name, self.timestamps.clone(), self.values.clone())
            .expect("synthetic grid is strictly increasing")
            .into()
    }

    pub fn label_series(&self) -> AnomalyLabelSeries {
        AnomalyLabelSeries::new(self.timestamps.clone(), self.labels.clone()).expect("labels match timestamps")
    }

    /// Writes `timestamp,value,label` rows with ISO timestamps.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "timestamp,value,label")?;
        for ((t, v), l) in self.timestamps.iter().zip(&self.values).zip(&self.labels) {
            let iso = DateTime::from_timestamp(*t, 0).expect("timestamp in range").format("%Y-%m-%d %H:%M:%S");
            writeln!(f, "{iso},{v:.6},{}", u8::from(*l))?;
        }
        f.flush()
    }
}

/// Level plus a sine season plus Gaussian noise, starting at `t0`.
pub fn base(shape: &BaseShape, t0: Timestamp, rng: &mut ChaCha8Rng) -> Synthetic {
    let noise = Normal::new(0.0, shape.noise_sd).expect("noise sd is finite and non-negative");
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let seasonal: Vec<f64> = (0..shape.n)
        .map(|i| shape.amplitude * (std::f64::consts::TAU * i as f64 / shape.period as f64 + phase).sin())
        .collect();
    let values = seasonal.iter().map(|s| shape.level + s + noise.sample(rng)).collect();
    Synthetic {
        timestamps: (0..shape.n as i64).map(|i| t0 + i * shape.step).collect(),
        values,
        labels: vec![false; shape.n],
        seasonal,
    }
}

/// Injects an anomaly starting at `at`, labelling the affected points.
/// `size` is in units of the noise standard deviation; `len` is the window
/// length in points for shifts and breaks.
pub fn inject(s: &mut Synthetic, kind: Archetype, at: usize, len: usize, size: f64, noise_sd: f64, rng: &mut ChaCha8Rng) {
    let n = s.values.len();
    let end = (at + len).min(n);
    match kind {
        Archetype::Spike => {
            let width = rng.random_range(1..=3).min(n - at);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            for i in at..at + width {
                s.values[i] += sign * size * noise_sd;
                s.labels[i] = true;
            }
        }
        Archetype::LevelShift => {
            for i in at..end {
                s.values[i] += size * noise_sd;
                s.labels[i] = true;
            }
        }
        Archetype::SeasonalBreak => {
            for i in at..end {
                s.values[i] -= 2.0 * s.seasonal[i];
                s.labels[i] = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn injection_labels_only_the_window() {
        let shape = BaseShape {
            n: 200,
            step: 60,
            period: 20,
            level: 5.0,
            amplitude: 2.0,
            noise_sd: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = base(&shape, 0, &mut rng);
        let before = s.values.clone();
        inject(&mut s, Archetype::LevelShift, 50, 10, 8.0, 0.1, &mut rng);
        assert_eq!(s.labels.iter().filter(|l| **l).count(), 10);
        assert!((s.values[55] - before[55] - 0.8).abs() < 1e-12);
        assert_eq!(s.values[60], before[60]);
        assert_eq!(s.label_series().windows().len(), 1);
    }
}

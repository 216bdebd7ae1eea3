//! Seeded synthetic hourly weather for Medina-like conditions.
//!
//! Observations are spread evenly over three years of hours, the span of the
//! real hourly record. Temperature follows a seasonal and diurnal cycle with
//! noise; humidity falls as it gets hotter; visibility is mostly clear with
//! occasional dust episodes. The weather description is a fixed function of
//! the (visibility, barometer) bucket, so after labeling the dome state is a
//! deterministic function of the six model features.

use std::f64::consts::PI;

use crate::rng::SplitMix64;
use crate::weather_data::WeatherObservation;

/// Description for a (visibility, barometer) pair.
pub fn bucket_condition(visibility: f64, barometer: f64) -> &'static str {
    let vis = if visibility <= 4.0 {
        0
    } else if visibility <= 10.0 {
        1
    } else {
        2
    };
    let baro = if barometer < 1008.0 {
        0
    } else if barometer < 1016.0 {
        1
    } else {
        2
    };
    const GRID: [[&str; 3]; 3] = [
        ["Sandstorm", "Duststorm", "Low level haze"],
        ["Rain Partly cloudy", "Scattered clouds", "Haze"],
        ["Thunderstorms", "Passing clouds", "Clear"],
    ];
    GRID[vis][baro]
}

fn gaussian(rng: &mut SplitMix64) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn round_to(v: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (v * scale).round() / scale
}

const SPAN_HOURS: usize = 3 * 365 * 24;

/// `n` observations at evenly spaced hours over three years from 1 January.
pub fn synthetic_observations(n: usize, seed: u64) -> Vec<WeatherObservation> {
    let mut rng = SplitMix64::new(seed);
    let step = (SPAN_HOURS / n.max(1)).max(1);
    let mut pressure_drift = 0.0;
    let mut dust_samples_left = 0u32;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let at = i * step;
        let day = (at / 24) as f64;
        let hour = (at % 24) as u8;
        let season = (2.0 * PI * (day - 105.0) / 365.0).sin();
        let diurnal = (2.0 * PI * (f64::from(hour) - 9.0) / 24.0).sin();

        let seasonal_mean = 27.0 + 9.0 * season;
        let temp = (seasonal_mean + 6.0 * diurnal + 1.5 * gaussian(&mut rng)).round();

        let humidity = (0.55 - 0.015 * (temp - 15.0) + 0.05 * gaussian(&mut rng)).clamp(0.04, 0.95);
        let wind = (8.0 + 5.0 * diurnal + 4.0 * gaussian(&mut rng))
            .max(0.0)
            .round();

        pressure_drift = 0.95 * pressure_drift + 0.8 * gaussian(&mut rng);
        let barometer = (1013.0 - 6.0 * season + pressure_drift).round();

        if dust_samples_left == 0 && rng.next_f64() < 0.01 {
            dust_samples_left = 3 + rng.next_below(10) as u32;
        }
        let visibility = if dust_samples_left > 0 {
            dust_samples_left -= 1;
            1.0 + rng.next_below(10) as f64
        } else if rng.next_f64() < 0.05 {
            11.0 + rng.next_below(5) as f64
        } else {
            16.0
        };

        out.push(WeatherObservation {
            city: "Al Madina".into(),
            date: format!("day-{:04}", at / 24),
            hour,
            temp,
            wind,
            humidity: round_to(humidity, 2),
            barometer,
            visibility,
            condition: bucket_condition(visibility, barometer).to_string(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = synthetic_observations(500, 9);
        assert_eq!(a, synthetic_observations(500, 9));
        assert_ne!(a, synthetic_observations(500, 10));
        for o in &a {
            o.validate().unwrap();
        }
    }

    #[test]
    fn condition_is_function_of_buckets() {
        assert_eq!(bucket_condition(16.0, 1020.0), "Clear");
        assert_eq!(bucket_condition(2.0, 1000.0), "Sandstorm");
        assert_eq!(bucket_condition(7.0, 1010.0), "Scattered clouds");
    }
}

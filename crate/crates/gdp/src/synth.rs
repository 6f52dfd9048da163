//! Deterministic synthetic meter-fleet generator: 15-minute readings with a
//! diurnal consumption profile, accumulating energy counters and constant
//! status fields.

use crate::config::GenDefaults;
use crate::dlms::{Reading, Timestamp};
use chrono::{NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Sampling period of the emulated Load Profile.
pub const PERIOD_MINUTES: u32 = 15;
/// Readings recorded per day.
pub const READINGS_PER_DAY: usize = 96;

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdProfile {
    pub seed: u64,
    pub base_load_w: f64,
    pub diurnal_amplitude_w: f64,
    pub noise_w: f64,
    pub has_generation: bool,
    pub reactive_fraction: f64,
}

/// Default simulation start: 2020-01-01 00:00 UTC.
pub fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

/// Generates `count` readings at 15-minute intervals. Pure function of its
/// arguments: the same profile always yields the same stream.
pub fn generate_stream(profile: &HouseholdProfile, start: NaiveDateTime, count: usize) -> Vec<Reading> {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut readings = Vec::with_capacity(count);
    let mut consumption_wh = 0.0f64;
    let mut generation_wh = 0.0f64;
    let mut reactive12_varh = 0.0f64;
    let mut reactive34_varh = 0.0f64;
    let mut t = start;
    for i in 0..count {
        let day_frac = t.num_seconds_from_midnight() as f64 / 86_400.0;
        // evening-peaked consumption plus bounded noise, clipped at zero
        let noise = rng.gen_range(-profile.noise_w..=profile.noise_w);
        let power_w = (profile.base_load_w
            + profile.diurnal_amplitude_w * (TAU * (day_frac - 0.35)).sin()
            + noise)
            .max(0.0);
        let interval_wh = power_w * 0.25;
        consumption_wh += interval_wh;
        if profile.has_generation {
            // midday-peaked feed-in
            let gen_w = (0.8 * profile.base_load_w * (TAU * (day_frac - 0.25)).sin()).max(0.0);
            generation_wh += gen_w * 0.25;
        }
        reactive12_varh += 0.6 * profile.reactive_fraction * interval_wh;
        reactive34_varh += 0.4 * profile.reactive_fraction * interval_wh;

        readings.push(Reading {
            log_id: (i + 1) as u32,
            timestamp: Timestamp::from_naive(t, 0, 0),
            log_status: 0x0004,
            data_quality: 0,
            a14: consumption_wh as u32,
            a23: generation_wh as u32,
            r12: reactive12_varh as u32,
            r34: reactive34_varh as u32,
        });
        t += chrono::Duration::minutes(PERIOD_MINUTES as i64);
    }
    readings
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Household `index` of a fleet: defaults with deterministic per-index
/// variation. The child seed is `splitmix64(master_seed ^ (index + 1))`.
pub fn household_profile(defaults: &GenDefaults, master_seed: u64, index: usize) -> HouseholdProfile {
    let generation_stride = if defaults.generation_share > 0.0 {
        (1.0 / defaults.generation_share).round().max(1.0) as usize
    } else {
        usize::MAX
    };
    HouseholdProfile {
        seed: splitmix64(master_seed ^ (index as u64 + 1)),
        base_load_w: defaults.base_load_w * (0.70 + 0.06 * (index % 10) as f64),
        diurnal_amplitude_w: defaults.diurnal_amplitude_w * (0.80 + 0.05 * (index % 8) as f64),
        noise_w: defaults.noise_w,
        has_generation: generation_stride != usize::MAX && index.is_multiple_of(generation_stride),
        reactive_fraction: defaults.reactive_fraction * (0.80 + 0.08 * (index % 5) as f64),
    }
}

/// Generates `n_households` independent whole-day streams of `days` days.
pub fn generate_fleet(
    n_households: usize,
    days: usize,
    master_seed: u64,
    defaults: &GenDefaults,
) -> Vec<(HouseholdProfile, Vec<Reading>)> {
    (0..n_households)
        .map(|i| {
            let profile = household_profile(defaults, master_seed, i);
            let stream = generate_stream(&profile, default_start(), days * READINGS_PER_DAY);
            (profile, stream)
        })
        .collect()
}

//! Control policies and the trajectory harness generating ground-truth data
//! for VB validation and surrogate training.
//!
//! Runs are deterministic given (seed, policy, exogenous series, parameters):
//! all randomness flows through a seeded ChaCha stream.

use crate::error::{Error, Result};
use crate::thermal::{
    baseline_cooling, coefficients_multi, comfort_airflow_intervals, hvac_power,
    ExogenousSeries, MultiZoneParams, Trajectory,
};
use crate::vb::{soc_aggregate, SozConvention};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Uniform PID gains applied to every zone, acting on the error `T − reference`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PidGains {
    /// kg/s per K.
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Integral clamp, K·steps.
    pub anti_windup: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        // Repo defaults tuned by the step-response criterion.
        Self { kp: 0.4, ki: 0.02, kd: 0.0, anti_windup: 10.0 }
    }
}

/// Airflow-generating control policies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Uniform draws inside the VAV box.
    Random { seed: u64 },
    /// Positional PID holding zone temperatures at their setpoints.
    Pid { gains: PidGains },
    /// Price-aware heuristic: pre-cool when the price runs below its rolling
    /// median, coast toward the upper comfort limit otherwise. Comfort-safe
    /// through one-step lookahead clipping.
    PriceGreedy {
        prices: Vec<f64>,
        /// Rolling-median window, steps.
        window: usize,
    },
    /// Explicit airflow table, time-major.
    FixedSequence { m: Vec<Vec<f64>> },
}

impl Policy {
    pub fn descriptor(&self) -> String {
        match self {
            Policy::Random { seed } => format!("random(seed={seed})"),
            Policy::Pid { gains } => {
                format!("pid(kp={},ki={},kd={})", gains.kp, gains.ki, gains.kd)
            }
            Policy::PriceGreedy { window, .. } => format!("price_greedy(window={window})"),
            Policy::FixedSequence { .. } => "fixed_sequence".to_string(),
        }
    }
}

/// Mutable per-zone PID state owned by a run.
#[derive(Debug, Clone, Default)]
pub struct PidState {
    pub integral: Vec<f64>,
    pub prev_error: Vec<f64>,
}

impl PidState {
    pub fn new(n_zones: usize) -> Self {
        Self { integral: vec![0.0; n_zones], prev_error: vec![0.0; n_zones] }
    }
}

/// One positional PID update: error is `T − reference` (too warm → more air),
/// integral clamped, output biased by the baseline airflow estimate and
/// clipped to the VAV box.
pub fn pid_step(
    state: &mut PidState,
    t: &[f64],
    reference: &[f64],
    gains: &PidGains,
    bias: &[f64],
    m_min: &[f64],
    m_max: &[f64],
) -> Vec<f64> {
    let n = t.len();
    let mut m = vec![0.0; n];
    for i in 0..n {
        let e = t[i] - reference[i];
        state.integral[i] =
            (state.integral[i] + e).clamp(-gains.anti_windup, gains.anti_windup);
        let de = e - state.prev_error[i];
        state.prev_error[i] = e;
        let raw = bias[i] + gains.kp * e + gains.ki * state.integral[i] + gains.kd * de;
        m[i] = raw.clamp(m_min[i], m_max[i]);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceSignal {
    Cheap,
    Expensive,
    Neutral,
}

/// Rolling-median classification of a price series.
pub fn price_signals(prices: &[f64], window: usize) -> Vec<PriceSignal> {
    let w = window.max(1);
    prices
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let start = k.saturating_sub(w - 1);
            let mut slice: Vec<f64> = prices[start..=k].to_vec();
            slice.sort_by(|a, b| a.partial_cmp(b).expect("finite prices"));
            let median = if slice.len() % 2 == 1 {
                slice[slice.len() / 2]
            } else {
                0.5 * (slice[slice.len() / 2 - 1] + slice[slice.len() / 2])
            };
            if (p - median).abs() <= 1e-12 {
                PriceSignal::Neutral
            } else if p < median {
                PriceSignal::Cheap
            } else {
                PriceSignal::Expensive
            }
        })
        .collect()
}

/// One step of the price-aware heuristic. The target temperature is the cheap
/// or expensive side of the comfort band (the setpoint when there is no
/// signal); the airflow solving for that target is clipped to the
/// comfort-safe interval.
pub fn price_greedy_step(
    coeffs: &crate::thermal::MultiZoneCoeffs,
    t: &[f64],
    exo: &ExogenousSeries,
    k: usize,
    signal: PriceSignal,
    t_set: &[f64],
    delta: &[f64],
) -> Vec<f64> {
    let n = t.len();
    let t_lo: Vec<f64> = (0..n).map(|i| t_set[i] - delta[i]).collect();
    let t_hi: Vec<f64> = (0..n).map(|i| t_set[i] + delta[i]).collect();
    let intervals = comfort_airflow_intervals(coeffs, t, exo, k, &t_lo, &t_hi);
    let free = coeffs.a.matvec(t);
    let d = coeffs.drive(exo, k);
    (0..n)
        .map(|i| {
            let target = match signal {
                PriceSignal::Cheap => t_set[i] - 0.8 * delta[i],
                PriceSignal::Expensive => t_set[i] + 0.8 * delta[i],
                PriceSignal::Neutral => t_set[i],
            };
            let base = free[i] + coeffs.a_out[i] * exo.t_out[k] + d[i];
            let slope = coeffs.b_diag[i] * coeffs.c_p * (t[i] - coeffs.t_sup);
            let desired = if slope > 1e-12 { (base - target) / slope } else { 0.0 };
            desired.clamp(intervals[i].lo, intervals[i].hi)
        })
        .collect()
}

/// A completed simulation with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationRun {
    pub trajectory: Trajectory,
    pub seed: u64,
    pub policy: String,
    pub horizon: usize,
    pub warnings: Vec<String>,
}

/// Simulate a policy on the RC model and identify soz/soc along the way.
///
/// `w` are the aggregation weights used for the recorded soc; the convention
/// fixes the soz mapping. Bitwise reproducible for a fixed seed.
pub fn run_policy(
    policy: &Policy,
    params: &MultiZoneParams,
    exo: &ExogenousSeries,
    t0: &[f64],
    horizon: usize,
    convention: SozConvention,
    w: &[f64],
    seed: u64,
) -> Result<SimulationRun> {
    if exo.horizon() < horizon {
        return Err(Error::LengthMismatch(format!(
            "exogenous series has {} steps, policy run needs {horizon}",
            exo.horizon()
        )));
    }
    let n = params.n_zones;
    let coeffs = coefficients_multi(params)?;
    let mut warnings = Vec::new();
    for i in 0..n {
        if (t0[i] - params.t_set[i]).abs() > params.delta[i] {
            warnings.push(format!(
                "initial temperature of zone {i} ({}) is outside the comfort band",
                t0[i]
            ));
        }
    }

    let baseline = baseline_cooling(&coeffs, exo, &params.t_set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pid_state = PidState::new(n);
    let signals = match policy {
        Policy::PriceGreedy { prices, window } => {
            if prices.len() < horizon {
                return Err(Error::LengthMismatch(format!(
                    "price series has {} steps, policy run needs {horizon}",
                    prices.len()
                )));
            }
            price_signals(prices, *window)
        }
        _ => Vec::new(),
    };

    let soz_of = |t: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| convention.soz_of_temperature(t[i], params.t_set[i], params.delta[i]))
            .collect()
    };

    let mut t = vec![t0.to_vec()];
    let mut m_rows = Vec::with_capacity(horizon);
    let mut q_rows = Vec::with_capacity(horizon);
    let mut q_total = Vec::with_capacity(horizon);
    let mut q_tol = Vec::with_capacity(horizon);
    let mut soz = vec![soz_of(t0)];
    let mut soc = vec![soc_aggregate(&soz[0], w)];

    for k in 0..horizon {
        let state = t[k].clone();
        let m: Vec<f64> = match policy {
            Policy::Random { .. } => (0..n)
                .map(|i| rng.gen_range(params.m_min[i]..=params.m_max[i]))
                .collect(),
            Policy::Pid { gains } => pid_step(
                &mut pid_state,
                &state,
                &params.t_set,
                gains,
                &baseline.m_base[k],
                &params.m_min,
                &params.m_max,
            ),
            Policy::PriceGreedy { .. } => price_greedy_step(
                &coeffs,
                &state,
                exo,
                k,
                signals[k],
                &params.t_set,
                &params.delta,
            ),
            Policy::FixedSequence { m } => {
                if m.len() < horizon {
                    return Err(Error::LengthMismatch(format!(
                        "fixed sequence has {} steps, run needs {horizon}",
                        m.len()
                    )));
                }
                m[k].iter()
                    .enumerate()
                    .map(|(i, &v)| v.clamp(params.m_min[i], params.m_max[i]))
                    .collect()
            }
        };
        let (t_next, q) = crate::thermal::step_multi(&coeffs, &state, &m, exo, k)?;
        let power = hvac_power(&m, &state, exo.t_out[k], params);
        q_total.push(q.iter().sum());
        q_tol.push(power.q_tol);
        q_rows.push(q);
        m_rows.push(m);
        let s = soz_of(&t_next);
        soc.push(soc_aggregate(&s, w));
        soz.push(s);
        t.push(t_next);
    }

    Ok(SimulationRun {
        trajectory: Trajectory { t, m: m_rows, q: q_rows, q_total, q_tol, soz, soc },
        seed,
        policy: policy.descriptor(),
        horizon,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vb::build_aggregate;

    fn five_zone() -> MultiZoneParams {
        MultiZoneParams {
            n_zones: 5,
            c_th: vec![1.5e7; 5],
            r_adj: vec![(0, 1, 0.014), (0, 2, 0.014), (0, 3, 0.014), (0, 4, 0.014)],
            r_oi: vec![0.03; 5],
            t_set: vec![25.0; 5],
            delta: vec![1.0; 5],
            m_min: vec![0.0; 5],
            m_max: vec![0.5; 5],
            c_p: 1012.0,
            t_sup: 15.0,
            d_r: 0.8,
            kappa_f: 80.0,
            cop: 1.0,
            dt: 1800.0,
        }
        .validated()
        .unwrap()
    }

    fn summer_exo(n: usize, horizon: usize) -> ExogenousSeries {
        let t_out: Vec<f64> = (0..horizon)
            .map(|k| 30.0 + 4.0 * (2.0 * std::f64::consts::PI * (k as f64 - 16.0) / 48.0).sin())
            .collect();
        let q_dist: Vec<Vec<f64>> = (0..horizon)
            .map(|k| {
                (0..n)
                    .map(|i| 1400.0 + 400.0 * ((k + 5 * i) as f64 / 7.0).sin())
                    .collect()
            })
            .collect();
        ExogenousSeries::new(t_out, q_dist).unwrap()
    }

    fn weights(params: &MultiZoneParams, exo: &ExogenousSeries) -> Vec<f64> {
        build_aggregate(params, exo, SozConvention::Centered).unwrap().w
    }

    #[test]
    fn fixed_sequence_baseline_pins_temperatures() {
        let params = five_zone();
        let exo = summer_exo(5, 48);
        let w = weights(&params, &exo);
        let coeffs = coefficients_multi(&params).unwrap();
        let base = baseline_cooling(&coeffs, &exo, &params.t_set);
        assert!(base.is_feasible());
        let policy = Policy::FixedSequence { m: base.m_base.clone() };
        let run = run_policy(
            &policy,
            &params,
            &exo,
            &params.t_set,
            48,
            SozConvention::Centered,
            &w,
            0,
        )
        .unwrap();
        for state in &run.trajectory.t {
            for (i, &ti) in state.iter().enumerate() {
                assert!((ti - params.t_set[i]).abs() < 1e-9, "zone {i}: {ti}");
            }
        }
        for &s in &run.trajectory.soc {
            assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn random_policy_is_deterministic_per_seed() {
        let params = five_zone();
        let exo = summer_exo(5, 64);
        let w = weights(&params, &exo);
        let policy = Policy::Random { seed: 99 };
        let a = run_policy(&policy, &params, &exo, &params.t_set, 64, SozConvention::Centered, &w, 99)
            .unwrap();
        let b = run_policy(&policy, &params, &exo, &params.t_set, 64, SozConvention::Centered, &w, 99)
            .unwrap();
        assert_eq!(a.trajectory.m, b.trajectory.m);
        assert_eq!(a.trajectory.t, b.trajectory.t);
        let c = run_policy(&policy, &params, &exo, &params.t_set, 64, SozConvention::Centered, &w, 100)
            .unwrap();
        assert_ne!(a.trajectory.m, c.trajectory.m);
    }

    #[test]
    fn pid_zero_error_outputs_bias() {
        let mut state = PidState::new(2);
        let gains = PidGains::default();
        let m = pid_step(
            &mut state,
            &[25.0, 25.0],
            &[25.0, 25.0],
            &gains,
            &[0.21, 0.34],
            &[0.0, 0.0],
            &[0.5, 0.5],
        );
        assert_eq!(m, vec![0.21, 0.34]);
    }

    #[test]
    fn pid_large_error_saturates() {
        let mut state = PidState::new(1);
        let gains = PidGains::default();
        let m = pid_step(&mut state, &[30.0], &[25.0], &gains, &[0.2], &[0.0], &[0.5]);
        assert_eq!(m, vec![0.5]);
    }

    #[test]
    fn pid_holds_band_after_transient() {
        let params = five_zone();
        let exo = summer_exo(5, 240);
        let w = weights(&params, &exo);
        let policy = Policy::Pid { gains: PidGains::default() };
        let t0 = vec![25.4, 24.7, 25.2, 24.9, 25.3];
        let run = run_policy(&policy, &params, &exo, &t0, 240, SozConvention::Centered, &w, 1).unwrap();
        for state in run.trajectory.t.iter().skip(24) {
            for (i, &ti) in state.iter().enumerate() {
                assert!(
                    (ti - params.t_set[i]).abs() < params.delta[i],
                    "zone {i} left the band: {ti}"
                );
            }
        }
    }

    #[test]
    fn pid_step_response_undershoot_is_bounded() {
        let params = five_zone();
        let exo = summer_exo(5, 96);
        let w = weights(&params, &exo);
        let policy = Policy::Pid { gains: PidGains::default() };
        let t0 = vec![25.8; 5];
        let run = run_policy(&policy, &params, &exo, &t0, 96, SozConvention::Centered, &w, 2).unwrap();
        for i in 0..5 {
            let crossing = run.trajectory.t.iter().position(|s| s[i] <= params.t_set[i]);
            if let Some(kc) = crossing {
                for state in run.trajectory.t.iter().skip(kc) {
                    assert!(params.t_set[i] - state[i] < 0.5 * params.delta[i]);
                }
            }
        }
    }

    #[test]
    fn greedy_flat_price_stays_near_setpoint() {
        let params = five_zone();
        let exo = summer_exo(5, 96);
        let w = weights(&params, &exo);
        let policy = Policy::PriceGreedy { prices: vec![0.2; 96], window: 48 };
        let run = run_policy(&policy, &params, &exo, &params.t_set, 96, SozConvention::Centered, &w, 3)
            .unwrap();
        for state in run.trajectory.t.iter() {
            for (i, &ti) in state.iter().enumerate() {
                assert!((ti - params.t_set[i]).abs() < 0.2 * params.delta[i]);
            }
        }
    }

    #[test]
    fn greedy_cheap_price_at_upper_band_saturates_airflow() {
        let params = five_zone();
        let exo = summer_exo(5, 4);
        let coeffs = coefficients_multi(&params).unwrap();
        let t = vec![26.0; 5];
        let m = price_greedy_step(
            &coeffs,
            &t,
            &exo,
            0,
            PriceSignal::Cheap,
            &params.t_set,
            &params.delta,
        );
        // Pre-cooling from the upper band toward T_set − 0.8δ needs more than
        // one step of full cooling authority.
        for &mi in &m {
            assert_eq!(mi, 0.5);
        }
    }

    #[test]
    fn greedy_respects_comfort_bands() {
        let params = five_zone();
        let exo = summer_exo(5, 240);
        let w = weights(&params, &exo);
        let prices: Vec<f64> = (0..240)
            .map(|k| if (k / 16) % 3 == 1 { 0.35 } else { 0.1 })
            .collect();
        let policy = Policy::PriceGreedy { prices, window: 48 };
        let run = run_policy(&policy, &params, &exo, &params.t_set, 240, SozConvention::Centered, &w, 4)
            .unwrap();
        for state in run.trajectory.t.iter() {
            for (i, &ti) in state.iter().enumerate() {
                assert!(
                    ti >= params.t_set[i] - params.delta[i] - 1e-9
                        && ti <= params.t_set[i] + params.delta[i] + 1e-9,
                    "zone {i} left the band: {ti}"
                );
            }
        }
    }

    #[test]
    fn greedy_shifts_energy_into_cheap_hours() {
        let params = five_zone();
        let exo = summer_exo(5, 240);
        let w = weights(&params, &exo);
        // ToU day: expensive block in the middle of each day.
        let prices: Vec<f64> = (0..240)
            .map(|k| if (16..40).contains(&(k % 48)) { 0.4 } else { 0.1 })
            .collect();
        let policy = Policy::PriceGreedy { prices: prices.clone(), window: 48 };
        let greedy =
            run_policy(&policy, &params, &exo, &params.t_set, 240, SozConvention::Centered, &w, 5)
                .unwrap();
        let coeffs = coefficients_multi(&params).unwrap();
        let base = baseline_cooling(&coeffs, &exo, &params.t_set);
        let baseline_policy = Policy::FixedSequence { m: base.m_base.clone() };
        let baseline = run_policy(
            &baseline_policy,
            &params,
            &exo,
            &params.t_set,
            240,
            SozConvention::Centered,
            &w,
            5,
        )
        .unwrap();
        let cheap_share = |traj: &Trajectory| -> f64 {
            let cheap: f64 = traj
                .q_tol
                .iter()
                .enumerate()
                .filter(|(k, _)| prices[*k] < 0.2)
                .map(|(_, &e)| e)
                .sum();
            let total: f64 = traj.q_tol.iter().sum();
            cheap / total
        };
        assert!(
            cheap_share(&greedy.trajectory) > cheap_share(&baseline.trajectory),
            "greedy {} vs baseline {}",
            cheap_share(&greedy.trajectory),
            cheap_share(&baseline.trajectory)
        );
    }

    #[test]
    fn warns_on_out_of_band_initial_state() {
        let params = five_zone();
        let exo = summer_exo(5, 4);
        let w = weights(&params, &exo);
        let policy = Policy::Random { seed: 0 };
        let run = run_policy(&policy, &params, &exo, &[28.0; 5], 4, SozConvention::Centered, &w, 0)
            .unwrap();
        assert!(!run.warnings.is_empty());
    }

    #[test]
    fn rejects_short_exogenous_series() {
        let params = five_zone();
        let exo = summer_exo(5, 10);
        let w = weights(&params, &exo);
        let policy = Policy::Random { seed: 0 };
        assert!(
            run_policy(&policy, &params, &exo, &params.t_set, 11, SozConvention::Centered, &w, 0)
                .is_err()
        );
    }
}

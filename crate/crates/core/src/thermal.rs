//! Discrete-time RC thermal models for single-zone and multi-zone buildings,
//! baseline (setpoint-holding) control and HVAC power accounting.
//!
//! Internal units are SI throughout: capacitance J/K, resistance K/W, power W,
//! energy J, temperature °C (differences in K), time s. Configuration files may
//! use kW/kJ conventions; the conversion happens once at parse time (see
//! [`crate::scenario`]) and the `a_ii ∈ (0, 1)` gate below catches unit mistakes
//! loudly.
//!
//! The model is cooling-only: supply air is colder than every comfort band and
//! zone cooling power `q_i = c_p · m_i · (T_i − T_sup)` is nonnegative in the
//! operating envelope.

use crate::error::{BaselineViolation, Error, Result};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};

/// Single-zone RC model with a directly controlled HVAC electric power.
///
/// Dynamics: `T(k+1) = a·T(k) − b·q_hvac(k) + d(k)` with
/// `a = 1 − dt/(C·R)`, `b = eta·dt/C` and
/// `d(k) = T_out(k)·dt/(C·R) + Q_dist(k)·dt/C`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingleZoneParams {
    /// Thermal capacitance, J/K.
    pub c_th: f64,
    /// Zone-to-outdoor thermal resistance, K/W.
    pub r_oi: f64,
    /// HVAC coefficient of performance (thermal W removed per electric W).
    pub eta: f64,
    /// HVAC electric power limits, W.
    pub q_hvac_min: f64,
    pub q_hvac_max: f64,
    /// Comfort setpoint, °C.
    pub t_set: f64,
    /// Comfort half-width, K (strictly positive).
    pub delta: f64,
    /// Step length, s.
    pub dt: f64,
}

impl SingleZoneParams {
    pub fn validated(self) -> Result<Self> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if self.q_hvac_min > self.q_hvac_max {
            return Err(Error::InvalidParameter(format!(
                "q_hvac_min {} > q_hvac_max {}",
                self.q_hvac_min, self.q_hvac_max
            )));
        }
        if self.c_th <= 0.0 || self.r_oi <= 0.0 || self.dt <= 0.0 || self.eta <= 0.0 {
            return Err(Error::InvalidParameter(
                "c_th, r_oi, eta and dt must be positive".into(),
            ));
        }
        let a = self.retention();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::UnstableDiscretization { zone: 0, value: a });
        }
        Ok(self)
    }

    /// `a = 1 − dt/(C·R)`.
    pub fn retention(&self) -> f64 {
        1.0 - self.dt / (self.c_th * self.r_oi)
    }

    /// `b = eta·dt/C`, K per W of electric HVAC power per step.
    pub fn input_gain(&self) -> f64 {
        self.eta * self.dt / self.c_th
    }

    /// Exogenous drive `d(k)`.
    pub fn drive(&self, exo: &ExogenousSeries, k: usize) -> f64 {
        exo.t_out[k] * self.dt / (self.c_th * self.r_oi)
            + exo.q_dist[k][0] * self.dt / self.c_th
    }
}

/// Multi-zone RC model controlled through per-zone supply airflow.
///
/// Zone-to-zone adjacency is an undirected edge list; each edge carries one
/// resistance, so the symmetry invariant holds by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiZoneParams {
    pub n_zones: usize,
    /// Per-zone thermal capacitance, J/K.
    pub c_th: Vec<f64>,
    /// Undirected adjacency edges `(i, j, r)` with resistance in K/W.
    pub r_adj: Vec<(usize, usize, f64)>,
    /// Per-zone zone-to-outdoor resistance, K/W.
    pub r_oi: Vec<f64>,
    /// Comfort setpoints, °C, and half-widths, K.
    pub t_set: Vec<f64>,
    pub delta: Vec<f64>,
    /// Airflow limits, kg/s.
    pub m_min: Vec<f64>,
    pub m_max: Vec<f64>,
    /// Specific heat of air, J/(kg·K).
    pub c_p: f64,
    /// Supply-air temperature setpoint, °C.
    pub t_sup: f64,
    /// Return-air fraction entering the AHU, dimensionless in [0, 1].
    pub d_r: f64,
    /// Fan power coefficient, W·s²/kg².
    pub kappa_f: f64,
    /// Chiller coefficient of performance.
    pub cop: f64,
    /// Step length, s.
    pub dt: f64,
}

impl MultiZoneParams {
    pub fn validated(self) -> Result<Self> {
        let n = self.n_zones;
        if n == 0 {
            return Err(Error::InvalidParameter("n_zones must be >= 1".into()));
        }
        for (name, v) in [
            ("c_th", &self.c_th),
            ("r_oi", &self.r_oi),
            ("t_set", &self.t_set),
            ("delta", &self.delta),
            ("m_min", &self.m_min),
            ("m_max", &self.m_max),
        ] {
            if v.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, expected {n}",
                    v.len()
                )));
            }
        }
        for i in 0..n {
            if !(self.delta[i] > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "delta[{i}] must be > 0, got {}",
                    self.delta[i]
                )));
            }
            if self.m_min[i] > self.m_max[i] {
                return Err(Error::InvalidParameter(format!(
                    "m_min[{i}] {} > m_max[{i}] {}",
                    self.m_min[i], self.m_max[i]
                )));
            }
            if self.c_th[i] <= 0.0 || self.r_oi[i] <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "c_th[{i}] and r_oi[{i}] must be positive"
                )));
            }
            if !(self.t_sup < self.t_set[i] - self.delta[i]) {
                return Err(Error::InvalidParameter(format!(
                    "t_sup {} must lie below the comfort band of zone {i} (cooling regime)",
                    self.t_sup
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.d_r) {
            return Err(Error::InvalidParameter(format!(
                "d_r must be in [0, 1], got {}",
                self.d_r
            )));
        }
        if self.c_p <= 0.0 || self.cop <= 0.0 || self.dt <= 0.0 || self.kappa_f < 0.0 {
            return Err(Error::InvalidParameter(
                "c_p, cop and dt must be positive; kappa_f nonnegative".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j, r) in &self.r_adj {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidParameter(format!(
                    "adjacency edge ({i}, {j}) out of range for {n} zones"
                )));
            }
            if r <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "adjacency resistance for edge ({i}, {j}) must be positive, got {r}"
                )));
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate adjacency edge ({}, {})",
                    key.0, key.1
                )));
            }
        }
        // The a_ii gate runs through the coefficient build.
        coefficients_multi(&self)?;
        Ok(self)
    }
}

/// Per-step exogenous inputs: outdoor temperature and per-zone disturbance heat
/// gain (positive warms the zone).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExogenousSeries {
    /// Outdoor temperature, °C, one entry per step.
    pub t_out: Vec<f64>,
    /// Disturbance heat gain, W, time-major: `q_dist[k][i]`.
    pub q_dist: Vec<Vec<f64>>,
}

impl ExogenousSeries {
    pub fn new(t_out: Vec<f64>, q_dist: Vec<Vec<f64>>) -> Result<Self> {
        if t_out.len() != q_dist.len() {
            return Err(Error::LengthMismatch(format!(
                "t_out has {} steps, q_dist has {}",
                t_out.len(),
                q_dist.len()
            )));
        }
        for (k, row) in q_dist.iter().enumerate() {
            if row.len() != q_dist[0].len() {
                return Err(Error::LengthMismatch(format!(
                    "q_dist row {k} has {} zones, expected {}",
                    row.len(),
                    q_dist[0].len()
                )));
            }
        }
        let finite = t_out.iter().all(|v| v.is_finite())
            && q_dist.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "exogenous series contains non-finite values".into(),
            ));
        }
        Ok(Self { t_out, q_dist })
    }

    pub fn horizon(&self) -> usize {
        self.t_out.len()
    }

    pub fn n_zones(&self) -> usize {
        self.q_dist.first().map_or(0, Vec::len)
    }

    /// Truncate to the first `k` steps.
    pub fn prefix(&self, k: usize) -> ExogenousSeries {
        ExogenousSeries {
            t_out: self.t_out[..k].to_vec(),
            q_dist: self.q_dist[..k].to_vec(),
        }
    }
}

/// Compiled zone-dynamics coefficients of the multi-zone model:
/// `T(k+1) = A·T(k) − B·q(k) + a_out·T_out(k) + d(k)` with
/// `q_i(k) = c_p·m_i(k)·(T_i(k) − T_sup)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiZoneCoeffs {
    pub a: Mat,
    /// Diagonal of B: `b_i = dt/C_i`.
    pub b_diag: Vec<f64>,
    /// `a_out_i = dt/(R_oi·C_i)`.
    pub a_out: Vec<f64>,
    pub c_p: f64,
    pub t_sup: f64,
    pub m_min: Vec<f64>,
    pub m_max: Vec<f64>,
    pub dt: f64,
}

impl MultiZoneCoeffs {
    pub fn n_zones(&self) -> usize {
        self.b_diag.len()
    }

    /// Exogenous drive `d(k)_i = Q_dist_i(k)·dt/C_i`.
    pub fn drive(&self, exo: &ExogenousSeries, k: usize) -> Vec<f64> {
        (0..self.n_zones())
            .map(|i| exo.q_dist[k][i] * self.b_diag[i])
            .collect()
    }

    /// Zone cooling power vector for a given state and airflow.
    pub fn cooling_power(&self, t: &[f64], m: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(m)
            .map(|(&ti, &mi)| self.c_p * mi * (ti - self.t_sup))
            .collect()
    }
}

/// Build the compact-form coefficients from RC parameters.
///
/// Rejects any `a_ii` outside (0, 1), naming the zone: that gate is what makes
/// unit mistakes in config files fail loudly instead of producing a quietly
/// unstable model.
pub fn coefficients_multi(params: &MultiZoneParams) -> Result<MultiZoneCoeffs> {
    let n = params.n_zones;
    let mut a = Mat::zeros(n, n);
    for &(i, j, r) in &params.r_adj {
        a[(i, j)] += params.dt / (params.c_th[i] * r);
        a[(j, i)] += params.dt / (params.c_th[j] * r);
    }
    let mut a_out = vec![0.0; n];
    let mut b_diag = vec![0.0; n];
    for i in 0..n {
        a_out[i] = params.dt / (params.r_oi[i] * params.c_th[i]);
        b_diag[i] = params.dt / params.c_th[i];
        let coupling: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        let a_ii = 1.0 - a_out[i] - coupling;
        if !(a_ii > 0.0 && a_ii < 1.0) {
            return Err(Error::UnstableDiscretization { zone: i, value: a_ii });
        }
        a[(i, i)] = a_ii;
    }
    Ok(MultiZoneCoeffs {
        a,
        b_diag,
        a_out,
        c_p: params.c_p,
        t_sup: params.t_sup,
        m_min: params.m_min.clone(),
        m_max: params.m_max.clone(),
        dt: params.dt,
    })
}

/// One step of the multi-zone dynamics. Airflow outside the VAV box is
/// reported, not clamped.
pub fn step_multi(
    coeffs: &MultiZoneCoeffs,
    t: &[f64],
    m: &[f64],
    exo: &ExogenousSeries,
    k: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = coeffs.n_zones();
    debug_assert_eq!(t.len(), n);
    debug_assert_eq!(m.len(), n);
    for i in 0..n {
        if m[i] < coeffs.m_min[i] - 1e-12 || m[i] > coeffs.m_max[i] + 1e-12 {
            return Err(Error::InputOutOfRange(format!(
                "m[{i}] = {} outside [{}, {}] at step {k}",
                m[i], coeffs.m_min[i], coeffs.m_max[i]
            )));
        }
        if !t[i].is_finite() {
            return Err(Error::InputOutOfRange(format!(
                "T[{i}] is not finite at step {k}"
            )));
        }
    }
    let q = coeffs.cooling_power(t, m);
    let d = coeffs.drive(exo, k);
    let mut t_next = coeffs.a.matvec(t);
    for i in 0..n {
        t_next[i] += -coeffs.b_diag[i] * q[i] + coeffs.a_out[i] * exo.t_out[k] + d[i];
    }
    Ok((t_next, q))
}

/// One step of the single-zone dynamics with a direct HVAC power input.
pub fn step_single(
    t: f64,
    q_hvac: f64,
    exo: &ExogenousSeries,
    k: usize,
    params: &SingleZoneParams,
) -> Result<f64> {
    if q_hvac < params.q_hvac_min - 1e-12 || q_hvac > params.q_hvac_max + 1e-12 {
        return Err(Error::InputOutOfRange(format!(
            "q_hvac = {q_hvac} outside [{}, {}] at step {k}",
            params.q_hvac_min, params.q_hvac_max
        )));
    }
    Ok(params.retention() * t - params.input_gain() * q_hvac + params.drive(exo, k))
}

/// Baseline cooling/airflow schedule holding every zone exactly at `target`.
///
/// The schedule is the unconstrained solution of the steady-state equations;
/// steps where the airflow leaves the VAV box (or cooling goes negative) are
/// listed in `violations` and the unclamped values are kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSchedule {
    /// Time-major cooling power, W: `q_base[k][i]`.
    pub q_base: Vec<Vec<f64>>,
    /// Time-major airflow, kg/s: `m_base[k][i]`.
    pub m_base: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub violations: Vec<BaselineViolation>,
}

impl BaselineSchedule {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Aggregate baseline cooling power per step.
    pub fn total_q(&self) -> Vec<f64> {
        self.q_base.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Solve the per-step steady-state equations for the hold-at-`target` schedule.
pub fn baseline_cooling(
    coeffs: &MultiZoneCoeffs,
    exo: &ExogenousSeries,
    target: &[f64],
) -> BaselineSchedule {
    let n = coeffs.n_zones();
    let horizon = exo.horizon();
    let a_target = coeffs.a.matvec(target);
    let mut q_base = Vec::with_capacity(horizon);
    let mut m_base = Vec::with_capacity(horizon);
    let mut violations = Vec::new();
    for k in 0..horizon {
        let d = coeffs.drive(exo, k);
        let mut qk = vec![0.0; n];
        let mut mk = vec![0.0; n];
        for i in 0..n {
            // target_i = (A·target)_i − b_i·q + a_out_i·T_out + d_i, solved for q.
            qk[i] = (a_target[i] - target[i] + coeffs.a_out[i] * exo.t_out[k] + d[i])
                / coeffs.b_diag[i];
            mk[i] = qk[i] / (coeffs.c_p * (target[i] - coeffs.t_sup));
            if qk[i] < 0.0 {
                violations.push(BaselineViolation {
                    zone: i,
                    step: k,
                    what: format!("q_base = {:.3} W < 0", qk[i]),
                });
            } else if mk[i] < coeffs.m_min[i] || mk[i] > coeffs.m_max[i] {
                violations.push(BaselineViolation {
                    zone: i,
                    step: k,
                    what: format!(
                        "m_base = {:.4} kg/s outside [{}, {}]",
                        mk[i], coeffs.m_min[i], coeffs.m_max[i]
                    ),
                });
            }
        }
        q_base.push(qk);
        m_base.push(mk);
    }
    BaselineSchedule { q_base, m_base, target: target.to_vec(), violations }
}

/// Single-zone baseline HVAC power holding the zone at `target`.
pub fn baseline_cooling_single(
    params: &SingleZoneParams,
    exo: &ExogenousSeries,
    target: f64,
) -> (Vec<f64>, Vec<BaselineViolation>) {
    let a = params.retention();
    let b = params.input_gain();
    let mut q_base = Vec::with_capacity(exo.horizon());
    let mut violations = Vec::new();
    for k in 0..exo.horizon() {
        let q = (params.drive(exo, k) - (1.0 - a) * target) / b;
        if q < params.q_hvac_min || q > params.q_hvac_max {
            violations.push(BaselineViolation {
                zone: 0,
                step: k,
                what: format!(
                    "q_base = {:.3} W outside [{}, {}]",
                    q, params.q_hvac_min, params.q_hvac_max
                ),
            });
        }
        q_base.push(q);
    }
    (q_base, violations)
}

/// Cooling power, fan power (both W) and total electric energy for one step (J).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvacPower {
    pub p_cooling: f64,
    pub p_fan: f64,
    pub q_tol: f64,
}

/// AHU power accounting: fresh-air and return-air cooling plus quadratic fan power.
pub fn hvac_power(m: &[f64], t: &[f64], t_out: f64, params: &MultiZoneParams) -> HvacPower {
    let m_total: f64 = m.iter().sum();
    let fresh: f64 = m_total * (t_out - params.t_sup);
    let recirc: f64 = m.iter().zip(t).map(|(&mi, &ti)| mi * (ti - params.t_sup)).sum();
    let p_cooling = params.c_p * (1.0 - params.d_r) * fresh + params.c_p * params.d_r * recirc;
    let p_fan = params.kappa_f * m_total * m_total;
    let q_tol = (p_cooling / params.cop) * params.dt + p_fan * params.dt;
    HvacPower { p_cooling, p_fan, q_tol }
}

/// Per-zone airflow interval keeping the next state inside a temperature band.
///
/// When no airflow in the VAV box can satisfy the band, the interval collapses
/// to the box endpoint minimizing the violation and `comfort_feasible` is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirflowInterval {
    pub lo: f64,
    pub hi: f64,
    pub comfort_feasible: bool,
}

/// Invert the affine next-state map per zone: with the current state known,
/// `T_i(k+1)` depends on `m_i(k)` alone (B is diagonal), so each zone gets an
/// independent interval `[m_lo, m_hi]` keeping `T_i(k+1) ∈ [t_lo_i, t_hi_i]`,
/// intersected with the VAV box.
pub fn comfort_airflow_intervals(
    coeffs: &MultiZoneCoeffs,
    t: &[f64],
    exo: &ExogenousSeries,
    k: usize,
    t_lo: &[f64],
    t_hi: &[f64],
) -> Vec<AirflowInterval> {
    let n = coeffs.n_zones();
    let free = coeffs.a.matvec(t);
    let d = coeffs.drive(exo, k);
    (0..n)
        .map(|i| {
            let base = free[i] + coeffs.a_out[i] * exo.t_out[k] + d[i];
            let slope = coeffs.b_diag[i] * coeffs.c_p * (t[i] - coeffs.t_sup);
            let (box_lo, box_hi) = (coeffs.m_min[i], coeffs.m_max[i]);
            if slope <= 1e-12 {
                // No cooling authority; the band either holds or it doesn't.
                let feasible = base >= t_lo[i] && base <= t_hi[i];
                return AirflowInterval { lo: box_lo, hi: if feasible { box_hi } else { box_lo }, comfort_feasible: feasible };
            }
            // t_lo ≤ base − slope·m ≤ t_hi.
            let lo = ((base - t_hi[i]) / slope).max(box_lo);
            let hi = ((base - t_lo[i]) / slope).min(box_hi);
            if lo <= hi {
                AirflowInterval { lo, hi, comfort_feasible: true }
            } else {
                // Comfort takes priority: saturate toward the nearest band.
                let fallback = if base - slope * box_hi > t_hi[i] { box_hi } else { box_lo };
                AirflowInterval { lo: fallback, hi: fallback, comfort_feasible: false }
            }
        })
        .collect()
}

/// Time-indexed record of a simulated run.
///
/// States are stored for steps `0..=K` (so `t.len() == horizon() + 1`); inputs
/// and per-step energy for `0..K`. All series are time-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// Zone temperatures, °C: `t[k][i]`, `k = 0..=K`.
    pub t: Vec<Vec<f64>>,
    /// Airflow, kg/s: `m[k][i]`, `k = 0..K`.
    pub m: Vec<Vec<f64>>,
    /// Zone cooling power, W: `q[k][i]`.
    pub q: Vec<Vec<f64>>,
    /// Aggregate cooling power per step, W.
    pub q_total: Vec<f64>,
    /// Total electric energy per step, J.
    pub q_tol: Vec<f64>,
    /// Characterization states: `soz[k][i]`, `k = 0..=K`.
    pub soz: Vec<Vec<f64>>,
    /// Aggregated state per step, `k = 0..=K`.
    pub soc: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.m.len()
    }

    pub fn n_zones(&self) -> usize {
        self.t.first().map_or(0, Vec::len)
    }
}

/// Simulate the multi-zone model under a given airflow table.
///
/// `soz`/`soc` are left empty; the policy harness fills them with the
/// convention and weights in use.
pub fn simulate_multi(
    coeffs: &MultiZoneCoeffs,
    params: &MultiZoneParams,
    exo: &ExogenousSeries,
    t0: &[f64],
    m_table: &[Vec<f64>],
) -> Result<Trajectory> {
    let horizon = m_table.len();
    if exo.horizon() < horizon {
        return Err(Error::LengthMismatch(format!(
            "exogenous series has {} steps, need {horizon}",
            exo.horizon()
        )));
    }
    let mut t = Vec::with_capacity(horizon + 1);
    let mut q = Vec::with_capacity(horizon);
    let mut q_total = Vec::with_capacity(horizon);
    let mut q_tol = Vec::with_capacity(horizon);
    t.push(t0.to_vec());
    for (k, mk) in m_table.iter().enumerate() {
        let state = t.last().expect("state history is never empty").clone();
        let (t_next, qk) = step_multi(coeffs, &state, mk, exo, k)?;
        let power = hvac_power(mk, &state, exo.t_out[k], params);
        q_total.push(qk.iter().sum());
        q_tol.push(power.q_tol);
        q.push(qk);
        t.push(t_next);
    }
    Ok(Trajectory {
        t,
        m: m_table.to_vec(),
        q,
        q_total,
        q_tol,
        soz: Vec::new(),
        soc: Vec::new(),
    })
}

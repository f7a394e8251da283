//! Virtual-battery models built from the RC formulations by equivalent
//! transformation: the single-zone VB, zone-level VB systems, and the
//! eigenvector-aggregated building-level VB.
//!
//! Two state-range conventions are supported. `Centered` measures the zone
//! state from the setpoint, `soz = (T_set − T)/δ ∈ [−1, 1]`, with baseline
//! control holding `T_set`. `UnitInterval` measures from the upper comfort
//! limit, `soz = (T_max − T)/(2δ) ∈ [0, 1]`, with baseline control holding
//! `T_max` and the input gain halved. For the same physical trajectory the two
//! are related by `soz_unit = (soz_centered + 1)/2`.

use crate::beta::{beta_at_point, beta_conservative};
use crate::eigen::dominant_eigenpair;
use crate::error::{BaselineViolation, Error, Result};
use crate::linalg::{dot, Mat};
use crate::thermal::{
    baseline_cooling, baseline_cooling_single, coefficients_multi, ExogenousSeries,
    MultiZoneCoeffs, MultiZoneParams, SingleZoneParams,
};
use serde::{Deserialize, Serialize};

/// State-range convention for characterization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SozConvention {
    Centered,
    UnitInterval,
}

impl SozConvention {
    /// Characterization state of a zone temperature.
    pub fn soz_of_temperature(self, t: f64, t_set: f64, delta: f64) -> f64 {
        debug_assert!(delta > 0.0);
        match self {
            SozConvention::Centered => (t_set - t) / delta,
            SozConvention::UnitInterval => (t_set + delta - t) / (2.0 * delta),
        }
    }

    /// Inverse mapping back to temperature.
    pub fn temperature_of_soz(self, soz: f64, t_set: f64, delta: f64) -> f64 {
        match self {
            SozConvention::Centered => t_set - soz * delta,
            SozConvention::UnitInterval => t_set + delta - soz * 2.0 * delta,
        }
    }

    /// Input-gain divisor: δ for centered, 2δ for unit-interval.
    pub fn gain_divisor(self, delta: f64) -> f64 {
        match self {
            SozConvention::Centered => delta,
            SozConvention::UnitInterval => 2.0 * delta,
        }
    }

    /// Baseline hold temperature for a zone.
    pub fn baseline_target(self, t_set: f64, delta: f64) -> f64 {
        match self {
            SozConvention::Centered => t_set,
            SozConvention::UnitInterval => t_set + delta,
        }
    }

    /// Admissible state range encoded by the comfort band.
    pub fn soz_range(self) -> (f64, f64) {
        match self {
            SozConvention::Centered => (-1.0, 1.0),
            SozConvention::UnitInterval => (0.0, 1.0),
        }
    }
}

/// Exact single-zone virtual battery: `soz(k+1) = a·soz(k) + gain·(q(k) − q_base(k))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VBSingle {
    pub a: f64,
    /// `b/δ` (centered) or `b/(2δ)` (unit-interval), K-per-step per W, scaled.
    pub gain: f64,
    pub q_base: Vec<f64>,
    pub q_hvac_min: f64,
    pub q_hvac_max: f64,
    pub soz_min: f64,
    pub soz_max: f64,
    pub convention: SozConvention,
    pub dt: f64,
    /// Baseline steps outside the HVAC power limits, if any.
    pub baseline_violations: Vec<BaselineViolation>,
}

impl VBSingle {
    pub fn step(&self, soz: f64, q_hvac: f64, k: usize) -> f64 {
        self.a * soz + self.gain * (q_hvac - self.q_base[k])
    }

    /// Net-charging-power bounds at step `k` implied by the HVAC power limits.
    pub fn charge_power_bounds(&self, k: usize) -> (f64, f64) {
        (
            self.gain * (self.q_hvac_min - self.q_base[k]),
            self.gain * (self.q_hvac_max - self.q_base[k]),
        )
    }

    /// Electric energy for one step recovered from the net charging power.
    pub fn energy_from_charge_power(&self, p_chdis: f64, k: usize) -> f64 {
        (p_chdis / self.gain + self.q_base[k]) * self.dt
    }
}

/// Build the single-zone VB for a convention. The baseline infeasibility
/// report, if any, rides along rather than aborting the build.
pub fn build_single_vb(
    params: &SingleZoneParams,
    exo: &ExogenousSeries,
    convention: SozConvention,
) -> Result<VBSingle> {
    let params = params.clone().validated()?;
    let target = convention.baseline_target(params.t_set, params.delta);
    let (q_base, baseline_violations) = baseline_cooling_single(&params, exo, target);
    let (soz_min, soz_max) = convention.soz_range();
    Ok(VBSingle {
        a: params.retention(),
        gain: params.input_gain() / convention.gain_divisor(params.delta),
        q_base,
        q_hvac_min: params.q_hvac_min,
        q_hvac_max: params.q_hvac_max,
        soz_min,
        soz_max,
        convention,
        dt: params.dt,
        baseline_violations,
    })
}

/// Scaled zone-coupling matrices of the zone-level VB system:
/// `Ã[i][j] = a_ij·δ_j/δ_i` (diagonal unchanged) and `B̃ = diag(b_i/divisor)`.
pub fn build_tilde_matrices(
    coeffs: &MultiZoneCoeffs,
    delta: &[f64],
    convention: SozConvention,
) -> (Mat, Vec<f64>) {
    let n = coeffs.n_zones();
    let mut a_tilde = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a_tilde[(i, j)] = if i == j {
                coeffs.a[(i, i)]
            } else {
                coeffs.a[(i, j)] * delta[j] / delta[i]
            };
        }
    }
    let b_tilde: Vec<f64> = (0..n)
        .map(|i| coeffs.b_diag[i] / convention.gain_divisor(delta[i]))
        .collect();
    (a_tilde, b_tilde)
}

/// Eigenvector-weighted aggregate of zone states.
pub fn soc_aggregate(soz: &[f64], w: &[f64]) -> f64 {
    dot(soz, w)
}

/// One step of the zone-level VB system: `Ã·soz + B̃·(q − q_base)`.
pub fn zone_vb_step(
    soz: &[f64],
    q: &[f64],
    q_base_k: &[f64],
    a_tilde: &Mat,
    b_tilde: &[f64],
) -> Vec<f64> {
    let mut next = a_tilde.matvec(soz);
    for i in 0..soz.len() {
        next[i] += b_tilde[i] * (q[i] - q_base_k[i]);
    }
    next
}

/// Simple per-zone cooling-power box estimates `c_p·m_lim·(T_set − T_sup)`,
/// repeated per step. Returned time-major.
pub fn estimate_q_limits(
    params: &MultiZoneParams,
    horizon: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let per_zone = |m_lim: &[f64]| -> Vec<f64> {
        (0..params.n_zones)
            .map(|i| params.c_p * m_lim[i] * (params.t_set[i] - params.t_sup))
            .collect()
    };
    let lo = per_zone(&params.m_min);
    let hi = per_zone(&params.m_max);
    (vec![lo; horizon], vec![hi; horizon])
}

/// β-bound estimation algorithms for the net-charging relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaAlgorithm {
    /// Constant bounds min/max of `wᵀB̃`; hold for every nonnegative `q`.
    Conservative,
    /// Point estimate at the previous step's realized zone cooling power.
    StepAhead,
    /// Exact value at the realized zone cooling power; makes the bounds collapse.
    Tight,
}

impl BetaAlgorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            BetaAlgorithm::Conservative => "conservative",
            BetaAlgorithm::StepAhead => "step_ahead",
            BetaAlgorithm::Tight => "tight",
        }
    }
}

impl std::str::FromStr for BetaAlgorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(BetaAlgorithm::Conservative),
            "step-ahead" | "step_ahead" => Ok(BetaAlgorithm::StepAhead),
            "tight" => Ok(BetaAlgorithm::Tight),
            other => Err(Error::InvalidParameter(format!(
                "unknown beta algorithm '{other}' (expected conservative|step-ahead|tight)"
            ))),
        }
    }
}

/// The aggregated virtual battery for a multi-zone building.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VBAggregate {
    pub a_tilde: Mat,
    /// Diagonal of B̃.
    pub b_tilde: Vec<f64>,
    /// Dominant eigenvalue of Ãᵀ.
    pub alpha: f64,
    /// Sum-normalized nonnegative left eigenvector of Ã.
    pub w: Vec<f64>,
    /// Row vector `wᵀB̃`.
    pub wb: Vec<f64>,
    /// Baseline zone cooling power, time-major, W.
    pub q_base: Vec<Vec<f64>>,
    /// Per-step β bounds.
    pub beta_min: Vec<f64>,
    pub beta_max: Vec<f64>,
    /// Per-zone cooling-power box estimates, time-major.
    pub q_zone_min: Vec<Vec<f64>>,
    pub q_zone_max: Vec<Vec<f64>>,
    /// Aggregate cooling-power limits per step, W.
    pub q_total_min: Vec<f64>,
    pub q_total_max: Vec<f64>,
    pub convention: SozConvention,
    pub dt: f64,
    /// Baseline infeasibility report carried from construction.
    pub baseline_violations: Vec<BaselineViolation>,
}

impl VBAggregate {
    pub fn n_zones(&self) -> usize {
        self.w.len()
    }

    pub fn horizon(&self) -> usize {
        self.q_base.len()
    }

    /// `wᵀB̃·q_base(k)`, the baseline discharge offset.
    pub fn wb_qbase(&self, k: usize) -> f64 {
        dot(&self.wb, &self.q_base[k])
    }

    pub fn soc_range(&self) -> (f64, f64) {
        self.convention.soz_range()
    }

    /// Denominator guard for β ratio evaluations: `1e−9·Σ q_max`.
    pub fn denominator_guard(&self) -> f64 {
        1e-9 * self.q_total_max.first().copied().unwrap_or(1.0)
    }

    /// Recompute the per-step β bounds with a given algorithm.
    ///
    /// `q_realized` (time-major zone cooling powers) is required for the
    /// step-ahead and tight algorithms; step 0 of the step-ahead estimate
    /// falls back to the baseline point.
    pub fn set_betas(&mut self, algo: BetaAlgorithm, q_realized: Option<&[Vec<f64>]>) -> Result<()> {
        let horizon = self.horizon();
        let guard = self.denominator_guard();
        match algo {
            BetaAlgorithm::Conservative => {
                let (lo, hi) = beta_conservative(&self.wb);
                self.beta_min = vec![lo; horizon];
                self.beta_max = vec![hi; horizon];
            }
            BetaAlgorithm::StepAhead => {
                let q = q_realized.ok_or_else(|| {
                    Error::InvalidParameter(
                        "step-ahead betas need a realized cooling-power trajectory".into(),
                    )
                })?;
                let mut lo = Vec::with_capacity(horizon);
                for k in 0..horizon {
                    let point = if k == 0 { &self.q_base[0] } else { &q[k - 1] };
                    lo.push(beta_at_point(&self.wb, point, guard, k)?);
                }
                self.beta_min = lo.clone();
                self.beta_max = lo;
            }
            BetaAlgorithm::Tight => {
                let q = q_realized.ok_or_else(|| {
                    Error::InvalidParameter(
                        "tight betas need the realized cooling-power trajectory".into(),
                    )
                })?;
                let mut vals = Vec::with_capacity(horizon);
                for k in 0..horizon {
                    vals.push(beta_at_point(&self.wb, &q[k], guard, k)?);
                }
                self.beta_min = vals.clone();
                self.beta_max = vals;
            }
        }
        Ok(())
    }

    pub fn save_toml(&self, path: &std::path::Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("serialize VB model: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_toml(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: format!("parse VB model: {e}"),
        })
    }
}

/// Construct the aggregated VB from RC parameters: tilde matrices, dominant
/// eigenpair of Ãᵀ, baseline schedule for the convention's hold target, box
/// estimates and conservative β bounds.
pub fn build_aggregate(
    params: &MultiZoneParams,
    exo: &ExogenousSeries,
    convention: SozConvention,
) -> Result<VBAggregate> {
    let coeffs = coefficients_multi(params)?;
    let (a_tilde, b_tilde) = build_tilde_matrices(&coeffs, &params.delta, convention);
    let (alpha, w) = dominant_eigenpair(&a_tilde.transpose())?;

    // Eigen relation quality gate.
    let atw = a_tilde.tr_matvec(&w);
    let residual = atw
        .iter()
        .zip(&w)
        .map(|(x, wi)| (x - alpha * wi).abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(Error::EigenNoConvergence { iterations: 0, residual });
    }

    let target: Vec<f64> = (0..params.n_zones)
        .map(|i| convention.baseline_target(params.t_set[i], params.delta[i]))
        .collect();
    let base = baseline_cooling(&coeffs, exo, &target);
    let wb: Vec<f64> = (0..params.n_zones).map(|i| w[i] * b_tilde[i]).collect();
    let (q_zone_min, q_zone_max) = estimate_q_limits(params, exo.horizon());
    let q_total_min: Vec<f64> = q_zone_min.iter().map(|r| r.iter().sum()).collect();
    let q_total_max: Vec<f64> = q_zone_max.iter().map(|r| r.iter().sum()).collect();
    let (beta_lo, beta_hi) = beta_conservative(&wb);

    Ok(VBAggregate {
        a_tilde,
        b_tilde,
        alpha,
        w,
        wb,
        q_base: base.q_base,
        beta_min: vec![beta_lo; exo.horizon()],
        beta_max: vec![beta_hi; exo.horizon()],
        q_zone_min,
        q_zone_max,
        q_total_min,
        q_total_max,
        convention,
        dt: params.dt,
        baseline_violations: base.violations,
    })
}

/// soc bound trajectories produced by propagating the aggregated VB under a
/// committed aggregate cooling power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocBoundTrajectory {
    pub soc_true: Vec<f64>,
    pub soc_up: Vec<f64>,
    pub soc_dn: Vec<f64>,
    pub algorithm: String,
    /// Steps where the aggregate cooling power left `[Q_min, Q_max]`.
    pub box_violations: Vec<usize>,
}

/// Propagate the upper/lower soc recursions
/// `soc_up(k+1) = α·soc_up(k) + β_max(k)·Q(k) − wᵀB̃·q_base(k)` (and the β_min
/// analogue) from a shared initial state.
///
/// `soc_true` is the reference trajectory identified from the RC simulation
/// (length `K+1`); aggregate-power box violations are reported, not clamped.
pub fn propagate_soc_bounds(
    vb: &VBAggregate,
    q_total: &[f64],
    soc0: f64,
    soc_true: &[f64],
    algorithm: BetaAlgorithm,
) -> SocBoundTrajectory {
    let horizon = q_total.len();
    let mut soc_up = Vec::with_capacity(horizon + 1);
    let mut soc_dn = Vec::with_capacity(horizon + 1);
    let mut box_violations = Vec::new();
    soc_up.push(soc0);
    soc_dn.push(soc0);
    for k in 0..horizon {
        if q_total[k] < vb.q_total_min[k] - 1e-9 || q_total[k] > vb.q_total_max[k] + 1e-9 {
            box_violations.push(k);
        }
        let offset = vb.wb_qbase(k);
        let up = vb.alpha * soc_up[k] + vb.beta_max[k] * q_total[k] - offset;
        let dn = vb.alpha * soc_dn[k] + vb.beta_min[k] * q_total[k] - offset;
        soc_up.push(up);
        soc_dn.push(dn);
    }
    SocBoundTrajectory {
        soc_true: soc_true.to_vec(),
        soc_up,
        soc_dn,
        algorithm: algorithm.tag().to_string(),
        box_violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_params() -> SingleZoneParams {
        SingleZoneParams {
            c_th: 1.5e7,
            r_oi: 0.03,
            eta: 3.0,
            q_hvac_min: 0.0,
            q_hvac_max: 3000.0,
            t_set: 25.0,
            delta: 1.0,
            dt: 1800.0,
        }
        .validated()
        .unwrap()
    }

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
            .map(|k| 30.0 + 5.0 * (2.0 * std::f64::consts::PI * k as f64 / 48.0).sin())
            .collect();
        let q_dist: Vec<Vec<f64>> = (0..horizon)
            .map(|k| {
                (0..n)
                    .map(|i| 1200.0 + 500.0 * ((k + 7 * i) as f64 / 9.0).sin())
                    .collect()
            })
            .collect();
        ExogenousSeries::new(t_out, q_dist).unwrap()
    }

    #[test]
    fn soz_at_setpoint_and_band_edges() {
        let c = SozConvention::Centered;
        let u = SozConvention::UnitInterval;
        assert_eq!(c.soz_of_temperature(25.0, 25.0, 1.0), 0.0);
        assert_eq!(u.soz_of_temperature(25.0, 25.0, 1.0), 0.5);
        // Lower comfort limit is the full state.
        assert_eq!(c.soz_of_temperature(24.0, 25.0, 1.0), 1.0);
        assert_eq!(u.soz_of_temperature(24.0, 25.0, 1.0), 1.0);
        // Published parameters: T_set = 25, δ = 1, T = 25.5 → −0.5 centered.
        assert_eq!(c.soz_of_temperature(25.5, 25.0, 1.0), -0.5);
    }

    #[test]
    fn convention_bridge_is_exact_affine() {
        for t in [23.7, 24.0, 25.0, 25.31, 26.0, 27.2] {
            let sc = SozConvention::Centered.soz_of_temperature(t, 25.0, 1.0);
            let su = SozConvention::UnitInterval.soz_of_temperature(t, 25.0, 1.0);
            assert!((su - (sc + 1.0) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_vb_baseline_invariance() {
        let params = single_params();
        let exo = summer_exo(1, 48);
        let vb = build_single_vb(&params, &exo, SozConvention::Centered).unwrap();
        let mut soz = 0.0;
        for k in 0..48 {
            soz = vb.step(soz, vb.q_base[k], k);
            assert_eq!(soz, 0.0);
        }
    }

    #[test]
    fn single_vb_matches_rc_simulation() {
        use crate::thermal::step_single;
        let params = single_params();
        let exo = summer_exo(1, 96);
        for convention in [SozConvention::Centered, SozConvention::UnitInterval] {
            let vb = build_single_vb(&params, &exo, convention).unwrap();
            let mut t = 24.6;
            let mut soz = convention.soz_of_temperature(t, params.t_set, params.delta);
            for k in 0..96 {
                // Deterministic admissible input pattern.
                let q = params.q_hvac_max * (0.5 + 0.5 * ((k * 37 % 11) as f64 / 11.0 - 0.5));
                t = step_single(t, q, &exo, k, &params).unwrap();
                soz = vb.step(soz, q, k);
                let soz_rc = convention.soz_of_temperature(t, params.t_set, params.delta);
                assert!(
                    (soz - soz_rc).abs() <= 1e-9,
                    "convention {convention:?} step {k}: {soz} vs {soz_rc}"
                );
            }
        }
    }

    #[test]
    fn single_vb_energy_readback_inverts() {
        let params = single_params();
        let exo = summer_exo(1, 8);
        let vb = build_single_vb(&params, &exo, SozConvention::Centered).unwrap();
        for k in 0..8 {
            let q = 1234.5;
            let p = vb.gain * (q - vb.q_base[k]);
            let energy = vb.energy_from_charge_power(p, k);
            assert!((energy - q * params.dt).abs() < 1e-6);
        }
    }

    #[test]
    fn tilde_matrices_identical_bands_reduce_to_a() {
        let params = five_zone();
        let coeffs = coefficients_multi(&params).unwrap();
        let (a_tilde, _) = build_tilde_matrices(&coeffs, &params.delta, SozConvention::Centered);
        assert_eq!(a_tilde, coeffs.a);
    }

    #[test]
    fn tilde_matrices_heterogeneous_bands_hand_values() {
        // a_12 = a_21 = 0.1 with δ = [1, 2] → Ã_12 = 0.2, Ã_21 = 0.05.
        let params = MultiZoneParams {
            n_zones: 2,
            c_th: vec![200.0, 200.0],
            r_adj: vec![(0, 1, 0.05)],
            r_oi: vec![0.1, 0.1],
            t_set: vec![25.0, 25.0],
            delta: vec![1.0, 2.0],
            m_min: vec![0.0, 0.0],
            m_max: vec![1.0, 1.0],
            c_p: 1.0,
            t_sup: 15.0,
            d_r: 0.5,
            kappa_f: 0.0,
            cop: 1.0,
            dt: 1.0,
        }
        .validated()
        .unwrap();
        let coeffs = coefficients_multi(&params).unwrap();
        let (a_tilde, b_tilde) =
            build_tilde_matrices(&coeffs, &params.delta, SozConvention::Centered);
        assert!((coeffs.a[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((a_tilde[(0, 1)] - 0.2).abs() < 1e-15);
        assert!((a_tilde[(1, 0)] - 0.05).abs() < 1e-15);
        // Unit-interval halves every B̃ entry.
        let (_, b_unit) =
            build_tilde_matrices(&coeffs, &params.delta, SozConvention::UnitInterval);
        for i in 0..2 {
            assert!((b_unit[i] - b_tilde[i] / 2.0).abs() < 1e-18);
        }
    }

    #[test]
    fn soc_aggregate_basics() {
        assert_eq!(soc_aggregate(&[1.0, 1.0, 1.0], &[0.2, 0.5, 0.3]), 1.0);
        assert_eq!(soc_aggregate(&[0.0, 0.0], &[0.4, 0.6]), 0.0);
        assert_eq!(soc_aggregate(&[1.0, -1.0], &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn zone_vb_step_baseline_is_fixed_point() {
        let params = five_zone();
        let exo = summer_exo(5, 4);
        let vb = build_aggregate(&params, &exo, SozConvention::Centered).unwrap();
        let soz = vec![0.0; 5];
        let next = zone_vb_step(&soz, &vb.q_base[0], &vb.q_base[0], &vb.a_tilde, &vb.b_tilde);
        for v in next {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn aggregation_identity_via_eigen_relation() {
        // wᵀ·zone_step(soz, q) = α·soc + wᵀB̃(q − q_base) to 1e−12.
        let params = five_zone();
        let exo = summer_exo(5, 4);
        let vb = build_aggregate(&params, &exo, SozConvention::Centered).unwrap();
        let soz = vec![0.3, -0.2, 0.75, 0.1, -0.6];
        let q = vec![1000.0, 2500.0, 0.0, 4100.0, 3000.0];
        let next = zone_vb_step(&soz, &q, &vb.q_base[0], &vb.a_tilde, &vb.b_tilde);
        let lhs = soc_aggregate(&next, &vb.w);
        let dq: f64 = (0..5).map(|i| vb.wb[i] * (q[i] - vb.q_base[0][i])).sum();
        let rhs = vb.alpha * soc_aggregate(&soz, &vb.w) + dq;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn estimate_q_limits_table_values() {
        let params = five_zone();
        let (lo, hi) = estimate_q_limits(&params, 3);
        for k in 0..3 {
            for i in 0..5 {
                assert_eq!(lo[k][i], 0.0);
                // 1012 · 0.5 · (25 − 15) = 5060 W.
                assert!((hi[k][i] - 5060.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aggregate_eigen_quality_and_weights() {
        let params = five_zone();
        let exo = summer_exo(5, 8);
        let vb = build_aggregate(&params, &exo, SozConvention::Centered).unwrap();
        let sum: f64 = vb.w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(vb.w.iter().all(|&v| v >= 0.0));
        assert!(vb.alpha > 0.0 && vb.alpha < 1.0);
        let atw = vb.a_tilde.tr_matvec(&vb.w);
        for i in 0..5 {
            assert!((atw[i] - vb.alpha * vb.w[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn propagate_baseline_keeps_scaled_initial_state() {
        let params = five_zone();
        let exo = summer_exo(5, 24);
        let mut vb = build_aggregate(&params, &exo, SozConvention::Centered).unwrap();
        let q_realized = vb.q_base.clone();
        vb.set_betas(BetaAlgorithm::Tight, Some(&q_realized)).unwrap();
        let q_total: Vec<f64> = q_realized.iter().map(|r| r.iter().sum()).collect();
        let soc0 = 0.4;
        let soc_true: Vec<f64> = (0..=24).map(|k| soc0 * vb.alpha.powi(k)).collect();
        let bounds = propagate_soc_bounds(&vb, &q_total, soc0, &soc_true, BetaAlgorithm::Tight);
        for k in 0..=24 {
            assert!((bounds.soc_up[k] - soc_true[k]).abs() < 1e-12);
            assert!((bounds.soc_dn[k] - soc_true[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn vb_aggregate_toml_roundtrip() {
        let params = five_zone();
        let exo = summer_exo(5, 6);
        let vb = build_aggregate(&params, &exo, SozConvention::UnitInterval).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vb.toml");
        vb.save_toml(&path).unwrap();
        let loaded = VBAggregate::load_toml(&path).unwrap();
        assert_eq!(loaded.alpha, vb.alpha);
        assert_eq!(loaded.w, vb.w);
        assert_eq!(loaded.q_base, vb.q_base);
        assert_eq!(loaded.convention, vb.convention);
    }
}

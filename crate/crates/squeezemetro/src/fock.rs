//! Brute-force validation in a truncated two-mode number basis.
//!
//! States are kept as pure amplitude vectors. A loss or gain channel couples
//! the probe to a fresh vacuum ancilla mode (beam splitter or two-mode
//! squeezer) and keeps the ancilla in the vector instead of tracing it out;
//! expectations of observables on the signal modes are unchanged by that
//! choice, and the reduced density matrix is materialized only for purity
//! checks. Operator exponentials act on the state vector by a Taylor series
//! split into substeps so each partial sum converges without cancellation;
//! the series tolerance is 1e-12.
//!
//! Everything here is independent of the Gaussian machinery: moments come
//! from the diagonal number operators, sensitivities from finite
//! differences of the mean.

use num_complex::Complex64;

use crate::estimation::{Medium, SchemeSpec};
use crate::gaussian::{MomentOrder, MomentResult, PhotonObservable, ProbeConfig};
use crate::{Error, Result};

type C64 = Complex64;

/// Default per-mode cutoff (occupation 0..=cutoff).
pub const DEFAULT_CUTOFF: usize = 48;
/// Accepted runs must keep this much probability off the top level.
pub const TAIL_LIMIT: f64 = 1e-8;
const SERIES_TOL: f64 = 1e-12;
const MAX_TERMS: usize = 400;

enum PairCoupling {
    /// `p (a_i† a_j† - a_i a_j)`
    Squeezer,
    /// `p (a_i† a_j - a_i a_j†)`
    BeamSplitter,
}

/// Pure multimode state: modes `[a, b, ancillas…]`, row-major amplitudes
/// with the last mode varying fastest.
#[derive(Debug, Clone)]
pub struct FockState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl FockState {
    /// Coherent seed in mode a, vacuum in mode b.
    pub fn coherent_vacuum(seed: C64, cutoff: usize) -> Self {
        let dim = cutoff + 1;
        let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
        let mut amp = C64::new((-0.5 * seed.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            if n > 0 {
                amp *= seed / C64::new((n as f64).sqrt(), 0.0);
            }
            amps[n * dim] = amp;
        }
        Self {
            dims: vec![dim, dim],
            amps,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    /// Probability of finding any mode at its top level.
    pub fn tail_mass(&self) -> f64 {
        let mut tail = 0.0;
        for (idx, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut rest = idx;
            for &d in self.dims.iter().rev() {
                let n = rest % d;
                rest /= d;
                if n == d - 1 {
                    tail += p;
                    break;
                }
            }
        }
        tail
    }

    fn check_tail(&self, cutoff: usize) -> Result<()> {
        let mass = self.tail_mass();
        if mass > TAIL_LIMIT {
            return Err(Error::TailMass {
                mass,
                limit: TAIL_LIMIT,
                cutoff,
            });
        }
        Ok(())
    }

    /// `dst = p (raise - lower) src` for the chosen pair coupling.
    fn apply_generator(
        &self,
        src: &[C64],
        dst: &mut [C64],
        i: usize,
        j: usize,
        coupling: &PairCoupling,
        p: f64,
    ) {
        dst.fill(C64::new(0.0, 0.0));
        let (si, sj) = (self.stride(i), self.stride(j));
        let (di, dj) = (self.dims[i], self.dims[j]);
        let scale = C64::new(p, 0.0);
        for (idx, &amp) in src.iter().enumerate() {
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            let ni = (idx / si) % di;
            let nj = (idx / sj) % dj;
            match coupling {
                PairCoupling::Squeezer => {
                    // a_i† a_j†
                    if ni + 1 < di && nj + 1 < dj {
                        let w = (((ni + 1) * (nj + 1)) as f64).sqrt();
                        dst[idx + si + sj] += scale * amp * w;
                    }
                    // -a_i a_j
                    if ni > 0 && nj > 0 {
                        let w = ((ni * nj) as f64).sqrt();
                        dst[idx - si - sj] -= scale * amp * w;
                    }
                }
                PairCoupling::BeamSplitter => {
                    // a_i† a_j
                    if ni + 1 < di && nj > 0 {
                        let w = (((ni + 1) * nj) as f64).sqrt();
                        dst[idx + si - sj] += scale * amp * w;
                    }
                    // -a_i a_j†
                    if ni > 0 && nj + 1 < dj {
                        let w = ((ni * (nj + 1)) as f64).sqrt();
                        dst[idx - si + sj] -= scale * amp * w;
                    }
                }
            }
        }
    }

    /// In-place `exp(p G)` for the pair generator `G`, by Taylor series over
    /// enough substeps that each partial sum converges without cancellation
    /// (generator norm at most 1 per substep).
    fn apply_exp_pair(&mut self, i: usize, j: usize, coupling: PairCoupling, p: f64) {
        if p == 0.0 {
            return;
        }
        let bound = p.abs() * ((self.dims[i] * self.dims[j]) as f64).sqrt();
        let substeps = bound.ceil().max(1.0) as usize;
        let step = p / substeps as f64;
        let mut term = vec![C64::new(0.0, 0.0); self.amps.len()];
        let mut next = vec![C64::new(0.0, 0.0); self.amps.len()];
        for _ in 0..substeps {
            let mut acc = self.amps.clone();
            term.copy_from_slice(&self.amps);
            for k in 1..=MAX_TERMS {
                self.apply_generator(&term, &mut next, i, j, &coupling, step);
                let inv_k = 1.0 / k as f64;
                for (t, n) in term.iter_mut().zip(next.iter()) {
                    *t = *n * inv_k;
                }
                let mut term_norm = 0.0;
                for (a, t) in acc.iter_mut().zip(term.iter()) {
                    *a += *t;
                    term_norm += t.norm_sqr();
                }
                if term_norm.sqrt() < SERIES_TOL * 1e-2 {
                    break;
                }
            }
            self.amps = acc;
        }
    }

    /// Two-mode squeezer `exp(r (a†b† - ab))` on the signal modes.
    pub fn apply_two_mode_squeeze(&mut self, r: f64) {
        self.apply_exp_pair(0, 1, PairCoupling::Squeezer, r);
    }

    /// Beam-splitter loss on the probe: append a vacuum ancilla and rotate
    /// by `θ = arccos √(1-α)` so that `a_out = a √(1-α) + v √α`.
    pub fn apply_loss(&mut self, alpha: f64) -> Result<()> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::ParamOutOfRange {
                name: "alpha",
                value: alpha,
                constraint: "0 <= alpha < 1",
            });
        }
        let cutoff = self.dims[0] - 1;
        self.push_vacuum_mode(self.dims[0]);
        let theta = (1.0 - alpha).sqrt().acos();
        let anc = self.n_modes() - 1;
        self.apply_exp_pair(0, anc, PairCoupling::BeamSplitter, theta);
        self.check_tail(cutoff)
    }

    /// Quantum-limited amplifier on the probe: append a vacuum ancilla and
    /// squeeze the pair by `s = arccosh √G` so that `a_out = a √G + v† √(G-1)`.
    pub fn apply_gain(&mut self, gain: f64) -> Result<()> {
        if gain.is_nan() || gain < 1.0 {
            return Err(Error::ParamOutOfRange {
                name: "gain",
                value: gain,
                constraint: "G >= 1",
            });
        }
        let cutoff = self.dims[0] - 1;
        self.push_vacuum_mode(self.dims[0]);
        let s = gain.sqrt().acosh();
        let anc = self.n_modes() - 1;
        self.apply_exp_pair(0, anc, PairCoupling::Squeezer, s);
        self.check_tail(cutoff)
    }

    fn push_vacuum_mode(&mut self, dim: usize) {
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len() * dim];
        for (idx, &amp) in self.amps.iter().enumerate() {
            amps[idx * dim] = amp;
        }
        self.amps = amps;
        self.dims.push(dim);
    }

    /// Mean and variance of `w_a N_a + w_b N_b`, exact on the truncated
    /// space (the observable is diagonal in the number basis).
    pub fn moments(&self, obs: &PhotonObservable) -> MomentResult {
        let sa = self.stride(0);
        let sb = self.stride(1);
        let (da, db) = (self.dims[0], self.dims[1]);
        let mut mean = 0.0;
        let mut second = 0.0;
        for (idx, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let na = (idx / sa) % da;
            let nb = (idx / sb) % db;
            let value = obs.weight_a * na as f64 + obs.weight_b * nb as f64;
            mean += p * value;
            second += p * value * value;
        }
        MomentResult {
            mean,
            variance: second - mean * mean,
            order: MomentOrder::Exact,
        }
    }

    /// Marginal probability of the signal occupation `(n_a, n_b)`.
    pub fn probability(&self, na: usize, nb: usize) -> f64 {
        let sa = self.stride(0);
        let sb = self.stride(1);
        let base = na * sa + nb * sb;
        let anc: usize = self.dims[2..].iter().product::<usize>().max(1);
        (0..anc).map(|k| self.amps[base + k].norm_sqr()).sum()
    }

    /// Purity `tr(ρ_ab²)` of the reduced signal state. Uses the Gram matrix
    /// of the conditional signal vectors, one per ancilla basis state.
    pub fn signal_purity(&self) -> f64 {
        let anc: usize = self.dims[2..].iter().product::<usize>().max(1);
        let signal = self.amps.len() / anc;
        let mut purity = 0.0;
        for v in 0..anc {
            for w in 0..anc {
                let mut g = C64::new(0.0, 0.0);
                for s in 0..signal {
                    g += self.amps[s * anc + v].conj() * self.amps[s * anc + w];
                }
                purity += g.norm_sqr();
            }
        }
        purity
    }
}

/// Bright squeezed probe `S(r)|u, 0⟩` with a truncation-tail check.
pub fn build_tmbss(seed: C64, r: f64, cutoff: usize) -> Result<FockState> {
    let mut state = FockState::coherent_vacuum(seed, cutoff);
    state.check_tail(cutoff)?;
    state.apply_two_mode_squeeze(r);
    state.check_tail(cutoff)?;
    Ok(state)
}

/// Number-basis state at the detector for a full scheme.
pub fn scheme_state(scheme: &SchemeSpec, cfg: &ProbeConfig, cutoff: usize) -> Result<FockState> {
    let mut state = build_tmbss(cfg.seed, cfg.squeezing, cutoff)?;
    match scheme.medium {
        Medium::Loss(alpha) => state.apply_loss(alpha)?,
        Medium::Gain(g) => state.apply_gain(g)?,
    }
    if scheme.detection.uses_second_opa() {
        state.apply_two_mode_squeeze(-cfg.squeezing);
        state.check_tail(cutoff)?;
    }
    Ok(state)
}

/// Moments of the scheme observable evaluated on a number-basis state.
pub fn oracle_moments(state: &FockState, obs: &PhotonObservable) -> MomentResult {
    state.moments(obs)
}

/// Sensitivity by central differences of the oracle mean over the medium
/// parameter; `step` must lie in `[1e-4, 1e-2]`.
pub fn oracle_sensitivity(
    scheme: &SchemeSpec,
    cfg: &ProbeConfig,
    cutoff: usize,
    step: f64,
) -> Result<f64> {
    if !(1e-4..=1e-2).contains(&step) {
        return Err(Error::StepOutOfRange {
            step,
            min: 1e-4,
            max: 1e-2,
        });
    }
    let obs = scheme.detection.observable();
    let theta = scheme.medium.theta();
    let at = |t: f64| -> Result<f64> {
        let s = SchemeSpec::new(scheme.detection, scheme.medium.with_theta(t));
        Ok(scheme_state(&s, cfg, cutoff)?.moments(&obs).mean)
    };
    let mid = scheme_state(scheme, cfg, cutoff)?.moments(&obs);
    let slope = (at(theta + step)? - at(theta - step)?) / (2.0 * step);
    if slope.abs() < 1e-12 * mid.mean.abs() {
        return Err(Error::SingularOperatingPoint {
            derivative: slope.abs(),
            threshold: 1e-12 * mid.mean.abs(),
        });
    }
    Ok(mid.variance.sqrt() / slope.abs())
}

/// One point of the oracle-vs-Wick comparison.
#[derive(Debug, Clone, Copy)]
pub struct EquivalencePoint {
    pub seed: C64,
    pub squeezing: f64,
    pub medium: Medium,
}

/// Worst deviations over the comparison suite.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceSummary {
    pub points: usize,
    pub max_mean_dev: f64,
    pub max_var_dev: f64,
}

/// Comparison grid: every bound of the validated region (`|u| ≤ 2`,
/// `r ≤ 0.8`, `α ≤ 0.3`, `G ≤ 1.3`) is reached by some point, subject to
/// the tail-mass acceptance gate at the default cutoff (the jointly extreme
/// corners exceed it and are not accepted runs).
pub fn equivalence_points() -> Vec<EquivalencePoint> {
    let pt = |seed: C64, squeezing: f64, medium: Medium| EquivalencePoint {
        seed,
        squeezing,
        medium,
    };
    let re = |x: f64| C64::new(x, 0.0);
    vec![
        pt(re(1.0), 0.4, Medium::Loss(0.3)),
        pt(re(1.0), 0.8, Medium::Loss(0.3)),
        pt(re(2.0), 0.6, Medium::Loss(0.3)),
        pt(re(2.0), 0.6, Medium::Loss(0.1)),
        pt(re(1.0), 0.0, Medium::Loss(0.2)),
        pt(
            C64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
            0.5,
            Medium::Loss(0.2),
        ),
        pt(re(2.0), 0.5, Medium::Gain(1.3)),
        pt(re(2.0), 0.6, Medium::Gain(1.2)),
        pt(re(1.0), 0.8, Medium::Gain(1.1)),
        pt(re(1.0), 0.7, Medium::Gain(1.3)),
        pt(re(1.0), 0.0, Medium::Gain(1.2)),
    ]
}

/// Run the full oracle-vs-Wick suite: every point, both scheme states,
/// all three detections. Errors if any point is rejected by the tail gate.
pub fn equivalence_suite(cutoff: usize) -> Result<EquivalenceSummary> {
    use crate::estimation::Detection;
    use crate::gaussian;

    let mut summary = EquivalenceSummary {
        points: 0,
        max_mean_dev: 0.0,
        max_var_dev: 0.0,
    };
    for pt in equivalence_points() {
        let cfg = ProbeConfig::new(pt.seed, pt.squeezing);
        for det in [
            Detection::BalancedDifference,
            Detection::Su11Sum,
            Detection::Su11SinglePort,
        ] {
            let scheme = SchemeSpec::new(det, pt.medium);
            let state = scheme_state(&scheme, &cfg, cutoff)?;
            let obs = det.observable();
            let oracle = state.moments(&obs);
            let map = gaussian::scheme_map(&scheme, &cfg)?;
            let wick = gaussian::photon_moments(&map, &cfg, &obs, MomentOrder::Exact)?;
            summary.max_mean_dev = summary.max_mean_dev.max((oracle.mean - wick.mean).abs());
            summary.max_var_dev = summary
                .max_var_dev
                .max((oracle.variance - wick.variance).abs());
            summary.points += 1;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::Detection;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn vacuum_and_trivial_squeeze() {
        let st = build_tmbss(C64::new(0.0, 0.0), 0.0, 10).unwrap();
        assert_relative_eq!(st.probability(0, 0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(st.norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn squeezed_vacuum_is_pair_correlated() {
        let r = 0.5f64;
        let st = build_tmbss(C64::new(0.0, 0.0), r, 24).unwrap();
        // P(n, n) ∝ tanh^{2n} r; off-diagonal occupations vanish
        let ratio = st.probability(1, 1) / st.probability(0, 0);
        assert_relative_eq!(ratio, r.tanh().powi(2), epsilon = 1e-10);
        let ratio2 = st.probability(2, 2) / st.probability(1, 1);
        assert_relative_eq!(ratio2, r.tanh().powi(2), epsilon = 1e-10);
        assert_abs_diff_eq!(st.probability(1, 0), 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(st.probability(2, 1), 0.0, epsilon = 1e-20);
        // photon numbers perfectly correlated: Var(N_a - N_b) = 0
        let m = st.moments(&PhotonObservable::DIFFERENCE);
        assert_abs_diff_eq!(m.mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezer_conserves_number_difference() {
        let st = build_tmbss(C64::new(1.5, 0.0), 0.5, 40).unwrap();
        let m = st.moments(&PhotonObservable::DIFFERENCE);
        assert_abs_diff_eq!(m.mean, 2.25, epsilon = 1e-8);
        assert_abs_diff_eq!(m.variance, 2.25, epsilon = 1e-8);
    }

    #[test]
    fn loss_maps_coherent_to_coherent() {
        let mut st = FockState::coherent_vacuum(C64::new(1.0, 0.0), 20);
        st.apply_loss(0.36).unwrap();
        let m = st.moments(&PhotonObservable::PORT_A);
        assert_relative_eq!(m.mean, 0.64, epsilon = 1e-10);
        assert_relative_eq!(m.variance, 0.64, epsilon = 1e-10);
    }

    #[test]
    fn amplified_vacuum_is_thermal() {
        let mut st = FockState::coherent_vacuum(C64::new(0.0, 0.0), 24);
        st.apply_gain(1.5).unwrap();
        let m = st.moments(&PhotonObservable::PORT_A);
        assert_relative_eq!(m.mean, 0.5, epsilon = 1e-10);
        assert_relative_eq!(m.variance, 0.75, epsilon = 1e-10);
    }

    #[test]
    fn channel_identity_limits() {
        let mut st = build_tmbss(C64::new(1.0, 0.0), 0.4, 24).unwrap();
        let before = st.moments(&PhotonObservable::SUM);
        st.apply_loss(0.0).unwrap();
        let after = st.moments(&PhotonObservable::SUM);
        assert_relative_eq!(before.mean, after.mean, epsilon = 1e-12);
        let mut st = build_tmbss(C64::new(1.0, 0.0), 0.4, 24).unwrap();
        st.apply_gain(1.0).unwrap();
        let after = st.moments(&PhotonObservable::SUM);
        assert_relative_eq!(before.mean, after.mean, epsilon = 1e-12);
    }

    #[test]
    fn purity_drops_after_open_channels() {
        let mut st = build_tmbss(C64::new(1.0, 0.0), 0.4, 20).unwrap();
        assert_relative_eq!(st.signal_purity(), 1.0, epsilon = 1e-8);
        st.apply_loss(0.2).unwrap();
        assert!(st.signal_purity() < 1.0 - 1e-3);
        assert_relative_eq!(st.norm_sqr(), 1.0, epsilon = 1e-10);

        // amplification fattens the number tail, so give it headroom
        let mut st = build_tmbss(C64::new(1.0, 0.0), 0.4, 30).unwrap();
        st.apply_gain(1.2).unwrap();
        assert!(st.signal_purity() < 1.0 - 1e-3);
    }

    #[test]
    fn tail_gate_rejects_overfull_states() {
        // cutoff far too small for the seed
        assert!(matches!(
            build_tmbss(C64::new(3.0, 0.0), 0.0, 6),
            Err(Error::TailMass { .. })
        ));
        // amplifying near the top of the basis overflows
        let mut st = FockState::coherent_vacuum(C64::new(2.5, 0.0), 12);
        assert!(st.apply_gain(1.3).is_err());
    }

    #[test]
    fn oracle_matches_wick_at_a_spot_check() {
        use crate::gaussian;
        let cfg = ProbeConfig::real(2.0, 0.6);
        let scheme = SchemeSpec::new(Detection::BalancedDifference, Medium::Loss(0.1));
        let state = scheme_state(&scheme, &cfg, 40).unwrap();
        let oracle = state.moments(&PhotonObservable::DIFFERENCE);
        let map = gaussian::scheme_map(&scheme, &cfg).unwrap();
        let wick = gaussian::photon_moments(
            &map,
            &cfg,
            &PhotonObservable::DIFFERENCE,
            MomentOrder::Exact,
        )
        .unwrap();
        assert_abs_diff_eq!(oracle.mean, wick.mean, epsilon = 1e-6);
        assert_abs_diff_eq!(oracle.variance, wick.variance, epsilon = 1e-6);
    }

    #[test]
    fn oracle_sensitivity_agrees_with_exact_wick_engine() {
        use crate::gaussian;
        let cfg = ProbeConfig::real(1.5, 0.5);
        let scheme = SchemeSpec::new(Detection::BalancedDifference, Medium::Loss(0.15));
        let step = 1e-3;
        let oracle = oracle_sensitivity(&scheme, &cfg, 36, step).unwrap();

        // same finite difference on the exact Wick engine
        let obs = scheme.detection.observable();
        let wick_mean = |theta: f64| {
            let s = SchemeSpec::new(scheme.detection, scheme.medium.with_theta(theta));
            let map = gaussian::scheme_map(&s, &cfg).unwrap();
            gaussian::photon_moments(&map, &cfg, &obs, MomentOrder::Exact)
                .unwrap()
                .mean
        };
        let map = gaussian::scheme_map(&scheme, &cfg).unwrap();
        let var = gaussian::photon_moments(&map, &cfg, &obs, MomentOrder::Exact)
            .unwrap()
            .variance;
        let slope = (wick_mean(0.15 + step) - wick_mean(0.15 - step)) / (2.0 * step);
        let wick = var.sqrt() / slope.abs();
        assert_relative_eq!(oracle, wick, max_relative = 1e-7);

        assert!(matches!(
            oracle_sensitivity(&scheme, &cfg, 36, 1e-5),
            Err(Error::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn step_bounds_and_params() {
        let mut st = FockState::coherent_vacuum(C64::new(0.5, 0.0), 10);
        assert!(st.apply_loss(1.0).is_err());
        assert!(st.apply_gain(0.9).is_err());
    }

    #[test]
    fn leading_order_converges_to_oracle_with_brightness() {
        use crate::gaussian;
        let scheme = SchemeSpec::new(Detection::BalancedDifference, Medium::Loss(0.1));
        let rel_err = |u: f64| {
            let cfg = ProbeConfig::real(u, 0.4);
            let st = scheme_state(&scheme, &cfg, 40).unwrap();
            let oracle = st.moments(&PhotonObservable::DIFFERENCE);
            let map = gaussian::scheme_map(&scheme, &cfg).unwrap();
            let lead = gaussian::photon_moments(
                &map,
                &cfg,
                &PhotonObservable::DIFFERENCE,
                MomentOrder::LeadingOrder,
            )
            .unwrap();
            ((oracle.variance - lead.variance) / oracle.variance).abs()
        };
        // the truncation gap scales like 1/|u|^2
        assert!(rel_err(2.0) < 0.5 * rel_err(1.0));
    }
}

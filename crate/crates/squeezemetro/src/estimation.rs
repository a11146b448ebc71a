//! Measurement-scheme sensitivities and quantum-advantage ratios.
//!
//! The authoritative engine is error propagation on the leading-order
//! photon-number moments: `Δθ = ΔN / |d⟨N⟩/dθ|`, with an analytic mean
//! derivative per scheme. The printed closed-form expressions are kept as a
//! secondary engine; each carries a [`FidelityFlag`] recording whether it
//! agrees with the moment engine (two of them do not, see
//! [`closed_form_sensitivity`]).

use num_complex::Complex64;

use crate::gaussian::{self, MomentOrder, PhotonObservable, ProbeConfig};
use crate::{Error, Result};

/// Relative threshold on `|d⟨N⟩/dθ|` below which the operating point is
/// reported as singular.
const SINGULAR_SLOPE: f64 = 1e-12;

/// What is detected at the output ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    /// Intensity difference `N_a - N_b` right after the medium.
    BalancedDifference,
    /// Undo the squeezing with a second amplifier, then detect `N_a + N_b`.
    Su11Sum,
    /// Undo the squeezing, detect only the probe port `N_a`.
    Su11SinglePort,
}

impl Detection {
    pub fn observable(&self) -> PhotonObservable {
        match self {
            Detection::BalancedDifference => PhotonObservable::DIFFERENCE,
            Detection::Su11Sum => PhotonObservable::SUM,
            Detection::Su11SinglePort => PhotonObservable::PORT_A,
        }
    }

    /// The time-reversed variants insert the anti-squeezing amplifier.
    pub fn uses_second_opa(&self) -> bool {
        !matches!(self, Detection::BalancedDifference)
    }
}

/// The medium in the probe arm, carrying its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Medium {
    Loss(f64),
    Gain(f64),
}

impl Medium {
    pub fn theta(&self) -> f64 {
        match *self {
            Medium::Loss(a) => a,
            Medium::Gain(g) => g,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        match self {
            Medium::Loss(_) => Medium::Loss(theta),
            Medium::Gain(_) => Medium::Gain(theta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Medium::Loss(a) if !(0.0..1.0).contains(&a) => Err(Error::ParamOutOfRange {
                name: "alpha",
                value: a,
                constraint: "0 <= alpha < 1",
            }),
            Medium::Gain(g) if g.is_nan() || g < 1.0 => Err(Error::ParamOutOfRange {
                name: "gain",
                value: g,
                constraint: "G >= 1",
            }),
            _ => Ok(()),
        }
    }
}

/// A full measurement scheme: detection strategy plus medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec {
    pub detection: Detection,
    pub medium: Medium,
}

impl SchemeSpec {
    pub fn new(detection: Detection, medium: Medium) -> Self {
        Self { detection, medium }
    }
}

/// Which engine produced a sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityEngine {
    MomentPropagation,
    PrintedClosedForm,
}

/// Sensitivity of a scheme together with the coherent baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub delta_theta: f64,
    pub delta_theta_coherent: f64,
    /// `QA = Δθ_coh / Δθ`.
    pub quantum_advantage: f64,
    pub squeezing: f64,
    pub theta: f64,
    pub seed: Complex64,
    pub engine: SensitivityEngine,
}

/// Auxiliary quantities used by the printed closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormAux {
    /// `ζ = 1 - √(1-α)` (loss side).
    pub zeta: f64,
    /// `η = α/4 + √(1-α)` (loss side).
    pub eta: f64,
    /// `μ = √G + 1` (gain side).
    pub mu: f64,
    /// `ν = √G - 1` (gain side); `μν = G - 1`.
    pub nu: f64,
}

impl ClosedFormAux {
    pub fn for_loss(alpha: f64) -> Self {
        let keep = (1.0 - alpha).sqrt();
        Self {
            zeta: 1.0 - keep,
            eta: alpha / 4.0 + keep,
            mu: f64::NAN,
            nu: f64::NAN,
        }
    }

    pub fn for_gain(gain: f64) -> Self {
        Self {
            zeta: f64::NAN,
            eta: f64::NAN,
            mu: gain.sqrt() + 1.0,
            nu: gain.sqrt() - 1.0,
        }
    }

    /// Normalized intensity difference `G cosh^2 r - sinh^2 r` of the
    /// balanced gain scheme (the leading mean per seed photon).
    pub fn normalized_intensity_difference(gain: f64, r: f64) -> f64 {
        gain * r.cosh().powi(2) - r.sinh().powi(2)
    }
}

/// Analytic `d⟨N⟩/dθ` of the leading-order mean, per seed photon.
pub fn leading_mean_slope(scheme: &SchemeSpec, r: f64) -> f64 {
    let (c, s) = (r.cosh(), r.sinh());
    let (c2, s2, sc) = (c * c, s * s, s * c);
    match (scheme.detection, scheme.medium) {
        (Detection::BalancedDifference, Medium::Loss(_)) => -c2,
        (Detection::BalancedDifference, Medium::Gain(_)) => c2,
        (det, Medium::Loss(alpha)) => {
            let keep = (1.0 - alpha).sqrt();
            let d11 = keep * c2 - s2;
            let d21 = (1.0 - keep) * sc;
            match det {
                Detection::Su11Sum => (-d11 * c2 + d21 * sc) / keep,
                _ => -d11 * c2 / keep,
            }
        }
        (det, Medium::Gain(g)) => {
            let root = g.sqrt();
            let f11 = root * c2 - s2;
            let f21 = -(root - 1.0) * sc;
            match det {
                Detection::Su11Sum => (f11 * c2 - f21 * sc) / root,
                _ => f11 * c2 / root,
            }
        }
    }
}

/// Coherent-probe baseline with the same photons through the sample:
/// `√(1-α)/(|u| cosh r)` for loss, `√G/(|u| cosh r)` for gain.
pub fn coherent_baseline(cfg: &ProbeConfig, medium: &Medium) -> Result<f64> {
    if cfg.seed.norm_sqr() == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    medium.validate()?;
    let scale = cfg.seed.norm() * cfg.squeezing.cosh();
    Ok(match *medium {
        Medium::Loss(a) => (1.0 - a).sqrt() / scale,
        Medium::Gain(g) => g.sqrt() / scale,
    })
}

/// Scheme sensitivity by leading-order moment propagation.
pub fn sensitivity(scheme: &SchemeSpec, cfg: &ProbeConfig) -> Result<SensitivityReport> {
    let map = gaussian::scheme_map(scheme, cfg)?;
    let obs = scheme.detection.observable();
    let moments = gaussian::photon_moments(&map, cfg, &obs, MomentOrder::LeadingOrder)?;
    let slope = leading_mean_slope(scheme, cfg.squeezing) * cfg.seed_photons();
    let threshold = SINGULAR_SLOPE * moments.mean.abs();
    if slope.abs() <= threshold {
        return Err(Error::SingularOperatingPoint {
            derivative: slope.abs(),
            threshold,
        });
    }
    let delta_theta = moments.variance.sqrt() / slope.abs();
    let baseline = coherent_baseline(cfg, &scheme.medium)?;
    Ok(SensitivityReport {
        delta_theta,
        delta_theta_coherent: baseline,
        quantum_advantage: baseline / delta_theta,
        squeezing: cfg.squeezing,
        theta: scheme.medium.theta(),
        seed: cfg.seed,
        engine: SensitivityEngine::MomentPropagation,
    })
}

/// Whether a printed closed form reproduces the moment engine (and the
/// reference tables) or is flagged as discrepant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityFlag {
    TableConsistent,
    PrintedFormDiscrepant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormEval {
    pub delta_theta: f64,
    pub flag: FidelityFlag,
}

/// Evaluate the printed closed-form sensitivity for a scheme, verbatim.
///
/// Flags record known defects of the printed expressions:
/// the single-port loss form carries `4ζ² cosh²r sinh²r` where the moment
/// engine (and the reference tables) require coefficient 2, and the
/// sum-signal loss form has a negative radicand over most of the plotted
/// range (reported as [`Error::NegativeRadicand`]). The balanced forms and
/// the gain-side sum form agree with the moment engine; the balanced gain
/// form is evaluated with the dimensionless intensity difference
/// `I = G cosh²r - sinh²r`.
pub fn closed_form_sensitivity(scheme: &SchemeSpec, cfg: &ProbeConfig) -> Result<ClosedFormEval> {
    scheme.medium.validate()?;
    if cfg.seed.norm_sqr() == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    let u = cfg.seed.norm();
    let r = cfg.squeezing;
    let (c, s) = (r.cosh(), r.sinh());
    let (c2, s2) = (c * c, s * s);
    match (scheme.detection, scheme.medium) {
        (Detection::BalancedDifference, Medium::Loss(alpha)) => {
            let radicand = 1.0 + 2.0 * alpha * alpha * c2 * s2 - alpha * c2;
            if radicand < 0.0 {
                return Err(Error::NegativeRadicand { value: radicand });
            }
            Ok(ClosedFormEval {
                delta_theta: radicand.sqrt() / (u * c2),
                flag: FidelityFlag::TableConsistent,
            })
        }
        (Detection::Su11SinglePort, Medium::Loss(alpha)) => {
            let aux = ClosedFormAux::for_loss(alpha);
            let radicand = (1.0 - alpha) * (1.0 + 4.0 * aux.zeta * aux.zeta * c2 * s2);
            Ok(ClosedFormEval {
                delta_theta: radicand.sqrt() / (u * c2),
                flag: FidelityFlag::PrintedFormDiscrepant,
            })
        }
        (Detection::Su11Sum, Medium::Loss(alpha)) => {
            let aux = ClosedFormAux::for_loss(alpha);
            let keep = (1.0 - alpha).sqrt();
            let radicand = 4.0 - 4.0 * aux.zeta - 4.0 * alpha * c2
                + 2.0 * aux.zeta * (4.0 * r).cosh()
                - 2.0 * alpha * aux.eta * (4.0 * r).sinh().powi(2);
            if radicand < 0.0 {
                return Err(Error::NegativeRadicand { value: radicand });
            }
            let denom = 2.0 * c2 / keep * (2.0 - keep * (2.0 * r).cosh());
            Ok(ClosedFormEval {
                delta_theta: radicand.sqrt() / (u * denom.abs()),
                flag: FidelityFlag::PrintedFormDiscrepant,
            })
        }
        (Detection::BalancedDifference, Medium::Gain(g)) => {
            let i_d = ClosedFormAux::normalized_intensity_difference(g, r);
            let radicand = i_d * (2.0 * i_d - 1.0);
            if radicand < 0.0 {
                return Err(Error::NegativeRadicand { value: radicand });
            }
            Ok(ClosedFormEval {
                delta_theta: radicand.sqrt() / (u * c2),
                flag: FidelityFlag::TableConsistent,
            })
        }
        (Detection::Su11Sum, Medium::Gain(g)) => {
            let aux = ClosedFormAux::for_gain(g);
            let (mu, nu) = (aux.mu, aux.nu);
            let root = g.sqrt();
            let a = mu * (7.0 * g * root - 3.0 * g + 5.0 * root - 1.0)
                + 4.0 * (3.0 * root * mu - nu) * mu * nu * (2.0 * r).cosh()
                + 8.0 * mu * mu * nu * nu * (4.0 * r).cosh()
                + 4.0 * mu * nu.powi(3) * (6.0 * r).cosh()
                + nu.powi(4) * (8.0 * r).cosh();
            let radicand = g * a;
            if radicand < 0.0 {
                return Err(Error::NegativeRadicand { value: radicand });
            }
            let b = 4.0 * c2 * (1.0 + nu * (2.0 * r).cosh());
            Ok(ClosedFormEval {
                delta_theta: radicand.sqrt() / (u * b),
                flag: FidelityFlag::TableConsistent,
            })
        }
        (Detection::Su11SinglePort, Medium::Gain(_)) => Err(Error::NoClosedForm),
    }
}

/// Printed scaled-sensitivity ratio `Δα/Δα_coh` for balanced detection.
pub fn qa_ratio_bd_loss(cfg: &ProbeConfig, alpha: f64) -> Result<f64> {
    let r = cfg.squeezing;
    let (c2, s2) = (r.cosh().powi(2), r.sinh().powi(2));
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: alpha,
            constraint: "0 <= alpha < 1",
        });
    }
    let num = (1.0 + 2.0 * alpha * alpha * c2 * s2 - alpha * c2) / (1.0 - alpha);
    Ok(num.sqrt() / r.cosh())
}

/// Printed scaled-sensitivity ratio for the single-port time-reversed
/// scheme (discrepant coefficient, kept verbatim).
pub fn qa_ratio_su11_single_loss(cfg: &ProbeConfig, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: alpha,
            constraint: "0 <= alpha < 1",
        });
    }
    let r = cfg.squeezing;
    let (c2, s2) = (r.cosh().powi(2), r.sinh().powi(2));
    let zeta = 1.0 - (1.0 - alpha).sqrt();
    Ok((1.0 + 4.0 * zeta * zeta * c2 * s2).sqrt() / r.cosh())
}

/// Squeezing parameter where the sum-signal sensitivity diverges:
/// the root of `sinh^2 r = √(1-α) / (2(1-√(1-α)))`.
pub fn su11_sum_singularity(alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: alpha,
            constraint: "0 < alpha < 1",
        });
    }
    let keep = (1.0 - alpha).sqrt();
    let zeta = 1.0 - keep;
    Ok((keep / (2.0 * zeta)).sqrt().asinh())
}

/// Quantum advantage of the Cramér-Rao bound itself,
/// `QA_CRB = Δθ_coh √F`; the seed amplitude cancels.
pub fn qa_crb(medium: &Medium, r: f64) -> Result<f64> {
    medium.validate()?;
    let c2r = (2.0 * r).cosh();
    Ok(match *medium {
        Medium::Loss(a) => (c2r / (1.0 + a * (c2r - 1.0))).sqrt(),
        Medium::Gain(g) => (c2r / (g + (g - 1.0) * c2r)).sqrt(),
    })
}

/// Result of the operating-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOutcome {
    pub r_opt: f64,
    pub qa_opt: f64,
    /// False when the profile failed the unimodality check and the best
    /// coarse-grid point is returned instead of a refined optimum.
    pub refined: bool,
}

/// Number of coarse samples used to bracket the optimum.
const COARSE_GRID: usize = 64;
const GOLDEN_TOL: f64 = 1e-6;

/// Maximize the quantum advantage over `r` in `[r_lo, r_hi]`.
///
/// A coarse grid brackets the maximum and checks unimodality; golden-section
/// refinement then narrows the bracket below `1e-6`. Grid points where the
/// scheme is singular count as zero advantage.
pub fn optimize_r(
    scheme: &SchemeSpec,
    cfg: &ProbeConfig,
    r_lo: f64,
    r_hi: f64,
) -> Result<OptimizeOutcome> {
    if r_lo.is_nan() || r_hi.is_nan() || r_lo < 0.0 || r_hi <= r_lo {
        return Err(Error::ParamOutOfRange {
            name: "r_range",
            value: r_hi,
            constraint: "0 <= r_lo < r_hi",
        });
    }
    scheme.medium.validate()?;
    let qa_at = |r: f64| -> f64 {
        let probe = ProbeConfig::new(cfg.seed, r);
        sensitivity(scheme, &probe)
            .map(|rep| rep.quantum_advantage)
            .unwrap_or(0.0)
    };

    let mut best_i = 0;
    let mut values = Vec::with_capacity(COARSE_GRID);
    for i in 0..COARSE_GRID {
        let r = r_lo + (r_hi - r_lo) * i as f64 / (COARSE_GRID - 1) as f64;
        let v = qa_at(r);
        if v > values.get(best_i).copied().unwrap_or(f64::NEG_INFINITY) {
            best_i = i;
        }
        values.push(v);
    }
    let grid_r = |i: usize| r_lo + (r_hi - r_lo) * i as f64 / (COARSE_GRID - 1) as f64;

    // Unimodal: nondecreasing up to the max, nonincreasing after (with a
    // small tolerance for flat stretches).
    let tol = 1e-9 * values[best_i].abs().max(1.0);
    let unimodal = values[..=best_i].windows(2).all(|w| w[1] >= w[0] - tol)
        && values[best_i..].windows(2).all(|w| w[1] <= w[0] + tol);
    if !unimodal {
        return Ok(OptimizeOutcome {
            r_opt: grid_r(best_i),
            qa_opt: values[best_i],
            refined: false,
        });
    }

    let mut a = grid_r(best_i.saturating_sub(1));
    let mut b = grid_r((best_i + 1).min(COARSE_GRID - 1));
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = qa_at(x1);
    let mut f2 = qa_at(x2);
    while (b - a).abs() > GOLDEN_TOL {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = qa_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = qa_at(x2);
        }
    }
    let r_opt = 0.5 * (a + b);
    Ok(OptimizeOutcome {
        r_opt,
        qa_opt: qa_at(r_opt),
        refined: true,
    })
}

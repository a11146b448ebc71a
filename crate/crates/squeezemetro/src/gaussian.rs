//! Two-mode Gaussian states, channels, and photon-number moments.
//!
//! Everything here works in the complex operator basis `A = (a, b, a†, b†)`.
//! A state is the pair `(d, σ)` with displacement `d_m = ⟨A_m⟩` and
//! covariance `σ_mn = ⟨{ΔA_m, ΔA_n†}⟩`, so vacuum and coherent states have
//! `σ = I`. With `K = diag(1, 1, -1, -1)`, physical states satisfy
//! `|eig(Kσ)| ≥ 1`, with equality for pure states.
//!
//! Channels act on one mode by coupling it to a fresh vacuum ancilla and
//! tracing the ancilla out immediately, so the state stays two-mode. The
//! same transformations are tracked at the operator level by
//! [`BogoliubovMap`], which retains the ancilla columns; photon-number
//! moments come from Wick contractions of that map.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::estimation::{Medium, SchemeSpec};
use crate::{Error, Result};

type C64 = Complex64;
type Matrix6 = SMatrix<C64, 6, 6>;
type Vector6 = SVector<C64, 6>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Residual above which [`photon_moments`] rejects a map as unnormalized.
pub const COMMUTATOR_REJECT: f64 = 1e-9;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Which of the two signal modes a channel acts on. Mode `A` carries the
/// coherent seed and is the probe; mode `B` is the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

impl Mode {
    fn index(self) -> usize {
        match self {
            Mode::A => 0,
            Mode::B => 1,
        }
    }
}

/// Probe preparation: coherent seed `u` into mode A, vacuum into mode B,
/// then a two-mode squeezer of strength `squeezing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Coherent seed amplitude (dimensionless field units).
    pub seed: C64,
    /// Squeezing parameter, real and nonnegative.
    pub squeezing: f64,
}

impl ProbeConfig {
    pub fn new(seed: C64, squeezing: f64) -> Self {
        assert!(
            squeezing.is_finite() && squeezing >= 0.0,
            "squeezing parameter must be finite and nonnegative"
        );
        Self { seed, squeezing }
    }

    /// Convenience constructor for a real seed.
    pub fn real(seed: f64, squeezing: f64) -> Self {
        Self::new(re(seed), squeezing)
    }

    /// Mean photon number of the seed, `|u|^2`.
    pub fn seed_photons(&self) -> f64 {
        self.seed.norm_sqr()
    }

    /// True in the bright regime `|u|^2 > cosh^2 r`, where the
    /// leading-order moment expressions are trustworthy.
    pub fn is_bright(&self) -> bool {
        self.seed.norm_sqr() > self.squeezing.cosh().powi(2)
    }
}

/// Serializable dump of a [`GaussianState`] (`--dump-state`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDump {
    pub d_re: [f64; 4],
    pub d_im: [f64; 4],
    pub sigma_re: [[f64; 4]; 4],
    pub sigma_im: [[f64; 4]; 4],
}

/// Two-mode Gaussian state in the `(a, b, a†, b†)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub displacement: Vector4<C64>,
    pub covariance: Matrix4<C64>,
}

impl GaussianState {
    pub fn vacuum() -> Self {
        Self {
            displacement: Vector4::from_element(ZERO),
            covariance: Matrix4::identity(),
        }
    }

    /// Absolute values of the eigenvalues of `Kσ` (symplectic spectrum,
    /// two degenerate pairs). Computed from the Hermitian similarity
    /// `σ^{1/2} K σ^{1/2}`.
    pub fn symplectic_eigenvalues(&self) -> [f64; 4] {
        let herm = (self.covariance + self.covariance.adjoint()) * re(0.5);
        let eig = nalgebra::SymmetricEigen::new(herm);
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let mut root: Matrix4<C64> = Matrix4::zeros();
        for k in 0..4 {
            let col = eig.eigenvectors.column(k);
            for i in 0..4 {
                for j in 0..4 {
                    root[(i, j)] += col[i] * col[j].conj() * re(sqrt_vals[k]);
                }
            }
        }
        let core: Matrix4<C64> = root * kappa() * root;
        let core = (core + core.adjoint()) * re(0.5);
        let vals = nalgebra::SymmetricEigen::new(core).eigenvalues;
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = vals[i].abs();
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        self.symplectic_eigenvalues()[0]
    }

    fn covariance_magnitude(&self) -> f64 {
        let mut mag = 1.0f64;
        for i in 0..4 {
            for j in 0..4 {
                mag = mag.max(self.covariance[(i, j)].norm());
            }
        }
        mag
    }

    /// Physicality: every `|eig(Kσ)| ≥ 1 - tol`, with `tol` scaled by the
    /// covariance magnitude (the eigensolve carries an `O(ε‖σ‖)` error, so
    /// an unscaled bound is unattainable for strongly squeezed states).
    pub fn is_physical(&self, tol: f64) -> bool {
        self.min_symplectic_eigenvalue() >= 1.0 - tol * self.covariance_magnitude()
    }

    /// Purity: all symplectic eigenvalues equal 1 within the scaled `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        let scaled = tol * self.covariance_magnitude();
        self.symplectic_eigenvalues()
            .iter()
            .all(|v| (v - 1.0).abs() <= scaled)
    }

    /// Largest violation of the conjugation structure: `d[2..] = conj(d[..2])`,
    /// `σ` Hermitian, and the creation-creation block equal to the conjugate
    /// of the annihilation-annihilation block.
    pub fn conjugation_residual(&self) -> f64 {
        let d = &self.displacement;
        let s = &self.covariance;
        let mut res = (d[2] - d[0].conj()).norm().max((d[3] - d[1].conj()).norm());
        for i in 0..4 {
            for j in 0..4 {
                res = res.max((s[(i, j)] - s[(j, i)].conj()).norm());
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                res = res.max((s[(i + 2, j + 2)] - s[(i, j)].conj()).norm());
            }
        }
        res
    }

    pub fn dump(&self) -> StateDump {
        let mut d_re = [0.0; 4];
        let mut d_im = [0.0; 4];
        let mut sigma_re = [[0.0; 4]; 4];
        let mut sigma_im = [[0.0; 4]; 4];
        for i in 0..4 {
            d_re[i] = self.displacement[i].re;
            d_im[i] = self.displacement[i].im;
            for j in 0..4 {
                sigma_re[i][j] = self.covariance[(i, j)].re;
                sigma_im[i][j] = self.covariance[(i, j)].im;
            }
        }
        StateDump {
            d_re,
            d_im,
            sigma_re,
            sigma_im,
        }
    }
}

/// `K = diag(1, 1, -1, -1)`.
pub fn kappa() -> Matrix4<C64> {
    Matrix4::from_diagonal(&Vector4::new(ONE, ONE, -ONE, -ONE))
}

/// Coherent seed in mode A, vacuum in mode B: `d = (u, 0, u*, 0)`, `σ = I`.
pub fn coherent_vacuum_input(cfg: &ProbeConfig) -> GaussianState {
    GaussianState {
        displacement: Vector4::new(cfg.seed, ZERO, cfg.seed.conj(), ZERO),
        covariance: Matrix4::identity(),
    }
}

/// Apply the two-mode squeezer `a → a cosh r + b† sinh r`,
/// `b → b cosh r + a† sinh r`. Negative `r` undoes positive `r`.
pub fn two_mode_squeeze(state: &GaussianState, r: f64) -> GaussianState {
    let (c, s) = (re(r.cosh()), re(r.sinh()));
    let t = Matrix4::new(
        c, ZERO, ZERO, s, //
        ZERO, c, s, ZERO, //
        ZERO, s, c, ZERO, //
        s, ZERO, ZERO, c,
    );
    GaussianState {
        displacement: t * state.displacement,
        covariance: t * state.covariance * t.adjoint(),
    }
}

fn one_mode_ancilla_channel(state: &GaussianState, t6: &Matrix6) -> GaussianState {
    // Embed (a, b, a†, b†) into (a, b, v, a†, b†, v†) with a vacuum ancilla.
    const P: [usize; 4] = [0, 1, 3, 4];
    let mut d6 = Vector6::from_element(ZERO);
    let mut s6 = Matrix6::identity();
    for i in 0..4 {
        d6[P[i]] = state.displacement[i];
        for j in 0..4 {
            s6[(P[i], P[j])] = state.covariance[(i, j)];
        }
    }
    let d6 = t6 * d6;
    let s6 = t6 * s6 * t6.adjoint();
    let mut d = Vector4::from_element(ZERO);
    let mut s = Matrix4::zeros();
    for i in 0..4 {
        d[i] = d6[P[i]];
        for j in 0..4 {
            s[(i, j)] = s6[(P[i], P[j])];
        }
    }
    GaussianState {
        displacement: d,
        covariance: s,
    }
}

/// Beam-splitter loss on one mode: `a_out = a √(1-α) + v √α` with a vacuum
/// ancilla `v` that is traced out.
pub fn loss_channel(state: &GaussianState, mode: Mode, alpha: f64) -> Result<GaussianState> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: alpha,
            constraint: "0 <= alpha < 1",
        });
    }
    let (tk, ta) = (re((1.0 - alpha).sqrt()), re(alpha.sqrt()));
    let m = mode.index();
    let mut t = Matrix6::identity();
    t[(m, m)] = tk;
    t[(m, 2)] = ta;
    t[(2, m)] = -ta;
    t[(2, 2)] = tk;
    t[(m + 3, m + 3)] = tk;
    t[(m + 3, 5)] = ta;
    t[(5, m + 3)] = -ta;
    t[(5, 5)] = tk;
    Ok(one_mode_ancilla_channel(state, &t))
}

/// Quantum-limited amplifier on one mode: `a_out = a √G + v† √(G-1)` with a
/// vacuum ancilla `v` that is traced out.
pub fn gain_channel(state: &GaussianState, mode: Mode, gain: f64) -> Result<GaussianState> {
    if gain.is_nan() || gain < 1.0 {
        return Err(Error::ParamOutOfRange {
            name: "gain",
            value: gain,
            constraint: "G >= 1",
        });
    }
    let (ck, sk) = (re(gain.sqrt()), re((gain - 1.0).sqrt()));
    let m = mode.index();
    let mut t = Matrix6::identity();
    t[(m, m)] = ck;
    t[(m, 5)] = sk;
    t[(2, m + 3)] = sk;
    t[(2, 2)] = ck;
    t[(m + 3, m + 3)] = ck;
    t[(m + 3, 2)] = sk;
    t[(5, m)] = sk;
    t[(5, 5)] = ck;
    Ok(one_mode_ancilla_channel(state, &t))
}

/// Bright squeezed probe after the medium: squeezer then loss on mode A.
pub fn tmbss_through_loss(cfg: &ProbeConfig, alpha: f64) -> Result<GaussianState> {
    let state = two_mode_squeeze(&coherent_vacuum_input(cfg), cfg.squeezing);
    loss_channel(&state, Mode::A, alpha)
}

/// Bright squeezed probe after an amplifying medium on mode A.
pub fn tmbss_through_gain(cfg: &ProbeConfig, gain: f64) -> Result<GaussianState> {
    let state = two_mode_squeeze(&coherent_vacuum_input(cfg), cfg.squeezing);
    gain_channel(&state, Mode::A, gain)
}

/// Weighted photon-number observable `w_a N_a + w_b N_b` on the outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonObservable {
    pub weight_a: f64,
    pub weight_b: f64,
}

impl PhotonObservable {
    /// Intensity difference `N_a - N_b` (balanced photodetection).
    pub const DIFFERENCE: Self = Self {
        weight_a: 1.0,
        weight_b: -1.0,
    };
    /// Intensity sum `N_a + N_b`.
    pub const SUM: Self = Self {
        weight_a: 1.0,
        weight_b: 1.0,
    };
    /// Single-port signal `N_a`.
    pub const PORT_A: Self = Self {
        weight_a: 1.0,
        weight_b: 0.0,
    };
}

/// Whether moments are exact or truncated at leading order in `|u|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    Exact,
    LeadingOrder,
}

/// Mean and variance of a photon-number observable.
///
/// The exact variance exceeds the leading-order one by a seed-independent
/// amount bounded by `O(cosh^4 r)`; the gap shrinks as `1/|u|^2` relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResult {
    pub mean: f64,
    pub variance: f64,
    pub order: MomentOrder,
}

/// Linear map from input-mode operators to the two output modes.
///
/// Each output mode `m` is `Σ_k ann[m][k] ξ_k + cre[m][k] ξ_k†`, where
/// `ξ_0 = a_in`, `ξ_1 = b_in`, and later columns are the vacuum ancillas
/// appended by loss/gain stages. Free evolution preserves the bosonic
/// commutators, so `Σ|ann|^2 - Σ|cre|^2 = 1` per mode and the two output
/// modes commute; [`commutator_residual`](Self::commutator_residual)
/// measures the violation.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovMap {
    ann: [Vec<C64>; 2],
    cre: [Vec<C64>; 2],
}

impl BogoliubovMap {
    pub fn identity() -> Self {
        Self {
            ann: [vec![ONE, ZERO], vec![ZERO, ONE]],
            cre: [vec![ZERO, ZERO], vec![ZERO, ZERO]],
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.ann[0].len()
    }

    pub fn annihilation_coeffs(&self, mode: Mode) -> &[C64] {
        &self.ann[mode.index()]
    }

    pub fn creation_coeffs(&self, mode: Mode) -> &[C64] {
        &self.cre[mode.index()]
    }

    /// Compose with a two-mode squeezer on the outputs.
    pub fn two_mode_squeeze(&self, r: f64) -> Self {
        let (c, s) = (re(r.cosh()), re(r.sinh()));
        let n = self.n_inputs();
        let mut out = Self {
            ann: [vec![ZERO; n], vec![ZERO; n]],
            cre: [vec![ZERO; n], vec![ZERO; n]],
        };
        for k in 0..n {
            // a' = c a + s b†, b' = c b + s a†
            out.ann[0][k] = c * self.ann[0][k] + s * self.cre[1][k].conj();
            out.cre[0][k] = c * self.cre[0][k] + s * self.ann[1][k].conj();
            out.ann[1][k] = c * self.ann[1][k] + s * self.cre[0][k].conj();
            out.cre[1][k] = c * self.cre[1][k] + s * self.ann[0][k].conj();
        }
        out
    }

    /// Compose with beam-splitter loss on one output mode, appending the
    /// ancilla column.
    pub fn loss(&self, mode: Mode, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::ParamOutOfRange {
                name: "alpha",
                value: alpha,
                constraint: "0 <= alpha < 1",
            });
        }
        let mut out = self.clone();
        let m = mode.index();
        let keep = re((1.0 - alpha).sqrt());
        for k in 0..self.n_inputs() {
            out.ann[m][k] *= keep;
            out.cre[m][k] *= keep;
        }
        for i in 0..2 {
            out.ann[i].push(if i == m { re(alpha.sqrt()) } else { ZERO });
            out.cre[i].push(ZERO);
        }
        Ok(out)
    }

    /// Compose with a quantum-limited amplifier on one output mode.
    pub fn gain(&self, mode: Mode, gain: f64) -> Result<Self> {
        if gain.is_nan() || gain < 1.0 {
            return Err(Error::ParamOutOfRange {
                name: "gain",
                value: gain,
                constraint: "G >= 1",
            });
        }
        let mut out = self.clone();
        let m = mode.index();
        let keep = re(gain.sqrt());
        for k in 0..self.n_inputs() {
            out.ann[m][k] *= keep;
            out.cre[m][k] *= keep;
        }
        for i in 0..2 {
            out.ann[i].push(ZERO);
            out.cre[i].push(if i == m {
                re((gain - 1.0).sqrt())
            } else {
                ZERO
            });
        }
        Ok(out)
    }

    /// Largest commutator violation, scaled by the coefficient magnitude:
    /// `|[m, m†] - 1|`, `|[a, b]|`, and `|[a, b†]|` over
    /// `max(1, Σ|ann|^2 + Σ|cre|^2)`.
    pub fn commutator_residual(&self) -> f64 {
        let mut scale: f64 = 1.0;
        for m in 0..2 {
            let s: f64 = self.ann[m].iter().map(|c| c.norm_sqr()).sum::<f64>()
                + self.cre[m].iter().map(|c| c.norm_sqr()).sum::<f64>();
            scale = scale.max(s);
        }
        let mut worst: f64 = 0.0;
        for m in 0..2 {
            let norm: f64 = self.ann[m].iter().map(|c| c.norm_sqr()).sum::<f64>()
                - self.cre[m].iter().map(|c| c.norm_sqr()).sum::<f64>();
            worst = worst.max((norm - 1.0).abs());
        }
        let mut cross = ZERO; // [a_out, b_out]
        let mut cross_dag = ZERO; // [a_out, b_out†]
        for k in 0..self.n_inputs() {
            cross += self.ann[0][k] * self.cre[1][k] - self.cre[0][k] * self.ann[1][k];
            cross_dag +=
                self.ann[0][k] * self.ann[1][k].conj() - self.cre[0][k] * self.cre[1][k].conj();
        }
        worst = worst.max(cross.norm()).max(cross_dag.norm());
        worst / scale
    }
}

/// Operator map for a full measurement scheme: squeezer, medium, and (for
/// the time-reversed schemes) the undoing squeezer.
pub fn scheme_map(scheme: &SchemeSpec, cfg: &ProbeConfig) -> Result<BogoliubovMap> {
    let map = BogoliubovMap::identity().two_mode_squeeze(cfg.squeezing);
    let map = match scheme.medium {
        Medium::Loss(alpha) => map.loss(Mode::A, alpha)?,
        Medium::Gain(g) => map.gain(Mode::A, g)?,
    };
    Ok(if scheme.detection.uses_second_opa() {
        map.two_mode_squeeze(-cfg.squeezing)
    } else {
        map
    })
}

/// Mean and variance of `w_a N_a + w_b N_b` for inputs
/// `coherent(u) ⊗ vacuum ⊗ vacuum ancillas`.
///
/// Writing each output as `μ_m + δ_m` with `μ_m = ann[m][0] u + cre[m][0] u*`
/// and `δ_m` a zero-mean Gaussian fluctuation, Wick's theorem reduces the
/// variance to pair contractions of `δ`. The `LeadingOrder` mode keeps only
/// the `O(|u|^2)` part (the displacement-fluctuation cross terms), which is
/// what error propagation in the bright regime uses.
pub fn photon_moments(
    map: &BogoliubovMap,
    cfg: &ProbeConfig,
    obs: &PhotonObservable,
    order: MomentOrder,
) -> Result<MomentResult> {
    let residual = map.commutator_residual();
    if residual > COMMUTATOR_REJECT {
        return Err(Error::UnnormalizedMap { residual });
    }
    let u = cfg.seed;
    let n = map.n_inputs();
    let w = [obs.weight_a, obs.weight_b];

    let mu = [
        map.ann[0][0] * u + map.cre[0][0] * u.conj(),
        map.ann[1][0] * u + map.cre[1][0] * u.conj(),
    ];

    // Vacuum contractions of the fluctuation operators.
    let mut dd = [[ZERO; 2]; 2]; // <δ_i δ_j>
    let mut ddg = [[ZERO; 2]; 2]; // <δ_i δ_j†>
    let mut dgd = [[ZERO; 2]; 2]; // <δ_i† δ_j>
    let mut dgdg = [[ZERO; 2]; 2]; // <δ_i† δ_j†>
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..n {
                dd[i][j] += map.ann[i][k] * map.cre[j][k];
                ddg[i][j] += map.ann[i][k] * map.ann[j][k].conj();
                dgd[i][j] += map.cre[i][k].conj() * map.cre[j][k];
                dgdg[i][j] += map.cre[i][k].conj() * map.ann[j][k].conj();
            }
        }
    }

    let mut mean = 0.0;
    for i in 0..2 {
        mean += w[i] * mu[i].norm_sqr();
        if order == MomentOrder::Exact {
            mean += w[i] * map.cre[i].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }

    let mut variance = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            let linear = mu[i].conj() * mu[j].conj() * dd[i][j]
                + mu[i].conj() * mu[j] * ddg[i][j]
                + mu[i] * mu[j].conj() * dgd[i][j]
                + mu[i] * mu[j] * dgdg[i][j];
            let mut term = linear;
            if order == MomentOrder::Exact {
                term += dgdg[i][j] * dd[i][j] + dgd[i][j] * ddg[i][j];
            }
            variance += re(w[i] * w[j]) * term;
        }
    }

    Ok(MomentResult {
        mean,
        variance: variance.re,
        order,
    })
}

/// Photons sent through the medium: exact `⟨N_a⟩` right after the squeezer,
/// `|u|^2 cosh^2 r + sinh^2 r`.
pub fn probe_photon_number(cfg: &ProbeConfig) -> f64 {
    let map = BogoliubovMap::identity().two_mode_squeeze(cfg.squeezing);
    photon_moments(&map, cfg, &PhotonObservable::PORT_A, MomentOrder::Exact)
        .expect("squeezer map is normalized")
        .mean
}

//! Slow-time Bogoliubov coefficients rho_m^(n)(tau) of the resonantly
//! vibrating cavity: closed-form evaluation, batch tables, the independent
//! ODE oracle and the unitarity/recurrence identity checks.
//!
//! Index conventions: the upper index n >= 1 labels the final mode, the
//! signed lower index m != 0 labels initial-mode amplitudes (negative m
//! are the counter-rotating components). Entries vanish unless
//! n = m (mod p); the zero-frequency slot rho_0 is identically absent.
//!
//! The closed form depends only on x = n/p and y = m/p:
//!
//! ```text
//! rho_m^(n) = Gamma(1+x) (sigma kappa)^(x-y) lambda^(x+y)
//!             / [Gamma(1+y) Gamma(1+x-y)] * F(x, -y; 1+x-y; kappa^2)
//! ```
//!
//! with the x - y < 0 side obtained from the c -> non-positive-integer
//! limit of F/Gamma(c). Both branches are evaluated in log space with
//! explicit sign tracking so that deep-tail entries neither overflow nor
//! lose their phase.

mod ode;
mod identities;

pub use identities::{recurrence_residuals, unitarity_residuals, RecurrenceResiduals, UnitarityResiduals};
pub use ode::rho_ode_oracle;

use crate::error::{Error, Result};
use crate::specfun::{hyp2f1_inner, ln_gamma_pos, ln_gamma_signed};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

/// Resonance configuration: the wall vibrates at p times the fundamental
/// frequency with detuning ratio gamma = delta/epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityConfig {
    p: u32,
    gamma: f64,
}

impl CavityConfig {
    pub fn new(p: u32, gamma: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::Input("resonance order p must be >= 1".into()));
        }
        if !gamma.is_finite() {
            return Err(Error::Input(format!("gamma must be finite, got {gamma}")));
        }
        Ok(CavityConfig { p, gamma })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// sigma = (-1)^p
    pub fn sigma(&self) -> f64 {
        if self.p % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

// sinh overflows past ~710; the kinematics saturate far earlier.
const MAX_SLOW_ARG: f64 = 690.0;

/// The universal slow-time kinematic bundle every closed form consumes.
///
/// `kappa_tilde` and `beta` are carried exactly from the hyperbolic (or
/// trigonometric) functions rather than recomputed as sqrt(1 - kappa^2),
/// which underflows within a few slow-time units of saturation. `theta`
/// is the continuously unwound phase of lambda = beta + i gamma kappa; for
/// |gamma| > 1 lambda winds around the unit circle and fractional powers
/// must follow the accumulated phase, not the principal branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaState {
    pub tau: f64,
    pub p: u32,
    pub gamma: f64,
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub beta: f64,
    pub theta: f64,
    /// S = sinh(a p tau)/a, analytically continued across |gamma| = 1.
    pub s: f64,
}

impl KappaState {
    /// State at slow time tau >= 0.
    pub fn at_tau(config: &CavityConfig, tau: f64) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::Input(format!("tau must be >= 0, got {tau}")));
        }
        let g = config.gamma;
        let p = config.p;
        let disc = (1.0 - g) * (1.0 + g); // 1 - gamma^2
        if disc.abs() < 1e-12 {
            // |gamma| = 1: removable degeneracy, S = p tau exactly
            let s = p as f64 * tau;
            let r = s.hypot(1.0);
            let kappa = s / r;
            let kappa_tilde = 1.0 / r;
            // beta = sqrt(1 - kappa^2) here since gamma^2 = 1
            let beta = kappa_tilde;
            let theta = (g * kappa).asin();
            return Ok(KappaState {
                tau,
                p,
                gamma: g,
                kappa,
                kappa_tilde,
                beta,
                theta,
                s,
            });
        }
        if disc > 0.0 {
            let a = disc.sqrt();
            let arg = a * p as f64 * tau;
            if arg > MAX_SLOW_ARG {
                return Err(Error::Input(format!(
                    "slow-time argument a*p*tau = {arg:.1} too large (kappa saturates the f64 range)"
                )));
            }
            let s = arg.sinh() / a;
            let c = arg.cosh();
            let r = s.hypot(1.0);
            let kappa = s / r;
            let kappa_tilde = 1.0 / r;
            // beta = cosh(a p tau) / sqrt(1 + S^2), always positive for |gamma| < 1
            let beta = (c / r).min(1.0);
            let theta = (g * kappa).asin();
            Ok(KappaState {
                tau,
                p,
                gamma: g,
                kappa,
                kappa_tilde,
                beta,
                theta,
                s,
            })
        } else {
            // |gamma| > 1: trigonometric regime, kappa oscillates in [-1/|g|, 1/|g|]
            let at = (-disc).sqrt();
            let x = at * p as f64 * tau;
            let winding = (x / (2.0 * PI) + 0.5).floor();
            let xr = x - 2.0 * PI * winding;
            let sx = xr.sin();
            let cx = xr.cos();
            let root = (at * at + sx * sx).sqrt();
            let kappa = sx / root;
            let kappa_tilde = at / root;
            let beta = at * cx / root;
            let theta = (g * kappa).atan2(beta) + 2.0 * PI * winding * g.signum();
            Ok(KappaState {
                tau,
                p,
                gamma: g,
                kappa,
                kappa_tilde,
                beta,
                theta,
                s: sx / at,
            })
        }
    }

    /// State at a prescribed kappa (the first slow time reaching it).
    ///
    /// For |gamma| <= 1 this requires kappa in [0, 1); for |gamma| > 1,
    /// |kappa| <= 1/|gamma| and the principal rising branch is used for
    /// kappa >= 0 (negative kappa resolves to the first crossing after the
    /// turning point).
    pub fn at_kappa(config: &CavityConfig, kappa: f64) -> Result<Self> {
        let g = config.gamma;
        let p = config.p as f64;
        if kappa.abs() >= 1.0 {
            return Err(Error::Domain(format!("|kappa| must be < 1, got {kappa}")));
        }
        let disc = (1.0 - g) * (1.0 + g);
        if disc.abs() < 1e-12 || disc > 0.0 {
            if kappa < 0.0 {
                return Err(Error::Domain(format!(
                    "kappa = {kappa} < 0 is unreachable for |gamma| <= 1"
                )));
            }
            let kappa_tilde = ((1.0 - kappa) * (1.0 + kappa)).sqrt();
            let s = kappa / kappa_tilde;
            let tau = if disc.abs() < 1e-12 {
                s / p
            } else {
                let a = disc.sqrt();
                (a * s).asinh() / (a * p)
            };
            // construct fields directly so that kappa is reproduced exactly
            let beta = ((1.0 - g * kappa) * (1.0 + g * kappa)).sqrt();
            let theta = (g * kappa).asin();
            Ok(KappaState {
                tau,
                p: config.p,
                gamma: g,
                kappa,
                kappa_tilde,
                beta,
                theta,
                s,
            })
        } else {
            let at = (-disc).sqrt();
            let bound = 1.0 / g.abs();
            if kappa.abs() > bound + 1e-14 {
                return Err(Error::Domain(format!(
                    "|kappa| <= 1/|gamma| = {bound} required in the detuned regime, got {kappa}"
                )));
            }
            let kt = ((1.0 - kappa) * (1.0 + kappa)).sqrt();
            let s = kappa / kt;
            let arg = (at * s).clamp(-1.0, 1.0).asin();
            let x = if kappa >= 0.0 { arg } else { PI - arg };
            Self::at_tau(config, x / (at * p))
        }
    }

    /// lambda = beta + i gamma kappa (unit modulus).
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.beta, self.gamma * self.kappa)
    }

    /// lambda^w along the unwound phase.
    pub fn lambda_pow(&self, w: f64) -> Complex64 {
        Complex64::from_polar(1.0, w * self.theta)
    }

    /// sqrt(1 - gamma^2) for |gamma| <= 1, sqrt(gamma^2 - 1) otherwise.
    pub fn a_param(&self) -> f64 {
        ((1.0 - self.gamma) * (1.0 + self.gamma)).abs().sqrt()
    }

    pub fn config(&self) -> CavityConfig {
        CavityConfig {
            p: self.p,
            gamma: self.gamma,
        }
    }
}

/// Closed-form coefficient rho_m^(n)(tau); exact zero off the selection
/// rule n = m (mod p) and on the Gamma poles of the prefactor.
pub fn rho_closed(n: u32, m: i64, state: &KappaState) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Input("upper index n must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::Input("lower index m must be non-zero".into()));
    }
    let p = state.p as i64;
    if (n as i64 - m).rem_euclid(p) != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let kappa = state.kappa;
    if kappa == 0.0 {
        let v = if m == n as i64 { 1.0 } else { 0.0 };
        return Ok(Complex64::new(v, 0.0));
    }
    let sigma = state.config().sigma();
    let x = n as f64 / p as f64;
    let y = m as f64 / p as f64;
    let d = (n as i64 - m) / p;
    let z = kappa * kappa;
    let w = state.kappa_tilde * state.kappa_tilde;
    let ln_w = 2.0 * state.kappa_tilde.ln();
    let ln_kap = kappa.abs().ln();
    let kap_sign = if kappa >= 0.0 { 1.0 } else { -1.0 };

    let (ln_mag, sign) = if d >= 0 {
        // Gamma(1+y) pole: negative-integer y (the j = 0 residue class with
        // negative lower index) gives an exact zero.
        if y < 0.0 && (y - y.round()).abs() < 1e-12 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let f = hyp2f1_inner(x, -y, 1.0 + d as f64, z, w, ln_w)?;
        if f == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (lg1y, s1y) = ln_gamma_signed(1.0 + y)?;
        let ln_mag =
            ln_gamma_pos(1.0 + x) - lg1y - ln_gamma_pos(1.0 + d as f64) + d as f64 * ln_kap + f.abs().ln();
        let sign = s1y
            * f.signum()
            * sigma.powi(d as i32)
            * kap_sign.powi(d as i32);
        (ln_mag, sign)
    } else {
        let e = -d;
        let f = hyp2f1_inner(y, -x, 1.0 + e as f64, z, w, ln_w)?;
        if f == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let ln_mag =
            ln_gamma_pos(y) - ln_gamma_pos(x) - ln_gamma_pos(e as f64 + 1.0) + e as f64 * ln_kap + f.abs().ln();
        let sign = (-sigma).powi(e as i32) * f.signum() * kap_sign.powi(e as i32);
        (ln_mag, sign)
    };
    Ok(sign * ln_mag.exp() * state.lambda_pow(x + y))
}

/// kappa -> 1 limit of rho_m^(n) (requires |gamma| <= 1 so the limit
/// exists): sinc(pi y) prefactor times the (a + i gamma)^(x+y) phase.
pub fn rho_asymptotic(n: u32, m: i64, config: &CavityConfig) -> Result<Complex64> {
    if config.gamma.abs() > 1.0 {
        return Err(Error::Regime(
            "the kappa -> 1 limit requires |gamma| <= 1".into(),
        ));
    }
    if n == 0 || m == 0 {
        return Err(Error::Input("indices must satisfy n >= 1, m != 0".into()));
    }
    let p = config.p as i64;
    if (n as i64 - m).rem_euclid(p) != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let x = n as f64 / p as f64;
    let y = m as f64 / p as f64;
    let sinc = if (y - y.round()).abs() < 1e-12 {
        0.0
    } else {
        (PI * y).sin() / (PI * y)
    };
    let phi = config.gamma.asin();
    let phase = Complex64::from_polar(1.0, phi * (x + y));
    let sig_pow = config.sigma().powi((x - y).round() as i32);
    Ok(sinc * sig_pow * phase)
}

/// Finite table of coefficients with the mod-p selection rule built in.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    config: CavityConfig,
    state: KappaState,
    entries: BTreeMap<(u32, i64), Complex64>,
    max_m: i64,
    max_n: u32,
    tail_bound: f64,
}

/// Hard cap on the adaptive upper-index cutoff.
pub const TABLE_HARD_CAP: u32 = 100_000;
// Largest acceptable magnitude ratio for the geometric tail estimate;
// beyond this the bound t/(1 - r) is no longer meaningful.
const TAIL_RATIO_CAP: f64 = 0.9999;

impl CoeffTable {
    pub fn config(&self) -> &CavityConfig {
        &self.config
    }

    pub fn state(&self) -> &KappaState {
        &self.state
    }

    /// Entry lookup; indices outside the stored window return zero, like
    /// entries off the selection rule.
    pub fn get(&self, n: u32, m: i64) -> Complex64 {
        *self
            .entries
            .get(&(n, m))
            .unwrap_or(&Complex64::new(0.0, 0.0))
    }

    pub fn contains(&self, n: u32, m: i64) -> bool {
        self.entries.contains_key(&(n, m))
    }

    pub fn max_m(&self) -> i64 {
        self.max_m
    }

    pub fn max_n(&self) -> u32 {
        self.max_n
    }

    /// Estimated magnitude of the first omitted entries.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, i64), &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV export: comment header carrying (p, gamma, tau, kappa), then
    /// one `n,m,re,im` row per stored entry in (n, m) order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# p = {}", self.config.p)?;
        writeln!(out, "# gamma = {:.17e}", self.config.gamma)?;
        writeln!(out, "# tau = {:.17e}", self.state.tau)?;
        writeln!(out, "# kappa = {:.17e}", self.state.kappa)?;
        writeln!(out, "# tail_bound = {:.17e}", self.tail_bound)?;
        writeln!(out, "n,m,re,im")?;
        for ((n, m), v) in &self.entries {
            writeln!(out, "{},{},{:.16e},{:.16e}", n, m, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Batch-evaluate the closed form for all |m| <= max_m, raising the upper
/// index per column until the magnitudes fall below `tol` with a usable
/// geometric ratio. The recorded tail bound is last/(1 - ratio).
pub fn rho_table(config: &CavityConfig, tau: f64, max_m: i64, tol: f64) -> Result<CoeffTable> {
    if max_m < 1 {
        return Err(Error::Input("max_m must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Input("tol must be positive".into()));
    }
    let state = KappaState::at_tau(config, tau)?;
    let p = config.p as i64;
    let mut entries = BTreeMap::new();
    let mut max_n_seen = 0u32;
    let mut tail_bound = 0.0f64;

    for m in (-max_m..=max_m).filter(|m| *m != 0) {
        let n0 = first_upper_in_class(m, p);
        let mut below = 0u32;
        let mut prev_mag = f64::INFINITY;
        let mut ratio = 0.0f64;
        let mut n = n0;
        loop {
            let v = rho_closed(n as u32, m, &state)?;
            entries.insert((n as u32, m), v);
            max_n_seen = max_n_seen.max(n as u32);
            let mag = (v.re * v.re + v.im * v.im).sqrt();
            if mag < tol {
                ratio = if prev_mag > 0.0 && prev_mag.is_finite() {
                    (mag / prev_mag).min(TAIL_RATIO_CAP)
                } else {
                    0.0
                };
                below += 1;
                if below >= 3 && ratio < TAIL_RATIO_CAP {
                    tail_bound = tail_bound.max(mag / (1.0 - ratio));
                    break;
                }
            } else {
                below = 0;
            }
            prev_mag = mag;
            n += p;
            if n as u32 > TABLE_HARD_CAP {
                return Err(Error::Accuracy(format!(
                    "rho_table: tolerance {tol:.1e} unreachable before n = {TABLE_HARD_CAP} \
                     for m = {m} at kappa = {:.12} (tail ratio ~ {ratio:.6})",
                    state.kappa
                )));
            }
        }
    }
    Ok(CoeffTable {
        config: *config,
        state,
        entries,
        max_m,
        max_n: max_n_seen,
        tail_bound,
    })
}

/// Fixed-window table: every class entry with |m| <= max_m, n <= max_n.
///
/// Used by the identity audits, which correct for the missing tails by
/// integrating the exact boundary fluxes; the tail bound recorded here is
/// the largest boundary-row magnitude.
pub fn rho_window(config: &CavityConfig, tau: f64, max_m: i64, max_n: u32) -> Result<CoeffTable> {
    if max_m < 1 || max_n == 0 {
        return Err(Error::Input("window bounds must be positive".into()));
    }
    let state = KappaState::at_tau(config, tau)?;
    let p = config.p as i64;
    let mut entries = BTreeMap::new();
    let mut boundary_mag = 0.0f64;
    for m in (-max_m..=max_m).filter(|m| *m != 0) {
        let mut n = first_upper_in_class(m, p);
        while n <= max_n as i64 {
            let v = rho_closed(n as u32, m, &state)?;
            entries.insert((n as u32, m), v);
            if n + p > max_n as i64 || m.abs() + p > max_m {
                boundary_mag = boundary_mag.max(v.norm());
            }
            n += p;
        }
    }
    Ok(CoeffTable {
        config: *config,
        state,
        entries,
        max_m,
        max_n,
        tail_bound: boundary_mag,
    })
}

pub(crate) fn first_upper_in_class(m: i64, p: i64) -> i64 {
    let r = m.rem_euclid(p);
    if r == 0 {
        p
    } else {
        r
    }
}

pub(crate) fn table_from_parts(
    config: CavityConfig,
    state: KappaState,
    entries: BTreeMap<(u32, i64), Complex64>,
    max_m: i64,
    max_n: u32,
    tail_bound: f64,
) -> CoeffTable {
    CoeffTable {
        config,
        state,
        entries,
        max_m,
        max_n,
        tail_bound,
    }
}

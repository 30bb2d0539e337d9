//! Unitarity and recurrence checks of the coefficient tables.
//!
//! The three unitarity sums run over an infinite index; near kappa -> 1
//! their mass spreads out to the excitation front at |m| ~ p/(1 - kappa),
//! far beyond any storable window. The slow-time system is a conservation
//! law, though: the time derivative of a windowed sum telescopes to the
//! flux through the window boundary. Each residual is therefore evaluated
//! as
//!
//! ```text
//! | window_sum(tau) - target - integral_0^tau boundary_flux dt |
//! ```
//!
//! which is exact up to quadrature error for correct entries, at any
//! window size and any kappa. The uncorrected residuals are reported as
//! well; they measure how much identity mass the window itself captures
//! (the truncation-adequacy diagnostic).

use super::{first_upper_in_class, CavityConfig, CoeffTable, KappaState};
use crate::bogoliubov::rho_closed;
use crate::error::Result;
use crate::numeric::composite_simpson_vec;
use num_complex::Complex64;
use std::collections::HashMap;

/// Residual norms of the three unitarity identities over the table window.
#[derive(Debug, Clone, Copy)]
pub struct UnitarityResiduals {
    /// m-weighted column orthogonality (flux corrected).
    pub weighted_lower: f64,
    /// 1/n-weighted row orthonormality (flux corrected).
    pub weighted_upper: f64,
    /// conjugate cross sum, target zero (flux corrected).
    pub cross: f64,
    /// the same three sums without the boundary-flux correction
    pub raw_weighted_lower: f64,
    pub raw_weighted_upper: f64,
    pub raw_cross: f64,
}

impl UnitarityResiduals {
    pub fn max_corrected(&self) -> f64 {
        self.weighted_lower.max(self.weighted_upper).max(self.cross)
    }

    pub fn max_raw(&self) -> f64 {
        self.raw_weighted_lower
            .max(self.raw_weighted_upper)
            .max(self.raw_cross)
    }
}

const DEFAULT_PAIR_LIMIT: u32 = 12;
const FLUX_QUAD_TOL: f64 = 5e-12;

/// Evaluate the unitarity residuals with the default pair window.
pub fn unitarity_residuals(table: &CoeffTable) -> Result<UnitarityResiduals> {
    let npair = DEFAULT_PAIR_LIMIT.min(table.max_n());
    let mpair = (DEFAULT_PAIR_LIMIT as i64).min(table.max_m());
    unitarity_residuals_with_pairs(table, npair, mpair)
}

/// Evaluate the residuals over all index pairs up to `npair` (upper) and
/// `mpair` (lower).
pub fn unitarity_residuals_with_pairs(
    table: &CoeffTable,
    npair: u32,
    mpair: i64,
) -> Result<UnitarityResiduals> {
    let cfg = *table.config();
    let p = cfg.p() as i64;
    let sigma = cfg.sigma();
    let tau = table.state().tau;
    let max_m = table.max_m();
    let max_n = table.max_n();
    let npair = npair.min(max_n);
    let mpair = mpair.min(max_m);

    // pair lists
    let mut i_pairs = Vec::new(); // (n, k), n <= k, same residue class
    for n in 1..=npair {
        for k in n..=npair {
            if (k - n) % cfg.p() == 0 {
                i_pairs.push((n, k));
            }
        }
    }
    let mut a_pairs = Vec::new(); // (m, j), 1 <= m <= j, same class
    for m in 1..=mpair {
        for j in m..=mpair {
            if (j - m) % p == 0 {
                a_pairs.push((m, j));
            }
        }
    }
    let mut c_pairs = Vec::new(); // (m, j), m < j, class(m) = class(-j)
    for m in 1..=mpair {
        for j in (m + 1)..=mpair {
            if (m + j) % p == 0 {
                c_pairs.push((m, j));
            }
        }
    }

    // window boundaries per residue class of the lower index
    let top_of_class = |m_repr: i64| -> i64 {
        let r = m_repr.rem_euclid(p);
        let mut top = max_m - (max_m - r).rem_euclid(p);
        if top == 0 {
            top -= p;
        }
        top
    };
    let bot_of_class = |m_repr: i64| -> i64 {
        let r = m_repr.rem_euclid(p);
        let mut bot = -max_m + (r - (-max_m)).rem_euclid(p);
        if bot == 0 {
            bot += p;
        }
        bot
    };
    // top upper index of a class within the n-window
    let ntop_of_class = |m_repr: i64| -> i64 {
        let n0 = first_upper_in_class(m_repr, p);
        n0 + ((max_n as i64 - n0).div_euclid(p)) * p
    };

    // ---- window sums ----
    // Targets are the window values at tau = 0: the Kronecker seed counts
    // only when it lies inside the window.
    let mut i_win = Vec::with_capacity(i_pairs.len());
    for &(n, k) in &i_pairs {
        let mut s = Complex64::new(0.0, 0.0);
        let mut m = bot_of_class(n as i64);
        while m <= top_of_class(n as i64) {
            if m != 0 {
                s += m as f64 * table.get(n, m).conj() * table.get(k, m);
            }
            m += p;
        }
        let target = if n == k && (n as i64) <= max_m { n as f64 } else { 0.0 };
        i_win.push(s - Complex64::new(target, 0.0));
    }
    let mut a_win = Vec::with_capacity(a_pairs.len());
    for &(m, j) in &a_pairs {
        let w = ((m * j) as f64).sqrt();
        let mut s = Complex64::new(0.0, 0.0);
        let mut n = first_upper_in_class(m, p);
        while n <= max_n as i64 {
            s += w / n as f64 * table.get(n as u32, m) * table.get(n as u32, j).conj();
            n += p;
        }
        let mut n = first_upper_in_class(-m, p);
        while n <= max_n as i64 {
            s -= w / n as f64 * table.get(n as u32, -m).conj() * table.get(n as u32, -j);
            n += p;
        }
        let target = if m == j && m <= max_n as i64 { 1.0 } else { 0.0 };
        a_win.push(s - Complex64::new(target, 0.0));
    }
    let mut c_win = Vec::with_capacity(c_pairs.len());
    for &(m, j) in &c_pairs {
        let mut s = Complex64::new(0.0, 0.0);
        let mut n = first_upper_in_class(m, p);
        while n <= max_n as i64 {
            s += 1.0 / n as f64 * table.get(n as u32, m) * table.get(n as u32, -j).conj();
            n += p;
        }
        let mut n = first_upper_in_class(j, p);
        while n <= max_n as i64 {
            s -= 1.0 / n as f64 * table.get(n as u32, j) * table.get(n as u32, -m).conj();
            n += p;
        }
        c_win.push(s);
    }

    let raw_weighted_lower = i_win.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let raw_weighted_upper = a_win.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let raw_cross = c_win.iter().map(|v| v.norm()).fold(0.0, f64::max);

    // ---- boundary-flux time integrals ----
    let dim = 2 * (i_pairs.len() + a_pairs.len() + c_pairs.len());
    let mut eval_err: Option<crate::error::Error> = None;
    let mut integrand = |t: f64, out: &mut [f64]| {
        if eval_err.is_some() {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let state = match KappaState::at_tau(&cfg, t) {
            Ok(s) => s,
            Err(e) => {
                eval_err = Some(e);
                return;
            }
        };
        let mut cache: HashMap<(i64, i64), Complex64> = HashMap::new();
        let mut r = |n: i64, m: i64| -> Complex64 {
            if n < 1 || m == 0 {
                return Complex64::new(0.0, 0.0);
            }
            if let Some(v) = cache.get(&(n, m)) {
                return *v;
            }
            let v = match rho_closed(n as u32, m, &state) {
                Ok(v) => v,
                Err(e) => {
                    eval_err = Some(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            cache.insert((n, m), v);
            v
        };
        let mut idx = 0;
        for &(n, k) in &i_pairs {
            let top = top_of_class(n as i64);
            let bot = bot_of_class(n as i64);
            let l_top = sigma
                * (top * (top + p)) as f64
                * (r(n as i64, top + p).conj() * r(k as i64, top)
                    + r(n as i64, top).conj() * r(k as i64, top + p));
            let l_bot = sigma
                * ((bot - p) * bot) as f64
                * (r(n as i64, bot).conj() * r(k as i64, bot - p)
                    + r(n as i64, bot - p).conj() * r(k as i64, bot));
            let fl = l_top - l_bot;
            out[idx] = fl.re;
            out[idx + 1] = fl.im;
            idx += 2;
        }
        for &(m, j) in &a_pairs {
            let w = ((m * j) as f64).sqrt();
            let t1 = ntop_of_class(m);
            let t2 = ntop_of_class(-m);
            let g1 = sigma * (r(t1 + p, m) * r(t1, j).conj() + r(t1, m) * r(t1 + p, j).conj());
            let g2 = sigma * (r(t2 + p, -m).conj() * r(t2, -j) + r(t2, -m).conj() * r(t2 + p, -j));
            let fl = w * (-g1 + g2);
            out[idx] = fl.re;
            out[idx + 1] = fl.im;
            idx += 2;
        }
        for &(m, j) in &c_pairs {
            let t1 = ntop_of_class(m);
            let t2 = ntop_of_class(j);
            let g1 = sigma * (r(t1 + p, m) * r(t1, -j).conj() + r(t1, m) * r(t1 + p, -j).conj());
            let g2 = sigma * (r(t2 + p, j) * r(t2, -m).conj() + r(t2, j) * r(t2 + p, -m).conj());
            let fl = -g1 + g2;
            out[idx] = fl.re;
            out[idx + 1] = fl.im;
            idx += 2;
        }
    };
    let flux = if dim > 0 && tau > 0.0 {
        composite_simpson_vec(&mut integrand, 0.0, tau, dim, FLUX_QUAD_TOL)
    } else {
        vec![0.0; dim.max(1)]
    };
    if let Some(e) = eval_err {
        return Err(e);
    }

    let resid = |win: &[Complex64], off: usize| -> f64 {
        win.iter()
            .enumerate()
            .map(|(i, v)| {
                let corr = Complex64::new(flux[off + 2 * i], flux[off + 2 * i + 1]);
                (v - corr).norm()
            })
            .fold(0.0, f64::max)
    };
    let off_a = 2 * i_pairs.len();
    let off_c = off_a + 2 * a_pairs.len();
    Ok(UnitarityResiduals {
        weighted_lower: resid(&i_win, 0),
        weighted_upper: resid(&a_win, off_a),
        cross: resid(&c_win, off_c),
        raw_weighted_lower,
        raw_weighted_upper,
        raw_cross,
    })
}

/// Residual norms of the upper-index recurrences.
#[derive(Debug, Clone, Copy)]
pub struct RecurrenceResiduals {
    /// branch valid for n >= p
    pub upper_branch: f64,
    /// conjugate-coupled branch for n < p
    pub lower_branch: f64,
    /// finite-difference step used
    pub step: f64,
}

/// Compare d rho/d tau (central finite difference) against the two
/// upper-index recurrence branches, over every table entry whose
/// neighbours fit in the window.
pub fn recurrence_residuals(
    config: &CavityConfig,
    tau: f64,
    table: &CoeffTable,
) -> Result<RecurrenceResiduals> {
    if !(tau > 0.0) {
        return Err(crate::error::Error::Input(
            "recurrence_residuals needs tau > 0 for the centered difference".into(),
        ));
    }
    let h = (1e-4 * tau.max(1.0)).min(0.5 * tau);
    let p = config.p();
    let sigma = config.sigma();
    let gamma = config.gamma();
    let plus = super::rho_window(config, tau + h, table.max_m(), table.max_n() + p)?;
    let minus = super::rho_window(config, tau - h, table.max_m(), table.max_n() + p)?;
    let denom = 2.0 * h;
    let center = super::rho_window(config, tau, table.max_m(), table.max_n() + p)?;

    let mut upper = 0.0f64;
    let mut lower = 0.0f64;
    for ((n, m), _) in table.iter() {
        let (n, m) = (*n, *m);
        let fd = (plus.get(n, m) - minus.get(n, m)) / denom;
        let nf = n as f64;
        let rot = Complex64::new(0.0, 2.0 * gamma) * center.get(n, m);
        if n >= p {
            let below = if n == p {
                Complex64::new(0.0, 0.0) // rho_m^(0) = 0
            } else {
                center.get(n - p, m)
            };
            let rhs = nf * (sigma * (below - center.get(n + p, m)) + rot);
            upper = upper.max((fd - rhs).norm());
        } else {
            let conj_part = center.get(p - n, -m).conj();
            let rhs = nf * (sigma * (conj_part - center.get(p + n, m)) + rot);
            lower = lower.max((fd - rhs).norm());
        }
    }
    Ok(RecurrenceResiduals {
        upper_branch: upper,
        lower_branch: lower,
        step: h,
    })
}

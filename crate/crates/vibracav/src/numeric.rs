//! Small shared numerical helpers: compensated summation and adaptive quadrature.

/// Kahan compensated accumulator for long alternating series tails.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new(x0: f64) -> Self {
        Kahan { sum: x0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

const SIMPSON_MIN_DEPTH: u32 = 6;
const SIMPSON_MAX_DEPTH: u32 = 28;

/// Adaptive Simpson quadrature with a minimum subdivision depth.
///
/// The minimum depth guards against false convergence on integrands whose
/// support is concentrated in a small part of the interval (the slow-time
/// rate integrands settle exponentially after a few units of tau).
pub(crate) fn adaptive_simpson<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    simpson_rec(f, a, b, tol, fa, fm, fb, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let s1 = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let s2 = (b - a) / 12.0 * (fa + 4.0 * flm + 2.0 * fm + 4.0 * frm + fb);
    if depth >= SIMPSON_MIN_DEPTH && (depth >= SIMPSON_MAX_DEPTH || (s2 - s1).abs() < 15.0 * tol) {
        return s2 + (s2 - s1) / 15.0;
    }
    simpson_rec(f, a, m, 0.5 * tol, fa, flm, fm, depth + 1)
        + simpson_rec(f, m, b, 0.5 * tol, fm, frm, fb, depth + 1)
}

/// Composite-Simpson integration of a vector-valued integrand on a uniform
/// grid, doubling the panel count until the max-norm change drops below
/// `tol`. Node values are reused between refinement levels.
///
/// Intended for smooth integrands shared by many output components (the
/// unitarity boundary fluxes): the driver evaluates the whole vector once
/// per node.
pub(crate) fn composite_simpson_vec<F>(f: &mut F, a: f64, b: f64, dim: usize, tol: f64) -> Vec<f64>
where
    F: FnMut(f64, &mut [f64]),
{
    assert!(dim > 0);
    if a == b {
        return vec![0.0; dim];
    }
    let mut panels = 64usize;
    // values[i] holds f(a + i*h), i = 0..=panels
    let mut values: Vec<Vec<f64>> = (0..=panels)
        .map(|i| {
            let t = a + (b - a) * i as f64 / panels as f64;
            let mut v = vec![0.0; dim];
            f(t, &mut v);
            v
        })
        .collect();

    let simpson_of = |values: &[Vec<f64>], h: f64| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for i in (0..values.len() - 2).step_by(2) {
            for d in 0..dim {
                out[d] += h / 3.0 * (values[i][d] + 4.0 * values[i + 1][d] + values[i + 2][d]);
            }
        }
        out
    };

    let mut prev = simpson_of(&values, (b - a) / panels as f64);
    loop {
        let mut refined: Vec<Vec<f64>> = Vec::with_capacity(2 * panels + 1);
        for i in 0..panels {
            refined.push(std::mem::take(&mut values[i]));
            let t = a + (b - a) * (i as f64 + 0.5) / panels as f64;
            let mut v = vec![0.0; dim];
            f(t, &mut v);
            refined.push(v);
        }
        refined.push(std::mem::take(&mut values[panels]));
        values = refined;
        panels *= 2;
        let cur = simpson_of(&values, (b - a) / panels as f64);
        let worst = cur
            .iter()
            .zip(prev.iter())
            .map(|(c, p)| (c - p).abs())
            .fold(0.0f64, f64::max);
        if worst < tol || panels >= 1 << 14 {
            return cur;
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_sums_alternating_tail() {
        let mut k = Kahan::new(0.0);
        for i in 1..200_000u64 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            k.add(s / i as f64);
        }
        assert!((k.value() + std::f64::consts::LN_2).abs() < 1e-5);
    }

    #[test]
    fn simpson_integrates_peaked_function() {
        // concentrated bump: naive 3-point sampling would miss it
        let mut f = |x: f64| (-(x - 0.1) * (x - 0.1) * 400.0).exp();
        let got = adaptive_simpson(&mut f, 0.0, 30.0, 1e-12);
        let want = (std::f64::consts::PI / 400.0).sqrt();
        assert!((got - want).abs() < 1e-9, "got {got} want {want}");
    }

    #[test]
    fn composite_vec_matches_closed_forms() {
        let mut f = |t: f64, out: &mut [f64]| {
            out[0] = t.sin();
            out[1] = (-t).exp();
        };
        let v = composite_simpson_vec(&mut f, 0.0, 2.0, 2, 1e-12);
        assert!((v[0] - (1.0 - 2.0f64.cos())).abs() < 1e-10);
        assert!((v[1] - (1.0 - (-2.0f64).exp())).abs() < 1e-10);
    }
}

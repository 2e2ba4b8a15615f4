//! Adaptive Gauss–Kronrod (7, 15) quadrature for small vectors of complex
//! values.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: estimated error {error:e} exceeds tolerance {tolerance:e}")]
    NoConvergence { error: f64, tolerance: f64 },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of subintervals for one adaptive call.
    pub max_intervals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self { abs: 1e-14, rel: 1e-12, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<const N: usize> {
    pub value: [Complex64; N],
    /// Componentwise error estimates.
    pub error: [f64; N],
    pub evaluations: usize,
}

/// Kronrod abscissae on [0, 1]; odd indices are the Gauss points.
pub const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
pub const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for XK[1], XK[3], XK[5], XK[7].
pub const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// The 15 Kronrod nodes on [a, b] with Kronrod and Gauss weights
/// (Gauss weight zero at Kronrod-only nodes).
pub fn gk15_nodes(a: f64, b: f64) -> [(f64, f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0, 0.0); 15];
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] * h } else { 0.0 };
        out[2 * j] = (c - h * XK[j], WK[j] * h, wg);
        out[2 * j + 1] = (c + h * XK[j], WK[j] * h, wg);
    }
    out[14] = (c, WK[7] * h, WG[3] * h);
    out
}

/// One Gauss–Kronrod 7-15 panel: (Kronrod estimate, |Kronrod − Gauss|).
pub fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<([Complex64; N], [f64; N]), QuadError>
where
    F: FnMut(f64) -> [Complex64; N],
{
    let mut k = [Complex64::new(0.0, 0.0); N];
    let mut g = [Complex64::new(0.0, 0.0); N];
    for (x, wk, wg) in gk15_nodes(a, b) {
        let v = f(x);
        for i in 0..N {
            if !(v[i].re.is_finite() && v[i].im.is_finite()) {
                return Err(QuadError::NonFinite(x));
            }
            k[i] += v[i] * wk;
            g[i] += v[i] * wg;
        }
    }
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = (k[i] - g[i]).norm();
    }
    Ok((k, err))
}

fn accepted<const N: usize>(value: &[Complex64; N], error: &[f64; N], tol: &QuadTolerance) -> bool {
    (0..N).all(|i| error[i] <= tol.abs.max(tol.rel * value[i].norm()))
}

/// Globally adaptive integration over the finite interval [a, b].
pub fn integrate<const N: usize, F>(mut f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<Quadrature<N>, QuadError>
where
    F: FnMut(f64) -> [Complex64; N],
{
    let mut panels: Vec<(f64, f64, [Complex64; N], [f64; N])> = Vec::new();
    let (v, e) = gk15(&mut f, a, b)?;
    panels.push((a, b, v, e));
    let mut evaluations = 15;
    loop {
        let mut value = [Complex64::new(0.0, 0.0); N];
        let mut error = [0.0; N];
        for (_, _, v, e) in &panels {
            for i in 0..N {
                value[i] += v[i];
                error[i] += e[i];
            }
        }
        if accepted(&value, &error, &tol) {
            return Ok(Quadrature { value, error, evaluations });
        }
        let scale: Vec<f64> = (0..N).map(|i| tol.abs.max(tol.rel * value[i].norm())).collect();
        if panels.len() >= tol.max_intervals {
            let i = (0..N).max_by(|&i, &j| (error[i] / scale[i]).total_cmp(&(error[j] / scale[j]))).unwrap_or(0);
            return Err(QuadError::NoConvergence { error: error[i], tolerance: scale[i] });
        }
        // Bisect the panel with the largest scaled error.
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| {
                let sp = (0..N).map(|i| p.3[i] / scale[i]).fold(0.0, f64::max);
                let sq = (0..N).map(|i| q.3[i] / scale[i]).fold(0.0, f64::max);
                sp.total_cmp(&sq)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        evaluations += 30;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Integrates over [a, ∞) using panels whose widths double from
/// `first_width`, stopping once the integrand has decayed for good.
///
/// `horizon` is a point beyond which the integrand is known to be
/// negligible (e.g. several of its slowest decay times).
pub fn integrate_semi_infinite<const N: usize, F>(
    mut f: F,
    a: f64,
    first_width: f64,
    horizon: f64,
    tol: QuadTolerance,
) -> Result<Quadrature<N>, QuadError>
where
    F: FnMut(f64) -> [Complex64; N],
{
    let mut value = [Complex64::new(0.0, 0.0); N];
    let mut error = [0.0; N];
    let mut evaluations = 0;
    let mut lo = a;
    let mut width = first_width;
    // Panels are tight relative to their own size; the sum inherits it.
    let panel_tol = QuadTolerance { abs: 0.0, ..tol };
    while lo < horizon {
        let hi = lo + width;
        let q = integrate(&mut f, lo, hi, QuadTolerance { abs: tol.abs * 1e-3, ..panel_tol })?;
        for i in 0..N {
            value[i] += q.value[i];
            error[i] += q.error[i];
        }
        evaluations += q.evaluations;
        lo = hi;
        width *= 2.0;
    }
    if !accepted(&value, &error, &QuadTolerance { rel: tol.rel * 10.0, ..tol }) {
        let i = (0..N).max_by(|&i, &j| error[i].total_cmp(&error[j])).unwrap_or(0);
        return Err(QuadError::NoConvergence { error: error[i], tolerance: tol.abs.max(tol.rel * value[i].norm()) });
    }
    Ok(Quadrature { value, error, evaluations })
}

/// ∫ f over the real line through x = center + width·tan θ.
pub fn integrate_real_line<F>(mut f: F, center: f64, width: f64, tol: QuadTolerance) -> Result<(f64, f64), QuadError>
where
    F: FnMut(f64) -> f64,
{
    let half = std::f64::consts::FRAC_PI_2;
    let q = integrate(
        |th: f64| {
            let c = th.cos();
            if c <= 0.0 {
                return [Complex64::new(0.0, 0.0)];
            }
            let x = center + width * th.tan();
            [Complex64::new(f(x) * width / (c * c), 0.0)]
        },
        -half,
        half,
        tol,
    )?;
    Ok((q.value[0].re, q.error[0]))
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<(f64, f64), QuadError>
where
    F: FnMut(f64) -> f64,
{
    let q = integrate(|x| [Complex64::new(f(x), 0.0)], a, b, tol)?;
    Ok((q.value[0].re, q.error[0]))
}

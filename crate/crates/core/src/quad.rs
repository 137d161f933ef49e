//! One-dimensional quadrature: composite Gauss–Legendre and adaptive
//! Gauss–Kronrod (21-point) with user breakpoints.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre over consecutive `edges`.
pub fn composite_gl<F: FnMut(f64) -> f64>(mut f: F, edges: &[f64], order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    edges
        .windows(2)
        .map(|ab| {
            let (a, b) = (ab[0], ab[1]);
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            h * x.iter().zip(&w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>()
        })
        .sum()
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Gauss–Kronrod panel: `(estimate, error estimate)`.
pub fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        // Gauss nodes sit at the odd Kronrod positions.
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * h;
    let res_abs = res_abs * h.abs();
    let res_asc = res_asc * h.abs();
    let mut err = ((res_k - res_g) * h).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_panels: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub panels: usize,
}

/// Adaptive Gauss–Kronrod over `[points[0], points[last]]`, with the interior
/// points as forced panel boundaries. Bisects the panel with the largest
/// error estimate until the tolerance is met.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::Quadrature("need at least two points".into()));
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    for ab in points.windows(2) {
        if ab[1] < ab[0] {
            return Err(Error::Quadrature("breakpoints must be non-decreasing".into()));
        }
        if ab[1] > ab[0] {
            let (v, e) = qk21(&mut f, ab[0], ab[1]);
            panels.push((ab[0], ab[1], v, e));
        }
    }
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if err <= target || panels.is_empty() {
            return Ok(QuadResult { value, abs_err: err, panels: panels.len() });
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature(format!(
                "panel budget {} exhausted with error {err:e} > {target:e}",
                opts.max_panels
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Panel cannot be split further in floating point.
            let value: f64 = panels.iter().map(|p| p.2).sum::<f64>();
            return Err(Error::Quadrature(format!("panel [{a}, {b}] underflowed near {value}")));
        }
        let (v1, e1) = qk21(&mut f, a, mid);
        let (v2, e2) = qk21(&mut f, mid, b);
        panels.push((a, mid, v1, e1));
        panels.push((mid, b, v2, e2));
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
        // x^12 has integral 2/13 on [-1, 1]; degree 13 is exact for n = 7.
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(12)).sum();
        assert_relative_eq!(s, 2.0 / 13.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks_at_breakpoints() {
        let r = integrate_with_breaks(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 2.5, epsilon = 1e-12);
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn composite_matches_closed_form() {
        let edges: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1 * std::f64::consts::PI).collect();
        let v = composite_gl(f64::sin, &edges, 8);
        assert_relative_eq!(v, 2.0, epsilon = 1e-13);
    }
}

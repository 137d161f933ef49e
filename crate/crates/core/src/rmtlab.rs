//! Random-matrix oracles for the scaled sample covariance
//! `(pn)^{-1/2} X^T X` with `phi = p / n`.
//!
//! The limiting Stieltjes transform solves
//! `1/m = -z + (1/p) sum_j phi / (phi^{1/2} / sigma_j + m)`. From it we get
//! the density by inversion, the support edges, classical locations and the
//! theoretical window mean. A closed-form semicircle approximation is
//! provided alongside. None of this is used by the test itself.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate_with_breaks, QuadOptions};
use crate::teststat::{mollifier, KERNEL_SUPPORT};

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 10_000;
const DAMPING: f64 = 0.5;
// Newton from far away can run off to infinity, where the residual also shrinks.
const NEWTON_SWITCH: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpectrum {
    sigma: Vec<f64>,
}

impl PopulationSpectrum {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::Dimension("population spectrum is empty".into()));
        }
        if let Some(bad) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::NotPositiveDefinite(format!("population eigenvalue {bad} is not positive")));
        }
        Ok(Self { sigma })
    }

    pub fn identity(p: usize) -> Self {
        Self { sigma: vec![1.0; p.max(1)] }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    /// Distinct eigenvalues with their relative multiplicities.
    fn atoms(&self) -> Vec<(f64, f64)> {
        let mut s = self.sigma.clone();
        s.sort_by(f64::total_cmp);
        let w = 1.0 / s.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for v in s {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => out.push((v, w)),
            }
        }
        out
    }
}

/// `(1/p) sum sigma^k`.
pub fn esd_moments(pop: &PopulationSpectrum, k: u32) -> f64 {
    pop.sigma.iter().map(|s| s.powi(k as i32)).sum::<f64>() / pop.p() as f64
}

/// Pole locations `a_j = phi^{1/2} / sigma_j` with weights.
struct Kernel {
    phi: f64,
    poles: Vec<(f64, f64)>,
}

impl Kernel {
    fn new(pop: &PopulationSpectrum, phi: f64) -> Self {
        let r = phi.sqrt();
        Self { phi, poles: pop.atoms().into_iter().map(|(s, w)| (r / s, w)).collect() }
    }

    fn s(&self, m: Complex64) -> Complex64 {
        self.poles.iter().map(|&(a, w)| w / (a + m)).sum::<Complex64>() * self.phi
    }

    fn ds(&self, m: Complex64) -> Complex64 {
        -self.poles.iter().map(|&(a, w)| w / ((a + m) * (a + m))).sum::<Complex64>() * self.phi
    }

    fn residual(&self, z: Complex64, m: Complex64) -> f64 {
        (m.inv() + z - self.s(m)).norm()
    }

    /// Damped iteration; once the residual is small, Newton steps are
    /// taken whenever they stay in the upper half-plane and improve it.
    fn solve(&self, z: Complex64, start: Complex64) -> Result<Complex64> {
        let mut m = start;
        for _ in 0..MAX_ITERS {
            let g = m.inv() + z - self.s(m);
            let r = g.norm();
            if r < RESIDUAL_TOL && m.im > 0.0 {
                return Ok(m);
            }
            if r < NEWTON_SWITCH {
                let newton = m - g / (-(m * m).inv() - self.ds(m));
                if newton.im > 0.0 && newton.is_finite() && self.residual(z, newton) < r {
                    m = newton;
                    continue;
                }
            }
            m = m * (1.0 - DAMPING) + (self.s(m) - z).inv() * DAMPING;
        }
        Err(Error::Convergence(format!(
            "Stieltjes fixed point at z = {z} stalled with residual {:e}",
            self.residual(z, m)
        )))
    }

    /// Walks `Im z` down from 1 by decades, warm-starting each solve, so the
    /// start point is never far from the answer near the real axis.
    fn solve_continued(&self, z: Complex64) -> Result<Complex64> {
        let mut m = Complex64::i();
        let mut eta = 1.0;
        while eta > z.im {
            m = self.solve(Complex64::new(z.re, eta), m)?;
            eta /= 10.0;
        }
        self.solve(z, m)
    }

    /// Real-axis map `z(m) = -1/m + S(m)` and its derivative.
    fn z_real(&self, m: f64) -> f64 {
        -1.0 / m + self.phi * self.poles.iter().map(|&(a, w)| w / (a + m)).sum::<f64>()
    }

    fn dz_real(&self, m: f64) -> f64 {
        1.0 / (m * m) - self.phi * self.poles.iter().map(|&(a, w)| w / ((a + m) * (a + m))).sum::<f64>()
    }
}

/// `m(z)` off the real axis; lower half-plane arguments use `m(conj z) = conj m(z)`.
pub fn stieltjes_fixed_point(z: Complex64, pop: &PopulationSpectrum, phi: f64) -> Result<Complex64> {
    check_arguments(z, phi)?;
    let kernel = Kernel::new(pop, phi);
    if z.im < 0.0 {
        return Ok(kernel.solve_continued(z.conj())?.conj());
    }
    kernel.solve_continued(z)
}

fn check_arguments(z: Complex64, phi: f64) -> Result<()> {
    if !(z.im != 0.0 && z.im.is_finite() && z.re.is_finite()) {
        return Err(Error::InvalidConfig(format!("Stieltjes argument must lie off the real axis, got {z}")));
    }
    if !(phi > 0.0) {
        return Err(Error::InvalidConfig(format!("aspect ratio must be positive, got {phi}")));
    }
    Ok(())
}

/// As [`stieltjes_fixed_point`], starting the iteration at `start`.
pub fn stieltjes_fixed_point_from(z: Complex64, pop: &PopulationSpectrum, phi: f64, start: Complex64) -> Result<Complex64> {
    check_arguments(z, phi)?;
    let kernel = Kernel::new(pop, phi);
    if z.im < 0.0 {
        let start = if start.im < 0.0 { start.conj() } else { Complex64::i() };
        return Ok(kernel.solve(z.conj(), start)?.conj());
    }
    let start = if start.im > 0.0 { start } else { Complex64::i() };
    kernel.solve(z, start)
}

/// Geometric ladder from `1e-2` down to `1e-6`.
pub fn default_eta_ladder() -> Vec<f64> {
    (0..5).map(|k| 10f64.powi(-2 - k)).collect()
}

fn density_with(kernel: &Kernel, x: f64, ladder: &[f64]) -> Result<f64> {
    if ladder.len() < 2 || ladder.windows(2).any(|w| w[1] >= w[0]) || ladder[ladder.len() - 1] <= 0.0 {
        return Err(Error::InvalidConfig("eta ladder must be positive and strictly decreasing".into()));
    }
    let mut m = kernel.solve_continued(Complex64::new(x, ladder[0]))?;
    let mut d = vec![m.im / PI];
    for &eta in &ladder[1..] {
        m = kernel.solve(Complex64::new(x, eta), m)?;
        d.push(m.im / PI);
    }
    let k = ladder.len();
    let (ea, eb) = (ladder[k - 2], ladder[k - 1]);
    let (da, db) = (d[k - 2], d[k - 1]);
    // Removes the O(eta) bias of the smaller rung.
    let extrapolated = (ea * db - eb * da) / (ea - eb);
    Ok(extrapolated.max(0.0))
}

/// Limiting density at `x`, by Stieltjes inversion along `eta_ladder`.
pub fn density_from_stieltjes(x: f64, pop: &PopulationSpectrum, phi: f64, eta_ladder: &[f64]) -> Result<f64> {
    density_with(&Kernel::new(pop, phi), x, eta_ladder)
}

/// Support edges from the extrema of the real-axis inverse map.
pub fn support_edges(pop: &PopulationSpectrum, phi: f64) -> Result<(f64, f64)> {
    let kernel = Kernel::new(pop, phi);
    let a_min = kernel.poles.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);

    // Upper edge: z is convex on (-a_min, 0), so dz has one sign change.
    let (mut lo, mut hi) = (-a_min * (1.0 - 1e-15), -1e-300);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if kernel.dz_real(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-15 * mid.abs() {
            break;
        }
    }
    let upper = kernel.z_real(0.5 * (lo + hi));

    // Lower edge: first sign change of dz on (0, inf), scanned on a log grid.
    if phi <= 1.0 {
        return Err(Error::InvalidConfig(format!("support edges need phi > 1, got {phi}")));
    }
    let mut prev = 1e-8;
    let mut found = None;
    for k in 1..=2400 {
        let m = 1e-8 * 10f64.powf(k as f64 / 100.0);
        if kernel.dz_real(m) < 0.0 {
            found = Some((prev, m));
            break;
        }
        prev = m;
    }
    let (mut lo, mut hi) = found.ok_or_else(|| Error::Convergence("lower support edge not bracketed".into()))?;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if kernel.dz_real(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * mid {
            break;
        }
    }
    let lower = kernel.z_real(0.5 * (lo + hi));
    if !(lower < upper) {
        return Err(Error::Numerical(format!("support edges out of order: {lower} >= {upper}")));
    }
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelMode {
    ExactFixedPoint,
    SemicircleApprox,
}

/// Tabulated density on `x = center - half * cos(t)`, `t` in `[0, pi]`,
/// with panel-wise Gauss–Legendre nodes. The substitution absorbs the
/// square-root edges.
#[derive(Debug, Clone)]
struct DensityTable {
    center: f64,
    half: f64,
    dt: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
    values: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
}

const TABLE_PANELS: usize = 256;
const TABLE_ORDER: usize = 10;

impl DensityTable {
    fn build(kernel: &Kernel, lower: f64, upper: f64) -> Result<Self> {
        let (nodes, weights) = gauss_legendre(TABLE_ORDER);
        let center = 0.5 * (lower + upper);
        let half = 0.5 * (upper - lower);
        let dt = PI / TABLE_PANELS as f64;
        let ladder = default_eta_ladder();
        let values = (0..TABLE_PANELS)
            .into_par_iter()
            .map(|k| {
                nodes
                    .iter()
                    .map(|&u| {
                        let t = dt * (k as f64 + 0.5 * (u + 1.0));
                        density_with(kernel, center - half * t.cos(), &ladder)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cumulative = vec![0.0];
        for (k, vals) in values.iter().enumerate() {
            let mass: f64 = nodes
                .iter()
                .zip(&weights)
                .zip(vals)
                .map(|((&u, &w), &rho)| {
                    let t = dt * (k as f64 + 0.5 * (u + 1.0));
                    w * 0.5 * dt * rho * half * t.sin()
                })
                .sum();
            cumulative.push(cumulative[k] + mass);
        }
        // Barycentric weights for interpolation through the Legendre nodes.
        let bary = (0..TABLE_ORDER)
            .map(|j| {
                let prod: f64 = (0..TABLE_ORDER).filter(|&i| i != j).map(|i| nodes[j] - nodes[i]).product();
                1.0 / prod
            })
            .collect();
        Ok(Self { center, half, dt, nodes, weights, bary, values, cumulative })
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let k = ((t / self.dt) as usize).min(TABLE_PANELS - 1);
        let u = 2.0 * (t - k as f64 * self.dt) / self.dt - 1.0;
        (k, u)
    }

    fn interp(&self, k: usize, u: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..TABLE_ORDER {
            let d = u - self.nodes[j];
            if d == 0.0 {
                return self.values[k][j];
            }
            let c = self.bary[j] / d;
            num += c * self.values[k][j];
            den += c;
        }
        num / den
    }

    fn angle(&self, x: f64) -> f64 {
        ((self.center - x) / self.half).clamp(-1.0, 1.0).acos()
    }

    fn density(&self, x: f64) -> f64 {
        if (x - self.center).abs() >= self.half {
            return 0.0;
        }
        let (k, u) = self.locate(self.angle(x));
        self.interp(k, u).max(0.0)
    }

    /// Unnormalised mass below `x`.
    fn mass_below(&self, x: f64) -> f64 {
        if x <= self.center - self.half {
            return 0.0;
        }
        if x >= self.center + self.half {
            return self.total();
        }
        let t = self.angle(x);
        let (k, u) = self.locate(t);
        let t0 = k as f64 * self.dt;
        let span = t - t0;
        let partial: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| {
                let tt = t0 + 0.5 * span * (s + 1.0);
                let uu = -1.0 + (u + 1.0) * 0.5 * (s + 1.0);
                w * 0.5 * span * self.interp(k, uu) * self.half * tt.sin()
            })
            .sum();
        self.cumulative[k] + partial
    }
}

/// Limiting spectral density descriptor.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub phi: f64,
    pub m1: f64,
    pub m2: f64,
    pub support: (f64, f64),
    pub mode: ModelMode,
    table: Option<DensityTable>,
}

/// Closed-form semicircle with center `m1 phi^{1/2}` and radius `2 m2^{1/2}`.
pub fn semicircle_model(pop: &PopulationSpectrum, phi: f64) -> SpectralModel {
    let m1 = esd_moments(pop, 1);
    let m2 = esd_moments(pop, 2);
    let c = m1 * phi.sqrt();
    let r = 2.0 * m2.sqrt();
    SpectralModel { phi, m1, m2, support: (c - r, c + r), mode: ModelMode::SemicircleApprox, table: None }
}

/// Density from the fixed point, tabulated once over the exact support.
pub fn exact_model(pop: &PopulationSpectrum, phi: f64) -> Result<SpectralModel> {
    let kernel = Kernel::new(pop, phi);
    let support = support_edges(pop, phi)?;
    let table = DensityTable::build(&kernel, support.0, support.1)?;
    Ok(SpectralModel {
        phi,
        m1: esd_moments(pop, 1),
        m2: esd_moments(pop, 2),
        support,
        mode: ModelMode::ExactFixedPoint,
        table: Some(table),
    })
}

impl SpectralModel {
    pub fn center(&self) -> f64 {
        match self.mode {
            ModelMode::SemicircleApprox => self.m1 * self.phi.sqrt(),
            ModelMode::ExactFixedPoint => 0.5 * (self.support.0 + self.support.1),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.table {
            Some(t) => t.density(x),
            None => {
                let d = x - self.m1 * self.phi.sqrt();
                let r2 = 4.0 * self.m2 - d * d;
                if r2 <= 0.0 {
                    0.0
                } else {
                    r2.sqrt() / (2.0 * PI * self.m2)
                }
            }
        }
    }

    /// Integral of the density over the support; 1 up to discretisation for
    /// the exact model, exactly 1 for the semicircle.
    pub fn total_mass(&self) -> f64 {
        self.table.as_ref().map_or(1.0, |t| t.total())
    }

    /// Normalised distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.table {
            Some(t) => (t.mass_below(x) / t.total()).clamp(0.0, 1.0),
            None => {
                let r = 2.0 * self.m2.sqrt();
                let u = ((x - self.m1 * self.phi.sqrt()) / r).clamp(-1.0, 1.0);
                0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLocations {
    /// Descending; `omega[i - 1]` has upper-tail mass `i / n`.
    pub omega: Vec<f64>,
}

/// `omega_i` with `int_{omega_i}^inf d rho = i / n`, by bisection to 1e-10.
pub fn classical_locations(model: &SpectralModel, n: usize) -> Result<ClassicalLocations> {
    if n < 2 {
        return Err(Error::Size(format!("need at least two classical locations, got {n}")));
    }
    let (lo_edge, hi_edge) = model.support;
    let omega = (1..=n)
        .map(|i| {
            let target = 1.0 - i as f64 / n as f64;
            let (mut lo, mut hi) = (lo_edge, hi_edge);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if model.cdf(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    Ok(ClassicalLocations { omega })
}

/// `M = n int ((t - gamma)/eta0) K((t - gamma)/eta0) d rho(t)`.
pub fn theoretical_mean(model: &SpectralModel, gamma: f64, eta0: f64, n: usize) -> Result<f64> {
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(Error::InvalidBandwidth(eta0));
    }
    let lo = (gamma - KERNEL_SUPPORT * eta0).max(model.support.0);
    let hi = (gamma + KERNEL_SUPPORT * eta0).min(model.support.1);
    if lo >= hi {
        return Ok(0.0);
    }
    let mut points = vec![lo, hi];
    for c in [-1.01, -1.0, 1.0, 1.01] {
        let t = gamma + c * eta0;
        if t > lo && t < hi {
            points.push(t);
        }
    }
    points.sort_by(f64::total_cmp);
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_panels: 4000 };
    let r = integrate_with_breaks(
        |t| {
            let u = (t - gamma) / eta0;
            u * mollifier(u) * model.density(t)
        },
        &points,
        opts,
    )?;
    Ok(n as f64 * r.value)
}

/// `(phi^{1/2} |dm1| + phi^{-1/2} |dm2|, eta0^{-2} n^{-1})`.
pub fn local_alternative_strength(
    pop1: &PopulationSpectrum,
    pop2: &PopulationSpectrum,
    phi: f64,
    eta0: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if pop1.p() != pop2.p() {
        return Err(Error::Dimension(format!("population sizes differ: {} vs {}", pop1.p(), pop2.p())));
    }
    let d1 = (esd_moments(pop1, 1) - esd_moments(pop2, 1)).abs();
    let d2 = (esd_moments(pop1, 2) - esd_moments(pop2, 2)).abs();
    let lhs = phi.sqrt() * d1 + d2 / phi.sqrt();
    Ok((lhs, 1.0 / (eta0 * eta0 * n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moments() {
        let p = PopulationSpectrum::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(esd_moments(&p, 1), 2.0);
        assert_eq!(esd_moments(&p, 2), 5.0);
        let q = PopulationSpectrum::new(vec![2.0, 6.0]).unwrap();
        assert_eq!(esd_moments(&q, 3), 8.0 * esd_moments(&p, 3));
        assert_eq!(esd_moments(&PopulationSpectrum::identity(7), 4), 1.0);
        assert!(PopulationSpectrum::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn identity_fixed_point_matches_quadratic_root() {
        let phi: f64 = 400.0;
        let r = phi.sqrt();
        let z = Complex64::new(r, 0.01);
        let m = stieltjes_fixed_point(z, &PopulationSpectrum::identity(10), phi).unwrap();
        // For Sigma = I: 1/m = -z + phi/(r + m), i.e.
        // z m^2 + (z r - phi + 1) m + r = 0.
        let a = z;
        let b = z * r - phi + 1.0;
        let c = Complex64::new(r, 0.0);
        let disc = (b * b - a * c * 4.0).sqrt();
        let roots = [(-b + disc) / (a * 2.0), (-b - disc) / (a * 2.0)];
        let root = roots.iter().find(|q| q.im > 0.0).unwrap();
        assert_relative_eq!(m.re, root.re, epsilon = 1e-10);
        assert_relative_eq!(m.im, root.im, epsilon = 1e-10);
        assert!((m - Complex64::i()).norm() < 0.2);
    }

    #[test]
    fn fixed_point_is_self_consistent_and_in_upper_half_plane() {
        let pop = PopulationSpectrum::new((0..50).map(|i| 1.0 + 0.1 * i as f64).collect()).unwrap();
        let phi = 30.0;
        for &(x, y) in &[(3.0, 1e-3), (8.0, 1e-6), (-5.0, 2.0), (40.0, 0.5)] {
            let z = Complex64::new(x, y);
            let m = stieltjes_fixed_point(z, &pop, phi).unwrap();
            assert!(m.im > 0.0);
            let s: Complex64 =
                pop.sigma().iter().map(|&sg| phi / (phi.sqrt() / sg + m)).sum::<Complex64>() / pop.p() as f64;
            assert!((m.inv() - (-z + s)).norm() < 1e-12);
        }
    }

    #[test]
    fn semicircle_support_and_mass() {
        let m = semicircle_model(&PopulationSpectrum::identity(5), 20.0);
        assert_relative_eq!(m.support.0, 20f64.sqrt() - 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.support.1, 20f64.sqrt() + 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.center(), 20f64.sqrt(), epsilon = 1e-12);
        assert_eq!(m.cdf(m.support.1), 1.0);
        let omega = classical_locations(&m, 100).unwrap().omega;
        assert!(omega.windows(2).all(|w| w[0] > w[1]));
        assert!((omega[49] - m.center()).abs() < 1e-9);
    }

    #[test]
    fn density_vanishes_far_outside_and_peaks_at_one_over_pi() {
        let pop = PopulationSpectrum::identity(3);
        let phi: f64 = 400.0;
        let ladder = default_eta_ladder();
        assert!(density_from_stieltjes(phi.sqrt() + 10.0, &pop, phi, &ladder).unwrap() < 1e-6);
        assert!(density_from_stieltjes(-3.0, &pop, phi, &ladder).unwrap() < 1e-6);
        let peak = density_from_stieltjes(phi.sqrt(), &pop, phi, &ladder).unwrap();
        assert!((peak - 1.0 / PI).abs() < 0.01, "{peak}");
    }

    #[test]
    fn exact_model_mass_and_edges() {
        let pop = PopulationSpectrum::identity(4);
        let phi: f64 = 40.0;
        let m = exact_model(&pop, phi).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-4, "{}", m.total_mass());
        let sc = semicircle_model(&pop, phi);
        assert!((m.support.0 - sc.support.0).abs() < 0.5);
        assert!((m.support.1 - sc.support.1).abs() < 0.5);
        // Independent quadrature of the inverted density.
        let ladder = default_eta_ladder();
        let total = integrate_with_breaks(
            |x| density_from_stieltjes(x, &pop, phi, &ladder).unwrap(),
            &[m.support.0, m.center(), m.support.1],
            QuadOptions { abs_tol: 1e-6, rel_tol: 1e-6, max_panels: 400 },
        )
        .unwrap()
        .value;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn theoretical_mean_symmetry_and_disjoint_window() {
        let m = semicircle_model(&PopulationSpectrum::identity(4), 100.0);
        assert_eq!(theoretical_mean(&m, 100.0, 0.5, 50).unwrap(), 0.0);
        assert!(theoretical_mean(&m, m.center(), 0.5, 50).unwrap().abs() < 1e-9);
        // Window above the center sees more mass on its left: negative mean.
        assert!(theoretical_mean(&m, m.center() + 1.0, 0.5, 50).unwrap() < 0.0);
    }

    #[test]
    fn strength_diagnostic() {
        let a = PopulationSpectrum::new(vec![3.0, 4.0, 5.0]).unwrap();
        let b = PopulationSpectrum::new(vec![4.0, 5.0, 6.0]).unwrap();
        let (lhs, scale) = local_alternative_strength(&a, &a, 9.0, 0.5, 10).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(scale, 0.4);
        let (lhs, _) = local_alternative_strength(&a, &b, 9.0, 0.5, 10).unwrap();
        assert!(lhs >= 3.0);
    }
}

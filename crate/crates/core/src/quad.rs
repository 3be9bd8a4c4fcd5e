//! Quadrature over products of unit circles.
//!
//! On a periodic domain the trapezoid rule is a plain average over roots
//! of unity and converges exponentially for integrands analytic in an
//! annulus around the circle, so grids are tensor products of `N`-point
//! root-of-unity grids with `N` a power of two. Summation is a
//! fixed-shape pairwise tree, which makes results bit-identical across
//! runs and thread counts; evaluation may fan out across threads but the
//! reduction shape never depends on the thread count.
//!
//! For univariate integrands whose correct contour must enclose a few
//! simple poles outside the unit circle (and exclude their reciprocals),
//! [`integrate_deformed_1d`] adds numeric residue corrections on small
//! circles.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};

/// Per-dimension grid sizes; powers of two, at least 8.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub sizes: Vec<usize>,
}

impl Grid {
    pub fn new(sizes: Vec<usize>) -> Result<Grid> {
        for &n in &sizes {
            if n < 8 || !n.is_power_of_two() {
                return Err(CoreError::GridInvalid(n));
            }
        }
        Ok(Grid { sizes })
    }

    pub fn uniform(n: usize, dims: usize) -> Result<Grid> {
        Grid::new(vec![n; dims])
    }

    pub fn total_points(&self) -> usize {
        self.sizes.iter().product()
    }
}

/// Convergence policy for grid doubling.
#[derive(Clone, Copy, Debug)]
pub struct QuadPolicy {
    pub n0: usize,
    pub n_max: usize,
    pub rtol: f64,
}

impl QuadPolicy {
    /// Defaults per total dimension: rtol 1e-9 up to two variables,
    /// 1e-5 for three; N capped at 1024 / 512 / 256. The refinement
    /// delta at grid N certifies the error of grid N/2, so the caps are
    /// sized for coefficients approaching the 0.95 contour margin:
    /// 0.95^512 clears 1e-9 while 0.95^256 does not.
    pub fn for_dim(dim: usize) -> QuadPolicy {
        match dim {
            0 | 1 => QuadPolicy {
                n0: 32,
                n_max: 1024,
                rtol: 1e-9,
            },
            2 => QuadPolicy {
                n0: 32,
                n_max: 512,
                rtol: 1e-9,
            },
            _ => QuadPolicy {
                n0: 32,
                n_max: 256,
                rtol: 1e-5,
            },
        }
    }

    pub fn with_n_max(self, n_max: usize) -> QuadPolicy {
        QuadPolicy { n_max, ..self }
    }

    pub fn with_rtol(self, rtol: f64) -> QuadPolicy {
        QuadPolicy { rtol, ..self }
    }
}

/// Result of a converged (or capped) quadrature.
#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    /// `|value(N) - value(N/2)| / max(1, |value(N)|)` at the final grid.
    pub last_delta: f64,
    /// Per-refinement relative deltas, one per doubling.
    pub deltas: Vec<f64>,
    /// Grid sizes used, e.g. `[32, 64, 128]`.
    pub grids: Vec<usize>,
    pub converged: bool,
}

impl QuadResult {
    pub fn require_converged(&self, rtol: f64) -> Result<()> {
        if !self.converged {
            return Err(CoreError::NonConvergence {
                delta: self.last_delta,
                rtol,
                n: *self.grids.last().unwrap_or(&0),
            });
        }
        Ok(())
    }
}

const LEAF: usize = 64;
const PAR_THRESHOLD: usize = 8192;

/// Fixed-shape pairwise tree sum; bit-identical for any thread count.
pub fn tree_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= LEAF {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    let (lo, hi) = values.split_at(mid);
    if values.len() >= PAR_THRESHOLD {
        let (a, b) = rayon::join(|| tree_sum(lo), || tree_sum(hi));
        a + b
    } else {
        tree_sum(lo) + tree_sum(hi)
    }
}

fn decode_index(mut flat: usize, sizes: &[usize], out: &mut [usize]) {
    for (slot, &n) in out.iter_mut().zip(sizes).rev() {
        *slot = flat % n;
        flat /= n;
    }
}

/// Average of `f` over the tensor grid `z_j = exp(2 pi i k_j / N_j)`.
pub fn integrate_torus<F>(f: F, dims: usize, grid: &Grid) -> Result<Complex64>
where
    F: Fn(&[Complex64]) -> Result<Complex64> + Sync,
{
    assert_eq!(grid.sizes.len(), dims, "grid rank mismatch");
    // Root tables per dimension size.
    let roots: Vec<Vec<Complex64>> = grid
        .sizes
        .iter()
        .map(|&n| {
            (0..n)
                .map(|k| {
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
                })
                .collect()
        })
        .collect();
    let total = grid.total_points();
    let values: Vec<Result<Complex64>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0usize; dims];
            decode_index(flat, &grid.sizes, &mut idx);
            let z: Vec<Complex64> = idx.iter().enumerate().map(|(d, &k)| roots[d][k]).collect();
            f(&z)
        })
        .collect();
    let mut flat = Vec::with_capacity(total);
    for v in values {
        flat.push(v?);
    }
    Ok(tree_sum(&flat) / total as f64)
}

/// Same quadrature, but the integrand receives grid indices; used by
/// table-driven densities where every gamma value is a lookup.
pub fn integrate_indexed<F>(f: F, sizes: &[usize]) -> Complex64
where
    F: Fn(&[usize]) -> Complex64 + Sync,
{
    let total: usize = sizes.iter().product();
    let values: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0usize; sizes.len()];
            decode_index(flat, sizes, &mut idx);
            f(&idx)
        })
        .collect();
    tree_sum(&values) / total as f64
}

/// Doubles all grid sizes until the relative refinement delta drops below
/// `policy.rtol` or `policy.n_max` is reached; non-convergence is flagged,
/// never silent.
pub fn integrate_converged<F>(f: F, dims: usize, policy: &QuadPolicy) -> Result<QuadResult>
where
    F: Fn(&[Complex64]) -> Result<Complex64> + Sync,
{
    let mut n = policy.n0;
    let mut grids = vec![n];
    let mut value = integrate_torus(&f, dims, &Grid::uniform(n, dims)?)?;
    let mut deltas = Vec::new();
    let mut converged = false;
    while n * 2 <= policy.n_max {
        n *= 2;
        let next = integrate_torus(&f, dims, &Grid::uniform(n, dims)?)?;
        let delta = (next - value).norm() / next.norm().max(1.0);
        grids.push(n);
        deltas.push(delta);
        value = next;
        if delta <= policy.rtol {
            converged = true;
            break;
        }
    }
    Ok(QuadResult {
        value,
        last_delta: deltas.last().copied().unwrap_or(f64::NAN),
        deltas,
        grids,
        converged,
    })
}

/// A pole of a univariate integrand lying off the unit circle that the
/// correct contour must enclose.
#[derive(Clone, Debug)]
pub struct RegisteredPole {
    pub location: Complex64,
    pub origin: String,
}

/// Poles (all strictly outside `|z| = 1`) that the deformed contour
/// encloses; their reciprocals are excluded.
#[derive(Clone, Debug, Default)]
pub struct PoleRegistry {
    pub poles: Vec<RegisteredPole>,
}

impl PoleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, location: Complex64, origin: impl Into<String>) {
        self.poles.push(RegisteredPole {
            location,
            origin: origin.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    fn validate(&self) -> Result<()> {
        for p in &self.poles {
            let r = p.location.norm();
            if (r - 1.0).abs() <= 1e-10 {
                return Err(CoreError::RegistryInvalid(format!(
                    "pole {} ({}) lies on the unit circle",
                    p.location, p.origin
                )));
            }
            if r < 1.0 {
                return Err(CoreError::RegistryInvalid(format!(
                    "pole {} ({}) lies inside the unit circle; register the outside point",
                    p.location, p.origin
                )));
            }
        }
        for (i, a) in self.poles.iter().enumerate() {
            for b in self.poles.iter().skip(i + 1) {
                if (a.location - b.location).norm() < 1e-8 {
                    return Err(CoreError::RegistryInvalid(format!(
                        "poles {} and {} coincide",
                        a.origin, b.origin
                    )));
                }
            }
        }
        Ok(())
    }

    /// All registered points and their reciprocals.
    fn all_points(&self) -> Vec<Complex64> {
        let mut pts: Vec<Complex64> = self.poles.iter().map(|p| p.location).collect();
        pts.extend(self.poles.iter().map(|p| p.location.inv()));
        pts
    }
}

/// `(1/N) sum_k f(center + radius w_k) radius w_k` over the `N`-th roots
/// of unity: the residue of `f` at `center` when `f` is analytic on the
/// circle and `center` is the only enclosed singularity. Evaluation fans
/// out across threads; the reduction is the fixed pairwise tree.
pub fn residue_numeric<F>(f: F, center: Complex64, radius: f64, n: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if !(radius > 0.0) {
        return Err(CoreError::RegistryInvalid(format!(
            "residue radius {radius} invalid"
        )));
    }
    let values: Vec<Result<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            Ok(f(center + radius * w)? * radius * w)
        })
        .collect();
    let mut flat = Vec::with_capacity(n);
    for v in values {
        flat.push(v?);
    }
    Ok(tree_sum(&flat) / n as f64)
}

/// Residue with a two-radius consistency check. The initial radius only
/// accounts for the registered poles, so a circle may stray near some
/// other singularity of the integrand; shrinking the radius walks away
/// from anything not at the center itself.
fn residue_checked<F>(f: &F, center: Complex64, radius: f64, scale_hint: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let mut r = radius;
    let mut outer = residue_numeric(f, center, r, 64)?;
    let mut delta = f64::INFINITY;
    for _ in 0..5 {
        let inner = residue_numeric(f, center, r / 2.0, 64)?;
        delta = (outer - inner).norm();
        if delta <= 1e-8 * inner.norm().max(scale_hint).max(1e-30) {
            return Ok(inner);
        }
        r /= 2.0;
        outer = inner;
    }
    Err(CoreError::ResidueUnstable {
        r: 2.0 * r,
        r_half: r,
        delta,
    })
}

/// One enclosed pole's contribution to the deformed contour.
#[derive(Clone, Debug)]
pub struct Correction {
    pub pole: Complex64,
    /// Residue of `f(z)/z` at the pole (added: the contour gains it).
    pub added: Complex64,
    /// Residue of `f(z)/z` at the reciprocal point (subtracted: the
    /// contour loses it relative to the unit circle).
    pub subtracted: Complex64,
}

/// Value and intermediate terms of a deformed 1-D integral.
#[derive(Clone, Debug)]
pub struct DeformedResult {
    pub value: Complex64,
    pub torus: QuadResult,
    pub corrections: Vec<Correction>,
    /// Magnitude of the largest intermediate term; the natural yardstick
    /// for "this integral is numerically zero".
    pub scale: f64,
}

/// Unit-circle integral of `density` (against `d theta / 2 pi`) plus
/// residue corrections, equal to the integral over a contour that
/// encloses every registered pole and excludes its reciprocal.
///
/// With `I_C = (1/2 pi i) \oint_C f(z) dz / z`, moving the contour across
/// a registered pole `x` (outside the circle) gains the residue of
/// `f(z)/z` there, and excluding the reciprocal pole `1/x` (inside the
/// circle) loses that residue; the `z -> 1/z` symmetry of the catalog's
/// integrands pairs the two. Residues are computed numerically on small
/// circles and validated at two radii.
pub fn integrate_deformed_1d<F>(
    density: F,
    registry: &PoleRegistry,
    policy: &QuadPolicy,
) -> Result<DeformedResult>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    registry.validate()?;
    let torus = integrate_converged(|z: &[Complex64]| density(z[0]), 1, policy)?;
    let mut value = torus.value;
    let mut scale = torus.value.norm();
    let mut corrections = Vec::new();
    let quotient = |z: Complex64| -> Result<Complex64> { Ok(density(z)? / z) };
    let points = registry.all_points();
    for pole in &registry.poles {
        let x = pole.location;
        let radius_at = |center: Complex64, to_circle: f64| -> f64 {
            let mut r = to_circle;
            for &other in &points {
                if (other - center).norm() > 1e-12 {
                    r = r.min((other - center).norm());
                }
            }
            // Keep the circle well away from z = 0 (and from the wild
            // growth of the integrand toward it).
            (0.2 * r).min(0.35 * center.norm())
        };
        let r_out = radius_at(x, x.norm() - 1.0);
        let added = residue_checked(&quotient, x, r_out, scale)?;
        let xr = x.inv();
        let r_in = radius_at(xr, 1.0 - xr.norm());
        let subtracted = residue_checked(&quotient, xr, r_in, scale)?;
        value += added - subtracted;
        scale = scale.max(added.norm()).max(subtracted.norm());
        corrections.push(Correction {
            pole: x,
            added,
            subtracted,
        });
    }
    Ok(DeformedResult {
        value,
        torus,
        corrections,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![32, 64]).is_ok());
        assert!(Grid::new(vec![4]).is_err());
        assert!(Grid::new(vec![48]).is_err());
    }

    #[test]
    fn constant_density() {
        let g = Grid::uniform(16, 2).unwrap();
        let v = integrate_torus(|_| Ok(c(2.5, -1.0)), 2, &g).unwrap();
        assert!((v - c(2.5, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn monomial_orthogonality() {
        let g = Grid::uniform(32, 1).unwrap();
        let v = integrate_torus(|z| Ok(z[0].powi(3)), 1, &g).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn geometric_series_constant_mode() {
        let g = Grid::uniform(64, 1).unwrap();
        let v = integrate_torus(|z| Ok((c(1.0, 0.0) - 0.5 * z[0]).inv()), 1, &g).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn converged_analytic_decay() {
        // Pole at radius 1/0.7 ~ 1.43: deltas shrink by >= 10x per
        // doubling until the floating-point floor.
        let policy = QuadPolicy {
            n0: 8,
            n_max: 256,
            rtol: 1e-14,
        };
        let r = integrate_converged(|z| Ok((c(1.0, 0.0) - 0.7 * z[0]).inv()), 1, &policy).unwrap();
        for pair in r.deltas.windows(2) {
            if pair[0] > 1e-13 {
                assert!(
                    pair[1] <= pair[0] / 10.0,
                    "deltas {:?} not geometric",
                    r.deltas
                );
            }
        }
    }

    #[test]
    fn converged_constant_immediately() {
        let policy = QuadPolicy::for_dim(1);
        let r = integrate_converged(|_| Ok(c(3.0, 0.0)), 1, &policy).unwrap();
        assert!(r.converged);
        assert_eq!(r.grids, vec![32, 64]);
    }

    #[test]
    fn near_circle_pole_flags_nonconvergence() {
        let policy = QuadPolicy {
            n0: 32,
            n_max: 512,
            rtol: 1e-9,
        };
        let r = integrate_converged(
            |z| Ok((c(1.0, 0.0) - z[0] / 1.001).inv()),
            1,
            &policy,
        )
        .unwrap();
        assert!(!r.converged);
        assert!(r.require_converged(policy.rtol).is_err());
    }

    #[test]
    fn residue_simple_pole() {
        let a = c(0.4, 0.2);
        let v = residue_numeric(|z| Ok((z - a).inv()), a, 0.1, 64).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn residue_weighted_pole() {
        let a = c(-0.3, 0.5);
        let g = |z: Complex64| z * z + c(1.0, -2.0);
        let v = residue_numeric(|z| Ok(g(z) / (z - a)), a, 0.08, 64).unwrap();
        assert!((v - g(a)).norm() < 1e-12);
    }

    #[test]
    fn residue_elliptic_gamma_pole() {
        // z -> Gamma(c/z) has a simple pole at z = c; compare the circle
        // estimate against the (z - c) f(z) limit route.
        use crate::efun::{egamma, Base, TruncationPolicy};
        let base = Base::real(0.2, 0.15).unwrap();
        let pol = TruncationPolicy::default();
        let cc = c(1.7, 0.4);
        let f = |z: Complex64| egamma(cc / z, &base, &pol);
        let via_circle = residue_numeric(&f, cc, 0.05, 64).unwrap();
        let mut prev = None;
        for eps in [1e-4, 1e-5] {
            let z = cc + c(eps, 0.0);
            let est = (z - cc) * f(z).unwrap();
            if let Some(p) = prev {
                let richardson: Complex64 = est + (est - p) / 9.0;
                let _ = richardson;
            }
            prev = Some(est);
        }
        // Extrapolate linearly from the two offsets.
        let z1 = cc + c(1e-4, 0.0);
        let z2 = cc + c(5e-5, 0.0);
        let e1 = (z1 - cc) * f(z1).unwrap();
        let e2 = (z2 - cc) * f(z2).unwrap();
        let limit = e2 + (e2 - e1);
        assert!(
            (via_circle - limit).norm() <= 1e-4 * limit.norm(),
            "circle {via_circle} vs limit {limit}"
        );
    }

    #[test]
    fn deformed_empty_registry_is_torus() {
        let registry = PoleRegistry::new();
        let policy = QuadPolicy::for_dim(1);
        let f = |z: Complex64| Ok((c(1.0, 0.0) - 0.5 * z).inv());
        let d = integrate_deformed_1d(f, &registry, &policy).unwrap();
        let t = integrate_converged(|z: &[Complex64]| f(z[0]), 1, &policy).unwrap();
        assert_eq!(d.value, t.value);
    }

    #[test]
    fn deformed_rational_model() {
        // f(z) = z / ((z-a)(z-1/a)) with |a| > 1: enclosing a and
        // excluding 1/a turns the integral from -r into +r, where
        // r = 1/(a - 1/a).
        let a = c(1.8, 0.7);
        let f = move |z: Complex64| Ok(z / ((z - a) * (z - a.inv())));
        let mut registry = PoleRegistry::new();
        registry.register(a, "model pole");
        let policy = QuadPolicy::for_dim(1);
        let d = integrate_deformed_1d(f, &registry, &policy).unwrap();
        let r = (a - a.inv()).inv();
        assert!((d.value - r).norm() < 1e-10 * r.norm());
        assert!((d.torus.value + r).norm() < 1e-10 * r.norm());
    }

    #[test]
    fn registry_rejects_on_circle_and_inside() {
        let mut registry = PoleRegistry::new();
        registry.register(c(1.0, 0.0), "on circle");
        let policy = QuadPolicy::for_dim(1);
        assert!(integrate_deformed_1d(|_| Ok(c(0.0, 0.0)), &registry, &policy).is_err());
        let mut registry = PoleRegistry::new();
        registry.register(c(0.5, 0.0), "inside");
        assert!(integrate_deformed_1d(|_| Ok(c(0.0, 0.0)), &registry, &policy).is_err());
    }

    #[test]
    fn indexed_matches_pointwise() {
        let sizes = [16usize, 16];
        let roots: Vec<Complex64> = (0..16)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 16.0))
            .collect();
        let vi = integrate_indexed(
            |idx| roots[idx[0]] * roots[idx[1]] + c(2.0, 0.0),
            &sizes,
        );
        let g = Grid::new(sizes.to_vec()).unwrap();
        let vp = integrate_torus(|z| Ok(z[0] * z[1] + c(2.0, 0.0)), 2, &g).unwrap();
        assert!((vi - vp).norm() < 1e-15);
    }

    #[test]
    fn tree_sum_matches_naive() {
        let values: Vec<Complex64> = (0..1000)
            .map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let naive: Complex64 = values.iter().sum();
        assert!((tree_sum(&values) - naive).norm() < 1e-10);
    }
}

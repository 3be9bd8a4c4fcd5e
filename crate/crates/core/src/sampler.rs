//! Deterministic generation of parameter assignments satisfying an
//! entry's balancing relations and contour windows.
//!
//! Free parameters are drawn with log-uniform modulus around the entry's
//! window center and uniform phase; balancing is multiplicative, so
//! solved parameters then land in-window with high probability.
//! Everything is keyed by `(entry, n, m, seed)` through a counter-based
//! generator: identical seeds give identical assignments, byte for byte.

use num_complex::Complex64;

use crate::efun::Base;
use crate::error::{CoreError, Result};
use crate::ispec::contour_report;
use crate::schema::{ResolvedEntry, ResolvedSample};
use crate::symalg::Assignment;

/// SplitMix64: tiny, stable across platforms, good enough for drawing
/// moduli and phases.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The RNG key for one sampling run.
pub fn rng_for(entry: &str, n: i64, m: i64, seed: u64) -> SplitMix64 {
    let mut key = entry.as_bytes().to_vec();
    key.extend_from_slice(&n.to_le_bytes());
    key.extend_from_slice(&m.to_le_bytes());
    key.extend_from_slice(&seed.to_le_bytes());
    SplitMix64::new(fnv1a(&key))
}

/// Window policy applied on top of the entry's own windows.
#[derive(Clone, Copy, Debug)]
pub struct SampleWindow {
    /// Margin kept from every contour bound: `|coef| <= 1 - margin`.
    pub margin: f64,
    /// Refuse entries whose balancing forces a modulus outside the unit
    /// circle (the deformed-contour entries).
    pub unit_circle_only: bool,
}

impl Default for SampleWindow {
    fn default() -> Self {
        SampleWindow {
            margin: 0.05,
            unit_circle_only: false,
        }
    }
}

/// A sampled assignment plus how many attempts it took.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub assignment: Assignment,
    pub attempts: usize,
}

const MAX_ATTEMPTS: usize = 24;
/// Solved parameters must satisfy their relations this tightly.
const SOLVE_RTOL: f64 = 1e-14;

/// Draws an assignment for `entry` at `base`. Dependent parameters are
/// solved through the balancing relations; the result passes every
/// entry window and both sides' contour checks with the window margin,
/// except for coefficients involving a registered deformation generator
/// (those are governed by the entry windows instead).
pub fn sample_params(
    entry: &ResolvedEntry,
    base: &Base,
    seed: u64,
    s_sign: i8,
    window: &SampleWindow,
) -> Result<Sampled> {
    base.validate()?;
    if entry.base.real_required && !base.is_real() {
        return Err(CoreError::HalfVariantComplexBase);
    }
    if base.max_modulus() > entry.base.max_modulus {
        return Err(CoreError::WindowInfeasible(format!(
            "entry `{}` needs |p|, |q| <= {}, got {}",
            entry.name,
            entry.base.max_modulus,
            base.max_modulus()
        )));
    }
    if window.unit_circle_only && !entry.deform.is_empty() {
        return Err(CoreError::WindowInfeasible(format!(
            "entry `{}`: the balancing modulus equation forces |{}| >= 1, \
             so no unit-circle-only window exists",
            entry.name,
            entry.deform.join(", ")
        )));
    }
    let mut rng = rng_for(&entry.name, entry.n, entry.m, seed);
    let mut last_reason = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let assignment = draw(entry, base, s_sign, &mut rng)?;
        match check(entry, &assignment, window.margin) {
            Ok(()) => {
                return Ok(Sampled {
                    assignment,
                    attempts: attempt,
                })
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(CoreError::SamplingFailed {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn draw(
    entry: &ResolvedEntry,
    base: &Base,
    s_sign: i8,
    rng: &mut SplitMix64,
) -> Result<Assignment> {
    let mut values = Assignment::new();
    values.insert("p".into(), base.p);
    values.insert("q".into(), base.q);
    for gen in &entry.generators {
        match &gen.sample {
            ResolvedSample::Solved => {}
            ResolvedSample::Modulus {
                terms,
                scale,
                real_positive,
            } => {
                let mut center = *scale;
                for (sym, e) in terms {
                    let v = values
                        .get(sym)
                        .ok_or_else(|| CoreError::MissingAssignment(sym.clone()))?;
                    center *= v.norm().powf(*e);
                }
                let r = center * (entry.jitter * rng.next_signed()).exp();
                let value = if *real_positive {
                    Complex64::new(r, 0.0)
                } else {
                    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * rng.next_f64())
                };
                values.insert(gen.name.clone(), value);
            }
            ResolvedSample::Balanced { family } => {
                let center = balanced_center(entry, family, &values)?;
                let r = center * (entry.jitter * rng.next_signed()).exp();
                let value =
                    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * rng.next_f64());
                values.insert(gen.name.clone(), value);
            }
            ResolvedSample::DerivedSqrt { square } => {
                let value = square.eval(&values)?.sqrt() * s_sign as f64;
                values.insert(gen.name.clone(), value);
            }
        }
    }
    // Dependent parameters, in relation order.
    for rel in &entry.relations.relations {
        if !values.contains_key(&rel.solve_for) {
            let value = rel.solved()?.eval(&values)?;
            values.insert(rel.solve_for.clone(), value);
        }
    }
    Ok(values)
}

/// Center modulus for a balanced family: the relation that eliminates one
/// of its members, with every member at modulus `c`, forces
/// `c^count = |rhs| / |rest of lhs|`.
fn balanced_center(
    entry: &ResolvedEntry,
    family: &str,
    values: &Assignment,
) -> Result<f64> {
    let members = entry
        .families
        .get(family)
        .ok_or_else(|| CoreError::WindowInfeasible(format!("no family `{family}`")))?;
    let rel = entry
        .relations
        .relations
        .iter()
        .find(|r| members.contains(&r.solve_for))
        .ok_or_else(|| {
            CoreError::WindowInfeasible(format!(
                "balanced family `{family}` has no eliminating relation"
            ))
        })?;
    let mut rest_norm = 1.0f64;
    let mut count = 0usize;
    for g in rel.lhs.generators() {
        let e8 = rel.lhs.exp_eighths(g);
        if members.iter().any(|mem| mem == g) {
            assert_eq!(e8, 8, "balanced member `{g}` must appear to the first power");
            count += 1;
        } else {
            let v = values
                .get(g)
                .ok_or_else(|| CoreError::MissingAssignment(g.to_string()))?;
            rest_norm *= v.norm().powf(e8 as f64 / 8.0);
        }
    }
    let mut rhs_norm = 1.0f64;
    for g in rel.rhs.generators() {
        let v = values
            .get(g)
            .ok_or_else(|| CoreError::MissingAssignment(g.to_string()))?;
        rhs_norm *= v.norm().powf(rel.rhs.exp_eighths(g) as f64 / 8.0);
    }
    assert!(count > 0, "family `{family}` absent from its relation");
    Ok((rhs_norm / rest_norm).powf(1.0 / count as f64))
}

/// Public check used for caller-supplied assignments: relations, entry
/// windows, and contour margins on every side.
pub fn validate_assignment(entry: &ResolvedEntry, values: &Assignment, margin: f64) -> Result<()> {
    check(entry, values, margin).map_err(CoreError::WindowInfeasible)
}

/// Rejects an assignment that violates a relation, a window, or a contour
/// margin (deformation coefficients excepted).
fn check(entry: &ResolvedEntry, values: &Assignment, margin: f64) -> std::result::Result<(), String> {
    for rel in &entry.relations.relations {
        match rel.residual(values) {
            Ok(r) if r <= SOLVE_RTOL => {}
            Ok(r) => return Err(format!("relation {} = {} residual {r:e}", rel.lhs, rel.rhs)),
            Err(e) => return Err(e.to_string()),
        }
    }
    for (mono, desc) in &entry.windows {
        match mono.eval(values) {
            Ok(v) if v.norm() <= 1.0 - margin => {}
            Ok(v) => {
                return Err(format!(
                    "window |{mono}| = {:.4} > {:.4} ({desc})",
                    v.norm(),
                    1.0 - margin
                ))
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    let specs = std::iter::once(&entry.lhs).chain(entry.forms.iter().map(|f| &f.integral));
    for spec in specs {
        let report = contour_report(spec, values).map_err(|e| e.to_string())?;
        for e in &report.entries {
            if e.margin < margin {
                let deformed = entry
                    .deform
                    .iter()
                    .any(|g| e.coef.exp_eighths(g) != 0);
                if !deformed {
                    return Err(format!(
                        "contour margin {:.4} < {margin} at {}",
                        e.margin, e.desc
                    ));
                }
            }
        }
    }
    Ok(())
}

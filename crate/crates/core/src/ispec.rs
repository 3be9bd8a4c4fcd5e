//! Machine-readable description and evaluation of the catalog's integrals.
//!
//! An [`IntegralSpec`] lists ordered variable groups (each with a type-I
//! or type-II kernel) and gamma factors whose slots expand over every
//! variable of a group and both signs, following the convention
//! `Gamma(x z^{±1}) = prod_j Gamma(x z_j^{±1})`. Specs are immutable
//! after construction and evaluation is reentrant.
//!
//! Evaluation compiles the spec against a parameter assignment into a
//! flat list of pieces. On a grid every gamma argument is a coefficient
//! times a root of unity, so each piece owns one table of
//! `Gamma_B(c w^k)` values per grid size and a density evaluation is a
//! handful of table lookups.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::efun::{egamma, egamma_recip, Base, GammaVariant, TruncationPolicy};
use crate::error::{CoreError, Result};
use crate::kernels::{kernel_constant, KernelFamily, KernelSpec};
use crate::quad::{integrate_converged, integrate_indexed, QuadPolicy, QuadResult};
use crate::symalg::{Assignment, Monomial, RelationSet};

/// Which variables of a group a slot expands over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotIndex {
    /// Every variable of the group (the paper-style orbit product).
    Each,
    /// One specific variable (0-based).
    Specific(usize),
}

/// One variable-group attachment of a factor: `z^{±exp}` over the chosen
/// variables of `group`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub group: String,
    pub exp: u8,
    pub index: SlotIndex,
}

/// A gamma factor `Gamma_v(coef * <slot orbits>)`; at most two slots.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpec {
    pub variant: GammaVariant,
    pub coef: Monomial,
    pub slots: Vec<Slot>,
}

/// An ordered integration-variable group.
#[derive(Clone, Debug, PartialEq)]
pub struct VarGroup {
    pub name: String,
    pub kernel: KernelSpec,
}

impl VarGroup {
    pub fn dim(&self) -> usize {
        self.kernel.dim
    }
}

/// One side of an identity: nested groups (outermost first), gamma
/// factors, and the balancing relations the parameters must satisfy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegralSpec {
    pub groups: Vec<VarGroup>,
    pub factors: Vec<FactorSpec>,
    pub balancing: RelationSet,
}

/// A variable-free product of gammas.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefFactor {
    pub variant: GammaVariant,
    pub coef: Monomial,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrefactorSpec {
    pub factors: Vec<PrefFactor>,
}

impl IntegralSpec {
    pub fn total_dim(&self) -> usize {
        self.groups.iter().map(|g| g.dim()).sum()
    }

    /// Drops empty groups (they contribute factor 1) together with every
    /// factor slotted on them, whose orbit product is empty.
    pub fn collapse(&self) -> IntegralSpec {
        let dead: Vec<&str> = self
            .groups
            .iter()
            .filter(|g| g.dim() == 0)
            .map(|g| g.name.as_str())
            .collect();
        IntegralSpec {
            groups: self
                .groups
                .iter()
                .filter(|g| g.dim() > 0)
                .cloned()
                .collect(),
            factors: self
                .factors
                .iter()
                .filter(|f| !f.slots.iter().any(|s| dead.contains(&s.group.as_str())))
                .cloned()
                .collect(),
            balancing: self.balancing.clone(),
        }
    }

    fn group(&self, name: &str) -> Result<&VarGroup> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| CoreError::UnknownGroup(name.to_string()))
    }
}

/// Every balancing relation must hold to this relative residual.
pub const BALANCING_RTOL: f64 = 1e-13;

pub fn validate_balancing(spec: &IntegralSpec, params: &Assignment) -> Result<()> {
    for rel in &spec.balancing.relations {
        let residual = rel.residual(params)?;
        if residual > BALANCING_RTOL {
            return Err(CoreError::BalancingViolation {
                relation: format!("{} = {}", rel.lhs, rel.rhs),
                residual,
            });
        }
    }
    Ok(())
}

/// One coefficient's unit-circle admissibility record.
#[derive(Clone, Debug)]
pub struct ContourEntry {
    pub desc: String,
    pub coef: Monomial,
    pub modulus: f64,
    /// `1 - modulus`; positive means inside the unit circle.
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct ContourReport {
    pub entries: Vec<ContourEntry>,
}

impl ContourReport {
    pub fn ok(&self) -> bool {
        self.entries.iter().all(|e| e.margin > 0.0)
    }

    pub fn min_margin(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> Vec<&ContourEntry> {
        self.entries.iter().filter(|e| e.margin <= 0.0).collect()
    }
}

/// Checks `|coef| < 1` for every factor coefficient (all slots expand to
/// orbits containing positive powers) and `|t| < 1` for type-II kernels.
pub fn contour_report(spec: &IntegralSpec, params: &Assignment) -> Result<ContourReport> {
    let spec = spec.collapse();
    let mut entries = Vec::new();
    for g in &spec.groups {
        if g.kernel.family == KernelFamily::TypeII {
            let t = g
                .kernel
                .t
                .as_ref()
                .expect("type-II kernel carries its cross parameter");
            let modulus = t.eval(params)?.norm();
            entries.push(ContourEntry {
                desc: format!("kernel t of group `{}`", g.name),
                coef: t.clone(),
                modulus,
                margin: 1.0 - modulus,
            });
        }
    }
    for (i, f) in spec.factors.iter().enumerate() {
        if f.slots.is_empty() {
            continue;
        }
        let modulus = f.coef.eval(params)?.norm();
        let slots: Vec<String> = f
            .slots
            .iter()
            .map(|s| format!("{}^±{}", s.group, s.exp))
            .collect();
        entries.push(ContourEntry {
            desc: format!("factor #{i} Γ({} {})", f.coef, slots.join(" ")),
            coef: f.coef.clone(),
            modulus,
            margin: 1.0 - modulus,
        });
    }
    Ok(ContourReport { entries })
}

/// A compiled multiplicative piece of the density.
#[derive(Clone, Debug)]
enum Piece {
    /// `Gamma_B(c z^{+e}) Gamma_B(c z^{-e})`
    Single {
        base: usize,
        coef: Complex64,
        var: usize,
        exp: i64,
    },
    /// `Gamma_B(c z1^{±e1} z2^{±e2})`: all four sign choices.
    Cross {
        base: usize,
        coef: Complex64,
        v1: usize,
        e1: i64,
        v2: usize,
        e2: i64,
    },
    /// `1 / Gamma_B(z1^{±1} z2^{±1})`
    RecipPair { base: usize, v1: usize, v2: usize },
    /// `1 / Gamma_B(z^{±2})`
    RecipSquare { base: usize, var: usize },
}

/// A density compiled against one parameter assignment.
pub struct CompiledDensity {
    dim: usize,
    constant: Complex64,
    pieces: Vec<Piece>,
    bases: Vec<Base>,
    pol: TruncationPolicy,
}

impl CompiledDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> Complex64 {
        self.constant
    }

    /// Direct evaluation at an arbitrary point (not restricted to grid
    /// nodes); used by iterated and deformed-contour integration.
    pub fn eval_point(&self, z: &[Complex64]) -> Result<Complex64> {
        assert_eq!(z.len(), self.dim);
        let mut acc = self.constant;
        for piece in &self.pieces {
            acc *= match piece {
                Piece::Single {
                    base,
                    coef,
                    var,
                    exp,
                } => {
                    let zp = z[*var].powi(*exp as i32);
                    egamma(coef * zp, &self.bases[*base], &self.pol)?
                        * egamma(coef / zp, &self.bases[*base], &self.pol)?
                }
                Piece::Cross {
                    base,
                    coef,
                    v1,
                    e1,
                    v2,
                    e2,
                } => {
                    let a = z[*v1].powi(*e1 as i32);
                    let b = z[*v2].powi(*e2 as i32);
                    let bb = &self.bases[*base];
                    egamma(coef * a * b, bb, &self.pol)?
                        * egamma(coef * a / b, bb, &self.pol)?
                        * egamma(coef * b / a, bb, &self.pol)?
                        * egamma(coef / (a * b), bb, &self.pol)?
                }
                Piece::RecipPair { base, v1, v2 } => {
                    let (a, b) = (z[*v1], z[*v2]);
                    let bb = &self.bases[*base];
                    egamma_recip(a * b, bb, &self.pol)?
                        * egamma_recip(a / b, bb, &self.pol)?
                        * egamma_recip(b / a, bb, &self.pol)?
                        * egamma_recip((a * b).inv(), bb, &self.pol)?
                }
                Piece::RecipSquare { base, var } => {
                    let z2 = z[*var] * z[*var];
                    egamma_recip(z2, &self.bases[*base], &self.pol)?
                        * egamma_recip(z2.inv(), &self.bases[*base], &self.pol)?
                }
            };
        }
        Ok(acc)
    }

    /// Average over the joint `N^dim` grid using per-coefficient gamma
    /// tables (each gamma value is computed once per grid refinement).
    pub fn average_on_grid(&self, n: usize) -> Result<Complex64> {
        let tables = self.build_tables(n)?;
        let sizes = vec![n; self.dim];
        let constant = self.constant;
        let value = integrate_indexed(
            |idx| {
                let mut acc = constant;
                for (piece, table) in self.pieces.iter().zip(&tables.per_piece) {
                    acc *= piece_lookup(piece, idx, n, &tables.tables[*table]);
                }
                acc
            },
            &sizes,
        );
        Ok(value)
    }

    fn build_tables(&self, n: usize) -> Result<TableSet> {
        let mut tables: Vec<Vec<Complex64>> = Vec::new();
        let mut gamma_keys: HashMap<(usize, u64, u64), usize> = HashMap::new();
        let mut recip_keys: HashMap<usize, usize> = HashMap::new();
        let mut per_piece = Vec::with_capacity(self.pieces.len());
        for piece in &self.pieces {
            let idx = match piece {
                Piece::Single { base, coef, .. } | Piece::Cross { base, coef, .. } => {
                    let key = (*base, coef.re.to_bits(), coef.im.to_bits());
                    match gamma_keys.get(&key) {
                        Some(&i) => i,
                        None => {
                            let t =
                                crate::efun::gamma_table(*coef, &self.bases[*base], n, &self.pol)?;
                            tables.push(t);
                            gamma_keys.insert(key, tables.len() - 1);
                            tables.len() - 1
                        }
                    }
                }
                Piece::RecipPair { base, .. } | Piece::RecipSquare { base, .. } => {
                    match recip_keys.get(base) {
                        Some(&i) => i,
                        None => {
                            let t = crate::efun::gamma_recip_unit_table(
                                &self.bases[*base],
                                n,
                                &self.pol,
                            )?;
                            tables.push(t);
                            recip_keys.insert(*base, tables.len() - 1);
                            tables.len() - 1
                        }
                    }
                }
            };
            per_piece.push(idx);
        }
        Ok(TableSet { tables, per_piece })
    }

    /// Grid-doubling quadrature with the table-driven fast path.
    pub fn integrate(&self, policy: &QuadPolicy) -> Result<QuadResult> {
        if self.dim == 0 {
            return Ok(QuadResult {
                value: self.constant,
                last_delta: 0.0,
                deltas: vec![],
                grids: vec![],
                converged: true,
            });
        }
        let mut n = policy.n0;
        let mut grids = vec![n];
        let mut value = self.average_on_grid(n)?;
        let mut deltas = Vec::new();
        let mut converged = false;
        while n * 2 <= policy.n_max {
            n *= 2;
            let next = self.average_on_grid(n)?;
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
}

struct TableSet {
    tables: Vec<Vec<Complex64>>,
    per_piece: Vec<usize>,
}

#[inline]
fn piece_lookup(piece: &Piece, idx: &[usize], n: usize, table: &[Complex64]) -> Complex64 {
    let n = n as i64;
    let at = |k: i64| -> Complex64 { table[k.rem_euclid(n) as usize] };
    match piece {
        Piece::Single { var, exp, .. } => {
            let k = *exp * idx[*var] as i64;
            at(k) * at(-k)
        }
        Piece::Cross { v1, e1, v2, e2, .. } => {
            let a = *e1 * idx[*v1] as i64;
            let b = *e2 * idx[*v2] as i64;
            at(a + b) * at(a - b) * at(b - a) * at(-a - b)
        }
        Piece::RecipPair { v1, v2, .. } => {
            let (a, b) = (idx[*v1] as i64, idx[*v2] as i64);
            at(a + b) * at(a - b) * at(b - a) * at(-a - b)
        }
        Piece::RecipSquare { var, .. } => {
            let k = 2 * idx[*var] as i64;
            at(k) * at(-k)
        }
    }
}

/// Compiles the spec against an assignment: kernels and factors become
/// flat pieces, empty groups are dropped, and every coefficient monomial
/// is evaluated once.
pub fn build_density(
    spec: &IntegralSpec,
    params: &Assignment,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<CompiledDensity> {
    let spec = spec.collapse();
    let mut bases: Vec<Base> = Vec::new();
    let base_idx = |b: Base, bases: &mut Vec<Base>| -> usize {
        if let Some(i) = bases.iter().position(|x| x == &b) {
            i
        } else {
            bases.push(b);
            bases.len() - 1
        }
    };
    // Variable layout: group offsets in declaration order.
    let mut offsets = HashMap::new();
    let mut dim = 0usize;
    for g in &spec.groups {
        offsets.insert(g.name.clone(), dim);
        dim += g.dim();
    }
    let mut constant = Complex64::new(1.0, 0.0);
    let mut pieces = Vec::new();
    for g in &spec.groups {
        let b = g.kernel.variant.resolve(base, false)?;
        let bi = base_idx(b, &mut bases);
        let off = offsets[&g.name];
        let d = g.dim();
        let t_val = match (&g.kernel.family, &g.kernel.t) {
            (KernelFamily::TypeII, Some(t)) => Some(t.eval(params)?),
            (KernelFamily::TypeII, None) => {
                return Err(CoreError::UnsupportedDegree(
                    "type-II kernel without cross parameter".into(),
                ))
            }
            (KernelFamily::TypeI, _) => None,
        };
        constant *= kernel_constant(d, t_val, &bases[bi], pol)?;
        for j in 0..d {
            pieces.push(Piece::RecipSquare {
                base: bi,
                var: off + j,
            });
            for k in (j + 1)..d {
                pieces.push(Piece::RecipPair {
                    base: bi,
                    v1: off + j,
                    v2: off + k,
                });
                if let Some(t) = t_val {
                    pieces.push(Piece::Cross {
                        base: bi,
                        coef: t,
                        v1: off + j,
                        e1: 1,
                        v2: off + k,
                        e2: 1,
                    });
                }
            }
        }
    }
    for f in &spec.factors {
        let b = f.variant.resolve(base, false)?;
        let bi = base_idx(b, &mut bases);
        let coef = f.coef.eval(params)?;
        let expand = |slot: &Slot| -> Result<Vec<usize>> {
            let g = spec.group(&slot.group)?;
            let off = offsets[&slot.group];
            Ok(match slot.index {
                SlotIndex::Each => (0..g.dim()).map(|j| off + j).collect(),
                SlotIndex::Specific(j) => {
                    assert!(j < g.dim(), "specific slot index out of range");
                    vec![off + j]
                }
            })
        };
        match f.slots.len() {
            0 => {
                constant *= egamma(coef, &bases[bi], pol)?;
            }
            1 => {
                let s = &f.slots[0];
                for var in expand(s)? {
                    pieces.push(Piece::Single {
                        base: bi,
                        coef,
                        var,
                        exp: s.exp as i64,
                    });
                }
            }
            2 => {
                let (s1, s2) = (&f.slots[0], &f.slots[1]);
                if s1.group == s2.group {
                    return Err(CoreError::UnsupportedDegree(
                        "both slots of a cross factor attach to one group".into(),
                    ));
                }
                for v1 in expand(s1)? {
                    for v2 in expand(s2)? {
                        pieces.push(Piece::Cross {
                            base: bi,
                            coef,
                            v1,
                            e1: s1.exp as i64,
                            v2,
                            e2: s2.exp as i64,
                        });
                    }
                }
            }
            k => {
                return Err(CoreError::UnsupportedDegree(format!(
                    "factor with {k} slots"
                )))
            }
        }
    }
    Ok(CompiledDensity {
        dim,
        constant,
        pieces,
        bases,
        pol: *pol,
    })
}

/// Validates balancing and contours, then integrates over the joint torus
/// of all groups with grid doubling.
pub fn eval_integral(
    spec: &IntegralSpec,
    params: &Assignment,
    base: &Base,
    policy: &QuadPolicy,
    pol: &TruncationPolicy,
) -> Result<QuadResult> {
    validate_balancing(spec, params)?;
    let report = contour_report(spec, params)?;
    if !report.ok() {
        let worst = report
            .violations()
            .iter()
            .map(|e| format!("{} has |coef| = {:.6}", e.desc, e.modulus))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CoreError::ContourViolation(worst));
    }
    build_density(spec, params, base, pol)?.integrate(policy)
}

/// Product of variable-free gammas; indexed families are already expanded
/// at resolution time. A pole in a prefactor signals a forbidden
/// specialization and is reported as an error.
pub fn eval_prefactor(
    pre: &PrefactorSpec,
    params: &Assignment,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    for f in &pre.factors {
        let b = f.variant.resolve(base, false)?;
        acc *= egamma(f.coef.eval(params)?, &b, pol)?;
    }
    Ok(acc)
}

/// Iterated evaluation: integrates the groups one at a time in the given
/// order (outermost first), each level with its own converged refinement.
/// Plain unit-circle contours only; used to check that nesting order is
/// irrelevant for torus quadrature.
pub fn eval_iterated(
    spec: &IntegralSpec,
    params: &Assignment,
    base: &Base,
    order: &[usize],
    policy: &QuadPolicy,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    let spec = spec.collapse();
    assert_eq!(order.len(), spec.groups.len(), "order must list every group");
    let density = build_density(&spec, params, base, pol)?;
    let mut offsets = Vec::new();
    let mut dim = 0usize;
    for g in &spec.groups {
        offsets.push(dim);
        dim += g.dim();
    }
    let mut z = vec![Complex64::new(0.0, 0.0); dim];
    integrate_level(&density, &spec, &offsets, order, 0, &mut z, policy)
}

fn integrate_level(
    density: &CompiledDensity,
    spec: &IntegralSpec,
    offsets: &[usize],
    order: &[usize],
    level: usize,
    z: &mut Vec<Complex64>,
    policy: &QuadPolicy,
) -> Result<Complex64> {
    if level == order.len() {
        return density.eval_point(z);
    }
    let gi = order[level];
    let d = spec.groups[gi].dim();
    let off = offsets[gi];
    // The inner closure needs its own copy of the fixed coordinates:
    // levels run sequentially but quadrature fans out across threads.
    let snapshot = z.clone();
    let result = integrate_converged(
        |w: &[Complex64]| {
            let mut zz = snapshot.clone();
            zz[off..off + d].copy_from_slice(w);
            integrate_level(density, spec, offsets, order, level + 1, &mut zz, policy)
        },
        d,
        policy,
    )?;
    result.require_converged(policy.rtol)?;
    Ok(result.value)
}

//! JSON data model for catalog entries and Fubini corpus cases.
//!
//! Identities ship as data so new ones can be added without code
//! changes. The data language mirrors how the transformations are
//! written on paper:
//!
//! - monomial strings may carry exponents affine in the orders `n` and
//!   `m`, e.g. `t^(n/2-1)` is written `t^n/2-1`;
//! - `@t` inside a monomial is the product over the whole generator
//!   family `t`;
//! - factor templates expand over a family (`each`), over unordered
//!   pairs (`pairs`), or over ordered cross pairs (`cross`), optionally
//!   multiplied by a stepped monomial `step^i` for `i = 0..count`, and
//!   optionally doubled over a `gen^{±e}` orbit (`orbit`).
//!
//! Resolving an entry at a concrete `(n, m)` produces plain
//! [`IntegralSpec`]s with every exponent a rational with denominator
//! dividing 8.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::efun::GammaVariant;
use crate::error::{CoreError, Result};
use crate::ispec::{FactorSpec, IntegralSpec, PrefFactor, PrefactorSpec, Slot, SlotIndex, VarGroup};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::symalg::{Monomial, Relation, RelationSet};

// ---------------------------------------------------------------------
// Small exact rationals for affine exponent arithmetic.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rat {
    pub num: i64,
    pub den: i64,
}

impl Rat {
    pub fn new(num: i64, den: i64) -> Rat {
        assert!(den != 0);
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        num /= g;
        den /= g;
        Rat { num, den }
    }

    pub const ZERO: Rat = Rat { num: 0, den: 1 };

    fn add(self, o: Rat) -> Rat {
        Rat::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    fn scale(self, k: i64) -> Rat {
        Rat::new(self.num * k, self.den)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// The exponent in eighths, when the denominator divides 8.
    fn to_eighths(self) -> Result<i64> {
        if 8 % self.den != 0 {
            return Err(CoreError::DenominatorOverflow(format!(
                "{}/{}",
                self.num, self.den
            )));
        }
        Ok(self.num * (8 / self.den))
    }

    fn to_integer(self) -> Result<i64> {
        if self.den != 1 {
            return Err(CoreError::DenominatorOverflow(format!(
                "{}/{} is not an integer",
                self.num, self.den
            )));
        }
        Ok(self.num)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `c + cn*n + cm*m`, all rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AffExp {
    pub c: Rat,
    pub cn: Rat,
    pub cm: Rat,
}

impl AffExp {
    pub fn eval(&self, n: i64, m: i64) -> Rat {
        self.c.add(self.cn.scale(n)).add(self.cm.scale(m))
    }
}

/// Parses an affine exponent such as `1`, `-3/2`, `n`, `2n-1`, `n/2-3/4`,
/// `2m+2n+4`. Terms are `INT`, `INT/INT`, or `[INT] (n|m) [/INT]`.
pub fn parse_affine(input: &str) -> Result<AffExp> {
    let err = |reason: &str| CoreError::CatalogData {
        file: String::new(),
        reason: format!("cannot parse exponent `{input}`: {reason}"),
    };
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(err("empty"));
    }
    let mut out = AffExp {
        c: Rat::ZERO,
        cn: Rat::ZERO,
        cm: Rat::ZERO,
    };
    let bytes = s.as_bytes();
    let mut i = 0usize;
    let mut sign = 1i64;
    if bytes[0] == b'+' || bytes[0] == b'-' {
        sign = if bytes[0] == b'-' { -1 } else { 1 };
        i = 1;
    }
    while i < bytes.len() {
        let start = i;
        let mut num: Option<i64> = None;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i > start {
            num = Some(s[start..i].parse().map_err(|_| err("bad integer"))?);
        }
        let var = if i < bytes.len() && (bytes[i] == b'n' || bytes[i] == b'm') {
            let v = bytes[i] as char;
            i += 1;
            Some(v)
        } else {
            None
        };
        let mut den = 1i64;
        if i < bytes.len() && bytes[i] == b'/' {
            i += 1;
            let dstart = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i == dstart {
                return Err(err("missing denominator"));
            }
            den = s[dstart..i].parse().map_err(|_| err("bad denominator"))?;
        }
        if num.is_none() && var.is_none() {
            return Err(err("empty term"));
        }
        let coeff = Rat::new(sign * num.unwrap_or(1), den);
        match var {
            None => out.c = out.c.add(coeff),
            Some('n') => out.cn = out.cn.add(coeff),
            Some('m') => out.cm = out.cm.add(coeff),
            _ => unreachable!(),
        }
        if i < bytes.len() {
            sign = match bytes[i] {
                b'+' => 1,
                b'-' => -1,
                _ => return Err(err("expected + or -")),
            };
            i += 1;
            if i == bytes.len() {
                return Err(err("trailing sign"));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Monomial strings with affine exponents and family products.

/// Expansion context: concrete orders plus family memberships.
pub struct ExpandCtx {
    pub n: i64,
    pub m: i64,
    pub families: BTreeMap<String, Vec<String>>,
}

impl ExpandCtx {
    pub fn family(&self, name: &str) -> Result<&Vec<String>> {
        self.families
            .get(name)
            .ok_or_else(|| CoreError::CatalogData {
                file: String::new(),
                reason: format!("unknown family `@{name}`"),
            })
    }
}

/// Parses a monomial string whose exponents may be affine in `n`, `m`,
/// and which may contain `@fam` family-product tokens.
pub fn parse_monomial(input: &str, ctx: &ExpandCtx) -> Result<Monomial> {
    let err = |reason: String| CoreError::CatalogData {
        file: String::new(),
        reason: format!("cannot parse monomial `{input}`: {reason}"),
    };
    let mut out = Monomial::one();
    for token in input.split(|c: char| c.is_whitespace() || c == '*') {
        if token.is_empty() || token == "1" {
            continue;
        }
        match token {
            "-" => {
                out = out.mul(&Monomial::phase(4));
                continue;
            }
            "i" => {
                out = out.mul(&Monomial::phase(2));
                continue;
            }
            "w" => {
                out = out.mul(&Monomial::phase(1));
                continue;
            }
            _ => {}
        }
        let (tok, neg) = match token.strip_prefix('-') {
            Some(rest) => (rest, true),
            None => (token, false),
        };
        if neg {
            out = out.mul(&Monomial::phase(4));
        }
        if let Some(fam) = tok.strip_prefix('@') {
            for member in ctx.family(fam)? {
                out = out.mul(&Monomial::gen(member));
            }
            continue;
        }
        let (name, exp) = match tok.split_once('^') {
            Some((n, e)) => (n, e),
            None => (tok, "1"),
        };
        if name.is_empty() || !name.chars().next().unwrap().is_ascii_alphabetic() {
            return Err(err(format!("bad generator name `{name}`")));
        }
        let e8 = parse_affine(exp)?.eval(ctx.n, ctx.m).to_eighths()?;
        if e8 != 0 {
            out = out.mul(
                &Monomial::gen_pow(name, e8, 8)
                    .map_err(|e| err(format!("exponent of `{name}`: {e}")))?,
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Serde data model.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// lhs = prefactor * rhs for every listed form.
    Identity,
    /// lhs evaluates to zero on a deformed contour.
    Vanishing,
    /// The two iterated orders of a double integral disagree; one
    /// vanishes, the other matches a closed form.
    IteratedOrder,
}

fn default_kind() -> EntryKind {
    EntryKind::Identity
}

#[derive(Clone, Debug, Deserialize)]
pub struct OrderData {
    pub n: i64,
    #[serde(default)]
    pub m: i64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct BaseConstraints {
    #[serde(default)]
    pub real_required: bool,
    #[serde(default = "default_max_modulus")]
    pub max_modulus: f64,
}

fn default_max_modulus() -> f64 {
    0.35
}

impl Default for BaseConstraints {
    fn default() -> Self {
        BaseConstraints {
            real_required: false,
            max_modulus: default_max_modulus(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct CenterTerm {
    pub sym: String,
    #[serde(default)]
    pub exp: Option<String>,
    /// Extra exponent contribution `inv_n / n`.
    #[serde(default)]
    pub inv_n: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleData {
    /// Log-uniform modulus around `scale * prod |sym|^exp`, uniform phase
    /// (or positive real axis).
    Modulus {
        #[serde(default)]
        center: Vec<CenterTerm>,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        real_positive: bool,
    },
    /// Modulus centered so that the relation eliminating a member of this
    /// family puts every member at the same modulus.
    Balanced,
    /// `sign * sqrt(square)`, sign exposed as an instantiation flag.
    DerivedSqrt { square: String },
    /// Computed from a relation; never sampled.
    Solved,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
pub struct GenData {
    #[serde(default)]
    pub name: Option<String>,
    /// Family prefix; expands to `prefix1..prefixCount`.
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub count: Option<String>,
    pub sample: SampleData,
}

#[derive(Clone, Debug, Deserialize)]
pub struct RelationData {
    pub lhs: String,
    pub rhs: String,
    /// Generator name, or `@fam` meaning the family's last member.
    pub solve_for: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct KernelData {
    pub family: KernelFamily,
    #[serde(default)]
    pub t: Option<String>,
    pub variant: GammaVariant,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GroupData {
    pub name: String,
    pub dim: String,
    pub kernel: KernelData,
}

#[derive(Clone, Debug, Deserialize)]
pub struct SlotData {
    pub group: String,
    #[serde(default = "default_exp")]
    pub exp: u8,
}

fn default_exp() -> u8 {
    1
}

#[derive(Clone, Debug, Deserialize)]
pub struct StepData {
    pub mono: String,
    pub count: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct OrbitData {
    pub gen: String,
    #[serde(default = "default_orbit_exp")]
    pub exp: i64,
}

fn default_orbit_exp() -> i64 {
    1
}

#[derive(Clone, Debug, Deserialize)]
pub struct CrossData {
    pub a: Vec<String>,
    pub b: Vec<String>,
    /// When set, each cross pair expands over `b_member^{±exp}`.
    #[serde(default)]
    pub b_orbit: Option<i64>,
}

/// A gamma-factor template; used both for integrand factors (with
/// `slots`) and prefactor entries (without).
#[derive(Clone, Debug, Deserialize)]
pub struct FactorData {
    #[serde(default = "default_coef")]
    pub coef: String,
    pub variant: GammaVariant,
    /// `@fam`: one factor per member, coefficient times `member^each_exp`.
    #[serde(default)]
    pub each: Option<String>,
    #[serde(default = "default_each_exp")]
    pub each_exp: i64,
    /// Unordered pairs `g_r g_s` (r < s) over the listed names/families.
    #[serde(default)]
    pub pairs: Option<Vec<String>>,
    /// Ordered cross pairs `a_r b_s`.
    #[serde(default)]
    pub cross: Option<CrossData>,
    /// Multiplies each expansion by `mono^i` for `i = 0..count`.
    #[serde(default)]
    pub step: Option<StepData>,
    /// Doubles each expansion over `gen^{+exp}` and `gen^{-exp}`.
    #[serde(default)]
    pub orbit: Option<OrbitData>,
    #[serde(default)]
    pub slots: Vec<SlotData>,
}

fn default_coef() -> String {
    "1".into()
}

fn default_each_exp() -> i64 {
    1
}

#[derive(Clone, Debug, Deserialize)]
pub struct IntegralData {
    pub groups: Vec<GroupData>,
    #[serde(default)]
    pub factors: Vec<FactorData>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct FormData {
    pub label: String,
    pub integral: IntegralData,
    #[serde(default)]
    pub prefactor: Vec<FactorData>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct WindowData {
    /// Required to have modulus below `1 - margin` under every sampled
    /// assignment.
    pub mono: String,
    #[serde(default)]
    pub desc: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct EntryData {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_kind")]
    pub kind: EntryKind,
    pub supported: Vec<OrderData>,
    #[serde(default)]
    pub base: BaseConstraints,
    pub generators: Vec<GenData>,
    #[serde(default)]
    pub relations: Vec<RelationData>,
    pub lhs: IntegralData,
    #[serde(default)]
    pub forms: Vec<FormData>,
    #[serde(default)]
    pub windows: Vec<WindowData>,
    /// Relative tolerance keyed by `"n"` or `"n,m"`.
    pub tolerance: BTreeMap<String, f64>,
    /// Generators whose values the deformed contour must enclose.
    #[serde(default)]
    pub deform: Vec<String>,
    /// Closed-form product the z-first iterated order must match.
    #[serde(default)]
    pub closed_form: Vec<FactorData>,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub note: String,
}

fn default_jitter() -> f64 {
    0.12
}

// ---------------------------------------------------------------------
// Resolution at a concrete (n, m).

/// How one generator is produced during sampling.
#[derive(Clone, Debug)]
pub enum ResolvedSample {
    Modulus {
        /// `(symbol, exponent)` pairs over already-assigned moduli.
        terms: Vec<(String, f64)>,
        scale: f64,
        real_positive: bool,
    },
    Balanced {
        family: String,
    },
    DerivedSqrt {
        square: Monomial,
    },
    Solved,
}

#[derive(Clone, Debug)]
pub struct ResolvedGen {
    pub name: String,
    pub sample: ResolvedSample,
}

#[derive(Clone, Debug)]
pub struct ResolvedForm {
    pub label: String,
    pub integral: IntegralSpec,
    pub prefactor: PrefactorSpec,
}

/// A catalog entry pinned to a concrete `(n, m)`.
#[derive(Clone, Debug)]
pub struct ResolvedEntry {
    pub name: String,
    pub kind: EntryKind,
    pub n: i64,
    pub m: i64,
    pub base: BaseConstraints,
    pub generators: Vec<ResolvedGen>,
    pub families: BTreeMap<String, Vec<String>>,
    pub relations: RelationSet,
    pub lhs: IntegralSpec,
    pub forms: Vec<ResolvedForm>,
    pub windows: Vec<(Monomial, String)>,
    pub deform: Vec<String>,
    pub closed_form: PrefactorSpec,
    pub tolerance: f64,
    pub jitter: f64,
    pub has_sign_flag: bool,
}

impl EntryData {
    pub fn supports(&self, n: i64, m: i64) -> bool {
        self.supported.iter().any(|o| o.n == n && o.m == m)
    }

    pub fn resolve(&self, n: i64, m: i64) -> Result<ResolvedEntry> {
        let fail = |reason: String| CoreError::CatalogData {
            file: self.name.clone(),
            reason,
        };
        if !self.supports(n, m) {
            return Err(CoreError::UnsupportedOrder {
                name: self.name.clone(),
                n,
                m,
            });
        }
        // Families first: member lists everything else refers to.
        let mut families = BTreeMap::new();
        for g in &self.generators {
            if let Some(prefix) = &g.family {
                let count_expr = g
                    .count
                    .as_ref()
                    .ok_or_else(|| fail(format!("family `{prefix}` lacks a count")))?;
                let count = parse_affine(count_expr)?.eval(n, m).to_integer()?;
                if count < 1 {
                    return Err(fail(format!("family `{prefix}` has count {count}")));
                }
                let members: Vec<String> = (1..=count).map(|i| format!("{prefix}{i}")).collect();
                families.insert(prefix.clone(), members);
            }
        }
        let ctx = ExpandCtx { n, m, families };
        // Relations.
        let mut relations = Vec::new();
        for r in &self.relations {
            let solve_for = match r.solve_for.strip_prefix('@') {
                Some(fam) => ctx
                    .family(fam)?
                    .last()
                    .cloned()
                    .ok_or_else(|| fail(format!("family `{fam}` empty")))?,
                None => r.solve_for.clone(),
            };
            relations.push(Relation {
                lhs: parse_monomial(&r.lhs, &ctx)?,
                rhs: parse_monomial(&r.rhs, &ctx)?,
                solve_for,
            });
        }
        let relations = RelationSet::new(relations);
        let solved_names: Vec<&str> = relations
            .relations
            .iter()
            .map(|r| r.solve_for.as_str())
            .collect();
        // Generators in declaration order; family members expand inline.
        let mut generators = Vec::new();
        let mut has_sign_flag = false;
        for g in &self.generators {
            let resolve_sample = |member: &str| -> Result<ResolvedSample> {
                // A generator eliminated by a relation is never sampled,
                // except sign-flagged square roots, which are assigned
                // first and only validated by their relation.
                if solved_names.contains(&member)
                    && !matches!(g.sample, SampleData::DerivedSqrt { .. })
                {
                    return Ok(ResolvedSample::Solved);
                }
                Ok(match &g.sample {
                    SampleData::Solved => ResolvedSample::Solved,
                    SampleData::Balanced => ResolvedSample::Balanced {
                        family: g
                            .family
                            .clone()
                            .ok_or_else(|| fail("balanced sampling needs a family".into()))?,
                    },
                    SampleData::DerivedSqrt { square } => ResolvedSample::DerivedSqrt {
                        square: parse_monomial(square, &ctx)?,
                    },
                    SampleData::Modulus {
                        center,
                        scale,
                        real_positive,
                    } => {
                        let mut terms = Vec::new();
                        for t in center {
                            let mut e = match &t.exp {
                                Some(s) => parse_affine(s)?.eval(n, m).as_f64(),
                                None => 0.0,
                            };
                            if let Some(s) = &t.inv_n {
                                e += parse_affine(s)?.eval(n, m).as_f64() / n as f64;
                            }
                            terms.push((t.sym.clone(), e));
                        }
                        ResolvedSample::Modulus {
                            terms,
                            scale: *scale,
                            real_positive: *real_positive,
                        }
                    }
                })
            };
            match (&g.name, &g.family) {
                (Some(name), None) => {
                    let sample = resolve_sample(name)?;
                    if matches!(sample, ResolvedSample::DerivedSqrt { .. }) {
                        has_sign_flag = true;
                    }
                    generators.push(ResolvedGen {
                        name: name.clone(),
                        sample,
                    });
                }
                (None, Some(prefix)) => {
                    for member in ctx.family(prefix)?.clone() {
                        generators.push(ResolvedGen {
                            sample: resolve_sample(&member)?,
                            name: member,
                        });
                    }
                }
                _ => return Err(fail("generator needs exactly one of name/family".into())),
            }
        }
        let lhs = resolve_integral(&self.lhs, &ctx, &relations)?;
        let mut forms = Vec::new();
        for f in &self.forms {
            forms.push(ResolvedForm {
                label: f.label.clone(),
                integral: resolve_integral(&f.integral, &ctx, &relations)?,
                prefactor: resolve_prefactor(&f.prefactor, &ctx)?,
            });
        }
        let mut windows = Vec::new();
        for w in &self.windows {
            windows.push((parse_monomial(&w.mono, &ctx)?, w.desc.clone()));
        }
        let closed_form = resolve_prefactor(&self.closed_form, &ctx)?;
        let tolerance = self
            .tolerance
            .get(&format!("{n},{m}"))
            .or_else(|| self.tolerance.get(&n.to_string()))
            .copied()
            .ok_or_else(|| fail(format!("no tolerance for n={n}, m={m}")))?;
        Ok(ResolvedEntry {
            name: self.name.clone(),
            kind: self.kind,
            n,
            m,
            base: self.base.clone(),
            generators,
            families: ctx.families,
            relations,
            lhs,
            forms,
            windows,
            deform: self.deform.clone(),
            closed_form,
            tolerance,
            jitter: self.jitter,
            has_sign_flag,
        })
    }
}

/// Expands a factor template into concrete coefficient monomials.
fn expand_factor(f: &FactorData, ctx: &ExpandCtx) -> Result<Vec<Monomial>> {
    let base = parse_monomial(&f.coef, ctx)?;
    let modes = [f.each.is_some(), f.pairs.is_some(), f.cross.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if modes > 1 {
        return Err(CoreError::CatalogData {
            file: String::new(),
            reason: "factor template uses more than one of each/pairs/cross".into(),
        });
    }
    let expand_list = |names: &[String]| -> Result<Vec<String>> {
        let mut out = Vec::new();
        for n in names {
            match n.strip_prefix('@') {
                Some(fam) => out.extend(ctx.family(fam)?.iter().cloned()),
                None => out.push(n.clone()),
            }
        }
        Ok(out)
    };
    let mut coefs: Vec<Monomial> = Vec::new();
    if let Some(fam) = &f.each {
        let members = expand_list(std::slice::from_ref(fam))?;
        for g in members {
            let gm = Monomial::gen(&g).pow_frac8(f.each_exp * 8)?;
            coefs.push(base.mul(&gm));
        }
    } else if let Some(list) = &f.pairs {
        let members = expand_list(list)?;
        for r in 0..members.len() {
            for s in (r + 1)..members.len() {
                coefs.push(
                    base.mul(&Monomial::gen(&members[r]))
                        .mul(&Monomial::gen(&members[s])),
                );
            }
        }
    } else if let Some(cross) = &f.cross {
        let a = expand_list(&cross.a)?;
        let b = expand_list(&cross.b)?;
        for ga in &a {
            for gb in &b {
                let am = Monomial::gen(ga);
                match cross.b_orbit {
                    None => coefs.push(base.mul(&am).mul(&Monomial::gen(gb))),
                    Some(e) => {
                        let bm = Monomial::gen(gb).pow_frac8(e * 8)?;
                        coefs.push(base.mul(&am).mul(&bm));
                        coefs.push(base.mul(&am).mul(&bm.inv()));
                    }
                }
            }
        }
    } else {
        coefs.push(base);
    }
    if let Some(step) = &f.step {
        let mono = parse_monomial(&step.mono, ctx)?;
        let count = parse_affine(&step.count)?.eval(ctx.n, ctx.m).to_integer()?;
        let count = count.max(0);
        let mut stepped = Vec::with_capacity(coefs.len() * count as usize);
        for i in 0..count {
            let factor = mono.pow_int(i);
            for c in &coefs {
                stepped.push(c.mul(&factor));
            }
        }
        coefs = stepped;
    }
    if let Some(orbit) = &f.orbit {
        let gm = Monomial::gen(&orbit.gen).pow_frac8(orbit.exp * 8)?;
        let mut orbited = Vec::with_capacity(coefs.len() * 2);
        for c in &coefs {
            orbited.push(c.mul(&gm));
            orbited.push(c.mul(&gm.inv()));
        }
        coefs = orbited;
    }
    Ok(coefs)
}

pub fn resolve_integral(
    data: &IntegralData,
    ctx: &ExpandCtx,
    relations: &RelationSet,
) -> Result<IntegralSpec> {
    let mut groups = Vec::new();
    for g in &data.groups {
        let dim = parse_affine(&g.dim)?.eval(ctx.n, ctx.m).to_integer()?;
        if dim < 0 {
            return Err(CoreError::CatalogData {
                file: String::new(),
                reason: format!("group `{}` has dimension {dim}", g.name),
            });
        }
        let kernel = match g.kernel.family {
            KernelFamily::TypeI => KernelSpec::type_i(dim as usize, g.kernel.variant),
            KernelFamily::TypeII => {
                let t = g.kernel.t.as_ref().ok_or_else(|| CoreError::CatalogData {
                    file: String::new(),
                    reason: format!("type-II group `{}` lacks t", g.name),
                })?;
                KernelSpec::type_ii(dim as usize, parse_monomial(t, ctx)?, g.kernel.variant)
            }
        };
        groups.push(VarGroup {
            name: g.name.clone(),
            kernel,
        });
    }
    let mut factors = Vec::new();
    for f in &data.factors {
        let slots: Vec<Slot> = f
            .slots
            .iter()
            .map(|s| Slot {
                group: s.group.clone(),
                exp: s.exp,
                index: SlotIndex::Each,
            })
            .collect();
        for coef in expand_factor(f, ctx)? {
            factors.push(FactorSpec {
                variant: f.variant,
                coef,
                slots: slots.clone(),
            });
        }
    }
    Ok(IntegralSpec {
        groups,
        factors,
        balancing: relations.clone(),
    })
}

pub fn resolve_prefactor(data: &[FactorData], ctx: &ExpandCtx) -> Result<PrefactorSpec> {
    let mut factors = Vec::new();
    for f in data {
        if !f.slots.is_empty() {
            return Err(CoreError::CatalogData {
                file: String::new(),
                reason: "prefactor entries cannot carry slots".into(),
            });
        }
        for coef in expand_factor(f, ctx)? {
            factors.push(PrefFactor {
                variant: f.variant,
                coef,
            });
        }
    }
    Ok(PrefactorSpec { factors })
}

// ---------------------------------------------------------------------
// Fubini corpus cases.

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CorpusExpectation {
    Admissible,
    Inadmissible,
    Reject,
}

#[derive(Clone, Debug, Deserialize)]
pub struct CorpusData {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub n: i64,
    #[serde(default)]
    pub m: i64,
    #[serde(default)]
    pub families: BTreeMap<String, String>,
    #[serde(default)]
    pub relations: Vec<RelationData>,
    pub spec: IntegralData,
    pub expect: CorpusExpectation,
    /// Canonical string of one expected offending product.
    #[serde(default)]
    pub witness: Option<String>,
}

impl CorpusData {
    pub fn resolve(&self) -> Result<(IntegralSpec, RelationSet)> {
        let mut families = BTreeMap::new();
        for (prefix, count) in &self.families {
            let count = parse_affine(count)?.eval(self.n, self.m).to_integer()?;
            families.insert(
                prefix.clone(),
                (1..=count).map(|i| format!("{prefix}{i}")).collect(),
            );
        }
        let ctx = ExpandCtx {
            n: self.n,
            m: self.m,
            families,
        };
        let mut relations = Vec::new();
        for r in &self.relations {
            let solve_for = match r.solve_for.strip_prefix('@') {
                Some(fam) => ctx.family(fam)?.last().cloned().unwrap(),
                None => r.solve_for.clone(),
            };
            relations.push(Relation {
                lhs: parse_monomial(&r.lhs, &ctx)?,
                rhs: parse_monomial(&r.rhs, &ctx)?,
                solve_for,
            });
        }
        let relations = RelationSet::new(relations);
        let spec = resolve_integral(&self.spec, &ctx, &relations)?;
        Ok((spec, relations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> ExpandCtx {
        let mut families = BTreeMap::new();
        families.insert(
            "t".to_string(),
            vec!["t1".into(), "t2".into(), "t3".into(), "t4".into()],
        );
        ExpandCtx {
            n: 2,
            m: 1,
            families,
        }
    }

    #[test]
    fn affine_forms() {
        let e = parse_affine("1").unwrap();
        assert_eq!(e.eval(5, 0), Rat::new(1, 1));
        let e = parse_affine("n/2-3/4").unwrap();
        assert_eq!(e.eval(3, 0), Rat::new(3, 4));
        let e = parse_affine("2n-1").unwrap();
        assert_eq!(e.eval(2, 0), Rat::new(3, 1));
        let e = parse_affine("2m+2n+4").unwrap();
        assert_eq!(e.eval(1, 1), Rat::new(8, 1));
        let e = parse_affine("-n/2").unwrap();
        assert_eq!(e.eval(3, 0), Rat::new(-3, 2));
        let e = parse_affine("3n/8").unwrap();
        assert_eq!(e.eval(1, 0), Rat::new(3, 8));
        assert!(parse_affine("").is_err());
        assert!(parse_affine("n+").is_err());
    }

    #[test]
    fn monomial_with_affine_exponents() {
        let c = ctx();
        let m = parse_monomial("p^1/2 q^1/2 t^1-n/2 t1^-1", &c).unwrap();
        // n = 2: t^0
        assert_eq!(m.exp_eighths("t"), 0);
        assert_eq!(m.exp_eighths("p"), 4);
        assert_eq!(m.exp_eighths("t1"), -8);
    }

    #[test]
    fn family_product_token() {
        let c = ctx();
        let m = parse_monomial("t^2n-1 @t", &c).unwrap();
        assert_eq!(m.exp_eighths("t"), 24);
        for g in ["t1", "t2", "t3", "t4"] {
            assert_eq!(m.exp_eighths(g), 8);
        }
    }

    #[test]
    fn factor_expansion_each_and_pairs() {
        let c = ctx();
        let f: FactorData = serde_json::from_str(
            r#"{"coef": "p^1/2 q^1/2", "each": "@t", "each_exp": -1, "variant": "pq"}"#,
        )
        .unwrap();
        let coefs = expand_factor(&f, &c).unwrap();
        assert_eq!(coefs.len(), 4);
        assert_eq!(coefs[0], parse_monomial("p^1/2 q^1/2 t1^-1", &c).unwrap());

        let f: FactorData = serde_json::from_str(
            r#"{"pairs": ["@t"], "step": {"mono": "t", "count": "n"}, "variant": "pq"}"#,
        )
        .unwrap();
        let coefs = expand_factor(&f, &c).unwrap();
        // 6 pairs x 2 steps
        assert_eq!(coefs.len(), 12);
        assert!(coefs.contains(&parse_monomial("t1 t2", &c).unwrap()));
        assert!(coefs.contains(&parse_monomial("t t3 t4", &c).unwrap()));
    }

    #[test]
    fn factor_expansion_orbit_and_cross() {
        let c = ctx();
        let f: FactorData = serde_json::from_str(
            r#"{"coef": "- p^1/2 q^1/2 t^-1/2", "orbit": {"gen": "v", "exp": 2}, "variant": "pq"}"#,
        )
        .unwrap();
        let coefs = expand_factor(&f, &c).unwrap();
        assert_eq!(coefs.len(), 2);
        assert_eq!(
            coefs[0],
            parse_monomial("- p^1/2 q^1/2 t^-1/2 v^2", &c).unwrap()
        );
        assert_eq!(
            coefs[1],
            parse_monomial("- p^1/2 q^1/2 t^-1/2 v^-2", &c).unwrap()
        );

        let f: FactorData = serde_json::from_str(
            r#"{"cross": {"a": ["@t"], "b": ["v1", "v2"], "b_orbit": 1}, "variant": "pq"}"#,
        )
        .unwrap();
        let coefs = expand_factor(&f, &c).unwrap();
        assert_eq!(coefs.len(), 16);
        assert!(coefs.contains(&parse_monomial("t3 v2^-1", &c).unwrap()));
    }

    #[test]
    fn step_count_clamps_at_zero() {
        let mut c = ctx();
        c.n = 1;
        let f: FactorData = serde_json::from_str(
            r#"{"pairs": ["@t"], "step": {"mono": "t", "count": "n-1"}, "variant": "pq"}"#,
        )
        .unwrap();
        assert!(expand_factor(&f, &c).unwrap().is_empty());
    }
}

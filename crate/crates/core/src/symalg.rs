//! Exact multiplicative algebra of parameter monomials.
//!
//! A [`Monomial`] is a root-of-unity phase times a product of named
//! generators raised to rational exponents. Phases live in the group of
//! 8th roots of unity and exponents have denominator dividing 8; this is
//! the smallest closed setup covering every coefficient that appears in
//! the integral catalog (signs, factors of `i`, square and quarter
//! roots).
//!
//! Monomials serialize to a canonical string grammar, e.g.
//! `-i p^1/2 q^1/2 t^-3/8`: an optional phase prefix made of the tokens
//! `-`, `i`, `w` (with `w = e^{i pi/4}`), followed by `name^num/den`
//! terms separated by spaces or `*`. The empty product prints as `1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Number of phase steps in a full turn.
const PHASE_STEPS: i64 = 8;
/// Exponents are stored in units of 1/8.
const EXP_DEN: i64 = 8;

/// Value assignment for generators.
pub type Assignment = BTreeMap<String, Complex64>;

/// A phase times a product of generator powers, in canonical form:
/// zero exponents absent, phase reduced mod 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial {
    /// Phase in units of 1/8 turn, in `0..8`.
    phase8: u8,
    /// Exponents in units of 1/8, keyed by generator name; no zero entries.
    exps: BTreeMap<String, i64>,
}

impl Monomial {
    /// The empty product.
    pub fn one() -> Self {
        Monomial::default()
    }

    /// A single generator to the first power.
    pub fn gen(name: &str) -> Self {
        Monomial::gen_pow(name, 1, 1).expect("exponent 1 is always representable")
    }

    /// `name^(num/den)`; `den` must divide 8 after reduction.
    pub fn gen_pow(name: &str, num: i64, den: i64) -> Result<Self> {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        if (num * EXP_DEN) % den != 0 {
            return Err(CoreError::DenominatorOverflow(format!(
                "{name}^{num}/{den}"
            )));
        }
        let e8 = num * EXP_DEN / den;
        let mut exps = BTreeMap::new();
        if e8 != 0 {
            exps.insert(name.to_string(), e8);
        }
        Ok(Monomial { phase8: 0, exps })
    }

    /// Phase of `k` eighths of a turn (k=4 is `-1`, k=2 is `i`).
    pub fn phase(k: i64) -> Self {
        Monomial {
            phase8: k.rem_euclid(PHASE_STEPS) as u8,
            exps: BTreeMap::new(),
        }
    }

    pub fn is_one(&self) -> bool {
        self.phase8 == 0 && self.exps.is_empty()
    }

    pub fn phase_eighths(&self) -> u8 {
        self.phase8
    }

    /// Exponent of `name` in eighths (0 if absent).
    pub fn exp_eighths(&self, name: &str) -> i64 {
        self.exps.get(name).copied().unwrap_or(0)
    }

    pub fn generators(&self) -> impl Iterator<Item = &str> {
        self.exps.keys().map(|s| s.as_str())
    }

    /// Product of two monomials: phases add mod 1, exponents add.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exps = self.exps.clone();
        for (g, e) in &other.exps {
            let slot = exps.entry(g.clone()).or_insert(0);
            *slot += e;
            if *slot == 0 {
                exps.remove(g);
            }
        }
        Monomial {
            phase8: ((self.phase8 as i64 + other.phase8 as i64).rem_euclid(PHASE_STEPS)) as u8,
            exps,
        }
    }

    /// Integer power (negative allowed).
    pub fn pow_int(&self, k: i64) -> Monomial {
        let mut exps = BTreeMap::new();
        for (g, e) in &self.exps {
            let v = e * k;
            if v != 0 {
                exps.insert(g.clone(), v);
            }
        }
        Monomial {
            phase8: ((self.phase8 as i64 * k).rem_euclid(PHASE_STEPS)) as u8,
            exps,
        }
    }

    pub fn inv(&self) -> Monomial {
        self.pow_int(-1)
    }

    /// Principal `k`-th root: exponents and phase divided by `k`, branch
    /// chosen in `[0, 1/k)` turns. Errors when a divided exponent or the
    /// divided phase no longer has denominator dividing 8.
    pub fn root(&self, k: u32) -> Result<Monomial> {
        assert!(k > 0);
        let k = k as i64;
        let mut exps = BTreeMap::new();
        for (g, e) in &self.exps {
            if e % k != 0 {
                return Err(CoreError::DenominatorOverflow(format!(
                    "{g}^({e}/8) under root {k}"
                )));
            }
            exps.insert(g.clone(), e / k);
        }
        if (self.phase8 as i64) % k != 0 {
            return Err(CoreError::DenominatorOverflow(format!(
                "phase {}/8 turn under root {k}",
                self.phase8
            )));
        }
        Ok(Monomial {
            phase8: (self.phase8 as i64 / k) as u8,
            exps,
        })
    }

    /// `self^(num8/8)`: fractional power via principal root then integer
    /// power.
    pub fn pow_frac8(&self, num8: i64) -> Result<Monomial> {
        let g = gcd(num8.unsigned_abs(), EXP_DEN as u64) as i64;
        let root = (EXP_DEN / g) as u32;
        Ok(self.root(root)?.pow_int(num8 / g))
    }

    /// Numeric evaluation with principal powers of the assigned values.
    ///
    /// `value^(e/8)` uses the principal logarithm; integer exponents use
    /// exact repeated multiplication.
    pub fn eval(&self, values: &Assignment) -> Result<Complex64> {
        let mut acc = phase_value(self.phase8);
        for (g, e8) in &self.exps {
            let v = *values
                .get(g)
                .ok_or_else(|| CoreError::MissingAssignment(g.clone()))?;
            if v == Complex64::new(0.0, 0.0) {
                return Err(CoreError::ZeroAssignment(g.clone()));
            }
            acc *= pow_eighths(v, *e8);
        }
        Ok(acc)
    }

    /// Substitutes every eliminated generator of `rels` (in order, then
    /// repeated until stable); the result contains none of them.
    pub fn reduce(&self, rels: &RelationSet) -> Result<Monomial> {
        let mut m = self.clone();
        // One pass per relation suffices when relations are ordered so
        // that later solved expressions do not reintroduce earlier
        // generators; a fixpoint sweep keeps arbitrary orders correct.
        for _ in 0..=rels.relations.len() {
            let mut changed = false;
            for rel in &rels.relations {
                let e8 = m.exp_eighths(&rel.solve_for);
                if e8 != 0 {
                    let solved = rel.solved()?;
                    let sub = solved.pow_frac8(e8)?;
                    let mut stripped = m.clone();
                    stripped.exps.remove(&rel.solve_for);
                    m = stripped.mul(&sub);
                    changed = true;
                }
            }
            if !changed {
                return Ok(m);
            }
        }
        Err(CoreError::RelationUnsolvable {
            gen: "<cycle>".into(),
            reason: "substitution did not reach a fixpoint".into(),
        })
    }

    /// Membership in `p^{Z<=0} q^{Z<=0}`: phase zero, every non-`p`/`q`
    /// exponent zero, and the `p`, `q` exponents nonpositive integers.
    /// The empty monomial (`m = 1`) is inside.
    pub fn lattice_membership(&self) -> LatticeVerdict {
        if self.phase8 != 0 {
            return LatticeVerdict::Outside;
        }
        let mut a = 0i64;
        let mut b = 0i64;
        for (g, e8) in &self.exps {
            let integral_nonpos = e8 % EXP_DEN == 0 && *e8 <= 0;
            match g.as_str() {
                "p" if integral_nonpos => a = -e8 / EXP_DEN,
                "q" if integral_nonpos => b = -e8 / EXP_DEN,
                _ => return LatticeVerdict::Outside,
            }
        }
        LatticeVerdict::Inside {
            a: a as u32,
            b: b as u32,
        }
    }
}

/// Outcome of the `p^{Z<=0} q^{Z<=0}` lattice test; `Inside` carries the
/// read-off integers of `p^-a q^-b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeVerdict {
    Inside { a: u32, b: u32 },
    Outside,
}

impl LatticeVerdict {
    pub fn is_inside(&self) -> bool {
        matches!(self, LatticeVerdict::Inside { .. })
    }
}

/// `value^(e8/8)` with the principal branch.
fn pow_eighths(v: Complex64, e8: i64) -> Complex64 {
    if e8 % EXP_DEN == 0 {
        v.powi((e8 / EXP_DEN) as i32)
    } else {
        (v.ln() * (e8 as f64 / EXP_DEN as f64)).exp()
    }
}

/// Exact values of the 8th roots of unity.
fn phase_value(phase8: u8) -> Complex64 {
    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
    match phase8 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(H, H),
        2 => Complex64::new(0.0, 1.0),
        3 => Complex64::new(-H, H),
        4 => Complex64::new(-1.0, 0.0),
        5 => Complex64::new(-H, -H),
        6 => Complex64::new(0.0, -1.0),
        7 => Complex64::new(H, -H),
        _ => unreachable!(),
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// One balancing equality `lhs = rhs` together with the generator it is
/// solved for.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub lhs: Monomial,
    pub rhs: Monomial,
    pub solve_for: String,
}

impl Relation {
    /// The solved expression for the designated generator:
    /// from `g^e * R = rhs`, returns `(rhs / R)^(1/e)`.
    pub fn solved(&self) -> Result<Monomial> {
        let quotient = self.rhs.mul(&self.lhs.inv());
        // quotient = g^{-e} * rhs/R; isolate g.
        let e8 = -quotient.exp_eighths(&self.solve_for);
        if e8 == 0 {
            return Err(CoreError::RelationUnsolvable {
                gen: self.solve_for.clone(),
                reason: "generator does not occur in the relation".into(),
            });
        }
        let mut rest = quotient;
        rest.exps.remove(&self.solve_for);
        if e8 == EXP_DEN {
            // g^1 in the relation: g = rhs / (lhs without g) directly.
            return Ok(rest);
        }
        // g^{e8/8} = rest  =>  g = rest^{8/e8}.
        if (EXP_DEN * EXP_DEN) % e8 != 0 {
            return Err(CoreError::RelationUnsolvable {
                gen: self.solve_for.clone(),
                reason: format!("exponent {e8}/8 does not divide evenly"),
            });
        }
        rest.pow_frac8(EXP_DEN * EXP_DEN / e8).map_err(|_| {
            CoreError::RelationUnsolvable {
                gen: self.solve_for.clone(),
                reason: "solved expression leaves the denominator-8 lattice".into(),
            }
        })
    }

    /// Numeric residual `|lhs/rhs - 1|` under an assignment.
    pub fn residual(&self, values: &Assignment) -> Result<f64> {
        let l = self.lhs.eval(values)?;
        let r = self.rhs.eval(values)?;
        Ok((l / r - Complex64::new(1.0, 0.0)).norm())
    }
}

/// Ordered list of balancing relations in solved form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationSet {
    pub relations: Vec<Relation>,
}

impl RelationSet {
    pub fn new(relations: Vec<Relation>) -> Self {
        RelationSet { relations }
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase8 {
            0 => "",
            1 => "w ",
            2 => "i ",
            3 => "i w ",
            4 => "- ",
            5 => "- w ",
            6 => "- i ",
            7 => "- i w ",
            _ => unreachable!(),
        };
        if self.exps.is_empty() {
            return write!(f, "{}", if prefix.is_empty() { "1" } else { prefix.trim_end() });
        }
        let mut parts = Vec::with_capacity(self.exps.len());
        for (g, e8) in &self.exps {
            let d = gcd(e8.unsigned_abs(), EXP_DEN as u64) as i64;
            let (num, den) = (e8 / d, EXP_DEN / d);
            if num == 1 && den == 1 {
                parts.push(g.clone());
            } else if den == 1 {
                parts.push(format!("{g}^{num}"));
            } else {
                parts.push(format!("{g}^{num}/{den}"));
            }
        }
        write!(f, "{}{}", prefix, parts.join(" "))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Monomial({self})")
    }
}

impl FromStr for Monomial {
    type Err = CoreError;

    fn from_str(input: &str) -> Result<Monomial> {
        let err = |reason: &str| CoreError::MonomialParse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let mut out = Monomial::one();
        let mut seen_generator = false;
        for token in input.split(|c: char| c.is_whitespace() || c == '*') {
            if token.is_empty() {
                continue;
            }
            match token {
                "1" => continue,
                "-" => {
                    if seen_generator {
                        return Err(err("phase token after a generator"));
                    }
                    out = out.mul(&Monomial::phase(4));
                    continue;
                }
                "i" => {
                    if seen_generator {
                        return Err(err("phase token after a generator"));
                    }
                    out = out.mul(&Monomial::phase(2));
                    continue;
                }
                "w" => {
                    if seen_generator {
                        return Err(err("phase token after a generator"));
                    }
                    out = out.mul(&Monomial::phase(1));
                    continue;
                }
                _ => {}
            }
            // Leading '-' fused to a name, e.g. "-t4".
            let (tok, neg) = match token.strip_prefix('-') {
                Some(rest) => (rest, true),
                None => (token, false),
            };
            if neg {
                if seen_generator {
                    return Err(err("phase token after a generator"));
                }
                out = out.mul(&Monomial::phase(4));
            }
            let (name, exp) = match tok.split_once('^') {
                Some((n, e)) => (n, e),
                None => (tok, "1"),
            };
            if name.is_empty() || !name.chars().next().unwrap().is_ascii_alphabetic() {
                return Err(err(&format!("bad generator name `{name}`")));
            }
            if name == "i" || name == "w" {
                return Err(err("`i` and `w` are reserved phase tokens"));
            }
            let (num, den) = match exp.split_once('/') {
                Some((n, d)) => (
                    n.parse::<i64>().map_err(|_| err("bad exponent numerator"))?,
                    d.parse::<i64>().map_err(|_| err("bad exponent denominator"))?,
                ),
                None => (exp.parse::<i64>().map_err(|_| err("bad exponent"))?, 1),
            };
            out = out.mul(&Monomial::gen_pow(name, num, den)?);
            seen_generator = true;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mul_inverse_pair_cancels() {
        let t = Monomial::gen("t");
        let prod = t.mul(&t.inv());
        assert!(prod.is_one());
    }

    #[test]
    fn mul_sign_squares_away() {
        let m = Monomial::phase(4).mul(&Monomial::gen("t4"));
        let sq = m.mul(&m);
        assert_eq!(sq, Monomial::gen_pow("t4", 2, 1).unwrap());
        assert_eq!(sq.phase_eighths(), 0);
    }

    #[test]
    fn mul_half_powers_combine() {
        let h = Monomial::gen_pow("p", 1, 2)
            .unwrap()
            .mul(&Monomial::gen_pow("q", 1, 2).unwrap());
        let full = h.mul(&h);
        assert_eq!(full, Monomial::gen("p").mul(&Monomial::gen("q")));
    }

    #[test]
    fn root_principal_branches() {
        // (pq/t)^(1/2)
        let m: Monomial = "p q t^-1".parse().unwrap();
        let r = m.root(2).unwrap();
        assert_eq!(r, "p^1/2 q^1/2 t^-1/2".parse().unwrap());
        // t^(1/4)
        assert_eq!(
            Monomial::gen("t").root(4).unwrap(),
            "t^1/4".parse().unwrap()
        );
        // sqrt(-t) = i t^(1/2): principal branch
        let neg_t: Monomial = "- t".parse().unwrap();
        assert_eq!(neg_t.root(2).unwrap(), "i t^1/2".parse().unwrap());
        // 1/16 phases rejected
        assert!(Monomial::phase(1).root(2).is_err());
    }

    #[test]
    fn eval_basics() {
        let mut vals = Assignment::new();
        vals.insert("t".into(), c(0.5, 0.0));
        vals.insert("p".into(), c(0.25, 0.0));
        let t2: Monomial = "t^2".parse().unwrap();
        assert!((t2.eval(&vals).unwrap() - c(0.25, 0.0)).norm() < 1e-15);
        let neg_t: Monomial = "- t".parse().unwrap();
        assert!((neg_t.eval(&vals).unwrap() - c(-0.5, 0.0)).norm() < 1e-15);
        let sqrt_p: Monomial = "p^1/2".parse().unwrap();
        assert!((sqrt_p.eval(&vals).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        // zero assignment rejected
        vals.insert("t".into(), c(0.0, 0.0));
        assert!(matches!(
            t2.eval(&vals),
            Err(CoreError::ZeroAssignment(_))
        ));
    }

    fn quad_q2_relation(n: i64) -> RelationSet {
        // t^(2n-1) t1 t2 t3 t4 = p q^2, solved for t4
        let mut lhs = Monomial::gen_pow("t", 2 * n - 1, 1).unwrap();
        for g in ["t1", "t2", "t3", "t4"] {
            lhs = lhs.mul(&Monomial::gen(g));
        }
        let rhs = Monomial::gen("p").mul(&Monomial::gen_pow("q", 2, 1).unwrap());
        RelationSet::new(vec![Relation {
            lhs,
            rhs,
            solve_for: "t4".into(),
        }])
    }

    #[test]
    fn reduce_solves_designated_generator() {
        let rels = quad_q2_relation(1);
        let reduced = Monomial::gen("t4").reduce(&rels).unwrap();
        assert_eq!(reduced, "p q^2 t^-1 t1^-1 t2^-1 t3^-1".parse().unwrap());
        // untouched generator
        let t1 = Monomial::gen("t1");
        assert_eq!(t1.reduce(&rels).unwrap(), t1);
        // homomorphism on squares
        let sq = Monomial::gen_pow("t4", 2, 1).unwrap().reduce(&rels).unwrap();
        assert_eq!(sq, reduced.pow_int(2));
    }

    #[test]
    fn reduce_is_idempotent() {
        let rels = quad_q2_relation(2);
        let m: Monomial = "- t4^3/2 q^1/2 v".parse().unwrap();
        let once = m.reduce(&rels).unwrap();
        let twice = once.reduce(&rels).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.exp_eighths("t4"), 0);
    }

    #[test]
    fn lattice_membership_cases() {
        assert_eq!(
            Monomial::one().lattice_membership(),
            LatticeVerdict::Inside { a: 0, b: 0 }
        );
        let m: Monomial = "p^-2".parse().unwrap();
        assert_eq!(m.lattice_membership(), LatticeVerdict::Inside { a: 2, b: 0 });
        let m: Monomial = "p q t^3".parse().unwrap();
        assert_eq!(m.lattice_membership(), LatticeVerdict::Outside);
        // positive powers of p are outside too
        let m: Monomial = "p^2 q^-1".parse().unwrap();
        assert_eq!(m.lattice_membership(), LatticeVerdict::Outside);
        // fractional powers are outside
        let m: Monomial = "p^-1/2".parse().unwrap();
        assert_eq!(m.lattice_membership(), LatticeVerdict::Outside);
    }

    #[test]
    fn lattice_inside_matches_eval() {
        let m: Monomial = "p^-2 q^-1".parse().unwrap();
        let LatticeVerdict::Inside { a, b } = m.lattice_membership() else {
            panic!("expected inside");
        };
        let mut vals = Assignment::new();
        vals.insert("p".into(), c(0.23, 0.0));
        vals.insert("q".into(), c(0.17, 0.0));
        let direct = c(0.23, 0.0).powi(-(a as i32)) * c(0.17, 0.0).powi(-(b as i32));
        assert_eq!(m.eval(&vals).unwrap(), direct);
    }

    #[test]
    fn roundtrip_format() {
        for s in [
            "1",
            "- i",
            "t",
            "p^1/2 q^1/2 t^-1/2",
            "i t^1/4",
            "- t1 t2^-3/8 v^2",
            "w p^7/8",
        ] {
            let m: Monomial = s.parse().unwrap();
            let back: Monomial = m.to_string().parse().unwrap();
            assert_eq!(m, back, "roundtrip failed for `{s}` -> `{m}`");
        }
    }

    proptest! {
        // eval is a homomorphism: |eval(a b) - eval(a) eval(b)| small, for
        // random monomials with exponents in [-4,4] in steps of 1/8.
        #[test]
        fn eval_homomorphism(
            e1 in -32i64..=32, e2 in -32i64..=32, e3 in -32i64..=32, e4 in -32i64..=32,
            ph1 in 0i64..8, ph2 in 0i64..8,
            re in 0.1f64..1.5, im in -1.0f64..1.0,
        ) {
            let mut a = Monomial::phase(ph1);
            let mut b = Monomial::phase(ph2);
            for (g, e) in [("x", e1), ("y", e2)] {
                if e != 0 { a = a.mul(&Monomial::gen_pow(g, e, 8).unwrap()); }
            }
            for (g, e) in [("x", e3), ("y", e4)] {
                if e != 0 { b = b.mul(&Monomial::gen_pow(g, e, 8).unwrap()); }
            }
            let mut vals = Assignment::new();
            vals.insert("x".into(), c(re, im));
            vals.insert("y".into(), c(re + 0.3, -im));
            let lhs = a.mul(&b).eval(&vals).unwrap();
            let rhs = a.eval(&vals).unwrap() * b.eval(&vals).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-14 * rhs.norm().max(1.0));
        }

        #[test]
        fn reduce_commutes_with_mul(e1 in -16i64..=16, e2 in -16i64..=16) {
            let rels = quad_q2_relation(1);
            let a = Monomial::gen_pow("t4", e1, 8).unwrap_or_else(|_| Monomial::one())
                .mul(&Monomial::gen("t1"));
            let b = Monomial::gen_pow("t4", e2, 8).unwrap().mul(&Monomial::gen("q"));
            let left = a.mul(&b).reduce(&rels).unwrap();
            let right = a.reduce(&rels).unwrap().mul(&b.reduce(&rels).unwrap());
            prop_assert_eq!(left, right);
        }
    }
}

//! The identity registry: every verifiable transformation as a
//! lhs / rhs / prefactor triple with balancing conditions and sampling
//! windows, shipped as JSON data under `catalog/` at the workspace root.
//!
//! `instantiate` resolves an entry at a concrete order, draws (or adopts)
//! a parameter assignment, and validates balancing and contours;
//! `verify` evaluates both sides and reports residuals. Entries are
//! immutable and verification calls are independent, so callers may run
//! them concurrently.

pub mod special;

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::efun::{Base, TruncationPolicy};
use crate::error::{CoreError, Result};
use crate::ispec::{eval_integral, eval_prefactor};
use crate::quad::{QuadPolicy, QuadResult};
use crate::sampler::{sample_params, validate_assignment, SampleWindow};
use crate::schema::{EntryData, EntryKind, ResolvedEntry};
use crate::symalg::Assignment;

macro_rules! catalog_file {
    ($name:literal) => {
        (
            $name,
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../catalog/",
                $name,
                ".json"
            )),
        )
    };
}

/// Embedded catalog sources in registry order.
const ENTRY_SOURCES: &[(&str, &str)] = &[
    catalog_file!("elliptic_beta"),
    catalog_file!("dixon_eval"),
    catalog_file!("dixon_transform"),
    catalog_file!("selberg_e7"),
    catalog_file!("dim_change"),
    catalog_file!("induction_enabler"),
    catalog_file!("almost_selberg"),
    catalog_file!("as_extended"),
    catalog_file!("quad_q2"),
    catalog_file!("quad_half"),
    catalog_file!("corollary_q1"),
    catalog_file!("vanishing_4param"),
    catalog_file!("fubini_fail_pair"),
];

static REGISTRY: OnceLock<Vec<EntryData>> = OnceLock::new();

/// All catalog entries, parsed once.
pub fn registry() -> &'static [EntryData] {
    REGISTRY.get_or_init(|| {
        ENTRY_SOURCES
            .iter()
            .map(|(name, src)| {
                let data: EntryData = serde_json::from_str(src)
                    .unwrap_or_else(|e| panic!("catalog file `{name}.json` is malformed: {e}"));
                assert_eq!(
                    &data.name, name,
                    "catalog file `{name}.json` declares name `{}`",
                    data.name
                );
                data
            })
            .collect()
    })
}

/// Registry metadata row.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityMeta {
    pub name: String,
    pub description: String,
    pub supported: Vec<(i64, i64)>,
    pub deformed_contour: bool,
}

/// Stable-order listing of every registered identity.
pub fn list_identities() -> Vec<IdentityMeta> {
    registry()
        .iter()
        .map(|e| IdentityMeta {
            name: e.name.clone(),
            description: e.description.clone(),
            supported: e.supported.iter().map(|o| (o.n, o.m)).collect(),
            deformed_contour: !e.deform.is_empty(),
        })
        .collect()
}

pub fn entry(name: &str) -> Result<&'static EntryData> {
    registry()
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CoreError::UnknownIdentity(name.to_string()))
}

/// Where an instance's parameters come from.
#[derive(Clone, Debug)]
pub enum ParamSource {
    Seed(u64),
    Explicit(Assignment),
}

/// A fully resolved, parameterized, contour-checked instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub entry: ResolvedEntry,
    pub base: Base,
    pub assignment: Assignment,
    pub seed: Option<u64>,
    pub s_sign: i8,
    pub attempts: usize,
}

impl Instance {
    /// Values of the generators the deformed contour must enclose.
    pub fn deform_poles(&self) -> Vec<(String, Complex64)> {
        self.entry
            .deform
            .iter()
            .map(|g| (g.clone(), self.assignment[g]))
            .collect()
    }
}

/// Resolves `name` at `(n, m)`, draws or adopts parameters, and checks
/// balancing, windows, and both sides' contours.
pub fn instantiate(
    name: &str,
    n: i64,
    m: i64,
    base: &Base,
    source: ParamSource,
    s_sign: i8,
) -> Result<Instance> {
    let data = entry(name)?;
    let resolved = data.resolve(n, m)?;
    let window = SampleWindow::default();
    match source {
        ParamSource::Seed(seed) => {
            let sampled = sample_params(&resolved, base, seed, s_sign, &window)?;
            Ok(Instance {
                entry: resolved,
                base: *base,
                assignment: sampled.assignment,
                seed: Some(seed),
                s_sign,
                attempts: sampled.attempts,
            })
        }
        ParamSource::Explicit(mut assignment) => {
            assignment.insert("p".into(), base.p);
            assignment.insert("q".into(), base.q);
            validate_assignment(&resolved, &assignment, window.margin)?;
            Ok(Instance {
                entry: resolved,
                base: *base,
                assignment,
                seed: None,
                s_sign,
                attempts: 0,
            })
        }
    }
}

/// Evaluation policy knobs on top of the per-dimension defaults.
#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyPolicy {
    /// Cap every side's grid at this size.
    pub n_max: Option<usize>,
    /// Override the per-dimension relative tolerance of the refinement.
    pub rtol: Option<f64>,
    pub trunc: TruncationPolicy,
}

impl VerifyPolicy {
    pub fn quad_for(&self, dim: usize) -> QuadPolicy {
        let mut p = QuadPolicy::for_dim(dim);
        if let Some(n_max) = self.n_max {
            p.n_max = n_max;
        }
        if let Some(rtol) = self.rtol {
            p.rtol = rtol;
        }
        p
    }
}

/// One evaluated side.
#[derive(Clone, Debug, Serialize)]
pub struct SideReport {
    pub value: [f64; 2],
    pub grids: Vec<usize>,
    pub deltas: Vec<f64>,
    pub converged: bool,
}

impl SideReport {
    fn from_quad(r: &QuadResult) -> SideReport {
        SideReport {
            value: [r.value.re, r.value.im],
            grids: r.grids.clone(),
            deltas: r.deltas.clone(),
            converged: r.converged,
        }
    }
}

/// One rhs form: integral, prefactor, their product, and the residual
/// against the lhs.
#[derive(Clone, Debug, Serialize)]
pub struct FormReport {
    pub label: String,
    pub integral: SideReport,
    pub prefactor: [f64; 2],
    pub combined: [f64; 2],
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyVerdict {
    Pass,
    Fail,
    NoConverge,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub identity: String,
    pub n: i64,
    pub m: i64,
    pub base: [[f64; 2]; 2],
    pub seed: Option<u64>,
    pub s_sign: i8,
    pub params: BTreeMap<String, [f64; 2]>,
    pub lhs: SideReport,
    pub forms: Vec<FormReport>,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub verdict: VerifyVerdict,
    /// Extra evidence for the deformed-contour entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == VerifyVerdict::Pass
    }

    /// JSON with the timing removed: byte-stable for fixed inputs.
    pub fn stable_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("seconds");
        v.to_string()
    }
}

fn c2(v: Complex64) -> [f64; 2] {
    [v.re, v.im]
}

fn report_skeleton(instance: &Instance) -> VerificationReport {
    VerificationReport {
        identity: instance.entry.name.clone(),
        n: instance.entry.n,
        m: instance.entry.m,
        base: [c2(instance.base.p), c2(instance.base.q)],
        seed: instance.seed,
        s_sign: instance.s_sign,
        params: instance
            .assignment
            .iter()
            .map(|(k, v)| (k.clone(), c2(*v)))
            .collect(),
        lhs: SideReport {
            value: [0.0, 0.0],
            grids: vec![],
            deltas: vec![],
            converged: false,
        },
        forms: vec![],
        abs_err: f64::NAN,
        rel_err: f64::NAN,
        tolerance: instance.entry.tolerance,
        seconds: 0.0,
        verdict: VerifyVerdict::Fail,
    detail: None,
    }
}

/// Evaluates the instance and reports lhs, every rhs form with its
/// prefactor, residuals, per-side convergence, and wall time.
/// Non-convergence is recorded in the verdict, never masked.
pub fn verify(instance: &Instance, policy: &VerifyPolicy) -> Result<VerificationReport> {
    let started = Instant::now();
    let mut report = match instance.entry.kind {
        EntryKind::Identity => verify_identity(instance, policy)?,
        EntryKind::Vanishing => special::verify_vanishing(instance, policy)?,
        EntryKind::IteratedOrder => special::verify_iterated(instance, policy)?,
    };
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

fn verify_identity(instance: &Instance, policy: &VerifyPolicy) -> Result<VerificationReport> {
    let entry = &instance.entry;
    let mut report = report_skeleton(instance);
    let lhs_policy = policy.quad_for(entry.lhs.total_dim());
    let lhs = eval_integral(
        &entry.lhs,
        &instance.assignment,
        &instance.base,
        &lhs_policy,
        &policy.trunc,
    )?;
    report.lhs = SideReport::from_quad(&lhs);
    let mut all_converged = lhs.converged;
    let mut worst_abs = 0.0f64;
    let mut worst_rel = 0.0f64;
    for form in &entry.forms {
        let form_policy = policy.quad_for(form.integral.total_dim());
        let integral = eval_integral(
            &form.integral,
            &instance.assignment,
            &instance.base,
            &form_policy,
            &policy.trunc,
        )?;
        let prefactor = eval_prefactor(
            &form.prefactor,
            &instance.assignment,
            &instance.base,
            &policy.trunc,
        )?;
        let combined = prefactor * integral.value;
        let abs_err = (lhs.value - combined).norm();
        let rel_err = abs_err / lhs.value.norm().max(combined.norm());
        all_converged &= integral.converged;
        worst_abs = worst_abs.max(abs_err);
        worst_rel = worst_rel.max(rel_err);
        report.forms.push(FormReport {
            label: form.label.clone(),
            integral: SideReport::from_quad(&integral),
            prefactor: c2(prefactor),
            combined: c2(combined),
            abs_err,
            rel_err,
        });
    }
    report.abs_err = worst_abs;
    report.rel_err = worst_rel;
    report.verdict = if !all_converged {
        VerifyVerdict::NoConverge
    } else if worst_rel <= entry.tolerance {
        VerifyVerdict::Pass
    } else {
        VerifyVerdict::Fail
    };
    Ok(report)
}

//! Batch driver and report writer for the identity verification suite.
//!
//! The interface is run-and-read: every command prints a summary to
//! stdout, optionally writes a JSON report, and encodes its outcome in
//! the exit code (0 pass, 2 fail, 3 no-converge, 1 usage error).

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use ehyp::catalog::{
    instantiate, list_identities, verify, ParamSource, VerificationReport, VerifyPolicy,
    VerifyVerdict,
};
use ehyp::efun::{poch2_detailed, Base, GammaVariant, TruncationPolicy};
use ehyp::fubini::{corpus_case, prefactor_arguments, run_corpus_case, CorpusOutcome};
use ehyp::schema::CorpusData;
use ehyp::symalg::Assignment;

#[derive(Parser)]
#[command(
    name = "ehyp",
    about = "Numerical verification of elliptic hypergeometric integral identities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the elliptic gamma function in one of its three bases.
    Gamma(GammaArgs),
    /// List the registered identities.
    List,
    /// Verify one identity instance.
    Verify(VerifyArgs),
    /// Run the verification matrix.
    Suite(SuiteArgs),
    /// Check order-interchange admissibility of a corpus case or spec file.
    Fubini(FubiniArgs),
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long, value_parser = parse_variant)]
    variant: GammaVariant,
    #[arg(long, value_parser = parse_complex)]
    x: Complex64,
    #[arg(long, value_parser = parse_complex)]
    p: Complex64,
    #[arg(long, value_parser = parse_complex)]
    q: Complex64,
    /// Truncation cutoff for the infinite products.
    #[arg(long, default_value_t = 1e-17)]
    eps: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    identity: String,
    #[arg(long, default_value_t = 1)]
    n: i64,
    #[arg(long, default_value_t = 0)]
    m: i64,
    #[arg(long, value_parser = parse_complex)]
    p: Complex64,
    #[arg(long, value_parser = parse_complex)]
    q: Complex64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON file of explicit parameter values, instead of a seed.
    #[arg(long)]
    params: Option<String>,
    /// Sign flag for square-root parameters.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    sign: i8,
    /// Cap every grid at this size.
    #[arg(long)]
    n_max: Option<usize>,
    /// Write the full JSON report here.
    #[arg(long)]
    json: Option<String>,
    /// Omit wall-clock timing from the report (byte-stable output).
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SuiteArgs {
    /// smoke: univariate entries, one seed. full: every supported order.
    #[arg(long, default_value = "smoke")]
    suite: String,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, value_parser = parse_complex, default_value = "0.2")]
    p: Complex64,
    #[arg(long, value_parser = parse_complex, default_value = "0.25")]
    q: Complex64,
    #[arg(long)]
    json: Option<String>,
}

#[derive(Args)]
struct FubiniArgs {
    /// Corpus case name, or a path to a spec JSON file.
    #[arg(long)]
    case: String,
}

fn parse_variant(s: &str) -> Result<GammaVariant, String> {
    match s {
        "pq" => Ok(GammaVariant::Pq),
        "pq2" => Ok(GammaVariant::Pq2),
        "half" => Ok(GammaVariant::Half),
        other => Err(format!("unknown variant `{other}` (pq | pq2 | half)")),
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` with optional exponents.
fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("cannot parse complex number `{s}`");
    if t.is_empty() {
        return Err(err());
    }
    // Split before the sign of the imaginary part: the last '+'/'-' that
    // is neither leading nor part of an exponent.
    let bytes = t.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'e' && bytes[i - 1] != b'E' {
            split = Some(i);
            break;
        }
    }
    let parse_im = |part: &str| -> Result<f64, String> {
        let body = part.strip_suffix('i').ok_or_else(err)?;
        match body {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => body.parse().map_err(|_| err()),
        }
    };
    if t.ends_with('i') {
        match split {
            Some(i) => {
                let re: f64 = t[..i].parse().map_err(|_| err())?;
                let im = parse_im(&t[i..])?;
                Ok(Complex64::new(re, im))
            }
            None => Ok(Complex64::new(0.0, parse_im(&t)?)),
        }
    } else {
        Ok(Complex64::new(t.parse().map_err(|_| err())?, 0.0))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep help/version at success; real usage errors exit 1.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Gamma(args) => cmd_gamma(args),
        Command::List => cmd_list(),
        Command::Verify(args) => cmd_verify(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Fubini(args) => cmd_fubini(args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn cmd_gamma(args: GammaArgs) -> Result<u8, String> {
    let base = Base::new(args.p, args.q).map_err(|e| e.to_string())?;
    let resolved = args
        .variant
        .resolve(&base, false)
        .map_err(|e| e.to_string())?;
    let pol = TruncationPolicy::with_eps(args.eps);
    let (num, num_info) =
        poch2_detailed(resolved.pq() / args.x, &resolved, &pol).map_err(|e| e.to_string())?;
    let (den, den_info) = poch2_detailed(args.x, &resolved, &pol).map_err(|e| e.to_string())?;
    let value = num / den;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "x": [args.x.re, args.x.im],
            "base": [[resolved.p.re, resolved.p.im], [resolved.q.re, resolved.q.im]],
            "value": [value.re, value.im],
            "truncation": {
                "eps": args.eps,
                "numerator_terms": num_info.terms,
                "numerator_diagonals": num_info.diagonals,
                "denominator_terms": den_info.terms,
                "denominator_diagonals": den_info.diagonals,
            }
        }))
        .unwrap()
    );
    Ok(0)
}

fn cmd_list() -> Result<u8, String> {
    for meta in list_identities() {
        let orders: Vec<String> = meta
            .supported
            .iter()
            .map(|(n, m)| {
                if *m == 0 {
                    format!("n={n}")
                } else {
                    format!("n={n},m={m}")
                }
            })
            .collect();
        println!(
            "{:20} [{}] {}",
            meta.name,
            orders.join(" "),
            meta.description
        );
    }
    Ok(0)
}

fn exit_code_for(report: &VerificationReport) -> u8 {
    match report.verdict {
        VerifyVerdict::Pass => 0,
        VerifyVerdict::Fail => 2,
        VerifyVerdict::NoConverge => 3,
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, String> {
    let base = Base::new(args.p, args.q).map_err(|e| e.to_string())?;
    let source = match &args.params {
        None => ParamSource::Seed(args.seed),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            let raw: BTreeMap<String, [f64; 2]> =
                serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let mut assignment = Assignment::new();
            for (k, [re, im]) in raw {
                assignment.insert(k, Complex64::new(re, im));
            }
            ParamSource::Explicit(assignment)
        }
    };
    let instance = instantiate(&args.identity, args.n, args.m, &base, source, args.sign)
        .map_err(|e| e.to_string())?;
    let policy = VerifyPolicy {
        n_max: args.n_max,
        ..Default::default()
    };
    let mut report = verify(&instance, &policy).map_err(|e| e.to_string())?;
    if args.no_timing {
        report.seconds = 0.0;
    }
    let json = if args.no_timing {
        report.stable_json()
    } else {
        serde_json::to_string_pretty(&report).unwrap()
    };
    if let Some(path) = &args.json {
        std::fs::write(path, &json).map_err(|e| e.to_string())?;
    }
    println!("{json}");
    eprintln!(
        "{} n={} m={} seed={:?}: {:?} (rel_err {:.3e}, tol {:.1e})",
        report.identity,
        report.n,
        report.m,
        report.seed,
        report.verdict,
        report.rel_err,
        report.tolerance
    );
    Ok(exit_code_for(&report))
}

/// Adjusts the requested base to an entry's constraints: clamps the
/// moduli, drops phases when a real base is required, and separates
/// `p` from `q` for the deformed-contour entries whose pole
/// progressions must stay simple.
fn fit_base(data: &ehyp::schema::EntryData, p: Complex64, q: Complex64) -> Base {
    let cap = data.base.max_modulus * 0.995;
    let clamp = |v: Complex64| -> Complex64 {
        if v.norm() > cap {
            v * (cap / v.norm())
        } else {
            v
        }
    };
    let mut p = clamp(p);
    let mut q = clamp(q);
    if data.base.real_required {
        p = Complex64::new(p.norm(), 0.0);
        q = Complex64::new(q.norm(), 0.0);
    }
    if !data.deform.is_empty() && (p.norm() - q.norm()).abs() < 0.02 {
        q = clamp(q * 0.85);
    }
    Base::new(p, q).expect("clamped base is valid")
}

fn cmd_suite(args: SuiteArgs) -> Result<u8, String> {
    let smoke = match args.suite.as_str() {
        "smoke" => true,
        "full" => false,
        other => return Err(format!("unknown suite `{other}` (smoke | full)")),
    };
    struct Row {
        name: String,
        n: i64,
        m: i64,
        seed: u64,
        sign: i8,
    }
    let mut rows = Vec::new();
    for meta in list_identities() {
        let data = ehyp::catalog::entry(&meta.name).unwrap();
        let orders: Vec<(i64, i64)> = if smoke {
            meta.supported.iter().copied().take(1).collect()
        } else {
            meta.supported.clone()
        };
        for (n, m) in orders {
            let resolved = data.resolve(n, m).map_err(|e| e.to_string())?;
            if smoke && resolved.lhs.total_dim() > 1 {
                continue;
            }
            let signs: &[i8] = if resolved.has_sign_flag && !smoke {
                &[1, -1]
            } else {
                &[1]
            };
            let seeds = if smoke { 1 } else { args.seeds.max(1) };
            for seed in 1..=seeds {
                for &sign in signs {
                    rows.push(Row {
                        name: meta.name.clone(),
                        n,
                        m,
                        seed,
                        sign,
                    });
                }
            }
        }
    }
    // Rows are independent; run them concurrently, assemble in order.
    use rayon::prelude::*;
    let reports: Vec<Result<VerificationReport, String>> = rows
        .par_iter()
        .map(|row| {
            let data = ehyp::catalog::entry(&row.name).unwrap();
            let base = fit_base(data, args.p, args.q);
            let instance = instantiate(
                &row.name,
                row.n,
                row.m,
                &base,
                ParamSource::Seed(row.seed),
                row.sign,
            )
            .map_err(|e| format!("{}: {e}", row.name))?;
            verify(&instance, &VerifyPolicy::default()).map_err(|e| format!("{}: {e}", row.name))
        })
        .collect();
    let mut pass = 0usize;
    let mut fail = 0usize;
    let mut stuck = 0usize;
    let mut out_rows = Vec::new();
    for (row, report) in rows.iter().zip(reports) {
        match report {
            Ok(r) => {
                match r.verdict {
                    VerifyVerdict::Pass => pass += 1,
                    VerifyVerdict::Fail => fail += 1,
                    VerifyVerdict::NoConverge => stuck += 1,
                }
                println!(
                    "{:18} n={} m={} seed={} sign={:+}: {:?} rel_err {:.3e} ({:.2}s)",
                    row.name, row.n, row.m, row.seed, row.sign, r.verdict, r.rel_err, r.seconds
                );
                out_rows.push(serde_json::to_value(&r).unwrap());
            }
            Err(e) => {
                fail += 1;
                println!(
                    "{:18} n={} m={} seed={}: ERROR {e}",
                    row.name, row.n, row.m, row.seed
                );
                out_rows.push(serde_json::json!({
                    "identity": row.name, "n": row.n, "m": row.m,
                    "seed": row.seed, "error": e,
                }));
            }
        }
    }
    println!(
        "suite {}: {pass} pass, {fail} fail, {stuck} no-converge",
        args.suite
    );
    if let Some(path) = &args.json {
        let doc = serde_json::json!({
            "suite": args.suite,
            "rows": out_rows,
            "pass": pass,
            "fail": fail,
            "no_converge": stuck,
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())
            .map_err(|e| e.to_string())?;
    }
    Ok(if fail > 0 {
        2
    } else if stuck > 0 {
        3
    } else {
        0
    })
}

fn cmd_fubini(args: FubiniArgs) -> Result<u8, String> {
    let owned: CorpusData;
    let case: &CorpusData = if std::path::Path::new(&args.case).exists() {
        let text = std::fs::read_to_string(&args.case).map_err(|e| e.to_string())?;
        owned = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        &owned
    } else {
        corpus_case(&args.case).map_err(|e| e.to_string())?
    };
    match run_corpus_case(case).map_err(|e| e.to_string())? {
        CorpusOutcome::Rejected(e) => {
            println!("{}: rejected by the graph model: {e}", case.name);
            Ok(0)
        }
        CorpusOutcome::Checked { graph, verdict } => {
            let enumeration =
                ehyp::fubini::enumerate_path_products(&graph, ehyp::fubini::DEFAULT_PATH_CAP)
                    .map_err(|e| e.to_string())?;
            let pref = prefactor_arguments(&enumeration);
            println!(
                "{}: {} vertices, {} edges, {} half-edges",
                case.name,
                graph.vertex_count(),
                graph.edges.len(),
                graph.half_edges.len()
            );
            println!(
                "prefactor arguments: {} open products, {} closed products",
                pref.open.len(),
                pref.closed.len()
            );
            if verdict.admissible {
                println!("verdict: admissible (order interchange is safe)");
            } else {
                println!("verdict: INADMISSIBLE");
                for p in &verdict.offending {
                    println!(
                        "  offending product {} = {}  multiplicity {}  path {}",
                        p.witness
                            .labels
                            .iter()
                            .map(|l| l.to_string())
                            .collect::<Vec<_>>()
                            .join(" * "),
                        p.product,
                        p.multiplicity,
                        p.witness.render(&graph),
                    );
                }
            }
            Ok(0)
        }
    }
}

//! Development probe: verify one catalog entry and print the report.
//!
//! Usage: probe <identity> <n> [m] [p] [q] [seed] [sign]

use ehyp::catalog::{instantiate, verify, ParamSource, VerifyPolicy};
use ehyp::efun::Base;
use num_complex::Complex64;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).expect("identity name");
    let n: i64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    let m: i64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0);
    let p: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let q: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.25);
    let seed: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(1);
    let sign: i8 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(1);
    let base = Base::new(Complex64::new(p, 0.0), Complex64::new(q, 0.0)).unwrap();
    let t0 = std::time::Instant::now();
    let instance = match instantiate(name, n, m, &base, ParamSource::Seed(seed), sign) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("instantiate failed: {e}");
            std::process::exit(1);
        }
    };
    eprintln!("instantiated in {:?} (attempts {})", t0.elapsed(), instance.attempts);
    for (k, v) in &instance.assignment {
        eprintln!("  {k} = {v}  (|.| = {:.4})", v.norm());
    }
    match verify(&instance, &VerifyPolicy::default()) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            eprintln!(
                "verdict {:?}  rel_err {:.3e}  in {:.2}s",
                report.verdict, report.rel_err, report.seconds
            );
        }
        Err(e) => {
            eprintln!("verify failed: {e}");
            std::process::exit(1);
        }
    }
}

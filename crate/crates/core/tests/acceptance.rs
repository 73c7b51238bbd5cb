//! Acceptance battery. Runs as a plain binary (no libtest harness) so the
//! criterion lines are always printed; exits nonzero if any criterion fails.

use std::process::Command;
use std::time::Instant;

use viciouskit::densities::ModelSpec;
use viciouskit::harness::stats::StatReport;
use viciouskit::harness::suites::{
    check_asymptotics, check_bessel_sde, check_count_equivalence, check_de_bruijn, check_dyson_sde, check_imhof,
    check_mehta, check_normalization_two_walkers, check_rmt_identities, check_sampled_spectra, check_survival_mc,
    check_two_walker_survival, check_walker_endpoints, normalization_mc,
};
use viciouskit::rmt::pm_bridge_check;
use viciouskit::Result;

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn summarize(reports: &[StatReport], extra: Option<(bool, String)>) -> Outcome {
    let failed: Vec<&StatReport> = reports.iter().filter(|r| !r.passed()).collect();
    let worst = reports
        .iter()
        .filter(|r| r.critical_value > 0.0)
        .map(|r| (r.statistic / r.critical_value, r.test_name.as_str()))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let mut detail = format!("{} checks", reports.len());
    if let Some((ratio, name)) = worst {
        detail.push_str(&format!(", worst {name} at {ratio:.3} of critical"));
    }
    for r in &failed {
        detail.push_str(&format!("; FAILED {} ({} > {})", r.test_name, r.statistic, r.critical_value));
    }
    let mut passed = failed.is_empty();
    if let Some((ok, note)) = extra {
        passed &= ok;
        detail.push_str(&format!("; {note}"));
    }
    Outcome { passed, detail }
}

fn timed(reports: Result<Vec<StatReport>>, start: Instant, limit: f64) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    match reports {
        Ok(r) => summarize(&r, Some((secs < limit, format!("{secs:.1} s (limit {limit} s)")))),
        Err(e) => Outcome { passed: false, detail: format!("error: {e}") },
    }
}

fn plain(reports: Result<Vec<StatReport>>) -> Outcome {
    match reports {
        Ok(r) => summarize(&r, None),
        Err(e) => Outcome { passed: false, detail: format!("error: {e}") },
    }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    timed(check_count_equivalence(4, 10, 6).map(|r| vec![r]), t, 60.0)
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let r = (|| {
        let mut v = vec![check_two_walker_survival()?];
        v.extend(check_survival_mc(100_000, 1e-3, SEED)?);
        Ok(v)
    })();
    timed(r, t, 300.0)
}

fn criterion_3() -> Outcome {
    let r = (|| {
        let mut v = check_normalization_two_walkers()?;
        for wall in [false, true] {
            for (spec, t, family) in [(ModelSpec::finite(3, 1.0, wall)?, 0.6, "g"), (ModelSpec::infinite(3, wall)?, 0.7, "p")] {
                let (mass, se) = normalization_mc(&spec, t, 1 << 16, 16, SEED)?;
                v.push(
                    StatReport::new(format!("normalization_qmc/{family}/wall={wall}/n=3"), (mass - 1.0).abs(), 1e-3, 1 << 20)
                        .with("mass", mass)
                        .with("std_error", se),
                );
            }
        }
        Ok(v)
    })();
    plain(r)
}

fn criterion_4() -> Outcome {
    plain((|| Ok(vec![check_imhof(false, 100, SEED)?, check_imhof(true, 100, SEED)?]))())
}

fn criterion_5() -> Outcome {
    plain((|| {
        let mut v = vec![check_rmt_identities(30, SEED)?];
        v.extend(check_sampled_spectra(&[2, 3], 10_000, SEED)?);
        Ok(v)
    })())
}

fn criterion_6() -> Outcome {
    plain(check_walker_endpoints(&[16, 32], 10_000, SEED))
}

fn criterion_7() -> Outcome {
    let r = (|| {
        let mut v = check_dyson_sde(2, 10_000, 1e-3, SEED)?;
        v.extend(check_dyson_sde(3, 10_000, 1e-3, SEED)?);
        v.push(check_bessel_sde(10_000, 1e-3, SEED)?);
        Ok(v)
    })();
    if let Ok(v) = &r {
        for rep in v.iter().filter(|r| r.test_name.ends_with("/ordering")) {
            assert_eq!(rep.statistic, 0.0, "ordering violated: {}", rep.test_name);
        }
    }
    plain(r)
}

fn criterion_8() -> Outcome {
    plain(check_asymptotics())
}

fn criterion_9() -> Outcome {
    plain(check_de_bruijn())
}

fn criterion_10() -> Outcome {
    plain(check_mehta())
}

fn criterion_11() -> Outcome {
    plain((|| {
        let mut v = Vec::new();
        for t in [0.25, 0.5, 0.75] {
            v.extend(pm_bridge_check(2, 1.0, t, 10_000, SEED)?);
        }
        Ok(v)
    })())
}

fn run_cli(args: &[&str], out: &std::path::Path) -> std::io::Result<Vec<u8>> {
    let status = Command::new(env!("CARGO_BIN_EXE_viciouskit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()?;
    if status.code().is_none_or(|c| c > 1) {
        return Err(std::io::Error::other(format!("exit status {status}")));
    }
    std::fs::read(out)
}

fn criterion_12() -> Outcome {
    let invocations: [&[&str]; 6] = [
        &["simulate", "--model", "walker", "--n", "2", "--horizon", "1", "--scale", "8", "--start", "0,2", "--samples", "300", "--seed", "7", "--format", "csv"],
        &["simulate", "--model", "sde-g", "--n", "2", "--horizon", "1", "--samples", "200", "--seed", "7", "--streams", "2", "--format", "json"],
        &["simulate", "--model", "sde-p", "--n", "3", "--time", "0.5", "--samples", "200", "--seed", "7", "--format", "csv"],
        &["rmt", "--ensemble", "goe", "--n", "3", "--samples", "500", "--seed", "7", "--format", "csv"],
        &["rmt", "--ensemble", "pm", "--alpha", "0.5", "--n", "2", "--samples", "500", "--seed", "7", "--format", "json"],
        &["count", "--start", "0,2,4", "--end", "0,2,4", "--steps", "6", "--format", "json"],
    ];
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome { passed: false, detail: format!("error: {e}") },
    };
    let mut mismatches = Vec::new();
    for (k, args) in invocations.iter().enumerate() {
        let a = run_cli(args, &dir.path().join(format!("{k}a")));
        let b = run_cli(args, &dir.path().join(format!("{k}b")));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b && !a.is_empty() => {}
            (Ok(_), Ok(_)) => mismatches.push(format!("{} {}: outputs differ", k, args[0])),
            (Err(e), _) | (_, Err(e)) => mismatches.push(format!("{} {}: {e}", k, args[0])),
        }
    }
    Outcome {
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{} invocations byte-identical on repeat", invocations.len())
        } else {
            mismatches.join("; ")
        },
    }
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("exact counts: determinant vs dynamic programme", criterion_1),
        ("survival: two-walker closed form and Brownian non-collision", criterion_2),
        ("normalization", criterion_3),
        ("product relation between horizons", criterion_4),
        ("random-matrix identities and sampled spectra", criterion_5),
        ("walker endpoint convergence", criterion_6),
        ("Dyson and Bessel SDEs", criterion_7),
        ("small-argument asymptotics", criterion_8),
        ("de Bruijn integrals", criterion_9),
        ("Mehta integrals", criterion_10),
        ("interpolating ensemble bridge", criterion_11),
        ("CLI determinism", criterion_12),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failures = 0;
    for (k, (name, run)) in criterion_iter(&criteria, only) {
        let start = Instant::now();
        let o = run();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}: {name} [{:.1} s] {}", k, start.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failures += 1;
        }
    }
    println!("acceptance: {failures} failing criteria");
    if failures > 0 {
        std::process::exit(1);
    }
}

fn criterion_iter(criteria: &[Criterion], only: Option<usize>) -> impl Iterator<Item = (usize, &Criterion)> {
    criteria.iter().enumerate().map(|(i, c)| (i + 1, c)).filter(move |(k, _)| only.is_none_or(|o| o == *k))
}

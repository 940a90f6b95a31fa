//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use lacunary::correlations::{correlation_direct, correlation_naive, mean_via_b0, FourierOptions, TestFunction, TestKind};
use lacunary::counting::parse_rational;
use lacunary::fracparts::{frac_parts, required_precision_for, sample_alpha, FixedPointAlpha, UnitFrac};
use lacunary::harness::{execute, ExperimentConfig, Outcome};
use lacunary::poisson_model::{interval_count_pmf, level_spacing_pdf};
use lacunary::quad::integrate;
use lacunary::seeds::derive_seed;
use lacunary::sequences::{generate, SequenceSpec};
use lacunary::smallparts::{g_max, g_max_brute, lambda_measure};

type Verdict = (bool, String);

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(name: &str) -> Outcome {
    execute(&config(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stat(o: &Outcome, key: &str) -> f64 {
    o.summary.get(key).and_then(|v| v.as_f64()).unwrap_or(f64::NAN)
}

fn checks_line(o: &Outcome) -> String {
    o.checks
        .iter()
        .map(|c| format!("{} {:.4} {} {}", c.name, c.observed, c.relation, c.threshold))
        .collect::<Vec<_>>()
        .join(", ")
}

fn seeded_points(spec: &SequenceSpec, n: usize, seed: u64, guard: u32) -> lacunary::fracparts::OrderedPoints {
    let values = generate(spec, n).unwrap();
    let p = required_precision_for(&values, guard, u64::MAX).unwrap();
    frac_parts(&sample_alpha(seed, p).unwrap(), &values, guard).unwrap()
}

fn oracle_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &n in &[16usize, 32, 64] {
        for s in 0..50u64 {
            let pts = seeded_points(&SequenceSpec::geometric(2), n, derive_seed(1, s), 48);
            for k in [2usize, 3] {
                for kind in [TestKind::SmoothBump, TestKind::Box, TestKind::Triangle] {
                    let rho = if s % 2 == 0 { 1.0 } else { 2.5 };
                    let f = TestFunction::for_order(kind, k, rho).unwrap();
                    let a = correlation_direct(&pts, k, &f).unwrap().value;
                    let b = correlation_naive(&pts, k, &f).unwrap().value;
                    worst = worst.max((a - b).abs());
                    cases += 1;
                }
            }
        }
    }
    (worst <= 1e-9, format!("{cases} cases, max |direct - naive| = {worst:.3e} (tol 1e-9)"))
}

fn poisson_spacings() -> Verdict {
    let o = run("spacing_poisson.toml");
    (
        o.passed(),
        format!(
            "{}; i.i.d. control medians {:.4} / {:.4}",
            checks_line(&o),
            stat(&o, "control_median_ks_level1"),
            stat(&o, "control_median_ks_level2")
        ),
    )
}

fn r2_limit() -> Verdict {
    let o = run("r_k_limit.toml");
    (o.passed(), format!("{}; mean R_2 {:.4} vs int f {:.4}", checks_line(&o), stat(&o, "mean_r"), stat(&o, "integral")))
}

fn mean_identity() -> Verdict {
    let o = run("mean_check.toml");
    let mut exact = true;
    let mut worst: f64 = 0.0;
    let f = TestFunction::for_order(TestKind::Triangle, 2, 1.0).unwrap();
    for n in [16usize, 32, 64, 100, 124] {
        let values = generate(&SequenceSpec::geometric(2), n).unwrap();
        let b0 = mean_via_b0(2, &f, n, &values, FourierOptions::default()).unwrap();
        let want = f.integral() * (1.0 - 1.0 / n as f64);
        exact &= b0 == want;
        worst = worst.max((b0 - want).abs());
    }
    (
        o.passed() && exact,
        format!(
            "{}; mean {:.5} +- {:.5} vs b(0,N)/N^2 {:.6}; b(0,N)/N^2 = int f (1 - 1/N) for N in 16..124: {} (max diff {worst:e})",
            checks_line(&o),
            stat(&o, "mean_r"),
            stat(&o, "standard_error"),
            stat(&o, "b0_normalized"),
            exact
        ),
    )
}

fn variance_decay() -> Verdict {
    let o = run("variance_decay.toml");
    (o.passed(), checks_line(&o))
}

fn counting_growth() -> Verdict {
    let h = run("counting_homogeneous.toml");
    let p = run("counting_pair.toml");
    (h.passed() && p.passed(), format!("homogeneous: {}; pair: {}", checks_line(&h), checks_line(&p)))
}

fn contrast() -> Verdict {
    let o = run("contrast.toml");
    let p = |key: &str| o.summary[key]["p"].as_f64().unwrap_or(f64::NAN);
    (o.passed(), format!("p(x^2) {:.3}, p(2^x) {:.3}; {}", p("contrast_fit"), p("lacunary_fit"), checks_line(&o)))
}

/// `(a, N)` instances with `a_{j+1} >= N a_j`.
fn lambda_family() -> Vec<(Vec<u64>, u64)> {
    let mut fam = Vec::new();
    for (a1, n) in [(1, 2), (3, 5), (7, 10), (1, 16), (5, 3), (11, 4), (2, 100), (999, 7)] {
        fam.push((vec![a1], n));
    }
    for (a1, n, extra) in [(1, 2, 0), (3, 4, 1), (2, 5, 3), (5, 8, 0), (7, 3, 2), (1, 10, 5), (4, 6, 1), (13, 4, 0)] {
        fam.push((vec![a1, a1 * n + extra], n));
    }
    for (a, n) in [
        (vec![3, 24, 192], 8),
        (vec![2, 20, 200], 10),
        (vec![1, 3, 10], 3),
        (vec![1, 4, 17], 4),
        (vec![5, 26, 131], 5),
        (vec![2, 13, 80], 6),
    ] {
        fam.push((a, n));
    }
    fam
}

fn lambda_bound() -> Verdict {
    let fam = lambda_family();
    let mut ok = true;
    let mut notes = Vec::new();
    for (a, n) in &fam {
        let m = lambda_measure(a, *n).unwrap();
        let measure = parse_rational(&m.measure).unwrap();
        let k = a.len() as u32;
        let bound = BigRational::new(BigUint::from(4u8).pow(k).into(), BigUint::from(*n).pow(k).into());
        let within = measure <= bound && m.within_bound;
        let k1 = k != 1 || measure == BigRational::new(2.into(), (*n).into());
        if !(within && k1) {
            ok = false;
            notes.push(format!("{a:?} N={n}: {}", m.measure));
        }
    }
    let ks = |k| fam.iter().filter(|(a, _)| a.len() == k).count();
    (ok, format!("{} instances (k=1: {}, k=2: {}, k=3: {}); violations: {:?}", fam.len(), ks(1), ks(2), ks(3), notes))
}

fn smallparts_rarity() -> Verdict {
    let o = run("smallparts_census.toml");
    let mut fixtures = 0;
    let mut mismatches = Vec::new();
    let specs = [SequenceSpec::geometric(2), SequenceSpec::geometric(3), SequenceSpec::fibonacci_like(1, 2)];
    for spec in &specs {
        for n in (2..=16).chain([24, 32, 64, 100, 128, 200, 256]) {
            for s in 0..4 {
                let pts = seeded_points(spec, n, derive_seed(9, s), 48);
                let (fast, slow) = (g_max(&pts).g_max, g_max_brute(&pts));
                fixtures += 1;
                if fast != slow {
                    mismatches.push((n, s, fast, slow));
                }
            }
        }
    }
    (
        o.passed() && mismatches.is_empty(),
        format!("{}; two-pointer vs brute force on {fixtures} fixtures, mismatches {mismatches:?}", checks_line(&o)),
    )
}

fn stability() -> Verdict {
    let o = run("stability.toml");
    (o.passed(), format!("{}; mean delta {:.4}", checks_line(&o), stat(&o, "mean_delta")))
}

fn model_sanity() -> Verdict {
    let mut worst_pdf: f64 = 0.0;
    for a in 1..=6 {
        let total = integrate(|s| level_spacing_pdf(a, s).unwrap(), 0.0, 80.0, 1e-12);
        worst_pdf = worst_pdf.max((total - 1.0).abs());
    }
    let mut worst_pmf: f64 = 0.0;
    for lambda in [0.5, 1.0, 2.0] {
        let total: f64 = (0..=60).map(|k| interval_count_pmf(lambda, k).unwrap()).sum();
        worst_pmf = worst_pmf.max((total - 1.0).abs());
    }
    (
        worst_pdf <= 1e-8 && worst_pmf <= 1e-12,
        format!("max |int P_a - 1| = {worst_pdf:.2e} (tol 1e-8), max |sum pmf - 1| = {worst_pmf:.2e} (tol 1e-12)"),
    )
}

fn precision_contract() -> Verdict {
    let n = 2000;
    let values = generate(&SequenceSpec::geometric(2), n).unwrap();
    let p = required_precision_for(&values, 64, u64::MAX).unwrap();
    let tol = 1u128 << (128 - 40);
    let mut worst = 0u128;
    let alphas = [(1u64, 3u64), (2, 7), (355, 113 * 4), (123_457, 999_983), (500_000, 1_000_000 - 1), (1, 1_000_000)];
    for &(num, den) in &alphas {
        let alpha = FixedPointAlpha::from_rational(num, den, p).unwrap();
        let pts = frac_parts(&alpha, &values, 64).unwrap();
        let q = BigUint::from(den);
        let mut r = BigUint::from(num) % &q;
        for t in pts.by_index() {
            r = (&r << 1u32) % &q;
            // {num 2^x / den} = r / den exactly
            let exact: BigUint = (&r << 128u32) / &q;
            let exact = UnitFrac(exact.to_u128().unwrap());
            worst = worst.max(exact.circle_distance(*t));
        }
    }
    let worst_log2 = if worst == 0 { f64::NEG_INFINITY } else { (worst as f64).log2() - 128.0 };
    (worst <= tol, format!("{} rationals, N = {n}: max error 2^{worst_log2:.1} (tol 2^-40)", alphas.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("oracle equivalence", oracle_equivalence),
        ("Poisson spacings", poisson_spacings),
        ("R_2 limit", r2_limit),
        ("mean identity", mean_identity),
        ("variance decay", variance_decay),
        ("counting growth", counting_growth),
        ("contrast", contrast),
        ("Lambda measure bound", lambda_bound),
        ("small-parts rarity", smallparts_rarity),
        ("stability", stability),
        ("model sanity", model_sanity),
        ("precision contract", precision_contract),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|w| name.contains(w.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<22} {}  [{:.1}s] {detail}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

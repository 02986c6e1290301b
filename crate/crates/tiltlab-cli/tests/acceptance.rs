//! Full-budget acceptance run: one PASS/FAIL line per criterion, then a check that
//! every outcome matches the recorded expectation. Criteria that currently fail are
//! listed in `EXPECTED_FAILURES` with the reason.

use std::time::{Duration, Instant};

use tiltlab::diagnostics::TestReport;
use tiltlab_cli::config::Command;
use tiltlab_cli::suites::{
    avoidance_reports, confinement_reports, coupling_reports, fs_density_report, fs_tail_report, geometry_reports,
    gibbs_reports, marginal_report, pbr_reports, refinement_report, scaling_report, slope_reports, Budget, BudgetTier,
    Suite,
};
use tiltlab_cli::{execute, RunConfig};

const SEED: u64 = 20_261_018;

/// Criteria expected to fail at the full budget, with the reason.
const EXPECTED_FAILURES: &[(&str, &str)] = &[
    ("C6", "ratios for k=3,4 come out near 1.58 and 1.82; lower lines are not yet in the cube-root regime at this depth"),
    ("C7", "fitted lower-line tail exponent is about 6.8, far from the predicted value at reachable heights"),
    ("C8", "top-line slope estimate sits near -1.8, about 100 standard errors from -2 at the reachable window"),
    ("C9", "interior marginal is shifted by about +1.7 with variance near 6.3 versus the centred Gaussian"),
];

struct Criterion {
    id: &'static str,
    title: &'static str,
    reports: Vec<TestReport>,
    elapsed: Duration,
    time_limit: Option<Duration>,
    extra: Option<(bool, String)>,
}

impl Criterion {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self { id, title, reports: Vec::new(), elapsed: Duration::ZERO, time_limit: None, extra: None }
    }

    fn passed(&self) -> bool {
        let timely = self.time_limit.is_none_or(|l| self.elapsed <= l);
        let extra = self.extra.as_ref().is_none_or(|(ok, _)| *ok);
        timely && extra && self.reports.iter().all(|r| r.pass)
    }

    fn print(&self) {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        println!("{tag} {} {} ({:.1} s)", self.id, self.title, self.elapsed.as_secs_f64());
        for r in &self.reports {
            let mark = if r.pass { "ok " } else { "bad" };
            println!("    {mark} {} {} = {:.6} vs {:?}", r.name, r.statistic, r.value, r.threshold);
        }
        if let Some((ok, what)) = &self.extra {
            println!("    {} {what}", if *ok { "ok " } else { "bad" });
        }
        if let Some(l) = self.time_limit {
            println!("    runtime limit {:.0} s", l.as_secs_f64());
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn pick(reports: &[TestReport], prefix: &str) -> Vec<TestReport> {
    reports.iter().filter(|r| r.name.starts_with(prefix)).cloned().collect()
}

fn verify_bytes(dir: &std::path::Path, threads: usize) -> Vec<u8> {
    let mut cfg = RunConfig { command: Some(Command::Verify), seed: Some(SEED), threads: Some(threads), ..Default::default() };
    cfg.out_dir = Some(dir.to_path_buf());
    cfg.verify.suite = Suite::All;
    cfg.verify.budget = BudgetTier::Smoke;
    cfg.verify.out = format!("verify-{threads}.jsonl").into();
    let out = execute(cfg).expect("verify runs");
    std::fs::read(&out.outputs[0]).unwrap()
}

fn main() {
    let budget = Budget::tier(BudgetTier::Full);
    let mut all = Vec::new();
    let minutes = |m: u64| Some(Duration::from_secs(60 * m));

    let mut c = Criterion::new("C1", "primal/dual samplers agree on X(0)");
    let (pbr, t) = timed(|| pbr_reports(&budget, SEED).unwrap());
    c.reports = pbr.iter().map(|p| p.report.clone()).collect();
    c.elapsed = t;
    c.time_limit = minutes(5);
    c.print();
    all.push(c);

    let mut c = Criterion::new("C2", "stationary density of the zero-boundary line");
    let (fs, t) = timed(|| fs_density_report(&budget, SEED).unwrap());
    c.reports = vec![fs.clone()];
    c.elapsed = t;
    c.time_limit = minutes(10);
    c.print();
    all.push(c);

    let mut c = Criterion::new("C3", "stretched-exponential tail prefactor");
    let (r, t) = timed(|| fs_tail_report(&budget, SEED).unwrap());
    c.reports = vec![r];
    c.elapsed = t;
    c.time_limit = minutes(20);
    c.print();
    all.push(c);

    let mut c = Criterion::new("C4", "scaling covariance");
    let (r, t) = timed(|| scaling_report(&budget, SEED).unwrap());
    c.reports = vec![r];
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C5", "monotone coupling keeps its order");
    let (r, t) = timed(|| coupling_reports(&budget, SEED).unwrap());
    c.reports = r;
    c.elapsed = t;
    c.print();
    all.push(c);

    let (conf, t) = timed(|| confinement_reports(&budget, SEED).unwrap());
    let mut c = Criterion::new("C6", "successive line heights shrink by the cube root of the ratio");
    c.reports = pick(&conf, "confinement_ratio");
    c.elapsed = t;
    c.print();
    all.push(c);
    let mut c = Criterion::new("C7", "lower-line tail exponent");
    c.reports = pick(&conf, "lower_line_tail_exponent");
    c.print();
    all.push(c);

    let mut c = Criterion::new("C8", "top-line slopes and shift covariance");
    let (r, t) = timed(|| slope_reports(&budget, SEED).unwrap());
    c.reports = r;
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C9", "Gaussian interior marginal");
    let (r, t) = timed(|| marginal_report(&budget, SEED).unwrap());
    c.reports = vec![r];
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C10", "parabola avoidance exponent");
    let (r, t) = timed(|| avoidance_reports(&budget, SEED).unwrap());
    c.reports = r;
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C11", "resampling invariance, with a detected mutation");
    let (r, t) = timed(|| gibbs_reports(&budget, SEED).unwrap());
    c.reports = r;
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C12", "deterministic geometry");
    let (r, t) = timed(|| geometry_reports(SEED).unwrap());
    c.reports = r;
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C13", "verify output is byte-reproducible");
    let dir = tempfile::tempdir().unwrap();
    let ((a, b), t) = timed(|| (verify_bytes(dir.path(), 1), verify_bytes(dir.path(), 2)));
    c.extra = Some((a == b && !a.is_empty(), format!("smoke suite twice (1 and 2 threads): {} bytes, identical = {}", a.len(), a == b)));
    c.elapsed = t;
    c.print();
    all.push(c);

    let mut c = Criterion::new("C14", "doubling the grid moves each statistic by less than its margin");
    let fine = budget.refined();
    let (r, t) = timed(|| {
        let mut out: Vec<TestReport> = pbr
            .iter()
            .zip(pbr_reports(&fine, SEED).unwrap())
            .map(|(c, f)| refinement_report(&format!("pbr a={} x={} T={}", c.a, c.x, c.t), &c.report, &f.report))
            .collect();
        out.push(refinement_report("fs_density_l1", &fs, &fs_density_report(&fine, SEED).unwrap()));
        out
    });
    c.reports = r;
    c.elapsed = t;
    c.print();
    all.push(c);

    println!();
    let mut mismatches = Vec::new();
    for c in &all {
        let expected_fail = EXPECTED_FAILURES.iter().find(|(id, _)| *id == c.id);
        match (c.passed(), expected_fail) {
            (true, None) | (false, Some(_)) => {}
            (true, Some((_, why))) => mismatches.push(format!("{} passed but is recorded as failing ({why})", c.id)),
            (false, None) => mismatches.push(format!("{} failed", c.id)),
        }
        if let (false, Some((_, why))) = (c.passed(), expected_fail) {
            println!("{} fails as recorded: {why}", c.id);
        }
    }
    let passed = all.iter().filter(|c| c.passed()).count();
    println!("{passed}/{} criteria pass", all.len());
    if !mismatches.is_empty() {
        for m in &mismatches {
            eprintln!("unexpected outcome: {m}");
        }
        std::process::exit(1);
    }
}

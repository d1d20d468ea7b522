//! The integrator property suites: every closed form from the integrator
//! families checked against its quadrature or Monte Carlo realization, with
//! a JSON report of per-check residuals.

use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;

use pathkernel::integrators::{
    dirac_compose, dirac_gaussian_limit, dtau_reduce, gamma_moment, gamma_normalize, gamma_reduce,
    gaussian_covariance, gaussian_reduce, gaussian_stein_residual, generating_series_term,
    hermite_reduce, normal_ordered_moment, normal_ordered_monomial, Contour, GammaSpec,
    GaussianSpec, HermiteSpec,
};

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub family: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
struct SuiteReport {
    checks: Vec<CheckResult>,
    passed: usize,
    failed: usize,
}

struct Suite {
    checks: Vec<CheckResult>,
    filter: Option<String>,
}

impl Suite {
    fn new(filter: Option<&str>) -> Self {
        Self {
            checks: Vec::new(),
            filter: filter.map(|s| s.to_string()),
        }
    }

    fn family_enabled(&self, family: &str) -> bool {
        self.filter.as_deref().map_or(true, |f| f == family)
    }

    fn push(&mut self, family: &str, name: &str, residual: f64, tolerance: f64) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            family: family.to_string(),
            passed: residual.abs() <= tolerance,
            residual,
            tolerance,
        });
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn rel_err(value: f64, expected: f64) -> f64 {
    (value - expected).abs() / expected.abs().max(1e-300)
}

pub fn run(
    only: Option<&str>,
    out_dir: &Path,
    seed: u64,
    inject_fault: bool,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut suite = Suite::new(only);

    if suite.family_enabled("gaussian") {
        gaussian_checks(&mut suite, seed)?;
    }
    if suite.family_enabled("dirac") {
        dirac_checks(&mut suite)?;
    }
    if suite.family_enabled("hermite") {
        hermite_checks(&mut suite)?;
    }
    if suite.family_enabled("gamma") {
        gamma_checks(&mut suite)?;
    }
    if suite.family_enabled("dtau") {
        dtau_checks(&mut suite)?;
    }

    if inject_fault {
        suite.push("harness", "injected fault", 1.0, 0.0);
    }

    std::fs::create_dir_all(out_dir)?;
    let failed = suite.checks.iter().filter(|c| !c.passed).count();
    let report = SuiteReport {
        passed: suite.checks.len() - failed,
        failed,
        checks: suite.checks,
    };
    let path = out_dir.join("integrator_suite.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    for c in &report.checks {
        println!(
            "[{}] {}::{} residual {:.3e} (tol {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.family,
            c.name,
            c.residual,
            c.tolerance
        );
    }
    println!(
        "{} checks, {} passed, {} failed -> {}",
        report.passed + report.failed,
        report.passed,
        report.failed,
        path.display()
    );
    Ok(if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn gaussian_checks(suite: &mut Suite, seed: u64) -> Result<(), Box<dyn std::error::Error>> {
    let spec = GaussianSpec::scalar(1.3, 0.8)?;
    suite.push(
        "gaussian",
        "normalization",
        rel_err(gaussian_reduce(&spec, |_| 1.0)?, 1.0),
        1e-9,
    );
    suite.push(
        "gaussian",
        "zero mean",
        gaussian_reduce(&spec, |u| u[0])?,
        1e-10,
    );
    suite.push(
        "gaussian",
        "scalar covariance",
        rel_err(
            gaussian_reduce(&spec, |u| u[0] * u[0])?,
            1.3 * 0.8 / TWO_PI,
        ),
        1e-9,
    );
    let (t, u) = (0.25, 0.75);
    let two = GaussianSpec::from_rows(TWO_PI, 2, &[t, t, t, u])?;
    suite.push(
        "gaussian",
        "pair covariance min rule",
        rel_err(gaussian_reduce(&two, |v| v[0] * v[1])?, t),
        1e-9,
    );
    let cov = gaussian_covariance(TWO_PI, 2, 0.25, 0.75)?;
    suite.push(
        "gaussian",
        "covariance matrix min(t,u)",
        rel_err(cov[(0, 0)], 0.25) + cov[(0, 1)].abs(),
        1e-12,
    );
    let unit = GaussianSpec::scalar(TWO_PI, 1.0)?;
    for (name, f) in [
        ("stein linear", (|u: &[f64]| u[0]) as fn(&[f64]) -> f64),
        ("stein quadratic", |u: &[f64]| u[0] * u[0]),
        ("stein exponential", |u: &[f64]| u[0].exp()),
    ] {
        let r = gaussian_stein_residual(&unit, f, 50_000, seed)?;
        suite.push("gaussian", name, r.max_sigma_ratio(), 4.0);
    }
    Ok(())
}

fn dirac_checks(suite: &mut Suite) -> Result<(), Box<dyn std::error::Error>> {
    let v = dirac_compose(|x| (x[0] + 1.0).powi(2), |x| x.to_vec(), &[vec![0.0]])?;
    suite.push("dirac", "identity map", rel_err(v, 1.0), 1e-8);
    let v = dirac_compose(|_| 1.0, |x| vec![2.0 * x[0]], &[vec![0.0]])?;
    suite.push("dirac", "linear determinant factor", rel_err(v, 0.5), 1e-8);
    let f = |x: f64| x * x;
    let m = |x: f64| x * x - 1.0;
    let exact = dirac_compose(
        |x| x[0] * x[0],
        |x| vec![x[0] * x[0] - 1.0],
        &[vec![1.0], vec![-1.0]],
    )?;
    suite.push("dirac", "two-root composition", rel_err(exact, 1.0), 1e-8);
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&s| (dirac_gaussian_limit(f, m, &[1.0, -1.0], s) - exact).abs())
        .collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    suite.push(
        "dirac",
        "narrow-gaussian monotone convergence",
        if monotone { 0.0 } else { 1.0 },
        0.5,
    );
    suite.push("dirac", "narrow-gaussian final error", errs[2], 1e-3);
    Ok(())
}

fn hermite_checks(suite: &mut Suite) -> Result<(), Box<dyn std::error::Error>> {
    let (s, w) = (1.1, 0.9);
    let mut worst: f64 = 0.0;
    for n in 0..=6usize {
        let spec = HermiteSpec::new(n, s, w)?;
        let v = hermite_reduce(&spec, |_| 1.0)?;
        let expected = if n == 0 { 1.0 } else { 0.0 };
        worst = worst.max((v - expected).abs());
    }
    suite.push("hermite", "normalization delta_n0 (n<=6)", worst, 1e-8);
    let mut worst: f64 = 0.0;
    for n in 0..=6usize {
        let spec = HermiteSpec::new(n, s, w)?;
        for m in 0..=6usize {
            let closed = normal_ordered_moment(&spec, m)?;
            let quad = hermite_reduce(&spec, normal_ordered_monomial(&spec, m))?;
            worst = worst.max((closed - quad).abs() / closed.abs().max(1.0));
        }
    }
    suite.push("hermite", "normal-ordered moments (m,n<=6)", worst, 1e-8);
    let x = std::f64::consts::PI * s * w;
    let mut worst: f64 = 0.0;
    let mut fact = 1.0;
    for n in 0..=8usize {
        if n > 0 {
            fact *= n as f64;
        }
        let spec = HermiteSpec::new(n, s, w)?;
        let term = generating_series_term(&spec, n);
        worst = worst.max((term - x.powi(n as i32) / fact).abs());
    }
    suite.push("hermite", "generating-series terms (n<=8)", worst, 0.0);
    Ok(())
}

fn gamma_checks(suite: &mut Suite) -> Result<(), Box<dyn std::error::Error>> {
    let mut worst: f64 = 0.0;
    for &(omega, nu) in &[(-1.0, 2.0), (-2.0, 1.0), (-0.7, 0.5)] {
        let spec = GammaSpec::line(omega, nu)?;
        worst = worst.max(rel_err(gamma_reduce(&spec, |_| 1.0)?, gamma_normalize(&spec)));
    }
    suite.push("gamma", "normalization quad vs closed form", worst, 1e-9);
    let mut worst: f64 = 0.0;
    for &rho in &[0.5, 1.0, 2.0] {
        for &(omega, nu) in &[(-1.0, 1.0), (-2.0, 0.8)] {
            let spec = GammaSpec::line(omega, nu)?;
            let quad = gamma_reduce(&spec, |u| u.powf(rho))?;
            worst = worst.max(rel_err(quad, gamma_moment(&spec, rho)?));
        }
    }
    suite.push("gamma", "moments rho in {0.5,1,2}", worst, 1e-9);
    let mut worst: f64 = 0.0;
    for &eps in &[0.5, 2.0, 10.0] {
        let base = GammaSpec::line(-1.3, 1.7)?;
        let scaled = GammaSpec::line(-1.3 * eps, 1.7)?;
        worst = worst.max(rel_err(
            gamma_normalize(&scaled),
            eps.powf(-1.7) * gamma_normalize(&base),
        ));
    }
    suite.push("gamma", "omega scaling", worst, 1e-12);
    let circle = GammaSpec::new(-1.0, 1.5, Contour::Circle)?;
    let quad = gamma_reduce(&circle, |u| u.powf(1.0))?;
    suite.push(
        "gamma",
        "circle moment vs incomplete-gamma ratio",
        rel_err(quad, gamma_moment(&circle, 1.0)?),
        1e-9,
    );
    Ok(())
}

fn dtau_checks(suite: &mut Suite) -> Result<(), Box<dyn std::error::Error>> {
    let v = dtau_reduce(|t| t * (-t).exp(), 1.0)?;
    suite.push("dtau", "log-measure value", rel_err(v, 1.0), 1e-8);
    let mut worst: f64 = 0.0;
    for &eps in &[0.5, 2.0, 10.0] {
        let scaled = dtau_reduce(|t| (eps * t) * (-eps * t).exp(), 1.0)?;
        worst = worst.max(rel_err(scaled, v));
    }
    suite.push("dtau", "scale invariance", worst, 1e-8);
    let diverges = dtau_reduce(|_| 1.0, 1.0).is_err();
    suite.push(
        "dtau",
        "divergence detection",
        if diverges { 0.0 } else { 1.0 },
        0.5,
    );
    Ok(())
}

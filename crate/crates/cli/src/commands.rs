//! The solve / exit-profile / kernel / eigen subcommands.

use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use pathkernel::kernels::{kernel_density, DensityGrid, KernelConfig};
use pathkernel::model::{make_problem, ExitTimeStrategy, ProblemConfig, ProblemSpec, Shape};
use pathkernel::solve::{
    eigen_dirichlet, operator_residual, problem_fingerprint, solve_dirichlet, EigenKernel,
};

use crate::manifest::ManifestBuilder;
use crate::RunArgs;

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn load_problem(run: &RunArgs) -> Result<ProblemSpec, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(&run.config)
        .map_err(|e| format!("cannot read config {}: {e}", run.config.display()))?;
    let cfg = ProblemConfig::from_json(&text)?;
    let mut problem = make_problem(&cfg)?;
    if let Some(mode) = &run.mode {
        problem.exit_strategy = match mode.as_str() {
            "critical" => match problem.exit_strategy {
                s @ ExitTimeStrategy::CriticalDistance { .. } => s,
                _ => ExitTimeStrategy::CriticalDistance { speed: 1.0 },
            },
            "fixed-energy" => match problem.exit_strategy {
                s @ ExitTimeStrategy::FixedEnergy { .. } => s,
                _ => ExitTimeStrategy::FixedEnergy {
                    energy: std::f64::consts::PI,
                },
            },
            "baseline" => ExitTimeStrategy::StochasticBaseline,
            other => return Err(format!("unknown mode '{other}'").into()),
        };
    }
    Ok(problem)
}

/// Parse `--points`: an integer count (uniform interior points, 1-D only) or
/// explicit points "x1,x2;y1,y2".
fn parse_points(spec: &str, problem: &ProblemSpec) -> Result<Vec<Vec<f64>>, String> {
    if let Ok(count) = spec.trim().parse::<usize>() {
        let (a, b) = match problem.domain.shape() {
            Shape::Interval { a, b } => (*a, *b),
            other => {
                return Err(format!(
                    "a point count needs an interval domain (got {other:?}); pass explicit points"
                ))
            }
        };
        if count == 0 {
            return Err("point count must be positive".into());
        }
        return Ok((1..=count)
            .map(|k| vec![a + (b - a) * k as f64 / (count + 1) as f64])
            .collect());
    }
    spec.split(';')
        .map(|p| {
            p.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad point '{p}': {e}")))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|pts| {
            let m = problem.dimension();
            if pts.iter().any(|p| p.len() != m) {
                Err(format!("points must have {m} coordinates"))
            } else {
                Ok(pts)
            }
        })
}

fn write_text(path: &Path, content: &str) -> std::io::Result<()> {
    std::fs::write(path, content)
}

pub fn solve(run: &RunArgs, points_spec: &str) -> CmdResult {
    let problem = load_problem(run)?;
    let points = parse_points(points_spec, &problem)?;
    let mut manifest = ManifestBuilder::new("solve", Some(&run.config), run.seed);
    std::fs::create_dir_all(&run.out)?;

    let field = solve_dirichlet(&problem, &points, run.samples, run.seed)?;
    let m = problem.dimension();
    let mut csv = String::new();
    for j in 1..=m {
        write!(csv, "x{j},")?;
    }
    csv.push_str("value,stderr,interior,boundary\n");
    for ps in &field.points {
        for c in &ps.point {
            write!(csv, "{c},")?;
        }
        writeln!(
            csv,
            "{},{},{},{}",
            ps.value, ps.std_error, ps.interior, ps.boundary
        )?;
    }
    let csv_path = run.out.join("solution.csv");
    write_text(&csv_path, &csv)?;
    manifest.add_output(&csv_path);

    // Residual summary on a uniform 1-D grid when the domain is an interval.
    let residual_summary = if let Shape::Interval { a, b } = problem.domain.shape() {
        let grid = DensityGrid::new_1d(*a, *b, 32);
        let values: Vec<f64> = {
            let centers: Vec<Vec<f64>> = (0..32).map(|i| grid.center(i)).collect();
            let grid_field = solve_dirichlet(&problem, &centers, run.samples, run.seed)?;
            grid_field.points.iter().map(|p| p.value).collect()
        };
        let res = operator_residual(&problem, &grid, &values)?;
        Some(serde_json::json!({
            "max_abs": res.max_abs,
            "median_abs": res.median_abs,
        }))
    } else {
        None
    };

    let summary = serde_json::json!({
        "problem_hash": problem_fingerprint(&problem),
        "mode": field.mode,
        "points": field.points,
        "residual_summary": residual_summary,
        "eigenvalues": serde_json::Value::Null,
    });
    let json_path = run.out.join("solution.json");
    write_text(&json_path, &serde_json::to_string_pretty(&summary)?)?;
    manifest.add_output(&json_path);
    manifest.write(&run.out)?;
    println!("solution written to {}", csv_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn exit_profile(run: &RunArgs, points_spec: &str) -> CmdResult {
    let problem = load_problem(run)?;
    let points = parse_points(points_spec, &problem)?;
    let mut manifest = ManifestBuilder::new("exit-profile", Some(&run.config), run.seed);
    std::fs::create_dir_all(&run.out)?;
    let m = problem.dimension();
    let mut csv = String::new();
    for j in 1..=m {
        write!(csv, "x{j},")?;
    }
    csv.push_str("exit_time,");
    for j in 1..=m {
        write!(csv, "sigma{j},")?;
    }
    csv.push_str("transversality_residual,energy_residual,candidates\n");
    for p in &points {
        let e = pathkernel::critical::exit_profile(&problem, p)?;
        for c in p {
            write!(csv, "{c},")?;
        }
        write!(csv, "{},", e.exit_time)?;
        for c in &e.exit_point {
            write!(csv, "{c},")?;
        }
        writeln!(
            csv,
            "{},{},{}",
            e.transversality_residual,
            e.energy_residual,
            e.candidates.len()
        )?;
    }
    let csv_path = run.out.join("exit_profile.csv");
    write_text(&csv_path, &csv)?;
    manifest.add_output(&csv_path);
    manifest.write(&run.out)?;
    println!("exit profiles written to {}", csv_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn kernel(run: &RunArgs, start_spec: &str, bins: usize) -> CmdResult {
    let problem = load_problem(run)?;
    let start: Vec<f64> = start_spec
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad start point '{start_spec}': {e}"))?;
    if start.len() != problem.dimension() {
        return Err(format!("start point must have {} coordinates", problem.dimension()).into());
    }
    let (a, b) = match problem.domain.shape() {
        Shape::Interval { a, b } => (*a, *b),
        other => {
            return Err(format!("kernel density grids support interval domains (got {other:?})").into())
        }
    };
    let mut manifest = ManifestBuilder::new("kernel", Some(&run.config), run.seed);
    std::fs::create_dir_all(&run.out)?;
    let grid = DensityGrid::new_1d(a, b, bins);
    let cfg = KernelConfig::default();
    let density = kernel_density(&problem, &start, &grid, run.samples, run.seed, &cfg)?;
    let empty_bins = density.hits.iter().filter(|&&h| h == 0).count();
    if empty_bins > 0 {
        eprintln!("note: {empty_bins} bins received no hits");
    }
    let mut csv = String::from("x1,value,stderr\n");
    for i in 0..grid.total_bins() {
        writeln!(
            csv,
            "{},{},{}",
            grid.center(i)[0],
            density.values[i],
            density.std_errors[i]
        )?;
    }
    let csv_path = run.out.join("kernel_density.csv");
    write_text(&csv_path, &csv)?;
    manifest.add_output(&csv_path);
    manifest.write(&run.out)?;
    println!("kernel density written to {}", csv_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn eigen(run: &RunArgs, nodes: usize, count: usize, kernel_source: &str) -> CmdResult {
    let problem = load_problem(run)?;
    let kernel = match kernel_source {
        "analytic" => EigenKernel::AnalyticInterval { problem: &problem },
        "estimated" => EigenKernel::Estimated {
            problem: &problem,
            samples: run.samples,
            seed: run.seed,
        },
        other => return Err(format!("unknown kernel source '{other}'").into()),
    };
    let mut manifest = ManifestBuilder::new("eigen", Some(&run.config), run.seed);
    std::fs::create_dir_all(&run.out)?;
    let result = eigen_dirichlet(kernel, nodes, count)?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in result.eigenvalues.iter().enumerate() {
        writeln!(csv, "{},{}", i + 1, l)?;
    }
    let csv_path = run.out.join("eigenvalues.csv");
    write_text(&csv_path, &csv)?;
    manifest.add_output(&csv_path);
    let json_path = run.out.join("eigenvalues.json");
    write_text(&json_path, &serde_json::to_string_pretty(&result)?)?;
    manifest.add_output(&json_path);
    manifest.write(&run.out)?;
    println!("eigenvalues written to {}", csv_path.display());
    Ok(ExitCode::SUCCESS)
}

//! Experiment runners: build what a resolved scenario describes, write the
//! trace/report/plot files into the output directory, and return the
//! one-line summary for stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use viscowave::geometry::{disk_points, ClosureField, FiniteDifferenceField};
use viscowave::{
    check_gcc, escape_certificate, fit_decay, geodesic_flow, hamiltonian_flow, hessian_report,
    observability_study, DecayFit, EnergyTrace, EscapeConfig, EscapeOutcome, EuclideanMetric,
    GccConfig, GccReport, GeodesicPath, Grid64, HyperbolicMetric, Integrator, InterpolatedMetric,
    Metric, ObservabilityEstimate, PathExit, Probe, RayStop, ScalarField, SymMat, Vec2,
};

use crate::scenario::{Experiment, Scenario};
use crate::svg::{Plot, PALETTE};

const OMEGA_FILL: &str = "#f6ddb8";

/// Runs the scenario's experiment, writing every output under `out_dir`.
/// `base_dir` resolves relative coefficient-table paths.
pub fn run(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    fs::write(out_dir.join("scenario.resolved.toml"), scenario.canonical_toml())?;
    match scenario.experiment {
        Experiment::Simulate => simulate(scenario, base_dir, out_dir),
        Experiment::DecayFit => decay_fit(scenario, base_dir, out_dir),
        Experiment::Observability => observability(scenario, base_dir, out_dir),
        Experiment::GccCheck => gcc_check(scenario, base_dir, out_dir),
        Experiment::GeodesicTrace => geodesic_trace(scenario, base_dir, out_dir),
        Experiment::HessianCert => hessian_cert(scenario, base_dir, out_dir),
    }
}

fn header(scenario: &Scenario) -> String {
    format!("# scenario: {}\n# seed: {}\n", scenario.name, scenario.seed)
}

fn evolve(
    scenario: &Scenario,
    base_dir: Option<&Path>,
    seed: u64,
) -> Result<(Grid64, EnergyTrace<f64>)> {
    let grid = scenario
        .build_grid()?
        .expect("evolution experiments keep their grid through resolve");
    let coeffs = scenario.coefficients_for(&grid, base_dir)?;
    let integrator = Integrator::new(&grid, &coeffs, scenario.build_integrator_config())?;
    let mut state = scenario.build_initial(&grid, seed);
    let output = integrator.run(&mut state, &Probe::EnergyOnly)?;
    Ok((grid, output.trace))
}

fn write_trace(path: &Path, scenario: &Scenario, trace: &EnergyTrace<f64>) -> Result<()> {
    let residuals = trace.identity_residuals();
    let mut out = header(scenario);
    out.push_str("# D: energy dissipated over the step ending at t\n");
    out.push_str("# residual: E(t) - E(previous t) + D\n");
    out.push_str("t\tE\tD\tresidual\n");
    for k in 0..trace.times.len() {
        let (d, r) = if k == 0 {
            (0.0, 0.0)
        } else {
            (trace.step_dissipation[k - 1], residuals[k - 1])
        };
        writeln!(
            out,
            "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
            trace.times[k], trace.energies[k], d, r
        )?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn energy_plot(scenario: &Scenario, trace: &EnergyTrace<f64>, fit: Option<&DecayFit<f64>>) -> String {
    let head = format!("scenario: {} seed: {}", scenario.name, scenario.seed);
    let mut plot = Plot::new(&head, &format!("energy decay: {}", scenario.name), "t", "log10 E");
    let points: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.energies)
        .map(|(&t, &e)| (t, e.max(1e-300).log10()))
        .collect();
    plot.line(points, PALETTE[0]);
    if let Some(f) = fit {
        let window = scenario
            .decay
            .as_ref()
            .and_then(|d| d.window)
            .expect("decay-fit scenarios resolve a window");
        let level = |t: f64| f.amplitude.max(1e-300).log10() - f.gamma * t * std::f64::consts::LOG10_E;
        plot.styled_line(
            vec![(window[0], level(window[0])), (window[1], level(window[1]))],
            PALETTE[1],
            1.6,
            true,
        );
        plot.note(format!("gamma = {:.6e}, r^2 = {:.4}", f.gamma, f.r_squared));
    }
    plot.render()
}

fn simulate(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    let (_grid, trace) = evolve(scenario, base_dir, scenario.seed)?;
    write_trace(&out_dir.join("trace.tsv"), scenario, &trace)?;
    fs::write(out_dir.join("energy.svg"), energy_plot(scenario, &trace, None))?;
    let worst = trace
        .identity_residuals()
        .iter()
        .fold(0f64, |m, r| m.max(r.abs()));
    Ok(format!(
        "simulate {}: {} steps, E(0) = {:.6e}, E(T) = {:.6e}, max energy-balance residual = {:.3e}",
        scenario.name,
        trace.times.len() - 1,
        trace.initial_energy(),
        trace.final_energy(),
        worst
    ))
}

fn decay_fit(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    let (_grid, trace) = evolve(scenario, base_dir, scenario.seed)?;
    let window = scenario
        .decay
        .as_ref()
        .and_then(|d| d.window)
        .expect("decay-fit scenarios resolve a window");
    let fit = fit_decay(&trace, window[0], window[1])?;
    write_trace(&out_dir.join("trace.tsv"), scenario, &trace)?;
    let mut report = header(scenario);
    writeln!(report, "gamma = {:.16e}", fit.gamma)?;
    writeln!(report, "amplitude = {:.16e}", fit.amplitude)?;
    writeln!(report, "r_squared = {:.16e}", fit.r_squared)?;
    writeln!(report, "samples = {}", fit.samples)?;
    writeln!(report, "window = [{:.16e}, {:.16e}]", window[0], window[1])?;
    fs::write(out_dir.join("fit.txt"), report)?;
    fs::write(
        out_dir.join("energy.svg"),
        energy_plot(scenario, &trace, Some(&fit)),
    )?;
    Ok(format!(
        "decay-fit {}: gamma = {:.6e}, r^2 = {:.4}, window = [{}, {}], E(0) = {:.6e}, E(T) = {:.6e}",
        scenario.name,
        fit.gamma,
        fit.r_squared,
        window[0],
        window[1],
        trace.initial_energy(),
        trace.final_energy()
    ))
}

fn observability(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    let obs = scenario.observability.as_ref().expect("resolved");
    let samples = obs.samples.expect("resolved");
    let zero_tol = obs.zero_tol.expect("resolved");
    let grid = scenario
        .build_grid()?
        .expect("evolution experiments keep their grid through resolve");
    let coeffs = scenario.coefficients_for(&grid, base_dir)?;
    let config = scenario.build_integrator_config();

    // one independent draw per sample seed; ordered collect keeps the
    // output identical however many threads run
    let seeds: Vec<u64> = (0..samples).map(|i| scenario.seed.wrapping_add(i)).collect();
    let pairs: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|&seed| -> Result<(f64, f64)> {
            let integrator = Integrator::new(&grid, &coeffs, config)?;
            let mut state = scenario.build_initial(&grid, seed);
            let output = integrator.run(&mut state, &Probe::EnergyOnly)?;
            Ok((output.trace.initial_energy(), output.trace.total_dissipated()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut drawn = pairs.iter().copied();
    let report = observability_study(seeds.iter().copied(), zero_tol, |_| {
        drawn.next().expect("one run per seed")
    });

    let mut table = header(scenario);
    table.push_str("# ratio: E(0) / dissipated; nan when dissipation fell below tolerance\n");
    table.push_str("sample_seed\tE0\tdissipated\tratio\n");
    let mut points = Vec::new();
    for (index, sample) in report.samples.iter().enumerate() {
        let ratio = sample.ratio(zero_tol);
        writeln!(
            table,
            "{}\t{:.16e}\t{:.16e}\t{:.16e}",
            sample.seed,
            sample.initial_energy,
            sample.dissipated,
            ratio.unwrap_or(f64::NAN)
        )?;
        if let Some(r) = ratio {
            points.push((index as f64, r));
        }
    }
    fs::write(out_dir.join("observability.tsv"), table)?;

    let head = format!("scenario: {} seed: {}", scenario.name, scenario.seed);
    let mut plot = Plot::new(
        &head,
        &format!("observability ratios: {}", scenario.name),
        "sample",
        "E(0) / dissipated",
    );
    plot.dots(points, PALETTE[0], 3.0);
    fs::write(out_dir.join("observability.svg"), plot.render())?;

    Ok(match report.estimate() {
        Some(ObservabilityEstimate::Bounded { constant, worst_seed }) => format!(
            "observability {}: constant = {:.6e} over {} samples, worst seed = {}",
            scenario.name, constant, samples, worst_seed
        ),
        Some(ObservabilityEstimate::ViolationCandidate { seeds }) => format!(
            "observability {}: {} of {} samples dissipated below tolerance {:.1e} (seeds {:?})",
            scenario.name,
            seeds.len(),
            samples,
            zero_tol,
            seeds
        ),
        None => format!(
            "observability {}: no sample started with positive energy",
            scenario.name
        ),
    })
}

fn gcc_check(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    let grid = scenario
        .build_grid()?
        .expect("gcc-check scenarios keep their grid through resolve");
    let coeffs = scenario.coefficients_for(&grid, base_dir)?;
    let metric = InterpolatedMetric::from_coefficients(&grid, &coeffs);
    let section = scenario.gcc.as_ref().expect("resolved");
    let config = GccConfig {
        position_stride: section.position_stride.expect("resolved"),
        directions: section.directions.expect("resolved"),
        t_cap: section.t_cap,
        dt: section.dt,
    };
    let report = check_gcc(&metric, &grid, &config)?;

    let mut text = header(scenario);
    writeln!(text, "satisfied = {}", report.satisfied)?;
    writeln!(text, "rays = {}", report.rays)?;
    writeln!(text, "hits = {}", report.hits)?;
    match report.t0_estimate {
        Some(t0) => writeln!(text, "t0_estimate = {:.16e}", t0)?,
        None => writeln!(text, "t0_estimate = none")?,
    }
    if let Some(worst) = &report.worst_ray {
        writeln!(
            text,
            "worst_ray: x0 = [{:.16e}, {:.16e}], v0 = [{:.16e}, {:.16e}], {}",
            worst.x0.x,
            worst.x0.y,
            worst.v0.x,
            worst.v0.y,
            match worst.hit {
                Some(t) => format!("hit at t = {:.16e}", t),
                None => "never hit".into(),
            }
        )?;
    }
    fs::write(out_dir.join("gcc.txt"), text)?;

    let svg = ray_fan_svg(scenario, &grid, &metric, &config, &report)?;
    fs::write(out_dir.join("rays.svg"), svg)?;

    Ok(if report.satisfied {
        format!(
            "gcc-check {}: satisfied = true, T0 = {:.4}, hits = {}/{}",
            scenario.name,
            report.t0_estimate.expect("satisfied reports carry an estimate"),
            report.hits,
            report.rays
        )
    } else {
        let worst = report.worst_ray.as_ref().expect("failed reports carry a miss");
        format!(
            "gcc-check {}: satisfied = false, hits = {}/{}, first miss from ({:.4}, {:.4}) toward ({:.4}, {:.4})",
            scenario.name, report.hits, report.rays, worst.x0.x, worst.x0.y, worst.v0.x, worst.v0.y
        )
    })
}

/// Re-traces a thinned launch fan for the picture; the verdict in the
/// report stays the authority.
fn ray_fan_svg(
    scenario: &Scenario,
    grid: &Grid64,
    metric: &InterpolatedMetric<f64>,
    config: &GccConfig<f64>,
    report: &GccReport<f64>,
) -> Result<String> {
    let head = format!("scenario: {} seed: {}", scenario.name, scenario.seed);
    let extents = grid.extents();
    let one_d = grid.dim() == 1;
    let mut plot = if one_d {
        Plot::new(&head, &format!("ray fan: {}", scenario.name), "x", "t")
            .x_range(0.0, extents[0])
            .y_range(0.0, config.t_cap)
    } else {
        Plot::new(&head, &format!("ray fan: {}", scenario.name), "x1", "x2")
            .sized(560.0, 560.0)
            .x_range(0.0, extents[0])
            .y_range(0.0, extents[1])
    };

    let cells = grid.cells();
    let spacing = grid.spacing();
    for cell in 0..grid.num_cells() {
        if !grid.omega_mask()[cell] {
            continue;
        }
        let (i, j) = grid.cell_coords(cell);
        let (x0, x1) = (i as f64 * spacing[0], (i + 1) as f64 * spacing[0]);
        if one_d {
            plot.rect(x0, 0.0, x1, config.t_cap, OMEGA_FILL);
        } else {
            let (y0, y1) = (j as f64 * spacing[1], (j + 1) as f64 * spacing[1]);
            plot.rect(x0, y0, x1, y1, OMEGA_FILL);
        }
    }

    let project = |path: &GeodesicPath<f64>| -> Vec<(f64, f64)> {
        let keep = (path.samples.len() / 200).max(1);
        let mut points: Vec<(f64, f64)> = path
            .samples
            .iter()
            .enumerate()
            .filter(|(k, _)| k % keep == 0)
            .map(|(_, s)| if one_d { (s.x.x, s.t) } else { (s.x.x, s.x.y) })
            .collect();
        let last = path.samples.last().expect("paths hold their launch");
        points.push(if one_d { (last.x.x, last.t) } else { (last.x.x, last.x.y) });
        points
    };

    let directions: Vec<Vec2<f64>> = if one_d {
        vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]
    } else {
        let n = config.directions.min(8).max(1);
        (0..n)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Vec2::new(angle.cos(), angle.sin())
            })
            .collect()
    };
    let stride = config.position_stride * 2;
    let rows = if one_d { 1 } else { cells[1] };
    for j in (0..rows).step_by(stride) {
        for i in (0..cells[0]).step_by(stride) {
            let cell = grid.cell_index(i, j);
            if grid.omega_mask()[cell] {
                continue;
            }
            let x0 = grid.cell_center(cell);
            let g = metric.g(x0);
            for dir in &directions {
                let v0 = dir.scale(1.0 / g.quad(*dir).sqrt());
                let path = geodesic_flow(
                    metric,
                    x0,
                    v0,
                    config.dt,
                    config.t_cap,
                    RayStop::GridOmega(grid),
                )?;
                let hit = matches!(path.exit, PathExit::HitOmega { .. });
                let color = if hit { "#9ecae1" } else { "#de2d26" };
                plot.styled_line(project(&path), color, 1.0, false);
            }
        }
    }

    if let Some(worst) = &report.worst_ray {
        let path = geodesic_flow(
            metric,
            worst.x0,
            worst.v0,
            config.dt,
            config.t_cap,
            RayStop::GridOmega(grid),
        )?;
        let color = if worst.hit.is_some() { "#08519c" } else { "#a50f15" };
        plot.styled_line(project(&path), color, 2.2, false);
    }

    plot.note(format!(
        "satisfied = {}, hits = {}/{}",
        report.satisfied, report.hits, report.rays
    ));
    Ok(plot.render())
}

fn geodesic_trace(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    let section = scenario.geodesic.as_ref().expect("resolved");
    match section.metric.as_str() {
        "euclidean" => trace_rays(&EuclideanMetric, None, scenario, out_dir),
        "hyperbolic" => trace_rays(&HyperbolicMetric, None, scenario, out_dir),
        _ => {
            let grid = scenario
                .build_grid()?
                .expect("from-coefficients scenarios keep their grid through resolve");
            let coeffs = scenario.coefficients_for(&grid, base_dir)?;
            let metric = InterpolatedMetric::from_coefficients(&grid, &coeffs);
            trace_rays(&metric, Some(&grid), scenario, out_dir)
        }
    }
}

fn exit_label(exit: &PathExit<f64>) -> String {
    match exit {
        PathExit::MaxTime => "reached the time horizon".into(),
        PathExit::HitOmega { t } => format!("entered the damping region at t = {:.16e}", t),
        PathExit::HitBoundary { t } => format!("left the grid box at t = {:.16e}", t),
        PathExit::LeftDomain { t } => format!("left the domain box at t = {:.16e}", t),
    }
}

fn trace_rays<M: Metric<f64>>(
    metric: &M,
    domain: Option<&Grid64>,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<String> {
    let section = scenario.geodesic.as_ref().expect("resolved");
    let hamiltonian = section.flow.as_deref() == Some("hamiltonian");
    let check_circle = section.check_unit_circle.unwrap_or(false);

    let head = format!("scenario: {} seed: {}", scenario.name, scenario.seed);
    let mut plot = Plot::new(&head, &format!("geodesics: {}", scenario.name), "x1", "x2")
        .sized(560.0, 560.0);
    if check_circle {
        let circle: Vec<(f64, f64)> = (0..=256)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
                (a.cos(), a.sin())
            })
            .collect();
        plot.styled_line(circle, "#999999", 1.0, true);
    }

    let mut worst_drift = 0f64;
    let mut worst_deviation = 0f64;
    for (index, launch) in section.launches.iter().enumerate() {
        let x0 = Vec2::new(launch.x[0], launch.x[1]);
        let v0 = Vec2::new(launch.v[0], launch.v[1]);
        let stop = match domain {
            Some(grid) => {
                let e = grid.extents();
                RayStop::Outside {
                    lo: Vec2::new(0.0, 0.0),
                    hi: Vec2::new(e[0], e[1]),
                }
            }
            None => RayStop::None,
        };
        let path = if hamiltonian {
            let xi0 = metric.g(x0).mul_vec(v0);
            hamiltonian_flow(metric, x0, xi0, section.dt, section.t_max, stop)?
        } else {
            geodesic_flow(metric, x0, v0, section.dt, section.t_max, stop)?
        };

        let mut table = header(scenario);
        writeln!(table, "# launch: x = [{}, {}], v = [{}, {}]", x0.x, x0.y, v0.x, v0.y)?;
        writeln!(table, "# exit: {}", exit_label(&path.exit))?;
        table.push_str("# xi: conjugate momentum G(x) xdot; speed: G(x) xdot . xdot\n");
        table.push_str("t\tx1\tx2\txi1\txi2\tspeed\n");
        for (sample, &speed) in path.samples.iter().zip(&path.speed_trace) {
            let xi = metric.g(sample.x).mul_vec(sample.xdot);
            writeln!(
                table,
                "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
                sample.t, sample.x.x, sample.x.y, xi.x, xi.y, speed
            )?;
        }
        fs::write(out_dir.join(format!("ray_{index:02}.tsv")), table)?;

        worst_drift = worst_drift.max(path.speed_drift_rate());
        if check_circle {
            for sample in &path.samples {
                worst_deviation = worst_deviation.max((sample.x.norm() - 1.0).abs());
            }
        }
        let points: Vec<(f64, f64)> = path.samples.iter().map(|s| (s.x.x, s.x.y)).collect();
        plot.line(points, PALETTE[index % PALETTE.len()]);
    }
    fs::write(out_dir.join("paths.svg"), plot.render())?;

    let mut summary = format!(
        "geodesic-trace {}: {} rays, max speed drift = {:.3e} per unit time",
        scenario.name,
        section.launches.len(),
        worst_drift
    );
    if check_circle {
        write!(summary, ", max unit-circle deviation = {:.3e}", worst_deviation)?;
    }
    Ok(summary)
}

fn hessian_cert(scenario: &Scenario, base_dir: Option<&Path>, out_dir: &Path) -> Result<String> {
    let section = scenario.hessian.as_ref().expect("resolved");
    match section.metric.as_str() {
        "euclidean" => hessian_with_metric(&EuclideanMetric, scenario, out_dir),
        "hyperbolic" => hessian_with_metric(&HyperbolicMetric, scenario, out_dir),
        _ => {
            let grid = scenario
                .build_grid()?
                .expect("from-coefficients scenarios keep their grid through resolve");
            let coeffs = scenario.coefficients_for(&grid, base_dir)?;
            let metric = InterpolatedMetric::from_coefficients(&grid, &coeffs);
            hessian_with_metric(&metric, scenario, out_dir)
        }
    }
}

fn hessian_with_metric<M: Metric<f64>>(
    metric: &M,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<String> {
    let section = scenario.hessian.as_ref().expect("resolved");
    let center = Vec2::new(section.center[0], section.center[1]);
    if section.field == "half-squared-distance" {
        let field = ClosureField::new(
            move |x: Vec2<f64>| {
                let d = x.sub(center);
                0.5 * d.dot(d)
            },
            move |x: Vec2<f64>| x.sub(center),
            |_| SymMat::identity(),
        );
        certify(metric, &field, scenario, out_dir)
    } else {
        // squared distance of the hyperbolic half-plane:
        // d(x, c) = arccosh(1 + |x - c|^2 / (2 x2 c2))
        let field = FiniteDifferenceField::new(move |x: Vec2<f64>| {
            let d = x.sub(center);
            let q = 1.0 + d.dot(d) / (2.0 * x.y * center.y);
            let dist = q.acosh();
            dist * dist
        });
        certify(metric, &field, scenario, out_dir)
    }
}

fn certify<M: Metric<f64>, F: ScalarField<f64>>(
    metric: &M,
    field: &F,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<String> {
    let section = scenario.hessian.as_ref().expect("resolved");
    let center = Vec2::new(section.center[0], section.center[1]);
    let radius = section.radius;
    let region = disk_points(center, radius, section.grid_points.expect("resolved"));
    let report = hessian_report(metric, field, &region)?;

    let mut text = header(scenario);
    writeln!(text, "metric = {}", section.metric)?;
    writeln!(text, "field = {}", section.field)?;
    writeln!(text, "center = [{:.16e}, {:.16e}]", center.x, center.y)?;
    writeln!(text, "radius = {:.16e}", radius)?;
    writeln!(text, "points = {}", region.len())?;
    writeln!(text, "min_eigenvalue = {:.16e}", report.min_eigenvalue)?;
    writeln!(text, "positive = {}", report.positive)?;
    writeln!(text, "argmin = [{:.16e}, {:.16e}]", report.argmin.x, report.argmin.y)?;

    let mut summary = format!(
        "hessian-cert {}: min eigenvalue = {:.6e} over {} points",
        scenario.name,
        report.min_eigenvalue,
        region.len()
    );
    if section.escape.expect("resolved") {
        let config = EscapeConfig::new(section.escape_dt.expect("resolved"));
        let outcome = escape_certificate(
            metric,
            field,
            &region,
            |x| x.sub(center).norm() <= radius,
            &config,
        )?;
        match outcome {
            EscapeOutcome::Certified(cert) => {
                writeln!(text, "escape_margin = {:.16e}", cert.margin)?;
                writeln!(text, "escape_oscillation = {:.16e}", cert.oscillation)?;
                writeln!(text, "escape_time_bound = {:.16e}", cert.time_bound)?;
                writeln!(text, "escape_rays = {}", cert.rays)?;
                writeln!(text, "escape_max_exit_time = {:.16e}", cert.max_exit_time)?;
                writeln!(text, "escape_confirmed = {}", cert.confirmed)?;
                write!(
                    summary,
                    ", escape bound = {:.4} {} on {} rays (max exit = {:.4})",
                    cert.time_bound,
                    if cert.confirmed { "confirmed" } else { "NOT confirmed" },
                    cert.rays,
                    cert.max_exit_time
                )?;
            }
            EscapeOutcome::Refused { min_eigenvalue } => {
                writeln!(
                    text,
                    "escape = refused: the Hessian bound {:.16e} is not positive",
                    min_eigenvalue
                )?;
                write!(summary, "; not convex, no escape bound")?;
            }
        }
    } else {
        writeln!(text, "escape = skipped")?;
    }
    fs::write(out_dir.join("hessian.txt"), text)?;
    Ok(summary)
}

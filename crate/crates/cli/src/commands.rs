use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use esfem::control::{self, ControlProblemSpec, ProjectedControl, SolveReport, Target};
use esfem::evolution::{mass_loads, solve_state, DgFunction, SnapshotCache, TimeGrid};
use esfem::experiments::{
    example_one_errors, example_one_problem, example_two_problem, run_example_one, run_example_two, ExampleOneData,
    ExampleTwoData, RunSettings,
};
use esfem::geometry::{FlowMap, MeshSnapshot, TriSurfaceMesh};

use crate::config::{LevelRange, RunConfig};
use crate::CliError;

type Flags = BTreeMap<String, String>;

const DEFAULT_OUT: &str = "esfem-out";
const DEFAULT_FLOW_EXPONENT: f64 = 0.5;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let run = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        body(&mut w)?;
        w.flush()
    };
    run().map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

/// Creates the output directory and records the effective settings in it.
fn prepare_output(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let echo = cfg.echo();
    write_file(&dir.join("run_config.txt"), |w| w.write_all(echo.as_bytes()))
}

fn positive(cfg: &mut RunConfig, key: &str, default: f64) -> Result<f64, CliError> {
    let v = cfg.get(key, default)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(usage(format!("{key} must be positive and finite, got {v}")));
    }
    Ok(v)
}

fn output_dir(cfg: &mut RunConfig) -> Result<PathBuf, CliError> {
    Ok(PathBuf::from(cfg.get("out", DEFAULT_OUT.to_string())?))
}

fn check_bounds(alpha: f64, lo: f64, hi: f64) -> Result<(), CliError> {
    ControlProblemSpec::new(alpha, lo, hi, Target::Terminal { values: Vec::new() })?;
    Ok(())
}

fn l2_norm(cache: &SnapshotCache, n: usize, v: &[f64]) -> f64 {
    cache.mass(n).quad_form(v, v).max(0.0).sqrt()
}

fn read_vertex_values(path: &str, expected: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    let values = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|e| usage(format!("{path}: `{s}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(usage(format!("{path} holds {} values, the mesh has {expected} vertices", values.len())));
    }
    Ok(values)
}

pub fn state_solve(file: Option<&Path>, flags: Flags) -> Result<(), CliError> {
    let allowed = ["level", "N", "T", "flow", "flow-exponent", "init", "init-file", "f", "out"];
    let mut cfg = RunConfig::new("state-solve", file, flags, &allowed)?;
    let level: usize = cfg.required("level")?;
    let horizon = positive(&mut cfg, "T", 1.0)?;
    let flow = match cfg.get("flow", "moving".to_string())?.as_str() {
        "moving" => FlowMap::sphere_stretch(cfg.get("flow-exponent", DEFAULT_FLOW_EXPONENT)?, horizon),
        "static" if cfg.is_set("flow-exponent") => return Err(usage("--flow-exponent needs --flow moving")),
        "static" => FlowMap::identity(horizon),
        other => return Err(usage(format!("unknown flow `{other}` (moving, static)"))),
    };
    let mesh = Arc::new(TriSurfaceMesh::sphere(level));
    let auto = TimeGrid::coupled_to_mesh(mesh.max_edge_length(), horizon)?.num_slabs();
    let slabs: usize = cfg.get("N", auto)?;
    let grid = TimeGrid::new(slabs, horizon).map_err(CliError::from)?;
    let init = cfg.get("init", "harmonic-z".to_string())?;
    let y0 = match init.as_str() {
        "zero" => vec![0.0; mesh.num_vertices()],
        "harmonic-z" => mesh.vertices.iter().map(|x| x.z).collect(),
        "file" => {
            let path: String = cfg.required("init-file")?;
            read_vertex_values(&path, mesh.num_vertices())?
        }
        other => return Err(usage(format!("unknown initial value `{other}` (zero, harmonic-z, file)"))),
    };
    if init != "file" && cfg.is_set("init-file") {
        return Err(usage("--init-file needs --init file"));
    }
    let f_text = cfg.get("f", "zero".to_string())?;
    let f = match f_text.as_str() {
        "zero" => 0.0,
        "one" => 1.0,
        s => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("unknown right-hand side `{s}` (zero, one, or a number)")))?,
    };
    let dir = output_dir(&mut cfg)?;
    prepare_output(&cfg, &dir)?;

    let cache = SnapshotCache::laplace(mesh.clone(), flow, grid)?;
    let m = cache.num_dofs();
    let loads = mass_loads(&cache, &DgFunction::constant_in_time(slabs, &vec![f; m]));
    let y = solve_state(&cache, &y0, &loads)?;
    eprintln!("state-solve: level {level}, {m} vertices, {slabs} slabs");

    write_file(&dir.join("state.csv"), |w| y.write_csv(&grid, level, w))?;
    let ones = vec![1.0; m];
    let rows: Vec<(usize, f64, f64, f64)> = (0..=slabs)
        .map(|n| {
            let v = if n == 0 { &y0[..] } else { y.slab(n) };
            (n, grid.time(n), l2_norm(&cache, n, v), cache.mass(n).quad_form(&ones, v))
        })
        .collect();
    write_file(&dir.join("norms.csv"), |w| {
        writeln!(w, "slab,t,l2_norm,mass")?;
        for (n, t, norm, mass) in &rows {
            writeln!(w, "{n},{t:.16e},{norm:.16e},{mass:.16e}")?;
        }
        Ok(())
    })?;
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps).map_err(|e| usage(format!("cannot create {}: {e}", snaps.display())))?;
    for n in 0..=slabs {
        let path = snaps.join(format!("snapshot_{n:05}.off"));
        write_file(&path, |w| mesh.write_off(&cache.snapshot(n).positions, w))?;
    }

    let mut out = std::io::stdout().lock();
    let shown = 10.min(slabs);
    let _ = writeln!(out, "{:>6} {:>10} {:>14} {:>14}", "slab", "t", "L2 norm", "mass");
    for i in 0..=shown {
        let (n, t, norm, mass) = rows[i * slabs / shown];
        let _ = writeln!(out, "{n:>6} {t:>10.4} {norm:>14.6e} {mass:>14.6e}");
    }
    Ok(())
}

fn write_solve_outputs(
    dir: &Path,
    cache: &SnapshotCache,
    level: usize,
    control: &ProjectedControl,
    report: &SolveReport,
) -> Result<(), CliError> {
    write_file(&dir.join("report.jsonl"), |w| report.write_json_lines(w))?;
    write_file(&dir.join("report.csv"), |w| report.write_csv(w))?;
    let values = control.sample_vertices();
    write_file(&dir.join("control.csv"), |w| values.write_csv(&cache.grid, level, w))?;
    write_file(&dir.join("active.csv"), |w| {
        writeln!(w, "slab,lower_fraction,upper_fraction")?;
        for (i, [lo, hi]) in report.active_per_slab.iter().enumerate() {
            writeln!(w, "{},{lo:.16e},{hi:.16e}", i + 1)?;
        }
        Ok(())
    })
}

fn print_summary(rows: &[(&str, String)]) {
    let mut out = std::io::stdout().lock();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<12} {v}");
    }
}

pub fn solve_distributed(file: Option<&Path>, flags: Flags) -> Result<(), CliError> {
    let allowed = [
        "level", "T", "alpha", "lo", "hi", "tol", "out", "example", "flow-exponent", "method", "theta", "max-iter",
    ];
    let mut cfg = RunConfig::new("solve pd", file, flags, &allowed)?;
    if cfg.get("example", 1u8)? != 1 {
        return Err(usage("`solve pd` runs example 1; example 2 is the terminal problem `solve pt`"));
    }
    let level: usize = cfg.required("level")?;
    let data = ExampleOneData {
        alpha: cfg.get("alpha", 1.0)?,
        lower: cfg.get("lo", -0.5)?,
        upper: cfg.get("hi", 0.5)?,
        horizon: positive(&mut cfg, "T", 1.0)?,
        exponent: cfg.get("flow-exponent", DEFAULT_FLOW_EXPONENT)?,
        corrupted: false,
    };
    check_bounds(data.alpha, data.lower, data.upper)?;
    let tol = positive(&mut cfg, "tol", 1e-9)?;
    let method = cfg.get("method", "newton".to_string())?;
    let (theta, max_iter) = match method.as_str() {
        "newton" if cfg.is_set("theta") => return Err(usage("--theta applies to --method fixed-point")),
        "newton" => (None, cfg.get("max-iter", 30usize)?),
        "fixed-point" => {
            let theta = cfg.get("theta", 1.0)?;
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(usage(format!("theta must lie in (0, 1], got {theta}")));
            }
            (Some(theta), cfg.get("max-iter", 500usize)?)
        }
        other => return Err(usage(format!("unknown method `{other}` (newton, fixed-point)"))),
    };
    let dir = output_dir(&mut cfg)?;
    prepare_output(&cfg, &dir)?;

    let (cache, spec) = example_one_problem(level, &data)?;
    eprintln!("solve pd: level {level}, {} vertices, {} slabs", cache.num_dofs(), cache.num_slabs());
    let (u, report) = match theta {
        None => control::solve_semismooth_newton(&cache, &spec, tol, max_iter)?,
        Some(theta) => control::solve_fixed_point(&cache, &spec, theta, tol, max_iter)?,
    };
    write_solve_outputs(&dir, &cache, level, &u, &report)?;
    let (err_l2, err_inf) = example_one_errors(&cache, &data, &u)?;
    print_summary(&[
        ("method", report.method.clone()),
        ("level", level.to_string()),
        ("m_h", cache.num_dofs().to_string()),
        ("N", cache.num_slabs().to_string()),
        ("iterations", report.iterations.to_string()),
        ("residual", format!("{:.6e}", report.residual)),
        ("objective", format!("{:.10e}", report.objective)),
        ("ERR_L2", format!("{err_l2:.6e}")),
        ("ERR_inf", format!("{err_inf:.6e}")),
    ]);
    Ok(())
}

pub fn solve_terminal(file: Option<&Path>, flags: Flags) -> Result<(), CliError> {
    let allowed = ["level", "T", "alpha", "lo", "hi", "tol", "out", "example", "flow-exponent", "max-iter"];
    let mut cfg = RunConfig::new("solve pt", file, flags, &allowed)?;
    if cfg.get("example", 2u8)? != 2 {
        return Err(usage("`solve pt` runs example 2; example 1 is the distributed problem `solve pd`"));
    }
    let level: usize = cfg.required("level")?;
    let data = ExampleTwoData {
        alpha: cfg.get("alpha", 1.0)?,
        horizon: positive(&mut cfg, "T", 1.0)?,
        exponent: cfg.get("flow-exponent", DEFAULT_FLOW_EXPONENT)?,
        ..ExampleTwoData::default()
    };
    let lo = cfg.optional("lo")?.unwrap_or(f64::NEG_INFINITY);
    let hi = cfg.optional("hi")?.unwrap_or(f64::INFINITY);
    check_bounds(data.alpha, lo, hi)?;
    let tol = positive(&mut cfg, "tol", 1e-9)?;
    let max_iter = cfg.get("max-iter", 200usize)?;
    let dir = output_dir(&mut cfg)?;
    prepare_output(&cfg, &dir)?;

    let (cache, spec) = example_two_problem(level, &data)?;
    let spec = ControlProblemSpec::new(spec.alpha, lo, hi, spec.target)?;
    eprintln!("solve pt: level {level}, {} vertices, {} slabs", cache.num_dofs(), cache.num_slabs());
    let (u, report) = control::solve_terminal(&cache, &spec, tol, max_iter)?;
    write_solve_outputs(&dir, &cache, level, &u, &report)?;
    print_summary(&[
        ("method", report.method.clone()),
        ("level", level.to_string()),
        ("m_h", cache.num_dofs().to_string()),
        ("N", cache.num_slabs().to_string()),
        ("iterations", report.iterations.to_string()),
        ("residual", format!("{:.6e}", report.residual)),
        ("objective", format!("{:.10e}", report.objective)),
    ]);
    Ok(())
}

pub fn convergence(file: Option<&Path>, flags: Flags) -> Result<(), CliError> {
    let allowed = ["example", "levels", "q", "tol", "max-iter", "out", "flow-exponent", "alpha", "lo", "hi", "T"];
    let mut cfg = RunConfig::new("convergence", file, flags, &allowed)?;
    let example: u8 = cfg.required("example")?;
    let range: LevelRange = cfg.required("levels")?;
    let q: usize = cfg.get("q", 2)?;
    if q == 0 {
        return Err(usage("q must be at least 1"));
    }
    let settings = RunSettings {
        tol: positive(&mut cfg, "tol", 1e-9)?,
        max_iter: cfg.get("max-iter", 30)?,
        q,
    };
    let progress = |r: &esfem::experiments::LevelRow| {
        eprintln!(
            "level {}: {} vertices, {} slabs, {} iterations, {:.1} s",
            r.level, r.vertices, r.slabs, r.iterations, r.wall_seconds
        )
    };
    let record = match example {
        1 => {
            let data = ExampleOneData {
                alpha: cfg.get("alpha", 1.0)?,
                lower: cfg.get("lo", -0.5)?,
                upper: cfg.get("hi", 0.5)?,
                horizon: positive(&mut cfg, "T", 1.0)?,
                exponent: cfg.get("flow-exponent", DEFAULT_FLOW_EXPONENT)?,
                corrupted: false,
            };
            check_bounds(data.alpha, data.lower, data.upper)?;
            let dir = output_dir(&mut cfg)?;
            prepare_output(&cfg, &dir)?;
            (run_example_one(&range.levels(), &data, &settings, progress)?, dir)
        }
        2 => {
            if cfg.is_set("lo") || cfg.is_set("hi") {
                return Err(usage("example 2 is unconstrained; --lo/--hi do not apply"));
            }
            let data = ExampleTwoData {
                alpha: cfg.get("alpha", 1.0)?,
                horizon: positive(&mut cfg, "T", 1.0)?,
                exponent: cfg.get("flow-exponent", DEFAULT_FLOW_EXPONENT)?,
                ..ExampleTwoData::default()
            };
            check_bounds(data.alpha, f64::NEG_INFINITY, f64::INFINITY)?;
            let dir = output_dir(&mut cfg)?;
            prepare_output(&cfg, &dir)?;
            eprintln!("example 2 also solves levels up to {} for the reference", range.last + 2);
            (run_example_two(&range.levels(), &data, &settings, progress)?, dir)
        }
        other => return Err(usage(format!("unknown example {other} (1, 2)"))),
    };
    let (record, dir) = record;
    write_file(&dir.join("convergence.csv"), |w| record.write_csv(w))?;
    write_file(&dir.join("convergence.dat"), |w| record.write_gnuplot(w))?;
    let _ = record.write_table(std::io::stdout().lock());
    Ok(())
}

pub fn mesh_info(file: Option<&Path>, flags: Flags) -> Result<(), CliError> {
    let allowed = ["level", "t", "T", "flow-exponent", "out"];
    let mut cfg = RunConfig::new("mesh-info", file, flags, &allowed)?;
    let level: usize = cfg.required("level")?;
    let horizon = positive(&mut cfg, "T", 1.0)?;
    let t: f64 = cfg.get("t", 0.0)?;
    if !(0.0..=horizon).contains(&t) {
        return Err(usage(format!("t = {t} outside of [0, {horizon}]")));
    }
    let flow = FlowMap::sphere_stretch(cfg.get("flow-exponent", DEFAULT_FLOW_EXPONENT)?, horizon);
    let dir = cfg.optional::<String>("out")?.map(PathBuf::from);
    if let Some(dir) = &dir {
        prepare_output(&cfg, dir)?;
    }

    let mesh = Arc::new(TriSurfaceMesh::sphere(level));
    let inv = mesh.invariants();
    let snap = MeshSnapshot::new(mesh.clone(), &flow, t)?;
    if let Some(dir) = &dir {
        write_file(&dir.join("mesh.off"), |w| mesh.write_off(&snap.positions, w))?;
    }
    print_summary(&[
        ("level", level.to_string()),
        ("vertices", mesh.num_vertices().to_string()),
        ("edges", mesh.edges().len().to_string()),
        ("triangles", mesh.num_triangles().to_string()),
        ("H", format!("{:.4}", mesh.max_edge_length())),
        ("euler", inv.euler_characteristic.to_string()),
        ("manifold", inv.closed_manifold.to_string()),
        ("oriented", inv.consistently_oriented.to_string()),
        ("radius_err", format!("{:.2e}", inv.max_radius_defect)),
        ("min_angle", format!("{:.2}", inv.min_angle_deg)),
        ("t", t.to_string()),
        ("area(t)", format!("{:.10}", snap.area())),
        ("min_angle(t)", format!("{:.2}", snap.min_angle_deg())),
    ]);
    Ok(())
}

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tomoprop_core::evolution::{reduce_evolution_equation, solve_characteristics, PotentialPolynomial};
use tomoprop_core::io::{self, OutputFormat};
use tomoprop_core::propagator::{
    evolve_pullback, evolve_via_green, kernel_fourier, GreenRouteOptions, KernelDomain, KernelFourierQuery,
};
use tomoprop_core::states::make_state;
use tomoprop_core::tomography::{
    density_from_tomogram, tomogram_from_wavefunction, ForwardOptions, ReconstructionOptions,
};
use tomoprop_core::{Error, GreenFunction, OpticalTomogram, Result, Route, ThetaGrid, Tomogram};

use crate::config::{Options, RunConfig, Values};

fn forward(cfg: &RunConfig) -> ForwardOptions {
    ForwardOptions {
        eps_theta: cfg.eps_theta,
    }
}

fn reconstruction(cfg: &RunConfig) -> ReconstructionOptions {
    ReconstructionOptions {
        mu_max: cfg.mu_max,
        mu_count: cfg.mu_count,
        mu_damping: cfg.mu_damping,
        ..Default::default()
    }
}

fn green_or_default(cfg: &RunConfig) -> GreenFunction {
    cfg.green.unwrap_or_else(|| GreenFunction::for_potential(cfg.potential))
}

/// Tomogram of the configured state, or the one stored in `--input`.
fn source_tomogram(cfg: &RunConfig) -> Result<Tomogram> {
    if let Some(path) = &cfg.input {
        return io::read_tomogram(path);
    }
    let spec = cfg.state.as_ref().expect("state or input is resolved");
    let psi = make_state(spec, &cfg.position_grid)?;
    tomogram_from_wavefunction(&psi, &cfg.x_grid, &ThetaGrid::new(cfg.theta_count)?, forward(cfg))
}

fn tomogram_report(w: &Tomogram) -> Value {
    json!({
        "normalization_error": w.normalization_error(),
        "min_value": w.min_value(),
    })
}

fn finish(kind: &str, cfg: &RunConfig, path: &Path, report: Value) -> Result<()> {
    io::write_metadata(path, &io::metadata(kind, cfg, report)?)?;
    Ok(())
}

/// Writes either the tomogram or, with `--phi`, its optical slices.
fn write_tomogram_output(kind: &str, cfg: &RunConfig, w: &Tomogram, mut report: Value) -> Result<()> {
    let path = cfg.output()?;
    match &cfg.phi {
        Some(phis) => io::write_optical(path, &OpticalTomogram::from_tomogram(w, phis), cfg.format)?,
        None => io::write_tomogram(path, w, cfg.format)?,
    }
    report["tomogram"] = tomogram_report(w);
    finish(kind, cfg, path, report)
}

pub fn tomogram(o: &Options) -> Result<()> {
    let cfg = RunConfig::resolve("tomogram", o)?;
    cfg.output()?;
    let w = source_tomogram(&cfg)?;
    write_tomogram_output("tomogram", &cfg, &w, json!({}))
}

pub fn evolve(o: &Options) -> Result<()> {
    let mut o = o.clone();
    o.route.get_or_insert(crate::config::RouteArg::Pullback);
    let cfg = RunConfig::resolve("evolve", &o)?;
    let t = cfg.time()?;
    cfg.output()?;
    let w = source_tomogram(&cfg)?;
    let mut report = json!({});
    let wt = match cfg.route.expect("route is set") {
        Route::Pullback => evolve_pullback(&w, &cfg.potential, t)?,
        Route::Pde => {
            let pde = reduce_evolution_equation(&PotentialPolynomial::from(cfg.potential))?;
            report["pde"] = serde_json::to_value(pde)?;
            solve_characteristics(&pde, &w, t)?
        }
        Route::Green => {
            let green = green_or_default(&cfg);
            let opts = GreenRouteOptions {
                position_grid: cfg.position_grid,
                reconstruction: reconstruction(&cfg),
                forward: forward(&cfg),
            };
            let out = evolve_via_green(&w, &green, t, &opts)?;
            report["green"] = json!({
                "label": green.label(),
                "reconstructed_trace": out.reconstructed_trace,
                "evolved_trace": out.evolved_trace,
                "hermiticity_defect": out.hermiticity_defect,
                "accuracy_warning": out.accuracy_warning,
            });
            out.tomogram
        }
    };
    write_tomogram_output("evolve", &cfg, &wt, report)
}

fn values_or(v: &Option<Values>, default: &str, name: &str) -> Result<Vec<f64>> {
    v.clone().unwrap_or_else(|| Values::Text(default.into())).resolve(name)
}

pub fn green(o: &Options) -> Result<()> {
    let cfg = RunConfig::resolve("green", o)?;
    let t = cfg.time()?;
    let path = cfg.output()?;
    let green = green_or_default(&cfg);
    green.check_time(t)?;
    let xs = values_or(&o.x, "-3:3:13", "x")?;
    let ys = values_or(&o.y, "-3:3:13", "y")?;
    let mut rows = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            rows.push((x, y, t, green.eval(x, y, t)?));
        }
    }
    io::write_green(path, &rows, cfg.format)?;
    finish(
        "green",
        &cfg,
        path,
        json!({ "label": green.label(), "samples": rows.len() }),
    )
}

pub fn kernel(o: &Options) -> Result<()> {
    let cfg = RunConfig::resolve("kernel", o)?;
    let t = cfg.time()?;
    let path = cfg.output()?;
    let green = green_or_default(&cfg);
    green.check_time(t)?;
    let ks = values_or(&o.k, "1", "k")?;
    let required = |v: &Option<Values>, name: &str| -> Result<Vec<f64>> {
        v.as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("missing required option --{}", name.replace('_', "-"))))?
            .resolve(name)
    };
    let mus = required(&o.mu, "mu")?;
    let nus = required(&o.nu, "nu")?;
    let mu_ps = required(&o.mu_p, "mu_p")?;
    let nu_ps = required(&o.nu_p, "nu_p")?;
    let domain = KernelDomain {
        half_width: cfg.domain_half_width,
        step: cfg.domain_step,
    };
    let mut rows = Vec::new();
    let mut warnings = 0usize;
    let mut worst_boundary = 0.0f64;
    for &k in &ks {
        for &mu in &mus {
            for &nu in &nus {
                for &mu_p in &mu_ps {
                    for &nu_p in &nu_ps {
                        let q = KernelFourierQuery {
                            k,
                            mu,
                            nu,
                            mu_p,
                            nu_p,
                            t,
                            eps: cfg.eps,
                            green,
                            domain,
                        };
                        let v = kernel_fourier(&q)?;
                        warnings += usize::from(v.accuracy_warning);
                        worst_boundary = worst_boundary.max(v.boundary_ratio);
                        rows.push((q, v.value));
                    }
                }
            }
        }
    }
    io::write_kernel(path, &rows, cfg.format)?;
    let report = json!({
        "label": green.label(),
        "samples": rows.len(),
        "accuracy_warnings": warnings,
        "max_boundary_ratio": worst_boundary,
    });
    finish("kernel", &cfg, path, report)
}

pub fn reconstruct(o: &Options) -> Result<()> {
    let mut o = o.clone();
    o.position_count.get_or_insert(128);
    if o.input.is_none() {
        return Err(Error::InvalidInput("missing required option --input".into()));
    }
    let cfg = RunConfig::resolve("reconstruct", &o)?;
    let path = cfg.output()?;
    let w = source_tomogram(&cfg)?;
    let rec = density_from_tomogram(&w, &cfg.position_grid, reconstruction(&cfg))?;
    let files: Vec<PathBuf> = match cfg.format {
        OutputFormat::Csv => {
            let (re, im) = io::write_density_csv(path, &rec.density)?;
            vec![re, im]
        }
        OutputFormat::Json => {
            io::write_density_json(path, &rec.density)?;
            vec![path.to_path_buf()]
        }
    };
    let trace = rec.density.trace();
    let report = json!({
        "files": files,
        "trace": { "re": trace.re, "im": trace.im },
        "hermiticity_defect": rec.hermiticity_defect,
        "boundary_ratio": rec.boundary_ratio,
        "accuracy_warning": rec.accuracy_warning,
        "damping_applied": rec.damping_applied,
    });
    finish("reconstruct", &cfg, path, report)
}

/// Returns whether the discrepancy is within tolerance.
pub fn compare(a: &Path, b: &Path, tol: f64, output: Option<&Path>) -> Result<bool> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput(format!("tolerance must be nonnegative, got {tol}")));
    }
    for p in [a, b] {
        if !p.is_file() {
            return Err(Error::InvalidInput(format!(
                "input file {} does not exist",
                p.display()
            )));
        }
    }
    let d = io::compare_csv_files(a, b)?;
    let pass = d.linf <= tol;
    let report = json!({ "a": a, "b": b, "linf": d.linf, "l2": d.l2, "tol": tol, "pass": pass });
    println!("{}", serde_json::to_string(&report)?);
    if let Some(path) = output {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        io::write_atomic(path, text.as_bytes())?;
        let config = json!({ "command": "compare", "a": a, "b": b, "tol": tol, "output": path });
        io::write_metadata(path, &io::metadata("compare", &config, json!({ "pass": pass }))?)?;
    }
    Ok(pass)
}

//! Pipeline execution: builds the model, runs the requested operations with
//! shared state, and collects residual reports.

use crate::scenario::{ModelSpec, Scenario, StepSpec};
use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use weinfib_core::{
    build_chart, build_delta, conformal_check, is_lagrangian, jacobian_split, lagrangianize,
    linear_retraction, liouville_field, liouville_from_symplectic, sample_to_cochain,
    transverse_leaf, Components, FibreComplex, FibredForm, FieldForm, FlowConfig, HomotopyConfig,
    LagrangianSubbundle, LiouvilleField, ModelParams, PolKind, SymplecticBundleModel,
    WeinsteinChart,
};

#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub op: String,
    pub tolerance: f64,
    pub residuals: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, String>,
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub model: String,
    pub seed: u64,
    pub steps: Vec<StepReport>,
    pub exit: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepTiming {
    pub step: usize,
    pub op: String,
    pub wall_time_ms: f64,
}

pub struct PipelineOutcome {
    pub report: RunReport,
    pub timings: Vec<StepTiming>,
}

pub fn build_model(spec: &ModelSpec) -> anyhow::Result<SymplecticBundleModel> {
    let params = ModelParams {
        base_samples: spec.base_samples,
        base_circle: match spec.base_topology.as_str() {
            "circle" => true,
            "interval" => false,
            other => bail!("unknown base topology {other}"),
        },
        fibre_resolution: spec.fibre_resolution.clone(),
        c_amplitude: spec.c_amplitude,
        tubular_radius: spec.tubular_radius,
    };
    let model = match spec.name.as_str() {
        "cylinder" => SymplecticBundleModel::cylinder(&params)?,
        "torus2" => SymplecticBundleModel::torus2(&params)?,
        "torus4" => SymplecticBundleModel::torus4(&params, PolKind::Standard)?,
        "product_mxb" | "product_MxB" => {
            SymplecticBundleModel::product_mxb(spec.fibre_resolution.len(), &params)?
        }
        other => bail!("unknown model {other}"),
    };
    model.validate()?;
    Ok(model)
}

struct PipelineState {
    model: SymplecticBundleModel,
    l: LagrangianSubbundle,
    lambda: Option<FieldForm>,
    liouville: Option<LiouvilleField>,
    chart: Option<WeinsteinChart>,
    closed_output: Option<weinfib_core::CochainForm>,
    psi_output: Option<weinfib_core::CircleSection>,
}

/// Parse a form spec from the catalogue onto the tangent torus of dimension
/// `m`, with exact derivative callables.
pub fn parse_alpha(spec: &str, m: usize) -> anyhow::Result<FieldForm> {
    let domain = weinfib_core::Domain {
        axes: (0..m)
            .map(|_| weinfib_core::complex::AxisDomain {
                periodic: true,
                min: 0.0,
                max: std::f64::consts::TAU,
            })
            .collect(),
    };
    let (kind, args) = match spec.split_once(':') {
        Some((k, a)) => (k, a),
        None => (spec, ""),
    };
    let nums: Vec<f64> = if args.is_empty() {
        vec![]
    } else {
        args.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad numbers in form spec {spec}"))?
    };
    match kind {
        "zero" => Ok(FieldForm::zero(m, 1, domain)),
        "const" => {
            let mut comps = vec![0.0; m];
            for (i, v) in nums.iter().enumerate().take(m) {
                comps[i] = *v;
            }
            Ok(FieldForm::constant(m, 1, domain, comps))
        }
        "fourier" | "const_plus_fourier" => {
            // fourier:i,j[,amp] puts amp*sin(theta_j) dtheta_i (1-based);
            // const_plus_fourier:c,i,j adds c dtheta_i
            let (c0, i, j, amp) = if kind == "fourier" {
                if nums.len() < 2 {
                    bail!("fourier spec needs i,j");
                }
                (0.0, nums[0] as usize, nums[1] as usize, *nums.get(2).unwrap_or(&1.0))
            } else {
                if nums.len() < 3 {
                    bail!("const_plus_fourier spec needs c,i,j");
                }
                (nums[0], nums[1] as usize, nums[2] as usize, 1.0)
            };
            if i < 1 || i > m || j < 1 || j > m {
                bail!("form spec axes out of range for dimension {m}");
            }
            let (i, j) = (i - 1, j - 1);
            let eval = Arc::new(move |_: f64, x: &[f64]| -> Components {
                let mut c: Components = (0..m).map(|_| 0.0).collect();
                c[i] = c0 + amp * x[j].sin();
                c
            });
            let jet = Arc::new(move |_: f64, x: &[f64]| -> weinfib_core::forms::Jet {
                let mut out = weinfib_core::forms::Jet::new();
                for comp in 0..m {
                    let mut row: Components = (0..m).map(|_| 0.0).collect();
                    if comp == i {
                        row[j] = amp * x[j].cos();
                    }
                    out.push(row);
                }
                out
            });
            Ok(FieldForm::new(m, 1, domain, eval).with_jet(jet))
        }
        "exact" => {
            // d(amp cos t1 cos t2) for m = 2, d(amp cos t1) for m = 1
            let amp = *nums.first().unwrap_or(&0.1);
            if m == 1 {
                let eval = Arc::new(move |_: f64, x: &[f64]| -> Components {
                    let mut c = Components::new();
                    c.push(-amp * x[0].sin());
                    c
                });
                let jet = Arc::new(move |_: f64, x: &[f64]| -> weinfib_core::forms::Jet {
                    let mut out = weinfib_core::forms::Jet::new();
                    let mut row = Components::new();
                    row.push(-amp * x[0].cos());
                    out.push(row);
                    out
                });
                Ok(FieldForm::new(1, 1, domain, eval).with_jet(jet))
            } else if m == 2 {
                let eval = Arc::new(move |_: f64, x: &[f64]| -> Components {
                    let mut c = Components::new();
                    c.push(-amp * x[0].sin() * x[1].cos());
                    c.push(-amp * x[0].cos() * x[1].sin());
                    c
                });
                let jet = Arc::new(move |_: f64, x: &[f64]| -> weinfib_core::forms::Jet {
                    let mut out = weinfib_core::forms::Jet::new();
                    let mut r0 = Components::new();
                    r0.push(-amp * x[0].cos() * x[1].cos());
                    r0.push(amp * x[0].sin() * x[1].sin());
                    out.push(r0);
                    let mut r1 = Components::new();
                    r1.push(amp * x[0].sin() * x[1].sin());
                    r1.push(-amp * x[0].cos() * x[1].cos());
                    out.push(r1);
                    out
                });
                Ok(FieldForm::new(2, 1, domain, eval).with_jet(jet))
            } else {
                bail!("exact form spec supports tangent dimensions 1 and 2");
            }
        }
        other => bail!("unknown form spec {other}"),
    }
}

/// Named projection maps for the fibration-space operations.
pub fn parse_pi(name: &str, grid: usize) -> anyhow::Result<(weinfib_core::FibrationMap, Arc<FibreComplex>)> {
    use weinfib_core::FibrePoint;
    let t2 = || Arc::new(FibreComplex::torus(&[grid, grid]).unwrap());
    let t4 = || Arc::new(FibreComplex::torus(&[grid.min(8), grid.min(8), grid.min(8), grid.min(8)]).unwrap());
    let map = |f: Arc<dyn Fn(&[f64]) -> FibrePoint + Send + Sync>,
               m_dim: usize,
               b_dim: usize,
               cx: Arc<FibreComplex>| {
        (
            weinfib_core::FibrationMap::new(m_dim, b_dim, cx.domain(), f),
            cx,
        )
    };
    Ok(match name {
        "t2_theta" => map(
            Arc::new(|m: &[f64]| {
                let mut b = weinfib_core::FibrePoint::new();
                b.push(m[0]);
                b
            }),
            2,
            1,
            t2(),
        ),
        "t2_theta_half_sin" => map(
            Arc::new(|m: &[f64]| {
                let mut b = weinfib_core::FibrePoint::new();
                b.push(m[0] + 0.5 * m[0].sin());
                b
            }),
            2,
            1,
            t2(),
        ),
        "t2_theta_sin" => map(
            Arc::new(|m: &[f64]| {
                let mut b = weinfib_core::FibrePoint::new();
                b.push(m[0] + m[0].sin());
                b
            }),
            2,
            1,
            t2(),
        ),
        "t4_theta12" => map(
            Arc::new(|m: &[f64]| {
                let mut b = weinfib_core::FibrePoint::new();
                b.push(m[0]);
                b.push(m[1]);
                b
            }),
            4,
            2,
            t4(),
        ),
        "t4_theta1_r2" => map(
            Arc::new(|m: &[f64]| {
                let mut b = weinfib_core::FibrePoint::new();
                b.push(m[0]);
                b.push(m[3]);
                b
            }),
            4,
            2,
            t4(),
        ),
        "t4_theta1_r1" => map(
            Arc::new(|m: &[f64]| {
                let mut b = weinfib_core::FibrePoint::new();
                b.push(m[0]);
                b.push(m[2]);
                b
            }),
            4,
            2,
            t4(),
        ),
        other => bail!("unknown projection {other}"),
    })
}

fn param<T: std::str::FromStr>(step: &StepSpec, key: &str, default: T) -> anyhow::Result<T> {
    match step.params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| anyhow!("step {}: bad value for {key}: {v}", step.index)),
    }
}

fn pass(v: bool) -> String {
    if v { "pass".into() } else { "fail".into() }
}

fn run_step(
    state: &mut PipelineState,
    step: &StepSpec,
    seed: u64,
    out_dir: Option<&Path>,
) -> anyhow::Result<StepReport> {
    let mut residuals = BTreeMap::new();
    let mut verdicts = BTreeMap::new();
    let tol = step.tol;
    let mut ok = true;

    match step.op.as_str() {
        "liouville" => {
            let rho = linear_retraction(&state.model, &state.l);
            let rep = liouville_from_symplectic(&state.model, &state.l, &rho, &HomotopyConfig::default())?;
            let probes = weinfib_core::poincare::tubular_probes(&state.model, &state.l, 4, 0.6);
            let identity = weinfib_core::homotopy_identity_check(
                &state.model,
                &state.l,
                &state.model.omega.clone(),
                &rho,
                &HomotopyConfig::default(),
                &probes,
            )?;
            residuals.insert("lagrangian_defect".into(), rep.lagrangian_defect);
            residuals.insert("d_lambda_vs_omega".into(), rep.d_residual);
            residuals.insert("lambda_on_l".into(), rep.on_l_residual);
            residuals.insert("homotopy_identity".into(), identity.identity_residual);
            residuals.insert("p_omega_on_l".into(), identity.on_l_residual);
            ok = rep.d_residual <= tol
                && rep.on_l_residual <= 1e-10
                && identity.identity_residual <= tol
                && identity.on_l_residual <= 1e-10;
            state.lambda = Some(rep.lambda);
        }
        "polarize" => {
            let lambda = state
                .lambda
                .clone()
                .ok_or_else(|| anyhow!("polarize needs a liouville step first"))?;
            let lf = liouville_field(&state.model, &state.l, &lambda)?;
            residuals.insert("solve_residual".into(), lf.solve_residual);
            residuals.insert("y_on_l".into(), lf.on_l_residual);
            let mut eigen_dev: f64 = 0.0;
            let mut isotropy: f64 = 0.0;
            let mut e_res: f64 = 0.0;
            let per_axis = if state.l.tangent_dim == 1 { 8 } else { 4 };
            for &b in state.model.base.samples().iter().take(4) {
                for theta in weinfib_core::models::tangent_grid(state.l.tangent_dim, per_axis) {
                    let split = jacobian_split(&state.model, &state.l, &lf.field, b, &theta)?;
                    for (re, im) in &split.eigenvalues {
                        let dev = (re.hypot(*im)).min((re - 1.0).hypot(*im));
                        eigen_dev = eigen_dev.max(dev);
                    }
                    isotropy = isotropy.max(split.isotropy_defect);
                    e_res = e_res.max(split.e0_residual.max(split.e1_residual));
                }
            }
            residuals.insert("eigenvalue_deviation".into(), eigen_dev);
            residuals.insert("e1_isotropy".into(), isotropy);
            residuals.insert("eigenspace_residual".into(), e_res);
            let b0 = state.model.base.samples()[0];
            let theta0: Vec<f64> = vec![0.7; state.l.tangent_dim];
            let x0 = {
                let mut x = state.l.embed(&state.model.split, b0, &theta0);
                let leaf_dim = state.model.polarization.leaf_dim;
                let s: Vec<f64> = (0..leaf_dim)
                    .map(|a| 0.4 * state.model.tubular_radius * if a % 2 == 0 { 1.0 } else { -0.8 })
                    .collect();
                x = (state.model.polarization.leaf)(b0, &x, &s);
                x
            };
            let conf = conformal_check(&state.model, &lf.field, b0, &x0, 1.0, 1e-3, 8)?;
            residuals.insert("conformal_identity".into(), conf.sup_pullback_residual);
            let leaf = transverse_leaf(&state.model, &state.l, &lambda, &lf.field, b0, &theta0)?;
            residuals.insert("leaf_ker_lambda".into(), leaf.ker_lambda);
            residuals.insert("leaf_lagrangian".into(), leaf.lagrangian);
            residuals.insert("leaf_y_tangency".into(), leaf.y_tangency);
            ok = eigen_dev <= tol
                && lf.solve_residual <= 1e-9
                && isotropy <= 1e-8
                && conf.sup_pullback_residual <= 1e-4;
            state.liouville = Some(lf);
        }
        "weinstein-build" => {
            let lambda = state
                .lambda
                .clone()
                .ok_or_else(|| anyhow!("weinstein-build needs a liouville step first"))?;
            let h = param(step, "h", 1e-3)?;
            let chart = build_chart(&state.model, &state.l, &lambda, FlowConfig { step: h })?;
            let zero_res = chart.zero_section_residual()?;
            residuals.insert("zero_section_on_l".into(), zero_res);
            residuals.insert("commutation_defect".into(), chart.commutation_defect);
            residuals.insert("lambda_on_l".into(), chart.lambda_on_l);
            residuals.insert("domain_radius".into(), chart.domain_radius);
            verdicts.insert("fibre_preserving".into(), "exact-by-construction".into());
            ok = zero_res <= 1e-9 && chart.commutation_defect <= 1e-5;
            state.chart = Some(chart);
        }
        "weinstein-verify" => {
            let chart = state
                .chart
                .as_ref()
                .ok_or_else(|| anyhow!("weinstein-verify needs weinstein-build first"))?;
            let probes = param(step, "probes", 100usize)?;
            let mut sup: f64 = 0.0;
            for (i, &b) in state.model.base.samples().iter().enumerate() {
                let rep = chart.verify_symplectic(b, probes, seed.wrapping_add(i as u64))?;
                sup = sup.max(rep.sup_defect);
            }
            residuals.insert("symplectic_defect".into(), sup);
            ok = sup <= tol;
        }
        "classify" => {
            let spec = step
                .params
                .get("alpha")
                .ok_or_else(|| anyhow!("classify needs an alpha parameter"))?;
            let alpha = parse_alpha(spec, state.l.tangent_dim)?;
            let form = FibredForm::field(state.model.base.clone(), alpha);
            let v = is_lagrangian(&form, tol, 32)?;
            residuals.insert("defect".into(), v.defect);
            verdicts.insert(
                "lagrangian".into(),
                if v.lagrangian { "true".into() } else { "false".into() },
            );
            ok = v.lagrangian;
        }
        "lagrangianize" => {
            let spec = step
                .params
                .get("alpha")
                .ok_or_else(|| anyhow!("lagrangianize needs an alpha parameter"))?;
            let grid = param(step, "grid", 32usize)?;
            let m = state.l.tangent_dim;
            if m < 2 {
                bail!("lagrangianize needs a tangent torus of dimension >= 2");
            }
            let alpha = parse_alpha(spec, m)?;
            let cx = Arc::new(FibreComplex::torus(&vec![grid; m])?);
            let sampled = sample_to_cochain(&alpha, &state.model.base, &cx)?;
            let delta = build_delta(cx.clone(), state.model.base.clone(), &[0, 1])?;
            let closed = lagrangianize(&delta, &sampled)?;
            let defect = closed.d()?.sup_norm();
            residuals.insert("closed_defect".into(), defect);
            // fixed point on the already-closed part
            let again = lagrangianize(&delta, &closed)?;
            let fixed = again.add_scaled(&closed, -1.0)?.sup_norm();
            residuals.insert("fixed_point_residual".into(), fixed);
            ok = defect <= tol && fixed <= 1e-8;
            state.closed_output = Some(closed);
        }
        "hodge" => {
            let trials = param(step, "trials", 20usize)?;
            let degrees: Vec<usize> = match step.params.get("degrees") {
                Some(v) => v
                    .split(',')
                    .map(|d| d.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| anyhow!("bad degrees list"))?,
                None => (0..state.model.complex.dim().min(2)).collect(),
            };
            let delta = build_delta(
                state.model.complex.clone(),
                state.model.base.clone(),
                &degrees,
            )?;
            for &k in &degrees {
                let rep = weinfib_core::hodge::hodge_report(&delta, k, trials, seed)?;
                residuals.insert(format!("d_delta_d_degree{k}"), rep.sup_residual_d_delta_d);
                residuals.insert(format!("idempotence_degree{k}"), rep.idempotence_residual);
                residuals.insert(format!("kernel_degree{k}"), rep.kernel_residual);
                ok = ok
                    && rep.sup_residual_d_delta_d <= tol
                    && rep.idempotence_residual <= tol
                    && rep.kernel_residual <= tol;
                if let Some(dir) = out_dir {
                    let f = std::fs::File::create(dir.join(format!("hodge_degree{k}.json")))?;
                    serde_json::to_writer_pretty(f, &rep)?;
                }
            }
        }
        "graph" => {
            let name = step
                .params
                .get("pi")
                .ok_or_else(|| anyhow!("graph needs a pi parameter"))?;
            let grid = param(step, "grid", 32usize)?;
            let (pi, cx) = parse_pi(name, grid)?;
            let b = vec![1.2; pi.b_dim];
            let h = std::f64::consts::TAU / grid as f64;
            let report = weinfib_core::graph_of(&pi, &cx, &b, h);
            residuals.insert("min_singular_value".into(), report.submersion.min_singular_value);
            residuals.insert("fibre_point_count".into(), report.fibre_points.len() as f64);
            verdicts.insert("subbundle".into(), pass(report.is_subbundle));
            ok = report.is_subbundle;
            if let Some(dir) = out_dir {
                let f = std::fs::File::create(dir.join(format!("graph_{}.json", step.index)))?;
                serde_json::to_writer_pretty(f, &report)?;
            }
        }
        "classify-fibration" => {
            let name = step
                .params
                .get("pi")
                .ok_or_else(|| anyhow!("classify-fibration needs a pi parameter"))?;
            let grid = param(step, "grid", 16usize)?;
            let (pi, cx) = parse_pi(name, grid)?;
            let sub = weinfib_core::submersion_test(&pi, &cx);
            let omega = move |_x: &[f64]| weinfib_core::fibration::standard_omega(4.min(pi.m_dim));
            let verdict = weinfib_core::lagrangian_fibration_test(&omega, &pi, &cx)?;
            residuals.insert("defect".into(), verdict.defect);
            residuals.insert("min_singular_value".into(), sub.min_singular_value);
            verdicts.insert("lagrangian".into(), pass(verdict.lagrangian));
            verdicts.insert("kernel_dim".into(), pass(verdict.kernel_dim_ok));
            ok = sub.pass && verdict.lagrangian;
        }
        "psi" => {
            let nodes = param(step, "nodes", 256usize)?;
            let amplitude = param(step, "amplitude", 0.1)?;
            let bf = weinfib_core::BiFibration { nodes };
            let section =
                weinfib_core::CircleSection::from_fn(nodes, move |x| x + amplitude * x.sin());
            let (reparam, rep) = weinfib_core::psi(&bf, &section, 1e-10)?;
            let trip = weinfib_core::psi_round_trip(&bf, &section, 1e-10)?;
            let gd = weinfib_core::fibration::graph_distance(&section, &reparam, 4 * nodes)?;
            residuals.insert("section_residual".into(), rep.section_residual);
            residuals.insert("round_trip".into(), trip);
            residuals.insert("graph_distance".into(), gd);
            ok = trip <= tol && rep.section_residual <= 1e-8;
            state.psi_output = Some(reparam);
        }
        other => bail!("unknown pipeline op {other}"),
    }

    Ok(StepReport {
        step: step.index,
        op: step.op.clone(),
        tolerance: tol,
        residuals,
        verdicts,
        verdict: pass(ok),
    })
}

/// Run a scenario end to end. Infrastructure failures surface as errors;
/// tolerance failures mark the step and the run as failed.
pub fn run_scenario(scenario: &Scenario, seed: u64, out_dir: Option<&Path>) -> anyhow::Result<PipelineOutcome> {
    let model = build_model(&scenario.model).context("model build failure")?;
    let l = LagrangianSubbundle::zero(&model.split);
    let mut state = PipelineState {
        model,
        l,
        lambda: None,
        liouville: None,
        chart: None,
        closed_output: None,
        psi_output: None,
    };

    let mut steps = Vec::new();
    let mut timings = Vec::new();
    let mut exit = 0;
    for step in &scenario.pipeline {
        let start = std::time::Instant::now();
        let report = run_step(&mut state, step, seed, out_dir)
            .with_context(|| format!("step {} ({})", step.index, step.op))?;
        timings.push(StepTiming {
            step: step.index,
            op: step.op.clone(),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if report.verdict != "pass" {
            exit = 1;
        }
        steps.push(report);
    }

    // requested form tables
    if let Some(dir) = out_dir {
        for (name, file) in &scenario.outputs {
            let delimiter = if file.ends_with(".csv") { ',' } else { '\t' };
            let path = dir.join(file);
            match name.as_str() {
                "lambda" => {
                    if let Some(lambda) = &state.lambda {
                        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                        weinfib_core::table::write_field_samples(
                            &mut f,
                            lambda,
                            &state.model.base,
                            &state.model.complex,
                            delimiter,
                        )?;
                    }
                }
                "closed" => {
                    if let Some(closed) = &state.closed_output {
                        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                        weinfib_core::table::write_cochain(&mut f, closed, delimiter)?;
                    }
                }
                "psi_section" => {
                    if let Some(sec) = &state.psi_output {
                        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                        use std::io::Write;
                        writeln!(f, "node{delimiter}lift")?;
                        for (i, v) in sec.lift.iter().enumerate() {
                            writeln!(f, "{i}{delimiter}{v:.16e}")?;
                        }
                    }
                }
                other => bail!("unknown output {other}"),
            }
        }
    }

    let report = RunReport {
        schema_version: scenario.schema_version,
        model: scenario.model.name.clone(),
        seed,
        steps,
        exit,
    };
    Ok(PipelineOutcome { report, timings })
}

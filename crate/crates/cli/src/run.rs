//! Executes an [`ExperimentSpec`] and collects its JSON lines.
//!
//! Every random quantity is drawn from streams keyed by the spec's seed and
//! an item index, and parallel results are gathered in index order, so the
//! output does not depend on the thread count.

use fsep_core::dynamics::{evolve, step_fssep, step_ssm, AnyConfig, ObserverSpec};
use fsep_core::exact::{enumerate_even_ring, stationary_and_detailed_balance, transition_matrix, FiniteMarkovModel};
use fsep_core::gibbs::{sample_etis, EvenGibbsSampler, ParitySource};
use fsep_core::lattice::{ExclusionConfig, LeftRight, RingWord, StackConfig};
use fsep_core::report::TestReport;
use fsep_core::rng::stream;
use fsep_core::stats::{
    chi_square_homogeneity, halfdensity_convergence, mean_and_se, quench_lowdensity, random_exclusion, ratio_and_se,
    renewal_independence_test, stationarity_test, two_point_correlation, CylinderTable, QuenchResult,
};
use fsep_core::substitution::phi_stack;
use fsep_core::transfer::{density, fugacity_of_density, TransferSpec};
use fsep_core::{Error, Field, RngContext};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::spec::{Command, ExperimentSpec, Model, StateSpec, VerifyTest};
use crate::CliError;

pub struct Output {
    pub lines: Vec<Value>,
    /// False when a check failed; the process then exits with status 2.
    pub pass: bool,
}

impl Output {
    fn ok(lines: Vec<Value>) -> Self {
        Output { lines, pass: true }
    }
}

/// First line of every output.
pub fn manifest(spec: &ExperimentSpec) -> Value {
    json!({
        "manifest": {
            "tool": "fsep",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": spec.command.seed(),
            "spec": spec,
        }
    })
}

pub fn run(spec: &ExperimentSpec) -> Result<Output, CliError> {
    match &spec.command {
        Command::Simulate {
            model,
            state,
            sites,
            steps,
            seed,
            observers,
        } => {
            let cfg = initial(state, *model, *sites, &mut stream(*seed, "cli-initial", 0))?;
            let observers: Vec<ObserverSpec> = observers.iter().map(|o| o.0.clone()).collect();
            let traj = evolve(cfg.clone(), *steps, *seed, &observers)?;
            let mut lines = vec![json!({ "initial": cfg.to_string() })];
            for r in traj.records {
                lines.push(json!({ "record": r }));
            }
            lines.push(json!({
                "final": {
                    "config": traj.final_config.to_string(),
                    "frozen": traj.final_config.is_frozen(),
                    "frozen_at": traj.frozen_at,
                }
            }));
            Ok(Output::ok(lines))
        }
        Command::ExactRing {
            sites,
            particles,
            state_cap,
            table_cap,
            rational,
        } => {
            let states = enumerate_even_ring(*sites, *particles, *state_cap)?;
            if *rational {
                exact_ring::<fsep_core::Rational>(states, *table_cap, 0.0)
            } else {
                exact_ring::<f64>(states, *table_cap, 1e-10)
            }
        }
        Command::ExactTransfer {
            zeta,
            hmax,
            cylinders,
            ring_sites,
        } => transfer(*zeta, *hmax, cylinders, *ring_sites),
        Command::Gibbs {
            zeta,
            rho_e,
            sites,
            samples,
            parity,
            seed,
            k,
            emit_configs,
        } => gibbs(*zeta, *rho_e, *sites, *samples, parity, *seed, *k, *emit_configs),
        Command::Quench {
            rho,
            sites,
            seed,
            runs,
            max_steps,
        } => quench(*rho, *sites, *seed, *runs, *max_steps),
        Command::Verify { test, seed } => verify(test, *seed),
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn need_sites(sites: Option<usize>) -> fsep_core::Result<usize> {
    sites.ok_or_else(|| invalid("this state needs --sites".into()))
}

/// Draws the initial configuration described by `state` for `model`.
fn initial<R: Rng>(state: &StateSpec, model: Model, sites: Option<usize>, rng: &mut R) -> fsep_core::Result<AnyConfig> {
    let stack = |n: StackConfig, rng: &mut R| -> fsep_core::Result<AnyConfig> {
        match model {
            Model::Ssm => Ok(AnyConfig::Stack(n)),
            Model::Fssep => {
                let x = phi_stack(&n)?;
                let shift = rng.random_range(0..x.len()) as isize;
                Ok(AnyConfig::Exclusion(x.rotate(shift)))
            }
        }
    };
    match (state, model) {
        (StateSpec::Exclusion(x), Model::Fssep) => Ok(AnyConfig::Exclusion(x.clone())),
        (StateSpec::Stack(n), Model::Ssm) => Ok(AnyConfig::Stack(n.clone())),
        (StateSpec::Exclusion(_), Model::Ssm) | (StateSpec::Stack(_), Model::Fssep) => {
            Err(invalid("literal ring does not match the model".into()))
        }
        (StateSpec::Bernoulli { .. } | StateSpec::Fixed { .. }, Model::Ssm) => {
            Err(invalid("bernoulli and fixed states are exclusion configurations".into()))
        }
        (StateSpec::Bernoulli { rho }, Model::Fssep) => {
            if !(0.0..=1.0).contains(rho) {
                return Err(invalid(format!("density must lie in [0, 1], got {rho}")));
            }
            let m = need_sites(sites)?;
            Ok(AnyConfig::Exclusion(ExclusionConfig::from_bits(
                (0..m).map(|_| rng.random_bool(*rho)),
            )?))
        }
        (StateSpec::Fixed { rho }, Model::Fssep) => {
            Ok(AnyConfig::Exclusion(random_exclusion(need_sites(sites)?, *rho, rng)?))
        }
        (StateSpec::Gibbs { zeta }, _) => {
            let n = EvenGibbsSampler::new(*zeta, need_sites(sites)?)?.sample(rng);
            stack(n, rng)
        }
        (StateSpec::Etis { rho_e, kappa }, _) => {
            let parity = ParitySource::Bernoulli { kappa: *kappa };
            let (n, _) = sample_etis(*rho_e, &parity, need_sites(sites)?, rng)?;
            stack(n, rng)
        }
    }
}

fn exact_ring<S: Field + std::fmt::Display>(
    states: Vec<StackConfig>,
    table_cap: usize,
    tolerance: f64,
) -> Result<Output, CliError> {
    let model: FiniteMarkovModel<S> = transition_matrix(states)?;
    let (pi, report) = stationary_and_detailed_balance(&model)?;
    let pass = report.max_deviation <= tolerance && report.balance_residual <= tolerance;
    let mut lines = vec![json!({
        "exact_ring": {
            "states": model.len(),
            "method": report.method,
            "exact": S::EXACT,
            "max_deviation": report.max_deviation,
            "balance_residual": report.balance_residual,
            "row_defect": model.max_row_defect(),
            "closed_form_rates": model.matches_closed_form(),
            "table_rows": model.len().min(table_cap),
        }
    })];
    for (i, s) in model.states().iter().enumerate().take(table_cap) {
        let mut row = json!({
            "state": s.to_string(),
            "zeros": s.zeros(),
            "pi": report.pi[i],
            "gibbs": report.gibbs[i],
        });
        if S::EXACT {
            row["pi_exact"] = Value::String(pi[i].to_string());
        }
        lines.push(row);
    }
    Ok(Output { lines, pass })
}

fn parse_word(s: &str) -> Result<Vec<u32>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad height {t:?} in cylinder {s:?}")))
        })
        .collect()
}

fn transfer(zeta: f64, hmax: Option<u32>, cylinders: &[String], ring_sites: Option<usize>) -> Result<Output, CliError> {
    let t = match hmax {
        Some(h) => TransferSpec::<f64>::new(zeta, h)?,
        None => TransferSpec::<f64>::with_auto_hmax(zeta)?,
    };
    let (n1, n2) = t.numeric_eigenvalues();
    let mut lines = vec![json!({
        "transfer": {
            "zeta": zeta,
            "hmax": t.hmax(),
            "density": density(zeta),
            "lambda1": t.lambda1(),
            "lambda2": t.lambda2(),
            "numeric_lambda1": n1,
            "numeric_lambda2": n2,
            "decay_ratio": t.decay_ratio(),
            "exponent_form_ratio": t.exponent_form_ratio(),
        }
    })];
    for c in cylinders {
        let word = parse_word(c)?;
        let mut row = json!({ "cylinder": word, "prob": t.cylinder_prob(&word)? });
        if let Some(m) = ring_sites {
            row["ring_sites"] = json!(m);
            row["ring_prob"] = json!(t.ring_cylinder_prob(&word, m)?);
        }
        lines.push(row);
    }
    Ok(Output::ok(lines))
}

#[allow(clippy::too_many_arguments)]
fn gibbs(
    zeta: Option<f64>,
    rho_e: Option<f64>,
    sites: usize,
    samples: u64,
    parity: &ParitySource,
    seed: u64,
    k: usize,
    emit_configs: bool,
) -> Result<Output, CliError> {
    let zeta = match (zeta, rho_e) {
        (Some(z), None) => z,
        (None, Some(r)) => fugacity_of_density(r)?,
        _ => return Err(CliError::Usage("give exactly one of zeta and rho_e".into())),
    };
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    parity.validate()?;
    CylinderTable::new(k)?;
    let sampler = EvenGibbsSampler::new(zeta, sites)?;
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "cli-gibbs", i);
            let even = sampler.sample(&mut rng);
            let n = match parity {
                ParitySource::Even => even,
                p => even.add_parity(&p.sample(sites, &mut rng)?)?,
            };
            let mut t = CylinderTable::new(k)?;
            t.add_ring(&n)?;
            let config = emit_configs.then(|| n.to_string());
            Ok((n.density(), n.parity_map().density(), t, config))
        })
        .collect::<fsep_core::Result<Vec<_>>>()?;
    let mut table = CylinderTable::new(k)?;
    let mut lines = Vec::new();
    let mut densities = Vec::with_capacity(rows.len());
    let mut odd = Vec::with_capacity(rows.len());
    for (i, (d, o, t, config)) in rows.into_iter().enumerate() {
        table.merge(&t)?;
        densities.push(d);
        odd.push(o);
        if let Some(c) = config {
            lines.push(json!({ "sample": i, "config": c }));
        }
    }
    let (d, d_se) = mean_and_se(&densities);
    let (o, o_se) = mean_and_se(&odd);
    let rho_e = density(zeta);
    lines.push(json!({
        "gibbs": {
            "zeta": zeta,
            "rho_e": rho_e,
            "samples": samples,
            "density": d,
            "density_se": d_se,
            "expected_density": parity.density().map(|p| rho_e + p),
            "odd_fraction": o,
            "odd_fraction_se": o_se,
            "windows": table.to_json(),
        }
    }));
    Ok(Output::ok(lines))
}

fn quench_runs(rho: f64, sites: usize, seed: u64, runs: u64, max_steps: u64) -> fsep_core::Result<Vec<QuenchResult>> {
    (0..runs)
        .into_par_iter()
        .map(|i| quench_lowdensity(rho, sites, seed.wrapping_add(i), max_steps))
        .collect()
}

fn quench(rho: f64, sites: usize, seed: u64, runs: u64, max_steps: u64) -> Result<Output, CliError> {
    if runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    let results = quench_runs(rho, sites, seed, runs, max_steps)?;
    let mut lines = Vec::new();
    let (mut hits, mut gap1, mut trials, mut q) = (vec![], vec![], vec![], vec![]);
    for (i, r) in results.iter().enumerate() {
        let after = r.record.count_following(&r.final_config, "101000");
        let ones = r.record.gaps.iter().filter(|&&g| g == 1).count();
        lines.push(json!({
            "run": i,
            "seed": seed.wrapping_add(i as u64),
            "steps": r.steps,
            "frozen": r.frozen,
            "markers_never_created": r.markers_never_created,
            "markers": r.record.markers.len(),
            "gaps_of_one": ones,
            "followed_by_101000": after,
            "q_hat": r.q_hat,
        }));
        hits.push(after as f64);
        gap1.push(ones as f64);
        trials.push(r.record.markers.len() as f64);
        q.push(r.q_hat);
    }
    let (q_mean, q_se) = mean_and_se(&q);
    let (p, p_se) = ratio_and_se(&hits, &trials);
    let (g, g_se) = ratio_and_se(&gap1, &trials);
    let frozen = results.iter().all(|r| r.frozen && r.markers_never_created);
    lines.push(json!({
        "quench": {
            "runs": runs,
            "all_frozen": frozen,
            "q_mean": q_mean,
            "q_se": q_se,
            "q_bound": (1.0 - 2.0 * rho) / (1.0 - rho),
            "p_101000": p,
            "p_101000_se": p_se,
            "p_101000_expected": rho * rho * (1.0 - rho).powi(4),
            "p_gap_one": g,
            "p_gap_one_se": g_se,
            "p_gap_one_expected": 1.0 - rho,
        }
    }));
    Ok(Output { lines, pass: frozen })
}

fn reported(detail: Value, reports: Vec<TestReport>) -> Output {
    let pass = reports.iter().all(|r| r.pass);
    let mut lines = vec![json!({ "detail": detail })];
    lines.extend(reports.into_iter().map(|r| serde_json::to_value(r).expect("report serializes")));
    Output { lines, pass }
}

fn verify(test: &VerifyTest, seed: u64) -> Result<Output, CliError> {
    match test {
        VerifyTest::Stationarity {
            model,
            state,
            sites,
            k,
            samples,
            stride,
            alpha,
        } => {
            initial(state, *model, Some(*sites), &mut stream(seed, "cli-probe", 0))?;
            let sample = |rng: &mut rand_chacha::ChaCha8Rng| initial(state, *model, Some(*sites), rng);
            let c = match model {
                Model::Ssm => stationarity_test(
                    |rng| match sample(rng)? {
                        AnyConfig::Stack(n) => Ok(n),
                        AnyConfig::Exclusion(_) => unreachable!("stack model samples stack rings"),
                    },
                    step_ssm,
                    *k,
                    *samples,
                    *stride,
                    seed,
                )?,
                Model::Fssep => stationarity_test(
                    |rng| match sample(rng)? {
                        AnyConfig::Exclusion(x) => Ok(x),
                        AnyConfig::Stack(_) => unreachable!("exclusion model samples exclusion rings"),
                    },
                    |x, ctx| Ok(step_fssep(x, ctx)),
                    *k,
                    *samples,
                    *stride,
                    seed,
                )?,
            };
            let report = TestReport::from_p_value("stationarity", c.statistic, c.p_value, *alpha);
            Ok(reported(serde_json::to_value(&c).expect("comparison serializes"), vec![report]))
        }
        VerifyTest::DetailedBalance {
            sites,
            particles,
            tolerance,
        } => {
            let model: FiniteMarkovModel<f64> = transition_matrix(enumerate_even_ring(*sites, *particles, 1_000_000)?)?;
            let (_, r) = stationary_and_detailed_balance(&model)?;
            let detail = json!({
                "states": model.len(),
                "method": r.method,
                "max_deviation": r.max_deviation,
                "balance_residual": r.balance_residual,
            });
            let worst = r.max_deviation.max(r.balance_residual);
            Ok(reported(detail, vec![TestReport::below("detailed_balance", worst, *tolerance)]))
        }
        VerifyTest::Renewal { rho, sites, runs, alpha } => {
            let results = quench_runs(*rho, *sites, seed, *runs, 10_000_000)?;
            let frozen = results.iter().filter(|r| r.frozen && r.markers_never_created).count();
            let gaps: Vec<Vec<usize>> = results.iter().map(|r| r.record.gaps.clone()).collect();
            let t = renewal_independence_test(&gaps)?;
            Ok(reported(
                serde_json::to_value(&t).expect("test serializes"),
                vec![
                    TestReport::at_least("frozen_runs", frozen as f64, *runs as f64),
                    TestReport::from_p_value("renewal", t.statistic, t.p_value, *alpha),
                ],
            ))
        }
        VerifyTest::Halfdensity { sites, runs, max_steps } => {
            let outcomes = (0..*runs)
                .into_par_iter()
                .map(|i| match halfdensity_convergence(*sites, seed.wrapping_add(i), *max_steps, 100) {
                    Ok(r) => Ok(Some(r)),
                    Err(Error::StepLimit(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<fsep_core::Result<Vec<_>>>()?;
            let absorbed: Vec<_> = outcomes.iter().flatten().collect();
            let good = absorbed.iter().filter(|r| r.translation_ok).count();
            let times: Vec<f64> = absorbed.iter().map(|r| r.absorbed_at as f64).collect();
            let detail = json!({
                "runs": runs,
                "absorbed": absorbed.len(),
                "left": absorbed.iter().filter(|r| r.class == LeftRight::Left).count(),
                "right": absorbed.iter().filter(|r| r.class == LeftRight::Right).count(),
                "both": absorbed.iter().filter(|r| r.class == LeftRight::Both).count(),
                "max_absorption_step": times.iter().copied().fold(0.0, f64::max),
                "mean_absorption_step": mean_and_se(&times).0,
            });
            Ok(reported(detail, vec![TestReport::at_least("halfdensity", good as f64, *runs as f64)]))
        }
        VerifyTest::Equivariance {
            zeta,
            sites,
            steps,
            k,
            samples,
            stride,
            alpha,
        } => {
            let sampler = EvenGibbsSampler::new(*zeta, *sites)?;
            let image_len = *sites as f64 * (1.0 + density(*zeta));
            let per_ring = (image_len / (*stride).max(1) as f64).floor().max(1.0) as u64;
            let rings = samples.div_ceil(per_ring) * 11 / 10 + 1;
            let table = |exclusion_first: bool| -> fsep_core::Result<CylinderTable> {
                let label = if exclusion_first { "cli-push-then-step" } else { "cli-step-then-push" };
                (0..rings)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = stream(seed, label, i);
                        let src = sampler.sample(&mut rng);
                        let mut ctx = RngContext::new(rng.random());
                        let image = if exclusion_first {
                            let x = phi_stack(&src)?;
                            let mut x = x.rotate(rng.random_range(0..x.ring_len()) as isize);
                            for _ in 0..*steps {
                                x = step_fssep(&x, &ctx);
                                ctx.advance();
                            }
                            x
                        } else {
                            let mut s = src;
                            for _ in 0..*steps {
                                s = step_ssm(&s, &ctx)?;
                                ctx.advance();
                            }
                            let x = phi_stack(&s)?;
                            x.rotate(rng.random_range(0..x.ring_len()) as isize)
                        };
                        let mut t = CylinderTable::new(*k)?;
                        t.add_ring_strided(&image, *stride)?;
                        Ok(t)
                    })
                    .collect::<fsep_core::Result<Vec<_>>>()?
                    .into_iter()
                    .try_fold(CylinderTable::new(*k)?, |mut acc, t| {
                        acc.merge(&t)?;
                        Ok(acc)
                    })
            };
            let a = table(true)?;
            let b = table(false)?;
            let c = chi_square_homogeneity(&a, &b)?;
            let mut detail = serde_json::to_value(&c).expect("comparison serializes");
            detail["windows"] = json!([a.total(), b.total()]);
            Ok(reported(
                detail,
                vec![TestReport::from_p_value("equivariance", c.statistic, c.p_value, *alpha)],
            ))
        }
        VerifyTest::Correlation {
            zeta,
            sites,
            samples,
            tolerance,
        } => {
            let sampler = EvenGibbsSampler::new(*zeta, *sites)?;
            let rings: Vec<StackConfig> = (0..*samples)
                .into_par_iter()
                .map(|i| sampler.sample(&mut stream(seed, "cli-correlation", i)))
                .collect();
            let fit = two_point_correlation(&rings, 8)?;
            let expected = (1.0 - zeta) / (1.0 + zeta);
            let rel = (fit.ratio - expected).abs() / expected;
            let mut detail = serde_json::to_value(&fit).expect("fit serializes");
            detail["expected_ratio"] = json!(expected);
            detail["exponent_form_ratio"] = json!(TransferSpec::<f64>::with_auto_hmax(*zeta)?.exponent_form_ratio());
            Ok(reported(detail, vec![TestReport::below("correlation", rel, *tolerance)]))
        }
    }
}

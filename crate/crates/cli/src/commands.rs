use std::fmt::Write as _;

use gaplab_core::cocycle::{lyapunov, rotation_number_averaged, CocycleSpec};
use gaplab_core::frequency::{build_frequency, parse_digit_list, resonances, Frequency, IrrationalFrequency, Rational};
use gaplab_core::localization::{
    attach_resonances, dual_eigenpairs, dual_lyapunov, resonance_epsilon, verify_strong_localization, Constants,
};
use gaplab_core::rational_spectrum::{butterfly, gap_labels, gap_labels_with, holder_fit, ids_sturm, lebesgue_measure, spectrum_rational};
use gaplab_core::reducibility::kam::kam_step;
use gaplab_core::reducibility::pipeline::{reduce_pipeline, NormalForm, ReduceConfig};
use gaplab_core::reducibility::{ParabolicForm, TrigMat};
use gaplab_core::verify::{format_table, golden_fractions, run_criterion, CRITERIA};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{f17, to_json_string};
use crate::{Artifact, CliError, Cmd, EnergyGrid, Format, IdsMethod};

type Res<T> = Result<T, CliError>;

fn core<T>(r: gaplab_core::Result<T>, stage: &str) -> Res<T> {
    r.map_err(|e| CliError::from_core(e, stage))
}

fn parse_alpha(s: &str) -> Res<Frequency> {
    Frequency::parse(s).map_err(|e| CliError::Usage(format!("--alpha {s}: {e}")))
}

fn rational(alpha: &Frequency, s: &str) -> Res<Rational> {
    alpha.as_rational().ok_or_else(|| CliError::Usage(format!("--alpha {s}: this command needs a rational p/q")))
}

fn irrational<'a>(alpha: &'a Frequency, s: &str) -> Res<&'a IrrationalFrequency> {
    alpha.as_irrational().ok_or_else(|| CliError::Usage(format!("--alpha {s}: this command needs an irrational frequency")))
}

fn digits_of(alpha: &Frequency) -> Vec<String> {
    match alpha {
        Frequency::Rational(r) => vec![format!("{}/{}", r.p, r.q)],
        Frequency::Irrational(f) => f.digits().iter().map(|d| d.to_string()).collect(),
    }
}

fn seeds_of(spec: &str) -> Vec<u64> {
    spec.strip_prefix("synth:")
        .and_then(|r| r.split(':').nth(2))
        .and_then(|s| s.parse().ok())
        .into_iter()
        .collect()
}

fn big(x: &num_bigint::BigUint) -> Value {
    match x.to_u64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}

fn energies(g: &EnergyGrid) -> Res<Vec<f64>> {
    if !g.energy.is_empty() {
        return Ok(g.energy.clone());
    }
    match (g.emin, g.emax) {
        (Some(lo), Some(hi)) if g.n >= 2 && hi > lo => {
            Ok((0..g.n).map(|i| lo + (hi - lo) * i as f64 / (g.n - 1) as f64).collect())
        }
        (Some(lo), Some(hi)) if g.n == 1 && hi >= lo => Ok(vec![lo]),
        _ => Err(CliError::Usage("give --energy values or --emin < --emax with --n ≥ 1".into())),
    }
}

fn artifact(body: String, alpha: Option<(&Frequency, &str)>) -> Artifact {
    Artifact {
        body,
        console: None,
        frequency_digits: alpha.map(|(a, _)| digits_of(a)).unwrap_or_default(),
        seeds: alpha.map(|(_, s)| seeds_of(s)).unwrap_or_default(),
        failure: None,
    }
}

pub fn dispatch(cmd: &Cmd) -> Res<Artifact> {
    let stage = cmd.name();
    match cmd {
        Cmd::Freq { alpha, digits } => {
            let (spec, freq) = match (alpha, digits) {
                (Some(a), _) => (a.clone(), parse_alpha(a)?),
                (None, Some(d)) => {
                    let list = parse_digit_list(d).map_err(|e| CliError::Usage(format!("--digits {d}: {e}")))?;
                    (d.clone(), Frequency::Irrational(core(build_frequency(&list), stage)?))
                }
                (None, None) => return Err(CliError::Usage("give --alpha or --digits".into())),
            };
            let body = match &freq {
                Frequency::Rational(r) => json!({"p": r.p, "q": r.q, "value": r.value()}),
                Frequency::Irrational(f) => {
                    let conv: Vec<Value> = (0..=f.len())
                        .map(|n| {
                            let (p, q) = f.convergent(n);
                            json!({"n": n, "p": big(p), "q": big(q)})
                        })
                        .collect();
                    let mut v = f.to_json();
                    v["value"] = json!(f.value());
                    v["beta_hat"] = json!(f.beta_hat());
                    v["convergents"] = Value::Array(conv);
                    v
                }
            };
            Ok(artifact(to_json_string(&body), Some((&freq, &spec))))
        }
        Cmd::Spectrum { lambda, alpha, tol, format, check_ids } => {
            let freq = parse_alpha(alpha)?;
            let r = rational(&freq, alpha)?;
            let s = core(spectrum_rational(*lambda, r, *tol), stage)?;
            let s = if *check_ids { gap_labels(&s) } else { gap_labels_with(&s, None) };
            let body = match format {
                Format::Csv => s.bands_csv(),
                Format::Json => {
                    let mut v = s.to_json();
                    v["measure"] = json!(lebesgue_measure(&s.intervals()));
                    if *check_ids {
                        v["gap_ids_sturm"] = json!(s.gaps.iter().map(|g| g.ids_sturm).collect::<Vec<_>>());
                    }
                    to_json_string(&v)
                }
            };
            Ok(artifact(body, Some((&freq, alpha))))
        }
        Cmd::Butterfly { lambda, qmax, tol } => {
            if *qmax < 1 {
                return Err(CliError::Usage("--qmax must be ≥ 1".into()));
            }
            let specs = core(butterfly(*lambda, *qmax, *tol), stage)?;
            let mut body = String::from("p,q,band,lo,hi\n");
            for s in &specs {
                for b in &s.bands {
                    let _ = writeln!(body, "{},{},{},{},{}", s.p, s.q, b.index, f17(b.lo), f17(b.hi));
                }
            }
            Ok(artifact(body, None))
        }
        Cmd::Ids { lambda, alpha, grid, method, m, thetas, iters } => {
            let freq = parse_alpha(alpha)?;
            let es = energies(grid)?;
            let vals: Vec<f64> = es
                .par_iter()
                .map(|&e| match method {
                    IdsMethod::Sturm => Ok(ids_sturm(e, *lambda, &freq, *thetas, *m)),
                    IdsMethod::Rotation => {
                        rotation_number_averaged(&CocycleSpec::new(*lambda, e, freq.clone()), *iters, *thetas).map(|rho| 1.0 - 2.0 * rho)
                    }
                })
                .collect::<gaplab_core::Result<_>>()
                .map_err(|e| CliError::from_core(e, stage))?;
            let mut body = String::from("energy,ids\n");
            for (e, v) in es.iter().zip(&vals) {
                let _ = writeln!(body, "{},{}", f17(*e), f17(*v));
            }
            Ok(artifact(body, Some((&freq, alpha))))
        }
        Cmd::Lyap { lambda, alpha, grid, iters, phases, seed, im } => {
            let freq = parse_alpha(alpha)?;
            let es = energies(grid)?;
            let ests = es
                .par_iter()
                .map(|&e| lyapunov(&CocycleSpec::new(*lambda, e, freq.clone()).with_im_offset(*im), *iters, *phases, *seed))
                .collect::<gaplab_core::Result<Vec<_>>>()
                .map_err(|e| CliError::from_core(e, stage))?;
            let mut body = String::from("energy,mean,max,min\n");
            for (e, l) in es.iter().zip(&ests) {
                let _ = writeln!(body, "{},{},{},{}", f17(*e), f17(l.mean), f17(l.max), f17(l.min));
            }
            let mut art = artifact(body, Some((&freq, alpha)));
            art.seeds.push(*seed);
            Ok(art)
        }
        Cmd::Rot { lambda, alpha, grid, iters, starts } => {
            let freq = parse_alpha(alpha)?;
            let es = energies(grid)?;
            let rhos = es
                .par_iter()
                .map(|&e| rotation_number_averaged(&CocycleSpec::new(*lambda, e, freq.clone()), *iters, *starts))
                .collect::<gaplab_core::Result<Vec<_>>>()
                .map_err(|e| CliError::from_core(e, stage))?;
            let mut body = String::from("energy,rho,ids\n");
            for (e, r) in es.iter().zip(&rhos) {
                let _ = writeln!(body, "{},{},{}", f17(*e), f17(*r), f17(1.0 - 2.0 * r));
            }
            Ok(artifact(body, Some((&freq, alpha))))
        }
        Cmd::Resonances { alpha, theta, eps0, k } => {
            let freq = parse_alpha(alpha)?;
            let ir = irrational(&freq, alpha)?;
            let rep = core(resonances(*theta, *eps0, *k, ir), stage)?;
            let body = to_json_string(&serde_json::to_value(&rep).unwrap_or(Value::Null));
            Ok(artifact(body, Some((&freq, alpha))))
        }
        Cmd::Localize { lambda, alpha, energy, theta, m, window } => {
            let freq = parse_alpha(alpha)?;
            let ir = irrational(&freq, alpha)?;
            let pairs = core(dual_eigenpairs(*lambda, &freq, *theta, *m, (energy - window, energy + window)), stage)?;
            let mut pair = pairs
                .into_iter()
                .filter(|p| !p.boundary_contaminated)
                .min_by(|a, b| (a.energy - energy).abs().total_cmp(&(b.energy - energy).abs()))
                .ok_or_else(|| CliError::Compute {
                    stage: stage.into(),
                    msg: format!("no boundary-clean dual eigenpair within {window} of {energy}"),
                })?;
            let consts = Constants::default();
            let eps1 = dual_lyapunov(*lambda) / consts.eps1_divisor;
            core(attach_resonances(&mut pair, ir, resonance_epsilon(*lambda, ir, &consts)), stage)?;
            let rep = core(verify_strong_localization(&pair, consts.c0, eps1), stage)?;
            let mut body = String::from("k,u_k,|u_k|,bound\n");
            for (i, u) in pair.coeffs.iter().enumerate() {
                let k = i as i64 - pair.m as i64;
                // The bound only holds on the resonance windows; elsewhere it is blank.
                let dist = (k - pair.center).abs() as f64;
                let bound = rep
                    .windows
                    .iter()
                    .find(|w| dist > w.lo && dist < w.hi)
                    .and_then(|w| w.log_c_min)
                    .map_or(String::new(), |lc| f17((lc - eps1 * dist).exp()));
                let _ = writeln!(body, "{k},{},{},{bound}", f17(*u), f17(pair.log_abs[i].exp()));
            }
            Ok(artifact(body, Some((&freq, alpha))))
        }
        Cmd::Reduce { lambda, alpha, energy, window, m, theta_grid, k_max } => {
            let freq = parse_alpha(alpha)?;
            irrational(&freq, alpha)?;
            let cfg = ReduceConfig { m: *m, window: *window, theta_grid: *theta_grid, k_max: *k_max, ..ReduceConfig::default() };
            let red = core(reduce_pipeline(*lambda, &freq, *energy, &cfg), stage)?;
            let mut v = red.to_json();
            v["alpha"] = json!(alpha);
            Ok(artifact(to_json_string(&v), Some((&freq, alpha))))
        }
        Cmd::Kamstep { input, eps, n_trunc } => {
            let text = std::fs::read_to_string(input)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
            let field = |k: &str| v.get(k).ok_or_else(|| CliError::Usage(format!("conjugacy JSON lacks \"{k}\"")));
            let lambda = field("lambda")?.as_f64().ok_or_else(|| CliError::Usage("lambda must be a number".into()))?;
            let energy = field("energy")?.as_f64().ok_or_else(|| CliError::Usage("energy must be a number".into()))?;
            let alpha_s = field("alpha")?.as_str().ok_or_else(|| CliError::Usage("alpha must be a string".into()))?.to_string();
            let freq = parse_alpha(&alpha_s)?;
            let nf: NormalForm = serde_json::from_value(field("normal_form")?.clone())
                .map_err(|e| CliError::Usage(format!("normal_form: {e}")))?;
            let z: ParabolicForm = match nf {
                NormalForm::Parabolic(z) => z,
                NormalForm::Rotation { .. } => {
                    return Err(CliError::Compute { stage: stage.into(), msg: "conjugacy reduces to a rotation; a KAM step needs a parabolic form".into() })
                }
            };
            let b = TrigMat::from_json(field("b")?).map_err(|e| CliError::Usage(format!("b: {e}")))?;
            let n = n_trunc.unwrap_or(2 * b.trunc());
            let rep = core(kam_step(&b, &z, lambda, energy, freq.value(), *eps, n), stage)?;
            let body = json!({
                "lambda": lambda,
                "energy": energy,
                "alpha": alpha_s,
                "eps": rep.eps,
                "n_trunc": rep.n_trunc,
                "z": z,
                "precondition": rep.precondition,
                "identity_check": rep.identity_check,
                "homological_residual": rep.homological_residual,
                "min_divisor": rep.divisors.min,
                "residual_before": rep.residual_before,
                "residual_after": rep.residual_after,
                "residual_half": rep.residual_half,
                "richardson_ratio": rep.richardson_ratio,
                "exp_det_defect": rep.exp_det_defect,
                "p_avg": rep.p_avg,
                "certificate": rep.certificate,
                "discriminant": rep.discriminant(),
                "y": rep.y.to_json(),
            });
            Ok(artifact(to_json_string(&body), Some((&freq, &alpha_s))))
        }
        Cmd::Holder { lambda, qmax, tol } => {
            let fracs = golden_fractions(*qmax);
            let fit = core(holder_fit(*lambda, &fracs, *tol), stage)?;
            Ok(artifact(to_json_string(&serde_json::to_value(&fit).unwrap_or(Value::Null)), None))
        }
        Cmd::Verify { suite, only } => {
            if suite != "core" {
                return Err(CliError::Usage(format!("unknown suite {suite}; available: core")));
            }
            let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only.clone() };
            if let Some(bad) = ids.iter().find(|i| !CRITERIA.iter().any(|c| c.0 == **i)) {
                return Err(CliError::Usage(format!("no criterion {bad}")));
            }
            let results: Vec<_> = ids.iter().map(|&i| run_criterion(i)).collect();
            let table = format_table(&results);
            let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
            let body = to_json_string(&serde_json::to_value(&results).unwrap_or(Value::Null));
            Ok(Artifact {
                body,
                console: Some(table),
                frequency_digits: Vec::new(),
                seeds: Vec::new(),
                failure: (!failed.is_empty())
                    .then(|| CliError::Compute { stage: stage.into(), msg: format!("criteria failed: {}", failed.join(", ")) }),
            })
        }
    }
}

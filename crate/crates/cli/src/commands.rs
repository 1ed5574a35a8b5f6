use std::path::Path;

use serde_json::{json, Value};

use l2mbqc::boolfn::{format_bits, make_named, nonlinearity, BooleanFunction, NamedFunction};
use l2mbqc::export::sig9;
use l2mbqc::gates::{
    below_threshold, chsh_and_gate, kmaj_from_noisy_ghz, maj3_from_and, noncontextual_and_gate, threshold_csv,
    threshold_rows, xnand_from_and, NoisyGate,
};
use l2mbqc::ghzc::{self, CompileOptions, GhzProgram};
use l2mbqc::mbqc::{contextuality_certificate, programs, L2Program};
use l2mbqc::reliability::{build, certify, BuildParams, CircuitGates, FormulaDag, MonteCarloOptions, SimulationReport};

use crate::output::{emit, emit_json, format, in_file, read};
use crate::{
    CompileArgs, ComputeResource, Format, FormulaSource, GateArgs, GateName, InequalityArgs, ReliableArgs, Resource,
    Status, SweepArgs, ThresholdArgs, UsageError, VerifyArgs,
};

const MAX_KMAX: usize = 41;

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

fn load_function(path: &Path) -> Result<BooleanFunction, UsageError> {
    in_file(path, BooleanFunction::from_text(&read(path)?))
}

fn ghz_gate(target: BooleanFunction, epsilon: f64) -> Result<NoisyGate, UsageError> {
    let program = ghzc::compile(&target)?;
    Ok(NoisyGate::from_program(
        ghzc::run_as_l2program(&program, epsilon)?,
        target,
    )?)
}

fn and_from(resource: Resource) -> NoisyGate {
    match resource {
        Resource::Chsh => chsh_and_gate(),
        _ => noncontextual_and_gate(),
    }
}

fn build_gate(a: &GateArgs) -> Result<NoisyGate, UsageError> {
    if a.epsilon.is_some() && a.resource != Resource::Ghz {
        return usage("--epsilon applies only to --resource ghz");
    }
    if a.k.is_some() && a.name != GateName::Maj {
        return usage("--k applies only to maj");
    }
    let eps = a.epsilon.unwrap_or(0.0);
    Ok(match (a.name, a.resource) {
        (GateName::And, Resource::Ghz) => ghz_gate(BooleanFunction::and(), eps)?,
        (GateName::And, r) => and_from(r),
        (GateName::Maj, Resource::Ghz) => kmaj_from_noisy_ghz(a.k.unwrap_or(3), eps)?,
        (GateName::Maj, r) => match a.k.unwrap_or(3) {
            3 => maj3_from_and(&and_from(r))?,
            k => {
                return usage(format!(
                    "maj with k={k} needs --resource ghz; AND-based majority is 3-input"
                ))
            }
        },
        (GateName::Xnand, Resource::Ghz) => ghz_gate(BooleanFunction::xnand(), eps)?,
        (GateName::Xnand, r) => xnand_from_and(&and_from(r))?,
    })
}

pub fn gate(a: GateArgs) -> Result<Status, UsageError> {
    let g = build_gate(&a)?;
    let n = g.arity();
    let eps = g.epsilon();
    let threshold = match (a.name, eps) {
        (GateName::Maj, Some(e)) => Some(below_threshold(n, e)?),
        _ => None,
    };
    let classification = match eps {
        Some(e) => format!("epsilon-noisy with epsilon={}", sig9(e)),
        None => "input-dependent error".to_string(),
    };
    match format(&a.output, Format::Csv) {
        Format::Csv => {
            let mut csv = String::from("input,success,error\n");
            for x in 0..1u64 << n {
                let e = g.error(x);
                csv.push_str(&format!("{},{},{}\n", format_bits(x, n), sig9(1.0 - e), sig9(e)));
            }
            emit(&a.output, "gate.csv", &csv)?;
            eprintln!("{classification}");
            if let Some(below) = threshold {
                eprintln!("{} beta_{n}", if below { "below" } else { "not below" });
            }
        }
        Format::Json => {
            let rows: Vec<Value> = (0..1u64 << n)
                .map(|x| json!({"input": format_bits(x, n), "success": 1.0 - g.error(x), "error": g.error(x)}))
                .collect();
            emit_json(
                &a.output,
                "gate.json",
                &json!({
                    "arity": n,
                    "rows": rows,
                    "epsilon": eps,
                    "classification": classification,
                    "below_threshold": threshold,
                }),
            )?;
        }
    }
    Ok(Status::Ok)
}

pub fn thresholds(a: ThresholdArgs) -> Result<Status, UsageError> {
    if a.kmax.is_multiple_of(2) || !(3..=MAX_KMAX).contains(&a.kmax) {
        return usage(format!("--kmax must be odd and in [3, {MAX_KMAX}], got {}", a.kmax));
    }
    let rows = threshold_rows(a.kmax)?;
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    let positive = rows.iter().all(|r| r.gap > num_rational::BigRational::default());
    match format(&a.output, Format::Csv) {
        Format::Csv => emit(&a.output, "thresholds.csv", &threshold_csv(&rows))?,
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "k": r.k,
                        "beta": l2mbqc::export::ratio(&r.beta),
                        "nu_over_2k": l2mbqc::export::ratio(&r.nu),
                        "gap": l2mbqc::export::ratio(&r.gap),
                    })
                })
                .collect();
            emit_json(
                &a.output,
                "thresholds.json",
                &json!({"rows": items, "gap_positive": positive, "gap_decreasing": decreasing}),
            )?;
        }
    }
    eprintln!("gap positive: {positive}, strictly decreasing: {decreasing}");
    Ok(if decreasing && positive {
        Status::Ok
    } else {
        Status::Failed
    })
}

pub fn compile(a: CompileArgs) -> Result<Status, UsageError> {
    let f = load_function(&a.function)?;
    let program = ghzc::compile_with(&f, CompileOptions { pad: a.pad })?;
    emit_json(&a.output, "program.ghz.json", &serde_json::to_value(&program)?)?;
    eprintln!("{} qubits for {} inputs", program.qubits().len(), f.arity());
    Ok(Status::Ok)
}

pub fn verify(a: VerifyArgs) -> Result<Status, UsageError> {
    let f = load_function(&a.function)?;
    let program: GhzProgram = in_file(&a.program, serde_json::from_str(&read(&a.program)?))?;
    let report = ghzc::verify(&program, &f)?;
    let n = f.arity();
    let failing = report.failing_inputs();
    match format(&a.output, Format::Csv) {
        Format::Csv => {
            let mut csv = String::from("input,congruent,success,oracle_success\n");
            for x in 0..1usize << n {
                let oracle = report.oracle_success.as_ref().map_or(String::new(), |o| sig9(o[x]));
                csv.push_str(&format!(
                    "{},{},{},{oracle}\n",
                    format_bits(x as u64, n),
                    report.congruent[x],
                    sig9(report.success[x])
                ));
            }
            emit(&a.output, "verify.csv", &csv)?;
        }
        Format::Json => emit_json(
            &a.output,
            "verify.json",
            &json!({
                "deterministic": report.deterministic,
                "success": report.success,
                "oracle_success": report.oracle_success,
                "failing_inputs": failing.iter().map(|&x| format_bits(x, n)).collect::<Vec<_>>(),
            }),
        )?,
    }
    if failing.is_empty() {
        eprintln!("verified: success 1 on all {} inputs", 1u64 << n);
        Ok(Status::Ok)
    } else {
        let list: Vec<String> = failing.iter().map(|&x| format_bits(x, n)).collect();
        eprintln!("verification failed on {} inputs: {}", failing.len(), list.join(" "));
        Ok(Status::Failed)
    }
}

fn load_l2_program(spec: &str) -> Result<L2Program, UsageError> {
    match spec {
        "chsh-and" => return Ok(programs::chsh_and()),
        "noncontextual-and" => return Ok(programs::noncontextual_and()),
        _ => {}
    }
    let path = Path::new(spec);
    let text = read(path)?;
    let value: Value = in_file(path, serde_json::from_str(&text))?;
    if value.get("qubits").is_some() {
        let ghz: GhzProgram = in_file(path, serde_json::from_str(&text))?;
        Ok(ghzc::run_as_l2program(&ghz, 0.0)?)
    } else {
        in_file(path, serde_json::from_str(&text))
    }
}

pub fn inequality(a: InequalityArgs) -> Result<Status, UsageError> {
    let f = load_function(&a.function)?;
    let program = load_l2_program(&a.program)?;
    let report = program.run_exact(&f)?;
    let cert = contextuality_certificate(&report, &f)?;
    match format(&a.output, Format::Json) {
        Format::Csv => emit(&a.output, "inequality.csv", &report.to_csv())?,
        Format::Json => {
            let mut summary = cert.summary_json();
            summary["nonlinearity"] = json!(nonlinearity(&f)?);
            summary["arity"] = json!(f.arity());
            summary["success"] = json!(report.success.iter().map(|s| sig9(*s)).collect::<Vec<_>>());
            emit_json(&a.output, "inequality.json", &summary)?;
        }
    }
    eprintln!(
        "delta = {} ({})",
        sig9(cert.violation),
        serde_json::to_value(cert.verdict)?.as_str().unwrap_or_default()
    );
    Ok(Status::Ok)
}

fn load_formula(source: &FormulaSource) -> Result<FormulaDag, UsageError> {
    match (&source.formula, source.tree) {
        (Some(path), None) => in_file(path, FormulaDag::parse(&read(path)?)),
        (None, Some(depth)) => Ok(FormulaDag::balanced_tree(depth)?),
        _ => usage("give exactly one of --formula and --tree"),
    }
}

fn circuit_gates(
    k: usize,
    compute: ComputeResource,
    mu: Option<f64>,
    epsilon: Option<f64>,
) -> Result<CircuitGates, UsageError> {
    let and = match compute {
        ComputeResource::Chsh => chsh_and_gate(),
        ComputeResource::Noncontextual => noncontextual_and_gate(),
    };
    let xnand = match mu {
        Some(m) => NoisyGate::uniform(BooleanFunction::xnand(), m)?,
        None => xnand_from_and(&and)?,
    };
    let kmaj = match (epsilon, k) {
        (Some(e), k) => NoisyGate::uniform(make_named(NamedFunction::Maj, Some(k))?, e)?,
        (None, 3) => maj3_from_and(&chsh_and_gate())?,
        (None, k) => {
            return usage(format!(
                "k={k} restores need --epsilon; the CHSH-derived majority is 3-input"
            ))
        }
    };
    Ok(CircuitGates { xnand, kmaj })
}

fn require_seed(trials: u64, seed: Option<u64>) -> Result<u64, UsageError> {
    match (trials, seed) {
        (0, s) => Ok(s.unwrap_or(0)),
        (_, Some(s)) => Ok(s),
        (_, None) => usage("--seed is required when --trials > 0"),
    }
}

struct Evaluated {
    report: SimulationReport,
    reliable: bool,
    warnings: Vec<String>,
}

fn evaluate(
    formula: &FormulaDag,
    params: BuildParams,
    gates: CircuitGates,
    trials: u64,
    workers: usize,
    margin: f64,
) -> Result<Evaluated, UsageError> {
    let circuit = build(formula, params, gates)?;
    let report = if trials > 0 {
        circuit.full_report(MonteCarloOptions {
            trials,
            seed: params.seed,
            workers,
        })?
    } else {
        circuit.analytic_report()
    };
    let cert = certify(&report, margin)?;
    let mut warnings = circuit.warnings().to_vec();
    for w in &report.warnings {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    Ok(Evaluated {
        report,
        reliable: cert.reliable,
        warnings,
    })
}

const SHOWN_WARNINGS: usize = 5;

fn print_warnings(warnings: &[String]) {
    for w in warnings.iter().take(SHOWN_WARNINGS) {
        eprintln!("warning: {w}");
    }
    if warnings.len() > SHOWN_WARNINGS {
        eprintln!(
            "... {} more warnings (all are listed in --format json)",
            warnings.len() - SHOWN_WARNINGS
        );
    }
}

pub fn reliable(a: ReliableArgs) -> Result<Status, UsageError> {
    let seed = require_seed(a.trials, a.seed)?;
    let formula = load_formula(&a.source)?;
    let gates = circuit_gates(a.k, a.compute, a.mu, a.epsilon)?;
    let params = BuildParams {
        width: a.width,
        k: a.k,
        rounds: a.rounds,
        seed,
    };
    let ev = evaluate(&formula, params, gates, a.trials, a.workers, a.margin)?;
    let r = &ev.report;
    match format(&a.output, Format::Csv) {
        Format::Csv => emit(&a.output, "reliable.csv", &r.to_csv())?,
        Format::Json => emit_json(
            &a.output,
            "reliable.json",
            &json!({
                "formula": formula.to_string(),
                "width": a.width,
                "k": a.k,
                "rounds": a.rounds,
                "trials": a.trials,
                "seed": a.seed,
                "margin": a.margin,
                "delta": r.delta,
                "delta_upper": r.delta_upper,
                "reliable": ev.reliable,
                "agree": r.all_agree(),
                "warnings": ev.warnings,
                "rows": r.rows,
            }),
        )?,
    }
    print_warnings(&ev.warnings);
    eprintln!(
        "delta = {}{}; {}",
        sig9(r.delta),
        r.delta_upper
            .map_or(String::new(), |u| format!(", upper bound {}", sig9(u))),
        if ev.reliable { "reliable" } else { "not certified" }
    );
    Ok(if ev.reliable { Status::Ok } else { Status::Failed })
}

pub fn sweep(a: SweepArgs) -> Result<Status, UsageError> {
    let seed = require_seed(a.trials, a.seed)?;
    let formula = load_formula(&a.source)?;
    let epsilons: Vec<Option<f64>> = if a.epsilon.is_empty() {
        vec![None]
    } else {
        a.epsilon.iter().copied().map(Some).collect()
    };
    let mut csv = String::from("width,k,rounds,compute,restore_epsilon,delta,delta_upper,reliable,warnings\n");
    let mut rows = Vec::new();
    for &width in &a.width {
        for &k in &a.k {
            for &rounds in &a.rounds {
                for &compute in &a.compute {
                    for &eps in &epsilons {
                        let gates = circuit_gates(k, compute, None, eps)?;
                        let params = BuildParams { width, k, rounds, seed };
                        let ev = evaluate(&formula, params, gates, a.trials, a.workers, a.margin)?;
                        let compute_name = match compute {
                            ComputeResource::Chsh => "chsh",
                            ComputeResource::Noncontextual => "noncontextual",
                        };
                        let eps_text = eps.map_or("chsh".to_string(), sig9);
                        let upper = ev.report.delta_upper.map_or(String::new(), sig9);
                        csv.push_str(&format!(
                            "{width},{k},{rounds},{compute_name},{eps_text},{},{upper},{},{}\n",
                            sig9(ev.report.delta),
                            ev.reliable,
                            ev.warnings.len()
                        ));
                        rows.push(json!({
                            "width": width, "k": k, "rounds": rounds, "compute": compute_name,
                            "restore_epsilon": eps, "delta": ev.report.delta,
                            "delta_upper": ev.report.delta_upper, "reliable": ev.reliable,
                            "warnings": ev.warnings,
                        }));
                    }
                }
            }
        }
    }
    match format(&a.output, Format::Csv) {
        Format::Csv => emit(&a.output, "sweep.csv", &csv)?,
        Format::Json => emit_json(
            &a.output,
            "sweep.json",
            &json!({"formula": formula.to_string(), "rows": rows}),
        )?,
    }
    Ok(Status::Ok)
}

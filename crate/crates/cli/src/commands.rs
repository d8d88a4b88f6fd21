//! The four subcommands. Each returns its verdicts as JSON plus a pass flag;
//! [`run`] writes the summary and maps the outcome to an exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rankone::entropy::{BadMode, WindowSpec};
use rankone::scan::{directional_scan, m_stability_report, ScanResult};
use rankone::schedule::{error_mass_recursion_holds, validate_schedule_with, DEFAULT_ECCENTRICITY_THRESHOLD};
use rankone::towers::{perturbed_odometer, refine_sequence};
use rankone::{build_model, LevelKModel, Rational};
use serde_json::{json, Value};

use crate::config::{Config, Expectation};
use crate::output::{config_hash, resolve_out, OutDir, Summary};
use crate::{CliError, CommonArgs};

struct Context {
    config: Config,
    base_dir: PathBuf,
    seed: u64,
    out: OutDir,
}

struct Outcome {
    pass: bool,
    verdicts: Value,
    /// Set when some direction produced no feasible row.
    budget_exhausted: bool,
}

pub fn run(command: &str, args: &CommonArgs) -> Result<u8, CliError> {
    let start = Instant::now();
    let bytes = std::fs::read(&args.config).map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let config = Config::parse(&text)?;
    let base_dir = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let hash = config_hash(&bytes, args.seed);
    let out_dir = resolve_out(args.out.as_deref(), config.out_dir.as_deref(), &base_dir);
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let ctx = Context { config, base_dir, seed, out: OutDir::create(out_dir, hash)? };

    let outcome = match command {
        "validate" => validate(&ctx)?,
        "scan" => scan(&ctx)?,
        "bounds" => bounds(&ctx)?,
        "refine" => refine(&ctx)?,
        other => return Err(CliError::Config(format!("unknown command {other}"))),
    };
    let summary = Summary {
        command: command.to_string(),
        config_hash: ctx.out.hash().to_string(),
        verdicts: outcome.verdicts,
        elapsed_ms: start.elapsed().as_millis(),
        pass: outcome.pass && !outcome.budget_exhausted,
    };
    ctx.out.write_json("summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(if outcome.budget_exhausted {
        3
    } else if outcome.pass {
        0
    } else {
        1
    })
}

fn frac(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

fn validate(ctx: &Context) -> Result<Outcome, CliError> {
    let schedule = ctx.config.schedule(&ctx.base_dir)?;
    let threshold = ctx.config.eccentricity_threshold.unwrap_or(DEFAULT_ECCENTRICITY_THRESHOLD);
    let report = validate_schedule_with(&schedule, threshold);
    ctx.out.write_json("validation.json", &report)?;
    ctx.out.write_csv("eccentricity.csv", &report.eccentricity.to_csv())?;

    let mut stages = String::from("stage,q,folner_max_unit_ratio\n");
    for (i, q) in report.coverage.iter().enumerate() {
        let f = report.folner.iter().find(|r| r.stage == i + 1).map_or(String::new(), |r| r.max_unit_ratio.to_string());
        stages.push_str(&format!("{},{},{}\n", i + 1, frac(q), f));
    }
    ctx.out.write_csv("stages.csv", &stages)?;

    if report.valid {
        match build_model(&schedule, schedule.levels(), ctx.config.cell_budget()) {
            Ok(model) => ctx.out.write_csv("model_stats.csv", &model.stats_csv())?,
            Err(e) => eprintln!("model statistics skipped: {e}"),
        }
    } else if let Some(v) = report.violations.first() {
        eprintln!("invalid schedule: stage {}: {:?}: {}", v.stage, v.kind, v.detail);
    }
    let verdicts = json!({
        "valid": report.valid,
        "violations": report.violations,
        "levels": schedule.levels(),
        "error_recursion_holds": report.valid && error_mass_recursion_holds(&report),
        "folner_decreasing": report.folner_decreasing,
        "eccentricity_max": report.eccentricity.max_ratio(),
        "eccentricity_bounded": report.eccentricity.verdict,
    });
    Ok(Outcome { pass: report.valid, verdicts, budget_exhausted: false })
}

fn model_for(ctx: &Context) -> Result<(LevelKModel, usize, usize), CliError> {
    let schedule = ctx.config.schedule(&ctx.base_dir)?;
    let (k_top, first, last) = ctx.config.levels(schedule.levels())?;
    let mut model = build_model(&schedule, k_top, ctx.config.cell_budget()).map_err(CliError::from_setup)?;
    if let Some((j, factor)) = ctx.config.test_hooks.corrupt_copies {
        if j == 0 || j > k_top {
            return Err(CliError::Config(format!("corrupt_copies level {j} outside 1..={k_top}")));
        }
        model.corrupt_copies(j, factor);
    }
    Ok((model, first, last))
}

fn run_scans(
    ctx: &Context,
    model: &LevelKModel,
    specs: &[WindowSpec],
    range: (usize, usize),
    mode: BadMode,
    check_tail: bool,
) -> Result<Vec<ScanResult>, CliError> {
    let ms = ctx.config.m_values()?;
    let opts = ctx.config.scan_options(mode, check_tail);
    let id = ctx.config.schedule_id();
    specs
        .iter()
        .map(|spec| {
            directional_scan(model, &id, ctx.config.k, spec, &ms, range.0..=range.1, ctx.config.variant, &opts)
                .map_err(CliError::from_run)
        })
        .collect()
}

fn slug(label: &str) -> String {
    label.replace(' ', "_").replace('|', "+").replace('-', "m")
}

fn scan(ctx: &Context) -> Result<Outcome, CliError> {
    let (model, first, last) = model_for(ctx)?;
    let specs = ctx.config.window_specs(model.dim())?;
    let results = run_scans(ctx, &model, &specs, (first, last), ctx.config.mode, ctx.config.check_tail)?;
    let mut verdicts = Vec::new();
    let mut pass = true;
    let mut exhausted = false;
    for r in &results {
        let name = format!("scan_{}.csv", slug(&r.direction));
        ctx.out.write_csv(&name, &r.to_csv(true))?;
        let feasible = r.feasible_rows();
        exhausted |= feasible == 0;
        let decays = feasible > 0 && r.all_decay();
        let ok = r.all_checks_hold()
            && match ctx.config.expect {
                Expectation::Decay => decays,
                Expectation::NoDecay => feasible > 0 && !decays,
            };
        pass &= ok;
        let stability = m_stability_report(r).ok();
        if let Some(s) = &stability {
            ctx.out.write_json(&format!("m_stability_{}.json", slug(&r.direction)), s)?;
        }
        verdicts.push(json!({
            "direction": r.direction,
            "n": r.n,
            "feasible_rows": feasible,
            "skipped_rows": r.rows.len() - feasible,
            "decays": decays,
            "checks_hold": r.all_checks_hold(),
            "expect": match ctx.config.expect { Expectation::Decay => "decay", Expectation::NoDecay => "no_decay" },
            "pass": ok,
            "ratios": r.verdicts.iter().map(|v| json!({
                "m": frac(&v.m), "first_j": v.first_j, "last_j": v.last_j, "first": v.first, "last": v.last,
                "ratio": v.ratio, "strictly_decreasing": v.strictly_decreasing,
                "summands_non_increasing": v.summands_non_increasing,
            })).collect::<Vec<_>>(),
            "m_spread_top_j": stability.as_ref().and_then(|s| s.top_spread),
        }));
    }
    ctx.out.write_json("scan.json", &results)?;
    Ok(Outcome { pass, verdicts: json!({ "directions": verdicts }), budget_exhausted: exhausted })
}

const BOUNDS_HEADER: &str = "mode,direction,j,m,E_mass,Y_mass,good_part,good_rhs,good_holds,tail_entropy,bad_rhs,tail_holds,y_bound,y_bound_holds,lower,upper,ok";

fn bounds(ctx: &Context) -> Result<Outcome, CliError> {
    let (model, first, last) = model_for(ctx)?;
    let specs = ctx.config.window_specs(model.dim())?;
    let consistency = model.consistency_violations();
    for v in &consistency {
        eprintln!("model inconsistency: {v}");
    }
    let modes = ctx.config.modes.clone().unwrap_or_else(|| vec![BadMode::Strict, BadMode::Paper]);
    let mut csv = format!("{BOUNDS_HEADER}\n");
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let mut exhausted = false;
    for mode in modes {
        let mode_name = match mode {
            BadMode::Strict => "strict",
            BadMode::Paper => "paper",
        };
        for r in run_scans(ctx, &model, &specs, (first, last), mode, true)? {
            exhausted |= r.feasible_rows() == 0;
            for row in &r.rows {
                let Some(b) = &row.bracket else { continue };
                let in_range = |q: &Rational| *q >= Rational::from_integer(0) && *q <= Rational::from_integer(1);
                let ok = row.checks_hold() && in_range(&b.bad_mass) && in_range(&b.e_mass);
                checked += 1;
                if !ok {
                    failures.push(json!({ "mode": mode_name, "direction": r.direction, "j": row.j, "m": frac(&row.m) }));
                }
                let tail = b.bad_tail.as_ref();
                csv.push_str(&format!(
                    "{mode_name},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.direction,
                    row.j,
                    frac(&row.m),
                    frac(&b.e_mass),
                    frac(&b.bad_mass),
                    b.good_part,
                    b.good_rhs,
                    b.good_lemma_holds,
                    tail.map_or(String::new(), |t| t.tail_entropy.to_string()),
                    b.bad_rhs,
                    tail.map_or(String::new(), |t| t.holds.to_string()),
                    row.y_bound.map_or(String::new(), |y| y.to_string()),
                    row.y_bound_holds.map_or(String::new(), |h| h.to_string()),
                    b.lower,
                    b.upper,
                    ok
                ));
            }
        }
    }
    ctx.out.write_csv("bounds.csv", &csv)?;
    if let Some(f) = failures.first() {
        eprintln!("bound violated: {f}");
    }
    let pass = consistency.is_empty() && failures.is_empty() && checked > 0;
    let verdicts = json!({
        "rows_checked": checked,
        "violations": failures,
        "model_consistency": consistency,
    });
    Ok(Outcome { pass, verdicts, budget_exhausted: exhausted })
}

fn refine(ctx: &Context) -> Result<Outcome, CliError> {
    let rc = ctx.config.refine.as_ref().ok_or_else(|| CliError::Config("refine section missing".into()))?;
    let deltas = rc.delta_schedule()?;
    let odo = perturbed_odometer(rc.top, &rc.levels, &deltas, rc.swaps.as_deref(), ctx.seed).map_err(CliError::from_setup)?;
    let trace = match refine_sequence(&odo.towers, &deltas, rc.depth) {
        Ok(t) => t,
        Err(e @ rankone::Error::Refinement { .. }) => {
            eprintln!("refinement failed: {e}");
            let verdicts = json!({ "swaps": odo.swaps, "seed": ctx.seed, "error": e.to_string() });
            return Ok(Outcome { pass: false, verdicts, budget_exhausted: false });
        }
        Err(e) => return Err(CliError::from_run(e)),
    };
    ctx.out.write_csv("refine_steps.csv", &trace.to_csv())?;
    let mut hyp = String::from("k,distance,delta\n");
    for h in &trace.hypotheses {
        hyp.push_str(&format!("{},{},{}\n", h.k, frac(&h.distance), frac(&h.delta)));
    }
    ctx.out.write_csv("hypotheses.csv", &hyp)?;
    let mut cauchy = String::from("k,ell,m,distance,bound,tight_bound,holds\n");
    for c in &trace.cauchy {
        cauchy.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.k,
            c.ell,
            c.m,
            frac(&c.distance),
            frac(&c.bound),
            frac(&c.tight_bound),
            c.holds
        ));
    }
    ctx.out.write_csv("cauchy.csv", &cauchy)?;
    let violations = trace.violations();
    if let Some(c) = trace.cauchy.iter().find(|c| !c.holds) {
        eprintln!("Cauchy bound violated at (k, ell, m) = ({}, {}, {})", c.k, c.ell, c.m);
    }
    let verdicts = json!({
        "seed": ctx.seed,
        "swaps": odo.swaps,
        "hypotheses": trace.hypotheses.len(),
        "cauchy_checks": trace.cauchy.len(),
        "violations": violations,
    });
    Ok(Outcome { pass: violations == 0, verdicts, budget_exhausted: false })
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use revkit::logic::{formula_of, models, parse_formula, ModelSet};
use revkit::modeltheory::{
    ef_game_with_cap, hanf_check, recognize, swap_construction, to_colored_graph, verify_crown_split, Crown, CrownSpec,
    Family, GameParameters, ModelTheoryError, Winner,
};
use revkit::mso::{
    check_translation_agreement, eval_fo, eval_umso, find_sets, parse_fo, parse_umso, translate, umso_of,
    ExtendedStructure, FoSentence,
};
use revkit::order::{ElementSet, OrderError, OrderJson, PartialPreorder};
use revkit::postulate::{resolve, satisfies, SearchMode, EXHAUSTIVE_LOG2_LIMIT};
use revkit::revision::{is_representable, operator_table, reconstruct_order, Representation, Reviser, RevisionError};
use revkit::selftest;

use crate::input::*;
use crate::{Cli, Command, Outcome};

type Result<T> = std::result::Result<T, CliError>;

fn set_json(s: &ModelSet) -> Value {
    json!(s.to_vec())
}

fn elements_json(s: &ElementSet) -> Value {
    json!(s.ones().collect::<Vec<_>>())
}

fn order_result(order: &PartialPreorder, dot: bool) -> Value {
    let mut v = json!({ "order": order.to_json() });
    if dot {
        v["dot"] = json!(order.comparability_graph().to_dot());
    }
    v
}

fn push_dot(summary: &mut Vec<String>, result: &Value) {
    if let Some(dot) = result.get("dot").and_then(Value::as_str) {
        summary.push(dot.trim_end().to_string());
    }
}

fn game_parameters(q: usize, ell: usize) -> Value {
    let p = GameParameters::new(q, ell);
    json!({ "q": p.q, "r": p.r, "ell": p.ell, "T": p.t.to_string(), "bound": p.bound().to_string() })
}

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let dot = cli.dot;
    match &cli.command {
        Command::Models { n, formula } => {
            let phi = parse_formula(formula, *n)?;
            let set = models(&phi, *n);
            Ok(
                Outcome::new(true, vec![set.to_string()], json!({ "n": n, "models": set_json(&set) }))
                    .parameters(json!({ "n": n })),
            )
        }
        Command::FormulaOf { n, set } => {
            let bits = parse_int_list(set)?;
            let set = ModelSet::from_assignments(*n, bits.into_iter().map(|b| b as u32))?;
            let f = formula_of(&set).to_string();
            Ok(Outcome::new(true, vec![f.clone()], json!({ "n": n, "formula": f })).parameters(json!({ "n": n })))
        }
        Command::ValidateOrder { order, close } => validate_order(order, *close, dot),
        Command::Regular { order } => {
            let r = load_order(order)?;
            let regular = r.is_regular();
            let disconnected = r.is_regular_disconnected();
            let mut result = order_result(&r, dot);
            result["regular"] = json!(regular);
            result["regular_disconnected"] = json!(disconnected);
            result["minimal"] = elements_json(&r.minimal());
            let mut summary = vec![
                format!("regular: {regular}"),
                format!("regular-disconnected: {disconnected}"),
            ];
            push_dot(&mut summary, &result);
            Ok(Outcome::new(regular, summary, result))
        }
        Command::Revise { structure, phi } => {
            let f = load_structure_args(structure)?;
            let n = f.vars();
            let phi = parse_model_set(phi, n)?;
            let out = f.revise(&phi);
            Ok(Outcome::new(
                true,
                vec![
                    format!("K = {}", f.kb()),
                    format!("K * {phi} = {out}"),
                    format!("formula: {}", formula_of(&out)),
                ],
                json!({
                    "kb": set_json(f.kb()),
                    "phi": set_json(&phi),
                    "result": set_json(&out),
                    "formula": formula_of(&out).to_string(),
                }),
            )
            .parameters(json!({ "n": n })))
        }
        Command::Table { structure } => {
            let f = load_structure_args(structure)?;
            let table = operator_table(&f)?;
            let json = serde_json::to_value(table.to_json())?;
            Ok(Outcome::new(true, vec![serde_json::to_string(&json)?], json).parameters(json!({ "n": f.vars() })))
        }
        Command::Reconstruct { operator, verify } => {
            let op = load_operator(operator)?;
            let verification = verification(verify)?;
            match reconstruct_order(op.reviser(), verification) {
                Ok(order) => {
                    let result = order_result(&order, dot);
                    let mut summary = vec![serde_json::to_string(&order.to_json())?];
                    push_dot(&mut summary, &result);
                    Ok(Outcome::new(true, summary, result))
                }
                Err(revkit::revision::ReconstructError::TooLarge(n)) => {
                    Err(CliError::Cap(RevisionError::TableTooLarge(n).to_string()))
                }
                Err(e) => Ok(Outcome::new(
                    false,
                    vec![e.to_string()],
                    json!({ "error": e.to_string() }),
                )),
            }
        }
        Command::Representable {
            operator,
            verify,
            family,
        } => {
            let family =
                Family::from_name(family).ok_or_else(|| CliError::Usage(format!("unknown family `{family}`")))?;
            let op = load_operator(operator)?;
            let verification = verification(verify)?;
            let outcome = is_representable(op.reviser(), &|r| family.contains(r), verification)?;
            let (pass, line, result) = match &outcome {
                Representation::Representable(f) => (
                    true,
                    format!("representable in {family}"),
                    json!({ "representable": true, "order": f.order().to_json(), "kb": set_json(f.kb()) }),
                ),
                Representation::NotInFamily(r) => (
                    false,
                    format!("the unique candidate order is not in {family}"),
                    json!({ "representable": false, "reason": "not-in-family", "order": r.to_json() }),
                ),
                Representation::NotRegular(r) => (
                    false,
                    "the unique candidate order is not regular".to_string(),
                    json!({ "representable": false, "reason": "not-regular", "order": r.to_json() }),
                ),
                Representation::NotMinimization(e) => (
                    false,
                    format!("not a minimization operator: {e}"),
                    json!({ "representable": false, "reason": "not-minimization", "detail": e.to_string() }),
                ),
            };
            Ok(Outcome::new(pass, vec![line], result))
        }
        Command::CheckPostulate {
            operator,
            n,
            postulate,
            search,
        } => {
            let op = load_operator(operator)?;
            let vars = op.reviser().vars();
            if let Some(n) = n {
                if *n != vars {
                    return Err(CliError::Input(format!(
                        "--n {n} but the operator is over {vars} variables"
                    )));
                }
            }
            let p = resolve(postulate)?;
            let mode = search_mode(search)?;
            let verdict = satisfies(op.reviser(), op.kb(), &p, mode)?;
            let witness = verdict
                .counterexample
                .as_ref()
                .map(|phis| json!(phis.iter().map(set_json).collect::<Vec<_>>()));
            let mut summary = vec![
                format!("postulate: {p}"),
                format!("{} tuples checked", verdict.checked),
                format!("holds: {}", verdict.holds),
            ];
            if let Some(phis) = &verdict.counterexample {
                let phis: Vec<String> = phis.iter().map(ToString::to_string).collect();
                summary.push(format!("counterexample: ({})", phis.join(", ")));
            }
            Ok(Outcome::new(
                verdict.holds,
                summary,
                json!({ "postulate": p.to_string(), "holds": verdict.holds, "checked": verdict.checked, "kb": set_json(op.kb()) }),
            )
            .witness(witness)
            .parameters(json!({ "n": vars, "ell": p.ell(), "mode": mode_name(mode) })))
        }
        Command::Translate { postulate, umso } => {
            let p = resolve(postulate)?;
            let text = if *umso {
                umso_of(&p).to_string()
            } else {
                translate(&p).to_string()
            };
            Ok(Outcome::new(
                true,
                vec![text.clone()],
                json!({ "postulate": p.to_string(), "translation": text }),
            )
            .parameters(json!({ "ell": p.ell() })))
        }
        Command::EvalMso {
            order,
            sentence,
            sets,
            exists,
            search,
        } => eval_mso(order, sentence, sets.as_deref(), *exists, search),
        Command::VerifyProp1 {
            structure,
            postulate,
            phis,
            search,
        } => {
            let f = load_structure_args(structure)?;
            let p = resolve(postulate)?;
            let n = f.vars();
            if let Some(text) = phis {
                let phis = parse_model_sets(text, n)?;
                let agree = check_translation_agreement(&f, &p, &phis)?;
                return Ok(Outcome::new(
                    agree,
                    vec![format!("agree: {agree}")],
                    json!({ "agree": agree, "checked": 1 }),
                )
                .parameters(json!({ "n": n, "ell": p.ell() })));
            }
            let universe = 1usize << n;
            let tuples: Vec<Vec<ModelSet>> = match search_mode(search)? {
                SearchMode::Exhaustive => {
                    let log2 = universe * p.ell();
                    if log2 > EXHAUSTIVE_LOG2_LIMIT as usize {
                        return Err(CliError::Cap(format!(
                            "exhaustive search needs 2^{log2} tuples (limit 2^{EXHAUSTIVE_LOG2_LIMIT}); use sampling"
                        )));
                    }
                    (0..1u64 << log2)
                        .map(|i| {
                            (0..p.ell())
                                .map(|j| {
                                    let shift = universe * (p.ell() - 1 - j);
                                    let mask = if universe == 64 {
                                        u64::MAX
                                    } else {
                                        (1u64 << universe) - 1
                                    };
                                    ModelSet::from_mask(n, (i >> shift) & mask)
                                })
                                .collect()
                        })
                        .collect()
                }
                SearchMode::Sample { count, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..count)
                        .map(|_| (0..p.ell()).map(|_| ModelSet::random(n, &mut rng)).collect())
                        .collect()
                }
            };
            use rayon::prelude::*;
            let checks: Vec<bool> = tuples
                .par_iter()
                .map(|phis| check_translation_agreement(&f, &p, phis))
                .collect::<std::result::Result<_, _>>()?;
            let first = checks.iter().position(|ok| !ok);
            let witness = first.map(|i| json!(tuples[i].iter().map(set_json).collect::<Vec<_>>()));
            Ok(Outcome::new(
                first.is_none(),
                vec![format!(
                    "{} tuples, {} disagreements",
                    tuples.len(),
                    checks.iter().filter(|ok| !**ok).count()
                )],
                json!({ "agree": first.is_none(), "checked": tuples.len() }),
            )
            .witness(witness)
            .parameters(json!({ "n": n, "ell": p.ell() })))
        }
        Command::Crown {
            s,
            s2,
            bottoms,
            graph,
            recognize: path,
        } => match path {
            Some(path) => {
                let r = load_order(path)?;
                let crown = recognize(&r);
                let families: Vec<&str> = Family::ALL
                    .iter()
                    .filter(|f| f.contains(&r))
                    .map(|f| f.name())
                    .collect();
                let line = match &crown {
                    Some(c) => format!("{}", c.spec()),
                    None => "not an extended crown or double crown".into(),
                };
                Ok(Outcome::new(
                    crown.is_some(),
                    vec![line, format!("families: [{}]", families.join(", "))],
                    json!({ "spec": crown.map(|c| c.spec()), "families": families }),
                ))
            }
            None => {
                let s = s.expect("required by clap");
                let spec = match s2 {
                    Some(s2) => CrownSpec::double(s, *s2, *bottoms),
                    None => CrownSpec::single(s, *bottoms),
                };
                let crown = Crown::build(spec)?;
                let order = crown.order();
                let mut result = if *graph {
                    let g = to_colored_graph(&crown);
                    let mut v = json!({ "graph": g.to_json() });
                    if dot {
                        v["dot"] = json!(g.gaifman_graph().to_dot());
                    }
                    v
                } else {
                    order_result(order, dot)
                };
                result["spec"] = json!(spec);
                result["regular"] = json!(order.is_regular());
                result["regular_disconnected"] = json!(order.is_regular_disconnected());
                let body = if *graph { &result["graph"] } else { &result["order"] };
                let mut summary = vec![
                    format!(
                        "{spec}: {} elements, regular: {}, regular-disconnected: {}",
                        spec.total(),
                        order.is_regular(),
                        order.is_regular_disconnected()
                    ),
                    serde_json::to_string(body)?,
                ];
                push_dot(&mut summary, &result);
                Ok(Outcome::new(true, summary, result))
            }
        },
        Command::Ef {
            left,
            right,
            q,
            max_size,
        } => {
            let a = load_structure(left)?;
            let b = load_structure(right)?;
            let out = ef_game_with_cap(&a, &b, *q, *max_size)?;
            let mut summary = vec![format!("{} wins the {q}-round game", out.winner)];
            for (i, round) in out.trace.iter().enumerate() {
                let answer = round
                    .duplicator
                    .map_or("no legal answer".to_string(), |d| d.to_string());
                summary.push(format!(
                    "round {}: Spoiler picks {} in {:?}, Duplicator answers {answer}",
                    i + 1,
                    round.spoiler,
                    round.side
                ));
            }
            let spoiler = out.winner == Winner::Spoiler;
            Ok(
                Outcome::new(!spoiler, summary, json!({ "winner": out.winner, "rounds": q }))
                    .witness(spoiler.then(|| json!(out.trace)))
                    .parameters(json!({ "q": q, "r": GameParameters::new(*q, 0).r })),
            )
        }
        Command::Hanf { left, right, r, q } => {
            let a = load_structure(left)?;
            let b = load_structure(right)?;
            let r = match (r, q) {
                (Some(r), _) => *r,
                (None, Some(q)) => GameParameters::new(*q, 0).r,
                (None, None) => return Err(CliError::Usage("one of --r or --q is required".into())),
            };
            let f = hanf_check(&a, &b, r)?;
            let line = match &f {
                Some(_) => format!("type-preserving bijection found at r = {r}"),
                None => format!("neighborhood-type multisets differ at r = {r}"),
            };
            Ok(Outcome::new(f.is_some(), vec![line], json!({ "bijection": f })).parameters(json!({ "r": r })))
        }
        Command::Swap { graph, q, ell } => {
            let c1 = load_structure(graph)?;
            match swap_construction(&c1, *q, *ell) {
                Ok(report) => {
                    let mut result = serde_json::to_value(&report)?;
                    result["graph"] = serde_json::to_value(report.result.to_json())?;
                    if dot {
                        result["dot"] = json!(report.result.gaifman_graph().to_dot());
                    }
                    let mut summary = vec![
                        format!(
                            "swapped {}-{} and {}-{} for {}-{} and {}-{}",
                            report.a,
                            report.a_succ,
                            report.b,
                            report.b_succ,
                            report.a,
                            report.b_succ,
                            report.b,
                            report.a_succ
                        ),
                        format!("cycle lengths: {:?}", report.cycle_lengths),
                        format!("input reaches the length bound: {}", report.above_bound),
                        serde_json::to_string(&result["graph"])?,
                    ];
                    push_dot(&mut summary, &result);
                    Ok(Outcome::new(true, summary, result).parameters(game_parameters(*q, *ell)))
                }
                Err(ModelTheoryError::NoQualifyingPair) => Ok(Outcome::new(
                    false,
                    vec![ModelTheoryError::NoQualifyingPair.to_string()],
                    json!({ "swapped": false }),
                )
                .parameters(game_parameters(*q, *ell))),
                Err(e) => Err(e.into()),
            }
        }
        Command::VerifyLemma5 {
            s,
            bottoms,
            q,
            ell,
            extension,
            seed,
        } => {
            let m1 = Crown::build(CrownSpec::single(*s, *bottoms))?;
            let size = m1.order().size();
            let sets: Vec<ElementSet> = match (extension, seed) {
                (Some(text), _) => {
                    let lists: Vec<Vec<usize>> = serde_json::from_str(text)?;
                    let joined: Vec<String> = lists
                        .iter()
                        .map(|l| l.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
                        .collect();
                    if lists.is_empty() {
                        Vec::new()
                    } else {
                        parse_element_sets(&joined.join(";"), size)?
                    }
                }
                (None, Some(seed)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    (0..*ell)
                        .map(|_| {
                            let mut set = ElementSet::with_capacity(size);
                            for a in 0..size {
                                set.set(a, rng.gen_bool(0.5));
                            }
                            set
                        })
                        .collect()
                }
                (None, None) => return Err(CliError::Usage("one of --extension or --seed is required".into())),
            };
            let report = verify_crown_split(&m1, *q, *ell, &sets)?;
            let mut result = serde_json::to_value(&report)?;
            result["result_order"] = serde_json::to_value(report.result.to_json())?;
            let spec = report
                .result_spec
                .map_or("not a crown family member".to_string(), |s| s.to_string());
            let summary = vec![
                format!("cycle of length {} split into {spec}", report.cycle_length),
                format!(
                    "same size: {}, regular-disconnected: {}",
                    report.same_size, report.regular_disconnected
                ),
                format!("cycle neighborhood types match: {}", report.cycle_types_match),
                format!("{} wins the {q}-round game on the extended graphs", report.winner),
            ];
            Ok(Outcome::new(report.holds, summary, result).parameters(game_parameters(*q, *ell)))
        }
        Command::Selftest { criterion } => {
            let outcomes = if criterion.is_empty() {
                selftest::run_all()
            } else {
                criterion
                    .iter()
                    .map(|&id| selftest::run(id).ok_or_else(|| CliError::Usage(format!("no criterion {id}"))))
                    .collect::<Result<Vec<_>>>()?
            };
            let pass = outcomes.iter().all(|o| o.passed);
            Ok(Outcome::new(
                pass,
                outcomes.iter().map(|o| o.line()).collect(),
                json!({ "criteria": outcomes }),
            ))
        }
    }
}

fn mode_name(mode: SearchMode) -> Value {
    match mode {
        SearchMode::Exhaustive => json!("exhaustive"),
        SearchMode::Sample { count, seed } => json!({ "samples": count, "seed": seed }),
    }
}

fn validate_order(path: &str, close: bool, dot: bool) -> Result<Outcome> {
    let text = read_file(path)?;
    let json: OrderJson = serde_json::from_str(&text)?;
    let pairs = json.leq.iter().map(|&[a, b]| (a, b));
    let built = if close {
        PartialPreorder::closure(json.size, pairs)
    } else {
        PartialPreorder::from_pairs(json.size, pairs)
    };
    match built {
        Ok(r) => {
            let partial = r.is_partial_order();
            let mut result = order_result(&r, dot);
            result["partial_order"] = json!(partial);
            result["minimal"] = elements_json(&r.minimal());
            let mut summary = vec![
                format!("valid preorder on {} elements", r.size()),
                format!("partial order: {partial}"),
            ];
            if close {
                summary.push(serde_json::to_string(&r.to_json())?);
            }
            push_dot(&mut summary, &result);
            Ok(Outcome::new(true, summary, result))
        }
        Err(e @ OrderError::NotTransitive { .. }) => Ok(Outcome::new(
            false,
            vec![e.to_string()],
            json!({ "error": e.to_string() }),
        )),
        Err(e) => Err(e.into()),
    }
}

fn eval_mso(
    path: &str,
    sentence: &str,
    sets: Option<&str>,
    exists: bool,
    search: &crate::SearchArgs,
) -> Result<Outcome> {
    let order = load_order(path)?;
    let mode = search_mode(search)?;
    let size = order.size();
    let sets_json = |sets: &[ElementSet]| json!(sets.iter().map(elements_json).collect::<Vec<_>>());
    if sentence.trim_start().starts_with("forallsets") {
        let phi = parse_umso(sentence)?;
        if exists {
            let found = find_sets(&order, &phi, mode)?;
            let line = match &found {
                Some(s) => format!("satisfying sets: {}", sets_json(s)),
                None => "no sets make the body true".to_string(),
            };
            return Ok(
                Outcome::new(found.is_some(), vec![line], json!({ "found": found.is_some() }))
                    .witness(found.as_deref().map(sets_json))
                    .parameters(json!({ "ell": phi.ell(), "mode": mode_name(mode) })),
            );
        }
        let verdict = eval_umso(&order, &phi, mode)?;
        let mut summary = vec![
            format!("{} tuples checked", verdict.checked),
            format!("holds: {}", verdict.holds),
        ];
        if let Some(w) = &verdict.counterexample {
            summary.push(format!("falsifying sets: {}", sets_json(w)));
        }
        Ok(Outcome::new(
            verdict.holds,
            summary,
            json!({ "holds": verdict.holds, "checked": verdict.checked }),
        )
        .witness(verdict.counterexample.as_deref().map(sets_json))
        .parameters(json!({ "ell": phi.ell(), "mode": mode_name(mode) })))
    } else {
        if exists {
            return Err(CliError::Usage("--exists needs a `forallsets` sentence".into()));
        }
        let formula = parse_fo(sentence)?;
        let psi = FoSentence::from_formula(&formula)?;
        let sets = match sets {
            Some(text) => parse_element_sets(text, size)?,
            None => Vec::new(),
        };
        let holds = eval_fo(&ExtendedStructure::new(order, sets)?, &psi)?;
        Ok(Outcome::new(
            holds,
            vec![format!("holds: {holds}")],
            json!({ "holds": holds }),
        ))
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, CommandFactory};
use rand::Rng;

use sos_core::coupling::{coalescence_csv, exact_pair_drift, CoupledPair};
use sos_core::dynamics::{run_chain, ChainKind, RecordOptions, Statistic};
use sos_core::equilibrium::{
    event_prob_with, events_csv, truncation_cap, Conditioning, Event, Restriction, TransferTables,
};
use sos_core::exact::{
    check_matrix, enumerate, ordered_parallel_matrix, point_mass, spectral_gap_exact,
    stationary_csv, transition_matrix, tv_csv, tv_curve,
};
use sos_core::experiments::{
    coalescence_replicas, column_walk_check, descent_profile, doubling_schedule, relaxation_sweep,
    scaling_sweep, BandStatistic, ParamsTemplate, RelaxStart,
};
use sos_core::rng::stream;
use sos_core::wilson::{gap_upper_bound, GapMode, WilsonWeights};
use sos_core::{Contour, ModelParams, SosError};

use crate::{Cli, Command, Failure, Model, Report};

type Outcome = Result<Report, Failure>;

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

/// `# config: command=<name> key=value ...` over every argument of the
/// subcommand in definition order, defaults included. Thread count and
/// output location are left out: they do not affect the numbers.
pub fn config_row(name: &str, sub: &ArgMatches) -> String {
    let cmd = Cli::command();
    let mut row = format!("# config: command={name}");
    if let Some(sc) = cmd.find_subcommand(name) {
        for arg in sc.get_arguments() {
            let id = arg.get_id().as_str();
            if matches!(id, "threads" | "output" | "help" | "version") {
                continue;
            }
            if let Ok(Some(values)) = sub.try_get_raw(id) {
                let vs: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
                row.push_str(&format!(" {id}={}", vs.join(",")));
            }
        }
    }
    row
}

fn resolve_output(command: &str, output: Option<&Path>) -> Option<PathBuf> {
    let dir = std::env::var_os("SOS_OUTPUT_DIR").map(PathBuf::from);
    match (output, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => Some(d.join(format!("{command}.csv"))),
        (None, None) => None,
    }
}

pub fn write_output(
    command: &str,
    output: Option<&Path>,
    header: &str,
    csv: &str,
) -> Result<(), Failure> {
    let text = format!("{header}\n{csv}");
    match resolve_output(command, output) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .map_err(|e| Failure::Io(format!("{}: {e}", parent.display())))?;
            }
            fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn params_at(model: &Model, n: usize) -> Result<ModelParams, Failure> {
    let mut p = ModelParams::new(n, model.beta)?;
    if let Some(c) = model.cap {
        p = p.with_cap(c)?;
    }
    if model.unbounded {
        p = p.unbounded();
    }
    Ok(p.with_boundaries(model.left, model.right)?)
}

fn single_n(model: &Model) -> Result<usize, Failure> {
    match model.n.as_slice() {
        [n] => Ok(*n),
        [] => Err(config_err("--n is required")),
        _ => Err(config_err("this command takes a single --n")),
    }
}

fn single_params(model: &Model) -> Result<ModelParams, Failure> {
    params_at(model, single_n(model)?)
}

/// Sweeps build parameters from beta and cap alone.
fn template(model: &Model) -> Result<ParamsTemplate, Failure> {
    if model.unbounded || model.left != 0 || model.right != 0 {
        return Err(config_err(
            "sweeps use zero boundaries and a bounded height cap",
        ));
    }
    if model.n.is_empty() {
        return Err(config_err("--n is required"));
    }
    Ok(ParamsTemplate {
        beta: model.beta,
        cap: model.cap,
    })
}

fn kind(s: &str) -> Result<ChainKind, Failure> {
    s.parse::<ChainKind>().map_err(Failure::from)
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, Failure> {
    s.parse()
        .map_err(|_| config_err(format!("invalid {what}: {s}")))
}

fn dominated(timed_out: usize, total: usize) -> bool {
    total > 0 && 2 * timed_out >= total
}

pub fn dispatch(command: &Command) -> Outcome {
    match command {
        Command::Simulate {
            model,
            kind: k,
            steps,
            start,
            statistic,
            stride,
        } => simulate(model, &kind(k)?, *steps, start, statistic, *stride),
        Command::Coalesce {
            model,
            kind: k,
            replicas,
            t_max,
        } => coalesce(model, &kind(k)?, *replicas, *t_max),
        Command::Sweep {
            model,
            kind: k,
            replicas,
            t_max,
        } => {
            let r = scaling_sweep(
                &kind(k)?,
                &model.n,
                *replicas,
                model.seed,
                &template(model)?,
                *t_max,
            )?;
            Ok(Report {
                csv: r.to_csv(),
                timed_out: r.partial,
            })
        }
        Command::DriftCheck { model, pairs } => drift_check(model, *pairs),
        Command::Exact {
            model,
            kind: k,
            report,
            t_max,
        } => exact(model, &kind(k)?, report, *t_max),
        Command::Equilibrium {
            model,
            event,
            samples,
            condition,
        } => equilibrium(model, event, *samples, condition),
        Command::Relax {
            model,
            kind: k,
            start,
            statistic,
            replicas,
            doubling,
            budget,
        } => {
            let k = kind(k)?;
            if *doubling {
                doubling_run(model, &k, *budget)
            } else {
                relax(model, &k, start, statistic, *replicas)
            }
        }
        Command::Descent {
            model,
            kind: k,
            budget,
        } => descent(model, &kind(k)?, *budget),
        Command::ColumnWalk {
            beta,
            seed,
            a,
            b,
            ell,
            replicas,
            budget,
        } => column_walk(*beta, *seed, a, b, ell, *replicas, *budget),
    }
}

fn simulate(
    model: &Model,
    kind: &ChainKind,
    steps: u64,
    start: &str,
    statistics: &[String],
    stride: Option<u64>,
) -> Outcome {
    let params = single_params(model)?;
    let (_, target) = kind.resolve(&params)?;
    // start draws use stream 1 so the chain keeps stream 0
    let mut rng = stream(model.seed, 1);
    let first = match start.split_once(':') {
        None => match start {
            "top" => Contour::top(&target)?,
            "bottom" => Contour::bottom(&target),
            "equilibrium" => Conditioning::None.tables(&target)?.sample(&mut rng),
            _ => return Err(config_err(format!("unknown start {start}"))),
        },
        Some(("at-least", h)) => Conditioning::AtLeast(number(h, "height")?)
            .tables(&target)?
            .sample(&mut rng),
        Some(("pinned", m)) => Conditioning::Pinned(number(m, "spacing")?)
            .tables(&params)?
            .sample(&mut rng),
        Some(("fixed", hs)) => {
            let heights = hs
                .split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| number(s, "height"))
                .collect::<Result<Vec<u32>, _>>()?;
            Contour::from_heights(heights, &target)?
        }
        _ => return Err(config_err(format!("unknown start {start}"))),
    };
    let stats = statistics
        .iter()
        .map(|s| Statistic::parse(s, &first))
        .collect::<Result<Vec<_>, _>>()?;
    let record = RecordOptions {
        statistics: stats,
        stride,
    };
    let summary = run_chain(kind, &first, steps, model.seed, &params, &record)?;
    Ok(Report {
        csv: summary.to_csv(),
        timed_out: false,
    })
}

fn coalesce(model: &Model, kind: &ChainKind, replicas: usize, t_max: Option<u64>) -> Outcome {
    if replicas == 0 {
        return Err(config_err("--replicas must be positive"));
    }
    let params = single_params(model)?;
    let results = coalescence_replicas(kind, &params, replicas, model.seed, t_max)?;
    let timed_out = results.iter().filter(|r| r.timed_out).count();
    let rows: Vec<_> = results
        .into_iter()
        .map(|r| (kind.clone(), params.n(), params.beta(), model.seed, r))
        .collect();
    Ok(Report {
        csv: coalescence_csv(&rows),
        timed_out: dominated(timed_out, replicas),
    })
}

fn drift_check(model: &Model, pairs: usize) -> Outcome {
    if model.n.is_empty() {
        return Err(config_err("--n is required"));
    }
    let mut csv = String::from("n,beta,pairs,violations,max_excess\n");
    for &n in &model.n {
        let params = params_at(model, n)?;
        let cap = params
            .cap()
            .ok_or_else(|| config_err("drift-check draws heights from a bounded range"))?;
        let w = WilsonWeights::new(n);
        let rate = w.lambda() / n as f64;
        let mut rng = stream(model.seed, n as u64);
        let mut violations = 0usize;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let (lo, hi): (Vec<u32>, Vec<u32>) = (0..n)
                .map(|_| {
                    let (x, y) = (rng.gen_range(0..=cap), rng.gen_range(0..=cap));
                    (x.min(y), x.max(y))
                })
                .unzip();
            let d = w.distance_unchecked(&lo, &hi);
            let pair = CoupledPair::new(Contour::new(lo), Contour::new(hi), &params)?;
            let excess = exact_pair_drift(&pair, &params, &w)? + rate * d;
            worst = worst.max(excess);
            if excess > 1e-10 {
                violations += 1;
            }
        }
        csv.push_str(&format!(
            "{n},{},{pairs},{violations},{worst:.6e}\n",
            model.beta
        ));
    }
    Ok(Report {
        csv,
        timed_out: false,
    })
}

fn exact(model: &Model, kind: &ChainKind, report: &str, t_max: usize) -> Outcome {
    let params = single_params(model)?;
    let (base, target) = kind.resolve(&params)?;
    let chain = enumerate(&target)?;
    let csv = match report {
        "stationary" => stationary_csv(&chain),
        "tv" => {
            // the simulated parallel chain applies its two sweeps in order
            let m = match base {
                ChainKind::Parallel(order) => ordered_parallel_matrix(order, &chain)?,
                ref k => transition_matrix(k, &chain)?,
            };
            let start = point_mass(chain.len(), chain.top_index());
            tv_csv(&tv_curve(&m, chain.stationary(), &start, t_max)?)
        }
        "gap" => {
            let gap = spectral_gap_exact(&transition_matrix(&base, &chain)?, chain.stationary())?;
            let bound = match gap_upper_bound(&base, &target, GapMode::Exact) {
                Ok(b) => format!("{b:.17e}"),
                Err(SosError::Degenerate(_)) => String::new(),
                Err(e) => return Err(e.into()),
            };
            format!(
                "kind,n,beta,gap,rayleigh_bound\n{kind},{},{},{gap:.17e},{bound}\n",
                params.n(),
                params.beta()
            )
        }
        "check" => {
            let c = check_matrix(&transition_matrix(&base, &chain)?, chain.stationary());
            format!(
                "kind,states,max_row_sum_error,max_balance_residual,max_stationarity_residual,min_entry\n{kind},{},{:.3e},{:.3e},{:.3e},{:.17e}\n",
                chain.len(),
                c.max_row_sum_error,
                c.max_balance_residual,
                c.max_stationarity_residual,
                c.min_entry
            )
        }
        other => return Err(config_err(format!("unknown report {other}"))),
    };
    Ok(Report {
        csv,
        timed_out: false,
    })
}

fn parse_event(s: &str, n: usize) -> Result<Event, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["A", h] => Ok(Event::AtLeast(number(h, "height")?)),
        ["B", d] => Ok(Event::Gradient(number(d, "gradient")?)),
        ["exceed", l] => Ok(Event::Exceed(number(l, "level")?)),
        ["marginal", i, h] => {
            let i: usize = number(i, "position")?;
            if i == 0 || i > n {
                return Err(config_err(format!("position {i} outside [1, {n}]")));
            }
            Ok(Event::Marginal {
                index: i - 1,
                height: number(h, "height")?,
            })
        }
        _ => Err(config_err(format!("unknown event {s}"))),
    }
}

fn equilibrium(
    model: &Model,
    events: &[String],
    samples: Option<usize>,
    condition: &str,
) -> Outcome {
    let params = single_params(model)?;
    if let Some(k) = samples {
        let cond = match condition.split_once(':') {
            None if condition == "none" => Conditioning::None,
            Some(("at-least", h)) => Conditioning::AtLeast(number(h, "height")?),
            Some(("pinned", m)) => Conditioning::Pinned(number(m, "spacing")?),
            _ => return Err(config_err(format!("unknown conditioning {condition}"))),
        };
        let tables = cond.tables(&params)?;
        let mut rng = stream(model.seed, 0);
        let mut csv = String::from("sample,heights\n");
        for s in 0..k {
            let c = tables.sample(&mut rng);
            let hs: Vec<String> = c.heights().iter().map(|h| h.to_string()).collect();
            csv.push_str(&format!("{s},{}\n", hs.join(" ")));
        }
        return Ok(Report {
            csv,
            timed_out: false,
        });
    }
    let list: Vec<Event> = if events.is_empty() {
        let top = truncation_cap(&params);
        (0..=top)
            .map(Event::AtLeast)
            .chain((1..=top).map(Event::Gradient))
            .collect()
    } else {
        events
            .iter()
            .map(|e| parse_event(e, params.n()))
            .collect::<Result<_, _>>()?
    };
    let full = TransferTables::new(&params, &Restriction::none())?;
    let rows = list
        .into_iter()
        .map(|e| event_prob_with(e, &full).map(|p| (e, p)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report {
        csv: events_csv(&rows),
        timed_out: false,
    })
}

fn relax_start(spec: &str, n: usize) -> Result<RelaxStart, Failure> {
    match spec.split_once(':') {
        None => match spec {
            "top" => Ok(RelaxStart::Top),
            "bottom" => Ok(RelaxStart::Bottom),
            _ => Err(config_err(format!("unknown start {spec}"))),
        },
        Some(("at-least", "sqrt")) => Ok(RelaxStart::AtLeast((n as f64).sqrt().ceil() as u32)),
        Some(("at-least", h)) => Ok(RelaxStart::AtLeast(number(h, "height")?)),
        Some(("pinned", m)) => Ok(RelaxStart::PinnedEquilibrium(number(m, "spacing")?)),
        _ => Err(config_err(format!("unknown start {spec}"))),
    }
}

fn relax(
    model: &Model,
    kind: &ChainKind,
    start: &str,
    statistic: &str,
    replicas: usize,
) -> Outcome {
    if replicas == 0 {
        return Err(config_err("--replicas must be positive"));
    }
    let template = template(model)?;
    let statistic = BandStatistic::parse(statistic)?;
    // validate the start once for every size before any compute
    for &n in &model.n {
        relax_start(start, n)?;
    }
    let r = relaxation_sweep(
        |n| relax_start(start, n).expect("validated above"),
        kind,
        statistic,
        &model.n,
        replicas,
        model.seed,
        &template,
    )?;
    Ok(Report {
        csv: r.to_csv(),
        timed_out: r.partial,
    })
}

fn doubling_run(model: &Model, kind: &ChainKind, budget: Option<u64>) -> Outcome {
    let params = single_params(model)?;
    let stages = doubling_schedule(&params, kind, model.seed, budget)?;
    let mut csv =
        String::from("stage,spacing,hitting_time,timed_out,band_lo,band_hi,start_value\n");
    for (i, s) in stages.iter().enumerate() {
        let spacing = s.spacing.map_or("none".to_string(), |m| m.to_string());
        let r = &s.result;
        csv.push_str(&format!(
            "{i},{spacing},{},{},{},{},{}\n",
            r.hitting_time, r.timed_out, r.band.lo, r.band.hi, r.start_value
        ));
    }
    let timed_out = stages.iter().filter(|s| s.result.timed_out).count();
    Ok(Report {
        csv,
        timed_out: dominated(timed_out, stages.len()),
    })
}

fn descent(model: &Model, kind: &ChainKind, budget: Option<u64>) -> Outcome {
    let params = single_params(model)?;
    let d = descent_profile(&params, kind, model.seed, budget)?;
    let mut csv = String::from("row,t,max_height,mean_height,level\n");
    for (t, max, mean) in &d.series {
        csv.push_str(&format!("series,{t},{max},{mean},\n"));
    }
    for (level, hit) in &d.stage_times {
        let t = hit.map_or(String::new(), |t| t.to_string());
        csv.push_str(&format!("stage,{t},,,{level}\n"));
    }
    let b = &d.band_time;
    let t = if b.timed_out {
        String::new()
    } else {
        b.hitting_time.to_string()
    };
    csv.push_str(&format!("band,{t},,{},\n", b.band.lo));
    Ok(Report {
        csv,
        timed_out: b.timed_out,
    })
}

fn column_walk(
    beta: f64,
    seed: u64,
    a: &[u32],
    b: &[u32],
    ell: &[u32],
    replicas: usize,
    budget: u64,
) -> Outcome {
    let mut csv = String::from("a,b,ell,beta,replicas,steps,timed_out,final_tv\n");
    let mut total = 0;
    let mut timed_out = 0;
    for &a in a {
        for &b in b {
            for &l in ell {
                let r = column_walk_check(a, b, l, beta, replicas, seed, budget)?;
                total += 1;
                timed_out += usize::from(r.timed_out);
                csv.push_str(&format!(
                    "{a},{b},{l},{beta},{replicas},{},{},{:.6}\n",
                    r.steps, r.timed_out, r.final_tv
                ));
            }
        }
    }
    Ok(Report {
        csv,
        timed_out: dominated(timed_out, total),
    })
}

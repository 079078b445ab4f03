use std::collections::BTreeSet;
use std::path::Path;

use mia_llr::bavaria::{fit_prior, offline_mean_shift, NigPrior};
use mia_llr::data::{convert_dataset, load_dataset, write_dataset, AuditDataset, StatisticKind};
use mia_llr::method::{Method, MethodParams};
use mia_llr::metrics::{align, delta_table, diagnose_dataset, evaluate, roc_from, Metrics};
use mia_llr::synth::{generate, SynthConfig};
use mia_llr::{CenteringMode, ScoreVector};

use crate::args::{CompareArgs, DiagnoseArgs, EvalArgs, MethodOpts, ScoreArgs, SimulateArgs};
use crate::output::{fmt_num, write_atomic, write_csv};

type CmdResult<T = ()> = Result<T, String>;

fn err(e: mia_llr::Error) -> String {
    e.to_string()
}

fn load(path: &Path, stat: StatisticKind) -> CmdResult<AuditDataset> {
    load_dataset(path, stat).map_err(|e| format!("{}: {e}", path.display()))
}

fn labels_of(ds: &AuditDataset, path: &Path) -> CmdResult<Vec<bool>> {
    ds.labels()
        .ok_or_else(|| format!("{}: target_member labels are required for evaluation", path.display()))
}

fn reference(opts: &MethodOpts) -> CmdResult<Option<AuditDataset>> {
    let Some(path) = &opts.delta_ref else {
        return Ok(None);
    };
    let ds = load(path, opts.stat)?;
    Ok(Some(convert_dataset(&ds, StatisticKind::LogOdds).map_err(err)?))
}

fn mean_shift(opts: &MethodOpts, reference: Option<&AuditDataset>) -> CmdResult<Option<f64>> {
    if let Some(d) = opts.delta {
        return Ok(Some(d));
    }
    reference
        .map(|r| offline_mean_shift(r).map_err(|e| format!("--delta-ref: {e}")))
        .transpose()
}

/// A method with its parameters resolved against the flags and the data.
struct Plan {
    method: Method,
    params: MethodParams,
    notes: Vec<String>,
}

fn plan(token: &str, opts: &MethodOpts, audit: &AuditDataset) -> CmdResult<Plan> {
    let mut method: Method = token.parse().map_err(err)?;
    method = match method {
        Method::Base1(_) => Method::Base1(opts.centering.into()),
        Method::Lira(_) => Method::Lira(opts.variance_mode()),
        Method::LiraOffline(_) => Method::LiraOffline(opts.offline_form.into()),
        m => m,
    };
    let reference = reference(opts)?;
    let mut notes = Vec::new();
    let mut params = MethodParams {
        lambda: opts.lambda,
        alpha: opts.alpha,
        ..MethodParams::default()
    };

    if opts.offline {
        if let Some(p) = audit.points().iter().find(|p| p.n_in() > 0) {
            return Err(format!("--offline given but point {} has IN shadows", p.point_id));
        }
        method = match method {
            Method::Elsa(_) => {
                return Err(format!(
                    "{token} needs IN and OUT shadows for every point; ELSA has no offline form"
                ))
            }
            Method::Lira(_) | Method::Base3 | Method::Base4 => {
                if mean_shift(opts, reference.as_ref())?.is_none() {
                    return Err(format!(
                        "{token} needs IN shadows; for an offline audit pass --delta or --delta-ref \
                         to run offline LiRA, or use base_offline, bavaria_n or bavaria_t"
                    ));
                }
                notes.push(format!("{token}: offline audit, scored with lira_offline"));
                Method::LiraOffline(opts.offline_form.into())
            }
            Method::Rmia | Method::Base1(CenteringMode::LogSumExp) => {
                notes.push(format!("{token}: offline audit, scored with base_offline (alpha = {})", opts.alpha));
                Method::BaseOffline
            }
            m => m,
        };
    }

    if let Method::LiraOffline(_) = method {
        params.delta = mean_shift(opts, reference.as_ref())?;
        if params.delta.is_none() {
            return Err("lira_offline needs a mean shift: pass --delta or --delta-ref".into());
        }
    }
    if matches!(method, Method::BavariaN | Method::BavariaT) {
        params.prior = if let Some(path) = &opts.prior {
            Some(NigPrior::load(path).map_err(|e| format!("{}: {e}", path.display()))?)
        } else if let Some(r) = &reference {
            notes.push(format!("{token}: prior fitted on the --delta-ref dataset"));
            Some(fit_prior(r).map_err(|e| format!("--delta-ref: {e}"))?)
        } else if audit.is_offline() && !audit.is_empty() {
            return Err(format!(
                "{token} on offline data needs a prior: pass --prior <file> or --delta-ref <dataset>"
            ));
        } else {
            None
        };
    }
    Ok(Plan { method, params, notes })
}

pub fn score(a: &ScoreArgs) -> CmdResult {
    // Scoring never sees ground truth.
    let ds = load(&a.input, a.opts.stat)?.without_labels();
    let plan = plan(&a.method, &a.opts, &ds)?;
    let run = plan.method.run(&ds, &plan.params).map_err(err)?;
    let report = run.report;
    let rows: Vec<Vec<String>> = report
        .scores
        .iter()
        .map(|(id, s)| vec![id.to_string(), fmt_num(s, a.raw)])
        .collect();
    let scores_path = write_csv(&a.out, "scores.csv", &["point_id".into(), "score".into()], &rows)?;

    let mut text = format!(
        "method: {}\nconfig: {}\nscored: {}\nfailed: {}\n",
        report.scores.method,
        report.scores.config,
        report.scores.len(),
        report.failures.len()
    );
    for n in plan.notes.iter().chain(&run.notes) {
        text.push_str(&format!("note: {n}\n"));
    }
    for f in &report.failures {
        text.push_str(&format!("error: {}: {}\n", f.point_id, f.error));
    }
    write_atomic(&a.out, "score_report.txt", |w| {
        w.write_all(text.as_bytes()).map_err(|e| e.to_string())
    })?;
    println!(
        "{}: {} points scored, {} failed -> {}",
        report.scores.method,
        report.scores.len(),
        report.failures.len(),
        scores_path.display()
    );
    for n in plan.notes.iter().chain(&run.notes) {
        eprintln!("note: {n}");
    }
    Ok(())
}

fn read_scores(path: &Path) -> CmdResult<ScoreVector> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut ids, mut scores) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        if rec.len() != 2 {
            return Err(format!("{}: expected point_id,score rows", path.display()));
        }
        ids.push(rec[0].to_string());
        scores.push(
            rec[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("{}: bad score {:?}", path.display(), &rec[1]))?,
        );
    }
    let name = path.file_stem().map_or("scores".into(), |s| s.to_string_lossy().into_owned());
    Ok(ScoreVector {
        method: name,
        config: String::new(),
        point_ids: ids,
        scores,
    })
}

fn check_fprs(fprs: &[f64]) -> CmdResult {
    match fprs.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        Some(f) => Err(format!("--fprs values must lie in (0, 1), got {f}")),
        None => Ok(()),
    }
}

/// Scores `ds` with `token`, failing on any per-point error.
fn score_all(token: &str, opts: &MethodOpts, ds: &AuditDataset) -> CmdResult<ScoreVector> {
    let unlabelled = ds.clone().without_labels();
    let plan = plan(token, opts, &unlabelled)?;
    let run = plan.method.run(&unlabelled, &plan.params).map_err(err)?;
    for n in plan.notes.iter().chain(&run.notes) {
        eprintln!("note: {n}");
    }
    run.report.into_scores().map_err(|e| format!("{token}: {e}"))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    check_fprs(&a.fprs)?;
    if a.methods.is_empty() && a.scores.is_empty() {
        return Err("nothing to evaluate: pass --methods and/or --scores".into());
    }
    if !a.scores.is_empty() && a.inputs.len() > 1 {
        return Err("--scores files can only be evaluated against a single dataset".into());
    }
    let replicated = a.inputs.len() > 1;
    let mut names: Vec<String> = a.methods.clone();
    names.extend(a.scores.iter().map(|p| read_scores(p).map(|s| s.method)).collect::<CmdResult<Vec<_>>>()?);
    let mut results: Vec<Vec<Metrics>> = vec![Vec::new(); names.len()];

    for (rep, path) in a.inputs.iter().enumerate() {
        let ds = load(path, a.opts.stat)?;
        let labels = labels_of(&ds, path)?;
        let ids = ds.point_ids();
        let mut vectors = Vec::new();
        for token in &a.methods {
            vectors.push(score_all(token, &a.opts, &ds)?.scores);
        }
        for p in &a.scores {
            vectors.push(align(&read_scores(p)?, &ids).map_err(err)?);
        }
        for ((name, scores), out) in names.iter().zip(&vectors).zip(&mut results) {
            out.push(evaluate(scores, &labels, &a.fprs).map_err(err)?);
            let curve = roc_from(scores, &labels).map_err(err)?;
            let file = if replicated {
                format!("roc_{}_r{}.csv", safe_name(name), rep + 1)
            } else {
                format!("roc_{}.csv", safe_name(name))
            };
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|&(f, t)| vec![fmt_num(f, a.raw), fmt_num(t, a.raw)])
                .collect();
            write_csv(&a.out, &file, &["fpr".into(), "tpr".into()], &rows)?;
        }
    }

    let mut header = vec!["method".to_string(), "auc".to_string()];
    header.extend(a.fprs.iter().map(|f| format!("tpr_at_{f}")));
    if replicated {
        header.push("auc_se".into());
        header.extend(a.fprs.iter().map(|f| format!("tpr_at_{f}_se")));
    }
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&results)
        .map(|(name, reps)| {
            let mut cols = vec![mean_se(&reps.iter().map(|m| m.auc).collect::<Vec<_>>())];
            for i in 0..a.fprs.len() {
                cols.push(mean_se(&reps.iter().map(|m| m.tpr[i]).collect::<Vec<_>>()));
            }
            let mut row = vec![name.clone()];
            row.extend(cols.iter().map(|c| fmt_num(c.0, a.raw)));
            if replicated {
                row.extend(cols.iter().map(|c| fmt_num(c.1, a.raw)));
            }
            row
        })
        .collect();
    let path = write_csv(&a.out, "metrics.csv", &header, &rows)?;
    for row in &rows {
        println!("{}", row.join(","));
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(f) = &a.family {
        cfg.family = f.parse().map_err(err)?;
    }
    if let Some(n) = a.n_points {
        cfg.n_points = n;
    }
    if let Some(k) = a.k {
        cfg.k_shadows = k;
    }
    cfg.offline |= a.offline;

    let ks: Vec<Option<usize>> = if a.sweep_k.is_empty() {
        vec![None]
    } else {
        a.sweep_k.iter().map(|&k| Some(k)).collect()
    };
    let mut truth_written = None;
    for k in ks {
        let run_cfg = SynthConfig {
            k_shadows: k.unwrap_or(cfg.k_shadows),
            ..cfg.clone()
        };
        let (ds, truth) = generate(&run_cfg).map_err(err)?;
        let name = match k {
            Some(k) => format!("dataset_k{k}.csv"),
            None => "dataset.csv".to_string(),
        };
        let path = write_atomic(&a.out, &name, |w| write_dataset(&ds, w).map_err(err))?;
        println!("{} ({} points, K = {}, {})", path.display(), ds.len(), run_cfg.k_shadows, ds.stat_kind());
        if truth_written.as_ref() != Some(&truth) {
            let path = write_atomic(&a.out, "truth.csv", |w| truth.write_csv(w).map_err(err))?;
            println!("{}", path.display());
            truth_written = Some(truth);
        }
    }
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> CmdResult {
    let ds = load(&a.input, a.stat)?;
    let ds = if ds.stat_kind() == StatisticKind::LogOdds {
        ds
    } else {
        eprintln!("note: converted {} statistics to logodds", ds.stat_kind());
        convert_dataset(&ds, StatisticKind::LogOdds).map_err(err)?
    };
    let report = diagnose_dataset(&ds).map_err(err)?;
    let rows: Vec<Vec<String>> = report
        .classes
        .iter()
        .map(|c| {
            vec![
                if c.class == 1 { "in" } else { "out" }.to_string(),
                fmt_num(c.median_statistic, a.raw),
                fmt_num(c.reject_pct, a.raw),
            ]
        })
        .collect();
    let path = write_csv(
        &a.out,
        "diagnostics.csv",
        &["class".into(), "median_ad".into(), "reject_pct".into()],
        &rows,
    )?;
    for c in &report.classes {
        let name = if c.class == 1 { "IN" } else { "OUT" };
        println!(
            "{name}: {} points tested, {} skipped, median A*2 {}, {}% rejected",
            c.tested,
            c.skipped,
            fmt_num(c.median_statistic, false),
            fmt_num(c.reject_pct, false)
        );
        if c.skipped > 0 && c.tested == 0 {
            println!("{name}: every point was skipped (fewer than 8 samples or zero variance)");
        }
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn compare(a: &CompareArgs) -> CmdResult {
    check_fprs(&a.fprs)?;
    let replicated = a.inputs.len() > 1;
    let mut point_set: Option<BTreeSet<String>> = None;
    let mut tables = Vec::new();
    for path in &a.inputs {
        let ds = load(path, a.opts.stat)?;
        let labels = labels_of(&ds, path)?;
        let ids: BTreeSet<String> = ds.point_ids().into_iter().collect();
        match &point_set {
            None => point_set = Some(ids),
            Some(first) if *first != ids => {
                return Err(format!("{}: point set differs from the first replicate", path.display()))
            }
            _ => {}
        }
        let baseline = score_all(&a.baseline, &a.opts, &ds)?;
        let methods = a
            .methods
            .iter()
            .map(|t| {
                let mut s = score_all(t, &a.opts, &ds)?;
                s.method = t.clone();
                Ok(s)
            })
            .collect::<CmdResult<Vec<_>>>()?;
        tables.push(delta_table(&methods, &baseline, &labels, &a.fprs).map_err(err)?);
    }

    let mut header = vec!["method".to_string(), "delta_auc".to_string()];
    header.extend(a.fprs.iter().map(|f| format!("delta_tpr_at_{f}")));
    if replicated {
        header.push("delta_auc_se".into());
        header.extend(a.fprs.iter().map(|f| format!("delta_tpr_at_{f}_se")));
    }
    let rows: Vec<Vec<String>> = a
        .methods
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut cols = vec![mean_se(&tables.iter().map(|t| t.rows[i].d_auc).collect::<Vec<_>>())];
            for j in 0..a.fprs.len() {
                cols.push(mean_se(&tables.iter().map(|t| t.rows[i].d_tpr[j]).collect::<Vec<_>>()));
            }
            let mut row = vec![name.clone()];
            row.extend(cols.iter().map(|c| fmt_num(c.0, a.raw)));
            if replicated {
                row.extend(cols.iter().map(|c| fmt_num(c.1, a.raw)));
            }
            row
        })
        .collect();
    let path = write_csv(&a.out, "delta.csv", &header, &rows)?;
    for row in &rows {
        println!("{}", row.join(","));
    }
    eprintln!("wrote {} (baseline {})", path.display(), a.baseline);
    Ok(())
}

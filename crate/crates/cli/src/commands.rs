use std::fs;
use std::path::Path;

use rayon::prelude::*;
use rssiloc_core::ensemble::{
    treeloc_fit, treeloc_predict, CombinerMode, ComponentParams, TreeLocModel, TreeLocOptions,
};
use rssiloc_core::eval::{
    classification_metrics, classification_table, fmt_num, position_metrics, regression_metrics,
    regression_table, ConfusionMatrix, RegressionMetrics, Report,
};
use rssiloc_core::filters::FilterSpec;
use rssiloc_core::ingest::{
    fmt_f64, load_ibeacon_csv, load_regression_csv, read_table, rssi_columns, write_atomic, write_table, CsvTable,
    ZoneMapping, BEACON_COLUMNS, LOCATION_COLUMN, X_COLUMN, Y_COLUMN,
};
use rssiloc_core::learners::{
    load_model, mlp_forward, mlp_train, save_model, tune_k, ClassificationDataset, ForestParams, KnnModel,
    LearnerSpec, MlpModel, ModelRecord, PositionModel, RegressionDataset, SplitMode, Standardizer, TrainParams,
    TreeParams, Zone,
};
use rssiloc_core::radio::{random_targets, simulate_fingerprints, NoiseSpec};
use rssiloc_core::solvers::{NoiseModel, SolverKind};
use rssiloc_core::{validate_scene, Error, PathLossParams, Position, Result, Scene};

use crate::{
    AnchorArgs, Cli, Command, EvalMode, EvaluateArgs, FilterArgs, FilterName, FitArgs, LocateArgs, ModelName,
    PathLossArgs, PredictArgs, SimulateArgs, TreeArgs, TreelocArgs, TreelocFlags,
};

const DEFAULT_ANCHORS: &str = "0,0;400,0;200,400";
const KNN_CANDIDATES: std::ops::RangeInclusive<usize> = 2..=20;
const KNN_VALIDATION: f64 = 0.2;

pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::invalid("threads", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Filter(a) => filter(cli, a),
        Command::Locate(a) => locate(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Treeloc(a) => treeloc(cli, a),
    })
}

fn parse_anchor_list(text: &str) -> Result<Vec<Position>> {
    text.split([';', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let v: Vec<&str> = pair.split(',').map(str::trim).collect();
            let num = |s: &str| s.parse::<f64>().ok();
            match v.as_slice() {
                [x, y] => match (num(x), num(y)) {
                    (Some(x), Some(y)) => Ok(Position::new(x, y)),
                    _ => Err(Error::invalid("anchors", format!("cannot parse `{pair}`"))),
                },
                _ => Err(Error::invalid("anchors", format!("expected `x,y`, got `{pair}`"))),
            }
        })
        .collect()
}

fn anchors_from(args: &AnchorArgs, default: Option<&str>) -> Result<Vec<Position>> {
    match (&args.anchors, &args.anchors_file) {
        (Some(_), Some(_)) => Err(Error::invalid("anchors", "give either --anchors or --anchors-file")),
        (Some(s), None) => parse_anchor_list(s),
        (None, Some(p)) => {
            let text = fs::read_to_string(p)?;
            let body: String = text
                .lines()
                .filter(|l| l.trim().chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '.'))
                .collect::<Vec<_>>()
                .join(";");
            parse_anchor_list(&body)
        }
        (None, None) => match default {
            Some(d) => parse_anchor_list(d),
            None => Err(Error::invalid("anchors", "one of --anchors or --anchors-file is required")),
        },
    }
}

fn path_loss(a: &PathLossArgs) -> Result<PathLossParams> {
    if !(a.sigma_a >= 0.0) || !(a.sigma_p >= 0.0) {
        return Err(Error::invalid("sigma", "noise levels must be >= 0"));
    }
    PathLossParams::new(a.p0, a.d0, a.eta, a.sigma_p)
}

fn push_radio(r: &mut Report, a: &PathLossArgs) {
    r.push("p0", a.p0);
    r.push("d0", a.d0);
    r.push("eta", a.eta);
    r.push("sigma_p", a.sigma_p);
    r.push("sigma_a", a.sigma_a);
}

fn emit(report: &Report, path: Option<&Path>) -> Result<()> {
    let text = report.render();
    print!("{text}");
    if let Some(p) = path {
        write_atomic(p, text.as_bytes())?;
    }
    Ok(())
}

fn header(cli: &Cli, command: &str) -> Report {
    let mut r = Report::default();
    r.push("command", command);
    r.push("seed", cli.seed);
    r
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let anchors = anchors_from(&a.anchors, Some(DEFAULT_ANCHORS))?;
    let params = path_loss(&a.radio)?;
    let scene = validate_scene(Scene::from_positions(&anchors))?;
    if a.positions == 0 || a.samples == 0 {
        return Err(Error::invalid("positions", "positions and samples must be at least 1"));
    }
    let targets = random_targets(&scene.bounds, a.positions, cli.seed);
    let noise = NoiseSpec { sigma_a: a.radio.sigma_a, sigma_p: a.radio.sigma_p, seed: cli.seed };
    let rows = simulate_fingerprints(&scene, &params, &noise, &targets, a.samples)?;

    let m = anchors.len();
    let with_anchors = a.radio.sigma_a > 0.0;
    let mut headers: Vec<String> = (1..=m).map(|i| format!("RSSI{i}")).collect();
    headers.push(X_COLUMN.into());
    headers.push(Y_COLUMN.into());
    if with_anchors {
        for i in 1..=m {
            headers.push(format!("A{i}_X"));
            headers.push(format!("A{i}_Y"));
        }
    }
    let mut table = CsvTable { headers, rows: Vec::with_capacity(rows.len()) };
    for (target, trial) in &rows {
        let mut row: Vec<String> =
            trial.measurements.rssi.iter().map(|v| fmt_f64(v.expect("simulated reading"))).collect();
        row.push(fmt_f64(target.x));
        row.push(fmt_f64(target.y));
        if with_anchors {
            for p in &trial.anchors {
                row.push(fmt_f64(p.x));
                row.push(fmt_f64(p.y));
            }
        }
        table.rows.push(row);
    }
    write_table(&a.output, &table)?;

    let mut r = header(cli, "simulate");
    r.push("anchors", anchors.iter().map(|p| format!("{},{}", p.x, p.y)).collect::<Vec<_>>().join(";"));
    push_radio(&mut r, &a.radio);
    r.push("positions", a.positions);
    r.push("samples", a.samples);
    r.push("rows", table.rows.len());
    emit(&r, None)
}

fn filter_spec(a: &FilterArgs) -> FilterSpec {
    match a.filter {
        FilterName::Ma => FilterSpec::MovingAverage { window: a.window },
        FilterName::Median => FilterSpec::Median { half_width: a.half_width },
        FilterName::Gaussian => FilterSpec::Gaussian { sigma: a.sigma },
        FilterName::Kalman => FilterSpec::Kalman { p0: a.kalman_p0, q: a.kalman_q, r: a.kalman_r },
    }
}

fn signal_columns(t: &CsvTable) -> Vec<usize> {
    let mut cols = rssi_columns(&t.headers);
    cols.extend(BEACON_COLUMNS.iter().filter_map(|b| t.column(b).ok()));
    cols
}

/// Consecutive row ranges sharing the same target coordinates.
fn target_runs(t: &CsvTable) -> Result<Vec<std::ops::Range<usize>>> {
    let (xc, yc) = (t.column(X_COLUMN)?, t.column(Y_COLUMN)?);
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=t.rows.len() {
        let same = i < t.rows.len() && t.rows[i][xc] == t.rows[start][xc] && t.rows[i][yc] == t.rows[start][yc];
        if !same {
            runs.push(start..i);
            start = i;
        }
    }
    Ok(runs)
}

fn filter(cli: &Cli, a: &FilterArgs) -> Result<()> {
    let spec = filter_spec(a);
    let mut t = read_table(&a.input)?;
    let cols = signal_columns(&t);
    if cols.is_empty() {
        return Err(Error::MissingColumn("RSSI1".into()));
    }
    let runs = if a.group_by_target { target_runs(&t)? } else { vec![0..t.rows.len()] };
    for &c in &cols {
        for run in &runs {
            if run.is_empty() {
                continue;
            }
            let signal = run.clone().map(|r| t.number(r, c)).collect::<Result<Vec<_>>>()?;
            let out = spec.apply(&signal)?;
            for (r, v) in run.clone().zip(out) {
                t.rows[r][c] = fmt_f64(v);
            }
        }
    }
    write_table(&a.output, &t)?;
    let mut r = header(cli, "filter");
    r.push("filter", format!("{:?}", a.filter).to_lowercase());
    match spec {
        FilterSpec::MovingAverage { window } => r.push("window", window),
        FilterSpec::Median { half_width } => r.push("half_width", half_width),
        FilterSpec::Gaussian { sigma } => r.push("sigma", sigma),
        FilterSpec::Kalman { p0, q, r: rr } => {
            let show = |v: Option<f64>| v.map_or("auto".to_string(), |v| v.to_string());
            r.push("kalman_p0", show(p0));
            r.push("kalman_q", show(q));
            r.push("kalman_r", show(rr));
        }
    }
    r.push("group_by_target", a.group_by_target);
    r.push("columns", cols.len());
    r.push("rows", t.rows.len());
    emit(&r, None)
}

struct Located {
    position: Position,
    used: usize,
    fallback: Option<String>,
}

fn locate(cli: &Cli, a: &LocateArgs) -> Result<()> {
    let solver: SolverKind = a.solver.parse()?;
    let anchors = anchors_from(&a.anchors, None)?;
    let params = path_loss(&a.radio)?;
    let t = read_table(&a.input)?;
    let cols = rssi_columns(&t.headers);
    if cols.len() != anchors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} RSSI columns but {} anchors",
            cols.len(),
            anchors.len()
        )));
    }
    let m = anchors.len();
    let anchor_cols: Option<Vec<(usize, usize)>> = (1..=m)
        .map(|i| Some((t.column(&format!("A{i}_X")).ok()?, t.column(&format!("A{i}_Y")).ok()?)))
        .collect();
    let truth_cols = t.column(X_COLUMN).ok().zip(t.column(Y_COLUMN).ok());
    let mut noise = NoiseModel::uniform(m, a.radio.sigma_a, a.radio.sigma_p, a.radio.eta);
    noise.include_cross_term = a.cross_term;

    let solve_row = |r: usize| -> Result<Located> {
        let rssi = cols.iter().map(|&c| t.number(r, c)).collect::<Result<Vec<_>>>()?;
        let known: Vec<Position> = match &anchor_cols {
            Some(ac) => ac
                .iter()
                .map(|&(xc, yc)| Ok(Position::new(t.number(r, xc)?, t.number(r, yc)?)))
                .collect::<Result<_>>()?,
            None => anchors.clone(),
        };
        let idx: Vec<usize> = (0..m).filter(|&i| rssi[i] > a.sentinel).collect();
        if idx.len() < 3 {
            return Err(Error::TooFewAnchors { need: 3, got: idx.len() });
        }
        let pos: Vec<Position> = idx.iter().map(|&i| known[i]).collect();
        let d: Vec<f64> = idx.iter().map(|&i| rssiloc_core::radio::distance_from_rssi(rssi[i], &params)).collect();
        let sol = solver.solve(&pos, &d, &noise.select(&idx))?;
        Ok(Located { position: sol.position, used: idx.len(), fallback: sol.fallback.map(|f| format!("{f:?}")) })
    };
    let results: Vec<Result<Located>> = (0..t.rows.len()).into_par_iter().map(solve_row).collect();
    let mut located = Vec::with_capacity(results.len());
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(l) => located.push(l),
            Err(e) => {
                eprintln!("row {}: {e}", i + 1);
                return Err(e);
            }
        }
    }

    let truth: Option<Vec<Position>> = truth_cols
        .map(|(xc, yc)| {
            (0..t.rows.len()).map(|r| Ok(Position::new(t.number(r, xc)?, t.number(r, yc)?))).collect::<Result<_>>()
        })
        .transpose()?;

    if let Some(p) = &a.predictions {
        let mut headers = vec!["row".to_string(), "X_Pred".into(), "Y_Pred".into()];
        if truth.is_some() {
            headers.extend([X_COLUMN.to_string(), Y_COLUMN.to_string(), "error".into()]);
        }
        headers.extend(["anchors_used".to_string(), "fallback".into()]);
        let mut out = CsvTable { headers, rows: Vec::new() };
        for (i, l) in located.iter().enumerate() {
            let mut row = vec![(i + 1).to_string(), fmt_f64(l.position.x), fmt_f64(l.position.y)];
            if let Some(tr) = &truth {
                row.extend([fmt_f64(tr[i].x), fmt_f64(tr[i].y), fmt_f64(rssiloc_core::position_error(&l.position, &tr[i]))]);
            }
            row.push(l.used.to_string());
            row.push(l.fallback.clone().unwrap_or_default());
            out.rows.push(row);
        }
        write_table(p, &out)?;
    }

    let mut r = header(cli, "locate");
    r.push("solver", solver);
    push_radio(&mut r, &a.radio);
    r.push("sentinel", a.sentinel);
    r.push("cross_term", a.cross_term);
    r.push("anchor_source", if anchor_cols.is_some() { "per-row" } else { "fixed" });
    r.push("rows", located.len());
    r.push("fallbacks", located.iter().filter(|l| l.fallback.is_some()).count());
    if let Some(tr) = &truth {
        let pred: Vec<Position> = located.iter().map(|l| l.position).collect();
        let m = position_metrics(tr, &pred)?;
        r.add_regression("", &m);
        r.table = Some(regression_table(&[("position", &m)]));
    }
    emit(&r, a.report.as_deref())
}

fn tree_params(t: &TreeArgs) -> TreeParams {
    TreeParams { max_depth: Some(t.max_depth), min_leaf: t.min_leaf, split_mode: SplitMode::Exhaustive }
}

fn forest_params(t: &TreeArgs, extra: bool) -> ForestParams {
    let base = if extra {
        ForestParams::extra_trees(t.n_trees, Some(t.max_depth))
    } else {
        ForestParams::random_forest(t.n_trees, Some(t.max_depth))
    };
    ForestParams { min_leaf: t.min_leaf, ..base }
}

fn treeloc_options(t: &TreeArgs, f: &TreelocFlags) -> TreeLocOptions {
    TreeLocOptions {
        components: ComponentParams {
            etr: forest_params(t, true),
            dtr: tree_params(t),
            rfr: forest_params(t, false),
        },
        shuffle: f.shuffle,
        combiner_holdout: f.combiner_holdout,
        mode: if f.fixed_paper { CombinerMode::FixedPaper } else { CombinerMode::Fitted },
    }
}

fn coefficients(c: &[f64; 4]) -> String {
    c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn push_tree_args(r: &mut Report, t: &TreeArgs) {
    r.push("max_depth", t.max_depth);
    r.push("min_leaf", t.min_leaf);
    r.push("n_trees", t.n_trees);
}

fn push_treeloc(r: &mut Report, m: &TreeLocModel, f: &TreelocFlags) {
    r.push("combiner_mode", if m.mode == CombinerMode::FixedPaper { "fixed-paper" } else { "fitted" });
    r.push("shuffle", f.shuffle);
    r.push("combiner_holdout", f.combiner_holdout);
    r.push("combiner_x", coefficients(&m.combiner_x));
    r.push("combiner_y", coefficients(&m.combiner_y));
}

fn write_position_predictions(path: &Path, ds: &RegressionDataset, offset: usize, pred: &[Position]) -> Result<()> {
    let headers = ["row", "X_Pred", "Y_Pred", X_COLUMN, Y_COLUMN, "error"].map(String::from).to_vec();
    let rows = pred
        .iter()
        .zip(&ds.targets)
        .enumerate()
        .map(|(i, (p, t))| {
            let truth = Position::new(t[0], t[1]);
            vec![
                (offset + i + 1).to_string(),
                fmt_f64(p.x),
                fmt_f64(p.y),
                fmt_f64(t[0]),
                fmt_f64(t[1]),
                fmt_f64(rssiloc_core::position_error(p, &truth)),
            ]
        })
        .collect();
    write_table(path, &CsvTable { headers, rows })
}

fn truth_positions(ds: &RegressionDataset) -> Vec<Position> {
    ds.targets.iter().map(|t| Position::new(t[0], t[1])).collect()
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    match a.model {
        ModelName::Knn | ModelName::Mlp => fit_classifier(cli, a),
        _ => fit_regressor(cli, a),
    }
}

fn fit_regressor(cli: &Cli, a: &FitArgs) -> Result<()> {
    let ds = load_regression_csv(&a.input)?;
    let (train, test) = ds.split_tail(a.test_size)?;
    let mut r = header(cli, "fit");
    r.push("model", format!("{:?}", a.model).to_lowercase());
    r.push("input_rows", ds.len());
    r.push("test_size", a.test_size);

    let (record, predict): (ModelRecord, Box<dyn Fn(&[f64]) -> Position>) = if a.model == ModelName::Treeloc {
        let opts = treeloc_options(&a.tree, &a.treeloc);
        push_tree_args(&mut r, &a.tree);
        let m = treeloc_fit(&train, cli.seed, &opts)?;
        push_treeloc(&mut r, &m, &a.treeloc);
        let mc = m.clone();
        (ModelRecord::Treeloc(m), Box::new(move |row| treeloc_predict(&mc, row)))
    } else {
        let spec = match a.model {
            ModelName::Linear => LearnerSpec::Linear,
            ModelName::Poly => {
                r.push("degree", a.degree);
                r.push("cross_terms", a.cross_terms);
                LearnerSpec::Polynomial { degree: a.degree, cross_terms: a.cross_terms }
            }
            ModelName::Tree => {
                r.push("max_depth", a.tree.max_depth);
                r.push("min_leaf", a.tree.min_leaf);
                LearnerSpec::Tree(tree_params(&a.tree))
            }
            ModelName::ExtraTrees => {
                push_tree_args(&mut r, &a.tree);
                LearnerSpec::ExtraTrees(forest_params(&a.tree, true))
            }
            _ => {
                push_tree_args(&mut r, &a.tree);
                LearnerSpec::RandomForest(forest_params(&a.tree, false))
            }
        };
        let m = PositionModel::fit(&spec, &train, cli.seed)?;
        let mc = m.clone();
        (ModelRecord::Position(m), Box::new(move |row| mc.predict(row)))
    };

    let train_pred: Vec<Position> = train.features.iter().map(|x| predict(x)).collect();
    let train_m = position_metrics(&truth_positions(&train), &train_pred)?;
    let mut rows: Vec<(&str, RegressionMetrics)> = vec![("train", train_m)];
    r.add_regression("train_", &train_m);
    let (eval_ds, eval_pred, offset) = if test.is_empty() {
        (&train, train_pred, 0)
    } else {
        let p: Vec<Position> = test.features.iter().map(|x| predict(x)).collect();
        let m = position_metrics(&truth_positions(&test), &p)?;
        r.add_regression("test_", &m);
        rows.push(("test", m));
        (&test, p, train.len())
    };
    let refs: Vec<(&str, &RegressionMetrics)> = rows.iter().map(|(n, m)| (*n, m)).collect();
    r.table = Some(regression_table(&refs));
    if let Some(p) = &a.predictions {
        write_position_predictions(p, eval_ds, offset, &eval_pred)?;
    }
    if let Some(p) = &a.model_out {
        save_model(p, record)?;
    }
    emit(&r, a.report.as_deref())
}

fn zone_mapping(path: &Option<std::path::PathBuf>) -> Result<ZoneMapping> {
    match path {
        Some(p) => ZoneMapping::load(p),
        None => Err(Error::invalid("zones", "a zone mapping file is required")),
    }
}

fn write_zone_predictions(
    path: &Path,
    locations: &[String],
    truth: Option<&[Zone]>,
    pred: &[(Zone, Vec<f64>)],
) -> Result<()> {
    let mut headers = vec![LOCATION_COLUMN.to_string()];
    if truth.is_some() {
        headers.push("zone".into());
    }
    headers.push("zone_pred".into());
    headers.extend(Zone::ALL.iter().map(|z| format!("p_{z}")));
    let rows = pred
        .iter()
        .enumerate()
        .map(|(i, (z, p))| {
            let mut row = vec![locations.get(i).cloned().unwrap_or_default()];
            if let Some(t) = truth {
                row.push(t[i].to_string());
            }
            row.push(z.to_string());
            row.extend(p.iter().map(|v| fmt_f64(*v)));
            row
        })
        .collect();
    write_table(path, &CsvTable { headers, rows })
}

fn zone_labels() -> Vec<String> {
    Zone::ALL.iter().map(|z| z.to_string()).collect()
}

fn classify(record: &ModelRecord, x: &[f64]) -> Result<(Zone, Vec<f64>)> {
    match record {
        ModelRecord::Knn(m) => m.predict(x).map(|(z, p)| (z, p.to_vec())),
        ModelRecord::Mlp(m) => {
            let p = mlp_forward(m, x)?;
            Ok((m.predict(x)?, p))
        }
        _ => Err(Error::ModelFormat("not a classifier".into())),
    }
}

fn fit_classifier(cli: &Cli, a: &FitArgs) -> Result<()> {
    let mapping = zone_mapping(&a.zones)?;
    let ds = load_ibeacon_csv(&a.input, &mapping)?;
    let (train, test) = ds.shuffled_split(a.test_size, cli.seed)?;
    let mut r = header(cli, "fit");
    r.push("model", format!("{:?}", a.model).to_lowercase());
    r.push("input_rows", ds.len());
    r.push("test_size", a.test_size);

    let record = if a.model == ModelName::Knn {
        let k = match a.k {
            Some(k) => k,
            None => {
                let (k, scores) = tune_k(&train, KNN_CANDIDATES, KNN_VALIDATION, cli.seed)?;
                r.push("k_tuning", scores.iter().map(|(k, s)| format!("{k}:{}", fmt_num(*s))).collect::<Vec<_>>().join(" "));
                k
            }
        };
        r.push("k", k);
        ModelRecord::Knn(KnnModel::fit(&train, k)?)
    } else {
        let params = TrainParams { lr: a.lr, batch_size: a.batch_size, epochs: a.epochs, seed: cli.seed };
        r.push("layers", "13-20-17-4");
        r.push("lr", a.lr);
        r.push("batch_size", a.batch_size);
        r.push("epochs", a.epochs);
        r.push("standardize", !a.no_standardize);
        let mut model = MlpModel::default_architecture(cli.seed);
        if !a.no_standardize {
            model = model.with_standardizer(Standardizer::fit(&train.features)?);
        }
        let held = (!test.is_empty()).then_some(&test);
        let (model, trace) = mlp_train(&model, &train, held, &params)?;
        if let Some(p) = &a.trace {
            let mut t = CsvTable {
                headers: ["epoch", "train_accuracy", "test_accuracy", "train_loss"].map(String::from).to_vec(),
                rows: Vec::new(),
            };
            for e in 0..trace.train_accuracy.len() {
                t.rows.push(vec![
                    (e + 1).to_string(),
                    fmt_f64(trace.train_accuracy[e]),
                    trace.test_accuracy.get(e).map(|v| fmt_f64(*v)).unwrap_or_default(),
                    fmt_f64(trace.train_loss[e]),
                ]);
            }
            write_table(p, &t)?;
        }
        ModelRecord::Mlp(model)
    };

    let eval: &ClassificationDataset = if test.is_empty() { &train } else { &test };
    r.push("evaluated_on", if test.is_empty() { "train" } else { "test" });
    let pred = eval.features.iter().map(|x| classify(&record, x)).collect::<Result<Vec<_>>>()?;
    let actual: Vec<usize> = eval.zones.iter().map(|z| z.index()).collect();
    let guessed: Vec<usize> = pred.iter().map(|p| p.0.index()).collect();
    let cm = ConfusionMatrix::from_indices(zone_labels(), &actual, &guessed)?;
    let report = classification_metrics(&cm)?;
    r.push("accuracy", fmt_num(report.overall_accuracy));
    r.table = Some(classification_table(&report));
    if let Some(p) = &a.predictions {
        write_zone_predictions(p, &eval.locations, Some(&eval.zones), &pred)?;
    }
    if let Some(p) = &a.model_out {
        save_model(p, record)?;
    }
    emit(&r, a.report.as_deref())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let record = load_model(&a.model)?;
    let t = read_table(&a.input)?;
    match &record {
        ModelRecord::Position(_) | ModelRecord::Treeloc(_) => {
            let cols = rssi_columns(&t.headers);
            let n_features = match &record {
                ModelRecord::Position(m) => m.n_features,
                ModelRecord::Treeloc(m) => m.etr.n_features,
                _ => unreachable!(),
            };
            if cols.len() != n_features {
                return Err(Error::ShapeMismatch(format!(
                    "model expects {n_features} RSSI columns, input has {}",
                    cols.len()
                )));
            }
            let truth = t.column(X_COLUMN).ok().zip(t.column(Y_COLUMN).ok());
            let mut headers = vec!["row".to_string(), "X_Pred".into(), "Y_Pred".into()];
            if truth.is_some() {
                headers.extend([X_COLUMN.to_string(), Y_COLUMN.to_string()]);
            }
            let mut out = CsvTable { headers, rows: Vec::new() };
            for i in 0..t.rows.len() {
                let x = cols.iter().map(|&c| t.number(i, c)).collect::<Result<Vec<_>>>()?;
                let p = match &record {
                    ModelRecord::Position(m) => m.predict(&x),
                    ModelRecord::Treeloc(m) => treeloc_predict(m, &x),
                    _ => unreachable!(),
                };
                let mut row = vec![(i + 1).to_string(), fmt_f64(p.x), fmt_f64(p.y)];
                if let Some((xc, yc)) = truth {
                    row.push(fmt_f64(t.number(i, xc)?));
                    row.push(fmt_f64(t.number(i, yc)?));
                }
                out.rows.push(row);
            }
            write_table(&a.output, &out)?;
            println!("command\tpredict\nmodel\t{}\nrows\t{}", record.kind(), out.rows.len());
        }
        ModelRecord::Knn(_) | ModelRecord::Mlp(_) => {
            let cols = BEACON_COLUMNS.iter().map(|c| t.column(c)).collect::<Result<Vec<_>>>()?;
            let loc = t.column(LOCATION_COLUMN).ok();
            let locations: Vec<String> =
                (0..t.rows.len()).map(|i| loc.map(|c| t.rows[i][c].trim().to_string()).unwrap_or_default()).collect();
            let truth = match &a.zones {
                Some(p) => {
                    let m = ZoneMapping::load(p)?;
                    Some(locations.iter().map(|l| m.get(l)).collect::<Result<Vec<_>>>()?)
                }
                None => None,
            };
            let pred = (0..t.rows.len())
                .map(|i| {
                    let x = cols.iter().map(|&c| t.number(i, c)).collect::<Result<Vec<_>>>()?;
                    classify(&record, &x)
                })
                .collect::<Result<Vec<_>>>()?;
            write_zone_predictions(&a.output, &locations, truth.as_deref(), &pred)?;
            println!("command\tpredict\nmodel\t{}\nrows\t{}", record.kind(), pred.len());
        }
    }
    Ok(())
}

fn read_xy(t: &CsvTable, prefer_pred: bool) -> Result<Vec<Position>> {
    let cols = if prefer_pred { t.column("X_Pred").ok().zip(t.column("Y_Pred").ok()) } else { None };
    let (xc, yc) = match cols {
        Some(c) => c,
        None => (t.column(X_COLUMN)?, t.column(Y_COLUMN)?),
    };
    (0..t.rows.len()).map(|r| Ok(Position::new(t.number(r, xc)?, t.number(r, yc)?))).collect()
}

fn parse_zone(t: &CsvTable, r: usize, c: usize) -> Result<Zone> {
    t.rows[r][c].parse::<Zone>().map_err(|_| Error::MalformedNumber {
        row: r + 1,
        column: t.headers[c].clone(),
        value: t.rows[r][c].clone(),
    })
}

fn truth_zones(t: &CsvTable, zones: &Option<std::path::PathBuf>) -> Result<Vec<Zone>> {
    if let Ok(c) = t.column("zone") {
        return (0..t.rows.len()).map(|r| parse_zone(t, r, c)).collect();
    }
    let onehot: Option<Vec<usize>> = Zone::ALL.iter().map(|z| t.column(&format!("zone_{z}")).ok()).collect();
    if let Some(cols) = onehot {
        return (0..t.rows.len())
            .map(|r| {
                let hot: Vec<usize> = (0..4).filter(|&j| t.rows[r][cols[j]].trim() == "1").collect();
                match hot.as_slice() {
                    [j] => Ok(Zone::ALL[*j]),
                    _ => Err(Error::ShapeMismatch(format!("row {}: one-hot zone columns must hold a single 1", r + 1))),
                }
            })
            .collect();
    }
    let mapping = zone_mapping(zones)?;
    let loc = t.column(LOCATION_COLUMN)?;
    (0..t.rows.len()).map(|r| mapping.get(t.rows[r][loc].trim())).collect()
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let actual = read_table(&a.actual)?;
    let predicted = read_table(&a.predicted)?;
    if actual.rows.len() != predicted.rows.len() {
        return Err(Error::LengthMismatch { expected: actual.rows.len(), got: predicted.rows.len() });
    }
    let mut r = Report::default();
    r.push("command", "evaluate");
    r.push("mode", format!("{:?}", a.mode).to_lowercase());
    r.push("rows", actual.rows.len());
    match a.mode {
        EvalMode::Regression => {
            let truth = read_xy(&actual, false)?;
            let pred = read_xy(&predicted, true)?;
            let m = position_metrics(&truth, &pred)?;
            let axis = |f: fn(&Position) -> f64| -> Result<RegressionMetrics> {
                let t: Vec<f64> = truth.iter().map(f).collect();
                let p: Vec<f64> = pred.iter().map(f).collect();
                regression_metrics(&t, &p)
            };
            let (mx, my) = (axis(|p| p.x)?, axis(|p| p.y)?);
            r.add_regression("", &m);
            r.table = Some(regression_table(&[("position", &m), ("x", &mx), ("y", &my)]));
        }
        EvalMode::Classification => {
            let truth = truth_zones(&actual, &a.zones)?;
            let pc = predicted.column("zone_pred").or_else(|_| predicted.column("zone"))?;
            let pred = (0..predicted.rows.len()).map(|i| parse_zone(&predicted, i, pc)).collect::<Result<Vec<_>>>()?;
            let ai: Vec<usize> = truth.iter().map(|z| z.index()).collect();
            let pi: Vec<usize> = pred.iter().map(|z| z.index()).collect();
            let report = classification_metrics(&ConfusionMatrix::from_indices(zone_labels(), &ai, &pi)?)?;
            r.push("accuracy", fmt_num(report.overall_accuracy));
            r.table = Some(classification_table(&report));
        }
    }
    emit(&r, a.report.as_deref())
}

fn treeloc(cli: &Cli, a: &TreelocArgs) -> Result<()> {
    let ds = load_regression_csv(&a.input)?;
    let (train, test) = ds.split_tail(a.test_size)?;
    let opts = treeloc_options(&a.tree, &a.treeloc);
    let m = treeloc_fit(&train, cli.seed, &opts)?;

    let mut r = header(cli, "treeloc");
    r.push("input_rows", ds.len());
    r.push("test_size", a.test_size);
    push_tree_args(&mut r, &a.tree);
    push_treeloc(&mut r, &m, &a.treeloc);

    let mut table: Vec<(String, RegressionMetrics)> = Vec::new();
    let mut score = |name: &str, part: &RegressionDataset, r: &mut Report| -> Result<Vec<Position>> {
        let comps: Vec<[Position; 3]> = part.features.iter().map(|x| m.components(x)).collect();
        let truth = truth_positions(part);
        for (k, label) in ["etr", "dtr", "rfr"].iter().enumerate() {
            let p: Vec<Position> = comps.iter().map(|c| c[k]).collect();
            table.push((format!("{name}_{label}"), position_metrics(&truth, &p)?));
        }
        let p: Vec<Position> = comps.iter().map(|c| m.combine(*c)).collect();
        let met = position_metrics(&truth, &p)?;
        r.add_regression(&format!("{name}_"), &met);
        table.push((format!("{name}_treeloc"), met));
        Ok(p)
    };
    let train_pred = score("train", &train, &mut r)?;
    let (eval_ds, eval_pred, offset) = if test.is_empty() {
        (&train, train_pred, 0)
    } else {
        let p = score("test", &test, &mut r)?;
        (&test, p, train.len())
    };
    let refs: Vec<(&str, &RegressionMetrics)> = table.iter().map(|(n, m)| (n.as_str(), m)).collect();
    r.table = Some(regression_table(&refs));
    if let Some(p) = &a.predictions {
        write_position_predictions(p, eval_ds, offset, &eval_pred)?;
    }
    if let Some(p) = &a.model_out {
        save_model(p, ModelRecord::Treeloc(m))?;
    }
    emit(&r, a.report.as_deref())
}

//! One function per subcommand. Every random stream is derived from the
//! master seed with a fixed label, so each command is a pure function of its
//! config, inputs and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use spp_core::cvae::{grid_search, train_with_records, GridTask, TrainedModel};
use spp_core::data::{
    encode, format_value, ingest_csv, split_train_val, write_records_file, AttributeKind, Record, Schema, Value,
};
use spp_core::generator::{generate_population, ConditionProfile};
use spp_core::metrics::{compare, cross_tabulate, marginals, n_bins, overlap, DispersionMode};
use spp_core::oracle::{canned, generate_dataset, DgpSpec};
use spp_core::panel::{
    aggregate_trend, bootstrap as run_bootstrap, build_panel as run_panel, classify_movers as run_movers,
    group_marginals, BootstrapConfig, ExternalByYear, PanelCube, StatisticKind, StatisticSpec, TrendSeries,
};
use spp_core::seed::derive;

use crate::config::{time_value, RunConfig};
use crate::manifest::Recorder;

type CsvOut = csv::Writer<BufWriter<File>>;

fn csv_writer(path: &Path, header: &[&str]) -> Result<CsvOut> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header)?;
    Ok(w)
}

fn load_records(rec: &mut Recorder, cfg: &RunConfig, schema: &Schema) -> Result<Vec<Record>> {
    let path = cfg.require(&cfg.data, "data")?;
    rec.input(path)?;
    let ingested = ingest_csv(path, schema).with_context(|| format!("reading {}", path.display()))?;
    if ingested.dropped > 0 {
        eprintln!("dropped {} incomplete rows from {}", ingested.dropped, path.display());
    }
    rec.detail("rows_dropped", ingested.dropped);
    Ok(ingested.records)
}

fn load_model(rec: &mut Recorder, cfg: &RunConfig) -> Result<TrainedModel> {
    let path = cfg.require(&cfg.model, "model")?;
    rec.input(path)?;
    let model = TrainedModel::load(path).with_context(|| format!("loading model {}", path.display()))?;
    rec.detail("model_schema_hash", &model.schema_hash);
    Ok(model)
}

/// The same split in every command: train and evaluate agree on the held-out
/// records.
fn split(cfg: &RunConfig, records: &[Record]) -> Result<(Vec<Record>, Vec<Record>)> {
    Ok(split_train_val(records, cfg.train_fraction(), derive(cfg.seed()?, "split", 0))?)
}

fn subset_or_preferences(schema: &Schema, subset: &[String]) -> Vec<String> {
    if subset.is_empty() {
        schema
            .preference_indices()
            .into_iter()
            .map(|j| schema.attributes[j].name.clone())
            .collect()
    } else {
        subset.to_vec()
    }
}

fn synthesize(
    model: &TrainedModel,
    records: &[Record],
    draws: usize,
    seed: u64,
    mode: spp_core::data::DecodeMode,
) -> Result<Vec<Record>> {
    let profiles: Vec<ConditionProfile> = records
        .iter()
        .map(|r| ConditionProfile::from_record(&model.schema, r))
        .collect();
    Ok(generate_population(model, &profiles, draws, seed, mode)?
        .into_iter()
        .map(|s| s.record)
        .collect())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new("synth", cfg, seed, &out);
    let spec = match canned(&cfg.synth.spec) {
        Ok(s) => s,
        Err(_) => {
            let path = Path::new(&cfg.synth.spec);
            if !path.exists() {
                bail!("`{}` is neither a shipped spec nor a spec file", cfg.synth.spec);
            }
            rec.input(path)?;
            DgpSpec::from_json(&std::fs::read_to_string(path)?)?
        }
    };
    let years: Vec<usize> = cfg.synth.years.clone().unwrap_or_else(|| (0..spec.n_years).collect());
    let records = generate_dataset(&spec, cfg.synth.n_per_year, &years, derive(seed, "synth", 0))?;
    write_records_file(rec.output("data.csv"), &spec.schema, &records, None)?;
    spec.schema.save(rec.output("schema.json"))?;
    std::fs::write(rec.output("spec.json"), spec.to_json())?;
    rec.detail("spec", &spec.name);
    rec.detail("records", records.len());
    rec.finish()
}

pub fn train(cfg: &RunConfig, grid: bool, plan_only: bool) -> Result<()> {
    let seed = cfg.seed()?;
    let base = spp_core::cvae::CvaeConfig {
        seed: derive(seed, "train", 0),
        ..cfg.cvae.clone()
    };
    if grid {
        let cells = cfg.grid.cells(&base);
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "grid plan: {} cells", cells.len())?;
        writeln!(stdout, "index,n_layers,n_neurons,latent_dim,beta")?;
        for e in &cells {
            writeln!(stdout, "{},{},{},{},{}", e.index, e.n_layers, e.n_neurons, e.latent_dim, e.beta)?;
        }
        if plan_only {
            return Ok(());
        }
    }
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new(if grid { "train-grid" } else { "train" }, cfg, seed, &out);

    let schema_path = cfg.require(&cfg.schema, "schema")?;
    rec.input(schema_path)?;
    let mut schema = Schema::load(schema_path)?;
    let records = load_records(&mut rec, cfg, &schema)?;
    let (train_recs, val_recs) = split(cfg, &records)?;
    if !schema.is_fitted() {
        let merged = schema.fit(&train_recs)?;
        rec.detail("bins_merged", merged);
    }
    let train_enc = encode(&train_recs, &schema)?;
    let val_enc = encode(&val_recs, &schema)?;

    let model = if grid {
        let task = GridTask {
            schema: &schema,
            train: &train_recs,
            val: &val_recs,
            subsets: if cfg.evaluation.subsets.is_empty() {
                vec![subset_or_preferences(&schema, &[])]
            } else {
                cfg.evaluation.subsets.clone()
            },
            draws_per_record: cfg.evaluation.draws_per_record,
        };
        let result = grid_search(&task, &cfg.grid, &base)?;
        let mut w = csv_writer(
            &rec.output("leaderboard.csv"),
            &[
                "rank",
                "index",
                "n_layers",
                "n_neurons",
                "latent_dim",
                "beta",
                "score",
                "best_val_loss",
                "best_epoch",
                "diverged",
            ],
        )?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for (rank, e) in result.leaderboard().into_iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                e.index.to_string(),
                e.n_layers.to_string(),
                e.n_neurons.to_string(),
                e.latent_dim.to_string(),
                e.beta.to_string(),
                opt(e.score),
                opt(e.best_val_loss),
                e.best_epoch.map_or(String::new(), |b| b.to_string()),
                e.diverged.to_string(),
            ])?;
        }
        w.flush()?;
        rec.detail("best_cell", result.best);
        // the winner is refit on every record; the train-split model is kept
        // for validation comparisons
        result.best_model.save(rec.output("selection_model.json"))?;
        let refit = result.refit_config();
        rec.detail("refit_config", &refit);
        let all_enc = encode(&records, &schema)?;
        train_with_records(&schema, &all_enc, None, &refit, Some(&records))?
    } else {
        train_with_records(&schema, &train_enc, Some(&val_enc), &base, Some(&records))?
    };

    model.save(rec.output("model.json"))?;
    schema.save(rec.output("schema.fitted.json"))?;
    let mut w = csv_writer(&rec.output("history.csv"), &["epoch", "train_loss", "val_loss"])?;
    for h in &model.history {
        w.write_record([
            h.epoch.to_string(),
            h.train.to_string(),
            h.val.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    rec.detail("train_records", train_recs.len());
    rec.detail("val_records", val_recs.len());
    rec.detail("best_epoch", model.best_epoch);
    rec.detail("best_val_loss", model.best_val_loss());
    rec.detail("history", &model.history);
    rec.finish()
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new("generate", cfg, seed, &out);
    let model = load_model(&mut rec, cfg)?;
    let schema = &model.schema;
    let records = load_records(&mut rec, cfg, schema)?;
    let profiles: Vec<ConditionProfile> = records.iter().map(|r| ConditionProfile::from_record(schema, r)).collect();
    let synth = generate_population(
        &model,
        &profiles,
        cfg.generate.draws_per_profile,
        derive(seed, "generate", 0),
        cfg.generate.mode,
    )?;
    let profile_ids: Vec<u64> = synth.iter().map(|s| s.profile_id).collect();
    let out_records: Vec<Record> = synth
        .iter()
        .enumerate()
        .map(|(k, s)| Record {
            id: k as u64,
            values: s.record.values.clone(),
        })
        .collect();
    write_records_file(
        rec.output("synthetic.csv"),
        schema,
        &out_records,
        Some(("profile_id", &profile_ids)),
    )?;
    rec.detail("records", out_records.len());
    rec.detail("extrapolated", synth.iter().filter(|s| s.extrapolated).count());
    rec.detail("decode_mode", cfg.generate.mode);
    rec.finish()
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new("evaluate", cfg, seed, &out);
    let model = load_model(&mut rec, cfg)?;
    let selection = match &cfg.selection_model {
        Some(_) => {
            let path = cfg.require(&cfg.selection_model, "selection_model")?;
            rec.input(path)?;
            let m = TrainedModel::load(path)?;
            if m.schema_hash != model.schema_hash {
                bail!("selection model and model were trained on different schemas");
            }
            m
        }
        None => model.clone(),
    };
    let schema = &model.schema;
    let records = load_records(&mut rec, cfg, schema)?;
    let (train_recs, val_recs) = split(cfg, &records)?;
    let draws = cfg.evaluation.draws_per_record;
    let mode = spp_core::data::DecodeMode::Sample;
    let model_val = synthesize(&selection, &val_recs, draws, derive(seed, "evaluate-val", 0), mode)?;
    let model_whole = synthesize(&model, &records, draws, derive(seed, "evaluate-whole", 0), mode)?;

    let subsets: Vec<Vec<String>> = if cfg.evaluation.subsets.is_empty() {
        vec![subset_or_preferences(schema, &[])]
    } else {
        cfg.evaluation.subsets.clone()
    };
    let rows: [(&str, &[Record], &[Record]); 3] = [
        ("train-vs-val", &train_recs, &val_recs),
        ("model-vs-val", &model_val, &val_recs),
        ("model-vs-whole", &model_whole, &records),
    ];
    let mut cmp = csv_writer(
        &rec.output("comparison.csv"),
        &["comparison", "subset", "n_bins", "srmse", "corr", "r2"],
    )?;
    let mut scatter = csv_writer(
        &rec.output("scatter.csv"),
        &["comparison", "subset", "bin", "estimated", "reference"],
    )?;
    for subset in &subsets {
        let label = subset.join("|");
        let nb = n_bins(schema, subset)?;
        for (name, est, reference) in rows {
            let e = cross_tabulate(schema, est, subset)?;
            let r = cross_tabulate(schema, reference, subset)?;
            let report = compare(&e, &r)?;
            cmp.write_record([
                name.to_string(),
                label.clone(),
                nb.to_string(),
                report.srmse.to_string(),
                report.corr.to_string(),
                report.r2.to_string(),
            ])?;
            for (b, (x, y)) in e.frequencies.iter().zip(&r.frequencies).enumerate() {
                if *x > 0.0 || *y > 0.0 {
                    scatter.write_record([name, &label, &b.to_string(), &x.to_string(), &y.to_string()])?;
                }
            }
        }
    }
    cmp.flush()?;
    scatter.flush()?;

    let mut ov = csv_writer(&rec.output("overlap.csv"), &["comparison", "a_in_b_pct", "b_in_a_pct"])?;
    let model_train: Vec<Record> = {
        let ids: std::collections::HashSet<u64> = train_recs.iter().map(|r| r.id).collect();
        model_whole.iter().filter(|r| ids.contains(&r.id)).cloned().collect()
    };
    for (name, a, b) in [
        ("model-vs-train", &model_train, &train_recs),
        ("train-vs-val", &train_recs, &val_recs),
    ] {
        let o = overlap(schema, a, b)?;
        ov.write_record([name.to_string(), o.a_in_b.to_string(), o.b_in_a.to_string()])?;
    }
    ov.flush()?;

    let mut mw = csv_writer(
        &rec.output("marginals.csv"),
        &["attribute", "category", "label", "data", "model"],
    )?;
    for j in schema.preference_indices() {
        let a = &schema.attributes[j];
        if a.is_raw_numeric() {
            continue;
        }
        let d = marginals(schema, &records, &a.name)?;
        let m = marginals(schema, &model_whole, &a.name)?;
        for (k, (x, y)) in d.iter().zip(&m).enumerate() {
            mw.write_record([
                a.name.clone(),
                k.to_string(),
                a.category_label(k),
                x.to_string(),
                y.to_string(),
            ])?;
        }
    }
    mw.flush()?;
    rec.detail("subsets", &subsets);
    rec.finish()
}

/// Base population: records of the reference year, capped by id order.
fn base_population(
    schema: &Schema,
    records: &[Record],
    reference_year: Option<&serde_json::Value>,
    max: Option<usize>,
) -> Result<Vec<ConditionProfile>> {
    let t = schema.time_index().ok_or_else(|| anyhow!("schema has no time attribute"))?;
    let reference = reference_year.ok_or_else(|| anyhow!("`panel.reference_year` is required"))?;
    let year = time_value(schema, reference)?;
    let key = |v: Value| -> Result<usize> { Ok(schema.attributes[t].category_of(v)?) };
    let mut base: Vec<&Record> = vec![];
    for r in records {
        let hit = match (year, r.values[t]) {
            (Value::Num(a), Value::Num(b)) => a == b,
            (y, v) => key(y)? == key(v)?,
        };
        if hit {
            base.push(r);
        }
    }
    base.sort_by_key(|r| r.id);
    if let Some(m) = max {
        base.truncate(m);
    }
    if base.is_empty() {
        bail!("no records in the reference year");
    }
    Ok(base.iter().map(|r| ConditionProfile::from_record(schema, r)).collect())
}

fn panel_years(schema: &Schema, records: &[Record], configured: &[serde_json::Value]) -> Result<Vec<Value>> {
    if !configured.is_empty() {
        return configured.iter().map(|y| time_value(schema, y)).collect();
    }
    let t = schema.time_index().ok_or_else(|| anyhow!("schema has no time attribute"))?;
    match &schema.attributes[t].kind {
        AttributeKind::Categorical { cardinality, .. } => Ok((0..*cardinality).map(Value::Cat).collect()),
        AttributeKind::Numerical { .. } => {
            let mut xs: Vec<f64> = records.iter().map(|r| r.values[t].as_f64()).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            Ok(xs.into_iter().map(Value::Num).collect())
        }
    }
}

fn external_table(
    rec: &mut Recorder,
    cfg: &RunConfig,
    schema: &Schema,
    base: &[ConditionProfile],
    years: &[Value],
) -> Result<ExternalByYear> {
    match &cfg.panel.external {
        Some(_) => {
            let path = cfg.require(&cfg.panel.external, "panel.external")?;
            rec.input(path)?;
            Ok(ExternalByYear::from_csv(File::open(path)?, schema, years)?)
        }
        None => Ok(ExternalByYear::constant(schema, base, years.len())?),
    }
}

fn year_label(schema: &Schema, year: Value) -> String {
    match schema.time_index() {
        Some(t) => format_value(schema, t, year),
        None => year.as_f64().to_string(),
    }
}

/// Panel seed shared by build-panel and classify-movers so both see the
/// same cells.
fn panel_seed(seed: u64) -> u64 {
    derive(seed, "panel", 0)
}

pub fn build_panel(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new("build-panel", cfg, seed, &out);
    let model = load_model(&mut rec, cfg)?;
    let schema = &model.schema;
    let records = load_records(&mut rec, cfg, schema)?;
    let base = base_population(
        schema,
        &records,
        cfg.panel.reference_year.as_ref(),
        cfg.panel.max_individuals,
    )?;
    let years = panel_years(schema, &records, &cfg.panel.years)?;
    let external = external_table(&mut rec, cfg, schema, &base, &years)?;
    let subset = subset_or_preferences(schema, &cfg.panel.subset);
    let cube = run_panel(&model, &base, &years, &external, cfg.panel.r, &subset, panel_seed(seed))?;
    write_panel(&rec.output("panel.csv"), schema, &cube)?;

    let trends: Vec<(String, Vec<spp_core::panel::Condition>)> = if cfg.panel.trends.is_empty() {
        cube.preferences.iter().map(|p| (p.clone(), vec![])).collect()
    } else {
        cfg.panel
            .trends
            .iter()
            .map(|t| (t.attribute.clone(), t.conditions.clone()))
            .collect()
    };
    let mut w = csv_writer(
        &rec.output("trends.csv"),
        &["trend", "attribute", "conditions", "n_individuals", "year", "statistic", "value"],
    )?;
    for (k, (attr, conditions)) in trends.iter().enumerate() {
        let trend = aggregate_trend(&cube, schema, attr, conditions)?;
        let cond = conditions
            .iter()
            .map(|c| {
                let cats: Vec<String> = c.categories.iter().map(usize::to_string).collect();
                format!("{}={}", c.attribute, cats.join("/"))
            })
            .collect::<Vec<_>>()
            .join("&");
        let a = schema.attribute(attr)?;
        let mut row = |year: Value, stat: String, value: f64| {
            w.write_record([
                k.to_string(),
                attr.clone(),
                cond.clone(),
                trend.n_individuals.to_string(),
                year_label(schema, year),
                stat,
                value.to_string(),
            ])
        };
        match &trend.series {
            TrendSeries::Categorical { probabilities } => {
                for (&year, p) in trend.years.iter().zip(probabilities) {
                    for (c, v) in p.iter().enumerate() {
                        row(year, a.category_label(c), *v)?;
                    }
                }
            }
            TrendSeries::Numeric { mean, std } => {
                for (y, &year) in trend.years.iter().enumerate() {
                    row(year, "mean".into(), mean[y])?;
                    row(year, "std".into(), std[y])?;
                }
            }
        }
    }
    w.flush()?;
    rec.detail("individuals", cube.individuals.len());
    rec.detail("years", cube.years.len());
    rec.detail(
        "extrapolated_cells",
        cube.cells.iter().filter(|c| c.extrapolated).count(),
    );
    rec.finish()
}

fn write_panel(path: &Path, schema: &Schema, cube: &PanelCube) -> Result<()> {
    let mut w = csv_writer(path, &["individual_id", "year", "attribute", "category", "frequency"])?;
    for cell in &cube.cells {
        let year = year_label(schema, cube.years[cell.year]);
        for (name, m) in cube.preferences.iter().zip(&cell.marginals) {
            let a = schema.attribute(name)?;
            for (c, f) in m.iter().enumerate() {
                w.write_record([
                    cell.individual.to_string(),
                    year.clone(),
                    name.clone(),
                    a.category_label(c),
                    f.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn classify_movers(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new("classify-movers", cfg, seed, &out);
    let model = load_model(&mut rec, cfg)?;
    let schema = &model.schema;
    let records = load_records(&mut rec, cfg, schema)?;
    let base = base_population(
        schema,
        &records,
        cfg.panel.reference_year.as_ref(),
        cfg.panel.max_individuals,
    )?;
    let need = |v: &Option<serde_json::Value>, name: &str| -> Result<Value> {
        time_value(schema, v.as_ref().ok_or_else(|| anyhow!("`movers.{name}` is required"))?)
    };
    let years = vec![need(&cfg.movers.t_start, "t_start")?, need(&cfg.movers.t_end, "t_end")?];
    let external = external_table(&mut rec, cfg, schema, &base, &years)?;
    let subset = subset_or_preferences(schema, &cfg.movers.subset);
    if cfg.movers.r < cfg.movers.min_r {
        bail!("movers.r = {} is below movers.min_r = {}", cfg.movers.r, cfg.movers.min_r);
    }
    let cube = run_panel(&model, &base, &years, &external, cfg.movers.r, &subset, panel_seed(seed))?;
    let report = run_movers(&cube, 0, 1, cfg.movers.min_r)?;

    let mut w = csv_writer(&rec.output("movers.csv"), &["id", "distance", "group"])?;
    for (id, d) in &report.distances {
        w.write_record([id.to_string(), d.to_string(), report.group_of(*id).to_string()])?;
    }
    w.flush()?;

    let fast = group_marginals(schema, &base, &report.fast_ids)?;
    let slow = group_marginals(schema, &base, &report.slow_ids)?;
    let mut w = csv_writer(
        &rec.output("group_marginals.csv"),
        &["attribute", "category", "label", "f_fast", "f_slow", "rank_fast", "rank_slow"],
    )?;
    for (f, s) in fast.iter().zip(&slow) {
        let a = schema.attribute(&f.attribute)?;
        for c in 0..f.frequencies.len() {
            w.write_record([
                f.attribute.clone(),
                c.to_string(),
                a.category_label(c),
                f.frequencies[c].to_string(),
                s.frequencies[c].to_string(),
                f.ranks[c].to_string(),
                s.ranks[c].to_string(),
            ])?;
        }
    }
    w.flush()?;
    rec.detail("individuals", base.len());
    rec.detail("decile_size", report.fast_ids.len());
    rec.detail("decile_edges", [report.decile_edges.0, report.decile_edges.1]);
    rec.finish()
}

/// Entropy of every categorical preference and the mean of every numerical
/// one.
fn default_statistics(schema: &Schema) -> Vec<StatisticSpec> {
    schema
        .preference_indices()
        .into_iter()
        .map(|j| {
            let a = &schema.attributes[j];
            let (name, kind) = if a.is_numerical() {
                (format!("mean_{}", a.name), StatisticKind::Mean)
            } else {
                (
                    format!("entropy_{}", a.name),
                    StatisticKind::Dispersion {
                        mode: DispersionMode::Entropy,
                    },
                )
            };
            StatisticSpec {
                name,
                attribute: a.name.clone(),
                kind,
                cohort: vec![],
            }
        })
        .collect()
}

pub fn bootstrap(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let mut rec = Recorder::new("bootstrap", cfg, seed, &out);
    let schema = match &cfg.model {
        Some(_) => load_model(&mut rec, cfg)?.schema,
        None => {
            let path = cfg.require(&cfg.schema, "schema")?;
            rec.input(path)?;
            Schema::load(path)?
        }
    };
    let mut schema = schema;
    let records = load_records(&mut rec, cfg, &schema)?;
    if !schema.is_fitted() {
        schema.fit(&records)?;
    }
    let statistics = if cfg.bootstrap.statistics.is_empty() {
        default_statistics(&schema)
    } else {
        cfg.bootstrap.statistics.clone()
    };
    let bc = BootstrapConfig {
        replicates: cfg.bootstrap.replicates,
        draws_per_record: cfg.bootstrap.draws_per_record,
        statistics,
    };
    let summary = run_bootstrap(&records, &schema, &cfg.cvae, &bc, derive(seed, "bootstrap", 0))?;
    let mut w = csv_writer(
        &rec.output("bootstrap.csv"),
        &["statistic", "year", "source", "n", "mean", "std"],
    )?;
    for r in &summary.rows {
        let year = r
            .year
            .map_or_else(|| "all".to_string(), |y| year_label(&schema, time_from_f64(&schema, y)));
        w.write_record([
            r.statistic.clone(),
            year,
            r.source.clone(),
            r.n.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
        ])?;
    }
    w.flush()?;
    rec.detail("replicates", summary.replicates);
    rec.detail("diverged", &summary.diverged);
    rec.detail("statistics", &bc.statistics);
    rec.finish()
}

fn time_from_f64(schema: &Schema, y: f64) -> Value {
    match schema.time_index().map(|t| schema.attributes[t].is_numerical()) {
        Some(false) => Value::Cat(y as usize),
        _ => Value::Num(y),
    }
}

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use catrank::coherence::{rank_categories, read_ranking, score_categories, ScoreOptions};
use catrank::data::{
    load_features, load_votes, load_votes_interning, save_features_binary, save_features_text, save_json, sidecar_path,
    Dictionary, EntityGraph, FeatureMatrix,
};
use catrank::embed::{embed_corpus, generate_walks, Objective, SkipGramConfig, WalkConfig, WalkCorpus};
use catrank::eval::{best_cheating_score, confusing_pairs, evaluate, ConfusingPair, EvaluationReport};
use catrank::grid::{run_grid, FeatureInput, FeatureSource, GridVotes, Menu};
use catrank::metrics::{DistanceKernel, Metric};
use catrank::neighbors::{
    calibrate_threshold, knn_by_count, meta_path, neighbors_by_distance, CalibrationOptions, NeighborSet,
};
use catrank::report::{category_stats, distance_quantiles, quantiles_text, top_table, write_quantiles_csv};
use catrank::Error;
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{usage, CliResult};
use crate::inputs::{self, StoredCategories};

/// What a stage read and wrote, for its manifest.
pub struct Outcome {
    pub params: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub manifest: PathBuf,
    pub details: Value,
}

impl Outcome {
    fn new(params: &impl Serialize, manifest: PathBuf) -> Self {
        Self {
            params: serde_json::to_value(params).expect("arguments serialize"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            manifest,
            details: Value::Null,
        }
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
        let side = sidecar_path(path);
        if path.extension().is_some_and(|e| e == "bin") && side.exists() {
            self.inputs.push(side);
        }
    }

    fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }
}

/// `<out>.manifest.json` next to a single-file output.
fn manifest_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn save_features(path: &Path, ids: &Dictionary, m: &FeatureMatrix<impl catrank::Scalar>, out: &mut Outcome) -> CliResult<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        save_features_binary(path, ids.names(), m)?;
        out.output(path.to_owned());
        out.output(sidecar_path(path));
    } else {
        save_features_text(path, ids.names(), m)?;
        out.output(path.to_owned());
    }
    Ok(())
}

fn score_options(p: &ScoringParams) -> ScoreOptions {
    ScoreOptions {
        min_size: p.min_size,
        probability: p.probability,
        counting: p.counting,
    }
}

fn calibration_options(p: &CalibrationParams) -> CalibrationOptions {
    CalibrationOptions {
        exact_limit: p.calibration_exact_limit,
        sample_pairs: p.sample_pairs,
        seed: p.seed,
    }
}

pub fn dispatch(command: &Command, workers: usize) -> CliResult<Outcome> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Walk(a) => walk(a),
        Command::Embed(a) => embed(a, workers),
        Command::Knn(a) => knn(a),
        Command::Coherence(a) => coherence(a),
        Command::Rank(a) => rank(a),
        Command::Grid(a) => grid(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Report(a) => report(a),
    }
}

fn ingest(a: &IngestArgs) -> CliResult<Outcome> {
    ensure_dir(&a.out_dir)?;
    let mut out = Outcome::new(a, a.out_dir.join("manifest.json"));
    out.input(&a.graph);
    let g = inputs::graph(&a.graph, a.symmetrize)?;
    let graph_path = a.out_dir.join("graph.json");
    save_json(&graph_path, &g)?;
    out.output(graph_path);
    let mut details = json!({ "entities": g.n_entities(), "edges": g.n_edges() });

    if let Some(path) = &a.categories {
        out.input(path);
        let index = inputs::categories(path, g.ids())?;
        details["categories"] = json!(index.n_categories());
        let p = a.out_dir.join("categories.json");
        save_json(&p, &StoredCategories { entities: g.ids().clone(), index })?;
        out.output(p);
    }
    if let Some(path) = &a.features {
        out.input(path);
        let (_, raw) = inputs::features(path)?;
        if let Some(kind) = a.feature_kind {
            if raw.kind() != kind {
                return Err(Error::Incompatible(format!("{} holds {} features, not {kind}", path.display(), raw.kind())).into());
            }
        }
        let aligned = load_features::<f64>(path, raw.kind(), g.ids())?;
        details["features"] = json!({ "kind": aligned.kind(), "dim": aligned.dim() });
        let name = if path.extension().is_some_and(|e| e == "bin") { "features.bin" } else { "features.txt" };
        save_features(&a.out_dir.join(name), g.ids(), &aligned, &mut out)?;
    }
    out.details = details;
    Ok(out)
}

fn walk_config(p: &WalkParams, window: usize) -> WalkConfig {
    WalkConfig {
        walks_per_vertex: p.walks_per_vertex,
        walk_length: p.walk_length,
        window,
        seed: p.seed,
    }
}

fn walk(a: &WalkArgs) -> CliResult<Outcome> {
    ensure_parent(&a.out)?;
    let mut out = Outcome::new(a, manifest_for(&a.out));
    out.input(&a.graph);
    out.seed = Some(a.walk.seed);
    let g = inputs::graph(&a.graph, a.symmetrize)?;
    let cfg = walk_config(&a.walk, WalkConfig::default().window);
    let corpus = generate_walks(&g, &cfg)?;
    corpus.write_text(&a.out, g.ids())?;
    out.output(a.out.clone());
    out.details = serde_json::to_value(corpus.stats(cfg.walk_length)).map_err(Error::from)?;
    Ok(out)
}

fn embed(a: &EmbedArgs, workers: usize) -> CliResult<Outcome> {
    if !(a.final_learning_rate >= 0.0 && a.final_learning_rate <= a.learning_rate) {
        return Err(usage("--final-learning-rate must lie in [0, --learning-rate]"));
    }
    ensure_parent(&a.out)?;
    let mut out = Outcome::new(a, manifest_for(&a.out));
    out.input(&a.graph);
    out.seed = Some(a.walk.seed);
    let g: EntityGraph = inputs::graph(&a.graph, a.symmetrize)?;
    let walk_cfg = walk_config(&a.walk, a.window);
    let corpus = match &a.walks {
        Some(p) => {
            out.input(p);
            WalkCorpus::read_text(p, g.ids())?
        }
        None => generate_walks(&g, &walk_cfg)?,
    };
    if workers > 1 {
        info!("training with {workers} workers; results vary between runs");
    }
    let model_cfg = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        epochs: a.epochs,
        initial_lr: a.learning_rate,
        final_lr: a.final_learning_rate,
        objective: match a.negatives {
            0 => Objective::HierarchicalSoftmax,
            n => Objective::NegativeSampling { negatives: n },
        },
        workers,
        seed: a.walk.seed,
    };
    let (features, meta) = embed_corpus::<f32>(&corpus, g.n_entities(), &walk_cfg, &model_cfg)?;
    save_features(&a.out, g.ids(), &features, &mut out)?;
    out.details = serde_json::to_value(meta).map_err(Error::from)?;
    Ok(out)
}

fn knn(a: &KnnArgs) -> CliResult<Outcome> {
    ensure_parent(&a.out)?;
    let mut out = Outcome::new(a, manifest_for(&a.out));
    out.input(&a.features);
    let (ids, f) = inputs::features(&a.features)?;
    let kernel = DistanceKernel::new(Metric::from(a.metric), &f)?;
    let nb = if let Some(k) = a.k {
        knn_by_count(&kernel, k)?
    } else if let Some(target) = a.avg_neighbors {
        let cal = calibrate_threshold(&kernel, target, calibration_options(&a.calibration))?;
        if !cal.exact {
            out.seed = Some(a.calibration.seed);
        }
        info!("threshold {} for {target} neighbors on average", cal.threshold);
        neighbors_by_distance(&kernel, cal.threshold, Some(cal))?
    } else {
        let t = a.threshold.expect("closeness group is required");
        neighbors_by_distance(&kernel, t, None)?
    };
    nb.write_tsv(&a.out, &ids)?;
    out.output(a.out.clone());
    out.output(meta_path(&a.out));
    out.details = json!({ "relations": nb.n_relations(), "mean_degree": nb.mean_degree(), "meta": nb.meta() });
    Ok(out)
}

fn neighbor_inputs(
    neighbors: &Path,
    categories: &Path,
    out: &mut Outcome,
) -> CliResult<(NeighborSet<f64>, catrank::data::CategoryIndex)> {
    out.input(neighbors);
    out.input(categories);
    let meta = meta_path(neighbors);
    if meta.exists() {
        out.inputs.push(meta);
    }
    let (ids, nb) = NeighborSet::<f64>::read_tsv(neighbors)?;
    let cats = inputs::categories(categories, &ids)?;
    Ok((nb, cats))
}

fn coherence(a: &ScoreArgs) -> CliResult<Outcome> {
    ensure_parent(&a.out)?;
    let mut out = Outcome::new(a, manifest_for(&a.out));
    let (nb, cats) = neighbor_inputs(&a.neighbors, &a.categories, &mut out)?;
    let (mut scores, skipped) = score_categories(&nb, &cats, &score_options(&a.scoring))?;
    scores.sort_by_key(|s| s.category);
    let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
    w.write_record([
        "category",
        "n_members",
        "conductance",
        "log_surprise",
        "surprise",
        "n_observers_used",
        "inside_relations",
        "member_relations",
    ])
    .map_err(Error::from)?;
    for s in &scores {
        w.write_record([
            cats.names().name(s.category).to_owned(),
            s.n_members.to_string(),
            s.conductance.map(|c| c.to_string()).unwrap_or_default(),
            s.log_surprise.to_string(),
            s.surprise.to_string(),
            s.n_observers_used.to_string(),
            s.inside_relations.to_string(),
            s.member_relations.to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    out.output(a.out.clone());
    out.details = json!({ "scored": scores.len(), "skipped": skipped });
    Ok(out)
}

fn rank(a: &RankArgs) -> CliResult<Outcome> {
    ensure_parent(&a.out)?;
    let mut out = Outcome::new(a, manifest_for(&a.out));
    let (nb, cats) = neighbor_inputs(&a.neighbors, &a.categories, &mut out)?;
    let ranking = rank_categories(&nb, &cats, a.criterion, &score_options(&a.scoring))?;
    ranking.write_csv(&a.out, cats.names())?;
    out.output(a.out.clone());
    out.details = json!({ "ranked": ranking.len(), "skipped": ranking.skipped });
    Ok(out)
}

fn grid(a: &GridArgs) -> CliResult<Outcome> {
    ensure_dir(&a.out_dir)?;
    let mut out = Outcome::new(a, a.out_dir.join("manifest.json"));
    let mut sources: Vec<(FeatureSource, FeatureMatrix<f64>)> = Vec::new();
    let mut ids: Option<Dictionary> = None;
    for (source, path) in [(FeatureSource::Ingested, &a.features), (FeatureSource::TrainedEmbedding, &a.embedding)] {
        let Some(path) = path else { continue };
        out.input(path);
        let (own_ids, m) = inputs::features(path)?;
        match &ids {
            None => {
                ids = Some(own_ids);
                sources.push((source, m));
            }
            Some(universe) => sources.push((source, load_features::<f64>(path, m.kind(), universe)?)),
        }
    }
    let ids = ids.ok_or_else(|| usage("grid needs --features or --embedding"))?;
    out.input(&a.categories);
    let cats = inputs::categories(&a.categories, &ids)?;

    let mut names = cats.names().clone();
    let votes = match &a.votes {
        Some(p) => {
            out.input(p);
            let v = load_votes_interning(p, &mut names)?;
            if names.len() > cats.n_categories() {
                warn!(
                    "{} vote categories are not in {}; they rank after every scored category",
                    names.len() - cats.n_categories(),
                    a.categories.display()
                );
            }
            Some(v)
        }
        None => None,
    };
    let cheating = votes.as_ref().map(|v| best_cheating_score(v, a.cheating.exact_limit));
    let grid_votes = votes.as_ref().zip(cheating.as_ref()).map(|(votes, cheating)| GridVotes {
        votes,
        cheating,
        fallback: a.cheating.fallback,
    });

    let menu = Menu {
        metrics: a.metrics.clone(),
        strategies: a.closeness.clone(),
        sizes: a.k.clone(),
        criteria: a.criteria.clone(),
    };
    let feature_inputs: Vec<FeatureInput<'_, f64>> = sources
        .iter()
        .map(|(source, features)| FeatureInput { source: *source, features })
        .collect();
    let calibration = calibration_options(&a.calibration);
    if menu.strategies.contains(&catrank::grid::ClosenessStrategy::Distance) {
        out.seed = Some(a.calibration.seed);
    }
    let result = run_grid(&feature_inputs, &cats, &menu, &score_options(&a.scoring), calibration, grid_votes)?;

    let summary_csv = a.out_dir.join("summary.csv");
    result.write_summary_csv(&summary_csv)?;
    out.output(summary_csv);
    let summary_json = a.out_dir.join("summary.json");
    save_json(
        &summary_json,
        &json!({
            "configs": result.rows,
            "cheating": cheating.as_ref().map(|c| cheating_json(c, &names)),
        }),
    )?;
    out.output(summary_json);
    if a.write_rankings {
        let dir = a.out_dir.join("rankings");
        ensure_dir(&dir)?;
        for (row, ranking) in result.rows.iter().zip(&result.rankings) {
            let p = dir.join(format!("{}.csv", row.config.label()));
            ranking.write_csv(&p, cats.names())?;
            out.output(p);
        }
    }
    out.details = json!({ "configs": result.rows.len() });
    Ok(out)
}

fn cheating_json(c: &catrank::eval::CheatingScore, names: &Dictionary) -> Value {
    json!({
        "score": c.score,
        "exact": c.exact,
        "ordering": c.ordering.iter().map(|&i| names.name(i)).collect::<Vec<_>>(),
    })
}

#[derive(Serialize)]
struct EvaluationOutput<'a> {
    report: &'a EvaluationReport,
    cheating: Value,
    confusing_pairs: Vec<ConfusingPair>,
}

fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<Outcome> {
    ensure_parent(&a.out)?;
    let mut out = Outcome::new(a, manifest_for(&a.out));
    out.input(&a.ranking);
    out.input(&a.votes);
    let (names, ranking, votes) = match &a.categories {
        Some(path) => {
            out.input(path);
            let entities = inputs::category_entities(path)?;
            let universe = inputs::categories(path, &entities)?.names().clone();
            let mut names = universe.clone();
            let ranking = read_ranking(&a.ranking, &mut names)?;
            if names.len() > universe.len() {
                return Err(Error::Incompatible(format!(
                    "{} ranks categories absent from {}, e.g. {:?}",
                    a.ranking.display(),
                    path.display(),
                    names.name(universe.len())
                ))
                .into());
            }
            let votes = load_votes(&a.votes, &names)?;
            (names, ranking, votes)
        }
        None => {
            let mut names = Dictionary::new();
            let ranking = read_ranking(&a.ranking, &mut names)?;
            let votes = load_votes_interning(&a.votes, &mut names)?;
            (names, ranking, votes)
        }
    };
    let cheating = best_cheating_score(&votes, a.cheating.exact_limit);
    let report = evaluate(&votes, &ranking.order(), a.cheating.fallback, &cheating)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    let table = report.to_table();
    print!("{table}");
    save_json(
        &a.out,
        &EvaluationOutput {
            report: &report,
            cheating: cheating_json(&cheating, &names),
            confusing_pairs: confusing_pairs(&votes, &names, a.confusing),
        },
    )?;
    out.output(a.out.clone());
    let table_path = a.out.with_extension("txt");
    write_text(&table_path, &table)?;
    out.output(table_path);
    out.details = json!({
        "rough_accuracy": report.rough_accuracy,
        "improved_accuracy": report.improved_accuracy,
    });
    Ok(out)
}

fn report(a: &ReportArgs) -> CliResult<Outcome> {
    if a.categories.is_none() && a.features.is_none() && a.ranking.is_none() {
        return Err(usage("report needs at least one of --categories, --features, --ranking"));
    }
    ensure_dir(&a.out_dir)?;
    let mut out = Outcome::new(a, a.out_dir.join("manifest.json"));
    let mut text = String::new();

    if let Some(path) = &a.categories {
        out.input(path);
        let entities = match &a.graph {
            Some(g) => {
                out.input(g);
                inputs::graph(g, false)?.ids().clone()
            }
            None => inputs::category_entities(path)?,
        };
        let cats = inputs::categories(path, &entities)?;
        let subset = match &a.subset {
            Some(p) => {
                out.input(p);
                let mut known = Vec::new();
                let mut unknown = 0;
                for name in inputs::name_list(p)? {
                    match entities.get(&name) {
                        Some(e) => known.push(e),
                        None => unknown += 1,
                    }
                }
                if unknown > 0 {
                    warn!("{}: {unknown} subset entities are unknown and ignored", p.display());
                }
                Some(known)
            }
            None => None,
        };
        let stats = category_stats(&cats, subset.as_deref(), a.bucket_width)?;
        let csv = a.out_dir.join("category_stats.csv");
        stats.write_csv(&csv)?;
        out.output(csv);
        let js = a.out_dir.join("category_stats.json");
        save_json(&js, &stats)?;
        out.output(js);
        text.push_str("# categories per entity\n");
        text.push_str(&stats.to_text());
    }

    if let Some(path) = &a.features {
        out.input(path);
        let (_, f) = inputs::features(path)?;
        let kernel = DistanceKernel::new(Metric::from(a.metric), &f)?;
        let rows = distance_quantiles(&kernel, &a.targets, calibration_options(&a.calibration))?;
        if rows.iter().any(|r| !r.exact) {
            out.seed = Some(a.calibration.seed);
        }
        let csv = a.out_dir.join("quantiles.csv");
        write_quantiles_csv(&rows, &csv)?;
        out.output(csv);
        text.push_str(&format!("# {} distance by target neighbor count\n", a.metric));
        text.push_str(&quantiles_text(&rows));
    }

    if let Some(path) = &a.ranking {
        out.input(path);
        let mut names = Dictionary::new();
        let ranking = read_ranking(path, &mut names)?;
        let table = top_table(&ranking, &names, a.top)?;
        let csv = a.out_dir.join("top.csv");
        table.write_csv(&csv)?;
        out.output(csv);
        let txt = a.out_dir.join("top.txt");
        write_text(&txt, &table.to_text())?;
        out.output(txt);
        text.push_str(&format!("# top {} categories ({})\n", table.rows.len(), table.criterion));
        text.push_str(&table.to_text());
    }

    let report_txt = a.out_dir.join("report.txt");
    write_text(&report_txt, &text)?;
    out.output(report_txt);
    print!("{text}");
    Ok(out)
}

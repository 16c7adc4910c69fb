use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use ubench_core::advisor::{
    advise, build_groups, evaluate_with, train_ranker, Advice, Constraints, DatasetFeatures,
    RankingGroup,
};
use ubench_core::mask::{characterize_dataset, CharacterizeConfig};
use ubench_core::registry::{
    parse_dataset_cards, parse_model_cards, parse_traits, parse_transfer_pairs, DatasetTraits,
    Scope, Snapshot,
};
use ubench_core::report::emit_report;
use ubench_core::stats::{significance_matrix, TierLegend};
use ubench_core::uscore::{
    build_leaderboard, family_aggregate, score_registry, year_trend, year_trend_csv, BandSource,
    BandTable, MetricTable, ScoreTable,
};
use ubench_core::{
    GrayImage, LabelKind, Mask, Query, RankerModel, Registry, ReportFormat, TrainConfig,
    UScoreConfig,
};

use crate::api::{serve, ServiceState};
use crate::args::*;
use crate::output::{emit, json_bytes, write_atomic};
use crate::{usage, CliError};

type CmdResult = Result<(), CliError>;

pub fn dispatch(command: Command, stdout: &mut dyn Write) -> CmdResult {
    match command {
        Command::Ingest(a) => ingest(a, stdout),
        Command::Characterize(a) => characterize(a, stdout),
        Command::Score(a) => score(a, stdout),
        Command::Significance(a) => significance(a, stdout),
        Command::Leaderboard(a) => leaderboard(a, stdout),
        Command::AdvisorTrain(a) => advisor_train(a, stdout),
        Command::AdvisorEval(a) => advisor_eval(a, stdout),
        Command::Advise(a) => advise_cmd(a, stdout),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_registry(dir: &Path) -> anyhow::Result<Snapshot> {
    Snapshot::load_dir(dir).with_context(|| format!("loading registry {}", dir.display()))
}

fn band_source(path: Option<&Path>) -> anyhow::Result<BandSource> {
    Ok(match path {
        Some(p) => BandSource::Override(
            BandTable::from_csv(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        ),
        None => BandSource::Recomputed,
    })
}

fn scores_for(registry: &Registry, scope: Scope, bands: &BandSource) -> anyhow::Result<ScoreTable> {
    score_registry(registry, scope, bands, &UScoreConfig::default())
        .with_context(|| format!("scoring {scope} records"))
}

/// Explicit file flag, else the conventional name inside `--from`.
fn pick(explicit: &Option<PathBuf>, from: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| from.as_ref().map(|d| d.join(name)).filter(|p| p.exists()))
}

fn write_registry(registry: &Registry, dir: &Path) -> anyhow::Result<usize> {
    let mut written = 0;
    for (name, bytes) in registry.to_files() {
        let path = dir.join(name);
        if write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))? {
            written += 1;
        }
    }
    Ok(written)
}

fn ingest(a: IngestArgs, stdout: &mut dyn Write) -> CmdResult {
    let Some(models) = pick(&a.models, &a.from, "models.json") else {
        return usage("no model cards: pass --models or --from DIR containing models.json");
    };
    let Some(datasets) = pick(&a.datasets, &a.from, "datasets.json") else {
        return usage("no dataset cards: pass --datasets or --from DIR containing datasets.json");
    };
    let models = parse_model_cards(&read(&models)?).with_context(|| models.display().to_string())?;
    let datasets =
        parse_dataset_cards(&read(&datasets)?).with_context(|| datasets.display().to_string())?;
    let mut reg = Registry::new(models, datasets).map_err(anyhow::Error::from)?;
    if let Some(p) = pick(&a.transfers, &a.from, "transfers.csv") {
        let pairs = parse_transfer_pairs(&read(&p)?).with_context(|| p.display().to_string())?;
        reg = reg.with_transfers(&pairs).map_err(anyhow::Error::from)?;
    }
    if let Some(p) = pick(&a.traits, &a.from, "traits.json") {
        let traits = parse_traits(&read(&p)?).with_context(|| p.display().to_string())?;
        reg = reg.with_traits(traits).map_err(anyhow::Error::from)?;
    }
    let samples = pick(&a.records, &a.from, "records.csv").map(|p| read(&p)).transpose()?;
    let means = pick(&a.means, &a.from, "means.csv").map(|p| read(&p)).transpose()?;
    if samples.is_some() || means.is_some() {
        reg = reg
            .ingest_records(samples.as_deref(), means.as_deref())
            .context("ingesting records")?;
    }
    let snap = Snapshot::new(reg);
    let written = write_registry(snap.registry(), &a.out)?;
    log::info!("{written} registry file(s) updated in {}", a.out.display());
    writeln!(
        stdout,
        "{}  models={} datasets={} records={} transfers={}",
        snap.digest(),
        snap.models.len(),
        snap.datasets.len(),
        snap.records.len(),
        snap.transfers.len()
    )
    .context("writing to stdout")?;
    Ok(())
}

fn png_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn characterize(a: CharacterizeArgs, stdout: &mut dyn Write) -> CmdResult {
    let masks = png_files(&a.masks)?;
    if masks.is_empty() {
        return Err(anyhow!("no PNG masks in {}", a.masks.display()).into());
    }
    let mut samples = Vec::with_capacity(masks.len());
    let mut names = Vec::with_capacity(masks.len());
    for m in &masks {
        let name = m.file_name().expect("listed file").to_owned();
        let img_path = a.images.join(&name);
        let mask = Mask::load_png(m).with_context(|| m.display().to_string())?;
        let image = GrayImage::load_png(&img_path).with_context(|| img_path.display().to_string())?;
        names.push(name.to_string_lossy().into_owned());
        samples.push((mask, image));
    }
    let cfg = CharacterizeConfig {
        ring_radius: a.ring_radius,
        band_width: a.band_width,
        ..CharacterizeConfig::default()
    };
    let profile = characterize_dataset(&samples, &cfg).context("characterizing masks")?;
    let features = a.modality.map(|modality| DatasetFeatures {
        modality,
        scale: profile.scale_label,
        shape: profile.shape_label,
        boundary: profile.boundary_label,
    });
    let doc = serde_json::json!({
        "dataset": a.dataset,
        "samples": names,
        "features": features,
        "profile": profile,
    });
    emit(a.out.as_deref(), &json_bytes(&doc), stdout)?;

    if let (Some(dir), Some(dataset)) = (&a.registry, &a.dataset) {
        let snap = load_registry(dir)?;
        let traits = DatasetTraits {
            dataset: dataset.clone(),
            scale: profile.scale_label,
            shape: profile.shape_label,
            boundary: profile.boundary_label,
        };
        let updated = snap
            .registry()
            .with_traits(vec![traits])
            .map_err(anyhow::Error::from)?;
        write_registry(&updated, dir)?;
    }
    Ok(())
}

fn table_format(format: ReportFormat, what: &str) -> CmdResult {
    if format == ReportFormat::Md {
        return usage(format!("{what} supports --format csv or json"));
    }
    Ok(())
}

fn score(a: ScoreArgs, stdout: &mut dyn Write) -> CmdResult {
    table_format(a.format, "score")?;
    let snap = load_registry(&a.registry)?;
    let table = scores_for(&snap, a.scope, &band_source(a.bands.as_deref())?)?;
    let bytes = match a.format {
        ReportFormat::Json => json_bytes(&table),
        _ => table.to_csv(),
    };
    emit(a.out.as_deref(), &bytes, stdout)?;
    Ok(())
}

fn significance(a: SignificanceArgs, stdout: &mut dyn Write) -> CmdResult {
    table_format(a.format, "significance")?;
    let snap = load_registry(&a.registry)?;
    let m = significance_matrix(&snap, &a.baseline, a.scope, &TierLegend::default())
        .map_err(anyhow::Error::from)?;
    let bytes = match a.format {
        ReportFormat::Json => json_bytes(&m),
        _ => m.to_csv(),
    };
    emit(a.out.as_deref(), &bytes, stdout)?;
    Ok(())
}

fn leaderboard(a: LeaderboardArgs, stdout: &mut dyn Write) -> CmdResult {
    let metric = match a.metric {
        LeaderboardMetric::Iou => "iou",
        LeaderboardMetric::Uscore => "uscore",
    };
    let mut tiers = None;
    let mut cards = None;
    let table = if let Some(path) = &a.table {
        MetricTable::from_wide_csv(metric, &read(path)?)
            .with_context(|| format!("parsing {}", path.display()))?
    } else {
        let dir = a.registry.as_ref().expect("clap enforces one input");
        let snap = load_registry(dir)?;
        let baseline = a.baseline.clone().unwrap_or_else(|| "U-Net".to_string());
        if a.baseline.is_some() || snap.model(&baseline).is_some() {
            let m = significance_matrix(&snap, &baseline, a.scope, &TierLegend::default())
                .map_err(anyhow::Error::from)?;
            tiers = Some(m.by_model());
        }
        let table = match a.metric {
            LeaderboardMetric::Iou => MetricTable::from_mean_ious(&snap, a.scope),
            LeaderboardMetric::Uscore => MetricTable::from_scores(&scores_for(
                &snap,
                a.scope,
                &band_source(a.bands.as_deref())?,
            )?),
        };
        cards = Some(snap.models.clone());
        table
    };
    let board = build_leaderboard(&table, tiers.as_ref());
    let bytes = emit_report(&board, a.format).map_err(anyhow::Error::from)?;
    emit(a.out.as_deref(), &bytes, stdout)?;

    if let (Some(path), Some(cards)) = (&a.year_trend, &cards) {
        emit(Some(path), &year_trend_csv(&year_trend(&table, cards)), stdout)?;
    }
    if let (Some(path), Some(cards)) = (&a.families, &cards) {
        let mut csv = String::from("family,value\n");
        for (family, v) in family_aggregate(&table, cards) {
            let _ = writeln!(csv, "{family},{v:.2}");
        }
        emit(Some(path), csv.as_bytes(), stdout)?;
    }
    Ok(())
}

fn groups_for(
    registry: &Registry,
    kind: LabelKind,
    bands: &BandSource,
) -> anyhow::Result<Vec<RankingGroup>> {
    let scores = match kind {
        LabelKind::Uscore => Some(scores_for(registry, Scope::InDomain, bands)?),
        LabelKind::Iou => None,
    };
    build_groups(registry, kind, scores.as_ref()).context("building ranking groups")
}

fn advisor_train(a: TrainArgs, stdout: &mut dyn Write) -> CmdResult {
    let snap = load_registry(&a.registry)?;
    let groups = groups_for(&snap, a.label, &band_source(a.bands.as_deref())?)?;
    for h in &a.holdout {
        if !groups.iter().any(|g| &g.dataset == h) {
            return Err(anyhow!("--holdout names `{h}`, which has no ranking group").into());
        }
    }
    let train: Vec<RankingGroup> = groups
        .into_iter()
        .filter(|g| !a.holdout.contains(&g.dataset))
        .collect();
    let cfg = TrainConfig {
        rounds: a.rounds,
        max_depth: a.max_depth,
        learning_rate: a.learning_rate,
        min_leaf: a.min_leaf,
        lambda: a.lambda,
        subsample: a.subsample,
        seed: a.seed,
    };
    let model = train_ranker(&train, a.label, &cfg).context("training ranker")?;
    log::info!(
        "{} trees over {} groups, final loss {:?}",
        model.trees.len(),
        train.len(),
        model.loss_history.last()
    );
    emit(Some(&a.out), &model.to_json(), stdout)?;
    Ok(())
}

fn load_ranker(path: &Path) -> anyhow::Result<RankerModel> {
    RankerModel::from_json(&read(path)?).with_context(|| format!("loading ranker {}", path.display()))
}

fn advisor_eval(a: EvalArgs, stdout: &mut dyn Write) -> CmdResult {
    if a.k.is_empty() || a.k.contains(&0) {
        return usage("--k needs positive cutoffs");
    }
    let snap = load_registry(&a.registry)?;
    let model = load_ranker(&a.ranker)?;
    let groups = groups_for(&snap, model.label_kind, &band_source(a.bands.as_deref())?)?;
    let held: Vec<RankingGroup> = groups
        .into_iter()
        .filter(|g| !model.train_groups.contains(&g.dataset))
        .collect();
    let eval = evaluate_with(&model, &held, &a.k, a.relevant_at).context("evaluating ranker")?;
    emit(a.out.as_deref(), &json_bytes(&eval), stdout)?;
    Ok(())
}

fn query_from(a: &AdviseArgs, label_kind: LabelKind) -> Result<Query, CliError> {
    if let Some(path) = &a.query {
        let mut q: Query = serde_json::from_slice(&read(path)?)
            .with_context(|| format!("parsing query {}", path.display()))?;
        // Flags refine a query document.
        q.constraints.storage = a.storage.or(q.constraints.storage);
        q.constraints.compute = a.compute.or(q.constraints.compute);
        q.constraints.speed = a.speed.or(q.constraints.speed);
        q.k = a.k.or(q.k);
        return Ok(q);
    }
    let (Some(modality), Some(scale), Some(shape), Some(boundary)) =
        (a.modality, a.scale, a.shape, a.boundary)
    else {
        return usage("advise needs --query or all of --modality, --scale, --shape, --boundary");
    };
    Ok(Query {
        modality,
        scale,
        shape,
        boundary,
        constraints: Constraints {
            storage: a.storage,
            compute: a.compute,
            speed: a.speed,
        },
        k: a.k,
        label_kind,
    })
}

fn advice_table(advice: &Advice, format: ReportFormat) -> Vec<u8> {
    let mut s = String::new();
    let md = format == ReportFormat::Md;
    if md {
        s.push_str("| rank | model | family | score | storage | compute | speed | mean U |\n");
        s.push_str("|---:|---|---|---:|---|---|---|---:|\n");
    } else {
        s.push_str("rank,model,family,score,storage,compute,speed,mean_u\n");
    }
    for e in &advice.entries {
        let u = e.uscore.as_ref().map(|u| format!("{:.4}", u.u)).unwrap_or_default();
        let cells = [
            e.rank.to_string(),
            e.model.clone(),
            e.family.to_string(),
            format!("{:.6}", e.score),
            e.bins.storage.to_string(),
            e.bins.compute.to_string(),
            e.bins.speed.to_string(),
            u,
        ];
        if md {
            let _ = writeln!(s, "| {} |", cells.join(" | "));
        } else {
            let _ = writeln!(s, "{}", cells.join(","));
        }
    }
    if md {
        if let Some(b) = &advice.binding_constraint {
            let _ = writeln!(s, "\nNo model satisfies the constraints; binding constraint: {b}");
        }
    }
    s.into_bytes()
}

fn advise_cmd(a: AdviseArgs, stdout: &mut dyn Write) -> CmdResult {
    let snap = load_registry(&a.registry)?;
    let ranker = load_ranker(&a.ranker)?;
    let query = query_from(&a, ranker.label_kind)?;
    let bands = band_source(a.bands.as_deref())?;
    let scores = if snap.records_in(Scope::InDomain).next().is_some() {
        Some(scores_for(&snap, Scope::InDomain, &bands)?)
    } else {
        None
    };
    let advice = advise(&snap, &ranker, scores.as_ref(), &query).context("advising")?;
    if let Some(b) = &advice.binding_constraint {
        log::warn!("no model survives the constraints ({b})");
    }
    let bytes = match a.format {
        ReportFormat::Json => json_bytes(&advice),
        f => advice_table(&advice, f),
    };
    emit(a.out.as_deref(), &bytes, stdout)?;
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> CmdResult {
    let snap = load_registry(&a.registry)?;
    let rankers = a
        .ranker
        .iter()
        .map(|p| load_ranker(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut state = ServiceState::new(snap, rankers, &band_source(a.bands.as_deref())?, a.baseline)?;
    if let Some(dir) = &a.tables {
        state = state.with_tables_dir(dir)?;
    }
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    rt.block_on(serve(state, &addr))?;
    Ok(())
}

use std::io::Write as _;
use std::path::{Path, PathBuf};

use assortify::demand::{
    apply_trend, fit_als, impute, read_model, write_model, AlsConfig, DemandMatrix, FactorModel, Provenance,
};
use assortify::domain::Catalog;
use assortify::ingest::{
    demo_bundle, generate_synthetic, load_bundle, parse_fabrics, parse_products, write_bundle, BundlePaths,
    DatasetBundle, FabricPopulation, SyntheticConfig,
};
use assortify::optimizer::{
    even_grid, fabric_composition, histogram, optimize_with_scales, pareto_front, FrontMember, Locks, ParetoFront,
    StoreInstance,
};
use assortify::sustainability::{assortment_higg_score, score_catalog, ProductHiggScore};
use assortify_service::{router, Service, SessionState};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::FileConfig;
use crate::output::{file_stem, write_csv, write_json};
use crate::{AlsArgs, Failure, FitArgs, GenerateArgs, InputArgs, ParetoArgs, ScoreArgs, ServeArgs};

const DEFAULT_K: usize = 10;
const DEFAULT_GRID_POINTS: usize = 101;
const DEFAULT_BINS: usize = 20;
const DEFAULT_ADDR: &str = "127.0.0.1:8080";
const DEFAULT_COMPOSITION_LAMBDAS: [f64; 3] = [0.0, 0.5, 1.0];

fn out_dir(arg: &Option<PathBuf>, file: &FileConfig) -> Result<PathBuf, Failure> {
    arg.clone()
        .or_else(|| file.out_dir.clone())
        .ok_or_else(|| Failure::input("InvalidConfig", "an output directory is required (--out)"))
}

fn bundle_paths(input: &InputArgs, file: &FileConfig) -> Result<BundlePaths, Failure> {
    let dir = input.data.clone().or_else(|| file.data_dir.clone());
    let pick = |flag: &Option<PathBuf>, conf: &Option<PathBuf>, name: &str| {
        flag.clone()
            .or_else(|| conf.clone())
            .or_else(|| dir.as_ref().map(|d| d.join(name)))
            .ok_or_else(|| Failure::input("InvalidConfig", format!("no path for {name}; pass --data or the file flag")))
    };
    Ok(BundlePaths {
        fabrics: pick(&input.fabrics, &file.fabrics, assortify::ingest::FABRICS_FILE)?,
        stores: pick(&input.stores, &file.stores, assortify::ingest::STORES_FILE)?,
        products: pick(&input.products, &file.products, assortify::ingest::PRODUCTS_FILE)?,
        sales: pick(&input.sales, &file.sales, assortify::ingest::SALES_FILE)?,
    })
}

fn als_config(args: &AlsArgs, file: &FileConfig) -> Result<AlsConfig, Failure> {
    let d = AlsConfig::default();
    let config = AlsConfig {
        rank: args.rank.or(file.rank).unwrap_or(d.rank),
        reg_lambda: args.reg_lambda.or(file.reg_lambda).unwrap_or(d.reg_lambda),
        n_iterations: args.n_iterations.or(file.n_iterations).unwrap_or(d.n_iterations),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        init_scale: args.init_scale.or(file.init_scale).unwrap_or(d.init_scale),
        convergence_tol: args.convergence_tol.or(file.convergence_tol).unwrap_or(d.convergence_tol),
    };
    config.validate()?;
    Ok(config)
}

fn trend(arg: Option<f64>, file: &FileConfig) -> f64 {
    arg.or(file.trend_scalar).unwrap_or(1.0)
}

fn stdout_line(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn populations(raw: &[String]) -> Result<Vec<FabricPopulation>, Failure> {
    raw.iter()
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let bad = || Failure::input("InvalidConfig", format!("population `{item}` is not fabric:index:share"));
            match parts.as_slice() {
                [fabric, index, share] => Ok(FabricPopulation::new(
                    fabric,
                    index.parse().map_err(|_| bad())?,
                    share.parse().map_err(|_| bad())?,
                )),
                _ => Err(bad()),
            }
        })
        .collect()
}

pub fn generate(args: &GenerateArgs, file: &FileConfig) -> Result<(), Failure> {
    let out = out_dir(&args.out, file)?;
    let g = &file.generator;
    let preset = args.preset.clone().or_else(|| g.preset.clone()).unwrap_or_else(|| "default".into());
    let bundle = match preset.as_str() {
        "demo" => demo_bundle(),
        "default" | "three-peak" => {
            let mut config = if preset == "three-peak" {
                SyntheticConfig::three_peak(1600, 3, SyntheticConfig::default().seed)
            } else {
                SyntheticConfig::default()
            };
            if let Some(v) = args.seed.or(file.seed) {
                config.seed = v;
            }
            if let Some(v) = args.n_products.or(g.n_products) {
                config.n_products = v;
            }
            if let Some(v) = args.n_stores.or(g.n_stores) {
                config.n_stores = v;
            }
            if let Some(v) = args.rank.or(g.rank) {
                config.rank = v;
            }
            if let Some(v) = args.noise_sigma.or(g.noise_sigma) {
                config.noise_sigma = v;
            }
            if let Some(v) = args.density.or(g.density) {
                config.density = v;
            }
            if let Some(v) = args.weight_min_kg.or(g.weight_min_kg) {
                config.weight_range_kg.0 = v;
            }
            if let Some(v) = args.weight_max_kg.or(g.weight_max_kg) {
                config.weight_range_kg.1 = v;
            }
            match (&args.populations, &g.populations) {
                (Some(raw), _) => config.fabric_populations = populations(raw)?,
                (None, Some(p)) => config.fabric_populations = p.clone(),
                _ => {}
            }
            generate_synthetic(&config)?
        }
        other => return Err(Failure::input("InvalidConfig", format!("unknown preset `{other}`"))),
    };
    write_bundle(&bundle, &out)?;
    stdout_line(&format!(
        "wrote {} products, {} stores, {} sales rows to {}",
        bundle.catalog.n_products(),
        bundle.catalog.n_stores(),
        bundle.sales.len(),
        out.display()
    ));
    Ok(())
}

pub fn score(args: &ScoreArgs, file: &FileConfig) -> Result<(), Failure> {
    let paths = bundle_paths(&args.input, file)?;
    let out = out_dir(&args.out, file)?;
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let table = parse_fabrics(&paths.fabrics)?;
    let products = parse_products(&paths.products, &table)?;
    if products.is_empty() {
        return Err(Failure::input("EmptyCatalog", format!("{} has no products", paths.products.display())));
    }
    let catalog = Catalog::new(products, Vec::new(), table);
    let scores = score_catalog(&catalog)?;
    write_csv(
        &out.join("higg_scores.csv"),
        &["product_id", "weight_kg", "higg_score"],
        catalog
            .products()
            .iter()
            .zip(&scores)
            .map(|(p, s)| vec![p.id.clone(), p.weight_kg.to_string(), s.score.to_string()]),
    )?;
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let bins = histogram(&values, bins)?;
    write_csv(
        &out.join("higg_histogram.csv"),
        &["bin", "lower", "upper", "count"],
        bins.iter()
            .enumerate()
            .map(|(i, b)| vec![i.to_string(), b.lower.to_string(), b.upper.to_string(), b.count.to_string()]),
    )?;
    stdout_line(&format!(
        "scored {} products, mean higg score {}",
        scores.len(),
        assortment_higg_score(&scores)?
    ));
    Ok(())
}

fn demand_rows(catalog: &Catalog, demand: &DemandMatrix) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(demand.n_products() * demand.n_stores());
    for (j, p) in catalog.products().iter().enumerate() {
        for (s, store) in catalog.stores().iter().enumerate() {
            let provenance = match demand.provenance(j, s) {
                Provenance::Observed => "observed",
                Provenance::Imputed => "imputed",
            };
            rows.push(vec![p.id.clone(), store.id.clone(), demand.get(j, s).to_string(), provenance.into()]);
        }
    }
    rows
}

#[derive(Serialize)]
struct HoldoutReport {
    fraction: f64,
    n_held_out: usize,
    rmse: f64,
    relative_rmse: f64,
}

#[derive(Serialize)]
struct FitReport {
    rank: usize,
    reg_lambda: f64,
    seed: u64,
    iterations: usize,
    final_loss: f64,
    n_observed: usize,
    n_training: usize,
    train_rmse: f64,
    train_max_abs_error: f64,
    trend_scalar: f64,
    holdout: Option<HoldoutReport>,
}

/// RMSE and max absolute error; `clamp` scores the non-negative predictions used for imputation.
fn residuals(model: &FactorModel, observed: &[assortify::demand::Observation], clamp: bool) -> (f64, f64) {
    if observed.is_empty() {
        return (0.0, 0.0);
    }
    let errors: Vec<f64> = observed
        .iter()
        .map(|o| {
            let p = model.predict(o.product, o.store);
            (if clamp { p.max(0.0) } else { p }) - o.value
        })
        .collect();
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    let max = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    (rmse, max)
}

pub fn fit(args: &FitArgs, file: &FileConfig) -> Result<(), Failure> {
    let paths = bundle_paths(&args.input, file)?;
    let out = out_dir(&args.out, file)?;
    let config = als_config(&args.als, file)?;
    let trend_scalar = trend(args.als.trend_scalar, file);
    let bundle = load_bundle(&paths)?;

    let holdout_fraction = args.holdout.or(file.holdout);
    let (train, held_out) = match holdout_fraction {
        Some(f) => bundle.sales.split_holdout(f, config.seed)?,
        None => (bundle.sales.clone(), Vec::new()),
    };
    tracing::info!(observations = train.len(), rank = config.rank, "fitting demand model");
    let model = fit_als(&train, &config)?;
    let demand = apply_trend(&impute(&model, &bundle.sales)?, trend_scalar)?;

    write_model(&model, &out.join("model.txt"))?;
    write_csv(
        &out.join("loss_history.csv"),
        &["iteration", "loss"],
        model.loss_history.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]),
    )?;
    write_csv(&out.join("demand.csv"), &["product_id", "store_id", "demand", "provenance"], demand_rows(&bundle.catalog, &demand))?;

    let (train_rmse, train_max_abs_error) = residuals(&model, train.observations(), false);
    let holdout = holdout_fraction.map(|fraction| {
        let (rmse, _) = residuals(&model, &held_out, true);
        let scale = (held_out.iter().map(|o| o.value * o.value).sum::<f64>() / held_out.len().max(1) as f64).sqrt();
        HoldoutReport {
            fraction,
            n_held_out: held_out.len(),
            rmse,
            relative_rmse: if scale > 0.0 { rmse / scale } else { 0.0 },
        }
    });
    let report = FitReport {
        rank: config.rank,
        reg_lambda: config.reg_lambda,
        seed: config.seed,
        iterations: model.loss_history.len(),
        final_loss: model.final_loss,
        n_observed: bundle.sales.len(),
        n_training: train.len(),
        train_rmse,
        train_max_abs_error,
        trend_scalar,
        holdout,
    };
    write_json(&out.join("fit_report.json"), &report)?;

    stdout_line(&format!("iterations: {}", report.iterations));
    stdout_line(&format!("final loss: {}", report.final_loss));
    stdout_line(&format!("reconstruction max abs error: {}", report.train_max_abs_error));
    stdout_line(&format!("reconstruction rmse: {}", report.train_rmse));
    if let Some(h) = &report.holdout {
        stdout_line(&format!("held-out RMSE: {} (relative {}, n={})", h.rmse, h.relative_rmse, h.n_held_out));
    }
    Ok(())
}

fn load_demand(
    bundle: &DatasetBundle,
    model_path: Option<&Path>,
    als: &AlsArgs,
    file: &FileConfig,
) -> Result<DemandMatrix, Failure> {
    let model = match model_path {
        Some(path) => read_model(path)?,
        None => fit_als(&bundle.sales, &als_config(als, file)?)?,
    };
    let demand = impute(&model, &bundle.sales)?;
    Ok(apply_trend(&demand, trend(als.trend_scalar, file))?)
}

#[derive(Serialize)]
struct FrontOutput<'a> {
    store_id: &'a str,
    store_index: usize,
    k: usize,
    normalize: bool,
    lambda_grid: &'a [f64],
    solutions: Vec<MemberOutput<'a>>,
}

#[derive(Serialize)]
struct MemberOutput<'a> {
    #[serde(flatten)]
    member: &'a FrontMember,
    fabric_composition: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct StoreSummary {
    store_id: String,
    status: &'static str,
    front_size: Option<usize>,
    error_kind: Option<String>,
    message: Option<String>,
}

struct StoreResult {
    instance: StoreInstance,
    front: ParetoFront,
    compositions: Vec<(f64, std::collections::BTreeMap<String, f64>)>,
}

fn run_store(
    store: usize,
    bundle: &DatasetBundle,
    demand: &DemandMatrix,
    higg: &[ProductHiggScore],
    k: usize,
    grid: &[f64],
    composition_lambdas: &[f64],
    normalize: bool,
) -> assortify::Result<StoreResult> {
    let instance = StoreInstance::from_catalog(store, demand, &bundle.catalog, higg)?;
    let locks = Locks::default();
    let front = pareto_front(&instance, k, grid, &locks, normalize)?;
    tracing::debug!(store, solutions = front.solutions.len(), "front computed");
    let scales = instance.scales();
    let compositions = composition_lambdas
        .iter()
        .map(|&lambda| {
            let solution = optimize_with_scales(&instance, k, lambda, &locks, &scales, normalize)?;
            Ok((lambda, fabric_composition(&solution, &bundle.catalog)?))
        })
        .collect::<assortify::Result<Vec<_>>>()?;
    Ok(StoreResult { instance, front, compositions })
}

fn write_store(out: &Path, store_id: &str, result: &StoreResult, grid: &[f64], normalize: bool, bundle: &DatasetBundle) -> Result<(), Failure> {
    let stem = file_stem(store_id);
    let members = result
        .front
        .solutions
        .iter()
        .map(|member| {
            Ok(MemberOutput { member, fabric_composition: fabric_composition(&member.solution, &bundle.catalog)? })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    write_json(
        &out.join(format!("pareto_{stem}.json")),
        &FrontOutput {
            store_id,
            store_index: result.front.store_index,
            k: result.front.k,
            normalize,
            lambda_grid: grid,
            solutions: members,
        },
    )?;
    write_csv(
        &out.join(format!("pareto_{stem}.csv")),
        &["trade_off_lambda", "revenue_score", "higg_score", "dominated", "product_ids"],
        result.front.solutions.iter().map(|m| {
            vec![
                m.solution.trade_off_lambda.to_string(),
                m.solution.revenue_score.to_string(),
                m.solution.higg_score.to_string(),
                m.dominated.to_string(),
                m.solution.product_ids.join(";"),
            ]
        }),
    )?;
    write_csv(
        &out.join(format!("candidates_{stem}.csv")),
        &["product_id", "revenue", "higg_score"],
        result.instance.candidates.iter().map(|c| vec![c.id.clone(), c.revenue.to_string(), c.higg.to_string()]),
    )?;
    write_csv(
        &out.join(format!("composition_{stem}.csv")),
        &["trade_off_lambda", "fabric", "share"],
        result.compositions.iter().flat_map(|(lambda, shares)| {
            shares.iter().map(move |(fabric, share)| vec![lambda.to_string(), fabric.clone(), share.to_string()])
        }),
    )?;
    Ok(())
}

pub fn pareto(args: &ParetoArgs, file: &FileConfig) -> Result<(), Failure> {
    let paths = bundle_paths(&args.input, file)?;
    let out = out_dir(&args.out, file)?;
    let k = args.k.or(file.k).unwrap_or(DEFAULT_K);
    let normalize = args.normalize.or(file.normalize).unwrap_or(true);
    let grid = match (&args.lambdas, &file.lambda_grid, args.grid_points) {
        (Some(l), _, _) => l.clone(),
        (None, _, Some(n)) => even_grid(n),
        (None, Some(l), None) => l.clone(),
        (None, None, None) => even_grid(file.grid_points.unwrap_or(DEFAULT_GRID_POINTS)),
    };
    let composition_lambdas = args
        .composition_lambdas
        .clone()
        .or_else(|| file.composition_lambdas.clone())
        .unwrap_or_else(|| DEFAULT_COMPOSITION_LAMBDAS.to_vec());

    let bundle = load_bundle(&paths)?;
    let model_path = args.model.clone().or_else(|| file.model.clone());
    let demand = load_demand(&bundle, model_path.as_deref(), &args.als, file)?;
    let higg = score_catalog(&bundle.catalog)?;

    let catalog = &bundle.catalog;
    let selected: Vec<usize> = match args.store_ids.clone().or_else(|| file.store_ids.clone()) {
        None => (0..catalog.n_stores()).collect(),
        Some(ids) => ids
            .iter()
            .map(|id| catalog.store_index(id).ok_or_else(|| Failure::input("UnknownStore", format!("unknown store `{id}`"))))
            .collect::<Result<_, _>>()?,
    };

    let workers = args.workers.or(file.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::internal(format!("worker pool: {e}")))?;
    let results: Vec<assortify::Result<StoreResult>> = pool.install(|| {
        selected
            .par_iter()
            .map(|&s| run_store(s, &bundle, &demand, &higg, k, &grid, &composition_lambdas, normalize))
            .collect()
    });

    let mut summary = Vec::with_capacity(selected.len());
    let mut failed = 0;
    for (&s, result) in selected.iter().zip(&results) {
        let store_id = &catalog.stores()[s].id;
        match result {
            Ok(r) => {
                write_store(&out, store_id, r, &grid, normalize, &bundle)?;
                summary.push(StoreSummary {
                    store_id: store_id.clone(),
                    status: "ok",
                    front_size: Some(r.front.solutions.len()),
                    error_kind: None,
                    message: None,
                });
            }
            Err(e) => {
                failed += 1;
                eprintln!("error[{}]: store {store_id}: {e}", e.kind());
                summary.push(StoreSummary {
                    store_id: store_id.clone(),
                    status: "error",
                    front_size: None,
                    error_kind: Some(e.kind().to_string()),
                    message: Some(e.to_string()),
                });
            }
        }
    }
    write_json(&out.join("pareto_summary.json"), &summary)?;
    stdout_line(&format!("{} of {} stores solved", selected.len() - failed, selected.len()));
    if failed > 0 {
        let kind = results.iter().find_map(|r| r.as_ref().err()).map(|e| e.kind()).unwrap_or("Internal");
        return Err(Failure::input(kind, format!("{failed} of {} stores failed", selected.len())));
    }
    Ok(())
}

pub fn serve(args: &ServeArgs, file: &FileConfig) -> Result<(), Failure> {
    let paths = bundle_paths(&args.input, file)?;
    let model_path = args
        .model
        .clone()
        .or_else(|| file.model.clone())
        .ok_or_else(|| Failure::input("InvalidConfig", "serve needs a factor model (--model)"))?;
    let addr = args.addr.clone().or_else(|| file.addr.clone()).unwrap_or_else(|| DEFAULT_ADDR.into());
    let cors = args.cors || file.cors.unwrap_or(false);

    let bundle = load_bundle(&paths)?;
    let model = read_model(&model_path)?;
    let demand = apply_trend(&impute(&model, &bundle.sales)?, trend(args.trend_scalar, file))?;
    let state = SessionState::new(bundle, demand)?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::internal(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::input("BindFailed", format!("{addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Failure::internal(e.to_string()))?;
        let app = router(Service::loaded(state), cors);
        stdout_line(&format!("listening on http://{local}"));
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        assortify_service::serve(listener, app, shutdown)
            .await
            .map_err(|e| Failure::internal(format!("server: {e}")))
    })
}

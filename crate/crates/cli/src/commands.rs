use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hfts::depth::{self, BoxplotParams};
use hfts::eval::{self, BacktestConfig, ComparisonEntry, HftsDataset};
use hfts::hierarchy::HierarchySpec;
use hfts::io::{self, DemandOptions};
use hfts::predict::{self, FtsSeries};
use hfts::reconcile::{self, BaseForecasts, DispersionMatrix, GlsReconciler};
use hfts::sim::{self, Far1Params, OutlierParams, PathKind, RegimePair, RngSeed};
use hfts::stats::GAUSSIAN_MAD_SCALE;
use hfts::{ErrorMetric, Grid, Reconciler};
use serde::Serialize;

use crate::config::{Process, RunConfig};
use crate::CliError;

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("no output directory (--out)".into()))?;
    cfg.predictor.validate()?;
    for p in cfg.input.iter().chain(&cfg.hierarchy) {
        if !p.exists() {
            return Err(CliError::Config(format!("{} does not exist", p.display())));
        }
    }
    match command {
        "simulate" => simulate(cfg, &out)?,
        "depth" => depth_cmd(cfg, &out)?,
        "forecast" => forecast(cfg, &out)?,
        "backtest" => backtest(cfg, &out)?,
        "ingest" => ingest(cfg, &out)?,
        _ => unreachable!("unknown command {command}"),
    }
    let manifest = Manifest {
        tool: "hfts",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("config serializes") + "\n";
    write(&out.join("manifest.json"), &json)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Compute(hfts::Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn single_input(cfg: &RunConfig) -> Result<&Path, CliError> {
    match cfg.input.as_slice() {
        [p] => Ok(p),
        [] => Err(CliError::Config("no input given".into())),
        _ => Err(CliError::Config("expected exactly one input".into())),
    }
}

/// Accepts a dataset directory or a `simulate`/`ingest` output directory.
fn dataset_dir(p: &Path) -> PathBuf {
    if p.join(io::DATASET_MANIFEST).exists() {
        p.to_owned()
    } else {
        p.join("data")
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<HftsDataset, CliError> {
    let dir = dataset_dir(single_input(cfg)?);
    if !dir.join(io::DATASET_MANIFEST).exists() {
        return Err(CliError::Config(format!("{} is not a dataset directory", dir.display())));
    }
    Ok(io::read_dataset(&dir)?)
}

fn config_err(e: hfts::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let grid = Grid::new(cfg.grid.t_end.unwrap_or(1.0), cfg.grid.n_points.unwrap_or(120)).map_err(config_err)?;
    let hierarchy = match &cfg.hierarchy {
        Some(path) => io::read_hierarchy(path)?.build()?,
        None => {
            let leaves: Vec<String> = (1..=s.leaves).map(|i| format!("leaf{i}")).collect();
            HierarchySpec::star("total", &leaves).build().map_err(config_err)?
        }
    };
    if s.curves < 2 {
        return Err(CliError::Config("need at least 2 curves per node".into()));
    }
    let root = RngSeed(cfg.seed);
    let first = hierarchy.first_leaf();
    let mut leaves = Vec::new();
    let mut injected = String::from("node,index\n");
    for (j, id) in hierarchy.ids()[first..].iter().enumerate() {
        let seed = root.child(j as u64);
        let sample = match s.process {
            Process::Sv => {
                let b = [25.0, 15.0, 10.0][j % 3];
                sim::sv_curves(s.curves, grid, 1.0, b, seed)?
            }
            Process::SvMixture => {
                let (a, d) = [(5.0, 25.0), (2.0, 15.0), (3.0, 10.0)][j % 3];
                let r = RegimePair { a, b: 0.0, c: 1.0, d };
                sim::two_regime_sample(s.curves, 3000, 7000, r, grid, seed)?.sample
            }
            Process::Far1 => {
                let p = Far1Params {
                    rho: s.rho,
                    ..Far1Params::new(grid)
                };
                sim::far1_series(s.curves, &p, seed)?.to_sample()
            }
            Process::Wiener => sim::classical_paths(PathKind::Wiener, s.curves, grid, seed)?,
            Process::Bridge => sim::classical_paths(PathKind::BrownianBridge, s.curves, grid, seed)?,
        };
        let mut series = FtsSeries::from_sample(id.clone(), sample);
        if s.outliers > 0.0 {
            let p = OutlierParams {
                proportion: s.outliers,
                magnitude: s.magnitude,
                kind: cfg.predictor.depth,
                shape: s.outlier_shape,
                boxplot: BoxplotParams::default(),
            };
            let (contaminated, idx) = sim::inject_outliers(&series, &p, root.child(1000 + j as u64))?;
            for i in idx {
                writeln!(injected, "{id},{}", i + 1).unwrap();
            }
            series = contaminated;
        }
        leaves.push(series);
    }
    let data = HftsDataset::from_leaves(hierarchy, leaves)?;
    io::write_dataset(&out.join("data"), &data)?;
    if s.outliers > 0.0 {
        write(&out.join("injected.csv"), &injected)?;
    }
    Ok(())
}

fn depth_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let locality = cfg.predictor.locality()?;
    let sample = io::read_curves(single_input(cfg)?, cfg.grid.t_end.unwrap_or(1.0), cfg.grid.n_points)?;
    let depths = depth::sample_local_depths(&sample, locality)?;
    let mut rank = vec![0; depths.len()];
    for (r, i) in depths.ranking().into_iter().enumerate() {
        rank[i] = r + 1;
    }
    let outliers = if sample.len() >= 4 {
        depth::functional_boxplot(&sample, locality.kind(), BoxplotParams::default())?.outliers
    } else {
        log::warn!("fewer than 4 curves: no boxplot outlier flags");
        vec![false; sample.len()]
    };
    let mut csv = String::from("index,depth,rank,outlier\n");
    for (i, d) in depths.values().iter().enumerate() {
        writeln!(csv, "{},{d},{},{}", i + 1, rank[i], outliers[i]).unwrap();
    }
    write(&out.join("depth.csv"), &csv)
}

fn curve_rows(ids: &[String], curves: &[hfts::Curve]) -> String {
    let g = curves[0].values().len();
    let mut csv = String::from("node");
    for t in 0..g {
        write!(csv, ",t{t}").unwrap();
    }
    csv.push('\n');
    for (id, c) in ids.iter().zip(curves) {
        csv.push_str(id);
        for v in c.values() {
            write!(csv, ",{v}").unwrap();
        }
        csv.push('\n');
    }
    csv
}

fn forecast(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let choice = *cfg
        .predictors
        .first()
        .ok_or_else(|| CliError::Config("no predictor configured".into()))?;
    let predictor = cfg.predictor.build(choice)?;
    let n = data.n_curves();
    let base = data
        .series()
        .iter()
        .map(|s| predictor.forecast(s, n))
        .collect::<hfts::Result<Vec<_>>>()?;
    let curves = match cfg.reconcile {
        Reconciler::None => base,
        Reconciler::GlsRobust => {
            let origins: Vec<usize> = (predictor.min_origin()..n).collect();
            let w = if origins.len() < 2 {
                log::warn!("fewer than 2 past forecasts: reconciling with identity dispersion");
                DispersionMatrix::identity(data.series().len())
            } else {
                let errors = data
                    .series()
                    .iter()
                    .map(|s| {
                        predict::rolling_forecast(s, &predictor, origins.iter().copied())?
                            .iter()
                            .map(|f| eval::integrated_error(&f.realized, &f.forecast, ErrorMetric::Aise))
                            .collect::<hfts::Result<Vec<_>>>()
                    })
                    .collect::<hfts::Result<Vec<_>>>()?;
                reconcile::robust_dispersion_floored(&errors, GAUSSIAN_MAD_SCALE, reconcile::DEFAULT_FLOOR)?.0
            };
            let rec = GlsReconciler::new(data.hierarchy().summing_matrix(), &w)?;
            rec.reconcile(&BaseForecasts::new(base)?)?.full
        }
    };
    write(&out.join("forecast.csv"), &curve_rows(data.hierarchy().ids(), &curves))
}

fn backtest(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    if cfg.predictors.is_empty() {
        return Err(CliError::Config("no predictors configured".into()));
    }
    let entries = cfg
        .predictors
        .iter()
        .map(|&c| {
            Ok(ComparisonEntry {
                label: c.label().to_owned(),
                predictor: cfg.predictor.build(c)?,
                reconciler: cfg.reconcile,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (first, last) = match cfg.origins {
        Some(r) => (r.first, r.last),
        None => {
            let first = entries.iter().map(|e| e.predictor.min_origin()).max().unwrap_or(1);
            (first, data.n_curves().saturating_sub(1))
        }
    };
    if first > last || last + 1 > data.n_curves() {
        return Err(CliError::Config(format!(
            "origins {first}:{last} do not fit a series of {} curves",
            data.n_curves()
        )));
    }
    let mut template = BacktestConfig::new(entries[0].predictor, cfg.reconcile, (first..=last).collect());
    template.metric = cfg.metric;
    template.seed = Some(cfg.seed);
    let table = eval::compare_predictors(&data, &entries, &template)?;

    let mut report = String::from("predictor");
    for id in &table.node_ids {
        write!(report, ",{id}").unwrap();
    }
    report.push('\n');
    let mut errors = String::from("predictor,node,origin,error\n");
    for (label, r) in &table.rows {
        report.push_str(label);
        for n in &r.nodes {
            write!(report, ",{}", n.mad).unwrap();
            for (origin, e) in r.config.origins.iter().zip(&n.errors) {
                writeln!(errors, "{label},{},{origin},{e}", n.node).unwrap();
            }
        }
        report.push('\n');
        for w in &r.warnings {
            log::warn!("{label}: {w}");
        }
    }
    write(&out.join("report.csv"), &report)?;
    write(&out.join("errors.csv"), &errors)?;
    let json = serde_json::to_string_pretty(&table).expect("report serializes") + "\n";
    write(&out.join("report.json"), &json)?;
    print!("{report}");
    Ok(())
}

fn ingest(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.input.is_empty() {
        return Err(CliError::Config("no demand files given".into()));
    }
    let opts = DemandOptions {
        periods_per_day: cfg.grid.n_points.unwrap_or(48),
        regions: cfg.ingest.regions.clone(),
        root_id: cfg.ingest.root.clone(),
    };
    let demand = io::ingest_demand(&cfg.input, &opts)?;
    io::write_dataset(&out.join("data"), &demand.dataset)?;
    let mut days = String::from("index,date\n");
    for (i, d) in demand.days.iter().enumerate() {
        writeln!(days, "{},{d}", i + 1).unwrap();
    }
    write(&out.join("days.csv"), &days)
}

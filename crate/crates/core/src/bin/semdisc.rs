use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use semdisc::analysis::{build_frame, summarize};
use semdisc::capacity::{capacity_batch, capacity_with_statistics, DEFAULT_THRESHOLD};
use semdisc::io::{build_palette, load_association_csv, load_library_csv, load_uw71};
use semdisc::model::{
    entropy, generalized_total_variation, ml_error_probability, normalize_all, specificity_scores,
    total_variation, AssociationTable,
};
use semdisc::stochastic::{semantic_distance_analytic, simulate, MonteCarloConfig};
use semdisc::Error;

#[derive(Parser)]
#[command(name = "semdisc", version, about = "Semantic discriminability toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    output: Format,

    /// Master seed for Monte Carlo estimates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Monte Carlo iterations.
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,

    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check an association file and report diagnostics.
    Validate {
        /// Association CSV.
        file: PathBuf,
    },
    /// Entropy and specificity of every concept.
    Entropy {
        /// Association CSV.
        file: PathBuf,
    },
    /// Total variation (two concepts) or generalized total variation.
    Distance {
        /// Association CSV.
        file: PathBuf,
        /// Comma-separated concept ids.
        #[arg(long, value_delimiter = ',', required = true)]
        concepts: Vec<String>,
    },
    /// Semantic distance and contrast of a feature set.
    Semdist {
        /// Association CSV.
        file: PathBuf,
        /// Comma-separated concept ids.
        #[arg(long, value_delimiter = ',', required = true)]
        concepts: Vec<String>,
        /// Comma-separated feature ids, one per concept in the same order.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
    },
    /// Max capacity of one concept subset or of every k-subset.
    Capacity {
        /// Association CSV.
        file: PathBuf,
        /// Number of concepts per subset.
        #[arg(long)]
        k: usize,
        /// Evaluate every k-subset, one NDJSON record per line.
        #[arg(long, conflicts_with = "concepts")]
        all: bool,
        /// Comma-separated concept ids of a single subset of size k.
        #[arg(long, value_delimiter = ',')]
        concepts: Vec<String>,
        /// Cut-off for the proportion of pair distances above it.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Balanced-merit palette with colors and semantic contrasts.
    Palette {
        /// Association CSV.
        file: PathBuf,
        /// Comma-separated concept ids.
        #[arg(long, value_delimiter = ',', required = true)]
        concepts: Vec<String>,
        /// `uw71` or a CSV with columns index,sorted_position,L,a,b.
        #[arg(long, default_value = "uw71")]
        library: String,
    },
    /// Predicted feature-to-concept response proportions.
    Predict {
        /// Association CSV.
        file: PathBuf,
        /// Comma-separated concept ids.
        #[arg(long, value_delimiter = ',', required = true)]
        concepts: Vec<String>,
        /// Comma-separated feature ids, one per concept in the same order.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
    },
    /// Capacity, distribution difference and specificity statistics.
    Analyze {
        /// Association CSV.
        file: PathBuf,
        /// Number of concepts per subset.
        #[arg(long)]
        k: usize,
    },
}

/// Failure with its exit status.
enum Failure {
    Usage(String),
    Data(String),
    /// The reader of stdout went away; not worth reporting.
    Closed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownConcept(_) | Error::UnknownFeature(_) => Failure::Usage(e.to_string()),
            Error::Io(io) if io.kind() == io::ErrorKind::BrokenPipe => Failure::Closed,
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure::Closed;
        }
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.io_error_kind() == Some(io::ErrorKind::BrokenPipe) {
            return Failure::Closed;
        }
        Failure::Data(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        if let csv::ErrorKind::Io(io) = e.kind() {
            if io.kind() == io::ErrorKind::BrokenPipe {
                return Failure::Closed;
            }
        }
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(workers) = cli.global.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(&cli, &mut out).and_then(|()| out.flush().map_err(Failure::from));
    match result {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli, out: &mut impl Write) -> CmdResult {
    let g = &cli.global;
    let config = MonteCarloConfig::new(g.samples as usize, g.seed)?;
    match &cli.command {
        Command::Validate { file } => validate(file, g.output, out),
        Command::Entropy { file } => entropy_cmd(&load(file)?, g.output, out),
        Command::Distance { file, concepts } => distance(&load(file)?, concepts, g.output, out),
        Command::Semdist {
            file,
            concepts,
            features,
        } => semdist(&load(file)?, concepts, features, &config, g.output, out),
        Command::Capacity {
            file,
            k,
            all,
            concepts,
            threshold,
        } => capacity(
            &load(file)?,
            *k,
            *all,
            concepts,
            *threshold,
            &config,
            g.output,
            out,
        ),
        Command::Palette {
            file,
            concepts,
            library,
        } => palette(&load(file)?, concepts, library, &config, g.output, out),
        Command::Predict {
            file,
            concepts,
            features,
        } => predict(&load(file)?, concepts, features, &config, g.output, out),
        Command::Analyze { file, k } => analyze(&load(file)?, *k, &config, g.output, out),
    }
}

fn load(path: &Path) -> Result<AssociationTable, Failure> {
    Ok(load_association_csv(path)?)
}

fn write_json(out: &mut impl Write, value: &impl Serialize) -> CmdResult {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn validate(file: &Path, format: Format, out: &mut impl Write) -> CmdResult {
    let (ok, report) = match load_association_csv(file) {
        Ok(table) => {
            let zero = table.zero_columns();
            let ok = zero.is_empty();
            (
                ok,
                json!({
                    "valid": ok,
                    "features": table.n_features(),
                    "concepts": table.n_concepts(),
                    "concept_ids": table.concepts().ids(),
                    "zero_columns": zero,
                }),
            )
        }
        Err(e) => (false, json!({ "valid": false, "error": e.to_string() })),
    };
    match format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["valid", "features", "concepts", "detail"])?;
            w.write_record([
                report["valid"].to_string(),
                report
                    .get("features")
                    .map_or(String::new(), |v| v.to_string()),
                report
                    .get("concepts")
                    .map_or(String::new(), |v| v.to_string()),
                report
                    .get("error")
                    .or_else(|| report.get("zero_columns"))
                    .map_or(String::new(), |v| v.to_string()),
            ])?;
            w.flush()?;
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Data("validation failed".into()))
    }
}

fn entropy_cmd(table: &AssociationTable, format: Format, out: &mut impl Write) -> CmdResult {
    let dists = normalize_all(table)?;
    let entropies: Vec<f64> = dists.iter().map(entropy).collect();
    let specificity = specificity_scores(&entropies)?;
    match format {
        Format::Json => {
            let rows: Vec<_> = dists
                .iter()
                .zip(&entropies)
                .zip(&specificity)
                .map(|((d, h), s)| json!({"concept": d.concept(), "entropy": h, "specificity": s}))
                .collect();
            write_json(
                out,
                &json!({ "features": table.n_features(), "concepts": rows }),
            )
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["concept", "entropy", "specificity"])?;
            for ((d, h), s) in dists.iter().zip(&entropies).zip(&specificity) {
                w.write_record([d.concept().to_string(), h.to_string(), s.to_string()])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn distance(
    table: &AssociationTable,
    concepts: &[String],
    format: Format,
    out: &mut impl Write,
) -> CmdResult {
    let idx = table.concept_indices(concepts)?;
    if idx.len() < 2 {
        return Err(Failure::Usage(
            "--concepts needs at least 2 concepts".into(),
        ));
    }
    let sub = table.restrict_concepts(&idx)?;
    let dists = normalize_all(&sub)?;
    let (metric, value) = if dists.len() == 2 {
        ("tv", total_variation(&dists[0], &dists[1])?)
    } else {
        ("gtv", generalized_total_variation(&dists)?)
    };
    let error = ml_error_probability(&dists)?;
    match format {
        Format::Json => write_json(
            out,
            &json!({"concepts": concepts, "metric": metric, "value": value, "ml_error_probability": error}),
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["concepts", "metric", "value", "ml_error_probability"])?;
            w.write_record([
                concepts.join(";"),
                metric.into(),
                value.to_string(),
                error.to_string(),
            ])?;
            w.flush()?;
            Ok(())
        }
    }
}

/// Square sub-table with `features[j]` as the row for `concepts[j]`.
fn square_table(
    table: &AssociationTable,
    concepts: &[String],
    features: &[String],
) -> Result<AssociationTable, Failure> {
    if concepts.len() != features.len() {
        return Err(Failure::Usage(format!(
            "{} concepts but {} features; they must match",
            concepts.len(),
            features.len()
        )));
    }
    if concepts.len() < 2 {
        return Err(Failure::Usage("at least 2 concepts are required".into()));
    }
    let c = table.concept_indices(concepts)?;
    let f = table.feature_indices(features)?;
    Ok(table.restrict(&f, &c)?)
}

fn semdist(
    table: &AssociationTable,
    concepts: &[String],
    features: &[String],
    config: &MonteCarloConfig,
    format: Format,
    out: &mut impl Write,
) -> CmdResult {
    let sub = square_table(table, concepts, features)?;
    let mc = simulate(&sub, config)?;
    let (method, delta_s) = if sub.n_concepts() == 2 {
        ("analytic", semantic_distance_analytic(&sub)?)
    } else {
        ("monte_carlo", mc.delta_s)
    };
    let contrast: Vec<_> = mc
        .optimal
        .features
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            json!({
                "feature": sub.library().get(i).id,
                "optimal_concept": sub.concepts().ids()[j],
                "contrast": mc.contrast[i],
            })
        })
        .collect();
    match format {
        Format::Json => write_json(
            out,
            &json!({
                "concepts": concepts,
                "features": features,
                "method": method,
                "delta_s": delta_s,
                "monte_carlo": {
                    "delta_s": mc.delta_s,
                    "modal_proportion": mc.modal_proportion,
                    "contrast": contrast,
                    "samples": mc.samples,
                    "seed": mc.seed,
                },
            }),
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([
                "feature",
                "optimal_concept",
                "contrast",
                "delta_s",
                "method",
                "samples",
                "seed",
            ])?;
            for (j, &i) in mc.optimal.features.iter().enumerate() {
                w.write_record([
                    sub.library().get(i).id.clone(),
                    sub.concepts().ids()[j].clone(),
                    mc.contrast[i].to_string(),
                    delta_s.to_string(),
                    method.to_string(),
                    mc.samples.to_string(),
                    mc.seed.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

const CAPACITY_CSV_HEADER: [&str; 13] = [
    "index",
    "concepts",
    "max_capacity",
    "chosen_features",
    "distribution_difference",
    "mean_entropy",
    "method",
    "seed",
    "samples",
    "mean",
    "median",
    "threshold_proportion",
    "audit_gap",
];

fn capacity_csv_row(index: u64, r: &semdisc::capacity::CapacityReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    vec![
        index.to_string(),
        r.concepts.join(";"),
        r.max_capacity.to_string(),
        r.chosen_features.join(";"),
        r.distribution_difference.to_string(),
        r.mean_entropy.to_string(),
        r.method.as_str().to_string(),
        r.seed.map_or(String::new(), |s| s.to_string()),
        r.samples.map_or(String::new(), |s| s.to_string()),
        opt(r.statistics.as_ref().map(|s| s.mean)),
        opt(r.statistics.as_ref().map(|s| s.median)),
        opt(r.statistics.as_ref().map(|s| s.threshold_proportion)),
        opt(r.audit.as_ref().map(|a| a.gap)),
    ]
}

#[allow(clippy::too_many_arguments)]
fn capacity(
    table: &AssociationTable,
    k: usize,
    all: bool,
    concepts: &[String],
    threshold: f64,
    config: &MonteCarloConfig,
    format: Format,
    out: &mut impl Write,
) -> CmdResult {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::Usage("--threshold must lie in [0, 1]".into()));
    }
    if k < 2 || k > table.n_concepts() {
        return Err(Failure::Usage(format!(
            "--k must lie in [2, {}]",
            table.n_concepts()
        )));
    }
    if all {
        let csv_mode = format == Format::Csv;
        if csv_mode {
            writeln!(out, "{}", CAPACITY_CSV_HEADER.join(","))?;
        }
        capacity_batch(table, k, config, threshold, |record| {
            let line = if csv_mode {
                let mut w = csv::WriterBuilder::new()
                    .has_headers(false)
                    .from_writer(Vec::new());
                w.write_record(capacity_csv_row(record.index, &record.report))?;
                w.into_inner().map_err(|e| Error::Format(e.to_string()))?
            } else {
                let mut v =
                    serde_json::to_vec(&record).map_err(|e| Error::Format(e.to_string()))?;
                v.push(b'\n');
                v
            };
            out.write_all(&line)?;
            Ok(())
        })?;
        return Ok(());
    }

    if concepts.len() != k {
        return Err(Failure::Usage(format!(
            "--concepts lists {} concepts but --k is {k} (or pass --all)",
            concepts.len()
        )));
    }
    let idx = table.concept_indices(concepts)?;
    let report = capacity_with_statistics(table, &idx, config, threshold)?;
    match format {
        Format::Json => write_json(out, &report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(CAPACITY_CSV_HEADER)?;
            w.write_record(capacity_csv_row(0, &report))?;
            w.flush()?;
            Ok(())
        }
    }
}

fn palette(
    table: &AssociationTable,
    concepts: &[String],
    library: &str,
    config: &MonteCarloConfig,
    format: Format,
    out: &mut impl Write,
) -> CmdResult {
    let lib = if library == "uw71" {
        load_uw71()?
    } else {
        load_library_csv(library)?
    };
    let idx = table.concept_indices(concepts)?;
    if idx.len() < 2 {
        return Err(Failure::Usage(
            "--concepts needs at least 2 concepts".into(),
        ));
    }
    let palette = build_palette(table, &idx, &lib, config)?;
    match format {
        Format::Json => write_json(out, &palette),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([
                "concept",
                "feature",
                "L",
                "a",
                "b",
                "hex",
                "in_gamut",
                "association",
                "semantic_contrast",
                "generalized_semantic_distance",
                "max_capacity",
                "seed",
                "samples",
            ])?;
            for e in &palette.entries {
                w.write_record([
                    e.concept.clone(),
                    e.feature.clone(),
                    e.lab.l.to_string(),
                    e.lab.a.to_string(),
                    e.lab.b.to_string(),
                    e.hex.clone(),
                    e.in_gamut.to_string(),
                    e.association.to_string(),
                    e.semantic_contrast.to_string(),
                    palette.generalized_semantic_distance.to_string(),
                    palette.max_capacity.to_string(),
                    palette.seed.to_string(),
                    palette.samples.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn predict(
    table: &AssociationTable,
    concepts: &[String],
    features: &[String],
    config: &MonteCarloConfig,
    format: Format,
    out: &mut impl Write,
) -> CmdResult {
    let sub = square_table(table, concepts, features)?;
    let mc = simulate(&sub, config)?;
    match format {
        Format::Json => write_json(
            out,
            &json!({
                "features": features,
                "concepts": concepts,
                "matrix": mc.prediction.to_rows(),
                "samples": mc.samples,
                "seed": mc.seed,
            }),
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            let mut header = vec!["feature".to_string()];
            header.extend(concepts.iter().cloned());
            w.write_record(&header)?;
            for (i, f) in features.iter().enumerate() {
                let mut row = vec![f.clone()];
                row.extend(mc.prediction.row(i).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn analyze(
    table: &AssociationTable,
    k: usize,
    config: &MonteCarloConfig,
    format: Format,
    out: &mut impl Write,
) -> CmdResult {
    if k < 2 || k > table.n_concepts() {
        return Err(Failure::Usage(format!(
            "--k must lie in [2, {}]",
            table.n_concepts()
        )));
    }
    let frame = build_frame(table, k, config)?;
    let summary = summarize(&frame)?;
    match format {
        Format::Json => write_json(
            out,
            &json!({ "frame": frame, "summary": summary, "seed": config.seed, "samples": config.samples }),
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([
                "concepts",
                "capacity",
                "distribution_difference",
                "normalized_difference",
                "mean_entropy",
                "specificity",
                "log_distribution_difference",
                "log_specificity",
            ])?;
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            for r in &frame.rows {
                w.write_record([
                    r.concepts.join(";"),
                    r.capacity.to_string(),
                    r.distribution_difference.to_string(),
                    r.normalized_difference.to_string(),
                    r.mean_entropy.to_string(),
                    r.specificity.to_string(),
                    opt(r.log_distribution_difference),
                    opt(r.log_specificity),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::dataset::{read_ivecs, read_vectors, write_fvecs, write_ivecs};
use crate::distance::{DistanceWidth, QuantizedTables};
use crate::error::{Error, Result};
use crate::eval::{evaluate_recall, mean_time_ms, result_ids, search_batch, write_latency_csv};
use crate::index::{BuildConfig, IvfIndex, SearchParams, DEFAULT_CELLS};
use crate::quantizer::{CodeStructure, Codebook, KMeansConfig, PqSpec};
use crate::scan::selftest::{run_differential, SPEC_FAMILIES};
use crate::scan::{select_kernel, Capabilities, KernelFamily};
use crate::vectors::VectorSet;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_MISSING_FILE: i32 = 2;
pub const EXIT_SPEC_MISMATCH: i32 = 3;
pub const EXIT_DIMENSION: i32 = 4;
pub const EXIT_BAD_SPEC: i32 = 5;
pub const EXIT_SELFTEST: i32 = 6;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "pqscan", version, about = "Product-quantization ANN search with register-table scan kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a product quantizer on raw vectors and write the codebook.
    Train(TrainArgs),
    /// Build an IVF (or flat) index.
    Build(BuildArgs),
    /// Search queries; writes result ids (ivecs), distances (fvecs) and latencies (CSV).
    Search(SearchArgs),
    /// Recall of result ids against ground truth.
    Eval(EvalArgs),
    /// Sweep the probe count and emit one CSV row per operating point.
    Bench(BenchArgs),
    /// Differential test of every vector kernel against the scalar scan.
    Selftest(SelftestArgs),
    /// Report vector extensions and the kernel chosen for each spec family.
    Caps,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// .fvecs or .bvecs training vectors.
    #[arg(long)]
    data: PathBuf,
    /// Quantizer structure, e.g. "12x{6,6,4}".
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use only the first N vectors.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Coarse {
    Ivf,
    Flat,
    Imi,
    Hnsw,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    data: PathBuf,
    /// Quantizer structure; optional with --codebook.
    #[arg(long)]
    spec: Option<String>,
    /// Pre-trained codebook; flat indexes only.
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Coarse::Ivf)]
    coarse: Coarse,
    /// Number of coarse cells K.
    #[arg(long, default_value_t = DEFAULT_CELLS)]
    cells: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// .fvecs or .bvecs queries.
    #[arg(long)]
    queries: PathBuf,
    /// Use only the first N queries.
    #[arg(long)]
    limit: Option<usize>,
    /// Expected quantizer structure; fails if the index was built with another.
    #[arg(long)]
    spec: Option<String>,
    /// Results per query R.
    #[arg(long, default_value_t = 100)]
    results: usize,
    /// Calibration prefix t.
    #[arg(long, default_value_t = 400)]
    calibration: usize,
    /// Re-rank results with float distances.
    #[arg(long)]
    rerank: bool,
    /// Force a kernel family (scalar-float, scalar-quantized, shuffle16x8, ...).
    #[arg(long)]
    kernel: Option<String>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Cells probed per query a.
    #[arg(long, default_value_t = 1)]
    probes: usize,
    /// Result ids (ivecs); distances go to the same path with a .fvecs extension.
    #[arg(long)]
    out: PathBuf,
    /// Per-query latency CSV.
    #[arg(long)]
    latency: Option<PathBuf>,
    /// Lookup tables of the first query's first probed cell, as CSV.
    #[arg(long)]
    dump_tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Result ids (ivecs).
    #[arg(long)]
    results: PathBuf,
    /// Ground-truth neighbor ids (ivecs).
    #[arg(long)]
    ground_truth: PathBuf,
    /// Latency CSV written by search, for the mean query time.
    #[arg(long)]
    latency: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    ground_truth: PathBuf,
    /// Comma-separated probe counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    probes: Vec<usize>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Random trials per kernel variant and spec family.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_FILE,
        Error::SpecMismatch(_) => EXIT_SPEC_MISMATCH,
        Error::DimensionMismatch { .. } => EXIT_DIMENSION,
        Error::InvalidSpec(_) => EXIT_BAD_SPEC,
        _ => EXIT_OTHER,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Train(a) => train(a).map(|()| 0),
        Command::Build(a) => build(a).map(|()| 0),
        Command::Search(a) => search(a).map(|()| 0),
        Command::Eval(a) => eval(a).map(|()| 0),
        Command::Bench(a) => bench(a).map(|()| 0),
        Command::Selftest(a) => selftest(a),
        Command::Caps => caps().map(|()| 0),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let structure: CodeStructure = a.spec.parse()?;
    let data = read_vectors(&a.data, a.limit)?;
    let spec = PqSpec::from_structure(data.dim(), &structure)?;
    let cfg = KMeansConfig { seed: a.seed, ..Default::default() };
    info!("training {spec} on {} vectors", data.len());
    let cb = Codebook::train(&data, &spec, &cfg)?;
    let mut w = create(&a.out)?;
    cb.write_to(&mut w)?;
    w.flush()?;
    println!("trained {} dims {:?} -> {}", spec.structure(), spec.dim_alloc(), a.out.display());
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let structure = a.spec.as_deref().map(str::parse::<CodeStructure>).transpose()?;
    let data = read_vectors(&a.data, a.limit)?;
    let index = match a.coarse {
        Coarse::Imi | Coarse::Hnsw => {
            return Err(Error::Config(format!(
                "{:?} coarse quantizers are not supported; use ivf or flat",
                a.coarse
            )))
        }
        Coarse::Flat => {
            let cb = match (&a.codebook, &structure) {
                (Some(path), s) => {
                    let cb = Codebook::read_from(&mut open(path)?)?;
                    if let Some(s) = s {
                        if &cb.spec().structure() != s {
                            return Err(Error::SpecMismatch(format!(
                                "codebook is {}, --spec asks for {s}",
                                cb.spec().structure()
                            )));
                        }
                    }
                    cb
                }
                (None, Some(s)) => {
                    let spec = PqSpec::from_structure(data.dim(), s)?;
                    Codebook::train(&data, &spec, &KMeansConfig { seed: a.seed, ..Default::default() })?
                }
                (None, None) => return Err(Error::Config("flat build needs --spec or --codebook".into())),
            };
            IvfIndex::build_flat(&data, cb)?
        }
        Coarse::Ivf => {
            if a.codebook.is_some() {
                return Err(Error::Config("--codebook applies to flat indexes; IVF trains on residuals".into()));
            }
            let s = structure.ok_or_else(|| Error::Config("IVF build needs --spec".into()))?;
            IvfIndex::build(&data, &BuildConfig::new(a.cells, s).seed(a.seed))?
        }
    };
    let mut w = create(&a.out)?;
    index.write_to(&mut w)?;
    w.flush()?;
    println!(
        "built {} index: {} vectors, {} cells, {} -> {}",
        if index.is_residual() { "ivf" } else { "flat" },
        index.len(),
        index.num_cells(),
        index.spec().structure(),
        a.out.display()
    );
    Ok(())
}

struct Loaded {
    index: IvfIndex,
    queries: VectorSet,
    base: SearchParams,
    kernel: Option<KernelFamily>,
    workers: usize,
}

fn load(q: &QueryArgs) -> Result<Loaded> {
    let index = IvfIndex::read_from(&mut open(&q.index)?)?;
    if let Some(s) = &q.spec {
        let s: CodeStructure = s.parse()?;
        if s != index.spec().structure() {
            return Err(Error::SpecMismatch(format!("index is {}, --spec asks for {s}", index.spec().structure())));
        }
    }
    let queries = read_vectors(&q.queries, q.limit)?;
    if queries.dim() != index.dim() {
        return Err(Error::DimensionMismatch { expected: index.dim(), actual: queries.dim() });
    }
    let kernel = q.kernel.as_deref().map(str::parse).transpose()?;
    let base = SearchParams {
        probes: 1,
        results: q.results,
        calibration: q.calibration,
        rerank: q.rerank,
        kernel,
    };
    let workers = q.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(Loaded { index, queries, base, kernel, workers })
}

fn pad_results(outcomes: &[crate::eval::QueryOutcome], r: usize) -> (Vec<Vec<i32>>, Vec<Vec<f32>>) {
    outcomes
        .iter()
        .map(|o| {
            let mut ids: Vec<i32> = o.neighbors.iter().map(|n| n.id as i32).collect();
            let mut d: Vec<f32> = o.neighbors.iter().map(|n| n.distance).collect();
            ids.resize(r, -1);
            d.resize(r, f32::INFINITY);
            (ids, d)
        })
        .unzip()
}

fn search(a: SearchArgs) -> Result<()> {
    let l = load(&a.query)?;
    let params = SearchParams { probes: a.probes, ..l.base.clone() };
    let caps = Capabilities::detect();
    let choice = l.index.kernel_for(&params, &caps);
    if let Some(why) = &choice.fallback {
        warn!("{why}; scanning with {}", choice.family);
    }
    info!("kernel {} ({})", choice.family, choice.isa);

    if let Some(path) = &a.dump_tables {
        dump_tables(&l.index, l.queries.row(0), &params, &choice.family, path)?;
    }
    let outcomes = search_batch(&l.index, &l.queries, &params, &choice, l.workers)?;
    let (ids, dists) = pad_results(&outcomes, params.results);
    let mut w = create(&a.out)?;
    write_ivecs(&mut w, &ids)?;
    w.flush()?;
    let dist_path = a.out.with_extension("fvecs");
    let mut w = create(&dist_path)?;
    write_fvecs(&mut w, &dists)?;
    w.flush()?;
    if let Some(p) = &a.latency {
        write_latency_csv(create(p)?, &outcomes, params.probes)?;
    }
    println!(
        "searched {} queries with {} ({}), mean {:.3} ms -> {}",
        outcomes.len(),
        choice.family,
        choice.isa,
        mean_time_ms(&outcomes),
        a.out.display()
    );
    Ok(())
}

fn dump_tables(index: &IvfIndex, query: &[f32], params: &SearchParams, family: &KernelFamily, path: &Path) -> Result<()> {
    let cells = index.probe_order(query, params.probes)?;
    let tables = cells.iter().map(|&c| index.cell_tables(query, c)).collect::<Result<Vec<_>>>()?;
    let quantized = match (family, index.calibrate(&cells, &tables, params)) {
        (KernelFamily::ScalarFloat, _) | (_, None) => None,
        (f, Some((lo, hi))) => {
            let width = f.distance_width().unwrap_or_else(|| DistanceWidth::for_spec(index.spec()));
            Some(QuantizedTables::quantize(&tables[0], lo, hi, width)?)
        }
    };
    tables[0].write_csv(create(path)?, quantized.as_ref())
}

fn eval(a: EvalArgs) -> Result<()> {
    let res: Vec<Vec<u32>> = read_ivecs(&a.results, None)?
        .into_iter()
        .map(|r| r.into_iter().filter(|&id| id >= 0).map(|id| id as u32).collect())
        .collect();
    let gt = read_ivecs(&a.ground_truth, Some(res.len()))?;
    let r = evaluate_recall(&res, &gt, &[1, 100])?;
    println!("R@1 {:.3}", r[0]);
    println!("R@100 {:.3}", r[1]);
    if let Some(p) = &a.latency {
        let mut rd = csv::Reader::from_reader(open(p)?);
        let mut times = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::input(e.to_string()))?;
            let t: f64 = rec
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::input("malformed latency row"))?;
            times.push(t);
        }
        let mean = times.iter().sum::<f64>() / times.len().max(1) as f64 / 1000.0;
        println!("mean query time {mean:.3} ms");
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let l = load(&a.query)?;
    let gt = read_ivecs(&a.ground_truth, Some(l.queries.len()))?;
    let caps = Capabilities::detect();
    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["probes", "r_at_1", "r_at_100", "mean_ms", "kernel"]).map_err(err)?;
    for &p in &a.probes {
        let params = SearchParams { probes: p, kernel: l.kernel, ..l.base.clone() };
        let choice = l.index.kernel_for(&params, &caps);
        let outcomes = search_batch(&l.index, &l.queries, &params, &choice, l.workers)?;
        let r = evaluate_recall(&result_ids(&outcomes), &gt, &[1, 100])?;
        w.write_record([
            p.to_string(),
            format!("{:.4}", r[0]),
            format!("{:.4}", r[1]),
            format!("{:.4}", mean_time_ms(&outcomes)),
            choice.family.to_string(),
        ])
        .map_err(err)?;
        w.flush()?;
    }
    Ok(())
}

fn selftest(a: SelftestArgs) -> Result<i32> {
    let caps = Capabilities::detect();
    let report = run_differential(&caps, a.trials, a.seed)?;
    for c in &report.cases {
        println!("{} {c}", if c.mismatches == 0 { "ok  " } else { "FAIL" });
        if let Some(m) = &c.first_mismatch {
            println!("     {m}");
        }
    }
    for s in &report.scalar_only {
        println!("skip {s}: no vector kernel on this host");
    }
    if report.passed() {
        println!("selftest passed");
        Ok(0)
    } else {
        println!("selftest FAILED");
        Ok(EXIT_SELFTEST)
    }
}

fn caps() -> Result<()> {
    let caps = Capabilities::detect();
    println!(
        "ssse3 {} avx2 {} avx512bw {} avx512vbmi {}",
        caps.ssse3, caps.avx2, caps.avx512bw, caps.avx512vbmi
    );
    for f in KernelFamily::ALL {
        let v: Vec<String> = f.available_variants(&caps).iter().map(|i| i.to_string()).collect();
        println!("{:<17} {}", f.name(), if v.is_empty() { "unavailable".into() } else { v.join(" ") });
    }
    for s in SPEC_FAMILIES {
        let structure: CodeStructure = s.parse()?;
        let spec = PqSpec::from_structure(2 * structure.code_bits(), &structure)?;
        let scheme = crate::layout::PackingScheme::default_for(&spec)?;
        let c = select_kernel(&spec, &scheme, &caps, None);
        println!("{s:<12} -> {} ({})", c.family, c.isa);
    }
    Ok(())
}

//! Command-line surface: synthesis, statistics export, statistic counting,
//! filter inspection and the verification suite.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use alphatex::io::{load_image, save_texture_png, LoadMode};
use alphatex::oracles;
use alphatex::statistics::{
    build_index_set, compute_statistics, count_alpha_statistics, count_ps_statistics, index_map,
    Boundary, PsMode, Variant,
};
use alphatex::synthesis::{synthesize, ModelConfig};
use alphatex::wavelets::{build_filter_bank, WaveletFamily};

#[derive(Parser)]
#[command(name = "alphatex", version, about = "Texture synthesis from shifted covariances of rectified wavelet coefficients")]
struct Cli {
    /// Worker threads for internal parallelism (1 = fully serial).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a new texture from an observed one.
    Synth(SynthArgs),
    /// Compute and export the statistics of an image, or compare two exports.
    Stats(StatsArgs),
    /// Print statistic counts of a model configuration.
    Count(CountArgs),
    /// Render the filter bank to PNG panels (real | imaginary | modulus).
    Filters(FiltersArgs),
    /// Run the verification suite against the naive reference implementations.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    S,
    I,
    L,
    C,
    CReduced,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::S => Variant::S,
            VariantArg::I => Variant::I,
            VariantArg::L => Variant::L,
            VariantArg::C => Variant::C,
            VariantArg::CReduced => Variant::CReduced,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Morlet,
    BumpSteerable,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Windowed,
}

#[derive(Args, Debug, Clone)]
struct ConfigFlags {
    #[arg(long, value_enum, default_value = "i")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "morlet")]
    family: FamilyArg,
    /// Number of dyadic scales J.
    #[arg(long, default_value_t = 5)]
    scales: usize,
    /// Orientations per half turn L.
    #[arg(long, default_value_t = 4)]
    orients: usize,
    /// Rectifier phase-grid size A.
    #[arg(long, default_value_t = 4)]
    alphas: usize,
    /// L-BFGS iterations per restart.
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "periodic")]
    boundary: BoundaryArg,
    /// Skip the final histogram matching step.
    #[arg(long)]
    no_histmatch: bool,
}

impl ConfigFlags {
    fn to_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant.into(),
            family: match self.family {
                FamilyArg::Morlet => WaveletFamily::Morlet,
                FamilyArg::BumpSteerable => WaveletFamily::BumpSteerable,
            },
            scales: self.scales,
            orientations: self.orients,
            phases: self.alphas,
            boundary: match self.boundary {
                BoundaryArg::Periodic => Boundary::Periodic,
                BoundaryArg::Windowed => Boundary::Windowed,
            },
            iterations: self.iters,
            restarts: self.restarts,
            histogram_match: !self.no_histmatch,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Observed texture (PNG/PGM/PPM, square power-of-two side).
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigFlags,
    /// Output image path.
    #[arg(long, default_value = "synth.png")]
    out: PathBuf,
    /// Manifest path: written after a run; replayed when no --input is given.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Loss-history JSONL path (defaults next to --out).
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, required_unless_present = "compare")]
    input: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigFlags,
    #[arg(long, default_value = "stats.json")]
    out: PathBuf,
    /// Compare two previously exported statistic files instead.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CountModel {
    AlphaS,
    AlphaI,
    AlphaL,
    AlphaC,
    AlphaCReduced,
    PsGray,
    PsColor,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, value_enum)]
    model: CountModel,
    #[arg(long, default_value_t = 5)]
    scales: u64,
    #[arg(long, default_value_t = 4)]
    orients: u64,
    #[arg(long, default_value_t = 4)]
    alphas: u64,
    /// Autocorrelation neighborhood radius of the pyramid models.
    #[arg(long, default_value_t = 3)]
    delta: u64,
}

#[derive(Args)]
struct FiltersArgs {
    #[arg(long, default_value_t = 3)]
    scales: usize,
    #[arg(long, default_value_t = 4)]
    orients: usize,
    #[arg(long, value_enum, default_value = "morlet")]
    family: FamilyArg,
    /// Grid side length used to sample the filters.
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only checks whose name contains this substring.
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Statistic counts recorded in the manifest.
#[derive(Debug, Serialize, Deserialize)]
struct StatCounts {
    means: usize,
    covariances: usize,
    lowpass: usize,
    total: usize,
}

/// Everything needed to reproduce a synthesis run bit for bit.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    config: ModelConfig,
    input: PathBuf,
    input_sha256: String,
    output: PathBuf,
    history: PathBuf,
    /// Interior margin (pixels) excluded per side in windowed mode.
    window_margin: Option<usize>,
    stat_counts: StatCounts,
    initial_loss: f64,
    final_loss: f64,
    wall_ms: u64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn config_hash(config: &ModelConfig) -> Result<String> {
    let json = serde_json::to_string(config)?;
    Ok(format!("{:x}", Sha256::digest(json.as_bytes())))
}

fn load_mode(variant: Variant) -> LoadMode {
    match variant {
        Variant::C | Variant::CReduced => LoadMode::Color,
        _ => LoadMode::Gray,
    }
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let (config, input) = match (&args.input, &args.manifest) {
        (Some(input), _) => (args.config.to_config(), input.clone()),
        (None, Some(mpath)) => {
            let m: RunManifest = serde_json::from_str(
                &fs::read_to_string(mpath)
                    .with_context(|| format!("reading manifest {}", mpath.display()))?,
            )?;
            let hash = sha256_file(&m.input)?;
            if hash != m.input_sha256 {
                bail!(
                    "input {} does not match the manifest hash (got {hash})",
                    m.input.display()
                );
            }
            (m.config, m.input)
        }
        (None, None) => bail!("either --input or --manifest is required"),
    };
    let input_sha256 = sha256_file(&input)?;
    let obs = load_image(&input, load_mode(config.variant))?;
    let start = Instant::now();
    let result = synthesize(&obs, &config)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    save_texture_png(&args.out, &result.texture)?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| args.out.with_extension("loss.jsonl"));
    let mut hf = fs::File::create(&history_path)
        .with_context(|| format!("creating {}", history_path.display()))?;
    for rec in &result.history {
        writeln!(hf, "{}", serde_json::to_string(rec)?)?;
    }
    let set = build_index_set(
        config.variant,
        config.scales,
        config.orientations,
        config.phases,
    )?;
    let manifest = RunManifest {
        window_margin: match config.boundary {
            Boundary::Windowed => Some(1 << config.scales),
            Boundary::Periodic => None,
        },
        stat_counts: StatCounts {
            means: result.target.n_means,
            covariances: result.target.n_cov,
            lowpass: result.target.n_lowpass,
            total: set.len_total(),
        },
        config,
        input,
        input_sha256,
        output: args.out.clone(),
        history: history_path,
        initial_loss: result.initial_loss,
        final_loss: result.final_loss,
        wall_ms,
    };
    let mpath = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.out.with_extension("manifest.json"));
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    println!(
        "synthesized {} in {} ms; loss {:.3e} -> {:.3e}; manifest {}",
        manifest.output.display(),
        wall_ms,
        manifest.initial_loss,
        manifest.final_loss,
        mpath.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StatsExport {
    config_hash: String,
    statistics: Vec<serde_json::Value>,
}

fn run_stats(args: &StatsArgs) -> Result<()> {
    if let Some(files) = &args.compare {
        let load = |p: &PathBuf| -> Result<Vec<f64>> {
            let e: StatsExport = serde_json::from_str(&fs::read_to_string(p)?)?;
            e.statistics
                .iter()
                .map(|v| {
                    v.get("value")
                        .and_then(|x| x.as_f64())
                        .context("statistic entry without a numeric value")
                })
                .collect()
        };
        let a = load(&files[0])?;
        let b = load(&files[1])?;
        if a.len() != b.len() {
            bail!("statistic layouts differ: {} vs {} entries", a.len(), b.len());
        }
        let dist = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("distance {dist:.6e}");
        println!("relative {:.6e}", dist / norm.max(1e-300));
        return Ok(());
    }
    let input = args.input.as_ref().expect("clap enforces --input");
    let config = args.config.to_config();
    let obs = load_image(input, load_mode(config.variant))?;
    let bank = build_filter_bank(obs.n(), config.scales, config.orientations, config.family)?;
    let set = build_index_set(
        config.variant,
        config.scales,
        config.orientations,
        config.phases,
    )?;
    let stats = compute_statistics(&obs, &bank, &set, None, config.boundary)?;
    let descriptors = index_map(&set);
    let statistics: Vec<serde_json::Value> = descriptors
        .iter()
        .zip(&stats.values)
        .map(|(d, &v)| {
            let mut obj = serde_json::to_value(d).expect("descriptor serializes");
            obj.as_object_mut()
                .expect("descriptor is an object")
                .insert("value".into(), serde_json::json!(v));
            obj
        })
        .collect();
    let export = StatsExport {
        config_hash: config_hash(&config)?,
        statistics,
    };
    fs::write(&args.out, serde_json::to_string(&export)?)?;
    println!(
        "wrote {} statistics ({} means, {} covariances, {} low-pass) to {}",
        stats.values.len(),
        stats.n_means,
        stats.n_cov,
        stats.n_lowpass,
        args.out.display()
    );
    Ok(())
}

fn run_count(args: &CountArgs) -> Result<()> {
    let (j, l, a) = (args.scales, args.orients, args.alphas);
    match args.model {
        CountModel::PsGray | CountModel::PsColor => {
            let mode = if matches!(args.model, CountModel::PsGray) {
                PsMode::Gray
            } else {
                PsMode::Color
            };
            let b = count_ps_statistics(mode, j, l, args.delta);
            println!(
                "pyramid model {:?}  J={} L={} delta={}",
                mode, j, l, args.delta
            );
            for (name, count) in &b.categories {
                println!("  {name:<28} {count:>8}");
            }
            println!("  {:<28} {:>8}", "total", b.total);
            println!("  {:<28} {:>8}", "excluding software-only", b.paper_counted);
        }
        _ => {
            let variant = match args.model {
                CountModel::AlphaS => Variant::S,
                CountModel::AlphaI => Variant::I,
                CountModel::AlphaL => Variant::L,
                CountModel::AlphaC => Variant::C,
                CountModel::AlphaCReduced => Variant::CReduced,
                _ => unreachable!(),
            };
            let set = build_index_set(variant, j as usize, l as usize, a as usize)?;
            let raw_shifts = 2 * j * l + 1;
            let bound = count_alpha_statistics(variant, j, l, a, raw_shifts);
            println!("covariance model {variant:?}  J={j} L={l} A={a}");
            println!("  {:<36} {:>8}", format!("closed-form bound (|T|={raw_shifts})"), bound);
            println!(
                "  {:<36} {:>8}",
                format!("built entries (|T|={} after rounding)", set.shift_set.shifts.len()),
                set.entries.len()
            );
            println!("  {:<36} {:>8}", "first-order means", set.len_means());
            println!("  {:<36} {:>8}", "low-pass covariances", set.lowpass_entries.len());
            println!("  {:<36} {:>8}", "total", set.len_total());
        }
    }
    Ok(())
}

fn run_filters(args: &FiltersArgs) -> Result<()> {
    use alphatex::image::ImagePlane;
    use alphatex::io::save_gray_png;
    let family = match args.family {
        FamilyArg::Morlet => WaveletFamily::Morlet,
        FamilyArg::BumpSteerable => WaveletFamily::BumpSteerable,
    };
    let bank = build_filter_bank(args.size, args.scales, args.orients, family)?;
    fs::create_dir_all(&args.out)?;
    let n = args.size;
    // Three side-by-side panels, each centered on the grid for readability.
    let render = |spatial: &[num_complex::Complex64], path: &Path| -> Result<()> {
        let maxv = spatial.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1e-300);
        let mut panel = vec![0.0; n * 3 * n];
        for y in 0..n {
            for x in 0..n {
                let src = ((y + n / 2) % n) * n + ((x + n / 2) % n);
                let z = spatial[src];
                panel[y * 3 * n + x] = 0.5 + 0.5 * z.re / maxv;
                panel[y * 3 * n + n + x] = 0.5 + 0.5 * z.im / maxv;
                panel[y * 3 * n + 2 * n + x] = z.norm() / maxv;
            }
        }
        // Pad to a square power-of-two canvas accepted by the plane type.
        let side = (3 * n).next_power_of_two();
        let mut canvas = vec![0.0; side * side];
        for y in 0..n {
            canvas[y * side..y * side + 3 * n].copy_from_slice(&panel[y * 3 * n..(y + 1) * 3 * n]);
        }
        save_gray_png(path, &ImagePlane::new(side, canvas)?)?;
        Ok(())
    };
    for jj in 0..args.scales {
        for ll in 0..args.orients {
            let spatial = bank.band_pass_spatial(jj, ll);
            render(&spatial, &args.out.join(format!("filter_j{jj}_t{ll}.png")))?;
        }
    }
    render(&bank.low_pass_spatial(), &args.out.join("lowpass.png"))?;
    println!(
        "wrote {} filter panels to {}",
        args.scales * args.orients + 1,
        args.out.display()
    );
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<()> {
    let reports = oracles::run_all(alphatex::Seed(args.seed))?;
    let selected: Vec<_> = reports
        .into_iter()
        .filter(|r| args.only.as_ref().is_none_or(|o| r.name.contains(o.as_str())))
        .collect();
    if selected.is_empty() {
        bail!("no verification check matches the filter");
    }
    println!("{}", serde_json::to_string_pretty(&selected)?);
    if selected.iter().any(|r| !r.passed) {
        bail!("verification failed");
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap renders help/version on stdout with success status.
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if cli.jobs > 1 {
        // Reductions use fixed summation orders, so extra workers never
        // change results; ignore failures if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    let result = match &cli.cmd {
        Cmd::Synth(a) => run_synth(a),
        Cmd::Stats(a) => run_stats(a),
        Cmd::Count(a) => run_count(a),
        Cmd::Filters(a) => run_filters(a),
        Cmd::Verify(a) => run_verify(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

//! Command-line driver.
//!
//! Exit codes: 0 success, 1 I/O, parse or data errors, 2 when `eval`
//! exceeds `--assert-max-nrmse`, 64 usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;

use crate::acquisition::{
    apply_sampling, generate_cartesian_mask, generate_phantom, read_mask, write_mask, SamplingMask,
};
use crate::config::PipelineConfig;
use crate::datamodel::{
    extract_navigator, read_cube, to_kspace, write_cube, CubeKind, ImageSeries, KTDataset,
};
use crate::error::{Error, Result};
use crate::metrics::{
    framewise_nrmse, report_csv, write_report_csv, zero_filled_baseline, EvalReport,
};
use crate::numerics::ComplexCube;
use crate::recon::{run_reconstruction, Reconstruction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_THRESHOLD: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "kbilmdm",
    version,
    about = "Kernel bi-linear manifold reconstruction of dynamic MRI"
)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set recon.lambda1=0.3` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Default)]
struct GeometryArgs {
    #[arg(long)]
    np: Option<usize>,
    #[arg(long)]
    nf: Option<usize>,
    #[arg(long)]
    nfr: Option<usize>,
    /// Motion cycles in the series.
    #[arg(long)]
    cycles: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct MaskArgs {
    /// Target acceleration rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Navigator lines per frame.
    #[arg(long)]
    nu: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic periodic phantom.
    Phantom {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a Cartesian undersampling mask.
    Mask {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct from k-space (or images, which are transformed first).
    Recon {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Input cube; image cubes are transformed to k-space.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the zero-filled baseline here.
        #[arg(long)]
        zero_filled: Option<PathBuf>,
        /// Write solver diagnostics here.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Frame-wise NRMSE of an estimate against a reference.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "est")]
        estimate: PathBuf,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Exit with status 2 when the global NRMSE exceeds this value.
        #[arg(long)]
        assert_max_nrmse: Option<f64>,
    },
    /// Phantom, mask, reconstruction and metrics in one go.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        mask: MaskArgs,
        /// Seed of both the phantom and the mask.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "kbilmdm-out")]
        out_dir: PathBuf,
        /// Also export PNG frames of the reference and reconstruction.
        #[arg(long)]
        png: bool,
    },
    /// Write 8-bit grayscale magnitude frames.
    ExportPng {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "frame")]
        prefix: String,
    },
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();

    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build()
        {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(Error::Config(format!("cannot start {n} threads: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Phantom {
            cfg,
            geometry,
            seed,
            out,
        } => {
            let c = load_config(&cfg, &geometry, &MaskArgs::default(), seed, None)?;
            let x = generate_phantom(&c.phantom.spec())?;
            write_cube(&out, &x.cube, CubeKind::Image)?;
            Ok(EXIT_OK)
        }
        Command::Mask {
            cfg,
            geometry,
            mask,
            seed,
            out,
        } => {
            let c = load_config(&cfg, &geometry, &mask, None, seed)?;
            let m = generate_cartesian_mask(
                c.phantom.n_p,
                c.phantom.n_fr,
                c.mask.nu,
                c.mask.rate,
                c.mask.seed,
            )?;
            write_mask(&out, &m)?;
            Ok(EXIT_OK)
        }
        Command::Recon {
            cfg,
            input,
            mask,
            out,
            zero_filled,
            diagnostics,
        } => {
            let c = load_config(
                &cfg,
                &GeometryArgs::default(),
                &MaskArgs::default(),
                None,
                None,
            )?;
            let m = read_mask(&mask)?;
            let sampled = sampled_kspace(&input, &m)?;
            let r = reconstruct(&c, &sampled, &m)?;
            write_cube(&out, &r.images.cube, CubeKind::Image)?;
            if let Some(path) = zero_filled {
                write_cube(&path, &zero_filled_baseline(&sampled).cube, CubeKind::Image)?;
            }
            if let Some(path) = diagnostics {
                write_text(&path, &diagnostics_text(&r))?;
            }
            Ok(EXIT_OK)
        }
        Command::Eval {
            reference,
            estimate,
            csv,
            assert_max_nrmse,
        } => {
            let report = evaluate(&reference, &estimate)?;
            match csv {
                Some(path) => {
                    write_report_csv(&path, &report)?;
                    println!(
                        "nrmse={:.6e} mean={:.6e} std={:.6e}",
                        report.global_nrmse, report.mean, report.std
                    );
                }
                None => print!("{}", report_csv(&report)),
            }
            match assert_max_nrmse {
                Some(limit) if !(report.global_nrmse <= limit) => {
                    eprintln!(
                        "nrmse {:.6e} exceeds the limit {limit:e}",
                        report.global_nrmse
                    );
                    Ok(EXIT_THRESHOLD)
                }
                _ => Ok(EXIT_OK),
            }
        }
        Command::Pipeline {
            cfg,
            geometry,
            mask,
            seed,
            out_dir,
            png,
        } => {
            let c = load_config(&cfg, &geometry, &mask, seed, seed)?;
            pipeline(&c, &out_dir, png)?;
            Ok(EXIT_OK)
        }
        Command::ExportPng {
            input,
            out_dir,
            prefix,
        } => {
            let (cube, _) = read_cube(&input)?;
            export_png(&cube, &out_dir, &prefix)?;
            Ok(EXIT_OK)
        }
    }
}

fn load_config(
    args: &ConfigArgs,
    geometry: &GeometryArgs,
    mask: &MaskArgs,
    phantom_seed: Option<u64>,
    mask_seed: Option<u64>,
) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    if let Some(path) = &args.config {
        c.apply_file(path)?;
    }
    for s in &args.set {
        c.apply_override(s)?;
    }
    let p = &mut c.phantom;
    p.n_p = geometry.np.unwrap_or(p.n_p);
    p.n_f = geometry.nf.unwrap_or(p.n_f);
    p.n_fr = geometry.nfr.unwrap_or(p.n_fr);
    p.n_cycles = geometry.cycles.unwrap_or(p.n_cycles);
    p.seed = phantom_seed.unwrap_or(p.seed);
    c.mask.rate = mask.rate.unwrap_or(c.mask.rate);
    c.mask.nu = mask.nu.unwrap_or(c.mask.nu);
    c.mask.seed = mask_seed.unwrap_or(c.mask.seed);
    c.validate()?;
    Ok(c)
}

/// `S(Y)` from an image or k-space cube.
fn sampled_kspace(input: &Path, mask: &SamplingMask) -> Result<KTDataset> {
    let (cube, kind) = read_cube(input)?;
    let kspace = match kind {
        CubeKind::Image => to_kspace(&ImageSeries::new(cube)),
        CubeKind::KSpace => KTDataset::new(cube),
    };
    apply_sampling(mask, &kspace).map_err(|e| Error::Config(format!("{}: {e}", input.display())))
}

fn reconstruct(
    c: &PipelineConfig,
    sampled: &KTDataset,
    mask: &SamplingMask,
) -> Result<Reconstruction> {
    let nav = extract_navigator(sampled, mask.nu())?;
    let r = run_reconstruction(sampled, mask, &nav, &c.model, &c.recon)?;
    info!(
        "reconstruction finished after {} steps (converged: {})",
        r.diagnostics.iterations, r.diagnostics.converged
    );
    Ok(r)
}

fn evaluate(reference: &Path, estimate: &Path) -> Result<EvalReport> {
    let (x, _) = read_cube(reference)?;
    let (y, _) = read_cube(estimate)?;
    framewise_nrmse(&ImageSeries::new(x), &ImageSeries::new(y))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn diagnostics_text(r: &Reconstruction) -> String {
    let d = &r.diagnostics;
    let mut s = String::new();
    s += &format!(
        "iterations = {}\nconverged = {}\n",
        d.iterations, d.converged
    );
    s += &format!("landmarks = {:?}\n", r.landmarks.indices);
    s += &format!(
        "kernel = {} gamma={:e} c={:e} r={}\n",
        r.kernel.kind, r.kernel.gamma, r.kernel.c, r.kernel.r
    );
    if let Some(w) = d.weights {
        s += &format!(
            "lambda1 = {:e}\nlambda2 = {:e}\nlambda3 = {:e}\nc_d = {:e}\ntau_d = {:e}\ntau_b = {:e}\n",
            w.lambda1, w.lambda2, w.lambda3, w.c_d, w.tau_d, w.tau_b
        );
    }
    s += &format!(
        "ball_residual = {:e}\ncolsum_residual = {:e}\n",
        r.ball_residual, r.colsum_residual
    );
    s += "step,objective,gamma,relative_change,d_iterations,b_iterations\n";
    s += &format!("0,{:.10e},,,,\n", d.objective[0]);
    for (i, step) in d.steps.iter().enumerate() {
        s += &format!(
            "{},{:.10e},{:.10e},{:.10e},{},{}\n",
            i + 1,
            d.objective[i + 1],
            d.gammas[i],
            d.relative_change[i],
            step.d.iterations,
            step.b.iterations
        );
    }
    s
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Phantom, mask, sampling, reconstruction and metrics into `out_dir`.
pub fn pipeline(c: &PipelineConfig, out_dir: &Path, png: bool) -> Result<()> {
    c.validate()?;
    create_dir(out_dir)?;
    write_text(&out_dir.join("config.txt"), &c.to_text())?;

    let x = generate_phantom(&c.phantom.spec())?;
    write_cube(out_dir.join("phantom.kblm"), &x.cube, CubeKind::Image)?;
    let mask = generate_cartesian_mask(
        c.phantom.n_p,
        c.phantom.n_fr,
        c.mask.nu,
        c.mask.rate,
        c.mask.seed,
    )?;
    write_mask(out_dir.join("mask.kblmmask"), &mask)?;
    let sampled = apply_sampling(&mask, &to_kspace(&x))?;
    write_cube(out_dir.join("kspace.kblm"), &sampled.cube, CubeKind::KSpace)?;

    let zf = zero_filled_baseline(&sampled);
    write_cube(out_dir.join("zero_filled.kblm"), &zf.cube, CubeKind::Image)?;
    let r = reconstruct(c, &sampled, &mask)?;
    write_cube(out_dir.join("recon.kblm"), &r.images.cube, CubeKind::Image)?;
    write_text(&out_dir.join("diagnostics.txt"), &diagnostics_text(&r))?;

    let recon_report = framewise_nrmse(&x, &r.images)?;
    let zf_report = framewise_nrmse(&x, &zf)?;
    write_report_csv(out_dir.join("metrics.csv"), &recon_report)?;
    write_report_csv(out_dir.join("zero_filled_metrics.csv"), &zf_report)?;
    let summary = format!(
        "recon_nrmse = {:.10e}\nzero_filled_nrmse = {:.10e}\nrecon_framewise_mean = {:.10e}\nrecon_framewise_std = {:.10e}\niterations = {}\n",
        recon_report.global_nrmse, zf_report.global_nrmse, recon_report.mean, recon_report.std, r.diagnostics.iterations
    );
    write_text(&out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");

    if png {
        export_png(&x.cube, &out_dir.join("png"), "phantom")?;
        export_png(&r.images.cube, &out_dir.join("png"), "recon")?;
        export_png(&zf.cube, &out_dir.join("png"), "zero_filled")?;
    }
    Ok(())
}

/// One 8-bit grayscale PNG per frame, magnitudes scaled by the maximum
/// over the whole series. Files are `<prefix>_<frame>.png` with the frame
/// index zero-padded to at least three digits.
pub fn export_png(cube: &ComplexCube, out_dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let max = cube
        .frames()
        .iter()
        .flat_map(|f| f.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let width = (cube.n_fr().saturating_sub(1)).to_string().len().max(3);
    let (n_p, n_f) = (cube.n_p(), cube.n_f());
    let (w, h) = (
        u32::try_from(n_f).map_err(|_| Error::dim("frame too wide for PNG"))?,
        u32::try_from(n_p).map_err(|_| Error::dim("frame too tall for PNG"))?,
    );
    let mut paths = Vec::with_capacity(cube.n_fr());
    for (j, frame) in cube.frames().iter().enumerate() {
        let mut pixels = Vec::with_capacity(n_p * n_f);
        for r in 0..n_p {
            for col in 0..n_f {
                pixels.push((frame[(r, col)].norm() * scale).round().clamp(0.0, 255.0) as u8);
            }
        }
        let path = out_dir.join(format!("{prefix}_{j:0width$}.png"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let png_err = |e: png::EncodingError| Error::io(&path, std::io::Error::other(e));
        let mut encoder = png::Encoder::new(BufWriter::new(file), w, h);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&pixels).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
        paths.push(path);
    }
    Ok(paths)
}

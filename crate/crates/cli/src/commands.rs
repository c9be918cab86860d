use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fz_core::container::{self, CompressedContainer, Options};
use fz_core::io_corpus::{self, GeneratorKind};
use fz_core::metrics::{self, MetricsReport};
use fz_core::{Dims, EbMode, FieldF32, Result};

use crate::{
    BenchArgs, CompressArgs, DecompressArgs, ReportFormat, SourceArgs, SweepArgs, VerifyArgs,
    EXIT_VERIFY_FAILED,
};

fn load_field(source: &SourceArgs) -> Result<FieldF32> {
    let dims = Dims::new(&source.dims)?;
    match (&source.input, &source.generate) {
        (Some(path), None) => {
            let field = io_corpus::read_raw_f32(path, dims)?;
            if let Some((count, first)) = io_corpus::scan_non_finite(&field) {
                eprintln!(
                    "warning: {count} non-finite value(s) in {}, first at index {first}",
                    path.display()
                );
            }
            Ok(field)
        }
        (None, Some(kind)) => {
            let kind: GeneratorKind = kind.parse()?;
            io_corpus::generate(kind, dims, source.seed)
        }
        (None, None) | (Some(_), Some(_)) => Err(fz_core::Error::UnknownGenerator(
            "exactly one of --input or --generate is required".into(),
        )),
    }
}

/// Writes through a temp file and renames, so failures leave no partial
/// output behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn gb(bytes: u64) -> f64 {
    bytes as f64 / 1e9
}

pub fn compress(args: CompressArgs) -> Result<u8> {
    let field = load_field(&args.source)?;
    let options = Options {
        strict: args.strict,
        log_transform: args.log_transform,
        workers: args.workers.max(1),
    };
    let start = Instant::now();
    let (container, _) = container::compress_timed(&field, args.eb_mode.into(), args.eb, &options)?;
    let seconds = start.elapsed().as_secs_f64();
    let output = args.output.unwrap_or_else(|| default_output(&args.source));
    write_atomic(&output, &container.serialize())?;
    let cr = container.compression_ratio();
    println!(
        "wrote {}: {} -> {} bytes, ratio {:.2}, bitrate {:.4} bits/value, {:.3} GB/s, overflow_count {}",
        output.display(),
        container.header.element_count * 4,
        container.size_bytes(),
        cr,
        metrics::bitrate(cr),
        gb(container.header.element_count * 4) / seconds,
        container.header.overflow_count,
    );
    Ok(0)
}

fn default_output(source: &SourceArgs) -> PathBuf {
    match &source.input {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".fz");
            PathBuf::from(name)
        }
        None => PathBuf::from("generated.fz"),
    }
}

pub fn decompress(args: DecompressArgs) -> Result<u8> {
    let bytes = fs::read(&args.input)?;
    let container = CompressedContainer::parse(&bytes)?;
    let field = container::decompress(&container, args.workers.max(1))?;
    let mut out = Vec::with_capacity(field.len() * 4);
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&args.output, &out)?;
    println!(
        "wrote {}: {} values (rank {})",
        args.output.display(),
        field.len(),
        field.dims().rank()
    );
    Ok(0)
}

struct BoundCheck {
    guaranteed: bool,
    passed: bool,
    measured: f64,
    limit: f64,
}

fn check_bound(
    original: &FieldF32,
    reconstructed: &FieldF32,
    container: &CompressedContainer,
) -> Result<(BoundCheck, f64)> {
    let eb_abs = container.header.eb_abs;
    let max_err = metrics::max_abs_error(original.data(), reconstructed.data())?;
    if container.header.log_transformed() {
        // The bound applies to the log-transformed values; allow for the
        // exp/ln round trip's float rounding.
        let lx = container::log_transform(original, container::LogDirection::Forward)?;
        let ly = container::log_transform(reconstructed, container::LogDirection::Forward)?;
        let log_err = metrics::max_abs_error(lx.data(), ly.data())?;
        let scale = lx.data().iter().fold(1f64, |m, &v| m.max((v as f64).abs()));
        let limit = eb_abs + 4.0 * f32::EPSILON as f64 * scale;
        Ok((
            BoundCheck {
                guaranteed: container.header.overflow_count == 0,
                passed: log_err <= limit,
                measured: log_err,
                limit,
            },
            max_err,
        ))
    } else {
        Ok((
            BoundCheck {
                guaranteed: container.header.overflow_count == 0,
                passed: max_err <= eb_abs,
                measured: max_err,
                limit: eb_abs,
            },
            max_err,
        ))
    }
}

pub fn verify(args: VerifyArgs) -> Result<u8> {
    let field = load_field(&args.source)?;
    let options = Options {
        strict: args.strict,
        log_transform: args.log_transform,
        workers: args.workers.max(1),
    };
    let start = Instant::now();
    let container = container::compress(&field, args.eb_mode.into(), args.eb, &options)?;
    let compress_seconds = start.elapsed().as_secs_f64();
    let reconstructed = container::decompress(&container, options.workers)?;
    let (bound, max_err) = check_bound(&field, &reconstructed, &container)?;

    let cr = container.compression_ratio();
    let throughput = gb(container.header.element_count * 4) / compress_seconds;
    let report = MetricsReport {
        max_abs_err: max_err,
        mse: metrics::mse(field.data(), reconstructed.data())?,
        psnr_db: metrics::psnr(field.data(), reconstructed.data())?,
        ssim: if field.dims().rank() >= 2 {
            Some(metrics::ssim(&field, &reconstructed)?)
        } else {
            None
        },
        compression_ratio: cr,
        bitrate_bits_per_value: metrics::bitrate(cr),
        compress_seconds,
        throughput_gb_per_s: throughput,
        overall_throughput_gb_per_s: metrics::overall_throughput(throughput, cr, args.bandwidth)?,
    };
    print_report(&report, args.report, &container, &bound);
    if bound.guaranteed && !bound.passed {
        eprintln!(
            "verification failed: max error {} exceeds bound {}",
            bound.measured, bound.limit
        );
        return Ok(EXIT_VERIFY_FAILED);
    }
    Ok(0)
}

fn print_report(
    report: &MetricsReport,
    format: ReportFormat,
    container: &CompressedContainer,
    bound: &BoundCheck,
) {
    let verdict = if !bound.guaranteed {
        "not guaranteed"
    } else if bound.passed {
        "pass"
    } else {
        "FAIL"
    };
    let ssim = report
        .ssim
        .map_or(String::from(""), |s| format!("{s:.6}"));
    match format {
        ReportFormat::Csv => {
            println!(
                "eb_abs,max_abs_err,mse,psnr_db,ssim,compression_ratio,bitrate,compress_seconds,throughput_gb_s,overall_gb_s,overflow_count,bound_check"
            );
            println!(
                "{},{},{},{},{ssim},{},{},{},{},{},{},{verdict}",
                container.header.eb_abs,
                report.max_abs_err,
                report.mse,
                report.psnr_db,
                report.compression_ratio,
                report.bitrate_bits_per_value,
                report.compress_seconds,
                report.throughput_gb_per_s,
                report.overall_throughput_gb_per_s,
                container.header.overflow_count,
            );
        }
        ReportFormat::Text => {
            println!("error bound (abs)   {}", container.header.eb_abs);
            println!("max abs error       {}", report.max_abs_err);
            println!("mse                 {}", report.mse);
            println!("psnr                {:.4} dB", report.psnr_db);
            if !ssim.is_empty() {
                println!("ssim                {ssim}");
            }
            println!("compression ratio   {:.4}", report.compression_ratio);
            println!("bitrate             {:.4} bits/value", report.bitrate_bits_per_value);
            println!("compress time       {:.6} s", report.compress_seconds);
            println!("throughput          {:.4} GB/s", report.throughput_gb_per_s);
            println!(
                "overall throughput  {:.4} GB/s (modeled)",
                report.overall_throughput_gb_per_s
            );
            println!("overflow count      {}", container.header.overflow_count);
            println!("bound check         {verdict}");
        }
    }
}

pub fn sweep(args: SweepArgs) -> Result<u8> {
    let field = load_field(&args.source)?;
    let options = Options {
        strict: false,
        log_transform: args.log_transform,
        workers: args.workers.max(1),
    };
    let mut csv = String::from("eb,eb_abs,compression_ratio,bitrate,psnr_db,ssim\n");
    let mut failures = 0usize;
    for &eb in &args.ebs {
        match sweep_row(&field, args.eb_mode.into(), eb, &options) {
            Ok(row) => csv.push_str(&row),
            Err(err) => {
                failures += 1;
                eprintln!("eb {eb}: {err}");
            }
        }
    }
    match &args.output {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(if failures == args.ebs.len() && failures > 0 {
        EXIT_VERIFY_FAILED
    } else {
        0
    })
}

fn sweep_row(field: &FieldF32, mode: EbMode, eb: f64, options: &Options) -> Result<String> {
    let container = container::compress(field, mode, eb, options)?;
    let reconstructed = container::decompress(&container, options.workers)?;
    let cr = container.compression_ratio();
    let psnr = metrics::psnr(field.data(), reconstructed.data())?;
    let ssim = if field.dims().rank() >= 2 {
        format!("{:.6}", metrics::ssim(field, &reconstructed)?)
    } else {
        String::new()
    };
    Ok(format!(
        "{eb},{},{cr},{},{psnr},{ssim}\n",
        container.header.eb_abs,
        metrics::bitrate(cr),
    ))
}

pub fn bench(args: BenchArgs) -> Result<u8> {
    let field = load_field(&args.source)?;
    let options = Options {
        strict: false,
        log_transform: false,
        workers: args.workers.max(1),
    };
    let reps = args.reps.max(1);
    let bytes = field.len() as u64 * 4;
    let mut quantize = Vec::with_capacity(reps);
    let mut shuffle = Vec::with_capacity(reps);
    let mut encode = Vec::with_capacity(reps);
    let mut total = Vec::with_capacity(reps);
    let mut decompress_s = Vec::with_capacity(reps);
    let mut container = None;
    for _ in 0..reps {
        let start = Instant::now();
        let (c, timings) = container::compress_timed(&field, args.eb_mode.into(), args.eb, &options)?;
        total.push(start.elapsed().as_secs_f64());
        quantize.push(timings.quantize);
        shuffle.push(timings.shuffle_flag);
        encode.push(timings.encode);
        let start = Instant::now();
        let _ = container::decompress(&c, options.workers)?;
        decompress_s.push(start.elapsed().as_secs_f64());
        container = Some(c);
    }
    let container = container.expect("reps >= 1");
    let cr = container.compression_ratio();
    let med = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (q, s, e, t, d) = (
        med(&mut quantize),
        med(&mut shuffle),
        med(&mut encode),
        med(&mut total),
        med(&mut decompress_s),
    );
    let rate = |secs: f64| gb(bytes) / secs;
    println!("field               {} values ({} bytes)", field.len(), bytes);
    println!("workers             {}", options.workers);
    println!("reps                {reps} (medians below)");
    println!("quantize            {:.6} s  {:.4} GB/s", q, rate(q));
    println!("shuffle+flag        {:.6} s  {:.4} GB/s", s, rate(s));
    println!("encode              {:.6} s  {:.4} GB/s", e, rate(e));
    println!("compress total      {:.6} s  {:.4} GB/s", t, rate(t));
    println!("decompress total    {:.6} s  {:.4} GB/s", d, rate(d));
    println!("compression ratio   {cr:.4}");
    println!(
        "overall throughput  {:.4} GB/s (modeled, link {} GB/s)",
        metrics::overall_throughput(rate(t), cr, args.bandwidth)?,
        args.bandwidth
    );
    Ok(0)
}

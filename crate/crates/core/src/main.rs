use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coxnet::assign::GeoShapeParams;
use coxnet::harness::bench::{assign_bench, format_json, format_table};
use coxnet::harness::config::HarnessConfig;
use coxnet::harness::pipeline::run_pipeline;
use coxnet::harness::selftest;

#[derive(Parser)]
#[command(name = "coxnet", about = "wavelet fusion / alignment / assignment demos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in invariant battery.
    Selftest,
    /// Run the full pipeline on a scene config; dump feature maps and the
    /// report.
    FuseDemo(FuseDemoArgs),
    /// Recover the constant shift of a scene config and print the error.
    AlignRecover(ConfigArg),
    /// Tabulate IoU / GIoU / GeoShape for shifted square boxes.
    AssignBench(BenchArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Path to a JSON scene config.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct FuseDemoArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for FMAP dumps and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated square box side lengths, pixels.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<f64>,
    /// Comma-separated shifts, pixels.
    #[arg(long, value_delimiter = ',', required = true)]
    shifts: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Emit a JSON array instead of the table.
    #[arg(long)]
    json: bool,
}

fn load_config(path: &PathBuf) -> coxnet::Result<HarnessConfig> {
    HarnessConfig::from_json(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> coxnet::Result<bool> {
    match cli.command {
        Command::Selftest => {
            let (transcript, ok) = selftest::run();
            print!("{}", transcript);
            Ok(ok)
        }
        Command::FuseDemo(args) => {
            let cfg = load_config(&args.config)?;
            let (report, scene, fused_before, fused_after) = run_pipeline(&cfg)?;
            fs::create_dir_all(&args.out)?;
            for (name, map) in [
                ("visible", &scene.visible),
                ("thermal", &scene.thermal),
                ("fused_before", &fused_before),
                ("fused_after", &fused_after),
            ] {
                let file = fs::File::create(args.out.join(format!("{}.fmap", name)))?;
                map.write_fmap(file)?;
            }
            fs::write(args.out.join("report.json"), report.to_json())?;
            for (stage, ms) in &report.timings_ms {
                eprintln!("{:>16}: {:.2} ms", stage, ms);
            }
            print!("{}", report.to_json());
            Ok(true)
        }
        Command::AlignRecover(args) => {
            let cfg = load_config(&args.config)?;
            let (report, _, _, _) = run_pipeline(&cfg)?;
            println!(
                "true shift      ({:.4}, {:.4})",
                report.true_shift.0, report.true_shift.1
            );
            println!(
                "recovered shift ({:.4}, {:.4})",
                report.recovered_shift.0, report.recovered_shift.1
            );
            println!("error           {:.4} px", report.shift_error);
            Ok(true)
        }
        Command::AssignBench(args) => {
            let params = GeoShapeParams::new(args.gamma, args.beta)?;
            let rows = assign_bench(&args.sizes, &args.shifts, &params)?;
            if args.json {
                print!("{}", format_json(&rows));
            } else {
                print!("{}", format_table(&rows));
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::FAILURE
        }
    }
}

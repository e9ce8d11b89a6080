use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pseudolidar::cost_volume::{build_disparity_volume, depth_grid, remap_to_depth_volume};
use pseudolidar::eval::{binned_median_error, default_bins};
use pseudolidar::gdc::{gdc_pipeline, SolveOptions};
use pseudolidar::kitti;
use pseudolidar::lidar::{BeamSelection, Extrinsics};
use pseudolidar::synth::{corrupt, demo_scene, render};

#[derive(Parser)]
#[command(
    name = "pseudolidar",
    about = "Stereo depth estimation, pseudo-LiDAR generation, and graph-based depth correction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Beams {
    #[value(name = "2")]
    Two,
    #[value(name = "4")]
    Four,
    #[value(name = "64")]
    SixtyFour,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic KITTI-layout scene directory.
    Synth {
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 96)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Constant depth bias applied to the scene's object, meters.
        #[arg(long, default_value_t = 2.0)]
        bias: f64,
    },
    /// Estimate a depth map from a rectified stereo pair via block matching,
    /// depth-volume remapping, and soft-argmax.
    Estimate {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_disparity: usize,
        #[arg(long, default_value_t = 9)]
        window: usize,
        /// Optional raw dump of the depth cost volume.
        #[arg(long)]
        dump_volume: Option<PathBuf>,
    },
    /// Correct a stereo depth map with sparse LiDAR landmarks.
    /// Exits 0 on convergence, 2 when the solver did not converge.
    Correct {
        /// Stereo depth map, 16-bit PNG (meters * 256).
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        /// Velodyne .bin scan in the LiDAR frame.
        #[arg(long)]
        velodyne: PathBuf,
        #[arg(long, value_enum, default_value = "4")]
        beams: Beams,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Weight regularization; larger values smooth noisy depth maps harder.
        #[arg(long, default_value_t = pseudolidar::knn::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Damping on the correction; suppresses large global tilts on maps
        /// with big flat regions at the cost of shorter correction reach.
        #[arg(long, default_value_t = 0.0)]
        damp: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a predicted depth map against ground truth, binned by depth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Optional CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Optional SVG bar-chart output path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> pseudolidar::Result<ExitCode> {
    match cli.command {
        Command::Synth { out, width, height, seed, bias } => {
            std::fs::create_dir_all(&out)?;
            let spec = demo_scene(width, height, seed, bias);
            let scene = render(&spec);
            let corrupted = corrupt(&scene.depth, &scene.labels, &spec);
            kitti::write_gray_png(out.join("left.png"), &scene.left)?;
            kitti::write_gray_png(out.join("right.png"), &scene.right)?;
            kitti::write_depth_png(out.join("depth_gt.png"), &scene.depth)?;
            kitti::write_depth_png(out.join("depth_stereo.png"), &corrupted)?;
            kitti::write_velodyne(out.join("velodyne.bin"), &scene.scan)?;
            kitti::write_calib(out.join("calib.txt"), &spec.calib)?;
            println!(
                "wrote scene to {}: {} lidar points, {} valid depth pixels",
                out.display(),
                scene.scan.len(),
                scene.depth.grid.valid_count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { left, right, calib, out, max_disparity, window, dump_volume } => {
            let left = kitti::read_gray_png(left)?;
            let right = kitti::read_gray_png(right)?;
            let calib = kitti::read_calib(calib)?.stereo_calib()?;
            let vol = build_disparity_volume(&left, &right, max_disparity, window)?;
            let dvol = remap_to_depth_volume(&vol, &calib, &depth_grid(1.0, 1.0, 80))?;
            if let Some(path) = dump_volume {
                kitti::write_volume_dump(path, &dvol)?;
            }
            let z = dvol.soft_argmax_depth()?;
            kitti::write_depth_png(&out, &z)?;
            println!("wrote depth map to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Correct { depth, calib, velodyne, beams, k, lambda, tol, damp, out } => {
            let z_map = kitti::read_depth_png(depth)?;
            let calib_file = kitti::read_calib(calib)?;
            let stereo = calib_file.stereo_calib()?;
            let scan = kitti::read_velodyne(velodyne)?;
            let selection = match beams {
                Beams::Two => BeamSelection::two_beam(),
                Beams::Four => BeamSelection::four_beam(),
                Beams::SixtyFour => BeamSelection::full(),
            };
            let extrinsics = calib_file.tr_velo_to_cam.unwrap_or_else(Extrinsics::camera_axes);
            let result = gdc_pipeline(
                &z_map,
                &stereo,
                &scan,
                &selection,
                &extrinsics,
                k,
                lambda,
                SolveOptions { tol, max_iter: None, damp },
            )?;
            kitti::write_depth_png(&out, &result.corrected.map)?;
            println!(
                "landmarks {} | iterations {} | residual {:.3e} | converged {}",
                result.counts.landmarks,
                result.corrected.iterations,
                result.corrected.residual,
                result.corrected.converged
            );
            if result.corrected.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Eval { pred, truth, csv, svg } => {
            let pred = kitti::read_depth_png(pred)?;
            let truth = kitti::read_depth_png(truth)?;
            let report = binned_median_error(&pred, &truth, &default_bins())?;
            print!("{}", report.to_table());
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv())?;
            }
            if let Some(path) = svg {
                std::fs::write(path, report.to_svg())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

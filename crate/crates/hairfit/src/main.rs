use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hairfit::config::{DenoiserKind, RunConfig};
use hairfit::pipeline;
use hairfit::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hairfit", version, about = "Strand hair reconstruction from colorless mesh scans")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "HAIRFIT_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Seed for roots, initialization and per-step sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Hair mesh (OBJ or PLY).
    #[arg(long, global = true)]
    hair: Option<PathBuf>,
    /// Scalp mesh with UVs; the built-in hemisphere when absent.
    #[arg(long, global = true)]
    scalp: Option<PathBuf>,
    /// Directory of external `edge_NNN.png` maps.
    #[arg(long, global = true)]
    edge_maps: Option<PathBuf>,
    /// Condition embedding for the prior.
    #[arg(long, global = true)]
    condition: Option<PathBuf>,
    /// Ground-truth strands evaluated by `all`.
    #[arg(long, global = true)]
    gt_strands: Option<PathBuf>,
    /// Turntable view count.
    #[arg(long, global = true)]
    views: Option<usize>,
    /// Render width and height, px.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Strand count.
    #[arg(long, global = true)]
    strands: Option<usize>,
    /// Optimization steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Adam learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Prior denoiser.
    #[arg(long, global = true, value_enum)]
    denoiser: Option<DenoiserKind>,
    /// Weight of the diffusion prior.
    #[arg(long, global = true)]
    lambda_diff: Option<f64>,
    /// Share of the crest-line field in the orientation loss.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Voxel edge for `voxelize`, mm.
    #[arg(long, global = true)]
    voxel: Option<f64>,
    /// Tube radius for `voxelize`, mm.
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Skip per-view image dumps.
    #[arg(long, global = true)]
    no_view_dumps: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Crest-line and render orientation fields.
    Orient,
    /// Shading and depth renders only.
    Render,
    /// Strand optimization against the fields from `orient`.
    Fit,
    /// Precision, recall and F-score of predicted strands.
    Eval { pred: PathBuf, gt: PathBuf },
    /// Tube mesh around strands.
    Voxelize {
        #[arg(value_name = "STRANDS")]
        input: PathBuf,
        mesh: PathBuf,
    },
    /// orient, fit, then eval when ground truth is given.
    All,
    /// Print the resolved configuration.
    Config,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *dst = v.clone();
            }
        }
        fn set_opt<T: Clone>(dst: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                *dst = v.clone();
            }
        }
        set(&mut c.seed, &self.seed);
        set(&mut c.output.dir, &self.out);
        set_opt(&mut c.input.hair_mesh, &self.hair);
        set_opt(&mut c.input.scalp_mesh, &self.scalp);
        set_opt(&mut c.input.edge_maps, &self.edge_maps);
        set_opt(&mut c.input.condition, &self.condition);
        set_opt(&mut c.input.gt_strands, &self.gt_strands);
        set(&mut c.render.views, &self.views);
        if let Some(r) = self.resolution {
            c.render.width = r;
            c.render.height = r;
        }
        set(&mut c.scalp.strands, &self.strands);
        set(&mut c.fit.steps, &self.steps);
        set(&mut c.fit.lr, &self.lr);
        set(&mut c.prior.denoiser, &self.denoiser);
        set(&mut c.weights.diff, &self.lambda_diff);
        set(&mut c.weights.alpha, &self.alpha);
        set(&mut c.voxelize.voxel, &self.voxel);
        set(&mut c.voxelize.radius, &self.radius);
        if self.no_view_dumps {
            c.output.views = false;
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().map_err(|e| Error::stage("threads", e))?;
    match cli.command {
        Command::Orient => pipeline::cmd_orient(&cfg).map(drop),
        Command::Render => pipeline::cmd_render(&cfg).map(drop),
        Command::Fit => pipeline::cmd_fit(&cfg).map(drop),
        Command::Eval { pred, gt } => pipeline::cmd_eval(&cfg, &pred, &gt).map(drop),
        Command::Voxelize { input, mesh } => pipeline::cmd_voxelize(&cfg, &input, &mesh).map(drop),
        Command::All => pipeline::cmd_all(&cfg).map(drop),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

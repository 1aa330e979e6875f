//! Command-line interface for the restricted four-body pipeline.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.

use clap::{Args, Parser, Subcommand};
use r4bp::equilibria::{self, EquilibriumLabel};
use r4bp::integrator::IntegrationSettings;
use r4bp::linstab;
use r4bp::manifolds::{self, GlobalizeSpec};
use r4bp::model::SystemConfig;
use r4bp::normal_form::{self, TruncatedSystem};
use r4bp::report::{self, SvgScene};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "r4bp", about = "Equilateral restricted four-body problem pipeline", version)]
struct Cli {
    /// Plain-text key=value config file; flags given on the command line
    /// override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Mass parameter of the two equal primaries.
    #[arg(long)]
    mu: Option<f64>,
    /// Output file (defaults to stdout for text formats).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List all equilibrium points as JSON.
    Equilibria {
        #[command(flatten)]
        common: Common,
    },
    /// Hill-region zero-velocity contour as CSV, optionally SVG.
    Hill {
        #[command(flatten)]
        common: Common,
        /// Jacobi constant; defaults to the critical value of the reference
        /// collinear point.
        #[arg(long)]
        jacobi: Option<f64>,
        #[arg(long, default_value_t = 400)]
        resolution: usize,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Linear stability report at the reference collinear point.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Locate the critical mass instead of analyzing a single mu.
        #[arg(long)]
        find_mu_b: bool,
    },
    /// Second-order normal form: JSON report plus generating-function files.
    NormalForm {
        #[command(flatten)]
        common: Common,
        /// Directory for the serialized W1/W2 polynomial files.
        #[arg(long)]
        poly_dir: Option<PathBuf>,
    },
    /// Versal deformation parameters and truncated-system level set.
    Versal {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        nu: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta_cap: f64,
        #[arg(long)]
        level_csv: Option<PathBuf>,
    },
    /// Globalize the unstable manifold; cut scatter as CSV, optionally SVG.
    Manifold {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = manifolds::DEFAULT_EPS_IC)]
        eps_ic: f64,
        #[arg(long, default_value_t = 512)]
        branches: usize,
        #[arg(long, default_value_t = 5)]
        cuts: usize,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Search a cut for orthogonal crossings (symmetric homoclinic orbits).
    Homoclinic {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = manifolds::DEFAULT_EPS_IC)]
        eps_ic: f64,
        #[arg(long, default_value_t = 512)]
        branches: usize,
        /// Cut index to search.
        #[arg(long, default_value_t = 5)]
        cuts: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file_cfg = match cli.config.as_deref().map(read_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command, &file_cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io: {e}"))
    }
}

fn read_config(path: &Path) -> Result<HashMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn resolve_mu(common: &Common, file_cfg: &HashMap<String, String>) -> Result<f64, CliError> {
    let mu = match common.mu {
        Some(m) => m,
        None => file_cfg
            .get("mu")
            .ok_or_else(|| CliError::Usage("mu is required (flag --mu or config key mu)".into()))?
            .parse()
            .map_err(|e| CliError::Usage(format!("mu in config: {e}")))?,
    };
    if !(0.0 < mu && mu <= 1.0 / 3.0) {
        return Err(CliError::Usage(format!("mu = {mu} outside (0, 1/3]")));
    }
    Ok(mu)
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn num<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn run(cmd: Command, file_cfg: &HashMap<String, String>) -> Result<(), CliError> {
    match cmd {
        Command::Equilibria { common } => {
            let mu = resolve_mu(&common, file_cfg)?;
            let cfg = SystemConfig::new(mu).map_err(num)?;
            let pts = equilibria::find_all(&cfg);
            let json = serde_json::json!({
                "mu": mu,
                "count": pts.len(),
                "collinear": pts.iter().filter(|p| p.label == EquilibriumLabel::Collinear).count(),
                "points": pts,
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))
        }
        Command::Hill { common, jacobi, resolution, svg } => {
            let mu = resolve_mu(&common, file_cfg)?;
            let cfg = SystemConfig::new(mu).map_err(num)?;
            let c = jacobi.unwrap_or_else(|| equilibria::l2_point(&cfg).jacobi_value);
            let grid =
                equilibria::hill_regions(&cfg, c, (-2.5, 2.5, -2.5, 2.5), (resolution, resolution));
            let loops = grid.contours(&cfg);
            emit(&common, &report::contours_csv(&loops))?;
            if let Some(path) = svg {
                let mut scene = SvgScene::new(800.0, 800.0);
                for lp in &loops {
                    scene.add_polyline(lp.clone(), "#1f77b4");
                }
                for p in &cfg.primaries {
                    scene.add_point(p.position, "#d62728");
                }
                scene.write(&path)?;
            }
            Ok(())
        }
        Command::Stability { common, find_mu_b } => {
            if find_mu_b {
                let (mu_b, omega) = linstab::find_mu_b((0.001, 0.01)).map_err(num)?;
                let json = serde_json::json!({ "mu_b": mu_b, "omega": omega });
                return emit(&common, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()));
            }
            let mu = resolve_mu(&common, file_cfg)?;
            let cfg = SystemConfig::new(mu).map_err(num)?;
            let eq = equilibria::l2_point(&cfg);
            let an = linstab::analyze(&cfg, &eq).map_err(num)?;
            let json = serde_json::json!({
                "mu": mu,
                "x_l2": eq.position.0,
                "a": an.a,
                "b": an.b,
                "discriminant": an.discriminant,
                "eigenvalues": an.eigenvalues.iter()
                    .map(|l| serde_json::json!({"re": l.re, "im": l.im}))
                    .collect::<Vec<_>>(),
                "regime": an.regime,
                "omega": an.omega,
                "alpha": an.alpha,
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))
        }
        Command::NormalForm { common, poly_dir } => {
            let (mu_b, nf, taylor) = normal_form::linear_nf_at_critical_mass().map_err(num)?;
            let res = normal_form::deprit_normal_form(&nf.p, &taylor).map_err(num)?;
            let cfg = SystemConfig::new(mu_b).map_err(num)?;
            let an = linstab::analyze(&cfg, &equilibria::l2_point(&cfg)).map_err(num)?;
            let nu = normal_form::versal_params(an.a, an.b).map_err(num)?;
            let mat = |m: &nalgebra::Matrix4<f64>| {
                (0..4)
                    .map(|i| (0..4).map(|j| m[(i, j)]).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            };
            let json = serde_json::json!({
                "mu_b": mu_b,
                "omega": nf.omega,
                "n31": nf.n31,
                "eps_sign": nf.eps_sign,
                "P": mat(&nf.p),
                "B": mat(&nf.b),
                "taylor": {
                    "a3": taylor.a3, "c3": taylor.c3,
                    "a4": taylor.a4, "c4": taylor.c4, "e4": taylor.e4,
                },
                "h": res.h,
                "nu1": nu.nu1,
                "nu2": nu.nu2,
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))?;
            if let Some(dir) = poly_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("w1.txt"), res.w1.serialize())?;
                std::fs::write(dir.join("w2.txt"), res.w2.serialize())?;
                std::fs::write(dir.join("h02.txt"), res.h02.serialize())?;
            }
            Ok(())
        }
        Command::Versal { common, nu, theta_cap, level_csv } => {
            let (nu1, nu2, mu) = match nu {
                Some(v) => (f64::NAN, v, None),
                None => {
                    let mu = resolve_mu(&common, file_cfg)?;
                    let cfg = SystemConfig::new(mu).map_err(num)?;
                    let an =
                        linstab::analyze(&cfg, &equilibria::l2_point(&cfg)).map_err(num)?;
                    let p = normal_form::versal_params(an.a, an.b).map_err(num)?;
                    (p.nu1, p.nu2, Some(mu))
                }
            };
            let h1 = 2.19104; // published second-order radial coefficient
            let sys = TruncatedSystem::new(nu2, h1, theta_cap).map_err(num)?;
            let json = serde_json::json!({
                "mu": mu,
                "nu1": if nu1.is_nan() { None } else { Some(nu1) },
                "nu2": nu2,
                "classification": sys.classification(),
                "equilibria_r": sys.equilibria(3.0),
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))?;
            if let Some(path) = level_csv {
                // separatrix level: through the origin when the angular
                // momentum vanishes, otherwise through the outermost radial
                // equilibrium (the potential maximum)
                let level = if theta_cap == 0.0 {
                    0.0
                } else {
                    sys.equilibria(3.0)
                        .iter()
                        .map(|&r| sys.hamiltonian(r, 0.0))
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let pts = sys.level_set(level, (0.02, 3.0), 600);
                std::fs::write(path, report::level_set_csv(&pts))?;
            }
            Ok(())
        }
        Command::Manifold { common, eps_ic, branches, cuts, svg } => {
            let mu = resolve_mu(&common, file_cfg)?;
            let cfg = SystemConfig::new(mu).map_err(num)?;
            let eq = equilibria::l2_point(&cfg);
            let frame = manifolds::eigen_frame(&cfg, &eq).map_err(num)?;
            let spec = GlobalizeSpec {
                n_cuts: cuts,
                settings: IntegrationSettings::default(),
                ..GlobalizeSpec::with_eps_ic(eps_ic)
            };
            let thetas: Vec<f64> = (0..branches)
                .map(|i| 2.0 * std::f64::consts::PI * i as f64 / branches as f64)
                .collect();
            let (cut_list, _) = manifolds::globalize(&cfg, &frame, &thetas, &spec);
            emit(&common, &report::cuts_csv(&cut_list))?;
            if let Some(path) = svg {
                let mut scene = SvgScene::new(800.0, 600.0);
                let palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
                for c in &cut_list {
                    let color = palette[(c.cut_index - 1) % palette.len()];
                    for (_, ev) in &c.points {
                        scene.add_point((ev.state.x, ev.state.vx), color);
                    }
                }
                scene.write(&path)?;
            }
            Ok(())
        }
        Command::Homoclinic { common, eps_ic, branches, cuts } => {
            let mu = resolve_mu(&common, file_cfg)?;
            let cfg = SystemConfig::new(mu).map_err(num)?;
            let eq = equilibria::l2_point(&cfg);
            let frame = manifolds::eigen_frame(&cfg, &eq).map_err(num)?;
            let spec = GlobalizeSpec {
                n_cuts: cuts,
                ..GlobalizeSpec::with_eps_ic(eps_ic)
            };
            let thetas: Vec<f64> = (0..branches)
                .map(|i| 2.0 * std::f64::consts::PI * i as f64 / branches as f64)
                .collect();
            let (cut_list, _) = manifolds::globalize(&cfg, &frame, &thetas, &spec);
            let target = cut_list
                .iter()
                .find(|c| c.cut_index == cuts)
                .ok_or_else(|| CliError::Usage(format!("no cut with index {cuts}")))?;
            let cands = manifolds::find_orthogonal_crossings(&cfg, &frame, target, &spec);
            let json = serde_json::json!({
                "mu": mu,
                "cut_index": cuts,
                "eps_ic": eps_ic,
                "branches": branches,
                "candidates": cands,
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))
        }
    }
}

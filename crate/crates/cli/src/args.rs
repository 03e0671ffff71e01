use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tkg_core::config::LatentPreset;
use tkg_core::MaskSpec;

#[derive(Debug, Parser)]
#[command(name = "tkg", version, about = "Chroma-key initial noise toolkit")]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample seeded standard-normal latent noise.
    Noise(NoiseArgs),
    /// Apply a color plan's channel mean shifts to a tensor.
    Shift(ShiftArgs),
    /// Render a (composed) Gaussian mask as an 8-bit PGM.
    Mask(MaskArgs),
    /// Blend original and color-shifted noise through a Gaussian mask.
    Blend(BlendArgs),
    /// Show the channel shifts of a named color.
    Plan(PlanArgs),
    /// Run the toy DDIM chroma-key experiment.
    Sim(SimArgs),
    /// Per-channel statistics of a tensor file (JSON).
    Analyze(AnalyzeArgs),
    /// Border uniformity of a PPM image against a key color.
    Uniformity(UniformityArgs),
    /// sample -> solve shifts -> shift -> masks -> blend -> write.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DimArgs {
    #[arg(long = "h")]
    pub height: Option<usize>,
    #[arg(long = "w")]
    pub width: Option<usize>,
    #[arg(long = "c")]
    pub channels: Option<usize>,
    /// Latent geometry preset: sd15 (64x64x4) or sdxl (128x128x4).
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<LatentPreset>,
}

#[derive(Debug, Clone, Args)]
pub struct ColorArgs {
    /// Registry color name [default: $TKG_DEFAULT_COLOR or green].
    #[arg(long, conflicts_with = "plan")]
    pub color: Option<String>,
    /// JSON color plan file ({"name": .., "shifts": {"2": 0.07}}).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Target shift magnitude for registry colors.
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// Extra JSON color registry merged over the built-ins.
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub dims: DimArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also export as NPY.
    #[arg(long)]
    pub npy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub color: ColorArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub npy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Mask triplet sigma,mu_i,mu_j (repeatable).
    #[arg(long = "mask", value_parser = parse_mask_triplet)]
    pub masks: Vec<MaskSpec>,
    /// Spread for a single mask given with --mu.
    #[arg(long, conflicts_with = "masks")]
    pub sigma: Option<f64>,
    /// Center mu_i,mu_j for a single mask.
    #[arg(long, value_parser = parse_pair, conflicts_with = "masks")]
    pub mu: Option<(f64, f64)>,
    #[arg(long = "h", default_value_t = 64)]
    pub height: usize,
    #[arg(long = "w", default_value_t = 64)]
    pub width: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long)]
    pub z: PathBuf,
    #[arg(long = "z-star")]
    pub z_star: PathBuf,
    #[arg(long = "mask", value_parser = parse_mask_triplet)]
    pub masks: Vec<MaskSpec>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub npy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub color: ColorArgs,
    /// List the registry instead.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "h", default_value_t = 64)]
    pub height: usize,
    #[arg(long = "w", default_value_t = 64)]
    pub width: usize,
    /// Background offset added to the noise.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "target_shift")]
    pub delta: Option<f64>,
    /// Solve the offset for this positive-ratio shift instead.
    #[arg(long, allow_hyphen_values = true)]
    pub target_shift: Option<f64>,
    #[arg(long = "mask", value_parser = parse_mask_triplet)]
    pub masks: Vec<MaskSpec>,
    /// Mixture JSON ([{"weight": .., "mean": .., "std": ..}, ..]); default is
    /// two equal modes at -/+ --mode-mean.
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub mode_mean: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mode_std: f64,
    /// Index of the key (background) component [default: last].
    #[arg(long)]
    pub key: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub border: f64,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// PPM rendering of the sampled field.
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct UniformityArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, value_parser = parse_rgb, default_value = "50,205,50")]
    pub target: [u8; 3],
    #[arg(long, default_value_t = 0.1)]
    pub border: f64,
    #[arg(long, default_value_t = 20)]
    pub tau: u8,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// RunConfig JSON; command-line flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub color: ColorArgs,
    #[command(flatten)]
    pub dims: DimArgs,
    #[arg(long = "mask", value_parser = parse_mask_triplet)]
    pub masks: Vec<MaskSpec>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub npy: Option<PathBuf>,
}

fn parse_floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {what}, got `{s}`"));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number in {what}"))
        })
        .collect()
}

pub fn parse_mask_triplet(s: &str) -> Result<MaskSpec, String> {
    let v = parse_floats(s, 3, "sigma,mu_i,mu_j")?;
    MaskSpec::new(v[1], v[2], v[0]).map_err(|e| e.to_string())
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2, "mu_i,mu_j")?;
    Ok((v[0], v[1]))
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected r,g,b, got `{s}`"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse()
            .map_err(|_| format!("`{p}` is not an 8-bit value"))?;
    }
    Ok(out)
}

fn parse_preset(s: &str) -> Result<LatentPreset, String> {
    match s.to_ascii_lowercase().as_str() {
        "sd15" | "sd1.5" => Ok(LatentPreset::Sd15),
        "sdxl" => Ok(LatentPreset::Sdxl),
        _ => Err(format!("unknown preset `{s}` (expected sd15 or sdxl)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_triplet_order_is_sigma_first() {
        let m = parse_mask_triplet("0.5,10,20").unwrap();
        assert_eq!((m.sigma, m.mu_i, m.mu_j), (0.5, 10.0, 20.0));
        assert!(parse_mask_triplet("0.5,10").is_err());
        assert!(parse_mask_triplet("0,10,20").is_err());
        assert!(parse_mask_triplet("a,10,20").is_err());
    }

    #[test]
    fn rgb_and_preset() {
        assert_eq!(parse_rgb("50, 205,50").unwrap(), [50, 205, 50]);
        assert!(parse_rgb("50,205,256").is_err());
        assert_eq!(parse_preset("SDXL").unwrap(), LatentPreset::Sdxl);
        assert!(parse_preset("sd3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

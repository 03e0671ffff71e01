use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use tkg_core::config::default_color_from_env;
use tkg_core::image::RgbImage;
use tkg_core::io::{self, encode_npy, mask_to_gray, read_tkgn, write_tkgn};
use tkg_core::sampler::{run_chroma_experiment, ChromaExperiment, MixtureModel, SamplerConfig};
use tkg_core::{
    apply_shift, blend, border_uniformity, channel_stats, compose_masks, run_pipeline,
    sample_standard_noise, solve_channel_shift, ColorPlan, ColorRegistry, Error, MaskSpec,
    NoiseTensor, Result, RunConfig, DEFAULT_MAGNITUDE, LIME_GREEN,
};

use crate::args::*;

pub fn run(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Noise(a) => noise(a, json),
        Command::Shift(a) => shift(a, json),
        Command::Mask(a) => mask(a, json),
        Command::Blend(a) => blend_cmd(a, json),
        Command::Plan(a) => plan(a, json),
        Command::Sim(a) => sim(a, json),
        Command::Analyze(a) => analyze(a),
        Command::Uniformity(a) => uniformity(a, json),
        Command::Pipeline(a) => pipeline(a, json),
    }
}

fn print_json<S: Serialize>(value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_outputs(
    tensor: &NoiseTensor<f32>,
    metadata: &Value,
    out: &Path,
    npy: Option<&Path>,
) -> Result<()> {
    write_tkgn(out, tensor, metadata)?;
    if let Some(p) = npy {
        io::atomic_write(p, &encode_npy(tensor)?)?;
    }
    Ok(())
}

fn registry(path: Option<&Path>) -> Result<ColorRegistry> {
    match path {
        Some(p) => ColorRegistry::load(p),
        None => Ok(ColorRegistry::builtin()),
    }
}

fn resolve_color(a: &ColorArgs) -> Result<ColorPlan> {
    if let Some(p) = &a.plan {
        let plan: ColorPlan = serde_json::from_str(&fs::read_to_string(p)?)?;
        plan.validate()?;
        return Ok(plan);
    }
    let name = a.color.clone().unwrap_or_else(default_color_from_env);
    registry(a.registry.as_deref())?.plan_for_color(&name, a.magnitude.unwrap_or(DEFAULT_MAGNITUDE))
}

fn mask_specs(masks: &[MaskSpec], h: usize, w: usize) -> Vec<MaskSpec> {
    if masks.is_empty() {
        vec![MaskSpec::centered(h, w)]
    } else {
        masks.to_vec()
    }
}

fn print_stats_table(tensor: &NoiseTensor<f32>) {
    println!(
        "{:>7} {:>10} {:>10} {:>9} {:>9}",
        "channel", "mean", "std", "positive", "ratio"
    );
    for s in channel_stats(tensor) {
        println!(
            "{:>7} {:>10.6} {:>10.6} {:>9} {:>9.6}",
            s.channel + 1,
            s.mean,
            s.std,
            s.positive_count,
            s.positive_ratio
        );
    }
}

fn noise(a: NoiseArgs, json: bool) -> Result<()> {
    let cfg = RunConfig {
        height: a.dims.height,
        width: a.dims.width,
        channels: a.dims.channels,
        preset: a.dims.preset.unwrap_or_default(),
        ..RunConfig::default()
    };
    let (h, w, c) = cfg.dims();
    let t = sample_standard_noise::<f32>(a.seed, h, w, c)?;
    let meta = json!({ "kind": "standard_noise", "source_seed": a.seed });
    write_outputs(&t, &meta, &a.out, a.npy.as_deref())?;
    if json {
        print_json(
            &json!({ "out": a.out, "shape": [h, w, c], "seed": a.seed, "stats": channel_stats(&t) }),
        )
    } else {
        println!("wrote {} ({h}x{w}x{c}, seed {})", a.out.display(), a.seed);
        print_stats_table(&t);
        Ok(())
    }
}

fn shift(a: ShiftArgs, json: bool) -> Result<()> {
    let input = read_tkgn(&a.input)?;
    let color = resolve_color(&a.color)?;
    let plan = color.to_shift_plan()?.resolve(&input.tensor)?;
    let shifted = apply_shift(&input.tensor, &plan)?;
    let meta = json!({
        "kind": "shifted_noise",
        "source_seed": input.tensor.seed(),
        "color": color,
        "shift_plan": plan,
    });
    write_outputs(&shifted, &meta, &a.out, a.npy.as_deref())?;
    if json {
        print_json(
            &json!({ "out": a.out, "color": color, "shift_plan": plan, "stats": channel_stats(&shifted) }),
        )
    } else {
        println!("wrote {} (color {})", a.out.display(), color.name);
        print_stats_table(&shifted);
        Ok(())
    }
}

fn mask(a: MaskArgs, json: bool) -> Result<()> {
    let specs = if a.masks.is_empty() {
        let base = MaskSpec::centered(a.height, a.width);
        let (mu_i, mu_j) = a.mu.unwrap_or((base.mu_i, base.mu_j));
        vec![MaskSpec::new(mu_i, mu_j, a.sigma.unwrap_or(base.sigma))?]
    } else {
        a.masks
    };
    let m = compose_masks::<f64>(&specs, a.height, a.width)?;
    let gray = mask_to_gray(&m);
    io::atomic_write(&a.out, &io::encode_pgm(&gray))?;
    let (min, max) = m
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if json {
        print_json(
            &json!({ "out": a.out, "height": a.height, "width": a.width, "masks": specs, "min": min, "max": max }),
        )
    } else {
        println!(
            "wrote {} ({}x{}, {} mask(s), A in [{min:.6}, {max:.6}])",
            a.out.display(),
            a.height,
            a.width,
            specs.len()
        );
        Ok(())
    }
}

fn blend_cmd(a: BlendArgs, json: bool) -> Result<()> {
    let z = read_tkgn(&a.z)?;
    let z_star = read_tkgn(&a.z_star)?;
    let (h, w, _) = z.tensor.shape();
    let specs = mask_specs(&a.masks, h, w);
    let m = compose_masks::<f32>(&specs, h, w)?;
    let keyed = blend(&z.tensor, &z_star.tensor, &m)?;
    let meta = json!({
        "kind": "keyed_noise",
        "source_seed": z.tensor.seed(),
        "masks": specs,
        "z": z.metadata,
        "z_star": z_star.metadata,
    });
    write_outputs(&keyed, &meta, &a.out, a.npy.as_deref())?;
    if json {
        print_json(&json!({ "out": a.out, "masks": specs, "stats": channel_stats(&keyed) }))
    } else {
        println!("wrote {}", a.out.display());
        print_stats_table(&keyed);
        Ok(())
    }
}

fn plan(a: PlanArgs, json: bool) -> Result<()> {
    if a.list {
        let reg = registry(a.color.registry.as_deref())?;
        let magnitude = a.color.magnitude.unwrap_or(DEFAULT_MAGNITUDE);
        let plans = reg
            .names()
            .iter()
            .map(|n| reg.plan_for_color(n, magnitude))
            .collect::<Result<Vec<_>>>()?;
        if json {
            return print_json(&plans);
        }
        for p in &plans {
            print_plan_row(p);
        }
        return Ok(());
    }
    let p = resolve_color(&a.color)?;
    if json {
        print_json(&p)
    } else {
        print_plan_row(&p);
        Ok(())
    }
}

fn print_plan_row(p: &ColorPlan) {
    let shifts: Vec<String> = p
        .shifts
        .iter()
        .map(|(c, s)| format!("ch{c} {s:+.4}"))
        .collect();
    println!("{:<12} {}", p.name, shifts.join("  "));
}

fn load_mixture(a: &SimArgs) -> Result<MixtureModel> {
    match &a.mixture {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => MixtureModel::symmetric_bimodal(a.mode_mean, a.mode_std),
    }
}

fn sim(a: SimArgs, json: bool) -> Result<()> {
    let mixture = load_mixture(&a)?;
    let key = a.key.unwrap_or(mixture.len().saturating_sub(1));
    let delta = match (a.delta, a.target_shift) {
        (Some(d), _) => d,
        (None, Some(s)) => {
            let z = sample_standard_noise::<f64>(a.seed, a.height, a.width, 1)?;
            solve_channel_shift(&z, 0, s)?
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "give --delta or --target-shift".into(),
            ))
        }
    };
    let mut exp = ChromaExperiment::new(a.height, a.width, a.seed, delta, key);
    exp.border_fraction = a.border;
    if !a.masks.is_empty() {
        exp = exp.with_masks(a.masks.clone());
    }
    let cfg = SamplerConfig::default().with_sample_steps(a.steps);
    let outcome = run_chroma_experiment::<f64>(&exp, &mixture, &cfg)?;
    io::atomic_write(
        &a.out,
        serde_json::to_string_pretty(&outcome.report)?.as_bytes(),
    )?;
    if let Some(path) = &a.image {
        let img = render_modes(&outcome.x0, &mixture, key)?;
        io::atomic_write(path, &io::encode_ppm(&img))?;
    }
    let r = &outcome.report;
    if json {
        print_json(r)
    } else {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!("delta {:.6}  identity gain {:.6}", delta, r.identity_gain);
        println!(
            "key-mode fraction: border {:.4}  foreground {}  background {}",
            r.border_key_fraction(),
            fmt(r.foreground_key_fraction()),
            fmt(r.background_key_fraction())
        );
        Ok(())
    }
}

/// Key-mode pixels take the lime swatch; other modes are shades of gray.
fn render_modes(x0: &NoiseTensor<f64>, mixture: &MixtureModel, key: usize) -> Result<RgbImage> {
    let (h, w, _) = x0.shape();
    let n = mixture.len().max(2);
    let mut img = RgbImage::filled(w, h, [0, 0, 0])?;
    for i in 0..h {
        for j in 0..w {
            let k = mixture.nearest_component(x0.get(i, j, 0));
            let rgb = if k == key {
                LIME_GREEN
            } else {
                let g = (40 + 180 * k / (n - 1)) as u8;
                [g, g, g]
            };
            img.set(i, j, rgb);
        }
    }
    Ok(img)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let file = read_tkgn(&a.file)?;
    let (h, w, c) = file.tensor.shape();
    print_json(&json!({
        "file": a.file,
        "shape": [h, w, c],
        "seed": file.tensor.seed(),
        "channels": channel_stats(&file.tensor),
    }))
}

fn uniformity(a: UniformityArgs, json: bool) -> Result<()> {
    let img = io::decode_ppm(&fs::read(&a.image)?)?;
    let r = border_uniformity(&img, a.target, a.border, a.tau)?;
    if json {
        print_json(&r)
    } else {
        println!(
            "border pass fraction {:.4} ({}/{} px, ring {} px, tau {})",
            r.pass_fraction, r.passing_pixels, r.ring_pixels, r.ring_width, r.tolerance
        );
        println!(
            "mean border rgb ({:.1}, {:.1}, {:.1})  max deviation {}",
            r.mean_border_rgb[0], r.mean_border_rgb[1], r.mean_border_rgb[2], r.max_deviation
        );
        Ok(())
    }
}

fn pipeline(a: PipelineArgs, json: bool) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_json(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = &a.color.plan {
        let plan: ColorPlan = serde_json::from_str(&fs::read_to_string(p)?)?;
        cfg.plan = Some(plan);
        cfg.color = None;
    } else if let Some(c) = &a.color.color {
        cfg.color = Some(c.clone());
        cfg.plan = None;
    }
    if let Some(m) = a.color.magnitude {
        cfg.magnitude = m;
    }
    if let Some(p) = a.dims.preset {
        cfg.preset = p;
    }
    cfg.height = a.dims.height.or(cfg.height);
    cfg.width = a.dims.width.or(cfg.width);
    cfg.channels = a.dims.channels.or(cfg.channels);
    if !a.masks.is_empty() {
        cfg.masks = a.masks.clone();
    }
    let reg = registry(a.color.registry.as_deref())?;
    let out = run_pipeline::<f32>(&cfg, &reg, &default_color_from_env())?;
    let meta = out.metadata(&cfg);
    write_outputs(&out.keyed, &meta, &a.out, a.npy.as_deref())?;
    if json {
        print_json(&json!({
            "out": a.out,
            "color": out.color,
            "shift_plan": out.shift_plan,
            "masks": out.masks,
            "stats": channel_stats(&out.keyed),
        }))
    } else {
        let (h, w, c) = out.keyed.shape();
        println!(
            "wrote {} ({h}x{w}x{c}, seed {}, color {})",
            a.out.display(),
            cfg.seed,
            out.color.name
        );
        if let Some(d) = out.shift_plan.deltas() {
            for (ch, delta) in d {
                println!("  channel {} delta {delta:+.6}", ch + 1);
            }
        }
        print_stats_table(&out.keyed);
        Ok(())
    }
}

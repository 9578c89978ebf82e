//! Command-line front end: one subcommand per run, a JSON summary with the
//! resolved configuration, and CSV data files.
//!
//! Exit status is 0 on success, 1 when `check` finds a negative margin and
//! 2 on any error. Outputs carry no timestamps, so identical configs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::RngExt;
use serde::Serialize;
use serde_json::{json, Value};

use crate::conditions::{check_cone_properties, check_distortion_d1, check_g3, check_hyperbolicity, check_lemma41, ConditionReport, GridSpec};
use crate::config::{FamilyName, ManifoldKind, RouteChoice, RunConfig};
use crate::distortion::{composition_distortion, DistortionOptions};
use crate::entropy::{entropy_cylinder, entropy_derivative_growth, entropy_directional, entropy_integral, OrbitOptions};
use crate::error::{Error, Result};
use crate::geometry::{PiecewiseMap, Point2, Vector2};
use crate::graph_transform::{stable_manifold, unstable_manifold, CurveGraph, ManifoldOptions};
use crate::measures::{
    birkhoff_srb, chi_square_uniform, holonomy_test, pushforward_srb, BirkhoffOptions, EmpiricalMeasure, HolonomyOptions,
    PushforwardOptions,
};
use crate::orbit::{rng_for, uniform_points, DITHER};
use crate::symbolic::{forward_itinerary, post_cylinder, Itinerary};

#[derive(Debug, Parser)]
#[command(name = "srblab", version, about = "SRB measures of piecewise hyperbolic maps of the square")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration (default: baker map with two posts).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for the JSON summary and CSV files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (falls back to SRBLAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sampled margins of H1–H4, cone properties, D1 and G3.
    Check,
    /// Forward itinerary of a point and its post cylinders.
    Itinerary {
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        length: Option<usize>,
    },
    /// Unstable or stable manifold by the graph transform.
    Manifold {
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
    /// Derivative ratios along cylinders of an unstable curve.
    Distortion {
        #[arg(long)]
        depth_lo: Option<usize>,
        #[arg(long)]
        depth_hi: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// SRB histogram from Birkhoff averages of Lebesgue-random seeds.
    SrbBirkhoff {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// SRB histogram from pushforwards of a Sinai local measure.
    SrbPushforward {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Stable holonomy densities between two unstable curves.
    Holonomy {
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Entropy estimates by one or all routes.
    Entropy {
        #[arg(long, value_enum)]
        route: Option<RouteChoice>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum KindArg {
    Unstable,
    Stable,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Itinerary { .. } => "itinerary",
            Command::Manifold { .. } => "manifold",
            Command::Distortion { .. } => "distortion",
            Command::SrbBirkhoff { .. } => "srb-birkhoff",
            Command::SrbPushforward { .. } => "srb-pushforward",
            Command::Holonomy { .. } => "holonomy",
            Command::Entropy { .. } => "entropy",
        }
    }

    /// Fold command-line overrides into the configuration.
    fn apply(&self, c: &mut RunConfig) {
        match self {
            Command::Check => {}
            Command::Itinerary { x, y, length } => {
                if let Some(x) = x {
                    c.itinerary.point[0] = *x;
                }
                if let Some(y) = y {
                    c.itinerary.point[1] = *y;
                }
                if let Some(l) = length {
                    c.itinerary.length = *l;
                }
            }
            Command::Manifold { kind } => {
                if let Some(k) = kind {
                    c.manifold.kind = match k {
                        KindArg::Unstable => ManifoldKind::Unstable,
                        KindArg::Stable => ManifoldKind::Stable,
                    };
                }
            }
            Command::Distortion { depth_lo, depth_hi, points } => {
                set(&mut c.distortion.depth_lo, depth_lo);
                set(&mut c.distortion.depth_hi, depth_hi);
                set(&mut c.distortion.points, points);
            }
            Command::SrbBirkhoff { n, seeds } => {
                set(&mut c.birkhoff.n, n);
                set(&mut c.birkhoff.seeds, seeds);
            }
            Command::SrbPushforward { n, points } => {
                set(&mut c.pushforward.n, n);
                set(&mut c.pushforward.points, points);
            }
            Command::Holonomy { pairs } => set(&mut c.holonomy.pairs, pairs),
            Command::Entropy { route } => set(&mut c.entropy.route, route),
        }
    }
}

fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
    if let Some(v) = v {
        *dst = v.clone();
    }
}

/// What a command hands back: its JSON result, CSV files, console text,
/// and exit status.
struct Outcome {
    result: Value,
    csv: Vec<(String, String)>,
    console: String,
    /// Exit status: 1 for failed conditions, 2 when part of the work failed.
    status: i32,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Outcome { result, csv: Vec::new(), console: String::new(), status: 0 }
    }
}

/// Parse, execute and write artifacts; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    configure_threads(cli.threads);
    let name = cli.command.name();
    let loaded = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::for_family(FamilyName::Baker)),
    };
    let resolved = loaded.and_then(|mut c| {
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        cli.command.apply(&mut c);
        c.resolved()
    });
    let (summary, csv, status) = match resolved {
        Err(e) => (summary(name, Value::Null, Err(&e)), Vec::new(), 2),
        Ok(config) => {
            let cfg = serde_json::to_value(&config).expect("config serializes");
            match execute(&cli.command, &config) {
                Ok(out) => {
                    print!("{}", out.console);
                    (summary(name, cfg, Ok(out.result)), out.csv, out.status)
                }
                Err(e) => (summary(name, cfg, Err(&e)), Vec::new(), 2),
            }
        }
    };
    if let Some(err) = summary.get("error").filter(|e| !e.is_null()) {
        eprintln!("srblab {name}: {} ({})", err["message"].as_str().unwrap_or(""), err["code"].as_str().unwrap_or(""));
    }
    match write_artifacts(&cli.out, name, &summary, &csv) {
        Ok(path) => {
            println!("wrote {}", path.display());
            status
        }
        Err(e) => {
            eprintln!("srblab {name}: {e}");
            2
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| std::env::var("SRBLAB_THREADS").ok().and_then(|v| v.trim().parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        // A pool set up earlier in the same process stays in place.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn summary(command: &str, config: Value, result: std::result::Result<Value, &Error>) -> Value {
    match result {
        Ok(r) => json!({ "command": command, "config": config, "status": "ok", "result": r }),
        Err(e) => json!({
            "command": command,
            "config": config,
            "status": "error",
            "error": { "code": e.code(), "message": e.to_string() },
        }),
    }
}

fn write_artifacts(dir: &Path, name: &str, summary: &Value, csv: &[(String, String)]) -> Result<PathBuf> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (file, body) in csv {
        std::fs::write(dir.join(file), body).map_err(io)?;
    }
    let path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(io)?;
    Ok(path)
}

fn execute(cmd: &Command, c: &RunConfig) -> Result<Outcome> {
    let map = c.build()?;
    match cmd {
        Command::Check => check(&map, c),
        Command::Itinerary { .. } => itinerary(&map, c),
        Command::Manifold { .. } => manifold(&map, c),
        Command::Distortion { .. } => distortion(&map, c),
        Command::SrbBirkhoff { .. } => srb_birkhoff(&map, c),
        Command::SrbPushforward { .. } => srb_pushforward(&map, c),
        Command::Holonomy { .. } => holonomy(&map, c),
        Command::Entropy { .. } => entropy(&map, c),
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

/// A random word over 1..=top from its own stream of the run seed.
fn random_word(seed: u64, stream: u64, len: usize, top: usize) -> Vec<usize> {
    let mut r = rng_for(seed, stream);
    (0..len).map(|_| r.random_range(1..=top)).collect()
}

/// Symbols used for generated words: the first few branches.
fn word_top(map: &PiecewiseMap) -> usize {
    map.branch_limit().min(4)
}

const STREAM_MANIFOLD: u64 = 100;
const STREAM_DISTORTION_PAST: u64 = 101;
const STREAM_DISTORTION_WORD: u64 = 102;
const STREAM_PUSHFORWARD_PAST: u64 = 103;
const STREAM_HOLONOMY_GAMMA: u64 = 104;
const STREAM_HOLONOMY_ETA: u64 = 105;
const STREAM_SEEDS: u64 = 106;

fn csv_header(columns: &str) -> String {
    format!("# {columns}\n")
}

fn check(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.check;
    let grid = GridSpec::new(p.nx, p.ny, p.branch_lo, p.branch_hi);
    let groups: [(&str, ConditionReport); 4] = [
        ("hyperbolicity", check_hyperbolicity(map, map.cone, &grid)),
        ("cone", check_cone_properties(map, map.cone, &grid)),
        ("derivative_bounds", check_lemma41(map, &grid)),
        ("distortion", check_distortion_d1(map, &grid)),
    ];
    let g3 = check_g3(map, p.g3_terms);
    let satisfied = groups.iter().all(|(_, r)| r.all_satisfied()) && !g3.diverging;

    let mut csv = csv_header("group,condition,min_margin,worst_branch,worst_x,worst_y");
    let mut table = format!("{:<18} {:<20} {:>14} {:>8}  worst point\n", "group", "condition", "margin", "branch");
    for (g, r) in &groups {
        for m in &r.conditions {
            let _ = writeln!(csv, "{g},{},{},{},{},{}", m.name, m.min_margin, m.worst_branch, m.worst_point.x, m.worst_point.y);
            let _ = writeln!(
                table,
                "{g:<18} {:<20} {:>14.6e} {:>8}  ({:.6}, {:.6})",
                m.name, m.min_margin, m.worst_branch, m.worst_point.x, m.worst_point.y
            );
        }
    }
    let _ = writeln!(table, "G3 partial sum {:.12} over {} branches{}", g3.partial_sum, g3.branches, if g3.diverging { " (diverging)" } else { "" });
    if let Some(note) = &groups[0].1.tail_note {
        let _ = writeln!(table, "{note}");
    }
    let mut result = serde_json::Map::new();
    for (g, r) in &groups {
        result.insert((*g).to_string(), to_json(r));
    }
    result.insert("g3".into(), to_json(&g3));
    result.insert("all_satisfied".into(), json!(satisfied));
    Ok(Outcome { result: Value::Object(result), csv: vec![("check.csv".into(), csv)], console: table, status: if satisfied { 0 } else { 1 } })
}

fn itinerary(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.itinerary;
    let z = Point2::new(p.point[0], p.point[1]);
    let outcome = forward_itinerary(map, z, p.length, p.strict)?;
    let symbols = outcome.symbols().to_vec();
    let cylinders = (1..=p.cylinder_depth.min(symbols.len()))
        .map(|d| post_cylinder(map, &symbols[..d]))
        .collect::<Result<Vec<_>>>()?;
    let result = json!({ "point": [z.x, z.y], "itinerary": to_json(&outcome), "cylinders": to_json(&cylinders) });
    let console = format!("{}\n", serde_json::to_string_pretty(&result).expect("serializes"));
    let mut out = Outcome::new(result);
    out.console = console;
    Ok(out)
}

fn curve_csv(columns: &str, curve: &CurveGraph) -> String {
    let mut s = csv_header(columns);
    for k in 0..curve.grid.len() {
        let _ = writeln!(s, "{},{},{},{}", curve.grid[k], curve.g[k], curve.dg[k], curve.d2g[k]);
    }
    s
}

fn manifold(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.manifold;
    let symbols = p.symbols.clone().unwrap_or_else(|| random_word(c.seed, STREAM_MANIFOLD, p.length, word_top(map)));
    let opts = ManifoldOptions { tol: p.tol, max_iter: p.max_iter, grid_points: p.grid };
    let (curve, diag, columns) = match p.kind {
        ManifoldKind::Unstable => {
            let (g, d) = unstable_manifold(map, &Itinerary::backward(symbols.clone())?, &opts)?;
            (g, d, "x,g,dg,d2g")
        }
        ManifoldKind::Stable => {
            let (g, d) = stable_manifold(map, &Itinerary::forward(symbols.clone())?, &opts)?;
            (g, d, "y,h,dh,d2h")
        }
    };
    let result = json!({
        "kind": p.kind,
        "symbols": symbols,
        "sup_slope": curve.sup_slope(),
        "sup_curvature": curve.sup_curvature(),
        "diagnostics": to_json(&diag),
    });
    let mut out = Outcome::new(result);
    out.csv.push(("manifold.csv".into(), curve_csv(columns, &curve)));
    out.console = format!(
        "{:?} manifold: {} iterations, converged {}, sup|Dg| {:.3e}\n",
        p.kind, diag.iterations, diag.converged, curve.sup_slope()
    );
    Ok(out)
}

fn distortion(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.distortion;
    if p.depth_lo == 0 || p.depth_lo > p.depth_hi || p.depth_step == 0 {
        return Err(Error::ConfigInvalid("distortion depths need 1 <= depth_lo <= depth_hi and depth_step >= 1".into()));
    }
    let past = random_word(c.seed, STREAM_DISTORTION_PAST, 40, word_top(map));
    let (gamma, _) = unstable_manifold(map, &Itinerary::backward(past.clone())?, &ManifoldOptions::default())?;
    let word = p.word.clone().unwrap_or_else(|| random_word(c.seed, STREAM_DISTORTION_WORD, p.depth_hi, map.branch_limit().min(2)));
    if word.len() < p.depth_hi {
        return Err(Error::ConfigInvalid(format!("distortion word has {} symbols, depth_hi is {}", word.len(), p.depth_hi)));
    }
    let opts = DistortionOptions { points: p.points, c: p.c };
    let mut csv = csv_header("n,ratio_max,ratio_min,theta");
    let mut reports = Vec::new();
    for n in (p.depth_lo..=p.depth_hi).step_by(p.depth_step) {
        let r = composition_distortion(map, &gamma, &word[..n], &opts)?;
        let _ = writeln!(csv, "{},{},{},{}", n, r.ratio_max, r.ratio_min, r.theta);
        reports.push(r);
    }
    let worst = reports.iter().map(|r| r.ratio_max).fold(1.0, f64::max);
    let mut out = Outcome::new(json!({ "past": past, "word": word, "ratio_max": worst, "depths": to_json(&reports) }));
    out.csv.push(("distortion.csv".into(), csv));
    out.console = format!("largest derivative ratio {worst:.6} over {} depths\n", reports.len());
    Ok(out)
}

fn histogram_csv(m: &EmpiricalMeasure) -> String {
    let mut s = csv_header("row,col,mass (row indexes y, col indexes x)");
    let masses = m.masses();
    for r in 0..m.m {
        for col in 0..m.m {
            let _ = writeln!(s, "{r},{col},{}", masses[r * m.m + col]);
        }
    }
    s
}

fn measure_summary(m: &EmpiricalMeasure) -> Value {
    let chi = chi_square_uniform(m, 20.0, 0.001);
    json!({
        "bins": m.m,
        "total": m.total,
        "groups": m.groups,
        "dropped": m.dropped,
        "leaked": m.leaked,
        "observables": to_json(&m.observables),
        "sup_deviation_from_uniform": m.sup_deviation_from_uniform(),
        "chi_square_uniform": to_json(&chi),
    })
}

fn observable_line(m: &EmpiricalMeasure) -> String {
    let mut s = String::new();
    for o in &m.observables {
        let _ = write!(s, "{} {:.6} ± {:.1e}  ", o.name, o.mean, o.stderr);
    }
    s.trim_end().to_string() + "\n"
}

fn srb_birkhoff(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.birkhoff;
    let seeds = uniform_points(c.seed, STREAM_SEEDS, p.seeds);
    let opts = BirkhoffOptions { burn_in: p.burn_in, thin: p.thin, bins: p.bins, dither: DITHER, retain: 0, seed: c.seed };
    let m = birkhoff_srb(map, &seeds, p.n, &opts)?;
    let mut out = Outcome::new(measure_summary(&m));
    out.csv.push(("srb-birkhoff.csv".into(), histogram_csv(&m)));
    out.console = observable_line(&m);
    Ok(out)
}

fn srb_pushforward(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.pushforward;
    let past = p.past.clone().unwrap_or_else(|| random_word(c.seed, STREAM_PUSHFORWARD_PAST, p.depth + 20, word_top(map)));
    let opts = PushforwardOptions {
        points: p.points,
        depth: p.depth,
        burn_in: p.burn_in,
        bins: p.bins,
        groups: p.groups,
        dither: DITHER,
        seed: c.seed,
    };
    let m = pushforward_srb(map, &Itinerary::backward(past.clone())?, p.n, &opts)?;
    let mut result = measure_summary(&m);
    result["past"] = json!(past);
    let mut out = Outcome::new(result);
    out.csv.push(("srb-pushforward.csv".into(), histogram_csv(&m)));
    out.console = observable_line(&m);
    Ok(out)
}

fn holonomy(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.holonomy;
    let top = word_top(map);
    let pg = p.past_gamma.clone().unwrap_or_else(|| random_word(c.seed, STREAM_HOLONOMY_GAMMA, 40, top));
    let pe = p.past_eta.clone().unwrap_or_else(|| random_word(c.seed, STREAM_HOLONOMY_ETA, 40, top));
    let opts = ManifoldOptions::default();
    let (gamma, _) = unstable_manifold(map, &Itinerary::backward(pg.clone())?, &opts)?;
    let (eta, _) = unstable_manifold(map, &Itinerary::backward(pe.clone())?, &opts)?;
    let hopts = HolonomyOptions { pairs: p.pairs, bins: p.bins };
    let mut csv = csv_header("depth,z,image,density,derivative_ratio");
    let mut per_depth = Vec::new();
    let mut console = String::new();
    for &d in &p.depths {
        let r = holonomy_test(map, &gamma, &eta, d, &hopts)?;
        for q in &r.pairs {
            let _ = writeln!(csv, "{d},{},{},{},{}", q.z, q.image, q.density, q.derivative_ratio);
        }
        let _ = writeln!(console, "depth {d}: density in [{:.6}, {:.6}], {} pairs", r.density_min, r.density_max, r.pairs.len());
        per_depth.push(json!({
            "depth": d,
            "pairs": r.pairs.len(),
            "dropped": r.dropped,
            "bin_density": r.bin_density,
            "density_min": r.density_min,
            "density_max": r.density_max,
            "ratio_min": r.ratio_min,
            "ratio_max": r.ratio_max,
        }));
    }
    let mut out = Outcome::new(json!({ "past_gamma": pg, "past_eta": pe, "depths": per_depth }));
    out.csv.push(("holonomy.csv".into(), csv));
    out.console = console;
    Ok(out)
}

fn entropy(map: &PiecewiseMap, c: &RunConfig) -> Result<Outcome> {
    let p = &c.entropy;
    let wanted = |r: RouteChoice| p.route == RouteChoice::All || p.route == r;
    let orbit = OrbitOptions { seed: c.seed, dither: DITHER };
    let seeds = uniform_points(c.seed, STREAM_SEEDS, p.seeds);
    let mut routes = serde_json::Map::new();
    let mut failed = None;
    let mut record = |name: &str, r: Result<Value>| {
        let v = r.unwrap_or_else(|e| {
            failed.get_or_insert(e.clone());
            json!({ "error": { "code": e.code(), "message": e.to_string() } })
        });
        routes.insert(name.to_string(), v);
    };
    if wanted(RouteChoice::DerivativeGrowth) {
        record("derivative_growth", entropy_derivative_growth(map, &seeds, p.n, &orbit).map(|e| to_json(&e)));
    }
    if wanted(RouteChoice::Directional) {
        let v = Vector2::new(1.0, 0.5 * map.cone.alpha);
        // One orbit; seeds whose orbit leaves the enumerated branches are skipped.
        let mut run = Err(Error::AllSeedsEscaped { seeds: seeds.len() });
        for &z in &seeds {
            run = entropy_directional(map, z, v, p.n, &orbit);
            if !matches!(run, Err(Error::TailTruncated { .. } | Error::OutOfDomain { .. })) {
                break;
            }
        }
        record("directional", run.map(|d| {
            let mut j = to_json(&d.estimate);
            j["operator"] = json!(d.operator);
            j["horizontal"] = json!(d.horizontal);
            j["bound_held"] = json!(d.bound_held);
            j["worst_excess"] = json!(d.worst_excess);
            j
        }));
    }
    if wanted(RouteChoice::Cylinder) {
        let cs = &seeds[..p.cylinder_seeds.min(seeds.len())];
        let [lo, hi] = p.cylinder_depths;
        record("cylinder", entropy_cylinder(map, cs, lo..=hi, p.cylinder_n, &orbit).map(|e| {
            let mut j = to_json(&e.estimate);
            j["per_depth"] = to_json(&e.per_depth);
            j
        }));
    }
    if wanted(RouteChoice::Integral) {
        let opts = BirkhoffOptions { retain: p.integral_stride.max(1), seed: c.seed, ..Default::default() };
        record(
            "integral",
            birkhoff_srb(map, &seeds, p.n, &opts).and_then(|m| entropy_integral(map, &m)).map(|e| to_json(&e)),
        );
    }
    if let Some(e) = &failed {
        if routes.values().all(|v| v.get("error").is_some()) {
            return Err(e.clone());
        }
    }
    let mut console = String::new();
    for (k, v) in &routes {
        match v.get("value").and_then(Value::as_f64) {
            Some(x) => writeln!(console, "{k:<18} {x:.9}"),
            None => writeln!(console, "{k:<18} {}", v["error"]["code"].as_str().unwrap_or("error")),
        }
        .ok();
    }
    let mut out = Outcome::new(Value::Object(routes));
    out.console = console;
    if failed.is_some() {
        out.status = 2;
    }
    Ok(out)
}

//! `magus` command-line front end.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use magus::catalog::{catalog_channel_clifford, catalog_channel_t, ChannelDecomposition, ChannelTerm};
use magus::io::parse_circuit;
use magus::mitigation::{assist_plan, Assist};
use magus::overhead::{
    assisted_vs_classical_ratio, bound_curves, bound_curves_csv, mitigable_region, overhead_total, OverheadQuery,
    region_csv, RegionQuery,
};
use magus::qrom::DecompositionJson;
use magus::states::{build_candidates, candidates_csv, CandidateScope};
use magus::verify::run_suite;
use magus::{
    block_decomposition, qrom, Backend, BlockDecomposition, CatalogId, Circuit, Config, Error, MitigationPlan,
    NoiseModel, Result, Sampling,
};

#[derive(Parser)]
#[command(name = "magus", version, about = "Quantum-assisted robustness of magic toolkit")]
struct Cli {
    /// Configuration file (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; falls back to MAGUS_SEED, then the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the artifact here instead of stdout (relative to the configured out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the ℓ1 LP for τ^⊗t given r noisy copies.
    Qrom {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Candidate family: default | stabilizers | orbit | full.
        #[arg(long, default_value = "default")]
        scope: String,
    },
    /// Emit a catalog decomposition as JSON.
    Decompose {
        /// k1 | t2r1 | t2r2 | t3r1 | t3r3 | chant | chanc1 | chanc2
        #[arg(long)]
        entry: String,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long = "delta-c", default_value_t = 0.0)]
        delta_c: f64,
        /// Tile the entry over t copies (remainder uses k1 blocks).
        #[arg(long)]
        t: Option<usize>,
    },
    /// Error-mitigated estimate of ⟨P⟩ for a circuit file.
    Mitigate {
        circuit: PathBuf,
        /// State entry tiled over the magic register.
        #[arg(long, default_value = "k1", conflicts_with = "decomposition")]
        entry: String,
        /// Decomposition JSON tiled over the magic register.
        #[arg(long)]
        decomposition: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Clifford error rate; a positive value switches to channel-level mitigation.
        #[arg(long = "delta-c", default_value_t = 0.0)]
        delta_c: f64,
        /// Inject the noisy states without mitigation.
        #[arg(long)]
        unmitigated: bool,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Quantum-assisted simulation with r = t/k noisy states.
    Assist {
        circuit: PathBuf,
        /// k = t/r ∈ {1, 2, 3}.
        #[arg(long, conflicts_with = "r")]
        ratio: Option<usize>,
        /// Number of noisy states; 0 selects the classical stabilizer decomposition.
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Overhead tables as CSV.
    Overhead {
        #[arg(long, default_value_t = 0)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        nc1: usize,
        #[arg(long, default_value_t = 0)]
        nc2: usize,
        /// Single δ; without it a grid over [0, 0.5] is emitted.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long = "delta-c", default_value_t = 0.0)]
        delta_c: f64,
        /// Emit the assisted/classical ratio for this k instead.
        #[arg(long)]
        ratio: Option<usize>,
        /// Emit the per-T bound curves instead.
        #[arg(long)]
        curves: bool,
        #[arg(long, default_value_t = 51)]
        points: usize,
    },
    /// Mitigable region boundary as CSV, one block per round 0..=m.
    Region {
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "delta-c", default_value_t = 0.0)]
        delta_c: f64,
        #[arg(long = "delta-cd", default_value_t = 0.0)]
        delta_cd: f64,
        #[arg(long, default_value_t = 0)]
        rounds: usize,
    },
    /// Candidate states of the LP as CSV.
    Enumerate {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value = "default")]
        scope: String,
    },
    /// Run the invariant suite.
    Verify,
}

#[derive(Args)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long = "Delta", default_value_t = 0.05)]
    target: f64,
    /// Sample count (at least the Hoeffding count).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = "dense")]
    backend: String,
    /// Keep the per-sample outputs in the JSON.
    #[arg(long)]
    keep_outputs: bool,
}

struct Ctx {
    config: Config,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => {
                let path = if p.is_absolute() { p.clone() } else { self.config.out_dir.join(p) };
                if let Some(dir) = path.parent() {
                    if !dir.as_os_str().is_empty() {
                        std::fs::create_dir_all(dir)?;
                    }
                }
                std::fs::write(&path, text)?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
            None => {
                let mut out = std::io::stdout().lock();
                let tail = if text.ends_with('\n') { "" } else { "\n" };
                match out.write_all(text.as_bytes()).and_then(|_| out.write_all(tail.as_bytes())) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                    _ => Ok(()),
                }
            }
        }
    }

    fn sampling(&self, a: &SamplingArgs) -> Sampling {
        Sampling {
            epsilon: a.epsilon,
            target: a.target,
            seed: self.seed,
            samples: a.samples,
            keep_outputs: a.keep_outputs,
        }
    }
}

fn scope(name: &str, t: usize, r: usize) -> Result<CandidateScope> {
    match name {
        "default" => Ok(CandidateScope::default_for(t, r)),
        "stabilizers" => Ok(CandidateScope::STABILIZERS_ONLY),
        "orbit" => Ok(CandidateScope {
            stabilizers: true,
            clifford_orbit: true,
            local_product: false,
        }),
        "full" => Ok(CandidateScope {
            stabilizers: true,
            clifford_orbit: true,
            local_product: true,
        }),
        other => Err(Error::InvalidParameter(format!(
            "unknown scope `{other}` (default | stabilizers | orbit | full)"
        ))),
    }
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    Ok(std::fs::read_to_string(path)?)
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    parse_circuit(&read_text(path)?)
}

fn to_json(v: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn term_label(term: &ChannelTerm) -> String {
    match term {
        ChannelTerm::NoisyT { rotated: false } => "noisy T gadget with τ_δ".into(),
        ChannelTerm::NoisyT { rotated: true } => "noisy T gadget with Zτ_δZ".into(),
        ChannelTerm::Depolarize => "full depolarization".into(),
        ChannelTerm::NoisyClifford { pauli: None } => "noisy U".into(),
        ChannelTerm::NoisyClifford { pauli: Some(p) } => format!("noisy {} U", p.to_letter_string()),
    }
}

fn channel_json(d: &ChannelDecomposition) -> serde_json::Value {
    json!({
        "entry": d.id.name(),
        "delta": d.delta,
        "delta_c": d.delta_c,
        "one_norm": d.one_norm(),
        "terms": d.terms.iter().map(|(w, t)| json!({"weight": w, "channel": term_label(t)})).collect::<Vec<_>>(),
    })
}

fn blocks_json(b: &BlockDecomposition) -> serde_json::Value {
    json!({
        "t": b.t,
        "one_norm": b.one_norm(),
        "blocks": b.blocks.iter().map(|d| DecompositionJson::from_decomposition(d, d.one_norm(), None)).collect::<Vec<_>>(),
    })
}

/// Tiles a user-supplied decomposition over the register (k1 for the remainder).
fn tile(d: magus::QuasiDecomposition, t: usize) -> Result<BlockDecomposition> {
    let k = d.t;
    let mut blocks = vec![d.clone(); t / k];
    if t % k > 0 {
        blocks.extend(block_decomposition(t % k, CatalogId::K1, d.delta)?.blocks);
    }
    Ok(BlockDecomposition { t, blocks })
}

fn finish_estimate(ctx: &Ctx, plan: &MitigationPlan, backend: Backend) -> Result<()> {
    let mut res = plan.run(backend)?;
    if plan.source.num_qubits() <= ctx.config.dense_qubit_cap {
        res.ideal = Some(plan.ideal()?);
    }
    let mut v = serde_json::to_value(&res)?;
    v["backend"] = json!(backend);
    ctx.emit(&to_json(&v)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => match std::env::var("MAGUS_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("MAGUS_SEED = `{v}` is not an unsigned integer")))?,
            Err(_) => config.seed,
        },
    };
    let ctx = Ctx {
        config,
        seed,
        out: cli.out,
    };
    match cli.command {
        Command::Qrom { t, r, delta, scope: s } => {
            let res = qrom(t, r, delta, scope(&s, t, r)?)?;
            eprintln!("qrom(t={t}, r={r}, δ={delta}) = {:.10}", res.value);
            let mut v = serde_json::to_value(DecompositionJson::from_result(&res))?;
            v["num_candidates"] = json!(res.num_candidates);
            ctx.emit(&to_json(&v)?)?;
        }
        Command::Decompose { entry, delta, delta_c, t } => {
            let id: CatalogId = entry.parse()?;
            let v = match id {
                CatalogId::ChanT => channel_json(&catalog_channel_t(delta, delta_c)?),
                CatalogId::ChanC1 => channel_json(&catalog_channel_clifford(1, delta_c)?),
                CatalogId::ChanC2 => channel_json(&catalog_channel_clifford(2, delta_c)?),
                _ => match t {
                    Some(t) => blocks_json(&block_decomposition(t, id, delta)?),
                    None => {
                        let d = magus::state_entry(id, delta)?;
                        serde_json::to_value(DecompositionJson::from_decomposition(&d, d.one_norm(), None))?
                    }
                },
            };
            ctx.emit(&to_json(&v)?)?;
        }
        Command::Mitigate {
            circuit,
            entry,
            decomposition,
            delta,
            delta_c,
            unmitigated,
            sampling,
        } => {
            let c = read_circuit(&circuit)?;
            let backend: Backend = sampling.backend.parse()?;
            let s = ctx.sampling(&sampling);
            let plan = if unmitigated {
                MitigationPlan::unmitigated(&c, delta, &s)?
            } else if delta_c > 0.0 {
                MitigationPlan::channels(&c, NoiseModel::new(delta, delta_c, 0.0)?, &s)?
            } else if let Some(path) = decomposition {
                let d = DecompositionJson::from_json_str(&read_text(&path)?)?.to_decomposition()?;
                let err = d.reconstruction_error();
                if err > ctx.config.reconstruction_tolerance {
                    return Err(Error::InvalidParameter(format!(
                        "decomposition misses τ^⊗{} by {err:.3e}",
                        d.t
                    )));
                }
                let t = magus::gadgetize(&c).n_magic();
                MitigationPlan::states(&c, tile(d, t)?, &s)?
            } else {
                MitigationPlan::from_catalog(&c, entry.parse()?, delta, &s)?
            };
            finish_estimate(&ctx, &plan, backend)?;
        }
        Command::Assist {
            circuit,
            ratio,
            r,
            delta,
            sampling,
        } => {
            let c = read_circuit(&circuit)?;
            let t = magus::gadgetize(&c).n_magic();
            let assist = match (ratio, r) {
                (Some(k), _) => Assist::Ratio(k),
                (None, Some(0)) => Assist::Classical,
                (None, Some(r)) if r <= t && t % r == 0 => Assist::Ratio(t / r),
                (None, Some(r)) => {
                    return Err(Error::InvalidParameter(format!("r = {r} does not divide t = {t}")));
                }
                (None, None) => return Err(Error::InvalidParameter("pass --ratio k or --r r".into())),
            };
            let backend: Backend = sampling.backend.parse()?;
            let plan = assist_plan(&c, assist, delta, &ctx.sampling(&sampling))?;
            finish_estimate(&ctx, &plan, backend)?;
        }
        Command::Overhead {
            t,
            nc1,
            nc2,
            delta,
            delta_c,
            ratio,
            curves,
            points,
        } => {
            if points < 2 {
                return Err(Error::InvalidParameter("--points must be at least 2".into()));
            }
            let grid: Vec<f64> = match delta {
                Some(d) => vec![d],
                None => (0..points).map(|i| 0.5 * i as f64 / (points - 1) as f64).collect(),
            };
            let csv = if curves {
                bound_curves_csv(&bound_curves(&grid)?)?
            } else {
                let mut out = String::from("delta,value\n");
                for &d in &grid {
                    let v = match ratio {
                        Some(k) => assisted_vs_classical_ratio(t, k, d, ctx.config.classical_baseline)?,
                        None => overhead_total(&OverheadQuery {
                            t,
                            nc1,
                            nc2,
                            noise: NoiseModel::new(d, delta_c, 0.0)?,
                        })?,
                    };
                    out.push_str(&format!("{d},{v}\n"));
                }
                out
            };
            ctx.emit(&csv)?;
        }
        Command::Region {
            budget,
            delta,
            delta_c,
            delta_cd,
            rounds,
        } => {
            let mut points = Vec::new();
            for m in 0..=rounds {
                let mut q = RegionQuery::new(budget, delta, delta_c, m);
                q.delta_cd = delta_cd;
                q.cliffords_per_round = ctx.config.distillation_cliffords;
                points.extend(mitigable_region(&q)?);
            }
            ctx.emit(&region_csv(&points)?)?;
        }
        Command::Enumerate { t, r, delta, scope: s } => {
            let cands = build_candidates(t, r, delta, scope(&s, t, r)?)?;
            ctx.emit(&candidates_csv(&cands)?)?;
        }
        Command::Verify => {
            let checks = run_suite(&ctx.config);
            let mut lines = String::new();
            for c in &checks {
                lines.push_str(&format!(
                    "{} {}: {}\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                ));
            }
            ctx.emit(&lines)?;
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_resource_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

//! Command-line front end.
//!
//! Every command prints a JSON report on stdout. With `--out DIR`, the
//! `DENSMEAS_OUT` environment variable or `output_dir` in the config file,
//! the report and its plot data are also written to that directory.
//!
//! Exit codes: 0 on success, 2 on precondition errors, 3 on internal
//! consistency errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::clarke::{self, Rule};
use crate::config::RunConfig;
use crate::corpus::{self, CorpusEntry};
use crate::derivatives;
use crate::error::{Error, Result};
use crate::finite_measures as fm;
use crate::geometry::{density_sequence, DeltaSchedule};
use crate::local_limits::Neighborhood;
use crate::meanvalue::limit_bracket;
use crate::report::{self, Artifacts};
use crate::weakconv;

pub const OUT_ENV: &str = "DENSMEAS_OUT";

#[derive(Parser, Debug)]
#[command(name = "densmeas", version, about = "Density measures, approximate limits and generalized derivatives")]
pub struct Cli {
    /// Sampling seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Points per scale.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Scale schedule `d0,r,K`: δ_k = d0·r^k for k < K.
    #[arg(long, global = true, value_parser = parse_schedule)]
    pub schedule: Option<DeltaSchedule>,
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report and plot files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Essential and approximate bounds, precise value and Lebesgue test at a point.
    Profile(FieldAt),
    /// Density of a corpus set at a point.
    Density {
        #[arg(long)]
        set: String,
        #[arg(long)]
        point: Option<Coords>,
    },
    /// Mean-value sequence of a field and its limit bracket.
    Bracket {
        #[command(flatten)]
        at: FieldAt,
        /// Scales discarded before the tail window.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
    },
    /// Approximate, essential or precise derivative, or the full ladder.
    Derivative {
        #[command(flatten)]
        at: FieldAt,
        #[arg(long, value_enum, default_value_t = KindArg::Ladder)]
        kind: KindArg,
    },
    /// Clarke generalized Jacobians and their rules.
    #[command(subcommand)]
    Clarke(ClarkeCommand),
    /// Weak convergence criteria for a corpus sequence.
    Weakconv {
        #[arg(long)]
        sequence: String,
    },
    /// Exact computations on finite atom algebras.
    #[command(subcommand)]
    Finitemeasure(FiniteCommand),
    /// Inspect the corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Args, Debug)]
pub struct FieldAt {
    /// Corpus field id.
    #[arg(long)]
    pub field: String,
    /// Comma-separated coordinates; defaults to the entry's point.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<Coords>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Approximate,
    Essential,
    Precise,
    Ladder,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RuleArg {
    Scalar,
    Sum,
    Product,
    Quotient,
}

#[derive(Subcommand, Debug)]
pub enum ClarkeCommand {
    /// Generalized Jacobian as a pruned cloud with its support table.
    Jac(FieldAt),
    /// Directional derivative cross-checked against the support function.
    Dirdev {
        #[command(flatten)]
        at: FieldAt,
        #[arg(long, allow_hyphen_values = true)]
        dir: Coords,
    },
    /// Sum, product, quotient or scalar rule inclusion.
    Rule {
        #[command(flatten)]
        at: FieldAt,
        #[arg(long, value_enum)]
        rule: RuleArg,
        /// Second operand for sum, product and quotient.
        #[arg(long)]
        other: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        scalar: Option<f64>,
    },
    /// Chain rule inclusion for `outer ∘ inner`.
    Chain {
        #[arg(long)]
        outer: String,
        #[arg(long)]
        inner: String,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<Coords>,
    },
    /// Mean value inclusion along a segment.
    Meanvalue {
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        from: Coords,
        #[arg(long, allow_hyphen_values = true)]
        to: Coords,
    },
}

#[derive(Subcommand, Debug)]
pub enum FiniteCommand {
    /// Ultrafilters, 0-1 measures and extreme points for given atom weights.
    Algebra {
        /// Comma-separated λ weights, one per atom.
        #[arg(long)]
        weights: Coords,
        /// Atom indices of the set C for the density set.
        #[arg(long, value_delimiter = ',')]
        c: Vec<usize>,
    },
    /// Shrinking neighborhoods with their measures and escaped mass.
    Purity {
        /// Corpus entry whose domain is used.
        #[arg(long)]
        domain: String,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<Coords>,
    },
}

#[derive(Subcommand, Debug)]
pub enum CorpusCommand {
    /// All ids with a one-line summary.
    List,
    /// Full description of an entry as JSON.
    Show { id: String },
}

/// Comma-separated coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Coords(pub Vec<f64>);

impl std::str::FromStr for Coords {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
            .collect::<std::result::Result<_, _>>()
            .map(Coords)
    }
}

fn parse_schedule(s: &str) -> std::result::Result<DeltaSchedule, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected d0,r,K".into());
    }
    let d0 = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let r = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let k = parts[2].trim().parse::<usize>().map_err(|e| e.to_string())?;
    DeltaSchedule::new(d0, r, k).map_err(|e| e.to_string())
}

/// Resolved configuration of one invocation.
#[derive(Debug)]
pub struct Context {
    pub config: RunConfig,
    pub out: Option<PathBuf>,
}

impl Context {
    fn from_cli(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = cli.seed {
            config.budget.seed = s;
        }
        if let Some(n) = cli.budget {
            config.budget.points_per_scale = n;
        }
        if let Some(s) = &cli.schedule {
            config.schedule = s.clone();
        }
        config.validate()?;
        let out = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or_else(|| config.output_dir.clone().map(PathBuf::from));
        Ok(Context { config, out })
    }
}

fn point_for(entry: &CorpusEntry, p: &Option<Coords>) -> Result<Vec<f64>> {
    let p = p.as_ref().map_or_else(|| entry.point().to_vec(), |c| c.0.clone());
    if p.len() != entry.dim() {
        return Err(Error::invalid(format!(
            "point has {} coordinates but '{}' lives in dimension {}",
            p.len(),
            entry.id,
            entry.dim()
        )));
    }
    Ok(p)
}

/// Runs one command and returns the JSON report with its plot files.
pub fn execute(command: &Command, ctx: &Context) -> Result<(String, Artifacts)> {
    let cfg = &ctx.config;
    let (sched, budget, tol) = (&cfg.schedule, &cfg.budget, &cfg.tolerances);
    let mut art = Artifacts::new();
    let (name, json) = match command {
        Command::Profile(at) => {
            let e = corpus::lookup(&at.field)?;
            let x = point_for(&e, &at.point)?;
            let nb = Neighborhood::new(&x, &e.domain, sched, budget, tol)?;
            let r = nb.profile(e.field()?);
            art.add("profile_means.dat", report::mean_sequence_dat(&format!("{} at {x:?}: ball means", e.id), &r.mean_sequence));
            ("profile", report::to_json(&json!({ "field": e.id, "report": r }))?)
        }
        Command::Density { set, point } => {
            let e = corpus::lookup(set)?;
            let x = point_for(&e, point)?;
            let seq = density_sequence(e.set()?, &x, &e.domain, sched, budget)?;
            let bracket = limit_bracket(&seq, 0, tol.collapse_tol)?;
            art.add("density.dat", report::mean_sequence_dat(&format!("density of {} at {x:?}", e.id), &seq));
            ("density", report::to_json(&json!({ "set": e.id, "point": x, "bracket": bracket, "sequence": seq }))?)
        }
        Command::Bracket { at, burn_in } => {
            let e = corpus::lookup(&at.field)?;
            let x = point_for(&e, &at.point)?;
            let nb = Neighborhood::new(&x, &e.domain, sched, budget, tol)?;
            let vals = nb.values(e.field()?);
            let seq = crate::meanvalue::MeanValueSequence::from_values(&vals);
            let bracket = limit_bracket(&seq, *burn_in, tol.collapse_tol)?;
            art.add("bracket.dat", report::mean_sequence_dat(&format!("{} at {x:?}: ball means", e.id), &seq));
            ("bracket", report::to_json(&json!({ "field": e.id, "point": x, "bracket": bracket, "sequence": seq }))?)
        }
        Command::Derivative { at, kind } => {
            let e = corpus::lookup(&at.field)?;
            let x = point_for(&e, &at.point)?;
            let f = e.field()?;
            let v = match kind {
                KindArg::Approximate => json!(derivatives::approximate_derivative(f, &x, &e.domain, sched, budget, tol)?),
                KindArg::Essential => json!(derivatives::essential_derivative(f, &x, &e.domain, sched, budget, tol)?),
                KindArg::Precise => json!(derivatives::precise_derivative(f, &x, &e.domain, sched, budget, tol)?),
                KindArg::Ladder => json!(derivatives::classify_differentiability(f, &x, &e.domain, sched, budget, tol)?),
            };
            ("derivative", report::to_json(&json!({ "field": e.id, "point": x, "report": v }))?)
        }
        Command::Clarke(c) => clarke_command(c, ctx, &mut art)?,
        Command::Weakconv { sequence } => {
            let e = corpus::lookup(sequence)?;
            let r = weakconv::weak_conv_report(e.sequence()?, sched, budget, tol)?;
            art.add("weakconv_sufficient.dat", report::trace_dat(e.id, &r.sufficient));
            art.add("weakconv_necessary.dat", report::trace_dat(e.id, &r.necessary));
            for (i, t) in r.region_probes.iter().enumerate() {
                art.add(format!("weakconv_region{i}.dat"), report::trace_dat(e.id, t));
            }
            art.add("weakconv_supnorm.dat", report::sup_norm_dat(&r));
            ("weakconv", report::to_json(&r)?)
        }
        Command::Finitemeasure(FiniteCommand::Algebra { weights, c }) => {
            ("finitemeasure", report::to_json(&algebra_report(&weights.0, c)?)?)
        }
        Command::Finitemeasure(FiniteCommand::Purity { domain, point }) => {
            let e = corpus::lookup(domain)?;
            let x = point_for(&e, point)?;
            let w = fm::purity_witness(&x, &e.domain, sched, budget)?;
            ("purity", report::to_json(&w)?)
        }
        Command::Corpus(CorpusCommand::List) => {
            let mut s = String::new();
            for e in corpus::entries() {
                let facts: Vec<&str> = e.facts.iter().map(|f| f.claim.as_str()).collect();
                s.push_str(&format!("{:<11} {:<8} {} | {}\n", e.id, e.kind(), e.summary, facts.join("; ")));
            }
            return Ok((s, art));
        }
        Command::Corpus(CorpusCommand::Show { id }) => ("corpus", report::to_json(&corpus::lookup(id)?.describe())?),
    };
    art.add(format!("{name}.json"), json.clone());
    Ok((json, art))
}

fn clarke_command(c: &ClarkeCommand, ctx: &Context, art: &mut Artifacts) -> Result<(&'static str, String)> {
    let cfg = &ctx.config;
    let (sched, budget, tol) = (&cfg.schedule, &cfg.budget, &cfg.tolerances);
    Ok(match c {
        ClarkeCommand::Jac(at) => {
            let e = corpus::lookup(&at.field)?;
            let x = point_for(&e, &at.point)?;
            let j = clarke::generalized_jacobian(e.field()?, &x, sched, budget)?;
            let title = format!("generalized Jacobian of {} at {x:?}", e.id);
            art.add("clarke_cloud.dat", report::cloud_dat(&title, &j));
            art.add("clarke_support.dat", report::support_dat(&title, &j));
            let hull = if j.m * j.n == 1 {
                Some([-j.support(&[-1.0]), j.support(&[1.0])])
            } else {
                None
            };
            let strict = clarke::strict_differentiability_test(e.field()?, &x, sched, budget, tol)?;
            (
                "clarke_jac",
                report::to_json(&json!({ "field": e.id, "point": x, "jacobian": j, "interval": hull, "strict": strict }))?,
            )
        }
        ClarkeCommand::Dirdev { at, dir } => {
            let e = corpus::lookup(&at.field)?;
            let x = point_for(&e, &at.point)?;
            let r = clarke::cross_check_directional(e.field()?, &x, &dir.0, sched, budget, tol)?;
            ("clarke_dirdev", report::to_json(&json!({ "field": e.id, "point": x, "direction": dir.0, "report": r }))?)
        }
        ClarkeCommand::Rule { at, rule, other, scalar } => {
            let e = corpus::lookup(&at.field)?;
            let x = point_for(&e, &at.point)?;
            let g_entry = other.as_deref().map(corpus::lookup).transpose()?;
            let g = g_entry.as_ref().map(|g| g.field()).transpose()?;
            let rule = match rule {
                RuleArg::Scalar => Rule::Scalar(scalar.ok_or_else(|| Error::invalid("--scalar is required"))?),
                RuleArg::Sum => Rule::Sum,
                RuleArg::Product => Rule::Product,
                RuleArg::Quotient => Rule::Quotient,
            };
            let r = clarke::calculus_rule_check(rule, e.field()?, g.map(|g| g as &dyn crate::Field), &x, sched, budget, tol)?;
            ("clarke_rule", report::to_json(&json!({ "field": e.id, "other": other, "point": x, "report": r }))?)
        }
        ClarkeCommand::Chain { outer, inner, point } => {
            let g = corpus::lookup(outer)?;
            let h = corpus::lookup(inner)?;
            let x = point_for(&h, point)?;
            let r = clarke::chain_rule_check(g.field()?, h.field()?, &x, sched, budget, tol)?;
            ("clarke_chain", report::to_json(&json!({ "outer": g.id, "inner": h.id, "point": x, "report": r }))?)
        }
        ClarkeCommand::Meanvalue { field, from, to } => {
            let e = corpus::lookup(field)?;
            let from = &point_for(&e, &Some(from.clone()))?;
            let to = &point_for(&e, &Some(to.clone()))?;
            let f = e.field()?;
            let inclusion = clarke::mean_value_inclusion(f, from, to, sched, budget, tol)?;
            let tube = derivatives::mean_value_verify(f, from, to, &crate::geometry::Region::Space { dim: e.dim() }, sched, budget, tol)?;
            art.add("meanvalue_tube.dat", report::mean_sequence_dat(&format!("{}: tube means of the directional derivative", e.id), &tube.tube_sequence));
            (
                "clarke_meanvalue",
                report::to_json(&json!({ "field": e.id, "from": from, "to": to, "inclusion": inclusion, "tube": tube }))?,
            )
        }
    })
}

fn algebra_report(weights: &[f64], c: &[usize]) -> Result<serde_json::Value> {
    let p = fm::FinitePartition::from_weights(weights)?;
    if c.iter().any(|&i| i >= p.len()) {
        return Err(Error::invalid("atom index in --c out of range"));
    }
    let ultrafilters: Vec<_> = fm::atoms_of(p.positive())
        .into_iter()
        .map(|i| {
            let u = fm::FiniteUltrafilter::new(i, &p)?;
            let mu = fm::measure_from_ultrafilter(&u, &p);
            let back = fm::ultrafilter_from_measure(&mu, &p)?;
            Ok(json!({
                "principal_atom": i,
                "measure": mu.atom_values,
                "round_trip": back == u,
                "dichotomy": fm::check_ultrafilter_dichotomy(&u, &p)?,
            }))
        })
        .collect::<Result<_>>()?;
    let ball = fm::extreme_points_unit_ball(&p)?;
    let dens = fm::extreme_points_density_set(fm::set_of(c), &p)?;
    Ok(json!({
        "weights": weights,
        "ultrafilters": ultrafilters,
        "unit_ball_vertices": ball,
        "density_set": { "c": c, "vertices": dens },
    }))
}

/// Parses `argv` (including the program name), runs the command and writes
/// to the given streams.
pub fn run_with(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    let result = Context::from_cli(&cli).and_then(|ctx| {
        let (text, art) = execute(&cli.command, &ctx)?;
        if let Some(dir) = &ctx.out {
            art.write_all(dir)?;
        }
        Ok(text)
    });
    match result {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pfsa::format::parse_model;
use pfsa::observe::{enumerate_entangled, GammaSet};
use pfsa::sim::{mean_se, simulate as run_simulation, summarize, Policy, PolicyArtifacts, SimConfig, SimTrace, PRNG};
use pfsa::{synthesize_supervisor, synthesize_with, Pfsa, SynthesisOptions};

use crate::Format;

#[derive(Debug)]
pub enum Failure {
    /// Model invariants are broken; one message per violation.
    Violations(Vec<String>),
    Parse(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Violations(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Violations(v) => write!(f, "{}", v.join("\n")),
            Failure::Parse(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<pfsa::Error> for Failure {
    fn from(e: pfsa::Error) -> Self {
        match e {
            pfsa::Error::Parse(_) | pfsa::Error::Format(_) => Failure::Parse(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_model(path: &Path) -> Result<Pfsa, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match Failure::from(e) {
        Failure::Parse(m) => Failure::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses and validates; later commands refuse invalid models.
fn load_valid(path: &Path) -> Result<Pfsa, Failure> {
    let g = read_model(path)?;
    let violations = g.validate();
    if violations.is_empty() {
        Ok(g)
    } else {
        Err(Failure::Violations(violations.iter().map(ToString::to_string).collect()))
    }
}

pub fn validate(path: &Path, out: &mut impl Write) -> Outcome {
    let g = load_valid(path)?;
    writeln!(
        out,
        "valid: {} states, {} events, {} controllable, {} unobservable",
        g.num_states(),
        g.num_events(),
        g.controllable_pairs().len(),
        g.unobservable_pairs().len()
    )?;
    Ok(())
}

fn pair_list(g: &Pfsa, pairs: impl IntoIterator<Item = (usize, usize)>) -> Vec<String> {
    pairs.into_iter().map(|(q, s)| format!("({}, {})", g.state_name(q), g.event_name(s))).collect()
}

pub fn synthesize(path: &Path, theta_override: Option<f64>, format: Format, out: &mut impl Write) -> Outcome {
    let g = load_valid(path)?;
    let policy = synthesize_with(&g, &SynthesisOptions { theta_override, ..Default::default() })?;
    let nu = policy.certified_measure.as_slice();
    match format {
        Format::Text => {
            let pairs = pair_list(&g, policy.disabled.iter().copied());
            if pairs.is_empty() {
                writeln!(out, "D* = ∅")?;
            } else {
                writeln!(out, "D* = {{{}}}", pairs.join(", "))?;
            }
            writeln!(out, "theta_min = {:e}", policy.theta_min)?;
            writeln!(out, "iterations = {}", policy.iterations.len())?;
            writeln!(out, "nu*:")?;
            let width = g.states().iter().map(|s| s.chars().count()).max().unwrap_or(0);
            for (name, x) in g.states().iter().zip(nu) {
                writeln!(out, "  {name:<width$}  {x:.6}")?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["state", "nu_star", "disabled_events", "theta_min", "iterations"])?;
            for (q, name) in g.states().iter().enumerate() {
                let events: Vec<&str> =
                    policy.disabled.iter().filter(|&&(p, _)| p == q).map(|&(_, s)| g.event_name(s)).collect();
                w.write_record([
                    name.clone(),
                    nu[q].to_string(),
                    events.join(";"),
                    policy.theta_min.to_string(),
                    policy.iterations.len().to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub struct SimulateOptions {
    pub policy: String,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub initial_state: Option<String>,
    pub lambda: f64,
    pub dedup_tol: f64,
    pub traces: bool,
}

fn policies(name: &str) -> Result<Vec<Policy>, Failure> {
    if name == "all" {
        return Ok(Policy::ALL.to_vec());
    }
    name.parse::<Policy>().map(|p| vec![p]).map_err(|e| Failure::Runtime(e.to_string()))
}

/// Gradient `∫/t`, blank before the first tick.
fn gradient(total: f64, ticks: usize) -> String {
    if ticks == 0 {
        String::new()
    } else {
        (total / ticks as f64).to_string()
    }
}

fn write_ticks(path: &Path, traces: &[SimTrace]) -> Outcome {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tick", "mean_int_chi", "mean_int_nu", "grad_chi", "grad_nu", "mean_n_entangled"])?;
    for row in summarize(traces) {
        w.write_record([
            row.tick.to_string(),
            row.mean_int_chi.to_string(),
            row.mean_int_nu.to_string(),
            row.grad_chi.to_string(),
            row.grad_nu.to_string(),
            row.mean_n_entangled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_traces(path: &Path, g: &Pfsa, traces: &[SimTrace]) -> Outcome {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "tick",
        "run",
        "true_state",
        "observed",
        "chi_hat",
        "nu_hat",
        "int_chi",
        "int_nu",
        "n_entangled",
        "disabled",
    ])?;
    for t in traces {
        for r in &t.ticks {
            let disabled: Vec<&str> = r.disabled.iter().map(|&s| g.event_name(s)).collect();
            w.write_record([
                r.tick.to_string(),
                t.run.to_string(),
                g.state_name(r.true_state).to_string(),
                r.observed.map_or(String::new(), |s| g.event_name(s).to_string()),
                r.chi_hat.to_string(),
                r.nu_hat.to_string(),
                r.int_chi.to_string(),
                r.int_nu.to_string(),
                r.n_entangled.to_string(),
                disabled.join(";"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(path: &Path, opts: &SimulateOptions, out: &mut impl Write) -> Outcome {
    let g = load_valid(path)?;
    let chosen = policies(&opts.policy)?;
    let initial_state = match &opts.initial_state {
        Some(name) => g.state_index(name)?,
        None => 0,
    };
    let artifacts = PolicyArtifacts::prepare(&g)?;
    fs::create_dir_all(&opts.out)?;

    let mut summary = csv::Writer::from_path(opts.out.join("summary.csv"))?;
    summary.write_record([
        "policy",
        "steps",
        "runs",
        "seed",
        "prng",
        "theta_min",
        "mean_int_chi",
        "se_int_chi",
        "mean_int_nu",
        "se_int_nu",
        "grad_chi",
        "grad_nu",
        "mean_n_entangled",
    ])?;
    for policy in chosen {
        let mut cfg = SimConfig::new(policy, opts.steps, opts.runs, opts.seed);
        cfg.initial_state = initial_state;
        cfg.lambda = opts.lambda;
        cfg.dedup_tol = opts.dedup_tol;
        let traces = run_simulation(&g, &artifacts, &cfg)?;

        write_ticks(&opts.out.join(format!("{policy}.csv")), &traces)?;
        if opts.traces {
            write_traces(&opts.out.join(format!("{policy}_runs.csv")), &g, &traces)?;
        }
        let chi: Vec<f64> = traces.iter().map(SimTrace::int_chi).collect();
        let nu: Vec<f64> = traces.iter().map(SimTrace::int_nu).collect();
        let ent: Vec<f64> = traces.iter().map(|t| t.distinct_entangled() as f64).collect();
        let (mc, sc) = mean_se(&chi);
        let (mn, sn) = mean_se(&nu);
        let (me, _) = mean_se(&ent);
        summary.write_record([
            policy.to_string(),
            opts.steps.to_string(),
            opts.runs.to_string(),
            opts.seed.to_string(),
            PRNG.to_string(),
            artifacts.policy.theta_min.to_string(),
            mc.to_string(),
            sc.to_string(),
            mn.to_string(),
            sn.to_string(),
            gradient(mc, opts.steps),
            gradient(mn, opts.steps),
            me.to_string(),
        ])?;
        writeln!(out, "{policy}: mean int chi {mc:.4} +- {sc:.4} over {} runs", opts.runs)?;
    }
    summary.flush()?;
    writeln!(out, "wrote {}", opts.out.display())?;
    Ok(())
}

pub struct EntangledOptions {
    pub tol: f64,
    pub cap: usize,
    pub theta: Option<f64>,
    pub with_disabled: bool,
    pub show: bool,
}

pub fn entangled(path: &Path, opts: &EntangledOptions, out: &mut impl Write) -> Outcome {
    let g = load_valid(path)?;
    let theta = match opts.theta {
        Some(t) => t,
        None => synthesize_supervisor(&g)?.theta_min,
    };
    let gammas = GammaSet::new(&g, theta)?;
    let found = enumerate_entangled(&gammas, opts.tol, opts.cap, opts.with_disabled)?;
    writeln!(out, "theta = {theta:e}")?;
    writeln!(out, "entangled states: {}", found.states.len())?;
    writeln!(out, "saturated: {}", !found.complete)?;
    if opts.show {
        for s in &found.states {
            let coords: Vec<String> = s.alpha.iter().map(|x| x.to_string()).collect();
            writeln!(out, "[{}]", coords.join(", "))?;
        }
    }
    Ok(())
}

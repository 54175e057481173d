use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use edrc::certificates::{find_certificate, idempotents_jelonek, idempotents_kollar, ns_bound, Component};
use edrc::engine::{bounds_report, cohomology_json, default_degree, full_pipeline, pipeline_json, BoundInputs, PipelineOptions};
use edrc::gysin::{residue, GysinSetup, QuotientForm};
use edrc::hypercoh::{closed_variety_cohomology, hypersurface_cohomology, Truncation};
use edrc::parse::parse_poly;
use edrc::poly::{MultiPoly, Vars};
use edrc::resolve::{patch_cover, ChartReport, VarietyData};
use edrc::ring::PolyForm;
use edrc::EdrcError;

#[derive(Parser, Debug)]
#[command(name = "edrc", version, about = "Exact algebraic de Rham cohomology of small affine varieties")]
struct Cli {
    /// Read the job from a JSON file (fields mirror the flags; `mode` selects the subcommand).
    #[arg(long, global = true)]
    job: Option<String>,
    /// Write the result JSON here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<String>,
    /// Seed for randomized steps (default: EDRC_SEED or 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit with code 4 when some result is only stabilized, not certified.
    #[arg(long, global = true)]
    require_certified: bool,
    /// Record stage timings in the output.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Evaluate the closed-form degree bounds.
    Bounds(BoundsArgs),
    /// Nullstellensatz certificate 1 = Σ h_i g_i modulo the ideal of X.
    Certificate(CertificateArgs),
    /// Idempotents of a disjoint union of components.
    Idempotents(IdempotentArgs),
    /// De Rham cohomology of Z(ideal).
    Cohomology(CohomologyArgs),
    /// Cohomology of Z(f) minus Z(g) through the residue map.
    Hypersurface(HypersurfaceArgs),
    /// Residue of a top-level quotient form.
    Residue(ResidueArgs),
    /// Birational projection charts covering X.
    Resolve(ResolveArgs),
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct BoundsArgs {
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    big_d: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    dprime: Option<u64>,
    #[arg(long)]
    d0: Option<u64>,
    #[arg(long)]
    d1: Option<u64>,
    #[arg(long)]
    s: Option<u64>,
    #[arg(long)]
    l: Option<u64>,
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    deg_alpha: Option<u64>,
    /// Comma-separated degrees of the components.
    #[arg(long, value_delimiter = ',')]
    component_degrees: Option<Vec<u64>>,
    /// Formulas that must be computable.
    #[arg(long, value_delimiter = ',')]
    formula: Vec<String>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct CertificateArgs {
    /// Comma-separated variable names.
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    /// Generators of I(X), separated by ';'.
    #[arg(long, default_value = "")]
    ideal: String,
    /// Polynomials g_i, separated by ';'.
    #[arg(long)]
    g: String,
    #[arg(long)]
    dim: Option<u64>,
    #[arg(long)]
    degree: Option<u64>,
    /// Degree cap (default: the Nullstellensatz bound).
    #[arg(long)]
    cap: Option<u32>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct IdempotentArgs {
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    /// One component per flag, generators separated by ';'.
    #[arg(long)]
    component: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    degrees: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<u64>,
    /// split (pairwise splitting of unity) or product (products of certificates).
    #[arg(long, default_value = "split")]
    method: String,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct CohomologyArgs {
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    /// Generators separated by ';' (empty: affine space).
    #[arg(long, default_value = "")]
    ideal: String,
    /// closed (global sections), pipeline (patch cover), or both.
    #[arg(long, default_value = "closed")]
    route: String,
    /// For the pipeline: components, one per flag (default: the ideal itself).
    #[arg(long)]
    component: Vec<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    degree: Option<u32>,
    /// Filtration degree of the slices.
    #[arg(long)]
    truncation_degree: Option<i64>,
    #[arg(long)]
    per_chart: bool,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct HypersurfaceArgs {
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    #[arg(long)]
    f: String,
    #[arg(long, default_value = "1")]
    g: String,
    #[arg(long)]
    p_max: Option<usize>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    truncation_degree: Option<i64>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct ResidueArgs {
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    #[arg(long)]
    f: String,
    #[arg(long, default_value = "1")]
    g: String,
    /// Terms `i,j,...:poly` of the numerator over (X0, vars); X0 is index 0.
    #[arg(long)]
    term: Vec<String>,
    #[arg(long, default_value_t = 1)]
    order: u32,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct ResolveArgs {
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    #[arg(long)]
    ideal: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    degree: Option<u32>,
}

/// JSON job: `{"mode": "...", ...fields of the matching subcommand}`.
fn command_from_job(text: &str) -> Result<Command, Failure> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        Failure::Parse(format!("job JSON at line {}, column {}: {e}", e.line(), e.column()))
    })?;
    let mode = v.get("mode").and_then(|m| m.as_str()).ok_or_else(|| Failure::Parse("job JSON needs a string field `mode`".into()))?;
    let bad = |e: serde_json::Error| Failure::Parse(format!("job JSON: {e}"));
    Ok(match mode {
        "bounds" => Command::Bounds(serde_json::from_value(v.clone()).map_err(bad)?),
        "certificate" => Command::Certificate(serde_json::from_value(v.clone()).map_err(bad)?),
        "idempotents" => Command::Idempotents(serde_json::from_value(v.clone()).map_err(bad)?),
        "cohomology" | "cohomology-closed" => Command::Cohomology(serde_json::from_value(v.clone()).map_err(bad)?),
        "hypersurface" | "hypersurface-cohomology" => Command::Hypersurface(serde_json::from_value(v.clone()).map_err(bad)?),
        "residue" => Command::Residue(serde_json::from_value(v.clone()).map_err(bad)?),
        "resolve" => Command::Resolve(serde_json::from_value(v.clone()).map_err(bad)?),
        other => return Err(Failure::Parse(format!("unknown mode `{other}`"))),
    })
}

enum Failure {
    Parse(String),
    Lib(EdrcError),
    Uncertified,
    Io(String),
}

impl From<EdrcError> for Failure {
    fn from(e: EdrcError) -> Self {
        Failure::Lib(e)
    }
}

/// Job files skip clap defaults, so empty fields fall back here.
fn non_empty<'a>(s: &'a str, default: &'a str) -> &'a str {
    if s.trim().is_empty() {
        default
    } else {
        s
    }
}

fn mk_vars(names: &[String]) -> Result<Vars, Failure> {
    if names.is_empty() {
        return Err(Failure::Parse("--vars is required".into()));
    }
    Ok(Arc::new(names.iter().map(|s| s.trim().to_string()).collect()))
}

fn poly_list(text: &str, vars: &Vars) -> Result<Vec<MultiPoly>, Failure> {
    let mut out = Vec::new();
    for part in text.split(';') {
        if part.trim().is_empty() {
            continue;
        }
        out.push(parse_poly(part, vars)?);
    }
    Ok(out)
}

fn run(cli: &Cli, cmd: &Command) -> Result<(Value, bool), Failure> {
    let seed = cli
        .seed
        .or_else(|| std::env::var("EDRC_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0);
    match cmd {
        Command::Bounds(a) => {
            let x = BoundInputs {
                p: a.p,
                m: a.m,
                n: a.n,
                big_d: a.big_d,
                d: a.d,
                dprime: a.dprime,
                d0: a.d0,
                d1: a.d1,
                s: a.s,
                l: a.l,
                t: a.t,
                deg_alpha: a.deg_alpha,
                component_degrees: a.component_degrees.clone(),
            };
            Ok((bounds_report(&x, &a.formula)?, true))
        }
        Command::Certificate(a) => {
            let vars = mk_vars(&a.vars)?;
            let ideal = poly_list(&a.ideal, &vars)?;
            let g = poly_list(&a.g, &vars)?;
            if g.is_empty() {
                return Err(Failure::Parse("--g needs at least one polynomial".into()));
            }
            let n = vars.len() as u64;
            let dim = a.dim.unwrap_or(n.saturating_sub(ideal.len() as u64));
            let big_d = a.degree.unwrap_or(default_degree(&ideal) as u64);
            let dmax = g.iter().filter_map(|p| p.degree()).max().unwrap_or(1).max(1) as u64;
            let bound = ns_bound(big_d, dmax, g.len() as u64, dim, n)?;
            let cap = a.cap.unwrap_or_else(|| u32::try_from(&bound).unwrap_or(u32::MAX).min(64));
            let ring = edrc::hypercoh::closed_ring(&vars, &ideal, cap + big_d as u32 + 2)?;
            let cert = find_certificate(&ring, &g, cap)?;
            let ok = cert.verify(&ring, &g)?;
            Ok((
                json!({
                    "cofactors": cert.cofactors.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
                    "achieved_degree": cert.achieved_degree,
                    "bound": bound.to_string(),
                    "cap": cap,
                    "verified": ok,
                }),
                true,
            ))
        }
        Command::Idempotents(a) => {
            let vars = mk_vars(&a.vars)?;
            let mut comps = Vec::new();
            for (i, c) in a.component.iter().enumerate() {
                let gens = poly_list(c, &vars)?;
                comps.push(Component {
                    degree: a.degrees.get(i).copied().unwrap_or(default_degree(&gens) as u64),
                    dim: a.dims.get(i).copied().unwrap_or((vars.len() - gens.len().min(vars.len())) as u64),
                    generators: gens,
                });
            }
            let set = match non_empty(&a.method, "split") {
                "split" => idempotents_kollar(&comps)?,
                "product" => idempotents_jelonek(&comps)?,
                m => return Err(Failure::Parse(format!("unknown method `{m}`"))),
            };
            let cap = set.max_degree() + comps.iter().map(|c| c.degree as u32).max().unwrap_or(1) + 2;
            let ok = set.verify(cap)?;
            Ok((
                json!({
                    "idempotents": set.idempotents.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                    "degrees": set.idempotents.iter().map(|e| e.degree().unwrap_or(0)).collect::<Vec<_>>(),
                    "max_degree": set.max_degree(),
                    "bound": edrc::certificates::split_bound(vars.len() as u64, &comps.iter().map(|c| c.degree).collect::<Vec<_>>()).to_string(),
                    "verified": ok,
                }),
                true,
            ))
        }
        Command::Cohomology(a) => {
            let vars = mk_vars(&a.vars)?;
            let ideal = poly_list(&a.ideal, &vars)?;
            let mut out = serde_json::Map::new();
            let mut certified = true;
            let route = non_empty(&a.route, "closed");
            if route == "closed" || route == "both" {
                let r = closed_variety_cohomology(&vars, &ideal, a.truncation_degree)?;
                certified &= r.all_certified();
                let mut v = cohomology_json(&r);
                v["timings"] = json!({});
                out.insert("closed".into(), v);
            }
            if route == "pipeline" || route == "both" {
                let comps_text: Vec<String> = if a.component.is_empty() { vec![a.ideal.clone()] } else { a.component.clone() };
                let mut comps = Vec::new();
                for c in &comps_text {
                    let gens = poly_list(c, &vars)?;
                    comps.push(VarietyData {
                        dim: a.dim.unwrap_or(vars.len().saturating_sub(gens.len())),
                        degree: a.degree.unwrap_or(default_degree(&gens)),
                        generators: gens,
                        vars: vars.clone(),
                    });
                }
                let opts = PipelineOptions {
                    seed,
                    truncation: a.truncation_degree.map(|d| Truncation { order: 1, degree: d }),
                    per_chart: a.per_chart,
                    timings: cli.timings,
                };
                let r = full_pipeline(&comps, &opts)?;
                certified &= r.cohomology.all_certified();
                out.insert("pipeline".into(), pipeline_json(&r));
            }
            if out.is_empty() {
                return Err(Failure::Parse(format!("unknown route `{route}`")));
            }
            // a single route is reported flat
            let v = if out.len() == 1 { out.into_iter().next().unwrap().1 } else { Value::Object(out) };
            Ok((v, certified))
        }
        Command::Hypersurface(a) => {
            let vars = mk_vars(&a.vars)?;
            let f = parse_poly(&a.f, &vars)?;
            let g = parse_poly(non_empty(&a.g, "1"), &vars)?;
            let setup = GysinSetup::new(&f, &g)?;
            let tr = match (a.order, a.truncation_degree) {
                (None, None) => None,
                (o, d) => Some(Truncation {
                    order: o.unwrap_or(1),
                    degree: d.unwrap_or(1),
                }),
            };
            let p_max = a.p_max.unwrap_or(vars.len() - 1);
            let r = hypersurface_cohomology(&setup, p_max, tr)?;
            let mut v = cohomology_json(&r.cohomology);
            v["bounds"] = json!({
                "thm71": r.bounds.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
                "within": r.within_bounds,
            });
            v["truncations"] = json!(r.truncations);
            v["timings"] = json!({});
            Ok((v, r.cohomology.all_certified()))
        }
        Command::Residue(a) => {
            let vars = mk_vars(&a.vars)?;
            let f = parse_poly(&a.f, &vars)?;
            let g = parse_poly(non_empty(&a.g, "1"), &vars)?;
            let setup = GysinSetup::new(&f, &g)?;
            let mut num: Option<PolyForm> = None;
            for t in &a.term {
                let (idx, poly) = t
                    .split_once(':')
                    .ok_or_else(|| Failure::Parse(format!("term `{t}` must look like `0,1:poly`")))?;
                let idx: Vec<usize> = idx
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| Failure::Parse(format!("bad index list in `{t}`")))?;
                if idx.windows(2).any(|w| w[0] >= w[1]) || idx.iter().any(|&i| i >= setup.avars.len()) {
                    return Err(Failure::Parse(format!("indices in `{t}` must be increasing and below {}", setup.avars.len())));
                }
                let c = parse_poly(poly, &setup.avars)?;
                let w = num.get_or_insert_with(|| PolyForm::zero(&setup.avars, idx.len()));
                if w.p != idx.len() {
                    return Err(Failure::Parse("all terms must have the same form degree".into()));
                }
                w.add_term(idx, c);
            }
            let num = num.ok_or_else(|| Failure::Parse("at least one --term is required".into()))?;
            let r = residue(&QuotientForm { numerator: num, order: a.order.max(1) }, &setup)?;
            let st = r.form.filtration_stamp();
            Ok((
                json!({
                    "ambient_vars": setup.avars.as_ref(),
                    "residue": r.form.to_text(),
                    "order": st.order_s,
                    "degree": st.degree_d,
                    "observed_degree": r.observed_degree,
                    "bound": r.bound.to_string(),
                    "within_bound": r.within_bound,
                }),
                true,
            ))
        }
        Command::Resolve(a) => {
            let vars = mk_vars(&a.vars)?;
            let gens = poly_list(&a.ideal, &vars)?;
            let x = VarietyData {
                dim: a.dim.unwrap_or(vars.len().saturating_sub(gens.len())),
                degree: a.degree.unwrap_or(default_degree(&gens)),
                generators: gens,
                vars,
            };
            let pc = patch_cover(&x, seed)?;
            Ok((
                json!({
                    "charts": pc.charts.iter().map(ChartReport::from).collect::<Vec<_>>(),
                    "cover_certificate": pc.cover.certificate.cofactors.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
                    "residual_witnesses": pc.residual_witnesses.iter().map(|p| p.iter().map(edrc::poly::fmt_scalar).collect::<Vec<_>>()).collect::<Vec<_>>(),
                }),
                true,
            ))
        }
    }
}

fn emit(cli: &Cli, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{path}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let cmd = match (&cli.job, &cli.command) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{path}: {e}")))?;
                command_from_job(&text)?
            }
            (None, Some(c)) => c.clone(),
            (Some(_), Some(_)) => return Err(Failure::Parse("give either --job or a subcommand, not both".into())),
            (None, None) => return Err(Failure::Parse("a subcommand or --job is required".into())),
        };
        let (v, certified) = run(&cli, &cmd)?;
        emit(&cli, &v)?;
        if cli.require_certified && !certified {
            return Err(Failure::Uncertified);
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(msg)) => {
            eprintln!("edrc: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("edrc: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Uncertified) => {
            eprintln!("edrc: some results are stabilized but not certified");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("edrc: {e}");
            ExitCode::from(match e {
                EdrcError::Parse { .. } => 1,
                EdrcError::Precondition(_)
                | EdrcError::NotMonic(_)
                | EdrcError::AmbientMismatch
                | EdrcError::DimensionMismatch(_) => 2,
                EdrcError::Singular | EdrcError::Computation { .. } => 3,
            })
        }
    }
}

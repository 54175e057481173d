//! Orchestration: the bounds calculator, the patch-cover pipeline and JSON results.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{Pow, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cech::{thm53_bound, total_d, zigzag_collapse, CechCochain, TotalCochain};
use crate::certificates::{idempotents_kollar, ns_bound, Component};
use crate::error::{EdrcError, Result};
use crate::gysin::GysinSetup;
use crate::hypercoh::{
    closed_default_degree, closed_variety_cohomology, hypersurface_cohomology, thm71_bound, CohomologyResult,
    LocalizedComplex, Relations, Truncation,
};
use crate::poly::{MultiPoly, Vars};
use crate::resolve::{patch_cover, ChartReport, VarietyData};
use crate::ring::{DiffForm, PolyForm};

// ---------- bounds ----------

/// Inputs of the closed-form bounds; each formula uses the ones it needs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundInputs {
    pub p: Option<u64>,
    pub m: Option<u64>,
    pub n: Option<u64>,
    #[serde(rename = "D")]
    pub big_d: Option<u64>,
    pub d: Option<u64>,
    pub dprime: Option<u64>,
    pub d0: Option<u64>,
    pub d1: Option<u64>,
    pub s: Option<u64>,
    pub l: Option<u64>,
    pub t: Option<u64>,
    pub deg_alpha: Option<u64>,
    pub component_degrees: Option<Vec<u64>>,
}

pub const FORMULAS: [&str; 9] = ["main", "prop31", "prop32", "thm21", "thm22", "lemma51_N", "thm53", "thm62", "thm71"];

fn need(v: Option<u64>, name: &str, formula: &str) -> Result<u64> {
    v.ok_or_else(|| EdrcError::precondition(format!("formula {formula} needs input {name}")))
}

fn big(v: u64) -> BigInt {
    BigInt::from(v)
}

/// `2^{2pm+6m+2} p^{2pm+6m+1} D^{4pm+10m+1} + D^{m+1}`.
pub fn main_bound(p: u64, m: u64, d: u64) -> BigInt {
    let e = 2 * p * m + 6 * m;
    Pow::pow(big(2), (e + 2) as u32) * Pow::pow(big(p), (e + 1) as u32) * Pow::pow(big(d), (4 * p * m + 10 * m + 1) as u32)
        + Pow::pow(big(d), (m + 1) as u32)
}

/// `⌊(n+1)D²/4⌋`.
pub fn prop32_bound(n: u64, d: u64) -> BigInt {
    big(n + 1) * big(d) * big(d) / 4
}

/// `(2d0 − d1 + 1)^{2s−1}·deg α`.
pub fn thm62_bound(d0: u64, d1: u64, s: u64, deg_alpha: u64) -> BigInt {
    let base = BigInt::from(2 * d0 as i64 - d1 as i64 + 1);
    Pow::pow(base, (2 * s).saturating_sub(1) as u32) * big(deg_alpha)
}

fn formula(name: &str, x: &BoundInputs) -> Result<Value> {
    let s = |b: BigInt| Value::String(b.to_string());
    Ok(match name {
        "main" => {
            let (p, m, d) = (need(x.p, "p", name)?, need(x.m, "m", name)?, need(x.big_d, "D", name)?);
            let main = main_bound(p, m, d);
            let mut o = json!({ "value": s(main.clone()) });
            if let Some(n) = x.n {
                let alt = &main - Pow::pow(big(d), (m + 1) as u32) + prop32_bound(n, d);
                o["with_prop32_term"] = s(alt.clone());
                o["min"] = s(main.min(alt));
            }
            o
        }
        "prop31" => s(Pow::pow(big(need(x.big_d, "D", name)?), (need(x.m, "m", name)? + 1) as u32)),
        "prop32" => {
            let (n, d) = (need(x.n, "n", name)?, need(x.big_d, "D", name)?);
            let v = prop32_bound(n, d);
            let mut o = json!({ "value": s(v.clone()) });
            if let Some(m) = x.m {
                o["min_with_prop31"] = s(v.min(Pow::pow(big(d), (m + 1) as u32)));
            }
            o
        }
        "thm21" => {
            let (bd, d, m) = (need(x.big_d, "D", name)?, need(x.d, "d", name)?, need(x.m, "m", name)?);
            let mut o = json!({
                "D_d_m": s(big(bd) * Pow::pow(big(d), m as u32)),
                "2_D_d_m_minus_1": s(big(2 * bd) * Pow::pow(big(d), m as u32) - 1),
            });
            if let Some(t) = x.t {
                o["D_d_t"] = s(big(bd) * Pow::pow(big(d), t as u32));
                if let Some(n) = x.n {
                    o["applicable"] = s(ns_bound(bd, d, t, m, n)?);
                }
            }
            o
        }
        "thm22" => {
            let n = need(x.n, "n", name)?;
            let degs = x
                .component_degrees
                .clone()
                .ok_or_else(|| EdrcError::precondition("formula thm22 needs input component_degrees"))?;
            s(crate::certificates::split_bound(n, &degs))
        }
        "lemma51_N" => s(crate::cech::lemma51_n(
            need(x.big_d, "D", name)?,
            need(x.s, "s", name)? as u32,
            need(x.d1, "d1", name)?,
            need(x.m, "m", name)?,
        )),
        "thm53" => s(thm53_bound(
            need(x.d, "d", name)? as i64,
            need(x.big_d, "D", name)?,
            need(x.l, "l", name)?,
            need(x.s, "s", name)?,
            need(x.m, "m", name)?,
            need(x.d1, "d1", name)?,
        )),
        "thm62" => s(thm62_bound(
            need(x.d0, "d0", name)?,
            need(x.d1, "d1", name)?,
            need(x.s, "s", name)?,
            need(x.deg_alpha, "deg_alpha", name)?,
        )),
        "thm71" => s(thm71_bound(
            need(x.p, "p", name)? as u32,
            need(x.d, "d", name)? as i64,
            need(x.dprime, "dprime", name)? as i64,
        )),
        _ => return Err(EdrcError::precondition(format!("unknown formula {name}"))),
    })
}

/// Every formula whose inputs are present; requested formulas must be computable.
pub fn bounds_report(x: &BoundInputs, requested: &[String]) -> Result<Value> {
    let mut out = serde_json::Map::new();
    for name in FORMULAS {
        match formula(name, x) {
            Ok(v) => {
                out.insert(name.to_string(), v);
            }
            Err(e) if requested.iter().any(|r| r == name) => return Err(e),
            Err(_) => {}
        }
    }
    for r in requested {
        if !FORMULAS.contains(&r.as_str()) {
            return Err(EdrcError::precondition(format!("unknown formula {r}")));
        }
    }
    Ok(json!({ "inputs": x, "bounds": Value::Object(out) }))
}

// ---------- pipeline ----------

/// Stage timings, recorded only when requested (outputs stay reproducible otherwise).
#[derive(Clone, Debug, Default)]
pub struct Timings {
    pub enabled: bool,
    pub stages: BTreeMap<String, u128>,
}

impl Timings {
    pub fn new(enabled: bool) -> Self {
        Timings {
            enabled,
            stages: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, stage: &str, start: Instant) {
        if self.enabled {
            *self.stages.entry(stage.to_string()).or_default() += start.elapsed().as_millis();
        }
    }

    pub fn to_json(&self) -> Value {
        json!(self.stages)
    }
}

#[derive(Clone, Debug)]
#[derive(Default)]
pub struct PipelineOptions {
    pub seed: u64,
    /// Truncation of the Čech–de Rham slices; default `(1, k + 1 + D)` at level k.
    pub truncation: Option<Truncation>,
    /// Also run the hypersurface route on every chart.
    pub per_chart: bool,
    pub timings: bool,
}


#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub cohomology: CohomologyResult,
    pub charts: Vec<Vec<ChartReport>>,
    /// Per component, per chart: dims of `Z(f) \ Z(g)` through the hypersurface route.
    pub chart_dims: Vec<Vec<Vec<usize>>>,
    pub idempotents: Vec<String>,
    pub main_bound: BigInt,
    pub thm53_bounds: Vec<BigInt>,
    pub within_bounds: bool,
    pub timings: Timings,
}

fn poly_degree(gens: &[MultiPoly]) -> u32 {
    gens.iter().filter_map(|g| g.degree()).max().unwrap_or(1).max(1)
}

/// Cohomology of one irreducible component through its patch cover.
fn component_pipeline(x: &VarietyData, opts: &PipelineOptions, timings: &mut Timings) -> Result<(CohomologyResult, Vec<ChartReport>, Vec<Vec<usize>>, Vec<BigInt>)> {
    let t0 = Instant::now();
    let pc = patch_cover(x, opts.seed)?;
    timings.record("patch_cover", t0);
    let cover = &pc.cover;
    let cx = LocalizedComplex::new(&x.vars, cover.divisors.clone(), Relations {
        ideal: x.generators.iter().filter(|g| !g.is_zero()).cloned().collect(),
        powers: Vec::new(),
    })?;
    let mut coh = CohomologyResult::empty();
    let mut thm53 = Vec::new();
    let d1 = cover.d1();
    for k in 0..=x.dim {
        let tr = opts.truncation.unwrap_or(Truncation {
            order: 1,
            degree: closed_default_degree(k, &x.generators),
        });
        let t1 = Instant::now();
        let lr = cx.truncated_cohomology(k, tr)?;
        timings.record("total_complex", t1);
        let t2 = Instant::now();
        let mut reps = Vec::new();
        for c in &lr.representatives {
            let mut tc = TotalCochain::zero(k);
            for (cell, w) in c {
                let q = cell.len() - 1;
                let form = DiffForm::from_polyform(&cover.ring, &cover.divisor(cell), w, tr.order);
                let mut cc = CechCochain::zero(q, k - q);
                cc.insert(cell.clone(), form)?;
                tc = tc.add(&TotalCochain::single(k, cc))?;
            }
            if !total_d(cover, &tc)?.is_zero()? {
                return Err(EdrcError::computation("pipeline", "total-complex class is not closed"));
            }
            let z = zigzag_collapse(cover, &tc)?;
            reps.push(z.alpha);
        }
        timings.record("zigzag", t2);
        thm53.push(thm53_bound(
            tr.degree,
            x.degree as u64,
            k as u64,
            tr.order as u64,
            x.dim as u64,
            d1,
        ));
        coh.push(reps, lr.certified);
    }
    let mut chart_dims = Vec::new();
    if opts.per_chart {
        let t3 = Instant::now();
        for ch in &pc.charts {
            let setup = GysinSetup::new(&ch.f, &ch.g)?;
            let h = hypersurface_cohomology(&setup, x.dim, None)?;
            chart_dims.push(h.cohomology.dims);
        }
        timings.record("per_chart", t3);
    }
    Ok((coh, pc.charts.iter().map(ChartReport::from).collect(), chart_dims, thm53))
}

/// Cohomology of `X = ⊔ components`, recombined with idempotents.
pub fn full_pipeline(components: &[VarietyData], opts: &PipelineOptions) -> Result<PipelineResult> {
    let first = components.first().ok_or_else(|| EdrcError::precondition("no components"))?;
    let vars: Vars = first.vars.clone();
    if components.iter().any(|c| c.vars != vars) {
        return Err(EdrcError::AmbientMismatch);
    }
    let mut timings = Timings::new(opts.timings);
    let mut per = Vec::new();
    for c in components {
        per.push(component_pipeline(c, opts, &mut timings)?);
    }
    let big_d: u64 = components.iter().map(|c| c.degree as u64).sum();
    let m = components.iter().map(|c| c.dim).max().unwrap_or(0);
    // X's ideal: products of component generators (the components are disjoint)
    let mut x_gens: Vec<MultiPoly> = vec![MultiPoly::one(&vars)];
    for c in components {
        let gens: Vec<MultiPoly> = c.generators.iter().filter(|g| !g.is_zero()).cloned().collect();
        if gens.is_empty() {
            x_gens = vec![MultiPoly::zero(&vars)];
            break;
        }
        x_gens = x_gens.iter().flat_map(|a| gens.iter().map(move |b| a * b)).collect();
    }
    let x_data = VarietyData {
        vars: vars.clone(),
        generators: x_gens.into_iter().filter(|g| !g.is_zero()).collect(),
        dim: m,
        degree: big_d as u32,
    };
    let x_ring = x_data.ring()?;
    let mut idem_text = Vec::new();
    let idems: Vec<MultiPoly> = if components.len() == 1 {
        vec![MultiPoly::one(&vars)]
    } else {
        let t = Instant::now();
        let comps: Vec<Component> = components
            .iter()
            .map(|c| Component {
                generators: c.generators.clone(),
                degree: c.degree as u64,
                dim: c.dim as u64,
            })
            .collect();
        let set = idempotents_kollar(&comps)?;
        timings.record("idempotents", t);
        idem_text = set.idempotents.iter().map(|e| e.to_string()).collect();
        set.idempotents
    };
    let mut coh = CohomologyResult::empty();
    let mut within = true;
    let mut all_thm53 = Vec::new();
    let main = main_bound(m as u64, m as u64, big_d.max(1));
    for p in 0..=m {
        let mut reps = Vec::new();
        let mut certified = true;
        for ((res, _, _, t53), e) in per.iter().zip(&idems) {
            if p >= res.dims.len() {
                continue;
            }
            certified &= res.certified[p];
            if let Some(b) = t53.get(p) {
                all_thm53.push(b.clone());
            }
            for w in &res.representatives[p] {
                let num: PolyForm = w.numerator_at(0).mul_poly(e);
                let g = DiffForm::from_polyform(&x_ring, &x_ring.one(), &num, 0);
                if !g.exterior_d().is_zero_mod_relations()? {
                    return Err(EdrcError::computation("pipeline", "recombined form is not closed"));
                }
                reps.push(g);
            }
        }
        let bound = main_bound(p as u64, m as u64, big_d.max(1));
        for w in &reps {
            let st = w.filtration_stamp();
            if BigInt::from(st.degree_d) > bound {
                within = false;
            }
        }
        coh.push(reps, certified);
    }
    Ok(PipelineResult {
        cohomology: coh,
        charts: per.iter().map(|e| e.1.clone()).collect(),
        chart_dims: per.iter().map(|e| e.2.clone()).collect(),
        idempotents: idem_text,
        main_bound: main,
        thm53_bounds: all_thm53,
        within_bounds: within,
        timings,
    })
}

// ---------- JSON ----------

/// `{dims, representatives: [{p, form, order, degree, certified}], ...}`.
pub fn cohomology_json(res: &CohomologyResult) -> Value {
    let mut reps = Vec::new();
    for (p, (forms, stamps)) in res.representatives.iter().zip(&res.stamps).enumerate() {
        for (w, st) in forms.iter().zip(stamps) {
            reps.push(json!({
                "p": p,
                "form": w.to_text(),
                "order": st.order_s,
                "degree": st.degree_d,
                "certified": res.certified[p],
            }));
        }
    }
    json!({ "dims": res.dims, "certified": res.certified, "representatives": reps })
}

pub fn pipeline_json(r: &PipelineResult) -> Value {
    let mut v = cohomology_json(&r.cohomology);
    v["charts"] = json!(r.charts);
    if r.chart_dims.iter().any(|c| !c.is_empty()) {
        v["chart_dims"] = json!(r.chart_dims);
    }
    if !r.idempotents.is_empty() {
        v["idempotents"] = json!(r.idempotents);
    }
    v["bounds"] = json!({
        "main": r.main_bound.to_string(),
        "thm53": r.thm53_bounds.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        "within": r.within_bounds,
    });
    v["timings"] = r.timings.to_json();
    v
}

/// Both routes on one variety; dims must agree.
pub fn route_agreement(x: &VarietyData, opts: &PipelineOptions) -> Result<(CohomologyResult, PipelineResult)> {
    let closed = closed_variety_cohomology(&x.vars, &x.generators, None)?;
    let pipe = full_pipeline(std::slice::from_ref(x), opts)?;
    let n = pipe.cohomology.dims.len();
    if closed.dims[..n] != pipe.cohomology.dims[..] || closed.dims[n..].iter().any(|d| !d.is_zero()) {
        return Err(EdrcError::computation(
            "pipeline",
            format!("routes disagree: {:?} vs {:?}", closed.dims, pipe.cohomology.dims),
        ));
    }
    Ok((closed, pipe))
}

/// Degree of the variety for defaults: product of generator degrees (a Bézout upper bound).
pub fn default_degree(gens: &[MultiPoly]) -> u32 {
    let p: u32 = gens.iter().filter(|g| !g.is_zero()).filter_map(|g| g.degree()).product();
    p.max(poly_degree(gens)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercoh::in_span_mod_exact;
    use crate::parse::parse_poly;
    use crate::poly::vars;

    #[test]
    fn bounds_examples() {
        assert_eq!(main_bound(1, 1, 2), BigInt::from(33554436u64));
        assert_eq!(prop32_bound(3, 4), BigInt::from(16));
        assert_eq!(crate::cech::lemma51_n(1, 2, 3, 2), BigInt::from(72));
        let x = BoundInputs {
            p: Some(1),
            m: Some(1),
            big_d: Some(2),
            ..Default::default()
        };
        let r = bounds_report(&x, &["main".to_string()]).unwrap();
        assert_eq!(r["bounds"]["main"]["value"], "33554436");
        assert!(bounds_report(&x, &["thm71".to_string()]).is_err());
    }

    #[test]
    fn hyperbola_routes_agree() {
        let v = vars(&["x", "y"]);
        let x = VarietyData {
            generators: vec![parse_poly("x*y - 1", &v).unwrap()],
            vars: v.clone(),
            dim: 1,
            degree: 2,
        };
        let (closed, pipe) = route_agreement(&x, &PipelineOptions::default()).unwrap();
        assert_eq!(pipe.cohomology.dims, vec![1, 1]);
        assert_eq!(closed.dims, vec![1, 1, 0]);
        // the pipeline's H¹ class is dx/x = y dx up to a nonzero scalar and exact forms
        let w = pipe.cohomology.representatives[1][0].numerator_at(0);
        let ydx = PolyForm::basic(&v, vec![0], parse_poly("y", &v).unwrap());
        let gens = [parse_poly("x*y - 1", &v).unwrap()];
        assert!(in_span_mod_exact(&v, &gens, 1, &w, std::slice::from_ref(&ydx), 4).unwrap());
        assert!(!in_span_mod_exact(&v, &gens, 1, &w, &[], 4).unwrap());
    }

    #[test]
    fn two_points() {
        let v = vars(&["x"]);
        let comps: Vec<VarietyData> = ["x", "x - 1"]
            .iter()
            .map(|g| VarietyData {
                generators: vec![parse_poly(g, &v).unwrap()],
                vars: v.clone(),
                dim: 0,
                degree: 1,
            })
            .collect();
        let r = full_pipeline(&comps, &PipelineOptions::default()).unwrap();
        assert_eq!(r.cohomology.dims, vec![2]);
        assert_eq!(r.idempotents.len(), 2);
    }
}

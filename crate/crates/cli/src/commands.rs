use std::path::Path;

use cmvlab::coefficients::lp_sum_criterion;
use cmvlab::floquet::{band_structure, periodic_spectrum};
use cmvlab::operator::verify_sieve_square;
use cmvlab::qwalk::{build_walk, evolve_with, WalkBoundary};
use cmvlab::spectral_sets::CircleArcSet;
use cmvlab::transfer::{estimate_z, uniform_grid};
use cmvlab::weyl::{default_dim, defect_sweep};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ApproxConfig, BandsConfig, LyapunovConfig, SieveConfig, WalkConfig, WeylConfig};
use crate::output::{num, row, Run};
use crate::CliError;

fn params<T: Serialize>(cfg: &T) -> Map<String, Value> {
    match serde_json::to_value(cfg) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn arcs_json(set: &CircleArcSet) -> Value {
    json!({
        "arcs": set.arcs().iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
        "measure": set.measure(),
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(m), Value::Object(n)) = (&mut a, b) {
        m.extend(n);
    }
    a
}

pub fn bands(cfg: BandsConfig, out: &Path) -> Result<(), CliError> {
    if cfg.q == 0 || cfg.q % 2 != 0 {
        return Err(CliError::Validation(format!("q = {} but q must be even", cfg.q)));
    }
    let seq = cfg.sequence.build(cfg.seed)?;
    let pts = band_structure(&seq, cfg.q, cfg.nk)?;
    let set = periodic_spectrum(&seq, cfg.q, cfg.resolution)?;

    let mut run = Run::new(out, "bands", params(&cfg), cfg.seed)?;
    run.csv(
        "bands.csv",
        "q,n,k,Re z,Im z,Re dz/dk,Im dz/dk",
        pts.iter().map(|p| {
            row(&[
                p.q.to_string(),
                p.n.to_string(),
                num(p.k),
                num(p.z.re),
                num(p.z.im),
                num(p.dz_dk.re),
                num(p.dz_dk.im),
            ])
        }),
    )?;
    run.json("arcs.json", &merge(arcs_json(&set), json!({ "q": cfg.q })))?;
    run.finish()?;
    Ok(())
}

pub fn lyapunov(cfg: LyapunovConfig, out: &Path) -> Result<(), CliError> {
    if cfg.grid < 8 {
        return Err(CliError::Validation(format!("grid = {} but at least 8 points are required", cfg.grid)));
    }
    if cfg.n_steps < 1000 {
        return Err(CliError::Validation(format!("n_steps = {} but at least 1000 are required", cfg.n_steps)));
    }
    let seq = cfg.sequence.build(cfg.seed)?;
    let z = estimate_z(&seq, &uniform_grid(cfg.grid), cfg.n_steps, cfg.eps)?;

    let mut run = Run::new(out, "lyapunov", params(&cfg), cfg.seed)?;
    let (n, eps) = (cfg.n_steps.to_string(), num(cfg.eps));
    run.csv(
        "lyapunov.csv",
        "theta,L,N,epsilon",
        z.samples.iter().map(|&(t, l)| row(&[num(t), num(l), n.clone(), eps.clone()])),
    )?;
    run.json(
        "z_arcs.json",
        &merge(arcs_json(&z.set), json!({ "n_steps": cfg.n_steps, "eps": cfg.eps, "warnings": z.warnings })),
    )?;
    run.finish()?;
    Ok(())
}

pub fn approx(cfg: ApproxConfig, out: &Path) -> Result<(), CliError> {
    if cfg.grid < 8 {
        return Err(CliError::Validation(format!("grid = {} but at least 8 points are required", cfg.grid)));
    }
    let fam = cfg.family.build()?;
    let limit = fam.limit();
    let z = estimate_z(limit, &uniform_grid(cfg.grid), cfg.n_steps, cfg.eps)?;

    let mut levels = Vec::new();
    let mut sigmas = Vec::new();
    for (n, st) in fam.stages().iter().enumerate() {
        let q2 = 2 * st.period;
        let doubled = periodic_spectrum(&limit.periodize(q2)?, q2, cfg.resolution)?;
        let sigma = periodic_spectrum(&st.seq, st.period, cfg.resolution)?;
        levels.push(json!({
            "level": n,
            "q": st.period,
            "diff_measure": doubled.diff_measure(&z.set) + 0.0,
            "sigma_measure": sigma.measure(),
        }));
        sigmas.push(sigma);
    }
    let diffs: Vec<f64> = levels.iter().map(|l| l["diff_measure"].as_f64().unwrap_or(f64::NAN)).collect();
    let nonincreasing = diffs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let hausdorff = sigmas
        .windows(2)
        .map(|w| w[0].hausdorff(&w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let lp = lp_sum_criterion(&fam, 0, sigmas[0].measure())?;

    let mut run = Run::new(out, "approx", params(&cfg), cfg.seed)?;
    run.json(
        "report.json",
        &json!({
            "levels": levels,
            "diff_measure_nonincreasing": nonincreasing,
            "z_measure": z.set.measure(),
            "n_steps": cfg.n_steps,
            "eps": cfg.eps,
            "hausdorff_consecutive": hausdorff,
            "lp_sum": {
                "k": 0,
                "holds": lp.holds,
                "lhs": lp.lhs,
                "rhs": lp.rhs,
                "terms": lp.terms,
                "tail_bound": lp.tail_bound,
            },
        }),
    )?;
    run.finish()?;
    Ok(())
}

pub fn walk(cfg: WalkConfig, out: &Path) -> Result<(), CliError> {
    if cfg.survival_radius < 0 {
        return Err(CliError::Validation(format!("survival_radius = {} must be nonnegative", cfg.survival_radius)));
    }
    if cfg.record_every == 0 {
        return Err(CliError::Validation("record_every must be positive".into()));
    }
    let coins = cfg.coins.build()?;
    let state = cfg.initial.build()?;
    let (lo, hi) = state.window();
    let op = build_walk(&coins, lo, hi, WalkBoundary::Absorbing)?.with_max_sites(cfg.max_sites);

    let mut dist = Vec::new();
    let mut surv = Vec::new();
    evolve_with(&state, &op, cfg.steps, |t, s| {
        surv.push(row(&[t.to_string(), num(s.mass_within(cfg.survival_radius))]));
        if t % cfg.record_every == 0 || t == cfg.steps {
            for (n, p, m) in s.probabilities() {
                dist.push(row(&[t.to_string(), n.to_string(), num(p), num(m)]));
            }
        }
    })?;

    let mut run = Run::new(out, "walk", params(&cfg), cfg.seed)?;
    run.csv("distribution.csv", "t,n,p_plus,p_minus", dist)?;
    run.csv("survival.csv", "t,survival", surv)?;
    run.finish()?;
    Ok(())
}

pub fn sieve_check(cfg: SieveConfig, out: &Path) -> Result<(), CliError> {
    let seq = cfg.sequence.build(cfg.seed)?;
    let rep = verify_sieve_square(&seq, cfg.dim)?;
    let max = rep.x_invariant_residual.max(rep.y_invariant_residual).max(rep.similarity_residual);
    let mut run = Run::new(out, "sieve-check", params(&cfg), cfg.seed)?;
    run.json("sieve.json", &merge(serde_json::to_value(rep).unwrap_or_default(), json!({ "dim": cfg.dim, "max_residual": max })))?;
    run.finish()?;
    Ok(())
}

pub fn weyl_defect(cfg: WeylConfig, out: &Path) -> Result<(), CliError> {
    let seq = cfg.sequence.build(cfg.seed)?;
    let set = match (&cfg.arcs, cfg.q) {
        (Some(a), _) => CircleArcSet::new(a.iter().map(|x| (x[0], x[1])))?,
        (None, Some(q)) => periodic_spectrum(&seq, q, cfg.resolution)?,
        (None, None) => CircleArcSet::full(),
    };
    let samples = defect_sweep(&seq, cfg.k, &set, cfg.r, cfg.samples)?;
    let max = samples.iter().map(|s| s.defect).fold(0.0, f64::max);

    let mut run = Run::new(out, "weyl-defect", params(&cfg), cfg.seed)?;
    run.csv(
        "defect.csv",
        "theta,r,|M+ + conj(M-)|",
        samples.iter().map(|s| row(&[num(s.theta), num(s.r), num(s.defect)])),
    )?;
    run.json(
        "defect.json",
        &merge(arcs_json(&set), json!({ "max_defect": max, "r": cfg.r, "k": cfg.k, "truncation_dim": default_dim(cfg.r) })),
    )?;
    run.finish()?;
    Ok(())
}

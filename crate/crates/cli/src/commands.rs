use crate::{Failure, Global, ModelKind, SumBackend};
use clap::{Args, ValueEnum};
use eulerfield::analytic::mc::{
    mc_cgf_one, mc_covariance, mc_tilted_moments, paired_scale_samples,
};
use eulerfield::analytic::{
    calibrate_constant, cgf_one, covariance_scale, oscillation_bound,
    scaling_constants_with_cutoff, sigma_sq, tilted_moments_one, variance_scale, Backend,
    BoundParams,
};
use eulerfield::exceed::{
    empirical_max_distribution, estimate_moments, frequency, gaussian_comparison, joint_j_minus,
    oscillation_samples, prime_table_for, ExceedanceConfig, FieldModel, MaxModel, ScaleBarrier,
};
use eulerfield::model::GridBackend;
use eulerfield::primes::{sieve as sieve_primes, write_cache, PrimeTable, DEFAULT_SEGMENT};
use eulerfield::report::{write_csv, Assertion, ExceedRow, RunSummary, WalkRow};
use eulerfield::stats::quantile;
use eulerfield::walks::{
    ballot_dp, ballot_mc, brw_conditional_sweep, brw_depth_sweep, BallotQuery, BrwParams,
    DpOptions, SubleadingFit,
};
use serde::Serialize;
use serde_json::json;
use std::f64::consts::LN_2;
use std::path::PathBuf;
use std::time::Instant;

type Outcome = Result<bool, Failure>;

/// Output paths and timing of one run.
struct Run<'a> {
    name: &'static str,
    global: &'a Global,
    start: Instant,
}

impl<'a> Run<'a> {
    fn new(name: &'static str, global: &'a Global) -> Result<Self, Failure> {
        std::fs::create_dir_all(&global.out_dir).map_err(|e| {
            Failure::Config(format!(
                "invalid argument `out-dir`: cannot create {}: {e}",
                global.out_dir.display()
            ))
        })?;
        Ok(Run {
            name,
            global,
            start: Instant::now(),
        })
    }

    fn path(&self, ext: &str) -> PathBuf {
        let stem = self.global.tag.as_deref().unwrap_or(self.name);
        self.global.out_dir.join(format!("{stem}.{ext}"))
    }

    fn csv<S: Serialize>(&self, rows: impl IntoIterator<Item = S>) -> Result<usize, Failure> {
        Ok(write_csv(&self.path("csv"), rows)?)
    }

    /// Writes the JSON sidecar, prints the assertion lines and returns
    /// whether they all passed.
    fn finish(
        self,
        args: &impl Serialize,
        results: &impl Serialize,
        assertions: Vec<Assertion>,
    ) -> Outcome {
        let config = json!({ "global": self.global, "args": args });
        let summary = RunSummary::new(
            self.name,
            &config,
            results,
            assertions,
            self.start.elapsed(),
        )?;
        summary.write_json(&self.path("json"))?;
        for a in &summary.assertions {
            let tag = if a.passed { "PASS" } else { "FAIL" };
            println!("{tag} {}: {}", a.name, a.detail);
        }
        println!(
            "wrote {} and {}",
            self.path("csv").display(),
            self.path("json").display()
        );
        Ok(summary.passed())
    }
}

fn config_err(name: &str, reason: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("invalid argument `{name}`: {reason}"))
}

fn backend<'a>(b: SumBackend, table: &'a PrimeTable) -> Backend<'a> {
    match b {
        SumBackend::Exact => Backend::Exact(table),
        SumBackend::Integral => Backend::Integral,
    }
}

/// `|a - b| <= z sqrt(sa^2 + sb^2)`.
fn within(a: f64, b: f64, sa: f64, sb: f64, z: f64) -> bool {
    (a - b).abs() <= z * sa.hypot(sb)
}

// ---------------------------------------------------------------- sieve

#[derive(Args, Debug, Serialize)]
pub struct SieveArgs {
    /// Sieve primes up to e^L (1 <= L <= 20).
    #[arg(long)]
    pub log_limit: f64,
    #[arg(long, default_value_t = DEFAULT_SEGMENT)]
    pub segment: usize,
}

#[derive(Serialize)]
struct ScaleRow {
    k: usize,
    count: usize,
    first: Option<u64>,
    last: Option<u64>,
    reciprocal_sum: f64,
}

pub fn sieve(g: &Global, a: &SieveArgs) -> Outcome {
    let run = Run::new("sieve", g)?;
    let table = sieve_primes(a.log_limit, a.segment)?;
    let cache = run.path("prim");
    let file = std::fs::File::create(&cache).map_err(eulerfield::Error::from)?;
    write_cache(&table, std::io::BufWriter::new(file))?;
    let mut rows = Vec::new();
    for (k, r) in table.stored_scales().enumerate() {
        let ps = &table.primes()[r];
        rows.push(ScaleRow {
            k,
            count: ps.len(),
            first: ps.first().copied(),
            last: ps.last().copied(),
            reciprocal_sum: ps.iter().map(|&p| 1.0 / p as f64).sum(),
        });
    }
    let covered: usize = rows.iter().map(|r| r.count).sum();
    run.csv(&rows)?;
    println!("{} primes written to {}", table.len(), cache.display());
    let results = json!({
        "primes": table.len(),
        "limit": table.limit(),
        "largest": table.primes().last(),
        "cache": cache,
    });
    let checks = vec![Assertion::new(
        "scales partition the table",
        covered == table.len(),
        format!("{covered} of {} primes in scales", table.len()),
    )];
    run.finish(a, &results, checks)
}

// ----------------------------------------------------- verify-covariance

#[derive(Args, Debug, Serialize)]
pub struct CovarianceArgs {
    /// Scales 0..=k-max are compared (k-max <= 4; Monte Carlo at scale 4
    /// sums over half a million primes per sample).
    #[arg(long, default_value_t = 3)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0.25)]
    pub dh: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Standard errors allowed between Monte Carlo and the exact sum.
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
}

#[derive(Serialize)]
struct CovarianceRow {
    k: usize,
    sigma_sq: f64,
    rho_exact: f64,
    rho_integral: f64,
    rho_mc: f64,
    rho_mc_se: f64,
}

pub fn verify_covariance(g: &Global, a: &CovarianceArgs) -> Outcome {
    let run = Run::new("verify-covariance", g)?;
    let table = prime_table_for(a.k_max)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for k in 0..=a.k_max {
        let sigma = variance_scale(k, Backend::Exact(&table))?;
        let rho = covariance_scale(k, a.dh, Backend::Exact(&table))?;
        let rho_int = covariance_scale(k, a.dh, Backend::Integral)?;
        let mc = mc_covariance(&table, k, a.dh, a.samples, a.seed.wrapping_add(k as u64))?;
        checks.push(Assertion::new(
            format!("k={k} Monte Carlo covariance"),
            mc.agrees_with(rho, a.z),
            format!("{:.6} +- {:.6} vs exact {rho:.6}", mc.estimate, mc.se),
        ));
        checks.push(Assertion::new(
            format!("k={k} |rho| <= sigma^2"),
            rho.abs() <= sigma,
            format!("|{rho:.6}| vs {sigma:.6}"),
        ));
        rows.push(CovarianceRow {
            k,
            sigma_sq: sigma,
            rho_exact: rho,
            rho_integral: rho_int,
            rho_mc: mc.estimate,
            rho_mc_se: mc.se,
        });
    }
    run.csv(&rows)?;
    run.finish(a, &json!({ "rows": rows }), checks)
}

// ------------------------------------------------------------ verify-cgf

#[derive(Args, Debug, Serialize)]
pub struct CgfArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
}

#[derive(Serialize)]
struct CgfRow {
    k: usize,
    lambda: f64,
    exact: f64,
    quadratic: f64,
    mc: f64,
    mc_se: f64,
}

pub fn verify_cgf(g: &Global, a: &CgfArgs) -> Outcome {
    let run = Run::new("verify-cgf", g)?;
    let top =
        a.k.iter()
            .copied()
            .max()
            .ok_or_else(|| config_err("k", "empty"))?;
    let table = prime_table_for(top)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &k in &a.k {
        for &lambda in &a.lambda {
            let exact = cgf_one(&table, k, lambda)?;
            // one sample set per scale, shared by the lambdas
            let mc = mc_cgf_one(&table, k, lambda, a.samples, a.seed.wrapping_add(k as u64))?;
            checks.push(Assertion::new(
                format!("k={k} lambda={lambda} log E exp(lambda Y_k)"),
                mc.agrees_with(exact.exact, a.z),
                format!("{:.6} +- {:.6} vs {:.6}", mc.estimate, mc.se, exact.exact),
            ));
            rows.push(CgfRow {
                k,
                lambda,
                exact: exact.exact,
                quadratic: exact.quadratic,
                mc: mc.estimate,
                mc_se: mc.se,
            });
        }
    }
    run.csv(&rows)?;
    run.finish(a, &json!({ "rows": rows }), checks)
}

// ----------------------------------------------------------- verify-tilt

#[derive(Args, Debug, Serialize)]
pub struct TiltArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
    /// Allowed gap between the tilted mean and lambda sigma_k^2.
    #[arg(long, default_value_t = 0.01)]
    pub mean_tolerance: f64,
}

#[derive(Serialize)]
struct TiltRow {
    statistic: &'static str,
    analytic: f64,
    mc: f64,
    mc_se: f64,
}

pub fn verify_tilt(g: &Global, a: &TiltArgs) -> Outcome {
    let run = Run::new("verify-tilt", g)?;
    if a.k == 0 {
        return Err(config_err("k", "the tilt acts on scales k >= 1"));
    }
    let table = prime_table_for(a.k)?;
    let exact = tilted_moments_one(&table, a.k, a.lambda)?;
    let (mean, var) = mc_tilted_moments(&table, a.k, a.lambda, a.h, a.samples, a.seed)?;
    let sigma = variance_scale(a.k, Backend::Exact(&table))?;
    let rows = [
        TiltRow {
            statistic: "mean",
            analytic: exact.mean,
            mc: mean.estimate,
            mc_se: mean.se,
        },
        TiltRow {
            statistic: "variance",
            analytic: exact.variance,
            mc: var.estimate,
            mc_se: var.se,
        },
    ];
    let checks = vec![
        Assertion::new(
            "tilted mean",
            mean.agrees_with(exact.mean, a.z),
            format!(
                "{:.6} +- {:.6} vs {:.6}",
                mean.estimate, mean.se, exact.mean
            ),
        ),
        Assertion::new(
            "tilted variance",
            var.agrees_with(exact.variance, a.z),
            format!(
                "{:.6} +- {:.6} vs {:.6}",
                var.estimate, var.se, exact.variance
            ),
        ),
        Assertion::new(
            "tilted mean near lambda sigma_k^2",
            (mean.estimate - a.lambda * sigma).abs() <= a.mean_tolerance,
            format!("{:.6} vs {:.6}", mean.estimate, a.lambda * sigma),
        ),
    ];
    run.csv(&rows)?;
    run.finish(
        a,
        &json!({ "analytic": exact, "sigma_sq_k": sigma, "rows": rows }),
        checks,
    )
}

// ------------------------------------------------------------------ max

#[derive(Args, Debug, Serialize)]
pub struct MaxArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Prime)]
    pub model: ModelKind,
    #[arg(long)]
    pub n: usize,
    /// Grid exponent (prime model); defaults to n.
    #[arg(long)]
    pub g: Option<u32>,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Serialize)]
struct MaxRow {
    replicate: usize,
    max: f64,
}

pub fn max(g: &Global, a: &MaxArgs) -> Outcome {
    let run = Run::new("max", g)?;
    let table;
    let model = match a.model {
        ModelKind::Prime => {
            table = prime_table_for(a.n)?;
            MaxModel::Prime {
                table: &table,
                n: a.n,
                g: a.g.unwrap_or(a.n as u32),
                backend: GridBackend::Recurrence,
            }
        }
        ModelKind::Brw => MaxModel::Brw(BrwParams::new(a.n)?),
    };
    let d = empirical_max_distribution(model, a.replicates, a.seed)?;
    run.csv(d.samples.iter().enumerate().map(|(i, &m)| MaxRow {
        replicate: i,
        max: m,
    }))?;
    let s = &d.summary;
    println!(
        "median {:.4} +- {:.4}, m_n(0) = {:.4}",
        s.median, s.median_se, s.m_n
    );
    let checks = vec![Assertion::new(
        "maxima finite",
        d.samples.iter().all(|x| x.is_finite()),
        format!("{} replicates", d.samples.len()),
    )];
    run.finish(a, &d.summary, checks)
}

// -------------------------------------------------------------- brw-max

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethod {
    /// Sample the top levels, integrate the rest exactly.
    Conditional,
    /// Plain Monte Carlo of whole trees.
    Mc,
}

#[derive(Args, Debug, Serialize)]
pub struct BrwMaxArgs {
    #[arg(long, value_delimiter = ',', default_value = "12,14,16,18,20")]
    pub depths: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SweepMethod::Conditional)]
    pub method: SweepMethod,
    /// Replicates of the conditional estimator.
    #[arg(long, default_value_t = 2000)]
    pub replicates: usize,
    /// Tree levels sampled per replicate by the conditional estimator.
    #[arg(long, default_value_t = 8)]
    pub sampled_levels: usize,
    /// Replicates of plain Monte Carlo (whole trees and the i.i.d. control).
    #[arg(long, default_value_t = 400)]
    pub mc_replicates: usize,
    #[arg(long)]
    pub seed: u64,
}

fn fit_checks(label: &str, f: &SubleadingFit, checks: &mut Vec<Assertion>) {
    checks.push(Assertion::new(
        format!("{label} alpha = log 2 +- 0.02"),
        (f.alpha - LN_2).abs() <= 0.02,
        format!("{:.4} +- {:.4}", f.alpha, f.alpha_se),
    ));
    checks.push(Assertion::new(
        format!("{label} beta in [0.5, 1.0]"),
        (0.5..=1.0).contains(&f.beta),
        format!("{:.4} +- {:.4}", f.beta, f.beta_se),
    ));
}

pub fn brw_max(g: &Global, a: &BrwMaxArgs) -> Outcome {
    let run = Run::new("brw-max", g)?;
    let var = sigma_sq();
    let plain = brw_depth_sweep(&a.depths, a.mc_replicates, var, a.seed)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let push = |rows: &mut Vec<WalkRow>, meds: &[f64], ses: &[f64], method: &str| {
        for ((&n, &m), &s) in a.depths.iter().zip(meds).zip(ses) {
            rows.push(WalkRow {
                n,
                estimate: m,
                se_or_error: s,
                method: method.to_string(),
            });
        }
    };
    push(
        &mut rows,
        &plain.brw.medians,
        &plain.brw.median_se,
        "brw-mc",
    );
    push(&mut rows, &plain.iid.medians, &plain.iid.median_se, "iid");
    let conditional = match a.method {
        SweepMethod::Conditional => {
            let c = brw_conditional_sweep(&a.depths, a.replicates, var, a.sampled_levels, a.seed)?;
            push(
                &mut rows,
                &c.side.medians,
                &c.side.median_se,
                "brw-conditional",
            );
            let agree = plain
                .brw
                .medians
                .iter()
                .zip(&plain.brw.median_se)
                .zip(c.side.medians.iter().zip(&c.side.median_se))
                .all(|((&m, &s), (&cm, &cs))| within(m, cm, s, cs, 3.0));
            checks.push(Assertion::new(
                "plain and conditional medians agree within 3 SE",
                agree,
                format!("{:?} vs {:?}", plain.brw.medians, c.side.medians),
            ));
            Some(c)
        }
        SweepMethod::Mc => None,
    };
    let brw_fit = conditional
        .as_ref()
        .map_or(&plain.brw.fit, |c| &c.side.fit)
        .clone();
    fit_checks("tree", &brw_fit, &mut checks);
    let iid = &plain.iid.fit;
    checks.push(Assertion::new(
        "i.i.d. beta in [0.1, 0.45]",
        (0.1..=0.45).contains(&iid.beta),
        format!("{:.4} +- {:.4}", iid.beta, iid.beta_se),
    ));
    checks.push(Assertion::new(
        "i.i.d. beta below tree beta",
        iid.beta < brw_fit.beta,
        format!("{:.4} < {:.4}", iid.beta, brw_fit.beta),
    ));
    run.csv(&rows)?;
    run.finish(
        a,
        &json!({ "plain": plain, "conditional": conditional, "fit": brw_fit }),
        checks,
    )
}

// --------------------------------------------------------------- ballot

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallotMethod {
    Dp,
    Mc,
    Both,
}

#[derive(Args, Debug, Serialize)]
pub struct BallotArgs {
    /// Walk lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Ceiling at every step.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Terminal window (b, b + delta).
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = sigma_sq())]
    pub variance: f64,
    #[arg(long, value_enum, default_value_t = BallotMethod::Dp)]
    pub method: BallotMethod,
    #[arg(long, default_value_t = 0.01)]
    pub mesh: f64,
    #[arg(long, default_value_t = 8.0)]
    pub range_factor: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: usize,
    /// Required for Monte Carlo.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest relative change of n^(3/2) P between successive n, if checked.
    #[arg(long)]
    pub scaling_tolerance: Option<f64>,
}

pub fn ballot(g: &Global, a: &BallotArgs) -> Outcome {
    let run = Run::new("ballot", g)?;
    let want_mc = a.method != BallotMethod::Dp;
    let want_dp = a.method != BallotMethod::Mc;
    let seed = match (want_mc, a.seed) {
        (true, None) => return Err(config_err("seed", "required for Monte Carlo")),
        (_, s) => s.unwrap_or(0),
    };
    let opts = DpOptions {
        mesh: a.mesh,
        range_factor: a.range_factor,
        tolerance: a.tolerance,
    };
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut scaled = Vec::new();
    for &n in &a.n {
        let q = BallotQuery {
            variance: a.variance,
            ..BallotQuery::new(n, a.a, a.b, a.delta)
        };
        let dp = want_dp.then(|| ballot_dp(&q, &opts)).transpose()?;
        let mc = want_mc.then(|| ballot_mc(&q, a.paths, seed)).transpose()?;
        if let Some(d) = dp {
            println!(
                "n={n} dp {:.6} (error {:.1e})",
                d.probability, d.error_estimate
            );
            scaled.push((n, d.probability * (n as f64).powf(1.5)));
            rows.push(WalkRow {
                n,
                estimate: d.probability,
                se_or_error: d.error_estimate,
                method: "dp".into(),
            });
        }
        if let Some(m) = mc {
            println!("n={n} mc {:.6} +- {:.6}", m.estimate, m.se);
            rows.push(WalkRow {
                n,
                estimate: m.estimate,
                se_or_error: m.se,
                method: "mc".into(),
            });
        }
        if let (Some(d), Some(m)) = (dp, mc) {
            checks.push(Assertion::new(
                format!("n={n} dp and mc agree within 3 SE"),
                within(d.probability, m.estimate, d.error_estimate, m.se, 3.0),
                format!("{:.6} vs {:.6} +- {:.6}", d.probability, m.estimate, m.se),
            ));
        }
    }
    if let Some(tol) = a.scaling_tolerance {
        for w in scaled.windows(2) {
            let change = (w[1].1 - w[0].1).abs() / w[0].1;
            checks.push(Assertion::new(
                format!("n^(3/2) P from n={} to n={}", w[0].0, w[1].0),
                change < tol,
                format!(
                    "{:.5} -> {:.5}, change {:.2}%",
                    w[0].1,
                    w[1].1,
                    100.0 * change
                ),
            ));
        }
    }
    run.csv(&rows)?;
    run.finish(a, &json!({ "rows": rows, "scaled_dp": scaled }), checks)
}

// ---------------------------------------------------------- exceedances

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Barrier `X_k < k log 2 + B` at every scale.
    Tree,
    /// Upper-bound event `J+`.
    JPlus,
    /// Lower-bound event `J-`.
    JMinus,
}

#[derive(Args, Debug, Serialize)]
pub struct ExceedArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Prime)]
    pub model: ModelKind,
    #[arg(long)]
    pub n: usize,
    /// Grid exponent; defaults to n (and must equal n for the tree).
    #[arg(long)]
    pub g: Option<u32>,
    #[arg(long, value_enum, default_value_t = EventKind::Tree)]
    pub event: EventKind,
    /// Level m for the tree event; without it, a pilot quantile of the max.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub quantile: f64,
    #[arg(long, default_value_t = 500)]
    pub pilot_replicates: usize,
    /// Seed of the pilot run; defaults to seed + 1.
    #[arg(long)]
    pub pilot_seed: Option<u64>,
    /// Barrier intercept B of the tree event; defaults to (log n)^2.
    #[arg(long)]
    pub intercept: Option<f64>,
    /// Cutoff scale r of the J events.
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    /// Terminal window width of J-.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// First barrier scale of J+; defaults to floor(log n)^2.
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
}

pub fn exceedances(g: &Global, a: &ExceedArgs) -> Outcome {
    let run = Run::new("exceedances", g)?;
    let grid = a.g.unwrap_or(a.n as u32);
    let table = match a.model {
        ModelKind::Prime => Some(prime_table_for(a.n)?),
        ModelKind::Brw => None,
    };
    let model = match &table {
        Some(t) => FieldModel::Prime {
            table: t,
            backend: GridBackend::Recurrence,
        },
        None => FieldModel::Brw {
            variance: sigma_sq(),
        },
    };
    let mut pilot = None;
    let config = match a.event {
        EventKind::Tree => {
            let level = match a.level {
                Some(m) => m,
                None => {
                    let mm = match &table {
                        Some(t) => MaxModel::Prime {
                            table: t,
                            n: a.n,
                            g: grid,
                            backend: GridBackend::Recurrence,
                        },
                        None => MaxModel::Brw(BrwParams::new(a.n)?),
                    };
                    let seed = a.pilot_seed.unwrap_or(a.seed.wrapping_add(1));
                    let d = empirical_max_distribution(mm, a.pilot_replicates, seed)?;
                    let m = quantile(&d.samples, a.quantile);
                    pilot = Some(json!({ "seed": seed, "quantile": a.quantile, "level": m }));
                    m
                }
            };
            let b = a.intercept.unwrap_or((a.n as f64).ln().powi(2));
            ExceedanceConfig::new(a.n, grid, level)?.with_barrier(ScaleBarrier::tree(b))
        }
        EventKind::JPlus => {
            let sc = scaling_constants_with_cutoff(a.n, a.eps, a.r)?;
            ExceedanceConfig::j_plus(&sc, grid, a.start.unwrap_or(sc.barrier_start))?
        }
        EventKind::JMinus => {
            let sc = scaling_constants_with_cutoff(a.n, -a.eps, a.r)?;
            ExceedanceConfig::j_minus(&sc, grid, a.delta)?
        }
    };
    let r = estimate_moments(model, &config, a.replicates, a.seed)?;
    run.csv(r.rows.iter().map(ExceedRow::from))?;
    let mut checks = vec![Assertion::new(
        "pathwise Z_tilde <= Z",
        r.rows.iter().all(|c| c.z_tilde <= c.z),
        format!("{} replicates", r.rows.len()),
    )];
    for (label, m) in [("Z", &r.z), ("Z_tilde", &r.z_tilde)] {
        checks.push(Assertion::new(
            format!("{label}: P(>=1) <= E + 3 SE"),
            m.markov_holds(3.0),
            format!("{:.4} vs {:.4}", m.hit.estimate, m.first.estimate),
        ));
        checks.push(Assertion::new(
            format!("{label}: P(>=1) >= E^2/E2 - 3 SE"),
            m.pz_holds(3.0),
            format!("{:.4} vs {:.4}", m.hit.estimate, m.pz),
        ));
    }
    println!(
        "level {:.4}: E[Z] = {:.4}, E[Z_tilde] = {:.4}",
        config.level, r.z.first.estimate, r.z_tilde.first.estimate
    );
    let results = json!({
        "config": r.config,
        "pilot": pilot,
        "z": r.z,
        "z_tilde": r.z_tilde,
        "bins": r.bins,
    });
    run.finish(a, &results, checks)
}

// ---------------------------------------------------------- oscillation

#[derive(Args, Debug, Serialize)]
pub struct OscillationArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[arg(long, default_value_t = 12)]
    pub g: u32,
    #[arg(long, default_value_t = 0.0)]
    pub center: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5")]
    pub x: Vec<f64>,
    /// Oscillation threshold a.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    /// Largest acceptable calibrated constant.
    #[arg(long, default_value_t = 10.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_exp: f64,
    #[arg(long, default_value_t = 10.0)]
    pub regime_cap: f64,
}

/// Oscillation frequencies at one `x` beside the bound shape.
#[derive(Serialize)]
pub struct OscillationPoint {
    pub x: f64,
    /// `P[osc >= a, center <= x]`.
    pub frequency: f64,
    pub frequency_se: f64,
    /// `P[max > x + a, center <= x]`.
    pub frequency_exceed: f64,
    pub shape: f64,
    pub in_regime: bool,
}

/// Frequencies at each `x` and the smallest constant `c*` covering them all.
pub fn oscillation_points(
    samples: &[eulerfield::exceed::OscillationSample],
    xs: &[f64],
    a: f64,
    k: usize,
    r: usize,
    params: &BoundParams,
) -> eulerfield::Result<(Vec<OscillationPoint>, f64)> {
    let mut points = Vec::new();
    for &x in xs {
        let f = frequency(
            samples
                .iter()
                .map(|s| s.oscillation() >= a && s.center <= x),
        );
        let e = frequency(samples.iter().map(|s| s.max > x + a && s.center <= x));
        let b = oscillation_bound(x, a, k, r, params)?;
        points.push(OscillationPoint {
            x,
            frequency: f.estimate,
            frequency_se: f.se,
            frequency_exceed: e.estimate,
            shape: b.shape,
            in_regime: b.in_regime(),
        });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.frequency, p.shape)).collect();
    Ok((points, calibrate_constant(&pairs)))
}

#[derive(Serialize)]
struct OscillationRow {
    replicate: u64,
    center: f64,
    max: f64,
    oscillation: f64,
}

pub fn oscillation(g: &Global, a: &OscillationArgs) -> Outcome {
    let run = Run::new("oscillation", g)?;
    if a.k > a.n {
        return Err(config_err("k", format!("scale {} above n = {}", a.k, a.n)));
    }
    let table = prime_table_for(a.n)?;
    let samples = oscillation_samples(
        &table,
        a.k,
        a.r,
        a.g,
        a.center,
        a.replicates,
        a.seed,
        GridBackend::Recurrence,
    )?;
    let params = BoundParams {
        c: 1.0,
        c_exp: a.c_exp,
        regime_cap: a.regime_cap,
    };
    let (points, c_star) = oscillation_points(&samples, &a.x, a.a, a.k, a.r, &params)?;
    let largest = samples
        .iter()
        .map(|s| s.oscillation())
        .fold(f64::NEG_INFINITY, f64::max);
    println!("largest oscillation {largest:.4}, c* = {c_star:.4}");
    run.csv(samples.iter().map(|s| OscillationRow {
        replicate: s.replicate,
        center: s.center,
        max: s.max,
        oscillation: s.oscillation(),
    }))?;
    let checks = vec![Assertion::new(
        format!("calibrated c* <= {}", a.c_max),
        c_star <= a.c_max,
        format!("c* = {c_star:.4}"),
    )];
    run.finish(
        a,
        &json!({ "points": points, "c_star": c_star, "largest_oscillation": largest }),
        checks,
    )
}

// ------------------------------------------------------ compare-gaussian

#[derive(Args, Debug, Serialize)]
pub struct GaussianArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.25)]
    pub dh: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SumBackend::Exact)]
    pub backend: SumBackend,
    /// KS threshold, asserted for k >= 3 (the CLT regime).
    #[arg(long, default_value_t = 0.02)]
    pub ks_max: f64,
}

#[derive(Serialize)]
struct PairRow {
    sample: usize,
    first: f64,
    second: f64,
}

pub fn compare_gaussian(g: &Global, a: &GaussianArgs) -> Outcome {
    let run = Run::new("compare-gaussian", g)?;
    let table = prime_table_for(a.k)?;
    let (x, y) = paired_scale_samples(&table, a.k, a.dh, a.samples, a.seed)?;
    let rep = gaussian_comparison(&x, &y, a.k, a.dh, backend(a.backend, &table))?;
    run.csv(x.iter().zip(&y).enumerate().map(|(i, (&f, &s))| PairRow {
        sample: i,
        first: f,
        second: s,
    }))?;
    let mut checks = vec![Assertion::new(
        "correlation within 3 SE of rho_k / sigma_k^2",
        rep.correlation_agrees(3.0),
        format!(
            "{:.5} +- {:.5} vs {:.5}",
            rep.correlation, rep.correlation_se, rep.correlation_analytic
        ),
    )];
    if a.k >= 3 {
        for (label, d) in [("first", rep.ks_first), ("second", rep.ks_second)] {
            checks.push(Assertion::new(
                format!("KS of {label} coordinate <= {}", a.ks_max),
                d <= a.ks_max,
                format!("{d:.5}"),
            ));
        }
    }
    run.finish(a, &rep, checks)
}

// ----------------------------------------------------------------- joint

#[derive(Args, Debug, Serialize)]
pub struct JointArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 20_000)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    /// Prefactor of the two-point bound.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Serialize)]
struct JointRow {
    h1: f64,
    h2: f64,
    l: Option<u32>,
    joint: f64,
    joint_se: f64,
    single: f64,
    bound: Option<f64>,
}

pub fn joint(g: &Global, a: &JointArgs) -> Outcome {
    let run = Run::new("joint", g)?;
    let table = prime_table_for(a.n)?;
    let sc = scaling_constants_with_cutoff(a.n, -a.eps, a.r)?;
    let config = ExceedanceConfig::j_minus(&sc, a.n as u32, a.delta)?;
    let params = BoundParams {
        c: a.c,
        ..BoundParams::default()
    };
    // h2 = 2^-l has branching point l with h1 = 0
    let mut pairs = vec![(0.0, 0.0)];
    pairs.extend((1..=a.n).rev().map(|l| (0.0, (-(l as f64)).exp2())));
    let est = joint_j_minus(&table, &config, &sc, &params, &pairs, a.replicates, a.seed)?;
    let rows: Vec<JointRow> = est
        .iter()
        .map(|e| JointRow {
            h1: e.h1,
            h2: e.h2,
            l: e.l,
            joint: e.joint.estimate,
            joint_se: e.joint.se,
            single: e.single.estimate,
            bound: e.bound.as_ref().map(|b| b.value),
        })
        .collect();
    let mut checks = vec![Assertion::new(
        "coincident points give the single-point probability",
        est[0].joint.estimate == est[0].single.estimate,
        format!(
            "{:.5} vs {:.5}",
            est[0].joint.estimate, est[0].single.estimate
        ),
    )];
    // est[1..] runs l = n down to 1
    let trend = est[1..].windows(2).all(|w| {
        w[1].joint.estimate <= w[0].joint.estimate + 3.0 * w[0].joint.se.hypot(w[1].joint.se)
    });
    checks.push(Assertion::new(
        "joint probability nonincreasing as l decreases (3 SE)",
        trend,
        format!(
            "{:?}",
            est[1..]
                .iter()
                .map(|e| e.joint.estimate)
                .collect::<Vec<_>>()
        ),
    ));
    run.csv(&rows)?;
    run.finish(
        a,
        &json!({ "constants": sc, "config": config, "estimates": est }),
        checks,
    )
}

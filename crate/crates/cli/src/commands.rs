use anyhow::anyhow;
use contract_lab::conditions::{
    check_concavity, check_mlrp, check_prop1, check_prop2, check_prop3, check_quantity_lemma, ConditionReport,
    DEFAULT_GRID,
};
use contract_lab::contract::{solve_concealed, solve_revealed, Equilibrium, Scenario};
use contract_lab::garbling::{
    agent_optimal_eps, check_garbling_general, check_garbling_zerocost, grid_vgarb_prime_at_one, sweep_garbling,
};
use contract_lab::numerics::linspace;
use contract_lab::restriction::{check_drc, check_quasiconvexity, sweep_restriction};
use contract_lab::verify::run_verification;
use contract_lab::welfare::{build_trajectories, grid_revelation_preference, sign_changes};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::exit::{CliResult, Config, Failure, Numeric, VERIFY_FAILED};
use crate::output::Sink;

const TRAJECTORY_MIN_POINTS: usize = 11;

/// Everything a scenario command needs.
pub struct Ctx {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub scenario_id: String,
    pub sink: Sink,
    pub grid_n: Option<usize>,
}

impl Ctx {
    fn points(&self, configured: usize, min: usize) -> CliResult<usize> {
        let n = self.grid_n.unwrap_or(configured);
        if n < min {
            return Err(Failure::config(anyhow!("this command needs at least {min} points, got {n}")));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Garbling,
    Restriction,
    /// Garbling and restriction paths with the concealed/revealed anchors.
    Trajectories,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GridKind {
    Revelation,
    #[value(name = "garbling_prime", alias = "garbling-prime")]
    GarblingPrime,
}

fn describe(e: &Equilibrium) -> String {
    format!(
        "V={} Pi={} W={} Q={}",
        e.agent_utility, e.principal_utility, e.welfare, e.quantity
    )
}

pub fn solve(ctx: &Ctx) -> CliResult<u8> {
    let s = &ctx.scenario;
    let con = solve_concealed(s).during("concealed equilibrium")?;
    let rev = solve_revealed(s).during("revealed equilibrium")?;
    let lemma = check_quantity_lemma(s).during("quantity lemma")?;
    eprintln!("concealed: p*={} {}", con.price(), describe(&con));
    eprintln!("revealed: p0*={} p1*={} {}", rev.p0, rev.p1, describe(&rev));
    eprintln!("W_con={} W_rev={}", con.welfare, rev.welfare);
    eprintln!(
        "quantity lemma: {} (margin {}; {})",
        if lemma.holds { "holds" } else { "fails" },
        lemma.margin,
        lemma.notes
    );

    #[derive(Serialize)]
    struct Extra<'a> {
        quantity_lemma: &'a ConditionReport,
    }
    let rows = [con.record(), rev.record()];
    ctx.sink
        .emit_with("solve", &rows, Extra { quantity_lemma: &lemma })
        .or_config()?;
    Ok(0)
}

fn position(i: usize, n: usize) -> &'static str {
    if i == 0 || i + 1 == n {
        "boundary"
    } else {
        "interior"
    }
}

pub fn sweep(ctx: &Ctx, kind: SweepKind) -> CliResult<u8> {
    let s = &ctx.scenario;
    match kind {
        SweepKind::Garbling => {
            let n = ctx.points(ctx.config.eps_n(), 2)?;
            let gamma = ctx.config.gamma;
            let pts = sweep_garbling(s, gamma, &linspace(0.0, 1.0, n)).during("garbling sweep")?;
            let opt = agent_optimal_eps(s, gamma, &pts).during("agent-optimal garbling")?;
            let v_con = solve_concealed(s).during("concealed equilibrium")?.agent_utility;
            eprintln!(
                "eps*={} (grid eps={}) V_garb(eps*)={} V_con={} {}",
                opt.eps,
                opt.grid_eps,
                opt.v,
                v_con,
                position(opt.grid_index, n)
            );
            ctx.sink.emit("sweep-garbling", &pts).or_config()?;
        }
        SweepKind::Restriction => {
            let n = ctx.points(ctx.config.r_n(), 2)?;
            let pts = sweep_restriction(s, n).during("restriction sweep")?;
            let (i, best) = pts
                .iter()
                .enumerate()
                .fold((0, &pts[0]), |acc, (i, p)| if p.v_const > acc.1.v_const { (i, p) } else { acc });
            eprintln!(
                "r*={} V_const(r*)={} r_max={} {}",
                best.r,
                best.v_const,
                pts[n - 1].r,
                position(i, n)
            );
            ctx.sink.emit("sweep-restriction", &pts).or_config()?;
        }
        SweepKind::Trajectories => {
            let n = ctx.points(ctx.config.eps_n(), TRAJECTORY_MIN_POINTS)?;
            let (g, r) = build_trajectories(s, &ctx.scenario_id, n).during("trajectory construction")?;
            for t in [&g, &r] {
                let top = t.max_v().expect("trajectories are non-empty");
                eprintln!(
                    "{:?}: max V={} at param={} welfare excess={} principal shortfall={}",
                    t.kind,
                    top.v,
                    top.param,
                    t.welfare_excess(),
                    t.principal_shortfall()
                );
            }
            #[derive(Serialize)]
            struct Extra<'a> {
                anchors: &'a contract_lab::welfare::Anchors,
            }
            let rows: Vec<_> = g.rows().into_iter().chain(r.rows()).collect();
            ctx.sink
                .emit_with("sweep-trajectories", &rows, Extra { anchors: &g.anchors })
                .or_config()?;
        }
    }
    Ok(0)
}

/// Sign changes along `λ_0` for each fixed `λ_1`; `values` is row-major over `λ_0` then `λ_1`.
fn report_sign_changes(l0: &[f64], l1: &[f64], values: &[f64]) {
    for (j, lam1) in l1.iter().enumerate() {
        let column: Vec<f64> = (0..l0.len()).map(|i| values[i * l1.len() + j]).collect();
        eprintln!("lambda1={lam1}: {} sign change(s)", sign_changes(&column));
    }
}

pub fn grid(ctx: &Ctx, kind: GridKind) -> CliResult<u8> {
    let (l0, l1) = ctx.config.lambda_axes(ctx.grid_n);
    let (b, theta) = (ctx.config.b, ctx.config.theta);
    eprintln!("grid: {}x{} exponential cells (f0/f1 of the config are not used)", l0.len(), l1.len());
    match kind {
        GridKind::Revelation => {
            let recs = grid_revelation_preference(b, theta, &l0, &l1).during("revelation grid")?;
            let v: Vec<f64> = recs.iter().map(|r| r.v_rev_minus_v_con).collect();
            report_sign_changes(&l0, &l1, &v);
            ctx.sink.emit("grid-revelation", &recs).or_config()?;
        }
        GridKind::GarblingPrime => {
            if ctx.config.gamma != 0.5 {
                eprintln!("note: the garbling_prime grid always uses gamma=0.5");
            }
            let recs = grid_vgarb_prime_at_one(b, theta, &l0, &l1).during("garbling slope grid")?;
            let v: Vec<f64> = recs.iter().map(|r| r.vgarb_prime_at_one).collect();
            report_sign_changes(&l0, &l1, &v);
            ctx.sink.emit("grid-garbling_prime", &recs).or_config()?;
        }
    }
    Ok(0)
}

fn renamed(mut r: ConditionReport, name: &str) -> ConditionReport {
    r.name = name.to_string();
    r
}

/// Verdicts are data: a check that cannot be evaluated becomes a not-applicable row.
fn row(name: &str, r: contract_lab::Result<ConditionReport>) -> ConditionReport {
    r.map(|r| renamed(r, name))
        .unwrap_or_else(|e| ConditionReport::not_applicable(name, &e.to_string()))
}

pub fn check_conditions(ctx: &Ctx) -> CliResult<u8> {
    let s = &ctx.scenario;
    let n = ctx.points(ctx.config.r_n(), 2)?;
    let reports = vec![
        row("mlrp", check_mlrp(&s.f0, &s.f1, DEFAULT_GRID)),
        renamed(check_concavity(&s.f0, s.b, DEFAULT_GRID), "concavity_f0"),
        renamed(check_concavity(&s.f1, s.b, DEFAULT_GRID), "concavity_f1"),
        renamed(check_drc(s, None), "drc"),
        row("prop1", check_prop1(s)),
        row("prop2", check_prop2(s)),
        row("prop3", check_prop3(s)),
        row("garbling_zerocost", check_garbling_zerocost(s)),
        row("garbling_general", check_garbling_general(s)),
        row("quantity_lemma", check_quantity_lemma(s)),
        row("quasiconvexity", sweep_restriction(s, n).map(|p| check_quasiconvexity(&p))),
    ];
    for r in &reports {
        eprintln!(
            "{:<18} holds={:<5} preconditions={:<5} margin={}",
            r.name, r.holds, r.preconditions_hold, r.margin
        );
    }
    ctx.sink.emit("check-conditions", &reports).or_config()?;
    Ok(0)
}

pub fn verify(sink: &Sink) -> CliResult<u8> {
    let report = run_verification();
    for i in &report.invariants {
        eprintln!(
            "{} {} (checked {}, skipped {}, worst margin {}){}",
            if i.passed { "PASS" } else { "FAIL" },
            i.name,
            i.checked,
            i.skipped,
            i.worst_margin,
            if i.passed { String::new() } else { format!(": {}", i.detail) }
        );
    }
    let failed = report.failures().count();
    eprintln!(
        "verify: {} of {} invariants passed over {} scenarios",
        report.invariants.len() - failed,
        report.invariants.len(),
        report.scenarios.len()
    );
    sink.emit("verify", &report.invariants).or_config()?;
    Ok(if report.all_passed() { 0 } else { VERIFY_FAILED })
}

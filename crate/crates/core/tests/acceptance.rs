//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release -p qmetro --test acceptance -- 1 5 8` runs a subset.
//! Criteria listed in `KNOWN_FAILING` are reported as `FAIL (known)` without
//! failing the run; any other failure exits non-zero.

mod common;

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use qmetro::analysis::{
    default_theta_grid, find_maxima, find_minima, fit, sweep_continuous, sweep_theta, time_to_tfs, uniform_grid,
    Extremum, FitModel, SweepColumns, SweepRecord, TFS_TOLERANCE,
};
use qmetro::circuits::{layer_width, AnsatzParams};
use qmetro::metrology::{bounds, qfi_variance_oracle, HomodyneGrid, MeasurementModel};
use qmetro::optimize::{
    ablation_premeasure, optimize_measurement, optimize_preparation, OptBatch, OptimizerConfig, PremeasureAblation,
    ProbeSchedule,
};
use qmetro::{Nonlinearity, Protocol, ProtocolSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose failure is analysed in the project notes and not tuned away.
const KNOWN_FAILING: &[usize] = &[3, 7, 10, 12, 13];

const N_SERIES: [f64; 5] = [4.0, 8.0, 12.0, 16.0, 20.0];
const HOMODYNE_POINTS: usize = 201;
const JC_DEPTH: usize = 8;
const KERR_DEPTH: usize = 6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn protocol(kind: Nonlinearity, n: f64) -> Protocol {
    Protocol::new(ProtocolSettings::new(kind, n)).expect("valid protocol")
}

fn search(d_max: usize) -> OptimizerConfig {
    OptimizerConfig { d_max, ..OptimizerConfig::default() }
}

/// Angular distance modulo `pi`.
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn best_prep_probes(protocol: &Protocol, batch: &OptBatch) -> ProbeSchedule {
    let probes = batch
        .depths()
        .into_iter()
        .map(|d| protocol.programmable_probe(&batch.best_at(d).expect("depth present").params().unwrap()).unwrap())
        .collect();
    ProbeSchedule::PerDepth(probes)
}

/// Expensive results shared between criteria.
#[derive(Default)]
struct Lab {
    jc_sweeps: OnceCell<BTreeMap<u32, Vec<SweepRecord>>>,
    jc20_full: OnceCell<Vec<SweepRecord>>,
    jc_prep: OnceCell<BTreeMap<u32, OptBatch>>,
    kerr_prep: OnceCell<BTreeMap<u32, OptBatch>>,
    kerr20_prep: OnceCell<OptBatch>,
    kerr20_counting: OnceCell<OptBatch>,
    kerr20_homodyne: OnceCell<Vec<PremeasureAblation>>,
}

impl Lab {
    fn jc_sweeps(&self) -> &BTreeMap<u32, Vec<SweepRecord>> {
        self.jc_sweeps.get_or_init(|| {
            let grid = uniform_grid(0.0, 10.0, 0.1).unwrap();
            N_SERIES
                .iter()
                .map(|&n| (n as u32, sweep_continuous(&protocol(Nonlinearity::Jc, n), &grid, &SweepColumns::default()).unwrap()))
                .collect()
        })
    }

    fn jc_first_minimum(&self, n: u32) -> Option<Extremum> {
        find_minima(&self.jc_sweeps()[&n]).first().copied()
    }

    fn jc20_full(&self) -> &[SweepRecord] {
        self.jc20_full.get_or_init(|| {
            let grid = uniform_grid(0.0, 30.0, 0.1).unwrap();
            sweep_continuous(&protocol(Nonlinearity::Jc, 20.0), &grid, &SweepColumns::default()).unwrap()
        })
    }

    fn jc_prep(&self) -> &BTreeMap<u32, OptBatch> {
        self.jc_prep.get_or_init(|| {
            N_SERIES
                .iter()
                .map(|&n| (n as u32, optimize_preparation(&protocol(Nonlinearity::Jc, n), &search(JC_DEPTH)).unwrap()))
                .collect()
        })
    }

    fn kerr20_prep(&self) -> &OptBatch {
        self.kerr20_prep
            .get_or_init(|| optimize_preparation(&protocol(Nonlinearity::Kerr, 20.0), &search(KERR_DEPTH)).unwrap())
    }

    fn kerr_prep(&self) -> &BTreeMap<u32, OptBatch> {
        self.kerr_prep.get_or_init(|| {
            N_SERIES
                .iter()
                .map(|&n| {
                    let batch = match n as u32 {
                        20 => self.kerr20_prep().clone(),
                        _ => optimize_preparation(&protocol(Nonlinearity::Kerr, n), &search(4)).unwrap(),
                    };
                    (n as u32, batch)
                })
                .collect()
        })
    }

    fn kerr20_counting(&self) -> &OptBatch {
        self.kerr20_counting.get_or_init(|| {
            let p = protocol(Nonlinearity::Kerr, 20.0);
            let probes = best_prep_probes(&p, self.kerr20_prep());
            let model = MeasurementModel::counting(p.include_emitters());
            optimize_measurement(&p, &probes, &model, &search(KERR_DEPTH)).unwrap()
        })
    }

    fn kerr20_homodyne(&self) -> &[PremeasureAblation] {
        self.kerr20_homodyne.get_or_init(|| {
            let p = protocol(Nonlinearity::Kerr, 20.0);
            let probes = best_prep_probes(&p, self.kerr20_prep());
            let grid = HomodyneGrid::with_points(p.settings().cutoff, HOMODYNE_POINTS);
            let model = MeasurementModel::homodyne(0.0, grid, p.include_emitters());
            ablation_premeasure(&p, &probes, &model, &search(KERR_DEPTH)).unwrap()
        })
    }
}

fn bounds_table(_: &Lab) -> Outcome {
    let b = bounds(20.0).unwrap();
    let pass = b.sql_inv_fi == 0.05 && b.tfs_inv_fi == 2.0 / (20.0 * 22.0) && b.hl_inv_fi == 2.5e-3;
    outcome(pass, format!("SQL {:.6e} TFS {:.6e} HL {:.6e}", b.sql_inv_fi, b.tfs_inv_fi, b.hl_inv_fi))
}

fn oracle_equivalence(_: &Lab) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let kind = if i % 2 == 0 { Nonlinearity::Kerr } else { Nonlinearity::Jc };
        let n = rng.random_range(2..=20) as f64;
        let p = Protocol::new(ProtocolSettings::new(kind, n).with_cutoff(40)).unwrap();
        let values: Vec<f64> = (0..2 * layer_width(kind)).map(|_| rng.random_range(-1.5..1.5)).collect();
        let probe = p.programmable_probe(&AnsatzParams::from_flat(kind, values).unwrap()).unwrap();
        let fidelity = p.qfi(&probe).unwrap().value;
        let oracle = qfi_variance_oracle(&probe, p.settings().phi).unwrap().value;
        worst = worst.max((fidelity - oracle).abs() / fidelity);
    }
    outcome(worst <= 1e-3, format!("worst relative gap {worst:.3e} over 20 probes"))
}

fn jc_sweep_minima(lab: &Lab) -> Outcome {
    let minima = find_minima(lab.jc20_full());
    let tfs = bounds(20.0).unwrap().tfs_inv_fi;
    let expected = [5.0, 16.0, 26.0];
    let located = minima.len() == 3 && minima.iter().zip(expected).all(|(m, g)| (m.time - g).abs() <= 0.1 * g);
    let first = minima.first().map(|m| m.value / tfs).unwrap_or(f64::INFINITY);
    let times: Vec<String> = minima.iter().map(|m| format!("{:.2}", m.time)).collect();
    outcome(located && first <= 1.05, format!("minima at [{}], first 1/F_Q = {first:.3} TFS", times.join(", ")))
}

fn jc_sqrt_law(lab: &Lab) -> Outcome {
    let mut ns = Vec::new();
    let mut gs = Vec::new();
    for n in N_SERIES {
        if let Some(m) = lab.jc_first_minimum(n as u32) {
            ns.push(n);
            gs.push(m.time);
        }
    }
    if ns.len() < N_SERIES.len() {
        return outcome(false, format!("first minimum found for only {} values of N", ns.len()));
    }
    let r2 = fit(FitModel::Sqrt, &ns, &gs).map(|f| f.r_squared).unwrap_or(0.0);
    let shown: Vec<String> = gs.iter().map(|g| format!("{g:.3}")).collect();
    outcome(r2 >= 0.98, format!("g_min [{}], r2 {r2:.4}", shown.join(", ")))
}

fn kerr_revivals(_: &Lab) -> Outcome {
    let step = PI / 200.0;
    let grid: Vec<f64> = (0..=420).map(|i| step * i as f64).collect();
    let mut pass = true;
    let mut worst_value: f64 = 0.0;
    let mut worst_location: f64 = 0.0;
    for n in [8.0, 20.0] {
        let p = protocol(Nonlinearity::Kerr, n);
        let records = sweep_continuous(&p, &grid, &SweepColumns::default()).unwrap();
        let maxima = find_maxima(&records);
        for k in 1..=4 {
            let t = k as f64 * PI / 2.0;
            let value = p.qfi(&p.continuous_probe(t).unwrap()).unwrap().inverse();
            let rel = (value * n - 1.0).abs();
            let gap = maxima.iter().map(|m| (m.time - t).abs()).fold(f64::INFINITY, f64::min);
            worst_value = worst_value.max(rel);
            worst_location = worst_location.max(gap);
            pass &= rel <= 0.05 && gap <= step;
        }
    }
    outcome(pass, format!("worst |N/F_Q - 1| {worst_value:.3e}, worst revival offset {worst_location:.3e}"))
}

fn kerr_plateau(_: &Lab) -> Outcome {
    let p = protocol(Nonlinearity::Kerr, 20.0);
    let tfs = p.bounds().tfs_inv_fi;
    let ratios: Vec<f64> = [PI / 3.0, PI / 4.0]
        .iter()
        .map(|&t| p.qfi(&p.continuous_probe(t).unwrap()).unwrap().inverse() / tfs)
        .collect();
    outcome(ratios.iter().all(|&r| r <= 1.1), format!("1/F_Q at pi/3, pi/4 = {:.4}, {:.4} TFS", ratios[0], ratios[1]))
}

fn kerr_tfs_scaling(_: &Lab) -> Outcome {
    let ns: Vec<f64> = (4..=20).map(f64::from).collect();
    let times: Vec<f64> = ns
        .iter()
        .map(|&n| time_to_tfs(&protocol(Nonlinearity::Kerr, n), PI / 2.0, PI / 200.0, TFS_TOLERANCE).unwrap_or(f64::NAN))
        .collect();
    let decreasing = times.iter().all(|t| t.is_finite()) && times.windows(2).all(|w| w[1] < w[0]);
    let slope = fit(FitModel::Powerlaw, &ns[6..], &times[6..]).map(|f| f.coefficients[1]).unwrap_or(f64::NAN);
    let pass = decreasing && (slope + 0.31).abs() <= 0.10;
    outcome(pass, format!("strictly decreasing {decreasing}, log-log slope over N=10..20 {slope:.3}"))
}

fn seeds_monotone(batch: &OptBatch) -> bool {
    let mut seeds: Vec<u64> = batch.records.iter().map(|r| r.seed).collect();
    seeds.dedup();
    seeds
        .into_iter()
        .all(|s| batch.seed_records(s).windows(2).all(|w| w[1].best_objective <= w[0].best_objective))
}

fn programmable_kerr(lab: &Lab) -> Outcome {
    let batch = lab.kerr20_prep();
    let hl = bounds(20.0).unwrap().hl_inv_fi;
    let d4 = batch.best_at(4).map(|r| r.inv_fisher).unwrap_or(f64::INFINITY);
    let monotone = seeds_monotone(batch);

    let start = Instant::now();
    let fast = optimize_preparation(&protocol(Nonlinearity::Kerr, 10.0), &search(4)).unwrap();
    let fast_secs = start.elapsed().as_secs_f64();
    let fast_d4 = fast.best_at(4).map(|r| r.inv_fisher * 100.0).unwrap_or(f64::INFINITY);

    let pass = d4 <= 1.2 * hl && monotone && fast_d4 <= 1.25 && fast_secs <= 1800.0;
    outcome(
        pass,
        format!(
            "N=20 d=4 1/F_Q {:.3} HL, per-seed monotone {monotone}; N=10 d=4 {fast_d4:.3}/N^2 in {fast_secs:.0} s",
            d4 / hl
        ),
    )
}

fn programmable_jc(lab: &Lab) -> Outcome {
    let batch = &lab.jc_prep()[&20];
    let tfs = bounds(20.0).unwrap().tfs_inv_fi;
    let best = batch.records.iter().filter(|r| r.d >= 4).map(|r| r.inv_fisher).fold(f64::INFINITY, f64::min);
    outcome(best < tfs, format!("best d>=4 1/F_Q {best:.4e} ({:.3} TFS)", best / tfs))
}

fn interaction_budgets(lab: &Lab) -> Outcome {
    let jc = lab.jc_prep();
    let mut agree = true;
    let mut ratios = Vec::new();
    let mut budgets = [Vec::new(), Vec::new()];
    for batch in jc.values() {
        let pair = [2, JC_DEPTH].map(|d| batch.best_at(d).map(|r| r.budget).unwrap_or(f64::NAN));
        let ratio = pair[0].max(pair[1]) / pair[0].min(pair[1]);
        agree &= ratio <= 1.5;
        ratios.push(format!("{ratio:.2}"));
        budgets[0].push(pair[0]);
        budgets[1].push(pair[1]);
    }
    let roots: Vec<f64> = N_SERIES.iter().map(|n| n.sqrt()).collect();
    let r2: Vec<f64> = budgets.iter().map(|b| fit(FitModel::Linear, &roots, b).map(|f| f.r_squared).unwrap_or(0.0)).collect();
    let sqrt_law = r2.iter().all(|&r| r >= 0.9);

    let kerr: Vec<f64> = lab.kerr_prep().values().map(|b| b.best_at(4).map(|r| r.budget).unwrap_or(f64::NAN)).collect();
    let kerr_slope = fit(FitModel::Linear, &N_SERIES, &kerr).map(|f| f.coefficients[1]).unwrap_or(f64::NAN);
    let kerr_decreasing = kerr_slope < 0.0;

    outcome(
        agree && sqrt_law && kerr_decreasing,
        format!(
            "JC d8/d2 budget ratios [{}], sqrt(N) r2 d2 {:.3} d8 {:.3}; Kerr d4 budget slope {kerr_slope:.3e}",
            ratios.join(", "),
            r2[0],
            r2[1]
        ),
    )
}

fn measurement(lab: &Lab) -> Outcome {
    let p = protocol(Nonlinearity::Kerr, 20.0);
    let tfs = p.bounds().tfs_inv_fi;
    let grid = uniform_grid(0.0, PI, PI / 200.0).unwrap();
    let columns = SweepColumns { counting: true, homodyne: None };
    let continuous = sweep_continuous(&p, &grid, &columns)
        .unwrap()
        .iter()
        .filter_map(|r| r.inv_cfi_counting)
        .fold(f64::INFINITY, f64::min);
    let continuous_ok = (continuous / tfs - 1.0).abs() <= 0.05;

    let counting = lab
        .kerr20_counting()
        .records
        .iter()
        .filter(|r| r.d >= 3)
        .map(|r| r.inv_fisher)
        .fold(f64::INFINITY, f64::min);
    let homodyne = lab.kerr20_homodyne().iter().filter(|a| a.d >= 3).map(|a| a.with_pqc).fold(f64::INFINITY, f64::min);
    let pass = continuous_ok && counting < tfs && homodyne < tfs && homodyne >= counting;
    outcome(
        pass,
        format!(
            "continuous counting {:.4} TFS; PQC d>=3 counting {:.4} TFS, homodyne {:.4} TFS",
            continuous / tfs,
            counting / tfs,
            homodyne / tfs
        ),
    )
}

fn theta_sweep(lab: &Lab) -> Outcome {
    let thetas = default_theta_grid(100);
    let mut minima = Vec::new();
    for n in [8.0, 12.0, 16.0, 20.0] {
        let jc = protocol(Nonlinearity::Jc, n);
        let g = lab.jc_first_minimum(n as u32).map(|m| m.time).unwrap_or(5.0);
        let jc_min = sweep_theta(&jc, g, &thetas, HomodyneGrid::with_points(jc.settings().cutoff, HOMODYNE_POINTS)).unwrap().theta_min;
        let kerr = protocol(Nonlinearity::Kerr, n);
        let kerr_min =
            sweep_theta(&kerr, PI / 4.0, &thetas, HomodyneGrid::with_points(kerr.settings().cutoff, HOMODYNE_POINTS)).unwrap().theta_min;
        minima.push((jc_min, kerr_min));
    }
    let (jc20, kerr20) = minima[3];
    let located = angle_gap(jc20, 2.0 * PI / 3.0) <= 0.1 && angle_gap(kerr20, 0.17 * PI) <= 0.05 * PI;
    let stable = minima.iter().all(|&(j, k)| angle_gap(j, jc20) <= 0.1 && angle_gap(k, kerr20) <= 0.05 * PI);
    let shown: Vec<String> = minima.iter().map(|(j, k)| format!("({:.3}pi, {:.3}pi)", j / PI, k / PI)).collect();
    outcome(located && stable, format!("(JC, Kerr) theta_min for N=8,12,16,20: {}", shown.join(" ")))
}

fn premeasure_ablation(lab: &Lab) -> Outcome {
    let rows = lab.kerr20_homodyne();
    let sql = bounds(20.0).unwrap().sql_inv_fi;
    let ordered = rows.iter().all(|a| a.without_pqc >= a.with_pqc);
    let last = rows.iter().find(|a| a.d == 6).map(|a| a.without_pqc / sql).unwrap_or(f64::NAN);
    let without: Vec<String> = rows.iter().map(|a| format!("{:.3}", a.without_pqc / sql)).collect();
    outcome(
        ordered && (last - 1.0).abs() <= 0.2,
        format!("without >= with at every d {ordered}; without/SQL for d=1..6 [{}]", without.join(", ")),
    )
}

fn property_suite(_: &Lab) -> Outcome {
    let mut failures = Vec::new();
    for (name, check, cases) in common::PROPERTIES {
        if let Err(e) = check((*cases).max(100)) {
            failures.push(format!("{name}: {e}"));
        }
    }
    if let Err(e) = common::initial_states_are_normalized() {
        failures.push(format!("initial_states_are_normalized: {e}"));
    }
    let detail = match failures.is_empty() {
        true => format!("{} properties, >=100 cases each", common::PROPERTIES.len() + 1),
        false => failures.join("; "),
    };
    outcome(failures.is_empty(), detail)
}

type Criterion = fn(&Lab) -> Outcome;

const CRITERIA: [(usize, &str, Criterion); 14] = [
    (1, "bounds table", bounds_table),
    (2, "oracle equivalence", oracle_equivalence),
    (3, "JC continuous minima", jc_sweep_minima),
    (4, "JC sqrt(N) law", jc_sqrt_law),
    (5, "Kerr revivals", kerr_revivals),
    (6, "Kerr cat plateau", kerr_plateau),
    (7, "Kerr time-to-TFS scaling", kerr_tfs_scaling),
    (8, "programmable Kerr", programmable_kerr),
    (9, "programmable JC", programmable_jc),
    (10, "interaction budgets", interaction_budgets),
    (11, "measurement", measurement),
    (12, "quadrature angle sweep", theta_sweep),
    (13, "pre-measurement ablation", premeasure_ablation),
    (14, "property suite", property_suite),
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let lab = Lab::default();
    let mut unexpected = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run(&lab);
        let status = match (result.pass, KNOWN_FAILING.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {id:>2} {status}: {name}: {} [{:.1} s]", result.detail, start.elapsed().as_secs_f64());
    }
    match unexpected {
        0 => ExitCode::SUCCESS,
        _ => ExitCode::FAILURE,
    }
}

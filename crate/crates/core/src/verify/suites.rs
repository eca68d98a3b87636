//! Named verification checks, one function per claim, grouped into suites.
//!
//! Every randomized check takes its own seed; sample `j` of a check seeded
//! with `s` uses `RandomStream::derived(s, j)` (and the matching coin
//! stream), so results do not depend on thread scheduling.

use std::str::FromStr;

use rayon::prelude::*;

use super::{
    chi_square_critical, chi_square_gof, exact_ising_distribution, local_correctness_check,
    mean_check, stationary_of_chain, truncation_bound_check, CheckRecord, Family, IdentityGrid,
    ProbabilityTable, VerificationReport, CHI_SQUARE_ALPHA, SIGMA_BAND,
};
use crate::ar::{die_five_record, die_kernel, FiniteMeasure};
use crate::cftp::{
    cftp_doubling, cftp_single, exhaustive_detector, monotone_detector, Coalescence,
    ExhaustiveDetector, Graph, IsingModel, MonotoneDetector, ReflectingWalk, ResetWalk, Spins,
    UpdateFunction,
};
use crate::engine::{RunLimits, DEFAULT_MAX_DOUBLINGS};
use crate::error::{Result, SimError};
use crate::factory::{exp_factory, linear_factory, von_neumann};
use crate::randomness::{CoinSource, RandomStream};

/// Upper bound on mean coin flips of the linear factory, in units of `C / eps`.
pub const LINEAR_FLIP_BOUND: f64 = 9.5;
/// Relative tolerance on mean proposal and round counts.
pub const MEAN_COUNT_TOLERANCE: f64 = 0.05;

/// Transition matrix of [`ReflectingWalk`], written out by hand.
pub const REFLECTING_MATRIX: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 3.0, 0.0],
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.0, 1.0 / 3.0, 2.0 / 3.0],
];

/// Transition matrix of [`ResetWalk`], written out by hand.
pub const RESET_MATRIX: [[f64; 3]; 3] = [[0.6, 0.4, 0.0], [0.6, 0.0, 0.4], [0.2, 0.4, 0.4]];

fn matrix(rows: &[[f64; 3]; 3]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

fn par_samples<T: Send>(n: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

fn coin(p: f64, seed: u64, index: u64) -> Result<CoinSource> {
    CoinSource::new(p, RandomStream::derived_for_coin(seed, index))
}

fn chi_square_check(
    name: impl Into<String>,
    counts: &[u64],
    table: &ProbabilityTable,
    seed: u64,
) -> Result<CheckRecord> {
    let r = chi_square_gof(counts, table)?;
    let df = r.df.max(1);
    Ok(CheckRecord::at_most(
        name,
        r.statistic,
        chi_square_critical(df, CHI_SQUARE_ALPHA),
        counts.iter().sum(),
        Some(seed),
    ))
}

fn relative_check(
    name: impl Into<String>,
    observed: f64,
    target: f64,
    n: u64,
    seed: u64,
) -> CheckRecord {
    CheckRecord::at_most(
        name,
        (observed / target - 1.0).abs(),
        MEAN_COUNT_TOLERANCE,
        n,
        Some(seed),
    )
}

/// Five-sided die: faces uniform, mean proposals 6/5.
pub fn ar_die(seed: u64, n: u64) -> Result<Vec<CheckRecord>> {
    let records = par_samples(n, |i| die_five_record(&mut RandomStream::derived(seed, i)))?;
    let table = ProbabilityTable::uniform(["1", "2", "3", "4", "5"])?;
    let counts = table.counts(records.iter().map(|r| r.value.to_string()))?;
    let proposals = records.iter().map(|r| r.depth + 1).sum::<u64>() as f64 / n as f64;
    Ok(vec![
        chi_square_check("ar/die/chi_square", &counts, &table, seed)?,
        relative_check("ar/die/mean_proposals", proposals, 1.2, n, seed),
    ])
}

/// General rejection on random finite measures: output frequencies match
/// `nu(. | A)` cell by cell. The statistic is the largest per-cell `|z|`.
pub fn ar_conditional(seed: u64, measures: u64, n: u64) -> Result<Vec<CheckRecord>> {
    let mut gen = RandomStream::from_seed(seed);
    let mut out = Vec::new();
    for m in 0..measures {
        let cells = 3 + gen.index(6);
        let weights: Vec<f64> = (0..cells).map(|_| 0.05 + gen.uniform01()).collect();
        let mut accept: Vec<bool> = (0..cells)
            .map(|_| gen.bernoulli(0.6).unwrap_or(true))
            .collect();
        if !accept.iter().any(|&a| a) {
            accept[gen.index(cells)] = true;
        }
        let total: f64 = weights.iter().sum();
        let labels: Vec<String> = (0..cells).map(|k| format!("v{k}")).collect();
        let measure = FiniteMeasure::new(
            labels
                .iter()
                .cloned()
                .zip(weights.iter().map(|w| w / total))
                .collect(),
        )?;
        let accept_set: Vec<String> = labels
            .iter()
            .zip(&accept)
            .filter(|(_, a)| **a)
            .map(|(l, _)| l.clone())
            .collect();

        // Oracle: normalize the accepted weights directly.
        let accepted_total: f64 = weights
            .iter()
            .zip(&accept)
            .filter(|(_, a)| **a)
            .map(|(w, _)| w)
            .sum();
        let conditional: Vec<f64> = weights
            .iter()
            .zip(&accept)
            .map(|(w, a)| if *a { w / accepted_total } else { 0.0 })
            .collect();

        let check_seed = seed.wrapping_add((m + 1) << 32);
        let draws = par_samples(n, |i| {
            let mut kernel = measure.conditioned_on(&accept_set)?;
            crate::ar::ar_sample(
                &mut kernel,
                &mut RandomStream::derived(check_seed, i),
                RunLimits::default(),
            )
        })?;
        let mut counts = vec![0u64; cells];
        for r in &draws {
            counts[r.value] += 1;
        }
        let worst = counts
            .iter()
            .zip(&conditional)
            .map(|(&c, &q)| {
                let freq = c as f64 / n as f64;
                if q == 0.0 {
                    if c == 0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else if q == 1.0 {
                    if c == n {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (freq - q).abs() / (q * (1.0 - q) / n as f64).sqrt()
                }
            })
            .fold(0.0, f64::max);
        out.push(CheckRecord::at_most(
            format!("ar/conditional/measure={m}/cells={cells}"),
            worst,
            SIGMA_BAND,
            n,
            Some(check_seed),
        ));
    }
    Ok(out)
}

/// Von Neumann: fair output, mean rounds `1 / (2 p (1 - p))`.
pub fn von_neumann_check(seed: u64, p: f64, n: u64) -> Result<Vec<CheckRecord>> {
    let records = par_samples(n, |i| {
        von_neumann(
            coin(p, seed, i)?,
            &mut RandomStream::derived(seed, i),
            RunLimits::default(),
        )
    })?;
    let ones = records.iter().filter(|r| r.value).count() as u64;
    let rounds = records.iter().map(|r| r.depth + 1).sum::<u64>() as f64 / n as f64;
    Ok(vec![
        mean_check(
            format!("factory/von_neumann/p={p}/mean"),
            ones,
            n,
            0.5,
            seed,
        ),
        relative_check(
            format!("factory/von_neumann/p={p}/mean_rounds"),
            rounds,
            1.0 / (2.0 * p * (1.0 - p)),
            n,
            seed,
        ),
    ])
}

/// Exponential factory: mean `exp(-C p)`.
pub fn exp_factory_check(seed: u64, c: f64, p: f64, n: u64) -> Result<CheckRecord> {
    let records = par_samples(n, |i| {
        exp_factory(
            coin(p, seed, i)?,
            c,
            &mut RandomStream::derived(seed, i),
            RunLimits::default(),
        )
    })?;
    let ones = records.iter().filter(|r| r.value).count() as u64;
    Ok(mean_check(
        format!("factory/exp/c={c}/p={p}/mean"),
        ones,
        n,
        (-c * p).exp(),
        seed,
    ))
}

/// Linear factory: mean `C p` and mean flips at most `9.5 C / eps`.
pub fn linear_factory_check(
    seed: u64,
    c: f64,
    eps: f64,
    p: f64,
    n: u64,
) -> Result<Vec<CheckRecord>> {
    let records = par_samples(n, |i| {
        linear_factory(
            coin(p, seed, i)?,
            c,
            eps,
            &mut RandomStream::derived(seed, i),
            RunLimits::default(),
        )
    })?;
    let ones = records.iter().filter(|r| r.value).count() as u64;
    let flips = records.iter().map(|r| r.flips).sum::<u64>() as f64 / n as f64;
    let tag = format!("factory/linear/c={c}/eps={eps}/p={p:.6}");
    Ok(vec![
        mean_check(format!("{tag}/mean"), ones, n, c * p, seed),
        CheckRecord::at_most(
            format!("{tag}/mean_flips"),
            flips,
            LINEAR_FLIP_BOUND * c / eps,
            n,
            Some(seed),
        ),
    ])
}

/// Doubling CFTP on the reflecting walk against the linear-solve oracle.
pub fn cftp_reflecting(seed: u64, n: u64) -> Result<CheckRecord> {
    let table = stationary_of_chain(&matrix(&REFLECTING_MATRIX))?;
    let records = par_samples(n, |i| {
        cftp_doubling(
            &ReflectingWalk,
            &ExhaustiveDetector,
            2,
            &mut RandomStream::derived(seed, i),
            DEFAULT_MAX_DOUBLINGS,
        )
    })?;
    let counts = table.counts(records.iter().map(|r| r.value.to_string()))?;
    chi_square_check("cftp/reflecting/doubling/chi_square", &counts, &table, seed)
}

/// Single-step CFTP on the reset walk against the linear-solve oracle.
pub fn cftp_reset(seed: u64, n: u64) -> Result<CheckRecord> {
    let table = stationary_of_chain(&matrix(&RESET_MATRIX))?;
    let records = par_samples(n, |i| {
        cftp_single(
            &ResetWalk,
            &ExhaustiveDetector,
            &mut RandomStream::derived(seed, i),
            RunLimits::default(),
        )
    })?;
    let counts = table.counts(records.iter().map(|r| r.value.to_string()))?;
    chi_square_check("cftp/reset_walk/single/chi_square", &counts, &table, seed)
}

fn magnetization_key(label: &str) -> String {
    let m: i64 = label.chars().map(|ch| if ch == '+' { 1 } else { -1 }).sum();
    m.to_string()
}

/// Monotone doubling CFTP on a `width x height` Ising grid against exact
/// enumeration. Bins by full state when every expected count is at least
/// five, otherwise by magnetization.
pub fn cftp_ising(
    seed: u64,
    width: usize,
    height: usize,
    beta: f64,
    n: u64,
) -> Result<CheckRecord> {
    let model = IsingModel::new(Graph::grid(width, height), beta)?;
    let exact = exact_ising_distribution(model.graph(), beta)?;
    let detector = MonotoneDetector::for_update(&model);
    let t0 = (width * height) as u64;
    let records = par_samples(n, |i| {
        cftp_doubling(
            &model,
            &detector,
            t0,
            &mut RandomStream::derived(seed, i),
            DEFAULT_MAX_DOUBLINGS,
        )
    })?;
    let labels = records.iter().map(|r| r.value.to_string());
    let name = format!("cftp/ising/{width}x{height}/beta={beta}");
    if n as f64 * exact.min_probability() >= 5.0 {
        let counts = exact.counts(labels)?;
        chi_square_check(format!("{name}/states/chi_square"), &counts, &exact, seed)
    } else {
        let binned = exact.coarsen(magnetization_key);
        let counts = binned.counts(labels.map(|l| magnetization_key(&l)))?;
        chi_square_check(
            format!("{name}/magnetization/chi_square"),
            &counts,
            &binned,
            seed,
        )
    }
}

/// Index drawn from `table` by inversion.
fn draw_from(table: &ProbabilityTable, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in table.probabilities().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    table.len() - 1
}

/// Draw `X` from the exact law, apply one update with fresh uniforms and
/// compare the result with the same law.
fn stationarity<U: UpdateFunction + Sync>(
    name: &str,
    update: &U,
    table: &ProbabilityTable,
    parse: impl Fn(&str) -> U::State + Sync + Send,
    encode: impl Fn(&U::State) -> String + Sync + Send,
    seed: u64,
    n: u64,
) -> Result<CheckRecord> {
    let labels = par_samples(n, |i| {
        let mut s = RandomStream::derived(seed, i);
        let x = parse(&table.labels()[draw_from(table, s.uniform01())]);
        let u = s.uniforms(update.draws_per_step());
        Ok(encode(&update.step(&x, &u)))
    })?;
    let counts = table.counts(labels)?;
    chi_square_check(format!("cftp/stationarity/{name}"), &counts, table, seed)
}

fn parse_spins(label: &str) -> Spins {
    Spins::new(
        label
            .chars()
            .map(|c| if c == '+' { 1 } else { -1 })
            .collect(),
    )
    .expect("oracle labels are +/-")
}

fn parse_small(label: &str) -> u8 {
    label.parse().expect("oracle labels are integers")
}

/// One update from the exact law stays in the exact law, for every update
/// function in the crate.
pub fn stationarity_checks(seed: u64, n: u64) -> Result<Vec<CheckRecord>> {
    let ising = IsingModel::new(Graph::grid(2, 2), 0.4)?;
    let ising_table = exact_ising_distribution(ising.graph(), 0.4)?;
    Ok(vec![
        stationarity(
            "reflecting",
            &ReflectingWalk,
            &stationary_of_chain(&matrix(&REFLECTING_MATRIX))?,
            parse_small,
            u8::to_string,
            seed,
            n,
        )?,
        stationarity(
            "reset_walk",
            &ResetWalk,
            &stationary_of_chain(&matrix(&RESET_MATRIX))?,
            parse_small,
            u8::to_string,
            seed.wrapping_add(1 << 32),
            n,
        )?,
        stationarity(
            "ising_2x2_beta_0.4",
            &ising,
            &ising_table,
            parse_spins,
            Spins::to_string,
            seed.wrapping_add(2 << 32),
            n,
        )?,
    ])
}

/// Truncation sandwich on the die kernel at caps 1..=5.
pub fn truncation_die(seed: u64, n: u64) -> Result<VerificationReport> {
    let target = ProbabilityTable::uniform(["1", "2", "3", "4", "5"])?;
    truncation_bound_check(&mut die_kernel(), (), &target, &[1, 2, 3, 4, 5], n, seed)
}

pub fn local_correctness_all() -> VerificationReport {
    let grid = IdentityGrid::default();
    let mut report = VerificationReport::default();
    for family in Family::ALL {
        report.extend(local_correctness_check(family, &grid));
    }
    report
}

/// Random ordered pairs `x <= y` on the 3x3 grid stay ordered under one
/// coupled heat-bath update. The statistic is the number of violations.
pub fn monotonicity(seed: u64, pairs: u64) -> Result<CheckRecord> {
    let betas = [0.0, 0.2, 0.4, 1.0, 3.0];
    let models: Vec<IsingModel> = betas
        .iter()
        .map(|&b| IsingModel::new(Graph::grid(3, 3), b))
        .collect::<Result<_>>()?;
    let violations = par_samples(pairs, |i| {
        let mut s = RandomStream::derived(seed, i);
        let model = &models[i as usize % models.len()];
        let lo: Vec<i8> = (0..9)
            .map(|_| if s.uniform01() < 0.5 { 1 } else { -1 })
            .collect();
        let hi: Vec<i8> = lo
            .iter()
            .map(|&x| if x < 0 && s.uniform01() < 0.5 { 1 } else { x })
            .collect();
        let (lo, hi) = (Spins::new(lo)?, Spins::new(hi)?);
        debug_assert!(lo.le(&hi));
        let (us, ut) = (s.uniform01(), s.uniform01());
        Ok(!model
            .heat_bath(&lo, us, ut)
            .le(&model.heat_bath(&hi, us, ut)) as u64)
    })?
    .into_iter()
    .sum::<u64>();
    Ok(CheckRecord::at_most(
        "cftp/ising/monotonicity_violations",
        violations as f64,
        0.0,
        pairs,
        Some(seed),
    ))
}

/// On random blocks for the 2x2 grid, whenever the bounding chains meet,
/// exhaustive enumeration agrees on the state. The statistic is the number
/// of disagreements.
pub fn detector_soundness(seed: u64, blocks: u64) -> Result<(CheckRecord, u64)> {
    let model = IsingModel::new(Graph::grid(2, 2), 0.4)?;
    let outcomes = par_samples(blocks, |i| {
        let mut s = RandomStream::derived(seed, i);
        let t = 4 + (i % 13);
        let block = s.uniforms(2 * t as usize);
        let mono = monotone_detector(&model, t, &block, Spins::all(4, -1), Spins::all(4, 1))?;
        let full = exhaustive_detector(&model, t, &block)?;
        let bad = match &mono {
            Coalescence::Coalesced(s) => full != Coalescence::Coalesced(s.clone()),
            Coalescence::NotCoalesced => false,
        };
        Ok((bad as u64, matches!(mono, Coalescence::Coalesced(_)) as u64))
    })?;
    let bad: u64 = outcomes.iter().map(|o| o.0).sum();
    let coalesced: u64 = outcomes.iter().map(|o| o.1).sum();
    Ok((
        CheckRecord::at_most(
            "cftp/ising/detector_soundness_violations",
            bad as f64,
            0.0,
            blocks,
            Some(seed),
        ),
        coalesced,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    Ar,
    Cftp,
    Factory,
    Bounds,
}

impl FromStr for Suite {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "ar" => Suite::Ar,
            "cftp" => Suite::Cftp,
            "factory" => Suite::Factory,
            "bounds" => Suite::Bounds,
            other => {
                return Err(SimError::ContractViolation(format!(
                    "unknown suite {other:?}"
                )))
            }
        })
    }
}

/// The `(C, eps)` pairs exercised by the linear factory checks.
pub const LINEAR_CASES: [(f64, f64); 3] = [(2.0, 0.2), (1.5, 0.1), (4.0, 0.5)];

/// Run a suite at full acceptance sample sizes. Check `k` of the suite is
/// seeded with `seed + k * 2^40`.
pub fn run_suite(suite: Suite, seed: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    let mut k = 0u64;
    let mut next = || {
        k += 1;
        seed.wrapping_add(k << 40)
    };
    let wants = |s: Suite| suite == Suite::All || suite == s;

    if wants(Suite::Ar) {
        report.checks.extend(ar_die(next(), 100_000)?);
        report.checks.extend(ar_conditional(next(), 5, 20_000)?);
    }
    if wants(Suite::Factory) {
        for p in [0.1, 0.3, 0.5] {
            report.checks.extend(von_neumann_check(next(), p, 100_000)?);
        }
        for c in [0.5, 1.0, 2.0] {
            for p in [0.2, 0.5] {
                report.push(exp_factory_check(next(), c, p, 100_000)?);
            }
        }
        for (c, eps) in LINEAR_CASES {
            for p in [(1.0 - eps) / c, (1.0 - eps) / (2.0 * c)] {
                report
                    .checks
                    .extend(linear_factory_check(next(), c, eps, p, 10_000)?);
            }
        }
    }
    if wants(Suite::Cftp) {
        report.push(cftp_reflecting(next(), 100_000)?);
        report.push(cftp_reset(next(), 100_000)?);
        for beta in [0.2, 0.4] {
            report.push(cftp_ising(next(), 3, 3, beta, 200_000)?);
        }
        report.checks.extend(stationarity_checks(next(), 100_000)?);
        report.push(monotonicity(next(), 10_000)?);
        report.push(detector_soundness(next(), 1_000)?.0);
    }
    if wants(Suite::Bounds) {
        report.extend(truncation_die(next(), 100_000)?);
        report.extend(local_correctness_all());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_walk_oracle_closed_form() {
        // pi = (11, 6, 4) / 21 by hand elimination.
        let t = stationary_of_chain(&matrix(&RESET_MATRIX)).unwrap();
        for (p, want) in t
            .probabilities()
            .iter()
            .zip([11.0 / 21.0, 6.0 / 21.0, 4.0 / 21.0])
        {
            assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_matrices_match_update_functions() {
        // Integrate each update over a fine grid of u and compare with the
        // literal matrices.
        let grid = 300_000;
        fn estimate<U: UpdateFunction<State = u8>>(u: &U, grid: usize) -> [[f64; 3]; 3] {
            let mut m = [[0.0; 3]; 3];
            for x in 0..3u8 {
                for k in 0..grid {
                    let v = (k as f64 + 0.5) / grid as f64;
                    m[x as usize][u.step(&x, &[v]) as usize] += 1.0 / grid as f64;
                }
            }
            m
        }
        for (got, want) in [
            (estimate(&ReflectingWalk, grid), REFLECTING_MATRIX),
            (estimate(&ResetWalk, grid), RESET_MATRIX),
        ] {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((got[i][j] - want[i][j]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn small_suite_pieces_pass() {
        assert!(ar_die(1, 20_000).unwrap().iter().all(|c| c.pass));
        assert!(von_neumann_check(2, 0.3, 20_000)
            .unwrap()
            .iter()
            .all(|c| c.pass));
        assert!(exp_factory_check(3, 1.0, 0.5, 20_000).unwrap().pass);
        assert!(cftp_reset(4, 20_000).unwrap().pass);
        assert!(cftp_reflecting(5, 20_000).unwrap().pass);
        let (c, coalesced) = detector_soundness(6, 500).unwrap();
        assert!(c.pass);
        assert!(coalesced > 0);
    }

    #[test]
    fn checks_are_reproducible() {
        assert_eq!(ar_die(77, 5_000).unwrap(), ar_die(77, 5_000).unwrap());
        assert_eq!(
            cftp_ising(8, 2, 2, 0.3, 3_000).unwrap(),
            cftp_ising(8, 2, 2, 0.3, 3_000).unwrap()
        );
    }

    #[test]
    fn suite_names() {
        assert_eq!("bounds".parse::<Suite>().unwrap(), Suite::Bounds);
        assert!("everything".parse::<Suite>().is_err());
    }
}

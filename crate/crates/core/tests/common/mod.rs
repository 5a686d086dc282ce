#![allow(dead_code)]

use spikesel::criteria;
use spikesel::montecarlo::{ExperimentConfig, SummaryRow, SummaryTable};
use spikesel::montecarlo::{Estimator, Scenario};

/// Adaptive Simpson quadrature, used as an oracle for the closed forms.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        (a, fa): (f64, f64),
        (b, fb): (f64, f64),
        (m, fm): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, (a, fa), (m, fm), (lm, flm), left, tol / 2.0, depth - 1)
            + step(f, (m, fm), (b, fb), (rm, frm), right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, (a, fa), (b, fb), (m, fm), whole, tol, 60)
}

pub fn row(table: &SummaryTable, e: Estimator, s: Scenario) -> &SummaryRow {
    table.row(e, s).unwrap_or_else(|| panic!("missing cell {e} {s}"))
}

/// Prints one line per check and returns whether it passed.
pub fn report(id: &str, what: &str, observed: String, ok: bool) -> bool {
    println!(
        "[{}] {id}: {what} -- observed {observed}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

pub fn only(config: &mut ExperimentConfig, estimators: &[Estimator], scenarios: &[Scenario]) {
    config.estimators = estimators.to_vec();
    config.scenarios = scenarios.to_vec();
}

pub fn gamma_delta(n: usize, c: f64) -> f64 {
    criteria::gamma_delta(n, c)
}

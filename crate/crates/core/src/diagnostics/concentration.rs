//! Thresholds of the four high-probability events on the sampling errors and
//! their empirical violation rates over independent runs.
//!
//! An event holds when every entry is strictly below its threshold, so a run
//! violates it when some `|E_k(x, a)|` or `|ε_k(x, a)|` reaches the threshold.

use serde::Serialize;

use crate::bellman::pvar_sigma;
use crate::diagnostics::series::{a_gamma_k, a_inf, SeriesConstants};
use crate::diagnostics::trace::IterationTrace;
use crate::error::{Error, Result};
use crate::mdp::{QTable, TabularMdp, VTable};

/// `e1`/`e2` bound `‖E_k‖_∞` and `‖ε_k‖_∞`; `e3[k−1]`/`e4[k−1]` bound
/// `|E_k|` and `|ε_k|` entrywise for `k = 1..=K`. Entries needing `A_∞` are
/// `None` at `α = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventThresholds {
    pub e1: Option<f64>,
    pub e2: f64,
    pub e3: Option<Vec<QTable>>,
    pub e4: Vec<QTable>,
}

impl EventThresholds {
    /// Every threshold multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |tables: &Vec<QTable>| tables.iter().map(|t| t * factor).collect::<Vec<_>>();
        Self {
            e1: self.e1.map(|e| e * factor),
            e2: self.e2 * factor,
            e3: self.e3.as_ref().map(scale),
            e4: scale(&self.e4),
        }
    }

    pub fn iterations(&self) -> usize {
        self.e4.len()
    }
}

/// Inputs of [`concentration_thresholds`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdParams {
    pub alpha: f64,
    pub iterations: usize,
    pub samples_per_update: usize,
    pub delta: f64,
}

/// `PVar̄_j` for `j = 1..=K`; `PVar̄_1 = 0`.
#[allow(clippy::too_many_arguments)]
fn barred_variances(
    pvar_star: &QTable,
    alpha: f64,
    gamma: f64,
    h: f64,
    a_inf: Option<f64>,
    iota1: f64,
    m: f64,
    iterations: usize,
) -> Vec<QTable> {
    let rate = alpha.max(gamma);
    (1..=iterations)
        .map(|j| {
            if j == 1 {
                return QTable::zeros(pvar_star.num_states(), pvar_star.num_actions());
            }
            let ratio = a_inf.map_or(0.0, |ai| a_gamma_k(alpha, gamma, j - 2) / ai);
            let extra = 4.0 * h * h
                * (4.0 * rate.powi(2 * (j as i32 - 2)) + ratio * ratio + 36.0 * h * h * iota1 / m);
            pvar_star.map(|p| p + extra)
        })
        .collect()
}

pub fn concentration_thresholds(
    mdp: &TabularMdp,
    params: ThresholdParams,
    v_star: &VTable,
) -> Result<EventThresholds> {
    let ThresholdParams {
        alpha,
        iterations,
        samples_per_update,
        delta,
    } = params;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if iterations == 0 || samples_per_update == 0 {
        return Err(Error::InvalidParameter("K and M must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let gamma = mdp.discount();
    let h = mdp.horizon();
    let m = samples_per_update as f64;
    let consts = SeriesConstants::new(
        alpha,
        gamma,
        iterations,
        iterations,
        mdp.num_states(),
        mdp.num_actions(),
        delta,
    );
    let a_inf = a_inf(alpha);
    let (pvar_star, _) = pvar_sigma(mdp, v_star)?;
    let bars = barred_variances(&pvar_star, alpha, gamma, h, a_inf, consts.iota1, m, iterations);

    let bernstein = |var: &QTable| {
        var.map(|v| 4.0 * h * consts.iota2 / (3.0 * m) + (2.0 * v * consts.iota2).sqrt())
    };
    let e4 = bars.iter().map(|b| bernstein(&(b * (4.0 / m)))).collect();
    let e3 = a_inf.map(|_| {
        let mut acc = QTable::zeros(mdp.num_states(), mdp.num_actions());
        bars.iter()
            .map(|b| {
                // Σ_{j≤k} α^{2(k−j)} PVar̄_j, accumulated in k.
                acc = &acc * (alpha * alpha);
                acc.add_scaled(1.0, b);
                bernstein(&(&acc * (4.0 / m)))
            })
            .collect()
    });

    Ok(EventThresholds {
        e1: a_inf.map(|ai| 3.0 * h * (ai * consts.iota1 / m).sqrt()),
        e2: 3.0 * h * (consts.iota1 / m).sqrt(),
        e3,
        e4,
    })
}

/// Which events one run violates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EventViolations {
    pub e1: bool,
    pub e2: bool,
    pub e3: bool,
    pub e4: bool,
}

pub fn event_violations(trace: &[IterationTrace], thresholds: &EventThresholds) -> Result<EventViolations> {
    let iterations = thresholds.iterations();
    if trace.len() < iterations + 1 {
        return Err(Error::InvalidParameter(format!(
            "trace covers {} iterations, thresholds cover {iterations}",
            trace.len().saturating_sub(1)
        )));
    }
    let reaches = |table: &QTable, bound: &QTable| {
        table
            .values()
            .iter()
            .zip(bound.values())
            .any(|(e, b)| e.abs() >= *b)
    };
    let mut out = EventViolations::default();
    for k in 1..=iterations {
        let t = &trace[k];
        if let Some(e1) = thresholds.e1 {
            out.e1 |= t.big_e.sup_norm() >= e1;
        }
        out.e2 |= t.eps.sup_norm() >= thresholds.e2;
        if let Some(e3) = &thresholds.e3 {
            out.e3 |= reaches(&t.big_e, &e3[k - 1]);
        }
        out.e4 |= reaches(&t.eps, &thresholds.e4[k - 1]);
    }
    Ok(out)
}

/// Fraction of runs violating each event. `E1`/`E3` rates are `None` when the
/// thresholds lack them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ViolationRates {
    pub runs: usize,
    pub e1: Option<f64>,
    pub e2: f64,
    pub e3: Option<f64>,
    pub e4: f64,
}

pub fn event_violation_rates(
    traces: &[Vec<IterationTrace>],
    thresholds: &EventThresholds,
) -> Result<ViolationRates> {
    if traces.is_empty() {
        return Err(Error::InvalidParameter("need at least one run".into()));
    }
    let per_run = traces
        .iter()
        .map(|t| event_violations(t, thresholds))
        .collect::<Result<Vec<_>>>()?;
    let n = per_run.len() as f64;
    let rate = |f: fn(&EventViolations) -> bool| per_run.iter().filter(|v| f(v)).count() as f64 / n;
    Ok(ViolationRates {
        runs: per_run.len(),
        e1: thresholds.e1.map(|_| rate(|v| v.e1)),
        e2: rate(|v| v.e2),
        e3: thresholds.e3.as_ref().map(|_| rate(|v| v.e3)),
        e4: rate(|v| v.e4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::exact_optimal;
    use crate::garnet::{generate, GarnetParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_thresholds_match_hand_evaluation() {
        let mdp = generate(&GarnetParams::new(8, 2, 2, 0.9, 0)).unwrap();
        let opt = exact_optimal(&mdp, 1e-10).unwrap();
        let params = ThresholdParams {
            alpha: 0.9,
            iterations: 10,
            samples_per_update: 100,
            delta: 0.1,
        };
        let t = concentration_thresholds(&mdp, params, &opt.v_star).unwrap();
        let iota1 = 12800f64.ln();
        assert_abs_diff_eq!(iota1, 9.457, epsilon = 1e-3);
        assert_abs_diff_eq!(t.e1.unwrap(), 30.0 * (10.0 * iota1 / 100.0).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(t.e1.unwrap(), 29.17, epsilon = 1e-2);
        assert_abs_diff_eq!(t.e2, 9.225, epsilon = 1e-3);
    }

    #[test]
    fn first_refined_threshold_is_the_range_term() {
        let mdp = generate(&GarnetParams::new(5, 2, 1, 0.9, 2)).unwrap();
        let opt = exact_optimal(&mdp, 1e-10).unwrap();
        let params = ThresholdParams {
            alpha: 0.9,
            iterations: 3,
            samples_per_update: 8,
            delta: 0.2,
        };
        let t = concentration_thresholds(&mdp, params, &opt.v_star).unwrap();
        let iota2 = (16.0 * 3.0 * 10.0 / 0.2f64).ln();
        let floor = 4.0 * 10.0 * iota2 / (3.0 * 8.0);
        assert!(t.e4[0].values().iter().all(|v| (v - floor).abs() < 1e-12));
        assert!(t.e3.as_ref().unwrap()[0].values().iter().all(|v| (v - floor).abs() < 1e-12));
        assert!(t.e4[1].values().iter().all(|v| *v > floor));
    }

    #[test]
    fn alpha_one_drops_a_inf_events() {
        let mdp = generate(&GarnetParams::new(4, 2, 2, 0.9, 2)).unwrap();
        let opt = exact_optimal(&mdp, 1e-10).unwrap();
        let params = ThresholdParams {
            alpha: 1.0,
            iterations: 4,
            samples_per_update: 2,
            delta: 0.2,
        };
        let t = concentration_thresholds(&mdp, params, &opt.v_star).unwrap();
        assert!(t.e1.is_none() && t.e3.is_none());
        assert_eq!(t.e4.len(), 4);
    }
}

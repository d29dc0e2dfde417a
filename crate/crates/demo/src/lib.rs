//! Browser demo. Each operation takes plain numbers and returns a JSON string
//! so the page needs no generated TypeScript types. The `*_json` functions
//! are ordinary Rust and are what the native tests exercise.

use mdvi_core::algorithms::{
    boltzmann_policy, soft_value, theorem_params, Beta, Constants, Mdvi, MdviConfig, QLearning, QLearningConfig,
    Regime,
};
use mdvi_core::bellman::policy_evaluation;
use mdvi_core::garnet::{generate, GarnetParams};
use mdvi_core::harness::reference_value;
use mdvi_core::{ActionDistribution, QTable};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest `iterations * states * actions * samples` the page may request.
pub const WORK_LIMIT: u64 = 50_000_000;

#[derive(Serialize)]
struct Curve {
    label: String,
    samples: Vec<u64>,
    error: Vec<f64>,
}

#[derive(Serialize)]
struct Comparison {
    states: usize,
    actions: usize,
    v_star_max: f64,
    mdvi: Curve,
    qlearning: Curve,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_json(
    states: usize,
    actions: usize,
    branching: usize,
    gamma: f64,
    alpha: f64,
    samples: usize,
    iterations: usize,
    seed: u64,
) -> Result<String, String> {
    let work = iterations as u64 * states as u64 * actions as u64 * samples as u64;
    if work > WORK_LIMIT {
        return Err(format!("requested {work} sampler calls; the demo caps at {WORK_LIMIT}"));
    }
    let err = |e: mdvi_core::Error| e.to_string();
    let mdp = generate(&GarnetParams::new(states, actions, branching, gamma, seed)).map_err(err)?;
    let v_star = reference_value(&mdp).map_err(err)?;
    let gap = |v: &mdvi_core::VTable| (&v_star - v).sup_norm();

    let mut mdvi = Mdvi::new(&mdp, MdviConfig::greedy(alpha, iterations, samples, seed)).map_err(err)?;
    let mut q = QLearning::new(
        &mdp,
        QLearningConfig {
            iterations,
            samples_per_update: samples,
            rate_exponent: 1.0,
            seed,
        },
    )
    .map_err(err)?;
    let mut curves = [
        Curve {
            label: format!("MDVI (alpha = {alpha})"),
            samples: Vec::new(),
            error: Vec::new(),
        },
        Curve {
            label: "Q-learning (step 1/(k+1))".into(),
            samples: Vec::new(),
            error: Vec::new(),
        },
    ];
    // Thin out long runs to about 400 points per curve.
    let stride = (iterations / 400).max(1);
    for k in 0..=iterations {
        if k > 0 {
            mdvi.step();
            q.step();
        }
        if k % stride != 0 && k != iterations {
            continue;
        }
        let v_mdvi = policy_evaluation(&mdp, &mdvi.policy()).map_err(err)?;
        let v_q = policy_evaluation(&mdp, &q.policy()).map_err(err)?;
        curves[0].samples.push(mdvi.state().samples_used);
        curves[0].error.push(gap(&v_mdvi));
        curves[1].samples.push(q.samples_used());
        curves[1].error.push(gap(&v_q));
    }
    let [mdvi, qlearning] = curves;
    serde_json::to_string(&Comparison {
        states,
        actions,
        v_star_max: v_star.max(),
        mdvi,
        qlearning,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Softmax {
    max: f64,
    soft_value: f64,
    upper_bound: f64,
    probabilities: Vec<f64>,
}

/// Soft value and Boltzmann probabilities of one row of scores.
pub fn softmax_json(scores: &[f64], beta: f64) -> Result<String, String> {
    if scores.is_empty() || scores.iter().any(|s| !s.is_finite()) {
        return Err("scores must be a nonempty list of finite numbers".into());
    }
    let beta = Beta::finite(beta).map_err(|e| e.to_string())?;
    let row = QTable::from_rows(&[scores.to_vec()]).map_err(|e| e.to_string())?;
    let policy = boltzmann_policy(&row, beta);
    let max = row.row_max()[0];
    let slack = match beta {
        Beta::Finite(b) => (scores.len() as f64).ln() / b,
        Beta::Infinite => 0.0,
    };
    serde_json::to_string(&Softmax {
        max,
        soft_value: soft_value(&row, beta)[0],
        upper_bound: max + slack,
        probabilities: (0..scores.len()).map(|a| policy.prob(0, a)).collect(),
    })
    .map_err(|e| e.to_string())
}

pub fn params_json(
    theorem: u8,
    gamma: f64,
    states: usize,
    actions: usize,
    epsilon: f64,
    delta: f64,
) -> Result<String, String> {
    let regime = Regime::from_theorem(theorem).map_err(|e| e.to_string())?;
    let p = theorem_params(regime, gamma, states, actions, epsilon, delta, Constants::default())
        .map_err(|e| e.to_string())?;
    let total = p.total_samples(states, actions);
    let mut value = serde_json::to_value(&p).map_err(|e| e.to_string())?;
    // u128 does not fit JSON numbers reliably; send it as text.
    value["total_samples"] = serde_json::Value::String(total.to_string());
    Ok(value.to_string())
}

#[wasm_bindgen(js_name = compareConvergence)]
#[allow(clippy::too_many_arguments)]
pub fn compare_convergence(
    states: usize,
    actions: usize,
    branching: usize,
    gamma: f64,
    alpha: f64,
    samples: usize,
    iterations: usize,
    seed: u32,
) -> Result<String, JsError> {
    compare_json(states, actions, branching, gamma, alpha, samples, iterations, seed.into())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = softmaxRow)]
pub fn softmax_row(scores: Vec<f64>, beta: f64) -> Result<String, JsError> {
    softmax_json(&scores, beta).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = theoremParams)]
pub fn theorem_params_js(
    theorem: u8,
    gamma: f64,
    states: usize,
    actions: usize,
    epsilon: f64,
    delta: f64,
) -> Result<String, JsError> {
    params_json(theorem, gamma, states, actions, epsilon, delta).map_err(|e| JsError::new(&e))
}

//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Build with `wasm-pack build --target web crates/web` and serve `www/`
//! next to the generated `pkg/` directory.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(e: qlockin::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// CP fringe: signal of an `pulses`-pulse in-phase sequence at `points`
/// amplitudes spanning `(−b_max, b_max)`. Returns amplitudes (nT) followed
/// by signals, each `points` long.
#[wasm_bindgen]
pub fn cp_fringe(pulses: u32, points: u32) -> Result<Vec<f64>, JsError> {
    let f = demo::cp_fringe(pulses, points as usize).map_err(js_err)?;
    Ok(f.amplitudes_nt.into_iter().chain(f.signal).collect())
}

/// One dual-channel lock-in run as a JSON document with the reconstructed
/// amplitude and phase and both posteriors.
#[wasm_bindgen]
pub fn lockin_run(amplitude_nt: f64, theta_deg: f64, seed: u64) -> Result<String, JsError> {
    let r = demo::lockin_run(amplitude_nt, theta_deg, seed).map_err(js_err)?;
    Ok(serde_json::to_string(&r).expect("demo result serializes"))
}

/// Detuning sweep as a JSON document: CP-16 signal and mean Q-channel phase
/// against `δf / f0`.
#[wasm_bindgen]
pub fn frequency_response(amplitude_nt: f64, span_percent: f64, points: u32, trials: u32, seed: u64) -> Result<String, JsError> {
    let r = demo::frequency_response(amplitude_nt, span_percent, points as usize, trials, seed).map_err(js_err)?;
    Ok(serde_json::to_string(&r).expect("demo result serializes"))
}
